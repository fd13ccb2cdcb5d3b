//! Flat key-value experiment configuration.
//!
//! A config file is TOML with one key per line and no tables. Every key is
//! optional; command-line flags override file values and defaults fill the
//! rest. `game`, `n` and `p` have no default.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::game::{DerangementKind, GameConfig, GameKind};
use crate::neural::ChoiceBaseline;
use crate::population::{AgentKind, ExperimentConfig};

macro_rules! raw_config {
    ($($(#[$doc:meta])* $field:ident: $ty:ty,)*) => {
        /// Unresolved configuration as read from a file or flags.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct RawConfig {
            $($(#[$doc])* #[serde(default, skip_serializing_if = "Option::is_none")] pub $field: Option<$ty>,)*
        }

        impl RawConfig {
            /// Values set in `top` win.
            pub fn overlay(self, top: RawConfig) -> RawConfig {
                RawConfig { $($field: top.$field.or(self.$field),)* }
            }
        }
    };
}

raw_config! {
    /// atomic, basic, learned or combined.
    game: String,
    /// roth-erev (default) or neural.
    agent: String,
    n: usize,
    p: usize,
    events: usize,
    trials: usize,
    reset_interval: usize,
    eval_games: usize,
    eval_interval: usize,
    reps: usize,
    seed: u64,
    /// involution (default) or random.
    derangement: String,
    learning_rate: f64,
    initial_reward: f64,
    smoothing: f64,
    /// Atomic game only; defaults to 2n.
    states: usize,
    /// Atomic game only; defaults to 2n.
    symbols: usize,
    negation_branch: bool,
    neural_lr: f64,
    beta1: f64,
    beta2: f64,
    adam_eps: f64,
    clip: f64,
    ppo_epochs: usize,
    value_coef: f64,
    entropy_coef: f64,
    normalize_advantages: bool,
    max_grad_norm: f64,
    width: usize,
    depth: usize,
    zero_init_heads: bool,
    /// selected (default) or expected.
    choice_baseline: String,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::config(unknown_key(e.message()), e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            SimError::Config { key, reason } => SimError::config(key, format!("{}: {reason}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Validates every field and fills defaults.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let kind: GameKind = parse_key("game", self.game.as_deref())?
            .ok_or_else(|| SimError::config("game", "missing"))?;
        let agent = parse_key("agent", self.agent.as_deref())?.unwrap_or(AgentKind::RothErev);
        let n = self.n.ok_or_else(|| SimError::config("n", "missing"))?;
        let population = self.p.ok_or_else(|| SimError::config("p", "missing"))?;

        let mut game = if kind == GameKind::Atomic {
            GameConfig::atomic(self.states.unwrap_or(2 * n), self.symbols.unwrap_or(2 * n))?
        } else {
            if self.states.is_some() || self.symbols.is_some() {
                return Err(SimError::config("states", "only the atomic game takes explicit sizes"));
            }
            GameConfig::new(kind, n)?
        };
        if let Some(false) = self.negation_branch {
            game = game.without_negation_branch();
        } else if self.negation_branch == Some(true) && !kind.is_negation() {
            return Err(SimError::config("negation_branch", "atomic game has no negation"));
        }

        let mut cfg = ExperimentConfig::new(game, agent, population);
        macro_rules! set {
            ($($raw:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$raw { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            events => events,
            trials => trials,
            reset_interval => reset.interval,
            eval_games => eval_games,
            eval_interval => eval_interval,
            reps => repetitions,
            seed => base_seed,
            learning_rate => learning_rate,
            initial_reward => reset.initial_reward,
            smoothing => reset.smoothing,
            neural_lr => neural.adam.learning_rate,
            beta1 => neural.adam.beta1,
            beta2 => neural.adam.beta2,
            adam_eps => neural.adam.epsilon,
            clip => neural.ppo.clip,
            ppo_epochs => neural.ppo.epochs,
            value_coef => neural.ppo.value_coef,
            entropy_coef => neural.ppo.entropy_coef,
            normalize_advantages => neural.ppo.normalize_advantages,
            width => neural.width,
            depth => neural.depth,
            zero_init_heads => neural.zero_init_heads,
        );
        if let Some(v) = self.max_grad_norm {
            cfg.neural.ppo.max_grad_norm = Some(v);
        }
        if let Some(d) = parse_key::<DerangementKind>("derangement", self.derangement.as_deref())? {
            cfg.derangement = d;
        }
        if let Some(b) = parse_key::<ChoiceBaseline>("choice_baseline", self.choice_baseline.as_deref())? {
            cfg.neural.choice_baseline = b;
        }
        check_unit("beta1", cfg.neural.adam.beta1)?;
        check_unit("beta2", cfg.neural.adam.beta2)?;
        if !(cfg.neural.adam.epsilon > 0.0) {
            return Err(SimError::config("adam_eps", "must be positive"));
        }
        if !(cfg.neural.ppo.value_coef >= 0.0) {
            return Err(SimError::config("value_coef", "must be non-negative"));
        }
        if !(cfg.neural.ppo.entropy_coef >= 0.0) {
            return Err(SimError::config("entropy_coef", "must be non-negative"));
        }
        if matches!(cfg.neural.ppo.max_grad_norm, Some(m) if !(m > 0.0)) {
            return Err(SimError::config("max_grad_norm", "must be positive"));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_unit(key: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(SimError::config(key, "must lie in [0, 1)"))
    }
}

fn parse_key<T: FromStr<Err = String>>(key: &str, value: Option<&str>) -> Result<Option<T>> {
    value.map(|v| v.parse().map_err(|e: String| SimError::config(key, e))).transpose()
}

/// Pulls the key name out of a toml error such as "unknown field `foo`".
fn unknown_key(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field"))
        .unwrap_or("config")
        .to_string()
}
