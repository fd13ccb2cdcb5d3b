//! Learning events, frozen fitness evaluation, repetitions and summaries.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, SimError};
use crate::game::{make_derangement, play, Agent, Derangement, DerangementKind, EpisodeRecord, GameConfig, Role};
use crate::neural::{NeuralAgent, NeuralConfig};
use crate::rng::{stream, SimRng, Stream};
use crate::roth_erev::{ResetPolicy, RothErevAgent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    RothErev,
    Neural,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::RothErev => "roth-erev",
            AgentKind::Neural => "neural",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "roth-erev" | "rotherev" => Ok(AgentKind::RothErev),
            "neural" => Ok(AgentKind::Neural),
            other => Err(format!("unknown agent `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub agent: AgentKind,
    /// Population size p.
    pub population: usize,
    /// Learning events e.
    pub events: usize,
    /// Games per ordered pair per learning event, k.
    pub trials: usize,
    /// Roth-Erev reward resetting; `interval` is r.
    pub reset: ResetPolicy,
    /// Frozen games per ordered pair per evaluation, g.
    pub eval_games: usize,
    pub eval_interval: usize,
    pub repetitions: usize,
    /// Repetition i runs with seed `base_seed + i`.
    pub base_seed: u64,
    pub derangement: DerangementKind,
    /// Roth-Erev increment η.
    pub learning_rate: f64,
    pub neural: NeuralConfig,
}

impl ExperimentConfig {
    /// Defaults: e=10000, k=10, r=1000, g=50, evaluation every 100 events,
    /// 10 repetitions from seed 42, η=1.
    pub fn new(game: GameConfig, agent: AgentKind, population: usize) -> Self {
        ExperimentConfig {
            game,
            agent,
            population,
            events: 10_000,
            trials: 10,
            reset: ResetPolicy::default(),
            eval_games: 50,
            eval_interval: 100,
            repetitions: 10,
            base_seed: 42,
            derangement: DerangementKind::PairInvolution,
            learning_rate: 1.0,
            neural: NeuralConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        let positive = [
            ("events", self.events),
            ("trials", self.trials),
            ("eval_games", self.eval_games),
            ("eval_interval", self.eval_interval),
            ("reps", self.repetitions),
            ("reset_interval", self.reset.interval),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(SimError::config(key, "must be positive"));
            }
        }
        if self.population < 2 {
            return Err(SimError::config("p", "population needs at least 2 agents"));
        }
        if self.eval_interval > self.events {
            return Err(SimError::config("eval_interval", "must not exceed events"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SimError::config("learning_rate", "must be positive"));
        }
        if !(self.reset.initial_reward > 0.0) {
            return Err(SimError::config("initial_reward", "must be positive"));
        }
        if !(self.reset.smoothing >= 0.0) {
            return Err(SimError::config("smoothing", "must be non-negative"));
        }
        let ppo = &self.neural.ppo;
        if !(ppo.clip > 0.0 && ppo.clip < 1.0) {
            return Err(SimError::config("clip", "must lie in (0, 1)"));
        }
        if ppo.epochs == 0 {
            return Err(SimError::config("ppo_epochs", "must be positive"));
        }
        if self.neural.width == 0 {
            return Err(SimError::config("width", "must be positive"));
        }
        if !(self.neural.adam.learning_rate > 0.0) {
            return Err(SimError::config("neural_lr", "must be positive"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repetitions as u64).map(|i| self.base_seed + i).collect()
    }
}

/// An agent the population harness can train.
pub trait Learner: Agent + Sized + Send {
    fn spawn(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<Self>;

    /// Called once per game and role while learning is enabled.
    fn observe(&mut self, record: &EpisodeRecord, role: Role);

    /// Called once per agent at the end of each learning event.
    fn end_event(&mut self) -> Result<()>;

    fn reset_rewards(&mut self, policy: &ResetPolicy) -> Result<()>;
}

impl Learner for RothErevAgent {
    fn spawn(cfg: &ExperimentConfig, _rng: &mut SimRng) -> Result<Self> {
        Ok(RothErevAgent::new(cfg.game, cfg.learning_rate))
    }

    fn observe(&mut self, record: &EpisodeRecord, role: Role) {
        self.reinforce(record, role);
    }

    fn end_event(&mut self) -> Result<()> {
        Ok(())
    }

    fn reset_rewards(&mut self, policy: &ResetPolicy) -> Result<()> {
        RothErevAgent::reset_rewards(self, policy)
    }
}

impl Learner for NeuralAgent {
    fn spawn(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<Self> {
        NeuralAgent::new(cfg.game, cfg.neural, rng)
    }

    fn observe(&mut self, record: &EpisodeRecord, role: Role) {
        NeuralAgent::observe(self, record, role);
    }

    fn end_event(&mut self) -> Result<()> {
        self.learn().map(|_| ())
    }

    fn reset_rewards(&mut self, _policy: &ResetPolicy) -> Result<()> {
        Ok(())
    }
}

/// One fitness evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessSample {
    pub event: usize,
    pub fitness_with_self: f64,
    pub fitness_without_self: f64,
}

/// A fitness sample together with how often two-symbol messages were sent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessReport {
    pub sample: FitnessSample,
    pub negation_rate: f64,
    pub games: usize,
}

/// Counts from one learning event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventStats {
    pub games: usize,
    pub successes: usize,
}

/// Shuffles the agents, then every ordered pair (self-pairs included)
/// plays `trials` consecutive games with learning enabled.
pub fn run_learning_event<A: Learner>(
    agents: &mut [A],
    cfg: &ExperimentConfig,
    derangement: &Derangement,
    rng: &mut SimRng,
) -> Result<EventStats> {
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.shuffle(rng);
    let mut stats = EventStats::default();
    for &s in &order {
        for &r in &order {
            for _ in 0..cfg.trials {
                let state = rng.random_range(0..cfg.game.num_states);
                let record = play(&cfg.game, &agents[s], &agents[r], state, derangement, rng)?;
                agents[s].observe(&record, Role::Sender);
                agents[r].observe(&record, Role::Receiver);
                stats.games += 1;
                stats.successes += usize::from(record.success);
            }
        }
    }
    for agent in agents.iter_mut() {
        agent.end_event()?;
    }
    Ok(stats)
}

/// Plays `games_per_pair` frozen games for every ordered pair. Agents are
/// only read.
pub fn evaluate_fitness<A: Agent>(
    agents: &[A],
    game: &GameConfig,
    games_per_pair: usize,
    derangement: &Derangement,
    event: usize,
    rng: &mut SimRng,
) -> Result<FitnessReport> {
    let (mut all, mut cross, mut negated) = (0usize, 0usize, 0usize);
    let p = agents.len();
    for s in 0..p {
        for r in 0..p {
            for _ in 0..games_per_pair {
                let state = rng.random_range(0..game.num_states);
                let record = play(game, &agents[s], &agents[r], state, derangement, rng)?;
                all += usize::from(record.success);
                if s != r {
                    cross += usize::from(record.success);
                }
                negated += usize::from(record.used_negation());
            }
        }
    }
    let games = p * p * games_per_pair;
    let cross_games = p * (p - 1) * games_per_pair;
    Ok(FitnessReport {
        sample: FitnessSample {
            event,
            fitness_with_self: all as f64 / games as f64,
            fitness_without_self: if cross_games > 0 {
                cross as f64 / cross_games as f64
            } else {
                f64::NAN
            },
        },
        negation_rate: negated as f64 / games as f64,
        games,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub trajectory: Vec<FitnessSample>,
    /// Share of evaluation games that used a two-symbol message, aligned
    /// with `trajectory`. Empty when read back from a CSV.
    pub negation_rates: Vec<f64>,
    pub peak_with_self: f64,
    pub peak_without_self: f64,
    /// Set when a numeric failure ended the repetition early; the
    /// trajectory then holds the samples taken before the failure.
    pub aborted: Option<String>,
}

impl RepetitionResult {
    pub fn new(repetition: usize, seed: u64, trajectory: Vec<FitnessSample>) -> Self {
        let mut r = RepetitionResult {
            repetition,
            seed,
            trajectory,
            negation_rates: Vec::new(),
            peak_with_self: f64::NAN,
            peak_without_self: f64::NAN,
            aborted: None,
        };
        r.update_peaks();
        r
    }

    fn update_peaks(&mut self) {
        let max = |f: fn(&FitnessSample) -> f64| {
            self.trajectory
                .iter()
                .map(f)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        self.peak_with_self = max(|s| s.fitness_with_self);
        self.peak_without_self = max(|s| s.fitness_without_self);
    }

    pub fn push(&mut self, report: &FitnessReport) {
        self.trajectory.push(report.sample);
        self.negation_rates.push(report.negation_rate);
        self.peak_with_self = self.peak_with_self.max(report.sample.fitness_with_self);
        self.peak_without_self = self.peak_without_self.max(report.sample.fitness_without_self);
    }

    pub fn is_complete(&self) -> bool {
        self.aborted.is_none()
    }
}

/// One repetition's worth of state: agents, derangement and rng streams.
pub struct Simulation<A> {
    cfg: ExperimentConfig,
    repetition: usize,
    seed: u64,
    derangement: Derangement,
    agents: Vec<A>,
    train_rng: SimRng,
    eval_rng: SimRng,
    event: usize,
}

impl<A: Learner> Simulation<A> {
    pub fn new(cfg: &ExperimentConfig, repetition: usize) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.base_seed + repetition as u64;
        let mut init = stream(seed, Stream::Init);
        let derangement = make_derangement(cfg.game.n, cfg.derangement, &mut init)?;
        let agents = (0..cfg.population)
            .map(|_| A::spawn(cfg, &mut init))
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulation {
            cfg: *cfg,
            repetition,
            seed,
            derangement,
            agents,
            train_rng: stream(seed, Stream::Train),
            eval_rng: stream(seed, Stream::Eval),
            event: 0,
        })
    }

    pub fn agents(&self) -> &[A] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [A] {
        &mut self.agents
    }

    pub fn derangement(&self) -> &Derangement {
        &self.derangement
    }

    pub fn event(&self) -> usize {
        self.event
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Runs one learning event, then resets rewards if due.
    pub fn step(&mut self) -> Result<EventStats> {
        let stats = run_learning_event(&mut self.agents, &self.cfg, &self.derangement, &mut self.train_rng)?;
        self.event += 1;
        if self.event % self.cfg.reset.interval == 0 {
            for agent in &mut self.agents {
                agent.reset_rewards(&self.cfg.reset)?;
            }
        }
        Ok(stats)
    }

    pub fn evaluate(&mut self) -> Result<FitnessReport> {
        evaluate_fitness(
            &self.agents,
            &self.cfg.game,
            self.cfg.eval_games,
            &self.derangement,
            self.event,
            &mut self.eval_rng,
        )
    }

    /// Runs the remaining events, evaluating at event 0 and every
    /// `eval_interval` events.
    pub fn run(&mut self) -> Result<RepetitionResult> {
        let mut result = RepetitionResult::new(self.repetition, self.seed, Vec::new());
        if self.event == 0 {
            result.push(&self.evaluate()?);
        }
        while self.event < self.cfg.events {
            if let Err(err) = self.step() {
                match err {
                    SimError::Numeric(_) | SimError::Sampling(_) => {
                        log::error!(
                            "repetition {} (seed {}) aborted at event {}: {err}",
                            self.repetition,
                            self.seed,
                            self.event
                        );
                        result.aborted = Some(format!("event {}: {err}", self.event));
                        return Ok(result);
                    }
                    other => return Err(other),
                }
            }
            if self.event % self.cfg.eval_interval == 0 {
                result.push(&self.evaluate()?);
            }
        }
        Ok(result)
    }
}

pub fn run_repetition(cfg: &ExperimentConfig, repetition: usize) -> Result<RepetitionResult> {
    match cfg.agent {
        AgentKind::RothErev => Simulation::<RothErevAgent>::new(cfg, repetition)?.run(),
        AgentKind::Neural => Simulation::<NeuralAgent>::new(cfg, repetition)?.run(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Repetitions on the rayon pool; sequential when built without the
    /// `parallel` feature.
    Parallel,
}

/// Runs every repetition. Results are ordered by repetition regardless of
/// execution mode.
pub fn run_experiment(cfg: &ExperimentConfig, execution: Execution) -> Result<Vec<RepetitionResult>> {
    cfg.validate()?;
    let reps: Vec<usize> = (0..cfg.repetitions).collect();
    match execution {
        Execution::Sequential => reps.iter().map(|&i| run_repetition(cfg, i)).collect(),
        Execution::Parallel => run_parallel(cfg, &reps),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel(cfg: &ExperimentConfig, reps: &[usize]) -> Result<Vec<RepetitionResult>> {
    use rayon::prelude::*;
    reps.par_iter().map(|&i| run_repetition(cfg, i)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(cfg: &ExperimentConfig, reps: &[usize]) -> Result<Vec<RepetitionResult>> {
    reps.iter().map(|&i| run_repetition(cfg, i)).collect()
}

/// A fixed sender and a fixed receiver playing `iterations` learning games,
/// followed by `cfg.eval_games` frozen games. Returns the frozen success
/// rate. No resets are applied.
pub fn run_dyad<A: Learner>(cfg: &ExperimentConfig, iterations: usize, seed: u64) -> Result<f64> {
    cfg.game.validate()?;
    let mut init = stream(seed, Stream::Init);
    let derangement = make_derangement(cfg.game.n, cfg.derangement, &mut init)?;
    let mut sender = A::spawn(cfg, &mut init)?;
    let mut receiver = A::spawn(cfg, &mut init)?;
    let mut rng = stream(seed, Stream::Train);
    for _ in 0..iterations {
        let state = rng.random_range(0..cfg.game.num_states);
        let record = play(&cfg.game, &sender, &receiver, state, &derangement, &mut rng)?;
        sender.observe(&record, Role::Sender);
        receiver.observe(&record, Role::Receiver);
        sender.end_event()?;
        receiver.end_event()?;
    }
    let mut rng = stream(seed, Stream::Eval);
    let mut wins = 0usize;
    for _ in 0..cfg.eval_games {
        let state = rng.random_range(0..cfg.game.num_states);
        wins += usize::from(play(&cfg.game, &sender, &receiver, state, &derangement, &mut rng)?.success);
    }
    Ok(wins as f64 / cfg.eval_games as f64)
}

/// Mean peak fitness with a Student-t 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Absent with fewer than two repetitions.
    pub half_width: Option<f64>,
    pub peaks: Vec<f64>,
}

impl Summary {
    /// Interval bounds clamped to `[0, 1]`.
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.half_width
            .map(|h| ((self.mean - h).clamp(0.0, 1.0), (self.mean + h).clamp(0.0, 1.0)))
    }
}

pub fn summarize_peaks(peaks: &[f64]) -> Result<Summary> {
    if peaks.is_empty() {
        return Err(SimError::Contract("cannot summarize zero repetitions".into()));
    }
    let n = peaks.len() as f64;
    let mean = peaks.iter().sum::<f64>() / n;
    let half_width = (peaks.len() >= 2).then(|| {
        let var = peaks.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 1.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        t * se
    });
    Ok(Summary {
        mean,
        half_width,
        peaks: peaks.to_vec(),
    })
}

/// Summary of peak fitness with self-play.
pub fn summarize(results: &[RepetitionResult]) -> Result<Summary> {
    summarize_peaks(&results.iter().map(|r| r.peak_with_self).collect::<Vec<_>>())
}

/// Summary of peak fitness excluding self-play.
pub fn summarize_without_self(results: &[RepetitionResult]) -> Result<Summary> {
    summarize_peaks(&results.iter().map(|r| r.peak_without_self).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameKind;

    #[test]
    fn zero_variance_summary() {
        let s = summarize_peaks(&[0.9; 5]).unwrap();
        assert!((s.mean - 0.9).abs() < 1e-12);
        assert!(s.half_width.unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_point_summary_uses_t_quantile() {
        let s = summarize_peaks(&[0.8, 1.0]).unwrap();
        assert!((s.mean - 0.9).abs() < 1e-12);
        // t(0.975, 1) = 12.7062..., SE = 0.1
        assert!((s.half_width.unwrap() - 1.270_620_473_6).abs() < 1e-6);
        assert_eq!(s.interval(), Some((0.0, 1.0)));
    }

    #[test]
    fn single_repetition_has_no_interval() {
        let s = summarize_peaks(&[0.7]).unwrap();
        assert_eq!(s.half_width, None);
        assert!(summarize_peaks(&[]).is_err());
    }

    #[test]
    fn config_validation_names_keys() {
        let game = GameConfig::new(GameKind::LearnedNegation, 4).unwrap();
        let mut cfg = ExperimentConfig::new(game, AgentKind::RothErev, 2);
        assert!(cfg.validate().is_ok());
        cfg.population = 1;
        assert!(matches!(cfg.validate(), Err(SimError::Config { key, .. }) if key == "p"));
        cfg.population = 2;
        cfg.eval_interval = cfg.events + 1;
        assert!(matches!(cfg.validate(), Err(SimError::Config { key, .. }) if key == "eval_interval"));
    }

    #[test]
    fn seeds_follow_base() {
        let game = GameConfig::new(GameKind::LearnedNegation, 4).unwrap();
        let cfg = ExperimentConfig::new(game, AgentKind::RothErev, 2);
        assert_eq!(cfg.seeds(), (42..52).collect::<Vec<_>>());
    }
}
