//! Tabular Roth-Erev learners.
//!
//! Choice probabilities are proportional to accrued reward. A successful
//! episode adds the learning rate to every cell the agent actually sampled;
//! failures change nothing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::game::{Agent, Decision, EpisodeRecord, GameConfig, Mask, Meaning, Role};

/// Draws index `j` with probability `weights[j] / Σ_{allowed} weights`.
pub fn sample_masked<R: Rng + ?Sized>(weights: &[f64], mask: Mask, rng: &mut R) -> Result<usize> {
    debug_assert_eq!(weights.len(), mask.len());
    let total: f64 = mask.allowed().map(|i| weights[i]).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(SimError::Sampling(format!(
            "row has non-positive mass {total} over {} allowed entries",
            mask.count_allowed()
        )));
    }
    let mut target = rng.random::<f64>() * total;
    let mut last = None;
    for i in mask.allowed() {
        let w = weights[i];
        if w <= 0.0 {
            continue;
        }
        if target < w {
            return Ok(i);
        }
        target -= w;
        last = Some(i);
    }
    // Rounding can leave a sliver of mass past the last entry.
    last.ok_or_else(|| SimError::Sampling("empty row".into()))
}

/// Periodic rescaling of accrued rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetPolicy {
    pub initial_reward: f64,
    pub smoothing: f64,
    /// Learning events between resets.
    pub interval: usize,
}

impl Default for ResetPolicy {
    fn default() -> Self {
        ResetPolicy {
            initial_reward: 100.0,
            smoothing: 1.0,
            interval: 1000,
        }
    }
}

/// `v <- v / Σv * initial_reward + smoothing`, in place.
pub fn reset_vector(values: &mut [f64], policy: &ResetPolicy) -> Result<()> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::Contract("cannot reset a zero-sum reward vector".into()));
    }
    for v in values.iter_mut() {
        *v = *v / total * policy.initial_reward + policy.smoothing;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RothErevAgent {
    game: GameConfig,
    /// `num_states` rows over the sender decision space (symbols, then ¬).
    sender: Vec<Vec<f64>>,
    /// `num_symbols` rows over actions.
    receiver: Vec<Vec<f64>>,
    /// Accrued reward for each concrete symbol as the negation identity,
    /// shared by both roles.
    negation: Vec<f64>,
    meaning: Vec<f64>,
    learning_rate: f64,
}

pub const INITIAL_ACCRUAL: f64 = 1.0;

impl RothErevAgent {
    pub fn new(game: GameConfig, learning_rate: f64) -> Self {
        let fill = |rows: usize, cols: usize| vec![vec![INITIAL_ACCRUAL; cols]; rows];
        RothErevAgent {
            game,
            sender: fill(game.num_states, game.sender_width()),
            receiver: fill(game.num_symbols, game.num_states),
            negation: vec![INITIAL_ACCRUAL; game.num_symbols],
            meaning: vec![INITIAL_ACCRUAL; Meaning::ALL.len()],
            learning_rate,
        }
    }

    pub fn game(&self) -> &GameConfig {
        &self.game
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn sender_matrix(&self) -> &[Vec<f64>] {
        &self.sender
    }

    pub fn receiver_matrix(&self) -> &[Vec<f64>] {
        &self.receiver
    }

    pub fn negation_weights(&self) -> &[f64] {
        &self.negation
    }

    pub fn meaning_weights(&self) -> &[f64] {
        &self.meaning
    }

    pub fn sender_matrix_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.sender
    }

    pub fn receiver_matrix_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.receiver
    }

    pub fn negation_weights_mut(&mut self) -> &mut [f64] {
        &mut self.negation
    }

    pub fn meaning_weights_mut(&mut self) -> &mut [f64] {
        &mut self.meaning
    }

    /// Credits the decisions this agent sampled in `role`, if the episode
    /// succeeded. Performed actions after the inverse derangement are not
    /// decisions and are never credited.
    pub fn reinforce(&mut self, record: &EpisodeRecord, role: Role) {
        if !record.success {
            return;
        }
        let eta = self.learning_rate;
        match role {
            Role::Sender => {
                credit(&mut self.sender, &record.first, eta);
                if let Some(second) = &record.second {
                    credit(&mut self.sender, second, eta);
                }
                if let Some(phi) = &record.sender_negation {
                    self.negation[phi.index] += eta;
                }
                if let Some(meaning) = &record.sender_meaning {
                    self.meaning[meaning.index] += eta;
                }
            }
            Role::Receiver => {
                credit(&mut self.receiver, &record.receive, eta);
                if let Some(psi) = &record.receiver_negation {
                    self.negation[psi.index] += eta;
                }
                if let Some(meaning) = &record.receiver_meaning {
                    self.meaning[meaning.index] += eta;
                }
            }
        }
    }

    /// Rescales sender rows, receiver rows, the negation vector and the
    /// meaning vector independently.
    pub fn reset_rewards(&mut self, policy: &ResetPolicy) -> Result<()> {
        for row in self.sender.iter_mut().chain(self.receiver.iter_mut()) {
            reset_vector(row, policy)?;
        }
        if self.game.kind.learns_identity() {
            reset_vector(&mut self.negation, policy)?;
        }
        if self.game.kind == crate::game::GameKind::CombinedNegation {
            reset_vector(&mut self.meaning, policy)?;
        }
        Ok(())
    }
}

fn credit(table: &mut [Vec<f64>], decision: &Decision, eta: f64) {
    table[decision.context][decision.index] += eta;
}

impl Agent for RothErevAgent {
    fn select_negation<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Decision> {
        let mask = Mask::all(self.negation.len());
        let index = sample_masked(&self.negation, mask, rng)?;
        Ok(Decision::tabular(0, index, mask))
    }

    fn select_meaning<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Decision> {
        let mask = Mask::all(self.meaning.len());
        let index = sample_masked(&self.meaning, mask, rng)?;
        Ok(Decision::tabular(0, index, mask))
    }

    fn send<R: Rng + ?Sized>(&self, state: usize, mask: Mask, rng: &mut R) -> Result<Decision> {
        let index = sample_masked(&self.sender[state], mask, rng)?;
        Ok(Decision::tabular(state, index, mask))
    }

    fn receive<R: Rng + ?Sized>(&self, symbol: usize, rng: &mut R) -> Result<Decision> {
        let mask = Mask::all(self.game.num_states);
        let index = sample_masked(&self.receiver[symbol], mask, rng)?;
        Ok(Decision::tabular(symbol, index, mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameKind, Message};
    use crate::rng::{stream, Stream};

    fn frequencies(weights: &[f64], mask: Mask, draws: usize) -> Vec<f64> {
        let mut rng = stream(7, Stream::Train);
        let mut counts = vec![0usize; weights.len()];
        for _ in 0..draws {
            counts[sample_masked(weights, mask, &mut rng).unwrap()] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn uniform_weights_sample_uniformly() {
        let f = frequencies(&[1.0; 4], Mask::all(4), 100_000);
        for p in f {
            assert!((p - 0.25).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn masked_entry_never_drawn() {
        let f = frequencies(&[1.0; 4], Mask::all(4).without(0), 100_000);
        assert_eq!(f[0], 0.0);
        for p in &f[1..] {
            assert!((p - 1.0 / 3.0).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn weighted_draw() {
        let f = frequencies(&[3.0, 1.0], Mask::all(2), 100_000);
        assert!((f[0] - 0.75).abs() < 0.01);
    }

    #[test]
    fn zero_mass_is_an_error() {
        let mut rng = stream(0, Stream::Train);
        assert!(sample_masked(&[0.0, 0.0], Mask::all(2), &mut rng).is_err());
        assert!(sample_masked(&[1.0, 0.0], Mask::all(2).without(0), &mut rng).is_err());
    }

    #[test]
    fn reset_arithmetic() {
        let policy = ResetPolicy::default();
        let mut v = vec![2.0, 6.0];
        reset_vector(&mut v, &policy).unwrap();
        assert_eq!(v, vec![26.0, 76.0]);

        let mut v = vec![5.0, 5.0];
        reset_vector(&mut v, &policy).unwrap();
        assert_eq!(v, vec![51.0, 51.0]);

        assert!(reset_vector(&mut [0.0, 0.0], &policy).is_err());
    }

    fn atomic_record(state: usize, symbol: usize, action: usize) -> EpisodeRecord {
        EpisodeRecord {
            state,
            sender_negation: None,
            receiver_negation: None,
            sender_meaning: None,
            receiver_meaning: None,
            first: Decision::tabular(state, symbol, Mask::all(8)),
            second: None,
            message: Message::Single(symbol),
            receive: Decision::tabular(symbol, action, Mask::all(8)),
            performed_action: action,
            unparseable_coin: None,
            success: action == state,
        }
    }

    #[test]
    fn failure_leaves_agent_untouched() {
        let game = GameConfig::new(GameKind::Atomic, 4).unwrap();
        let mut agent = RothErevAgent::new(game, 1.0);
        let before = agent.clone();
        agent.reinforce(&atomic_record(3, 2, 1), Role::Sender);
        agent.reinforce(&atomic_record(3, 2, 1), Role::Receiver);
        assert_eq!(agent, before);
    }

    #[test]
    fn success_credits_sampled_cells() {
        let game = GameConfig::new(GameKind::Atomic, 4).unwrap();
        let mut agent = RothErevAgent::new(game, 1.0);
        let rec = atomic_record(3, 2, 3);
        agent.reinforce(&rec, Role::Sender);
        agent.reinforce(&rec, Role::Receiver);
        assert_eq!(agent.sender_matrix()[3][2], 2.0);
        assert_eq!(agent.receiver_matrix()[2][3], 2.0);
        let total: f64 = agent.sender_matrix().iter().flatten().sum::<f64>()
            + agent.receiver_matrix().iter().flatten().sum::<f64>();
        assert_eq!(total, 128.0 + 2.0);
    }
}
