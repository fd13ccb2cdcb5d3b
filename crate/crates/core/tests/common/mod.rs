//! Shared test oracles: exhaustive expected success for tabular policies
//! and hand-built signalling schemes.
#![allow(dead_code)]

pub mod gradcheck;

use negsig::game::{make_derangement, play, Agent, DerangementKind, GameConfig, GameKind};
use negsig::rng::{stream, Stream};
use negsig::roth_erev::RothErevAgent;
use rand::Rng;

/// Choice weights of a tabular agent, normalized over the allowed entries
/// at each decision.
#[derive(Debug, Clone)]
pub struct Policy {
    pub sender: Vec<Vec<f64>>,
    pub receiver: Vec<Vec<f64>>,
    pub negation: Vec<f64>,
    pub meaning: Vec<f64>,
}

impl Policy {
    pub fn of(agent: &RothErevAgent) -> Self {
        Policy {
            sender: agent.sender_matrix().to_vec(),
            receiver: agent.receiver_matrix().to_vec(),
            negation: agent.negation_weights().to_vec(),
            meaning: agent.meaning_weights().to_vec(),
        }
    }

    pub fn uniform(game: &GameConfig) -> Self {
        let width = game.num_symbols + usize::from(game.kind.is_negation());
        Policy {
            sender: vec![vec![1.0; width]; game.num_states],
            receiver: vec![vec![1.0; game.num_states]; game.num_symbols],
            negation: vec![1.0; game.num_symbols],
            meaning: vec![1.0; 3],
        }
    }
}

fn normalized(weights: &[f64], allowed: impl Fn(usize) -> bool) -> Vec<f64> {
    let total: f64 = (0..weights.len()).filter(|&j| allowed(j)).map(|j| weights[j]).sum();
    (0..weights.len())
        .map(|j| if allowed(j) { weights[j] / total } else { 0.0 })
        .collect()
}

fn full(weights: &[f64]) -> Vec<f64> {
    normalized(weights, |_| true)
}

const IGNORE: usize = 0;
const ATOMIC: usize = 1;
const NEGATION: usize = 2;

/// Probability that a game starting in a uniformly drawn state succeeds,
/// computed by summing over every branch of the protocol.
///
/// `forward` is the derangement f; the receiver succeeds through the
/// inverse exactly when its sampled action is f(s).
pub fn expected_success(game: &GameConfig, forward: &[usize], sender: &Policy, receiver: &Policy) -> f64 {
    let n = game.n;
    let states = game.num_states;
    let branch = game.negation_branch;
    let recv = |m: usize, a: usize| full(&receiver.receiver[m])[a];
    let total: f64 = (0..states)
        .map(|s| {
            let fs = forward.get(s).copied().unwrap_or(usize::MAX);
            match game.kind {
                GameKind::Atomic => {
                    let p = full(&sender.sender[s]);
                    (0..game.num_symbols).map(|m| p[m] * recv(m, s)).sum::<f64>()
                }
                GameKind::BasicNegation => {
                    let neg = n + 1;
                    let first = normalized(&sender.sender[s], |j| j != n && (branch || j != neg));
                    let single: f64 = (0..n).map(|m| first[m] * recv(m, s)).sum();
                    if first[neg] == 0.0 {
                        return single;
                    }
                    let second = normalized(&sender.sender[fs], |j| j != n && j != neg);
                    let pair: f64 = (0..n).map(|m| second[m] * recv(m, fs)).sum();
                    single + first[neg] * pair
                }
                GameKind::LearnedNegation | GameKind::CombinedNegation => {
                    let neg = n + 1;
                    let symbols = n + 1;
                    let phis = full(&sender.negation);
                    let psis = full(&receiver.negation);
                    let combined = game.kind == GameKind::CombinedNegation;
                    let (mu_s, mu_r) = if combined {
                        (full(&sender.meaning), full(&receiver.meaning))
                    } else {
                        (vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0])
                    };
                    let mut acc = 0.0;
                    for phi in 0..symbols {
                        for psi in 0..symbols {
                            for ms in 0..3 {
                                for mr in 0..3 {
                                    let w = phis[phi] * psis[psi] * mu_s[ms] * mu_r[mr];
                                    if w == 0.0 {
                                        continue;
                                    }
                                    // Non-negation senders never emit ¬ and,
                                    // like negation senders, never emit φ.
                                    let may_negate = ms == NEGATION && branch;
                                    let first = normalized(&sender.sender[s], |j| j != phi && (may_negate || j != neg));
                                    let mut p: f64 = (0..symbols).map(|m| first[m] * recv(m, s)).sum();
                                    if first[neg] > 0.0 {
                                        let second = normalized(&sender.sender[fs], |j| j != phi && j != neg);
                                        let pair: f64 = (0..symbols)
                                            .map(|m| {
                                                if second[m] == 0.0 {
                                                    return 0.0;
                                                }
                                                let other = if psi == phi {
                                                    Some(m)
                                                } else if psi == m {
                                                    Some(phi)
                                                } else {
                                                    None
                                                };
                                                let success = match other {
                                                    None => 0.5 * recv(phi, s) + 0.5 * recv(m, s),
                                                    Some(o) if !combined || mr == NEGATION => recv(o, fs),
                                                    Some(o) if mr == IGNORE => recv(o, s),
                                                    Some(_) => {
                                                        debug_assert_eq!(mr, ATOMIC);
                                                        recv(psi, s)
                                                    }
                                                };
                                                second[m] * success
                                            })
                                            .sum();
                                        p += first[neg] * pair;
                                    }
                                    acc += w * p;
                                }
                            }
                        }
                    }
                    acc
                }
            }
        })
        .sum();
    total / states as f64
}

/// One-hot row of `width` entries.
pub fn one_hot(width: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    v
}

/// A perfect signalling system under the pair involution.
///
/// States `i < n` are named by symbol `i`; state `i + n` is sent as ¬
/// followed by the name of `i`. In the learned and combined games the last
/// concrete symbol `n` serves as φ = ψ; in the combined game the meaning is
/// always Negation.
pub fn perfect_scheme(game: &GameConfig) -> Policy {
    let n = game.n;
    let states = game.num_states;
    match game.kind {
        GameKind::Atomic => Policy {
            sender: (0..states).map(|s| one_hot(game.num_symbols, s)).collect(),
            receiver: (0..game.num_symbols).map(|m| one_hot(states, m.min(states - 1))).collect(),
            negation: vec![1.0; game.num_symbols],
            meaning: vec![1.0; 3],
        },
        _ => {
            let width = n + 2;
            let sender = (0..states)
                .map(|s| if s < n { one_hot(width, s) } else { one_hot(width, n + 1) })
                .collect();
            // The symbol for n is reserved; its row is never consulted.
            let receiver = (0..=n).map(|m| one_hot(states, m.min(n - 1))).collect();
            Policy {
                sender,
                receiver,
                negation: one_hot(n + 1, n),
                meaning: one_hot(3, NEGATION),
            }
        }
    }
}

/// Writes a policy into a Roth-Erev agent. Zero weights are replaced by
/// a tiny positive amount so every allowed row keeps sampling mass.
pub fn install(agent: &mut RothErevAgent, policy: &Policy) {
    let fix = |v: &f64| if *v > 0.0 { *v } else { 1e-300 };
    for (dst, src) in agent.sender_matrix_mut().iter_mut().zip(&policy.sender) {
        dst.iter_mut().zip(src).for_each(|(d, s)| *d = fix(s));
    }
    for (dst, src) in agent.receiver_matrix_mut().iter_mut().zip(&policy.receiver) {
        dst.iter_mut().zip(src).for_each(|(d, s)| *d = fix(s));
    }
    agent.negation_weights_mut().iter_mut().zip(&policy.negation).for_each(|(d, s)| *d = fix(s));
    agent.meaning_weights_mut().iter_mut().zip(&policy.meaning).for_each(|(d, s)| *d = fix(s));
}

pub fn agent_with(game: GameConfig, policy: &Policy) -> RothErevAgent {
    let mut a = RothErevAgent::new(game, 1.0);
    install(&mut a, policy);
    a
}

pub fn empirical<A: Agent>(game: &GameConfig, s: &A, r: &A, episodes: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, Stream::Train);
    let d = make_derangement(game.n, DerangementKind::PairInvolution, &mut rng).unwrap();
    let wins: usize = (0..episodes)
        .map(|_| {
            let state = rng.random_range(0..game.num_states);
            usize::from(play(game, s, r, state, &d, &mut rng).unwrap().success)
        })
        .sum();
    wins as f64 / episodes as f64
}

/// The pair involution i -> (i + n) mod 2n as a forward map.
pub fn involution(n: usize) -> Vec<usize> {
    (0..2 * n).map(|i| (i + n) % (2 * n)).collect()
}

/// Every pure profile without the negation branch, n = 2.
pub fn best_pure_without_negation(kind: GameKind) -> f64 {
    let game = GameConfig::new(kind, 2).unwrap().without_negation_branch();
    let states = game.num_states;
    let symbols = game.num_symbols;
    let width = game.sender_width();
    let mut best: f64 = 0.0;
    let phis: Vec<usize> = if kind.learns_identity() { (0..symbols).collect() } else { vec![2] };
    for &phi in &phis {
        let allowed: Vec<usize> = (0..symbols).filter(|&m| m != phi).collect();
        for code in 0..allowed.len().pow(states as u32) {
            let sender: Vec<Vec<f64>> = (0..states)
                .map(|s| one_hot(width, allowed[code / allowed.len().pow(s as u32) % allowed.len()]))
                .collect();
            for rcode in 0..states.pow(symbols as u32) {
                let receiver: Vec<Vec<f64>> = (0..symbols)
                    .map(|m| one_hot(states, rcode / states.pow(m as u32) % states))
                    .collect();
                for meaning in 0..3 {
                    let p = Policy {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                        negation: one_hot(symbols, phi),
                        meaning: one_hot(3, meaning),
                    };
                    best = best.max(expected_success(&game, &involution(2), &p, &p));
                }
            }
        }
    }
    best
}
