//! Finite-difference probe of the full policy network.

use negsig::game::{GameConfig, GameKind, Mask};
use negsig::neural::{NeuralConfig, PolicyNet, HEAD_MEANING, HEAD_NEGATION, HEAD_RECEIVER, HEAD_SENDER};
use negsig::nn::{ActorCritic, Parameters, Tensor, Transition};
use negsig::rng::{stream, Stream};
use rand::Rng;

pub const H: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-4;
const PROBES: usize = 24;

fn transition(head: usize, context: usize, mask: Mask, action: usize) -> Transition {
    Transition {
        head,
        context,
        mask,
        action,
        old_log_prob: 0.0,
        old_value: 0.0,
        reward: 0.0,
    }
}

/// A batch touching every state, symbol and option of the combined game.
fn full_batch(game: &GameConfig) -> Vec<Transition> {
    let mut batch = Vec::new();
    for s in 0..game.num_states {
        batch.push(transition(HEAD_SENDER, s, Mask::all(game.sender_width()).without(s % game.n), 0));
    }
    for m in 0..game.num_symbols {
        batch.push(transition(HEAD_RECEIVER, m, Mask::all(game.num_states), m));
    }
    for o in 0..game.num_symbols {
        batch.push(transition(HEAD_NEGATION, 0, Mask::all(game.num_symbols), o));
    }
    for o in 0..3 {
        batch.push(transition(HEAD_MEANING, 0, Mask::all(3), o));
    }
    batch
}

struct Probe {
    dlogits: Vec<Vec<f64>>,
    dvalues: Vec<f64>,
}

impl Probe {
    fn loss(&self, net: &PolicyNet, batch: &[Transition]) -> f64 {
        let eval = net.forward(batch).unwrap();
        let mut total = 0.0;
        for (i, logits) in eval.logits.iter().enumerate() {
            total += logits.iter().zip(&self.dlogits[i]).map(|(a, b)| a * b).sum::<f64>();
            total += eval.values[i] * self.dvalues[i];
        }
        total
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff < 1e-10 {
        0.0
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

/// Names of the parameter groups in `NeuralParams::tensors` order.
fn groups(net: &PolicyNet) -> Vec<(String, usize)> {
    let p = &net.params;
    let mut g = vec![("sender_embedding".to_string(), 1), ("receiver_embedding".to_string(), 1)];
    g.push(("processor".into(), p.processor.tensors().len()));
    g.push(("sender_projection".into(), 2));
    g.push(("receiver_projection".into(), 2));
    g.push(("critic".into(), p.critic.tensors().len()));
    for (name, heads) in [("negation", &p.negation), ("meaning", &p.function)] {
        if let Some(h) = heads {
            g.push((format!("{name}.policy"), h.policy.tensors().len()));
            g.push((format!("{name}.critic_embedding"), 1));
            g.push((format!("{name}.critic"), h.critic.tensors().len()));
        }
    }
    g
}

/// Worst relative error per parameter group. Panics if a group's probed
/// gradients are all zero, since that would make the check vacuous.
pub fn check_network(kind: GameKind, n: usize, cfg: NeuralConfig, seed: u64) -> Vec<(String, f64)> {
    let game = GameConfig::new(kind, n).unwrap();
    let mut rng = stream(seed, Stream::Init);
    let mut net = PolicyNet::new(game, &cfg, &mut rng);
    let batch: Vec<Transition> = full_batch(&game)
        .into_iter()
        .filter(|t| match t.head {
            HEAD_NEGATION => game.kind.learns_identity(),
            HEAD_MEANING => game.kind == GameKind::CombinedNegation,
            _ => true,
        })
        .collect();
    let eval = net.forward(&batch).unwrap();
    let probe = Probe {
        dlogits: eval
            .logits
            .iter()
            .map(|l| l.iter().map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        dvalues: eval.values.iter().map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let grads = net.backward(&batch, &eval, &probe.dlogits, &probe.dvalues);
    let grad_tensors: Vec<Tensor> = grads.tensors().into_iter().cloned().collect();

    let mut report = Vec::new();
    let mut offset = 0;
    for (name, count) in groups(&net) {
        let members: Vec<usize> = (offset..offset + count).collect();
        offset += count;
        let mut worst = 0.0f64;
        let mut nonzero = 0;
        for _ in 0..PROBES {
            let t = members[rng.random_range(0..members.len())];
            let j = rng.random_range(0..grad_tensors[t].len());
            let analytic = grad_tensors[t].data()[j];
            let original = net.params.tensors()[t].data()[j];
            net.params.tensors_mut()[t].data_mut()[j] = original + H;
            let up = probe.loss(&net, &batch);
            net.params.tensors_mut()[t].data_mut()[j] = original - H;
            let down = probe.loss(&net, &batch);
            net.params.tensors_mut()[t].data_mut()[j] = original;
            let numeric = (up - down) / (2.0 * H);
            worst = worst.max(relative_error(analytic, numeric));
            nonzero += usize::from(analytic.abs() > 1e-8);
        }
        assert!(nonzero > 0, "{kind:?} {name}: every probed gradient was zero");
        report.push((name, worst));
    }
    assert_eq!(offset, grad_tensors.len());
    report
}

/// Panics naming the first group over tolerance.
pub fn assert_within_tolerance(report: &[(String, f64)]) {
    for (name, worst) in report {
        assert!(*worst < TOLERANCE, "{name}: relative error {worst:e}");
    }
}
