mod common;

use common::{install, one_hot, perfect_scheme};
use negsig::game::{make_derangement, play, DerangementKind, GameConfig, GameKind, Mask, Role};
use negsig::rng::{stream, Stream};
use negsig::roth_erev::{reset_vector, sample_masked, ResetPolicy, RothErevAgent};
use proptest::prelude::*;

#[test]
fn unparseable_success_credits_consulted_symbol_action_and_psi() {
    let game = GameConfig::new(GameKind::LearnedNegation, 2).unwrap();
    let mut sender_policy = perfect_scheme(&game);
    sender_policy.negation = one_hot(3, 2);
    let mut receiver_policy = sender_policy.clone();
    receiver_policy.negation = one_hot(3, 0);
    // Both candidate symbols decode to state 3, so the episode succeeds
    // whichever way the coin falls.
    receiver_policy.receiver = vec![one_hot(4, 0), one_hot(4, 3), one_hot(4, 3)];
    let sender = {
        let mut a = RothErevAgent::new(game, 1.0);
        install(&mut a, &sender_policy);
        a
    };
    let mut receiver = RothErevAgent::new(game, 1.0);
    install(&mut receiver, &receiver_policy);
    let mut rng = stream(1, Stream::Train);
    let d = make_derangement(2, DerangementKind::PairInvolution, &mut rng).unwrap();
    let rec = play(&game, &sender, &receiver, 3, &d, &mut rng).unwrap();
    assert!(rec.success);
    assert!(rec.unparseable_coin.is_some());
    let before = receiver.clone();
    receiver.reinforce(&rec, Role::Receiver);
    let m = rec.consulted_symbol();
    assert_eq!(receiver.receiver_matrix()[m][3], before.receiver_matrix()[m][3] + 1.0);
    assert_eq!(receiver.negation_weights()[0], before.negation_weights()[0] + 1.0);
    let changed: usize = receiver
        .receiver_matrix()
        .iter()
        .flatten()
        .zip(before.receiver_matrix().iter().flatten())
        .filter(|(a, b)| a != b)
        .count();
    assert_eq!(changed, 1);
}

#[test]
fn learning_rate_scales_increments() {
    let game = GameConfig::new(GameKind::BasicNegation, 3).unwrap();
    let mut rng = stream(2, Stream::Train);
    let d = make_derangement(3, DerangementKind::PairInvolution, &mut rng).unwrap();
    let probe = RothErevAgent::new(game, 2.5);
    let rec = loop {
        let rec = play(&game, &probe, &probe, 4, &d, &mut rng).unwrap();
        if rec.success {
            break rec;
        }
    };
    let mut a = probe.clone();
    a.reinforce(&rec, Role::Sender);
    let first = &rec.first;
    assert_eq!(a.sender_matrix()[first.context][first.index], 1.0 + 2.5);
}

proptest! {
    #[test]
    fn reset_preserves_proportions(values in proptest::collection::vec(0.01f64..500.0, 1..20)) {
        let policy = ResetPolicy::default();
        let mut v = values.clone();
        reset_vector(&mut v, &policy).unwrap();
        let total: f64 = values.iter().sum();
        prop_assert!((v.iter().sum::<f64>() - (100.0 + values.len() as f64)).abs() < 1e-9);
        for (before, after) in values.iter().zip(&v) {
            prop_assert!((after - (before / total * 100.0 + 1.0)).abs() < 1e-9);
            prop_assert!(*after >= 1.0);
        }
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(v[i] < v[j]);
                }
            }
        }
    }

    #[test]
    fn sampling_respects_masks(weights in proptest::collection::vec(0.01f64..10.0, 2..12), bits in any::<u64>(), seed in any::<u64>()) {
        let mut mask = Mask::all(weights.len());
        for i in 0..weights.len() {
            if bits >> i & 1 == 1 {
                mask = mask.without(i);
            }
        }
        prop_assume!(mask.count_allowed() > 0);
        let mut rng = stream(seed, Stream::Train);
        for _ in 0..50 {
            let i = sample_masked(&weights, mask, &mut rng).unwrap();
            prop_assert!(mask.allows(i));
        }
    }
}

#[test]
fn sampling_frequencies_follow_weights() {
    let weights = [1.0, 2.0, 3.0, 4.0];
    let mut rng = stream(5, Stream::Train);
    let mut counts = [0usize; 4];
    let draws = 100_000;
    for _ in 0..draws {
        counts[sample_masked(&weights, Mask::all(4), &mut rng).unwrap()] += 1;
    }
    for (c, w) in counts.iter().zip(weights) {
        let p = *c as f64 / draws as f64;
        assert!((p - w / 10.0).abs() < 0.005, "{p} vs {}", w / 10.0);
    }
}
