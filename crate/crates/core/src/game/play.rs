use rand::Rng;

use super::{Decision, Derangement, EpisodeRecord, GameConfig, GameKind, Mask, Meaning, Message};
use crate::error::Result;

/// Decision-making interface the referee drives.
///
/// Methods take `&self` so one agent can sit on both sides of a game
/// (self-play). Learning happens afterwards, from the [`EpisodeRecord`].
pub trait Agent {
    /// Draws the concrete symbol this agent treats as negation.
    fn select_negation<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Decision>;

    /// Draws a [`Meaning`] for the negation symbol (combined game).
    fn select_meaning<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Decision>;

    /// Draws from the sender row of `state` over the sender decision space.
    fn send<R: Rng + ?Sized>(&self, state: usize, mask: Mask, rng: &mut R) -> Result<Decision>;

    /// Draws an action from the receiver row of `symbol`.
    fn receive<R: Rng + ?Sized>(&self, symbol: usize, rng: &mut R) -> Result<Decision>;
}

/// Plays one episode of whichever game `cfg` describes.
pub fn play<S, A, R>(
    cfg: &GameConfig,
    sender: &S,
    receiver: &A,
    state: usize,
    derangement: &Derangement,
    rng: &mut R,
) -> Result<EpisodeRecord>
where
    S: Agent + ?Sized,
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    match cfg.kind {
        GameKind::Atomic => play_atomic(cfg, sender, receiver, state, rng),
        GameKind::BasicNegation => {
            play_basic_negation(cfg, sender, receiver, state, derangement, rng)
        }
        GameKind::LearnedNegation => {
            play_learned_negation(cfg, sender, receiver, state, derangement, rng)
        }
        GameKind::CombinedNegation => play_combined(cfg, sender, receiver, state, derangement, rng),
    }
}

fn check_state(cfg: &GameConfig, state: usize) {
    assert!(
        state < cfg.num_states,
        "state {state} out of range for {} states",
        cfg.num_states
    );
}

/// First-decision mask: everything except `reserved`, and except the
/// abstract negation slot when the branch is disabled.
fn first_mask(cfg: &GameConfig, reserved: Option<usize>, allow_negation: bool) -> Mask {
    let mut mask = Mask::all(cfg.sender_width());
    if let Some(r) = reserved {
        mask = mask.without(r);
    }
    if let Some(neg) = cfg.abstract_negation() {
        if !(allow_negation && cfg.negation_branch) {
            mask = mask.without(neg);
        }
    }
    mask
}

/// Second-symbol mask: concrete symbols other than `reserved`.
fn second_mask(cfg: &GameConfig, reserved: usize) -> Mask {
    let neg = cfg.abstract_negation().expect("negation game");
    Mask::all(cfg.sender_width()).without(reserved).without(neg)
}

struct Outcome {
    receive: Decision,
    performed: usize,
    coin: Option<bool>,
}

fn finish(
    state: usize,
    first: Decision,
    second: Option<Decision>,
    message: Message,
    outcome: Outcome,
) -> EpisodeRecord {
    EpisodeRecord {
        state,
        sender_negation: None,
        receiver_negation: None,
        sender_meaning: None,
        receiver_meaning: None,
        first,
        second,
        message,
        receive: outcome.receive,
        performed_action: outcome.performed,
        unparseable_coin: outcome.coin,
        success: outcome.performed == state,
    }
}

pub fn play_atomic<S, A, R>(
    cfg: &GameConfig,
    sender: &S,
    receiver: &A,
    state: usize,
    rng: &mut R,
) -> Result<EpisodeRecord>
where
    S: Agent + ?Sized,
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    check_state(cfg, state);
    let first = sender.send(state, Mask::all(cfg.sender_width()), rng)?;
    let receive = receiver.receive(first.index, rng)?;
    let performed = receive.index;
    Ok(finish(
        state,
        first,
        None,
        Message::Single(first.index),
        Outcome {
            receive,
            performed,
            coin: None,
        },
    ))
}

pub fn play_basic_negation<S, A, R>(
    cfg: &GameConfig,
    sender: &S,
    receiver: &A,
    state: usize,
    derangement: &Derangement,
    rng: &mut R,
) -> Result<EpisodeRecord>
where
    S: Agent + ?Sized,
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    check_state(cfg, state);
    let reserved = cfg.reserved_negation_symbol().expect("basic negation game");
    let neg = cfg.abstract_negation().expect("negation game");

    let first = sender.send(state, first_mask(cfg, Some(reserved), true), rng)?;
    if first.index == neg {
        let second = sender.send(derangement.apply(state), second_mask(cfg, reserved), rng)?;
        let receive = receiver.receive(second.index, rng)?;
        let performed = derangement.invert(receive.index);
        Ok(finish(
            state,
            first,
            Some(second),
            Message::Pair(reserved, second.index),
            Outcome {
                receive,
                performed,
                coin: None,
            },
        ))
    } else {
        let receive = receiver.receive(first.index, rng)?;
        let performed = receive.index;
        Ok(finish(
            state,
            first,
            None,
            Message::Single(first.index),
            Outcome {
                receive,
                performed,
                coin: None,
            },
        ))
    }
}

/// Sender side shared by the learned game and negation-meaning senders in
/// the combined game.
fn send_with_identity<S, R>(
    cfg: &GameConfig,
    sender: &S,
    state: usize,
    phi: usize,
    allow_negation: bool,
    derangement: &Derangement,
    rng: &mut R,
) -> Result<(Decision, Option<Decision>, Message)>
where
    S: Agent + ?Sized,
    R: Rng + ?Sized,
{
    let neg = cfg.abstract_negation().expect("negation game");
    let first = sender.send(state, first_mask(cfg, Some(phi), allow_negation), rng)?;
    if first.index == neg {
        let second = sender.send(derangement.apply(state), second_mask(cfg, phi), rng)?;
        Ok((first, Some(second), Message::Pair(phi, second.index)))
    } else {
        Ok((first, None, Message::Single(first.index)))
    }
}

/// Receiver side of a two-symbol message when neither symbol matches ψ:
/// a fair coin picks one symbol, which is decoded without the inverse.
fn receive_unparseable<A, R>(receiver: &A, phi: usize, m: usize, rng: &mut R) -> Result<Outcome>
where
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    let pick_content = rng.random_bool(0.5);
    let symbol = if pick_content { m } else { phi };
    let receive = receiver.receive(symbol, rng)?;
    Ok(Outcome {
        performed: receive.index,
        receive,
        coin: Some(pick_content),
    })
}

fn receive_direct<A, R>(receiver: &A, symbol: usize, rng: &mut R) -> Result<Outcome>
where
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    let receive = receiver.receive(symbol, rng)?;
    Ok(Outcome {
        performed: receive.index,
        receive,
        coin: None,
    })
}

fn receive_negated<A, R>(
    receiver: &A,
    symbol: usize,
    derangement: &Derangement,
    rng: &mut R,
) -> Result<Outcome>
where
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    let receive = receiver.receive(symbol, rng)?;
    Ok(Outcome {
        performed: derangement.invert(receive.index),
        receive,
        coin: None,
    })
}

pub fn play_learned_negation<S, A, R>(
    cfg: &GameConfig,
    sender: &S,
    receiver: &A,
    state: usize,
    derangement: &Derangement,
    rng: &mut R,
) -> Result<EpisodeRecord>
where
    S: Agent + ?Sized,
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    check_state(cfg, state);
    let phi = sender.select_negation(rng)?;
    let psi = receiver.select_negation(rng)?;

    let (first, second, message) =
        send_with_identity(cfg, sender, state, phi.index, true, derangement, rng)?;
    let outcome = match message {
        Message::Single(m) => receive_direct(receiver, m, rng)?,
        Message::Pair(p, m) => {
            if psi.index == p {
                receive_negated(receiver, m, derangement, rng)?
            } else if psi.index == m {
                receive_negated(receiver, p, derangement, rng)?
            } else {
                receive_unparseable(receiver, p, m, rng)?
            }
        }
    };
    let mut record = finish(state, first, second, message, outcome);
    record.sender_negation = Some(phi);
    record.receiver_negation = Some(psi);
    Ok(record)
}

pub fn play_combined<S, A, R>(
    cfg: &GameConfig,
    sender: &S,
    receiver: &A,
    state: usize,
    derangement: &Derangement,
    rng: &mut R,
) -> Result<EpisodeRecord>
where
    S: Agent + ?Sized,
    A: Agent + ?Sized,
    R: Rng + ?Sized,
{
    check_state(cfg, state);
    let phi = sender.select_negation(rng)?;
    let psi = receiver.select_negation(rng)?;
    let sender_meaning = sender.select_meaning(rng)?;
    let receiver_meaning = receiver.select_meaning(rng)?;

    // Ignore and Atomic senders send one symbol; φ stays reserved for
    // negation, so they draw from the remaining n concrete symbols.
    let allow_negation = Meaning::from_index(sender_meaning.index) == Meaning::Negation;
    let (first, second, message) =
        send_with_identity(cfg, sender, state, phi.index, allow_negation, derangement, rng)?;

    let outcome = match message {
        Message::Single(m) => receive_direct(receiver, m, rng)?,
        Message::Pair(p, m) if psi.index == p || psi.index == m => {
            let other = if psi.index == p { m } else { p };
            match Meaning::from_index(receiver_meaning.index) {
                Meaning::Ignore => receive_direct(receiver, other, rng)?,
                Meaning::Atomic => receive_direct(receiver, psi.index, rng)?,
                Meaning::Negation => receive_negated(receiver, other, derangement, rng)?,
            }
        }
        Message::Pair(p, m) => receive_unparseable(receiver, p, m, rng)?,
    };
    let mut record = finish(state, first, second, message, outcome);
    record.sender_negation = Some(phi);
    record.receiver_negation = Some(psi);
    record.sender_meaning = Some(sender_meaning);
    record.receiver_meaning = Some(receiver_meaning);
    Ok(record)
}
