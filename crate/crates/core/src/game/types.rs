use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Widest decision space a [`Mask`] can describe.
pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    Atomic,
    BasicNegation,
    LearnedNegation,
    CombinedNegation,
}

impl GameKind {
    pub fn is_negation(self) -> bool {
        !matches!(self, GameKind::Atomic)
    }

    /// Whether agents pick the identity of the negation symbol each episode.
    pub fn learns_identity(self) -> bool {
        matches!(self, GameKind::LearnedNegation | GameKind::CombinedNegation)
    }

    pub fn name(self) -> &'static str {
        match self {
            GameKind::Atomic => "atomic",
            GameKind::BasicNegation => "basic",
            GameKind::LearnedNegation => "learned",
            GameKind::CombinedNegation => "combined",
        }
    }
}

impl std::str::FromStr for GameKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "atomic" => Ok(GameKind::Atomic),
            "basic" | "basic-negation" => Ok(GameKind::BasicNegation),
            "learned" | "learned-negation" => Ok(GameKind::LearnedNegation),
            "combined" | "combined-negation" => Ok(GameKind::CombinedNegation),
            other => Err(format!("unknown game `{other}`")),
        }
    }
}

/// Sizes of a game instance.
///
/// Negation games always have `2n` states and `n + 1` concrete symbols. The
/// sender additionally has one abstract negation decision at index
/// `num_symbols`, which is never transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub kind: GameKind,
    pub n: usize,
    pub num_states: usize,
    pub num_symbols: usize,
    /// When false the referee masks the abstract negation decision, which
    /// restricts senders to single-symbol messages.
    pub negation_branch: bool,
}

impl GameConfig {
    pub fn new(kind: GameKind, n: usize) -> Result<Self> {
        let cfg = match kind {
            GameKind::Atomic => GameConfig {
                kind,
                n,
                num_states: 2 * n,
                num_symbols: 2 * n,
                negation_branch: false,
            },
            _ => GameConfig {
                kind,
                n,
                num_states: 2 * n,
                num_symbols: n + 1,
                negation_branch: true,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Atomic game with explicit state and symbol counts.
    pub fn atomic(num_states: usize, num_symbols: usize) -> Result<Self> {
        let cfg = GameConfig {
            kind: GameKind::Atomic,
            n: num_states / 2,
            num_states,
            num_symbols,
            negation_branch: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn without_negation_branch(mut self) -> Self {
        self.negation_branch = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_negation() {
            if self.n < 2 {
                return Err(SimError::config("n", "negation games need n >= 2"));
            }
            if self.num_states != 2 * self.n || self.num_symbols != self.n + 1 {
                return Err(SimError::config(
                    "n",
                    "negation games use 2n states and n+1 symbols",
                ));
            }
        } else {
            if self.num_states < 1 || self.num_symbols < 1 {
                return Err(SimError::config("n", "atomic game needs at least one state and symbol"));
            }
            if self.negation_branch {
                return Err(SimError::config("negation_branch", "atomic game has no negation"));
            }
        }
        if self.num_states > MAX_WIDTH || self.sender_width() > MAX_WIDTH {
            return Err(SimError::config(
                "n",
                format!("decision spaces are limited to {MAX_WIDTH} entries"),
            ));
        }
        Ok(())
    }

    /// Number of sender decisions: concrete symbols plus the abstract
    /// negation slot in negation games.
    pub fn sender_width(&self) -> usize {
        self.num_symbols + usize::from(self.kind.is_negation())
    }

    /// Index of the abstract negation decision in the sender's space.
    pub fn abstract_negation(&self) -> Option<usize> {
        self.kind.is_negation().then_some(self.num_symbols)
    }

    /// Concrete symbol reserved for negation in the basic game.
    pub fn reserved_negation_symbol(&self) -> Option<usize> {
        (self.kind == GameKind::BasicNegation).then_some(self.n)
    }
}

/// Set of permitted indices in a decision space of at most [`MAX_WIDTH`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    bits: u64,
    len: u8,
}

impl Mask {
    pub fn all(len: usize) -> Self {
        assert!(len <= MAX_WIDTH, "mask width {len} exceeds {MAX_WIDTH}");
        let bits = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Mask { bits, len: len as u8 }
    }

    #[must_use]
    pub fn without(mut self, index: usize) -> Self {
        assert!(index < self.len(), "mask index {index} out of range");
        self.bits &= !(1u64 << index);
        self
    }

    pub fn allows(&self, index: usize) -> bool {
        index < self.len() && self.bits & (1u64 << index) != 0
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_allowed(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn allowed(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.allows(i))
    }
}

/// Side of the game an agent played in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Sender,
    Receiver,
}

/// What an agent takes the negation symbol to do in the combined game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Meaning {
    Ignore,
    Atomic,
    Negation,
}

impl Meaning {
    pub const ALL: [Meaning; 3] = [Meaning::Ignore, Meaning::Atomic, Meaning::Negation];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Meaning {
        Meaning::ALL[index]
    }
}

/// Symbols actually transmitted. Only concrete symbols ever appear here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    Single(usize),
    /// The sender's negation symbol followed by the content symbol.
    Pair(usize, usize),
}

impl Message {
    pub fn symbols(&self) -> Vec<usize> {
        match *self {
            Message::Single(m) => vec![m],
            Message::Pair(a, b) => vec![a, b],
        }
    }
}

/// One sampled decision.
///
/// `context` is the row the decision was drawn from: a state for sender
/// choices, a symbol for receiver choices, and 0 for the context-free
/// negation-identity and meaning choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub context: usize,
    pub index: usize,
    pub mask: Mask,
    pub log_prob: Option<f64>,
    pub value: Option<f64>,
}

impl Decision {
    pub fn tabular(context: usize, index: usize, mask: Mask) -> Self {
        Decision {
            context,
            index,
            mask,
            log_prob: None,
            value: None,
        }
    }
}

/// Everything that happened in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub state: usize,
    /// φ, drawn by the sender in learned and combined games.
    pub sender_negation: Option<Decision>,
    /// ψ, drawn by the receiver in learned and combined games.
    pub receiver_negation: Option<Decision>,
    pub sender_meaning: Option<Decision>,
    pub receiver_meaning: Option<Decision>,
    /// First sender decision; may be the abstract negation slot.
    pub first: Decision,
    /// Content symbol drawn from the negated state's row.
    pub second: Option<Decision>,
    pub message: Message,
    /// Receiver draw; its context is the symbol that was decoded.
    pub receive: Decision,
    pub performed_action: usize,
    /// `Some(true)` when the coin picked the content symbol of an
    /// unparseable pair, `Some(false)` when it picked the first symbol.
    pub unparseable_coin: Option<bool>,
    pub success: bool,
}

impl EpisodeRecord {
    pub fn reward(&self) -> f64 {
        if self.success {
            1.0
        } else {
            0.0
        }
    }

    pub fn consulted_symbol(&self) -> usize {
        self.receive.context
    }

    pub fn sampled_action(&self) -> usize {
        self.receive.index
    }

    pub fn used_negation(&self) -> bool {
        self.second.is_some()
    }

    pub fn sender_meaning(&self) -> Option<Meaning> {
        self.sender_meaning.map(|d| Meaning::from_index(d.index))
    }

    pub fn receiver_meaning(&self) -> Option<Meaning> {
        self.receiver_meaning.map(|d| Meaning::from_index(d.index))
    }
}
