use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerangementKind {
    /// `i -> (i + n) mod 2n`: states come in fixed opposite pairs.
    PairInvolution,
    /// Uniform over all fixed-point-free permutations.
    Random,
}

impl std::str::FromStr for DerangementKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "involution" | "pair-involution" => Ok(DerangementKind::PairInvolution),
            "random" => Ok(DerangementKind::Random),
            other => Err(format!("unknown derangement `{other}`")),
        }
    }
}

/// Fixed-point-free bijection on `2n` states together with its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derangement {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Derangement {
    /// Builds a derangement from an explicit forward table.
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let len = forward.len();
        let mut inverse = vec![usize::MAX; len];
        for (i, &j) in forward.iter().enumerate() {
            if j >= len || inverse[j] != usize::MAX {
                return Err(SimError::config("derangement", "not a bijection"));
            }
            if j == i {
                return Err(SimError::config("derangement", format!("fixed point at {i}")));
            }
            inverse[j] = i;
        }
        Ok(Derangement { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// The opposite of `state`.
    pub fn apply(&self, state: usize) -> usize {
        self.forward[state]
    }

    /// The state whose opposite is `action`.
    ///
    /// Panics when `action` is out of range.
    pub fn invert(&self, action: usize) -> usize {
        self.inverse[action]
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }
}

pub fn make_derangement<R: Rng + ?Sized>(
    n: usize,
    kind: DerangementKind,
    rng: &mut R,
) -> Result<Derangement> {
    let len = 2 * n;
    match kind {
        DerangementKind::PairInvolution => {
            if n < 2 {
                return Err(SimError::config("n", "pair involution needs n >= 2"));
            }
            Derangement::from_forward((0..len).map(|i| (i + n) % len).collect())
        }
        DerangementKind::Random => {
            if n < 1 {
                return Err(SimError::config("n", "random derangement needs n >= 1"));
            }
            // Rejection sampling keeps the result uniform over derangements;
            // roughly 1/e of shuffles are accepted.
            let mut perm: Vec<usize> = (0..len).collect();
            loop {
                perm.shuffle(rng);
                if perm.iter().enumerate().all(|(i, &j)| i != j) {
                    return Derangement::from_forward(perm);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn pair_involution_tables() {
        let mut rng = stream(0, Stream::Init);
        let f = make_derangement(2, DerangementKind::PairInvolution, &mut rng).unwrap();
        assert_eq!(f.forward(), &[2, 3, 0, 1]);
        assert_eq!(f.invert(2), 0);

        let f = make_derangement(4, DerangementKind::PairInvolution, &mut rng).unwrap();
        assert_eq!(f.apply(0), 4);
        assert_eq!(f.invert(4), 0);
    }

    #[test]
    fn small_n_rejected() {
        let mut rng = stream(0, Stream::Init);
        assert!(make_derangement(1, DerangementKind::PairInvolution, &mut rng).is_err());
        assert!(make_derangement(0, DerangementKind::Random, &mut rng).is_err());
        assert!(make_derangement(1, DerangementKind::Random, &mut rng).is_ok());
    }

    #[test]
    fn from_forward_rejects_fixed_points_and_duplicates() {
        assert!(Derangement::from_forward(vec![0, 1]).is_err());
        assert!(Derangement::from_forward(vec![1, 1]).is_err());
        assert!(Derangement::from_forward(vec![1, 0]).is_ok());
    }

    #[test]
    fn random_derangement_seed_42_has_no_fixed_points() {
        let mut rng = stream(42, Stream::Init);
        let f = make_derangement(2, DerangementKind::Random, &mut rng).unwrap();
        for i in 0..4 {
            assert_ne!(f.apply(i), i);
        }
    }
}
