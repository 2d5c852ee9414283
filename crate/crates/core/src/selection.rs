//! Block selection rules and the per-epoch update order.
//!
//! All randomness comes from [`ChaCha8Rng`]: portable, seedable and with
//! independent streams. The order for epoch `k` is drawn from stream `k` of
//! the run seed, so orders are reproducible without carrying generator state
//! between epochs.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, Error, Result};

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent sub-seed, e.g. one per selection rule of a study.
pub fn sub_seed(seed: u64, label: u64) -> u64 {
    stream_rng(seed, u64::MAX - label).random()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionRule {
    /// Natural order `0, 1, ..., m-1` every epoch.
    Cyclic,
    /// Fresh uniform permutation every epoch.
    Shuffled,
    /// One uniform permutation drawn for epoch 1, reused for all epochs.
    ShuffleOnce,
    /// `m` independent uniform block indices per epoch (with replacement).
    Random,
    /// Full Krasnosel'skii-Mann update of all blocks at once.
    Full,
    /// A fixed user-supplied permutation.
    Custom(Vec<usize>),
}

impl SelectionRule {
    pub fn custom(order: Vec<usize>) -> Result<Self> {
        validate_permutation(&order, order.len())?;
        Ok(Self::Custom(order))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cyclic => "cyclic",
            Self::Shuffled => "shuffled",
            Self::ShuffleOnce => "shuffle_once",
            Self::Random => "random",
            Self::Full => "full",
            Self::Custom(_) => "custom",
        }
    }

    /// Whether every epoch visits each block exactly once.
    pub fn is_permutation(&self) -> bool {
        !matches!(self, Self::Random | Self::Full)
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(Self::Cyclic),
            "shuffled" => Ok(Self::Shuffled),
            "shuffle_once" | "shuffle-once" => Ok(Self::ShuffleOnce),
            "random" => Ok(Self::Random),
            "full" => Ok(Self::Full),
            other => Err(config_err(format!(
                "unknown selection rule '{other}' (expected cyclic, shuffled, shuffle_once, random or full)"
            ))),
        }
    }
}

fn validate_permutation(order: &[usize], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(config_err(format!("custom order has {} entries, expected {m}", order.len())));
    }
    let mut seen = vec![false; m];
    for &i in order {
        if i >= m || seen[i] {
            return Err(config_err(format!("custom order is not a permutation of 0..{m}")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Block order for epoch `epoch` (1-based) of a run with `m` blocks.
///
/// For [`SelectionRule::Full`] the natural order is returned; the driver
/// never consults it.
pub fn make_order(rule: &SelectionRule, m: usize, epoch: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(config_err("at least one block is required"));
    }
    let natural = || (0..m).collect::<Vec<_>>();
    Ok(match rule {
        SelectionRule::Cyclic | SelectionRule::Full => natural(),
        SelectionRule::Shuffled => {
            let mut o = natural();
            o.shuffle(&mut stream_rng(seed, epoch as u64));
            o
        }
        SelectionRule::ShuffleOnce => {
            let mut o = natural();
            o.shuffle(&mut stream_rng(seed, 1));
            o
        }
        SelectionRule::Random => {
            let mut rng = stream_rng(seed, epoch as u64);
            (0..m).map(|_| rng.random_range(0..m)).collect()
        }
        SelectionRule::Custom(order) => {
            validate_permutation(order, m)?;
            order.clone()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn cyclic_is_natural_order() {
        for epoch in [1, 5, 100] {
            assert_eq!(make_order(&SelectionRule::Cyclic, 4, epoch, 3).unwrap(), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn shuffle_once_repeats_first_epoch() {
        let a = make_order(&SelectionRule::ShuffleOnce, 4, 1, 11).unwrap();
        let b = make_order(&SelectionRule::ShuffleOnce, 4, 7, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(sorted(a), vec![0, 1, 2, 3]);
    }

    #[test]
    fn shuffled_is_a_fresh_permutation() {
        let orders: Vec<_> = (1..=20).map(|k| make_order(&SelectionRule::Shuffled, 6, k, 5).unwrap()).collect();
        for o in &orders {
            assert_eq!(sorted(o.clone()), (0..6).collect::<Vec<_>>());
        }
        assert!(orders.windows(2).any(|w| w[0] != w[1]));
        assert_eq!(orders[3], make_order(&SelectionRule::Shuffled, 6, 4, 5).unwrap());
    }

    #[test]
    fn random_draws_m_indices_in_range() {
        let o = make_order(&SelectionRule::Random, 9, 2, 1).unwrap();
        assert_eq!(o.len(), 9);
        assert!(o.iter().all(|&i| i < 9));
    }

    #[test]
    fn custom_must_be_a_bijection() {
        assert!(SelectionRule::custom(vec![0, 0, 1]).is_err());
        assert!(SelectionRule::custom(vec![2, 0, 1]).is_ok());
        let rule = SelectionRule::Custom(vec![1, 0]);
        assert!(make_order(&rule, 3, 1, 0).is_err());
        assert_eq!(make_order(&rule, 2, 9, 0).unwrap(), vec![1, 0]);
    }

    #[test]
    fn names_parse_back() {
        for r in [
            SelectionRule::Cyclic,
            SelectionRule::Shuffled,
            SelectionRule::ShuffleOnce,
            SelectionRule::Random,
            SelectionRule::Full,
        ] {
            assert_eq!(r.name().parse::<SelectionRule>().unwrap(), r);
        }
        assert!("sorted".parse::<SelectionRule>().is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(1, 0), sub_seed(1, 1));
        assert_eq!(sub_seed(1, 2), sub_seed(1, 2));
    }
}
