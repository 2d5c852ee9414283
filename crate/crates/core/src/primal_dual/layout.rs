use crate::block::BlockPartition;
use crate::error::{config_err, Result};

/// Placement of the stacked variable `z = (x, s)` in a flat iterate.
///
/// Canonical index `c` refers to `x_c` for `c < primal` and to
/// `s_{c - primal}` otherwise. The storage order may differ from the
/// canonical one so that a block can bundle primal and dual entries while
/// still being a contiguous range.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedLayout {
    primal: usize,
    dual: usize,
    partition: BlockPartition,
    /// Storage position -> canonical index; `None` for the identity.
    canon: Option<Vec<usize>>,
    pos: Option<Vec<usize>>,
}

impl StackedLayout {
    /// Canonical storage order `(x, s)` with the given block partition.
    pub fn contiguous(primal: usize, dual: usize, partition: BlockPartition) -> Result<Self> {
        if partition.dim() != primal + dual {
            return Err(config_err(format!(
                "partition covers {} entries, expected {}",
                partition.dim(),
                primal + dual
            )));
        }
        Ok(Self { primal, dual, partition, canon: None, pos: None })
    }

    /// Singleton blocks over `(x, s)`.
    pub fn singletons(primal: usize, dual: usize) -> Result<Self> {
        Self::contiguous(primal, dual, BlockPartition::singletons(primal + dual)?)
    }

    /// Storage is bundle after bundle; each bundle lists canonical indices.
    /// Every canonical index must appear in exactly one bundle.
    pub fn permuted(primal: usize, dual: usize, bundles: &[Vec<usize>]) -> Result<Self> {
        let n = primal + dual;
        let mut canon = Vec::with_capacity(n);
        let mut pos = vec![usize::MAX; n];
        for bundle in bundles {
            for &c in bundle {
                if c >= n || pos[c] != usize::MAX {
                    return Err(config_err(format!("bundles do not partition 0..{n} (index {c})")));
                }
                pos[c] = canon.len();
                canon.push(c);
            }
        }
        if canon.len() != n {
            return Err(config_err(format!("bundles cover {} of {n} entries", canon.len())));
        }
        let sizes: Vec<usize> = bundles.iter().map(Vec::len).collect();
        let partition = BlockPartition::from_sizes(&sizes)?;
        Ok(Self { primal, dual, partition, canon: Some(canon), pos: Some(pos) })
    }

    pub fn primal(&self) -> usize {
        self.primal
    }

    pub fn dual(&self) -> usize {
        self.dual
    }

    pub fn dim(&self) -> usize {
        self.primal + self.dual
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// Canonical index stored at position `p`.
    #[inline]
    pub fn canonical(&self, p: usize) -> usize {
        self.canon.as_ref().map_or(p, |c| c[p])
    }

    /// Storage position of canonical index `c`.
    #[inline]
    pub fn position(&self, c: usize) -> usize {
        self.pos.as_ref().map_or(c, |p| p[c])
    }

    /// Splits a stored iterate into canonical `(x, s)`.
    pub fn split<T: Copy>(&self, z: &[T]) -> (Vec<T>, Vec<T>) {
        let x = (0..self.primal).map(|c| z[self.position(c)]).collect();
        let s = (0..self.dual).map(|j| z[self.position(self.primal + j)]).collect();
        (x, s)
    }

    /// Inverse of [`StackedLayout::split`].
    pub fn join<T: Copy + Default>(&self, x: &[T], s: &[T]) -> Vec<T> {
        let mut z = vec![T::default(); self.dim()];
        for (c, &v) in x.iter().enumerate() {
            z[self.position(c)] = v;
        }
        for (j, &v) in s.iter().enumerate() {
            z[self.position(self.primal + j)] = v;
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permuted_round_trip() {
        let l = StackedLayout::permuted(2, 2, &[vec![0, 3], vec![2, 1]]).unwrap();
        assert_eq!(l.partition().num_blocks(), 2);
        let z = l.join(&[10.0, 11.0], &[20.0, 21.0]);
        assert_eq!(z, vec![10.0, 21.0, 20.0, 11.0]);
        assert_eq!(l.split(&z), (vec![10.0, 11.0], vec![20.0, 21.0]));
    }

    #[test]
    fn bundles_must_partition() {
        assert!(StackedLayout::permuted(2, 1, &[vec![0, 1], vec![1, 2]]).is_err());
        assert!(StackedLayout::permuted(2, 1, &[vec![0, 1]]).is_err());
        assert!(StackedLayout::contiguous(2, 1, BlockPartition::singletons(4).unwrap()).is_err());
    }
}
