//! Block partitions of a flat vector and the block-partitioned iterate.
//!
//! Blocks are contiguous index ranges `offsets[i]..offsets[i + 1]`. Block
//! indices are zero-based throughout the crate.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Builds a partition from `m + 1` strictly increasing offsets starting at 0.
    pub fn new(offsets: Vec<usize>) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::Partition("at least one block is required".into()));
        }
        if offsets[0] != 0 {
            return Err(Error::Partition("first offset must be 0".into()));
        }
        if let Some(w) = offsets.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Partition(format!(
                "offsets must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        Ok(Self { offsets })
    }

    /// One block per scalar entry.
    pub fn singletons(dim: usize) -> Result<Self> {
        Self::new((0..=dim).collect())
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        let mut acc = 0;
        for &s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Self::new(offsets)
    }

    /// Splits `dim` entries into `blocks` contiguous blocks whose sizes differ by at most one.
    pub fn uniform(dim: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > dim {
            return Err(Error::Partition(format!(
                "cannot split {dim} entries into {blocks} non-empty blocks"
            )));
        }
        Self::new((0..=blocks).map(|i| i * dim / blocks).collect())
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    #[inline]
    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    pub fn block_len(&self, block: usize) -> usize {
        self.offsets[block + 1] - self.offsets[block]
    }

    pub fn max_block_len(&self) -> usize {
        (0..self.num_blocks()).map(|i| self.block_len(i)).max().unwrap_or(0)
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Block containing scalar index `index`.
    pub fn block_of(&self, index: usize) -> Option<usize> {
        if index >= self.dim() {
            return None;
        }
        Some(self.offsets.partition_point(|&o| o <= index) - 1)
    }

    pub fn check_block(&self, block: usize) -> Result<()> {
        if block < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::BlockOutOfRange { index: block, blocks: self.num_blocks() })
        }
    }
}

/// A flat vector together with its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    data: Vec<T>,
    partition: Arc<BlockPartition>,
}

impl<T: Scalar> BlockVector<T> {
    pub fn new(data: Vec<T>, partition: Arc<BlockPartition>) -> Result<Self> {
        check_len(partition.dim(), data.len())?;
        Ok(Self { data, partition })
    }

    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        Self { data: vec![T::zero(); partition.dim()], partition }
    }

    /// Convenience constructor for a single-block vector.
    pub fn single_block(data: Vec<T>) -> Result<Self> {
        let p = BlockPartition::new(vec![0, data.len()])?;
        Ok(Self { data, partition: Arc::new(p) })
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn block(&self, i: usize) -> &[T] {
        &self.data[self.partition.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [T] {
        let r = self.partition.range(i);
        &mut self.data[r]
    }

    /// Same partition, different values.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(data, self.partition.clone())
    }

    pub fn norm(&self) -> T {
        crate::linalg::norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
