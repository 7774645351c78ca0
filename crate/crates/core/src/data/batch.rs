//! Shuffled-epoch batch sampling and per-class batch splitting.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::tensor::{Real, Tensor};
use crate::NUM_CLASSES;

/// Walks a fresh permutation of `0..n` per epoch, `batch_size` indices at a
/// time. The last batch of an epoch may be short.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
    epochs_started: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    pub fn new(n: usize, batch_size: usize, rng: ChaCha8Rng) -> Self {
        assert!(n > 0 && batch_size > 0, "sampler needs samples and a positive batch size");
        Self {
            order: (0..n).collect(),
            batch_size,
            pos: n,
            epochs_started: 0,
            rng,
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// Number of permutations drawn so far.
    pub fn epochs_started(&self) -> usize {
        self.epochs_started
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
            self.epochs_started += 1;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

/// `batch_size` distinct indices drawn uniformly from `0..n` (all of them when
/// `batch_size >= n`).
pub fn sample_batch(n: usize, batch_size: usize, rng: &mut impl Rng) -> Vec<usize> {
    index::sample(rng, n, batch_size.min(n)).into_vec()
}

/// The samples of one target class within a sampled batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassBatch {
    pub class: usize,
    /// Positions within the sampled batch.
    pub rows: Vec<usize>,
    /// Dataset indices, in batch order.
    pub indices: Vec<usize>,
}

impl ClassBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn images<T: Real>(&self, ds: &Dataset) -> Tensor<T> {
        ds.batch_tensor(&self.indices)
    }
}

/// Partitions a batch by target class, omitting absent classes.
pub fn split_by_class(ds: &Dataset, batch: &[usize]) -> Vec<ClassBatch> {
    let mut by_class: Vec<ClassBatch> = (0..NUM_CLASSES)
        .map(|class| ClassBatch {
            class,
            rows: Vec::new(),
            indices: Vec::new(),
        })
        .collect();
    for (row, &i) in batch.iter().enumerate() {
        let part = &mut by_class[ds.target(i)];
        part.rows.push(row);
        part.indices.push(i);
    }
    by_class.retain(|p| !p.is_empty());
    by_class
}
