use serde::{Deserialize, Serialize};

/// Success counts, one per observed arm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleIndex {
    pub counts: Vec<usize>,
}

impl SampleIndex {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }
}

/// The finite set of samples `prod_t {0..=N_t}`, flattened row-major with the
/// last arm varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl SampleSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        for a in (0..sizes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * (sizes[a + 1] + 1);
        }
        let len = sizes.iter().map(|n| n + 1).product();
        Self { sizes, strides, len }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Tensor dimensions `N_t + 1`.
    pub fn dims(&self) -> Vec<usize> {
        self.sizes.iter().map(|n| n + 1).collect()
    }

    pub fn num_arms(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn flat(&self, counts: &[usize]) -> usize {
        debug_assert_eq!(counts.len(), self.sizes.len());
        counts.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn counts(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (a, s) in self.strides.iter().enumerate() {
            out[a] = flat / s;
            flat %= s;
        }
        out
    }

    /// All samples in flat order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len).map(move |w| self.counts(w))
    }

    /// The complementary sample `N - n` used by two-arm symmetry.
    pub fn complement(&self, counts: &[usize]) -> Vec<usize> {
        counts.iter().zip(&self.sizes).map(|(c, n)| n - c).collect()
    }
}
