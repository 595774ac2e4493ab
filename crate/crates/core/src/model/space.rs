use serde::{Deserialize, Serialize};

/// Mixed-radix indexing for joint actions and joint observations.
///
/// Agent 0 is the most significant digit, so enumerating indices in order
/// walks tuples lexicographically: `(0,0), (0,1), (1,0), (1,1)` for two binary agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl JointSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let len = sizes.iter().product();
        Self { sizes, strides, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, agent: usize) -> usize {
        self.sizes[agent]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn encode(&self, parts: &[usize]) -> usize {
        debug_assert_eq!(parts.len(), self.sizes.len());
        parts.iter().zip(&self.strides).map(|(p, s)| p * s).sum()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        (0..self.sizes.len()).map(|i| self.component(index, i)).collect()
    }

    pub fn component(&self, index: usize, agent: usize) -> usize {
        (index / self.strides[agent]) % self.sizes[agent]
    }

    /// Replaces one agent's component of a joint index.
    pub fn with_component(&self, index: usize, agent: usize, value: usize) -> usize {
        let old = self.component(index, agent);
        index - old * self.strides[agent] + value * self.strides[agent]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let space = JointSpace::new(vec![3, 2, 4]);
        assert_eq!(space.len(), 24);
        for idx in 0..space.len() {
            let parts = space.decode(idx);
            assert_eq!(space.encode(&parts), idx);
        }
        assert_eq!(space.decode(0), vec![0, 0, 0]);
        assert_eq!(space.decode(23), vec![2, 1, 3]);
        assert_eq!(space.with_component(0, 1, 1), space.encode(&[0, 1, 0]));
    }

    #[test]
    fn lexicographic_order() {
        let space = JointSpace::new(vec![2, 2]);
        let order: Vec<_> = (0..4).map(|i| space.decode(i)).collect();
        assert_eq!(order, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
