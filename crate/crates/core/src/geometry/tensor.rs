/// Dense tensor with every index ranging over `0..n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    n: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor { n, rank, data: vec![0.0; n.pow(rank as u32)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    fn offset<const R: usize>(&self, idx: [usize; R]) -> usize {
        debug_assert_eq!(R, self.rank);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.n);
            acc * self.n + i
        })
    }

    #[inline]
    pub fn at<const R: usize>(&self, idx: [usize; R]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set<const R: usize>(&mut self, idx: [usize; R], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    #[inline]
    pub fn add_at<const R: usize>(&mut self, idx: [usize; R], v: f64) {
        let o = self.offset(idx);
        self.data[o] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let mut t = Tensor::zeros(3, 3);
        t.set([1, 2, 0], 5.0);
        assert_eq!(t.as_slice()[1 * 9 + 2 * 3], 5.0);
        t.add_at([1, 2, 0], 1.0);
        assert_eq!(t.at([1, 2, 0]), 6.0);
        assert_eq!(t.max_abs(), 6.0);
    }
}
