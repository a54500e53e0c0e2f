use crate::error::{invalid, Result};

/// Paired observations `(X_i, Y_i)` with `X_i` in `R^p`.
///
/// Covariates are stored row-major, `n * p` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    covariates: Vec<f64>,
    responses: Vec<f64>,
    dim: usize,
}

impl Sample {
    pub fn new(covariates: Vec<f64>, responses: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("covariate dimension must be at least 1"));
        }
        if responses.is_empty() {
            return Err(invalid("sample must contain at least one observation"));
        }
        if covariates.len() != responses.len() * dim {
            return Err(invalid(format!(
                "covariate matrix has {} entries, expected {} x {}",
                covariates.len(),
                responses.len(),
                dim
            )));
        }
        if let Some(i) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite covariate in row {}", i / dim)));
        }
        if let Some(i) = responses.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite response in row {i}")));
        }
        Ok(Self {
            covariates,
            responses,
            dim,
        })
    }

    /// One-dimensional covariate.
    pub fn univariate(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::new(xs, ys, 1)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn response(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.covariates
            .chunks_exact(self.dim)
            .zip(self.responses.iter().copied())
    }

    /// Same covariates, responses mapped through `f`.
    pub fn map_responses(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.covariates.clone(),
            self.responses.iter().map(|&y| f(y)).collect(),
            self.dim,
        )
    }

    /// Observations reordered by `order`, which must be a permutation of `0..n`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(invalid("order is not a permutation"));
            }
        }
        if order.len() != self.len() {
            return Err(invalid("order is not a permutation"));
        }
        let mut covariates = Vec::with_capacity(self.covariates.len());
        for &i in order {
            covariates.extend_from_slice(self.covariate(i));
        }
        Self::new(
            covariates,
            order.iter().map(|&i| self.responses[i]).collect(),
            self.dim,
        )
    }

    /// Range `(min, max)` of the first covariate coordinate.
    pub fn covariate_range(&self) -> (f64, f64) {
        self.covariates
            .iter()
            .step_by(self.dim)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Sample::new(vec![0.0; 3], vec![1.0; 2], 1).is_err());
        assert!(Sample::new(vec![], vec![], 1).is_err());
        assert!(Sample::new(vec![0.0], vec![1.0], 0).is_err());
        assert!(Sample::univariate(vec![f64::NAN], vec![1.0]).is_err());
        assert!(Sample::univariate(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn negative_responses_allowed() {
        let s = Sample::univariate(vec![0.0, 1.0], vec![-3.0, 2.0]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.response(0), -3.0);
    }

    #[test]
    fn multivariate_rows() {
        let s = Sample::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.6], 2).unwrap();
        assert_eq!(s.covariate(1), &[3.0, 4.0]);
        assert_eq!(s.covariate_range(), (1.0, 3.0));
    }

    #[test]
    fn permutation_checks() {
        let s = Sample::univariate(vec![0.0, 1.0, 2.0], vec![3.0, 4.0, 5.0]).unwrap();
        let p = s.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.responses(), &[5.0, 3.0, 4.0]);
        assert!(s.permuted(&[0, 0, 1]).is_err());
        assert!(s.permuted(&[0, 1]).is_err());
    }
}
