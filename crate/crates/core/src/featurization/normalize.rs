use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Columns whose training std falls below this keep a unit scale.
pub const MIN_SCALE: f64 = 1e-12;

/// Per-feature z-scoring fitted on one training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub fitted_on: String,
}

impl Normalizer {
    pub fn fit(train: &Matrix, fitted_on: &str) -> Result<Normalizer> {
        if train.rows() == 0 {
            return Err(Error::EmptySet("normalizer fit on zero rows".into()));
        }
        let n = train.rows() as f64;
        let d = train.cols();
        let mut center = vec![0.0; d];
        for i in 0..train.rows() {
            for (c, v) in center.iter_mut().zip(train.row(i)) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= n);
        let mut var = vec![0.0; d];
        for i in 0..train.rows() {
            for ((s, v), c) in var.iter_mut().zip(train.row(i)).zip(&center) {
                *s += (v - c) * (v - c);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_SCALE {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Normalizer {
            center,
            scale,
            fitted_on: fitted_on.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                sample_id: "<row>".into(),
                source_id: "<normalizer>".into(),
                expected: self.dim(),
                actual: x.len(),
            });
        }
        for ((v, c), s) in x.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = (*v - c) / s;
        }
        Ok(())
    }

    pub fn apply_matrix(&self, m: &mut Matrix) -> Result<()> {
        for i in 0..m.rows() {
            self.apply_in_place(m.row_mut(i))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![3.0, 2.0]]).unwrap();
        let norm = Normalizer::fit(&m, "train").unwrap();
        assert_eq!(norm.scale[0], 1.0);
        assert_eq!(norm.apply(&[3.0, 0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn two_point_column() {
        let m = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let norm = Normalizer::fit(&m, "train").unwrap();
        assert_eq!((norm.center[0], norm.scale[0]), (1.0, 1.0));
        assert_eq!(norm.apply(&[2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn mean_row_maps_to_origin() {
        let m = Matrix::from_rows(&[vec![1.0, 10.0, -4.0], vec![3.0, 30.0, 4.0]]).unwrap();
        let norm = Normalizer::fit(&m, "train").unwrap();
        assert_eq!(norm.apply(&[2.0, 20.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let norm = Normalizer::fit(&m, "train").unwrap();
        assert!(matches!(norm.apply(&[1.0]), Err(Error::Dimension { .. })));
    }
}
