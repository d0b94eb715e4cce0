//! Datasets: LIBSVM parsing, feature transforms, and seeded synthetic
//! problem generators.

mod libsvm;
mod synth;

pub use libsvm::{emit_libsvm, parse_libsvm, read_libsvm, ParseOptions};
pub use synth::{instance_from_dataset, synth_instance, Family, SynthSpec, ELASTIC_TAU, LRP_BALL_RADIUS};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse row-major design matrix with labels. Indices are 0-based.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    pub features: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn from_dense(a: &Array2<f64>, labels: Vec<f64>) -> Self {
        let features = a
            .rows()
            .into_iter()
            .map(|row| row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
            .collect();
        Dataset {
            rows: a.nrows(),
            cols: a.ncols(),
            features,
            labels,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.rows, self.cols));
        for (i, row) in self.features.iter().enumerate() {
            for &(j, v) in row {
                a[[i, j]] = v;
            }
        }
        a
    }

    pub fn labels(&self) -> ndarray::Array1<f64> {
        ndarray::Array1::from(self.labels.clone())
    }
}

/// Maps each column to `[0, 1]` by `(v − min)/(max − min)`, counting
/// implicit zeros; constant columns become zero.
pub fn minmax_scale(data: &Dataset) -> Dataset {
    let mut a = data.to_dense();
    for mut col in a.columns_mut() {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    Dataset::from_dense(&a, data.labels.clone())
}

/// Appends exact copies of the first `copies` columns and then, if asked, an
/// all-ones intercept column. The copies make `AᵀA` singular so the
/// least-squares solution set is not a single point.
pub fn augment_collinear(data: &Dataset, copies: usize, add_intercept: bool) -> Result<Dataset> {
    if copies > data.cols {
        return Err(Error::InvalidArgument(format!(
            "cannot copy {copies} columns of a {}-column dataset",
            data.cols
        )));
    }
    let n = data.cols;
    let features = data
        .features
        .iter()
        .map(|row| {
            let mut out = row.clone();
            out.extend(row.iter().filter(|(j, _)| *j < copies).map(|&(j, v)| (n + j, v)));
            if add_intercept {
                out.push((n + copies, 1.0));
            }
            out
        })
        .collect();
    Ok(Dataset {
        rows: data.rows,
        cols: n + copies + usize::from(add_intercept),
        features,
        labels: data.labels.clone(),
    })
}
