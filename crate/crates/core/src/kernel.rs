//! Gaussian and polynomial kernels, Gram matrices and the median heuristic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, squared_distance, Matrix};
use crate::scalar::Scalar;

/// A point in ℝᵈ.
pub type Point<T> = Vec<T>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec<T> {
    /// `exp(−‖x − y‖² / (2σ²))`.
    Gaussian { sigma: T },
    /// `(offset + ⟨x, y⟩)^degree`.
    Polynomial { degree: u32, offset: T },
}

impl<T: Scalar> KernelSpec<T> {
    pub fn gaussian(sigma: T) -> Result<Self> {
        let spec = Self::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(degree: u32, offset: T) -> Result<Self> {
        let spec = Self::Polynomial { degree, offset };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { sigma } if !(sigma > T::zero()) || !sigma.is_finite() => {
                Err(invalid("sigma", format!("bandwidth must be positive, got {sigma}")))
            }
            Self::Polynomial { degree: 0, .. } => Err(invalid("degree", "must be at least 1")),
            Self::Polynomial { offset, .. } if !offset.is_finite() => Err(invalid("offset", "must be finite")),
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval_unchecked(&self, x: &[T], y: &[T]) -> T {
        match *self {
            Self::Gaussian { sigma } => (-squared_distance(x, y) / (T::lit(2.0) * sigma * sigma)).exp(),
            Self::Polynomial { degree, offset } => (offset + dot(x, y)).powi(degree as i32),
        }
    }
}

pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(spec.eval_unchecked(x, y))
}

fn common_dim<T>(xs: &[Point<T>], ys: &[Point<T>]) -> Result<usize> {
    let d = xs.first().or(ys.first()).map_or(0, Vec::len);
    for p in xs.iter().chain(ys) {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
    }
    Ok(d)
}

/// `G[i][j] = k(xs[i], ys[j])`, rows computed in parallel.
pub fn gram<T: Scalar>(spec: &KernelSpec<T>, xs: &[Point<T>], ys: &[Point<T>]) -> Result<Matrix<T>> {
    spec.validate()?;
    common_dim(xs, ys)?;
    let data: Vec<T> = xs
        .par_iter()
        .flat_map_iter(|x| ys.iter().map(move |y| spec.eval_unchecked(x, y)))
        .collect();
    Ok(Matrix::from_raw(xs.len(), ys.len(), data))
}

/// Median of all pairwise Euclidean distances (mean of the two middle values
/// for an even count).
pub fn median_heuristic<T: Scalar>(points: &[Point<T>]) -> Result<T> {
    if points.len() < 2 {
        return Err(invalid("points", "median heuristic needs at least two points"));
    }
    common_dim(points, &[])?;
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            dists.push(squared_distance(a, b).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = dists.len();
    let med = if m % 2 == 1 {
        dists[m / 2]
    } else {
        (dists[m / 2 - 1] + dists[m / 2]) / T::lit(2.0)
    };
    if !(med > T::zero()) {
        return Err(invalid("points", "median pairwise distance is zero"));
    }
    Ok(med)
}
