//! Importance-weighted kernel least squares and weighted model selection.

use crate::error::{invalid, Error, Result};
use crate::kernel::{gram, kernel_eval, KernelSpec, Point};
use crate::linalg::{least_squares, Lu, Matrix};
use crate::scalar::Scalar;

/// Diagonal jitter added to every weighted kernel solve.
pub const KRR_JITTER: f64 = 1e-10;
/// Default ridge of the aggregation solve.
pub const IWA_DEFAULT_RIDGE: f64 = 1e-8;

/// A map from inputs to (possibly vector-valued) predictions.
pub trait Predictor<T> {
    fn predict(&self, x: &[T]) -> Vec<T>;
}

impl<T, F: Fn(&[T]) -> Vec<T>> Predictor<T> for F {
    fn predict(&self, x: &[T]) -> Vec<T> {
        self(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedRegressionTask<T> {
    pub xs: Vec<Point<T>>,
    /// One target vector per input.
    pub ys: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub kernel: KernelSpec<T>,
    pub alpha: T,
}

impl<T: Scalar> WeightedRegressionTask<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.xs.len();
        if n == 0 {
            return Err(invalid("xs", "regression task needs at least one point"));
        }
        for len in [self.ys.len(), self.weights.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        check_weights(&self.weights)?;
        if self.weights.iter().all(|&w| w == T::zero()) {
            return Err(invalid("weights", "at least one weight must be positive"));
        }
        let dy = self.ys[0].len();
        if let Some(bad) = self.ys.iter().find(|y| y.len() != dy) {
            return Err(Error::DimensionMismatch { expected: dy, found: bad.len() });
        }
        if !(self.alpha >= T::zero()) {
            return Err(invalid("alpha", "must be nonnegative"));
        }
        self.kernel.validate()
    }
}

fn check_weights<T: Scalar>(w: &[T]) -> Result<()> {
    if w.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(invalid("weights", "must be finite and nonnegative"));
    }
    Ok(())
}

/// Kernel expansion with one coefficient row per center.
#[derive(Clone, Debug, PartialEq)]
pub struct KrrModel<T> {
    pub kernel: KernelSpec<T>,
    pub centers: Vec<Point<T>>,
    /// `N × d_y` coefficients.
    pub coeffs: Matrix<T>,
}

impl<T: Scalar> KrrModel<T> {
    pub fn try_predict(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.coeffs.cols()];
        for (i, c) in self.centers.iter().enumerate() {
            let k = kernel_eval(&self.kernel, c, x)?;
            for (o, &a) in out.iter_mut().zip(self.coeffs.row(i)) {
                *o += k * a;
            }
        }
        Ok(out)
    }
}

impl<T: Scalar> Predictor<T> for KrrModel<T> {
    fn predict(&self, x: &[T]) -> Vec<T> {
        self.try_predict(x).expect("input dimension matches the training points")
    }
}

/// Solves `(W K/N + (α + jitter) I) c = W y / N`.
pub fn weighted_krr<T: Scalar>(task: &WeightedRegressionTask<T>) -> Result<KrrModel<T>> {
    task.validate()?;
    let n = task.xs.len();
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mut a = gram(&task.kernel, &task.xs, &task.xs)?;
    let scaled: Vec<T> = task.weights.iter().map(|&w| w * inv_n).collect();
    a.scale_rows(&scaled);
    a.add_diagonal(task.alpha + T::lit(KRR_JITTER));
    let lu = Lu::factor(&a)?;
    let dy = task.ys[0].len();
    let mut coeffs = Matrix::zeros(n, dy);
    for j in 0..dy {
        let rhs: Vec<T> = (0..n).map(|i| scaled[i] * task.ys[i][j]).collect();
        let c = lu.solve(&rhs)?;
        for (i, v) in c.into_iter().enumerate() {
            coeffs[(i, j)] = v;
        }
    }
    Ok(KrrModel {
        kernel: task.kernel,
        centers: task.xs.clone(),
        coeffs,
    })
}

fn check_validation<T: Scalar>(xs: &[Point<T>], ys: &[Vec<T>], weights: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid("val_xs", "validation set is empty"));
    }
    for len in [ys.len(), weights.len()] {
        if len != xs.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                found: len,
            });
        }
    }
    check_weights(weights)
}

/// `(1/N) Σ wᵢ ‖yᵢ − f(xᵢ)‖²`.
pub fn weighted_sq_risk<T: Scalar, P: Predictor<T> + ?Sized>(
    f: &P,
    xs: &[Point<T>],
    ys: &[Vec<T>],
    weights: &[T],
) -> Result<T> {
    check_validation(xs, ys, weights)?;
    let mut total = T::zero();
    for ((x, y), &w) in xs.iter().zip(ys).zip(weights) {
        if w == T::zero() {
            continue;
        }
        let pred = f.predict(x);
        if pred.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: pred.len(),
            });
        }
        let sq: T = pred.iter().zip(y).map(|(&p, &t)| (t - p) * (t - p)).sum();
        total += w * sq;
    }
    Ok(total / T::from_usize_lossy(xs.len()))
}

/// Candidate predictors with display labels.
pub struct CandidateSet<'a, T> {
    pub models: Vec<&'a dyn Predictor<T>>,
    pub labels: Vec<String>,
}

impl<'a, T: Scalar> CandidateSet<'a, T> {
    pub fn new(models: Vec<&'a dyn Predictor<T>>, labels: Vec<String>) -> Result<Self> {
        if models.is_empty() {
            return Err(invalid("candidates", "need at least one candidate"));
        }
        if labels.len() != models.len() {
            return Err(Error::DimensionMismatch {
                expected: models.len(),
                found: labels.len(),
            });
        }
        Ok(Self { models, labels })
    }

    /// Candidates labelled by their position.
    pub fn unlabeled(models: Vec<&'a dyn Predictor<T>>) -> Result<Self> {
        let labels = (0..models.len()).map(|i| i.to_string()).collect();
        Self::new(models, labels)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Index of the candidate with the smallest weighted validation risk, plus all risks.
pub fn iwv_select<T: Scalar>(
    candidates: &CandidateSet<'_, T>,
    val_xs: &[Point<T>],
    val_ys: &[Vec<T>],
    weights: &[T],
) -> Result<(usize, Vec<T>)> {
    let risks = candidates
        .models
        .iter()
        .map(|m| weighted_sq_risk(*m, val_xs, val_ys, weights))
        .collect::<Result<Vec<T>>>()?;
    let mut best = 0;
    for (i, &r) in risks.iter().enumerate() {
        // strict comparison keeps the earlier index on ties
        if r < risks[best] {
            best = i;
        }
    }
    Ok((best, risks))
}

/// Weights `c` of the best weighted least-squares combination `Σ c_k f_k`:
/// `(AᵀWA/N + ridge·I) c = AᵀWy/N` with `A[i][k] = f_k(xᵢ)`.
///
/// Solved as the stacked least-squares problem `[√(W/N) A; √ridge I] c ≈ [√(W/N) y; 0]`
/// by QR. Candidates whose columns of `A` coincide exactly share their weight
/// evenly (the ridge optimum does so), and are solved as one column with
/// ridge `ridge/k`. Vector-valued outputs contribute one row of `A` per component.
pub fn iwa_aggregate<T: Scalar>(
    candidates: &CandidateSet<'_, T>,
    val_xs: &[Point<T>],
    val_ys: &[Vec<T>],
    weights: &[T],
    ridge: T,
) -> Result<Vec<T>> {
    check_validation(val_xs, val_ys, weights)?;
    if !(ridge >= T::zero()) {
        return Err(invalid("ridge", "must be nonnegative"));
    }
    let l = candidates.len();
    let inv_n = T::one() / T::from_usize_lossy(val_xs.len());
    // columns[k] = √(wᵢ/N)·f_k(xᵢ)_c, stacked over points and output components
    let mut columns: Vec<Vec<T>> = vec![Vec::new(); l];
    let mut rhs: Vec<T> = Vec::new();
    for ((x, y), &w) in val_xs.iter().zip(val_ys).zip(weights) {
        let sw = (w * inv_n).sqrt();
        for (m, col) in candidates.models.iter().zip(columns.iter_mut()) {
            let p = m.predict(x);
            if p.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: y.len(),
                    found: p.len(),
                });
            }
            col.extend(p.iter().map(|&v| sw * v));
        }
        rhs.extend(y.iter().map(|&t| sw * t));
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..l {
        match groups.iter_mut().find(|g| columns[g[0]] == columns[k]) {
            Some(g) => g.push(k),
            None => groups.push(vec![k]),
        }
    }
    if ridge == T::zero() && groups.len() < l {
        return Err(Error::Singular(
            "aggregation system is rank deficient (duplicate candidates); use a positive ridge".into(),
        ));
    }
    let g = groups.len();
    let mut rows: Vec<Vec<T>> = (0..rhs.len()).map(|i| groups.iter().map(|grp| columns[grp[0]][i]).collect()).collect();
    if ridge > T::zero() {
        for (j, grp) in groups.iter().enumerate() {
            let mut row = vec![T::zero(); g];
            row[j] = (ridge / T::from_usize_lossy(grp.len())).sqrt();
            rows.push(row);
            rhs.push(T::zero());
        }
    }
    if rows.len() < g {
        return Err(Error::Singular(format!(
            "{} equations for {g} aggregation weights; use a positive ridge",
            rows.len()
        )));
    }
    let merged = least_squares(&Matrix::from_rows(&rows)?, &rhs).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "aggregation system is rank deficient ({msg}); use a positive ridge"
        )),
        other => other,
    })?;
    let mut coeffs = vec![T::zero(); l];
    for (grp, &s) in groups.iter().zip(&merged) {
        let share = s / T::from_usize_lossy(grp.len());
        for &k in grp {
            coeffs[k] = share;
        }
    }
    Ok(coeffs)
}

/// `Σ c_k f_k` as a predictor.
pub struct Aggregate<'a, T> {
    pub candidates: &'a CandidateSet<'a, T>,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> Predictor<T> for Aggregate<'_, T> {
    fn predict(&self, x: &[T]) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for (m, &c) in self.candidates.models.iter().zip(&self.coeffs) {
            let p = m.predict(x);
            if out.is_empty() {
                out = vec![T::zero(); p.len()];
            }
            for (o, v) in out.iter_mut().zip(p) {
                *o += c * v;
            }
        }
        out
    }
}
