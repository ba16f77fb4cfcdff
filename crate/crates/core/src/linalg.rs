//! Small dense linear-algebra helpers shared by the Gaussian kernels.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factorization retrying with a diagonal jitter of `1e-9 * trace / dim`
/// (growing tenfold per attempt) when the plain factorization fails.
pub fn robust_cholesky(cov: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool)> {
    if !cov.is_square() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPsd("covariance has non-finite entries".into()));
    }
    let sym = symmetrize(cov);
    if let Some(c) = Cholesky::new(sym.clone()) {
        return Ok((c, false));
    }
    let dim = sym.nrows().max(1) as f64;
    let mut jitter = (1e-9 * sym.trace().abs() / dim).max(1e-12);
    for _ in 0..12 {
        let mut m = sym.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, true));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPsd(format!("factorization failed for {sym}")))
}

/// A factored multivariate normal covariance, for repeated density evaluation.
#[derive(Debug, Clone)]
pub struct MvnFactor {
    lower: DMatrix<f64>,
    log_det: f64,
    jittered: bool,
}

impl MvnFactor {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let (chol, jittered) = robust_cholesky(cov)?;
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            lower,
            log_det,
            jittered,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Log density of a zero-mean normal at `residual`.
    pub fn log_pdf_residual(&self, residual: &DVector<f64>) -> f64 {
        let w = self
            .lower
            .solve_lower_triangular(residual)
            .expect("cholesky factor has a positive diagonal");
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det + w.norm_squared())
    }

    pub fn log_pdf(&self, x: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        self.log_pdf_residual(&(x - mean))
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let eps = standard_normal(self.dim(), rng);
        mean + &self.lower * eps
    }
}

pub fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw from N(mean, cov) for a covariance that may be singular.
///
/// Uses a symmetric eigendecomposition with negative eigenvalues clamped to
/// zero, so a zero covariance returns the mean. The flag reports whether
/// clamping of eigenvalues below -1e-9 was needed.
pub fn sample_psd<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> (DVector<f64>, bool) {
    let eig = SymmetricEigen::new(symmetrize(cov));
    let mut clamped = false;
    let scales = eig.eigenvalues.map(|l| {
        if l < -1e-9 {
            clamped = true;
        }
        l.max(0.0).sqrt()
    });
    let eps = standard_normal(mean.len(), rng);
    let scaled = eps.component_mul(&scales);
    (mean + eig.eigenvectors * scaled, clamped)
}

/// `log(sum(exp(w)))`, summing in ascending order so equal multisets give
/// bit-identical results.
pub fn log_sum_exp_sorted(weights: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = weights.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let max = match sorted.last() {
        Some(m) if m.is_finite() => *m,
        Some(m) => return *m,
        None => return f64::NEG_INFINITY,
    };
    max + sorted.iter().map(|w| (w - max).exp()).sum::<f64>().ln()
}

/// Sum in ascending order (see [`log_sum_exp_sorted`]).
pub fn sum_sorted(terms: &mut [f64]) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

/// Sample an index from unnormalized log weights. Returns the index and its
/// normalized log probability.
pub fn sample_log_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> (usize, f64) {
    let log_z = log_sum_exp_sorted(weights);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        acc += (w - log_z).exp();
        if u < acc {
            chosen = i;
            break;
        }
    }
    // Fall through to the last positive-mass entry on round-off.
    while !weights[chosen].is_finite() && chosen > 0 {
        chosen -= 1;
    }
    (chosen, weights[chosen] - log_z)
}
