//! Linear-Gaussian filtering, smoothing and backward sampling over sparse
//! observation times. Steps without an observation are marginalized by the
//! gap kernels of [`Model`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{robust_cholesky, sample_psd, symmetrize, MvnFactor};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }
}

#[derive(Debug, Clone)]
pub struct FilterStep {
    pub time: usize,
    pub predicted: GaussianBelief,
    pub filtered: GaussianBelief,
    /// `log N(y | H m_pred, H P_pred H' + R)`.
    pub log_lik: f64,
}

fn check_times(times: &[usize], obs: &[DVector<f64>], model: &Model) -> Result<()> {
    if times.len() != obs.len() {
        return Err(Error::Dimension(format!(
            "{} times for {} observations",
            times.len(),
            obs.len()
        )));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(format!(
            "observation times must increase strictly ({} then {})",
            w[0], w[1]
        )));
    }
    let dy = model.params().obs_dim();
    if let Some(y) = obs.iter().find(|y| y.len() != dy) {
        return Err(Error::Dimension(format!(
            "observation has dimension {}, expected {dy}",
            y.len()
        )));
    }
    Ok(())
}

fn update(pred: &GaussianBelief, y: &DVector<f64>, model: &Model) -> Result<(GaussianBelief, f64)> {
    let h = &model.params().observation;
    let r = &model.params().observation_noise;
    let s = symmetrize(&(h * &pred.cov * h.transpose() + r));
    let factor = MvnFactor::new(&s)?;
    let resid = y - h * &pred.mean;
    let log_lik = factor.log_pdf_residual(&resid);
    let s_inv = robust_cholesky(&s)?.0.inverse();
    let gain = &pred.cov * h.transpose() * s_inv;
    let n = pred.mean.len();
    let a = DMatrix::identity(n, n) - &gain * h;
    let cov = symmetrize(&(&a * &pred.cov * a.transpose() + &gain * r * gain.transpose()));
    Ok((GaussianBelief::new(&pred.mean + &gain * resid, cov), log_lik))
}

/// Forward filter over one object's observation sequence.
///
/// The first time is scored against the trajectory prior. Between consecutive
/// times the prediction uses `F^g` and the accumulated process noise.
pub fn filter_pass(times: &[usize], obs: &[DVector<f64>], model: &Model) -> Result<Vec<FilterStep>> {
    check_times(times, obs, model)?;
    let p = model.params();
    let mut out: Vec<FilterStep> = Vec::with_capacity(times.len());
    for (&t, y) in times.iter().zip(obs) {
        let predicted = match out.last() {
            None => GaussianBelief::new(p.prior_mean.clone(), p.prior_cov.clone()),
            Some(prev) => {
                let k = model.gap(t - prev.time);
                let f = &k.transition;
                GaussianBelief::new(
                    f * &prev.filtered.mean,
                    symmetrize(&(f * &prev.filtered.cov * f.transpose() + &k.pred_cov)),
                )
            }
        };
        let (filtered, log_lik) = update(&predicted, y, model)?;
        out.push(FilterStep {
            time: t,
            predicted,
            filtered,
            log_lik,
        });
    }
    Ok(out)
}

/// Smoothing gain `J = P_i F' Pred_{i+1}^{-1}`, with a jitter flag.
fn smoothing_gain(cur: &FilterStep, next: &FilterStep, model: &Model) -> Result<(DMatrix<f64>, bool)> {
    let k = model.gap(next.time - cur.time);
    let (chol, jittered) = robust_cholesky(&next.predicted.cov)?;
    // J' = Pred^{-1} F P_i, since P_i and Pred are symmetric.
    let jt = chol.solve(&(&k.transition * &cur.filtered.cov));
    Ok((jt.transpose(), jittered))
}

/// Draws one joint trajectory at the observation times, last time first.
/// The flag reports whether any covariance needed jitter or eigenvalue clamping.
pub fn backward_sample<R: Rng + ?Sized>(
    steps: &[FilterStep],
    model: &Model,
    rng: &mut R,
) -> Result<(Vec<DVector<f64>>, bool)> {
    let last = steps
        .last()
        .ok_or_else(|| Error::Parameter("empty filter output".into()))?;
    let mut out = vec![DVector::zeros(0); steps.len()];
    let (x, mut flagged) = sample_psd(&last.filtered.mean, &last.filtered.cov, rng);
    out[steps.len() - 1] = x;
    for i in (0..steps.len() - 1).rev() {
        let (cur, next) = (&steps[i], &steps[i + 1]);
        let (j, jittered) = smoothing_gain(cur, next, model)?;
        let f = &model.gap(next.time - cur.time).transition;
        let mean = &cur.filtered.mean + &j * (&out[i + 1] - f * &cur.filtered.mean);
        let cov = &cur.filtered.cov - &j * &next.predicted.cov * j.transpose();
        let (x, clamped) = sample_psd(&mean, &cov, rng);
        flagged |= jittered || clamped;
        out[i] = x;
    }
    Ok((out, flagged))
}

/// Rauch-Tung-Striebel marginals at the observation times.
pub fn smoother_marginals(steps: &[FilterStep], model: &Model) -> Result<Vec<GaussianBelief>> {
    let Some(last) = steps.last() else {
        return Ok(Vec::new());
    };
    let mut out = vec![last.filtered.clone(); steps.len()];
    for i in (0..steps.len() - 1).rev() {
        let (cur, next) = (&steps[i], &steps[i + 1]);
        let (j, _) = smoothing_gain(cur, next, model)?;
        let mean = &cur.filtered.mean + &j * (&out[i + 1].mean - &next.predicted.mean);
        let cov = &cur.filtered.cov + &j * (&out[i + 1].cov - &next.predicted.cov) * j.transpose();
        out[i] = GaussianBelief::new(mean, symmetrize(&cov));
    }
    Ok(out)
}

/// Cross-covariances `Cov(x_i, x_{i+1} | all)` between consecutive smoothed states.
pub fn smoother_cross_covariances(steps: &[FilterStep], model: &Model) -> Result<Vec<DMatrix<f64>>> {
    let marginals = smoother_marginals(steps, model)?;
    (0..steps.len().saturating_sub(1))
        .map(|i| {
            let (j, _) = smoothing_gain(&steps[i], &steps[i + 1], model)?;
            Ok(j * &marginals[i + 1].cov)
        })
        .collect()
}

/// `log p(y_1..y_n)` by prediction-error decomposition.
pub fn log_marginal_likelihood(times: &[usize], obs: &[DVector<f64>], model: &Model) -> Result<f64> {
    Ok(filter_pass(times, obs, model)?.iter().map(|s| s.log_lik).sum())
}

/// Distribution of the state at `t` given point states at `ta < t < tb`.
pub fn bridge(
    model: &Model,
    (ta, xa): (usize, &DVector<f64>),
    (tb, xb): (usize, &DVector<f64>),
    t: usize,
) -> Result<GaussianBelief> {
    if !(ta < t && t < tb) {
        return Err(Error::Parameter(format!("{t} is not strictly between {ta} and {tb}")));
    }
    let before = model.gap(t - ta);
    let after = model.gap(tb - t);
    let m = &before.transition * xa;
    let p = &before.pred_cov;
    let h = &after.transition;
    let s = symmetrize(&(h * p * h.transpose() + &after.pred_cov));
    let (chol, _) = robust_cholesky(&s)?;
    let gain = chol.solve(&(h * p)).transpose();
    let mean = &m + &gain * (xb - h * &m);
    let cov = symmetrize(&(p - &gain * h * p));
    Ok(GaussianBelief::new(mean, cov))
}
