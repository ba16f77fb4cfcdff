use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use super::params::ModelParams;
use crate::error::Result;
use crate::linalg::{symmetrize, MvnFactor};

/// Compose two transition kernels: first `(fa, qa)`, then `(fb, qb)`.
pub fn compose(
    (fa, qa): (&DMatrix<f64>, &DMatrix<f64>),
    (fb, qb): (&DMatrix<f64>, &DMatrix<f64>),
) -> (DMatrix<f64>, DMatrix<f64>) {
    (fb * fa, symmetrize(&(fb * qa * fb.transpose() + qb)))
}

/// The `g`-step transition `(F^g, sum_{i<g} F^i Q F^i')` by repeated squaring.
pub fn gap_power(f: &DMatrix<f64>, q: &DMatrix<f64>, g: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = f.nrows();
    let mut acc = (DMatrix::identity(n, n), DMatrix::zeros(n, n));
    let mut base = (f.clone(), q.clone());
    let mut g = g;
    while g > 0 {
        if g & 1 == 1 {
            acc = compose((&acc.0, &acc.1), (&base.0, &base.1));
        }
        g >>= 1;
        if g > 0 {
            base = compose((&base.0, &base.1), (&base.0, &base.1));
        }
    }
    acc
}

/// Everything needed to score or draw a state given a point-valued predecessor
/// (or the trajectory prior), and to claim an observation with it.
#[derive(Debug, Clone)]
pub struct StepKernel {
    /// `F^g`, or identity for the prior step.
    pub transition: DMatrix<f64>,
    /// Predictive state covariance (`Q_g`, or the prior covariance).
    pub pred_cov: DMatrix<f64>,
    pub pred: MvnFactor,
    /// Predictive observation covariance `H P H' + R`.
    pub innovation: MvnFactor,
    pub gain: DMatrix<f64>,
    /// Conditional state covariance after one observation (Joseph form).
    pub post_cov: DMatrix<f64>,
    pub post: MvnFactor,
}

impl StepKernel {
    fn new(transition: DMatrix<f64>, pred_cov: DMatrix<f64>, params: &ModelParams) -> Result<Self> {
        let h = &params.observation;
        let r = &params.observation_noise;
        let s = symmetrize(&(h * &pred_cov * h.transpose() + r));
        let innovation = MvnFactor::new(&s)?;
        let s_inv = crate::linalg::robust_cholesky(&s)?.0.inverse();
        let gain = &pred_cov * h.transpose() * s_inv;
        let n = pred_cov.nrows();
        let a = DMatrix::identity(n, n) - &gain * h;
        let post_cov = symmetrize(&(&a * &pred_cov * a.transpose() + &gain * r * gain.transpose()));
        Ok(Self {
            pred: MvnFactor::new(&pred_cov)?,
            post: MvnFactor::new(&post_cov)?,
            transition,
            pred_cov,
            innovation,
            gain,
            post_cov,
        })
    }

    /// Conditional mean of the state after observing `y` from prediction `mean`.
    pub fn post_mean(&self, pred_mean: &DVector<f64>, y: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
        pred_mean + &self.gain * (y - h * pred_mean)
    }
}

/// Model parameters with precomputed per-gap kernels.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    prior: StepKernel,
    gaps: Vec<StepKernel>,
    clutter: MvnFactor,
    obs_noise: MvnFactor,
}

impl Model {
    /// Precomputes kernels for gaps `1..=horizon`; longer gaps are built on demand.
    pub fn new(params: ModelParams, horizon: usize) -> Result<Self> {
        params.validate()?;
        let dx = params.state_dim();
        let prior = StepKernel::new(DMatrix::identity(dx, dx), params.prior_cov.clone(), &params)?;
        let mut gaps = Vec::with_capacity(horizon);
        let (mut fg, mut qg) = (params.dynamics.clone(), symmetrize(&params.process_noise));
        for _ in 0..horizon.max(1) {
            gaps.push(StepKernel::new(fg.clone(), qg.clone(), &params)?);
            (fg, qg) = compose((&fg, &qg), (&params.dynamics, &params.process_noise));
        }
        Ok(Self {
            clutter: MvnFactor::new(&params.clutter_cov)?,
            obs_noise: MvnFactor::new(&params.observation_noise)?,
            params,
            prior,
            gaps,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn prior_step(&self) -> &StepKernel {
        &self.prior
    }

    /// Kernel for a gap of `g >= 1` steps.
    pub fn gap(&self, g: usize) -> Cow<'_, StepKernel> {
        assert!(g >= 1, "gap must be at least one step");
        match self.gaps.get(g - 1) {
            Some(k) => Cow::Borrowed(k),
            None => {
                let (f, q) = gap_power(&self.params.dynamics, &self.params.process_noise, g);
                Cow::Owned(
                    StepKernel::new(f, q, &self.params).expect("gap kernel from validated params"),
                )
            }
        }
    }

    /// Kernel and predictive mean for a state at `t` given the last stored state.
    pub fn step(&self, prev: Option<(usize, &DVector<f64>)>, t: usize) -> (Cow<'_, StepKernel>, DVector<f64>) {
        match prev {
            None => (Cow::Borrowed(&self.prior), self.params.prior_mean.clone()),
            Some((tp, x)) => {
                let k = self.gap(t - tp);
                let m = &k.transition * x;
                (k, m)
            }
        }
    }

    /// `log p(x_t | previous stored state)`, or the prior density when `prev` is `None`.
    pub fn log_transition(&self, prev: Option<(usize, &DVector<f64>)>, t: usize, x: &DVector<f64>) -> f64 {
        let (k, m) = self.step(prev, t);
        k.pred.log_pdf(x, &m)
    }

    pub fn log_obs(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        self.obs_noise.log_pdf(y, &(&self.params.observation * x))
    }

    pub fn log_clutter(&self, y: &DVector<f64>) -> f64 {
        self.clutter.log_pdf(y, &self.params.clutter_mean)
    }
}
