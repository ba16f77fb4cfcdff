use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the detection count at `t` is scored against the number of objects present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSupport {
    /// `d_t ~ Bin(e_{t-1}, p_d)`. Arrivals are not detections.
    #[default]
    Existing,
    /// `d_t ~ Bin(e_{t-1} + a_t, p_d)`.
    ExistingPlusArrivals,
}

/// Parameters of the generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(with = "matrix_rows")]
    pub dynamics: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub process_noise: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub observation: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub observation_noise: DMatrix<f64>,
    #[serde(with = "vector")]
    pub prior_mean: DVector<f64>,
    #[serde(with = "matrix_rows")]
    pub prior_cov: DMatrix<f64>,
    #[serde(with = "vector")]
    pub clutter_mean: DVector<f64>,
    #[serde(with = "matrix_rows")]
    pub clutter_cov: DMatrix<f64>,
    pub birth_rate: f64,
    pub clutter_rate: f64,
    pub p_detect: f64,
    pub p_depart: f64,
    #[serde(default)]
    pub detection_support: DetectionSupport,
}

impl ModelParams {
    /// One-dimensional random-walk model (`F = H = 1`).
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(
        q: f64,
        r: f64,
        prior_mean: f64,
        prior_var: f64,
        clutter_mean: f64,
        clutter_var: f64,
        birth_rate: f64,
        clutter_rate: f64,
        p_detect: f64,
        p_depart: f64,
    ) -> Self {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let v = |v: f64| DVector::from_element(1, v);
        Self {
            dynamics: m(1.0),
            process_noise: m(q),
            observation: m(1.0),
            observation_noise: m(r),
            prior_mean: v(prior_mean),
            prior_cov: m(prior_var),
            clutter_mean: v(clutter_mean),
            clutter_cov: m(clutter_var),
            birth_rate,
            clutter_rate,
            p_detect,
            p_depart,
            detection_support: DetectionSupport::Existing,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.observation.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let dx = self.state_dim();
        let dy = self.obs_dim();
        let shape = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.shape() != (r, c) {
                Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )))
            } else {
                Ok(())
            }
        };
        shape("dynamics", &self.dynamics, dx, dx)?;
        shape("process_noise", &self.process_noise, dx, dx)?;
        shape("observation", &self.observation, dy, dx)?;
        shape("observation_noise", &self.observation_noise, dy, dy)?;
        shape("prior_cov", &self.prior_cov, dx, dx)?;
        shape("clutter_cov", &self.clutter_cov, dy, dy)?;
        if self.prior_mean.len() != dx || self.clutter_mean.len() != dy {
            return Err(Error::Dimension("mean vector length".into()));
        }
        for (name, m) in [
            ("process_noise", &self.process_noise),
            ("observation_noise", &self.observation_noise),
            ("prior_cov", &self.prior_cov),
            ("clutter_cov", &self.clutter_cov),
        ] {
            check_psd(name, m)?;
        }
        if !(self.birth_rate > 0.0 && self.birth_rate.is_finite()) {
            return Err(Error::Parameter("birth_rate must be positive".into()));
        }
        if !(self.clutter_rate > 0.0 && self.clutter_rate.is_finite()) {
            return Err(Error::Parameter("clutter_rate must be positive".into()));
        }
        if !(self.p_detect > 0.0 && self.p_detect <= 1.0) {
            return Err(Error::Parameter("p_detect must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.p_depart) {
            return Err(Error::Parameter("p_depart must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let asym = (m - m.transpose()).abs().max();
    if !asym.is_finite() || asym > 1e-10 * (1.0 + m.abs().max()) {
        return Err(Error::NotPsd(format!("{name} is not symmetric")));
    }
    let eig = m.clone().symmetric_eigenvalues();
    if eig.iter().any(|&l| l < -1e-9) {
        return Err(Error::NotPsd(format!("{name} has a negative eigenvalue")));
    }
    Ok(())
}

/// Serialize a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        serde::Serialize::serialize(&rows, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

pub mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(v.as_slice(), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelParams {
        ModelParams::scalar(1.0, 1.0, 0.0, 100.0, 0.0, 10.0, 0.1, 0.5, 0.9, 0.1)
    }

    #[test]
    fn json_round_trip() {
        let p = toy();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"dynamics\":[[1.0]]"));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_bad_values() {
        let mut p = toy();
        p.birth_rate = 0.0;
        assert!(p.validate().is_err());
        let mut p = toy();
        p.process_noise[(0, 0)] = -1.0;
        assert!(matches!(p.validate(), Err(Error::NotPsd(_))));
        let mut p = toy();
        p.p_depart = 1.0;
        assert!(p.validate().is_err());
        assert!(toy().validate().is_ok());
    }
}
