use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use super::params::{DetectionSupport, ModelParams};
use super::types::{Association, CountKind, Track, Violation};

/// Per-time event counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventCounts {
    #[serde(rename = "a")]
    pub arrivals: Vec<usize>,
    #[serde(rename = "f")]
    pub clutter: Vec<usize>,
    #[serde(rename = "d")]
    pub detections: Vec<usize>,
    #[serde(rename = "l")]
    pub departures: Vec<usize>,
}

impl EventCounts {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            arrivals: vec![0; horizon],
            clutter: vec![0; horizon],
            detections: vec![0; horizon],
            departures: vec![0; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.arrivals.len()
    }

    /// Objects present after each step: `e_t = e_{t-1} + a_t - l_t`.
    pub fn existing(&self) -> Vec<i64> {
        let mut e = 0i64;
        self.arrivals
            .iter()
            .zip(&self.departures)
            .map(|(&a, &l)| {
                e += a as i64 - l as i64;
                e
            })
            .collect()
    }

    /// Counts implied by a set of tracks and the per-time observation totals.
    pub fn from_tracks(tracks: &[Track], frame_sizes: &[usize]) -> Self {
        let mut m = Self::zeros(frame_sizes.len());
        let mut claimed = vec![0usize; frame_sizes.len()];
        for tr in tracks {
            if tr.is_empty() {
                continue;
            }
            m.arrivals[tr.arrival()] += 1;
            m.departures[tr.departure()] += 1;
            for &t in &tr.times {
                claimed[t] += 1;
            }
        }
        for t in 0..frame_sizes.len() {
            m.clutter[t] = frame_sizes[t] - claimed[t];
            m.detections[t] = claimed[t] - m.arrivals[t];
        }
        m
    }
}

/// Per-object summary of an association: claim count, first and last time.
fn object_spans(z: &Association) -> Result<Vec<(usize, usize, usize)>, Violation> {
    let k_max = z.num_objects();
    let mut spans: Vec<Option<(usize, usize, usize)>> = vec![None; k_max + 1];
    for (t, frame) in z.labels().iter().enumerate() {
        let mut seen: Vec<usize> = frame.iter().copied().filter(|&k| k > 0).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Violation::DuplicateClaim { t, k: w[0] });
        }
        for k in seen {
            let e = spans[k].get_or_insert((0, t, t));
            e.0 += 1;
            e.2 = t;
        }
    }
    spans
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(k, s)| s.ok_or(Violation::NonContiguousLabel { k }))
        .collect()
}

/// Event counts implied by an association.
pub fn derive_counts(z: &Association) -> Result<EventCounts, Violation> {
    let horizon = z.horizon();
    let mut m = EventCounts::zeros(horizon);
    let mut claimed = vec![0usize; horizon];
    for (t, frame) in z.labels().iter().enumerate() {
        claimed[t] = frame.iter().filter(|&&k| k > 0).count();
        m.clutter[t] = frame.len() - claimed[t];
    }
    for (_, first, last) in object_spans(z)? {
        m.arrivals[first] += 1;
        m.departures[last] += 1;
    }
    for t in 0..horizon {
        m.detections[t] = claimed[t] - m.arrivals[t];
    }
    Ok(m)
}

/// Checks the association constraints, the two-observation rule, and that
/// `m` equals the counts implied by `z`.
pub fn check_validity(z: &Association, m: &EventCounts) -> Result<(), Violation> {
    let spans = object_spans(z)?;
    if let Some((k, &(count, _, _))) = spans.iter().enumerate().find(|(_, s)| s.0 < 2) {
        return Err(Violation::TooFewObservations { k: k + 1, count });
    }
    if m.horizon() != z.horizon() {
        return Err(Violation::HorizonMismatch {
            expected: z.horizon(),
            found: m.horizon(),
        });
    }
    let derived = derive_counts(z)?;
    for t in 0..z.horizon() {
        for (kind, exp, got) in [
            (CountKind::Arrivals, derived.arrivals[t], m.arrivals[t]),
            (CountKind::Clutter, derived.clutter[t], m.clutter[t]),
            (CountKind::Detections, derived.detections[t], m.detections[t]),
            (CountKind::Departures, derived.departures[t], m.departures[t]),
        ] {
            if exp != got {
                return Err(Violation::CountMismatch {
                    t,
                    kind,
                    expected: exp,
                    found: got,
                });
            }
        }
    }
    Ok(())
}

pub fn log_poisson(k: usize, rate: f64) -> f64 {
    k as f64 * rate.ln() - rate - ln_factorial(k as u64)
}

pub fn log_binomial(k: usize, n: i64, p: f64) -> f64 {
    if n < 0 || k as i64 > n {
        return f64::NEG_INFINITY;
    }
    let n = n as usize;
    let (kf, nf) = (k as f64, n as f64);
    let success = if k == 0 { 0.0 } else { kf * p.ln() };
    let failure = if k == n { 0.0 } else { (nf - kf) * (1.0 - p).ln() };
    ln_binomial(n as u64, k as u64) + success + failure
}

/// `log p(M)`: Poisson arrivals and clutter, Binomial detections and departures.
pub fn log_counts_prior(m: &EventCounts, params: &ModelParams) -> f64 {
    let mut total = 0.0;
    let mut prev_existing = 0i64;
    for t in 0..m.horizon() {
        let (a, f, d, l) = (m.arrivals[t], m.clutter[t], m.detections[t], m.departures[t]);
        let support = match params.detection_support {
            DetectionSupport::Existing => prev_existing,
            DetectionSupport::ExistingPlusArrivals => prev_existing + a as i64,
        };
        total += log_poisson(a, params.birth_rate)
            + log_poisson(f, params.clutter_rate)
            + log_binomial(d, support, params.p_detect)
            + log_binomial(l, d as i64, params.p_depart);
        prev_existing += a as i64 - l as i64;
        if prev_existing < 0 {
            return f64::NEG_INFINITY;
        }
    }
    total
}
