//! Uncertainty diagnostics and tracking metrics.

mod distance;
mod mot;
mod stlc;
mod transport;
mod variance;

pub use distance::{
    align_to, distance, hypothesis_distance, match_modes, nearest_mode, total_variation, tv_curve,
    HypothesisDistanceReport, ModeHistogram, UNMATCHED_COST,
};
pub use mot::{clear_mot, clear_mot_chunked, frames_from_hypothesis, Frames, MotReport};
pub use stlc::{
    hypothesis_from_claims, hypothesis_from_tracks, hypothesis_from_truth, stlc_cost,
    stlc_similarity, Hypothesis, StlcParams, Trajectory,
};
pub use transport::{matching, transport};
pub use variance::{posterior_variance_summary, ObjectBand, VarianceSummary};
