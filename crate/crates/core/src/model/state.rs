use std::sync::Arc;

use super::counts::{log_counts_prior, EventCounts};
use super::density::{log_annotations, log_joint, track_weight};
use super::kernel::Model;
use super::params::ModelParams;
use super::types::{Annotation, Association, ObsRef, ObservationSet, Track};
use crate::error::{Error, Result};

/// Observations, model, and per-observation clutter log-densities.
#[derive(Debug, Clone)]
pub struct Scene {
    pub obs: ObservationSet,
    pub model: Model,
    clutter: Vec<Vec<f64>>,
}

impl Scene {
    pub fn new(obs: ObservationSet, params: ModelParams) -> Result<Self> {
        if params.obs_dim() != obs.dim() {
            return Err(Error::Dimension(format!(
                "observations have dimension {}, model expects {}",
                obs.dim(),
                params.obs_dim()
            )));
        }
        let model = Model::new(params, obs.horizon())?;
        let clutter = obs
            .frames()
            .iter()
            .map(|f| f.iter().map(|y| model.log_clutter(y)).collect())
            .collect();
        Ok(Self { obs, model, clutter })
    }

    pub fn horizon(&self) -> usize {
        self.obs.horizon()
    }

    pub fn clutter_log_pdf(&self, at: ObsRef) -> f64 {
        self.clutter[at.t][at.n]
    }
}

/// One sample of the chain: trajectories, association and counts, with the
/// cached unnormalized log joint.
#[derive(Debug, Clone)]
pub struct ChainState {
    tracks: Vec<Track>,
    weights: Vec<f64>,
    z: Association,
    counts: EventCounts,
    log_joint: f64,
    annotations: Arc<[Annotation]>,
}

impl ChainState {
    pub fn all_clutter(scene: &Scene, annotations: Arc<[Annotation]>) -> Self {
        Self::from_tracks(scene, Vec::new(), annotations)
    }

    /// Builds the association and counts from `tracks`. Each track must have
    /// strictly increasing times and claim existing observations.
    pub fn from_tracks(scene: &Scene, tracks: Vec<Track>, annotations: Arc<[Annotation]>) -> Self {
        let weights = tracks
            .iter()
            .map(|t| track_weight(t, &scene.obs, &scene.model))
            .collect();
        Self::with_weights(scene, tracks, weights, annotations)
    }

    pub(crate) fn with_weights(
        scene: &Scene,
        tracks: Vec<Track>,
        weights: Vec<f64>,
        annotations: Arc<[Annotation]>,
    ) -> Self {
        let mut z = Association::all_clutter(&scene.obs.counts());
        for (i, tr) in tracks.iter().enumerate() {
            for at in tr.claims() {
                debug_assert_eq!(z.get(at), 0, "observation claimed twice");
                z.set(at, i + 1);
            }
        }
        let counts = EventCounts::from_tracks(&tracks, &scene.obs.counts());
        let mut s = Self {
            tracks,
            weights,
            z,
            counts,
            log_joint: 0.0,
            annotations,
        };
        s.log_joint = s.fast_log_joint(scene);
        s
    }

    fn fast_log_joint(&self, scene: &Scene) -> f64 {
        if self.tracks.iter().any(|t| t.len() < 2) {
            return f64::NEG_INFINITY;
        }
        let mut clutter = 0.0;
        for at in scene.obs.refs() {
            if self.z.get(at) == 0 {
                clutter += scene.clutter_log_pdf(at);
            }
        }
        log_counts_prior(&self.counts, scene.model.params())
            + self.weights.iter().sum::<f64>()
            + clutter
            + log_annotations(&self.annotations, &self.z)
    }

    /// Recomputes the log joint from scratch.
    pub fn recompute_log_joint(&self, scene: &Scene) -> Result<f64> {
        log_joint(&scene.obs, &self.z, &self.tracks, &self.annotations, &scene.model)
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn association(&self) -> &Association {
        &self.z
    }

    pub fn counts(&self) -> &EventCounts {
        &self.counts
    }

    pub fn log_joint(&self) -> f64 {
        self.log_joint
    }

    pub fn annotations(&self) -> &Arc<[Annotation]> {
        &self.annotations
    }

    pub fn num_objects(&self) -> usize {
        self.tracks.len()
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }
}
