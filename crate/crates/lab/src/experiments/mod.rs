//! One module per catalog entry. Each returns a [`Report`] whose checks
//! carry the declared tolerances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wavepacket_core::SpatialGrid;

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::Report;

pub mod bilinear;
pub mod budget;
pub mod conservation;
pub mod decompose;
pub mod dispersive;
pub mod flow;
pub mod isometry;
pub mod localization;
pub mod tubes;

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    match cfg.experiment {
        ExperimentName::Isometry => isometry::run(cfg),
        ExperimentName::Flow => flow::run(cfg),
        ExperimentName::Localization => localization::run(cfg),
        ExperimentName::Decompose => decompose::run(cfg),
        ExperimentName::Dispersive => dispersive::run(cfg),
        ExperimentName::Bilinear => bilinear::run(cfg),
        ExperimentName::Conservation => conservation::run(cfg),
        ExperimentName::Tubes => tubes::run(cfg),
        ExperimentName::Budget => budget::run(cfg),
    }
}

/// Independent stream per `(seed, stream)` so that sweeps do not share draws.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Grid from the manifest, falling back to `(half_width, points)`.
pub(crate) fn grid_or(cfg: &ExperimentConfig, dim: usize, half_width: f64, points: usize) -> Result<SpatialGrid, LabError> {
    let l = cfg.grid.half_width.unwrap_or(half_width);
    let n = cfg.grid.points.unwrap_or(points);
    Ok(SpatialGrid::new(dim, l, n)?)
}
