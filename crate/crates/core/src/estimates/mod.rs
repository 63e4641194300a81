//! Norm engines and numerical checks for decay, bilinear scaling,
//! transversality, energy shells and conservation tests.

pub mod bilinear;
pub mod dispersive;
pub mod energy;
pub mod localization;
pub mod norms;
pub mod transversality;

pub use bilinear::{BilinearOptions, BilinearRow, BilinearSweep, bilinear_cell, bilinear_sweep, free_bilinear_l2};
pub use dispersive::{DispersiveFit, DispersiveRow, dispersive_fit};
pub use energy::{ConservationFlags, FrequencyGrid, conservation_flags, energy_difference, energy_gradient, energy_shell_sample};
pub use localization::{LocalizationReport, LocalizationRow, TimeFrequencyRow, localization_report, monotone_in_r};
pub use norms::{SpaceTimeCube, bilinear_norm, cube_weight, lp_spacetime_norm, quadrilinear_integral};
pub use transversality::{TransversalityReport, transversality_check};

/// Default small exponent in the position, frequency and energy thresholds.
pub const DEFAULT_DELTA: f64 = 0.1;
