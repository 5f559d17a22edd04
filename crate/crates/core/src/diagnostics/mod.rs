//! Measurements: norms, the theta functional, decay fits, analyticity radii,
//! derivative growth, blow-up monitoring and the combinatorial sum check.

mod analyticity;
mod blowup;
mod fit;
mod kahane;
mod norms;
mod theta;

pub use analyticity::{
    analyticity_estimate, analyticity_radius_space, analyticity_radius_time, growth_rate_fit,
    ladder_sup_norms, shell_maxima, write_analyticity_csv, AnalyticityEstimate, FitFlag, GrowthFit,
    SpaceRadiusFit, TimeRadius, BAND_LOWER, BAND_UPPER, MIN_BAND_SHELLS,
};
pub use blowup::{blow_up_monitor, BlowUpClass, BlowUpEvidence, MIN_MONITOR_STEPS};
pub use fit::{
    decay_fit, decay_fits, fit_line, predicted_decay_slope, write_decay_csv, DecayFit,
    DecayRequest, LineFit, MIN_FIT_SAMPLES,
};
pub use kahane::{kahane_sum_check, kahane_sweep, KahaneCheck, KahaneSweep, MAX_KAHANE_ORDER};
pub use norms::{lq_norm, lq_norm_samples, magnitude, vector_lq_norm};
pub use theta::{theta_functional, ThetaEntry, ThetaReport};
