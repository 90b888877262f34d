//! Martingale projections S_j / differences D_j on the cube tree and the
//! stopping-scale machinery built on the density sequence θ_j.

mod martingale;
mod scales;

pub use martingale::{
    energy_identity_check, orthogonality_check, project, EnergyReport, MartingaleDecomposition, OrthogonalityReport,
};
pub use scales::{
    p_of, p_of_cube, random_lambdas, thetas_from_lambdas, stop_scales, IntervalInfo, LemmaCheck, LemmaReport, ScaleAnalysis, ScaleParams,
    BAD_SCALE_FACTOR, GOOD_INTERVAL_FRACTION,
};
