//! Numerical checks of the dynamics: emulation of deep descent by the
//! end-to-end rule, loop integrals of the end-to-end field, the warmup
//! identity, balancedness and the two-coordinate acceleration example.

mod appb;
mod conservativity;
mod curve;
mod dynamics;
mod emulation;

pub use appb::{appb_experiment, appb_experiment_with, AppBOptions, AppBReport};
pub use conservativity::{
    companion_radius, conservativity_report, jacobian_asymmetry, shrink_until_positive, ConservativityReport,
    Verdict,
};
pub use curve::{
    build_curve, field_f, lemma2_bound, lemma3_reference, line_integral, transform_field, Curve, CurveSpec,
    LineIntegral, PIECES,
};
pub use dynamics::{discrete_balancedness_drift, flow_balancedness_drift, flow_equivalence_gap, warmup_residual};
pub use emulation::{emulation_report, emulation_report_from, relative_gap, EmulationReport};
