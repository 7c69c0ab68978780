//! Numerical laboratory for positive symplectic twist maps of the annulus.
//!
//! Maps are defined through a generating function `S(x, X)`. On top of the
//! map evaluation the crate finds action-minimizing periodic orbits, computes
//! their Greene residues and mean residues, finite-depth Green-bundle slopes,
//! Lyapunov exponents, C¹-regularity proxies for point clouds, and classifies
//! the decay rate of orbit-to-set distances.
//!
//! Data-parallel loops (restart sweeps, convergent scans, per-point
//! profiles) run on rayon when the `parallel` feature is enabled and fall back
//! to plain iterators otherwise. Results are identical either way.

// `!(a < b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod greene;
pub mod map;
pub mod par;
pub mod rate;
pub mod regularity;
pub mod spectral;

pub use action::{
    action, action_gradient, action_hessian, configuration_to_orbit, minimize_periodic,
    minimize_periodic_seeded, minimizing_orbit, rotation_number, ActionReport, Configuration, PeriodicTridiagonal,
};
pub use error::{Error, Result};
pub use greene::{
    convergents, convergents_from_omega, eigenvalue_bound_check, greene_scan, TargetSpec,
    GreeneConfig, GreeneReport, RotationTarget, Verdict,
};
pub use map::{
    backward, forward, orbit, tangent, AnnulusPoint, CustomGenerating, GeneratingFunction,
    LiftPoint, Tangent2x2, TwistMap,
};
pub use rate::{classify_rate, distance_series, DistanceSeries, RateConfig, RateKind, RateVerdict};
pub use regularity::{
    green_gap_profile, lipschitz_graph_check, paratangent_spread, PointCloud, Provenance,
    SlopeSpread,
};
pub use spectral::{
    green_slopes, lyapunov_exponent, monodromy_trace, residue, slope_pushforward, GreenPair,
    ProjectiveSlope, ResidueRecord, ScaledTrace,
};
