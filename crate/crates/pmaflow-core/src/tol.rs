//! Default tolerances and numerical constants, in one place.

/// Floor under `MA_h(u)` before taking the logarithm (density units).
pub const MA_FLOOR: f64 = 1e-12;
/// `dt = CFL_FACTOR · h² / (1 + max|log MA| + max|F|)`.
pub const CFL_FACTOR: f64 = 0.2;
/// Weight on negative directional Hessians in the operator.
pub const PENALTY: f64 = 1.0;
/// Default number of unitary frames for n = 2.
pub const DEFAULT_FRAMES: usize = 16;
pub const PROJECTION_TOL: f64 = 1e-12;
pub const PROJECTION_MAX_ITER: usize = 200;
pub const PSH_TOL: f64 = 1e-9;
/// Upper cap on the witness constant `C`.
pub const WITNESS_C_CAP: f64 = 40.0;
pub const BISECTION_STEPS: usize = 40;
pub const HOLDER_SLACK: f64 = 0.15;
pub const MIN_PAIRS: usize = 10;
/// Search caps for the doubling and halving loops.
pub const DOUBLING_CAP: usize = 40;
pub const HALVING_CAP: usize = 30;
/// Forward time offset used to difference barrier fields.
pub const TIME_PROBE: f64 = 1e-4;
/// Time window used when the horizon is infinite.
pub const OPEN_HORIZON_WINDOW: f64 = 10.0;

/// Compatibility tolerance between `u₀` and `φ(0,·)`.
pub fn compat(h: f64) -> f64 {
    10.0 * h
}

/// Tolerance of the discrete sub/supersolution sweeps.
pub fn visc(h: f64) -> f64 {
    10.0 * h
}

/// Tolerance of the witness density inequality.
pub fn adm(h: f64) -> f64 {
    10.0 * h
}

/// Tolerance of the restart-vs-single-run seam comparison.
pub fn seam(h: f64) -> f64 {
    10.0 * h
}
