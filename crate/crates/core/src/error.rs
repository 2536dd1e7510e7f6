use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dressing leaves residual time dependence {residual:.3e} (fields are not co-rotating)")]
    NonCancellation { residual: f64 },

    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },

    #[error("state labels are ambiguous: {0}")]
    AmbiguousLabel(String),

    #[error("state tracking broke down in [{lo:.6e}, {hi:.6e}] rad/s (best overlap {overlap:.3})")]
    TrackingBreakdown { lo: f64, hi: f64, overlap: f64 },

    #[error("spectra carry different state labels")]
    LabelMismatch,

    #[error("operation requires a pure magnetic field (E = 0)")]
    NotPureMagnetic,

    #[error("operation requires a pure electric field (B = 0)")]
    NotPureElectric,

    #[error("no critical rotation rate for theta_m = {theta_m} (cos theta_m <= 0)")]
    NoCriticalRate { theta_m: f64 },

    #[error("unknown asymptotic regime '{0}'")]
    RegimeUndefined(String),

    #[error("bare spectrum is degenerate; non-degenerate perturbation theory does not apply")]
    DegenerateBareSpectrum,

    #[error("step count {steps} is below the minimum of {min}")]
    StepCountTooSmall { steps: usize, min: usize },
}
