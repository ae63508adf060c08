use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrError {
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("axis {axis} is not available on a {chart} chart")]
    Axis { axis: usize, chart: String },
    #[error("unsupported on this chart: {0}")]
    Unsupported(String),
    #[error("degree mismatch: {0}")]
    Degree(String),
    #[error("degenerate contact form: min |θ∧dθ| = {0:.3e}")]
    DegenerateContact(f64),
    #[error("raw (1,0)-form does not annihilate the Reeb field: residual {0:.3e}")]
    CoframeResidual(f64),
    #[error("coframe is pointwise singular (min |det| = {0:.3e})")]
    SingularCoframe(f64),
    #[error("structure equations inconsistent: Re ω₀ residual {0:.3e}")]
    Inconsistent(f64),
    #[error("unknown geometry or bad parameter: {0}")]
    Catalog(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("time step {dt:.3e} exceeds the stability guard {limit:.3e}")]
    StepGuard { dt: f64, limit: f64 },
    #[error("gauge-fixed flow needs a reference structure K")]
    MissingReference,
    #[error("flow aborted at t = {t}: {reason}")]
    FlowAborted { t: f64, reason: String },
    #[error("certificate margin {margin:.3e} below threshold {threshold:.3e}")]
    Margin { margin: f64, threshold: f64 },
    #[error("time slices are not equally spaced or too few: {0}")]
    Slices(String),
    #[error("unsolvable jet: ĴC + CĴ has norm {0:.3e}")]
    UnsolvableJet(f64),
    #[error("Ĵ is not a complex structure: |Ĵ² + I| = {0:.3e}")]
    NotComplexStructure(f64),
    #[error("Levi form not positive at sample (h = {0:.3e})")]
    LeviForm(f64),
    #[error("point not on hypersurface after projection (|γ| = {0:.3e})")]
    Projection(f64),
    #[error("sample left the tubular neighbourhood")]
    Tubular,
    #[error("transported surface degenerate")]
    Degenerate,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CrError>;
