use thiserror::Error;

/// Errors raised by domain construction and geometric queries.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("obstacles {0} and {1} overlap or touch (clearance {2:.3e})")]
    OverlappingObstacles(usize, usize, f64),
    #[error("obstacle {0} is not strictly inside the outer curve")]
    ObstacleOutsideOuter(usize),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("ray from ({0:.6}, {1:.6}) escaped the domain without a boundary hit")]
    NoHit(f64, f64),
    #[error("grazing hit on curve {curve}: incidence cosine {c_inc:.3e}")]
    GrazingHit { curve: usize, c_inc: f64 },
    #[error("tangential incidence: |d.nu| = {0:.3e}")]
    TangentialIncidence(f64),
    #[error("point ({0:.6}, {1:.6}) is outside the closed domain")]
    PointOutsideDomain(f64, f64),
    #[error("no path found between ({0:.4}, {1:.4}) and ({2:.4}, {3:.4})")]
    NoPath(f64, f64, f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("gauge element is singular at ({0:.6}, {1:.6}): |det g| = {2:.3e}")]
    SingularGauge(f64, f64, f64),
    #[error("channel count mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("vortex center ({0:.4}, {1:.4}) must lie inside an obstacle")]
    VortexCenterInDomain(f64, f64),
    #[error("point ({0:.6}, {1:.6}) is more than one cell outside the field grid")]
    OutOfGrid(f64, f64),
    #[error("invalid field parameters: {0}")]
    InvalidParameters(String),
    #[error("grid file: {0}")]
    GridFormat(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("path leaves the domain near ({0:.6}, {1:.6})")]
    PathLeavesDomain(f64, f64),
    #[error("step too large: Richardson error estimate {estimate:.3e} exceeds {tolerance:.3e}")]
    StepTooLarge { estimate: f64, tolerance: f64 },
    #[error("path is not closed (gap {0:.3e})")]
    PathNotClosed(f64),
    #[error("matrix shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid step length {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    #[error("initial direction does not point into the domain (omega.nu = {0:.3e})")]
    NotInward(f64),
    #[error("start point is not on the outer curve")]
    StartNotOnOuter,
    #[error("tangential reflection at ({0:.6}, {1:.6}): incidence cosine {2:.3e}")]
    TangentialReflection(f64, f64, f64),
    #[error("ray trapped: exceeded {legs} legs or length {length:.3}")]
    TrappedRay { legs: usize, length: f64 },
    #[error("ray hit within 1e-6 of a polygon vertex on curve {0}")]
    CornerHit(usize),
    #[error("no corridor to obstacle {0}: obstacles too tightly packed")]
    NoCorridor(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtnError {
    #[error("near-singular system: estimated condition number {0:.3e} (try perturbing k)")]
    NearSingularSystem(f64),
    #[error("grid too coarse: {0:.2} points per wavelength (need >= 8)")]
    GridTooCoarse(f64),
    #[error("DtN shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("could not construct a path to ({0:.6}, {1:.6})")]
    PathConstructionFailed(f64, f64),
    #[error("paths end at different points (gap {0:.3e})")]
    EndpointMismatch(f64),
    #[error("insufficient samples for central differences: {0}")]
    InsufficientSamples(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Billiard(#[from] BilliardError),
    #[error(transparent)]
    Field(#[from] FieldError),
}
