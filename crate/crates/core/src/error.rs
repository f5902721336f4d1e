use thiserror::Error;

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable x{index} exceeds dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("jet order {0} exceeds the supported maximum of 3")]
    OrderOverflow(usize),
    #[error("singular metric at {point:?}: smallest eigenvalue {eigenvalue:e}")]
    SingularMetric { point: Vec<f64>, eigenvalue: f64 },
    #[error("insufficient jet order: need {needed}, have {have}")]
    InsufficientJets { needed: usize, have: usize },
    #[error("chart `{0}` carries no almost complex structure")]
    MissingComplexStructure(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),
    #[error("identity {id} does not apply: {reason}")]
    NotApplicable { id: String, reason: String },
    #[error("zero tangent vector")]
    ZeroVector,
    #[error("chart `{0}` has no compact fundamental domain")]
    NonCompact(String),
    #[error("chart `{0}` is not a periodic torus chart")]
    NotTorus(String),
    #[error(
        "n*lambda + mu = 0: the mixed equation is degenerate; in this case the mixed scalar \
         curvature has the same sign for every metric in the conformal class"
    )]
    DegenerateMixedEquation,
    #[error("Lee form is not co-closed (residual {0:e}); supply a Gauduchon factor")]
    NonGauduchon(f64),
    #[error("right-hand side has zero-mode component {0:e}")]
    InconsistentRightHandSide(f64),
    #[error("fiber coordinates {0:?} are too close to the stereographic pole")]
    FiberPole([f64; 2]),
    #[error("invalid twistor base: {0}")]
    InvalidBase(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for GeomError {
    fn from(e: std::io::Error) -> Self {
        GeomError::Io(e.to_string())
    }
}
