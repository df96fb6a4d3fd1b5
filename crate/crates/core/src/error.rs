use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite density")]
    NonFiniteDensity,
    #[error("non-finite argument {0}")]
    NonFiniteArgument(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eta derivative bound: sup|eta'| = {sup} exceeds {bound}")]
    EtaDerivativeBound { sup: f64, bound: f64 },
    #[error("argument {0} outside representable fold depth")]
    FoldDepth(f64),
    #[error("argument {0} outside tabulated range")]
    OutOfTable(f64),
    #[error("construction failed: binding constraint {0}")]
    ConstructionFailed(String),
    #[error("constraint not attainable on grid")]
    ConstraintNotAttainable,
    #[error("no mountain pass geometry detected")]
    NoMountainPassGeometry,
    #[error("stagnated: {0}")]
    Stagnated(String),
    #[error("Pohozaev mode requires autonomous problem")]
    PohozaevMode,
    #[error("ray equation has no root in [1e-6, 1e6]")]
    NoRayRoot,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("singular discrete operator at row {0}")]
    SingularOperator(usize),
    #[error("bump leaves box at k = {k}, profile {n}")]
    BumpLeavesBox { k: usize, n: usize },
    #[error("unbounded input energy")]
    UnboundedEnergy,
    #[error("critical family required")]
    CriticalFamilyRequired,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
