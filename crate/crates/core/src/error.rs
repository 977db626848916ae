use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular matrix (|det| = {0:e})")]
    SingularMatrix(f64),
    #[error("degenerate spectrum (eigenvalue separation {0:e})")]
    DegenerateSpectrum(f64),
    #[error("argument is a pole of the gamma function")]
    PoleOfGamma,
    #[error("hypergeometric parameter pole: {0}")]
    ParameterPole(String),
    #[error("argument too close to the singular point x = 1")]
    NearSingularArgument,
    #[error("argument outside the asymptotic sector")]
    OutOfSector,
    #[error("non-generic parameters: {0}")]
    NonGenericParameters(String),
    #[error("large parameter too small (|1-gamma| = {0})")]
    SmallParameterRegime(f64),
    #[error("integrator step underflow at {0}")]
    StepUnderflow(String),
    #[error("path passes too close to a pole at {0}")]
    PoleProximity(String),
    #[error("resonant local exponent {0}")]
    ResonantExponent(String),
    #[error("cyclic relation violated (residual {0:e})")]
    CyclicViolation(f64),
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("singular parametrization: {0}")]
    SingularParametrization(String),
    #[error("path in t passes too close to a fixed singularity: {0}")]
    SingularTime(String),
    #[error("y is indeterminate: {0}")]
    IndeterminateY(String),
    #[error("tau log-derivative is indeterminate: {0}")]
    IndeterminateTau(String),
    #[error("sampling grid too coarse (dual-formula mismatch {0:e})")]
    GridTooCoarse(f64),
    #[error("reflection at infinity is singular: {0}")]
    ReflectionSingular(String),
    #[error("outside the canonical sector: {0}")]
    SectorViolation(String),
    #[error("anchor too close to the origin (|t|R = {0})")]
    AnchorTooClose(f64),
    #[error("Stokes matrix not unipotent (off-pattern entry {0:e})")]
    NonUnipotentResidual(f64),
    #[error("projector denominator vanishes: {0}")]
    DeltaZero(String),
    #[error("discrete step does not exist: {0}")]
    ExistenceViolation(String),
    #[error("ladder blocked at level {0}: {1}")]
    LadderBlocked(usize, String),
    #[error("unsolvable triangularization problem: {0}")]
    UnsolvablePair(String),
    #[error("ambiguous classification: {0}")]
    AmbiguousClassification(String),
    #[error("degenerate eigenbasis (s = 0)")]
    BasisDegenerate,
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("hypothesis violated: {0}")]
    ConditionViolation(String),
    #[error("denominator collapses: {0}")]
    DenominatorCollapse(String),
    #[error("theta vanishes: {0}")]
    ThetaZero(String),
    #[error("mismatch beyond tolerance: {0}")]
    MismatchBeyondTolerance(String),
}
