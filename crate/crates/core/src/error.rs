use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("mismatched parameters: {0}")]
    SpecMismatch(String),
    #[error("element is not a unit")]
    NonUnit,
    #[error("matrix is not invertible over the residue ring")]
    NotInvertible,
    #[error("working level {have} is below the required level {need}")]
    LevelTooLow { have: u32, need: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumeration of {what} needs {needed} elements, budget is {budget}")]
    BudgetExceeded {
        what: String,
        needed: u128,
        budget: u128,
    },
    #[error("character is not trivial on 1 + p^(2l)")]
    NotTrivialOnDepth2l,
    #[error("character tuple is not generic")]
    NotGeneric,
    #[error("residues of the two fingerprints are not disjoint")]
    NotDisjoint,
    #[error("diagonal is not regular modulo p")]
    NotRegular,
    #[error("perturbation is not divisible by p^{0}")]
    NotSmall(u32),
    #[error("not a type: {0}")]
    NotAType(String),
    #[error("spectral parameter is singular; use the coset-sum path")]
    SingularParameter,
    #[error("leading coefficient c1 must be nonzero")]
    ZeroLeadingCoefficient,
    #[error("theta must lie in [0, 1/2)")]
    BadTheta,
    #[error("element is not in the required compact subgroup: {0}")]
    NotInSubgroup(String),
    #[error("product support violates the expected shape: {0}")]
    SupportViolation(String),
    #[error("counterexample found: {0}")]
    CounterexampleFound(String),
    #[error("power iteration did not converge after {0} steps")]
    NoConvergence(usize),
    #[error("cocharacter is central")]
    CentralMu,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown suite: {0}")]
    UnknownSuite(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
