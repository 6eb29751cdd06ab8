use thiserror::Error;

#[derive(Debug, Error)]
pub enum RmfError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("fields live on mismatched lattices or representations")]
    LatticeMismatch,

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("dense size cap exceeded: operator dimension {dim} > cap {cap}")]
    DenseSizeCap { dim: usize, cap: usize },

    #[error("spectral-gap violation: eigenvalue {value:e} within {tol:e} of 0")]
    SpectralGap { value: f64, tol: f64 },

    #[error("singular Gram matrix: null combination with coefficient column {column}")]
    SingularGram { column: usize },

    #[error("hypothesis ii violated: Gram of positive projection near-singular (cond {cond:e})")]
    PositiveLiftIllConditioned { cond: f64 },

    #[error("resolvent quadrature did not converge: node doubling changed result by {change:e} (tol {tol:e})")]
    QuadratureNonConvergence { change: f64, tol: f64 },

    #[error("retraction Newton iteration diverged after {iterations} iterations (residual {residual:e}); try smaller couplings or a smaller input defect")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("retraction one-to-one check failed: ||projector difference|| = {norm} >= 1")]
    ProjectorDrift { norm: f64 },

    #[error("gap collapse: would-be-occupied eigenvalue {value:e} within {tol:e} of 0")]
    GapCollapse { value: f64, tol: f64 },

    #[error("not enough strictly positive eigenvalues: needed {needed}, found {found}")]
    NotEnoughPositiveLevels { needed: usize, found: usize },

    #[error("zero-norm orbital at index {0}")]
    ZeroNormOrbital(usize),

    #[error("Gram constraint violated: {0}")]
    GramConstraint(String),

    #[error("coupling regime violated: {0}")]
    RegimeViolation(String),

    #[error("SCF non-convergence: {0}")]
    ScfNonConvergence(String),

    #[error("operator not Hermitian: max asymmetry {norm:e}")]
    Hermiticity { norm: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("post-hoc check failed: {0}")]
    PostHoc(String),

    #[error("probe precondition violated: {0}")]
    ProbePrecondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
