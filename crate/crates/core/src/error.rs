use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("surface is not immersed at {count} of {total} grid points")]
    NonImmersed { count: usize, total: usize, points: Vec<(usize, usize)> },

    #[error("surface is not conformal: max residual {max:.3e} exceeds {tol:.3e}")]
    NonConformal { max: f64, tol: f64 },

    #[error("insufficient resolution: degree drifts {drift:.3} from the nearest integer")]
    InsufficientResolution { drift: f64 },

    #[error("constant mean curvature check failed: drift {drift:.3e}")]
    NotCmc { drift: f64 },

    #[error("multiplier form violates its constraints: residual {residual:.3e}")]
    InvalidEta { residual: f64 },

    #[error("gauge matrix is singular: condition number {cond:.3e}")]
    SingularGauge { cond: f64 },

    #[error("transport did not converge: error estimate {estimate:.3e} above {tol:.3e}")]
    TransportAccuracy { estimate: f64, tol: f64 },

    #[error("lambda = 1 is not a root of multiplicity {expected}: residual {residual:.3e}")]
    TrivialFactor { expected: usize, residual: f64 },

    #[error("eigenvalue continuation is ambiguous near mu = {mu_re:.4}{mu_im:+.4}i; use a smaller radius or more steps")]
    Continuation { mu_re: f64, mu_im: f64 },

    #[error("eigenvector is not a common eigenvector: defect {defect:.3e}")]
    NotCommon { defect: f64 },

    #[error("parallel section is inconsistent: residual {residual:.3e}")]
    Inconsistent { residual: f64 },

    #[error("Darboux transform masked at {fraction:.1}% of the grid")]
    MaskedMajority { fraction: f64 },

    #[error("rank of A_circ exceeds one at {count} points")]
    RankTwo { count: usize },

    #[error("harmonic map is conformal: spectral curve undefined")]
    ConformalHarmonic,

    #[error("map is not harmonic: residual {residual:.3e}")]
    NotHarmonic { residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
