use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation order m_max = {0} too small (need m_max >= 1)")]
    Truncation(usize),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("operator is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("spectrum gapless at eps = {eps:.6}: minimal gap {gap:.3e} at k = ({kx:.5}, {ky:.5})")]
    Gapless { eps: f64, gap: f64, kx: f64, ky: f64 },

    #[error("singular link variable on plaquette ({i}, {j}); refine grid or check gap")]
    SingularLink { i: usize, j: usize },

    #[error("Chern flux {flux:.4} is not within {tol} of an integer; refine the grid")]
    NonIntegerFlux { flux: f64, tol: f64 },

    #[error("Bott matrix is singular (smallest |eigenvalue| {0:.3e}); projected gap collapsed")]
    SingularBott(f64),

    #[error("resolvent near-singular at eps = {eps:.6} (distance {dist:.3e}) at k = ({kx:.5}, {ky:.5})")]
    NearSingular { eps: f64, dist: f64, kx: f64, ky: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("propagator unitarity defect {0:.3e} exceeds threshold; increase n_steps")]
    Unitarity(f64),

    #[error("sample {index} failed: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
