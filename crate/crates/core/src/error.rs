use std::path::PathBuf;

/// Errors raised by the physics layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Surface stoichiometry left (0, 1); the electrode is exhausted or full.
    #[error("solid saturation in {electrode} electrode: c_ss = {c_ss} (c_s_max = {c_s_max})")]
    Saturation {
        electrode: &'static str,
        c_ss: f64,
        c_s_max: f64,
    },

    #[error("electrolyte depletion: c_e = {0} mol/m3 at cell {1}")]
    Depletion(f64, usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no feasible root: {0}")]
    Infeasible(String),

    #[error("abnormal discharge: {0}")]
    Abnormal(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
