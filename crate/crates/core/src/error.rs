use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance matrix is not positive semidefinite (s11={s11}, s12={s12}, s22={s22})")]
    NotPositiveSemidefinite { s11: f64, s12: f64, s22: f64 },

    #[error("resource limit: {requested} reals requested, cap is {cap}")]
    ResourceLimit { requested: u128, cap: u128 },

    #[error("correspondence is not total: {0}")]
    NonTotalCorrespondence(String),

    #[error("exact Gromov-Hausdorff enumeration is capped at {cap} points per space, got {ka} and {kb}")]
    TooLarge { ka: usize, kb: usize, cap: usize },

    #[error("metric space carries no time labels")]
    Unlabeled,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
