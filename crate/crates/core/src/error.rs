use thiserror::Error;

use crate::geometry::Site;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty-region")]
    EmptyRegion,

    #[error("too-large-for-enumeration: {sites} sites exceeds the cap of {cap} (set PLAQ_ENUM_CAP to raise it)")]
    TooLargeForEnumeration { sites: usize, cap: usize },

    #[error("free-needs-inside-or-restricted")]
    FreeNeedsInside,

    #[error("missing boundary spin at ({}, {})", .0.x1, .0.x2)]
    MissingBoundarySpin(Site),

    #[error("site ({}, {}) lies inside the region", .0.x1, .0.x2)]
    SiteInsideRegion(Site),

    #[error("site ({}, {}) is outside the region", .0.x1, .0.x2)]
    SiteOutsideRegion(Site),

    #[error("not-in-span")]
    NotInSpan,

    #[error("not-equivalent: the set is not a sum of plaquettes")]
    NotEquivalent,

    #[error("set is not expressible through clipped plaquettes; residual sites {residual:?}")]
    NotExpressible { residual: Vec<Site> },

    #[error("screen does not cover site ({}, {})", .0.x1, .0.x2)]
    ScreenDoesNotCover(Site),

    #[error("{count} generators exceed the enumeration cap of {cap}; use a Monte Carlo estimator")]
    TooManyGenerators { count: usize, cap: usize },

    #[error("unsupported for this model: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
