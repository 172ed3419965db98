pub mod correlators;
pub mod cycles;
pub mod error;
pub mod f2;
pub mod geometry;
pub mod gibbs;
pub mod lengths;
pub mod magnetization;
pub mod mcmc;
pub mod numeric;
pub mod renorm;
pub mod shadows;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{FamilyMode, Model, Region, Site};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/multispin.md")]
    mod multispin {}
    #[doc = include_str!("../../../book/src/renormalization.md")]
    mod renormalization {}
    #[doc = include_str!("../../../book/src/cycles.md")]
    mod cycles {}
    #[doc = include_str!("../../../book/src/magnetization.md")]
    mod magnetization {}
    #[doc = include_str!("../../../book/src/lengths.md")]
    mod lengths {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
