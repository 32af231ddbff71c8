pub mod error;
pub mod geo;

pub use error::{Error, Result};
pub mod ingest;
pub mod network;
pub mod partition;
pub mod quality;
pub mod leiden;
pub mod metrics;
pub mod synth;
pub mod contiguity;
pub mod zoning;
pub mod pipeline;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/contiguity.md")]
    mod contiguity {}
    #[doc = include_str!("../../../book/src/zoning.md")]
    mod zoning {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
