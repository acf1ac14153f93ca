//! Co-word and cited-source analysis of bibliographic document sets.
//!
//! The crate covers three views of a document × variable matrix:
//!
//! * relational: co-occurrence networks of title words or cited sources
//!   ([`network::cooccurrence`]);
//! * positional: cosine-normalized networks, thresholded and partitioned
//!   with Louvain ([`network::cosine_matrix`], [`network::louvain`]);
//! * latent: the three main Varimax-rotated principal components and the
//!   mutual redundancy among them, in millibits ([`factor`], [`info`]).
//!
//! Input is a tagged bibliographic export ([`wos::parse_export`]); every
//! stage can also be run from the `coword` command line through
//! [`pipeline`].

pub mod factor;
pub mod info;
pub mod lexical;
pub mod linalg;
pub mod network;
pub mod pipeline;
pub mod synthetic;
pub mod wos;

pub use factor::FactorSolution;
pub use info::{DiscreteCases, RedundancyReport};
pub use lexical::TermDocumentMatrix;
pub use network::WeightedNetwork;
pub use pipeline::{run_pipeline, PipelineConfig, RunManifest};
pub use wos::DocumentRecord;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/factors.md")]
    mod factors {}
    #[doc = include_str!("../../../book/src/redundancy.md")]
    mod redundancy {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
