//! Social recommendation over typed user–item interactions, a social graph
//! and an item graph.
//!
//! Start with [`training::fit`] on a [`training::Dataset`], then score with
//! [`model::Embeddings`] or rank held-out items with
//! [`evaluation::evaluate`]. The `book/` directory has a longer guide.

pub mod data;
pub mod evaluation;
pub mod graphs;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod temporal;
pub mod training;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/temporal.md")]
    mod temporal {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
