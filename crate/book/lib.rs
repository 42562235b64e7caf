//! Every chapter of the guide is attached to a module below so that
//! `cargo test` runs its code blocks as doctests.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/tensors.md")]
pub mod tensors {}
#[doc = include_str!("src/cones.md")]
pub mod cones {}
#[doc = include_str!("src/models.md")]
pub mod models {}
#[doc = include_str!("src/pgd.md")]
pub mod pgd {}
#[doc = include_str!("src/convex.md")]
pub mod convex {}
#[doc = include_str!("src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("src/widths.md")]
pub mod widths {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
