//! The guide's chapters as doctests, so `cargo test` runs every listing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/game.md")]
pub mod game {}

#[doc = include_str!("../../../book/src/protocols.md")]
pub mod protocols {}

#[doc = include_str!("../../../book/src/selfish.md")]
pub mod selfish {}

#[doc = include_str!("../../../book/src/calculator.md")]
pub mod calculator {}

#[doc = include_str!("../../../book/src/forensics.md")]
pub mod forensics {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
