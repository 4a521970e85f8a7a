//! The guide's chapters, included as doc comments so `cargo test` runs every
//! Rust snippet in them. One module per chapter keeps failures traceable.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/green.md")]
mod green {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/capacity.md")]
mod capacity {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/traces.md")]
mod traces {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/interlacements.md")]
mod interlacements {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/events.md")]
mod events {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/derivatives.md")]
mod derivatives {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/bounds.md")]
mod bounds {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/reproducibility.md")]
mod reproducibility {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
