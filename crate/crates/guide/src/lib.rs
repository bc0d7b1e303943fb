//! The guide chapters, compiled as doctests so the book cannot drift from
//! the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/mesh.md")]
pub mod mesh {}

#[doc = include_str!("../../../book/src/elements.md")]
pub mod elements {}

#[doc = include_str!("../../../book/src/space.md")]
pub mod space {}

#[doc = include_str!("../../../book/src/assembly.md")]
pub mod assembly {}

#[doc = include_str!("../../../book/src/infsup.md")]
pub mod infsup {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
