//! The guide's chapters, one module each, so `cargo test --doc` runs every
//! listing in `book/src`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/space.md")]
pub mod space {}
#[doc = include_str!("../../../book/src/semidiscrete.md")]
pub mod semidiscrete {}
#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}
#[doc = include_str!("../../../book/src/jacobi.md")]
pub mod jacobi {}
#[doc = include_str!("../../../book/src/stepping.md")]
pub mod stepping {}
#[doc = include_str!("../../../book/src/mittag_leffler.md")]
pub mod mittag_leffler {}
#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}
