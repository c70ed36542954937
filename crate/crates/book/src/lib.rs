// Each chapter of the guide becomes a module so `cargo test --doc` runs its
// code listings and a failure points at the chapter it came from.

#[doc = include_str!("../../../README.md")]
pub mod readme {}
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/vanilla.md")]
pub mod vanilla {}
#[doc = include_str!("../../../book/src/compressed.md")]
pub mod compressed {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/robot.md")]
pub mod robot {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
