//! Runs the code in the guide under `book/` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/taxonomy.md")]
pub mod taxonomy {}
#[doc = include_str!("../../../book/src/cases.md")]
pub mod cases {}
#[doc = include_str!("../../../book/src/strategies.md")]
pub mod strategies {}
#[doc = include_str!("../../../book/src/retrieval.md")]
pub mod retrieval {}
#[doc = include_str!("../../../book/src/adaptation.md")]
pub mod adaptation {}
#[doc = include_str!("../../../book/src/revision.md")]
pub mod revision {}
#[doc = include_str!("../../../book/src/retention.md")]
pub mod retention {}
#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
