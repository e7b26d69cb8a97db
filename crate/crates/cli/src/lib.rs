//! File formats and scenario plumbing behind the `doa` binary: TOML
//! scenario files and the binary snapshot container.

pub mod scenario;
pub mod snapshots;
