//! Test harness and operational tooling around the core rollup crates:
//! scripted end-to-end scenarios with differential checking against a
//! plain-ledger model, a per-rule fraud-injection matrix, an
//! indistinguishability game over the published data, and a small CLI.

pub mod inject;
pub mod lind;
pub mod reference;
pub mod report;
pub mod runner;
pub mod scenario;
