//! Ledger-indistinguishability game (placeholder while the module is built).
