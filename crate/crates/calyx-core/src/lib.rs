//! Core state machinery for the Calyx shielded multi-token rollup.
//!
//! Everything in this crate is deterministic and IO-free: field arithmetic,
//! hashing and key material, the append-only Merkle trees, the circuit
//! evaluators with a pluggable proof backend, the transaction and bracket
//! model, the byte-exact blob codec, the simulated L1 contracts, the
//! fraud-proof catalog (detection and judging), and the client / operator /
//! verifier automata. Randomness always enters through a caller-supplied
//! [`rand_core::RngCore`], so full runs replay bit-identically from a seed.

#![cfg_attr(all(not(feature = "std"), not(test)), no_std)]

extern crate alloc;

pub mod blob;
pub mod circuits;
pub mod crypto;
pub mod field;
pub mod fraud;
pub mod l1sim;
pub mod merkle;
pub mod params;
pub mod replica;
pub mod roles;
pub mod txmodel;
