//! Protocol parameters and the fixed wire-format constants.

use core::fmt;

use crate::field::{FieldElement, U256};

/// Bytes per blob word.
pub const WORD_BYTES: usize = 32;
/// Words per blob (fixed-size data blobs, zero-padded).
pub const BLOB_WORDS: usize = 4096;
/// Depth of the binary Merkle tree over blob words (2^12 = 4096 leaves).
pub const BLOB_TREE_DEPTH: usize = 12;
/// Words occupied by a proof in the blob (backend id byte + 63 tag bytes).
pub const PROOF_LEN: usize = 2;
/// Words occupied by a signature (R point, then scalar s).
pub const SIG_LEN: usize = 2;
/// Words occupied by a note ciphertext (ephemeral point, 4 masked field
/// elements, authentication tag).
pub const CT_LEN: usize = 6;

/// 2^255 - 19, the default field modulus. Canonical Ristretto encodings are
/// below this bound, so signature verification keys embed as field elements.
pub const DEFAULT_PRIME: U256 = U256([
    0xFFFF_FFFF_FFFF_FFED,
    0xFFFF_FFFF_FFFF_FFFF,
    0xFFFF_FFFF_FFFF_FFFF,
    0x7FFF_FFFF_FFFF_FFFF,
]);

/// Tunable protocol parameters shared by every module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    /// Field modulus P; callers supply a prime.
    pub prime: U256,
    /// Depth D of the coin and nullifier trees.
    pub depth: u32,
    /// Slot count M of the transaction circuit (inputs + outputs).
    pub m: usize,
    /// Bit width l of the range decompositions.
    pub l: u32,
    /// Maximum transactions per bracket.
    pub bracket_capacity: usize,
    /// Minimum operator fee for a transfer.
    pub transfer_fee_floor: u64,
    /// Minimum operator fee for a burn (the L1 payout makes burns dearer).
    pub burn_fee_floor: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            prime: DEFAULT_PRIME,
            depth: 32,
            m: 8,
            l: 64,
            bracket_capacity: 16,
            transfer_fee_floor: 1,
            burn_fee_floor: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamsError {
    PrimeEven,
    /// P must dominate every balance sum: we require P > 2^(l+8) so that
    /// M * 2^l values cannot wrap the field.
    PrimeTooSmall,
    DepthOutOfRange,
    SlotsOutOfRange,
    RangeBitsOutOfRange,
    BracketCapacityOutOfRange,
    FeeFloorInverted,
}

impl fmt::Display for ParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            ParamsError::PrimeEven => "field modulus must be odd",
            ParamsError::PrimeTooSmall => "field modulus too small for the configured range bits",
            ParamsError::DepthOutOfRange => "tree depth must be in 1..=32",
            ParamsError::SlotsOutOfRange => "circuit slot count must be in 2..=64",
            ParamsError::RangeBitsOutOfRange => "range bit width must be in 1..=64",
            ParamsError::BracketCapacityOutOfRange => "bracket capacity must be in 1..=64",
            ParamsError::FeeFloorInverted => "burn fee floor must not be below the transfer floor",
        };
        f.write_str(msg)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParamsError {}

impl Params {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !self.prime.bit(0) {
            return Err(ParamsError::PrimeEven);
        }
        if !(1..=32).contains(&self.depth) {
            return Err(ParamsError::DepthOutOfRange);
        }
        if !(2..=64).contains(&self.m) {
            return Err(ParamsError::SlotsOutOfRange);
        }
        if !(1..=64).contains(&self.l) {
            return Err(ParamsError::RangeBitsOutOfRange);
        }
        if self.prime.bits() <= self.l + 8 {
            return Err(ParamsError::PrimeTooSmall);
        }
        if !(1..=64).contains(&self.bracket_capacity) {
            return Err(ParamsError::BracketCapacityOutOfRange);
        }
        if self.burn_fee_floor < self.transfer_fee_floor {
            return Err(ParamsError::FeeFloorInverted);
        }
        Ok(())
    }

    /// Small-integer field element, reduced just in case P is tiny.
    pub fn fe(&self, v: u64) -> FieldElement {
        FieldElement::reduce(U256::from_u64(v), &self.prime)
    }

    /// Parameters with a shallow tree for tests.
    pub fn with_depth(depth: u32) -> Params {
        Params {
            depth,
            ..Params::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_validate() {
        Params::default().validate().unwrap();
        assert_eq!(Params::default().prime.bits(), 255);
    }

    #[test]
    fn bad_params_rejected() {
        let mut p = Params::default();
        p.depth = 0;
        assert_eq!(p.validate(), Err(ParamsError::DepthOutOfRange));
        let mut p = Params::default();
        p.prime = U256::from_u64(1 << 40);
        assert_eq!(p.validate(), Err(ParamsError::PrimeEven));
        let mut p = Params::default();
        p.prime = U256::from_u64((1 << 40) + 1);
        assert_eq!(p.validate(), Err(ParamsError::PrimeTooSmall));
        let mut p = Params::default();
        p.burn_fee_floor = 0;
        p.transfer_fee_floor = 1;
        assert_eq!(p.validate(), Err(ParamsError::FeeFloorInverted));
    }

    #[test]
    fn default_prime_value() {
        // 2^255 - 19, spelled out.
        let mut expect = [0xFFu8; 32];
        expect[0] = 0x7F;
        expect[31] = 0xED;
        assert_eq!(DEFAULT_PRIME.to_be_bytes(), expect);
    }
}
