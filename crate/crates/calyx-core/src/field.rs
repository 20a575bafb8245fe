//! 256-bit integers and prime-field elements.
//!
//! The protocol only ever adds, subtracts and compares field elements (plus
//! reduces hash digests), so this is a small fixed-width integer with a
//! binary remainder — no multiplication, no Montgomery forms.

use core::cmp::Ordering;
use core::fmt;

/// Unsigned 256-bit integer, four little-endian u64 limbs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U256(pub [u64; 4]);

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);
    pub const MAX: U256 = U256([u64::MAX; 4]);

    pub const fn from_u64(v: u64) -> U256 {
        U256([v, 0, 0, 0])
    }

    pub const fn from_u128(v: u128) -> U256 {
        U256([v as u64, (v >> 64) as u64, 0, 0])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    /// Big-endian 32-byte encoding.
    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, limb) in self.0.iter().enumerate() {
            out[32 - 8 * (i + 1)..32 - 8 * i].copy_from_slice(&limb.to_be_bytes());
        }
        out
    }

    pub fn from_be_bytes(bytes: &[u8; 32]) -> U256 {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[32 - 8 * (i + 1)..32 - 8 * i]);
            *limb = u64::from_be_bytes(buf);
        }
        U256(limbs)
    }

    /// Little-endian 32-byte decoding (used for group-element encodings).
    pub fn from_le_bytes(bytes: &[u8; 32]) -> U256 {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[8 * i..8 * (i + 1)]);
            *limb = u64::from_le_bytes(buf);
        }
        U256(limbs)
    }

    pub fn to_le_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, limb) in self.0.iter().enumerate() {
            out[8 * i..8 * (i + 1)].copy_from_slice(&limb.to_le_bytes());
        }
        out
    }

    /// Value of bit `i` (0 = least significant).
    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < 256);
        (self.0[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    /// Number of significant bits (0 for zero).
    pub fn bits(&self) -> u32 {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i as u32 + 64 - self.0[i].leading_zeros();
            }
        }
        0
    }

    pub fn overflowing_add(&self, rhs: &U256) -> (U256, bool) {
        let mut limbs = [0u64; 4];
        let mut carry = false;
        for i in 0..4 {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            limbs[i] = s2;
            carry = c1 || c2;
        }
        (U256(limbs), carry)
    }

    pub fn checked_add(&self, rhs: &U256) -> Option<U256> {
        match self.overflowing_add(rhs) {
            (v, false) => Some(v),
            _ => None,
        }
    }

    /// Wrapping subtraction; also reports whether a borrow occurred.
    pub fn overflowing_sub(&self, rhs: &U256) -> (U256, bool) {
        let mut limbs = [0u64; 4];
        let mut borrow = false;
        for i in 0..4 {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            limbs[i] = d2;
            borrow = b1 || b2;
        }
        (U256(limbs), borrow)
    }

    pub fn checked_sub(&self, rhs: &U256) -> Option<U256> {
        match self.overflowing_sub(rhs) {
            (v, false) => Some(v),
            _ => None,
        }
    }

    pub fn shl1(&self) -> U256 {
        let mut limbs = [0u64; 4];
        let mut carry = 0u64;
        for i in 0..4 {
            limbs[i] = (self.0[i] << 1) | carry;
            carry = self.0[i] >> 63;
        }
        U256(limbs)
    }

    pub fn shr1(&self) -> U256 {
        let mut limbs = [0u64; 4];
        let mut carry = 0u64;
        for i in (0..4).rev() {
            limbs[i] = (self.0[i] >> 1) | (carry << 63);
            carry = self.0[i] & 1;
        }
        U256(limbs)
    }

    /// Remainder modulo `m` by binary long division. `m` must be nonzero.
    pub fn rem(&self, m: &U256) -> U256 {
        assert!(!m.is_zero(), "remainder by zero");
        if self < m {
            return *self;
        }
        // Large moduli leave at most a few subtractions.
        if m.bits() >= 254 {
            let mut v = *self;
            while &v >= m {
                v = v.overflowing_sub(m).0;
            }
            return v;
        }
        let mut v = *self;
        let shift = v.bits() - m.bits();
        let mut d = *m;
        for _ in 0..shift {
            d = d.shl1();
        }
        for _ in 0..=shift {
            if v >= d {
                v = v.overflowing_sub(&d).0;
            }
            d = d.shr1();
        }
        v
    }

    /// Low 64 bits, if the value fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0[1] == 0 && self.0[2] == 0 && self.0[3] == 0 {
            Some(self.0[0])
        } else {
            None
        }
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        for b in self.to_be_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Element of the prime field; the invariant `value < P` is maintained by
/// every constructor that can observe the modulus.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldElement(U256);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(U256::ZERO);
    pub const ONE: FieldElement = FieldElement(U256::ONE);

    /// Wraps a small constant. Safe for protocol constants (tags, counts)
    /// because the modulus is validated to exceed 2^72.
    pub const fn from_u64(v: u64) -> FieldElement {
        FieldElement(U256::from_u64(v))
    }

    pub fn from_u128(v: u128) -> FieldElement {
        FieldElement(U256::from_u128(v))
    }

    /// Reduces an arbitrary 256-bit value into the field.
    pub fn reduce(v: U256, prime: &U256) -> FieldElement {
        FieldElement(v.rem(prime))
    }

    /// Parses a canonical 32-byte big-endian encoding; rejects values >= P.
    pub fn from_be_bytes(bytes: &[u8; 32], prime: &U256) -> Option<FieldElement> {
        let v = U256::from_be_bytes(bytes);
        if &v < prime {
            Some(FieldElement(v))
        } else {
            None
        }
    }

    /// Canonical 32-byte big-endian encoding.
    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.0.to_be_bytes()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn as_u256(&self) -> &U256 {
        &self.0
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    pub fn add_mod(&self, rhs: &FieldElement, prime: &U256) -> FieldElement {
        let (sum, carry) = self.0.overflowing_add(&rhs.0);
        let v = if carry {
            // a + b - P < P because a, b < P; the wrap and the subtraction
            // cancel modulo 2^256.
            sum.overflowing_sub(prime).0
        } else if &sum >= prime {
            sum.overflowing_sub(prime).0
        } else {
            sum
        };
        FieldElement(v)
    }

    pub fn sub_mod(&self, rhs: &FieldElement, prime: &U256) -> FieldElement {
        if self.0 >= rhs.0 {
            FieldElement(self.0.overflowing_sub(&rhs.0).0)
        } else {
            let diff = rhs.0.overflowing_sub(&self.0).0;
            FieldElement(prime.overflowing_sub(&diff).0)
        }
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}
