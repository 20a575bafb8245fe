//! Hashing, commitments, key material, signatures, and note encryption.
//!
//! The protocol hash is a 256-bit digest reduced into the field. Call sites
//! with protocol meaning prepend a constant domain tag as the first element
//! so that commitments, serial numbers, tree nodes, and so on can never
//! collide across contexts. Key derivation (`coin_pk`, `coin_k`) stays
//! untagged: `pk_coin = hash([sk_coin])` is part of the external contract.

use alloc::vec::Vec;
use core::fmt;

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand_core::RngCore;
use sha2::{Digest, Sha256, Sha512};

use crate::field::{FieldElement, U256};
use crate::params::{Params, DEFAULT_PRIME, WORD_BYTES};

/// Domain tag: output (coin) commitments.
pub const TAG_OUTPUT_COMMITMENT: FieldElement = FieldElement::from_u64(1);
/// Domain tag: input commitments.
pub const TAG_INPUT_COMMITMENT: FieldElement = FieldElement::from_u64(2);
/// Domain tag: serial numbers.
pub const TAG_SERIAL_NUMBER: FieldElement = FieldElement::from_u64(3);
/// Domain tag: public-key authorizers.
pub const TAG_AUTHORIZER: FieldElement = FieldElement::from_u64(4);
/// Domain tag: Merkle tree nodes.
pub const TAG_TREE_NODE: FieldElement = FieldElement::from_u64(5);
/// Domain tag: transaction hashes.
pub const TAG_TX_HASH: FieldElement = FieldElement::from_u64(6);
/// Domain tag: bracket hashes.
pub const TAG_BRACKET_HASH: FieldElement = FieldElement::from_u64(7);
/// Domain tag: blob word-tree nodes.
pub const TAG_BLOB_WORD_TREE: FieldElement = FieldElement::from_u64(8);

const SIG_NONCE_DOMAIN: &[u8] = b"calyx/sig-nonce/v1";
const SIG_CHALLENGE_DOMAIN: &[u8] = b"calyx/sig-challenge/v1";
const NOTE_KDF_DOMAIN: &[u8] = b"calyx/note-kdf/v1";
const NOTE_TAG_DOMAIN: &[u8] = b"calyx/note-tag/v1";
const ADDRESS_DOMAIN: &[u8] = b"calyx/l1-address/v1";

/// Field hash: SHA-256 over the 32-byte big-endian encodings of `parts`,
/// reduced modulo P.
pub fn hash(params: &Params, parts: &[FieldElement]) -> FieldElement {
    let mut h = Sha256::new();
    for part in parts {
        h.update(part.to_be_bytes());
    }
    digest_to_fe(params, h.finalize().into())
}

/// Field hash over raw bytes with a leading domain tag; used where the
/// preimage is serialized words rather than field elements.
pub fn hash_tagged_bytes(params: &Params, tag: FieldElement, bytes: &[u8]) -> FieldElement {
    let mut h = Sha256::new();
    h.update(tag.to_be_bytes());
    h.update(bytes);
    digest_to_fe(params, h.finalize().into())
}

fn digest_to_fe(params: &Params, digest: [u8; 32]) -> FieldElement {
    FieldElement::reduce(U256::from_be_bytes(&digest), &params.prime)
}

/// Uniformly-ish random field element (32 fresh bytes reduced mod P).
pub fn random_fe(params: &Params, rng: &mut dyn RngCore) -> FieldElement {
    let mut buf = [0u8; 32];
    rng.fill_bytes(&mut buf);
    FieldElement::reduce(U256::from_be_bytes(&buf), &params.prime)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CryptoError {
    /// Honest coins in the fee token carry no value.
    FeeTokenWithValue,
    ValueOutOfRange,
    FeeOutOfRange,
    /// The signature scheme needs P >= 2^255 - 19 so verification keys embed
    /// as field elements.
    PrimeBelowGroupRange,
}

impl fmt::Display for CryptoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CryptoError::FeeTokenWithValue => "fee-token coins must have zero value",
            CryptoError::ValueOutOfRange => "coin value exceeds the range bit width",
            CryptoError::FeeOutOfRange => "coin fee exceeds the range bit width",
            CryptoError::PrimeBelowGroupRange => {
                "field modulus too small for Ristretto verification keys"
            }
        };
        f.write_str(msg)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CryptoError {}

/// Private description of a coin: token type, value, embedded fee budget,
/// and the one-time identifier p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoinSecrets {
    pub token: FieldElement,
    pub value: u64,
    pub fee: u64,
    pub p: FieldElement,
}

impl CoinSecrets {
    pub fn new(
        params: &Params,
        token: FieldElement,
        value: u64,
        fee: u64,
        p: FieldElement,
    ) -> Result<CoinSecrets, CryptoError> {
        let bound = range_bound(params.l);
        if (value as u128) >= bound {
            return Err(CryptoError::ValueOutOfRange);
        }
        if (fee as u128) >= bound {
            return Err(CryptoError::FeeOutOfRange);
        }
        if token.is_zero() && value != 0 {
            return Err(CryptoError::FeeTokenWithValue);
        }
        Ok(CoinSecrets {
            token,
            value,
            fee,
            p,
        })
    }

    pub fn value_fe(&self, params: &Params) -> FieldElement {
        params.fe(self.value)
    }

    pub fn fee_fe(&self, params: &Params) -> FieldElement {
        params.fe(self.fee)
    }
}

/// 2^l as a u128 (l <= 64).
pub fn range_bound(l: u32) -> u128 {
    1u128 << l
}

/// k = hash([p, pk_coin]), the coin identifier bound into the commitment.
pub fn coin_k(params: &Params, p: &FieldElement, pk_coin: &FieldElement) -> FieldElement {
    hash(params, &[*p, *pk_coin])
}

/// pk_coin = hash([sk_coin]).
pub fn coin_pk(params: &Params, sk_coin: &FieldElement) -> FieldElement {
    hash(params, &[*sk_coin])
}

/// Output commitment c = H(token, value, fee, k) under the output tag.
pub fn output_commitment(
    params: &Params,
    secrets: &CoinSecrets,
    pk_coin: &FieldElement,
) -> FieldElement {
    let k = coin_k(params, &secrets.p, pk_coin);
    output_commitment_with_k(params, secrets.token, secrets.value_fe(params), secrets.fee_fe(params), k)
}

/// Output commitment from already-derived components.
pub fn output_commitment_with_k(
    params: &Params,
    token: FieldElement,
    value: FieldElement,
    fee: FieldElement,
    k: FieldElement,
) -> FieldElement {
    hash(params, &[TAG_OUTPUT_COMMITMENT, token, value, fee, k])
}

/// Input commitment cm = H(token, value, fee, pk_auth) under the input tag.
pub fn input_commitment(
    params: &Params,
    token: FieldElement,
    value: FieldElement,
    fee: FieldElement,
    pk_auth: FieldElement,
) -> FieldElement {
    hash(params, &[TAG_INPUT_COMMITMENT, token, value, fee, pk_auth])
}

/// Serial number sn = H(p, sk_coin) under the serial tag.
pub fn serial_number(params: &Params, p: &FieldElement, sk_coin: &FieldElement) -> FieldElement {
    hash(params, &[TAG_SERIAL_NUMBER, *p, *sk_coin])
}

/// Authorizer pk_auth = H(sk_coin, pk_sig) under the authorizer tag.
pub fn authorizer(params: &Params, sk_coin: &FieldElement, pk_sig: &FieldElement) -> FieldElement {
    hash(params, &[TAG_AUTHORIZER, *sk_coin, *pk_sig])
}

/// Coin ownership keypair: sk random, pk = hash([sk]).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoinKeyPair {
    pub sk: FieldElement,
    pub pk: FieldElement,
}

impl CoinKeyPair {
    pub fn generate(params: &Params, rng: &mut dyn RngCore) -> CoinKeyPair {
        let sk = random_fe(params, rng);
        CoinKeyPair {
            sk,
            pk: coin_pk(params, &sk),
        }
    }
}

/// Schnorr signature over Ristretto: R (compressed point) then s (scalar),
/// one blob word each.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn words(&self) -> [[u8; WORD_BYTES]; 2] {
        let mut r = [0u8; 32];
        let mut s = [0u8; 32];
        r.copy_from_slice(&self.0[..32]);
        s.copy_from_slice(&self.0[32..]);
        [r, s]
    }

    pub fn from_words(r: [u8; WORD_BYTES], s: [u8; WORD_BYTES]) -> Signature {
        let mut buf = [0u8; 64];
        buf[..32].copy_from_slice(&r);
        buf[32..].copy_from_slice(&s);
        Signature(buf)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "…)")
    }
}

/// Signing keypair. The verification key doubles as a field element: the
/// canonical Ristretto encoding, read little-endian, is always below
/// 2^255 - 19 and therefore below any permitted modulus.
#[derive(Clone)]
pub struct SignatureKeyPair {
    sk: Scalar,
    pub pk_point: RistrettoPoint,
    pub pk: FieldElement,
}

impl SignatureKeyPair {
    pub fn generate(params: &Params, rng: &mut dyn RngCore) -> Result<SignatureKeyPair, CryptoError> {
        if params.prime < DEFAULT_PRIME {
            return Err(CryptoError::PrimeBelowGroupRange);
        }
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        let sk = Scalar::from_bytes_mod_order_wide(&wide);
        let pk_point = RistrettoPoint::mul_base(&sk);
        let pk = pk_fe_from_point(&pk_point);
        Ok(SignatureKeyPair { sk, pk_point, pk })
    }

    /// Deterministic Schnorr signature (nonce derived from sk and message).
    pub fn sign(&self, msg: &[u8]) -> Signature {
        let mut nh = Sha512::new();
        nh.update(SIG_NONCE_DOMAIN);
        nh.update(self.sk.to_bytes());
        nh.update(msg);
        let r = Scalar::from_bytes_mod_order_wide(&nh.finalize().into());
        let big_r = RistrettoPoint::mul_base(&r);
        let e = challenge(&big_r.compress().to_bytes(), &self.pk_point.compress().to_bytes(), msg);
        let s = r + e * self.sk;
        let mut buf = [0u8; 64];
        buf[..32].copy_from_slice(&big_r.compress().to_bytes());
        buf[32..].copy_from_slice(&s.to_bytes());
        Signature(buf)
    }
}

impl fmt::Debug for SignatureKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignatureKeyPair").field("pk", &self.pk).finish()
    }
}

fn challenge(big_r: &[u8; 32], pk: &[u8; 32], msg: &[u8]) -> Scalar {
    let mut ch = Sha512::new();
    ch.update(SIG_CHALLENGE_DOMAIN);
    ch.update(big_r);
    ch.update(pk);
    ch.update(msg);
    Scalar::from_bytes_mod_order_wide(&ch.finalize().into())
}

/// Maps a Ristretto point to its field-element form (little-endian value of
/// the canonical encoding).
pub fn pk_fe_from_point(point: &RistrettoPoint) -> FieldElement {
    let enc = point.compress().to_bytes();
    // Canonical encodings are < 2^255 - 19, hence in range for any valid P.
    FieldElement::from_be_bytes(&reverse32(&enc), &U256::MAX)
        .expect("canonical encodings fit 256 bits")
}

/// Recovers the compressed-point bytes from the field-element form.
pub fn pk_point_bytes(pk: &FieldElement) -> [u8; 32] {
    reverse32(&pk.to_be_bytes())
}

fn reverse32(bytes: &[u8; 32]) -> [u8; 32] {
    let mut out = *bytes;
    out.reverse();
    out
}

/// Verifies a signature against a field-element verification key; malformed
/// keys or signature bytes simply fail.
pub fn verify_signature(pk: &FieldElement, msg: &[u8], sig: &Signature) -> bool {
    let Some(pk_point) = CompressedRistretto(pk_point_bytes(pk)).decompress() else {
        return false;
    };
    let mut r_bytes = [0u8; 32];
    r_bytes.copy_from_slice(&sig.0[..32]);
    let Some(big_r) = CompressedRistretto(r_bytes).decompress() else {
        return false;
    };
    let mut s_bytes = [0u8; 32];
    s_bytes.copy_from_slice(&sig.0[32..]);
    let s: Option<Scalar> = Scalar::from_canonical_bytes(s_bytes).into();
    let Some(s) = s else {
        return false;
    };
    let e = challenge(&r_bytes, &pk_point.compress().to_bytes(), msg);
    // s·B == R + e·pk  <=>  R == s·B - e·pk
    let recovered = RistrettoPoint::vartime_double_scalar_mul_basepoint(&(-e), &pk_point, &s);
    recovered == big_r
}

/// Note-encryption keypair (ECIES over Ristretto).
#[derive(Clone)]
pub struct EncKeyPair {
    sk: Scalar,
    pub pk: [u8; 32],
}

impl EncKeyPair {
    pub fn generate(rng: &mut dyn RngCore) -> EncKeyPair {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        let sk = Scalar::from_bytes_mod_order_wide(&wide);
        EncKeyPair {
            sk,
            pk: RistrettoPoint::mul_base(&sk).compress().to_bytes(),
        }
    }

    /// Trial decryption; `None` on any authentication or format failure.
    pub fn decrypt(&self, params: &Params, ct: &NoteCiphertext) -> Option<CoinSecrets> {
        let mut epk_bytes = [0u8; 32];
        epk_bytes.copy_from_slice(&ct.0[..32]);
        let epk = CompressedRistretto(epk_bytes).decompress()?;
        let shared = epk * self.sk;
        let key = note_key(&epk_bytes, &shared.compress().to_bytes());
        let body: &[u8] = &ct.0[32..160];
        let mut tag_input = Sha256::new();
        tag_input.update(NOTE_TAG_DOMAIN);
        tag_input.update(key);
        tag_input.update(body);
        let tag: [u8; 32] = tag_input.finalize().into();
        if tag != ct.0[160..192] {
            return None;
        }
        let stream = note_stream(&key);
        let mut pt = [0u8; 128];
        for i in 0..128 {
            pt[i] = body[i] ^ stream[i];
        }
        let part = |i: usize| -> Option<FieldElement> {
            let mut buf = [0u8; 32];
            buf.copy_from_slice(&pt[32 * i..32 * (i + 1)]);
            FieldElement::from_be_bytes(&buf, &params.prime)
        };
        let token = part(0)?;
        let value = part(1)?.to_u64()?;
        let fee = part(2)?.to_u64()?;
        let p = part(3)?;
        CoinSecrets::new(params, token, value, fee, p).ok()
    }
}

impl fmt::Debug for EncKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncKeyPair").finish_non_exhaustive()
    }
}

/// Fixed-size note ciphertext: ephemeral point, masked (token, value, fee,
/// p), authentication tag — CT_LEN words.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct NoteCiphertext(pub [u8; 192]);

impl fmt::Debug for NoteCiphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("NoteCiphertext(…)")
    }
}

impl NoteCiphertext {
    pub fn words(&self) -> [[u8; WORD_BYTES]; 6] {
        let mut out = [[0u8; WORD_BYTES]; 6];
        for (i, w) in out.iter_mut().enumerate() {
            w.copy_from_slice(&self.0[32 * i..32 * (i + 1)]);
        }
        out
    }

    pub fn from_bytes(bytes: [u8; 192]) -> NoteCiphertext {
        NoteCiphertext(bytes)
    }
}

fn note_key(epk: &[u8; 32], shared: &[u8; 32]) -> [u8; 64] {
    let mut kdf = Sha512::new();
    kdf.update(NOTE_KDF_DOMAIN);
    kdf.update(epk);
    kdf.update(shared);
    kdf.finalize().into()
}

fn note_stream(key: &[u8; 64]) -> [u8; 128] {
    let mut out = [0u8; 128];
    for block in 0..2u8 {
        let mut h = Sha512::new();
        h.update(key);
        h.update([block]);
        let chunk: [u8; 64] = h.finalize().into();
        out[64 * block as usize..64 * (block as usize + 1)].copy_from_slice(&chunk);
    }
    out
}

/// Encrypts coin secrets to a recipient's note key; `None` if the recipient
/// key bytes are not a valid point.
pub fn encrypt_note(
    rng: &mut dyn RngCore,
    recipient_pk: &[u8; 32],
    secrets: &CoinSecrets,
) -> Option<NoteCiphertext> {
    let recipient = CompressedRistretto(*recipient_pk).decompress()?;
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    let eph = Scalar::from_bytes_mod_order_wide(&wide);
    let epk = RistrettoPoint::mul_base(&eph).compress().to_bytes();
    let shared = recipient * eph;
    let key = note_key(&epk, &shared.compress().to_bytes());
    let stream = note_stream(&key);

    let mut pt = [0u8; 128];
    pt[..32].copy_from_slice(&secrets.token.to_be_bytes());
    pt[32..64].copy_from_slice(&U256::from_u64(secrets.value).to_be_bytes());
    pt[64..96].copy_from_slice(&U256::from_u64(secrets.fee).to_be_bytes());
    pt[96..128].copy_from_slice(&secrets.p.to_be_bytes());
    let mut body = [0u8; 128];
    for i in 0..128 {
        body[i] = pt[i] ^ stream[i];
    }

    let mut tag_input = Sha256::new();
    tag_input.update(NOTE_TAG_DOMAIN);
    tag_input.update(key);
    tag_input.update(body);
    let tag: [u8; 32] = tag_input.finalize().into();

    let mut out = [0u8; 192];
    out[..32].copy_from_slice(&epk);
    out[32..160].copy_from_slice(&body);
    out[160..192].copy_from_slice(&tag);
    Some(NoteCiphertext(out))
}

/// 20-byte L1 account identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct L1Address(pub [u8; 20]);

impl L1Address {
    /// Deterministic address for a signature verification key.
    pub fn for_pk_sig(pk_sig: &FieldElement) -> L1Address {
        let mut h = Sha256::new();
        h.update(ADDRESS_DOMAIN);
        h.update(pk_sig.to_be_bytes());
        let digest: [u8; 32] = h.finalize().into();
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[12..]);
        L1Address(out)
    }

    /// Blob-word form: 12 zero bytes then the address.
    pub fn to_word(&self) -> [u8; WORD_BYTES] {
        let mut w = [0u8; WORD_BYTES];
        w[12..].copy_from_slice(&self.0);
        w
    }

    /// Parses the word form; the 12-byte prefix must be zero.
    pub fn from_word(word: &[u8; WORD_BYTES]) -> Option<L1Address> {
        if word[..12].iter().any(|&b| b != 0) {
            return None;
        }
        let mut out = [0u8; 20];
        out.copy_from_slice(&word[12..]);
        Some(L1Address(out))
    }
}

impl fmt::Debug for L1Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Display for L1Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Collects the word-sized chunks of a byte string (helper for hashing
/// serialized structures in tests and the blob codec).
pub fn words_of(bytes: &[u8]) -> Vec<[u8; WORD_BYTES]> {
    assert!(bytes.len() % WORD_BYTES == 0);
    bytes
        .chunks_exact(WORD_BYTES)
        .map(|c| {
            let mut w = [0u8; WORD_BYTES];
            w.copy_from_slice(c);
            w
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand_core::SeedableRng;

    fn p() -> Params {
        Params::default()
    }

    fn rng(seed: u64) -> rand_chacha::ChaCha20Rng {
        rand_chacha::ChaCha20Rng::seed_from_u64(seed)
    }

    fn fe_hex(fe: &FieldElement) -> String {
        hex::encode(fe.to_be_bytes())
    }

    // Frozen against an independent script: sha256 over 32-byte big-endian
    // parts, reduced mod 2^255 - 19.
    #[test]
    fn hash_frozen_vectors() {
        let params = p();
        let cases: [(&[u64], &str); 3] = [
            (
                &[1, 2, 3],
                "1701f34c80e1ef7f8125e5d4d2d7e19b509e25d26e462d5308b5abb95b647851",
            ),
            (
                &[0],
                "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925",
            ),
            (
                &[7],
                "48428bdb7ddd829410d6bbb924fdeb3a3d7e88c2577bffae073b990c6f061d08",
            ),
        ];
        for (parts, expect) in cases {
            let parts: Vec<FieldElement> = parts.iter().map(|&v| params.fe(v)).collect();
            assert_eq!(fe_hex(&hash(&params, &parts)), expect);
        }
        // A digest that actually exceeds P and needs the reduction.
        let big = FieldElement::reduce(
            U256::from_be_bytes(
                &hex::decode("26d56481434aca521944e6b7a4d521f98d8cdcb332fe649c53933d2d9bd048ac")
                    .unwrap()
                    .try_into()
                    .unwrap(),
            ),
            &params.prime,
        );
        let max_fe = FieldElement::reduce(
            params.prime.checked_sub(&U256::ONE).unwrap(),
            &params.prime,
        );
        assert_eq!(hash(&params, &[max_fe]), big);
        assert_eq!(
            fe_hex(&hash_tagged_bytes(&params, TAG_BLOB_WORD_TREE, b"abc")),
            "418c30f31e849efbcb92ab3780363d67d9f034fc3fe9fb3b5f986402b682ec6c"
        );
    }

    #[test]
    fn tagged_call_sites_frozen() {
        let params = p();
        let k = U256::from_u64(0x1234);
        let c = output_commitment_with_k(
            &params,
            params.fe(5),
            params.fe(100),
            params.fe(2),
            FieldElement::reduce(k, &params.prime),
        );
        assert_eq!(
            fe_hex(&c),
            "1bb4308cdab81ca5b70ebfe9fbb39e4b037d85f09ca1de05227091bd5cda01d5"
        );
        let sn = serial_number(&params, &params.fe(9), &params.fe(11));
        assert_eq!(
            fe_hex(&sn),
            "1465a973ec89b6278d59a7c564e9ed421f61d9fcbbacbbd62b2d18a716582762"
        );
    }

    #[test]
    fn hash_matches_bigint_oracle() {
        let params = p();
        let prime = BigUint::from_bytes_be(&params.prime.to_be_bytes());
        let mut r = rng(7);
        for _ in 0..50 {
            let parts: Vec<FieldElement> =
                (0..3).map(|_| random_fe(&params, &mut r)).collect();
            let mut pre = Vec::new();
            for part in &parts {
                pre.extend_from_slice(&part.to_be_bytes());
            }
            let digest = Sha256::digest(&pre);
            let expect = BigUint::from_bytes_be(&digest) % &prime;
            let got = BigUint::from_bytes_be(&hash(&params, &parts).to_be_bytes());
            assert_eq!(got, expect);
        }
    }

    proptest! {
        #[test]
        fn coin_pk_is_hash_of_sk(seed in any::<u64>()) {
            let params = p();
            let mut r = rng(seed);
            let kp = CoinKeyPair::generate(&params, &mut r);
            prop_assert_eq!(kp.pk, hash(&params, &[kp.sk]));
        }
    }

    #[test]
    fn commitments_are_argument_sensitive() {
        let params = p();
        let mut r = rng(3);
        let pk = CoinKeyPair::generate(&params, &mut r).pk;
        let secrets = CoinSecrets::new(&params, params.fe(2), 50, 7, params.fe(99)).unwrap();
        let base = output_commitment(&params, &secrets, &pk);
        for delta in [
            CoinSecrets { token: params.fe(3), ..secrets },
            CoinSecrets { value: 51, ..secrets },
            CoinSecrets { fee: 8, ..secrets },
            CoinSecrets { p: params.fe(100), ..secrets },
        ] {
            assert_ne!(output_commitment(&params, &delta, &pk), base);
        }
        assert_ne!(output_commitment(&params, &secrets, &params.fe(1)), base);
        // Domain tags keep equal-argument call sites apart.
        let args = [params.fe(2), params.fe(50), params.fe(7), params.fe(9)];
        assert_ne!(
            hash(&params, &[TAG_OUTPUT_COMMITMENT, args[0], args[1], args[2], args[3]]),
            hash(&params, &[TAG_INPUT_COMMITMENT, args[0], args[1], args[2], args[3]]),
        );
    }

    #[test]
    fn coin_secrets_validation() {
        let params = p();
        assert_eq!(
            CoinSecrets::new(&params, params.fe(0), 5, 9, params.fe(1)),
            Err(CryptoError::FeeTokenWithValue)
        );
        CoinSecrets::new(&params, params.fe(0), 0, 9, params.fe(1)).unwrap();
        let mut small = Params::default();
        small.l = 8;
        assert_eq!(
            CoinSecrets::new(&small, small.fe(1), 256, 0, small.fe(1)),
            Err(CryptoError::ValueOutOfRange)
        );
        assert_eq!(
            CoinSecrets::new(&small, small.fe(1), 255, 256, small.fe(1)),
            Err(CryptoError::FeeOutOfRange)
        );
    }

    #[test]
    fn signature_roundtrip_and_mutations() {
        let params = p();
        let mut r = rng(11);
        let kp = SignatureKeyPair::generate(&params, &mut r).unwrap();
        let msg = b"bracket hash bytes";
        let sig = kp.sign(msg);
        assert!(verify_signature(&kp.pk, msg, &sig));
        assert!(!verify_signature(&kp.pk, b"other message", &sig));
        for i in [0usize, 31, 32, 63] {
            let mut bad = sig;
            bad.0[i] ^= 1;
            assert!(!verify_signature(&kp.pk, msg, &bad));
        }
        let other = SignatureKeyPair::generate(&params, &mut r).unwrap();
        assert!(!verify_signature(&other.pk, msg, &sig));
        // Deterministic: same key, same message, same bytes.
        assert_eq!(kp.sign(msg).0, sig.0);
    }

    #[test]
    fn pk_sig_field_mapping_roundtrips() {
        let params = p();
        let mut r = rng(13);
        for _ in 0..20 {
            let kp = SignatureKeyPair::generate(&params, &mut r).unwrap();
            let enc = kp.pk_point.compress().to_bytes();
            assert_eq!(pk_point_bytes(&kp.pk), enc);
            // In-range for the default modulus.
            assert!(FieldElement::from_be_bytes(&kp.pk.to_be_bytes(), &params.prime).is_some());
        }
        let mut tiny = Params::default();
        tiny.prime = U256::from_u128((1 << 90) + 33);
        assert_eq!(
            SignatureKeyPair::generate(&tiny, &mut r).err(),
            Some(CryptoError::PrimeBelowGroupRange)
        );
    }

    #[test]
    fn note_encryption_roundtrip() {
        let params = p();
        let mut r = rng(17);
        let enc = EncKeyPair::generate(&mut r);
        let secrets = CoinSecrets::new(&params, params.fe(4), 1000, 3, random_fe(&params, &mut r)).unwrap();
        let ct = encrypt_note(&mut r, &enc.pk, &secrets).unwrap();
        assert_eq!(enc.decrypt(&params, &ct), Some(secrets));

        let wrong = EncKeyPair::generate(&mut r);
        assert_eq!(wrong.decrypt(&params, &ct), None);

        for i in [0usize, 40, 100, 170, 191] {
            let mut bad = ct;
            bad.0[i] ^= 1;
            assert_eq!(enc.decrypt(&params, &bad), None);
        }
        // Fixed width: 6 words.
        assert_eq!(ct.words().len(), CT_LEN_WORDS);
    }

    const CT_LEN_WORDS: usize = crate::params::CT_LEN;

    #[test]
    fn l1_address_derivation() {
        let params = p();
        let mut r = rng(19);
        let kp = SignatureKeyPair::generate(&params, &mut r).unwrap();
        let addr = L1Address::for_pk_sig(&kp.pk);
        assert_eq!(addr, L1Address::for_pk_sig(&kp.pk));
        let other = SignatureKeyPair::generate(&params, &mut r).unwrap();
        assert_ne!(addr, L1Address::for_pk_sig(&other.pk));
        assert_eq!(L1Address::from_word(&addr.to_word()), Some(addr));
        let mut bad = addr.to_word();
        bad[3] = 1;
        assert_eq!(L1Address::from_word(&bad), None);
    }
}
