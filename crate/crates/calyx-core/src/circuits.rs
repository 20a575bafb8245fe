//! Constraint evaluators for the two proof statements and the pluggable
//! proof backend.
//!
//! `eval_input` shows that a spent coin exists under a checkpointed coin
//! root and that its serial number, input commitment, and authorizer are
//! derived consistently. `eval_tx` shows per-token value conservation and
//! fee balance across up to M connected slots, with range decompositions on
//! every output.
//!
//! The reference backend is an authenticated tag over the statement: it
//! yields constant-size "proofs" that verify deterministically, refuses
//! failing witnesses, and exposes an explicit trapdoor (`forge_*`) that the
//! privacy-game simulator uses. It is simulation-sound only: whoever holds
//! the backend key can forge, which is exactly the property the game needs
//! and exactly what real deployments would replace with a SNARK.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha512};

use crate::crypto::{
    authorizer, coin_k, coin_pk, input_commitment, output_commitment_with_k, serial_number,
};
use crate::field::FieldElement;
use crate::merkle::walk;
use crate::params::Params;

/// Public inputs of the input circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputStatement {
    /// Checkpointed coin-tree root the inclusion walk must reproduce.
    pub crt: FieldElement,
    pub sn: FieldElement,
    pub cm: FieldElement,
    pub pk_sig: FieldElement,
}

/// Private witness of the input circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputWitness {
    pub pk_auth: FieldElement,
    /// The original output commitment (tree leaf).
    pub c: FieldElement,
    pub dir: Vec<bool>,
    pub path: Vec<FieldElement>,
    pub token: FieldElement,
    pub value: FieldElement,
    pub fee: FieldElement,
    pub p: FieldElement,
    pub pk_coin: FieldElement,
    pub sk_coin: FieldElement,
    /// Unused witness slot carried for layout fidelity; ignored by the
    /// constraints.
    pub r: FieldElement,
}

/// All five hash assertions plus the Merkle walk.
pub fn eval_input(params: &Params, stmt: &InputStatement, wit: &InputWitness) -> bool {
    if wit.dir.len() != params.depth as usize || wit.path.len() != params.depth as usize {
        return false;
    }
    let k = coin_k(params, &wit.p, &wit.pk_coin);
    if wit.c != output_commitment_with_k(params, wit.token, wit.value, wit.fee, k) {
        return false;
    }
    if stmt.sn != serial_number(params, &wit.p, &wit.sk_coin) {
        return false;
    }
    if wit.pk_coin != coin_pk(params, &wit.sk_coin) {
        return false;
    }
    if wit.pk_auth != authorizer(params, &wit.sk_coin, &stmt.pk_sig) {
        return false;
    }
    if stmt.cm != input_commitment(params, wit.token, wit.value, wit.fee, wit.pk_auth) {
        return false;
    }
    walk(params, &wit.c, &wit.dir, &wit.path) == stmt.crt
}

/// Public inputs of the transaction circuit: the commitment of each slot and
/// how slots are wired.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxStatement {
    pub commitments: Vec<FieldElement>,
    pub is_connected: Vec<bool>,
    pub is_input: Vec<bool>,
    /// Public transaction fee paid to the operator.
    pub fee: FieldElement,
}

/// Private witness of the transaction circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxWitness {
    pub token: Vec<FieldElement>,
    pub value: Vec<FieldElement>,
    pub fee: Vec<FieldElement>,
    pub value_decomp: Vec<Vec<bool>>,
    pub fee_decomp: Vec<Vec<bool>>,
    /// Commitment randomizer per slot: pk_auth for inputs, k for outputs.
    pub cmr: Vec<FieldElement>,
}

/// Little-endian bit decomposition of width l.
pub fn decompose(value: u64, l: u32) -> Vec<bool> {
    (0..l).map(|j| value >> j & 1 == 1).collect()
}

fn recompose(params: &Params, bits: &[bool]) -> FieldElement {
    let mut acc: u64 = 0;
    for (j, bit) in bits.iter().enumerate() {
        if *bit {
            acc |= 1u64 << j;
        }
    }
    params.fe(acc)
}

/// Balance, commitment, range, and token-uniformity constraints.
pub fn eval_tx(params: &Params, stmt: &TxStatement, wit: &TxWitness) -> bool {
    let m = params.m;
    let l = params.l as usize;
    if stmt.commitments.len() != m
        || stmt.is_connected.len() != m
        || stmt.is_input.len() != m
        || wit.token.len() != m
        || wit.value.len() != m
        || wit.fee.len() != m
        || wit.cmr.len() != m
        || wit.value_decomp.len() != m
        || wit.fee_decomp.len() != m
        || wit.value_decomp.iter().any(|d| d.len() != l)
        || wit.fee_decomp.iter().any(|d| d.len() != l)
    {
        return false;
    }
    let prime = &params.prime;
    let mut bal_v = FieldElement::ZERO;
    let mut bal_g = FieldElement::ZERO;
    for i in 0..m {
        if stmt.is_connected[i] {
            let expected = if stmt.is_input[i] {
                input_commitment(params, wit.token[i], wit.value[i], wit.fee[i], wit.cmr[i])
            } else {
                output_commitment_with_k(params, wit.token[i], wit.value[i], wit.fee[i], wit.cmr[i])
            };
            if stmt.commitments[i] != expected {
                return false;
            }
            if stmt.is_input[i] {
                bal_v = bal_v.add_mod(&wit.value[i], prime);
                bal_g = bal_g.add_mod(&wit.fee[i], prime);
            } else {
                bal_v = bal_v.sub_mod(&wit.value[i], prime);
                bal_g = bal_g.sub_mod(&wit.fee[i], prime);
                if wit.value[i] != recompose(params, &wit.value_decomp[i]) {
                    return false;
                }
                if wit.fee[i] != recompose(params, &wit.fee_decomp[i]) {
                    return false;
                }
            }
        }
        // Token uniformity applies to every slot; unconnected slots carry
        // zeros and pass trivially.
        if wit.token[i].is_zero() {
            if !wit.value[i].is_zero() {
                return false;
            }
        } else if wit.token[i] != wit.token[0] {
            return false;
        }
    }
    bal_g = bal_g.sub_mod(&stmt.fee, prime);
    bal_g.is_zero() && bal_v.is_zero()
}

/// Identifies which circuit a proof speaks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircuitId {
    Input = 1,
    Tx = 2,
}

/// Canonical statement encodings (bound into proof tags).
pub fn input_statement_bytes(stmt: &InputStatement) -> Vec<u8> {
    let mut out = Vec::with_capacity(128);
    out.extend_from_slice(&stmt.crt.to_be_bytes());
    out.extend_from_slice(&stmt.sn.to_be_bytes());
    out.extend_from_slice(&stmt.cm.to_be_bytes());
    out.extend_from_slice(&stmt.pk_sig.to_be_bytes());
    out
}

pub fn tx_statement_bytes(stmt: &TxStatement) -> Vec<u8> {
    let mut out = Vec::with_capacity(34 * stmt.commitments.len() + 32);
    for c in &stmt.commitments {
        out.extend_from_slice(&c.to_be_bytes());
    }
    for flag in &stmt.is_connected {
        out.push(*flag as u8);
    }
    for flag in &stmt.is_input {
        out.push(*flag as u8);
    }
    out.extend_from_slice(&stmt.fee.to_be_bytes());
    out
}

/// Fixed-size proof: byte 0 is the backend id, the rest is opaque.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Proof(pub [u8; 64]);

impl Proof {
    pub fn backend_id(&self) -> u8 {
        self.0[0]
    }

    pub fn words(&self) -> [[u8; 32]; 2] {
        let mut a = [0u8; 32];
        let mut b = [0u8; 32];
        a.copy_from_slice(&self.0[..32]);
        b.copy_from_slice(&self.0[32..]);
        [a, b]
    }

    pub fn from_words(a: [u8; 32], b: [u8; 32]) -> Proof {
        let mut buf = [0u8; 64];
        buf[..32].copy_from_slice(&a);
        buf[32..].copy_from_slice(&b);
        Proof(buf)
    }
}

impl fmt::Debug for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Proof(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "…)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProveError {
    /// The witness fails the constraints; honest provers never see this.
    WitnessRejected,
}

impl fmt::Display for ProveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("witness rejected by the circuit")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ProveError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForgeError {
    /// Forging requires the trapdoor flag at setup; production configs
    /// never set it.
    TrapdoorDisabled,
}

impl fmt::Display for ForgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("forge requires the trapdoor")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ForgeError {}

/// Proof system interface: verify is deterministic and total; prove runs
/// the evaluator and refuses failing witnesses; forge is the simulation
/// trapdoor.
pub trait ProofBackend {
    fn prove_input(
        &self,
        params: &Params,
        stmt: &InputStatement,
        wit: &InputWitness,
    ) -> Result<Proof, ProveError>;
    fn verify_input(&self, params: &Params, stmt: &InputStatement, proof: &Proof) -> bool;
    fn prove_tx(
        &self,
        params: &Params,
        stmt: &TxStatement,
        wit: &TxWitness,
    ) -> Result<Proof, ProveError>;
    fn verify_tx(&self, params: &Params, stmt: &TxStatement, proof: &Proof) -> bool;
    fn forge_input(&self, params: &Params, stmt: &InputStatement) -> Result<Proof, ForgeError>;
    fn forge_tx(&self, params: &Params, stmt: &TxStatement) -> Result<Proof, ForgeError>;
}

const PROOF_TAG_DOMAIN: &[u8] = b"calyx/proof-tag/v1";
const REFERENCE_BACKEND_ID: u8 = 1;

/// Keyed-tag reference backend.
pub struct ReferenceBackend {
    key: [u8; 32],
    trapdoor: bool,
    forged: AtomicU64,
}

impl ReferenceBackend {
    pub fn setup(key: [u8; 32], trapdoor: bool) -> ReferenceBackend {
        ReferenceBackend {
            key,
            trapdoor,
            forged: AtomicU64::new(0),
        }
    }

    /// How many proofs were forged through this instance (audit trail).
    pub fn forged_count(&self) -> u64 {
        self.forged.load(Ordering::Relaxed)
    }

    pub fn has_trapdoor(&self) -> bool {
        self.trapdoor
    }

    fn tag(&self, circuit: CircuitId, stmt_bytes: &[u8]) -> Proof {
        let mut h = Sha512::new();
        h.update(PROOF_TAG_DOMAIN);
        h.update(self.key);
        h.update([circuit as u8]);
        h.update(stmt_bytes);
        let digest: [u8; 64] = h.finalize().into();
        let mut out = [0u8; 64];
        out[0] = REFERENCE_BACKEND_ID;
        out[1..].copy_from_slice(&digest[..63]);
        Proof(out)
    }
}

impl Clone for ReferenceBackend {
    fn clone(&self) -> Self {
        ReferenceBackend {
            key: self.key,
            trapdoor: self.trapdoor,
            forged: AtomicU64::new(self.forged.load(Ordering::Relaxed)),
        }
    }
}

impl fmt::Debug for ReferenceBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceBackend")
            .field("trapdoor", &self.trapdoor)
            .field("forged", &self.forged_count())
            .finish_non_exhaustive()
    }
}

impl ProofBackend for ReferenceBackend {
    fn prove_input(
        &self,
        params: &Params,
        stmt: &InputStatement,
        wit: &InputWitness,
    ) -> Result<Proof, ProveError> {
        if !eval_input(params, stmt, wit) {
            return Err(ProveError::WitnessRejected);
        }
        Ok(self.tag(CircuitId::Input, &input_statement_bytes(stmt)))
    }

    fn verify_input(&self, _params: &Params, stmt: &InputStatement, proof: &Proof) -> bool {
        self.tag(CircuitId::Input, &input_statement_bytes(stmt)).0 == proof.0
    }

    fn prove_tx(
        &self,
        params: &Params,
        stmt: &TxStatement,
        wit: &TxWitness,
    ) -> Result<Proof, ProveError> {
        if !eval_tx(params, stmt, wit) {
            return Err(ProveError::WitnessRejected);
        }
        Ok(self.tag(CircuitId::Tx, &tx_statement_bytes(stmt)))
    }

    fn verify_tx(&self, _params: &Params, stmt: &TxStatement, proof: &Proof) -> bool {
        self.tag(CircuitId::Tx, &tx_statement_bytes(stmt)).0 == proof.0
    }

    fn forge_input(&self, _params: &Params, stmt: &InputStatement) -> Result<Proof, ForgeError> {
        if !self.trapdoor {
            return Err(ForgeError::TrapdoorDisabled);
        }
        self.forged.fetch_add(1, Ordering::Relaxed);
        Ok(self.tag(CircuitId::Input, &input_statement_bytes(stmt)))
    }

    fn forge_tx(&self, _params: &Params, stmt: &TxStatement) -> Result<Proof, ForgeError> {
        if !self.trapdoor {
            return Err(ForgeError::TrapdoorDisabled);
        }
        self.forged.fetch_add(1, Ordering::Relaxed);
        Ok(self.tag(CircuitId::Tx, &tx_statement_bytes(stmt)))
    }
}

/// One populated circuit slot (builder/test helper).
#[derive(Clone, Copy, Debug)]
pub struct TxSlot {
    pub token: FieldElement,
    pub value: u64,
    pub fee: u64,
    /// pk_auth for inputs, k for outputs.
    pub cmr: FieldElement,
    pub is_input: bool,
}

/// Assembles a (statement, witness) pair from populated slots; remaining
/// slots are unconnected zeros.
pub fn build_tx_instance(
    params: &Params,
    slots: &[TxSlot],
    public_fee: u64,
) -> (TxStatement, TxWitness) {
    assert!(slots.len() <= params.m);
    let m = params.m;
    let mut stmt = TxStatement {
        commitments: vec![FieldElement::ZERO; m],
        is_connected: vec![false; m],
        is_input: vec![false; m],
        fee: params.fe(public_fee),
    };
    let mut wit = TxWitness {
        token: vec![FieldElement::ZERO; m],
        value: vec![FieldElement::ZERO; m],
        fee: vec![FieldElement::ZERO; m],
        value_decomp: vec![decompose(0, params.l); m],
        fee_decomp: vec![decompose(0, params.l); m],
        cmr: vec![FieldElement::ZERO; m],
    };
    for (i, slot) in slots.iter().enumerate() {
        let value = params.fe(slot.value);
        let fee = params.fe(slot.fee);
        stmt.is_connected[i] = true;
        stmt.is_input[i] = slot.is_input;
        stmt.commitments[i] = if slot.is_input {
            input_commitment(params, slot.token, value, fee, slot.cmr)
        } else {
            output_commitment_with_k(params, slot.token, value, fee, slot.cmr)
        };
        wit.token[i] = slot.token;
        wit.value[i] = value;
        wit.fee[i] = fee;
        wit.cmr[i] = slot.cmr;
        wit.value_decomp[i] = decompose(slot.value, params.l);
        wit.fee_decomp[i] = decompose(slot.fee, params.l);
    }
    (stmt, wit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{output_commitment, random_fe, CoinKeyPair, CoinSecrets};
    use crate::merkle::AppendOnlyTree;
    use rand_core::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha20Rng {
        rand_chacha::ChaCha20Rng::seed_from_u64(seed)
    }

    fn small_params() -> Params {
        Params {
            depth: 4,
            ..Params::default()
        }
    }

    struct InputFixture {
        stmt: InputStatement,
        wit: InputWitness,
    }

    fn input_fixture(params: &Params, seed: u64) -> InputFixture {
        let mut r = rng(seed);
        let keys = CoinKeyPair::generate(params, &mut r);
        let pk_sig = random_fe(params, &mut r);
        let secrets = CoinSecrets::new(params, params.fe(3), 250, 40, random_fe(params, &mut r)).unwrap();
        let c = output_commitment(params, &secrets, &keys.pk);

        let mut tree = AppendOnlyTree::new(params.depth);
        for _ in 0..5 {
            tree.append(params, &random_fe(params, &mut r)).unwrap();
        }
        let index = tree.append(params, &c).unwrap();
        tree.append(params, &random_fe(params, &mut r)).unwrap();
        let proof = tree.prove(index).unwrap();

        let pk_auth = authorizer(params, &keys.sk, &pk_sig);
        let stmt = InputStatement {
            crt: tree.root(params),
            sn: serial_number(params, &secrets.p, &keys.sk),
            cm: input_commitment(
                params,
                secrets.token,
                secrets.value_fe(params),
                secrets.fee_fe(params),
                pk_auth,
            ),
            pk_sig,
        };
        let wit = InputWitness {
            pk_auth,
            c,
            dir: proof.dir,
            path: proof.path,
            token: secrets.token,
            value: secrets.value_fe(params),
            fee: secrets.fee_fe(params),
            p: secrets.p,
            pk_coin: keys.pk,
            sk_coin: keys.sk,
            r: random_fe(params, &mut r),
        };
        InputFixture { stmt, wit }
    }

    #[test]
    fn input_circuit_accepts_honest_witness() {
        let params = small_params();
        let f = input_fixture(&params, 1);
        assert!(eval_input(&params, &f.stmt, &f.wit));
        // The unused slot really is unused.
        let mut w = f.wit.clone();
        w.r = w.r.add_mod(&FieldElement::ONE, &params.prime);
        assert!(eval_input(&params, &f.stmt, &w));
    }

    #[test]
    fn input_circuit_rejects_each_broken_assertion() {
        let params = small_params();
        let f = input_fixture(&params, 2);

        fn bump(params: &Params, x: &mut FieldElement) {
            *x = x.add_mod(&FieldElement::ONE, &params.prime);
        }

        let cases: [fn(&Params, &mut InputStatement, &mut InputWitness); 11] = [
            |p, s, _w| bump(p, &mut s.crt),
            |p, s, _w| bump(p, &mut s.sn),
            |p, s, _w| bump(p, &mut s.cm),
            |p, s, _w| bump(p, &mut s.pk_sig),
            |p, _s, w| bump(p, &mut w.c),
            |p, _s, w| bump(p, &mut w.pk_auth),
            |p, _s, w| bump(p, &mut w.pk_coin),
            |p, _s, w| bump(p, &mut w.sk_coin),
            |p, _s, w| bump(p, &mut w.value),
            |p, _s, w| bump(p, &mut w.p),
            |p, _s, w| bump(p, &mut w.path[0]),
        ];
        for mutate in cases {
            let mut stmt = f.stmt;
            let mut wit = f.wit.clone();
            mutate(&params, &mut stmt, &mut wit);
            assert!(!eval_input(&params, &stmt, &wit));
        }

        let mut wit = f.wit.clone();
        wit.dir[1] = !wit.dir[1];
        assert!(!eval_input(&params, &f.stmt, &wit));

        let mut wit = f.wit.clone();
        wit.path.pop();
        wit.dir.pop();
        assert!(!eval_input(&params, &f.stmt, &wit));
    }

    #[test]
    fn tx_circuit_balanced_transfer_accepts() {
        let params = Params::default();
        let mut r = rng(5);
        let t = params.fe(9);
        let slots = [
            TxSlot { token: t, value: 70, fee: 10, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: t, value: 30, fee: 6, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: t, value: 60, fee: 8, cmr: random_fe(&params, &mut r), is_input: false },
            TxSlot { token: t, value: 40, fee: 5, cmr: random_fe(&params, &mut r), is_input: false },
        ];
        let (stmt, wit) = build_tx_instance(&params, &slots, 3);
        assert!(eval_tx(&params, &stmt, &wit));

        // Value imbalance.
        let mut bad = slots;
        bad[3].value = 41;
        let (s, w) = build_tx_instance(&params, &bad, 3);
        assert!(!eval_tx(&params, &s, &w));

        // Fee imbalance.
        let (s, w) = build_tx_instance(&params, &slots, 4);
        assert!(!eval_tx(&params, &s, &w));

        // Commitment mismatch.
        let mut s2 = stmt.clone();
        s2.commitments[0] = s2.commitments[0].add_mod(&FieldElement::ONE, &params.prime);
        assert!(!eval_tx(&params, &s2, &wit));

        // Wrong slot polarity (input claimed as output).
        let mut s3 = stmt.clone();
        s3.is_input[1] = false;
        assert!(!eval_tx(&params, &s3, &wit));
    }

    #[test]
    fn tx_circuit_token_rules() {
        let params = Params::default();
        let mut r = rng(6);
        let t = params.fe(2);
        // Fee-token slots (token 0) may carry fee but never value.
        let ok = [
            TxSlot { token: t, value: 10, fee: 0, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: FieldElement::ZERO, value: 0, fee: 9, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: t, value: 10, fee: 7, cmr: random_fe(&params, &mut r), is_input: false },
        ];
        let (s, w) = build_tx_instance(&params, &ok, 2);
        assert!(eval_tx(&params, &s, &w));

        let (s, mut w) = build_tx_instance(&params, &ok, 2);
        w.value[1] = params.fe(1);
        // Rebalance so only the token rule trips.
        w.value[0] = params.fe(9);
        assert!(!eval_tx(&params, &s, &w));

        // A second non-zero token that differs from slot 0.
        let mixed = [
            TxSlot { token: t, value: 10, fee: 5, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: params.fe(3), value: 0, fee: 0, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: t, value: 10, fee: 5, cmr: random_fe(&params, &mut r), is_input: false },
        ];
        let (s, w) = build_tx_instance(&params, &mixed, 0);
        assert!(!eval_tx(&params, &s, &w));

        // Empty instance (all slots unconnected) balances trivially.
        let (s, w) = build_tx_instance(&params, &[], 0);
        assert!(eval_tx(&params, &s, &w));
        let (s, w) = build_tx_instance(&params, &[], 1);
        assert!(!eval_tx(&params, &s, &w));
    }

    #[test]
    fn tx_circuit_range_checks_bind_outputs() {
        let params = Params::default();
        let mut r = rng(7);
        let t = params.fe(4);
        let slots = [
            TxSlot { token: t, value: 100, fee: 0, cmr: random_fe(&params, &mut r), is_input: true },
            TxSlot { token: t, value: 100, fee: 0, cmr: random_fe(&params, &mut r), is_input: false },
        ];
        let (stmt, wit) = build_tx_instance(&params, &slots, 0);
        assert!(eval_tx(&params, &stmt, &wit));

        // Flip a decomposition bit: recomposition no longer matches.
        let mut w = wit.clone();
        w.value_decomp[1][3] = !w.value_decomp[1][3];
        assert!(!eval_tx(&params, &stmt, &w));
        let mut w = wit.clone();
        w.fee_decomp[1][0] = !w.fee_decomp[1][0];
        assert!(!eval_tx(&params, &stmt, &w));

        // An output value of P-1 (i.e. "-1") cannot be decomposed in l bits,
        // so negative outputs cannot fake balance.
        let minus_one = FieldElement::ZERO.sub_mod(&FieldElement::ONE, &params.prime);
        let cmr = random_fe(&params, &mut r);
        let neg_out = output_commitment_with_k(&params, t, minus_one, FieldElement::ZERO, cmr);
        let mut s = stmt.clone();
        let mut w = wit.clone();
        s.commitments[1] = neg_out;
        w.value[1] = minus_one;
        w.value[0] = minus_one;
        s.commitments[0] = input_commitment(&params, t, minus_one, FieldElement::ZERO, wit.cmr[0]);
        assert!(!eval_tx(&params, &s, &w));
    }

    #[test]
    fn reference_backend_prove_verify_forge() {
        let params = small_params();
        let f = input_fixture(&params, 11);
        let backend = ReferenceBackend::setup([7u8; 32], false);

        let proof = backend.prove_input(&params, &f.stmt, &f.wit).unwrap();
        assert!(backend.verify_input(&params, &f.stmt, &proof));
        assert_eq!(proof.backend_id(), 1);

        // Determinism.
        assert_eq!(backend.prove_input(&params, &f.stmt, &f.wit).unwrap().0, proof.0);

        // Any byte flip breaks verification, including the id byte.
        for i in [0usize, 1, 20, 63] {
            let mut bad = proof;
            bad.0[i] ^= 1;
            assert!(!backend.verify_input(&params, &f.stmt, &bad));
        }

        // Wrong statement fails.
        let mut other = f.stmt;
        other.sn = other.sn.add_mod(&FieldElement::ONE, &params.prime);
        assert!(!backend.verify_input(&params, &other, &proof));

        // Failing witness is a typed error.
        let mut bad_wit = f.wit.clone();
        bad_wit.sk_coin = bad_wit.sk_coin.add_mod(&FieldElement::ONE, &params.prime);
        assert_eq!(
            backend.prove_input(&params, &f.stmt, &bad_wit),
            Err(ProveError::WitnessRejected)
        );

        // Forge is gated on the trapdoor.
        assert_eq!(backend.forge_input(&params, &other), Err(ForgeError::TrapdoorDisabled));
        assert_eq!(backend.forged_count(), 0);

        let sim = ReferenceBackend::setup([7u8; 32], true);
        let forged = sim.forge_input(&params, &other).unwrap();
        assert!(sim.verify_input(&params, &other, &forged));
        assert!(backend.verify_input(&params, &other, &forged));
        assert_eq!(sim.forged_count(), 1);
        // Forged proofs are byte-identical to honest ones: flagging lives in
        // the audit counter and harness logs, not the bytes.
        let honest = backend.prove_input(&params, &f.stmt, &f.wit).unwrap();
        let forged_same = sim.forge_input(&params, &f.stmt).unwrap();
        assert_eq!(honest.0, forged_same.0);

        // A different backend key rejects.
        let stranger = ReferenceBackend::setup([8u8; 32], false);
        assert!(!stranger.verify_input(&params, &f.stmt, &proof));

        // Tx circuit path.
        let (stmt, wit) = build_tx_instance(
            &params,
            &[TxSlot {
                token: params.fe(1),
                value: 4,
                fee: 2,
                cmr: params.fe(77),
                is_input: true,
            },
            TxSlot {
                token: params.fe(1),
                value: 4,
                fee: 1,
                cmr: params.fe(78),
                is_input: false,
            }],
            1,
        );
        let txp = backend.prove_tx(&params, &stmt, &wit).unwrap();
        assert!(backend.verify_tx(&params, &stmt, &txp));
        assert_ne!(txp.0, proof.0);
        let mut unbalanced = stmt.clone();
        unbalanced.fee = params.fe(2);
        assert_eq!(
            backend.prove_tx(&params, &unbalanced, &wit),
            Err(ProveError::WitnessRejected)
        );
    }
}
