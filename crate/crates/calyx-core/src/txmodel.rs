//! Transaction kinds, brackets, builders, and hashing.
//!
//! A transaction is a pure value: inputs reference checkpointed coin roots
//! through [`CrtRef`] locators, outputs carry commitments plus optional note
//! ciphertexts, and the kind-specific body holds whatever the protocol
//! reveals in clear (mint nonce/value/k, burn redemption data, fee-collect
//! k). Brackets group transactions into an all-or-nothing unit signed once
//! per input over the bracket hash.
//!
//! The word-level serialization lives in [`crate::blob`]; hashing here is
//! defined over those exact words so a hash survives serialize→parse→
//! serialize unchanged.

use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::blob;
use crate::circuits::{
    build_tx_instance, InputStatement, InputWitness, Proof, ProofBackend, ProveError, TxSlot,
    TxStatement,
};
use crate::crypto::{
    self, CoinSecrets, CryptoError, L1Address, NoteCiphertext, Signature, SignatureKeyPair,
    authorizer, coin_k, hash, input_commitment, output_commitment_with_k, serial_number,
    verify_signature, TAG_BRACKET_HASH,
};
use crate::field::FieldElement;
use crate::merkle::InclusionProof;
use crate::params::Params;

/// Transaction kind codes as serialized in the kind word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Mint = 1,
    Transfer = 2,
    Burn = 3,
    FeeCollect = 4,
}

impl Kind {
    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn from_code(code: u64) -> Option<Kind> {
        match code {
            1 => Some(Kind::Mint),
            2 => Some(Kind::Transfer),
            3 => Some(Kind::Burn),
            4 => Some(Kind::FeeCollect),
            _ => None,
        }
    }
}

/// Locator of the checkpointed coin-tree root an input proof was built
/// against: the post-execution root of `bracket` in the batch at `height`.
/// `CrtRef::GENESIS` (height 0, bracket −1) names the empty-tree root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrtRef {
    pub height: u64,
    pub bracket: i64,
}

impl CrtRef {
    pub const GENESIS: CrtRef = CrtRef {
        height: 0,
        bracket: -1,
    };

    pub fn to_word(&self) -> [u8; 32] {
        let mut word = [0u8; 32];
        word[..16].copy_from_slice(&(self.height as u128).to_be_bytes());
        word[16..].copy_from_slice(&(self.bracket as i128).to_be_bytes());
        word
    }

    pub fn from_word(word: &[u8; 32]) -> Option<CrtRef> {
        let mut hi = [0u8; 16];
        let mut lo = [0u8; 16];
        hi.copy_from_slice(&word[..16]);
        lo.copy_from_slice(&word[16..]);
        let height = u128::from_be_bytes(hi);
        let bracket = i128::from_be_bytes(lo);
        if height > u64::MAX as u128 || bracket < -1 || bracket > u32::MAX as i128 {
            return None;
        }
        if bracket == -1 && height != 0 {
            return None;
        }
        Some(CrtRef {
            height: height as u64,
            bracket: bracket as i64,
        })
    }
}

/// One shielded input: public statement values plus the membership proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxInput {
    pub crt: FieldElement,
    pub crt_ref: CrtRef,
    pub sn: FieldElement,
    pub cm: FieldElement,
    pub pk_sig: FieldElement,
    pub proof: Proof,
}

/// One output: commitment plus the optional encrypted note for the
/// recipient. `enc_data` is absent when sender and recipient share the
/// secrets out of band (self-change, mints, fee collection).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxOutput {
    pub c: FieldElement,
    pub enc_data: Option<NoteCiphertext>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MintBody {
    /// Bridge deposit nonce this mint redeems.
    pub nonce: u64,
    pub value: u64,
    pub k: FieldElement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BurnBody {
    pub value: u64,
    /// The fee embedded in the burned coin; the tx fee is deducted from it
    /// and the remainder is paid out as native funds on retrieval.
    pub coin_fee: u64,
    pub pk_auth: FieldElement,
    pub beneficiary: L1Address,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeeCollectBody {
    pub k: FieldElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TxBody {
    Mint(MintBody),
    Transfer,
    Burn(BurnBody),
    FeeCollect(FeeCollectBody),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    /// Revealed token type for mint/burn; zero for shielded kinds.
    pub token: FieldElement,
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    /// Public fee paid to the operator (collected through ck_f).
    pub fee: u64,
    /// Balance proof; present exactly for transfers.
    pub tx_proof: Option<Proof>,
    pub body: TxBody,
}

impl Transaction {
    pub fn kind(&self) -> Kind {
        match self.body {
            TxBody::Mint(_) => Kind::Mint,
            TxBody::Transfer => Kind::Transfer,
            TxBody::Burn(_) => Kind::Burn,
            TxBody::FeeCollect(_) => Kind::FeeCollect,
        }
    }

    /// Entries this transaction appends to the nullifier tree, in order:
    /// input serial numbers, and the nonce for mints (consumed bridge
    /// nonces are nullifiers too).
    pub fn nullifier_entries(&self, params: &Params) -> Vec<FieldElement> {
        let mut out: Vec<FieldElement> = self.inputs.iter().map(|i| i.sn).collect();
        if let TxBody::Mint(m) = &self.body {
            out.push(params.fe(m.nonce));
        }
        out
    }

    /// Commitments this transaction appends to the coin tree, in order.
    pub fn output_commitments(&self) -> Vec<FieldElement> {
        self.outputs.iter().map(|o| o.c).collect()
    }
}

/// The slot-level statement a transfer proof speaks about, reconstructed
/// from public transaction data: inputs first (their cm), then outputs
/// (their c), remaining slots unconnected.
pub fn transfer_statement(params: &Params, tx: &Transaction) -> Option<TxStatement> {
    let n_in = tx.inputs.len();
    let n_out = tx.outputs.len();
    if n_in + n_out > params.m {
        return None;
    }
    let mut commitments = alloc::vec![FieldElement::ZERO; params.m];
    let mut is_connected = alloc::vec![false; params.m];
    let mut is_input = alloc::vec![false; params.m];
    for (i, input) in tx.inputs.iter().enumerate() {
        commitments[i] = input.cm;
        is_connected[i] = true;
        is_input[i] = true;
    }
    for (j, output) in tx.outputs.iter().enumerate() {
        commitments[n_in + j] = output.c;
        is_connected[n_in + j] = true;
    }
    Some(TxStatement {
        commitments,
        is_connected,
        is_input,
        fee: params.fe(tx.fee),
    })
}

/// Transaction hash over the serialized words (everything after the hash
/// word itself), under the tx-hash tag.
pub fn tx_hash(params: &Params, tx: &Transaction) -> FieldElement {
    let words = blob::tx_words(params, tx);
    blob::tx_hash_of_words(params, &words)
}

/// Bracket hash over the member transaction hashes, in order.
pub fn bracket_hash_of(params: &Params, tx_hashes: &[FieldElement]) -> FieldElement {
    let mut parts = Vec::with_capacity(tx_hashes.len() + 1);
    parts.push(TAG_BRACKET_HASH);
    parts.extend_from_slice(tx_hashes);
    hash(params, &parts)
}

/// An all-or-nothing group of transactions. `post_crt`/`post_nrt` are the
/// tree roots after executing the bracket; the operator fills them when the
/// bracket is placed in a batch (zero until then).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionBracket {
    pub txs: Vec<Transaction>,
    pub bracket_hash: FieldElement,
    pub signatures: Vec<Signature>,
    pub post_crt: FieldElement,
    pub post_nrt: FieldElement,
}

impl TransactionBracket {
    /// Total input count across member transactions (= required signature
    /// count).
    pub fn input_count(&self) -> usize {
        self.txs.iter().map(|t| t.inputs.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BuildError {
    /// Per-token value conservation or fee conservation does not hold.
    Unbalanced,
    /// More than M slots across inputs and outputs.
    TooManySlots,
    /// Two different non-fee tokens in one transfer.
    MixedTokens,
    /// Transaction fee below the configured floor.
    FeeBelowFloor,
    /// Burn tx fee exceeds the coin's embedded fee.
    FeeExceedsCoinFee,
    EmptyBracket,
    BracketOverCapacity,
    /// Signature count or key order does not match the inputs.
    SignatureMismatch,
    Prove(ProveError),
    Crypto(CryptoError),
    /// Note encryption failed (invalid recipient key).
    BadRecipientKey,
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Unbalanced => f.write_str("inputs and outputs do not balance"),
            BuildError::TooManySlots => f.write_str("more than M input/output slots"),
            BuildError::MixedTokens => f.write_str("mixed token types in one transfer"),
            BuildError::FeeBelowFloor => f.write_str("fee below configured floor"),
            BuildError::FeeExceedsCoinFee => f.write_str("burn fee exceeds the coin fee"),
            BuildError::EmptyBracket => f.write_str("bracket must contain a transaction"),
            BuildError::BracketOverCapacity => f.write_str("bracket over capacity"),
            BuildError::SignatureMismatch => f.write_str("signature set does not match inputs"),
            BuildError::Prove(e) => write!(f, "proving failed: {e}"),
            BuildError::Crypto(e) => write!(f, "crypto error: {e}"),
            BuildError::BadRecipientKey => f.write_str("recipient encryption key invalid"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BuildError {}

impl From<ProveError> for BuildError {
    fn from(e: ProveError) -> BuildError {
        BuildError::Prove(e)
    }
}

impl From<CryptoError> for BuildError {
    fn from(e: CryptoError) -> BuildError {
        BuildError::Crypto(e)
    }
}

/// Everything needed to spend one coin: its secrets, the coin key, a fresh
/// signature keypair, and a membership proof under the referenced root.
#[derive(Clone, Debug)]
pub struct Spend {
    pub secrets: CoinSecrets,
    pub sk_coin: FieldElement,
    pub pk_coin: FieldElement,
    pub sig_keys: SignatureKeyPair,
    pub inclusion: InclusionProof,
    pub crt: FieldElement,
    pub crt_ref: CrtRef,
}

impl Spend {
    fn input_statement(&self, params: &Params) -> (InputStatement, InputWitness) {
        let pk_auth = authorizer(params, &self.sk_coin, &self.sig_keys.pk);
        let k = coin_k(params, &self.secrets.p, &self.pk_coin);
        let c = output_commitment_with_k(
            params,
            self.secrets.token,
            self.secrets.value_fe(params),
            self.secrets.fee_fe(params),
            k,
        );
        let stmt = InputStatement {
            crt: self.crt,
            sn: serial_number(params, &self.secrets.p, &self.sk_coin),
            cm: input_commitment(
                params,
                self.secrets.token,
                self.secrets.value_fe(params),
                self.secrets.fee_fe(params),
                pk_auth,
            ),
            pk_sig: self.sig_keys.pk,
        };
        let wit = InputWitness {
            pk_auth,
            c,
            dir: self.inclusion.dir.clone(),
            path: self.inclusion.path.clone(),
            token: self.secrets.token,
            value: self.secrets.value_fe(params),
            fee: self.secrets.fee_fe(params),
            p: self.secrets.p,
            pk_coin: self.pk_coin,
            sk_coin: self.sk_coin,
            r: FieldElement::ZERO,
        };
        (stmt, wit)
    }
}

/// Where a transfer output goes: to a counterparty (note ciphertext under
/// their encryption key) or back to the sender (secrets kept locally).
#[derive(Clone, Debug)]
pub enum OutSpec {
    Shielded {
        recipient_pk_coin: FieldElement,
        recipient_pk_enc: [u8; 32],
        secrets: CoinSecrets,
    },
    Plain {
        pk_coin: FieldElement,
        secrets: CoinSecrets,
    },
}

impl OutSpec {
    pub fn secrets(&self) -> &CoinSecrets {
        match self {
            OutSpec::Shielded { secrets, .. } | OutSpec::Plain { secrets, .. } => secrets,
        }
    }

    fn pk_coin(&self) -> FieldElement {
        match self {
            OutSpec::Shielded {
                recipient_pk_coin, ..
            } => *recipient_pk_coin,
            OutSpec::Plain { pk_coin, .. } => *pk_coin,
        }
    }
}

/// Mint transaction from a bridge deposit: the coin's (token, value, fee)
/// must equal the deposit record, k compresses the recipient identity.
pub fn build_mint(params: &Params, secrets: &CoinSecrets, pk_coin: &FieldElement, nonce: u64) -> Transaction {
    let k = coin_k(params, &secrets.p, pk_coin);
    let c = output_commitment_with_k(
        params,
        secrets.token,
        secrets.value_fe(params),
        secrets.fee_fe(params),
        k,
    );
    Transaction {
        token: secrets.token,
        inputs: Vec::new(),
        outputs: alloc::vec![TxOutput { c, enc_data: None }],
        fee: 0,
        tx_proof: None,
        body: TxBody::Mint(MintBody {
            nonce,
            value: secrets.value,
            k,
        }),
    }
}

/// Shielded transfer: proves each input, balances values and fees across
/// slots, and encrypts notes for counterparty outputs.
pub fn build_transfer(
    params: &Params,
    backend: &dyn ProofBackend,
    spends: &[Spend],
    outs: &[OutSpec],
    fee: u64,
    rng: &mut dyn RngCore,
) -> Result<Transaction, BuildError> {
    if spends.len() + outs.len() > params.m {
        return Err(BuildError::TooManySlots);
    }
    if fee < params.transfer_fee_floor {
        return Err(BuildError::FeeBelowFloor);
    }

    // Per-token conservation in plain integers (the circuit will enforce it
    // again in the field).
    let mut token = FieldElement::ZERO;
    for s in spends.iter().map(|s| &s.secrets).chain(outs.iter().map(|o| o.secrets())) {
        if s.token.is_zero() {
            continue;
        }
        if token.is_zero() {
            token = s.token;
        } else if token != s.token {
            return Err(BuildError::MixedTokens);
        }
    }
    let in_value: u128 = spends.iter().map(|s| s.secrets.value as u128).sum();
    let out_value: u128 = outs.iter().map(|o| o.secrets().value as u128).sum();
    let in_fee: u128 = spends.iter().map(|s| s.secrets.fee as u128).sum();
    let out_fee: u128 = outs.iter().map(|o| o.secrets().fee as u128).sum();
    if in_value != out_value || in_fee != out_fee + fee as u128 {
        return Err(BuildError::Unbalanced);
    }

    let mut inputs = Vec::with_capacity(spends.len());
    let mut slots = Vec::with_capacity(spends.len() + outs.len());
    for spend in spends {
        let (stmt, wit) = spend.input_statement(params);
        let proof = backend.prove_input(params, &stmt, &wit)?;
        inputs.push(TxInput {
            crt: spend.crt,
            crt_ref: spend.crt_ref,
            sn: stmt.sn,
            cm: stmt.cm,
            pk_sig: spend.sig_keys.pk,
            proof,
        });
        slots.push(TxSlot {
            token: spend.secrets.token,
            value: spend.secrets.value,
            fee: spend.secrets.fee,
            cmr: wit.pk_auth,
            is_input: true,
        });
    }

    let mut outputs = Vec::with_capacity(outs.len());
    for out in outs {
        let secrets = out.secrets();
        let k = coin_k(params, &secrets.p, &out.pk_coin());
        let c = output_commitment_with_k(
            params,
            secrets.token,
            secrets.value_fe(params),
            secrets.fee_fe(params),
            k,
        );
        let enc_data = match out {
            OutSpec::Shielded {
                recipient_pk_enc, ..
            } => Some(
                crypto::encrypt_note(rng, recipient_pk_enc, secrets)
                    .ok_or(BuildError::BadRecipientKey)?,
            ),
            OutSpec::Plain { .. } => None,
        };
        outputs.push(TxOutput { c, enc_data });
        slots.push(TxSlot {
            token: secrets.token,
            value: secrets.value,
            fee: secrets.fee,
            cmr: k,
            is_input: false,
        });
    }

    let (stmt, wit) = build_tx_instance(params, &slots, fee);
    let tx_proof = backend.prove_tx(params, &stmt, &wit)?;

    Ok(Transaction {
        token: FieldElement::ZERO,
        inputs,
        outputs,
        fee,
        tx_proof: Some(tx_proof),
        body: TxBody::Transfer,
    })
}

/// Burn: spends one coin, reveals its contents, and names the L1 address
/// entitled to retrieve (token, value) plus the coin fee minus the tx fee.
pub fn build_burn(
    params: &Params,
    backend: &dyn ProofBackend,
    spend: &Spend,
    beneficiary: L1Address,
    fee: u64,
) -> Result<Transaction, BuildError> {
    if fee < params.burn_fee_floor {
        return Err(BuildError::FeeBelowFloor);
    }
    if fee > spend.secrets.fee {
        return Err(BuildError::FeeExceedsCoinFee);
    }
    let (stmt, wit) = spend.input_statement(params);
    let proof = backend.prove_input(params, &stmt, &wit)?;
    Ok(Transaction {
        token: spend.secrets.token,
        inputs: alloc::vec![TxInput {
            crt: spend.crt,
            crt_ref: spend.crt_ref,
            sn: stmt.sn,
            cm: stmt.cm,
            pk_sig: spend.sig_keys.pk,
            proof,
        }],
        outputs: Vec::new(),
        fee,
        tx_proof: None,
        body: TxBody::Burn(BurnBody {
            value: spend.secrets.value,
            coin_fee: spend.secrets.fee,
            pk_auth: wit.pk_auth,
            beneficiary,
        }),
    })
}

/// Fee-collecting transaction: one output committing to the batch-start fee
/// checkpoint under the operator's revealed k.
pub fn build_fee_collect(params: &Params, ck_f: FieldElement, k: FieldElement) -> Transaction {
    let c = output_commitment_with_k(params, FieldElement::ZERO, FieldElement::ZERO, ck_f, k);
    Transaction {
        token: FieldElement::ZERO,
        inputs: Vec::new(),
        outputs: alloc::vec![TxOutput { c, enc_data: None }],
        fee: 0,
        tx_proof: None,
        body: TxBody::FeeCollect(FeeCollectBody { k }),
    }
}

/// Groups transactions and computes the bracket hash; post-roots stay zero
/// until the operator executes the bracket.
pub fn bracket_make(params: &Params, txs: Vec<Transaction>) -> Result<TransactionBracket, BuildError> {
    if txs.is_empty() {
        return Err(BuildError::EmptyBracket);
    }
    if txs.len() > params.bracket_capacity {
        return Err(BuildError::BracketOverCapacity);
    }
    let hashes: Vec<FieldElement> = txs.iter().map(|t| tx_hash(params, t)).collect();
    Ok(TransactionBracket {
        txs,
        bracket_hash: bracket_hash_of(params, &hashes),
        signatures: Vec::new(),
        post_crt: FieldElement::ZERO,
        post_nrt: FieldElement::ZERO,
    })
}

/// Signs the bracket hash once per input, in input order. Key order must
/// match the inputs' pk_sig order exactly.
pub fn bracket_sign(
    params: &Params,
    bracket: &mut TransactionBracket,
    keys: &[&SignatureKeyPair],
) -> Result<(), BuildError> {
    let _ = params;
    let pk_sigs: Vec<FieldElement> = bracket
        .txs
        .iter()
        .flat_map(|t| t.inputs.iter().map(|i| i.pk_sig))
        .collect();
    if keys.len() != pk_sigs.len() || keys.iter().zip(&pk_sigs).any(|(k, pk)| k.pk != *pk) {
        return Err(BuildError::SignatureMismatch);
    }
    let msg = bracket.bracket_hash.to_be_bytes();
    bracket.signatures = keys.iter().map(|k| k.sign(&msg)).collect();
    Ok(())
}

/// Full local bracket validation: hash matches, one signature per input,
/// each verifying under its input's pk_sig.
pub fn bracket_verify(params: &Params, bracket: &TransactionBracket) -> bool {
    let hashes: Vec<FieldElement> = bracket.txs.iter().map(|t| tx_hash(params, t)).collect();
    if bracket.bracket_hash != bracket_hash_of(params, &hashes) {
        return false;
    }
    if bracket.signatures.len() != bracket.input_count() {
        return false;
    }
    let msg = bracket.bracket_hash.to_be_bytes();
    bracket
        .txs
        .iter()
        .flat_map(|t| t.inputs.iter())
        .zip(&bracket.signatures)
        .all(|(input, sig)| verify_signature(&input.pk_sig, &msg, sig))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::ReferenceBackend;
    use crate::crypto::{CoinKeyPair, EncKeyPair, random_fe};
    use crate::merkle::AppendOnlyTree;
    use rand_core::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha20Rng {
        rand_chacha::ChaCha20Rng::seed_from_u64(seed)
    }

    fn backend() -> ReferenceBackend {
        ReferenceBackend::setup([3u8; 32], false)
    }

    /// Builds a coin in a fresh tree and returns a ready-to-use Spend.
    fn seeded_spend(
        params: &Params,
        r: &mut rand_chacha::ChaCha20Rng,
        token: u64,
        value: u64,
        coin_fee: u64,
    ) -> (Spend, AppendOnlyTree) {
        let keys = CoinKeyPair::generate(params, r);
        let secrets =
            CoinSecrets::new(params, params.fe(token), value, coin_fee, random_fe(params, r))
                .unwrap();
        let c = crypto::output_commitment(params, &secrets, &keys.pk);
        let mut tree = AppendOnlyTree::new(params.depth);
        tree.append(params, &random_fe(params, r)).unwrap();
        let index = tree.append(params, &c).unwrap();
        let spend = Spend {
            secrets,
            sk_coin: keys.sk,
            pk_coin: keys.pk,
            sig_keys: SignatureKeyPair::generate(params, r).unwrap(),
            inclusion: tree.prove(index).unwrap(),
            crt: tree.root(params),
            crt_ref: CrtRef { height: 1, bracket: 0 },
        };
        (spend, tree)
    }

    #[test]
    fn crt_ref_word_roundtrip() {
        for r in [
            CrtRef::GENESIS,
            CrtRef { height: 3, bracket: 0 },
            CrtRef { height: u64::MAX, bracket: u32::MAX as i64 },
        ] {
            assert_eq!(CrtRef::from_word(&r.to_word()), Some(r));
        }
        // bracket −1 is reserved for genesis.
        let bad = CrtRef { height: 2, bracket: -1 };
        assert_eq!(CrtRef::from_word(&bad.to_word()), None);
        let mut word = CrtRef::GENESIS.to_word();
        word[16] = 0x80;
        assert_eq!(CrtRef::from_word(&word), None);
    }

    #[test]
    fn mint_recomputes_and_has_no_inputs() {
        let params = Params::default();
        let mut r = rng(1);
        let keys = CoinKeyPair::generate(&params, &mut r);
        let secrets =
            CoinSecrets::new(&params, params.fe(2), 50, 7, random_fe(&params, &mut r)).unwrap();
        let tx = build_mint(&params, &secrets, &keys.pk, 9);
        assert_eq!(tx.kind(), Kind::Mint);
        assert!(tx.inputs.is_empty());
        assert_eq!(tx.outputs.len(), 1);
        assert_eq!(tx.fee, 0);
        assert_eq!(
            tx.outputs[0].c,
            crypto::output_commitment(&params, &secrets, &keys.pk)
        );
        let TxBody::Mint(body) = &tx.body else { panic!() };
        assert_eq!(body.nonce, 9);
        assert_eq!(body.value, 50);
        assert_eq!(tx.nullifier_entries(&params), alloc::vec![params.fe(9)]);
    }

    #[test]
    fn transfer_builds_balances_and_proves() {
        let params = Params::default();
        let mut r = rng(2);
        let b = backend();
        let (spend, _tree) = seeded_spend(&params, &mut r, 5, 100, 10);
        let recipient_enc = EncKeyPair::generate(&mut r);
        let recipient_coin = CoinKeyPair::generate(&params, &mut r);
        let self_coin = CoinKeyPair::generate(&params, &mut r);

        let outs = [
            OutSpec::Shielded {
                recipient_pk_coin: recipient_coin.pk,
                recipient_pk_enc: recipient_enc.pk,
                secrets: CoinSecrets::new(&params, params.fe(5), 60, 4, random_fe(&params, &mut r))
                    .unwrap(),
            },
            OutSpec::Plain {
                pk_coin: self_coin.pk,
                secrets: CoinSecrets::new(&params, params.fe(5), 40, 5, random_fe(&params, &mut r))
                    .unwrap(),
            },
        ];
        let tx = build_transfer(&params, &b, core::slice::from_ref(&spend), &outs, 1, &mut r)
            .unwrap();
        assert_eq!(tx.kind(), Kind::Transfer);
        assert_eq!(tx.inputs.len(), 1);
        assert_eq!(tx.outputs.len(), 2);
        assert!(tx.outputs[0].enc_data.is_some());
        assert!(tx.outputs[1].enc_data.is_none());

        // The embedded proofs verify against reconstructed statements.
        let stmt = transfer_statement(&params, &tx).unwrap();
        assert!(b.verify_tx(&params, &stmt, tx.tx_proof.as_ref().unwrap()));
        let input = &tx.inputs[0];
        let istmt = InputStatement {
            crt: input.crt,
            sn: input.sn,
            cm: input.cm,
            pk_sig: input.pk_sig,
        };
        assert!(b.verify_input(&params, &istmt, &input.proof));

        // The recipient can decrypt its note; the sender's change has none.
        let got = recipient_enc.decrypt(&params, tx.outputs[0].enc_data.as_ref().unwrap());
        assert_eq!(got.unwrap().value, 60);

        // Unbalanced variants refuse.
        let bad_outs = [outs[0].clone(), OutSpec::Plain {
            pk_coin: self_coin.pk,
            secrets: CoinSecrets::new(&params, params.fe(5), 41, 5, random_fe(&params, &mut r))
                .unwrap(),
        }];
        assert_eq!(
            build_transfer(&params, &b, core::slice::from_ref(&spend), &bad_outs, 1, &mut r),
            Err(BuildError::Unbalanced)
        );
        // Fee imbalance.
        assert_eq!(
            build_transfer(&params, &b, core::slice::from_ref(&spend), &outs, 2, &mut r),
            Err(BuildError::Unbalanced)
        );
        // Mixed tokens.
        let mixed = [outs[0].clone(), OutSpec::Plain {
            pk_coin: self_coin.pk,
            secrets: CoinSecrets::new(&params, params.fe(6), 40, 5, random_fe(&params, &mut r))
                .unwrap(),
        }];
        assert_eq!(
            build_transfer(&params, &b, core::slice::from_ref(&spend), &mixed, 1, &mut r),
            Err(BuildError::MixedTokens)
        );
    }

    #[test]
    fn transfer_slot_budget() {
        let params = Params::default();
        let mut r = rng(3);
        let b = backend();
        // 4 spends of the same token from one tree.
        let keys = CoinKeyPair::generate(&params, &mut r);
        let sig = SignatureKeyPair::generate(&params, &mut r).unwrap();
        let mut tree = AppendOnlyTree::new(params.depth);
        let mut spends = Vec::new();
        for _ in 0..4 {
            let secrets =
                CoinSecrets::new(&params, params.fe(9), 10, 2, random_fe(&params, &mut r)).unwrap();
            let c = crypto::output_commitment(&params, &secrets, &keys.pk);
            let index = tree.append(&params, &c).unwrap();
            spends.push((secrets, index));
        }
        let spends: Vec<Spend> = spends
            .into_iter()
            .map(|(secrets, index)| Spend {
                secrets,
                sk_coin: keys.sk,
                pk_coin: keys.pk,
                sig_keys: sig.clone(),
                inclusion: tree.prove(index).unwrap(),
                crt: tree.root(&params),
                crt_ref: CrtRef { height: 1, bracket: 0 },
            })
            .collect();
        let self_coin = CoinKeyPair::generate(&params, &mut r);
        let out = |value: u64, fee: u64, r: &mut rand_chacha::ChaCha20Rng| OutSpec::Plain {
            pk_coin: self_coin.pk,
            secrets: CoinSecrets::new(&params, params.fe(9), value, fee, random_fe(&params, r))
                .unwrap(),
        };

        // 4 in + 4 out = 8 slots: accepted.
        let outs = [
            out(10, 2, &mut r),
            out(10, 2, &mut r),
            out(10, 2, &mut r),
            out(10, 1, &mut r),
        ];
        let tx = build_transfer(&params, &b, &spends, &outs, 1, &mut r).unwrap();
        assert_eq!(tx.inputs.len() + tx.outputs.len(), 8);

        // 9 slots: refused.
        let outs5 = [
            out(10, 2, &mut r),
            out(10, 2, &mut r),
            out(10, 2, &mut r),
            out(5, 1, &mut r),
            out(5, 0, &mut r),
        ];
        assert_eq!(
            build_transfer(&params, &b, &spends, &outs5, 1, &mut r),
            Err(BuildError::TooManySlots)
        );
    }

    #[test]
    fn burn_reveals_coin_and_enforces_floors() {
        let params = Params::default();
        let mut r = rng(4);
        let b = backend();
        let (spend, _tree) = seeded_spend(&params, &mut r, 7, 30, 6);
        let beneficiary = L1Address([9u8; 20]);
        let tx = build_burn(&params, &b, &spend, beneficiary, 3).unwrap();
        assert_eq!(tx.kind(), Kind::Burn);
        assert!(tx.outputs.is_empty());
        assert_eq!(tx.inputs.len(), 1);
        let TxBody::Burn(body) = &tx.body else { panic!() };
        assert_eq!((body.value, body.coin_fee), (30, 6));
        assert_eq!(body.beneficiary, beneficiary);
        // The revealed fields recompute the input commitment.
        assert_eq!(
            tx.inputs[0].cm,
            input_commitment(
                &params,
                tx.token,
                params.fe(body.value),
                params.fe(body.coin_fee),
                body.pk_auth,
            )
        );

        assert_eq!(
            build_burn(&params, &b, &spend, beneficiary, 1),
            Err(BuildError::FeeBelowFloor)
        );
        assert_eq!(
            build_burn(&params, &b, &spend, beneficiary, 7),
            Err(BuildError::FeeExceedsCoinFee)
        );
    }

    #[test]
    fn fee_collect_commitment_recomputes() {
        let params = Params::default();
        let ck_f = params.fe(123);
        let k = params.fe(456);
        let tx = build_fee_collect(&params, ck_f, k);
        assert_eq!(tx.kind(), Kind::FeeCollect);
        assert_eq!(
            tx.outputs[0].c,
            output_commitment_with_k(&params, FieldElement::ZERO, FieldElement::ZERO, ck_f, k)
        );
        assert_eq!(tx.fee, 0);
        assert!(tx.nullifier_entries(&params).is_empty());
    }

    #[test]
    fn bracket_sign_and_verify() {
        let params = Params::default();
        let mut r = rng(5);
        let b = backend();
        let (spend_a, _) = seeded_spend(&params, &mut r, 4, 20, 4);
        let (spend_b, _) = seeded_spend(&params, &mut r, 4, 11, 5);
        let self_coin = CoinKeyPair::generate(&params, &mut r);
        let mk_out = |value, fee, r: &mut rand_chacha::ChaCha20Rng| OutSpec::Plain {
            pk_coin: self_coin.pk,
            secrets: CoinSecrets::new(&params, params.fe(4), value, fee, random_fe(&params, r))
                .unwrap(),
        };
        let tx1 = build_transfer(
            &params,
            &b,
            core::slice::from_ref(&spend_a),
            &[mk_out(20, 3, &mut r)],
            1,
            &mut r,
        )
        .unwrap();
        let tx2 = build_transfer(
            &params,
            &b,
            core::slice::from_ref(&spend_b),
            &[mk_out(11, 4, &mut r)],
            1,
            &mut r,
        )
        .unwrap();

        let mut bracket = bracket_make(&params, alloc::vec![tx1, tx2]).unwrap();
        assert!(!bracket_verify(&params, &bracket));
        bracket_sign(&params, &mut bracket, &[&spend_a.sig_keys, &spend_b.sig_keys]).unwrap();
        assert!(bracket_verify(&params, &bracket));

        // Dropping a signature breaks the count (rule 2b's condition).
        let mut short = bracket.clone();
        short.signatures.pop();
        assert!(!bracket_verify(&params, &short));

        // Corrupting a signature fails verification (rule 2c's condition).
        let mut forged = bracket.clone();
        forged.signatures[1].0[10] ^= 1;
        assert!(!bracket_verify(&params, &forged));

        // Wrong key order is refused at signing time.
        let mut again = bracket_make(&params, bracket.txs.clone()).unwrap();
        assert_eq!(
            bracket_sign(&params, &mut again, &[&spend_b.sig_keys, &spend_a.sig_keys]),
            Err(BuildError::SignatureMismatch)
        );

        // Reordering transactions changes the bracket hash.
        let mut swapped = bracket.txs.clone();
        swapped.swap(0, 1);
        let other = bracket_make(&params, swapped).unwrap();
        assert_ne!(other.bracket_hash, bracket.bracket_hash);

        assert_eq!(
            bracket_make(&params, Vec::new()),
            Err(BuildError::EmptyBracket)
        );
    }

    #[test]
    fn conservation_against_naive_interpreter() {
        // A bracket accepted by local validation conserves per-token values
        // and fees against a plain set-based ledger.
        let params = Params::default();
        let mut r = rng(6);
        let b = backend();
        let mut naive_in: alloc::collections::BTreeMap<u64, u128> = Default::default();
        let mut naive_out: alloc::collections::BTreeMap<u64, u128> = Default::default();
        let mut total_fee_in = 0u128;
        let mut total_fee_out = 0u128;
        let mut txs = Vec::new();
        let mut keys_in_order = Vec::new();
        let mut spends_store = Vec::new();
        for token in [3u64, 8] {
            let (spend, _) = seeded_spend(&params, &mut r, token, 50, 9);
            naive_in.insert(token, 50);
            total_fee_in += 9;
            spends_store.push(spend);
        }
        for spend in &spends_store {
            let self_coin = CoinKeyPair::generate(&params, &mut r);
            let token = spend.secrets.token.to_u64().unwrap();
            let outs = [
                OutSpec::Plain {
                    pk_coin: self_coin.pk,
                    secrets: CoinSecrets::new(&params, spend.secrets.token, 30, 3, random_fe(&params, &mut r)).unwrap(),
                },
                OutSpec::Plain {
                    pk_coin: self_coin.pk,
                    secrets: CoinSecrets::new(&params, spend.secrets.token, 20, 5, random_fe(&params, &mut r)).unwrap(),
                },
            ];
            *naive_out.entry(token).or_default() += 50;
            total_fee_out += 8;
            let tx = build_transfer(&params, &b, core::slice::from_ref(spend), &outs, 1, &mut r)
                .unwrap();
            txs.push(tx);
            keys_in_order.push(&spend.sig_keys);
        }
        let mut bracket = bracket_make(&params, txs).unwrap();
        bracket_sign(&params, &mut bracket, &keys_in_order).unwrap();
        assert!(bracket_verify(&params, &bracket));

        let bracket_fees: u128 = bracket.txs.iter().map(|t| t.fee as u128).sum();
        assert_eq!(naive_in, naive_out);
        assert_eq!(total_fee_in, total_fee_out + bracket_fees);

        // Nullifiers pairwise distinct within the bracket.
        let mut sns: Vec<FieldElement> = bracket
            .txs
            .iter()
            .flat_map(|t| t.nullifier_entries(&params))
            .collect();
        let before = sns.len();
        sns.sort();
        sns.dedup();
        assert_eq!(before, sns.len());
    }
}
