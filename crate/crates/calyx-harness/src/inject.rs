//! Fault injection: controlled corruption of otherwise-honest batches.
//!
//! Two layers live here. [`tamper_blob`] performs post-serialization word
//! edits on a published blob and is the primitive the scenario runner uses
//! for scripted injections. [`run_injection`] drives a self-contained attack
//! world through one violation of a chosen rule — building the batch with
//! whatever pre- or post-serialization tampering that rule requires — and
//! records how detection and arbitration respond. [`fuzz_false_disputes`]
//! hammers an honest batch with fabricated proofs to show none are accepted.

use std::collections::BTreeMap;
use std::fmt;

use calyx_core::blob::{
    self, Blob, BlobTree, FieldPath, WordAccessError, WordSource, serialize_batch,
};
use calyx_core::circuits::{Proof, ReferenceBackend};
use calyx_core::crypto::{CoinKeyPair, CoinSecrets, L1Address, SignatureKeyPair, random_fe};
use calyx_core::field::FieldElement;
use calyx_core::fraud::{self, AuxData, EntryLoc, FraudProof, ParseClaim, PriorReveals, RootLoc, RuleId};
use calyx_core::l1sim::{BRIDGE_ADDRESS, BurnRecord, ChainConfig, ChainError, ChainState};
use calyx_core::merkle::{Frontier, InclusionProof};
use calyx_core::params::Params;
use calyx_core::replica::Replica;
use calyx_core::txmodel::{
    CrtRef, OutSpec, Spend, Transaction, TransactionBracket, TxBody, bracket_hash_of, bracket_make,
    bracket_sign, build_burn, build_fee_collect, build_mint, build_transfer, tx_hash,
};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Why a scripted blob tamper could not be applied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TamperError {
    /// The blob lacks the structure the edit needs (e.g. no signed bracket).
    NoTarget(&'static str),
    /// The rule has no post-publication word edit; it needs the full matrix.
    Unsupported(RuleId),
}

impl fmt::Display for TamperError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TamperError::NoTarget(what) => write!(f, "no tamper target: {what}"),
            TamperError::Unsupported(rule) => {
                write!(f, "rule {} cannot be injected by word edits alone", rule.label())
            }
        }
    }
}

impl std::error::Error for TamperError {}

fn locate_one(params: &Params, blob: &Blob, path: FieldPath) -> Result<u64, TamperError> {
    let src: &dyn WordSource = blob;
    blob::locate(params, src, path)
        .map(|range| range.start)
        .map_err(|_: WordAccessError| TamperError::NoTarget("field not present in this blob"))
}

/// Reads the word at `path`, adds one in the field, and writes it back.
/// Keeps the word a canonical field element so the edit parses.
fn bump_fe(params: &Params, blob: &mut Blob, path: FieldPath) -> Result<(), TamperError> {
    let idx = locate_one(params, blob, path)?;
    let word = blob.word(idx);
    let fe = FieldElement::from_be_bytes(&word, &params.prime)
        .unwrap_or(FieldElement::ZERO)
        .add_mod(&FieldElement::from_u64(1), &params.prime);
    blob.set_word(idx, fe.to_be_bytes());
    Ok(())
}

/// Applies a post-publication word edit that makes `rule` provable against
/// an otherwise honest blob. Only rules whose violation is expressible as a
/// word edit on a sealed batch are supported; the rest need
/// [`run_injection`], which controls the batch before serialization.
pub fn tamper_blob(
    params: &Params,
    blob: &mut Blob,
    rule: RuleId,
    _rng: &mut dyn RngCore,
) -> Result<(), TamperError> {
    let parsed = blob::parse_blob(params, blob)
        .map_err(|_| TamperError::NoTarget("blob does not parse"))?;
    let brackets = parsed.brackets.len() as u64;
    if brackets == 0 {
        return Err(TamperError::NoTarget("batch has no brackets"));
    }
    let last = brackets - 1;
    match rule {
        // An out-of-range kind word makes the blob unparseable.
        RuleId::R1a => {
            let idx = locate_one(params, blob, FieldPath::TxKind { bracket: last, tx: 0 })?;
            blob.set_word(idx, FieldElement::from_u64(9).to_be_bytes());
            Ok(())
        }
        RuleId::R2a => bump_fe(params, blob, FieldPath::BracketHash { bracket: last }),
        // Flip one bit of the first signature in the batch; signature words
        // are raw bytes, so any edit stays representable.
        RuleId::R2c => {
            for b in 0..brackets {
                let src: &dyn WordSource = blob;
                if blob::locate(params, src, FieldPath::SignatureAt { bracket: b, index: 0 }).is_ok()
                {
                    let idx =
                        locate_one(params, blob, FieldPath::SignatureAt { bracket: b, index: 0 })?;
                    let mut word = blob.word(idx);
                    word[31] ^= 1;
                    blob.set_word(idx, word);
                    return Ok(());
                }
            }
            Err(TamperError::NoTarget("no signed bracket in batch"))
        }
        RuleId::R3e => bump_fe(params, blob, FieldPath::RunningFee { bracket: 0 }),
        RuleId::R3g => bump_fe(params, blob, FieldPath::PostCrt { bracket: last }),
        RuleId::R3h => bump_fe(params, blob, FieldPath::PostNrt { bracket: last }),
        other => Err(TamperError::Unsupported(other)),
    }
}

// ---------------------------------------------------------------------------
// Attack world
// ---------------------------------------------------------------------------

/// Fixed cast for injection runs.
pub const OPERATOR: L1Address = L1Address(*b"inject/operator\0\0\0\0\0");
/// Challenger who files the winning dispute.
pub const CHALLENGER: L1Address = L1Address(*b"inject/challenger\0\0\0");
/// Depositor whose funds seed the shielded coins.
pub const CLIENT: L1Address = L1Address(*b"inject/client\0\0\0\0\0\0\0");
/// Burn beneficiary used by honest burns in the fixture.
pub const EXIT: L1Address = L1Address(*b"inject/exit\0\0\0\0\0\0\0\0\0");

const TOKEN: u64 = 1;
const STAKE_INITIAL: u128 = 2_000;
const STAKE_TOPUP: u128 = 1_500;

/// One pre-seeded shielded coin the attack recipes can spend.
struct Coin {
    secrets: CoinSecrets,
    leaf: u64,
}

/// Minimal self-contained chain with two honest batches: five mints at
/// height 1 and one burn at height 2. Height 3 is the injection target.
pub struct AttackWorld {
    pub params: Params,
    pub chain: ChainState,
    backend: ReferenceBackend,
    /// Honest replay through every batch applied so far.
    pub replica: Replica,
    coin_keys: CoinKeyPair,
    coins: Vec<Coin>,
    next_pad_value: u64,
    last_transfer_keys: Option<SignatureKeyPair>,
    rng: ChaCha20Rng,
}

/// Outcome of one end-to-end injection: what was planted, what detection
/// found, and how arbitration settled it.
#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub rule: RuleId,
    pub height: u64,
    /// Distinct rules detected on the tampered batch, ascending.
    pub detected: Vec<RuleId>,
    /// Stake paid to the challenger (live + pending at slash time).
    pub reward: u128,
    /// Chain tip after the successful dispute reverted the batch.
    pub reverted_to: u64,
    /// Reveals carried by the winning proof.
    pub reveal_count: usize,
    /// Serialized size of the winning proof.
    pub proof_bytes: usize,
    /// Whether the winning proof round-trips through its byte encoding.
    pub roundtrips: bool,
    /// Whether the untouched batches still scan clean after the dispute.
    pub clean_elsewhere: bool,
}

impl AttackWorld {
    pub fn new(seed: u64) -> AttackWorld {
        let params = Params::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5ce7_a51a_c0de_0003);
        AttackWorld::with_rng(params, &mut rng)
    }

    fn with_rng(params: Params, seed_rng: &mut ChaCha20Rng) -> AttackWorld {
        let mut proof_key = [0u8; 32];
        seed_rng.fill_bytes(&mut proof_key);
        let config = ChainConfig { min_stake: 1_000, fpp: 10, proof_key };
        let mut chain = ChainState::new(params.clone(), config);
        let backend = ReferenceBackend::setup(proof_key, false);
        let mut rng = ChaCha20Rng::seed_from_u64(seed_rng.next_u64());

        let token = params.fe(TOKEN);
        chain.credit_native(CLIENT, 100_000);
        chain.credit_token(token, CLIENT, 100_000);
        chain.approve(CLIENT, token, BRIDGE_ADDRESS, 100_000);
        chain.credit_native(OPERATOR, 10_000);
        chain.stake(OPERATOR, STAKE_INITIAL).expect("operator stake");

        let coin_keys = CoinKeyPair::generate(&params, &mut rng);
        AttackWorld {
            replica: Replica::new(&params),
            params,
            chain,
            backend,
            coin_keys,
            coins: Vec::new(),
            next_pad_value: 0,
            last_transfer_keys: None,
            rng,
        }
    }

    /// Deposits (value, g) for the fixture client and returns the honest
    /// mint transaction plus the coin it creates. The coin's leaf index is
    /// filled in by the caller once the bracket's position is known.
    fn deposit_mint(&mut self, value: u64, g: u64) -> (Transaction, CoinSecrets, u64) {
        let sig = SignatureKeyPair::generate(&self.params, &mut self.rng).expect("sig keys");
        let nonce = self
            .chain
            .to_l2(CLIENT, self.params.fe(TOKEN), value, sig.pk, g)
            .expect("bridge deposit");
        let p = random_fe(&self.params, &mut self.rng);
        let secrets = CoinSecrets::new(&self.params, self.params.fe(TOKEN), value, g, p)
            .expect("coin secrets");
        let tx = build_mint(&self.params, &secrets, &self.coin_keys.pk, nonce);
        (tx, secrets, nonce)
    }

    /// A fresh single-mint bracket used to pad batches to a target size.
    fn pad_bracket(&mut self) -> TransactionBracket {
        let value = 3 + (self.next_pad_value % 5);
        self.next_pad_value += 1;
        let (tx, _, _) = self.deposit_mint(value, 2);
        bracket_make(&self.params, vec![tx]).expect("pad bracket")
    }

    /// Spend authorization for a seeded coin against a published checkpoint.
    fn spend_of(&mut self, coin: usize, at: CrtRef) -> Spend {
        let c = &self.coins[coin];
        let (crt, inclusion) = self
            .replica
            .coin_proof(&self.params, c.leaf, &at)
            .expect("coin proof");
        let sig_keys = SignatureKeyPair::generate(&self.params, &mut self.rng).expect("sig keys");
        Spend {
            secrets: c.secrets.clone(),
            sk_coin: self.coin_keys.sk,
            pk_coin: self.coin_keys.pk,
            sig_keys,
            inclusion,
            crt,
            crt_ref: at,
        }
    }

    /// Recomputes the bracket hash after a member transaction was mutated.
    fn rehash(&self, bracket: &mut TransactionBracket) {
        let hashes: Vec<FieldElement> =
            bracket.txs.iter().map(|t| tx_hash(&self.params, t)).collect();
        bracket.bracket_hash = bracket_hash_of(&self.params, &hashes);
    }

    /// Re-signs a mutated bracket with the retained keys, one per input.
    fn resign(&self, bracket: &mut TransactionBracket, keys: &[&SignatureKeyPair]) {
        bracket.signatures.clear();
        bracket_sign(&self.params, bracket, keys).expect("re-sign bracket");
    }

    /// Extracts the honest burn-record map exactly as a sealing operator
    /// would: one record per burn transaction, g = coin fee minus tx fee.
    fn burns_of(&self, brackets: &[TransactionBracket]) -> BTreeMap<(u64, u64), BurnRecord> {
        let mut burns = BTreeMap::new();
        for (bi, bracket) in brackets.iter().enumerate() {
            for (ti, tx) in bracket.txs.iter().enumerate() {
                if let TxBody::Burn(body) = &tx.body {
                    burns.insert(
                        (bi as u64, ti as u64),
                        BurnRecord {
                            token: tx.token,
                            value: body.value,
                            g: body.coin_fee - tx.fee,
                            beneficiary: body.beneficiary,
                        },
                    );
                }
            }
        }
        burns
    }

    /// Fills post-roots, serializes, applies an optional word-level edit,
    /// and publishes the result as the next batch.
    fn publish(
        &mut self,
        mut brackets: Vec<TransactionBracket>,
        burns: BTreeMap<(u64, u64), BurnRecord>,
        edit: impl FnOnce(&Params, &mut Blob),
    ) -> (u64, Vec<TransactionBracket>) {
        let (crt, nrt, ck_f) = self.replica.expected_header(&self.params);
        self.replica
            .fill_post_roots(&self.params, &mut brackets)
            .expect("post-root replay");
        let mut blob = serialize_batch(&self.params, crt, nrt, ck_f, &brackets)
            .expect("batch fits in one blob");
        edit(&self.params, &mut blob);
        let prev = self.chain.prev_batch_commitment();
        self.chain
            .new_batch(OPERATOR, &[blob], burns, prev)
            .expect("publish batch");
        (self.chain.inbox.cur_height, brackets)
    }

    /// Publishes an honest batch and replays it on the local replica.
    fn publish_honest(&mut self, brackets: Vec<TransactionBracket>) -> u64 {
        let burns = self.burns_of(&brackets);
        let (height, executed) = self.publish(brackets, burns, |_, _| {});
        self.replica
            .apply_batch(&self.params, height, &executed)
            .expect("replay honest batch");
        height
    }

    fn fee_collect(&mut self) -> TransactionBracket {
        let k = random_fe(&self.params, &mut self.rng);
        let tx = build_fee_collect(&self.params, self.replica.ck_f, k);
        bracket_make(&self.params, vec![tx]).expect("fee-collect bracket")
    }

    /// Two honest batches: five mints (coins A..E) at height 1, one burn of
    /// coin C at height 2. Leaves the replica at height 2.
    pub fn publish_honest_base(&mut self) {
        let seedings = [(40u64, 12u64), (30, 10), (20, 9), (25, 8), (15, 7)];
        let mut txs = Vec::new();
        for (value, g) in seedings {
            let (tx, secrets, _) = self.deposit_mint(value, g);
            let leaf = self.coins.len() as u64;
            self.coins.push(Coin { secrets, leaf });
            txs.push(tx);
        }
        let mints = bracket_make(&self.params, txs).expect("mint bracket");
        let fc = self.fee_collect();
        self.publish_honest(vec![mints, fc]);

        // Height 2: burn coin C honestly so a later re-spend is provable.
        let at = CrtRef { height: 1, bracket: 1 };
        let spend = self.spend_of(2, at);
        let keys = spend.sig_keys.clone();
        let tx = build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("burn C");
        let mut bracket = bracket_make(&self.params, vec![tx]).expect("burn bracket");
        bracket_sign(&self.params, &mut bracket, &[&keys]).expect("sign burn");
        let fc = self.fee_collect();
        self.publish_honest(vec![bracket, fc]);
    }

    /// Publishes a fully honest third batch (transfer + burn + mint + fee
    /// collect) for the false-dispute fuzzer.
    pub fn publish_honest_third(&mut self) {
        let at = CrtRef { height: 2, bracket: 1 };
        // Transfer coin A to self: value conserved, one unit of fee paid.
        let spend = self.spend_of(0, at);
        let keys = spend.sig_keys.clone();
        let out = CoinSecrets::new(
            &self.params,
            self.params.fe(TOKEN),
            self.coins[0].secrets.value,
            self.coins[0].secrets.fee - 1,
            random_fe(&self.params, &mut self.rng),
        )
        .expect("out secrets");
        let transfer = build_transfer(
            &self.params,
            &self.backend,
            &[spend],
            &[OutSpec::Plain { pk_coin: self.coin_keys.pk, secrets: out }],
            1,
            &mut self.rng,
        )
        .expect("honest transfer");
        let mut b0 = bracket_make(&self.params, vec![transfer]).expect("transfer bracket");
        bracket_sign(&self.params, &mut b0, &[&keys]).expect("sign transfer");

        // Burn coin D.
        let spend = self.spend_of(3, at);
        let dkeys = spend.sig_keys.clone();
        let burn = build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("burn D");
        let mut b1 = bracket_make(&self.params, vec![burn]).expect("burn bracket");
        bracket_sign(&self.params, &mut b1, &[&dkeys]).expect("sign burn");

        let b2 = self.pad_bracket();
        let fc = self.fee_collect();
        self.publish_honest(vec![b0, b1, b2, fc]);
    }

    /// Builds and publishes the tampered batch for `rule`, padded with
    /// honest single-mint brackets to `total` brackets overall.
    fn publish_attack(&mut self, rule: RuleId, total: usize) {
        let at = CrtRef { height: 2, bracket: 1 };
        let mut content: Vec<TransactionBracket> = Vec::new();
        let mut has_fc = true;
        let mut map_edit: Box<dyn FnOnce(&mut BTreeMap<(u64, u64), BurnRecord>)> =
            Box::new(|_| {});
        let mut post_edit: Option<Box<dyn FnOnce(&Params, &mut Blob)>> = None;
        // Tampers applied to the executed fee-collect bracket just before
        // serialization (after post-roots are filled for R3f's silence on
        // the root rules, see below).
        let mut fc_pre: Option<Box<dyn Fn(&Params, &mut TransactionBracket)>> = None;

        match rule {
            // Structural fault: handled entirely by the shared word edit.
            RuleId::R1a => {
                let mut throwaway = ChaCha20Rng::seed_from_u64(0);
                post_edit = Some(Box::new(move |p, blob| {
                    tamper_blob(p, blob, RuleId::R1a, &mut throwaway).expect("tamper");
                }));
            }
            // Mint that overstates its bridge deposit.
            RuleId::R1b => {
                let (mut tx, _, _) = self.deposit_mint(6, 2);
                if let TxBody::Mint(body) = &mut tx.body {
                    body.value += 1;
                }
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                self.rehash(&mut bracket);
                content.push(bracket);
            }
            // Burn whose revealed opening no longer matches its input
            // commitment: swap pk_auth for a random element.
            RuleId::R1c => {
                let spend = self.spend_of(1, at);
                let keys = spend.sig_keys.clone();
                let mut tx =
                    build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("burn");
                if let TxBody::Burn(body) = &mut tx.body {
                    body.pk_auth = random_fe(&self.params, &mut self.rng);
                }
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                self.rehash(&mut bracket);
                self.resign(&mut bracket, &[&keys]);
                content.push(bracket);
            }
            // Transfer with a garbage input proof.
            RuleId::R1d => {
                let mut tx = self.self_transfer(0, at);
                let keys = self.last_transfer_keys.clone().expect("transfer keys");
                tx.inputs[0].proof = Proof([0x42; 64]);
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                self.rehash(&mut bracket);
                self.resign(&mut bracket, &[&keys]);
                content.push(bracket);
            }
            // Transfer with a garbage aggregate proof.
            RuleId::R1e => {
                let mut tx = self.self_transfer(0, at);
                let keys = self.last_transfer_keys.clone().expect("transfer keys");
                tx.tx_proof = Some(Proof([0x42; 64]));
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                self.rehash(&mut bracket);
                self.resign(&mut bracket, &[&keys]);
                content.push(bracket);
            }
            // Stored transaction-hash word disagrees with the words it
            // summarizes; the bracket hash is rewritten to match so only
            // the per-transaction rule fires.
            RuleId::R1f => {
                let (tx, _, _) = self.deposit_mint(6, 2);
                let bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                content.push(bracket);
                post_edit = Some(Box::new(|p, blob| {
                    let src: &dyn WordSource = blob;
                    let idx = blob::locate(p, src, FieldPath::TxHashWord { bracket: 0, tx: 0 })
                        .expect("tx hash word")
                        .start;
                    let word = blob.word(idx);
                    let bumped = FieldElement::from_be_bytes(&word, &p.prime)
                        .unwrap_or(FieldElement::ZERO)
                        .add_mod(&FieldElement::from_u64(1), &p.prime);
                    blob.set_word(idx, bumped.to_be_bytes());
                    let fixed = bracket_hash_of(p, &[bumped]);
                    let src: &dyn WordSource = blob;
                    let hidx = blob::locate(p, src, FieldPath::BracketHash { bracket: 0 })
                        .expect("bracket hash word")
                        .start;
                    blob.set_word(hidx, fixed.to_be_bytes());
                }));
            }
            // Re-spend of the coin already burned at height 2.
            RuleId::R1g => {
                let spend = self.spend_of(2, at);
                let keys = spend.sig_keys.clone();
                let tx =
                    build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("re-burn");
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                bracket_sign(&self.params, &mut bracket, &[&keys]).expect("sign");
                content.push(bracket);
            }
            // The same coin spent twice inside one batch.
            RuleId::R1h => {
                let s1 = self.spend_of(4, at);
                let k1 = s1.sig_keys.clone();
                let t1 = build_burn(&self.params, &self.backend, &s1, EXIT, 2).expect("burn");
                let s2 = self.spend_of(4, at);
                let k2 = s2.sig_keys.clone();
                let t2 = build_burn(&self.params, &self.backend, &s2, EXIT, 2).expect("burn");
                let mut bracket = bracket_make(&self.params, vec![t1, t2]).expect("bracket");
                bracket_sign(&self.params, &mut bracket, &[&k1, &k2]).expect("sign");
                content.push(bracket);
            }
            // Checkpoint reference that resolves nowhere.
            RuleId::R1i => {
                let mut tx = self.self_transfer(0, at);
                let keys = self.last_transfer_keys.clone().expect("transfer keys");
                tx.inputs[0].crt_ref = CrtRef { height: 77, bracket: 0 };
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                self.rehash(&mut bracket);
                self.resign(&mut bracket, &[&keys]);
                content.push(bracket);
            }
            RuleId::R2a | RuleId::R2c | RuleId::R3e | RuleId::R3g | RuleId::R3h => {
                // Shared word edits; R2c needs a signed bracket to target.
                if rule == RuleId::R2c {
                    let spend = self.spend_of(1, at);
                    let keys = spend.sig_keys.clone();
                    let tx =
                        build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("burn");
                    let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                    bracket_sign(&self.params, &mut bracket, &[&keys]).expect("sign");
                    content.push(bracket);
                }
                if rule == RuleId::R3e {
                    let (tx, _, _) = self.deposit_mint(6, 2);
                    content.push(bracket_make(&self.params, vec![tx]).expect("bracket"));
                }
                let mut throwaway = ChaCha20Rng::seed_from_u64(1);
                post_edit = Some(Box::new(move |p, blob| {
                    tamper_blob(p, blob, rule, &mut throwaway).expect("tamper");
                }));
            }
            // A signature short of the input count.
            RuleId::R2b => {
                let spend = self.spend_of(1, at);
                let keys = spend.sig_keys.clone();
                let tx = build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("burn");
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                bracket_sign(&self.params, &mut bracket, &[&keys]).expect("sign");
                bracket.signatures.pop();
                content.push(bracket);
            }
            // An empty bracket, inadmissible regardless of content.
            RuleId::R2d => {
                content.push(TransactionBracket {
                    txs: Vec::new(),
                    bracket_hash: bracket_hash_of(&self.params, &[]),
                    signatures: Vec::new(),
                    post_crt: FieldElement::ZERO,
                    post_nrt: FieldElement::ZERO,
                });
            }
            // Burn record that names the wrong beneficiary.
            RuleId::R3a => {
                let spend = self.spend_of(3, at);
                let keys = spend.sig_keys.clone();
                let tx = build_burn(&self.params, &self.backend, &spend, EXIT, 2).expect("burn");
                let mut bracket = bracket_make(&self.params, vec![tx]).expect("bracket");
                bracket_sign(&self.params, &mut bracket, &[&keys]).expect("sign");
                content.push(bracket);
                map_edit = Box::new(|burns| {
                    let rec = burns.get_mut(&(0, 0)).expect("burn record");
                    rec.beneficiary = CHALLENGER;
                });
            }
            // A record docketed against a slot that holds no burn.
            RuleId::R3b => {
                map_edit = Box::new(|burns| {
                    burns.insert(
                        (0, 0),
                        BurnRecord { token: FieldElement::from_u64(TOKEN), value: 5, g: 1, beneficiary: CLIENT },
                    );
                });
            }
            // No fee-collect transaction anywhere in the batch.
            RuleId::R3c => {
                has_fc = false;
            }
            // A second fee-collect parked before the final bracket.
            RuleId::R3d => {
                let extra = self.fee_collect();
                content.push(extra);
            }
            // Fee-collect output that does not commit to the checkpoint.
            RuleId::R3f => {
                let garbage = random_fe(&self.params, &mut self.rng);
                fc_pre = Some(Box::new(move |p, bracket| {
                    bracket.txs[0].outputs[0].c = garbage;
                    let hashes: Vec<FieldElement> =
                        bracket.txs.iter().map(|t| tx_hash(p, t)).collect();
                    bracket.bracket_hash = bracket_hash_of(p, &hashes);
                }));
            }
        }

        let fixed = content.len() + usize::from(has_fc);
        let pads = total.saturating_sub(fixed);
        for _ in 0..pads {
            let pad = self.pad_bracket();
            content.push(pad);
        }
        if has_fc {
            content.push(self.fee_collect());
        }
        // A content tamper on the fee-collect happens before post-roots are
        // filled, so the recorded roots match a replay of the published
        // words and only the commitment rule is violated.
        if let Some(tamper) = fc_pre {
            let last = content.len() - 1;
            tamper(&self.params, &mut content[last]);
        }

        let mut burns = self.burns_of(&content);
        map_edit(&mut burns);

        let edit: Box<dyn FnOnce(&Params, &mut Blob)> = match post_edit {
            Some(e) => e,
            None => Box::new(|_, _| {}),
        };
        self.publish(content, burns, |p, blob| edit(p, blob));
    }

    /// Honest self-transfer of a seeded coin; retains the signing keys in
    /// `last_transfer_keys` for post-mutation re-signing.
    fn self_transfer(&mut self, coin: usize, at: CrtRef) -> Transaction {
        let spend = self.spend_of(coin, at);
        self.last_transfer_keys = Some(spend.sig_keys.clone());
        let out = CoinSecrets::new(
            &self.params,
            self.params.fe(TOKEN),
            self.coins[coin].secrets.value,
            self.coins[coin].secrets.fee - 1,
            random_fe(&self.params, &mut self.rng),
        )
        .expect("out secrets");
        build_transfer(
            &self.params,
            &self.backend,
            &[spend],
            &[OutSpec::Plain { pk_coin: self.coin_keys.pk, secrets: out }],
            1,
            &mut self.rng,
        )
        .expect("honest transfer")
    }
}

/// The smallest batch (in brackets) on which `rule` can be staged.
pub fn min_brackets(rule: RuleId) -> usize {
    match rule {
        RuleId::R1a
        | RuleId::R2a
        | RuleId::R3b
        | RuleId::R3c
        | RuleId::R3f
        | RuleId::R3g
        | RuleId::R3h => 1,
        _ => 2,
    }
}

/// The exact rule set detection is expected to report for each injection.
pub fn expected_rules(rule: RuleId) -> &'static [RuleId] {
    use RuleId::*;
    match rule {
        R1a => &[R1a],
        R1b => &[R1b],
        R1c => &[R1c],
        R1d => &[R1d],
        R1e => &[R1e],
        R1f => &[R1f],
        R1g => &[R1g],
        R1h => &[R1h],
        R1i => &[R1i],
        R2a => &[R2a],
        R2b => &[R2b],
        R2c => &[R2c],
        R2d => &[R2d],
        R3a => &[R3a],
        R3b => &[R3b],
        R3c => &[R3c],
        R3d => &[R3d],
        R3e => &[R3e],
        R3f => &[R3f],
        R3g => &[R3g],
        R3h => &[R3h],
    }
}

/// Stages one violation of `rule` at height 3 on top of two honest batches,
/// runs detection from the height-2 replay, files the best proof, and
/// reports the fallout. `total_brackets` pads the batch with honest mints
/// (clamped up to the rule's minimum feasible size).
pub fn run_injection(rule: RuleId, total_brackets: usize, seed: u64) -> Result<AttackOutcome, String> {
    let total = total_brackets.max(min_brackets(rule));
    let mut w = AttackWorld::new(seed);
    w.publish_honest_base();
    let verifier_view = w.replica.clone();
    w.publish_attack(rule, total);

    // Arm the slashing path: the operator starts an unstake so the reward
    // must sweep the pending tranche too, then tops the live stake back up.
    w.chain.unstake_request(OPERATOR).map_err(|e| format!("unstake request: {e}"))?;
    w.chain
        .stake(OPERATOR, STAKE_TOPUP)
        .map_err(|e| format!("stake top-up: {e}"))?;

    let height = w.chain.inbox.cur_height;
    let proofs = fraud::detect(&w.params, height, &w.chain, &verifier_view);
    if proofs.is_empty() {
        return Err(format!("injection of {} went undetected", rule.label()));
    }
    let mut detected: Vec<RuleId> = proofs.iter().map(|p| p.rule).collect();
    detected.sort();
    detected.dedup();

    let best = proofs
        .iter()
        .min_by_key(|p| p.rule)
        .expect("nonempty")
        .clone();
    let bytes = best.to_bytes();
    let roundtrips = FraudProof::from_bytes(&w.params, &bytes).as_ref() == Some(&best);

    let reward = w
        .chain
        .dispute_block(CHALLENGER, &best)
        .map_err(|e| format!("dispute rejected: {e}"))?;
    let reverted_to = w.chain.inbox.cur_height;

    // The honest history must still scan clean after arbitration.
    let mut clean = Replica::new(&w.params);
    let mut clean_elsewhere = true;
    for h in 1..=reverted_to {
        if !fraud::detect(&w.params, h, &w.chain, &clean).is_empty() {
            clean_elsewhere = false;
            break;
        }
        let blob = w.chain.blobs.get(&h).expect("published blob");
        let parsed = blob::parse_blob(&w.params, blob).expect("honest blob parses");
        let brackets: Vec<TransactionBracket> =
            parsed.brackets.into_iter().map(|pb| pb.bracket).collect();
        clean
            .apply_batch(&w.params, h, &brackets)
            .map_err(|e| format!("honest replay failed: {e:?}"))?;
    }

    Ok(AttackOutcome {
        rule,
        height,
        detected,
        reward,
        reverted_to,
        reveal_count: best.reveals.len(),
        proof_bytes: bytes.len(),
        roundtrips,
        clean_elsewhere,
    })
}

// ---------------------------------------------------------------------------
// False-dispute fuzzing
// ---------------------------------------------------------------------------

/// Outcome of hammering an honest batch with fabricated disputes.
#[derive(Clone, Debug)]
pub struct FuzzReport {
    pub rule: RuleId,
    pub attempts: u64,
    /// Fabricated proofs the arbiter accepted (must stay zero).
    pub accepted: u64,
    /// Rejections grouped by the arbiter's final answer.
    pub rejections: BTreeMap<String, u64>,
}

fn random_parse_claim(rng: &mut ChaCha20Rng) -> ParseClaim {
    match rng.gen_range(0..7) {
        0 => ParseClaim::HeaderField { word: rng.gen_range(0..4) },
        1 => ParseClaim::BracketOffset { bracket: rng.gen_range(0..6) },
        2 => ParseClaim::BracketFixed { bracket: rng.gen_range(0..6), word: rng.gen_range(0..6) },
        3 => ParseClaim::TxOffset { bracket: rng.gen_range(0..6), tx: rng.gen_range(0..4) },
        4 => ParseClaim::TxParse { bracket: rng.gen_range(0..6), tx: rng.gen_range(0..4) },
        5 => ParseClaim::BracketBounds { bracket: rng.gen_range(0..6) },
        _ => ParseClaim::Padding { word: rng.gen_range(0..4096) },
    }
}

fn random_entry(rng: &mut ChaCha20Rng) -> EntryLoc {
    if rng.gen_bool(0.5) {
        EntryLoc::InputSn {
            bracket: rng.gen_range(0..6),
            tx: rng.gen_range(0..4),
            input: rng.gen_range(0..2),
        }
    } else {
        EntryLoc::MintNonce { bracket: rng.gen_range(0..6), tx: rng.gen_range(0..4) }
    }
}

fn random_prior(rng: &mut ChaCha20Rng) -> PriorReveals {
    PriorReveals { height: rng.gen_range(1..4), reveals: Vec::new() }
}

fn random_inclusion(params: &Params, rng: &mut ChaCha20Rng) -> InclusionProof {
    let depth = params.depth as usize;
    InclusionProof {
        index: rng.gen_range(0..1_000),
        dir: (0..depth).map(|_| rng.gen_bool(0.5)).collect(),
        path: (0..depth).map(|_| random_fe(params, rng)).collect(),
    }
}

/// Aux data of the shape `rule` expects, with random coordinates.
fn shaped_aux(params: &Params, rule: RuleId, rng: &mut ChaCha20Rng) -> AuxData {
    use RuleId::*;
    let bracket = rng.gen_range(0..6);
    let tx = rng.gen_range(0..4);
    let input = rng.gen_range(0..2);
    match rule {
        R1a => AuxData::Claim(random_parse_claim(rng)),
        R1b | R1c | R1e | R1f | R3d | R3f => AuxData::Tx { bracket, tx },
        R1d => AuxData::Input { bracket, tx, input },
        R1g => AuxData::PriorInclusion {
            entry: random_entry(rng),
            prior: random_prior(rng),
            root_at: if rng.gen_bool(0.5) {
                RootLoc::Header
            } else {
                RootLoc::BracketPostNrt { bracket }
            },
            proof: random_inclusion(params, rng),
        },
        R1h => AuxData::TwoEntries { first: random_entry(rng), second: random_entry(rng) },
        R1i => AuxData::InputRef {
            bracket,
            tx,
            input,
            prior: if rng.gen_bool(0.5) { Some(random_prior(rng)) } else { None },
        },
        R2a | R2b | R2d | R3e => AuxData::Bracket { bracket },
        R2c => AuxData::Signature { bracket, index: rng.gen_range(0..4) },
        R3a | R3b => AuxData::BurnEntry { bracket, tx },
        R3c => AuxData::None,
        R3g | R3h => {
            if rng.gen_bool(0.5) {
                AuxData::HeaderContinuity {
                    prior: if rng.gen_bool(0.5) { Some(random_prior(rng)) } else { None },
                }
            } else {
                AuxData::FrontierReplay { bracket, frontier: Frontier::empty(params.depth) }
            }
        }
    }
}

/// Aux data of a deliberately wrong shape for `rule`.
fn mismatched_aux(params: &Params, rule: RuleId, rng: &mut ChaCha20Rng) -> AuxData {
    let target = core::mem::discriminant(&shaped_aux(params, rule, rng));
    for _ in 0..16 {
        let other = RuleId::ALL[rng.gen_range(0..RuleId::ALL.len())];
        let aux = shaped_aux(params, other, rng);
        if core::mem::discriminant(&aux) != target {
            return aux;
        }
    }
    AuxData::None
}

/// Files `attempts` fabricated proofs for `rule` against a fully honest
/// batch at height 3, harvesting whatever reveals the checker demands, and
/// reports how the arbiter answered. Any acceptance is a soundness break.
pub fn fuzz_false_disputes(rule: RuleId, attempts: u64, seed: u64) -> FuzzReport {
    let mut w = AttackWorld::new(seed);
    w.publish_honest_base();
    let verifier_view = w.replica.clone();
    w.publish_honest_third();
    let height = w.chain.inbox.cur_height;
    debug_assert!(
        fraud::detect(&w.params, height, &w.chain, &verifier_view).is_empty(),
        "fuzz target batch must be honest"
    );

    let tree = BlobTree::new(&w.params, w.chain.blobs.get(&height).expect("blob"));
    let budget = fraud::rule_reveal_budget(&w.params, rule);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xF00D);

    let mut accepted = 0u64;
    let mut rejections: BTreeMap<String, u64> = BTreeMap::new();
    for _ in 0..attempts {
        let aux = if rng.gen_bool(0.7) {
            shaped_aux(&w.params, rule, &mut rng)
        } else {
            mismatched_aux(&w.params, rule, &mut rng)
        };
        let mut proof = FraudProof { height, rule, reveals: Vec::new(), aux };
        // Feed the checker the words it asks for, within budget plus a
        // little slack, then record its final answer.
        let mut verdict = None;
        for _ in 0..budget + 4 {
            match w.chain.dispute_block(CHALLENGER, &proof) {
                Ok(_) => {
                    verdict = Some(Ok(()));
                    break;
                }
                Err(ChainError::FraudRejected(fraud::CheckError::MissingWord(idx))) => {
                    if proof.reveals.len() >= budget {
                        verdict = Some(Err("budget exhausted".to_string()));
                        break;
                    }
                    match tree.reveal(idx) {
                        Some(r) => proof.reveals.push(r),
                        None => {
                            verdict = Some(Err("word out of range".to_string()));
                            break;
                        }
                    }
                }
                Err(e) => {
                    verdict = Some(Err(format!("{e}")));
                    break;
                }
            }
        }
        match verdict.unwrap_or_else(|| Err("reveal loop stalled".to_string())) {
            Ok(()) => accepted += 1,
            Err(kind) => *rejections.entry(kind).or_insert(0) += 1,
        }
    }

    FuzzReport { rule, attempts, accepted, rejections }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tamper_targets_exist_on_real_batches() {
        let mut w = AttackWorld::new(9);
        w.publish_honest_base();
        let blob = w.chain.blobs.get(&2).expect("blob").clone();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for rule in [RuleId::R1a, RuleId::R2a, RuleId::R2c, RuleId::R3e, RuleId::R3g, RuleId::R3h]
        {
            let mut copy = blob.clone();
            tamper_blob(&w.params, &mut copy, rule, &mut rng).expect("tamper applies");
            assert_ne!(copy, blob, "tamper must change the blob for {rule:?}");
        }
        let mut copy = blob.clone();
        assert_eq!(
            tamper_blob(&w.params, &mut copy, RuleId::R1g, &mut rng),
            Err(TamperError::Unsupported(RuleId::R1g))
        );
    }

    #[test]
    fn every_rule_is_injected_detected_and_settled() {
        for rule in RuleId::ALL {
            let out = run_injection(rule, 0, 1_000 + rule.code() as u64)
                .unwrap_or_else(|e| panic!("{rule:?}: {e}"));
            assert_eq!(
                out.detected,
                expected_rules(rule),
                "{rule:?}: detection must report exactly the planted rule"
            );
            assert_eq!(out.reverted_to, 2, "{rule:?}: dispute reverts to height 2");
            assert_eq!(
                out.reward,
                STAKE_INITIAL + STAKE_TOPUP,
                "{rule:?}: reward must sweep live and pending stake"
            );
            assert!(out.roundtrips, "{rule:?}: winning proof must round-trip");
            assert!(out.clean_elsewhere, "{rule:?}: honest batches must stay clean");
        }
    }

    #[test]
    fn fabricated_disputes_never_win() {
        // A light pass here; the acceptance suite runs the full load.
        for rule in [RuleId::R1a, RuleId::R1g, RuleId::R2c, RuleId::R3c, RuleId::R3g] {
            let report = fuzz_false_disputes(rule, 50, 7);
            assert_eq!(report.accepted, 0, "{rule:?}: arbiter accepted a fabricated proof");
        }
    }
}
