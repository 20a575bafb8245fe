//! One-step fraud proofs: the rule catalog, the judge, and detection.
//!
//! A fraud proof names a batch height, a rule, a sparse set of word reveals
//! against that batch's on-chain blob commitment, and rule-specific
//! auxiliary data (locations, prior-batch reveals, a tree frontier, or an
//! inclusion proof). The judge re-derives the violation from those words
//! alone — it never needs the full blob — and every rule's reveal budget is
//! a constant independent of batch size, because the layout can be walked
//! from any field back to the header through count and offset words only.
//!
//! Convicting structural faults works through guided claims ([`ParseClaim`])
//! rather than replaying the whole parse: each claim isolates one word (or
//! one canonical-offset equation) whose re-check needs a bounded
//! neighborhood. [`detect`] maps a full-parse fault to the matching claim.
//!
//! The judge fails safe: missing reveals, malformed auxiliary data, or any
//! state it cannot re-derive yield an error, never a conviction.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::blob::{
    self, read_count, read_fe, Blob, BlobCommitment, BlobTree, FieldPath, Navigator,
    RecordingSource, RevealMap, Word, WordAccessError, WordReveal, WordSource,
    BRACKET_FIXED_WORDS, HEADER_FIXED_WORDS, ZERO_WORD,
};
use crate::circuits::{InputStatement, Proof, ProofBackend, ReferenceBackend};
use crate::crypto::{
    input_commitment, output_commitment_with_k, verify_signature, L1Address, Signature,
};
use crate::field::FieldElement;
use crate::l1sim::{BurnRecord, ChainState, MintRecord};
use crate::merkle::{self, AppendOnlyTree, Frontier, InclusionProof};
use crate::params::{Params, BLOB_WORDS, SIG_LEN};
use crate::replica::Replica;
use crate::txmodel::{self, CrtRef, Kind};

/// The rule catalog. Group 1 covers transaction validity, group 2 bracket
/// integrity, group 3 batch accounting. Ordering follows the catalog so the
/// lowest applicable rule sorts first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    /// Batch fails structural parsing (guided claim).
    R1a,
    /// Mint disagrees with its bridge deposit record.
    R1b,
    /// Burn's revealed preimage does not match its input commitment.
    R1c,
    /// An input membership/authorization proof fails.
    R1d,
    /// A transfer balance proof fails.
    R1e,
    /// Stored transaction hash differs from recomputation.
    R1f,
    /// A nullifier entry already present under an earlier root.
    R1g,
    /// Two equal nullifier entries inside one batch.
    R1h,
    /// Input's claimed checkpoint root differs from the referenced one.
    R1i,
    /// Bracket hash differs from the hash of member tx hashes.
    R2a,
    /// Signature count differs from the bracket's input count.
    R2b,
    /// A bracket signature fails under its input's key.
    R2c,
    /// Bracket transaction count is zero or over capacity.
    R2d,
    /// Burn payout record absent or inconsistent with the published burn.
    R3a,
    /// Payout record exists but the indexed transaction is not a burn.
    R3b,
    /// Last bracket is not a lone fee-collect.
    R3c,
    /// Fee-collect outside the lone final slot.
    R3d,
    /// Running-fee or fee-checkpoint recurrence broken.
    R3e,
    /// Fee-collect output does not commit to the header checkpoint.
    R3f,
    /// Coin root does not extend the previous root by the outputs.
    R3g,
    /// Nullifier root does not extend the previous root by the entries.
    R3h,
}

impl RuleId {
    pub const ALL: [RuleId; 21] = [
        RuleId::R1a,
        RuleId::R1b,
        RuleId::R1c,
        RuleId::R1d,
        RuleId::R1e,
        RuleId::R1f,
        RuleId::R1g,
        RuleId::R1h,
        RuleId::R1i,
        RuleId::R2a,
        RuleId::R2b,
        RuleId::R2c,
        RuleId::R2d,
        RuleId::R3a,
        RuleId::R3b,
        RuleId::R3c,
        RuleId::R3d,
        RuleId::R3e,
        RuleId::R3f,
        RuleId::R3g,
        RuleId::R3h,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RuleId::R1a => "1a",
            RuleId::R1b => "1b",
            RuleId::R1c => "1c",
            RuleId::R1d => "1d",
            RuleId::R1e => "1e",
            RuleId::R1f => "1f",
            RuleId::R1g => "1g",
            RuleId::R1h => "1h",
            RuleId::R1i => "1i",
            RuleId::R2a => "2a",
            RuleId::R2b => "2b",
            RuleId::R2c => "2c",
            RuleId::R2d => "2d",
            RuleId::R3a => "3a",
            RuleId::R3b => "3b",
            RuleId::R3c => "3c",
            RuleId::R3d => "3d",
            RuleId::R3e => "3e",
            RuleId::R3f => "3f",
            RuleId::R3g => "3g",
            RuleId::R3h => "3h",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            RuleId::R1a => "batch fails structural parsing",
            RuleId::R1b => "mint disagrees with its bridge deposit record",
            RuleId::R1c => "burn preimage does not match the input commitment",
            RuleId::R1d => "input membership/authorization proof fails",
            RuleId::R1e => "transfer balance proof fails",
            RuleId::R1f => "stored transaction hash differs from recomputation",
            RuleId::R1g => "nullifier entry already present under an earlier root",
            RuleId::R1h => "duplicate nullifier entries inside one batch",
            RuleId::R1i => "input checkpoint root differs from the referenced one",
            RuleId::R2a => "bracket hash differs from the member tx hashes",
            RuleId::R2b => "signature count differs from the input count",
            RuleId::R2c => "bracket signature fails under its input's key",
            RuleId::R2d => "bracket transaction count zero or over capacity",
            RuleId::R3a => "burn payout record absent or inconsistent",
            RuleId::R3b => "payout record indexes a non-burn transaction",
            RuleId::R3c => "last bracket is not a lone fee-collect",
            RuleId::R3d => "fee-collect outside the lone final slot",
            RuleId::R3e => "fee recurrence broken",
            RuleId::R3f => "fee-collect output does not commit to the checkpoint",
            RuleId::R3g => "coin root does not extend the previous root",
            RuleId::R3h => "nullifier root does not extend the previous root",
        }
    }

    pub fn code(self) -> u8 {
        RuleId::ALL.iter().position(|r| *r == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<RuleId> {
        RuleId::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Word reveals from an earlier batch, verified against that batch's
/// on-chain commitment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorReveals {
    pub height: u64,
    pub reveals: Vec<WordReveal>,
}

/// Where a nullifier entry sits in the accused batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryLoc {
    InputSn { bracket: u64, tx: u64, input: u64 },
    MintNonce { bracket: u64, tx: u64 },
}

/// Which stored root a prior-inclusion proof targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootLoc {
    /// The prior batch's header nullifier root.
    Header,
    /// A post-bracket nullifier root in the prior batch.
    BracketPostNrt { bracket: u64 },
}

/// One structural defect, re-derivable from a constant word neighborhood.
/// On a well-formed batch every claim evaluates to "not proven"; for every
/// possible parse fault there is a claim that convicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseClaim {
    /// Header word 0..3 malformed (roots/ck_f not canonical field
    /// elements, or the bracket count not a count word).
    HeaderField { word: u64 },
    /// Bracket offset word malformed or not equal to the canonical
    /// position (end of the previous bracket; header end for bracket 0).
    BracketOffset { bracket: u64 },
    /// Bracket fixed word 0..5 malformed.
    BracketFixed { bracket: u64, word: u64 },
    /// Transaction offset word malformed or not canonical.
    TxOffset { bracket: u64, tx: u64 },
    /// Transaction at this slot fails single-transaction parsing.
    TxParse { bracket: u64, tx: u64 },
    /// Bracket extent runs past the end of the blob.
    BracketBounds { bracket: u64 },
    /// Non-zero word in the padding after the batch.
    Padding { word: u64 },
}

/// Rule-specific auxiliary data carried by a fraud proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuxData {
    None,
    /// 1a: the guided structural claim.
    Claim(ParseClaim),
    /// Rules about one transaction.
    Tx { bracket: u64, tx: u64 },
    /// Rules about one input.
    Input { bracket: u64, tx: u64, input: u64 },
    /// 1i: the input plus reveals from the referenced batch (absent for
    /// genesis or same-batch references).
    InputRef {
        bracket: u64,
        tx: u64,
        input: u64,
        prior: Option<PriorReveals>,
    },
    /// 1h: two in-batch entry locations.
    TwoEntries { first: EntryLoc, second: EntryLoc },
    /// 1g: an entry, reveals locating a root in an earlier batch, and an
    /// inclusion proof of the entry under that root.
    PriorInclusion {
        entry: EntryLoc,
        prior: PriorReveals,
        root_at: RootLoc,
        proof: InclusionProof,
    },
    /// Rules about one bracket.
    Bracket { bracket: u64 },
    /// 2c: one signature slot.
    Signature { bracket: u64, index: u64 },
    /// 3a/3b: one (bracket, tx) payout index.
    BurnEntry { bracket: u64, tx: u64 },
    /// Header-mode continuity rules; `prior` is absent only at height 1.
    HeaderContinuity { prior: Option<PriorReveals> },
    /// 3g/3h bracket mode: a frontier whose root must equal the bracket's
    /// start root; the judge resumes it and replays the appends.
    FrontierReplay { bracket: u64, frontier: Frontier },
}

fn prior_of(aux: &AuxData) -> Option<&PriorReveals> {
    match aux {
        AuxData::InputRef { prior, .. } | AuxData::HeaderContinuity { prior } => prior.as_ref(),
        AuxData::PriorInclusion { prior, .. } => Some(prior),
        _ => None,
    }
}

/// A complete one-step fraud proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FraudProof {
    pub height: u64,
    pub rule: RuleId,
    pub reveals: Vec<WordReveal>,
    pub aux: AuxData,
}

/// Why a dispute failed. All of these leave chain state untouched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckError {
    /// No commitment stored for the accused height.
    UnknownHeight,
    /// More reveals than the rule's budget allows.
    BudgetExceeded,
    /// A reveal fails verification against the commitment.
    InvalidReveal,
    /// A word the rule needs was not revealed.
    MissingWord(u64),
    /// The revealed data does not exhibit the claimed violation.
    NotProven,
    /// Auxiliary data has the wrong shape for the rule.
    WrongAux,
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::UnknownHeight => f.write_str("no commitment at that height"),
            CheckError::BudgetExceeded => f.write_str("reveal budget exceeded"),
            CheckError::InvalidReveal => f.write_str("reveal fails against the commitment"),
            CheckError::MissingWord(w) => write!(f, "word {w} not revealed"),
            CheckError::NotProven => f.write_str("claimed violation not exhibited"),
            CheckError::WrongAux => f.write_str("auxiliary data malformed for the rule"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CheckError {}

/// What the judge may consult besides the proof: on-chain commitments and
/// bridge records. Everything else must come from reveals.
pub trait FraudContext {
    fn commitment(&self, height: u64) -> Option<BlobCommitment>;
    /// Block at which the batch was published (for deposit-ordering checks).
    fn publication_block(&self, height: u64) -> Option<u64>;
    fn mint_record(&self, nonce: u64) -> Option<MintRecord>;
    fn burn_record(&self, height: u64, bracket: u64, tx: u64) -> Option<BurnRecord>;
    /// Key the proof backend was set up with; verification never needs the
    /// trapdoor.
    fn proof_key(&self) -> [u8; 32];
}

/// Reveal cap for the prior-batch reveal list carried in auxiliary data.
pub const PRIOR_REVEAL_BUDGET: usize = 32;

/// Maximum word reveals a proof for `rule` may carry. Constant per rule:
/// locating any field costs a bounded number of count/offset hops, and the
/// per-bracket rules read at most one bracket of bounded capacity.
pub fn rule_reveal_budget(params: &Params, rule: RuleId) -> usize {
    let cap = params.bracket_capacity;
    let slots = params.m;
    // Largest transaction footprint in words (transfer with all slots used
    // and every output carrying a ciphertext).
    let max_tx = 9 * slots + 8;
    match rule {
        RuleId::R1a => max_tx + 32,
        RuleId::R1b => 24,
        RuleId::R1c => 24,
        RuleId::R1d => 24,
        RuleId::R1e => max_tx + 16,
        RuleId::R1f => max_tx + 16,
        RuleId::R1g => 16,
        RuleId::R1h => 32,
        RuleId::R1i => 16,
        RuleId::R2a => 2 * cap + 16,
        RuleId::R2b => 3 * cap + 16,
        RuleId::R2c => 3 * cap + 24,
        RuleId::R2d => 8,
        RuleId::R3a => 32,
        RuleId::R3b => 16,
        RuleId::R3c => 16,
        RuleId::R3d => 16,
        RuleId::R3e => 5 * cap + 24,
        RuleId::R3f => 16,
        RuleId::R3g => (2 * slots + 6) * cap + 24,
        RuleId::R3h => (2 * slots + 6) * cap + 24,
    }
}

/// Judges a fraud proof: `Ok(())` means the violation is proven against the
/// stored commitment. Every failure mode is an error; the judge never
/// convicts on unavailable or unverifiable data.
pub fn check(params: &Params, proof: &FraudProof, ctx: &dyn FraudContext) -> Result<(), CheckError> {
    if proof.reveals.len() > rule_reveal_budget(params, proof.rule) {
        return Err(CheckError::BudgetExceeded);
    }
    if let Some(prior) = prior_of(&proof.aux) {
        if prior.reveals.len() > PRIOR_REVEAL_BUDGET {
            return Err(CheckError::BudgetExceeded);
        }
    }
    let commitment = ctx.commitment(proof.height).ok_or(CheckError::UnknownHeight)?;
    let map = RevealMap::from_reveals(params, &commitment, &proof.reveals)
        .ok_or(CheckError::InvalidReveal)?;
    check_rule(params, proof.rule, &proof.aux, proof.height, &map, ctx)
}

/// Rule dispatch over any word source. [`check`] runs it over a verified
/// reveal map; [`detect`] runs it over the full blob through a recording
/// source to harvest the minimal reveal set.
fn check_rule(
    params: &Params,
    rule: RuleId,
    aux: &AuxData,
    height: u64,
    src: &dyn WordSource,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    let v = View { params, src };
    match (rule, aux) {
        (RuleId::R1a, AuxData::Claim(claim)) => check_1a(&v, claim),
        (RuleId::R1b, AuxData::Tx { bracket, tx }) => check_1b(&v, height, *bracket, *tx, ctx),
        (RuleId::R1c, AuxData::Tx { bracket, tx }) => check_1c(&v, *bracket, *tx),
        (RuleId::R1d, AuxData::Input { bracket, tx, input }) => {
            check_1d(&v, *bracket, *tx, *input, ctx)
        }
        (RuleId::R1e, AuxData::Tx { bracket, tx }) => check_1e(&v, *bracket, *tx, ctx),
        (RuleId::R1f, AuxData::Tx { bracket, tx }) => check_1f(&v, *bracket, *tx),
        (RuleId::R1g, AuxData::PriorInclusion { entry, prior, root_at, proof }) => {
            check_1g(&v, height, entry, prior, root_at, proof, ctx)
        }
        (RuleId::R1h, AuxData::TwoEntries { first, second }) => check_1h(&v, first, second),
        (RuleId::R1i, AuxData::InputRef { bracket, tx, input, prior }) => {
            check_1i(&v, height, *bracket, *tx, *input, prior.as_ref(), ctx)
        }
        (RuleId::R2a, AuxData::Bracket { bracket }) => check_2a(&v, *bracket),
        (RuleId::R2b, AuxData::Bracket { bracket }) => check_2b(&v, *bracket),
        (RuleId::R2c, AuxData::Signature { bracket, index }) => check_2c(&v, *bracket, *index),
        (RuleId::R2d, AuxData::Bracket { bracket }) => check_2d(&v, *bracket),
        (RuleId::R3a, AuxData::BurnEntry { bracket, tx }) => {
            check_3a(&v, height, *bracket, *tx, ctx)
        }
        (RuleId::R3b, AuxData::BurnEntry { bracket, tx }) => {
            check_3b(&v, height, *bracket, *tx, ctx)
        }
        (RuleId::R3c, AuxData::None) => check_3c(&v),
        (RuleId::R3d, AuxData::Tx { bracket, tx }) => check_3d(&v, *bracket, *tx),
        (RuleId::R3e, AuxData::Bracket { bracket }) => check_3e_bracket(&v, *bracket),
        (RuleId::R3e, AuxData::HeaderContinuity { prior }) => {
            check_3e_header(&v, height, prior.as_ref(), ctx)
        }
        (RuleId::R3f, AuxData::Tx { bracket, tx }) => check_3f(&v, *bracket, *tx),
        (RuleId::R3g, AuxData::HeaderContinuity { prior }) => {
            check_root_header(&v, height, prior.as_ref(), ctx, TreeSide::Coin)
        }
        (RuleId::R3g, AuxData::FrontierReplay { bracket, frontier }) => {
            check_root_replay(&v, *bracket, frontier, TreeSide::Coin)
        }
        (RuleId::R3h, AuxData::HeaderContinuity { prior }) => {
            check_root_header(&v, height, prior.as_ref(), ctx, TreeSide::Nullifier)
        }
        (RuleId::R3h, AuxData::FrontierReplay { bracket, frontier }) => {
            check_root_replay(&v, *bracket, frontier, TreeSide::Nullifier)
        }
        _ => Err(CheckError::WrongAux),
    }
}

// ---- word access -------------------------------------------------------

/// Word reads with judge error discipline: a word the source does not have
/// is `MissingWord`; structurally bad context words are `NotProven` (they
/// are rule 1a's business, not this rule's).
struct View<'a> {
    params: &'a Params,
    src: &'a dyn WordSource,
}

fn fail_safe(e: WordAccessError) -> CheckError {
    match e {
        WordAccessError::Missing(w) => CheckError::MissingWord(w),
        WordAccessError::Fault(_) | WordAccessError::OutOfRange => CheckError::NotProven,
    }
}

fn proven(cond: bool) -> Result<(), CheckError> {
    if cond {
        Ok(())
    } else {
        Err(CheckError::NotProven)
    }
}

impl<'a> View<'a> {
    fn nav(&self) -> Navigator<'a> {
        Navigator::new(self.params, self.src)
    }

    fn raw(&self, index: u64) -> Result<Word, CheckError> {
        if index >= BLOB_WORDS as u64 {
            return Err(CheckError::NotProven);
        }
        self.src.word(index).ok_or(CheckError::MissingWord(index))
    }

    fn at(&self, path: FieldPath) -> Result<u64, CheckError> {
        Ok(self.nav().locate(path).map_err(fail_safe)?.start)
    }

    fn word(&self, path: FieldPath) -> Result<Word, CheckError> {
        self.raw(self.at(path)?)
    }

    fn fe(&self, path: FieldPath) -> Result<FieldElement, CheckError> {
        read_fe(self.params, &self.word(path)?).ok_or(CheckError::NotProven)
    }

    fn count(&self, path: FieldPath) -> Result<u64, CheckError> {
        read_count(&self.word(path)?).ok_or(CheckError::NotProven)
    }

    fn kind(&self, bracket: u64, tx: u64) -> Result<Kind, CheckError> {
        self.nav().tx_kind(bracket, tx).map_err(fail_safe)
    }

    fn bracket_count(&self) -> Result<u64, CheckError> {
        self.nav().bracket_count().map_err(fail_safe)
    }

    /// Transaction count of a bracket, bounded by the configured capacity;
    /// oversize brackets are rule 2d's domain, so per-tx iteration rules
    /// treat them as not-proven.
    fn tx_count_capped(&self, bracket: u64) -> Result<u64, CheckError> {
        let tc = self.count(FieldPath::TxCount { bracket })?;
        if tc > self.params.bracket_capacity as u64 {
            return Err(CheckError::NotProven);
        }
        Ok(tc)
    }

    fn backend(&self, ctx: &dyn FraudContext) -> ReferenceBackend {
        ReferenceBackend::setup(ctx.proof_key(), false)
    }
}

/// Reads the value of a nullifier entry named by location. Mint nonces
/// enter the tree as plain field encodings of the nonce.
fn entry_value(v: &View, loc: &EntryLoc) -> Result<FieldElement, CheckError> {
    match *loc {
        EntryLoc::InputSn { bracket, tx, input } => v.fe(FieldPath::InputSn { bracket, tx, input }),
        EntryLoc::MintNonce { bracket, tx } => {
            if v.kind(bracket, tx)? != Kind::Mint {
                return Err(CheckError::NotProven);
            }
            let nonce = v.count(FieldPath::BodyWord { bracket, tx, word: 0 })?;
            Ok(v.params.fe(nonce))
        }
    }
}

/// Builds the verified reveal map for a prior batch named in aux data.
fn prior_map(
    params: &Params,
    ctx: &dyn FraudContext,
    prior: &PriorReveals,
    height: u64,
) -> Result<RevealMap, CheckError> {
    if prior.height == 0 || prior.height >= height {
        return Err(CheckError::WrongAux);
    }
    let commitment = ctx.commitment(prior.height).ok_or(CheckError::NotProven)?;
    RevealMap::from_reveals(params, &commitment, &prior.reveals).ok_or(CheckError::InvalidReveal)
}

// ---- helpers shared by the judge and detection harvesting ---------------

/// Final coin root a batch hands to its successor: the last bracket's
/// post-root, or the header root if the batch had no brackets.
fn final_coin_root(params: &Params, src: &dyn WordSource) -> Result<FieldElement, CheckError> {
    let v = View { params, src };
    let m = v.bracket_count()?;
    if m == 0 {
        v.fe(FieldPath::HeaderCoinRoot)
    } else {
        v.fe(FieldPath::PostCrt { bracket: m - 1 })
    }
}

fn final_nullifier_root(params: &Params, src: &dyn WordSource) -> Result<FieldElement, CheckError> {
    let v = View { params, src };
    let m = v.bracket_count()?;
    if m == 0 {
        v.fe(FieldPath::HeaderNullifierRoot)
    } else {
        v.fe(FieldPath::PostNrt { bracket: m - 1 })
    }
}

/// ck_f the successor batch must carry: this batch's final running fee,
/// plus this batch's own ck_f if no fee-collect consumed it.
fn next_ck_f(params: &Params, src: &dyn WordSource) -> Result<FieldElement, CheckError> {
    let v = View { params, src };
    let m = v.bracket_count()?;
    let ck_f = v.fe(FieldPath::HeaderCkF)?;
    if m == 0 {
        return Ok(ck_f);
    }
    let last = m - 1;
    let rf = v.count(FieldPath::RunningFee { bracket: last })?;
    let tc = v.count(FieldPath::TxCount { bracket: last })?;
    let collected = tc == 1
        && matches!(
            read_count(&v.word(FieldPath::TxKind { bracket: last, tx: 0 })?)
                .and_then(Kind::from_code),
            Some(Kind::FeeCollect)
        );
    let carried = if collected { FieldElement::ZERO } else { ck_f };
    Ok(params.fe(rf).add_mod(&carried, &params.prime))
}

/// Post-bracket coin root of a prior batch; `None` when the bracket index
/// is beyond that batch (a dangling reference).
fn prior_post_crt(
    params: &Params,
    src: &dyn WordSource,
    bracket: u64,
) -> Result<Option<FieldElement>, CheckError> {
    let v = View { params, src };
    let m = v.bracket_count()?;
    if bracket >= m {
        return Ok(None);
    }
    v.fe(FieldPath::PostCrt { bracket }).map(Some)
}

/// Nullifier root at a named location in a prior batch.
fn prior_root_at(
    params: &Params,
    src: &dyn WordSource,
    at: &RootLoc,
) -> Result<FieldElement, CheckError> {
    let v = View { params, src };
    match at {
        RootLoc::Header => v.fe(FieldPath::HeaderNullifierRoot),
        RootLoc::BracketPostNrt { bracket } => v.fe(FieldPath::PostNrt { bracket: *bracket }),
    }
}

// ---- rule 1a: guided structural claims ----------------------------------

/// Bracket extent from its start: fixed words, the last transaction's end,
/// then the signature area. `Oversize` means the walk left the blob.
enum Extent {
    End(u64),
    Oversize,
}

fn bracket_extent(v: &View, start: u64) -> Result<Extent, CheckError> {
    let word = |i: u64| -> Result<Option<Word>, CheckError> {
        if i >= BLOB_WORDS as u64 {
            return Ok(None);
        }
        match v.src.word(i) {
            Some(w) => Ok(Some(w)),
            None => Err(CheckError::MissingWord(i)),
        }
    };
    let count = |i: u64| -> Result<Option<u64>, CheckError> {
        Ok(word(i)?.map(|w| read_count(&w)).flatten())
    };
    let Some(tc) = count(start + 3)? else {
        return Err(CheckError::NotProven);
    };
    let Some(sc) = count(start + 4)? else {
        return Err(CheckError::NotProven);
    };
    if tc > BLOB_WORDS as u64 || sc > BLOB_WORDS as u64 {
        return Err(CheckError::NotProven);
    }
    let txs_end = if tc == 0 {
        start + BRACKET_FIXED_WORDS
    } else {
        let off_pos = start + BRACKET_FIXED_WORDS + tc - 1;
        if off_pos >= BLOB_WORDS as u64 {
            return Ok(Extent::Oversize);
        }
        let Some(last) = count(off_pos)? else {
            return Err(CheckError::NotProven);
        };
        if last >= BLOB_WORDS as u64 {
            return Err(CheckError::NotProven);
        }
        match blob::parse_tx_at(v.params, v.src, last) {
            Ok((_, _, end)) => end,
            Err(WordAccessError::OutOfRange) => return Ok(Extent::Oversize),
            Err(WordAccessError::Missing(w)) => return Err(CheckError::MissingWord(w)),
            Err(WordAccessError::Fault(_)) => return Err(CheckError::NotProven),
        }
    };
    Ok(Extent::End(txs_end + sc * SIG_LEN as u64))
}

/// Header bracket count, readable without faulting (claims about other
/// fields need it as context).
fn header_m(v: &View) -> Result<u64, CheckError> {
    let m = read_count(&v.raw(3)?).ok_or(CheckError::NotProven)?;
    if m > BLOB_WORDS as u64 {
        return Err(CheckError::NotProven);
    }
    Ok(m)
}

fn bracket_start_for_claim(v: &View, bracket: u64) -> Result<u64, CheckError> {
    let m = header_m(v)?;
    if bracket >= m {
        return Err(CheckError::WrongAux);
    }
    let off = read_count(&v.raw(HEADER_FIXED_WORDS + bracket)?).ok_or(CheckError::NotProven)?;
    if off >= BLOB_WORDS as u64 {
        return Err(CheckError::NotProven);
    }
    Ok(off)
}

fn check_1a(v: &View, claim: &ParseClaim) -> Result<(), CheckError> {
    match *claim {
        ParseClaim::HeaderField { word } => {
            if word > 3 {
                return Err(CheckError::WrongAux);
            }
            let w = v.raw(word)?;
            let bad = if word == 3 {
                read_count(&w).is_none_or(|m| m > BLOB_WORDS as u64)
            } else {
                read_fe(v.params, &w).is_none()
            };
            proven(bad)
        }
        ParseClaim::BracketOffset { bracket } => {
            let m = header_m(v)?;
            if bracket >= m {
                return Err(CheckError::WrongAux);
            }
            let w = v.raw(HEADER_FIXED_WORDS + bracket)?;
            let Some(off) = read_count(&w) else {
                return Ok(());
            };
            if off >= BLOB_WORDS as u64 {
                return Ok(());
            }
            let expected = if bracket == 0 {
                HEADER_FIXED_WORDS + m
            } else {
                let prev = bracket_start_for_claim(v, bracket - 1)?;
                match bracket_extent(v, prev)? {
                    Extent::End(end) => end,
                    Extent::Oversize => return Err(CheckError::NotProven),
                }
            };
            proven(off != expected)
        }
        ParseClaim::BracketFixed { bracket, word } => {
            if word > 5 {
                return Err(CheckError::WrongAux);
            }
            let start = bracket_start_for_claim(v, bracket)?;
            let w = v.raw(start + word)?;
            let bad = match word {
                0..=2 => read_fe(v.params, &w).is_none(),
                3 | 4 => read_count(&w).is_none_or(|c| c > BLOB_WORDS as u64),
                _ => read_count(&w).is_none(),
            };
            proven(bad)
        }
        ParseClaim::TxOffset { bracket, tx } => {
            let start = bracket_start_for_claim(v, bracket)?;
            let tc = read_count(&v.raw(start + 3)?).ok_or(CheckError::NotProven)?;
            if tc > BLOB_WORDS as u64 {
                return Err(CheckError::NotProven);
            }
            if tx >= tc {
                return Err(CheckError::WrongAux);
            }
            let w = v.raw(start + BRACKET_FIXED_WORDS + tx)?;
            let Some(off) = read_count(&w) else {
                return Ok(());
            };
            if off >= BLOB_WORDS as u64 {
                return Ok(());
            }
            let expected = if tx == 0 {
                start + BRACKET_FIXED_WORDS + tc
            } else {
                let prev =
                    read_count(&v.raw(start + BRACKET_FIXED_WORDS + tx - 1)?)
                        .ok_or(CheckError::NotProven)?;
                if prev >= BLOB_WORDS as u64 {
                    return Err(CheckError::NotProven);
                }
                match blob::parse_tx_at(v.params, v.src, prev) {
                    Ok((_, _, end)) => end,
                    Err(WordAccessError::Missing(w)) => return Err(CheckError::MissingWord(w)),
                    Err(_) => return Err(CheckError::NotProven),
                }
            };
            proven(off != expected)
        }
        ParseClaim::TxParse { bracket, tx } => {
            let off = v.nav().tx_start(bracket, tx).map_err(fail_safe)?;
            match blob::parse_tx_at(v.params, v.src, off) {
                Ok(_) => Err(CheckError::NotProven),
                Err(WordAccessError::Missing(w)) => Err(CheckError::MissingWord(w)),
                Err(WordAccessError::Fault(_)) | Err(WordAccessError::OutOfRange) => Ok(()),
            }
        }
        ParseClaim::BracketBounds { bracket } => {
            let start = bracket_start_for_claim(v, bracket)?;
            match bracket_extent(v, start)? {
                Extent::Oversize => Ok(()),
                Extent::End(end) => proven(end > BLOB_WORDS as u64),
            }
        }
        ParseClaim::Padding { word } => {
            let m = header_m(v)?;
            let used = if m == 0 {
                HEADER_FIXED_WORDS
            } else {
                let last = bracket_start_for_claim(v, m - 1)?;
                match bracket_extent(v, last)? {
                    Extent::End(end) => end,
                    Extent::Oversize => return Err(CheckError::NotProven),
                }
            };
            if word < used || word >= BLOB_WORDS as u64 {
                return Err(CheckError::WrongAux);
            }
            proven(v.raw(word)? != ZERO_WORD)
        }
    }
}

// ---- group 1: transaction validity --------------------------------------

fn check_1b(
    v: &View,
    height: u64,
    bracket: u64,
    tx: u64,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    if v.kind(bracket, tx)? != Kind::Mint {
        return Err(CheckError::NotProven);
    }
    let token = v.fe(FieldPath::TxToken { bracket, tx })?;
    let fee = v.count(FieldPath::TxFee { bracket, tx })?;
    let nonce = v.count(FieldPath::BodyWord { bracket, tx, word: 0 })?;
    let value = v.count(FieldPath::BodyWord { bracket, tx, word: 1 })?;
    let k = v.fe(FieldPath::BodyWord { bracket, tx, word: 2 })?;
    let c = v.fe(FieldPath::OutputC { bracket, tx, output: 0 })?;
    let published = ctx
        .publication_block(height)
        .ok_or(CheckError::UnknownHeight)?;
    let Some(rec) = ctx.mint_record(nonce) else {
        return Ok(());
    };
    if rec.token != token || rec.value != value || rec.block > published || fee != 0 {
        return Ok(());
    }
    let expected = output_commitment_with_k(
        v.params,
        rec.token,
        v.params.fe(rec.value),
        v.params.fe(rec.g),
        k,
    );
    proven(c != expected)
}

fn check_1c(v: &View, bracket: u64, tx: u64) -> Result<(), CheckError> {
    if v.kind(bracket, tx)? != Kind::Burn {
        return Err(CheckError::NotProven);
    }
    let token = v.fe(FieldPath::TxToken { bracket, tx })?;
    let value = v.count(FieldPath::BodyWord { bracket, tx, word: 0 })?;
    let coin_fee = v.count(FieldPath::BodyWord { bracket, tx, word: 1 })?;
    let pk_auth = v.fe(FieldPath::BodyWord { bracket, tx, word: 2 })?;
    let cm = v.fe(FieldPath::InputCm { bracket, tx, input: 0 })?;
    let expected = input_commitment(
        v.params,
        token,
        v.params.fe(value),
        v.params.fe(coin_fee),
        pk_auth,
    );
    proven(cm != expected)
}

fn check_1d(
    v: &View,
    bracket: u64,
    tx: u64,
    input: u64,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    let stmt = InputStatement {
        crt: v.fe(FieldPath::InputCrt { bracket, tx, input })?,
        sn: v.fe(FieldPath::InputSn { bracket, tx, input })?,
        cm: v.fe(FieldPath::InputCm { bracket, tx, input })?,
        pk_sig: v.fe(FieldPath::InputPkSig { bracket, tx, input })?,
    };
    let p = v.at(FieldPath::InputProof { bracket, tx, input })?;
    let proof = Proof::from_words(v.raw(p)?, v.raw(p + 1)?);
    proven(!v.backend(ctx).verify_input(v.params, &stmt, &proof))
}

fn check_1e(v: &View, bracket: u64, tx: u64, ctx: &dyn FraudContext) -> Result<(), CheckError> {
    if v.kind(bracket, tx)? != Kind::Transfer {
        return Err(CheckError::NotProven);
    }
    let start = v.nav().tx_start(bracket, tx).map_err(fail_safe)?;
    let (parsed, _, _) = match blob::parse_tx_at(v.params, v.src, start) {
        Ok(t) => t,
        Err(e) => return Err(fail_safe(e)),
    };
    let stmt = txmodel::transfer_statement(v.params, &parsed).ok_or(CheckError::NotProven)?;
    let proof = parsed.tx_proof.ok_or(CheckError::NotProven)?;
    proven(!v.backend(ctx).verify_tx(v.params, &stmt, &proof))
}

fn check_1f(v: &View, bracket: u64, tx: u64) -> Result<(), CheckError> {
    let start = v.nav().tx_start(bracket, tx).map_err(fail_safe)?;
    let (_, stored, end) = match blob::parse_tx_at(v.params, v.src, start) {
        Ok(t) => t,
        Err(e) => return Err(fail_safe(e)),
    };
    let mut words = Vec::with_capacity((end - start) as usize);
    for i in start..end {
        words.push(v.raw(i)?);
    }
    proven(blob::tx_hash_of_words(v.params, &words) != stored)
}

fn check_1g(
    v: &View,
    height: u64,
    entry: &EntryLoc,
    prior: &PriorReveals,
    root_at: &RootLoc,
    proof: &InclusionProof,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    let pmap = prior_map(v.params, ctx, prior, height)?;
    let root = prior_root_at(v.params, &pmap, root_at)?;
    let value = entry_value(v, entry)?;
    proven(merkle::verify(v.params, &root, &value, proof))
}

fn check_1h(v: &View, first: &EntryLoc, second: &EntryLoc) -> Result<(), CheckError> {
    if first == second {
        return Err(CheckError::WrongAux);
    }
    let a = entry_value(v, first)?;
    let b = entry_value(v, second)?;
    proven(a == b)
}

fn check_1i(
    v: &View,
    height: u64,
    bracket: u64,
    tx: u64,
    input: u64,
    prior: Option<&PriorReveals>,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    let crt = v.fe(FieldPath::InputCrt { bracket, tx, input })?;
    let ref_word = v.word(FieldPath::TxCrtRef { bracket, tx, input })?;
    let r = CrtRef::from_word(&ref_word).ok_or(CheckError::NotProven)?;
    if r == CrtRef::GENESIS {
        if prior.is_some() {
            return Err(CheckError::WrongAux);
        }
        return proven(crt != FieldElement::ZERO);
    }
    let rb = r.bracket as u64;
    if r.height == height {
        if prior.is_some() {
            return Err(CheckError::WrongAux);
        }
        // Same-batch reference: the checkpoint lives in the accused blob.
        return match v.nav().locate(FieldPath::PostCrt { bracket: rb }) {
            Ok(range) => {
                let w = v.raw(range.start)?;
                let root = read_fe(v.params, &w).ok_or(CheckError::NotProven)?;
                proven(crt != root)
            }
            // Bracket index beyond this batch: dangling by construction.
            Err(WordAccessError::OutOfRange) => Ok(()),
            Err(e) => Err(fail_safe(e)),
        };
    }
    if r.height > height {
        // References into the future can never have been valid.
        return Ok(());
    }
    match ctx.commitment(r.height) {
        // Dangling height: nothing was ever published there.
        None => Ok(()),
        Some(_) => {
            let prior = prior.ok_or(CheckError::WrongAux)?;
            if prior.height != r.height {
                return Err(CheckError::WrongAux);
            }
            let pmap = prior_map(v.params, ctx, prior, height)?;
            match prior_post_crt(v.params, &pmap, rb)? {
                None => Ok(()),
                Some(root) => proven(crt != root),
            }
        }
    }
}

// ---- group 2: bracket integrity ------------------------------------------

fn check_2a(v: &View, bracket: u64) -> Result<(), CheckError> {
    let stored = v.fe(FieldPath::BracketHash { bracket })?;
    let tc = v.tx_count_capped(bracket)?;
    let mut hashes = Vec::with_capacity(tc as usize);
    for tx in 0..tc {
        hashes.push(v.fe(FieldPath::TxHashWord { bracket, tx })?);
    }
    proven(stored != txmodel::bracket_hash_of(v.params, &hashes))
}

fn check_2b(v: &View, bracket: u64) -> Result<(), CheckError> {
    let sc = v.count(FieldPath::SigCount { bracket })?;
    let tc = v.tx_count_capped(bracket)?;
    let mut total: u128 = 0;
    for tx in 0..tc {
        let ni = v.count(FieldPath::TxInCount { bracket, tx })?;
        if ni > BLOB_WORDS as u64 {
            return Err(CheckError::NotProven);
        }
        total += ni as u128;
    }
    proven(sc as u128 != total)
}

fn check_2c(v: &View, bracket: u64, index: u64) -> Result<(), CheckError> {
    let sc = v.count(FieldPath::SigCount { bracket })?;
    if index >= sc {
        return Err(CheckError::NotProven);
    }
    let tc = v.tx_count_capped(bracket)?;
    let mut acc: u64 = 0;
    for tx in 0..tc {
        let ni = v.count(FieldPath::TxInCount { bracket, tx })?;
        if ni > BLOB_WORDS as u64 {
            return Err(CheckError::NotProven);
        }
        if index < acc + ni {
            let input = index - acc;
            let pk = v.fe(FieldPath::InputPkSig { bracket, tx, input })?;
            let hash = v.fe(FieldPath::BracketHash { bracket })?;
            let s = v.at(FieldPath::SignatureAt { bracket, index })?;
            let sig = Signature::from_words(v.raw(s)?, v.raw(s + 1)?);
            return proven(!verify_signature(&pk, &hash.to_be_bytes(), &sig));
        }
        acc += ni;
    }
    // More signatures than inputs: a count mismatch, which is rule 2b.
    Err(CheckError::NotProven)
}

fn check_2d(v: &View, bracket: u64) -> Result<(), CheckError> {
    let tc = v.count(FieldPath::TxCount { bracket })?;
    proven(tc == 0 || tc > v.params.bracket_capacity as u64)
}

// ---- group 3: batch accounting -------------------------------------------

fn check_3a(
    v: &View,
    height: u64,
    bracket: u64,
    tx: u64,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    if v.kind(bracket, tx)? != Kind::Burn {
        return Err(CheckError::NotProven);
    }
    let token = v.fe(FieldPath::TxToken { bracket, tx })?;
    let fee = v.count(FieldPath::TxFee { bracket, tx })?;
    let value = v.count(FieldPath::BodyWord { bracket, tx, word: 0 })?;
    let coin_fee = v.count(FieldPath::BodyWord { bracket, tx, word: 1 })?;
    let ben_word = v.word(FieldPath::BodyWord { bracket, tx, word: 3 })?;
    let beneficiary = L1Address::from_word(&ben_word).ok_or(CheckError::NotProven)?;
    let Some(rec) = ctx.burn_record(height, bracket, tx) else {
        // A published burn with no payout registered can never be redeemed.
        return Ok(());
    };
    let Some(g) = coin_fee.checked_sub(fee) else {
        // Fee exceeding the coin fee leaves no valid payout amount.
        return Ok(());
    };
    proven(rec.token != token || rec.value != value || rec.g != g || rec.beneficiary != beneficiary)
}

fn check_3b(
    v: &View,
    height: u64,
    bracket: u64,
    tx: u64,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    if ctx.burn_record(height, bracket, tx).is_none() {
        return Err(CheckError::NotProven);
    }
    let m = v.bracket_count()?;
    if bracket >= m {
        return Ok(());
    }
    let tc = v.count(FieldPath::TxCount { bracket })?;
    if tx >= tc {
        return Ok(());
    }
    let w = v.word(FieldPath::TxKind { bracket, tx })?;
    match read_count(&w).and_then(Kind::from_code) {
        Some(Kind::Burn) => Err(CheckError::NotProven),
        // Not a well-formed burn at the indexed slot: the record points at
        // nothing redeemable.
        _ => Ok(()),
    }
}

fn check_3c(v: &View) -> Result<(), CheckError> {
    let m = v.bracket_count()?;
    if m == 0 {
        return Ok(());
    }
    let bracket = m - 1;
    let tc = v.count(FieldPath::TxCount { bracket })?;
    if tc != 1 {
        return Ok(());
    }
    let w = v.word(FieldPath::TxKind { bracket, tx: 0 })?;
    match read_count(&w).and_then(Kind::from_code) {
        Some(Kind::FeeCollect) => Err(CheckError::NotProven),
        _ => Ok(()),
    }
}

fn check_3d(v: &View, bracket: u64, tx: u64) -> Result<(), CheckError> {
    if v.kind(bracket, tx)? != Kind::FeeCollect {
        return Err(CheckError::NotProven);
    }
    let m = v.bracket_count()?;
    let tc = v.count(FieldPath::TxCount { bracket })?;
    proven(bracket + 1 != m || tx != 0 || tc != 1)
}

fn check_3e_bracket(v: &View, bracket: u64) -> Result<(), CheckError> {
    let rf = v.count(FieldPath::RunningFee { bracket })?;
    let base = if bracket == 0 {
        0
    } else {
        v.count(FieldPath::RunningFee { bracket: bracket - 1 })?
    };
    let tc = v.tx_count_capped(bracket)?;
    let mut sum: u128 = base as u128;
    for tx in 0..tc {
        sum += v.count(FieldPath::TxFee { bracket, tx })? as u128;
    }
    proven(rf as u128 != sum)
}

fn check_3e_header(
    v: &View,
    height: u64,
    prior: Option<&PriorReveals>,
    ctx: &dyn FraudContext,
) -> Result<(), CheckError> {
    let ck_f = v.fe(FieldPath::HeaderCkF)?;
    if height == 1 {
        if prior.is_some() {
            return Err(CheckError::WrongAux);
        }
        return proven(!ck_f.is_zero());
    }
    let prior = prior.ok_or(CheckError::WrongAux)?;
    if prior.height != height - 1 {
        return Err(CheckError::WrongAux);
    }
    let pmap = prior_map(v.params, ctx, prior, height)?;
    let expected = next_ck_f(v.params, &pmap)?;
    proven(ck_f != expected)
}

fn check_3f(v: &View, bracket: u64, tx: u64) -> Result<(), CheckError> {
    if v.kind(bracket, tx)? != Kind::FeeCollect {
        return Err(CheckError::NotProven);
    }
    let fee = v.count(FieldPath::TxFee { bracket, tx })?;
    let k = v.fe(FieldPath::BodyWord { bracket, tx, word: 0 })?;
    let c = v.fe(FieldPath::OutputC { bracket, tx, output: 0 })?;
    let ck_f = v.fe(FieldPath::HeaderCkF)?;
    let expected =
        output_commitment_with_k(v.params, FieldElement::ZERO, FieldElement::ZERO, ck_f, k);
    proven(fee != 0 || c != expected)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TreeSide {
    Coin,
    Nullifier,
}

fn check_root_header(
    v: &View,
    height: u64,
    prior: Option<&PriorReveals>,
    ctx: &dyn FraudContext,
    side: TreeSide,
) -> Result<(), CheckError> {
    let stored = match side {
        TreeSide::Coin => v.fe(FieldPath::HeaderCoinRoot)?,
        TreeSide::Nullifier => v.fe(FieldPath::HeaderNullifierRoot)?,
    };
    if height == 1 {
        if prior.is_some() {
            return Err(CheckError::WrongAux);
        }
        let empty = AppendOnlyTree::new(v.params.depth).root(v.params);
        return proven(stored != empty);
    }
    let prior = prior.ok_or(CheckError::WrongAux)?;
    if prior.height != height - 1 {
        return Err(CheckError::WrongAux);
    }
    let pmap = prior_map(v.params, ctx, prior, height)?;
    let expected = match side {
        TreeSide::Coin => final_coin_root(v.params, &pmap)?,
        TreeSide::Nullifier => final_nullifier_root(v.params, &pmap)?,
    };
    proven(stored != expected)
}

fn check_root_replay(
    v: &View,
    bracket: u64,
    frontier: &Frontier,
    side: TreeSide,
) -> Result<(), CheckError> {
    let (start_path, post_path): (FieldPath, FieldPath) = match side {
        TreeSide::Coin => (
            if bracket == 0 {
                FieldPath::HeaderCoinRoot
            } else {
                FieldPath::PostCrt { bracket: bracket - 1 }
            },
            FieldPath::PostCrt { bracket },
        ),
        TreeSide::Nullifier => (
            if bracket == 0 {
                FieldPath::HeaderNullifierRoot
            } else {
                FieldPath::PostNrt { bracket: bracket - 1 }
            },
            FieldPath::PostNrt { bracket },
        ),
    };
    let start = v.fe(start_path)?;
    let stored = v.fe(post_path)?;
    // The frontier authenticates itself: its root must equal the claimed
    // start root, after which resumed appends reproduce honest evolution.
    if frontier.depth() != v.params.depth || frontier.root(v.params) != start {
        return Err(CheckError::WrongAux);
    }
    let mut tree = AppendOnlyTree::resume(frontier.clone()).map_err(|_| CheckError::WrongAux)?;
    let tc = v.tx_count_capped(bracket)?;
    for tx in 0..tc {
        match side {
            TreeSide::Coin => {
                let no = v.count(FieldPath::TxOutCount { bracket, tx })?;
                if no > v.params.m as u64 {
                    return Err(CheckError::NotProven);
                }
                for output in 0..no {
                    let c = v.fe(FieldPath::OutputC { bracket, tx, output })?;
                    tree.append(v.params, &c).map_err(|_| CheckError::NotProven)?;
                }
            }
            TreeSide::Nullifier => {
                let ni = v.count(FieldPath::TxInCount { bracket, tx })?;
                if ni > v.params.m as u64 {
                    return Err(CheckError::NotProven);
                }
                for input in 0..ni {
                    let sn = v.fe(FieldPath::InputSn { bracket, tx, input })?;
                    tree.append(v.params, &sn).map_err(|_| CheckError::NotProven)?;
                }
                if v.kind(bracket, tx)? == Kind::Mint {
                    let nonce = v.count(FieldPath::BodyWord { bracket, tx, word: 0 })?;
                    tree.append(v.params, &v.params.fe(nonce))
                        .map_err(|_| CheckError::NotProven)?;
                }
            }
        }
    }
    proven(tree.root(v.params) != stored)
}

// ---- detection -----------------------------------------------------------

/// Maps the first structural fault of a full parse to a guided claim. The
/// walk mirrors the parser but tracks coordinates; returns `None` on a
/// well-formed blob.
fn derive_claim(params: &Params, blob: &Blob) -> Option<ParseClaim> {
    let v = View { params, src: blob };
    for word in 0..3 {
        if read_fe(params, &blob.word(word)).is_none() {
            return Some(ParseClaim::HeaderField { word });
        }
    }
    let m = match read_count(&blob.word(3)) {
        Some(m) if m <= BLOB_WORDS as u64 => m,
        _ => return Some(ParseClaim::HeaderField { word: 3 }),
    };
    let mut expected = HEADER_FIXED_WORDS + m;
    for bracket in 0..m {
        let off = match read_count(&blob.word(HEADER_FIXED_WORDS + bracket)) {
            Some(o) if o < BLOB_WORDS as u64 => o,
            _ => return Some(ParseClaim::BracketOffset { bracket }),
        };
        if off != expected {
            return Some(ParseClaim::BracketOffset { bracket });
        }
        let start = off;
        for word in 0..3 {
            if read_fe(params, &blob.word(start + word)).is_none() {
                return Some(ParseClaim::BracketFixed { bracket, word });
            }
        }
        let tc = match read_count(&blob.word(start + 3)) {
            Some(c) if c <= BLOB_WORDS as u64 => c,
            _ => return Some(ParseClaim::BracketFixed { bracket, word: 3 }),
        };
        let sc = match read_count(&blob.word(start + 4)) {
            Some(c) if c <= BLOB_WORDS as u64 => c,
            _ => return Some(ParseClaim::BracketFixed { bracket, word: 4 }),
        };
        if read_count(&blob.word(start + 5)).is_none() {
            return Some(ParseClaim::BracketFixed { bracket, word: 5 });
        }
        let mut tx_expected = start + BRACKET_FIXED_WORDS + tc;
        if tx_expected >= BLOB_WORDS as u64 {
            return Some(ParseClaim::BracketBounds { bracket });
        }
        for tx in 0..tc {
            let toff = match read_count(&blob.word(start + BRACKET_FIXED_WORDS + tx)) {
                Some(o) if o < BLOB_WORDS as u64 => o,
                _ => return Some(ParseClaim::TxOffset { bracket, tx }),
            };
            if toff != tx_expected {
                return Some(ParseClaim::TxOffset { bracket, tx });
            }
            match blob::parse_tx_at(params, v.src, toff) {
                Ok((_, _, end)) => tx_expected = end,
                Err(WordAccessError::OutOfRange) => {
                    return Some(ParseClaim::TxParse { bracket, tx })
                }
                Err(_) => return Some(ParseClaim::TxParse { bracket, tx }),
            }
        }
        expected = tx_expected + sc * SIG_LEN as u64;
        if expected > BLOB_WORDS as u64 {
            return Some(ParseClaim::BracketBounds { bracket });
        }
    }
    (expected..BLOB_WORDS as u64)
        .find(|w| blob.word(*w) != ZERO_WORD)
        .map(|word| ParseClaim::Padding { word })
}

/// Runs a candidate rule over the blob through a recording source; if the
/// violation holds, harvests exactly the touched words as reveals.
fn try_rule(
    params: &Params,
    height: u64,
    blob: &Blob,
    tree: &BlobTree,
    ctx: &dyn FraudContext,
    rule: RuleId,
    aux: AuxData,
) -> Option<FraudProof> {
    let rec = RecordingSource::new(blob);
    check_rule(params, rule, &aux, height, &rec, ctx).ok()?;
    let reveals = tree.reveal_many(&rec.touched())?;
    debug_assert!(reveals.len() <= rule_reveal_budget(params, rule));
    Some(FraudProof { height, rule, reveals, aux })
}

/// Harvests prior-batch reveals by replaying `probe`'s reads over the prior
/// blob through a recording source.
fn harvest_prior(
    params: &Params,
    chain: &ChainState,
    prior_height: u64,
    probe: impl Fn(&dyn WordSource),
) -> Option<PriorReveals> {
    let pblob = chain.blobs.get(&prior_height)?;
    let rec = RecordingSource::new(pblob);
    probe(&rec);
    let tree = BlobTree::new(params, pblob);
    let reveals = tree.reveal_many(&rec.touched())?;
    Some(PriorReveals { height: prior_height, reveals })
}

/// Scans one published batch for violations of every rule, returning a
/// verified fraud proof per finding (each candidate is re-judged through
/// [`check_rule`] before being emitted, so an honest batch yields nothing).
///
/// `replica` must hold the honest replay state as of the end of
/// `height - 1`; it supplies frontier snapshots for the root-replay rules
/// and the nullifier history for prior-membership proofs.
pub fn detect(
    params: &Params,
    height: u64,
    chain: &ChainState,
    replica: &Replica,
) -> Vec<FraudProof> {
    let Some(blob) = chain.blobs.get(&height) else {
        return Vec::new();
    };
    let tree = BlobTree::new(params, blob);
    let ctx: &dyn FraudContext = chain;
    let mut found = Vec::new();

    let parsed = match blob::parse_blob(params, blob) {
        Ok(p) => p,
        Err(_) => {
            let claim = derive_claim(params, blob)
                .expect("a failing parse always has a matching claim");
            found.extend(try_rule(
                params,
                height,
                blob,
                &tree,
                ctx,
                RuleId::R1a,
                AuxData::Claim(claim),
            ));
            // With broken structure nothing deeper can be located reliably.
            return found;
        }
    };
    if let Some(claim) = derive_claim(params, blob) {
        // Padding violations parse but fail strict blob equality.
        found.extend(try_rule(
            params,
            height,
            blob,
            &tree,
            ctx,
            RuleId::R1a,
            AuxData::Claim(claim),
        ));
    }

    // Header-continuity candidates (3e/3g/3h header mode).
    let header_prior = |probe: &dyn Fn(&dyn WordSource)| -> Option<Option<PriorReveals>> {
        if height == 1 {
            Some(None)
        } else {
            harvest_prior(params, chain, height - 1, probe).map(Some)
        }
    };
    if let Some(prior) = header_prior(&|src| {
        let _ = next_ck_f(params, src);
    }) {
        found.extend(try_rule(
            params,
            height,
            blob,
            &tree,
            ctx,
            RuleId::R3e,
            AuxData::HeaderContinuity { prior },
        ));
    }
    if let Some(prior) = header_prior(&|src| {
        let _ = final_coin_root(params, src);
    }) {
        found.extend(try_rule(
            params,
            height,
            blob,
            &tree,
            ctx,
            RuleId::R3g,
            AuxData::HeaderContinuity { prior },
        ));
    }
    if let Some(prior) = header_prior(&|src| {
        let _ = final_nullifier_root(params, src);
    }) {
        found.extend(try_rule(
            params,
            height,
            blob,
            &tree,
            ctx,
            RuleId::R3h,
            AuxData::HeaderContinuity { prior },
        ));
    }

    found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R3c, AuxData::None));

    // Per-bracket integrity and accounting, with a scratch replay for the
    // root rules. The scratch only advances when the replica is in step.
    let replay_ok = replica.height + 1 == height;
    let mut scratch = replica.clone();
    for (b, pb) in parsed.brackets.iter().enumerate() {
        let b = b as u64;
        for rule in [RuleId::R2d, RuleId::R2a, RuleId::R2b] {
            found.extend(try_rule(params, height, blob, &tree, ctx, rule, AuxData::Bracket { bracket: b }));
        }
        found.extend(try_rule(
            params,
            height,
            blob,
            &tree,
            ctx,
            RuleId::R3e,
            AuxData::Bracket { bracket: b },
        ));
        let input_total: usize = pb.bracket.txs.iter().map(|t| t.inputs.len()).sum();
        for index in 0..pb.bracket.signatures.len().min(input_total) {
            found.extend(try_rule(
                params,
                height,
                blob,
                &tree,
                ctx,
                RuleId::R2c,
                AuxData::Signature { bracket: b, index: index as u64 },
            ));
        }
        if replay_ok {
            let claimed_start_crt = if b == 0 {
                parsed.header.coin_root
            } else {
                parsed.brackets[b as usize - 1].bracket.post_crt
            };
            let claimed_start_nrt = if b == 0 {
                parsed.header.nullifier_root
            } else {
                parsed.brackets[b as usize - 1].bracket.post_nrt
            };
            let fc = scratch.coin_tree.snapshot_frontier();
            if fc.root(params) == claimed_start_crt {
                found.extend(try_rule(
                    params,
                    height,
                    blob,
                    &tree,
                    ctx,
                    RuleId::R3g,
                    AuxData::FrontierReplay { bracket: b, frontier: fc },
                ));
            }
            let fn_ = scratch.nullifier_tree.snapshot_frontier();
            if fn_.root(params) == claimed_start_nrt {
                found.extend(try_rule(
                    params,
                    height,
                    blob,
                    &tree,
                    ctx,
                    RuleId::R3h,
                    AuxData::FrontierReplay { bracket: b, frontier: fn_ },
                ));
            }
            for tx in &pb.bracket.txs {
                for out in &tx.outputs {
                    let _ = scratch.coin_tree.append(params, &out.c);
                }
                for entry in tx.nullifier_entries(params) {
                    let _ = scratch.nullifier_tree.append(params, &entry);
                }
            }
        }

        for (t, tx) in pb.bracket.txs.iter().enumerate() {
            let t = t as u64;
            let at = AuxData::Tx { bracket: b, tx: t };
            found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R1f, at.clone()));
            match tx.kind() {
                Kind::Mint => {
                    found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R1b, at));
                }
                Kind::Burn => {
                    found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R1c, at));
                    found.extend(try_rule(
                        params,
                        height,
                        blob,
                        &tree,
                        ctx,
                        RuleId::R3a,
                        AuxData::BurnEntry { bracket: b, tx: t },
                    ));
                }
                Kind::Transfer => {
                    found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R1e, at));
                }
                Kind::FeeCollect => {
                    found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R3f, at.clone()));
                    found.extend(try_rule(params, height, blob, &tree, ctx, RuleId::R3d, at));
                }
            }
            for (i, input) in tx.inputs.iter().enumerate() {
                let i = i as u64;
                found.extend(try_rule(
                    params,
                    height,
                    blob,
                    &tree,
                    ctx,
                    RuleId::R1d,
                    AuxData::Input { bracket: b, tx: t, input: i },
                ));
                let r = input.crt_ref;
                let prior = if r == CrtRef::GENESIS || r.height >= height {
                    Some(None)
                } else if chain.commitment(r.height).is_none() {
                    Some(None)
                } else {
                    harvest_prior(params, chain, r.height, |src| {
                        let _ = prior_post_crt(params, src, r.bracket.max(0) as u64);
                    })
                    .map(Some)
                };
                if let Some(prior) = prior {
                    found.extend(try_rule(
                        params,
                        height,
                        blob,
                        &tree,
                        ctx,
                        RuleId::R1i,
                        AuxData::InputRef { bracket: b, tx: t, input: i, prior },
                    ));
                }
            }
        }
    }

    // Nullifier entries: in-batch duplicates (1h) and membership under an
    // earlier root (1g).
    let mut entries: Vec<(FieldElement, EntryLoc)> = Vec::new();
    for (b, pb) in parsed.brackets.iter().enumerate() {
        let b = b as u64;
        for (t, tx) in pb.bracket.txs.iter().enumerate() {
            let t = t as u64;
            for (i, input) in tx.inputs.iter().enumerate() {
                entries.push((input.sn, EntryLoc::InputSn { bracket: b, tx: t, input: i as u64 }));
            }
            if let txmodel::TxBody::Mint(m) = &tx.body {
                entries.push((params.fe(m.nonce), EntryLoc::MintNonce { bracket: b, tx: t }));
            }
        }
    }
    let mut seen: BTreeMap<[u8; 32], EntryLoc> = BTreeMap::new();
    for (value, loc) in &entries {
        if let Some(first) = seen.get(&value.to_be_bytes()) {
            found.extend(try_rule(
                params,
                height,
                blob,
                &tree,
                ctx,
                RuleId::R1h,
                AuxData::TwoEntries { first: *first, second: *loc },
            ));
        } else {
            seen.insert(value.to_be_bytes(), *loc);
        }
    }
    for (value, loc) in &entries {
        let Some((ph, leaf)) = replica.nullifier_first_seen(value) else {
            continue;
        };
        let Some((_, proof)) = replica.nullifier_proof_at(params, ph, leaf) else {
            continue;
        };
        let Some(last_bracket) = replica.last_bracket_of(ph) else {
            continue;
        };
        let root_at = RootLoc::BracketPostNrt { bracket: last_bracket };
        let Some(prior) = harvest_prior(params, chain, ph, |src| {
            let _ = prior_root_at(params, src, &root_at);
        }) else {
            continue;
        };
        found.extend(try_rule(
            params,
            height,
            blob,
            &tree,
            ctx,
            RuleId::R1g,
            AuxData::PriorInclusion { entry: *loc, prior, root_at, proof },
        ));
    }

    // Payout records pointing at non-burns (3b).
    if let Some(burns) = chain.inbox.burn_data.get(&height) {
        for &(b, t) in burns.keys() {
            found.extend(try_rule(
                params,
                height,
                blob,
                &tree,
                ctx,
                RuleId::R3b,
                AuxData::BurnEntry { bracket: b, tx: t },
            ));
        }
    }

    found
}

// ---- canonical serialization ---------------------------------------------

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.buf.len() {
            return None;
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_be_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_be_bytes(self.take(8)?.try_into().ok()?))
    }

    fn word(&mut self) -> Option<Word> {
        self.take(32)?.try_into().ok()
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn put_reveals(out: &mut Vec<u8>, reveals: &[WordReveal]) {
    out.extend_from_slice(&(reveals.len() as u32).to_be_bytes());
    for r in reveals {
        out.extend_from_slice(&r.index.to_be_bytes());
        out.extend_from_slice(&r.word);
        out.push(r.path.len() as u8);
        for fe in &r.path {
            out.extend_from_slice(&fe.to_be_bytes());
        }
    }
}

fn get_reveals(params: &Params, r: &mut ByteReader) -> Option<Vec<WordReveal>> {
    let n = r.u32()? as usize;
    if n > BLOB_WORDS {
        return None;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let index = r.u64()?;
        let word = r.word()?;
        let path_len = r.u8()? as usize;
        let mut path = Vec::with_capacity(path_len);
        for _ in 0..path_len {
            path.push(read_fe(params, &r.word()?)?);
        }
        out.push(WordReveal { index, word, path });
    }
    Some(out)
}

fn put_prior(out: &mut Vec<u8>, prior: &Option<PriorReveals>) {
    match prior {
        None => out.push(0),
        Some(p) => {
            out.push(1);
            out.extend_from_slice(&p.height.to_be_bytes());
            put_reveals(out, &p.reveals);
        }
    }
}

fn get_prior(params: &Params, r: &mut ByteReader) -> Option<Option<PriorReveals>> {
    match r.u8()? {
        0 => Some(None),
        1 => {
            let height = r.u64()?;
            let reveals = get_reveals(params, r)?;
            Some(Some(PriorReveals { height, reveals }))
        }
        _ => None,
    }
}

fn put_entry_loc(out: &mut Vec<u8>, loc: &EntryLoc) {
    match *loc {
        EntryLoc::InputSn { bracket, tx, input } => {
            out.push(0);
            out.extend_from_slice(&bracket.to_be_bytes());
            out.extend_from_slice(&tx.to_be_bytes());
            out.extend_from_slice(&input.to_be_bytes());
        }
        EntryLoc::MintNonce { bracket, tx } => {
            out.push(1);
            out.extend_from_slice(&bracket.to_be_bytes());
            out.extend_from_slice(&tx.to_be_bytes());
        }
    }
}

fn get_entry_loc(r: &mut ByteReader) -> Option<EntryLoc> {
    match r.u8()? {
        0 => Some(EntryLoc::InputSn { bracket: r.u64()?, tx: r.u64()?, input: r.u64()? }),
        1 => Some(EntryLoc::MintNonce { bracket: r.u64()?, tx: r.u64()? }),
        _ => None,
    }
}

impl FraudProof {
    /// Canonical byte encoding (big-endian, length-prefixed lists).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.rule.code());
        out.extend_from_slice(&self.height.to_be_bytes());
        put_reveals(&mut out, &self.reveals);
        match &self.aux {
            AuxData::None => out.push(0),
            AuxData::Claim(claim) => {
                out.push(1);
                match *claim {
                    ParseClaim::HeaderField { word } => {
                        out.push(0);
                        out.extend_from_slice(&word.to_be_bytes());
                    }
                    ParseClaim::BracketOffset { bracket } => {
                        out.push(1);
                        out.extend_from_slice(&bracket.to_be_bytes());
                    }
                    ParseClaim::BracketFixed { bracket, word } => {
                        out.push(2);
                        out.extend_from_slice(&bracket.to_be_bytes());
                        out.extend_from_slice(&word.to_be_bytes());
                    }
                    ParseClaim::TxOffset { bracket, tx } => {
                        out.push(3);
                        out.extend_from_slice(&bracket.to_be_bytes());
                        out.extend_from_slice(&tx.to_be_bytes());
                    }
                    ParseClaim::TxParse { bracket, tx } => {
                        out.push(4);
                        out.extend_from_slice(&bracket.to_be_bytes());
                        out.extend_from_slice(&tx.to_be_bytes());
                    }
                    ParseClaim::BracketBounds { bracket } => {
                        out.push(5);
                        out.extend_from_slice(&bracket.to_be_bytes());
                    }
                    ParseClaim::Padding { word } => {
                        out.push(6);
                        out.extend_from_slice(&word.to_be_bytes());
                    }
                }
            }
            AuxData::Tx { bracket, tx } => {
                out.push(2);
                out.extend_from_slice(&bracket.to_be_bytes());
                out.extend_from_slice(&tx.to_be_bytes());
            }
            AuxData::Input { bracket, tx, input } => {
                out.push(3);
                out.extend_from_slice(&bracket.to_be_bytes());
                out.extend_from_slice(&tx.to_be_bytes());
                out.extend_from_slice(&input.to_be_bytes());
            }
            AuxData::InputRef { bracket, tx, input, prior } => {
                out.push(4);
                out.extend_from_slice(&bracket.to_be_bytes());
                out.extend_from_slice(&tx.to_be_bytes());
                out.extend_from_slice(&input.to_be_bytes());
                put_prior(&mut out, prior);
            }
            AuxData::TwoEntries { first, second } => {
                out.push(5);
                put_entry_loc(&mut out, first);
                put_entry_loc(&mut out, second);
            }
            AuxData::PriorInclusion { entry, prior, root_at, proof } => {
                out.push(6);
                put_entry_loc(&mut out, entry);
                put_prior(&mut out, &Some(prior.clone()));
                match *root_at {
                    RootLoc::Header => out.push(0),
                    RootLoc::BracketPostNrt { bracket } => {
                        out.push(1);
                        out.extend_from_slice(&bracket.to_be_bytes());
                    }
                }
                let bytes = proof.to_bytes();
                out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
                out.extend_from_slice(&bytes);
            }
            AuxData::Bracket { bracket } => {
                out.push(7);
                out.extend_from_slice(&bracket.to_be_bytes());
            }
            AuxData::Signature { bracket, index } => {
                out.push(8);
                out.extend_from_slice(&bracket.to_be_bytes());
                out.extend_from_slice(&index.to_be_bytes());
            }
            AuxData::BurnEntry { bracket, tx } => {
                out.push(9);
                out.extend_from_slice(&bracket.to_be_bytes());
                out.extend_from_slice(&tx.to_be_bytes());
            }
            AuxData::HeaderContinuity { prior } => {
                out.push(10);
                put_prior(&mut out, prior);
            }
            AuxData::FrontierReplay { bracket, frontier } => {
                out.push(11);
                out.extend_from_slice(&bracket.to_be_bytes());
                let bytes = frontier.to_bytes();
                out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
                out.extend_from_slice(&bytes);
            }
        }
        out
    }

    /// Parses the canonical encoding; `None` on any malformation or
    /// trailing bytes.
    pub fn from_bytes(params: &Params, bytes: &[u8]) -> Option<FraudProof> {
        let mut r = ByteReader { buf: bytes, pos: 0 };
        let rule = RuleId::from_code(r.u8()?)?;
        let height = r.u64()?;
        let reveals = get_reveals(params, &mut r)?;
        let aux = match r.u8()? {
            0 => AuxData::None,
            1 => AuxData::Claim(match r.u8()? {
                0 => ParseClaim::HeaderField { word: r.u64()? },
                1 => ParseClaim::BracketOffset { bracket: r.u64()? },
                2 => ParseClaim::BracketFixed { bracket: r.u64()?, word: r.u64()? },
                3 => ParseClaim::TxOffset { bracket: r.u64()?, tx: r.u64()? },
                4 => ParseClaim::TxParse { bracket: r.u64()?, tx: r.u64()? },
                5 => ParseClaim::BracketBounds { bracket: r.u64()? },
                6 => ParseClaim::Padding { word: r.u64()? },
                _ => return None,
            }),
            2 => AuxData::Tx { bracket: r.u64()?, tx: r.u64()? },
            3 => AuxData::Input { bracket: r.u64()?, tx: r.u64()?, input: r.u64()? },
            4 => AuxData::InputRef {
                bracket: r.u64()?,
                tx: r.u64()?,
                input: r.u64()?,
                prior: get_prior(params, &mut r)?,
            },
            5 => AuxData::TwoEntries {
                first: get_entry_loc(&mut r)?,
                second: get_entry_loc(&mut r)?,
            },
            6 => {
                let entry = get_entry_loc(&mut r)?;
                let prior = get_prior(params, &mut r)??;
                let root_at = match r.u8()? {
                    0 => RootLoc::Header,
                    1 => RootLoc::BracketPostNrt { bracket: r.u64()? },
                    _ => return None,
                };
                let len = r.u32()? as usize;
                let proof = InclusionProof::from_bytes(params, params.depth, r.take(len)?)?;
                AuxData::PriorInclusion { entry, prior, root_at, proof }
            }
            7 => AuxData::Bracket { bracket: r.u64()? },
            8 => AuxData::Signature { bracket: r.u64()?, index: r.u64()? },
            9 => AuxData::BurnEntry { bracket: r.u64()?, tx: r.u64()? },
            10 => AuxData::HeaderContinuity { prior: get_prior(params, &mut r)? },
            11 => {
                let bracket = r.u64()?;
                let len = r.u32()? as usize;
                let frontier = Frontier::from_bytes(params, params.depth, r.take(len)?).ok()?;
                AuxData::FrontierReplay { bracket, frontier }
            }
            _ => return None,
        };
        if !r.done() {
            return None;
        }
        Some(FraudProof { height, rule, reveals, aux })
    }
}
