//! Deterministic simulated L1: a block counter, native and token ledgers,
//! and the four protocol contracts (bridge-in, inbox, judge, bridge-out)
//! as explicit state machines.
//!
//! Every public entry point is atomic: a failing call restores the chain
//! to a bit-identical snapshot. Execution is totally ordered, one call at
//! a time — the harness owns the only scheduler.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::blob::{commit, Blob, BlobCommitment};
use crate::crypto::L1Address;
use crate::field::FieldElement;
use crate::fraud::{self, FraudProof, RuleId};
use crate::params::Params;

/// Token custody for deposits and burn payouts.
pub const BRIDGE_ADDRESS: L1Address = L1Address(*b"calyx/bridge\0\0\0\0\0\0\0\0");
/// Native custody for operator stakes.
pub const JUDGE_ADDRESS: L1Address = L1Address(*b"calyx/judge\0\0\0\0\0\0\0\0\0");

/// Commitment value the first batch must name as its predecessor.
pub const GENESIS_COMMITMENT: BlobCommitment = BlobCommitment(FieldElement::ZERO);

/// Who is invoking a contract entry point. Contract-to-contract calls are
/// the only way to carry the non-user identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Caller {
    User(L1Address),
    Judge,
    BridgeOut,
}

/// Bridge-in deposit record; immutable once written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MintRecord {
    pub pk_sig: FieldElement,
    pub token: FieldElement,
    pub value: u64,
    pub g: u64,
    pub block: u64,
}

/// Per-burn payout data registered alongside a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BurnRecord {
    pub token: FieldElement,
    pub value: u64,
    pub g: u64,
    pub beneficiary: L1Address,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainConfig {
    /// Minimum operator stake S.
    pub min_stake: u128,
    /// Fraud-proof period in blocks.
    pub fpp: u64,
    /// Setup key of the deployed proof system; the judge re-derives the
    /// verifier from it.
    pub proof_key: [u8; 32],
}

impl Default for ChainConfig {
    fn default() -> ChainConfig {
        ChainConfig {
            min_stake: 1_000,
            fpp: 10,
            proof_key: *b"calyx-reference-proof-key.v1\0\0\0\0",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainError {
    InsufficientAllowance,
    InsufficientBalance,
    NotStaked,
    WrongPrevBatch,
    BlobCountNotOne,
    NotBridgeOut,
    NotJudge,
    UnknownHeight,
    HeightFinalized,
    NotFinalized,
    BurnDataMissing,
    WrongBeneficiary,
    NoStakeToRequest,
    NothingMatured,
    BalanceOverflow,
    FraudRejected(fraud::CheckError),
}

impl core::fmt::Display for ChainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChainError::InsufficientAllowance => f.write_str("insufficient allowance"),
            ChainError::InsufficientBalance => f.write_str("insufficient balance"),
            ChainError::NotStaked => f.write_str("caller has not staked"),
            ChainError::WrongPrevBatch => f.write_str("stale prev-batch commitment"),
            ChainError::BlobCountNotOne => f.write_str("exactly one blob must be attached"),
            ChainError::NotBridgeOut => f.write_str("only the bridge-out contract may call"),
            ChainError::NotJudge => f.write_str("only the judge contract may call"),
            ChainError::UnknownHeight => f.write_str("unknown batch height"),
            ChainError::HeightFinalized => f.write_str("batch is finalized"),
            ChainError::NotFinalized => f.write_str("batch is not finalized"),
            ChainError::BurnDataMissing => f.write_str("burn record missing or consumed"),
            ChainError::WrongBeneficiary => f.write_str("caller is not the burn beneficiary"),
            ChainError::NoStakeToRequest => f.write_str("no live stake to unstake"),
            ChainError::NothingMatured => f.write_str("no matured unstake request"),
            ChainError::BalanceOverflow => f.write_str("balance overflow"),
            ChainError::FraudRejected(e) => write!(f, "fraud check rejected: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ChainError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BridgeInState {
    pub cur_nonce: u64,
    pub nonces: BTreeMap<u64, MintRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InboxState {
    /// height → (commitment, publisher); absent for reverted heights.
    pub batch_commitments: BTreeMap<u64, (BlobCommitment, L1Address)>,
    pub cur_height: u64,
    /// Highest non-final batch; everything below is final.
    pub hnb: u64,
    /// height → finalization block; absent once final (or reverted).
    pub block_fin: BTreeMap<u64, u64>,
    /// height → (bracket, tx) → payout record; entries are single-use.
    pub burn_data: BTreeMap<u64, BTreeMap<(u64, u64), BurnRecord>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JudgeState {
    pub stakes: BTreeMap<L1Address, u128>,
    /// address → unlock block → amount.
    pub unstake_requests: BTreeMap<L1Address, BTreeMap<u64, u128>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Lock {
        nonce: u64,
        pk_sig: FieldElement,
        token: FieldElement,
        value: u64,
        g: u64,
    },
    NewBatch {
        height: u64,
        commitment: BlobCommitment,
        publisher: L1Address,
        block_fin: u64,
    },
    Dispute {
        height: u64,
        rule: RuleId,
        publisher: L1Address,
        challenger: L1Address,
    },
    Slash {
        loser: L1Address,
        winner: L1Address,
        amount: u128,
    },
    Retrieve {
        height: u64,
        bracket: u64,
        tx: u64,
        token: FieldElement,
        value: u64,
        g: u64,
        beneficiary: L1Address,
    },
    Revert {
        from_height: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub block: u64,
    pub kind: EventKind,
}

/// The whole simulated chain. `Clone + PartialEq` back the atomicity
/// discipline: failed calls restore the snapshot, and tests compare the
/// restored state bit for bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub params: Params,
    pub config: ChainConfig,
    pub block_number: u64,
    pub native: BTreeMap<L1Address, u128>,
    pub tokens: BTreeMap<(FieldElement, L1Address), u128>,
    pub allowances: BTreeMap<(FieldElement, L1Address, L1Address), u128>,
    pub bridge_in: BridgeInState,
    pub inbox: InboxState,
    pub judge: JudgeState,
    /// Simulated data layer: the blob literally attached to each
    /// `new_batch` call, readable by anyone. Cleared on revert alongside
    /// the commitment.
    pub blobs: BTreeMap<u64, Blob>,
    pub events: Vec<Event>,
}

impl ChainState {
    pub fn new(params: Params, config: ChainConfig) -> ChainState {
        ChainState {
            params,
            config,
            block_number: 1,
            native: BTreeMap::new(),
            tokens: BTreeMap::new(),
            allowances: BTreeMap::new(),
            bridge_in: BridgeInState {
                cur_nonce: 0,
                nonces: BTreeMap::new(),
            },
            inbox: InboxState {
                batch_commitments: BTreeMap::new(),
                cur_height: 0,
                hnb: 1,
                block_fin: BTreeMap::new(),
                burn_data: BTreeMap::new(),
            },
            judge: JudgeState {
                stakes: BTreeMap::new(),
                unstake_requests: BTreeMap::new(),
            },
            blobs: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    /// Runs `f` atomically: on error the pre-call state is restored.
    fn guarded<T>(
        &mut self,
        f: impl FnOnce(&mut ChainState) -> Result<T, ChainError>,
    ) -> Result<T, ChainError> {
        let snapshot = self.clone();
        match f(self) {
            Ok(v) => Ok(v),
            Err(e) => {
                *self = snapshot;
                Err(e)
            }
        }
    }

    fn emit(&mut self, kind: EventKind) {
        self.events.push(Event {
            block: self.block_number,
            kind,
        });
    }

    // ---- ledgers -------------------------------------------------------

    pub fn native_balance(&self, addr: &L1Address) -> u128 {
        self.native.get(addr).copied().unwrap_or(0)
    }

    pub fn token_balance(&self, token: &FieldElement, addr: &L1Address) -> u128 {
        self.tokens.get(&(*token, *addr)).copied().unwrap_or(0)
    }

    pub fn allowance(&self, token: &FieldElement, owner: &L1Address, spender: &L1Address) -> u128 {
        self.allowances
            .get(&(*token, *owner, *spender))
            .copied()
            .unwrap_or(0)
    }

    /// Test-setup faucet; the only supply change outside transfers.
    pub fn credit_native(&mut self, addr: L1Address, amount: u128) {
        *self.native.entry(addr).or_insert(0) += amount;
    }

    /// Test-setup faucet.
    pub fn credit_token(&mut self, token: FieldElement, addr: L1Address, amount: u128) {
        *self.tokens.entry((token, addr)).or_insert(0) += amount;
    }

    pub fn approve(&mut self, caller: L1Address, token: FieldElement, spender: L1Address, amount: u128) {
        self.allowances.insert((token, caller, spender), amount);
    }

    fn native_transfer(
        &mut self,
        from: L1Address,
        to: L1Address,
        amount: u128,
    ) -> Result<(), ChainError> {
        let have = self.native_balance(&from);
        if have < amount {
            return Err(ChainError::InsufficientBalance);
        }
        self.native.insert(from, have - amount);
        let dst = self.native.entry(to).or_insert(0);
        *dst = dst.checked_add(amount).ok_or(ChainError::BalanceOverflow)?;
        Ok(())
    }

    fn token_transfer(
        &mut self,
        token: FieldElement,
        from: L1Address,
        to: L1Address,
        amount: u128,
    ) -> Result<(), ChainError> {
        let have = self.token_balance(&token, &from);
        if have < amount {
            return Err(ChainError::InsufficientBalance);
        }
        self.tokens.insert((token, from), have - amount);
        let dst = self.tokens.entry((token, to)).or_insert(0);
        *dst = dst.checked_add(amount).ok_or(ChainError::BalanceOverflow)?;
        Ok(())
    }

    // ---- bridge-in -----------------------------------------------------

    /// Locks `value` of `token` plus `g` native and records the deposit.
    /// Returns the assigned nonce (counter value after increment).
    pub fn to_l2(
        &mut self,
        caller: L1Address,
        token: FieldElement,
        value: u64,
        pk_sig: FieldElement,
        g: u64,
    ) -> Result<u64, ChainError> {
        self.guarded(|s| {
            if s.allowance(&token, &caller, &BRIDGE_ADDRESS) < value as u128 {
                return Err(ChainError::InsufficientAllowance);
            }
            if value > 0 {
                let key = (token, caller, BRIDGE_ADDRESS);
                let allowed = s.allowances.get_mut(&key).expect("checked above");
                *allowed -= value as u128;
                s.token_transfer(token, caller, BRIDGE_ADDRESS, value as u128)?;
            }
            s.native_transfer(caller, BRIDGE_ADDRESS, g as u128)?;
            s.bridge_in.cur_nonce += 1;
            let nonce = s.bridge_in.cur_nonce;
            s.bridge_in.nonces.insert(
                nonce,
                MintRecord {
                    pk_sig,
                    token,
                    value,
                    g,
                    block: s.block_number,
                },
            );
            s.emit(EventKind::Lock {
                nonce,
                pk_sig,
                token,
                value,
                g,
            });
            Ok(nonce)
        })
    }

    /// Fee-token deposit: a record with token 0 and value 0 carrying only g.
    pub fn fee_to_l2(
        &mut self,
        caller: L1Address,
        pk_sig: FieldElement,
        g: u64,
    ) -> Result<u64, ChainError> {
        self.to_l2(caller, FieldElement::ZERO, 0, pk_sig, g)
    }

    pub fn get_mint_data(&self, nonce: u64) -> Option<MintRecord> {
        self.bridge_in.nonces.get(&nonce).copied()
    }

    // ---- inbox ---------------------------------------------------------

    /// Commitment a publisher must name to extend the chain.
    pub fn prev_batch_commitment(&self) -> BlobCommitment {
        if self.inbox.cur_height == 0 {
            GENESIS_COMMITMENT
        } else {
            self.inbox.batch_commitments[&self.inbox.cur_height].0
        }
    }

    /// Finalization sweep: advances `hnb` past every height whose
    /// fraud-proof window closed before the current block, clearing its
    /// `block_fin`. Runs only here, so a batch never finalizes at birth.
    fn sweep_finalization(&mut self) {
        let mut h = self.inbox.hnb;
        while h <= self.inbox.cur_height {
            match self.inbox.block_fin.get(&h) {
                Some(bf) if *bf < self.block_number => {
                    self.inbox.block_fin.remove(&h);
                    h += 1;
                }
                _ => break,
            }
        }
        self.inbox.hnb = h;
    }

    pub fn new_batch(
        &mut self,
        caller: L1Address,
        blobs: &[Blob],
        burn_data: BTreeMap<(u64, u64), BurnRecord>,
        prev_batch: BlobCommitment,
    ) -> Result<u64, ChainError> {
        self.guarded(|s| {
            if !s.has_staked(&caller) {
                return Err(ChainError::NotStaked);
            }
            if blobs.len() != 1 {
                return Err(ChainError::BlobCountNotOne);
            }
            if prev_batch != s.prev_batch_commitment() {
                return Err(ChainError::WrongPrevBatch);
            }
            s.sweep_finalization();
            let height = s.inbox.cur_height + 1;
            let commitment = commit(&s.params, &blobs[0]);
            s.inbox.batch_commitments.insert(height, (commitment, caller));
            s.inbox.burn_data.insert(height, burn_data);
            let block_fin = s.block_number + s.config.fpp;
            s.inbox.block_fin.insert(height, block_fin);
            s.inbox.cur_height = height;
            s.blobs.insert(height, blobs[0].clone());
            s.emit(EventKind::NewBatch {
                height,
                commitment,
                publisher: caller,
                block_fin,
            });
            Ok(height)
        })
    }

    pub fn block_finalized(&self, height: u64) -> bool {
        self.inbox.hnb > height
    }

    pub fn consume_burn_data(
        &mut self,
        caller: Caller,
        height: u64,
        bracket: u64,
        tx: u64,
    ) -> Result<BurnRecord, ChainError> {
        self.guarded(|s| {
            if caller != Caller::BridgeOut {
                return Err(ChainError::NotBridgeOut);
            }
            s.consume_burn_data_inner(height, bracket, tx)
        })
    }

    fn consume_burn_data_inner(
        &mut self,
        height: u64,
        bracket: u64,
        tx: u64,
    ) -> Result<BurnRecord, ChainError> {
        self.inbox
            .burn_data
            .get_mut(&height)
            .and_then(|m| m.remove(&(bracket, tx)))
            .ok_or(ChainError::BurnDataMissing)
    }

    pub fn revert_l2_chain(&mut self, caller: Caller, height: u64) -> Result<(), ChainError> {
        self.guarded(|s| {
            if caller != Caller::Judge {
                return Err(ChainError::NotJudge);
            }
            s.revert_l2_chain_inner(height)
        })
    }

    fn revert_l2_chain_inner(&mut self, height: u64) -> Result<(), ChainError> {
        if height == 0 || height > self.inbox.cur_height {
            return Err(ChainError::UnknownHeight);
        }
        let bf = self
            .inbox
            .block_fin
            .get(&height)
            .ok_or(ChainError::HeightFinalized)?;
        if *bf < self.block_number {
            return Err(ChainError::HeightFinalized);
        }
        for h in height..=self.inbox.cur_height {
            self.inbox.block_fin.remove(&h);
            self.inbox.batch_commitments.remove(&h);
            self.inbox.burn_data.remove(&h);
            self.blobs.remove(&h);
        }
        self.inbox.cur_height = height - 1;
        self.emit(EventKind::Revert { from_height: height });
        Ok(())
    }

    // ---- judge ---------------------------------------------------------

    pub fn stake(&mut self, caller: L1Address, amount: u128) -> Result<(), ChainError> {
        self.guarded(|s| {
            s.native_transfer(caller, JUDGE_ADDRESS, amount)?;
            *s.judge.stakes.entry(caller).or_insert(0) += amount;
            Ok(())
        })
    }

    pub fn has_staked(&self, addr: &L1Address) -> bool {
        self.judge.stakes.get(addr).copied().unwrap_or(0) >= self.config.min_stake
    }

    pub fn unstake_request(&mut self, caller: L1Address) -> Result<u64, ChainError> {
        self.guarded(|s| {
            let live = s.judge.stakes.get(&caller).copied().unwrap_or(0);
            if live == 0 {
                return Err(ChainError::NoStakeToRequest);
            }
            s.judge.stakes.insert(caller, 0);
            let unlock = s.block_number + s.config.fpp;
            *s
                .judge
                .unstake_requests
                .entry(caller)
                .or_default()
                .entry(unlock)
                .or_insert(0) += live;
            Ok(unlock)
        })
    }

    /// Pays out every request whose unlock block has been reached.
    pub fn unstake(&mut self, caller: L1Address) -> Result<u128, ChainError> {
        self.guarded(|s| {
            let block = s.block_number;
            let Some(pending) = s.judge.unstake_requests.get_mut(&caller) else {
                return Err(ChainError::NothingMatured);
            };
            let matured: Vec<u64> = pending
                .range(..=block)
                .map(|(unlock, _)| *unlock)
                .collect();
            if matured.is_empty() {
                return Err(ChainError::NothingMatured);
            }
            let mut total = 0u128;
            for unlock in matured {
                total += pending.remove(&unlock).unwrap_or(0);
            }
            if pending.is_empty() {
                s.judge.unstake_requests.remove(&caller);
            }
            s.native_transfer(JUDGE_ADDRESS, caller, total)?;
            Ok(total)
        })
    }

    /// Moves the loser's live stake plus every pending unstake to the
    /// winner's native balance.
    fn slash_inner(&mut self, loser: L1Address, winner: L1Address) -> Result<u128, ChainError> {
        let mut amount = self.judge.stakes.remove(&loser).unwrap_or(0);
        if let Some(pending) = self.judge.unstake_requests.remove(&loser) {
            amount += pending.values().sum::<u128>();
        }
        self.native_transfer(JUDGE_ADDRESS, winner, amount)?;
        self.emit(EventKind::Slash {
            loser,
            winner,
            amount,
        });
        Ok(amount)
    }

    /// Verifies a fraud proof against the accused batch; on success reverts
    /// the chain from that height and moves the publisher's stake to the
    /// challenger. A failing proof leaves the chain untouched.
    pub fn dispute_block(
        &mut self,
        caller: L1Address,
        proof: &FraudProof,
    ) -> Result<u128, ChainError> {
        self.guarded(|s| {
            let height = proof.height;
            let (_, publisher) = s
                .inbox
                .batch_commitments
                .get(&height)
                .copied()
                .ok_or(ChainError::UnknownHeight)?;
            if !s.inbox.block_fin.contains_key(&height) {
                return Err(ChainError::HeightFinalized);
            }
            let params = s.params.clone();
            fraud::check(&params, proof, s).map_err(ChainError::FraudRejected)?;
            s.revert_l2_chain_inner(height)?;
            let amount = s.slash_inner(publisher, caller)?;
            s.emit(EventKind::Dispute {
                height,
                rule: proof.rule,
                publisher,
                challenger: caller,
            });
            Ok(amount)
        })
    }

    // ---- bridge-out ----------------------------------------------------

    /// Pays a finalized burn to its beneficiary. The beneficiary check runs
    /// before consumption, so a wrong caller cannot destroy the record.
    pub fn retrieve(
        &mut self,
        caller: L1Address,
        height: u64,
        bracket: u64,
        tx: u64,
    ) -> Result<BurnRecord, ChainError> {
        self.guarded(|s| {
            if !s.block_finalized(height) {
                return Err(ChainError::NotFinalized);
            }
            let rec = s
                .inbox
                .burn_data
                .get(&height)
                .and_then(|m| m.get(&(bracket, tx)))
                .copied()
                .ok_or(ChainError::BurnDataMissing)?;
            if rec.beneficiary != caller {
                return Err(ChainError::WrongBeneficiary);
            }
            s.consume_burn_data_inner(height, bracket, tx)?;
            if rec.value > 0 {
                s.token_transfer(rec.token, BRIDGE_ADDRESS, caller, rec.value as u128)?;
            }
            s.native_transfer(BRIDGE_ADDRESS, caller, rec.g as u128)?;
            s.emit(EventKind::Retrieve {
                height,
                bracket,
                tx,
                token: rec.token,
                value: rec.value,
                g: rec.g,
                beneficiary: caller,
            });
            Ok(rec)
        })
    }

    // ---- plumbing ------------------------------------------------------

    /// Advances simulated time and sweeps finalization, so a quiescent
    /// chain finalizes its tip once the fraud window closes. Publication
    /// also sweeps, so ordering against `new_batch` does not matter.
    pub fn advance_block(&mut self, n: u64) {
        self.block_number += n;
        self.sweep_finalization();
    }
}

impl fraud::FraudContext for ChainState {
    fn commitment(&self, height: u64) -> Option<BlobCommitment> {
        self.inbox.batch_commitments.get(&height).map(|(c, _)| *c)
    }

    fn publication_block(&self, height: u64) -> Option<u64> {
        // Only non-final heights are disputable, so block_fin is present.
        self.inbox
            .block_fin
            .get(&height)
            .map(|bf| bf - self.config.fpp)
    }

    fn mint_record(&self, nonce: u64) -> Option<MintRecord> {
        self.get_mint_data(nonce)
    }

    fn burn_record(&self, height: u64, bracket: u64, tx: u64) -> Option<BurnRecord> {
        self.inbox
            .burn_data
            .get(&height)
            .and_then(|m| m.get(&(bracket, tx)))
            .copied()
    }

    fn proof_key(&self) -> [u8; 32] {
        self.config.proof_key
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blob::serialize_batch;

    fn addr(b: u8) -> L1Address {
        L1Address([b; 20])
    }

    fn chain() -> ChainState {
        ChainState::new(Params::default(), ChainConfig::default())
    }

    fn empty_blob(params: &Params) -> Blob {
        serialize_batch(
            params,
            FieldElement::ZERO,
            FieldElement::ZERO,
            FieldElement::ZERO,
            &[],
        )
        .unwrap()
    }

    fn staked_operator(chain: &mut ChainState, a: L1Address) {
        chain.credit_native(a, 10_000);
        chain.stake(a, 1_000).unwrap();
    }

    #[test]
    fn deposit_creates_monotone_nonce_records() {
        let mut c = chain();
        let alice = addr(1);
        let token = c.params.fe(5);
        c.credit_native(alice, 100);
        c.credit_token(token, alice, 50);
        c.approve(alice, token, BRIDGE_ADDRESS, 30);

        let n1 = c.to_l2(alice, token, 10, c.params.fe(111), 1).unwrap();
        assert_eq!(n1, 1);
        let rec = c.get_mint_data(1).unwrap();
        assert_eq!(
            rec,
            MintRecord {
                pk_sig: c.params.fe(111),
                token,
                value: 10,
                g: 1,
                block: 1
            }
        );
        assert_eq!(c.token_balance(&token, &BRIDGE_ADDRESS), 10);
        assert_eq!(c.token_balance(&token, &alice), 40);
        assert_eq!(c.native_balance(&BRIDGE_ADDRESS), 1);

        // Second deposit takes the next nonce; fee deposits share the
        // counter.
        let n2 = c.to_l2(alice, token, 10, c.params.fe(111), 0).unwrap();
        assert_eq!(n2, 2);
        let n3 = c.fee_to_l2(alice, c.params.fe(112), 7).unwrap();
        assert_eq!(n3, 3);
        let fee_rec = c.get_mint_data(3).unwrap();
        assert_eq!(fee_rec.token, FieldElement::ZERO);
        assert_eq!(fee_rec.value, 0);
        assert_eq!(fee_rec.g, 7);

        // Records are immutable across reads.
        assert_eq!(c.get_mint_data(1).unwrap(), rec);
        assert_eq!(c.get_mint_data(99), None);
        assert_eq!(
            c.events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::Lock { .. }))
                .count(),
            3
        );
    }

    #[test]
    fn deposit_reverts_leave_state_bit_identical() {
        let mut c = chain();
        let alice = addr(1);
        let token = c.params.fe(5);
        c.credit_native(alice, 100);
        c.credit_token(token, alice, 50);
        c.approve(alice, token, BRIDGE_ADDRESS, 5);

        let before = c.clone();
        // Allowance 5 < 10.
        assert_eq!(
            c.to_l2(alice, token, 10, c.params.fe(1), 0),
            Err(ChainError::InsufficientAllowance)
        );
        assert_eq!(c, before);

        // Balance shortfall after raising allowance.
        c.approve(alice, token, BRIDGE_ADDRESS, 100);
        let before = c.clone();
        assert_eq!(
            c.to_l2(alice, token, 60, c.params.fe(1), 0),
            Err(ChainError::InsufficientBalance)
        );
        assert_eq!(c, before);

        // Native shortfall for g.
        let before = c.clone();
        assert_eq!(
            c.to_l2(alice, token, 10, c.params.fe(1), 500),
            Err(ChainError::InsufficientBalance)
        );
        assert_eq!(c, before);
    }

    #[test]
    fn staking_lifecycle() {
        let mut c = chain();
        let op = addr(2);
        c.credit_native(op, 5_000);

        assert!(!c.has_staked(&op));
        c.stake(op, 400).unwrap();
        assert!(!c.has_staked(&op));
        c.stake(op, 600).unwrap();
        assert!(c.has_staked(&op));
        assert_eq!(c.native_balance(&JUDGE_ADDRESS), 1_000);

        // Request zeroes live stake and schedules at block + fpp.
        let unlock = c.unstake_request(op).unwrap();
        assert_eq!(unlock, 1 + 10);
        assert!(!c.has_staked(&op));
        let before = c.clone();
        assert_eq!(c.unstake(op), Err(ChainError::NothingMatured));
        assert_eq!(c, before);

        c.advance_block(10);
        assert_eq!(c.unstake(op).unwrap(), 1_000);
        assert_eq!(c.native_balance(&op), 5_000);
        assert_eq!(c.native_balance(&JUDGE_ADDRESS), 0);

        // Empty request queue refuses.
        assert_eq!(c.unstake_request(op), Err(ChainError::NoStakeToRequest));
    }

    #[test]
    fn slash_captures_live_and_pending_stake() {
        let mut c = chain();
        let op = addr(2);
        let challenger = addr(3);
        c.credit_native(op, 5_000);
        c.stake(op, 1_500).unwrap();
        c.unstake_request(op).unwrap();
        c.stake(op, 1_000).unwrap();

        let amount = c.slash_inner(op, challenger).unwrap();
        assert_eq!(amount, 2_500);
        assert_eq!(c.native_balance(&challenger), 2_500);
        assert_eq!(c.native_balance(&JUDGE_ADDRESS), 0);
        assert!(c.judge.unstake_requests.get(&op).is_none());
        assert_eq!(c.judge.stakes.get(&op), None);
    }

    #[test]
    fn batch_publication_and_finalization() {
        let mut c = chain();
        let op = addr(2);
        staked_operator(&mut c, op);
        let blob = empty_blob(&c.params);

        // Unstaked caller refuses.
        let outsider = addr(9);
        let before = c.clone();
        assert_eq!(
            c.new_batch(outsider, core::slice::from_ref(&blob), BTreeMap::new(), GENESIS_COMMITMENT),
            Err(ChainError::NotStaked)
        );
        assert_eq!(c, before);

        // Wrong genesis sentinel refuses.
        let bad = BlobCommitment(c.params.fe(1));
        assert_eq!(
            c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), bad),
            Err(ChainError::WrongPrevBatch)
        );

        // Blob count must be exactly one.
        assert_eq!(
            c.new_batch(op, &[], BTreeMap::new(), GENESIS_COMMITMENT),
            Err(ChainError::BlobCountNotOne)
        );
        assert_eq!(
            c.new_batch(op, &[blob.clone(), blob.clone()], BTreeMap::new(), GENESIS_COMMITMENT),
            Err(ChainError::BlobCountNotOne)
        );

        let h1 = c
            .new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), GENESIS_COMMITMENT)
            .unwrap();
        assert_eq!(h1, 1);
        assert!(!c.block_finalized(1));
        assert_eq!(c.inbox.block_fin[&1], 1 + 10);

        // Advancing to the fin block is not enough: the window closes only
        // strictly after it.
        c.advance_block(10);
        assert!(!c.block_finalized(1));
        c.advance_block(1);
        assert!(c.block_finalized(1));

        let prev = c.prev_batch_commitment();
        let h2 = c
            .new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), prev)
            .unwrap();
        assert_eq!(h2, 2);
        assert!(c.block_finalized(1));
        assert!(!c.block_finalized(2));
        // Finalized: block_fin cleared, commitment retained.
        assert!(c.inbox.block_fin.get(&1).is_none());
        assert!(c.inbox.batch_commitments.get(&1).is_some());

        // A batch never finalizes at birth even after a long pause.
        c.advance_block(100);
        let prev = c.prev_batch_commitment();
        let h3 = c
            .new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), prev)
            .unwrap();
        assert!(c.block_finalized(2));
        assert!(!c.block_finalized(h3));
    }

    #[test]
    fn burn_data_consumption_and_retrieve() {
        let mut c = chain();
        let op = addr(2);
        let bob = addr(4);
        staked_operator(&mut c, op);
        let token = c.params.fe(7);
        // Fund the bridge as if deposits happened.
        c.credit_token(token, BRIDGE_ADDRESS, 100);
        c.credit_native(BRIDGE_ADDRESS, 50);

        let blob = empty_blob(&c.params);
        let mut burns = BTreeMap::new();
        let rec = BurnRecord {
            token,
            value: 25,
            g: 3,
            beneficiary: bob,
        };
        burns.insert((0u64, 1u64), rec);
        c.new_batch(op, core::slice::from_ref(&blob), burns, GENESIS_COMMITMENT)
            .unwrap();

        // External callers cannot consume burn data directly.
        let before = c.clone();
        assert_eq!(
            c.consume_burn_data(Caller::User(bob), 1, 0, 1),
            Err(ChainError::NotBridgeOut)
        );
        assert_eq!(c, before);

        // Retrieval needs finalization.
        assert_eq!(c.retrieve(bob, 1, 0, 1), Err(ChainError::NotFinalized));
        assert_eq!(c, before);

        c.advance_block(11);
        let prev = c.prev_batch_commitment();
        c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), prev)
            .unwrap();
        assert!(c.block_finalized(1));

        // Wrong beneficiary bounces without consuming the record.
        let mallory = addr(5);
        let before = c.clone();
        assert_eq!(
            c.retrieve(mallory, 1, 0, 1),
            Err(ChainError::WrongBeneficiary)
        );
        assert_eq!(c, before);

        let paid = c.retrieve(bob, 1, 0, 1).unwrap();
        assert_eq!(paid, rec);
        assert_eq!(c.token_balance(&token, &bob), 25);
        assert_eq!(c.native_balance(&bob), 3);
        assert_eq!(c.token_balance(&token, &BRIDGE_ADDRESS), 75);

        // Single use.
        assert_eq!(c.retrieve(bob, 1, 0, 1), Err(ChainError::BurnDataMissing));
    }

    #[test]
    fn revert_clears_suffix_and_blocks_consumption() {
        let mut c = chain();
        let op = addr(2);
        staked_operator(&mut c, op);
        let blob = empty_blob(&c.params);
        let mut burns = BTreeMap::new();
        burns.insert(
            (0u64, 0u64),
            BurnRecord {
                token: c.params.fe(7),
                value: 5,
                g: 0,
                beneficiary: addr(4),
            },
        );

        c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), GENESIS_COMMITMENT)
            .unwrap();
        let prev = c.prev_batch_commitment();
        c.new_batch(op, core::slice::from_ref(&blob), burns, prev).unwrap();
        let prev = c.prev_batch_commitment();
        c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), prev)
            .unwrap();
        assert_eq!(c.inbox.cur_height, 3);

        // Only the judge may revert.
        assert_eq!(
            c.revert_l2_chain(Caller::User(op), 2),
            Err(ChainError::NotJudge)
        );

        c.revert_l2_chain(Caller::Judge, 2).unwrap();
        assert_eq!(c.inbox.cur_height, 1);
        assert!(c.inbox.batch_commitments.get(&2).is_none());
        assert!(c.inbox.batch_commitments.get(&3).is_none());
        assert!(c.blobs.get(&2).is_none());
        // Burn data at reverted heights is gone even after time passes.
        c.advance_block(100);
        assert_eq!(
            c.consume_burn_data(Caller::BridgeOut, 2, 0, 0),
            Err(ChainError::BurnDataMissing)
        );

        // Reverted heights never finalize; height 1 still can.
        let prev = c.prev_batch_commitment();
        c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), prev)
            .unwrap();
        assert!(c.block_finalized(1));
        assert_eq!(c.inbox.cur_height, 2);

        // Reverting a finalized height refuses.
        let before = c.clone();
        assert_eq!(
            c.revert_l2_chain(Caller::Judge, 1),
            Err(ChainError::HeightFinalized)
        );
        assert_eq!(c, before);
    }

    #[test]
    fn bridge_solvency_across_deposit_and_retrieve() {
        let mut c = chain();
        let alice = addr(1);
        let op = addr(2);
        staked_operator(&mut c, op);
        let token = c.params.fe(5);
        c.credit_native(alice, 1_000);
        c.credit_token(token, alice, 500);
        c.approve(alice, token, BRIDGE_ADDRESS, 500);

        c.to_l2(alice, token, 200, c.params.fe(1), 10).unwrap();
        c.to_l2(alice, token, 100, c.params.fe(1), 5).unwrap();
        // Outstanding deposits: 300 tokens, 15 native.
        assert_eq!(c.token_balance(&token, &BRIDGE_ADDRESS), 300);
        assert_eq!(c.native_balance(&BRIDGE_ADDRESS), 15);

        // A burn pays part of it back out after finalization.
        let blob = empty_blob(&c.params);
        let mut burns = BTreeMap::new();
        burns.insert(
            (0u64, 0u64),
            BurnRecord {
                token,
                value: 150,
                g: 8,
                beneficiary: alice,
            },
        );
        c.new_batch(op, core::slice::from_ref(&blob), burns, GENESIS_COMMITMENT)
            .unwrap();
        c.advance_block(11);
        let prev = c.prev_batch_commitment();
        c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), prev)
            .unwrap();
        c.retrieve(alice, 1, 0, 0).unwrap();

        assert_eq!(c.token_balance(&token, &BRIDGE_ADDRESS), 150);
        assert_eq!(c.native_balance(&BRIDGE_ADDRESS), 7);
        // Bridge still covers the remaining outstanding value.
        assert_eq!(c.token_balance(&token, &alice), 350);
    }

    #[test]
    fn advance_block_only_moves_time_and_sweeps() {
        let mut c = chain();
        let op = addr(2);
        staked_operator(&mut c, op);
        let blob = empty_blob(&c.params);
        c.new_batch(op, core::slice::from_ref(&blob), BTreeMap::new(), GENESIS_COMMITMENT)
            .unwrap();

        // Inside the window nothing but the clock changes.
        let mut expected = c.clone();
        c.advance_block(5);
        expected.block_number += 5;
        assert_eq!(c, expected);
        assert!(!c.block_finalized(1));

        // Past the window the sweep finalizes the tip without a new batch.
        c.advance_block(1_000);
        assert!(c.block_finalized(1));
        assert!(c.inbox.block_fin.get(&1).is_none());
        assert!(c.inbox.batch_commitments.get(&1).is_some());
        let snapshot = c.clone();
        c.advance_block(0);
        assert_eq!(c, snapshot);
    }
}
