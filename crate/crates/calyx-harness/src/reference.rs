//! Plain-ledger interpreter of scenario scripts.
//!
//! This model keeps balances as ordinary multisets and applies the same
//! coin-selection policy as the live runner, but touches no trees, blobs,
//! proofs, or keys. It answers two needs: scenario generation probes it for
//! feasibility before emitting an action, and the runner replays every
//! script against it and compares coin-by-coin state, fee tallies, and the
//! bridge conservation ledger after each scan.

use std::collections::BTreeMap;
use std::fmt;
use std::mem;

use crate::report::{ConservationLedger, NativeLedger, TokenLedger};
use crate::scenario::{Action, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefCoinState {
    /// Finalized and unspent.
    Available,
    /// Committed to a submitted spend that has not finalized yet.
    Locked,
    Spent,
}

/// One coin in a client's mirror, index-aligned with the live wallet's
/// coin vector. Coins are appended only when their batch finalizes and are
/// never removed, so indices stay stable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefCoin {
    pub token: u64,
    pub value: u64,
    pub fee: u64,
    pub state: RefCoinState,
}

#[derive(Clone, Debug, Default)]
pub struct RefClient {
    /// L1 native balance.
    pub native: u128,
    /// L1 token balances.
    pub tokens: BTreeMap<u64, u128>,
    pub coins: Vec<RefCoin>,
    /// L2 fees recognized at finalization of this client's own spends.
    pub fees_paid: u64,
}

impl RefClient {
    /// Sum of available coin values in one token, the counterpart of the
    /// live wallet's balance.
    pub fn balance(&self, token: u64) -> u64 {
        self.coins
            .iter()
            .filter(|c| c.state == RefCoinState::Available && c.token == token)
            .map(|c| c.value)
            .sum()
    }
}

/// A submitted action's ledger footprint, pending until its batch
/// finalizes. Reverted batches feed their effects straight back into the
/// in-flight queue, mirroring the runner re-submitting dropped brackets.
#[derive(Clone, Debug)]
enum Effect {
    Mint {
        client: u32,
        token: u64,
        value: u64,
        fee: u64,
    },
    Transfer {
        from: u32,
        to: u32,
        token: u64,
        inputs: Vec<usize>,
        value: u64,
        fee: u64,
        change_value: u64,
        change_fee: u64,
        tx_fee: u64,
    },
    Burn {
        client: u32,
        coin: usize,
        token: u64,
        value: u64,
        g_out: u64,
        tx_fee: u64,
    },
}

#[derive(Clone, Debug)]
struct SealedBatch {
    effects: Vec<Effect>,
    seal_block: u64,
    tainted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReferenceError {
    InsufficientL1Native { client: u32 },
    InsufficientL1Token { client: u32, token: u64 },
    InsufficientCoins { client: u32, token: u64 },
    NoBurnableCoin { client: u32, token: u64 },
    /// A violated batch outlived its fraud window with no scan to dispute
    /// it; the script let fraud finalize.
    UndisputedViolation { height: u64 },
}

impl fmt::Display for ReferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceError::InsufficientL1Native { client } => {
                write!(f, "client {client} lacks L1 native balance")
            }
            ReferenceError::InsufficientL1Token { client, token } => {
                write!(f, "client {client} lacks L1 balance of token {token}")
            }
            ReferenceError::InsufficientCoins { client, token } => {
                write!(f, "client {client} cannot cover the spend in token {token}")
            }
            ReferenceError::NoBurnableCoin { client, token } => {
                write!(f, "client {client} has no burnable coin of token {token}")
            }
            ReferenceError::UndisputedViolation { height } => {
                write!(f, "violated batch {height} finalized without a dispute")
            }
        }
    }
}

impl std::error::Error for ReferenceError {}

/// What one applied action did, for the runner's cross-checks. Scenario
/// generation ignores it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    /// Height assigned by a `Seal`.
    pub sealed: Option<u64>,
    /// Heights a `Scan` expects disputed and reverted, lowest first.
    pub disputed: Vec<u64>,
    /// Heights a `Scan` finalized and applied, ascending.
    pub finalized: Vec<u64>,
}

/// A spendable coin offered to selection.
#[derive(Clone, Copy, Debug)]
pub struct CoinView {
    pub index: usize,
    pub value: u64,
    pub fee: u64,
}

/// Largest-first coin selection, shared verbatim between the mirror and
/// the live runner so both pick identical inputs: sort by value
/// descending (index ascending on ties) and take the shortest prefix
/// covering both the value and the fee need, up to `max_inputs` coins.
pub fn select_coins(
    mut candidates: Vec<CoinView>,
    need_value: u64,
    need_fee: u64,
    max_inputs: usize,
) -> Option<Vec<usize>> {
    candidates.sort_by(|a, b| b.value.cmp(&a.value).then(a.index.cmp(&b.index)));
    let mut picked = Vec::new();
    let (mut value, mut fee) = (0u128, 0u128);
    for c in candidates {
        if picked.len() >= max_inputs || (value >= need_value as u128 && fee >= need_fee as u128) {
            break;
        }
        picked.push(c.index);
        value += c.value as u128;
        fee += c.fee as u128;
    }
    (!picked.is_empty() && value >= need_value as u128 && fee >= need_fee as u128)
        .then_some(picked)
}

/// Burn-coin choice shared with the runner: the largest available coin of
/// the token whose embedded fee budget covers the transaction fee, lowest
/// index on ties.
pub fn pick_burn_coin(coins: &[RefCoin], token: u64, min_fee: u64) -> Option<usize> {
    coins
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.state == RefCoinState::Available && c.token == token && c.fee >= min_fee
        })
        .max_by(|(ia, a), (ib, b)| a.value.cmp(&b.value).then(ib.cmp(ia)))
        .map(|(i, _)| i)
}

#[derive(Clone, Debug)]
pub struct ReferenceState {
    m: usize,
    fpp: u64,
    block: u64,
    /// Last sealed height (0 before the first batch; rewinds on revert).
    tip: u64,
    pub clients: Vec<RefClient>,
    /// Effects submitted since the last seal, in mempool order.
    in_flight: Vec<Effect>,
    /// Sealed batches not yet finalized-and-applied, by height.
    sealed: BTreeMap<u64, SealedBatch>,
    taint_next: bool,
    deposited_tokens: BTreeMap<u64, u128>,
    withdrawn_tokens: BTreeMap<u64, u128>,
    deposited_native: u128,
    withdrawn_native: u128,
    operator_fees: u128,
}

impl ReferenceState {
    pub fn new(scenario: &Scenario) -> ReferenceState {
        ReferenceState {
            m: scenario.protocol.m,
            fpp: scenario.protocol.fpp,
            block: 0,
            tip: 0,
            clients: scenario
                .clients
                .iter()
                .map(|spec| RefClient {
                    native: spec.native as u128,
                    tokens: spec
                        .tokens
                        .iter()
                        .map(|(&t, &v)| (t, v as u128))
                        .collect(),
                    coins: Vec::new(),
                    fees_paid: 0,
                })
                .collect(),
            in_flight: Vec::new(),
            sealed: BTreeMap::new(),
            taint_next: false,
            deposited_tokens: BTreeMap::new(),
            withdrawn_tokens: BTreeMap::new(),
            deposited_native: 0,
            withdrawn_native: 0,
            operator_fees: 0,
        }
    }

    /// Maximum simultaneously coverable (value, fee) for one transfer from
    /// this client in this token, given the selection policy and the input
    /// slot cap. `None` when no coin is available.
    pub fn spendable(&self, client: u32, token: u64) -> Option<(u64, u64)> {
        let coins = &self.clients.get(client as usize)?.coins;
        let mut views: Vec<&RefCoin> = coins
            .iter()
            .filter(|c| c.state == RefCoinState::Available && c.token == token)
            .collect();
        if views.is_empty() {
            return None;
        }
        views.sort_by(|a, b| b.value.cmp(&a.value));
        views.truncate(self.max_inputs());
        Some((
            views.iter().map(|c| c.value).sum(),
            views.iter().map(|c| c.fee).sum(),
        ))
    }

    /// Inputs per transfer: the slot budget minus the payment and change
    /// outputs.
    pub fn max_inputs(&self) -> usize {
        self.m.saturating_sub(2).max(1)
    }

    fn finalized(&self, batch: &SealedBatch) -> bool {
        self.block > batch.seal_block + self.fpp
    }

    pub fn apply(&mut self, action: &Action) -> Result<StepOutcome, ReferenceError> {
        let mut outcome = StepOutcome::default();
        match action {
            Action::Join {
                client,
                token,
                value,
                fee,
            } => {
                let c = &mut self.clients[*client as usize];
                if c.native < *fee as u128 {
                    return Err(ReferenceError::InsufficientL1Native { client: *client });
                }
                if *value > 0 {
                    let bal = c.tokens.entry(*token).or_insert(0);
                    if *bal < *value as u128 {
                        return Err(ReferenceError::InsufficientL1Token {
                            client: *client,
                            token: *token,
                        });
                    }
                    *bal -= *value as u128;
                }
                c.native -= *fee as u128;
                *self.deposited_tokens.entry(*token).or_insert(0) += *value as u128;
                self.deposited_native += *fee as u128;
                self.in_flight.push(Effect::Mint {
                    client: *client,
                    token: *token,
                    value: *value,
                    fee: *fee,
                });
            }
            Action::Transfer {
                from,
                to,
                token,
                value,
                fee,
                tx_fee,
            } => {
                let sender = &self.clients[*from as usize];
                let candidates: Vec<CoinView> = sender
                    .coins
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.state == RefCoinState::Available && c.token == *token)
                    .map(|(index, c)| CoinView {
                        index,
                        value: c.value,
                        fee: c.fee,
                    })
                    .collect();
                let need_fee = fee
                    .checked_add(*tx_fee)
                    .ok_or(ReferenceError::InsufficientCoins {
                        client: *from,
                        token: *token,
                    })?;
                let inputs = select_coins(candidates, *value, need_fee, self.max_inputs())
                    .ok_or(ReferenceError::InsufficientCoins {
                    client: *from,
                    token: *token,
                })?;
                let sender = &mut self.clients[*from as usize];
                let (mut in_value, mut in_fee) = (0u64, 0u64);
                for &i in &inputs {
                    in_value += sender.coins[i].value;
                    in_fee += sender.coins[i].fee;
                    sender.coins[i].state = RefCoinState::Locked;
                }
                self.in_flight.push(Effect::Transfer {
                    from: *from,
                    to: *to,
                    token: *token,
                    inputs,
                    value: *value,
                    fee: *fee,
                    change_value: in_value - value,
                    change_fee: in_fee - fee - tx_fee,
                    tx_fee: *tx_fee,
                });
            }
            Action::Burn {
                client,
                token,
                tx_fee,
            } => {
                let c = &mut self.clients[*client as usize];
                let coin = pick_burn_coin(&c.coins, *token, *tx_fee).ok_or(
                    ReferenceError::NoBurnableCoin {
                        client: *client,
                        token: *token,
                    },
                )?;
                c.coins[coin].state = RefCoinState::Locked;
                self.in_flight.push(Effect::Burn {
                    client: *client,
                    coin,
                    token: *token,
                    value: c.coins[coin].value,
                    g_out: c.coins[coin].fee - tx_fee,
                    tx_fee: *tx_fee,
                });
            }
            Action::AdvanceBlock { blocks } => {
                self.block += blocks;
            }
            Action::Seal => {
                let height = self.tip + 1;
                self.sealed.insert(
                    height,
                    SealedBatch {
                        effects: mem::take(&mut self.in_flight),
                        seal_block: self.block,
                        tainted: mem::take(&mut self.taint_next),
                    },
                );
                self.tip = height;
                outcome.sealed = Some(height);
            }
            Action::Scan => {
                self.scan(&mut outcome)?;
            }
            Action::Inject { .. } => {
                self.taint_next = true;
            }
        }
        Ok(outcome)
    }

    fn scan(&mut self, outcome: &mut StepOutcome) -> Result<(), ReferenceError> {
        // Disputes first: the lowest tainted height still inside its fraud
        // window is challenged and everything from it upward reverts, the
        // reverted effects rejoining the queue behind the current mempool
        // (the runner re-submits dropped brackets the same way).
        loop {
            let Some((height, finalized)) = self
                .sealed
                .iter()
                .find(|(_, b)| b.tainted)
                .map(|(&h, b)| (h, self.finalized(b)))
            else {
                break;
            };
            if finalized {
                return Err(ReferenceError::UndisputedViolation { height });
            }
            outcome.disputed.push(height);
            let dropped: Vec<u64> = self.sealed.range(height..).map(|(&h, _)| h).collect();
            for h in dropped {
                let mut batch = self.sealed.remove(&h).expect("height listed");
                self.in_flight.append(&mut batch.effects);
            }
            self.tip = height - 1;
        }

        // Finalization sweep, in height order. Applied batches leave the
        // map: finalized history can never revert.
        let ready: Vec<u64> = self
            .sealed
            .iter()
            .filter(|(_, b)| self.finalized(b))
            .map(|(&h, _)| h)
            .collect();
        for h in ready {
            let batch = self.sealed.remove(&h).expect("height listed");
            for effect in batch.effects {
                self.apply_finalized(effect);
            }
            outcome.finalized.push(h);
        }
        Ok(())
    }

    fn apply_finalized(&mut self, effect: Effect) {
        match effect {
            Effect::Mint {
                client,
                token,
                value,
                fee,
            } => {
                self.clients[client as usize].coins.push(RefCoin {
                    token,
                    value,
                    fee,
                    state: RefCoinState::Available,
                });
            }
            Effect::Transfer {
                from,
                to,
                token,
                inputs,
                value,
                fee,
                change_value,
                change_fee,
                tx_fee,
            } => {
                for i in inputs {
                    self.clients[from as usize].coins[i].state = RefCoinState::Spent;
                }
                // Output order matches the live transaction: payment coin
                // first, change second. With `from == to` both land in the
                // same vector in that order.
                self.clients[to as usize].coins.push(RefCoin {
                    token,
                    value,
                    fee,
                    state: RefCoinState::Available,
                });
                if change_value > 0 || change_fee > 0 {
                    self.clients[from as usize].coins.push(RefCoin {
                        token,
                        value: change_value,
                        fee: change_fee,
                        state: RefCoinState::Available,
                    });
                }
                self.clients[from as usize].fees_paid += tx_fee;
                self.operator_fees += tx_fee as u128;
            }
            Effect::Burn {
                client,
                coin,
                token,
                value,
                g_out,
                tx_fee,
            } => {
                let c = &mut self.clients[client as usize];
                c.coins[coin].state = RefCoinState::Spent;
                c.native += g_out as u128;
                *c.tokens.entry(token).or_insert(0) += value as u128;
                c.fees_paid += tx_fee;
                *self.withdrawn_tokens.entry(token).or_insert(0) += value as u128;
                self.withdrawn_native += g_out as u128;
                self.operator_fees += tx_fee as u128;
            }
        }
    }

    fn pending_effects(&self) -> impl Iterator<Item = &Effect> {
        self.in_flight
            .iter()
            .chain(self.sealed.values().flat_map(|b| b.effects.iter()))
    }

    /// Bridge conservation as the mirror sees it: for every asset,
    /// everything deposited is either withdrawn, still embedded in live or
    /// in-flight coins, or (for the native asset) accrued to the operator
    /// as fees. Holds after every action by construction of the effect
    /// queue; the runner checks the live system against the same ledger.
    pub fn conservation(&self) -> ConservationLedger {
        // Values still inside the system: non-spent mirror coins plus
        // mints whose coins have not materialized yet. Locked coins count
        // because their spends have not finalized.
        let mut remaining_tokens: BTreeMap<u64, u128> = BTreeMap::new();
        let mut remaining_native: u128 = 0;
        for client in &self.clients {
            for coin in &client.coins {
                if coin.state != RefCoinState::Spent {
                    *remaining_tokens.entry(coin.token).or_insert(0) += coin.value as u128;
                    remaining_native += coin.fee as u128;
                }
            }
        }
        for effect in self.pending_effects() {
            if let Effect::Mint {
                token, value, fee, ..
            } = effect
            {
                *remaining_tokens.entry(*token).or_insert(0) += *value as u128;
                remaining_native += *fee as u128;
            }
        }

        let mut tokens = Vec::new();
        for (&token, &deposited) in &self.deposited_tokens {
            if token == 0 {
                continue;
            }
            let withdrawn = self.withdrawn_tokens.get(&token).copied().unwrap_or(0);
            let remaining = remaining_tokens.get(&token).copied().unwrap_or(0);
            tokens.push(TokenLedger {
                token,
                deposited,
                withdrawn,
                remaining,
                balanced: deposited == withdrawn + remaining,
            });
        }
        let native = NativeLedger {
            deposited: self.deposited_native,
            withdrawn: self.withdrawn_native,
            remaining: remaining_native,
            operator_fees: self.operator_fees,
            balanced: self.deposited_native
                == self.withdrawn_native + remaining_native + self.operator_fees,
        };
        let balanced = native.balanced && tokens.iter().all(|t| t.balanced);
        ConservationLedger {
            tokens,
            native,
            matches_reference: true,
            balanced,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ClientSpec, OperatorSpec, ProtocolConstants, Scenario, SCENARIO_SCHEMA};

    fn two_client_scenario() -> Scenario {
        Scenario {
            schema: SCENARIO_SCHEMA.into(),
            seed: 1,
            protocol: ProtocolConstants::default(),
            clients: vec![
                ClientSpec {
                    native: 1_000,
                    tokens: [(1u64, 1_000u64)].into_iter().collect(),
                },
                ClientSpec {
                    native: 1_000,
                    tokens: [(1u64, 1_000u64)].into_iter().collect(),
                },
            ],
            operators: vec![OperatorSpec { stake: 2_000 }],
            verifiers: 1,
            rational: None,
            actions: Vec::new(),
        }
    }

    fn close(state: &mut ReferenceState) -> StepOutcome {
        state.apply(&Action::Seal).unwrap();
        state.apply(&Action::AdvanceBlock { blocks: 11 }).unwrap();
        state.apply(&Action::Scan).unwrap()
    }

    #[test]
    fn lifecycle_moves_value_and_balances() {
        let scenario = two_client_scenario();
        let mut s = ReferenceState::new(&scenario);
        s.apply(&Action::Join {
            client: 0,
            token: 1,
            value: 300,
            fee: 50,
        })
        .unwrap();
        assert_eq!(s.clients[0].native, 950);
        assert_eq!(s.clients[0].tokens[&1], 700);
        assert!(s.conservation().balanced);
        close(&mut s);
        assert_eq!(s.clients[0].balance(1), 300);

        s.apply(&Action::Transfer {
            from: 0,
            to: 1,
            token: 1,
            value: 120,
            fee: 10,
            tx_fee: 3,
        })
        .unwrap();
        assert_eq!(s.clients[0].coins[0].state, RefCoinState::Locked);
        assert!(s.conservation().balanced);
        close(&mut s);
        // Payment to client 1, change back to client 0.
        assert_eq!(s.clients[1].coins[0], RefCoin {
            token: 1,
            value: 120,
            fee: 10,
            state: RefCoinState::Available,
        });
        assert_eq!(s.clients[0].coins[1], RefCoin {
            token: 1,
            value: 180,
            fee: 37,
            state: RefCoinState::Available,
        });
        assert_eq!(s.clients[0].fees_paid, 3);

        s.apply(&Action::Burn {
            client: 1,
            token: 1,
            tx_fee: 2,
        })
        .unwrap();
        close(&mut s);
        assert_eq!(s.clients[1].tokens[&1], 1_120);
        assert_eq!(s.clients[1].native, 1_008);
        let ledger = s.conservation();
        assert!(ledger.balanced);
        assert_eq!(ledger.native.operator_fees, 5);
        assert_eq!(ledger.tokens[0].withdrawn, 120);
    }

    #[test]
    fn selection_is_largest_first_and_capped() {
        let coins = vec![
            CoinView { index: 0, value: 10, fee: 1 },
            CoinView { index: 1, value: 40, fee: 1 },
            CoinView { index: 2, value: 40, fee: 1 },
            CoinView { index: 3, value: 5, fee: 9 },
        ];
        // Largest first, index ascending on ties.
        assert_eq!(select_coins(coins.clone(), 70, 2, 8), Some(vec![1, 2]));
        // Fee need keeps pulling coins (still by value) after value is covered.
        assert_eq!(select_coins(coins.clone(), 40, 3, 8), Some(vec![1, 2, 0]));
        // Cap blocks coverage.
        assert_eq!(select_coins(coins.clone(), 90, 1, 2), None);
        assert_eq!(select_coins(Vec::new(), 0, 0, 8), None);
    }

    #[test]
    fn insufficiencies_are_reported() {
        let scenario = two_client_scenario();
        let mut s = ReferenceState::new(&scenario);
        assert_eq!(
            s.apply(&Action::Join {
                client: 0,
                token: 1,
                value: 5_000,
                fee: 0,
            }),
            Err(ReferenceError::InsufficientL1Token { client: 0, token: 1 })
        );
        assert_eq!(
            s.apply(&Action::Transfer {
                from: 0,
                to: 1,
                token: 1,
                value: 1,
                fee: 0,
                tx_fee: 1,
            }),
            Err(ReferenceError::InsufficientCoins { client: 0, token: 1 })
        );
        assert_eq!(
            s.apply(&Action::Burn {
                client: 0,
                token: 1,
                tx_fee: 2,
            }),
            Err(ReferenceError::NoBurnableCoin { client: 0, token: 1 })
        );
    }

    #[test]
    fn tainted_batches_revert_and_replay() {
        let scenario = two_client_scenario();
        let mut honest = ReferenceState::new(&scenario);
        let mut attacked = ReferenceState::new(&scenario);
        let join = Action::Join {
            client: 0,
            token: 1,
            value: 200,
            fee: 40,
        };
        honest.apply(&join).unwrap();
        attacked.apply(&join).unwrap();

        close(&mut honest);

        attacked.apply(&Action::Inject { rule: "R2a".into() }).unwrap();
        attacked.apply(&Action::Seal).unwrap();
        let outcome = attacked.apply(&Action::Scan).unwrap();
        assert_eq!(outcome.disputed, vec![1]);
        // The deposit's effects were requeued; the next round lands them.
        close(&mut attacked);
        assert_eq!(attacked.clients[0].coins, honest.clients[0].coins);
        assert!(attacked.conservation().balanced);
    }

    #[test]
    fn undisputed_violations_are_an_error() {
        let scenario = two_client_scenario();
        let mut s = ReferenceState::new(&scenario);
        s.apply(&Action::Inject { rule: "R2a".into() }).unwrap();
        s.apply(&Action::Seal).unwrap();
        s.apply(&Action::AdvanceBlock { blocks: 20 }).unwrap();
        assert_eq!(
            s.apply(&Action::Scan),
            Err(ReferenceError::UndisputedViolation { height: 1 })
        );
    }
}
