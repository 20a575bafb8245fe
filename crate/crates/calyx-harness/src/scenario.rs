//! Scenario files: participants, protocol constants, and an action script.
//!
//! Scenarios are JSON with a versioned `schema` field. Loading validates
//! the whole file and reports every violated constraint at once, including
//! the rational-security stake bound when a scenario opts into it.

use std::collections::BTreeMap;
use std::fmt;

use calyx_core::fraud::RuleId;
use calyx_core::params::Params;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::reference::ReferenceState;

/// Schema tag of scenario files produced and accepted by this crate.
pub const SCENARIO_SCHEMA: &str = "calyx-scenario/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    pub seed: u64,
    pub protocol: ProtocolConstants,
    pub clients: Vec<ClientSpec>,
    pub operators: Vec<OperatorSpec>,
    /// Number of watching verifiers. Disputing needs no stake, so a count
    /// is all that is required.
    pub verifiers: u32,
    /// Present iff the scenario opts into the rational security model; the
    /// stake bound is then enforced at load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational: Option<RationalConfig>,
    pub actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConstants {
    /// Fraud-proof period in blocks.
    pub fpp: u64,
    /// Minimum operator stake accepted by the judge.
    pub min_stake: u128,
    /// Merkle tree depth D.
    pub depth: u32,
    /// Circuit slot count M.
    pub m: usize,
    /// Value bit width l.
    pub l: u32,
    pub bracket_capacity: usize,
    pub transfer_fee_floor: u64,
    pub burn_fee_floor: u64,
}

impl Default for ProtocolConstants {
    fn default() -> ProtocolConstants {
        let p = Params::default();
        ProtocolConstants {
            fpp: 10,
            min_stake: 1_000,
            depth: p.depth,
            m: p.m,
            l: p.l,
            bracket_capacity: p.bracket_capacity,
            transfer_fee_floor: p.transfer_fee_floor,
            burn_fee_floor: p.burn_fee_floor,
        }
    }
}

impl ProtocolConstants {
    pub fn params(&self) -> Params {
        Params {
            depth: self.depth,
            m: self.m,
            l: self.l,
            bracket_capacity: self.bracket_capacity,
            transfer_fee_floor: self.transfer_fee_floor,
            burn_fee_floor: self.burn_fee_floor,
            ..Params::default()
        }
    }
}

/// Initial L1 holdings of one client. Token ids are small integers; id 0
/// is the native fee asset and cannot appear in `tokens`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub native: u64,
    pub tokens: BTreeMap<u64, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub stake: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalConfig {
    /// Configured dispute cost c_f, in native units.
    pub dispute_cost: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Action {
    /// L1 deposit plus the mint bracket redeeming it. `fee` is the native
    /// budget embedded in the new coin. Token 0 deposits carry only fees
    /// and must have `value` 0.
    Join {
        client: u32,
        token: u64,
        value: u64,
        fee: u64,
    },
    /// Shielded payment. `fee` is the budget embedded in the recipient's
    /// coin, `tx_fee` the public operator fee.
    Transfer {
        from: u32,
        to: u32,
        token: u64,
        value: u64,
        fee: u64,
        tx_fee: u64,
    },
    /// Whole-coin exit of the client's largest spendable coin of `token`.
    Burn {
        client: u32,
        token: u64,
        tx_fee: u64,
    },
    AdvanceBlock {
        blocks: u64,
    },
    /// The active operator publishes its mempool; operators rotate
    /// round-robin afterwards.
    Seal,
    /// Verifiers replay every unseen batch; wallets ingest newly finalized
    /// batches and collect their matured burns.
    Scan,
    /// Tampers the active operator's next sealed batch so the named rule is
    /// violated. Only rules provable from published data alone can be
    /// injected mid-scenario; witness-level rules live in the dedicated
    /// injection harness.
    Inject {
        rule: String,
    },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Join {
                client,
                token,
                value,
                fee,
            } => write!(f, "join client={client} token={token} value={value} fee={fee}"),
            Action::Transfer {
                from,
                to,
                token,
                value,
                fee,
                tx_fee,
            } => write!(
                f,
                "transfer from={from} to={to} token={token} value={value} fee={fee} tx_fee={tx_fee}"
            ),
            Action::Burn {
                client,
                token,
                tx_fee,
            } => write!(f, "burn client={client} token={token} tx_fee={tx_fee}"),
            Action::AdvanceBlock { blocks } => write!(f, "advance_block blocks={blocks}"),
            Action::Seal => write!(f, "seal"),
            Action::Scan => write!(f, "scan"),
            Action::Inject { rule } => write!(f, "inject rule={rule}"),
        }
    }
}

/// Rules a scenario-level injection can express by editing words of an
/// already-published blob. The remaining rules need witness- or
/// construction-level control over batch contents and are exercised by the
/// dedicated injection matrix instead.
pub const SCENARIO_INJECTABLE: &[RuleId] = &[
    RuleId::R1a,
    RuleId::R2a,
    RuleId::R2c,
    RuleId::R3e,
    RuleId::R3g,
    RuleId::R3h,
];

pub fn parse_rule(name: &str) -> Option<RuleId> {
    let all = [
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
    let want = name.trim();
    all.into_iter().find(|r| {
        let tag = format!("{r:?}");
        tag.eq_ignore_ascii_case(want) || tag[1..].eq_ignore_ascii_case(want)
    })
}

impl Scenario {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Total value the script locks in the bridge, in summed units of all
    /// assets (token values plus native fee budgets).
    pub fn total_value_locked(&self) -> u128 {
        self.actions
            .iter()
            .map(|a| match a {
                Action::Join { value, fee, .. } => *value as u128 + *fee as u128,
                _ => 0,
            })
            .sum()
    }

    /// Validates the whole scenario, returning every violated constraint.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();

        if self.schema != SCENARIO_SCHEMA {
            errors.push(format!(
                "schema: expected {SCENARIO_SCHEMA:?}, found {:?}",
                self.schema
            ));
        }
        let params = self.protocol.params();
        if let Err(e) = params.validate() {
            errors.push(format!("protocol: invalid parameters: {e:?}"));
        }
        if self.operators.is_empty() {
            errors.push("operators: at least one operator is required".into());
        }
        if self.verifiers == 0 {
            errors.push("verifiers: at least one verifier is required".into());
        }
        for (i, op) in self.operators.iter().enumerate() {
            if op.stake < self.protocol.min_stake {
                errors.push(format!(
                    "operators[{i}]: stake {} is below the protocol minimum {}",
                    op.stake, self.protocol.min_stake
                ));
            }
        }
        for (i, client) in self.clients.iter().enumerate() {
            if client.tokens.contains_key(&0) {
                errors.push(format!(
                    "clients[{i}]: token 0 is the native asset; use the `native` field"
                ));
            }
        }

        let value_bound = calyx_core::crypto::range_bound(self.protocol.l);
        let client_count = self.clients.len() as u32;
        for (i, action) in self.actions.iter().enumerate() {
            let mut client_in_range = |c: u32, role: &str| {
                if c >= client_count {
                    errors.push(format!(
                        "actions[{i}]: {role} index {c} out of range ({client_count} clients)"
                    ));
                }
            };
            match action {
                Action::Join {
                    client,
                    token,
                    value,
                    fee,
                } => {
                    client_in_range(*client, "client");
                    if (*value as u128) >= value_bound || (*fee as u128) >= value_bound {
                        errors.push(format!("actions[{i}]: join amounts exceed the 2^l range"));
                    }
                    if *token == 0 && *value != 0 {
                        errors.push(format!(
                            "actions[{i}]: token 0 deposits carry fees only; value must be 0"
                        ));
                    }
                }
                Action::Transfer {
                    from,
                    to,
                    value,
                    fee,
                    tx_fee,
                    token,
                } => {
                    client_in_range(*from, "sender");
                    client_in_range(*to, "recipient");
                    if *token == 0 {
                        errors.push(format!("actions[{i}]: transfers move real tokens; token must be nonzero"));
                    }
                    if (*value as u128) >= value_bound || (*fee as u128) >= value_bound {
                        errors.push(format!("actions[{i}]: transfer amounts exceed the 2^l range"));
                    }
                    if *tx_fee < self.protocol.transfer_fee_floor {
                        errors.push(format!(
                            "actions[{i}]: tx_fee {tx_fee} below the transfer floor {}",
                            self.protocol.transfer_fee_floor
                        ));
                    }
                }
                Action::Burn {
                    client,
                    token,
                    tx_fee,
                } => {
                    client_in_range(*client, "client");
                    if *token == 0 {
                        errors.push(format!("actions[{i}]: burns exit real tokens; token must be nonzero"));
                    }
                    if *tx_fee < self.protocol.burn_fee_floor {
                        errors.push(format!(
                            "actions[{i}]: tx_fee {tx_fee} below the burn floor {}",
                            self.protocol.burn_fee_floor
                        ));
                    }
                }
                Action::Inject { rule } => match parse_rule(rule) {
                    None => errors.push(format!("actions[{i}]: unknown rule {rule:?}")),
                    Some(r) if !SCENARIO_INJECTABLE.contains(&r) => errors.push(format!(
                        "actions[{i}]: rule {r:?} needs witness-level construction; use the injection matrix"
                    )),
                    Some(_) => {}
                },
                Action::AdvanceBlock { .. } | Action::Seal | Action::Scan => {}
            }
        }

        // Rational security gate: S > TVL/|V| + c_f for every operator,
        // kept in integers as S·|V| > TVL + c_f·|V|.
        if let Some(rational) = &self.rational {
            let tvl = self.total_value_locked();
            let v = self.verifiers as u128;
            for (i, op) in self.operators.iter().enumerate() {
                if op.stake * v <= tvl + rational.dispute_cost * v {
                    errors.push(format!(
                        "rational: operators[{i}] stake {} does not exceed TVL/|V| + c_f \
                         = {tvl}/{v} + {}",
                        op.stake, rational.dispute_cost
                    ));
                }
            }
        }

        // A dry run of the plain interpreter catches balance-infeasible
        // scripts (overdrawn transfers, burns without a matching coin)
        // without touching any cryptography.
        if errors.is_empty() {
            let mut reference = ReferenceState::new(self);
            for (i, action) in self.actions.iter().enumerate() {
                if let Err(e) = reference.apply(action) {
                    errors.push(format!("actions[{i}]: infeasible: {e}"));
                    break;
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Builds a randomized honest scenario: 3–8 clients, 2–3 tokens, 20–60
/// transfers spread over at least two sealed batches, closed out so every
/// batch finalizes and every burn is collected. The script is feasible by
/// construction: it is generated against the same plain interpreter the
/// runner later checks against.
pub fn random_scenario(seed: u64) -> Scenario {
    random_scenario_with(seed, None)
}

/// [`random_scenario`] with an optional fault: `inject = (round, rule)`
/// taints the seal closing transfer round `round` (0-based, counting from
/// the first transfer round). The mirror sees the injection while the
/// script grows, so later actions stay feasible around the revert.
pub fn random_scenario_with(seed: u64, inject: Option<(u32, RuleId)>) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5ce7_a51a_c0de_0001);
    let protocol = ProtocolConstants::default();
    let client_count = rng.gen_range(3..=8u32);
    let token_count = rng.gen_range(2..=3u64);
    let transfer_target = rng.gen_range(20..=60u32);

    let mut clients = Vec::new();
    for _ in 0..client_count {
        let mut tokens = BTreeMap::new();
        for t in 1..=token_count {
            tokens.insert(t, 4_000);
        }
        clients.push(ClientSpec {
            native: 4_000,
            tokens,
        });
    }
    let operators = vec![OperatorSpec { stake: 2_000 }; rng.gen_range(1..=2)];

    let mut scenario = Scenario {
        schema: SCENARIO_SCHEMA.into(),
        seed,
        protocol,
        clients,
        operators,
        verifiers: rng.gen_range(1..=2),
        rational: None,
        actions: Vec::new(),
    };

    // Grow the script against the plain interpreter so every emitted
    // action is feasible when the runner replays it.
    let mut mirror = ReferenceState::new(&scenario);
    let mut actions = Vec::new();
    let push = |mirror: &mut ReferenceState, actions: &mut Vec<Action>, a: Action| {
        mirror.apply(&a).expect("generated action must be feasible");
        actions.push(a);
    };

    // Opening joins: every client funds every token once, with a second
    // coin for some so change patterns vary.
    for c in 0..client_count {
        for t in 1..=token_count {
            let value = rng.gen_range(200..=400);
            let fee = rng.gen_range(90..=160);
            push(&mut mirror, &mut actions, Action::Join {
                client: c,
                token: t,
                value,
                fee,
            });
            if rng.gen_bool(0.3) {
                let value = rng.gen_range(100..=200);
                let fee = rng.gen_range(60..=100);
                push(&mut mirror, &mut actions, Action::Join {
                    client: c,
                    token: t,
                    value,
                    fee,
                });
            }
        }
    }
    // Seal, scan while the dispute window is open (so any tainted batch can
    // still be challenged), then run out the window and scan again so the
    // batch finalizes and its outputs become spendable.
    let close_round = |mirror: &mut ReferenceState, actions: &mut Vec<Action>| {
        for action in [
            Action::Seal,
            Action::Scan,
            Action::AdvanceBlock { blocks: ProtocolConstants::default().fpp + 1 },
            Action::Scan,
        ] {
            mirror.apply(&action).expect("round close is always feasible");
            actions.push(action);
        }
    };
    close_round(&mut mirror, &mut actions);

    // Transfer rounds: small bursts of payments, then seal + finalize so
    // outputs become spendable for the next round. Occasional burns mix
    // exits into the flow.
    let mut transfers_done = 0u32;
    let mut round = 0u32;
    while transfers_done < transfer_target {
        let burst = rng
            .gen_range(4..=9u32)
            .min(transfer_target - transfers_done);
        let mut emitted = 0;
        let mut attempts = 0;
        while emitted < burst && attempts < 200 {
            attempts += 1;
            let from = rng.gen_range(0..client_count);
            let to = rng.gen_range(0..client_count);
            let token = rng.gen_range(1..=token_count);
            // Propose a payment the mirror can afford right now.
            let Some((max_value, max_fee)) = mirror.spendable(from, token) else {
                continue;
            };
            if max_value < 2 {
                continue;
            }
            let tx_fee = rng.gen_range(1..=3u64);
            if max_fee < tx_fee + 1 {
                continue;
            }
            let value = rng.gen_range(1..=(max_value / 2).max(1));
            let fee = rng.gen_range(1..=((max_fee - tx_fee) / 2).max(1));
            let action = Action::Transfer {
                from,
                to,
                token,
                value,
                fee,
                tx_fee,
            };
            if mirror.apply(&action).is_ok() {
                actions.push(action);
                emitted += 1;
                transfers_done += 1;
            }
        }
        if rng.gen_bool(0.35) {
            let client = rng.gen_range(0..client_count);
            let token = rng.gen_range(1..=token_count);
            let tx_fee = scenario.protocol.burn_fee_floor;
            let action = Action::Burn {
                client,
                token,
                tx_fee,
            };
            if mirror.apply(&action).is_ok() {
                actions.push(action);
            }
        }
        if let Some((target, rule)) = inject {
            if round == target {
                push(&mut mirror, &mut actions, Action::Inject { rule: rule.label().into() });
            }
        }
        close_round(&mut mirror, &mut actions);
        round += 1;
    }
    // An injection in the final round leaves its re-published batch
    // pending; settle everything with one more honest close.
    if inject.is_some() {
        close_round(&mut mirror, &mut actions);
    }

    scenario.actions = actions;
    debug_assert!(scenario.validate().is_ok());
    scenario
}

/// Deterministic per-participant addresses.
pub fn client_address(i: u32) -> calyx_core::crypto::L1Address {
    let mut bytes = [0u8; 20];
    bytes[0] = 0xC1;
    bytes[16..].copy_from_slice(&i.to_be_bytes());
    calyx_core::crypto::L1Address(bytes)
}

pub fn operator_address(i: u32) -> calyx_core::crypto::L1Address {
    let mut bytes = [0u8; 20];
    bytes[0] = 0x0E;
    bytes[16..].copy_from_slice(&i.to_be_bytes());
    calyx_core::crypto::L1Address(bytes)
}

pub fn verifier_address(i: u32) -> calyx_core::crypto::L1Address {
    let mut bytes = [0u8; 20];
    bytes[0] = 0xEF;
    bytes[16..].copy_from_slice(&i.to_be_bytes());
    calyx_core::crypto::L1Address(bytes)
}

/// Derives the chain's proof-system key from the scenario seed.
pub fn proof_key_for_seed(seed: u64) -> [u8; 32] {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5ce7_a51a_c0de_0002);
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    key
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_names_parse_case_insensitively() {
        assert_eq!(parse_rule("R1a"), Some(RuleId::R1a));
        assert_eq!(parse_rule("3h"), Some(RuleId::R3h));
        assert_eq!(parse_rule("r2C"), Some(RuleId::R2c));
        assert_eq!(parse_rule("R9z"), None);
    }

    #[test]
    fn scenario_roundtrips_through_json() {
        let s = random_scenario(3);
        let text = s.to_json();
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
    }

    #[test]
    fn generated_scenarios_validate_and_hit_the_brief() {
        for seed in [0, 1, 2, 97] {
            let s = random_scenario(seed);
            s.validate().expect("generated scenario validates");
            assert!((3..=8).contains(&(s.clients.len() as u32)));
            let transfers = s
                .actions
                .iter()
                .filter(|a| matches!(a, Action::Transfer { .. }))
                .count();
            assert!((20..=60).contains(&transfers), "{transfers} transfers");
            let seals = s.actions.iter().filter(|a| matches!(a, Action::Seal)).count();
            assert!(seals >= 2, "at least two batches");
        }
    }

    #[test]
    fn validation_reports_every_violation() {
        let mut s = random_scenario(5);
        s.schema = "bogus/9".into();
        s.operators[0].stake = 10;
        s.actions.push(Action::Transfer {
            from: 99,
            to: 0,
            token: 1,
            value: 5,
            fee: 1,
            tx_fee: 0,
        });
        s.actions.push(Action::Inject { rule: "R1d".into() });
        let errors = s.validate().unwrap_err();
        assert!(errors.iter().any(|e| e.contains("schema")), "{errors:?}");
        assert!(errors.iter().any(|e| e.contains("below the protocol minimum")));
        assert!(errors.iter().any(|e| e.contains("out of range")));
        assert!(errors.iter().any(|e| e.contains("below the transfer floor")));
        assert!(errors.iter().any(|e| e.contains("injection matrix")));
        assert!(errors.len() >= 5);
    }

    #[test]
    fn rational_gate_enforces_the_stake_bound() {
        let mut s = random_scenario(6);
        let tvl = s.total_value_locked();
        s.verifiers = 2;
        s.rational = Some(RationalConfig { dispute_cost: 50 });
        // Exactly at the bound: rejected (strict inequality required).
        s.operators = vec![OperatorSpec {
            stake: tvl / 2 + 50,
        }];
        s.protocol.min_stake = 1;
        let errors = s.validate().unwrap_err();
        assert!(errors.iter().any(|e| e.contains("does not exceed TVL")), "{errors:?}");
        // Above the bound: accepted.
        s.operators = vec![OperatorSpec {
            stake: tvl / 2 + 51,
        }];
        assert!(s.validate().is_ok());
    }
}
