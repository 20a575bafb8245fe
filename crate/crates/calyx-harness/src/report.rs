//! Machine-readable run reports.
//!
//! Reports are serialized as JSON with a versioned `schema` field. Field
//! order follows struct declaration order, maps are `BTreeMap`s, and no
//! floating-point numbers appear anywhere (ratios are parts-per-million
//! integers), so the same run always produces byte-identical report text.

use calyx_core::blob::CapacityReport;
use calyx_core::l1sim::{Event, EventKind};
use serde::{Deserialize, Serialize};

/// Schema tag of reports produced by this crate.
pub const REPORT_SCHEMA: &str = "calyx-report/1";

/// Published capacity reference counts for a default-parameter blob.
pub const REFERENCE_CAPACITY: (u64, u64, u64) = (269, 167, 86);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub seed: u64,
    /// Actions executed, in order, rendered canonically.
    pub actions: Vec<String>,
    /// Every contract event, in emission order.
    pub events: Vec<ReportEvent>,
    pub batches: Vec<BatchSummary>,
    pub disputes: Vec<DisputeOutcome>,
    pub capacity: CapacityTable,
    pub conservation: ConservationLedger,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lind: Option<LindStats>,
}

impl Default for Report {
    fn default() -> Report {
        Report {
            schema: REPORT_SCHEMA.into(),
            seed: 0,
            actions: Vec::new(),
            events: Vec::new(),
            batches: Vec::new(),
            disputes: Vec::new(),
            capacity: CapacityTable::from_report(&calyx_core::blob::capacity(
                &calyx_core::params::Params::default(),
            )),
            conservation: ConservationLedger::empty(),
            lind: None,
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One L1 contract event in report form: field elements and addresses as
/// lowercase hex, amounts as integers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportEventKind {
    Lock {
        nonce: u64,
        token: String,
        value: u64,
        g: u64,
    },
    NewBatch {
        height: u64,
        commitment: String,
        publisher: String,
        block_fin: u64,
    },
    Dispute {
        height: u64,
        rule: String,
        publisher: String,
        challenger: String,
    },
    Slash {
        loser: String,
        winner: String,
        amount: u128,
    },
    Retrieve {
        height: u64,
        bracket: u64,
        tx: u64,
        token: String,
        value: u64,
        g: u64,
        beneficiary: String,
    },
    Revert {
        from_height: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEvent {
    pub block: u64,
    #[serde(flatten)]
    pub kind: ReportEventKind,
}

impl ReportEvent {
    pub fn from_chain(event: &Event) -> ReportEvent {
        let kind = match &event.kind {
            EventKind::Lock {
                nonce,
                pk_sig: _,
                token,
                value,
                g,
            } => ReportEventKind::Lock {
                nonce: *nonce,
                token: hex::encode(token.to_be_bytes()),
                value: *value,
                g: *g,
            },
            EventKind::NewBatch {
                height,
                commitment,
                publisher,
                block_fin,
            } => ReportEventKind::NewBatch {
                height: *height,
                commitment: hex::encode(commitment.0.to_be_bytes()),
                publisher: hex::encode(publisher.0),
                block_fin: *block_fin,
            },
            EventKind::Dispute {
                height,
                rule,
                publisher,
                challenger,
            } => ReportEventKind::Dispute {
                height: *height,
                rule: format!("{rule:?}"),
                publisher: hex::encode(publisher.0),
                challenger: hex::encode(challenger.0),
            },
            EventKind::Slash {
                loser,
                winner,
                amount,
            } => ReportEventKind::Slash {
                loser: hex::encode(loser.0),
                winner: hex::encode(winner.0),
                amount: *amount,
            },
            EventKind::Retrieve {
                height,
                bracket,
                tx,
                token,
                value,
                g,
                beneficiary,
            } => ReportEventKind::Retrieve {
                height: *height,
                bracket: *bracket,
                tx: *tx,
                token: hex::encode(token.to_be_bytes()),
                value: *value,
                g: *g,
                beneficiary: hex::encode(beneficiary.0),
            },
            EventKind::Revert { from_height } => ReportEventKind::Revert {
                from_height: *from_height,
            },
        };
        ReportEvent {
            block: event.block,
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub height: u64,
    pub brackets: u64,
    pub transactions: u64,
    pub words_used: u64,
    pub finalized: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeOutcome {
    pub height: u64,
    pub rule: String,
    pub accepted: bool,
    pub reward: u128,
    pub challenger: String,
}

/// Computed homogeneous-batch maxima next to the published reference
/// counts; deviation is |computed − reference| / reference in ppm.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityTable {
    pub mint_tx_words: u64,
    pub burn_tx_words: u64,
    pub transfer_tx_words: u64,
    pub fee_collect_bracket_words: u64,
    pub max_mints: u64,
    pub max_burns: u64,
    pub max_transfers: u64,
    pub reference_mints: u64,
    pub reference_burns: u64,
    pub reference_transfers: u64,
    pub mint_deviation_ppm: u64,
    pub burn_deviation_ppm: u64,
    pub transfer_deviation_ppm: u64,
}

/// |computed − reference| / reference, in parts per million.
pub fn deviation_ppm(computed: u64, reference: u64) -> u64 {
    let diff = computed.abs_diff(reference) as u128;
    (diff * 1_000_000 / reference as u128) as u64
}

impl CapacityTable {
    pub fn from_report(report: &CapacityReport) -> CapacityTable {
        let (rm, rb, rt) = REFERENCE_CAPACITY;
        CapacityTable {
            mint_tx_words: report.mint_tx_words,
            burn_tx_words: report.burn_tx_words,
            transfer_tx_words: report.transfer_tx_words,
            fee_collect_bracket_words: report.fee_collect_bracket_words,
            max_mints: report.max_mints,
            max_burns: report.max_burns,
            max_transfers: report.max_transfers,
            reference_mints: rm,
            reference_burns: rb,
            reference_transfers: rt,
            mint_deviation_ppm: deviation_ppm(report.max_mints, rm),
            burn_deviation_ppm: deviation_ppm(report.max_burns, rb),
            transfer_deviation_ppm: deviation_ppm(report.max_transfers, rt),
        }
    }
}

/// Per-token value conservation: locked = withdrawn + still shielded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub token: u64,
    pub deposited: u128,
    pub withdrawn: u128,
    pub remaining: u128,
    pub balanced: bool,
}

/// Fee-asset conservation: locked fee budget = withdrawn + still embedded
/// in shielded coins + collected by operators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NativeLedger {
    pub deposited: u128,
    pub withdrawn: u128,
    pub remaining: u128,
    pub operator_fees: u128,
    pub balanced: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationLedger {
    pub tokens: Vec<TokenLedger>,
    pub native: NativeLedger,
    /// Full-stack wallet balances agree with the reference interpreter.
    pub matches_reference: bool,
    pub balanced: bool,
}

impl ConservationLedger {
    pub fn empty() -> ConservationLedger {
        ConservationLedger {
            tokens: Vec::new(),
            native: NativeLedger {
                deposited: 0,
                withdrawn: 0,
                remaining: 0,
                operator_fees: 0,
                balanced: true,
            },
            matches_reference: true,
            balanced: true,
        }
    }
}

/// Outcome statistics of an L2-IND run. `advantage_ppm` is
/// |wins/rounds − 1/2| in parts per million; the Wilson bounds are the 95%
/// score interval for the win rate, also in ppm.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LindStats {
    pub mode: String,
    pub strategy: String,
    pub rounds: u64,
    pub wins: u64,
    pub losses_by_fraud: u64,
    pub inconsistent_pairs_rejected: u64,
    pub win_rate_ppm: u64,
    pub advantage_ppm: u64,
    pub wilson_low_ppm: u64,
    pub wilson_high_ppm: u64,
    /// Strict mode only: scripts replayed under both bits with transcripts
    /// compared byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_scripts: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_matches: Option<u64>,
}

/// 95% Wilson score interval bounds for `wins` successes out of `rounds`,
/// in parts per million, computed in integer arithmetic.
pub fn wilson_interval_ppm(wins: u64, rounds: u64) -> (u64, u64) {
    if rounds == 0 {
        return (0, 1_000_000);
    }
    // z = 1.96 for the 95% interval, carried as z²·10⁴ = 38416.
    const Z2_E4: u128 = 38_416;
    let n = rounds as u128;
    let w = wins as u128;
    let denom = n * 10_000 + Z2_E4; // (n + z²)·10⁴
    let center = (w * 10_000 + Z2_E4 / 2) * 1_000_000 / denom; // ppm
    // half-width² = 10¹²·z²·(w(n−w)/n + z²/4)/(n+z²)²; the inner sum is
    // assembled at 10⁸ scale, then divided by denom twice with 10⁴
    // rescaling each time to land on ppm².
    let inner = w * (n - w) * 100_000_000 / n + Z2_E4 * 2_500;
    let radicand = Z2_E4 * inner / denom * 10_000 / denom * 10_000;
    let half_width = isqrt_u128(radicand);
    // At the extremes the exact bound is 0 or 1; don't let truncation
    // nudge it off by a ppm.
    let low = if wins == 0 { 0 } else { center.saturating_sub(half_width) };
    let high = if wins == rounds {
        1_000_000
    } else {
        (center + half_width).min(1_000_000)
    };
    (low as u64, high as u64)
}

fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = 1u128 << ((128 - n.leading_zeros()).div_ceil(2));
    loop {
        let next = (x + n / x) / 2;
        if next >= x {
            return x;
        }
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_brackets_the_rate() {
        let (low, high) = wilson_interval_ppm(500, 1000);
        assert!(low < 500_000 && 500_000 < high, "{low}..{high}");
        assert!(high - low < 70_000, "95% width for n=1000 is ~6%: {low}..{high}");

        let (low, high) = wilson_interval_ppm(1000, 1000);
        assert!(low > 990_000, "perfect record has a tight lower bound: {low}");
        assert_eq!(high, 1_000_000);

        let (low, high) = wilson_interval_ppm(0, 1000);
        assert_eq!(low, 0);
        assert!(high < 10_000, "{high}");

        // Monotone in wins.
        let mut prev = 0;
        for wins in [0, 100, 400, 600, 900, 1000] {
            let (low, _) = wilson_interval_ppm(wins, 1000);
            assert!(low >= prev, "lower bound must not decrease");
            prev = low;
        }
    }

    #[test]
    fn report_roundtrips_and_is_stable() {
        let report = Report {
            schema: REPORT_SCHEMA.into(),
            seed: 7,
            actions: vec!["seal".into()],
            events: vec![ReportEvent {
                block: 3,
                kind: ReportEventKind::Revert { from_height: 2 },
            }],
            batches: vec![BatchSummary {
                height: 1,
                brackets: 2,
                transactions: 3,
                words_used: 99,
                finalized: true,
            }],
            disputes: Vec::new(),
            capacity: CapacityTable::from_report(&calyx_core::blob::capacity(
                &calyx_core::params::Params::default(),
            )),
            conservation: ConservationLedger::empty(),
            lind: None,
        };
        let a = report.to_json();
        let b = report.to_json();
        assert_eq!(a, b);
        assert_eq!(Report::from_json(&a).unwrap(), report);
        assert!(a.contains("\"schema\": \"calyx-report/1\""));
    }

    #[test]
    fn deviation_is_symmetric_scale() {
        assert_eq!(deviation_ppm(269, 269), 0);
        assert_eq!(deviation_ppm(100, 200), 500_000);
        assert_eq!(deviation_ppm(250, 200), 250_000);
    }
}
