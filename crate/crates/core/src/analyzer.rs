//! Turns raw measurement records into per-probe verdicts and fingerprints:
//! annotation, repetition consolidation, and the four-run interpretation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{blockpage_body, zoo_default, BlockingAction};
use crate::packet::parse_packet;
use crate::prober::{MeasurementRecord, PacketDirection, RecordStatus};

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("no verdict for probe {0}")]
    MissingVerdict(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad signature file: {0}")]
    BadSignatures(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Blockpage signatures

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockpageSignature {
    pub id: String,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BlockpageDb {
    pub signatures: Vec<BlockpageSignature>,
}

impl BlockpageDb {
    /// Signatures for every blockpage-injecting profile in the builtin zoo.
    pub fn zoo_default() -> Self {
        let mut signatures = Vec::new();
        for p in zoo_default() {
            if let BlockingAction::InjectBlockpage(sig) = &p.blocking_action {
                signatures.push(BlockpageSignature {
                    id: sig.clone(),
                    patterns: vec![String::from_utf8_lossy(&blockpage_body(sig)).into_owned()],
                });
            }
        }
        BlockpageDb { signatures }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AnalyzerError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn merge(&mut self, other: BlockpageDb) {
        self.signatures.extend(other.signatures);
    }

    pub fn matches(&self, body: &[u8]) -> Option<&str> {
        for sig in &self.signatures {
            for pat in &sig.patterns {
                if crate::netsim::find_subslice(body, pat.as_bytes()).is_some() {
                    return Some(&sig.id);
                }
            }
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Outcomes

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCategory {
    Invalid,
    ValidResponse,
    Blackhole,
    BlockedRst,
    BlockedBlockpage(String),
}

impl OutcomeCategory {
    /// Consolidation priority: more explicit blocking evidence ranks higher.
    fn rank(&self) -> u8 {
        match self {
            OutcomeCategory::Invalid => 0,
            OutcomeCategory::ValidResponse => 1,
            OutcomeCategory::Blackhole => 2,
            OutcomeCategory::BlockedRst => 3,
            OutcomeCategory::BlockedBlockpage(_) => 4,
        }
    }
}

/// Classified measurement. Equality compares the category only (including
/// the blockpage signature id); evidence indices never affect grouping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub category: OutcomeCategory,
    /// Indices into the record's packet list backing the classification.
    pub evidence: Vec<usize>,
}

impl PartialEq for Outcome {
    fn eq(&self, other: &Self) -> bool {
        self.category == other.category
    }
}
impl Eq for Outcome {}

impl Outcome {
    pub fn new(category: OutcomeCategory) -> Self {
        Outcome { category, evidence: Vec::new() }
    }
}

/// Classify the response observed after the application request. Pure ACKs
/// are not responses: only payload-bearing packets or RSTs count, so an
/// absent FIN/ACK exchange alone is never blackholing, and total silence is.
pub fn annotate(record: &MeasurementRecord, signatures: &BlockpageDb) -> Outcome {
    if record.status != RecordStatus::Completed {
        return Outcome::new(OutcomeCategory::Invalid);
    }

    // The request is the last outbound payload-bearing packet (for fragmented
    // requests that is the last fragment; the reassembled whole precedes it).
    let mut request_idx = None;
    for (i, ev) in record.packets.iter().enumerate() {
        if ev.direction != PacketDirection::Out {
            continue;
        }
        let bytes = ev.bytes();
        if let Ok(p) = parse_packet(&bytes) {
            if !p.payload.is_empty() {
                request_idx = Some(i);
            }
        }
    }
    let request_idx = match request_idx {
        Some(i) => i,
        None => return Outcome::new(OutcomeCategory::Invalid),
    };

    let mut blockpage: Option<(String, usize)> = None;
    let mut rst: Option<usize> = None;
    let mut data: Option<usize> = None;
    for (i, ev) in record.packets.iter().enumerate().skip(request_idx + 1) {
        if ev.direction != PacketDirection::In {
            continue;
        }
        let bytes = ev.bytes();
        let Ok(p) = parse_packet(&bytes) else { continue };
        if !p.payload.is_empty() {
            if blockpage.is_none() {
                if let Some(sig) = signatures.matches(&p.payload) {
                    blockpage = Some((sig.to_string(), i));
                }
            }
            data.get_or_insert(i);
        }
        if p.flags().rst() {
            rst.get_or_insert(i);
        }
    }

    if let Some((sig, i)) = blockpage {
        return Outcome { category: OutcomeCategory::BlockedBlockpage(sig), evidence: vec![i] };
    }
    if let Some(i) = rst {
        return Outcome { category: OutcomeCategory::BlockedRst, evidence: vec![i] };
    }
    if let Some(i) = data {
        return Outcome { category: OutcomeCategory::ValidResponse, evidence: vec![i] };
    }
    Outcome { category: OutcomeCategory::Blackhole, evidence: vec![request_idx] }
}

/// Collapse the repetitions of one (target, probe, role) into one outcome:
/// any blocking category beats ValidResponse, the most explicit blocking
/// signal wins, and only an all-Invalid set stays Invalid.
pub fn consolidate(outcomes: &[Outcome]) -> Outcome {
    let mut best: Option<&Outcome> = None;
    for o in outcomes {
        if o.category == OutcomeCategory::Invalid {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                o.category.rank() > b.category.rank()
                    || (o.category.rank() == b.category.rank() && o.category < b.category)
            }
        };
        if better {
            best = Some(o);
        }
    }
    best.cloned().unwrap_or_else(|| Outcome::new(OutcomeCategory::Invalid))
}

// ---------------------------------------------------------------------------
// Interpretation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictValue {
    Bypass,
    NoEffect,
    Inconclusive,
}

impl VerdictValue {
    pub fn bit(self) -> i8 {
        match self {
            VerdictValue::Bypass => 1,
            VerdictValue::NoEffect => 0,
            VerdictValue::Inconclusive => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anomaly {
    TwoDpiSuspected,
    ControlFailure,
    Unexpected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    /// Canonical form of the realized partition, e.g. "{R1,R3,R4}{R2}".
    pub grouping: String,
    pub anomaly: Option<Anomaly>,
}

/// Partition of {0,1,2,3} by outcome equality: per-index group label, with
/// groups numbered by first appearance.
fn partition(rs: &[&Outcome; 4]) -> [usize; 4] {
    let mut label = [usize::MAX; 4];
    let mut next = 0;
    for i in 0..4 {
        if label[i] != usize::MAX {
            continue;
        }
        label[i] = next;
        for j in i + 1..4 {
            if label[j] == usize::MAX && rs[i] == rs[j] {
                label[j] = next;
            }
        }
        next += 1;
    }
    label
}

fn grouping_string(label: &[usize; 4]) -> String {
    let ngroups = label.iter().max().unwrap() + 1;
    let mut s = String::new();
    for g in 0..ngroups {
        s.push('{');
        let mut first = true;
        for i in 0..4 {
            if label[i] == g {
                if !first {
                    s.push(',');
                }
                s.push_str(&format!("R{}", i + 1));
                first = false;
            }
        }
        s.push('}');
    }
    s
}

fn same(label: &[usize; 4], a: usize, b: usize) -> bool {
    label[a] == label[b]
}

/// The fixed partition-to-verdict table. R1: standard request, control
/// domain; R2: standard request, test domain; R3: probe, control domain;
/// R4: probe, test domain.
pub fn interpret(r1: &Outcome, r2: &Outcome, r3: &Outcome, r4: &Outcome) -> Verdict {
    let rs = [r1, r2, r3, r4];
    if rs.iter().any(|r| r.category == OutcomeCategory::Invalid) {
        return Verdict {
            value: VerdictValue::Inconclusive,
            grouping: "invalid".into(),
            anomaly: Some(Anomaly::ControlFailure),
        };
    }
    let label = partition(&rs);
    let grouping = grouping_string(&label);
    let verdict = |value, anomaly| Verdict { value, grouping: grouping.clone(), anomaly };

    // Any partition grouping the two standard runs means the control domain
    // behaved like the test domain: the baseline itself failed.
    if same(&label, 0, 1) {
        return verdict(VerdictValue::Inconclusive, Some(Anomaly::ControlFailure));
    }
    let g = |a: usize, b: usize| same(&label, a, b);
    let ngroups = label.iter().max().unwrap() + 1;
    match (g(0, 2), g(0, 3), g(1, 2), g(1, 3), ngroups) {
        // {R1,R3,R4}{R2}
        (true, true, false, false, 2) => verdict(VerdictValue::Bypass, None),
        // {R1,R3}{R2,R4}
        (true, false, false, true, 2) => verdict(VerdictValue::NoEffect, None),
        // {R2,R4}{R1}{R3}
        (false, false, false, true, 3) => verdict(VerdictValue::NoEffect, None),
        // {R1,R3}{R2}{R4}
        (true, false, false, false, 3) => {
            verdict(VerdictValue::Inconclusive, Some(Anomaly::TwoDpiSuspected))
        }
        // {R2,R3}{R1}{R4}
        (false, false, true, false, 3) => {
            verdict(VerdictValue::Inconclusive, Some(Anomaly::TwoDpiSuspected))
        }
        // {R1,R4}{R2,R3} and {R1,R4}{R2}{R3}
        (false, true, _, false, _) => {
            verdict(VerdictValue::Inconclusive, Some(Anomaly::Unexpected))
        }
        // {R1}{R2,R3,R4}, {R3,R4}{R1}{R2}, {R1}{R2}{R3}{R4}
        _ => verdict(VerdictValue::Inconclusive, None),
    }
}

/// Appendix-style refinement of {R1}{R2,R3,R4} using whether the appended
/// standard request inside R3 and R4 was answered.
pub fn interpret_with_appendix(
    r1: &Outcome,
    r2: &Outcome,
    r3: &Outcome,
    r4: &Outcome,
    appended: Option<(bool, bool)>,
) -> Verdict {
    let base = interpret(r1, r2, r3, r4);
    let Some((r3_answered, r4_answered)) = appended else { return base };
    if base.grouping != "{R1}{R2,R3,R4}" {
        return base;
    }
    let value = match (r3_answered, r4_answered) {
        // The endhost discards the mutated request but still serves the
        // appended one; the DPI stayed triggered only for the test domain.
        (true, false) => VerdictValue::NoEffect,
        (true, true) => VerdictValue::Bypass,
        _ => VerdictValue::Inconclusive,
    };
    Verdict { value, grouping: base.grouping, anomaly: None }
}

// ---------------------------------------------------------------------------
// Fingerprints

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub target: String,
    pub probe_order: Vec<String>,
    pub bits: Vec<i8>,
}

impl Fingerprint {
    pub fn bit_for(&self, probe_id: &str) -> Option<i8> {
        self.probe_order.iter().position(|p| p == probe_id).map(|i| self.bits[i])
    }
}

pub fn fingerprint(
    target: &str,
    probe_order: &[String],
    verdicts: &BTreeMap<String, Verdict>,
) -> Result<Fingerprint, AnalyzerError> {
    let mut bits = Vec::with_capacity(probe_order.len());
    for id in probe_order {
        let v = verdicts.get(id).ok_or_else(|| AnalyzerError::MissingVerdict(id.clone()))?;
        bits.push(v.value.bit());
    }
    Ok(Fingerprint { target: target.into(), probe_order: probe_order.to_vec(), bits })
}

// ---------------------------------------------------------------------------
// Campaign-level assembly

pub const BASELINE_PROBE_ID: &str = "Baseline";

/// (target label, probe id) -> verdict, for every non-baseline probe that
/// has records. R1/R2 come from the baseline probe's runs on the same target.
pub fn analyze_records(
    records: &[MeasurementRecord],
    signatures: &BlockpageDb,
) -> BTreeMap<(String, String), Verdict> {
    use crate::appmsg::DomainRole;

    // (target, probe, role) -> outcomes across repetitions.
    let mut groups: BTreeMap<(String, String, DomainRole), Vec<Outcome>> = BTreeMap::new();
    for rec in records {
        let key = (rec.target.clone(), rec.probe_id.clone(), rec.role);
        groups.entry(key).or_default().push(annotate(rec, signatures));
    }
    let consolidated: BTreeMap<(String, String, DomainRole), Outcome> =
        groups.into_iter().map(|(k, v)| (k, consolidate(&v))).collect();

    let get = |t: &str, p: &str, role: DomainRole| -> Outcome {
        consolidated
            .get(&(t.to_string(), p.to_string(), role))
            .cloned()
            .unwrap_or_else(|| Outcome::new(OutcomeCategory::Invalid))
    };

    let mut out = BTreeMap::new();
    let probes: std::collections::BTreeSet<(String, String)> = consolidated
        .keys()
        .filter(|(_, p, _)| p != BASELINE_PROBE_ID)
        .map(|(t, p, _)| (t.clone(), p.clone()))
        .collect();
    for (target, probe) in probes {
        let r1 = get(&target, BASELINE_PROBE_ID, DomainRole::Control);
        let r2 = get(&target, BASELINE_PROBE_ID, DomainRole::Test);
        let r3 = get(&target, &probe, DomainRole::Control);
        let r4 = get(&target, &probe, DomainRole::Test);
        out.insert((target, probe), interpret(&r1, &r2, &r3, &r4));
    }
    out
}

/// One fingerprint per target over the given probe order.
pub fn fingerprints_from_records(
    records: &[MeasurementRecord],
    signatures: &BlockpageDb,
    probe_order: &[String],
) -> Result<Vec<Fingerprint>, AnalyzerError> {
    let verdicts = analyze_records(records, signatures);
    let mut per_target: BTreeMap<String, BTreeMap<String, Verdict>> = BTreeMap::new();
    for ((t, p), v) in verdicts {
        per_target.entry(t).or_default().insert(p, v);
    }
    per_target
        .into_iter()
        .map(|(t, vs)| fingerprint(&t, probe_order, &vs))
        .collect()
}
