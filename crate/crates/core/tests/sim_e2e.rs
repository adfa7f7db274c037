//! End-to-end runs through the simulated path: generator output is executed
//! against middlebox profiles and interpreted into fingerprints.

use dpifp::analyzer::{
    analyze_records, fingerprints_from_records, BlockpageDb, VerdictValue,
};
use dpifp::gen::{baseline, generate_all};
use dpifp::netsim::zoo_default;
use dpifp::probe::{ProbeConfig, Protocol, ProtocolScope};
use dpifp::prober::{run_campaign, sim_target, write_jsonl, CampaignPlan, SimFactory};

fn probe_by_id(protocol: Protocol, id: &str) -> ProbeConfig {
    generate_all(protocol)
        .probes
        .into_iter()
        .find(|p| p.id() == id)
        .unwrap_or_else(|| panic!("no probe {id}"))
}

fn profile(id: &str) -> dpifp::netsim::DpiProfile {
    zoo_default().into_iter().find(|p| p.id == id).unwrap_or_else(|| panic!("no profile {id}"))
}

fn run_probes(
    profile_id: &str,
    protocol: Protocol,
    probes: Vec<ProbeConfig>,
) -> Vec<dpifp::prober::MeasurementRecord> {
    let mut plan = CampaignPlan::new(vec![sim_target(protocol)], probes, 7);
    plan.repetitions = 1;
    plan.validate().unwrap();
    let mut factory = SimFactory { profiles: vec![profile(profile_id)], seed: 7 };
    run_campaign(&plan, &mut factory)
}

fn bits_for(profile_id: &str, probe_ids: &[&str]) -> Vec<i8> {
    let mut probes = vec![baseline(ProtocolScope::Both)];
    for id in probe_ids {
        probes.push(probe_by_id(Protocol::Http, id));
    }
    let records = run_probes(profile_id, Protocol::Http, probes);
    let db = BlockpageDb::zoo_default();
    let order: Vec<String> = probe_ids.iter().map(|s| s.to_string()).collect();
    let fps = fingerprints_from_records(&records, &db, &order).unwrap();
    assert_eq!(fps.len(), 1);
    fps[0].bits.clone()
}

const NEGSEQ: &str = "Mutate[l:TCP;f:seq;option:negativeSeqWithPadding]";
const TSPROBE: &str = "Mutate[l:TCP;f:option;option:timestamp]";

#[test]
fn baseline_discriminates_control_and_test() {
    let records = run_probes("zeeklike", Protocol::Http, vec![baseline(ProtocolScope::Both)]);
    let db = BlockpageDb::zoo_default();
    use dpifp::analyzer::{annotate, OutcomeCategory};
    use dpifp::appmsg::DomainRole;
    let mut control = None;
    let mut test = None;
    for r in &records {
        let o = annotate(r, &db);
        match r.role {
            DomainRole::Control => control = Some(o),
            DomainRole::Test => test = Some(o),
        }
    }
    assert_eq!(control.unwrap().category, OutcomeCategory::ValidResponse);
    assert_eq!(test.unwrap().category, OutcomeCategory::BlockedRst);
}

#[test]
fn zeek_and_snort_like_profiles_have_opposite_bits() {
    let zeek = bits_for("zeeklike", &[NEGSEQ, TSPROBE]);
    let snort = bits_for("snortlike", &[NEGSEQ, TSPROBE]);
    // ISN-lower-bound validation discards the low-seq padding packet (probe
    // bypasses); window-based trimming keeps it (no effect). PAWS-discarding
    // drops the stale-timestamp request (bypass); PAWS-off inspects it.
    assert_eq!(zeek, vec![1, 0]);
    assert_eq!(snort, vec![0, 1]);
    assert!(zeek.iter().zip(&snort).all(|(a, b)| a != b));
}

#[test]
fn campaign_replay_is_byte_identical() {
    let probes = vec![
        baseline(ProtocolScope::Both),
        probe_by_id(Protocol::Http, NEGSEQ),
        probe_by_id(Protocol::Http, "Fragment[l:IP;t:overlapping;position:lequalrequal]"),
    ];
    let a = run_probes("gateway-lw", Protocol::Http, probes.clone());
    let b = run_probes("gateway-lw", Protocol::Http, probes);
    let mut ja = Vec::new();
    let mut jb = Vec::new();
    write_jsonl(&a, &mut ja).unwrap();
    write_jsonl(&b, &mut jb).unwrap();
    assert!(!ja.is_empty());
    assert_eq!(ja, jb);
}

#[test]
fn blockpage_profile_yields_blockpage_outcomes() {
    let records = run_probes("proxy-blockpage", Protocol::Http, vec![baseline(ProtocolScope::Both)]);
    let db = BlockpageDb::zoo_default();
    use dpifp::analyzer::{annotate, OutcomeCategory};
    use dpifp::appmsg::DomainRole;
    let test = records.iter().find(|r| r.role == DomainRole::Test).unwrap();
    assert_eq!(
        annotate(test, &db).category,
        OutcomeCategory::BlockedBlockpage("vendor-x".into())
    );
}

#[test]
fn nullroute_profile_blackholes_test_domain() {
    let records = run_probes("nullroute", Protocol::Http, vec![baseline(ProtocolScope::Both)]);
    let db = BlockpageDb::zoo_default();
    use dpifp::analyzer::{annotate, OutcomeCategory};
    use dpifp::appmsg::DomainRole;
    let test = records.iter().find(|r| r.role == DomainRole::Test).unwrap();
    let cat = annotate(test, &db).category;
    assert!(
        matches!(cat, OutcomeCategory::Blackhole | OutcomeCategory::Invalid),
        "expected silence, got {cat:?}"
    );
}

#[test]
fn https_baseline_round_trip() {
    let records = run_probes("zeeklike", Protocol::Https, vec![baseline(ProtocolScope::Both)]);
    let db = BlockpageDb::zoo_default();
    use dpifp::analyzer::{annotate, OutcomeCategory};
    use dpifp::appmsg::DomainRole;
    let control = records.iter().find(|r| r.role == DomainRole::Control).unwrap();
    let test = records.iter().find(|r| r.role == DomainRole::Test).unwrap();
    assert_eq!(annotate(control, &db).category, OutcomeCategory::ValidResponse);
    assert_eq!(annotate(test, &db).category, OutcomeCategory::BlockedRst);
}

#[test]
fn analyze_records_emits_verdicts_per_probe() {
    let probes = vec![
        baseline(ProtocolScope::Both),
        probe_by_id(Protocol::Http, NEGSEQ),
        probe_by_id(Protocol::Http, "Mutate[l:TCP;f:checksum;checksum:corrupt]"),
    ];
    let records = run_probes("snortlike", Protocol::Http, probes);
    let verdicts = analyze_records(&records, &BlockpageDb::zoo_default());
    assert_eq!(verdicts.len(), 2);
    // A corrupt-checksum request is dropped by both the checksum-validating
    // DPI and the endhost: both probe runs go dark, which is inconclusive.
    let v = &verdicts[&(
        records[0].target.clone(),
        "Mutate[l:TCP;f:checksum;checksum:corrupt]".to_string(),
    )];
    assert_eq!(v.value, VerdictValue::Inconclusive);
}
