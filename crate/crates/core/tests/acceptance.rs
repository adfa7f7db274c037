//! Acceptance gate: one test per shipping criterion. Each test prints a
//! single `criterion N: PASS|FAIL` line (visible with `--nocapture`, and
//! always on failure) and then asserts.

use std::collections::{BTreeMap, HashMap};
use std::net::Ipv4Addr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dpifp::analytics::{adjusted_rand_index, cluster, FingerprintSet};
use dpifp::analyzer::{
    annotate, fingerprints_from_records, interpret, BlockpageDb, Outcome,
    OutcomeCategory, VerdictValue,
};
use dpifp::appmsg::{render_http, DomainPair, DomainRole, HTTP_REQUEST_TEMPLATE};
use dpifp::gen::{baseline, builtin_top40, generate_all};
use dpifp::netsim::{zoo_default, DpiProfile, EndhostProfile, OverlapPolicy};
use dpifp::packet::{ones_complement_checksum, reverse_domain_16bit};
use dpifp::probe::{load_probe, save_probe, ProbeConfig, Protocol, ProtocolScope};
use dpifp::prober::{
    run_campaign, sim_target, CampaignPlan, MeasurementRecord, SimFactory, SimTransport,
    TargetDomains, TargetSpec, Transport, TransportError, TransportFactory,
};
use dpifp::selection::{
    distance_curve, entropy_score, phi, select, Cell, OutcomeMatrix, SelectionParams,
};

fn report(n: u32, name: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("criterion {n}: PASS  {name}"),
        Err(e) => println!("criterion {n}: FAIL  {name}: {e}"),
    }
    if let Err(e) = result {
        panic!("criterion {n} ({name}) failed: {e}");
    }
}

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn probe_by_id(protocol: Protocol, id: &str) -> ProbeConfig {
    generate_all(protocol)
        .probes
        .into_iter()
        .find(|p| p.id() == id)
        .unwrap_or_else(|| panic!("no probe {id}"))
}

fn zoo_profile(id: &str) -> DpiProfile {
    zoo_default().into_iter().find(|p| p.id == id).unwrap_or_else(|| panic!("no profile {id}"))
}

/// Run `probes` against one simulated target behind `profile`.
fn run_one(profile: &DpiProfile, probes: Vec<ProbeConfig>, reps: u32, seed: u64) -> Vec<MeasurementRecord> {
    let mut plan = CampaignPlan::new(vec![sim_target(Protocol::Http)], probes, seed);
    plan.repetitions = reps;
    let mut factory = SimFactory { profiles: vec![profile.clone()], seed };
    run_campaign(&plan, &mut factory)
}

fn bits_for(profile: &DpiProfile, probe_ids: &[&str], seed: u64) -> Vec<i8> {
    let mut probes = vec![baseline(ProtocolScope::Both)];
    for id in probe_ids {
        probes.push(probe_by_id(Protocol::Http, id));
    }
    let records = run_one(profile, probes, 1, seed);
    let db = BlockpageDb::zoo_default();
    let order: Vec<String> = probe_ids.iter().map(|s| s.to_string()).collect();
    let fps = fingerprints_from_records(&records, &db, &order).unwrap();
    assert_eq!(fps.len(), 1);
    fps[0].bits.clone()
}

const NEGSEQ: &str = "Mutate[l:TCP;f:seq;option:negativeSeqWithPadding]";
const TSPROBE: &str = "Mutate[l:TCP;f:option;option:timestamp]";

// ---------------------------------------------------------------------------
// 1. Table 2 totality

#[test]
fn criterion_01_verdict_table_totality() {
    let run = || -> Result<(), String> {
        let cats = [
            OutcomeCategory::ValidResponse,
            OutcomeCategory::BlockedRst,
            OutcomeCategory::BlockedBlockpage("x".into()),
            OutcomeCategory::Blackhole,
        ];
        let mk = |c: &OutcomeCategory| Outcome { category: c.clone(), evidence: vec![] };
        let mut by_grouping: BTreeMap<String, (VerdictValue, Option<String>)> = BTreeMap::new();
        for a in &cats {
            for b in &cats {
                for c in &cats {
                    for d in &cats {
                        let v = interpret(&mk(a), &mk(b), &mk(c), &mk(d));
                        let anomaly = v.anomaly.as_ref().map(|x| format!("{x:?}"));
                        let prev = by_grouping
                            .insert(v.grouping.clone(), (v.value, anomaly.clone()));
                        if let Some(prev) = prev {
                            check!(
                                prev == (v.value, anomaly),
                                "grouping {} mapped to two verdicts",
                                v.grouping
                            );
                        }
                    }
                }
            }
        }
        check!(by_grouping.len() == 15, "expected 15 partitions, got {}", by_grouping.len());
        let count = |f: &dyn Fn(&(VerdictValue, Option<String>)) -> bool| {
            by_grouping.values().filter(|v| f(v)).count()
        };
        let bypass = count(&|v| v.0 == VerdictValue::Bypass);
        let noeffect = count(&|v| v.0 == VerdictValue::NoEffect);
        let control_failure =
            count(&|v| v.1.as_deref() == Some("ControlFailure"));
        let unexpected = count(&|v| v.1.as_deref() == Some("Unexpected"));
        let inconclusive_rows = count(&|v| {
            v.0 == VerdictValue::Inconclusive
                && v.1.as_deref() != Some("ControlFailure")
                && v.1.as_deref() != Some("Unexpected")
        });
        check!(bypass == 1, "Bypass partitions: {bypass}");
        check!(noeffect == 2, "NoEffect partitions: {noeffect}");
        check!(inconclusive_rows == 5, "Inconclusive table rows: {inconclusive_rows}");
        check!(control_failure == 5, "ControlFailure partitions: {control_failure}");
        check!(unexpected == 2, "Unexpected partitions: {unexpected}");
        Ok(())
    };
    report(1, "verdict table covers all 15 partitions with published row counts", run());
}

// ---------------------------------------------------------------------------
// 2. Root-cause reproduction

#[test]
fn criterion_02_root_cause_separation() {
    let run = || -> Result<(), String> {
        let zeek = bits_for(&zoo_profile("zeeklike"), &[NEGSEQ, TSPROBE], 7);
        let snort = bits_for(&zoo_profile("snortlike"), &[NEGSEQ, TSPROBE], 7);
        check!(zeek.len() == 2 && snort.len() == 2, "unexpected fingerprint length");
        for (i, id) in [NEGSEQ, TSPROBE].iter().enumerate() {
            check!(zeek[i] >= 0 && snort[i] >= 0, "{id}: inconclusive bit");
            check!(
                zeek[i] != snort[i],
                "{id}: zeek={} snort={} not opposite",
                zeek[i],
                snort[i]
            );
        }
        Ok(())
    };
    report(2, "zeek-like and snort-like separated with opposite bits by both probes", run());
}

// ---------------------------------------------------------------------------
// 3. Zoo separability

#[test]
fn criterion_03_zoo_separability() {
    let run = || -> Result<(), String> {
        let profiles: Vec<DpiProfile> = zoo_default()
            .into_iter()
            .filter(|p| p.fail_open_probability == 0.0)
            .collect();
        check!(profiles.len() >= 8, "need >=8 noiseless profiles, got {}", profiles.len());

        let top40 = builtin_top40(Protocol::Http);
        let order: Vec<String> = top40.iter().map(|p| p.id().to_string()).collect();
        let mut probes = vec![baseline(ProtocolScope::Both)];
        probes.extend(top40);

        let db = BlockpageDb::zoo_default();
        let mut fps = Vec::new();
        for p in &profiles {
            let records = run_one(p, probes.clone(), 1, 11);
            let mut fp = fingerprints_from_records(&records, &db, &order)
                .map_err(|e| e.to_string())?
                .pop()
                .ok_or("no fingerprint")?;
            fp.target = p.id.clone();
            fps.push(fp);
        }

        let matrix = OutcomeMatrix::from_fingerprints(&fps);
        let selected = select(&matrix, &SelectionParams::default());
        check!(!selected.is_empty(), "selection returned no probes");

        let curve = distance_curve(&matrix, &selected);
        for w in curve.windows(2) {
            check!(w[1].min >= w[0].min, "min curve decreases at n={}", w[1].n);
            check!(w[1].mean >= w[0].mean - 1e-12, "mean curve decreases at n={}", w[1].n);
        }
        let at = curve.len().min(10);
        check!(at > 0, "empty distance curve");
        check!(
            curve[at - 1].min >= 1.0,
            "min pairwise distance {} < 1 at N={}",
            curve[at - 1].min,
            at
        );
        Ok(())
    };
    report(3, "top-40 separates all noiseless zoo profiles by N=10 selected probes", run());
}

// ---------------------------------------------------------------------------
// 4. Selection correctness

fn random_matrix(rng: &mut StdRng) -> OutcomeMatrix {
    let rows = 6;
    let cols = rng.gen_range(2..=10usize);
    let cells = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| match rng.gen_range(0..10) {
                    0 => Cell::Inconclusive,
                    1..=5 => Cell::NoEffect,
                    _ => Cell::Bypass,
                })
                .collect()
        })
        .collect();
    OutcomeMatrix {
        rows: (0..rows).map(|i| format!("t{i}")).collect(),
        cols: (0..cols).map(|i| format!("p{i:02}")).collect(),
        cells,
    }
}

/// Independent re-derivation of the greedy admissible sequence.
fn brute_force_select(m: &OutcomeMatrix, theta: f64, cutoff: f64) -> Vec<String> {
    let col = |j: usize| -> Vec<Cell> { m.cells.iter().map(|r| r[j]).collect() };
    let h = |c: &[Cell]| -> Option<f64> {
        let inc = c.iter().filter(|x| **x == Cell::Inconclusive).count();
        if inc as f64 / c.len() as f64 >= cutoff {
            return None;
        }
        let n = c.len() - inc;
        if n == 0 {
            return None;
        }
        let k = c.iter().filter(|x| **x == Cell::Bypass).count();
        if k == 0 || k == n {
            return None;
        }
        let p = k as f64 / n as f64;
        Some(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
    };
    let corr = |a: &[Cell], b: &[Cell]| -> f64 {
        let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
        for (x, y) in a.iter().zip(b) {
            match (x, y) {
                (Cell::Bypass, Cell::Bypass) => n11 += 1.0,
                (Cell::Bypass, Cell::NoEffect) => n10 += 1.0,
                (Cell::NoEffect, Cell::Bypass) => n01 += 1.0,
                (Cell::NoEffect, Cell::NoEffect) => n00 += 1.0,
                _ => {}
            }
        }
        let den = ((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)).sqrt();
        if den == 0.0 { 0.0 } else { (n11 * n00 - n10 * n01) / den }
    };
    let mut scored: Vec<(f64, String, Vec<Cell>)> = (0..m.cols.len())
        .filter_map(|j| h(&col(j)).map(|s| (s, m.cols[j].clone(), col(j))))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut admitted: Vec<(String, Vec<Cell>)> = Vec::new();
    for (_, id, c) in scored {
        if admitted.iter().all(|(_, prev)| corr(prev, &c).abs() < theta) {
            admitted.push((id, c));
        }
    }
    admitted.into_iter().map(|(id, _)| id).collect()
}

#[test]
fn criterion_04_selection_correctness() {
    let run = || -> Result<(), String> {
        // Closed-form entropy: 3 Bypass over 8 conclusive, p = 3/8.
        let mut col = vec![Cell::Bypass; 3];
        col.extend(vec![Cell::NoEffect; 5]);
        col.push(Cell::Inconclusive);
        let h = entropy_score(&col).map_err(|e| e.to_string())?;
        let p: f64 = 3.0 / 8.0;
        let expect = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        check!((h - expect).abs() < 1e-12, "entropy {h} != formula {expect}");
        check!((h - 0.954434).abs() < 1e-6, "entropy {h} != 0.954434");

        // Phi on the 2x2 table (3,1,1,3).
        let a = [
            Cell::Bypass, Cell::Bypass, Cell::Bypass, Cell::Bypass,
            Cell::NoEffect, Cell::NoEffect, Cell::NoEffect, Cell::NoEffect,
        ];
        let b = [
            Cell::Bypass, Cell::Bypass, Cell::Bypass, Cell::NoEffect,
            Cell::Bypass, Cell::NoEffect, Cell::NoEffect, Cell::NoEffect,
        ];
        let ph = phi(&a, &b);
        check!((ph - 0.5).abs() < 1e-12, "phi {ph} != 0.5");

        // Greedy output matches an independently derived admissible sequence
        // on random matrices, and admitted pairs stay below the threshold.
        let params = SelectionParams::default();
        let mut rng = StdRng::seed_from_u64(0x5e1ec7);
        for trial in 0..50 {
            let m = random_matrix(&mut rng);
            let got = select(&m, &params);
            let want = brute_force_select(&m, params.phi_threshold, params.inconclusive_cutoff);
            check!(got == want, "trial {trial}: select {got:?} != oracle {want:?}");
            for i in 0..got.len() {
                for j in 0..i {
                    let ci = m.column(&got[i]).unwrap();
                    let cj = m.column(&got[j]).unwrap();
                    let v = phi(&ci, &cj).abs();
                    check!(v < params.phi_threshold, "trial {trial}: |phi|={v} admitted");
                }
            }
        }
        Ok(())
    };
    report(4, "entropy, phi, and greedy selection match independent oracles", run());
}

// ---------------------------------------------------------------------------
// 5. Checksum preservation under domain reversal

#[test]
fn criterion_05_checksum_preserving_reversal() {
    let run = || -> Result<(), String> {
        let mut rng = StdRng::seed_from_u64(0xc5);
        for trial in 0..1000 {
            let dlen = rng.gen_range(4..=40usize);
            let domain: String =
                (0..dlen).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect();
            let clen = rng.gen_range(4..=40usize);
            let control: String =
                (0..clen).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect();
            let pair = DomainPair::new(control.clone(), domain.clone());
            let msg = render_http(
                HTTP_REQUEST_TEMPLATE,
                &domain,
                &control,
                "",
                "",
                pair.padded_len(),
            );
            check!(
                msg.domain_span.0 % 2 == 0 && msg.domain_span.1 % 2 == 0,
                "trial {trial}: span unaligned"
            );

            // A full TCP segment: randomized 20-byte header plus the request.
            let mut header = [0u8; 20];
            rng.fill(&mut header[..]);
            header[12] = 5 << 4;
            header[16] = 0;
            header[17] = 0;
            let mut segment = header.to_vec();
            segment.extend_from_slice(&msg.bytes);

            let src = Ipv4Addr::from(rng.gen::<u32>());
            let dst = Ipv4Addr::from(rng.gen::<u32>());
            let mut pseudo = Vec::new();
            pseudo.extend_from_slice(&src.octets());
            pseudo.extend_from_slice(&dst.octets());
            pseudo.push(0);
            pseudo.push(6);
            pseudo.extend_from_slice(&(segment.len() as u16).to_be_bytes());

            let before = ones_complement_checksum(&segment, &pseudo);
            let reversed = reverse_domain_16bit(
                &segment,
                20 + msg.domain_span.0,
                msg.domain_span.1,
            )
            .map_err(|e| format!("trial {trial}: {e}"))?;
            let after = ones_complement_checksum(&reversed, &pseudo);
            check!(
                before == after,
                "trial {trial}: checksum changed {before:04x} -> {after:04x}"
            );
        }
        Ok(())
    };
    report(5, "reverse_domain_16bit keeps the TCP checksum bit-exact on 1000 requests", run());
}

// ---------------------------------------------------------------------------
// 6. Overlap semantics vs a byte-level reassembly oracle

/// Independent reassembly oracle: admit the four emitted ranges into a byte
/// map under the given policy and search the result for the test domain.
fn oracle_blocked(left: &str, right: &str, last_wins: bool) -> bool {
    let pair = DomainPair::new("ok.example.net", "blocked.example.com");
    let msg = render_http(
        HTTP_REQUEST_TEMPLATE,
        "blocked.example.com",
        "ok.example.net",
        "",
        "",
        pair.padded_len(),
    );
    let rev = reverse_domain_16bit(&msg.bytes, msg.domain_span.0, msg.domain_span.1).unwrap();
    let (ds, dl) = msg.domain_span;
    let (ds, de, len) = (ds as i64, (ds + dl) as i64, msg.bytes.len() as i64);
    let u = 2i64;
    let (xl, xr) = (-u, u);
    let yl = match left {
        "short" => 0,
        "equal" => -u,
        _ => -2 * u,
    };
    let yr = match right {
        "short" => 0,
        "equal" => u,
        _ => 2 * u,
    };
    let parts: [(i64, i64, bool); 4] = [
        (0, ds + xl.min(yl), false),
        (ds + xl, de + xr, false),
        (ds + yl, de + yr, true),
        (de + xr.max(yr), len, false),
    ];
    let mut map: Vec<Option<u8>> = vec![None; len as usize];
    for (s, e, reversed) in parts {
        for off in s..e {
            let byte = if reversed { rev[off as usize] } else { msg.bytes[off as usize] };
            let slot = &mut map[off as usize];
            if last_wins || slot.is_none() {
                *slot = Some(byte);
            }
        }
    }
    let assembled: Vec<u8> = map.into_iter().map(|b| b.unwrap()).collect();
    let needle = b"blocked.example.com";
    assembled.windows(needle.len()).any(|w| w == needle)
}

#[test]
fn criterion_06_overlap_semantics() {
    let run = || -> Result<(), String> {
        // Both profiles admit the overlapping retransmission (ISN lower
        // bound), so the byte-map overlap policy decides the verdict.
        let first = zoo_profile("zeeklike");
        let last = zoo_profile("filter-nocksum");
        assert_eq!(first.tcp_overlap_policy, OverlapPolicy::FirstWins);
        assert_eq!(last.tcp_overlap_policy, OverlapPolicy::LastWins);
        let db = BlockpageDb::zoo_default();
        for left in ["short", "equal", "long"] {
            for right in ["short", "equal", "long"] {
                let id = format!("Fragment[l:TCP;t:overlapping;position:l{left}r{right}]");
                let probe = probe_by_id(Protocol::Http, &id);
                for (profile, last_wins) in [(&first, false), (&last, true)] {
                    let records = run_one(profile, vec![probe.clone()], 1, 13);
                    let test_rec = records
                        .iter()
                        .find(|r| r.role == DomainRole::Test)
                        .ok_or_else(|| format!("{id}: no test record"))?;
                    let outcome = annotate(test_rec, &db);
                    check!(
                        outcome.category != OutcomeCategory::Invalid,
                        "{id} on {}: invalid run",
                        profile.id
                    );
                    let blocked = outcome.category != OutcomeCategory::ValidResponse;
                    let predicted = oracle_blocked(left, right, last_wins);
                    check!(
                        blocked == predicted,
                        "{id} on {}: sim blocked={blocked}, oracle predicted={predicted}",
                        profile.id
                    );
                }
            }
        }
        Ok(())
    };
    report(6, "all 18 overlap alignment cases match the byte-level reassembly oracle", run());
}

// ---------------------------------------------------------------------------
// 7. Noise aggregation

#[test]
fn criterion_07_noise_aggregation() {
    let run = || -> Result<(), String> {
        let ids = [
            NEGSEQ,
            "Mutate[l:IP;f:option;option:noop]",
            "Mutate[l:TCP;f:urgentPointer;option:]",
            "Fragment[l:IP;t:maxDist;maxdist:16]",
        ];
        let order: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        let mut probes = vec![baseline(ProtocolScope::Both)];
        for id in &ids {
            probes.push(probe_by_id(Protocol::Http, id));
        }
        let db = BlockpageDb::zoo_default();

        // Noiseless twin provides the reference fingerprint.
        let reference = {
            let records = run_one(&zoo_profile("snortlike"), probes.clone(), 1, 99);
            fingerprints_from_records(&records, &db, &order)
                .map_err(|e| e.to_string())?
                .pop()
                .ok_or("no reference fingerprint")?
                .bits
        };
        check!(reference.iter().all(|&b| b >= 0), "reference has inconclusive bits");

        let noisy = zoo_profile("snortlike-noisy");
        check!(noisy.fail_open_probability == 0.15, "unexpected fail-open rate");
        let flip_rate = |bits: &[i8]| -> f64 {
            let flips = bits
                .iter()
                .zip(&reference)
                .filter(|(&a, &b)| a >= 0 && b >= 0 && a != b)
                .count();
            flips as f64 / bits.len() as f64
        };

        let trials = 50;
        let (mut sum_k1, mut sum_k5) = (0.0, 0.0);
        for trial in 0..trials {
            let seed = 3000 + trial as u64;
            let records = run_one(&noisy, probes.clone(), 5, seed);
            let first_rep: Vec<MeasurementRecord> =
                records.iter().filter(|r| r.repetition == 0).cloned().collect();
            let fp1 = fingerprints_from_records(&first_rep, &db, &order)
                .map_err(|e| e.to_string())?
                .pop()
                .ok_or("no k=1 fingerprint")?;
            let fp5 = fingerprints_from_records(&records, &db, &order)
                .map_err(|e| e.to_string())?
                .pop()
                .ok_or("no k=5 fingerprint")?;
            sum_k1 += flip_rate(&fp1.bits);
            sum_k5 += flip_rate(&fp5.bits);
        }
        let (mean_k1, mean_k5) = (sum_k1 / trials as f64, sum_k5 / trials as f64);
        check!(
            mean_k1 > mean_k5,
            "mean flip rate did not decrease: k=1 {mean_k1:.4} vs k=5 {mean_k5:.4}"
        );
        Ok(())
    };
    report(7, "mean bit-flip rate strictly decreases from k=1 to k=5 over 50 trials", run());
}

// ---------------------------------------------------------------------------
// 8. Clustering recovery

struct ProfileMapFactory {
    by_address: HashMap<Ipv4Addr, DpiProfile>,
    seed: u64,
}

impl TransportFactory for ProfileMapFactory {
    fn create(&mut self, target: &TargetSpec) -> Result<Box<dyn Transport>, TransportError> {
        let profile = self.by_address.get(&target.address).expect("unmapped target").clone();
        Ok(Box::new(SimTransport::new(
            vec![profile],
            EndhostProfile::for_protocol(target.protocol),
            self.seed,
        )))
    }
}

fn clustering_ari(profiles: &[DpiProfile], reps: u32, seed: u64) -> Result<f64, String> {
    let per_profile = 30usize;
    let mut targets = Vec::new();
    let mut by_address = HashMap::new();
    let mut truth_by_label: BTreeMap<String, i64> = BTreeMap::new();
    for (pi, profile) in profiles.iter().enumerate() {
        for t in 0..per_profile {
            let address = Ipv4Addr::new(10, 30, pi as u8, 10 + t as u8);
            let spec = TargetSpec {
                address,
                port: 80,
                protocol: Protocol::Http,
                domains: TargetDomains {
                    control: "ok.example.net".into(),
                    test: Some("blocked.example.com".into()),
                },
                metadata: None,
            };
            truth_by_label.insert(spec.label(), pi as i64);
            by_address.insert(address, profile.clone());
            targets.push(spec);
        }
    }

    let top40 = builtin_top40(Protocol::Http);
    let order: Vec<String> = top40.iter().map(|p| p.id().to_string()).collect();
    let mut probes = vec![baseline(ProtocolScope::Both)];
    probes.extend(top40);

    let mut plan = CampaignPlan::new(targets, probes, seed);
    plan.repetitions = reps;
    let mut factory = ProfileMapFactory { by_address, seed };
    let records = run_campaign(&plan, &mut factory);

    let db = BlockpageDb::zoo_default();
    let fps = fingerprints_from_records(&records, &db, &order).map_err(|e| e.to_string())?;
    let set = FingerprintSet::from_fingerprints(&fps).map_err(|e| e.to_string())?;
    let result = cluster(&set, 20).map_err(|e| e.to_string())?;
    let truth: Vec<i64> = set.targets().iter().map(|t| truth_by_label[*t]).collect();
    Ok(adjusted_rand_index(&result.labels, &truth))
}

#[test]
fn criterion_08_clustering_recovery() {
    let run = || -> Result<(), String> {
        let profiles: Vec<DpiProfile> = zoo_default()
            .into_iter()
            .filter(|p| {
                p.fail_open_probability == 0.0
                    && p.deployment == dpifp::netsim::Deployment::InPath
            })
            .collect();
        check!(profiles.len() == 8, "expected 8 noiseless in-path profiles");

        let ari = clustering_ari(&profiles, 1, 21)?;
        check!(ari >= 0.9, "noiseless ARI {ari:.3} < 0.9");

        let noisy: Vec<DpiProfile> = profiles
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.fail_open_probability = 0.15;
                p
            })
            .collect();
        let ari_noisy = clustering_ari(&noisy, 3, 22)?;
        check!(ari_noisy >= 0.8, "noisy ARI {ari_noisy:.3} < 0.8");
        Ok(())
    };
    report(8, "density clustering recovers 8 zoo profiles (noiseless >=0.9, noisy >=0.8)", run());
}

// ---------------------------------------------------------------------------
// 9. Determinism

fn snapshot(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn criterion_09_demo_determinism() {
    let run = || -> Result<(), String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        dpifp::cli::run_demo(&a, 5, 2, 2).map_err(|e| e.to_string())?;
        dpifp::cli::run_demo(&b, 5, 2, 2).map_err(|e| e.to_string())?;
        let sa = snapshot(&a);
        let sb = snapshot(&b);
        let names: Vec<&String> = sa.keys().collect();
        check!(
            names == sb.keys().collect::<Vec<_>>(),
            "file lists differ between runs"
        );
        for name in ["fingerprints.json", "clusters.csv", "probes/manifest.json"] {
            check!(sa.contains_key(name), "demo output missing {name}");
        }
        for (name, bytes) in &sa {
            check!(sb[name] == *bytes, "{name} differs between identical-seed runs");
        }
        Ok(())
    };
    report(9, "demo pipeline is byte-identical across same-seed runs", run());
}

// ---------------------------------------------------------------------------
// 10. Format fidelity

const APPENDIX_DOC: &str = include_str!("data/appendix_probe.yaml");

#[test]
fn criterion_10_format_fidelity() {
    let run = || -> Result<(), String> {
        // The published sample document loads, round-trips, and executes.
        let cfg = load_probe(APPENDIX_DOC.as_bytes()).map_err(|e| e.to_string())?;
        let saved = save_probe(&cfg);
        let reloaded = load_probe(&saved).map_err(|e| e.to_string())?;
        check!(cfg == reloaded, "appendix document round-trip changed content");
        check!(saved == save_probe(&reloaded), "appendix serialization unstable");
        let records = run_one(&zoo_profile("snortlike"), vec![cfg], 1, 17);
        check!(
            records.iter().all(|r| r.status == dpifp::prober::RecordStatus::Completed),
            "appendix document failed to execute"
        );

        // Every builtin top-40 id generates, round-trips, and executes.
        for protocol in [Protocol::Http, Protocol::Https] {
            let mut plan = CampaignPlan::new(
                vec![sim_target(protocol)],
                builtin_top40(protocol),
                19,
            );
            plan.repetitions = 1;
            for probe in &plan.probes {
                let bytes = save_probe(probe);
                let back = load_probe(&bytes).map_err(|e| {
                    format!("{}: reload failed: {e}", probe.id())
                })?;
                check!(back == *probe, "{}: round-trip changed content", probe.id());
            }
            let mut factory =
                SimFactory { profiles: vec![zoo_profile("strict-rfc")], seed: 19 };
            let records = run_campaign(&plan, &mut factory);
            for r in &records {
                check!(
                    r.status == dpifp::prober::RecordStatus::Completed,
                    "{protocol:?} {}: {:?}",
                    r.probe_id,
                    r.status
                );
            }
        }
        Ok(())
    };
    report(10, "appendix document and all builtin probe ids load, execute, round-trip", run());
}
