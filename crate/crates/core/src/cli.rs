//! Command-line pipeline: generate, select, probe, analyze, cluster,
//! report, zoo, preflight, and the all-in-one demo.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::analytics::{
    cluster, cluster_single_linkage, mds_2d_distances, scoped_distributions, svg_histogram,
    svg_scatter, FingerprintSet,
};
use crate::analyzer::{fingerprints_from_records, BlockpageDb, BASELINE_PROBE_ID};
use crate::gen::{baseline, builtin_top40, generate_all};
use crate::netsim::{zoo_default, DpiProfile, EndhostProfile};
use crate::pcap::write_records_pcap;
use crate::probe::{load_probe, save_probe, ProbeConfig, Protocol, ProtocolScope};
use crate::prober::{
    raw_preflight, read_jsonl, run_campaign, sim_target, write_jsonl, CampaignPlan,
    MeasurementRecord, SimTransport, TargetDomains, TargetMetadata, TargetSpec, Transport,
    TransportError, TransportFactory,
};
use crate::selection::{
    distance_curve, distance_curve_csv, select, OutcomeMatrix, SelectionParams,
};

/// Exit code for bad usage (vs 2 for runtime failures).
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser)]
#[command(name = "dpifp", version, about = "Fingerprint DPI middleboxes via protocol-ambiguity probes")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate candidate probes and write them with a manifest.
    Generate {
        #[arg(long, default_value = "http")]
        protocol: Protocol,
        #[arg(long)]
        out: PathBuf,
        /// Only the published 40-probe set.
        #[arg(long)]
        top40: bool,
    },
    /// Rank and greedily select probes from an outcome matrix CSV.
    Select {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        theta: f64,
        #[arg(long, default_value_t = 0.10)]
        cutoff: f64,
        #[arg(long)]
        max_probes: Option<usize>,
        /// Also write the min/mean Hamming distance curve.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run a probe campaign and record packet-level measurements.
    Probe {
        /// Directory of probe YAML files; defaults to the builtin top-40.
        #[arg(long)]
        probes: Option<PathBuf>,
        #[arg(long, default_value = "http")]
        protocol: Protocol,
        /// JSON list of targets; defaults to one simulated target.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// "sim" or "raw".
        #[arg(long, default_value = "sim")]
        transport: String,
        /// Simulated middlebox profile id from the zoo, for sim transport.
        #[arg(long, default_value = "zeeklike")]
        profile: String,
        #[arg(long, default_value_t = 3)]
        repetitions: u32,
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pcap: Option<PathBuf>,
    },
    /// Turn measurement records into per-target fingerprints.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        /// Fingerprint JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Optional (target, probe-id, bit) CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Extra blockpage signature JSON files.
        #[arg(long)]
        signatures: Vec<PathBuf>,
        /// Text file fixing the probe order (one id per line).
        #[arg(long)]
        order: Option<PathBuf>,
    },
    /// Density-cluster fingerprints.
    Cluster {
        #[arg(long)]
        fingerprints: PathBuf,
        #[arg(long, default_value_t = 20)]
        min_cluster_size: usize,
        #[arg(long)]
        out: PathBuf,
        /// Use the single-linkage fallback with this distance threshold.
        #[arg(long)]
        single_linkage: Option<f64>,
    },
    /// Render MDS scatter and distance histograms as SVG/CSV.
    Report {
        #[arg(long)]
        fingerprints: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        min_cluster_size: usize,
    },
    /// Print or write the builtin middlebox profile zoo.
    Zoo {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-check for raw-socket probing prerequisites.
    Preflight,
    /// Full desk-scale pipeline: zoo, generate, probe, analyze, cluster,
    /// report, all seeded and deterministic.
    Demo {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repetitions: u32,
        #[arg(long, default_value_t = 3)]
        targets_per_profile: usize,
    },
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version are successful exits; parse failures are usage.
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate { protocol, out, top40 } => cmd_generate(protocol, &out, top40),
        Cmd::Select { matrix, out, theta, cutoff, max_probes, curve } => {
            cmd_select(&matrix, &out, theta, cutoff, max_probes, curve.as_deref())
        }
        Cmd::Probe {
            probes,
            protocol,
            targets,
            transport,
            profile,
            repetitions,
            delay,
            seed,
            out,
            pcap,
        } => cmd_probe(
            probes.as_deref(),
            protocol,
            targets.as_deref(),
            &transport,
            &profile,
            repetitions,
            delay,
            seed,
            &out,
            pcap.as_deref(),
        ),
        Cmd::Analyze { records, out, csv, signatures, order } => {
            cmd_analyze(&records, &out, csv.as_deref(), &signatures, order.as_deref())
        }
        Cmd::Cluster { fingerprints, min_cluster_size, out, single_linkage } => {
            cmd_cluster(&fingerprints, min_cluster_size, &out, single_linkage)
        }
        Cmd::Report { fingerprints, out_dir, min_cluster_size } => {
            cmd_report(&fingerprints, &out_dir, min_cluster_size)
        }
        Cmd::Zoo { out } => cmd_zoo(out.as_deref()),
        Cmd::Preflight => cmd_preflight(),
        Cmd::Demo { out_dir, seed, repetitions, targets_per_profile } => {
            cmd_demo(&out_dir, seed, repetitions, targets_per_profile)
        }
    }
}

fn probe_filename(index: usize, id: &str) -> String {
    let slug: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{index:04}_{slug}.yaml")
}

fn cmd_generate(protocol: Protocol, out: &Path, top40: bool) -> Result<()> {
    fs::create_dir_all(out)?;
    let (probes, manifest_json) = if top40 {
        let probes = builtin_top40(protocol);
        let ids: Vec<&str> = probes.iter().map(|p| p.id()).collect();
        (probes.clone(), serde_json::json!({
            "protocol": protocol.as_str(),
            "total": probes.len(),
            "ids": ids,
        }))
    } else {
        let set = generate_all(protocol);
        let manifest = serde_json::to_value(&set.manifest)?;
        (set.probes, manifest)
    };
    let mut files = serde_json::Map::new();
    for (i, p) in probes.iter().enumerate() {
        let name = probe_filename(i, p.id());
        fs::write(out.join(&name), save_probe(p))?;
        files.insert(p.id().to_string(), serde_json::Value::String(name));
    }
    let mut manifest = manifest_json;
    manifest["files"] = serde_json::Value::Object(files);
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("{} probes written to {}", probes.len(), out.display());
    Ok(())
}

fn cmd_select(
    matrix_path: &Path,
    out: &Path,
    theta: f64,
    cutoff: f64,
    max_probes: Option<usize>,
    curve: Option<&Path>,
) -> Result<()> {
    let text = fs::read_to_string(matrix_path)
        .with_context(|| format!("reading {}", matrix_path.display()))?;
    let matrix = OutcomeMatrix::from_csv(&text).map_err(|e| usage(e.to_string()))?;
    if matrix.rows.is_empty() || matrix.cols.is_empty() {
        return Err(usage("matrix has no rows or columns"));
    }
    let params =
        SelectionParams { phi_threshold: theta, inconclusive_cutoff: cutoff, max_probes };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let selected = select(&matrix, &params);
    let mut body = format!("# theta={theta} cutoff={cutoff}\n");
    for id in &selected {
        body.push_str(id);
        body.push('\n');
    }
    fs::write(out, body)?;
    if let Some(curve_path) = curve {
        fs::write(curve_path, distance_curve_csv(&distance_curve(&matrix, &selected)))?;
    }
    println!("{} probes selected", selected.len());
    Ok(())
}

fn load_probe_dir(dir: &Path) -> Result<Vec<ProbeConfig>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map_or(false, |x| x == "yaml" || x == "yml"))
        .collect();
    names.sort();
    let mut probes = Vec::new();
    for path in names {
        let bytes = fs::read(&path)?;
        let probe = load_probe(&bytes)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        probes.push(probe);
    }
    if probes.is_empty() {
        bail!("no probe files in {}", dir.display());
    }
    Ok(probes)
}

fn zoo_profile(id: &str) -> Result<DpiProfile> {
    zoo_default()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| usage(format!("unknown zoo profile {id}")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_probe(
    probes_dir: Option<&Path>,
    protocol: Protocol,
    targets: Option<&Path>,
    transport: &str,
    profile: &str,
    repetitions: u32,
    delay: f64,
    seed: u64,
    out: &Path,
    pcap: Option<&Path>,
) -> Result<()> {
    let mut probes = vec![baseline(ProtocolScope::Both)];
    match probes_dir {
        Some(dir) => probes.extend(load_probe_dir(dir)?),
        None => probes.extend(builtin_top40(protocol)),
    }
    let targets: Vec<TargetSpec> = match targets {
        Some(path) => serde_json::from_slice(&fs::read(path)?)?,
        None => vec![sim_target(protocol)],
    };
    let mut plan = CampaignPlan::new(targets, probes, seed);
    plan.repetitions = repetitions;
    plan.inter_probe_delay = delay;
    plan.validate().map_err(usage)?;

    let records = match transport {
        "sim" => {
            let mut factory =
                crate::prober::SimFactory { profiles: vec![zoo_profile(profile)?], seed };
            run_campaign(&plan, &mut factory)
        }
        "raw" => {
            let findings = raw_preflight();
            if !findings.iter().all(|f| f.starts_with("verify")) {
                bail!("raw preflight failed:\n{}", findings.join("\n"));
            }
            let mut factory = RawFactory;
            run_campaign(&plan, &mut factory)
        }
        other => return Err(usage(format!("unknown transport {other}"))),
    };
    let mut buf = Vec::new();
    write_jsonl(&records, &mut buf)?;
    fs::write(out, buf)?;
    if let Some(pcap_path) = pcap {
        let mut f = fs::File::create(pcap_path)?;
        write_records_pcap(&records, &mut f)?;
    }
    println!("{} records written to {}", records.len(), out.display());
    Ok(())
}

struct RawFactory;

impl TransportFactory for RawFactory {
    fn create(&mut self, target: &TargetSpec) -> Result<Box<dyn Transport>, TransportError> {
        let t = crate::prober::RawTransport::open(Ipv4Addr::new(0, 0, 0, 0), target.address)?;
        Ok(Box::new(t))
    }
}

fn default_order(records: &[MeasurementRecord]) -> Vec<String> {
    let mut ids: Vec<String> = records
        .iter()
        .map(|r| r.probe_id.clone())
        .filter(|id| id != BASELINE_PROBE_ID)
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

fn cmd_analyze(
    records_path: &Path,
    out: &Path,
    csv: Option<&Path>,
    signatures: &[PathBuf],
    order: Option<&Path>,
) -> Result<()> {
    let records = read_jsonl(&fs::read_to_string(records_path)?)?;
    if records.is_empty() {
        return Err(usage("record file is empty"));
    }
    let mut db = BlockpageDb::zoo_default();
    for path in signatures {
        db.merge(BlockpageDb::load(path).map_err(|e| anyhow::anyhow!("{e}"))?);
    }
    let order: Vec<String> = match order {
        Some(path) => fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect(),
        None => default_order(&records),
    };
    let fps = fingerprints_from_records(&records, &db, &order)?;
    let set = FingerprintSet::from_fingerprints(&fps)?;
    fs::write(out, serde_json::to_string_pretty(&set)?)?;
    if let Some(csv_path) = csv {
        let mut body = String::from("target,probe,bit\n");
        for fp in &fps {
            for (id, bit) in fp.probe_order.iter().zip(&fp.bits) {
                body.push_str(&format!("{},{},{}\n", fp.target, id, bit));
            }
        }
        fs::write(csv_path, body)?;
    }
    println!("{} fingerprints written to {}", fps.len(), out.display());
    Ok(())
}

fn load_set(path: &Path) -> Result<FingerprintSet> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

fn cmd_cluster(
    fingerprints: &Path,
    min_cluster_size: usize,
    out: &Path,
    single_linkage: Option<f64>,
) -> Result<()> {
    let set = load_set(fingerprints)?;
    let result = match single_linkage {
        Some(threshold) => {
            cluster_single_linkage(&set.distance_matrix(), threshold, min_cluster_size)
        }
        None => cluster(&set, min_cluster_size)?,
    };
    let mut body = String::from("target,cluster\n");
    for (t, l) in set.targets().iter().zip(&result.labels) {
        body.push_str(&format!("{t},{l}\n"));
    }
    fs::write(out, body)?;
    println!("{} clusters ({} targets)", result.n_clusters, result.labels.len());
    Ok(())
}

fn cmd_report(fingerprints: &Path, out_dir: &Path, min_cluster_size: usize) -> Result<()> {
    let set = load_set(fingerprints)?;
    fs::create_dir_all(out_dir)?;
    let d = set.distance_matrix();
    let labels = match cluster(&set, min_cluster_size) {
        Ok(r) => r.labels,
        Err(_) => vec![0; d.len()],
    };
    if d.len() >= 3 {
        let mds = mds_2d_distances(&d)?;
        fs::write(out_dir.join("mds.svg"), svg_scatter(&mds.coords, &labels))?;
        let mut coords_csv = String::from("target,x,y\n");
        for (t, (x, y)) in set.targets().iter().zip(&mds.coords) {
            coords_csv.push_str(&format!("{t},{x},{y}\n"));
        }
        fs::write(out_dir.join("mds.csv"), coords_csv)?;
    }
    let dist = scoped_distributions(&set);
    fs::write(out_dir.join("distances.svg"), svg_histogram(&dist.all))?;
    let mut hist_csv = String::from("scope,distance,count\n");
    let scopes: [(&str, Option<&crate::analytics::Histogram>); 4] = [
        ("all", Some(&dist.all)),
        ("netblock", dist.same_netblock.as_ref()),
        ("asn", dist.same_asn.as_ref()),
        ("country", dist.same_country.as_ref()),
    ];
    for (name, hist) in scopes {
        if let Some(h) = hist {
            for (bin, count) in h {
                hist_csv.push_str(&format!("{name},{bin},{count}\n"));
            }
        }
    }
    fs::write(out_dir.join("distances.csv"), hist_csv)?;
    println!("report written to {}", out_dir.display());
    Ok(())
}

fn cmd_zoo(out: Option<&Path>) -> Result<()> {
    let yaml = serde_yaml::to_string(&zoo_default())?;
    match out {
        Some(path) => fs::write(path, yaml)?,
        None => print!("{yaml}"),
    }
    Ok(())
}

fn cmd_preflight() -> Result<()> {
    let findings = raw_preflight();
    for f in &findings {
        println!("- {f}");
    }
    if findings.iter().any(|f| !f.starts_with("verify")) {
        bail!("preflight found blocking issues");
    }
    println!("preflight ok (manual checks listed above)");
    Ok(())
}

// ---------------------------------------------------------------------------
// Demo

/// Assigns each simulated target the middlebox chain of its zoo profile.
struct PerTargetFactory {
    by_address: HashMap<Ipv4Addr, DpiProfile>,
    seed: u64,
}

impl TransportFactory for PerTargetFactory {
    fn create(&mut self, target: &TargetSpec) -> Result<Box<dyn Transport>, TransportError> {
        let profile = self
            .by_address
            .get(&target.address)
            .cloned()
            .ok_or_else(|| TransportError::Io("no profile for target".into()))?;
        Ok(Box::new(SimTransport::new(
            vec![profile],
            EndhostProfile::for_protocol(target.protocol),
            self.seed,
        )))
    }
}

fn demo_targets(targets_per_profile: usize) -> (Vec<TargetSpec>, HashMap<Ipv4Addr, DpiProfile>) {
    let mut targets = Vec::new();
    let mut by_address = HashMap::new();
    for (pi, profile) in zoo_default().into_iter().enumerate() {
        for t in 0..targets_per_profile {
            let address = Ipv4Addr::new(10, 9, pi as u8, 10 + t as u8);
            by_address.insert(address, profile.clone());
            targets.push(TargetSpec {
                address,
                port: 80,
                protocol: Protocol::Http,
                domains: TargetDomains {
                    control: "ok.example.net".into(),
                    test: Some("blocked.example.com".into()),
                },
                metadata: Some(TargetMetadata {
                    netblock: Some(format!("10.9.{pi}.0/24")),
                    asn: Some(65000 + pi as u32),
                    country: Some(if pi % 2 == 0 { "AA".into() } else { "BB".into() }),
                }),
            });
        }
    }
    (targets, by_address)
}

pub fn run_demo(
    out_dir: &Path,
    seed: u64,
    repetitions: u32,
    targets_per_profile: usize,
) -> Result<()> {
    cmd_demo(out_dir, seed, repetitions, targets_per_profile)
}

fn cmd_demo(out_dir: &Path, seed: u64, repetitions: u32, targets_per_profile: usize) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    cmd_zoo(Some(&out_dir.join("zoo.yaml")))?;
    let probes_dir = out_dir.join("probes");
    cmd_generate(Protocol::Http, &probes_dir, true)?;

    let mut probes = vec![baseline(ProtocolScope::Both)];
    probes.extend(builtin_top40(Protocol::Http));
    let (targets, by_address) = demo_targets(targets_per_profile);
    let ground_truth: BTreeMap<String, String> = targets
        .iter()
        .map(|t| (t.label(), by_address[&t.address].id.clone()))
        .collect();
    let mut plan = CampaignPlan::new(targets, probes, seed);
    plan.repetitions = repetitions;
    plan.validate().map_err(usage)?;
    let mut factory = PerTargetFactory { by_address, seed };
    let records = run_campaign(&plan, &mut factory);
    let mut buf = Vec::new();
    write_jsonl(&records, &mut buf)?;
    fs::write(out_dir.join("records.jsonl"), buf)?;

    let db = BlockpageDb::zoo_default();
    let order: Vec<String> =
        builtin_top40(Protocol::Http).iter().map(|p| p.id().to_string()).collect();
    let fps = fingerprints_from_records(&records, &db, &order)?;
    let mut set = FingerprintSet::from_fingerprints(&fps)?;
    for t in &plan.targets {
        if let Some(meta) = &t.metadata {
            set.metadata.insert(t.label(), meta.clone());
        }
    }
    fs::write(out_dir.join("fingerprints.json"), serde_json::to_string_pretty(&set)?)?;

    // Selection over per-profile group rows (one representative target each).
    let mut rep_fps = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for fp in &fps {
        let profile = &ground_truth[&fp.target];
        if seen.insert(profile.clone()) {
            let mut fp = fp.clone();
            fp.target = profile.clone();
            rep_fps.push(fp);
        }
    }
    let matrix = OutcomeMatrix::from_fingerprints(&rep_fps);
    fs::write(out_dir.join("matrix.csv"), matrix.to_csv())?;
    let params = SelectionParams::default();
    let selected = select(&matrix, &params);
    let mut sel_body = format!("# theta={} cutoff={}\n", params.phi_threshold, params.inconclusive_cutoff);
    for id in &selected {
        sel_body.push_str(id);
        sel_body.push('\n');
    }
    fs::write(out_dir.join("selected.txt"), sel_body)?;
    fs::write(
        out_dir.join("distance_curve.csv"),
        distance_curve_csv(&distance_curve(&matrix, &selected)),
    )?;

    let min_cluster_size = targets_per_profile.max(2);
    cmd_cluster(
        &out_dir.join("fingerprints.json"),
        min_cluster_size,
        &out_dir.join("clusters.csv"),
        None,
    )?;
    let mut gt_body = String::from("target,profile\n");
    for (t, p) in &ground_truth {
        gt_body.push_str(&format!("{t},{p}\n"));
    }
    fs::write(out_dir.join("ground_truth.csv"), gt_body)?;
    cmd_report(&out_dir.join("fingerprints.json"), &out_dir.join("report"), min_cluster_size)?;
    println!("demo complete: {}", out_dir.display());
    Ok(())
}
