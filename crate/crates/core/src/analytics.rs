//! Fingerprint similarity, distance distributions, density clustering, 2-D
//! MDS projection, repeat aggregation, and epoch-over-epoch diffing.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{consolidate, Fingerprint, Outcome};
use crate::prober::TargetMetadata;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("fingerprints have different probe orders")]
    OrderMismatch,
    #[error("need at least {0} fingerprints")]
    TooFew(usize),
}

// ---------------------------------------------------------------------------
// Masked Hamming

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedHamming {
    /// Differing positions where both bits are conclusive.
    pub raw: usize,
    /// Positions where both bits are conclusive.
    pub conclusive: usize,
    /// raw / conclusive; 0 when nothing is comparable (see `no_overlap`).
    pub normalized: f64,
    pub no_overlap: bool,
}

pub fn masked_hamming(a: &Fingerprint, b: &Fingerprint) -> Result<MaskedHamming, AnalyticsError> {
    if a.probe_order != b.probe_order {
        return Err(AnalyticsError::OrderMismatch);
    }
    Ok(masked_hamming_bits(&a.bits, &b.bits))
}

pub fn masked_hamming_bits(a: &[i8], b: &[i8]) -> MaskedHamming {
    let mut raw = 0;
    let mut conclusive = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x != -1 && y != -1 {
            conclusive += 1;
            if x != y {
                raw += 1;
            }
        }
    }
    let no_overlap = conclusive == 0;
    let normalized = if no_overlap { 0.0 } else { raw as f64 / conclusive as f64 };
    MaskedHamming { raw, conclusive, normalized, no_overlap }
}

// ---------------------------------------------------------------------------
// Fingerprint sets and scoped distributions

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FingerprintSet {
    pub probe_order: Vec<String>,
    /// target-ref -> bit vector aligned to probe_order.
    pub bits: BTreeMap<String, Vec<i8>>,
    pub metadata: BTreeMap<String, TargetMetadata>,
}

impl FingerprintSet {
    pub fn from_fingerprints(fps: &[Fingerprint]) -> Result<Self, AnalyticsError> {
        let mut set = FingerprintSet::default();
        for fp in fps {
            if set.probe_order.is_empty() {
                set.probe_order = fp.probe_order.clone();
            } else if set.probe_order != fp.probe_order {
                return Err(AnalyticsError::OrderMismatch);
            }
            set.bits.insert(fp.target.clone(), fp.bits.clone());
        }
        Ok(set)
    }

    pub fn targets(&self) -> Vec<&String> {
        self.bits.keys().collect()
    }

    /// Raw masked-Hamming distance matrix in target key order.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let rows: Vec<&Vec<i8>> = self.bits.values().collect();
        let n = rows.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let h = masked_hamming_bits(rows[i], rows[j]).raw as f64;
                d[i][j] = h;
                d[j][i] = h;
            }
        }
        d
    }
}

pub type Histogram = BTreeMap<usize, usize>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScopedDistributions {
    pub all: Histogram,
    pub same_netblock: Option<Histogram>,
    pub same_asn: Option<Histogram>,
    pub same_country: Option<Histogram>,
}

/// Raw-distance histograms over all pairs and over pairs sharing netblock,
/// ASN, or country; a scope is absent when no pair carries that metadata.
pub fn scoped_distributions(set: &FingerprintSet) -> ScopedDistributions {
    let targets: Vec<&String> = set.targets();
    let d = set.distance_matrix();
    let mut out = ScopedDistributions::default();
    let mut netblock: Histogram = Histogram::new();
    let mut asn: Histogram = Histogram::new();
    let mut country: Histogram = Histogram::new();
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            let dist = d[i][j] as usize;
            *out.all.entry(dist).or_default() += 1;
            let (ma, mb) = (set.metadata.get(targets[i]), set.metadata.get(targets[j]));
            if let (Some(ma), Some(mb)) = (ma, mb) {
                if ma.netblock.is_some() && ma.netblock == mb.netblock {
                    *netblock.entry(dist).or_default() += 1;
                }
                if ma.asn.is_some() && ma.asn == mb.asn {
                    *asn.entry(dist).or_default() += 1;
                }
                if ma.country.is_some() && ma.country == mb.country {
                    *country.entry(dist).or_default() += 1;
                }
            }
        }
    }
    out.same_netblock = (!netblock.is_empty()).then_some(netblock);
    out.same_asn = (!asn.is_empty()).then_some(asn);
    out.same_country = (!country.is_empty()).then_some(country);
    out
}

// ---------------------------------------------------------------------------
// Density clustering (HDBSCAN contract) and single-linkage fallback

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Per-target cluster id, or -1 for noise; aligned to target key order.
    pub labels: Vec<i64>,
    pub min_cluster_size: usize,
    pub n_clusters: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) -> (usize, usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
        (ra, rb)
    }
}

/// Dendrogram node from single-linkage over mutual reachability.
struct SlNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn core_distances(d: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = d.len();
    // The point counts as its own nearest neighbor (distance zero).
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| d[i][j]).collect();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            row[k.saturating_sub(1).min(n - 1)]
        })
        .collect()
}

fn mst_edges(d: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    // Prim's algorithm over the dense matrix.
    let n = d.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    in_tree[0] = true;
    for j in 1..n {
        best[j] = d[0][j];
        best_from[j] = 0;
    }
    for _ in 1..n {
        let mut u = usize::MAX;
        let mut ud = f64::INFINITY;
        for j in 0..n {
            // Tolerate infinite weights: disconnected components still join
            // the tree, merging at zero density.
            if !in_tree[j] && (u == usize::MAX || best[j] < ud) {
                ud = best[j];
                u = j;
            }
        }
        in_tree[u] = true;
        edges.push((best_from[u], u, ud));
        for j in 0..n {
            if !in_tree[j] && d[u][j] < best[j] {
                best[j] = d[u][j];
                best_from[j] = u;
            }
        }
    }
    edges
}

const LAMBDA_CAP: f64 = 1e12;

fn lambda_of(distance: f64) -> f64 {
    if distance <= 0.0 { LAMBDA_CAP } else { (1.0 / distance).min(LAMBDA_CAP) }
}

/// Density clustering to the HDBSCAN contract: mutual-reachability single
/// linkage, condensation by min_cluster_size, stability-based extraction,
/// remaining points labeled noise. The root is never selected as a cluster.
/// Pairs with no conclusive overlap are unrelatable, not identical: they get
/// infinite distance so an all-masked fingerprint cannot bridge clusters.
pub fn cluster(set: &FingerprintSet, min_cluster_size: usize) -> Result<ClusterResult, AnalyticsError> {
    let rows: Vec<&Vec<i8>> = set.bits.values().collect();
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let h = masked_hamming_bits(rows[i], rows[j]);
            let dist = if h.no_overlap { f64::INFINITY } else { h.raw as f64 };
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    cluster_distances(&d, min_cluster_size)
}

pub fn cluster_distances(
    d: &[Vec<f64>],
    min_cluster_size: usize,
) -> Result<ClusterResult, AnalyticsError> {
    let n = d.len();
    if n < min_cluster_size {
        return Err(AnalyticsError::TooFew(min_cluster_size));
    }
    let core = core_distances(d, min_cluster_size);
    let mut mr = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                mr[i][j] = d[i][j].max(core[i]).max(core[j]);
            }
        }
    }
    let mut edges = mst_edges(&mr);
    edges.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());

    // Single-linkage dendrogram: nodes n.. are merges.
    let mut uf = UnionFind::new(2 * n - 1);
    let mut rep: Vec<usize> = (0..n).collect(); // union-find root -> dendrogram node
    let mut nodes: Vec<SlNode> = Vec::with_capacity(n - 1);
    let mut sizes: Vec<usize> = vec![1; 2 * n - 1];
    for (a, b, dist) in edges {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (na, nb) = (rep[ra], rep[rb]);
        let new = n + nodes.len();
        nodes.push(SlNode { left: na, right: nb, distance: dist, size: sizes[na] + sizes[nb] });
        sizes[new] = sizes[na] + sizes[nb];
        let (_, r) = uf.union(ra, rb);
        rep[r] = new;
    }
    if nodes.is_empty() {
        return Ok(ClusterResult { labels: vec![0], min_cluster_size, n_clusters: 1 });
    }

    // Condensed tree: walk top-down; a split child smaller than
    // min_cluster_size dissolves into falling-out points.
    #[derive(Default, Clone)]
    struct Condensed {
        birth_lambda: f64,
        stability: f64,
        children: Vec<usize>,
        points: Vec<(usize, f64)>, // (point, lambda at which it leaves)
    }
    let mut cond: Vec<Condensed> = vec![Condensed::default()];
    let root_node = n + nodes.len() - 1;

    // Collect leaf points of a dendrogram subtree with the lambda at which
    // each point separates (for dissolved subtrees, the dissolve lambda).
    fn collect_points(node: usize, n: usize, nodes: &[SlNode], out: &mut Vec<usize>) {
        if node < n {
            out.push(node);
        } else {
            collect_points(nodes[node - n].left, n, nodes, out);
            collect_points(nodes[node - n].right, n, nodes, out);
        }
    }

    // Stack of (dendrogram node, condensed cluster id).
    let mut stack = vec![(root_node, 0usize)];
    while let Some((node, cid)) = stack.pop() {
        if node < n {
            cond[cid].points.push((node, LAMBDA_CAP));
            continue;
        }
        let merge = &nodes[node - n];
        let lambda = lambda_of(merge.distance);
        let (l, r) = (merge.left, merge.right);
        let lsize = if l < n { 1 } else { nodes[l - n].size };
        let rsize = if r < n { 1 } else { nodes[r - n].size };
        let big = |s: usize| s >= min_cluster_size;
        match (big(lsize), big(rsize)) {
            (true, true) => {
                for child_node in [l, r] {
                    let child = cond.len();
                    cond.push(Condensed {
                        birth_lambda: lambda,
                        ..Default::default()
                    });
                    cond[cid].children.push(child);
                    stack.push((child_node, child));
                }
            }
            (true, false) => {
                let mut pts = Vec::new();
                collect_points(r, n, &nodes, &mut pts);
                for p in pts {
                    cond[cid].points.push((p, lambda));
                }
                stack.push((l, cid));
            }
            (false, true) => {
                let mut pts = Vec::new();
                collect_points(l, n, &nodes, &mut pts);
                for p in pts {
                    cond[cid].points.push((p, lambda));
                }
                stack.push((r, cid));
            }
            (false, false) => {
                let mut pts = Vec::new();
                collect_points(l, n, &nodes, &mut pts);
                collect_points(r, n, &nodes, &mut pts);
                for p in pts {
                    cond[cid].points.push((p, lambda));
                }
            }
        }
    }

    // Stability per condensed cluster.
    for i in 0..cond.len() {
        let birth = cond[i].birth_lambda;
        cond[i].stability =
            cond[i].points.iter().map(|&(_, l)| (l - birth).max(0.0)).sum::<f64>();
        // Children leaving at their birth lambda also contribute.
        // (Handled below after child stabilities are known.)
    }
    // Bottom-up: a cluster is selected if its own stability exceeds the sum
    // of its descendants' selected stability. Root (id 0) is never selected.
    let order: Vec<usize> = (0..cond.len()).rev().collect();
    let mut selected = vec![false; cond.len()];
    let mut subtree_stability = vec![0.0; cond.len()];
    for &i in &order {
        let child_sum: f64 = cond[i].children.iter().map(|&c| subtree_stability[c]).sum();
        if cond[i].children.is_empty() || cond[i].stability >= child_sum {
            selected[i] = true;
            subtree_stability[i] = cond[i].stability;
        } else {
            subtree_stability[i] = child_sum;
        }
    }
    selected[0] = false;
    // Deselect descendants of selected clusters.
    fn deselect_below(i: usize, cond_children: &[Vec<usize>], selected: &mut [bool]) {
        for &c in &cond_children[i] {
            selected[c] = false;
            deselect_below(c, cond_children, selected);
        }
    }
    let children: Vec<Vec<usize>> = cond.iter().map(|c| c.children.clone()).collect();
    for i in 0..cond.len() {
        if selected[i] {
            deselect_below(i, &children, &mut selected);
        }
    }

    // Labels: every point in a selected cluster's subtree gets that label.
    let mut labels = vec![NOISE; n];
    let mut next_label = 0i64;
    for i in 0..cond.len() {
        if !selected[i] {
            continue;
        }
        let label = next_label;
        next_label += 1;
        let mut stack = vec![i];
        while let Some(c) = stack.pop() {
            for &(p, _) in &cond[c].points {
                labels[p] = label;
            }
            stack.extend(cond[c].children.iter().copied());
        }
    }
    Ok(ClusterResult { labels, min_cluster_size, n_clusters: next_label as usize })
}

/// Fallback: single-linkage components over edges strictly below the
/// threshold; components smaller than min_cluster_size become noise.
pub fn cluster_single_linkage(
    d: &[Vec<f64>],
    threshold: f64,
    min_cluster_size: usize,
) -> ClusterResult {
    let n = d.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if d[i][j] < threshold {
                uf.union(i, j);
            }
        }
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    for &r in &roots {
        *sizes.entry(r).or_default() += 1;
    }
    let mut label_of: BTreeMap<usize, i64> = BTreeMap::new();
    let mut next = 0i64;
    let mut labels = vec![NOISE; n];
    for i in 0..n {
        let r = roots[i];
        if sizes[&r] < min_cluster_size {
            continue;
        }
        let l = *label_of.entry(r).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels[i] = l;
    }
    ClusterResult { labels, min_cluster_size, n_clusters: next as usize }
}

/// Adjusted Rand Index between two labelings (noise treated as a label).
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut table: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut rows: BTreeMap<i64, usize> = BTreeMap::new();
    let mut cols: BTreeMap<i64, usize> = BTreeMap::new();
    for i in 0..n {
        *table.entry((a[i], b[i])).or_default() += 1;
        *rows.entry(a[i]).or_default() += 1;
        *cols.entry(b[i]).or_default() += 1;
    }
    let c2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.values().map(|&v| c2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| c2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| c2(v)).sum();
    let total = c2(n);
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

// ---------------------------------------------------------------------------
// Classical MDS

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mds2d {
    /// (x, y) per target, aligned to target key order; centered at origin.
    pub coords: Vec<(f64, f64)>,
    /// All input distances were zero.
    pub degenerate: bool,
}

pub fn mds_2d(set: &FingerprintSet) -> Result<Mds2d, AnalyticsError> {
    let d = set.distance_matrix();
    mds_2d_distances(&d)
}

/// Torgerson double-centering + eigendecomposition.
pub fn mds_2d_distances(d: &[Vec<f64>]) -> Result<Mds2d, AnalyticsError> {
    let n = d.len();
    if n < 3 {
        return Err(AnalyticsError::TooFew(3));
    }
    if d.iter().all(|row| row.iter().all(|&x| x == 0.0)) {
        return Ok(Mds2d { coords: vec![(0.0, 0.0); n], degenerate: true });
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| d[i][j] * d[i][j]);
    let ones = DMatrix::from_element(n, n, 1.0 / n as f64);
    let eye = DMatrix::identity(n, n);
    let j = eye - ones;
    let b = -0.5 * (&j * d2 * &j);
    let eig = nalgebra::SymmetricEigen::new(b);
    // Top two nonnegative eigenvalues.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b2| {
        eig.eigenvalues[b2].partial_cmp(&eig.eigenvalues[a]).unwrap()
    });
    let mut coords = vec![(0.0, 0.0); n];
    for (axis, &e) in idx.iter().take(2).enumerate() {
        let lam = eig.eigenvalues[e].max(0.0);
        let scale = lam.sqrt();
        for i in 0..n {
            let v = eig.eigenvectors[(i, e)] * scale;
            if axis == 0 {
                coords[i].0 = v;
            } else {
                coords[i].1 = v;
            }
        }
    }
    Ok(Mds2d { coords, degenerate: false })
}

/// Normalized stress of an embedding against the target distances.
pub fn stress(d: &[Vec<f64>], coords: &[(f64, f64)]) -> f64 {
    let n = d.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let e = ((coords[i].0 - coords[j].0).powi(2) + (coords[i].1 - coords[j].1).powi(2))
                .sqrt();
            num += (e - d[i][j]).powi(2);
            den += d[i][j].powi(2);
        }
    }
    if den == 0.0 { 0.0 } else { num / den }
}

// ---------------------------------------------------------------------------
// Aggregation and diffing

/// Consolidate the first k repetitions per key via the analyzer rule.
pub fn aggregate_repeats<K: Ord + Clone>(
    outcomes: &BTreeMap<K, Vec<Outcome>>,
    k: usize,
) -> BTreeMap<K, Outcome> {
    outcomes
        .iter()
        .map(|(key, list)| {
            let take = list.iter().take(k.max(1)).cloned().collect::<Vec<_>>();
            (key.clone(), consolidate(&take))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EpochDiff {
    /// Bit positions changed versus epoch zero.
    Changed(Vec<usize>),
    /// Target absent from this epoch.
    Absent,
}

/// Per-target, per-epoch changed-bit report against the first epoch.
pub fn diff_fingerprints(
    epochs: &[FingerprintSet],
) -> Result<BTreeMap<String, Vec<EpochDiff>>, AnalyticsError> {
    let Some(first) = epochs.first() else { return Ok(BTreeMap::new()) };
    for e in epochs {
        if e.probe_order != first.probe_order {
            return Err(AnalyticsError::OrderMismatch);
        }
    }
    let mut out: BTreeMap<String, Vec<EpochDiff>> = BTreeMap::new();
    for (target, base_bits) in &first.bits {
        let mut series = Vec::new();
        for e in &epochs[1..] {
            match e.bits.get(target) {
                None => series.push(EpochDiff::Absent),
                Some(bits) => {
                    let changed: Vec<usize> = base_bits
                        .iter()
                        .zip(bits)
                        .enumerate()
                        .filter(|(_, (a, b))| a != b)
                        .map(|(i, _)| i)
                        .collect();
                    series.push(EpochDiff::Changed(changed));
                }
            }
        }
        out.insert(target.clone(), series);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// SVG output

fn svg_header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

const PALETTE: &[&str] =
    &["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Static scatter of MDS coordinates, colored by cluster label.
pub fn svg_scatter(coords: &[(f64, f64)], labels: &[i64]) -> String {
    let (w, h, pad) = (640.0, 480.0, 40.0);
    let mut s = svg_header(w, h);
    if !coords.is_empty() {
        let xs: Vec<f64> = coords.iter().map(|c| c.0).collect();
        let ys: Vec<f64> = coords.iter().map(|c| c.1).collect();
        let span = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo { (lo, hi - lo) } else { (lo - 0.5, 1.0) }
        };
        let (x0, xs_span) = span(&xs);
        let (y0, ys_span) = span(&ys);
        for (i, &(x, y)) in coords.iter().enumerate() {
            let px = pad + (x - x0) / xs_span * (w - 2.0 * pad);
            let py = h - pad - (y - y0) / ys_span * (h - 2.0 * pad);
            let color = match labels.get(i) {
                Some(&l) if l >= 0 => PALETTE[(l as usize) % PALETTE.len()],
                _ => "#bbbbbb",
            };
            s.push_str(&format!(
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"4\" fill=\"{color}\" \
                 fill-opacity=\"0.8\"/>\n"
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Static bar chart of a distance histogram.
pub fn svg_histogram(hist: &Histogram) -> String {
    let (w, h, pad) = (640.0, 480.0, 40.0);
    let mut s = svg_header(w, h);
    if !hist.is_empty() {
        let max_count = *hist.values().max().unwrap() as f64;
        let max_bin = *hist.keys().max().unwrap();
        let nbins = max_bin + 1;
        let bw = (w - 2.0 * pad) / nbins as f64;
        for (&bin, &count) in hist {
            let bh = count as f64 / max_count * (h - 2.0 * pad);
            let x = pad + bin as f64 * bw;
            let y = h - pad - bh;
            s.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" \
                 fill=\"#1f77b4\"/>\n",
                bw * 0.9
            ));
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" \
                 text-anchor=\"middle\">{bin}</text>\n",
                x + bw * 0.45,
                h - pad + 14.0
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}
