//! Probe selection: pre-filter, entropy ranking, and greedy admission under
//! a phi-coefficient redundancy threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::Fingerprint;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("column has no conclusive cells")]
    NoConclusiveData,
    #[error("bad matrix csv: {0}")]
    BadCsv(String),
    #[error("invalid params: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Bypass,
    NoEffect,
    Inconclusive,
}

impl Cell {
    pub fn from_bit(bit: i8) -> Cell {
        match bit {
            1 => Cell::Bypass,
            0 => Cell::NoEffect,
            _ => Cell::Inconclusive,
        }
    }

    pub fn bit(self) -> i8 {
        match self {
            Cell::Bypass => 1,
            Cell::NoEffect => 0,
            Cell::Inconclusive => -1,
        }
    }

    fn conclusive(self) -> bool {
        self != Cell::Inconclusive
    }
}

/// Rows are DPI group ids, columns probes; cell = consolidated verdict of
/// that probe against that group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// Row-major.
    pub cells: Vec<Vec<Cell>>,
}

impl OutcomeMatrix {
    pub fn from_fingerprints(fps: &[Fingerprint]) -> Self {
        let cols = fps.first().map(|f| f.probe_order.clone()).unwrap_or_default();
        let rows = fps.iter().map(|f| f.target.clone()).collect();
        let cells = fps
            .iter()
            .map(|f| f.bits.iter().map(|&b| Cell::from_bit(b)).collect())
            .collect();
        OutcomeMatrix { rows, cols, cells }
    }

    pub fn column(&self, probe_id: &str) -> Option<Vec<Cell>> {
        let j = self.cols.iter().position(|c| c == probe_id)?;
        Some(self.cells.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group");
        for c in &self.cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(r);
            for cell in &self.cells[i] {
                out.push(',');
                out.push_str(&cell.bit().to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(s: &str) -> Result<Self, SelectionError> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SelectionError::BadCsv("empty".into()))?;
        let cols: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for line in lines {
            let mut parts = line.split(',');
            rows.push(
                parts
                    .next()
                    .ok_or_else(|| SelectionError::BadCsv("missing row id".into()))?
                    .to_string(),
            );
            let row: Result<Vec<Cell>, _> = parts
                .map(|p| {
                    p.trim()
                        .parse::<i8>()
                        .map(Cell::from_bit)
                        .map_err(|e| SelectionError::BadCsv(e.to_string()))
                })
                .collect();
            let row = row?;
            if row.len() != cols.len() {
                return Err(SelectionError::BadCsv("ragged row".into()));
            }
            cells.push(row);
        }
        Ok(OutcomeMatrix { rows, cols, cells })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionParams {
    pub phi_threshold: f64,
    pub inconclusive_cutoff: f64,
    pub max_probes: Option<usize>,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams { phi_threshold: 0.85, inconclusive_cutoff: 0.10, max_probes: None }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.phi_threshold > 0.0 && self.phi_threshold <= 1.0) {
            return Err(SelectionError::BadParams("phi threshold must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Drop probes that are uniform over their conclusive outcomes or whose
/// inconclusive fraction reaches the cutoff.
pub fn prefilter(matrix: &OutcomeMatrix, params: &SelectionParams) -> Vec<String> {
    matrix
        .cols
        .iter()
        .filter(|id| {
            let col = matrix.column(id).unwrap();
            let total = col.len();
            if total == 0 {
                return false;
            }
            let inc = col.iter().filter(|c| !c.conclusive()).count();
            if inc as f64 / total as f64 >= params.inconclusive_cutoff {
                return false;
            }
            let bypass = col.iter().filter(|&&c| c == Cell::Bypass).count();
            let noeffect = col.iter().filter(|&&c| c == Cell::NoEffect).count();
            bypass > 0 && noeffect > 0
        })
        .cloned()
        .collect()
}

/// Shannon entropy (bits) of the Bypass fraction among conclusive cells.
pub fn entropy_score(column: &[Cell]) -> Result<f64, SelectionError> {
    let conclusive: Vec<Cell> = column.iter().copied().filter(|c| c.conclusive()).collect();
    if conclusive.is_empty() {
        return Err(SelectionError::NoConclusiveData);
    }
    let p = conclusive.iter().filter(|&&c| c == Cell::Bypass).count() as f64
        / conclusive.len() as f64;
    Ok(binary_entropy(p))
}

fn binary_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

/// Phi coefficient over rows where both columns are conclusive; degenerate
/// (zero-variance) margins yield 0.
pub fn phi(a: &[Cell], b: &[Cell]) -> f64 {
    // 2x2 contingency: n11 Bypass/Bypass, n10 Bypass/NoEffect, etc.
    let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        if !x.conclusive() || !y.conclusive() {
            continue;
        }
        match (x == Cell::Bypass, y == Cell::Bypass) {
            (true, true) => n11 += 1.0,
            (true, false) => n10 += 1.0,
            (false, true) => n01 += 1.0,
            (false, false) => n00 += 1.0,
        }
    }
    let denom =
        ((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (n11 * n00 - n10 * n01) / denom
}

/// Entropy-descending, id-ascending greedy admission: a candidate joins the
/// set only if |phi| against every already-admitted probe stays below the
/// threshold.
pub fn select(matrix: &OutcomeMatrix, params: &SelectionParams) -> Vec<String> {
    let mut ranked: Vec<(String, f64)> = prefilter(matrix, params)
        .into_iter()
        .filter_map(|id| {
            let col = matrix.column(&id)?;
            entropy_score(&col).ok().map(|h| (id, h))
        })
        .collect();
    ranked.sort_by(|(ida, ha), (idb, hb)| {
        hb.partial_cmp(ha).unwrap().then_with(|| ida.cmp(idb))
    });

    let mut selected: Vec<String> = Vec::new();
    for (id, _) in ranked {
        if let Some(max) = params.max_probes {
            if selected.len() >= max {
                break;
            }
        }
        let col = matrix.column(&id).unwrap();
        let redundant = selected.iter().any(|s| {
            let other = matrix.column(s).unwrap();
            phi(&col, &other).abs() >= params.phi_threshold
        });
        if !redundant {
            selected.push(id);
        }
    }
    selected
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub n: usize,
    pub min: f64,
    pub mean: f64,
}

fn masked_raw_hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter()
        .zip(b)
        .filter(|(&x, &y)| x != -1 && y != -1 && x != y)
        .count()
}

/// Min and mean pairwise masked Hamming distance between group fingerprints
/// restricted to the first N selected probes, for every prefix N.
pub fn distance_curve(matrix: &OutcomeMatrix, order: &[String]) -> Vec<DistancePoint> {
    let cols: Vec<Vec<Cell>> =
        order.iter().filter_map(|id| matrix.column(id)).collect();
    let ngroups = matrix.rows.len();
    let mut out = Vec::new();
    for n in 0..=cols.len() {
        let fps: Vec<Vec<i8>> = (0..ngroups)
            .map(|g| cols[..n].iter().map(|c| c[g].bit()).collect())
            .collect();
        let mut dists = Vec::new();
        for i in 0..ngroups {
            for j in i + 1..ngroups {
                dists.push(masked_raw_hamming(&fps[i], &fps[j]) as f64);
            }
        }
        let (min, mean) = if dists.is_empty() {
            (0.0, 0.0)
        } else {
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = dists.iter().sum::<f64>() / dists.len() as f64;
            (min, mean)
        };
        out.push(DistancePoint { n, min, mean });
    }
    out
}

pub fn distance_curve_csv(points: &[DistancePoint]) -> String {
    let mut s = String::from("n,min,mean\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.n, p.min, p.mean));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(bits: &[i8]) -> Vec<Cell> {
        bits.iter().map(|&b| Cell::from_bit(b)).collect()
    }

    fn matrix(cols: &[(&str, &[i8])]) -> OutcomeMatrix {
        let ngroups = cols[0].1.len();
        let rows = (0..ngroups).map(|i| format!("g{i}")).collect();
        let cells = (0..ngroups)
            .map(|i| cols.iter().map(|(_, b)| Cell::from_bit(b[i])).collect())
            .collect();
        OutcomeMatrix {
            rows,
            cols: cols.iter().map(|(id, _)| id.to_string()).collect(),
            cells,
        }
    }

    #[test]
    fn entropy_oracle_values() {
        assert!((entropy_score(&cells(&[1, 1, 1, 1, 0, 0, 0, 0])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(entropy_score(&cells(&[1; 8])).unwrap(), 0.0);
        // p = 3/8: closed form.
        let h = entropy_score(&cells(&[1, 1, 1, 0, 0, 0, 0, 0])).unwrap();
        assert!((h - 0.954434).abs() < 1e-6, "{h}");
        // Label-swap invariance.
        let h2 = entropy_score(&cells(&[0, 0, 0, 1, 1, 1, 1, 1])).unwrap();
        assert!((h - h2).abs() < 1e-12);
        // Inconclusive cells leave the denominator.
        let h3 = entropy_score(&cells(&[1, 1, 1, 0, 0, 0, 0, 0, -1, -1])).unwrap();
        assert!((h - h3).abs() < 1e-12);
        assert!(entropy_score(&cells(&[-1, -1])).is_err());
    }

    #[test]
    fn phi_oracle_values() {
        let a = cells(&[1, 1, 0, 0]);
        assert!((phi(&a, &a) - 1.0).abs() < 1e-12);
        let b = cells(&[0, 0, 1, 1]);
        assert!((phi(&a, &b) + 1.0).abs() < 1e-12);
        // Contingency (3,1,1,3) -> 0.5.
        let x = cells(&[1, 1, 1, 1, 0, 0, 0, 0]);
        let y = cells(&[1, 1, 1, 0, 1, 0, 0, 0]);
        assert!((phi(&x, &y) - 0.5).abs() < 1e-12);
        // Zero variance -> 0.
        assert_eq!(phi(&cells(&[1, 1, 1]), &cells(&[1, 0, 1])), 0.0);
    }

    #[test]
    fn prefilter_rules() {
        let m = matrix(&[
            ("uniform", &[0, 0, 0, 0, 0, 0, 0, 0]),
            ("inc", &[1, 0, 1, 0, 1, 0, 1, -1]),
            ("good", &[1, 1, 1, 1, 0, 0, 0, 0]),
        ]);
        let params = SelectionParams::default();
        let kept = prefilter(&m, &params);
        assert_eq!(kept, vec!["good".to_string()]);
    }

    #[test]
    fn correlated_pair_admits_one() {
        let m = matrix(&[
            ("a", &[1, 1, 0, 0]),
            ("b", &[1, 1, 0, 0]),
            ("c", &[1, 0, 1, 0]),
        ]);
        let sel = select(&m, &SelectionParams::default());
        assert_eq!(sel, vec!["a".to_string(), "c".to_string()]);
    }

    #[test]
    fn theta_one_excludes_only_duplicates() {
        let m = matrix(&[
            ("a", &[1, 1, 0, 0]),
            ("dup", &[1, 1, 0, 0]),
            ("near", &[1, 1, 1, 0]),
        ]);
        let params = SelectionParams { phi_threshold: 1.0, ..Default::default() };
        let sel = select(&m, &params);
        assert!(sel.contains(&"a".to_string()));
        assert!(!sel.contains(&"dup".to_string()));
        assert!(sel.contains(&"near".to_string()));
    }

    /// Independent re-derivation of the greedy admission sequence.
    fn brute_force_admissible(m: &OutcomeMatrix, params: &SelectionParams) -> Vec<String> {
        let mut scored: Vec<(String, f64)> = prefilter(m, params)
            .into_iter()
            .map(|id| {
                let col = m.column(&id).unwrap();
                let conclusive: Vec<&Cell> =
                    col.iter().filter(|c| **c != Cell::Inconclusive).collect();
                let p = conclusive.iter().filter(|c| ***c == Cell::Bypass).count() as f64
                    / conclusive.len() as f64;
                let h = if p == 0.0 || p == 1.0 {
                    0.0
                } else {
                    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
                };
                (id, h)
            })
            .collect();
        scored.sort_by(|(ia, ha), (ib, hb)| hb.partial_cmp(ha).unwrap().then(ia.cmp(ib)));
        let mut sel: Vec<String> = Vec::new();
        'outer: for (id, _) in scored {
            for s in &sel {
                if phi(&m.column(&id).unwrap(), &m.column(s).unwrap()).abs()
                    >= params.phi_threshold
                {
                    continue 'outer;
                }
            }
            sel.push(id);
        }
        sel
    }

    #[test]
    fn greedy_matches_brute_force_on_synthetic_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let params = SelectionParams::default();
        for _ in 0..50 {
            let nprobes = rng.gen_range(3..=10);
            let ngroups = 6;
            let cols: Vec<(String, Vec<i8>)> = (0..nprobes)
                .map(|i| {
                    let bits: Vec<i8> =
                        (0..ngroups).map(|_| if rng.gen_bool(0.5) { 1 } else { 0 }).collect();
                    (format!("p{i:02}"), bits)
                })
                .collect();
            let refs: Vec<(&str, &[i8])> =
                cols.iter().map(|(id, b)| (id.as_str(), b.as_slice())).collect();
            let m = matrix(&refs);
            let got = select(&m, &params);
            assert_eq!(got, brute_force_admissible(&m, &params));
            // Post-hoc: every admitted pair is below threshold.
            for i in 0..got.len() {
                for j in i + 1..got.len() {
                    let p = phi(&m.column(&got[i]).unwrap(), &m.column(&got[j]).unwrap());
                    assert!(p.abs() < params.phi_threshold);
                }
            }
        }
    }

    #[test]
    fn distance_curve_monotone() {
        let m = matrix(&[
            ("a", &[1, 1, 0, 0]),
            ("b", &[1, 0, 1, 0]),
            ("c", &[0, 1, 1, 0]),
        ]);
        let order: Vec<String> = m.cols.clone();
        let curve = distance_curve(&m, &order);
        assert_eq!(curve[0].min, 0.0);
        assert_eq!(curve[0].mean, 0.0);
        for w in curve.windows(2) {
            assert!(w[1].min >= w[0].min);
            assert!(w[1].mean >= w[0].mean);
        }
        assert!(curve.last().unwrap().min >= 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let m = matrix(&[("a", &[1, 0, -1]), ("b", &[0, 0, 1])]);
        let csv = m.to_csv();
        let back = OutcomeMatrix::from_csv(&csv).unwrap();
        assert_eq!(m, back);
        assert!(OutcomeMatrix::from_csv("").is_err());
    }
}
