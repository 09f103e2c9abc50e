//! Post-campaign analysis: z-normalization, rank-based Gaussianization,
//! PCA over the per-fault event vectors, cycle histograms, and outcome
//! breakdowns.
//!
//! Only Benign and SDC records with complete event vectors enter the
//! feature matrix (crashed runs carry no readout); Other records still
//! count in the breakdown. Preprocessing order is fixed: z-normalize,
//! then Gaussianize, then PCA.

mod normal;

use serde::Serialize;
use thiserror::Error;

use crate::campaign::{CampaignRecord, OutcomeClass};
use crate::uarch::{EventKind, NUM_EVENTS};

pub use normal::{erfc, inv_phi};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("input is empty")]
    EmptyInput,
    #[error("requested {requested} components but the numerical rank is {rank}")]
    DegenerateCovariance { requested: usize, rank: usize },
}

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: n,
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    fn set_column(&mut self, c: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (r, v) in values.iter().enumerate() {
            self.set(r, c, *v);
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
fn pop_std(values: &[f64], mu: f64) -> f64 {
    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Result of z-normalization; constant columns map to all-zeros and
/// are reported so callers can surface a warning.
#[derive(Debug, Clone)]
pub struct ZNormalized {
    pub matrix: Matrix,
    pub constant_columns: Vec<usize>,
}

/// Per column: subtract the mean, divide by the population standard
/// deviation.
pub fn z_normalize(m: &Matrix) -> Result<ZNormalized, AnalysisError> {
    if m.rows < 2 {
        return Err(AnalysisError::TooFewRows(m.rows));
    }
    let mut out = m.clone();
    let mut constant_columns = Vec::new();
    for c in 0..m.cols {
        let col = m.column(c);
        let mu = mean(&col);
        let sigma = pop_std(&col, mu);
        if sigma <= 1e-12 * (1.0 + mu.abs()) {
            constant_columns.push(c);
            out.set_column(c, &vec![0.0; m.rows]);
        } else {
            let scaled: Vec<f64> = col.iter().map(|v| (v - mu) / sigma).collect();
            out.set_column(c, &scaled);
        }
    }
    Ok(ZNormalized {
        matrix: out,
        constant_columns,
    })
}

/// Rank-based inverse-normal transform, per column: each value maps to
/// `inv_phi(rank / (n + 1))` with average ranks for ties. Invariant
/// under any strictly increasing per-column transform of the input.
pub fn gaussianize(m: &Matrix) -> Result<Matrix, AnalysisError> {
    if m.rows < 2 {
        return Err(AnalysisError::TooFewRows(m.rows));
    }
    let mut out = m.clone();
    for c in 0..m.cols {
        let col = m.column(c);
        let ranks = average_ranks(&col);
        let n = m.rows as f64;
        let transformed: Vec<f64> = ranks.iter().map(|r| inv_phi(r / (n + 1.0))).collect();
        out.set_column(c, &transformed);
    }
    Ok(out)
}

/// 1-based ranks with ties sharing the average of their rank range.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN features"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Principal components of a preprocessed matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    /// k unit-norm column eigenvectors, cols x k, descending eigenvalue.
    pub components: Matrix,
    /// n x k projections of the (centered) input.
    pub projections: Matrix,
    /// Fraction of total variance captured by each component.
    pub explained_variance: Vec<f64>,
    /// All eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
}

/// PCA via eigendecomposition of the population column covariance.
/// Components carry a fixed sign convention: the largest-magnitude
/// coordinate of each component is positive. `k` must not exceed the
/// numerical rank (eigenvalue >= 1e-12 x trace).
pub fn pca(m: &Matrix, k: usize) -> Result<Pca, AnalysisError> {
    if m.rows < 2 {
        return Err(AnalysisError::TooFewRows(m.rows));
    }
    let n = m.rows;
    let d = m.cols;
    // center columns
    let mut centered = m.clone();
    for c in 0..d {
        let col = m.column(c);
        let mu = mean(&col);
        let shifted: Vec<f64> = col.iter().map(|v| v - mu).collect();
        centered.set_column(c, &shifted);
    }
    // covariance = X^T X / n
    let mut cov = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for r in 0..n {
                s += centered.get(r, a) * centered.get(r, b);
            }
            let v = s / n as f64;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }

    let (mut eigenvalues, mut vectors) = jacobi_eigen(&cov);
    // descending by eigenvalue; stable under ties
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();
    vectors = order.iter().map(|&i| vectors[i].clone()).collect();

    let trace: f64 = eigenvalues.iter().sum();
    let rank = if trace > 0.0 {
        eigenvalues
            .iter()
            .filter(|&&ev| ev >= 1e-12 * trace)
            .count()
    } else {
        0
    };
    if k > rank {
        return Err(AnalysisError::DegenerateCovariance { requested: k, rank });
    }

    // sign convention
    for vec in vectors.iter_mut().take(k) {
        let mut pivot = 0;
        for (i, v) in vec.iter().enumerate() {
            if v.abs() > vec[pivot].abs() {
                pivot = i;
            }
        }
        if vec[pivot] < 0.0 {
            for v in vec.iter_mut() {
                *v = -*v;
            }
        }
    }

    let mut components = Matrix::zeros(d, k);
    for (j, vec) in vectors.iter().take(k).enumerate() {
        for (i, v) in vec.iter().enumerate() {
            components.set(i, j, *v);
        }
    }
    let mut projections = Matrix::zeros(n, k);
    for r in 0..n {
        for j in 0..k {
            let mut s = 0.0;
            for c in 0..d {
                s += centered.get(r, c) * components.get(c, j);
            }
            projections.set(r, j, s);
        }
    }
    let explained_variance = eigenvalues
        .iter()
        .take(k)
        .map(|ev| if trace > 0.0 { ev / trace } else { 0.0 })
        .collect();
    Ok(Pca {
        components,
        projections,
        explained_variance,
        eigenvalues,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors) with eigenvectors as rows, unordered.
fn jacobi_eigen(sym: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = sym.cols;
    debug_assert_eq!(sym.rows, d);
    let mut a = sym.clone();
    let mut v = Matrix::zeros(d, d);
    for i in 0..d {
        v.set(i, i, 1.0);
    }
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s
    };
    let scale: f64 = (0..d).map(|i| sym.get(i, i).abs()).fold(1e-300, f64::max);
    for _sweep in 0..100 {
        if off(&a) <= (1e-30 * scale * scale).max(1e-280) {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/columns p and q
                for i in 0..d {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(i, q, s * aip + c * aiq);
                }
                for i in 0..d {
                    let api = a.get(p, i);
                    let aqi = a.get(q, i);
                    a.set(p, i, c * api - s * aqi);
                    a.set(q, i, s * api + c * aqi);
                }
                for i in 0..d {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..d).map(|i| a.get(i, i)).collect();
    let vectors: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..d).map(|i| v.get(i, j)).collect())
        .collect();
    (eigenvalues, vectors)
}

/// Equal-width histogram over [min, max]; the max value lands in the
/// last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// num_bins + 1 edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(values: &[f64], num_bins: usize) -> Result<Histogram, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    assert!(num_bins >= 1);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / num_bins as f64;
    let mut counts = vec![0u64; num_bins];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - min) / width) as usize).min(num_bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let mut edges: Vec<f64> = (0..=num_bins).map(|i| min + width * i as f64).collect();
    edges[num_bins] = max;
    Ok(Histogram { edges, counts })
}

/// Bin `values` into an existing set of edges (shared-bin histograms).
pub fn bin_into(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let num_bins = edges.len() - 1;
    let min = edges[0];
    let max = edges[num_bins];
    let width = (max - min) / num_bins as f64;
    let mut counts = vec![0u64; num_bins];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - min) / width) as usize).clamp(0, num_bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// Feature matrix and breakdown
// ---------------------------------------------------------------------------

/// Per-fault event counts as a real matrix: one row per Benign/SDC
/// record with a complete vector, one column per catalog event.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
    pub fault_ids: Vec<u64>,
    pub labels: Vec<OutcomeClass>,
    pub columns: [EventKind; NUM_EVENTS],
}

pub fn feature_matrix(records: &[CampaignRecord]) -> FeatureMatrix {
    let mut rows = Vec::new();
    let mut fault_ids = Vec::new();
    let mut labels = Vec::new();
    for record in records {
        if !matches!(record.outcome, OutcomeClass::Benign | OutcomeClass::Sdc) {
            continue;
        }
        let Some(vector) = record.events.to_vector() else {
            continue;
        };
        rows.push(
            EventKind::ALL
                .iter()
                .map(|&k| vector.get(k) as f64)
                .collect(),
        );
        fault_ids.push(record.fault.id);
        labels.push(record.outcome);
    }
    FeatureMatrix {
        matrix: Matrix::from_rows(&rows),
        fault_ids,
        labels,
        columns: EventKind::ALL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub benchmark: String,
    pub location: String,
    pub total: u64,
    pub benign_pct: f64,
    pub sdc_pct: f64,
    pub other_pct: f64,
    pub benign_cycles: Option<CycleStats>,
    pub sdc_cycles: Option<CycleStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownReport {
    pub rows: Vec<BreakdownRow>,
}

/// Outcome percentages per (benchmark, location class), one-decimal
/// rounded by largest remainder so each row sums to exactly 100.0,
/// plus per-class cycle statistics.
pub fn summarize(records: &[CampaignRecord]) -> Result<BreakdownReport, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut groups: Vec<(String, String, Vec<&CampaignRecord>)> = Vec::new();
    for record in records {
        let benchmark = record.fault.benchmark.clone();
        let location = record.fault.target.location.class_name().to_string();
        match groups
            .iter_mut()
            .find(|(b, l, _)| *b == benchmark && *l == location)
        {
            Some((_, _, bucket)) => bucket.push(record),
            None => groups.push((benchmark, location, vec![record])),
        }
    }

    let mut rows = Vec::new();
    for (benchmark, location, bucket) in groups {
        let total = bucket.len() as u64;
        let count =
            |class: OutcomeClass| bucket.iter().filter(|r| r.outcome == class).count() as u64;
        let counts = [
            count(OutcomeClass::Benign),
            count(OutcomeClass::Sdc),
            count(OutcomeClass::Other),
        ];
        let pcts = percentages_tenths(&counts, total);
        let cycles_of = |class: OutcomeClass| -> Option<CycleStats> {
            let cycles: Vec<f64> = bucket
                .iter()
                .filter(|r| r.outcome == class)
                .filter_map(|r| r.repetitions.first().map(|rep| rep.cycles as f64))
                .collect();
            if cycles.is_empty() {
                return None;
            }
            let mu = mean(&cycles);
            Some(CycleStats {
                mean: mu,
                std: pop_std(&cycles, mu),
            })
        };
        rows.push(BreakdownRow {
            benchmark,
            location,
            total,
            benign_pct: pcts[0],
            sdc_pct: pcts[1],
            other_pct: pcts[2],
            benign_cycles: cycles_of(OutcomeClass::Benign),
            sdc_cycles: cycles_of(OutcomeClass::Sdc),
        });
    }
    Ok(BreakdownReport { rows })
}

/// Largest-remainder rounding to tenths of a percent; the parts sum to
/// exactly 100.0.
fn percentages_tenths(counts: &[u64; 3], total: u64) -> [f64; 3] {
    debug_assert!(total > 0);
    let mut tenths = [0u64; 3];
    let mut remainders = [0u64; 3];
    for i in 0..3 {
        tenths[i] = counts[i] * 1000 / total;
        remainders[i] = counts[i] * 1000 % total;
    }
    let mut leftover = 1000 - tenths.iter().sum::<u64>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    for &i in &order {
        if leftover == 0 {
            break;
        }
        if remainders[i] > 0 {
            tenths[i] += 1;
            leftover -= 1;
        }
    }
    [
        tenths[0] as f64 / 10.0,
        tenths[1] as f64 / 10.0,
        tenths[2] as f64 / 10.0,
    ]
}

// ---------------------------------------------------------------------------
// CSV outputs
// ---------------------------------------------------------------------------

/// Everything `analyze` writes, as in-memory CSV text.
#[derive(Debug, Clone)]
pub struct AnalysisOutputs {
    pub pca_scatter: String,
    pub cycles_hist: String,
    pub breakdown: String,
    pub warnings: Vec<String>,
}

pub const DEFAULT_HIST_BINS: usize = 20;

/// The full pipeline over raw records: breakdown, then (when at least
/// two Benign/SDC rows carry complete vectors) z-norm, Gaussianize,
/// 2-component PCA scatter, and the shared-bin cycle histogram.
pub fn analyze_records(
    records: &[CampaignRecord],
    hist_bins: usize,
) -> Result<AnalysisOutputs, AnalysisError> {
    let breakdown_report = summarize(records)?;
    let breakdown = breakdown_csv(&breakdown_report);
    let mut warnings = Vec::new();

    let features = feature_matrix(records);
    let mut pca_scatter = String::from("fault_id,outcome,pc1,pc2\n");
    let mut cycles_hist = String::from("bin_lo,bin_hi,count_benign,count_sdc\n");

    if features.matrix.rows() < 2 {
        warnings.push(format!(
            "only {} Benign/SDC record(s) with complete event vectors; scatter and histogram are empty",
            features.matrix.rows()
        ));
        return Ok(AnalysisOutputs {
            pca_scatter,
            cycles_hist,
            breakdown,
            warnings,
        });
    }

    let znormed = z_normalize(&features.matrix)?;
    for c in &znormed.constant_columns {
        warnings.push(format!(
            "constant feature column {} ({})",
            c, features.columns[*c]
        ));
    }
    let gaussianized = gaussianize(&znormed.matrix)?;

    // scatter over the first two components; degrade gracefully when the
    // covariance cannot support two
    let k = 2;
    let (p, k) = match pca(&gaussianized, k) {
        Ok(p) => (p, 2),
        Err(AnalysisError::DegenerateCovariance { rank, .. }) => {
            // identical rows project to a single dot at the origin
            warnings.push(format!(
                "covariance rank {rank} < 2; scatter uses {rank} component(s)"
            ));
            (pca(&gaussianized, rank).expect("rank components"), rank)
        }
        Err(e) => return Err(e),
    };
    for r in 0..gaussianized.rows() {
        let pc1 = if k >= 1 { p.projections.get(r, 0) } else { 0.0 };
        let pc2 = if k >= 2 { p.projections.get(r, 1) } else { 0.0 };
        pca_scatter.push_str(&format!(
            "{},{},{pc1},{pc2}\n",
            features.fault_ids[r],
            match features.labels[r] {
                OutcomeClass::Benign => "benign",
                OutcomeClass::Sdc => "sdc",
                OutcomeClass::Other => unreachable!("filtered"),
            }
        ));
    }

    // cycle histogram over the preprocessed CYCLES feature, shared bins
    let cycles_col = EventKind::Cycles as usize;
    let all_cycles = gaussianized.column(cycles_col);
    let hist = histogram(&all_cycles, hist_bins)?;
    let class_values = |class: OutcomeClass| -> Vec<f64> {
        (0..gaussianized.rows())
            .filter(|&r| features.labels[r] == class)
            .map(|r| gaussianized.get(r, cycles_col))
            .collect()
    };
    let benign_counts = bin_into(&class_values(OutcomeClass::Benign), &hist.edges);
    let sdc_counts = bin_into(&class_values(OutcomeClass::Sdc), &hist.edges);
    for b in 0..hist.counts.len() {
        cycles_hist.push_str(&format!(
            "{},{},{},{}\n",
            hist.edges[b],
            hist.edges[b + 1],
            benign_counts[b],
            sdc_counts[b]
        ));
    }

    Ok(AnalysisOutputs {
        pca_scatter,
        cycles_hist,
        breakdown,
        warnings,
    })
}

pub fn breakdown_csv(report: &BreakdownReport) -> String {
    let mut out = String::from("benchmark,location,benign_pct,sdc_pct,other_pct\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{:.1},{:.1},{:.1}\n",
            row.benchmark, row.location, row.benign_pct, row.sdc_pct, row.other_pct
        ));
    }
    out
}
