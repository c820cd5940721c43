//! Randomized benchmark: MAIN (`anisotropic_norm`) against GRID
//! (`grid_oracle_norm`) over a sweep of model sizes and anisotropy levels.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::anisotropy::{anisotropic_norm, AnisoQuery};
use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::verify::grid_oracle_norm;

pub const CSV_HEADER: [&str; 11] = [
    "n",
    "m",
    "p",
    "seed",
    "a",
    "algo",
    "gamma",
    "q_star",
    "evaluations",
    "cpu_ms",
    "status",
];

/// 27 levels on `[0, 20]`, dense near zero.
pub const DEFAULT_A_LIST: [f64; 27] = [
    0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0, 8.0, 9.0,
    10.0, 11.0, 12.0, 14.0, 16.0, 18.0, 20.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Algo {
    #[serde(rename = "MAIN")]
    Main,
    #[serde(rename = "GRID")]
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RunStatus {
    #[serde(rename = "SUCCESS")]
    Success,
    #[serde(rename = "INFEASIBLE")]
    Infeasible,
    #[serde(rename = "NUMERICAL")]
    Numerical,
    #[serde(rename = "MAXITER")]
    MaxIter,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Main => "MAIN",
            Algo::Grid => "GRID",
        }
    }
}

impl RunStatus {
    pub const ALL: [RunStatus; 4] = [
        RunStatus::Success,
        RunStatus::Infeasible,
        RunStatus::Numerical,
        RunStatus::MaxIter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Success => "SUCCESS",
            RunStatus::Infeasible => "INFEASIBLE",
            RunStatus::Numerical => "NUMERICAL",
            RunStatus::MaxIter => "MAXITER",
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Unstable(_) | Error::NoStabilizingSolution { .. } | Error::BracketFailure(_) => {
                RunStatus::Infeasible
            }
            Error::MaxIterationsExceeded(_) | Error::ToleranceNotReached { .. } => RunStatus::MaxIter,
            _ => RunStatus::Numerical,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MAIN" => Ok(Algo::Main),
            "GRID" => Ok(Algo::Grid),
            _ => Err(Error::Schema(format!("unknown algo {s:?}"))),
        }
    }
}

impl FromStr for RunStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RunStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown status {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub seed: u64,
    pub a: f64,
    pub algo: Algo,
    pub gamma: Option<f64>,
    pub q_star: Option<f64>,
    pub evaluations: usize,
    pub cpu_ms: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_range: RangeInclusive<usize>,
    pub m_list: Vec<usize>,
    pub p: usize,
    pub trials: usize,
    pub a_list: Vec<f64>,
    pub master_seed: u64,
    pub rho_cap: f64,
    pub tolerance: f64,
    /// q-grid size of the GRID runs.
    pub grid_size: usize,
    pub out_path: Option<PathBuf>,
    /// Worker threads; `None` reads `ANINORM_THREADS`, then uses all cores.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_range: 1..=8,
            m_list: vec![3, 5],
            p: 2,
            trials: 10,
            a_list: DEFAULT_A_LIST.to_vec(),
            master_seed: 0,
            rho_cap: 0.999_999,
            tolerance: 1e-9,
            grid_size: 500,
            out_path: None,
            threads: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.n_range.is_empty() || *self.n_range.start() == 0 {
            return bad("n range must be non-empty and start at 1 or more");
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return bad("m list must be non-empty with positive entries");
        }
        if self.p == 0 || self.trials == 0 {
            return bad("p and trials must be positive");
        }
        if self.a_list.is_empty() || self.a_list.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("a list must be non-empty with finite non-negative entries");
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.rho_cap > 0.0 && self.rho_cap <= 1.0) {
            return bad("rho_cap must lie in (0, 1]");
        }
        if self.grid_size < 100 {
            return bad("grid size must be at least 100");
        }
        Ok(())
    }
}

/// splitmix64 finalizer over a few words.
fn mix(words: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for &w in words {
        let mut z = (h ^ w).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Model seed of one `(n, m, trial)` cell.
pub fn cell_seed(master_seed: u64, n: usize, m: usize, trial: usize) -> u64 {
    mix(&[master_seed, n as u64, m as u64, trial as u64])
}

fn thread_count(config: &BenchConfig) -> Option<usize> {
    config.threads.or_else(|| {
        std::env::var("ANINORM_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&t: &usize| t > 0)
    })
}

fn timed<T>(run: impl FnOnce() -> Result<T>) -> (std::result::Result<T, RunStatus>, f64) {
    let start = Instant::now();
    let out = panic::catch_unwind(AssertUnwindSafe(run));
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let out = match out {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(RunStatus::from_error(&e)),
        Err(_) => Err(RunStatus::Numerical),
    };
    (out, ms)
}

fn run_model(config: &BenchConfig, n: usize, m: usize, trial: usize) -> Vec<BenchRecord> {
    let seed = cell_seed(config.master_seed, n, m, trial);
    let model = StateSpaceModel::random_stable(n, m, config.p, seed, config.rho_cap);
    let mut out = Vec::with_capacity(2 * config.a_list.len());
    for &a in &config.a_list {
        let blank = BenchRecord {
            n,
            m,
            p: config.p,
            seed,
            a,
            algo: Algo::Main,
            gamma: None,
            q_star: None,
            evaluations: 0,
            cpu_ms: 0.0,
            status: RunStatus::Numerical,
        };
        let Ok(model) = &model else {
            out.push(blank.clone());
            out.push(BenchRecord {
                algo: Algo::Grid,
                ..blank
            });
            continue;
        };

        let (main, ms) =
            timed(|| anisotropic_norm(&AnisoQuery::new(model.clone(), a).with_tol(config.tolerance)));
        out.push(match main {
            Ok(r) if r.gamma.is_finite() => BenchRecord {
                gamma: Some(r.gamma),
                q_star: Some(r.q_star),
                evaluations: r.evaluations,
                cpu_ms: ms,
                status: RunStatus::Success,
                ..blank.clone()
            },
            Ok(_) => BenchRecord {
                cpu_ms: ms,
                ..blank.clone()
            },
            Err(status) => BenchRecord {
                cpu_ms: ms,
                status,
                ..blank.clone()
            },
        });

        let (grid, ms) = timed(|| grid_oracle_norm(model, a, config.grid_size));
        let blank = BenchRecord {
            algo: Algo::Grid,
            ..blank
        };
        out.push(match grid {
            Ok(r) if r.gamma.is_finite() => BenchRecord {
                gamma: Some(r.gamma),
                q_star: Some(r.q_star),
                evaluations: r.evaluations,
                cpu_ms: ms,
                status: RunStatus::Success,
                ..blank
            },
            Ok(_) => BenchRecord { cpu_ms: ms, ..blank },
            Err(status) => BenchRecord {
                cpu_ms: ms,
                status,
                ..blank
            },
        });
    }
    out
}

/// Runs every `(n, m, trial, a)` cell with both algorithms. Per-run failures
/// become status codes; only I/O errors abort. Records are sorted by
/// `(n, m, seed, a, algo)` and written to `out_path` if set.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let cells: Vec<(usize, usize, usize)> = config
        .n_range
        .clone()
        .flat_map(|n| {
            config
                .m_list
                .iter()
                .flat_map(move |&m| (0..config.trials).map(move |t| (n, m, t)))
        })
        .collect();
    let sweep = || -> Vec<BenchRecord> {
        cells
            .par_iter()
            .flat_map_iter(|&(n, m, t)| run_model(config, n, m, t))
            .collect()
    };
    let mut records = match thread_count(config) {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(sweep),
        None => sweep(),
    };
    records.sort_by(|x, y| {
        (x.n, x.m, x.seed)
            .cmp(&(y.n, y.m, y.seed))
            .then(x.a.total_cmp(&y.a))
            .then(x.algo.cmp(&y.algo))
    });
    if let Some(path) = &config.out_path {
        write_csv(&records, path)?;
    }
    Ok(records)
}

/// Decimal text with 12 significant digits.
pub fn format_number(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let mag = rounded.abs();
    if mag == 0.0 || (1e-4..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::from(io),
        other => Error::Schema(format!("{other:?}")),
    }
}

pub fn records_to_csv(records: &[BenchRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_records(&mut w, records)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

fn write_records<W: std::io::Write>(w: &mut csv::Writer<W>, records: &[BenchRecord]) -> Result<()> {
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            r.p.to_string(),
            r.seed.to_string(),
            format_number(r.a),
            r.algo.to_string(),
            opt(r.gamma),
            opt(r.q_star),
            r.evaluations.to_string(),
            format_number(r.cpu_ms),
            r.status.to_string(),
        ])
        .map_err(csv_error)?;
    }
    Ok(())
}

fn parse_field<T: FromStr>(row: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = row.get(idx).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Schema(format!("row {line}: bad {} value {raw:?}", CSV_HEADER[idx])))
}

fn parse_optional(row: &csv::StringRecord, idx: usize, line: usize) -> Result<Option<f64>> {
    if row.get(idx).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        parse_field(row, idx, line).map(Some)
    }
}

/// Parses CSV text written by [`write_csv`]; rejects any other header.
pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Schema(format!(
            "expected header {:?}, got {:?}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let line = i + 2;
        let rec = BenchRecord {
            n: parse_field(&row, 0, line)?,
            m: parse_field(&row, 1, line)?,
            p: parse_field(&row, 2, line)?,
            seed: parse_field(&row, 3, line)?,
            a: parse_field(&row, 4, line)?,
            algo: parse_field(&row, 5, line)?,
            gamma: parse_optional(&row, 6, line)?,
            q_star: parse_optional(&row, 7, line)?,
            evaluations: parse_field(&row, 8, line)?,
            cpu_ms: parse_field(&row, 9, line)?,
            status: parse_field(&row, 10, line)?,
        };
        if (rec.status == RunStatus::Success) != rec.gamma.is_some() {
            return Err(Error::Schema(format!(
                "row {line}: gamma must be present exactly on SUCCESS"
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AlgoStats {
    pub runs: usize,
    pub mean_cpu_ms: f64,
    pub success_pct: f64,
    pub infeasible_pct: f64,
    pub numerical_pct: f64,
    pub maxiter_pct: f64,
}

impl AlgoStats {
    fn from_records<'r>(records: impl Iterator<Item = &'r BenchRecord>) -> Self {
        let mut runs = 0;
        let mut cpu = 0.0;
        let mut counts = [0usize; 4];
        for r in records {
            runs += 1;
            cpu += r.cpu_ms;
            counts[RunStatus::ALL.iter().position(|s| *s == r.status).unwrap_or(2)] += 1;
        }
        if runs == 0 {
            return Self::default();
        }
        let pct = |c: usize| 100.0 * c as f64 / runs as f64;
        Self {
            runs,
            mean_cpu_ms: cpu / runs as f64,
            success_pct: pct(counts[0]),
            infeasible_pct: pct(counts[1]),
            numerical_pct: pct(counts[2]),
            maxiter_pct: pct(counts[3]),
        }
    }

    fn fields(&self) -> [String; 6] {
        [
            self.runs.to_string(),
            format_number(self.mean_cpu_ms),
            format_number(self.success_pct),
            format_number(self.infeasible_pct),
            format_number(self.numerical_pct),
            format_number(self.maxiter_pct),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SummaryKey {
    Size { n: usize, m: usize },
    Level { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub key: SummaryKey,
    pub main: AlgoStats,
    pub grid: AlgoStats,
}

/// One row per distinct `(n, m)`, then one per distinct `a`.
pub fn summarize_records(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let stats = |pick: &dyn Fn(&BenchRecord) -> bool| SummaryRow {
        key: SummaryKey::Level { a: 0.0 },
        main: AlgoStats::from_records(records.iter().filter(|r| r.algo == Algo::Main && pick(r))),
        grid: AlgoStats::from_records(records.iter().filter(|r| r.algo == Algo::Grid && pick(r))),
    };
    let sizes: BTreeMap<(usize, usize), ()> = records.iter().map(|r| ((r.n, r.m), ())).collect();
    let mut levels: Vec<f64> = records.iter().map(|r| r.a).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut rows = Vec::new();
    for &(n, m) in sizes.keys() {
        rows.push(SummaryRow {
            key: SummaryKey::Size { n, m },
            ..stats(&|r| r.n == n && r.m == m)
        });
    }
    for a in levels {
        rows.push(SummaryRow {
            key: SummaryKey::Level { a },
            ..stats(&|r| r.a == a)
        });
    }
    rows
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["kind".to_string(), "n".into(), "m".into(), "a".into()];
    for algo in ["main", "grid"] {
        for col in [
            "runs",
            "mean_cpu_ms",
            "success_pct",
            "infeasible_pct",
            "numerical_pct",
            "maxiter_pct",
        ] {
            header.push(format!("{algo}_{col}"));
        }
    }
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        let mut rec = match row.key {
            SummaryKey::Size { n, m } => {
                vec!["size".to_string(), n.to_string(), m.to_string(), String::new()]
            }
            SummaryKey::Level { a } => vec![
                "level".to_string(),
                String::new(),
                String::new(),
                format_number(a),
            ],
        };
        rec.extend(row.main.fields());
        rec.extend(row.grid.fields());
        w.write_record(&rec).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Reads a benchmark CSV and returns the summary as CSV text.
pub fn summarize(csv_path: impl AsRef<Path>) -> Result<String> {
    let text = std::fs::read_to_string(csv_path)?;
    summary_to_csv(&summarize_records(&parse_csv(&text)?))
}

/// Max over min of the per-level mean run time of `algo`.
pub fn time_spread(records: &[BenchRecord], algo: Algo) -> f64 {
    let rows = summarize_records(records);
    let means: Vec<f64> = rows
        .iter()
        .filter(|r| matches!(r.key, SummaryKey::Level { .. }))
        .map(|r| if algo == Algo::Main { r.main } else { r.grid })
        .filter(|s| s.runs > 0)
        .map(|s| s.mean_cpu_ms)
        .collect();
    let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}
