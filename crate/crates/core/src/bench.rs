//! Simulation harness: replicate runner, rmse tables and convergence plots.
//!
//! Every replicate of a `(case, level)` pair draws one dataset from seed
//! `derive_seed(master, [case_key(id), level, replicate])` and runs every
//! configured method on it. Each method is run once per grid value (η for
//! PGD, λ for the convex estimators) and produces one [`ResultRow`]. Tables
//! report, per case, level and method, the grid value with the smallest mean
//! rmse.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{lambda_scale, log_grid, ConvexSolver, RegularizerKind, RegularizerSpec, MAX_DIRECT_LEN};
use crate::datagen::{derive_seed, CaseSpec, SnrLevel};
use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::pgd::{pgd_solve, PgdConfig, RunTrace, Termination};
use crate::projection::ConstraintSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pgd")]
    Pgd,
    #[serde(rename = "convex-r1")]
    ConvexR1,
    #[serde(rename = "convex-r2")]
    ConvexR2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pgd => "pgd",
            Method::ConvexR1 => "convex-r1",
            Method::ConvexR2 => "convex-r2",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgd" => Ok(Method::Pgd),
            "convex-r1" | "r1" => Ok(Method::ConvexR1),
            "convex-r2" | "r2" => Ok(Method::ConvexR2),
            _ => Err(Error::Argument(format!("unknown method {:?}", s))),
        }
    }
}

fn default_replicates() -> usize {
    50
}

fn default_methods() -> Vec<Method> {
    vec![Method::Pgd]
}

fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-3, 1e1, 20, 1.0)
}

fn default_output() -> PathBuf {
    PathBuf::from("bench-out")
}

fn default_convex_iters() -> usize {
    300
}

/// Benchmark settings, usually read from TOML.
///
/// ```toml
/// cases = ["7a"]
/// levels = ["high"]            # empty or absent: every level of the case
/// methods = ["pgd", "convex-r2"]
/// replicates = 50
/// seed = 1
/// eta_grid = [0.5]             # empty or absent: the case default
/// lambda_grid = [0.1, 1.0]     # multiples of the data-driven λ scale
/// rank = 5                     # PGD projection rank r′ (default: true rank)
/// sparsity = 5                 # PGD slice budget s′ (default: true sparsity)
/// output_dir = "bench-out"
/// threads = 0                  # 0: one worker per core
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub cases: Vec<String>,
    #[serde(default)]
    pub levels: Vec<SnrLevel>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub eta_grid: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub sparsity: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub pgd_max_iters: Option<usize>,
    #[serde(default = "default_convex_iters")]
    pub convex_max_iters: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
    /// Allow the large `d = 50` / `d = 20` cases.
    #[serde(default)]
    pub heavy: bool,
}

impl BenchConfig {
    pub fn new(cases: Vec<String>) -> Self {
        Self {
            cases,
            levels: Vec::new(),
            methods: default_methods(),
            eta_grid: Vec::new(),
            lambda_grid: default_lambda_grid(),
            replicates: default_replicates(),
            rank: None,
            sparsity: None,
            n: None,
            pgd_max_iters: None,
            convex_max_iters: default_convex_iters(),
            output_dir: default_output(),
            threads: 0,
            seed: 0,
            heavy: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Argument(format!("bad config: {}", e)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Argument("no cases configured".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Argument("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Argument("no methods configured".into()));
        }
        let convex = self.methods.iter().any(|m| *m != Method::Pgd);
        if convex && self.lambda_grid.is_empty() {
            return Err(Error::Argument("convex methods need a non-empty lambda grid".into()));
        }
        if let Some(bad) = self
            .eta_grid
            .iter()
            .chain(&self.lambda_grid)
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Argument(format!("grid value {} is not a finite nonnegative number", bad)));
        }
        for id in &self.cases {
            let available = CaseSpec::levels(id)?;
            if let Some(level) = self.levels.iter().find(|l| !available.contains(l)) {
                if self.levels.len() == 1 {
                    return Err(Error::Argument(format!("case {} has no {} setting", id, level.name())));
                }
            }
            if CaseSpec::is_heavy(id)? && !self.heavy {
                return Err(Error::Argument(format!("case {} is large; enable heavy cases to run it", id)));
            }
        }
        Ok(())
    }

    /// Levels run for `id`: the configured ones the case defines, or all.
    fn levels_for(&self, id: &str) -> Result<Vec<SnrLevel>> {
        let available = CaseSpec::levels(id)?;
        if self.levels.is_empty() {
            return Ok(available);
        }
        Ok(self.levels.iter().copied().filter(|l| available.contains(l)).collect())
    }

    fn case(&self, id: &str, level: SnrLevel) -> Result<CaseSpec> {
        let case = CaseSpec::lookup(id, level)?;
        Ok(match self.n {
            Some(n) => case.with_n(n),
            None => case,
        })
    }

    /// PGD projection with the configured `(r′, s′)` overrides.
    pub fn projection(&self, case: &CaseSpec) -> ConstraintSpec {
        match case.structure.constraint() {
            ConstraintSpec::Theta2 { r, s } => ConstraintSpec::Theta2 {
                r: self.rank.unwrap_or(r),
                s: self.sparsity.unwrap_or(s),
            },
            ConstraintSpec::Theta3 { r } => ConstraintSpec::Theta3 { r: self.rank.unwrap_or(r) },
            ConstraintSpec::Theta1 { r } => ConstraintSpec::Theta1 { r: self.rank.unwrap_or(r) },
        }
    }
}

/// One solver run on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: String,
    pub method: Method,
    pub snr_level: SnrLevel,
    pub replicate: usize,
    /// η for PGD; for the convex methods the λ multiple of `lambda_scale`.
    pub param: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub status: Termination,
}

/// Stable 64-bit key of a case id (FNV-1a).
pub fn case_key(id: &str) -> u64 {
    id.to_ascii_lowercase()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of one replicate; independent of execution order.
pub fn replicate_seed(master: u64, id: &str, level: SnrLevel, replicate: usize) -> u64 {
    derive_seed(master, &[case_key(id), level.index() as u64, replicate as u64])
}

/// Appends result rows to a CSV file, writing the header once.
pub struct RowWriter {
    out: csv::Writer<File>,
}

impl RowWriter {
    /// Truncates `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)?;
        Ok(Self {
            out: csv::WriterBuilder::new().has_headers(true).from_writer(file),
        })
    }

    /// Opens `path` for appending; the header is written only if the file
    /// is empty.
    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let empty = file.metadata()?.len() == 0;
        Ok(Self {
            out: csv::WriterBuilder::new().has_headers(empty).from_writer(file),
        })
    }

    pub fn write(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.out.serialize(row)?;
        }
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn row(case: &CaseSpec, method: Method, replicate: usize, param: f64, trace: &RunTrace) -> ResultRow {
    ResultRow {
        case: case.id.clone(),
        method,
        snr_level: case.snr,
        replicate,
        param,
        rmse: trace.final_rmse().unwrap_or(f64::NAN),
        iterations: trace.iterations(),
        seconds: trace.seconds(),
        status: trace.termination,
    }
}

fn run_pgd(cfg: &BenchConfig, case: &CaseSpec, data: &Dataset, replicate: usize) -> Result<Vec<ResultRow>> {
    let etas = if cfg.eta_grid.is_empty() { vec![case.eta] } else { cfg.eta_grid.clone() };
    let projection = cfg.projection(case);
    let mut rows = Vec::with_capacity(etas.len());
    for eta in etas {
        let pgd = PgdConfig::new(projection, eta).max_iters(cfg.pgd_max_iters.unwrap_or(case.max_iters));
        let trace = match pgd_solve(data, &pgd) {
            Ok(trace) => trace,
            Err(Error::Diverged { trace, iteration, .. }) => {
                log::warn!(
                    "case {} {} replicate {}: PGD diverged at iteration {} with eta {}",
                    case.id,
                    case.snr.name(),
                    replicate,
                    iteration,
                    eta
                );
                *trace
            }
            Err(e) => return Err(e),
        };
        rows.push(row(case, Method::Pgd, replicate, eta, &trace));
    }
    Ok(rows)
}

fn run_convex(
    cfg: &BenchConfig,
    case: &CaseSpec,
    data: &Dataset,
    replicate: usize,
    method: Method,
) -> Result<Vec<ResultRow>> {
    let kind = match method {
        Method::ConvexR1 => RegularizerKind::R1,
        Method::ConvexR2 => RegularizerKind::R2,
        Method::Pgd => unreachable!("not a convex method"),
    };
    if kind == RegularizerKind::R2 && data.design().ncols() > MAX_DIRECT_LEN {
        log::warn!("case {}: skipping {} (coefficient too large)", case.id, method.name());
        return Ok(Vec::new());
    }
    let scale = lambda_scale(data);
    let mut grid: Vec<f64> = cfg.lambda_grid.clone();
    grid.sort_by(|a, b| b.total_cmp(a));
    let base = RegularizerSpec::new(kind, 0.0).max_iters(cfg.convex_max_iters);
    let mut solver = ConvexSolver::new(data);
    let mut rows = Vec::with_capacity(grid.len());
    for multiple in grid {
        let trace = solver.solve(&base.with_lambda(multiple * scale))?;
        rows.push(row(case, method, replicate, multiple, &trace));
    }
    rows.reverse();
    Ok(rows)
}

/// All method runs on one replicate.
pub fn run_replicate(cfg: &BenchConfig, case: &CaseSpec, replicate: usize) -> Result<Vec<ResultRow>> {
    let seed = replicate_seed(cfg.seed, &case.id, case.snr, replicate);
    let data = case.generate(seed)?;
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        rows.extend(match method {
            Method::Pgd => run_pgd(cfg, case, &data, replicate)?,
            _ => run_convex(cfg, case, &data, replicate, method)?,
        });
    }
    Ok(rows)
}

/// Runs every configured level and replicate of case `id`. Replicates are
/// processed in parallel, in chunks whose rows are appended to `writer` in
/// replicate order once the chunk completes.
pub fn run_case(cfg: &BenchConfig, id: &str, mut writer: Option<&mut RowWriter>) -> Result<Vec<ResultRow>> {
    let mut all = Vec::new();
    let chunk = rayon::current_num_threads().max(1);
    for level in cfg.levels_for(id)? {
        let case = cfg.case(id, level)?;
        let mut start = 0;
        while start < cfg.replicates {
            let end = (start + chunk).min(cfg.replicates);
            let rows: Vec<ResultRow> = (start..end)
                .into_par_iter()
                .map(|rep| run_replicate(cfg, &case, rep))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            if let Some(w) = writer.as_deref_mut() {
                w.write(&rows)?;
            }
            all.extend(rows);
            start = end;
        }
        log::info!("case {} {} done", id, level.name());
    }
    Ok(all)
}

/// Result of a full benchmark run.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<ResultRow>,
    pub table: Vec<TableCell>,
    pub diverged: usize,
}

/// Runs all configured cases and writes `results.csv`, `table.csv` and
/// `table.txt` into the output directory.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut writer = RowWriter::create(&cfg.output_dir.join("results.csv"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {}", e)))?;
    let mut rows = Vec::new();
    for id in &cfg.cases {
        rows.extend(pool.install(|| run_case(cfg, id, Some(&mut writer)))?);
    }
    let table = aggregate(&rows);
    write_table_csv(&table, File::create(cfg.output_dir.join("table.csv"))?)?;
    fs::write(cfg.output_dir.join("table.txt"), format_table(&table))?;
    let diverged = rows.iter().filter(|r| r.status == Termination::Diverged).count();
    Ok(BenchOutcome { rows, table, diverged })
}

/// Mean and standard deviation of one table entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub case: String,
    pub snr_level: SnrLevel,
    pub method: Method,
    /// Selected η or λ multiple.
    pub param: f64,
    pub replicates: usize,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by case, level and method and keeps, for each group, the
/// grid value with the smallest mean rmse. Groups with a diverged run are
/// never selected unless nothing else is available.
pub fn aggregate(rows: &[ResultRow]) -> Vec<TableCell> {
    type Key = (String, SnrLevel, Method);
    let mut groups: BTreeMap<Key, Vec<(f64, &ResultRow)>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.case.clone(), r.snr_level, r.method))
            .or_default()
            .push((r.param, r));
    }
    let mut cells = Vec::new();
    for ((case, snr_level, method), members) in groups {
        let mut params: Vec<f64> = members.iter().map(|(p, _)| *p).collect();
        params.sort_by(f64::total_cmp);
        params.dedup();
        let mut best: Option<TableCell> = None;
        let mut best_bad = true;
        for p in params {
            let chosen: Vec<&ResultRow> = members.iter().filter(|(q, _)| *q == p).map(|(_, r)| *r).collect();
            let bad = chosen
                .iter()
                .any(|r| r.status == Termination::Diverged || !r.rmse.is_finite());
            let values: Vec<f64> = chosen.iter().map(|r| r.rmse).collect();
            let (mean, sd) = mean_sd(&values);
            let better = match &best {
                None => true,
                Some(b) => (best_bad && !bad) || (bad == best_bad && mean < b.mean_rmse),
            };
            if better {
                best_bad = bad;
                best = Some(TableCell {
                    case: case.clone(),
                    snr_level,
                    method,
                    param: p,
                    replicates: values.len(),
                    mean_rmse: mean,
                    sd_rmse: sd,
                });
            }
        }
        cells.extend(best);
    }
    cells
}

pub fn write_table_csv<W: Write>(cells: &[TableCell], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if cells.is_empty() {
        out.write_record(["case", "snr_level", "method", "param", "replicates", "mean_rmse", "sd_rmse"])?;
    }
    for c in cells {
        out.serialize(c)?;
    }
    out.flush()?;
    Ok(())
}

/// Plain-text table with one line per case and level and a `mean (sd)`
/// column per method.
pub fn format_table(cells: &[TableCell]) -> String {
    let mut methods: Vec<Method> = cells.iter().map(|c| c.method).collect();
    methods.sort();
    methods.dedup();
    let mut lines: BTreeMap<(String, SnrLevel), BTreeMap<Method, String>> = BTreeMap::new();
    for c in cells {
        lines
            .entry((c.case.clone(), c.snr_level))
            .or_default()
            .insert(c.method, format!("{:.2} ({:.2})", c.mean_rmse, c.sd_rmse));
    }
    let mut out = format!("{:<6} {:<9}", "case", "snr");
    for m in &methods {
        out.push_str(&format!(" {:>14}", m.name()));
    }
    out.push('\n');
    for ((case, level), entries) in lines {
        out.push_str(&format!("{:<6} {:<9}", case, level.name()));
        for m in &methods {
            out.push_str(&format!(" {:>14}", entries.get(m).map_or("-", String::as_str)));
        }
        out.push('\n');
    }
    out
}

/// Aggregates `rows` and writes the table CSV; returns the formatted table.
pub fn emit_table<W: Write>(rows: &[ResultRow], csv_out: W) -> Result<String> {
    if rows.is_empty() {
        log::warn!("no result rows to tabulate");
    }
    let cells = aggregate(rows);
    write_table_csv(&cells, csv_out)?;
    Ok(format_table(&cells))
}

/// A labeled trace for plotting.
#[derive(Debug, Clone)]
pub struct LabeledTrace {
    pub label: String,
    pub trace: RunTrace,
}

/// Writes `label,iter,objective,rmse,seconds` rows for every trace.
pub fn write_traces_csv<W: Write>(traces: &[LabeledTrace], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label", "iter", "objective", "rmse", "seconds"])?;
    for t in traces {
        for r in &t.trace.records {
            out.write_record([
                t.label.clone(),
                r.iter.to_string(),
                r.objective.to_string(),
                r.rmse.map(|x| x.to_string()).unwrap_or_default(),
                r.seconds.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Draws one curve per trace (rmse against iteration, or the objective when
/// some trace has no rmse) to an SVG file and writes the data next to it as
/// CSV with the same stem.
pub fn emit_convergence_plot(traces: &[LabeledTrace], svg_path: &Path) -> Result<()> {
    use plotters::prelude::*;

    write_traces_csv(traces, File::create(svg_path.with_extension("csv"))?)?;

    let use_rmse = traces
        .iter()
        .all(|t| t.trace.records.iter().all(|r| r.rmse.is_some()));
    let value = |r: &crate::pgd::IterRecord| if use_rmse { r.rmse.unwrap_or(f64::NAN) } else { r.objective };
    let points: Vec<Vec<(f64, f64)>> = traces
        .iter()
        .map(|t| {
            t.trace
                .records
                .iter()
                .map(|r| (r.iter as f64, value(r)))
                .filter(|p| p.1.is_finite())
                .collect()
        })
        .collect();
    let max_x = points.iter().flatten().map(|p| p.0).fold(1.0, f64::max);
    let (lo, hi) = points
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), hi.max(lo + 1e-12)) } else { (0.0, 1.0) };

    let plot_err = |e: String| Error::Io(std::io::Error::other(e));
    let root = SVGBackend::new(svg_path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..max_x, lo..hi * 1.05)
        .map_err(|e| plot_err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("iteration")
        .y_desc(if use_rmse { "rmse" } else { "objective" })
        .draw()
        .map_err(|e| plot_err(e.to_string()))?;
    for (i, (t, pts)) in traces.iter().zip(points).enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| plot_err(e.to_string()))?
            .label(t.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(|e| plot_err(e.to_string()))?;
    root.present().map_err(|e| plot_err(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(case: &str, method: Method, param: f64, rmse: f64, rep: usize) -> ResultRow {
        ResultRow {
            case: case.into(),
            method,
            snr_level: SnrLevel::High,
            replicate: rep,
            param,
            rmse,
            iterations: 10,
            seconds: 0.5,
            status: Termination::Converged,
        }
    }

    #[test]
    fn aggregate_hand_oracle() {
        let rows = vec![
            fixture("6a", Method::Pgd, 0.5, 0.10, 0),
            fixture("6a", Method::Pgd, 0.5, 0.12, 1),
            fixture("6a", Method::Pgd, 0.5, 0.14, 2),
        ];
        let cells = aggregate(&rows);
        assert_eq!(cells.len(), 1);
        assert!((cells[0].mean_rmse - 0.12).abs() < 1e-15);
        assert!((cells[0].sd_rmse - 0.02).abs() < 1e-15);
    }

    #[test]
    fn single_row_has_zero_sd() {
        let cells = aggregate(&[fixture("7a", Method::Pgd, 0.5, 0.3, 0)]);
        assert_eq!((cells[0].mean_rmse, cells[0].sd_rmse), (0.3, 0.0));
    }

    #[test]
    fn best_param_is_selected() {
        let rows = vec![
            fixture("8a", Method::ConvexR1, 0.1, 0.4, 0),
            fixture("8a", Method::ConvexR1, 1.0, 0.2, 0),
            fixture("8a", Method::ConvexR1, 10.0, 0.9, 0),
        ];
        let cells = aggregate(&rows);
        assert_eq!(cells[0].param, 1.0);
    }

    #[test]
    fn diverged_params_lose() {
        let mut bad = fixture("6a", Method::Pgd, 2.0, 0.01, 0);
        bad.status = Termination::Diverged;
        let cells = aggregate(&[bad, fixture("6a", Method::Pgd, 0.5, 0.2, 0)]);
        assert_eq!(cells[0].param, 0.5);
    }

    #[test]
    fn empty_table() {
        let mut buf = Vec::new();
        let text = emit_table(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = BenchConfig::from_toml("cases = [\"6a\"]\n").unwrap();
        assert_eq!(cfg.replicates, 50);
        assert_eq!(cfg.methods, vec![Method::Pgd]);
        assert_eq!(cfg.lambda_grid.len(), 20);
        cfg.validate().unwrap();
        assert!(BenchConfig::from_toml("cases = [\"6a\"]\nbogus = 1\n").is_err());
        let mut bad = cfg.clone();
        bad.replicates = 0;
        assert!(bad.validate().is_err());
        assert!(BenchConfig::new(vec!["1a".into()]).validate().is_err());
        assert!(BenchConfig::new(vec!["zz".into()]).validate().is_err());
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let a = replicate_seed(1, "6a", SnrLevel::High, 0);
        assert_ne!(a, replicate_seed(1, "6a", SnrLevel::High, 1));
        assert_ne!(a, replicate_seed(1, "6a", SnrLevel::Low, 0));
        assert_ne!(a, replicate_seed(1, "7a", SnrLevel::High, 0));
        assert_eq!(a, replicate_seed(1, "6A", SnrLevel::High, 0));
    }
}
