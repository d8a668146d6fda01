use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::engine::{run_closed_loop, sweep, EventClass, ModelSpec, SimResult, SweepRecord};
use crate::error::{Error, Result};
use crate::ingest::fmt_sig6;
use crate::kinematics::TraceSample;
use crate::risk::{density_curve, histogram, summarize_models, RunStats, SummaryRow};
use crate::safety_models::ModelKind;

pub const TRACE_COLUMNS: [&str; 12] = [
    "t", "ego_x", "ego_y", "ego_v", "cut_x", "cut_y", "cut_v", "gap_long", "gap_lat", "ttc", "safe", "decel_cmd",
];
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
const HISTOGRAM_BINS: usize = 30;
const DENSITY_POINTS: usize = 200;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceSample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", TRACE_COLUMNS.join(",")).map_err(io)?;
    for s in trace {
        let cols = [
            s.t_s,
            s.ego.pos_long_m,
            s.ego.pos_lat_m,
            s.ego.vel_long_mps,
            s.other.pos_long_m,
            s.other.pos_lat_m,
            s.other.vel_long_mps,
            s.gap_long_m,
            s.gap_lat_m,
            s.ttc_s,
        ]
        .map(fmt_sig6);
        writeln!(w, "{},{},{}", cols.join(","), u8::from(s.safe), fmt_sig6(s.decel_cmd_mps2)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Outcome of one closed-loop run. Infinite values are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub model: String,
    pub collided: bool,
    pub collision_time_s: Option<f64>,
    pub min_ttc_s: Option<f64>,
    pub min_gap_long_m: Option<f64>,
    pub peak_decel_mps2: f64,
    pub classification: EventClass,
    pub lane_change_advised: bool,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct OneCaseOutput {
    pub out_dir: PathBuf,
    pub result: SimResult,
    pub verdict: Verdict,
}

/// Runs the configured scenario once and writes `trace.csv` and
/// `verdict.json`. `model` overrides the configured model list, which
/// otherwise must name exactly one model.
pub fn cmd_one_case(cfg: &RunConfig, model: Option<&str>, out_dir: Option<&Path>) -> Result<OneCaseOutput> {
    let kind = match model {
        Some(name) => ModelKind::from_str(name)?,
        None => match cfg.model_kinds()?.as_slice() {
            [k] => *k,
            _ => return Err(Error::config("models", "one-case runs a single model; pass --model to choose one")),
        },
    };
    let params = cfg.params_for(kind, &cfg.scenario)?;
    let result = run_closed_loop(&cfg.scenario, &ModelSpec { kind, params }, &cfg.thresholds)?;
    let out_dir = out_dir.map_or_else(|| cfg.default_output_dir(), Path::to_path_buf);

    let verdict = Verdict {
        model: kind.name().to_string(),
        collided: result.collided,
        collision_time_s: result.collision_time_s,
        min_ttc_s: finite(result.min_ttc_s),
        min_gap_long_m: finite(result.min_gap_long_m),
        peak_decel_mps2: result.peak_decel_mps2,
        classification: result.classification,
        lane_change_advised: result.lane_change_advised,
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    write_trace_csv(out_dir.join("trace.csv"), &result.trace)?;
    write_json(&out_dir.join("verdict.json"), &verdict)?;
    Ok(OneCaseOutput { out_dir, result, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResultRow {
    grid_index: usize,
    v_e0: f64,
    v_o0: f64,
    d_x0: f64,
    d_y0: f64,
    collided: Option<u8>,
    collision_time: Option<f64>,
    min_ttc: Option<f64>,
    min_gap_long: Option<f64>,
    peak_decel: Option<f64>,
    classification: Option<EventClass>,
    error: Option<String>,
}

fn result_record(r: &SweepRecord) -> Vec<String> {
    let opt = |x: Option<f64>| x.map(fmt_sig6).unwrap_or_default();
    let mut rec = vec![
        r.grid_index.to_string(),
        fmt_sig6(r.scenario.v_e0),
        fmt_sig6(r.scenario.v_o0),
        fmt_sig6(r.scenario.d_x0),
        fmt_sig6(r.scenario.d_y0),
    ];
    match &r.outcome {
        Ok(s) => rec.extend([
            u8::from(s.collided).to_string(),
            opt(s.collision_time_s),
            fmt_sig6(s.min_ttc_s),
            fmt_sig6(s.min_gap_long_m),
            fmt_sig6(s.peak_decel_mps2),
            s.classification.name().to_string(),
            String::new(),
        ]),
        Err(e) => {
            rec.extend(std::iter::repeat_n(String::new(), 6));
            rec.push(e.clone());
        }
    }
    rec
}

const RESULT_COLUMNS: [&str; 12] = [
    "grid_index",
    "v_e0",
    "v_o0",
    "d_x0",
    "d_y0",
    "collided",
    "collision_time",
    "min_ttc",
    "min_gap_long",
    "peak_decel",
    "classification",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub model: String,
    pub path: String,
    pub rows: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub grid_points: usize,
    pub files: Vec<ManifestFile>,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct ComparisonOutput {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Sweeps the configured grid with every configured model and writes one
/// `results_<model>.csv` per model plus `manifest.json`. Failed grid points
/// become rows with an `error` message.
pub fn cmd_comparison(cfg: &RunConfig, out_dir: Option<&Path>, jobs: Option<usize>) -> Result<ComparisonOutput> {
    if cfg.sweep.is_empty() {
        return Err(Error::config("sweep", "comparison needs at least one non-empty sweep axis"));
    }
    let kinds = cfg.model_kinds()?;
    let grid = cfg.grid();
    let params_for = |kind, sc: &_| cfg.params_for(kind, sc);
    let records = sweep(&grid, &kinds, &params_for, &cfg.thresholds, jobs)?;
    let out_dir = out_dir.map_or_else(|| cfg.default_output_dir(), Path::to_path_buf);
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut files = Vec::new();
    for kind in &kinds {
        let name = format!("results_{}.csv", kind.name());
        let path = out_dir.join(&name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(RESULT_COLUMNS)?;
        let mut rows = 0;
        let mut errors = 0;
        for r in records.iter().filter(|r| r.model == *kind) {
            w.write_record(result_record(r))?;
            rows += 1;
            errors += usize::from(r.outcome.is_err());
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        files.push(ManifestFile {
            model: kind.name().to_string(),
            path: name,
            rows,
            errors,
        });
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        grid_points: grid.points().len(),
        files,
        config: cfg.clone(),
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(ComparisonOutput { out_dir, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub model: String,
    pub mean_ttc: Option<f64>,
    pub std_ttc: Option<f64>,
    pub prob_below: Option<f64>,
    pub critical_fraction: f64,
    pub n: usize,
    pub n_excluded: usize,
    pub n_error_rows: usize,
    pub unavailable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ttc_crit_s: f64,
    pub config_hash: String,
    pub histogram_range: Option<(f64, f64)>,
    pub models: Vec<SummaryEntry>,
}

#[derive(Debug, Clone)]
pub struct PostProcessOutput {
    pub summary: Summary,
    pub rows: Vec<SummaryRow>,
    /// Files written, relative to the results directory.
    pub files: Vec<String>,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn read_min_ttcs(path: &Path) -> Result<(Vec<RunStats>, usize)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut runs = Vec::new();
    let mut errors = 0;
    for row in rdr.deserialize::<ResultRow>() {
        let row = row?;
        match (row.error, row.min_ttc, row.classification) {
            (Some(_), _, _) => errors += 1,
            (None, Some(min_ttc_s), Some(c)) => runs.push(RunStats {
                min_ttc_s,
                critical: c == EventClass::Critical,
            }),
            _ => return Err(Error::Schema(format!("{}: row {} lacks results", path.display(), row.grid_index))),
        }
    }
    Ok((runs, errors))
}

fn write_xy(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Summarizes a comparison run in `results_dir`: per-model Gaussian fit of
/// the minimum TTCs, a 30-bin histogram over the range pooled across
/// models, and the fitted density at 200 points over `mean +- 6 std`.
pub fn cmd_post_process(results_dir: &Path, ttc_crit_s: Option<f64>) -> Result<PostProcessOutput> {
    let manifest = read_manifest(results_dir)?;
    let ttc_crit_s = ttc_crit_s.unwrap_or(manifest.config.thresholds.ttc_critical_s);
    if !(ttc_crit_s.is_finite() && ttc_crit_s > 0.0) {
        return Err(Error::config("ttc_crit", format!("must be > 0, got {ttc_crit_s}")));
    }

    let mut per_model = BTreeMap::new();
    let mut error_rows = BTreeMap::new();
    for f in &manifest.files {
        let (runs, errors) = read_min_ttcs(&results_dir.join(&f.path))?;
        per_model.insert(f.model.clone(), runs);
        error_rows.insert(f.model.clone(), errors);
    }
    let rows = summarize_models(&per_model, ttc_crit_s);

    let pooled: Vec<f64> = per_model.values().flatten().map(|r| r.min_ttc_s).filter(|x| x.is_finite()).collect();
    let range = pooled.iter().copied().fold(None, |acc: Option<(f64, f64)>, x| {
        Some(acc.map_or((x, x), |(lo, hi)| (lo.min(x), hi.max(x))))
    });
    let range = range.map(|(lo, hi)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) });

    let mut files = Vec::new();
    for row in &rows {
        if let Some((lo, hi)) = range {
            let values: Vec<f64> = per_model[&row.model].iter().map(|r| r.min_ttc_s).collect();
            let name = format!("hist_{}.csv", row.model);
            let bins = histogram(&values, lo, hi, HISTOGRAM_BINS);
            write_xy(
                &results_dir.join(&name),
                "bin_left,bin_right,count",
                bins.iter().map(|b| format!("{},{},{}", fmt_sig6(b.left), fmt_sig6(b.right), b.count)),
            )?;
            files.push(name);
        }
        if let Some(fit) = &row.risk {
            let name = format!("density_{}.csv", row.model);
            let curve = density_curve(fit.mean_s, fit.std_s, DENSITY_POINTS);
            write_xy(
                &results_dir.join(&name),
                "x,density",
                curve.iter().map(|(x, d)| format!("{},{}", fmt_sig6(*x), fmt_sig6(*d))),
            )?;
            files.push(name);
        }
    }

    let summary = Summary {
        ttc_crit_s,
        config_hash: manifest.config_hash.clone(),
        histogram_range: range,
        models: rows
            .iter()
            .map(|r| SummaryEntry {
                model: r.model.clone(),
                mean_ttc: r.risk.map(|g| round4(g.mean_s)),
                std_ttc: r.risk.map(|g| round4(g.std_s)),
                prob_below: r.risk.map(|g| round4(g.prob_below)),
                critical_fraction: round4(r.critical_fraction),
                n: r.n_finite,
                n_excluded: r.n_excluded,
                n_error_rows: error_rows[&r.model],
                unavailable: r.unavailable.clone(),
            })
            .collect(),
    };

    let csv_path = results_dir.join(SUMMARY_CSV);
    let fmt4 = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    write_xy(
        &csv_path,
        "model,mean_ttc,std_ttc,prob_below,critical_fraction,n,n_excluded",
        summary.models.iter().map(|m| {
            format!(
                "{},{},{},{},{:.4},{},{}",
                m.model,
                fmt4(m.mean_ttc),
                fmt4(m.std_ttc),
                fmt4(m.prob_below),
                m.critical_fraction,
                m.n,
                m.n_excluded
            )
        }),
    )?;
    write_json(&results_dir.join(SUMMARY_JSON), &summary)?;
    files.push(SUMMARY_CSV.to_string());
    files.push(SUMMARY_JSON.to_string());
    Ok(PostProcessOutput { summary, rows, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_row_format() {
        let cfg = RunConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_one_case(&cfg, None, Some(dir.path())).unwrap();
        let text = fs::read_to_string(out.out_dir.join("trace.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "0,0,0,20,65,3.75,20,60,1.75,inf,1,0");
        assert_eq!(text.lines().count(), out.result.trace.len() + 1);
    }

    #[test]
    fn result_rows_round_trip() {
        let cfg = RunConfig {
            models: vec!["rba".into()],
            sweep: super::super::SweepAxes {
                d_x0: vec![-5.0, 40.0],
                ..Default::default()
            },
            ..RunConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_comparison(&cfg, Some(dir.path()), Some(1)).unwrap();
        assert_eq!(out.manifest.files[0].errors, 1);
        let (runs, errors) = read_min_ttcs(&dir.path().join("results_rba.csv")).unwrap();
        assert_eq!((runs.len(), errors), (1, 1));
    }
}
