//! File emission and dataset loading.
//!
//! CSV numbers use the shortest round-trip decimal form, rows are
//! newline-terminated, absent values are empty fields, and every file opens
//! with a provenance comment line. Files are written to a temp path and
//! renamed into place so readers never see a partial file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vbakf::distributions::GaussianBelief;
use vbakf::experiment::{RunResult, SummaryRow};
use vbakf::filter::VbPosterior;
use vbakf::numerics::{Matrix, Vector};
use vbakf::simulator::{ScenarioConfig, SensorDataset};

use crate::RuntimeError;

/// Tool version stamped into provenance headers.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 64-bit FNV-1a over the canonical JSON of a config, for provenance lines.
pub fn config_hash(canonical_json: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical_json.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn provenance_line(run_label: &str, seed: u64, hash: u64) -> String {
    format!("# vbakf {TOOL_VERSION} run={run_label} seed={seed} config_hash={hash:016x}\n")
}

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), RuntimeError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| RuntimeError::Io {
        path: tmp.clone(),
        source: e,
    })?;
    fs::rename(&tmp, path).map_err(|e| RuntimeError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn push_float(line: &mut String, v: f64) {
    write!(line, ",{v}").unwrap();
}

fn vector_headers(base: &str, dim: usize) -> String {
    (0..dim)
        .map(|i| format!(",{base}_{i}"))
        .collect::<String>()
}

fn matrix_headers(base: &str, rows: usize, cols: usize) -> String {
    let mut s = String::new();
    for i in 0..rows {
        for j in 0..cols {
            write!(s, ",{base}_{i}_{j}").unwrap();
        }
    }
    s
}

fn push_vector(line: &mut String, v: &Vector) {
    for &x in v.as_slice() {
        push_float(line, x);
    }
}

fn push_vector_opt(line: &mut String, v: Option<&Vector>, dim: usize) {
    match v {
        Some(v) => push_vector(line, v),
        None => line.push_str(&",".repeat(dim)),
    }
}

fn push_matrix(line: &mut String, m: &Matrix) {
    for &x in m.data() {
        push_float(line, x);
    }
}

fn push_matrix_opt(line: &mut String, m: Option<&Matrix>, entries: usize) {
    match m {
        Some(m) => push_matrix(line, m),
        None => line.push_str(&",".repeat(entries)),
    }
}

/// Per-step series of every run in an experiment.
pub fn render_series_csv(header: &str, results: &[RunResult], d_x: usize, d_y: usize) -> String {
    let mut out = String::from(header);
    out.push_str("sweep_value,rep,k");
    out.push_str(&vector_headers("x_true", d_x));
    out.push_str(&vector_headers("xhat_vb", d_x));
    out.push_str(&matrix_headers("p_vb", d_x, d_x));
    out.push_str(&vector_headers("xhat_oracle", d_x));
    out.push_str(&matrix_headers("p_oracle", d_x, d_x));
    out.push_str(&vector_headers("xhat_static", d_x));
    out.push_str(&matrix_headers("p_static", d_x, d_x));
    out.push_str(&matrix_headers("eq_plugin", d_x, d_x));
    out.push_str(&matrix_headers("er_plugin", d_y, d_y));
    out.push_str(",dropout_est,corruption_est\n");
    for r in results {
        for s in &r.steps {
            let mut line = match r.sweep_value {
                Some(v) => format!("{v}"),
                None => String::new(),
            };
            write!(line, ",{},{}", r.rep, s.k).unwrap();
            push_vector(&mut line, &s.x_true);
            push_vector(&mut line, &s.xhat_vb);
            push_matrix(&mut line, &s.p_vb);
            push_vector_opt(&mut line, s.xhat_oracle.as_ref(), d_x);
            push_matrix_opt(&mut line, s.p_oracle.as_ref(), d_x * d_x);
            push_vector_opt(&mut line, s.xhat_static.as_ref(), d_x);
            push_matrix_opt(&mut line, s.p_static.as_ref(), d_x * d_x);
            push_matrix(&mut line, &s.eq_plugin);
            push_matrix(&mut line, &s.er_plugin);
            push_float(&mut line, s.dropout_est);
            push_float(&mut line, s.corruption_est);
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

pub fn render_summary_csv(header: &str, rows: &[SummaryRow]) -> String {
    let mut out = String::from(header);
    out.push_str("sweep_value,metric,mean,sd,p10,p90\n");
    for r in rows {
        let sv = match r.sweep_value {
            Some(v) => format!("{v}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{sv},{},{},{},{},{}\n",
            r.metric, r.mean, r.sd, r.p10, r.p90
        ));
    }
    out
}

pub fn render_summary_markdown(title: &str, rows: &[SummaryRow]) -> String {
    let mut out = format!("# {title}\n\n");
    out.push_str("| sweep_value | metric | mean | sd | p10 | p90 |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in rows {
        let sv = match r.sweep_value {
            Some(v) => format!("{v}"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "| {sv} | {} | {:.6} | {:.6} | {:.6} | {:.6} |\n",
            r.metric, r.mean, r.sd, r.p10, r.p90
        ));
    }
    out
}

/// Truth trajectory: `k,x_0,...`.
pub fn render_truth_csv(header: &str, dataset: &SensorDataset) -> String {
    let mut out = String::from(header);
    out.push('k');
    out.push_str(&vector_headers("x", dataset.config.d_x));
    out.push('\n');
    for (k, x) in dataset.x_true.iter().enumerate() {
        let mut line = format!("{k}");
        push_vector(&mut line, x);
        line.push('\n');
        out.push_str(&line);
    }
    out
}

/// Observations: `k,sensor_id,gamma,y_0,...` with empty y fields on dropout.
pub fn render_observations_csv(header: &str, dataset: &SensorDataset) -> String {
    let mut out = String::from(header);
    out.push_str("k,sensor_id,gamma");
    out.push_str(&vector_headers("y", dataset.config.d_y));
    out.push('\n');
    for k in 0..dataset.horizon() {
        for i in 0..dataset.n_sensors() {
            let mut line = format!("{k},{i},{}", u8::from(dataset.gamma[i][k]));
            push_vector_opt(&mut line, dataset.y[i][k].as_ref(), dataset.config.d_y);
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

/// Filter output series: `k,xhat_...,p_...,eq_plugin_...,er_plugin_...,rates`.
pub fn render_filter_csv(
    header: &str,
    posts: &[VbPosterior],
    d_x: usize,
    d_y: usize,
) -> Result<String, RuntimeError> {
    let mut out = String::from(header);
    out.push('k');
    out.push_str(&vector_headers("xhat", d_x));
    out.push_str(&matrix_headers("p", d_x, d_x));
    out.push_str(&matrix_headers("eq_plugin", d_x, d_x));
    out.push_str(&matrix_headers("er_plugin", d_y, d_y));
    out.push_str(",dropout_est,corruption_est\n");
    for (k, p) in posts.iter().enumerate() {
        let mut line = format!("{k}");
        push_vector(&mut line, &p.belief.mean);
        push_matrix(&mut line, &p.belief.cov);
        push_matrix(&mut line, &vbakf::distributions::iw_mean(&p.q_post)?);
        push_matrix(&mut line, &vbakf::distributions::iw_mean(&p.r_post)?);
        push_float(&mut line, p.dropout_rate_est);
        push_float(&mut line, p.corruption_rate_est);
        line.push('\n');
        out.push_str(&line);
    }
    Ok(out)
}

/// On-disk companion of a generated dataset: scenario plus seed.
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub scenario: ScenarioConfig,
    pub seed: u64,
}

/// Hyper-parameters and initial belief for the `filter` command.
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRunConfig {
    pub hyper: vbakf::filter::VbHyperParams,
    pub x0: GaussianBelief,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RuntimeError> {
    let text = fs::read_to_string(path).map_err(|e| RuntimeError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| RuntimeError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Load a dataset previously written by `simulate`: manifest plus
/// observations CSV. The hidden corruption mask is not recoverable.
pub fn load_dataset(dir: &Path) -> Result<SensorDataset, RuntimeError> {
    let manifest: DatasetManifest = read_json(&dir.join("dataset.json"))?;
    let path = dir.join("observations.csv");
    let text = fs::read_to_string(&path).map_err(|e| RuntimeError::Io {
        path: path.clone(),
        source: e,
    })?;
    let cfg = &manifest.scenario;
    let bad = |line_no: usize, msg: &str| RuntimeError::Csv {
        path: path.clone(),
        line: line_no + 1,
        message: msg.to_string(),
    };

    let mut y = vec![vec![None; cfg.horizon]; cfg.n_sensors];
    let mut gamma = vec![vec![false; cfg.horizon]; cfg.n_sensors];
    let mut saw_header = false;
    for (line_no, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + cfg.d_y {
            return Err(bad(line_no, "wrong field count"));
        }
        let k: usize = fields[0].parse().map_err(|_| bad(line_no, "bad k"))?;
        let i: usize = fields[1].parse().map_err(|_| bad(line_no, "bad sensor_id"))?;
        if k >= cfg.horizon || i >= cfg.n_sensors {
            return Err(bad(line_no, "index outside dataset bounds"));
        }
        let g = match fields[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad(line_no, "gamma must be 0 or 1")),
        };
        gamma[i][k] = g;
        if g {
            let mut vals = Vec::with_capacity(cfg.d_y);
            for f in &fields[3..] {
                vals.push(f.parse::<f64>().map_err(|_| bad(line_no, "bad observation value"))?);
            }
            y[i][k] = Some(Vector::new(vals).map_err(|e| bad(line_no, &e.to_string()))?);
        } else if fields[3..].iter().any(|f| !f.is_empty()) {
            return Err(bad(line_no, "dropped packet must have empty observation fields"));
        }
    }
    // The filter never reads the truth, so reconstruction does not need it.
    let x_true = vec![Vector::zeros(cfg.d_x); cfg.horizon];
    SensorDataset::from_parts(manifest.scenario.clone(), manifest.seed, x_true, y, gamma)
        .map_err(RuntimeError::from)
}
