//! History ingestion (CSV and JSON), artifact emitters, and the arbitration
//! report in its two renderings.
//!
//! CSV artifacts start with `#`-prefixed provenance comments carrying the
//! config hash and seed; parsers skip such lines.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{CitationHistory, ModelError};
use crate::ode::Trajectory;
use crate::sim::{EnsembleStats, SystemRun, VariantOutcome};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Provenance block embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub version: String,
    pub config_hash: String,
}

impl ReportMeta {
    pub fn new<C: Serialize>(config: &C, seed: u64) -> Self {
        ReportMeta {
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config),
        }
    }

    fn comment_lines(&self) -> String {
        format!(
            "# citelab v{} config={} seed={}\n",
            self.version, self.config_hash, self.seed
        )
    }
}

/// First 16 hex characters of the SHA-256 of the canonical JSON encoding.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

/// JSON envelope pairing an artifact with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub meta: ReportMeta,
    pub report: T,
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

// ── History parsing ──────────────────────────────────────────────────────────

/// Reads histories from CSV with header `paper_id,pub_time,event_time`, one
/// row per citation event; papers with zero events appear once with an empty
/// `event_time`. Returns histories sorted by `paper_id`, events sorted.
pub fn parse_history_csv<R: Read>(reader: R) -> Result<Vec<CitationHistory>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    // BTreeMap keeps the stable paper_id ordering.
    let mut groups: std::collections::BTreeMap<String, (f64, Vec<f64>)> =
        std::collections::BTreeMap::new();

    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| IoError::Malformed { line, reason };

        if record.len() != 3 {
            return Err(malformed(format!("expected 3 columns, got {}", record.len())));
        }
        let paper_id = record[0].to_string();
        if paper_id.is_empty() {
            return Err(malformed("empty paper_id".to_string()));
        }
        let pub_time: f64 = record[1]
            .parse()
            .map_err(|e| malformed(format!("bad pub_time {:?}: {e}", &record[1])))?;
        let event = if record[2].is_empty() {
            None
        } else {
            Some(
                record[2]
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("bad event_time {:?}: {e}", &record[2])))?,
            )
        };

        let entry = groups.entry(paper_id.clone()).or_insert((pub_time, Vec::new()));
        if entry.0 != pub_time {
            return Err(malformed(format!(
                "paper {paper_id:?} has conflicting pub_time {} vs {}",
                entry.0, pub_time
            )));
        }
        if let Some(t) = event {
            entry.1.push(t);
        }
    }

    groups
        .into_iter()
        .map(|(paper_id, (pub_time, mut events))| {
            events.sort_by(f64::total_cmp);
            Ok(CitationHistory::new(paper_id, pub_time, events)?)
        })
        .collect()
}

/// Reads histories from a JSON array of `{paper_id, pub_time, event_times}`.
pub fn parse_history_json<R: Read>(reader: R) -> Result<Vec<CitationHistory>, IoError> {
    let mut histories: Vec<CitationHistory> = serde_json::from_reader(reader)?;
    for h in &mut histories {
        // Deserialization validates; ordering normalization happens here.
        let mut events = h.event_times().to_vec();
        events.sort_by(f64::total_cmp);
        *h = CitationHistory::new(h.paper_id().to_string(), h.pub_time(), events)?;
    }
    histories.sort_by(|a, b| a.paper_id().cmp(b.paper_id()));
    Ok(histories)
}

/// Dispatches on the file extension: `.json` for JSON, anything else CSV.
pub fn parse_history_path(path: &Path) -> Result<Vec<CitationHistory>, IoError> {
    let file = std::fs::File::open(path)?;
    let buf = std::io::BufReader::new(file);
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        parse_history_json(buf)
    } else {
        parse_history_csv(strip_comments(buf)?)
    }
}

/// The csv reader's comment support only skips mid-file comments; leading
/// comment lines before the header are stripped here.
fn strip_comments<R: BufRead>(mut reader: R) -> Result<std::io::Cursor<Vec<u8>>, IoError> {
    let mut content = String::new();
    reader.read_to_string(&mut content)?;
    let filtered: String = content
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    Ok(std::io::Cursor::new(filtered.into_bytes()))
}

/// Writes histories in the CSV format accepted by [`parse_history_csv`].
pub fn write_history_csv<W: Write>(
    mut w: W,
    histories: &[CitationHistory],
    meta: &ReportMeta,
) -> Result<(), IoError> {
    w.write_all(meta.comment_lines().as_bytes())?;
    writeln!(w, "paper_id,pub_time,event_time")?;
    for h in histories {
        if h.event_times().is_empty() {
            writeln!(w, "{},{},", h.paper_id(), h.pub_time())?;
        } else {
            for &t in h.event_times() {
                writeln!(w, "{},{},{}", h.paper_id(), h.pub_time(), t)?;
            }
        }
    }
    Ok(())
}

// ── Artifact emitters ────────────────────────────────────────────────────────

/// Trajectory CSV: `dt, f, c_implied` with `c_implied = m (f - 1)`.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    traj: &Trajectory,
    m: u64,
    meta: &ReportMeta,
) -> Result<(), IoError> {
    w.write_all(meta.comment_lines().as_bytes())?;
    writeln!(
        w,
        "# variant={} lambda={} kernel={} tol={}",
        traj.meta.variant.label(),
        traj.meta.lambda,
        traj.meta.kernel,
        traj.meta.tol
    )?;
    writeln!(w, "dt,f,c_implied")?;
    for (i, (&t, &f)) in traj.times.iter().zip(&traj.values).enumerate() {
        writeln!(w, "{},{},{}", t, f, traj.implied_citations(i, m))?;
    }
    Ok(())
}

/// Ensemble CSV: `dt, mean_c, stderr_c` plus a final-count summary comment.
pub fn write_ensemble_csv<W: Write>(
    mut w: W,
    stats: &EnsembleStats,
    meta: &ReportMeta,
) -> Result<(), IoError> {
    w.write_all(meta.comment_lines().as_bytes())?;
    writeln!(
        w,
        "# replicas={} final_mean={} final_stderr={}",
        stats.n,
        stats.final_mean(),
        stats.final_stderr()
    )?;
    writeln!(w, "dt,mean_c,stderr_c")?;
    for i in 0..stats.grid.len() {
        writeln!(w, "{},{},{}", stats.grid[i], stats.mean_c[i], stats.stderr_c[i])?;
    }
    Ok(())
}

/// Full-system histories CSV with the realized normalization in the header.
pub fn write_system_csv<W: Write>(
    mut w: W,
    run: &SystemRun,
    meta: &ReportMeta,
) -> Result<(), IoError> {
    writeln!(
        w,
        "# papers={} total_citations={} lambda_eff_per_eta={}",
        run.histories.len(),
        run.total_citations(),
        run.lambda_eff_per_eta
    )?;
    write_history_csv(w, &run.histories, meta)
}

// ── Arbitration report ───────────────────────────────────────────────────────

/// The side-by-side verdict, rendered to JSON (full precision) and markdown
/// (6 significant digits) from the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationReport {
    pub rows: Vec<VariantOutcome>,
    pub meta: ReportMeta,
}

impl ArbitrationReport {
    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        md.push_str("# Arbitration report\n\n");
        md.push_str(
            "Ultimate citation counts simulated under both attachment-kernel readings, \
             against the zero prediction and the closed-form prediction `m (e^lambda - 1)`.\n\n",
        );
        md.push_str(
            "| variant | lambda | m | kernel | replicas | sim mean | sim stderr | pred zero | pred closed form | within 3se of zero | within 3se of closed form |\n",
        );
        md.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                r.variant.label(),
                fmt_sig(r.lambda, 6),
                r.m,
                r.kernel,
                r.n_replicas,
                fmt_sig(r.sim_mean, 6),
                fmt_sig(r.sim_stderr, 6),
                fmt_sig(r.pred_zero, 6),
                fmt_sig(r.pred_closed_form, 6),
                yes_no(r.within_3se_of_zero),
                yes_no(r.within_3se_of_closed_form),
            ));
        }
        md.push_str(&format!(
            "\nseed {} | config {} | citelab v{}\n",
            self.meta.seed, self.meta.config_hash, self.meta.version
        ));
        md
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Rounds to `sig` significant digits in plain decimal notation.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
