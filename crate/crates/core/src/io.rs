//! Rule files, traces and run reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{SolveReport, StopReason, TraceRow};
use crate::error::{Error, Result};
use crate::model::TreatmentRule;

/// Ten significant digits.
pub fn sig10(x: f64) -> String {
    format!("{x:.9e}")
}

/// Two-arm rule as a matrix of `delta_2`, rows `n_1`, columns `n_2`, six
/// decimals.
pub fn write_rule_csv<W: Write>(rule: &TreatmentRule, out: W) -> Result<()> {
    if rule.num_treatments() != 2 || rule.arm_sizes().len() != 2 {
        return Err(Error::ShapeMismatch("CSV rule files hold two-arm rules only; use JSON".into()));
    }
    let (n1, n2) = (rule.arm_sizes()[0], rule.arm_sizes()[1]);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for a in 0..=n1 {
        w.write_record((0..=n2).map(|b| format!("{:.6}", rule.delta2(a, b))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rule_csv<R: Read>(input: R) -> Result<TreatmentRule> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("rule cell {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty rule matrix".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parse("rule matrix rows differ in length".into()));
    }
    let (n1, n2) = (rows.len() - 1, width - 1);
    if rows.iter().flatten().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::Parse("rule matrix entries must lie in [0, 1]".into()));
    }
    TreatmentRule::from_fn(2, vec![n1, n2], |c| {
        let d = rows[c[0]][c[1]];
        vec![1.0 - d, d]
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleEntry {
    sample: Vec<usize>,
    probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleFile {
    num_treatments: usize,
    arm_sizes: Vec<usize>,
    entries: Vec<RuleEntry>,
}

/// Any rule as JSON, at full precision.
pub fn write_rule_json<W: Write>(rule: &TreatmentRule, out: W) -> Result<()> {
    let space = rule.sample_space();
    let file = RuleFile {
        num_treatments: rule.num_treatments(),
        arm_sizes: rule.arm_sizes().to_vec(),
        entries: space
            .iter()
            .enumerate()
            .map(|(w, sample)| RuleEntry {
                sample,
                probs: rule.row(w).to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &file)?;
    Ok(())
}

pub fn read_rule_json<R: Read>(input: R) -> Result<TreatmentRule> {
    let file: RuleFile = serde_json::from_reader(input)?;
    let t = file.num_treatments;
    let expected: usize = file.arm_sizes.iter().map(|n| n + 1).product();
    if file.entries.len() != expected {
        return Err(Error::Parse(format!(
            "rule file lists {} samples, arm sizes {:?} need {expected}",
            file.entries.len(),
            file.arm_sizes
        )));
    }
    let space = crate::model::SampleSpace::new(file.arm_sizes.clone());
    let mut probs = vec![f64::NAN; expected * t];
    for e in &file.entries {
        if e.sample.len() != file.arm_sizes.len() || e.sample.iter().zip(&file.arm_sizes).any(|(c, n)| c > n) {
            return Err(Error::Parse(format!("sample {:?} outside arm sizes", e.sample)));
        }
        if e.probs.len() != t {
            return Err(Error::Parse(format!("sample {:?} has {} probabilities", e.sample, e.probs.len())));
        }
        let w = space.flat(&e.sample);
        probs[w * t..(w + 1) * t].copy_from_slice(&e.probs);
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::Parse("rule file repeats a sample".into()));
    }
    TreatmentRule::from_probs(t, file.arm_sizes, probs)
}

/// Writes `rule` as CSV or JSON, chosen by the file extension.
pub fn save_rule(rule: &TreatmentRule, path: &Path) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_rule_csv(rule, out)
    } else {
        write_rule_json(rule, out)
    }
}

pub fn load_rule(path: &Path) -> Result<TreatmentRule> {
    let input = BufReader::new(File::open(path)?);
    if is_csv(path) {
        read_rule_csv(input)
    } else {
        read_rule_json(input)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "upper", "lower", "support_size", "alpha"])?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            sig10(r.upper),
            sig10(r.lower),
            r.support_size.to_string(),
            sig10(r.alpha),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short trace row".into()));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| Error::Parse(format!("trace value: {e}"))) };
        let int = |i: usize| -> Result<usize> { field(i)?.parse().map_err(|e| Error::Parse(format!("trace value: {e}"))) };
        out.push(TraceRow {
            iter: int(0)?,
            upper: num(1)?,
            lower: num(2)?,
            support_size: int(3)?,
            alpha: num(4)?,
        });
    }
    Ok(out)
}

/// Summary of a solve for the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportSummary {
    pub interval: [f64; 2],
    pub best_upper: f64,
    pub best_iter: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub support_size: usize,
    pub wall_clock_secs: f64,
}

impl From<&SolveReport> for ReportSummary {
    fn from(r: &SolveReport) -> Self {
        Self {
            interval: [r.interval.0, r.interval.1],
            best_upper: r.best_upper,
            best_iter: r.best_iter,
            iterations: r.iterations_run,
            stop_reason: r.stop_reason,
            support_size: r.final_mixture.support_size(),
            wall_clock_secs: r.wall_clock_secs,
        }
    }
}

pub fn write_report_json<W: Write>(report: &SolveReport, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &ReportSummary::from(report))?;
    Ok(())
}
