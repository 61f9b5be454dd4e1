//! Regenerates the reference tables and compares against the stored values.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::engine::{SolveConfig, SolveReport, WeightSchedule};
use crate::error::{Error, Result};
use crate::eval::{GridEvaluator, ScanRegion};
use crate::innovations::{es_rule_innovations, solve_innovations};
use crate::model::{Constraint, ParameterGrid, ProblemSpec, TreatmentRule};
use crate::oracles::{balanced_minimax_rule, ReferenceTable};
use crate::symmetric::{es_rule, so_rule, solve_symmetric, EsVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableId {
    I,
    II,
    III,
    IV,
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(TableId::I),
            "II" | "2" => Ok(TableId::II),
            "III" | "3" => Ok(TableId::III),
            "IV" | "4" => Ok(TableId::IV),
            other => Err(Error::InvalidConfig(format!("unknown table {other:?}; expected I, II, III or IV"))),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableId::I => "I",
            TableId::II => "II",
            TableId::III => "III",
            TableId::IV => "IV",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSelection {
    /// Only the first-iterate rows (and the balanced minimax values).
    FirstIterate,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Small problems on a coarse grid with loose tolerances.
    Smoke,
    /// Published grid and iteration counts.
    Full,
}

impl Scale {
    fn resolution(self) -> usize {
        match self {
            Scale::Smoke => 200,
            Scale::Full => 1000,
        }
    }

    fn iterations(self) -> usize {
        match self {
            Scale::Smoke => 200,
            Scale::Full => 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Es,
    So,
}

/// A parsed table configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TableConfig {
    pub table: TableId,
    /// Two-arm sample sizes, or the innovation sample size repeated.
    pub sizes: Vec<usize>,
    pub status_quo: Option<f64>,
    pub schedule: Option<WeightSchedule>,
    pub init: InitKind,
    pub restrict: Option<(f64, f64)>,
}

fn parse_schedule(s: &str) -> Result<WeightSchedule> {
    if s == "robinson" {
        return Ok(WeightSchedule::Robinson);
    }
    if let Some(rest) = s.strip_prefix("LC") {
        if let Some((c, eta)) = rest.split_once('_') {
            let c = c.parse().map_err(|_| Error::Parse(format!("schedule {s}")))?;
            let eta = eta.parse().map_err(|_| Error::Parse(format!("schedule {s}")))?;
            return Ok(WeightSchedule::LeslieCollins { c, eta });
        }
    }
    Err(Error::Parse(format!("unknown schedule {s:?}")))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Parse(format!("bad list {s:?}"))))
        .collect()
}

impl TableConfig {
    pub fn parse(table: TableId, config: &str) -> Result<Self> {
        let mut sizes = Vec::new();
        let mut status_quo = None;
        let mut schedule = None;
        let mut init = InitKind::Es;
        let mut restrict = None;
        for part in config.split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config field {part:?}")))?;
            match k {
                "N" => sizes = parse_list(v)?,
                "Nbar" => sizes = vec![v.parse().map_err(|_| Error::Parse(format!("Nbar {v:?}")))?; 2],
                "mu3" => status_quo = Some(v.parse().map_err(|_| Error::Parse(format!("mu3 {v:?}")))?),
                "w" => schedule = Some(parse_schedule(v)?),
                "init" => {
                    init = match v {
                        "ES" => InitKind::Es,
                        "SO" => InitKind::So,
                        _ => return Err(Error::Parse(format!("init {v:?}"))),
                    }
                }
                "restrict" => {
                    let b: Vec<f64> = parse_list(v)?;
                    if b.len() != 2 {
                        return Err(Error::Parse(format!("restrict {v:?}")));
                    }
                    restrict = Some((b[0], b[1]));
                }
                _ => return Err(Error::Parse(format!("unknown config key {k:?}"))),
            }
        }
        if sizes.len() != 2 {
            return Err(Error::Parse(format!("config {config:?} lacks sample sizes")));
        }
        Ok(Self {
            table,
            sizes,
            status_quo,
            schedule,
            init,
            restrict,
        })
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        match self.status_quo {
            Some(mu) => ProblemSpec::testing_innovations(3, self.sizes[0], mu),
            None => ProblemSpec::two_arm(self.sizes[0], self.sizes[1]),
        }
    }

    pub fn grid(&self, resolution: usize) -> Result<ParameterGrid> {
        let constraint = match self.restrict {
            Some((lo, hi)) => Constraint::RatioBand { lo, hi },
            None => Constraint::Unrestricted,
        };
        ParameterGrid::for_spec(&self.spec()?, resolution, constraint)
    }

    pub fn init_rule(&self) -> Result<TreatmentRule> {
        let (n1, n2) = (self.sizes[0], self.sizes[1]);
        match (self.table, self.init) {
            (TableId::IV, _) => es_rule_innovations(n1, 3, self.status_quo.unwrap_or(0.5)),
            (TableId::III, _) => es_rule(n1, n2, EsVariant::TiesToTwo),
            (TableId::II, InitKind::Es) => es_rule(n1, n2, EsVariant::Reflected),
            (_, InitKind::Es) => es_rule(n1, n2, EsVariant::Symmetric),
            (_, InitKind::So) => so_rule(n1, n2),
        }
    }

    fn region(&self) -> ScanRegion {
        match self.table {
            TableId::I | TableId::II => ScanRegion::MirrorHalf,
            TableId::III => ScanRegion::Full,
            TableId::IV => ScanRegion::StrictlySorted,
        }
    }

    /// Maximal grid regret of the initial rule. The innovation tables were
    /// computed over distinct innovation means, which only matters when the
    /// maximizer sits on the diagonal.
    pub fn first_iterate(&self, resolution: usize) -> Result<f64> {
        let eval = GridEvaluator::new(&self.spec()?, &self.grid(resolution)?)?;
        Ok(eval.max_regret(&self.init_rule()?, self.region())?.1)
    }

    pub fn solve_config(&self, resolution: usize, iterations: usize) -> Result<SolveConfig> {
        Ok(SolveConfig::new(self.spec()?, self.grid(resolution)?, self.init_rule()?)
            .with_weights(self.schedule.unwrap_or_default())
            .with_max_iters(iterations))
    }

    pub fn solve(&self, resolution: usize, iterations: usize) -> Result<SolveReport> {
        let config = self.solve_config(resolution, iterations)?;
        match self.table {
            TableId::I | TableId::II => solve_symmetric(&config),
            TableId::III => crate::engine::solve(&config),
            TableId::IV => solve_innovations(&config),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub table: TableId,
    pub config: String,
    pub label: String,
    pub computed: f64,
    pub reference: f64,
    pub tol: f64,
    pub pass: bool,
}

/// One unit in the last decimal a stored value was printed with.
fn last_digit_unit(v: f64) -> f64 {
    (1..=10)
        .map(|k| 10f64.powi(-k))
        .find(|unit| ((v / unit).round() * unit - v).abs() <= 1e-12 * unit.max(v.abs()))
        .unwrap_or(0.0)
}

impl Cell {
    /// The tolerance is never finer than the precision of the reference.
    fn new(table: TableId, config: &str, label: impl Into<String>, computed: f64, reference: f64, tol: f64) -> Self {
        let tol = tol.max(last_digit_unit(reference));
        Self {
            table,
            config: config.to_string(),
            label: label.into(),
            computed,
            reference,
            tol,
            pass: (computed - reference).abs() <= tol,
        }
    }
}

fn iteration_of(label: &str) -> Option<usize> {
    label.strip_prefix('n').and_then(|s| s.parse().ok())
}

fn is_small(cfg: &TableConfig) -> bool {
    cfg.sizes.iter().all(|&n| n <= 20)
}

/// Recomputes the cells of `table` and compares them with the stored values.
pub fn reproduce(table: TableId, rows: RowSelection, scale: Scale) -> Result<Vec<Cell>> {
    let refs = ReferenceTable::embedded();
    let name = table.to_string();
    let mut by_config: BTreeMap<&str, Vec<(&str, &[f64])>> = BTreeMap::new();
    for (k, v) in refs.iter().filter(|(k, _)| k.table == name) {
        by_config.entry(k.config.as_str()).or_default().push((k.label.as_str(), v));
    }

    let p = scale.resolution();
    let (first_tol, minimax_tol, path_tol, end_tol) = match scale {
        Scale::Full => (if table == TableId::I { 1e-7 } else { 1e-6 }, 1e-5, 2e-3, 5e-4),
        Scale::Smoke => (1e-3, 1e-3, 5e-3, 5e-3),
    };
    let mut first_cache: BTreeMap<(Vec<usize>, String), f64> = BTreeMap::new();
    let mut cells = Vec::new();

    for (config, records) in by_config {
        let cfg = TableConfig::parse(table, config)?;
        if scale == Scale::Smoke && !is_small(&cfg) {
            continue;
        }
        let wants_run = rows == RowSelection::All && records.iter().any(|(l, _)| *l != "n1" && *l != "minimax");
        let report = if wants_run { Some(cfg.solve(p, scale.iterations())?) } else { None };

        for (label, values) in records {
            if label == "minimax" {
                let rule = balanced_minimax_rule(cfg.sizes[0], 2)?;
                let eval = GridEvaluator::new(&cfg.spec()?, &cfg.grid(p)?)?;
                let v = eval.max_regret(&rule, ScanRegion::Full)?.1;
                cells.push(Cell::new(table, config, label, v, values[0], minimax_tol));
                continue;
            }
            if label == "n1" {
                let key = (
                    cfg.sizes.clone(),
                    format!("{:?}{:?}{:?}", cfg.init, cfg.status_quo, cfg.restrict),
                );
                let v = match first_cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = cfg.first_iterate(p)?;
                        first_cache.insert(key, v);
                        v
                    }
                };
                cells.push(Cell::new(table, config, label, v, values[0], first_tol));
                continue;
            }
            let Some(report) = &report else { continue };
            if label == "I2000" {
                let (lo, hi) = report.interval;
                let mut c = Cell::new(table, config, "I2000:lower", lo, values[0], end_tol);
                c.pass &= lo <= hi;
                cells.push(c);
                cells.push(Cell::new(table, config, "I2000:upper", hi, values[1], end_tol));
            } else if let Some(n) = iteration_of(label) {
                let n = n.min(report.trace.len());
                let row = &report.trace[n - 1];
                let tol = if n >= 2000 { end_tol } else { path_tol };
                cells.push(Cell::new(table, config, label, row.upper, values[0], tol));
            }
        }
    }
    Ok(cells)
}

pub fn write_summary_csv<W: Write>(cells: &[Cell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["table", "config", "label", "computed", "reference", "tol", "pass"])?;
    for c in cells {
        w.write_record([
            c.table.to_string(),
            c.config.clone(),
            c.label.clone(),
            crate::io::sig10(c.computed),
            c.reference.to_string(),
            format!("{:e}", c.tol),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
