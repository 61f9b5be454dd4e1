//! Closed-form minimax rules and the published reference values.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::model::TreatmentRule;

/// Balanced samples: split evenly over the arms with the most successes.
pub fn balanced_minimax_rule(n: usize, num_treatments: usize) -> Result<TreatmentRule> {
    if num_treatments < 2 {
        return domain(format!("need at least two treatments, got {num_treatments}"));
    }
    TreatmentRule::from_fn(num_treatments, vec![n; num_treatments], |c| {
        let top = *c.iter().max().expect("at least two arms");
        let winners = c.iter().filter(|&&x| x == top).count() as f64;
        c.iter().map(|&x| if x == top { 1.0 / winners } else { 0.0 }).collect()
    })
}

/// First arm unobserved: treat with arm 2 in proportion to its success rate.
pub fn n1_zero_rule(n2: usize) -> Result<TreatmentRule> {
    if n2 == 0 {
        return domain("the observed arm needs at least one observation");
    }
    TreatmentRule::from_fn(2, vec![0, n2], |c| {
        let d = c[1] as f64 / n2 as f64;
        vec![1.0 - d, d]
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReferenceKey {
    pub table: String,
    pub config: String,
    pub label: String,
}

impl std::fmt::Display for ReferenceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}|{}|{}", self.table, self.config, self.label)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReferenceTable {
    records: BTreeMap<ReferenceKey, Vec<f64>>,
}

const EMBEDDED: &str = include_str!("../data/reference_values.txt");

impl ReferenceTable {
    /// Parses `table|config|label|v1,v2,...` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut records = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('|').collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("reference line {}: expected 4 fields", i + 1)));
            }
            let values = parts[3]
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("reference line {}: {e}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            let key = ReferenceKey {
                table: parts[0].to_string(),
                config: parts[1].to_string(),
                label: parts[2].to_string(),
            };
            if records.insert(key.clone(), values).is_some() {
                return Err(Error::Parse(format!("duplicate reference key {key}")));
            }
        }
        Ok(Self { records })
    }

    /// The table shipped with the crate.
    pub fn embedded() -> &'static ReferenceTable {
        static TABLE: OnceLock<ReferenceTable> = OnceLock::new();
        TABLE.get_or_init(|| ReferenceTable::parse(EMBEDDED).expect("embedded reference data parses"))
    }

    pub fn get(&self, table: &str, config: &str, label: &str) -> Result<&[f64]> {
        let key = ReferenceKey {
            table: table.to_string(),
            config: config.to_string(),
            label: label.to_string(),
        };
        self.records
            .get(&key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownReference(key.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ReferenceKey, &[f64])> {
        self.records.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Looks up a record in the embedded table.
pub fn lookup_reference(table: &str, config: &str, label: &str) -> Result<&'static [f64]> {
    ReferenceTable::embedded().get(table, config, label)
}
