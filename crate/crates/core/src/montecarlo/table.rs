use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::estimators::EstimatorKind;
use crate::model::io::{csv_io, format_f64};

/// Monte Carlo risk of one estimator under one mean configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub config: String,
    pub estimator: EstimatorKind,
    /// Mean loss over the replicates.
    pub risk: f64,
    /// Standard error of `risk`.
    pub se: f64,
    pub prial: f64,
}

/// Risks, standard errors and PRIALs for every (configuration, estimator) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    /// Configuration-major, estimators in requested order.
    pub rows: Vec<RiskRow>,
    pub configs: Vec<String>,
    pub estimators: Vec<EstimatorKind>,
    pub replicates: usize,
    pub seed: u64,
    /// `sum_i tr(V_i Q_i)`, the PRIAL reference risk.
    pub risk_unbiased: f64,
    /// Requested estimators whose preconditions fail, with the reason.
    pub skipped: BTreeMap<String, String>,
}

pub const CSV_HEADER: [&str; 7] = ["config", "estimator", "risk", "se", "prial", "replicates", "seed"];

impl RiskTable {
    pub fn get(&self, config: &str, estimator: EstimatorKind) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.config == config && r.estimator == estimator)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER).map_err(csv_io)?;
        for r in &self.rows {
            wr.write_record([
                r.config.clone(),
                r.estimator.name().to_string(),
                format_f64(r.risk),
                format_f64(r.se),
                format_f64(r.prial),
                self.replicates.to_string(),
                self.seed.to_string(),
            ])
            .map_err(csv_io)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// PRIAL table with the standard error of each entry in parentheses.
    pub fn to_text(&self) -> String {
        let cell = |r: Option<&RiskRow>| match r {
            Some(r) => format!("{:.1} ({:.1})", r.prial, 100.0 * r.se / self.risk_unbiased),
            None => "-".to_string(),
        };
        let name_w = self.configs.iter().map(|c| c.len()).max().unwrap_or(0).max("config".len());
        let cells: Vec<Vec<String>> = self
            .configs
            .iter()
            .map(|c| self.estimators.iter().map(|&e| cell(self.get(c, e))).collect())
            .collect();
        let col_w: Vec<usize> = self
            .estimators
            .iter()
            .enumerate()
            .map(|(j, e)| cells.iter().map(|row| row[j].len()).max().unwrap_or(0).max(e.name().len()))
            .collect();

        let mut out = String::new();
        let _ = write!(out, "{:<name_w$}", "config");
        for (e, w) in self.estimators.iter().zip(&col_w) {
            let _ = write!(out, "  {:>w$}", e.name());
        }
        out.push('\n');
        for (c, row) in self.configs.iter().zip(&cells) {
            let _ = write!(out, "{c:<name_w$}");
            for (v, w) in row.iter().zip(&col_w) {
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "PRIAL (%) against risk {} of X; {} replicates, seed {}; standard errors in parentheses",
            self.risk_unbiased, self.replicates, self.seed
        );
        for (name, why) in &self.skipped {
            let _ = writeln!(out, "skipped {name}: {why}");
        }
        out
    }
}
