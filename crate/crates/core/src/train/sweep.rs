use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{ArwSettings, ExperimentConfig};
use super::pipeline::pretrain_arw;
use super::report::RunReport;
use super::runner::run_experiment;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    StructSize,
    WalkLength,
    NumRwPerNode,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 3] = [
        SweepAxis::StructSize,
        SweepAxis::WalkLength,
        SweepAxis::NumRwPerNode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::StructSize => "struct_size",
            SweepAxis::WalkLength => "walk_length",
            SweepAxis::NumRwPerNode => "num_rw_per_node",
        }
    }

    fn apply(self, base: &ArwSettings, value: usize) -> ArwSettings {
        let mut s = *base;
        match self {
            SweepAxis::StructSize => s.d = value,
            SweepAxis::WalkLength => s.l = value,
            SweepAxis::NumRwPerNode => s.r = value,
        }
        s
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s || (s == "structural_size" && *a == SweepAxis::StructSize))
            .ok_or_else(|| {
                let valid: Vec<&str> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!(
                    "unknown sweep axis `{s}`; valid axes are {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub settings: ArwSettings,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// One row per value: embedding settings first, then the aggregate metric.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let metric = self
            .rows
            .first()
            .map_or("metric", |r| r.report.metric.name());
        w.write_record([
            "struct_size",
            "walk_length",
            "num_rw_per_node",
            "window",
            metric,
            "std",
            "seeds",
        ])?;
        for row in &self.rows {
            let s = &row.settings;
            w.write_record([
                s.d.to_string(),
                s.l.to_string(),
                s.r.to_string(),
                s.w.to_string(),
                row.report.mean.to_string(),
                row.report.std.map_or("n/a".into(), |v| v.to_string()),
                row.report.seeds.len().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("writing sweep CSV", e))?;
        Ok(())
    }
}

/// Re-embeds the dataset for each value along `axis` and retrains.
pub fn sensitivity_sweep<T: Scalar>(
    graphs: &[Graph],
    base: &ArwSettings,
    experiment: &ExperimentConfig,
    axis: SweepAxis,
    values: &[usize],
    seed: u64,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config(format!(
            "sweep over {axis} needs at least one value"
        )));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let settings = axis.apply(base, v);
        settings.validate()?;
        let (embedding, _) = pretrain_arw::<T>(graphs, &settings, seed)?;
        let report = run_experiment::<T>(graphs, &embedding, experiment)?;
        log::info!("{axis} = {v}: {}", report.summary());
        rows.push(SweepRow { settings, report });
    }
    Ok(SweepTable { axis, rows })
}

pub fn walk_length_ablation<T: Scalar>(
    graphs: &[Graph],
    base: &ArwSettings,
    experiment: &ExperimentConfig,
    lengths: &[usize],
    seed: u64,
) -> Result<SweepTable> {
    sensitivity_sweep::<T>(
        graphs,
        base,
        experiment,
        SweepAxis::WalkLength,
        lengths,
        seed,
    )
}
