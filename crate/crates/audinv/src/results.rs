//! Serialized inversion records and the result tables built from them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use audinv_core::inversion::{InversionResult, Method};
use serde::{Deserialize, Serialize};

use crate::wav::save_wav;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Fake,
    Real,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Fake => "fake",
            Source::Real => "real",
        }
    }
}

/// Everything measured for one evaluation target before any method runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub source: Source,
    pub index: usize,
    pub label: Option<usize>,
    /// Generating latent for fake targets.
    pub latent: Option<Vec<f32>>,
    pub class_probs: Vec<f32>,
}

/// JSON sidecar written next to each reconstruction WAV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionRecord {
    pub source: Source,
    pub index: usize,
    pub method: Method,
    pub label: Option<usize>,
    pub z_hat: Vec<f32>,
    pub loss_trace: Vec<f64>,
    pub steps_used: usize,
    pub wall_time: f64,
    pub spectrogram_mae: f64,
    pub raw_mse: f64,
    pub spectrogram_ssim: f64,
    pub class_probs: Vec<f32>,
    pub predicted: usize,
    pub latent_mse: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub source: Source,
    pub index: usize,
    pub method: Method,
    pub error: String,
}

impl InversionRecord {
    pub fn file_stem(&self) -> String {
        format!("{:04}_{}", self.index, self.method.as_str())
    }
}

/// Write `<stem>.wav` and `<stem>.json` into `dir`.
pub fn write_sidecar(dir: &Path, record: &InversionRecord, result: &InversionResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stem = record.file_stem();
    save_wav(&dir.join(format!("{stem}.wav")), &result.reconstruction)?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(record)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub inception_mean: f64,
    pub inception_std: f64,
    pub raw_mse: Option<f64>,
    pub spectrogram_ssim: Option<f64>,
    pub accuracy: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub title: String,
    pub source: Source,
    pub with_accuracy: bool,
    pub rows: Vec<TableRow>,
    pub failures: usize,
}

fn cell(v: Option<f64>, prec: usize, sci: bool) -> String {
    match v {
        Some(x) if sci => format!("{x:.prec$e}"),
        Some(x) => format!("{x:.prec$}"),
        None => String::new(),
    }
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,inception_mean,inception_std,raw_mse,spectrogram_ssim");
        if self.with_accuracy {
            out.push_str(",accuracy");
        }
        out.push_str(",n\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                r.name,
                cell(Some(r.inception_mean), 6, false),
                cell(Some(r.inception_std), 6, false),
                cell(r.raw_mse, 6, true),
                cell(r.spectrogram_ssim, 6, false)
            );
            if self.with_accuracy {
                let _ = write!(out, ",{}", cell(r.accuracy, 6, false));
            }
            let _ = writeln!(out, ",{}", r.count);
        }
        out
    }

    pub fn row(&self, name: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Provenance attached to every JSON table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub scale: String,
    pub checkpoints: std::collections::BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub provenance: Provenance,
    pub table: ResultsTable,
}

pub fn write_table(dir: &Path, stem: &str, table: &ResultsTable, provenance: &Provenance) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), table.to_csv())?;
    let file = TableFile { provenance: provenance.clone(), table: table.clone() };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<TableFile> {
    serde_json::from_str(&fs::read_to_string(path)?).with_context(|| format!("malformed table {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fake_table_has_no_accuracy_column() {
        let row = TableRow {
            name: "hybrid".into(),
            inception_mean: 1.5,
            inception_std: 0.25,
            raw_mse: Some(3e-5),
            spectrogram_ssim: Some(0.97),
            accuracy: None,
            count: 2,
        };
        let t = ResultsTable {
            title: "t".into(),
            source: Source::Fake,
            with_accuracy: false,
            rows: vec![row],
            failures: 0,
        };
        assert_eq!(
            t.to_csv(),
            "method,inception_mean,inception_std,raw_mse,spectrogram_ssim,n\nhybrid,1.500000,0.250000,3.000000e-5,0.970000,2\n"
        );
    }
}
