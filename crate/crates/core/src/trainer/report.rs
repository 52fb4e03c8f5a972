//! Per-fold AUC table with regime rows and averages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Trained on real images with traditional augmentation only.
    WithoutDa,
    /// Trained on style-transfer synthesized images.
    WithDa,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::WithoutDa => "Without Data Augmentation",
            Regime::WithDa => "With Data Augmentation",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Regime::WithoutDa => "without_da",
            Regime::WithDa => "with_da",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "without_da" => Some(Regime::WithoutDa),
            "with_da" => Some(Regime::WithDa),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub architecture: String,
    pub regime: Regime,
    pub folds: Vec<f64>,
    pub average: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub folds: usize,
    /// Without-DA rows first, then with-DA rows; architectures keep input order.
    pub rows: Vec<ReportRow>,
    /// Mean over all with-DA rows of their averages.
    pub mean_with_da: Option<f64>,
    pub mean_without_da: Option<f64>,
    /// Mean over architectures present in both regimes of (with − without).
    pub improvement: Option<f64>,
    #[serde(default)]
    pub config_digest: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub leakage_scope: String,
}

/// One table row's input: architecture, regime, AUC per fold.
pub type FoldScores = (String, Regime, Vec<f64>);

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn aggregate_results(entries: &[FoldScores]) -> Result<ExperimentReport> {
    let Some(first) = entries.first() else {
        return Err(Error::InvalidArgument("no results to aggregate".into()));
    };
    let k = first.2.len();
    if k == 0 {
        return Err(Error::InvalidArgument("rows need at least one fold".into()));
    }
    for (arch, regime, folds) in entries {
        if folds.len() != k {
            return Err(Error::InvalidArgument(format!(
                "ragged fold data: {arch}/{} has {} folds, expected {k}",
                regime.tag(),
                folds.len()
            )));
        }
    }
    let mut rows = Vec::new();
    for regime in [Regime::WithoutDa, Regime::WithDa] {
        for (arch, r, folds) in entries {
            if *r != regime {
                continue;
            }
            if rows.iter().any(|row: &ReportRow| row.architecture == *arch && row.regime == regime) {
                return Err(Error::InvalidArgument(format!("duplicate row {arch}/{}", regime.tag())));
            }
            rows.push(ReportRow { architecture: arch.clone(), regime, folds: folds.clone(), average: mean(folds) });
        }
    }
    let regime_mean = |regime: Regime| {
        let avgs: Vec<f64> = rows.iter().filter(|r| r.regime == regime).map(|r| r.average).collect();
        (!avgs.is_empty()).then(|| mean(&avgs))
    };
    let diffs: Vec<f64> = rows
        .iter()
        .filter(|r| r.regime == Regime::WithDa)
        .filter_map(|with| {
            rows.iter()
                .find(|r| r.regime == Regime::WithoutDa && r.architecture == with.architecture)
                .map(|without| with.average - without.average)
        })
        .collect();
    Ok(ExperimentReport {
        folds: k,
        mean_with_da: regime_mean(Regime::WithDa),
        mean_without_da: regime_mean(Regime::WithoutDa),
        improvement: (!diffs.is_empty()).then(|| mean(&diffs)),
        rows,
        config_digest: String::new(),
        seed: 0,
        leakage_scope: String::new(),
    })
}

fn fmt_num(v: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{v:.p$}"),
        None => format!("{v}"),
    }
}

impl ExperimentReport {
    /// Aligned text table: one row per (regime, architecture), fold columns
    /// then AVER. `precision = None` prints every number at full precision.
    pub fn render_text(&self, precision: Option<usize>) -> String {
        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Regime".to_string(), "Architecture".to_string()];
        header.extend((0..self.folds).map(|i| i.to_string()));
        header.push("AVER".into());
        cells.push(header);
        for row in &self.rows {
            let mut line = vec![row.regime.label().to_string(), row.architecture.clone()];
            line.extend(row.folds.iter().map(|&v| fmt_num(v, precision)));
            line.push(fmt_num(row.average, precision));
            cells.push(line);
        }
        let ncol = cells[0].len();
        let widths: Vec<usize> =
            (0..ncol).map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        if !self.config_digest.is_empty() {
            let _ = writeln!(out, "# config digest: {}  seed: {}", self.config_digest, self.seed);
        }
        if !self.leakage_scope.is_empty() {
            let _ = writeln!(out, "# leakage scope: {}", self.leakage_scope);
        }
        let _ = writeln!(out, "# AUC per fold (Fold number 0..{})", self.folds - 1);
        for (i, row) in cells.iter().enumerate() {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                if c < 2 {
                    let _ = write!(line, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(line, "{cell:>w$}", w = widths[c]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(line.trim_end().len()));
                out.push('\n');
            }
        }
        let pct = |v: f64| match precision {
            Some(p) => format!("{:.p$}", v, p = p + 1),
            None => format!("{v}"),
        };
        if let Some(m) = self.mean_without_da {
            let _ = writeln!(out, "mean without DA: {}", pct(m));
        }
        if let Some(m) = self.mean_with_da {
            let _ = writeln!(out, "mean with DA:    {}", pct(m));
        }
        if let Some(imp) = self.improvement {
            let _ = writeln!(out, "improvement:     {}", pct(imp));
        }
        out
    }

    /// Numbers as printed by [`render_text`](Self::render_text), row by row.
    pub fn parse_text_numbers(text: &str) -> Vec<Vec<f64>> {
        text.lines()
            .filter(|l| l.starts_with("Without") || l.starts_with("With ") || l.starts_with("mean") || l.starts_with("improvement"))
            .map(|l| l.split_whitespace().filter_map(|t| t.parse::<f64>().ok()).collect())
            .collect()
    }
}

/// Published reference fold values (AUC) as report input.
pub fn published_table() -> Vec<FoldScores> {
    let row = |arch: &str, regime, v: [f64; 5]| (arch.to_string(), regime, v.to_vec());
    use Regime::*;
    vec![
        row("VGG9", WithoutDa, [0.805, 0.820, 0.845, 0.845, 0.805]),
        row("VGG11", WithoutDa, [0.820, 0.799, 0.805, 0.840, 0.845]),
        row("VGG16", WithoutDa, [0.830, 0.850, 0.815, 0.875, 0.840]),
        row("DenseNet121", WithoutDa, [0.820, 0.825, 0.810, 0.850, 0.810]),
        row("VGG9", WithDa, [0.835, 0.880, 0.845, 0.875, 0.850]),
        row("VGG11", WithDa, [0.815, 0.895, 0.870, 0.885, 0.840]),
        row("VGG16", WithDa, [0.825, 0.850, 0.835, 0.830, 0.815]),
        row("DenseNet121", WithDa, [0.870, 0.895, 0.865, 0.855, 0.860]),
    ]
}
