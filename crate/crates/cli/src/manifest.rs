//! Plain-text run manifest written next to a trained model.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use trd_core::model::TrdModel;
use trd_core::training::{OptimReport, TrainReport};

/// `<model path>.manifest.txt`
pub fn manifest_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

#[derive(Debug, Default)]
pub struct Manifest {
    text: String,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&mut self, name: &str) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "[{name}]");
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn history(&mut self, report: &OptimReport) {
        self.entry("iterations", report.iterations);
        self.entry("evaluations", report.evaluations);
        self.entry("status", format!("{:?}", report.status));
        self.entry("final_grad_norm", report.grad_norm);
        for (i, c) in report.history.iter().enumerate() {
            let _ = writeln!(self.text, "cost[{i}] = {c}");
        }
    }

    pub fn greedy(&mut self, report: &TrainReport) {
        for (t, r) in report.stages.iter().enumerate() {
            self.section(&format!("greedy stage {}", t + 1));
            self.history(r);
        }
    }

    pub fn joint(&mut self, report: &OptimReport) {
        self.section("joint");
        self.history(report);
    }

    /// Euclidean norms of each stage's filter coefficients and RBF weights.
    pub fn parameter_norms(&mut self, model: &TrdModel) {
        self.section("parameter norms");
        for (t, s) in model.stages.iter().enumerate() {
            let c = s.coeffs.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            let w = s.mixtures.iter().flat_map(|m| m.weights()).map(|v| v * v).sum::<f64>().sqrt();
            let lambda = s.lambda().map_or_else(|| "none".to_string(), |l| l.to_string());
            let _ = writeln!(self.text, "stage {}: coeffs {c} weights {w} lambda {lambda}", t + 1);
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, &self.text)
    }
}
