//! Evaluation reports and their statistical comparison.

use std::path::Path;

use cathnav::metrics::{kruskal_wallis, MetricsReport};
use cathnav::{Error, Result};
use serde::{Deserialize, Serialize};

pub const REPORT_FORMAT: &str = "cathnav-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub scenario_hash: String,
    /// Hash of the training configuration of the evaluated checkpoint.
    pub config_hash: String,
    pub checkpoint_iteration: usize,
    pub checkpoint_env_steps: usize,
    pub dynamic: bool,
    pub stochastic: bool,
    pub seed: u64,
    /// Success radius, mm.
    pub epsilon: f64,
    pub metrics: MetricsReport,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let r: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { offset: 0, message: format!("{}: {e}", path.display()) })?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(Error::Schema(format!("{} is not a {REPORT_FORMAT} v{REPORT_VERSION} file", path.display())));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub n_a: usize,
    pub n_b: usize,
    pub h: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_hash_a: String,
    pub config_hash_b: String,
    pub rows: Vec<ComparisonRow>,
}

/// Per-episode samples of each compared metric.
fn samples(m: &MetricsReport) -> Vec<(&'static str, Vec<f64>)> {
    let e = &m.episodes;
    vec![
        ("success", e.iter().map(|x| if x.success { 1.0 } else { 0.0 }).collect()),
        ("T_s", e.iter().map(|x| x.t_s as f64).collect()),
        ("T", e.iter().map(|x| x.t).collect()),
        ("T_a", e.iter().map(|x| x.t_a).collect()),
        ("T_r_mean", e.iter().map(|x| x.t_r_mean).collect()),
        ("curvature_mean", e.iter().filter_map(|x| x.curvature_mean).collect()),
    ]
}

/// Kruskal-Wallis test per metric over the raw episode samples.
pub fn compare(a: &EvaluationReport, b: &EvaluationReport) -> Result<Comparison> {
    if a.metrics.episodes.is_empty() || b.metrics.episodes.is_empty() {
        return Err(Error::Domain("both reports need raw per-episode samples".into()));
    }
    let mut rows = Vec::new();
    for ((name, xa), (_, xb)) in samples(&a.metrics).into_iter().zip(samples(&b.metrics)) {
        if xa.is_empty() || xb.is_empty() {
            continue;
        }
        let kw = kruskal_wallis(&[xa.clone(), xb.clone()])?;
        rows.push(ComparisonRow { metric: name.into(), n_a: xa.len(), n_b: xb.len(), h: kw.h, p_value: kw.p_value, significant: kw.significant });
    }
    Ok(Comparison { config_hash_a: a.config_hash.clone(), config_hash_b: b.config_hash.clone(), rows })
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut s = format!("{:<16} {:>5} {:>5} {:>10} {:>10}  significant\n", "metric", "n_a", "n_b", "H", "p");
        for r in &self.rows {
            s += &format!(
                "{:<16} {:>5} {:>5} {:>10.4} {:>10.4}  {}\n",
                r.metric,
                r.n_a,
                r.n_b,
                r.h,
                r.p_value,
                if r.significant { "yes" } else { "no" }
            );
        }
        s
    }
}
