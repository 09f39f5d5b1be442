//! Scenario registry and per-trial report storage.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use cathnav::environment::path::PlannedPath;
use cathnav::environment::Scenario;
use cathnav::metrics::MetricsReport;
use cathnav::{Error, Result};
use cathnav_cli::report::{EvaluationReport, REPORT_FORMAT, REPORT_VERSION};
use serde::{Deserialize, Serialize};

use crate::protocol::TrialReport;
use crate::session::{Guidance, GuidanceKind, Session, SessionConfig};

#[derive(Debug, Clone)]
pub struct ScenarioEntry {
    pub scenario: Arc<Scenario>,
    /// Planner output offered as C-GAIL guidance.
    pub plan: Option<PlannedPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub hash: String,
    pub deformable: bool,
    pub guidance: Vec<GuidanceKind>,
}

#[derive(Debug, Default)]
pub struct Store {
    scenarios: BTreeMap<String, ScenarioEntry>,
    reports: Mutex<BTreeMap<String, TrialReport>>,
    /// Reports are also written here as `<session id>.json`.
    reports_dir: Option<PathBuf>,
}

impl Store {
    pub fn new(reports_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &reports_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self { reports_dir, ..Default::default() })
    }

    /// Registers a scenario under its name. A plan must have been produced
    /// for the same scenario.
    pub fn add_scenario(&mut self, scenario: Arc<Scenario>, plan: Option<PlannedPath>) -> Result<()> {
        if let Some(p) = &plan {
            if p.header.scenario != scenario.name() {
                return Err(Error::Schema(format!("plan is for {}, not {}", p.header.scenario, scenario.name())));
            }
        }
        self.scenarios.insert(scenario.name().to_string(), ScenarioEntry { scenario, plan });
        Ok(())
    }

    pub fn scenarios(&self) -> Vec<ScenarioInfo> {
        self.scenarios
            .iter()
            .map(|(name, e)| {
                let mut guidance = vec![GuidanceKind::Centerline];
                if e.plan.is_some() {
                    guidance.insert(0, GuidanceKind::Cgail);
                }
                ScenarioInfo { name: name.clone(), hash: e.scenario.hash.clone(), deformable: e.scenario.file.deformable, guidance }
            })
            .collect()
    }

    pub fn create_session(&self, scenario: &str, guidance: GuidanceKind, config: SessionConfig) -> Result<Session> {
        let entry = self.scenarios.get(scenario).ok_or_else(|| Error::Config(format!("unknown scenario {scenario}")))?;
        let guidance = match guidance {
            GuidanceKind::Centerline => Guidance::centerline(&entry.scenario),
            GuidanceKind::Cgail => Guidance::planned(
                entry.plan.as_ref().ok_or_else(|| Error::Config(format!("no planned path loaded for {scenario}")))?,
            ),
        };
        Session::new(uuid::Uuid::new_v4().to_string(), entry.scenario.clone(), guidance, config).map_err(|e| match e {
            crate::session::SessionError::Core(e) => e,
            other => Error::Contract(other.to_string()),
        })
    }

    pub fn save_report(&self, report: TrialReport) -> Result<()> {
        if let Some(dir) = &self.reports_dir {
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            std::fs::write(dir.join(format!("{}.json", report.session_id)), json)?;
        }
        self.reports.lock().expect("report lock").insert(report.session_id.clone(), report);
        Ok(())
    }

    pub fn report(&self, id: &str) -> Option<TrialReport> {
        self.reports.lock().expect("report lock").get(id).cloned()
    }

    pub fn report_ids(&self) -> Vec<String> {
        self.reports.lock().expect("report lock").keys().cloned().collect()
    }
}

/// Pools trials of one scenario into an evaluation report that `compare`
/// accepts.
pub fn trial_group(trials: &[TrialReport]) -> Result<EvaluationReport> {
    let first = trials.first().ok_or_else(|| Error::Domain("a trial group needs at least one trial".into()))?;
    if trials.iter().any(|t| t.scenario_hash != first.scenario_hash || t.guidance != first.guidance) {
        return Err(Error::Schema("trials differ in scenario or guidance".into()));
    }
    let metrics: Vec<MetricsReport> = trials.iter().map(|t| t.metrics.clone()).collect();
    Ok(EvaluationReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        scenario: first.scenario.clone(),
        scenario_hash: first.scenario_hash.clone(),
        config_hash: format!("teleop-{}", serde_json::to_value(first.guidance).expect("kind").as_str().unwrap_or_default()),
        checkpoint_iteration: 0,
        checkpoint_env_steps: 0,
        dynamic: first.deformable,
        stochastic: false,
        seed: 0,
        epsilon: first.epsilon,
        metrics: MetricsReport::merge(&metrics)?,
    })
}
