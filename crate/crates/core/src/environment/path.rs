//! Planned-path files: a JSON header line followed by one JSON record per
//! waypoint.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::TipPose;

pub const PATH_FORMAT: &str = "cathnav-path";
pub const PATH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub config_hash: String,
    /// False when the rollout ended before reaching the target.
    pub complete: bool,
    pub target: Vec3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: usize,
    pub position: Vec3<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub header: PathHeader,
    pub records: Vec<PathRecord>,
}

impl PlannedPath {
    pub fn from_poses(scenario: &str, config_hash: &str, complete: bool, target: Vec3<f64>, poses: &[TipPose<f64>]) -> Self {
        let header = PathHeader {
            format: PATH_FORMAT.into(),
            version: PATH_VERSION,
            scenario: scenario.into(),
            config_hash: config_hash.into(),
            complete,
            target,
        };
        let records = poses
            .iter()
            .enumerate()
            .map(|(index, p)| PathRecord { index, position: p.position, alpha: p.alpha, gamma: p.gamma })
            .collect();
        Self { header, records }
    }

    pub fn positions(&self) -> Vec<Vec3<f64>> {
        self.records.iter().map(|r| r.position).collect()
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header).map_err(|e| Error::Schema(e.to_string()))?;
        writeln!(w)?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| Error::Schema(e.to_string()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Schema("empty path file".into()))??;
        let header: PathHeader = serde_json::from_str(&first).map_err(|e| Error::Schema(format!("header: {e}")))?;
        if header.format != PATH_FORMAT || header.version != PATH_VERSION {
            return Err(Error::Schema(format!("unsupported path format {} v{}", header.format, header.version)));
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Schema(format!("record {}: {e}", n + 1)))?);
        }
        Ok(Self { header, records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}
