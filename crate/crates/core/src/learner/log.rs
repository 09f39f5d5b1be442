//! Per-iteration training log in CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub env_steps: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    #[serde(rename = "L_PPO")]
    pub l_ppo: f64,
    #[serde(rename = "L_GAIL")]
    pub l_gail: f64,
    #[serde(rename = "L_BC")]
    pub l_bc: f64,
    #[serde(rename = "L_curiosity")]
    pub l_curiosity: f64,
    pub theta_max_current: f64,
}

pub const LOG_COLUMNS: [&str; 9] = [
    "iteration",
    "env_steps",
    "mean_reward",
    "success_rate",
    "L_PPO",
    "L_GAIL",
    "L_BC",
    "L_curiosity",
    "theta_max_current",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_log(out: impl Write, rows: &[IterationLog]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(LOG_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_log(path: impl AsRef<Path>, rows: &[IterationLog]) -> Result<()> {
    write_log(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}

pub fn read_log(input: impl Read) -> Result<Vec<IterationLog>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(LOG_COLUMNS) {
        return Err(Error::Schema(format!("unexpected log columns: {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let row = IterationLog {
            iteration: 3,
            env_steps: 6144,
            mean_reward: -0.123456789,
            success_rate: 0.25,
            l_ppo: 1e-3,
            l_gail: 0.69,
            l_bc: 0.01,
            l_curiosity: 2.5,
            theta_max_current: 1.2566370614359172,
        };
        let mut buf = Vec::new();
        write_log(&mut buf, &[row, row]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,env_steps,mean_reward,success_rate,L_PPO,L_GAIL,L_BC,L_curiosity,theta_max_current\n"));
        assert_eq!(read_log(&buf[..]).unwrap(), vec![row, row]);
    }
}
