//! Recorded trajectories and their JSONL serialization.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::field::FourierField;

/// One recorded state at slow time `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tau: f64,
    #[serde(rename = "I")]
    pub actions: Vec<f64>,
    #[serde(rename = "phi")]
    pub angles: Vec<f64>,
    #[serde(rename = "u", skip_serializing_if = "Option::is_none", default)]
    pub field: Option<FourierField>,
    #[serde(rename = "v", skip_serializing_if = "Option::is_none", default)]
    pub state: Option<Vec<f64>>,
    /// `||u||_m^2` for `m = 0..=3`; kept in memory for moment diagnostics.
    #[serde(skip)]
    pub sobolev_sq: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub path: usize,
    pub system: Option<&'static str>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Serialize)]
struct Line<'a> {
    path: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<&'a str>,
    #[serde(flatten)]
    snap: &'a Snapshot,
}

impl TrajectoryRecord {
    pub fn taus(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.tau).collect()
    }

    /// Action `I_k` (k from 1) along the record.
    pub fn action_series(&self, k: usize) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.actions[k - 1]).collect()
    }

    /// One JSON object per snapshot: `{"tau":..,"I":[..],"phi":[..]}`, with
    /// `"system"` for non-SPDE trajectories and `"u"`/`"v"` when stored.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for snap in &self.snapshots {
            let line = Line {
                path: self.path,
                system: self.system,
                snap,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Builds the uniform grid `tau_i = i T / n`, `i = 0..=n`.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_layout() {
        let rec = TrajectoryRecord {
            path: 0,
            system: None,
            snapshots: vec![Snapshot {
                tau: 0.5,
                actions: vec![1.0],
                angles: vec![0.25],
                field: None,
                state: None,
                sobolev_sq: Some([1.0; 4]),
            }],
        };
        let mut buf = Vec::new();
        rec.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"path\":0,\"tau\":0.5,\"I\":[1.0],\"phi\":[0.25]}\n");
        let tagged = TrajectoryRecord { system: Some("effective"), ..rec };
        let mut buf = Vec::new();
        tagged.write_jsonl(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("{\"path\":0,\"system\":\"effective\",\"tau\""));
    }
}
