//! Scene-set files: `pressures.csv` (one row per scene, one column per node)
//! plus a `scenes.json` sidecar.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryConditions, SceneFailure};
use crate::error::{Error, Result};

pub const PRESSURES_FILE: &str = "pressures.csv";
pub const SCENES_FILE: &str = "scenes.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFileMeta {
    pub node_names: Vec<String>,
    /// Boundary conditions of the retained scenes, row-aligned with the CSV.
    pub boundary: Vec<BoundaryConditions>,
    /// `(mass, energy)` residual of each retained scene.
    pub residuals: Vec<(f64, f64)>,
    /// Index of each retained scene in the sampled sequence.
    pub source_index: Vec<usize>,
    pub failures: Vec<SceneFailure>,
}

pub fn write_scene_file(dir: &Path, pressures: &[Vec<f64>], meta: &SceneFileMeta) -> Result<()> {
    if pressures.len() != meta.boundary.len() {
        return Err(Error::dims(meta.boundary.len(), pressures.len()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(PRESSURES_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&meta.node_names)?;
    for row in pressures {
        if row.len() != meta.node_names.len() {
            return Err(Error::dims(meta.node_names.len(), row.len()));
        }
        // shortest round-trip representation keeps files bit-exact on reload
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let path = dir.join(SCENES_FILE);
    fs::write(&path, serde_json::to_vec_pretty(meta)?).map_err(|e| Error::io(&path, e))
}

pub fn read_scene_file(dir: &Path) -> Result<(Vec<Vec<f64>>, SceneFileMeta)> {
    let path = dir.join(SCENES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: SceneFileMeta = serde_json::from_str(&text)?;

    let mut r = csv::Reader::from_path(dir.join(PRESSURES_FILE))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != meta.node_names {
        return Err(Error::dims("CSV header matching scenes.json node names", "a different header"));
    }
    let mut pressures = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("'{v}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        pressures.push(row);
    }
    if pressures.len() != meta.boundary.len() {
        return Err(Error::dims(meta.boundary.len(), pressures.len()));
    }
    Ok((pressures, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SceneFileMeta {
            node_names: vec!["a".into(), "b".into()],
            boundary: vec![BoundaryConditions {
                demands: vec![0.1],
                pump_speeds: vec![],
            }],
            residuals: vec![(1e-12, 3e-11)],
            source_index: vec![0],
            failures: vec![SceneFailure {
                index: 1,
                reason: "x".into(),
            }],
        };
        let rows = vec![vec![0.1 + 0.2, -1.0 / 3.0]];
        write_scene_file(dir.path(), &rows, &meta).unwrap();
        let (back, m) = read_scene_file(dir.path()).unwrap();
        assert_eq!(back, rows);
        assert_eq!(m, meta);
    }
}
