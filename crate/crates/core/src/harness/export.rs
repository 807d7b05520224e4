//! Collects every file the external plotting step reads into one directory
//! with a `manifest.json` index.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::spectral::{LambdaMaxMethod, ScaledLaplacian, WeightScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotArtifact {
    /// `network`, `laplacian`, `ecdf`, `taylor`, `history` or `swarm`.
    pub kind: String,
    /// Path relative to the export directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotExport {
    pub artifacts: Vec<PlotArtifact>,
}

fn copy(src: &Path, out: &Path, rel: &str) -> Result<()> {
    let dst = out.join(rel);
    if let Some(parent) = dst.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::copy(src, &dst).map_err(|e| Error::io(src, e))?;
    Ok(())
}

/// Writes the network summary and the three Laplacians, and copies reports,
/// histories and the experiment summary from `experiment` and the swarm
/// table from `search` when given.
pub fn export_plots(
    net: &Network,
    out: &Path,
    experiment: Option<&Path>,
    search: Option<&Path>,
) -> Result<PlotExport> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut artifacts = Vec::new();
    let mut add = |kind: &str, path: String| {
        artifacts.push(PlotArtifact {
            kind: kind.into(),
            path,
        })
    };

    let summary_path = out.join("network.json");
    fs::write(&summary_path, serde_json::to_vec_pretty(&net.summary())?)
        .map_err(|e| Error::io(&summary_path, e))?;
    add("network", "network.json".into());

    let lap_dir = out.join("laplacian");
    for scheme in WeightScheme::ALL {
        let lap = ScaledLaplacian::from_network(net, scheme, LambdaMaxMethod::Auto)?;
        lap.export(&lap_dir, scheme.as_str(), net.node_names())?;
        add("laplacian", format!("laplacian/{scheme}.json"));
    }

    if let Some(exp) = experiment {
        let summary = exp.join("summary.json");
        if !summary.exists() {
            return Err(Error::io(&summary, std::io::ErrorKind::NotFound.into()));
        }
        copy(&summary, out, "experiment/summary.json")?;
        add("taylor", "experiment/summary.json".into());
        let runs = exp.join("runs");
        if runs.is_dir() {
            let mut dirs: Vec<PathBuf> = fs::read_dir(&runs)
                .map_err(|e| Error::io(&runs, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            for d in dirs {
                let name = d.file_name().unwrap_or_default().to_string_lossy().into_owned();
                for (file, kind) in [("report.json", "ecdf"), ("history.csv", "history")] {
                    let src = d.join(file);
                    if src.exists() {
                        let rel = format!("experiment/runs/{name}/{file}");
                        copy(&src, out, &rel)?;
                        add(kind, rel);
                    }
                }
            }
        }
    }

    if let Some(search) = search {
        let swarm = search.join("swarm.csv");
        copy(&swarm, out, "search/swarm.csv")?;
        add("swarm", "search/swarm.csv".into());
    }

    let export = PlotExport { artifacts };
    let manifest = out.join("manifest.json");
    fs::write(&manifest, serde_json::to_vec_pretty(&export)?).map_err(|e| Error::io(&manifest, e))?;
    Ok(export)
}
