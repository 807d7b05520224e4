use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use wdsgnn::chebnet::{load_checkpoint, TrainConfig};
use wdsgnn::eval::evaluate;
use wdsgnn::harness::{
    artifact_root, check_receptive_field, default_topology, export_plots, network_name, parse_topology,
    run_experiment, run_single, sha256_hex, ExperimentPlan, SearchPlan,
};
use wdsgnn::network::{parse_inp, Network};
use wdsgnn::scenegen::{build_sceneset, SceneConfig, SceneSet};
use wdsgnn::spectral::{LambdaMaxMethod, ScaledLaplacian, WeightScheme};
use wdsgnn::Error;

#[derive(Parser)]
#[command(name = "wdsgnn", version, about = "Nodal pressure reconstruction with Chebyshev graph convolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an INP file and print its summary as JSON.
    Parse {
        inp: PathBuf,
        /// Include every node and edge.
        #[arg(long)]
        full: bool,
    },
    /// Print the hop diameter of the network graph.
    Diameter { inp: PathBuf },
    /// Build the scaled Laplacian.
    Laplacian {
        inp: PathBuf,
        #[arg(long, default_value = "binary")]
        scheme: WeightScheme,
        /// Directory for `<scheme>.csv` and `<scheme>.json`.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Generate and solve random scenes.
    Genscenes {
        inp: PathBuf,
        /// TOML scene configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_scenes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one sensor placement.
    Train {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hidden layers as `K:F,K:F,...`; defaults by network name.
        #[arg(long)]
        topology: Option<String>,
        #[arg(long, default_value = "binary")]
        scheme: WeightScheme,
        /// TOML training configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        /// Network file; defaults to the path stored in the checkpoint.
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the observation-ratio x placement grid of a TOML plan.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Random hyperparameter search from a TOML search plan.
    Search {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the JSON/CSV files used for plotting.
    ExportPlots {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        experiment: Option<PathBuf>,
        #[arg(long)]
        search: Option<PathBuf>,
    },
}

fn load_net(path: &Path) -> wdsgnn::Result<(Network, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok((parse_inp(&text)?, text))
}

fn print_json(value: &impl serde::Serialize) -> wdsgnn::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> wdsgnn::Result<()> {
    match cli.command {
        Command::Parse { inp, full } => {
            let (net, _) = load_net(&inp)?;
            let mut summary = net.summary();
            if !full {
                summary.nodes.clear();
                summary.edges.clear();
            }
            print_json(&summary)
        }
        Command::Diameter { inp } => {
            let (net, _) = load_net(&inp)?;
            println!("{}", net.graph_diameter());
            Ok(())
        }
        Command::Laplacian { inp, scheme, export } => {
            let (net, _) = load_net(&inp)?;
            let lap = ScaledLaplacian::from_network(&net, scheme, LambdaMaxMethod::Auto)?;
            println!(
                "scheme {scheme}, n {}, nnz {}, lambda_max {:.12}",
                lap.dim(),
                lap.matrix().nnz(),
                lap.lambda_max()
            );
            if let Some(dir) = export {
                lap.export(&dir, scheme.as_str(), net.node_names())?;
            }
            Ok(())
        }
        Command::Genscenes {
            inp,
            config,
            seed,
            n_scenes,
            out,
        } => {
            let (net, _) = load_net(&inp)?;
            let mut cfg = match config {
                Some(p) => SceneConfig::from_toml_file(&p)?,
                None => SceneConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_scenes {
                cfg.n_scenes = n;
            }
            let set = build_sceneset(&net, &cfg)?;
            set.save(&out)?;
            println!(
                "{} scenes ({} failed): train {}, val {}, test {}",
                set.len(),
                set.failures.len(),
                set.splits.train.len(),
                set.splits.val.len(),
                set.splits.test.len()
            );
            Ok(())
        }
        Command::Train {
            net,
            scenes,
            ratio,
            seed,
            topology,
            scheme,
            config,
            out,
        } => {
            let (network, text) = load_net(&net)?;
            let topology = match topology {
                Some(t) => parse_topology(&t)?,
                None => default_topology(&network_name(&net))?,
            };
            check_receptive_field(&topology, network.graph_diameter());
            let train_cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    toml::from_str::<TrainConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => TrainConfig::default(),
            };
            let set = SceneSet::load(&scenes)?;
            if set.node_names != network.node_names() {
                return Err(Error::Config("scene set was generated for a different network".into()));
            }
            let lap = Arc::new(ScaledLaplacian::from_network(&network, scheme, LambdaMaxMethod::Auto)?);
            let (outcome, report) = run_single(
                Some(&net),
                Some(sha256_hex(text.as_bytes())),
                &set,
                lap,
                &topology,
                ratio,
                seed,
                &train_cfg,
                &out,
            )?;
            println!(
                "{} epochs, best {} (val {:.4e}); test mean relative error {:.4} (naive {:.4})",
                outcome.history.epochs.len(),
                outcome.best_epoch,
                outcome.best_val_loss,
                report.model.mean_relative_error,
                report.baseline.mean_relative_error
            );
            Ok(())
        }
        Command::Evaluate {
            checkpoint,
            scenes,
            net,
            out,
        } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let net_path = net
                .or_else(|| ckpt.header.network_path.as_ref().map(PathBuf::from))
                .ok_or_else(|| Error::Config("checkpoint has no network path, pass --net".into()))?;
            let (network, _) = load_net(&net_path)?;
            let scheme = ckpt
                .header
                .scheme
                .ok_or_else(|| Error::Checkpoint("checkpoint has no weight scheme".into()))?;
            let lap = Arc::new(ScaledLaplacian::from_network(&network, scheme, LambdaMaxMethod::Auto)?);
            let mask = ckpt.header.mask.clone();
            let model = ckpt.into_model(lap)?;
            let set = SceneSet::load(&scenes)?;
            let report = evaluate(&model, &set, &mask)?;
            let t = report.model.taylor;
            let b = report.baseline.taylor;
            println!(
                "model: mean rel. error {:.4}, std {:.4}, corr {:.6}, cRMSE {:.4}",
                report.model.mean_relative_error, t.normalized_std, t.correlation, t.centered_rmse
            );
            println!(
                "naive: mean rel. error {:.4}, std {:.4}, corr {:.6}, cRMSE {:.4}",
                report.baseline.mean_relative_error, b.normalized_std, b.correlation, b.centered_rmse
            );
            if let Some(path) = out {
                report.save(&path)?;
            }
            Ok(())
        }
        Command::Experiment { plan } => {
            let plan = ExperimentPlan::from_toml_file(&plan)?;
            let (dir, summary) = run_experiment(&plan, &artifact_root())?;
            for r in &summary.per_ratio {
                if let (Some(t), Some(b)) = (r.taylor, r.baseline_taylor) {
                    println!(
                        "ratio {:.2}: {} runs, cRMSE {:.4} (naive {:.4})",
                        r.observation_ratio, r.runs, t.centered_rmse, b.centered_rmse
                    );
                }
            }
            println!("{} failures; results in {}", summary.failures.len(), dir.display());
            Ok(())
        }
        Command::Search { space, budget, out } => {
            let mut plan = SearchPlan::from_toml_file(&space)?;
            if let Some(b) = budget {
                plan.budget = b;
            }
            let result = plan.run()?;
            let dir = out.unwrap_or_else(|| artifact_root().join("search"));
            result.save(&dir)?;
            for e in result.ranked.iter().take(5) {
                println!(
                    "{:>3}  {:<11} {:?}  wd {:.2e}  val {:.4e}",
                    e.index, e.config.scheme, e.config.layers, e.config.weight_decay, e.mean_val_loss
                );
            }
            println!("results in {}", dir.display());
            Ok(())
        }
        Command::ExportPlots {
            net,
            out,
            experiment,
            search,
        } => {
            let (network, _) = load_net(&net)?;
            let export = export_plots(&network, &out, experiment.as_deref(), search.as_deref())?;
            println!("{} artifacts written to {}", export.artifacts.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
