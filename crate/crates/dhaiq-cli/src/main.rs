//! Command-line front end: seeded simulation batches, parameter sweeps,
//! closed-form claim checks, and topology export.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dhaiq::analysis::innocent_bound;
use dhaiq::experiment::{
    fmt_sig, render_claim_table, render_csv, render_plot_svg, run_scenario, run_sweep,
    topology_only, verify_claim, ScenarioConfig,
};
use dhaiq::topology::{export_adjacency, export_nodes};

#[derive(Parser)]
#[command(
    name = "dhaiq",
    version,
    about = "Simulator for hierarchical watchdog detection of packet-modifying nodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Scenario options shared by the simulating subcommands. Precedence:
/// defaults, then --config file, then --set pairs, then named flags.
#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Key=value configuration file (one pair per line, # comments).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Generic override, repeatable (same keys as the config file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed for the whole batch.
    #[arg(long)]
    seed: Option<u64>,
    /// Node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Adversary count.
    #[arg(long)]
    adversaries: Option<usize>,
    /// Deployment square edge, meters.
    #[arg(long)]
    side: Option<f64>,
    /// Radio range, meters.
    #[arg(long)]
    range: Option<f64>,
    /// Population threshold below which areas are marked, not probed.
    #[arg(long)]
    mu: Option<f64>,
    /// Adversary placement distribution.
    #[arg(long, value_parser = ["uniform", "gaussian"])]
    dist: Option<String>,
    /// Seeds per parameter point.
    #[arg(long)]
    runs: Option<usize>,
}

impl ScenarioArgs {
    fn build(&self) -> Result<ScenarioConfig, String> {
        let mut cfg = ScenarioConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            cfg.apply_config_text(&text).map_err(|e| e.to_string())?;
        }
        for pair in &self.sets {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| format!("--set `{pair}` is not KEY=VALUE"))?;
            cfg.apply_kv(key, value).map_err(|e| e.to_string())?;
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(nodes) = self.nodes {
            cfg.nodes = nodes;
        }
        if let Some(z0) = self.adversaries {
            cfg.adversaries = z0;
        }
        if let Some(side) = self.side {
            cfg.side = side;
        }
        if let Some(range) = self.range {
            cfg.range = range;
        }
        if let Some(mu) = self.mu {
            cfg.mu = mu;
        }
        if let Some(dist) = &self.dist {
            cfg.apply_kv("distribution", dist).map_err(|e| e.to_string())?;
        }
        if let Some(runs) = self.runs {
            cfg.runs_per_point = runs;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario: per-seed rows, then an aggregate CSV row.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Run the two-pass shifted-grid scheme.
        #[arg(long)]
        shift: bool,
        /// Write the aggregate CSV here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Simulate a parameter grid and emit aggregate CSV rows.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Node counts, comma separated.
        #[arg(long, value_name = "N,...", value_delimiter = ',', default_value = "400,1000")]
        n_list: Vec<usize>,
        /// Adversary counts, comma separated.
        #[arg(
            long,
            value_name = "Z0,...",
            value_delimiter = ',',
            default_value = "5,15,25,35,45"
        )]
        z0_list: Vec<usize>,
        /// Which shift settings to sweep.
        #[arg(long, value_parser = ["on", "off", "both"], default_value = "both")]
        shift: String,
        /// Write the CSV here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also render the sweep as an SVG plot at this path.
        #[arg(long, value_name = "PATH")]
        plot: Option<PathBuf>,
    },
    /// Check the quadrant-division analysis; exits nonzero if a check fails.
    VerifyClaim {
        /// Adversary counts to check, comma separated.
        #[arg(
            long,
            value_name = "K,...",
            value_delimiter = ',',
            default_value = "1,2,3,4,5,6,7,8,9,10"
        )]
        k_list: Vec<u32>,
        /// Simplex grid pitch for the numeric optimizer.
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
    },
    /// Print the innocent-ratio upper bound (mu - 1) * z0 / n.
    Bound {
        #[arg(long, default_value_t = 5.0)]
        mu: f64,
        #[arg(long, default_value_t = 25)]
        z0: usize,
        #[arg(long, default_value_t = 400)]
        n: usize,
    },
    /// Write one seeded topology: a node table and an adjacency list.
    ExportTopology {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Which seed of the batch to export.
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
        /// Node table path; the adjacency list goes to <out>.adj.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(scenario: &ScenarioArgs, shift: bool, out: Option<&Path>) -> Result<(), String> {
    let mut cfg = scenario.build()?;
    if shift {
        cfg.shift = true;
    }
    let result = run_scenario(&cfg).map_err(|e| e.to_string())?;
    println!("seed_index seed connected suspects innocent catch tx rounds");
    for o in &result.outcomes {
        println!(
            "{} {:016x} {} {} {} {} {} {}",
            o.seed_index,
            o.seed,
            u8::from(o.connected),
            o.suspects,
            fmt_sig(o.innocent_ratio),
            fmt_sig(o.catch_ratio),
            o.transmissions,
            o.rounds,
        );
    }
    if result.skipped_disconnected > 0 {
        eprintln!("note: skipped {} disconnected topologies", result.skipped_disconnected);
    }
    write_or_print(out, &render_csv(std::slice::from_ref(&result.row)))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    scenario: &ScenarioArgs,
    n_list: &[usize],
    z0_list: &[usize],
    shift: &str,
    out: Option<&Path>,
    plot: Option<&Path>,
) -> Result<(), String> {
    let cfg = scenario.build()?;
    let shifts: &[bool] = match shift {
        "on" => &[true],
        "off" => &[false],
        _ => &[false, true],
    };
    let rows = run_sweep(&cfg, n_list, z0_list, shifts).map_err(|e| e.to_string())?;
    if let Some(path) = plot {
        fs::write(path, render_plot_svg(&rows))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    write_or_print(out, &render_csv(&rows))
}

fn cmd_export(scenario: &ScenarioArgs, seed_index: usize, out: &Path) -> Result<(), String> {
    let cfg = scenario.build()?;
    let (seed, nodes, graph) = topology_only(&cfg, seed_index).map_err(|e| e.to_string())?;
    fs::write(out, export_nodes(&nodes))
        .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    let adj_path = PathBuf::from(format!("{}.adj", out.display()));
    fs::write(&adj_path, export_adjacency(&graph))
        .map_err(|e| format!("cannot write {}: {e}", adj_path.display()))?;
    eprintln!(
        "wrote {} nodes (stream seed {seed:016x}) to {} and adjacency to {}",
        nodes.len(),
        out.display(),
        adj_path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { scenario, shift, out } => cmd_run(scenario, *shift, out.as_deref()),
        Command::Sweep { scenario, n_list, z0_list, shift, out, plot } => {
            cmd_sweep(scenario, n_list, z0_list, shift, out.as_deref(), plot.as_deref())
        }
        Command::VerifyClaim { k_list, resolution } => {
            let report = verify_claim(k_list, *resolution);
            print!("{}", render_claim_table(&report));
            if report.all_ok {
                Ok(())
            } else {
                return ExitCode::FAILURE;
            }
        }
        Command::Bound { mu, z0, n } => {
            println!("{}", innocent_bound(*mu, *z0, *n));
            Ok(())
        }
        Command::ExportTopology { scenario, seed_index, out } => {
            cmd_export(scenario, *seed_index, out)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
