use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmlms::config::{load_config, parse_config, ExperimentConfig, Mode};
use dmlms::harness;

#[derive(Parser)]
#[command(name = "dmlms", version, about = "Diffusion multi-rate LMS experiments", after_help = defaults_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Network EMSE learning curve of DMLMS system identification.
    Estimate(RunArgs),
    /// Noise-reduction learning curve of filtered-x DMLMS noise control.
    Anc(RunArgs),
    /// DMLMS learning curves over the mu1_grid x mu2_grid step sizes.
    Sweep(RunArgs),
    /// DMLMS against the centralized and non-cooperative baselines.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed [default: 1].
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Monte-Carlo trials [default: 100].
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// High-rate samples per trial [default: 3000, anc 6000].
    #[arg(long, value_name = "N")]
    iters: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// 1-indexed edge list instead of a random topology.
    #[arg(long, value_name = "PATH")]
    topology: Option<PathBuf>,
    /// Skip the SVG plot.
    #[arg(long)]
    no_plot: bool,
    /// Run trials one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Any config key, e.g. `--set mu1=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn defaults_help() -> String {
    let mut s = String::from("Defaults by mode (any key can go in --config or --set):\n");
    for mode in [Mode::Estimate, Mode::Anc] {
        let label = match mode {
            Mode::Anc => "anc",
            _ => "estimate, sweep, compare",
        };
        s.push_str(&format!("\n[{label}]\n"));
        for line in ExperimentConfig::defaults(mode).render().lines().filter(|l| !l.starts_with("mode ")) {
            s.push_str("  ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s
}

fn overrides(mode: Mode, args: &RunArgs) -> Result<Vec<(String, String)>, String> {
    let mut o = vec![("mode".to_string(), mode.as_str().to_string())];
    let mut push = |k: &str, v: String| o.push((k.to_string(), v));
    if let Some(v) = args.seed {
        push("master_seed", v.to_string());
    }
    if let Some(v) = args.trials {
        push("trials", v.to_string());
    }
    if let Some(v) = args.iters {
        push("iterations", v.to_string());
    }
    if let Some(v) = &args.out {
        push("out_dir", v.display().to_string());
    }
    if let Some(v) = &args.topology {
        push("topology", v.display().to_string());
    }
    if args.no_plot {
        push("plot", "false".into());
    }
    if args.serial {
        push("parallel", "false".into());
    }
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        push(k.trim(), v.trim().to_string());
    }
    Ok(o)
}

fn execute(mode: Mode, args: &RunArgs) -> Result<(), String> {
    let o = overrides(mode, args)?;
    let config = match &args.config {
        Some(path) => load_config(path, &o),
        None => parse_config("", &o),
    }
    .map_err(|e| e.to_string())?;
    let out = harness::run(&config).map_err(|e| e.to_string())?;
    println!("wrote {}", out.csv.display());
    if let Some(p) = &out.summary {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", out.manifest.display());
    if let Some(p) = &out.plot {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Estimate(a) => (Mode::Estimate, a),
        Command::Anc(a) => (Mode::Anc, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Compare(a) => (Mode::Compare, a),
    };
    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
