use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use classa::spacetime::{PresetName, PresetSpec};
use classa_lab::plot::{emit_plot_data, PlotKind};
use classa_lab::{load_scenario, pack, run_scenario};

#[derive(Parser)]
#[command(name = "lab", version, about = "Class A Lorentzian torus laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file or a built-in scenario (e.g. accept/flat-cone).
    Run {
        config: String,
        /// Run independent tasks concurrently.
        #[arg(long)]
        parallel: bool,
        /// Output directory (default: the config's output_dir, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot CSV from a task report.
    Plot {
        report: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Direction index for plateau plots.
        #[arg(long, default_value_t = 0)]
        series: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List metric presets and built-in scenarios.
    Presets,
}

fn default_out(config: &str) -> PathBuf {
    let name = config.trim_end_matches(".json").replace('/', "_");
    let name = PathBuf::from(&name).file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or(name);
    PathBuf::from("out").join(name)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("LAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, parallel, out } => {
            let scenario = match load_scenario(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let m = match scenario.validate() {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let dir = out.or_else(|| scenario.output_dir.clone()).unwrap_or_else(|| default_out(&config));
            match run_scenario(&scenario, &m, &dir, parallel) {
                Ok(outcome) => {
                    for r in &outcome.records {
                        match &r.error {
                            None => println!("{} {} -> {}", r.index, r.kind, dir.join(&r.report).display()),
                            Some(e) => println!("{} {} failed: {e}", r.index, r.kind),
                        }
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: cannot write reports to {}: {e}", dir.display());
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Plot { report, kind, series, out } => match emit_plot_data(&report, kind, series, out.as_deref()) {
            Ok(p) => {
                println!("{}", p.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Cmd::Presets => {
            println!("presets:");
            for name in PresetName::ALL {
                let spec = PresetSpec::new(name).resolved();
                println!(
                    "  {:<18} dim {} lattice scale {}",
                    name.as_str(),
                    spec.params.dim.unwrap_or(2),
                    spec.params.lattice_scale.unwrap_or(1.0)
                );
            }
            println!("scenarios:");
            for (name, _) in pack::ALL {
                println!("  {name}");
            }
            ExitCode::SUCCESS
        }
    }
}
