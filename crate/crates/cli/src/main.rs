use std::path::{Path, PathBuf};
use std::process::ExitCode;

use axsynth::flow::{self, Artifacts, FlowConfig, Prepared};
use axsynth::netlist::{Netlist, NetlistFormat};
use axsynth::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "axsynth",
    version,
    about = "Bespoke and approximate gate-level synthesis of small ML classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize and synthesize the exact bespoke circuit.
    Synth(Common),
    /// Coefficient approximation plus gate pruning (MLP and SVM).
    Approx(Common),
    /// NSGA-II search over comparator thresholds and precisions (trees).
    Evolve(Common),
    /// Test-set accuracy, area and power of a circuit.
    Eval {
        #[command(flatten)]
        common: Common,
        /// JSON netlist to evaluate instead of the exact circuit.
        #[arg(long)]
        netlist: Option<PathBuf>,
    },
    /// Full flow for every model plus `report.json` and `summary.csv`.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Verilog,
    Json,
}

#[derive(Args)]
struct Common {
    /// Trained model JSON. Repeat for `report`.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    /// Dataset CSV, one per `--model` in the same order.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// JSON file mirroring the flow configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    netlist_format: Option<FormatArg>,
    #[arg(long)]
    calibration_mw_per_ge: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn config(&self) -> axsynth::Result<FlowConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                // The seed may come from the command line instead.
                let mut value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                if let (Some(seed), Some(obj)) = (self.seed, value.as_object_mut()) {
                    obj.insert("seed".into(), seed.into());
                }
                FlowConfig::from_json(&value.to_string())?
            }
            None => FlowConfig::with_seed(
                self.seed
                    .ok_or_else(|| Error::Config("a seed is required (--seed or config)".into()))?,
            ),
        };
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = Some(dir.clone());
        }
        if let Some(f) = self.netlist_format {
            cfg.netlist_format = match f {
                FormatArg::Verilog => NetlistFormat::Verilog,
                FormatArg::Json => NetlistFormat::Json,
            };
        }
        if let Some(c) = self.calibration_mw_per_ge {
            cfg.calibration_mw_per_ge = Some(c);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn prepare(&self, cfg: &FlowConfig, single: bool) -> axsynth::Result<Vec<Prepared>> {
        if self.model.len() != self.data.len() {
            return Err(Error::InvalidArgument(format!(
                "{} --model but {} --data arguments",
                self.model.len(),
                self.data.len()
            )));
        }
        if single && self.model.len() != 1 {
            return Err(Error::InvalidArgument("this command takes exactly one --model".into()));
        }
        self.model
            .iter()
            .zip(&self.data)
            .map(|(m, d)| Prepared::load(m, d, cfg))
            .collect()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::Equivalence { .. } => 3,
        _ => 2,
    }
}

fn write(a: &Artifacts, cfg: &FlowConfig) -> axsynth::Result<()> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    for path in a.write(&dir)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn load_netlist(path: &Path) -> axsynth::Result<Netlist> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Netlist::from_json(&text)
}

fn run(cli: Cli) -> axsynth::Result<()> {
    let (common, netlist) = match &cli.command {
        Command::Synth(c) | Command::Approx(c) | Command::Evolve(c) | Command::Report(c) => (c, None),
        Command::Eval { common, netlist } => (common, netlist.as_deref()),
    };
    let cfg = common.config()?;
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let single = !matches!(cli.command, Command::Report(_));
    let models = common.prepare(&cfg, single)?;
    let artifacts = match &cli.command {
        Command::Synth(_) => {
            let (out, a) = flow::cmd_synth(&models[0], &cfg)?;
            print_report(&out.report);
            a
        }
        Command::Approx(_) => {
            let (out, a) = flow::cmd_approx(&models[0], &cfg)?;
            print_report(&out.report);
            a
        }
        Command::Evolve(_) => {
            let (out, a) = flow::cmd_evolve(&models[0], &cfg)?;
            println!(
                "comparator area {:.1} -> {:.1} GE ({:.1}% gain), validation loss {:.2}pp",
                out.result.baseline_area,
                out.result.selected.area_proxy,
                out.comparator_area_gain_pct(),
                out.result.selected.accuracy_loss_pp
            );
            print_report(&out.report);
            a
        }
        Command::Eval { .. } => {
            let n = netlist.map(load_netlist).transpose()?;
            let (report, a) = flow::cmd_eval(&models[0], n.as_ref(), &cfg)?;
            print_report(&report);
            a
        }
        Command::Report(_) => {
            let (report, a) = flow::cmd_report(&models, &cfg)?;
            for m in &report.models {
                print_report(&m.approximated);
            }
            a
        }
    };
    write(&artifacts, &cfg)
}

fn print_report(r: &flow::EvalReport) {
    println!(
        "{}: accuracy {:.4}, area {:.1} GE, power {:.2}, area gain {:.1}%, power gain {:.1}%",
        r.model, r.accuracy_test, r.area_proxy, r.power_proxy, r.area_gain_pct, r.power_gain_pct
    );
    if let Some(b) = &r.battery {
        println!(
            "  estimated {:.3} mW, feasible under: {:?}",
            b.estimated_mw, b.feasible_under
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let io = Error::Io {
            path: "x".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(exit_code(&io), 1);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Equivalence { rows: 4, mismatches: 1 }), 3);
    }
}
