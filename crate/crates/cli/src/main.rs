use std::path::PathBuf;
use std::process::ExitCode;

use cellhealth_cli::commands::{self, DEFAULT_BIN};
use cellhealth_cli::exit_code;
use cellhealth_cli::pipeline::{self, Layout, Overrides, RunConfig};
use cellhealth_models::soh::Mechanism;
use cellhealth_models::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cellhealth", version, about = "Aging-parameter identification and SOH estimation for LFP/graphite cells")]
struct Cli {
    /// Config file with `key = value` overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root holding dataset/, surrogate/, ident/, soh/ and eval/.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Independent SOH trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Use the full 5200-sample dataset.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the aging dataset.
    GenData {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train one stage; stages must run in order.
    Train { stage: Stage },
    /// Evaluate every stage on the test split.
    Eval,
    /// Identify aging parameters of a discharge CSV.
    Identify {
        input: PathBuf,
        /// Directory for theta.csv (default <out>/identify).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate the SOH of a discharge CSV.
    Estimate {
        input: PathBuf,
        /// Known SOH, to report the absolute error.
        #[arg(long)]
        soh_true: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Incremental-capacity curve of the fresh cell, optionally with one mechanism.
    Dqdv {
        #[arg(long)]
        perturb: Option<MechanismArg>,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long, default_value_t = DEFAULT_BIN)]
        bin: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fresh, LAM_NE, LAM_PE and LLI discharges side by side.
    Sensitivity {
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Stage {
    Surrogate,
    Ident,
    Soh,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MechanismArg {
    #[value(name = "lam_ne", alias = "lam-ne")]
    LamNe,
    #[value(name = "lam_pe", alias = "lam-pe")]
    LamPe,
    Lli,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::LamNe => Mechanism::LamNe,
            MechanismArg::LamPe => Mechanism::LamPe,
            MechanismArg::Lli => Mechanism::Lli,
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let n = match &cli.command {
        Command::GenData { n: Some(0) } => return Err(Error::Nn(cellhealth_nn::Error::Usage("--n must be at least 1".into()))),
        Command::GenData { n } => *n,
        _ => None,
    };
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        n,
        paper_scale: cli.paper_scale,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let layout = Layout::new(&cli.out);
    match cli.command {
        Command::GenData { .. } => {
            let m = pipeline::gen_data(&cfg, &layout)?;
            let kept = m.rows.iter().filter(|r| !r.filtered).count();
            println!("dataset: {kept} of {} samples kept in {}", m.rows.len(), layout.dataset().display());
            if let Some(w) = &m.warning {
                eprintln!("warning: {w}");
            }
        }
        Command::Train { stage: Stage::Surrogate } => {
            let reports = pipeline::train_surrogate_stage(&cfg, &layout)?;
            println!("surrogate: epochs {:?}", reports.iter().map(Vec::len).collect::<Vec<_>>());
        }
        Command::Train { stage: Stage::Ident } => {
            let h = pipeline::train_ident_stage(&cfg, &layout)?;
            if let (Some(first), Some(last)) = (h.first(), h.last()) {
                println!("identifier: {} epochs, val loss {:.3e} -> {:.3e}", h.len(), first.val_loss, last.val_loss);
            }
        }
        Command::Train { stage: Stage::Soh } => {
            let h = pipeline::train_soh_stage(&cfg, &layout)?;
            println!("soh: {} trials trained", h.len());
        }
        Command::Eval => {
            let m = pipeline::eval_stage(&cfg, &layout)?;
            println!(
                "recon RMSE {:.4} V, SOH RMSE {:.4} (mean of {}), latency {:.2} ms",
                m.recon_rmse,
                m.soh_rmse_mean(),
                m.soh_rmse.len(),
                1e3 * m.latency_s
            );
            println!("metrics written to {}", layout.eval().join(pipeline::METRICS_FILE).display());
        }
        Command::Identify { input, output } => {
            let r = commands::identify(&cfg, &layout, &input, output.as_deref())?;
            println!("theta {:?}, recon RMSE {:.4} V", r.theta, r.recon_rmse);
        }
        Command::Estimate { input, soh_true, output } => {
            let (soh, _) = commands::estimate(&cfg, &layout, &input, soh_true, output.as_deref())?;
            println!("SOH {soh:.4}");
        }
        Command::Dqdv { perturb, fraction, bin, output } => {
            let caps = commands::dqdv(&cfg, &layout, perturb.map(Mechanism::from), fraction, bin, output.as_deref())?;
            for (m, q) in caps {
                println!("{}: {q:.4} Ah", m.label());
            }
        }
        Command::Sensitivity { fraction, output } => {
            for c in commands::sensitivity(&cfg, &layout, fraction, output.as_deref())? {
                println!("{}: {:.4} Ah", c.mechanism.label(), c.record.capacity_ah);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
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
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
