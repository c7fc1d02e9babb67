use std::path::PathBuf;
use std::process::ExitCode;

use biot_apost::harness::{emit_level, emit_tables, run_study_with, StudyConfig, StudyKind, TauRule};
use biot_apost::{Diagonal, Error};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "biot-apost", version, about = "Biot consolidation solver with a posteriori error indicators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    CoupledSim,
    CoupledFixed,
    Heat,
}

#[derive(Clone, Copy, ValueEnum)]
enum CellDiagonal {
    Rising,
    Falling,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write CSV tables.
    Run {
        #[arg(long, value_enum)]
        study: Option<Study>,
        #[arg(long)]
        kmin: Option<u32>,
        #[arg(long)]
        kmax: Option<u32>,
        /// Time step as a multiple of the mesh size.
        #[arg(long, conflicts_with = "tau")]
        tau_ratio: Option<f64>,
        /// Fixed time step.
        #[arg(long)]
        tau: Option<f64>,
        /// Final time.
        #[arg(long = "T")]
        final_time: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add data oscillation to the aggregate indicator.
        #[arg(long)]
        include_data_osc: bool,
        /// Use the unsquared divergence term in the flux norm.
        #[arg(long)]
        wnorm_unsquared: bool,
        /// Drop the alpha factor from the mass residual.
        #[arg(long)]
        e2_no_alpha: bool,
        /// Cell diagonal of the uniform mesh.
        #[arg(long, value_enum)]
        diagonal: Option<CellDiagonal>,
        /// Fixed-step study at tau = 5e-5, T = 1, k = 1..6.
        #[arg(long)]
        full_scale: bool,
        /// File of `key = value` lines; command-line options take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn build_config(cmd: Command) -> Result<StudyConfig, Error> {
    let Command::Run {
        study,
        kmin,
        kmax,
        tau_ratio,
        tau,
        final_time,
        out,
        include_data_osc,
        wnorm_unsquared,
        e2_no_alpha,
        diagonal,
        full_scale,
        config,
    } = cmd;
    let kind = study.map(|s| match s {
        Study::CoupledSim => StudyKind::CoupledSimultaneous,
        Study::CoupledFixed => StudyKind::CoupledFixedTau,
        Study::Heat => StudyKind::Heat,
    });
    let mut cfg = match (&config, kind) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            let mut c = StudyConfig::from_text(&text)?;
            if let Some(k) = kind {
                if k != c.study {
                    c = StudyConfig::for_study(k).apply_text(&text)?;
                    c.study = k;
                }
            }
            c
        }
        (None, Some(StudyKind::CoupledFixedTau)) if full_scale => StudyConfig::full_scale_fixed(),
        (None, Some(k)) => StudyConfig::for_study(k),
        (None, None) => return Err(Error::Config("either --study or --config is required".into())),
    };
    if let Some(k) = kmin {
        cfg.k_min = k;
    }
    if let Some(k) = kmax {
        cfg.k_max = k;
    }
    if let Some(c) = tau_ratio {
        cfg.tau = TauRule::Ratio(c);
    }
    if let Some(t) = tau {
        cfg.tau = TauRule::Fixed(t);
    }
    if let Some(t) = final_time {
        cfg.final_time = t;
    }
    if out.is_some() {
        cfg.out = out;
    }
    cfg.include_data |= include_data_osc;
    cfg.squared_div &= !wnorm_unsquared;
    cfg.e2_alpha &= !e2_no_alpha;
    if let Some(d) = diagonal {
        cfg.diagonal = match d {
            CellDiagonal::Rising => Diagonal::Rising,
            CellDiagonal::Falling => Diagonal::Falling,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let outcome = run_study_with(&cfg, |level| {
        eprintln!(
            "k={} tau={} steps={} E={:.4} Est={:.4}",
            level.k, level.tau, level.steps, level.error, level.estimator
        );
        emit_level(cfg.study, level, &out)
    });
    let (result, failure) = match outcome {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    if let Err(e) = emit_tables(&result, &out) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match failure {
        None => {
            print!("{}", biot_apost::harness::summary_text(&result));
            ExitCode::SUCCESS
        }
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
