//! `pandora`: reservation-price search on the command line.
//!
//! Subcommands: `solve` (thresholds and inspection order), `simulate`
//! (one trace or a Monte Carlo estimate), `eval` (expected utility by
//! oracle), `perturb` (bounded-distance perturbation of an instance file),
//! `regret` (true vs believed priors), `sweep` (robustness grid to CSV),
//! and `check` (the full verification suite).
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 verification-suite
//! failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pandora_core::checks;
use pandora_core::distribution::{kolmogorov_distance, PerturbMode};
use pandora_core::io::{
    format_sig, instance_from_json, instance_to_json, sweep_config_from_json, trace_record,
    SIG_DIGITS,
};
use pandora_core::policy::{
    capped_benchmark, expected_utility_exact, expected_utility_mc, run_policy, ThresholdPolicy,
};
use pandora_core::reservation::{thresholds, Instance};
use pandora_core::robustness::{
    evaluate_pair, perturb_instance, reports_to_csv, run_sweep, RobustnessReport,
};

#[derive(Parser)]
#[command(
    name = "pandora",
    version,
    about = "Sequential box-opening search: reservation prices, policy simulation, and robustness to inaccurate priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-box reservation prices and the inspection order.
    Solve {
        /// Instance file (versioned JSON).
        instance: PathBuf,
    },
    /// Run the policy on given values, or estimate its utility by Monte
    /// Carlo.
    Simulate {
        instance: PathBuf,
        /// Seed for Monte Carlo value draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of Monte Carlo trials (at least 2).
        #[arg(long, conflicts_with = "values")]
        trials: Option<u32>,
        /// Comma-separated realized values, one per box, each in [0, 1].
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Expected utility of the reservation-price policy.
    Eval {
        instance: PathBuf,
        #[arg(long, value_enum)]
        oracle: Oracle,
        /// Trials for the Monte Carlo oracle.
        #[arg(long, default_value_t = 100_000)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a perturbed copy of an instance, every box within epsilon in
    /// Kolmogorov distance.
    Perturb {
        instance: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// shift_down, shift_up, or random_mix.
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Utility lost by planning against believed priors instead of true
    /// ones.
    Regret {
        true_instance: PathBuf,
        believed_instance: PathBuf,
    },
    /// Run a robustness sweep described by a JSON config and write CSV.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full verification suite; exit 2 on any failure.
    Check {
        #[arg(long, default_value_t = checks::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Exact,
    Capped,
    Mc,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    instance_from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn sig(x: f64) -> String {
    format_sig(x, SIG_DIGITS)
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Solve { instance } => {
            let inst = read_instance(&instance)?;
            let sigma = thresholds(&inst);
            let policy = ThresholdPolicy::new(sigma.clone()).expect("thresholds are finite");
            let rendered: Vec<String> = sigma.iter().map(|s| sig(*s)).collect();
            let order: Vec<String> = policy.order().iter().map(|i| (i + 1).to_string()).collect();
            println!("sigma: {}", rendered.join(","));
            println!("order: {}", order.join(","));
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            instance,
            seed,
            trials,
            values,
        } => {
            let inst = read_instance(&instance)?;
            let policy = ThresholdPolicy::from_instance(&inst);
            match (trials, values) {
                (None, Some(values)) => {
                    if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(format!("value {bad} outside [0, 1]"));
                    }
                    let trace =
                        run_policy(&policy, &inst.costs(), &values).map_err(|e| e.to_string())?;
                    println!("{}", trace_record(&trace));
                    Ok(ExitCode::SUCCESS)
                }
                (Some(trials), None) => {
                    if trials < 2 {
                        return Err("--trials must be at least 2".into());
                    }
                    let est = expected_utility_mc(&policy, &inst, trials, seed)
                        .map_err(|e| e.to_string())?;
                    println!(
                        "mean={} stderr={} trials={} ci95_low={} ci95_high={}",
                        sig(est.mean),
                        sig(est.stderr),
                        est.trials,
                        sig(est.ci95.0),
                        sig(est.ci95.1)
                    );
                    Ok(ExitCode::SUCCESS)
                }
                _ => Err("exactly one of --values or --trials is required".into()),
            }
        }
        Command::Eval {
            instance,
            oracle,
            trials,
            seed,
        } => {
            let inst = read_instance(&instance)?;
            let policy = ThresholdPolicy::from_instance(&inst);
            match oracle {
                Oracle::Exact => {
                    let w = expected_utility_exact(&policy, &inst).map_err(|e| e.to_string())?;
                    println!("utility={}", sig(w));
                }
                Oracle::Capped => {
                    let w = capped_benchmark(&inst).map_err(|e| e.to_string())?;
                    println!("utility={}", sig(w));
                }
                Oracle::Mc => {
                    if trials < 2 {
                        return Err("--trials must be at least 2".into());
                    }
                    let est = expected_utility_mc(&policy, &inst, trials, seed)
                        .map_err(|e| e.to_string())?;
                    println!(
                        "utility={} stderr={} trials={}",
                        sig(est.mean),
                        sig(est.stderr),
                        est.trials
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Perturb {
            instance,
            epsilon,
            mode,
            seed,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let mode: PerturbMode = mode
                .parse()
                .map_err(|e: pandora_core::Error| e.to_string())?;
            let perturbed =
                perturb_instance(&inst, epsilon, mode, seed).map_err(|e| e.to_string())?;
            let max_dk = inst
                .boxes()
                .iter()
                .zip(perturbed.boxes())
                .map(|(a, b)| kolmogorov_distance(a.dist(), b.dist()))
                .fold(0.0f64, f64::max);
            std::fs::write(&out, instance_to_json(&perturbed))
                .map_err(|e| format!("{}: {e}", out.display()))?;
            println!(
                "wrote {} (boxes={}, max_dk={})",
                out.display(),
                perturbed.len(),
                sig(max_dk)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Regret {
            true_instance,
            believed_instance,
        } => {
            let truth = read_instance(&true_instance)?;
            let believed = read_instance(&believed_instance)?;
            // The ball radius is not an input here; infer it as the
            // largest per-box distance between the two files.
            let epsilon = truth
                .boxes()
                .iter()
                .zip(believed.boxes())
                .map(|(a, b)| kolmogorov_distance(a.dist(), b.dist()))
                .fold(0.0f64, f64::max);
            let report = evaluate_pair(&truth, &believed, epsilon, "manual", 0)
                .map_err(|e| e.to_string())?;
            println!("{}", report_text(&report));
            println!("{}", RobustnessReport::csv_header());
            println!("{}", report.csv_row());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| format!("{}: {e}", config.display()))?;
            let config = sweep_config_from_json(&text).map_err(|e| e.to_string())?;
            let reports = run_sweep(&config).map_err(|e| e.to_string())?;
            std::fs::write(&out, reports_to_csv(&reports))
                .map_err(|e| format!("{}: {e}", out.display()))?;
            println!("wrote {} reports to {}", reports.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { seed } => {
            let outcomes = checks::run_all(seed);
            for outcome in &outcomes {
                println!("{}", outcome.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed > 0 {
                eprintln!("{failed} suite(s) failed");
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

fn report_text(report: &RobustnessReport) -> String {
    let mut line = String::new();
    let _ = write!(
        line,
        "n={} epsilon={} stability_gap={} regret={} bound={} gap_ratio={} regret_ratio={}",
        report.n,
        format_sig(report.epsilon, SIG_DIGITS),
        format_sig(report.stability_gap, SIG_DIGITS),
        format_sig(report.regret, SIG_DIGITS),
        format_sig(report.bound, SIG_DIGITS),
        format_sig(report.gap_ratio, SIG_DIGITS),
        format_sig(report.regret_ratio, SIG_DIGITS)
    );
    line
}
