mod commands;
mod input;
mod svg;

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use mtp_core::config::{DEFAULT_MAX_LEVEL, MAX_CELLS_ENV};
use mtp_core::{MtpError, Result};

use commands::{LipArgs, Report, SimulateArgs};

#[derive(Parser)]
#[command(name = "mtp-lab", version, about = "Finite-resolution experiments on limsup sets and Hausdorff contents")]
struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed recorded in the output; replaces the seed of geometric families.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cell budget for masks and solvers (same as MTP_LAB_MAX_CELLS).
    #[arg(long, global = true)]
    cell_budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dimension number s(t) of a rectangle family, or the limsup of a sequence.
    Dimension {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<String>,
        /// Exact rational arithmetic; entries may be written as `p/q`.
        #[arg(long)]
        exact: bool,
        /// JSON sequence description.
        #[arg(long, conflicts_with_all = ["a", "llvz"])]
        sequence: Option<PathBuf>,
        /// The two-phase example family with parameter `t`.
        #[arg(long, conflicts_with = "a")]
        llvz: Option<f64>,
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        /// Per-n values as CSV (`-` for stdout).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lower and upper f-content bounds of a mask.
    Content {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long)]
        depth: u32,
    },
    /// Cantor-type construction inside a ball from a shrunk family.
    Simulate {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        depth: u32,
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        #[arg(long)]
        radius: f64,
        /// `sub_ball` or `sub_grid:K`.
        #[arg(long, default_value = "sub_ball")]
        shrink: String,
        #[arg(long)]
        level_cap: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Content ratios of a truncated limsup set on dyadic probe cubes.
    VerifyLip {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        end: Option<usize>,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value = "1")]
        probe_levels: String,
        /// Comma-separated exponents for a power-law sweep.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Largest admissible kappa from sampled data.
    Kappa {
        #[arg(long)]
        input: PathBuf,
    },
    /// Finite-scale critical exponent of a truncated limsup set.
    Estimate {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        end: Option<usize>,
        #[arg(long)]
        depth: u32,
        /// `lo:hi:step` or a comma-separated list.
        #[arg(long, default_value = "0.05:2:0.05")]
        s_grid: String,
    },
    /// Disjoint sub-collections of a ball family.
    Cover {
        #[arg(long)]
        family: PathBuf,
        /// `five-r` or `kgb`.
        #[arg(long, default_value = "five-r")]
        mode: String,
        #[arg(long, allow_hyphen_values = true, default_value = "0.5")]
        center: String,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        /// Smallest admissible index for `kgb`.
        #[arg(long, default_value_t = 1)]
        g: usize,
    },
}

fn check_depth(depth: u32) -> Result<u32> {
    if depth > DEFAULT_MAX_LEVEL {
        return Err(MtpError::Resource(format!("depth {depth} exceeds the maximum {DEFAULT_MAX_LEVEL}")));
    }
    Ok(depth)
}

fn io_err(path: &Path, e: io::Error) -> MtpError {
    MtpError::Invalid(format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<Report> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Dimension { a, t, delta, kappa, exact, sequence, llvz, n_max, csv } => {
            if sequence.is_some() || llvz.is_some() {
                let mut sink: Option<Box<dyn Write>> = match &csv {
                    None => None,
                    Some(p) if p.as_os_str() == "-" => Some(Box::new(io::stdout())),
                    Some(p) => Some(Box::new(File::create(p).map_err(|e| io_err(p, e))?)),
                };
                return commands::dimension_sequence(
                    sequence.as_deref(),
                    llvz,
                    n_max,
                    sink.as_mut().map(|w| w.as_mut() as &mut dyn Write),
                    seed,
                );
            }
            let (Some(a), Some(t), Some(delta)) = (a, t, delta) else {
                return Err(MtpError::Invalid("dimension needs --a, --t and --delta, or a sequence".into()));
            };
            let kappa = kappa.unwrap_or_else(|| vec!["0"; a.split(',').count()].join(","));
            commands::dimension(&a, &t, &delta, &kappa, exact, seed)
        }
        Command::Content { set, f, depth } => commands::content(&set, &f, check_depth(depth)?, seed),
        Command::Simulate { family, f, g, depth, center, radius, shrink, level_cap, svg } => {
            commands::simulate(SimulateArgs {
                family: &family,
                f: &f,
                g: &g,
                depth: check_depth(depth)?,
                center: &center,
                radius,
                shrink: &shrink,
                level_cap,
                svg: svg.as_ref(),
                seed: cli.seed,
            })
        }
        Command::VerifyLip { family, f, n, end, depth, probe_levels, sweep } => commands::verify_lip(LipArgs {
            family: &family,
            f: &f,
            n,
            end,
            depth: check_depth(depth)?,
            probe_levels: &probe_levels,
            sweep: sweep.as_deref(),
            seed: cli.seed,
        }),
        Command::Kappa { input } => commands::kappa(&input, seed),
        Command::Estimate { family, n, end, depth, s_grid } => {
            commands::estimate(&family, n, end, check_depth(depth)?, &s_grid, cli.seed)
        }
        Command::Cover { family, mode, center, radius, g } => {
            commands::cover(&family, &center, radius, &mode, g, cli.seed)
        }
    }
}

fn exit_code(e: &MtpError) -> u8 {
    match e {
        MtpError::Resource(_)
        | MtpError::Convergence { .. }
        | MtpError::Construction(_)
        | MtpError::Estimation(_) => 3,
        MtpError::Domain(_) | MtpError::Precondition(_) | MtpError::Invalid(_) => 2,
    }
}

fn fail(e: &MtpError) -> ExitCode {
    let obj = json!({"error": e.kind(), "message": e.to_string()});
    eprintln!("{obj}");
    ExitCode::from(exit_code(e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(&MtpError::Invalid(e.kind().to_string()));
        }
    };
    if let Some(n) = cli.cell_budget {
        std::env::set_var(MAX_CELLS_ENV, n.to_string());
    }
    let out = cli.out.clone();
    let report = match run(cli) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let mut text = serde_json::to_string_pretty(&report.to_json()).expect("JSON values serialize");
    text.push('\n');
    let written = match &out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| MtpError::Invalid(e.to_string())),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
