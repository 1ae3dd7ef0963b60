//! `cmc`: batch front end for profile, period and indicial sweeps, matching
//! enumeration, gluing experiments and decay reports.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cmc_core::io::write_json;
use cmc_core::CmcError;

use commands::{Output, Payload};
use config::{header, DModel, Format, RunConfig};

/// Default output directory when `--out` is absent.
const OUT_DIR_ENV: &str = "CMC_OUT_DIR";

#[derive(Parser)]
#[command(name = "cmc", version, about = "Delaunay profiles, Jacobi fields, matching and gluing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile σ, σ', κ of one Delaunay surface, or its mesh.
    Profile(Flags),
    /// Turning point, half-period, period and dT/dτ over a τ range.
    Periods(Flags),
    /// Monodromy traces and indicial roots γ_{τ,j} for j = 0..=j-max.
    Indicial(Flags),
    /// Solutions (n, m, τ) of the matching condition.
    Match(Flags),
    /// A glued assembly: genus, necks, curvature deviations, extended fields.
    Glue(Flags),
    /// Decay fits of curvature deviations and extension residuals along n.
    Report(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Profile(_) => "profile",
            Command::Periods(_) => "periods",
            Command::Indicial(_) => "indicial",
            Command::Match(_) => "match",
            Command::Glue(_) => "glue",
            Command::Report(_) => "report",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Profile(f)
            | Command::Periods(f)
            | Command::Indicial(f)
            | Command::Match(f)
            | Command::Glue(f)
            | Command::Report(f) => f,
        }
    }
}

#[derive(Args, Clone, Debug)]
struct Flags {
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, visible_alias = "tau-min", allow_hyphen_values = true)]
    tau_lo: Option<f64>,
    #[arg(long, visible_alias = "tau-max", allow_hyphen_values = true)]
    tau_hi: Option<f64>,
    /// Number of τ values in a range, endpoints included.
    #[arg(long)]
    steps: Option<usize>,
    /// Periods of σ to integrate (profile).
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_lo: Option<usize>,
    #[arg(long)]
    n_hi: Option<usize>,
    #[arg(long)]
    j_max: Option<u32>,
    /// Nodes per period of σ.
    #[arg(long)]
    grid_s: Option<usize>,
    /// Nodes in θ.
    #[arg(long)]
    grid_theta: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// JSON file with the offsets d0, d0_bar, d1.
    #[arg(long)]
    d_model: Option<String>,
    /// JSON configuration, or any earlier output; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; defaults to $CMC_OUT_DIR/<command>.<format>, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            tau: self.tau,
            tau_lo: self.tau_lo,
            tau_hi: self.tau_hi,
            steps: self.steps,
            periods: self.periods,
            k: self.k,
            n: self.n,
            n_lo: self.n_lo,
            n_hi: self.n_hi,
            j_max: self.j_max,
            grid_s: self.grid_s,
            grid_theta: self.grid_theta,
            tol: self.tol,
            d_model: self.d_model.clone().map(DModel::Path),
            graph: None,
            format: self.format,
        }
    }
}

fn resolve(command: &Command) -> Result<RunConfig> {
    let flags = command.flags();
    let file = match &flags.config {
        Some(p) => RunConfig::from_file(p, command.name())?,
        None => RunConfig::default(),
    };
    Ok(file.overlay(flags.to_config()))
}

fn run(command: &Command) -> Result<()> {
    let cfg = resolve(command)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(command.flags().jobs)
        .build()
        .context("starting the worker pool")?;
    let out = pool.install(|| match command {
        Command::Profile(_) => commands::profile(&cfg),
        Command::Periods(_) => commands::periods(&cfg),
        Command::Indicial(_) => commands::indicial(&cfg),
        Command::Match(_) => commands::matching(&cfg),
        Command::Glue(_) => commands::glue(&cfg),
        Command::Report(_) => commands::report(&cfg),
    })?;
    let mut buf = Vec::new();
    render(command.name(), &out, &mut buf)?;
    let dest = command.flags().out.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|d| Path::new(&d).join(format!("{}.{}", command.name(), out.format.extension())))
    });
    match dest {
        Some(path) => std::fs::write(&path, &buf).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&buf)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn render(command: &str, out: &Output, w: &mut Vec<u8>) -> Result<()> {
    let line = header(command, &out.config)?;
    match (&out.payload, out.format) {
        (Payload::Table { header, rows }, _) => {
            writeln!(w, "# {line}")?;
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(header)?;
            for r in rows {
                csv.write_record(r)?;
            }
            csv.flush()?;
        }
        (Payload::Json(v), _) => {
            write_json(&mut *w, command, &out.config, v)?;
        }
        (Payload::Mesh(m), Format::Ply) => m.write_ply(w, &line)?,
        (Payload::Mesh(m), _) => m.write_obj(w, &line)?,
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(c) = e.downcast_ref::<CmcError>() {
        c.kind()
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else if e.downcast_ref::<serde_json::Error>().is_some() {
        "json"
    } else {
        "invalid_argument"
    }
}

fn report_error(kind: &str, message: String) {
    let doc = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{doc}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end().to_owned());
            return ExitCode::from(2);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(error_kind(&e), format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
