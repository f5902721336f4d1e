//! `ahg`: curvature reports, identity checks, classification, twistor sweeps
//! and conformal solves on almost Hermitian charts.

mod commands;
mod manifold;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use ahg_core::twistor::TwistorSign;
use ahg_core::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Outcome, SolveArgs};
use manifold::ManifoldRef;
use output::Format;

#[derive(Debug, Parser)]
#[command(name = "ahg", version, about = "Numerical almost Hermitian geometry on coordinate charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Number of seeded sample points.
    #[arg(long, global = true, default_value_t = 50)]
    points: usize,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Overrides the pass tolerance of the command.
    #[arg(long, global = true, value_parser = parse_tol)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_manifold(s: &str) -> std::result::Result<ManifoldRef, String> {
    s.parse().map_err(|e: ahg_core::GeomError| e.to_string())
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(_) => Err("tolerance must be a finite non-negative number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_sign(s: &str) -> std::result::Result<TwistorSign, String> {
    s.parse().map_err(|e: ahg_core::GeomError| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curvature scalars and norms at sample points.
    Report {
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
    },
    /// Check pointwise identities; `all` or a comma-separated list of ids.
    Verify {
        identities: String,
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
    },
    /// Gray-Hervella class from sampled sup-norms.
    Classify {
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
    },
    /// Closed-form and generic twistor scalars over a range of fiber scales.
    TwistorSweep {
        base: String,
        #[arg(value_parser = parse_sign)]
        sign: TwistorSign,
        #[arg(allow_negative_numbers = true)]
        t_min: f64,
        #[arg(allow_negative_numbers = true)]
        t_max: f64,
        steps: usize,
    },
    /// Solve the mixed equation `(nλ+μ) Δ^Ch f = Γ − (λS₁ + μS₂)` on a torus chart.
    Solve {
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
        #[arg(allow_negative_numbers = true)]
        lambda: f64,
        #[arg(allow_negative_numbers = true)]
        mu: f64,
        resolution: usize,
        /// Where to write the solution grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Fourier cutoff of the Gauduchon factor search.
        #[arg(long, default_value_t = 2)]
        modes: usize,
    },
    /// Search for a conformal factor making the Lee form co-closed.
    Gauduchon {
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
        #[arg(long, default_value_t = 2)]
        modes: usize,
    },
    /// The conformal invariant `Γ_{λ,μ}` of a compact chart.
    Gamma {
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
        #[arg(allow_negative_numbers = true)]
        lambda: f64,
        #[arg(allow_negative_numbers = true)]
        mu: f64,
        /// Quadrature nodes per axis.
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 2)]
        modes: usize,
    },
    /// Monte Carlo spherical average of holomorphic sectional curvature.
    Berger {
        #[arg(value_parser = parse_manifold)]
        manifold: ManifoldRef,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Report { .. } => "report",
            Command::Verify { .. } => "verify",
            Command::Classify { .. } => "classify",
            Command::TwistorSweep { .. } => "twistor-sweep",
            Command::Solve { .. } => "solve",
            Command::Gauduchon { .. } => "gauduchon",
            Command::Gamma { .. } => "gamma",
            Command::Berger { .. } => "berger",
        }
    }

    fn arguments(&self) -> Value {
        match self {
            Command::Report { manifold } | Command::Classify { manifold } => json!({ "manifold": manifold.to_string() }),
            Command::Verify { identities, manifold } => {
                json!({ "identities": identities, "manifold": manifold.to_string() })
            }
            Command::TwistorSweep { base, sign, t_min, t_max, steps } => {
                json!({ "base": base, "sign": sign.to_string(), "t_min": t_min, "t_max": t_max, "steps": steps })
            }
            Command::Solve { manifold, lambda, mu, resolution, grid, modes } => json!({
                "manifold": manifold.to_string(), "lambda": lambda, "mu": mu, "resolution": resolution,
                "grid": grid.as_ref().map(|p| p.display().to_string()), "modes": modes,
            }),
            Command::Gauduchon { manifold, modes } => json!({ "manifold": manifold.to_string(), "modes": modes }),
            Command::Gamma { manifold, lambda, mu, nodes, modes } => json!({
                "manifold": manifold.to_string(), "lambda": lambda, "mu": mu, "nodes": nodes, "modes": modes,
            }),
            Command::Berger { manifold, samples } => json!({ "manifold": manifold.to_string(), "samples": samples }),
        }
    }
}

fn config(cli: &Cli) -> Value {
    let c = &cli.common;
    let mut v = json!({
        "command": cli.command.name(),
        "points": c.points,
        "seed": c.seed,
        "tol": c.tol,
        "format": c.format,
        "out": c.out.as_ref().map(|p| p.display().to_string()),
    });
    if let (Value::Object(map), Value::Object(args)) = (&mut v, cli.command.arguments()) {
        map.extend(args);
    }
    v
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let c = &cli.common;
    match &cli.command {
        Command::Report { manifold } => commands::report(&manifold.load()?, c.points, c.seed),
        Command::Verify { identities, manifold } => commands::verify(&manifold.load()?, identities, c.points, c.seed, c.tol),
        Command::Classify { manifold } => commands::classify(&manifold.load()?, c.points, c.seed, c.tol),
        Command::TwistorSweep { base, sign, t_min, t_max, steps } => {
            commands::twistor_sweep(base, *sign, *t_min, *t_max, *steps, c.seed, c.tol)
        }
        Command::Solve { manifold, lambda, mu, resolution, grid, modes } => {
            let args = SolveArgs { lambda: *lambda, mu: *mu, resolution: *resolution, modes: *modes, grid: grid.as_deref() };
            commands::solve(&manifold.load()?, &manifold.to_string(), &args, c.points, c.seed, c.tol)
        }
        Command::Gauduchon { manifold, modes } => commands::gauduchon(&manifold.load()?, *modes, c.tol),
        Command::Gamma { manifold, lambda, mu, nodes, modes } => {
            commands::gamma(&manifold.load()?, *lambda, *mu, *nodes, *modes)
        }
        Command::Berger { manifold, samples } => commands::berger(&manifold.load()?, c.points, *samples, c.seed),
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> io::Result<()> {
    let cfg = config(cli);
    match &cli.common.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            outcome.report.render(cli.common.format, &cfg, &mut w)?;
            w.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            outcome.report.render(cli.common.format, &cfg, &mut w)?;
            w.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&cli, &outcome) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
