//! Batch front end: `spectrum`, `coherent`, `stats` and `verify` subcommands.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on usage or
//! domain errors.

pub mod output;
pub mod verify;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{spectrum, FockTruncation};
use crate::coherent::{amplitudes, domain_radius, eigen_residual};
use crate::error::{Error, Result};
use crate::geometry::metric_w;
use crate::qcore::{DeformParams, LIMIT_Q1_OFFSET};
use crate::statistics::stats_point;

pub use output::{Cell, OutputFormat, Table};
pub use verify::{run_verify, CheckStatus, VerifyOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qdeform",
    version,
    about = "Deformed Heisenberg algebra: spectra, coherent states, statistics and metric"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oscillator levels with position/momentum variances.
    Spectrum,
    /// Amplitudes of a truncated coherent state.
    Coherent,
    /// Mean number, second moment, Mandel Q and metric factor W on an x-grid.
    Stats,
    /// Run the identity suite and report one outcome per check.
    Verify,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Deformation parameter, positive and away from 1.
    #[arg(
        long,
        global = true,
        default_value_t = 2.0,
        allow_negative_numbers = true
    )]
    pub q: f64,
    #[arg(
        long,
        global = true,
        default_value_t = 1.0,
        allow_negative_numbers = true
    )]
    pub l: f64,
    #[arg(
        long,
        global = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub lambda: f64,
    /// Number of retained Fock states.
    #[arg(long, global = true, default_value_t = 64)]
    pub dim: usize,
    /// Highest level for `spectrum`.
    #[arg(long, global = true, default_value_t = 10)]
    pub nmax: u64,
    /// Coherent-state label, real part.
    #[arg(
        long = "z-re",
        global = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub z_re: f64,
    #[arg(
        long = "z-im",
        global = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub z_im: f64,
    /// Lower end of the x = |z|^2 grid.
    #[arg(long = "x-min", global = true, default_value_t = 0.0)]
    pub x_min: f64,
    /// Defaults to R/2 on a finite disk and 2 otherwise.
    #[arg(long = "x-max", global = true)]
    pub x_max: Option<f64>,
    #[arg(long, global = true, default_value_t = 11)]
    pub points: usize,
    #[arg(long = "log-grid", global = true)]
    pub log_grid: bool,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Override a named tolerance, e.g. `--tol moments_lattice=1e-9`.
    #[arg(long = "tol", global = true, value_parser = parse_tolerance)]
    pub tol: Vec<(String, f64)>,
    /// q -> 1 cross-check mode: use q = 1 + 1e-8.
    #[arg(long = "limit-q1", global = true)]
    pub limit_q1: bool,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the randomized label pairs in `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub hbar: f64,
}

fn parse_tolerance(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value
        .parse()
        .map_err(|e| format!("bad tolerance value `{value}`: {e}"))?;
    if !(value.is_finite() && value > 0.0) {
        return Err(format!("tolerance `{name}` must be positive, got {value}"));
    }
    Ok((name.trim().to_string(), value))
}

/// Sampling of `x = |z|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                if i + 1 == self.count {
                    self.max
                } else if self.log {
                    (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect()
    }
}

/// Fully validated configuration shared by all subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: DeformParams,
    pub dim: FockTruncation,
    pub nmax: u64,
    pub z: Complex64,
    pub grid: GridSpec,
    pub output_format: OutputFormat,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
    pub limit_q1: bool,
}

impl RunConfig {
    pub fn from_args(args: &CommonArgs) -> Result<Self> {
        let params = if args.limit_q1 {
            DeformParams::near_unit(args.l, args.lambda, LIMIT_Q1_OFFSET)?
        } else {
            DeformParams::new(args.q, args.l, args.lambda)?
        };
        let dim = FockTruncation::new(args.dim)?;
        for (name, v) in [
            ("mass", args.mass),
            ("omega", args.omega),
            ("hbar", args.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        let disk = domain_radius(&params);
        let x_max = args.x_max.unwrap_or(if disk.is_bounded() {
            0.5 * disk.radius
        } else {
            2.0
        });
        let grid = GridSpec {
            min: args.x_min,
            max: x_max,
            count: args.points,
            log: args.log_grid,
        };
        if grid.count == 0 {
            return Err(Error::Domain("grid needs at least one point".into()));
        }
        if !(grid.min >= 0.0 && grid.max >= grid.min) {
            return Err(Error::Domain(format!(
                "grid bounds must satisfy 0 <= x-min <= x-max, got [{}, {}]",
                grid.min, grid.max
            )));
        }
        if grid.log && grid.min <= 0.0 {
            return Err(Error::Domain("a log grid needs x-min > 0".into()));
        }
        if !disk.admits(grid.max) {
            return Err(Error::Domain(format!(
                "grid maximum x = {} escapes the convergence disk (R = {})",
                grid.max, disk.radius
            )));
        }
        let mut tolerances = verify::default_tolerances();
        for (name, value) in &args.tol {
            if !tolerances.contains_key(name) {
                return Err(Error::Domain(format!(
                    "unknown tolerance `{name}`; known: {}",
                    tolerances.keys().cloned().collect::<Vec<_>>().join(", ")
                )));
            }
            tolerances.insert(name.clone(), *value);
        }
        Ok(Self {
            params,
            dim,
            nmax: args.nmax,
            z: Complex64::new(args.z_re, args.z_im),
            grid,
            output_format: args.format,
            tolerances,
            seed: args.seed,
            mass: args.mass,
            omega: args.omega,
            hbar: args.hbar,
            limit_q1: args.limit_q1,
        })
    }

    fn describe(&self, table: &mut Table) {
        table.meta_num("q", self.params.q());
        table.meta_num("l", self.params.l());
        table.meta_num("lambda", self.params.lambda());
        table.meta_num("scale", self.params.scale());
        table.meta_num("radius", domain_radius(&self.params).radius);
        if self.limit_q1 {
            table.meta("mode", "limit_q1");
        }
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Table> {
    let rows = spectrum(&cfg.params, cfg.nmax, cfg.hbar * cfg.omega)?;
    let mut t = Table::new(["n", "energy", "var_x", "var_p", "uncertainty"]);
    cfg.describe(&mut t);
    t.meta_num("hbar", cfg.hbar);
    t.meta_num("mass", cfg.mass);
    t.meta_num("omega", cfg.omega);
    t.meta(
        "units",
        "energy in units set by hbar*omega; uncertainty is dX*dP",
    );
    let x_unit = cfg.hbar / (2.0 * cfg.mass * cfg.omega);
    let p_unit = cfg.mass * cfg.hbar * cfg.omega / 2.0;
    for row in rows {
        let vx = x_unit * row.var_x;
        let vp = p_unit * row.var_p;
        t.push(vec![
            Cell::Int(row.n),
            Cell::Num(row.energy),
            Cell::Num(vx),
            Cell::Num(vp),
            Cell::Num((vx * vp).sqrt()),
        ]);
    }
    Ok(t)
}

pub fn cmd_coherent(cfg: &RunConfig, z: Complex64) -> Result<Table> {
    let state = amplitudes(&cfg.params, z, cfg.dim)?;
    let residual = eigen_residual(&cfg.params, z, cfg.dim)?;
    let mut t = Table::new(["n", "re", "im", "prob"]);
    cfg.describe(&mut t);
    t.meta_num("z_re", z.re);
    t.meta_num("z_im", z.im);
    t.meta("dim", cfg.dim.dim());
    t.meta_num("normalization", state.norm_value);
    t.meta_num("tail_residual", state.tail_residual);
    t.meta_num("tail_bound", state.tail_bound);
    t.meta_num("eigen_residual", residual);
    if state.truncation_warning() {
        t.meta(
            "warning",
            "truncation discards more than 1e-10 of the probability",
        );
    }
    for (n, c) in state.amplitudes.iter().enumerate() {
        t.push(vec![
            Cell::Int(n as u64),
            Cell::Num(c.re),
            Cell::Num(c.im),
            Cell::Num(c.norm_sqr()),
        ]);
    }
    Ok(t)
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<Table> {
    let xs = cfg.grid.points();
    let rows = xs
        .par_iter()
        .map(|&x| -> Result<Vec<Cell>> {
            let st = stats_point(&cfg.params, x)?;
            let w = metric_w(&cfg.params, x)?;
            Ok(vec![
                Cell::Num(x),
                Cell::Num(st.mean_n),
                Cell::Num(st.second_moment),
                Cell::Num(st.mandel_q),
                Cell::Num(w.w),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(["x", "mean_n", "second_moment", "mandel_q", "w"]);
    cfg.describe(&mut t);
    t.meta("grid", if cfg.grid.log { "log" } else { "linear" });
    if cfg.params.q() > 1.0 {
        t.meta("metric_provenance", "extension (q > 1)");
    }
    for row in rows {
        t.push(row);
    }
    Ok(t)
}

fn emit(table: &Table, cfg: &RunConfig, out: &Option<PathBuf>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(cfg.output_format, &mut w)?;
            w.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write(cfg.output_format, &mut w)
        }
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::from_args(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg).map(|t| (t, EXIT_OK)),
        Command::Coherent => cmd_coherent(&cfg, cfg.z).map(|t| (t, EXIT_OK)),
        Command::Stats => cmd_stats(&cfg).map(|t| (t, EXIT_OK)),
        Command::Verify => {
            let outcomes = run_verify(&cfg);
            let code = if outcomes.iter().any(|o| o.status == CheckStatus::Failed) {
                EXIT_VERIFY_FAILED
            } else {
                EXIT_OK
            };
            for o in outcomes.iter().filter(|o| o.status == CheckStatus::Failed) {
                eprintln!("FAILED {}: {}", o.check_name, o.detail);
            }
            Ok((verify::outcome_table(&cfg, &outcomes), code))
        }
    };
    match result {
        Ok((table, code)) => {
            if let Err(e) = emit(&table, &cfg, &cli.common.out) {
                eprintln!("error: cannot write output: {e}");
                return EXIT_USAGE;
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
