//! `dhawkes`: large and moderate deviations of discrete-time Hawkes counts.
//!
//! Exit codes: 0 success, 1 domain or model error, 2 verification failure,
//! 64 usage error.

mod model;
mod verify;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkes_deviations::cgf::x_derivatives;
use hawkes_deviations::deviations::{
    moderate_expansion, pmf_expansion, rate, rate_derivative, tail_expansion, theta_star,
    DeviationMode, DeviationQuery,
};
use hawkes_deviations::modphi::{modphi_residual, phi_psi};
use hawkes_deviations::simulator::{mc_mean_variance, mc_mgf, mc_pmf, mc_tail, McEstimate, THREADS_ENV};
use hawkes_deviations::HawkesModel;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

/// Seed used when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 20_240_917;

const EXIT_DOMAIN: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "dhawkes", version, about = "Precise deviations for discrete-time linear Hawkes processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Model descriptor: a JSON file path or inline JSON.
    #[arg(long)]
    model: String,
    /// Output format (default: json, or csv for modphi and simulate).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<std::path::PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// x(θ), η(θ) and their derivatives.
    Cgf {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        theta: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// φ(z), ψ(z) and the residual of the finite-t limit.
    Modphi {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        z_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z_im: f64,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
        t: Vec<usize>,
        /// Certified tolerance for the truncated φ-series.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Rate function I(x) and saddle point θ*.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
    },
    /// Precise expansion of P(N_t = tx).
    Pmf(Expansion),
    /// Precise expansion of P(N_t ≥ tx).
    Tail(Expansion),
    /// Moderate-deviation tail P(N_t ≥ mean·t + √(var·t)·y).
    Moderate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        m: u32,
    },
    /// Monte Carlo estimates from seeded paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// mean, var, mgf:<z>, tail:<x> or pmf:<x>; repeatable.
        #[arg(long, value_parser = parse_stat, required = true)]
        stat: Vec<Stat>,
    },
    /// Cross-validation battery with a pass/fail report.
    Verify {
        /// Model to verify (default: ν = 1, geometric a = 0.25, r = 0.5).
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value = "quick")]
        suite: verify::Suite,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        output: Option<std::path::PathBuf>,
    },
}

#[derive(Args)]
struct Expansion {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<f64>,
    /// Expansion order; v − 1 correction terms are used.
    #[arg(long, default_value_t = 2)]
    v: usize,
}

#[derive(Clone, Debug)]
enum Stat {
    Mean,
    Var,
    Mgf(f64),
    Tail(f64),
    Pmf(f64),
}

impl Stat {
    fn label(&self) -> String {
        match self {
            Stat::Mean => "mean".into(),
            Stat::Var => "var".into(),
            Stat::Mgf(z) => format!("mgf:{z}"),
            Stat::Tail(x) => format!("tail:{x}"),
            Stat::Pmf(x) => format!("pmf:{x}"),
        }
    }
}

fn parse_stat(s: &str) -> Result<Stat, String> {
    let arg = |v: &str| v.parse::<f64>().map_err(|e| format!("bad number in --stat {s}: {e}"));
    match s.split_once(':') {
        None if s == "mean" => Ok(Stat::Mean),
        None if s == "var" => Ok(Stat::Var),
        Some(("mgf", v)) => Ok(Stat::Mgf(arg(v)?)),
        Some(("tail", v)) => Ok(Stat::Tail(arg(v)?)),
        Some(("pmf", v)) => Ok(Stat::Pmf(arg(v)?)),
        _ => Err(format!("unknown statistic {s:?}; expected mean, var, mgf:<z>, tail:<x> or pmf:<x>")),
    }
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Core(#[from] hawkes_deviations::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed")]
    Verification,
}

/// Rendered result: canonical JSON plus a fixed-column CSV table.
struct Rendered {
    json: Value,
    header: &'static str,
    rows: Vec<String>,
}

fn one_or_many<T: Serialize>(items: &[T]) -> Value {
    if items.len() == 1 {
        json!(items[0])
    } else {
        json!(items)
    }
}

fn emit(out: Rendered, format: Format, path: Option<&std::path::Path>) -> Result<(), Failure> {
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&out.json).expect("serializable") + "\n",
        Format::Csv => {
            let mut s = String::from(out.header);
            s.push('\n');
            for r in &out.rows {
                s.push_str(r);
                s.push('\n');
            }
            s
        }
    };
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Shortest round-trip form, switching to exponent notation for tiny and
/// huge magnitudes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

fn cgf(model: &HawkesModel, thetas: &[f64], order: usize) -> Result<Rendered, Failure> {
    let mut evals = Vec::new();
    let mut rows = Vec::new();
    for &th in thetas {
        let e = x_derivatives(model, th, order)?;
        rows.push(format!("{},{},{},{}", num(e.theta), num(e.x_value), num(e.eta_value), list(&e.eta_derivs)));
        evals.push(json!({ "theta_c": model.theta_bound().value(), "eval": e }));
    }
    Ok(Rendered {
        json: one_or_many(&evals),
        header: "theta,x,eta,eta_derivs",
        rows,
    })
}

fn modphi(model: &HawkesModel, z: Complex64, ts: &[usize], tol: f64) -> Result<Rendered, Failure> {
    let limit = phi_psi(model, z, tol)?;
    let mut rows = Vec::new();
    let mut residuals = Vec::new();
    for &t in ts {
        let r = modphi_residual(model, z, t)?;
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            num(z.re),
            num(z.im),
            t,
            num(r),
            num(limit.phi_value.0),
            num(limit.psi_value.0),
            num(limit.psi_value.1)
        ));
        residuals.push(json!({ "t": t, "residual": r }));
    }
    Ok(Rendered {
        json: json!({
            "z": [z.re, z.im],
            "x": limit.x_value,
            "phi": limit.phi_value,
            "psi": limit.psi_value,
            "truncation": limit.truncation,
            "tail_bound": limit.tail_bound,
            "certified": limit.certified,
            "residuals": residuals,
        }),
        header: "z_re,z_im,t,residual,phi,psi_re,psi_im",
        rows,
    })
}

fn rate_table(model: &HawkesModel, xs: &[f64]) -> Result<Rendered, Failure> {
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for &x in xs {
        let i = rate(model, x);
        let th = theta_star(model, x)?;
        let i2 = rate_derivative(model, x, 2)?;
        rows.push(format!("{},{},{},{}", num(x), num(i), num(th), num(i2)));
        items.push(json!({ "x": x, "rate": i, "theta_star": th, "rate_second_derivative": i2 }));
    }
    Ok(Rendered {
        json: one_or_many(&items),
        header: "x,rate,theta_star,rate_second_derivative",
        rows,
    })
}

fn expansion(model: &HawkesModel, e: &Expansion, mode: DeviationMode) -> Result<Rendered, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &t in &e.t {
        for &x in &e.x {
            let q = DeviationQuery {
                model: model.clone(),
                t,
                x,
                order: e.v,
                mode,
            };
            let r = match mode {
                DeviationMode::Pmf => pmf_expansion(&q)?,
                DeviationMode::Tail => tail_expansion(&q)?,
            };
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                t,
                num(x),
                e.v,
                num(r.exponent),
                num(r.prefactor),
                opt(r.lattice_factor),
                num(r.theta_star),
                list(&r.coefficients),
                num(r.probability),
                r.valid,
                num(r.dominance_threshold_t)
            ));
            results.push(r);
        }
    }
    Ok(Rendered {
        json: one_or_many(&results),
        header: "t,x,v,exponent,prefactor,lattice_factor,theta_star,coefficients,probability,valid,dominance_threshold_t",
        rows,
    })
}

fn moderate(model: &HawkesModel, ts: &[u64], ys: &[f64], m: u32) -> Result<Rendered, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &t in ts {
        for &y in ys {
            let r = moderate_expansion(model, t, y, m)?;
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                r.t,
                num(r.y),
                r.m,
                num(r.level),
                num(r.exponent),
                num(r.probability),
                r.valid
            ));
            results.push(r);
        }
    }
    Ok(Rendered {
        json: one_or_many(&results),
        header: "t,y,m,level,exponent,probability,valid",
        rows,
    })
}

fn simulate(model: &HawkesModel, t: usize, paths: usize, seed: u64, stats: &[Stat]) -> Result<Rendered, Failure> {
    let mut moments: Option<(McEstimate, McEstimate)> = None;
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for s in stats {
        let est = match s {
            Stat::Mean | Stat::Var => {
                if moments.is_none() {
                    moments = Some(mc_mean_variance(model, t, paths, seed)?);
                }
                let (m, v) = moments.as_ref().expect("just computed");
                if matches!(s, Stat::Mean) { m.clone() } else { v.clone() }
            }
            Stat::Mgf(z) => mc_mgf(model, *z, t, paths, seed)?,
            Stat::Tail(x) => mc_tail(model, t, *x, paths, seed)?,
            Stat::Pmf(x) => mc_pmf(model, t, *x, paths, seed)?,
        };
        for w in &est.warnings {
            eprintln!("warning: {}: {w}", s.label());
        }
        rows.push(format!("{},{},{},{},{}", s.label(), num(est.value), num(est.std_error), est.n_paths, seed));
        items.push(json!({ "stat": s.label(), "estimate": est }));
    }
    Ok(Rendered {
        json: one_or_many(&items),
        header: "stat,value,std_error,n_paths,seed",
        rows,
    })
}

const DEFAULT_VERIFY_MODEL: &str = r#"{"nu": 1, "kernel": {"type": "geometric", "a": 0.25, "r": 0.5}}"#;

fn run(cli: Cli) -> Result<(), Failure> {
    let load = |c: &Common| model::load(&c.model);
    let (out, format, path) = match &cli.command {
        Command::Cgf { common, theta, order } => (cgf(&load(common)?, theta, *order)?, common.format.unwrap_or(Format::Json), &common.output),
        Command::Modphi { common, z_re, z_im, t, tol } => (
            modphi(&load(common)?, Complex64::new(*z_re, *z_im), t, *tol)?,
            common.format.unwrap_or(Format::Csv),
            &common.output,
        ),
        Command::Rate { common, x } => (rate_table(&load(common)?, x)?, common.format.unwrap_or(Format::Json), &common.output),
        Command::Pmf(e) => (expansion(&load(&e.common)?, e, DeviationMode::Pmf)?, e.common.format.unwrap_or(Format::Json), &e.common.output),
        Command::Tail(e) => (expansion(&load(&e.common)?, e, DeviationMode::Tail)?, e.common.format.unwrap_or(Format::Json), &e.common.output),
        Command::Moderate { common, t, y, m } => (moderate(&load(common)?, t, y, *m)?, common.format.unwrap_or(Format::Json), &common.output),
        Command::Simulate { common, t, paths, seed, stat } => (
            simulate(&load(common)?, *t, *paths, *seed, stat)?,
            common.format.unwrap_or(Format::Csv),
            &common.output,
        ),
        Command::Verify { model: m, suite, seed, output } => {
            let model = model::load(m.as_deref().unwrap_or(DEFAULT_VERIFY_MODEL))?;
            let report = verify::run(&model, *suite, *seed)?;
            let pass = report.pass;
            let rendered = Rendered {
                json: json!(report),
                header: "",
                rows: Vec::new(),
            };
            emit(rendered, Format::Json, output.as_deref())?;
            return if pass { Ok(()) } else { Err(Failure::Verification) };
        }
    };
    emit(out, format, path.as_deref())
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("error: verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}
