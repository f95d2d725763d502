//! Cross-validation battery behind `dhawkes verify`.

use hawkes_deviations::cgf::{solve_x, x_derivatives};
use hawkes_deviations::deviations::{
    legendre_check, oracle, pmf_expansion, rate, rate_derivative, theta_star, DeviationMode,
    DeviationQuery,
};
use hawkes_deviations::modphi::{log_mgf, modphi_residual_window};
use hawkes_deviations::simulator::mc_mgf;
use hawkes_deviations::{ExcitingKernel, HawkesModel, Majorant, Result};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn check(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name,
        measured,
        tolerance,
        pass: measured <= tolerance,
        detail,
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Points above the mean where the saddle point exists.
fn x_grid(model: &HawkesModel, n: usize) -> Vec<f64> {
    let mean = model.mean_rate();
    (1..=n).map(|i| mean * (0.3 + 2.0 * i as f64 / n as f64)).collect()
}

fn legendre_and_saddle(model: &HawkesModel, n: usize) -> Result<[Check; 2]> {
    let (mut legendre, mut saddle) = (0.0f64, 0.0f64);
    for x in x_grid(model, n) {
        legendre = legendre.max(legendre_check(model, x)?);
        let th = theta_star(model, x)?;
        saddle = saddle.max((x_derivatives(model, th, 1)?.eta(1) - x).abs());
    }
    Ok([
        check("legendre", legendre, 1e-10, format!("max |I(x) − (θ*x − η(θ*))| over {n} points")),
        check("saddle", saddle, 1e-9, format!("max |η′(θ*(x)) − x| over {n} points")),
    ])
}

fn derivatives(model: &HawkesModel, n: usize) -> Result<Check> {
    let mut worst = 0.0f64;
    let x_of = |th: f64| solve_x(model, th).map(|c| c.x_value);
    for x in x_grid(model, n) {
        let th = theta_star(model, x)?;
        let d = x_derivatives(model, th, 2)?;
        // Richardson-extrapolated central differences
        let d1 = |h: f64| -> Result<f64> { Ok((x_of(th + h)? - x_of(th - h)?) / (2.0 * h)) };
        let d2 = |h: f64| -> Result<f64> { Ok((x_of(th + h)? - 2.0 * x_of(th)? + x_of(th - h)?) / (h * h)) };
        let h = 1e-3;
        let fd1 = (4.0 * d1(h / 2.0)? - d1(h)?) / 3.0;
        let fd2 = (4.0 * d2(h * 5.0)? - d2(h * 10.0)?) / 3.0;
        worst = worst.max(((fd1 - d.x(1)) / d.x(1)).abs());
        worst = worst.max(((fd2 - d.x(2)) / d.x(2)).abs());
        let i2 = rate_derivative(model, x, 2)?;
        let r2 = |h: f64| (rate(model, x + h) - 2.0 * rate(model, x) + rate(model, x - h)) / (h * h);
        let hx = 1e-2 * x;
        let fd = (4.0 * r2(hx / 2.0) - r2(hx)) / 3.0;
        worst = worst.max(((fd - i2) / i2).abs());
    }
    Ok(check(
        "finite-differences",
        worst,
        1e-6,
        "max relative gap of x′, x″ and I″ against Richardson differences".into(),
    ))
}

fn poisson_reduction(ts: &[u64]) -> Result<Check> {
    let model = HawkesModel::poisson(1.0)?;
    let x = 1.5;
    let mut errs = Vec::new();
    for &t in ts {
        let n = (t as f64 * x).round() as u64;
        let exact = oracle::poisson_pmf(t as f64, n);
        let q = DeviationQuery {
            model: model.clone(),
            t,
            x,
            order: 1,
            mode: DeviationMode::Pmf,
        };
        errs.push((pmf_expansion(&q)?.probability / exact - 1.0).abs());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
    let off = ratios.iter().map(|r| (r - 0.5).abs()).fold(0.0, f64::max);
    Ok(check(
        "poisson-reduction",
        off,
        0.15,
        format!("v=1 pmf error ratios between doubled horizons {ratios:.4?}; distance from 1/2"),
    ))
}

fn residual_slope(model: &HawkesModel, ts: &[usize]) -> Result<[Check; 2]> {
    let z = Complex64::new(0.1_f64.min(0.5 * model.theta_bound().value()), 0.0);
    let c = 0.25;
    let power = HawkesModel::new(
        1.0,
        ExcitingKernel::custom(move |i| c * (i as f64).powi(-3), Majorant::PowerLaw { scale: c, exponent: 3.0 })?,
    )?;
    let fit = |m: &HawkesModel| -> Result<(f64, usize)> {
        let mut pts = Vec::new();
        for &t in ts {
            let r = modphi_residual_window(m, z, t, 8 * t)?;
            if r > 0.0 {
                pts.push(((t as f64).ln(), r.ln()));
            }
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Ok(if xs.len() >= 2 { (slope(&xs, &ys), xs.len()) } else { (f64::NEG_INFINITY, xs.len()) })
    };
    let (own, used) = fit(model)?;
    let (pl, _) = fit(&power)?;
    Ok([
        check(
            "modphi-residual-rate",
            own + 1.0,
            0.25,
            format!("log-log slope {own:.3} of the residual for the given model over {used} horizons; must decay at least like 1/t"),
        ),
        check(
            "modphi-residual-slope",
            (pl + 1.0).abs(),
            0.25,
            format!("log-log slope {pl:.3} for the kernel 0.25·i^-3, expected −1"),
        ),
    ])
}

fn mgf_vs_monte_carlo(model: &HawkesModel, paths: usize, seed: u64) -> Result<Check> {
    let t = 50;
    let z = 0.02;
    let exact = log_mgf(model, z, t)?.exp();
    let mc = mc_mgf(model, z, t, paths, seed)?;
    let score = (mc.value - exact).abs() / mc.std_error;
    Ok(check(
        "mgf-monte-carlo",
        score,
        4.0,
        format!("E[e^(0.02 N_50)]: recursion {exact:.6}, Monte Carlo {:.6} ± {:.1e} over {paths} paths; gap in standard errors", mc.value, mc.std_error),
    ))
}

pub fn run(model: &HawkesModel, suite: Suite, seed: u64) -> Result<Report> {
    let (grid, poisson_ts, residual_ts, paths): (usize, &[u64], &[usize], usize) = match suite {
        Suite::Quick => (8, &[100, 200, 400], &[50, 100, 200, 400], 20_000),
        Suite::Full => (20, &[100, 200, 400, 800, 1600], &[50, 100, 200, 400, 800, 1600], 400_000),
    };
    let mut checks = Vec::new();
    checks.extend(legendre_and_saddle(model, grid)?);
    checks.push(derivatives(model, grid)?);
    checks.push(poisson_reduction(poisson_ts)?);
    checks.extend(residual_slope(model, residual_ts)?);
    checks.push(mgf_vs_monte_carlo(model, paths, seed)?);
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        suite,
        seed,
        checks,
        pass,
    })
}
