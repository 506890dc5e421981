//! Plain-Rust curve builders behind the bindings.

use sixstate::spdc::source_stats;
use sixstate::{optimize_asymptotic, optimize_key_length, Error, KeyConfig, Result, SearchSpace, SetupParams};

/// Point cap so a slider cannot freeze the page.
pub const MAX_POINTS: usize = 400;

fn check_points(points: usize) -> Result<()> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(Error::Domain(format!("points must lie in [2, {MAX_POINTS}]")))
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!("bad range [{lo}, {hi}]")));
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| if i == points - 1 { hi } else { lo * (step * i as f64).exp() }).collect())
}

pub fn qber_vs_lambda(
    length_km: f64,
    eta_d: f64,
    eta_m: f64,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
) -> Result<Vec<f64>> {
    check_points(points)?;
    let base = SetupParams::symmetric(lambda_min, length_km, eta_d, eta_m)?;
    let mut out = Vec::with_capacity(2 * points);
    for lambda in log_grid(lambda_min, lambda_max, points)? {
        let e = match source_stats(&base.with_lambda(lambda)?) {
            Ok(s) => s.e_pdc,
            Err(Error::ZeroCoincidence) => f64::NAN,
            Err(e) => return Err(e),
        };
        out.extend([lambda, e]);
    }
    Ok(out)
}

pub fn asymptotic_vs_distance(eta_d: f64, eta_m: f64, l_max: f64, points: usize) -> Result<Vec<f64>> {
    check_points(points)?;
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::Domain(format!("bad distance {l_max}")));
    }
    let range = SearchSpace::default().lambda_range;
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let l = l_max * i as f64 / (points - 1) as f64;
        let setup = SetupParams::symmetric(0.1, l, eta_d, eta_m)?;
        match optimize_asymptotic(&setup, range) {
            Ok(a) => out.extend([l, a.lambda, a.rate]),
            Err(Error::ZeroCoincidence) => out.extend([l, f64::NAN, 0.0]),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn finite_vs_pulses(
    length_km: f64,
    eta_d: f64,
    eta_m: f64,
    log10_n_min: f64,
    log10_n_max: f64,
    points: usize,
) -> Result<Vec<f64>> {
    check_points(points)?;
    if !(log10_n_min >= 0.0 && log10_n_max > log10_n_min && log10_n_max <= 18.0) {
        return Err(Error::Domain("pulse exponents must satisfy 0 <= min < max <= 18".into()));
    }
    let setup = SetupParams::symmetric(0.1, length_km, eta_d, eta_m)?;
    let config = KeyConfig::default();
    let space = SearchSpace::default();
    let asym = optimize_asymptotic(&setup, space.lambda_range)?.rate;
    let mut out = Vec::with_capacity(3 * points);
    for n in log_grid(10f64.powf(log10_n_min), 10f64.powf(log10_n_max), points)? {
        let n = n.round().max(1.0) as u64;
        let opt = optimize_key_length(&setup, &config, n, &space)?;
        let rate = opt.best.filter(|_| opt.feasible).map_or(0.0, |b| b.rate);
        out.extend([n as f64, rate, asym]);
    }
    Ok(out)
}
