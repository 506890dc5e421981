//! Maximization of the finite key length over `(lambda, p_X, eps_bar, eps_PE, eps_PA)`.
//!
//! Search coordinates are `[ln lambda, p_X, ln v1, ln v2, ln v3]`, where the
//! `v` are stick-breaking fractions of the budget left after `eps_EC`:
//!
//! ```text
//! r       = eps - eps_EC
//! eps_bar = r v1
//! eps_PE  = r (1 - v1) v2
//! eps_PA  = r (1 - v1)(1 - v2) v3
//! ```
//!
//! so every point of the coordinate box is feasible. A full grid over the
//! box is evaluated first, then Nelder-Mead runs from the best few cells
//! with iterates clamped back into the box. No randomness is involved.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rate::{
    asymptotic_rate_from_stats, key_length_from_stats, key_length_with, KeyConfig, OperatingPoint, RateResult,
    SecurityBudget, SiftingProbabilities,
};
use crate::spdc::{source_stats, SetupParams, SourceStats};

const DIMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Searched on a log scale. Equal ends fix lambda.
    pub lambda_range: (f64, f64),
    /// Searched on a linear scale, within (0, 1/3]. Equal ends fix p_X.
    pub p_x_range: (f64, f64),
    /// Bounds on the stick-breaking fractions `v1`, `v2` (log scale);
    /// `v3` runs from the lower bound up to 1.
    pub eps_fraction_range: (f64, f64),
    /// Grid points per free dimension.
    pub grid_points: usize,
    /// Number of best grid cells refined by Nelder-Mead.
    pub starts: usize,
    /// Objective evaluations allowed per Nelder-Mead run.
    pub max_evals: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lambda_range: (1e-4, 50.0),
            p_x_range: (1e-4, 1.0 / 3.0),
            eps_fraction_range: (1e-4, 0.9999),
            grid_points: 6,
            starts: 3,
            max_evals: 2500,
        }
    }
}

impl SearchSpace {
    pub fn with_fixed_lambda(mut self, lambda: f64) -> Self {
        self.lambda_range = (lambda, lambda);
        self
    }

    pub fn with_fixed_p_x(mut self, p_x: f64) -> Self {
        self.p_x_range = (p_x, p_x);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (l0, l1) = self.lambda_range;
        if !(l0 > 0.0 && l1 >= l0 && l1.is_finite()) {
            return Err(domain(format!("invalid lambda range [{l0}, {l1}]")));
        }
        let (p0, p1) = self.p_x_range;
        if !(p0 > 0.0 && p1 >= p0 && p1 <= 1.0 / 3.0) {
            return Err(domain(format!("invalid p_X range [{p0}, {p1}]")));
        }
        let (v0, v1) = self.eps_fraction_range;
        if !(v0 > 0.0 && v1 >= v0 && v1 < 1.0) {
            return Err(domain(format!("invalid eps fraction range [{v0}, {v1}]")));
        }
        if self.grid_points < 2 {
            return Err(domain("grid_points must be >= 2"));
        }
        if self.starts < 1 {
            return Err(domain("starts must be >= 1"));
        }
        Ok(())
    }

    fn bounds(&self) -> [(f64, f64); DIMS] {
        let (v0, v1) = self.eps_fraction_range;
        [
            (self.lambda_range.0.ln(), self.lambda_range.1.ln()),
            self.p_x_range,
            (v0.ln(), v1.ln()),
            (v0.ln(), v1.ln()),
            (v0.ln(), 0.0),
        ]
    }

    fn axis(&self, dim: usize, points: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds()[dim];
        if hi <= lo {
            return vec![lo];
        }
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
    }

    fn grid(&self, points: usize) -> Grid {
        Grid { axes: std::array::from_fn(|d| self.axis(d, points)) }
    }

    /// Maps search coordinates to a point that satisfies every budget and
    /// sifting invariant.
    fn decode(&self, x: &[f64; DIMS], config: &KeyConfig) -> (f64, f64, SecurityBudget) {
        let b = self.bounds();
        let c: [f64; DIMS] = std::array::from_fn(|d| x[d].clamp(b[d].0, b[d].1));
        let lambda = if c[0] >= b[0].1 {
            self.lambda_range.1
        } else if c[0] <= b[0].0 {
            self.lambda_range.0
        } else {
            c[0].exp()
        };
        let p_x = c[1];
        let (v1, v2, v3) = (c[2].exp(), c[3].exp(), c[4].exp().min(1.0));
        let r = config.eps_total - config.eps_ec;
        let mut budget = SecurityBudget {
            eps_total: config.eps_total,
            eps_ec: config.eps_ec,
            eps_bar: r * v1,
            eps_pe: r * (1.0 - v1) * v2,
            eps_pa: r * (1.0 - v1) * (1.0 - v2) * v3,
        };
        while budget.eps_bar + budget.eps_ec + budget.eps_pa + budget.eps_pe > budget.eps_total {
            // rounding only
            budget.eps_bar *= 1.0 - 1e-12;
            budget.eps_pe *= 1.0 - 1e-12;
            budget.eps_pa *= 1.0 - 1e-12;
        }
        (lambda, p_x, budget)
    }
}

struct Grid {
    axes: [Vec<f64>; DIMS],
}

impl Grid {
    fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// Row-major, lambda outermost.
    fn point(&self, mut idx: usize) -> [f64; DIMS] {
        let mut out = [0.0; DIMS];
        for d in (0..DIMS).rev() {
            let n = self.axes[d].len();
            out[d] = self.axes[d][idx % n];
            idx /= n;
        }
        out
    }

    fn step(&self, d: usize) -> f64 {
        let a = &self.axes[d];
        if a.len() < 2 {
            0.0
        } else {
            a[1] - a[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub best_params: OperatingPoint,
    /// Key length in bits at `best_params` (0 when infeasible).
    pub best_value: f64,
    /// Full evaluation at `best_params`; `None` when no grid point could be evaluated.
    pub best: Option<RateResult>,
    pub evaluations: usize,
    /// Whether the winning refinement met its tolerance within budget.
    pub converged: bool,
    /// A positive key was found.
    pub feasible: bool,
}

struct Objective<'a> {
    setup: &'a SetupParams,
    config: &'a KeyConfig,
    space: &'a SearchSpace,
    n_source: u64,
    cache: HashMap<u64, Option<SourceStats>>,
    evaluations: usize,
}

impl Objective<'_> {
    fn stats(&mut self, lambda: f64) -> Option<SourceStats> {
        let setup = self.setup;
        *self
            .cache
            .entry(lambda.to_bits())
            .or_insert_with(|| setup.with_lambda(lambda).and_then(|s| source_stats(&s)).ok())
    }

    fn value(&mut self, x: &[f64; DIMS]) -> f64 {
        self.evaluations += 1;
        let (lambda, p_x, budget) = self.space.decode(x, self.config);
        match self.stats(lambda) {
            Some(stats) => bracket_at(&stats, lambda, p_x, &budget, self.n_source, self.config),
            None => f64::NEG_INFINITY,
        }
    }
}

fn bracket_at(
    stats: &SourceStats,
    lambda: f64,
    p_x: f64,
    budget: &SecurityBudget,
    n_source: u64,
    config: &KeyConfig,
) -> f64 {
    let Ok(sifting) = SiftingProbabilities::new(p_x) else {
        return f64::NEG_INFINITY;
    };
    match key_length_from_stats(stats, lambda, &sifting, budget, n_source, config.f_ec, config.options) {
        Ok(r) if r.bracket_bits.is_finite() => r.bracket_bits,
        _ => f64::NEG_INFINITY,
    }
}

fn evaluate_grid(
    grid: &Grid,
    stats: &[Option<SourceStats>],
    space: &SearchSpace,
    n_source: u64,
    config: &KeyConfig,
) -> Vec<f64> {
    let per_lambda = grid.len() / grid.axes[0].len();
    let eval = |idx: usize| -> f64 {
        let Some(st) = &stats[idx / per_lambda] else {
            return f64::NEG_INFINITY;
        };
        let (lambda, p_x, budget) = space.decode(&grid.point(idx), config);
        bracket_at(st, lambda, p_x, &budget, n_source, config)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..grid.len()).into_par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..grid.len()).map(eval).collect()
    }
}

/// Best-first order, ties broken by lower index.
fn ranked(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Maximizes the key length for `n_source` emitted pulses.
pub fn optimize_key_length(
    setup: &SetupParams,
    config: &KeyConfig,
    n_source: u64,
    space: &SearchSpace,
) -> Result<Optimum> {
    setup.validate()?;
    config.validate()?;
    space.validate()?;
    if n_source < 1 {
        return Err(domain("N_source must be >= 1"));
    }

    let grid = space.grid(space.grid_points);
    let mut obj = Objective { setup, config, space, n_source, cache: HashMap::new(), evaluations: 0 };
    let lambda_stats: Vec<Option<SourceStats>> =
        grid.axes[0].iter().map(|&ll| obj.stats(space.decode(&[ll, 0.1, 0.0, 0.0, 0.0], config).0)).collect();
    let values = evaluate_grid(&grid, &lambda_stats, space, n_source, config);
    obj.evaluations += values.len();

    let order = ranked(&values);
    let bounds = space.bounds();
    let steps: [f64; DIMS] = std::array::from_fn(|d| grid.step(d));

    // a run never returns less than its starting cell, so the first run
    // already dominates the whole grid
    let mut best: Option<([f64; DIMS], f64, bool)> = None;
    for &start in order.iter().take(space.starts) {
        let mut f = |x: &[f64; DIMS]| obj.value(x);
        let run = nelder_mead(&mut f, grid.point(start), steps, bounds, space.max_evals);
        if best.is_none_or(|(_, v, _)| run.value > v) {
            best = Some((run.x, run.value, run.converged));
        }
    }
    let evaluations = obj.evaluations;

    let Some((x, _, converged)) = best else {
        let (lambda, p_x, budget) = space.decode(&grid.point(0), config);
        return Ok(Optimum {
            best_params: OperatingPoint {
                lambda,
                p_x,
                eps_bar: budget.eps_bar,
                eps_pe: budget.eps_pe,
                eps_pa: budget.eps_pa,
            },
            best_value: 0.0,
            best: None,
            evaluations,
            converged: false,
            feasible: false,
        });
    };

    let (lambda, p_x, budget) = space.decode(&x, config);
    let result = key_length_with(
        &setup.with_lambda(lambda)?,
        &SiftingProbabilities::new(p_x)?,
        &budget,
        n_source,
        config.f_ec,
        config.options,
    )?;
    Ok(Optimum {
        best_params: result.params,
        best_value: result.key_length_bits,
        feasible: result.feasible,
        best: Some(result),
        evaluations,
        converged,
    })
}

struct NmRun {
    x: [f64; DIMS],
    value: f64,
    converged: bool,
}

/// Nelder-Mead maximization over the free coordinates (those with a nonzero
/// step); iterates are clamped into `bounds`. Restarts once from the best
/// vertex after the first convergence.
fn nelder_mead(
    f: &mut impl FnMut(&[f64; DIMS]) -> f64,
    x0: [f64; DIMS],
    steps: [f64; DIMS],
    bounds: [(f64, f64); DIMS],
    max_evals: usize,
) -> NmRun {
    let free: Vec<usize> = (0..DIMS).filter(|&d| steps[d] > 0.0).collect();
    let start_value = f(&x0);
    if free.is_empty() {
        return NmRun { x: x0, value: start_value, converged: true };
    }
    let clamp = |mut x: [f64; DIMS]| {
        for d in 0..DIMS {
            x[d] = x[d].clamp(bounds[d].0, bounds[d].1);
        }
        x
    };

    let mut evals = 1usize;
    let mut best = (x0, start_value);
    let mut converged = false;
    for round in 0..2 {
        // minimize the negated objective; NaN/-inf map to +inf
        let mut g = |x: &[f64; DIMS], evals: &mut usize| -> f64 {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                -v
            }
        };
        let scale = if round == 0 { 1.0 } else { 0.25 };
        let mut simplex: Vec<([f64; DIMS], f64)> = vec![(best.0, -best.1)];
        for &d in &free {
            let mut x = best.0;
            let s = steps[d] * scale;
            x[d] = if x[d] + s <= bounds[d].1 { x[d] + s } else { x[d] - s };
            let x = clamp(x);
            let v = g(&x, &mut evals);
            simplex.push((x, v));
        }
        converged = false;
        while evals < max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[simplex.len() - 1].1);
            let spread_ok = hi.is_finite() && (hi - lo).abs() <= 1e-10 * lo.abs().max(1.0);
            let anchor = simplex[0].0;
            let size = simplex
                .iter()
                .skip(1)
                .flat_map(|(x, _)| free.iter().map(move |&d| ((x[d] - anchor[d]) / steps[d]).abs()))
                .fold(0.0, f64::max);
            if spread_ok || size < 1e-9 {
                converged = true;
                break;
            }
            let worst = simplex.len() - 1;
            let mut centroid = [0.0; DIMS];
            for (x, _) in &simplex[..worst] {
                for d in 0..DIMS {
                    centroid[d] += x[d] / worst as f64;
                }
            }
            let along = |t: f64| -> [f64; DIMS] {
                clamp(std::array::from_fn(|d| centroid[d] + t * (simplex[worst].0[d] - centroid[d])))
            };
            let xr = along(-1.0);
            let fr = g(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = g(&xe, &mut evals);
                simplex[worst] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[worst - 1].1 {
                simplex[worst] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[worst].1 {
                    let xc = along(-0.5);
                    (xc, g(&xc, &mut evals))
                } else {
                    let xc = along(0.5);
                    (xc, g(&xc, &mut evals))
                };
                if fc < simplex[worst].1.min(fr) {
                    simplex[worst] = (xc, fc);
                } else {
                    let anchor = simplex[0].0;
                    for v in simplex.iter_mut().skip(1) {
                        let x = clamp(std::array::from_fn(|d| anchor[d] + 0.5 * (v.0[d] - anchor[d])));
                        *v = (x, g(&x, &mut evals));
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if -simplex[0].1 > best.1 {
            best = (simplex[0].0, -simplex[0].1);
        }
        if !converged || evals >= max_evals {
            break;
        }
    }
    NmRun { x: best.0, value: best.1, converged }
}

/// Result of maximizing the asymptotic rate over lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOptimum {
    pub lambda: f64,
    pub rate: f64,
    pub p11: f64,
    pub e_pdc: f64,
    pub evaluations: usize,
}

const ASYMPTOTIC_GRID: usize = 200;

/// Maximizes the asymptotic rate over `lambda` in `lambda_range` (the setup's
/// own lambda is ignored): log grid scan, then golden-section search in
/// `ln lambda` around the best grid point.
pub fn optimize_asymptotic(setup: &SetupParams, lambda_range: (f64, f64)) -> Result<AsymptoticOptimum> {
    let (lo, hi) = lambda_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(domain(format!("invalid lambda range [{lo}, {hi}]")));
    }
    let mut evaluations = 0usize;
    let mut eval = |ln_lambda: f64| -> Result<(f64, SourceStats)> {
        evaluations += 1;
        let lambda = ln_lambda.exp().clamp(lo, hi);
        let stats = source_stats(&setup.with_lambda(lambda)?)?;
        Ok((asymptotic_rate_from_stats(&stats), stats))
    };

    let (a, b) = (lo.ln(), hi.ln());
    let points = if hi > lo { ASYMPTOTIC_GRID } else { 1 };
    let xs: Vec<f64> =
        (0..points).map(|i| if points == 1 { a } else { a + (b - a) * i as f64 / (points - 1) as f64 }).collect();
    let mut best = (xs[0], eval(xs[0])?);
    let mut best_i = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        let r = eval(x)?;
        if r.0 > best.1 .0 {
            best = (x, r);
            best_i = i;
        }
    }
    if !(best.1 .0 > 0.0) {
        return Err(Error::Infeasible(format!("asymptotic rate is zero for lambda in [{lo:e}, {hi:e}]")));
    }

    if points > 1 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut l = xs[best_i.saturating_sub(1)];
        let mut r = xs[(best_i + 1).min(points - 1)];
        let mut c = r - inv_phi * (r - l);
        let mut d = l + inv_phi * (r - l);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        while r - l > 1e-10 {
            if fc.0 > fd.0 {
                r = d;
                d = c;
                fd = fc;
                c = r - inv_phi * (r - l);
                fc = eval(c)?;
            } else {
                l = c;
                c = d;
                fc = fd;
                d = l + inv_phi * (r - l);
                fd = eval(d)?;
            }
        }
        for cand in [(c, fc), (d, fd)] {
            if cand.1 .0 > best.1 .0 {
                best = cand;
            }
        }
    }

    let (x, (rate, stats)) = best;
    Ok(AsymptoticOptimum { lambda: x.exp().clamp(lo, hi), rate, p11: stats.p11, e_pdc: stats.e_pdc, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::asymptotic_rate;

    #[test]
    fn decode_is_always_feasible() {
        let space = SearchSpace::default();
        let cfg = KeyConfig::default();
        let grid = space.grid(7);
        for i in 0..grid.len() {
            let (lambda, p_x, budget) = space.decode(&grid.point(i), &cfg);
            budget.validate().unwrap();
            SiftingProbabilities::new(p_x).unwrap();
            assert!((1e-4..=50.0).contains(&lambda));
        }
        // outside the box is clamped
        let (lambda, p_x, budget) = space.decode(&[10.0, 0.9, 5.0, 5.0, 5.0], &cfg);
        assert_eq!(lambda, 50.0);
        assert_eq!(p_x, 1.0 / 3.0);
        budget.validate().unwrap();
    }

    #[test]
    fn optimum_is_reproducible_and_reevaluates_exactly() {
        let setup = SetupParams::symmetric(0.1, 20.0, 0.8, 0.01).unwrap();
        let cfg = KeyConfig::default();
        let space = SearchSpace::default();
        let a = optimize_key_length(&setup, &cfg, 10_000_000_000, &space).unwrap();
        let b = optimize_key_length(&setup, &cfg, 10_000_000_000, &space).unwrap();
        assert_eq!(a, b);
        let p = a.best_params;
        let budget = SecurityBudget::new(cfg.eps_total, cfg.eps_ec, p.eps_pa, p.eps_pe, p.eps_bar).unwrap();
        let again = crate::rate::key_length(
            &setup.with_lambda(p.lambda).unwrap(),
            &SiftingProbabilities::new(p.p_x).unwrap(),
            &budget,
            10_000_000_000,
            cfg.f_ec,
        )
        .unwrap();
        assert_eq!(again.key_length_bits, a.best_value);
        assert!(a.feasible);
    }

    #[test]
    fn beats_its_own_grid() {
        let setup = SetupParams::perfect(0.1, 50.0).unwrap();
        let cfg = KeyConfig::default();
        let space = SearchSpace::default();
        let n = 1_000_000_000;
        let opt = optimize_key_length(&setup, &cfg, n, &space).unwrap();
        let grid = space.grid(space.grid_points);
        let mut obj = Objective {
            setup: &setup,
            config: &cfg,
            space: &space,
            n_source: n,
            cache: HashMap::new(),
            evaluations: 0,
        };
        let grid_best = (0..grid.len()).map(|i| obj.value(&grid.point(i))).fold(f64::NEG_INFINITY, f64::max);
        assert!(opt.best.unwrap().bracket_bits >= grid_best);
    }

    #[test]
    fn infeasible_regime_is_flagged() {
        let setup = SetupParams::symmetric(0.1, 10.0, 1.0, 0.4).unwrap();
        let opt =
            optimize_key_length(&setup, &KeyConfig::default(), 1_000_000_000_000, &SearchSpace::default()).unwrap();
        assert!(!opt.feasible);
        assert_eq!(opt.best_value, 0.0);
        assert!(matches!(optimize_asymptotic(&setup, (1e-4, 50.0)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn tiny_source_has_no_evaluable_point() {
        let setup = SetupParams::perfect(0.1, 20.0).unwrap();
        let opt = optimize_key_length(&setup, &KeyConfig::default(), 2, &SearchSpace::default()).unwrap();
        assert!(opt.best.is_none());
        assert!(!opt.feasible);
    }

    #[test]
    fn fixed_dimensions_are_respected() {
        let setup = SetupParams::perfect(0.1, 20.0).unwrap();
        let space = SearchSpace::default().with_fixed_lambda(0.2).with_fixed_p_x(0.05);
        let opt = optimize_key_length(&setup, &KeyConfig::default(), 10_000_000_000, &space).unwrap();
        assert_eq!(opt.best_params.lambda, 0.2);
        assert_eq!(opt.best_params.p_x, 0.05);
    }

    #[test]
    fn asymptotic_matches_dense_scan() {
        for setup in [SetupParams::perfect(1.0, 20.0).unwrap(), SetupParams::symmetric(1.0, 60.0, 0.1, 0.03).unwrap()] {
            let opt = optimize_asymptotic(&setup, (1e-4, 50.0)).unwrap();
            let scan = (0..2000)
                .map(|i| {
                    let lam = (1e-4f64.ln() + (50f64.ln() - 1e-4f64.ln()) * i as f64 / 1999.0).exp();
                    asymptotic_rate(&setup.with_lambda(lam).unwrap()).unwrap()
                })
                .fold(0.0, f64::max);
            assert!(opt.rate >= scan * (1.0 - 1e-6), "{} vs {scan}", opt.rate);
            assert!(opt.rate <= scan * (1.0 + 1e-3));
        }
    }

    #[test]
    fn asymptotic_range_validation() {
        let setup = SetupParams::perfect(1.0, 20.0).unwrap();
        assert!(optimize_asymptotic(&setup, (0.0, 1.0)).is_err());
        assert!(optimize_asymptotic(&setup, (2.0, 1.0)).is_err());
        let fixed = optimize_asymptotic(&setup, (0.3, 0.3)).unwrap();
        assert_eq!(fixed.lambda, 0.3);
    }
}
