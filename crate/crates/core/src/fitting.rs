//! Least-squares fit of Σ y_k x^{σ_k} E_{α,σ_k+1}(-λx^α) to measured data by
//! a bounded Nelder-Mead search over a chosen subset of the parameters.
//!
//! Parameter vector layout: [α, γ_1..γ_n, λ, y_1..y_n]. When a trial spec is
//! degenerate only the initial values of its surviving kernel exponents are
//! used.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::relax::{
    asymptotic_form, cm_verdict, evaluate_solution, solve_relaxation, AsymptoticForm, CMReport,
    RelaxationProblem,
};
use crate::specparams::{classify, validate, DerivativeSpec};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Names of the parameters for level n, in vector order.
pub fn parameter_names(n: usize) -> Vec<String> {
    let mut v = vec!["alpha".to_string()];
    v.extend((1..=n).map(|k| format!("gamma{k}")));
    v.push("lambda".into());
    v.extend((1..=n).map(|k| format!("y{k}")));
    v
}

pub fn parameter_index(name: &str, n: usize) -> Result<usize> {
    parameter_names(n)
        .iter()
        .position(|p| p == name.trim())
        .ok_or_else(|| Error::Parse(format!("unknown parameter `{name}` for n = {n}")))
}

/// Bounds that every admissible parameter vector satisfies (α ∈ (0,1],
/// γ_k ∈ [0, k], λ > 0), with generous finite limits for λ and y.
pub fn default_bounds(n: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(1e-3, 1.0)];
    b.extend((1..=n).map(|k| (0.0, k as f64)));
    b.push((1e-6, 1e3));
    b.extend((0..n).map(|_| (-1e3, 1e3)));
    b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    /// (x_i, y_i) with x strictly increasing and positive.
    pub data: Vec<(f64, f64)>,
    pub n: usize,
    pub free: Vec<bool>,
    pub bounds: Vec<(f64, f64)>,
    pub initial_guess: Vec<f64>,
    pub seed: u64,
    pub max_iter: usize,
    /// Weight residuals by min(1, (x/x_c)²), x_c the 10th-percentile abscissa,
    /// so the region where x^{σ_k} blows up does not dominate.
    pub downweight_origin: bool,
}

impl FitProblem {
    pub fn new(
        data: Vec<(f64, f64)>,
        n: usize,
        free: Vec<bool>,
        bounds: Vec<(f64, f64)>,
        initial_guess: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let p = FitProblem {
            data,
            n,
            free,
            bounds,
            initial_guess,
            seed,
            max_iter: 2000,
            downweight_origin: false,
        };
        p.check()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 2
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        if self.n == 0 {
            return Err(Error::InvalidSpec("level n must be at least 1".into()));
        }
        for (what, len) in [
            ("free mask", self.free.len()),
            ("bounds", self.bounds.len()),
            ("initial guess", self.initial_guess.len()),
        ] {
            if len != d {
                return Err(Error::LengthMismatch { what, expected: d, got: len });
            }
        }
        if !self.free.iter().any(|&f| f) {
            return Err(Error::ParameterOutOfRange("at least one parameter must be free".into()));
        }
        if self.data.is_empty() {
            return Err(Error::ParameterOutOfRange("no data points".into()));
        }
        let mut prev = 0.0;
        for (i, &(x, y)) in self.data.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NotFinite(format!("data row {}", i + 1)));
            }
            if !(x > prev) {
                return Err(Error::ParameterOutOfRange(format!(
                    "data x must be positive and strictly increasing (row {}: x = {x})",
                    i + 1
                )));
            }
            prev = x;
        }
        let names = parameter_names(self.n);
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::ParameterOutOfRange(format!(
                    "bounds of {} must be finite with lo <= hi, got [{lo}, {hi}]",
                    names[i]
                )));
            }
        }
        let lam = self.n + 1;
        if self.free[lam] && !(self.bounds[lam].0 > 0.0) {
            return Err(Error::ParameterOutOfRange("lambda lower bound must be positive".into()));
        }
        if self.free[0] && !(self.bounds[0].0 > 0.0 && self.bounds[0].1 <= 1.0) {
            return Err(Error::ParameterOutOfRange("alpha bounds must lie in (0, 1]".into()));
        }
        if let Some(i) = self.initial_guess.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite(format!("initial guess for {}", names[i])));
        }
        Ok(())
    }

    fn weights(&self) -> Vec<f64> {
        if !self.downweight_origin {
            return vec![1.0; self.data.len()];
        }
        let xc = self.data[(self.data.len() - 1) / 10].0;
        self.data.iter().map(|&(x, _)| (x / xc).powi(2).min(1.0)).collect()
    }
}

/// Spec and relaxation problem encoded by a parameter vector; None when the
/// spec violates the order/type constraints.
fn model(n: usize, theta: &[f64]) -> Result<Option<RelaxationProblem>> {
    let spec = match DerivativeSpec::new(theta[0], theta[1..=n].to_vec()) {
        Ok(s) => s,
        Err(_) => return Ok(None),
    };
    if !validate(&spec)?.valid || !(theta[n + 1] > 0.0) {
        return Ok(None);
    }
    let kept = classify(&spec)?.kept;
    let y: Vec<f64> = kept.iter().map(|&k| theta[n + 2 + k]).collect();
    Ok(Some(RelaxationProblem::new(spec, theta[n + 1], y)?))
}

/// Weighted residual sum of squares of the model θ against the data; +∞ for
/// inadmissible θ.
pub fn objective(n: usize, theta: &[f64], data: &[(f64, f64)], weights: &[f64]) -> Result<f64> {
    let Some(p) = model(n, theta)? else {
        return Ok(f64::INFINITY);
    };
    debug_assert!(p.spec.require_valid().is_ok());
    let sol = solve_relaxation(&p)?;
    let mut acc = CompensatedSum::new();
    for (&(x, y), &w) in data.iter().zip(weights) {
        let Ok(v) = evaluate_solution(&sol, x) else {
            return Ok(f64::INFINITY);
        };
        let r = y - v;
        acc.add(w * r * r);
    }
    let v = acc.value();
    Ok(if v.is_finite() { v } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Class of the fitted spec, so degenerate optima are visible.
    pub classification: String,
    pub cm_verdict: CMReport,
}

/// Convergence: simplex spread in f below F_TOL relative to the larger of the
/// best value and the weighted data energy Σ w y², and diameter below X_TOL
/// in coordinates scaled to the bound box.
const F_TOL: f64 = 1e-14;
const X_TOL: f64 = 1e-10;
const F_EXACT: f64 = 1e-30;

struct Search<'a> {
    p: &'a FitProblem,
    idx: Vec<usize>,
    weights: Vec<f64>,
    /// Σ w_i y_i²
    energy: f64,
    evaluations: usize,
}

impl Search<'_> {
    fn theta(&self, u: &[f64]) -> Vec<f64> {
        let mut t = self.p.initial_guess.clone();
        for (&i, &ui) in self.idx.iter().zip(u) {
            let (lo, hi) = self.p.bounds[i];
            t[i] = lo + ui.clamp(0.0, 1.0) * (hi - lo);
        }
        t
    }

    fn f(&mut self, u: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        objective(self.p.n, &self.theta(u), &self.p.data, &self.weights)
    }

    fn unit(&self, theta: &[f64]) -> Vec<f64> {
        self.idx
            .iter()
            .map(|&i| {
                let (lo, hi) = self.p.bounds[i];
                if hi > lo {
                    ((theta[i] - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Nelder-Mead from `start`; returns (best point, value, iterations, converged).
    fn run(&mut self, start: &[f64], rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64, usize, bool)> {
        let d = start.len();
        let mut pts = vec![start.to_vec()];
        for j in 0..d {
            let mut v = start.to_vec();
            // 5-15% of the parameter's magnitude, in box coordinates
            let (lo, hi) = self.p.bounds[self.idx[j]];
            let range = hi - lo;
            let theta = lo + v[j] * range;
            let step = rng.gen_range(0.05..0.15) * theta.abs().max(1e-3 * range) / range;
            let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut w = v[j] + dir * step;
            if !(0.0..=1.0).contains(&w) {
                w = v[j] - dir * step;
            }
            v[j] = w.clamp(0.0, 1.0);
            pts.push(v);
        }
        let mut fs = pts.iter().map(|u| self.f(u)).collect::<Result<Vec<_>>>()?;
        let mut it = 0;
        loop {
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            fs = order.iter().map(|&i| fs[i]).collect();
            let (best, worst) = (fs[0], fs[d]);
            if best <= F_EXACT {
                return Ok((pts[0].clone(), best, it, true));
            }
            let diam = pts[1..]
                .iter()
                .map(|q| q.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if worst.is_finite() && worst - best <= F_TOL * best.abs().max(self.energy) + F_EXACT && diam <= X_TOL {
                return Ok((pts[0].clone(), best, it, true));
            }
            if it >= self.p.max_iter {
                return Ok((pts[0].clone(), best, it, false));
            }
            it += 1;

            let centroid: Vec<f64> = (0..d)
                .map(|j| pts[..d].iter().map(|q| q[j]).sum::<f64>() / d as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&pts[d])
                    .map(|(c, w)| (c + t * (c - w)).clamp(0.0, 1.0))
                    .collect()
            };
            let xr = along(1.0);
            let fr = self.f(&xr)?;
            if fr < fs[0] {
                let xe = along(2.0);
                let fe = self.f(&xe)?;
                if fe < fr {
                    pts[d] = xe;
                    fs[d] = fe;
                } else {
                    pts[d] = xr;
                    fs[d] = fr;
                }
                continue;
            }
            if fr < fs[d - 1] {
                pts[d] = xr;
                fs[d] = fr;
                continue;
            }
            let (xc, fc) = if fr < fs[d] {
                let xc = along(0.5);
                let fc = self.f(&xc)?;
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = self.f(&xc)?;
                (xc, fc)
            };
            if fc < fs[d].min(fr) {
                pts[d] = xc;
                fs[d] = fc;
                continue;
            }
            // shrink toward the best vertex
            for i in 1..=d {
                let q: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(a, b)| b + 0.5 * (a - b)).collect();
                fs[i] = self.f(&q)?;
                pts[i] = q;
            }
        }
    }
}

/// Bounded Nelder-Mead on the free parameters, restarted once from the best
/// point. Deterministic given the seed and the initial guess.
pub fn fit(p: &FitProblem) -> Result<FitResult> {
    p.check()?;
    let n = p.n;
    let idx: Vec<usize> = (0..p.dim()).filter(|&i| p.free[i]).collect();
    let mut lower = p.initial_guess.clone();
    for &i in &idx {
        lower[i] = p.bounds[i].0;
    }
    // α + s_k grows with every α and γ, so if the lower corner violates the
    // constraints no point of the box can satisfy them
    if lower[0] > 0.0 && lower[0] <= 1.0 {
        let spec = DerivativeSpec::new(lower[0], lower[1..=n].to_vec())?;
        let v = validate(&spec)?;
        if !v.valid {
            return Err(Error::Infeasible(format!(
                "no spec within the bounds is admissible: {}",
                v.failures.join("; ")
            )));
        }
    }
    for &i in &idx {
        let (lo, hi) = p.bounds[i];
        if !(lo..=hi).contains(&p.initial_guess[i]) {
            return Err(Error::Infeasible(format!(
                "initial {} = {} lies outside [{lo}, {hi}]",
                parameter_names(n)[i],
                p.initial_guess[i]
            )));
        }
    }
    if model(n, &p.initial_guess)?.is_none() {
        return Err(Error::Infeasible("initial guess is not an admissible spec".into()));
    }

    let weights = p.weights();
    let energy = p.data.iter().zip(&weights).map(|(&(_, y), &w)| w * y * y).sum();
    let mut s = Search { p, idx, weights, energy, evaluations: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let start = s.unit(&p.initial_guess);
    s.evaluations += 1;
    let f0 = objective(n, &p.initial_guess, &p.data, &s.weights)?;
    if f0 <= F_EXACT {
        return finish(p, p.initial_guess.clone(), f0, 0, s.evaluations, true);
    }
    let (best, fbest, iterations, converged) = {
        let (u1, f1, it1, _) = s.run(&start, &mut rng)?;
        let (u2, f2, it2, c2) = s.run(&u1, &mut rng)?;
        if f2 <= f1 {
            (u2, f2, it1 + it2, c2)
        } else {
            (u1, f1, it1 + it2, c2)
        }
    };
    let parameters = s.theta(&best);
    finish(p, parameters, fbest, iterations, s.evaluations, converged)
}

fn finish(
    p: &FitProblem,
    parameters: Vec<f64>,
    rss: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
) -> Result<FitResult> {
    let prob = model(p.n, &parameters)?
        .ok_or_else(|| Error::Infeasible("fitted parameters are not admissible".into()))?;
    let c = classify(&prob.spec)?;
    let label = if c.is_reduced() {
        format!("{} (reduced from n = {})", c.base, prob.spec.n)
    } else {
        c.base.to_string()
    };
    Ok(FitResult {
        parameters,
        rss,
        iterations,
        evaluations,
        converged,
        classification: label,
        cm_verdict: cm_verdict(&prob)?,
    })
}

/// Power-law tail of the fitted model.
pub fn fit_report_tail(p: &FitProblem, r: &FitResult) -> Result<AsymptoticForm> {
    let prob = model(p.n, &r.parameters)?
        .ok_or_else(|| Error::Infeasible("fitted parameters are not admissible".into()))?;
    asymptotic_form(&prob)
}

/// Evaluates the model given by a parameter vector at x > 0.
pub fn model_value(n: usize, theta: &[f64], x: f64) -> Result<f64> {
    let p = model(n, theta)?
        .ok_or_else(|| Error::InvalidSpec("parameter vector is not an admissible spec".into()))?;
    evaluate_solution(&solve_relaxation(&p)?, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caputo_data(alpha: f64, lambda: f64, y1: f64, pts: usize) -> Vec<(f64, f64)> {
        let theta = [alpha, 1.0 - alpha, lambda, y1];
        (0..pts)
            .map(|i| {
                let x = 0.05 * (400.0f64).powf(i as f64 / (pts - 1) as f64);
                (x, model_value(1, &theta, x).unwrap())
            })
            .collect()
    }

    fn free(n: usize, names: &[&str]) -> Vec<bool> {
        let mut f = vec![false; 2 * n + 2];
        for nm in names {
            f[parameter_index(nm, n).unwrap()] = true;
        }
        f
    }

    #[test]
    fn names_and_indices() {
        assert_eq!(parameter_names(2), ["alpha", "gamma1", "gamma2", "lambda", "y1", "y2"]);
        assert_eq!(parameter_index("lambda", 2).unwrap(), 3);
        assert!(parameter_index("beta", 2).is_err());
    }

    #[test]
    fn exact_guess_is_a_fixed_point() {
        let data = caputo_data(0.7, 1.3, 2.0, 30);
        let p = FitProblem::new(
            data,
            1,
            free(1, &["lambda", "y1"]),
            default_bounds(1),
            vec![0.7, 0.3, 1.3, 2.0],
            1,
        )
        .unwrap();
        let r = fit(&p).unwrap();
        assert!(r.rss <= 1e-20);
        assert_eq!(r.evaluations, 1);
        assert!(r.converged);
    }

    #[test]
    fn recovers_lambda_and_y() {
        let data = caputo_data(0.7, 1.3, 2.0, 60);
        let p = FitProblem::new(
            data,
            1,
            free(1, &["lambda", "y1"]),
            default_bounds(1),
            vec![0.7, 0.3, 1.0, 1.0],
            3,
        )
        .unwrap();
        let r = fit(&p).unwrap();
        assert!((r.parameters[2] / 1.3 - 1.0).abs() < 1e-2, "{r:?}");
        assert!((r.parameters[3] / 2.0 - 1.0).abs() < 1e-2, "{r:?}");
        assert_eq!(r.classification, "Caputo");
        let tail = fit_report_tail(&p, &r).unwrap();
        assert!((tail.terms[0].exponent + 0.7).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bounds_fail_early() {
        let data = caputo_data(0.7, 1.3, 2.0, 10);
        let mut b = default_bounds(1);
        b[1] = (0.6, 0.9);
        b[0] = (0.5, 1.0);
        let p = FitProblem::new(data, 1, free(1, &["alpha", "gamma1"]), b, vec![0.7, 0.3, 1.3, 2.0], 1)
            .unwrap();
        assert!(matches!(fit(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn objective_ignores_data_order() {
        let data = caputo_data(0.6, 1.0, 1.0, 20);
        let theta = [0.6, 0.2, 0.8, 1.1];
        let w = vec![1.0; data.len()];
        let a = objective(1, &theta, &data, &w).unwrap();
        let mut rev = data.clone();
        rev.reverse();
        let b = objective(1, &theta, &rev, &w).unwrap();
        assert!((a - b).abs() <= 1e-14 * a);
        assert_eq!(objective(1, &[0.6, 0.7, 0.8, 1.1], &data, &w).unwrap(), f64::INFINITY);
    }

    #[test]
    fn rejects_malformed_problems() {
        let data = caputo_data(0.7, 1.3, 2.0, 10);
        let g = vec![0.7, 0.3, 1.3, 2.0];
        assert!(FitProblem::new(data.clone(), 1, vec![false; 4], default_bounds(1), g.clone(), 1).is_err());
        let mut unsorted = data.clone();
        unsorted.swap(0, 1);
        assert!(FitProblem::new(unsorted, 1, free(1, &["y1"]), default_bounds(1), g.clone(), 1).is_err());
        assert!(FitProblem::new(data, 1, free(1, &["y1"]), default_bounds(2), g, 1).is_err());
    }
}
