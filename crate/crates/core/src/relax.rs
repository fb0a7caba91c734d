//! The relaxation equation D^{α,(γ)} y = -λ y: homogeneous and Mittag-Leffler
//! solutions, power-law tails, complete-monotonicity verdicts and checks, and
//! a Laplace-domain cross-check.

use serde::{Deserialize, Serialize};

use crate::gridops::{laplace_numeric, GradedGrid, SampledFunction};
use crate::mlf::{ml, CmWeightedParams};
use crate::powerlaw::{PowerSum, Term};
use crate::special::reciprocal_gamma;
use crate::specparams::{classify, short, validate, Classification, DerivativeSpec, PARAM_TOL};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Rounds values within PARAM_TOL of an integer onto it, so that σ = 0 and
/// Γ-poles are hit exactly.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= PARAM_TOL {
        r
    } else {
        x
    }
}

/// The initial values y_k belong to the kernel exponents that survive
/// reduction, so `y.len()` is the kernel dimension of the effective spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationProblem {
    pub spec: DerivativeSpec,
    pub lambda: f64,
    pub y: Vec<f64>,
}

impl RelaxationProblem {
    pub fn new(spec: DerivativeSpec, lambda: f64, y: Vec<f64>) -> Result<Self> {
        let p = RelaxationProblem { spec, lambda, y };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<Classification> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::ParameterOutOfRange(format!(
                "relaxation rate lambda = {} must satisfy lambda > 0",
                self.lambda
            )));
        }
        let c = classify(&self.spec)?;
        check_initial_values(&c, &self.y)?;
        Ok(c)
    }

    /// σ_k of the kernel exponents the initial values belong to.
    pub fn sigma(&self) -> Result<Vec<f64>> {
        let c = classify(&self.spec)?;
        let sigma = self.spec.sigma();
        Ok(c.kept.iter().map(|&k| snap(sigma[k])).collect())
    }
}

fn check_initial_values(c: &Classification, y: &[f64]) -> Result<()> {
    if y.len() != c.kept.len() {
        return Err(Error::LengthMismatch { what: "y", expected: c.kept.len(), got: y.len() });
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NotFinite(format!("initial value {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionTerm {
    pub y: f64,
    pub sigma: f64,
    pub beta: f64,
}

/// y(x) = Σ y_k x^{σ_k} E_{α,σ_k+1}(-λ x^α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSolution {
    pub terms: Vec<SolutionTerm>,
    pub lambda: f64,
    pub alpha: f64,
}

impl RelaxationSolution {
    /// Each term as x^{γ-1} E_{α,β}(-λx^α) with γ = β = σ_k + 1.
    pub fn weighted_params(&self) -> Vec<CmWeightedParams> {
        self.terms
            .iter()
            .map(|t| CmWeightedParams {
                alpha: self.alpha,
                beta: t.beta,
                gamma_w: t.beta,
                lambda: self.lambda,
            })
            .collect()
    }

    /// Smallest σ_k among terms with y_k ≠ 0.
    pub fn leading_exponent(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter(|t| t.y != 0.0)
            .map(|t| t.sigma)
            .min_by(f64::total_cmp)
    }
}

/// Σ y_k x^{σ_k}/Γ(σ_k+1), the solution of D^{α,(γ)} y = 0.
pub fn solve_homogeneous(spec: &DerivativeSpec, y: &[f64]) -> Result<PowerSum> {
    let c = classify(spec)?;
    check_initial_values(&c, y)?;
    let sigma = spec.sigma();
    PowerSum::from_terms(c.kept.iter().zip(y).map(|(&k, &yk)| {
        let s = snap(sigma[k]);
        Term { c: yk * reciprocal_gamma(s + 1.0), mu: s }
    }))
}

pub fn solve_relaxation(p: &RelaxationProblem) -> Result<RelaxationSolution> {
    p.check()?;
    let terms = p
        .sigma()?
        .into_iter()
        .zip(&p.y)
        .map(|(sigma, &y)| SolutionTerm { y, sigma, beta: sigma + 1.0 })
        .collect();
    Ok(RelaxationSolution { terms, lambda: p.lambda, alpha: p.spec.alpha })
}

pub fn evaluate_solution(sol: &RelaxationSolution, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("solution is evaluated at x > 0, got {x}")));
    }
    let t = sol.lambda * x.powf(sol.alpha);
    let mut acc = CompensatedSum::new();
    for term in sol.terms.iter().filter(|t| t.y != 0.0) {
        acc.add(term.y * x.powf(term.sigma) * ml(sol.alpha, term.beta, t));
    }
    let v = acc.value();
    if !v.is_finite() {
        return Err(Error::NotFinite(format!("solution at x = {x}")));
    }
    Ok(v)
}

/// d x^{exponent} as x → ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTerm {
    pub d: f64,
    pub exponent: f64,
}

/// Σ d_k x^{s_k - k}, sorted by decreasing exponent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AsymptoticForm {
    pub terms: Vec<TailTerm>,
}

impl AsymptoticForm {
    /// Largest exponent carrying a nonzero coefficient.
    pub fn leading(&self) -> Option<TailTerm> {
        self.terms.iter().copied().find(|t| t.d != 0.0)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.d * x.powf(t.exponent)).sum()
    }
}

/// With E_{α,β}(-t) ~ 1/(t Γ(β-α)), each term contributes
/// d_k = y_k / (λ Γ(s_k - k + 1)) at exponent σ_k - α = s_k - k.
pub fn asymptotic_form(p: &RelaxationProblem) -> Result<AsymptoticForm> {
    p.check()?;
    let mut terms: Vec<TailTerm> = p
        .sigma()?
        .into_iter()
        .zip(&p.y)
        .map(|(sigma, &y)| {
            let e = sigma - p.spec.alpha;
            TailTerm { d: y * reciprocal_gamma(snap(e + 1.0)) / p.lambda, exponent: e }
        })
        .collect();
    terms.sort_by(|a, b| b.exponent.total_cmp(&a.exponent));
    Ok(AsymptoticForm { terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub order: usize,
    pub x: f64,
    pub value: f64,
}

/// `admissible_by_theorem` is None for a purely numeric report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CMReport {
    pub admissible_by_theorem: Option<bool>,
    pub failed_conditions: Vec<String>,
    pub numeric_orders_checked: usize,
    pub violations: Vec<Violation>,
}

/// Sufficient conditions for a completely monotone solution: all y_k ≥ 0 and
/// k - 1 ≤ s_k for the truly-nth-level form of the spec. A negative answer
/// says nothing about the solution itself.
pub fn cm_verdict(p: &RelaxationProblem) -> Result<CMReport> {
    let c = p.check()?;
    let mut failed = Vec::new();
    for (k, &y) in p.y.iter().enumerate() {
        if y < 0.0 {
            failed.push(format!("initial value y_{} = {} is negative", k + 1, short(y)));
        }
    }
    let v = validate(&c.effective)?;
    if !v.cm_admissible {
        let prefix = if c.is_reduced() {
            format!("reduced spec {}: ", c.effective)
        } else {
            String::new()
        };
        for f in v.failures.iter().filter(|f| f.contains("CM condition")) {
            failed.push(format!("{prefix}{f}"));
        }
    }
    Ok(CMReport {
        admissible_by_theorem: Some(failed.is_empty()),
        failed_conditions: failed,
        numeric_orders_checked: 0,
        violations: Vec::new(),
    })
}

pub const CM_POINTS: usize = 400;
pub const CM_STEP_DIVISOR: f64 = 64.0;
pub const CM_TOL: f64 = 1e-7;
pub const CM_MAX_ORDER: usize = 8;

/// Checks (-1)^m Δ_h^m f(x) ≥ -τ Σ_j C(m,j) |f(x + jh)| for m = 0..=M on
/// CM_POINTS log-spaced x in [x_lo, x_hi], with h = x/64 and τ = 1e-7.
pub fn cm_numeric_check<F>(f: F, x_lo: f64, x_hi: f64, max_order: usize) -> Result<CMReport>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(x_lo > 0.0 && x_lo < x_hi) || !x_hi.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 < x_lo < x_hi, got [{x_lo}, {x_hi}]"
        )));
    }
    if max_order > CM_MAX_ORDER {
        return Err(Error::ParameterOutOfRange(format!(
            "max order {max_order} exceeds {CM_MAX_ORDER}"
        )));
    }
    let binom = binomial_rows(max_order);
    let ratio = (x_hi / x_lo).ln() / (CM_POINTS - 1) as f64;
    let mut violations = Vec::new();
    let mut vals = vec![0.0; max_order + 1];
    for i in 0..CM_POINTS {
        let x = x_lo * (ratio * i as f64).exp();
        let h = x / CM_STEP_DIVISOR;
        for (j, v) in vals.iter_mut().enumerate() {
            *v = f(x + j as f64 * h)?;
        }
        for m in 0..=max_order {
            let mut acc = CompensatedSum::new();
            let mut scale = 0.0;
            for j in 0..=m {
                let c = binom[m][j];
                acc.add(if j % 2 == 0 { c * vals[j] } else { -c * vals[j] });
                scale += c * vals[j].abs();
            }
            let value = acc.value();
            if value < -CM_TOL * scale {
                violations.push(Violation { order: m, x, value });
            }
        }
    }
    Ok(CMReport {
        admissible_by_theorem: None,
        failed_conditions: Vec::new(),
        numeric_orders_checked: max_order,
        violations,
    })
}

fn binomial_rows(m: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for k in 1..=m {
        let prev = &rows[k - 1];
        let mut row = vec![1.0; k + 1];
        for j in 1..k {
            row[j] = prev[j - 1] + prev[j];
        }
        rows.push(row);
    }
    rows
}

/// Grid used for the numeric transform: [0, x_max] with m graded nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceOptions {
    pub x_max: f64,
    pub m: usize,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        LaplaceOptions { x_max: 40.0, m: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub s: f64,
    pub numeric: f64,
    pub closed_form: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceReport {
    pub checks: Vec<LaplaceCheck>,
}

impl LaplaceReport {
    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.relative_deviation).fold(0.0, f64::max)
    }
}

/// Σ y_k s^{α-1-σ_k}/(s^α + λ).
pub fn laplace_closed_form(sol: &RelaxationSolution, s: f64) -> f64 {
    let den = s.powf(sol.alpha) + sol.lambda;
    sol.terms
        .iter()
        .map(|t| t.y * s.powf(sol.alpha - 1.0 - t.sigma) / den)
        .sum()
}

/// Numeric transform of the sampled solution (with its power-law tail past
/// x_max) against the closed form at each s.
pub fn laplace_verify(
    p: &RelaxationProblem,
    s_values: &[f64],
    opts: &LaplaceOptions,
) -> Result<LaplaceReport> {
    if let Some(s) = s_values.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("Laplace variable s = {s} must be positive")));
    }
    let sol = solve_relaxation(p)?;
    let tail = asymptotic_form(p)?;
    let lead = sol.leading_exponent();
    let sigma: Vec<f64> = lead.into_iter().collect();
    let grid = GradedGrid::for_exponents(opts.x_max, opts.m, &sigma)?;
    let f = SampledFunction::try_from_fn(&grid, |x| evaluate_solution(&sol, x), lead)?;
    let checks = s_values
        .iter()
        .map(|&s| {
            let numeric = laplace_numeric(&f, &tail, s)?;
            let closed_form = laplace_closed_form(&sol, s);
            let relative_deviation = ((numeric - closed_form) / closed_form).abs();
            Ok(LaplaceCheck { s, numeric, closed_form, relative_deviation })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LaplaceReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powerlaw::evaluate;
    use crate::special::gamma;

    fn spec(alpha: f64, gamma: &[f64]) -> DerivativeSpec {
        DerivativeSpec::new(alpha, gamma.to_vec()).unwrap()
    }

    fn problem(alpha: f64, gamma: &[f64], lambda: f64, y: &[f64]) -> RelaxationProblem {
        RelaxationProblem::new(spec(alpha, gamma), lambda, y.to_vec()).unwrap()
    }

    #[test]
    fn homogeneous_examples() {
        let h = solve_homogeneous(&DerivativeSpec::caputo(0.6).unwrap(), &[3.0]).unwrap();
        assert_eq!(h, PowerSum::constant(3.0));

        let h = solve_homogeneous(&DerivativeSpec::riemann_liouville(0.8).unwrap(), &[1.0]).unwrap();
        assert!((h.coeff(-0.2) - 1.0 / gamma(0.8)).abs() < 1e-15);

        let h = solve_homogeneous(&spec(0.5, &[0.5, 0.5]), &[1.0, 1.0]).unwrap();
        assert!((evaluate(&h, 4.0).unwrap() - (1.0 + 0.5 / gamma(0.5))).abs() < 1e-15);

        // reduced spec: one kernel exponent, one initial value
        assert!(solve_homogeneous(&spec(0.6, &[0.1, 1.0]), &[1.0, 1.0]).is_err());
        assert!(solve_homogeneous(&spec(0.6, &[0.1, 1.0]), &[1.0]).is_ok());
    }

    #[test]
    fn relaxation_examples() {
        let a = 0.6;
        let sol = solve_relaxation(&problem(a, &[1.0 - a, 1.0], 1.5, &[2.0])).unwrap();
        assert_eq!(sol.terms.len(), 1);
        assert_eq!(sol.terms[0].sigma, 0.0);
        assert_eq!(sol.terms[0].beta, 1.0);
        let x: f64 = 1.7;
        let want = 2.0 * ml(a, 1.0, 1.5 * x.powf(a));
        assert!((evaluate_solution(&sol, x).unwrap() - want).abs() < 1e-15);

        let sol = solve_relaxation(&problem(1.0, &[0.0], 2.0, &[1.0])).unwrap();
        for x in [0.1, 1.0, 3.0] {
            let v = evaluate_solution(&sol, x).unwrap();
            assert!((v - (-2.0 * x).exp()).abs() < 1e-14 * (-2.0 * x).exp());
        }

        let sol = solve_relaxation(&problem(0.4, &[0.6, 0.4], 1.0, &[1.0, 2.0])).unwrap();
        assert!(sol.terms[0].sigma.abs() < 1e-14);
        assert!((sol.terms[1].sigma - (0.4 - 1.0)).abs() < 1e-14);
        assert!((sol.terms[1].beta - 0.4).abs() < 1e-14);

        assert!(RelaxationProblem::new(spec(0.5, &[0.5]), -1.0, vec![1.0]).is_err());
        assert!(evaluate_solution(&sol, 0.0).is_err());
    }

    #[test]
    fn hilfer_matches_direct_composition() {
        let (a, g, lambda) = (0.7, 0.2, 0.9);
        let sol = solve_relaxation(&problem(a, &[g], lambda, &[1.3])).unwrap();
        let direct = 1.3 * crate::mlf::eval_weighted(&sol.weighted_params()[0], 1.0).unwrap();
        assert!((evaluate_solution(&sol, 1.0).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn tail_coefficients() {
        let a = 0.6;
        let p = problem(a, &[1.0 - a], 2.0, &[1.5]);
        let t = asymptotic_form(&p).unwrap();
        assert_eq!(t.terms.len(), 1);
        assert!((t.terms[0].exponent + a).abs() < 1e-15);
        assert!((t.terms[0].d - 1.5 / (2.0 * gamma(1.0 - a))).abs() < 1e-14);
        let sol = solve_relaxation(&p).unwrap();
        let x = 1e4;
        let rel = (evaluate_solution(&sol, x).unwrap() / t.evaluate(x) - 1.0).abs();
        assert!(rel < 1e-2, "{rel}");

        let t = asymptotic_form(&problem(a, &[0.0], 1.0, &[1.0])).unwrap();
        assert_eq!(t.terms[0].d, 0.0);
        assert!(t.leading().is_none());
        let t = asymptotic_form(&problem(1.0, &[0.0], 1.0, &[1.0])).unwrap();
        assert_eq!(t.terms[0].d, 0.0);

        let t = asymptotic_form(&problem(0.5, &[0.3, 0.9], 1.0, &[1.0, 1.0])).unwrap();
        assert!(t.terms[0].exponent > t.terms[1].exponent);
    }

    #[test]
    fn verdict_examples() {
        let r = cm_verdict(&problem(0.5, &[0.5, 0.5], 1.0, &[1.0, 1.0])).unwrap();
        assert_eq!(r.admissible_by_theorem, Some(true));
        let r = cm_verdict(&problem(0.5, &[0.5, 0.5], 1.0, &[1.0, -1.0])).unwrap();
        assert_eq!(r.admissible_by_theorem, Some(false));
        assert!(r.failed_conditions[0].contains("y_2"));
        let r = cm_verdict(&problem(0.9, &[0.05, 0.1], 1.0, &[1.0, 1.0])).unwrap();
        assert_eq!(r.admissible_by_theorem, Some(false));
        assert!(r.failed_conditions.iter().any(|f| f.contains("s_2")));
        // α + s_2 ≤ 1 reduces to Hilfer(0.2), which is admissible
        let r = cm_verdict(&problem(0.3, &[0.2, 0.4], 1.0, &[1.0])).unwrap();
        assert_eq!(r.admissible_by_theorem, Some(true));
    }

    #[test]
    fn numeric_check_examples() {
        let r = cm_numeric_check(|x| Ok((-x).exp()), 0.01, 50.0, 8).unwrap();
        assert!(r.violations.is_empty());
        let r = cm_numeric_check(|x| Ok(x.sin() + 2.0), 0.1, 10.0, 3).unwrap();
        assert!(r.violations.iter().any(|v| v.order == 2));
        assert!(cm_numeric_check(|x| Ok(x), 1.0, 0.5, 3).is_err());
        assert!(cm_numeric_check(|x| Ok(x), 0.5, 1.0, 9).is_err());
    }

    #[test]
    fn laplace_exponential() {
        let p = problem(1.0, &[0.0], 1.0, &[1.0]);
        let r = laplace_verify(&p, &[1.0], &LaplaceOptions::default()).unwrap();
        assert!((r.checks[0].closed_form - 0.5).abs() < 1e-15);
        assert!((r.checks[0].numeric - 0.5).abs() < 1e-5, "{:?}", r);
    }
}
