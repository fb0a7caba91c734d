//! Finite power-law sums Σ c_j x^{μ_j}, μ_j > -1, and the exact action of
//! the fractional integral, the derivative and the nth-level operators on them.

use serde::{Deserialize, Serialize};

use crate::special::{gamma, ln_gamma, reciprocal_gamma};
use crate::specparams::{classify, DerivativeSpec, ProjectorCoeffs};
use crate::sum::compensated_sum;
use crate::{Error, Result};

/// Exponents closer than this are merged.
pub const EXPONENT_TOL: f64 = 1e-12;
/// Coefficients smaller than this in magnitude are dropped.
pub const COEFF_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub c: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct PowerSum {
    terms: Vec<Term>,
}

impl TryFrom<Vec<Term>> for PowerSum {
    type Error = Error;
    fn try_from(terms: Vec<Term>) -> Result<Self> {
        PowerSum::from_terms(terms)
    }
}

impl From<PowerSum> for Vec<Term> {
    fn from(p: PowerSum) -> Self {
        p.terms
    }
}

impl PowerSum {
    pub fn zero() -> Self {
        PowerSum { terms: Vec::new() }
    }

    pub fn monomial(c: f64, mu: f64) -> Result<Self> {
        Self::from_terms(vec![Term { c, mu }])
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0.0).expect("constant is admissible")
    }

    /// Sorts, merges equal exponents and drops negligible terms.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Result<Self> {
        let mut v: Vec<Term> = Vec::new();
        for mut t in terms {
            if !t.c.is_finite() || !t.mu.is_finite() {
                return Err(Error::NotFinite(format!("term {} x^{}", t.c, t.mu)));
            }
            if t.mu.abs() <= EXPONENT_TOL {
                t.mu = 0.0;
            }
            if t.mu <= -1.0 {
                return Err(Error::InadmissibleExponent { exponent: t.mu });
            }
            v.push(t);
        }
        v.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        let mut out: Vec<Term> = Vec::with_capacity(v.len());
        for t in v {
            match out.last_mut() {
                Some(last) if (t.mu - last.mu).abs() <= EXPONENT_TOL => last.c += t.c,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.c.abs() >= COEFF_FLOOR);
        Ok(PowerSum { terms: out })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.first().map(|t| t.mu)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term { c: a * t.c, mu: t.mu }))
            .expect("scaling keeps exponents")
    }

    pub fn add(&self, other: &PowerSum) -> Self {
        Self::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
            .expect("both operands admissible")
    }

    pub fn sub(&self, other: &PowerSum) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Coefficient attached to exponent mu (0 if absent).
    pub fn coeff(&self, mu: f64) -> f64 {
        self.terms
            .iter()
            .find(|t| (t.mu - mu).abs() <= EXPONENT_TOL)
            .map_or(0.0, |t| t.c)
    }

    /// Largest coefficient magnitude (0 for the zero sum).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.c.abs()))
    }

    /// f(0+): the x^0 coefficient, zero if all exponents are positive.
    pub fn value_at_zero(&self) -> std::result::Result<f64, f64> {
        match self.terms.first() {
            None => Ok(0.0),
            Some(t) if t.mu < 0.0 => Err(t.mu),
            _ => Ok(self.coeff(0.0)),
        }
    }
}

/// Max over exponents of |a_μ - b_μ| / max(|a_μ|, |b_μ|, floor).
pub fn max_relative_coeff_diff(a: &PowerSum, b: &PowerSum, floor: f64) -> f64 {
    let d = a.sub(b);
    d.terms()
        .iter()
        .map(|t| {
            let scale = a.coeff(t.mu).abs().max(b.coeff(t.mu).abs()).max(floor);
            t.c.abs() / scale
        })
        .fold(0.0, f64::max)
}

/// Γ(a)/Γ(b) for a, b > 0.
fn gamma_ratio(a: f64, b: f64) -> f64 {
    if a < 170.0 && b < 170.0 {
        gamma(a) / gamma(b)
    } else {
        (ln_gamma(a) - ln_gamma(b)).exp()
    }
}

/// I^ν x^μ = Γ(μ+1)/Γ(μ+ν+1) x^{μ+ν}; I^0 is the identity.
pub fn rl_integral(order: f64, f: &PowerSum) -> Result<PowerSum> {
    if !(order >= 0.0) || !order.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "integral order must be non-negative, got {order}"
        )));
    }
    if order == 0.0 {
        return Ok(f.clone());
    }
    PowerSum::from_terms(f.terms.iter().map(|t| Term {
        c: t.c * gamma_ratio(t.mu + 1.0, t.mu + order + 1.0),
        mu: t.mu + order,
    }))
}

/// Termwise derivative. Exponents in (-1, 0) would leave the algebra.
pub fn weak_derivative(f: &PowerSum) -> Result<PowerSum> {
    derivative_at_stage(f, 0)
}

fn derivative_at_stage(f: &PowerSum, stage: usize) -> Result<PowerSum> {
    let mut out = Vec::with_capacity(f.terms.len());
    for t in &f.terms {
        if t.mu == 0.0 {
            continue;
        }
        if t.mu < 0.0 {
            return Err(Error::DerivativeLeavesAlgebra { stage, exponent: t.mu });
        }
        out.push(Term { c: t.c * t.mu, mu: t.mu - 1.0 });
    }
    PowerSum::from_terms(out).map_err(|e| match e {
        Error::InadmissibleExponent { exponent } => {
            Error::DerivativeLeavesAlgebra { stage, exponent }
        }
        e => e,
    })
}

/// Intermediate functions g_n = I^{n-α-s_n} f, g_{k-1} = I^{γ_k} d/dx g_k.
/// Entry k of the result is g_k (so entry 0 is D f). `visit(k, g_k)` runs
/// before g_k is differentiated.
fn stages_with<V>(spec: &DerivativeSpec, f: &PowerSum, mut visit: V) -> Result<Vec<PowerSum>>
where
    V: FnMut(usize, &PowerSum) -> Result<()>,
{
    let n = spec.n;
    let mut g = vec![PowerSum::zero(); n + 1];
    g[n] = rl_integral(spec.inner_order().max(0.0), f)?;
    for k in (1..=n).rev() {
        visit(k, &g[k])?;
        let d = derivative_at_stage(&g[k], k)?;
        g[k - 1] = rl_integral(spec.gamma[k - 1].max(0.0), &d)?;
    }
    Ok(g)
}

fn stages(spec: &DerivativeSpec, f: &PowerSum) -> Result<Vec<PowerSum>> {
    stages_with(spec, f, |_, _| Ok(()))
}

/// Exact image D^{α,(γ)} f.
pub fn nth_level_derivative(spec: &DerivativeSpec, f: &PowerSum) -> Result<PowerSum> {
    spec.require_valid()?;
    Ok(stages(spec, f)?.swap_remove(0))
}

/// Projector coefficients p_k = g_k(0)/Γ(σ_k + 1) and the remainder
/// f - Σ p_k x^{σ_k}, which equals I^α D f. Coefficients of factors removed
/// by reduction are zero.
pub fn projector_apply(
    spec: &DerivativeSpec,
    f: &PowerSum,
) -> Result<(ProjectorCoeffs, PowerSum)> {
    let kept = classify(spec)?.kept;
    let sigma = spec.sigma();
    let mut p = vec![0.0; spec.n];
    stages_with(spec, f, |k, g| {
        if kept.contains(&(k - 1)) {
            let at0 = g
                .value_at_zero()
                .map_err(|exponent| Error::EvaluationAtZeroUndefined { stage: k, exponent })?;
            p[k - 1] = at0 * reciprocal_gamma(sigma[k - 1] + 1.0);
        }
        Ok(())
    })?;
    let proj = PowerSum::from_terms(
        p.iter().zip(&sigma).map(|(&c, &mu)| Term { c, mu }),
    )?;
    let remainder = f.sub(&proj);
    Ok((ProjectorCoeffs { p, sigma }, remainder))
}

/// Σ c_j x^{μ_j} for x > 0.
pub fn evaluate(f: &PowerSum, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("power sums are evaluated at x > 0, got {x}")));
    }
    Ok(compensated_sum(f.terms.iter().map(|t| t.c * x.powf(t.mu))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(alpha: f64, gamma: &[f64]) -> DerivativeSpec {
        DerivativeSpec::new(alpha, gamma.to_vec()).unwrap()
    }

    fn mono(c: f64, mu: f64) -> PowerSum {
        PowerSum::monomial(c, mu).unwrap()
    }

    #[test]
    fn normalization() {
        let p = PowerSum::from_terms(vec![
            Term { c: 1.0, mu: 2.0 },
            Term { c: 2.0, mu: 0.5 },
            Term { c: 3.0, mu: 2.0 + 1e-13 },
            Term { c: 1e-301, mu: 1.0 },
        ])
        .unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.terms()[0].mu, 0.5);
        assert_eq!(p.terms()[1].c, 4.0);
        assert!(PowerSum::monomial(1.0, -1.0).is_err());
        assert!(PowerSum::monomial(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn json_shape() {
        let p = mono(2.0, 0.5);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"[{"c":2.0,"mu":0.5}]"#);
        let q: PowerSum = serde_json::from_str(r#"[{"c":1,"mu":1},{"c":1,"mu":-0.5}]"#).unwrap();
        assert_eq!(q.terms()[0].mu, -0.5);
        assert!(serde_json::from_str::<PowerSum>(r#"[{"c":1,"mu":-2}]"#).is_err());
    }

    #[test]
    fn integral_examples() {
        let x = rl_integral(1.0, &PowerSum::constant(1.0)).unwrap();
        assert_eq!(x, mono(1.0, 1.0));
        let r = rl_integral(0.5, &mono(1.0, -0.5)).unwrap();
        assert!((r.coeff(0.0) - PI.sqrt()).abs() < 1e-15);
        let f = mono(3.0, 0.7).add(&mono(-1.0, -0.2));
        assert_eq!(rl_integral(0.0, &f).unwrap(), f);
        assert!(rl_integral(-0.1, &f).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(weak_derivative(&mono(1.0, 2.0)).unwrap(), mono(2.0, 1.0));
        assert!(weak_derivative(&PowerSum::constant(5.0)).unwrap().is_zero());
        let d = weak_derivative(&mono(1.0, 0.3)).unwrap();
        assert!((d.terms()[0].c - 0.3).abs() < 1e-16 && (d.terms()[0].mu + 0.7).abs() < 1e-15);
        assert!(matches!(
            weak_derivative(&mono(1.0, -0.3)),
            Err(Error::DerivativeLeavesAlgebra { .. })
        ));
    }

    #[test]
    fn nth_level_examples() {
        let d = nth_level_derivative(&spec(0.8, &[0.0]), &mono(1.0, -0.2)).unwrap();
        assert!(d.max_abs_coeff() <= 1e-12);
        let d = nth_level_derivative(&spec(0.5, &[0.5]), &PowerSum::constant(1.0)).unwrap();
        assert!(d.is_zero());
        let sp = spec(0.5, &[0.5, 0.4]);
        let f = rl_integral(0.5, &mono(1.0, 1.0)).unwrap();
        let d = nth_level_derivative(&sp, &f).unwrap();
        assert!(max_relative_coeff_diff(&d, &mono(1.0, 1.0), 1e-300) < 1e-13);
    }

    #[test]
    fn projector_examples() {
        let caputo = spec(0.5, &[0.5]);
        let f = PowerSum::constant(3.0).add(&mono(1.0, 1.0));
        let (p, rem) = projector_apply(&caputo, &f).unwrap();
        assert!((p.p[0] - 3.0).abs() < 1e-14);
        assert_eq!(rem, mono(1.0, 1.0));

        let rl = spec(0.8, &[0.0]);
        let k = mono(1.0, -0.2);
        let (_, rem) = projector_apply(&rl, &k).unwrap();
        assert!(rem.max_abs_coeff() < 1e-14);

        let sp = spec(0.5, &[0.5, 0.4]);
        let f = mono(1.0, 0.9);
        let (_, rem) = projector_apply(&sp, &f).unwrap();
        let lhs = rl_integral(0.5, &nth_level_derivative(&sp, &f).unwrap()).unwrap();
        assert!(max_relative_coeff_diff(&lhs, &rem, 1e-300) < 1e-12);
    }

    #[test]
    fn projector_needs_value_at_zero() {
        // RL projector on x^{-0.5}: I^{0.2} x^{-0.5} still has a negative exponent
        let rl = spec(0.8, &[0.0]);
        assert!(matches!(
            projector_apply(&rl, &mono(1.0, -0.5)),
            Err(Error::EvaluationAtZeroUndefined { .. })
        ));
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(evaluate(&PowerSum::constant(1.0), 7.0).unwrap(), 1.0);
        assert_eq!(evaluate(&mono(2.0, 0.5), 4.0).unwrap(), 4.0);
        let f = mono(1.0, -0.5).add(&mono(1.0, 1.0));
        assert_eq!(evaluate(&f, 0.25).unwrap(), 2.25);
        assert!(evaluate(&f, 0.0).is_err());
    }
}
