//! Two-parameter Mittag-Leffler function E_{α,β}(z) on the negative real axis
//! and the weighted family x^{γ-1} E_{α,β}(-λ x^α).

mod integral;
pub mod limits;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::special::{gamma_fn, reciprocal_gamma};
use crate::special::ln_gamma;
use crate::sum::CompensatedSum;
use crate::{Error, Result};
use limits::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlQuery {
    pub alpha: f64,
    pub beta: f64,
    pub z: f64,
}

impl MlQuery {
    pub fn new(alpha: f64, beta: f64, z: f64) -> Result<Self> {
        let q = MlQuery { alpha, beta, z };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.z <= 0.0) || !self.z.is_finite() {
            return Err(Error::ParameterOutOfRange(format!(
                "z = {} must be finite and non-positive",
                self.z
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Zero,
    Series,
    Integral,
    Asymptotic,
    Exponential,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Zero => "zero",
            Regime::Series => "series",
            Regime::Integral => "integral",
            Regime::Asymptotic => "asymptotic",
            Regime::Exponential => "exponential",
        })
    }
}

/// E_{α,β}(z) for z ≤ 0.
pub fn eval_ml(q: &MlQuery) -> Result<f64> {
    eval_ml_with_regime(q).map(|(v, _)| v)
}

pub fn eval_ml_with_regime(q: &MlQuery) -> Result<(f64, Regime)> {
    q.check()?;
    Ok(ml_neg(q.alpha, q.beta, -q.z))
}

/// E_{α,β}(-t) without argument checks; α ∈ (0,1], β > 0, t ≥ 0.
pub fn ml(alpha: f64, beta: f64, t: f64) -> f64 {
    ml_neg(alpha, beta, t).0
}

fn ml_neg(alpha: f64, beta: f64, t: f64) -> (f64, Regime) {
    if t == 0.0 {
        return (reciprocal_gamma(beta), Regime::Zero);
    }
    if alpha == 1.0 {
        return (integral::alpha_one(beta, t), Regime::Exponential);
    }
    if t.powf(1.0 / alpha) <= SERIES_MAX_SCALED_T {
        return (series(alpha, beta, t), Regime::Series);
    }
    if t >= ASYMPTOTIC_MIN_T {
        if let Some(v) = asymptotic(alpha, beta, t) {
            return (v, Regime::Asymptotic);
        }
    }
    (reduced_integral(alpha, beta, t), Regime::Integral)
}

fn series(alpha: f64, beta: f64, t: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    let lt = t.ln();
    let mut small = 0;
    for k in 0..100_000usize {
        let a = alpha * k as f64 + beta;
        let mag = if a < 160.0 && k < 300 {
            t.powi(k as i32) * reciprocal_gamma(a)
        } else {
            (k as f64 * lt - ln_gamma(a)).exp()
        };
        let term = if k % 2 == 0 { mag } else { -mag };
        acc.add(term);
        // past the minimum of Γ the magnitudes decrease monotonically once small
        if a > 2.0 && mag <= 1e-17 * acc.value().abs().max(1e-300) {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    acc.value()
}

/// -Σ_{j≥1} (-t)^{-j}/Γ(β-jα), truncated before the smallest term. Returns
/// None when the first omitted term is not negligible.
fn asymptotic(alpha: f64, beta: f64, t: f64) -> Option<f64> {
    let mut acc = CompensatedSum::new();
    let mut prev = f64::INFINITY;
    let mut tail = None;
    for j in 1..=ASYMPTOTIC_MAX_TERMS + 1 {
        let mag = t.powi(-(j as i32)) * reciprocal_gamma(beta - j as f64 * alpha);
        if mag == 0.0 {
            continue;
        }
        if mag.abs() > prev || j > ASYMPTOTIC_MAX_TERMS {
            tail = Some(mag.abs());
            break;
        }
        prev = mag.abs();
        // -(-t)^{-j} = (-1)^{j+1} t^{-j}
        acc.add(if j % 2 == 1 { mag } else { -mag });
    }
    let v = acc.value();
    match tail {
        Some(e) if e > ASYMPTOTIC_REL_TOL * v.abs() => None,
        _ => Some(v),
    }
}

/// Lowers β into (0, 1] with E_{α,β}(-t) = (1/Γ(β-α) - E_{α,β-α}(-t))/t and
/// evaluates the base value from the integral representation.
fn reduced_integral(alpha: f64, beta: f64, t: f64) -> f64 {
    let mut steps = Vec::new();
    let mut b = beta;
    while b > 1.0 {
        b -= alpha;
        steps.push(b);
    }
    let mut v = integral::representation(alpha, b, t);
    for &bb in steps.iter().rev() {
        // bb = β' - α for the β' being reconstructed
        v = (reciprocal_gamma(bb) - v) / t;
    }
    v
}

/// Leading asymptotic term (-z)^{-1}/Γ(β-α), valid for |z| ≥ 10.
pub fn eval_ml_asymptotic_leading(q: &MlQuery) -> Result<f64> {
    q.check()?;
    if q.z > -10.0 {
        return Err(Error::Domain(format!(
            "leading asymptotic term needs |z| >= 10, got z = {}",
            q.z
        )));
    }
    Ok(reciprocal_gamma(q.beta - q.alpha) / (-q.z))
}

/// Parameters of h(x) = x^{γ-1} E_{α,β}(-λ x^α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmWeightedParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_w: f64,
    pub lambda: f64,
}

pub fn eval_weighted(p: &CmWeightedParams, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("weighted function needs x > 0, got {x}")));
    }
    if !(p.lambda > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("lambda = {} must be positive", p.lambda)));
    }
    let e = eval_ml(&MlQuery::new(p.alpha, p.beta, -p.lambda * x.powf(p.alpha))?)?;
    Ok(x.powf(p.gamma_w - 1.0) * e)
}

/// True iff 0 < α ≤ 1, α ≤ β, 0 < γ ≤ 1, 0 < λ: the family is then
/// completely monotone on (0, ∞).
pub fn is_cm_params(p: &CmWeightedParams) -> bool {
    p.alpha > 0.0
        && p.alpha <= 1.0
        && p.alpha <= p.beta
        && p.gamma_w > 0.0
        && p.gamma_w <= 1.0
        && p.lambda > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn e(alpha: f64, beta: f64, z: f64) -> f64 {
        eval_ml(&MlQuery::new(alpha, beta, z).unwrap()).unwrap()
    }

    #[test]
    fn spot_values() {
        assert!(rel(e(0.7, 1.3, 0.0), 1.0 / gamma(1.3)) < 1e-15);
        assert!(rel(e(1.0, 1.0, -1.0), (-1.0f64).exp()) < 1e-15);
        assert!(rel(e(0.5, 1.0, -1.0), 0.427_583_576_155_807) < 1e-13);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(MlQuery::new(1.2, 1.0, -1.0).is_err());
        assert!(MlQuery::new(0.5, 0.0, -1.0).is_err());
        assert!(MlQuery::new(0.5, 1.0, 1.0).is_err());
        assert!(MlQuery::new(0.5, 1.0, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn alpha_one_closed_forms() {
        for &t in &[0.01, 0.3, 1.0, 4.0, 20.0, 300.0] {
            // E_{1,2}(-t) = (1 - e^{-t})/t, E_{1,3}(-t) = (e^{-t} - 1 + t)/t²
            assert!(rel(e(1.0, 2.0, -t), -(-t).exp_m1() / t) < 1e-13, "t = {t}");
            let e13 = ((-t).exp_m1() + t) / (t * t);
            assert!(rel(e(1.0, 3.0, -t), e13) < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn leading_term() {
        let q = MlQuery::new(0.7, 0.7, -50.0).unwrap();
        assert_eq!(eval_ml_asymptotic_leading(&q).unwrap(), 0.0);
        let q = MlQuery::new(0.5, 1.0, -100.0).unwrap();
        let lead = eval_ml_asymptotic_leading(&q).unwrap();
        assert!((lead - 0.005_641_895_835_477_563).abs() < 1e-15);
        assert!((eval_ml(&q).unwrap() - lead).abs() < 1e-5);
        assert!(eval_ml_asymptotic_leading(&MlQuery::new(0.5, 1.0, -5.0).unwrap()).is_err());
    }

    #[test]
    fn recurrence_in_beta() {
        for &a in &[0.3, 0.5, 0.8] {
            for &b in &[0.4, 1.0, 1.7] {
                for &t in &[0.5, 2.0, 7.0, 30.0, 200.0] {
                    let lhs = e(a, b, -t);
                    let rhs = -t * e(a, a + b, -t) + 1.0 / gamma(b);
                    assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-3), "{a} {b} {t}");
                }
            }
        }
    }

    #[test]
    fn weighted_examples() {
        let p = CmWeightedParams { alpha: 1.0, beta: 1.0, gamma_w: 1.0, lambda: 1.0 };
        assert!(rel(eval_weighted(&p, 2.0).unwrap(), (-2.0f64).exp()) < 1e-15);
        let p = CmWeightedParams { alpha: 0.5, beta: 0.5, gamma_w: 0.5, lambda: 1.0 };
        assert!(rel(eval_weighted(&p, 1.0).unwrap(), e(0.5, 0.5, -1.0)) < 1e-15);
        assert!(eval_weighted(&p, 0.0).is_err());
    }

    #[test]
    fn cm_parameter_region() {
        let p = |alpha, beta, gamma_w, lambda| CmWeightedParams { alpha, beta, gamma_w, lambda };
        assert!(is_cm_params(&p(0.5, 0.5, 1.0, 1.0)));
        assert!(!is_cm_params(&p(0.9, 0.05, 0.15, 1.0)));
        assert!(is_cm_params(&p(1.0, 1.0, 1.0, 2.0)));
        assert!(!is_cm_params(&p(0.5, 0.5, 1.0, 0.0)));
    }

    #[test]
    fn weighted_is_decreasing_for_cm_parameters() {
        for &(a, b, g) in &[(0.5, 0.5, 0.5), (0.8, 1.0, 1.0), (0.3, 0.9, 0.2), (1.0, 1.5, 0.7)] {
            let p = CmWeightedParams { alpha: a, beta: b, gamma_w: g, lambda: 1.0 };
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let x = 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0);
                let v = eval_weighted(&p, x).unwrap();
                assert!(v < prev, "({a},{b},{g}) at x = {x}");
                prev = v;
            }
        }
    }
}
