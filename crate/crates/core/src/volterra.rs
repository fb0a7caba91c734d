//! Picard iteration for D^{α,(γ)} y = F(x, y) in its Volterra form
//! y = I^α F(·, y) + Σ y_k x^{σ_k}/Γ(σ_k+1).
//!
//! The homogeneous part is kept as an exact power sum; only u = I^α F(·, y)
//! lives on the grid, so the x^{σ_k} singularities are never interpolated.
//! Convergence is not proved; F is assumed Lipschitz in y on the range the
//! iterates visit, and every result carries its fixed-point residual.

use std::fmt;
use std::sync::Arc;

use crate::gridops::{GradedGrid, RlWeights, SampledFunction};
use crate::powerlaw::{evaluate, PowerSum};
use crate::relax::solve_homogeneous;
use crate::specparams::{classify, DerivativeSpec};
use crate::{Error, Result};

/// Right-hand side F(x, y) together with a printable name.
#[derive(Clone)]
pub struct Rhs {
    name: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Rhs {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Rhs { name: name.into(), f: Arc::new(f) }
    }

    /// F(x, y) = c y.
    pub fn linear(c: f64) -> Self {
        Rhs::new(format!("linear:{c}"), move |_, y| c * y)
    }

    /// F(x, y) = a y (1 - y/b).
    pub fn logistic(a: f64, b: f64) -> Self {
        Rhs::new(format!("logistic:{a},{b}"), move |_, y| a * y * (1.0 - y / b))
    }

    /// Parses `linear:c` or `logistic:a,b`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("rhs `{s}`: expected kind:params")))?;
        let nums = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("rhs `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("rhs `{s}`: parameters must be finite")));
        }
        match (kind.trim(), nums.as_slice()) {
            ("linear", [c]) => Ok(Rhs::linear(*c)),
            ("logistic", [a, b]) => {
                if *b == 0.0 {
                    return Err(Error::Parse(format!("rhs `{s}`: capacity b must be nonzero")));
                }
                Ok(Rhs::logistic(*a, *b))
            }
            ("linear", _) => Err(Error::Parse(format!("rhs `{s}`: linear takes one parameter"))),
            ("logistic", _) => Err(Error::Parse(format!("rhs `{s}`: logistic takes two parameters"))),
            (k, _) => Err(Error::Parse(format!("unknown rhs kind `{k}` (known: linear, logistic)"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

impl fmt::Debug for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rhs({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub struct VolterraProblem {
    pub spec: DerivativeSpec,
    pub rhs: Rhs,
    /// Initial values for the kernel exponents of the reduced spec.
    pub y: Vec<f64>,
    pub grid: GradedGrid,
    /// Stopping tolerance on the change, scaled nodewise by max(1, |y|).
    pub tol: f64,
    pub max_iter: usize,
}

impl VolterraProblem {
    pub fn new(
        spec: DerivativeSpec,
        rhs: Rhs,
        y: Vec<f64>,
        grid: GradedGrid,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        let p = VolterraProblem { spec, rhs, y, grid, tol, max_iter };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::ParameterOutOfRange("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Exponent of the most singular homogeneous term with y_k ≠ 0.
    fn leading_exponent(&self, h: &PowerSum) -> Option<f64> {
        h.min_exponent()
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutput {
    pub solution: SampledFunction,
    pub iterations: usize,
    /// Sup-norm fixed-point residual of `solution`.
    pub residual: f64,
    /// Scaled change of each iteration.
    pub history: Vec<f64>,
}

struct Setup {
    h: Vec<f64>,
    weights: RlWeights,
    sigma_f: Option<f64>,
}

fn setup(p: &VolterraProblem) -> Result<Setup> {
    p.check()?;
    let hom = solve_homogeneous(&p.spec, &p.y)?;
    let h = p
        .grid
        .nodes()
        .iter()
        .map(|&x| evaluate(&hom, x))
        .collect::<Result<Vec<_>>>()?;
    let weights = RlWeights::new(&p.grid, p.spec.alpha)?;
    Ok(Setup { h, weights, sigma_f: p.leading_exponent(&hom) })
}

/// I^α F(·, y) at the nodes.
fn integrate_rhs(p: &VolterraProblem, s: &Setup, y: &[f64], iteration: usize) -> Result<Vec<f64>> {
    let x = p.grid.nodes();
    let mut fv = Vec::with_capacity(y.len());
    for (&xi, &yi) in x.iter().zip(y) {
        let v = p.rhs.eval(xi, yi);
        if !v.is_finite() {
            return Err(Error::NotFinite(format!(
                "F({xi}, {yi}) = {v} in Picard iteration {iteration}"
            )));
        }
        fv.push(v);
    }
    let f = SampledFunction::new(p.grid.clone(), fv, s.sigma_f)?;
    s.weights.apply(&f)
}

/// max_i |a_i - b_i| / max(1, |a_i|).
fn scaled_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs() / u.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn pack(p: &VolterraProblem, s: &Setup, y: Vec<f64>) -> Result<SampledFunction> {
    SampledFunction::new(p.grid.clone(), y, s.sigma_f)
}

/// Iterates y_{j+1} = I^α F(·, y_j) + H from y_0 = H until
/// max_i |y_{j+1} - y_j|_i / max(1, |y_{j+1}|_i) ≤ tol. Singular terms make
/// the iterates huge near the origin, so a plain sup-norm test would be
/// dominated by the first few nodes.
pub fn picard_solve(p: &VolterraProblem) -> Result<PicardOutput> {
    let s = setup(p)?;
    let mut y = s.h.clone();
    let mut history = Vec::new();
    for it in 1..=p.max_iter {
        let u = integrate_rhs(p, &s, &y, it)?;
        let next: Vec<f64> = u.iter().zip(&s.h).map(|(a, b)| a + b).collect();
        let change = scaled_change(&next, &y);
        if !change.is_finite() {
            return Err(Error::NotFinite(format!("Picard iterate {it} diverged")));
        }
        history.push(change);
        y = next;
        if change <= p.tol {
            let solution = pack(p, &s, y)?;
            let residual = residual_with(p, &s, &solution)?;
            return Ok(PicardOutput { solution, iterations: it, residual, history });
        }
    }
    let last = pack(p, &s, y)?;
    let residual = residual_with(p, &s, &last)?;
    Err(Error::NonConvergence {
        iterations: p.max_iter,
        residual,
        last_iterate: Box::new(last),
    })
}

fn residual_with(p: &VolterraProblem, s: &Setup, c: &SampledFunction) -> Result<f64> {
    let u = integrate_rhs(p, s, &c.values, 0)?;
    Ok(c.values
        .iter()
        .zip(u.iter().zip(&s.h))
        .map(|(v, (a, b))| (v - a - b).abs())
        .fold(0.0, f64::max))
}

/// sup |c - (I^α F(·, c) + H)| over the nodes.
pub fn residual(p: &VolterraProblem, candidate: &SampledFunction) -> Result<f64> {
    if !candidate.grid.same_as(&p.grid) {
        return Err(Error::GridMismatch("candidate is not sampled on the problem grid".into()));
    }
    let s = setup(p)?;
    residual_with(p, &s, candidate)
}

/// Default grid for a problem on [0, x_max]: graded for the kernel exponents.
pub fn default_grid(spec: &DerivativeSpec, x_max: f64, m: usize) -> Result<GradedGrid> {
    let c = classify(spec)?;
    GradedGrid::for_exponents(x_max, m, &c.effective.sigma())
}
