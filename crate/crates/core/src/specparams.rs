//! Order/type parameters of the nth-level derivative: validation,
//! classification and the coefficient formulas that depend only on them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::powerlaw::PowerSum;
use crate::{Error, Result};

/// Absolute tolerance for every boundary comparison on α and γ.
pub const PARAM_TOL: f64 = 1e-12;

/// D^{α,(γ)} = I^{γ_1} d/dx I^{γ_2} d/dx ... I^{γ_n} d/dx I^{n-α-s_n}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSpec {
    pub n: usize,
    pub alpha: f64,
    pub gamma: Vec<f64>,
}

impl DerivativeSpec {
    /// Builds a spec with n = gamma.len(), checking only structural sanity.
    pub fn new(alpha: f64, gamma: Vec<f64>) -> Result<Self> {
        let spec = DerivativeSpec { n: gamma.len(), alpha, gamma };
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn riemann_liouville(alpha: f64) -> Result<Self> {
        Self::new(alpha, vec![0.0])
    }

    pub fn caputo(alpha: f64) -> Result<Self> {
        Self::new(alpha, vec![1.0 - alpha])
    }

    pub fn hilfer(alpha: f64, gamma1: f64) -> Result<Self> {
        Self::new(alpha, vec![gamma1])
    }

    fn check_structure(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("level n must be at least 1".into()));
        }
        if self.gamma.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "gamma",
                expected: self.n,
                got: self.gamma.len(),
            });
        }
        if !self.alpha.is_finite() || !self.gamma.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidSpec("parameters must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "order alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Partial sums s_k = γ_1 + ... + γ_k.
    pub fn s(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .scan(0.0, |acc, g| {
                *acc += g;
                Some(*acc)
            })
            .collect()
    }

    /// Kernel exponents σ_k = α + s_k - k.
    pub fn sigma(&self) -> Vec<f64> {
        self.s()
            .iter()
            .enumerate()
            .map(|(i, s)| self.alpha + s - (i + 1) as f64)
            .collect()
    }

    /// Order of the innermost integral, n - α - s_n.
    pub fn inner_order(&self) -> f64 {
        self.n as f64 - self.alpha - self.gamma.iter().sum::<f64>()
    }

    /// Validates and fails unless the constraints 0 ≤ γ_k, α + s_k ≤ k hold.
    pub fn require_valid(&self) -> Result<ValidationReport> {
        let report = validate(self)?;
        if !report.valid {
            return Err(Error::InvalidSpec(report.failures.join("; ")));
        }
        Ok(report)
    }
}

impl fmt::Display for DerivativeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g: Vec<String> = self.gamma.iter().map(|&x| short(x)).collect();
        write!(f, "n={}, alpha={}, gamma=({})", self.n, short(self.alpha), g.join(", "))
    }
}

/// Compact decimal rendering used in labels: at most 12 significant decimals.
pub fn short(x: f64) -> String {
    let s = format!("{:.12}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub truly_nth_level: bool,
    pub cm_admissible: bool,
    pub s: Vec<f64>,
    pub sigma: Vec<f64>,
    pub failures: Vec<String>,
}

/// Checks the admissibility constraints, the truly-nth-level conditions and
/// the conditions k - 1 ≤ s_k under which relaxation solutions are CM.
pub fn validate(spec: &DerivativeSpec) -> Result<ValidationReport> {
    spec.check_structure()?;
    let s = spec.s();
    let sigma = spec.sigma();
    let n = spec.n;
    let mut failures = Vec::new();

    let mut valid = true;
    for k in 1..=n {
        let g = spec.gamma[k - 1];
        if g < -PARAM_TOL {
            valid = false;
            failures.push(format!("gamma_{k} = {} is negative", short(g)));
        }
        if spec.alpha + s[k - 1] > k as f64 + PARAM_TOL {
            valid = false;
            failures.push(format!(
                "alpha + s_{k} = {} exceeds {k}",
                short(spec.alpha + s[k - 1])
            ));
        }
    }

    let mut truly = spec.alpha + s[n - 1] > (n - 1) as f64 + PARAM_TOL;
    if !truly {
        failures.push(format!(
            "alpha + s_{n} = {} is not above {}",
            short(spec.alpha + s[n - 1]),
            n - 1
        ));
    }
    for k in 2..=n {
        if spec.gamma[k - 1] >= 1.0 - PARAM_TOL {
            truly = false;
            failures.push(format!("gamma_{k} = {} is not below 1", short(spec.gamma[k - 1])));
        }
    }

    let mut cm = true;
    for k in 1..=n {
        if s[k - 1] < (k - 1) as f64 - PARAM_TOL {
            cm = false;
            failures.push(format!("s_{k} = {} is below {} (CM condition)", short(s[k - 1]), k - 1));
        }
    }

    Ok(ValidationReport {
        valid,
        truly_nth_level: valid && truly,
        cm_admissible: cm,
        s,
        sigma,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpecClass {
    RiemannLiouville,
    Caputo,
    Hilfer(f64),
    TrulyNthLevel,
    Reduced(Box<DerivativeSpec>),
}

impl fmt::Display for SpecClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecClass::RiemannLiouville => write!(f, "RiemannLiouville"),
            SpecClass::Caputo => write!(f, "Caputo"),
            SpecClass::Hilfer(g) => write!(f, "Hilfer({})", short(*g)),
            SpecClass::TrulyNthLevel => write!(f, "TrulyNthLevel"),
            SpecClass::Reduced(s) => write!(f, "Reduced({s})"),
        }
    }
}

/// Result of [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: SpecClass,
    /// Class of `effective`; never `Reduced`.
    pub base: SpecClass,
    /// Equivalent spec satisfying the truly-nth-level conditions.
    pub effective: DerivativeSpec,
    /// 0-based indices of the original factors whose kernel exponents survive
    /// the reduction; σ of `effective` equals the original σ at these indices.
    pub kept: Vec<usize>,
    pub notes: Vec<String>,
}

impl Classification {
    pub fn is_reduced(&self) -> bool {
        matches!(self.class, SpecClass::Reduced(_))
    }
}

fn base_class(spec: &DerivativeSpec) -> SpecClass {
    if spec.n > 1 {
        return SpecClass::TrulyNthLevel;
    }
    let g = spec.gamma[0];
    if g.abs() <= PARAM_TOL {
        SpecClass::RiemannLiouville
    } else if (g - (1.0 - spec.alpha)).abs() <= PARAM_TOL {
        SpecClass::Caputo
    } else {
        SpecClass::Hilfer(g)
    }
}

/// Reduces a degenerate spec to its truly-nth-level equivalent.
///
/// Two rewrites are applied greedily, innermost factor first:
/// if α + s_n ≤ n - 1 then d/dx I^{n-α-s_n} = I^{n-1-α-s_n} and the last
/// factor disappears; if γ_k ≥ 1 (k ≥ 2) then I^{γ_{k-1}} d/dx I^{γ_k} d/dx
/// = I^{γ_{k-1}+γ_k-1} d/dx and factors k-1, k merge.
pub fn classify(spec: &DerivativeSpec) -> Result<Classification> {
    spec.require_valid()?;
    let alpha = spec.alpha;
    let mut gamma = spec.gamma.clone();
    let mut kept: Vec<usize> = (0..spec.n).collect();
    let mut notes = Vec::new();

    loop {
        let n = gamma.len();
        let s_n: f64 = gamma.iter().sum();
        if n > 1 && alpha + s_n <= (n - 1) as f64 + PARAM_TOL {
            notes.push(format!(
                "alpha + s_{n} = {} <= {}: innermost d/dx I^{} collapses, dropping factor {n}",
                short(alpha + s_n),
                n - 1,
                short(n as f64 - alpha - s_n)
            ));
            gamma.pop();
            kept.pop();
            continue;
        }
        if let Some(k) = (1..n).rev().find(|&k| gamma[k] >= 1.0 - PARAM_TOL) {
            let merged = gamma[k - 1] + gamma[k] - 1.0;
            notes.push(format!(
                "gamma_{} = {} >= 1: factors {} and {} merge into type {}",
                k + 1,
                short(gamma[k]),
                k,
                k + 1,
                short(merged)
            ));
            gamma[k - 1] = merged;
            gamma.remove(k);
            kept.remove(k - 1);
            continue;
        }
        break;
    }

    let effective = DerivativeSpec { n: gamma.len(), alpha, gamma };
    let base = base_class(&effective);
    let class = if effective.n < spec.n {
        SpecClass::Reduced(Box::new(effective.clone()))
    } else {
        base.clone()
    };
    Ok(Classification { class, base, effective, kept, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    RlVertex,
    CaputoVertex,
    Truly2LVertex,
    HilferEdge,
    Truly2LEdgeGamma1,
    Truly2LEdgeGamma2,
    Interior,
    OutsideTriangle,
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegionLabel::RlVertex => "RL-vertex",
            RegionLabel::CaputoVertex => "Caputo-vertex",
            RegionLabel::Truly2LVertex => "Truly2L-vertex",
            RegionLabel::HilferEdge => "Hilfer-edge",
            RegionLabel::Truly2LEdgeGamma1 => "Truly2L-edge-γ1=1−α",
            RegionLabel::Truly2LEdgeGamma2 => "Truly2L-edge-γ2=1−γ1",
            RegionLabel::Interior => "Interior",
            RegionLabel::OutsideTriangle => "OutsideTriangle",
        };
        f.write_str(s)
    }
}

/// Position of a 2nd-level type (γ_1, γ_2) relative to the closed triangle
/// with vertices (0, 1), (1-α, 1), (1-α, α) in which the relaxation solution
/// is completely monotone. The upper edge γ_2 = 1 (reducible to 1st level)
/// is part of the triangle.
pub fn triangle_region(spec: &DerivativeSpec) -> Result<RegionLabel> {
    spec.check_structure()?;
    if spec.n != 2 {
        return Err(Error::InvalidSpec(format!(
            "triangle regions are defined for n = 2 only, got n = {}",
            spec.n
        )));
    }
    let t = PARAM_TOL;
    let a = spec.alpha;
    let (g1, g2) = (spec.gamma[0], spec.gamma[1]);
    let eq = |x: f64, y: f64| (x - y).abs() <= t;

    let inside = g1 >= -t && g1 <= 1.0 - a + t && g2 <= 1.0 + t && g1 + g2 >= 1.0 - t;
    if !inside {
        return Ok(RegionLabel::OutsideTriangle);
    }
    let on_top = eq(g2, 1.0);
    let on_right = eq(g1, 1.0 - a);
    let on_diag = eq(g1 + g2, 1.0);
    Ok(if on_top && eq(g1, 0.0) {
        RegionLabel::RlVertex
    } else if on_top && on_right {
        RegionLabel::CaputoVertex
    } else if on_right && on_diag {
        RegionLabel::Truly2LVertex
    } else if on_top {
        RegionLabel::HilferEdge
    } else if on_right {
        RegionLabel::Truly2LEdgeGamma1
    } else if on_diag {
        RegionLabel::Truly2LEdgeGamma2
    } else {
        RegionLabel::Interior
    })
}

/// Monomials x^{σ_k} spanning the kernel. Degenerate specs yield the
/// (smaller) basis of their reduced form.
pub fn kernel_basis(spec: &DerivativeSpec) -> Result<Vec<PowerSum>> {
    let c = classify(spec)?;
    let sigma = spec.sigma();
    c.kept.iter().map(|&k| PowerSum::monomial(1.0, sigma[k])).collect()
}

/// p_k and σ_k of the projector P f = Σ p_k x^{σ_k}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorCoeffs {
    pub p: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceTerm {
    pub a: f64,
    pub exponent: f64,
}

/// s^α F(s) - Σ a_k s^{k - s_k - 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceForm {
    pub alpha: f64,
    pub terms: Vec<LaplaceTerm>,
}

impl LaplaceForm {
    /// Value of the subtracted sum Σ a_k s^{k-s_k-1} at s > 0.
    pub fn initial_part(&self, s: f64) -> f64 {
        self.terms.iter().filter(|t| t.a != 0.0).map(|t| t.a * s.powf(t.exponent)).sum()
    }

    /// L[D f](s) given L[f](s).
    pub fn transform_of_derivative(&self, s: f64, f_hat: f64) -> f64 {
        s.powf(self.alpha) * f_hat - self.initial_part(s)
    }
}

/// Laplace image of the derivative; the a_k of factors removed by reduction
/// are set to zero.
pub fn laplace_form(spec: &DerivativeSpec, a: &[f64]) -> Result<LaplaceForm> {
    if a.len() != spec.n {
        return Err(Error::LengthMismatch { what: "a", expected: spec.n, got: a.len() });
    }
    let c = classify(spec)?;
    let s = spec.s();
    let terms = (0..spec.n)
        .map(|i| LaplaceTerm {
            a: if c.kept.contains(&i) { a[i] } else { 0.0 },
            exponent: (i + 1) as f64 - s[i] - 1.0,
        })
        .collect();
    Ok(LaplaceForm { alpha: spec.alpha, terms })
}
