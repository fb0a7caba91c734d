//! Seeded property suites over random specs. Draws come from ChaCha8
//! (`rand_chacha`) seeded with `seed_from_u64`; every failure records its
//! draw so it can be replayed without the generator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::powerlaw::{
    max_relative_coeff_diff, nth_level_derivative, projector_apply, rl_integral, PowerSum, Term,
};
use crate::relax::{cm_numeric_check, evaluate_solution, solve_relaxation, RelaxationProblem};
use crate::special::gamma;
use crate::specparams::{classify, kernel_basis, laplace_form, validate, DerivativeSpec};
use crate::volterra::{default_grid, picard_solve, Rhs, VolterraProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Ftfc,
    Projector,
    Kernel,
    Laplace,
    Picard,
    Cm,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Ftfc, Suite::Projector, Suite::Kernel, Suite::Laplace, Suite::Picard, Suite::Cm];

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Ftfc | Suite::Projector => 100,
            Suite::Kernel | Suite::Laplace => 50,
            Suite::Picard => 5,
            Suite::Cm => 25,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Ftfc => "ftfc",
            Suite::Projector => "projector",
            Suite::Kernel => "kernel",
            Suite::Laplace => "laplace",
            Suite::Picard => "picard",
            Suite::Cm => "cm",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown suite `{s}` (known: ftfc, projector, kernel, laplace, picard, cm)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trial: usize,
    pub draw: serde_json::Value,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Tolerances of the suites.
pub const FTFC_TOL: f64 = 1e-10;
pub const KERNEL_TOL: f64 = 1e-12;
pub const PROJECTOR_TOL: f64 = 1e-10;
pub const LAPLACE_TOL: f64 = 1e-10;
pub const PICARD_TOL: f64 = 1e-4;
pub const CM_ORDER: usize = 6;

/// Picard draws stay where the iteration is well conditioned.
pub const PICARD_MIN_ALPHA: f64 = 0.3;
pub const PICARD_SIGMA_FLOOR: f64 = -0.9;

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for trial in 0..trials {
        let (draw, outcome) = match suite {
            Suite::Ftfc => ftfc_trial(&mut rng),
            Suite::Projector => projector_trial(&mut rng),
            Suite::Kernel => kernel_trial(&mut rng),
            Suite::Laplace => laplace_trial(&mut rng),
            Suite::Picard => picard_trial(&mut rng),
            Suite::Cm => cm_trial(&mut rng),
        };
        let detail = match outcome {
            Ok(None) => continue,
            Ok(Some(d)) => d,
            Err(e) => format!("error: {e}"),
        };
        failures.push(Failure { trial, draw, detail });
    }
    Ok(SuiteReport { suite, seed, trials, failures })
}

type Trial = (serde_json::Value, Result<Option<String>>);

/// Random truly-nth-level spec of level n: the kernel exponents
/// 0 ≥ σ_1 > ... > σ_n > -1 with σ_1 ≥ α - 1 determine γ uniquely.
pub fn random_truly_nth<R: Rng>(rng: &mut R, n: usize) -> DerivativeSpec {
    loop {
        let alpha: f64 = rng.gen_range(0.05..=1.0);
        let s1 = rng.gen_range((alpha - 1.0)..=0.0);
        let mut sigma = vec![s1];
        let mut rest: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..s1)).collect();
        rest.sort_by(|a, b| b.total_cmp(a));
        sigma.extend(rest);
        let mut gamma = Vec::with_capacity(n);
        let mut prev_s = 0.0;
        for (i, sg) in sigma.iter().enumerate() {
            let s = sg - alpha + (i + 1) as f64;
            gamma.push(s - prev_s);
            prev_s = s;
        }
        if let Ok(spec) = DerivativeSpec::new(alpha, gamma) {
            if validate(&spec).map(|v| v.truly_nth_level).unwrap_or(false) {
                return spec;
            }
        }
    }
}

/// Uniform point of the closed triangle with vertices (0, 1), (1-α, 1),
/// (1-α, α) in the (γ_1, γ_2) plane.
pub fn random_triangle_spec<R: Rng>(rng: &mut R) -> DerivativeSpec {
    loop {
        let alpha: f64 = rng.gen_range(0.05..=1.0);
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let g1 = u * (1.0 - alpha) + v * (1.0 - alpha);
        let g2 = 1.0 + v * (alpha - 1.0);
        if let Ok(spec) = DerivativeSpec::new(alpha, vec![g1, g2]) {
            if validate(&spec).map(|r| r.valid).unwrap_or(false) {
                return spec;
            }
        }
    }
}

fn spec_json(spec: &DerivativeSpec) -> serde_json::Value {
    json!({ "alpha": spec.alpha, "gamma": spec.gamma })
}

fn ftfc_trial(rng: &mut ChaCha8Rng) -> Trial {
    let n = rng.gen_range(1..=4);
    let spec = random_truly_nth(rng, n);
    // exponents above -α keep every intermediate exponent positive
    let mu = rng.gen_range((-0.5f64).max(-spec.alpha) + 1e-3..=3.0);
    let c = rng.gen_range(-2.0..2.0);
    let draw = json!({ "spec": spec_json(&spec), "c": c, "mu": mu });
    let run = || -> Result<Option<String>> {
        let f = PowerSum::monomial(c, mu)?;
        let back = nth_level_derivative(&spec, &rl_integral(spec.alpha, &f)?)?;
        let err = max_relative_coeff_diff(&back, &f, 1e-300);
        Ok((err > FTFC_TOL).then(|| format!("D I^alpha f differs from f: relative {err:e}")))
    };
    (draw, run())
}

fn kernel_trial(rng: &mut ChaCha8Rng) -> Trial {
    let n = rng.gen_range(1..=4);
    let spec = random_truly_nth(rng, n);
    let draw = json!({ "spec": spec_json(&spec) });
    let run = || -> Result<Option<String>> {
        for (k, b) in kernel_basis(&spec)?.iter().enumerate() {
            let img = nth_level_derivative(&spec, b)?;
            let m = img.max_abs_coeff();
            if m > KERNEL_TOL {
                return Ok(Some(format!("kernel monomial {} maps to coefficient {m:e}", k + 1)));
            }
        }
        Ok(None)
    };
    (draw, run())
}

/// f = Σ c_k x^{σ_k} + I^α g with g a random power sum whose exponents lie
/// above -α; returns (spec, c, terms of g).
fn kernel_plus_range(rng: &mut ChaCha8Rng) -> (DerivativeSpec, Vec<f64>, Vec<Term>) {
    let n = rng.gen_range(1..=4);
    let spec = random_truly_nth(rng, n);
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let lo = (-0.5f64).max(-spec.alpha) + 1e-3;
    let g: Vec<Term> = (0..rng.gen_range(1..=3))
        .map(|_| Term { c: rng.gen_range(-2.0..2.0), mu: rng.gen_range(lo..=3.0) })
        .collect();
    (spec, c, g)
}

fn build_f(spec: &DerivativeSpec, c: &[f64], g: &PowerSum) -> Result<PowerSum> {
    let kernel = PowerSum::from_terms(
        spec.sigma().into_iter().zip(c).map(|(mu, &c)| Term { c, mu }),
    )?;
    Ok(kernel.add(&rl_integral(spec.alpha, g)?))
}

fn projector_trial(rng: &mut ChaCha8Rng) -> Trial {
    let (spec, c, g_terms) = kernel_plus_range(rng);
    let draw = json!({ "spec": spec_json(&spec), "c": c, "g": g_terms });
    let run = || -> Result<Option<String>> {
        let g = PowerSum::from_terms(g_terms.clone())?;
        let f = build_f(&spec, &c, &g)?;
        let (coeffs, remainder) = projector_apply(&spec, &f)?;
        for (k, (p, ck)) in coeffs.p.iter().zip(&c).enumerate() {
            let err = (p - ck).abs() / ck.abs().max(1.0);
            if err > PROJECTOR_TOL {
                return Ok(Some(format!("p_{} = {p} but kernel coefficient is {ck}", k + 1)));
            }
        }
        let lhs = rl_integral(spec.alpha, &nth_level_derivative(&spec, &f)?)?;
        let scale = f.max_abs_coeff().max(1.0);
        let res = lhs.sub(&remainder).max_abs_coeff() / scale;
        Ok((res > PROJECTOR_TOL).then(|| format!("I^alpha D f - (f - P f) has coefficient {res:e}")))
    };
    (draw, run())
}

fn laplace_power_sum(f: &PowerSum, s: f64) -> f64 {
    f.terms().iter().map(|t| t.c * gamma(t.mu + 1.0) * s.powf(-t.mu - 1.0)).sum()
}

fn laplace_trial(rng: &mut ChaCha8Rng) -> Trial {
    let (spec, c, g_terms) = kernel_plus_range(rng);
    let s: f64 = rng.gen_range(0.5..5.0);
    let draw = json!({ "spec": spec_json(&spec), "c": c, "g": g_terms, "s": s });
    let run = || -> Result<Option<String>> {
        let g = PowerSum::from_terms(g_terms.clone())?;
        let f = build_f(&spec, &c, &g)?;
        let (coeffs, _) = projector_apply(&spec, &f)?;
        let a: Vec<f64> = coeffs
            .p
            .iter()
            .zip(&coeffs.sigma)
            .map(|(p, sg)| p * gamma(sg + 1.0))
            .collect();
        let form = laplace_form(&spec, &a)?;
        let df = nth_level_derivative(&spec, &f)?;
        let direct = laplace_power_sum(&df, s);
        let via = form.transform_of_derivative(s, laplace_power_sum(&f, s));
        let scale = direct.abs().max(form.initial_part(s).abs()).max(1e-300);
        let err = (direct - via).abs() / scale;
        Ok((err > LAPLACE_TOL).then(|| format!("L[D f]({s}) = {direct} vs {via}: relative {err:e}")))
    };
    (draw, run())
}

/// Sup-norm relative difference, over nodes in [x_lo, x_max], between the
/// Picard solution with F = -λy and the Mittag-Leffler closed form.
pub fn picard_vs_closed_form(
    spec: &DerivativeSpec,
    y: &[f64],
    lambda: f64,
    x_max: f64,
    m: usize,
    x_lo: f64,
) -> Result<f64> {
    let grid = default_grid(spec, x_max, m)?;
    let p = VolterraProblem::new(spec.clone(), Rhs::linear(-lambda), y.to_vec(), grid, 1e-10, 2000)?;
    let out = picard_solve(&p)?;
    let sol = solve_relaxation(&RelaxationProblem::new(spec.clone(), lambda, y.to_vec())?)?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (&x, &v) in out.solution.nodes().iter().zip(&out.solution.values) {
        if x < x_lo {
            continue;
        }
        let exact = evaluate_solution(&sol, x)?;
        num = num.max((v - exact).abs());
        den = den.max(exact.abs());
    }
    Ok(num / den)
}

fn picard_trial(rng: &mut ChaCha8Rng) -> Trial {
    let n = rng.gen_range(1..=3);
    // Small α makes the Picard series need thousands of terms with huge
    // partial sums, and σ near -1 defeats the grid quadrature.
    let spec = loop {
        let spec = random_truly_nth(rng, n);
        let floor = spec.sigma().last().copied().unwrap_or(0.0);
        if spec.alpha >= PICARD_MIN_ALPHA && floor >= PICARD_SIGMA_FLOOR {
            break spec;
        }
    };
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let lambda = rng.gen_range(0.2..2.0);
    let draw = json!({ "spec": spec_json(&spec), "y": y, "lambda": lambda });
    let run = || -> Result<Option<String>> {
        let err = picard_vs_closed_form(&spec, &y, lambda, 2.0, 1024, 0.1)?;
        Ok((err > PICARD_TOL).then(|| format!("Picard vs closed form: relative {err:e}")))
    };
    (draw, run())
}

/// Truly 3rd-level spec with every σ_k in [α - 1, 0], i.e. s_k ≥ k - 1.
pub fn random_cm_third_level<R: Rng>(rng: &mut R) -> DerivativeSpec {
    loop {
        let alpha: f64 = rng.gen_range(0.05..=1.0);
        let mut sigma: Vec<f64> = (0..3).map(|_| rng.gen_range((alpha - 1.0)..=0.0)).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let mut gamma = Vec::with_capacity(3);
        let mut prev_s = 0.0;
        for (i, sg) in sigma.iter().enumerate() {
            let s = sg - alpha + (i + 1) as f64;
            gamma.push(s - prev_s);
            prev_s = s;
        }
        if let Ok(spec) = DerivativeSpec::new(alpha, gamma) {
            if validate(&spec).map(|v| v.truly_nth_level).unwrap_or(false) {
                return spec;
            }
        }
    }
}

/// CM-admissible relaxation problem, λ and y ≥ 0: a triangle spec two times
/// in three, otherwise a 3rd-level analog.
pub fn random_cm_problem<R: Rng>(rng: &mut R) -> RelaxationProblem {
    let spec = if rng.gen_range(0..3) < 2 {
        random_triangle_spec(rng)
    } else {
        random_cm_third_level(rng)
    };
    let dim = classify(&spec).map(|c| c.kept.len()).unwrap_or(2);
    let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..2.0)).collect();
    let lambda = rng.gen_range(0.2..3.0);
    RelaxationProblem::new(spec, lambda, y).expect("sampled specs are valid")
}

fn cm_trial(rng: &mut ChaCha8Rng) -> Trial {
    let p = random_cm_problem(rng);
    let draw = json!({ "spec": spec_json(&p.spec), "y": p.y, "lambda": p.lambda });
    let run = || -> Result<Option<String>> {
        let sol = solve_relaxation(&p)?;
        let r = cm_numeric_check(|x| evaluate_solution(&sol, x), 1e-2, 1e3, CM_ORDER)?;
        Ok(r.violations.first().map(|v| {
            format!(
                "{} violations; first at order {} x = {}: {:e}",
                r.violations.len(),
                v.order,
                v.x,
                v.value
            )
        }))
    };
    (draw, run())
}
