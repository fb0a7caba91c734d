//! Real-line integral forms of E_{α,β}(-t).
//!
//! For 0 < α < 1 and 0 < β < 1 + α, deforming the Hankel contour of 1/Γ onto
//! the negative axis gives
//!
//! ```text
//! E_{α,β}(-t) = 1/π ∫_0^∞ u^{α-β} e^{-u} (u^α sin π(1-β) + t sin π(1-β+α))
//!                                       / (u^{2α} + 2 t u^α cos απ + t²) du.
//! ```
//!
//! With u = v^p, p = 1/(1+α-β), the algebraic factor u^{α-β} du becomes p dv.
//! The denominator vanishes at u^α = t e^{i(1+α)π}; the root nearest the real
//! axis sits at angle π(1-α)/α, which is small for α near 1, so the v-axis is
//! cut into segments graded toward the real part of that root.

use std::f64::consts::PI;

use super::limits::{EXP_CUTOFF, QUADRATURE_REL_TOL};
use crate::quad::{exp_sinh, tanh_sinh};
use crate::special::reciprocal_gamma;

pub(super) fn representation(alpha: f64, beta: f64, t: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0 + alpha && t > 0.0);
    let p = 1.0 / (1.0 + alpha - beta);
    let sin_b = (PI * (1.0 - beta)).sin();
    let sin_ab = (PI * (1.0 - beta + alpha)).sin();
    let (sa, ca) = (alpha * PI).sin_cos();
    let pa = p * alpha;
    let integrand = |v: f64| -> f64 {
        let u = v.powf(p);
        let ua = v.powf(pa);
        let re = ua + t * ca;
        let im = t * sa;
        let den = re * re + im * im;
        (-u).exp() * (ua * sin_b + t * sin_ab) / den
    };

    let v_cut = (2.0 * EXP_CUTOFF).powf(1.0 / p);
    let radius = t.powf(1.0 / pa);
    let angle = PI * (1.0 - alpha) / alpha / p;
    let mut cuts = Vec::new();
    if radius < v_cut {
        if angle < 0.5 * PI {
            let c = radius * angle.cos();
            let w = radius * angle.sin();
            cuts.push(c);
            let mut d = w;
            while c - d > 0.0 || c + d < v_cut {
                if c - d > 0.0 {
                    cuts.push(c - d);
                }
                if c + d < v_cut {
                    cuts.push(c + d);
                }
                d *= 3.0;
            }
        } else {
            cuts.push(radius);
        }
    }
    cuts.push(v_cut.min(1.0).max(cuts.iter().cloned().fold(0.0, f64::max)));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut total = 0.0;
    let mut lo = 0.0;
    for &b in &cuts {
        if b > lo {
            total += tanh_sinh(integrand, lo, b, QUADRATURE_REL_TOL).value;
            lo = b;
        }
    }
    total += exp_sinh(integrand, lo, lo.max(1.0), QUADRATURE_REL_TOL).value;
    p / PI * total
}

/// E_{1,β}(-t) for t > 0 through the finite integrals
/// E_{1,β}(-t) = 1/Γ(β-1) ∫_0^1 (1-v)^{β-2} e^{-tv} dv (β > 1) and
/// E_{1,β}(-t) = 1/Γ(β) [t ∫_0^1 (1 - (1-v)^{β-1}) e^{-tv} dv + e^{-t}] (β < 1).
/// Each integral is split at v = 1/2 and the half touching v = 1 is
/// integrated in w = 1 - v, so the endpoint singularity sits at the origin.
pub(super) fn alpha_one(beta: f64, t: f64) -> f64 {
    if beta == 1.0 {
        return (-t).exp();
    }
    let tol = QUADRATURE_REL_TOL;
    // the far half is bounded by e^{-t/2} times an O(1) integral
    let far = t < 1500.0;
    if beta > 1.0 {
        let b = beta - 2.0;
        let near = tanh_sinh(|v| (b * (-v).ln_1p()).exp() * (-t * v).exp(), 0.0, 0.5, tol).value;
        let rest = if far {
            tanh_sinh(|w| w.powf(b) * (-t * (1.0 - w)).exp(), 0.0, 0.5, tol).value
        } else {
            0.0
        };
        (near + rest) * reciprocal_gamma(beta - 1.0)
    } else {
        let b = beta - 1.0;
        let near = tanh_sinh(
            |v| -(b * (-v).ln_1p()).exp_m1() * (-t * v).exp(),
            0.0,
            0.5,
            tol,
        )
        .value;
        let rest = if far {
            tanh_sinh(|w| (1.0 - w.powf(b)) * (-t * (1.0 - w)).exp(), 0.0, 0.5, tol).value
        } else {
            0.0
        };
        (t * (near + rest) + (-t).exp()) * reciprocal_gamma(beta)
    }
}
