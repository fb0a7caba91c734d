//! Sampled functions on graded grids x_i = X (i/m)^r, i = 1..m, and the
//! numerical fractional integral, nth-level derivative and Laplace transform.
//!
//! Every integral treats f as piecewise linear between nodes (with the origin
//! as node 0) and integrates the kernel against it exactly. A known leading
//! behaviour c x^σ near the origin is split off and integrated in closed form.

use std::io::{Read, Write};

use crate::relax::AsymptoticForm;
use crate::special::{gamma, lower_incomplete_gamma, reciprocal_gamma, upper_incomplete_gamma};
use crate::specparams::{kernel_basis, DerivativeSpec, PARAM_TOL};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Smallest node count accepted by the derivative.
pub const MIN_NODES_DERIVATIVE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GradedGrid {
    x_max: f64,
    m: usize,
    r: f64,
    nodes: Vec<f64>,
}

impl GradedGrid {
    pub fn new(x_max: f64, m: usize, r: f64) -> Result<Self> {
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("x_max = {x_max} must be positive")));
        }
        if m < 2 {
            return Err(Error::ParameterOutOfRange(format!("grid needs at least 2 nodes, got {m}")));
        }
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("grading exponent r = {r} must be >= 1")));
        }
        let nodes: Vec<f64> = (1..=m)
            .map(|i| x_max * (i as f64 / m as f64).powf(r))
            .collect();
        if nodes[0] <= 0.0 {
            return Err(Error::ParameterOutOfRange(format!(
                "first node underflows for m = {m}, r = {r}"
            )));
        }
        Ok(GradedGrid { x_max, m, r, nodes })
    }

    /// Grid graded for functions behaving like x^σ near 0:
    /// r = 2 / min(σ_k + 1), clamped to [1, 6].
    pub fn for_exponents(x_max: f64, m: usize, sigma: &[f64]) -> Result<Self> {
        Self::new(x_max, m, default_grading(sigma))
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn same_as(&self, other: &GradedGrid) -> bool {
        self.nodes == other.nodes
    }
}

pub fn default_grading(sigma: &[f64]) -> f64 {
    let lo = sigma.iter().fold(f64::INFINITY, |a, &s| a.min(s + 1.0));
    if !lo.is_finite() || lo <= 0.0 {
        return 6.0;
    }
    (2.0 / lo).clamp(1.0, 6.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: GradedGrid,
    pub values: Vec<f64>,
    /// Known leading behaviour c x^σ at the origin, σ > -1.
    pub singular_exponent: Option<f64>,
}

impl SampledFunction {
    pub fn new(grid: GradedGrid, values: Vec<f64>, singular_exponent: Option<f64>) -> Result<Self> {
        if values.len() != grid.m {
            return Err(Error::LengthMismatch { what: "values", expected: grid.m, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite(format!("sample {i} at x = {}", grid.nodes[i])));
        }
        if let Some(s) = singular_exponent {
            if !(s > -1.0) || !s.is_finite() {
                return Err(Error::ParameterOutOfRange(format!("singular exponent {s} must exceed -1")));
            }
        }
        Ok(SampledFunction { grid, values, singular_exponent })
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(
        grid: &GradedGrid,
        mut f: F,
        singular_exponent: Option<f64>,
    ) -> Result<Self> {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values, singular_exponent)
    }

    pub fn try_from_fn<F: FnMut(f64) -> Result<f64>>(
        grid: &GradedGrid,
        mut f: F,
        singular_exponent: Option<f64>,
    ) -> Result<Self> {
        let values = grid.nodes.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Self::new(grid.clone(), values, singular_exponent)
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Writes `# sigma=<σ>` (when known), the header `x,y` and one row per
    /// node with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(s) = self.singular_exponent {
            writeln!(w, "# sigma={}", fmt17(s))?;
        }
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["x", "y"]).map_err(csv_err)?;
        for (x, y) in self.grid.nodes.iter().zip(&self.values) {
            out.write_record([fmt17(*x), fmt17(*y)]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format of [`write_csv`]; the nodes must form a graded grid.
    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut sigma = None;
        for line in text.lines().filter(|l| l.starts_with('#')) {
            if let Some(v) = line.trim_start_matches('#').trim().strip_prefix("sigma=") {
                sigma = Some(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("sigma comment: {e}")))?,
                );
            }
        }
        let (xs, ys) = read_xy(text.as_bytes())?;
        let grid = grid_from_nodes(&xs)?;
        Self::new(grid, ys, sigma)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Round-trip decimal with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Two-column numeric CSV with header `x,y`; `#` lines are comments.
pub fn read_xy<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::Parse(format!("expected header x,y, got {:?}", headers)));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))
        };
        xs.push(parse(&rec[0])?);
        ys.push(parse(&rec[1])?);
    }
    Ok((xs, ys))
}

fn grid_from_nodes(xs: &[f64]) -> Result<GradedGrid> {
    let m = xs.len();
    if m < 2 || !(xs[0] > 0.0) {
        return Err(Error::GridMismatch("need at least 2 positive nodes".into()));
    }
    let x_max = xs[m - 1];
    let r = (xs[0] / x_max).ln() / (1.0 / m as f64).ln();
    let mut grid = GradedGrid::new(x_max, m, r.max(1.0))?;
    for (a, b) in grid.nodes.iter().zip(xs) {
        if (a - b).abs() > 1e-9 * b.abs() {
            return Err(Error::GridMismatch(format!(
                "nodes are not of the form X (i/m)^r (node {b} vs {a})"
            )));
        }
    }
    // keep the file's nodes bit for bit
    grid.nodes = xs.to_vec();
    Ok(grid)
}

/// Splits v = c t^σ + rest with rest(t_1) = 0; returns (c, rest at nodes 0..=m).
/// Without σ the value at the origin is extrapolated linearly.
fn split_singular(f: &SampledFunction) -> (f64, Vec<f64>) {
    let x = f.grid.nodes();
    let v = &f.values;
    let mut rest = Vec::with_capacity(v.len() + 1);
    match f.singular_exponent {
        Some(s) => {
            let c = v[0] / x[0].powf(s);
            rest.push(0.0);
            rest.extend(x.iter().zip(v).map(|(&t, &y)| y - c * t.powf(s)));
            rest[1] = 0.0;
            (c, rest)
        }
        None => {
            let v0 = v[0] - (v[1] - v[0]) * x[0] / (x[1] - x[0]);
            rest.push(v0);
            rest.extend_from_slice(v);
            (0.0, rest)
        }
    }
}

/// Weights (left, right) of ∫_a^b (x-s)^{ν-1} L(s) ds, L linear with
/// L(a) = left, L(b) = right, for d = x - a ≥ h = b - a > 0.
#[inline]
fn cell_weights(nu: f64, d: f64, h: f64) -> (f64, f64) {
    let w = h / d;
    let dn = d.powf(nu);
    let e1 = -(nu * (-w).ln_1p()).exp_m1();
    let a = dn * e1 / nu;
    let j = if w < 0.1 {
        // Σ_{k≥2} (-w)^k [C(ν,k-1) - C(ν,k)/ν] / (ν+1)
        let mut acc = 0.0;
        let mut c_prev = nu; // C(ν,1)
        let mut pw = -w; // (-w)^1
        for k in 2..40 {
            let c_k = c_prev * (nu - (k as f64 - 1.0)) / k as f64;
            pw *= -w;
            let term = pw * (c_prev - c_k / nu);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
            c_prev = c_k;
        }
        acc / (nu + 1.0)
    } else {
        let q = 1.0 - e1;
        e1 / (nu * (nu + 1.0)) - q * w / (nu + 1.0)
    };
    let b = dn * j * d / h;
    (a - b, b)
}

fn check_order(order: f64) -> Result<()> {
    if !(order > 0.0) || !order.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "grid integral order must be positive, got {order}"
        )));
    }
    Ok(())
}

/// Product-trapezoidal weights of I^ν on a fixed grid, packed lower-triangular:
/// row i (target x_i) holds the weights of nodes 0..=i, node 0 being the origin.
pub struct RlWeights {
    order: f64,
    grid: GradedGrid,
    packed: Vec<f64>,
}

impl RlWeights {
    pub fn new(grid: &GradedGrid, order: f64) -> Result<Self> {
        check_order(order)?;
        let m = grid.m;
        let x = grid.nodes();
        let rg = reciprocal_gamma(order);
        let mut packed = vec![0.0; (m + 1) * (m + 2) / 2 - 1];
        for i in 1..=m {
            let xi = x[i - 1];
            let row = row_start(i);
            let mut lo = 0.0;
            for j in 1..=i {
                let hi = x[j - 1];
                let (wl, wr) = cell_weights(order, xi - lo, hi - lo);
                packed[row + j - 1] += wl * rg;
                packed[row + j] += wr * rg;
                lo = hi;
            }
        }
        Ok(RlWeights { order, grid: grid.clone(), packed })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// I^ν f at the grid nodes.
    pub fn apply(&self, f: &SampledFunction) -> Result<Vec<f64>> {
        if !self.grid.same_as(&f.grid) {
            return Err(Error::GridMismatch("weights were built for another grid".into()));
        }
        let (c, rest) = split_singular(f);
        let mut out = Vec::with_capacity(self.grid.m);
        for i in 1..=self.grid.m {
            let row = &self.packed[row_start(i)..row_start(i) + i + 1];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(&rest) {
                acc += w * v;
            }
            out.push(acc);
        }
        if let Some(s) = f.singular_exponent {
            add_singular_integral(&mut out, self.grid.nodes(), c, s, self.order);
        }
        Ok(out)
    }
}

#[inline]
fn row_start(i: usize) -> usize {
    // rows 1..i-1 have lengths 2..i
    (i - 1) * (i + 2) / 2
}

fn add_singular_integral(out: &mut [f64], x: &[f64], c: f64, s: f64, nu: f64) {
    if c == 0.0 {
        return;
    }
    let k = c * gamma(s + 1.0) * reciprocal_gamma(s + nu + 1.0);
    for (o, &t) in out.iter_mut().zip(x) {
        *o += k * t.powf(s + nu);
    }
}

/// I^ν f on the same grid, ν > 0. The result behaves like x^{σ+ν} at the
/// origin, with σ = 0 for inputs without a known singular exponent.
pub fn rl_integral_grid(order: f64, f: &SampledFunction) -> Result<SampledFunction> {
    check_order(order)?;
    let x = f.grid.nodes();
    let m = f.grid.m;
    let (c, rest) = split_singular(f);
    let rg = reciprocal_gamma(order);
    let mut out = Vec::with_capacity(m);
    for i in 1..=m {
        let xi = x[i - 1];
        let mut acc = CompensatedSum::new();
        let mut lo = 0.0;
        for j in 1..=i {
            let hi = x[j - 1];
            let (wl, wr) = cell_weights(order, xi - lo, hi - lo);
            acc.add(wl * rest[j - 1] + wr * rest[j]);
            lo = hi;
        }
        out.push(acc.value() * rg);
    }
    if let Some(s) = f.singular_exponent {
        add_singular_integral(&mut out, x, c, s, order);
    }
    let mut s = f.singular_exponent.unwrap_or(0.0) + order;
    if s.abs() <= PARAM_TOL {
        s = 0.0;
    }
    SampledFunction::new(f.grid.clone(), out, Some(s))
}

/// Fornberg weights for the first derivative at z from the given nodes.
fn fd_weights(z: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1)
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// d/dx with 5-point finite differences, one-sided near the ends. The
/// differences are taken in the uniform parameter t = (x/X)^{1/r} and mapped
/// back with dx/dt = r x / t; stencils in x itself span decades near the
/// origin on a strongly graded grid.
pub fn derivative_grid(f: &SampledFunction) -> Result<SampledFunction> {
    let m = f.grid.m;
    if m < MIN_NODES_DERIVATIVE {
        return Err(Error::ParameterOutOfRange(format!(
            "derivative needs at least {MIN_NODES_DERIVATIVE} nodes, got {m}"
        )));
    }
    let x = f.grid.nodes();
    let r = f.grid.r;
    let t: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let start = i.saturating_sub(2).min(m - 5);
        let w = fd_weights(t[i], &t[start..start + 5]);
        let dfdt: f64 = w.iter().zip(&f.values[start..start + 5]).map(|(a, b)| a * b).sum();
        out.push(dfdt * t[i] / (r * x[i]));
    }
    let sigma = match f.singular_exponent {
        Some(s) if s != 0.0 && s - 1.0 > -1.0 => Some(s - 1.0),
        _ => None,
    };
    SampledFunction::new(f.grid.clone(), out, sigma)
}

/// Numerical D^{α,(γ)} f: the powers of f fitted at the origin are mapped
/// exactly; the remainder goes through I^{n-α-s_n}, then d/dx followed by
/// I^{γ_k} for k = n, ..., 1. Intended for functions that are smooth away
/// from the origin and behave there like the relaxation solutions.
pub fn nth_level_derivative_grid(spec: &DerivativeSpec, f: &SampledFunction) -> Result<SampledFunction> {
    spec.require_valid()?;
    if f.grid.m < MIN_NODES_DERIVATIVE {
        return Err(Error::ParameterOutOfRange(format!(
            "grid too coarse: m = {} < {MIN_NODES_DERIVATIVE}",
            f.grid.m
        )));
    }
    let (rest, image) = origin_split(spec, f)?;
    let mut g = integrate_or_identity(spec.inner_order(), rest)?;
    for k in (0..spec.n).rev() {
        g = derivative_grid(&g)?;
        g = integrate_or_identity(spec.gamma[k], g)?;
    }
    for (v, im) in g.values.iter_mut().zip(&image) {
        *v += im;
    }
    g.singular_exponent = None;
    Ok(g)
}

/// Powers fitted at the origin before the numerical chain: the kernel
/// exponents σ_k, which the operator annihilates, and σ_k + iα below 1, whose
/// images Γ(μ+α+1)/Γ(μ+1) x^μ (μ = σ_k + (i-1)α) are known exactly. On the
/// grid each of these would be a singularity the quadrature cannot resolve.
const ORIGIN_MAX_SHIFT: usize = 3;
/// At most this many powers are fitted, kernel exponents first, then the
/// smallest shifted ones; more make the interpolation too ill-conditioned.
const ORIGIN_MAX_POWERS: usize = 8;
/// Shifted powers closer than this to an earlier one are dropped.
const ORIGIN_MIN_GAP: f64 = 0.02;

/// Splits f into its fitted origin powers and the remainder; returns the
/// remainder and the exact image of the powers on the grid.
fn origin_split(spec: &DerivativeSpec, f: &SampledFunction) -> Result<(SampledFunction, Vec<f64>)> {
    let x = f.grid.nodes();
    let m = x.len();
    let zero = vec![0.0; m];
    let kernel: Vec<f64> = kernel_basis(spec)?
        .iter()
        .filter_map(|b| b.terms().first().map(|t| t.mu))
        .collect();
    let mut basis: Vec<(f64, usize)> = kernel.iter().map(|&e| (e, 0)).collect();
    for &s in &kernel {
        for i in 1..=ORIGIN_MAX_SHIFT {
            let e = s + i as f64 * spec.alpha;
            if e >= 1.0 {
                break;
            }
            if basis.iter().all(|&(q, _)| (q - e).abs() >= ORIGIN_MIN_GAP) {
                basis.push((e, i));
            }
        }
    }
    basis[kernel.len()..].sort_by(|a, b| a.0.total_cmp(&b.0));
    basis.truncate(ORIGIN_MAX_POWERS.max(kernel.len()));
    let k = basis.len();
    if k == 0 || m < 64 * k {
        return Ok((f.clone(), zero));
    }
    // interpolation nodes spread geometrically over the first m/64 indices
    let top = (m / 64) as f64;
    let mut idx: Vec<usize> = (0..k)
        .map(|j| if k == 1 { 0 } else { (top.powf(j as f64 / (k - 1) as f64)).round() as usize - 1 })
        .collect();
    for j in 1..k {
        idx[j] = idx[j].max(idx[j - 1] + 1);
    }
    let xs = x[idx[k - 1]];
    let mut a: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = basis.iter().map(|&(e, _)| (x[i] / xs).powf(e)).collect();
            row.push(f.values[i]);
            row
        })
        .collect();
    let Some(c) = solve_dense(&mut a) else {
        return Ok((f.clone(), zero));
    };
    let mut rest = f.values.clone();
    let mut image = zero;
    for (&(e, i), ci) in basis.iter().zip(&c) {
        let coef = ci / xs.powf(e);
        let mu = e - spec.alpha;
        let d = if i == 0 { 0.0 } else { coef * gamma(e + 1.0) * reciprocal_gamma(mu + 1.0) };
        for ((r, im), &t) in rest.iter_mut().zip(image.iter_mut()).zip(x) {
            *r -= coef * t.powf(e);
            if d != 0.0 {
                *im += d * t.powf(mu);
            }
        }
    }
    Ok((SampledFunction::new(f.grid.clone(), rest, None)?, image))
}

/// Gaussian elimination with partial pivoting on an augmented k × (k+1)
/// matrix; None if singular.
fn solve_dense(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..k {
            let m = a[row][col] / a[col][col];
            for j in col..=k {
                a[row][j] -= m * a[col][j];
            }
        }
    }
    let mut out = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i][j] * out[j]).sum();
        out[i] = (a[i][k] - s) / a[i][i];
    }
    Some(out)
}


fn integrate_or_identity(order: f64, f: SampledFunction) -> Result<SampledFunction> {
    if order <= 1e-14 {
        Ok(f)
    } else {
        rl_integral_grid(order, &f)
    }
}

/// e^{-sa}(1 - e^{-sh})/s and e^{-sa}(1 - e^{-sh}(1 + sh))/(s² h): the
/// exponential moments of the constant and the rising linear hat on [a, a+h].
fn exp_moments(s: f64, a: f64, h: f64) -> (f64, f64) {
    let u = s * h;
    let ea = (-s * a).exp();
    let m0 = -(-u).exp_m1() / s;
    let g = if u < 1e-2 {
        // 1 - e^{-u}(1+u) = u²/2 - u³/3 + u⁴/8 - u⁵/30 + ...
        u * u * (0.5 - u * (1.0 / 3.0 - u * (0.125 - u * (1.0 / 30.0 - u / 144.0))))
    } else {
        1.0 - (-u).exp() * (1.0 + u)
    };
    (ea * m0, ea * g / (s * s * h))
}

/// ∫_0^∞ f(t) e^{-st} dt: quadrature on [0, X] plus the tail Σ d_k t^{e_k}
/// integrated in closed form beyond X.
pub fn laplace_numeric(f: &SampledFunction, tail: &AsymptoticForm, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("Laplace variable s = {s} must be positive")));
    }
    let x = f.grid.nodes();
    let big_x = f.grid.x_max;
    let (c, rest) = split_singular(f);
    let mut acc = CompensatedSum::new();
    let mut lo = 0.0;
    for j in 1..=f.grid.m {
        let hi = x[j - 1];
        let (m0, m1) = exp_moments(s, lo, hi - lo);
        // linear piece: rest[j-1] + (rest[j]-rest[j-1]) (t-lo)/h
        acc.add(rest[j - 1] * m0 + (rest[j] - rest[j - 1]) * m1);
        lo = hi;
    }
    if let Some(sig) = f.singular_exponent {
        if c != 0.0 {
            acc.add(c * s.powf(-sig - 1.0) * lower_incomplete_gamma(sig + 1.0, s * big_x));
        }
    }
    for t in &tail.terms {
        if t.d != 0.0 {
            let e = t.exponent;
            acc.add(t.d * s.powf(-e - 1.0) * upper_incomplete_gamma(e + 1.0, s * big_x));
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::{AsymptoticForm, TailTerm};

    fn grid(x: f64, m: usize, r: f64) -> GradedGrid {
        GradedGrid::new(x, m, r).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = grid(2.0, 8, 2.0);
        assert_eq!(g.nodes().len(), 8);
        assert!((g.nodes()[0] - 2.0 / 64.0).abs() < 1e-16);
        assert_eq!(g.nodes()[7], 2.0);
        assert!(GradedGrid::new(1.0, 8, 0.5).is_err());
        assert_eq!(default_grading(&[0.0, -0.5]), 4.0);
        assert_eq!(default_grading(&[-0.9]), 6.0);
        assert_eq!(default_grading(&[0.0]), 2.0);
    }

    #[test]
    fn cell_weight_series_matches_closed_form() {
        for &nu in &[0.3, 0.5, 1.0, 1.7] {
            for &w in &[0.02, 0.05, 0.099] {
                let d = 3.0;
                let h = w * d;
                let (l, r) = cell_weights(nu, d, h);
                // closed form with the other branch
                let e1 = 1.0 - (1.0 - w).powf(nu);
                let jj = e1 / (nu * (nu + 1.0)) - (1.0 - e1) * w / (nu + 1.0);
                let b = d.powf(nu) * jj * d / h;
                assert!(((r - b) / b).abs() < 1e-9, "nu {nu} w {w}: {r} vs {b}");
                assert!(((l + r) - d.powf(nu) * e1 / nu).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integral_of_one_is_x() {
        let g = grid(1.0, 1024, 1.0);
        let one = SampledFunction::from_fn(&g, |_| 1.0, None).unwrap();
        let r = rl_integral_grid(1.0, &one).unwrap();
        for (x, v) in g.nodes().iter().zip(&r.values) {
            assert!((x - v).abs() < 1e-8);
        }
    }

    #[test]
    fn half_integral_of_sqrt() {
        let g = grid(1.0, 4096, 2.0);
        let k = gamma(1.5) / gamma(2.0);
        // smooth-function treatment: sup-norm relative error
        let f = SampledFunction::from_fn(&g, |x| x.sqrt(), None).unwrap();
        let r = rl_integral_grid(0.5, &f).unwrap();
        let err = g.nodes().iter().zip(&r.values).map(|(x, v)| (v - k * x).abs()).fold(0.0, f64::max);
        assert!(err / k < 1e-5, "{err}");
        // with the exponent known the leading term is integrated exactly
        let f = SampledFunction::from_fn(&g, |x| x.sqrt(), Some(0.5)).unwrap();
        let r = rl_integral_grid(0.5, &f).unwrap();
        for (x, v) in g.nodes().iter().zip(&r.values) {
            assert!(((v - k * x) / (k * x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn half_integral_twice_is_first_integral() {
        let g = grid(1.0, 4096, 2.0);
        let one = SampledFunction::from_fn(&g, |_| 1.0, None).unwrap();
        let once = rl_integral_grid(0.5, &one).unwrap();
        let twice = rl_integral_grid(0.5, &once).unwrap();
        for (x, v) in g.nodes().iter().zip(&twice.values) {
            assert!(((v - x) / x).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn weights_agree_with_direct_integral() {
        let g = grid(3.0, 200, 2.5);
        let f = SampledFunction::from_fn(&g, |x| x.powf(-0.4) + x.cos(), Some(-0.4)).unwrap();
        let direct = rl_integral_grid(0.7, &f).unwrap();
        let w = RlWeights::new(&g, 0.7).unwrap();
        let via = w.apply(&f).unwrap();
        for (a, b) in direct.values.iter().zip(&via) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        let other = SampledFunction::from_fn(&grid(3.0, 201, 2.5), |x| x, None).unwrap();
        assert!(w.apply(&other).is_err());
    }

    #[test]
    fn singular_part_is_exact() {
        let g = grid(2.0, 64, 3.0);
        let f = SampledFunction::from_fn(&g, |x| 2.0 * x.powf(-0.6), Some(-0.6)).unwrap();
        let r = rl_integral_grid(0.3, &f).unwrap();
        let k = 2.0 * gamma(0.4) / gamma(0.7);
        for (x, v) in g.nodes().iter().zip(&r.values) {
            assert!(((v - k * x.powf(-0.3)) / v).abs() < 1e-13);
        }
        assert!((r.singular_exponent.unwrap() + 0.3).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_smooth_function() {
        let g = grid(2.0, 400, 2.0);
        let f = SampledFunction::from_fn(&g, |x| x.sin(), None).unwrap();
        let d = derivative_grid(&f).unwrap();
        for (x, v) in g.nodes().iter().zip(&d.values) {
            assert!((v - x.cos()).abs() < 1e-7, "x = {x}");
        }
        let small = SampledFunction::from_fn(&grid(1.0, 8, 1.0), |x| x, None).unwrap();
        assert!(derivative_grid(&small).is_err());
    }

    #[test]
    fn grid_derivative_kernel_and_constants() {
        let a = 0.6;
        let g = GradedGrid::for_exponents(1.0, 4096, &[a - 1.0]).unwrap();
        let rl = DerivativeSpec::riemann_liouville(a).unwrap();
        let f = SampledFunction::from_fn(&g, |x| gamma(a) * x.powf(a - 1.0), Some(a - 1.0)).unwrap();
        let d = nth_level_derivative_grid(&rl, &f).unwrap();
        for (x, v) in g.nodes().iter().zip(&d.values) {
            if *x >= 0.1 {
                assert!(v.abs() <= 1e-3, "x = {x}: {v}");
            }
        }
        let caputo = DerivativeSpec::caputo(a).unwrap();
        let one = SampledFunction::from_fn(&g, |_| 1.0, Some(0.0)).unwrap();
        let d = nth_level_derivative_grid(&caputo, &one).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn laplace_examples() {
        let g = grid(40.0, 4096, 2.0);
        let one = SampledFunction::from_fn(&g, |_| 1.0, None).unwrap();
        let tail = AsymptoticForm { terms: vec![TailTerm { d: 1.0, exponent: 0.0 }] };
        for &s in &[0.1, 1.0, 3.0] {
            let v = laplace_numeric(&one, &tail, s).unwrap();
            assert!(((v - 1.0 / s) * s).abs() < 1e-10);
        }
        let e = SampledFunction::from_fn(&g, |x| (-x).exp(), None).unwrap();
        let none = AsymptoticForm { terms: vec![] };
        assert!((laplace_numeric(&e, &none, 1.0).unwrap() - 0.5).abs() < 1e-5);
        assert!(laplace_numeric(&e, &none, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(5.0, 32, 2.5);
        let f = SampledFunction::from_fn(&g, |x| x.powf(-0.3), Some(-0.3)).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# sigma=-2.9999999999999999e-1\nx,y\n"));
        assert!(!text.contains('\r'));
        let back = SampledFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.grid.nodes(), f.grid.nodes());
        assert_eq!(back.singular_exponent, Some(-0.3));
    }
}
