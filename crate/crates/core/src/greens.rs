//! Green's function of the convected Helmholtz operator in the rigid duct.
//!
//! Sign convention: `G` solves `(1-M²)∂₁²G + ∂₂²G + 2ikM∂₁G + k²G = δ_y`
//! with homogeneous Neumann walls, the same normalisation as the per-mode
//! Green's functions `g_n` (unit jump of `(1-M²)g'`). With that choice the
//! free-space kernel is
//!
//! `Φ(x,y) = i/(4√(1-M²)) H0(kρ(x-y)) exp(-i k M/(1-M²) (x1-y1))`
//!
//! and `G = -Σ Φ(x, images of y)`. The phase carries the wavenumber and a
//! negative sign; the finite-difference residual test below fails for any
//! other combination. Near the diagonal
//! `G ≈ ln(kρ) exp(-ikM/(1-M²)(x1-y1)) / (2π√(1-M²))` plus a Lipschitz remainder.
//!
//! Two independent representations are provided: the image series
//! (conditionally convergent, accelerated by a smooth taper over the outer
//! quarter of the image distances) and the modal series (geometrically
//! convergent away from `x1 = y1`).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::duct::{axial_wavenumbers, cutoff_numbers, mode_shape_integral, mode_shape_unchecked, DuctConfig};
use crate::error::{Error, Result};
use crate::harness::{fit_rate, RateFit, Transform};
use crate::noise::{NoiseMesh, NoiseRealization, Rect};
use crate::quad::{adaptive, exp_integral, GaussRule};
use crate::source::{AxialProfile, ModalSource};
use crate::specfun::hankel0_unchecked;

/// Point `(x1, x2)`.
pub type Point = [f64; 2];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Truncation parameters of the two series representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensEvalParams {
    /// Image-series truncation, in units of the period `2d`.
    pub n_images: usize,
    /// Modal truncation for separated points.
    pub n_modes: usize,
    /// Smallest axial separation at which the modal series is used on its own.
    pub min_axial_gap: f64,
    /// Modal truncation for cell integrals close to the evaluation point.
    pub near_modes: usize,
}

impl GreensEvalParams {
    /// `n_images = 512`, `n_modes = N0 + 30`, `min_axial_gap = d/4`, `near_modes = 2000`.
    pub fn defaults(cfg: &DuctConfig) -> Self {
        let (_, n0) = cutoff_numbers(cfg);
        GreensEvalParams {
            n_images: 512,
            n_modes: n0 + 30,
            min_axial_gap: 0.25 * cfg.d(),
            near_modes: 2000,
        }
    }

    pub fn validate(&self, cfg: &DuctConfig) -> Result<()> {
        let (_, n0) = cutoff_numbers(cfg);
        if self.n_modes < n0 + 5 {
            return Err(Error::InvalidConfig(format!(
                "n_modes = {} must be at least N0 + 5 = {}",
                self.n_modes,
                n0 + 5
            )));
        }
        if !(self.min_axial_gap > 0.0) {
            return Err(Error::InvalidConfig("min_axial_gap must be positive".into()));
        }
        Ok(())
    }
}

/// A truncated series value with a convergence indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Image series: modulus of the outermost included term.
    /// Modal series: bound on the omitted tail.
    pub indicator: f64,
}

/// Which representation produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Modal,
    Images,
}

impl Representation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Representation::Modal => "modal",
            Representation::Images => "images",
        }
    }
}

/// Convected distance `sqrt(x1² + (1-M²) x2²)/(1-M²)`.
pub fn rho(x: Point, cfg: &DuctConfig) -> f64 {
    let b = cfg.beta_factor();
    (x[0] * x[0] + b * x[1] * x[1]).sqrt() / b
}

/// Free-space convected kernel `Φ(x, y)`.
pub fn phi_free(x: Point, y: Point, cfg: &DuctConfig) -> Result<Complex64> {
    let r = rho([x[0] - y[0], x[1] - y[1]], cfg);
    if r == 0.0 {
        return Err(Error::Singularity(format!("Φ evaluated at coincident points {x:?}")));
    }
    Ok(phi_at(x[0] - y[0], r, cfg))
}

#[inline]
fn phi_at(dx1: f64, r: f64, cfg: &DuctConfig) -> Complex64 {
    let b = cfg.beta_factor();
    let pref = Complex64::new(0.0, 0.25 / b.sqrt());
    pref * hankel0_unchecked(cfg.k() * r) * Complex64::from_polar(1.0, -cfg.convective_shift() * dx1)
}

/// Taper applied to an image at distance `s` (in periods) for truncation `n`.
/// Equal to 1 up to `0.75 n`, then a C⁴ smoothstep down to 0 at `n`.
fn taper(s: f64, n: f64) -> f64 {
    let start = 0.75 * n;
    if s <= start {
        1.0
    } else if s >= n {
        0.0
    } else {
        1.0 - smoothstep((s - start) / (n - start))
    }
}

/// Order-4 smoothstep: `t⁵ (126 - 420t + 540t² - 315t³ + 70t⁴)`.
fn smoothstep(t: f64) -> f64 {
    let t5 = t * t * t * t * t;
    t5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))))
}

/// Image-series evaluation of `G(x, y)`.
///
/// Images of `y` sit at `(y1, ±y2 + 2dn)`. With `n_images = 0` only the
/// direct term and its reflection in the lower wall are summed. Otherwise
/// every image within `2d·n_images` of the lower wall is included, with a
/// smooth taper over the outer quarter (a smoothed Cesàro mean of the
/// partial sums). The weights do not depend on `x`, so the truncated sum
/// solves the homogeneous equation exactly away from the images and is
/// exactly even about `x2 = 0`; evenness about `x2 = d` holds to the
/// truncation accuracy.
pub fn greens_images(x: Point, y: Point, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<SeriesValue> {
    let (value, indicator) = image_sum(x, y, params.n_images, false, cfg)?;
    Ok(SeriesValue { value, indicator })
}

/// Image sum (already negated) and the modulus of its outermost term.
fn image_sum(x: Point, y: Point, n_images: usize, skip_direct: bool, cfg: &DuctConfig) -> Result<(Complex64, f64)> {
    let d = cfg.d();
    let b = cfg.beta_factor();
    let dx1 = x[0] - y[0];
    let term = |z2: f64| -> Result<Complex64> {
        let dx2 = x[1] - z2;
        let r = (dx1 * dx1 + b * dx2 * dx2).sqrt() / b;
        if r < 1e-14 * d {
            return Err(Error::Singularity(format!(
                "evaluation point {x:?} coincides with an image of {y:?}"
            )));
        }
        Ok(phi_at(dx1, r, cfg))
    };
    if n_images == 0 {
        let head = if skip_direct { Complex64::new(0.0, 0.0) } else { term(y[1])? };
        let v = head + term(-y[1])?;
        return Ok((-v, v.norm()));
    }
    let period = 2.0 * d;
    let nmax = n_images as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut outer = 0.0f64;
    let mut outer_dist = -1.0f64;
    for sign in [1.0, -1.0] {
        let base = sign * y[1];
        let lo = ((-period * nmax - base) / period).ceil() as i64;
        let hi = ((period * nmax - base) / period).floor() as i64;
        for n in lo..=hi {
            if skip_direct && sign > 0.0 && n == 0 {
                continue;
            }
            let z2 = base + period * n as f64;
            let s = z2.abs() / period;
            let w = taper(s, nmax);
            if w == 0.0 {
                continue;
            }
            let t = term(z2)?;
            sum += t * w;
            if s > outer_dist {
                outer_dist = s;
                outer = t.norm();
            }
        }
    }
    Ok((-sum, outer))
}

/// Per-mode Green's function `g_n(x1 - y1)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModeGreen {
    pub c: Complex64,
    pub plus: Complex64,
    pub minus: Complex64,
}

impl ModeGreen {
    pub fn new(n: usize, cfg: &DuctConfig) -> Result<Self> {
        let w = axial_wavenumbers(n, cfg)?;
        let c = 1.0 / (Complex64::new(0.0, cfg.beta_factor()) * w.gap());
        Ok(ModeGreen {
            c,
            plus: w.plus,
            minus: w.minus,
        })
    }

    /// `g(t)` for `t = x1 - y1`.
    #[inline]
    pub fn eval(&self, t: f64) -> Complex64 {
        let beta = if t >= 0.0 { self.plus } else { self.minus };
        self.c * (Complex64::i() * beta * t).exp()
    }

    /// `∫_a^b g(x1 - y1) dy1`, closed form.
    pub fn axial_integral(&self, x1: f64, a: f64, b: f64) -> Complex64 {
        let i = Complex64::i();
        let mut out = Complex64::new(0.0, 0.0);
        let up = b.min(x1);
        if up > a {
            let t0 = x1 - up;
            out += (i * self.plus * t0).exp() * exp_integral(i * self.plus, up - a);
        }
        let lo = a.max(x1);
        if b > lo {
            let t1 = x1 - lo;
            out += (i * self.minus * t1).exp() * exp_integral(-i * self.minus, b - lo);
        }
        out * self.c
    }

    /// `∫_l^r (u g(x - s1)) conj(v g(x - s2)) dx` where both sources lie
    /// outside `(l, r)`.
    fn cross_integral(&self, u: Complex64, s1: f64, v: Complex64, s2: f64, l: f64, r: f64) -> Complex64 {
        let i = Complex64::i();
        let mid = 0.5 * (l + r);
        let b1 = if mid >= s1 { self.plus } else { self.minus };
        let b2 = if mid >= s2 { self.plus } else { self.minus };
        let c = i * (b1 - b2.conj());
        let expo = |x: f64| i * b1 * (x - s1) - i * b2.conj() * (x - s2);
        let integral = if c.re <= 0.0 {
            expo(l).exp() * exp_integral(c, r - l)
        } else {
            expo(r).exp() * exp_integral(-c, r - l)
        };
        u * v.conj() * self.c.norm_sqr() * integral
    }
}

/// Per-mode Green's function `g_n(x1, y1)`.
///
/// `C e^{iβ⁺(x1-y1)}` for `x1 > y1`, `C e^{iβ⁻(x1-y1)}` for `x1 < y1`,
/// `C = 1/(i(1-M²)(β⁺-β⁻))`.
pub fn mode_green_1d(n: usize, x1: f64, y1: f64, cfg: &DuctConfig) -> Result<Complex64> {
    Ok(ModeGreen::new(n, cfg)?.eval(x1 - y1))
}

/// Modal-series evaluation of `G(x, y)`; needs `|x1 - y1| >= min_axial_gap`.
pub fn greens_modal(x: Point, y: Point, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<SeriesValue> {
    let t = x[0] - y[0];
    if t.abs() < params.min_axial_gap {
        return Err(Error::Representation(format!(
            "axial gap {:.3e} below {:.3e}: use the image series",
            t.abs(),
            params.min_axial_gap
        )));
    }
    let d = cfg.d();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..params.n_modes {
        let g = ModeGreen::new(n, cfg)?;
        sum += g.eval(t) * (mode_shape_unchecked(n, x[1], d) * mode_shape_unchecked(n, y[1], d));
    }
    Ok(SeriesValue {
        value: sum,
        indicator: modal_tail_bound(params.n_modes, t, cfg)?,
    })
}

/// Bound on `Σ_{n >= n_start} (2/d)|g_n(t)|`, geometric from the first two omitted terms.
fn modal_tail_bound(n_start: usize, t: f64, cfg: &DuctConfig) -> Result<f64> {
    let a = ModeGreen::new(n_start, cfg)?.eval(t).norm();
    let b = ModeGreen::new(n_start + 1, cfg)?.eval(t).norm();
    let ratio = b / a;
    let scale = 2.0 / cfg.d();
    if a == 0.0 {
        return Ok(0.0);
    }
    if ratio < 1.0 {
        Ok(scale * a / (1.0 - ratio))
    } else {
        Ok(f64::INFINITY)
    }
}

/// `G(x, y)` by the modal series when separated enough, otherwise by images.
pub fn greens(x: Point, y: Point, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<(Complex64, Representation)> {
    if (x[0] - y[0]).abs() >= params.min_axial_gap {
        Ok((greens_modal(x, y, params, cfg)?.value, Representation::Modal))
    } else {
        Ok((greens_images(x, y, params, cfg)?.value, Representation::Images))
    }
}

/// `∫ g_n(x1, y1) f_n(y1) dy1` by adaptive quadrature split at `x1` and
/// at the profile breakpoints.
pub fn mode_convolution(n: usize, x1: f64, profiles: &[AxialProfile], cfg: &DuctConfig) -> Result<Complex64> {
    let g = ModeGreen::new(n, cfg)?;
    let mut total = Complex64::new(0.0, 0.0);
    for p in profiles {
        if let AxialProfile::Segments { edges, values } = p {
            for (w, v) in edges.windows(2).zip(values) {
                total += g.axial_integral(x1, w[0], w[1]) * v;
            }
            continue;
        }
        if let AxialProfile::Box { lo, hi, amplitude } = p {
            total += g.axial_integral(x1, *lo, *hi) * amplitude;
            continue;
        }
        let (a, b) = p.support();
        let mut cuts: Vec<f64> = p.breakpoints();
        if x1 > a && x1 < b {
            cuts.push(x1);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let r = adaptive(w[0], w[1], 1e-10, 12, |y| g.eval(x1 - y) * p.eval(y));
            total += r.value;
        }
    }
    Ok(total)
}

/// Deterministic part of the solution, `∫ G(x,y) f(y) dy`, in modal form.
pub fn deterministic_solution(source: &ModalSource, x: Point, cfg: &DuctConfig) -> Result<Complex64> {
    let mut out = Complex64::new(0.0, 0.0);
    for n in source.modes() {
        let c = mode_convolution(n, x[0], source.profiles(n), cfg)?;
        out += c * mode_shape_unchecked(n, x[1], cfg.d());
    }
    Ok(out)
}

/// `∫_K G(x, y) dy / sqrt(|K|)` for every cell `K` of one mesh depth.
#[derive(Debug, Clone)]
pub struct CellWeights {
    pub depth: u32,
    pub weights: Vec<Complex64>,
}

impl CellWeights {
    /// `Σ_i ξ_i w_i`.
    pub fn apply(&self, xi: &[f64]) -> Complex64 {
        self.weights.iter().zip(xi).map(|(w, x)| w * x).sum()
    }
}

/// Cell weights of `mesh` at `depth` for the evaluation point `x`.
///
/// Cells are integrated mode by mode with closed-form transverse and axial
/// integrals. The cell that contains `x` (if any) instead splits `G` into
/// its logarithmic part, integrated over four triangles with a radial
/// substitution, and a Lipschitz remainder on a 4×4 Gauss rule.
pub fn cell_weights(
    mesh: &NoiseMesh,
    depth: u32,
    x: Point,
    params: &GreensEvalParams,
    cfg: &DuctConfig,
) -> Result<CellWeights> {
    mesh.check_depth(depth)?;
    let side = mesh.cells_per_side(depth);
    let rect = mesh.rect();
    let d = cfg.d();
    let (w1, w2) = mesh.cell_size(depth);
    let edges1: Vec<f64> = (0..=side).map(|j| rect.lo1() + w1 * j as f64).collect();
    let edges2: Vec<f64> = (0..=side).map(|j| rect.lo2() + w2 * j as f64).collect();
    let near = x[0] > rect.lo1() - params.min_axial_gap && x[0] < rect.hi1() + params.min_axial_gap;
    let n_modes = if near { params.near_modes.max(params.n_modes) } else { params.n_modes };
    let mut acc = vec![Complex64::new(0.0, 0.0); side * side];
    let mut axial = vec![Complex64::new(0.0, 0.0); side];
    let mut trans = vec![0.0; side];
    for n in 0..n_modes {
        let g = ModeGreen::new(n, cfg)?;
        let phi_x = mode_shape_unchecked(n, x[1], d);
        for (c, a) in axial.iter_mut().enumerate() {
            *a = g.axial_integral(x[0], edges1[c], edges1[c + 1]) * phi_x;
        }
        for (r, t) in trans.iter_mut().enumerate() {
            *t = mode_shape_integral(n, edges2[r], edges2[r + 1], d);
        }
        for r in 0..side {
            let row = &mut acc[r * side..(r + 1) * side];
            for (cell, a) in row.iter_mut().zip(&axial) {
                *cell += a * trans[r];
            }
        }
    }
    if let Some(i) = mesh.locate(depth, x) {
        let cell = mesh.cell_rect(depth, i);
        acc[i] = singular_cell_integral(x, &cell, params, cfg)?;
    }
    let scale = 1.0 / (w1 * w2).sqrt();
    for w in acc.iter_mut() {
        *w *= scale;
    }
    Ok(CellWeights { depth, weights: acc })
}

/// `∫_K G(x, y) dy` for a cell containing `x`.
fn singular_cell_integral(x: Point, cell: &Rect, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<Complex64> {
    let corners = [
        [cell.lo1(), cell.lo2()],
        [cell.hi1(), cell.lo2()],
        [cell.hi1(), cell.hi2()],
        [cell.lo1(), cell.hi2()],
    ];
    let log_part = (0..4)
        .map(|j| log_triangle(x, corners[j], corners[(j + 1) % 4], cfg))
        .sum::<Complex64>();
    let rule = GaussRule::new(4);
    let mut rem = Complex64::new(0.0, 0.0);
    for (y1, wy1) in rule.points(cell.lo1(), cell.hi1()) {
        for (y2, wy2) in rule.points(cell.lo2(), cell.hi2()) {
            rem += regular_part(x, [y1, y2], params, cfg)? * (wy1 * wy2);
        }
    }
    Ok(log_part + rem)
}

/// Logarithmic part `ln(kρ(x-y)) e^{-iγ(x1-y1)} / (2π√(1-M²))` of `G`.
fn log_kernel(x: Point, y: Point, cfg: &DuctConfig) -> Complex64 {
    let r = rho([x[0] - y[0], x[1] - y[1]], cfg);
    let c = 1.0 / (2.0 * PI * cfg.beta_factor().sqrt());
    Complex64::from_polar(c * (cfg.k() * r).ln(), -cfg.convective_shift() * (x[0] - y[0]))
}

/// `G - log part`, continuous across `y = x`.
fn regular_part(x: Point, y: Point, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<Complex64> {
    let r = rho([x[0] - y[0], x[1] - y[1]], cfg);
    let b = cfg.beta_factor();
    let sb = b.sqrt();
    // the direct image is handled here; all others come from the series
    let direct_minus_log = if r < 1e-12 * cfg.d() {
        Complex64::new((EULER_GAMMA - std::f64::consts::LN_2) / (2.0 * PI * sb), -0.25 / sb)
    } else {
        -phi_at(x[0] - y[0], r, cfg) - log_kernel(x, y, cfg)
    };
    // y is inside the cell, so |y2 - x2| < d and the direct image carries weight 1
    let (others, _) = image_sum(x, y, params.n_images, true, cfg)?;
    Ok(direct_minus_log + others)
}

/// `∫ log part` over the triangle `(x, p, q)`, with `y = x + u (p - x + v (q - p))`
/// and `u = s²` to smooth the `u ln u` behaviour at the apex.
fn log_triangle(x: Point, p: Point, q: Point, cfg: &DuctConfig) -> Complex64 {
    let e1 = [p[0] - x[0], p[1] - x[1]];
    let e2 = [q[0] - p[0], q[1] - p[1]];
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    if jac < 1e-300 {
        return Complex64::new(0.0, 0.0);
    }
    let rule = GaussRule::new(16);
    let c = 1.0 / (2.0 * PI * cfg.beta_factor().sqrt());
    let gamma = cfg.convective_shift();
    let k = cfg.k();
    let mut out = Complex64::new(0.0, 0.0);
    for (v, wv) in rule.points(0.0, 1.0) {
        let w = [e1[0] + v * e2[0], e1[1] + v * e2[1]];
        let lr = (k * rho(w, cfg)).ln();
        for (s, ws) in rule.points(0.0, 1.0) {
            let u = s * s;
            // y - x = u w, so x1 - y1 = -u w1
            let val = Complex64::from_polar(c * (2.0 * s.ln() + lr), gamma * u * w[0]);
            out += val * (2.0 * s * u * jac * wv * ws);
        }
    }
    out
}

/// `Σ_i ξ_i/√|K_i| ∫_{K_i} G(x, y) dy` for one realization.
pub fn stochastic_solution(
    noise: &NoiseRealization,
    x: Point,
    params: &GreensEvalParams,
    cfg: &DuctConfig,
) -> Result<Complex64> {
    let w = cell_weights(noise.mesh(), noise.depth(), x, params, cfg)?;
    Ok(w.apply(noise.xi()))
}

/// `∫_R |G(x, y)|² dy` by composite Gauss quadrature of the modal series;
/// `x` must be axially separated from `R` by `min_axial_gap`.
pub fn green_l2_squared(x: Point, rect: &Rect, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<f64> {
    let rule = GaussRule::new(8);
    let panels = 8;
    let h1 = (rect.hi1() - rect.lo1()) / panels as f64;
    let h2 = (rect.hi2() - rect.lo2()) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a1 = rect.lo1() + h1 * i as f64;
        for (y1, w1) in rule.points(a1, a1 + h1) {
            for j in 0..panels {
                let a2 = rect.lo2() + h2 * j as f64;
                for (y2, w2) in rule.points(a2, a2 + h2) {
                    total += greens_modal(x, [y1, y2], params, cfg)?.value.norm_sqr() * w1 * w2;
                }
            }
        }
    }
    Ok(total)
}

/// `Q(y, z) = ∫_{Ω_b} |G(x, y) - G(x, z)|² dx`, by Parseval over the
/// transverse modes and closed-form axial integrals of products of
/// exponentials. Modes are summed until `n >= 30 d/|y - z|` (and at least
/// `params.n_modes`); the remaining tail is `O(n^-2)` relative.
pub fn probe_q(y: Point, z: Point, params: &GreensEvalParams, cfg: &DuctConfig) -> Result<f64> {
    let dist = ((y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2)).sqrt();
    if dist == 0.0 {
        return Ok(0.0);
    }
    let d = cfg.d();
    let n_modes = params.n_modes.max((30.0 * d / dist).ceil() as usize);
    let (xl, xr) = (cfg.x_minus(), cfg.x_plus());
    let mut cuts = vec![xl, xr, y[0].clamp(xl, xr), z[0].clamp(xl, xr)];
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let one = Complex64::new(1.0, 0.0);
    let mut total = 0.0;
    for n in 0..n_modes {
        let g = ModeGreen::new(n, cfg)?;
        let u = mode_shape_unchecked(n, y[1], d);
        let v = mode_shape_unchecked(n, z[1], d);
        let mut qn = 0.0;
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            if r <= l {
                continue;
            }
            let yy = g.cross_integral(one, y[0], one, y[0], l, r).re;
            let zz = g.cross_integral(one, z[0], one, z[0], l, r).re;
            let yz = g.cross_integral(one, y[0], one, z[0], l, r);
            qn += u * u * yy + v * v * zz - 2.0 * u * v * yz.re;
        }
        total += qn.max(0.0);
    }
    Ok(total)
}

/// Output of [`lemma2_exponent_probe`].
#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub distances: Vec<f64>,
    pub q: Vec<f64>,
    pub fit: RateFit,
}

/// Evaluates `Q(y, z)` for each pair and fits the log-log slope of `Q`
/// against `|y - z|`.
pub fn lemma2_exponent_probe(pairs: &[(Point, Point)], params: &GreensEvalParams, cfg: &DuctConfig) -> Result<ProbeResult> {
    let mut distances = Vec::with_capacity(pairs.len());
    let mut q = Vec::with_capacity(pairs.len());
    for (y, z) in pairs {
        distances.push(((y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2)).sqrt());
        q.push(probe_q(*y, *z, params, cfg)?);
    }
    let fit = fit_rate(&distances, &q, None, Transform::LogLog)?;
    Ok(ProbeResult { distances, q, fit })
}

/// Pairs `(y, y + δ e)` with `δ` geometric over `[lo, hi]` and `e` the unit diagonal.
pub fn geometric_pairs(y: Point, lo: f64, hi: f64, count: usize) -> Vec<(Point, Point)> {
    let e = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            let delta = lo * (hi / lo).powf(t);
            (y, [y[0] + delta * e, y[1] + delta * e])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_mesh, sample};

    fn cfg(m: f64, k: f64) -> DuctConfig {
        DuctConfig::new(1.0, m, k, -1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rho_examples() {
        let c = cfg(0.5, 1.0);
        assert_eq!(rho([0.0, 0.0], &c), 0.0);
        assert!((rho([1.0, 0.0], &c) - 4.0 / 3.0).abs() < 1e-15);
        assert!((rho([0.0, 1.0], &cfg(0.0, 1.0)) - 1.0).abs() < 1e-15);
        let x = [0.3, -0.7];
        assert!((rho([2.5 * x[0], 2.5 * x[1]], &c) - 2.5 * rho(x, &c)).abs() < 1e-14);
    }

    #[test]
    fn phi_examples() {
        let c0 = cfg(0.0, 1.0);
        let v = phi_free([1.0, 0.0], [0.0, 0.0], &c0).unwrap();
        let h = crate::specfun::hankel0(1.0).unwrap();
        assert!((v - Complex64::new(0.0, 0.25) * h).norm() < 1e-15);
        let c = cfg(0.5, 1.0);
        let v = phi_free([2.0, 0.0], [0.0, 0.0], &c).unwrap();
        let expect = crate::specfun::hankel0(8.0 / 3.0).unwrap().norm() / (4.0 * 0.75f64.sqrt());
        assert!((v.norm() - expect).abs() < 1e-14);
        assert!(phi_free([0.2, 0.2], [0.2, 0.2], &c).is_err());
    }

    #[test]
    fn image_head_only() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams {
            n_images: 0,
            ..GreensEvalParams::defaults(&c)
        };
        let x = [0.4, 0.3];
        let y = [0.0, 0.6];
        let v = greens_images(x, y, &p, &c).unwrap().value;
        let e = -(phi_free(x, y, &c).unwrap() + phi_free(x, [y[0], -y[1]], &c).unwrap());
        assert!((v - e).norm() < 1e-15);
    }

    #[test]
    fn mode_green_jump_and_limits() {
        let c = cfg(0.3, 5.0);
        for n in [0, 1, 2, 7] {
            let g = ModeGreen::new(n, &c).unwrap();
            let i = Complex64::i();
            let jump = c.beta_factor() * (g.c * i * g.plus - g.c * i * g.minus);
            assert!((jump - 1.0).norm() < 1e-12, "n={n} jump={jump}");
            assert!((g.eval(1e-300) - g.eval(-1e-300)).norm() < 1e-15);
        }
        let c0 = DuctConfig::new(1.0, 0.0, 2.0, -1.0, 1.0, 1.0).unwrap();
        for t in [-0.7, 0.2, 1.3] {
            let g = mode_green_1d(0, t, 0.0, &c0).unwrap();
            let e = Complex64::new(0.0, 2.0 * t.abs()).exp() / Complex64::new(0.0, 4.0);
            assert!((g - e).norm() < 1e-15);
        }
    }

    #[test]
    fn axial_integral_matches_quadrature() {
        let c = cfg(0.3, 5.0);
        for n in [0, 1, 3] {
            let g = ModeGreen::new(n, &c).unwrap();
            for (x1, a, b) in [(0.1, -0.3, 0.4), (0.5, -0.3, 0.4), (-0.6, -0.3, 0.4), (0.4, -0.3, 0.4)] {
                let exact = g.axial_integral(x1, a, b);
                let mut cuts = vec![a, b];
                if x1 > a && x1 < b {
                    cuts.insert(1, x1);
                }
                let q: Complex64 = cuts
                    .windows(2)
                    .map(|w| adaptive(w[0], w[1], 1e-13, 20, |y| g.eval(x1 - y)).value)
                    .sum();
                assert!((exact - q).norm() < 1e-12, "n={n} x1={x1}: {exact} vs {q}");
            }
        }
    }

    #[test]
    fn single_mode_limit() {
        let c = DuctConfig::new(1.0, 0.0, PI / 2.0, -3.0, 3.0, 1.0).unwrap();
        let p = GreensEvalParams::defaults(&c);
        let x = [2.0, 0.3];
        let y = [0.0, 0.8];
        let v = greens_modal(x, y, &p, &c).unwrap().value;
        let lead = Complex64::new(0.0, PI / 2.0 * 2.0).exp() / Complex64::new(0.0, PI);
        // evanescent remainder decays like e^{-sqrt(3)π/2 · 2}... small but not negligible
        assert!((v - lead).norm() < 2e-2 * lead.norm());
        let far = greens_modal([6.0, 0.3], y, &p, &c).unwrap().value;
        let lead6 = Complex64::new(0.0, PI / 2.0 * 6.0).exp() / Complex64::new(0.0, PI);
        assert!((far - lead6).norm() < 1e-6);
    }

    #[test]
    fn modal_rejects_small_gap() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams::defaults(&c);
        assert!(matches!(
            greens_modal([0.0, 0.2], [0.1, 0.3], &p, &c),
            Err(Error::Representation(_))
        ));
    }

    #[test]
    fn reciprocity_under_flow_reversal() {
        let c = cfg(0.3, 5.0);
        let cr = c.with_signed_mach(-0.3);
        let p = GreensEvalParams::defaults(&c);
        for (x, y) in [([0.6, 0.2], [0.0, 0.7]), ([-0.5, 0.9], [0.3, 0.1])] {
            let a = greens_modal(x, y, &p, &c).unwrap().value;
            let b = greens_modal(y, x, &p, &cr).unwrap().value;
            assert!((a - b).norm() < 1e-10 * a.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn images_agree_with_modal() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams {
            n_images: 4000,
            ..GreensEvalParams::defaults(&c)
        };
        for (x, y) in [([0.5, 0.2], [0.0, 0.7]), ([-0.3, 0.95], [0.4, 0.05]), ([1.0, 0.5], [0.0, 0.5])] {
            let a = greens_modal(x, y, &p, &c).unwrap().value;
            let b = greens_images(x, y, &p, &c).unwrap().value;
            assert!((a - b).norm() < 1e-4 * a.norm(), "{x:?} {y:?}: {a} vs {b}");
        }
    }

    #[test]
    fn wall_neumann() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams::defaults(&c);
        let y = [0.0, 0.35];
        let h = 1e-4;
        for x1 in [0.5, -0.4] {
            for wall in [0.0, 1.0] {
                let gp = greens_images([x1, wall + h], y, &p, &c).unwrap().value;
                let gm = greens_images([x1, wall - h], y, &p, &c).unwrap().value;
                let g0 = greens_images([x1, wall], y, &p, &c).unwrap().value;
                let deriv = (gp - gm) / (2.0 * h);
                assert!(deriv.norm() < 1e-6 * g0.norm(), "x1={x1} wall={wall} deriv={deriv}");
            }
        }
    }

    fn fd_residual(x: Point, y: Point, h: f64, p: &GreensEvalParams, c: &DuctConfig) -> f64 {
        let g = |a: f64, b: f64| greens_images([x[0] + a, x[1] + b], y, p, c).unwrap().value;
        let g0 = g(0.0, 0.0);
        let (gxp, gxm, gyp, gym) = (g(h, 0.0), g(-h, 0.0), g(0.0, h), g(0.0, -h));
        let k = c.k();
        let m = c.mach();
        let r = c.beta_factor() * (gxp - 2.0 * g0 + gxm) / (h * h)
            + (gyp - 2.0 * g0 + gym) / (h * h)
            + Complex64::new(0.0, 2.0 * k * m) * (gxp - gxm) / (2.0 * h)
            + k * k * g0;
        r.norm() / g0.norm().max(1e-3)
    }

    #[test]
    fn pde_residual_is_second_order() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams {
            n_images: 64,
            ..GreensEvalParams::defaults(&c)
        };
        let y = [0.0, 0.4];
        // truncation weights do not depend on x, so even a short series is an exact solution
        for x in [[0.45, 0.6], [-0.35, 0.2]] {
            let r: Vec<f64> = [64.0, 128.0, 256.0].iter().map(|n| fd_residual(x, y, 1.0 / n, &p, &c)).collect();
            let o1 = (r[0] / r[1]).log2();
            let o2 = (r[1] / r[2]).log2();
            assert!(o1 > 1.8 && o2 > 1.8, "{x:?}: residuals {r:?}");
        }
    }

    #[test]
    fn wrong_phase_breaks_residual() {
        // the phase exactly as in the free-space display (no k, positive sign)
        let c = cfg(0.3, 5.0);
        let b = c.beta_factor();
        let y = [0.0, 0.4];
        let x = [0.45, 0.6];
        let alt = |p: Point| {
            let dx = [p[0] - y[0], p[1] - y[1]];
            Complex64::new(0.0, 0.25 / b.sqrt())
                * hankel0_unchecked(c.k() * rho(dx, &c))
                * Complex64::from_polar(1.0, c.mach() / b * dx[0])
        };
        let h = 1.0 / 256.0;
        let k = c.k();
        let g0 = alt(x);
        let r = b * (alt([x[0] + h, x[1]]) - 2.0 * g0 + alt([x[0] - h, x[1]])) / (h * h)
            + (alt([x[0], x[1] + h]) - 2.0 * g0 + alt([x[0], x[1] - h])) / (h * h)
            + Complex64::new(0.0, 2.0 * k * c.mach()) * (alt([x[0] + h, x[1]]) - alt([x[0] - h, x[1]])) / (2.0 * h)
            + k * k * g0;
        assert!(r.norm() / g0.norm() > 1.0);
    }

    #[test]
    fn singular_cell_matches_modal() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams::defaults(&c);
        // the 4x4 remainder rule is the accuracy limit; cells this size or smaller stay below 1e-4
        let cell = Rect::new(-0.05, 0.05, 0.335, 0.435).unwrap();
        let x = [0.03, 0.37];
        let split = singular_cell_integral(x, &cell, &p, &c).unwrap();
        let mut modal = Complex64::new(0.0, 0.0);
        for n in 0..6000 {
            let g = ModeGreen::new(n, &c).unwrap();
            modal += g.axial_integral(x[0], cell.lo1(), cell.hi1())
                * mode_shape_unchecked(n, x[1], 1.0)
                * mode_shape_integral(n, cell.lo2(), cell.hi2(), 1.0);
        }
        assert!((split - modal).norm() < 1e-4 * modal.norm(), "{split} vs {modal}");
    }

    #[test]
    fn deterministic_solution_is_modal() {
        let c = cfg(0.3, 5.0);
        let src = ModalSource::single(1, AxialProfile::normalized_box(0.0, 0.2));
        let x = [0.5, 0.3];
        let v = deterministic_solution(&src, x, &c).unwrap();
        let conv = mode_convolution(1, 0.5, src.profiles(1), &c).unwrap();
        assert!((v - conv * mode_shape_unchecked(1, 0.3, 1.0)).norm() < 1e-15);
        assert_eq!(deterministic_solution(&ModalSource::new(), x, &c).unwrap(), Complex64::new(0.0, 0.0));
        // Box closed form against adaptive quadrature of the same profile
        let custom = AxialProfile::custom((-0.1, 0.1), |_| Complex64::new(5.0, 0.0));
        let q = mode_convolution(1, 0.05, &[custom], &c).unwrap();
        let e = mode_convolution(1, 0.05, src.profiles(1), &c).unwrap();
        assert!((q - e).norm() < 1e-9);
    }

    #[test]
    fn stochastic_solution_linear() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams::defaults(&c);
        let mesh = build_mesh(Rect::new(-0.5, 0.5, 0.25, 0.75).unwrap(), 0.2, 1).unwrap();
        let r = sample(&mesh, 11);
        let x = [0.9, 0.4];
        let v = stochastic_solution(&r, x, &p, &c).unwrap();
        let doubled = r.scaled(2.0);
        let v2 = stochastic_solution(&doubled, x, &p, &c).unwrap();
        assert_eq!(v2, v * 2.0);
        assert_eq!(stochastic_solution(&r.scaled(0.0), x, &p, &c).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn probe_zero_and_positive() {
        let c = cfg(0.3, 5.0);
        let p = GreensEvalParams::defaults(&c);
        assert_eq!(probe_q([0.0, 0.5], [0.0, 0.5], &p, &c).unwrap(), 0.0);
        assert!(probe_q([0.0, 0.5], [0.01, 0.51], &p, &c).unwrap() > 0.0);
    }

    #[test]
    fn probe_matches_direct_quadrature() {
        // brute-force ∫|G(x,y)-G(x,z)|² over a strip away from the sources
        let c = DuctConfig::new(1.0, 0.3, 5.0, -1.0, 1.0, 1.0).unwrap();
        let p = GreensEvalParams::defaults(&c);
        let y = [-0.1, 0.5];
        let z = [0.1, 0.4];
        // Q restricted to x1 in [0.5, 1] from the closed form
        let sub = c.with_window(0.5, 1.0).unwrap();
        let q = probe_q(y, z, &p, &sub).unwrap();
        let rule = GaussRule::new(12);
        let mut brute = 0.0;
        for (x1, w1) in rule.points(0.5, 1.0) {
            for j in 0..6 {
                let a = j as f64 / 6.0;
                for (x2, w2) in rule.points(a, a + 1.0 / 6.0) {
                    let gy = greens_modal([x1, x2], y, &p, &c).unwrap().value;
                    let gz = greens_modal([x1, x2], z, &p, &c).unwrap().value;
                    brute += (gy - gz).norm_sqr() * w1 * w2;
                }
            }
        }
        assert!((q - brute).abs() < 1e-6 * brute, "{q} vs {brute}");
    }
}

