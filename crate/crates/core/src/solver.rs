//! Per-mode finite element solves and 2D field assembly.
//!
//! Every formulation shares the weak form of
//! `(1-M²) D(α D p) + (1/α)(k²/(1-M²) - λ_n) p = f_n`, `D = ∂₁ + iγ`,
//! tested against `q` without conjugation:
//!
//! `-∫ (1-M²) α Dp (q' - iγq) + ∫ (1/α)(k²/(1-M²) - λ_n) p q + [(1-M²) α Dp q] = ∫ f q`.
//!
//! With `α = 1` this is the plain convected equation. On `Ω_b` the boundary
//! bracket becomes a Robin term through `∂₁p = iνp`, so the exact DtN and the
//! reduced PML differ only in `ν` (`β±` or the layer coefficients). The full
//! PML extends the grid through both layers and clamps the outer nodes.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::duct::{axial_wavenumbers, mode_shape_unchecked, DuctConfig};
use crate::error::{Error, Result};
use crate::greens::Point;
use crate::noise::{modal_source_coefficients, NoiseRealization};
use crate::pml::{alpha, nu_coefficients, PmlProfile, Side};
use crate::quad::gauss_legendre;
use crate::source::{AxialProfile, ModalSource};

/// Modes examined past the truncation index when bounding the tail.
const TAIL_MODES: usize = 64;

/// Uniform 1D grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_start: f64,
    x_end: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_start: f64, x_end: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 8 {
            return Err(Error::InvalidConfig(format!("grid needs at least 8 cells, got {n_cells}")));
        }
        if !(x_end > x_start) || !x_start.is_finite() || !x_end.is_finite() {
            return Err(Error::InvalidConfig(format!("empty grid interval [{x_start}, {x_end}]")));
        }
        Ok(Grid1D {
            x_start,
            x_end,
            n_cells,
        })
    }

    /// Grid over `[x⁻, x⁺]` with spacing at most `spacing`.
    pub fn omega_b(cfg: &DuctConfig, spacing: f64) -> Result<Self> {
        let len = cfg.x_plus() - cfg.x_minus();
        Grid1D::new(cfg.x_minus(), cfg.x_plus(), cells_for(len, spacing))
    }

    /// Grid over `[x⁻ - L, x⁺ + L]` sharing the nodes of `inner`; the layer
    /// length must be a whole number of cells.
    pub fn omega_l(cfg: &DuctConfig, inner: &Grid1D) -> Result<Self> {
        let h = inner.spacing();
        let m = cfg.layer_len() / h;
        let layer_cells = m.round();
        if (m - layer_cells).abs() > 1e-9 * m.max(1.0) || layer_cells < 1.0 {
            return Err(Error::Contract(format!(
                "layer length {} is not a whole number of cells of size {h}",
                cfg.layer_len()
            )));
        }
        let l = layer_cells as usize;
        Grid1D::new(
            inner.x_start - l as f64 * h,
            inner.x_end + l as f64 * h,
            inner.n_cells + 2 * l,
        )
    }

    pub fn x_start(&self) -> f64 {
        self.x_start
    }

    pub fn x_end(&self) -> f64 {
        self.x_end
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        (self.x_end - self.x_start) / self.n_cells as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_cells {
            self.x_end
        } else {
            self.x_start + j as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.node(j)).collect()
    }

    /// Index of the node at `x`, if `x` is a node up to rounding.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let t = (x - self.x_start) / self.spacing();
        let j = t.round();
        ((t - j).abs() < 1e-9 && j >= 0.0 && j <= self.n_cells as f64).then_some(j as usize)
    }
}

fn cells_for(len: f64, spacing: f64) -> usize {
    ((len / spacing) - 1e-9).ceil().max(8.0) as usize
}

/// Default spacing `min(1/(16k), L/64)` rounded down to a power of two so
/// that window and layer edges land on nodes for dyadic lengths.
pub fn default_spacing(cfg: &DuctConfig) -> f64 {
    let target = (1.0 / (16.0 * cfg.k())).min(cfg.layer_len() / 64.0);
    2f64.powi(target.log2().floor() as i32)
}

/// Default mode count `N0 + 30`.
pub fn default_modes(cfg: &DuctConfig) -> usize {
    crate::duct::cutoff_numbers(cfg).1 + 30
}

/// Complex tridiagonal matrix: `lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Tridiagonal {
            lower: vec![z; n.saturating_sub(1)],
            diag: vec![z; n],
            upper: vec![z; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    fn conj_transpose(&self) -> Self {
        Tridiagonal {
            lower: self.upper.iter().map(|v| v.conj()).collect(),
            diag: self.diag.iter().map(|v| v.conj()).collect(),
            upper: self.lower.iter().map(|v| v.conj()).collect(),
        }
    }

    fn norm1(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j].norm();
                if j > 0 {
                    s += self.upper[j - 1].norm();
                }
                if j + 1 < n {
                    s += self.lower[j].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// LU factors with partial pivoting (one extra superdiagonal from row swaps).
#[derive(Debug, Clone)]
struct Factors {
    mult: Vec<Complex64>,
    swapped: Vec<bool>,
    diag: Vec<Complex64>,
    up1: Vec<Complex64>,
    up2: Vec<Complex64>,
}

impl Factors {
    fn new(a: &Tridiagonal) -> Result<Self> {
        let n = a.len();
        let z = Complex64::new(0.0, 0.0);
        let mut d = a.diag.clone();
        let mut du = a.upper.clone();
        let mut du2 = vec![z; n.saturating_sub(2)];
        let mut mult = vec![z; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            let dl = a.lower[i];
            if d[i].norm() >= dl.norm() {
                if d[i].norm() == 0.0 {
                    return Err(Error::IllPosed { row: i });
                }
                let l = dl / d[i];
                mult[i] = l;
                d[i + 1] -= l * du[i];
            } else {
                let l = d[i] / dl;
                mult[i] = l;
                swapped[i] = true;
                d[i] = dl;
                let tmp = d[i + 1];
                d[i + 1] = du[i] - l * tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -l * du[i + 1];
                }
                du[i] = tmp;
            }
        }
        if let Some(last) = d.last() {
            if last.norm() == 0.0 {
                return Err(Error::IllPosed { row: n - 1 });
            }
        }
        Ok(Factors {
            mult,
            swapped,
            diag: d,
            up1: du,
            up2: du2,
        })
    }

    fn solve(&self, b: &mut [Complex64]) {
        let n = self.diag.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.mult[i] * b[i];
            } else {
                let t = b[i];
                b[i + 1] -= self.mult[i] * t;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.up1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.up2[i] * b[i + 2];
            }
            b[i] = s / self.diag[i];
        }
    }
}

/// Solution of a banded system with a 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct BandedSolve {
    pub x: Vec<Complex64>,
    pub condition: f64,
}

/// Solves `A x = b` after scaling each row by its largest entry, by
/// elimination with partial pivoting. The condition estimate of `A` uses
/// Hager's iteration on the factored scaled matrix.
pub fn solve_tridiagonal(a: &Tridiagonal, b: &[Complex64]) -> Result<BandedSolve> {
    let n = a.len();
    if b.len() != n || a.lower.len() + 1 != n.max(1) || a.upper.len() + 1 != n.max(1) {
        return Err(Error::Contract("tridiagonal dimensions disagree".into()));
    }
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let mut m = a.diag[i].norm();
            if i > 0 {
                m = m.max(a.lower[i - 1].norm());
            }
            if i + 1 < n {
                m = m.max(a.upper[i].norm());
            }
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let scaled = Tridiagonal {
        lower: a.lower.iter().enumerate().map(|(i, v)| v * scale[i + 1]).collect(),
        diag: a.diag.iter().zip(&scale).map(|(v, s)| v * s).collect(),
        upper: a.upper.iter().zip(&scale).map(|(v, s)| v * s).collect(),
    };
    let f = Factors::new(&scaled)?;
    let mut x: Vec<Complex64> = b.iter().zip(&scale).map(|(v, s)| v * s).collect();
    f.solve(&mut x);
    let fh = Factors::new(&scaled.conj_transpose())?;
    // A⁻¹ = (RA)⁻¹R and A⁻ᴴ = R(RA)⁻ᴴ with R the real row scaling
    let inv = |v: &[Complex64]| {
        let mut w: Vec<Complex64> = v.iter().zip(&scale).map(|(a, s)| a * s).collect();
        f.solve(&mut w);
        w
    };
    let inv_h = |v: &[Complex64]| {
        let mut w = v.to_vec();
        fh.solve(&mut w);
        w.iter().zip(&scale).map(|(a, s)| a * s).collect::<Vec<_>>()
    };
    let condition = a.norm1() * inverse_norm1_estimate(n, inv, inv_h);
    Ok(BandedSolve { x, condition })
}

fn inverse_norm1_estimate<F, G>(n: usize, inv: F, inv_h: G) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
    G: Fn(&[Complex64]) -> Vec<Complex64>,
{
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut est = 0.0;
    for iter in 0..5 {
        let y = inv(&x);
        let norm: f64 = y.iter().map(|v| v.norm()).sum();
        if iter > 0 && norm <= est {
            break;
        }
        est = norm;
        let xi: Vec<Complex64> = y
            .iter()
            .map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) })
            .collect();
        let z = inv_h(&xi);
        let (j, zj) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.norm()))
            .fold((0, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
        if zj <= ztx {
            break;
        }
        x = vec![Complex64::new(0.0, 0.0); n];
        x[j] = Complex64::new(1.0, 0.0);
    }
    est
}

/// Which truncated problem a solution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Dtn,
    PmlFull,
    PmlReduced,
}

impl Formulation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Formulation::Dtn => "dtn",
            Formulation::PmlFull => "pml_full",
            Formulation::PmlReduced => "pml_reduced",
        }
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtn" => Ok(Formulation::Dtn),
            "pml_full" => Ok(Formulation::PmlFull),
            "pml_reduced" => Ok(Formulation::PmlReduced),
            other => Err(Error::InvalidConfig(format!(
                "unknown formulation '{other}' (expected dtn, pml_full or pml_reduced)"
            ))),
        }
    }
}

/// Nodal values and condition estimate of one mode.
#[derive(Debug, Clone)]
pub struct ModeSolve {
    pub values: Vec<Complex64>,
    pub condition: f64,
}

/// How the ends of the 1D problem are closed.
#[derive(Debug, Clone, Copy)]
enum Ends {
    /// `∂₁p = iν p` with `(ν at start, ν at end)`.
    Robin(Complex64, Complex64),
    Dirichlet,
}

fn check_window(grid: &Grid1D, cfg: &DuctConfig) -> Result<()> {
    let tol = 1e-9 * grid.spacing();
    if (grid.x_start - cfg.x_minus()).abs() > tol || (grid.x_end - cfg.x_plus()).abs() > tol {
        return Err(Error::Contract(format!(
            "grid [{}, {}] must span the window [{}, {}]",
            grid.x_start,
            grid.x_end,
            cfg.x_minus(),
            cfg.x_plus()
        )));
    }
    Ok(())
}

fn check_source(profiles: &[AxialProfile], cfg: &DuctConfig) -> Result<()> {
    for p in profiles {
        let (a, b) = p.support();
        if a < cfg.x_minus() || b > cfg.x_plus() {
            return Err(Error::Contract(format!(
                "source support [{a}, {b}] leaves the window [{}, {}]",
                cfg.x_minus(),
                cfg.x_plus()
            )));
        }
    }
    Ok(())
}

fn solve_mode(
    n: usize,
    profiles: &[AxialProfile],
    cfg: &DuctConfig,
    grid: &Grid1D,
    profile: Option<&PmlProfile>,
    ends: Ends,
) -> Result<ModeSolve> {
    let nn = grid.n_nodes();
    let zero = Complex64::new(0.0, 0.0);
    let i = Complex64::i();
    let b = cfg.beta_factor();
    let gamma = cfg.convective_shift();
    let reaction = cfg.k() * cfg.k() / b - cfg.transverse_eig(n);
    let h = grid.spacing();
    let (gx, gw) = gauss_legendre(2);
    let mut a = Tridiagonal::zeros(nn);
    let mut rhs = vec![zero; nn];
    for e in 0..grid.n_cells {
        let (xl, xr) = (grid.node(e), grid.node(e + 1));
        let mut k = [[zero; 2]; 2];
        for (t, w) in gx.iter().zip(&gw) {
            let x = 0.5 * (xl + xr) + 0.5 * h * t;
            let wt = 0.5 * h * w;
            let al = match profile {
                Some(p) => alpha(p, x, cfg.omega()),
                None => Complex64::new(1.0, 0.0),
            };
            let shape = [(xr - x) / h, (x - xl) / h];
            let slope = [-1.0 / h, 1.0 / h];
            for (r, row) in k.iter_mut().enumerate() {
                for (c, entry) in row.iter_mut().enumerate() {
                    let dp = slope[c] + i * gamma * shape[c];
                    let dq = slope[r] - i * gamma * shape[r];
                    *entry += wt * (-b * al * dp * dq + reaction / al * shape[c] * shape[r]);
                }
            }
        }
        a.diag[e] += k[0][0];
        a.upper[e] += k[0][1];
        a.lower[e] += k[1][0];
        a.diag[e + 1] += k[1][1];
        for p in profiles {
            let (l, r) = p.element_load(xl, xr);
            rhs[e] += l;
            rhs[e + 1] += r;
        }
    }
    match ends {
        Ends::Robin(nu_start, nu_end) => {
            a.diag[nn - 1] += b * i * (nu_end + gamma);
            a.diag[0] -= b * i * (nu_start + gamma);
        }
        Ends::Dirichlet => {
            for j in [0, nn - 1] {
                a.diag[j] = Complex64::new(1.0, 0.0);
                rhs[j] = zero;
            }
            a.upper[0] = zero;
            a.lower[0] = zero;
            a.lower[nn - 2] = zero;
            a.upper[nn - 2] = zero;
        }
    }
    let s = solve_tridiagonal(&a, &rhs)?;
    let mut values = s.x;
    if let Ends::Dirichlet = ends {
        values[0] = zero;
        values[nn - 1] = zero;
    }
    Ok(ModeSolve {
        values,
        condition: s.condition,
    })
}

/// Robin solve on `Ω_b` with explicit coefficients `∂₁p = iν p`.
pub(crate) fn solve_mode_robin(
    n: usize,
    f_n: &[AxialProfile],
    cfg: &DuctConfig,
    grid: &Grid1D,
    nu_minus: Complex64,
    nu_plus: Complex64,
) -> Result<ModeSolve> {
    check_window(grid, cfg)?;
    check_source(f_n, cfg)?;
    solve_mode(n, f_n, cfg, grid, None, Ends::Robin(nu_minus, nu_plus))
}

/// Exact nonreflecting problem on `Ω_b`: `∂₁p_n = iβ±_n p_n` on `Σ±`.
pub fn solve_mode_dtn(n: usize, f_n: &[AxialProfile], cfg: &DuctConfig, grid: &Grid1D) -> Result<ModeSolve> {
    let w = axial_wavenumbers(n, cfg)?;
    solve_mode_robin(n, f_n, cfg, grid, w.minus, w.plus)
}

/// Full PML problem on `Ω^L` with homogeneous Dirichlet outer ends.
pub fn solve_mode_pml_full(
    n: usize,
    f_n: &[AxialProfile],
    cfg: &DuctConfig,
    profile: &PmlProfile,
    grid: &Grid1D,
) -> Result<ModeSolve> {
    let tol = 1e-9 * grid.spacing();
    let expect = (cfg.x_minus() - cfg.layer_len(), cfg.x_plus() + cfg.layer_len());
    if (grid.x_start - expect.0).abs() > tol || (grid.x_end - expect.1).abs() > tol {
        return Err(Error::Contract(format!(
            "grid [{}, {}] must span the layered domain [{}, {}]",
            grid.x_start, grid.x_end, expect.0, expect.1
        )));
    }
    if grid.node_index(cfg.x_minus()).is_none() || grid.node_index(cfg.x_plus()).is_none() {
        return Err(Error::Contract("window edges must be grid nodes".into()));
    }
    check_source(f_n, cfg)?;
    axial_wavenumbers(n, cfg)?;
    let profile = profile.rebased(cfg);
    solve_mode(n, f_n, cfg, grid, Some(&profile), Ends::Dirichlet)
}

/// Reduced problem on `Ω_b` with the PML coefficients `ν±_n`.
pub fn solve_mode_pml_reduced(
    n: usize,
    f_n: &[AxialProfile],
    cfg: &DuctConfig,
    profile: &PmlProfile,
    grid: &Grid1D,
) -> Result<ModeSolve> {
    let profile = profile.rebased(cfg);
    let nu_plus = nu_coefficients(n, Side::Plus, &profile, cfg)?;
    let nu_minus = nu_coefficients(n, Side::Minus, &profile, cfg)?;
    solve_mode_robin(n, f_n, cfg, grid, nu_minus, nu_plus)
}

/// Nodal mode values `p_n(x1_j)` for modes `0..n_modes`.
#[derive(Debug, Clone)]
pub struct ModalSolution {
    pub grid: Grid1D,
    pub n_modes: usize,
    pub values: Vec<Vec<Complex64>>,
    pub formulation: Formulation,
    /// Bound on the `L²(Ω_b)` norm of the discarded modes.
    pub tail_bound: f64,
    /// Largest condition estimate over the mode solves.
    pub condition: f64,
    x_minus: f64,
    x_plus: f64,
    d: f64,
}

impl ModalSolution {
    /// Solution with given nodal values on a grid covering `[x⁻, x⁺]`.
    pub fn from_values(grid: Grid1D, values: Vec<Vec<Complex64>>, formulation: Formulation, cfg: &DuctConfig) -> Result<Self> {
        if values.iter().any(|v| v.len() != grid.n_nodes()) {
            return Err(Error::Contract("nodal vectors must match the grid".into()));
        }
        Ok(ModalSolution {
            grid,
            n_modes: values.len(),
            values,
            formulation,
            tail_bound: 0.0,
            condition: 1.0,
            x_minus: cfg.x_minus(),
            x_plus: cfg.x_plus(),
            d: cfg.d(),
        })
    }

    /// Node range covering `[x⁻, x⁺]`.
    fn window_nodes(&self) -> Result<(usize, usize)> {
        match (self.grid.node_index(self.x_minus), self.grid.node_index(self.x_plus)) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Contract("window edges are not grid nodes".into())),
        }
    }

    /// The same solution restricted to the nodes of `Ω_b`.
    pub fn restrict_to_omega_b(&self) -> Result<ModalSolution> {
        let (a, b) = self.window_nodes()?;
        let grid = Grid1D::new(self.grid.node(a), self.grid.node(b), b - a)?;
        Ok(ModalSolution {
            grid,
            values: self.values.iter().map(|v| v[a..=b].to_vec()).collect(),
            ..self.clone()
        })
    }
}

/// Solves every mode `0..n_modes` and collects the nodal values.
///
/// `grid` spans `Ω_b` for the DtN and reduced problems and `Ω^L` for the
/// full PML. Mode solves run in parallel; the result does not depend on
/// the thread count.
#[allow(clippy::too_many_arguments)]
pub fn solve_full(
    source: Option<&ModalSource>,
    noise: Option<&NoiseRealization>,
    cfg: &DuctConfig,
    profile: Option<&PmlProfile>,
    formulation: Formulation,
    grid: &Grid1D,
    n_modes: usize,
) -> Result<ModalSolution> {
    let (_, n0) = crate::duct::cutoff_numbers(cfg);
    if n_modes <= n0 {
        return Err(Error::Contract(format!(
            "n_modes = {n_modes} must exceed the {} propagating modes",
            n0 + 1
        )));
    }
    let need_profile = || {
        profile.ok_or_else(|| Error::Contract(format!("{} needs a PML profile", formulation.as_str())))
    };
    let solves: Vec<ModeSolve> = (0..n_modes)
        .into_par_iter()
        .map(|n| {
            let f_n = modal_source_coefficients(source, noise, n, cfg);
            if f_n.is_empty() {
                let values = vec![Complex64::new(0.0, 0.0); grid.n_nodes()];
                return Ok(ModeSolve { values, condition: 1.0 });
            }
            match formulation {
                Formulation::Dtn => solve_mode_dtn(n, &f_n, cfg, grid),
                Formulation::PmlFull => solve_mode_pml_full(n, &f_n, cfg, need_profile()?, grid),
                Formulation::PmlReduced => solve_mode_pml_reduced(n, &f_n, cfg, need_profile()?, grid),
            }
        })
        .collect::<Result<_>>()?;
    let condition = solves.iter().map(|s| s.condition).fold(0.0, f64::max);
    let tail_bound = tail_bound(source, noise, n_modes, cfg)?;
    Ok(ModalSolution {
        grid: *grid,
        n_modes,
        values: solves.into_iter().map(|s| s.values).collect(),
        formulation,
        tail_bound,
        condition,
        x_minus: cfg.x_minus(),
        x_plus: cfg.x_plus(),
        d: cfg.d(),
    })
}

/// `L²(Ω_b)` bound for the modes after truncation: mode `n` contributes at
/// most `|C_n| ‖f_n‖₁ / sqrt(κ_n)` with `|g_n| <= |C_n| e^{-κ_n |t|}`.
fn tail_bound(source: Option<&ModalSource>, noise: Option<&NoiseRealization>, n_modes: usize, cfg: &DuctConfig) -> Result<f64> {
    let mut sq = 0.0;
    for n in n_modes..n_modes + TAIL_MODES {
        let f_n = modal_source_coefficients(source, noise, n, cfg);
        let l1: f64 = f_n.iter().map(|p| p.l1_norm()).sum();
        if l1 == 0.0 {
            continue;
        }
        let w = axial_wavenumbers(n, cfg)?;
        let c = 1.0 / (cfg.beta_factor() * w.gap().norm());
        let kappa = w.plus.im.min(-w.minus.im);
        sq += (c * l1).powi(2) / kappa;
    }
    Ok(sq.sqrt())
}

/// `p(x) = Σ_n p_n(x1) φ_n(x2)` with linear interpolation in `x1`.
pub fn assemble_field(sol: &ModalSolution, points: &[Point]) -> Result<Vec<Complex64>> {
    let g = &sol.grid;
    points
        .iter()
        .map(|&[x1, x2]| {
            if !(x1 >= g.x_start && x1 <= g.x_end) || !(0.0..=sol.d).contains(&x2) {
                return Err(Error::Domain(format!("point ({x1}, {x2}) lies outside the solution domain")));
            }
            let t = (x1 - g.x_start) / g.spacing();
            let j = (t.floor() as usize).min(g.n_cells - 1);
            let s = t - j as f64;
            Ok(sol
                .values
                .iter()
                .enumerate()
                .map(|(n, v)| (v[j] * (1.0 - s) + v[j + 1] * s) * mode_shape_unchecked(n, x2, sol.d))
                .sum())
        })
        .collect()
}

/// `‖p‖_{L²(Ω_b)}` by Parseval with the trapezoid rule in `x1`.
pub fn l2_norm_omega_b(sol: &ModalSolution) -> Result<f64> {
    let (a, b) = sol.window_nodes()?;
    let h = sol.grid.spacing();
    let sq: f64 = sol
        .values
        .iter()
        .map(|v| {
            let inner: f64 = v[a + 1..b].iter().map(|z| z.norm_sqr()).sum();
            h * (inner + 0.5 * (v[a].norm_sqr() + v[b].norm_sqr()))
        })
        .sum();
    Ok(sq.sqrt())
}

/// `‖a - b‖_{L²(Ω_b)}` for solutions on the same grid and mode count.
pub fn l2_error(a: &ModalSolution, b: &ModalSolution) -> Result<f64> {
    if a.grid != b.grid || a.n_modes != b.n_modes || a.x_minus != b.x_minus || a.x_plus != b.x_plus {
        return Err(Error::Contract("l2_error needs matching grids and mode counts".into()));
    }
    let diff = ModalSolution {
        values: a
            .values
            .iter()
            .zip(&b.values)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| x - y).collect())
            .collect(),
        ..a.clone()
    };
    l2_norm_omega_b(&diff)
}

/// Trapezoid `L²` norm of one nodal vector.
pub fn nodal_l2(grid: &Grid1D, v: &[Complex64]) -> f64 {
    let h = grid.spacing();
    let n = v.len();
    let inner: f64 = v[1..n - 1].iter().map(|z| z.norm_sqr()).sum();
    (h * (inner + 0.5 * (v[0].norm_sqr() + v[n - 1].norm_sqr()))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::mode_convolution;
    use crate::noise::{sample, NoiseMesh, Rect};
    use proptest::prelude::*;

    fn cfg() -> DuctConfig {
        DuctConfig::new(1.0, 0.3, 5.0, -1.0, 1.0, 1.0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel_l2(grid: &Grid1D, a: &[Complex64], b: &[Complex64]) -> f64 {
        let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        nodal_l2(grid, &d) / nodal_l2(grid, b)
    }

    fn dense(a: &Tridiagonal) -> Vec<Vec<Complex64>> {
        let n = a.len();
        let mut m = vec![vec![c(0.0, 0.0); n]; n];
        for i in 0..n {
            m[i][i] = a.diag[i];
            if i + 1 < n {
                m[i][i + 1] = a.upper[i];
                m[i + 1][i] = a.lower[i];
            }
        }
        m
    }

    #[test]
    fn grid_basics() {
        let g = Grid1D::new(-1.0, 1.0, 16).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.node(16), 1.0);
        assert_eq!(g.node_index(0.25), Some(10));
        assert_eq!(g.node_index(0.3), None);
        assert!(Grid1D::new(0.0, 1.0, 7).is_err());
        let inner = Grid1D::omega_b(&cfg(), 1.0 / 64.0).unwrap();
        let outer = Grid1D::omega_l(&cfg(), &inner).unwrap();
        assert_eq!((outer.x_start(), outer.x_end(), outer.n_cells()), (-2.0, 2.0, 256));
        let odd = cfg().with_layer_len(0.3).unwrap();
        assert!(Grid1D::omega_l(&odd, &Grid1D::omega_b(&odd, 0.125).unwrap()).is_err());
        assert_eq!(default_spacing(&cfg()), 1.0 / 128.0);
    }

    #[test]
    fn tridiagonal_needs_pivoting() {
        // zero leading diagonal forces a row swap
        let a = Tridiagonal {
            lower: vec![c(2.0, 0.0), c(1.0, 1.0), c(0.5, 0.0)],
            diag: vec![c(0.0, 0.0), c(1.0, 0.0), c(3.0, -1.0), c(1.0, 0.0)],
            upper: vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)],
        };
        let x = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.25, 0.0), c(0.0, -3.0)];
        let b = a.mul_vec(&x);
        let s = solve_tridiagonal(&a, &b).unwrap();
        for (u, v) in s.x.iter().zip(&x) {
            assert!((u - v).norm() < 1e-14);
        }
        assert!(s.condition >= 1.0 && s.condition.is_finite());
        let sing = Tridiagonal {
            lower: vec![c(1.0, 0.0)],
            diag: vec![c(1.0, 0.0), c(1.0, 0.0)],
            upper: vec![c(1.0, 0.0)],
        };
        assert!(matches!(solve_tridiagonal(&sing, &[c(1.0, 0.0); 2]), Err(Error::IllPosed { .. })));
    }

    #[test]
    fn condition_estimate_matches_dense_inverse() {
        let n = 6;
        let mut a = Tridiagonal::zeros(n);
        for i in 0..n {
            a.diag[i] = c(2.0 + i as f64, 0.3);
            if i + 1 < n {
                a.upper[i] = c(-1.0, 0.1 * i as f64);
                a.lower[i] = c(-0.5, 0.0);
            }
        }
        // columns of the inverse
        let mut inv_norm: f64 = 0.0;
        for j in 0..n {
            let mut e = vec![c(0.0, 0.0); n];
            e[j] = c(1.0, 0.0);
            let col = solve_tridiagonal(&a, &e).unwrap().x;
            inv_norm = inv_norm.max(col.iter().map(|v| v.norm()).sum());
        }
        let m = dense(&a);
        let a_norm = (0..n).map(|j| (0..n).map(|i| m[i][j].norm()).sum::<f64>()).fold(0.0, f64::max);
        let s = solve_tridiagonal(&a, &vec![c(1.0, 0.0); n]).unwrap();
        let exact = a_norm * inv_norm;
        assert!(s.condition <= exact * (1.0 + 1e-12) && s.condition >= 0.3 * exact, "{} {exact}", s.condition);
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = Grid1D::omega_b(&cfg(), 1.0 / 64.0).unwrap();
        let s = solve_mode_dtn(1, &[], &cfg(), &g).unwrap();
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
        let p = PmlProfile::quadratic(5.0, 5.0, &cfg()).unwrap();
        let s = solve_mode_pml_reduced(0, &[], &cfg(), &p, &g).unwrap();
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn source_outside_window_rejected() {
        let g = Grid1D::omega_b(&cfg(), 1.0 / 64.0).unwrap();
        let f = [AxialProfile::normalized_box(0.95, 0.2)];
        assert!(matches!(solve_mode_dtn(0, &f, &cfg(), &g), Err(Error::Contract(_))));
    }

    /// Green's-function oracle and the orientation of the Robin conditions.
    fn oracle_error(n: usize, h: f64, flip: bool) -> f64 {
        let cfg = cfg();
        let g = Grid1D::omega_b(&cfg, h).unwrap();
        let f = [AxialProfile::normalized_box(0.1, 0.1)];
        let w = axial_wavenumbers(n, &cfg).unwrap();
        let (lo, hi) = if flip { (-w.minus, -w.plus) } else { (w.minus, w.plus) };
        let s = solve_mode_robin(n, &f, &cfg, &g, lo, hi).unwrap();
        let exact: Vec<Complex64> = g.nodes().iter().map(|&x| mode_convolution(n, x, &f, &cfg).unwrap()).collect();
        rel_l2(&g, &s.values, &exact)
    }

    #[test]
    fn dtn_matches_green_oracle() {
        for n in [0, 1, 3] {
            let e: Vec<f64> = [1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0].iter().map(|&h| oracle_error(n, h, false)).collect();
            assert!(e[2] < 1e-3, "n={n} {e:?}");
            let order = (e[0] / e[2]).log2() / 2.0;
            assert!(order > 1.9, "n={n} order {order}");
        }
        // the opposite Robin orientation reflects the outgoing waves
        assert!(oracle_error(0, 1.0 / 256.0, true) > 0.1);
        assert!(oracle_error(1, 1.0 / 256.0, true) > 0.1);
    }

    #[test]
    fn manufactured_solution_all_formulations() {
        let cfg = cfg();
        let n = 1;
        let (c0, w) = (0.1, 0.6);
        // p*(x) = (1 - s²)⁴ with s = (x - c0)/w
        let pstar = move |x: f64| {
            let s = (x - c0) / w;
            if s.abs() >= 1.0 { 0.0 } else { (1.0 - s * s).powi(4) }
        };
        let dp = move |x: f64| {
            let s = (x - c0) / w;
            if s.abs() >= 1.0 { 0.0 } else { -8.0 * s * (1.0 - s * s).powi(3) / w }
        };
        let d2p = move |x: f64| {
            let s = (x - c0) / w;
            if s.abs() >= 1.0 {
                0.0
            } else {
                (-8.0 * (1.0 - s * s).powi(3) + 48.0 * s * s * (1.0 - s * s).powi(2)) / (w * w)
            }
        };
        let (b, k, m) = (cfg.beta_factor(), cfg.k(), cfg.mach());
        let lam = cfg.transverse_eig(n);
        let f = AxialProfile::custom((c0 - w, c0 + w), move |x| {
            Complex64::new(b * d2p(x) + (k * k - lam) * pstar(x), 2.0 * k * m * dp(x))
        });
        let profile = PmlProfile::quadratic(5.0, 5.0, &cfg).unwrap();
        let mut errs = [[0.0; 3]; 3];
        for (j, h) in [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0].into_iter().enumerate() {
            let g = Grid1D::omega_b(&cfg, h).unwrap();
            let exact: Vec<Complex64> = g.nodes().iter().map(|&x| c(pstar(x), 0.0)).collect();
            let fs = [f.clone()];
            let dtn = solve_mode_dtn(n, &fs, &cfg, &g).unwrap().values;
            let red = solve_mode_pml_reduced(n, &fs, &cfg, &profile, &g).unwrap().values;
            let gl = Grid1D::omega_l(&cfg, &g).unwrap();
            let full = solve_mode_pml_full(n, &fs, &cfg, &profile, &gl).unwrap().values;
            let off = gl.node_index(cfg.x_minus()).unwrap();
            let full_b = &full[off..off + g.n_nodes()];
            errs[0][j] = rel_l2(&g, &dtn, &exact);
            errs[1][j] = rel_l2(&g, &red, &exact);
            errs[2][j] = rel_l2(&g, full_b, &exact);
        }
        for e in errs {
            let order = (e[0] / e[2]).log2() / 2.0;
            assert!(order > 1.9 && e[2] < 1e-3, "{e:?}");
        }
    }

    #[test]
    fn outgoing_wave_at_rest() {
        let cfg = DuctConfig::new(1.0, 0.0, 5.0, -1.0, 1.0, 1.0).unwrap();
        let g = Grid1D::omega_b(&cfg, 1.0 / 512.0).unwrap();
        let s = solve_mode_dtn(0, &[AxialProfile::normalized_box(-0.5, 0.1)], &cfg, &g).unwrap();
        // right of the source p = A e^{ikx} + B e^{-ikx}: fit both by least squares
        let pts: Vec<(f64, Complex64)> = g.nodes().into_iter().zip(s.values).filter(|(x, _)| *x > 0.0).collect();
        let i = Complex64::i();
        let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, c(0.0, 0.0), 0.0, c(0.0, 0.0), c(0.0, 0.0));
        for (x, p) in &pts {
            let e1 = (i * 5.0 * x).exp();
            let e2 = (-i * 5.0 * x).exp();
            s11 += 1.0;
            s22 += 1.0;
            s12 += e1.conj() * e2;
            r1 += e1.conj() * p;
            r2 += e2.conj() * p;
        }
        let det = s11 * s22 - s12.norm_sqr();
        let a = (r1 * s22 - s12 * r2) / det;
        let bb = (r2 * s11 - s12.conj() * r1) / det;
        assert!(bb.norm() < 1e-3 * a.norm(), "{a} {bb}");
    }

    #[test]
    fn full_pml_dirichlet_and_layer_decay() {
        let cfg = cfg();
        let g = Grid1D::omega_b(&cfg, 1.0 / 128.0).unwrap();
        let gl = Grid1D::omega_l(&cfg, &g).unwrap();
        let f = [AxialProfile::normalized_box(0.0, 0.1)];
        let end = gl.node_index(cfg.x_plus()).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [1.0, 2.0, 4.0, 8.0] {
            let p = PmlProfile::quadratic(sigma, sigma, &cfg).unwrap();
            let s = solve_mode_pml_full(0, &f, &cfg, &p, &gl).unwrap();
            assert_eq!(s.values[0], c(0.0, 0.0));
            assert_eq!(s.values[gl.n_nodes() - 1], c(0.0, 0.0));
            let far = s.values[gl.n_nodes() - 1 - gl.n_cells() / 16].norm() / s.values[end].norm();
            assert!(far < last, "sigma={sigma} {far} {last}");
            last = far;
        }
    }

    #[test]
    fn evanescent_mode_ignores_distant_wall() {
        let cfg = DuctConfig::new(1.0, 0.3, 5.0, -1.0, 1.0, 4.0).unwrap();
        let g = Grid1D::omega_b(&cfg, 1.0 / 64.0).unwrap();
        let gl = Grid1D::omega_l(&cfg, &g).unwrap();
        let f = [AxialProfile::normalized_box(0.0, 0.1)];
        let zero = PmlProfile::quadratic(0.0, 0.0, &cfg).unwrap();
        let n = 4;
        let full = solve_mode_pml_full(n, &f, &cfg, &zero, &gl).unwrap().values;
        let dtn = solve_mode_dtn(n, &f, &cfg, &g).unwrap().values;
        let off = gl.node_index(cfg.x_minus()).unwrap();
        assert!(rel_l2(&g, &full[off..off + g.n_nodes()], &dtn) < 1e-6);
    }

    #[test]
    fn reduced_pml_tends_to_dtn() {
        // evanescent modes only see the layer length
        let cfg = cfg().with_layer_len(6.0).unwrap();
        let g = Grid1D::omega_b(&cfg, 1.0 / 128.0).unwrap();
        let p = PmlProfile::quadratic(1e4, 1e4, &cfg).unwrap();
        let f = [AxialProfile::normalized_box(0.3, 0.2)];
        for n in 0..4 {
            let a = solve_mode_pml_reduced(n, &f, &cfg, &p, &g).unwrap().values;
            let b = solve_mode_dtn(n, &f, &cfg, &g).unwrap().values;
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-10, "n={n} {diff}");
        }
    }

    #[test]
    fn pml_equivalence_order() {
        let cfg = cfg();
        let p = PmlProfile::quadratic(5.0, 5.0, &cfg).unwrap();
        let f = [AxialProfile::normalized_box(0.1, 0.2)];
        let mut diffs = vec![];
        for h in [1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0] {
            let g = Grid1D::omega_b(&cfg, h).unwrap();
            let gl = Grid1D::omega_l(&cfg, &g).unwrap();
            let mut worst: f64 = 0.0;
            for n in 0..3 {
                let full = solve_mode_pml_full(n, &f, &cfg, &p, &gl).unwrap().values;
                let red = solve_mode_pml_reduced(n, &f, &cfg, &p, &g).unwrap().values;
                let off = gl.node_index(cfg.x_minus()).unwrap();
                for (j, r) in red.iter().enumerate() {
                    worst = worst.max((full[off + j] - r).norm());
                }
            }
            diffs.push(worst);
        }
        let order = (diffs[0] / diffs[2]).log2() / 2.0;
        assert!(order > 1.9, "{diffs:?}");
    }

    #[test]
    fn full_solve_decouples_modes() {
        let cfg = cfg();
        let g = Grid1D::omega_b(&cfg, 1.0 / 64.0).unwrap();
        let src = ModalSource::single(1, AxialProfile::normalized_box(0.0, 0.2));
        let sol = solve_full(Some(&src), None, &cfg, None, Formulation::Dtn, &g, 6).unwrap();
        for (n, v) in sol.values.iter().enumerate() {
            let zero = v.iter().all(|z| z.norm() == 0.0);
            assert_eq!(zero, n != 1);
        }
        assert_eq!(sol.tail_bound, 0.0);
        assert!(sol.condition < 1e8);
        // wall nodes of φ₁ at x2 = d/2
        let vals = assemble_field(&sol, &[[0.3, 0.5], [0.0, 0.0]]).unwrap();
        assert!(vals[0].norm() < 1e-15);
        assert!(vals[1].norm() > 0.0);
        assert!(matches!(assemble_field(&sol, &[[1.5, 0.5]]), Err(Error::Domain(_))));
        assert!(solve_full(Some(&src), None, &cfg, None, Formulation::PmlReduced, &g, 6).is_err());
    }

    #[test]
    fn zero_noise_and_linearity() {
        let cfg = cfg();
        let g = Grid1D::omega_b(&cfg, 1.0 / 64.0).unwrap();
        let mesh = NoiseMesh::with_depth(Rect::default_forcing(&cfg), 3, 1).unwrap();
        let r = sample(&mesh, 5);
        let zero = r.scaled(0.0);
        let sol = solve_full(None, Some(&zero), &cfg, None, Formulation::Dtn, &g, 8).unwrap();
        assert_eq!(l2_norm_omega_b(&sol).unwrap(), 0.0);
        let src = ModalSource::single(0, AxialProfile::normalized_box(0.2, 0.1));
        let a = solve_full(Some(&src), None, &cfg, None, Formulation::Dtn, &g, 8).unwrap();
        let b = solve_full(None, Some(&r), &cfg, None, Formulation::Dtn, &g, 8).unwrap();
        let ab = solve_full(Some(&src), Some(&r), &cfg, None, Formulation::Dtn, &g, 8).unwrap();
        for n in 0..8 {
            for j in 0..g.n_nodes() {
                assert!((ab.values[n][j] - a.values[n][j] - b.values[n][j]).norm() < 1e-12);
            }
        }
        assert!(b.tail_bound > 0.0 && b.tail_bound.is_finite());
    }

    #[test]
    fn norms() {
        let cfg = cfg();
        let g = Grid1D::omega_b(&cfg, 1.0 / 32.0).unwrap();
        let one = ModalSolution::from_values(g, vec![vec![c(0.0, 0.0); 65], vec![c(1.0, 0.0); 65]], Formulation::Dtn, &cfg).unwrap();
        assert!((l2_norm_omega_b(&one).unwrap().powi(2) - 2.0).abs() < 1e-14);
        let zero = ModalSolution::from_values(g, vec![vec![c(0.0, 0.0); 65]; 2], Formulation::Dtn, &cfg).unwrap();
        assert_eq!(l2_norm_omega_b(&zero).unwrap(), 0.0);
        let other = ModalSolution::from_values(Grid1D::omega_b(&cfg, 1.0 / 16.0).unwrap(), vec![vec![c(0.0, 0.0); 33]; 2], Formulation::Dtn, &cfg).unwrap();
        assert!(matches!(l2_error(&one, &other), Err(Error::Contract(_))));
        // interpolation at nodes reproduces nodal sums
        let nodes = g.nodes();
        let vals = assemble_field(&one, &[[nodes[7], 0.0]]).unwrap();
        assert!((vals[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn parseval_matches_tensor_quadrature() {
        let cfg = cfg();
        let g = Grid1D::omega_b(&cfg, 1.0 / 128.0).unwrap();
        let mut src = ModalSource::single(0, AxialProfile::normalized_box(0.0, 0.2));
        src.add(2, AxialProfile::normalized_box(-0.3, 0.2));
        let sol = solve_full(Some(&src), None, &cfg, None, Formulation::Dtn, &g, 8).unwrap();
        let parseval = l2_norm_omega_b(&sol).unwrap();
        // trapezoid in x1 on the nodes, midpoint in x2
        let m2 = 400;
        let mut sq = 0.0;
        for (j, &x1) in g.nodes().iter().enumerate() {
            let w1 = if j == 0 || j == g.n_cells() { 0.5 } else { 1.0 } * g.spacing();
            let pts: Vec<Point> = (0..m2).map(|i| [x1, (i as f64 + 0.5) / m2 as f64]).collect();
            let vals = assemble_field(&sol, &pts).unwrap();
            sq += w1 * vals.iter().map(|v| v.norm_sqr()).sum::<f64>() / m2 as f64;
        }
        assert!((sq.sqrt() / parseval - 1.0).abs() < 1e-3);
    }

    #[test]
    fn reciprocity_at_rest() {
        let cfg = DuctConfig::new(1.0, 0.0, 5.0, -1.0, 1.0, 1.0).unwrap();
        let g = Grid1D::omega_b(&cfg, 1.0 / 512.0).unwrap();
        // one-cell boxes centred on the receivers make load and interpolation dual
        let w = 1.0 / 512.0;
        let (xa, xb): (Point, Point) = ([-204.5 * w, 0.3], [256.5 * w, 0.8]);
        let point_source = |y: Point| {
            let mut s = ModalSource::new();
            for n in 0..40 {
                let amp = mode_shape_unchecked(n, y[1], 1.0);
                s.add(n, AxialProfile::Box { lo: y[0] - 0.5 * w, hi: y[0] + 0.5 * w, amplitude: c(amp / w, 0.0) });
            }
            s
        };
        let sa = solve_full(Some(&point_source(xa)), None, &cfg, None, Formulation::Dtn, &g, 40).unwrap();
        let sb = solve_full(Some(&point_source(xb)), None, &cfg, None, Formulation::Dtn, &g, 40).unwrap();
        let ab = assemble_field(&sa, &[xb]).unwrap()[0];
        let ba = assemble_field(&sb, &[xa]).unwrap()[0];
        assert!((ab - ba).norm() < 1e-6 * ab.norm(), "{ab} {ba}");
    }

    proptest! {
        #[test]
        fn triangle_inequality(seed in 0u64..1000) {
            let cfg = cfg();
            let g = Grid1D::omega_b(&cfg, 1.0 / 16.0).unwrap();
            let mk = |s: u64| {
                let vals: Vec<Vec<Complex64>> = (0..3).map(|n| (0..g.n_nodes()).map(|j| {
                    let t = (s * 31 + n as u64 * 7 + j as u64) as f64;
                    c(t.sin(), (1.3 * t).cos())
                }).collect()).collect();
                ModalSolution::from_values(g, vals, Formulation::Dtn, &cfg).unwrap()
            };
            let (a, b, cc) = (mk(seed), mk(seed + 1), mk(seed + 2));
            let lhs = l2_error(&a, &cc).unwrap();
            let rhs = l2_error(&a, &b).unwrap() + l2_error(&b, &cc).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
