//! Perfectly matched layers terminating the duct at `x⁺ + L` and `x⁻ - L`.
//!
//! The layer replaces `∂₁ + iγ` by `α(∂₁ + iγ)`, `γ = Mk/(1-M²)`, with
//! `α = -iω/(-iω + σ)`, so `1/α = 1 + iσ/ω`. Per mode the layer solution is
//! a combination of two stretched exponentials; imposing a Dirichlet end
//! gives a Robin coefficient `ν±` replacing the exact `β±` on `Σ±`.
//!
//! Labelling: on the plus side `A⁺` multiplies the outgoing `β⁺` wave. On
//! the minus side the amplitudes are labelled as in the closed forms, so
//! `B⁺ = 1/(1 - e^{iΔβS⁻})` multiplies the outgoing `β⁻` wave and `B⁻` the
//! reflected `β⁺` wave; then `ν⁻ = B⁻β⁺ + B⁺β⁻`, and the boundary condition
//! on `Σ⁻` reads `∂₁p_n = iν⁻p_n`.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::duct::{axial_wavenumbers, cutoff_numbers, AxialWavenumbers, DuctConfig, ModeKind};
use crate::error::{Error, Result};

/// Exponents below this are reported as underflow.
pub const UNDERFLOW_LOG: f64 = -700.0;

/// Which layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// Absorption profile shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `σ± s²` at depth `s` into the layer.
    Quadratic,
    /// Piecewise-linear `σ(s)` from `(s, σ)` samples, one table per side,
    /// starting at `s = 0` with ascending depths.
    Tabulated { plus: Vec<(f64, f64)>, minus: Vec<(f64, f64)> },
}

/// Absorption profile of both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct PmlProfile {
    sigma_plus: f64,
    sigma_minus: f64,
    shape: Shape,
    x_plus: f64,
    x_minus: f64,
    layer_len: f64,
}

impl PmlProfile {
    /// Quadratic profile `σ±(distance)²`.
    pub fn quadratic(sigma_plus: f64, sigma_minus: f64, cfg: &DuctConfig) -> Result<Self> {
        for (name, s) in [("sigma_plus", sigma_plus), ("sigma_minus", sigma_minus)] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {s}")));
            }
        }
        Ok(PmlProfile {
            sigma_plus,
            sigma_minus,
            shape: Shape::Quadratic,
            x_plus: cfg.x_plus(),
            x_minus: cfg.x_minus(),
            layer_len: cfg.layer_len(),
        })
    }

    /// Tabulated profile; each table must start at depth 0 with `σ = 0`.
    pub fn tabulated(plus: Vec<(f64, f64)>, minus: Vec<(f64, f64)>, cfg: &DuctConfig) -> Result<Self> {
        for (name, t) in [("plus", &plus), ("minus", &minus)] {
            if t.len() < 2 || t[0].0 != 0.0 || t[0].1 != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} table needs at least two rows starting at (0, 0)"
                )));
            }
            if t.windows(2).any(|w| !(w[1].0 > w[0].0)) || t.iter().any(|r| !(r.1 >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "{name} table needs ascending depths and non-negative σ"
                )));
            }
        }
        Ok(PmlProfile {
            sigma_plus: plus.iter().map(|r| r.1).fold(0.0, f64::max),
            sigma_minus: minus.iter().map(|r| r.1).fold(0.0, f64::max),
            shape: Shape::Tabulated { plus, minus },
            x_plus: cfg.x_plus(),
            x_minus: cfg.x_minus(),
            layer_len: cfg.layer_len(),
        })
    }

    /// Same profile with the window and layer length of another configuration.
    pub fn rebased(&self, cfg: &DuctConfig) -> Self {
        let mut p = self.clone();
        p.x_plus = cfg.x_plus();
        p.x_minus = cfg.x_minus();
        p.layer_len = cfg.layer_len();
        p
    }

    pub fn sigma_plus(&self) -> f64 {
        self.sigma_plus
    }

    pub fn sigma_minus(&self) -> f64 {
        self.sigma_minus
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn layer_len(&self) -> f64 {
        self.layer_len
    }

    /// `σ` at depth `s >= 0` into a layer.
    fn sigma_depth(&self, side: Side, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Quadratic => {
                let c = match side {
                    Side::Plus => self.sigma_plus,
                    Side::Minus => self.sigma_minus,
                };
                c * s * s
            }
            Shape::Tabulated { plus, minus } => {
                let t = match side {
                    Side::Plus => plus,
                    Side::Minus => minus,
                };
                let last = t[t.len() - 1];
                if s >= last.0 {
                    return last.1;
                }
                let j = t.partition_point(|r| r.0 <= s);
                let (a, b) = (t[j - 1], t[j]);
                a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
            }
        }
    }

    /// `∫_0^L σ(depth)/ω ds`, closed form for the quadratic shape, exact
    /// trapezoid sums for the piecewise-linear table.
    fn sigma_integral(&self, side: Side, len: f64, omega: f64) -> f64 {
        match &self.shape {
            Shape::Quadratic => {
                let c = match side {
                    Side::Plus => self.sigma_plus,
                    Side::Minus => self.sigma_minus,
                };
                c * len * len * len / (3.0 * omega)
            }
            Shape::Tabulated { plus, minus } => {
                let t = match side {
                    Side::Plus => plus,
                    Side::Minus => minus,
                };
                let mut acc = 0.0;
                let mut prev = (0.0, 0.0);
                for &row in t.iter().skip(1) {
                    if row.0 >= len {
                        let end = self.sigma_depth(side, len);
                        acc += 0.5 * (prev.1 + end) * (len - prev.0);
                        return acc / omega;
                    }
                    acc += 0.5 * (prev.1 + row.1) * (row.0 - prev.0);
                    prev = row;
                }
                acc += prev.1 * (len - prev.0);
                acc / omega
            }
        }
    }

    /// `∫_0^L min(1, σ/ω) ds`, the effective absorption length.
    pub fn effective_absorption(&self, side: Side, len: f64, omega: f64) -> f64 {
        match &self.shape {
            Shape::Quadratic => {
                let c = match side {
                    Side::Plus => self.sigma_plus,
                    Side::Minus => self.sigma_minus,
                } / omega;
                if c <= 0.0 {
                    return 0.0;
                }
                let knee = (1.0 / c).sqrt();
                if len <= knee {
                    c * len.powi(3) / 3.0
                } else {
                    c * knee.powi(3) / 3.0 + (len - knee)
                }
            }
            Shape::Tabulated { .. } => {
                // σ is piecewise linear, so min(1, σ/ω) is too after adding crossings
                let n = 4096;
                let h = len / n as f64;
                let f = |s: f64| (self.sigma_depth(side, s) / omega).min(1.0);
                (0..n).map(|j| 0.5 * h * (f(j as f64 * h) + f((j + 1) as f64 * h))).sum()
            }
        }
    }
}

/// `σ(x1)`, zero between `x⁻` and `x⁺`.
pub fn sigma(profile: &PmlProfile, x1: f64) -> f64 {
    if x1 > profile.x_plus {
        profile.sigma_depth(Side::Plus, x1 - profile.x_plus)
    } else if x1 < profile.x_minus {
        profile.sigma_depth(Side::Minus, profile.x_minus - x1)
    } else {
        0.0
    }
}

/// `α(x1) = -iω/(-iω + σ(x1))`.
pub fn alpha(profile: &PmlProfile, x1: f64, omega: f64) -> Complex64 {
    let s = sigma(profile, x1);
    Complex64::new(0.0, -omega) / Complex64::new(s, -omega)
}

/// `∫_0^L 1/α ds = L + i ∫_0^L σ/ω ds` into the layer on `side`.
pub fn stretch_integral(profile: &PmlProfile, side: Side, len: f64, omega: f64) -> Complex64 {
    Complex64::new(len, profile.sigma_integral(side, len, omega))
}

/// Layer mode `ψ±_n(x1)`, equal to 1 on the interface. Returns `(ψ⁺, ψ⁻)`.
pub fn psi_mode(n: usize, x1: f64, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<(Complex64, Complex64)> {
    let w = axial_wavenumbers(n, cfg)?;
    let gamma = cfg.convective_shift();
    let omega = cfg.omega();
    let i = Complex64::i();
    // signed stretched coordinate ∫_{x±}^{x1} 1/α
    let (rel, stretched) = match side {
        Side::Plus => {
            let depth = x1 - cfg.x_plus();
            (depth, stretch_integral(profile, Side::Plus, depth.max(0.0), omega))
        }
        Side::Minus => {
            let depth = cfg.x_minus() - x1;
            (-depth, -stretch_integral(profile, Side::Minus, depth.max(0.0), omega))
        }
    };
    let f = |beta: Complex64| (-i * gamma * rel + i * (beta + gamma) * stretched).exp();
    Ok((f(w.plus), f(w.minus)))
}

/// Layer amplitudes: `(A⁺, A⁻)` on the plus side, `(B⁺, B⁻)` on the minus side.
pub fn modal_amplitudes(n: usize, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<(Complex64, Complex64)> {
    let w = axial_wavenumbers(n, cfg)?;
    let s = stretch_integral(profile, side, profile.layer_len, cfg.omega());
    amplitudes_from(n, &w, s)
}

/// `(1/(1 - e^{iΔβS}), 1/(1 - e^{-iΔβS}))` computed from the small exponential.
fn amplitudes_from(n: usize, w: &AxialWavenumbers, s: Complex64) -> Result<(Complex64, Complex64)> {
    let z = Complex64::i() * w.gap() * s;
    // Re z = -Im(ΔβS) < 0 whenever the layer absorbs or the mode is evanescent
    if z.re <= 0.0 {
        let e = z.exp();
        let den = 1.0 - e;
        check_den(n, den)?;
        Ok((1.0 / den, -e / den))
    } else {
        let e = (-z).exp();
        let den = 1.0 - e;
        check_den(n, den)?;
        Ok((-e / den, 1.0 / den))
    }
}

fn check_den(n: usize, den: Complex64) -> Result<()> {
    if den.norm() < 1e-14 {
        return Err(Error::DegenerateLayer {
            mode: n,
            modulus: den.norm(),
        });
    }
    Ok(())
}

/// PML Robin coefficient `ν±_n`, closed form.
pub fn nu_coefficients(n: usize, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<Complex64> {
    let w = axial_wavenumbers(n, cfg)?;
    let s = stretch_integral(profile, side, profile.layer_len, cfg.omega());
    nu_from(n, &w, side, s)
}

fn nu_from(n: usize, w: &AxialWavenumbers, side: Side, s: Complex64) -> Result<Complex64> {
    let gap = w.gap();
    let z = -Complex64::i() * gap * s; // large positive real part when absorbing
    // Δβ/(1 - e^{z}) = -Δβ e^{-z}/(1 - e^{-z})
    let corr = if z.re >= 0.0 {
        let e = (-z).exp();
        let den = 1.0 - e;
        check_den(n, den)?;
        -gap * e / den
    } else {
        let den = 1.0 - z.exp();
        check_den(n, den)?;
        gap / den
    };
    Ok(match side {
        Side::Plus => w.plus - corr,
        Side::Minus => w.minus + corr,
    })
}

/// `ν` assembled from the amplitudes: `A⁺β⁺ + A⁻β⁻` or `B⁻β⁺ + B⁺β⁻`.
pub fn nu_from_amplitudes(n: usize, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<Complex64> {
    let w = axial_wavenumbers(n, cfg)?;
    let (a_plus, a_minus) = modal_amplitudes(n, side, profile, cfg)?;
    Ok(match side {
        Side::Plus => a_plus * w.plus + a_minus * w.minus,
        Side::Minus => a_minus * w.plus + a_plus * w.minus,
    })
}

/// `|A⁻/A⁺|` (or `|B⁻/B⁺|`) from the computed amplitudes.
pub fn reflection_coefficient(n: usize, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<f64> {
    let (a, b) = modal_amplitudes(n, side, profile, cfg)?;
    Ok((b / a).norm())
}

/// Closed-form reflection coefficient: `exp(-Δβ ∫σ/ω)` for propagating
/// modes and `exp(-|Δβ| L)` for evanescent ones.
pub fn reflection_closed_form(n: usize, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<f64> {
    let w = axial_wavenumbers(n, cfg)?;
    let (k0, _) = cutoff_numbers(cfg);
    let b = cfg.beta_factor();
    let ratio = n as f64 / k0;
    Ok(match w.kind {
        ModeKind::Propagating => {
            let absorb = profile.sigma_integral(side, profile.layer_len, cfg.omega());
            (-2.0 * cfg.k() / b * (1.0 - ratio * ratio).sqrt() * absorb).exp()
        }
        ModeKind::Evanescent => (-2.0 * cfg.k() * profile.layer_len / b * (ratio * ratio - 1.0).sqrt()).exp(),
    })
}

/// Measured `|β - ν|` against its exponential bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBound {
    /// `|β⁺ - ν⁺|` (plus) or `|β⁻ - ν⁻|` (minus); 0 when it underflows.
    pub measured: f64,
    /// Natural logarithm of `measured`, always finite.
    pub log_measured: f64,
    /// `2|Δβ| e^{-Im(ΔβS)}`; 0 when it underflows.
    pub bound: f64,
    pub log_bound: f64,
    /// The bound needs `Im(ΔβS) >= ln 2`.
    pub applicable: bool,
    pub underflow: bool,
}

/// Gap between the exact and PML Robin coefficients, with its bound.
pub fn dtn_gap_bound(n: usize, side: Side, profile: &PmlProfile, cfg: &DuctConfig) -> Result<GapBound> {
    let w = axial_wavenumbers(n, cfg)?;
    let s = stretch_integral(profile, side, profile.layer_len, cfg.omega());
    let gap = w.gap();
    let decay = (gap * s).im;
    let e_log = -decay; // ln|e^{iΔβS}|
    let e = e_log.exp();
    // |1 - e^{iΔβS}| from its phase without forming a possibly huge number
    let phase = (gap * s).re;
    let one_minus = if e_log < -40.0 {
        1.0
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::from_polar(e, phase)).norm()
    };
    if one_minus < 1e-14 {
        return Err(Error::DegenerateLayer {
            mode: n,
            modulus: one_minus,
        });
    }
    let log_measured = gap.norm().ln() + e_log - one_minus.ln();
    let log_bound = LN_2 + gap.norm().ln() + e_log;
    let underflow = log_measured < UNDERFLOW_LOG;
    let exp_or_zero = |l: f64| if l < UNDERFLOW_LOG { 0.0 } else { l.exp() };
    Ok(GapBound {
        measured: exp_or_zero(log_measured),
        log_measured,
        bound: exp_or_zero(log_bound),
        log_bound,
        applicable: decay >= LN_2,
        underflow,
    })
}

/// `C₂ = (2k/(1-M²)) min(1, sqrt((N0+1)²/K0² - 1))`.
pub fn c2_constant(cfg: &DuctConfig) -> f64 {
    let (k0, n0) = cutoff_numbers(cfg);
    let r = (n0 as f64 + 1.0) / k0;
    2.0 * cfg.k() / cfg.beta_factor() * (r * r - 1.0).sqrt().min(1.0)
}

/// `(1-M²) ω² / (σ_max² + ω²)` with `σ_max = max(σ±) L²`.
pub fn coercivity_constant(profile: &PmlProfile, cfg: &DuctConfig) -> f64 {
    let smax = match profile.shape {
        Shape::Quadratic => profile.sigma_plus.max(profile.sigma_minus) * profile.layer_len.powi(2),
        Shape::Tabulated { .. } => profile.sigma_plus.max(profile.sigma_minus),
    };
    let w2 = cfg.omega() * cfg.omega();
    cfg.beta_factor() * w2 / (smax * smax + w2)
}
