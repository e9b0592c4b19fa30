//! Duct geometry, mean flow and the transverse/axial modal structure.
//!
//! The duct is the strip `x1 ∈ ℝ, 0 < x2 < d` with rigid walls. Pressure
//! modes are `exp(i β x1) φ_n(x2)`, with `φ_n` the Neumann cosine basis and
//! `β` one of the two roots of
//!
//! ```text
//! -(1-M²) β² - 2 k M β + k² = n² π² / d²
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative distance to the cutoff set `k = sqrt(1-M²) n π / d` below which a
/// configuration is rejected.
pub const CUTOFF_TOL: f64 = 1e-8;

/// Physical setup of the duct problem. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuctConfig {
    d: f64,
    mach: f64,
    k: f64,
    omega: f64,
    c0: f64,
    x_minus: f64,
    x_plus: f64,
    layer_len: f64,
}

impl DuctConfig {
    /// Builds a configuration with sound speed `c0 = 1`, so `omega = k`.
    pub fn new(d: f64, mach: f64, k: f64, x_minus: f64, x_plus: f64, layer_len: f64) -> Result<Self> {
        Self::with_sound_speed(d, mach, k, 1.0, x_minus, x_plus, layer_len)
    }

    /// Builds a configuration with an explicit sound speed; `omega = k c0`.
    pub fn with_sound_speed(
        d: f64,
        mach: f64,
        k: f64,
        c0: f64,
        x_minus: f64,
        x_plus: f64,
        layer_len: f64,
    ) -> Result<Self> {
        let cfg = DuctConfig {
            d,
            mach,
            k,
            omega: k * c0,
            c0,
            x_minus,
            x_plus,
            layer_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks every invariant.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.d, self.mach, self.k, self.c0, self.x_minus, self.x_plus, self.layer_len]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        if !(0.0..1.0).contains(&self.mach) {
            return Err(Error::InvalidConfig(format!(
                "Mach number M = {} violates 0 <= M < 1",
                self.mach
            )));
        }
        if self.d <= 0.0 {
            return Err(Error::InvalidConfig(format!("duct height d = {} must be > 0", self.d)));
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidConfig(format!("wavenumber k = {} must be > 0", self.k)));
        }
        if self.c0 <= 0.0 {
            return Err(Error::InvalidConfig(format!("sound speed c0 = {} must be > 0", self.c0)));
        }
        if self.x_minus >= self.x_plus {
            return Err(Error::InvalidConfig(format!(
                "x_minus = {} must be < x_plus = {}",
                self.x_minus, self.x_plus
            )));
        }
        if self.layer_len <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "layer length L = {} must be > 0",
                self.layer_len
            )));
        }
        if let Some((mode, gap)) = self.nearest_cutoff() {
            if gap <= CUTOFF_TOL * self.k {
                return Err(Error::CutoffResonance { mode, gap });
            }
        }
        Ok(())
    }

    /// Closest resonant mode `n >= 1` and its distance `|k - sqrt(1-M²) n π/d|`.
    fn nearest_cutoff(&self) -> Option<(usize, f64)> {
        let step = self.beta_factor().sqrt() * PI / self.d;
        let center = (self.k / step).round().max(1.0) as usize;
        (center.saturating_sub(1).max(1)..=center + 1)
            .map(|n| (n, (self.k - step * n as f64).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn mach(&self) -> f64 {
        self.mach
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn x_minus(&self) -> f64 {
        self.x_minus
    }
    pub fn x_plus(&self) -> f64 {
        self.x_plus
    }
    pub fn layer_len(&self) -> f64 {
        self.layer_len
    }

    /// `1 - M²`.
    pub fn beta_factor(&self) -> f64 {
        1.0 - self.mach * self.mach
    }

    /// Phase shift `M k / (1 - M²)` appearing in the shifted derivative
    /// `∂₁ + i M k / (1 - M²)`.
    pub fn convective_shift(&self) -> f64 {
        self.mach * self.k / self.beta_factor()
    }

    /// Transverse eigenvalue `n² π² / d²`.
    pub fn transverse_eig(&self, n: usize) -> f64 {
        let q = n as f64 * PI / self.d;
        q * q
    }

    /// Same configuration with a different layer length.
    pub fn with_layer_len(&self, layer_len: f64) -> Result<Self> {
        let mut cfg = *self;
        cfg.layer_len = layer_len;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same configuration with a different computational window `(x_minus, x_plus)`.
    pub fn with_window(&self, x_minus: f64, x_plus: f64) -> Result<Self> {
        let mut cfg = *self;
        cfg.x_minus = x_minus;
        cfg.x_plus = x_plus;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same configuration with a different Mach number (used by reciprocity checks,
    /// which evaluate the adjoint problem at `-M`; negative values are allowed here only).
    #[cfg(test)]
    pub(crate) fn with_signed_mach(&self, mach: f64) -> Self {
        let mut cfg = *self;
        cfg.mach = mach;
        cfg
    }
}

/// Orthonormal Neumann mode `φ_n(x2)` on `(0, d)`.
pub fn mode_shape(n: usize, x2: f64, d: f64) -> Result<f64> {
    if !(0.0..=d).contains(&x2) {
        return Err(Error::Domain(format!("x2 = {x2} outside [0, {d}]")));
    }
    Ok(mode_shape_unchecked(n, x2, d))
}

/// `φ_n(x2)` without the range check; callers guarantee `0 <= x2 <= d`.
#[inline]
pub fn mode_shape_unchecked(n: usize, x2: f64, d: f64) -> f64 {
    if n == 0 {
        1.0 / d.sqrt()
    } else {
        (2.0 / d).sqrt() * (n as f64 * PI * x2 / d).cos()
    }
}

/// `∫_a^b φ_n(x2) dx2`, exact.
pub fn mode_shape_integral(n: usize, a: f64, b: f64, d: f64) -> f64 {
    if n == 0 {
        (b - a) / d.sqrt()
    } else {
        let q = n as f64 * PI / d;
        (2.0 / d).sqrt() * ((q * b).sin() - (q * a).sin()) / q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Propagating,
    Evanescent,
}

impl ModeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeKind::Propagating => "propagating",
            ModeKind::Evanescent => "evanescent",
        }
    }
}

/// The two axial wavenumbers of one mode. `plus` is outgoing towards `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxialWavenumbers {
    pub plus: Complex64,
    pub minus: Complex64,
    pub kind: ModeKind,
}

impl AxialWavenumbers {
    /// `β⁺ - β⁻`.
    pub fn gap(&self) -> Complex64 {
        self.plus - self.minus
    }
}

/// Roots `β±_n` of the dispersion relation.
///
/// Propagating modes have `β⁺ > β⁻` real, evanescent ones have
/// `Im β⁺ > 0 > Im β⁻`. The exact-cutoff case is refused.
pub fn axial_wavenumbers(n: usize, cfg: &DuctConfig) -> Result<AxialWavenumbers> {
    let b = cfg.beta_factor();
    let km = cfg.k * cfg.mach;
    let s = b.sqrt() * n as f64 * PI / cfg.d;
    if n > 0 && (cfg.k - s).abs() <= CUTOFF_TOL * cfg.k {
        return Err(Error::CutoffResonance {
            mode: n,
            gap: (cfg.k - s).abs(),
        });
    }
    // k² - s² factored to keep relative accuracy near cutoff
    let disc = (cfg.k - s) * (cfg.k + s);
    if disc > 0.0 {
        let r = disc.sqrt();
        Ok(AxialWavenumbers {
            plus: Complex64::new((-km + r) / b, 0.0),
            minus: Complex64::new((-km - r) / b, 0.0),
            kind: ModeKind::Propagating,
        })
    } else {
        let r = (-disc).sqrt();
        Ok(AxialWavenumbers {
            plus: Complex64::new(-km / b, r / b),
            minus: Complex64::new(-km / b, -r / b),
            kind: ModeKind::Evanescent,
        })
    }
}

/// Cutoff number `K0 = k d / (π sqrt(1-M²))` and `N0 = floor(K0)`.
pub fn cutoff_numbers(cfg: &DuctConfig) -> (f64, usize) {
    let k0 = cfg.k * cfg.d / (PI * cfg.beta_factor().sqrt());
    (k0, k0.floor() as usize)
}

/// `|-(1-M²)β² - 2kMβ + k² - n²π²/d²|`.
pub fn dispersion_residual(beta: Complex64, n: usize, cfg: &DuctConfig) -> f64 {
    let k = cfg.k;
    (-cfg.beta_factor() * beta * beta - 2.0 * k * cfg.mach * beta + k * k - cfg.transverse_eig(n)).norm()
}

/// Per-mode axial wavenumbers for modes `0..n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    pub k0: f64,
    pub n0: usize,
    pub modes: Vec<AxialWavenumbers>,
}

impl DispersionTable {
    pub fn new(cfg: &DuctConfig, n_max: usize) -> Result<Self> {
        let (k0, n0) = cutoff_numbers(cfg);
        let modes = (0..n_max)
            .map(|n| axial_wavenumbers(n, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(DispersionTable { k0, n0, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(d: f64, m: f64, k: f64) -> DuctConfig {
        DuctConfig::new(d, m, k, -1.0, 1.0, 1.0).unwrap()
    }

    // Bypasses validation: k = π with d = 1 sits on the n = 1 cutoff, yet the
    // n = 0 and n >= 2 roots are still well defined.
    fn raw(d: f64, m: f64, k: f64) -> DuctConfig {
        DuctConfig {
            d,
            mach: m,
            k,
            omega: k,
            c0: 1.0,
            x_minus: -1.0,
            x_plus: 1.0,
            layer_len: 1.0,
        }
    }

    #[test]
    fn mode_shape_values() {
        assert_abs_diff_eq!(mode_shape(0, 0.3, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(mode_shape(1, 0.0, 1.0).unwrap(), 2f64.sqrt());
        assert_abs_diff_eq!(mode_shape(2, 0.25, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(mode_shape(1, 1.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn orthonormal_basis() {
        // 512-point composite Simpson rule on [0, d]
        let d = 1.7;
        let n_pts = 512;
        let h = d / n_pts as f64;
        for m in 0..=20 {
            for n in 0..=20 {
                let mut s = 0.0;
                for j in 0..=n_pts {
                    let w = if j == 0 || j == n_pts {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    let x = j as f64 * h;
                    s += w * mode_shape_unchecked(m, x, d) * mode_shape_unchecked(n, x, d);
                }
                s *= h / 3.0;
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-10, "m={m} n={n} s={s}");
            }
        }
    }

    #[test]
    fn transverse_integral_matches_closed_form() {
        assert_abs_diff_eq!(mode_shape_integral(0, 0.0, 2.0, 2.0), 2f64.sqrt(), epsilon = 1e-15);
        let d = 1.0;
        assert_abs_diff_eq!(
            mode_shape_integral(1, 0.0, 0.5, d),
            (2.0 / d).sqrt() * d / PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn wavenumber_examples() {
        let w = axial_wavenumbers(0, &raw(1.0, 0.0, PI)).unwrap();
        assert_abs_diff_eq!(w.plus.re, PI, epsilon = 1e-15);
        assert_abs_diff_eq!(w.minus.re, -PI, epsilon = 1e-15);

        let c = cfg(PI, 0.5, 1.0);
        let w = axial_wavenumbers(0, &c).unwrap();
        assert_abs_diff_eq!(w.plus.re, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.minus.re, -2.0, epsilon = 1e-15);
        assert!(dispersion_residual(w.plus, 0, &c) < 1e-14);
        assert!(dispersion_residual(w.minus, 0, &c) < 1e-14);

        let w = axial_wavenumbers(5, &raw(1.0, 0.0, PI)).unwrap();
        assert!(axial_wavenumbers(1, &raw(1.0, 0.0, PI)).is_err());
        assert_eq!(w.kind, ModeKind::Evanescent);
        assert_abs_diff_eq!(w.plus.im, PI * 24f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.minus.im, -PI * 24f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.plus.re, 0.0);
    }

    #[test]
    fn cutoff_examples() {
        let (k0, n0) = cutoff_numbers(&cfg(1.0, 0.0, PI + 1e-3));
        assert!((k0 - 1.0).abs() < 1e-3);
        assert_eq!(n0, 1);
        let (k0, n0) = cutoff_numbers(&cfg(PI, 0.5, 1.0));
        assert_abs_diff_eq!(k0, 1.0 / 0.75f64.sqrt(), epsilon = 1e-12);
        assert_eq!(n0, 1);
        let below = 0.75f64.sqrt() * PI * (1.0 - 1e-6);
        let (k0, n0) = cutoff_numbers(&cfg(1.0, 0.5, below));
        assert!(k0 < 1.0);
        assert_eq!(n0, 0);
    }

    #[test]
    fn resonant_config_rejected() {
        // k = π, M = 0, d = 1 sits exactly on the n = 1 cutoff
        let err = DuctConfig::new(1.0, 0.0, PI, -1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::CutoffResonance { mode: 1, .. }));
        let k = 0.91f64.sqrt() * 2.0 * PI;
        assert!(matches!(
            DuctConfig::new(1.0, 0.3, k, -1.0, 1.0, 1.0),
            Err(Error::CutoffResonance { mode: 2, .. })
        ));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(DuctConfig::new(1.0, 1.2, 5.0, -1.0, 1.0, 1.0).is_err());
        assert!(DuctConfig::new(0.0, 0.3, 5.0, -1.0, 1.0, 1.0).is_err());
        assert!(DuctConfig::new(1.0, 0.3, 5.0, 1.0, -1.0, 1.0).is_err());
        assert!(DuctConfig::new(1.0, 0.3, 5.0, -1.0, 1.0, 0.0).is_err());
        let c = DuctConfig::with_sound_speed(1.0, 0.3, 5.0, 340.0, -1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.omega(), 5.0 * 340.0);
    }

    #[test]
    fn residual_examples() {
        let c = DuctConfig::new(1.0, 0.0, 1.0, -1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(dispersion_residual(Complex64::new(0.0, 0.0), 0, &c), 1.0);
        let c = cfg(1.0, 0.3, 10.0);
        let w = axial_wavenumbers(3, &c).unwrap();
        assert!(dispersion_residual(w.minus, 3, &c) < 1e-10);
    }

    #[test]
    fn symmetric_roots_without_flow() {
        let c = cfg(1.0, 0.0, 7.3);
        for n in 0..40 {
            let w = axial_wavenumbers(n, &c).unwrap();
            assert_eq!(w.minus, -w.plus);
        }
    }

    #[test]
    fn propagating_count_monotone() {
        let mut last = 0;
        for i in 1..400 {
            let k = 0.05 * i as f64 + 1e-3;
            if let Ok(c) = DuctConfig::new(1.0, 0.3, k, -1.0, 1.0, 1.0) {
                let n0 = cutoff_numbers(&c).1;
                assert!(n0 >= last);
                last = n0;
            }
        }
        let mut last = 0;
        for i in 0..99 {
            let m = 0.01 * i as f64;
            if let Ok(c) = DuctConfig::new(1.0, m, 5.0, -1.0, 1.0, 1.0) {
                let n0 = cutoff_numbers(&c).1;
                assert!(n0 >= last);
                last = n0;
            }
        }
    }

    #[test]
    fn kind_matches_cutoff() {
        let c = cfg(1.0, 0.6, 20.0);
        let table = DispersionTable::new(&c, 30).unwrap();
        for (n, w) in table.modes.iter().enumerate() {
            if n <= table.n0 {
                assert_eq!(w.kind, ModeKind::Propagating);
                assert!(w.plus.re > w.minus.re);
            } else {
                assert_eq!(w.kind, ModeKind::Evanescent);
                assert!(w.plus.im > 0.0 && w.minus.im < 0.0);
            }
        }
    }
}
