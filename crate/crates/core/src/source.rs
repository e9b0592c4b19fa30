//! Axial source profiles `f_n(x1)` for the per-mode problems.
//!
//! A right-hand side `f(x1, x2) = Σ_n f_n(x1) φ_n(x2)` is carried as a map
//! from mode index to a sum of axial profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::quad::gauss_legendre;

type AxialFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// One axial profile with compact support.
#[derive(Clone)]
pub enum AxialProfile {
    /// `amplitude` on `[lo, hi)`, zero elsewhere.
    Box { lo: f64, hi: f64, amplitude: Complex64 },
    /// `amplitude (1 - s²)⁴` with `s = (x - center)/half_width`, zero for `|s| >= 1`.
    Bump { center: f64, half_width: f64, amplitude: Complex64 },
    /// Piecewise constant: `values[i]` on `[edges[i], edges[i+1])`.
    Segments { edges: Vec<f64>, values: Vec<Complex64> },
    /// Arbitrary function supported in `support`.
    Custom { support: (f64, f64), func: AxialFn },
}

impl fmt::Debug for AxialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxialProfile::Box { lo, hi, amplitude } => f
                .debug_struct("Box")
                .field("lo", lo)
                .field("hi", hi)
                .field("amplitude", amplitude)
                .finish(),
            AxialProfile::Bump {
                center,
                half_width,
                amplitude,
            } => f
                .debug_struct("Bump")
                .field("center", center)
                .field("half_width", half_width)
                .field("amplitude", amplitude)
                .finish(),
            AxialProfile::Segments { edges, .. } => {
                f.debug_struct("Segments").field("n", &edges.len().saturating_sub(1)).finish()
            }
            AxialProfile::Custom { support, .. } => f.debug_struct("Custom").field("support", support).finish(),
        }
    }
}

impl AxialProfile {
    pub fn custom<F>(support: (f64, f64), func: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        AxialProfile::Custom {
            support,
            func: Arc::new(func),
        }
    }

    /// Box of unit mass centred at `center` with width `width`.
    pub fn normalized_box(center: f64, width: f64) -> Self {
        AxialProfile::Box {
            lo: center - 0.5 * width,
            hi: center + 0.5 * width,
            amplitude: Complex64::new(1.0 / width, 0.0),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            AxialProfile::Box { lo, hi, amplitude } => {
                if x >= *lo && x < *hi {
                    *amplitude
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            AxialProfile::Bump {
                center,
                half_width,
                amplitude,
            } => {
                let s = (x - center) / half_width;
                if s.abs() < 1.0 {
                    let t = 1.0 - s * s;
                    amplitude * (t * t * t * t)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            AxialProfile::Segments { edges, values } => {
                if edges.len() < 2 || x < edges[0] || x >= edges[edges.len() - 1] {
                    return Complex64::new(0.0, 0.0);
                }
                let i = edges.partition_point(|&e| e <= x) - 1;
                values[i.min(values.len() - 1)]
            }
            AxialProfile::Custom { support, func } => {
                if x >= support.0 && x <= support.1 {
                    func(x)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            AxialProfile::Box { lo, hi, .. } => (*lo, *hi),
            AxialProfile::Bump {
                center, half_width, ..
            } => (center - half_width, center + half_width),
            AxialProfile::Segments { edges, .. } => (edges[0], edges[edges.len() - 1]),
            AxialProfile::Custom { support, .. } => *support,
        }
    }

    /// `∫ |f|`, exact except for the custom kind (64-point Gauss).
    pub fn l1_norm(&self) -> f64 {
        match self {
            AxialProfile::Box { lo, hi, amplitude } => amplitude.norm() * (hi - lo),
            AxialProfile::Bump {
                half_width, amplitude, ..
            } => amplitude.norm() * half_width * 256.0 / 315.0,
            AxialProfile::Segments { edges, values } => {
                edges.windows(2).zip(values).map(|(w, v)| v.norm() * (w[1] - w[0])).sum()
            }
            AxialProfile::Custom { support, func } => {
                let (nodes, weights) = gauss_legendre(64);
                let half = 0.5 * (support.1 - support.0);
                let mid = 0.5 * (support.1 + support.0);
                nodes.iter().zip(&weights).map(|(t, w)| w * half * func(mid + half * t).norm()).sum()
            }
        }
    }

    /// Points where the profile or its low derivatives jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            AxialProfile::Segments { edges, .. } => edges.clone(),
            AxialProfile::Bump { center, .. } => {
                let (a, b) = self.support();
                vec![a, *center, b]
            }
            _ => {
                let (a, b) = self.support();
                vec![a, b]
            }
        }
    }

    /// Integral of the profile against the two linear shape functions of the
    /// element `[xl, xr]`: returns `(∫ f (xr - x)/h, ∫ f (x - xl)/h)`.
    ///
    /// Exact for the box, bump and segment kinds (sub-interval 5-point Gauss rule).
    pub fn element_load(&self, xl: f64, xr: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (sa, sb) = self.support();
        if sb <= xl || sa >= xr {
            return (zero, zero);
        }
        let h = xr - xl;
        if let AxialProfile::Segments { edges, values } = self {
            // exact closed form per constant piece
            let lo = edges.partition_point(|&e| e <= xl).saturating_sub(1);
            let mut left = zero;
            let mut right = zero;
            for i in lo..values.len() {
                let a = edges[i].max(xl);
                let b = edges[i + 1].min(xr);
                if edges[i] >= xr {
                    break;
                }
                if b <= a {
                    continue;
                }
                let ir = ((b - xl).powi(2) - (a - xl).powi(2)) / (2.0 * h);
                let il = (b - a) - ir;
                left += values[i] * il;
                right += values[i] * ir;
            }
            return (left, right);
        }
        let mut cuts = vec![xl];
        cuts.extend(self.breakpoints().into_iter().filter(|&p| p > xl && p < xr));
        cuts.push(xr);
        cuts.sort_by(f64::total_cmp);
        let (nodes, weights) = gauss_legendre(5);
        let mut left = zero;
        let mut right = zero;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (t, wt) in nodes.iter().zip(weights.iter()) {
                let x = mid + half * t;
                let fx = self.eval(x) * (wt * half);
                left += fx * ((xr - x) / h);
                right += fx * ((x - xl) / h);
            }
        }
        (left, right)
    }
}

/// Sum of axial profiles per transverse mode.
#[derive(Debug, Clone, Default)]
pub struct ModalSource {
    terms: BTreeMap<usize, Vec<AxialProfile>>,
}

impl ModalSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(mode: usize, profile: AxialProfile) -> Self {
        let mut s = Self::new();
        s.add(mode, profile);
        s
    }

    pub fn add(&mut self, mode: usize, profile: AxialProfile) -> &mut Self {
        self.terms.entry(mode).or_default().push(profile);
        self
    }

    /// Modes with at least one profile, ascending.
    pub fn modes(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().copied()
    }

    pub fn profiles(&self, mode: usize) -> &[AxialProfile] {
        self.terms.get(&mode).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `f_n(x1)`.
    pub fn eval(&self, mode: usize, x1: f64) -> Complex64 {
        self.profiles(mode).iter().map(|p| p.eval(x1)).sum()
    }

    /// Union of the supports of every profile, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        self.terms
            .values()
            .flatten()
            .map(AxialProfile::support)
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    /// Sum of two sources.
    pub fn merged(&self, other: &ModalSource) -> ModalSource {
        let mut out = self.clone();
        for (n, profiles) in &other.terms {
            out.terms.entry(*n).or_default().extend(profiles.iter().cloned());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_and_segments_eval() {
        let b = AxialProfile::normalized_box(0.0, 0.5);
        assert_eq!(b.eval(0.1).re, 2.0);
        assert_eq!(b.eval(0.3).re, 0.0);
        let s = AxialProfile::Segments {
            edges: vec![0.0, 1.0, 2.0],
            values: vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)],
        };
        assert_eq!(s.eval(0.0).re, 1.0);
        assert_eq!(s.eval(1.0).re, 3.0);
        assert_eq!(s.eval(2.0).re, 0.0);
        assert_eq!(s.eval(-0.1).re, 0.0);
    }

    #[test]
    fn element_load_sums_to_integral() {
        let profiles = [
            AxialProfile::normalized_box(0.13, 0.2),
            AxialProfile::Bump {
                center: 0.0,
                half_width: 0.3,
                amplitude: Complex64::new(1.0, 0.0),
            },
            AxialProfile::Segments {
                edges: vec![-0.21, 0.05, 0.33],
                values: vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 1.0)],
            },
        ];
        // exact integrals: 1, 0.3 * 256/315, 0.26 + (-2+i)*0.28
        let exact = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.3 * 256.0 / 315.0, 0.0),
            Complex64::new(0.26 - 0.56, 0.28),
        ];
        for (p, e) in profiles.iter().zip(exact) {
            let mut total = Complex64::new(0.0, 0.0);
            let h = 0.07;
            for j in -10..10 {
                let (l, r) = p.element_load(j as f64 * h, (j + 1) as f64 * h);
                total += l + r;
            }
            assert!((total - e).norm() < 1e-13, "{p:?}: {total} vs {e}");
        }
    }

    #[test]
    fn segment_load_matches_quadrature() {
        let s = AxialProfile::Segments {
            edges: vec![0.1, 0.25, 0.4],
            values: vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
        };
        let (l, r) = s.element_load(0.0, 0.3);
        // ∫_{0.1}^{0.25} x/0.3 + 2 ∫_{0.25}^{0.3} x/0.3
        let ir = (0.25f64.powi(2) - 0.01) / 0.6 + 2.0 * (0.09 - 0.0625) / 0.6;
        let total = 0.15 + 2.0 * 0.05;
        assert!((r.re - ir).abs() < 1e-15);
        assert!((l.re - (total - ir)).abs() < 1e-15);
    }

    #[test]
    fn l1_norms() {
        let bump = AxialProfile::Bump {
            center: 0.2,
            half_width: 0.3,
            amplitude: Complex64::new(0.0, -2.0),
        };
        let custom = AxialProfile::custom((-0.1, 0.5), move |x| bump.eval(x));
        let bump_l1 = 2.0 * 0.3 * 256.0 / 315.0;
        assert!((custom.l1_norm() - bump_l1).abs() < 1e-10);
        assert!((AxialProfile::normalized_box(1.0, 0.25).l1_norm() - 1.0).abs() < 1e-15);
        let s = AxialProfile::Segments {
            edges: vec![0.0, 0.5, 2.0],
            values: vec![Complex64::new(3.0, 4.0), Complex64::new(-1.0, 0.0)],
        };
        assert!((s.l1_norm() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn modal_source_merge() {
        let a = ModalSource::single(1, AxialProfile::normalized_box(0.0, 0.1));
        let b = ModalSource::single(2, AxialProfile::normalized_box(0.0, 0.1));
        let m = a.merged(&b);
        assert_eq!(m.modes().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(m.eval(1, 0.0).re, 10.0);
        assert_eq!(m.eval(0, 0.0).re, 0.0);
    }
}
