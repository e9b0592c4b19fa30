//! Bessel functions of the first and second kind of orders 0 and 1 for real
//! positive arguments, and the Hankel function `H0(1) = J0 + i Y0`.
//!
//! Ascending series are used on `(0, 12]`, the Hankel large-argument
//! expansion (summed up to its smallest term) beyond. Both branches are
//! accurate to about `1e-11` absolute at the crossover.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Argument at which evaluation switches from the series to the asymptotic expansion.
pub const CROSSOVER: f64 = 12.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Values of `J0`, `Y0` and `H0(1)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelValue {
    pub j0: f64,
    pub y0: f64,
    pub h0: Complex64,
}

impl HankelValue {
    pub fn at(z: f64) -> Result<Self> {
        let h0 = hankel0(z)?;
        Ok(HankelValue {
            j0: h0.re,
            y0: h0.im,
            h0,
        })
    }
}

/// Hankel function of the first kind of order 0.
pub fn hankel0(z: f64) -> Result<Complex64> {
    check_arg(z)?;
    Ok(hankel0_unchecked(z))
}

/// Hankel function of the first kind of order 1.
pub fn hankel1(z: f64) -> Result<Complex64> {
    check_arg(z)?;
    Ok(if z <= CROSSOVER {
        let (j, y) = series_order1(z);
        Complex64::new(j, y)
    } else {
        asymptotic(1, z)
    })
}

#[inline]
pub(crate) fn hankel0_unchecked(z: f64) -> Complex64 {
    if z <= CROSSOVER {
        let (j, y) = series_order0(z);
        Complex64::new(j, y)
    } else {
        asymptotic(0, z)
    }
}

/// Leading term `sqrt(2/(π z)) exp(i(z - π/4))` of the large-argument expansion.
pub fn hankel0_asymptotic(z: f64) -> Complex64 {
    (2.0 / (PI * z)).sqrt() * Complex64::from_polar(1.0, z - FRAC_PI_4)
}

pub fn bessel_j0(z: f64) -> Result<f64> {
    Ok(hankel0(z)?.re)
}

pub fn bessel_y0(z: f64) -> Result<f64> {
    Ok(hankel0(z)?.im)
}

pub fn bessel_j1(z: f64) -> Result<f64> {
    Ok(hankel1(z)?.re)
}

pub fn bessel_y1(z: f64) -> Result<f64> {
    Ok(hankel1(z)?.im)
}

fn check_arg(z: f64) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("Bessel/Hankel argument must be positive and finite, got {z}")));
    }
    Ok(())
}

/// `(J0, Y0)` from the ascending series.
pub(crate) fn series_order0(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let mut term = 1.0; // (-q)^k / (k!)^2
    let mut j = 1.0;
    let mut harmonic = 0.0;
    let mut ysum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        j += term;
        ysum -= harmonic * term;
        if term.abs() * harmonic < 1e-18 * j.abs().max(1e-3) && kf > q.sqrt() {
            break;
        }
    }
    let y = 2.0 / PI * (((0.5 * z).ln() + EULER_GAMMA) * j + ysum);
    (j, y)
}

/// `(J1, Y1)` from the ascending series.
pub(crate) fn series_order1(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let mut term = 1.0; // (-q)^k / (k! (k+1)!)
    let mut h_k = 0.0;
    let mut h_k1 = 1.0;
    let mut jsum = 1.0;
    let mut ysum = (h_k + h_k1 - 2.0 * EULER_GAMMA) * term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + 1.0));
        h_k += 1.0 / kf;
        h_k1 += 1.0 / (kf + 1.0);
        jsum += term;
        ysum += (h_k + h_k1 - 2.0 * EULER_GAMMA) * term;
        if term.abs() * (h_k1 + 1.0) < 1e-18 && kf > q.sqrt() {
            break;
        }
    }
    let j = 0.5 * z * jsum;
    let y = 2.0 / PI * (0.5 * z).ln() * j - 2.0 / (PI * z) - z / (2.0 * PI) * ysum;
    (j, y)
}

/// Hankel large-argument expansion of order `nu`, truncated at its smallest term.
fn asymptotic(nu: u32, z: f64) -> Complex64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut coeff = 1.0; // a_k(nu) / z^k
    let mut ipow = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = coeff * (mu - odd * odd) / (8.0 * kf * z);
        if next.abs() >= last || next.abs() < 1e-17 {
            break;
        }
        coeff = next;
        last = coeff.abs();
        ipow *= Complex64::new(0.0, 1.0);
        sum += ipow * coeff;
    }
    let phase = z - nu as f64 * PI / 2.0 - FRAC_PI_4;
    (2.0 / (PI * z)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}
