//! Browser bindings: dispersion table, PML reflections and a field solve.
//!
//! Each binding wraps a plain function of the same name without the `js_`
//! prefix, so the numerics are testable natively. Arrays cross the boundary
//! flattened as `Float64Array`s.

use wasm_bindgen::prelude::*;

use ductwave::duct::{DispersionTable, DuctConfig, ModeKind};
use ductwave::harness::propagating_source;
use ductwave::pml::{dtn_gap_bound, reflection_coefficient, PmlProfile, Side};
use ductwave::solver::{assemble_field, default_modes, solve_full, Formulation, Grid1D};

/// Duct of unit height on the window `[-1, 1]`.
fn duct(mach: f64, k: f64, layer_len: f64) -> Result<DuctConfig, String> {
    DuctConfig::new(1.0, mach, k, -1.0, 1.0, layer_len).map_err(|e| e.to_string())
}

/// Per mode: `re β⁺, im β⁺, re β⁻, im β⁻, propagating (1) or not (0)`.
pub fn dispersion(mach: f64, k: f64, n_modes: usize) -> Result<Vec<f64>, String> {
    let cfg = duct(mach, k, 1.0)?;
    let table = DispersionTable::new(&cfg, n_modes).map_err(|e| e.to_string())?;
    Ok(table
        .modes
        .iter()
        .flat_map(|m| {
            let p = f64::from(u8::from(m.kind == ModeKind::Propagating));
            [m.plus.re, m.plus.im, m.minus.re, m.minus.im, p]
        })
        .collect())
}

/// Per mode on the `+` side: reflection, `|β - ν|`, its bound (NaN where
/// the bound does not apply).
pub fn reflections(mach: f64, k: f64, sigma: f64, layer_len: f64, n_modes: usize) -> Result<Vec<f64>, String> {
    let cfg = duct(mach, k, layer_len)?;
    let profile = PmlProfile::quadratic(sigma, sigma, &cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(3 * n_modes);
    for n in 0..n_modes {
        let r = reflection_coefficient(n, Side::Plus, &profile, &cfg).map_err(|e| e.to_string())?;
        let g = dtn_gap_bound(n, Side::Plus, &profile, &cfg).map_err(|e| e.to_string())?;
        out.extend([r, g.measured, if g.applicable { g.bound } else { f64::NAN }]);
    }
    Ok(out)
}

/// `|p|` on an `nx1 × nx2` grid over `Ω^L` (row-major in `x2`) for unit boxes
/// in the propagating modes; the full PML problem shows the decay in the layer.
pub fn field(mach: f64, k: f64, sigma: f64, layer_len: f64, nx1: usize, nx2: usize) -> Result<Vec<f64>, String> {
    let err = |e: ductwave::Error| e.to_string();
    if nx1 < 2 || nx2 < 2 {
        return Err("need at least two samples per direction".into());
    }
    let cfg = duct(mach, k, layer_len)?;
    let profile = PmlProfile::quadratic(sigma, sigma, &cfg).map_err(err)?;
    // power-of-two cells so the layer is a whole number of them
    let spacing = (layer_len / 64.0).min(1.0 / (16.0 * k)).log2().floor().exp2();
    let inner = Grid1D::omega_b(&cfg, spacing).map_err(err)?;
    let grid = Grid1D::omega_l(&cfg, &inner).map_err(err)?;
    let source = propagating_source(&cfg);
    let sol = solve_full(Some(&source), None, &cfg, Some(&profile), Formulation::PmlFull, &grid, default_modes(&cfg))
        .map_err(err)?;
    let (a, b) = (grid.x_start(), grid.x_end());
    let mut points = Vec::with_capacity(nx1 * nx2);
    for j in 0..nx2 {
        let x2 = j as f64 / (nx2 - 1) as f64;
        for i in 0..nx1 {
            points.push([a + (b - a) * i as f64 / (nx1 - 1) as f64, x2]);
        }
    }
    Ok(assemble_field(&sol, &points).map_err(err)?.iter().map(|p| p.norm()).collect())
}

#[wasm_bindgen(js_name = dispersion)]
pub fn js_dispersion(mach: f64, k: f64, n_modes: usize) -> Result<Vec<f64>, JsError> {
    dispersion(mach, k, n_modes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = reflections)]
pub fn js_reflections(mach: f64, k: f64, sigma: f64, layer_len: f64, n_modes: usize) -> Result<Vec<f64>, JsError> {
    reflections(mach, k, sigma, layer_len, n_modes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = field)]
pub fn js_field(mach: f64, k: f64, sigma: f64, layer_len: f64, nx1: usize, nx2: usize) -> Result<Vec<f64>, JsError> {
    field(mach, k, sigma, layer_len, nx1, nx2).map_err(|e| JsError::new(&e))
}
