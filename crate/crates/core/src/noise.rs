//! Piecewise-constant discretized white noise on a nested dyadic mesh of the
//! forcing rectangle.
//!
//! Depth `j` splits the rectangle into `2^j × 2^j` congruent cells, stored
//! row-major (`i = row · 2^j + col`, rows along `x2`). Each finest-depth
//! draw comes from its own ChaCha stream keyed by the seed and the Morton
//! code of the cell, so a realization does not depend on evaluation order.
//! Coarser depths are obtained by aggregation, `ξ_parent = ½ Σ ξ_child`,
//! which is the same white-noise path integrated over the larger cell.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::duct::{mode_shape_integral, DuctConfig};
use crate::error::{Error, Result};
use crate::source::{AxialProfile, ModalSource};

/// Axis-aligned rectangle `[lo1, hi1) × [lo2, hi2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    lo1: f64,
    hi1: f64,
    lo2: f64,
    hi2: f64,
}

impl Rect {
    pub fn new(lo1: f64, hi1: f64, lo2: f64, hi2: f64) -> Result<Self> {
        let ok = [lo1, hi1, lo2, hi2].iter().all(|v| v.is_finite()) && hi1 > lo1 && hi2 > lo2;
        if !ok {
            return Err(Error::Domain(format!(
                "degenerate rectangle [{lo1}, {hi1}) x [{lo2}, {hi2})"
            )));
        }
        Ok(Rect { lo1, hi1, lo2, hi2 })
    }

    /// Centred rectangle covering the middle half of `Ω_b` in both directions.
    pub fn default_forcing(cfg: &DuctConfig) -> Self {
        let c = 0.5 * (cfg.x_minus() + cfg.x_plus());
        let w = 0.25 * (cfg.x_plus() - cfg.x_minus());
        Rect {
            lo1: c - w,
            hi1: c + w,
            lo2: 0.25 * cfg.d(),
            hi2: 0.75 * cfg.d(),
        }
    }

    pub fn lo1(&self) -> f64 {
        self.lo1
    }
    pub fn hi1(&self) -> f64 {
        self.hi1
    }
    pub fn lo2(&self) -> f64 {
        self.lo2
    }
    pub fn hi2(&self) -> f64 {
        self.hi2
    }

    pub fn area(&self) -> f64 {
        (self.hi1 - self.lo1) * (self.hi2 - self.lo2)
    }

    pub fn diameter(&self) -> f64 {
        (self.hi1 - self.lo1).hypot(self.hi2 - self.lo2)
    }

    /// Half-open containment.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] >= self.lo1 && x[0] < self.hi1 && x[1] >= self.lo2 && x[1] < self.hi2
    }
}

/// Nested dyadic meshes of a rectangle at depths
/// `finest_depth + 1 - levels ..= finest_depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMesh {
    rect: Rect,
    finest_depth: u32,
    levels: u32,
}

/// Mesh whose finest cells have diameter at most `finest_h`, with `levels`
/// depths available.
pub fn build_mesh(rect: Rect, finest_h: f64, levels: u32) -> Result<NoiseMesh> {
    Rect::new(rect.lo1, rect.hi1, rect.lo2, rect.hi2)?;
    if !(finest_h > 0.0) {
        return Err(Error::Domain(format!("finest_h must be positive, got {finest_h}")));
    }
    if levels == 0 {
        return Err(Error::Domain("a noise mesh needs at least one level".into()));
    }
    let ratio = rect.diameter() / finest_h;
    let mut depth = 0u32;
    while (rect.diameter() / (1u64 << depth) as f64) > finest_h * (1.0 + 1e-12) {
        depth += 1;
        if depth > 24 {
            return Err(Error::Domain(format!("finest_h {finest_h} too small (ratio {ratio:e})")));
        }
    }
    if depth + 1 < levels {
        return Err(Error::Domain(format!(
            "{levels} levels requested but finest depth is {depth}"
        )));
    }
    Ok(NoiseMesh {
        rect,
        finest_depth: depth,
        levels,
    })
}

impl NoiseMesh {
    /// Mesh with an explicit finest depth.
    pub fn with_depth(rect: Rect, finest_depth: u32, levels: u32) -> Result<Self> {
        let h = rect.diameter() / (1u64 << finest_depth) as f64;
        build_mesh(rect, h, levels)
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn finest_depth(&self) -> u32 {
        self.finest_depth
    }

    pub fn coarsest_depth(&self) -> u32 {
        self.finest_depth + 1 - self.levels
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn check_depth(&self, depth: u32) -> Result<()> {
        if depth < self.coarsest_depth() || depth > self.finest_depth {
            return Err(Error::Level(format!(
                "depth {depth} outside [{}, {}]",
                self.coarsest_depth(),
                self.finest_depth
            )));
        }
        Ok(())
    }

    pub fn cells_per_side(&self, depth: u32) -> usize {
        1usize << depth
    }

    pub fn cell_count(&self, depth: u32) -> usize {
        1usize << (2 * depth)
    }

    /// `(axial width, transverse height)` of one cell.
    pub fn cell_size(&self, depth: u32) -> (f64, f64) {
        let s = (1u64 << depth) as f64;
        ((self.rect.hi1 - self.rect.lo1) / s, (self.rect.hi2 - self.rect.lo2) / s)
    }

    pub fn cell_area(&self, depth: u32) -> f64 {
        self.rect.area() / self.cell_count(depth) as f64
    }

    /// Cell diameter `h` at a depth.
    pub fn cell_diameter(&self, depth: u32) -> f64 {
        self.rect.diameter() / (1u64 << depth) as f64
    }

    pub fn cell_rect(&self, depth: u32, i: usize) -> Rect {
        let side = self.cells_per_side(depth);
        let (w1, w2) = self.cell_size(depth);
        let (row, col) = (i / side, i % side);
        Rect {
            lo1: self.rect.lo1 + w1 * col as f64,
            hi1: self.rect.lo1 + w1 * (col + 1) as f64,
            lo2: self.rect.lo2 + w2 * row as f64,
            hi2: self.rect.lo2 + w2 * (row + 1) as f64,
        }
    }

    /// Index of the half-open cell containing `x`.
    pub fn locate(&self, depth: u32, x: [f64; 2]) -> Option<usize> {
        if !self.rect.contains(x) {
            return None;
        }
        let side = self.cells_per_side(depth);
        let (w1, w2) = self.cell_size(depth);
        let col = (((x[0] - self.rect.lo1) / w1) as usize).min(side - 1);
        let row = (((x[1] - self.rect.lo2) / w2) as usize).min(side - 1);
        Some(row * side + col)
    }
}

/// Interleaves the bits of `col` (even positions) and `row` (odd positions).
pub fn morton(col: u32, row: u32) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut x = v as u64;
        x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
        x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
        x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
        x = (x | (x << 2)) & 0x3333_3333_3333_3333;
        x = (x | (x << 1)) & 0x5555_5555_5555_5555;
        x
    }
    spread(col) | (spread(row) << 1)
}

/// Noise coefficients `ξ_i` at one depth of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    mesh: NoiseMesh,
    depth: u32,
    xi: Vec<f64>,
    seed: u64,
}

/// Draws the finest-depth coefficients for `seed`.
pub fn sample(mesh: &NoiseMesh, seed: u64) -> NoiseRealization {
    let depth = mesh.finest_depth;
    let side = mesh.cells_per_side(depth);
    let xi = (0..side * side)
        .map(|i| {
            let (row, col) = (i / side, i % side);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((depth as u64) << 56) | morton(col as u32, row as u32));
            StandardNormal.sample(&mut rng)
        })
        .collect();
    NoiseRealization {
        mesh: *mesh,
        depth,
        xi,
        seed,
    }
}

/// One level coarser: `ξ_parent = ½ Σ ξ_child`.
pub fn coarsen(r: &NoiseRealization) -> Result<NoiseRealization> {
    if r.depth <= r.mesh.coarsest_depth() {
        return Err(Error::Level(format!("depth {} is already the coarsest", r.depth)));
    }
    let fine = r.mesh.cells_per_side(r.depth);
    let side = fine / 2;
    let mut xi = vec![0.0; side * side];
    for (i, x) in xi.iter_mut().enumerate() {
        let (row, col) = (i / side, i % side);
        let a = 2 * row * fine + 2 * col;
        *x = 0.5 * ((r.xi[a] + r.xi[a + 1]) + (r.xi[a + fine] + r.xi[a + fine + 1]));
    }
    Ok(NoiseRealization {
        mesh: r.mesh,
        depth: r.depth - 1,
        xi,
        seed: r.seed,
    })
}

/// Repeated [`coarsen`] down to `depth`.
pub fn coarsen_to(r: &NoiseRealization, depth: u32) -> Result<NoiseRealization> {
    r.mesh.check_depth(depth)?;
    if depth > r.depth {
        return Err(Error::Level(format!("cannot refine depth {} to {depth}", r.depth)));
    }
    let mut cur = r.clone();
    while cur.depth > depth {
        cur = coarsen(&cur)?;
    }
    Ok(cur)
}

/// `Ẇʰ(x) = ξ_i / sqrt(|K_i|)` on the cell containing `x`, 0 outside.
pub fn evaluate_wh(r: &NoiseRealization, x: [f64; 2]) -> f64 {
    match r.mesh.locate(r.depth, x) {
        Some(i) => r.xi[i] / r.mesh.cell_area(r.depth).sqrt(),
        None => 0.0,
    }
}

impl NoiseRealization {
    pub fn mesh(&self) -> &NoiseMesh {
        &self.mesh
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same mesh and depth with explicit coefficients.
    pub fn from_values(mesh: &NoiseMesh, depth: u32, xi: Vec<f64>, seed: u64) -> Result<Self> {
        mesh.check_depth(depth)?;
        if xi.len() != mesh.cell_count(depth) {
            return Err(Error::Contract(format!(
                "{} coefficients for {} cells",
                xi.len(),
                mesh.cell_count(depth)
            )));
        }
        Ok(NoiseRealization {
            mesh: *mesh,
            depth,
            xi,
            seed,
        })
    }

    /// Every coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.xi.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// Transverse projection onto mode `n`: a piecewise-constant axial profile
    /// with value `Σ_rows ξ/sqrt|K| ∫ φ_n dx2` on each cell column.
    pub fn modal_profile(&self, n: usize, d: f64) -> AxialProfile {
        let side = self.mesh.cells_per_side(self.depth);
        let rect = self.mesh.rect;
        let (w1, w2) = self.mesh.cell_size(self.depth);
        let scale = 1.0 / (w1 * w2).sqrt();
        let mut values = vec![Complex64::new(0.0, 0.0); side];
        for row in 0..side {
            let a = rect.lo2 + w2 * row as f64;
            let t = mode_shape_integral(n, a, a + w2, d) * scale;
            for (col, v) in values.iter_mut().enumerate() {
                v.re += t * self.xi[row * side + col];
            }
        }
        let edges = (0..=side).map(|c| rect.lo1 + w1 * c as f64).collect();
        AxialProfile::Segments { edges, values }
    }

    /// CSV: `cell,x1_lo,x1_hi,x2_lo,x2_hi,xi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "cell,x1_lo,x1_hi,x2_lo,x2_hi,xi")?;
        for (i, x) in self.xi.iter().enumerate() {
            let c = self.mesh.cell_rect(self.depth, i);
            writeln!(
                w,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c.lo1, c.hi1, c.lo2, c.hi2, x
            )?;
        }
        Ok(())
    }
}

/// Axial coefficient functions `f_n` of a deterministic modal source plus
/// an optional noise realization.
pub fn modal_source_coefficients(
    source: Option<&ModalSource>,
    noise: Option<&NoiseRealization>,
    n: usize,
    cfg: &DuctConfig,
) -> Vec<AxialProfile> {
    let mut out: Vec<AxialProfile> = source.map(|s| s.profiles(n).to_vec()).unwrap_or_default();
    if let Some(r) = noise {
        out.push(r.modal_profile(n, cfg.d()));
    }
    out
}
