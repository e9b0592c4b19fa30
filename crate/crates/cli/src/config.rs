//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [duct]
//! d = 1
//! M = 0.3
//! k = 5
//!
//! [pml]
//! sigma_plus = 5
//! L = 2
//! ```
//!
//! Sections are `[duct]`, `[pml]`, `[source]`, `[grid]` and `[run]`. Unknown
//! sections or keys, repeated keys and malformed values are rejected with
//! the offending line number. `#` starts a comment. Every omitted key gets
//! its default, so a parsed [`RunConfig`] is fully explicit and
//! [`RunConfig::to_text`] reproduces it exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use ductwave::duct::{cutoff_numbers, DuctConfig};
use ductwave::harness::propagating_source;
use ductwave::noise::{NoiseMesh, Rect};
use ductwave::pml::PmlProfile;
use ductwave::solver::{default_modes, default_spacing, Formulation, Grid1D};
use ductwave::source::{AxialProfile, ModalSource};
use ductwave::{Error, Result};

const SECTIONS: [&str; 5] = ["duct", "pml", "source", "grid", "run"];

#[derive(Debug, Clone, PartialEq)]
pub enum PmlShape {
    Quadratic,
    /// `(depth, sigma)` tables per side, both starting at `(0, 0)`.
    Tabulated { plus: Vec<(f64, f64)>, minus: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Unit boxes at the window centre in every propagating mode.
    Propagating,
    /// One unit-mass box in a single mode.
    Box,
    /// Discretized white noise over the forcing rectangle.
    Noise,
    None,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Propagating => "propagating",
            SourceKind::Box => "box",
            SourceKind::Noise => "noise",
            SourceKind::None => "none",
        }
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "propagating" => Ok(SourceKind::Propagating),
            "box" => Ok(SourceKind::Box),
            "noise" => Ok(SourceKind::Noise),
            "none" => Ok(SourceKind::None),
            _ => Err(format!("unknown source kind '{s}' (propagating, box, noise, none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmlSection {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub shape: PmlShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub mode: usize,
    pub center: f64,
    pub width: f64,
    /// `[lo1, hi1, lo2, hi2]` of the noise support.
    pub forcing: [f64; 4],
    /// Finest dyadic depth of the noise mesh.
    pub depth: u32,
    /// Source point for the Green's function output.
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub spacing: f64,
    pub n_modes: usize,
    pub formulation: Formulation,
    /// Output samples along and across the duct.
    pub nx1: usize,
    pub nx2: usize,
    pub n_images: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub base_seed: u64,
    pub samples: usize,
    /// Worker threads, 0 for the rayon default.
    pub threads: usize,
    pub out: PathBuf,
    pub depths: Vec<u32>,
    pub reference_depth: u32,
    pub layer_lens: Vec<f64>,
    /// Grid spacings of the equivalence check.
    pub spacings: Vec<f64>,
    /// Highest mode in the per-mode PML table.
    pub n_max: usize,
    pub write_modal: bool,
}

/// Validated, fully populated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub duct: DuctConfig,
    pub pml: PmlSection,
    pub source: SourceSection,
    pub grid: GridSection,
    pub run: RunSection,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Raw entries of one section keyed by name.
struct Section {
    header: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(self.header, |e| e.line)
    }

    fn get<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| parse_err(line, format!("{key} = '{v}' is not {what}"))),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_real(&v).map(Some).map_err(|m| parse_err(line, format!("{key}: {m}"))),
        }
    }

    fn reals(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| parse_real(s.trim()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|m| parse_err(line, format!("{key}: {m}"))),
        }
    }

    fn pairs(&mut self, key: &str) -> Result<Option<Vec<(f64, f64)>>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let mut out = vec![];
                for item in v.split(',') {
                    let (a, b) = item
                        .split_once(':')
                        .ok_or_else(|| parse_err(line, format!("{key}: expected depth:sigma, got '{}'", item.trim())))?;
                    let a = parse_real(a.trim()).map_err(|m| parse_err(line, format!("{key}: {m}")))?;
                    let b = parse_real(b.trim()).map_err(|m| parse_err(line, format!("{key}: {m}")))?;
                    out.push((a, b));
                }
                Ok(Some(out))
            }
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Decimal number with optional sign, fraction and exponent; nothing else.
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - start
    };
    let mut n = digits(&mut i);
    if i < b.len() && b[i] == b'.' {
        i += 1;
        n += digits(&mut i);
    }
    let mut ok = n > 0;
    if ok && i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        ok = digits(&mut i) > 0;
    }
    match (ok && i == b.len()).then(|| s.parse::<f64>()) {
        Some(Ok(v)) if v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a decimal number")),
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, format!("malformed section header '{body}'")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(parse_err(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(parse_err(line, format!("section [{name}] repeated")));
            }
            sections.insert(
                name.to_string(),
                Section {
                    header: line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected key = value, got '{body}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_ref()
            .and_then(|c| sections.get_mut(c))
            .ok_or_else(|| parse_err(line, format!("key '{key}' outside any section")))?;
        if key.is_empty() || value.is_empty() {
            return Err(parse_err(line, format!("empty key or value in '{body}'")));
        }
        if section.entries.contains_key(key) {
            return Err(parse_err(line, format!("key '{key}' repeated")));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
                used: false,
            },
        );
    }
    for name in SECTIONS {
        sections.entry(name.to_string()).or_insert(Section {
            header: 0,
            entries: BTreeMap::new(),
        });
    }
    Ok(sections)
}

/// Value of a key that may sit in `[duct]` or `[pml]`; both must agree.
fn shared_real(duct: &mut Section, pml: &mut Section, key: &str) -> Result<(Option<f64>, usize)> {
    let a = duct.real(key)?;
    let b = pml.real(key)?;
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(parse_err(
            pml.line_of(key),
            format!("{key} = {y} in [pml] disagrees with {key} = {x} in [duct]"),
        )),
        (Some(x), _) => Ok((Some(x), duct.line_of(key))),
        (None, Some(y)) => Ok((Some(y), pml.line_of(key))),
        (None, None) => Ok((None, duct.header)),
    }
}

fn parse_duct(duct: &mut Section, pml: &mut Section) -> Result<DuctConfig> {
    let require = |s: &Section, key: &str| parse_err(s.header.max(1), format!("[duct] needs '{key}'"));
    let d = duct.real("d")?.ok_or_else(|| require(duct, "d"))?;
    let mach = duct.real("M")?.ok_or_else(|| require(duct, "M"))?;
    let c0 = duct.real("c0")?.unwrap_or(1.0);
    let k = duct.real("k")?;
    let omega = duct.real("omega")?;
    let (x_minus, lm) = shared_real(duct, pml, "x_minus")?;
    let (x_plus, lp) = shared_real(duct, pml, "x_plus")?;
    let (layer, ll) = shared_real(duct, pml, "L")?;
    let (x_minus, x_plus) = (x_minus.unwrap_or(-1.0), x_plus.unwrap_or(1.0));
    let layer = layer.ok_or_else(|| parse_err(pml.header.max(duct.header).max(1), "layer length 'L' is required"))?;
    let line = |key: &str| duct.line_of(key);

    if !(0.0..1.0).contains(&mach) {
        return Err(parse_err(line("M"), format!("M = {mach} violates 0 <= M < 1")));
    }
    if d <= 0.0 {
        return Err(parse_err(line("d"), format!("duct height d = {d} must be > 0")));
    }
    if c0 <= 0.0 {
        return Err(parse_err(line("c0"), format!("sound speed c0 = {c0} must be > 0")));
    }
    let (k, k_line) = match (k, omega) {
        (Some(k), Some(w)) => {
            if (w - k * c0).abs() > 1e-12 * w.abs().max(1.0) {
                return Err(parse_err(line("omega"), format!("omega = {w} differs from k c0 = {}", k * c0)));
            }
            (k, line("k"))
        }
        (Some(k), None) => (k, line("k")),
        (None, Some(w)) => (w / c0, line("omega")),
        (None, None) => return Err(require(duct, "k")),
    };
    if k <= 0.0 {
        return Err(parse_err(k_line, format!("wavenumber k = {k} must be > 0")));
    }
    if x_minus >= x_plus {
        return Err(parse_err(lp.max(lm), format!("x_minus = {x_minus} must be < x_plus = {x_plus}")));
    }
    if layer <= 0.0 {
        return Err(parse_err(ll, format!("layer length L = {layer} must be > 0")));
    }
    DuctConfig::with_sound_speed(d, mach, k, c0, x_minus, x_plus, layer).map_err(|e| parse_err(k_line, e.to_string()))
}

fn parse_pml(s: &mut Section, cfg: &DuctConfig) -> Result<PmlSection> {
    let sigma_plus = s.real("sigma_plus")?.unwrap_or(5.0);
    let sigma_minus = s.real("sigma_minus")?.unwrap_or(sigma_plus);
    let shape_line = s.line_of("shape");
    let shape = match s.take("shape").map(|v| v.1).as_deref().unwrap_or("quadratic") {
        "quadratic" => PmlShape::Quadratic,
        "tabulated" => {
            let plus = s.pairs("table_plus")?;
            let minus = s.pairs("table_minus")?;
            let plus = plus.ok_or_else(|| parse_err(shape_line, "tabulated shape needs table_plus"))?;
            let minus = minus.unwrap_or_else(|| plus.clone());
            PmlShape::Tabulated { plus, minus }
        }
        other => return Err(parse_err(shape_line, format!("unknown shape '{other}' (quadratic, tabulated)"))),
    };
    let out = PmlSection {
        sigma_plus,
        sigma_minus,
        shape,
    };
    out.profile(cfg).map_err(|e| parse_err(s.header.max(1), e.to_string()))?;
    Ok(out)
}

fn parse_source(s: &mut Section, cfg: &DuctConfig) -> Result<SourceSection> {
    let mid = 0.5 * (cfg.x_minus() + cfg.x_plus());
    let span = cfg.x_plus() - cfg.x_minus();
    let kind = s.get::<SourceKind>("kind", "a source kind (propagating, box, noise, none)")?;
    let f = Rect::default_forcing(cfg);
    let forcing_line = s.line_of("forcing");
    let forcing = match s.reals("forcing")? {
        None => [f.lo1(), f.hi1(), f.lo2(), f.hi2()],
        Some(v) => <[f64; 4]>::try_from(v).map_err(|_| parse_err(forcing_line, "forcing needs lo1, hi1, lo2, hi2"))?,
    };
    let y_line = s.line_of("y");
    let y = match s.reals("y")? {
        None => [mid, 0.4 * cfg.d()],
        Some(v) => <[f64; 2]>::try_from(v).map_err(|_| parse_err(y_line, "y needs two coordinates"))?,
    };
    let out = SourceSection {
        kind: kind.unwrap_or(SourceKind::Propagating),
        mode: s.get("mode", "a mode index")?.unwrap_or(0),
        center: s.real("center")?.unwrap_or(mid),
        width: s.real("width")?.unwrap_or(0.1 * span),
        forcing,
        depth: s.get("depth", "a depth")?.unwrap_or(5),
        y,
    };
    if out.width <= 0.0 {
        return Err(parse_err(s.line_of("width"), "width must be > 0"));
    }
    let r = Rect::new(forcing[0], forcing[1], forcing[2], forcing[3]).map_err(|e| parse_err(forcing_line, e.to_string()))?;
    let inside = r.lo1() >= cfg.x_minus() && r.hi1() <= cfg.x_plus() && r.lo2() >= 0.0 && r.hi2() <= cfg.d();
    if !inside {
        return Err(parse_err(forcing_line, "forcing rectangle must lie inside the computational window"));
    }
    if !(0.0..=cfg.d()).contains(&y[1]) {
        return Err(parse_err(y_line, format!("y2 = {} outside [0, d]", y[1])));
    }
    Ok(out)
}

fn parse_grid(s: &mut Section, cfg: &DuctConfig) -> Result<GridSection> {
    let formulation = s.get::<Formulation>("formulation", "a formulation (dtn, pml_full, pml_reduced)")?;
    let out = GridSection {
        spacing: s.real("spacing")?.unwrap_or_else(|| default_spacing(cfg)),
        n_modes: s.get("n_modes", "a mode count")?.unwrap_or_else(|| default_modes(cfg)),
        formulation: formulation.unwrap_or(Formulation::PmlReduced),
        nx1: s.get("nx1", "a sample count")?.unwrap_or(41),
        nx2: s.get("nx2", "a sample count")?.unwrap_or(21),
        n_images: s.get("n_images", "an image count")?.unwrap_or(512),
    };
    if out.spacing <= 0.0 {
        return Err(parse_err(s.line_of("spacing"), "spacing must be > 0"));
    }
    let (_, n0) = cutoff_numbers(cfg);
    if out.n_modes <= n0 {
        return Err(parse_err(
            s.line_of("n_modes"),
            format!("n_modes = {} must exceed the {} propagating modes", out.n_modes, n0 + 1),
        ));
    }
    let inner = Grid1D::omega_b(cfg, out.spacing).map_err(|e| parse_err(s.line_of("spacing"), e.to_string()))?;
    if out.formulation == Formulation::PmlFull {
        Grid1D::omega_l(cfg, &inner).map_err(|e| parse_err(s.line_of("spacing"), e.to_string()))?;
    }
    if out.nx1 < 2 || out.nx2 < 2 {
        return Err(parse_err(s.line_of(if out.nx1 < 2 { "nx1" } else { "nx2" }), "need at least 2 samples"));
    }
    Ok(out)
}

fn parse_run(s: &mut Section, cfg: &DuctConfig) -> Result<RunSection> {
    let list_u32 = |s: &mut Section, key: &str| -> Result<Option<Vec<u32>>> {
        match s.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| parse_err(line, format!("{key} = '{v}' is not a list of depths"))),
        }
    };
    let out = RunSection {
        base_seed: s.get("base_seed", "an unsigned integer")?.unwrap_or(1),
        samples: s.get("samples", "a sample count")?.unwrap_or(200),
        threads: s.get("threads", "a thread count")?.unwrap_or(0),
        out: s.take("out").map_or_else(|| PathBuf::from("./out"), |v| PathBuf::from(v.1)),
        depths: list_u32(s, "depths")?.unwrap_or_else(|| vec![3, 4, 5]),
        reference_depth: s.get("reference_depth", "a depth")?.unwrap_or(7),
        layer_lens: s.reals("layer_lens")?.unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0]),
        spacings: s.reals("spacings")?.unwrap_or_else(|| vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]),
        n_max: s.get("n_max", "a mode index")?.unwrap_or(cutoff_numbers(cfg).1 + 10),
        write_modal: s.get("write_modal", "true or false")?.unwrap_or(true),
    };
    if out.samples == 0 {
        return Err(parse_err(s.line_of("samples"), "samples must be >= 1"));
    }
    if out.depths.iter().any(|&d| d > out.reference_depth) {
        return Err(parse_err(s.line_of("depths"), "depths must not exceed reference_depth"));
    }
    if out.layer_lens.iter().chain(&out.spacings).any(|&v| v <= 0.0) {
        return Err(parse_err(s.line_of("layer_lens").max(s.line_of("spacings")), "lengths must be > 0"));
    }
    Ok(out)
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut sections = split_sections(text)?;
    let mut take = |name: &str| sections.remove(name).expect("all sections present");
    let (mut duct, mut pml, mut source, mut grid, mut run) = (take("duct"), take("pml"), take("source"), take("grid"), take("run"));
    let cfg = parse_duct(&mut duct, &mut pml)?;
    let out = RunConfig {
        pml: parse_pml(&mut pml, &cfg)?,
        source: parse_source(&mut source, &cfg)?,
        grid: parse_grid(&mut grid, &cfg)?,
        run: parse_run(&mut run, &cfg)?,
        duct: cfg,
    };
    for (name, s) in [("duct", &duct), ("pml", &pml), ("source", &source), ("grid", &grid), ("run", &run)] {
        if let Some((key, e)) = s.entries.iter().find(|(_, e)| !e.used) {
            return Err(parse_err(e.line, format!("unknown key '{key}' in [{name}]")));
        }
    }
    Ok(out)
}

impl PmlSection {
    pub fn profile(&self, cfg: &DuctConfig) -> Result<PmlProfile> {
        match &self.shape {
            PmlShape::Quadratic => PmlProfile::quadratic(self.sigma_plus, self.sigma_minus, cfg),
            PmlShape::Tabulated { plus, minus } => PmlProfile::tabulated(plus.clone(), minus.clone(), cfg),
        }
    }
}

impl RunConfig {
    pub fn profile(&self) -> Result<PmlProfile> {
        self.pml.profile(&self.duct)
    }

    /// Deterministic source; `None` for the noise and empty kinds.
    pub fn modal_source(&self) -> Option<ModalSource> {
        match self.source.kind {
            SourceKind::Propagating => Some(propagating_source(&self.duct)),
            SourceKind::Box => Some(ModalSource::single(
                self.source.mode,
                AxialProfile::normalized_box(self.source.center, self.source.width),
            )),
            SourceKind::Noise | SourceKind::None => None,
        }
    }

    pub fn forcing(&self) -> Result<Rect> {
        let f = self.source.forcing;
        Rect::new(f[0], f[1], f[2], f[3])
    }

    /// Noise mesh from depth 0 down to the configured depth.
    pub fn noise_mesh(&self) -> Result<NoiseMesh> {
        NoiseMesh::with_depth(self.forcing()?, self.source.depth, self.source.depth + 1)
    }

    /// Text that [`parse_config`] maps back to `self`.
    pub fn to_text(&self) -> String {
        let c = &self.duct;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let table = |v: &[(f64, f64)]| v.iter().map(|(a, b)| format!("{a:?}:{b:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "[duct]");
        for (k, v) in [
            ("d", c.d()),
            ("M", c.mach()),
            ("k", c.k()),
            ("c0", c.c0()),
            ("x_minus", c.x_minus()),
            ("x_plus", c.x_plus()),
            ("L", c.layer_len()),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "\n[pml]");
        let _ = writeln!(s, "sigma_plus = {:?}", self.pml.sigma_plus);
        let _ = writeln!(s, "sigma_minus = {:?}", self.pml.sigma_minus);
        match &self.pml.shape {
            PmlShape::Quadratic => {
                let _ = writeln!(s, "shape = quadratic");
            }
            PmlShape::Tabulated { plus, minus } => {
                let _ = writeln!(s, "shape = tabulated");
                let _ = writeln!(s, "table_plus = {}", table(plus));
                let _ = writeln!(s, "table_minus = {}", table(minus));
            }
        }
        let src = &self.source;
        let _ = writeln!(s, "\n[source]");
        let _ = writeln!(s, "kind = {}", src.kind.as_str());
        let _ = writeln!(s, "mode = {}", src.mode);
        let _ = writeln!(s, "center = {:?}", src.center);
        let _ = writeln!(s, "width = {:?}", src.width);
        let _ = writeln!(s, "forcing = {}", list(&src.forcing));
        let _ = writeln!(s, "depth = {}", src.depth);
        let _ = writeln!(s, "y = {}", list(&src.y));
        let g = &self.grid;
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "spacing = {:?}", g.spacing);
        let _ = writeln!(s, "n_modes = {}", g.n_modes);
        let _ = writeln!(s, "formulation = {}", g.formulation.as_str());
        let _ = writeln!(s, "nx1 = {}", g.nx1);
        let _ = writeln!(s, "nx2 = {}", g.nx2);
        let _ = writeln!(s, "n_images = {}", g.n_images);
        let r = &self.run;
        let depths: Vec<String> = r.depths.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "base_seed = {}", r.base_seed);
        let _ = writeln!(s, "samples = {}", r.samples);
        let _ = writeln!(s, "threads = {}", r.threads);
        let _ = writeln!(s, "out = {}", r.out.display());
        let _ = writeln!(s, "depths = {}", depths.join(", "));
        let _ = writeln!(s, "reference_depth = {}", r.reference_depth);
        let _ = writeln!(s, "layer_lens = {}", list(&r.layer_lens));
        let _ = writeln!(s, "spacings = {}", list(&r.spacings));
        let _ = writeln!(s, "n_max = {}", r.n_max);
        let _ = writeln!(s, "write_modal = {}", r.write_modal);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "[duct]\nd = 1\nM = 0.3\nk = 5\n\n[pml]\nsigma_plus = 5\nL = 2\n";

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.duct.layer_len(), 2.0);
        assert_eq!((c.duct.x_minus(), c.duct.x_plus()), (-1.0, 1.0));
        assert_eq!(c.pml.sigma_minus, 5.0);
        assert_eq!(c.pml.shape, PmlShape::Quadratic);
        assert_eq!(c.grid.n_modes, default_modes(&c.duct));
        assert_eq!(c.grid.spacing, default_spacing(&c.duct));
        assert_eq!(c.grid.formulation, Formulation::PmlReduced);
        assert_eq!(c.run.base_seed, 1);
        assert_eq!(c.run.out, PathBuf::from("./out"));
        assert_eq!(c.source.kind, SourceKind::Propagating);
    }

    #[test]
    fn mach_above_one_is_rejected() {
        let e = parse_config(&MINIMAL.replace("M = 0.3", "M = 1.2")).unwrap_err();
        assert!(e.to_string().contains("0 <= M < 1"), "{e}");
        assert_eq!(line_of(e), 3);
    }

    #[test]
    fn cutoff_resonance_is_rejected() {
        // k = sqrt(1 - 0.09) * 2π sits on the n = 2 cutoff
        let k = (1.0f64 - 0.09).sqrt() * 2.0 * std::f64::consts::PI;
        let e = parse_config(&MINIMAL.replace("k = 5", &format!("k = {k:?}"))).unwrap_err();
        assert!(e.to_string().contains("k != sqrt(1-M^2) n pi/d"), "{e}");
        assert_eq!(line_of(e), 4);
    }

    #[test]
    fn strictness() {
        let cases = [
            (format!("{MINIMAL}\n[run]\nseeds = 3\n"), 11),
            (format!("{MINIMAL}\n[extra]\n"), 10),
            (MINIMAL.replace("d = 1", "d = 1.0.0"), 2),
            (MINIMAL.replace("d = 1", "d = 0x10"), 2),
            (MINIMAL.replace("d = 1", "d = inf"), 2),
            (MINIMAL.replace("k = 5", "k = 5\nk = 6"), 5),
            (format!("x = 1\n{MINIMAL}"), 1),
            (format!("{MINIMAL}[run]\nwrite_modal = yes\n"), 10),
            (format!("{}[grid]\nformulation = pml_full\nspacing = 0.25\n", MINIMAL.replace("L = 2", "L = 0.3")), 11),
            (MINIMAL.replace("k = 5", "k = 5\nx_plus = 1").replace("L = 2", "L = 2\nx_plus = 2"), 10),
        ];
        for (text, line) in cases {
            let e = parse_config(&text).unwrap_err();
            assert_eq!(line_of(e.clone()), line, "{text}\n{e}");
        }
    }

    #[test]
    fn shared_keys_and_omega() {
        let c = parse_config(&MINIMAL.replace("k = 5", "omega = 10\nc0 = 2\nx_plus = 1.5")).unwrap();
        assert_eq!((c.duct.k(), c.duct.omega(), c.duct.x_plus()), (5.0, 10.0, 1.5));
        assert!(parse_config(&MINIMAL.replace("k = 5", "k = 5\nomega = 6")).is_err());
        let both = MINIMAL.replace("L = 2", "L = 2\nx_plus = 1");
        assert!(parse_config(&both.replace("[pml]", "x_plus = 1\n[pml]")).is_ok());
    }

    #[test]
    fn tabulated_round_trip() {
        let text = format!("{MINIMAL}shape = tabulated\ntable_plus = 0:0, 1:2, 2:8\n");
        let c = parse_config(&text).unwrap();
        assert!(matches!(c.pml.shape, PmlShape::Tabulated { ref minus, .. } if minus.len() == 3));
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        assert!(parse_config(&format!("{MINIMAL}shape = tabulated\ntable_plus = 0.5:0, 1:2\n")).is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# run\n[duct] # geometry\nd = 1 # height\nM = 0\nk = 5\nL = 1\n";
        assert_eq!(parse_config(text).unwrap().duct.mach(), 0.0);
    }

    #[test]
    fn parse_real_grammar() {
        for ok in ["1", "-2.5", "+.5", "3.", "1e-3", "2.5E+10"] {
            assert!(parse_real(ok).is_ok(), "{ok}");
        }
        for bad in ["", ".", "e5", "1e", "nan", "1_0", "--1", "1.5.2"] {
            assert!(parse_real(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(
            m in 0.0f64..0.95,
            k in 0.5f64..12.0,
            len in 0.1f64..4.0,
            sp in 0.0f64..50.0,
            sm in 0.0f64..50.0,
            seed in any::<u64>(),
            kind in 0usize..4,
        ) {
            let kinds = ["propagating", "box", "noise", "none"];
            let text = format!(
                "[duct]\nd = 1\nM = {m:?}\nk = {k:?}\nL = {len:?}\n[pml]\nsigma_plus = {sp:?}\nsigma_minus = {sm:?}\n\
                 [source]\nkind = {}\n[run]\nbase_seed = {seed}\n",
                kinds[kind]
            );
            // near-resonant draws are legitimately refused
            if let Ok(c) = parse_config(&text) {
                let again = parse_config(&c.to_text()).unwrap();
                prop_assert_eq!(again, c);
            }
        }
    }
}
