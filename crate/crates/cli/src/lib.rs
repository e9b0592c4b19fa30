//! Command line front end: configuration, subcommand dispatch and CSV output.
//!
//! Exit codes: 0 success, 2 configuration error (including bad arguments),
//! 3 numerical failure, 4 input/output failure.

pub mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use thiserror::Error;

use ductwave::duct::DispersionTable;
use ductwave::error::ErrorCategory;
use ductwave::greens::{greens, GreensEvalParams};
use ductwave::harness::{
    propagating_source, run_equivalence_check, run_h_study, run_l_study, run_total_error_study, HStudy, LStudy,
    TotalStudy,
};
use ductwave::noise::sample;
use ductwave::pml::{c2_constant, coercivity_constant, dtn_gap_bound, nu_coefficients, reflection_coefficient, Side};
use ductwave::solver::{assemble_field, l2_norm_omega_b, solve_full, Formulation, Grid1D};

pub use config::{parse_config, PmlShape, RunConfig, SourceKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(ductwave::Error),
    #[error("numerical: {0}")]
    Numerical(ductwave::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<ductwave::Error> for CliError {
    fn from(e: ductwave::Error) -> Self {
        match e.category() {
            ErrorCategory::Config => CliError::Config(e),
            ErrorCategory::Numerical => CliError::Numerical(e),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ductwave", version, about = "Convected Helmholtz duct solver with a modified PML")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory [default: ./out, or `out` from the config].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count, overriding the config.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Axial wavenumbers of every mode.
    Modes(Common),
    /// Green's function from the configured source point on a grid.
    Greens(Common),
    /// One white-noise realization.
    Noise(Common),
    /// Per-mode PML coefficients, reflections and gap bounds.
    Pml(Common),
    /// Field and modal solution for the configured source.
    Solve(Common),
    /// Convergence study.
    Study {
        #[arg(value_enum)]
        kind: StudyKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    H,
    #[value(name = "L")]
    L,
    Total,
    Equiv,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Modes(c) | Command::Greens(c) | Command::Noise(c) | Command::Pml(c) | Command::Solve(c) => c,
            Command::Study { common, .. } => common,
        }
    }
}

/// Loads the configuration named by the flags and applies the overrides.
pub fn load(common: &Common) -> Result<RunConfig> {
    let text = fs::read_to_string(&common.config).map_err(|source| CliError::Io {
        path: common.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text).map_err(CliError::Config)?;
    if let Some(s) = common.seed {
        cfg.run.base_seed = s;
    }
    if let Some(n) = common.samples {
        if n == 0 {
            return Err(CliError::Config(ductwave::Error::InvalidConfig("--samples must be >= 1".into())));
        }
        cfg.run.samples = n;
    }
    if let Some(t) = common.threads {
        cfg.run.threads = t;
    }
    if let Some(o) = &common.out {
        cfg.run.out = o.clone();
    }
    Ok(cfg)
}

/// Runs one parsed command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load(cli.command.common())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build()
        .map_err(|e| CliError::Config(ductwave::Error::InvalidConfig(format!("thread pool: {e}"))))?;
    let out = cfg.run.out.clone();
    fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    let mut files = vec![write_file(&out.join("run.cfg"), |w| w.write_all(cfg.to_text().as_bytes()))?];
    let written = pool.install(|| match &cli.command {
        Command::Modes(_) => modes(&cfg, &out),
        Command::Greens(_) => greens_grid(&cfg, &out),
        Command::Noise(_) => noise(&cfg, &out),
        Command::Pml(_) => pml(&cfg, &out),
        Command::Solve(_) => solve(&cfg, &out),
        Command::Study { kind, .. } => study(&cfg, *kind, &out),
    })?;
    files.extend(written);
    Ok(files)
}

/// Parses `argv`, runs it and reports; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_file<F>(path: &Path, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
    Ok(path.to_path_buf())
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn modes(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let table = DispersionTable::new(&cfg.duct, cfg.grid.n_modes)?;
    let f = write_file(&out.join("modes.csv"), |w| {
        writeln!(w, "n,re_beta_plus,im_beta_plus,re_beta_minus,im_beta_minus,kind")?;
        for (n, m) in table.modes.iter().enumerate() {
            writeln!(
                w,
                "{n},{},{},{},{},{}",
                sci(m.plus.re),
                sci(m.plus.im),
                sci(m.minus.re),
                sci(m.minus.im),
                m.kind.as_str()
            )?;
        }
        Ok(())
    })?;
    Ok(vec![f])
}

fn greens_grid(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let c = &cfg.duct;
    let params = GreensEvalParams {
        n_images: cfg.grid.n_images,
        ..GreensEvalParams::defaults(c)
    };
    params.validate(c)?;
    let y = cfg.source.y;
    let mut rows = vec![];
    for x1 in linspace(c.x_minus(), c.x_plus(), cfg.grid.nx1) {
        for x2 in linspace(0.0, c.d(), cfg.grid.nx2) {
            // the kernel is logarithmically singular at the source point
            if x1 == y[0] && x2 == y[1] {
                rows.push((x1, x2, Complex64::new(f64::NAN, f64::NAN), "singular"));
                continue;
            }
            let (g, rep) = greens([x1, x2], y, &params, c)?;
            rows.push((x1, x2, g, rep.as_str()));
        }
    }
    let f = write_file(&out.join("greens.csv"), |w| {
        writeln!(w, "x1,x2,re_g,im_g,representation_used")?;
        for (x1, x2, g, rep) in &rows {
            writeln!(w, "{},{},{},{},{rep}", sci(*x1), sci(*x2), sci(g.re), sci(g.im))?;
        }
        Ok(())
    })?;
    Ok(vec![f])
}

fn noise(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let r = sample(&cfg.noise_mesh()?, cfg.run.base_seed);
    Ok(vec![write_file(&out.join("noise.csv"), |w| r.write_csv(w))?])
}

fn pml(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let c = &cfg.duct;
    let profile = cfg.profile()?;
    let mut rows = vec![];
    for n in 0..=cfg.run.n_max {
        let nu = nu_coefficients(n, Side::Plus, &profile, c)?;
        let r = reflection_coefficient(n, Side::Plus, &profile, c)?;
        let g = dtn_gap_bound(n, Side::Plus, &profile, c)?;
        rows.push((n, nu, r, g));
    }
    let table = write_file(&out.join("pml.csv"), |w| {
        writeln!(w, "n,re_nu_plus,im_nu_plus,reflection,measured_gap,bound_gap,bound_applicable")?;
        for (n, nu, r, g) in &rows {
            writeln!(
                w,
                "{n},{},{},{},{},{},{}",
                sci(nu.re),
                sci(nu.im),
                sci(*r),
                sci(g.measured),
                sci(g.bound),
                g.applicable
            )?;
        }
        Ok(())
    })?;
    let summary = write_file(&out.join("pml_summary.txt"), |w| {
        writeln!(w, "c2={}", sci(c2_constant(c)))?;
        writeln!(w, "coercivity={}", sci(coercivity_constant(&profile, c)))?;
        writeln!(w, "all_bounds_applicable={}", rows.iter().all(|r| r.3.applicable))
    })?;
    Ok(vec![table, summary])
}

fn solve(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let c = &cfg.duct;
    let g = &cfg.grid;
    let source = cfg.modal_source();
    let noise = match cfg.source.kind {
        SourceKind::Noise => Some(sample(&cfg.noise_mesh()?, cfg.run.base_seed)),
        _ => None,
    };
    let inner = Grid1D::omega_b(c, g.spacing)?;
    let profile = match g.formulation {
        Formulation::Dtn => None,
        _ => Some(cfg.profile()?),
    };
    let grid = match g.formulation {
        Formulation::PmlFull => Grid1D::omega_l(c, &inner)?,
        _ => inner,
    };
    let sol = solve_full(source.as_ref(), noise.as_ref(), c, profile.as_ref(), g.formulation, &grid, g.n_modes)?;
    let window = match g.formulation {
        Formulation::PmlFull => sol.restrict_to_omega_b()?,
        _ => sol.clone(),
    };
    let points: Vec<[f64; 2]> = linspace(c.x_minus(), c.x_plus(), g.nx1)
        .into_iter()
        .flat_map(|x1| linspace(0.0, c.d(), g.nx2).into_iter().map(move |x2| [x1, x2]))
        .collect();
    let field = assemble_field(&window, &points)?;
    let norm = l2_norm_omega_b(&window)?;
    let mut files = vec![write_file(&out.join("field.csv"), |w| {
        writeln!(w, "x1,x2,re_p,im_p")?;
        for (x, p) in points.iter().zip(&field) {
            writeln!(w, "{},{},{},{}", sci(x[0]), sci(x[1]), sci(p.re), sci(p.im))?;
        }
        Ok(())
    })?];
    if cfg.run.write_modal {
        files.push(write_file(&out.join("modal.csv"), |w| {
            writeln!(w, "n,x1,re_pn,im_pn")?;
            let nodes = sol.grid.nodes();
            for (n, v) in sol.values.iter().enumerate() {
                for (x, p) in nodes.iter().zip(v) {
                    writeln!(w, "{n},{},{},{}", sci(*x), sci(p.re), sci(p.im))?;
                }
            }
            Ok(())
        })?);
    }
    files.push(write_file(&out.join("solve_summary.txt"), |w| {
        writeln!(w, "formulation={}", g.formulation.as_str())?;
        writeln!(w, "n_modes={}", sol.n_modes)?;
        writeln!(w, "spacing={}", sci(grid.spacing()))?;
        writeln!(w, "l2_norm={}", sci(norm))?;
        writeln!(w, "tail_bound={}", sci(sol.tail_bound))?;
        writeln!(w, "condition={}", sci(sol.condition))
    })?);
    Ok(files)
}

fn quadratic_only(cfg: &RunConfig) -> Result<()> {
    match cfg.pml.shape {
        PmlShape::Quadratic => Ok(()),
        PmlShape::Tabulated { .. } => Err(CliError::Config(ductwave::Error::InvalidConfig(
            "layer-length studies need the quadratic shape".into(),
        ))),
    }
}

fn h_study(cfg: &RunConfig) -> Result<HStudy> {
    Ok(HStudy {
        forcing: cfg.forcing()?,
        depths: cfg.run.depths.clone(),
        reference_depth: cfg.run.reference_depth,
        spacing: cfg.grid.spacing,
        n_modes: cfg.grid.n_modes,
        n_samples: cfg.run.samples,
        base_seed: cfg.run.base_seed,
    })
}

fn study(cfg: &RunConfig, kind: StudyKind, out: &Path) -> Result<Vec<PathBuf>> {
    let c = &cfg.duct;
    let name = match kind {
        StudyKind::H => "h",
        StudyKind::L => "L",
        StudyKind::Total => "total",
        StudyKind::Equiv => "equiv",
    };
    let csv = out.join(format!("study_{name}.csv"));
    let summary = out.join(format!("study_{name}_summary.txt"));
    let r = match kind {
        StudyKind::H => run_h_study(c, &h_study(cfg)?)?,
        StudyKind::L => {
            quadratic_only(cfg)?;
            let s = LStudy {
                sigma_plus: cfg.pml.sigma_plus,
                sigma_minus: cfg.pml.sigma_minus,
                layer_lens: cfg.run.layer_lens.clone(),
                source: cfg.modal_source().unwrap_or_else(|| propagating_source(c)),
                spacing: cfg.grid.spacing,
                n_modes: cfg.grid.n_modes,
                ..LStudy::new(c)
            };
            run_l_study(c, &s)?
        }
        StudyKind::Total => {
            quadratic_only(cfg)?;
            let s = TotalStudy {
                h: h_study(cfg)?,
                layer_lens: cfg.run.layer_lens.clone(),
                sigma_plus: cfg.pml.sigma_plus,
                sigma_minus: cfg.pml.sigma_minus,
            };
            let r = run_total_error_study(c, &s)?;
            let a = write_file(&csv, |w| r.write_csv(w))?;
            let b = write_file(&summary, |w| r.write_summary(w))?;
            return Ok(vec![a, b]);
        }
        StudyKind::Equiv => {
            let source = cfg.modal_source().unwrap_or_else(|| propagating_source(c));
            run_equivalence_check(c, &cfg.profile()?, &source, &cfg.run.spacings, cfg.grid.n_modes)?
        }
    };
    let a = write_file(&csv, |w| r.write_csv(w))?;
    let b = write_file(&summary, |w| r.write_summary(w))?;
    Ok(vec![a, b])
}
