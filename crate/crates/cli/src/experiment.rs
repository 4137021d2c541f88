//! Experiment construction and execution: translate a parsed config into
//! meshes, hierarchies, and solver runs, and collect per-cell results.

use crate::config::RawConfig;
use anyhow::{anyhow, bail, Result};
use hmg::agglomeration::{
    build_grid_hierarchy, build_seeded_hierarchy, build_structured_hierarchy,
    AgglomerationHierarchy,
};
use hmg::hybridized::{discretize, MethodConfig, Problem, Scheme, TauRule};
use hmg::krylov::{gmres, GmresOptions, SolveReport, SolveStatus};
use hmg::mesh::{build_structured_quad_mesh, build_structured_tri_mesh, import_tri_mesh, Mesh};
use hmg::multigrid::{MgHierarchy, MgOptions, Schedule};
use hmg::smoothers::SmootherKind;
use nalgebra::DVector;
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    /// Unit square, constant permeability, manufactured solution q = xy e^(x^2 y^3).
    Smooth,
    /// Imported triangle mesh with a seed-grown hierarchy.
    Unstructured,
    /// Smoothly varying permeability 1 + 0.5 sin(2 pi x) cos(3 pi y).
    VaryingKappa,
    /// Checkerboard permeability jumping between 1e6 and 1 at 0.56.
    Checkerboard,
    /// Mixed RT1 / NIPG-H assembly on a triangulated square.
    Multinumerics,
}

impl std::str::FromStr for ExampleId {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "example1" => ExampleId::Smooth,
            "example2" => ExampleId::Unstructured,
            "example3" => ExampleId::VaryingKappa,
            "example4" => ExampleId::Checkerboard,
            "example6" => ExampleId::Multinumerics,
            other => bail!("unknown example id `{other}`"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mg,
    GmresMg,
    Gmres,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mg => "mg",
            Mode::GmresMg => "gmres+mg",
            Mode::Gmres => "gmres",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mg" => Mode::Mg,
            "gmres+mg" => Mode::GmresMg,
            "gmres" => Mode::Gmres,
            other => bail!("unknown solver mode `{other}`"),
        })
    }
}

pub struct Experiment {
    pub example: ExampleId,
    pub scheme: Scheme,
    pub tau_rule: String,
    pub tau_scale: f64,
    pub p_list: Vec<usize>,
    pub levels_list: Vec<usize>,
    pub smoother: SmootherKind,
    pub schedule: Schedule,
    pub modes: Vec<Mode>,
    pub mesh_path: Option<std::path::PathBuf>,
    pub seeds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub p: usize,
    pub levels: usize,
    pub mode: Mode,
    pub report: SolveReport,
    pub seconds: f64,
}

impl Experiment {
    pub fn from_config(cfg: &RawConfig) -> Result<Experiment> {
        let example: ExampleId = cfg.require("problem.example")?.parse()?;
        let scheme: Scheme = cfg
            .get_or("method.scheme", "hdg")
            .parse()
            .map_err(|e| anyhow!("{e}"))?;
        let tau_rule = cfg.get_or("method.tau", "over_hmin");
        let tau_scale: f64 = cfg.get_or("method.tau_scale", "1.0").parse()?;
        // Validate the rule name once up front.
        tau_for(&tau_rule, tau_scale)?;
        let p_list: Vec<usize> = cfg.list("method.p")?;
        if p_list.iter().any(|&p| p == 0) {
            bail!("method.p entries must be >= 1");
        }
        let levels_list: Vec<usize> = cfg.list("solver.levels")?;
        if levels_list.iter().any(|&l| l < 2) {
            bail!("solver.levels entries must be >= 2");
        }
        let smoother = match cfg.get_or("solver.smoother", "block_jacobi").as_str() {
            "block_jacobi" => SmootherKind::BlockJacobi,
            "damped_jacobi" => SmootherKind::DampedJacobi,
            "sgs" => SmootherKind::SymmetricGaussSeidel,
            "chebyshev2" => SmootherKind::ChebyshevJacobi { degree: 2 },
            other => bail!("unknown solver.smoother `{other}`"),
        };
        let schedule = match cfg.get_or("solver.schedule", "doubling").as_str() {
            "doubling" => Schedule::Doubling,
            "constant-2" => Schedule::Constant(2),
            other => bail!("unknown solver.schedule `{other}`"),
        };
        let mut modes = Vec::new();
        for m in cfg.list::<String>("solver.mode")? {
            modes.push(m.parse::<Mode>()?);
        }
        if modes.is_empty() {
            modes = vec![Mode::Mg, Mode::GmresMg];
        }
        let mesh_path = cfg.get("problem.mesh").map(|p| cfg.resolve_path(p));
        let seeds = cfg.seeds("problem.seeds")?;
        if example == ExampleId::Unstructured {
            if mesh_path.is_none() {
                bail!("problem.mesh is required for example2");
            }
            if seeds.is_empty() {
                bail!("problem.seeds is required for example2");
            }
        }
        if let Some(p) = &mesh_path {
            if !p.exists() {
                bail!("mesh file {} does not exist", p.display());
            }
        }
        Ok(Experiment {
            example,
            scheme,
            tau_rule,
            tau_scale,
            p_list,
            levels_list,
            smoother,
            schedule,
            modes,
            mesh_path,
            seeds,
        })
    }

    pub fn build_mesh(&self, levels: usize) -> Result<Mesh> {
        let n = 1usize << levels;
        Ok(match self.example {
            ExampleId::Smooth | ExampleId::VaryingKappa | ExampleId::Checkerboard => {
                build_structured_quad_mesh(n)
            }
            ExampleId::Unstructured => import_tri_mesh(self.mesh_path.as_ref().unwrap())?,
            ExampleId::Multinumerics => {
                let mut mesh = build_structured_tri_mesh(n);
                tag_multinumerics(&mut mesh);
                mesh
            }
        })
    }

    pub fn build_hierarchy(&self, mesh: &Mesh, levels: usize) -> Result<AgglomerationHierarchy> {
        Ok(match self.example {
            ExampleId::Smooth | ExampleId::VaryingKappa | ExampleId::Checkerboard => {
                build_structured_hierarchy(mesh, levels)?
            }
            ExampleId::Unstructured => build_seeded_hierarchy(mesh, levels, &self.seeds)?,
            ExampleId::Multinumerics => build_grid_hierarchy(mesh, levels)?,
        })
    }

    pub fn build_problem(&self, levels: usize) -> Problem {
        match self.example {
            ExampleId::Smooth => manufactured_problem(),
            ExampleId::Unstructured => Problem {
                kappa: Box::new(|_| 1.0),
                source: Box::new(|_| 1.0),
                dirichlet: Box::new(|_| 0.0),
            },
            ExampleId::VaryingKappa => Problem {
                kappa: Box::new(|p| 1.0 + 0.5 * (2.0 * PI * p[0]).sin() * (3.0 * PI * p[1]).cos()),
                source: Box::new(|_| 1.0),
                dirichlet: Box::new(|_| 0.0),
            },
            ExampleId::Checkerboard => {
                let n = (1usize << levels) as f64;
                Problem {
                    kappa: Box::new(move |p| checkerboard_kappa(p, n)),
                    source: Box::new(|_| 1.0),
                    dirichlet: Box::new(|_| 0.0),
                }
            }
            ExampleId::Multinumerics => Problem {
                kappa: Box::new(|p| 1.0 + 0.5 * (4.0 * PI * p[0]).sin() * (3.0 * PI * p[1]).cos()),
                source: Box::new(|_| 1.0),
                dirichlet: Box::new(|_| 0.0),
            },
        }
    }

    pub fn method_config(&self, p: usize) -> Result<MethodConfig> {
        let mut cfg = MethodConfig::new(self.scheme, p, tau_for(&self.tau_rule, self.tau_scale)?);
        if self.example == ExampleId::Multinumerics {
            cfg.tag_schemes.push(("rt".into(), Scheme::RtH(1)));
        }
        Ok(cfg)
    }

    pub fn mg_options(&self, levels: usize) -> MgOptions {
        let _ = levels;
        MgOptions {
            smoother: self.smoother,
            schedule: self.schedule,
            ..MgOptions::default()
        }
    }

    /// Run the full sweep; rows are ordered (p, levels, mode).
    pub fn run(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        for &p in &self.p_list {
            for &levels in &self.levels_list {
                let start = Instant::now();
                let mesh = self.build_mesh(levels)?;
                let agg = self.build_hierarchy(&mesh, levels)?;
                let problem = self.build_problem(levels);
                let cfg = self.method_config(p)?;
                let disc = discretize(&mesh, &cfg, &problem)?;
                let mg = MgHierarchy::build(&mesh, &agg, &disc.system, self.mg_options(levels))?;
                let setup = start.elapsed().as_secs_f64();
                for &mode in &self.modes {
                    let t0 = Instant::now();
                    let report = run_mode(&mg, &disc.system.g, mode);
                    out.push(Cell {
                        p,
                        levels,
                        mode,
                        report,
                        seconds: setup + t0.elapsed().as_secs_f64(),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Convergence study on the manufactured solution; returns rows
    /// (p, levels, h, error, observed order vs previous level).
    pub fn run_convergence(&self) -> Result<Vec<(usize, usize, f64, f64, f64)>> {
        if self.example != ExampleId::Smooth {
            bail!("converge requires problem.example = example1 (manufactured solution)");
        }
        let exact = |p: [f64; 2]| p[0] * p[1] * (p[0] * p[0] * p[1].powi(3)).exp();
        let mut out = Vec::new();
        for &p in &self.p_list {
            let mut prev: Option<f64> = None;
            for &levels in &self.levels_list {
                let n = 1usize << levels;
                let mesh = self.build_mesh(levels)?;
                let agg = self.build_hierarchy(&mesh, levels)?;
                let problem = self.build_problem(levels);
                let cfg = self.method_config(p)?;
                let disc = discretize(&mesh, &cfg, &problem)?;
                let opts = MgOptions {
                    tol: 1e-11,
                    ..self.mg_options(levels)
                };
                let mg = MgHierarchy::build(&mesh, &agg, &disc.system, opts)?;
                let (lam, rep) = mg.solve(&disc.system.g);
                if rep.status != SolveStatus::Converged {
                    bail!("solver did not converge at p={p} levels={levels}");
                }
                let err = disc.q_l2_error(&lam, &exact);
                let order = prev.map(|e| (e / err).log2()).unwrap_or(f64::NAN);
                out.push((p, levels, 1.0 / n as f64, err, order));
                prev = Some(err);
            }
        }
        Ok(out)
    }
}

fn run_mode(mg: &MgHierarchy, g: &DVector<f64>, mode: Mode) -> SolveReport {
    match mode {
        Mode::Mg => mg.solve(g).1,
        Mode::GmresMg => {
            let a = mg.operator();
            let apply = |v: &DVector<f64>| a.matvec(v);
            let prec = |v: &DVector<f64>| mg.apply(v);
            gmres(&apply, g, Some(&prec), &GmresOptions::default()).1
        }
        Mode::Gmres => {
            let a = mg.operator();
            let apply = |v: &DVector<f64>| a.matvec(v);
            gmres(&apply, g, None, &GmresOptions::default()).1
        }
    }
}

fn tau_for(name: &str, scale: f64) -> Result<TauRule> {
    Ok(match name {
        "constant" => TauRule::Constant(scale),
        "over_hmin" => TauRule::OverHmin(scale),
        "poly_over_hmin" => TauRule::PolyOverHmin(scale),
        "kappa_over_hmin" => TauRule::KappaOverHmin(scale),
        "kappa_poly_over_hmin" => TauRule::KappaPolyOverHmin(scale),
        other => bail!("unknown method.tau `{other}`"),
    })
}

/// Permeability 1e6 inside the lower-left and upper-right blocks split at
/// 0.56, sampled cellwise on the n-by-n grid so every element carries one
/// value; on power-of-two grids the interface snaps to the nearest grid line.
fn checkerboard_kappa(p: [f64; 2], n: f64) -> f64 {
    let lo = 0.5625;
    let snap = |x: f64| ((x * n).floor().min(n - 1.0) + 0.5) / n;
    let (x, y) = (snap(p[0]), snap(p[1]));
    if (x < lo && y < lo) || (x > lo && y > lo) {
        1e6
    } else {
        1.0
    }
}

/// Checkerboard scheme mask on a 4x4 pattern: cells with even index sum use
/// hybridized RT1, the rest the configured base scheme.
fn tag_multinumerics(mesh: &mut Mesh) {
    for ei in 0..mesh.num_elements() {
        let c = mesh.elem_centroid(ei);
        let (i, j) = ((c[0] * 4.0).floor() as usize, (c[1] * 4.0).floor() as usize);
        if (i + j) % 2 == 0 {
            mesh.elements[ei].tag = Some("rt".into());
        }
    }
}

/// Manufactured problem with exact solution q = xy e^(x^2 y^3).
pub fn manufactured_problem() -> Problem {
    Problem::poisson(
        |p: [f64; 2]| {
            let (x, y) = (p[0], p[1]);
            let e = (x * x * y.powi(3)).exp();
            -(e * (6.0 * x * y.powi(4) + 4.0 * x.powi(3) * y.powi(7))
                + e * (12.0 * x.powi(3) * y.powi(2) + 9.0 * x.powi(5) * y.powi(5)))
        },
        |p: [f64; 2]| p[0] * p[1] * (p[0] * p[0] * p[1].powi(3)).exp(),
    )
}
