use std::path::PathBuf;
use std::time::Instant;

use bse_core::assembly::{assemble_basic, interpolate_bulk, interpolate_surface, BasicForms, CoupledField, CoupledOperator, ProblemParams};
use bse_core::eigen::{
    eig_fourth, eig_second, minimax_check, norm_equivalence_constants, poincare_constant, ConstrainedSpace, EigenOptions,
    EigenResult,
};
use bse_core::expr::parse;
use bse_core::mesh::{generate_disk, generate_square, measures, read_mesh, refine_uniform, Mesh};
use bse_core::oracle::{disk_eigs_second, expand_multiplicities, manufactured_second};
use bse_core::solver::{inner_ka, norm_h0, norm_ka, solve_fourth, solve_second, SolveReport, SolveSettings};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::{Format, Geometry, RunConfig, Task};
use crate::output::{write_file, Cell, Table};
use crate::{eoc, CliError};

const MINIMAX_TRIALS: usize = 30;
const NORM_SAMPLES: usize = 100;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Overrides `output.dir` of the configuration.
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: None,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Artifacts {
    dir: PathBuf,
    csv: bool,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        if self.csv {
            let p = self.dir.join(name);
            t.write(&p)?;
            self.files.push(p);
        }
        Ok(())
    }
}

pub fn build_mesh(geometry: &Geometry) -> Result<Mesh, CliError> {
    let mesh = match geometry {
        Geometry::Disk { n_boundary, refine } => generate_disk(*n_boundary, *refine)?,
        Geometry::Square { n_per_side, refine } => refine_times(generate_square(*n_per_side)?, *refine)?,
        Geometry::File { path, refine } => refine_times(read_mesh(path)?, *refine)?,
    };
    Ok(mesh)
}

fn refine_times(mut mesh: Mesh, refine: usize) -> Result<Mesh, CliError> {
    for _ in 0..refine {
        mesh = refine_uniform(&mesh, None)?;
    }
    Ok(mesh)
}

fn problem_params(cfg: &RunConfig) -> Result<ProblemParams, CliError> {
    let p = cfg.params;
    Ok(ProblemParams::new(p.k, p.l, p.alpha, p.beta, p.gamma)?)
}

fn params_json(p: &ProblemParams) -> Value {
    json!({ "K": p.k, "L": p.l, "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma })
}

fn mesh_json(mesh: &Mesh) -> Value {
    let m = measures(mesh);
    json!({
        "vertices": mesh.n_vertices(),
        "triangles": mesh.triangles().len(),
        "surface_nodes": mesh.n_surface(),
        "h": mesh.max_edge_length(),
        "area": m.area,
        "perimeter": m.perimeter,
    })
}

/// Runs one configured task and writes its artifacts.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    if opts.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    if opts.threads > 1 {
        info!("kernels run sequentially, --threads {} has no effect", opts.threads);
    }
    let start = Instant::now();
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Output {
        path: dir.clone(),
        source,
    })?;
    let mut art = Artifacts {
        dir: dir.clone(),
        csv: cfg.output.formats.contains(&Format::Csv),
        files: Vec::new(),
    };
    info!("task {} writing to {}", cfg.task.name(), dir.display());

    let mut summary = Map::new();
    summary.insert("task".into(), json!(cfg.task.name()));
    summary.insert("seed".into(), json!(opts.seed));
    let params = problem_params(cfg)?;
    summary.insert("params".into(), params_json(&params));

    let result = match cfg.task {
        Task::Convergence => convergence(cfg, &params, &mut art)?,
        task => {
            let t0 = Instant::now();
            let mesh = build_mesh(&cfg.geometry)?;
            let forms = assemble_basic(&mesh);
            summary.insert("mesh".into(), mesh_json(&mesh));
            let assembly_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let mut r = match task {
                Task::Solve2 | Task::Solve4 => solve(cfg, task, &params, &mesh, &forms, &mut art)?,
                Task::Eig2 | Task::Eig4 => eigen(cfg, task, &params, &forms, opts.seed, &mut art)?,
                Task::Oracle => oracle(cfg, &params, &forms, &mut art)?,
                Task::Poincare => poincare(&params, &forms, opts.seed)?,
                Task::Convergence => unreachable!(),
            };
            r.insert("timings".into(), json!({ "assembly_s": assembly_s, "task_s": t1.elapsed().as_secs_f64() }));
            r
        }
    };
    summary.extend(result);
    summary.insert("total_s".into(), json!(start.elapsed().as_secs_f64()));
    let summary = Value::Object(summary);
    if cfg.output.formats.contains(&Format::Json) {
        let p = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        write_file(&p, &text)?;
        art.files.push(p);
    }
    Ok(RunOutcome {
        dir,
        files: art.files,
        summary,
    })
}

fn sources(cfg: &RunConfig, mesh: &Mesh) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let f = parse(&cfg.sources.f)?;
    let g = parse(&cfg.sources.g)?;
    Ok((interpolate_bulk(mesh, &f)?, interpolate_surface(mesh, &g)?))
}

fn field_tables(mesh: &Mesh, x: &CoupledField, names: (&str, &str)) -> (Table, Table) {
    let mut bulk = Table::new(&["node", "x", "y", names.0]);
    for (i, (p, u)) in mesh.vertices().iter().zip(&x.u).enumerate() {
        bulk.row(&[Cell::Int(i), Cell::Float(p[0]), Cell::Float(p[1]), Cell::Float(*u)]);
    }
    let mut surf = Table::new(&["s", names.1]);
    for (s, v) in mesh.surface_arclength().iter().zip(&x.v) {
        surf.row(&[Cell::Float(*s), Cell::Float(*v)]);
    }
    (bulk, surf)
}

fn report_json(r: &SolveReport) -> Value {
    json!({
        "iterations": r.iterations,
        "residual": r.residual,
        "defects": {
            "compat": r.defect_compat,
            "compat_projected": r.defect_compat_projected,
            "mean": r.defect_mean,
        },
    })
}

fn solve(
    cfg: &RunConfig,
    task: Task,
    params: &ProblemParams,
    mesh: &Mesh,
    forms: &BasicForms,
    art: &mut Artifacts,
) -> Result<Map<String, Value>, CliError> {
    let (f, g) = sources(cfg, mesh)?;
    let settings = SolveSettings {
        strict: cfg.sources.strict_compat,
        ..Default::default()
    };
    let report = if task == Task::Solve2 {
        solve_second(forms, params, &f, &g, &settings)?
    } else {
        solve_fourth(forms, params, &f, &g, &settings)?
    };
    let (bulk, surf) = field_tables(mesh, &report.field, ("u", "v"));
    art.table("solution.csv", &bulk)?;
    art.table("surface.csv", &surf)?;
    let mut out = Map::new();
    if let Value::Object(m) = report_json(&report) {
        out.extend(m);
    }
    out.insert("strict_compat".into(), json!(settings.strict));
    out.insert(
        "norms".into(),
        json!({ "h0": norm_h0(forms, &report.field)?, "energy": norm_ka(forms, params, &report.field)? }),
    );
    if let Some(mid) = &report.intermediate {
        let (bulk, surf) = field_tables(mesh, mid, ("mu", "nu"));
        art.table("intermediate.csv", &bulk)?;
        art.table("intermediate_surface.csv", &surf)?;
    }
    Ok(out)
}

fn surface_fraction(forms: &BasicForms, x: &CoupledField) -> Result<f64, CliError> {
    let v = forms.m_surf.bilinear(&x.v, &x.v)?;
    Ok(v / (v + forms.m_bulk.bilinear(&x.u, &x.u)?))
}

fn eigen_table(r: &EigenResult) -> Table {
    let mut t = Table::new(&["index", "lambda", "residual", "multiplicity"]);
    for i in 0..r.eigenvalues.len() {
        t.row(&[
            Cell::Int(i + 1),
            Cell::Float(r.eigenvalues[i]),
            Cell::Float(r.residuals[i]),
            Cell::Int(r.multiplicities[i]),
        ]);
    }
    t
}

fn eigen(
    cfg: &RunConfig,
    task: Task,
    params: &ProblemParams,
    forms: &BasicForms,
    seed: u64,
    art: &mut Artifacts,
) -> Result<Map<String, Value>, CliError> {
    let opts = EigenOptions {
        multiplet_tol: cfg.eig.tol,
    };
    let (r, mean) = if task == Task::Eig2 {
        (eig_second(forms, params, cfg.eig.k, &opts)?, params.alpha)
    } else {
        (eig_fourth(forms, params, cfg.eig.k, &opts)?, params.beta)
    };
    art.table("eigenvalues.csv", &eigen_table(&r))?;
    let op = CoupledOperator::new(forms, params.k, params.alpha, mean, params.gamma)?;
    let mean_defect = r.fields.iter().map(|x| op.mean_defect(&x.stacked()).abs()).fold(0.0, f64::max);
    let fractions = r.fields.iter().map(|x| surface_fraction(forms, x)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Map::new();
    out.insert("eigenvalues".into(), json!(r.eigenvalues));
    out.insert("multiplicities".into(), json!(r.multiplicities));
    out.insert("surface_fraction".into(), json!(fractions));
    out.insert("max_residual".into(), json!(r.residuals.iter().cloned().fold(0.0, f64::max)));
    out.insert("gram_defect".into(), json!(r.gram_defect));
    out.insert("defects".into(), json!({ "mean": mean_defect }));
    if r.eigenvalues.len() >= 2 {
        let mm = minimax_check(&r, MINIMAX_TRIALS, seed);
        out.insert("minimax".into(), json!({ "max_violation": mm.max_violation, "max_identity_error": mm.max_identity_error }));
    }
    Ok(out)
}

fn oracle(cfg: &RunConfig, params: &ProblemParams, forms: &BasicForms, art: &mut Artifacts) -> Result<Map<String, Value>, CliError> {
    let roots = disk_eigs_second(params.k, params.alpha, params.gamma, cfg.oracle.m_max, cfg.oracle.lambda_max)?;
    art.table("roots.csv", &roots_table(&roots))?;
    let mut out = Map::new();
    out.insert("roots".into(), json!(roots.len()));
    let expected = expand_multiplicities(&roots);
    if !matches!(cfg.geometry, Geometry::Disk { .. }) {
        warn!("the dispersion oracle describes the unit disk; skipping the finite element comparison");
        return Ok(out);
    }
    let op = CoupledOperator::new(forms, params.k, params.alpha, params.alpha, params.gamma)?;
    let dim = ConstrainedSpace::for_operator(&op)?.dim();
    let k = expected.len().min(dim);
    if k == 0 {
        return Ok(out);
    }
    let fem = eig_second(forms, params, k, &EigenOptions { multiplet_tol: cfg.eig.tol })?;
    let mut t = Table::new(&["index", "lambda_oracle", "lambda_fem", "rel_error"]);
    let mut worst = 0.0f64;
    for (i, (o, h)) in expected.iter().zip(&fem.eigenvalues).enumerate() {
        let rel = (h - o).abs() / o;
        worst = worst.max(rel);
        t.row(&[Cell::Int(i + 1), Cell::Float(*o), Cell::Float(*h), Cell::Float(rel)]);
    }
    art.table("comparison.csv", &t)?;
    out.insert("max_rel_error".into(), json!(worst));
    Ok(out)
}

pub(crate) fn roots_table(roots: &[bse_core::oracle::DispersionRoot]) -> Table {
    let mut t = Table::new(&["m", "lambda", "multiplicity", "residual"]);
    for r in roots {
        t.row(&[Cell::Int(r.m), Cell::Float(r.lambda), Cell::Int(r.multiplicity), Cell::Float(r.residual)]);
    }
    t
}

fn poincare(params: &ProblemParams, forms: &BasicForms, seed: u64) -> Result<Map<String, Value>, CliError> {
    let cp = poincare_constant(forms, params)?;
    let ne = norm_equivalence_constants(forms, params)?;
    let op = CoupledOperator::new(forms, params.k, params.alpha, params.beta, params.gamma)?;
    let space = ConstrainedSpace::for_operator(&op)?;
    let h1 = forms.h1_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s_p, mut s_a, mut s_b) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..NORM_SAMPLES {
        let x = space.random_field(&mut rng, forms.n_bulk())?;
        let ka = inner_ka(forms, params, &x, &x)?.max(0.0).sqrt();
        let n1 = h1.bilinear(&x.stacked(), &x.stacked())?.sqrt();
        let n0 = norm_h0(forms, &x)?;
        s_p = s_p.min((cp.constant * ka - n0) / n0);
        s_a = s_a.min((ne.a_h * ka - n1) / n1);
        s_b = s_b.min((ne.b_h * n1 - ka) / ka);
    }
    let mut out = Map::new();
    out.insert("poincare".into(), json!({ "c_p": cp.constant, "lambda_min": cp.lambda_min }));
    out.insert(
        "norm_equivalence".into(),
        json!({ "a_h": ne.a_h, "b_h": ne.b_h, "lambda_min": ne.lambda_min, "lambda_max": ne.lambda_max }),
    );
    out.insert(
        "sampled_relative_slack".into(),
        json!({ "samples": NORM_SAMPLES, "poincare": s_p, "upper": s_a, "lower": s_b }),
    );
    Ok(out)
}

/// Errors of the manufactured solution over refinement levels `0..=refine`.
fn convergence(cfg: &RunConfig, params: &ProblemParams, art: &mut Artifacts) -> Result<Map<String, Value>, CliError> {
    let Geometry::Disk { n_boundary, refine } = cfg.geometry else {
        return Err(CliError::Config("the convergence task needs a disk geometry".into()));
    };
    if refine < 1 {
        return Err(CliError::Config("the convergence task needs geometry.refine >= 1".into()));
    }
    let ms = manufactured_second(params.k, params.alpha, params.beta)?;
    if !cfg.sources.strict_compat || cfg.sources.f != "0" || cfg.sources.g != "0" {
        info!("the convergence task uses manufactured sources and ignores the configured ones");
    }
    // the continuum sources are compatible, their interpolants only up to O(h²)
    let settings = SolveSettings::projecting();
    let (mut hs, mut e0, mut e1, mut levels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in 0..=refine {
        let mesh = generate_disk(n_boundary, r)?;
        let forms = assemble_basic(&mesh);
        let f = interpolate_bulk(&mesh, &ms.f)?;
        let g = interpolate_surface(&mesh, &ms.g)?;
        let rep = solve_second(&forms, params, &f, &g, &settings)?;
        let exact = CoupledField::new(interpolate_bulk(&mesh, &ms.u)?, vec![ms.v; mesh.n_surface()]);
        let err = rep.field.add_scaled(-1.0, &exact);
        hs.push(mesh.max_edge_length());
        e0.push(norm_h0(&forms, &err)?);
        e1.push(norm_ka(&forms, params, &err)?);
        let mut level = report_json(&rep);
        level["refine"] = json!(r);
        level["mesh"] = mesh_json(&mesh);
        levels.push(level);
        info!("refine {r}: h = {:e}, L2 error {:e}, energy error {:e}", hs[r], e0[r], e1[r]);
    }
    let eoc0 = eoc(&e0, &hs)?;
    let eoc1 = eoc(&e1, &hs)?;
    let mut t = Table::new(&["h", "error_L2", "error_energy", "eoc_L2", "eoc_energy"]);
    for i in 0..hs.len() {
        let rate = |v: &[f64]| if i == 0 { Cell::Empty } else { Cell::Float(v[i - 1]) };
        t.row(&[Cell::Float(hs[i]), Cell::Float(e0[i]), Cell::Float(e1[i]), rate(&eoc0), rate(&eoc1)]);
    }
    art.table("convergence.csv", &t)?;
    let mut out = Map::new();
    out.insert("manufactured".into(), json!({ "u": ms.u.to_string(), "v": ms.v, "f": ms.f.to_string(), "g": ms.g.to_string() }));
    out.insert("levels".into(), Value::Array(levels));
    out.insert("h".into(), json!(hs));
    out.insert("error_L2".into(), json!(e0));
    out.insert("error_energy".into(), json!(e1));
    out.insert("eoc_L2".into(), json!(eoc0));
    out.insert("eoc_energy".into(), json!(eoc1));
    Ok(out)
}
