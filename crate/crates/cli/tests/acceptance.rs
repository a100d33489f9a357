//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if
//! any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bse_cli::eoc;
use bse_core::assembly::{
    assemble_basic, compatibility_defect, interpolate_bulk, interpolate_surface, BasicForms, CoupledField,
    CoupledOperator, ProblemParams,
};
use bse_core::eigen::{
    eig_fourth, eig_second, norm_equivalence_constants, poincare_constant, ConstrainedSpace, EigenOptions, EigenResult,
};
use bse_core::expr::{parse, BinOp, Expr, Func, Var};
use bse_core::mesh::generate_disk;
use bse_core::oracle::{circle_surface_eigs, disk_eigs_second, manufactured_second};
use bse_core::solver::{inner_dual, inner_h0, inner_ka, norm_h0, norm_ka, solve_fourth, solve_second, SolveSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn params(k: f64, l: f64, alpha: f64, beta: f64, gamma: f64) -> Result<ProblemParams, String> {
    ProblemParams::new(k, l, alpha, beta, gamma).map_err(err)
}

fn forms_of(n: usize, refine: usize) -> Result<(bse_core::mesh::Mesh, BasicForms), String> {
    let mesh = generate_disk(n, refine).map_err(err)?;
    let forms = assemble_basic(&mesh);
    Ok((mesh, forms))
}

fn surface_fraction(forms: &BasicForms, x: &CoupledField) -> f64 {
    let v = forms.m_surf.bilinear(&x.v, &x.v).unwrap();
    v / (v + forms.m_bulk.bilinear(&x.u, &x.u).unwrap())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_source(r: &mut ChaCha8Rng, forms: &BasicForms, alpha_like: f64) -> CoupledField {
    let f: Vec<f64> = (0..forms.n_bulk()).map(|_| r.random_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..forms.n_surface()).map(|_| r.random_range(-1.0..1.0)).collect();
    let (f, g) = bse_core::assembly::project_compatible(forms, &f, &g, alpha_like).unwrap();
    CoupledField::new(f, g)
}

fn circle_spectrum() -> Outcome {
    let p = params(1.0, 1.0, 0.0, 0.0, 1.0)?;
    let exact = circle_surface_eigs(1.0, 3);
    let (mut hs, mut errs) = (Vec::new(), vec![Vec::new(); 3]);
    let mut slowest = 0.0f64;
    let mut worst_rel = 0.0f64;
    for n in [64, 128, 256] {
        let (mesh, forms) = forms_of(n, 0)?;
        let t = Instant::now();
        let r = eig_second(&forms, &p, 14, &EigenOptions::default()).map_err(err)?;
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let surf: Vec<f64> = r
            .eigenvalues
            .iter()
            .zip(&r.fields)
            .filter(|(_, x)| surface_fraction(&forms, x) > 0.5)
            .map(|(l, _)| *l)
            .collect();
        if surf.len() < 6 {
            return Err(format!("only {} surface modes among 14 eigenvalues at n={n}", surf.len()));
        }
        for m in 0..3 {
            let e = exact[2 * m];
            let pair = 0.5 * (surf[2 * m] + surf[2 * m + 1]);
            let rel = (pair / e - 1.0).abs();
            errs[m].push(rel);
            if n == 256 {
                worst_rel = worst_rel.max((surf[2 * m] / e - 1.0).abs()).max((surf[2 * m + 1] / e - 1.0).abs());
            }
        }
        hs.push(mesh.max_edge_length());
    }
    let mut rates = Vec::new();
    for e in &errs {
        rates.extend(eoc(e, &hs).map_err(err)?);
    }
    let ok = worst_rel <= 0.02 && rates.iter().all(|r| (1.7..=2.3).contains(r)) && slowest <= 60.0;
    check(
        ok,
        format!("max |λ/m²-1| at n=256 {worst_rel:.2e}, EOC {rates:.3?}, slowest eigensolve {slowest:.1} s"),
    )
}

fn bessel_oracle() -> Outcome {
    let (_, forms) = forms_of(64, 2)?;
    let mut details = Vec::new();
    let mut ok = true;
    for k in [1.0, 0.0] {
        let p = params(k, 1.0, 1.0, 1.0, 1.0)?;
        let r = eig_second(&forms, &p, 12, &EigenOptions::default()).map_err(err)?;
        let mut roots = disk_eigs_second(k, 1.0, 1.0, 10, 60.0).map_err(err)?;
        roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let mut i = 0;
        let mut worst = 0.0f64;
        for root in roots.iter().take(5) {
            if i >= r.eigenvalues.len() {
                return Err(format!("K={k}: ran out of computed eigenvalues"));
            }
            let (l, mult) = (r.eigenvalues[i], r.multiplicities[i]);
            let rel = (l - root.lambda).abs() / root.lambda;
            worst = worst.max(rel);
            if rel > 0.02 || mult != root.multiplicity {
                ok = false;
                details.push(format!("K={k} m={}: {l} (x{mult}) vs {} (x{})", root.m, root.lambda, root.multiplicity));
            }
            i += mult;
        }
        details.push(format!("K={k}: max rel error {worst:.2e}"));
    }
    check(ok, details.join("; "))
}

fn manufactured() -> Outcome {
    let p = params(1.0, 1.0, 2.0, 1.0, 1.0)?;
    let ms = manufactured_second(p.k, p.alpha, p.beta).map_err(err)?;
    let (mut hs, mut e0, mut e1) = (Vec::new(), Vec::new(), Vec::new());
    let (mut mean, mut remark) = (0.0f64, 0.0f64);
    for refine in 0..=3 {
        let (mesh, forms) = forms_of(32, refine)?;
        let f = interpolate_bulk(&mesh, &ms.f).map_err(err)?;
        let g = interpolate_surface(&mesh, &ms.g).map_err(err)?;
        let rep = solve_second(&forms, &p, &f, &g, &SolveSettings::projecting()).map_err(err)?;
        let x = &rep.field;
        let exact = CoupledField::new(interpolate_bulk(&mesh, &ms.u).map_err(err)?, vec![ms.v; mesh.n_surface()]);
        let e = x.add_scaled(-1.0, &exact);
        hs.push(mesh.max_edge_length());
        e0.push(norm_h0(&forms, &e).map_err(err)?);
        e1.push(norm_ka(&forms, &p, &e).map_err(err)?);
        mean = mean.max(rep.defect_mean);
        let (int_f, _) = forms.integrals(&CoupledField::new(f.clone(), g.clone())).map_err(err)?;
        let w: Vec<f64> = (0..forms.n_surface()).map(|s| p.alpha * x.v[s] - x.u[forms.trace_node(s)]).collect();
        let int_w = forms.m_surf.bilinear(&vec![1.0; forms.n_surface()], &w).map_err(err)?;
        remark = remark.max((-int_f - int_w / p.k).abs());
    }
    let r0 = eoc(&e0, &hs).map_err(err)?;
    let r1 = eoc(&e1, &hs).map_err(err)?;
    let ok = r0.iter().all(|r| *r >= 1.8) && r1.iter().all(|r| *r >= 0.9) && mean <= 1e-10 && remark <= 1e-8;
    check(
        ok,
        format!("EOC L2 {r0:.3?}, energy {r1:.3?}, |c·x| {mean:.1e}, Robin identity defect {remark:.1e}"),
    )
}

fn self_adjointness() -> Outcome {
    let (mesh, forms) = forms_of(24, 1)?;
    if mesh.n_vertices() > 400 {
        return Err(format!("mesh has {} nodes", mesh.n_vertices()));
    }
    let strict = SolveSettings::default();
    let mut r = rng(4);
    let (mut ds, mut df) = (0.0f64, 0.0f64);
    for (k, l, alpha, beta) in [(1.0, 1.0, 1.0, 1.0), (0.5, 2.0, 2.0, -0.5), (0.0, 1.0, 1.0, 0.5), (1.0, 0.0, 0.0, 1.0)] {
        let p = params(k, l, alpha, beta, 1.0)?;
        for _ in 0..10 {
            let a = random_source(&mut r, &forms, alpha);
            let b = random_source(&mut r, &forms, alpha);
            let sa = solve_second(&forms, &p, &a.u, &a.v, &strict).map_err(err)?.field;
            let sb = solve_second(&forms, &p, &b.u, &b.v, &strict).map_err(err)?.field;
            let (x, y) = (inner_h0(&forms, &sa, &b).map_err(err)?, inner_h0(&forms, &a, &sb).map_err(err)?);
            let scale = norm_h0(&forms, &sa).map_err(err)? * norm_h0(&forms, &b).map_err(err)?;
            ds = ds.max((x - y).abs() / scale.max(x.abs()));

            let a = random_source(&mut r, &forms, beta);
            let b = random_source(&mut r, &forms, beta);
            let fa = solve_fourth(&forms, &p, &a.u, &a.v, &strict).map_err(err)?.field;
            let fb = solve_fourth(&forms, &p, &b.u, &b.v, &strict).map_err(err)?.field;
            let x = inner_dual(&forms, &p, &fa, &b, &strict).map_err(err)?;
            let y = inner_dual(&forms, &p, &a, &fb, &strict).map_err(err)?;
            let scale = (inner_dual(&forms, &p, &fa, &fa, &strict).map_err(err)?
                * inner_dual(&forms, &p, &b, &b, &strict).map_err(err)?)
            .sqrt();
            df = df.max((x - y).abs() / scale.max(x.abs()));
        }
    }
    check(ds <= 1e-10 && df <= 1e-10, format!("max defect S {ds:.1e}, F {df:.1e} ({} nodes)", mesh.n_vertices()))
}

fn composition() -> Outcome {
    let (_, forms) = forms_of(64, 1)?;
    let p = params(1.0, 1.0, 1.0, 1.0, 1.0)?;
    let two = eig_second(&forms, &p, 10, &EigenOptions::default()).map_err(err)?;
    let four = eig_fourth(&forms, &p, 10, &EigenOptions::default()).map_err(err)?;
    let worst = two
        .eigenvalues
        .iter()
        .zip(&four.eigenvalues)
        .map(|(a, b)| (a * a - b).abs() / b)
        .fold(0.0, f64::max);
    check(worst <= 1e-8, format!("max |λ₂² − λ₄|/λ₄ = {worst:.1e} over 10 pairs"))
}

fn mean_defect(forms: &BasicForms, p: &ProblemParams, mean: f64, r: &EigenResult) -> Result<f64, String> {
    let op = CoupledOperator::new(forms, p.k, p.alpha, mean, p.gamma).map_err(err)?;
    Ok(r.fields.iter().map(|x| op.mean_defect(&x.stacked()).abs()).fold(0.0, f64::max))
}

fn positivity() -> Outcome {
    let (_, forms) = forms_of(32, 1)?;
    let (mut lmin, mut defect, mut count) = (f64::INFINITY, 0.0f64, 0usize);
    let cases = [(1.0, 1.0, 1.0, 1.0), (0.0, 0.0, 0.0, 0.0), (0.0, 1.0, 2.0, 0.5), (2.0, 0.0, -1.0, 1.0), (0.5, 0.5, 0.0, 3.0)];
    for (k, l, alpha, beta) in cases {
        let p = params(k, l, alpha, beta, 1.0)?;
        let two = eig_second(&forms, &p, 20, &EigenOptions::default()).map_err(err)?;
        let four = eig_fourth(&forms, &p, 20, &EigenOptions::default()).map_err(err)?;
        for (r, mean) in [(&two, alpha), (&four, beta)] {
            lmin = lmin.min(r.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min));
            defect = defect.max(mean_defect(&forms, &p, mean, r)?);
            count += r.eigenvalues.len();
        }
    }
    // the whole spectrum of a small problem
    let (_, small) = forms_of(12, 1)?;
    let p = params(0.0, 1.0, 1.0, 2.0, 1.0)?;
    let op = CoupledOperator::new(&small, p.k, p.alpha, p.alpha, p.gamma).map_err(err)?;
    let d = ConstrainedSpace::for_operator(&op).map_err(err)?.dim();
    let all = eig_second(&small, &p, d, &EigenOptions::default()).map_err(err)?;
    lmin = lmin.min(all.eigenvalues[0]);
    defect = defect.max(mean_defect(&small, &p, p.alpha, &all)?);
    count += d;
    check(lmin > 1e-12 && defect <= 1e-8, format!("{count} eigenpairs, min λ {lmin:.3e}, max |c·x| {defect:.1e}"))
}

fn poincare_equivalence() -> Outcome {
    let (_, forms) = forms_of(64, 1)?;
    let p = params(1.0, 1.0, 1.0, 0.5, 1.0)?;
    let cp = poincare_constant(&forms, &p).map_err(err)?;
    let ne = norm_equivalence_constants(&forms, &p).map_err(err)?;
    let op = CoupledOperator::new(&forms, p.k, p.alpha, p.beta, p.gamma).map_err(err)?;
    let space = ConstrainedSpace::for_operator(&op).map_err(err)?;
    let h1 = forms.h1_matrix();
    let norms = |x: &CoupledField| {
        let ka = inner_ka(&forms, &p, x, x).unwrap().max(0.0).sqrt();
        let n1 = h1.bilinear(&x.stacked(), &x.stacked()).unwrap().sqrt();
        (norm_h0(&forms, x).unwrap(), ka, n1)
    };
    let mut r = rng(7);
    let mut slack = f64::INFINITY;
    for _ in 0..100 {
        let x = space.random_field(&mut r, forms.n_bulk()).map_err(err)?;
        let (n0, ka, n1) = norms(&x);
        slack = slack.min((cp.constant * ka - n0) / n0).min((ne.a_h * ka - n1) / n1).min((ne.b_h * n1 - ka) / ka);
    }
    let (n0, ka, _) = norms(&cp.field);
    let mut eq = (n0 - cp.constant * ka).abs() / n0;
    let (_, ka, n1) = norms(&ne.min_field);
    eq = eq.max((n1 - ne.a_h * ka).abs() / n1);
    let (_, ka, n1) = norms(&ne.max_field);
    eq = eq.max((ka - ne.b_h * n1).abs() / ka);
    check(
        slack >= -1e-10 && eq <= 1e-8,
        format!("c_P {:.4}, A_h {:.4}, B_h {:.2}, min relative slack {slack:.2e}, equality defect {eq:.1e}", cp.constant, ne.a_h, ne.b_h),
    )
}

fn compatibility_gate(bin: &Path) -> Outcome {
    let (mesh, forms) = forms_of(16, 1)?;
    let p = params(1.0, 1.0, 2.0, 1.0, 1.0)?;
    let f = vec![-4.0; mesh.n_vertices()];
    let g = vec![4.0; mesh.n_surface()];
    let defect = compatibility_defect(&forms, &f, &g, p.alpha).map_err(err)?;
    let strict = solve_second(&forms, &p, &f, &g, &SolveSettings::default());
    let kind = strict.as_ref().err().map(|e| e.kind());
    let rep = solve_second(&forms, &p, &f, &g, &SolveSettings::projecting()).map_err(err)?;
    let (fi, gi) = forms.integrals(&CoupledField::new(f, g)).map_err(err)?;
    let rel = rep.defect_compat_projected.abs() / (p.alpha.abs() * fi.abs() + gi.abs());

    let tmp = tempfile::tempdir().map_err(err)?;
    let cfg = tmp.path().join("strict.json");
    std::fs::write(
        &cfg,
        r#"{"geometry": {"type": "disk", "n_boundary": 16, "refine": 1},
            "params": {"K": 1, "alpha": 2, "beta": 1, "gamma": 1},
            "task": "solve2", "sources": {"f": "-4", "g": "4", "strict_compat": true}}"#,
    )
    .map_err(err)?;
    let out = Command::new(bin)
        .args(["run", cfg.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("out"))
        .env("BSE_LOG", "quiet")
        .output()
        .map_err(err)?;
    let error_json = std::fs::read_to_string(tmp.path().join("out/error.json")).unwrap_or_default();
    let cli_kind = serde_json::from_str::<serde_json::Value>(&error_json).ok().map(|v| v["kind"].clone());
    let ok = defect.abs() > 1e-10
        && kind == Some("incompatible-source")
        && rel < 1e-14
        && out.status.code() == Some(2)
        && cli_kind == Some(serde_json::json!("incompatible-source"));
    check(
        ok,
        format!("defect {defect:.4e} rejected ({kind:?}, CLI exit {:?}); projected relative defect {rel:.1e}", out.status.code()),
    )
}

fn random_expr(r: &mut ChaCha8Rng, depth: usize) -> Expr {
    let leaf = depth == 0 || r.random_bool(0.25);
    if leaf {
        return match r.random_range(0..4) {
            0 => Expr::Num(f64::from_bits(r.random_range(0x3f00_0000_0000_0000u64..0x4100_0000_0000_0000)) * if r.random_bool(0.3) { -1.0 } else { 1.0 }),
            1 => Expr::Var([Var::X, Var::Y, Var::R, Var::Theta][r.random_range(0..4)]),
            2 => Expr::Pi,
            _ => Expr::E,
        };
    }
    match r.random_range(0..3) {
        0 => Expr::Neg(Box::new(random_expr(r, depth - 1))),
        1 => {
            let f = [Func::Sin, Func::Cos, Func::Exp, Func::Sqrt, Func::Abs, Func::Log][r.random_range(0..6)];
            Expr::call(f, random_expr(r, depth - 1))
        }
        _ => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][r.random_range(0..5)];
            Expr::binary(op, random_expr(r, depth - 1), random_expr(r, depth - 1))
        }
    }
}

fn same_value(a: &bse_core::Result<f64>, b: &bse_core::Result<f64>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
        (Err(e1), Err(e2)) => e1.kind() == e2.kind(),
        _ => false,
    }
}

fn parser() -> Outcome {
    let mut r = rng(9);
    let mut bad = Vec::new();
    for i in 0..1000 {
        let t = random_expr(&mut r, 5);
        let text = t.to_string();
        let back = match parse(&text) {
            Ok(e) => e,
            Err(e) => {
                bad.push(format!("#{i} `{text}`: {e}"));
                continue;
            }
        };
        let (x, y) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        if back.to_string() != text || !same_value(&t.eval(x, y), &back.eval(x, y)) {
            bad.push(format!("#{i} `{text}`"));
        }
    }
    let prec = [("-2^2", -4.0), ("2+3*4", 14.0), ("2^3^2", 512.0), ("x^2+y^2", 5.0)];
    for (s, v) in prec {
        match parse(s).and_then(|e| e.eval(1.0, 2.0)) {
            Ok(got) if got == v => {}
            other => bad.push(format!("`{s}` gave {other:?}, expected {v}")),
        }
    }
    check(bad.is_empty(), if bad.is_empty() { "1000 round trips exact, precedence cases pass".into() } else { bad.join("; ") })
}

fn determinism(bin: &Path) -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let configs = [
        ("eig2.json", r#"{"geometry": {"type": "disk", "n_boundary": 64, "refine": 0},
            "params": {"K": 1, "alpha": 0, "beta": 0, "gamma": 1}, "task": "eig2", "eig": {"k": 8}}"#),
        ("eig4.json", r#"{"geometry": {"type": "disk", "n_boundary": 32, "refine": 1},
            "params": {"K": 1, "L": 1, "alpha": 1, "beta": 1, "gamma": 1}, "task": "eig4", "eig": {"k": 8}}"#),
        ("conv.json", r#"{"geometry": {"type": "disk", "n_boundary": 16, "refine": 3},
            "params": {"K": 1, "alpha": 2, "beta": 1, "gamma": 1}, "task": "convergence"}"#),
        ("solve.json", r#"{"geometry": {"type": "disk", "n_boundary": 32, "refine": 1},
            "params": {"K": 0, "L": 1, "alpha": 1, "beta": 1, "gamma": 1}, "task": "solve4",
            "sources": {"f": "x*y - 0.5*sin(3*theta)", "g": "cos(theta)", "strict_compat": false}}"#),
    ];
    let mut compared = 0;
    for (name, json) in configs {
        let cfg = tmp.path().join(name);
        std::fs::write(&cfg, json).map_err(err)?;
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{name}.{rep}"));
            let out = Command::new(bin)
                .args(["run", cfg.to_str().unwrap(), "--threads", "1", "--seed", "1", "--out"])
                .arg(&dir)
                .env("BSE_LOG", "quiet")
                .output()
                .map_err(err)?;
            if !out.status.success() {
                return Err(format!("{name}: exit {:?}", out.status.code()));
            }
            let mut files: Vec<_> = std::fs::read_dir(&dir)
                .map_err(err)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            let contents: Vec<(String, Vec<u8>)> = files
                .iter()
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
                .collect();
            runs.push(contents);
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return Err(format!("{name}: CSV outputs differ between runs"));
        }
        compared += runs[0].len();
    }
    check(true, format!("{compared} CSV files byte-identical across repeated runs"))
}

fn main() {
    let bin = Path::new(env!("CARGO_BIN_EXE_bse"));
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("circle spectrum", Box::new(circle_spectrum)),
        ("disk Bessel oracle", Box::new(bessel_oracle)),
        ("manufactured solution", Box::new(manufactured)),
        ("self-adjointness", Box::new(self_adjointness)),
        ("composition identity", Box::new(composition)),
        ("positivity and constraint", Box::new(positivity)),
        ("Poincaré and norm equivalence", Box::new(poincare_equivalence)),
        ("compatibility gate", Box::new(move || compatibility_gate(bin))),
        ("parser", Box::new(parser)),
        ("determinism", Box::new(move || determinism(bin))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
