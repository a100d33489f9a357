//! Solution operators of the second-order system and of the fourth-order
//! system obtained by composing two second-order solves, with the inner
//! products they induce.

use log::{debug, info};

use crate::assembly::{
    assemble_load, compatibility_defect, project_compatible, BasicForms, CoupledField, CoupledOperator, ProblemParams,
};
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, solve_constrained_with, SolveOptions};

/// Compatibility defects above this are rejected in strict mode.
pub const STRICT_COMPAT_TOL: f64 = 1e-10;

const PROJECTED_ZERO: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub linear: SolveOptions,
    /// Reject sources whose compatibility defect exceeds [`STRICT_COMPAT_TOL`]
    /// instead of shifting the surface source.
    pub strict: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            linear: SolveOptions::default(),
            strict: true,
        }
    }
}

impl SolveSettings {
    pub fn projecting() -> Self {
        SolveSettings {
            strict: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: CoupledField,
    pub iterations: usize,
    pub residual: f64,
    /// Compatibility defect of the given sources.
    pub defect_compat: f64,
    /// Compatibility defect of the sources actually solved with.
    pub defect_compat_projected: f64,
    /// `|c·x|` of the returned field.
    pub defect_mean: f64,
    /// `(μ, ν)` of a fourth-order solve.
    pub intermediate: Option<CoupledField>,
}

/// One second-order solve `S_{k, coupling, mean}(f, g)`, surface weight `gamma`.
pub fn solve_operator(
    forms: &BasicForms,
    k_like: f64,
    coupling: f64,
    mean: f64,
    gamma: f64,
    f: &[f64],
    g: &[f64],
    settings: &SolveSettings,
) -> Result<SolveReport> {
    let op = CoupledOperator::new(forms, k_like, coupling, mean, gamma)?;
    solve_with_operator(forms, &op, f, g, settings)
}

pub fn solve_with_operator(
    forms: &BasicForms,
    op: &CoupledOperator,
    f: &[f64],
    g: &[f64],
    settings: &SolveSettings,
) -> Result<SolveReport> {
    check_len(forms.n_bulk(), f.len())?;
    check_len(forms.n_surface(), g.len())?;
    let defect = compatibility_defect(forms, f, g, op.alpha_like)?;
    if settings.strict && defect.abs() > STRICT_COMPAT_TOL {
        return Err(Error::IncompatibleSource {
            defect,
            tolerance: STRICT_COMPAT_TOL,
        });
    }
    let raw = norm(&assemble_load(forms, f, g)?);
    // below the strict threshold the shift only removes rounding
    let (f, g) = project_compatible(forms, f, g, op.alpha_like)?;
    let defect_projected = compatibility_defect(forms, &f, &g, op.alpha_like)?;
    if defect != 0.0 {
        debug!("compatibility defect {defect:e} projected to {defect_projected:e}");
    }
    let b = assemble_load(forms, &f, &g)?;
    // a source that is a kernel pair up to rounding projects to noise
    let (x, iterations, residual) = if norm(&b) <= PROJECTED_ZERO * raw {
        (vec![0.0; forms.dim()], 0, 0.0)
    } else {
        let sol = solve_constrained_with(&op.matrix, &b, &op.constraints, &settings.linear)?;
        (sol.x, sol.iterations, sol.residual)
    };
    let defect_mean = op.mean_defect(&x).abs();
    Ok(SolveReport {
        field: CoupledField::from_stacked(&x, forms.n_bulk()),
        iterations,
        residual,
        defect_compat: defect,
        defect_compat_projected: defect_projected,
        defect_mean,
        intermediate: None,
    })
}

/// `S_{K, α, β}(f, g)`: Robin scale `K`, coupling `α`, mean constraint with `β`.
pub fn solve_second(
    forms: &BasicForms,
    params: &ProblemParams,
    f: &[f64],
    g: &[f64],
    settings: &SolveSettings,
) -> Result<SolveReport> {
    params.validate()?;
    let r = solve_operator(forms, params.k, params.alpha, params.beta, params.gamma, f, g, settings)?;
    info!(
        "second-order solve: {} iterations, residual {:e}, mean defect {:e}",
        r.iterations, r.residual, r.defect_mean
    );
    Ok(r)
}

/// `S_{K, α, β} ∘ S_{L, β, α}` applied to `(f, g)`, which must be compatible
/// with respect to `β`. The intermediate `(μ, ν)` is returned alongside.
pub fn solve_fourth(
    forms: &BasicForms,
    params: &ProblemParams,
    f: &[f64],
    g: &[f64],
    settings: &SolveSettings,
) -> Result<SolveReport> {
    params.validate()?;
    let p = params;
    let first = solve_operator(forms, p.l, p.beta, p.alpha, p.gamma, f, g, settings).map_err(|e| e.at_stage("first"))?;
    let mid = first.field;
    // (μ, ν) satisfies the α-mean constraint, which is the compatibility
    // condition of the second stage; only rounding is projected away
    let second_settings = SolveSettings {
        strict: false,
        ..*settings
    };
    let second = solve_operator(forms, p.k, p.alpha, p.beta, p.gamma, &mid.u, &mid.v, &second_settings)
        .map_err(|e| e.at_stage("second"))?;
    info!(
        "fourth-order solve: {} + {} iterations, residuals {:e} / {:e}",
        first.iterations, second.iterations, first.residual, second.residual
    );
    Ok(SolveReport {
        field: second.field,
        iterations: first.iterations + second.iterations,
        residual: first.residual.max(second.residual),
        defect_compat: first.defect_compat,
        defect_compat_projected: first.defect_compat_projected,
        defect_mean: second.defect_mean,
        intermediate: Some(mid),
    })
}

/// `aᵀ A_cpl(K, α, γ) b`.
pub fn inner_ka(forms: &BasicForms, params: &ProblemParams, a: &CoupledField, b: &CoupledField) -> Result<f64> {
    let m = crate::assembly::assemble_coupled(forms, params.k, params.alpha, params.gamma)?;
    inner_with(&m, forms, a, b)
}

pub fn norm_ka(forms: &BasicForms, params: &ProblemParams, a: &CoupledField) -> Result<f64> {
    Ok(clamped_sqrt(inner_ka(forms, params, a, a)?))
}

fn inner_with(m: &crate::linalg::CsrMatrix, forms: &BasicForms, a: &CoupledField, b: &CoupledField) -> Result<f64> {
    check_len(forms.n_bulk(), a.u.len())?;
    check_len(forms.n_surface(), a.v.len())?;
    check_len(forms.n_bulk(), b.u.len())?;
    check_len(forms.n_surface(), b.v.len())?;
    m.bilinear(&a.stacked(), &b.stacked())
}

pub(crate) fn clamped_sqrt(q: f64) -> f64 {
    q.max(0.0).sqrt()
}

/// `∫ a_u b_u dx + ∫ a_v b_v dS`.
pub fn inner_h0(forms: &BasicForms, a: &CoupledField, b: &CoupledField) -> Result<f64> {
    check_len(forms.n_bulk(), a.u.len())?;
    check_len(forms.n_surface(), a.v.len())?;
    Ok(forms.m_bulk.bilinear(&a.u, &b.u)? + forms.m_surf.bilinear(&a.v, &b.v)?)
}

pub fn norm_h0(forms: &BasicForms, a: &CoupledField) -> Result<f64> {
    Ok(clamped_sqrt(inner_h0(forms, a, a)?))
}

/// Dual inner product of two sources compatible with respect to `β`:
/// `⟨S_{L,β,α} s₁, S_{L,β,α} s₂⟩_{L,β}`.
pub fn inner_dual(
    forms: &BasicForms,
    params: &ProblemParams,
    s1: &CoupledField,
    s2: &CoupledField,
    settings: &SolveSettings,
) -> Result<f64> {
    let p = params;
    let op = CoupledOperator::new(forms, p.l, p.beta, p.alpha, p.gamma)?;
    let x1 = solve_with_operator(forms, &op, &s1.u, &s1.v, settings)?.field;
    let x2 = solve_with_operator(forms, &op, &s2.u, &s2.v, settings)?.field;
    inner_with(&op.matrix, forms, &x1, &x2)
}

/// `ω (u, v)`.
pub fn rescale_omega(field: &CoupledField, omega: f64) -> Result<CoupledField> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    Ok(field.scaled(omega))
}

/// Relative size `|a − b| / max(|a|, |b|, tiny)` used by symmetry diagnostics.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
