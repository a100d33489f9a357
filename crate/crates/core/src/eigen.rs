//! Constrained generalized eigenproblems of the second- and fourth-order
//! systems, Poincaré and norm-equivalence constants, and minimax checks.

use std::sync::Arc;

use faer::{Mat, MatRef};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{BasicForms, CoupledField, CoupledOperator, ProblemParams};
use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky_lower, eig_dense_generalized, ConstraintSet, CsrMatrix};

/// Orthonormal coordinates of the admissible subspace of a constraint set.
///
/// Eliminated unknowns are expressed through the retained ones, and the mean
/// constraint is removed by a Householder reflection of the reduced
/// coordinates that maps the constraint vector onto the first axis.
#[derive(Debug, Clone)]
pub struct ConstrainedSpace {
    constraints: ConstraintSet,
    householder: Option<(Vec<f64>, f64)>,
}

impl ConstrainedSpace {
    pub fn new(cs: &ConstraintSet) -> Result<ConstrainedSpace> {
        let householder = match cs.reduced_mean() {
            None => None,
            Some(c) => {
                let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                if cn == 0.0 {
                    return Err(Error::DegenerateConstraint { value: 0.0 });
                }
                let mut w = c;
                w[0] += if w[0] >= 0.0 { cn } else { -cn };
                let tau = 2.0 / w.iter().map(|x| x * x).sum::<f64>();
                Some((w, tau))
            }
        };
        Ok(ConstrainedSpace {
            constraints: cs.clone(),
            householder,
        })
    }

    pub fn for_operator(op: &CoupledOperator) -> Result<ConstrainedSpace> {
        ConstrainedSpace::new(&op.constraints)
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Dimension of the admissible subspace.
    pub fn dim(&self) -> usize {
        self.constraints.reduced_dim() - usize::from(self.householder.is_some())
    }

    fn offset(&self) -> usize {
        usize::from(self.householder.is_some())
    }

    fn reflect_rows(&self, x: &mut Mat<f64>) {
        if let Some((w, tau)) = &self.householder {
            for j in 0..x.ncols() {
                let s: f64 = (0..x.nrows()).map(|i| w[i] * x[(i, j)]).sum();
                for i in 0..x.nrows() {
                    x[(i, j)] -= tau * s * w[i];
                }
            }
        }
    }

    fn reflect_cols(&self, x: &mut Mat<f64>) {
        if let Some((w, tau)) = &self.householder {
            let mut s = vec![0.0; x.nrows()];
            for j in 0..x.ncols() {
                for (i, si) in s.iter_mut().enumerate() {
                    *si += x[(i, j)] * w[j];
                }
            }
            for j in 0..x.ncols() {
                for (i, si) in s.iter().enumerate() {
                    x[(i, j)] -= tau * si * w[j];
                }
            }
        }
    }

    /// `Qᵀ A Q` in subspace coordinates.
    pub fn project(&self, a: &CsrMatrix) -> Result<Mat<f64>> {
        self.project_between(self, a)
    }

    /// `Q_selfᵀ A Q_right` for two subspaces of the same unknowns.
    pub fn project_between(&self, right: &ConstrainedSpace, a: &CsrMatrix) -> Result<Mat<f64>> {
        let mut r = self.constraints.reduce_between(&right.constraints, a)?.to_dense();
        self.reflect_rows(&mut r);
        right.reflect_cols(&mut r);
        let (o1, o2) = (self.offset(), right.offset());
        Ok(r.submatrix(o1, o2, r.nrows() - o1, r.ncols() - o2).to_owned())
    }

    /// Full stacked vector of subspace coordinates `z`.
    pub fn lift(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), z.len())?;
        let mut y = vec![0.0; self.constraints.reduced_dim()];
        y[self.offset()..].copy_from_slice(z);
        if let Some((w, tau)) = &self.householder {
            let s: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
            for (yi, wi) in y.iter_mut().zip(w) {
                *yi -= tau * s * wi;
            }
        }
        self.constraints.expand(&y)
    }

    pub fn lift_field(&self, z: &[f64], n_bulk: usize) -> Result<CoupledField> {
        Ok(CoupledField::from_stacked(&self.lift(z)?, n_bulk))
    }

    /// A random admissible field with subspace coordinates uniform in `[-1, 1]`.
    pub fn random_field(&self, rng: &mut impl Rng, n_bulk: usize) -> Result<CoupledField> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        self.lift_field(&z, n_bulk)
    }
}

/// The pencil `(A, B)` in subspace coordinates that an eigenrun solved.
#[derive(Debug, Clone)]
pub struct ReducedPencil {
    pub space: ConstrainedSpace,
    pub a: Mat<f64>,
    pub b: Mat<f64>,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// `B`-orthonormal eigenfields.
    pub fields: Vec<CoupledField>,
    /// `‖A z − λ B z‖ / ‖A z‖` in subspace coordinates.
    pub residuals: Vec<f64>,
    /// Size of the multiplet each eigenvalue belongs to.
    pub multiplicities: Vec<usize>,
    /// `max |z_iᵀ B z_j − δ_ij|`.
    pub gram_defect: f64,
    /// Eigenvectors in subspace coordinates, one per column.
    pub coords: Mat<f64>,
    pub pencil: Arc<ReducedPencil>,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative gap below which eigenvalues are treated as one multiplet.
    pub multiplet_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { multiplet_tol: 1e-8 }
    }
}

fn col(m: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let y = m * faer::ColRef::from_slice(x);
    y.iter().copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bilinear(m: &Mat<f64>, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &mat_vec(m, y))
}

/// Groups eigenvalues into multiplets, re-orthonormalizes each multiplet in
/// the `B` product and computes diagnostics.
fn finalize(pencil: ReducedPencil, values: Vec<f64>, mut z: Mat<f64>, n_bulk: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let k = values.len();
    let mut multiplicities = vec![1; k];
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && (values[end] - values[start]).abs() <= opts.multiplet_tol * values[start].abs().max(values[end].abs()) {
            end += 1;
        }
        for i in start..end {
            multiplicities[i] = end - start;
            let mut v = col(z.as_ref(), i);
            for j in start..i {
                let q = col(z.as_ref(), j);
                let c = bilinear(&pencil.b, &q, &v);
                for (vi, qi) in v.iter_mut().zip(&q) {
                    *vi -= c * qi;
                }
            }
            let nrm = bilinear(&pencil.b, &v, &v).max(0.0).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::Backend(format!("eigenvector {i} has vanishing B-norm")));
            }
            for (r, vi) in v.iter().enumerate() {
                z[(r, i)] = vi / nrm;
            }
        }
        start = end;
    }

    let bz = &pencil.b * &z;
    let az = &pencil.a * &z;
    // report the Rayleigh quotients of the final B-normalized vectors
    let mut values = values;
    for (i, v) in values.iter_mut().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for row in 0..z.nrows() {
            num += z[(row, i)] * az[(row, i)];
            den += z[(row, i)] * bz[(row, i)];
        }
        *v = num / den;
    }
    let mut residuals = Vec::with_capacity(k);
    for (i, &lambda) in values.iter().enumerate() {
        let mut r2 = 0.0;
        let mut a2 = 0.0;
        for row in 0..z.nrows() {
            r2 += (az[(row, i)] - lambda * bz[(row, i)]).powi(2);
            a2 += az[(row, i)].powi(2);
        }
        residuals.push(if a2 > 0.0 { (r2 / a2).sqrt() } else { r2.sqrt() });
    }
    let gram = z.transpose() * &bz;
    let mut gram_defect = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((gram[(i, j)] - target).abs());
        }
    }
    let fields = (0..k)
        .map(|i| pencil.space.lift_field(&col(z.as_ref(), i), n_bulk))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenResult {
        eigenvalues: values,
        fields,
        residuals,
        multiplicities,
        gram_defect,
        coords: z,
        pencil: Arc::new(pencil),
    })
}

fn check_count(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs from a constrained space of dimension {dim}"
        )));
    }
    Ok(())
}

/// Smallest `k` eigenpairs of `A_cpl(K, α, γ) x = λ M x` on the admissible
/// space with `α` as mean coefficient. `params.l` and `params.beta` are unused.
pub fn eig_second(forms: &BasicForms, params: &ProblemParams, k: usize, opts: &EigenOptions) -> Result<EigenResult> {
    params.validate()?;
    let op = CoupledOperator::new(forms, params.k, params.alpha, params.alpha, params.gamma)?;
    let space = ConstrainedSpace::for_operator(&op)?;
    check_count(k, space.dim())?;
    let a = space.project(&op.matrix)?;
    let b = space.project(&forms.mass_matrix())?;
    let e = eig_dense_generalized(a.as_ref(), b.as_ref(), k)?;
    info!("second-order eigenproblem: dimension {}, lambda_1 = {:e}", space.dim(), e.values[0]);
    finalize(ReducedPencil { space, a, b }, e.values, e.vectors, forms.n_bulk(), opts)
}

/// Smallest `k` eigenpairs of the fourth-order problem
/// `A_cpl(K, α, γ) x = λ M S_{L,β,α}(M x)` on the space with `β` as mean
/// coefficient. The eigenfields are orthonormal in the dual product
/// `⟨S_{L,β,α} ·, S_{L,β,α} ·⟩_{L,β}`.
pub fn eig_fourth(forms: &BasicForms, params: &ProblemParams, k: usize, opts: &EigenOptions) -> Result<EigenResult> {
    params.validate()?;
    let p = params;
    let op_k = CoupledOperator::new(forms, p.k, p.alpha, p.beta, p.gamma)?;
    let op_l = CoupledOperator::new(forms, p.l, p.beta, p.alpha, p.gamma)?;
    let space_k = ConstrainedSpace::for_operator(&op_k)?;
    let space_l = ConstrainedSpace::for_operator(&op_l)?;
    check_count(k, space_k.dim())?;

    let a = space_k.project(&op_k.matrix)?;
    let a_l = space_l.project(&op_l.matrix)?;
    let mut w = space_l.project_between(&space_k, &forms.mass_matrix())?;
    let chol = cholesky_lower(a_l.as_ref()).map_err(|_| Error::SingularSystem("inner operator is not definite".into()))?;
    chol.solve_lower_triangular_in_place(&mut w);
    let bt = w.transpose() * &w;
    let b = Mat::from_fn(bt.nrows(), bt.ncols(), |i, j| 0.5 * (bt[(i, j)] + bt[(j, i)]));

    // B may be singular (when the inner space is smaller), A is definite:
    // solve B z = μ A z and keep the largest μ = 1/λ
    let d = space_k.dim();
    let e = eig_dense_generalized(b.as_ref(), a.as_ref(), d)?;
    let mu_max = e.values[d - 1];
    let mut values = Vec::with_capacity(k);
    let mut z = Mat::zeros(d, k);
    for idx in (0..d).rev().take(k) {
        let mu = e.values[idx];
        if !(mu > 1e-12 * mu_max) {
            return Err(Error::InvalidArgument(format!(
                "only {} finite eigenvalues available, {k} requested",
                values.len()
            )));
        }
        let c = values.len();
        for r in 0..d {
            z[(r, c)] = e.vectors[(r, idx)] / mu.sqrt();
        }
        values.push(1.0 / mu);
    }
    info!("fourth-order eigenproblem: dimension {d}, lambda_1 = {:e}", values[0]);
    finalize(ReducedPencil { space: space_k, a, b }, values, z, forms.n_bulk(), opts)
}

#[derive(Debug, Clone)]
pub struct PoincareResult {
    /// `λ_min^{-1/2}`.
    pub constant: f64,
    pub lambda_min: f64,
    /// `M`-normalized minimizer of the Rayleigh quotient.
    pub field: CoupledField,
}

/// Smallest constant with `‖x‖_{H⁰} ≤ c ‖x‖_{K,α}` on the admissible space
/// with mean coefficient `β`.
pub fn poincare_constant(forms: &BasicForms, params: &ProblemParams) -> Result<PoincareResult> {
    params.validate()?;
    let op = CoupledOperator::new(forms, params.k, params.alpha, params.beta, params.gamma)?;
    let space = ConstrainedSpace::for_operator(&op)?;
    check_count(1, space.dim())?;
    let a = space.project(&op.matrix)?;
    let m = space.project(&forms.mass_matrix())?;
    let e = eig_dense_generalized(a.as_ref(), m.as_ref(), 1)?;
    let lambda_min = e.values[0];
    Ok(PoincareResult {
        constant: lambda_min.powf(-0.5),
        lambda_min,
        field: space.lift_field(&col(e.vectors.as_ref(), 0), forms.n_bulk())?,
    })
}

#[derive(Debug, Clone)]
pub struct NormEquivalence {
    /// `‖x‖_{H¹} ≤ a_h ‖x‖_{K,α}`.
    pub a_h: f64,
    /// `‖x‖_{K,α} ≤ b_h ‖x‖_{H¹}`.
    pub b_h: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub min_field: CoupledField,
    pub max_field: CoupledField,
}

/// Extremal Rayleigh quotients of the coupled form against the H¹ product
/// on the admissible space with mean coefficient `β`.
pub fn norm_equivalence_constants(forms: &BasicForms, params: &ProblemParams) -> Result<NormEquivalence> {
    params.validate()?;
    let op = CoupledOperator::new(forms, params.k, params.alpha, params.beta, params.gamma)?;
    let space = ConstrainedSpace::for_operator(&op)?;
    let d = space.dim();
    check_count(1, d)?;
    let a = space.project(&op.matrix)?;
    let h = space.project(&forms.h1_matrix())?;
    let e = eig_dense_generalized(a.as_ref(), h.as_ref(), d)?;
    let (lambda_min, lambda_max) = (e.values[0], e.values[d - 1]);
    Ok(NormEquivalence {
        a_h: lambda_min.powf(-0.5),
        b_h: lambda_max.sqrt(),
        lambda_min,
        lambda_max,
        min_field: space.lift_field(&col(e.vectors.as_ref(), 0), forms.n_bulk())?,
        max_field: space.lift_field(&col(e.vectors.as_ref(), d - 1), forms.n_bulk())?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxReport {
    /// Largest `(λ_j − R(y)) / λ_j` over samples `y` that are `B`-orthogonal
    /// to the first `j − 1` eigenvectors; positive values are violations.
    pub max_violation: f64,
    /// Largest `|R(z_j) − λ_j| / λ_j` at the computed eigenvectors.
    pub max_identity_error: f64,
}

/// Samples the variational characterization of every computed eigenvalue.
///
/// For each `j`, samples mix the computed eigenvectors `z_j, z_{j+1}, …` with
/// a small random component, then are `B`-orthogonalized against the first
/// `j − 1` eigenvectors, so the Rayleigh quotient comes close to `λ_j`.
pub fn minimax_check(result: &EigenResult, trials: usize, seed: u64) -> MinimaxReport {
    let p = &result.pencil;
    let z = &result.coords;
    let (d, k) = (z.nrows(), z.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vecs: Vec<Vec<f64>> = (0..k).map(|j| col(z.as_ref(), j)).collect();
    let bvecs: Vec<Vec<f64>> = vecs.iter().map(|v| mat_vec(&p.b, v)).collect();
    let rayleigh = |y: &[f64]| bilinear(&p.a, y, y) / bilinear(&p.b, y, y);

    let mut report = MinimaxReport {
        max_violation: f64::NEG_INFINITY,
        max_identity_error: 0.0,
    };
    for j in 0..k {
        let lambda = result.eigenvalues[j];
        report.max_identity_error = report.max_identity_error.max((rayleigh(&vecs[j]) - lambda).abs() / lambda);
        for t in 0..trials {
            let eps = [1e-6, 1e-3, 1.0][t % 3];
            let mut y: Vec<f64> = (0..d).map(|_| eps * rng.random_range(-1.0..1.0)).collect();
            for v in &vecs[j..] {
                let a = rng.random_range(-1.0..1.0);
                for (yi, vi) in y.iter_mut().zip(v) {
                    *yi += a * vi;
                }
            }
            for i in 0..j {
                let c = dot(&bvecs[i], &y);
                for (yi, vi) in y.iter_mut().zip(&vecs[i]) {
                    *yi -= c * vi;
                }
            }
            let q = rayleigh(&y);
            if q.is_finite() {
                report.max_violation = report.max_violation.max((lambda - q) / lambda);
            }
        }
    }
    report
}
