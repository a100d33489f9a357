use faer::linalg::solvers::Solve;
use faer::Mat;
use log::debug;

use super::{axpy, dot, norm, CsrMatrix};
use crate::error::{check_len, Error, Result};

/// Linear constraints on the unknown vector: an elimination map expressing
/// some entries through others, and at most one mean constraint `c·x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n: usize,
    /// For every full index, either its reduced index or its elimination weights.
    rows: Vec<Row>,
    retained: Vec<usize>,
    mean: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Row {
    Kept(usize),
    /// `(reduced index, weight)` pairs.
    Eliminated(Vec<(usize, f64)>),
}

impl ConstraintSet {
    /// `elimination` maps an eliminated index to `(retained index, weight)`
    /// pairs, meaning `x_i = Σ w x_j`. An empty weight list pins `x_i = 0`.
    pub fn new(n: usize, elimination: Vec<(usize, Vec<(usize, f64)>)>, mean: Option<Vec<f64>>) -> Result<ConstraintSet> {
        let mut eliminated = vec![false; n];
        for (i, _) in &elimination {
            if *i >= n {
                return Err(Error::InvalidArgument(format!("eliminated index {i} out of range {n}")));
            }
            if std::mem::replace(&mut eliminated[*i], true) {
                return Err(Error::InvalidArgument(format!("index {i} eliminated twice")));
            }
        }
        let mut rows = Vec::with_capacity(n);
        let mut retained = Vec::new();
        for (i, &e) in eliminated.iter().enumerate() {
            if e {
                rows.push(Row::Eliminated(Vec::new()));
            } else {
                rows.push(Row::Kept(retained.len()));
                retained.push(i);
            }
        }
        for (i, weights) in elimination {
            let mut reduced = Vec::with_capacity(weights.len());
            for (j, w) in weights {
                match rows.get(j) {
                    Some(Row::Kept(r)) => reduced.push((*r, w)),
                    Some(Row::Eliminated(_)) => {
                        return Err(Error::InvalidArgument(format!(
                            "index {i} is expressed through eliminated index {j}"
                        )))
                    }
                    None => return Err(Error::InvalidArgument(format!("retained index {j} out of range {n}"))),
                }
            }
            rows[i] = Row::Eliminated(reduced);
        }
        if let Some(c) = &mean {
            check_len(n, c.len())?;
            if c.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidArgument("mean constraint vector is zero".into()));
            }
        }
        Ok(ConstraintSet {
            n,
            rows,
            retained,
            mean,
        })
    }

    pub fn unconstrained(n: usize) -> ConstraintSet {
        ConstraintSet::new(n, Vec::new(), None).expect("no constraints")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn reduced_dim(&self) -> usize {
        self.retained.len()
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    pub fn is_eliminated(&self, i: usize) -> bool {
        matches!(self.rows[i], Row::Eliminated(_))
    }

    /// Full vector `E y` from reduced coordinates.
    pub fn expand(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.reduced_dim(), y.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| match row {
                Row::Kept(r) => y[*r],
                Row::Eliminated(w) => w.iter().map(|&(r, wt)| wt * y[r]).sum(),
            })
            .collect())
    }

    /// Reduced vector `Eᵀ b`.
    pub fn restrict(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut out = vec![0.0; self.reduced_dim()];
        for (row, &bi) in self.rows.iter().zip(b) {
            match row {
                Row::Kept(r) => out[*r] += bi,
                Row::Eliminated(w) => {
                    for &(r, wt) in w {
                        out[r] += wt * bi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `x` satisfies the elimination map to within `tol` (absolute).
    pub fn satisfies_elimination(&self, x: &[f64], tol: f64) -> bool {
        self.rows.iter().enumerate().all(|(i, row)| match row {
            Row::Kept(_) => true,
            Row::Eliminated(w) => {
                let target: f64 = w.iter().map(|&(r, wt)| wt * x[self.retained[r]]).sum();
                (x[i] - target).abs() <= tol
            }
        })
    }

    /// Reduction operator `E` (full × reduced).
    pub fn reduction_matrix(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            match row {
                Row::Kept(r) => t.push((i, *r, 1.0)),
                Row::Eliminated(w) => t.extend(w.iter().map(|&(r, wt)| (i, r, wt))),
            }
        }
        CsrMatrix::from_triplets(self.n, self.reduced_dim(), t)
    }

    /// Row `i` of the reduction operator as `(reduced index, weight)` pairs.
    pub fn image(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.rows[i] {
            Row::Kept(r) => vec![(*r, 1.0)],
            Row::Eliminated(w) => w.clone(),
        }
    }

    /// `Eᵀ A E`.
    pub fn reduce_matrix(&self, a: &CsrMatrix) -> Result<CsrMatrix> {
        self.reduce_between(self, a)
    }

    /// `E_selfᵀ A E_right` for two constraint sets on the same unknowns.
    pub fn reduce_between(&self, right: &ConstraintSet, a: &CsrMatrix) -> Result<CsrMatrix> {
        check_len(self.n, a.n_rows())?;
        check_len(right.n, a.n_cols())?;
        let images: Vec<Vec<(usize, f64)>> = (0..right.n).map(|j| right.image(j)).collect();
        let mut t = Vec::with_capacity(a.nnz());
        for i in 0..self.n {
            let ri = self.image(i);
            for (j, v) in a.row(i) {
                for &(p, wp) in &ri {
                    for &(q, wq) in &images[j] {
                        t.push((p, q, v * wp * wq));
                    }
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.reduced_dim(), right.reduced_dim(), t))
    }

    pub fn reduced_mean(&self) -> Option<Vec<f64>> {
        self.mean.as_ref().map(|c| self.restrict(c).expect("length checked"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Projected conjugate gradients, falling back to a dense bordered LU
    /// for small systems when they stall or break down.
    Auto,
    ConjugateGradient,
    DenseLu,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative residual target on the reduced system.
    pub tol: f64,
    /// Defaults to 20 times the reduced dimension.
    pub max_iter: Option<usize>,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: None,
            method: Method::Auto,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖A_red y − b_red‖ / ‖b_red‖`.
    pub residual: f64,
    /// Multiplier of the mean constraint; zero up to rounding for compatible data.
    pub multiplier: f64,
    pub method: Method,
}

const DENSE_LIMIT: usize = 5000;
const MAX_RESTARTS: usize = 8;

const INCOMPATIBLE_FACTOR: f64 = 1e3;

pub fn solve_constrained(a: &CsrMatrix, b: &[f64], cs: &ConstraintSet, tol: f64) -> Result<Solution> {
    solve_constrained_with(a, b, cs, &SolveOptions::with_tol(tol))
}

/// Solves `A x = b` for symmetric positive semidefinite `A` over the
/// vectors satisfying `cs`.
///
/// The mean constraint must remove the kernel of the reduced matrix and `b`
/// must be orthogonal to that kernel; the solution then coincides with the
/// constrained energy minimizer and its multiplier vanishes.
pub fn solve_constrained_with(a: &CsrMatrix, b: &[f64], cs: &ConstraintSet, opts: &SolveOptions) -> Result<Solution> {
    check_len(cs.dim(), a.n_rows())?;
    check_len(cs.dim(), a.n_cols())?;
    check_len(cs.dim(), b.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let ar = cs.reduce_matrix(a)?;
    let br = cs.restrict(b)?;
    let cr = cs.reduced_mean();
    if let Some(c) = &cr {
        if norm(c) == 0.0 {
            return Err(Error::DegenerateConstraint { value: 0.0 });
        }
    }
    let proj = Projector::new(cr.as_deref());
    let m = ar.n_rows();
    let bnorm = norm(&br);
    if bnorm == 0.0 || m == 0 {
        return Ok(Solution {
            x: vec![0.0; cs.dim()],
            iterations: 0,
            residual: 0.0,
            multiplier: 0.0,
            method: opts.method,
        });
    }
    let target = 0.5 * opts.tol;
    let max_iter = opts.max_iter.unwrap_or(20 * m).max(1);

    let (mut y, iterations, method) = match opts.method {
        Method::DenseLu => (dense_bordered(&ar, &br, &proj)?, 0, Method::DenseLu),
        Method::ConjugateGradient | Method::Auto => match pcg(&ar, &br, &proj, target, max_iter) {
            Ok((y, it)) => (y, it, Method::ConjugateGradient),
            Err(failure) => {
                debug!("projected CG failed ({failure:?}) on a system of dimension {m}");
                if opts.method == Method::Auto && m < DENSE_LIMIT {
                    (dense_bordered(&ar, &br, &proj)?, failure.iterations(), Method::DenseLu)
                } else {
                    return Err(failure.into_error());
                }
            }
        },
    };
    proj.apply(&mut y);

    let mut r = br.clone();
    axpy(-1.0, &ar.apply(&y)?, &mut r);
    let multiplier = proj.multiplier(&r);
    if let Some(c) = &proj.c {
        // for a compatible rhs the multiplier only picks up the projected
        // residual, amplified by the angle between c and the kernel
        let component = multiplier.abs() * norm(c) / bnorm;
        if component > INCOMPATIBLE_FACTOR * opts.tol.max(1e-14) {
            return Err(Error::IncompatibleRhs { component });
        }
    }
    proj.apply(&mut r);
    let residual = norm(&r) / bnorm;
    if residual > opts.tol {
        return Err(Error::NoConvergence { iterations, residual });
    }
    debug!("constrained solve: dimension {m}, {iterations} iterations, residual {residual:e}");
    Ok(Solution {
        x: cs.expand(&y)?,
        iterations,
        residual,
        multiplier,
        method,
    })
}

/// Orthogonal projector onto `c⊥` (identity without a mean constraint).
struct Projector {
    c: Option<Vec<f64>>,
    cc: f64,
}

impl Projector {
    fn new(c: Option<&[f64]>) -> Projector {
        let c = c.map(|c| c.to_vec());
        let cc = c.as_ref().map_or(1.0, |c| dot(c, c));
        Projector { c, cc }
    }

    fn apply(&self, x: &mut [f64]) {
        if let Some(c) = &self.c {
            let t = dot(c, x) / self.cc;
            axpy(-t, c, x);
        }
    }

    fn multiplier(&self, r: &[f64]) -> f64 {
        self.c.as_ref().map_or(0.0, |c| dot(c, r) / self.cc)
    }
}

#[derive(Debug)]
enum CgFailure {
    Breakdown { iterations: usize },
    Stalled { iterations: usize, residual: f64 },
}

impl CgFailure {
    fn iterations(&self) -> usize {
        match self {
            CgFailure::Breakdown { iterations } | CgFailure::Stalled { iterations, .. } => *iterations,
        }
    }

    fn into_error(self) -> Error {
        match self {
            CgFailure::Breakdown { iterations } => Error::SingularSystem(format!(
                "operator is not positive definite on the constrained subspace (breakdown at iteration {iterations})"
            )),
            CgFailure::Stalled { iterations, residual } => Error::NoConvergence { iterations, residual },
        }
    }
}

/// Jacobi-preconditioned CG on `c⊥`, restarted from the true residual
/// until it meets `target`.
fn pcg(a: &CsrMatrix, b: &[f64], proj: &Projector, target: f64, max_iter: usize) -> Result<(Vec<f64>, usize), CgFailure> {
    let m = a.n_rows();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        z.clear();
        z.extend(r.iter().zip(&inv_diag).map(|(r, d)| r * d));
        proj.apply(z);
    };
    let scale = a.max_abs();
    let mut pb = b.to_vec();
    proj.apply(&mut pb);
    let bnorm = norm(b);

    let mut y = vec![0.0; m];
    let (mut r, mut z, mut q) = (vec![0.0; m], Vec::with_capacity(m), vec![0.0; m]);
    let mut iterations = 0;
    for _ in 0..MAX_RESTARTS {
        // true projected residual
        a.apply_into(&y, &mut q);
        r.copy_from_slice(&pb);
        axpy(-1.0, &q, &mut r);
        proj.apply(&mut r);
        if norm(&r) <= target * bnorm {
            return Ok((y, iterations));
        }
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.apply_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 1e-14 * scale * dot(&p, &p)) {
                return Err(CgFailure::Breakdown { iterations });
            }
            let step = rz / pq;
            axpy(step, &p, &mut y);
            proj.apply(&mut q);
            axpy(-step, &q, &mut r);
            iterations += 1;
            if norm(&r) <= target * bnorm {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        if iterations >= max_iter {
            break;
        }
    }
    a.apply_into(&y, &mut q);
    r.copy_from_slice(&pb);
    axpy(-1.0, &q, &mut r);
    proj.apply(&mut r);
    let residual = norm(&r) / bnorm;
    if residual <= target {
        Ok((y, iterations))
    } else {
        Err(CgFailure::Stalled { iterations, residual })
    }
}

/// Bordered system `[[A, c], [cᵀ, 0]]` by dense LU with a few steps of
/// iterative refinement.
fn dense_bordered(a: &CsrMatrix, b: &[f64], proj: &Projector) -> Result<Vec<f64>> {
    let m = a.n_rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    // rescale c to the size of A so the border does not distort pivoting
    let c_hat: Option<Vec<f64>> = proj.c.as_ref().map(|c| {
        let s = scale / norm(c);
        c.iter().map(|v| v * s).collect()
    });
    let dim = m + usize::from(c_hat.is_some());
    let mut k = Mat::<f64>::zeros(dim, dim);
    for (i, j, v) in a.triplets() {
        k[(i, j)] += v;
    }
    if let Some(c) = &c_hat {
        for (i, &ci) in c.iter().enumerate() {
            k[(i, m)] = ci;
            k[(m, i)] = ci;
        }
    }
    let lu = k.partial_piv_lu();
    let u = lu.U();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..dim {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > 1e-13 * hi) {
        return Err(Error::SingularSystem(format!(
            "bordered system is numerically singular (pivot ratio {:e})",
            lo / hi
        )));
    }
    let rhs = Mat::from_fn(dim, 1, |i, _| if i < m { b[i] } else { 0.0 });
    let mut sol = lu.solve(&rhs);
    for _ in 0..3 {
        let res = &rhs - &k * &sol;
        sol += lu.solve(&res);
    }
    let y: Vec<f64> = (0..m).map(|i| sol[(i, 0)]).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("dense solve produced non-finite values".into()));
    }
    Ok(y)
}
