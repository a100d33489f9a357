//! Piecewise-linear discrete forms on the bulk triangulation and its
//! boundary polyline, the coupled energy matrix and its constraints.

use crate::error::{check_len, Error, Result};
use crate::expr::Expr;
use crate::linalg::{dot, ConstraintSet, CsrMatrix};
use crate::mesh::{measures, Measures, Mesh};

/// Coefficients of the coupled system: Robin scales `K`, `L`, coupling
/// constants `alpha`, `beta` and the surface stiffness weight `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub k: f64,
    pub l: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            k: 1.0,
            l: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl ProblemParams {
    pub fn new(k: f64, l: f64, alpha: f64, beta: f64, gamma: f64) -> Result<ProblemParams> {
        let p = ProblemParams {
            k,
            l,
            alpha,
            beta,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("K", self.k), ("L", self.l), ("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        if self.k < 0.0 || self.l < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Robin scales must be nonnegative, got K = {}, L = {}",
                self.k, self.l
            )));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    /// `alpha beta |Ω_h| + |Γ_h|`, the value of the mean constraint on the kernel pair.
    pub fn constraint_value(&self, m: &Measures) -> f64 {
        self.alpha * self.beta * m.area + m.perimeter
    }
}

/// Robin weight: `1/K` for `K > 0` and `0` for the Dirichlet coupling `K = 0`.
pub fn sigma(k: f64) -> f64 {
    if k > 0.0 {
        1.0 / k
    } else {
        0.0
    }
}

/// Nodal values `(u, v)` of a bulk and a surface function.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl CoupledField {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> CoupledField {
        CoupledField { u, v }
    }

    pub fn zeros(mesh: &Mesh) -> CoupledField {
        CoupledField::new(vec![0.0; mesh.n_vertices()], vec![0.0; mesh.n_surface()])
    }

    /// The constant pair `(alpha, 1)` spanning the kernel of the coupled form.
    pub fn kernel_pair(mesh: &Mesh, alpha: f64) -> CoupledField {
        CoupledField::new(vec![alpha; mesh.n_vertices()], vec![1.0; mesh.n_surface()])
    }

    /// Splits a stacked vector `[u; v]` after `n_bulk` entries.
    pub fn from_stacked(x: &[f64], n_bulk: usize) -> CoupledField {
        CoupledField::new(x[..n_bulk].to_vec(), x[n_bulk..].to_vec())
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.v.len());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.v);
        x
    }

    pub fn len(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len(mesh.n_vertices(), self.u.len())?;
        check_len(mesh.n_surface(), self.v.len())?;
        if self.u.iter().chain(&self.v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> CoupledField {
        CoupledField::new(self.u.iter().map(|x| s * x).collect(), self.v.iter().map(|x| s * x).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &CoupledField) -> CoupledField {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        CoupledField::new(zip(&self.u, &other.u), zip(&self.v, &other.v))
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Stiffness and mass matrices of the bulk and the surface, the trace
/// selection and the discrete measures of one mesh.
#[derive(Debug, Clone)]
pub struct BasicForms {
    pub a_bulk: CsrMatrix,
    pub m_bulk: CsrMatrix,
    pub a_surf: CsrMatrix,
    pub m_surf: CsrMatrix,
    /// Surface × bulk selection of boundary values.
    pub trace: CsrMatrix,
    pub measures: Measures,
    surface_nodes: Vec<usize>,
}

/// P1 stiffness and consistent mass of one triangle.
pub fn triangle_matrices(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut grad = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        grad[i] = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    let mut stiff = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiff[i][j] = area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
            mass[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (stiff, mass)
}

/// P1 stiffness and consistent mass of a segment of length `h`.
pub fn segment_matrices(h: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    (
        [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]],
        [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]],
    )
}

pub fn assemble_basic(mesh: &Mesh) -> BasicForms {
    let nb = mesh.n_vertices();
    let ns = mesh.n_surface();
    let verts = mesh.vertices();
    let mut a = Vec::with_capacity(9 * mesh.triangles().len());
    let mut m = Vec::with_capacity(9 * mesh.triangles().len());
    for tri in mesh.triangles() {
        let (ke, me) = triangle_matrices([verts[tri[0]], verts[tri[1]], verts[tri[2]]]);
        for i in 0..3 {
            for j in 0..3 {
                a.push((tri[i], tri[j], ke[i][j]));
                m.push((tri[i], tri[j], me[i][j]));
            }
        }
    }
    let mut as_ = Vec::with_capacity(4 * ns);
    let mut ms = Vec::with_capacity(4 * ns);
    for s in 0..ns {
        let ids = [s, (s + 1) % ns];
        let (ke, me) = segment_matrices(mesh.surface_edge_length(s));
        for i in 0..2 {
            for j in 0..2 {
                as_.push((ids[i], ids[j], ke[i][j]));
                ms.push((ids[i], ids[j], me[i][j]));
            }
        }
    }
    let trace = CsrMatrix::from_triplets(ns, nb, (0..ns).map(|s| (s, mesh.trace_map(s), 1.0)).collect());
    BasicForms {
        a_bulk: CsrMatrix::from_triplets(nb, nb, a),
        m_bulk: CsrMatrix::from_triplets(nb, nb, m),
        a_surf: CsrMatrix::from_triplets(ns, ns, as_),
        m_surf: CsrMatrix::from_triplets(ns, ns, ms),
        trace,
        measures: measures(mesh),
        surface_nodes: mesh.surface_nodes().to_vec(),
    }
}

impl BasicForms {
    pub fn n_bulk(&self) -> usize {
        self.a_bulk.n_rows()
    }

    pub fn n_surface(&self) -> usize {
        self.a_surf.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.n_bulk() + self.n_surface()
    }

    pub fn trace_node(&self, s: usize) -> usize {
        self.surface_nodes[s]
    }

    fn block_diag(&self, bulk: &[&CsrMatrix], surf: &[&CsrMatrix]) -> CsrMatrix {
        let nb = self.n_bulk();
        let mut t = Vec::new();
        for m in bulk {
            t.extend(m.triplets());
        }
        for m in surf {
            t.extend(m.triplets().map(|(i, j, v)| (nb + i, nb + j, v)));
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), t)
    }

    /// `blockdiag(M_bulk, M_surf)`, the Gram matrix of the L² product pairing.
    pub fn mass_matrix(&self) -> CsrMatrix {
        self.block_diag(&[&self.m_bulk], &[&self.m_surf])
    }

    /// `blockdiag(A_bulk + M_bulk, A_surf + M_surf)`, the H¹ product Gram matrix.
    pub fn h1_matrix(&self) -> CsrMatrix {
        self.block_diag(&[&self.a_bulk, &self.m_bulk], &[&self.a_surf, &self.m_surf])
    }

    /// `∫u dx` and `∫v dS`.
    pub fn integrals(&self, field: &CoupledField) -> Result<(f64, f64)> {
        let ones_b = vec![1.0; self.n_bulk()];
        let ones_s = vec![1.0; self.n_surface()];
        Ok((self.m_bulk.bilinear(&ones_b, &field.u)?, self.m_surf.bilinear(&ones_s, &field.v)?))
    }
}

/// Coupled energy matrix
/// `[[A_b + σ TᵀM_s T, −α σ TᵀM_s], [−α σ M_s T, γ A_s + α² σ M_s]]`
/// acting on stacked `[u; v]`, with `σ = sigma(k_like)`.
pub fn assemble_coupled(forms: &BasicForms, k_like: f64, alpha_like: f64, gamma: f64) -> Result<CsrMatrix> {
    if !(k_like >= 0.0) {
        return Err(Error::InvalidArgument(format!("Robin scale must be nonnegative, got {k_like}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let nb = forms.n_bulk();
    let s = sigma(k_like);
    let mut t: Vec<(usize, usize, f64)> = forms.a_bulk.triplets().collect();
    t.extend(forms.a_surf.triplets().map(|(i, j, v)| (nb + i, nb + j, gamma * v)));
    if s != 0.0 {
        for (i, j, v) in forms.m_surf.triplets() {
            let (ti, tj) = (forms.trace_node(i), forms.trace_node(j));
            t.push((ti, tj, s * v));
            t.push((ti, nb + j, -alpha_like * s * v));
            t.push((nb + i, tj, -alpha_like * s * v));
            t.push((nb + i, nb + j, alpha_like * alpha_like * s * v));
        }
    }
    Ok(CsrMatrix::from_triplets(forms.dim(), forms.dim(), t))
}

/// Constraints of the admissible space: for `k_like = 0` every boundary
/// bulk value is tied to `alpha_like` times its surface value, and the mean
/// constraint `mean_like ∫u + ∫v = 0` is always imposed.
pub fn build_constraints(forms: &BasicForms, k_like: f64, alpha_like: f64, mean_like: f64) -> Result<ConstraintSet> {
    let m = &forms.measures;
    let value = alpha_like * mean_like * m.area + m.perimeter;
    if value.abs() <= 1e-12 * m.perimeter {
        return Err(Error::DegenerateConstraint { value });
    }
    let nb = forms.n_bulk();
    let mut c = Vec::with_capacity(forms.dim());
    let ones_b = vec![1.0; nb];
    let ones_s = vec![1.0; forms.n_surface()];
    c.extend(forms.m_bulk.apply(&ones_b)?.into_iter().map(|x| mean_like * x));
    c.extend(forms.m_surf.apply(&ones_s)?);
    let elimination = if k_like == 0.0 {
        (0..forms.n_surface())
            .map(|s| {
                let w = if alpha_like == 0.0 { vec![] } else { vec![(nb + s, alpha_like)] };
                (forms.trace_node(s), w)
            })
            .collect()
    } else {
        Vec::new()
    };
    ConstraintSet::new(forms.dim(), elimination, Some(c))
}

/// The coupled matrix together with the constraints of its admissible space.
#[derive(Debug, Clone)]
pub struct CoupledOperator {
    pub matrix: CsrMatrix,
    pub constraints: ConstraintSet,
    pub k_like: f64,
    pub alpha_like: f64,
    pub mean_like: f64,
    pub gamma: f64,
}

impl CoupledOperator {
    pub fn new(forms: &BasicForms, k_like: f64, alpha_like: f64, mean_like: f64, gamma: f64) -> Result<CoupledOperator> {
        Ok(CoupledOperator {
            matrix: assemble_coupled(forms, k_like, alpha_like, gamma)?,
            constraints: build_constraints(forms, k_like, alpha_like, mean_like)?,
            k_like,
            alpha_like,
            mean_like,
            gamma,
        })
    }

    /// `c·x` for a stacked field.
    pub fn mean_defect(&self, x: &[f64]) -> f64 {
        self.constraints.mean().map_or(0.0, |c| dot(c, x))
    }
}

/// Load vector `(M_b f, M_s g)` of nodal sources.
pub fn assemble_load(forms: &BasicForms, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let mut b = forms.m_bulk.apply(f)?;
    b.extend(forms.m_surf.apply(g)?);
    Ok(b)
}

/// `alpha ∫f dx + ∫g dS` for nodal sources.
pub fn compatibility_defect(forms: &BasicForms, f: &[f64], g: &[f64], alpha_like: f64) -> Result<f64> {
    let (fi, gi) = forms.integrals(&CoupledField::new(f.to_vec(), g.to_vec()))?;
    Ok(alpha_like * fi + gi)
}

/// Shifts `g` by a constant so that the compatibility defect vanishes.
pub fn project_compatible(forms: &BasicForms, f: &[f64], g: &[f64], alpha_like: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let defect = compatibility_defect(forms, f, g, alpha_like)?;
    let shift = defect / forms.measures.perimeter;
    Ok((f.to_vec(), g.iter().map(|x| x - shift).collect()))
}

/// Nodal interpolant of `e` on the bulk vertices.
pub fn interpolate_bulk(mesh: &Mesh, e: &Expr) -> Result<Vec<f64>> {
    mesh.vertices().iter().map(|p| e.eval(p[0], p[1])).collect()
}

/// Nodal interpolant of `e` on the surface nodes, in surface order.
pub fn interpolate_surface(mesh: &Mesh, e: &Expr) -> Result<Vec<f64>> {
    (0..mesh.n_surface())
        .map(|s| {
            let p = mesh.surface_point(s);
            e.eval(p[0], p[1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk, generate_square};

    #[test]
    fn reference_triangle_matrices() {
        let (k, m) = triangle_matrices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let k_ref = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - k_ref[i][j]).abs() < 1e-15);
                let m_ref = 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m[i][j] - m_ref).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn segment_matrix_values() {
        let (k, m) = segment_matrices(0.25);
        assert_eq!(k, [[4.0, -4.0], [-4.0, 4.0]]);
        assert!((m[0][0] - 0.25 / 3.0).abs() < 1e-16 && (m[0][1] - 0.25 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let forms = assemble_basic(&generate_disk(12, 1).unwrap());
        for a in [&forms.a_bulk, &forms.a_surf] {
            let r = a.apply(&vec![1.0; a.n_rows()]).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-12));
            assert!(a.is_symmetric(1e-14));
        }
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma(0.0), 0.0);
        assert_eq!(sigma(2.0), 0.5);
    }

    #[test]
    fn dirichlet_coupling_is_block_diagonal() {
        let mesh = generate_square(3).unwrap();
        let forms = assemble_basic(&mesh);
        let a = assemble_coupled(&forms, 0.0, 1.5, 2.0).unwrap();
        let nb = forms.n_bulk();
        for (i, j, v) in a.triplets() {
            assert!(v == 0.0 || (i < nb) == (j < nb), "coupling entry ({i}, {j})");
            if i >= nb && j >= nb {
                assert_eq!(v, 2.0 * forms.a_surf.get(i - nb, j - nb));
            }
        }
        assert_eq!(assemble_coupled(&forms, -1.0, 1.0, 1.0).unwrap_err().kind(), "invalid-argument");
        assert_eq!(assemble_coupled(&forms, 1.0, 1.0, 0.0).unwrap_err().kind(), "invalid-argument");
    }

    #[test]
    fn kernel_pair_is_annihilated() {
        let mesh = generate_disk(16, 1).unwrap();
        let forms = assemble_basic(&mesh);
        for (k, alpha) in [(0.0, 1.0), (1.0, 2.0), (0.3, -0.7), (2.0, 0.0)] {
            let a = assemble_coupled(&forms, k, alpha, 1.3).unwrap();
            let r = a.apply(&CoupledField::kernel_pair(&mesh, alpha).stacked()).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-12), "K={k} alpha={alpha}");
        }
    }

    #[test]
    fn constraint_vector_pairs_with_measures() {
        let mesh = generate_disk(8, 0).unwrap();
        let forms = assemble_basic(&mesh);
        let cs = build_constraints(&forms, 1.0, 2.0, 0.5).unwrap();
        let c = cs.mean().unwrap();
        let bulk_ones = CoupledField::new(vec![1.0; mesh.n_vertices()], vec![0.0; mesh.n_surface()]);
        assert!((dot(c, &bulk_ones.stacked()) - 0.5 * forms.measures.area).abs() < 1e-14);
        assert!(cs.reduced_dim() == forms.dim());

        let cs = build_constraints(&forms, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(cs.reduced_dim(), forms.n_bulk());
        let x = cs.expand(&vec![1.0; cs.reduced_dim()]).unwrap();
        for s in 0..mesh.n_surface() {
            assert_eq!(x[mesh.trace_map(s)], 0.0);
        }

        let m = forms.measures;
        let mean = -m.perimeter / m.area;
        assert_eq!(build_constraints(&forms, 1.0, 1.0, mean).unwrap_err().kind(), "degenerate-constraint");
    }

    #[test]
    fn loads_and_defects() {
        let square = assemble_basic(&generate_square(4).unwrap());
        let b = assemble_load(&square, &vec![1.0; 25], &vec![0.0; 16]).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(assemble_load(&square, &[1.0], &[]).is_err());

        let mesh = generate_disk(8, 0).unwrap();
        let forms = assemble_basic(&mesh);
        let b = assemble_load(&forms, &vec![0.0; mesh.n_vertices()], &vec![1.0; 8]).unwrap();
        assert!((b.iter().sum::<f64>() - 6.1229349).abs() < 1e-6);

        let f = vec![-4.0; mesh.n_vertices()];
        let g = vec![4.0; 8];
        let defect = compatibility_defect(&forms, &f, &g, 2.0).unwrap();
        let n = 8.0f64;
        let pi = std::f64::consts::PI;
        let expected = -8.0 * 0.5 * n * (2.0 * pi / n).sin() + 4.0 * 2.0 * n * (pi / n).sin();
        assert!((defect - expected).abs() < 1e-12, "{defect} vs {expected}");
        assert!((defect - 1.8643226).abs() < 1e-6);

        let (f2, g2) = project_compatible(&forms, &f, &g, 2.0).unwrap();
        assert_eq!(f2, f);
        assert!((g2[0] - (4.0 - expected / forms.measures.perimeter)).abs() < 1e-14);
        assert!(compatibility_defect(&forms, &f2, &g2, 2.0).unwrap().abs() < 1e-14 * defect.abs().max(1.0) * 10.0);

        let zero = vec![0.0; mesh.n_vertices()];
        assert_eq!(compatibility_defect(&forms, &zero, &vec![0.0; 8], 2.0).unwrap(), 0.0);
        assert_eq!(compatibility_defect(&forms, &f, &vec![0.0; 8], 0.0).unwrap(), 0.0);
        let (_, g3) = project_compatible(&forms, &zero, &vec![3.0; 8], 1.0).unwrap();
        assert!(g3.iter().all(|x| x.abs() < 1e-14));
        let (_, g4) = project_compatible(&forms, &zero, &vec![0.0; 8], 1.0).unwrap();
        assert_eq!(g4, vec![0.0; 8]);
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(0.0, 0.0, 1.0, -1.0, 1.0).is_ok());
        assert!(ProblemParams::new(-1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(1.0, -0.1, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(ProblemParams::new(1.0, 1.0, f64::NAN, 1.0, 1.0).is_err());
    }
}
