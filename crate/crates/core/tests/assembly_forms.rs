mod common;

use bse_core::assembly::{assemble_coupled, build_constraints, sigma, BasicForms, CoupledField};
use bse_core::linalg::symmetric_eigen;
use bse_core::mesh::Mesh;
use common::{disk, random_field, rng, square};
use proptest::prelude::*;

/// Energy of a nodal field recomputed element by element: bulk gradients
/// from the edge vectors of each triangle, surface gradients as difference
/// quotients, the coupling term by exact integration of a linear function
/// squared.
fn energy_oracle(mesh: &Mesh, x: &CoupledField, k: f64, alpha: f64, gamma: f64) -> f64 {
    let p = mesh.vertices();
    let mut e = 0.0;
    for t in mesh.triangles() {
        let (a, b, c) = (p[t[0]], p[t[1]], p[t[2]]);
        let (e1, e2) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        let (d1, d2) = (x.u[t[1]] - x.u[t[0]], x.u[t[2]] - x.u[t[0]]);
        // solve [e1; e2] g = (d1, d2)
        let g = [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det];
        e += 0.5 * det.abs() * (g[0] * g[0] + g[1] * g[1]);
    }
    let ns = mesh.n_surface();
    let s = sigma(k);
    for i in 0..ns {
        let j = (i + 1) % ns;
        let h = mesh.surface_edge_length(i);
        e += gamma * (x.v[j] - x.v[i]).powi(2) / h;
        let w0 = alpha * x.v[i] - x.u[mesh.trace_map(i)];
        let w1 = alpha * x.v[j] - x.u[mesh.trace_map(j)];
        e += s * h / 3.0 * (w0 * w0 + w0 * w1 + w1 * w1);
    }
    e
}

#[test]
fn coupled_matrix_is_symmetric_and_semidefinite() {
    for (mesh, forms) in [disk(16, 1), square(8), disk(24, 0)] {
        assert!(mesh.n_vertices() <= 400);
        for (k, alpha, gamma) in [(1.0, 1.0, 1.0), (0.0, 2.0, 0.5), (0.3, -1.5, 2.0), (5.0, 0.0, 1.0)] {
            let a = assemble_coupled(&forms, k, alpha, gamma).unwrap();
            assert!(a.is_symmetric(1e-14));
            let eig = symmetric_eigen(a.to_dense().as_ref()).unwrap();
            let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10 * a.max_abs(), "K={k} α={alpha}: min eigenvalue {min}");
        }
    }
}

#[test]
fn quadratic_form_matches_elementwise_energy() {
    let mut r = rng(7);
    for (mesh, forms) in [disk(32, 1), square(6)] {
        for (k, alpha, gamma) in [(1.0, 2.0, 1.0), (0.0, 1.0, 3.0), (0.25, -0.7, 0.2)] {
            let a = assemble_coupled(&forms, k, alpha, gamma).unwrap();
            for _ in 0..5 {
                let x = random_field(&mut r, &forms);
                let q = a.bilinear(&x.stacked(), &x.stacked()).unwrap();
                let e = energy_oracle(&mesh, &x, k, alpha, gamma);
                assert!((q - e).abs() <= 1e-12 * e, "{q} vs {e}");
            }
        }
    }
}

#[test]
fn kernel_pair_has_zero_energy() {
    let (mesh, forms) = disk(20, 1);
    for alpha in [0.0, 1.0, -3.0] {
        let a = assemble_coupled(&forms, 0.7, alpha, 1.3).unwrap();
        let kp = CoupledField::kernel_pair(&mesh, alpha).stacked();
        let ax = a.apply(&kp).unwrap();
        assert!(ax.iter().all(|v| v.abs() < 1e-12), "α={alpha}");
    }
}

fn dirichlet_field(forms: &BasicForms, x: &CoupledField, alpha: f64) -> CoupledField {
    let mut y = x.clone();
    for s in 0..forms.n_surface() {
        y.u[forms.trace_node(s)] = alpha * y.v[s];
    }
    y
}

#[test]
fn eliminated_form_matches_full_form() {
    let (_, forms) = disk(24, 1);
    let mut r = rng(3);
    for alpha in [1.0, 0.0, -2.5] {
        let a = assemble_coupled(&forms, 0.0, alpha, 1.0).unwrap();
        let cs = build_constraints(&forms, 0.0, alpha, 1.0).unwrap();
        let ar = cs.reduce_matrix(&a).unwrap();
        for _ in 0..5 {
            let y: Vec<f64> = (0..cs.reduced_dim()).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
            let x = cs.expand(&y).unwrap();
            let field = CoupledField::from_stacked(&x, forms.n_bulk());
            assert_eq!(dirichlet_field(&forms, &field, alpha), field);
            let full = a.bilinear(&x, &x).unwrap();
            let reduced = ar.bilinear(&y, &y).unwrap();
            assert!((full - reduced).abs() <= 1e-12 * full.abs().max(1e-300));
        }
    }
}

#[test]
fn dirichlet_energy_is_robin_limit() {
    // for fields with u|Γ = αv the Robin term vanishes for every K
    let (_, forms) = disk(16, 1);
    let mut r = rng(11);
    let x = dirichlet_field(&forms, &random_field(&mut r, &forms), 1.5);
    let e0 = assemble_coupled(&forms, 0.0, 1.5, 1.0).unwrap().bilinear(&x.stacked(), &x.stacked()).unwrap();
    let e1 = assemble_coupled(&forms, 1e-3, 1.5, 1.0).unwrap().bilinear(&x.stacked(), &x.stacked()).unwrap();
    assert!((e0 - e1).abs() <= 1e-12 * e0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn energy_identity_random_parameters(
        k in prop_oneof![Just(0.0), 0.01f64..10.0],
        alpha in -3.0f64..3.0,
        gamma in 0.05f64..5.0,
        seed in any::<u64>(),
    ) {
        let (mesh, forms) = disk(12, 1);
        let a = assemble_coupled(&forms, k, alpha, gamma).unwrap();
        let x = random_field(&mut rng(seed), &forms);
        let q = a.bilinear(&x.stacked(), &x.stacked()).unwrap();
        let e = energy_oracle(&mesh, &x, k, alpha, gamma);
        prop_assert!((q - e).abs() <= 1e-12 * e);
    }
}
