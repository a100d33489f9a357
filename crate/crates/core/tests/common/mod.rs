#![allow(dead_code)]

use bse_core::assembly::{assemble_basic, project_compatible, BasicForms, CoupledField};
use bse_core::mesh::{generate_disk, generate_square, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn disk(n: usize, refine: usize) -> (Mesh, BasicForms) {
    let mesh = generate_disk(n, refine).unwrap();
    let forms = assemble_basic(&mesh);
    (mesh, forms)
}

pub fn square(n: usize) -> (Mesh, BasicForms) {
    let mesh = generate_square(n).unwrap();
    let forms = assemble_basic(&mesh);
    (mesh, forms)
}

pub fn random_field(rng: &mut impl Rng, forms: &BasicForms) -> CoupledField {
    CoupledField::new(
        (0..forms.n_bulk()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..forms.n_surface()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
}

/// Random nodal sources made compatible with respect to `alpha_like`.
pub fn random_source(rng: &mut impl Rng, forms: &BasicForms, alpha_like: f64) -> CoupledField {
    let s = random_field(rng, forms);
    let (f, g) = project_compatible(forms, &s.u, &s.v, alpha_like).unwrap();
    CoupledField::new(f, g)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn max_diff(a: &CoupledField, b: &CoupledField) -> f64 {
    a.stacked().iter().zip(b.stacked()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
