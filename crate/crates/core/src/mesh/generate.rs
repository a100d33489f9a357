use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Triangulation of the unit disk whose boundary is the inscribed regular
/// `n_boundary`-gon, refined `refine` times by quadrisection.
///
/// The base mesh is built from concentric rings of vertices around a
/// center node. Interior rings are roughly twice as coarse tangentially as
/// the boundary ring. When `n_boundary` is divisible by 8 (or 4, 2) every
/// ring count is too and each sector is triangulated identically, so the
/// mesh carries that rotational symmetry. Refinement projects new boundary
/// midpoints radially onto the unit circle.
pub fn generate_disk(n_boundary: usize, refine: usize) -> Result<Mesh> {
    if n_boundary < 8 {
        return Err(Error::InvalidArgument(format!(
            "disk mesh needs at least 8 boundary nodes, got {n_boundary}"
        )));
    }
    let mut mesh = disk_base(n_boundary)?;
    let project = |p: Point| {
        let r = p[0].hypot(p[1]);
        [p[0] / r, p[1] / r]
    };
    for _ in 0..refine {
        mesh = refine_uniform(&mesh, Some(&project))?;
    }
    Ok(mesh)
}

fn ring_counts(n: usize) -> (usize, Vec<usize>) {
    let sectors = [8, 4, 2, 1].into_iter().find(|s| n.is_multiple_of(*s)).unwrap_or(1);
    let min_count = sectors * 6usize.div_ceil(sectors);
    let rings = ((n as f64 / (3.0 * PI)).round() as usize).max(1);
    let mut counts = Vec::with_capacity(rings);
    let mut prev = min_count;
    for j in 1..rings {
        let target = n as f64 * j as f64 / (2.0 * rings as f64 * sectors as f64);
        let c = (sectors * (target.round() as usize)).max(min_count).max(prev);
        counts.push(c);
        prev = c;
    }
    counts.push(n);
    (sectors, counts)
}

fn disk_base(n: usize) -> Result<Mesh> {
    let (sectors, counts) = ring_counts(n);
    let rings = counts.len();

    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    let mut ring_start = Vec::with_capacity(rings);
    for (j, &count) in counts.iter().enumerate() {
        ring_start.push(vertices.len());
        let radius = if j + 1 == rings { 1.0 } else { (j + 1) as f64 / rings as f64 };
        for k in 0..count {
            let theta = 2.0 * PI * k as f64 / count as f64;
            vertices.push([radius * theta.cos(), radius * theta.sin()]);
        }
    }

    let mut triangles = Vec::new();
    let first = counts[0];
    for k in 0..first {
        triangles.push([0, ring_start[0] + k, ring_start[0] + (k + 1) % first]);
    }
    for j in 0..rings - 1 {
        let (a, b) = (counts[j], counts[j + 1]);
        let (p, q) = (a / sectors, b / sectors);
        let inner = |i: usize| ring_start[j] + i % a;
        let outer = |i: usize| ring_start[j + 1] + i % b;
        for sector in 0..sectors {
            let (i0, o0) = (sector * p, sector * q);
            let (mut i, mut o) = (0, 0);
            while i < p || o < q {
                // advance whichever ring has the smaller next angle; ties go outward
                let step_outer = i == p || (o < q && (o + 1) * p <= (i + 1) * q);
                if step_outer {
                    triangles.push([inner(i0 + i), outer(o0 + o), outer(o0 + o + 1)]);
                    o += 1;
                } else {
                    triangles.push([inner(i0 + i), outer(o0 + o), inner(i0 + i + 1)]);
                    i += 1;
                }
            }
        }
    }

    let surface = (ring_start[rings - 1]..ring_start[rings - 1] + n).collect();
    Mesh::new(vertices, triangles, surface)
}

/// Structured right-triangle mesh of the unit square with `n_per_side`
/// cells along each side.
pub fn generate_square(n_per_side: usize) -> Result<Mesh> {
    if n_per_side < 2 {
        return Err(Error::InvalidArgument(format!(
            "square mesh needs at least 2 cells per side, got {n_per_side}"
        )));
    }
    let n = n_per_side;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mut surface = Vec::with_capacity(4 * n);
    surface.extend((0..n).map(|i| idx(i, 0)));
    surface.extend((0..n).map(|j| idx(n, j)));
    surface.extend((1..=n).rev().map(|i| idx(i, n)));
    surface.extend((1..=n).rev().map(|j| idx(0, j)));
    Mesh::new(vertices, triangles, surface)
}

/// Splits every triangle into four through its edge midpoints.
///
/// New boundary midpoints are passed through `project` when given, which
/// is how curved boundaries are followed.
pub fn refine_uniform(mesh: &Mesh, project: Option<&dyn Fn(Point) -> Point>) -> Result<Mesh> {
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let boundary: std::collections::HashSet<(usize, usize)> = mesh
        .surface_edges()
        .iter()
        .map(|&[a, b]| (a.min(b), a.max(b)))
        .collect();

    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            let mut m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if let Some(f) = project {
                if boundary.contains(&key) {
                    m = f(m);
                }
            }
            vertices.push(m);
            vertices.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(4 * mesh.triangles().len());
    for &[a, b, c] in mesh.triangles() {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut surface = Vec::with_capacity(2 * mesh.n_surface());
    for &[a, b] in mesh.surface_edges() {
        surface.push(a);
        surface.push(mid(a, b, &mut vertices));
    }
    Mesh::new(vertices, triangles, surface)
}
