//! Bulk triangulations with an attached closed-polyline surface mesh.
//!
//! The surface nodes of a [`Mesh`] are exactly the bulk vertices on the
//! boundary, so the discrete trace of a bulk field is plain index selection
//! through [`Mesh::trace_map`].

mod generate;
mod io;

pub use generate::{generate_disk, generate_square, refine_uniform};
pub use io::{read_mesh, write_mesh, MESH_HEADER};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Area of the bulk and length of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measures {
    pub area: f64,
    pub perimeter: f64,
}

/// A validated 2D triangulation together with its boundary cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    surface_nodes: Vec<usize>,
    surface_edges: Vec<[usize; 2]>,
    bulk_to_surface: Vec<Option<usize>>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn distance(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant.
    ///
    /// `surface_nodes` lists the boundary vertices in counterclockwise
    /// order; consecutive entries (cyclically) must be boundary edges.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        surface_nodes: Vec<usize>,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvariantViolation("mesh has no triangles".into()));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvariantViolation("non-finite vertex coordinate".into()));
        }

        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let diam2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
        let min_area = 1e-14 * diam2;

        // undirected edge -> (count, directed occurrence a->b of the first triangle)
        let mut edges: HashMap<(usize, usize), (u32, (usize, usize))> = HashMap::new();
        let mut used = vec![false; nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(Error::InvariantViolation(format!(
                        "triangle {t} references vertex {i} but the mesh has {nv} vertices"
                    )));
                }
                used[i] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvariantViolation(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= min_area {
                return Err(Error::InvariantViolation(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edges.entry(key).or_insert((0, (a, b)));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(Error::InvariantViolation(format!(
                        "edge ({a}, {b}) is shared by more than two triangles"
                    )));
                }
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvariantViolation(format!(
                "vertex {i} is not used by any triangle"
            )));
        }

        // boundary edges keep the orientation of their single triangle
        let mut boundary_next: HashMap<usize, usize> = HashMap::new();
        let mut n_boundary_edges = 0;
        for &(count, (a, b)) in edges.values() {
            if count == 1 {
                n_boundary_edges += 1;
                if boundary_next.insert(a, b).is_some() {
                    return Err(Error::InvariantViolation(format!(
                        "boundary vertex {a} starts two boundary edges"
                    )));
                }
            }
        }

        let p = surface_nodes.len();
        if p < 3 {
            return Err(Error::InvariantViolation("surface cycle needs at least 3 nodes".into()));
        }
        if p != n_boundary_edges {
            return Err(Error::InvariantViolation(format!(
                "boundary is not a single closed cycle: {n_boundary_edges} boundary edges \
                 but the surface lists {p} nodes"
            )));
        }
        let mut bulk_to_surface = vec![None; nv];
        for (s, &i) in surface_nodes.iter().enumerate() {
            if i >= nv {
                return Err(Error::InvariantViolation(format!(
                    "surface node {s} references vertex {i} out of range"
                )));
            }
            if bulk_to_surface[i].replace(s).is_some() {
                return Err(Error::InvariantViolation(format!(
                    "vertex {i} appears twice in the surface cycle"
                )));
            }
        }
        let mut surface_edges = Vec::with_capacity(p);
        for s in 0..p {
            let (a, b) = (surface_nodes[s], surface_nodes[(s + 1) % p]);
            if boundary_next.get(&a) != Some(&b) {
                return Err(Error::InvariantViolation(format!(
                    "surface cycle step {a} -> {b} is not a counterclockwise boundary edge \
                     (boundary is not a single closed cycle)"
                )));
            }
            surface_edges.push([a, b]);
        }

        let euler = nv as i64 - edges.len() as i64 + triangles.len() as i64;
        if euler != 1 {
            return Err(Error::InvariantViolation(format!(
                "Euler characteristic V - E + T = {euler}, expected 1"
            )));
        }

        Ok(Mesh {
            vertices,
            triangles,
            surface_nodes,
            surface_edges,
            bulk_to_surface,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary vertices in counterclockwise order.
    pub fn surface_nodes(&self) -> &[usize] {
        &self.surface_nodes
    }

    /// Closed polyline `surface_nodes[s] -> surface_nodes[s + 1]`, as bulk indices.
    pub fn surface_edges(&self) -> &[[usize; 2]] {
        &self.surface_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_surface(&self) -> usize {
        self.surface_nodes.len()
    }

    /// Bulk vertex carrying surface node `s`.
    pub fn trace_map(&self, s: usize) -> usize {
        self.surface_nodes[s]
    }

    /// Surface index of a bulk vertex, if it lies on the boundary.
    pub fn surface_index(&self, bulk: usize) -> Option<usize> {
        self.bulk_to_surface[bulk]
    }

    /// Position of surface node `s`.
    pub fn surface_point(&self, s: usize) -> Point {
        self.vertices[self.surface_nodes[s]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Length of surface edge `s` (from surface node `s` to `s + 1`).
    pub fn surface_edge_length(&self, s: usize) -> f64 {
        let [a, b] = self.surface_edges[s];
        distance(self.vertices[a], self.vertices[b])
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        let mut set = std::collections::HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.len()
    }

    /// Longest edge over all triangles.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|tri| {
                (0..3).map(move |k| (tri[k], tri[(k + 1) % 3]))
            })
            .map(|(a, b)| distance(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Largest triangle aspect ratio, normalized so that an equilateral
    /// triangle scores 1.
    pub fn max_aspect_ratio(&self) -> f64 {
        let norm = 4.0 / 3f64.sqrt();
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangles[t];
                let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                let longest = distance(pa, pb).max(distance(pb, pc)).max(distance(pc, pa));
                longest * longest / (norm * self.triangle_area(t))
            })
            .fold(0.0, f64::max)
    }

    /// Arclength position of every surface node, starting at 0 for node 0.
    pub fn surface_arclength(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.n_surface());
        let mut acc = 0.0;
        for e in 0..self.n_surface() {
            s.push(acc);
            acc += self.surface_edge_length(e);
        }
        s
    }
}

/// Total triangle area and total surface length.
pub fn measures(mesh: &Mesh) -> Measures {
    let area = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
    let perimeter = (0..mesh.n_surface()).map(|s| mesh.surface_edge_length(s)).sum();
    Measures { area, perimeter }
}
