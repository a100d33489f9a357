//! Plain-text mesh files.
//!
//! ```text
//! bse-mesh 1
//! vertices N
//! x y            (N lines)
//! triangles M
//! i j k          (M lines, 0-based, counterclockwise)
//! surface P
//! i              (P lines, boundary cycle in counterclockwise order)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, Point};
use crate::error::{Error, Result};

pub const MESH_HEADER: &str = "bse-mesh 1";

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    writeln!(out, "{MESH_HEADER}").unwrap();
    writeln!(out, "vertices {}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p[0], p[1]).unwrap();
    }
    writeln!(out, "triangles {}", mesh.triangles().len()).unwrap();
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "surface {}", mesh.n_surface()).unwrap();
    for s in mesh.surface_nodes() {
        writeln!(out, "{s}").unwrap();
    }
    out
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err(format!("unexpected end of file, expected {what}"))),
            }
        }
    }

    fn err(&self, message: String) -> Error {
        Error::MeshParse {
            line: self.line,
            message,
        }
    }

    fn section(&mut self, keyword: &str) -> Result<usize> {
        let l = self.next(keyword)?;
        let mut it = l.split_whitespace();
        if it.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword} <count>`, found `{l}`")));
        }
        let count = it
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| self.err(format!("missing or invalid {keyword} count")))?;
        if it.next().is_some() {
            return Err(self.err("trailing tokens".into()));
        }
        Ok(count)
    }

    fn numbers<T: std::str::FromStr, const N: usize>(&mut self, what: &str) -> Result<[T; N]> {
        let l = self.next(what)?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != N {
            return Err(self.err(format!("expected {N} values for {what}, found {}", parts.len())));
        }
        let mut vals = Vec::with_capacity(N);
        for p in parts {
            vals.push(p.parse::<T>().map_err(|_| self.err(format!("invalid {what} value `{p}`")))?);
        }
        Ok(vals.try_into().ok().expect("length checked"))
    }
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next("header")?;
    if header != MESH_HEADER {
        return Err(lines.err(format!("expected header `{MESH_HEADER}`, found `{header}`")));
    }
    let nv = lines.section("vertices")?;
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(lines.numbers::<f64, 2>("vertex")?);
    }
    let nt = lines.section("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        triangles.push(lines.numbers::<usize, 3>("triangle")?);
    }
    let ns = lines.section("surface")?;
    let mut surface = Vec::with_capacity(ns);
    for _ in 0..ns {
        surface.push(lines.numbers::<usize, 1>("surface node")?[0]);
    }
    if let Some((i, l)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::MeshParse {
            line: i + 1,
            message: format!("unexpected content after surface section: `{}`", l.trim()),
        });
    }
    Mesh::new(vertices, triangles, surface)
}
