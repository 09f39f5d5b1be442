use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::Vec3;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Indexed triangle mesh. Triangles are wound so that face normals point out
/// of the lumen.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<S> {
    pub vertices: Vec<Vec3<S>>,
    pub triangles: Vec<[usize; 3]>,
}

/// A closed chain of boundary edges: an open end of a tube.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop<S> {
    pub vertices: Vec<usize>,
    pub centroid: Vec3<S>,
    /// Mean distance from the centroid to the loop vertices.
    pub radius: S,
}

impl<S: Real> TriMesh<S> {
    pub fn new(vertices: Vec<Vec3<S>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((i, t)) = triangles.iter().enumerate().find(|(_, t)| t.iter().any(|&v| v >= n)) {
            return Err(Error::Mesh(format!("triangle {i} references vertex {t:?} of {n}")));
        }
        if let Some(i) = triangles.iter().position(|t| t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            return Err(Error::Mesh(format!("triangle {i} is degenerate")));
        }
        Ok(Self { vertices, triangles })
    }

    /// Reads an ASCII Wavefront OBJ file. Only `v` and `f` records are used;
    /// polygons are fan-triangulated and vertex order is kept as written.
    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_obj(&text).map_err(|e| Error::Mesh(format!("{}: {e}", path.display())))
    }

    pub fn parse_obj(text: &str) -> Result<Self, String> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it.take(3).map(str::parse).collect::<Result<_, _>>().map_err(|e| format!("line {}: {e}", n + 1))?;
                    if c.len() != 3 {
                        return Err(format!("line {}: vertex needs three coordinates", n + 1));
                    }
                    vertices.push(Vec3::new(S::lit(c[0]), S::lit(c[1]), S::lit(c[2])));
                }
                Some("f") => {
                    let idx = it
                        .map(|tok| {
                            let raw: i64 = tok.split('/').next().unwrap_or("").parse().map_err(|e| format!("line {}: {e}", n + 1))?;
                            let i = if raw < 0 { vertices.len() as i64 + raw } else { raw - 1 };
                            usize::try_from(i).map_err(|_| format!("line {}: bad vertex reference {raw}", n + 1))
                        })
                        .collect::<Result<Vec<usize>, String>>()?;
                    if idx.len() < 3 {
                        return Err(format!("line {}: face needs at least three vertices", n + 1));
                    }
                    triangles.extend((1..idx.len() - 1).map(|k| [idx[0], idx[k], idx[k + 1]]));
                }
                _ => {}
            }
        }
        if triangles.is_empty() {
            return Err("no triangles".into());
        }
        Self::new(vertices, triangles).map_err(|e| e.to_string())
    }

    pub fn write_obj(&self, mut w: impl Write) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_obj(std::io::BufWriter::new(f))
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn bounds(&self) -> (Vec3<S>, Vec3<S>) {
        let inf = S::infinity();
        self.vertices.iter().fold(
            (Vec3::new(inf, inf, inf), Vec3::new(-inf, -inf, -inf)),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    /// Open boundary loops. Fails on non-manifold edges or boundary chains
    /// that do not close.
    pub fn boundary_loops(&self) -> Result<Vec<BoundaryLoop<S>>> {
        let mut use_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *use_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, _)) = use_count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Mesh(format!("non-manifold edge {e:?}")));
        }
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if use_count[&(a.min(b), a.max(b))] == 1 {
                    next.entry(a).or_default().push(b);
                }
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut visited = vec![false; self.vertices.len()];
        let mut loops = Vec::new();
        for start in starts {
            if visited[start] {
                continue;
            }
            let mut chain = vec![start];
            visited[start] = true;
            let mut cur = start;
            loop {
                let succ = next
                    .get(&cur)
                    .and_then(|s| s.first().copied())
                    .ok_or_else(|| Error::Mesh(format!("boundary chain breaks at vertex {cur}")))?;
                if succ == start {
                    break;
                }
                if visited[succ] {
                    return Err(Error::Mesh(format!("boundary chain revisits vertex {succ}")));
                }
                visited[succ] = true;
                chain.push(succ);
                cur = succ;
            }
            let n = S::of_count(chain.len());
            let centroid = chain.iter().fold(Vec3::zero(), |acc, &i| acc + self.vertices[i]) / n;
            let radius = chain.iter().map(|&i| self.vertices[i].distance(centroid)).sum::<S>() / n;
            loops.push(BoundaryLoop { vertices: chain, centroid, radius });
        }
        Ok(loops)
    }

    /// Area-weighted vertex normals for the given vertex positions (which may
    /// be a deformed copy of `self.vertices`).
    pub fn vertex_normals(&self, positions: &[Vec3<S>]) -> Vec<Vec3<S>> {
        area_weighted_normals(&self.triangles, positions)
    }
}

pub fn area_weighted_normals<S: Real>(triangles: &[[usize; 3]], positions: &[Vec3<S>]) -> Vec<Vec3<S>> {
    let mut normals = vec![Vec3::zero(); positions.len()];
    for t in triangles {
        let (a, b, c) = (positions[t[0]], positions[t[1]], positions[t[2]]);
        // unnormalised cross product is already area weighted
        let n = (b - a).cross(c - a);
        for &i in t {
            normals[i] += n;
        }
    }
    normals.into_iter().map(Vec3::normalize).collect()
}

/// One piece of a planar tube centerline.
#[derive(Debug, Clone, Copy)]
enum Piece {
    Straight(f64),
    /// Turn radius and signed angle (positive turns left, about +z).
    Arc(f64, f64),
}

/// Procedural tubular vessel: a circular cross-section swept along a
/// centerline made of straight runs and planar arcs. The centerline starts at
/// the origin heading along +y in the x-y plane.
#[derive(Debug, Clone)]
pub struct TubeBuilder {
    radius: f64,
    segments: usize,
    spacing: f64,
    pieces: Vec<Piece>,
}

impl TubeBuilder {
    pub fn new(radius: f64) -> Self {
        Self { radius, segments: 16, spacing: 2.0, pieces: Vec::new() }
    }

    /// Vertices per cross-section ring.
    pub fn segments(mut self, n: usize) -> Self {
        self.segments = n.max(3);
        self
    }

    /// Target distance between consecutive rings.
    pub fn spacing(mut self, s: f64) -> Self {
        self.spacing = s;
        self
    }

    pub fn straight(mut self, length: f64) -> Self {
        self.pieces.push(Piece::Straight(length));
        self
    }

    pub fn arc(mut self, turn_radius: f64, angle: f64) -> Self {
        self.pieces.push(Piece::Arc(turn_radius, angle));
        self
    }

    /// Densely sampled centerline (ring centers) and unit tangents.
    pub fn centerline<S: Real>(&self) -> (Vec<Vec3<S>>, Vec<Vec3<S>>) {
        let mut pts = vec![[0.0, 0.0, 0.0]];
        let mut tangents = vec![[0.0, 1.0, 0.0]];
        let mut pos = [0.0f64, 0.0, 0.0];
        let mut heading = 0.0f64;
        for piece in &self.pieces {
            match *piece {
                Piece::Straight(len) => {
                    let n = (len / self.spacing).ceil().max(1.0) as usize;
                    let d = [-heading.sin(), heading.cos(), 0.0];
                    for k in 1..=n {
                        let s = len * k as f64 / n as f64;
                        pts.push([pos[0] + d[0] * s, pos[1] + d[1] * s, 0.0]);
                        tangents.push(d);
                    }
                    pos = [pos[0] + d[0] * len, pos[1] + d[1] * len, 0.0];
                }
                Piece::Arc(r, angle) => {
                    let sign = angle.signum();
                    let left = |h: f64| [-h.cos(), -h.sin()];
                    let l0 = left(heading);
                    let center = [pos[0] + sign * r * l0[0], pos[1] + sign * r * l0[1]];
                    let n = ((r * angle.abs()) / self.spacing).ceil().max(1.0) as usize;
                    for k in 1..=n {
                        let phi = angle * k as f64 / n as f64;
                        let l = left(heading + phi);
                        pts.push([center[0] - sign * r * l[0], center[1] - sign * r * l[1], 0.0]);
                        let h = heading + phi;
                        tangents.push([-h.sin(), h.cos(), 0.0]);
                    }
                    let l = left(heading + angle);
                    pos = [center[0] - sign * r * l[0], center[1] - sign * r * l[1], 0.0];
                    heading += angle;
                }
            }
        }
        (
            pts.into_iter().map(Vec3::from_f64).collect(),
            tangents.into_iter().map(Vec3::from_f64).collect(),
        )
    }

    /// Open tube mesh with outward-facing triangles. The first and last rings
    /// are the two boundary loops.
    pub fn build<S: Real>(&self) -> TriMesh<S> {
        let (centers, tangents) = self.centerline::<S>();
        let m = self.segments;
        let r = S::lit(self.radius);
        let mut vertices = Vec::with_capacity(centers.len() * m);
        let mut normal = tangents[0].any_orthogonal();
        for (c, t) in centers.iter().zip(&tangents) {
            // parallel transport of the ring frame
            normal = (normal - *t * normal.dot(*t)).normalize();
            let binormal = t.cross(normal);
            for j in 0..m {
                let theta = S::TAU() * S::of_count(j) / S::of_count(m);
                vertices.push(*c + (normal * theta.cos() + binormal * theta.sin()) * r);
            }
        }
        let mut triangles = Vec::with_capacity(2 * m * (centers.len() - 1));
        for i in 0..centers.len() - 1 {
            for j in 0..m {
                let a = i * m + j;
                let b = i * m + (j + 1) % m;
                let c = (i + 1) * m + j;
                let d = (i + 1) * m + (j + 1) % m;
                triangles.push([a, b, c]);
                triangles.push([b, d, c]);
            }
        }
        TriMesh { vertices, triangles }
    }
}
