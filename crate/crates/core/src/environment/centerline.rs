//! Lumen openings and maximal-clearance centerline extraction for tubular
//! meshes with exactly two open ends.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bvh, TriMesh, Vec3};

/// An open end of the vessel, approximated as a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub centroid: Vec3<f64>,
    /// Unit normal pointing out of the lumen.
    pub normal: Vec3<f64>,
    pub radius: f64,
}

impl Opening {
    /// Whether the segment `a -> b` passes outward through the disk (with a
    /// 50% radius margin for ragged rims).
    pub fn crossed_outward(&self, a: Vec3<f64>, b: Vec3<f64>) -> bool {
        let sa = (a - self.centroid).dot(self.normal);
        let sb = (b - self.centroid).dot(self.normal);
        if !(sa <= 0.0 && sb > 0.0) {
            return false;
        }
        let x = a.lerp(b, -sa / (sb - sa));
        x.distance(self.centroid) <= 1.5 * self.radius
    }
}

/// Openings of the mesh, one per boundary loop. The outward normal points
/// from the ring of vertices adjacent to the loop toward the loop centroid.
pub fn openings(mesh: &TriMesh<f64>) -> Result<Vec<Opening>> {
    let loops = mesh.boundary_loops()?;
    let mut out = Vec::with_capacity(loops.len());
    for l in loops {
        let mut on_loop = vec![false; mesh.vertices.len()];
        for &v in &l.vertices {
            on_loop[v] = true;
        }
        let (mut sum, mut n) = (Vec3::zero(), 0usize);
        for (a, b) in mesh.edges() {
            let inner = match (on_loop[a], on_loop[b]) {
                (true, false) => b,
                (false, true) => a,
                _ => continue,
            };
            sum += mesh.vertices[inner];
            n += 1;
        }
        if n == 0 {
            return Err(Error::Extraction("boundary loop has no interior neighbours".into()));
        }
        let normal = (l.centroid - sum / n as f64)
            .try_normalize()
            .ok_or_else(|| Error::Extraction("degenerate boundary loop".into()))?;
        out.push(Opening { centroid: l.centroid, normal, radius: l.radius });
    }
    Ok(out)
}

/// Splits openings into (inlet, outlet). The inlet is the opening nearest
/// `hint` when given, otherwise the first loop found.
pub fn inlet_outlet(openings: &[Opening], hint: Option<Vec3<f64>>) -> Result<(Opening, Opening)> {
    if openings.len() != 2 {
        return Err(Error::Extraction(format!("expected two open ends, found {}", openings.len())));
    }
    let (a, b) = (openings[0], openings[1]);
    Ok(match hint {
        Some(h) if b.centroid.distance(h) < a.centroid.distance(h) => (b, a),
        _ => (a, b),
    })
}

const RING_RAYS: usize = 16;
const RECENTER_ITERATIONS: usize = 4;

/// Marches from the inlet centroid to the outlet centroid in steps of
/// `spacing`, re-centring each new point on the mean of wall hits of a ring
/// of rays in the plane normal to the marching direction.
pub fn extract_centerline(mesh: &TriMesh<f64>, inlet_hint: Option<Vec3<f64>>, spacing: f64) -> Result<Vec<Vec3<f64>>> {
    if !(spacing > 0.0) {
        return Err(Error::config("centerline spacing must be positive"));
    }
    let (inlet, outlet) = inlet_outlet(&openings(mesh)?, inlet_hint)?;
    let bvh = Bvh::build(&mesh.vertices, &mesh.triangles);
    let reach = 4.0 * inlet.radius.max(outlet.radius);
    let (lo, hi) = mesh.bounds();
    let max_points = (4.0 * (hi - lo).norm() / spacing).ceil() as usize + 8;

    // midpoint of opposite wall hits, averaged over the ring; pairs where a
    // ray slips through a mesh edge are skipped
    let recenter = |p: Vec3<f64>, dir: Vec3<f64>| -> Option<Vec3<f64>> {
        let e1 = dir.any_orthogonal().normalize();
        let e2 = dir.cross(e1);
        let cast = |d: Vec3<f64>| bvh.raycast(&mesh.vertices, &mesh.triangles, p, d, reach).map(|(t, _)| p + d * t);
        let mut sum = Vec3::zero();
        let mut pairs = 0usize;
        for k in 0..RING_RAYS / 2 {
            let phi = std::f64::consts::TAU * (k as f64 + 0.37) / RING_RAYS as f64;
            let d = (e1 * phi.cos() + e2 * phi.sin()).normalize();
            if let (Some(a), Some(b)) = (cast(d), cast(-d)) {
                sum += (a + b) * 0.5;
                pairs += 1;
            }
        }
        (pairs * 4 >= RING_RAYS).then(|| sum / pairs as f64)
    };

    let mut points = vec![inlet.centroid];
    let mut p = inlet.centroid;
    let mut dir = -inlet.normal;
    loop {
        if points.len() > max_points {
            return Err(Error::Extraction("centerline march did not reach the outlet".into()));
        }
        let mut q = p + dir * spacing;
        if (q - outlet.centroid).dot(outlet.normal) >= -0.5 * spacing {
            if p.distance(outlet.centroid) > spacing {
                points.push(p.lerp(outlet.centroid, 0.5));
            }
            points.push(outlet.centroid);
            return Ok(points);
        }
        for _ in 0..RECENTER_ITERATIONS {
            q = recenter(q, dir).ok_or_else(|| Error::Extraction(format!("centerline left the lumen near {q:?}")))?;
        }
        let step = q - p;
        dir = step.try_normalize().unwrap_or(dir);
        // keep spacing exact after re-centring
        q = p + dir * step.norm().min(spacing);
        points.push(q);
        p = q;
    }
}

/// Reads a centerline text file: one `x y z` triple per line; blank lines
/// and `#` comments are ignored.
pub fn load_centerline(path: impl AsRef<Path>) -> Result<Vec<Vec3<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_centerline(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

pub fn parse_centerline(text: &str) -> Result<Vec<Vec3<f64>>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let c: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        if c.len() != 3 {
            return Err(format!("line {}: expected three numbers", n + 1));
        }
        out.push(Vec3::new(c[0], c[1], c[2]));
    }
    if out.len() < 2 {
        return Err("a centerline needs at least two points".into());
    }
    Ok(out)
}

pub fn write_centerline(points: &[Vec3<f64>], mut w: impl std::io::Write) -> Result<()> {
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}
