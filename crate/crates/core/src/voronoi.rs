//! Spherical Voronoi diagrams via the convex hull.
//!
//! For points on the unit sphere the convex hull is the spherical Delaunay
//! triangulation. The Voronoi vertex dual to a hull facet is its unit outward
//! normal, and the cell of a point is the cycle of normals of the facets around
//! it. Consecutive vertices closer than [`MERGE_TOL`] are merged.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use crate::error::{Error, Result};
use crate::manifold::Configuration;
use crate::vec3::{self, Vec3};

/// Distance below which two Voronoi vertices are treated as one.
pub const MERGE_TOL: f64 = 1e-9;

const VISIBLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiDiagram {
    /// Cell vertices of each point, in cyclic order.
    pub cells: Vec<Vec<Vec3>>,
    pub side_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectSummary {
    pub n: usize,
    pub hex_fraction: f64,
    /// Number of cells with each side count.
    pub counts: BTreeMap<usize, usize>,
    pub defect_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurves {
    /// Largest hexagonal fraction when no cell has fewer than five sides.
    pub upper_bound: f64,
    /// Hexagonal fraction with twelve 5-7-5 scars.
    pub scar_line: f64,
    /// Set when `n ≤ 36` and the curves were clamped at zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    alive: bool,
}

struct Hull<'a> {
    pts: &'a [Vec3],
    faces: Vec<Face>,
    edges: HashMap<(usize, usize), usize>,
}

impl<'a> Hull<'a> {
    fn make_face(&self, v: [usize; 3]) -> Face {
        let [a, b, c] = v.map(|k| self.pts[k]);
        let nr = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        let normal = vec3::normalize(nr);
        Face { v, normal, offset: vec3::dot(normal, a), alive: true }
    }

    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let f = self.make_face(v);
        let id = self.faces.len();
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        self.faces.push(f);
        id
    }

    fn height(&self, f: usize, p: Vec3) -> f64 {
        vec3::dot(self.faces[f].normal, p) - self.faces[f].offset
    }

    fn build(pts: &'a [Vec3]) -> Result<Self> {
        let n = pts.len();
        let mut hull = Hull { pts, faces: Vec::with_capacity(2 * n), edges: HashMap::with_capacity(6 * n) };
        let [i0, i1, i2, i3] = initial_simplex(pts)?;
        let vol = vec3::dot(
            vec3::cross(vec3::sub(pts[i1], pts[i0]), vec3::sub(pts[i2], pts[i0])),
            vec3::sub(pts[i3], pts[i0]),
        );
        let (i1, i2) = if vol > 0.0 { (i2, i1) } else { (i1, i2) };
        for v in [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]] {
            hull.add_face(v);
        }
        for p in 0..n {
            if [i0, i1, i2, i3].contains(&p) {
                continue;
            }
            hull.insert(p)?;
        }
        Ok(hull)
    }

    fn insert(&mut self, p: usize) -> Result<()> {
        let x = self.pts[p];
        let start = (0..self.faces.len())
            .filter(|&f| self.faces[f].alive)
            .map(|f| (f, self.height(f, x)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((start, h)) = start else {
            return Err(Error::Unsupported("empty hull".into()));
        };
        if h <= VISIBLE_EPS {
            return Err(Error::Unsupported(format!("point {p} is not a vertex of the convex hull")));
        }
        let mut visible = vec![start];
        let mut seen = HashMap::from([(start, true)]);
        let mut queue = VecDeque::from([start]);
        let mut horizon = Vec::new();
        while let Some(f) = queue.pop_front() {
            let v = self.faces[f].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let g = self.edges[&(b, a)];
                let vis = *seen.entry(g).or_insert_with(|| {
                    let vis = self.height(g, x) > VISIBLE_EPS;
                    if vis {
                        visible.push(g);
                        queue.push_back(g);
                    }
                    vis
                });
                if !vis {
                    horizon.push((a, b));
                }
            }
        }
        for &f in &visible {
            self.faces[f].alive = false;
            let v = self.faces[f].v;
            for k in 0..3 {
                self.edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        for (a, b) in horizon {
            self.add_face([a, b, p]);
        }
        Ok(())
    }
}

fn initial_simplex(pts: &[Vec3]) -> Result<[usize; 4]> {
    let i0 = 0;
    let far = |f: &dyn Fn(Vec3) -> f64| {
        (0..pts.len()).map(|k| (k, f(pts[k]))).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
    };
    let (i1, d1) = far(&|x| vec3::norm2(vec3::sub(x, pts[i0])));
    let e = vec3::sub(pts[i1], pts[i0]);
    let (i2, d2) = far(&|x| vec3::norm2(vec3::cross(e, vec3::sub(x, pts[i0]))));
    let nrm = vec3::cross(e, vec3::sub(pts[i2], pts[i0]));
    let (i3, d3) = far(&|x| vec3::dot(nrm, vec3::sub(x, pts[i0])).abs());
    if d1 <= 0.0 || d2 <= 1e-24 || d3 <= 1e-18 {
        return Err(Error::Unsupported("points are coplanar".into()));
    }
    Ok([i0, i1, i2, i3])
}

/// Voronoi cells of a sphere configuration.
pub fn spherical_voronoi(config: &Configuration) -> Result<VoronoiDiagram> {
    if !config.manifold().is_sphere() {
        return Err(Error::Unsupported("Voronoi diagrams are computed on the sphere only".into()));
    }
    voronoi_of_points(&config.points())
}

pub fn voronoi_of_points(pts: &[Vec3]) -> Result<VoronoiDiagram> {
    let n = pts.len();
    if n < 4 {
        return Err(Error::Unsupported(format!("need at least four points, got {n}")));
    }
    let hull = Hull::build(pts)?;
    let alive: Vec<&Face> = hull.faces.iter().filter(|f| f.alive).collect();
    if alive.iter().any(|f| f.offset <= VISIBLE_EPS) {
        return Err(Error::Unsupported("the points lie in a closed hemisphere".into()));
    }
    let mut incident = vec![usize::MAX; n];
    for (id, f) in hull.faces.iter().enumerate() {
        if f.alive {
            for &v in &f.v {
                incident[v] = id;
            }
        }
    }
    let mut cells = Vec::with_capacity(n);
    let mut side_counts = Vec::with_capacity(n);
    for (i, &first) in incident.iter().enumerate() {
        if first == usize::MAX {
            return Err(Error::Unsupported(format!("point {i} is not a vertex of the convex hull")));
        }
        let mut cell: Vec<Vec3> = Vec::new();
        let mut f = first;
        loop {
            let face = &hull.faces[f];
            cell.push(face.normal);
            let k = face.v.iter().position(|&v| v == i).unwrap();
            let b = face.v[(k + 2) % 3];
            f = hull.edges[&(i, b)];
            if f == first {
                break;
            }
            if cell.len() > 2 * n {
                return Err(Error::Unsupported(format!("cell walk around point {i} did not close")));
            }
        }
        let mut merged: Vec<Vec3> = Vec::with_capacity(cell.len());
        for v in cell {
            if merged.last().is_none_or(|&u| vec3::norm(vec3::sub(u, v)) > MERGE_TOL) {
                merged.push(v);
            }
        }
        while merged.len() > 1 && vec3::norm(vec3::sub(merged[0], *merged.last().unwrap())) <= MERGE_TOL {
            merged.pop();
        }
        if merged.len() < 3 {
            return Err(Error::Unsupported(format!("cell of point {i} collapsed to {} vertices", merged.len())));
        }
        side_counts.push(merged.len());
        cells.push(merged);
    }
    let euler: i64 = side_counts.iter().map(|&v| 6 - v as i64).sum();
    if euler != 12 {
        return Err(Error::Unsupported(format!(
            "degenerate Voronoi vertices: side-count sum gives {euler} instead of 12"
        )));
    }
    Ok(VoronoiDiagram { cells, side_counts })
}

pub fn defect_summary(diagram: &VoronoiDiagram) -> DefectSummary {
    let n = diagram.side_counts.len();
    let mut counts = BTreeMap::new();
    for &v in &diagram.side_counts {
        *counts.entry(v).or_insert(0) += 1;
    }
    let hex = counts.get(&6).copied().unwrap_or(0);
    DefectSummary { n, hex_fraction: hex as f64 / n as f64, counts, defect_count: n - hex }
}

pub fn bound_curves(n: usize) -> BoundCurves {
    let nf = n as f64;
    BoundCurves {
        upper_bound: ((nf - 12.0) / nf).max(0.0),
        scar_line: ((nf - 36.0) / nf).max(0.0),
        degenerate: n <= 36,
    }
}

/// Writes one CSV row per cell vertex:
/// `point,sides,point_energy,vertex,x,y,z`. The energy column is empty when
/// no point energies are supplied.
pub fn write_cells_csv<W: Write>(diagram: &VoronoiDiagram, energies: Option<&[f64]>, mut out: W) -> Result<()> {
    writeln!(out, "point,sides,point_energy,vertex,x,y,z")?;
    for (i, cell) in diagram.cells.iter().enumerate() {
        let e = energies.and_then(|e| e.get(i)).map(|e| format!("{e:.16e}")).unwrap_or_default();
        for (k, v) in cell.iter().enumerate() {
            writeln!(out, "{i},{},{e},{k},{:.16e},{:.16e},{:.16e}", cell.len(), v[0], v[1], v[2])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{random_config, Manifold};

    pub(crate) fn icosahedron() -> Vec<Vec3> {
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let mut p = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-g, g] {
                p.push([0.0, a, b]);
                p.push([a, b, 0.0]);
                p.push([b, 0.0, a]);
            }
        }
        p.into_iter().map(vec3::normalize).collect()
    }

    #[test]
    fn tetrahedron_cells() {
        let s = 1.0 / 3f64.sqrt();
        let d = voronoi_of_points(&[[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]]).unwrap();
        assert_eq!(d.side_counts, vec![3, 3, 3, 3]);
    }

    #[test]
    fn icosahedron_cells() {
        let d = voronoi_of_points(&icosahedron()).unwrap();
        assert!(d.side_counts.iter().all(|&v| v == 5));
        let s = defect_summary(&d);
        assert_eq!(s.defect_count, 12);
        assert_eq!(s.hex_fraction, 0.0);
    }

    #[test]
    fn summary_arithmetic() {
        let n = 100;
        let side_counts: Vec<usize> = (0..n).map(|i| if i < 12 { 5 } else { 6 }).collect();
        let d = VoronoiDiagram { cells: vec![vec![]; n], side_counts };
        assert_eq!(defect_summary(&d).hex_fraction, 88.0 / 100.0);
    }

    #[test]
    fn bound_curve_values() {
        let b = bound_curves(100);
        assert!((b.upper_bound - 0.88).abs() < 1e-15 && (b.scar_line - 0.64).abs() < 1e-15 && !b.degenerate);
        let b = bound_curves(4352);
        assert!((b.upper_bound - 4340.0 / 4352.0).abs() < 1e-15);
        assert!((b.scar_line - 4316.0 / 4352.0).abs() < 1e-15);
        let b = bound_curves(12);
        assert_eq!(b.upper_bound, 0.0);
        assert!(b.degenerate);
    }

    #[test]
    fn random_points_satisfy_euler_and_containment() {
        for seed in 0..10 {
            let c = random_config(Manifold::Sphere, 150, seed, 0.5).unwrap();
            let pts = c.points();
            let d = spherical_voronoi(&c).unwrap();
            assert_eq!(d.side_counts.iter().map(|&v| 6 - v as i64).sum::<i64>(), 12);
            for (i, cell) in d.cells.iter().enumerate() {
                for v in cell {
                    let own = vec3::dot(*v, pts[i]);
                    assert!(pts.iter().all(|x| own >= vec3::dot(*v, *x) - 1e-9));
                }
            }
        }
    }

    #[test]
    fn hemisphere_is_rejected() {
        let pts: Vec<Vec3> = (0..10)
            .map(|k| {
                let t = 0.3 + 0.1 * k as f64;
                vec3::normalize([t.cos(), t.sin(), 0.2 + 0.05 * k as f64])
            })
            .collect();
        assert!(matches!(voronoi_of_points(&pts), Err(Error::Unsupported(_))));
        assert!(voronoi_of_points(&pts[..3]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_vertex() {
        let d = voronoi_of_points(&icosahedron()).unwrap();
        let mut buf = Vec::new();
        write_cells_csv(&d, Some(&[1.0; 12]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 60);
    }
}
