//! Directions on the L1 unit simplex, reference-angle meshes and point
//! location.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Barycentric tolerance used by point location.
pub const LOCATE_TOL: f64 = 1e-10;

/// Direction on the L1 unit simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Angle {
    coords: Vec<f64>,
}

impl Angle {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 || coords.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(coords.len()));
        }
        if coords.iter().any(|&c| !(c >= 0.0)) {
            return Err(invalid("angle coordinates must be non-negative"));
        }
        let s: f64 = coords.iter().sum();
        if libm::fabs(s - 1.0) > 1e-12 {
            return Err(invalid(format!("angle coordinates sum to {s}, not 1")));
        }
        Ok(Angle { coords })
    }

    /// Splits a non-negative point into its L1 radius and direction.
    pub fn from_point(x: &[f64]) -> Result<(f64, Angle)> {
        if x.iter().any(|&c| !(c >= 0.0)) {
            return Err(invalid("point must be non-negative"));
        }
        let r: f64 = x.iter().sum();
        if r == 0.0 {
            return Err(Error::ZeroVector);
        }
        let coords = x.iter().map(|&c| c / r).collect();
        Ok((r, Angle { coords }))
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }
}

/// Angle on the L1 circle used for two-dimensional Laplace margins.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LaplaceAngle(f64);

impl LaplaceAngle {
    pub fn new(w: f64) -> Result<Self> {
        if (-2.0..2.0).contains(&w) {
            Ok(LaplaceAngle(w))
        } else {
            Err(invalid("Laplace angle must lie in [-2, 2)"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Point on the L1 unit circle with this angle.
    pub fn direction(self) -> [f64; 2] {
        let w = self.0;
        let u1 = 1.0 - libm::fabs(w);
        let u2 = if w >= 0.0 { 1.0 - libm::fabs(w - 1.0) } else { libm::fabs(w + 1.0) - 1.0 };
        [u1, u2]
    }
}

pub fn laplace_decompose(x: [f64; 2]) -> Result<(f64, LaplaceAngle)> {
    let r = libm::fabs(x[0]) + libm::fabs(x[1]);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::ZeroVector);
    }
    let sign = if x[1] < 0.0 { -1.0 } else { 1.0 };
    let mut w = sign * (1.0 - x[0] / r);
    if w >= 2.0 {
        w = -2.0;
    }
    Ok((r, LaplaceAngle(w)))
}

pub fn laplace_recompose(r: f64, w: LaplaceAngle) -> [f64; 2] {
    let u = w.direction();
    [r * u[0], r * u[1]]
}

/// Geometry of the mesh domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Non-negative orthant; nodes lie on the L1 unit simplex.
    #[default]
    Simplex,
    /// Whole plane in two dimensions; nodes lie on the L1 unit circle.
    LaplaceCircle,
}

#[derive(Clone, Debug)]
struct Frame {
    origin: Vec<f64>,
    inv: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MeshRecord {
    dim: usize,
    #[serde(default)]
    domain: Domain,
    nodes: Vec<Vec<f64>>,
    regions: Vec<Vec<usize>>,
}

/// Reference angles together with their triangulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MeshRecord", into = "MeshRecord")]
pub struct SimplexMesh {
    dim: usize,
    domain: Domain,
    nodes: Vec<Vec<f64>>,
    regions: Vec<Vec<usize>>,
    neighbor_pairs: Vec<Vec<(usize, usize)>>,
    frames: Vec<Frame>,
    circle_angles: Vec<f64>,
}

impl TryFrom<MeshRecord> for SimplexMesh {
    type Error = Error;
    fn try_from(r: MeshRecord) -> Result<Self> {
        match r.domain {
            Domain::Simplex => SimplexMesh::from_parts(r.dim, r.nodes, r.regions),
            Domain::LaplaceCircle => {
                let mut ws = Vec::with_capacity(r.nodes.len());
                for n in &r.nodes {
                    if n.len() != 2 {
                        return Err(Error::UnsupportedDimension(n.len()));
                    }
                    ws.push(laplace_decompose([n[0], n[1]])?.1.value());
                }
                SimplexMesh::laplace_from_angles(&ws)
            }
        }
    }
}

impl From<SimplexMesh> for MeshRecord {
    fn from(m: SimplexMesh) -> Self {
        MeshRecord { dim: m.dim, domain: m.domain, nodes: m.nodes, regions: m.regions }
    }
}

fn project(w: &[f64]) -> &[f64] {
    &w[..w.len() - 1]
}

fn cell_volume(points: &[Vec<f64>], verts: &[usize]) -> f64 {
    let k = verts.len() - 1;
    let p0 = &points[verts[0]];
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            m[i * k + j] = points[verts[i + 1]][j] - p0[j];
        }
    }
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    libm::fabs(linalg::det(&m, k)) / fact
}

fn circumsphere(points: &[Vec<f64>], verts: &[usize]) -> Option<(Vec<f64>, f64)> {
    let k = verts.len() - 1;
    let p0 = &points[verts[0]];
    let n0: f64 = p0.iter().map(|v| v * v).sum();
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for i in 0..k {
        let pi = &points[verts[i + 1]];
        for j in 0..k {
            a[i * k + j] = 2.0 * (pi[j] - p0[j]);
        }
        b[i] = pi.iter().map(|v| v * v).sum::<f64>() - n0;
    }
    let c = linalg::solve(&a, k, &b).ok()?;
    let r2 = linalg::dist2(&c, p0);
    Some((c, r2))
}

struct Cell {
    verts: Vec<usize>,
    center: Vec<f64>,
    r2: f64,
}

/// Bowyer-Watson on projected points, seeded with the cell at `seed`.
fn bowyer_watson(points: &[Vec<f64>], seed: Vec<usize>, order: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = seed.len() - 1;
    let (center, r2) = circumsphere(points, &seed).ok_or_else(|| Error::DegenerateNodes("flat seed simplex".into()))?;
    let mut cells = vec![Cell { verts: seed, center, r2 }];
    let flat = 1e-14;
    for &p in order {
        let q = &points[p];
        let (bad, good): (Vec<Cell>, Vec<Cell>) =
            cells.into_iter().partition(|c| linalg::dist2(q, &c.center) < c.r2 * (1.0 - 1e-9));
        if bad.is_empty() {
            return Err(Error::DegenerateNodes(format!("node {p} duplicates an existing node")));
        }
        cells = good;
        let mut facets: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for c in &bad {
            for skip in 0..=k {
                let mut f: Vec<usize> = c.verts.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                f.sort_unstable();
                *facets.entry(f).or_insert(0) += 1;
            }
        }
        for (f, count) in facets {
            if count != 1 {
                continue;
            }
            let mut verts = f;
            verts.push(p);
            if cell_volume(points, &verts) < flat {
                continue;
            }
            let (center, r2) = circumsphere(points, &verts)
                .ok_or_else(|| Error::DegenerateNodes("flat simplex in triangulation".into()))?;
            cells.push(Cell { verts, center, r2 });
        }
    }
    Ok(cells.into_iter().map(|c| c.verts).collect())
}

impl SimplexMesh {
    /// Validates nodes and regions and derives neighbour pairs and
    /// location frames.
    pub fn from_parts(dim: usize, nodes: Vec<Vec<f64>>, regions: Vec<Vec<usize>>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        for n in &nodes {
            if n.len() != dim {
                return Err(invalid("node has wrong dimension"));
            }
            Angle::new(n.clone())?;
        }
        let k = dim - 1;
        let mut frames = Vec::with_capacity(regions.len());
        let mut used = vec![false; nodes.len()];
        for (ri, r) in regions.iter().enumerate() {
            if r.len() != dim {
                return Err(invalid(format!("region {ri} must have {dim} vertices")));
            }
            for &v in r {
                if v >= nodes.len() {
                    return Err(invalid(format!("region {ri} references missing node {v}")));
                }
                used[v] = true;
            }
            let origin = project(&nodes[r[0]]).to_vec();
            let mut t = vec![0.0; k * k];
            for col in 0..k {
                let p = project(&nodes[r[col + 1]]);
                for row in 0..k {
                    t[row * k + col] = p[row] - origin[row];
                }
            }
            let inv = linalg::inverse(&t, k).map_err(|_| Error::DegenerateRegion(ri))?;
            frames.push(Frame { origin, inv });
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(invalid(format!("node {v} belongs to no region")));
        }
        let neighbor_pairs = neighbor_pairs(nodes.len(), &regions, dim);
        Ok(SimplexMesh {
            dim,
            domain: Domain::Simplex,
            nodes,
            regions,
            neighbor_pairs,
            frames,
            circle_angles: Vec::new(),
        })
    }

    /// Delaunay triangulation of the projection that drops the last
    /// coordinate. The node set must contain every simplex vertex.
    pub fn delaunay(dim: usize, nodes: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if nodes.len() < dim {
            return Err(Error::DegenerateNodes("fewer nodes than dimensions".into()));
        }
        for n in &nodes {
            if n.len() != dim {
                return Err(invalid("node has wrong dimension"));
            }
            Angle::new(n.clone())?;
        }
        let mut seed = Vec::with_capacity(dim);
        for j in 0..dim {
            let pos = nodes.iter().position(|n| n.iter().enumerate().all(|(i, &v)| if i == j { v == 1.0 } else { v == 0.0 }));
            match pos {
                Some(p) => seed.push(p),
                None => return Err(Error::DegenerateNodes(format!("simplex vertex e{} is not a node", j + 1))),
            }
        }
        let points: Vec<Vec<f64>> = nodes.iter().map(|n| project(n).to_vec()).collect();
        let order: Vec<usize> = (0..nodes.len()).filter(|i| !seed.contains(i)).collect();
        let mut regions = bowyer_watson(&points, seed, &order)?;
        let k = dim - 1;
        let total: f64 = regions.iter().map(|r| cell_volume(&points, r)).sum();
        let hull: f64 = 1.0 / (1..=k).map(|i| i as f64).product::<f64>();
        if libm::fabs(total - hull) > 1e-9 * hull {
            return Err(Error::DegenerateNodes(format!("triangulation covers {total} of {hull}")));
        }
        for r in regions.iter_mut() {
            r.sort_unstable();
        }
        regions.sort();
        SimplexMesh::from_parts(dim, nodes, regions)
    }

    /// Equally spaced mesh: `resolution` nodes for d = 2 (odd, so that
    /// 1/2 is a node) and the grid with spacing `1/resolution` for d = 3.
    pub fn regular(dim: usize, resolution: usize) -> Result<Self> {
        match dim {
            2 => {
                if resolution < 3 || resolution % 2 == 0 {
                    return Err(invalid("d = 2 meshes need an odd number of at least 3 nodes"));
                }
                let m = (resolution - 1) as f64;
                let nodes = (0..resolution).map(|i| vec![i as f64 / m, (resolution - 1 - i) as f64 / m]).collect();
                SimplexMesh::delaunay(2, nodes)
            }
            3 => {
                if resolution < 2 {
                    return Err(invalid("d = 3 meshes need a resolution of at least 2"));
                }
                let m = resolution;
                let mut nodes = Vec::new();
                for i in 0..=m {
                    for j in 0..=m - i {
                        let l = m - i - j;
                        nodes.push(vec![i as f64 / m as f64, j as f64 / m as f64, l as f64 / m as f64]);
                    }
                }
                SimplexMesh::delaunay(3, nodes)
            }
            _ => Err(Error::UnsupportedDimension(dim)),
        }
    }

    /// Simplex vertices, the centre and the centre of every face. With
    /// `refine`, the centroid of every initial region is added.
    pub fn sparse(dim: usize, refine: bool) -> Result<Self> {
        if !(4..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let nodes = sparse_nodes(dim);
        let mesh = SimplexMesh::delaunay(dim, nodes)?;
        if !refine {
            return Ok(mesh);
        }
        let mut nodes = mesh.nodes.clone();
        for r in &mesh.regions {
            let mut c = vec![0.0; dim];
            for &v in r {
                for j in 0..dim {
                    c[j] += mesh.nodes[v][j] / dim as f64;
                }
            }
            let s: f64 = c.iter().sum();
            c.iter_mut().for_each(|v| *v /= s);
            nodes.push(c);
        }
        SimplexMesh::delaunay(dim, nodes)
    }

    /// Mesh on the L1 circle with `n` equally spaced angles starting at -2.
    pub fn laplace(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(invalid("Laplace meshes need at least 4 nodes"));
        }
        let ws: Vec<f64> = (0..n).map(|k| -2.0 + 4.0 * k as f64 / n as f64).collect();
        SimplexMesh::laplace_from_angles(&ws)
    }

    pub fn laplace_from_angles(ws: &[f64]) -> Result<Self> {
        let mut ws = ws.to_vec();
        ws.sort_by(f64::total_cmp);
        if ws.len() < 4 {
            return Err(invalid("Laplace meshes need at least 4 nodes"));
        }
        for w in ws.windows(2) {
            if w[1] - w[0] <= 0.0 {
                return Err(Error::DegenerateNodes("repeated Laplace angle".into()));
            }
        }
        let n = ws.len();
        if ws[n - 1] - ws[0] >= 4.0 {
            return Err(Error::DegenerateNodes("Laplace angles overlap".into()));
        }
        let mut nodes = Vec::with_capacity(n);
        for &w in &ws {
            nodes.push(LaplaceAngle::new(w)?.direction().to_vec());
        }
        // every gap must stay below a half turn so that each cone is convex
        for k in 0..n {
            let next = if k + 1 < n { ws[k + 1] } else { ws[0] + 4.0 };
            if next - ws[k] >= 2.0 {
                return Err(Error::DegenerateNodes("Laplace angles leave a gap of a half turn".into()));
            }
        }
        let regions: Vec<Vec<usize>> = (0..n).map(|k| vec![k, (k + 1) % n]).collect();
        let neighbor_pairs = neighbor_pairs(n, &regions, 2);
        Ok(SimplexMesh {
            dim: 2,
            domain: Domain::LaplaceCircle,
            nodes,
            regions,
            neighbor_pairs,
            frames: Vec::new(),
            circle_angles: ws,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k]
    }

    pub fn regions(&self) -> &[Vec<usize>] {
        &self.regions
    }

    pub fn region(&self, k: usize) -> &[usize] {
        &self.regions[k]
    }

    /// Pairs of regions that contain node `l` and share a face.
    pub fn neighbor_pairs(&self, l: usize) -> &[(usize, usize)] {
        &self.neighbor_pairs[l]
    }

    /// Node angles on the L1 circle (Laplace meshes only).
    pub fn circle_angles(&self) -> &[f64] {
        &self.circle_angles
    }

    /// Region containing the direction of `x`; `x` need not be normalised.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        self.locate_inner(x, None)
    }

    /// Region containing the direction of `x` and the barycentric
    /// coordinates of that direction with respect to the region vertices.
    pub fn locate_with_weights(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let mut w = vec![0.0; self.dim];
        let k = self.locate_inner(x, Some(&mut w))?;
        Ok((k, w))
    }

    fn locate_inner(&self, x: &[f64], weights: Option<&mut [f64]>) -> Result<usize> {
        if x.len() != self.dim {
            return Err(invalid("point has wrong dimension"));
        }
        match self.domain {
            Domain::Simplex => self.locate_simplex(x, weights),
            Domain::LaplaceCircle => self.locate_circle(x, weights),
        }
    }

    fn locate_simplex(&self, x: &[f64], weights: Option<&mut [f64]>) -> Result<usize> {
        let s: f64 = x.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ZeroVector);
        }
        let k = self.dim - 1;
        let mut q = [0.0; MAX_DIM];
        for j in 0..k {
            q[j] = x[j] / s;
        }
        let mut lam = [0.0; MAX_DIM];
        for (ri, f) in self.frames.iter().enumerate() {
            let mut sum = 0.0;
            let mut ok = true;
            for i in 0..k {
                let mut v = 0.0;
                for j in 0..k {
                    v += f.inv[i * k + j] * (q[j] - f.origin[j]);
                }
                if v < -LOCATE_TOL {
                    ok = false;
                    break;
                }
                lam[i + 1] = v;
                sum += v;
            }
            if !ok || 1.0 - sum < -LOCATE_TOL {
                continue;
            }
            lam[0] = 1.0 - sum;
            if let Some(w) = weights {
                w.copy_from_slice(&lam[..self.dim]);
            }
            return Ok(ri);
        }
        Err(Error::OutsideMesh)
    }

    fn locate_circle(&self, x: &[f64], weights: Option<&mut [f64]>) -> Result<usize> {
        let (_, w) = laplace_decompose([x[0], x[1]])?;
        let w = w.value();
        let ws = &self.circle_angles;
        let n = ws.len();
        // last node with angle <= w, wrapping below the first node
        let idx = match ws.partition_point(|&a| a <= w) {
            0 => n - 1,
            p => p - 1,
        };
        if let Some(out) = weights {
            let a = &self.nodes[idx];
            let b = &self.nodes[(idx + 1) % n];
            let det = a[0] * b[1] - a[1] * b[0];
            let s = (x[0] * b[1] - x[1] * b[0]) / det;
            let t = (a[0] * x[1] - a[1] * x[0]) / det;
            out[0] = s / (s + t);
            out[1] = t / (s + t);
        }
        Ok(idx)
    }
}

fn sparse_nodes(dim: usize) -> Vec<Vec<f64>> {
    let mut nodes = Vec::new();
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        nodes.push(e);
    }
    nodes.push(vec![1.0 / dim as f64; dim]);
    for size in 2..dim {
        for mask in 0u32..(1 << dim) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let v = (0..dim).map(|j| if mask & (1 << j) != 0 { 1.0 / size as f64 } else { 0.0 }).collect();
            nodes.push(v);
        }
    }
    nodes
}

fn neighbor_pairs(n: usize, regions: &[Vec<usize>], dim: usize) -> Vec<Vec<(usize, usize)>> {
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ri, r) in regions.iter().enumerate() {
        for &v in r {
            containing[v].push(ri);
        }
    }
    containing
        .iter()
        .map(|rs| {
            let mut pairs = Vec::new();
            for (a, &i) in rs.iter().enumerate() {
                for &j in &rs[a + 1..] {
                    let shared = regions[i].iter().filter(|v| regions[j].contains(v)).count();
                    if shared == dim - 1 {
                        pairs.push((i.min(j), i.max(j)));
                    }
                }
            }
            pairs
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_node_mesh() -> SimplexMesh {
        let t = 1.0 / 3.0;
        let nodes = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![t, t, 1.0 - 2.0 * t]];
        SimplexMesh::from_parts(3, nodes, vec![vec![0, 2, 3], vec![1, 2, 3], vec![0, 1, 3]]).unwrap()
    }

    #[test]
    fn centre_node_neighbour_pairs() {
        let m = four_node_mesh();
        assert_eq!(m.neighbor_pairs(0), &[(0, 2)]);
        assert_eq!(m.neighbor_pairs(3), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn locate_vertex_and_edge() {
        let m = four_node_mesh();
        let t = 1.0 / 3.0;
        let (k, w) = m.locate_with_weights(&[t, t, 1.0 - 2.0 * t]).unwrap();
        let pos = m.region(k).iter().position(|&v| v == 3).unwrap();
        assert!((w[pos] - 1.0).abs() < 1e-12);
        // the edge between e1 and e2 only belongs to region {1,2,4}
        assert_eq!(m.locate(&[0.5, 0.5, 0.0]).unwrap(), 2);
        // the edge between e3 and the centre is shared; lowest index wins
        assert_eq!(m.locate(&[t / 2.0, t / 2.0, 1.0 - t]).unwrap(), 0);
    }

    #[test]
    fn delaunay_four_nodes() {
        let t = 1.0 / 3.0;
        let nodes = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![t, t, 1.0 - 2.0 * t]];
        let m = SimplexMesh::delaunay(3, nodes).unwrap();
        assert_eq!(m.regions(), &[vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]);
    }

    #[test]
    fn laplace_examples() {
        let (r, w) = laplace_decompose([1.0, 1.0]).unwrap();
        assert_eq!((r, w.value()), (2.0, 0.5));
        let (r, w) = laplace_decompose([-1.0, 0.0]).unwrap();
        assert_eq!((r, w.value()), (1.0, -2.0));
        assert_eq!(laplace_recompose(r, w), [-1.0, 0.0]);
        let (r, w) = laplace_decompose([0.0, 1.0]).unwrap();
        assert_eq!(laplace_recompose(r, w), [0.0, 1.0]);
        let (r, w) = laplace_decompose([-1.0, -0.5]).unwrap();
        assert!((w.value() + 5.0 / 3.0).abs() < 1e-15);
        let x = laplace_recompose(r, w);
        assert!((x[0] + 1.0).abs() < 1e-15 && (x[1] + 0.5).abs() < 1e-15);
        assert_eq!(laplace_decompose([0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn laplace_mesh_wraps() {
        let m = SimplexMesh::laplace(15).unwrap();
        assert_eq!(m.n_regions(), 15);
        assert_eq!(m.region(14), &[14, 0]);
        // angle just below -2 + 4/15 is in the first segment, angle near 2 in the last
        let x = LaplaceAngle::new(-1.9).unwrap().direction();
        assert_eq!(m.locate(&x).unwrap(), 0);
        let x = LaplaceAngle::new(1.99).unwrap().direction();
        assert_eq!(m.locate(&x).unwrap(), 14);
    }

    #[test]
    fn regular_mesh_errors() {
        assert!(SimplexMesh::regular(2, 4).is_err());
        assert!(SimplexMesh::regular(2, 1).is_err());
        assert!(SimplexMesh::regular(3, 1).is_err());
        assert!(matches!(SimplexMesh::regular(4, 3), Err(Error::UnsupportedDimension(4))));
        assert!(matches!(SimplexMesh::sparse(3, false), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn sparse_four_dimensional_counts() {
        let m = SimplexMesh::sparse(4, false).unwrap();
        assert_eq!(m.n_nodes(), 15);
        let r = SimplexMesh::sparse(4, true).unwrap();
        assert_eq!(r.n_nodes(), 39, "initial regions {}", m.n_regions());
    }
}
