//! Piecewise-linear and parametric gauge functions.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::roots::brent_min;
use crate::simplex::{Domain, SimplexMesh, MAX_DIM};

/// A 1-homogeneous function whose unit level set bounds a limit set.
pub trait Gauge {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

impl<G: Gauge + ?Sized> Gauge for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        (**self).eval(x)
    }
}

/// Normal vector of the hyperplane through the scaled vertices of region
/// `k`, and its inner product with the first scaled vertex.
pub fn coplanar_and_normal(mesh: &SimplexMesh, theta: &[f64], k: usize) -> Result<(Vec<f64>, f64)> {
    let d = mesh.dim();
    let verts = mesh.region(k);
    let first: Vec<f64> = mesh.node(verts[0]).iter().map(|v| v * theta[verts[0]]).collect();
    // rows of the coplanar matrix
    let mut c = vec![0.0; (d - 1) * d];
    for i in 0..d - 1 {
        let v = verts[i + 1];
        for j in 0..d {
            c[i * d + j] = first[j] - theta[v] * mesh.node(v)[j];
        }
    }
    let mut normal = vec![0.0; d];
    let mut minor = vec![0.0; (d - 1) * (d - 1)];
    for j in 0..d {
        for i in 0..d - 1 {
            let mut t = 0;
            for col in 0..d {
                if col != j {
                    minor[i * (d - 1) + t] = c[i * d + col];
                    t += 1;
                }
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        normal[j] = sign * linalg::det(&minor, d - 1);
    }
    let den = linalg::dot(&normal, &first);
    let scale = libm::sqrt(linalg::dot(&normal, &normal)) * libm::sqrt(linalg::dot(&first, &first));
    if !(libm::fabs(den) > 1e-14 * scale) || !den.is_finite() {
        return Err(Error::DegenerateRegion(k));
    }
    Ok((normal, den))
}

/// Piecewise-linear gauge: linear on each mesh region, equal to `1/theta_k`
/// at reference angle `k`.
#[derive(Clone, Debug)]
pub struct PwlGauge {
    mesh: Arc<SimplexMesh>,
    theta: Vec<f64>,
    gradients: Vec<f64>,
}

impl PwlGauge {
    pub fn new(mesh: Arc<SimplexMesh>, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != mesh.n_nodes() {
            return Err(invalid("theta length must equal the number of nodes"));
        }
        if theta.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(invalid("theta must be positive and finite"));
        }
        let d = mesh.dim();
        let mut gradients = vec![0.0; mesh.n_regions() * d];
        for k in 0..mesh.n_regions() {
            let (n, den) = coplanar_and_normal(&mesh, &theta, k)?;
            for j in 0..d {
                gradients[k * d + j] = n[j] / den;
            }
        }
        Ok(PwlGauge { mesh, theta, gradients })
    }

    /// Gauge interpolating `g` at the mesh nodes.
    pub fn interpolate<G: Gauge>(mesh: Arc<SimplexMesh>, g: &G) -> Result<Self> {
        let theta = mesh.nodes().iter().map(|w| g.eval(w).map(|v| 1.0 / v)).collect::<Result<Vec<_>>>()?;
        PwlGauge::new(mesh, theta)
    }

    /// Same mesh, new parameters.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        PwlGauge::new(self.mesh.clone(), theta)
    }

    pub fn mesh(&self) -> &SimplexMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SimplexMesh> {
        &self.mesh
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    /// Gradient of the gauge on region `k`.
    pub fn region_gradient(&self, k: usize) -> &[f64] {
        let d = self.mesh.dim();
        &self.gradients[k * d..(k + 1) * d]
    }

    /// Linear formula of region `k` applied to `x`, whether or not `x`
    /// lies in that region.
    pub fn eval_in_region(&self, k: usize, x: &[f64]) -> f64 {
        linalg::dot(self.region_gradient(k), x)
    }

    /// Volume of the star-shaped set bounded by the unit level set.
    pub fn volume(&self) -> f64 {
        let d = self.mesh.dim();
        let fact: f64 = (1..=d).map(|i| i as f64).product();
        let mut m = [0.0; MAX_DIM * MAX_DIM];
        let mut total = 0.0;
        for (k, r) in self.mesh.regions().iter().enumerate() {
            for (i, &v) in r.iter().enumerate() {
                for j in 0..d {
                    m[i * d + j] = self.theta[v] * self.mesh.node(v)[j];
                }
            }
            let det = libm::fabs(linalg::det(&m[..d * d], d));
            if det < 1e-14 {
                log::warn!("region {k} has a flat scaled simplex and contributes no volume");
                continue;
            }
            total += det;
        }
        total / fact
    }

    /// Angular density `g(w)^{-d} / (d vol)` at direction `w`.
    pub fn angular_density(&self, w: &[f64]) -> Result<f64> {
        let d = self.mesh.dim() as f64;
        let g = self.eval(w)?;
        Ok(libm::pow(g, -d) / (d * self.volume()))
    }

    /// Largest box coordinate `theta_k * w*k_j` over nodes, per coordinate
    /// and sign. Returns one entry per coordinate for simplex meshes and
    /// two (positive, negative) for Laplace meshes.
    pub fn box_extents(&self) -> Vec<f64> {
        box_extents(&self.mesh, &self.theta)
    }
}

#[derive(Serialize)]
struct GaugeRef<'a> {
    mesh: &'a SimplexMesh,
    theta: &'a [f64],
}

#[derive(Deserialize)]
struct GaugeRecord {
    mesh: SimplexMesh,
    theta: Vec<f64>,
}

impl Serialize for PwlGauge {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        GaugeRef { mesh: &self.mesh, theta: &self.theta }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PwlGauge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let r = GaugeRecord::deserialize(d)?;
        PwlGauge::new(Arc::new(r.mesh), r.theta).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn box_extents(mesh: &SimplexMesh, theta: &[f64]) -> Vec<f64> {
    let d = mesh.dim();
    let signs: &[f64] = match mesh.domain() {
        Domain::Simplex => &[1.0],
        Domain::LaplaceCircle => &[1.0, -1.0],
    };
    let mut out = Vec::with_capacity(d * signs.len());
    for j in 0..d {
        for &s in signs {
            let m = mesh.nodes().iter().zip(theta).map(|(w, t)| s * w[j] * t).fold(0.0, f64::max);
            out.push(m);
        }
    }
    out
}

impl Gauge for PwlGauge {
    fn dim(&self) -> usize {
        self.mesh.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        let k = self.mesh.locate(x)?;
        Ok(self.eval_in_region(k, x))
    }
}

/// One dependence component of an asymmetric logistic model.
#[derive(Clone, Debug, PartialEq)]
pub struct AlComponent {
    pub members: Vec<usize>,
    pub alpha: f64,
}

/// Closed-form gauges of standard copula families in exponential margins
/// (and the Gaussian in Laplace margins).
#[derive(Clone, Debug)]
pub enum ParametricGauge {
    Logistic { dim: usize, alpha: f64 },
    Gaussian { dim: usize, precision: Vec<f64> },
    InvertedLogistic { dim: usize, alpha: f64 },
    AsymmetricLogistic { dim: usize, components: Vec<AlComponent>, partitions: Vec<Vec<u32>> },
    Mixture(Box<ParametricGauge>, Box<ParametricGauge>),
    GaussianLaplace { dim: usize, precision: Vec<f64> },
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid("dependence parameter must lie in (0, 1]"))
    }
}

/// Correlation matrix with every off-diagonal entry equal to `rho`.
pub fn exchangeable_correlation(dim: usize, rho: f64) -> Vec<f64> {
    let mut c = vec![rho; dim * dim];
    for i in 0..dim {
        c[i * dim + i] = 1.0;
    }
    c
}

fn precision_of(dim: usize, corr: &[f64]) -> Result<Vec<f64>> {
    if corr.len() != dim * dim {
        return Err(invalid("correlation matrix has wrong size"));
    }
    for i in 0..dim {
        if libm::fabs(corr[i * dim + i] - 1.0) > 1e-12 {
            return Err(invalid("correlation matrix needs a unit diagonal"));
        }
        for j in 0..dim {
            let r = corr[i * dim + j];
            if libm::fabs(r - corr[j * dim + i]) > 1e-12 || (i != j && !(libm::fabs(r) < 1.0)) {
                return Err(invalid("correlations must be symmetric and lie in (-1, 1)"));
            }
        }
    }
    linalg::cholesky(corr, dim)?;
    linalg::inverse(corr, dim)
}

// Set partitions of {0..d} as block labels, in restricted growth form.
fn set_partitions(d: usize) -> Vec<Vec<u32>> {
    fn rec(i: usize, d: usize, cur: &mut Vec<u32>, max: u32, out: &mut Vec<Vec<u32>>) {
        if i == d {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            rec(i + 1, d, cur, max.max(b), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0];
    rec(1, d, &mut cur, 0, &mut out);
    out
}

impl ParametricGauge {
    pub fn logistic(dim: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(ParametricGauge::Logistic { dim, alpha })
    }

    pub fn inverted_logistic(dim: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(ParametricGauge::InvertedLogistic { dim, alpha })
    }

    /// Gaussian copula in exponential margins with correlation matrix
    /// `corr` (row-major).
    pub fn gaussian(dim: usize, corr: &[f64]) -> Result<Self> {
        Ok(ParametricGauge::Gaussian { dim, precision: precision_of(dim, corr)? })
    }

    /// Gaussian copula in Laplace margins.
    pub fn gaussian_laplace(dim: usize, corr: &[f64]) -> Result<Self> {
        Ok(ParametricGauge::GaussianLaplace { dim, precision: precision_of(dim, corr)? })
    }

    pub fn asymmetric_logistic(dim: usize, components: Vec<AlComponent>) -> Result<Self> {
        if !(2..=5).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        for c in &components {
            check_alpha(c.alpha)?;
            if c.members.is_empty() || c.members.iter().any(|&m| m >= dim) {
                return Err(invalid("component members must be valid coordinates"));
            }
        }
        for j in 0..dim {
            if !components.iter().any(|c| c.members.contains(&j)) {
                return Err(invalid("every coordinate must belong to a component"));
            }
        }
        Ok(ParametricGauge::AsymmetricLogistic { dim, components, partitions: set_partitions(dim) })
    }

    pub fn mixture(first: ParametricGauge, second: ParametricGauge) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(invalid("mixture components must share a dimension"));
        }
        Ok(ParametricGauge::Mixture(Box::new(first), Box::new(second)))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ParametricGauge::Logistic { dim, alpha } => {
                let s: f64 = x.iter().sum();
                let m = x.iter().cloned().fold(f64::INFINITY, f64::min);
                s / alpha + (1.0 - *dim as f64 / alpha) * m
            }
            ParametricGauge::Gaussian { dim, precision } => {
                let mut r = [0.0; MAX_DIM];
                for j in 0..*dim {
                    r[j] = libm::sqrt(x[j]);
                }
                quad_form(precision, &r[..*dim])
            }
            ParametricGauge::GaussianLaplace { dim, precision } => {
                let mut r = [0.0; MAX_DIM];
                for j in 0..*dim {
                    r[j] = libm::sqrt(libm::fabs(x[j])).copysign(x[j]);
                }
                quad_form(precision, &r[..*dim])
            }
            ParametricGauge::InvertedLogistic { alpha, .. } => {
                let s: f64 = x.iter().map(|&v| libm::pow(v, 1.0 / alpha)).sum();
                libm::pow(s, *alpha)
            }
            ParametricGauge::AsymmetricLogistic { dim, components, partitions } => {
                let mut best = f64::INFINITY;
                for p in partitions {
                    let nblocks = p.iter().cloned().max().unwrap_or(0) + 1;
                    let mut total = 0.0;
                    for b in 0..nblocks {
                        let block: u32 = (0..*dim).filter(|&j| p[j] == b).fold(0, |m, j| m | (1 << j));
                        let size = block.count_ones() as f64;
                        let sum: f64 = (0..*dim).filter(|&j| block & (1 << j) != 0).map(|j| x[j]).sum();
                        let mut term = f64::INFINITY;
                        for c in components {
                            let cmask: u32 = c.members.iter().fold(0, |m, &j| m | (1 << j));
                            if cmask & block != block {
                                continue;
                            }
                            let cmin = c.members.iter().map(|&j| x[j]).fold(f64::INFINITY, f64::min);
                            term = term.min(sum / c.alpha + (1.0 - size / c.alpha) * cmin);
                        }
                        total += term;
                    }
                    best = best.min(total);
                }
                best
            }
            ParametricGauge::Mixture(a, b) => a.eval_unchecked(x).min(b.eval_unchecked(x)),
        }
    }
}

fn quad_form(m: &[f64], r: &[f64]) -> f64 {
    let d = r.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += r[i] * m[i * d + j] * r[j];
        }
    }
    s
}

impl Gauge for ParametricGauge {
    fn dim(&self) -> usize {
        match self {
            ParametricGauge::Logistic { dim, .. }
            | ParametricGauge::Gaussian { dim, .. }
            | ParametricGauge::InvertedLogistic { dim, .. }
            | ParametricGauge::AsymmetricLogistic { dim, .. }
            | ParametricGauge::GaussianLaplace { dim, .. } => *dim,
            ParametricGauge::Mixture(a, _) => a.dim(),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(invalid("point has wrong dimension"));
        }
        let laplace = matches!(self, ParametricGauge::GaussianLaplace { .. });
        if !laplace && x.iter().any(|&v| v < 0.0) {
            return Err(invalid("point must be non-negative"));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(self.eval_unchecked(x))
    }
}

/// Minimum of a gauge over a grid of values in `[0, 1]` for the coordinates
/// in `dropped`, as a function of the three kept coordinates.
#[derive(Clone, Debug)]
pub struct ProjectedGauge<G> {
    gauge: G,
    kept: Vec<usize>,
    dropped: Vec<usize>,
    grid: Vec<f64>,
}

pub fn project_gauge<G: Gauge>(gauge: G, dropped: &[usize], mesh_size: usize) -> Result<ProjectedGauge<G>> {
    let d = gauge.dim();
    if dropped.len() + 3 != d {
        return Err(invalid("projection must keep exactly three coordinates"));
    }
    if mesh_size < 2 {
        return Err(invalid("projection mesh needs at least two values"));
    }
    if dropped.iter().any(|&j| j >= d) {
        return Err(invalid("dropped coordinate out of range"));
    }
    let kept = (0..d).filter(|j| !dropped.contains(j)).collect();
    let grid = (0..mesh_size).map(|i| i as f64 / (mesh_size - 1) as f64).collect();
    Ok(ProjectedGauge { gauge, kept, dropped: dropped.to_vec(), grid })
}

impl<G: Gauge> ProjectedGauge<G> {
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Grid minimum over the dropped coordinates, polished by coordinate
    /// line searches within one grid step of the best grid value.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != 3 {
            return Err(invalid("projected point needs three coordinates"));
        }
        let d = self.gauge.dim();
        let mut x = [0.0; MAX_DIM];
        for (i, &j) in self.kept.iter().enumerate() {
            x[j] = y[i];
        }
        let m = self.grid.len();
        let total = m.pow(self.dropped.len() as u32);
        let mut best = f64::INFINITY;
        let mut arg = x;
        for idx in 0..total {
            let mut rest = idx;
            for &j in &self.dropped {
                x[j] = self.grid[rest % m];
                rest /= m;
            }
            if x[..d].iter().all(|&v| v == 0.0) {
                continue;
            }
            let v = self.gauge.eval(&x[..d])?;
            if v < best {
                best = v;
                arg = x;
            }
        }
        if !best.is_finite() {
            return Ok(best);
        }
        let step = 1.0 / (m - 1) as f64;
        for _ in 0..2 {
            for &j in &self.dropped {
                let lo = (arg[j] - step).max(0.0);
                let hi = (arg[j] + step).min(1.0);
                let mut probe = arg;
                let (t, v) = brent_min(
                    |t| {
                        probe[j] = t;
                        if probe[..d].iter().all(|&v| v == 0.0) {
                            return f64::INFINITY;
                        }
                        self.gauge.eval(&probe[..d]).unwrap_or(f64::INFINITY)
                    },
                    lo,
                    hi,
                    1e-10,
                    100,
                );
                if v < best {
                    best = v;
                    arg[j] = t;
                }
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_node_gauge(theta: Vec<f64>) -> PwlGauge {
        let t = 1.0 / 3.0;
        let nodes = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![t, t, 1.0 - 2.0 * t]];
        let mesh = SimplexMesh::from_parts(3, nodes, vec![vec![0, 2, 3], vec![1, 2, 3], vec![0, 1, 3]]).unwrap();
        PwlGauge::new(Arc::new(mesh), theta).unwrap()
    }

    #[test]
    fn centre_node_value() {
        let g = four_node_gauge(vec![0.5, 0.5, 0.5, 3.0]);
        let t = 1.0 / 3.0;
        assert!((g.eval(&[t, t, t]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_diagonal_segment() {
        let mesh = SimplexMesh::delaunay(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = PwlGauge::new(Arc::new(mesh), vec![1.0, 1.0]).unwrap();
        assert!((g.eval(&[0.3, 2.0]).unwrap() - 2.3).abs() < 1e-12);
        assert!((g.volume() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_gauge_has_constant_gradient() {
        let mesh = Arc::new(SimplexMesh::regular(2, 7).unwrap());
        let theta = mesh.nodes().iter().map(|w| 1.0 / (2.0 * w[0] + 3.0 * w[1])).collect();
        let g = PwlGauge::new(mesh, theta).unwrap();
        for k in 0..g.mesh().n_regions() {
            let gr = g.region_gradient(k);
            assert!((gr[0] - 2.0).abs() < 1e-12 && (gr[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parametric_examples() {
        let lg = ParametricGauge::logistic(3, 0.3).unwrap();
        assert!((lg.eval(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let ga = ParametricGauge::gaussian(2, &exchangeable_correlation(2, 0.8)).unwrap();
        assert!((ga.eval(&[0.5, 0.5]).unwrap() - 0.2 / 0.36).abs() < 1e-12);
        let il = ParametricGauge::inverted_logistic(2, 0.7).unwrap();
        assert!((il.eval(&[1.0, 1e-300]).unwrap() - 1.0).abs() < 1e-12);
        assert!(ParametricGauge::logistic(2, 1.5).is_err());
        assert!(ParametricGauge::gaussian(2, &exchangeable_correlation(2, 1.0)).is_err());
    }

    #[test]
    fn asymmetric_logistic_reduces_to_logistic() {
        let al = ParametricGauge::asymmetric_logistic(3, vec![AlComponent { members: vec![0, 1, 2], alpha: 0.4 }]).unwrap();
        let lg = ParametricGauge::logistic(3, 0.4).unwrap();
        for x in [[0.2, 0.5, 0.3], [1.0, 0.0, 0.0], [0.1, 0.1, 0.8]] {
            assert!((al.eval(&x).unwrap() - lg.eval(&x).unwrap()).abs() < 1e-12);
        }
        // singleton components give the independence gauge
        let ind = ParametricGauge::asymmetric_logistic(
            2,
            vec![AlComponent { members: vec![0], alpha: 0.5 }, AlComponent { members: vec![1], alpha: 0.5 }],
        )
        .unwrap();
        assert!((ind.eval(&[0.3, 0.9]).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn partitions_are_bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52];
        for d in 1..=5 {
            assert_eq!(set_partitions(d).len(), bell[d]);
        }
    }
}
