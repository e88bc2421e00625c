//! Communication topology: adjacency, Laplacian `L = D − A`, its spectrum,
//! the consensus projector `E = I − 11ᵀ/n` and the matrix `F_M` with
//! `F_M L = L F_M = E`.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::linalg::{symmetric_eigen, Matrix};
use crate::rng::{self, StreamRng};

/// Resamples allowed before the sphere generator gives up.
pub const GEOMETRIC_RETRY_BUDGET: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency is empty")]
    Empty,
    #[error("adjacency not symmetric at ({i},{j}): {a} vs {b}")]
    NonSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("negative or non-finite weight {w} at ({i},{j})")]
    NegativeWeight { i: usize, j: usize, w: f64 },
    #[error("nonzero diagonal entry {w} at node {i}")]
    NonZeroDiagonal { i: usize, w: f64 },
    #[error("graph is disconnected (lambda_2 = {fiedler:e})")]
    Disconnected { fiedler: f64 },
    #[error("lambda_(n+1) = {value} outside [{lo}, {hi}]")]
    LambdaOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("F_M is undefined for a single node")]
    SingleNode,
    #[error("no connected sample after {attempts} attempts (n = {n}, threshold = {threshold_deg} deg)")]
    ConnectivityFailure {
        n: usize,
        threshold_deg: f64,
        attempts: usize,
    },
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),
    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },
}

/// An undirected weighted graph with its Laplacian spectrum precomputed.
///
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct Topology {
    adjacency: Matrix,
    laplacian: Matrix,
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
    neighbors: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
    connected: bool,
}

impl Topology {
    /// Validates `adjacency` and computes the Laplacian eigen-decomposition.
    ///
    /// A disconnected graph is accepted here and flagged; algorithm setup
    /// rejects it.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self, GraphError> {
        if !adjacency.is_square() {
            return Err(GraphError::NotSquare {
                rows: adjacency.rows(),
                cols: adjacency.cols(),
            });
        }
        let n = adjacency.rows();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let tol = 1e-12 * adjacency.max_abs().max(1.0);
        for i in 0..n {
            let d = adjacency[(i, i)];
            if d != 0.0 {
                return Err(GraphError::NonZeroDiagonal { i, w: d });
            }
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(GraphError::NegativeWeight { i, j, w });
                }
                if j > i && (w - adjacency[(j, i)]).abs() > tol {
                    return Err(GraphError::NonSymmetric {
                        i,
                        j,
                        a: w,
                        b: adjacency[(j, i)],
                    });
                }
            }
        }
        // symmetrize exactly so downstream identities hold to rounding
        let adjacency = Matrix::from_fn(n, n, |i, j| 0.5 * (adjacency[(i, j)] + adjacency[(j, i)]));

        let degrees: Vec<f64> = (0..n).map(|i| adjacency.row(i).iter().sum()).collect();
        let laplacian = Matrix::from_fn(n, n, |i, j| if i == j { degrees[i] } else { -adjacency[(i, j)] });
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| adjacency[(i, j)] > 0.0)
                    .map(|j| (j, adjacency[(i, j)]))
                    .collect()
            })
            .collect();

        let eig = symmetric_eigen(&laplacian);
        let rho = *eig.values.last().unwrap();
        let connected = n == 1 || eig.values[1] > 1e-8 * rho.max(1.0);

        Ok(Self {
            adjacency,
            laplacian,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
            neighbors,
            degrees,
            connected,
        })
    }

    /// Builds a topology from `(i, j, weight)` triples on `n` nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut a = Matrix::zeros(n, n);
        for (line, &(i, j, w)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(GraphError::EdgeList {
                    line: line + 1,
                    msg: format!("node index out of range for n = {n}"),
                });
            }
            if i == j {
                return Err(GraphError::NonZeroDiagonal { i, w });
            }
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        Self::from_adjacency(a)
    }

    pub fn complete(n: usize) -> Self {
        Self::from_adjacency(Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }))
            .expect("complete graph is valid")
    }

    pub fn ring(n: usize) -> Self {
        let mut a = Matrix::zeros(n, n);
        if n > 1 {
            for i in 0..n {
                let j = (i + 1) % n;
                if i != j {
                    a[(i, j)] = 1.0;
                    a[(j, i)] = 1.0;
                }
            }
        }
        Self::from_adjacency(a).expect("ring graph is valid")
    }

    pub fn path(n: usize) -> Self {
        let mut a = Matrix::zeros(n, n);
        for i in 1..n {
            a[(i - 1, i)] = 1.0;
            a[(i, i - 1)] = 1.0;
        }
        Self::from_adjacency(a).expect("path graph is valid")
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// Ascending Laplacian eigenvalues `λ₁ ≤ … ≤ λ_n`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// `ρ(L) = λ_n`.
    pub fn spectral_radius(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// `ρ₂(L) = λ₂`, or 0 for a single node.
    pub fn fiedler(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    /// Number of neighbours of node `i` (unweighted).
    pub fn neighbor_count(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `E = I − (1/n) 11ᵀ`.
    pub fn projector(&self) -> Matrix {
        let n = self.n();
        let inv = 1.0 / n as f64;
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
    }

    /// `F_M = [q Q] diag(λ_{n+1}⁻¹, Λ₁⁻¹) [q Q]ᵀ` with `q = 1/√n`.
    ///
    /// `lambda` defaults to `λ₂` and must lie in `[λ₂, λ_n]`.
    pub fn fm(&self, lambda: Option<f64>) -> Result<Matrix, GraphError> {
        let n = self.n();
        if n == 1 {
            return Err(GraphError::SingleNode);
        }
        if !self.connected {
            return Err(GraphError::Disconnected {
                fiedler: self.fiedler(),
            });
        }
        let lo = self.fiedler();
        let hi = self.spectral_radius();
        let lambda = lambda.unwrap_or(lo);
        let slack = 1e-12 * hi;
        if !(lambda >= lo - slack && lambda <= hi + slack) {
            return Err(GraphError::LambdaOutOfRange { value: lambda, lo, hi });
        }
        let inv_n = 1.0 / n as f64;
        let mut fm = Matrix::from_fn(n, n, |_, _| inv_n / lambda);
        // eigenvector 0 spans the constant direction for a connected graph
        for k in 1..n {
            let w = 1.0 / self.eigenvalues[k];
            for i in 0..n {
                let ui = self.eigenvectors[(i, k)] * w;
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    fm[(i, j)] += ui * self.eigenvectors[(j, k)];
                }
            }
        }
        Ok(fm)
    }

    /// `out = (L ⊗ I_p) stack`, using neighbour lists.
    pub fn laplacian_apply_into(&self, stack: &Matrix, out: &mut Matrix) {
        assert_eq!(stack.rows(), self.n());
        assert_eq!((out.rows(), out.cols()), (stack.rows(), stack.cols()));
        for i in 0..self.n() {
            let xi = stack.row(i);
            let oi = out.row_mut(i);
            oi.iter_mut().for_each(|o| *o = 0.0);
            for &(j, w) in &self.neighbors[i] {
                for ((o, a), b) in oi.iter_mut().zip(xi).zip(stack.row(j)) {
                    *o += w * (a - b);
                }
            }
        }
    }

    pub fn laplacian_apply(&self, stack: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(stack.rows(), stack.cols());
        self.laplacian_apply_into(stack, &mut out);
        out
    }

    /// `i j weight` per line, 0-based, each undirected edge once with `i < j`.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n() {
            for &(j, w) in &self.neighbors[i] {
                if j > i {
                    let _ = writeln!(s, "{i} {j} {w}");
                }
            }
        }
        s
    }

    /// Parses the edge-list format written by [`Self::to_edge_list`].
    ///
    /// Blank lines and `#` comments are skipped. The weight column is
    /// optional (defaults to 1). When `n` is `None` it is inferred from the
    /// largest index.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| GraphError::EdgeList {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(err("expected `i j [weight]`"));
            }
            let i: usize = fields[0].parse().map_err(|_| err("bad node index"))?;
            let j: usize = fields[1].parse().map_err(|_| err("bad node index"))?;
            let w: f64 = match fields.get(2) {
                Some(f) => f.parse().map_err(|_| err("bad weight"))?,
                None => 1.0,
            };
            edges.push((i, j, w));
        }
        let inferred = edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
        let n = n.unwrap_or(inferred);
        Self::from_edges(n, &edges)
    }
}

/// A random geometric graph on the unit 2-sphere.
#[derive(Debug, Clone)]
pub struct GeometricGraph {
    pub topology: Topology,
    /// Unit vectors in R³, one per node.
    pub points: Vec<[f64; 3]>,
    /// Samples drawn, including the accepted one.
    pub attempts: usize,
}

/// Points uniform on the sphere, unit edge when the central angle is at most
/// `threshold_deg`. Resamples until connected, up to
/// [`GEOMETRIC_RETRY_BUDGET`] draws.
pub fn random_geometric_sphere(n: usize, threshold_deg: f64, seed: u64) -> Result<GeometricGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameters(format!("need n >= 2, got {n}")));
    }
    if !(threshold_deg > 0.0 && threshold_deg <= 180.0) {
        return Err(GraphError::InvalidParameters(format!(
            "threshold must be in (0, 180] degrees, got {threshold_deg}"
        )));
    }
    let mut rng = rng::stream(seed, rng::TOPOLOGY_STREAM);
    let threshold = threshold_deg.to_radians();
    for attempt in 1..=GEOMETRIC_RETRY_BUDGET {
        let points: Vec<[f64; 3]> = (0..n).map(|_| sphere_point(&mut rng)).collect();
        let adjacency = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                return 0.0;
            }
            let c: f64 = (0..3).map(|d| points[i][d] * points[j][d]).sum();
            if c.clamp(-1.0, 1.0).acos() <= threshold {
                1.0
            } else {
                0.0
            }
        });
        let topology = Topology::from_adjacency(adjacency)?;
        if topology.is_connected() {
            log::debug!("sphere graph connected after {attempt} attempt(s)");
            return Ok(GeometricGraph {
                topology,
                points,
                attempts: attempt,
            });
        }
    }
    Err(GraphError::ConnectivityFailure {
        n,
        threshold_deg,
        attempts: GEOMETRIC_RETRY_BUDGET,
    })
}

fn sphere_point(rng: &mut StreamRng) -> [f64; 3] {
    loop {
        let v = [
            rng::standard_normal(rng),
            rng::standard_normal(rng),
            rng::standard_normal(rng),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
        // measure-zero event; keep the stream moving
        let _: u32 = rng.random();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn path3_spectrum() {
        let t = Topology::path(3);
        let expected = Matrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]).unwrap();
        assert_eq!(t.laplacian(), &expected);
        // char. poly of L is −λ(λ−1)(λ−3)
        assert!(close(t.eigenvalues(), &[0.0, 1.0, 3.0], 1e-12));
        assert!((t.spectral_radius() - 3.0).abs() < 1e-12);
        assert!((t.fiedler() - 1.0).abs() < 1e-12);
        assert!(t.is_connected());
    }

    #[test]
    fn k2_spectrum_and_fm() {
        let t = Topology::complete(2);
        assert!(close(t.eigenvalues(), &[0.0, 2.0], 1e-12));
        let fm = t.fm(Some(2.0)).unwrap();
        assert!(fm.max_abs_diff(&Matrix::identity(2).scale(0.5)) < 1e-12);
        let fl = fm.matmul(t.laplacian());
        let e = Matrix::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        assert!(fl.max_abs_diff(&e) < 1e-12);
        assert!(t.projector().max_abs_diff(&e) < 1e-15);
    }

    #[test]
    fn single_node() {
        let t = Topology::from_adjacency(Matrix::zeros(1, 1)).unwrap();
        assert_eq!(t.laplacian(), &Matrix::zeros(1, 1));
        assert_eq!(t.spectral_radius(), 0.0);
        assert_eq!(t.fm(None), Err(GraphError::SingleNode));
    }

    #[test]
    fn path3_fm_eigenvalues() {
        let t = Topology::path(3);
        let fm = t.fm(Some(1.0)).unwrap();
        let eig = symmetric_eigen(&fm);
        assert!(close(&eig.values, &[1.0 / 3.0, 1.0, 1.0], 1e-12));
        assert!(fm.matmul(t.laplacian()).max_abs_diff(&t.projector()) < 1e-12);
        assert!(t.laplacian().matmul(&fm).max_abs_diff(&t.projector()) < 1e-12);
    }

    #[test]
    fn fm_lambda_range_checked() {
        let t = Topology::path(3);
        assert!(matches!(t.fm(Some(0.5)), Err(GraphError::LambdaOutOfRange { .. })));
        assert!(matches!(t.fm(Some(3.5)), Err(GraphError::LambdaOutOfRange { .. })));
        assert!(t.fm(Some(3.0)).is_ok());
    }

    #[test]
    fn disconnected_is_flagged_not_rejected() {
        let t = Topology::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(!t.is_connected());
        assert!(matches!(t.fm(None), Err(GraphError::Disconnected { .. })));
    }

    #[test]
    fn validation_errors() {
        let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(matches!(
            Topology::from_adjacency(asym),
            Err(GraphError::NonSymmetric { .. })
        ));
        let neg = Matrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(
            Topology::from_adjacency(neg),
            Err(GraphError::NegativeWeight { .. })
        ));
        let diag = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            Topology::from_adjacency(diag),
            Err(GraphError::NonZeroDiagonal { .. })
        ));
        assert!(matches!(
            Topology::from_adjacency(Matrix::zeros(2, 3)),
            Err(GraphError::NotSquare { .. })
        ));
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = random_geometric_sphere(12, 70.0, 5).unwrap();
        let text = g.topology.to_edge_list();
        let back = Topology::parse_edge_list(&text, Some(12)).unwrap();
        assert_eq!(back.adjacency(), g.topology.adjacency());
        let t = Topology::parse_edge_list("# ring\n0 1\n1 2 2.5\n\n2 0 1\n", None).unwrap();
        assert_eq!(t.n(), 3);
        assert_eq!(t.adjacency()[(1, 2)], 2.5);
        assert!(matches!(
            Topology::parse_edge_list("0 x 1", None),
            Err(GraphError::EdgeList { line: 1, .. })
        ));
    }

    #[test]
    fn sphere_full_threshold_connects_two_nodes() {
        for seed in 0..20 {
            let g = random_geometric_sphere(2, 180.0, seed).unwrap();
            assert_eq!(g.attempts, 1);
            assert_eq!(g.topology.edge_count(), 1);
        }
    }

    #[test]
    fn sphere_tiny_threshold_fails() {
        assert!(matches!(
            random_geometric_sphere(20, 0.001, 1),
            Err(GraphError::ConnectivityFailure { attempts: 100, .. })
        ));
    }

    #[test]
    fn sphere_reproducible() {
        let a = random_geometric_sphere(20, 60.0, 42).unwrap();
        let b = random_geometric_sphere(20, 60.0, 42).unwrap();
        assert_eq!(a.topology.adjacency(), b.topology.adjacency());
        assert_eq!(a.attempts, b.attempts);
        assert!(a.topology.fiedler() > 0.0);
        for p in &a.points {
            assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_apply_matches_dense() {
        let g = random_geometric_sphere(9, 80.0, 3).unwrap();
        let x = Matrix::from_fn(9, 4, |i, j| (i as f64 * 0.7 - j as f64).sin());
        let dense = g.topology.laplacian().matmul(&x);
        assert!(g.topology.laplacian_apply(&x).max_abs_diff(&dense) < 1e-12);
    }
}
