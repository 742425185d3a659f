//! Uniform tensor-product grids, nodal fields and trapezoidal quadrature.
//!
//! Nodes are numbered with the x index running fastest: node `(i, j)` has
//! index `i + nx * j`. The discrete Laplacian with a boundary flux `r(u)` is
//!
//! ```text
//! (−Δ_h u)_k = [ (K u)_k + bw_k r(u_k) ] / w_k
//! ```
//!
//! where `K` is the symmetric Neumann stiffness matrix, `w` the trapezoid
//! weights and `bw` the boundary weights. This is exactly the centered
//! second difference with ghost nodes eliminated through the boundary
//! relation, and `W · (−Δ_h)` is symmetric.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::domain(format!("axis extent [{lo}, {hi}] is not a proper interval")));
        }
        if n < 3 {
            return Err(Error::domain(format!("need at least 3 nodes per axis, got {n}")));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.h()
        }
    }

    fn weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    interior_weights: Vec<f64>,
    boundary_weights: Vec<f64>,
    boundary_nodes: Vec<usize>,
}

impl Grid {
    pub fn new(axes: &[Axis]) -> Result<Arc<Self>> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::domain(format!("grid dimension must be 1 or 2, got {}", axes.len())));
        }
        for ax in axes {
            Axis::new(ax.lo, ax.hi, ax.n)?;
        }
        let (interior_weights, boundary_weights) = match axes {
            [x] => {
                let mut bw = vec![0.0; x.n];
                bw[0] = 1.0;
                bw[x.n - 1] = 1.0;
                (x.weights(), bw)
            }
            [x, y] => {
                let (wx, wy) = (x.weights(), y.weights());
                let mut w = Vec::with_capacity(x.n * y.n);
                let mut bw = Vec::with_capacity(x.n * y.n);
                for j in 0..y.n {
                    for i in 0..x.n {
                        w.push(wx[i] * wy[j]);
                        let mut b = 0.0;
                        if i == 0 || i == x.n - 1 {
                            b += wy[j];
                        }
                        if j == 0 || j == y.n - 1 {
                            b += wx[i];
                        }
                        bw.push(b);
                    }
                }
                (w, bw)
            }
            _ => unreachable!(),
        };
        let boundary_nodes = boundary_weights
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(k, _)| k)
            .collect();
        Ok(Arc::new(Grid { axes: axes.to_vec(), interior_weights, boundary_weights, boundary_nodes }))
    }

    pub fn new_1d(lo: f64, hi: f64, n: usize) -> Result<Arc<Self>> {
        Grid::new(&[Axis::new(lo, hi, n)?])
    }

    pub fn new_2d(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Arc<Self>> {
        Grid::new(&[Axis::new(x.0, x.1, nx)?, Axis::new(y.0, y.1, ny)?])
    }

    /// The unit interval `(0, 1)` with `n` nodes.
    pub fn unit_interval(n: usize) -> Result<Arc<Self>> {
        Grid::new_1d(0.0, 1.0, n)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.interior_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior_weights.is_empty()
    }

    pub fn nx(&self) -> usize {
        self.axes[0].n
    }

    pub fn ny(&self) -> usize {
        self.axes.get(1).map_or(1, |a| a.n)
    }

    pub fn interior_weights(&self) -> &[f64] {
        &self.interior_weights
    }

    /// Boundary quadrature weight of every node (zero off the boundary).
    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary_weights[k] > 0.0
    }

    /// |Ω|
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.hi - a.lo).product()
    }

    /// |∂Ω|: two endpoints in 1D, the perimeter in 2D.
    pub fn boundary_measure(&self) -> f64 {
        match self.axes.as_slice() {
            [_] => 2.0,
            [x, y] => 2.0 * ((x.hi - x.lo) + (y.hi - y.lo)),
            _ => unreachable!(),
        }
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let nx = self.nx();
        let (i, j) = (k % nx, k / nx);
        let x = self.axes[0].coord(i);
        let y = self.axes.get(1).map_or(0.0, |a| a.coord(j));
        [x, y]
    }

    /// Ratio `bw_k / w_k` that multiplies the boundary flux in the discrete Laplacian.
    pub(crate) fn flux_factor(&self, k: usize) -> f64 {
        self.boundary_weights[k] / self.interior_weights[k]
    }

    /// Nonzero entries `(row, col, value)` of the Neumann stiffness matrix `K`.
    pub(crate) fn stiffness_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        match self.axes.as_slice() {
            [x] => {
                let c = 1.0 / x.h();
                for e in 0..x.n - 1 {
                    push_edge(&mut out, e, e + 1, c);
                }
            }
            [x, y] => {
                let (wx, wy) = (x.weights(), y.weights());
                let (hx, hy) = (x.h(), y.h());
                let nx = x.n;
                for j in 0..y.n {
                    for i in 0..nx {
                        let k = i + nx * j;
                        if i + 1 < nx {
                            push_edge(&mut out, k, k + 1, wy[j] / hx);
                        }
                        if j + 1 < y.n {
                            push_edge(&mut out, k, k + nx, wx[i] / hy);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    /// `out = K u`
    pub(crate) fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.axes.as_slice() {
            [x] => {
                let c = 1.0 / x.h();
                for e in 0..x.n - 1 {
                    let d = c * (u[e] - u[e + 1]);
                    out[e] += d;
                    out[e + 1] -= d;
                }
            }
            [x, y] => {
                let (wx, wy) = (x.weights(), y.weights());
                let (hx, hy) = (x.h(), y.h());
                let nx = x.n;
                for j in 0..y.n {
                    for i in 0..nx {
                        let k = i + nx * j;
                        if i + 1 < nx {
                            let d = wy[j] / hx * (u[k] - u[k + 1]);
                            out[k] += d;
                            out[k + 1] -= d;
                        }
                        if j + 1 < y.n {
                            let d = wx[i] / hy * (u[k] - u[k + nx]);
                            out[k] += d;
                            out[k + nx] -= d;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    pub(crate) fn stiffness_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for (r, c, v) in self.stiffness_triplets() {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    /// Half bandwidth of `K` in the natural node ordering.
    pub(crate) fn bandwidth(&self) -> usize {
        if self.dim() == 1 {
            1
        } else {
            self.nx()
        }
    }

    /// Discrete `−Δ_h u` with boundary flux `flux(u_k)` at boundary nodes.
    pub fn neg_laplacian(&self, u: &[f64], flux: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_stiffness(u, &mut out);
        for (k, o) in out.iter_mut().enumerate() {
            let mut v = *o;
            if self.boundary_weights[k] > 0.0 {
                v += self.boundary_weights[k] * flux(u[k]);
            }
            *o = v / self.interior_weights[k];
        }
        out
    }
}

fn push_edge(out: &mut Vec<(usize, usize, f64)>, p: usize, q: usize, c: f64) {
    out.push((p, p, c));
    out.push((q, q, c));
    out.push((p, q, -c));
    out.push((q, p, -c));
}

/// Nodal values of one scalar unknown on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    /// Checked constructor: length must match the grid and every value must be finite.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("field contains non-finite value {v}")));
        }
        Ok(Field { grid, values })
    }

    /// Unchecked constructor for solver output, which may carry overflowing
    /// values into blow-up detection.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Field { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.coords(k);
                f(x, y)
            })
            .collect();
        Field { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert!(self.same_grid(other), "zip_map on fields from different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field::from_raw(self.grid.clone(), values)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute value, without the finiteness check of [`Field::linf_norm`].
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::domain("non-finite field value"))
        }
    }

    /// ∫_Ω f dx by the trapezoidal rule.
    pub fn integrate_interior(&self) -> Result<f64> {
        self.check_finite()?;
        Ok(dot(&self.values, self.grid.interior_weights()))
    }

    /// ∫_∂Ω f dS by the trapezoidal rule along the boundary.
    pub fn integrate_boundary(&self) -> Result<f64> {
        self.check_finite()?;
        Ok(dot(&self.values, self.grid.boundary_weights()))
    }

    pub fn linf_norm(&self) -> Result<f64> {
        self.check_finite()?;
        Ok(self.sup_abs())
    }

    pub fn l2_norm(&self) -> Result<f64> {
        self.check_finite()?;
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.interior_weights())
            .map(|(v, w)| w * v * v)
            .sum();
        Ok(s.sqrt())
    }

    /// ‖∇f‖_{L²} with centered differences inside and second-order one-sided
    /// differences on the boundary.
    pub fn h1_seminorm(&self) -> Result<f64> {
        self.check_finite()?;
        let g = &self.grid;
        let nx = g.nx();
        let mut grad2 = vec![0.0; g.len()];
        for (d, axis) in g.axes().iter().enumerate() {
            let stride = if d == 0 { 1 } else { nx };
            let h = axis.h();
            for (k, g2) in grad2.iter_mut().enumerate() {
                let i = if d == 0 { k % nx } else { k / nx };
                let u = |off: isize| self.values[(k as isize + off * stride as isize) as usize];
                let deriv = if i == 0 {
                    (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h)
                } else if i == axis.n - 1 {
                    (3.0 * u(0) - 4.0 * u(-1) + u(-2)) / (2.0 * h)
                } else {
                    (u(1) - u(-1)) / (2.0 * h)
                };
                *g2 += deriv * deriv;
            }
        }
        Ok(dot(&grad2, g.interior_weights()).sqrt())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The coupled pair `(u1, u2)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u1: Field,
    pub u2: Field,
    pub t: f64,
}

impl StatePair {
    pub fn new(u1: Field, u2: Field, t: f64) -> Result<Self> {
        if !u1.same_grid(&u2) {
            return Err(Error::GridMismatch("u1 and u2 live on different grids".into()));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("time must be finite and ≥ 0, got {t}")));
        }
        Ok(StatePair { u1, u2, t })
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, u1: &[f64], u2: &[f64]) -> Self {
        StatePair {
            u1: Field::from_raw(grid.clone(), u1.to_vec()),
            u2: Field::from_raw(grid.clone(), u2.to_vec()),
            t: 0.0,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        StatePair { u1: Field::zeros(grid), u2: Field::zeros(grid), t: 0.0 }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u1.grid()
    }

    /// `(l1 u1, l2 u2)` at time zero.
    pub fn scaled(&self, l1: f64, l2: f64) -> StatePair {
        StatePair { u1: self.u1.scale(l1), u2: self.u2.scale(l2), t: 0.0 }
    }

    pub fn min(&self) -> f64 {
        self.u1.min().min(self.u2.min())
    }

    pub fn sup_abs(&self) -> f64 {
        self.u1.sup_abs().max(self.u2.sup_abs())
    }

    /// Sup-norm distance between two states on the same grid.
    pub fn distance(&self, other: &StatePair) -> f64 {
        let d1 = self.u1.zip_map(&other.u1, |a, b| a - b).sup_abs();
        let d2 = self.u2.zip_map(&other.u2, |a, b| a - b).sup_abs();
        d1.max(d2)
    }
}
