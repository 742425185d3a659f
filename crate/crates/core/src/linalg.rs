//! Banded LU with partial pivoting and diagonally preconditioned CG.

use crate::error::{Error, Result};
use crate::grid::{dot, Grid};

/// General band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Rows are stored with `kl` extra super-diagonals so that partial pivoting
/// can fill in without reallocation.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, ab: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`; the entry must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band (kl={}, ku={})",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.ab[self.slot(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.ab[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.ab.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.ab[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(Error::Solvability(format!("singular band matrix at column {k}")));
            }
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.slot(k, k)];
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let l = self.ab[sik] / pivot;
                self.ab[sik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let skj = self.ab[self.slot(k, j)];
                        let sij = self.slot(i, j);
                        self.ab[sij] -= l * skj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= m.ab[m.slot(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                s -= m.ab[m.slot(k, j)] * x[j];
            }
            x[k] = s / m.ab[m.slot(k, k)];
        }
        x
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite operator. Stops when `‖b − Ax‖₂ ≤ tol ‖b‖₂`.
pub fn pcg(
    matvec: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgReport { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut ax = vec![0.0; n];
    matvec(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let inv_d: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok(CgReport { x, iterations: it, relative_residual: rel });
        }
        matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solvability("CG met a non-positive curvature direction".into()));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
    }
    if rel <= tol {
        return Ok(CgReport { x, iterations: max_iter, relative_residual: rel });
    }
    Err(Error::Convergence { what: "conjugate gradients", iterations: max_iter, residual: rel })
}

/// Relative tolerance of the iterative linear solves.
pub const LINEAR_TOL: f64 = 1e-12;

/// Solves `(θ K + diag(d)) x = rhs` where `K` is the grid's Neumann stiffness.
///
/// 1D grids use a tridiagonal band factorization; 2D grids use PCG. The
/// operator must be symmetric positive definite, or semidefinite with a
/// consistent right-hand side (PCG only).
pub fn solve_symmetric(
    grid: &Grid,
    theta: f64,
    d: &[f64],
    rhs: &[f64],
    x0: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let definite = d.iter().any(|&v| v > 0.0);
    if grid.dim() == 1 && definite {
        let n = grid.len();
        let mut m = BandMatrix::zeros(n, 1, 1);
        for (r, c, v) in grid.stiffness_triplets() {
            m.add(r, c, theta * v);
        }
        for (k, &dk) in d.iter().enumerate() {
            m.add(k, k, dk);
        }
        return Ok(m.factor()?.solve(rhs));
    }
    let kd = grid.stiffness_diagonal();
    let diag: Vec<f64> = kd.iter().zip(d).map(|(k, d)| theta * k + d).collect();
    let matvec = |x: &[f64], out: &mut [f64]| {
        grid.apply_stiffness(x, out);
        for i in 0..x.len() {
            out[i] = theta * out[i] + d[i] * x[i];
        }
    };
    let max_iter = 20 * grid.len() + 100;
    Ok(pcg(matvec, &diag, rhs, x0, LINEAR_TOL, max_iter)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    #[test]
    fn band_lu_with_pivoting() {
        // zero on the diagonal forces a row swap
        let n = 6;
        let (kl, ku) = (2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut dense = vec![vec![0.0; n]; n];
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j && i % 2 == 0 { 0.0 } else { rng.random_range(-2.0..2.0) };
                dense[i][j] = v;
                m.add(i, j, v);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let b = dense_matvec(&dense, &x_true);
        assert_eq!(m.matvec(&x_true), b);
        let x = m.factor().unwrap().solve(&b);
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn singular_band_detected() {
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        assert!(matches!(m.factor(), Err(Error::Solvability(_))));
    }

    #[test]
    fn pcg_and_band_agree_on_2d_operator() {
        let g = Grid::new_2d((0.0, 1.0), (0.0, 1.0), 9, 7).unwrap();
        let n = g.len();
        let d: Vec<f64> = (0..n).map(|k| g.interior_weights()[k] * (1.0 + (k % 3) as f64)).collect();
        let rhs: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let x = solve_symmetric(&g, 1.0, &d, &rhs, None).unwrap();
        let bw = g.bandwidth();
        let mut m = BandMatrix::zeros(n, bw, bw);
        for (r, c, v) in g.stiffness_triplets() {
            m.add(r, c, v);
        }
        for k in 0..n {
            m.add(k, k, d[k]);
        }
        let y = m.factor().unwrap().solve(&rhs);
        let err = x.iter().zip(&y).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn pcg_semidefinite_consistent() {
        // pure Neumann: K x = f with zero-mean f
        let g = Grid::unit_interval(21).unwrap();
        let f: Vec<f64> = (0..21).map(|k| (std::f64::consts::PI * k as f64 / 20.0).cos()).collect();
        let fw: Vec<f64> = f.iter().zip(g.interior_weights()).map(|(a, w)| a * w).collect();
        let x = solve_symmetric(&g, 1.0, &vec![0.0; 21], &fw, None).unwrap();
        let mut kx = vec![0.0; 21];
        g.apply_stiffness(&x, &mut kx);
        for (a, b) in kx.iter().zip(&fw) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn band_lu_solves_diagonally_dominant(n in 2usize..40, kl in 0usize..4, ku in 0usize..4, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v = if i == j { 10.0 } else { rng.random_range(-1.0..1.0) };
                    m.add(i, j, v);
                    dense[i][j] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = m.factor().unwrap().solve(&b);
            let r = dense_matvec(&dense, &x);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() < 1e-12);
            }
        }
    }
}
