//! Small dense helpers for vectors in ℝⁿ (n ≤ 3 for metrics, arbitrary for cones).

use nalgebra::{DMatrix, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Symmetric matrix of size n ≤ 3 stored on the stack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    n: usize,
    a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "SymMat supports n in 1..=3");
        SymMat { n, a: [[0.0; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = SymMat::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.a[i][i] = *v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Sets both (i, j) and (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.a.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        m
    }

    pub fn plus(&self, other: &SymMat) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] += other.a[i][j];
            }
        }
        m
    }

    pub fn quad(&self, v: &[f64]) -> f64 {
        self.bilinear(v, v)
    }

    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut r = 0.0;
            for j in 0..self.n {
                r += self.a[i][j] * v[j];
            }
            s += u[i] * r;
        }
        s
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i][j] * v[j]).sum())
            .collect()
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    pub fn inverse(&self) -> Option<SymMat> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let a = &self.a;
        let mut m = SymMat::zeros(self.n);
        match self.n {
            1 => m.a[0][0] = 1.0 / d,
            2 => {
                m.a[0][0] = a[1][1] / d;
                m.a[1][1] = a[0][0] / d;
                m.a[0][1] = -a[0][1] / d;
                m.a[1][0] = -a[1][0] / d;
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        m.a[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / d;
                    }
                }
            }
        }
        Some(m)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.a[i][j])
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let e = SymmetricEigen::new(self.to_dmatrix());
        let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
        v.sort_by(|x, y| x.total_cmp(y));
        v
    }

    /// Eigenvector of the most negative eigenvalue, unit euclidean length.
    pub fn most_negative_eigenvector(&self) -> (f64, Vec<f64>) {
        let e = SymmetricEigen::new(self.to_dmatrix());
        let (k, lam) = e
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, l)| (k, *l))
            .expect("nonempty spectrum");
        (lam, e.eigenvectors.column(k).iter().copied().collect())
    }

    /// (negative, positive, near-zero) eigenvalue counts, with `tol` relative
    /// to the largest eigenvalue magnitude.
    pub fn inertia(&self, tol: f64) -> (usize, usize, usize) {
        let ev = self.eigenvalues();
        let scale = ev.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut out = (0, 0, 0);
        for x in ev {
            if x.abs() <= tol * scale {
                out.2 += 1;
            } else if x < 0.0 {
                out.0 += 1;
            } else {
                out.1 += 1;
            }
        }
        out
    }
}

/// Orthonormal complement of `x` with respect to the inner product `inner`,
/// built by Gram-Schmidt on the coordinate axes ordered by increasing
/// `|x_i|`. `x` must be unit length for `inner`.
pub fn orthonormal_complement(inner: &SymMat, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()).then(i.cmp(&j)));
    let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
    for &ax in &axes {
        if basis.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[ax] = 1.0;
        for b in &basis {
            let c = inner.bilinear(&v, b);
            v = axpy(&v, -c, b);
        }
        let len = inner.quad(&v).max(0.0).sqrt();
        if len > 1e-9 {
            basis.push(scale(&v, 1.0 / len));
        }
    }
    basis.split_off(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip_3d() {
        let m = SymMat::from_rows(&[
            vec![1.0, 0.0, 0.5],
            vec![0.0, 1.0, -0.2],
            vec![0.5, -0.2, -0.3],
        ]);
        let inv = m.inverse().unwrap();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let back = m.apply(&inv.apply(&e));
            for j in 0..3 {
                assert!((back[j] - e[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inertia_of_minkowski() {
        assert_eq!(SymMat::diag(&[-1.0, 1.0, 1.0]).inertia(1e-12), (1, 2, 0));
        assert_eq!(SymMat::diag(&[-1.0, 0.0]).inertia(1e-12), (1, 0, 1));
    }

    #[test]
    fn complement_is_orthonormal() {
        let g = SymMat::identity(3);
        let x = normalized(&[0.0, 0.5, 1.0]).unwrap();
        let c = orthonormal_complement(&g, &x);
        assert_eq!(c.len(), 2);
        assert!(dot(&c[0], &x).abs() < 1e-12);
        assert!(dot(&c[1], &x).abs() < 1e-12);
        assert!(dot(&c[0], &c[1]).abs() < 1e-12);
        // first complement vector is the x axis
        assert!((c[0][0] - 1.0).abs() < 1e-12);
    }
}
