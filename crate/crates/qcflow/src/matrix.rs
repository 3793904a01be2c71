//! Small symmetric matrices for 1D/2D Hessians, stored as the upper triangle.

/// Symmetric matrix in dimension 1 or 2.
///
/// Storage: `[xx]` in 1D, `[xx, xy, yy]` in 2D. Symmetry is structural.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    dim: usize,
    m: [f64; 3],
}

impl SymMat {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        SymMat { dim, m: [0.0; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = SymMat::zero(dim);
        s.m[0] = 1.0;
        if dim == 2 {
            s.m[2] = 1.0;
        }
        s
    }

    pub fn new_1d(xx: f64) -> Self {
        SymMat { dim: 1, m: [xx, 0.0, 0.0] }
    }

    pub fn new_2d(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat { dim: 2, m: [xx, xy, yy] }
    }

    /// Rank-one matrix `c * p ⊗ p`.
    pub fn outer(p: &[f64], c: f64) -> Self {
        match p.len() {
            1 => SymMat::new_1d(c * p[0] * p[0]),
            2 => SymMat::new_2d(c * p[0] * p[0], c * p[0] * p[1], c * p[1] * p[1]),
            d => panic!("unsupported dimension {d}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xx(&self) -> f64 {
        self.m[0]
    }

    pub fn xy(&self) -> f64 {
        assert_eq!(self.dim, 2);
        self.m[1]
    }

    pub fn yy(&self) -> f64 {
        assert_eq!(self.dim, 2);
        self.m[2]
    }

    pub fn trace(&self) -> f64 {
        if self.dim == 1 {
            self.m[0]
        } else {
            self.m[0] + self.m[2]
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMat { dim: self.dim, m: [c * self.m[0], c * self.m[1], c * self.m[2]] }
    }

    pub fn add(&self, other: &SymMat) -> Self {
        assert_eq!(self.dim, other.dim);
        SymMat {
            dim: self.dim,
            m: [self.m[0] + other.m[0], self.m[1] + other.m[1], self.m[2] + other.m[2]],
        }
    }

    /// Quadratic form v^T M v.
    pub fn quad(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim);
        if self.dim == 1 {
            self.m[0] * v[0] * v[0]
        } else {
            self.m[0] * v[0] * v[0] + 2.0 * self.m[1] * v[0] * v[1] + self.m[2] * v[1] * v[1]
        }
    }

    /// tr(A * M) for symmetric A.
    pub fn trace_product(&self, a: &SymMat) -> f64 {
        assert_eq!(self.dim, a.dim);
        if self.dim == 1 {
            self.m[0] * a.m[0]
        } else {
            self.m[0] * a.m[0] + 2.0 * self.m[1] * a.m[1] + self.m[2] * a.m[2]
        }
    }

    /// Smallest eigenvalue.
    pub fn eig_min(&self) -> f64 {
        if self.dim == 1 {
            self.m[0]
        } else {
            let half_tr = 0.5 * (self.m[0] + self.m[2]);
            let det = self.m[0] * self.m[2] - self.m[1] * self.m[1];
            half_tr - (half_tr * half_tr - det).max(0.0).sqrt()
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eig_min() >= -tol
    }

    /// Frobenius norm; an upper bound for the operator norm.
    pub fn frobenius(&self) -> f64 {
        if self.dim == 1 {
            self.m[0].abs()
        } else {
            (self.m[0] * self.m[0] + 2.0 * self.m[1] * self.m[1] + self.m[2] * self.m[2]).sqrt()
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_and_quad() {
        let m = SymMat::new_2d(2.0, 1.0, 3.0);
        assert_eq!(m.trace(), 5.0);
        // v = (1, -1): v^T M v = 2 - 2 + 3 = 3
        assert_eq!(m.quad(&[1.0, -1.0]), 3.0);
    }

    #[test]
    fn outer_product() {
        let m = SymMat::outer(&[2.0, -1.0], 0.5);
        assert_eq!(m.xx(), 2.0);
        assert_eq!(m.xy(), -1.0);
        assert_eq!(m.yy(), 0.5);
    }

    #[test]
    fn eig_min_2d() {
        let m = SymMat::new_2d(2.0, 0.0, 3.0);
        assert!((m.eig_min() - 2.0).abs() < 1e-14);
        let r = SymMat::outer(&[1.0, 1.0], 1.0); // rank one, eigs {0, 2}
        assert!(r.eig_min().abs() < 1e-14);
        assert!(r.is_psd(1e-12));
    }

    #[test]
    fn trace_product_symmetric() {
        let a = SymMat::new_2d(1.0, 2.0, 3.0);
        let b = SymMat::new_2d(4.0, -1.0, 2.0);
        // tr(AB) = a_xx b_xx + 2 a_xy b_xy + a_yy b_yy
        assert_eq!(a.trace_product(&b), 4.0 - 4.0 + 6.0);
    }
}
