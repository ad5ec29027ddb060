//! Small dense complex linear algebra for vectors of antenna elements.

use crate::C64;

/// `conj(a) · b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Returns `a / ‖a‖`, or `None` when the norm is below `1e-300`.
pub fn normalized(a: &[C64]) -> Option<Vec<C64>> {
    let n = norm(a);
    (n > 1e-300).then(|| a.iter().map(|x| x / n).collect())
}

/// Removes the component of `v` along the unit vector `u`.
pub fn project_out(v: &mut [C64], u: &[C64]) {
    let c = inner(u, v);
    for (x, y) in v.iter_mut().zip(u) {
        *x -= c * y;
    }
}

/// Dense Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<C64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = C64::new(*v, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. The caller guarantees the
    /// Hermitian symmetry; [`HermitianMatrix::hermitian_error`] can check it.
    pub fn from_row_major(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data must hold n*n entries");
        Self { n, data }
    }

    /// `B B^H` for a row-major `n × k` matrix `B`.
    pub fn gram(n: usize, b: &[C64]) -> Self {
        let k = b.len() / n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = (0..k).map(|t| b[i * k + t] * b[j * k + t].conj()).sum();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn as_row_major(&self) -> &[C64] {
        &self.data
    }

    /// `self += scale · v v^H`.
    pub fn add_outer(&mut self, scale: f64, v: &[C64]) {
        let n = self.n;
        for i in 0..n {
            let vi = v[i] * scale;
            for j in 0..n {
                self.data[i * n + j] += vi * v[j].conj();
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Matrix product, used for repeated squaring.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for t in 0..n {
                let a = self.data[i * n + t];
                for j in 0..n {
                    out[i * n + j] += a * other.data[t * n + j];
                }
            }
        }
        Self { n, data: out }
    }

    /// Real part of `a^H M a`.
    pub fn quadratic_form(&self, a: &[C64]) -> f64 {
        inner(a, &self.mul_vec(a)).re
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|M_ij - conj(M_ji)|`.
    pub fn hermitian_error(&self) -> f64 {
        let n = self.n;
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                e = e.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        e
    }
}
