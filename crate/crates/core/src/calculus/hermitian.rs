use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A 2×2 Hermitian matrix `[[a11, a12], [conj(a12), a22]]`, the pointwise
/// value of a real (1,1)-form `i Σ a_{j k̄} dz_j ∧ dz̄_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hermitian2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: Complex64,
}

impl Hermitian2 {
    pub const ZERO: Self = Self::diag(0.0, 0.0);
    pub const IDENTITY: Self = Self::diag(1.0, 1.0);

    pub const fn new(a11: f64, a22: f64, a12: Complex64) -> Self {
        Self { a11, a22, a12 }
    }

    pub const fn diag(a11: f64, a22: f64) -> Self {
        Self {
            a11,
            a22,
            a12: Complex64::new(0.0, 0.0),
        }
    }

    pub fn scalar(s: f64) -> Self {
        Self::diag(s, s)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Mixed wedge density `D(α, β)`, so that `α ∧ β = D(α,β) (i dz1 dz̄1)(i dz2 dz̄2)`.
    pub fn wedge(&self, other: &Self) -> f64 {
        self.a11 * other.a22 + self.a22 * other.a11 - 2.0 * (self.a12 * other.a12.conj()).re
    }

    pub fn is_positive(&self) -> bool {
        self.a11 > 0.0 && self.det() > 0.0
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_gap = (0.25 * (self.a11 - self.a22).powi(2) + self.a12.norm_sqr()).sqrt();
        (mean - half_gap, mean + half_gap)
    }

    /// Roots of `det(β − λ α) = 0` with `α = self`, ascending. Requires `α > 0`.
    pub fn generalized_eigenvalues(&self, beta: &Self) -> (f64, f64) {
        let da = self.det();
        let b = self.wedge(beta);
        let disc = (b * b - 4.0 * da * beta.det()).max(0.0).sqrt();
        // Stable quadratic roots.
        let q = 0.5 * (b + b.signum() * disc);
        let (r1, r2) = if q == 0.0 {
            (0.0, 0.0)
        } else {
            (q / da, beta.det() / q)
        };
        if r1 <= r2 {
            (r1, r2)
        } else {
            (r2, r1)
        }
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self {
            a11: self.a22 / d,
            a22: self.a11 / d,
            a12: -self.a12 / d,
        }
    }

    /// `tr_α β = α^{j k̄} β_{j k̄}` with `α = self`.
    pub fn trace_of(&self, beta: &Self) -> f64 {
        2.0 * self.wedge(beta) / (2.0 * self.det())
    }

    /// Conjugation `A B A` for Hermitian `A, B` (used for `χ⁻¹ ω χ⁻¹`).
    pub fn sandwich(&self, b: &Self) -> Self {
        // Full complex 2x2 product A·B·A.
        let a = self.to_matrix();
        let bm = b.to_matrix();
        let mul = |x: [[Complex64; 2]; 2], y: [[Complex64; 2]; 2]| {
            let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            out
        };
        let m = mul(mul(a, bm), a);
        Self {
            a11: m[0][0].re,
            a22: m[1][1].re,
            a12: m[0][1],
        }
    }

    fn to_matrix(self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.a11, 0.0), self.a12],
            [self.a12.conj(), Complex64::new(self.a22, 0.0)],
        ]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            a11: s * self.a11,
            a22: s * self.a22,
            a12: self.a12 * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a22.is_finite() && self.a12.re.is_finite() && self.a12.im.is_finite()
    }
}

impl std::ops::Add for Hermitian2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            a11: self.a11 + o.a11,
            a22: self.a22 + o.a22,
            a12: self.a12 + o.a12,
        }
    }
}

impl std::ops::Sub for Hermitian2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            a11: self.a11 - o.a11,
            a22: self.a22 - o.a22,
            a12: self.a12 - o.a12,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_examples() {
        let id = Hermitian2::IDENTITY;
        assert_eq!(id.generalized_eigenvalues(&Hermitian2::diag(5.0, 3.0)), (3.0, 5.0));
        let (a, b) = Hermitian2::diag(2.0, 2.0).generalized_eigenvalues(&id);
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let m = Hermitian2::new(2.0, 2.0, Complex64::new(1.0, 0.0));
        let (a, b) = id.generalized_eigenvalues(&m);
        assert!((a - 1.0).abs() < 1e-14 && (b - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sandwich_matches_diag() {
        let a = Hermitian2::diag(2.0, 0.5);
        let b = Hermitian2::diag(3.0, 4.0);
        let s = a.sandwich(&b);
        assert!((s.a11 - 12.0).abs() < 1e-14 && (s.a22 - 1.0).abs() < 1e-14);
    }
}
