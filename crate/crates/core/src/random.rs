//! Seeded random matrix generators for suites and tests.

use nalgebra::DVector;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matcore::{c, op_norm, orthonormalize, symmetrize, ComplexMatrix, C64};

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.gen_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        // Box–Muller
        let u1: f64 = self.0.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.0.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn complex_normal(&mut self) -> C64 {
        c(self.normal(), self.normal()) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn gaussian(&mut self, r: usize, k: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, k, |_, _| self.complex_normal())
    }

    pub fn vector(&mut self, n: usize) -> DVector<C64> {
        DVector::from_fn(n, |_, _| self.complex_normal())
    }

    pub fn unit_vector(&mut self, n: usize) -> DVector<C64> {
        let v = self.vector(n);
        let nv = v.norm();
        v / c(nv, 0.0)
    }

    /// Random Hermitian matrix with unit operator norm.
    pub fn hermitian(&mut self, n: usize) -> ComplexMatrix {
        let g = self.gaussian(n, n);
        let h = symmetrize(&g);
        let nh = op_norm(&h);
        if nh == 0.0 {
            h
        } else {
            h / c(nh, 0.0)
        }
    }

    /// Random Hermitian contraction with norm drawn in (0, 1].
    pub fn contraction(&mut self, n: usize) -> ComplexMatrix {
        let s = self.uniform(0.2, 1.0);
        self.hermitian(n) * c(s, 0.0)
    }

    /// Haar-like random unitary from a QR of a Gaussian matrix.
    pub fn unitary(&mut self, n: usize) -> ComplexMatrix {
        let g = self.gaussian(n, n);
        let q = g.clone().qr();
        let (qm, r) = (q.q(), q.r());
        let mut out = qm;
        for j in 0..n {
            let d = r[(j, j)];
            let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
            for i in 0..n {
                out[(i, j)] *= ph;
            }
        }
        out
    }

    /// Orthonormal basis of a random k-dimensional subspace of ℂⁿ.
    pub fn subspace(&mut self, n: usize, k: usize) -> ComplexMatrix {
        orthonormalize(&self.gaussian(n, k), 1e-12)
    }

    pub fn reals(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }
}
