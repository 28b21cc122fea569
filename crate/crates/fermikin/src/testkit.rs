//! Helpers shared by the unit and integration test suites: seeded
//! random admissible states, random rate tables, and a slow but
//! trustworthy matrix exponential. Not part of the public API.

use ndarray::Array2;

use crate::core::{adjoint, C64, DensityMatrix, HermitianOperator, Matrix, RateTable};

/// Small deterministic generator (SplitMix64) so the test suites do
/// not need to share an external RNG dependency across crates.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn complex_normal(&mut self) -> C64 {
        C64::new(self.normal(), self.normal())
    }
}

/// Haar-ish random unitary: Gram-Schmidt on a complex Gaussian
/// matrix.
pub fn random_unitary(rng: &mut SplitMix64, n: usize) -> Matrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<C64> = (0..n).map(|_| rng.complex_normal()).collect();
        for prev in &cols {
            let overlap: C64 = prev.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= overlap * p;
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        cols.push(v);
    }
    let mut u = Matrix::zeros((n, n));
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            u[(i, j)] = *z;
        }
    }
    u
}

/// Random admissible density matrix with spectrum drawn uniformly
/// from the given interval; full-rank and coherent for generic draws.
pub fn random_density(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> DensityMatrix {
    let u = random_unitary(rng, n);
    let mut d = Matrix::zeros((n, n));
    for i in 0..n {
        d[(i, i)] = C64::new(rng.uniform_in(lo, hi), 0.0);
    }
    let m = u.dot(&d).dot(&adjoint(&u));
    let (h, _) = crate::core::hermitize(&m);
    DensityMatrix::new(h)
}

/// Random transition table with bound constant at most `m_max`.
pub fn random_rates(rng: &mut SplitMix64, n: usize, m_max: f64) -> RateTable {
    let mut w = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[(i, j)] = rng.uniform();
            }
        }
    }
    let table = RateTable::from_omega(w.clone()).expect("valid draw");
    let m = crate::generators::transition_bound_m(&table);
    if m > 0.0 {
        let scale = rng.uniform_in(0.2, 1.0) * m_max / m;
        w.mapv_inplace(|x| x * scale);
    }
    RateTable::from_omega(w).expect("valid scaled draw")
}

/// Random Hermitian matrix with entries of the given scale.
pub fn random_hermitian(rng: &mut SplitMix64, n: usize, scale: f64) -> HermitianOperator {
    let mut m = Matrix::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            if i == j {
                m[(i, i)] = C64::new(scale * rng.normal(), 0.0);
            } else {
                let z = rng.complex_normal() * (scale / std::f64::consts::SQRT_2);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
    }
    HermitianOperator::new(m).expect("hermitian by construction")
}

/// Matrix exponential by scaling and squaring with a Taylor series;
/// slow, but accurate enough to act as an oracle.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings as i32));

    let mut result: Matrix = Array2::eye(n);
    let mut term: Matrix = Array2::eye(n);
    for k in 1..40 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result = result + &term;
        let worst = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{spectral_bounds, sup_norm_diff};

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = SplitMix64::new(7);
        for n in [2, 4, 6] {
            let u = random_unitary(&mut rng, n);
            let g = adjoint(&u).dot(&u);
            assert!(sup_norm_diff(&g, &Array2::eye(n)) < 1e-12);
        }
    }

    #[test]
    fn random_density_is_admissible() {
        let mut rng = SplitMix64::new(11);
        for n in [2, 3, 5] {
            let rho = random_density(&mut rng, n, 0.1, 0.9);
            let (lo, hi) = spectral_bounds(rho.op());
            assert!(lo >= 0.1 - 1e-10 && hi <= 0.9 + 1e-10);
            assert!(crate::core::offdiag_max(rho.matrix()) > 1e-4, "generic draw is coherent");
        }
    }

    #[test]
    fn random_rates_respect_bound() {
        let mut rng = SplitMix64::new(13);
        for n in [2, 4, 8] {
            let rates = random_rates(&mut rng, n, 4.0);
            let m = crate::generators::transition_bound_m(&rates);
            assert!(m > 0.0 && m <= 4.0 + 1e-12);
        }
    }

    #[test]
    fn expm_matches_known_cases() {
        // exp of zero
        let z = Matrix::zeros((3, 3));
        assert!(sup_norm_diff(&expm(&z), &Array2::eye(3)) < 1e-15);

        // diagonal case
        let mut d = Matrix::zeros((2, 2));
        d[(0, 0)] = C64::new(1.0, 0.0);
        d[(1, 1)] = C64::new(0.0, 2.0);
        let e = expm(&d);
        assert!((e[(0, 0)] - C64::new(1f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - C64::new(0.0, 2.0).exp()).norm() < 1e-13);

        // exp(i theta sigma_x) = cos theta I + i sin theta sigma_x
        let theta = 0.7;
        let mut sx = Matrix::zeros((2, 2));
        sx[(0, 1)] = C64::new(0.0, theta);
        sx[(1, 0)] = C64::new(0.0, theta);
        let e = expm(&sx);
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-13);
        assert!((e[(0, 1)].im - theta.sin()).abs() < 1e-13);
    }
}
