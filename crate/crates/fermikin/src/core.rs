//! Domain types and the dense Hermitian linear-algebra contract the
//! rest of the crate builds on.
//!
//! Everything here is a plain immutable value; operations are pure
//! functions. Matrices are dense `Array2<Complex64>`, always in the
//! fixed eigenbasis of the unperturbed Hamiltonian.

use ndarray::Array2;
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = Array2<C64>;

/// Per-entry tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Default spectral tolerance for the admissibility window [0, 1].
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// The finite set of unperturbed eigenorbitals and their energies
/// (hbar = 1, so energies double as frequencies).
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalBasis {
    energies: Vec<f64>,
}

impl OrbitalBasis {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::config("orbital basis must have at least one orbital"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::config("orbital energies must be finite"));
        }
        Ok(OrbitalBasis { energies })
    }

    pub fn n_orbitals(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// The unperturbed Hamiltonian, diagonal in its own eigenbasis.
    pub fn h0(&self) -> HermitianOperator {
        HermitianOperator::from_real_diag(&self.energies)
    }
}

/// A validated N x N complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: Matrix,
}

impl HermitianOperator {
    /// Validates hermiticity entrywise to [`HERMITICITY_TOL`].
    pub fn new(mat: Matrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::dims("operator must be square", mat.nrows(), mat.ncols()));
        }
        let asym = asymmetry(&mat);
        if asym > HERMITICITY_TOL {
            return Err(Error::contract(format!(
                "matrix is not Hermitian (max asymmetry {asym:.3e})"
            )));
        }
        Ok(HermitianOperator { mat })
    }

    /// Wraps a matrix that is Hermitian by construction.
    pub(crate) fn wrap(mat: Matrix) -> Self {
        debug_assert!(asymmetry(&mat) <= 1e-10);
        HermitianOperator { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator { mat: Matrix::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator { mat: Array2::eye(dim) }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut mat = Matrix::zeros((n, n));
        for (i, d) in diag.iter().enumerate() {
            mat[(i, i)] = C64::new(*d, 0.0);
        }
        HermitianOperator { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    /// Real diagonal of the operator.
    pub fn real_diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }
}

/// One-particle density matrix; admissibility (spectrum within [0, 1])
/// is a property checked where needed, not a construction invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Self {
        DensityMatrix { op }
    }

    pub fn from_matrix(mat: Matrix) -> Result<Self> {
        Ok(DensityMatrix { op: HermitianOperator::new(mat)? })
    }

    /// Incoherent state diag(c_n) from occupation numbers.
    pub fn from_occupations(occupations: &[f64]) -> Result<Self> {
        for (i, c) in occupations.iter().enumerate() {
            if !(-ADMISSIBILITY_TOL..=1.0 + ADMISSIBILITY_TOL).contains(c) {
                return Err(Error::config(format!(
                    "occupation {i} = {c} outside [0, 1]"
                )));
            }
        }
        Ok(DensityMatrix { op: HermitianOperator::from_real_diag(occupations) })
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &Matrix {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Occupation numbers f(n) = <n|rho|n>.
    pub fn occupations(&self) -> Vec<f64> {
        self.op.real_diag()
    }

    pub fn trace(&self) -> f64 {
        self.occupations().iter().sum()
    }

    /// Spectrum within [-tol, 1 + tol].
    pub fn is_admissible(&self, tol: f64) -> bool {
        let (lo, hi) = spectral_bounds(&self.op);
        lo >= -tol && hi <= 1.0 + tol
    }
}

/// Transition coefficients omega[to][from] (and optionally the
/// pure-dephasing rates gamma), zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    omega: Array2<f64>,
    gamma: Option<Array2<f64>>,
}

impl RateTable {
    pub fn new(omega: Array2<f64>, gamma: Option<Array2<f64>>) -> Result<Self> {
        let n = omega.nrows();
        if n != omega.ncols() {
            return Err(Error::dims("rate table must be square", n, omega.ncols()));
        }
        for ((i, j), v) in omega.indexed_iter() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::config(format!("omega[{i}][{j}] = {v} must be nonnegative")));
            }
            if i == j && *v != 0.0 {
                return Err(Error::config(format!("omega[{i}][{i}] must be zero")));
            }
        }
        if let Some(g) = &gamma {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::dims("gamma must match omega", g.nrows(), n));
            }
            for ((i, j), v) in g.indexed_iter() {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::config(format!("gamma[{i}][{j}] = {v} must be nonnegative")));
                }
                if i == j && *v != 0.0 {
                    return Err(Error::config(format!("gamma[{i}][{i}] must be zero")));
                }
                // symmetry keeps the pure-dephasing term Hermitian-preserving
                if (*v - g[(j, i)]).abs() > 0.0 {
                    return Err(Error::config(format!(
                        "gamma must be symmetric: gamma[{i}][{j}] != gamma[{j}][{i}]"
                    )));
                }
            }
        }
        Ok(RateTable { omega, gamma })
    }

    pub fn from_omega(omega: Array2<f64>) -> Result<Self> {
        RateTable::new(omega, None)
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// Rate of the transition from orbital `from` into orbital `to`.
    pub fn omega(&self) -> &Array2<f64> {
        &self.omega
    }

    pub fn gamma(&self) -> Option<&Array2<f64>> {
        self.gamma.as_ref()
    }

    /// Same table with the transition direction reversed.
    pub fn transposed(&self) -> RateTable {
        RateTable {
            omega: self.omega.t().to_owned(),
            gamma: self.gamma.clone(),
        }
    }
}

/// Time-dependent perturbation V(t) on top of the diagonal H0.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    None,
    Constant(HermitianOperator),
    /// A cos(freq t + phase) with Hermitian amplitude A.
    Sinusoidal {
        amplitude: HermitianOperator,
        frequency: f64,
        phase: f64,
    },
    /// Segments (start_time, V); the segment active at t is the last
    /// one with start_time <= t, and V = 0 before the first.
    Piecewise(Vec<(f64, HermitianOperator)>),
}

/// H(t) = H0 + V(t) with H0 fixed by the orbital basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    basis: OrbitalBasis,
    drive: Drive,
}

impl HamiltonianSpec {
    pub fn new(basis: OrbitalBasis, drive: Drive) -> Result<Self> {
        let n = basis.n_orbitals();
        let check = |op: &HermitianOperator| -> Result<()> {
            if op.dim() != n {
                return Err(Error::dims("drive matrix vs basis", op.dim(), n));
            }
            Ok(())
        };
        match &drive {
            Drive::None => {}
            Drive::Constant(v) => check(v)?,
            Drive::Sinusoidal { amplitude, frequency, phase } => {
                check(amplitude)?;
                if !frequency.is_finite() || !phase.is_finite() {
                    return Err(Error::config("sinusoidal drive parameters must be finite"));
                }
            }
            Drive::Piecewise(segments) => {
                for (t, v) in segments {
                    if !t.is_finite() {
                        return Err(Error::config("piecewise drive times must be finite"));
                    }
                    check(v)?;
                }
            }
        }
        Ok(HamiltonianSpec { basis, drive })
    }

    pub fn free(basis: OrbitalBasis) -> Self {
        HamiltonianSpec { basis, drive: Drive::None }
    }

    pub fn basis(&self) -> &OrbitalBasis {
        &self.basis
    }

    pub fn drive(&self) -> &Drive {
        &self.drive
    }

    pub fn dim(&self) -> usize {
        self.basis.n_orbitals()
    }

    /// H(t) = H0 + V(t).
    pub fn evaluate(&self, t: f64) -> HermitianOperator {
        let mut mat = self.basis.h0().into_matrix();
        match &self.drive {
            Drive::None => {}
            Drive::Constant(v) => mat += v.matrix(),
            Drive::Sinusoidal { amplitude, frequency, phase } => {
                let c = C64::new((frequency * t + phase).cos(), 0.0);
                mat = mat + amplitude.matrix() * c;
            }
            Drive::Piecewise(segments) => {
                if let Some((_, v)) = segments.iter().rev().find(|(t0, _)| *t0 <= t) {
                    mat += v.matrix();
                }
            }
        }
        HermitianOperator::wrap(mat)
    }
}

/// Realizes H(t) = H0 + V(t) at a given time.
pub fn evaluate_hamiltonian(spec: &HamiltonianSpec, t: f64) -> HermitianOperator {
    spec.evaluate(t)
}

/// (rho + rho^dagger) / 2 together with the pre-hermitization
/// asymmetry max-entry, used as drift control after integration steps.
pub fn hermitize(mat: &Matrix) -> (HermitianOperator, f64) {
    let asym = asymmetry(mat);
    let n = mat.nrows();
    let mut out = Matrix::zeros((n, n));
    for i in 0..n {
        out[(i, i)] = C64::new(mat[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (mat[(i, j)] + mat[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    (HermitianOperator { mat: out }, asym)
}

fn asymmetry(mat: &Matrix) -> f64 {
    let n = mat.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (mat[(i, j)] - mat[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Smallest and largest eigenvalues, by cyclic Jacobi sweeps.
///
/// Iterates until the off-diagonal Frobenius norm drops below
/// 1e-14 times the matrix norm, which is plenty for the dimensions
/// this crate targets (N <= 64).
pub fn spectral_bounds(op: &HermitianOperator) -> (f64, f64) {
    let evs = jacobi_eigenvalues(op.matrix());
    let lo = evs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = evs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Operator norm max |eigenvalue| of a Hermitian operator.
pub fn sup_norm(op: &HermitianOperator) -> f64 {
    let (lo, hi) = spectral_bounds(op);
    lo.abs().max(hi.abs())
}

/// Operator norm of the Hermitian part of an arbitrary matrix
/// difference; convenience for sup-norm distances between states.
pub fn sup_norm_diff(a: &Matrix, b: &Matrix) -> f64 {
    let (h, _) = hermitize(&(a - b));
    sup_norm(&h)
}

/// All eigenvalues of a Hermitian matrix, ascending.
pub fn jacobi_eigenvalues(mat: &Matrix) -> Vec<f64> {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "jacobi_eigenvalues needs a square matrix");
    if n == 1 {
        return vec![mat[(0, 0)].re];
    }
    let mut a = mat.clone();
    let scale = frobenius(&a);
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        if offdiag_frobenius(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate_pair(&mut a, p, q);
            }
        }
    }
    let mut evs: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    evs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    evs
}

/// One complex Jacobi rotation zeroing a[(p, q)].
fn rotate_pair(a: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r < 1e-300 {
        return;
    }
    // phase factor bringing the pivot to the real axis
    let w = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // plane unitary U = diag(1, conj(w)) * [[c, s], [-s, c]]
    let upp = C64::new(c, 0.0);
    let upq = C64::new(s, 0.0);
    let uqp = -w.conj() * s;
    let uqq = w.conj() * c;
    let n = a.nrows();
    for k in 0..n {
        let (ap, aq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = ap * upp + aq * uqp;
        a[(k, q)] = ap * upq + aq * uqq;
    }
    for k in 0..n {
        let (ap, aq) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = upp.conj() * ap + uqp.conj() * aq;
        a[(q, k)] = upq.conj() * ap + uqq.conj() * aq;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

pub(crate) fn frobenius(mat: &Matrix) -> f64 {
    mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn offdiag_frobenius(mat: &Matrix) -> f64 {
    let n = mat.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += mat[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Largest |entry| off the diagonal; the coherence magnitude recorded
/// alongside trajectories.
pub fn offdiag_max(mat: &Matrix) -> f64 {
    let n = mat.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(mat[(i, j)].norm());
            }
        }
    }
    worst
}

/// A B + B A.
pub fn anticommutator(a: &Matrix, b: &Matrix) -> Matrix {
    a.dot(b) + b.dot(a)
}

/// i [rho, h] = i (rho h - h rho).
pub fn unitary_term(rho: &Matrix, h: &Matrix) -> Matrix {
    let i = C64::new(0.0, 1.0);
    (rho.dot(h) - h.dot(rho)).mapv(|z| i * z)
}

pub fn adjoint(mat: &Matrix) -> Matrix {
    mat.t().mapv(|z| z.conj())
}
