//! Builders for every relaxation right-hand side: the nonlinear
//! fermionic family, the linear Markoff/Lindblad families, and the
//! diagonal A1/A2 operators they share.
//!
//! Rate orientation everywhere: `omega[to][from]` is the rate of the
//! transition from orbital `from` into orbital `to`. Relaxation is
//! always written in the fixed H0 eigenbasis, drive or not.


use crate::core::{
    anticommutator, unitary_term, C64, DensityMatrix, HermitianOperator, Matrix, RateTable,
    adjoint,
};
use crate::{Error, Result};

/// The diagonal loss/gain operators A1, A2 evaluated on some state.
#[derive(Debug, Clone)]
pub struct RelaxationPair {
    pub a1: HermitianOperator,
    pub a2: HermitianOperator,
}

impl RelaxationPair {
    /// A1 + A2 as a real diagonal.
    pub fn sum_diag(&self) -> Vec<f64> {
        self.a1
            .real_diag()
            .iter()
            .zip(self.a2.real_diag())
            .map(|(x, y)| x + y)
            .collect()
    }
}

/// A finite collection of jump operators.
#[derive(Debug, Clone)]
pub struct JumpOperatorSet {
    pub ops: Vec<Matrix>,
}

impl JumpOperatorSet {
    pub fn new(ops: Vec<Matrix>) -> Result<Self> {
        for (k, op) in ops.iter().enumerate() {
            if op.nrows() != op.ncols() {
                return Err(Error::dims("jump operator must be square", op.nrows(), op.ncols()));
            }
            if op.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::config(format!("jump operator {k} has non-finite entries")));
            }
        }
        Ok(JumpOperatorSet { ops })
    }
}

/// The smallest M dominating half the row and column sums of the
/// rate table; bounds every transition rate and sets the contraction
/// window 1/(4M).
pub fn transition_bound_m(rates: &RateTable) -> f64 {
    let omega = rates.omega();
    let n = rates.dim();
    let mut m = 0.0f64;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| omega[(i, j)]).sum();
        let col: f64 = (0..n).map(|j| omega[(j, i)]).sum();
        m = m.max(0.5 * row).max(0.5 * col);
    }
    m
}

fn check_dims(rates: &RateTable, dim: usize, context: &str) -> Result<()> {
    if rates.dim() != dim {
        return Err(Error::dims(context, rates.dim(), dim));
    }
    Ok(())
}

/// A1 from the diagonal of a state: entry n' is
/// (1/2) sum_n omega[n][n'] (1 - f(n)).
pub fn build_a1_from_diag(rates: &RateTable, diag: &[f64]) -> HermitianOperator {
    let omega = rates.omega();
    let n = diag.len();
    let mut out = vec![0.0; n];
    for (np, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, f) in diag.iter().enumerate() {
            acc += omega[(i, np)] * (1.0 - f);
        }
        *slot = 0.5 * acc;
    }
    HermitianOperator::from_real_diag(&out)
}

/// A2 from the diagonal of a state: entry n is
/// (1/2) sum_n' omega[n][n'] f(n').
pub fn build_a2_from_diag(rates: &RateTable, diag: &[f64]) -> HermitianOperator {
    let omega = rates.omega();
    let n = diag.len();
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, f) in diag.iter().enumerate() {
            acc += omega[(i, j)] * f;
        }
        *slot = 0.5 * acc;
    }
    HermitianOperator::from_real_diag(&out)
}

pub fn build_a1(rates: &RateTable, rho: &DensityMatrix) -> Result<HermitianOperator> {
    check_dims(rates, rho.dim(), "build_a1: rates vs state")?;
    Ok(build_a1_from_diag(rates, &rho.occupations()))
}

pub fn build_a2(rates: &RateTable, rho: &DensityMatrix) -> Result<HermitianOperator> {
    check_dims(rates, rho.dim(), "build_a2: rates vs state")?;
    Ok(build_a2_from_diag(rates, &rho.occupations()))
}

pub fn relaxation_pair(rates: &RateTable, rho: &DensityMatrix) -> Result<RelaxationPair> {
    Ok(RelaxationPair {
        a1: build_a1(rates, rho)?,
        a2: build_a2(rates, rho)?,
    })
}

/// Loss factor -{rho, A1(rho)}.
pub fn loss_factor(rho: &DensityMatrix, rates: &RateTable) -> Result<HermitianOperator> {
    let a1 = build_a1(rates, rho)?;
    let m = anticommutator(rho.matrix(), a1.matrix()).mapv(|z| -z);
    Ok(HermitianOperator::wrap(m))
}

/// Gain factor {I - rho, A2(rho)}.
pub fn gain_factor(rho: &DensityMatrix, rates: &RateTable) -> Result<HermitianOperator> {
    let a2 = build_a2(rates, rho)?;
    let hole = hole_matrix(rho.matrix());
    Ok(HermitianOperator::wrap(anticommutator(&hole, a2.matrix())))
}

fn hole_matrix(rho: &Matrix) -> Matrix {
    let mut m = rho.mapv(|z| -z);
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(1.0, 0.0);
    }
    m
}

/// Full nonlinear fermionic right-hand side
/// i[rho, H] - {rho, A1(rho)} + {I - rho, A2(rho)}.
pub fn fermion_rhs(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    rates: &RateTable,
) -> Result<HermitianOperator> {
    check_dims(rates, rho.dim(), "fermion_rhs: rates vs state")?;
    if h.dim() != rho.dim() {
        return Err(Error::dims("fermion_rhs: hamiltonian vs state", h.dim(), rho.dim()));
    }
    Ok(HermitianOperator::wrap(fermion_rhs_matrix(rho.matrix(), h.matrix(), rates)))
}

pub fn fermion_rhs_matrix(rho: &Matrix, h: &Matrix, rates: &RateTable) -> Matrix {
    let diag: Vec<f64> = (0..rho.nrows()).map(|i| rho[(i, i)].re).collect();
    let a1 = build_a1_from_diag(rates, &diag);
    let a2 = build_a2_from_diag(rates, &diag);
    let hole = hole_matrix(rho);
    unitary_term(rho, h) - anticommutator(rho, a1.matrix()) + anticommutator(&hole, a2.matrix())
}

/// Linear Markoff right-hand side: i[rho, H] plus the transition
/// term, plus the pure-dephasing term when requested (which needs
/// gamma in the rate table).
pub fn markoff_rhs(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    rates: &RateTable,
    include_dephasing: bool,
) -> Result<HermitianOperator> {
    check_dims(rates, rho.dim(), "markoff_rhs: rates vs state")?;
    if h.dim() != rho.dim() {
        return Err(Error::dims("markoff_rhs: hamiltonian vs state", h.dim(), rho.dim()));
    }
    if include_dephasing && rates.gamma().is_none() {
        return Err(Error::config("dephasing requested but no gamma rates configured"));
    }
    Ok(HermitianOperator::wrap(markoff_rhs_matrix(
        rho.matrix(),
        h.matrix(),
        rates,
        include_dephasing,
    )))
}

pub fn markoff_rhs_matrix(
    rho: &Matrix,
    h: &Matrix,
    rates: &RateTable,
    include_dephasing: bool,
) -> Matrix {
    let w = rates.omega();
    let n = rho.nrows();
    // loss: -(1/2) sum w[n][n'] {rho, |n'><n'|}; as a diagonal A
    let mut a = vec![0.0; n];
    for (np, slot) in a.iter_mut().enumerate() {
        *slot = 0.5 * (0..n).map(|i| w[(i, np)]).sum::<f64>();
    }
    let a_op = HermitianOperator::from_real_diag(&a);
    let mut out = unitary_term(rho, h) - anticommutator(rho, a_op.matrix());
    // gain: sum w[n][n'] |n><n'| rho |n'><n| lands on the diagonal only
    for i in 0..n {
        let g: f64 = (0..n).map(|j| w[(i, j)] * rho[(j, j)].re).sum();
        out[(i, i)] += C64::new(g, 0.0);
    }
    if include_dephasing {
        let g = rates.gamma().expect("gamma checked by caller");
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out[(i, j)] -= rho[(i, j)] * g[(i, j)];
                }
            }
        }
    }
    out
}

/// Jump operators for the transition table: one per nonzero
/// w[n][n'], equal to sqrt(w[n][n']) |n'><n|.
pub fn jump_ops_from_rates(rates: &RateTable) -> JumpOperatorSet {
    let w = rates.omega();
    let n = rates.dim();
    let mut ops = Vec::new();
    for to in 0..n {
        for from in 0..n {
            let r = w[(to, from)];
            if r > 0.0 {
                let mut m = Matrix::zeros((n, n));
                m[(from, to)] = C64::new(r.sqrt(), 0.0);
                ops.push(m);
            }
        }
    }
    JumpOperatorSet { ops }
}

/// Lindblad-form right-hand side
/// i[rho, H] - (1/2) sum {rho, V V+} + sum V+ rho V,
/// with the operator placement exactly as in the transition-term
/// identity (see [`jump_ops_from_rates`]).
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    jumps: &JumpOperatorSet,
) -> Result<HermitianOperator> {
    if h.dim() != rho.dim() {
        return Err(Error::dims("lindblad_rhs: hamiltonian vs state", h.dim(), rho.dim()));
    }
    for op in &jumps.ops {
        if op.nrows() != rho.dim() {
            return Err(Error::dims("lindblad_rhs: jump vs state", op.nrows(), rho.dim()));
        }
    }
    Ok(HermitianOperator::wrap(lindblad_rhs_matrix(rho.matrix(), h.matrix(), jumps)))
}

pub fn lindblad_rhs_matrix(rho: &Matrix, h: &Matrix, jumps: &JumpOperatorSet) -> Matrix {
    let mut out = unitary_term(rho, h);
    for v in &jumps.ops {
        let vdag = adjoint(v);
        let vvdag = v.dot(&vdag);
        out = out - anticommutator(rho, &vvdag).mapv(|z| z * 0.5);
        out = out + vdag.dot(rho).dot(v);
    }
    out
}

/// Fermionic Lindblad-form right-hand side
/// i[rho, H] - (1/2) sum {rho, V (I - rho) V+} + (1/2) sum {I - rho, V+ rho V}.
pub fn lindblad_fermion_rhs(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    jumps: &JumpOperatorSet,
) -> Result<HermitianOperator> {
    if h.dim() != rho.dim() {
        return Err(Error::dims("lindblad_fermion_rhs: hamiltonian vs state", h.dim(), rho.dim()));
    }
    for op in &jumps.ops {
        if op.nrows() != rho.dim() {
            return Err(Error::dims("lindblad_fermion_rhs: jump vs state", op.nrows(), rho.dim()));
        }
    }
    Ok(HermitianOperator::wrap(lindblad_fermion_rhs_matrix(rho.matrix(), h.matrix(), jumps)))
}

pub fn lindblad_fermion_rhs_matrix(rho: &Matrix, h: &Matrix, jumps: &JumpOperatorSet) -> Matrix {
    let hole = hole_matrix(rho);
    let mut out = unitary_term(rho, h);
    for v in &jumps.ops {
        let vdag = adjoint(v);
        let loss_core = v.dot(&hole).dot(&vdag);
        let gain_core = vdag.dot(rho).dot(v);
        out = out - anticommutator(rho, &loss_core).mapv(|z| z * 0.5);
        out = out + anticommutator(&hole, &gain_core).mapv(|z| z * 0.5);
    }
    out
}

/// The general two-antihermitian form
/// i[rho, H] + {rho, A_p} - {I - rho, A_pbar},
/// requiring -A_p and -A_pbar positive semidefinite.
pub fn general_rhs(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    a_p: &HermitianOperator,
    a_pbar: &HermitianOperator,
) -> Result<HermitianOperator> {
    validate_negative_semidefinite(a_p, "a_p")?;
    validate_negative_semidefinite(a_pbar, "a_pbar")?;
    if a_p.dim() != rho.dim() || a_pbar.dim() != rho.dim() || h.dim() != rho.dim() {
        return Err(Error::dims("general_rhs operand dimensions", h.dim(), rho.dim()));
    }
    Ok(HermitianOperator::wrap(general_rhs_matrix(
        rho.matrix(),
        h.matrix(),
        a_p.matrix(),
        a_pbar.matrix(),
    )))
}

pub fn general_rhs_matrix(rho: &Matrix, h: &Matrix, a_p: &Matrix, a_pbar: &Matrix) -> Matrix {
    let hole = hole_matrix(rho);
    unitary_term(rho, h) + anticommutator(rho, a_p) - anticommutator(&hole, a_pbar)
}

/// Rejects operators whose largest eigenvalue exceeds a small slack.
pub fn validate_negative_semidefinite(op: &HermitianOperator, name: &str) -> Result<()> {
    let (_, hi) = crate::core::spectral_bounds(op);
    if hi > 1e-9 {
        return Err(Error::contract(format!(
            "-{name} must be positive semidefinite (lambda_max({name}) = {hi:.3e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{spectral_bounds, sup_norm, OrbitalBasis};
    use ndarray::{array, Array2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_level_rates() -> RateTable {
        RateTable::from_omega(array![[0.0, 1.0], [2.0, 0.0]]).unwrap()
    }

    fn diag_state(f: &[f64]) -> DensityMatrix {
        DensityMatrix::from_occupations(f).unwrap()
    }

    #[test]
    fn transition_bound_examples() {
        let zero = RateTable::from_omega(Array2::zeros((3, 3))).unwrap();
        assert_eq!(transition_bound_m(&zero), 0.0);

        assert!((transition_bound_m(&two_level_rates()) - 1.0).abs() < 1e-15);

        // uniform off-diagonal rate r on N=3: every row/column sums to 2r
        let r = 0.7;
        let mut omega = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    omega[(i, j)] = r;
                }
            }
        }
        let t = RateTable::from_omega(omega).unwrap();
        assert!((transition_bound_m(&t) - r).abs() < 1e-15);
    }

    #[test]
    fn build_a1_examples() {
        let rates = two_level_rates();
        let full = diag_state(&[1.0, 1.0]);
        assert_eq!(sup_norm(&build_a1(&rates, &full).unwrap()), 0.0);

        let empty = diag_state(&[0.0, 0.0]);
        let a1 = build_a1(&rates, &empty).unwrap();
        assert!((a1.real_diag()[0] - 1.0).abs() < 1e-15); // (1/2) omega[2][1] = 1
        assert!((a1.real_diag()[1] - 0.5).abs() < 1e-15);

        let rho = diag_state(&[0.5, 0.25]);
        let a1 = build_a1(&rates, &rho).unwrap();
        assert!((a1.real_diag()[0] - 0.75).abs() < 1e-15);
        assert!((a1.real_diag()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn build_a2_examples() {
        let rates = two_level_rates();
        assert_eq!(sup_norm(&build_a2(&rates, &diag_state(&[0.0, 0.0])).unwrap()), 0.0);

        let a2 = build_a2(&rates, &diag_state(&[1.0, 1.0])).unwrap();
        assert!((a2.real_diag()[0] - 0.5).abs() < 1e-15);
        assert!((a2.real_diag()[1] - 1.0).abs() < 1e-15);

        let a2 = build_a2(&rates, &diag_state(&[0.5, 0.25])).unwrap();
        assert!((a2.real_diag()[0] - 0.125).abs() < 1e-15);
        assert!((a2.real_diag()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn loss_and_gain_examples() {
        let rates = two_level_rates();
        let full = diag_state(&[1.0, 1.0]);
        let empty = diag_state(&[0.0, 0.0]);
        assert_eq!(sup_norm(&loss_factor(&full, &rates).unwrap()), 0.0);
        assert_eq!(sup_norm(&loss_factor(&empty, &rates).unwrap()), 0.0);
        assert_eq!(sup_norm(&gain_factor(&empty, &rates).unwrap()), 0.0);
        assert_eq!(sup_norm(&gain_factor(&full, &rates).unwrap()), 0.0);

        let rho = diag_state(&[0.5, 0.25]);
        let l = loss_factor(&rho, &rates).unwrap();
        assert!((l.real_diag()[0] + 0.75).abs() < 1e-15);
        assert!((l.real_diag()[1] + 0.125).abs() < 1e-15);
        let g = gain_factor(&rho, &rates).unwrap();
        assert!((g.real_diag()[0] - 0.125).abs() < 1e-15);
        assert!((g.real_diag()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn fermion_rhs_stationary_extremes() {
        let rates = two_level_rates();
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        for rho in [diag_state(&[0.0, 0.0]), diag_state(&[1.0, 1.0])] {
            let rhs = fermion_rhs(&rho, &h, &rates).unwrap();
            assert!(sup_norm(&rhs) < 1e-14);
        }
    }

    #[test]
    fn fermion_rhs_matches_scalar_rates() {
        let rates = two_level_rates();
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        let rho = diag_state(&[0.5, 0.25]);
        let rhs = fermion_rhs(&rho, &h, &rates).unwrap();
        assert!((rhs.real_diag()[0] + 0.625).abs() < 1e-14);
        assert!((rhs.real_diag()[1] - 0.625).abs() < 1e-14);
    }

    #[test]
    fn markoff_rhs_examples() {
        let rates = two_level_rates();
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        let zero = diag_state(&[0.0, 0.0]);
        assert!(sup_norm(&markoff_rhs(&zero, &h, &rates, false).unwrap()) < 1e-15);

        let rho = diag_state(&[0.0, 1.0]);
        let rhs = markoff_rhs(&rho, &h, &rates, false).unwrap();
        assert!((rhs.real_diag()[0] - 1.0).abs() < 1e-14);
        assert!((rhs.real_diag()[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn markoff_offdiag_decay_rate() {
        // d/dt rho_12 = [i(E2 - E1) - (1/2) sum_m (w[m][2] + w[m][1]) - gamma_12] rho_12
        let omega = array![[0.0, 1.0], [2.0, 0.0]];
        let gamma = array![[0.0, 0.3], [0.3, 0.0]];
        let rates = RateTable::new(omega, Some(gamma)).unwrap();
        let h = OrbitalBasis::new(vec![0.0, 1.5]).unwrap().h0();
        let cval = c(0.1, 0.05);
        let mat = array![[c(0.5, 0.0), cval], [cval.conj(), c(0.25, 0.0)]];
        let rho = DensityMatrix::from_matrix(mat).unwrap();
        let rhs = markoff_rhs(&rho, &h, &rates, true).unwrap();
        let expected = (c(0.0, 1.5) - c(0.5 * (1.0 + 2.0) + 0.3, 0.0)) * cval;
        assert!((rhs.matrix()[(0, 1)] - expected).norm() < 1e-14);
    }

    #[test]
    fn dephasing_requires_gamma() {
        let rates = two_level_rates();
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        assert!(markoff_rhs(&diag_state(&[0.5, 0.5]), &h, &rates, true).is_err());
    }

    #[test]
    fn jump_ops_examples() {
        let zero = RateTable::from_omega(Array2::zeros((2, 2))).unwrap();
        assert!(jump_ops_from_rates(&zero).ops.is_empty());

        // w[1][2] = 4 (into orbital 1 from orbital 2) -> 2 |2><1|
        let rates = RateTable::from_omega(array![[0.0, 4.0], [0.0, 0.0]]).unwrap();
        let set = jump_ops_from_rates(&rates);
        assert_eq!(set.ops.len(), 1);
        let v = &set.ops[0];
        assert_eq!(v[(1, 0)], c(2.0, 0.0));
        assert_eq!(v[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn lindblad_empty_jump_set_is_unitary() {
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(0.25, 0.0)]];
        let rho = DensityMatrix::from_matrix(mat.clone()).unwrap();
        let rhs = lindblad_rhs(&rho, &h, &JumpOperatorSet { ops: vec![] }).unwrap();
        let uni = unitary_term(&mat, h.matrix());
        assert!(crate::core::sup_norm_diff(rhs.matrix(), &uni) < 1e-15);
    }

    #[test]
    fn lindblad_single_jump_transfer() {
        // w[2][1] = 1 drives orbital 1 -> 2; for rho = |1><1| and H = 0
        // the right-hand side is |2><2| - |1><1|
        let rates = RateTable::from_omega(array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let jumps = jump_ops_from_rates(&rates);
        assert_eq!(jumps.ops.len(), 1);
        let h = HermitianOperator::zeros(2);
        let rho = diag_state(&[1.0, 0.0]);
        let rhs = lindblad_rhs(&rho, &h, &jumps).unwrap();
        assert!((rhs.real_diag()[0] + 1.0).abs() < 1e-15);
        assert!((rhs.real_diag()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lindblad_matches_markoff() {
        let rates = two_level_rates();
        let jumps = jump_ops_from_rates(&rates);
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(0.25, 0.0)]];
        let rho = DensityMatrix::from_matrix(mat).unwrap();
        let lhs = lindblad_rhs(&rho, &h, &jumps).unwrap();
        let rhs = markoff_rhs(&rho, &h, &rates, false).unwrap();
        assert!(crate::core::sup_norm_diff(lhs.matrix(), rhs.matrix()) < 1e-14);
    }

    #[test]
    fn general_rhs_examples() {
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(0.25, 0.0)]];
        let rho = DensityMatrix::from_matrix(mat.clone()).unwrap();
        let zero = HermitianOperator::zeros(2);
        let rhs = general_rhs(&rho, &h, &zero, &zero).unwrap();
        let uni = unitary_term(&mat, h.matrix());
        assert!(crate::core::sup_norm_diff(rhs.matrix(), &uni) < 1e-15);

        // a_p = -A1(rho), a_pbar = -A2(rho) reproduces the fermionic form
        let rates = two_level_rates();
        let pair = relaxation_pair(&rates, &rho).unwrap();
        let a_p = HermitianOperator::from_real_diag(
            &pair.a1.real_diag().iter().map(|x| -x).collect::<Vec<_>>(),
        );
        let a_pbar = HermitianOperator::from_real_diag(
            &pair.a2.real_diag().iter().map(|x| -x).collect::<Vec<_>>(),
        );
        let g = general_rhs(&rho, &h, &a_p, &a_pbar).unwrap();
        let f = fermion_rhs(&rho, &h, &rates).unwrap();
        assert!(crate::core::sup_norm_diff(g.matrix(), f.matrix()) < 1e-15);
    }

    #[test]
    fn general_rhs_rejects_positive_part() {
        let h = HermitianOperator::zeros(2);
        let rho = diag_state(&[0.5, 0.5]);
        let bad = HermitianOperator::from_real_diag(&[0.5, 0.0]);
        let zero = HermitianOperator::zeros(2);
        assert!(general_rhs(&rho, &h, &bad, &zero).is_err());
    }

    #[test]
    fn lindblad_fermion_blocked_extremes() {
        let rates = two_level_rates();
        let jumps = jump_ops_from_rates(&rates);
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        for rho in [diag_state(&[0.0, 0.0]), diag_state(&[1.0, 1.0])] {
            let rhs = lindblad_fermion_rhs(&rho, &h, &jumps).unwrap();
            assert!(sup_norm(&rhs) < 1e-14);
        }
    }

    #[test]
    fn lindblad_fermion_low_density_quadratic() {
        let rates = two_level_rates();
        let jumps = jump_ops_from_rates(&rates);
        let h = OrbitalBasis::new(vec![0.0, 1.0]).unwrap().h0();
        let sigma = array![[c(0.5, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(0.4, 0.0)]];
        let gap = |eps: f64| {
            let mat = sigma.mapv(|z| z * eps);
            let rho = DensityMatrix::from_matrix(mat).unwrap();
            let a = lindblad_fermion_rhs(&rho, &h, &jumps).unwrap();
            let b = lindblad_rhs(&rho, &h, &jumps).unwrap();
            crate::core::sup_norm_diff(a.matrix(), b.matrix())
        };
        let g1 = gap(0.1);
        let g2 = gap(0.05);
        assert!(g2 / g1 < 0.35 && g2 / g1 > 0.15, "ratio {}", g2 / g1);
    }

    #[test]
    fn negative_semidefinite_validator() {
        let ok = HermitianOperator::from_real_diag(&[-1.0, 0.0]);
        assert!(validate_negative_semidefinite(&ok, "x").is_ok());
        let (lo, hi) = spectral_bounds(&ok);
        assert!(lo <= hi);
    }
}
