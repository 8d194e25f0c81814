//! Example operators: the Voiculescu unitaries and their winding number, the
//! quarter-tridiagonal leakage example, macroscopic averages T_N and joint
//! diagonalization.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::matcore::{
    c, comm_norm, commutator, eig_hermitian, identity, is_hermitian, op_norm, spectral_projection,
    unitarity_defect, zeros, ComplexMatrix, C64,
};
use crate::random::Rng;
use crate::realset::RealSet;

/// U_n = diag(ω, ω², …, ωⁿ) and the cyclic shift V_n e_j = e_{j+1}.
pub fn voiculescu(n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let omega = |k: usize| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64);
    let mut u = zeros(n, n);
    let mut v = zeros(n, n);
    for j in 0..n {
        u[(j, j)] = omega(j + 1);
        v[((j + 1) % n, j)] = c(1.0, 0.0);
    }
    Ok((u, v))
}

/// |1 − ω_n|.
pub fn voiculescu_commutator_norm(n: usize) -> f64 {
    (c(1.0, 0.0) - C64::from_polar(1.0, std::f64::consts::TAU / n as f64)).norm()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WindingResult {
    pub winding: i64,
    /// Smallest |γ| met on the evaluated sides.
    pub min_abs: f64,
    pub steps: usize,
    /// Same integer at `steps` and `2·steps`, and the path stays away from 0.
    pub stable: bool,
    /// Accumulated argument change on the side t = 1, zero for commuting targets.
    pub far_side_turn: f64,
}

const MAX_ARG_STEP: f64 = std::f64::consts::FRAC_PI_4;
const MIN_ABS: f64 = 1e-12;

/// Total argument change of r ↦ det((1−r)XY + rYX) on [0,1], with adaptive
/// bisection whenever one step turns by more than π/4.
fn loop_turn(x: &ComplexMatrix, y: &ComplexMatrix, steps: usize) -> (f64, f64, usize) {
    let xy = x * y;
    let yx = y * x;
    let gamma = |r: f64| (&xy * c(1.0 - r, 0.0) + &yx * c(r, 0.0)).determinant();
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    let mut evals = 0;
    let mut stack: Vec<(f64, f64, C64, C64, u32)> = Vec::new();
    let mut prev_r = 0.0;
    let mut prev = gamma(0.0);
    min_abs = min_abs.min(prev.norm());
    for k in 1..=steps {
        let r = k as f64 / steps as f64;
        let g = gamma(r);
        evals += 1;
        stack.push((prev_r, r, prev, g, 0));
        while let Some((a, b, ga, gb, depth)) = stack.pop() {
            min_abs = min_abs.min(gb.norm());
            let d = (gb / ga).arg();
            if d.abs() > MAX_ARG_STEP && depth < 40 {
                let m = 0.5 * (a + b);
                let gm = gamma(m);
                evals += 1;
                // right half is processed after the left half
                stack.push((m, b, gm, gb, depth + 1));
                stack.push((a, m, ga, gm, depth + 1));
            } else {
                total += d;
            }
        }
        prev_r = r;
        prev = g;
    }
    (total, min_abs, evals)
}

/// Winding number of det((1−r)U(t)V(t) + rV(t)U(t)) around the (t, r) square
/// for straight-line paths from (U, V) to commuting (U′, V′).
///
/// The sides r = 0 and r = 1 both equal det U(t) det V(t) and are traversed in
/// opposite directions, so they cancel. The remaining sides are the loop at
/// t = 0 and the side t = 1, which is constant when [U′, V′] = 0.
pub fn winding_number(
    u: &ComplexMatrix,
    v: &ComplexMatrix,
    u1: &ComplexMatrix,
    v1: &ComplexMatrix,
    steps: usize,
) -> Result<WindingResult> {
    let n = u.nrows();
    for m in [u, v, u1, v1] {
        if m.shape() != (n, n) {
            return Err(Error::DimMismatch("winding_number".into()));
        }
    }
    let cn = comm_norm(u1, v1);
    if cn > 1e-10 {
        return Err(Error::NotCommuting(cn));
    }
    let steps = steps.max(4);
    let (t1, m1, e1) = loop_turn(u, v, steps);
    let (t2, m2, e2) = loop_turn(u, v, 2 * steps);
    let (far, m3, _) = loop_turn(u1, v1, steps);
    let min_abs = m1.min(m2).min(m3);
    let w1 = (t1 / std::f64::consts::TAU).round();
    let w2 = (t2 / std::f64::consts::TAU).round();
    let integral = (t1 / std::f64::consts::TAU - w1).abs() < 1e-6;
    Ok(WindingResult {
        winding: w1 as i64,
        min_abs,
        steps: e1.max(e2),
        stable: w1 == w2 && integral && min_abs >= MIN_ABS && far.abs() < 1e-6,
        far_side_turn: far,
    })
}

/// Quarter-tridiagonal contraction: zero diagonal except J_nn = 1/2 and
/// off-diagonal entries 1/4.
pub fn quarter_tridiag_matrix(n: usize) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::InvalidInput("n must be at least 2".into()));
    }
    let mut j = zeros(n, n);
    for i in 0..n - 1 {
        j[(i, i + 1)] = c(0.25, 0.0);
        j[(i + 1, i)] = c(0.25, 0.0);
    }
    j[(n - 1, n - 1)] = c(0.5, 0.0);
    Ok(j)
}

/// J and χ_{[5/8−1/100, 5/8+1/100]}(J) e₁.
pub fn quarter_tridiag(n: usize) -> Result<(ComplexMatrix, Vec<f64>)> {
    let j = quarter_tridiag_matrix(n)?;
    let e = eig_hermitian(&j)?;
    let p = spectral_projection(&e, &RealSet::closed(0.625 - 0.01, 0.625 + 0.01));
    let leak: Vec<f64> = (0..n).map(|i| p.matrix[(i, 0)].re).collect();
    Ok((j, leak))
}

/// Printed leakage vector for n = 10, in units of 10⁻³.
pub const LEAKAGE_N10: [f64; 10] = [
    0.0016, 0.0040, 0.0084, 0.0171, 0.0343, 0.0686, 0.1373, 0.2747, 0.5493, 1.0987,
];

/// Printed final entries for n = 50, in units of 10⁻¹⁵.
pub const LEAKAGE_N50_TAIL: [f64; 3] = [0.251, 0.502, 1.004];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeakageRow {
    pub index: usize,
    pub computed: f64,
    pub printed: f64,
    pub pass: bool,
}

/// Computed entries scaled by 10^`exponent` next to the printed ones; a row
/// passes within one unit in the last printed digit.
pub fn leakage_comparison(leak: &[f64], printed: &[f64], exponent: i32, digits: i32) -> Vec<LeakageRow> {
    let offset = leak.len() - printed.len();
    let unit = 10f64.powi(-digits);
    printed
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let v = leak[offset + k].abs() * 10f64.powi(exponent);
            LeakageRow {
                index: offset + k + 1,
                computed: v,
                printed: p,
                pass: (v - p).abs() <= unit * (1.0 + 1e-9),
            }
        })
        .collect()
}

/// Ratios of consecutive entries.
pub fn consecutive_ratios(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| w[1].abs() / w[0].abs()).collect()
}

pub const TN_BUDGET: usize = 4096;

fn checked_dim(n: usize, factors: usize, budget: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..factors {
        dim = dim
            .checked_mul(n)
            .filter(|&d| d <= budget)
            .ok_or_else(|| Error::Budget(format!("{n}^{factors} exceeds {budget}")))?;
    }
    Ok(dim)
}

/// T_N(A) = (1/N) Σ_k I^{⊗(N−1−k)} ⊗ A ⊗ I^{⊗k}.
pub fn tn_lift(a: &ComplexMatrix, factors: usize, budget: usize) -> Result<ComplexMatrix> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::DimMismatch("tn_lift".into()));
    }
    if factors == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    let dim = checked_dim(n, factors, budget)?;
    let scale = c(1.0 / factors as f64, 0.0);
    let mut out = zeros(dim, dim);
    for row in 0..dim {
        let mut place = 1;
        for _ in 0..factors {
            let digit = (row / place) % n;
            let base = row - digit * place;
            for v in 0..n {
                out[(row, base + v * place)] += a[(digit, v)] * scale;
            }
            place *= n;
        }
    }
    Ok(out)
}

fn kron_power(u: &ComplexMatrix, factors: usize) -> ComplexMatrix {
    let mut out = identity(1);
    for _ in 0..factors {
        out = out.kronecker(u);
    }
    out
}

/// Conjugation of T by the swap of tensor factors k and k+1 (counted from the
/// right), minus T.
fn transposition_defect(t: &ComplexMatrix, n: usize, k: usize) -> f64 {
    let dim = t.nrows();
    let p = n.pow(k as u32);
    let sigma = |i: usize| {
        let a = (i / p) % n;
        let b = (i / (p * n)) % n;
        i - a * p - b * p * n + b * p + a * p * n
    };
    let mut moved = zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            moved[(sigma(i), sigma(j))] = t[(i, j)];
        }
    }
    op_norm(&(moved - t))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TnIdentities {
    pub n: usize,
    pub factors: usize,
    pub dim: usize,
    /// ‖[T_N A, T_N B] − (1/N) T_N([A,B])‖
    pub commutator: f64,
    /// ‖T_{N+1}(A) − N/(N+1)(T_N(A)⊗I + I⊗T_N(A))‖ for the displayed form.
    pub recursion_displayed: f64,
    /// ‖T_{N+1}(A) − (N/(N+1)) T_N(A)⊗I − (1/(N+1)) I^{⊗N}⊗A‖
    pub recursion_exact: f64,
    /// ‖T_N(UAU*) − U^{⊗N} T_N(A) U*^{⊗N}‖
    pub covariance: f64,
    /// ‖A‖/2 ≤ ‖T_N A‖
    pub norm_lower: BoundCheck,
    /// ‖T_N A‖ ≤ ‖A‖
    pub norm_upper: BoundCheck,
    /// Largest ‖[T_N A, σ]‖ over adjacent transpositions σ.
    pub permutation: f64,
}

impl TnIdentities {
    pub fn tolerance(&self) -> f64 {
        1e-12 * self.dim as f64
    }
}

pub fn tn_identities(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    u: &ComplexMatrix,
    factors: usize,
    budget: usize,
) -> Result<TnIdentities> {
    let n = a.nrows();
    if b.shape() != (n, n) || u.shape() != (n, n) {
        return Err(Error::DimMismatch("tn_identities".into()));
    }
    let ud = unitarity_defect(u);
    if ud > 1e-10 {
        return Err(Error::NotUnitary(ud));
    }
    let dim = checked_dim(n, factors, budget)?;
    checked_dim(n, factors + 1, budget)?;
    let ta = tn_lift(a, factors, budget)?;
    let tb = tn_lift(b, factors, budget)?;
    let tab = tn_lift(&commutator(a, b)?, factors, budget)?;
    let commutator_res = op_norm(&(commutator(&ta, &tb)? - tab * c(1.0 / factors as f64, 0.0)));

    let next = tn_lift(a, factors + 1, budget)?;
    let id_n = identity(n);
    let nn = factors as f64;
    let displayed = (ta.kronecker(&id_n) + id_n.kronecker(&ta)) * c(nn / (nn + 1.0), 0.0);
    let exact = ta.kronecker(&id_n) * c(nn / (nn + 1.0), 0.0)
        + identity(dim).kronecker(a) * c(1.0 / (nn + 1.0), 0.0);
    let recursion_displayed = op_norm(&(&next - displayed));
    let recursion_exact = op_norm(&(&next - exact));

    let uau = u * a * u.adjoint();
    let upow = kron_power(u, factors);
    let covariance = op_norm(&(tn_lift(&uau, factors, budget)? - &upow * &ta * upow.adjoint()));

    let na = op_norm(a);
    let nta = op_norm(&ta);
    let permutation = (0..factors.saturating_sub(1))
        .map(|k| transposition_defect(&ta, n, k))
        .fold(0.0, f64::max);
    Ok(TnIdentities {
        n,
        factors,
        dim,
        commutator: commutator_res,
        recursion_displayed,
        recursion_exact,
        covariance,
        norm_lower: BoundCheck::new(na / 2.0, nta, "tn norm lower"),
        norm_upper: BoundCheck::new(nta, na, "tn norm upper"),
        permutation,
    })
}

/// Operator norm of X − diag(X).
pub fn offdiag_norm(x: &ComplexMatrix) -> f64 {
    let mut y = x.clone();
    for i in 0..y.nrows() {
        y[(i, i)] = c(0.0, 0.0);
    }
    op_norm(&y)
}

/// ε(A, B, U) = max(‖UAU* − diag‖, ‖UBU* − diag‖).
pub fn joint_diag_objective(a: &ComplexMatrix, b: &ComplexMatrix, u: &ComplexMatrix) -> f64 {
    let ua = u * a * u.adjoint();
    let ub = u * b * u.adjoint();
    offdiag_norm(&ua).max(offdiag_norm(&ub))
}

/// Apply the plane rotation on coordinates (p, q) as M ← G* M G.
fn rotate(ms: &mut [ComplexMatrix], v: &mut ComplexMatrix, p: usize, q: usize, cs: f64, sn: C64) {
    let n = v.nrows();
    for m in ms.iter_mut() {
        for k in 0..n {
            let mp = m[(k, p)];
            let mq = m[(k, q)];
            m[(k, p)] = mp * cs + mq * sn;
            m[(k, q)] = -mp * sn.conj() + mq * cs;
        }
        for k in 0..n {
            let mp = m[(p, k)];
            let mq = m[(q, k)];
            m[(p, k)] = mp * cs + mq * sn.conj();
            m[(q, k)] = -mp * sn + mq * cs;
        }
    }
    for k in 0..n {
        let vp = v[(k, p)];
        let vq = v[(k, q)];
        v[(k, p)] = vp * cs + vq * sn;
        v[(k, q)] = -vp * sn.conj() + vq * cs;
    }
}

/// Jacobi sweeps for approximate joint diagonalization of Hermitian matrices.
///
/// Each plane rotation minimizes the off-diagonal Frobenius mass of the pair
/// (p, q) from the leading eigenvector of a real 3×3 matrix. Returns V with
/// V* M_k V nearly diagonal.
pub fn jacobi_joint_diag(family: &[ComplexMatrix], sweeps: usize, tol: f64) -> ComplexMatrix {
    let n = family[0].nrows();
    let mut ms: Vec<ComplexMatrix> = family.to_vec();
    let mut v = identity(n);
    for _ in 0..sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut g = nalgebra::Matrix3::<f64>::zeros();
                for m in &ms {
                    let h = [
                        (m[(p, p)] - m[(q, q)]).re,
                        (m[(p, q)] + m[(q, p)]).re,
                        (C64::i() * (m[(q, p)] - m[(p, q)])).re,
                    ];
                    for i in 0..3 {
                        for j in 0..3 {
                            g[(i, j)] += h[i] * h[j];
                        }
                    }
                }
                let e = g.symmetric_eigen();
                let mut best = 0;
                for i in 1..3 {
                    if e.eigenvalues[i] > e.eigenvalues[best] {
                        best = i;
                    }
                }
                let mut x = e.eigenvectors.column(best).into_owned();
                if x[0] < 0.0 {
                    x = -x;
                }
                let cs = ((x[0] + 1.0) / 2.0).sqrt();
                let sn = c(x[1], -x[2]) / (2.0 * (x[0] + 1.0)).sqrt();
                if sn.norm() > tol {
                    rotated = true;
                    rotate(&mut ms, &mut v, p, q, cs, sn);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

#[derive(Clone, Debug)]
pub struct JointDiag {
    /// Unitary with UAU*, UBU* nearly diagonal.
    pub u: ComplexMatrix,
    pub value: f64,
    pub initial: f64,
    pub evaluations: usize,
}

fn givens(n: usize, p: usize, q: usize, theta: f64, phi: f64) -> ComplexMatrix {
    let mut g = identity(n);
    let (s, cs) = theta.sin_cos();
    let ph = C64::from_polar(1.0, phi);
    g[(p, p)] = c(cs, 0.0);
    g[(q, q)] = c(cs, 0.0);
    g[(p, q)] = -ph.conj() * s;
    g[(q, p)] = ph * s;
    g
}

/// Minimize ε(A, B, U): Jacobi sweeps on the Frobenius mass, then a pattern
/// search over plane rotations on the operator-norm objective itself.
pub fn minimize_joint_diag(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    budget: usize,
    seed: u64,
) -> Result<JointDiag> {
    let n = a.nrows();
    if b.shape() != (n, n) {
        return Err(Error::DimMismatch("minimize_joint_diag".into()));
    }
    if !is_hermitian(a, 1e-10) || !is_hermitian(b, 1e-10) {
        return Err(Error::Hypothesis("A and B must be Hermitian".into()));
    }
    let initial = joint_diag_objective(a, b, &identity(n));
    let v = jacobi_joint_diag(&[a.clone(), b.clone()], 100, 1e-14);
    let mut u = v.adjoint();
    let mut value = joint_diag_objective(a, b, &u);
    let mut evals = 1;
    if n >= 2 {
        let mut rng = Rng::seeded(seed);
        let mut step = 0.1;
        while evals < budget && step > 1e-9 && value > 1e-14 {
            let mut improved = false;
            for p in 0..n {
                for q in p + 1..n {
                    let half_pi = std::f64::consts::FRAC_PI_2;
                    let mut dirs = vec![(step, 0.0), (-step, 0.0), (step, half_pi), (-step, half_pi)];
                    for _ in 0..4 {
                        dirs.push((step * rng.uniform(-1.0, 1.0), rng.uniform(0.0, std::f64::consts::TAU)));
                    }
                    for (theta, phi) in dirs {
                        let cand = givens(n, p, q, theta, phi) * &u;
                        let val = joint_diag_objective(a, b, &cand);
                        evals += 1;
                        if val < value {
                            value = val;
                            u = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                // a kink of the max can leave only a narrow cone of descent
                'probe: for _ in 0..64 {
                    for p in 0..n {
                        for q in p + 1..n {
                            let theta = step * rng.uniform(-1.0, 1.0);
                            let phi = rng.uniform(0.0, std::f64::consts::TAU);
                            let cand = givens(n, p, q, theta, phi) * &u;
                            let val = joint_diag_objective(a, b, &cand);
                            evals += 1;
                            if val < value {
                                value = val;
                                u = cand;
                                improved = true;
                                break 'probe;
                            }
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    if value >= initial && initial > 1e-12 && evals >= budget {
        return Err(Error::Budget("no descent within the evaluation budget".into()));
    }
    Ok(JointDiag {
        u,
        value,
        initial,
        evaluations: evals,
    })
}

/// |ε(A,B,U₀) − ε(A,B,U)| against 2(1+n)‖U₀ − U‖.
pub fn joint_diag_lipschitz(a: &ComplexMatrix, b: &ComplexMatrix, u0: &ComplexMatrix, u: &ComplexMatrix) -> BoundCheck {
    let n = a.nrows() as f64;
    let lhs = (joint_diag_objective(a, b, u0) - joint_diag_objective(a, b, u)).abs();
    BoundCheck::new(lhs, 2.0 * (1.0 + n) * op_norm(&(u0 - u)), "joint_diag lipschitz")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{from_real_diag, sigma_x, sigma_z};

    #[test]
    fn voiculescu_n4_commutator() {
        let (u, v) = voiculescu(4).unwrap();
        assert!((comm_norm(&u, &v) - 2f64.sqrt()).abs() < 1e-12);
        assert!(unitarity_defect(&u) < 1e-12 && unitarity_defect(&v) < 1e-12);
        let (u1, v1) = voiculescu(1).unwrap();
        assert!(comm_norm(&u1, &v1) == 0.0);
    }

    #[test]
    fn winding_of_commuting_pair_is_zero() {
        let u = from_real_diag(&[1.0, -1.0, 1.0]);
        let v = identity(3);
        let w = winding_number(&u, &v, &u, &v, 16).unwrap();
        assert_eq!(w.winding, 0);
        assert!(w.stable);
    }

    #[test]
    fn voiculescu_winds_once() {
        let (u, v) = voiculescu(8).unwrap();
        let w = winding_number(&u, &v, &identity(8), &identity(8), 16).unwrap();
        assert_eq!(w.winding.abs(), 1);
        assert!(w.stable);
    }

    #[test]
    fn lift_of_identity() {
        let t = tn_lift(&identity(2), 3, TN_BUDGET).unwrap();
        assert!(op_norm(&(t - identity(8))) < 1e-15);
        assert!(tn_lift(&identity(2), 13, TN_BUDGET).is_err());
    }

    #[test]
    fn lift_matches_kronecker_sum() {
        let a = sigma_x() + sigma_z() * c(0.3, 0.0);
        let id = identity(2);
        let direct = (a.kronecker(&id).kronecker(&id) + id.kronecker(&a).kronecker(&id) + id.kronecker(&id).kronecker(&a))
            * c(1.0 / 3.0, 0.0);
        assert!(op_norm(&(tn_lift(&a, 3, TN_BUDGET).unwrap() - direct)) < 1e-14);
    }

    #[test]
    fn quarter_tridiag_small() {
        let (_, leak) = quarter_tridiag(10).unwrap();
        let rows = leakage_comparison(&leak, &LEAKAGE_N10, 3, 4);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    }

    #[test]
    fn jacobi_diagonalizes_commuting_pair() {
        let mut rng = Rng::seeded(3);
        let w = rng.unitary(5);
        let a = &w * from_real_diag(&[1.0, 2.0, 3.0, 4.0, 5.0]) * w.adjoint();
        let b = &w * from_real_diag(&[0.5, 0.5, -0.5, 0.1, 0.2]) * w.adjoint();
        let jd = minimize_joint_diag(&a, &b, 1000, 1).unwrap();
        assert!(jd.value < 1e-10, "{}", jd.value);
    }
}
