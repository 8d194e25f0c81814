//! Measured-versus-predicted checkers for the commutator, spectral projection
//! and Lieb–Robinson inequalities. Each returns both sides of the inequality.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    apply_function, c, comm_norm, eig_hermitian, is_hermitian, op_norm, spectral_projection,
    ComplexMatrix, HermitianEig,
};
use crate::realset::RealSet;
use crate::smoothing::{cached_fourier, profile_constants, spectral_gap_constant, Profile};

/// One instance of an inequality lhs ≤ rhs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub context: String,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64, context: impl Into<String>) -> Self {
        BoundCheck {
            lhs,
            rhs,
            slack: rhs - lhs,
            context: context.into(),
        }
    }

    pub fn passes(&self) -> bool {
        self.lhs.is_finite() && self.rhs.is_finite() && self.slack >= -1e-9 * self.rhs.abs().max(1.0)
    }
}

/// Default constant of the general-geometry sin θ estimate.
pub const DAVIS_KAHAN_C: f64 = std::f64::consts::FRAC_PI_2;

fn require_hermitian(a: &ComplexMatrix, what: &str) -> Result<()> {
    if is_hermitian(a, 1e-10) {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!("{what} is not Hermitian")))
    }
}

/// ‖E_{S1}(A) E_{S2}(B)‖ against ‖A−B‖/δ (sandwich form) or c‖A−B‖/dist(S1,S2).
///
/// The sandwich form requires S1 ⊂ [α, β] and S2 ⊂ (−∞, α−δ] ∪ [β+δ, ∞).
pub fn check_davis_kahan(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    s1: &RealSet,
    s2: &RealSet,
    delta_gap: Option<f64>,
    c_general: f64,
) -> Result<BoundCheck> {
    require_hermitian(a, "A")?;
    require_hermitian(b, "B")?;
    let d = s1.dist(s2);
    if !(d > 0.0) {
        return Err(Error::Hypothesis("spectral sets are not separated".into()));
    }
    let ea = eig_hermitian(a)?;
    let eb = eig_hermitian(b)?;
    let p1 = spectral_projection(&ea, s1);
    let p2 = spectral_projection(&eb, s2);
    let lhs = op_norm(&(p1.basis.adjoint() * &p2.basis));
    let diff = op_norm(&(a - b));
    match delta_gap {
        Some(delta) => {
            let (alpha, beta) = s1
                .hull()
                .ok_or_else(|| Error::Hypothesis("S1 must be bounded".into()))?;
            let tol = 1e-12 * (1.0 + alpha.abs().max(beta.abs()));
            for p in &s2.parts {
                if p.hi > alpha - delta + tol && p.lo < beta + delta - tol {
                    return Err(Error::Hypothesis(format!(
                        "S2 meets ({}, {})",
                        alpha - delta,
                        beta + delta
                    )));
                }
            }
            Ok(BoundCheck::new(lhs, diff / delta, "davis_kahan sandwich"))
        }
        None => Ok(BoundCheck::new(lhs, c_general * diff / d, "davis_kahan general")),
    }
}

/// ‖E_{S1}(D) C E_{S2}(D)‖ ≤ ‖[C,D]‖ / dist(S1,S2).
pub fn check_comm_proj(cm: &ComplexMatrix, d: &ComplexMatrix, s1: &RealSet, s2: &RealSet) -> Result<BoundCheck> {
    require_hermitian(d, "D")?;
    let dist = s1.dist(s2);
    if !(dist > 0.0) {
        return Err(Error::Hypothesis("dist(S1,S2) = 0".into()));
    }
    let e = eig_hermitian(d)?;
    let b1 = e.basis_in(s1);
    let b2 = e.basis_in(s2);
    let lhs = op_norm(&(b1.adjoint() * cm * b2));
    Ok(BoundCheck::new(lhs, comm_norm(cm, d) / dist, "comm_proj"))
}

/// Schur division by (a_i − b_j) when a_i − b_j ≥ d everywhere.
pub fn schur_divide(t: &ComplexMatrix, a: &[f64], b: &[f64], d: f64) -> Result<BoundCheck> {
    if t.nrows() != a.len() || t.ncols() != b.len() {
        return Err(Error::DimMismatch("schur_divide".into()));
    }
    if !(d > 0.0) {
        return Err(Error::Hypothesis("d must be positive".into()));
    }
    for &ai in a {
        for &bj in b {
            if ai - bj < d {
                return Err(Error::Hypothesis(format!("a_i − b_j = {} < d", ai - bj)));
            }
        }
    }
    let s = ComplexMatrix::from_fn(t.nrows(), t.ncols(), |i, j| t[(i, j)] / (a[i] - b[j]));
    Ok(BoundCheck::new(op_norm(&s), op_norm(t) / d, "schur_divide"))
}

/// ‖[E_{(−∞,a]}(A), B]‖ ≤ c₂‖[A,B]‖/(b−a) when A has no spectrum in (a,b).
pub fn check_spectral_gap(am: &ComplexMatrix, bm: &ComplexMatrix, a: f64, b: f64) -> Result<BoundCheck> {
    require_hermitian(am, "A")?;
    if !(b > a) {
        return Err(Error::Hypothesis("need a < b".into()));
    }
    let e = eig_hermitian(am)?;
    let tol = e.cluster_tol();
    if e.values.iter().any(|&x| x > a + tol && x < b - tol) {
        return Err(Error::Hypothesis("spectrum intrudes into the gap".into()));
    }
    let p = spectral_projection(&e, &RealSet::closed(f64::NEG_INFINITY, a));
    let lhs = comm_norm(&p.matrix, bm);
    let c2 = spectral_gap_constant();
    Ok(BoundCheck::new(lhs, c2 * comm_norm(am, bm) / (b - a), format!("spectral_gap c2={c2:.6}")))
}

/// ‖[f(A),B]‖ ≤ C_f‖[A,B]‖ with C_f = ∫|k||f̂(k)|dk computed numerically.
pub fn fourier_commutator_bound(f: &Profile, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<BoundCheck> {
    require_hermitian(a, "A")?;
    let cf = profile_constants(f)?.c0;
    let e = eig_hermitian(a)?;
    let fa = apply_function(&e, |x| c(f.eval(x), 0.0));
    Ok(BoundCheck::new(comm_norm(&fa, b), cf * comm_norm(a, b), "fourier_commutator"))
}

/// ‖[e^{ikA},B]‖ ≤ |k|‖[A,B]‖.
pub fn exp_commutator_bound(k: f64, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<BoundCheck> {
    require_hermitian(a, "A")?;
    let e = eig_hermitian(a)?;
    let u = apply_function(&e, |x| c(0.0, k * x).exp());
    Ok(BoundCheck::new(comm_norm(&u, b), k.abs() * comm_norm(a, b), "exp_commutator"))
}

/// Largest entry of H in B's eigenbasis between eigenvalues at distance ≥ Δ.
pub fn finite_range_defect(h: &ComplexMatrix, eb: &HermitianEig, delta: f64) -> f64 {
    let hb = eb.vectors.adjoint() * h * &eb.vectors;
    let n = eb.dim();
    let tol = eb.cluster_tol();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if (eb.values[i] - eb.values[j]).abs() >= delta - tol {
                worst = worst.max(hb[(i, j)].norm());
            }
        }
    }
    worst
}

fn check_lr_hypotheses(h: &ComplexMatrix, b: &ComplexMatrix, delta: f64) -> Result<HermitianEig> {
    require_hermitian(h, "H")?;
    require_hermitian(b, "B")?;
    if op_norm(h) > 1.0 + 1e-12 {
        return Err(Error::Hypothesis("‖H‖ > 1".into()));
    }
    let eb = eig_hermitian(b)?;
    let defect = finite_range_defect(h, &eb, delta);
    if defect > 1e-10 * op_norm(h).max(1.0) {
        return Err(Error::Hypothesis(format!("H is not of finite range Δ (defect {defect:.2e})")));
    }
    Ok(eb)
}

/// ‖E_{S1}(B) e^{itH} E_{S2}(B)‖ ≤ e^{−dist/Δ} for |t| ≤ dist/(e²Δ).
pub fn lieb_robinson_decay(
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    delta: f64,
    s1: &RealSet,
    s2: &RealSet,
    t: f64,
) -> Result<BoundCheck> {
    let eb = check_lr_hypotheses(h, b, delta)?;
    let dist = s1.dist(s2);
    if t.abs() > dist / (E * E * delta) * (1.0 + 1e-12) {
        return Err(Error::Hypothesis("|t| exceeds dist/v_LR".into()));
    }
    let eh = eig_hermitian(h)?;
    let u = apply_function(&eh, |x| c(0.0, t * x).exp());
    let b1 = eb.basis_in(s1);
    let b2 = eb.basis_in(s2);
    let lhs = op_norm(&(b1.adjoint() * u * b2));
    Ok(BoundCheck::new(lhs, (-dist / delta).exp(), "lieb_robinson_decay"))
}

/// ‖E_{S1}(B) f(H) E_{S2}(B)‖ ≤ tail(dist/(e²Δ)) + ‖f̂‖₁ e^{−dist/Δ}.
pub fn lieb_robinson_function(
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    delta: f64,
    s1: &RealSet,
    s2: &RealSet,
    f: &Profile,
) -> Result<BoundCheck> {
    let eb = check_lr_hypotheses(h, b, delta)?;
    let dist = s1.dist(s2);
    let fd = cached_fourier(f);
    if fd.c1_divergent {
        return Err(Error::Divergent("‖f̂‖₁".into()));
    }
    let eh = eig_hermitian(h)?;
    let fh = apply_function(&eh, |x| c(f.eval(x), 0.0));
    let lhs = op_norm(&(eb.basis_in(s1).adjoint() * fh * eb.basis_in(s2)));
    let rhs = if dist.is_finite() {
        fd.tail(dist / (E * E * delta)) + fd.l1() * (-dist / delta).exp()
    } else {
        0.0
    };
    Ok(BoundCheck::new(lhs, rhs, "lieb_robinson_function"))
}

/// ‖[f(H) − f(H′)] E_{S″}(B)‖ with H′ = E_{S′}HE_{S′}, S″ ⊂ S′.
pub fn lieb_robinson_nested(
    h: &ComplexMatrix,
    b: &ComplexMatrix,
    delta: f64,
    s_inner: &RealSet,
    s_outer: &RealSet,
    f: &Profile,
) -> Result<BoundCheck> {
    let eb = check_lr_hypotheses(h, b, delta)?;
    let tol = eb.cluster_tol();
    for &x in &eb.values {
        if s_inner.contains(x, 0.0) && !s_outer.contains(x, tol) {
            return Err(Error::Hypothesis("S″ is not inside S′ on the spectrum".into()));
        }
    }
    let dist = s_inner.dist(&s_outer.complement());
    let fd = cached_fourier(f);
    if fd.c1_divergent {
        return Err(Error::Divergent("‖f̂‖₁".into()));
    }
    let outer = eb.basis_in(s_outer);
    let p_outer = &outer * outer.adjoint();
    let h_prime = &p_outer * h * &p_outer;
    let fh = apply_function(&eig_hermitian(h)?, |x| c(f.eval(x), 0.0));
    let fhp = apply_function(&eig_hermitian(&h_prime)?, |x| c(f.eval(x), 0.0));
    let lhs = op_norm(&((fh - fhp) * eb.basis_in(s_inner)));
    let rhs = if dist.is_finite() {
        2.0 * fd.tail(dist / (E * E * delta)) + 3.0 * fd.l1() * (-dist / delta).exp()
    } else {
        0.0
    };
    Ok(BoundCheck::new(lhs, rhs, "lieb_robinson_nested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{from_real_diag, identity, sigma_x, symmetrize};
    use crate::random::Rng;

    #[test]
    fn comm_proj_sharp_example() {
        let (a, b, eps) = (0.3, -0.4, 0.05);
        let d = from_real_diag(&[a, b]);
        let cm = sigma_x() * c(eps, 0.0);
        let chk = check_comm_proj(&cm, &d, &RealSet::point(a), &RealSet::point(b)).unwrap();
        assert!((chk.lhs - eps).abs() < 1e-12);
        assert!((chk.rhs - eps).abs() < 1e-12);
    }

    #[test]
    fn davis_kahan_same_matrix_is_zero() {
        let mut rng = Rng::seeded(9);
        let a = rng.hermitian(6);
        let chk = check_davis_kahan(
            &a,
            &a,
            &RealSet::closed(-0.1, 0.1),
            &RealSet::closed(0.3, 2.0),
            Some(0.2),
            DAVIS_KAHAN_C,
        )
        .unwrap();
        assert!(chk.lhs < 1e-12);
    }

    #[test]
    fn davis_kahan_sandwich_rejects_intrusion() {
        let a = from_real_diag(&[0.0, 1.0]);
        let r = check_davis_kahan(&a, &a, &RealSet::closed(0.0, 0.1), &RealSet::closed(0.15, 2.0), Some(0.2), 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn schur_equality_on_all_ones() {
        let t = ComplexMatrix::from_element(4, 4, c(1.0, 0.0));
        let d = 0.5;
        let chk = schur_divide(&t, &[1.0; 4], &[0.5; 4], d).unwrap();
        assert!((chk.lhs - 8.0).abs() < 1e-12 && (chk.rhs - 8.0).abs() < 1e-12);
        assert!(schur_divide(&t, &[1.0; 4], &[0.9; 4], d).is_err());
    }

    #[test]
    fn spectral_gap_constant_exceeds_sharp_ratio() {
        assert!(spectral_gap_constant() > 1.0);
        let a = from_real_diag(&[-1.0, 1.0]);
        let b = symmetrize(&(sigma_x() * c(0.1, 0.0)));
        let chk = check_spectral_gap(&a, &b, -1.0, 1.0).unwrap();
        assert!(chk.passes());
        let ratio = chk.lhs / (comm_norm(&a, &b) / 2.0);
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_commutator_bound_holds() {
        let mut rng = Rng::seeded(4);
        let a = rng.hermitian(8);
        let b = rng.hermitian(8);
        for k in [0.5, 2.0, 7.0] {
            assert!(exp_commutator_bound(k, &a, &b).unwrap().passes());
        }
    }

    #[test]
    fn constant_function_commutes() {
        let mut rng = Rng::seeded(4);
        let a = rng.hermitian(5);
        let b = rng.hermitian(5);
        let f = Profile::smooth_step(10.0, 1.0, 0.0);
        let chk = fourier_commutator_bound(&f, &a, &b).unwrap();
        assert!(chk.lhs < 1e-12);
    }

    #[test]
    fn lieb_robinson_at_time_zero() {
        let n = 10;
        let b = from_real_diag(&(1..=n).map(|i| i as f64).collect::<Vec<_>>());
        let mut h = crate::matcore::zeros(n, n);
        for i in 0..n - 1 {
            h[(i, i + 1)] = c(0.4, 0.0);
            h[(i + 1, i)] = c(0.4, 0.0);
        }
        let s1 = RealSet::closed(0.0, 2.0);
        let s2 = RealSet::closed(8.0, 11.0);
        let chk = lieb_robinson_decay(&h, &b, 2.0, &s1, &s2, 0.0).unwrap();
        assert!(chk.lhs < 1e-14);
        let chk = lieb_robinson_decay(&h, &b, 2.0, &s1, &s2, 6.0 / (E * E * 2.0)).unwrap();
        assert!(chk.passes());
        assert!(lieb_robinson_decay(&h, &b, 2.0, &s1, &s2, 5.0).is_err());
        assert!(lieb_robinson_decay(&h, &b, 0.5, &s1, &s2, 0.0).is_err());
    }

    #[test]
    fn nested_with_everything_outer_is_zero() {
        let n = 8;
        let b = from_real_diag(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
        let mut h = identity(n) * c(0.2, 0.0);
        for i in 0..n - 1 {
            h[(i, i + 1)] = c(0.3, 0.0);
            h[(i + 1, i)] = c(0.3, 0.0);
        }
        let f = Profile::smooth_step(0.0, 1.0, 0.0);
        let chk = lieb_robinson_nested(&h, &b, 2.0, &RealSet::closed(2.0, 3.0), &RealSet::all(), &f).unwrap();
        assert!(chk.lhs < 1e-12);
    }
}
