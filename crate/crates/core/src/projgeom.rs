//! Geometry of projection pairs, nested projection repair, tridiagonal
//! positivity and decay of tridiagonal inverses.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::matcore::{
    c, complement_basis, eig_hermitian, identity, op_norm, symmetrize, zeros,
    ComplexMatrix, OrthoProjection, C64,
};
use crate::realset::RealSet;

const PROJ_TOL: f64 = 1e-10;

fn require_projection(p: &OrthoProjection, what: &str) -> Result<()> {
    let d = p.defect();
    if d > PROJ_TOL {
        return Err(Error::Hypothesis(format!("{what} is not a projection (defect {d:.2e})")));
    }
    Ok(())
}

/// A block of the orthogonal decomposition induced by two projections.
#[derive(Clone, Debug)]
pub struct JordanBlock {
    /// One or two orthonormal columns.
    pub basis: ComplexMatrix,
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
}

impl JordanBlock {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Principal angle of a two-dimensional block, from ‖PQ‖ = cos θ.
    pub fn angle(&self) -> Option<f64> {
        if self.dim() == 2 {
            Some(op_norm(&(&self.p * &self.q)).min(1.0).acos())
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct JordanDecomposition {
    pub blocks: Vec<JordanBlock>,
}

impl JordanDecomposition {
    fn rebuild(&self, pick: impl Fn(&JordanBlock) -> &ComplexMatrix) -> ComplexMatrix {
        let n = self.blocks.first().map_or(0, |b| b.basis.nrows());
        let mut out = zeros(n, n);
        for b in &self.blocks {
            out += &b.basis * pick(b) * b.basis.adjoint();
        }
        out
    }

    pub fn reconstruct_p(&self) -> ComplexMatrix {
        self.rebuild(|b| &b.p)
    }

    pub fn reconstruct_q(&self) -> ComplexMatrix {
        self.rebuild(|b| &b.q)
    }

    /// ‖Σ block projectors − I‖.
    pub fn completeness_defect(&self) -> f64 {
        let n = self.blocks.first().map_or(0, |b| b.basis.nrows());
        let mut sum = zeros(n, n);
        for b in &self.blocks {
            sum += &b.basis * b.basis.adjoint();
        }
        op_norm(&(sum - identity(n)))
    }

    /// Largest ‖(1−Π)XΠ‖ over blocks Π and X ∈ {P, Q}.
    pub fn invariance_defect(&self, p: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let pi = &b.basis * b.basis.adjoint();
            let out = identity(pi.nrows()) - &pi;
            for x in [p, q] {
                worst = worst.max(op_norm(&(&out * x * &b.basis)));
            }
        }
        worst
    }

    pub fn two_dimensional(&self) -> usize {
        self.blocks.iter().filter(|b| b.dim() == 2).count()
    }
}

fn restrict(basis: &ComplexMatrix, p: &ComplexMatrix, q: &ComplexMatrix) -> JordanBlock {
    JordanBlock {
        p: basis.adjoint() * p * basis,
        q: basis.adjoint() * q * basis,
        basis: basis.clone(),
    }
}

/// Decomposition into one and two dimensional subspaces invariant under P and Q.
///
/// Eigenvectors p of the compression of Q to Ran P with 0 < ⟨p,Qp⟩ < 1 span a
/// two dimensional block together with (1−P)Qp. The remaining eigenvectors are
/// one dimensional blocks, and on the orthogonal rest (inside ker P) Q is
/// diagonalized directly.
pub fn jordan_blocks(p: &OrthoProjection, q: &OrthoProjection) -> Result<JordanDecomposition> {
    if p.dim() != q.dim() {
        return Err(Error::DimMismatch("jordan_blocks".into()));
    }
    require_projection(p, "P")?;
    require_projection(q, "Q")?;
    let n = p.dim();
    let id = identity(n);
    let p_perp = &id - &p.matrix;
    let tol = 1e-8;
    let mut blocks = Vec::new();
    let mut used: Vec<ComplexMatrix> = Vec::new();
    let x = jordan_basis(p, q)?;
    for j in 0..x.ncols() {
        let v = x.columns(j, 1).into_owned();
        let cos2 = (v.adjoint() * &q.matrix * &v)[(0, 0)].re;
        if cos2 > tol && cos2 < 1.0 - tol {
            let w = &p_perp * (&q.matrix * &v);
            let w = &w / c(w.norm(), 0.0);
            let basis = crate::matcore::hcat(&[&v, &w]);
            used.push(basis.clone());
            blocks.push(restrict(&basis, &p.matrix, &q.matrix));
        } else {
            used.push(v.clone());
            blocks.push(restrict(&v, &p.matrix, &q.matrix));
        }
    }
    let taken = crate::matcore::hcat(&used.iter().collect::<Vec<_>>());
    let rest = if taken.ncols() == 0 { id.clone() } else { complement_basis(&taken) };
    if rest.ncols() > 0 {
        let e = eig_hermitian(&symmetrize(&(rest.adjoint() * &q.matrix * &rest)))?;
        let y = &rest * &e.vectors;
        for j in 0..y.ncols() {
            blocks.push(restrict(&y.columns(j, 1).into_owned(), &p.matrix, &q.matrix));
        }
    }
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    if total != n {
        return Err(Error::Numerical(format!("blocks cover {total} of {n} dimensions")));
    }
    Ok(JordanDecomposition { blocks })
}

/// Orthonormal basis p_i of Ran P with ⟨p_i, Q p_j⟩ = 0 for i ≠ j.
pub fn jordan_basis(p: &OrthoProjection, q: &OrthoProjection) -> Result<ComplexMatrix> {
    if p.dim() != q.dim() {
        return Err(Error::DimMismatch("jordan_basis".into()));
    }
    require_projection(p, "P")?;
    require_projection(q, "Q")?;
    let x = &p.basis;
    if x.ncols() == 0 {
        return Ok(x.clone());
    }
    let e = eig_hermitian(&symmetrize(&(x.adjoint() * &q.matrix * x)))?;
    Ok(x * e.vectors)
}

/// Largest off-diagonal |⟨p_i, Q p_j⟩|.
pub fn gram_offdiag(basis: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
    let g = basis.adjoint() * q * basis;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if i != j {
                worst = worst.max(g[(i, j)].norm());
            }
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct NestedProjection {
    pub f: OrthoProjection,
    /// max(‖E F′^⊥‖, ‖F′ G^⊥‖)
    pub eps: f64,
    /// ‖F − F′‖ against 5ε.
    pub distance: BoundCheck,
}

/// Largest allowed ε for the strict form.
pub const NEST_EPS_MAX: f64 = 0.1;

/// F with E ≤ F ≤ G close to F′: F = E ⊕ (part of Ran G ⊖ Ran E where the
/// compression of F′ exceeds 1/2).
pub fn nest_projection(
    e: &OrthoProjection,
    g: &OrthoProjection,
    f_prime: &OrthoProjection,
    strict: bool,
) -> Result<NestedProjection> {
    let n = e.dim();
    if g.dim() != n || f_prime.dim() != n {
        return Err(Error::DimMismatch("nest_projection".into()));
    }
    let id = identity(n);
    let g_perp = &id - &g.matrix;
    let leak = op_norm(&(&g_perp * &e.basis));
    if leak > PROJ_TOL {
        return Err(Error::Hypothesis(format!("E is not below G (‖G⊥E‖ = {leak:.2e})")));
    }
    let f_perp = &id - &f_prime.matrix;
    let eps = op_norm(&(&f_perp * &e.basis)).max(op_norm(&(&f_prime.matrix * &g_perp)));
    if strict && eps >= NEST_EPS_MAX {
        return Err(Error::Hypothesis(format!("ε = {eps:.3} is not below 1/10")));
    }
    // Ran G ⊖ Ran E
    let y = &g.basis;
    let k = if y.ncols() == 0 {
        zeros(n, 0)
    } else {
        let ey = eig_hermitian(&symmetrize(&(y.adjoint() * &e.matrix * y)))?;
        y * ey.basis_in(&RealSet::closed(f64::NEG_INFINITY, 0.5))
    };
    let z = if k.ncols() == 0 {
        zeros(n, 0)
    } else {
        let ek = eig_hermitian(&symmetrize(&(k.adjoint() * &f_prime.matrix * &k)))?;
        &k * ek.basis_in(&RealSet::open(0.5, f64::INFINITY))
    };
    let basis = crate::matcore::hcat(&[&e.basis, &z]);
    let f = OrthoProjection::from_basis(basis);
    let dist = op_norm(&(&f.matrix - &f_prime.matrix));
    Ok(NestedProjection {
        f,
        eps,
        distance: BoundCheck::new(dist, 5.0 * eps, "nest_projection"),
    })
}

/// Result of the tridiagonal positivity test.
#[derive(Clone, Debug)]
pub struct PositivityWitness {
    pub positive: bool,
    pub min_eig: f64,
    /// Comparison matrix with D ≤ M.
    pub d: ComplexMatrix,
    /// Columns a_i e_i + b_i e_{i+1}.
    pub g: ComplexMatrix,
    /// ‖G*G + b_n² e_nn − D‖.
    pub identity_residual: f64,
    /// Smallest diagonal entry of M − D; the off-diagonals of M − D vanish.
    pub diagonal_margin: f64,
}

fn tridiagonal_defect(m: &ComplexMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i.abs_diff(j) > 1 {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Positivity of a Hermitian tridiagonal M from M_ii ≥ c_i² + d_i² and
/// |M_{i,i+1}| ≤ d_i c_{i+1}.
pub fn tridiag_positive_test(m: &ComplexMatrix, cs: &[f64], ds: &[f64]) -> Result<PositivityWitness> {
    let n = m.nrows();
    if m.ncols() != n || cs.len() != n || ds.len() != n || n == 0 {
        return Err(Error::DimMismatch("tridiag_positive_test".into()));
    }
    let scale = op_norm(m).max(1.0);
    let not_app = |msg: String| Err(Error::NotApplicable(msg));
    if tridiagonal_defect(m) > 1e-12 * scale {
        return not_app("M is not tridiagonal".into());
    }
    if op_norm(&(m - m.adjoint())) > 1e-10 * scale {
        return not_app("M is not Hermitian".into());
    }
    if cs.iter().chain(ds).any(|&x| !(x >= 0.0)) {
        return not_app("c and d must be nonnegative".into());
    }
    let tol = 1e-12 * scale;
    for i in 0..n {
        if m[(i, i)].re < cs[i] * cs[i] + ds[i] * ds[i] - tol {
            return not_app(format!("M_{i}{i} below c² + d²"));
        }
        if i + 1 < n && m[(i, i + 1)].norm() > ds[i] * cs[i + 1] + tol {
            return not_app(format!("|M_{{{i},{}}}| above d c", i + 1));
        }
    }
    let a: Vec<f64> = cs.to_vec();
    let mut b: Vec<C64> = vec![c(0.0, 0.0); n];
    for i in 0..n - 1 {
        if ds[i] * cs[i + 1] > 0.0 {
            b[i] = m[(i, i + 1)].conj() / cs[i + 1];
        }
    }
    b[n - 1] = c(ds[n - 1], 0.0);
    let mut g = zeros(n, n);
    for i in 0..n {
        g[(i, i)] = c(a[i], 0.0);
        if i + 1 < n {
            g[(i + 1, i)] = b[i];
        }
    }
    let mut d = zeros(n, n);
    for i in 0..n {
        d[(i, i)] = c(a[i] * a[i] + b[i].norm_sqr(), 0.0);
        if i + 1 < n {
            d[(i, i + 1)] = b[i].conj() * a[i + 1];
            d[(i + 1, i)] = b[i] * a[i + 1];
        }
    }
    let mut gg = g.adjoint() * &g;
    gg[(n - 1, n - 1)] += c(b[n - 1].norm_sqr(), 0.0);
    let identity_residual = op_norm(&(gg - &d));
    let diff = m - &d;
    let diagonal_margin = (0..n).map(|i| diff[(i, i)].re).fold(f64::INFINITY, f64::min);
    let min_eig = eig_hermitian(&symmetrize(m))?.values[0];
    Ok(PositivityWitness {
        positive: min_eig >= -1e-10 * scale,
        min_eig,
        d,
        g,
        identity_residual,
        diagonal_margin,
    })
}

/// Fitted decay |(A⁻¹)_{ij}| ≤ C α^{|i−j|}.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InverseDecay {
    pub c: f64,
    pub alpha: f64,
    /// min σ(A)
    pub a: f64,
    /// max σ(A)
    pub b: f64,
    /// (distance, largest |entry| at that distance, C α^d)
    pub table: Vec<(usize, f64, f64)>,
}

/// |(A⁻¹)_{ij}| for a positive definite tridiagonal A from the principal minor
/// recurrences, kept in logarithmic form so tiny entries stay accurate.
pub fn tridiag_inverse_abs(m: &ComplexMatrix) -> Result<Vec<Vec<f64>>> {
    let n = m.nrows();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| m[(i, i + 1)].norm()).collect();
    // log θ_k for the leading minors, θ_0 = 1
    let mut log_theta = vec![0.0; n + 1];
    let mut ratio = 0.0;
    for k in 1..=n {
        let r = if k == 1 {
            diag[0]
        } else {
            diag[k - 1] - off[k - 2] * off[k - 2] / ratio
        };
        if !(r > 0.0) {
            return Err(Error::Hypothesis("A is not positive definite".into()));
        }
        ratio = r;
        log_theta[k] = log_theta[k - 1] + r.ln();
    }
    // log φ_k for the trailing minors on k..n, φ_{n+1} = 1
    let mut log_phi = vec![0.0; n + 2];
    for k in (1..=n).rev() {
        let r = if k == n {
            diag[n - 1]
        } else {
            diag[k - 1] - off[k - 1] * off[k - 1] / ratio
        };
        if !(r > 0.0) {
            return Err(Error::Hypothesis("A is not positive definite".into()));
        }
        ratio = r;
        log_phi[k] = log_phi[k + 1] + r.ln();
    }
    let mut out = vec![vec![0.0; n]; n];
    for i in 1..=n {
        let mut log_prod = 0.0;
        let mut zero = false;
        for j in i..=n {
            if j > i {
                let bj = off[j - 2];
                if bj == 0.0 {
                    zero = true;
                } else {
                    log_prod += bj.ln();
                }
            }
            let v = if zero {
                0.0
            } else {
                (log_prod + log_theta[i - 1] + log_phi[j + 1] - log_theta[n]).exp()
            };
            out[i - 1][j - 1] = v;
            out[j - 1][i - 1] = v;
        }
    }
    Ok(out)
}

/// Smallest C for the least squares α of the entry table of A⁻¹.
pub fn inverse_decay_profile(m: &ComplexMatrix) -> Result<InverseDecay> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::DimMismatch("inverse_decay_profile".into()));
    }
    let scale = op_norm(m).max(1.0);
    if tridiagonal_defect(m) > 1e-12 * scale || op_norm(&(m - m.adjoint())) > 1e-10 * scale {
        return Err(Error::Hypothesis("A must be Hermitian tridiagonal".into()));
    }
    let e = eig_hermitian(m)?;
    let (a, b) = (e.values[0], e.values[n - 1]);
    if !(a > 0.0) {
        return Err(Error::Hypothesis(format!("min σ(A) = {a:.3e} is not positive")));
    }
    let inv = tridiag_inverse_abs(m)?;
    let mut md = vec![0.0f64; n];
    for (i, row) in inv.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let d = i.abs_diff(j);
            md[d] = md[d].max(v);
        }
    }
    let pts: Vec<(f64, f64)> = md
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(d, &v)| (d as f64, v.ln()))
        .collect();
    let alpha = if pts.len() < 2 {
        0.0
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        (sxy / sxx).exp()
    };
    let pow = |d: usize| if d == 0 { 1.0 } else { alpha.powi(d as i32) };
    let cc = md
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(d, &v)| v / pow(d))
        .fold(0.0, f64::max);
    let table = md.iter().enumerate().map(|(d, &v)| (d, v, cc * pow(d))).collect();
    Ok(InverseDecay {
        c: cc,
        alpha,
        a,
        b,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::from_real_rows;
    use crate::random::Rng;

    fn line(theta: f64) -> OrthoProjection {
        let v = ComplexMatrix::from_column_slice(2, 1, &[c(theta.cos(), 0.0), c(theta.sin(), 0.0)]);
        OrthoProjection::from_basis(v)
    }

    #[test]
    fn equal_projections_give_lines() {
        let mut rng = Rng::seeded(1);
        let p = OrthoProjection::from_basis(rng.subspace(5, 2));
        let d = jordan_blocks(&p, &p).unwrap();
        assert!(d.blocks.iter().all(|b| b.dim() == 1));
        assert!(op_norm(&(d.reconstruct_p() - &p.matrix)) < 1e-10);
    }

    #[test]
    fn two_lines_form_one_block() {
        let theta = 0.4;
        let d = jordan_blocks(&line(0.0), &line(theta)).unwrap();
        assert_eq!(d.blocks.len(), 1);
        assert!((d.blocks[0].angle().unwrap() - theta).abs() < 1e-10);
    }

    #[test]
    fn paper_three_dimensional_example() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = OrthoProjection::from_basis(from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]));
        let q = OrthoProjection::from_basis(from_real_rows(&[&[0.0, s], &[0.0, s], &[1.0, 0.0]]));
        let basis = jordan_basis(&p, &q).unwrap();
        let mut found_fixed = false;
        let mut found_killed = false;
        for j in 0..2 {
            let v = basis.column(j).into_owned();
            let qv = &q.matrix * &v;
            if (&qv - &v).norm() < 1e-12 {
                found_fixed = true;
                assert!(((v[0] - v[1]).norm()) < 1e-12);
            }
            if qv.norm() < 1e-12 {
                found_killed = true;
                assert!(((v[0] + v[1]).norm()) < 1e-12);
            }
        }
        assert!(found_fixed && found_killed);
    }

    #[test]
    fn nest_is_identity_when_f_equals_e() {
        let mut rng = Rng::seeded(2);
        let g_basis = rng.subspace(6, 4);
        let e = OrthoProjection::from_basis(g_basis.columns(0, 2).into_owned());
        let g = OrthoProjection::from_basis(g_basis);
        let r = nest_projection(&e, &g, &e, true).unwrap();
        assert!(op_norm(&(&r.f.matrix - &e.matrix)) < 1e-10);
    }

    #[test]
    fn nest_rejects_large_eps() {
        let e = OrthoProjection::from_basis(identity(2).columns(0, 1).into_owned());
        let g = OrthoProjection::full(2);
        let f = line(1.0);
        assert!(nest_projection(&e, &g, &f, true).is_err());
        assert!(nest_projection(&e, &g, &f, false).is_ok());
    }

    #[test]
    fn identity_is_positive() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = tridiag_positive_test(&identity(5), &[s; 5], &[s; 5]).unwrap();
        assert!(w.positive);
        assert!(w.identity_residual < 1e-14);
    }

    #[test]
    fn positivity_hypotheses_checked() {
        let m = from_real_rows(&[&[1.0, 0.9], &[0.9, 1.0]]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(matches!(tridiag_positive_test(&m, &[s, s], &[s, s]), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn diagonal_inverse() {
        let a = crate::matcore::from_real_diag(&[2.0, 4.0, 5.0]);
        let d = inverse_decay_profile(&a).unwrap();
        assert!((d.c - 0.5).abs() < 1e-14);
        assert!(d.table[1].1 == 0.0 && d.table[2].1 == 0.0);
    }

    #[test]
    fn two_by_two_inverse() {
        let (p, q, r) = (3.0, 1.0, 2.0);
        let a = from_real_rows(&[&[p, q], &[q, r]]);
        let inv = tridiag_inverse_abs(&a).unwrap();
        let det = p * r - q * q;
        assert!((inv[0][0] - r / det).abs() < 1e-14);
        assert!((inv[1][1] - p / det).abs() < 1e-14);
        assert!((inv[0][1] - q / det).abs() < 1e-14);
    }
}
