//! Dense complex matrix kernel: Hermitian eigendecomposition, operator norm,
//! functional calculus, spectral projections and pinching.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::realset::RealSet;

pub type C64 = Complex64;

/// Dense complex matrix. Square for operators, rectangular for frames and bases.
pub type ComplexMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Hermitian tolerance used on input, relative to ‖A‖.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(r, c)
}

pub fn from_real_diag(d: &[f64]) -> ComplexMatrix {
    let n = d.len();
    let mut m = zeros(n, n);
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = c(x, 0.0);
    }
    m
}

pub fn from_rows(rows: &[Vec<C64>]) -> ComplexMatrix {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    ComplexMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    ComplexMatrix::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

/// Pauli matrices, handy in examples and tests.
pub fn sigma_x() -> ComplexMatrix {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn sigma_y() -> ComplexMatrix {
    from_rows(&[vec![ZERO, c(0.0, -1.0)], vec![c(0.0, 1.0), ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    from_real_diag(&[1.0, -1.0])
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let f = frobenius(a);
    if f == 0.0 {
        return 0.0;
    }
    if !f.is_finite() {
        return f64::NAN;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimMismatch(format!(
            "commutator of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}

/// ‖[A,B]‖ for square matrices of equal size.
pub fn comm_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    op_norm(&(a * b - b * a))
}

pub fn hermitian_defect(a: &ComplexMatrix) -> f64 {
    op_norm(&((a - a.adjoint()) * c(0.5, 0.0)))
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    a.nrows() == a.ncols() && hermitian_defect(a) <= tol * op_norm(a).max(1e-300)
}

pub fn symmetrize(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    op_norm(&(u.adjoint() * u - identity(u.ncols())))
}

pub fn normality_defect(n: &ComplexMatrix) -> f64 {
    op_norm(&(n.adjoint() * n - n * n.adjoint()))
}

/// Real and imaginary Hermitian parts, N = Re N + i Im N.
pub fn hermitian_parts(n: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let re = (n + n.adjoint()) * c(0.5, 0.0);
    let im = (n - n.adjoint()) * c(0.0, -0.5);
    (re, im)
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
    /// ‖(A − A*)/2‖ of the input before symmetrization.
    pub sym_defect: f64,
    /// ‖A‖ of the symmetrized input.
    pub norm: f64,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Tolerance used to decide eigenvalue equality and set membership.
    pub fn cluster_tol(&self) -> f64 {
        1e-12 * (self.dim().max(1) as f64) * self.norm.max(1e-300)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        apply_function(self, |x| c(x, 0.0))
    }

    /// Index ranges of eigenvalue clusters in ascending order.
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        cluster_ranges(&self.values, self.cluster_tol())
    }

    /// Columns of the eigenvector matrix whose eigenvalues lie in `s`.
    pub fn basis_in(&self, s: &RealSet) -> ComplexMatrix {
        let tol = self.cluster_tol();
        let idx: Vec<usize> = (0..self.dim())
            .filter(|&i| s.contains(self.values[i], tol))
            .collect();
        select_columns(&self.vectors, &idx)
    }
}

pub(crate) fn cluster_ranges(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

pub fn select_columns(m: &ComplexMatrix, idx: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

pub fn hcat(parts: &[&ComplexMatrix]) -> ComplexMatrix {
    let rows = parts
        .iter()
        .map(|p| p.nrows())
        .find(|&r| r > 0)
        .unwrap_or(0);
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        if p.ncols() == 0 {
            continue;
        }
        out.view_mut((0, at), (rows, p.ncols())).copy_from(*p);
        at += p.ncols();
    }
    out
}

/// Canonical orthonormal basis of the range of the projector `vc·vc*`.
///
/// Sequential Gram–Schmidt of the projected standard basis vectors: e_j is
/// accepted when its residual has squared norm above 1/(2n). Because the
/// residuals of the rejected vectors sum to less than one, a single pass finds
/// the full rank. The result depends only on the subspace, which fixes both
/// the basis and its phases.
pub fn canonical_basis(vc: &ComplexMatrix) -> ComplexMatrix {
    let n = vc.nrows();
    let k = vc.ncols();
    if k == 0 {
        return zeros(n, 0);
    }
    // Pivoted Gram-Schmidt on the projected unit vectors P e_j: each step keeps
    // the largest residual, ties going to the smallest index.
    let mut r: Vec<nalgebra::DVector<C64>> = (0..n).map(|j| vc * vc.row(j).adjoint()).collect();
    let mut q: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(k);
    while q.len() < k {
        let (best, nr) = r
            .iter()
            .map(|v| v.norm_squared())
            .enumerate()
            .fold((0, -1.0), |acc, (j, x)| if x > acc.1 { (j, x) } else { acc });
        if nr <= 0.0 {
            break;
        }
        let mut v = r[best].clone() / C64::new(nr.sqrt(), 0.0);
        for qi in &q {
            let proj = qi.dotc(&v);
            v -= qi * proj;
        }
        v /= C64::new(v.norm(), 0.0);
        for rj in r.iter_mut() {
            let proj = v.dotc(rj);
            *rj -= &v * proj;
        }
        q.push(v);
    }
    let mut out = zeros(n, q.len());
    for (j, qi) in q.iter().enumerate() {
        out.set_column(j, qi);
    }
    out
}

fn to_faer(m: &ComplexMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues in nondecreasing order with an orthonormal eigenbasis.
fn self_adjoint_eigen(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let e = to_faer(h)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
    let values = (0..h.nrows()).map(|i| e.S()[i].re).collect();
    Ok((values, from_faer(e.U())))
}

/// Thin SVD: left singular vectors and singular values in nonincreasing order.
pub fn thin_svd(m: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>)> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok((zeros(m.nrows(), 0), Vec::new()));
    }
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let sv = (0..k).map(|i| svd.S()[i].re).collect();
    Ok((from_faer(svd.U()), sv))
}

/// Hermitian eigendecomposition with deterministic eigenvector choice.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEig> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimMismatch(format!("eig of {:?}", a.shape())));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite("eig input".into()));
    }
    let n = a.nrows();
    let defect = hermitian_defect(a);
    let h = symmetrize(a);
    let norm = op_norm(&h);
    if defect > HERMITIAN_TOL * norm.max(f64::MIN_POSITIVE) && defect > 1e-300 {
        return Err(Error::NotHermitian(defect));
    }
    if n == 0 {
        return Ok(HermitianEig {
            values: vec![],
            vectors: zeros(0, 0),
            sym_defect: defect,
            norm,
        });
    }
    let (values, raw) = self_adjoint_eigen(&h)?;
    let tol = 1e-12 * n as f64 * norm.max(1e-300);
    let mut vectors = zeros(n, n);
    for r in cluster_ranges(&values, tol) {
        let block = raw.columns(r.start, r.len()).into_owned();
        let basis = canonical_basis(&block);
        debug_assert_eq!(basis.ncols(), r.len());
        vectors
            .view_mut((0, r.start), (n, basis.ncols()))
            .copy_from(&basis);
    }
    Ok(HermitianEig {
        values,
        vectors,
        sym_defect: defect,
        norm,
    })
}

/// Joint eigenbasis of a commuting Hermitian family.
///
/// Diagonalizes the first matrix, then refines each eigenvalue cluster by the
/// compressions of the remaining matrices. Returns the basis and, for each
/// column, the tuple of eigenvalues.
#[derive(Clone, Debug)]
pub struct JointEig {
    pub vectors: ComplexMatrix,
    pub values: Vec<Vec<f64>>,
}

pub fn joint_eig(family: &[ComplexMatrix]) -> Result<JointEig> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty family".into()));
    }
    let n = family[0].nrows();
    for f in family {
        if f.shape() != (n, n) {
            return Err(Error::DimMismatch("joint_eig family".into()));
        }
    }
    let scale = family.iter().map(op_norm).fold(0.0, f64::max).max(1e-300);
    for i in 0..family.len() {
        for j in 0..i {
            let d = comm_norm(&family[i], &family[j]);
            if d > 1e-10 * scale.max(1.0) {
                return Err(Error::NotCommuting(d));
            }
        }
    }
    // groups: (basis columns, eigenvalue tuple so far)
    let mut groups: Vec<(ComplexMatrix, Vec<f64>)> = vec![(identity(n), vec![])];
    for m in family {
        let mut next = Vec::new();
        for (basis, vals) in groups {
            if basis.ncols() == 0 {
                continue;
            }
            let comp = basis.adjoint() * m * &basis;
            let e = eig_hermitian(&symmetrize(&comp))?;
            let tol = (1e-12 * n as f64 * scale).max(e.cluster_tol());
            for r in cluster_ranges(&e.values, tol) {
                let sub = e.vectors.columns(r.start, r.len()).into_owned();
                let v = &basis * sub;
                let v = canonical_basis(&v);
                let mean = e.values[r.clone()].iter().sum::<f64>() / r.len() as f64;
                let mut t = vals.clone();
                t.push(mean);
                next.push((v, t));
            }
        }
        groups = next;
    }
    groups.sort_by(|a, b| {
        for (x, y) in a.1.iter().zip(b.1.iter()) {
            if let Some(o) = x.partial_cmp(y) {
                if o != std::cmp::Ordering::Equal {
                    return o;
                }
            }
        }
        std::cmp::Ordering::Equal
    });
    let mut vectors = zeros(n, n);
    let mut values = Vec::with_capacity(n);
    let mut at = 0;
    for (b, t) in groups {
        vectors.view_mut((0, at), (n, b.ncols())).copy_from(&b);
        for _ in 0..b.ncols() {
            values.push(t.clone());
        }
        at += b.ncols();
    }
    if at != n {
        return Err(Error::Numerical(format!("joint basis rank {at} of {n}")));
    }
    Ok(JointEig { vectors, values })
}

/// Eigendecomposition of a normal matrix through its Hermitian parts.
#[derive(Clone, Debug)]
pub struct NormalEig {
    pub values: Vec<C64>,
    pub vectors: ComplexMatrix,
}

pub fn eig_normal(nm: &ComplexMatrix) -> Result<NormalEig> {
    let d = normality_defect(nm);
    if d > 1e-10 * op_norm(nm).powi(2).max(1.0) {
        return Err(Error::NotNormal(d));
    }
    let (re, im) = hermitian_parts(nm);
    let je = joint_eig(&[re, im])?;
    let values = je.values.iter().map(|t| c(t[0], t[1])).collect();
    Ok(NormalEig {
        values,
        vectors: je.vectors,
    })
}

/// V · diag(f(λ)) · V*.
pub fn apply_function<F: Fn(f64) -> C64>(e: &HermitianEig, f: F) -> ComplexMatrix {
    let n = e.dim();
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let fj = f(e.values[j]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * e.vectors.adjoint()
}

/// Orthogonal projection with its rank and an orthonormal basis of its range.
#[derive(Clone, Debug)]
pub struct OrthoProjection {
    pub matrix: ComplexMatrix,
    pub rank: usize,
    pub basis: ComplexMatrix,
}

impl OrthoProjection {
    pub fn from_basis(basis: ComplexMatrix) -> Self {
        let matrix = &basis * basis.adjoint();
        OrthoProjection {
            rank: basis.ncols(),
            matrix,
            basis,
        }
    }

    /// Projection onto the span of arbitrary columns.
    pub fn onto_span(cols: &ComplexMatrix, tol: f64) -> Self {
        Self::from_basis(orthonormalize(cols, tol))
    }

    /// Projection given as a matrix; the range is recovered by eigendecomposition.
    pub fn from_matrix(p: &ComplexMatrix) -> Result<Self> {
        let e = eig_hermitian(p)?;
        let basis = e.basis_in(&RealSet::closed(0.5, f64::INFINITY));
        let proj = Self::from_basis(basis);
        let err = op_norm(&(&proj.matrix - p));
        if err > 1e-8 {
            return Err(Error::NotProjection(err));
        }
        Ok(proj)
    }

    pub fn zero(n: usize) -> Self {
        Self::from_basis(zeros(n, 0))
    }

    pub fn full(n: usize) -> Self {
        Self::from_basis(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn complement(&self) -> Self {
        Self::from_basis(complement_basis(&self.basis))
    }

    /// Largest violation of P = P*, P² = P and trace(P) = rank.
    pub fn defect(&self) -> f64 {
        let p = &self.matrix;
        let herm = op_norm(&(p - p.adjoint()));
        let idem = op_norm(&(p * p - p));
        let tr = (p.trace().re - self.rank as f64).abs();
        herm.max(idem).max(tr * 1e-2)
    }
}

/// Orthonormal basis of the column span, rank decided by `tol` relative to the
/// largest column norm.
pub fn orthonormalize(cols: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let n = cols.nrows();
    if cols.ncols() == 0 || n == 0 {
        return zeros(n, 0);
    }
    let scale = (0..cols.ncols())
        .map(|j| cols.column(j).norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return zeros(n, 0);
    }
    let (u, sv) = match thin_svd(cols) {
        Ok(x) => x,
        Err(_) => return zeros(n, 0),
    };
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol * smax.max(scale)).collect();
    let basis = select_columns(&u, &idx);
    canonical_basis(&basis)
}

/// Orthonormal basis of the orthogonal complement of an orthonormal basis.
pub fn complement_basis(basis: &ComplexMatrix) -> ComplexMatrix {
    let n = basis.nrows();
    let p = basis * basis.adjoint();
    let q = identity(n) - p;
    let e = eig_hermitian(&q).expect("complement projector is Hermitian");
    canonical_basis(&e.basis_in(&RealSet::closed(0.5, f64::INFINITY)))
}

/// Spectral projection E_S(A).
pub fn spectral_projection(e: &HermitianEig, s: &RealSet) -> OrthoProjection {
    OrthoProjection::from_basis(e.basis_in(s))
}

/// Spectral projection for an arbitrary predicate on the computed eigenvalues.
pub fn spectral_projection_by<F: Fn(f64) -> bool>(e: &HermitianEig, pred: F) -> OrthoProjection {
    let idx: Vec<usize> = (0..e.dim()).filter(|&i| pred(e.values[i])).collect();
    OrthoProjection::from_basis(select_columns(&e.vectors, &idx))
}

/// Σ P_i A P_i for a resolution of the identity.
pub fn pinch(a: &ComplexMatrix, parts: &[OrthoProjection]) -> Result<ComplexMatrix> {
    let n = a.nrows();
    let mut sum = zeros(n, n);
    for p in parts {
        if p.dim() != n {
            return Err(Error::DimMismatch("pinch part".into()));
        }
        sum += &p.matrix;
    }
    let res = op_norm(&(sum - identity(n)));
    if res > 1e-10 {
        return Err(Error::NotResolution(res));
    }
    for i in 0..parts.len() {
        for j in 0..i {
            let o = op_norm(&(parts[i].basis.adjoint() * &parts[j].basis));
            if o > 1e-10 {
                return Err(Error::NotResolution(o));
            }
        }
    }
    Ok(pinch_bases(a, parts.iter().map(|p| &p.basis)))
}

/// Σ B_i B_i* A B_i B_i* for orthonormal bases B_i, without validation.
pub fn pinch_bases<'a, I: IntoIterator<Item = &'a ComplexMatrix>>(
    a: &ComplexMatrix,
    bases: I,
) -> ComplexMatrix {
    let n = a.nrows();
    let mut out = zeros(n, n);
    for b in bases {
        if b.ncols() == 0 {
            continue;
        }
        let inner = b.adjoint() * a * b;
        out += b * inner * b.adjoint();
    }
    out
}

/// ‖Σ x_i‖² and Σ‖x_i‖² for a family of vectors.
pub fn energy(xs: &[nalgebra::DVector<C64>]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mut total = nalgebra::DVector::<C64>::zeros(xs[0].len());
    let mut parts = 0.0;
    for x in xs {
        total += x;
        parts += x.norm_squared();
    }
    (total.norm_squared(), parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::Rng;

    #[test]
    fn degenerate_clusters_reconstruct() {
        for seed in 0..40 {
            let mut rng = Rng::seeded(seed);
            let u = rng.unitary(14);
            let d = from_real_diag(&[1.0, 1.0, 1.0, 1.0, 0.3, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5]);
            let m = symmetrize(&(&u * d * u.adjoint()));
            let e = eig_hermitian(&m).unwrap();
            assert_eq!(e.vectors.ncols(), 14);
            let recon = &e.vectors * from_real_diag(&e.values) * e.vectors.adjoint() - &m;
            assert!(op_norm(&recon) < 1e-12, "seed {seed}: {}", op_norm(&recon));
            assert!(unitarity_defect(&e.vectors) < 1e-12);
        }
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let e = eig_hermitian(&from_real_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert!((e.vectors[(1, 0)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x_eigenvalues() {
        let e = eig_hermitian(&sigma_x()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = Rng::seeded(1);
        let a = rng.hermitian(8);
        let e = eig_hermitian(&a).unwrap();
        assert!(op_norm(&(e.reconstruct() - &a)) <= 1e-10 * 8.0 * op_norm(&a));
        let vv = e.vectors.adjoint() * &e.vectors;
        assert!(op_norm(&(vv - identity(8))) <= 1e-12 * 8.0);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(eig_hermitian(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn degenerate_cluster_is_deterministic() {
        let mut rng = Rng::seeded(2);
        let u = rng.unitary(5);
        let d = from_real_diag(&[1.0, 1.0, 1.0, -2.0, 0.5]);
        let a = &u * d * u.adjoint();
        let e1 = eig_hermitian(&a).unwrap();
        let perturbed = symmetrize(&(&a + rng.hermitian(5) * c(1e-15, 0.0)));
        let e2 = eig_hermitian(&perturbed).unwrap();
        assert!(op_norm(&(e1.vectors - e2.vectors)) < 1e-8);
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&identity(4)) - 1.0).abs() < 1e-14);
        assert!((op_norm(&from_real_diag(&[-3.0, 2.0])) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_commutator() {
        let k = commutator(&sigma_x(), &sigma_z()).unwrap();
        let expect = from_real_rows(&[&[0.0, -2.0], &[2.0, 0.0]]);
        assert!(op_norm(&(&k - expect)) < 1e-15);
        assert!((op_norm(&k) - 2.0).abs() < 1e-14);
        let a = sigma_y();
        assert!(op_norm(&commutator(&a, &a).unwrap()) == 0.0);
        assert!(commutator(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn projection_examples() {
        let e = eig_hermitian(&from_real_diag(&[2.0, 5.0])).unwrap();
        let p = spectral_projection(&e, &RealSet::point(2.0));
        assert_eq!(p.rank, 1);
        assert!((p.matrix[(0, 0)].re - 1.0).abs() < 1e-15);
        let all = spectral_projection(&e, &RealSet::all());
        assert!(op_norm(&(all.matrix - identity(2))) < 1e-14);
    }

    #[test]
    fn indicator_function_matches_projection() {
        let mut rng = Rng::seeded(3);
        let a = rng.hermitian(6);
        let e = eig_hermitian(&a).unwrap();
        let s = RealSet::closed(0.0, f64::INFINITY);
        let p = spectral_projection(&e, &s);
        let f = apply_function(&e, |x| if x >= 0.0 { ONE } else { ZERO });
        assert!(op_norm(&(f - p.matrix)) < 1e-12);
        let sq = apply_function(&e, |x| c(x * x, 0.0));
        assert!(op_norm(&(sq - &a * &a)) < 1e-10);
    }

    #[test]
    fn pinch_examples() {
        let e1 = OrthoProjection::from_basis(from_real_rows(&[&[1.0], &[0.0]]));
        let e2 = OrthoProjection::from_basis(from_real_rows(&[&[0.0], &[1.0]]));
        let z = pinch(&sigma_x(), &[e1.clone(), e2.clone()]).unwrap();
        assert!(op_norm(&z) == 0.0);
        let a = sigma_z() + sigma_x();
        assert!(op_norm(&(pinch(&a, &[OrthoProjection::full(2)]).unwrap() - &a)) < 1e-15);
        assert!(pinch(&a, &[e1]).is_err());
    }

    #[test]
    fn normal_eig_of_unitary() {
        let u = from_rows(&[vec![ZERO, ONE], vec![c(-1.0, 0.0), ZERO]]);
        let e = eig_normal(&u).unwrap();
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        let rec = &e.vectors * d * e.vectors.adjoint();
        assert!(op_norm(&(rec - u)) < 1e-12);
    }

    #[test]
    fn orthonormalize_drops_dependent_columns() {
        let m = from_real_rows(&[&[1.0, 2.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        let q = orthonormalize(&m, 1e-10);
        assert_eq!(q.ncols(), 2);
        let comp = complement_basis(&q);
        assert_eq!(comp.ncols(), 1);
        assert!((comp[(2, 0)].norm() - 1.0).abs() < 1e-12);
    }
}
