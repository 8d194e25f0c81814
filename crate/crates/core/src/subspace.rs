//! Subspaces W with V₁ ≤ W ⊥ V_L that are almost invariant under a block
//! tridiagonal contraction J: the constructive interval method, the smooth
//! partition construction with a pluggable commuting-pair oracle, and the
//! measurement of the resulting certificates.
//!
//! Blocks are indexed from 0 in code; block 0 is V₁ and block L−1 is V_L.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::gallery::jacobi_joint_diag;
use crate::matcore::{
    c, comm_norm, complement_basis, eig_hermitian, hcat, identity, is_finite, is_hermitian,
    op_norm, orthonormalize, select_columns, spectral_projection, symmetrize, thin_svd, zeros,
    ComplexMatrix, OrthoProjection, C64,
};
use crate::projgeom::{jordan_basis, nest_projection, tridiag_positive_test};
use crate::random::Rng;
use crate::realset::RealSet;
use crate::smoothing::{apply_profile, cached_fourier, s_of, smooth_step_bar, Growth, GrowthConfig, Profile};

/// Range statements (containment, orthogonality) are exact to this tolerance.
pub const RANGE_TOL: f64 = 1e-10;
/// Singular values below this are treated as zero when deciding ranks.
const RANK_TOL: f64 = 1e-10;
/// Off-tridiagonal coupling above this rejects a system.
const COUPLING_REJECT: f64 = 1e-8;

fn sub(m: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn rows_of(m: &ComplexMatrix, rows: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// (I − WW*)X for an orthonormal W.
fn perp_part(w: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    if w.ncols() == 0 {
        return x.clone();
    }
    x - w * (w.adjoint() * x)
}

fn smallest_singular(m: &ComplexMatrix) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sv = m.clone().singular_values();
    let k = m.ncols().min(m.nrows());
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    sv.iter().take(k).cloned().fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Systems and certificates

/// A Hermitian contraction with an orthogonal block decomposition in which it
/// is block tridiagonal.
#[derive(Clone, Debug)]
pub struct TridiagonalSystem {
    pub j: ComplexMatrix,
    /// Orthonormal bases of V₁, …, V_L.
    pub blocks: Vec<ComplexMatrix>,
    /// Largest ‖P_{V_i} J P_{V_k}‖ over |i − k| ≥ 2.
    pub off_tridiagonal: f64,
}

impl TridiagonalSystem {
    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// Number of blocks L.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Orthonormal basis of ⊕_{k ∈ range} V_k.
    pub fn span(&self, range: Range<usize>) -> ComplexMatrix {
        let parts: Vec<&ComplexMatrix> = self.blocks[range].iter().collect();
        if parts.is_empty() {
            return zeros(self.dim(), 0);
        }
        let out = hcat(&parts);
        if out.nrows() == 0 {
            zeros(self.dim(), 0)
        } else {
            out
        }
    }

    /// P_{V_{k+1}} J P_{V_k} in block coordinates.
    pub fn coupling(&self, k: usize) -> ComplexMatrix {
        self.blocks[k + 1].adjoint() * &self.j * &self.blocks[k]
    }

    pub fn coupling_rank(&self, k: usize) -> usize {
        let cpl = self.coupling(k);
        if cpl.nrows() == 0 || cpl.ncols() == 0 {
            return 0;
        }
        cpl.singular_values().iter().filter(|&&s| s > RANK_TOL).count()
    }

    /// The same operator with the block order reversed.
    pub fn reversed(&self) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.reverse();
        TridiagonalSystem {
            j: self.j.clone(),
            blocks,
            off_tridiagonal: self.off_tridiagonal,
        }
    }
}

/// Checks the hypotheses on J and the blocks.
pub fn verify_tridiagonal(j: &ComplexMatrix, blocks: &[ComplexMatrix]) -> Result<TridiagonalSystem> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::DimMismatch("J must be square".into()));
    }
    if blocks.is_empty() {
        return Err(Error::InvalidInput("at least one block is required".into()));
    }
    if !is_finite(j) {
        return Err(Error::NonFinite("J".into()));
    }
    if !is_hermitian(j, 1e-10) {
        return Err(Error::NotHermitian(crate::matcore::hermitian_defect(j)));
    }
    let nj = op_norm(j);
    if nj > 1.0 + 1e-10 {
        return Err(Error::Hypothesis(format!("‖J‖ = {nj:.6} exceeds 1")));
    }
    let mut owned = Vec::with_capacity(blocks.len());
    for (k, b) in blocks.iter().enumerate() {
        if b.ncols() > 0 && b.nrows() != n {
            return Err(Error::DimMismatch(format!("block {} has {} rows", k + 1, b.nrows())));
        }
        owned.push(if b.ncols() == 0 { zeros(n, 0) } else { b.clone() });
    }
    let total: usize = owned.iter().map(|b| b.ncols()).sum();
    if total != n {
        return Err(Error::Hypothesis(format!("blocks span {total} of {n} dimensions")));
    }
    let sys = TridiagonalSystem {
        j: j.clone(),
        blocks: owned,
        off_tridiagonal: 0.0,
    };
    let all = sys.span(0..sys.len());
    if n > 0 {
        let gram_defect = op_norm(&(all.adjoint() * &all - identity(n)));
        if gram_defect > 1e-10 {
            return Err(Error::Hypothesis(format!(
                "blocks are not orthonormal and mutually orthogonal (defect {gram_defect:.2e})"
            )));
        }
    }
    let mut worst = (0.0, 0, 0);
    for a in 0..sys.len() {
        for b in a + 2..sys.len() {
            let v = op_norm(&(sys.blocks[b].adjoint() * j * &sys.blocks[a]));
            if v > worst.0 {
                worst = (v, a, b);
            }
        }
    }
    if worst.0 > COUPLING_REJECT {
        return Err(Error::Hypothesis(format!(
            "blocks V_{} and V_{} couple with norm {:.3e}",
            worst.1 + 1,
            worst.2 + 1,
            worst.0
        )));
    }
    Ok(TridiagonalSystem {
        off_tridiagonal: worst.0,
        ..sys
    })
}

/// Singleton blocks e_1, …, e_n of the standard basis.
pub fn singleton_blocks(n: usize) -> Vec<ComplexMatrix> {
    let id = identity(n);
    (0..n).map(|k| id.columns(k, 1).into_owned()).collect()
}

/// Measured Items 1–3 for a candidate W and the final nested W.
#[derive(Clone, Debug)]
pub struct WCertificate {
    /// Orthonormal basis of the final W.
    pub w: ComplexMatrix,
    /// ‖P_{W′⊥} P_{V₁}‖ for the candidate W′.
    pub eps3: f64,
    /// ‖P_{W′⊥} J P_{W′}‖ for the candidate.
    pub eps4: f64,
    /// ‖P_{V_L} P_{W′}‖ for the candidate.
    pub eps5: f64,
    /// ‖P_{W⊥} J P_W‖ for the final W.
    pub eps2: f64,
    /// The dual forms ‖P_{V₁} P_{W′⊥}‖, ‖P_{W′} J P_{W′⊥}‖, ‖P_{W′} P_{V_L}‖.
    pub duals: [f64; 3],
    pub contains_v1: bool,
    pub perp_vl: bool,
    /// True when W is an exactly reducing subspace found without approximation.
    pub exact: bool,
    /// eps2 against eps4 + 2‖F − F′‖ and against eps4 + 10·max(eps3, eps5).
    pub bounds: Vec<BoundCheck>,
}

/// Serializable view of a certificate.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CertificateSummary {
    pub dim_w: usize,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub eps5: f64,
    pub contains_v1: bool,
    pub perp_vl: bool,
    pub exact: bool,
}

impl WCertificate {
    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            dim_w: self.w.ncols(),
            eps2: self.eps2,
            eps3: self.eps3,
            eps4: self.eps4,
            eps5: self.eps5,
            contains_v1: self.contains_v1,
            perp_vl: self.perp_vl,
            exact: self.exact,
        }
    }

    pub fn projection(&self) -> OrthoProjection {
        OrthoProjection::from_basis(self.w.clone())
    }
}

struct Measured {
    eps3: f64,
    eps4: f64,
    eps5: f64,
    duals: [f64; 3],
    contains: bool,
    perp: bool,
}

fn measure(sys: &TridiagonalSystem, w: &ComplexMatrix) -> Result<Measured> {
    let n = sys.dim();
    let w = if w.ncols() == 0 { zeros(n, 0) } else { w.clone() };
    if w.nrows() != n {
        return Err(Error::DimMismatch("W basis".into()));
    }
    if w.ncols() > 0 {
        let d = op_norm(&(w.adjoint() * &w - identity(w.ncols())));
        if d > 1e-8 {
            return Err(Error::InvalidInput(format!("W basis is not orthonormal (defect {d:.2e})")));
        }
    }
    let s1 = &sys.blocks[0];
    let sl = &sys.blocks[sys.len() - 1];
    let wc = complement_basis(&w);
    let eps3 = op_norm(&perp_part(&w, s1));
    let eps4 = op_norm(&perp_part(&w, &(&sys.j * &w)));
    let eps5 = op_norm(&(sl.adjoint() * &w));
    let d3 = op_norm(&(s1.adjoint() * &wc));
    let d4 = op_norm(&(w.adjoint() * &sys.j * &wc));
    let d5 = if w.ncols() == 0 { 0.0 } else { op_norm(&(&w * (w.adjoint() * sl))) };
    if (eps5 - d5).abs() > 1e-10 {
        return Err(Error::Numerical(format!("primal {eps5:e} and dual {d5:e} forms of Item 3 disagree")));
    }
    Ok(Measured {
        eps3,
        eps4,
        eps5,
        duals: [d3, d4, d5],
        contains: eps3 <= RANGE_TOL,
        perp: eps5 <= RANGE_TOL,
    })
}

/// Measures Items 1–3 of W directly; eps2 equals eps4 since nothing is nested.
#[allow(non_snake_case)]
pub fn certify_W(sys: &TridiagonalSystem, w: &ComplexMatrix) -> Result<WCertificate> {
    let m = measure(sys, w)?;
    Ok(WCertificate {
        w: if w.ncols() == 0 { zeros(sys.dim(), 0) } else { w.clone() },
        eps3: m.eps3,
        eps4: m.eps4,
        eps5: m.eps5,
        eps2: m.eps4,
        duals: m.duals,
        contains_v1: m.contains,
        perp_vl: m.perp,
        exact: false,
        bounds: Vec::new(),
    })
}

fn exact_certificate(sys: &TridiagonalSystem, w: &ComplexMatrix) -> Result<WCertificate> {
    let mut cert = certify_W(sys, w)?;
    cert.exact = true;
    Ok(cert)
}

/// Certificate from a candidate W′ and the final W obtained from it.
fn assemble(sys: &TridiagonalSystem, candidate: &ComplexMatrix, fin: &ComplexMatrix) -> Result<WCertificate> {
    let mc = measure(sys, candidate)?;
    let mf = measure(sys, fin)?;
    let pc = OrthoProjection::from_basis(candidate.clone());
    let pf = OrthoProjection::from_basis(fin.clone());
    let dist = op_norm(&(&pf.matrix - &pc.matrix));
    let bounds = vec![
        BoundCheck::new(mf.eps4, mc.eps4 + 2.0 * dist, "eps2 ≤ eps4 + 2‖F − F′‖"),
        BoundCheck::new(
            mf.eps4,
            mc.eps4 + 10.0 * mc.eps3.max(mc.eps5),
            "eps2 ≤ eps4 + 10·max(eps3, eps5)",
        ),
    ];
    Ok(WCertificate {
        w: fin.clone(),
        eps3: mc.eps3,
        eps4: mc.eps4,
        eps5: mc.eps5,
        eps2: mf.eps4,
        duals: mc.duals,
        contains_v1: mf.contains,
        perp_vl: mf.perp,
        exact: false,
        bounds,
    })
}

/// Nests a candidate between P_{V₁} and P_{V₁ ⊕ … ⊕ V_{L−1}}.
fn nest_candidate(sys: &TridiagonalSystem, candidate: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = OrthoProjection::from_basis(sys.blocks[0].clone());
    let g = OrthoProjection::from_basis(sys.span(0..sys.len() - 1));
    let fp = OrthoProjection::from_basis(if candidate.ncols() == 0 {
        zeros(sys.dim(), 0)
    } else {
        candidate.clone()
    });
    let nest = nest_projection(&e, &g, &fp, false)?;
    Ok(nest.f.basis)
}

/// Nests a candidate and measures both.
pub fn certify_nested(sys: &TridiagonalSystem, candidate: &ComplexMatrix) -> Result<WCertificate> {
    let fin = nest_candidate(sys, candidate)?;
    assemble(sys, candidate, &fin)
}

/// ⊕_{k≤i} V_k when the coupling below block i vanishes (this covers empty
/// blocks); the empty subspace when V₁ = 0.
pub fn trivial_split(sys: &TridiagonalSystem) -> Option<ComplexMatrix> {
    if sys.blocks[0].ncols() == 0 {
        return Some(zeros(sys.dim(), 0));
    }
    (0..sys.len().saturating_sub(1))
        .find(|&k| sys.coupling_rank(k) == 0)
        .map(|k| sys.span(0..k + 1))
}

fn require_two_blocks(sys: &TridiagonalSystem) -> Result<()> {
    if sys.len() < 2 {
        return Err(Error::Hypothesis("V₁ = V_L is nonzero, no W can contain one and avoid the other".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Krylov reduction

/// Reduction of a system to blocks of dimension at most m = rank P_{V_{i+1}}JP_{V_i}.
#[derive(Clone, Debug)]
pub struct KrylovReduction {
    /// Coupling index, 1 ≤ i < L, in the original numbering.
    pub i: usize,
    pub m: usize,
    /// The reduction ran on the reversed system.
    pub reversed: bool,
    /// H₀ = V₁ ⊕ … ⊕ V_i of the (possibly reversed) system.
    pub h0: ComplexMatrix,
    /// H₁, H₂, … in ambient coordinates.
    pub chain: Vec<ComplexMatrix>,
    /// hcat of the chain: the isometry from reduced to ambient coordinates.
    pub embedding: ComplexMatrix,
    /// Reduced system on the chain, when the chain reaches the last block.
    pub reduced: Option<TridiagonalSystem>,
    /// Exact reducing W for the original orientation when the chain stops early.
    pub trivial: Option<ComplexMatrix>,
}

impl KrylovReduction {
    /// W in ambient coordinates from W′ in the reduced system.
    pub fn lift(&self, w_reduced: &ComplexMatrix) -> ComplexMatrix {
        let inner = if w_reduced.ncols() == 0 {
            zeros(self.h0.nrows(), 0)
        } else {
            &self.embedding * w_reduced
        };
        let w = hcat(&[&self.h0, &inner]);
        let w = if w.nrows() == 0 { zeros(self.h0.nrows(), 0) } else { w };
        if self.reversed {
            complement_basis(&w)
        } else {
            w
        }
    }
}

/// Builds H_{k+1} = orth((1 − P_{M_k}) J H_k) starting from M₀ = V₁ ⊕ … ⊕ V_i.
/// For i > ⌈L/2⌉ the system is reversed first so that the reduced system is
/// the longer one.
pub fn krylov_reduce(sys: &TridiagonalSystem, i: usize) -> Result<KrylovReduction> {
    let l = sys.len();
    if i < 1 || i >= l {
        return Err(Error::InvalidInput(format!("coupling index {i} outside 1..{l}")));
    }
    let reversed = i > l.div_ceil(2);
    let (s, ie) = if reversed { (sys.reversed(), l - i) } else { (sys.clone(), i) };
    let n = s.dim();
    let m = s.coupling_rank(ie - 1);
    let h0 = s.span(0..ie);
    let steps = l - ie;
    let mut space = h0.clone();
    let mut prev = h0.clone();
    let mut chain: Vec<ComplexMatrix> = Vec::new();
    let mut stopped = false;
    for _ in 0..steps {
        let cand = perp_part(&space, &(&s.j * &prev));
        if op_norm(&cand) <= RANK_TOL {
            stopped = true;
            break;
        }
        let h = orthonormalize(&cand, RANK_TOL);
        let h = orthonormalize(&perp_part(&space, &h), RANK_TOL);
        if h.ncols() == 0 {
            stopped = true;
            break;
        }
        if h.ncols() > m {
            return Err(Error::Numerical(format!(
                "Krylov block of dimension {} exceeds the coupling rank {m}",
                h.ncols()
            )));
        }
        space = hcat(&[&space, &h]);
        prev = h.clone();
        chain.push(h);
    }
    let embedding = if chain.is_empty() {
        zeros(n, 0)
    } else {
        hcat(&chain.iter().collect::<Vec<_>>())
    };
    if stopped {
        let w = if space.ncols() == 0 { zeros(n, 0) } else { space };
        let w = if reversed { complement_basis(&w) } else { w };
        return Ok(KrylovReduction {
            i,
            m,
            reversed,
            h0,
            chain,
            embedding,
            reduced: None,
            trivial: Some(w),
        });
    }
    let jr = symmetrize(&(embedding.adjoint() * &s.j * &embedding));
    let mut blocks = Vec::with_capacity(chain.len());
    let mut offset = 0;
    let d = embedding.ncols();
    let idr = identity(d);
    for h in &chain {
        blocks.push(idr.columns(offset, h.ncols()).into_owned());
        offset += h.ncols();
    }
    let reduced = verify_tridiagonal(&jr, &blocks)?;
    Ok(KrylovReduction {
        i,
        m,
        reversed,
        h0,
        chain,
        embedding,
        reduced: Some(reduced),
        trivial: None,
    })
}

/// Coupling index (1-based) with the smallest rank, ties broken towards the
/// longest reduced system.
fn best_reduction_index(sys: &TridiagonalSystem) -> (usize, usize) {
    let l = sys.len();
    let mut best = (usize::MAX, 0usize, 1usize);
    for i in 1..l {
        let r = sys.coupling_rank(i - 1);
        let eff = if i > l.div_ceil(2) { i } else { l - i };
        if r < best.0 || (r == best.0 && eff > best.1) {
            best = (r, eff, i);
        }
    }
    (best.2, best.0)
}

// ---------------------------------------------------------------------------
// Interval selection and polynomial partitions

/// Disjoint intervals carrying most of an atomic measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntervalSelection {
    /// Closed intervals [lo, hi], in increasing order.
    pub intervals: Vec<(f64, f64)>,
    pub kappa: f64,
    pub eta: f64,
    pub total_mass: f64,
    /// μ([0,1] \ ∪ I_j).
    pub excluded_mass: f64,
}

impl IntervalSelection {
    pub fn contains(&self, x: f64) -> Option<usize> {
        self.intervals.iter().position(|&(lo, hi)| x >= lo && x <= hi)
    }
}

fn open_mass(atoms: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    atoms.iter().filter(|a| a.0 > lo && a.0 < hi).map(|a| a.1).sum()
}

/// Intervals of diameter ≤ κ, pairwise ≥ η apart, at most 2/κ of them,
/// leaving out at most (4η/κ)·μ([0,1]). Atoms are (position, mass) pairs.
///
/// Cuts are placed every ℓ = 1/⌊2/κ⌋; around each cut a window of length κ − ℓ
/// is searched for the open η-gap of least mass.
pub fn select_intervals(atoms: &[(f64, f64)], kappa: f64, eta: f64) -> Result<IntervalSelection> {
    if !(eta > 0.0) || !(kappa > 8.0 * eta) {
        return Err(Error::InvalidInput(format!("need κ > 8η > 0, got κ = {kappa}, η = {eta}")));
    }
    let mut pts = Vec::with_capacity(atoms.len());
    for &(x, w) in atoms {
        if !(-1e-9..=1.0 + 1e-9).contains(&x) || w < 0.0 || !w.is_finite() {
            return Err(Error::InvalidInput(format!("atom ({x}, {w}) outside [0,1] or negative")));
        }
        pts.push((x.clamp(0.0, 1.0), w));
    }
    let total: f64 = pts.iter().map(|a| a.1).sum();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    if kappa >= 1.0 {
        if kappa > 2.0 {
            return Err(Error::InvalidInput("κ must not exceed 2".into()));
        }
        raw.push((0.0, 1.0));
    } else {
        let s = (2.0 / kappa).floor() as usize;
        let ell = 1.0 / s as f64;
        let w = kappa - ell;
        let mut gaps = Vec::with_capacity(s - 1);
        for k in 1..s {
            let ck = k as f64 * ell;
            let lo = ck - w / 2.0;
            let hi = ck + w / 2.0 - eta;
            let mut starts: Vec<f64> = Vec::new();
            let tiles = ((w / eta).floor() as usize).max(1);
            for t in 0..tiles {
                starts.push(lo + t as f64 * eta);
            }
            for a in &pts {
                if a.0 >= lo && a.0 <= hi {
                    starts.push(a.0);
                }
            }
            let mut best = (f64::INFINITY, lo);
            for g in starts {
                let g = g.clamp(lo, hi.max(lo));
                let mass = open_mass(&pts, g, g + eta);
                if mass < best.0 {
                    best = (mass, g);
                }
            }
            gaps.push(best.1);
        }
        let mut left = 0.0;
        for g in gaps {
            raw.push((left, g));
            left = g + eta;
        }
        raw.push((left, 1.0));
    }
    let intervals: Vec<(f64, f64)> = raw
        .into_iter()
        .filter(|&(lo, hi)| pts.iter().any(|a| a.1 > 0.0 && a.0 >= lo && a.0 <= hi))
        .collect();
    let covered: f64 = pts
        .iter()
        .filter(|a| intervals.iter().any(|&(lo, hi)| a.0 >= lo && a.0 <= hi))
        .map(|a| a.1)
        .sum();
    let excluded = (total - covered).max(0.0);
    let out = IntervalSelection {
        intervals,
        kappa,
        eta,
        total_mass: total,
        excluded_mass: excluded,
    };
    let tol = 1e-12;
    let fail = |what: &str| Err(Error::Numerical(format!("interval selection failed: {what}")));
    if out.intervals.len() as f64 > 2.0 / kappa + tol {
        return fail("too many intervals");
    }
    if out.intervals.iter().any(|&(lo, hi)| hi - lo > kappa + tol) {
        return fail("diameter above κ");
    }
    if out.intervals.windows(2).any(|p| p[1].0 - p[0].1 < eta - tol) {
        return fail("intervals closer than η");
    }
    if excluded > 4.0 * eta / kappa * total + tol * total.max(1.0) {
        return fail("excluded mass above 4η/κ·μ([0,1])");
    }
    Ok(out)
}

/// Polynomial approximations of a smooth partition subordinate to intervals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyPartition {
    pub intervals: Vec<(f64, f64)>,
    pub degree: usize,
    /// Chebyshev coefficients on [0,1] of each raw polynomial.
    pub coefficients: Vec<Vec<f64>>,
    /// Measured γ of the clamped and normalized family.
    pub gamma: f64,
    /// Measured γ of the raw polynomials.
    pub raw_gamma: f64,
    /// Largest excursion of a raw polynomial outside [0,1].
    pub raw_range_violation: f64,
    /// max |Σ_j p_j − 1| of the raw polynomials.
    pub raw_sum_defect: f64,
    /// Smallest gap between intervals.
    pub min_gap: f64,
    /// γ·η·degree, the constant implied by γ = M/(η(L₀ − 1)).
    pub implied_m: f64,
}

fn clenshaw(coef: &[f64], x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in coef.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + coef[0]
}

impl PolyPartition {
    pub fn raw(&self, j: usize, x: f64) -> f64 {
        clenshaw(&self.coefficients[j], x)
    }

    /// The clamped, normalized family at x.
    pub fn values(&self, x: f64) -> Vec<f64> {
        let q: Vec<f64> = (0..self.coefficients.len())
            .map(|j| self.raw(j, x).clamp(0.0, 1.0))
            .collect();
        let s: f64 = q.iter().sum();
        if s > 0.0 {
            q.into_iter().map(|v| v / s).collect()
        } else {
            smooth_cells(&self.intervals, x)
        }
    }
}

/// Smooth cell indicators: 1 on I_j, 0 on the others, F̄ ramps across gaps.
fn smooth_cells(intervals: &[(f64, f64)], x: f64) -> Vec<f64> {
    let r = intervals.len();
    let rise = |k: usize| -> f64 {
        let (b, a) = (intervals[k].1, intervals[k + 1].0);
        1.0 - smooth_step_bar((x - b) / (a - b))
    };
    (0..r)
        .map(|j| {
            let left = if j == 0 { 1.0 } else { rise(j - 1) };
            let right = if j + 1 == r { 0.0 } else { rise(j) };
            left - right
        })
        .collect()
}

/// Degree-capped partition of unity from Chebyshev interpolation of smooth
/// cell indicators. Returns an error if `gamma_target` is given and missed.
pub fn poly_partition(intervals: &[(f64, f64)], degree: usize, gamma_target: Option<f64>) -> Result<PolyPartition> {
    if intervals.is_empty() {
        return Err(Error::InvalidInput("no intervals".into()));
    }
    for &(lo, hi) in intervals {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] not inside [0,1]")));
        }
    }
    let mut min_gap = f64::INFINITY;
    for p in intervals.windows(2) {
        let g = p[1].0 - p[0].1;
        if g <= 0.0 {
            return Err(Error::InvalidInput("intervals must be increasing and separated".into()));
        }
        min_gap = min_gap.min(g);
    }
    let r = intervals.len();
    let nodes = degree + 1;
    let xs: Vec<f64> = (0..nodes)
        .map(|k| (((k as f64 + 0.5) * std::f64::consts::PI / nodes as f64).cos() + 1.0) / 2.0)
        .collect();
    let samples: Vec<Vec<f64>> = xs.iter().map(|&x| smooth_cells(intervals, x)).collect();
    let coefficients: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            (0..nodes)
                .map(|k| {
                    let s: f64 = (0..nodes)
                        .map(|m| {
                            samples[m][j]
                                * (k as f64 * (m as f64 + 0.5) * std::f64::consts::PI / nodes as f64).cos()
                        })
                        .sum();
                    let ck = 2.0 * s / nodes as f64;
                    if k == 0 {
                        ck / 2.0
                    } else {
                        ck
                    }
                })
                .collect()
        })
        .collect();
    let mut out = PolyPartition {
        intervals: intervals.to_vec(),
        degree,
        coefficients,
        gamma: 0.0,
        raw_gamma: 0.0,
        raw_range_violation: 0.0,
        raw_sum_defect: 0.0,
        min_gap: if r > 1 { min_gap } else { f64::INFINITY },
        implied_m: 0.0,
    };
    let grid = 4000;
    let mut pts: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    for &(lo, hi) in intervals {
        pts.push(lo);
        pts.push(hi);
    }
    for &x in &pts {
        let raw: Vec<f64> = (0..r).map(|j| out.raw(j, x)).collect();
        let fam = out.values(x);
        out.raw_sum_defect = out.raw_sum_defect.max((raw.iter().sum::<f64>() - 1.0).abs());
        for &v in &raw {
            out.raw_range_violation = out.raw_range_violation.max(-v).max(v - 1.0);
        }
        if let Some(k) = intervals.iter().position(|&(lo, hi)| x >= lo && x <= hi) {
            for j in 0..r {
                let target = if j == k { 1.0 } else { 0.0 };
                out.gamma = out.gamma.max((fam[j] - target).abs());
                out.raw_gamma = out.raw_gamma.max((raw[j] - target).abs());
            }
        }
    }
    out.implied_m = if out.min_gap.is_finite() {
        out.gamma * out.min_gap * degree as f64
    } else {
        0.0
    };
    if let Some(t) = gamma_target {
        if out.gamma > t {
            return Err(Error::InvalidInput(format!(
                "degree {degree} too small: γ = {:.3e} above target {t:.3e}",
                out.gamma
            )));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The constructive interval engine

/// Exponent family η = ε^x/m, κ = (2/11)ε^y, a = ε^z and L₀ − 2 ≈ √2·M·m·ε^l.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SzarekParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    /// Polynomial approximation constant M.
    pub m_const: f64,
}

impl Default for SzarekParams {
    fn default() -> Self {
        SzarekParams {
            x: 6.0,
            y: 1.0,
            z: 1.5,
            l: -9.0,
            m_const: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SzarekDiagnostics {
    pub trivial: bool,
    /// Coupling index used for the Krylov reduction, if any.
    pub reduced_at: Option<usize>,
    pub reversed: bool,
    /// dim V₁ of the system the construction ran on.
    pub m: usize,
    /// Number of blocks of that system.
    pub l0: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub kappa: f64,
    pub a: f64,
    pub intervals: usize,
    pub excluded_mass: f64,
    pub candidate_dim: usize,
    /// Reference values of Items 1–3 for J (the construction runs on (J+1)/2).
    pub eps3_ref: f64,
    pub eps4_ref: f64,
    pub eps5_ref: f64,
    pub gamma: f64,
    /// 83.4·(mM/(L₀ − 2))^{1/9}, stated for (J+1)/2.
    pub eps1_paper: f64,
}

#[derive(Clone, Debug)]
pub struct SzarekOutcome {
    pub certificate: WCertificate,
    pub diagnostics: SzarekDiagnostics,
}

/// Candidate and nested W for a system whose V₁ has the reduced dimension.
fn szarek_core(
    sys: &TridiagonalSystem,
    params: &SzarekParams,
    diag: &mut SzarekDiagnostics,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let l0 = sys.len();
    let s1 = sys.blocks[0].clone();
    let m = s1.ncols();
    diag.m = m;
    diag.l0 = l0;
    if l0 <= 2 {
        return Ok((s1.clone(), s1));
    }
    let mf = m as f64;
    let n = sys.dim();
    let cx = 1.0 / mf;
    let cy = 2.0 / 11.0;
    let cl = std::f64::consts::SQRT_2 * params.m_const * mf;
    let mut eps = (cl / (l0 as f64 - 2.0)).powf(1.0 / params.l.abs());
    let eps_max = 0.95 * (cy / (8.0 * cx)).powf(1.0 / (params.x - params.y));
    eps = eps.min(eps_max).min(1.0);
    let eta = cx * eps.powf(params.x);
    let kappa = cy * eps.powf(params.y);
    let a = eps.powf(params.z);
    let j2 = (&sys.j + identity(n)) * c(0.5, 0.0);
    let e = eig_hermitian(&j2)?;
    let atoms: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let ek = e.vectors.column(k);
            let phi2 = (s1.adjoint() * ek).norm_squared();
            (e.values[k], phi2)
        })
        .collect();
    let sel = select_intervals(&atoms, kappa, eta)?;
    let mut parts: Vec<ComplexMatrix> = Vec::new();
    for &(lo, hi) in &sel.intervals {
        let idx: Vec<usize> = (0..n).filter(|&k| e.values[k] >= lo && e.values[k] <= hi).collect();
        if idx.is_empty() {
            continue;
        }
        let ej = select_columns(&e.vectors, &idx);
        let coeff = ej.adjoint() * &s1;
        let (u, sv) = thin_svd(&coeff)?;
        let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > a).collect();
        if !keep.is_empty() {
            parts.push(&ej * select_columns(&u, &keep));
        }
    }
    let candidate = if parts.is_empty() {
        zeros(n, 0)
    } else {
        orthonormalize(&hcat(&parts.iter().collect::<Vec<_>>()), 1e-12)
    };
    let nested = nest_candidate(sys, &candidate)?;
    let gamma = params.m_const / (eta * (l0 as f64 - 1.0));
    diag.epsilon = eps;
    diag.eta = eta;
    diag.kappa = kappa;
    diag.a = a;
    diag.intervals = sel.intervals.len();
    diag.excluded_mass = sel.excluded_mass;
    diag.candidate_dim = candidate.ncols();
    diag.eps3_ref = (4.0 * eta * mf / kappa).sqrt() + (2.0 / kappa).sqrt() * a;
    diag.eps4_ref = kappa;
    diag.eps5_ref = (8.0 * gamma * gamma / kappa + 4.0 * eta * mf / kappa).sqrt() / a;
    diag.gamma = gamma;
    diag.eps1_paper = 83.4 * (mf * params.m_const / (l0 as f64 - 2.0)).powf(1.0 / 9.0);
    Ok((candidate, nested))
}

/// The constructive interval engine. Reduces V₁ through the Krylov chain when
/// some coupling has smaller rank than dim V₁.
#[allow(non_snake_case)]
pub fn szarek_W(sys: &TridiagonalSystem, params: &SzarekParams) -> Result<SzarekOutcome> {
    let mut diag = SzarekDiagnostics::default();
    if let Some(w) = trivial_split(sys) {
        diag.trivial = true;
        return Ok(SzarekOutcome {
            certificate: exact_certificate(sys, &w)?,
            diagnostics: diag,
        });
    }
    require_two_blocks(sys)?;
    let (i, rank) = best_reduction_index(sys);
    if rank < sys.blocks[0].ncols() {
        let kr = krylov_reduce(sys, i)?;
        diag.reduced_at = Some(i);
        diag.reversed = kr.reversed;
        if let Some(w) = &kr.trivial {
            diag.trivial = true;
            return Ok(SzarekOutcome {
                certificate: exact_certificate(sys, w)?,
                diagnostics: diag,
            });
        }
        let reduced = kr.reduced.as_ref().expect("reduced system present");
        let (cand, nested) = szarek_core(reduced, params, &mut diag)?;
        let certificate = assemble(sys, &kr.lift(&cand), &kr.lift(&nested))?;
        return Ok(SzarekOutcome { certificate, diagnostics: diag });
    }
    let (cand, nested) = szarek_core(sys, params, &mut diag)?;
    Ok(SzarekOutcome {
        certificate: assemble(sys, &cand, &nested)?,
        diagnostics: diag,
    })
}

// ---------------------------------------------------------------------------
// Projections from a commuting pair

/// Source of the commuting pair behind the sandwich projection.
#[derive(Clone, Debug)]
pub enum LinOracle {
    /// Joint approximate diagonalization by Jacobi sweeps.
    Heuristic { sweeps: usize },
    /// Grid search over sandwich-respecting projections, dimension ≤ 3.
    Brute { resolution: usize, budget: usize },
    /// A commuting pair supplied by the caller.
    Given { a: ComplexMatrix, b: ComplexMatrix },
}

impl Default for LinOracle {
    fn default() -> Self {
        LinOracle::Heuristic { sweeps: 60 }
    }
}

#[derive(Clone, Debug)]
pub struct LinProjection {
    pub p: OrthoProjection,
    /// Measured ‖[P, B]‖.
    pub comm: f64,
    /// ‖A − A′‖ and ‖B − B′‖ of the oracle's pair.
    pub a_dist: Option<f64>,
    pub b_dist: Option<f64>,
    /// ‖[P, B]‖ against 20‖A − A′‖ + 2‖B − B′‖.
    pub bound: Option<BoundCheck>,
    /// ‖[P, B]‖ ≤ ε.
    pub meets_target: bool,
}

fn check_contraction(m: &ComplexMatrix, what: &str) -> Result<()> {
    if !is_hermitian(m, 1e-10) {
        return Err(Error::NotHermitian(crate::matcore::hermitian_defect(m)));
    }
    let nm = op_norm(m);
    if nm > 1.0 + 1e-10 {
        return Err(Error::Hypothesis(format!("‖{what}‖ = {nm:.6} exceeds 1")));
    }
    Ok(())
}

/// E = E_{[−1,−1/2]}(A) and G = 1 − E_{[1/2,1]}(A).
fn sandwich(a: &ComplexMatrix) -> Result<(OrthoProjection, OrthoProjection)> {
    let ea = eig_hermitian(a)?;
    let e = spectral_projection(&ea, &RealSet::closed(f64::NEG_INFINITY, -0.5));
    let g = spectral_projection(&ea, &RealSet::open(f64::NEG_INFINITY, 0.5));
    Ok((e, g))
}

/// P with E_{[−1,−1/2]}(A) ≤ P ≤ 1 − E_{[1/2,1]}(A) and small ‖[P, B]‖.
pub fn lin_oracle_projection(a: &ComplexMatrix, b: &ComplexMatrix, eps: f64, oracle: &LinOracle) -> Result<LinProjection> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimMismatch("lin_oracle_projection".into()));
    }
    check_contraction(a, "A")?;
    check_contraction(b, "B")?;
    let n = a.nrows();
    let (ap, bp) = match oracle {
        LinOracle::Brute { resolution, budget } => {
            let res = brute_projection_search(a, b, eps, *resolution, *budget)?;
            return Ok(LinProjection {
                comm: res.value,
                meets_target: res.value <= eps,
                p: res.p,
                a_dist: None,
                b_dist: None,
                bound: None,
            });
        }
        LinOracle::Given { a: ap, b: bp } => {
            if ap.shape() != (n, n) || bp.shape() != (n, n) {
                return Err(Error::DimMismatch("oracle pair".into()));
            }
            if !is_hermitian(ap, 1e-10) || !is_hermitian(bp, 1e-10) {
                return Err(Error::Hypothesis("oracle pair must be Hermitian".into()));
            }
            let cm = comm_norm(ap, bp);
            if cm > 1e-10 * (1.0 + op_norm(ap) * op_norm(bp)) {
                return Err(Error::NotCommuting(cm));
            }
            (ap.clone(), bp.clone())
        }
        LinOracle::Heuristic { sweeps } => {
            let v = jacobi_joint_diag(&[a.clone(), b.clone()], *sweeps, 1e-14);
            let diag_part = |m: &ComplexMatrix| {
                let t = v.adjoint() * m * &v;
                let mut d = zeros(n, n);
                for k in 0..n {
                    d[(k, k)] = c(t[(k, k)].re, 0.0);
                }
                &v * d * v.adjoint()
            };
            (diag_part(a), diag_part(b))
        }
    };
    let (e, g) = sandwich(a)?;
    let eap = eig_hermitian(&symmetrize(&ap))?;
    let pp = spectral_projection(&eap, &RealSet::open(f64::NEG_INFINITY, 0.0));
    let nest = nest_projection(&e, &g, &pp, false)?;
    let p = nest.f;
    let comm = comm_norm(&p.matrix, b);
    let a_dist = op_norm(&(a - &ap));
    let b_dist = op_norm(&(b - &bp));
    let bound = BoundCheck::new(comm, 20.0 * a_dist + 2.0 * b_dist, "‖[P,B]‖ ≤ 20‖A−A′‖ + 2‖B−B′‖");
    if !bound.passes() {
        return Err(Error::Hypothesis(format!(
            "‖[P,B]‖ = {comm:.3e} exceeds 20‖A−A′‖ + 2‖B−B′‖ = {:.3e}",
            bound.rhs
        )));
    }
    Ok(LinProjection {
        p,
        comm,
        a_dist: Some(a_dist),
        b_dist: Some(b_dist),
        bound: Some(bound),
        meets_target: comm <= eps,
    })
}

/// Grid minimizer of ‖[P, B]‖ over sandwich-respecting projections.
#[derive(Clone, Debug)]
pub struct BruteSearch {
    pub p: OrthoProjection,
    pub value: f64,
    /// Operator-norm covering radius of the grid.
    pub covering_radius: f64,
    pub evaluations: usize,
    /// covering_radius ≤ ε/4, so the value is within ε/2 of the best possible.
    pub certified: bool,
}

fn unit_from_angles(k: usize, angles: &[f64]) -> nalgebra::DVector<C64> {
    match k {
        2 => {
            let (t, p) = (angles[0], angles[1]);
            nalgebra::DVector::from_vec(vec![c(t.cos(), 0.0), C64::from_polar(t.sin(), p)])
        }
        _ => {
            let (t1, t2, p1, p2) = (angles[0], angles[1], angles[2], angles[3]);
            nalgebra::DVector::from_vec(vec![
                c(t1.cos(), 0.0),
                C64::from_polar(t1.sin() * t2.cos(), p1),
                C64::from_polar(t1.sin() * t2.sin(), p2),
            ])
        }
    }
}

/// Exhaustive search over E ⊕ (projections inside Ran G ⊖ Ran E) for n ≤ 3.
pub fn brute_projection_search(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    eps: f64,
    resolution: usize,
    budget: usize,
) -> Result<BruteSearch> {
    let n = a.nrows();
    if n > 3 {
        return Err(Error::InvalidInput(format!("brute search needs dimension ≤ 3, got {n}")));
    }
    if b.shape() != (n, n) {
        return Err(Error::DimMismatch("brute_projection_search".into()));
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be positive".into()));
    }
    let (e, g) = sandwich(a)?;
    let y = &g.basis;
    let kb = if y.ncols() == 0 {
        zeros(n, 0)
    } else {
        let ey = eig_hermitian(&symmetrize(&(y.adjoint() * &e.matrix * y)))?;
        y * ey.basis_in(&RealSet::closed(f64::NEG_INFINITY, 0.5))
    };
    let k = kb.ncols();
    let res = resolution as f64;
    let half_t = std::f64::consts::PI / (4.0 * res);
    let half_p = std::f64::consts::PI / res;
    let (count, radius) = match k {
        0 | 1 => (k + 1, 0.0),
        2 => ((resolution + 1) * resolution + 2, half_t + half_p),
        _ => (
            2 * (resolution + 1).pow(2) * resolution.pow(2) + 2,
            2.0 * half_t + 2.0 * half_p,
        ),
    };
    if count > budget {
        return Err(Error::Budget(format!("{count} grid points exceed the budget {budget}")));
    }
    let mut best: Option<(f64, OrthoProjection)> = None;
    let consider = |extra: ComplexMatrix, best: &mut Option<(f64, OrthoProjection)>| {
        let basis = if extra.ncols() == 0 { e.basis.clone() } else { hcat(&[&e.basis, &extra]) };
        let basis = if basis.nrows() == 0 { zeros(n, 0) } else { basis };
        let p = OrthoProjection::from_basis(basis);
        let v = comm_norm(&p.matrix, b);
        if best.as_ref().map_or(true, |bst| v < bst.0) {
            *best = Some((v, p));
        }
    };
    consider(zeros(n, 0), &mut best);
    if k > 0 {
        consider(kb.clone(), &mut best);
    }
    if k >= 2 {
        let thetas: Vec<f64> = (0..=resolution).map(|i| std::f64::consts::FRAC_PI_2 * i as f64 / res).collect();
        let phis: Vec<f64> = (0..resolution).map(|i| std::f64::consts::TAU * i as f64 / res).collect();
        let mut grids: Vec<Vec<f64>> = Vec::new();
        if k == 2 {
            for &t in &thetas {
                for &p in &phis {
                    grids.push(vec![t, p]);
                }
            }
        } else {
            for &t1 in &thetas {
                for &t2 in &thetas {
                    for &p1 in &phis {
                        for &p2 in &phis {
                            grids.push(vec![t1, t2, p1, p2]);
                        }
                    }
                }
            }
        }
        for ang in grids {
            let v = unit_from_angles(k, &ang);
            let col = &kb * ComplexMatrix::from_column_slice(k, 1, v.as_slice());
            if k == 3 {
                let rest = perp_part(&col, &kb);
                consider(orthonormalize(&rest, 1e-10), &mut best);
            }
            consider(col, &mut best);
        }
    }
    let (value, p) = best.expect("at least one candidate");
    Ok(BruteSearch {
        p,
        value,
        covering_radius: radius,
        evaluations: count,
        certified: radius <= eps / 4.0,
    })
}

// ---------------------------------------------------------------------------
// The smooth partition engine

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HastingsConfig {
    /// Number of the overlapping windows minus one; ω(i) = −1 + κi, i = 0..=n_win.
    pub n_win: usize,
    pub l_b: usize,
    /// Number of superblocks, always odd.
    pub n_b: usize,
    pub lambda_min: f64,
    pub kappa: f64,
    pub chi: f64,
    pub eta: f64,
    /// β₀, β₁, β₂.
    pub beta: [f64; 3],
    pub growth: GrowthConfig,
    /// Proxy for the oracle's δ. When set, G(l_b) > 16·C_{F^{1,1}}/δ is
    /// enforced before running; otherwise the gates are checked on the
    /// measured commutators.
    pub lin_delta: Option<f64>,
}

/// n_b from k_b = ⌊(n_win+1)/l_b⌋ − 1, made odd.
pub fn superblock_count(n_win: usize, l_b: usize) -> usize {
    let kb = ((n_win + 1) / l_b.max(1)).saturating_sub(1);
    if kb % 2 == 1 {
        kb
    } else {
        kb.saturating_sub(1)
    }
}

impl HastingsConfig {
    /// Defaults for a system with L blocks: χ = 1/2, η = 1/10, β = (1/2, 1, 1/2).
    /// F ≡ 1 so that n_win = L; the slowly growing F of the asymptotic
    /// argument leaves only a handful of windows at desk-scale L.
    pub fn for_length(l: usize) -> Result<Self> {
        let growth = GrowthConfig {
            f: Growth::Constant(1.0),
            ..GrowthConfig::default()
        };
        Self::with(l, 0.5, 0.1, [0.5, 1.0, 0.5], growth)
    }

    pub fn with(l: usize, chi: f64, eta: f64, beta: [f64; 3], growth: GrowthConfig) -> Result<Self> {
        if l < 3 {
            return Err(Error::InvalidInput("at least three blocks are needed".into()));
        }
        let lf = l as f64;
        let fl = growth.f.eval(lf).max(1e-12);
        let n_win = ((lf.powf(beta[1]) / fl).ceil() as usize).max(2);
        let mut l_b = ((lf.powf(beta[1] - beta[0]) / fl).round() as usize).max(1);
        while l_b > 1 && superblock_count(n_win, l_b) < 1 {
            l_b -= 1;
        }
        let n_b = superblock_count(n_win, l_b);
        let cfg = HastingsConfig {
            n_win,
            l_b,
            n_b,
            lambda_min: 1.0 / (lf.powf(beta[2]) * (n_win as f64 + 1.0)),
            kappa: 2.0 / n_win as f64,
            chi,
            eta,
            beta,
            growth,
            lin_delta: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_win < 2 {
            return bad("n_win must be at least 2".into());
        }
        if (self.kappa - 2.0 / self.n_win as f64).abs() > 1e-12 {
            return bad("κ must equal 2/n_win".into());
        }
        if self.n_b == 0 || self.n_b % 2 == 0 {
            return bad(format!("n_b = {} must be odd", self.n_b));
        }
        if self.l_b == 0 || (self.n_b + 1) * self.l_b > self.n_win + 1 {
            return bad(format!("l_b = {} and n_b = {} do not fit n_win = {}", self.l_b, self.n_b, self.n_win));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return bad("χ must lie in (0,1)".into());
        }
        if !(self.eta > 0.0 && self.eta < self.chi / 4.0) {
            return bad("η must lie in (0, χ/4)".into());
        }
        if !(self.lambda_min > 0.0) {
            return bad("λ_min must be positive".into());
        }
        Ok(())
    }

    pub fn omega(&self, i: usize) -> f64 {
        -1.0 + self.kappa * i as f64
    }

    pub fn g_of_lb(&self) -> f64 {
        self.growth.g.eval(self.l_b as f64)
    }

    /// 16·C_{F^{1,1}}/G(l_b), the commutator bound fed to the oracle.
    pub fn lin_gate_value(&self) -> f64 {
        16.0 * cached_fourier(&Profile::smooth_step(1.0, 1.0, 0.0)).l1() / self.g_of_lb()
    }
}

/// Block index windows of the superblock construction, in window coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Superblocks {
    /// Y_i, Y′_i, Y″_i for i = 1..=n_b (index 0 of each vector is i = 1).
    pub y: Vec<Vec<usize>>,
    pub y1: Vec<Vec<usize>>,
    pub y2: Vec<Vec<usize>>,
    /// Y′_0 and Y′_{n_b+1}.
    pub y1_left: Vec<usize>,
    pub y1_right: Vec<usize>,
    /// B̂_i on the blocks of Y′_i.
    pub bhat: Vec<Vec<f64>>,
}

fn window(n_win: usize, lo: f64, hi: f64, hi_inclusive: bool) -> Vec<usize> {
    (0..=n_win)
        .filter(|&j| {
            let x = j as f64;
            x >= lo - 1e-12 && (if hi_inclusive { x <= hi + 1e-12 } else { x < hi - 1e-12 })
        })
        .collect()
}

pub fn superblocks(cfg: &HastingsConfig) -> Superblocks {
    let (nw, lb, nb) = (cfg.n_win, cfg.l_b as f64, cfg.n_b);
    let nwf = nw as f64;
    let mut out = Superblocks {
        y: Vec::new(),
        y1: Vec::new(),
        y2: Vec::new(),
        y1_left: window(nw, 0.0, 0.75 * lb, false),
        y1_right: window(nw, (nb as f64 + 0.25) * lb, nwf, false),
        bhat: Vec::new(),
    };
    for i in 1..=nb {
        let fi = i as f64;
        let last = i == nb;
        let lo = |frac: f64| if i == 1 { 0.0 } else { (fi - frac) * lb };
        let yy = if last {
            window(nw, (fi - 1.0) * lb, nwf, true)
        } else {
            window(nw, (fi - 1.0) * lb, (fi + 1.0) * lb, false)
        };
        let y1 = if last { window(nw, lo(0.75), nwf, true) } else { window(nw, lo(0.75), (fi + 0.75) * lb, false) };
        let y2 = if last { window(nw, lo(0.5), nwf, true) } else { window(nw, lo(0.5), (fi + 0.5) * lb, false) };
        let bh: Vec<f64> = y1
            .iter()
            .map(|&j| {
                let x = j as f64;
                if x < (fi - 0.25) * lb {
                    -1.0
                } else if x >= (fi + 0.25) * lb {
                    1.0
                } else {
                    (2.0 / (lb / 2.0 + 1.0) * (x - (fi + 0.25) * lb) + 1.0).clamp(-1.0, 1.0)
                }
            })
            .collect();
        out.y.push(yy);
        out.y1.push(y1);
        out.y2.push(y2);
        out.bhat.push(bh);
    }
    out
}

/// Everything the decay check and the certificate need from stages (a)–(e).
#[derive(Clone, Debug)]
pub struct HastingsState {
    pub cfg: HastingsConfig,
    pub windows: Superblocks,
    /// A: R → X as an n × r matrix whose block columns are orthonormal bases of X_i.
    pub a: ComplexMatrix,
    /// Column offsets of R_i inside R (length n_win + 2).
    pub offsets: Vec<usize>,
    pub rho: ComplexMatrix,
    /// N_i in R coordinates, i = 1..=n_b.
    pub n: Vec<ComplexMatrix>,
    /// N′_i for odd i, N_i for even i: the family spanning U^⊥.
    pub family: Vec<ComplexMatrix>,
    pub n_even: OrthoProjection,
    pub u_perp: ComplexMatrix,
    pub u: ComplexMatrix,
}

impl HastingsState {
    /// R coordinates of a set of windows.
    pub fn coords(&self, blocks: &[usize]) -> Vec<usize> {
        blocks
            .iter()
            .flat_map(|&j| self.offsets[j]..self.offsets[j + 1])
            .collect()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct HastingsDiagnostics {
    pub x_dims: Vec<usize>,
    /// Smallest |τ_i x|/|x| over x ∈ Ran(1 − Z_i), against λ_min^{1/2}.
    pub min_tau_singular: f64,
    pub sqrt_lambda_min: f64,
    /// ‖Σ_i F_i(J)S₁ − S₁‖.
    pub partition_residual: f64,
    pub rho_diag_defect: f64,
    pub rho_off_tridiagonal: f64,
    pub n_dims: Vec<usize>,
    pub n_prime_dims: Vec<usize>,
    /// ‖[N_i, B̂_i]‖ per superblock.
    pub n_commutators: Vec<f64>,
    /// Distance of N_i from the spectral sandwich of f(ρ_i) per superblock.
    pub n_sandwich: Vec<f64>,
    /// Largest (v, ρv) over unit v ∈ N_i, against 2G/l_b.
    pub n_energy: Vec<f64>,
    /// ‖Y′_{i+1} N_i Y′_{i−1}‖ per superblock.
    pub semi_orthogonality: Vec<f64>,
    pub u_dim: usize,
    pub w_dim: usize,
    /// Smallest |Au|/|u| on U.
    pub a_lower: f64,
    pub c3_theory: f64,
    pub c3_measured: f64,
    /// Smallest eigenvalue of each sampled M and the target x = χ/(2 − 2χ).
    pub m_min_eig: Vec<f64>,
    pub m_x: f64,
    pub m_witness_applicable: bool,
    pub lin_gate_value: f64,
    pub decay: Option<DecayFit>,
    pub eps3_ref: f64,
    pub eps4_ref: f64,
    pub eps5_ref: f64,
    pub downgraded: Option<String>,
}

#[derive(Clone, Debug)]
pub struct HastingsOutcome {
    pub certificate: WCertificate,
    pub config: HastingsConfig,
    pub diagnostics: HastingsDiagnostics,
    pub state: Option<HastingsState>,
    /// Flags recorded along the way (downgrades, degenerate stages).
    pub flags: Vec<String>,
}

/// Fitted decay of the expansion of U^⊥y_i over the N family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub c1: f64,
    pub alpha: f64,
    /// max ‖Y_j U Y_i‖ α^{−|i−j|}.
    pub c2: f64,
    /// (1 + α + α⁻¹)·C₁.
    pub c2_lemma: f64,
    /// Slope of a least-squares fit of log coefficients against distance.
    pub alpha_ls: f64,
    /// (i, j, max |n_j^i|/|y_i|).
    pub coefficients: Vec<(usize, usize, f64)>,
    /// (i, j, ‖Y_j U Y_i‖).
    pub yuy: Vec<(usize, usize, f64)>,
    pub ok: bool,
}

const HASTINGS_SAMPLES: usize = 3;

fn unit_in(coords: &[usize], r: usize, rng: &mut Rng) -> nalgebra::DVector<C64> {
    let mut v = nalgebra::DVector::from_element(r, c(0.0, 0.0));
    for &k in coords {
        v[k] = rng.complex_normal();
    }
    let nv = v.norm();
    if nv > 0.0 {
        v / c(nv, 0.0)
    } else {
        v
    }
}

/// Coefficients of U^⊥y in the direct sum of the family.
fn expand(state: &HastingsState, y: &nalgebra::DVector<C64>) -> Result<Vec<nalgebra::DVector<C64>>> {
    let parts: Vec<&ComplexMatrix> = state.family.iter().filter(|f| f.ncols() > 0).collect();
    let r = state.rho.nrows();
    let proj = if state.u_perp.ncols() == 0 {
        nalgebra::DVector::from_element(r, c(0.0, 0.0))
    } else {
        &state.u_perp * (state.u_perp.adjoint() * y)
    };
    let mut out = Vec::with_capacity(state.family.len());
    if parts.is_empty() {
        for _ in &state.family {
            out.push(nalgebra::DVector::from_element(r, c(0.0, 0.0)));
        }
        return Ok(out);
    }
    let big = hcat(&parts);
    let svd = big.clone().svd(true, true);
    let coef = svd
        .solve(&proj, 1e-12)
        .map_err(|e| Error::Numerical(format!("direct sum expansion: {e}")))?;
    let mut off = 0;
    for f in &state.family {
        let k = f.ncols();
        if k == 0 {
            out.push(nalgebra::DVector::from_element(r, c(0.0, 0.0)));
            continue;
        }
        let ck = coef.rows(off, k).into_owned();
        out.push(f * ck);
        off += k;
    }
    Ok(out)
}

/// Fits |n_j^i| ≤ C₁α^{|i−j|}|y_i| from sampled y_i ∈ Y_i and tabulates
/// ‖Y_j U Y_i‖.
#[allow(non_snake_case)]
pub fn decay_check_U(state: &HastingsState) -> Result<DecayFit> {
    let nb = state.cfg.n_b;
    let r = state.rho.nrows();
    let mut rng = Rng::seeded(0x5eed);
    let mut coefficients = Vec::new();
    let mut by_dist = vec![0.0f64; nb];
    for i in 0..nb {
        let coords = state.coords(&state.windows.y[i]);
        let mut row = vec![0.0f64; nb];
        for _ in 0..HASTINGS_SAMPLES {
            let y = unit_in(&coords, r, &mut rng);
            if y.norm() == 0.0 {
                continue;
            }
            let parts = expand(state, &y)?;
            for (j, nj) in parts.iter().enumerate() {
                row[j] = row[j].max(nj.norm());
            }
        }
        for j in 0..nb {
            coefficients.push((i + 1, j + 1, row[j]));
            let d = i.abs_diff(j);
            by_dist[d] = by_dist[d].max(row[j]);
        }
    }
    let pts: Vec<(f64, f64)> = by_dist
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-14)
        .map(|(d, &v)| (d as f64, v.ln()))
        .collect();
    let alpha_ls = if pts.len() < 2 {
        0.0
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    };
    // C₁(α) = max_d v_d α^{−d}; α minimizes C₁(α)·√(1 + α + α⁻¹)·(1 + α)/(1 − α),
    // the combination that enters the Item 1 reference.
    let c1_of = |a: f64| {
        by_dist
            .iter()
            .enumerate()
            .map(|(d, &v)| if v > 1e-14 { v * a.powi(-(d as i32)) } else { 0.0 })
            .fold(0.0, f64::max)
    };
    let alpha = if by_dist.iter().skip(1).all(|&v| v <= 1e-14) {
        0.0
    } else {
        (1..100)
            .map(|k| k as f64 / 100.0)
            .map(|a| (a, c1_of(a) * (1.0 + a + 1.0 / a).sqrt() * (1.0 + a) / (1.0 - a)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|p| p.0)
            .unwrap_or(0.0)
    };
    let c1 = if alpha > 0.0 { c1_of(alpha) } else { by_dist[0] };
    let scale = |d: usize| if alpha > 0.0 { alpha.powi(-(d as i32)) } else if d == 0 { 1.0 } else { 0.0 };
    let u_proj = if state.u.ncols() == 0 {
        zeros(r, r)
    } else {
        &state.u * state.u.adjoint()
    };
    let mut yuy = Vec::new();
    let mut c2: f64 = 0.0;
    for i in 0..nb {
        let ci = state.coords(&state.windows.y[i]);
        for j in 0..nb {
            let cj = state.coords(&state.windows.y[j]);
            let v = op_norm(&sub(&u_proj, &cj, &ci));
            yuy.push((i + 1, j + 1, v));
            if v > 1e-14 {
                c2 = c2.max(v * scale(i.abs_diff(j)));
            }
        }
    }
    let c2_lemma = if alpha > 0.0 { (1.0 + alpha + 1.0 / alpha) * c1 } else { f64::INFINITY };
    Ok(DecayFit {
        c1,
        alpha,
        c2,
        c2_lemma,
        alpha_ls,
        coefficients,
        yuy,
        ok: alpha < 1.0,
    })
}

fn downgrade(sys: &TridiagonalSystem, cfg: &HastingsConfig, mut diag: HastingsDiagnostics, reason: String) -> Result<HastingsOutcome> {
    let sz = szarek_W(sys, &SzarekParams::default())?;
    diag.downgraded = Some(reason.clone());
    Ok(HastingsOutcome {
        certificate: sz.certificate,
        config: cfg.clone(),
        diagnostics: diag,
        state: None,
        flags: vec![format!("downgraded to the interval engine: {reason}")],
    })
}

/// The smooth partition engine, stages (a)–(f).
#[allow(non_snake_case)]
pub fn hastings_W(sys: &TridiagonalSystem, cfg: &HastingsConfig, oracle: &LinOracle) -> Result<HastingsOutcome> {
    cfg.validate()?;
    let mut diag = HastingsDiagnostics {
        lin_gate_value: cfg.lin_gate_value(),
        sqrt_lambda_min: cfg.lambda_min.sqrt(),
        m_x: cfg.chi / (2.0 - 2.0 * cfg.chi),
        ..Default::default()
    };
    if let Some(w) = trivial_split(sys) {
        return Ok(HastingsOutcome {
            certificate: exact_certificate(sys, &w)?,
            config: cfg.clone(),
            diagnostics: diag,
            state: None,
            flags: vec!["exact reducing subspace".into()],
        });
    }
    require_two_blocks(sys)?;
    if let Some(delta) = cfg.lin_delta {
        if diag.lin_gate_value >= delta {
            let reason = format!("G(l_b) gate: 16C/G = {:.3} is not below δ = {delta}", diag.lin_gate_value);
            return downgrade(sys, cfg, diag, reason);
        }
    }
    let n = sys.dim();
    let s1 = &sys.blocks[0];
    let stage = |s: &str, m: String| Error::stage(s, m);

    // (a) the spaces X_i
    let ej = eig_hermitian(&sys.j)?;
    let profiles = crate::smoothing::partition_of_unity(cfg.n_win)?;
    let mut xs: Vec<ComplexMatrix> = Vec::with_capacity(profiles.len());
    let mut tau_sum = zeros(n, s1.ncols());
    let mut min_sing = f64::INFINITY;
    for p in &profiles {
        let tau = apply_profile(&ej, p) * s1;
        tau_sum += &tau;
        let gram = eig_hermitian(&symmetrize(&(tau.adjoint() * &tau)))?;
        let keep: Vec<usize> = (0..gram.dim()).filter(|&k| gram.values[k] > cfg.lambda_min).collect();
        let uk = select_columns(&gram.vectors, &keep);
        let tk = &tau * &uk;
        if !keep.is_empty() {
            min_sing = min_sing.min(smallest_singular(&tk));
        }
        let mut x = tk.clone();
        for (col, &k) in keep.iter().enumerate() {
            let s = gram.values[k].sqrt();
            for r in 0..n {
                x[(r, col)] /= s;
            }
        }
        xs.push(if x.ncols() == 0 { zeros(n, 0) } else { x });
    }
    diag.x_dims = xs.iter().map(|x| x.ncols()).collect();
    diag.min_tau_singular = min_sing;
    diag.partition_residual = op_norm(&(&tau_sum - s1));
    if min_sing < diag.sqrt_lambda_min * (1.0 - 1e-9) {
        return Err(stage("a", format!("|τx| = {min_sing:.3e}|x| below λ_min^{{1/2}}")));
    }
    if diag.partition_residual > 1e-8 {
        return Err(stage("a", format!("Σ τ_i ≠ S₁ (residual {:.2e})", diag.partition_residual)));
    }

    // (b) R, A, ρ and the superblocks
    let mut offsets = vec![0usize];
    for x in &xs {
        offsets.push(offsets.last().unwrap() + x.ncols());
    }
    let r = *offsets.last().unwrap();
    if r == 0 {
        return downgrade(sys, cfg, diag, "all X_i are zero".into());
    }
    let a = hcat(&xs.iter().filter(|x| x.ncols() > 0).collect::<Vec<_>>());
    let rho = symmetrize(&(a.adjoint() * &a));
    let blk = |i: usize| (offsets[i]..offsets[i + 1]).collect::<Vec<usize>>();
    let mut diag_defect: f64 = 0.0;
    let mut off_tri: f64 = 0.0;
    for i in 0..xs.len() {
        let bi = blk(i);
        if bi.is_empty() {
            continue;
        }
        diag_defect = diag_defect.max(op_norm(&(sub(&rho, &bi, &bi) - identity(bi.len()))));
        for k in i + 2..xs.len() {
            let bk = blk(k);
            if !bk.is_empty() {
                off_tri = off_tri.max(op_norm(&sub(&rho, &bi, &bk)));
            }
        }
    }
    diag.rho_diag_defect = diag_defect;
    diag.rho_off_tridiagonal = off_tri;
    if diag_defect > 1e-10 || off_tri > 1e-10 {
        return Err(stage(
            "b",
            format!("ρ diagonal blocks off identity by {diag_defect:.2e}, off-tridiagonal {off_tri:.2e}"),
        ));
    }
    let windows = superblocks(cfg);
    let mut cover = vec![0usize; cfg.n_win + 1];
    for w in &windows.y2 {
        for &j in w {
            cover[j] += 1;
        }
    }
    if cover.iter().any(|&k| k != 1) {
        return Err(stage("b", "the Y″_i do not form a resolution of the identity".into()));
    }
    let mut state = HastingsState {
        cfg: cfg.clone(),
        windows,
        a: a.clone(),
        offsets,
        rho: rho.clone(),
        n: Vec::new(),
        family: Vec::new(),
        n_even: OrthoProjection::zero(r),
        u_perp: zeros(r, 0),
        u: zeros(r, 0),
    };

    // (c) N_i from the oracle
    let g = cfg.g_of_lb();
    let lbf = cfg.l_b as f64;
    let lo_cut = g / lbf;
    let f_profile = Profile::smooth_step(lo_cut, lo_cut, 0.0);
    let per_block: Vec<Result<(ComplexMatrix, f64, f64, f64)>> = (0..cfg.n_b)
        .into_par_iter()
        .map(|i| {
            let coords = state.coords(&state.windows.y1[i]);
            let k = coords.len();
            if k == 0 {
                return Ok((zeros(r, 0), 0.0, 0.0, 0.0));
            }
            let rho_i = sub(&rho, &coords, &coords);
            let er = eig_hermitian(&rho_i)?;
            let f_rho = crate::matcore::apply_function(&er, |x| c(1.0 - 2.0 * f_profile.eval(x), 0.0));
            let mut bvals = Vec::with_capacity(k);
            for (pos, &blkj) in state.windows.y1[i].iter().enumerate() {
                let width = state.offsets[blkj + 1] - state.offsets[blkj];
                bvals.extend(std::iter::repeat(state.windows.bhat[i][pos]).take(width));
            }
            let bhat = crate::matcore::from_real_diag(&bvals);
            let lin = lin_oracle_projection(&symmetrize(&f_rho), &bhat, 1.0 - cfg.chi, oracle)?;
            let nb = &lin.p.basis;
            let low = er.basis_in(&RealSet::closed(f64::NEG_INFINITY, lo_cut));
            let high = er.basis_in(&RealSet::closed(2.0 * lo_cut, f64::INFINITY));
            let miss = op_norm(&perp_part(nb, &low));
            let leak = if nb.ncols() == 0 { 0.0 } else { op_norm(&(high.adjoint() * nb)) };
            if miss > 1e-8 || leak > 1e-8 {
                return Err(Error::stage(
                    "c",
                    format!("sandwich violated for N_{} (missing {miss:.2e}, leaking {leak:.2e})", i + 1),
                ));
            }
            let energy = if nb.ncols() == 0 {
                0.0
            } else {
                eig_hermitian(&symmetrize(&(nb.adjoint() * &rho_i * nb)))?.values.last().cloned().unwrap_or(0.0)
            };
            let mut emb = zeros(r, nb.ncols());
            for (row, &cidx) in coords.iter().enumerate() {
                for col in 0..nb.ncols() {
                    emb[(cidx, col)] = nb[(row, col)];
                }
            }
            Ok((emb, lin.comm, energy, miss.max(leak)))
        })
        .collect();
    let mut ns = Vec::with_capacity(cfg.n_b);
    for res in per_block {
        let (emb, comm, energy, sandwich) = res?;
        ns.push(emb);
        diag.n_sandwich.push(sandwich);
        diag.n_commutators.push(comm);
        diag.n_energy.push(energy);
    }
    diag.n_dims = ns.iter().map(|m| m.ncols()).collect();
    if let Some((i, &cm)) = diag
        .n_commutators
        .iter()
        .enumerate()
        .find(|(_, &cm)| cm > 1.0 - cfg.chi + 1e-12)
    {
        let reason = format!("‖[N_{}, B̂]‖ = {cm:.3} exceeds 1 − χ", i + 1);
        return downgrade(sys, cfg, diag, reason);
    }
    if let Some(i) = diag.n_energy.iter().position(|&e| e > 2.0 * lo_cut + 1e-9) {
        return Err(stage("c", format!("(v, ρv) above 2G/l_b on N_{}", i + 1)));
    }

    // (d) pruning of the odd N_i
    let even: Vec<&ComplexMatrix> = ns
        .iter()
        .enumerate()
        .filter(|(i, m)| (i + 1) % 2 == 0 && m.ncols() > 0)
        .map(|(_, m)| m)
        .collect();
    let n_even = if even.is_empty() {
        OrthoProjection::zero(r)
    } else {
        OrthoProjection::from_basis(hcat(&even))
    };
    if n_even.rank > 0 && op_norm(&(n_even.basis.adjoint() * &n_even.basis - identity(n_even.rank))) > 1e-10 {
        return Err(stage("d", "even N_i are not mutually orthogonal".into()));
    }
    let mut family = Vec::with_capacity(cfg.n_b);
    for (i, ni) in ns.iter().enumerate() {
        if (i + 1) % 2 == 0 || ni.ncols() == 0 {
            family.push(ni.clone());
            diag.n_prime_dims.push(ni.ncols());
            continue;
        }
        let pi = OrthoProjection::from_basis(ni.clone());
        let jb = jordan_basis(&pi, &n_even)?;
        let keep: Vec<usize> = (0..jb.ncols())
            .filter(|&k| {
                let col = jb.column(k).into_owned();
                let v = if n_even.rank == 0 { 0.0 } else { (n_even.basis.adjoint() * col).norm_squared() };
                v <= 0.5 + cfg.eta
            })
            .collect();
        let kept = select_columns(&jb, &keep);
        diag.n_prime_dims.push(kept.ncols());
        family.push(kept);
    }
    let ycoords = |w: &[usize]| state.coords(w);
    for i in 0..cfg.n_b {
        let left = if i == 0 { ycoords(&state.windows.y1_left) } else { ycoords(&state.windows.y1[i - 1]) };
        let right = if i + 1 == cfg.n_b { ycoords(&state.windows.y1_right) } else { ycoords(&state.windows.y1[i + 1]) };
        let ni = &ns[i];
        let v = if ni.ncols() == 0 || left.is_empty() || right.is_empty() {
            0.0
        } else {
            op_norm(&(rows_of(ni, &right) * rows_of(ni, &left).adjoint()))
        };
        diag.semi_orthogonality.push(v);
    }

    // (e) U and W
    let nonempty: Vec<&ComplexMatrix> = family.iter().filter(|f| f.ncols() > 0).collect();
    let total_family: usize = nonempty.iter().map(|f| f.ncols()).sum();
    let u_perp = if nonempty.is_empty() { zeros(r, 0) } else { orthonormalize(&hcat(&nonempty), 1e-12) };
    if u_perp.ncols() != total_family {
        return Err(stage("e", "the N family is linearly dependent".into()));
    }
    let u = complement_basis(&u_perp);
    let au = &a * &u;
    diag.u_dim = u.ncols();
    diag.a_lower = smallest_singular(&au);
    let w = if u.ncols() == 0 { zeros(n, 0) } else { orthonormalize(&au, 1e-12) };
    diag.w_dim = w.ncols();
    let eta = cfg.eta;
    let p = (((1.0 - eta) / (1.0 - 2.0 * eta)).sqrt() - 1.0).powi(2);
    let cc = ((1.0 + (1.0 - eta).sqrt()) / 2.0).max((1.0 - p * p).sqrt());
    diag.c3_theory = 1.0 / (1.0 - cc * cc);
    diag.c3_measured = if diag.a_lower.is_finite() && diag.a_lower > 0.0 {
        1.0 / (diag.a_lower.powi(2) * lbf)
    } else {
        0.0
    };
    state.n = ns;
    state.family = family;
    state.n_even = n_even;
    state.u_perp = u_perp;
    state.u = u;

    // the matrix M of the decay argument, from sampled y_i
    let x = diag.m_x;
    let scale = 2.0 * (1.0 + x) / (1.0 - 2.0 * eta);
    let mut rng = Rng::seeded(0xa11ce);
    let mut applicable = true;
    for i in 0..cfg.n_b {
        let coords = state.coords(&state.windows.y[i]);
        let y = unit_in(&coords, r, &mut rng);
        if y.norm() == 0.0 {
            continue;
        }
        let parts = expand(&state, &y)?;
        let odd: Vec<usize> = (0..cfg.n_b).filter(|&s| s % 2 == 0 && parts[s].norm() > 1e-12).collect();
        if odd.is_empty() {
            continue;
        }
        let ms: Vec<nalgebra::DVector<C64>> = odd.iter().map(|&s| &parts[s] / c(parts[s].norm(), 0.0)).collect();
        let ne = &state.n_even.matrix;
        let perp: Vec<nalgebra::DVector<C64>> = ms.iter().map(|m| m - ne * m).collect();
        let k = ms.len();
        let mm = ComplexMatrix::from_fn(k, k, |a1, b1| perp[a1].dotc(&perp[b1]) * scale);
        let mm = symmetrize(&mm);
        let cs: Vec<f64> = odd
            .iter()
            .zip(&ms)
            .map(|(&s, m)| {
                let w = if s == 0 { &state.windows.y1_left } else { &state.windows.y1[s - 1] };
                state.coords(w).iter().map(|&q| m[q].norm_sqr()).sum::<f64>().sqrt()
            })
            .collect();
        let ds: Vec<f64> = odd
            .iter()
            .zip(&ms)
            .map(|(&s, m)| {
                let w = if s + 1 == cfg.n_b { &state.windows.y1_right } else { &state.windows.y1[s + 1] };
                state.coords(w).iter().map(|&q| m[q].norm_sqr()).sum::<f64>().sqrt()
            })
            .collect();
        let shifted = &mm - identity(k) * c(x, 0.0);
        match tridiag_positive_test(&shifted, &cs, &ds) {
            Ok(wit) => diag.m_min_eig.push(wit.min_eig + x),
            Err(Error::NotApplicable(_)) => {
                applicable = false;
                diag.m_min_eig.push(eig_hermitian(&mm)?.values[0]);
            }
            Err(e) => return Err(e),
        }
    }
    diag.m_witness_applicable = applicable;
    if let Some(&worst) = diag.m_min_eig.iter().min_by(|a, b| a.total_cmp(b)) {
        if worst < x - 1e-9 {
            let reason = format!("min eig of M = {worst:.3} is below x = {x:.3}");
            return downgrade(sys, cfg, diag, reason);
        }
    }

    // decay constants and (f) the certificate
    let fit = decay_check_U(&state)?;
    let mut flags = Vec::new();
    if !fit.ok {
        flags.push(format!("decay fit failed: α = {:.3}", fit.alpha));
    }
    if !diag.m_witness_applicable {
        flags.push("positivity witness not applicable to some M".into());
    }
    let alpha = fit.alpha.max(1e-3);
    let c3 = diag.c3_theory.max(diag.c3_measured);
    if alpha < 1.0 {
        let c_a = 1.0 + alpha + 1.0 / alpha;
        let c4 = fit.c1 * (2.0 * c_a).sqrt() * (1.0 + alpha) / (1.0 - alpha);
        diag.eps3_ref = c4 * (2.0 * g / lbf).sqrt() + (2.0 * cfg.lambda_min * (cfg.n_win as f64 + 1.0)).sqrt();
        let c_alpha = (0..2000)
            .map(|k| (k as f64 + 3.0) * alpha.powf(k as f64 / 2.0))
            .fold(0.0, f64::max);
        let c2 = fit.c2.max(1.0 / alpha);
        let k_alpha = 2.0 * 3f64.sqrt() * c_a.sqrt() * c_alpha * c2 * (2.0 + alpha) / (2.0 - alpha);
        diag.eps4_ref = cfg.kappa * lbf * k_alpha * (c3 * lbf).sqrt();
    } else {
        diag.eps3_ref = f64::INFINITY;
        diag.eps4_ref = f64::INFINITY;
    }
    diag.eps5_ref = s_of(sys.len() as f64, cfg.n_win)
        * (c3 * (cfg.n_win as f64 + 1.0) * lbf / cfg.lambda_min).sqrt();
    diag.decay = Some(fit);
    let certificate = certify_nested(sys, &w)?;
    Ok(HastingsOutcome {
        certificate,
        config: cfg.clone(),
        diagnostics: diag,
        state: Some(state),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::from_real_rows;

    /// Random real symmetric tridiagonal contraction.
    pub(crate) fn random_tridiagonal(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = Rng::seeded(seed);
        let mut m = zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(rng.uniform(-1.0, 1.0), 0.0);
            if i + 1 < n {
                let v = rng.uniform(0.2, 1.0);
                m[(i, i + 1)] = c(v, 0.0);
                m[(i + 1, i)] = c(v, 0.0);
            }
        }
        let nm = op_norm(&m);
        m / c(nm, 0.0)
    }

    #[test]
    fn block_diagonal_passes_with_zero_coupling() {
        let j = from_real_rows(&[&[0.5, 0.0], &[0.0, -0.5]]);
        let sys = verify_tridiagonal(&j, &singleton_blocks(2)).unwrap();
        assert_eq!(sys.off_tridiagonal, 0.0);
        assert_eq!(sys.coupling_rank(0), 0);
    }

    #[test]
    fn dense_matrix_is_rejected_with_location() {
        let mut rng = Rng::seeded(3);
        let j = rng.hermitian(5);
        let err = verify_tridiagonal(&j, &singleton_blocks(5)).unwrap_err();
        match err {
            Error::Hypothesis(m) => assert!(m.contains("couple"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn whole_space_certificate() {
        let j = random_tridiagonal(6, 1);
        let sys = verify_tridiagonal(&j, &singleton_blocks(6)).unwrap();
        let cert = certify_W(&sys, &identity(6)).unwrap();
        assert!(cert.eps3 < 1e-12 && cert.eps4 < 1e-12);
        assert!((cert.eps5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn primal_and_dual_agree_for_random_w() {
        let j = random_tridiagonal(8, 2);
        let sys = verify_tridiagonal(&j, &singleton_blocks(8)).unwrap();
        let w = Rng::seeded(9).subspace(8, 3);
        let cert = certify_W(&sys, &w).unwrap();
        assert!((cert.eps3 - cert.duals[0]).abs() < 1e-10);
        assert!((cert.eps4 - cert.duals[1]).abs() < 1e-10);
        assert!((cert.eps5 - cert.duals[2]).abs() < 1e-10);
    }

    #[test]
    fn zero_coupling_gives_trivial_reduction() {
        let mut j = random_tridiagonal(6, 4);
        j[(2, 3)] = c(0.0, 0.0);
        j[(3, 2)] = c(0.0, 0.0);
        let sys = verify_tridiagonal(&j, &singleton_blocks(6)).unwrap();
        let kr = krylov_reduce(&sys, 3).unwrap();
        let w = kr.trivial.expect("trivial");
        let cert = certify_W(&sys, &w).unwrap();
        assert!(cert.eps4 < 1e-12 && cert.contains_v1 && cert.perp_vl);
    }

    #[test]
    fn rank_one_coupling_gives_small_blocks() {
        // blocks of dimension 2, couplings of rank one
        let n = 12;
        let mut rng = Rng::seeded(5);
        let mut j = zeros(n, n);
        for b in 0..6 {
            let d = rng.hermitian(2) * c(0.5, 0.0);
            for p in 0..2 {
                for q in 0..2 {
                    j[(2 * b + p, 2 * b + q)] = d[(p, q)];
                }
            }
            if b + 1 < 6 {
                let u = rng.unit_vector(2);
                let v = rng.unit_vector(2);
                let cpl = &u * v.adjoint() * c(0.4, 0.0);
                for p in 0..2 {
                    for q in 0..2 {
                        j[(2 * b + 2 + p, 2 * b + q)] = cpl[(p, q)];
                        j[(2 * b + q, 2 * b + 2 + p)] = cpl[(p, q)].conj();
                    }
                }
            }
        }
        let j = &j / c(op_norm(&j), 0.0);
        let id = identity(n);
        let blocks: Vec<ComplexMatrix> = (0..6).map(|b| id.columns(2 * b, 2).into_owned()).collect();
        let sys = verify_tridiagonal(&j, &blocks).unwrap();
        let kr = krylov_reduce(&sys, 2).unwrap();
        assert_eq!(kr.m, 1);
        assert!(kr.chain.iter().all(|h| h.ncols() <= 1));
        if let Some(red) = &kr.reduced {
            assert!(red.off_tridiagonal < 1e-10);
        }
    }

    #[test]
    fn reversal_matches_forward_on_reversed_system() {
        let j = random_tridiagonal(10, 6);
        let sys = verify_tridiagonal(&j, &singleton_blocks(10)).unwrap();
        let back = krylov_reduce(&sys, 8).unwrap();
        assert!(back.reversed);
        let fwd = krylov_reduce(&sys.reversed(), 2).unwrap();
        assert!(!fwd.reversed);
        assert_eq!(back.chain.len(), fwd.chain.len());
        for (a, b) in back.chain.iter().zip(&fwd.chain) {
            let pa = a * a.adjoint();
            let pb = b * b.adjoint();
            assert!(op_norm(&(pa - pb)) < 1e-10);
        }
    }

    #[test]
    fn single_atom_gives_one_interval() {
        let sel = select_intervals(&[(0.37, 1.0)], 0.2, 0.02).unwrap();
        assert_eq!(sel.intervals.len(), 1);
        assert!(sel.contains(0.37).is_some());
        assert_eq!(sel.excluded_mass, 0.0);
    }

    #[test]
    fn interval_precondition() {
        assert!(select_intervals(&[(0.5, 1.0)], 0.1, 0.02).is_err());
    }

    #[test]
    fn one_interval_polynomial_is_one() {
        let pp = poly_partition(&[(0.2, 0.4)], 5, None).unwrap();
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            assert!((pp.raw(0, x) - 1.0).abs() < 1e-12);
        }
        assert!(pp.gamma < 1e-12);
    }

    #[test]
    fn decoupled_system_is_exact() {
        let j = from_real_rows(&[&[0.3, 0.0, 0.0], &[0.0, -0.2, 0.0], &[0.0, 0.0, 0.9]]);
        let sys = verify_tridiagonal(&j, &singleton_blocks(3)).unwrap();
        let out = szarek_W(&sys, &SzarekParams::default()).unwrap();
        assert!(out.certificate.exact);
        assert!(out.certificate.eps2 == 0.0);
        assert!(out.certificate.contains_v1 && out.certificate.perp_vl);
    }

    #[test]
    fn empty_block_is_trivial() {
        let j = random_tridiagonal(4, 8);
        let id = identity(4);
        let blocks = vec![
            id.columns(0, 1).into_owned(),
            id.columns(1, 1).into_owned(),
            zeros(4, 0),
            id.columns(2, 2).into_owned(),
        ];
        // J couples e_2 and e_3 across the empty block, so zero that entry
        let mut j = j;
        j[(1, 2)] = c(0.0, 0.0);
        j[(2, 1)] = c(0.0, 0.0);
        let sys = verify_tridiagonal(&j, &blocks).unwrap();
        let out = szarek_W(&sys, &SzarekParams::default()).unwrap();
        assert!(out.certificate.exact);
        assert!(out.certificate.eps2 < 1e-12);
    }

    #[test]
    fn given_oracle_on_commuting_pair() {
        let a = from_real_rows(&[&[-0.8, 0.0], &[0.0, 0.6]]);
        let b = from_real_rows(&[&[0.2, 0.0], &[0.0, -0.4]]);
        let out = lin_oracle_projection(&a, &b, 0.1, &LinOracle::Given { a: a.clone(), b: b.clone() }).unwrap();
        assert!(out.comm < 1e-10);
        assert_eq!(out.p.rank, 1);
        assert!((out.p.matrix[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_search_on_diagonal_pair() {
        let a = from_real_rows(&[&[-0.9, 0.0, 0.0], &[0.0, 0.1, 0.0], &[0.0, 0.0, 0.8]]);
        let b = from_real_rows(&[&[0.3, 0.0, 0.0], &[0.0, -0.5, 0.0], &[0.0, 0.0, 0.1]]);
        let out = brute_projection_search(&a, &b, 0.5, 8, 10_000).unwrap();
        assert!(out.value < 1e-12);
    }

    #[test]
    fn brute_search_respects_budget() {
        let a = from_real_rows(&[&[0.0, 0.0, 0.0], &[0.0, 0.1, 0.0], &[0.0, 0.0, -0.1]]);
        let b = a.clone();
        assert!(matches!(brute_projection_search(&a, &b, 0.1, 40, 1000), Err(Error::Budget(_))));
    }

    #[test]
    fn superblock_windows_cover_once() {
        let cfg = HastingsConfig::with(60, 0.5, 0.1, [0.5, 1.0, 0.5], GrowthConfig {
            g: crate::smoothing::Growth::LogSquaredMin2,
            f: crate::smoothing::Growth::Constant(1.0),
        })
        .unwrap();
        assert_eq!(cfg.n_b % 2, 1);
        let w = superblocks(&cfg);
        let mut cover = vec![0; cfg.n_win + 1];
        for y in &w.y2 {
            for &j in y {
                cover[j] += 1;
            }
        }
        assert!(cover.iter().all(|&k| k == 1));
        for (y, b) in w.y1.iter().zip(&w.bhat) {
            assert_eq!(y.len(), b.len());
            assert!(b.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    fn block_tridiagonal(l: usize, d: usize, seed: u64) -> TridiagonalSystem {
        let mut rng = Rng::seeded(seed);
        let n = l * d;
        let mut j = zeros(n, n);
        for b in 0..l {
            let h = rng.hermitian(d);
            j.view_mut((b * d, b * d), (d, d)).copy_from(&h);
            if b + 1 < l {
                let g = rng.gaussian(d, d);
                j.view_mut(((b + 1) * d, b * d), (d, d)).copy_from(&g);
                j.view_mut((b * d, (b + 1) * d), (d, d)).copy_from(&g.adjoint());
            }
        }
        let j = &j / c(op_norm(&j), 0.0);
        let id = identity(n);
        let blocks: Vec<ComplexMatrix> = (0..l).map(|b| id.columns(b * d, d).into_owned()).collect();
        verify_tridiagonal(&j, &blocks).unwrap()
    }

    #[test]
    fn banded_scalar_matrix_passes() {
        let sys = verify_tridiagonal(&random_tridiagonal(9, 11), &singleton_blocks(9)).unwrap();
        assert!(sys.off_tridiagonal < 1e-15);
    }

    #[test]
    fn uniform_atoms_satisfy_all_conclusions() {
        let atoms: Vec<(f64, f64)> = (0..100).map(|k| ((k as f64 + 0.5) / 100.0, 0.01)).collect();
        let sel = select_intervals(&atoms, 0.2, 0.02).unwrap();
        assert!(sel.intervals.len() as f64 <= 2.0 / 0.2);
        for &(lo, hi) in &sel.intervals {
            assert!(hi - lo <= 0.2 + 1e-12);
        }
        for p in sel.intervals.windows(2) {
            assert!(p[1].0 - p[0].1 >= 0.02 - 1e-12);
        }
        // independent recount of the mass outside the intervals
        let outside: f64 = atoms.iter().filter(|a| sel.contains(a.0).is_none()).map(|a| a.1).sum();
        assert!((outside - sel.excluded_mass).abs() < 1e-12);
        assert!(outside <= 4.0 * 0.02 / 0.2 * 1.0 + 1e-12);
    }

    #[test]
    fn separated_intervals_at_degree_30() {
        let pp = poly_partition(&[(0.0, 0.3), (0.7, 1.0)], 30, Some(0.1)).unwrap();
        assert!(pp.gamma < 0.1, "γ = {}", pp.gamma);
        for k in 0..=20 {
            let v = pp.values(k as f64 / 20.0);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn degree_one_with_close_intervals_is_flagged() {
        let iv = [(0.0, 0.45), (0.55, 1.0)];
        let pp = poly_partition(&iv, 1, None).unwrap();
        assert!(pp.gamma > 0.2, "γ = {}", pp.gamma);
        assert!(poly_partition(&iv, 1, Some(0.1)).is_err());
    }

    #[test]
    fn szarek_on_singleton_chain() {
        for seed in 0..3 {
            let sys = verify_tridiagonal(&random_tridiagonal(40, 100 + seed), &singleton_blocks(40)).unwrap();
            let out = szarek_W(&sys, &SzarekParams::default()).unwrap();
            let cert = &out.certificate;
            assert!(cert.contains_v1 && cert.perp_vl);
            assert!(cert.eps2.is_finite());
            assert!(cert.bounds.iter().all(|b| b.passes()), "{:?}", cert.bounds);
            assert!(out.diagnostics.eps1_paper > 0.0);
        }
    }

    #[test]
    fn brute_mode_at_dimension_two() {
        let a = from_real_rows(&[&[0.1, 0.05], &[0.05, -0.1]]);
        let b = from_real_rows(&[&[0.5, 0.1], &[0.1, -0.3]]);
        let eps = 0.3;
        let res = lin_oracle_projection(&a, &b, eps, &LinOracle::Brute { resolution: 64, budget: 100_000 }).unwrap();
        let search = brute_projection_search(&a, &b, eps, 64, 100_000).unwrap();
        assert!(search.certified);
        assert!((res.comm - search.value).abs() < 1e-12);
        // the commuting choice: a spectral projection of B lies in the sandwich
        let eb = eig_hermitian(&b).unwrap();
        let pb = spectral_projection(&eb, &RealSet::open(f64::NEG_INFINITY, 0.0));
        assert!(comm_norm(&pb.matrix, &b) < 1e-12);
        assert!(res.comm <= eps);
    }

    #[test]
    fn heuristic_mode_at_dimension_twelve() {
        let mut rng = Rng::seeded(12);
        let u = rng.unitary(12);
        let da = crate::matcore::from_real_diag(&rng.reals(12, -0.9, 0.9));
        let db = crate::matcore::from_real_diag(&rng.reals(12, -0.9, 0.9));
        let a = symmetrize(&(&u * da * u.adjoint() + rng.hermitian(12) * c(0.02, 0.0)));
        let b = symmetrize(&(&u * db * u.adjoint() + rng.hermitian(12) * c(0.02, 0.0)));
        let a = &a / c(op_norm(&a).max(1.0), 0.0);
        let b = &b / c(op_norm(&b).max(1.0), 0.0);
        let out = lin_oracle_projection(&a, &b, 0.5, &LinOracle::default()).unwrap();
        let bound = out.bound.unwrap();
        assert!(bound.passes());
        let (e, g) = sandwich(&a).unwrap();
        assert!(op_norm(&(&e.matrix * &out.p.matrix - &e.matrix)) < 1e-10);
        assert!(op_norm(&(&out.p.matrix * &g.matrix - &out.p.matrix)) < 1e-10);
    }

    #[test]
    fn hastings_trivial_cases() {
        let j = from_real_rows(&[&[0.3, 0.0, 0.0], &[0.0, -0.2, 0.0], &[0.0, 0.0, 0.9]]);
        let sys = verify_tridiagonal(&j, &singleton_blocks(3)).unwrap();
        let cfg = HastingsConfig::for_length(3).unwrap();
        let out = hastings_W(&sys, &cfg, &LinOracle::default()).unwrap();
        assert!(out.certificate.exact && out.certificate.eps2 == 0.0);
        let mut j = random_tridiagonal(5, 3);
        j[(2, 3)] = c(0.0, 0.0);
        j[(3, 2)] = c(0.0, 0.0);
        let id = identity(5);
        let blocks = vec![
            id.columns(0, 3).into_owned(),
            zeros(5, 0),
            id.columns(3, 2).into_owned(),
        ];
        let sys = verify_tridiagonal(&j, &blocks).unwrap();
        let out = hastings_W(&sys, &cfg, &LinOracle::default()).unwrap();
        assert!(out.certificate.exact && out.certificate.eps2 < 1e-12);
    }

    #[test]
    fn hastings_desk_scale_run() {
        let sys = block_tridiagonal(60, 2, 0);
        let cfg = HastingsConfig::for_length(60).unwrap();
        let out = hastings_W(&sys, &cfg, &LinOracle::default()).unwrap();
        let d = &out.diagnostics;
        assert!(d.downgraded.is_none(), "{:?}", d.downgraded);
        let cert = &out.certificate;
        assert!(cert.contains_v1 && cert.perp_vl);
        assert!(d.n_commutators.iter().all(|&v| v <= 1.0 - cfg.chi + 1e-12));
        assert!(d.semi_orthogonality.iter().all(|&v| v <= (1.0 - cfg.chi) / 2.0));
        assert!(d.m_min_eig.iter().all(|&v| v >= d.m_x - 1e-9));
        assert!(d.decay.as_ref().unwrap().ok);
        assert!(cert.eps3 <= d.eps3_ref && cert.eps4 <= d.eps4_ref && cert.eps5 <= d.eps5_ref);
        // energy decomposition of a vector in W: Σ|x_i|² ≤ C₃ l_b |w|²
        let state = out.state.as_ref().unwrap();
        let c3 = d.c3_theory.max(d.c3_measured);
        let u = state.u.column(0).into_owned();
        let w = &state.a * &u;
        assert!(u.norm_squared() <= c3 * cfg.l_b as f64 * w.norm_squared() + 1e-12);
    }

    #[test]
    fn decoupled_superblocks_have_no_cross_coefficients() {
        // block diagonal in pairs so that the expansion never crosses superblocks
        let sys = block_tridiagonal(60, 1, 4);
        let cfg = HastingsConfig::for_length(60).unwrap();
        let out = hastings_W(&sys, &cfg, &LinOracle::default()).unwrap();
        if let Some(fit) = &out.diagnostics.decay {
            for &(i, j, v) in &fit.coefficients {
                if i.abs_diff(j) > 1 {
                    assert!(v <= fit.c1 * fit.alpha.powi(i.abs_diff(j) as i32) + 1e-12);
                }
            }
        }
    }
}
