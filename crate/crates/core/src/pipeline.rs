//! End-to-end constructions of commuting pairs near almost commuting inputs:
//! the Hermitian pair pipeline, the cheap eigenvalue-merging construction,
//! three Hermitians, a Hermitian and a unitary, and unitary pairs with a gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::matcore::{
    c, comm_norm, complement_basis, eig_hermitian, eig_normal, hermitian_defect, identity, is_hermitian,
    op_norm, pinch_bases, select_columns, symmetrize, unitarity_defect, zeros, ComplexMatrix, HermitianEig,
    C64,
};
use crate::smoothing::{finite_range, finite_range_normal, Profile};
use crate::subspace::{
    hastings_W, szarek_W, verify_tridiagonal, CertificateSummary, HastingsConfig, LinOracle, SzarekParams,
    TridiagonalSystem,
};

/// Smallest Δ used when the commutator vanishes.
const DELTA_MIN: f64 = 1e-12;

/// Exponents of the reduction: Δ = δ^{γ0}, n_cut = ⌈Δ^{−γ1}⌉, distances ~ δ^γ.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Exponents {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma: f64,
    pub gamma2: f64,
}

/// Balances the three error terms. Without the finite-range step only two
/// terms remain and γ0 = 1.
pub fn choose_exponents(gamma2: f64, finite_range_needed: bool) -> Result<Exponents> {
    if !(gamma2 > 0.0) || !gamma2.is_finite() {
        return Err(Error::InvalidInput(format!("γ2 must be positive, got {gamma2}")));
    }
    let gamma1 = gamma2 / (1.0 + gamma2);
    Ok(if finite_range_needed {
        Exponents {
            gamma0: 1.0 / (1.0 + gamma1),
            gamma1,
            gamma: gamma2 / (1.0 + 2.0 * gamma2),
            gamma2,
        }
    } else {
        Exponents {
            gamma0: 1.0,
            gamma1,
            gamma: gamma2 / (1.0 + gamma2),
            gamma2,
        }
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Szarek,
    Hastings,
    /// Szarek when the smallest nonempty block has dimension ≤ the threshold.
    Auto,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub gamma2: f64,
    pub engine: EngineChoice,
    pub auto_threshold: usize,
    pub oracle: LinOracle,
    pub szarek: SzarekParams,
    /// Averaging profile of the finite-range step.
    pub profile: Profile,
    /// Skip the finite-range step (A must already have finite range Δ).
    pub finite_range: bool,
    pub n_cut_max: usize,
    /// Relative tolerance for distinct eigenvalues in the cheap construction.
    pub cluster_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gamma2: 0.5,
            engine: EngineChoice::Auto,
            auto_threshold: 4,
            oracle: LinOracle::default(),
            szarek: SzarekParams::default(),
            profile: Profile::poly3(),
            finite_range: true,
            n_cut_max: 64,
            cluster_tol: 1e-8,
        }
    }
}

/// Serializable echo of a configuration.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub gamma2: f64,
    pub engine: EngineChoice,
    pub auto_threshold: usize,
    pub oracle: String,
    pub szarek: SzarekParams,
    pub profile: String,
    pub finite_range: bool,
    pub n_cut_max: usize,
    pub cluster_tol: f64,
}

impl PipelineConfig {
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            gamma2: self.gamma2,
            engine: self.engine,
            auto_threshold: self.auto_threshold,
            oracle: match &self.oracle {
                LinOracle::Heuristic { sweeps } => format!("heuristic(sweeps={sweeps})"),
                LinOracle::Brute { resolution, budget } => format!("brute(resolution={resolution}, budget={budget})"),
                LinOracle::Given { a, .. } => format!("given(dim={})", a.nrows()),
            },
            szarek: self.szarek,
            profile: format!("{:?}", self.profile.shape),
            finite_range: self.finite_range,
            n_cut_max: self.n_cut_max,
            cluster_tol: self.cluster_tol,
        }
    }
}

/// What happened on one spectral interval (or arc).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntervalLog {
    pub index: usize,
    pub dim: usize,
    /// Blocks after merging runs of empty sub-intervals.
    pub blocks: usize,
    pub engine: String,
    pub certificate: Option<CertificateSummary>,
    /// ‖P_{W⊥} J P_W‖ for the unscaled compression J.
    pub eps2: f64,
    /// Factor the compression was divided by to make it a contraction.
    pub j_scale: f64,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageLog {
    pub delta: f64,
    pub exponents: Option<Exponents>,
    /// Finite-range distance Δ.
    pub big_delta: f64,
    pub n_cut: usize,
    pub sub_intervals: usize,
    pub finite_range_c0: f64,
    pub finite_range_c1: f64,
    pub h_norm: f64,
    pub a_to_h: f64,
    /// ‖B̃*B̃ − I‖ for the assembled new basis.
    pub basis_defect: f64,
    pub intervals: Vec<IntervalLog>,
    pub bounds: Vec<BoundCheck>,
    pub notes: Vec<String>,
}

/// Commuting outputs, their distances to the inputs and a stage log.
#[derive(Clone, Debug)]
pub struct CommuteReport {
    pub a_prime: ComplexMatrix,
    pub b_prime: ComplexMatrix,
    pub c_prime: Option<ComplexMatrix>,
    pub dist_a: f64,
    pub dist_b: f64,
    pub dist_c: Option<f64>,
    /// Largest pairwise commutator norm of the outputs.
    pub comm_residual: f64,
    pub log: StageLog,
}

/// The report without matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportSummary {
    pub dim: usize,
    pub dist_a: f64,
    pub dist_b: f64,
    pub dist_c: Option<f64>,
    pub comm_residual: f64,
    pub log: StageLog,
}

impl CommuteReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            dim: self.a_prime.nrows(),
            dist_a: self.dist_a,
            dist_b: self.dist_b,
            dist_c: self.dist_c,
            comm_residual: self.comm_residual,
            log: self.log.clone(),
        }
    }

    /// All recorded bounds hold.
    pub fn bounds_pass(&self) -> bool {
        self.log.bounds.iter().all(|b| b.passes())
    }
}

fn require_contraction(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimMismatch(format!("{what} must be square")));
    }
    if !crate::matcore::is_finite(m) {
        return Err(Error::NonFinite(what.into()));
    }
    if !is_hermitian(m, 1e-10) {
        return Err(Error::NotHermitian(hermitian_defect(m)));
    }
    let nm = op_norm(m);
    if nm > 1.0 + 1e-10 {
        return Err(Error::Hypothesis(format!("‖{what}‖ = {nm:.6} exceeds 1")));
    }
    Ok(())
}

fn require_unitary(u: &ComplexMatrix, what: &str) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimMismatch(format!("{what} must be square")));
    }
    let d = unitarity_defect(u);
    if d > 1e-10 {
        return Err(Error::NotUnitary(d));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The new-basis core shared by the interval and arc pipelines

/// One spectral window: an ambient basis ordered along the window and the
/// sub-window index of each column.
struct Window {
    basis: ComplexMatrix,
    sub: Vec<u64>,
    sub_count: u64,
}

/// Local block system of a window, with runs of empty sub-windows merged.
fn window_blocks(w: &Window) -> Vec<ComplexMatrix> {
    let d = w.basis.ncols();
    let id = identity(d);
    let mut blocks = Vec::new();
    let mut k = 0;
    let mut prev: Option<u64> = None;
    while k < d {
        let s = w.sub[k];
        let gap = match prev {
            None => s > 0,
            Some(p) => s > p + 1,
        };
        if gap {
            blocks.push(zeros(d, 0));
        }
        let start = k;
        while k < d && w.sub[k] == s {
            k += 1;
        }
        blocks.push(id.columns(start, k - start).into_owned());
        prev = Some(s);
    }
    match prev {
        None => {
            blocks.push(zeros(d, 0));
            blocks.push(zeros(d, 0));
        }
        Some(p) if p + 1 < w.sub_count => blocks.push(zeros(d, 0)),
        _ => {}
    }
    if blocks.len() == 1 {
        // a single occupied sub-window is both V₁ and V_L
        blocks.push(zeros(d, 0));
    }
    blocks
}

fn run_engine(sys: &TridiagonalSystem, cfg: &PipelineConfig, log: &mut IntervalLog) -> Result<ComplexMatrix> {
    let min_block = sys.blocks.iter().map(|b| b.ncols()).filter(|&k| k > 0).min().unwrap_or(0);
    let use_hastings = match cfg.engine {
        EngineChoice::Szarek => false,
        EngineChoice::Hastings => true,
        EngineChoice::Auto => min_block > cfg.auto_threshold,
    };
    if use_hastings {
        match HastingsConfig::for_length(sys.len()) {
            Ok(hc) => {
                let out = hastings_W(sys, &hc, &cfg.oracle)?;
                log.engine = if out.diagnostics.downgraded.is_some() { "szarek (downgraded)" } else { "hastings" }.into();
                log.flags.extend(out.flags);
                log.certificate = Some(out.certificate.summary());
                return Ok(out.certificate.w);
            }
            Err(e) => log.flags.push(format!("hastings configuration unavailable ({e}), using szarek")),
        }
    }
    let out = szarek_W(sys, &cfg.szarek)?;
    log.engine = if out.diagnostics.trivial { "trivial" } else { "szarek" }.into();
    log.certificate = Some(out.certificate.summary());
    Ok(out.certificate.w)
}

struct CoreOutput {
    h_prime: ComplexMatrix,
    b_prime: ComplexMatrix,
    intervals: Vec<IntervalLog>,
    basis_defect: f64,
}

/// Builds W_k in every window and pinches H along W_{k−1}^⊥ ⊕ W_k, assigning
/// `values[j]` to the j-th new block.
fn new_basis(
    h: &ComplexMatrix,
    windows: &[Window],
    cyclic: bool,
    values: &[C64],
    cfg: &PipelineConfig,
) -> Result<CoreOutput> {
    let n = h.nrows();
    let results: Vec<Result<(ComplexMatrix, IntervalLog)>> = windows
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let d = w.basis.ncols();
            let mut log = IntervalLog {
                index: k,
                dim: d,
                blocks: 0,
                engine: "empty".into(),
                certificate: None,
                eps2: 0.0,
                j_scale: 1.0,
                flags: Vec::new(),
            };
            if d == 0 {
                return Ok((zeros(n, 0), log));
            }
            let j = symmetrize(&(w.basis.adjoint() * h * &w.basis));
            let scale = op_norm(&j).max(1.0);
            log.j_scale = scale;
            let js = &j / c(scale, 0.0);
            let blocks = window_blocks(w);
            log.blocks = blocks.len();
            let sys = verify_tridiagonal(&js, &blocks).map_err(|e| Error::stage(&format!("interval {k}"), e.to_string()))?;
            let wl = run_engine(&sys, cfg, &mut log).map_err(|e| Error::stage(&format!("interval {k}"), e.to_string()))?;
            let wl = crate::matcore::orthonormalize(&wl, 1e-6);
            log.eps2 = if wl.ncols() == 0 {
                0.0
            } else {
                op_norm(&(&j * &wl - &wl * (wl.adjoint() * &j * &wl)))
            };
            Ok((wl, log))
        })
        .collect();
    let mut ws = Vec::with_capacity(windows.len());
    let mut logs = Vec::with_capacity(windows.len());
    for r in results {
        let (wl, log) = r?;
        ws.push(wl);
        logs.push(log);
    }
    let m = windows.len();
    let ambient_w: Vec<ComplexMatrix> = windows
        .iter()
        .zip(&ws)
        .map(|(win, wl)| if wl.ncols() == 0 { zeros(n, 0) } else { &win.basis * wl })
        .collect();
    let ambient_wc: Vec<ComplexMatrix> = windows
        .iter()
        .zip(&ws)
        .map(|(win, wl)| {
            let d = win.basis.ncols();
            if d == 0 {
                return zeros(n, 0);
            }
            let wc = complement_basis(&if wl.ncols() == 0 { zeros(d, 0) } else { wl.clone() });
            if wc.ncols() == 0 {
                zeros(n, 0)
            } else {
                &win.basis * wc
            }
        })
        .collect();
    let count = if cyclic { m } else { m + 1 };
    if values.len() != count {
        return Err(Error::InvalidInput("one value per new block is required".into()));
    }
    let mut new_blocks = Vec::with_capacity(count);
    for j in 0..count {
        let mut parts: Vec<&ComplexMatrix> = Vec::new();
        let prev = if cyclic { Some((j + m - 1) % m) } else { j.checked_sub(1) };
        if let Some(p) = prev {
            if ambient_wc[p].ncols() > 0 {
                parts.push(&ambient_wc[p]);
            }
        }
        if j < m && ambient_w[j].ncols() > 0 {
            parts.push(&ambient_w[j]);
        }
        new_blocks.push(if parts.is_empty() { zeros(n, 0) } else { crate::matcore::hcat(&parts) });
    }
    let nonempty: Vec<&ComplexMatrix> = new_blocks.iter().filter(|b| b.ncols() > 0).collect();
    let assembled = crate::matcore::hcat(&nonempty);
    let basis_defect = op_norm(&(assembled.adjoint() * &assembled - identity(assembled.ncols())))
        .max(n.abs_diff(assembled.ncols()) as f64);
    let h_prime = symmetrize(&pinch_bases(h, new_blocks.iter()));
    let mut b_prime = zeros(n, n);
    for (blk, &v) in new_blocks.iter().zip(values) {
        if blk.ncols() > 0 {
            b_prime += blk * blk.adjoint() * v;
        }
    }
    Ok(CoreOutput {
        h_prime,
        b_prime,
        intervals: logs,
        basis_defect,
    })
}

fn exponents_and_delta(delta: f64, cfg: &PipelineConfig) -> Result<(Exponents, f64)> {
    let ex = choose_exponents(cfg.gamma2, cfg.finite_range)?;
    let big = delta.powf(ex.gamma0).clamp(DELTA_MIN, 1.0);
    Ok((ex, big))
}

// ---------------------------------------------------------------------------
// Hermitian pairs

/// Interval index of x for n_cut half-open intervals of [−1, 1], the last closed.
pub fn interval_index(x: f64, n_cut: usize) -> usize {
    let w = 2.0 / n_cut as f64;
    (((x + 1.0) / w).floor().max(0.0) as usize).min(n_cut - 1)
}

/// Commuting Hermitian A′, B′ near Hermitian contractions A, B.
pub fn commute_hermitian_pair(a: &ComplexMatrix, b: &ComplexMatrix, cfg: &PipelineConfig) -> Result<CommuteReport> {
    require_contraction(a, "A")?;
    require_contraction(b, "B")?;
    if a.shape() != b.shape() {
        return Err(Error::DimMismatch("A and B".into()));
    }
    let n = a.nrows();
    let delta = comm_norm(a, b);
    let (ex, big_delta) = exponents_and_delta(delta, cfg)?;
    let mut log = StageLog {
        delta,
        exponents: Some(ex),
        big_delta,
        ..Default::default()
    };
    let h = if cfg.finite_range {
        let fr = finite_range(a, b, big_delta, &cfg.profile)?;
        log.finite_range_c0 = fr.c0;
        log.finite_range_c1 = fr.c1;
        log.bounds.push(fr.distance.clone());
        log.bounds.extend(fr.commutators.iter().cloned());
        fr.h
    } else {
        a.clone()
    };
    log.h_norm = op_norm(&h);
    log.a_to_h = op_norm(&(a - &h));
    let raw_cut = (1.0 / big_delta.powf(ex.gamma1)).ceil();
    let max_cut = ((1.0 / big_delta).floor() as usize).max(1);
    let n_cut = (raw_cut as usize).clamp(1, cfg.n_cut_max.min(max_cut));
    if (n_cut as f64) < raw_cut {
        log.notes.push(format!("n_cut clamped from {raw_cut} to {n_cut}"));
    }
    let width = 2.0 / n_cut as f64;
    let sub_count = ((width / big_delta).floor() as u64).max(2);
    let sub_len = width / sub_count as f64;
    log.n_cut = n_cut;
    log.sub_intervals = sub_count as usize;
    let eb = eig_hermitian(b)?;
    let mut windows: Vec<Window> = Vec::with_capacity(n_cut);
    for k in 0..n_cut {
        let idx: Vec<usize> = (0..n).filter(|&i| interval_index(eb.values[i], n_cut) == k).collect();
        let left = -1.0 + k as f64 * width;
        let sub = idx
            .iter()
            .map(|&i| (((eb.values[i] - left) / sub_len).floor().max(0.0) as u64).min(sub_count - 1))
            .collect();
        windows.push(Window {
            basis: select_columns(&eb.vectors, &idx),
            sub,
            sub_count,
        });
    }
    let values: Vec<C64> = (0..=n_cut)
        .map(|j| c(if j == n_cut { 1.0 } else { -1.0 + j as f64 * width }, 0.0))
        .collect();
    let core = new_basis(&h, &windows, false, &values, cfg)?;
    let eps2_max = core.intervals.iter().map(|l| l.eps2).fold(0.0, f64::max);
    log.intervals = core.intervals;
    log.basis_defect = core.basis_defect;
    let dist_a = op_norm(&(a - &core.h_prime));
    let dist_b = op_norm(&(b - &core.b_prime));
    let h_to_hp = op_norm(&(&h - &core.h_prime));
    log.bounds.push(BoundCheck::new(dist_b, width + 1e-10, "‖B − B′‖ ≤ 2/n_cut"));
    log.bounds.push(BoundCheck::new(h_to_hp, 2.0 * eps2_max + 1e-10, "‖H − H′‖ ≤ 2·max eps2"));
    log.bounds.push(BoundCheck::new(dist_a, log.a_to_h + 2.0 * eps2_max + 1e-10, "‖A − A′‖ ≤ ‖A − H‖ + 2·max eps2"));
    let comm_residual = comm_norm(&core.h_prime, &core.b_prime);
    Ok(CommuteReport {
        a_prime: core.h_prime,
        b_prime: symmetrize(&core.b_prime),
        c_prime: None,
        dist_a,
        dist_b,
        dist_c: None,
        comm_residual,
        log,
    })
}

// ---------------------------------------------------------------------------
// Few eigenvalues

/// Groups of A's eigenvalue indices after tiling by length √2·δ^{1/2} and
/// merging neighbouring occupied tiles, with the midpoints of the merged tiles.
fn merged_groups(e: &HermitianEig, delta: f64, rel_tol: f64) -> (Vec<Vec<usize>>, Vec<f64>, usize) {
    let n = e.dim();
    let tol = rel_tol * e.norm.max(1.0);
    let clusters = crate::matcore::cluster_ranges(&e.values, tol);
    let m = clusters.len();
    let tile = std::f64::consts::SQRT_2 * delta.sqrt();
    if n == 0 {
        return (Vec::new(), Vec::new(), 0);
    }
    if tile <= tol {
        let groups: Vec<Vec<usize>> = clusters.iter().map(|r| r.clone().collect()).collect();
        let mids = clusters
            .iter()
            .map(|r| (e.values[r.start] + e.values[r.end - 1]) / 2.0)
            .collect();
        return (groups, mids, m);
    }
    let base = e.values[0];
    let tile_of = |x: f64| ((x - base) / tile).floor() as i64;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut mids = Vec::new();
    let mut first_tile = tile_of(e.values[0]);
    let mut last_tile = first_tile;
    let mut cur: Vec<usize> = Vec::new();
    for i in 0..n {
        let t = tile_of(e.values[i]);
        if !cur.is_empty() && t > last_tile + 1 {
            groups.push(std::mem::take(&mut cur));
            mids.push(base + tile * ((first_tile + last_tile + 1) as f64) / 2.0);
            first_tile = t;
        }
        cur.push(i);
        last_tile = t;
    }
    groups.push(cur);
    mids.push(base + tile * ((first_tile + last_tile + 1) as f64) / 2.0);
    (groups, mids, m)
}

/// Merges close eigenvalues of A and drops the blocks of B between merged groups.
pub fn cheap_commute(a: &ComplexMatrix, b: &ComplexMatrix, cfg: &PipelineConfig) -> Result<CommuteReport> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimMismatch("cheap_commute".into()));
    }
    if !is_hermitian(a, 1e-10) {
        return Err(Error::NotHermitian(hermitian_defect(a)));
    }
    let n = a.nrows();
    let delta = comm_norm(a, b);
    let ea = eig_hermitian(a)?;
    let (groups, mids, m) = merged_groups(&ea, delta, cfg.cluster_tol);
    let mut a_prime = zeros(n, n);
    let mut b_prime = zeros(n, n);
    for (g, &mid) in groups.iter().zip(&mids) {
        let v = select_columns(&ea.vectors, g);
        a_prime += &v * v.adjoint() * c(mid, 0.0);
        b_prime += &v * (v.adjoint() * b * &v) * v.adjoint();
    }
    let a_prime = symmetrize(&a_prime);
    let dist_a = op_norm(&(a - &a_prime));
    let dist_b = op_norm(&(b - &b_prime));
    let bound = m as f64 / std::f64::consts::SQRT_2 * delta.sqrt();
    let ps = ((m.saturating_sub(1)) as f64 / 2.0 * delta).sqrt();
    let log = StageLog {
        delta,
        bounds: vec![
            BoundCheck::new(dist_a, bound + 1e-10, "‖A − A′‖ ≤ (m/√2)δ^{1/2}"),
            BoundCheck::new(dist_b, bound + 1e-10, "‖B − B′‖ ≤ (m/√2)δ^{1/2}"),
        ],
        notes: vec![
            format!("distinct eigenvalues m = {m}, merged groups = {}", groups.len()),
            format!("reference ((m−1)/2·δ)^{{1/2}} = {ps:.6e}"),
        ],
        ..Default::default()
    };
    let comm_residual = comm_norm(&a_prime, &b_prime);
    Ok(CommuteReport {
        a_prime,
        b_prime,
        c_prime: None,
        dist_a,
        dist_b,
        dist_c: None,
        comm_residual,
        log,
    })
}

/// Merged blocks of A, then the pair pipeline on the compressions of B and C.
pub fn three_hermitian(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    cm: &ComplexMatrix,
    cfg: &PipelineConfig,
) -> Result<CommuteReport> {
    for (m, name) in [(a, "A"), (b, "B"), (cm, "C")] {
        require_contraction(m, name)?;
    }
    if a.shape() != b.shape() || a.shape() != cm.shape() {
        return Err(Error::DimMismatch("three_hermitian".into()));
    }
    let n = a.nrows();
    let dab = comm_norm(a, b);
    let dac = comm_norm(a, cm);
    let delta = dab.max(dac);
    let ea = eig_hermitian(a)?;
    let (groups, mids, m) = merged_groups(&ea, delta, cfg.cluster_tol);
    let mut a_prime = zeros(n, n);
    let mut b_prime = zeros(n, n);
    let mut c_prime = zeros(n, n);
    let mut log = StageLog {
        delta,
        ..Default::default()
    };
    log.notes.push(format!(
        "distinct eigenvalues m = {m}; m·max(‖[A,B]‖, ‖[A,C]‖) = {:.3e}; ‖[B,C]‖ = {:.3e}",
        m as f64 * delta,
        comm_norm(b, cm)
    ));
    for (k, (g, &mid)) in groups.iter().zip(&mids).enumerate() {
        let v = select_columns(&ea.vectors, g);
        a_prime += &v * v.adjoint() * c(mid, 0.0);
        let bk = symmetrize(&(v.adjoint() * b * &v));
        let ck = symmetrize(&(v.adjoint() * cm * &v));
        let rep = commute_hermitian_pair(&bk, &ck, cfg).map_err(|e| Error::stage(&format!("block {k}"), e.to_string()))?;
        b_prime += &v * &rep.a_prime * v.adjoint();
        c_prime += &v * &rep.b_prime * v.adjoint();
        log.intervals.extend(rep.log.intervals.into_iter().map(|mut l| {
            l.flags.push(format!("A-block {k}"));
            l
        }));
        log.bounds.extend(rep.log.bounds);
    }
    let a_prime = symmetrize(&a_prime);
    let b_prime = symmetrize(&b_prime);
    let c_prime = symmetrize(&c_prime);
    let comm_residual = comm_norm(&a_prime, &b_prime)
        .max(comm_norm(&a_prime, &c_prime))
        .max(comm_norm(&b_prime, &c_prime));
    Ok(CommuteReport {
        dist_a: op_norm(&(a - &a_prime)),
        dist_b: op_norm(&(b - &b_prime)),
        dist_c: Some(op_norm(&(cm - &c_prime))),
        a_prime,
        b_prime,
        c_prime: Some(c_prime),
        comm_residual,
        log,
    })
}

// ---------------------------------------------------------------------------
// Unitaries

fn phase(z: C64) -> f64 {
    let p = z.arg();
    if p < 0.0 {
        p + std::f64::consts::TAU
    } else {
        p
    }
}

/// Commuting Hermitian A′ and unitary U′ near A and U, with arcs of the
/// circle in place of intervals and cyclic block indexing.
pub fn commute_hermitian_unitary(a: &ComplexMatrix, u: &ComplexMatrix, cfg: &PipelineConfig) -> Result<CommuteReport> {
    require_contraction(a, "A")?;
    require_unitary(u, "U")?;
    if a.shape() != u.shape() {
        return Err(Error::DimMismatch("A and U".into()));
    }
    let n = a.nrows();
    let delta = comm_norm(a, u);
    let (ex, big_delta) = exponents_and_delta(delta, cfg)?;
    let mut log = StageLog {
        delta,
        exponents: Some(ex),
        big_delta,
        ..Default::default()
    };
    let h = if cfg.finite_range {
        let fr = finite_range_normal(a, u, big_delta, &cfg.profile)?;
        log.finite_range_c0 = fr.c0;
        log.finite_range_c1 = fr.c1;
        log.bounds.push(fr.distance.clone());
        log.bounds.extend(fr.commutators.iter().cloned());
        fr.h
    } else {
        a.clone()
    };
    log.h_norm = op_norm(&h);
    log.a_to_h = op_norm(&(a - &h));
    // sub-arcs of angle θ have non-adjacent chords ≥ √2Δ
    let theta = 2.0 * (std::f64::consts::SQRT_2 * big_delta / 2.0).min(1.0).asin();
    let raw_cut = (1.0 / big_delta.powf(ex.gamma1) / std::f64::consts::TAU).ceil().max(2.0);
    let max_cut = ((std::f64::consts::PI / theta).floor() as usize).max(2);
    let n_cut = (raw_cut as usize).clamp(2, cfg.n_cut_max.max(2).min(max_cut));
    if (n_cut as f64) < raw_cut {
        log.notes.push(format!("n_cut clamped from {raw_cut} to {n_cut}"));
    }
    let width = std::f64::consts::TAU / n_cut as f64;
    let sub_count = ((width / theta).floor() as u64).max(2);
    let sub_len = width / sub_count as f64;
    log.n_cut = n_cut;
    log.sub_intervals = sub_count as usize;
    let eu = eig_normal(u)?;
    let phases: Vec<f64> = eu.values.iter().map(|&z| phase(z)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| phases[i].total_cmp(&phases[j]));
    let mut windows = Vec::with_capacity(n_cut);
    for k in 0..n_cut {
        let idx: Vec<usize> = order
            .iter()
            .cloned()
            .filter(|&i| ((phases[i] / width).floor() as usize).min(n_cut - 1) == k)
            .collect();
        let left = k as f64 * width;
        let sub = idx
            .iter()
            .map(|&i| (((phases[i] - left) / sub_len).floor().max(0.0) as u64).min(sub_count - 1))
            .collect();
        windows.push(Window {
            basis: select_columns(&eu.vectors, &idx),
            sub,
            sub_count,
        });
    }
    // the new block j straddles arcs j−1 and j; its value is the centre of that union
    let values: Vec<C64> = (0..n_cut).map(|j| C64::from_polar(1.0, j as f64 * width)).collect();
    let core = new_basis(&h, &windows, true, &values, cfg)?;
    let eps2_max = core.intervals.iter().map(|l| l.eps2).fold(0.0, f64::max);
    log.intervals = core.intervals;
    log.basis_defect = core.basis_defect;
    let dist_a = op_norm(&(a - &core.h_prime));
    let dist_b = op_norm(&(u - &core.b_prime));
    let h_to_hp = op_norm(&(&h - &core.h_prime));
    let arc_bound = (C64::from_polar(1.0, width) - c(1.0, 0.0)).norm();
    log.bounds.push(BoundCheck::new(dist_b, arc_bound + 1e-10, "‖U − U′‖ ≤ |1 − e^{2πi/n_cut}|"));
    log.bounds.push(BoundCheck::new(h_to_hp, 2.0 * eps2_max + 1e-10, "‖H − H′‖ ≤ 2·max eps2"));
    log.bounds.push(BoundCheck::new(dist_a, log.a_to_h + 2.0 * eps2_max + 1e-10, "‖A − A′‖ ≤ ‖A − H‖ + 2·max eps2"));
    let comm_residual = comm_norm(&core.h_prime, &core.b_prime);
    Ok(CommuteReport {
        a_prime: core.h_prime,
        b_prime: core.b_prime,
        c_prime: None,
        dist_a,
        dist_b,
        dist_c: None,
        comm_residual,
        log,
    })
}

/// f(x) = (x − i)/(x + i), mapping the line onto the circle minus 1.
pub fn cayley_f(x: f64) -> C64 {
    (c(x, 0.0) - c(0.0, 1.0)) / (c(x, 0.0) + c(0.0, 1.0))
}

/// g(z) = i(1 + z)/(1 − z), the inverse of f on the circle minus 1.
pub fn cayley_g(z: C64) -> f64 {
    (c(0.0, 1.0) * (c(1.0, 0.0) + z) / (c(1.0, 0.0) - z)).re
}

/// Largest arc free of eigenvalues: (angular radius θ, centre phase ψ).
pub fn spectral_gap(v: &ComplexMatrix) -> Result<(f64, f64)> {
    let ev = eig_normal(v)?;
    let mut ph: Vec<f64> = ev.values.iter().map(|&z| phase(z)).collect();
    ph.sort_by(|a, b| a.total_cmp(b));
    if ph.is_empty() {
        return Ok((std::f64::consts::PI, 0.0));
    }
    let mut best = (ph[0] + std::f64::consts::TAU - ph[ph.len() - 1], ph[ph.len() - 1]);
    for w in ph.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    Ok((best.0 / 2.0, best.1 + best.0 / 2.0))
}

fn normal_function(e: &crate::matcore::NormalEig, f: impl Fn(C64) -> C64) -> ComplexMatrix {
    let mut scaled = e.vectors.clone();
    for j in 0..e.values.len() {
        let fj = f(e.values[j]);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * e.vectors.adjoint()
}

/// Commuting unitaries near U and V when V has a spectral gap, through the
/// Hermitian W = g(V) and the Hermitian–unitary pipeline.
pub fn unitary_pair_gap(u: &ComplexMatrix, v: &ComplexMatrix, cfg: &PipelineConfig) -> Result<CommuteReport> {
    require_unitary(u, "U")?;
    require_unitary(v, "V")?;
    if u.shape() != v.shape() {
        return Err(Error::DimMismatch("U and V".into()));
    }
    let n = u.nrows();
    let (theta, psi) = spectral_gap(v)?;
    if theta < 1e-6 {
        return Err(Error::Hypothesis("V has no detectable spectral gap".into()));
    }
    let rot = C64::from_polar(1.0, -psi);
    let vr = v * rot;
    let ev = eig_normal(&vr)?;
    let w = symmetrize(&normal_function(&ev, |z| c(cayley_g(z), 0.0)));
    let delta = comm_norm(u, v);
    let uw = comm_norm(u, &w);
    let gap_check = BoundCheck::new(uw, delta / (1.0 - theta.cos()) + 1e-10, "‖[U,W]‖ ≤ ‖[U,V]‖/(1 − cos θ)");
    let scale = op_norm(&w).max(1.0);
    let ws = &w / c(scale, 0.0);
    let inner = commute_hermitian_unitary(&ws, u, cfg)?;
    let w_prime = &inner.a_prime * c(scale, 0.0);
    let ewp = eig_hermitian(&w_prime)?;
    let vp = crate::matcore::apply_function(&ewp, cayley_f) * C64::from_polar(1.0, psi);
    let dist_v = op_norm(&(v - &vp));
    let dist_w = op_norm(&(&w - &w_prime));
    let mut log = inner.log;
    log.bounds.push(gap_check);
    log.bounds.push(BoundCheck::new(dist_v, 2.0 * dist_w + 1e-10, "‖V − V′‖ ≤ 2‖W − W′‖"));
    log.notes.push(format!("gap radius θ = {theta:.6}, rotation ψ = {psi:.6}, ‖W‖ = {scale:.6}"));
    let u_prime = inner.b_prime;
    let comm_residual = comm_norm(&u_prime, &vp);
    let _ = n;
    Ok(CommuteReport {
        dist_a: op_norm(&(u - &u_prime)),
        dist_b: dist_v,
        a_prime: u_prime,
        b_prime: vp,
        c_prime: None,
        dist_c: None,
        comm_residual,
        log,
    })
}

// ---------------------------------------------------------------------------
// δ-sweeps

/// One row of a δ-sweep.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub dist_a: f64,
    pub dist_b: f64,
    pub eps2_max: f64,
    pub n_cut: usize,
    pub comm_residual: f64,
}

/// Runs the pair pipeline on A0 + tE and B0 with t chosen so that the
/// commutator norm equals each requested δ. The base pair must commute.
pub fn delta_sweep(
    a0: &ComplexMatrix,
    b0: &ComplexMatrix,
    direction: &ComplexMatrix,
    deltas: &[f64],
    cfg: &PipelineConfig,
) -> Result<Vec<SweepRow>> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("empty δ list".into()));
    }
    let base = comm_norm(a0, b0);
    if base > 1e-10 {
        return Err(Error::NotCommuting(base));
    }
    let e = symmetrize(direction);
    let slope = comm_norm(&e, b0);
    if slope <= 1e-14 {
        return Err(Error::InvalidInput("the direction commutes with B0".into()));
    }
    deltas
        .iter()
        .map(|&d| {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::InvalidInput(format!("δ = {d}")));
            }
            let a = symmetrize(&(a0 + &e * c(d / slope, 0.0)));
            let nm = op_norm(&a);
            if nm > 1.0 {
                return Err(Error::Hypothesis(format!("‖A0 + tE‖ = {nm:.4} exceeds 1 at δ = {d}")));
            }
            let rep = commute_hermitian_pair(&a, b0, cfg)?;
            Ok(SweepRow {
                delta: rep.log.delta,
                dist_a: rep.dist_a,
                dist_b: rep.dist_b,
                eps2_max: rep.log.intervals.iter().map(|l| l.eps2).fold(0.0, f64::max),
                n_cut: rep.log.n_cut,
                comm_residual: rep.comm_residual,
            })
        })
        .collect()
}

/// A commuting base pair sharing a random eigenbasis, with B0 evenly spread
/// over [−1, 1], and a perturbation direction of norm 1/2.
pub fn sweep_family(dim: usize, seed: u64) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let mut rng = crate::random::Rng::seeded(seed);
    let v = rng.unitary(dim);
    let a0 = symmetrize(&(&v * crate::matcore::from_real_diag(&rng.reals(dim, -0.5, 0.5)) * v.adjoint()));
    let spread: Vec<f64> = (0..dim)
        .map(|k| if dim == 1 { 0.0 } else { -1.0 + 2.0 * k as f64 / (dim - 1) as f64 })
        .collect();
    let b0 = symmetrize(&(&v * crate::matcore::from_real_diag(&spread) * v.adjoint()));
    let e = rng.hermitian(dim);
    let nm = op_norm(&e).max(1e-300);
    (a0, b0, &e / c(2.0 * nm, 0.0))
}

/// Distances do not grow as δ shrinks (rows taken in order of decreasing δ).
pub fn sweep_trend(rows: &[SweepRow]) -> bool {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|x, y| y.delta.total_cmp(&x.delta));
    sorted
        .windows(2)
        .all(|w| w[1].dist_a <= w[0].dist_a + 1e-12 && w[1].dist_b <= w[0].dist_b + 1e-12)
}
