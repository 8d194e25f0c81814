//! Smooth profiles, their Fourier constants and tails, partitions of unity and
//! the finite-range averaging constructions.
//!
//! Fourier convention: f̂(k) = (1/2π)∫ f(x) e^{−ikx} dx, so that
//! f(x) = ∫ f̂(k) e^{ikx} dk.

use std::f64::consts::{E, PI};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::matcore::{
    c, comm_norm, eig_hermitian, is_hermitian, joint_eig, normality_defect, op_norm,
    hermitian_parts, ComplexMatrix,
};

/// Base smooth step F̄ on [0,1]: F̄(x) = g(1−x)/(g(x)+g(1−x)), g(x) = e^{−1/x}.
pub fn smooth_step_bar(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = g(1.0 - x);
    let b = g(x);
    a / (a + b)
}

/// Normalizing constant of exp(−1/(1−x²)) on [−1,1].
fn bump_norm() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        // composite Simpson on a fine grid; the integrand is flat at the ends
        let n = 200_000;
        let h = 2.0 / n as f64;
        let f = |x: f64| {
            let d = 1.0 - x * x;
            if d <= 0.0 {
                0.0
            } else {
                (-1.0 / d).exp()
            }
        };
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
        }
        s * h / 3.0
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// F^{r,w}_{center}: 1 on the flat part, F̄ on the ramps.
    SmoothStep,
    /// (1 − ((x−center)/w)²)³ on |x−center| ≤ w.
    Poly3,
    /// Normalized bump exp(−1/(1−x²))/Z, unit integral.
    Bump,
    /// Indicator of |x−center| ≤ r.
    Indicator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub shape: Shape,
    /// Flat radius.
    pub r: f64,
    /// Ramp width.
    pub w: f64,
    pub center: f64,
}

impl Profile {
    pub fn smooth_step(r: f64, w: f64, center: f64) -> Self {
        Profile {
            shape: Shape::SmoothStep,
            r,
            w,
            center,
        }
    }

    /// The default averaging profile (1−x²)³ on [−1,1].
    pub fn poly3() -> Self {
        Profile {
            shape: Shape::Poly3,
            r: 0.0,
            w: 1.0,
            center: 0.0,
        }
    }

    pub fn bump() -> Self {
        Profile {
            shape: Shape::Bump,
            r: 0.0,
            w: 1.0,
            center: 0.0,
        }
    }

    pub fn indicator(r: f64) -> Self {
        Profile {
            shape: Shape::Indicator,
            r,
            w: 0.0,
            center: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        match self.shape {
            Shape::SmoothStep => {
                if d <= self.r {
                    1.0
                } else if d >= self.r + self.w {
                    0.0
                } else {
                    smooth_step_bar((d - self.r) / self.w)
                }
            }
            Shape::Poly3 => {
                let t = d / self.w;
                if t >= 1.0 {
                    0.0
                } else {
                    (1.0 - t * t).powi(3)
                }
            }
            Shape::Bump => {
                let t = d / self.w;
                if t >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - t * t)).exp() / (bump_norm() * self.w)
                }
            }
            Shape::Indicator => {
                if d <= self.r {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.r + self.w
    }

    /// Length scale on which the profile varies.
    fn scale(&self) -> f64 {
        if self.w > 0.0 {
            self.w
        } else {
            self.r.max(1e-300)
        }
    }

    /// Fourier data computed at two resolutions.
    pub fn fourier(&self) -> Arc<FourierData> {
        Arc::new(FourierData::compute(self, DEFAULT_K0))
    }
}

/// Frequency cutoff, in units of 1/(ramp width), for the coarse resolution.
pub const DEFAULT_K0: f64 = 2048.0;
const FFT_LEN: usize = 1 << 16;
const MAX_FFT_LEN: usize = 1 << 22;
/// Minimal sampling window, in units of the support radius, for the coarse run.
const SPAN_RADII: f64 = 32.0;
const MIN_SPAN: f64 = 200.0;
const DIVERGENCE_REL: f64 = 1e-3;

/// |f̂| on k ≥ 0 folded from both half-lines, with cumulative tails.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailTable {
    pub label: String,
    pub dk: f64,
    pub kmax: f64,
    /// g(k) = |f̂(k)| + |f̂(−k)| on the grid k_i = i·dk.
    pub density: Vec<f64>,
    /// cum[i] = ∫_{k_i}^{kmax} g.
    pub cum: Vec<f64>,
    pub l1: f64,
    pub c0: f64,
}

impl TailTable {
    fn from_density(label: String, dk: f64, density: Vec<f64>) -> Self {
        let n = density.len();
        let mut cum = vec![0.0; n];
        let mut c0 = 0.0;
        for i in (0..n - 1).rev() {
            cum[i] = cum[i + 1] + 0.5 * dk * (density[i] + density[i + 1]);
            let k0 = i as f64 * dk;
            let k1 = k0 + dk;
            c0 += 0.5 * dk * (k0 * density[i] + k1 * density[i + 1]);
        }
        TailTable {
            label,
            dk,
            kmax: (n - 1) as f64 * dk,
            l1: cum[0],
            density,
            cum,
            c0,
        }
    }

    /// ∫_{|k|≥c} |f̂(k)| dk.
    pub fn tail(&self, c: f64) -> f64 {
        let c = c.abs();
        if c >= self.kmax {
            return 0.0;
        }
        let x = c / self.dk;
        let i = x.floor() as usize;
        if i + 1 >= self.cum.len() {
            return 0.0;
        }
        let t = x - i as f64;
        // exact integral of the linear interpolant from c to k_{i+1}
        let gi = self.density[i];
        let gj = self.density[i + 1];
        let gc = gi + t * (gj - gi);
        let partial = 0.5 * (1.0 - t) * self.dk * (gc + gj);
        self.cum[i + 1] + partial
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FourierData {
    pub profile: Profile,
    pub fine: TailTable,
    pub coarse: TailTable,
    pub c0: f64,
    pub c1: f64,
    pub c0_err: f64,
    pub c1_err: f64,
    pub c0_divergent: bool,
    pub c1_divergent: bool,
}

/// Sampled |f̂| on [0, kmax] with frequency step at most 2π/span.
fn half_line_density(p: &Profile, kmax: f64, span: f64) -> (f64, Vec<f64>) {
    let h = PI / kmax;
    let mut n = FFT_LEN;
    while (n as f64) * h < span && n < MAX_FFT_LEN {
        n *= 2;
    }
    let half = (n / 2) as isize;
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..n)
        .map(|j| {
            let x = (j as isize - half) as f64 * h;
            // centered copy: |f̂| does not depend on the center
            let v = p.eval(x + p.center);
            rustfft::num_complex::Complex::new(v, 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = h / (2.0 * PI);
    let dk = 2.0 * PI / (n as f64 * h);
    let m = n / 2;
    let mut density = Vec::with_capacity(m);
    for i in 0..m {
        let pos = buf[i].norm() * scale;
        let neg = buf[(n - i) % n].norm() * scale;
        density.push(pos + neg);
    }
    (dk, density)
}

impl FourierData {
    pub fn compute(p: &Profile, k0: f64) -> Self {
        let kmax = k0 / p.scale();
        let span = (SPAN_RADII * p.support_radius()).max(MIN_SPAN);
        let (dk_c, dens_c) = half_line_density(p, kmax, span);
        let (dk_f, dens_f) = half_line_density(p, 2.0 * kmax, 2.0 * span);
        let label = format!("{:?}(r={},w={})", p.shape, p.r, p.w);
        let coarse = TailTable::from_density(label.clone(), dk_c, dens_c);
        let fine = TailTable::from_density(label, dk_f, dens_f);
        let c0_err = (fine.c0 - coarse.c0).abs();
        let c1_err = (fine.l1 - coarse.l1).abs();
        FourierData {
            profile: *p,
            c0: fine.c0,
            c1: fine.l1,
            c0_divergent: c0_err > DIVERGENCE_REL * fine.c0.abs().max(1e-300),
            c1_divergent: c1_err > DIVERGENCE_REL * fine.l1.abs().max(1e-300),
            c0_err,
            c1_err,
            fine,
            coarse,
        }
    }

    pub fn tail(&self, c: f64) -> f64 {
        self.fine.tail(c)
    }

    pub fn tail_err(&self, c: f64) -> f64 {
        (self.fine.tail(c) - self.coarse.tail(c)).abs()
    }

    pub fn l1(&self) -> f64 {
        self.fine.l1
    }

    /// CSV rows (threshold, tail, error_estimate).
    pub fn tail_csv(&self, thresholds: &[f64]) -> String {
        let mut s = String::from("threshold,tail,error_estimate\n");
        for &t in thresholds {
            s.push_str(&format!("{},{:.12e},{:.3e}\n", t, self.tail(t), self.tail_err(t)));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProfileConstants {
    pub c0: f64,
    pub c1: f64,
    pub c0_err: f64,
    pub c1_err: f64,
}

/// c0 = ∫|k f̂(k)| dk and c1 = ∫|f̂(k)| dk with refinement error estimates.
pub fn profile_constants(f: &Profile) -> Result<ProfileConstants> {
    let d = cached_fourier(f);
    if d.c0_divergent || d.c1_divergent {
        return Err(Error::Divergent(format!(
            "{:?}: c0 {:.4} -> err {:.2e}, c1 {:.4} -> err {:.2e}",
            f.shape, d.c0, d.c0_err, d.c1, d.c1_err
        )));
    }
    Ok(ProfileConstants {
        c0: d.c0,
        c1: d.c1,
        c0_err: d.c0_err,
        c1_err: d.c1_err,
    })
}

/// Fourier data is computed once per centred profile.
pub fn cached_fourier(f: &Profile) -> Arc<FourierData> {
    type Key = (String, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<FourierData>>>> = OnceLock::new();
    let centered = Profile { center: 0.0, ..*f };
    let key = (format!("{:?}", centered.shape), centered.r.to_bits(), centered.w.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(d) = cache.lock().expect("fourier cache").get(&key) {
        return d.clone();
    }
    let d = centered.fourier();
    cache.lock().expect("fourier cache").entry(key).or_insert(d).clone()
}

/// Constant c₂ of the spectral gap estimate for the bump mollifier.
///
/// The smoothed indicator has derivative made of two shifted copies of the
/// mollifier scaled to half the gap, which gives ‖[E,B]‖ ≤ 4‖ρ̂‖₁‖[A,B]‖/(b−a)
/// with the 1/2π transform convention used here.
pub fn spectral_gap_constant() -> f64 {
    4.0 * cached_fourier(&Profile::bump()).l1()
}

/// Slow-growth functions G(l) and F(L).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub enum Growth {
    /// max(2, log²(2+x))
    LogSquaredMin2,
    /// log²(2+x)
    LogSquared,
    Constant(f64),
}

impl Growth {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Growth::LogSquaredMin2 => (2.0 + x).ln().powi(2).max(2.0),
            Growth::LogSquared => (2.0 + x).ln().powi(2),
            Growth::Constant(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GrowthConfig {
    pub g: Growth,
    pub f: Growth,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            g: Growth::LogSquaredMin2,
            f: Growth::LogSquared,
        }
    }
}

/// S(L) = tail_{F^{0,1}}((L−1)/(e²·n_win)) + ‖F̂^{0,1}‖₁·e^{−(L−1)/2}.
pub fn s_of(l_big: f64, n_win: usize) -> f64 {
    let d = cached_fourier(&Profile::smooth_step(0.0, 1.0, 0.0));
    d.tail((l_big - 1.0) / (E * E * n_win as f64)) + d.l1() * (-(l_big - 1.0) / 2.0).exp()
}

/// T(l) = 2·tail_{F^{1,1}}(G(l)/(10e²)) + 3‖F̂^{1,1}‖₁·e^{−l/5}.
pub fn t_of(l: f64, g: Growth) -> f64 {
    let d = cached_fourier(&Profile::smooth_step(1.0, 1.0, 0.0));
    2.0 * d.tail(g.eval(l) / (10.0 * E * E)) + 3.0 * d.l1() * (-l / 5.0).exp()
}

fn t_err(l: f64, g: Growth) -> f64 {
    let d = cached_fourier(&Profile::smooth_step(1.0, 1.0, 0.0));
    2.0 * d.tail_err(g.eval(l) / (10.0 * E * E)) + 3.0 * d.c1_err
}

fn s_err(l_big: f64, n_win: usize) -> f64 {
    let d = cached_fourier(&Profile::smooth_step(0.0, 1.0, 0.0));
    d.tail_err((l_big - 1.0) / (E * E * n_win as f64)) + d.c1_err
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlowGrowthTables {
    pub growth: GrowthConfig,
    /// (L, n_win, S(L), error)
    pub s: Vec<(f64, usize, f64, f64)>,
    /// (l, T(l), error)
    pub t: Vec<(f64, f64, f64)>,
    /// First grid index from which S is strictly decreasing.
    pub s_monotone_from: Option<usize>,
    pub t_monotone_from: Option<usize>,
}

fn monotone_from(vals: &[f64]) -> Option<usize> {
    if vals.is_empty() {
        return None;
    }
    let mut start = 0;
    for i in 1..vals.len() {
        if vals[i] >= vals[i - 1] {
            start = i;
        }
    }
    if start + 1 >= vals.len() && vals.len() > 1 {
        None
    } else {
        Some(start)
    }
}

/// Tables of S(L) and T(l). n_win for S follows ⌈L/F(L)⌉.
pub fn tail_tables(l_grid: &[f64], big_l_grid: &[f64], growth: GrowthConfig) -> Result<SlowGrowthTables> {
    for &l in l_grid {
        if growth.g.eval(l) < 2.0 {
            return Err(Error::InvalidInput(format!("G({l}) < 2")));
        }
    }
    for p in [Profile::smooth_step(0.0, 1.0, 0.0), Profile::smooth_step(1.0, 1.0, 0.0)] {
        let d = cached_fourier(&p);
        if d.c1_divergent {
            return Err(Error::Divergent(format!("{:?}", p)));
        }
    }
    let s: Vec<(f64, usize, f64, f64)> = big_l_grid
        .iter()
        .map(|&lb| {
            let n_win = ((lb / growth.f.eval(lb)).ceil() as usize).max(2);
            (lb, n_win, s_of(lb, n_win), s_err(lb, n_win))
        })
        .collect();
    let t: Vec<(f64, f64, f64)> = l_grid
        .iter()
        .map(|&l| (l, t_of(l, growth.g), t_err(l, growth.g)))
        .collect();
    let s_vals: Vec<f64> = s.iter().map(|x| x.2).collect();
    let t_vals: Vec<f64> = t.iter().map(|x| x.1).collect();
    Ok(SlowGrowthTables {
        growth,
        s_monotone_from: monotone_from(&s_vals),
        t_monotone_from: monotone_from(&t_vals),
        s,
        t,
    })
}

/// The profiles F^{0,κ}_{ω(i)}, κ = 2/n_win, ω(i) = −1 + κi, i = 0..=n_win.
pub fn partition_of_unity(n_win: usize) -> Result<Vec<Profile>> {
    if n_win < 2 {
        return Err(Error::InvalidInput("n_win must be at least 2".into()));
    }
    let kappa = 2.0 / n_win as f64;
    Ok((0..=n_win)
        .map(|i| Profile::smooth_step(0.0, kappa, -1.0 + kappa * i as f64))
        .collect())
}

/// Output of the finite-range constructions.
#[derive(Clone, Debug)]
pub struct FiniteRange {
    pub h: ComplexMatrix,
    pub delta: f64,
    pub c0: f64,
    pub c1: f64,
    /// ‖A − H‖ against its bound.
    pub distance: BoundCheck,
    /// ‖[H, B_j]‖ (or ‖[H, N]‖) against its bound, one per generator.
    pub commutators: Vec<BoundCheck>,
}

fn check_averaging_profile(f: &Profile) -> Result<()> {
    if (f.eval(0.0) - 1.0).abs() > 1e-14 {
        return Err(Error::InvalidInput("averaging profile must have f(0) = 1".into()));
    }
    if f.support_radius() + f.center.abs() > 1.0 + 1e-14 {
        return Err(Error::InvalidInput("averaging profile must be supported in [-1,1]".into()));
    }
    Ok(())
}

/// Averages A along the flow of B: H_{λμ} = A_{λμ} f((λ−μ)/Δ) in B's eigenbasis.
pub fn finite_range(a: &ComplexMatrix, b: &ComplexMatrix, delta: f64, f: &Profile) -> Result<FiniteRange> {
    let out = finite_range_multi(a, std::slice::from_ref(b), delta, f)?;
    Ok(out)
}

/// Multiplier ∏_j f((λ_j − μ_j)/Δ) in a joint eigenbasis of a commuting family.
pub fn finite_range_multi(
    a: &ComplexMatrix,
    bs: &[ComplexMatrix],
    delta: f64,
    f: &Profile,
) -> Result<FiniteRange> {
    if delta <= 0.0 {
        return Err(Error::InvalidInput("Δ must be positive".into()));
    }
    check_averaging_profile(f)?;
    if !is_hermitian(a, 1e-10) {
        return Err(Error::NotHermitian(crate::matcore::hermitian_defect(a)));
    }
    for b in bs {
        if !is_hermitian(b, 1e-10) {
            return Err(Error::NotHermitian(crate::matcore::hermitian_defect(b)));
        }
    }
    let consts = profile_constants(f)?;
    let (v, vals) = if bs.len() == 1 {
        let e = eig_hermitian(&bs[0])?;
        let vals = e.values.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        (e.vectors, vals)
    } else {
        let je = joint_eig(bs)?;
        (je.vectors, je.values)
    };
    let n = a.nrows();
    let ab = v.adjoint() * a * &v;
    let hb = ComplexMatrix::from_fn(n, n, |i, j| {
        let mut m = 1.0;
        for (x, y) in vals[i].iter().zip(vals[j].iter()) {
            m *= f.eval((x - y) / delta);
        }
        ab[(i, j)] * m
    });
    let h = &v * hb * v.adjoint();
    let h = crate::matcore::symmetrize(&h);
    let m = bs.len() as i32;
    let comms: Vec<f64> = bs.iter().map(|b| comm_norm(a, b)).collect();
    let total: f64 = comms.iter().sum();
    let distance = BoundCheck::new(
        op_norm(&(a - &h)),
        consts.c0 * consts.c1.powi(m - 1) / delta * total,
        "finite_range: ‖A−H‖ ≤ c0·c1^(m−1)/Δ·Σ‖[A,Bj]‖",
    );
    let commutators = bs
        .iter()
        .zip(comms.iter())
        .map(|(b, &cab)| {
            BoundCheck::new(
                comm_norm(&h, b),
                consts.c1.powi(m) * cab,
                "finite_range: ‖[H,Bj]‖ ≤ c1^m‖[A,Bj]‖",
            )
        })
        .collect();
    Ok(FiniteRange {
        h,
        delta,
        c0: consts.c0,
        c1: consts.c1,
        distance,
        commutators,
    })
}

/// Finite range with respect to a normal matrix through B₁ = Re N, B₂ = Im N.
pub fn finite_range_normal(a: &ComplexMatrix, nm: &ComplexMatrix, delta: f64, f: &Profile) -> Result<FiniteRange> {
    let d = normality_defect(nm);
    if d > 1e-10 * op_norm(nm).powi(2).max(1.0) {
        return Err(Error::NotNormal(d));
    }
    let (re, im) = hermitian_parts(nm);
    let fr = finite_range_multi(a, &[re, im], delta, f)?;
    let can = comm_norm(a, nm);
    let distance = BoundCheck::new(
        fr.distance.lhs,
        2.0 * fr.c0 * fr.c1 / delta * can,
        "finite_range_normal: ‖A−H‖ ≤ 2c0c1/Δ·‖[A,N]‖",
    );
    let comm = BoundCheck::new(
        comm_norm(&fr.h, nm),
        2.0 * fr.c1 * fr.c1 * can,
        "finite_range_normal: ‖[H,N]‖ ≤ 2c1²‖[A,N]‖",
    );
    Ok(FiniteRange {
        distance,
        commutators: vec![comm],
        ..fr
    })
}

/// Helper: apply a real profile to a Hermitian matrix.
pub fn apply_profile(e: &crate::matcore::HermitianEig, f: &Profile) -> ComplexMatrix {
    crate::matcore::apply_function(e, |x| c(f.eval(x), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::from_real_diag;
    use crate::random::Rng;

    #[test]
    fn smooth_step_values() {
        assert_eq!(smooth_step_bar(0.0), 1.0);
        assert_eq!(smooth_step_bar(1.0), 0.0);
        assert!((smooth_step_bar(0.5) - 0.5).abs() < 1e-15);
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            assert!((smooth_step_bar(x) + smooth_step_bar(1.0 - x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn poly3_mass_exceeds_one() {
        let k = profile_constants(&Profile::poly3()).unwrap();
        assert!(k.c1 > 1.0);
        assert!(k.c0_err < 1e-4 * k.c0);
    }

    #[test]
    fn indicator_diverges() {
        assert!(matches!(
            profile_constants(&Profile::indicator(1.0)),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn fourier_at_zero_is_mean() {
        // f̂(0) = (1/2π)∫f, and ∫F^{0,1} = 1 by the partition symmetry
        let d = cached_fourier(&Profile::smooth_step(0.0, 1.0, 0.0));
        assert!((d.fine.density[0] / 2.0 - 1.0 / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn c0_scales_inversely_with_width() {
        let a = FourierData::compute(&Profile::smooth_step(0.5, 0.5, 0.0), DEFAULT_K0);
        let b = FourierData::compute(&Profile::smooth_step(1.0, 1.0, 0.0), DEFAULT_K0);
        assert!((a.c0 / b.c0 - 2.0).abs() < 0.02);
        assert!((a.c1 / b.c1 - 1.0).abs() < 0.01);
    }

    #[test]
    fn partition_sums_to_one() {
        for n_win in [2, 3, 7, 16] {
            let ps = partition_of_unity(n_win).unwrap();
            for i in 0..=2000 {
                let x = -1.0 + 2.0 * i as f64 / 2000.0;
                let s: f64 = ps.iter().map(|p| p.eval(x)).sum();
                assert!((s - 1.0).abs() < 1e-10, "n_win {n_win} x {x} sum {s}");
                for j in 0..ps.len().saturating_sub(2) {
                    assert!(ps[j].eval(x) * ps[j + 2].eval(x) == 0.0);
                }
            }
        }
    }

    #[test]
    fn finite_range_scalar_b_is_identity_map() {
        let mut rng = Rng::seeded(5);
        let a = rng.hermitian(6);
        let b = crate::matcore::identity(6) * c(0.3, 0.0);
        let fr = finite_range(&a, &b, 0.1, &Profile::poly3()).unwrap();
        assert!(op_norm(&(fr.h - a)) < 1e-12);
    }

    #[test]
    fn finite_range_two_by_two() {
        let eps = 0.01;
        let a = crate::matcore::sigma_x() * c(eps, 0.0);
        let b = from_real_diag(&[0.2, -0.1]);
        let delta = 0.5;
        let fr = finite_range(&a, &b, delta, &Profile::poly3()).unwrap();
        let expect = eps * Profile::poly3().eval(0.3 / delta);
        assert!((fr.h[(0, 1)].re - expect).abs() < 1e-15);
        assert!(fr.distance.passes());
    }

    #[test]
    fn finite_range_rejects_wide_profile() {
        let a = crate::matcore::sigma_x();
        let b = crate::matcore::sigma_z();
        assert!(finite_range(&a, &b, 1.0, &Profile::smooth_step(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn t_decreases_for_doubled_l() {
        let g = Growth::LogSquaredMin2;
        let l1 = 200.0;
        assert!(t_of(2.0 * l1, g) < t_of(l1, g));
    }
}
