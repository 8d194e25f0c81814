//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `UNATTAINABLE` are reported as they come out; every
//! other criterion must pass for the run to succeed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nearcommute::gallery::{
    consecutive_ratios, leakage_comparison, quarter_tridiag, tn_identities, tn_lift, voiculescu,
    voiculescu_commutator_norm, winding_number, LEAKAGE_N10, LEAKAGE_N50_TAIL, TN_BUDGET,
};
use nearcommute::matcore::{c, comm_norm, eig_hermitian, from_real_diag, identity, op_norm, sigma_x, sigma_z, zeros, ComplexMatrix};
use nearcommute::pipeline::{choose_exponents, commute_hermitian_pair, delta_sweep, sweep_family, sweep_trend, PipelineConfig};
use nearcommute::random::Rng;
use nearcommute::subspace::{
    hastings_W, singleton_blocks, szarek_W, verify_tridiagonal, HastingsConfig, LinOracle, SzarekParams,
};
use nearcommute::suites::{run_suite, Suite};

/// The displayed T_N recursion does not hold; see the decisions ledger.
const UNATTAINABLE: &[usize] = &[8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(t: Duration, limit: f64) -> bool {
    t.as_secs_f64() < limit
}

fn quarter_tridiagonal() -> Outcome {
    let t = Instant::now();
    let (_, leak10) = quarter_tridiag(10).unwrap();
    let rows = leakage_comparison(&leak10, &LEAKAGE_N10, 3, 4);
    let n10 = rows.iter().all(|r| r.pass);
    let (_, leak50) = quarter_tridiag(50).unwrap();
    let tail = &leak50[47..];
    let ratios = consecutive_ratios(tail);
    let ratio_ok = ratios.iter().all(|r| (1.9..=2.1).contains(r));
    let rel = tail
        .iter()
        .zip(LEAKAGE_N50_TAIL)
        .map(|(&x, p)| (x.abs() * 1e15 - p).abs() / p)
        .fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        n10 && ratio_ok && rel <= 0.01 && within(el, 1.0),
        format!(
            "n=10 rows within one unit: {n10}; n=50 tail ×1e15 = [{:.4}, {:.4}, {:.4}], ratios {:?}, max relative deviation {rel:.4}; {el:.2?}",
            tail[0].abs() * 1e15,
            tail[1].abs() * 1e15,
            tail[2].abs() * 1e15,
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn finite_range_exactness() -> Outcome {
    let t = Instant::now();
    let rep = run_suite(Suite::Smoothing, 2024, Some(200));
    let el = t.elapsed();
    outcome(
        rep.passed() && within(el, 30.0),
        format!(
            "200 pairs, {} checks, {} violations, max leak {:.2e}, c0 = {:.4}; {el:.2?}",
            rep.checks,
            rep.violations,
            rep.metrics.get("max ‖E_S1(B) H E_S2(B)‖").cloned().unwrap_or(f64::NAN),
            rep.metrics.get("c0").cloned().unwrap_or(f64::NAN)
        ),
    )
}

fn inequality_suites() -> Outcome {
    let t = Instant::now();
    let b = run_suite(Suite::Bounds, 2024, Some(500));
    let lr = run_suite(Suite::LiebRobinson, 2024, Some(500));
    let sharp = b.metrics.get("max comm_proj sharpness |lhs − rhs|").cloned().unwrap_or(f64::NAN);
    let el = t.elapsed();
    let counts: Vec<String> = b.counts.iter().chain(lr.counts.iter()).map(|(k, v)| format!("{k}: {v}")).collect();
    outcome(
        b.passed() && lr.passed() && sharp <= 1e-12 && within(el, 120.0),
        format!(
            "violations {} + {}, skipped {} + {}, sharpness gap {sharp:.1e}; checks [{}]; {el:.2?}",
            b.violations,
            lr.violations,
            b.skipped,
            lr.skipped,
            counts.join(", ")
        ),
    )
}

fn projection_geometry() -> Outcome {
    let t = Instant::now();
    let rep = run_suite(Suite::Projections, 2024, Some(500));
    let jordan = rep.counts.get("jordan reconstruction").cloned().unwrap_or(0);
    let nests = rep.counts.get("nest_projection").cloned().unwrap_or(0);
    let el = t.elapsed();
    outcome(
        rep.passed() && jordan >= 200 && nests >= 500,
        format!(
            "{jordan} Jordan pairs (max residual {:.1e}), {nests} admissible nests (max sandwich defect {:.1e}, largest ε {:.3}), {} violations; {el:.2?}",
            rep.metrics.get("max jordan reconstruction").cloned().unwrap_or(f64::NAN),
            rep.metrics.get("max nest sandwich").cloned().unwrap_or(f64::NAN),
            rep.metrics.get("largest admissible ε").cloned().unwrap_or(f64::NAN),
            rep.violations
        ),
    )
}

/// Random tridiagonal contraction with couplings bounded away from zero.
fn random_chain(n: usize, rng: &mut Rng) -> ComplexMatrix {
    let mut m = zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(rng.uniform(-1.0, 1.0), 0.0);
        if i + 1 < n {
            let z = rng.complex_normal();
            let v = z * (rng.uniform(0.1, 1.0) / z.norm().max(1e-12));
            m[(i + 1, i)] = v;
            m[(i, i + 1)] = v.conj();
        }
    }
    let nm = op_norm(&m);
    m / c(nm, 0.0)
}

fn szarek_engine() -> Outcome {
    let t = Instant::now();
    let mut rng = Rng::seeded(40);
    let mut structural = 0;
    let mut max_eps2: f64 = 0.0;
    let mut finite = true;
    for _ in 0..50 {
        let j = random_chain(40, &mut rng);
        let sys = verify_tridiagonal(&j, &singleton_blocks(40)).unwrap();
        let out = szarek_W(&sys, &SzarekParams::default()).unwrap();
        let cert = &out.certificate;
        if cert.contains_v1 && cert.perp_vl {
            structural += 1;
        }
        finite &= cert.eps2.is_finite();
        max_eps2 = max_eps2.max(cert.eps2);
    }
    let mut decoupled_worst: f64 = 0.0;
    for k in 0..10 {
        let mut j = random_chain(40, &mut rng);
        let cut = 5 + 3 * k;
        j[(cut + 1, cut)] = c(0.0, 0.0);
        j[(cut, cut + 1)] = c(0.0, 0.0);
        let sys = verify_tridiagonal(&j, &singleton_blocks(40)).unwrap();
        let out = szarek_W(&sys, &SzarekParams::default()).unwrap();
        decoupled_worst = decoupled_worst.max(out.certificate.eps2);
    }
    let el = t.elapsed();
    outcome(
        structural == 50 && finite && decoupled_worst <= 1e-10,
        format!(
            "{structural}/50 with V1 ⊂ W ⊥ V_L, measured eps2 ≤ {max_eps2:.3}, decoupled eps2 ≤ {decoupled_worst:.1e}; {el:.2?}"
        ),
    )
}

fn block_chain(l: usize, d: usize, seed: u64) -> (ComplexMatrix, Vec<ComplexMatrix>) {
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
    let nm = op_norm(&j);
    let id = identity(n);
    (j / c(nm, 0.0), (0..l).map(|b| id.columns(b * d, d).into_owned()).collect())
}

fn hastings_engine() -> Outcome {
    let t = Instant::now();
    let (j, blocks) = block_chain(60, 2, 0);
    let sys = verify_tridiagonal(&j, &blocks).unwrap();
    let cfg = HastingsConfig::for_length(60).unwrap();
    let out = match hastings_W(&sys, &cfg, &LinOracle::default()) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("engine error: {e}")),
    };
    let d = &out.diagnostics;
    let sandwich = d.n_sandwich.iter().cloned().fold(0.0, f64::max);
    let comm = d.n_commutators.iter().cloned().fold(0.0, f64::max);
    let semi = d.semi_orthogonality.iter().cloned().fold(0.0, f64::max);
    let min_m = d.m_min_eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let alpha = d.decay.as_ref().map_or(f64::NAN, |f| f.alpha);
    let decay_ok = d.decay.as_ref().is_some_and(|f| f.ok && f.alpha < 1.0);
    let pass = d.downgraded.is_none()
        && !d.n_sandwich.is_empty()
        && sandwich <= 1e-8
        && comm <= 1.0 - cfg.chi + 1e-12
        && semi <= (1.0 - cfg.chi) / 2.0
        && !d.m_min_eig.is_empty()
        && min_m >= d.m_x - 1e-9
        && decay_ok
        && out.certificate.contains_v1
        && out.certificate.perp_vl;
    outcome(
        pass,
        format!(
            "χ = {}, sandwich defect {sandwich:.1e}, max ‖[N,B̂]‖ {comm:.3} ≤ {:.3}, max semi-orthogonality {semi:.3} ≤ {:.3}, min eig M {min_m:.3} ≥ x = {:.3}, α = {alpha:.2}, W dim {}, eps2 {:.3}; {:.2?}",
            cfg.chi,
            1.0 - cfg.chi,
            (1.0 - cfg.chi) / 2.0,
            d.m_x,
            d.w_dim,
            out.certificate.eps2,
            t.elapsed()
        ),
    )
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let a = tn_lift(&sigma_x(), 6, TN_BUDGET).unwrap();
    let b = tn_lift(&sigma_z(), 6, TN_BUDGET).unwrap();
    let cfg = PipelineConfig::default();
    let rep = commute_hermitian_pair(&a, &b, &cfg).unwrap();
    let width = 2.0 / rep.log.n_cut as f64;
    let pair_ok = rep.comm_residual <= 1e-10 && rep.dist_b <= width + 1e-12;
    let (a0, b0, e) = sweep_family(32, 0);
    let rows = delta_sweep(&a0, &b0, &e, &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3], &cfg).unwrap();
    let trend = sweep_trend(&rows);
    let el = t.elapsed();
    outcome(
        pair_ok && trend && within(el, 120.0),
        format!(
            "T_N pair (dim {}): δ {:.3}, residual {:.1e}, distA {:.3}, distB {:.3} ≤ 2/n_cut = {width:.3}; sweep distA [{}], distB [{}]; {el:.2?}",
            a.nrows(),
            rep.log.delta,
            rep.comm_residual,
            rep.dist_a,
            rep.dist_b,
            rows.iter().map(|r| format!("{:.2e}", r.dist_a)).collect::<Vec<_>>().join(", "),
            rows.iter().map(|r| format!("{:.3}", r.dist_b)).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn tn_identity_checks() -> Outcome {
    let t = Instant::now();
    let mut rng = Rng::seeded(8);
    let mut worst_other: f64 = 0.0;
    let mut worst_displayed: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    let mut norms = true;
    for n in [2, 3] {
        for factors in 1..=5 {
            let id = tn_identities(&rng.hermitian(n), &rng.hermitian(n), &rng.unitary(n), factors, TN_BUDGET).unwrap();
            let tol = id.tolerance();
            worst_other = worst_other.max(id.commutator.max(id.covariance) / tol);
            worst_displayed = worst_displayed.max(id.recursion_displayed / tol);
            worst_exact = worst_exact.max(id.recursion_exact / tol);
            norms &= id.norm_lower.passes() && id.norm_upper.passes();
        }
    }
    let e = eig_hermitian(&tn_lift(&from_real_diag(&[0.0, 1.0]), 3, TN_BUDGET).unwrap()).unwrap();
    let expected = [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0];
    let spec_dev = e.values.iter().zip(expected).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let spectrum_ok = spec_dev <= 1e-12 * 8.0;
    outcome(
        worst_other <= 1.0 && worst_displayed <= 1.0 && norms && spectrum_ok,
        format!(
            "residual/(1e-12·dim): commutator & covariance {worst_other:.2e}, displayed recursion {worst_displayed:.2e}, corrected recursion {worst_exact:.2e}; norm sandwich {norms}; T_3(diag(0,1)) spectrum deviation {spec_dev:.1e}; {:.2?}",
            t.elapsed()
        ),
    )
}

fn voiculescu_winding() -> Outcome {
    let t = Instant::now();
    let worst = (1..=64)
        .map(|n| {
            let (u, v) = voiculescu(n).unwrap();
            (comm_norm(&u, &v) - voiculescu_commutator_norm(n)).abs()
        })
        .fold(0.0, f64::max);
    let (u, v) = voiculescu(8).unwrap();
    let id = identity(8);
    let w = winding_number(&u, &v, &id, &id, 64).unwrap();
    let u2 = &u * &u;
    let z = winding_number(&u, &u2, &u, &u2, 64).unwrap();
    outcome(
        worst <= 1e-10 && w.winding != 0 && w.stable && z.winding == 0,
        format!(
            "max |‖[U,V]‖ − |1−ω|| {worst:.1e}; (U₈,V₈)→(I,I): winding {} stable {}; commuting pair: {}; {:.2?}",
            w.winding,
            w.stable,
            z.winding,
            t.elapsed()
        ),
    )
}

fn exponents() -> Outcome {
    let g1 = choose_exponents(1.0, true).unwrap().gamma;
    let g9 = choose_exponents(1.0 / 9.0, false).unwrap().gamma;
    let g4 = choose_exponents(0.25, true).unwrap().gamma;
    let ok = (g1 - 1.0 / 3.0).abs() <= 1e-15 && (g9 - 0.1).abs() <= 1e-15 && (g4 - 1.0 / 6.0).abs() <= 1e-15;
    outcome(ok, format!("γ(1) = {g1}, γ(1/9, no finite range) = {g9}, γ(1/4) = {g4}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quarter-tridiagonal reproduction", quarter_tridiagonal),
        ("finite-range exactness", finite_range_exactness),
        ("inequality suites", inequality_suites),
        ("projection geometry", projection_geometry),
        ("Szarek engine", szarek_engine),
        ("Hastings engine (desk scale)", hastings_engine),
        ("end-to-end pipeline", end_to_end),
        ("T_N identities", tn_identity_checks),
        ("Voiculescu and winding", voiculescu_winding),
        ("exponent bookkeeping", exponents),
    ];
    let mut unexpected = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        let o = run();
        println!("{} [{id}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("criteria with an unexpected outcome: {unexpected:?}");
        ExitCode::FAILURE
    }
}
