//! Verification suites: the solvers of the core crate checked against
//! independent oracles (closed forms, bisection, enumeration, ADMM) and
//! Monte-Carlo statistics.

use std::f64::consts::PI;
use std::time::Instant;

use attrlearn_core::distributions::{sample, sample_band, Band, LogConcaveDist, LogConcaveKind};
use attrlearn_core::erm::{finalize_iterate, hinge_loss, minimize_hinge, ErmOptions, HingeSpec, LabeledSet};
use attrlearn_core::geometry::{hard_threshold, project_m, project_w, BallPair, DykstraOptions, MatBall};
use attrlearn_core::learner::{schedule, ConstantsProfile, SizingPolicy};
use attrlearn_core::oracle::{
    band_noise_rate_estimate, next_instance, sign, AdversaryKind, AdversaryStrategy, GroundTruth, LearnerView,
    SimOracle,
};
use attrlearn_core::outlier::{
    brute_force_sparse_variance, certify_variance, find_weights, stack_rows, weighted_moment, CertifyOptions,
    FindWeightsOptions, WeightMap, WeightOutcome,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Distributions,
    Oracle,
    Outlier,
    Erm,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "geometry" => Suite::Geometry,
            "distributions" => Suite::Distributions,
            "oracle" => Suite::Oracle,
            "outlier" => Suite::Outlier,
            "erm" => Suite::Erm,
            "all" => Suite::All,
            other => return Err(format!("unknown suite `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Geometry => vec![
            projection_w_equivalence(100, 11),
            projection_m_equivalence(50, 12),
            hard_threshold_best_term(50, 13),
        ],
        Suite::Distributions => vec![
            isotropy(100_000, 21),
            gaussian_band_acceptance(0.5, 100_000, 22),
            band_acceptance_floor(0.5, 23),
            gaussian_unit_slab(100_000, 24),
        ],
        Suite::Oracle => vec![dirty_fraction(0.1, 100_000, 31), label_commitment(32), in_band_noise_bound(33)],
        Suite::Outlier => vec![
            relaxation_dominance(50, 41),
            outlier_contract(20, 42),
            far_outlier_suppressed(43),
            clean_batch_feasible(10, 44),
        ],
        Suite::Erm => vec![
            erm_realizable(20, 51),
            erm_probe(20, 52),
            hinge_convexity(100, 53),
            finalize_examples(),
        ],
        Suite::All => [
            Suite::Geometry,
            Suite::Distributions,
            Suite::Oracle,
            Suite::Outlier,
            Suite::Erm,
        ]
        .into_iter()
        .flat_map(run_suite)
        .collect(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vec<R: Rng>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| LogConcaveKind::Gaussian.sample_coord(rng))
}

fn random_sparse_unit<R: Rng>(d: usize, s: usize, rng: &mut R) -> DVector<f64> {
    let idx = rand::seq::index::sample(rng, d, s);
    let mut v = DVector::zeros(d);
    for i in idx.iter() {
        v[i] = LogConcaveKind::Gaussian.sample_coord(rng);
    }
    let n = v.norm();
    if n == 0.0 {
        v[0] = 1.0;
        v
    } else {
        v / n
    }
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

fn soft(y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    y.map(|v| v.signum() * (v.abs() - lambda).max(0.0))
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Exact projection onto `B2(c, r) ∩ B1(c, ρ)` from the KKT structure
/// `z = soft(y, λ)/(1 + μ)`, solved by bisection on `λ`.
pub fn project_w_exact(v: &DVector<f64>, center: &DVector<f64>, r: f64, rho: f64) -> DVector<f64> {
    let y = v - center;
    let n2 = y.norm();
    if n2 <= r && l1(&y) <= rho {
        return v.clone();
    }
    if n2 > r {
        let z = &y * (r / n2);
        if l1(&z) <= rho {
            return center + z;
        }
    }
    let top = y.amax();
    if l1(&y) > rho {
        let (mut lo, mut hi) = (0.0, top);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if l1(&soft(&y, mid)) > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = soft(&y, 0.5 * (lo + hi));
        if z.norm() <= r * (1.0 + 1e-15) {
            return center + z;
        }
    }
    // Both constraints active: match the ℓ₁/ℓ₂ ratio of the soft threshold.
    let target = rho / r;
    let ratio = |lambda: f64| {
        let z = soft(&y, lambda);
        l1(&z) / z.norm()
    };
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid >= top || soft(&y, mid).norm() == 0.0 || ratio(mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let z = soft(&y, lo);
    center + &z * (r / z.norm())
}

/// Projection onto `{H ⪰ 0, tr H ≤ r²}`: eigenvalues clipped then moved onto
/// the capped simplex by bisection on the shift.
fn oracle_spectral(h: &DMatrix<f64>, r_sq: f64) -> DMatrix<f64> {
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lam = eig.eigenvalues.map(|x| x.max(0.0));
    let total: f64 = lam.iter().sum();
    let shifted = if total <= r_sq {
        lam
    } else {
        let (mut lo, mut hi) = (0.0, lam.max());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = lam.iter().map(|x| (x - mid).max(0.0)).sum();
            if s > r_sq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lam.map(|x| (x - hi).max(0.0))
    };
    &eig.eigenvectors * DMatrix::from_diagonal(&shifted) * eig.eigenvectors.transpose()
}

/// Projection onto the entrywise ℓ₁ ball by bisection on the threshold.
fn oracle_entrywise_l1(h: &DMatrix<f64>, rho_sq: f64) -> DMatrix<f64> {
    let total: f64 = h.iter().map(|x| x.abs()).sum();
    if total <= rho_sq {
        return h.clone();
    }
    let (mut lo, mut hi) = (0.0, h.amax());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = h.iter().map(|x| (x.abs() - mid).max(0.0)).sum();
        if s > rho_sq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    h.map(|x| x.signum() * (x.abs() - hi).max(0.0))
}

/// ADMM on the splitting `H ∈ spectral set`, `Z ∈ ℓ₁ ball`, `H = Z`.
pub fn project_m_admm(y: &DMatrix<f64>, r_sq: f64, rho_sq: f64) -> DMatrix<f64> {
    let pen = 1.0;
    let mut z = y.clone();
    let mut u = DMatrix::zeros(y.nrows(), y.ncols());
    for _ in 0..200_000 {
        let h = oracle_spectral(&((y + (&z - &u) * pen) / (1.0 + pen)), r_sq);
        let z_next = oracle_entrywise_l1(&(&h + &u), rho_sq);
        u += &h - &z_next;
        let primal = (&h - &z_next).norm();
        let dual = (&z_next - &z).norm();
        z = z_next;
        if primal < 1e-13 && dual < 1e-13 {
            break;
        }
    }
    oracle_spectral(&z, r_sq)
}

/// Best `s`-term approximation error by subset enumeration.
fn best_s_term_error(v: &DVector<f64>, s: usize) -> f64 {
    let d = v.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let err: f64 = (0..d).filter(|i| mask & (1 << i) == 0).map(|i| v[i] * v[i]).sum();
        best = best.min(err.sqrt());
    }
    best
}

/// `Φ(x)` from the error function.
fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

/// Maclaurin series of the error function; accurate for `|x| ≤ 3`.
fn erf_series(x: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut term = x;
    let x2 = x * x;
    let mut n = 0.0;
    while term.abs() > 1e-17 * sum.abs().max(1e-300) || n < 5.0 {
        sum += term / (2.0 * n + 1.0);
        n += 1.0;
        term *= -x2 / n;
        if n > 200.0 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// Upper bound `min_μ r²·λmax⁺(Σ − clip(Σ, μ)) + ρ²μ` over a μ grid.
fn independent_variance_bound(sigma: &DMatrix<f64>, r_sq: f64, rho_sq: f64) -> f64 {
    let top = sigma.amax();
    let mut best = f64::INFINITY;
    for i in 0..=400 {
        let mu = top * i as f64 / 400.0;
        let u = sigma.map(|x| x.clamp(-mu, mu));
        let lam = SymmetricEigen::new(sigma - u).eigenvalues.max();
        best = best.min(r_sq * lam.max(0.0) + rho_sq * mu);
    }
    best
}

fn own_hinge(w: &DVector<f64>, xs: &[DVector<f64>], ys: &[i8], tau: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - f64::from(y) * w.dot(x) / tau).max(0.0))
        .sum::<f64>()
        / xs.len() as f64
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

pub fn projection_w_equivalence(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let opts = DykstraOptions::default();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..n {
        let d = rng.random_range(2..=10usize);
        let center = if rng.random::<bool>() {
            DVector::zeros(d)
        } else {
            gaussian_vec(d, &mut rng) * 0.5
        };
        let r = rng.random_range(0.2..2.0);
        let rho = r * rng.random_range(0.5..(d as f64).sqrt());
        let v = &center + gaussian_vec(d, &mut rng) * rng.random_range(0.1..4.0);
        let w = BallPair::new(center.clone(), r, rho).expect("valid radii");
        match project_w(&v, &w, &opts) {
            Ok(p) => {
                let dev = (p - project_w_exact(&v, &center, r, rho)).norm();
                worst = worst.max(dev);
                if dev > 1e-5 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Check::new(
        "project_W matches exact bisection projection",
        failures == 0,
        format!("{n} instances, max deviation {worst:.3e}, {failures} above 1e-5"),
    )
}

pub fn projection_m_equivalence(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let opts = DykstraOptions {
        max_iter: 100_000,
        tol: 1e-9,
    };
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut errors = Vec::new();
    for _ in 0..n {
        let d = rng.random_range(2..=4usize);
        let a = DMatrix::from_fn(d, d, |_, _| LogConcaveKind::Gaussian.sample_coord(&mut rng));
        let y = (&a + a.transpose()) * 0.5;
        let r_sq = rng.random_range(0.2..2.0);
        let rho_sq = r_sq * rng.random_range(0.5..d as f64);
        let m = MatBall::new(r_sq, rho_sq).expect("valid radii");
        match project_m(&y, &m, &opts) {
            Ok(p) => {
                let dev = (p - project_m_admm(&y, r_sq, rho_sq)).norm();
                worst = worst.max(dev);
                if dev > 1e-5 {
                    failures += 1;
                }
            }
            Err(e) => {
                failures += 1;
                errors.push(e.to_string());
            }
        }
    }
    Check::new(
        "project_M matches ADMM projection",
        failures == 0,
        format!(
            "{n} instances (d ≤ 4), max Frobenius deviation {worst:.3e}, {failures} failures{}",
            if errors.is_empty() { String::new() } else { format!(" ({})", errors.join("; ")) }
        ),
    )
}

pub fn hard_threshold_best_term(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut failures = 0;
    for _ in 0..n {
        let d = rng.random_range(1..=8usize);
        let s = rng.random_range(1..=d);
        let v = gaussian_vec(d, &mut rng);
        let h = hard_threshold(&v, s).expect("valid sparsity");
        let twice = hard_threshold(&h, s).expect("valid sparsity");
        let err = (&h - &v).norm();
        if (err - best_s_term_error(&v, s)).abs() > 1e-12 || twice != h {
            failures += 1;
        }
    }
    Check::new(
        "hard threshold is the best s-term approximation and idempotent",
        failures == 0,
        format!("{n} instances (d ≤ 8), {failures} failures"),
    )
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

pub fn isotropy(draws: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let d = 3;
    let mut detail = Vec::new();
    let mut ok = true;
    for kind in LogConcaveKind::ALL {
        let dist = LogConcaveDist::new(kind, d).expect("positive dim");
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for _ in 0..draws {
            let x = sample(&dist, &mut rng);
            cov += &x * x.transpose();
        }
        cov /= draws as f64;
        let diag_ok = (0..d).all(|i| (0.95..=1.05).contains(&cov[(i, i)]));
        let off_ok = (0..d).all(|i| (0..d).all(|j| i == j || cov[(i, j)].abs() <= 0.03));
        ok &= diag_ok && off_ok;
        detail.push(format!(
            "{kind}: diag [{:.3}, {:.3}]",
            cov.diagonal().min(),
            cov.diagonal().max()
        ));
    }
    Check::new("isotropy of all kinds", ok, format!("{draws} draws each; {}", detail.join(", ")))
}

pub fn gaussian_band_acceptance(b: f64, trials: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let d = 4;
    let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, d).expect("positive dim");
    let mut u = DVector::zeros(d);
    u[0] = 1.0;
    let band = Band::new(u, b).expect("valid band");
    let mut attempts = 0u64;
    let mut accepted = 0u64;
    while attempts < trials as u64 {
        let draw = sample_band(&dist, &band, &mut rng, u64::MAX).expect("unbounded budget");
        attempts += draw.attempts;
        accepted += 1;
    }
    let rate = accepted as f64 / attempts as f64;
    let expected = 2.0 * std_normal_cdf(b) - 1.0;
    Check::new(
        "gaussian band acceptance rate",
        (rate - expected).abs() <= 0.01,
        format!("b = {b}: rate {rate:.4}, closed form {expected:.4} ± 0.01"),
    )
}

pub fn band_acceptance_floor(c8: f64, seed: u64) -> Check {
    let mut rng = rng(seed);
    let d = 3;
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in LogConcaveKind::ALL {
        let dist = LogConcaveDist::new(kind, d).expect("positive dim");
        for b in [0.05, 0.1, 0.5] {
            let u = DVector::from_column_slice(&[0.6, 0.0, 0.8]);
            let band = Band::new(u, b).expect("valid band");
            let mut attempts = 0u64;
            let mut accepted = 0u64;
            while accepted < 5_000 {
                attempts += sample_band(&dist, &band, &mut rng, u64::MAX)
                    .expect("unbounded budget")
                    .attempts;
                accepted += 1;
            }
            let rate = accepted as f64 / attempts as f64;
            if rate < c8 * b {
                ok = false;
                detail.push(format!("{kind} b={b}: {rate:.4} < {:.4}", c8 * b));
            }
        }
    }
    Check::new(
        "band acceptance at least c8·b",
        ok,
        if detail.is_empty() {
            format!("all kinds, b ∈ {{0.05, 0.1, 0.5}}, c8 = {c8}")
        } else {
            detail.join("; ")
        },
    )
}

pub fn gaussian_unit_slab(draws: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, 2).expect("positive dim");
    let hits = (0..draws).filter(|_| sample(&dist, &mut rng)[0].abs() <= 1.0).count();
    let rate = hits as f64 / draws as f64;
    let expected = 2.0 * std_normal_cdf(1.0) - 1.0;
    Check::new(
        "gaussian unit slab probability",
        (rate - expected).abs() <= 0.01,
        format!("rate {rate:.4}, closed form {expected:.4} ± 0.01"),
    )
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

fn truth(d: usize, s: usize, seed: u64) -> GroundTruth {
    let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, d).expect("positive dim");
    GroundTruth::random(dist, s, &mut rng(seed)).expect("valid sparsity")
}

pub fn dirty_fraction(eta: f64, draws: usize, seed: u64) -> Check {
    let gt = truth(10, 3, seed);
    let strategy = AdversaryStrategy::of_kind(AdversaryKind::FarCluster);
    let view = LearnerView::initial(10);
    let mut rng = rng(seed + 1);
    let mut dirty = 0usize;
    let mut clean_ok = true;
    for _ in 0..draws {
        let (ex, _) = next_instance(&gt, eta, &strategy, &view, None, 1, &mut rng).expect("valid draw");
        if ex.clean {
            clean_ok &= ex.committed_label == sign(gt.w_star().dot(&ex.x));
        } else {
            dirty += 1;
        }
    }
    let frac = dirty as f64 / draws as f64;
    Check::new(
        "dirty fraction and clean labels",
        (frac - eta).abs() <= 0.003 && clean_ok,
        format!("{draws} draws at eta = {eta}: dirty fraction {frac:.4} (target ± 0.003), clean labels correct: {clean_ok}"),
    )
}

pub fn label_commitment(seed: u64) -> Check {
    let gt = truth(8, 2, seed);
    let mut oracle =
        SimOracle::new(gt, 0.2, AdversaryStrategy::of_kind(AdversaryKind::LabelFlipInBand)).expect("valid oracle");
    let mut rng = rng(seed + 1);
    let view = LearnerView::initial(8);
    let ids: Vec<_> = (0..200)
        .map(|_| oracle.next_instance(&view, None, 1, &mut rng).expect("valid draw").id)
        .collect();
    let mut ok = true;
    for &id in &ids {
        let a = oracle.reveal_label(id);
        let b = oracle.reveal_label(id);
        ok &= a == b && a == oracle.passive_label(id);
    }
    ok &= oracle.distinct_labels() == ids.len() as u64 && oracle.label_queries() == 2 * ids.len() as u64;
    Check::new(
        "label commitment and counters",
        ok,
        format!(
            "{} examples revealed twice: distinct {}, queries {}",
            ids.len(),
            oracle.distinct_labels(),
            oracle.label_queries()
        ),
    )
}

pub fn in_band_noise_bound(seed: u64) -> Check {
    let c8 = 0.5;
    let eta = 0.01;
    let b = 0.2;
    let bound = band_noise_rate_estimate(eta, c8, b).expect("positive inputs");
    let mut ok = (bound - 0.2).abs() < 1e-15;
    let mut worst = 0.0f64;
    for run in 0..10 {
        let gt = truth(10, 3, seed + run);
        let strategy = AdversaryStrategy::of_kind(AdversaryKind::FarCluster);
        let band = Band::new(gt.w_star().clone(), b).expect("valid band");
        let view = LearnerView {
            current_w: gt.w_star().clone(),
            current_band: Some(band.clone()),
            phase: 2,
            prune_radius: Some(30.0),
        };
        let mut rng = rng(seed + 100 + run);
        let n = 5_000;
        let mut dirty = 0;
        for _ in 0..n {
            let (ex, _) = next_instance(&gt, eta, &strategy, &view, Some(&band), 10_000, &mut rng).expect("valid draw");
            ok &= band.contains(&ex.x);
            if !ex.clean {
                dirty += 1;
            }
        }
        let frac = dirty as f64 / n as f64;
        worst = worst.max(frac);
        ok &= frac <= bound;
    }
    Check::new(
        "in-band dirty fraction below the band noise bound",
        ok,
        format!("bound {bound}, worst in-band dirty fraction {worst:.4} over 10 runs"),
    )
}

// ---------------------------------------------------------------------------
// Outlier removal
// ---------------------------------------------------------------------------

pub fn relaxation_dominance(n: usize, seed: u64) -> Check {
    let start = Instant::now();
    let mut rng = rng(seed);
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    let mut errors = Vec::new();
    for _ in 0..n {
        let d = rng.random_range(2..=6usize);
        let t = rng.random_range(1..=12usize);
        let rows: Vec<DVector<f64>> = (0..t).map(|_| gaussian_vec(d, &mut rng)).collect();
        let points = stack_rows(&rows);
        let q = WeightMap::new((0..t).map(|_| rng.random_range(0.0..=1.0)).collect()).expect("weights in range");
        let r = rng.random_range(0.3..1.5);
        let rho = r * rng.random_range(1.0..(d as f64).sqrt());
        let m = MatBall::new(r * r, rho * rho).expect("valid radii");
        let cert = certify_variance(&points, &q, &m, &CertifyOptions::default());
        let brute = brute_force_sparse_variance(&points, &q, r, rho);
        match (cert, brute) {
            (Ok(c), Ok(b)) => {
                let slack = c.value - b;
                worst = worst.min(slack);
                if slack < -1e-8 {
                    failures += 1;
                }
            }
            (c, b) => {
                failures += 1;
                errors.extend(c.err().into_iter().chain(b.err()).map(|e| e.to_string()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        "relaxation dominates brute-force sparse variance",
        failures == 0 && secs <= 60.0,
        format!(
            "{n} instances (d ≤ 6, |T| ≤ 12), min slack {worst:.3e}, {failures} failures, {secs:.2} s{}",
            if errors.is_empty() { String::new() } else { format!(" ({})", errors.join("; ")) }
        ),
    )
}

/// Phase-1 batch with in-band antipodal contamination at the given rate.
/// Returns the instances and their hidden cleanliness tags.
pub fn contaminated_batch(d: usize, s: usize, n: usize, rate: f64, seed: u64) -> (DMatrix<f64>, Vec<bool>) {
    let gt = truth(d, s, seed);
    let strategy = AdversaryStrategy::of_kind(AdversaryKind::AntipodalInBand);
    let view = LearnerView::initial(d);
    let mut rng = rng(seed + 7);
    let mut rows = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let (ex, _) = next_instance(&gt, rate, &strategy, &view, None, 1, &mut rng).expect("valid draw");
        rows.push(ex.x);
        clean.push(ex.clean);
    }
    (stack_rows(&rows), clean)
}

/// Outcome of re-checking a returned weight map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recheck {
    pub range_ok: bool,
    pub mass_ok: bool,
    pub variance: f64,
    pub variance_ok: bool,
}

/// Re-checks the three weight constraints with an independent dual bound,
/// falling back to a fresh certificate when the grid bound is loose.
pub fn recheck_weights(points: &DMatrix<f64>, q: &[f64], xi: f64, m: &MatBall, bound: f64, tol: f64) -> Recheck {
    let n = points.nrows() as f64;
    let range_ok = q.iter().all(|w| (0.0..=1.0).contains(w));
    let mass_ok = q.iter().sum::<f64>() >= (1.0 - xi) * n * (1.0 - tol);
    let sigma = weighted_moment(points, q);
    let mut variance = independent_variance_bound(&sigma, m.r_sq, m.rho_sq);
    if variance > bound * (1.0 + tol) {
        let opts = CertifyOptions {
            tol: 1e-8,
            max_iter: 2_000,
            ..CertifyOptions::default()
        };
        if let Ok(wm) = WeightMap::new(q.to_vec()) {
            if let Ok(c) = certify_variance(points, &wm, m, &opts) {
                variance = variance.min(c.value);
            }
        }
    }
    Recheck {
        range_ok,
        mass_ok,
        variance,
        variance_ok: variance <= bound * (1.0 + tol),
    }
}

/// Soft outlier removal on contaminated phase-1 batches.
pub fn outlier_contract(batches: usize, seed: u64) -> Check {
    let profile = ConstantsProfile::practical();
    let params = schedule(1, 3, 20, 0.1, 0.1, &profile, &SizingPolicy::default()).expect("valid schedule");
    let xi = 0.1;
    let m = MatBall::new(params.r * params.r, params.rho * params.rho).expect("valid radii");
    let c = 2.0 * profile.big_c2;
    let mut failures = Vec::new();
    let (mut clean_sum, mut clean_n, mut dirty_sum, mut dirty_n) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..batches {
        let (points, tags) = contaminated_batch(20, 3, 1_000, 0.05, seed + i as u64);
        match find_weights(&points, xi, &m, params.b, c, &FindWeightsOptions::default()) {
            Ok(WeightOutcome::Feasible(r)) => {
                let chk = recheck_weights(&points, r.q.weights(), xi, &m, r.bound, 1e-4);
                if !(chk.range_ok && chk.mass_ok && chk.variance_ok) {
                    failures.push(format!("batch {i}: recheck {chk:?}"));
                }
                for (w, clean) in r.q.weights().iter().zip(&tags) {
                    if *clean {
                        clean_sum += w;
                        clean_n += 1;
                    } else {
                        dirty_sum += w;
                        dirty_n += 1;
                    }
                }
            }
            Ok(WeightOutcome::Infeasible(r)) => failures.push(format!(
                "batch {i}: infeasible after {} cuts (value {:.4} > {:.4})",
                r.cuts, r.certificate.value, r.bound
            )),
            Err(e) => failures.push(format!("batch {i}: {e}")),
        }
    }
    let clean_mean = clean_sum / clean_n.max(1) as f64;
    let dirty_mean = dirty_sum / dirty_n.max(1) as f64;
    let passed = failures.is_empty() && clean_mean >= 0.9 && dirty_mean <= 0.5;
    Check::new(
        "soft outlier removal contract on contaminated batches",
        passed,
        format!(
            "{batches} batches (d = 20, |T| = 1000, 5% antipodal, xi = {xi}): mean clean weight {clean_mean:.4}, mean dirty weight {dirty_mean:.4}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

pub fn far_outlier_suppressed(seed: u64) -> Check {
    let mut rng = rng(seed);
    let d = 10;
    let n = 200;
    let mut rows: Vec<DVector<f64>> = (0..n - 1).map(|_| gaussian_vec(d, &mut rng)).collect();
    let mut far = DVector::zeros(d);
    far[0] = 1_000.0;
    rows.push(far);
    let points = stack_rows(&rows);
    let m = MatBall::new(1.0, 3.0).expect("valid radii");
    let xi = 2.0 / n as f64;
    let detail;
    let passed = match find_weights(&points, xi, &m, 0.125, 5.0, &FindWeightsOptions::default()) {
        Ok(WeightOutcome::Feasible(r)) => {
            let w = r.q.weights()[n - 1];
            detail = format!("outlier weight {w:.3e} after {} cuts", r.cuts);
            w <= 0.1
        }
        Ok(WeightOutcome::Infeasible(r)) => {
            detail = format!("infeasible after {} cuts", r.cuts);
            false
        }
        Err(e) => {
            detail = e.to_string();
            false
        }
    };
    Check::new("single far outlier is down-weighted", passed, detail)
}

pub fn clean_batch_feasible(batches: usize, seed: u64) -> Check {
    let profile = ConstantsProfile::practical();
    let params = schedule(1, 3, 20, 0.1, 0.1, &profile, &SizingPolicy::default()).expect("valid schedule");
    let m = MatBall::new(params.r * params.r, params.rho * params.rho).expect("valid radii");
    let mut ok = true;
    let mut min_mean = 1.0f64;
    for i in 0..batches {
        let (points, _) = contaminated_batch(20, 3, 500, 0.0, seed + i as u64);
        match find_weights(
            &points,
            params.xi,
            &m,
            params.b,
            2.0 * profile.big_c2,
            &FindWeightsOptions::default(),
        ) {
            Ok(WeightOutcome::Feasible(r)) => {
                let mean = r.q.total() / 500.0;
                min_mean = min_mean.min(mean);
                ok &= mean >= 0.95 && r.q.total() >= (1.0 - params.xi) * 500.0;
            }
            _ => ok = false,
        }
    }
    Check::new(
        "clean batches are feasible with near-unit weights",
        ok,
        format!("{batches} batches (d = 20, |T| = 500): minimum mean weight {min_mean:.4}"),
    )
}

// ---------------------------------------------------------------------------
// ERM
// ---------------------------------------------------------------------------

struct ErmInstance {
    xs: Vec<DVector<f64>>,
    ys: Vec<i8>,
    ball: BallPair,
    tau: f64,
}

fn realizable_instance<R: Rng>(rng: &mut R) -> ErmInstance {
    let d = rng.random_range(5..=30usize);
    let s = rng.random_range(1..=3usize.min(d));
    let center = random_sparse_unit(d, s, rng);
    let r = rng.random_range(0.3..1.0);
    let rho = r * rng.random_range(1.0..(2.0 * s as f64).sqrt() + 1.0);
    let w0 = project_w_exact(&(&center + gaussian_vec(d, rng) * (0.3 * r)), &center, r, rho);
    let tau = rng.random_range(0.02..0.2);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < 300 {
        let x = gaussian_vec(d, rng);
        let margin = w0.dot(&x);
        if margin.abs() >= tau {
            ys.push(sign(margin));
            xs.push(x);
        }
    }
    ErmInstance {
        xs,
        ys,
        ball: BallPair::new(center, r, rho).expect("valid radii"),
        tau,
    }
}

fn random_instance<R: Rng>(rng: &mut R) -> ErmInstance {
    let d = rng.random_range(5..=30usize);
    let s = rng.random_range(1..=3usize.min(d));
    let center = if rng.random::<bool>() {
        DVector::zeros(d)
    } else {
        random_sparse_unit(d, s, rng)
    };
    let r = rng.random_range(0.1..1.0);
    let rho = r * rng.random_range(1.0..(2.0 * s as f64).sqrt() + 1.0);
    let xs: Vec<DVector<f64>> = (0..200).map(|_| gaussian_vec(d, rng)).collect();
    let ys = (0..200).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    ErmInstance {
        xs,
        ys,
        ball: BallPair::new(center, r, rho).expect("valid radii"),
        tau: rng.random_range(0.01..0.5),
    }
}

fn labeled(inst: &ErmInstance) -> LabeledSet {
    let pairs: Vec<(DVector<f64>, i8)> = inst.xs.iter().cloned().zip(inst.ys.iter().copied()).collect();
    LabeledSet::from_examples(&pairs).expect("consistent examples")
}

pub fn erm_realizable(n: usize, seed: u64) -> Check {
    let kappa = ConstantsProfile::practical().kappa;
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..n {
        let inst = realizable_instance(&mut rng);
        let spec = HingeSpec::new(inst.tau, kappa).expect("positive");
        match minimize_hinge(&labeled(&inst), &inst.ball, &spec, &ErmOptions::default(), &[], &mut rng) {
            Ok(out) => {
                worst = worst.max(out.loss);
                if out.loss > kappa || !inst.ball.contains(&out.v, 1e-6) {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Check::new(
        "hinge minimization reaches kappa on realizable sets",
        failures == 0,
        format!("{n} sets, worst loss {worst:.4} (kappa {kappa:.4}), {failures} failures"),
    )
}

pub fn erm_probe(n: usize, seed: u64) -> Check {
    let kappa = ConstantsProfile::practical().kappa;
    let mut rng = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..n {
        let inst = random_instance(&mut rng);
        let spec = HingeSpec::new(inst.tau, kappa).expect("positive");
        let out = match minimize_hinge(&labeled(&inst), &inst.ball, &spec, &ErmOptions::default(), &[], &mut rng) {
            Ok(o) => o,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let returned = own_hinge(&out.v, &inst.xs, &inst.ys, inst.tau);
        let d = inst.ball.dim();
        let scale = inst.ball.r.min(inst.ball.rho);
        let mut best = own_hinge(&inst.ball.center, &inst.xs, &inst.ys, inst.tau);
        for _ in 0..50 {
            let g = gaussian_vec(d, &mut rng);
            let len = rng.random_range(0.0..1.5) * scale / g.norm();
            let p = project_w_exact(&(&inst.ball.center + g * len), &inst.ball.center, inst.ball.r, inst.ball.rho);
            best = best.min(own_hinge(&p, &inst.xs, &inst.ys, inst.tau));
        }
        let beat = returned - best;
        worst = worst.max(beat);
        if beat > kappa {
            failures += 1;
        }
    }
    Check::new(
        "multi-start probe never beats the returned objective by more than kappa",
        failures == 0,
        format!("{n} random sets, largest probe advantage {worst:.4} (kappa {kappa:.4}), {failures} failures"),
    )
}

pub fn hinge_convexity(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut failures = 0;
    for _ in 0..n {
        let inst = random_instance(&mut rng);
        let set = labeled(&inst);
        let c = &inst.ball.center;
        let a = project_w_exact(&(c + gaussian_vec(c.len(), &mut rng)), c, inst.ball.r, inst.ball.rho);
        let b = project_w_exact(&(c + gaussian_vec(c.len(), &mut rng)), c, inst.ball.r, inst.ball.rho);
        let lam: f64 = rng.random_range(0.0..=1.0);
        let mid = &a * lam + &b * (1.0 - lam);
        let la = hinge_loss(&a, &set, inst.tau).expect("nonempty");
        let lb = hinge_loss(&b, &set, inst.tau).expect("nonempty");
        let lm = hinge_loss(&mid, &set, inst.tau).expect("nonempty");
        if lm > lam * la + (1.0 - lam) * lb + 1e-12 {
            failures += 1;
        }
    }
    Check::new("hinge loss convexity", failures == 0, format!("{n} random pairs, {failures} violations"))
}

pub fn finalize_examples() -> Check {
    let v = DVector::from_column_slice(&[3.0, 0.0, 4.0, 0.1]);
    let a = finalize_iterate(&v, 2).map(|w| (w - DVector::from_column_slice(&[0.6, 0.0, 0.8, 0.0])).norm() < 1e-15);
    let b = finalize_iterate(&DVector::zeros(3), 2).is_err();
    let passed = matches!(a, Ok(true)) && b;
    Check::new(
        "finalize iterate examples",
        passed,
        "(3, 0, 4, 0.1) with s = 2 gives (0.6, 0, 0.8, 0); zero input is rejected".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_projection_cases() {
        let c = DVector::zeros(2);
        let p = project_w_exact(&DVector::from_column_slice(&[2.0, 2.0]), &c, 1.0, 1.0);
        assert!((p - DVector::from_column_slice(&[0.5, 0.5])).norm() < 1e-12);
        let p = project_w_exact(&DVector::from_column_slice(&[3.0, 0.0]), &c, 1.0, 10.0);
        assert!((p - DVector::from_column_slice(&[1.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn admm_projection_example() {
        let y = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = project_m_admm(&y, 1.0, 1.0);
        assert!((p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-9);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((2.0 * std_normal_cdf(0.5) - 1.0 - 0.382_924_922_548_026).abs() < 1e-12);
        assert!((2.0 * std_normal_cdf(1.0) - 1.0 - 0.682_689_492_137_086).abs() < 1e-12);
    }
}
