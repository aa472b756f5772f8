use attrlearn_core::distributions::{sample, sample_band, Band, LogConcaveDist, LogConcaveKind};
use attrlearn_core::erm::{hinge_loss, importance_sample, LabeledSet};
use attrlearn_core::geometry::{
    entrywise_l1, hard_threshold, l1_norm, nnz, project_m, project_spectral, project_w, BallPair, DykstraOptions,
    MatBall,
};
use attrlearn_core::Error;
use attrlearn_core::learner::{schedule, ConstantsProfile, SizingPolicy};
use attrlearn_core::oracle::{AdversaryKind, AdversaryStrategy, GroundTruth, LearnerView, SimOracle};
use attrlearn_core::outlier::{
    certify_variance, find_weights, normalize, stack_rows, CertifyOptions, FindWeightsOptions, WeightMap,
    WeightOutcome,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dv(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<DVector<f64>> {
    let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample(&dist, &mut rng)).collect()
}

fn best_s_term_error(v: &DVector<f64>, s: usize) -> f64 {
    let d = v.len();
    (0u32..(1 << d))
        .filter(|m| m.count_ones() as usize <= s)
        .map(|m| (0..d).filter(|i| m & (1 << i) == 0).map(|i| v[i] * v[i]).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

fn ball_strategy() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (2usize..8).prop_flat_map(|d| (vec(-1.0f64..1.0, d), 0.1f64..2.0, 0.1f64..3.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hard_threshold_is_best_s_term(v in vec(-5.0f64..5.0, 1..=8), s_frac in 0.0f64..1.0) {
        let v = dv(&v);
        let s = 1 + ((v.len() - 1) as f64 * s_frac) as usize;
        let h = hard_threshold(&v, s).unwrap();
        prop_assert!(nnz(&h) <= s);
        prop_assert_eq!(hard_threshold(&h, s).unwrap(), h.clone());
        prop_assert!(((&h - &v).norm() - best_s_term_error(&v, s)).abs() <= 1e-12);
    }

    #[test]
    fn project_w_lands_in_set_and_is_nonexpansive(
        (center, r, rho) in ball_strategy(),
        a in vec(-4.0f64..4.0, 8),
        b in vec(-4.0f64..4.0, 8),
    ) {
        let d = center.len();
        let w = BallPair::new(dv(&center), r, rho).unwrap();
        let opts = DykstraOptions::default();
        let a = dv(&a[..d]);
        let b = dv(&b[..d]);
        let pa = project_w(&a, &w, &opts).unwrap();
        let pb = project_w(&b, &w, &opts).unwrap();
        prop_assert!(w.contains(&pa, 1e-6));
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-6);
        let again = project_w(&pa, &w, &opts).unwrap();
        prop_assert!((again - &pa).norm() <= 1e-6);
    }

    #[test]
    fn project_m_lands_in_set(entries in vec(-3.0f64..3.0, 16), r_sq in 0.1f64..2.0, ratio in 0.3f64..4.0) {
        let a = DMatrix::from_row_slice(4, 4, &entries);
        let y = (&a + a.transpose()) * 0.5;
        let m = MatBall::new(r_sq, r_sq * ratio).unwrap();
        match project_m(&y, &m, &DykstraOptions::default()) {
            Ok(p) => {
                let eig = SymmetricEigen::new(p.clone()).eigenvalues;
                prop_assert!(eig.min() >= -1e-6);
                prop_assert!(eig.sum() <= r_sq + 1e-6);
                prop_assert!(entrywise_l1(&p) <= r_sq * ratio + 1e-6);
            }
            // Sublinear convergence at tangential intersections: the last
            // iterate is ℓ₁-feasible and within the residual of the spectral set.
            Err(Error::MatrixSolver { residual, last, .. }) => {
                prop_assert!(entrywise_l1(&last) <= r_sq * ratio + 1e-9);
                prop_assert!((project_spectral(&last, r_sq) - &last).norm() <= residual + 1e-12);
                prop_assert!(residual < 1e-3);
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn hinge_loss_is_convex(seed in 0u64..1000, lam in 0.0f64..=1.0, tau in 0.01f64..1.0) {
        let rows = gaussian_rows(40, 5, seed);
        let labels: Vec<i8> = (0..40).map(|i| if (seed + i) % 3 == 0 { -1 } else { 1 }).collect();
        let set = LabeledSet::new(stack_rows(&rows), labels).unwrap();
        let pts = gaussian_rows(2, 5, seed + 1);
        let (a, b) = (&pts[0], &pts[1]);
        let mid = a * lam + b * (1.0 - lam);
        let la = hinge_loss(a, &set, tau).unwrap();
        let lb = hinge_loss(b, &set, tau).unwrap();
        prop_assert!(hinge_loss(&mid, &set, tau).unwrap() <= lam * la + (1.0 - lam) * lb + 1e-12);
    }

    #[test]
    fn schedule_identities(s in 1usize..10, d_extra in 0usize..2000, k in 1usize..8, delta in 0.01f64..0.5) {
        let d = s + d_extra;
        let profile = ConstantsProfile::practical();
        let sizing = SizingPolicy::default();
        let eps = 1e-4;
        let p = schedule(k, s, d, eps, delta, &profile, &sizing).unwrap();
        let q = schedule(k + 1, s, d, eps, delta, &profile, &sizing).unwrap();
        prop_assert_eq!(q.b * 2.0, p.b);
        if k >= 2 {
            prop_assert_eq!(q.r * 2.0, p.r);
            prop_assert_eq!(q.rho * 2.0, p.rho);
        }
        prop_assert!(p.xi > 0.0 && p.xi <= 0.5);
        prop_assert!(p.tau <= profile.c[0] * profile.kappa / 9.0);
        prop_assert!(q.delta < p.delta);
        prop_assert!(p.n >= 1 && p.m >= 1);
        prop_assert!(p.n_budget as f64 >= p.n as f64);
    }

    #[test]
    fn certificate_dominates_feasible_directions(seed in 0u64..500, r in 0.3f64..1.5, rho_frac in 0.0f64..1.0) {
        let d = 6;
        let rho = r * (1.0 + rho_frac * ((d as f64).sqrt() - 1.0));
        let rows = gaussian_rows(30, d, seed);
        let points = stack_rows(&rows);
        let q = WeightMap::new((0..30).map(|i| ((i * 7 + seed as usize) % 10) as f64 / 9.0).collect()).unwrap();
        let m = MatBall::new(r * r, rho * rho).unwrap();
        let cert = certify_variance(&points, &q, &m, &CertifyOptions::default()).unwrap();
        // Any v with ‖v‖₂ ≤ r and ‖v‖₁ ≤ ρ gives vvᵀ ∈ M, so its variance is a lower bound.
        for v in gaussian_rows(20, d, seed + 10_000) {
            let n = v.norm();
            let mut v = v * (r / n);
            let l1 = l1_norm(&v);
            if l1 > rho {
                v *= rho / l1;
            }
            let var: f64 = rows.iter().zip(q.weights()).map(|(x, w)| w * x.dot(&v).powi(2)).sum::<f64>() / 30.0;
            prop_assert!(var <= cert.value + 1e-9, "variance {} above certificate {}", var, cert.value);
        }
    }

    #[test]
    fn band_draws_stay_in_band(seed in 0u64..1000, b in 0.01f64..1.0, kind_ix in 0usize..4) {
        let kind = LogConcaveKind::ALL[kind_ix];
        let dist = LogConcaveDist::new(kind, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = gaussian_rows(1, 5, seed)[0].clone();
        let band = Band::new(&u / u.norm(), b).unwrap();
        let draw = sample_band(&dist, &band, &mut rng, 100_000).unwrap();
        prop_assert!(band.contains(&draw.x));
        prop_assert!(draw.attempts >= 1);
    }

    #[test]
    fn committed_labels_never_change(seed in 0u64..200, eta in 0.0f64..0.45, kind_ix in 0usize..5) {
        let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = GroundTruth::random(dist, 2, &mut rng).unwrap();
        let strategy = AdversaryStrategy::of_kind(AdversaryKind::ALL[kind_ix]);
        let mut oracle = SimOracle::new(gt, eta, strategy).unwrap();
        let view = LearnerView::initial(8);
        let ids: Vec<_> = (0..30).map(|_| oracle.next_instance(&view, None, 1, &mut rng).unwrap().id).collect();
        let first: Vec<i8> = ids.iter().map(|&id| oracle.reveal_label(id)).collect();
        let second: Vec<i8> = ids.iter().map(|&id| oracle.reveal_label(id)).collect();
        prop_assert_eq!(first, second);
        prop_assert_eq!(oracle.label_queries(), 60);
        prop_assert_eq!(oracle.distinct_labels(), 30);
        prop_assert_eq!(oracle.sample_calls(), 30);
    }
}

#[test]
fn importance_sample_matches_weights() {
    let q = normalize(&WeightMap::new(vec![1.0, 0.5, 0.25, 0.25]).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = importance_sample(&q, 40_000, &mut rng).unwrap();
    let mut counts = [0usize; 4];
    for i in draws {
        counts[i] += 1;
    }
    for (c, p) in counts.iter().zip([0.5, 0.25, 0.125, 0.125]) {
        assert!((*c as f64 / 40_000.0 - p).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn clean_batch_keeps_nearly_all_weight() {
    let rows = gaussian_rows(500, 20, 3);
    let m = MatBall::new(1.0, 3.0).unwrap();
    match find_weights(&stack_rows(&rows), 0.05, &m, 0.25, 5.0, &FindWeightsOptions::default()).unwrap() {
        WeightOutcome::Feasible(r) => assert!(r.q.total() / 500.0 >= 0.95),
        WeightOutcome::Infeasible(r) => panic!("infeasible after {} cuts", r.cuts),
    }
}

#[test]
fn distant_point_is_down_weighted() {
    let mut rows = gaussian_rows(199, 10, 4);
    let mut far = DVector::zeros(10);
    far[3] = -500.0;
    rows.push(far);
    let m = MatBall::new(1.0, 3.0).unwrap();
    match find_weights(&stack_rows(&rows), 0.02, &m, 0.125, 5.0, &FindWeightsOptions::default()).unwrap() {
        WeightOutcome::Feasible(r) => assert!(r.q.weights()[199] <= 0.1),
        WeightOutcome::Infeasible(r) => panic!("infeasible after {} cuts", r.cuts),
    }
}

#[test]
fn isotropy_of_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in LogConcaveKind::ALL {
        let dist = LogConcaveDist::new(kind, 2).unwrap();
        let n = 50_000;
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        let mut mean = DVector::<f64>::zeros(2);
        for _ in 0..n {
            let x = sample(&dist, &mut rng);
            cov += &x * x.transpose();
            mean += x;
        }
        cov /= n as f64;
        mean /= n as f64;
        assert!(mean.amax() < 0.03, "{kind}: mean {mean}");
        assert!((cov[(0, 0)] - 1.0).abs() < 0.05 && (cov[(1, 1)] - 1.0).abs() < 0.05, "{kind}: {cov}");
        assert!(cov[(0, 1)].abs() < 0.03, "{kind}: {cov}");
    }
}

#[test]
fn tangential_projection_converges_with_larger_budget() {
    let e = [
        1.5978467227926376, 1.0931050649885479, -1.8361928505387626, -1.0742277811772172,
        -1.4751992048561553, 0.0, 0.3201327438832641, -2.998926747837309,
        -2.9989143246829317, 2.1562862578694966, 0.0, -0.5283350358832781,
        1.8199177136193452, 0.0, -0.8915363368096956, 0.0,
    ];
    let a = DMatrix::from_row_slice(4, 4, &e);
    let y = (&a + a.transpose()) * 0.5;
    let m = MatBall::new(0.1, 0.1 * 2.0381349536509386).unwrap();
    assert!(project_m(&y, &m, &DykstraOptions::default()).is_err());
    let p = project_m(&y, &m, &DykstraOptions { max_iter: 2_000_000, tol: 1e-8 }).unwrap();
    assert!(m.contains(&p, 1e-6));
}
