use attrlearn_core::distributions::{LogConcaveDist, LogConcaveKind};
use attrlearn_core::learner::{learn_active, learn_passive, LearnerConfig, Problem, RngStreams};
use attrlearn_core::oracle::{AdversaryKind, AdversaryStrategy, GroundTruth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn streams(seed: u64) -> RngStreams<ChaCha8Rng> {
    let mk = |stream| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };
    RngStreams { oracle: mk(1), learner: mk(2), diag: mk(3) }
}

fn problem(d: usize, s: usize, eps: f64, eta: f64, seed: u64) -> Problem {
    let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let gt = GroundTruth::random(dist, s, &mut rng).unwrap();
    Problem { gt, eps, delta: 0.1, eta, adversary: AdversaryStrategy::of_kind(AdversaryKind::FarCluster) }
}

#[test]
fn small_noiseless_run_learns() {
    let cfg = LearnerConfig::default();
    let p = problem(20, 2, 0.1, 0.0, 7);
    let report = learn_active(&p, &cfg, &mut streams(7)).unwrap();
    assert!(report.est_error <= 0.1, "{}", report.est_error);
    let m: u64 = report.phases.iter().map(|r| r.params.m as u64).sum();
    assert_eq!(report.labels, m);
    assert!(report.w.iter().filter(|v| **v != 0.0).count() <= 2);
}

#[test]
fn passive_matches_active_on_shared_streams() {
    let cfg = LearnerConfig::default();
    let p = problem(20, 2, 0.1, 0.0, 3);
    let a = learn_active(&p, &cfg, &mut streams(3)).unwrap();
    let b = learn_passive(&p, &cfg, &mut streams(3)).unwrap();
    assert_eq!(a.w, b.w);
    assert_eq!(b.labels, b.sample_calls);
}

#[test]
fn lazy_adversary_is_no_worse_than_far_cluster() {
    let cfg = LearnerConfig::default();
    let (mut lazy, mut far) = (0.0, 0.0);
    for seed in 1..=5 {
        let mut p = problem(20, 2, 0.1, 0.1, seed);
        far += learn_active(&p, &cfg, &mut streams(seed)).unwrap().est_error;
        p.adversary = AdversaryStrategy::of_kind(AdversaryKind::None);
        lazy += learn_active(&p, &cfg, &mut streams(seed)).unwrap().est_error;
    }
    eprintln!("lazy {lazy:.4} far {far:.4}");
    assert!(lazy <= far, "lazy {lazy} far {far}");
}
