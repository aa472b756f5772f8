//! Malicious-noise example generator.
//!
//! [`SimOracle`] plays both the instance oracle and the label-revealing
//! oracle. With probability `1 − η` a call returns a clean draw labeled by
//! the target halfspace; with probability `η` the configured adversary picks
//! the pair. Labels are committed when the instance is generated.
//!
//! The learner sees an [`Instance`] (an id and a point) and asks for labels by
//! id. Cleanliness tags are only reachable through [`SimOracle::diag_is_clean`],
//! which exists for reporting.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::distributions::{sample, sample_band, Band, LogConcaveDist};
use crate::error::{Error, Result};
use crate::geometry::nnz;

/// `sign(0) = +1`.
pub fn sign(t: f64) -> i8 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    w_star: DVector<f64>,
    s: usize,
    dist: LogConcaveDist,
}

impl GroundTruth {
    pub fn new(w_star: DVector<f64>, s: usize, dist: LogConcaveDist) -> Result<Self> {
        if w_star.len() != dist.dim {
            return Err(Error::param("w_star", "dimension differs from the distribution"));
        }
        if (w_star.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::param("w_star", "must have unit l2 norm"));
        }
        if s < 1 || nnz(&w_star) > s {
            return Err(Error::param("w_star", "must be s-sparse"));
        }
        Ok(GroundTruth { w_star, s, dist })
    }

    /// A target with `s` nonzeros at uniformly chosen coordinates, Gaussian
    /// magnitudes, unit norm.
    pub fn random<R: Rng + ?Sized>(dist: LogConcaveDist, s: usize, rng: &mut R) -> Result<Self> {
        let d = dist.dim;
        if s < 1 || s > d {
            return Err(Error::param("s", "must lie in 1..=d"));
        }
        let support = rand::seq::index::sample(rng, d, s);
        let mut w = DVector::zeros(d);
        for i in support.iter() {
            let mut g: f64 = StandardNormal.sample(rng);
            while g.abs() < 1e-3 {
                g = StandardNormal.sample(rng);
            }
            w[i] = g;
        }
        let norm = w.norm();
        w /= norm;
        // Renormalize once more so the unit-norm check holds to rounding.
        let norm = w.norm();
        w /= norm;
        GroundTruth::new(w, s, dist)
    }

    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn dist(&self) -> &LogConcaveDist {
        &self.dist
    }

    pub fn label(&self, x: &DVector<f64>) -> i8 {
        sign(self.w_star.dot(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedExample {
    pub x: DVector<f64>,
    pub committed_label: i8,
    pub clean: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversaryKind {
    /// Dirty draws are ordinary draws with correct labels.
    None,
    LabelFlipInBand,
    FarCluster,
    AntipodalInBand,
    Mixed,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 5] = [
        AdversaryKind::None,
        AdversaryKind::LabelFlipInBand,
        AdversaryKind::FarCluster,
        AdversaryKind::AntipodalInBand,
        AdversaryKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::None => "none",
            AdversaryKind::LabelFlipInBand => "label_flip_in_band",
            AdversaryKind::FarCluster => "far_cluster",
            AdversaryKind::AntipodalInBand => "antipodal_in_band",
            AdversaryKind::Mixed => "mixed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A parametric adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryStrategy {
    pub kind: AdversaryKind,
    /// far_cluster: ℓ∞ magnitude of the cluster as a multiple of the pruning
    /// radius (or of 10 when the radius is unknown).
    pub cluster_scale: f64,
    /// label_flip_in_band: only flip points with `|w*·x| ≤ flip_margin`;
    /// zero flips every draw.
    pub flip_margin: f64,
    /// antipodal_in_band: ℓ₂ magnitude of the ±v pair.
    pub antipodal_scale: f64,
    /// Isotropic Gaussian jitter added to constructed dirty points.
    pub jitter: f64,
    /// mixed: weights over (label_flip, far_cluster, antipodal).
    pub mixture: [f64; 3],
}

impl Default for AdversaryStrategy {
    fn default() -> Self {
        AdversaryStrategy {
            kind: AdversaryKind::None,
            cluster_scale: 0.5,
            flip_margin: 0.0,
            antipodal_scale: 20.0,
            jitter: 0.05,
            mixture: [1.0, 1.0, 1.0],
        }
    }
}

impl AdversaryStrategy {
    pub fn of_kind(kind: AdversaryKind) -> Self {
        AdversaryStrategy {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.cluster_scale) {
            return Err(Error::param("adversary.cluster_scale", "must be finite and non-negative"));
        }
        if !finite_nonneg(self.flip_margin) {
            return Err(Error::param("adversary.flip_margin", "must be finite and non-negative"));
        }
        if !finite_nonneg(self.antipodal_scale) {
            return Err(Error::param("adversary.antipodal_scale", "must be finite and non-negative"));
        }
        if !finite_nonneg(self.jitter) {
            return Err(Error::param("adversary.jitter", "must be finite and non-negative"));
        }
        if !self.mixture.iter().all(|w| finite_nonneg(*w)) || self.mixture.iter().sum::<f64>() <= 0.0 {
            return Err(Error::param("adversary.mixture", "weights must be non-negative with positive sum"));
        }
        Ok(())
    }
}

/// What the adversary may observe about the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerView {
    pub current_w: DVector<f64>,
    pub current_band: Option<Band>,
    pub phase: usize,
    pub prune_radius: Option<f64>,
}

impl LearnerView {
    pub fn initial(dim: usize) -> Self {
        LearnerView {
            current_w: DVector::zeros(dim),
            current_band: None,
            phase: 0,
            prune_radius: None,
        }
    }
}

/// `min(1, 2η/(c8·b))`, the bound on the dirty fraction inside a band.
pub fn band_noise_rate_estimate(eta: f64, c8: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) || !(c8 > 0.0) {
        return Err(Error::param("band_noise_rate_estimate", "b and c8 must be positive"));
    }
    Ok((2.0 * eta / (c8 * b)).min(1.0))
}

fn jitter<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    if scale == 0.0 {
        return DVector::zeros(d);
    }
    DVector::from_fn(d, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        scale * g
    })
}

/// A coordinate outside the target's support, for building dirty directions.
fn off_support_coord(w_star: &DVector<f64>) -> usize {
    (0..w_star.len()).find(|&i| w_star[i] == 0.0).unwrap_or(0)
}

fn strongest_coord(w: &DVector<f64>) -> usize {
    w.iamax()
}

fn in_band(x: DVector<f64>, band: Option<&Band>) -> DVector<f64> {
    match band {
        Some(b) => b.clamp_into(&x),
        None => x,
    }
}

fn clean_draw<R: Rng + ?Sized>(
    dist: &LogConcaveDist,
    band: Option<&Band>,
    max_rejects: u64,
    rng: &mut R,
) -> Result<(DVector<f64>, u64)> {
    match band {
        Some(b) => sample_band(dist, b, rng, max_rejects).map(|d| (d.x, d.attempts)),
        None => Ok((sample(dist, rng), 1)),
    }
}

fn dirty_example<R: Rng + ?Sized>(
    gt: &GroundTruth,
    strategy: &AdversaryStrategy,
    kind: AdversaryKind,
    view: &LearnerView,
    band: Option<&Band>,
    max_rejects: u64,
    rng: &mut R,
) -> Result<TaggedExample> {
    let d = gt.dist.dim;
    let w_star = &gt.w_star;
    let (x, label) = match kind {
        AdversaryKind::None => {
            let (x, _) = clean_draw(&gt.dist, band, max_rejects, rng)?;
            let y = gt.label(&x);
            (x, y)
        }
        AdversaryKind::LabelFlipInBand => {
            let (mut x, _) = clean_draw(&gt.dist, band, max_rejects, rng)?;
            if strategy.flip_margin > 0.0 {
                let mut tries = 1;
                while w_star.dot(&x).abs() > strategy.flip_margin && tries < max_rejects {
                    x = clean_draw(&gt.dist, band, max_rejects, rng)?.0;
                    tries += 1;
                }
            }
            let y = -gt.label(&x);
            (x, y)
        }
        AdversaryKind::FarCluster => {
            let radius = view.prune_radius.unwrap_or(10.0);
            let mag = strategy.cluster_scale * radius;
            let i0 = strongest_coord(w_star);
            let j = off_support_coord(w_star);
            let mut c = DVector::zeros(d);
            c[j] = mag;
            c[i0] = mag * w_star[i0].signum();
            let x = in_band(c + jitter(d, strategy.jitter, rng), band);
            let y = -gt.label(&x);
            (x, y)
        }
        AdversaryKind::AntipodalInBand => {
            let j = off_support_coord(w_star);
            let mut v = w_star.clone();
            v[j] += 1.0;
            let u = &view.current_w;
            let un = u.norm();
            if un > 0.0 {
                let proj = u.dot(&v) / (un * un);
                v -= u * proj;
            }
            let vn = v.norm();
            if vn <= 1e-12 {
                v = DVector::zeros(d);
                v[j] = 1.0;
            } else {
                v /= vn;
            }
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let x = in_band(v * (side * strategy.antipodal_scale) + jitter(d, strategy.jitter, rng), band);
            let y = -gt.label(&x);
            (x, y)
        }
        AdversaryKind::Mixed => {
            let total: f64 = strategy.mixture.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = AdversaryKind::AntipodalInBand;
            for (w, k) in strategy.mixture.iter().zip([
                AdversaryKind::LabelFlipInBand,
                AdversaryKind::FarCluster,
                AdversaryKind::AntipodalInBand,
            ]) {
                if pick < *w {
                    chosen = k;
                    break;
                }
                pick -= w;
            }
            return dirty_example(gt, strategy, chosen, view, band, max_rejects, rng);
        }
    };
    Ok(TaggedExample {
        x,
        committed_label: label,
        clean: false,
    })
}

/// One call to the instance oracle. Returns the example and the number of
/// underlying oracle calls spent (rejected clean draws count).
pub fn next_instance<R: Rng + ?Sized>(
    gt: &GroundTruth,
    eta: f64,
    strategy: &AdversaryStrategy,
    view: &LearnerView,
    band: Option<&Band>,
    max_rejects: u64,
    rng: &mut R,
) -> Result<(TaggedExample, u64)> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::param("eta", "noise rate must lie in [0, 1/2)"));
    }
    // The coin is drawn even at eta = 0 so streams line up across noise rates.
    let dirty = rng.random::<f64>() < eta;
    if dirty {
        let ex = dirty_example(gt, strategy, strategy.kind, view, band, max_rejects, rng)?;
        return Ok((ex, 1));
    }
    let (x, calls) = clean_draw(&gt.dist, band, max_rejects, rng)?;
    let committed_label = gt.label(&x);
    Ok((
        TaggedExample {
            x,
            committed_label,
            clean: true,
        },
        calls,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExampleId(pub usize);

/// The learner-facing part of a generated example.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: ExampleId,
    pub x: DVector<f64>,
}

/// A stateful simulation of both oracles for one run.
#[derive(Debug, Clone)]
pub struct SimOracle {
    gt: GroundTruth,
    eta: f64,
    strategy: AdversaryStrategy,
    examples: Vec<TaggedExample>,
    revealed: Vec<bool>,
    sample_calls: u64,
    label_queries: u64,
    distinct_labels: u64,
}

impl SimOracle {
    pub fn new(gt: GroundTruth, eta: f64, strategy: AdversaryStrategy) -> Result<Self> {
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::param("eta", "noise rate must lie in [0, 1/2)"));
        }
        strategy.validate()?;
        Ok(SimOracle {
            gt,
            eta,
            strategy,
            examples: Vec::new(),
            revealed: Vec::new(),
            sample_calls: 0,
            label_queries: 0,
            distinct_labels: 0,
        })
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.gt
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn next_instance<R: Rng + ?Sized>(
        &mut self,
        view: &LearnerView,
        band: Option<&Band>,
        max_rejects: u64,
        rng: &mut R,
    ) -> Result<Instance> {
        let (ex, calls) = next_instance(&self.gt, self.eta, &self.strategy, view, band, max_rejects, rng)?;
        self.sample_calls += calls;
        let id = ExampleId(self.examples.len());
        let x = ex.x.clone();
        self.examples.push(ex);
        self.revealed.push(false);
        Ok(Instance { id, x })
    }

    /// Label-revealing oracle. Every call counts as a query; the distinct
    /// counter moves once per example.
    pub fn reveal_label(&mut self, id: ExampleId) -> i8 {
        self.label_queries += 1;
        if !self.revealed[id.0] {
            self.revealed[id.0] = true;
            self.distinct_labels += 1;
        }
        self.examples[id.0].committed_label
    }

    /// Label that arrived together with the instance (passive access).
    pub fn passive_label(&self, id: ExampleId) -> i8 {
        self.examples[id.0].committed_label
    }

    pub fn sample_calls(&self) -> u64 {
        self.sample_calls
    }

    pub fn label_queries(&self) -> u64 {
        self.label_queries
    }

    pub fn distinct_labels(&self) -> u64 {
        self.distinct_labels
    }

    pub fn generated(&self) -> usize {
        self.examples.len()
    }

    /// Diagnostic access to the hidden cleanliness tag.
    pub fn diag_is_clean(&self, id: ExampleId) -> bool {
        self.examples[id.0].clean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::LogConcaveKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn truth(d: usize, s: usize, seed: u64) -> GroundTruth {
        let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, d).unwrap();
        GroundTruth::random(dist, s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_noise_is_realizable() {
        let gt = truth(5, 2, 1);
        let mut oracle = SimOracle::new(gt.clone(), 0.0, AdversaryStrategy::of_kind(AdversaryKind::FarCluster)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let view = LearnerView::initial(5);
        for _ in 0..1000 {
            let inst = oracle.next_instance(&view, None, 10, &mut rng).unwrap();
            assert!(oracle.diag_is_clean(inst.id));
            assert_eq!(oracle.reveal_label(inst.id), sign(gt.w_star().dot(&inst.x)));
        }
    }

    #[test]
    fn labels_are_committed() {
        let gt = truth(4, 2, 3);
        let mut oracle = SimOracle::new(gt, 0.3, AdversaryStrategy::of_kind(AdversaryKind::LabelFlipInBand)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = oracle.next_instance(&LearnerView::initial(4), None, 10, &mut rng).unwrap();
        let a = oracle.reveal_label(inst.id);
        let b = oracle.reveal_label(inst.id);
        assert_eq!(a, b);
        assert_eq!(oracle.distinct_labels(), 1);
        assert_eq!(oracle.label_queries(), 2);
    }

    #[test]
    fn clean_label_for_positive_side() {
        let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, 2).unwrap();
        let gt = GroundTruth::new(DVector::from_column_slice(&[1.0, 0.0]), 1, dist).unwrap();
        assert_eq!(gt.label(&DVector::from_column_slice(&[0.3, -5.0])), 1);
        assert_eq!(gt.label(&DVector::from_column_slice(&[0.0, -5.0])), 1);
    }

    #[test]
    fn eta_range_enforced() {
        let gt = truth(3, 1, 0);
        assert!(SimOracle::new(gt.clone(), 0.6, AdversaryStrategy::default()).is_err());
        assert!(SimOracle::new(gt, 0.5, AdversaryStrategy::default()).is_err());
    }

    #[test]
    fn dirty_points_respect_band() {
        let gt = truth(6, 2, 5);
        let band = Band::new(gt.w_star().clone(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in AdversaryKind::ALL {
            let strategy = AdversaryStrategy::of_kind(kind);
            let view = LearnerView {
                current_w: gt.w_star().clone(),
                current_band: Some(band.clone()),
                phase: 2,
                prune_radius: Some(30.0),
            };
            for _ in 0..200 {
                let (ex, _) = next_instance(&gt, 0.45, &strategy, &view, Some(&band), 100_000, &mut rng).unwrap();
                assert!(band.contains(&ex.x), "{kind:?}");
                assert!(ex.x.iter().all(|v| v.is_finite()));
                if ex.clean {
                    assert_eq!(ex.committed_label, gt.label(&ex.x));
                }
            }
        }
    }

    #[test]
    fn band_noise_bound_formula() {
        assert_eq!(band_noise_rate_estimate(0.0, 0.5, 0.2).unwrap(), 0.0);
        assert!((band_noise_rate_estimate(0.01, 0.5, 0.2).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(band_noise_rate_estimate(0.4, 0.5, 0.2).unwrap(), 1.0);
        assert!(band_noise_rate_estimate(0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn random_truth_is_in_concept_class() {
        for seed in 0..20 {
            let gt = truth(30, 4, seed);
            assert!((gt.w_star().norm() - 1.0).abs() <= 1e-12);
            assert_eq!(nnz(gt.w_star()), 4);
        }
    }
}
