//! Importance sampling of the labeled set and constrained τ-hinge
//! minimization over `W = B2(center, r) ∩ B1(center, ρ)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{hard_threshold, project_w, BallPair, DykstraOptions};
use crate::outlier::WeightMap;

/// Labeled examples stored as the rows of `x` with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    x: DMatrix<f64>,
    y: Vec<f64>,
}

impl LabeledSet {
    pub fn new(x: DMatrix<f64>, y: Vec<i8>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::param("S", "one label per example"));
        }
        if y.iter().any(|&l| l != 1 && l != -1) {
            return Err(Error::param("S", "labels must be ±1"));
        }
        Ok(LabeledSet {
            x,
            y: y.into_iter().map(f64::from).collect(),
        })
    }

    pub fn from_examples(examples: &[(DVector<f64>, i8)]) -> Result<Self> {
        let d = examples.first().map_or(0, |e| e.0.len());
        if examples.iter().any(|e| e.0.len() != d) {
            return Err(Error::param("S", "examples differ in dimension"));
        }
        let x = DMatrix::from_fn(examples.len(), d, |i, j| examples[i].0[j]);
        LabeledSet::new(x, examples.iter().map(|e| e.1).collect())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn instances(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn label(&self, i: usize) -> i8 {
        self.y[i] as i8
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeSpec {
    pub tau: f64,
    pub kappa: f64,
}

impl HingeSpec {
    pub fn new(tau: f64, kappa: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", "must be positive"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", "must be positive"));
        }
        Ok(HingeSpec { tau, kappa })
    }
}

/// `m` i.i.d. indices drawn from the normalized weights of `p`.
pub fn importance_sample<R: Rng + ?Sized>(p: &WeightMap, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    let probs = p
        .normalized()
        .ok_or_else(|| Error::param("p", "weights are not normalized"))?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param("p", "normalized weights do not sum to 1"));
    }
    if m < 1 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let index = WeightedIndex::new(probs).map_err(|e| Error::param("p", alloc::format!("{e}")))?;
    Ok((0..m).map(|_| index.sample(rng)).collect())
}

fn margins(w: &DVector<f64>, set: &LabeledSet) -> DVector<f64> {
    let mut z = &set.x * w;
    for (zi, yi) in z.iter_mut().zip(&set.y) {
        *zi *= yi;
    }
    z
}

fn loss_from_margins(z: &DVector<f64>, tau: f64) -> f64 {
    z.iter().map(|zi| (1.0 - zi / tau).max(0.0)).sum::<f64>() / z.len() as f64
}

/// `(1/|S|) Σ max{0, 1 − y(w·x)/τ}`.
pub fn hinge_loss(w: &DVector<f64>, set: &LabeledSet, tau: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::param("S", "labeled set must be nonempty"));
    }
    if !(tau > 0.0) {
        return Err(Error::param("tau", "must be positive"));
    }
    if w.len() != set.dim() {
        return Err(Error::param("w", "dimension differs from the examples"));
    }
    Ok(loss_from_margins(&margins(w, set), tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmOptions {
    pub max_iter: usize,
    pub probes: usize,
    pub dykstra: DykstraOptions,
}

impl Default for ErmOptions {
    fn default() -> Self {
        ErmOptions {
            max_iter: 20_000,
            probes: 50,
            dykstra: DykstraOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmOutcome {
    pub v: DVector<f64>,
    pub loss: f64,
    /// Lowest objective among the multi-start probe points.
    pub probe_best: f64,
    pub iterations: usize,
}

/// Projected subgradient descent with doubling-epoch averaging, followed by
/// the multi-start probe check. `anchors` are extra probe points (projected
/// onto `W` first).
pub fn minimize_hinge<R: Rng + ?Sized>(
    set: &LabeledSet,
    w: &BallPair,
    spec: &HingeSpec,
    opts: &ErmOptions,
    anchors: &[DVector<f64>],
    rng: &mut R,
) -> Result<ErmOutcome> {
    if set.is_empty() {
        return Err(Error::param("S", "labeled set must be nonempty"));
    }
    if w.dim() != set.dim() {
        return Err(Error::param("W", "dimension differs from the examples"));
    }
    let tau = spec.tau;
    let m = set.len() as f64;
    let radius = w.diameter();
    let g_bound = set.x.row_iter().map(|r| r.norm()).fold(0.0f64, f64::max) / tau;

    let mut cur = project_w(&w.center, w, &opts.dykstra)?;
    let mut best_v = cur.clone();
    let mut best = loss_from_margins(&margins(&cur, set), tau);
    let mut iterations = 0;

    if radius > 0.0 && g_bound > 0.0 && best > 0.0 {
        let mut epoch_len = 1usize;
        let mut epoch_sum = DVector::zeros(w.dim());
        let mut epoch_count = 0usize;
        let mut best_at_epoch_start = best;
        for t in 1..=opts.max_iter {
            iterations = t;
            let z = margins(&cur, set);
            let loss = loss_from_margins(&z, tau);
            if loss < best {
                best = loss;
                best_v = cur.clone();
            }
            if best == 0.0 {
                break;
            }
            let coeff = DVector::from_fn(set.len(), |i, _| {
                if 1.0 - z[i] / tau > 0.0 {
                    -set.y[i] / (tau * m)
                } else {
                    0.0
                }
            });
            let grad = set.x.tr_mul(&coeff);
            let step = radius / (g_bound * libm::sqrt(t as f64));
            cur = project_w(&(&cur - grad * step), w, &opts.dykstra)?;
            epoch_sum += &cur;
            epoch_count += 1;
            if epoch_count == epoch_len {
                let avg = &epoch_sum / epoch_count as f64;
                let avg_loss = loss_from_margins(&margins(&avg, set), tau);
                if avg_loss < best {
                    best = avg_loss;
                    best_v = avg;
                }
                if epoch_len >= 256 && best_at_epoch_start - best < spec.kappa / 50.0 {
                    break;
                }
                best_at_epoch_start = best;
                epoch_len *= 2;
                epoch_sum.fill(0.0);
                epoch_count = 0;
            }
        }
    }

    let probe_best = probe(set, w, tau, opts, anchors, rng)?;
    if best > probe_best + spec.kappa {
        return Err(Error::ErmContract {
            loss: best,
            probe: probe_best,
            kappa: spec.kappa,
            best: best_v,
        });
    }
    Ok(ErmOutcome {
        v: best_v,
        loss: best,
        probe_best,
        iterations,
    })
}

/// Best objective over the center, the anchors and random feasible points.
pub fn probe<R: Rng + ?Sized>(
    set: &LabeledSet,
    w: &BallPair,
    tau: f64,
    opts: &ErmOptions,
    anchors: &[DVector<f64>],
    rng: &mut R,
) -> Result<f64> {
    let d = w.dim();
    let scale = w.r.min(w.rho);
    let mut best = hinge_loss(&w.center, set, tau)?;
    for a in anchors {
        let p = project_w(a, w, &opts.dykstra)?;
        best = best.min(hinge_loss(&p, set, tau)?);
    }
    for _ in 0..opts.probes {
        let g = DVector::from_fn(d, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z
        });
        let len: f64 = rng.random_range(0.0..1.5);
        let norm = g.norm();
        let dir = if norm > 0.0 { g * (scale * len / norm) } else { g };
        let p = project_w(&(&w.center + dir), w, &opts.dykstra)?;
        best = best.min(hinge_loss(&p, set, tau)?);
    }
    Ok(best)
}

/// `H_s(v) / ‖H_s(v)‖₂`.
pub fn finalize_iterate(v: &DVector<f64>, s: usize) -> Result<DVector<f64>> {
    let h = hard_threshold(v, s)?;
    let norm = h.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateIterate);
    }
    Ok(h / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outlier::normalize;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn hinge_examples() {
        let s = LabeledSet::from_examples(&[(v(&[1.0, 0.0]), 1), (v(&[0.0, 1.0]), -1)]).unwrap();
        assert_eq!(hinge_loss(&v(&[1.0, -1.0]), &s, 0.5).unwrap(), 0.0);
        assert_eq!(hinge_loss(&v(&[0.0, 0.0]), &s, 0.5).unwrap(), 1.0);
        let one = LabeledSet::from_examples(&[(v(&[0.0, 1.0]), 1)]).unwrap();
        assert_eq!(hinge_loss(&v(&[1.0, 0.0]), &one, 0.3).unwrap(), 1.0);
        let empty = LabeledSet::new(DMatrix::zeros(0, 2), Vec::new()).unwrap();
        assert!(hinge_loss(&v(&[1.0, 0.0]), &empty, 0.3).is_err());
    }

    #[test]
    fn finalize_examples() {
        let out = finalize_iterate(&v(&[3.0, 0.0, 4.0, 0.1]), 2).unwrap();
        assert!((out - v(&[0.6, 0.0, 0.8, 0.0])).norm() < 1e-15);
        let unit = v(&[0.0, 1.0, 0.0]);
        assert_eq!(finalize_iterate(&unit, 1).unwrap(), unit);
        assert!(matches!(finalize_iterate(&v(&[0.0, 0.0]), 1), Err(Error::DegenerateIterate)));
    }

    #[test]
    fn point_mass_sampling() {
        let p = normalize(&WeightMap::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        let idx = importance_sample(&p, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(idx, vec![0; 5]);
        assert!(importance_sample(&WeightMap::ones(3), 5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn one_point_disk() {
        let s = LabeledSet::from_examples(&[(v(&[1.0, 0.0]), 1)]).unwrap();
        let w = BallPair::new(v(&[0.0, 0.0]), 1.0, libm::sqrt(2.0)).unwrap();
        let spec = HingeSpec::new(0.5, 0.135).unwrap();
        let out = minimize_hinge(&s, &w, &spec, &ErmOptions::default(), &[], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(out.loss <= 1e-12);
        assert!(out.v[0] >= 0.5 - 1e-9);
    }
}
