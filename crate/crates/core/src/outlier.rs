//! Soft outlier removal.
//!
//! [`find_weights`] looks for `q : T → [0, 1]` with near-full mass whose
//! reweighted second moment is small over the relaxed sparse-PCA set
//! `M = {H ⪰ 0, ‖H‖* ≤ r², ‖H‖₁ ≤ ρ²}`:
//!
//! 1. `0 ≤ q(x) ≤ 1`;
//! 2. `Σ q(x) ≥ (1 − ξ)|T|`;
//! 3. `sup_{H ∈ M} (1/|T|) Σ q(x) xᵀHx ≤ C(b² + r²)`.
//!
//! Constraint 3 is checked by [`certify_variance`], which acts as the
//! separation oracle of a multiplicative-weights cutting-plane loop. The
//! certified value is an upper bound obtained from the Lagrangian dual
//!
//! ```text
//! sup_{H ∈ M} ⟨Σ, H⟩ ≤ r²·max(0, λmax(Σ − U)) + ρ²·max|U_ij|   for every symmetric U,
//! ```
//!
//! and the witness is a feasible `H` found by projected gradient ascent, so
//! the true supremum lies in `[⟨Σ, witness⟩, value]`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{entrywise_l1, l1_norm, project_m, project_spectral, DykstraOptions, MatBall};

/// Weights `q` over a batch, optionally with the normalized distribution
/// `p = q / Σq`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    weights: Vec<f64>,
    normalized: Option<Vec<f64>>,
}

impl WeightMap {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::param("q", "weights must lie in [0, 1]"));
        }
        Ok(WeightMap {
            weights,
            normalized: None,
        })
    }

    pub fn ones(n: usize) -> Self {
        WeightMap {
            weights: vec![1.0; n],
            normalized: None,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalized(&self) -> Option<&[f64]> {
        self.normalized.as_deref()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Attaches `p = q / Σq`.
pub fn normalize(q: &WeightMap) -> Result<WeightMap> {
    let total = q.total();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let p = q.weights.iter().map(|w| w / total).collect();
    Ok(WeightMap {
        weights: q.weights.clone(),
        normalized: Some(p),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Certified upper bound on `sup_{H ∈ M} (1/|T|) Σ q(x) xᵀHx`.
    pub value: f64,
    /// Feasible maximizer candidate.
    pub witness: DMatrix<f64>,
    /// Objective at the witness.
    pub primal: f64,
    /// `value − primal`.
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub tol: f64,
    /// Projected-gradient iterations on the primal.
    pub max_iter: usize,
    /// Subgradient iterations spent tightening the dual bound.
    pub dual_iter: usize,
    pub dykstra: DykstraOptions,
    /// Separation mode: return as soon as the bound is at most this level or
    /// the witness exceeds it.
    pub decide_at: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tol: 1e-6,
            max_iter: 300,
            dual_iter: 60,
            dykstra: DykstraOptions::default(),
            decide_at: None,
        }
    }
}

/// Stacks instances as the rows of an `n × d` matrix.
pub fn stack_rows(points: &[DVector<f64>]) -> DMatrix<f64> {
    let d = points.first().map_or(0, |p| p.len());
    DMatrix::from_fn(points.len(), d, |i, j| points[i][j])
}

/// `(1/n) Σ q_i x_i x_iᵀ` for the rows `x_i` of `points`.
pub fn weighted_moment(points: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
    let n = points.nrows();
    let mut scaled = points.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= libm::sqrt(q[i]);
    }
    let mut sigma = scaled.tr_mul(&scaled);
    sigma /= n.max(1) as f64;
    (&sigma + sigma.transpose()) * 0.5
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn top_eigen(sym: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(sym.clone());
    let k = eig.eigenvalues.imax();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

fn max_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone()).eigenvalues.max()
}

/// Largest feasible multiple of `vvᵀ` for a unit `v`.
fn scaled_rank_one(v: &DVector<f64>, m: &MatBall) -> DMatrix<f64> {
    let l1 = l1_norm(v);
    let scale = if l1 > 0.0 { m.r_sq.min(m.rho_sq / (l1 * l1)) } else { 0.0 };
    v * v.transpose() * scale
}

fn dual_bound(sigma: &DMatrix<f64>, u: &DMatrix<f64>, m: &MatBall) -> f64 {
    let lam = max_eigenvalue(&(sigma - u));
    let umax = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    m.r_sq * lam.max(0.0) + m.rho_sq * umax
}

fn clip_matrix(a: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    a.map(|x| x.clamp(-mu, mu))
}

/// Golden-section search over `mu` for the family `U = clip(base, mu)`.
fn golden_dual<F: Fn(f64) -> DMatrix<f64>>(
    sigma: &DMatrix<f64>,
    m: &MatBall,
    hi: f64,
    family: F,
    evals: usize,
) -> (f64, DMatrix<f64>) {
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut best_u = DMatrix::zeros(sigma.nrows(), sigma.ncols());
    let mut best = dual_bound(sigma, &best_u, m);
    let consider = |mu: f64, best: &mut f64, best_u: &mut DMatrix<f64>| -> f64 {
        let u = family(mu);
        let val = dual_bound(sigma, &u, m);
        if val < *best {
            *best = val;
            *best_u = u;
        }
        val
    };
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = consider(x1, &mut best, &mut best_u);
    let mut f2 = consider(x2, &mut best, &mut best_u);
    consider(hi, &mut best, &mut best_u);
    for _ in 0..evals {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = consider(x1, &mut best, &mut best_u);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = consider(x2, &mut best, &mut best_u);
        }
    }
    (best, best_u)
}

/// Upper-bounds the relaxed program by searching over dual matrices `U`.
fn improve_dual(
    sigma: &DMatrix<f64>,
    m: &MatBall,
    witness: &DMatrix<f64>,
    upper: &mut f64,
    iters: usize,
) {
    let hi = sigma.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if hi == 0.0 || iters == 0 {
        return;
    }
    // Family 1: soft-threshold Σ entrywise.
    let (val, mut u) = golden_dual(sigma, m, hi, |mu| clip_matrix(sigma, mu), 24);
    if val < *upper {
        *upper = val;
    }
    // Family 2: match the witness sign pattern on its support.
    let wmax = witness.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if wmax > 0.0 {
        let cut = 1e-6 * wmax;
        let family = |mu: f64| {
            DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| {
                let h = witness[(i, j)];
                if h.abs() > cut {
                    mu * h.signum()
                } else {
                    sigma[(i, j)].clamp(-mu, mu)
                }
            })
        };
        let (val2, u2) = golden_dual(sigma, m, hi, family, 24);
        if val2 < *upper {
            *upper = val2;
        }
        if val2 < val {
            u = u2;
        }
    }
    // Polish: projected subgradient on U inside its current box.
    let mu = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if mu == 0.0 {
        return;
    }
    let mut cur = u;
    let step0 = mu;
    for t in 1..=iters {
        let (lam, v) = top_eigen(&(sigma - &cur));
        let val = m.r_sq * lam.max(0.0) + m.rho_sq * mu;
        if val < *upper {
            *upper = val;
        }
        if lam <= 0.0 {
            break;
        }
        let step = step0 / libm::sqrt(t as f64);
        cur = clip_matrix(&(&cur + &v * v.transpose() * step), mu);
    }
}

/// Solves the relaxed sparse-PCA program for a given moment matrix.
pub fn certify_moment(
    sigma: &DMatrix<f64>,
    m: &MatBall,
    opts: &CertifyOptions,
    warm: Option<&DMatrix<f64>>,
) -> Result<Certificate> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let d = sigma.nrows();
    let scale = sigma.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 || m.r_sq == 0.0 || m.rho_sq == 0.0 {
        return Ok(Certificate {
            value: 0.0,
            witness: DMatrix::zeros(d, d),
            primal: 0.0,
            gap: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let (lam_max, v_top) = top_eigen(sigma);
    let mut upper = m.r_sq * lam_max.max(0.0);
    // The entrywise bound alone: U = Σ.
    upper = upper.min(m.rho_sq * scale);

    let mut candidates = vec![scaled_rank_one(&v_top, m)];
    let j = (0..d)
        .max_by(|&a, &b| sigma[(a, a)].partial_cmp(&sigma[(b, b)]).unwrap_or(Ordering::Equal))
        .unwrap_or(0);
    let mut e = DMatrix::zeros(d, d);
    e[(j, j)] = m.r_sq.min(m.rho_sq);
    candidates.push(e);
    if let Some(w) = warm {
        if w.nrows() == d {
            candidates.push(project_m_lenient(w, m, &opts.dykstra)?);
        }
    }
    let mut witness = candidates
        .into_iter()
        .map(|h| (frob_dot(sigma, &h), h))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal))
        .map(|(_, h)| h)
        .unwrap_or_else(|| DMatrix::zeros(d, d));
    let mut primal = frob_dot(sigma, &witness);

    let decided = |upper: f64, primal: f64| match opts.decide_at {
        Some(level) => upper <= level || primal > level,
        None => false,
    };
    let finish = |upper: f64, primal: f64, witness: DMatrix<f64>, iterations: usize| {
        let upper = upper.max(primal);
        Certificate {
            value: upper,
            witness,
            primal,
            gap: upper - primal,
            converged: upper - primal <= opts.tol,
            iterations,
        }
    };
    if upper - primal <= opts.tol || decided(upper, primal) {
        return Ok(finish(upper, primal, witness, 0));
    }

    improve_dual(sigma, m, &witness, &mut upper, opts.dual_iter);
    if upper - primal <= opts.tol || decided(upper, primal) {
        return Ok(finish(upper, primal, witness, 0));
    }

    // Projected gradient ascent on the linear objective.
    let step = m.r_sq / lam_max.abs().max(f64::MIN_POSITIVE);
    let mut h = witness.clone();
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let next = project_m_lenient(&(&h + sigma * step), m, &opts.dykstra)?;
        let obj = frob_dot(sigma, &next);
        let moved = (&next - &h).norm();
        h = next;
        if obj > primal {
            primal = obj;
            witness = h.clone();
        }
        if it % 25 == 0 || moved <= 1e-12 * m.r_sq {
            improve_dual(sigma, m, &witness, &mut upper, opts.dual_iter);
        }
        if upper - primal <= opts.tol || decided(upper, primal) || moved <= 1e-12 * m.r_sq {
            break;
        }
    }
    Ok(finish(upper, primal, witness, iterations))
}

/// [`project_m`], falling back to a feasible point near the last Dykstra
/// iterate when the solver runs out of iterations. Only the primal witness
/// goes through here, so an inexact step costs tightness, not validity.
fn project_m_lenient(h: &DMatrix<f64>, m: &MatBall, opts: &DykstraOptions) -> Result<DMatrix<f64>> {
    match project_m(h, m, opts) {
        Err(Error::MatrixSolver { last, .. }) => {
            let p = project_spectral(&last, m.r_sq);
            let l1 = entrywise_l1(&p);
            Ok(if l1 > m.rho_sq { p * (m.rho_sq / l1) } else { p })
        }
        other => other,
    }
}

/// Certifies the reweighted variance of `points` (rows) over `M`.
pub fn certify_variance(
    points: &DMatrix<f64>,
    q: &WeightMap,
    m: &MatBall,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    if points.nrows() == 0 {
        return Err(Error::param("T", "instance set must be nonempty"));
    }
    if q.len() != points.nrows() {
        return Err(Error::param("q", "one weight per instance"));
    }
    let sigma = weighted_moment(points, q.weights());
    certify_moment(&sigma, m, opts, None)
}

/// Largest dimension accepted by [`brute_force_sparse_variance`].
pub const BRUTE_FORCE_MAX_DIM: usize = 12;

fn sub_matrix(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

fn feasible_rescale(v: &mut DVector<f64>, r: f64, rho: f64) {
    let n2 = v.norm();
    let n1 = l1_norm(v);
    let mut s = 1.0f64;
    if n2 > r {
        s = s.min(r / n2);
    }
    if n1 > rho {
        s = s.min(rho / n1);
    }
    *v *= s;
}

fn quad(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v))
}

/// Stationary points of `max vᵀAv` on `{‖v‖₂ = r, σᵀv = ρ}` via the secular
/// equation `(Σ c²/(λ−μ))² = (ρ/r)² Σ c²/(λ−μ)²`, `c = Qᵀσ`.
fn secular_candidates(
    lambda: &[f64],
    q: &DMatrix<f64>,
    sigma: &DVector<f64>,
    r: f64,
    rho: f64,
) -> Vec<DVector<f64>> {
    let c = q.transpose() * sigma;
    let ratio = (rho / r) * (rho / r);
    let f = |mu: f64| -> f64 {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (l, ci) in lambda.iter().zip(c.iter()) {
            let t = ci * ci / (l - mu);
            s1 += t;
            s2 += t / (l - mu);
        }
        s1 * s1 - ratio * s2
    };
    let mut poles: Vec<f64> = lambda.to_vec();
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let span = (poles[poles.len() - 1] - poles[0]).abs().max(1.0);

    let mut grid: Vec<f64> = Vec::new();
    for e in -10..=4 {
        for k in 1..=9 {
            let delta = k as f64 * libm::pow(10.0, e as f64) * span;
            grid.push(poles[0] - delta);
            grid.push(poles[poles.len() - 1] + delta);
        }
    }
    for w in poles.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 1e-14 {
            continue;
        }
        let k_max = 400;
        for k in 1..k_max {
            let t = 0.5 * (1.0 - libm::cos(core::f64::consts::PI * k as f64 / k_max as f64));
            grid.push(lo + (hi - lo) * t);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));

    let mut out = Vec::new();
    let pole_between = |a: f64, b: f64| poles.iter().any(|p| *p >= a && *p <= b);
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        if pole_between(a, b) {
            continue;
        }
        let (mut fa, fb) = (f(a), f(b));
        if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = f(mid);
            if fm * fa <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        let mu = 0.5 * (a + b);
        let mut y = DVector::zeros(lambda.len());
        let mut s1 = 0.0;
        for i in 0..lambda.len() {
            y[i] = c[i] / (lambda[i] - mu);
            s1 += c[i] * y[i];
        }
        if s1 == 0.0 || !s1.is_finite() {
            continue;
        }
        let v = q * y * (rho / s1);
        out.push(v);
    }
    out
}

/// Exact maximum of `(1/|T|) Σ q(x)(v·x)²` over `‖v‖₂ ≤ r, ‖v‖₁ ≤ ρ` by
/// support and sign enumeration, for small dimensions only.
pub fn brute_force_sparse_variance(points: &DMatrix<f64>, q: &WeightMap, r: f64, rho: f64) -> Result<f64> {
    let d = points.ncols();
    if d > BRUTE_FORCE_MAX_DIM {
        return Err(Error::GuardExceeded {
            dim: d,
            limit: BRUTE_FORCE_MAX_DIM,
        });
    }
    if q.len() != points.nrows() {
        return Err(Error::param("q", "one weight per instance"));
    }
    if !(r >= 0.0 && rho >= 0.0) {
        return Err(Error::param("r/rho", "radii must be non-negative"));
    }
    if points.nrows() == 0 || d == 0 || r == 0.0 || rho == 0.0 {
        return Ok(0.0);
    }
    let a = weighted_moment(points, q.weights());
    let feasible = |v: &DVector<f64>| v.norm() <= r * (1.0 + 1e-12) && l1_norm(v) <= rho * (1.0 + 1e-12);

    let mut best = 0.0f64;
    let mut best_v = DVector::zeros(d);
    let offer = |v: DVector<f64>, best: &mut f64, best_v: &mut DVector<f64>| {
        let val = quad(&a, &v);
        if val > *best {
            *best = val;
            *best_v = v;
        }
    };

    for mask in 1u32..(1u32 << d) {
        let idx: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let a_s = sub_matrix(&a, &idx);
        let eig = SymmetricEigen::new(a_s.clone());
        let lift = |w: &DVector<f64>| {
            let mut v = DVector::zeros(d);
            for (t, &i) in idx.iter().enumerate() {
                v[i] = w[t];
            }
            v
        };
        // ℓ₁ inactive: scaled eigenvectors.
        for col in 0..k {
            let mut w = eig.eigenvectors.column(col).into_owned() * r;
            if l1_norm(&w) > rho {
                feasible_rescale(&mut w, r, rho);
            }
            offer(lift(&w), &mut best, &mut best_v);
        }
        // Both constraints active, one sign pattern per ±pair.
        let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        for pattern in 0u32..(1u32 << (k - 1)) {
            let sigma = DVector::from_fn(k, |t, _| {
                if t == 0 || pattern & (1 << (t - 1)) == 0 {
                    1.0
                } else {
                    -1.0
                }
            });
            for w in secular_candidates(&lambda, &eig.eigenvectors, &sigma, r, rho) {
                let v = lift(&w);
                if feasible(&v) {
                    offer(v, &mut best, &mut best_v);
                }
            }
            // ℓ₁ active, ℓ₂ slack.
            if let Some(inv) = a_s.clone().try_inverse() {
                let y = &inv * &sigma;
                let s1 = sigma.dot(&y);
                if s1 > 0.0 {
                    let v = lift(&(y * (rho / s1)));
                    if feasible(&v) {
                        offer(v, &mut best, &mut best_v);
                    }
                }
            }
        }
    }

    // Local refinement around the best enumerated point.
    let mut step = 0.1 * r.min(rho);
    let mut v = best_v;
    while step > 1e-12 * r.min(rho) {
        let mut improved = false;
        for i in 0..d {
            for j in 0..d {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut cand = v.clone();
                    cand[i] += si * step;
                    if j != i {
                        cand[j] += sj * step;
                    }
                    feasible_rescale(&mut cand, r, rho);
                    let val = quad(&a, &cand);
                    if val > best {
                        best = val;
                        v = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindWeightsOptions {
    pub max_cuts: usize,
    pub certify: CertifyOptions,
    /// Each cut aims the witness objective at this fraction of the bound.
    pub cut_target: f64,
}

impl Default for FindWeightsOptions {
    fn default() -> Self {
        FindWeightsOptions {
            max_cuts: 200,
            certify: CertifyOptions::default(),
            cut_target: 0.95,
        }
    }
}

/// Successful soft outlier removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweighting {
    pub q: WeightMap,
    pub certificate: Certificate,
    pub bound: f64,
    pub cuts: usize,
}

/// Final iterate and violating certificate when no feasible `q` was found.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibleWeights {
    pub q: WeightMap,
    pub certificate: Certificate,
    pub bound: f64,
    pub cuts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightOutcome {
    Feasible(Reweighting),
    Infeasible(InfeasibleWeights),
}

/// Raises `q` uniformly (capped at 1) until `Σq ≥ mass`.
fn restore_mass(q: &mut [f64], mass: f64) {
    let total: f64 = q.iter().sum();
    if total >= mass {
        return;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = q.iter().map(|w| (w + mid).min(1.0)).sum();
        if s >= mass {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    q.iter_mut().for_each(|w| *w = (*w + hi).min(1.0));
}

/// Row scores `x_iᵀ H x_i`.
fn quadratic_scores(points: &DMatrix<f64>, h: &DMatrix<f64>) -> Vec<f64> {
    let xh = points * h;
    (0..points.nrows())
        .map(|i| xh.row(i).dot(&points.row(i)).max(0.0))
        .collect()
}

/// Cutting-plane search for weights meeting the three constraints, with
/// bound `C(b² + r²)`.
pub fn find_weights(
    points: &DMatrix<f64>,
    xi: f64,
    m: &MatBall,
    b: f64,
    c: f64,
    opts: &FindWeightsOptions,
) -> Result<WeightOutcome> {
    let n = points.nrows();
    if n == 0 {
        return Err(Error::param("T", "instance set must be nonempty"));
    }
    if !(xi > 0.0 && xi <= 0.5) {
        return Err(Error::param("xi", "must lie in (0, 1/2]"));
    }
    if !(c > 0.0) {
        return Err(Error::param("C", "must be positive"));
    }
    let bound = c * (b * b + m.r_sq);
    let mass = (1.0 - xi) * n as f64;
    let mut q = vec![1.0; n];
    let mut cert_opts = opts.certify;
    cert_opts.decide_at = Some(bound);
    let mut warm: Option<DMatrix<f64>> = None;
    let mut cert = None;

    for cut in 0..=opts.max_cuts {
        let sigma = weighted_moment(points, &q);
        let cur = certify_moment(&sigma, m, &cert_opts, warm.as_ref())?;
        if cur.value <= bound {
            return Ok(WeightOutcome::Feasible(Reweighting {
                q: WeightMap::new(q)?,
                certificate: cur,
                bound,
                cuts: cut,
            }));
        }
        if cut == opts.max_cuts {
            cert = Some(cur);
            break;
        }
        let scores = quadratic_scores(points, &cur.witness);
        let tau_max = scores.iter().fold(0.0f64, |acc, s| acc.max(*s));
        let weighted_sq: f64 = q.iter().zip(&scores).map(|(w, s)| w * s * s).sum();
        if tau_max <= 0.0 || weighted_sq <= 0.0 {
            cert = Some(cur);
            break;
        }
        let level = if cur.primal > bound { cur.primal } else { cur.value };
        let target = opts.cut_target * bound;
        let beta = ((level - target) * n as f64 * tau_max / weighted_sq).clamp(1e-3, 1.0);
        for (w, s) in q.iter_mut().zip(&scores) {
            *w = (*w * (1.0 - beta * s / tau_max)).clamp(0.0, 1.0);
        }
        restore_mass(&mut q, mass);
        warm = Some(cur.witness);
    }
    let certificate = cert.ok_or(Error::param("max_cuts", "no certificate produced"))?;
    Ok(WeightOutcome::Infeasible(InfeasibleWeights {
        q: WeightMap::new(q)?,
        certificate,
        bound,
        cuts: opts.max_cuts,
    }))
}

/// Entrywise ℓ₁ and trace feasibility of a witness, used by callers that
/// re-check certificates.
pub fn witness_feasible(witness: &DMatrix<f64>, m: &MatBall, tol: f64) -> bool {
    m.contains(witness, tol) && entrywise_l1(witness) <= m.rho_sq + tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(data: &[&[f64]]) -> DMatrix<f64> {
        let pts: Vec<DVector<f64>> = data.iter().map(|r| DVector::from_column_slice(r)).collect();
        stack_rows(&pts)
    }

    #[test]
    fn rank_one_moment_certificate() {
        let t = rows(&[&[1.0, 0.0, 0.0]]);
        let m = MatBall::new(1.0, 10.0).unwrap();
        let cert = certify_variance(&t, &WeightMap::ones(1), &m, &CertifyOptions::default()).unwrap();
        assert!((cert.value - 1.0).abs() < 1e-9);
        assert!((cert.witness[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(cert.converged);
    }

    #[test]
    fn zero_weights_certify_zero() {
        let t = rows(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        let q = WeightMap::new(vec![0.0, 0.0]).unwrap();
        let m = MatBall::new(1.0, 1.0).unwrap();
        let cert = certify_variance(&t, &q, &m, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.value, 0.0);
    }

    #[test]
    fn brute_force_examples() {
        let m1 = rows(&[&[1.0, 0.0]]);
        let v = brute_force_sparse_variance(&m1, &WeightMap::ones(1), 1.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let m2 = rows(&[&[h, h]]);
        let v = brute_force_sparse_variance(&m2, &WeightMap::ones(1), 1.0, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-9, "{v}");
    }

    #[test]
    fn brute_force_guard() {
        let t = DMatrix::zeros(1, 13);
        assert!(matches!(
            brute_force_sparse_variance(&t, &WeightMap::ones(1), 1.0, 1.0),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let p = normalize(&WeightMap::ones(4)).unwrap();
        assert_eq!(p.normalized().unwrap(), &[0.25; 4]);
        let p = normalize(&WeightMap::new(vec![1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(p.normalized().unwrap(), &[0.5, 0.0, 0.5]);
        assert!(matches!(normalize(&WeightMap::new(vec![0.0; 3]).unwrap()), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn weight_range_enforced() {
        assert!(WeightMap::new(vec![0.5, 1.5]).is_err());
        assert!(WeightMap::new(vec![-0.1]).is_err());
    }

    #[test]
    fn restore_mass_reaches_target() {
        let mut q = vec![0.0, 0.5, 1.0, 0.2];
        restore_mass(&mut q, 3.0);
        let total: f64 = q.iter().sum();
        assert!(total >= 3.0 - 1e-9);
        assert!(q.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn find_weights_rejects_bad_xi() {
        let t = rows(&[&[1.0]]);
        let m = MatBall::new(1.0, 1.0).unwrap();
        assert!(find_weights(&t, 0.0, &m, 0.1, 1.0, &FindWeightsOptions::default()).is_err());
        assert!(find_weights(&t, 0.6, &m, 0.1, 1.0, &FindWeightsOptions::default()).is_err());
    }
}
