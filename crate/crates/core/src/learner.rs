//! The phase-based learner: hyper-parameter schedule, constants profiles,
//! sample sizing, and the per-phase pipeline
//! draw → prune → soft outlier removal → label sampling → ERM → finalize.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;

use crate::distributions::{default_max_rejects, sample, Band, LogConcaveKind};
use crate::erm::{finalize_iterate, importance_sample, minimize_hinge, ErmOptions, HingeSpec, LabeledSet};
use crate::error::{Error, Result};
use crate::geometry::{angle, linf_norm, BallPair, MatBall};
use crate::oracle::{band_noise_rate_estimate, AdversaryStrategy, GroundTruth, Instance, LearnerView, SimOracle};
use crate::outlier::{find_weights, normalize, stack_rows, FindWeightsOptions, WeightOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileMode {
    Theory,
    Practical,
}

impl ProfileMode {
    pub fn name(self) -> &'static str {
        match self {
            ProfileMode::Theory => "theory",
            ProfileMode::Practical => "practical",
        }
    }
}

/// Absolute constants. `c[5]`, `c[6]`, `kappa` and `big_c1` are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsProfile {
    pub mode: ProfileMode,
    pub c: [f64; 10],
    pub big_c1: f64,
    pub big_c2: f64,
    pub c_bar: f64,
    pub kappa: f64,
}

impl ConstantsProfile {
    /// Fills in `κ = exp(−c̄)`, `C₁ = c̄/16`, `c₆` and `c₅` from the free
    /// constants.
    pub fn derive(mode: ProfileMode, mut c: [f64; 10], big_c2: f64, c_bar: f64) -> Result<Self> {
        if !(c_bar > 0.0 && c_bar.is_finite()) {
            return Err(Error::param("c_bar", "must be positive"));
        }
        if !(big_c2 > 0.0 && big_c2.is_finite()) {
            return Err(Error::param("C2", "must be positive"));
        }
        for (i, v) in c.iter().enumerate() {
            if i != 5 && i != 6 && !(*v > 0.0 && v.is_finite()) {
                return Err(Error::param("c", alloc::format!("c{i} must be positive")));
            }
        }
        let kappa = libm::exp(-c_bar);
        let inner = 1.0 + 4.0 / (c[0] * kappa * c_bar) * libm::sqrt(big_c2 * c_bar * c_bar + big_c2);
        c[6] = (0.5f64).min(kappa * kappa / 16.0 / (inner * inner));
        c[5] = c[8] / (2.0 * PI) * c_bar * c[1] * c[6];
        Ok(ConstantsProfile {
            mode,
            c,
            big_c1: c_bar / 16.0,
            big_c2,
            c_bar,
            kappa,
        })
    }

    /// `c̄ = 2`, all `cᵢ = 1` except `c₀ = 0.2` and `c₈ = 0.5`, `C₂ = 2.5`.
    pub fn practical() -> Self {
        let mut c = [1.0; 10];
        c[0] = 0.2;
        c[8] = 0.5;
        Self::derive(ProfileMode::Practical, c, 2.5, 2.0).expect("practical constants are valid")
    }

    /// Unit base constants with the smallest `c̄ ≥ 8π/c₄` satisfying
    /// `g(c̄) ≤ 2⁻⁸π`, and `c₈ = min{2c₀, 2c₀/(9C₁), 1/C₁}`.
    pub fn theory() -> Self {
        let mut c = [1.0; 10];
        let g = |t: f64| {
            c[2] * (2.0 * t * libm::exp(-t) + c[3] * PI / 4.0 * libm::exp(-c[4] * t / (4.0 * PI)) + 16.0 * libm::exp(-t))
        };
        let target = PI / 256.0;
        let mut lo = 8.0 * PI / c[4];
        let mut hi = lo;
        while g(hi) > target {
            hi *= 2.0;
        }
        if g(lo) > target {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        } else {
            hi = lo;
        }
        let c_bar = hi;
        let big_c1 = c_bar / 16.0;
        c[8] = (2.0 * c[0]).min(2.0 * c[0] / (9.0 * big_c1)).min(1.0 / big_c1);
        Self::derive(ProfileMode::Theory, c, 2.5, c_bar).expect("theory constants are valid")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "practical" => Some(Self::practical()),
            "theory" => Some(Self::theory()),
            _ => None,
        }
    }

    pub fn c5(&self) -> f64 {
        self.c[5]
    }

    pub fn c6(&self) -> f64 {
        self.c[6]
    }
}

/// How `n_k` and `m_k` are sized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizingPolicy {
    /// `n_k = ⌈A s² log⁴(d/b_k)⌉`, `m_k = ⌈B s log²(d/(b_k δ_k)) log(d/δ_k)⌉`.
    Practical { a: f64, b: f64 },
    /// The polylogarithmic expressions with an explicit `f·log f` factor for
    /// the hidden logs. Intractable except at toy sizes.
    Theory { a: f64, b: f64 },
}

impl Default for SizingPolicy {
    fn default() -> Self {
        SizingPolicy::Practical { a: 0.05, b: 0.25 }
    }
}

impl SizingPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SizingPolicy::Practical { .. } => "practical",
            SizingPolicy::Theory { .. } => "theory",
        }
    }

    pub fn constants(&self) -> (f64, f64) {
        match *self {
            SizingPolicy::Practical { a, b } | SizingPolicy::Theory { a, b } => (a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    pub k: usize,
    pub b: f64,
    pub r: f64,
    pub rho: f64,
    pub tau: f64,
    pub xi: f64,
    pub delta: f64,
    pub nu: f64,
    pub z: f64,
    pub n: usize,
    pub m: usize,
    pub n_budget: u64,
}

/// `max{1, ⌈log₂(π/(16 c₁ ε))⌉}`.
pub fn k0(eps: f64, c1: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    let v = libm::ceil(libm::log2(PI / (16.0 * c1 * eps)));
    Ok(if v < 1.0 { 1 } else { v as usize })
}

fn pow2(e: i32) -> f64 {
    libm::exp2(e as f64)
}

fn sizes(sizing: &SizingPolicy, s: usize, d: usize, b: f64, delta_k: f64) -> Result<(usize, usize)> {
    let s = s as f64;
    let d = d as f64;
    let lg = libm::log2;
    let (n, m) = match *sizing {
        SizingPolicy::Practical { a, b: bb } => {
            let n = a * s * s * libm::pow(lg(d / b), 4.0);
            let m = bb * s * libm::pow(lg(d / (b * delta_k)), 2.0) * lg(d / delta_k);
            (n, m)
        }
        SizingPolicy::Theory { a, b: bb } => {
            let fn_ = s * s * libm::pow(lg(d / b), 4.0) * (lg(d) + libm::pow(lg(1.0 / delta_k), 3.0));
            let fm = s * libm::pow(lg(d / (b * delta_k)), 2.0) * lg(d / delta_k);
            (a * fn_ * lg(fn_).max(1.0), bb * fm * lg(fm).max(1.0))
        }
    };
    let (a, bb) = sizing.constants();
    if !(a > 0.0 && bb > 0.0) {
        return Err(Error::param("sizing", "calibration constants must be positive"));
    }
    if !(n.is_finite() && m.is_finite() && n < 1e15 && m < 1e15) {
        return Err(Error::param("sizing", "sample sizes overflow"));
    }
    Ok(((libm::ceil(n) as usize).max(1), (libm::ceil(m) as usize).max(1)))
}

/// Hyper-parameters of phase `k`.
pub fn schedule(
    k: usize,
    s: usize,
    d: usize,
    eps: f64,
    delta: f64,
    profile: &ConstantsProfile,
    sizing: &SizingPolicy,
) -> Result<PhaseParams> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    if s == 0 || s > d {
        return Err(Error::param("s", "must satisfy 1 ≤ s ≤ d"));
    }
    let k_max = k0(eps, profile.c[1])?;
    if k == 0 || k > k_max {
        return Err(Error::param("k", alloc::format!("phase must lie in 1..={k_max}")));
    }
    let e = -(k as i32) - 3;
    let b = profile.c_bar * pow2(e);
    let r = if k == 1 { 1.0 } else { pow2(e) };
    let rho = if k == 1 {
        libm::sqrt(s as f64)
    } else {
        libm::sqrt(2.0 * s as f64) * pow2(e)
    };
    let tau = profile.c[0] * profile.kappa * b.min(1.0 / 9.0);
    let delta_k = delta / (((k + 1) * (k + 2)) as f64);
    let z = libm::sqrt(b * b + r * r);
    let t = 1.0 + 4.0 * libm::sqrt(profile.big_c2) * z / tau;
    let xi = (0.5f64).min(profile.kappa * profile.kappa / 16.0 / (t * t));
    let (n, m) = sizes(sizing, s, d, b, delta_k)?;
    let nu = profile.c[9] * libm::log2(48.0 * n as f64 * d as f64 / (b * delta_k));
    let n_budget = libm::ceil(16.0 / (profile.c[8] * b) * (n as f64 + libm::log(4.0 / delta_k))) as u64;
    Ok(PhaseParams {
        k,
        b,
        r,
        rho,
        tau,
        xi,
        delta: delta_k,
        nu,
        z,
        n,
        m,
        n_budget,
    })
}

/// Keeps instances with `‖x‖∞ ≤ nu`, preserving order.
pub fn prune(batch: Vec<Instance>, nu: f64) -> (Vec<Instance>, usize) {
    let before = batch.len();
    let kept: Vec<Instance> = batch.into_iter().filter(|x| linf_norm(&x.x) <= nu).collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// A learning problem: ground truth, target accuracy and noise.
#[derive(Debug, Clone)]
pub struct Problem {
    pub gt: GroundTruth,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub adversary: AdversaryStrategy,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param("eps", "must lie in (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        if !(0.0..0.5).contains(&self.eta) {
            return Err(Error::param("eta", "must lie in [0, 1/2)"));
        }
        self.adversary.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub find_weights: FindWeightsOptions,
    pub erm: ErmOptions,
    /// Retry soft outlier removal once at `2C` when it reports infeasible.
    pub retry_inflated: bool,
    /// Monte-Carlo draws for non-Gaussian error estimates.
    pub n_mc: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            find_weights: FindWeightsOptions::default(),
            erm: ErmOptions::default(),
            retry_inflated: true,
            n_mc: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub profile: ConstantsProfile,
    pub sizing: SizingPolicy,
    pub solver: SolverOptions,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            profile: ConstantsProfile::practical(),
            sizing: SizingPolicy::default(),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Access {
    Active,
    Passive,
}

impl Access {
    pub fn name(self) -> &'static str {
        match self {
            Access::Active => "active",
            Access::Passive => "passive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutlierStatus {
    Feasible,
    /// Feasible only after inflating `C` by 2.
    FeasibleInflated,
    /// No feasible weights; the final iterate was used.
    Infeasible,
}

impl OutlierStatus {
    pub fn name(self) -> &'static str {
        match self {
            OutlierStatus::Feasible => "feasible",
            OutlierStatus::FeasibleInflated => "feasible_inflated",
            OutlierStatus::Infeasible => "infeasible",
        }
    }
}

/// Per-phase bookkeeping. Fields prefixed `diag_` use hidden oracle tags.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub params: PhaseParams,
    pub sample_calls: u64,
    pub labels: u64,
    pub pruned: usize,
    pub sum_q: f64,
    pub certificate_value: f64,
    pub certificate_gap: f64,
    pub cuts: usize,
    pub outlier_status: OutlierStatus,
    pub erm_loss: f64,
    pub erm_probe: f64,
    pub erm_iterations: usize,
    pub degenerate: bool,
    pub band_noise_bound: f64,
    pub theta: f64,
    pub est_error: f64,
    pub diag_dirty_fraction: f64,
    pub diag_mean_clean_weight: f64,
    pub diag_mean_dirty_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warning {
    /// `η > c₅ ε`; the guarantee does not cover this noise rate.
    NoiseAboveTolerance { eta: f64, limit: f64 },
    /// Phase `k` used more oracle calls than its budget `N_k`.
    SampleBudgetExceeded { k: usize, used: u64, budget: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub access: Access,
    pub k0: usize,
    pub phases: Vec<PhaseRecord>,
    pub sample_calls: u64,
    /// Label count: queries to the label oracle (active) or labeled draws
    /// (passive).
    pub labels: u64,
    pub distinct_labels: u64,
    pub w: DVector<f64>,
    pub theta: f64,
    pub est_error: f64,
    pub warnings: Vec<Warning>,
}

/// Independent random streams of one run.
#[derive(Debug, Clone)]
pub struct RngStreams<R> {
    pub oracle: R,
    pub learner: R,
    pub diag: R,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub monte_carlo: f64,
    /// `θ(w, w*)/π`, exact for the Gaussian kind.
    pub closed_form: Option<f64>,
}

impl ErrorEstimate {
    pub fn best(&self) -> f64 {
        self.closed_form.unwrap_or(self.monte_carlo)
    }
}

/// Disagreement rate of `sign(w·x)` with the ground truth.
pub fn estimate_error<R: Rng + ?Sized>(
    w: &DVector<f64>,
    gt: &GroundTruth,
    n_mc: usize,
    rng: &mut R,
) -> Result<ErrorEstimate> {
    if n_mc < 1 {
        return Err(Error::param("n_mc", "must be at least 1"));
    }
    let ws = gt.w_star();
    let mut wrong = 0usize;
    for _ in 0..n_mc {
        let x = sample(gt.dist(), rng);
        if crate::oracle::sign(w.dot(&x)) != crate::oracle::sign(ws.dot(&x)) {
            wrong += 1;
        }
    }
    let closed_form = if gt.dist().kind == LogConcaveKind::Gaussian {
        Some(if w.norm() == 0.0 { 0.5 } else { angle(w, ws)? / PI })
    } else {
        None
    };
    Ok(ErrorEstimate {
        monte_carlo: wrong as f64 / n_mc as f64,
        closed_form,
    })
}

/// State carried between phases.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub k: usize,
    pub w: DVector<f64>,
    pub oracle: SimOracle,
    pub records: Vec<PhaseRecord>,
    pub warnings: Vec<Warning>,
}

impl LearnerState {
    pub fn new(problem: &Problem) -> Result<Self> {
        problem.validate()?;
        let oracle = SimOracle::new(problem.gt.clone(), problem.eta, problem.adversary.clone())?;
        Ok(LearnerState {
            k: 0,
            w: DVector::zeros(problem.gt.w_star().len()),
            oracle,
            records: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

fn error_for<R: Rng + ?Sized>(w: &DVector<f64>, gt: &GroundTruth, n_mc: usize, rng: &mut R) -> Result<(f64, f64)> {
    let theta = if w.norm() == 0.0 { PI / 2.0 } else { angle(w, gt.w_star())? };
    let est = if gt.dist().kind == LogConcaveKind::Gaussian {
        theta / PI
    } else {
        estimate_error(w, gt, n_mc, rng)?.monte_carlo
    };
    Ok((theta, est))
}

/// One phase of the algorithm.
pub fn run_phase<R: Rng>(
    mut state: LearnerState,
    params: &PhaseParams,
    cfg: &LearnerConfig,
    access: Access,
    streams: &mut RngStreams<R>,
) -> Result<LearnerState> {
    if state.k + 1 != params.k {
        return Err(Error::param("k", "phases must run in order"));
    }
    let k = params.k;
    let inner = |state: &mut LearnerState, streams: &mut RngStreams<R>| -> Result<PhaseRecord> {
        let d = state.w.len();
        let s = state.oracle.ground_truth().s();
        let c8 = cfg.profile.c[8];
        let band = if k == 1 {
            None
        } else {
            Some(Band::new(state.w.clone(), params.b)?)
        };
        let view = LearnerView {
            current_w: state.w.clone(),
            current_band: band.clone(),
            phase: k,
            prune_radius: Some(params.nu),
        };
        let max_rejects = default_max_rejects(c8, params.b);
        let calls_before = state.oracle.sample_calls();
        let labels_before = state.oracle.label_queries();

        let mut batch = Vec::with_capacity(params.n);
        for _ in 0..params.n {
            batch.push(state.oracle.next_instance(&view, band.as_ref(), max_rejects, &mut streams.oracle)?);
        }
        let calls = state.oracle.sample_calls() - calls_before;
        let dirty_drawn = batch.iter().filter(|x| !state.oracle.diag_is_clean(x.id)).count();

        let (kept, pruned) = prune(batch, params.nu);
        if kept.is_empty() {
            return Err(Error::param("T", "pruning removed every instance"));
        }
        let rows: Vec<DVector<f64>> = kept.iter().map(|x| x.x.clone()).collect();
        let points = stack_rows(&rows);

        let m_ball = MatBall::new(params.r * params.r, params.rho * params.rho)?;
        let c = 2.0 * cfg.profile.big_c2;
        let mut status = OutlierStatus::Feasible;
        let mut outcome = find_weights(&points, params.xi, &m_ball, params.b, c, &cfg.solver.find_weights)?;
        if matches!(outcome, WeightOutcome::Infeasible(_)) && cfg.solver.retry_inflated {
            outcome = find_weights(&points, params.xi, &m_ball, params.b, 2.0 * c, &cfg.solver.find_weights)?;
            status = OutlierStatus::FeasibleInflated;
        }
        let (q, cert_value, cert_gap, cuts) = match outcome {
            WeightOutcome::Feasible(r) => (r.q, r.certificate.value, r.certificate.gap, r.cuts),
            WeightOutcome::Infeasible(r) => {
                status = OutlierStatus::Infeasible;
                (r.q, r.certificate.value, r.certificate.gap, r.cuts)
            }
        };
        let (mut clean_w, mut clean_n, mut dirty_w, mut dirty_n) = (0.0, 0usize, 0.0, 0usize);
        for (inst, w) in kept.iter().zip(q.weights()) {
            if state.oracle.diag_is_clean(inst.id) {
                clean_w += w;
                clean_n += 1;
            } else {
                dirty_w += w;
                dirty_n += 1;
            }
        }
        let sum_q = q.total();
        let p = normalize(&q)?;

        let idx = importance_sample(&p, params.m, &mut streams.learner)?;
        let labels: Vec<i8> = idx
            .iter()
            .map(|&i| match access {
                Access::Active => state.oracle.reveal_label(kept[i].id),
                Access::Passive => state.oracle.passive_label(kept[i].id),
            })
            .collect();
        let x = nalgebra::DMatrix::from_fn(idx.len(), d, |row, col| points[(idx[row], col)]);
        let set = LabeledSet::new(x, labels)?;

        let ball = BallPair::new(state.w.clone(), params.r, params.rho)?;
        let spec = HingeSpec::new(params.tau, cfg.profile.kappa)?;
        let anchors = [state.w.clone()];
        let erm = minimize_hinge(&set, &ball, &spec, &cfg.solver.erm, &anchors, &mut streams.learner)?;

        let (w_next, degenerate) = match finalize_iterate(&erm.v, s) {
            Ok(w) => (w, false),
            Err(Error::DegenerateIterate) => (state.w.clone(), true),
            Err(e) => return Err(e),
        };
        state.w = w_next;
        let (theta, est_error) = error_for(&state.w, state.oracle.ground_truth(), cfg.solver.n_mc, &mut streams.diag)?;

        let labels_used = match access {
            Access::Active => state.oracle.label_queries() - labels_before,
            Access::Passive => calls,
        };
        let mean = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
        Ok(PhaseRecord {
            params: *params,
            sample_calls: calls,
            labels: labels_used,
            pruned,
            sum_q,
            certificate_value: cert_value,
            certificate_gap: cert_gap,
            cuts,
            outlier_status: status,
            erm_loss: erm.loss,
            erm_probe: erm.probe_best,
            erm_iterations: erm.iterations,
            degenerate,
            band_noise_bound: band_noise_rate_estimate(state.oracle.eta(), c8, params.b)?,
            theta,
            est_error,
            diag_dirty_fraction: dirty_drawn as f64 / params.n as f64,
            diag_mean_clean_weight: mean(clean_w, clean_n),
            diag_mean_dirty_weight: mean(dirty_w, dirty_n),
        })
    };
    let record = inner(&mut state, streams).map_err(|e| e.in_phase(k))?;
    if record.sample_calls > params.n_budget {
        state.warnings.push(Warning::SampleBudgetExceeded {
            k,
            used: record.sample_calls,
            budget: params.n_budget,
        });
    }
    state.records.push(record);
    state.k = k;
    Ok(state)
}

/// The result of a run, with the partial report when a phase failed.
pub type RunResult = core::result::Result<Report, (Error, Report)>;

fn learn<R: Rng>(problem: &Problem, cfg: &LearnerConfig, access: Access, streams: &mut RngStreams<R>) -> RunResult {
    let empty = |w: DVector<f64>, warnings: Vec<Warning>| Report {
        access,
        k0: 0,
        phases: Vec::new(),
        sample_calls: 0,
        labels: 0,
        distinct_labels: 0,
        theta: PI / 2.0,
        est_error: 0.5,
        w,
        warnings,
    };
    let d = problem.gt.w_star().len();
    let kmax = match k0(problem.eps, cfg.profile.c[1]) {
        Ok(k) => k,
        Err(e) => return Err((e, empty(DVector::zeros(d), Vec::new()))),
    };
    let mut state = match LearnerState::new(problem) {
        Ok(s) => s,
        Err(e) => return Err((e, empty(DVector::zeros(d), Vec::new()))),
    };
    let limit = cfg.profile.c5() * problem.eps;
    if problem.eta > limit {
        state.warnings.push(Warning::NoiseAboveTolerance {
            eta: problem.eta,
            limit,
        });
    }
    let report = |state: &LearnerState| {
        let last = state.records.last();
        Report {
            access,
            k0: kmax,
            phases: state.records.clone(),
            sample_calls: state.oracle.sample_calls(),
            labels: match access {
                Access::Active => state.oracle.label_queries(),
                Access::Passive => state.oracle.sample_calls(),
            },
            distinct_labels: match access {
                Access::Active => state.oracle.distinct_labels(),
                Access::Passive => state.oracle.sample_calls(),
            },
            w: state.w.clone(),
            theta: last.map_or(PI / 2.0, |r| r.theta),
            est_error: last.map_or(0.5, |r| r.est_error),
            warnings: state.warnings.clone(),
        }
    };
    for k in 1..=kmax {
        let params = match schedule(
            k,
            problem.gt.s(),
            d,
            problem.eps,
            problem.delta,
            &cfg.profile,
            &cfg.sizing,
        ) {
            Ok(p) => p,
            Err(e) => return Err((e.in_phase(k), report(&state))),
        };
        let snapshot = report(&state);
        state = match run_phase(state, &params, cfg, access, streams) {
            Ok(s) => s,
            Err(e) => return Err((e, snapshot)),
        };
    }
    Ok(report(&state))
}

/// Runs phases `1..=k₀` with separate instance and label oracles.
pub fn learn_active<R: Rng>(problem: &Problem, cfg: &LearnerConfig, streams: &mut RngStreams<R>) -> RunResult {
    learn(problem, cfg, Access::Active, streams)
}

/// The same pipeline when every draw arrives labeled.
pub fn learn_passive<R: Rng>(problem: &Problem, cfg: &LearnerConfig, streams: &mut RngStreams<R>) -> RunResult {
    learn(problem, cfg, Access::Passive, streams)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn practical_profile_identities() {
        let p = ConstantsProfile::practical();
        assert!((p.kappa - libm::exp(-2.0)).abs() < 1e-12);
        assert!((p.big_c1 - 0.125).abs() < 1e-12);
        assert!(p.c5() > 0.0 && p.c6() > 0.0);
    }

    #[test]
    fn theory_profile_meets_its_defining_inequality() {
        let p = ConstantsProfile::theory();
        assert!(p.c_bar >= 8.0 * PI);
        assert!(p.kappa < 1e-10);
    }

    #[test]
    fn k0_examples() {
        assert_eq!(k0(0.1, 1.0).unwrap(), 1);
        assert_eq!(k0(0.001, 1.0).unwrap(), 8);
    }

    #[test]
    fn first_phase_values() {
        let p = ConstantsProfile::practical();
        let ph = schedule(1, 3, 50, 0.001, 0.1, &p, &SizingPolicy::default()).unwrap();
        assert_eq!(ph.b, p.c_bar / 16.0);
        assert_eq!(ph.r, 1.0);
        assert_eq!(ph.rho, libm::sqrt(3.0));
        assert!(schedule(9, 3, 50, 0.001, 0.1, &p, &SizingPolicy::default()).is_err());
        assert!(schedule(0, 3, 50, 0.001, 0.1, &p, &SizingPolicy::default()).is_err());
    }

    #[test]
    fn prune_examples() {
        let mk = |i: usize, v: &[f64]| Instance {
            id: crate::oracle::ExampleId(i),
            x: DVector::from_column_slice(v),
        };
        let batch = alloc::vec![mk(0, &[1.0, -2.0]), mk(1, &[100.0, 0.0]), mk(2, &[0.5, 0.5])];
        let (kept, removed) = prune(batch, 3.0);
        assert_eq!(removed, 1);
        assert_eq!(kept.iter().map(|x| x.id.0).collect::<Vec<_>>(), alloc::vec![0, 2]);
    }
}
