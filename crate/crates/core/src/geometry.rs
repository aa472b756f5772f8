//! Vector and matrix geometry: hard thresholding, norms, angles and the
//! Euclidean projections onto the localized constraint sets used by the
//! learner.
//!
//! The concept-space set is `W = B2(center, r) ∩ B1(center, rho)`; the
//! relaxed sparse-PCA set is `M = {H ⪰ 0, ‖H‖* ≤ r², ‖H‖₁ ≤ ρ²}`. Both
//! intersections are handled with Dykstra's alternating projections over
//! sets whose individual projections are exact.

use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Iteration cap and residual tolerance for Dykstra's method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        DykstraOptions {
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

/// `B2(center, r) ∩ B1(center, rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPair {
    pub center: DVector<f64>,
    pub r: f64,
    pub rho: f64,
}

impl BallPair {
    pub fn new(center: DVector<f64>, r: f64, rho: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::param("r", "must be finite and non-negative"));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::param("rho", "must be finite and non-negative"));
        }
        Ok(BallPair { center, r, rho })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Diameter of the set, bounded by whichever ball is smaller in ℓ₂.
    pub fn diameter(&self) -> f64 {
        2.0 * self.r.min(self.rho)
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        let diff = v - &self.center;
        diff.norm() <= self.r + tol && l1_norm(&diff) <= self.rho + tol
    }
}

/// `{H ⪰ 0, ‖H‖* ≤ r_sq, ‖H‖₁ ≤ rho_sq}` with `‖·‖₁` the entrywise norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatBall {
    pub r_sq: f64,
    pub rho_sq: f64,
}

impl MatBall {
    pub fn new(r_sq: f64, rho_sq: f64) -> Result<Self> {
        if !(r_sq >= 0.0 && r_sq.is_finite()) {
            return Err(Error::param("r_sq", "must be finite and non-negative"));
        }
        if !(rho_sq >= 0.0 && rho_sq.is_finite()) {
            return Err(Error::param("rho_sq", "must be finite and non-negative"));
        }
        Ok(MatBall { r_sq, rho_sq })
    }

    /// Membership up to `tol` on each of the three defining constraints.
    pub fn contains(&self, h: &DMatrix<f64>, tol: f64) -> bool {
        let eig = SymmetricEigen::new(symmetrize(h));
        let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let nuclear: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
        min_eig >= -tol && nuclear <= self.r_sq + tol && entrywise_l1(h) <= self.rho_sq + tol
    }
}

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn nnz(v: &DVector<f64>) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}

pub fn entrywise_l1(h: &DMatrix<f64>) -> f64 {
    h.iter().map(|x| x.abs()).sum()
}

/// Sum of singular values; for symmetric input, the sum of `|eigenvalue|`.
pub fn trace_norm(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(h))
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .sum()
}

pub fn symmetrize(h: &DMatrix<f64>) -> DMatrix<f64> {
    (h + h.transpose()) * 0.5
}

/// Keeps the `s` largest-magnitude entries of `v` and zeroes the rest.
///
/// Ties are broken toward the lower index so the result is platform
/// independent.
pub fn hard_threshold(v: &DVector<f64>, s: usize) -> Result<DVector<f64>> {
    let d = v.len();
    if s < 1 || s > d {
        return Err(Error::param("s", alloc::format!("must lie in 1..={d}, got {s}")));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        v[j].abs()
            .partial_cmp(&v[i].abs())
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut out = DVector::zeros(d);
    for &i in &order[..s] {
        out[i] = v[i];
    }
    Ok(out)
}

/// Angle between two nonzero vectors, in `[0, π]`.
pub fn angle(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::param("angle", "zero vector has no direction"));
    }
    let c = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(libm::acos(c))
}

pub fn project_l2_ball(v: &DVector<f64>, center: &DVector<f64>, r: f64) -> DVector<f64> {
    let diff = v - center;
    let n = diff.norm();
    if n <= r {
        v.clone()
    } else {
        center + diff * (r / n)
    }
}

/// Soft-threshold level `θ ≥ 0` such that `Σ max(a_i − θ, 0) = budget` for a
/// non-negative vector `a` whose sum exceeds `budget`.
fn simplex_threshold(a: &[f64], budget: f64) -> f64 {
    let mut sorted: Vec<f64> = a.to_vec();
    sorted.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - budget) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

fn project_l1_slice(w: &mut [f64], rho: f64) {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if l1 <= rho {
        return;
    }
    if rho == 0.0 {
        w.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mags: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    let theta = simplex_threshold(&mags, rho);
    for x in w.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

/// Euclidean projection onto `B1(center, rho)` by the sort-based threshold
/// search.
pub fn project_l1_ball(v: &DVector<f64>, center: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
    if !(rho >= 0.0) {
        return Err(Error::param("rho", "must be non-negative"));
    }
    let mut diff = v - center;
    project_l1_slice(diff.as_mut_slice(), rho);
    Ok(diff + center)
}

/// Euclidean projection onto `W = B2(c, r) ∩ B1(c, rho)`.
pub fn project_w(v: &DVector<f64>, w: &BallPair, opts: &DykstraOptions) -> Result<DVector<f64>> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if w.contains(v, 0.0) {
        return Ok(v.clone());
    }
    // Either single projection already landing in the other set is the answer.
    let p2 = project_l2_ball(v, &w.center, w.r);
    if l1_norm(&(&p2 - &w.center)) <= w.rho {
        return Ok(p2);
    }
    let p1 = project_l1_ball(v, &w.center, w.rho)?;
    if (&p1 - &w.center).norm() <= w.r {
        return Ok(p1);
    }

    let mut x = v.clone();
    let mut p = DVector::zeros(v.len());
    let mut q = DVector::zeros(v.len());
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let y = project_l2_ball(&(&x + &p), &w.center, w.r);
        p = &x + &p - &y;
        let x_next = project_l1_ball(&(&y + &q), &w.center, w.rho)?;
        q = &y + &q - &x_next;
        let step = (&x_next - &x).norm();
        let gap = (&x_next - &y).norm();
        residual = step.max(gap);
        x = x_next;
        // A stalled iterate with a small gap is a rounding limit cycle at a
        // tangential intersection.
        if residual <= opts.tol || (step <= opts.tol * 1e-3 && gap <= libm::sqrt(opts.tol)) {
            return Ok(x);
        }
    }
    Err(Error::VectorSolver {
        solver: "dykstra(W)",
        iterations: opts.max_iter,
        residual,
        last: x,
    })
}

/// Projection onto `{H ⪰ 0, tr H ≤ r_sq}`: clip the spectrum at zero and,
/// when the trace budget binds, project it onto the scaled simplex.
pub fn project_spectral(h: &DMatrix<f64>, r_sq: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(h));
    let mut lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = lambda.iter().sum();
    if total > r_sq {
        let theta = simplex_threshold(&lambda, r_sq);
        lambda.iter_mut().for_each(|l| *l = (*l - theta).max(0.0));
    }
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * lambda[j]);
    symmetrize(&(scaled * q.transpose()))
}

/// Projection onto the entrywise ℓ₁ ball of radius `rho_sq`. Symmetric input
/// stays symmetric because mirrored entries share one threshold.
pub fn project_entrywise_l1(h: &DMatrix<f64>, rho_sq: f64) -> DMatrix<f64> {
    let mut out = h.clone();
    project_l1_slice(out.as_mut_slice(), rho_sq);
    out
}

/// Euclidean (Frobenius) projection onto `M`.
///
/// The PSD cone and the trace ball are merged into one spectral set whose
/// projection is exact, leaving a two-set Dykstra loop against the
/// entrywise ℓ₁ ball.
pub fn project_m(h: &DMatrix<f64>, m: &MatBall, opts: &DykstraOptions) -> Result<DMatrix<f64>> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let h = symmetrize(h);
    let spectral = project_spectral(&h, m.r_sq);
    if entrywise_l1(&spectral) <= m.rho_sq {
        return Ok(spectral);
    }
    let l1 = project_entrywise_l1(&h, m.rho_sq);
    if (&l1 - project_spectral(&l1, m.r_sq)).norm() <= opts.tol * 1e-3 {
        return Ok(l1);
    }

    let n = h.nrows();
    let mut x = h;
    let mut p = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let y = project_spectral(&(&x + &p), m.r_sq);
        p = &x + &p - &y;
        let x_next = project_entrywise_l1(&(&y + &q), m.rho_sq);
        q = &y + &q - &x_next;
        let step = (&x_next - &x).norm();
        let gap = (&x_next - &y).norm();
        residual = step.max(gap);
        x = x_next;
        // A stalled iterate with a small gap is a rounding limit cycle at a
        // tangential intersection.
        if residual <= opts.tol || (step <= opts.tol * 1e-3 && gap <= libm::sqrt(opts.tol)) {
            return Ok(x);
        }
    }
    Err(Error::MatrixSolver {
        solver: "dykstra(M)",
        iterations: opts.max_iter,
        residual,
        last: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn dv(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn hard_threshold_examples() {
        assert_eq!(hard_threshold(&dv(&[3.0, -1.0, 2.0, 0.5]), 2).unwrap(), dv(&[3.0, 0.0, 2.0, 0.0]));
        assert_eq!(hard_threshold(&dv(&[1.0, -1.0, 1.0]), 2).unwrap(), dv(&[1.0, -1.0, 0.0]));
        let v = dv(&[0.3, -2.0, 1.0]);
        assert_eq!(hard_threshold(&v, 3).unwrap(), v);
    }

    #[test]
    fn hard_threshold_rejects_bad_sparsity() {
        let v = dv(&[1.0, 2.0]);
        assert!(matches!(hard_threshold(&v, 0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(hard_threshold(&v, 3), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn angle_examples() {
        let e1 = dv(&[1.0, 0.0]);
        let e2 = dv(&[0.0, 1.0]);
        let diag = dv(&[1.0, 1.0]) / 2f64.sqrt();
        assert!(close(angle(&e1, &e1).unwrap(), 0.0, 1e-12));
        assert!(close(angle(&e1, &e2).unwrap(), core::f64::consts::FRAC_PI_2, 1e-12));
        assert!(close(angle(&e1, &diag).unwrap(), core::f64::consts::FRAC_PI_4, 1e-12));
        assert!(angle(&e1, &dv(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn l1_projection_examples() {
        let zero = dv(&[0.0, 0.0]);
        let p = project_l1_ball(&dv(&[2.0, 0.0]), &zero, 1.0).unwrap();
        assert!((p - dv(&[1.0, 0.0])).norm() < 1e-12);
        let p = project_l1_ball(&dv(&[1.0, 1.0]), &zero, 1.0).unwrap();
        assert!((p - dv(&[0.5, 0.5])).norm() < 1e-12);
        let inside = dv(&[0.2, -0.3]);
        assert_eq!(project_l1_ball(&inside, &zero, 1.0).unwrap(), inside);
        assert!(project_l1_ball(&inside, &zero, -1.0).is_err());
    }

    #[test]
    fn project_w_examples() {
        let opts = DykstraOptions::default();
        let w = BallPair::new(dv(&[0.0, 0.0]), 1.0, 2.0).unwrap();
        let p = project_w(&dv(&[3.0, 0.0]), &w, &opts).unwrap();
        assert!((p - dv(&[1.0, 0.0])).norm() < 1e-12);
        let inside = dv(&[0.1, 0.2]);
        assert_eq!(project_w(&inside, &w, &opts).unwrap(), inside);
        // (2,2) onto r = 1, rho = 1: symmetric, so the answer is (1/2, 1/2).
        let w = BallPair::new(dv(&[0.0, 0.0]), 1.0, 1.0).unwrap();
        let p = project_w(&dv(&[2.0, 2.0]), &w, &opts).unwrap();
        assert!((p - dv(&[0.5, 0.5])).norm() < 1e-6);
    }

    #[test]
    fn project_m_stops_on_rounding_cycle() {
        let y = DMatrix::from_row_slice(
            3,
            3,
            &[
                2.057076119670425, -0.222130005538659, -0.4563934745556979,
                -0.222130005538659, 1.1862761185872437, 0.7642831335202743,
                -0.4563934745556979, 0.7642831335202743, -1.503442837060066,
            ],
        );
        let m = MatBall::new(0.5779392700848125, 0.5784051038960092).unwrap();
        let p = project_m(&y, &m, &DykstraOptions { max_iter: 100_000, tol: 1e-9 }).unwrap();
        assert!(m.contains(&p, 1e-6));
        assert!(close(p[(0, 0)], 0.5779, 1e-4));
    }

    #[test]
    fn project_m_examples() {
        let opts = DykstraOptions::default();
        let m = MatBall::new(1.0, 10.0).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = project_m(&h, &m, &opts).unwrap();
        assert!((p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-10);
        let inside = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let p = project_m(&inside, &m, &opts).unwrap();
        assert!((p - inside).norm() < 1e-12);
    }

    #[test]
    fn spectral_projection_clips_and_caps() {
        let h = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let p = project_spectral(&h, 2.0);
        assert!((p - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).norm() < 1e-12);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let p = project_spectral(&h, 1.0);
        assert!((p - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_radii() {
        assert!(BallPair::new(dv(&[0.0]), -1.0, 1.0).is_err());
        assert!(MatBall::new(1.0, f64::NAN).is_err());
    }
}
