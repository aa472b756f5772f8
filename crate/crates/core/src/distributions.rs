//! Isotropic log-concave instance distributions and band-conditioned
//! rejection sampling.
//!
//! Every kind is a product of i.i.d. one-dimensional laws scaled to zero mean
//! and unit variance, so each kind is log-concave and isotropic.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogConcaveKind {
    Gaussian,
    /// Laplace with scale `1/√2`.
    LaplaceIsotropic,
    /// Uniform on `[−√3, √3]`.
    UniformCubeIsotropic,
    /// Logistic with scale `√3/π`.
    LogisticIsotropic,
}

impl LogConcaveKind {
    pub const ALL: [LogConcaveKind; 4] = [
        LogConcaveKind::Gaussian,
        LogConcaveKind::LaplaceIsotropic,
        LogConcaveKind::UniformCubeIsotropic,
        LogConcaveKind::LogisticIsotropic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LogConcaveKind::Gaussian => "gaussian",
            LogConcaveKind::LaplaceIsotropic => "laplace_isotropic",
            LogConcaveKind::UniformCubeIsotropic => "uniform_cube_isotropic",
            LogConcaveKind::LogisticIsotropic => "logistic_isotropic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// One coordinate draw with mean 0 and variance 1.
    pub fn sample_coord<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            LogConcaveKind::Gaussian => StandardNormal.sample(rng),
            LogConcaveKind::LaplaceIsotropic => {
                let u: f64 = Open01.sample(rng);
                let e = -libm::log(u);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e * core::f64::consts::FRAC_1_SQRT_2
            }
            LogConcaveKind::UniformCubeIsotropic => {
                let half = libm::sqrt(3.0);
                rng.random_range(-half..half)
            }
            LogConcaveKind::LogisticIsotropic => {
                let u: f64 = Open01.sample(rng);
                libm::sqrt(3.0) / PI * libm::log(u / (1.0 - u))
            }
        }
    }
}

impl core::fmt::Display for LogConcaveKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogConcaveDist {
    pub kind: LogConcaveKind,
    pub dim: usize,
}

impl LogConcaveDist {
    pub fn new(kind: LogConcaveKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(LogConcaveDist { kind, dim })
    }
}

/// The slab `{x : |u·x| ≤ b}`. A zero `u` makes the band the whole space.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    u: DVector<f64>,
    b: f64,
    support: Vec<usize>,
}

impl Band {
    /// `u` must be unit or zero within `1e-12`, and `b` positive.
    pub fn new(u: DVector<f64>, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::param("b", "band half-width must be positive"));
        }
        let norm = u.norm();
        if !(norm <= 1e-12 || (norm - 1.0).abs() <= 1e-12) {
            return Err(Error::param("u", alloc::format!("band direction must be unit or zero, norm {norm}")));
        }
        let support = (0..u.len()).filter(|&i| u[i] != 0.0).collect();
        Ok(Band { u, b, support })
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn is_whole_space(&self) -> bool {
        self.support.is_empty()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.u.dot(x).abs() <= self.b
    }

    /// Moves `x` along `u` just far enough to land inside the band.
    pub fn clamp_into(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.is_whole_space() {
            return x.clone();
        }
        let t = self.u.dot(x);
        let clamped = t.clamp(-self.b, self.b);
        let mut out = x - &self.u * (t - clamped);
        // Rounding can leave the projection a hair outside; the nudge doubles
        // so it eventually exceeds the ulp of large coordinates.
        let mut step = f64::EPSILON * self.b.max(x.amax());
        while self.u.dot(&out).abs() > self.b {
            out -= &self.u * (self.u.dot(&out).signum() * step);
            step *= 2.0;
        }
        out
    }
}

/// An accepted band draw together with the number of oracle calls it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDraw {
    pub x: DVector<f64>,
    pub attempts: u64,
}

pub fn sample<R: Rng + ?Sized>(dist: &LogConcaveDist, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dist.dim, |_, _| dist.kind.sample_coord(rng))
}

/// Default rejection budget per accepted draw, `⌈50/(c8·b)⌉`.
pub fn default_max_rejects(c8: f64, b: f64) -> u64 {
    libm::ceil(50.0 / (c8 * b)).max(1.0) as u64
}

/// Draws from `dist` conditioned on the band by rejection.
///
/// Coordinates on the band direction's support are drawn first and tested;
/// the remaining coordinates are filled only on acceptance. Independence of
/// the coordinates makes this equal in law to testing a full draw.
pub fn sample_band<R: Rng + ?Sized>(
    dist: &LogConcaveDist,
    band: &Band,
    rng: &mut R,
    max_rejects: u64,
) -> Result<BandDraw> {
    if max_rejects < 1 {
        return Err(Error::param("max_rejects", "must be at least 1"));
    }
    if band.u.len() != dist.dim {
        return Err(Error::param("band", "direction dimension differs from the distribution"));
    }
    if band.is_whole_space() {
        return Ok(BandDraw {
            x: sample(dist, rng),
            attempts: 1,
        });
    }
    let mut head = Vec::with_capacity(band.support.len());
    for attempt in 1..=max_rejects {
        head.clear();
        let mut proj = 0.0;
        for &i in &band.support {
            let xi = dist.kind.sample_coord(rng);
            proj += band.u[i] * xi;
            head.push(xi);
        }
        if proj.abs() <= band.b {
            let mut x = DVector::zeros(dist.dim);
            let mut next = 0;
            for i in 0..dist.dim {
                if next < band.support.len() && band.support[next] == i {
                    x[i] = head[next];
                    next += 1;
                } else {
                    x[i] = dist.kind.sample_coord(rng);
                }
            }
            return Ok(BandDraw { x, attempts: attempt });
        }
    }
    Err(Error::RejectionBudget {
        max_rejects,
        band_width: band.b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seeded_draws_repeat() {
        let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, 2).unwrap();
        let a = sample(&dist, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample(&dist, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_direction_band_is_unconditioned() {
        let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, 3).unwrap();
        let band = Band::new(DVector::zeros(3), 0.125).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_band(&dist, &band, &mut rng, 1).unwrap().attempts, 1);
        }
    }

    #[test]
    fn band_draws_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = DVector::from_column_slice(&[0.6, 0.0, 0.8, 0.0]);
        let band = Band::new(u, 0.05).unwrap();
        for kind in LogConcaveKind::ALL {
            let dist = LogConcaveDist::new(kind, 4).unwrap();
            for _ in 0..500 {
                let draw = sample_band(&dist, &band, &mut rng, 100_000).unwrap();
                assert!(band.contains(&draw.x));
            }
        }
    }

    #[test]
    fn rejection_budget_is_enforced() {
        let dist = LogConcaveDist::new(LogConcaveKind::Gaussian, 2).unwrap();
        let band = Band::new(DVector::from_column_slice(&[1.0, 0.0]), 1e-9).unwrap();
        let err = sample_band(&dist, &band, &mut ChaCha8Rng::seed_from_u64(0), 10).unwrap_err();
        assert!(matches!(err, Error::RejectionBudget { max_rejects: 10, .. }));
    }

    #[test]
    fn band_regularity_checked() {
        assert!(Band::new(DVector::from_column_slice(&[0.5, 0.0]), 0.1).is_err());
        assert!(Band::new(DVector::from_column_slice(&[1.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn clamp_into_lands_in_band() {
        let band = Band::new(DVector::from_column_slice(&[0.6, 0.8]), 0.1).unwrap();
        let x = DVector::from_column_slice(&[30.0, -7.0]);
        assert!(band.contains(&band.clamp_into(&x)));
    }

    #[test]
    fn clamp_into_handles_large_coordinates() {
        let u = DVector::from_column_slice(&[0.3, -0.5, 0.2, 0.787_400_787_401_181]);
        let u = &u / u.norm();
        let band = Band::new(u, 0.05).unwrap();
        for scale in [1e2, 1e4, 1e6] {
            let x = DVector::from_column_slice(&[scale, -scale * 0.7, scale * 1.3, scale]);
            let y = band.clamp_into(&x);
            assert!(band.contains(&y));
            assert!((&y - &x).norm() <= scale * 10.0);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in LogConcaveKind::ALL {
            assert_eq!(LogConcaveKind::from_name(kind.name()), Some(kind));
        }
    }
}
