//! Geometric mmWave channels with clustered angles, and channel-correlation
//! statistics.
//!
//! Both ends use uniform linear arrays. The channel of user `k` in group `i`
//! is a sum of `M_p` rank-one path contributions
//!
//! ```text
//! H_k = sqrt(N_tx N_rx / M_p) Σ_l α_l a_rx(θ_l^AoA) a_tx(θ_l^AoD)^H,   α_l ~ CN(0, 1)
//! ```
//!
//! with departure angles uniform in the group's mean ± the AoD spread and
//! arrival angles uniform in the user's mean ± the AoA spread, so that
//! `E‖H_k‖²_F = N_tx N_rx`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::precoding::GroupAssignment;
use crate::random::complex_normal;
use crate::{CMat, CVec, Result, SimError, C64};

/// A uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
}

impl ArrayGeometry {
    /// A half-wavelength array.
    pub fn new(num_elements: usize) -> Result<Self> {
        Self::with_spacing(num_elements, 0.5)
    }

    pub fn with_spacing(num_elements: usize, element_spacing: f64) -> Result<Self> {
        let g = Self {
            num_elements,
            element_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(SimError::InvalidInput(
                "array needs at least one element".into(),
            ));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "element spacing must be positive, got {}",
                self.element_spacing
            )));
        }
        Ok(())
    }
}

/// Mean angles and spreads of the propagation paths, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleProfile {
    /// Mean angle of departure of each multicast group.
    pub group_mean_aod: Vec<f64>,
    /// Mean angle of arrival of each user.
    pub user_mean_aoa: Vec<f64>,
    pub spread_aod: f64,
    pub spread_aoa: f64,
    pub num_paths: usize,
}

impl AngleProfile {
    pub fn validate(&self, groups: &GroupAssignment) -> Result<()> {
        if self.group_mean_aod.len() != groups.num_groups() {
            return Err(SimError::dim(
                "group mean AoDs",
                groups.num_groups(),
                self.group_mean_aod.len(),
            ));
        }
        if self.user_mean_aoa.len() != groups.num_users() {
            return Err(SimError::dim(
                "user mean AoAs",
                groups.num_users(),
                self.user_mean_aoa.len(),
            ));
        }
        if !(self.spread_aod >= 0.0 && self.spread_aoa >= 0.0) {
            return Err(SimError::InvalidInput(
                "angular spreads must be nonnegative".into(),
            ));
        }
        if self.num_paths == 0 {
            return Err(SimError::InvalidInput(
                "need at least one propagation path".into(),
            ));
        }
        Ok(())
    }
}

/// Per-user channel matrices `H_k` (`N_rx × N_tx`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    matrices: Vec<CMat>,
}

impl ChannelSet {
    pub fn new(matrices: Vec<CMat>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(SimError::InvalidInput(
                "channel set needs at least one user".into(),
            ));
        };
        let shape = first.shape();
        for (k, h) in matrices.iter().enumerate() {
            if h.shape() != shape {
                return Err(SimError::InvalidInput(format!(
                    "channel of user {k} has shape {:?}, expected {:?}",
                    h.shape(),
                    shape
                )));
            }
            if h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(SimError::InvalidInput(format!(
                    "channel of user {k} is not finite"
                )));
            }
        }
        Ok(Self { matrices })
    }

    pub fn user(&self, k: usize) -> &CMat {
        &self.matrices[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMat> {
        self.matrices.iter()
    }

    pub fn num_users(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_rx(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.matrices[0].ncols()
    }
}

/// Maps an angle in degrees to `[-180, 180)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    (angle + 180.0).rem_euclid(360.0) - 180.0
}

/// Unit-norm steering vector: `[a]_n = exp(j 2π d n sin θ) / sqrt(N)`.
pub fn array_response(geometry: &ArrayGeometry, angle_deg: f64) -> CVec {
    let n = geometry.num_elements;
    let phase =
        2.0 * std::f64::consts::PI * geometry.element_spacing * angle_deg.to_radians().sin();
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| C64::from_polar(scale, phase * i as f64))
}

fn uniform_around<R: Rng + ?Sized>(rng: &mut R, mean: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        return wrap_degrees(mean);
    }
    wrap_degrees(rng.random_range(mean - spread..=mean + spread))
}

/// Draws one channel realization for every user.
pub fn sample_channel<R: Rng + ?Sized>(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    profile: &AngleProfile,
    groups: &GroupAssignment,
    rng: &mut R,
) -> Result<ChannelSet> {
    tx.validate()?;
    rx.validate()?;
    profile.validate(groups)?;
    let (n_tx, n_rx, m_p) = (tx.num_elements, rx.num_elements, profile.num_paths);
    let gain = ((n_tx * n_rx) as f64 / m_p as f64).sqrt();
    let mut matrices = Vec::with_capacity(groups.num_users());
    for k in 0..groups.num_users() {
        let aod_mean = profile.group_mean_aod[groups.group_of(k)];
        let aoa_mean = profile.user_mean_aoa[k];
        let mut h = CMat::zeros(n_rx, n_tx);
        for _ in 0..m_p {
            let aod = uniform_around(rng, aod_mean, profile.spread_aod);
            let aoa = uniform_around(rng, aoa_mean, profile.spread_aoa);
            let alpha = complex_normal(rng) * gain;
            let a_rx = array_response(rx, aoa);
            let a_tx = array_response(tx, aod);
            h += (a_rx * a_tx.adjoint()) * alpha;
        }
        matrices.push(h);
    }
    ChannelSet::new(matrices)
}

/// Normalized Frobenius correlation `|⟨A, B⟩_F| / (‖A‖_F ‖B‖_F)`.
pub fn channel_correlation(a: &CMat, b: &CMat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(SimError::InvalidInput(format!(
            "channel shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(SimError::InvalidInput(
            "correlation of a zero channel is undefined".into(),
        ));
    }
    let inner: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok((inner.norm() / (na * nb)).min(1.0))
}

/// Binned distributions of intra-group and inter-group channel correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    /// `num_bins + 1` edges spanning `[0, 1]`.
    pub edges: Vec<f64>,
    /// Probability mass per bin; sums to 1 unless there are no pairs.
    pub intra: Vec<f64>,
    pub inter: Vec<f64>,
    pub intra_mean: f64,
    pub inter_mean: f64,
    pub intra_pairs: usize,
    pub inter_pairs: usize,
}

/// Accumulates pair correlations over any number of channel realizations.
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    num_bins: usize,
    intra_counts: Vec<usize>,
    inter_counts: Vec<usize>,
    intra_sum: f64,
    inter_sum: f64,
}

impl CorrelationAccumulator {
    pub fn new(num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(SimError::InvalidInput(
                "histogram needs at least one bin".into(),
            ));
        }
        Ok(Self {
            num_bins,
            intra_counts: vec![0; num_bins],
            inter_counts: vec![0; num_bins],
            intra_sum: 0.0,
            inter_sum: 0.0,
        })
    }

    fn bin(&self, rho: f64) -> usize {
        ((rho * self.num_bins as f64) as usize).min(self.num_bins - 1)
    }

    /// Adds every unordered user pair of one realization.
    pub fn add(&mut self, channels: &ChannelSet, groups: &GroupAssignment) -> Result<()> {
        if channels.num_users() != groups.num_users() {
            return Err(SimError::dim(
                "channel set users",
                groups.num_users(),
                channels.num_users(),
            ));
        }
        let k = channels.num_users();
        for a in 0..k {
            for b in (a + 1)..k {
                let rho = channel_correlation(channels.user(a), channels.user(b))?;
                let bin = self.bin(rho);
                if groups.group_of(a) == groups.group_of(b) {
                    self.intra_counts[bin] += 1;
                    self.intra_sum += rho;
                } else {
                    self.inter_counts[bin] += 1;
                    self.inter_sum += rho;
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> CorrelationHistogram {
        let normalize = |counts: &[usize]| -> (Vec<f64>, usize) {
            let total: usize = counts.iter().sum();
            let probs = counts
                .iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect();
            (probs, total)
        };
        let (intra, intra_pairs) = normalize(&self.intra_counts);
        let (inter, inter_pairs) = normalize(&self.inter_counts);
        let mean = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
        CorrelationHistogram {
            edges: (0..=self.num_bins)
                .map(|i| i as f64 / self.num_bins as f64)
                .collect(),
            intra,
            inter,
            intra_mean: mean(self.intra_sum, intra_pairs),
            inter_mean: mean(self.inter_sum, inter_pairs),
            intra_pairs,
            inter_pairs,
        }
    }
}

/// Correlation histogram of a single realization.
pub fn correlation_histogram(
    channels: &ChannelSet,
    groups: &GroupAssignment,
    num_bins: usize,
) -> Result<CorrelationHistogram> {
    if channels.num_users() < 2 {
        return Err(SimError::InvalidInput(
            "correlation histogram needs at least two users".into(),
        ));
    }
    let mut acc = CorrelationAccumulator::new(num_bins)?;
    acc.add(channels, groups)?;
    Ok(acc.finish())
}
