//! Signal-domain types and metrics: the phase alphabet, hybrid precoders,
//! receive combiners, group structure, SINR, transmit power and beam
//! patterns.
//!
//! The SINR of user `k` in group `i` is
//!
//! ```text
//! SINR_k = |w_k^H H_k F m_i|² / (Σ_{j≠i} |w_k^H H_k F m_j|² + σ² ‖w_k‖²)
//! ```
//!
//! and the transmit power is `Σ_i ‖F m_i‖²`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ArrayGeometry, ChannelSet};
use crate::{CMat, CVec, Result, SimError, C64};

/// Relative tolerance for the receive power budget `‖w_k‖² = P_rx`.
pub const COMBINER_NORM_TOL: f64 = 1e-9;

/// Ties in phase selection closer than this (in units of the alphabet step)
/// are resolved towards the lower index.
const TIE_EPS: f64 = 1e-12;

/// `L` equally spaced phases on a circle of radius `modulus`:
/// element `l` is `modulus · exp(j 2π l / L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAlphabet {
    pub num_levels: usize,
    pub modulus: f64,
}

impl PhaseAlphabet {
    /// Alphabet with per-entry power `delta` (modulus `sqrt(delta)`).
    pub fn new(num_levels: usize, delta: f64) -> Result<Self> {
        if num_levels == 0 {
            return Err(SimError::InvalidInput(
                "phase alphabet needs at least one level".into(),
            ));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "alphabet power must be positive, got {delta}"
            )));
        }
        Ok(Self {
            num_levels,
            modulus: delta.sqrt(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.modulus * self.modulus
    }

    pub fn phase(&self, index: usize) -> f64 {
        TAU * index as f64 / self.num_levels as f64
    }

    pub fn element(&self, index: usize) -> C64 {
        C64::from_polar(self.modulus, self.phase(index))
    }

    /// Index of the element whose phase is closest to `angle` (radians).
    /// Exact midpoints go to the lower index; index 0 counts as lower than
    /// `L − 1` across the wrap.
    pub fn nearest_phase_index(&self, angle: f64) -> usize {
        let l = self.num_levels;
        let t = angle.rem_euclid(TAU) / TAU * l as f64;
        let below = t.floor();
        let frac = t - below;
        let lo = (below as usize) % l;
        let hi = (lo + 1) % l;
        if (frac - 0.5).abs() < TIE_EPS {
            lo.min(hi)
        } else if frac < 0.5 {
            lo
        } else {
            hi
        }
    }

    /// Index maximizing `Re(element · z)`, i.e. phase closest to `arg(z*)`.
    /// `z = 0` has no phase and maps to index 0.
    pub fn select_for(&self, z: C64) -> usize {
        if z == C64::new(0.0, 0.0) {
            return 0;
        }
        self.nearest_phase_index(-z.arg())
    }

    /// Index of the element closest in phase to `value`.
    pub fn quantize(&self, value: C64) -> usize {
        if value == C64::new(0.0, 0.0) {
            return 0;
        }
        self.nearest_phase_index(value.arg())
    }
}

/// Analog precoder whose entries are alphabet elements, stored as indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogPrecoder {
    n_tx: usize,
    n_rf: usize,
    /// Column-major: entry `(q, r)` at `r · n_tx + q`, matching `vec(F)`.
    indices: Vec<usize>,
    alphabet: PhaseAlphabet,
    matrix: CMat,
}

impl AnalogPrecoder {
    pub fn from_indices(
        n_tx: usize,
        n_rf: usize,
        indices: Vec<usize>,
        alphabet: PhaseAlphabet,
    ) -> Result<Self> {
        if indices.len() != n_tx * n_rf {
            return Err(SimError::dim(
                "analog precoder indices",
                n_tx * n_rf,
                indices.len(),
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&l| l >= alphabet.num_levels) {
            return Err(SimError::InvalidInput(format!(
                "phase index {bad} outside alphabet of size {}",
                alphabet.num_levels
            )));
        }
        let matrix = CMat::from_fn(n_tx, n_rf, |q, r| alphabet.element(indices[r * n_tx + q]));
        Ok(Self {
            n_tx,
            n_rf,
            indices,
            alphabet,
            matrix,
        })
    }

    /// Every entry at phase index 0.
    pub fn uniform(n_tx: usize, n_rf: usize, alphabet: PhaseAlphabet) -> Self {
        Self::from_indices(n_tx, n_rf, vec![0; n_tx * n_rf], alphabet)
            .expect("index 0 is always in the alphabet")
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn alphabet(&self) -> &PhaseAlphabet {
        &self.alphabet
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    /// `vec(F)`, stacking columns.
    pub fn vectorized(&self) -> CVec {
        CVec::from_iterator(self.n_tx * self.n_rf, self.matrix.iter().copied())
    }
}

/// The transmit analog stage: either phase shifters or a fully-digital
/// transmitter (`F = I`).
#[derive(Debug, Clone, PartialEq)]
pub enum TransmitAnalog {
    FullyDigital { n_tx: usize },
    Phased(AnalogPrecoder),
}

impl TransmitAnalog {
    pub fn matrix(&self) -> CMat {
        match self {
            TransmitAnalog::FullyDigital { n_tx } => CMat::identity(*n_tx, *n_tx),
            TransmitAnalog::Phased(p) => p.matrix().clone(),
        }
    }

    /// Number of RF chains, i.e. the digital dimension.
    pub fn n_rf(&self) -> usize {
        match self {
            TransmitAnalog::FullyDigital { n_tx } => *n_tx,
            TransmitAnalog::Phased(p) => p.n_rf(),
        }
    }
}

/// One digital precoder `m_i` per multicast group.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalPrecoderSet {
    columns: Vec<CVec>,
}

impl DigitalPrecoderSet {
    pub fn new(columns: Vec<CVec>) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(SimError::InvalidInput(
                "need at least one digital precoder".into(),
            ));
        };
        let n = first.len();
        for (i, m) in columns.iter().enumerate() {
            if m.len() != n {
                return Err(SimError::dim(
                    format!("digital precoder of group {i}"),
                    n,
                    m.len(),
                ));
            }
            if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(SimError::InvalidInput(format!(
                    "digital precoder of group {i} is not finite"
                )));
            }
        }
        Ok(Self { columns })
    }

    /// `m_i = e₁` for every group.
    pub fn omnidirectional(n_rf: usize, num_groups: usize) -> Self {
        let mut e1 = CVec::zeros(n_rf);
        e1[0] = C64::new(1.0, 0.0);
        Self {
            columns: vec![e1; num_groups],
        }
    }

    pub fn column(&self, i: usize) -> &CVec {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[CVec] {
        &self.columns
    }

    pub fn num_groups(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }
}

/// One receive combiner per user, each with `‖w_k‖² = P_rx`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerSet {
    vectors: Vec<CVec>,
    p_rx: f64,
}

fn check_combiner(k: usize, w: &CVec, p_rx: f64) -> Result<()> {
    let power = w.norm_squared();
    if (power - p_rx).abs().is_nan() || (power - p_rx).abs() > COMBINER_NORM_TOL * p_rx {
        return Err(SimError::InvalidInput(format!(
            "combiner of user {k} has power {power}, budget is {p_rx}"
        )));
    }
    Ok(())
}

impl CombinerSet {
    pub fn new(vectors: Vec<CVec>, p_rx: f64) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(SimError::InvalidInput("need at least one combiner".into()));
        };
        let n = first.len();
        for (k, w) in vectors.iter().enumerate() {
            if w.len() != n {
                return Err(SimError::dim(format!("combiner of user {k}"), n, w.len()));
            }
            check_combiner(k, w, p_rx)?;
        }
        Ok(Self { vectors, p_rx })
    }

    /// Only the first antenna active: `w_k = sqrt(P_rx) e₁`.
    pub fn omnidirectional(num_users: usize, n_rx: usize, p_rx: f64) -> Self {
        let mut w = CVec::zeros(n_rx);
        w[0] = C64::new(p_rx.sqrt(), 0.0);
        Self {
            vectors: vec![w; num_users],
            p_rx,
        }
    }

    pub fn vector(&self, k: usize) -> &CVec {
        &self.vectors[k]
    }

    pub fn vectors(&self) -> &[CVec] {
        &self.vectors
    }

    pub fn set(&mut self, k: usize, w: CVec) -> Result<()> {
        if w.len() != self.vectors[k].len() {
            return Err(SimError::dim(
                format!("combiner of user {k}"),
                self.vectors[k].len(),
                w.len(),
            ));
        }
        check_combiner(k, &w, self.p_rx)?;
        self.vectors[k] = w;
        Ok(())
    }

    pub fn p_rx(&self) -> f64 {
        self.p_rx
    }

    pub fn num_users(&self) -> usize {
        self.vectors.len()
    }
}

/// A partition of the users into multicast groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    members: Vec<Vec<usize>>,
    user_group: Vec<usize>,
}

impl GroupAssignment {
    /// `num_users` users split into `num_groups` contiguous groups whose
    /// sizes differ by at most one.
    pub fn even(num_users: usize, num_groups: usize) -> Result<Self> {
        if num_groups == 0 || num_users < num_groups {
            return Err(SimError::InvalidInput(format!(
                "cannot split {num_users} users into {num_groups} non-empty groups"
            )));
        }
        let base = num_users / num_groups;
        let extra = num_users % num_groups;
        let mut members = Vec::with_capacity(num_groups);
        let mut next = 0;
        for i in 0..num_groups {
            let size = base + usize::from(i < extra);
            members.push((next..next + size).collect());
            next += size;
        }
        Self::from_groups(members)
    }

    /// Explicit groups; must partition `0..K` into non-empty sets.
    pub fn from_groups(members: Vec<Vec<usize>>) -> Result<Self> {
        let k: usize = members.iter().map(Vec::len).sum();
        let mut user_group = vec![usize::MAX; k];
        for (i, group) in members.iter().enumerate() {
            if group.is_empty() {
                return Err(SimError::InvalidInput(format!("group {i} is empty")));
            }
            for &u in group {
                if u >= k {
                    return Err(SimError::InvalidInput(format!(
                        "user {u} out of range for {k} users"
                    )));
                }
                if user_group[u] != usize::MAX {
                    return Err(SimError::InvalidInput(format!(
                        "user {u} belongs to two groups"
                    )));
                }
                user_group[u] = i;
            }
        }
        Ok(Self {
            members,
            user_group,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn group_of(&self, user: usize) -> usize {
        self.user_group[user]
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }
}

/// Per-group SINR targets, noise power and receive power budget (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct QosTargets {
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub p_rx: f64,
}

impl QosTargets {
    pub fn new(gamma: Vec<f64>, sigma2: f64, p_rx: f64) -> Result<Self> {
        if gamma.is_empty() || gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(SimError::InvalidInput(
                "SINR targets must be positive".into(),
            ));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(SimError::InvalidInput(
                "noise power must be positive".into(),
            ));
        }
        if !(p_rx > 0.0 && p_rx.is_finite()) {
            return Err(SimError::InvalidInput(
                "receive power budget must be positive".into(),
            ));
        }
        Ok(Self {
            gamma,
            sigma2,
            p_rx,
        })
    }

    /// Targets in dB, noise and budget in dBm.
    pub fn from_db(gamma_db: &[f64], sigma2_dbm: f64, prx_dbm: f64) -> Result<Self> {
        Self::new(
            gamma_db.iter().map(|&g| db_to_linear(g)).collect(),
            dbm_to_linear(sigma2_dbm),
            dbm_to_linear(prx_dbm),
        )
    }

    pub fn gamma_db(&self, group: usize) -> f64 {
        10.0 * self.gamma[group].log10()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to mW.
pub fn dbm_to_linear(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// mW to dBm; rejects nonpositive powers.
pub fn linear_to_dbm(mw: f64) -> Result<f64> {
    if mw.is_nan() || mw <= 0.0 {
        return Err(SimError::InvalidInput(format!(
            "cannot express {mw} mW in dBm"
        )));
    }
    Ok(10.0 * mw.log10())
}

/// SINR from the complex gains `c_j = w^H H F m_j` of one user.
pub fn sinr_from_gains(gains: &[C64], group: usize, noise: f64) -> Result<f64> {
    let signal = gains[group].norm_sqr();
    let interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != group)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    let denom = interference + noise;
    if denom == 0.0 {
        return Err(SimError::InvalidInput(
            "SINR denominator is zero (zero combiner)".into(),
        ));
    }
    Ok(signal / denom)
}

/// QoS deficit `γ (Σ_{j≠i} |c_j|² + noise) − |c_i|²`; nonpositive iff the
/// target is met.
pub fn qos_deficit(gains: &[C64], group: usize, gamma: f64, noise: f64) -> f64 {
    let signal = gains[group].norm_sqr();
    let interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != group)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    gamma * (interference + noise) - signal
}

fn check_shapes(h: &CMat, f: &CMat, precoders: &DigitalPrecoderSet, w: &CVec) -> Result<()> {
    if h.ncols() != f.nrows() {
        return Err(SimError::dim(
            "channel columns vs analog rows",
            f.nrows(),
            h.ncols(),
        ));
    }
    if f.ncols() != precoders.dim() {
        return Err(SimError::dim(
            "digital precoder length",
            f.ncols(),
            precoders.dim(),
        ));
    }
    if w.len() != h.nrows() {
        return Err(SimError::dim("combiner length", h.nrows(), w.len()));
    }
    Ok(())
}

/// Gains `w^H H F m_j` for every group `j`.
pub fn user_gains(
    h: &CMat,
    f: &CMat,
    precoders: &DigitalPrecoderSet,
    w: &CVec,
) -> Result<Vec<C64>> {
    check_shapes(h, f, precoders, w)?;
    let effective = f.adjoint() * (h.adjoint() * w);
    Ok(precoders
        .columns()
        .iter()
        .map(|m| effective.dotc(m))
        .collect())
}

/// SINR of one user.
pub fn sinr(
    h: &CMat,
    f: &CMat,
    precoders: &DigitalPrecoderSet,
    w: &CVec,
    group: usize,
    sigma2: f64,
) -> Result<f64> {
    if group >= precoders.num_groups() {
        return Err(SimError::InvalidInput(format!(
            "group {group} has no precoder"
        )));
    }
    let gains = user_gains(h, f, precoders, w)?;
    sinr_from_gains(&gains, group, sigma2 * w.norm_squared())
}

/// `Σ_i ‖F m_i‖²`.
pub fn total_tx_power(f: &CMat, precoders: &DigitalPrecoderSet) -> f64 {
    precoders
        .columns()
        .iter()
        .map(|m| (f * m).norm_squared())
        .sum()
}

/// Which users meet their SINR target (inclusive, no slack).
#[derive(Debug, Clone, PartialEq)]
pub struct Satisfaction {
    pub count: usize,
    pub mask: Vec<bool>,
    pub sinr: Vec<f64>,
}

impl Satisfaction {
    /// The mask as a 0/1 string, user 1 first.
    pub fn mask_string(&self) -> String {
        mask_string(&self.mask)
    }
}

pub fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn count_satisfied(
    channels: &ChannelSet,
    f: &CMat,
    precoders: &DigitalPrecoderSet,
    combiners: &CombinerSet,
    targets: &QosTargets,
    groups: &GroupAssignment,
) -> Result<Satisfaction> {
    let k = groups.num_users();
    if channels.num_users() != k || combiners.num_users() != k {
        return Err(SimError::dim(
            "users",
            k,
            channels.num_users().min(combiners.num_users()),
        ));
    }
    if precoders.num_groups() != groups.num_groups() || targets.gamma.len() != groups.num_groups() {
        return Err(SimError::dim(
            "groups",
            groups.num_groups(),
            precoders.num_groups(),
        ));
    }
    let mut mask = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for u in 0..k {
        let i = groups.group_of(u);
        let w = combiners.vector(u);
        let s = sinr(channels.user(u), f, precoders, w, i, targets.sigma2)?;
        mask.push(s >= targets.gamma[i]);
        values.push(s);
    }
    Ok(Satisfaction {
        count: mask.iter().filter(|&&b| b).count(),
        mask,
        sinr: values,
    })
}

/// `points` equally spaced angles from `start` to `stop` inclusive (degrees).
pub fn angle_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `|a_tx(θ)^H F m|` over the grid.
pub fn tx_beam_pattern(
    f: &CMat,
    m: &CVec,
    geometry: &ArrayGeometry,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if f.nrows() != geometry.num_elements || f.ncols() != m.len() {
        return Err(SimError::dim(
            "transmit beam pattern",
            geometry.num_elements,
            f.nrows(),
        ));
    }
    let x = f * m;
    Ok(grid
        .iter()
        .map(|&theta| (theta, array_response(geometry, theta).dotc(&x).norm()))
        .collect())
}

/// `|w^H a_rx(θ)|` over the grid.
pub fn rx_beam_pattern(
    w: &CVec,
    geometry: &ArrayGeometry,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if w.len() != geometry.num_elements {
        return Err(SimError::dim(
            "receive beam pattern",
            geometry.num_elements,
            w.len(),
        ));
    }
    Ok(grid
        .iter()
        .map(|&theta| (theta, w.dotc(&array_response(geometry, theta)).norm()))
        .collect())
}
