//! The three semidefinite relaxations of the alternating design and their
//! rank-one extraction stages.
//!
//! * Analog stage: with `f = vec(F)` and `J_i = m_iᵀ ⊗ I`, we have
//!   `F m_i = J_i f`. Lifting `D = f f^H` turns power and QoS terms into
//!   traces; dropping `rank(D) = 1` gives an SDP in `D` plus per-user slacks.
//!   Candidates are recovered from `D = Qᵀ Q*` by projecting `Q^H u` for a
//!   random unit `u` onto the phase alphabet, entry by entry.
//! * Digital stage: lifting `M_i = m_i m_i^H`; candidates are Gaussian draws
//!   `m_i ~ CN(0, M_i)`.
//! * Combiner stage: one SDP per user in `W_k = w_k w_k^H` with a fixed
//!   trace; candidates are `W_k v` for `v` uniform on the unit sphere,
//!   rescaled to the receive power budget.
//!
//! Every QoS constraint carries a nonnegative slack `x_k` penalized by `β`
//! in the objective, so the relaxations are always feasible.

use conic::{psd_sqrt_columns, BlockId, Coeff, Constraint, ScalarId, SdpProblem, Sense};
use rand::Rng;

use crate::channel::ChannelSet;
use crate::precoding::{
    qos_deficit, total_tx_power, user_gains, AnalogPrecoder, CombinerSet, DigitalPrecoderSet,
    GroupAssignment, PhaseAlphabet, QosTargets,
};
use crate::random::complex_normal_vec;
use crate::{CMat, CVec, Result, SimError, C64};

/// Consecutive zero draws tolerated before a combiner draw gives up.
pub const MAX_ZERO_DRAWS: usize = 16;

fn check_users(
    channels: &ChannelSet,
    targets: &QosTargets,
    groups: &GroupAssignment,
) -> Result<()> {
    if channels.num_users() != groups.num_users() {
        return Err(SimError::dim(
            "channel users",
            groups.num_users(),
            channels.num_users(),
        ));
    }
    if targets.gamma.len() != groups.num_groups() {
        return Err(SimError::dim(
            "SINR targets",
            groups.num_groups(),
            targets.gamma.len(),
        ));
    }
    Ok(())
}

/// `γ Σ_{j≠i} v_j v_j^H − v_i v_i^H`.
fn qos_form(vectors: &[CVec], group: usize, gamma: f64) -> CMat {
    let n = vectors[0].len();
    let mut q = CMat::zeros(n, n);
    for (j, v) in vectors.iter().enumerate() {
        let weight = if j == group { -1.0 } else { gamma };
        q.ger(C64::new(weight, 0.0), v, &v.conjugate(), C64::new(1.0, 0.0));
    }
    q
}

/// The analog-stage relaxation in `D` (dimension `N_RF · N_tx`).
#[derive(Debug, Clone)]
pub struct AnalogRelaxation {
    pub problem: SdpProblem,
    pub lift: BlockId,
    pub slacks: Vec<ScalarId>,
    pub n_tx: usize,
    pub n_rf: usize,
}

/// `(conj(m) mᵀ) ⊗ I_{n_tx}` summed over groups, as sparse entries.
fn analog_power_form(precoders: &DigitalPrecoderSet, n_tx: usize) -> Coeff {
    let n_rf = precoders.dim();
    let mut outer = CMat::zeros(n_rf, n_rf);
    for m in precoders.columns() {
        outer += m.conjugate() * m.transpose();
    }
    let mut entries = Vec::with_capacity(n_rf * n_rf * n_tx);
    for r in 0..n_rf {
        for s in 0..n_rf {
            let v = outer[(r, s)];
            if v != C64::new(0.0, 0.0) {
                for q in 0..n_tx {
                    entries.push((r * n_tx + q, s * n_tx + q, v));
                }
            }
        }
    }
    Coeff::Sparse {
        dim: n_rf * n_tx,
        entries,
    }
}

/// Builds the analog-stage relaxation for fixed digital precoders and
/// combiners:
///
/// ```text
/// min  Σ_i Tr(D R_i) + β Σ_k x_k
/// s.t. Tr(D (γ_i Σ_{j≠i} V_{j,k} − V_{i,k})) + σ² γ_i ‖w_k‖² ≤ x_k
///      [D]_{nn} = δ,  D ⪰ 0,  x ≥ 0
/// ```
///
/// with `R_i = J_i^H J_i` and `V_{j,k} = J_j^H H_k^H w_k w_k^H H_k J_j`.
pub fn build_p1(
    channels: &ChannelSet,
    precoders: &DigitalPrecoderSet,
    combiners: &CombinerSet,
    targets: &QosTargets,
    groups: &GroupAssignment,
    beta: f64,
    delta: f64,
) -> Result<AnalogRelaxation> {
    check_users(channels, targets, groups)?;
    if precoders.num_groups() != groups.num_groups() {
        return Err(SimError::dim(
            "digital precoders",
            groups.num_groups(),
            precoders.num_groups(),
        ));
    }
    let (n_tx, n_rf) = (channels.n_tx(), precoders.dim());
    let n = n_tx * n_rf;
    let mut problem = SdpProblem::new();
    let lift = problem.add_block("D", n);
    problem.set_block_objective(lift, analog_power_form(precoders, n_tx));
    let mut slacks = Vec::with_capacity(groups.num_users());
    for k in 0..groups.num_users() {
        let w = combiners.vector(k);
        if w.len() != channels.n_rx() {
            return Err(SimError::dim(
                format!("combiner of user {k}"),
                channels.n_rx(),
                w.len(),
            ));
        }
        let i = groups.group_of(k);
        let gamma = targets.gamma[i];
        let e = channels.user(k).adjoint() * w;
        // v_j = conj(m_j) ⊗ e  (so that v_j^H f = e^H F m_j).
        let vectors: Vec<CVec> = precoders
            .columns()
            .iter()
            .map(|m| kron(&m.conjugate(), &e))
            .collect();
        let x = problem.add_scalar(format!("x{k}"), true);
        problem.set_scalar_objective(x, beta);
        problem.add_constraint(
            Constraint::new(Sense::Le, -targets.sigma2 * gamma * w.norm_squared())
                .block(lift, qos_form(&vectors, i, gamma))
                .scalar(x, -1.0),
        );
        slacks.push(x);
    }
    for p in 0..n {
        problem.add_constraint(
            Constraint::new(Sense::Eq, delta).block(lift, Coeff::diagonal_unit(n, p, 1.0)),
        );
    }
    Ok(AnalogRelaxation {
        problem,
        lift,
        slacks,
        n_tx,
        n_rf,
    })
}

fn kron(a: &CVec, b: &CVec) -> CVec {
    let nb = b.len();
    CVec::from_fn(a.len() * nb, |p, _| a[p / nb] * b[p % nb])
}

/// Stage-wise phase recovery from a solved analog lift.
///
/// `D` is factored as `D = Qᵀ Q*`; for a unit vector `u`, `z_n = q_n^H u`
/// and every entry of `f` independently takes the alphabet phase closest to
/// `arg(z_n*)`.
#[derive(Debug, Clone)]
pub struct AnalogRecovery {
    /// `conj(B)` with `B B^H = D`, so that `z = conj(B) u`.
    projector: CMat,
    n_tx: usize,
    n_rf: usize,
}

impl AnalogRecovery {
    pub fn new(d_hat: &CMat, n_tx: usize, n_rf: usize) -> Result<Self> {
        if d_hat.nrows() != n_tx * n_rf {
            return Err(SimError::dim("analog lift", n_tx * n_rf, d_hat.nrows()));
        }
        // Q = Bᵀ, so column q_n of Q is row n of B and q_n^H u = (conj(B) u)_n.
        let b = psd_sqrt_columns(d_hat)?;
        Ok(Self {
            projector: b.map(|v| v.conj()),
            n_tx,
            n_rf,
        })
    }

    pub fn dim(&self) -> usize {
        self.projector.ncols()
    }

    /// The projections `z_n = q_n^H u`.
    pub fn projections(&self, u: &CVec) -> Result<CVec> {
        if u.len() != self.dim() {
            return Err(SimError::dim("recovery direction", self.dim(), u.len()));
        }
        Ok(&self.projector * u)
    }

    pub fn recover(&self, alphabet: &PhaseAlphabet, u: &CVec) -> Result<AnalogPrecoder> {
        let z = self.projections(u)?;
        let indices = z.iter().map(|&zn| alphabet.select_for(zn)).collect();
        AnalogPrecoder::from_indices(self.n_tx, self.n_rf, indices, *alphabet)
    }
}

/// One-shot phase recovery; see [`AnalogRecovery`].
pub fn recover_analog(
    d_hat: &CMat,
    alphabet: &PhaseAlphabet,
    u: &CVec,
    n_tx: usize,
    n_rf: usize,
) -> Result<AnalogPrecoder> {
    AnalogRecovery::new(d_hat, n_tx, n_rf)?.recover(alphabet, u)
}

/// The digital-stage relaxation, one `N_RF × N_RF` block per group.
#[derive(Debug, Clone)]
pub struct DigitalRelaxation {
    pub problem: SdpProblem,
    pub blocks: Vec<BlockId>,
    pub slacks: Vec<ScalarId>,
}

/// Builds the digital-stage relaxation for a fixed analog precoder and
/// combiners:
///
/// ```text
/// min  Σ_i Tr(Y M_i) + β Σ_k x_k,      Y = F^H F
/// s.t. Tr(X_k (γ_i Σ_{j≠i} M_j − M_i)) + σ² γ_i ‖w_k‖² ≤ x_k
///      M_i ⪰ 0,  x ≥ 0
/// ```
///
/// with `X_k = F^H H_k^H w_k w_k^H H_k F`.
pub fn build_p2(
    channels: &ChannelSet,
    f: &CMat,
    combiners: &CombinerSet,
    targets: &QosTargets,
    groups: &GroupAssignment,
    beta: f64,
) -> Result<DigitalRelaxation> {
    check_users(channels, targets, groups)?;
    if f.nrows() != channels.n_tx() {
        return Err(SimError::dim(
            "analog precoder rows",
            channels.n_tx(),
            f.nrows(),
        ));
    }
    let n_rf = f.ncols();
    let mut problem = SdpProblem::new();
    let y = f.adjoint() * f;
    let blocks: Vec<BlockId> = (0..groups.num_groups())
        .map(|i| problem.add_block(format!("M{i}"), n_rf))
        .collect();
    for &b in &blocks {
        problem.set_block_objective(b, y.clone());
    }
    let mut slacks = Vec::with_capacity(groups.num_users());
    for k in 0..groups.num_users() {
        let w = combiners.vector(k);
        if w.len() != channels.n_rx() {
            return Err(SimError::dim(
                format!("combiner of user {k}"),
                channels.n_rx(),
                w.len(),
            ));
        }
        let i = groups.group_of(k);
        let gamma = targets.gamma[i];
        let e = f.adjoint() * (channels.user(k).adjoint() * w);
        let xk = &e * e.adjoint();
        let x = problem.add_scalar(format!("x{k}"), true);
        problem.set_scalar_objective(x, beta);
        let mut con =
            Constraint::new(Sense::Le, -targets.sigma2 * gamma * w.norm_squared()).scalar(x, -1.0);
        for (j, &b) in blocks.iter().enumerate() {
            let weight = if j == i { -1.0 } else { gamma };
            con = con.block(b, &xk * C64::new(weight, 0.0));
        }
        problem.add_constraint(con);
        slacks.push(x);
    }
    Ok(DigitalRelaxation {
        problem,
        blocks,
        slacks,
    })
}

/// Gaussian randomization `m_i = B_i g`, `B_i B_i^H = M_i`, `g ~ CN(0, I)`.
#[derive(Debug, Clone)]
pub struct DigitalSampler {
    factors: Vec<CMat>,
}

impl DigitalSampler {
    pub fn new(m_hat: &[CMat]) -> Result<Self> {
        if m_hat.is_empty() {
            return Err(SimError::InvalidInput(
                "no digital covariances to sample".into(),
            ));
        }
        let factors = m_hat
            .iter()
            .map(psd_sqrt_columns)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { factors })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DigitalPrecoderSet {
        let columns = self
            .factors
            .iter()
            .map(|b| b * complex_normal_vec(rng, b.ncols()))
            .collect();
        DigitalPrecoderSet::new(columns).expect("factors share one dimension and are finite")
    }
}

/// One Gaussian draw per group from the solved covariances.
pub fn randomize_digital<R: Rng + ?Sized>(
    m_hat: &[CMat],
    rng: &mut R,
) -> Result<DigitalPrecoderSet> {
    Ok(DigitalSampler::new(m_hat)?.draw(rng))
}

/// The combiner-stage relaxation of one user.
#[derive(Debug, Clone)]
pub struct CombinerRelaxation {
    pub user: usize,
    pub problem: SdpProblem,
    pub block: BlockId,
    pub slack: ScalarId,
}

/// Builds the `K` independent combiner-stage relaxations for a fixed
/// transmitter:
///
/// ```text
/// min  x_k
/// s.t. Tr(W_k (γ_i Σ_{j≠i} Z_{k,j} − Z_{k,i})) + σ² γ_i Tr(W_k) ≤ x_k
///      Tr(W_k) = P_rx,  W_k ⪰ 0,  x_k ≥ 0
/// ```
///
/// with `Z_{k,j} = H_k F m_j m_j^H F^H H_k^H`.
pub fn build_p3(
    channels: &ChannelSet,
    f: &CMat,
    precoders: &DigitalPrecoderSet,
    targets: &QosTargets,
    groups: &GroupAssignment,
) -> Result<Vec<CombinerRelaxation>> {
    check_users(channels, targets, groups)?;
    if f.nrows() != channels.n_tx() || f.ncols() != precoders.dim() {
        return Err(SimError::dim("analog precoder", channels.n_tx(), f.nrows()));
    }
    if precoders.num_groups() != groups.num_groups() {
        return Err(SimError::dim(
            "digital precoders",
            groups.num_groups(),
            precoders.num_groups(),
        ));
    }
    let n_rx = channels.n_rx();
    let beams: Vec<CVec> = precoders.columns().iter().map(|m| f * m).collect();
    let mut out = Vec::with_capacity(groups.num_users());
    for k in 0..groups.num_users() {
        let i = groups.group_of(k);
        let gamma = targets.gamma[i];
        let h = channels.user(k);
        let s: Vec<CVec> = beams.iter().map(|b| h * b).collect();
        let mut q = qos_form(&s, i, gamma);
        for d in 0..n_rx {
            q[(d, d)] += C64::new(targets.sigma2 * gamma, 0.0);
        }
        let mut problem = SdpProblem::new();
        let block = problem.add_block("W", n_rx);
        let slack = problem.add_scalar("x", true);
        problem.set_scalar_objective(slack, 1.0);
        problem.add_constraint(
            Constraint::new(Sense::Le, 0.0)
                .block(block, q)
                .scalar(slack, -1.0),
        );
        problem.add_constraint(
            Constraint::new(Sense::Eq, targets.p_rx)
                .block(block, Coeff::scaled_identity(n_rx, 1.0)),
        );
        out.push(CombinerRelaxation {
            user: k,
            problem,
            block,
            slack,
        });
    }
    Ok(out)
}

/// A standard complex Gaussian vector normalized to unit norm (redrawn in
/// the measure-zero event of an exact zero).
pub fn sample_unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<CVec> {
    if dim == 0 {
        return Err(SimError::InvalidInput("unit sphere of dimension 0".into()));
    }
    loop {
        let g = complex_normal_vec(rng, dim);
        let n = g.norm();
        if n > 0.0 {
            return Ok(g / C64::new(n, 0.0));
        }
    }
}

/// `w = W v` for `v` uniform on the unit sphere, rescaled to `‖w‖² = P_rx`.
pub fn randomize_combiner<R: Rng + ?Sized>(w_hat: &CMat, p_rx: f64, rng: &mut R) -> Result<CVec> {
    if w_hat.nrows() != w_hat.ncols() {
        return Err(SimError::InvalidInput(
            "combiner covariance must be square".into(),
        ));
    }
    for _ in 0..MAX_ZERO_DRAWS {
        let v = sample_unit_sphere(w_hat.nrows(), rng)?;
        let w = w_hat * v;
        let n = w.norm();
        if n > 0.0 {
            return Ok(w * C64::new(p_rx.sqrt() / n, 0.0));
        }
    }
    Err(SimError::InvalidInput(format!(
        "combiner draw was zero {MAX_ZERO_DRAWS} times in a row"
    )))
}

/// `Σ_i ‖F m_i‖² + β Σ_k max(0, deficit_k)`: the objective of the analog and
/// digital relaxations at the rank-one point built from a candidate, with
/// the smallest feasible slacks.
pub fn penalized_objective(
    channels: &ChannelSet,
    f: &CMat,
    precoders: &DigitalPrecoderSet,
    combiners: &CombinerSet,
    targets: &QosTargets,
    groups: &GroupAssignment,
    beta: f64,
) -> Result<f64> {
    let mut penalty = 0.0;
    for k in 0..groups.num_users() {
        penalty += combiner_penalty(
            channels,
            f,
            precoders,
            combiners.vector(k),
            targets,
            groups,
            k,
        )?;
    }
    Ok(total_tx_power(f, precoders) + beta * penalty)
}

/// `max(0, deficit_k)` for user `k` with combiner `w`: the combiner
/// relaxation's objective at `W = w w^H`.
pub fn combiner_penalty(
    channels: &ChannelSet,
    f: &CMat,
    precoders: &DigitalPrecoderSet,
    w: &CVec,
    targets: &QosTargets,
    groups: &GroupAssignment,
    k: usize,
) -> Result<f64> {
    let i = groups.group_of(k);
    let gains = user_gains(channels.user(k), f, precoders, w)?;
    Ok(qos_deficit(
        &gains,
        i,
        targets.gamma[i],
        targets.sigma2 * w.norm_squared(),
    )
    .max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, AngleProfile, ArrayGeometry};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Instance {
        channels: ChannelSet,
        groups: GroupAssignment,
        targets: QosTargets,
        precoders: DigitalPrecoderSet,
        combiners: CombinerSet,
        analog: AnalogPrecoder,
    }

    fn instance(seed: u64) -> Instance {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (n_tx, n_rx, n_rf, k, g) = (4, 2, 2, 3, 2);
        let groups = GroupAssignment::even(k, g).unwrap();
        let profile = AngleProfile {
            group_mean_aod: vec![-30.0, 30.0],
            user_mean_aoa: vec![0.0, 40.0, -40.0],
            spread_aod: 20.0,
            spread_aoa: 30.0,
            num_paths: 4,
        };
        let channels = sample_channel(
            &ArrayGeometry::new(n_tx).unwrap(),
            &ArrayGeometry::new(n_rx).unwrap(),
            &profile,
            &groups,
            &mut rng,
        )
        .unwrap();
        let targets = QosTargets::from_db(&[3.0, 5.0], 0.0, 10.0).unwrap();
        let precoders =
            DigitalPrecoderSet::new((0..g).map(|_| complex_normal_vec(&mut rng, n_rf)).collect())
                .unwrap();
        let combiners = CombinerSet::new(
            (0..k)
                .map(|_| sample_unit_sphere(n_rx, &mut rng).unwrap() * C64::new(10f64.sqrt(), 0.0))
                .collect(),
            10.0,
        )
        .unwrap();
        let alphabet = PhaseAlphabet::new(8, 1.0 / n_tx as f64).unwrap();
        let indices = (0..n_tx * n_rf).map(|_| rng.random_range(0..8)).collect();
        let analog = AnalogPrecoder::from_indices(n_tx, n_rf, indices, alphabet).unwrap();
        Instance {
            channels,
            groups,
            targets,
            precoders,
            combiners,
            analog,
        }
    }

    #[test]
    fn analog_lift_reproduces_quadratic_forms() {
        let t = instance(5);
        let beta = 7.0;
        let p1 = build_p1(
            &t.channels,
            &t.precoders,
            &t.combiners,
            &t.targets,
            &t.groups,
            beta,
            0.25,
        )
        .unwrap();
        assert_eq!(p1.problem.constraints.len(), 3 + 8);
        let f = t.analog.vectorized();
        let d = &f * f.adjoint();
        let fm = t.analog.matrix();
        let slacks: Vec<f64> = (0..3)
            .map(|k| {
                combiner_penalty(
                    &t.channels,
                    fm,
                    &t.precoders,
                    t.combiners.vector(k),
                    &t.targets,
                    &t.groups,
                    k,
                )
                .unwrap()
            })
            .collect();
        let obj = p1
            .problem
            .objective_value(std::slice::from_ref(&d), &slacks);
        let expect = penalized_objective(
            &t.channels,
            fm,
            &t.precoders,
            &t.combiners,
            &t.targets,
            &t.groups,
            beta,
        )
        .unwrap();
        assert_relative_eq!(obj, expect, max_relative = 1e-10);
        for k in 0..3 {
            // lhs = Tr(D Q_k) − x_k; adding the noise term gives deficit − x_k.
            let lhs = p1
                .problem
                .constraint_lhs(k, std::slice::from_ref(&d), &slacks);
            let rhs = p1.problem.constraints[k].rhs;
            let i = t.groups.group_of(k);
            let gains =
                user_gains(t.channels.user(k), fm, &t.precoders, t.combiners.vector(k)).unwrap();
            let deficit = qos_deficit(&gains, i, t.targets.gamma[i], t.targets.sigma2 * 10.0);
            assert_relative_eq!(
                lhs - rhs,
                deficit - slacks[k],
                epsilon = 1e-9 * (1.0 + deficit.abs())
            );
        }
    }

    #[test]
    fn digital_lift_reproduces_quadratic_forms() {
        let t = instance(6);
        let fm = t.analog.matrix();
        let p2 = build_p2(&t.channels, fm, &t.combiners, &t.targets, &t.groups, 3.0).unwrap();
        let lifts: Vec<CMat> = t
            .precoders
            .columns()
            .iter()
            .map(|m| m * m.adjoint())
            .collect();
        let slacks = vec![0.0; 3];
        let obj = p2.problem.objective_value(&lifts, &slacks);
        assert_relative_eq!(obj, total_tx_power(fm, &t.precoders), max_relative = 1e-10);
        for k in 0..3 {
            let lhs = p2.problem.constraint_lhs(k, &lifts, &slacks) - p2.problem.constraints[k].rhs;
            let i = t.groups.group_of(k);
            let gains =
                user_gains(t.channels.user(k), fm, &t.precoders, t.combiners.vector(k)).unwrap();
            let deficit = qos_deficit(&gains, i, t.targets.gamma[i], t.targets.sigma2 * 10.0);
            assert_relative_eq!(lhs, deficit, epsilon = 1e-9 * (1.0 + deficit.abs()));
        }
    }

    #[test]
    fn combiner_lift_reproduces_quadratic_forms() {
        let t = instance(7);
        let fm = t.analog.matrix();
        let p3 = build_p3(&t.channels, fm, &t.precoders, &t.targets, &t.groups).unwrap();
        assert_eq!(p3.len(), 3);
        for (k, rel) in p3.iter().enumerate() {
            assert_eq!(rel.problem.block_dim(rel.block), 2);
            let w = t.combiners.vector(k);
            let lift = w * w.adjoint();
            let lhs = rel
                .problem
                .constraint_lhs(0, std::slice::from_ref(&lift), &[0.0]);
            let i = t.groups.group_of(k);
            let gains = user_gains(t.channels.user(k), fm, &t.precoders, w).unwrap();
            let deficit = qos_deficit(&gains, i, t.targets.gamma[i], t.targets.sigma2 * 10.0);
            assert_relative_eq!(lhs, deficit, epsilon = 1e-9 * (1.0 + deficit.abs()));
            assert_relative_eq!(
                rel.problem.constraint_lhs(1, &[lift], &[0.0]),
                10.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn rank_one_lift_recovers_alphabet_point() {
        let t = instance(8);
        let f = t.analog.vectorized();
        let d = &f * f.adjoint();
        let rec = AnalogRecovery::new(&d, 4, 2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..10 {
            let u = sample_unit_sphere(rec.dim(), &mut rng).unwrap();
            let z = rec.projections(&u).unwrap();
            if z.iter().all(|v| v.norm() > 1e-9) {
                let back = rec.recover(t.analog.alphabet(), &u).unwrap();
                // Recovery is up to a common phase rotation by a multiple of
                // the alphabet step only when u aligns; compare relative phases.
                let shift = (back.indices()[0] + 8 - t.analog.indices()[0]) % 8;
                for (a, b) in back.indices().iter().zip(t.analog.indices()) {
                    assert_eq!((a + 8 - b) % 8, shift);
                }
            }
        }
    }

    #[test]
    fn digital_draws_follow_rank_one_direction() {
        let m = CVec::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.3)]);
        let cov = &m * m.adjoint();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..20 {
            let draw = randomize_digital(std::slice::from_ref(&cov), &mut rng).unwrap();
            let d = draw.column(0);
            let ratio = d[0] / m[0];
            // Round-off eigenvalues of order 1e-16 contribute ~1e-8 off-direction.
            assert!((d[1] - ratio * m[1]).norm() <= 1e-6 * d.norm());
        }
        let zero = randomize_digital(&[CMat::zeros(3, 3)], &mut rng).unwrap();
        assert_eq!(zero.column(0).norm(), 0.0);
    }

    #[test]
    fn combiner_draw_meets_budget_and_direction() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let w0 = CVec::from_vec(vec![C64::new(1.0, 1.0), C64::new(2.0, -1.0)]);
        let w0 = &w0 * C64::new((5.0 / w0.norm_squared()).sqrt(), 0.0);
        let cov = &w0 * w0.adjoint();
        for _ in 0..10 {
            let w = randomize_combiner(&cov, 5.0, &mut rng).unwrap();
            assert_relative_eq!(w.norm_squared(), 5.0, epsilon = 1e-12);
            let phase = w.dotc(&w0) / C64::new(5.0, 0.0);
            assert_relative_eq!(phase.norm(), 1.0, epsilon = 1e-9);
        }
        assert!(randomize_combiner(&CMat::zeros(2, 2), 5.0, &mut rng).is_err());
    }

    #[test]
    fn unit_sphere_draws() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for dim in 1..5 {
            let u = sample_unit_sphere(dim, &mut rng).unwrap();
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
        }
        assert!(sample_unit_sphere(0, &mut rng).is_err());
    }
}
