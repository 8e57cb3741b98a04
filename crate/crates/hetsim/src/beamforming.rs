//! Transmit precoding, receive combining, power allocation, and rate
//! evaluation for narrowband MIMO downlinks.
//!
//! The module provides four precoder families — matched filter (MRT),
//! zero-forcing, single-link eigenbeamforming (SVD plus water-filling), and
//! multiuser block diagonalization (BD) — together with a chain-constrained
//! hybrid analog/digital construction and a generic log-det sum-rate
//! evaluator. Beam construction is separated from power loading where a
//! caller sweeps SNR: the `*_beams` functions are noise-independent, and
//! [`per_user_waterfill`] turns their stream gains into a
//! [`PowerAllocation`] for a particular power budget and noise level.
//!
//! # Chain-constrained (hybrid) precoding
//!
//! The hybrid transmitter applies a phase-only analog matrix `F` (one column
//! per RF chain, built from the phases of the dominant right singular
//! directions of the stacked multiuser channel) followed by a low-dimensional
//! digital stage. Because the digital stage sees only `n_rf` effective
//! inputs, interference between users cannot be nulled at every receive
//! antenna once the other users' antennas outnumber the chains; instead each
//! user is first reduced to its spatial streams through a receive combiner,
//! and block diagonalization runs on the reduced compound channel. The
//! fully digital comparator ([`coordinated_bd_beams`]) uses the *same*
//! receive reduction without a chain constraint, which keeps the two
//! constructions directly comparable: the hybrid transmit covariance is
//! feasible for the digital optimization, so on any given channel draw the
//! hybrid sum rate can never exceed the digital one.

use crate::linalg::{hermitianize, log2_det_hermitian_pd, null_space, phase_matrix, svd_parts};
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance on total radiated power versus the configured budget.
pub const POWER_REL_TOL: f64 = 1e-9;

/// Errors raised by precoder construction and rate evaluation.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum BeamformingError {
    #[error("channel matrix is identically zero")]
    DegenerateChannel,
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("mismatched dimensions: {0}")]
    ShapeMismatch(String),
    #[error("zero-forcing requires at least as many transmit antennas as user rows: {users} rows, {n_tx} antennas")]
    TooManyUsers { users: usize, n_tx: usize },
    #[error("stacked user rows are rank deficient; the zero-forcing inverse does not exist")]
    RankDeficient,
    #[error("power budget must be positive and finite, got {0} W")]
    NonPositivePower(f64),
    #[error("noise power must be positive and finite, got {0} W")]
    NonPositiveNoise(f64),
    #[error("stream gains must be finite and nonnegative")]
    InvalidGains,
    #[error("every stream gain is zero; water-filling is infeasible")]
    AllGainsZero,
    #[error("user {user} has no interference-free transmit directions: {constraint_rows} constraint rows for {n_tx} transmit dimensions")]
    NoNullSpace {
        user: usize,
        constraint_rows: usize,
        n_tx: usize,
    },
    #[error("user {user} requested {requested} streams but at most {limit} are feasible")]
    InfeasibleStreams {
        user: usize,
        requested: usize,
        limit: usize,
    },
    #[error("user {user}'s effective channel collapsed to rank zero")]
    StreamCollapse { user: usize },
    #[error("RF chain count {chains} must lie between the total stream count {total_streams} and the transmit antenna count {n_tx}")]
    BadChainCount {
        chains: usize,
        total_streams: usize,
        n_tx: usize,
    },
    #[error("user {user}: receive chain count {chains} must lie between {streams} streams and {n_rx} receive antennas")]
    BadRxChains {
        user: usize,
        chains: usize,
        streams: usize,
        n_rx: usize,
    },
    #[error("allocated power {used} W exceeds the budget {budget} W")]
    PowerOverrun { used: f64, budget: f64 },
    #[error("noise covariance is numerically singular")]
    SingularNoiseCovariance,
}

type Result<T> = std::result::Result<T, BeamformingError>;

// ---------------------------------------------------------------------------
// Power allocation
// ---------------------------------------------------------------------------

/// Nonnegative per-stream transmit powers under a total budget.
///
/// The constructor enforces the budget: the sum of stream powers may not
/// exceed `total_power_w` by more than [`POWER_REL_TOL`] relatively.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    per_stream_powers_w: Vec<f64>,
    total_power_w: f64,
}

impl PowerAllocation {
    /// Validates and wraps a per-stream power vector.
    pub fn new(per_stream_powers_w: Vec<f64>, total_power_w: f64) -> Result<Self> {
        if !total_power_w.is_finite() || total_power_w < 0.0 {
            return Err(BeamformingError::NonPositivePower(total_power_w));
        }
        if per_stream_powers_w
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0)
        {
            return Err(BeamformingError::InvalidGains);
        }
        let used: f64 = per_stream_powers_w.iter().sum();
        if used > total_power_w * (1.0 + POWER_REL_TOL) {
            return Err(BeamformingError::PowerOverrun {
                used,
                budget: total_power_w,
            });
        }
        Ok(Self {
            per_stream_powers_w,
            total_power_w,
        })
    }

    /// Per-stream powers in watts, ordered user by user.
    pub fn powers(&self) -> &[f64] {
        &self.per_stream_powers_w
    }

    /// Total power budget in watts.
    pub fn total_power_w(&self) -> f64 {
        self.total_power_w
    }

    /// Number of streams covered by the allocation.
    pub fn streams(&self) -> usize {
        self.per_stream_powers_w.len()
    }

    /// Splits the flat power vector by per-user stream counts.
    pub fn split_by(&self, stream_counts: &[usize]) -> Result<Vec<&[f64]>> {
        let total: usize = stream_counts.iter().sum();
        if total != self.per_stream_powers_w.len() {
            return Err(BeamformingError::ShapeMismatch(format!(
                "allocation covers {} streams but {} were requested",
                self.per_stream_powers_w.len(),
                total
            )));
        }
        let mut out = Vec::with_capacity(stream_counts.len());
        let mut at = 0;
        for &count in stream_counts {
            out.push(&self.per_stream_powers_w[at..at + count]);
            at += count;
        }
        Ok(out)
    }
}

/// Classic water-filling over parallel channels.
///
/// `gains` are the per-stream channel power gains divided by noise (so the
/// rate of stream `i` under power `p_i` is `log2(1 + p_i g_i)`). Returns the
/// allocation maximizing the sum of those rates subject to the total power.
/// Streams with zero gain receive zero power; a zero budget yields the
/// all-zero allocation.
pub fn waterfill(gains: &[f64], power_w: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return Err(BeamformingError::EmptyInput("gains"));
    }
    if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(BeamformingError::InvalidGains);
    }
    if !power_w.is_finite() || power_w < 0.0 {
        return Err(BeamformingError::NonPositivePower(power_w));
    }
    if power_w == 0.0 {
        return PowerAllocation::new(vec![0.0; gains.len()], 0.0);
    }
    if gains.iter().all(|&g| g == 0.0) {
        return Err(BeamformingError::AllGainsZero);
    }

    // Strongest gains first; ties keep index order (stable sort) so the
    // result is deterministic.
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).expect("finite gains"));
    let inverse_gains: Vec<f64> = order.iter().map(|&i| 1.0 / gains[i]).collect();

    // Grow the active set while the weakest active stream stays above water:
    // with m active streams the level is mu_m = (P + sum inv_g) / m.
    let mut active = 1;
    let mut level = power_w + inverse_gains[0];
    let mut prefix = inverse_gains[0];
    for m in 2..=inverse_gains.len() {
        let inv = inverse_gains[m - 1];
        prefix += inv;
        let candidate = (power_w + prefix) / m as f64;
        if candidate > inv {
            active = m;
            level = candidate;
        } else {
            break;
        }
    }

    let mut powers = vec![0.0; gains.len()];
    for i in 0..active {
        powers[order[i]] = (level - inverse_gains[i]).max(0.0);
    }
    PowerAllocation::new(powers, power_w)
}

/// Splits a power budget equally across users, then water-fills each user's
/// share over that user's stream gains (channel power gain per unit noise is
/// `gain / noise_w`).
pub fn per_user_waterfill(
    stream_gains: &[Vec<f64>],
    power_w: f64,
    noise_w: f64,
) -> Result<PowerAllocation> {
    if stream_gains.is_empty() {
        return Err(BeamformingError::EmptyInput("stream_gains"));
    }
    if !noise_w.is_finite() || noise_w <= 0.0 {
        return Err(BeamformingError::NonPositiveNoise(noise_w));
    }
    if !power_w.is_finite() || power_w < 0.0 {
        return Err(BeamformingError::NonPositivePower(power_w));
    }
    let share = power_w / stream_gains.len() as f64;
    let mut flat = Vec::new();
    for gains in stream_gains {
        let scaled: Vec<f64> = gains.iter().map(|g| g / noise_w).collect();
        let user_alloc = waterfill(&scaled, share)?;
        flat.extend_from_slice(user_alloc.powers());
    }
    PowerAllocation::new(flat, power_w)
}

// ---------------------------------------------------------------------------
// Precoder types
// ---------------------------------------------------------------------------

/// Fully digital multiuser precoder: one beam matrix per user.
///
/// Depending on the constructing operation the beam columns either embed the
/// transmit power (MRT, zero-forcing) or are unit-norm with powers carried by
/// a separate [`PowerAllocation`] (eigenbeamforming, block diagonalization).
#[derive(Clone, Debug, PartialEq)]
pub struct DigitalPrecoder {
    /// Per-user beam matrices, `n_tx` rows each.
    pub per_user: Vec<DMatrix<Complex64>>,
    /// Total transmit power budget in watts.
    pub total_power_w: f64,
}

impl DigitalPrecoder {
    /// Stream counts per user (beam matrix column counts).
    pub fn stream_counts(&self) -> Vec<usize> {
        self.per_user.iter().map(|w| w.ncols()).collect()
    }

    /// Total radiated power `sum_k ||W_k diag(sqrt p_k)||_F^2` under the
    /// given allocation (or with unit stream powers when `None`, i.e. for
    /// precoders that embed power in the beam columns).
    pub fn applied_power(&self, allocation: Option<&PowerAllocation>) -> Result<f64> {
        let counts = self.stream_counts();
        let unit;
        let per_user_powers: Vec<&[f64]> = match allocation {
            Some(alloc) => alloc.split_by(&counts)?,
            None => {
                unit = vec![1.0; counts.iter().sum()];
                let mut out = Vec::with_capacity(counts.len());
                let mut at = 0;
                for &c in &counts {
                    out.push(&unit[at..at + c]);
                    at += c;
                }
                out
            }
        };
        let mut total = 0.0;
        for (w, powers) in self.per_user.iter().zip(&per_user_powers) {
            for (col, &p) in w.column_iter().zip(powers.iter()) {
                total += p * col.norm_squared();
            }
        }
        Ok(total)
    }
}

/// Chain-constrained precoder: a phase-only analog matrix shared by all
/// users followed by per-user digital stages.
///
/// Every analog entry has unit modulus; the digital stages are scaled so
/// that each effective beam column `F d` has unit norm, with transmit powers
/// carried by a separate [`PowerAllocation`].
#[derive(Clone, Debug, PartialEq)]
pub struct HybridPrecoder {
    /// Analog network, `n_tx x n_rf`, unit-modulus entries.
    pub analog: DMatrix<Complex64>,
    /// Per-user digital stages, `n_rf` rows each.
    pub per_user_digital: Vec<DMatrix<Complex64>>,
    /// Total transmit power budget in watts.
    pub total_power_w: f64,
}

impl HybridPrecoder {
    /// Number of RF chains (analog matrix columns).
    pub fn rf_chains(&self) -> usize {
        self.analog.ncols()
    }

    /// Effective per-user beam matrices `F D_k` in the antenna domain.
    pub fn effective(&self) -> Vec<DMatrix<Complex64>> {
        self.per_user_digital
            .iter()
            .map(|d| &self.analog * d)
            .collect()
    }
}

/// Sum-rate evaluation result.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    /// Per-user spectral efficiency in bits/s/Hz.
    pub per_user_bits_per_s_per_hz: Vec<f64>,
    /// Sum spectral efficiency in bits/s/Hz.
    pub sum_bits_per_s_per_hz: f64,
    /// Absolute sum rate in bits/s (spectral efficiency when no bandwidth
    /// was supplied).
    pub sum_bits_per_s: f64,
    /// Number of requested streams the constructing precoder had to drop on
    /// rank-deficient draws (zero unless the caller records a reduction).
    pub streams_reduced: usize,
}

// ---------------------------------------------------------------------------
// Matched filter and zero-forcing
// ---------------------------------------------------------------------------

/// Matched-filter (maximum ratio) transmit precoder `W = H^H`, Frobenius-
/// normalized and scaled so `||W||_F^2` equals the power budget.
pub fn mrt_precoder(channel: &DMatrix<Complex64>, power_w: f64) -> Result<DigitalPrecoder> {
    if channel.is_empty() {
        return Err(BeamformingError::EmptyInput("channel"));
    }
    if !power_w.is_finite() || power_w <= 0.0 {
        return Err(BeamformingError::NonPositivePower(power_w));
    }
    let norm = channel.norm();
    if norm == 0.0 {
        return Err(BeamformingError::DegenerateChannel);
    }
    let w = channel.adjoint() * Complex64::new(power_w.sqrt() / norm, 0.0);
    Ok(DigitalPrecoder {
        per_user: vec![w],
        total_power_w: power_w,
    })
}

/// Zero-forcing precoder for stacked single-antenna user rows:
/// `W = H^H (H H^H)^{-1}` with columns rescaled to equal per-user power.
///
/// The effective channel `H W` is diagonal by construction. Fails when there
/// are more users than transmit antennas or the row stack is rank deficient.
pub fn zf_precoder(stacked_rows: &DMatrix<Complex64>, power_w: f64) -> Result<DigitalPrecoder> {
    let (users, n_tx) = stacked_rows.shape();
    if users == 0 || n_tx == 0 {
        return Err(BeamformingError::EmptyInput("stacked_rows"));
    }
    if !power_w.is_finite() || power_w <= 0.0 {
        return Err(BeamformingError::NonPositivePower(power_w));
    }
    if users > n_tx {
        return Err(BeamformingError::TooManyUsers { users, n_tx });
    }
    if svd_parts(stacked_rows).rank() < users {
        return Err(BeamformingError::RankDeficient);
    }
    let gram = hermitianize(&(stacked_rows * stacked_rows.adjoint()));
    let inverse = Cholesky::new(gram)
        .ok_or(BeamformingError::RankDeficient)?
        .inverse();
    let raw = stacked_rows.adjoint() * inverse;

    let per_column_norm = (power_w / users as f64).sqrt();
    let mut per_user = Vec::with_capacity(users);
    for j in 0..users {
        let col = raw.column(j);
        let norm = col.norm();
        if norm == 0.0 {
            return Err(BeamformingError::RankDeficient);
        }
        let mut beam = DMatrix::<Complex64>::zeros(n_tx, 1);
        beam.set_column(0, &(col * Complex64::new(per_column_norm / norm, 0.0)));
        per_user.push(beam);
    }
    Ok(DigitalPrecoder {
        per_user,
        total_power_w: power_w,
    })
}

// ---------------------------------------------------------------------------
// Single-link eigenbeamforming
// ---------------------------------------------------------------------------

/// Eigenbeamforming solution for one point-to-point MIMO link.
#[derive(Clone, Debug)]
pub struct SvdSolution {
    /// Unit-norm transmit beams (right singular vectors), one per stream.
    pub precoder: DigitalPrecoder,
    /// Receive combiner with orthonormal columns (left singular vectors);
    /// apply as `combiner.adjoint() * y`.
    pub combiner: DMatrix<Complex64>,
    /// Water-filling power allocation over the eigen-streams.
    pub allocation: PowerAllocation,
    /// Retained singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Transmit eigenbeamforming with water-filling: beams along the right
/// singular vectors of the channel, powers from [`waterfill`] over
/// `sigma_i^2 / noise_w`.
pub fn svd_precoder(
    channel: &DMatrix<Complex64>,
    power_w: f64,
    noise_w: f64,
) -> Result<SvdSolution> {
    if channel.is_empty() {
        return Err(BeamformingError::EmptyInput("channel"));
    }
    if !power_w.is_finite() || power_w <= 0.0 {
        return Err(BeamformingError::NonPositivePower(power_w));
    }
    if !noise_w.is_finite() || noise_w <= 0.0 {
        return Err(BeamformingError::NonPositiveNoise(noise_w));
    }
    if channel.norm() == 0.0 {
        return Err(BeamformingError::DegenerateChannel);
    }
    let parts = svd_parts(channel);
    let rank = parts.rank();
    let singular_values: Vec<f64> = parts.sigma[..rank].to_vec();
    let gains: Vec<f64> = singular_values.iter().map(|s| s * s / noise_w).collect();
    let allocation = waterfill(&gains, power_w)?;
    Ok(SvdSolution {
        precoder: DigitalPrecoder {
            per_user: vec![parts.v.columns(0, rank).into_owned()],
            total_power_w: power_w,
        },
        combiner: parts.u.columns(0, rank).into_owned(),
        allocation,
        singular_values,
    })
}

// ---------------------------------------------------------------------------
// Block diagonalization on raw per-user channels
// ---------------------------------------------------------------------------

/// Noise-independent block-diagonalization beams.
#[derive(Clone, Debug)]
pub struct BdBeams {
    /// Per-user transmit beams, `n_tx x delivered_k`, orthonormal columns
    /// lying in the null space of every other user's channel.
    pub per_user: Vec<DMatrix<Complex64>>,
    /// Per-user receive combiners with orthonormal columns (left singular
    /// vectors of the user's effective channel).
    pub combiners: Vec<DMatrix<Complex64>>,
    /// Per-user squared singular values of the effective channels — the
    /// per-stream channel power gains.
    pub stream_gains: Vec<Vec<f64>>,
    /// Streams requested per user.
    pub requested: Vec<usize>,
    /// Streams actually delivered per user (reduced on rank-deficient
    /// draws, never increased).
    pub delivered: Vec<usize>,
}

impl BdBeams {
    /// Total number of requested streams that were dropped.
    pub fn streams_reduced(&self) -> usize {
        self.requested
            .iter()
            .zip(&self.delivered)
            .map(|(r, d)| r - d)
            .sum()
    }
}

/// Block-diagonalization solution with power loading.
#[derive(Clone, Debug)]
pub struct BdSolution {
    /// Unit-column beam matrices per user.
    pub precoder: DigitalPrecoder,
    /// Per-user receive combiners (orthonormal columns).
    pub combiners: Vec<DMatrix<Complex64>>,
    /// Equal-split-then-water-filling power allocation.
    pub allocation: PowerAllocation,
    /// Per-user effective-channel power gains per stream.
    pub stream_gains: Vec<Vec<f64>>,
    /// Streams requested per user.
    pub requested: Vec<usize>,
    /// Streams delivered per user.
    pub delivered: Vec<usize>,
}

fn validate_user_channels(channels: &[DMatrix<Complex64>]) -> Result<(usize, usize, Vec<usize>)> {
    if channels.is_empty() {
        return Err(BeamformingError::EmptyInput("per_user_channels"));
    }
    let n_tx = channels[0].ncols();
    let mut n_rx = Vec::with_capacity(channels.len());
    for (user, h) in channels.iter().enumerate() {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(BeamformingError::ShapeMismatch(format!(
                "user {user} has an empty channel matrix"
            )));
        }
        if h.ncols() != n_tx {
            return Err(BeamformingError::ShapeMismatch(format!(
                "user {user} has {} transmit columns, expected {n_tx}",
                h.ncols()
            )));
        }
        n_rx.push(h.nrows());
    }
    Ok((channels.len(), n_tx, n_rx))
}

fn validate_streams(streams: &[usize], n_rx: &[usize], users: usize) -> Result<()> {
    if streams.len() != users {
        return Err(BeamformingError::ShapeMismatch(format!(
            "{} stream counts for {users} users",
            streams.len()
        )));
    }
    for (user, (&s, &rx)) in streams.iter().zip(n_rx).enumerate() {
        if s == 0 || s > rx {
            return Err(BeamformingError::InfeasibleStreams {
                user,
                requested: s,
                limit: rx,
            });
        }
    }
    Ok(())
}

fn stack_rows(mats: &[&DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let cols = mats[0].ncols();
    let rows: usize = mats.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::<Complex64>::zeros(rows, cols);
    let mut at = 0;
    for m in mats {
        out.view_mut((at, 0), (m.nrows(), cols)).copy_from(*m);
        at += m.nrows();
    }
    out
}

/// Block-diagonalization transmit beams: for each user, an orthonormal basis
/// of the interference-free subspace (the null space of every other user's
/// stacked channel) rotated onto the user's dominant effective directions.
///
/// Requires `n_tx` to exceed the total number of other users' receive
/// antennas for every user. On draws where a user's effective channel has
/// rank below the requested stream count, the stream count is reduced (and
/// reported) rather than failing the draw; only a complete rank collapse is
/// an error.
pub fn bd_beams(channels: &[DMatrix<Complex64>], streams_per_user: &[usize]) -> Result<BdBeams> {
    let (users, n_tx, n_rx) = validate_user_channels(channels)?;
    validate_streams(streams_per_user, &n_rx, users)?;

    let total_rx: usize = n_rx.iter().sum();
    let mut per_user = Vec::with_capacity(users);
    let mut combiners = Vec::with_capacity(users);
    let mut stream_gains = Vec::with_capacity(users);
    let mut delivered = Vec::with_capacity(users);

    for user in 0..users {
        let requested = streams_per_user[user];
        if users > 1 {
            let constraint_rows = total_rx - n_rx[user];
            if constraint_rows >= n_tx {
                return Err(BeamformingError::NoNullSpace {
                    user,
                    constraint_rows,
                    n_tx,
                });
            }
            let structural_null = n_tx - constraint_rows;
            if requested > structural_null {
                return Err(BeamformingError::InfeasibleStreams {
                    user,
                    requested,
                    limit: structural_null.min(n_rx[user]),
                });
            }
        }

        let basis = if users == 1 {
            DMatrix::<Complex64>::identity(n_tx, n_tx)
        } else {
            let others: Vec<&DMatrix<Complex64>> = channels
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != user)
                .map(|(_, h)| h)
                .collect();
            null_space(&stack_rows(&others))
        };

        let effective = &channels[user] * &basis;
        let parts = svd_parts(&effective);
        let rank = parts.rank();
        let take = requested.min(rank);
        if take == 0 {
            return Err(BeamformingError::StreamCollapse { user });
        }
        per_user.push(&basis * parts.v.columns(0, take));
        combiners.push(parts.u.columns(0, take).into_owned());
        stream_gains.push(parts.sigma[..take].iter().map(|s| s * s).collect());
        delivered.push(take);
    }

    Ok(BdBeams {
        per_user,
        combiners,
        stream_gains,
        requested: streams_per_user.to_vec(),
        delivered,
    })
}

/// Block diagonalization with equal power split across users and
/// water-filling over each user's eigen-streams.
pub fn bd_precoder(
    channels: &[DMatrix<Complex64>],
    streams_per_user: &[usize],
    power_w: f64,
    noise_w: f64,
) -> Result<BdSolution> {
    let beams = bd_beams(channels, streams_per_user)?;
    let allocation = per_user_waterfill(&beams.stream_gains, power_w, noise_w)?;
    Ok(BdSolution {
        precoder: DigitalPrecoder {
            per_user: beams.per_user,
            total_power_w: power_w,
        },
        combiners: beams.combiners,
        allocation,
        stream_gains: beams.stream_gains,
        requested: beams.requested,
        delivered: beams.delivered,
    })
}

// ---------------------------------------------------------------------------
// Coordinated (reduced) BD and the chain-constrained hybrid construction
// ---------------------------------------------------------------------------

/// Receive-side processing for the chain-constrained constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxCombining {
    /// Per-user eigenmode reduction computed digitally from the raw channel
    /// (orthonormal combiner columns).
    DigitalReduction,
    /// Phase-only analog combining with the given number of receive chains,
    /// followed by a digital stage inside the chain subspace.
    PhasedChains { chains: usize },
}

/// Beams produced by the reduction-then-BD pipeline (digital comparator).
#[derive(Clone, Debug)]
pub struct CoordinatedBeams {
    /// Per-user unit-column transmit beams in the antenna domain.
    pub per_user: Vec<DMatrix<Complex64>>,
    /// Per-user receive combiners (unit-norm columns; orthonormal here).
    pub combiners: Vec<DMatrix<Complex64>>,
    /// Per-stream channel power gains `|g^H H w|^2`.
    pub stream_gains: Vec<Vec<f64>>,
    /// Streams requested per user.
    pub requested: Vec<usize>,
    /// Streams delivered per user.
    pub delivered: Vec<usize>,
}

/// Beams produced by the chain-constrained hybrid pipeline.
#[derive(Clone, Debug)]
pub struct HybridBeams {
    /// Phase-only analog matrix, `n_tx x n_rf`.
    pub analog: DMatrix<Complex64>,
    /// Per-user digital stages, scaled so `analog * digital` has unit-norm
    /// columns.
    pub per_user_digital: Vec<DMatrix<Complex64>>,
    /// Per-user receive combiners (unit-norm columns).
    pub combiners: Vec<DMatrix<Complex64>>,
    /// Per-stream channel power gains `|g^H H w|^2`.
    pub stream_gains: Vec<Vec<f64>>,
    /// Streams requested per user.
    pub requested: Vec<usize>,
    /// Streams delivered per user.
    pub delivered: Vec<usize>,
}

impl HybridBeams {
    /// Effective per-user beams `F D_k` in the antenna domain.
    pub fn effective(&self) -> Vec<DMatrix<Complex64>> {
        self.per_user_digital
            .iter()
            .map(|d| &self.analog * d)
            .collect()
    }

    /// Total number of requested streams that were dropped.
    pub fn streams_reduced(&self) -> usize {
        self.requested
            .iter()
            .zip(&self.delivered)
            .map(|(r, d)| r - d)
            .sum()
    }
}

/// Per-user eigenmode reduction combiners: the top `streams_k` left singular
/// vectors of each raw channel.
pub fn reduction_combiners(
    channels: &[DMatrix<Complex64>],
    streams_per_user: &[usize],
) -> Result<Vec<DMatrix<Complex64>>> {
    let (users, _, n_rx) = validate_user_channels(channels)?;
    validate_streams(streams_per_user, &n_rx, users)?;
    Ok(channels
        .iter()
        .zip(streams_per_user)
        .map(|(h, &s)| svd_parts(h).u.columns(0, s).into_owned())
        .collect())
}

/// Phase-constrained reduction combiners: a unit-modulus analog stage built
/// from the phases of the dominant left singular vectors of each user's
/// effective channel, followed by a digital stage inside the chain subspace.
/// Columns are normalized to unit norm (they are not orthogonal in general).
fn phased_reduction_combiners(
    effective_channels: &[DMatrix<Complex64>],
    rx_chains: usize,
    streams_per_user: &[usize],
) -> Result<Vec<DMatrix<Complex64>>> {
    let mut combiners = Vec::with_capacity(effective_channels.len());
    for (user, (eff, &s)) in effective_channels
        .iter()
        .zip(streams_per_user)
        .enumerate()
    {
        let n_rx = eff.nrows();
        if rx_chains < s || rx_chains > n_rx {
            return Err(BeamformingError::BadRxChains {
                user,
                chains: rx_chains,
                streams: s,
                n_rx,
            });
        }
        let parts = svd_parts(eff);
        let avail = parts.u.ncols().min(rx_chains);
        let analog = phase_matrix(&parts.u.columns(0, avail).into_owned());
        let inside = analog.adjoint() * eff;
        let inner = svd_parts(&inside);
        if inner.u.ncols() < s {
            return Err(BeamformingError::StreamCollapse { user });
        }
        let mut combiner = &analog * inner.u.columns(0, s);
        for mut col in combiner.column_iter_mut() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(BeamformingError::StreamCollapse { user });
            }
            col /= Complex64::new(norm, 0.0);
        }
        combiners.push(combiner);
    }
    Ok(combiners)
}

struct ChainDomainPlan {
    chain_beams: Vec<DMatrix<Complex64>>,
    physical: Vec<DMatrix<Complex64>>,
    combiners: Vec<DMatrix<Complex64>>,
    stream_gains: Vec<Vec<f64>>,
    delivered: Vec<usize>,
}

/// Shared core: reduce each user to its streams through the given combiner,
/// then block-diagonalize the reduced compound channel in the transmit
/// domain (the range of `analog` when present, antennas otherwise).
///
/// The analog range is orthonormalized first, so the chain-domain geometry
/// is exactly the antenna-domain geometry restricted to that subspace. Two
/// consequences: beams need no renormalization (they are unit by
/// construction), and a full-rank square analog matrix reproduces the
/// unconstrained digital solution exactly. The digital stages returned in
/// `chain_beams` are expressed in raw analog coordinates via the analog
/// pseudoinverse, so `analog * chain_beams[k]` recovers the physical beams.
fn chain_domain_bd(
    channels: &[DMatrix<Complex64>],
    analog: Option<&DMatrix<Complex64>>,
    combiners: &[DMatrix<Complex64>],
    streams_per_user: &[usize],
) -> Result<ChainDomainPlan> {
    let users = channels.len();
    let n_tx = channels[0].ncols();

    // Orthonormal basis Q of the analog range, kept with the full SVD for
    // the pseudoinverse mapping back to raw analog coordinates.
    let range = analog.map(|f| {
        let parts = svd_parts(f);
        let rank = parts.rank();
        (parts.u.columns(0, rank).into_owned(), parts)
    });
    let domain = range.as_ref().map_or(n_tx, |(q, _)| q.ncols());

    // Reduced compound rows M_k = G_k^H H_k (Q).
    let reduced: Vec<DMatrix<Complex64>> = channels
        .iter()
        .zip(combiners)
        .map(|(h, g)| {
            let rows = g.adjoint() * h;
            match &range {
                Some((q, _)) => rows * q,
                None => rows,
            }
        })
        .collect();

    let total_streams: usize = streams_per_user.iter().sum();
    let mut chain_beams = Vec::with_capacity(users);
    let mut physical = Vec::with_capacity(users);
    let mut final_combiners = Vec::with_capacity(users);
    let mut stream_gains = Vec::with_capacity(users);
    let mut delivered = Vec::with_capacity(users);

    for user in 0..users {
        let constraint_rows = total_streams - streams_per_user[user];
        if users > 1 && constraint_rows >= domain {
            return Err(BeamformingError::NoNullSpace {
                user,
                constraint_rows,
                n_tx: domain,
            });
        }
        let basis = if users == 1 {
            DMatrix::<Complex64>::identity(domain, domain)
        } else {
            let others: Vec<&DMatrix<Complex64>> = reduced
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != user)
                .map(|(_, m)| m)
                .collect();
            null_space(&stack_rows(&others))
        };

        let effective = &reduced[user] * &basis;
        let parts = svd_parts(&effective);
        let take = streams_per_user[user].min(parts.rank());
        if take == 0 {
            return Err(BeamformingError::StreamCollapse { user });
        }

        // Orthonormal beam directions in the (restricted) transmit domain.
        let directions = &basis * parts.v.columns(0, take);
        let phys = match &range {
            Some((q, _)) => q * &directions,
            None => directions.clone(),
        };

        let mut combiner = DMatrix::<Complex64>::zeros(channels[user].nrows(), take);
        let mut gains = Vec::with_capacity(take);
        for i in 0..take {
            let mut g: DVector<Complex64> = &combiners[user] * parts.u.column(i);
            let g_norm = g.norm();
            if g_norm == 0.0 {
                return Err(BeamformingError::StreamCollapse { user });
            }
            g /= Complex64::new(g_norm, 0.0);
            let received = &channels[user] * phys.column(i);
            gains.push(g.dotc(&received).norm_sqr());
            combiner.set_column(i, &g);
        }

        // Digital stage in raw analog coordinates: D = V_r diag(1/sigma) Q^H W,
        // and Q^H W is exactly `directions`.
        let chain = match &range {
            Some((_, f_parts)) => {
                let rank = domain;
                let mut scaled = directions.clone();
                for r in 0..rank {
                    let inv = Complex64::new(1.0 / f_parts.sigma[r], 0.0);
                    for c in 0..scaled.ncols() {
                        scaled[(r, c)] *= inv;
                    }
                }
                f_parts.v.columns(0, rank) * scaled
            }
            None => directions,
        };

        chain_beams.push(chain);
        physical.push(phys);
        final_combiners.push(combiner);
        stream_gains.push(gains);
        delivered.push(take);
    }

    Ok(ChainDomainPlan {
        chain_beams,
        physical,
        combiners: final_combiners,
        stream_gains,
        delivered,
    })
}

/// Fully digital comparator for the hybrid construction: per-user eigenmode
/// receive reduction plus block diagonalization of the reduced compound
/// channel, with no chain constraint.
pub fn coordinated_bd_beams(
    channels: &[DMatrix<Complex64>],
    streams_per_user: &[usize],
) -> Result<CoordinatedBeams> {
    let combiners = reduction_combiners(channels, streams_per_user)?;
    let plan = chain_domain_bd(channels, None, &combiners, streams_per_user)?;
    Ok(CoordinatedBeams {
        per_user: plan.physical,
        combiners: plan.combiners,
        stream_gains: plan.stream_gains,
        requested: streams_per_user.to_vec(),
        delivered: plan.delivered,
    })
}

/// Chain-constrained hybrid beams.
///
/// The analog stage takes the element-wise phases of the dominant
/// `rf_chains` right singular directions of the stacked multiuser channel.
/// Receive combiners reduce each user to its streams — computed from the raw
/// channels under [`RxCombining::DigitalReduction`] (identical to the
/// digital comparator, which is what makes the hybrid-digital comparison
/// draw-by-draw conclusive), or through a phase-constrained analog network
/// under [`RxCombining::PhasedChains`]. Block diagonalization then runs on
/// the reduced compound channel inside the chain domain.
///
/// With `refine`, a second pass rebuilds the analog stage from the phases of
/// the unconstrained digital comparator's beams (one alternating refinement)
/// before re-running the digital stage.
pub fn hybrid_beams(
    channels: &[DMatrix<Complex64>],
    rf_chains: usize,
    streams_per_user: &[usize],
    rx: RxCombining,
    refine: bool,
) -> Result<HybridBeams> {
    let (users, n_tx, n_rx) = validate_user_channels(channels)?;
    validate_streams(streams_per_user, &n_rx, users)?;
    let total_streams: usize = streams_per_user.iter().sum();
    if rf_chains < total_streams || rf_chains > n_tx {
        return Err(BeamformingError::BadChainCount {
            chains: rf_chains,
            total_streams,
            n_tx,
        });
    }

    let all: Vec<&DMatrix<Complex64>> = channels.iter().collect();
    let stacked = stack_rows(&all);
    let stacked_parts = svd_parts(&stacked);
    let avail = rf_chains.min(stacked_parts.v.ncols());
    let mut analog = phase_matrix(&stacked_parts.v.columns(0, avail).into_owned());

    if refine {
        // Rebuild the analog columns from the phases of the unconstrained
        // digital solution's beams; keep dominant-direction phases for any
        // remaining chains.
        let target = coordinated_bd_beams(channels, streams_per_user)?;
        let beams: Vec<&DMatrix<Complex64>> = target.per_user.iter().collect();
        let stacked_beams = {
            let total: usize = beams.iter().map(|b| b.ncols()).sum();
            let mut m = DMatrix::<Complex64>::zeros(n_tx, total.min(avail));
            let mut at = 0;
            'outer: for b in &beams {
                for col in b.column_iter() {
                    if at >= m.ncols() {
                        break 'outer;
                    }
                    m.set_column(at, &col);
                    at += 1;
                }
            }
            m
        };
        let refined = phase_matrix(&stacked_beams);
        let mut combined = DMatrix::<Complex64>::zeros(n_tx, avail);
        combined
            .view_mut((0, 0), (n_tx, refined.ncols()))
            .copy_from(&refined);
        for c in refined.ncols()..avail {
            combined.set_column(c, &analog.column(c));
        }
        analog = combined;
    }

    let combiners = match rx {
        RxCombining::DigitalReduction => reduction_combiners(channels, streams_per_user)?,
        RxCombining::PhasedChains { chains } => {
            let effective: Vec<DMatrix<Complex64>> =
                channels.iter().map(|h| h * &analog).collect();
            phased_reduction_combiners(&effective, chains, streams_per_user)?
        }
    };

    let plan = chain_domain_bd(channels, Some(&analog), &combiners, streams_per_user)?;
    Ok(HybridBeams {
        analog,
        per_user_digital: plan.chain_beams,
        combiners: plan.combiners,
        stream_gains: plan.stream_gains,
        requested: streams_per_user.to_vec(),
        delivered: plan.delivered,
    })
}

/// Hybrid precoding solution with power loading.
#[derive(Clone, Debug)]
pub struct HybridSolution {
    /// The chain-constrained precoder.
    pub precoder: HybridPrecoder,
    /// Per-user receive combiners (unit-norm columns).
    pub combiners: Vec<DMatrix<Complex64>>,
    /// Equal-split-then-water-filling power allocation.
    pub allocation: PowerAllocation,
    /// Per-stream channel power gains.
    pub stream_gains: Vec<Vec<f64>>,
    /// Streams requested per user.
    pub requested: Vec<usize>,
    /// Streams delivered per user.
    pub delivered: Vec<usize>,
}

/// Chain-constrained hybrid precoder with eigenmode receive reduction, equal
/// power split across users, and per-user water-filling.
pub fn hybrid_precoder(
    channels: &[DMatrix<Complex64>],
    rf_chains: usize,
    streams_per_user: &[usize],
    power_w: f64,
    noise_w: f64,
) -> Result<HybridSolution> {
    let beams = hybrid_beams(
        channels,
        rf_chains,
        streams_per_user,
        RxCombining::DigitalReduction,
        false,
    )?;
    let allocation = per_user_waterfill(&beams.stream_gains, power_w, noise_w)?;
    Ok(HybridSolution {
        precoder: HybridPrecoder {
            analog: beams.analog,
            per_user_digital: beams.per_user_digital,
            total_power_w: power_w,
        },
        combiners: beams.combiners,
        allocation,
        stream_gains: beams.stream_gains,
        requested: beams.requested,
        delivered: beams.delivered,
    })
}

// ---------------------------------------------------------------------------
// Rate evaluation
// ---------------------------------------------------------------------------

/// Multiuser sum rate under Gaussian signaling with interference treated as
/// noise:
///
/// `R_k = log2 det(I + Q_k^{-1} H_k W_k P_k W_k^H H_k^H)` with
/// `Q_k = noise_w I + sum_{j != k} H_k W_j P_j W_j^H H_k^H`.
///
/// `beams` holds one matrix per user (`n_tx` rows; for hybrid precoding pass
/// the effective matrices `F D_k`). Stream powers come from `allocation`;
/// with `None` the beam columns are used as-is (power embedded). When
/// `combiners` are supplied, user `k`'s rate is evaluated on the projected
/// observation `G_k^H y` — never more than the unprojected rate. The
/// absolute-rate field is the spectral efficiency times `bandwidth_hz` (or
/// numerically equal to the spectral efficiency when no bandwidth is given).
pub fn sum_rate(
    channels: &[DMatrix<Complex64>],
    beams: &[DMatrix<Complex64>],
    allocation: Option<&PowerAllocation>,
    noise_w: f64,
    combiners: Option<&[DMatrix<Complex64>]>,
    bandwidth_hz: Option<f64>,
) -> Result<RateReport> {
    let (users, n_tx, n_rx) = validate_user_channels(channels)?;
    if beams.len() != users {
        return Err(BeamformingError::ShapeMismatch(format!(
            "{} beam matrices for {users} users",
            beams.len()
        )));
    }
    if !noise_w.is_finite() || noise_w <= 0.0 {
        return Err(BeamformingError::NonPositiveNoise(noise_w));
    }
    if let Some(bw) = bandwidth_hz
        && (!bw.is_finite() || bw <= 0.0)
    {
        return Err(BeamformingError::ShapeMismatch(format!(
            "bandwidth must be positive, got {bw} Hz"
        )));
    }
    for (user, w) in beams.iter().enumerate() {
        if w.nrows() != n_tx || w.ncols() == 0 {
            return Err(BeamformingError::ShapeMismatch(format!(
                "user {user} beam matrix is {}x{}, expected {n_tx} rows and at least one column",
                w.nrows(),
                w.ncols()
            )));
        }
    }
    if let Some(gs) = combiners {
        if gs.len() != users {
            return Err(BeamformingError::ShapeMismatch(format!(
                "{} combiners for {users} users",
                gs.len()
            )));
        }
        for (user, g) in gs.iter().enumerate() {
            if g.nrows() != n_rx[user] || g.ncols() == 0 || g.ncols() > n_rx[user] {
                return Err(BeamformingError::ShapeMismatch(format!(
                    "user {user} combiner is {}x{}, expected {} rows",
                    g.nrows(),
                    g.ncols(),
                    n_rx[user]
                )));
            }
        }
    }

    // Apply per-stream powers to the beam columns.
    let counts: Vec<usize> = beams.iter().map(|w| w.ncols()).collect();
    let scaled: Vec<DMatrix<Complex64>> = match allocation {
        None => beams.to_vec(),
        Some(alloc) => {
            let split = alloc.split_by(&counts)?;
            beams
                .iter()
                .zip(split)
                .map(|(w, powers)| {
                    let mut s = w.clone();
                    for (mut col, &p) in s.column_iter_mut().zip(powers.iter()) {
                        col *= Complex64::new(p.sqrt(), 0.0);
                    }
                    s
                })
                .collect()
        }
    };

    let mut per_user = Vec::with_capacity(users);
    for k in 0..users {
        // Received signal factors H_k W_j for every transmitter j.
        let received: Vec<DMatrix<Complex64>> =
            scaled.iter().map(|w| &channels[k] * w).collect();
        let projected: Vec<DMatrix<Complex64>> = match combiners {
            None => received,
            Some(gs) => received.iter().map(|r| gs[k].adjoint() * r).collect(),
        };
        let dim = projected[0].nrows();
        let noise_base = match combiners {
            None => DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(noise_w, 0.0),
            Some(gs) => (gs[k].adjoint() * &gs[k]) * Complex64::new(noise_w, 0.0),
        };
        let mut q = noise_base;
        for (j, r) in projected.iter().enumerate() {
            if j != k {
                q.gemm(Complex64::new(1.0, 0.0), r, &r.adjoint(), Complex64::new(1.0, 0.0));
            }
        }
        let mut q_plus_s = q.clone();
        let s = &projected[k];
        q_plus_s.gemm(Complex64::new(1.0, 0.0), s, &s.adjoint(), Complex64::new(1.0, 0.0));

        let log_q = log2_det_hermitian_pd(&hermitianize(&q))
            .ok_or(BeamformingError::SingularNoiseCovariance)?;
        let log_qs = log2_det_hermitian_pd(&hermitianize(&q_plus_s))
            .ok_or(BeamformingError::SingularNoiseCovariance)?;
        per_user.push((log_qs - log_q).max(0.0));
    }

    let sum: f64 = per_user.iter().sum();
    Ok(RateReport {
        per_user_bits_per_s_per_hz: per_user,
        sum_bits_per_s_per_hz: sum,
        sum_bits_per_s: sum * bandwidth_hz.unwrap_or(1.0),
        streams_reduced: 0,
    })
}
