//! Physical-layer channel models and link-budget arithmetic.
//!
//! Three channel families cover the simulator's needs:
//!
//! - Uniform linear array (ULA) steering vectors and a finite-scatterer
//!   geometric model for large arrays, where the channel is a sum of a few
//!   planar wavefronts and spatial sparsity matters.
//! - Flat Rayleigh fading (i.i.d. complex Gaussian entries) for
//!   rich-scattering microwave links.
//! - Log-distance path loss plus thermal noise for absolute link budgets.
//!
//! All draws consume a caller-provided random stream (see [`crate::rng`]) so
//! that realizations are bit-reproducible.

use crate::rng::complex_gaussian;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Boltzmann constant in joules per kelvin (exact SI value).
pub const BOLTZMANN_J_PER_K: f64 = 1.380_649e-23;

/// Errors raised by channel construction and link-budget arithmetic.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("array must have at least one element")]
    EmptyArray,
    #[error("element spacing must be positive and finite, got {0} wavelengths")]
    BadSpacing(f64),
    #[error("channel dimensions must be nonzero, got {n_rx} x {n_tx}")]
    EmptyChannel { n_rx: usize, n_tx: usize },
    #[error("scatterer path count must be at least one")]
    NoPaths,
    #[error("angle domain [{min}, {max}] rad is empty or not finite")]
    BadAngleDomain { min: f64, max: f64 },
    #[error("carrier frequency must be positive, got {0} Hz")]
    BadCarrier(f64),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("link budget field {field} must be positive, got {value}")]
    BadBudget { field: &'static str, value: f64 },
}

/// Geometry of a uniform linear antenna array.
///
/// Spacing is expressed in carrier wavelengths. Spacings below half a
/// wavelength produce correlated (effectively fewer independent) elements;
/// construction logs a warning in that case but does not fail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UlaGeometry {
    elements: usize,
    spacing_wavelengths: f64,
}

impl UlaGeometry {
    /// Creates an array geometry, validating element count and spacing.
    pub fn new(elements: usize, spacing_wavelengths: f64) -> Result<Self, ChannelError> {
        if elements == 0 {
            return Err(ChannelError::EmptyArray);
        }
        if !spacing_wavelengths.is_finite() || spacing_wavelengths <= 0.0 {
            return Err(ChannelError::BadSpacing(spacing_wavelengths));
        }
        if spacing_wavelengths < 0.5 {
            log::warn!(
                "element spacing {spacing_wavelengths} wavelengths is below half a wavelength; \
                 adjacent elements will be strongly correlated"
            );
        }
        Ok(Self {
            elements,
            spacing_wavelengths,
        })
    }

    /// Creates the common half-wavelength-spaced array.
    pub fn half_wavelength(elements: usize) -> Result<Self, ChannelError> {
        Self::new(elements, 0.5)
    }

    /// Number of antenna elements.
    pub fn elements(&self) -> usize {
        self.elements
    }

    /// Element spacing in carrier wavelengths.
    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }
}

/// Unit-norm steering vector of a ULA toward the given broadside angle.
///
/// Element `m` (0-based) equals `exp(i 2 pi spacing m sin(angle)) / sqrt(N)`,
/// so the vector always has unit Euclidean norm regardless of angle or
/// element count.
pub fn ula_steering(geometry: &UlaGeometry, angle_rad: f64) -> DVector<Complex64> {
    let n = geometry.elements;
    let scale = 1.0 / (n as f64).sqrt();
    let step = 2.0 * PI * geometry.spacing_wavelengths * angle_rad.sin();
    DVector::from_fn(n, |m, _| {
        let phase = step * m as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Distribution of per-path complex gains in the geometric channel model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// Zero-mean, unit-variance circularly-symmetric complex Gaussian.
    #[default]
    UnitComplexGaussian,
}

/// Parameters of the finite-scatterer geometric channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricChannelSpec {
    /// Transmit array size.
    pub n_tx: usize,
    /// Receive array size.
    pub n_rx: usize,
    /// Number of scattering paths (channel rank is at most this).
    pub paths: usize,
    /// Departure/arrival angles are drawn uniformly from this interval (rad).
    pub angle_domain: (f64, f64),
    /// Per-path gain distribution.
    pub gain_model: GainModel,
    /// Carrier frequency recorded on realizations (metadata only; rates are
    /// driven by SNR, not by the carrier).
    pub carrier_hz: f64,
}

impl GeometricChannelSpec {
    /// Creates a spec with the default angle domain (`[-pi/2, pi/2]`), gain
    /// model, and a 28 GHz carrier annotation.
    pub fn new(n_tx: usize, n_rx: usize, paths: usize) -> Result<Self, ChannelError> {
        let spec = Self {
            n_tx,
            n_rx,
            paths,
            angle_domain: (-FRAC_PI_2, FRAC_PI_2),
            gain_model: GainModel::UnitComplexGaussian,
            carrier_hz: 28.0e9,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks all field constraints.
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(ChannelError::EmptyChannel {
                n_rx: self.n_rx,
                n_tx: self.n_tx,
            });
        }
        if self.paths == 0 {
            return Err(ChannelError::NoPaths);
        }
        let (min, max) = self.angle_domain;
        if !min.is_finite() || !max.is_finite() || min >= max {
            return Err(ChannelError::BadAngleDomain { min, max });
        }
        if !self.carrier_hz.is_finite() || self.carrier_hz <= 0.0 {
            return Err(ChannelError::BadCarrier(self.carrier_hz));
        }
        Ok(())
    }
}

/// One drawn channel matrix together with its carrier annotation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// Channel matrix, receive antennas by transmit antennas.
    pub matrix: DMatrix<Complex64>,
    /// Carrier frequency in hertz.
    pub carrier_hz: f64,
}

/// Draws one geometric channel realization.
///
/// The matrix is `sqrt(n_tx n_rx / paths) * sum_l alpha_l a_rx(theta_l)
/// a_tx(phi_l)^H` with unit-norm steering vectors on half-wavelength ULAs,
/// i.i.d. complex Gaussian path gains `alpha_l`, and i.i.d. uniform angles.
/// The scaling makes the expected squared Frobenius norm equal
/// `n_tx * n_rx`. Per path, the draw order is gain, departure angle, arrival
/// angle; this order is part of the reproducibility contract.
pub fn draw_geometric_channel<R: Rng + ?Sized>(
    spec: &GeometricChannelSpec,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    spec.validate()?;
    let tx_array = UlaGeometry::half_wavelength(spec.n_tx)?;
    let rx_array = UlaGeometry::half_wavelength(spec.n_rx)?;
    let (angle_min, angle_max) = spec.angle_domain;

    let mut matrix = DMatrix::<Complex64>::zeros(spec.n_rx, spec.n_tx);
    let one = Complex64::new(1.0, 0.0);
    for _ in 0..spec.paths {
        let gain = match spec.gain_model {
            GainModel::UnitComplexGaussian => complex_gaussian(rng),
        };
        let departure = rng.random_range(angle_min..angle_max);
        let arrival = rng.random_range(angle_min..angle_max);
        let a_tx = ula_steering(&tx_array, departure);
        let a_rx = ula_steering(&rx_array, arrival);
        // matrix += gain * a_rx a_tx^H, without temporaries
        matrix.gemm(gain, &a_rx, &a_tx.adjoint(), one);
    }
    let scale = ((spec.n_tx * spec.n_rx) as f64 / spec.paths as f64).sqrt();
    matrix *= Complex64::new(scale, 0.0);
    Ok(ChannelRealization {
        matrix,
        carrier_hz: spec.carrier_hz,
    })
}

/// Draws a flat Rayleigh-fading channel: i.i.d. zero-mean, unit-variance
/// circularly-symmetric complex Gaussian entries, filled column-major.
pub fn draw_rayleigh_channel<R: Rng + ?Sized>(
    n_rx: usize,
    n_tx: usize,
    carrier_hz: f64,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    if n_rx == 0 || n_tx == 0 {
        return Err(ChannelError::EmptyChannel { n_rx, n_tx });
    }
    if !carrier_hz.is_finite() || carrier_hz <= 0.0 {
        return Err(ChannelError::BadCarrier(carrier_hz));
    }
    let mut matrix = DMatrix::<Complex64>::zeros(n_rx, n_tx);
    for c in 0..n_tx {
        for r in 0..n_rx {
            matrix[(r, c)] = complex_gaussian(rng);
        }
    }
    Ok(ChannelRealization { matrix, carrier_hz })
}

/// Link-budget parameters for an absolute-rate cell model.
///
/// Defaults describe a 1.8 GHz macro cell: 5 W transmit power, 1600 m cell
/// radius with 134 dB mean path loss at that reference distance, path-loss
/// exponent 3.8, 5 MHz bandwidth, 5 dB receiver noise figure, 10.3 dBi
/// receive antenna gain, and a 300 K noise temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    /// Total transmit power in watts.
    pub tx_power_w: f64,
    /// Nominal cell radius in meters.
    pub cell_radius_m: f64,
    /// Reference distance d0 for the path-loss model, in meters.
    pub reference_distance_m: f64,
    /// Path-loss exponent.
    pub path_loss_exponent: f64,
    /// Mean path loss at the reference distance, in dB.
    pub mean_pl_at_d0_db: f64,
    /// System bandwidth in hertz.
    pub bandwidth_hz: f64,
    /// Carrier frequency in hertz.
    pub carrier_hz: f64,
    /// Receiver noise figure in dB.
    pub noise_figure_db: f64,
    /// Receive antenna gain in dBi.
    pub rx_antenna_gain_dbi: f64,
    /// Noise temperature in kelvin.
    pub temperature_k: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power_w: 5.0,
            cell_radius_m: 1600.0,
            reference_distance_m: 1600.0,
            path_loss_exponent: 3.8,
            mean_pl_at_d0_db: 134.0,
            bandwidth_hz: 5.0e6,
            carrier_hz: 1.8e9,
            noise_figure_db: 5.0,
            rx_antenna_gain_dbi: 10.3,
            temperature_k: 300.0,
        }
    }
}

impl LinkBudget {
    /// Checks the positivity constraints used by the budget arithmetic.
    /// Transmit power may be zero (a silenced transmitter is a legitimate
    /// operating point); the scale-setting fields must be strictly positive.
    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive: [(&'static str, f64); 4] = [
            ("reference_distance_m", self.reference_distance_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("temperature_k", self.temperature_k),
        ];
        for (field, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(ChannelError::BadBudget { field, value });
            }
        }
        if !self.tx_power_w.is_finite() || self.tx_power_w < 0.0 {
            return Err(ChannelError::BadBudget {
                field: "tx_power_w",
                value: self.tx_power_w,
            });
        }
        Ok(())
    }

    /// Transmit power in dBm.
    pub fn tx_power_dbm(&self) -> f64 {
        watts_to_dbm(self.tx_power_w)
    }

    /// Noise power over the budget bandwidth, in watts.
    pub fn noise_power_w(&self) -> Result<f64, ChannelError> {
        Ok(dbm_to_watts(noise_power_dbm(self)?))
    }

    /// Mean linear channel power gain at the given distance, including the
    /// receive antenna gain: `10^((G_rx - PL(d)) / 10)`.
    pub fn mean_link_gain(&self, distance_m: f64) -> Result<f64, ChannelError> {
        let pl = path_loss_db(distance_m, self)?;
        Ok(db_to_linear(self.rx_antenna_gain_dbi - pl))
    }
}

/// Log-distance path loss in dB: `PL(d) = PL(d0) + 10 n log10(d / d0)`.
///
/// The model extrapolates below the reference distance as well; only
/// nonpositive distances are rejected.
pub fn path_loss_db(distance_m: f64, budget: &LinkBudget) -> Result<f64, ChannelError> {
    budget.validate()?;
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    Ok(budget.mean_pl_at_d0_db
        + 10.0 * budget.path_loss_exponent * (distance_m / budget.reference_distance_m).log10())
}

/// Thermal noise power over the budget bandwidth, in dBm:
/// `10 log10(k_B T B / 1 mW) + noise figure`.
pub fn noise_power_dbm(budget: &LinkBudget) -> Result<f64, ChannelError> {
    budget.validate()?;
    let noise_w = BOLTZMANN_J_PER_K * budget.temperature_k * budget.bandwidth_hz;
    Ok(watts_to_dbm(noise_w) + budget.noise_figure_db)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1.0e-3).log10()
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1.0e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a dB ratio to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
