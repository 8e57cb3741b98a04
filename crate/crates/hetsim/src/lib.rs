//! Link-level Monte Carlo simulator for heterogeneous cellular networks.
//!
//! The crate models three downlink studies around a common core of channel
//! models, transmit precoding, and deterministic Monte Carlo plumbing:
//!
//! - **Multiuser precoding with large arrays**
//!   ([`scenarios::run_hybrid_vs_digital`]): fully digital
//!   block-diagonalization against hybrid analog/digital precoding with a
//!   limited number of RF chains, swept over SNR.
//! - **Mobile relays** ([`scenarios::run_mobile_relay`]): users inside a
//!   vehicle served directly through the vehicle wall versus through a
//!   roof-mounted relay array with a large-antenna base station.
//! - **Dual-band small cells** ([`scenarios::run_dual_band_sweep`]):
//!   distance-based association of users to a millimeter-wave/microwave
//!   small cell or a microwave macro cell, swept over the association radii.
//!
//! Every random draw comes from a named, counter-addressable stream
//! ([`rng::link_stream`]), so results are bit-reproducible for a fixed master
//! seed regardless of trial execution order or worker-thread count.

pub mod beamforming;
pub mod channel;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod scenarios;
