//! Physical-layer secret key generation over channels dominated by a
//! reconfigurable intelligent surface (RIS).
//!
//! The crate is organised bottom-up:
//!
//! * [`chansim`] draws multipath UPA channels, RIS phases and two-way probing rounds.
//! * [`attacks`] implements the legacy CSI and cross-multiplication features and the
//!   man-in-the-middle RIS reconstructions that break them.
//! * [`skr`] evaluates the closed-form mutual-information gap and the numerical
//!   identities behind it.
//! * [`neural`] is a small dense-network engine with the adversarial training loop
//!   and the worst-case Eve trainer.
//! * [`featgen`] holds the explicit polynomial-sine generator and the dictionary
//!   distillation of trained networks.
//! * [`keys`] quantizes features and scores key agreement.

pub mod attacks;
pub mod chansim;
pub mod featgen;
pub mod keys;
pub mod neural;
pub mod rng;
pub mod skr;
pub mod stats;

/// Complex double used for every signal and channel quantity.
pub type C64 = num_complex::Complex<f64>;
