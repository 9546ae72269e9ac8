//! Differentially private top-k selection.
//!
//! The centerpiece is stable top-k selection: privately pick the rank where
//! the sorted histogram has its largest gap, then release the top-k index set
//! noise-free whenever a Gaussian stability test certifies that one user
//! cannot change it. Around that sit the supporting pieces:
//!
//! - [`histogram`]: vote ingestion, sorting, gap queries, top-k extraction;
//! - [`noise`]: seedable Laplace / Gaussian / Gumbel sampling;
//! - [`accountant`]: RDP curves, approximate-RDP composition, conversion to
//!   (eps, delta), and calibration against a target budget;
//! - [`mechanisms`]: the selection mechanisms and their receipts;
//! - [`sensitivity`]: local, at-distance, and smooth sensitivity of the
//!   top-k release;
//! - [`bench`]: the experiment harness behind the `dptopk bench` subcommand;
//! - [`io`]: CSV formats for votes and histograms.

pub mod accountant;
pub mod bench;
pub mod error;
pub mod histogram;
pub mod io;
pub mod mechanisms;
pub mod noise;
pub mod sensitivity;

pub use accountant::{calibrate, zcdp_to_dp, Calibration, DpBudget, MechanismSpec, RdpCurve};
pub use error::{Error, Result};
pub use histogram::{Histogram, SelectionOutcome, SortedView};
pub use mechanisms::{
    em_top_k_peel, pate_label, ptr_gaussian, ptr_laplace, regularized_large_gap, rnm_select,
    stable_top_k_adaptive, stable_top_k_fixed, MechanismReceipt, RdpLedger, Regularizer,
    VoteMatrix,
};
pub use noise::{sample, ForcedSource, NoiseKind, NoiseShape, NoiseSource, RngStream};
pub use sensitivity::{
    local_sensitivity, sensitivity_at_distance, smooth_sensitivity, SensitivityProfile,
};
