//! Covariance estimators: realised covariance, the noise covariance, the
//! balanced and positive semi-definite MRC, its kernel representation, and
//! the classic and pre-averaged Hayashi-Yoshida estimators.

mod derived;
mod diagnostics;
mod hy;
mod kernel;
mod mrc;
mod realised;

pub use derived::{beta_of, corr_of, DerivedStats};
pub use diagnostics::{scheme_diagnostics, SchemeDiagnostics, C_HAT_WARN, K_HAT_WARN};
pub use hy::{hy_classic, hy_classic_cov, hy_preavg, hy_preavg_pair, preaverage_ticks, PreaveragedTicks};
pub use kernel::{mrc_kernel_form, KernelForm};
pub use mrc::{mrc_balanced, mrc_pre_rescaling, mrc_psd};
pub use realised::{noise_cov, realised_cov};

pub(crate) use mrc::window_for;
