//! Dynamic-regret online learning over piecewise-linear comparators.
//!
//! [`flh`] runs Follow-the-Leading-History over [`sions`] experts that fit
//! lines from their start round. [`oracle`] solves the offline
//! budget-constrained problem with dual certificates, [`partition`] holds the
//! analysis tools that act on its output, and [`harness`] drives regret
//! scaling experiments over [`envgen`] environments.

pub mod baselines;
pub mod envgen;
pub mod error;
pub mod flh;
pub mod harness;
pub mod losses;
pub mod oracle;
pub mod partition;
pub mod psd;
pub mod sions;

pub use error::{Error, Result};
