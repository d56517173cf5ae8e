//! Tail bounds for supermartingales whose differences are bounded from above.
//!
//! The crate evaluates the Hoeffding-type bound `H_n(x, v)` for the stopped
//! event `{X_k >= x and <X>_k <= v^2 for some k in [1, n]}` together with the
//! classical family it refines (Freedman, Bennett, Bernstein, Prohorov,
//! Azuma-Hoeffding, Fuk-Nagaev, Courbot, Haeusler), and carries the machinery
//! used to check those bounds:
//!
//! * [`cumulant`]: moment generating function estimates, the cumulant bounds
//!   they imply, closed-form optimal tilts and a golden-section minimizer.
//! * [`bounds`]: every closed-form bound, returned as a clamped [`LogProb`].
//! * [`processes`]: the increment laws, path simulation and event indicators.
//! * [`oracle`]: exact event probabilities by lattice dynamic programming.
//! * [`montecarlo`]: chunked, reproducible estimation with Clopper-Pearson
//!   intervals and bound verdicts.
//!
//! Everything is `no_std` (with `alloc`); floating point special functions come
//! from `libm`.

#![no_std]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod bounds;
pub mod cumulant;
pub mod montecarlo;
pub mod oracle;
pub mod processes;
pub mod special;

mod error;

pub use bounds::{LogProb, TailQuery, TruncationQuery};
pub use cumulant::{Tilt, VarianceLevel};
pub use error::Error;
pub use montecarlo::{Estimate, Verdict};
pub use oracle::{ExactResult, LatticeLaw};
pub use processes::{EventSpec, EventVariant, IncrementLaw, PathRecord};

pub type Result<T, E = Error> = core::result::Result<T, E>;
