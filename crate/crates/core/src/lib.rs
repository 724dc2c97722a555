//! Certifying non-Gaussianity and stellar rank from homodyne statistics.
//!
//! Measuring a single quadrature gives a witness. It is the projector onto a
//! small window around a zero of the target's quadrature distribution. Every
//! energy-bounded state of lower stellar rank puts at least a threshold amount
//! of probability into the window. Observing less certifies the rank, or
//! certifies that the energy promise was broken.
//!
//! Modules, bottom-up:
//!
//! * [`states`]: state model and closed-form quadrature distributions.
//! * [`zeros`]: real zeros of quadrature distributions.
//! * [`witness`]: windows and their expectation values.
//! * [`optimize`]: threshold values by multi-start simplex search.
//! * [`homodyne`]: simulated homodyne samples and the counting estimator.
//! * [`certify`]: Hoeffding sample planning and verdicts.
//! * [`oracle`]: independent Fock-basis cross-checks.

// Negated comparisons are how NaN gets rejected along with out-of-range input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
pub mod error;
pub mod homodyne;
pub mod oracle;
pub mod optimize;
pub mod par;
pub mod quadrature;
pub mod special;
pub mod states;
pub mod witness;
pub mod zeros;

pub use error::{Result, WitnessError};
pub use states::{MixedState, QuadratureAngle, State, StellarState};
pub use witness::{Window, WindowSet};

