//! Finite-sum minimization with shuffled component orders.
//!
//! The crate provides three epoch-structured optimizers for problems of the
//! form `f(x) = (1/N) Σᵢ f(x, i)`: random reshuffling ([`optim::Variant::Rr`]),
//! the incremental gradient method ([`optim::Variant::Ig`]) and a shuffled
//! proximal point method ([`optim::Variant::Sppm`]), together with the
//! machinery needed to certify their per-epoch behavior numerically:
//!
//! * [`problems`]: the finite-sum problem abstraction and built-in test
//!   problems with analytically known minimizers, Lipschitz constants and
//!   Łojasiewicz exponents,
//! * [`schedules`]: the diminishing step-size family `α / (t+β)^γ` and the
//!   series constants derived from it,
//! * [`optim`]: the optimizers themselves with seeded, reproducible
//!   permutation sampling and full trajectory recording,
//! * [`verify`]: per-epoch inequality checks over recorded trajectories,
//! * [`rates`]: the theoretical rate exponent as a function of the
//!   Łojasiewicz exponent and step-size decay, and an empirical log-log
//!   slope estimator.
//!
//! All randomness flows through the small deterministic generator in [`rng`],
//! so runs are bit-reproducible across platforms given the same seed.

pub mod linalg;
pub mod optim;
pub mod problems;
pub mod rates;
pub mod rng;
pub mod schedules;
pub mod verify;
