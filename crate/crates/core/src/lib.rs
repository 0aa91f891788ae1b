//! Multi-step motion prediction for quadrotors.
//!
//! The crate combines three families of predictors over the same state
//! parameterization:
//!
//! * a fully convolutional sequence model (`tcn`) that maps a window of past
//!   states plus past and future motor commands to a series of future body
//!   rates and velocities in a single forward pass,
//! * a Newton-Euler rigid-body model (`physics`) integrated forward in time,
//!   with nonlinear least-squares parameter identification,
//! * hybrid predictors (`hybrid`) that splice learned components into the
//!   physics rollout.
//!
//! `dataset` covers telemetry ingestion, windowing, normalization and
//! synthetic flight generation; `checkpoint` is the on-disk model container.

pub mod checkpoint;
pub mod dataset;
pub mod hybrid;
pub mod physics;
pub mod quadstate;
pub mod tcn;

pub use quadstate::{AugmentedState, ControlInput, QuadState, TruncatedState};
pub use tcn::tensor::SeqTensor;
