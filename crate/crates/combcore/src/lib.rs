//! Numerical toolkit for controlled quantum operations, quantum combs and
//! universal controllization of divisible unitaries.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense complex matrices with subsystem bookkeeping
//!   (Kronecker products, partial traces, vectorization, Schatten norms,
//!   Hermitian eigendecomposition, matrix exponentials, unitary roots).
//! - [`channels`]: CPTP maps as Kraus sets / Choi operators, validation,
//!   Stinespring dilation, composition, qubit Pauli decomposition.
//! - [`controlled`]: coherently controlled operations parameterized by a
//!   coherence operator, coherence norms, two-operation control, and the
//!   quantum-switch comparison.
//! - [`combs`]: N-slot quantum combs, validity conditions on the Choi and
//!   Kraus sides, link application, controlled combs.
//! - [`controllization`]: neutralization combs and the controllization
//!   algorithms (eigenstate, multicopy via the antisymmetric state, and
//!   Pauli/Clifford basis randomization with error analysis).
//! - [`io`]: JSON file formats shared with the `combctl` CLI.
//!
//! All operations are pure functions over immutable values and are safe to
//! call concurrently.

pub mod channels;
pub mod combs;
pub mod controlled;
pub mod controllization;
pub mod error;
pub mod io;
pub mod sampling;
pub mod tensor;
pub mod tol;

pub use error::{Error, Result};
