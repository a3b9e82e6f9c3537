//! Configuration, reports and experiment runners behind the `combctl` CLI.
//!
//! The binary exposes three subcommands:
//!
//! - `combctl run`: executes one of the reproducibility experiments
//!   (`exact-controllization`, `scaling`, `coefficients`, `switch-compare`,
//!   `comb-audit`) and writes a JSON report (plus a CSV for scaling and
//!   coefficients). Exit status 0 iff every embedded verdict passes.
//! - `combctl validate`: checks a channel or comb file and prints the
//!   residual chain.
//! - `combctl fixture`: emits seeded reference objects in the library file
//!   formats.

pub mod config;
pub mod experiments;
pub mod fixtures;
pub mod report;
pub mod validate;
