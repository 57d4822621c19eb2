//! Command-line driver for `nhim-core` experiments.
//!
//! A run reads one JSON [`config::ExperimentConfig`], executes one of the
//! [`commands::Experiment`]s and writes a JSON summary, an optional CSV
//! series and a manifest into the output directory. The process exit code
//! follows [`Status`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Experiment, Outcome};
pub use config::{ConfigError, ExperimentConfig};

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A checked property or audit failed.
    PropertyFailure,
    /// The configuration could not be parsed, type-checked or written out.
    ConfigError,
    /// The experiment did not settle within `n_max` iterates.
    HorizonExhausted,
    /// The model contradicts its own declared structure.
    ModelInconsistency,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::PropertyFailure => 1,
            Status::ConfigError => 2,
            Status::HorizonExhausted => 3,
            Status::ModelInconsistency => 4,
        }
    }

    /// Status for an error that aborted a run.
    pub fn of_error(e: &anyhow::Error) -> Status {
        use nhim_core::Error as E;
        for cause in e.chain() {
            if let Some(core) = cause.downcast_ref::<E>() {
                return match core {
                    E::ModelInconsistency { .. }
                    | E::Escaped(_)
                    | E::EmptyOrbit { .. }
                    | E::Divergence { .. } => Status::ModelInconsistency,
                    E::Contract(_)
                    | E::InvalidParameter(_)
                    | E::OutsideNeighborhood { .. }
                    | E::DegenerateVector { .. } => Status::ConfigError,
                };
            }
        }
        Status::ConfigError
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_codes() {
        let inconsistent = anyhow::Error::new(nhim_core::Error::ModelInconsistency {
            what: "drift".into(),
            residual: 1.0,
        });
        assert_eq!(Status::of_error(&inconsistent).code(), 4);
        let empty = anyhow::Error::new(nhim_core::Error::EmptyOrbit { n: 3 }).context("lambda");
        assert_eq!(Status::of_error(&empty).code(), 4);
        let invalid = anyhow::Error::new(nhim_core::Error::InvalidParameter("rho".into()));
        assert_eq!(Status::of_error(&invalid).code(), 2);
        assert_eq!(Status::of_error(&ConfigError("x".into()).into()).code(), 2);
        let io = anyhow::Error::new(std::io::Error::other("disk full"));
        assert_eq!(Status::of_error(&io).code(), 2);
    }
}
