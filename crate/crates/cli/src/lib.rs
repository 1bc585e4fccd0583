//! Pipeline orchestration behind the `cellhealth` command.

pub mod commands;
pub mod pipeline;

use cellhealth_models::Error;

/// Exit status for a failed command: 1 usage, 2 data or schema,
/// 3 missing prerequisite, 4 numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    use cellhealth_core::Error as Core;
    use cellhealth_nn::Error as Nn;
    match err {
        Error::Ordering { .. } => 3,
        Error::Numerical(_) | Error::FrozenMutation { .. } => 4,
        Error::Input(_) | Error::Io { .. } | Error::Csv(_) => 2,
        Error::Nn(Nn::Usage(_)) => 1,
        Error::Nn(_) => 2,
        Error::Core(e) => match e {
            Core::Config(_) => 1,
            Core::Parse { .. } | Core::Io { .. } | Core::Csv(_) => 2,
            Core::Domain(_)
            | Core::Saturation { .. }
            | Core::Depletion(..)
            | Core::Infeasible(_)
            | Core::Abnormal(_) => 4,
        },
    }
}
