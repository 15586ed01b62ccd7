//! Task and result data model shared by every other module.

mod curriculum;
mod report;
mod run;

pub use curriculum::{
    CurriculumSpec, GridPos, MapSpec, ObjectiveSpec, Side, SpecError, Terrain, UnitSpec,
    WinCondition,
};
pub use report::{percent, ratio_serde, EpisodeMetrics, PerformanceReport, WinRate};
pub use run::{EngineConfig, IterationRecord, Outcome, RunState, RunStatus};

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Self {
                Self(name.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

identifier!(
    /// Unit type identifier in UpperCamelCase, e.g. `SiegeTank`.
    UnitType
);
identifier!(
    /// Technology or ability identifier, e.g. `Stimpack` or `BlinkTech`.
    Tech
);
