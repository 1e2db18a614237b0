//! Target stream-processing engines a generated pipeline can be built for.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Stream-processing engine a pipeline targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSystem {
    Flink,
    Storm,
    Spark,
}

impl TargetSystem {
    pub const ALL: [TargetSystem; 3] = [TargetSystem::Flink, TargetSystem::Storm, TargetSystem::Spark];

    pub fn name(&self) -> &'static str {
        match self {
            TargetSystem::Flink => "flink",
            TargetSystem::Storm => "storm",
            TargetSystem::Spark => "spark",
        }
    }

    /// Conventional implementation language for generated pipeline code.
    /// All three engines are driven through their Java APIs here.
    pub fn code_language(&self) -> &'static str {
        "java"
    }
}

impl fmt::Display for TargetSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetSystem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flink" => Ok(TargetSystem::Flink),
            "storm" => Ok(TargetSystem::Storm),
            "spark" => Ok(TargetSystem::Spark),
            other => Err(format!("unknown target system '{other}' (expected flink, storm, or spark)")),
        }
    }
}
