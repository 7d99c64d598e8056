use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three hole functions of the policy sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hole {
    Where,
    How,
    What,
}

impl Hole {
    pub const ALL: [Hole; 3] = [Hole::Where, Hole::How, Hole::What];

    pub fn name(self) -> &'static str {
        match self {
            Hole::Where => "where",
            Hole::How => "how",
            Hole::What => "what",
        }
    }
}

impl fmt::Display for Hole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Hole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "where" => Ok(Hole::Where),
            "how" => Ok(Hole::How),
            "what" => Ok(Hole::What),
            other => Err(format!("unknown hole `{other}` (expected where, how or what)")),
        }
    }
}
