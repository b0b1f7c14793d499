use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Variable renewable technology subject to land eligibility and placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tech {
    Wind,
    Pv,
}

impl Tech {
    pub const ALL: [Tech; 2] = [Tech::Wind, Tech::Pv];

    pub fn as_str(self) -> &'static str {
        match self {
            Tech::Wind => "wind",
            Tech::Pv => "pv",
        }
    }
}

impl fmt::Display for Tech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tech {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wind" => Ok(Tech::Wind),
            "pv" => Ok(Tech::Pv),
            other => Err(Error::invalid(format!("unknown technology {other:?} (expected wind or pv)"))),
        }
    }
}
