use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The five discrete highway maneuvers a driver may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Accelerate,
    Maintain,
    Decelerate,
    ChangeLaneRight,
    ChangeLaneLeft,
}

impl Action {
    /// All actions, in the order they are offered to a driver.
    pub const ALL: [Action; 5] = [
        Action::Accelerate,
        Action::Maintain,
        Action::Decelerate,
        Action::ChangeLaneRight,
        Action::ChangeLaneLeft,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Accelerate => "accelerate",
            Action::Maintain => "maintain",
            Action::Decelerate => "decelerate",
            Action::ChangeLaneRight => "change lane to the right",
            Action::ChangeLaneLeft => "change lane to the left",
        }
    }

    pub fn is_lane_change(self) -> bool {
        matches!(self, Action::ChangeLaneLeft | Action::ChangeLaneRight)
    }

    /// Exact match against the canonical strings only.
    pub fn from_canonical(s: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a canonical action string: {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::from_canonical(s).ok_or_else(|| UnknownAction(s.to_string()))
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A chosen action with the driver's stated reason, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Decision {
    pub fn new(action: Action) -> Self {
        Decision {
            action,
            reason: None,
        }
    }

    pub fn with_reason(action: Action, reason: impl Into<String>) -> Self {
        Decision {
            action,
            reason: Some(reason.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_strings_round_trip() {
        for a in Action::ALL {
            assert_eq!(a.as_str().parse::<Action>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<Action>(&json).unwrap(), a);
        }
        assert!("stop".parse::<Action>().is_err());
    }
}
