//! The bomb-defusal episode: observable state, payoffs and transitions.

mod env;
mod spec;

pub use env::{initial_state, new_episode, step, Episode, StepOutcome};
pub use spec::{Payoff, PayoffSpec};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Solo,
    Call,
}

impl ActionKind {
    /// Enum order doubles as the tie-break order.
    pub const ALL: [ActionKind; 2] = [ActionKind::Solo, ActionKind::Call];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> ActionKind {
        ActionKind::ALL[i]
    }

    pub fn other(self) -> ActionKind {
        match self {
            ActionKind::Solo => ActionKind::Call,
            ActionKind::Call => ActionKind::Solo,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Solo => "Solo",
            ActionKind::Call => "Call",
        })
    }
}

impl FromStr for ActionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Solo" | "solo" => Ok(ActionKind::Solo),
            "Call" | "call" => Ok(ActionKind::Call),
            other => Err(Error::Usage(format!("unknown action {other:?}"))),
        }
    }
}

/// The three observation variables a player sees each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    BombType,
    Distance,
    Time,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::BombType, Feature::Distance, Feature::Time];

    pub fn name(self) -> &'static str {
        match self {
            Feature::BombType => "bomb_type",
            Feature::Distance => "distance",
            Feature::Time => "time",
        }
    }

    /// Size of the ordinal domain.
    pub fn cardinality(self) -> usize {
        3
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown feature {s:?}")))
    }
}

macro_rules! ordinal_bin {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: [$name; 3] = [$($name::$variant),+];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<$name> {
                $name::ALL.get(i).copied()
            }

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            /// Bin for `value` given two inclusive upper edges.
            pub fn from_value(value: f64, cuts: [f64; 2]) -> $name {
                if value <= cuts[0] {
                    $name::ALL[0]
                } else if value <= cuts[1] {
                    $name::ALL[1]
                } else {
                    $name::ALL[2]
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .into_iter()
                    .find(|b| b.label() == s)
                    .ok_or_else(|| Error::Usage(format!("unknown {} {s:?}", stringify!($name))))
            }
        }
    };
}

ordinal_bin!(DistanceBin { Near => "near", Medium => "medium", Far => "far" });
ordinal_bin!(TimeBin { Low => "low", Medium => "medium", High => "high" });

/// Full round state: the binned observation plus the raw fields it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub bomb_type: u8,
    pub distance_raw: f64,
    pub distance_bin: DistanceBin,
    pub time_remaining: f64,
    pub time_bin: TimeBin,
    pub bombs_remaining: u32,
    pub agent_pos: [i32; 2],
    pub team_pos: [i32; 2],
}

impl RoundState {
    pub fn is_terminal(&self) -> bool {
        self.bombs_remaining == 0 || self.time_remaining <= 0.0
    }

    pub fn key(&self) -> StateKey {
        StateKey {
            bomb_type: self.bomb_type,
            distance_bin: self.distance_bin,
            time_bin: self.time_bin,
            bombs_remaining: self.bombs_remaining,
        }
    }
}

/// The discretized state used by the policy, the counterfactual search and
/// (minus `bombs_remaining`) the Theory-of-Mind network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey {
    pub bomb_type: u8,
    pub distance_bin: DistanceBin,
    pub time_bin: TimeBin,
    pub bombs_remaining: u32,
}

impl StateKey {
    /// Zero-based ordinal of `feature`.
    pub fn ordinal(&self, feature: Feature) -> usize {
        match feature {
            Feature::BombType => (self.bomb_type - 1) as usize,
            Feature::Distance => self.distance_bin.index(),
            Feature::Time => self.time_bin.index(),
        }
    }

    /// Copy with one feature moved to ordinal `value`; other fields untouched.
    pub fn with_ordinal(&self, feature: Feature, value: usize) -> Option<StateKey> {
        let mut out = *self;
        match feature {
            Feature::BombType => {
                if value >= 3 {
                    return None;
                }
                out.bomb_type = value as u8 + 1;
            }
            Feature::Distance => out.distance_bin = DistanceBin::from_index(value)?,
            Feature::Time => out.time_bin = TimeBin::from_index(value)?,
        }
        Some(out)
    }

    /// The three observation ordinals in feature order.
    pub fn observation(&self) -> [usize; 3] {
        Feature::ALL.map(|f| self.ordinal(f))
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.bomb_type,
            self.distance_bin.label(),
            self.time_bin.label(),
            self.bombs_remaining
        )
    }
}

impl FromStr for StateKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        let [bomb, dist, time, bombs] = parts[..] else {
            return Err(Error::Usage(format!("malformed state key {s:?}")));
        };
        let bomb_type: u8 = bomb
            .parse()
            .ok()
            .filter(|b| (1..=3).contains(b))
            .ok_or_else(|| Error::Usage(format!("bad bomb type in {s:?}")))?;
        let bombs_remaining = bombs
            .parse()
            .map_err(|_| Error::Usage(format!("bad bombs_remaining in {s:?}")))?;
        Ok(StateKey {
            bomb_type,
            distance_bin: dist.parse()?,
            time_bin: time.parse()?,
            bombs_remaining,
        })
    }
}

/// Bins the raw fields of `state` with the cut points of `spec`.
pub fn discretize(state: &RoundState, spec: &PayoffSpec) -> StateKey {
    StateKey {
        bomb_type: state.bomb_type,
        distance_bin: DistanceBin::from_value(state.distance_raw, spec.distance_cuts),
        time_bin: TimeBin::from_value(state.time_remaining, spec.time_cuts()),
        bombs_remaining: state.bombs_remaining,
    }
}
