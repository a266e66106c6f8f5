use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ActionKind;
use crate::error::{Error, Result};

/// Points for one bomb level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    pub solo: f64,
    pub call: f64,
}

impl Payoff {
    pub fn get(&self, action: ActionKind) -> f64 {
        match action {
            ActionKind::Solo => self.solo,
            ActionKind::Call => self.call,
        }
    }
}

/// Rewards, time costs and binning of the bomb-defusal task.
///
/// Every field has a documented default so a config file only needs to list
/// the values it overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PayoffSpec {
    /// Indexed by bomb level - 1.
    pub reward: [Payoff; 3],
    /// Seconds to solo a bomb, indexed by bomb level - 1.
    pub solo_time_cost: [f64; 3],
    pub call_time_base: f64,
    pub call_time_per_distance: f64,
    pub episode_time_limit: f64,
    pub n_bombs: u32,
    /// Upper (inclusive) edges of the near and medium distance bins.
    pub distance_cuts: [f64; 2],
    /// Upper (inclusive) edges of the low and medium time bins. Thirds of the
    /// time limit when absent.
    pub time_cuts: Option<[f64; 2]>,
    /// Side of the square map; positions are drawn from `0..grid_size` per axis.
    pub grid_size: u32,
}

impl Default for PayoffSpec {
    fn default() -> Self {
        PayoffSpec {
            reward: [
                Payoff { solo: 20.0, call: 10.0 },
                Payoff { solo: 15.0, call: 20.0 },
                Payoff { solo: 10.0, call: 30.0 },
            ],
            solo_time_cost: [10.0, 15.0, 20.0],
            call_time_base: 10.0,
            call_time_per_distance: 2.0,
            episode_time_limit: 240.0,
            n_bombs: 12,
            distance_cuts: [3.0, 7.0],
            time_cuts: None,
            grid_size: 10,
        }
    }
}

impl PayoffSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PayoffSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn reward(&self, bomb_type: u8, action: ActionKind) -> f64 {
        self.reward[level_index(bomb_type)].get(action)
    }

    pub fn solo_cost(&self, bomb_type: u8) -> f64 {
        self.solo_time_cost[level_index(bomb_type)]
    }

    pub fn call_cost(&self, distance_raw: f64) -> f64 {
        self.call_time_base + self.call_time_per_distance * distance_raw
    }

    pub fn time_cost(&self, bomb_type: u8, distance_raw: f64, action: ActionKind) -> f64 {
        match action {
            ActionKind::Solo => self.solo_cost(bomb_type),
            ActionKind::Call => self.call_cost(distance_raw),
        }
    }

    pub fn time_cuts(&self) -> [f64; 2] {
        self.time_cuts.unwrap_or([
            self.episode_time_limit / 3.0,
            2.0 * self.episode_time_limit / 3.0,
        ])
    }

    /// Largest Manhattan distance between two grid cells.
    pub fn max_distance(&self) -> u32 {
        2 * self.grid_size.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bombs == 0 {
            return Err(Error::config("n_bombs must be at least 1"));
        }
        if self.grid_size == 0 {
            return Err(Error::config("grid_size must be at least 1"));
        }
        for (i, p) in self.reward.iter().enumerate() {
            if !(p.solo.is_finite() && p.call.is_finite() && p.solo >= 0.0 && p.call >= 0.0) {
                return Err(Error::Config(format!("rewards of level {} must be finite and >= 0", i + 1)));
            }
        }
        if self.reward[2].call <= self.reward[2].solo {
            return Err(Error::config("level-3 call reward must exceed level-3 solo reward"));
        }
        if self.solo_time_cost.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::config("solo time costs must be positive"));
        }
        if !(self.call_time_base.is_finite() && self.call_time_base > 0.0) {
            return Err(Error::config("call_time_base must be positive"));
        }
        if !(self.call_time_per_distance.is_finite() && self.call_time_per_distance > 0.0) {
            return Err(Error::config("call_time_per_distance must be positive"));
        }
        if !(self.episode_time_limit.is_finite() && self.episode_time_limit > 0.0) {
            return Err(Error::config("episode_time_limit must be positive"));
        }
        let [d1, d2] = self.distance_cuts;
        if !(d1 >= 0.0 && d1 < d2) {
            return Err(Error::config("distance_cuts must be ascending and non-negative"));
        }
        // every distance bin must be reachable on the grid
        if d2 >= self.max_distance() as f64 {
            return Err(Error::config("far distance bin is empty for this grid_size"));
        }
        if (d1.floor() as i64 + 1) as f64 > d2 {
            return Err(Error::config("medium distance bin contains no integer distance"));
        }
        let [t1, t2] = self.time_cuts();
        if !(t1 > 0.0 && t1 < t2 && t2 < self.episode_time_limit) {
            return Err(Error::config("time_cuts must satisfy 0 < low < medium < episode_time_limit"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn level_index(bomb_type: u8) -> usize {
    debug_assert!((1..=3).contains(&bomb_type), "bomb type {bomb_type}");
    (bomb_type.clamp(1, 3) - 1) as usize
}
