//! Treatment arms and their assignment vectors.
//!
//! A design over `T` periods uses `T + 1` arms: always-control `0`, always-treated
//! `1`, and one pulse arm `e_t` per period `t = 2..=T`. Times are 1-based throughout
//! the crate, matching how experiments are usually described.
//!
//! Arms are stored in a fixed order (`0`, `1`, `e_2`, ..., `e_T`); [`Arm::index`]
//! maps an arm to its slot, so a pulse at time `t` sits at index `t`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    AlwaysControl,
    AlwaysTreated,
    /// Treated for the first time at this (1-based) period.
    Pulse(usize),
}

/// How a pulse arm expands to a treatment path: a single treated period, or
/// treatment from that period to the end of the horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Pulse,
    Wedge,
}

impl Arm {
    /// Slot of this arm in the canonical order `0, 1, e_2, ..., e_T`.
    pub fn index(self) -> usize {
        match self {
            Arm::AlwaysControl => 0,
            Arm::AlwaysTreated => 1,
            Arm::Pulse(t) => t,
        }
    }

    pub fn from_index(index: usize) -> Arm {
        match index {
            0 => Arm::AlwaysControl,
            1 => Arm::AlwaysTreated,
            t => Arm::Pulse(t),
        }
    }

    /// All `T + 1` arms of a horizon, in canonical order.
    pub fn all(horizon: usize) -> impl Iterator<Item = Arm> {
        (0..=horizon).map(Arm::from_index)
    }

    pub fn validate(self, horizon: usize) -> Result<()> {
        match self {
            Arm::Pulse(t) if t < 2 || t > horizon => Err(Error::InvalidArm { arm: self, horizon }),
            _ => Ok(()),
        }
    }

    /// Key used in JSON documents and schedule CSV file names.
    pub fn key(self) -> String {
        match self {
            Arm::AlwaysControl => "always0".to_string(),
            Arm::AlwaysTreated => "always1".to_string(),
            Arm::Pulse(t) => format!("pulse_{t}"),
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always0" => Ok(Arm::AlwaysControl),
            "always1" => Ok(Arm::AlwaysTreated),
            _ => s
                .strip_prefix("pulse_")
                .and_then(|t| t.parse::<usize>().ok())
                .map(Arm::Pulse)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown arm key {s:?}"))),
        }
    }
}

impl Serialize for Arm {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for Arm {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A length-`T` binary treatment path.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AssignmentVector(Vec<u8>);

impl AssignmentVector {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Treatment at 1-based period `t`.
    pub fn at(&self, t: usize) -> u8 {
        self.0[t - 1]
    }

    /// Recover the arm a bit pattern encodes, together with the family when the
    /// pattern pins it down (`e_T` and `w_T` coincide, as do single-period paths).
    pub fn decode(bits: &[u8]) -> Option<(Arm, Option<Family>)> {
        let horizon = bits.len();
        if bits.iter().any(|&b| b > 1) || horizon == 0 {
            return None;
        }
        let ones = bits.iter().filter(|&&b| b == 1).count();
        if ones == 0 {
            return Some((Arm::AlwaysControl, None));
        }
        if ones == horizon {
            return Some((Arm::AlwaysTreated, None));
        }
        let first = bits.iter().position(|&b| b == 1)? + 1;
        if first < 2 {
            return None;
        }
        let arm = Arm::Pulse(first);
        let is_pulse = ones == 1;
        let is_wedge = ones == horizon - first + 1 && bits[first - 1..].iter().all(|&b| b == 1);
        match (is_pulse, is_wedge) {
            (true, true) => Some((arm, None)),
            (true, false) => Some((arm, Some(Family::Pulse))),
            (false, true) => Some((arm, Some(Family::Wedge))),
            (false, false) => None,
        }
    }
}

/// Expand an arm into its canonical treatment path over `horizon` periods.
pub fn make_arm_vector(arm: Arm, family: Family, horizon: usize) -> Result<AssignmentVector> {
    arm.validate(horizon)?;
    let bits = (1..=horizon)
        .map(|s| match (arm, family) {
            (Arm::AlwaysControl, _) => 0,
            (Arm::AlwaysTreated, _) => 1,
            (Arm::Pulse(t), Family::Pulse) => u8::from(s == t),
            (Arm::Pulse(t), Family::Wedge) => u8::from(s >= t),
        })
        .collect();
    Ok(AssignmentVector(bits))
}
