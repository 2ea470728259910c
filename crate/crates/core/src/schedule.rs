//! Temperature policies for annealed inference.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VbError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Fixed,
    Geometric,
    Harmonic,
}

impl std::str::FromStr for ScheduleKind {
    type Err = VbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Self::Fixed),
            "geometric" => Ok(Self::Geometric),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(VbError::InvalidSchedule(format!("unknown kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::Geometric => "geometric",
            Self::Harmonic => "harmonic",
        })
    }
}

/// Initial temperature `t0` decaying to exactly 1 after the annealed phase,
/// or held at `t0` throughout for [`ScheduleKind::Fixed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub kind: ScheduleKind,
    pub t0: f64,
    /// Annealed iteration count; ignored by `Fixed`.
    pub annealed_iterations: usize,
}

impl TemperatureSchedule {
    pub fn new(kind: ScheduleKind, t0: f64, annealed_iterations: usize) -> Result<Self> {
        let schedule = Self {
            kind,
            t0,
            annealed_iterations,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn fixed(t0: f64) -> Result<Self> {
        Self::new(ScheduleKind::Fixed, t0, 1)
    }

    pub fn geometric(t0: f64, annealed_iterations: usize) -> Result<Self> {
        Self::new(ScheduleKind::Geometric, t0, annealed_iterations)
    }

    pub fn harmonic(t0: f64, annealed_iterations: usize) -> Result<Self> {
        Self::new(ScheduleKind::Harmonic, t0, annealed_iterations)
    }

    /// Plain, non-annealed inference.
    pub fn untempered() -> Self {
        Self {
            kind: ScheduleKind::Fixed,
            t0: 1.0,
            annealed_iterations: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 >= 1.0) {
            return Err(VbError::InvalidSchedule(format!(
                "t0 must be finite and >= 1, got {}",
                self.t0
            )));
        }
        match self.kind {
            ScheduleKind::Geometric if self.annealed_iterations < 2 => {
                Err(VbError::InvalidSchedule(
                    "geometric schedule needs annealed_iterations >= 2".into(),
                ))
            }
            ScheduleKind::Harmonic if self.annealed_iterations < 1 => Err(
                VbError::InvalidSchedule("harmonic schedule needs annealed_iterations >= 1".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Cooling rate of the decaying schedules; `None` for `Fixed`.
    pub fn cooling_rate(&self) -> Option<f64> {
        let ia = self.annealed_iterations as f64;
        match self.kind {
            ScheduleKind::Fixed => None,
            ScheduleKind::Geometric => Some((1.0 / self.t0).powf(1.0 / (ia - 1.0))),
            ScheduleKind::Harmonic => Some((self.t0 - 1.0) / ia),
        }
    }

    /// Temperature at `iteration` (0-based). Never below 1.
    pub fn temperature(&self, iteration: usize) -> Result<f64> {
        self.validate()?;
        let t = match self.kind {
            ScheduleKind::Fixed => self.t0,
            ScheduleKind::Geometric => {
                if iteration + 1 >= self.annealed_iterations {
                    1.0
                } else {
                    let rate = self.cooling_rate().unwrap_or(1.0);
                    (self.t0 * rate.powi(iteration as i32)).max(1.0)
                }
            }
            ScheduleKind::Harmonic => {
                if iteration >= self.annealed_iterations {
                    1.0
                } else {
                    let rate = self.cooling_rate().unwrap_or(0.0);
                    (self.t0 / (1.0 + rate * iteration as f64)).max(1.0)
                }
            }
        };
        Ok(t)
    }

    /// True once the schedule has stopped changing.
    pub fn is_settled(&self, iteration: usize) -> bool {
        match self.kind {
            ScheduleKind::Fixed => true,
            ScheduleKind::Geometric => iteration + 1 >= self.annealed_iterations,
            ScheduleKind::Harmonic => iteration >= self.annealed_iterations,
        }
    }
}
