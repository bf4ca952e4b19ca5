use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule has no stages")]
    Empty,
    #[error("malformed stage `{0}` (expected GENERATIONS:DAYS)")]
    Malformed(String),
    #[error("stage {0} has zero generations or zero window days")]
    ZeroStage(usize),
    #[error("generation {gen} is outside the schedule (1..={total})")]
    OutOfRange { gen: u32, total: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub generations: u32,
    pub window_days: u32,
}

/// Consecutive training stages, each a number of generations evaluated on
/// windows of a fixed calendar length. Written as `1500:90,400:150,100:365`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSchedule {
    stages: Vec<Stage>,
}

impl Default for StageSchedule {
    fn default() -> Self {
        StageSchedule {
            stages: vec![
                Stage {
                    generations: 1500,
                    window_days: 90,
                },
                Stage {
                    generations: 400,
                    window_days: 150,
                },
                Stage {
                    generations: 100,
                    window_days: 365,
                },
            ],
        }
    }
}

impl StageSchedule {
    pub fn new(stages: Vec<Stage>) -> Result<Self, ScheduleError> {
        if stages.is_empty() {
            return Err(ScheduleError::Empty);
        }
        if let Some(i) = stages.iter().position(|s| s.generations == 0 || s.window_days == 0) {
            return Err(ScheduleError::ZeroStage(i + 1));
        }
        Ok(StageSchedule { stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn total_generations(&self) -> u32 {
        self.stages.iter().map(|s| s.generations).sum()
    }

    pub fn max_window_days(&self) -> u32 {
        self.stages.iter().map(|s| s.window_days).max().unwrap_or(0)
    }

    /// 1-based stage index containing generation `gen` (1-based).
    pub fn stage_for(&self, gen: u32) -> Result<usize, ScheduleError> {
        let total = self.total_generations();
        if gen == 0 || gen > total {
            return Err(ScheduleError::OutOfRange { gen, total });
        }
        let mut end = 0;
        for (i, s) in self.stages.iter().enumerate() {
            end += s.generations;
            if gen <= end {
                return Ok(i + 1);
            }
        }
        unreachable!("gen within total")
    }

    pub fn window_days_for(&self, gen: u32) -> Result<u32, ScheduleError> {
        Ok(self.stages[self.stage_for(gen)? - 1].window_days)
    }

    /// Same stages cut off after `n` generations in total.
    pub fn truncated(&self, n: u32) -> Result<Self, ScheduleError> {
        let mut left = n;
        let mut stages = Vec::new();
        for s in &self.stages {
            if left == 0 {
                break;
            }
            let g = s.generations.min(left);
            stages.push(Stage {
                generations: g,
                window_days: s.window_days,
            });
            left -= g;
        }
        StageSchedule::new(stages)
    }
}

impl FromStr for StageSchedule {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let stages = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                let (g, d) = p.split_once(':').ok_or_else(|| ScheduleError::Malformed(p.into()))?;
                let parse = |x: &str| x.trim().parse::<u32>().map_err(|_| ScheduleError::Malformed(p.into()));
                Ok(Stage {
                    generations: parse(g)?,
                    window_days: parse(d)?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        StageSchedule::new(stages)
    }
}

impl fmt::Display for StageSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", s.generations, s.window_days)?;
        }
        Ok(())
    }
}

impl Serialize for StageSchedule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StageSchedule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
