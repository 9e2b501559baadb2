// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Activity windows expressed in epoch minutes.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MINUTES_PER_DAY: u64 = 1440;

/// Epoch minutes.
pub type Minute = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[derive(Default)]
pub enum Recurrence {
    #[default]
    Once,
    Daily,
}


#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("window start {start} is not before end {end}")]
    Empty { start: Minute, end: Minute },
    #[error("daily window spans {span} minutes, must be under a day")]
    DailyTooLong { span: u64 },
    #[error("windows overlap or are unsorted: {0:?} then {1:?}")]
    Unsorted(TimeWindow, TimeWindow),
}

/// A half-open interval `[start, end)`; `DAILY` windows repeat every day from `start` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub start: Minute,
    pub end: Minute,
    #[serde(default)]
    pub recurrence: Recurrence,
}

impl TimeWindow {
    pub fn once(start: Minute, end: Minute) -> Self {
        TimeWindow { start, end, recurrence: Recurrence::Once }
    }

    pub fn daily(start: Minute, end: Minute) -> Self {
        TimeWindow { start, end, recurrence: Recurrence::Daily }
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.start >= self.end {
            return Err(WindowError::Empty { start: self.start, end: self.end });
        }
        if self.recurrence == Recurrence::Daily && self.span() >= MINUTES_PER_DAY {
            return Err(WindowError::DailyTooLong { span: self.span() });
        }
        Ok(())
    }

    pub fn span(&self) -> u64 {
        self.end - self.start
    }

    pub fn contains(&self, t: Minute) -> bool {
        match self.recurrence {
            Recurrence::Once => self.start <= t && t < self.end,
            Recurrence::Daily => t >= self.start && (t - self.start) % MINUTES_PER_DAY < self.span(),
        }
    }

    /// Minute after which this window contributes nothing new: its end for `ONCE`,
    /// its first start for `DAILY` (the pattern is periodic afterwards).
    pub(crate) fn settle_point(&self) -> Minute {
        match self.recurrence {
            Recurrence::Once => self.end,
            Recurrence::Daily => self.start,
        }
    }

    /// Concrete occurrences whose start lies before `horizon`.
    pub fn occurrences(&self, horizon: Minute) -> Vec<(Minute, Minute)> {
        match self.recurrence {
            Recurrence::Once => vec![(self.start, self.end)],
            Recurrence::Daily => {
                let mut out = Vec::new();
                let mut s = self.start;
                while s < horizon {
                    out.push((s, s + self.span()));
                    s += MINUTES_PER_DAY;
                }
                if out.is_empty() {
                    out.push((self.start, self.end));
                }
                out
            }
        }
    }
}

impl std::fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.recurrence {
            Recurrence::Once => "once",
            Recurrence::Daily => "daily",
        };
        write!(f, "[{},{}) {kind}", self.start, self.end)
    }
}

/// Checks that windows are individually valid, sorted and pairwise non-overlapping.
pub fn validate_window_list(windows: &[TimeWindow]) -> Result<(), WindowError> {
    for w in windows {
        w.validate()?;
    }
    for pair in windows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a > b || windows_overlap(&a, &b) {
            return Err(WindowError::Unsorted(a, b));
        }
    }
    Ok(())
}

/// Horizon long enough that every periodic interaction among `windows` has been seen.
pub(crate) fn horizon_for<'a>(windows: impl IntoIterator<Item = &'a TimeWindow>) -> Minute {
    let settle = windows.into_iter().map(TimeWindow::settle_point).max().unwrap_or(0);
    settle + 3 * MINUTES_PER_DAY
}

pub fn windows_overlap(a: &TimeWindow, b: &TimeWindow) -> bool {
    let horizon = horizon_for([a, b]);
    let oa = a.occurrences(horizon);
    let ob = b.occurrences(horizon);
    oa.iter().any(|&(s1, e1)| ob.iter().any(|&(s2, e2)| s1 < e2 && s2 < e1))
}
