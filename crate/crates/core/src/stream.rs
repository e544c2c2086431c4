//! Finite prefixes of timed streams.
//!
//! A timed stream maps every tick to the (possibly empty) ordered list of
//! messages transmitted in that time interval. Only finite prefixes are ever
//! materialised; `horizon` is the number of intervals in the prefix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a time interval. Tick 0 is the first interval.
pub type TimeIndex = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("tick {t} is beyond the stream horizon {horizon}")]
    Horizon { t: TimeIndex, horizon: u64 },
    #[error("streams do not share one horizon (expected {expected}, stream {index} has {found})")]
    Shape {
        index: usize,
        expected: u64,
        found: u64,
    },
    #[error("cycle length must be at least 1")]
    ZeroCycleLength,
}

/// The messages of one stream within one time interval.
///
/// Equality is element-wise and order-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Interval<T>(Vec<T>);

impl<T> Interval<T> {
    pub fn empty() -> Self {
        Interval(Vec::new())
    }

    pub fn singleton(item: T) -> Self {
        Interval(vec![item])
    }

    pub fn from_items(items: Vec<T>) -> Self {
        Interval(items)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn items(&self) -> &[T] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    /// Returns the only element if the interval has length exactly one.
    pub fn single(&self) -> Option<&T> {
        match self.0.as_slice() {
            [x] => Some(x),
            _ => None,
        }
    }

    pub fn into_items(self) -> Vec<T> {
        self.0
    }
}

impl<T> Default for Interval<T> {
    fn default() -> Self {
        Interval::empty()
    }
}

impl<T> From<Vec<T>> for Interval<T> {
    fn from(items: Vec<T>) -> Self {
        Interval(items)
    }
}

impl<T> FromIterator<T> for Interval<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Interval(iter.into_iter().collect())
    }
}

/// Finite truncation of an infinite timed stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimedStreamPrefix<T> {
    intervals: Vec<Interval<T>>,
}

impl<T> TimedStreamPrefix<T> {
    pub fn new(intervals: Vec<Interval<T>>) -> Self {
        TimedStreamPrefix { intervals }
    }

    pub fn horizon(&self) -> u64 {
        self.intervals.len() as u64
    }

    pub fn intervals(&self) -> &[Interval<T>] {
        &self.intervals
    }

    pub fn push(&mut self, interval: Interval<T>) {
        self.intervals.push(interval);
    }

    /// Interval access. Reading past the horizon is a harness bug and is
    /// reported, never answered with an empty interval.
    pub fn ti(&self, t: TimeIndex) -> Result<&Interval<T>, StreamError> {
        usize::try_from(t)
            .ok()
            .and_then(|i| self.intervals.get(i))
            .ok_or(StreamError::Horizon {
                t,
                horizon: self.horizon(),
            })
    }
}

impl<T> FromIterator<Interval<T>> for TimedStreamPrefix<T> {
    fn from_iter<I: IntoIterator<Item = Interval<T>>>(iter: I) -> Self {
        TimedStreamPrefix::new(iter.into_iter().collect())
    }
}

/// True iff no interval of `stream` carries more than `k` messages.
pub fn msg_bound<T>(k: usize, stream: &TimedStreamPrefix<T>) -> bool {
    stream.intervals.iter().all(|iv| iv.len() <= k)
}

/// True iff at every tick at most one of `streams` is nonempty.
pub fn inf_disjoint<T>(streams: &[TimedStreamPrefix<T>]) -> Result<bool, StreamError> {
    let Some(first) = streams.first() else {
        return Ok(true);
    };
    let horizon = first.horizon();
    for (index, s) in streams.iter().enumerate() {
        if s.horizon() != horizon {
            return Err(StreamError::Shape {
                index,
                expected: horizon,
                found: s.horizon(),
            });
        }
    }
    Ok((0..first.intervals.len()).all(|t| {
        streams
            .iter()
            .filter(|s| !s.intervals[t].is_empty())
            .count()
            <= 1
    }))
}

/// Slot index within the current communication round.
pub fn mod_slot(t: TimeIndex, cycle_length: u64) -> Result<u64, StreamError> {
    t.checked_rem(cycle_length)
        .ok_or(StreamError::ZeroCycleLength)
}
