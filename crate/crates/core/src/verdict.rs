use serde::{Deserialize, Serialize};

use crate::stream::TimeIndex;

/// First point at which a predicate failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub predicate: String,
    /// `None` for static (configuration) predicates.
    pub t: Option<TimeIndex>,
    pub node: Option<usize>,
    pub detail: String,
}

/// Outcome of evaluating a predicate.
///
/// `Refused` means the predicate's own precondition did not hold, so no
/// statement about the guarantee is made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated(Violation),
    Refused(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            Verdict::Violated(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_refused(&self) -> bool {
        matches!(self, Verdict::Refused(_))
    }

    pub(crate) fn at(
        predicate: &str,
        t: TimeIndex,
        node: Option<usize>,
        detail: impl Into<String>,
    ) -> Verdict {
        Verdict::Violated(Violation {
            predicate: predicate.to_string(),
            t: Some(t),
            node,
            detail: detail.into(),
        })
    }

    pub(crate) fn static_failure(
        predicate: &str,
        node: Option<usize>,
        detail: impl Into<String>,
    ) -> Verdict {
        Verdict::Violated(Violation {
            predicate: predicate.to_string(),
            t: None,
            node,
            detail: detail.into(),
        })
    }

    pub fn report(&self, predicate: &str) -> VerdictReport {
        VerdictReport {
            predicate: predicate.to_string(),
            holds: self.holds(),
            violation: self.violation().cloned(),
            refused: match self {
                Verdict::Refused(r) => Some(r.clone()),
                _ => None,
            },
        }
    }
}

/// Serialised form: `{"predicate":..,"holds":..,"violation":{..}|null,"refused":..|null}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub predicate: String,
    pub holds: bool,
    pub violation: Option<Violation>,
    pub refused: Option<String>,
}
