//! Majority adjudication under exact value equality.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

/// A non-empty set of votes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ballot<T>(Vec<T>);

impl<T> Ballot<T> {
    pub fn new(votes: Vec<T>) -> Result<Self> {
        if votes.is_empty() {
            return Err(invalid("empty ballot"));
        }
        Ok(Ballot(votes))
    }

    pub fn votes(&self) -> &[T] {
        &self.0
    }
}

/// Outcome of one vote. `class_size` is strictly more than half the ballot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict<T> {
    Majority { value: T, class_size: usize },
    NoMajority,
}

impl<T> Verdict<T> {
    pub fn majority(&self) -> Option<&T> {
        match self {
            Verdict::Majority { value, .. } => Some(value),
            Verdict::NoMajority => None,
        }
    }

    pub fn is_majority(&self) -> bool {
        matches!(self, Verdict::Majority { .. })
    }
}

/// Returns the value held by more than half of `votes`, if any.
///
/// No plurality fallback: a unique largest class that is not a strict
/// majority still yields [`Verdict::NoMajority`].
pub fn adjudicate<T: Eq + Clone>(votes: &[T]) -> Result<Verdict<T>> {
    if votes.is_empty() {
        return Err(invalid("empty ballot"));
    }
    // Boyer-Moore pass finds the only possible majority; a second pass confirms it.
    let mut candidate = &votes[0];
    let mut lead = 0usize;
    for v in votes {
        if lead == 0 {
            candidate = v;
            lead = 1;
        } else if v == candidate {
            lead += 1;
        } else {
            lead -= 1;
        }
    }
    let class_size = votes.iter().filter(|v| *v == candidate).count();
    if class_size > votes.len() / 2 {
        Ok(Verdict::Majority {
            value: candidate.clone(),
            class_size,
        })
    } else {
        Ok(Verdict::NoMajority)
    }
}

pub fn adjudicate_ballot<T: Eq + Clone>(ballot: &Ballot<T>) -> Verdict<T> {
    adjudicate(ballot.votes()).expect("ballot is non-empty")
}

/// Largest number of arbitrary faults `replicas` voters always mask.
pub fn mask_capacity(replicas: usize) -> usize {
    replicas.saturating_sub(1) / 2
}
