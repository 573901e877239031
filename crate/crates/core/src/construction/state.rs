//! Dialogue-state mechanisms: rule cycling and the memory queue, each in a
//! counting variant and a variant that re-reads earlier outputs.

use serde::{Deserialize, Serialize};

/// Default cap on recorded enqueues for the intermediate-output queue.
pub const DEFAULT_ENQUEUE_CEILING: usize = 16;

/// Modular prefix sum: number of earlier matches of the template (clamped at
/// the counter's capacity), reduced mod `m`.
pub fn cycle_modular(prior_matches: usize, m: usize, max_width: usize) -> usize {
    assert!(m >= 1, "rule list is empty");
    prior_matches.min(max_width) % m
}

/// Intermediate outputs: the rule after the one used in the most recent
/// recognized response, or 0 if there is none.
pub fn cycle_intermediate(most_recent: Option<usize>, m: usize) -> usize {
    assert!(m >= 1, "rule list is empty");
    most_recent.map_or(0, |i| (i + 1) % m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueEvent {
    Enqueue,
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MemoryDecision {
    /// Read the `d`-th stored input (0-based).
    Dequeue { d: usize },
    NullResponse,
}

/// Bounded counter in `0..=s`: enqueues increment (saturating), no-match
/// inputs decrement (floored at 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Gridworld {
    pub state: usize,
    pub decrements: usize,
}

impl Gridworld {
    /// Applies one event; returns the decision for a no-match event.
    pub fn step(&mut self, event: QueueEvent, s: usize) -> Option<MemoryDecision> {
        match event {
            QueueEvent::Enqueue => {
                self.state = (self.state + 1).min(s);
                None
            }
            QueueEvent::NoMatch if self.state > 0 => {
                self.state -= 1;
                let d = self.decrements;
                self.decrements += 1;
                Some(MemoryDecision::Dequeue { d })
            }
            QueueEvent::NoMatch => Some(MemoryDecision::NullResponse),
        }
    }
}

/// Runs the counter over `events`; the last event must be the current
/// no-match input.
pub fn memory_gridworld(events: &[QueueEvent], s: usize) -> MemoryDecision {
    assert!(s >= 1, "gridworld needs at least one state above empty");
    let (last, prior) = events.split_last().expect("at least the current event");
    assert_eq!(*last, QueueEvent::NoMatch, "decision is taken on a no-match input");
    let mut g = Gridworld::default();
    for e in prior {
        g.step(*e, s);
    }
    g.step(*last, s).expect("no-match yields a decision")
}

/// Intermediate outputs: `d` earlier responses carried a dequeue prefix and
/// `e` inputs were stored; the queue is non-empty iff `d < e`.
pub fn memory_intermediate(prior_dequeue_responses: usize, prior_enqueues: usize, ceiling: usize) -> MemoryDecision {
    let e = prior_enqueues.min(ceiling);
    if prior_dequeue_responses < e {
        MemoryDecision::Dequeue { d: prior_dequeue_responses }
    } else {
        MemoryDecision::NullResponse
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    use proptest::prelude::*;

    #[test]
    fn cycling_arithmetic() {
        assert_eq!(cycle_modular(0, 3, 64), 0);
        assert_eq!(cycle_modular(5, 3, 64), 2);
        assert_eq!(cycle_intermediate(None, 3), 0);
        assert_eq!(cycle_intermediate(Some(1), 3), 2);
        assert_eq!(cycle_intermediate(Some(2), 3), 0);
    }

    #[test]
    fn gridworld_basics() {
        use QueueEvent::*;
        assert_eq!(memory_gridworld(&[Enqueue, NoMatch], 4), MemoryDecision::Dequeue { d: 0 });
        assert_eq!(memory_gridworld(&[NoMatch], 4), MemoryDecision::NullResponse);
    }

    #[test]
    fn intermediate_basics() {
        assert_eq!(memory_intermediate(0, 1, 16), MemoryDecision::Dequeue { d: 0 });
        assert_eq!(memory_intermediate(2, 2, 16), MemoryDecision::NullResponse);
        assert_eq!(memory_intermediate(16, 20, 16), MemoryDecision::NullResponse);
    }

    proptest! {
        #[test]
        fn gridworld_tracks_fifo_within_capacity(events in proptest::collection::vec(any::<bool>(), 1..200)) {
            let s = 4;
            let mut g = Gridworld::default();
            let mut q: VecDeque<usize> = VecDeque::new();
            let mut next = 0;
            let mut dequeued = 0;
            for is_enqueue in events {
                if is_enqueue {
                    if q.len() == s {
                        break;
                    }
                    q.push_back(next);
                    next += 1;
                    g.step(QueueEvent::Enqueue, s);
                } else {
                    let want = match q.pop_front() {
                        Some(_) => { dequeued += 1; MemoryDecision::Dequeue { d: dequeued - 1 } }
                        None => MemoryDecision::NullResponse,
                    };
                    prop_assert_eq!(g.step(QueueEvent::NoMatch, s), Some(want));
                }
            }
        }
    }
}
