use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Millis, NetError};

struct Scheduled<E> {
    at: Millis,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Virtual clock with a time-ordered event queue. Events sharing a
/// timestamp come out in the order they were scheduled.
pub struct SimClock<E> {
    now: Millis,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<E>>,
}

impl<E> Default for SimClock<E> {
    fn default() -> Self {
        SimClock {
            now: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }
}

impl<E> SimClock<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn schedule(&mut self, at: Millis, event: E) -> Result<(), NetError> {
        if at < self.now {
            return Err(NetError::TimeRegression {
                now: self.now,
                requested: at,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { at, seq, event });
        Ok(())
    }

    pub fn peek_time(&self) -> Option<Millis> {
        self.queue.peek().map(|s| s.at)
    }

    /// Pops the earliest event if it is due at or before `t_end`, moving the
    /// clock to its timestamp.
    pub fn pop_due(&mut self, t_end: Millis) -> Option<(Millis, E)> {
        if self.peek_time()? > t_end {
            return None;
        }
        let s = self.queue.pop()?;
        self.now = s.at;
        Some((s.at, s.event))
    }

    pub fn advance_to(&mut self, t: Millis) -> Result<(), NetError> {
        if t < self.now {
            return Err(NetError::TimeRegression {
                now: self.now,
                requested: t,
            });
        }
        self.now = t;
        Ok(())
    }
}
