use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Simulated time in whole milliseconds.
pub type SimTime = u64;

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Min-queue of events ordered by `(time, insertion sequence)`.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: 0,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<()> {
        if at < self.now {
            return Err(Error::PastEvent { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { at, seq, event }));
        Ok(())
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.at)
    }

    /// Pops the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let Reverse(e) = self.heap.pop()?;
        self.now = e.at;
        Some((e.at, e.event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(5, "a").unwrap();
        q.schedule(5, "b").unwrap();
        q.schedule(1, "c").unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, vec![(1, "c"), (5, "a"), (5, "b")]);
    }

    #[test]
    fn empty_run_leaves_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert!(q.pop().is_none());
        assert_eq!(q.now(), 0);
    }

    #[test]
    fn rejects_past_events() {
        let mut q = EventQueue::new();
        q.schedule(10, 0).unwrap();
        q.pop();
        assert_eq!(q.schedule(9, 1), Err(Error::PastEvent { at: 9, now: 10 }));
        assert!(q.schedule(10, 1).is_ok());
    }

    #[test]
    fn schedule_during_fire_matches_reference_sort() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut q = EventQueue::new();
        // reference: every scheduled (time, seq) pair, sorted
        let mut reference = Vec::new();
        let mut seq = 0u64;
        for _ in 0..50 {
            let t = rng.gen_range(0..100);
            q.schedule(t, seq).unwrap();
            reference.push((t, seq));
            seq += 1;
        }
        let mut fired = Vec::new();
        while let Some((t, s)) = q.pop() {
            fired.push((t, s));
            if rng.gen_bool(0.5) && seq < 400 {
                let nt = t + rng.gen_range(0..20);
                q.schedule(nt, seq).unwrap();
                reference.push((nt, seq));
                seq += 1;
            }
        }
        reference.sort();
        assert_eq!(fired, reference);
    }
}
