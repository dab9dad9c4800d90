use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::protocol::Envelope;

/// A pending delivery. Pops in `(time, sequence)` order.
#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time: f64,
    pub sequence: u64,
    pub envelope: Envelope,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // reversed so the max-heap yields the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.sequence.cmp(&self.sequence))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedules a delivery at `envelope.deliver_time` and returns its
    /// sequence number.
    pub fn push(&mut self, envelope: Envelope) -> u64 {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(SimEvent { time: envelope.deliver_time, sequence, envelope });
        sequence
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Message;
    use proptest::prelude::*;

    fn env(t: f64, epoch: usize) -> Envelope {
        Envelope::new("a".into(), "b".into(), None, 0.0, t, Message::EpochBarrier { epoch })
    }

    #[test]
    fn ties_break_by_insertion() {
        let mut q = EventQueue::new();
        q.push(env(1.0, 0));
        q.push(env(0.5, 1));
        q.push(env(1.0, 2));
        q.push(env(0.5, 3));
        let order: Vec<usize> = std::iter::from_fn(|| q.pop())
            .map(|e| match e.envelope.payload {
                Message::EpochBarrier { epoch } => epoch,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(order, vec![1, 3, 0, 2]);
    }

    proptest! {
        #[test]
        fn pops_in_lexicographic_order(times in prop::collection::vec(0u8..5, 0..40)) {
            let mut q = EventQueue::new();
            for (i, t) in times.iter().enumerate() {
                q.push(env(f64::from(*t) * 0.25, i));
            }
            let mut last: Option<(f64, u64)> = None;
            let mut count = 0;
            while let Some(e) = q.pop() {
                if let Some((t, s)) = last {
                    prop_assert!(t < e.time || (t == e.time && s < e.sequence));
                }
                last = Some((e.time, e.sequence));
                count += 1;
            }
            prop_assert_eq!(count, times.len());
        }
    }
}
