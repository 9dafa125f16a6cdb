//! Deterministic event queue ordered by `(fire_time, seq)`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("event scheduled in the past: fire_time {fire_time} < now {now}")]
    PastEvent { fire_time: SimTime, now: SimTime },
}

/// Coarse event category recorded in the fired trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventClass {
    PacketArrival,
    Timer,
    LinkChange,
    ControlMessageDelivery,
    MeasurementMark,
}

pub trait Classify {
    fn class(&self) -> EventClass;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Clone)]
pub struct Event<E> {
    pub fire_time: SimTime,
    pub seq: u64,
    pub payload: E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FiredEvent {
    pub time: SimTime,
    pub seq: u64,
    pub class: EventClass,
}

struct Entry<E>(Event<E>);

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.fire_time, self.0.seq).cmp(&(other.0.fire_time, other.0.seq))
    }
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Entry<E>>>,
    cancelled: HashSet<u64>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule_at(
        &mut self,
        fire_time: SimTime,
        payload: E,
    ) -> Result<EventHandle, KernelError> {
        if fire_time < self.now {
            return Err(KernelError::PastEvent {
                fire_time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Entry(Event {
            fire_time,
            seq,
            payload,
        })));
        Ok(EventHandle(seq))
    }

    /// Schedules relative to the current clock; can never be in the past.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule_at(at, payload)
            .expect("relative schedule is never in the past")
    }

    /// Returns false if the event already fired or was cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let live = self.queue.iter().any(|Reverse(e)| e.0.seq == handle.0);
        live && self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_time <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<E>> {
        loop {
            let head = self.queue.peek()?;
            if head.0 .0.fire_time > t_end {
                return None;
            }
            let Reverse(Entry(ev)) = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&ev.seq) {
                continue;
            }
            self.now = ev.fire_time;
            return Some(ev);
        }
    }

    /// Moves the clock forward to `t` once no earlier events remain.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Live (not cancelled) pending payloads, in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &E> {
        self.queue
            .iter()
            .filter(|Reverse(e)| !self.cancelled.contains(&e.0.seq))
            .map(|Reverse(e)| &e.0.payload)
    }

    pub fn pending_len(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }
}

impl<E: Classify> Scheduler<E> {
    /// Fires every event with `fire_time <= t_end` in `(fire_time, seq)`
    /// order, handing each to `handler`, then sets the clock to `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Vec<FiredEvent>
    where
        F: FnMut(&mut Self, Event<E>),
    {
        let mut trace = Vec::new();
        while let Some(ev) = self.pop_until(t_end) {
            trace.push(FiredEvent {
                time: ev.fire_time,
                seq: ev.seq,
                class: ev.payload.class(),
            });
            handler(self, ev);
        }
        self.advance_to(t_end);
        trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Tick(u32);
    impl Classify for Tick {
        fn class(&self) -> EventClass {
            EventClass::Timer
        }
    }

    #[test]
    fn timer_fires_at_its_time() {
        let mut s = Scheduler::new();
        s.schedule_at(SimTime(100), Tick(1)).unwrap();
        let mut fired_at = None;
        s.run_until(SimTime(1_000), |s, _| fired_at = Some(s.now()));
        assert_eq!(fired_at, Some(SimTime(100)));
        assert_eq!(s.now(), SimTime(1_000));
    }

    #[test]
    fn equal_times_fire_in_seq_order() {
        let mut s = Scheduler::new();
        for i in 0..5 {
            s.schedule_at(SimTime(7), Tick(i)).unwrap();
        }
        s.schedule_at(SimTime(100), Tick(5)).unwrap();
        s.schedule_at(SimTime(100), Tick(6)).unwrap();
        let trace = s.run_until(SimTime(200), |_, _| {});
        let at100: Vec<u64> = trace
            .iter()
            .filter(|f| f.time == SimTime(100))
            .map(|f| f.seq)
            .collect();
        assert_eq!(at100, vec![5, 6]);
    }

    #[test]
    fn past_schedule_is_rejected() {
        let mut s: Scheduler<Tick> = Scheduler::new();
        s.advance_to(SimTime(60));
        let err = s.schedule_at(SimTime(50), Tick(0)).unwrap_err();
        assert_eq!(
            err,
            KernelError::PastEvent {
                fire_time: SimTime(50),
                now: SimTime(60)
            }
        );
    }

    #[test]
    fn empty_queue_advances_clock() {
        let mut s: Scheduler<Tick> = Scheduler::new();
        let trace = s.run_until(SimTime::from_secs(1), |_, _| {});
        assert!(trace.is_empty());
        assert_eq!(s.now(), SimTime::from_secs(1));
    }

    #[test]
    fn run_until_stops_at_horizon() {
        let mut s = Scheduler::new();
        s.schedule_at(SimTime(10), Tick(1)).unwrap();
        s.schedule_at(SimTime(20), Tick(2)).unwrap();
        let trace = s.run_until(SimTime(15), |_, _| {});
        assert_eq!(trace.len(), 1);
        assert_eq!(s.pending_len(), 1);
    }

    #[test]
    fn cancelled_events_never_fire() {
        let mut s = Scheduler::new();
        let h = s.schedule_at(SimTime(10), Tick(1)).unwrap();
        s.schedule_at(SimTime(20), Tick(2)).unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        let mut seen = vec![];
        s.run_until(SimTime(100), |_, e| seen.push(e.payload));
        assert_eq!(seen, vec![Tick(2)]);
    }

    #[test]
    fn handler_can_schedule_followups() {
        let mut s = Scheduler::new();
        s.schedule_at(SimTime(1), Tick(0)).unwrap();
        let trace = s.run_until(SimTime(10), |s, e| {
            if e.payload.0 < 3 {
                s.schedule_in(SimTime(2), Tick(e.payload.0 + 1));
            }
        });
        let times: Vec<u64> = trace.iter().map(|f| f.time.0).collect();
        assert_eq!(times, vec![1, 3, 5, 7]);
    }

    proptest! {
        #[test]
        fn fired_trace_is_totally_ordered(times in proptest::collection::vec(0u64..500, 1..60)) {
            let mut s = Scheduler::new();
            for (i, t) in times.iter().enumerate() {
                s.schedule_at(SimTime(*t), Tick(i as u32)).unwrap();
            }
            let trace = s.run_until(SimTime(1_000), |_, _| {});
            prop_assert_eq!(trace.len(), times.len());
            for w in trace.windows(2) {
                prop_assert!((w[0].time, w[0].seq) < (w[1].time, w[1].seq));
            }
        }
    }
}
