//! Event queue with attached observers.
//!
//! Events are queued by `post` and delivered in FIFO order by
//! `dispatch_pending`: every observer attached to an event's kind is invoked
//! exactly once per event. A failing observer is counted and skipped; the
//! remaining observers still run. The threaded dispatch task lives in the
//! companion crate; this type is the single-owner queue it wraps.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::Real;

/// Event taxonomy: predefined kinds plus exactly four custom slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    PhysicsUpdate,
    VisualUpdate,
    Mouse,
    Key,
    SimulationStart,
    SimulationStop,
    Custom1,
    Custom2,
    Custom3,
    Custom4,
}

/// A queued event: its kind, the simulation timestamp it was posted at, and
/// a caller-defined payload.
#[derive(Debug, Clone)]
pub struct Event<P> {
    pub kind: EventKind,
    /// Simulation time in seconds.
    pub timestamp: Real,
    pub payload: P,
}

/// Identifies an attached observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObserverId(usize);

/// What one `dispatch_pending` call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DispatchReport {
    /// Events taken off the queue.
    pub events: usize,
    /// Observer invocations that completed.
    pub delivered: usize,
    /// Observer invocations that returned an error (isolated; dispatch
    /// continued).
    pub failures: usize,
}

type Callback<P> = Box<dyn FnMut(&Event<P>) -> Result<(), ObserverError> + Send>;

/// Error an observer can surface; it is counted, never propagated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObserverError;

struct Observer<P> {
    kind: EventKind,
    callback: Callback<P>,
}

/// FIFO event queue with per-kind observers.
pub struct EventDispatcher<P> {
    queue: VecDeque<Event<P>>,
    observers: Vec<Observer<P>>,
}

impl<P> Default for EventDispatcher<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventDispatcher<P> {
    pub fn new() -> Self {
        Self {
            queue: VecDeque::new(),
            observers: Vec::new(),
        }
    }

    /// Appends an event to the queue. Nothing runs until dispatch.
    pub fn post(&mut self, event: Event<P>) {
        self.queue.push_back(event);
    }

    /// Attaches a callback to one event kind. Observers attached between
    /// dispatch rounds only see events dispatched afterwards.
    pub fn attach<F>(&mut self, kind: EventKind, callback: F) -> ObserverId
    where
        F: FnMut(&Event<P>) -> Result<(), ObserverError> + Send + 'static,
    {
        self.observers.push(Observer {
            kind,
            callback: Box::new(callback),
        });
        ObserverId(self.observers.len() - 1)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Drains the events queued at call time, notifying observers in
    /// attachment order per event.
    pub fn dispatch_pending(&mut self) -> DispatchReport {
        let mut report = DispatchReport::default();
        let batch = self.queue.len();
        for _ in 0..batch {
            let event = self.queue.pop_front().expect("queue length checked");
            report.events += 1;
            for obs in &mut self.observers {
                if obs.kind == event.kind {
                    match (obs.callback)(&event) {
                        Ok(()) => report.delivered += 1,
                        Err(ObserverError) => report.failures += 1,
                    }
                }
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::sync::Arc;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Mutex;

    fn ev(kind: EventKind, stamp: Real) -> Event<u32> {
        Event {
            kind,
            timestamp: stamp,
            payload: 0,
        }
    }

    #[test]
    fn each_observer_notified_exactly_once_per_event() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut d = EventDispatcher::<u32>::new();
        for id in 0..3 {
            let log = log.clone();
            d.attach(EventKind::PhysicsUpdate, move |_| {
                log.lock().unwrap().push(id);
                Ok(())
            });
        }
        d.post(ev(EventKind::PhysicsUpdate, 0.0));
        let report = d.dispatch_pending();
        assert_eq!(report.delivered, 3);
        assert_eq!(&*log.lock().unwrap(), &[0, 1, 2]);
    }

    #[test]
    fn fifo_order_across_kinds() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut d = EventDispatcher::<u32>::new();
        for kind in [EventKind::Custom1, EventKind::Custom2] {
            let log = log.clone();
            d.attach(kind, move |e| {
                log.lock().unwrap().push(e.kind);
                Ok(())
            });
        }
        d.post(ev(EventKind::Custom1, 0.0));
        d.post(ev(EventKind::Custom2, 0.0));
        d.dispatch_pending();
        assert_eq!(
            &*log.lock().unwrap(),
            &[EventKind::Custom1, EventKind::Custom2]
        );
    }

    #[test]
    fn observer_failure_is_isolated() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut d = EventDispatcher::<u32>::new();
        d.attach(EventKind::Key, |_| Err(ObserverError));
        {
            let log = log.clone();
            d.attach(EventKind::Key, move |_| {
                log.lock().unwrap().push(1);
                Ok(())
            });
        }
        d.post(ev(EventKind::Key, 0.0));
        let report = d.dispatch_pending();
        assert_eq!(report.failures, 1);
        assert_eq!(report.delivered, 1);
        assert_eq!(&*log.lock().unwrap(), &[1]);
    }

    /// Naive reference dispatcher used as the replay oracle.
    struct Reference {
        queue: Vec<(usize, EventKind)>, // (seq, kind)
        observers: Vec<EventKind>,
        log: Vec<(usize, usize)>, // (observer, event seq)
    }

    impl Reference {
        fn dispatch(&mut self) {
            let batch: Vec<_> = self.queue.drain(..).collect();
            for (seq, kind) in batch {
                for (obs, k) in self.observers.iter().enumerate() {
                    if *k == kind {
                        self.log.push((obs, seq));
                    }
                }
            }
        }
    }

    #[test]
    fn randomized_schedules_match_reference_dispatcher() {
        let kinds = [
            EventKind::PhysicsUpdate,
            EventKind::VisualUpdate,
            EventKind::Custom1,
            EventKind::Custom4,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let log = Arc::new(Mutex::new(Vec::new()));
            let mut d = EventDispatcher::<u32>::new();
            let mut reference = Reference {
                queue: vec![],
                observers: vec![],
                log: vec![],
            };
            let mut seq = 0usize;
            for _ in 0..rng.gen_range(5..40) {
                match rng.gen_range(0..3) {
                    0 => {
                        let kind = kinds[rng.gen_range(0..kinds.len())];
                        d.post(Event {
                            kind,
                            timestamp: 0.0,
                            payload: seq as u32,
                        });
                        reference.queue.push((seq, kind));
                        seq += 1;
                    }
                    1 => {
                        let kind = kinds[rng.gen_range(0..kinds.len())];
                        let obs_id = reference.observers.len();
                        reference.observers.push(kind);
                        let log = log.clone();
                        d.attach(kind, move |e| {
                            log.lock().unwrap().push((obs_id, e.payload as usize));
                            Ok(())
                        });
                    }
                    _ => {
                        d.dispatch_pending();
                        reference.dispatch();
                    }
                }
            }
            d.dispatch_pending();
            reference.dispatch();
            assert_eq!(&*log.lock().unwrap(), &reference.log);
        }
    }
}
