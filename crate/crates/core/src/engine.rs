//! Discrete-event core: a virtual clock, an event queue ordered by
//! `(time, sequence)`, and the receiver-centric reception model.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{FrameKind, FrameSizes};
use crate::Micros;

struct Entry<E> {
    time: Micros,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
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
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Future event set. Events at equal times leave in scheduling order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    now: Micros,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: 0,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Returns the sequence number assigned to the event.
    pub fn schedule(&mut self, time: Micros, payload: E) -> Result<u64> {
        if time < self.now {
            return Err(Error::ScheduleInPast { at: time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { time, seq, payload }));
        Ok(seq)
    }

    /// Schedule `delay` after the current time; cannot fail.
    pub fn schedule_in(&mut self, delay: Micros, payload: E) -> u64 {
        self.schedule(self.now + delay, payload)
            .expect("future time is never in the past")
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    /// Remove the earliest event and advance the clock to it.
    pub fn pop(&mut self) -> Option<(Micros, u64, E)> {
        let Reverse(e) = self.heap.pop()?;
        debug_assert!(e.time >= self.now);
        self.now = e.time;
        Some((e.time, e.seq, e.payload))
    }

    /// Dispatch events up to and including `t_end`, then set the clock to
    /// `t_end`. Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, t_end: Micros, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, Micros, E),
    {
        let mut count = 0;
        while self.peek_time().is_some_and(|t| t <= t_end) {
            let (time, _, payload) = self.pop().expect("peeked");
            handler(self, time, payload);
            count += 1;
        }
        self.now = self.now.max(t_end);
        count
    }
}

/// A frame on the air.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub id: u64,
    pub source: usize,
    pub kind: FrameKind,
    pub start: Micros,
    pub end: Micros,
    pub receivers: Vec<usize>,
    /// Uplink data PPDUs sharing a grant id were scheduled together by one
    /// G-CTS or trigger and are separated spatially at the AP.
    pub grant: Option<u64>,
    /// Sent by an HE STA; such uplink data is immune to collisions.
    pub he: bool,
}

impl Transmission {
    pub fn overlaps(&self, other: &Transmission) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    Received,
    Collided,
    Corrupted,
}

/// Whether `tx` is destroyed at `receiver` by another transmission.
///
/// A concurrent frame matters only if its source is audible at the
/// receiver, or is the receiver itself. Data frames of the same grant do
/// not collide with each other.
pub fn collides<'a, I, H>(receiver: usize, tx: &Transmission, concurrent: I, hears: H) -> bool
where
    I: IntoIterator<Item = &'a Transmission>,
    H: Fn(usize, usize) -> bool,
{
    if tx.he && tx.kind == FrameKind::Data {
        return false;
    }
    concurrent.into_iter().any(|c| {
        c.id != tx.id
            && c.overlaps(tx)
            && (c.source == receiver || hears(c.source, receiver))
            && !(tx.grant.is_some()
                && c.grant == tx.grant
                && c.kind == FrameKind::Data
                && tx.kind == FrameKind::Data)
    })
}

/// Outcome of `tx` at `receiver`: collision first, then a Bernoulli bit
/// error draw over the frame's bits.
pub fn reception_outcome<'a, I, H, R>(
    receiver: usize,
    tx: &Transmission,
    concurrent: I,
    hears: H,
    ber: f64,
    sizes: &FrameSizes,
    rng: &mut R,
) -> Reception
where
    I: IntoIterator<Item = &'a Transmission>,
    H: Fn(usize, usize) -> bool,
    R: Rng + ?Sized,
{
    debug_assert!(
        hears(tx.source, receiver),
        "node {receiver} cannot hear node {}",
        tx.source
    );
    if collides(receiver, tx, concurrent, &hears) {
        return Reception::Collided;
    }
    let survival = frame_survival(ber, tx.kind.bits(sizes));
    if survival < 1.0 && rng.random::<f64>() >= survival {
        Reception::Corrupted
    } else {
        Reception::Received
    }
}

/// Probability that `bits` bits all survive at the given bit error rate.
pub fn frame_survival(ber: f64, bits: u64) -> f64 {
    (1.0 - ber).powf(bits as f64)
}
