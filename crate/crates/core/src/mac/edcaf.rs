use std::collections::VecDeque;

use rand::Rng;

use crate::analytic::window_size;
use crate::error::{Error, Result};
use crate::params::SimConfig;
use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub ac: usize,
    pub arrival_us: Micros,
    /// Set when the packet reaches the head of its queue.
    pub hol_us: Option<Micros>,
    pub octets: u32,
    pub retries: u32,
}

impl Packet {
    pub fn new(ac: usize, arrival_us: Micros, octets: u32) -> Self {
        Packet { ac, arrival_us, hol_us: None, octets, retries: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdcafState {
    Idle,
    AifsWait,
    Backoff,
    Frozen,
    Txop,
    AwaitingResponse,
}

/// One EDCA function: a FIFO, a backoff counter and a retry stage.
///
/// While the medium is idle the function is *armed* with the instant at
/// which its counter reaches zero. A busy medium freezes it and keeps the
/// slots already counted.
#[derive(Debug, Clone)]
pub struct Edcaf {
    pub ac: usize,
    pub state: EdcafState,
    pub backoff_counter: u32,
    /// `B_k`: extra idle slots class `k` waits beyond the highest class.
    pub freeze_counter: u32,
    pub retry_stage: u32,
    pub queue: VecDeque<Packet>,
    count_from: Micros,
    access_at: Option<Micros>,
    armed_idle_since: Micros,
    generation: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    AifsWait { remaining_us: Micros },
    Backoff { remaining_slots: u32 },
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryOutcome {
    Requeued { stage: u32 },
    Dropped(Packet),
}

impl Edcaf {
    pub fn new(ac: usize, cfg: &SimConfig) -> Self {
        Edcaf {
            ac,
            state: EdcafState::Idle,
            backoff_counter: 0,
            freeze_counter: cfg.ac[ac].aifsn.saturating_sub(cfg.ac[crate::AC_COUNT - 1].aifsn),
            retry_stage: 0,
            queue: VecDeque::new(),
            count_from: 0,
            access_at: None,
            armed_idle_since: 0,
            generation: 0,
        }
    }

    pub fn access_at(&self) -> Option<Micros> {
        self.access_at
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Idle-period start the current arming was computed from.
    pub fn armed_idle_since(&self) -> Micros {
        self.armed_idle_since
    }

    pub fn in_exchange(&self) -> bool {
        matches!(self.state, EdcafState::Txop | EdcafState::AwaitingResponse)
    }

    /// Draw a counter uniformly from the window of the current stage.
    pub fn draw_backoff<R: Rng + ?Sized>(&mut self, cfg: &SimConfig, rng: &mut R) {
        let stage = self.retry_stage.min(cfg.frames.retry_limit);
        let w = window_size(self.ac, stage, cfg).expect("stage within retry limit");
        self.backoff_counter = rng.random_range(0..w) as u32;
    }

    /// Stamp the head-of-line time of a new head packet. Returns its
    /// queueing delay if it was not stamped before.
    pub fn promote_head(&mut self, now: Micros) -> Option<Micros> {
        let head = self.queue.front_mut()?;
        if head.hol_us.is_some() {
            return None;
        }
        head.hol_us = Some(now);
        Some(now - head.arrival_us)
    }

    /// The medium has been idle since `idle_since`; arm at `now`.
    /// Returns the access instant, or `None` if there is nothing to send or
    /// the function is already armed or busy in an exchange.
    pub fn arm(&mut self, idle_since: Micros, now: Micros, cfg: &SimConfig) -> Option<Micros> {
        if self.queue.is_empty() || self.in_exchange() || self.access_at.is_some() {
            return None;
        }
        let slot = cfg.phy.slot_us;
        let aifs_end = idle_since + cfg.aifs_us(self.ac);
        self.count_from = if now <= aifs_end {
            aifs_end
        } else {
            aifs_end + (now - aifs_end).div_ceil(slot) * slot
        };
        let at = self.count_from + u64::from(self.backoff_counter) * slot;
        self.access_at = Some(at);
        self.armed_idle_since = idle_since;
        self.state = if now < aifs_end { EdcafState::AifsWait } else { EdcafState::Backoff };
        self.generation += 1;
        Some(at)
    }

    /// The medium turned busy at `now`. Returns true when the counter
    /// expires exactly now, in which case the transmission still goes out.
    pub fn freeze(&mut self, now: Micros, slot: Micros) -> bool {
        let Some(at) = self.access_at else {
            return false;
        };
        if at <= now {
            return true;
        }
        if now > self.count_from {
            let elapsed = ((now - self.count_from) / slot) as u32;
            self.backoff_counter -= elapsed.min(self.backoff_counter);
        }
        self.disarm();
        false
    }

    pub fn disarm(&mut self) {
        self.access_at = None;
        self.generation += 1;
        if !self.in_exchange() {
            self.state = if self.queue.is_empty() { EdcafState::Idle } else { EdcafState::Frozen };
        }
    }

    /// Head packet delivered: dequeue it and return to stage 0.
    pub fn complete_head(&mut self) -> Option<Packet> {
        let p = self.queue.pop_front();
        self.retry_stage = 0;
        p
    }

    /// Leave an exchange and go back to contention.
    pub fn release<R: Rng + ?Sized>(&mut self, redraw: bool, cfg: &SimConfig, rng: &mut R) {
        self.state = EdcafState::Frozen;
        self.access_at = None;
        self.generation += 1;
        if redraw && !self.queue.is_empty() {
            self.draw_backoff(cfg, rng);
        }
        if self.queue.is_empty() {
            self.state = EdcafState::Idle;
        }
    }
}

/// Apply one idle period of `idle_us` that ends with the medium turning busy.
pub fn edcaf_step(edcaf: &mut Edcaf, idle_us: Micros, cfg: &SimConfig) -> Result<StepAction> {
    if edcaf.queue.is_empty() {
        return Err(Error::Model("edcaf step without a head-of-line packet".into()));
    }
    let aifs = cfg.aifs_us(edcaf.ac);
    if idle_us < aifs {
        edcaf.state = EdcafState::AifsWait;
        return Ok(StepAction::AifsWait { remaining_us: aifs - idle_us });
    }
    let slots = ((idle_us - aifs) / cfg.phy.slot_us) as u32;
    if slots >= edcaf.backoff_counter {
        edcaf.backoff_counter = 0;
        edcaf.state = EdcafState::AwaitingResponse;
        Ok(StepAction::Transmit)
    } else {
        edcaf.backoff_counter -= slots;
        edcaf.state = EdcafState::Frozen;
        Ok(StepAction::Backoff { remaining_slots: edcaf.backoff_counter })
    }
}

/// Failed exchange for the head packet: escalate the stage and redraw, or
/// drop once the retry limit is used up.
pub fn handle_retry<R: Rng + ?Sized>(edcaf: &mut Edcaf, cfg: &SimConfig, rng: &mut R) -> RetryOutcome {
    let limit = cfg.frames.retry_limit;
    let Some(head) = edcaf.queue.front_mut() else {
        return RetryOutcome::Requeued { stage: edcaf.retry_stage };
    };
    if head.retries >= limit {
        let p = edcaf.queue.pop_front().expect("head exists");
        edcaf.retry_stage = 0;
        if !edcaf.queue.is_empty() {
            edcaf.draw_backoff(cfg, rng);
        }
        return RetryOutcome::Dropped(p);
    }
    head.retries += 1;
    edcaf.retry_stage = (edcaf.retry_stage + 1).min(limit);
    edcaf.draw_backoff(cfg, rng);
    RetryOutcome::Requeued { stage: edcaf.retry_stage }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_config;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loaded(ac: usize, cfg: &SimConfig) -> Edcaf {
        let mut e = Edcaf::new(ac, cfg);
        e.queue.push_back(Packet::new(ac, 0, cfg.frames.mpdu_octets));
        e
    }

    #[test]
    fn freeze_counter_initial_values() {
        let cfg = default_config();
        let b: Vec<u32> = (0..4).map(|k| Edcaf::new(k, &cfg).freeze_counter).collect();
        assert_eq!(b, [5, 3, 1, 0]);
    }

    #[test]
    fn fresh_packet_transmits_after_aifs_plus_counter() {
        let cfg = default_config();
        let mut e = loaded(1, &cfg);
        e.backoff_counter = 4;
        let at = e.arm(100, 100, &cfg).unwrap();
        assert_eq!(at, 100 + cfg.aifs_us(1) + 4 * 9);
    }

    #[test]
    fn busy_during_aifs_keeps_counter() {
        let cfg = default_config();
        let mut e = loaded(0, &cfg);
        e.backoff_counter = 3;
        assert_eq!(
            edcaf_step(&mut e, 40, &cfg).unwrap(),
            StepAction::AifsWait { remaining_us: cfg.aifs_us(0) - 40 }
        );
        assert_eq!(e.backoff_counter, 3);
        // The next idle period starts AIFS from scratch.
        assert!(matches!(edcaf_step(&mut e, 40, &cfg).unwrap(), StepAction::AifsWait { .. }));
    }

    #[test]
    fn counter_zero_transmits_at_aifs_end() {
        let cfg = default_config();
        let mut e = loaded(3, &cfg);
        e.backoff_counter = 0;
        assert_eq!(edcaf_step(&mut e, cfg.aifs_us(3), &cfg).unwrap(), StepAction::Transmit);
    }

    #[test]
    fn idle_slots_decrement_then_freeze() {
        let cfg = default_config();
        let mut e = loaded(2, &cfg);
        e.backoff_counter = 10;
        let idle = cfg.aifs_us(2) + 4 * 9 + 5;
        assert_eq!(
            edcaf_step(&mut e, idle, &cfg).unwrap(),
            StepAction::Backoff { remaining_slots: 6 }
        );
    }

    #[test]
    fn arm_and_freeze_agree_with_step() {
        let cfg = default_config();
        let mut a = loaded(2, &cfg);
        a.backoff_counter = 10;
        let mut b = a.clone();
        a.arm(1000, 1000, &cfg);
        let idle = cfg.aifs_us(2) + 4 * 9 + 5;
        assert!(!a.freeze(1000 + idle, 9));
        edcaf_step(&mut b, idle, &cfg).unwrap();
        assert_eq!(a.backoff_counter, b.backoff_counter);
    }

    #[test]
    fn expiry_at_busy_instant_commits() {
        let cfg = default_config();
        let mut e = loaded(3, &cfg);
        e.backoff_counter = 2;
        let at = e.arm(0, 0, &cfg).unwrap();
        assert!(e.freeze(at, 9));
        assert_eq!(e.access_at(), Some(at));
    }

    #[test]
    fn step_without_packet_is_error() {
        let cfg = default_config();
        let mut e = Edcaf::new(0, &cfg);
        assert!(edcaf_step(&mut e, 1000, &cfg).is_err());
    }

    #[test]
    fn first_failure_doubles_window() {
        let cfg = default_config();
        let mut e = loaded(0, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(handle_retry(&mut e, &cfg, &mut rng), RetryOutcome::Requeued { stage: 1 });
        assert_eq!(window_size(0, e.retry_stage, &cfg).unwrap(), 64);
        assert!(e.backoff_counter < 64);
    }

    #[test]
    fn eighth_failure_drops() {
        let cfg = default_config();
        let mut e = loaded(0, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 1..=7 {
            assert_eq!(handle_retry(&mut e, &cfg, &mut rng), RetryOutcome::Requeued { stage: i });
        }
        assert!(matches!(handle_retry(&mut e, &cfg, &mut rng), RetryOutcome::Dropped(p) if p.retries == 7));
        assert!(e.queue.is_empty());
        assert_eq!(e.retry_stage, 0);
    }

    #[test]
    fn success_resets_stage() {
        let cfg = default_config();
        let mut e = loaded(0, &cfg);
        e.queue.push_back(Packet::new(0, 5, cfg.frames.mpdu_octets));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        handle_retry(&mut e, &cfg, &mut rng);
        handle_retry(&mut e, &cfg, &mut rng);
        e.complete_head();
        assert_eq!(e.retry_stage, 0);
        e.release(true, &cfg, &mut rng);
        assert!(e.backoff_counter < cfg.w0(0));
        assert_eq!(e.promote_head(50), Some(45));
    }
}
