use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::edcaf::{handle_retry, Edcaf, EdcafState, Packet, RetryOutcome};
use super::nav::{nav_update, NavState};
use super::traffic::generate_arrivals;
use crate::engine::{reception_outcome, EventQueue, Reception, Transmission};
use crate::error::{Error, Result};
use crate::geometry::{mean_hidden_per_sta, Topology};
use crate::metrics::{MetricEvent, RunCounters};
use crate::params::{FrameKind, SimConfig};
use crate::{Micros, AC_COUNT};

const AP: usize = 0;
const AP_AC: usize = AC_COUNT - 1;
/// Frames that ended longer ago than this cannot overlap anything still
/// being evaluated.
const AIR_HISTORY_US: Micros = 2_000;

/// Derive an independent seed for a sub-stream.
pub fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub counters: RunCounters,
    /// Tab-separated `time_us kind node detail` lines, when requested.
    pub trace: Option<String>,
    pub events: u64,
}

/// Simulate one run on a fixed topology.
pub fn run_simulation(cfg: &SimConfig, topo: &Topology, seed: u64, trace: bool) -> Result<SimOutcome> {
    if topo.sta_count() == 0 {
        return Err(Error::EmptyBss);
    }
    let mut sim = Simulation::new(cfg, topo, seed, trace);
    let events = sim.run()?;
    let mut counters = sim.metrics;
    for node in sim.nodes.iter().skip(1) {
        for (k, e) in node.edcafs.iter().enumerate() {
            counters.ac[k].queued += e.queue.len() as u64;
        }
    }
    counters.duration_us = cfg.run_duration_us;
    counters.hidden_per_sta = mean_hidden_per_sta(topo)?;
    Ok(SimOutcome { counters, trace: sim.trace, events })
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival,
    Access { node: usize, ac: usize, generation: u64 },
    TxEnd { tx: u64 },
    Step { ex: u64, step: Step },
    NavExpiry { node: usize },
    NavResetCheck { node: usize, tx: u64, rts_end: Micros },
    TriggerUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    RtsDone,
    Respond,
    CtsDone,
    TriggerDone,
    DataStart,
    DataDone,
    AckStart,
    AckDone,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExKind {
    Sta,
    Trigger,
}

#[derive(Debug, Clone)]
struct Participant {
    node: usize,
    ac: usize,
    active: bool,
    data_tx: Option<u64>,
    data_start: Micros,
    data_ok: bool,
    delivered_any: bool,
    delivered_last: bool,
}

#[derive(Debug, Clone)]
struct Exchange {
    kind: ExKind,
    initiator: usize,
    ac: usize,
    start: Micros,
    planned_rounds: u32,
    planned_end: Micros,
    rounds: u32,
    ctrl_tx: Option<u64>,
    ack_tx: Option<u64>,
    /// Entry 0 is the primary for STA-initiated exchanges.
    parts: Vec<Participant>,
    primary_ok: bool,
    ap_engaged: bool,
    any_success: bool,
}

struct Node {
    edcafs: [Edcaf; AC_COUNT],
    busy: u32,
    transmitting: bool,
    engaged: bool,
    nav: NavState,
    idle_since: Option<Micros>,
    last_rx_start: Micros,
    he: bool,
    rng: ChaCha8Rng,
}

struct AirFrame {
    tx: Transmission,
    nav_end: Micros,
}

struct Durations {
    rts: Micros,
    cts: Micros,
    data: Micros,
    ack: Micros,
    trigger: Micros,
    sifs: Micros,
    slot: Micros,
}

struct Simulation<'a> {
    cfg: &'a SimConfig,
    topo: &'a Topology,
    q: EventQueue<Ev>,
    nodes: Vec<Node>,
    air: Vec<AirFrame>,
    exchanges: BTreeMap<u64, Exchange>,
    next_tx: u64,
    next_ex: u64,
    arrivals: Vec<(Micros, usize, usize)>,
    next_arrival: usize,
    queued_total: u64,
    f_mu: f64,
    d: Durations,
    metrics: RunCounters,
    trace: Option<String>,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a SimConfig, topo: &'a Topology, seed: u64, trace: bool) -> Self {
        let n = topo.node_count();
        let he_stas = (cfg.mac.he_fraction.clamp(0.0, 1.0) * (n - 1) as f64).round() as usize;
        let nodes = (0..n)
            .map(|i| Node {
                edcafs: std::array::from_fn(|k| Edcaf::new(k, cfg)),
                busy: 0,
                transmitting: false,
                engaged: false,
                nav: NavState::default(),
                idle_since: Some(0),
                last_rx_start: 0,
                he: i == AP || i <= he_stas,
                rng: ChaCha8Rng::seed_from_u64(sub_seed(seed, i as u64, 1)),
            })
            .collect();
        let mut arrivals = Vec::new();
        for node in topo.bss_members.iter().copied() {
            for k in 0..AC_COUNT {
                if !topo.class_active[k] {
                    continue;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, node as u64, 16 + k as u64));
                for t in generate_arrivals(cfg.per_sta_rate(k), cfg.run_duration_us, &mut rng) {
                    arrivals.push((t, node, k));
                }
            }
        }
        arrivals.sort_unstable();
        let d = Durations {
            rts: cfg.duration(FrameKind::Rts),
            cts: cfg.duration(FrameKind::Cts),
            data: cfg.duration(FrameKind::Data),
            ack: cfg.duration(FrameKind::BlockAck),
            trigger: cfg.duration(FrameKind::Trigger),
            sifs: cfg.phy.sifs_us,
            slot: cfg.phy.slot_us,
        };
        let offered: [f64; AC_COUNT] = std::array::from_fn(|k| cfg.per_sta_rate(k));
        Simulation {
            cfg,
            topo,
            q: EventQueue::new(),
            nodes,
            air: Vec::new(),
            exchanges: BTreeMap::new(),
            next_tx: 0,
            next_ex: 0,
            arrivals,
            next_arrival: 0,
            queued_total: 0,
            f_mu: share_complement(&offered),
            d,
            metrics: RunCounters::default(),
            trace: trace.then(String::new),
        }
    }

    fn run(&mut self) -> Result<u64> {
        if let Some(&(t, _, _)) = self.arrivals.first() {
            self.q.schedule(t, Ev::Arrival)?;
        }
        if self.cfg.mac.ap_triggers && self.cfg.mac.trigger_update_us > 0 {
            self.q.schedule(self.cfg.mac.trigger_update_us, Ev::TriggerUpdate)?;
        }
        let end = self.cfg.run_duration_us;
        let mut count = 0;
        while self.q.peek_time().is_some_and(|t| t < end) {
            let (now, _, ev) = self.q.pop().expect("peeked");
            self.dispatch(now, ev);
            count += 1;
        }
        Ok(count)
    }

    fn log(&mut self, now: Micros, kind: &str, node: usize, detail: std::fmt::Arguments) {
        if let Some(t) = self.trace.as_mut() {
            let _ = writeln!(t, "{now}\t{kind}\t{node}\t{detail}");
        }
    }

    fn at(&mut self, time: Micros, ev: Ev) {
        self.q.schedule(time, ev).expect("events are never scheduled in the past");
    }

    fn dispatch(&mut self, now: Micros, ev: Ev) {
        match ev {
            Ev::Arrival => self.on_arrival(now),
            Ev::Access { node, ac, generation } => self.on_access(now, node, ac, generation),
            Ev::TxEnd { tx } => self.on_tx_end(now, tx),
            Ev::Step { ex, step } => self.on_step(now, ex, step),
            Ev::NavExpiry { node } => {
                self.log(now, "nav-expiry", node, format_args!(""));
                self.refresh(now, node);
            }
            Ev::NavResetCheck { node, tx, rts_end } => {
                let n = &mut self.nodes[node];
                if n.nav.set_by == Some(tx) && n.last_rx_start <= rts_end && n.nav.active(now) {
                    n.nav.reset(now);
                    self.log(now, "nav-reset", node, format_args!("tx={tx}"));
                    self.refresh(now, node);
                }
            }
            Ev::TriggerUpdate => {
                let th: [f64; AC_COUNT] =
                    std::array::from_fn(|k| self.metrics.ac[k].delivered_bits as f64);
                if th.iter().sum::<f64>() > 0.0 {
                    self.f_mu = share_complement(&th);
                }
                let f_mu = self.f_mu;
                self.log(now, "trigger-update", AP, format_args!("f_mu={f_mu:.4}"));
                self.at(now + self.cfg.mac.trigger_update_us, Ev::TriggerUpdate);
            }
        }
    }

    // ---- medium state ----

    fn medium_idle(&self, now: Micros, node: usize) -> bool {
        let n = &self.nodes[node];
        n.busy == 0 && !n.transmitting && !n.engaged && !n.nav.active(now)
    }

    /// Re-derive idle/busy for a node and arm or freeze its EDCAFs.
    fn refresh(&mut self, now: Micros, node: usize) {
        let idle = self.medium_idle(now, node);
        let slot = self.d.slot;
        let cfg = self.cfg;
        let n = &mut self.nodes[node];
        if idle {
            let since = *n.idle_since.get_or_insert(now);
            let mut arm = Vec::new();
            for e in n.edcafs.iter_mut() {
                if let Some(at) = e.arm(since, now, cfg) {
                    arm.push((e.ac, at, e.generation()));
                }
            }
            for (ac, at, generation) in arm {
                self.at(at, Ev::Access { node, ac, generation });
            }
        } else if n.idle_since.take().is_some() {
            for e in n.edcafs.iter_mut() {
                e.freeze(now, slot);
            }
        }
    }

    // ---- traffic ----

    fn on_arrival(&mut self, now: Micros) {
        while let Some(&(t, node, ac)) = self.arrivals.get(self.next_arrival) {
            if t != now {
                self.at(t, Ev::Arrival);
                break;
            }
            self.next_arrival += 1;
            self.metrics.record(MetricEvent::Arrival { ac });
            self.log(now, "arrival", node, format_args!("ac={ac}"));
            let octets = self.cfg.frames.mpdu_octets;
            let cfg = self.cfg;
            let n = &mut self.nodes[node];
            let e = &mut n.edcafs[ac];
            let was_empty = e.queue.is_empty();
            e.queue.push_back(Packet::new(ac, now, octets));
            if was_empty {
                let waited = e.promote_head(now).unwrap_or(0);
                e.draw_backoff(cfg, &mut n.rng);
                if !e.in_exchange() {
                    e.state = EdcafState::Frozen;
                }
                self.metrics.record(MetricEvent::HeadOfLine { ac, waited_us: waited });
            }
            self.queued_total += 1;
            self.refresh(now, node);
        }
        self.sync_ap_contender(now);
    }

    /// The AP contends for trigger opportunities while any STA has data.
    fn sync_ap_contender(&mut self, now: Micros) {
        if !self.cfg.mac.ap_triggers {
            return;
        }
        let cfg = self.cfg;
        let ap = &mut self.nodes[AP];
        let e = &mut ap.edcafs[AP_AC];
        if e.in_exchange() {
            return;
        }
        if self.queued_total > 0 && e.queue.is_empty() {
            e.queue.push_back(Packet::new(AP_AC, now, 0));
            e.queue[0].hol_us = Some(now);
            e.retry_stage = 0;
            e.draw_backoff(cfg, &mut ap.rng);
            e.state = EdcafState::Frozen;
            self.refresh(now, AP);
        } else if self.queued_total == 0 && !e.queue.is_empty() {
            e.queue.clear();
            e.disarm();
        }
    }

    fn record_delivery(&mut self, node: usize, ac: usize, tx_start: Micros, now: Micros) {
        let bits = self.cfg.mpdu_bits();
        let e = &mut self.nodes[node].edcafs[ac];
        let Some(p) = e.complete_head() else {
            return;
        };
        self.queued_total -= 1;
        let backoff = tx_start.saturating_sub(p.hol_us.unwrap_or(tx_start));
        self.metrics.record(MetricEvent::Delivered { ac, bits, backoff_us: backoff });
        if let Some(w) = e.promote_head(now) {
            self.metrics.record(MetricEvent::HeadOfLine { ac, waited_us: w });
        }
        self.log(now, "delivered", node, format_args!("ac={ac} backoff={backoff}"));
    }

    /// Failure of the head packet of `(node, ac)`; returns true if dropped.
    fn retry(&mut self, now: Micros, node: usize, ac: usize) {
        let cfg = self.cfg;
        let n = &mut self.nodes[node];
        match handle_retry(&mut n.edcafs[ac], cfg, &mut n.rng) {
            RetryOutcome::Dropped(_) if node == AP => {}
            RetryOutcome::Dropped(_) => {
                self.queued_total -= 1;
                self.metrics.record(MetricEvent::Dropped { ac });
                if let Some(w) = self.nodes[node].edcafs[ac].promote_head(now) {
                    self.metrics.record(MetricEvent::HeadOfLine { ac, waited_us: w });
                }
                self.log(now, "drop", node, format_args!("ac={ac}"));
            }
            RetryOutcome::Requeued { stage } => {
                self.log(now, "retry", node, format_args!("ac={ac} stage={stage}"));
            }
        }
    }

    // ---- air ----

    fn start_tx(
        &mut self,
        now: Micros,
        source: usize,
        kind: FrameKind,
        receivers: Vec<usize>,
        grant: Option<u64>,
        nav_end: Micros,
    ) -> u64 {
        let id = self.next_tx;
        self.next_tx += 1;
        let dur = self.cfg.duration(kind);
        if self.nodes[source].transmitting {
            self.metrics.access_violations += 1;
        }
        let tx = Transmission {
            id,
            source,
            kind,
            start: now,
            end: now + dur,
            receivers,
            grant,
            he: self.nodes[source].he && source != AP,
        };
        self.log(now, "tx-start", source, format_args!("{kind} id={id} end={}", now + dur));
        self.metrics.record(MetricEvent::Airtime { kind, us: dur });
        self.air.push(AirFrame { tx, nav_end });
        self.nodes[source].transmitting = true;
        for other in 0..self.nodes.len() {
            if other != source && self.topo.hears(source, other) {
                self.nodes[other].busy += 1;
                self.nodes[other].last_rx_start = now;
                self.refresh(now, other);
            }
        }
        self.refresh(now, source);
        self.at(now + dur, Ev::TxEnd { tx: id });
        id
    }

    fn frame(&self, id: u64) -> &AirFrame {
        self.air.iter().find(|a| a.tx.id == id).expect("frame still in history")
    }

    fn outcome(&mut self, receiver: usize, id: u64) -> Reception {
        let topo = self.topo;
        let idx = self.air.iter().position(|a| a.tx.id == id).expect("frame still in history");
        let air = &self.air;
        reception_outcome(
            receiver,
            &air[idx].tx,
            air.iter().map(|a| &a.tx),
            |a, b| topo.hears(a, b),
            self.cfg.phy.ber,
            &self.cfg.frames,
            &mut self.nodes[receiver].rng,
        )
    }

    fn on_tx_end(&mut self, now: Micros, id: u64) {
        let (source, kind, receivers, nav_end) = {
            let f = self.frame(id);
            (f.tx.source, f.tx.kind, f.tx.receivers.clone(), f.nav_end)
        };
        self.nodes[source].transmitting = false;
        let policy = self.cfg.nav_policy;
        let mut touched = vec![source];
        for other in 0..self.nodes.len() {
            if other == source || !self.topo.hears(source, other) {
                continue;
            }
            self.nodes[other].busy -= 1;
            touched.push(other);
            if receivers.contains(&other) || nav_end <= now {
                continue;
            }
            if self.outcome(other, id) != Reception::Received {
                continue;
            }
            let node_bss = self.topo.bss_of[other];
            let frame_bss = self.topo.bss_of[source];
            if nav_update(&mut self.nodes[other].nav, node_bss, frame_bss, id, now, nav_end, policy) {
                self.at(nav_end, Ev::NavExpiry { node: other });
                if kind == FrameKind::Rts {
                    let check = now + 2 * self.d.sifs + self.d.cts + 2 * self.d.slot;
                    self.at(check, Ev::NavResetCheck { node: other, tx: id, rts_end: now });
                }
            }
        }
        for n in touched {
            self.refresh(now, n);
        }
        let horizon = now.saturating_sub(AIR_HISTORY_US);
        self.air.retain(|a| a.tx.end >= horizon);
    }

    // ---- contention ----

    fn on_access(&mut self, now: Micros, node: usize, ac: usize, generation: u64) {
        {
            let e = &self.nodes[node].edcafs[ac];
            if e.generation() != generation || e.access_at() != Some(now) {
                return;
            }
        }
        // Every EDCAF of this node expiring now takes part in the internal
        // contention; the highest class wins.
        let contenders: Vec<usize> =
            (0..AC_COUNT).filter(|&k| self.nodes[node].edcafs[k].access_at() == Some(now)).collect();
        let winner = *contenders.last().expect("at least the caller");
        for &k in &contenders {
            self.nodes[node].edcafs[k].disarm();
        }
        {
            let n = &self.nodes[node];
            let e = &n.edcafs[winner];
            let nav_blocks = n.nav.active(now) && n.nav.set_at < now;
            let aifs_short = now < e.armed_idle_since() + self.cfg.aifs_us(winner);
            if nav_blocks || aifs_short || n.transmitting || n.engaged {
                self.metrics.access_violations += 1;
                self.log(now, "violation", node, format_args!("ac={winner}"));
                self.refresh(now, node);
                return;
            }
        }
        for &k in contenders.iter().filter(|&&k| k != winner) {
            self.log(now, "internal-collision", node, format_args!("ac={k}"));
            self.retry(now, node, k);
        }
        if node == AP {
            self.ap_access(now);
        } else {
            self.start_sta_exchange(now, node, winner);
        }
        self.refresh(now, node);
    }

    fn ap_access(&mut self, now: Micros) {
        let cfg = self.cfg;
        if self.queued_total == 0 {
            self.sync_ap_contender(now);
            return;
        }
        let u: f64 = self.nodes[AP].rng.random();
        let solicited = if u < self.f_mu { self.rank_candidates(None, cfg.phy.antennas as usize) } else { Vec::new() };
        if solicited.is_empty() {
            let ap = &mut self.nodes[AP];
            ap.edcafs[AP_AC].draw_backoff(cfg, &mut ap.rng);
            let f_mu = self.f_mu;
            self.log(now, "ap-skip", AP, format_args!("f_mu={f_mu:.3}"));
            return;
        }
        let ex_id = self.new_exchange(Exchange {
            kind: ExKind::Trigger,
            initiator: AP,
            ac: AP_AC,
            start: now,
            planned_rounds: 1,
            planned_end: now + self.d.trigger + 2 * self.d.sifs + self.d.data + self.d.ack,
            rounds: 0,
            ctrl_tx: None,
            ack_tx: None,
            parts: solicited.iter().map(|&(node, ac)| participant(node, ac)).collect(),
            primary_ok: false,
            ap_engaged: true,
            any_success: false,
        });
        self.nodes[AP].engaged = true;
        self.nodes[AP].edcafs[AP_AC].state = EdcafState::Txop;
        let receivers = solicited.iter().map(|&(n, _)| n).collect();
        let planned_end = self.exchanges[&ex_id].planned_end;
        let tx = self.start_tx(now, AP, FrameKind::Trigger, receivers, None, planned_end);
        self.exchanges.get_mut(&ex_id).expect("live").ctrl_tx = Some(tx);
        self.at(now + self.d.trigger, Ev::Step { ex: ex_id, step: Step::TriggerDone });
    }

    /// STAs with queued traffic, best first: highest nonempty class, then
    /// longest queue of that class, then lowest id.
    fn rank_candidates(&self, exclude: Option<usize>, max: usize) -> Vec<(usize, usize)> {
        let mut c: Vec<(usize, usize, usize)> = self
            .topo
            .bss_members
            .iter()
            .copied()
            .filter(|&n| Some(n) != exclude)
            .filter(|&n| !self.nodes[n].engaged && !self.nodes[n].transmitting)
            .filter_map(|n| {
                let e = &self.nodes[n].edcafs;
                (0..AC_COUNT).rev().find(|&k| !e[k].queue.is_empty()).map(|k| (n, k, e[k].queue.len()))
            })
            .collect();
        c.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
        c.into_iter().take(max).map(|(n, k, _)| (n, k)).collect()
    }

    fn new_exchange(&mut self, ex: Exchange) -> u64 {
        let id = self.next_ex;
        self.next_ex += 1;
        self.exchanges.insert(id, ex);
        id
    }

    fn start_sta_exchange(&mut self, now: Micros, node: usize, ac: usize) {
        let d = &self.d;
        let first = d.rts + d.cts + d.data + d.ack + 3 * d.sifs;
        let more = 2 * d.sifs + d.data + d.ack;
        let limit = self.cfg.ac[ac].txop_limit_us;
        let queue_len = self.nodes[node].edcafs[ac].queue.len() as u32;
        let fit = if limit > first { 1 + ((limit - first) / more) as u32 } else { 1 };
        let planned_rounds = fit.min(queue_len).max(1);
        let planned_end = now + first + u64::from(planned_rounds - 1) * more;
        let ex_id = self.new_exchange(Exchange {
            kind: ExKind::Sta,
            initiator: node,
            ac,
            start: now,
            planned_rounds,
            planned_end,
            rounds: 0,
            ctrl_tx: None,
            ack_tx: None,
            parts: vec![participant(node, ac)],
            primary_ok: true,
            ap_engaged: false,
            any_success: false,
        });
        self.nodes[node].engaged = true;
        self.nodes[node].edcafs[ac].state = EdcafState::AwaitingResponse;
        let tx = self.start_tx(now, node, FrameKind::Rts, vec![AP], None, planned_end);
        self.exchanges.get_mut(&ex_id).expect("live").ctrl_tx = Some(tx);
        self.at(now + self.d.rts, Ev::Step { ex: ex_id, step: Step::RtsDone });
    }

    // ---- exchange steps ----

    fn on_step(&mut self, now: Micros, ex_id: u64, step: Step) {
        let Some(ex) = self.exchanges.get(&ex_id).cloned() else {
            return;
        };
        let d_sifs = self.d.sifs;
        let slot = self.d.slot;
        match step {
            Step::RtsDone => {
                let rts = ex.ctrl_tx.expect("rts sent");
                let ap_free = !self.nodes[AP].engaged && !self.nodes[AP].transmitting;
                let r = self.outcome(AP, rts);
                if r == Reception::Collided {
                    self.collision_at_ap(rts);
                }
                if r == Reception::Received && ap_free {
                    self.at(now + d_sifs, Ev::Step { ex: ex_id, step: Step::Respond });
                } else {
                    self.timeout(now + d_sifs + self.d.cts + slot, ex_id);
                }
            }
            Step::Respond => {
                let ap = &self.nodes[AP];
                if ap.busy > 0 || ap.transmitting || ap.engaged {
                    let f = &self.frame(ex.ctrl_tx.expect("rts sent")).tx;
                    let (start, kind) = (f.start, f.kind);
                    self.metrics.record(MetricEvent::Collision { start, end: now, kind });
                    self.timeout(now + self.d.cts + slot, ex_id);
                    return;
                }
                let secondaries = if self.cfg.mac.mu_txop_sharing {
                    let max = (self.cfg.phy.antennas as usize).saturating_sub(1);
                    self.rank_candidates(Some(ex.initiator), max)
                } else {
                    Vec::new()
                };
                let kind = if secondaries.is_empty() { FrameKind::Cts } else { FrameKind::GroupCts };
                let mut receivers = vec![ex.initiator];
                receivers.extend(secondaries.iter().map(|&(n, _)| n));
                self.nodes[AP].engaged = true;
                let tx = self.start_tx(now, AP, kind, receivers, None, ex.planned_end);
                let e = self.exchanges.get_mut(&ex_id).expect("live");
                e.ap_engaged = true;
                e.ctrl_tx = Some(tx);
                e.parts.extend(secondaries.iter().map(|&(n, k)| participant(n, k)));
                self.refresh(now, AP);
                self.at(now + self.d.cts, Ev::Step { ex: ex_id, step: Step::CtsDone });
            }
            Step::CtsDone | Step::TriggerDone => {
                let ctrl = ex.ctrl_tx.expect("control frame sent");
                let mut parts = ex.parts.clone();
                let mut primary_ok = ex.primary_ok;
                for (i, p) in parts.iter_mut().enumerate() {
                    let heard = self.outcome(p.node, ctrl) == Reception::Received;
                    let n = &self.nodes[p.node];
                    let is_primary = ex.kind == ExKind::Sta && i == 0;
                    let free = if is_primary {
                        true
                    } else if ex.kind == ExKind::Trigger {
                        !n.engaged && !n.transmitting && n.busy == 0 && !n.nav.active(now)
                    } else {
                        !n.engaged && !n.transmitting
                    };
                    p.active = heard && free && !n.edcafs[p.ac].queue.is_empty();
                    if is_primary {
                        primary_ok = p.active;
                    }
                    if p.active && !is_primary {
                        self.nodes[p.node].engaged = true;
                        self.refresh(now, p.node);
                    }
                }
                let any = parts.iter().any(|p| p.active);
                let e = self.exchanges.get_mut(&ex_id).expect("live");
                e.parts = parts;
                e.primary_ok = primary_ok;
                if any {
                    self.at(now + d_sifs, Ev::Step { ex: ex_id, step: Step::DataStart });
                } else if ex.kind == ExKind::Trigger {
                    self.timeout(now + d_sifs + self.d.data + slot, ex_id);
                } else {
                    self.timeout(now + slot, ex_id);
                }
            }
            Step::DataStart => {
                let mut parts = ex.parts.clone();
                let grant = Some(ex_id);
                let mut sent = 0;
                for p in parts.iter_mut().filter(|p| p.active) {
                    if self.nodes[p.node].edcafs[p.ac].queue.is_empty() {
                        p.active = false;
                        continue;
                    }
                    let tx = self.start_tx(now, p.node, FrameKind::Data, vec![AP], grant, ex.planned_end);
                    p.data_tx = Some(tx);
                    p.data_start = now;
                    sent += 1;
                }
                self.metrics.max_parallel_data = self.metrics.max_parallel_data.max(sent);
                let e = self.exchanges.get_mut(&ex_id).expect("live");
                e.parts = parts;
                e.rounds += 1;
                if sent == 0 {
                    self.at(now, Ev::Step { ex: ex_id, step: Step::Finish });
                } else {
                    self.at(now + self.d.data, Ev::Step { ex: ex_id, step: Step::DataDone });
                }
            }
            Step::DataDone => {
                let mut parts = ex.parts.clone();
                let mut ok = 0;
                for p in parts.iter_mut().filter(|p| p.active) {
                    let tx = p.data_tx.expect("data sent");
                    let r = self.outcome(AP, tx);
                    if r == Reception::Collided {
                        self.collision_at_ap(tx);
                    }
                    p.data_ok = r == Reception::Received;
                    ok += usize::from(p.data_ok);
                }
                self.exchanges.get_mut(&ex_id).expect("live").parts = parts;
                if ok == 0 {
                    self.timeout(now + d_sifs + self.d.ack + slot, ex_id);
                } else {
                    self.at(now + d_sifs, Ev::Step { ex: ex_id, step: Step::AckStart });
                }
            }
            Step::AckStart => {
                let receivers: Vec<usize> =
                    ex.parts.iter().filter(|p| p.active && p.data_ok).map(|p| p.node).collect();
                let kind = match ex.kind {
                    ExKind::Trigger => FrameKind::MultiBlockAck,
                    ExKind::Sta if ex.parts.len() > 1 => FrameKind::GroupAck,
                    ExKind::Sta => FrameKind::BlockAck,
                };
                let last = ex.kind == ExKind::Trigger || ex.rounds >= ex.planned_rounds;
                let nav_end = if last { now + self.d.ack } else { ex.planned_end };
                let tx = self.start_tx(now, AP, kind, receivers, None, nav_end);
                self.exchanges.get_mut(&ex_id).expect("live").ack_tx = Some(tx);
                self.at(now + self.d.ack, Ev::Step { ex: ex_id, step: Step::AckDone });
            }
            Step::AckDone => {
                let ack = ex.ack_tx.expect("ack sent");
                let mut parts = ex.parts.clone();
                let mut any_success = ex.any_success;
                for (i, p) in parts.iter_mut().enumerate() {
                    p.delivered_last = false;
                    if !p.active {
                        continue;
                    }
                    if p.data_ok {
                        any_success = true;
                    }
                    if p.data_ok && self.outcome(p.node, ack) == Reception::Received {
                        let tx_start = if ex.kind == ExKind::Sta && i == 0 && ex.rounds == 1 {
                            ex.start
                        } else {
                            p.data_start
                        };
                        self.record_delivery(p.node, p.ac, tx_start, now);
                        p.delivered_last = true;
                        p.delivered_any = true;
                    } else {
                        p.active = false;
                    }
                    p.data_ok = false;
                    p.data_tx = None;
                }
                let primary_delivered = ex.kind == ExKind::Sta && parts[0].delivered_last;
                let next_round_fits = ex.kind == ExKind::Sta
                    && ex.rounds < ex.planned_rounds
                    && now + 2 * d_sifs + self.d.data + self.d.ack <= ex.planned_end
                    && !self.nodes[ex.initiator].edcafs[ex.ac].queue.is_empty();
                for p in parts.iter_mut() {
                    if p.active && self.nodes[p.node].edcafs[p.ac].queue.is_empty() {
                        p.active = false;
                    }
                }
                let e = self.exchanges.get_mut(&ex_id).expect("live");
                e.parts = parts;
                e.any_success = any_success;
                if primary_delivered && next_round_fits {
                    self.at(now + d_sifs, Ev::Step { ex: ex_id, step: Step::DataStart });
                } else if ex.kind == ExKind::Sta && ex.primary_ok && !primary_delivered {
                    self.timeout(now + slot, ex_id);
                } else {
                    self.at(now, Ev::Step { ex: ex_id, step: Step::Finish });
                }
            }
            Step::Finish => self.finish(now, ex_id),
        }
    }

    fn collision_at_ap(&mut self, tx: u64) {
        let f = &self.frame(tx).tx;
        let ev = MetricEvent::Collision { start: f.start, end: f.end, kind: f.kind };
        self.metrics.record(ev);
    }

    fn timeout(&mut self, at: Micros, ex_id: u64) {
        self.metrics.record(MetricEvent::Timeout);
        if let Some(e) = self.exchanges.get_mut(&ex_id) {
            e.primary_ok = false;
        }
        self.at(at, Ev::Step { ex: ex_id, step: Step::Finish });
    }

    fn finish(&mut self, now: Micros, ex_id: u64) {
        let Some(ex) = self.exchanges.remove(&ex_id) else {
            return;
        };
        let cfg = self.cfg;
        match ex.kind {
            ExKind::Sta => {
                let primary = &ex.parts[0];
                let success = primary.delivered_last;
                let n = &mut self.nodes[ex.initiator];
                n.engaged = false;
                n.edcafs[ex.ac].release(false, cfg, &mut n.rng);
                if success {
                    n.edcafs[ex.ac].retry_stage = 0;
                    if !n.edcafs[ex.ac].queue.is_empty() {
                        n.edcafs[ex.ac].draw_backoff(cfg, &mut n.rng);
                    }
                } else {
                    self.retry(now, ex.initiator, ex.ac);
                }
                if ex.parts.len() > 1 {
                    self.metrics.mu_exchanges += 1;
                } else {
                    self.metrics.su_exchanges += 1;
                }
                self.log(now, "finish", ex.initiator, format_args!("ok={success} rounds={}", ex.rounds));
            }
            ExKind::Trigger => {
                let n = &mut self.nodes[AP];
                n.edcafs[AP_AC].release(false, cfg, &mut n.rng);
                if ex.any_success {
                    n.edcafs[AP_AC].retry_stage = 0;
                    n.edcafs[AP_AC].draw_backoff(cfg, &mut n.rng);
                } else {
                    self.retry(now, AP, AP_AC);
                }
                self.metrics.trigger_exchanges += 1;
                self.log(now, "finish", AP, format_args!("trigger ok={}", ex.any_success));
            }
        }
        let skip = usize::from(ex.kind == ExKind::Sta);
        let mut touched = vec![ex.initiator];
        for p in ex.parts.iter().skip(skip) {
            let n = &mut self.nodes[p.node];
            if !n.engaged {
                continue;
            }
            n.engaged = false;
            if p.delivered_any {
                let e = &mut n.edcafs[p.ac];
                e.retry_stage = 0;
                e.release(true, cfg, &mut n.rng);
            }
            touched.push(p.node);
        }
        if ex.ap_engaged {
            self.nodes[AP].engaged = false;
            touched.push(AP);
        }
        for node in touched {
            self.refresh(now, node);
        }
        self.sync_ap_contender(now);
    }
}

fn participant(node: usize, ac: usize) -> Participant {
    Participant {
        node,
        ac,
        active: true,
        data_tx: None,
        data_start: 0,
        data_ok: false,
        delivered_any: false,
        delivered_last: false,
    }
}

/// `1 - Th_3 / sum(Th)`, or 0 when nothing has been carried.
fn share_complement(th: &[f64; AC_COUNT]) -> f64 {
    let total: f64 = th.iter().sum();
    if total > 0.0 {
        1.0 - th[AC_COUNT - 1] / total
    } else {
        0.0
    }
}
