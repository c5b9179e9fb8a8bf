//! Per-run counters and their aggregation over runs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::FrameKind;
use crate::{Micros, AC_COUNT};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AcCounters {
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Packets still queued (including the one in flight) at run end.
    pub queued: u64,
    pub delivered_bits: u64,
    pub backoff_sum_us: u64,
    pub backoff_samples: u64,
    pub waiting_sum_us: u64,
    pub waiting_samples: u64,
}

impl AcCounters {
    pub fn mean_backoff_us(&self) -> f64 {
        ratio(self.backoff_sum_us as f64, self.backoff_samples as f64)
    }

    pub fn mean_waiting_us(&self) -> f64 {
        ratio(self.waiting_sum_us as f64, self.waiting_samples as f64)
    }

    pub fn drop_ratio(&self) -> f64 {
        ratio(self.dropped as f64, (self.dropped + self.delivered) as f64)
    }
}

/// Something worth counting, reported by the MAC as it happens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricEvent {
    Arrival { ac: usize },
    /// Packet reached the head of its queue after waiting `waited_us`.
    HeadOfLine { ac: usize, waited_us: Micros },
    /// Packet delivered; `backoff_us` runs from head-of-line to the start
    /// of the successful transmission.
    Delivered { ac: usize, bits: u64, backoff_us: Micros },
    Dropped { ac: usize },
    /// A reception addressed to the AP was destroyed over `[start, end)`.
    Collision { start: Micros, end: Micros, kind: FrameKind },
    Airtime { kind: FrameKind, us: Micros },
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunCounters {
    pub ac: [AcCounters; AC_COUNT],
    /// Collision windows at the AP.
    pub collisions: u64,
    pub rts_collisions: u64,
    pub data_collisions: u64,
    pub other_collisions: u64,
    pub control_airtime_us: u64,
    pub data_airtime_us: u64,
    pub timeouts: u64,
    pub su_exchanges: u64,
    pub mu_exchanges: u64,
    pub trigger_exchanges: u64,
    /// Largest number of data PPDUs sent under one grant.
    pub max_parallel_data: usize,
    /// Contention-based transmissions that started while NAV or AIFS
    /// should have held them back. Always zero in a correct run.
    pub access_violations: u64,
    pub hidden_per_sta: f64,
    pub duration_us: Micros,
    #[serde(skip)]
    window_end: Option<Micros>,
}

/// Collided receptions closer than this are one collision window.
const WINDOW_MERGE_US: Micros = 16;

impl RunCounters {
    pub fn record(&mut self, event: MetricEvent) {
        match event {
            MetricEvent::Arrival { ac } => self.ac[ac].arrivals += 1,
            MetricEvent::HeadOfLine { ac, waited_us } => {
                self.ac[ac].waiting_sum_us += waited_us;
                self.ac[ac].waiting_samples += 1;
            }
            MetricEvent::Delivered { ac, bits, backoff_us } => {
                let c = &mut self.ac[ac];
                c.delivered += 1;
                c.delivered_bits += bits;
                c.backoff_sum_us += backoff_us;
                c.backoff_samples += 1;
            }
            MetricEvent::Dropped { ac } => self.ac[ac].dropped += 1,
            MetricEvent::Collision { start, end, kind } => {
                match self.window_end {
                    Some(w) if start <= w + WINDOW_MERGE_US => {
                        self.window_end = Some(w.max(end));
                    }
                    _ => {
                        self.collisions += 1;
                        match kind {
                            FrameKind::Rts => self.rts_collisions += 1,
                            FrameKind::Data => self.data_collisions += 1,
                            _ => self.other_collisions += 1,
                        }
                        self.window_end = Some(end);
                    }
                }
            }
            MetricEvent::Airtime { kind, us } => {
                if kind.is_control() {
                    self.control_airtime_us += us;
                } else {
                    self.data_airtime_us += us;
                }
            }
            MetricEvent::Timeout => self.timeouts += 1,
        }
    }

    pub fn arrivals(&self) -> u64 {
        self.ac.iter().map(|c| c.arrivals).sum()
    }

    pub fn delivered(&self) -> u64 {
        self.ac.iter().map(|c| c.delivered).sum()
    }

    pub fn dropped(&self) -> u64 {
        self.ac.iter().map(|c| c.dropped).sum()
    }

    pub fn delivered_bits(&self) -> u64 {
        self.ac.iter().map(|c| c.delivered_bits).sum()
    }

    pub fn drop_ratio(&self) -> f64 {
        let d = self.dropped();
        ratio(d as f64, (d + self.delivered()) as f64)
    }

    pub fn throughput_mbps(&self) -> f64 {
        mbps(self.delivered_bits(), self.duration_us)
    }

    pub fn ac_throughput_mbps(&self, ac: usize) -> f64 {
        mbps(self.ac[ac].delivered_bits, self.duration_us)
    }

    /// Control airtime over data airtime; `None` when no data was sent.
    pub fn overhead_ratio(&self) -> Option<f64> {
        (self.data_airtime_us > 0)
            .then(|| self.control_airtime_us as f64 / self.data_airtime_us as f64)
    }

    /// Collision windows per second of simulated time.
    pub fn collisions_per_s(&self) -> f64 {
        ratio(self.collisions as f64, self.duration_us as f64 / 1e6)
    }

    /// Mean backoff over all delivered packets regardless of class.
    pub fn mean_backoff_us(&self) -> f64 {
        let sum: u64 = self.ac.iter().map(|c| c.backoff_sum_us).sum();
        let n: u64 = self.ac.iter().map(|c| c.backoff_samples).sum();
        ratio(sum as f64, n as f64)
    }

    pub fn mean_waiting_us(&self) -> f64 {
        let sum: u64 = self.ac.iter().map(|c| c.waiting_sum_us).sum();
        let n: u64 = self.ac.iter().map(|c| c.waiting_samples).sum();
        ratio(sum as f64, n as f64)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn mbps(bits: u64, duration_us: Micros) -> f64 {
    // bits per microsecond is Mbit/s.
    ratio(bits as f64, duration_us as f64)
}

/// Mean and sample standard deviation over runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub backoff_us: [Stat; AC_COUNT],
    pub waiting_us: [Stat; AC_COUNT],
    pub backoff_all_us: Stat,
    pub waiting_all_us: Stat,
    /// Collision windows per second.
    pub collisions: Stat,
    pub drop_ratio: Stat,
    pub throughput_mbps: Stat,
    pub overhead_ratio: Stat,
    /// False when no run sent any data, in which case the overhead is 0.
    pub overhead_defined: bool,
    pub hidden_per_sta: Stat,
    pub runs: usize,
}

/// Aggregate per-run counters. Throughput and collision rates use each
/// run's own duration.
pub fn summarize(runs: &[RunCounters]) -> Result<MetricsSummary> {
    if runs.is_empty() {
        return Err(Error::EmptyResults);
    }
    let stat = |f: &dyn Fn(&RunCounters) -> f64| {
        Stat::of(&runs.iter().map(f).collect::<Vec<_>>())
    };
    let overhead_defined = runs.iter().any(|r| r.overhead_ratio().is_some());
    Ok(MetricsSummary {
        backoff_us: std::array::from_fn(|k| stat(&|r| r.ac[k].mean_backoff_us())),
        waiting_us: std::array::from_fn(|k| stat(&|r| r.ac[k].mean_waiting_us())),
        backoff_all_us: stat(&|r| r.mean_backoff_us()),
        waiting_all_us: stat(&|r| r.mean_waiting_us()),
        collisions: stat(&|r| r.collisions_per_s()),
        drop_ratio: stat(&|r| r.drop_ratio()),
        throughput_mbps: stat(&|r| r.throughput_mbps()),
        overhead_ratio: stat(&|r| r.overhead_ratio().unwrap_or(0.0)),
        overhead_defined,
        hidden_per_sta: stat(&|r| r.hidden_per_sta),
        runs: runs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run() -> RunCounters {
        RunCounters {
            duration_us: 1_000_000,
            ..Default::default()
        }
    }

    #[test]
    fn delivered_mpdu_adds_its_bits() {
        let mut r = run();
        r.record(MetricEvent::Delivered { ac: 2, bits: 91_632, backoff_us: 100 });
        assert_eq!(r.delivered_bits(), 91_632);
        assert_eq!(r.ac[2].delivered, 1);
        assert!((r.throughput_mbps() - 0.091_632).abs() < 1e-12);
    }

    #[test]
    fn collision_counts_once_per_window() {
        let mut r = run();
        r.record(MetricEvent::Collision { start: 0, end: 44, kind: FrameKind::Rts });
        assert_eq!(r.collisions, 1);
        r.record(MetricEvent::Collision { start: 20, end: 64, kind: FrameKind::Rts });
        r.record(MetricEvent::Collision { start: 70, end: 114, kind: FrameKind::Rts });
        assert_eq!(r.collisions, 1);
        r.record(MetricEvent::Collision { start: 500, end: 544, kind: FrameKind::Rts });
        assert_eq!(r.collisions, 2);
        assert_eq!(r.rts_collisions, 2);
    }

    #[test]
    fn waiting_sample() {
        let mut r = run();
        r.record(MetricEvent::HeadOfLine { ac: 0, waited_us: 1_234 });
        assert_eq!(r.ac[0].mean_waiting_us(), 1_234.0);
    }

    #[test]
    fn zero_traffic_summary() {
        let s = summarize(&[run(), run()]).unwrap();
        assert_eq!(s.throughput_mbps, Stat::default());
        assert_eq!(s.drop_ratio.mean, 0.0);
        assert_eq!(s.overhead_ratio.mean, 0.0);
        assert!(!s.overhead_defined);
    }

    #[test]
    fn identical_runs_have_zero_spread() {
        let mut r = run();
        r.record(MetricEvent::Delivered { ac: 0, bits: 8_000, backoff_us: 10 });
        r.record(MetricEvent::Dropped { ac: 0 });
        r.record(MetricEvent::Airtime { kind: FrameKind::Rts, us: 44 });
        r.record(MetricEvent::Airtime { kind: FrameKind::Data, us: 288 });
        let s = summarize(&[r.clone(), r.clone(), r]).unwrap();
        assert_eq!(s.throughput_mbps.std, 0.0);
        assert_eq!(s.drop_ratio.mean, 0.5);
        assert!((s.overhead_ratio.mean - 44.0 / 288.0).abs() < 1e-12);
        assert!(s.overhead_defined);
    }

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - 1.290_994_448_7).abs() < 1e-9);
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyResults)));
    }
}
