//! Closed-form model of prioritized EDCA access with hidden nodes.
//!
//! The per-class transmission probability `tau_k` feeds the idle-slot
//! probabilities `f_k`, the no-hidden success probabilities `gamma_k`, the
//! hidden-quiet probability `f_h` and the survival of the vulnerable
//! window `f_ncoll`. The loop is closed with a renewal argument over the
//! backoff stages: a station that fails with probability `p_k` spends on
//! average `(W_{k,i}+1)/2` slots in stage `i` and transmits once per stage
//! visited. The result is solved by damped fixed-point iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Topology;
use crate::params::{FrameKind, HiddenForm, IdleCounts, SimConfig};
use crate::AC_COUNT;

pub type PerAc = [f64; AC_COUNT];

/// `A_{k,max}` in slots: the span in which class `k` and higher may
/// access the medium. `A_{0,max}` is the largest AC 0 backoff window.
pub fn a_k_max(cfg: &SimConfig) -> Result<[u64; AC_COUNT]> {
    let mut a = [0u64; AC_COUNT];
    a[0] = max_window(0, cfg);
    for k in 1..AC_COUNT {
        let (lo, hi) = (cfg.ac[k - 1].aifsn, cfg.ac[k].aifsn);
        if lo < hi {
            return Err(Error::Model(format!(
                "AIFSN must not increase with priority: ac{} = {lo}, ac{k} = {hi}",
                k - 1
            )));
        }
        a[k] = u64::from(lo - hi);
    }
    Ok(a)
}

/// Classes `k >= 1` whose access window is empty because their AIFSN
/// equals the next lower class.
pub fn degenerate_classes(a_max: &[u64; AC_COUNT]) -> Vec<usize> {
    (1..AC_COUNT).filter(|&k| a_max[k] == 0).collect()
}

fn max_window(k: usize, cfg: &SimConfig) -> u64 {
    (1u64 << cfg.ac[k].max_stage) * u64::from(cfg.w0(k))
}

/// Number of backoff states `W_{k,i}` at stage `i`: doubles per stage up
/// to `m_k`, then stays.
pub fn window_size(k: usize, stage: u32, cfg: &SimConfig) -> Result<u64> {
    if stage > cfg.frames.retry_limit {
        return Err(Error::Model(format!(
            "stage {stage} beyond retry limit {}",
            cfg.frames.retry_limit
        )));
    }
    let doublings = stage.min(cfg.ac[k].max_stage);
    Ok((1u64 << doublings) * u64::from(cfg.w0(k)))
}

/// Probability that a slot in the access window of class `k` is idle.
pub fn idle_prob(tau: &PerAc, counts: &PerAc, k: usize, mode: IdleCounts) -> f64 {
    (k..AC_COUNT)
        .map(|l| {
            let n = match mode {
                IdleCounts::PerClass => counts[l],
                IdleCounts::Single => counts[k],
            };
            (1.0 - tau[l]).powf(n)
        })
        .product()
}

/// All four idle probabilities.
pub fn idle_probs(tau: &PerAc, counts: &PerAc, mode: IdleCounts) -> PerAc {
    std::array::from_fn(|k| idle_prob(tau, counts, k, mode))
}

/// Per-class success probabilities without hidden nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoHiddenSuccess {
    pub gamma: PerAc,
    /// Some raw value fell outside `[0,1]` and was clamped.
    pub clamped: bool,
}

/// Success probability of a tagged class-`k` transmission when no hidden
/// node interferes. Each level of nesting covers the chance that the
/// access window of a higher class elapses without a transmission, which
/// opens the window of the next lower class.
pub fn success_prob_no_hidden(f: &PerAc, tau: &PerAc, a_max: &[u64; AC_COUNT]) -> Result<NoHiddenSuccess> {
    if let Some(k) = (0..AC_COUNT).find(|&k| tau[k] >= 1.0) {
        return Err(Error::Model(format!("tau_{k} = 1 leaves no idle slot")));
    }
    // Probability that windows 1..=j all pass in silence, then the success
    // term of the class whose window is entered.
    let pass = |j: usize| f[j].powf(a_max[j] as f64);
    let mut gamma = [0.0; AC_COUNT];
    for (k, g) in gamma.iter_mut().enumerate() {
        let denom = 1.0 - tau[k];
        // Walk down from window k: stop in window j with prob (1 - pass(j)).
        let mut reach = 1.0;
        let mut acc = 0.0;
        for j in (1..=k).rev() {
            acc += reach * (1.0 - pass(j)) * f[j] / denom;
            reach *= pass(j);
        }
        acc += reach * f[0] / denom;
        *g = acc;
    }
    let clamped = gamma.iter().any(|g| !(0.0..=1.0).contains(g));
    Ok(NoHiddenSuccess {
        gamma: gamma.map(|g| g.clamp(0.0, 1.0)),
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkMode {
    SingleUser,
    MultiUser,
}

/// Vulnerable window in slots, rounded up: RTS + SIFS + CTS for a
/// single-user exchange, the trigger frame for a multi-user one.
pub fn vulnerable_period(mode: UplinkMode, cfg: &SimConfig) -> u64 {
    let us = match mode {
        UplinkMode::SingleUser => {
            cfg.duration(FrameKind::Rts) + cfg.phy.sifs_us + cfg.duration(FrameKind::Cts)
        }
        UplinkMode::MultiUser => cfg.duration(FrameKind::Trigger),
    };
    us.div_ceil(cfg.phy.slot_us)
}

/// Probability that no hidden node transmits in a given slot.
pub fn hidden_quiet_prob(tau: &PerAc, hidden: &PerAc, form: HiddenForm) -> Result<f64> {
    match form {
        HiddenForm::Product => Ok((0..AC_COUNT)
            .map(|k| (1.0 - tau[k]).powf(hidden[k]))
            .product()),
        HiddenForm::Literal => {
            if let Some(k) = (0..AC_COUNT).find(|&k| tau[k] <= 0.0 || hidden[k] <= 0.0) {
                return Err(Error::Model(format!(
                    "literal hidden-quiet form needs tau_{k} > 0 and N_{k},h > 0"
                )));
            }
            Ok((0..AC_COUNT)
                .map(|k| (1.0 - tau[k]).powf(hidden[k]) / (tau[k] * hidden[k]))
                .sum())
        }
    }
}

/// Probability that the whole vulnerable window passes without a hidden
/// transmission, mixing single-user and trigger windows by `f_mu`.
pub fn no_collision_prob(f_h: f64, f_mu: f64, t_su: f64, t_mu: f64) -> f64 {
    f_h.powf((1.0 - f_mu) * t_su + f_mu * t_mu)
}

/// Probability that the AP's TXOP is shared for class `k`:
/// `1 - Th_k / sum(Th)`.
pub fn txop_share_prob(throughput: &PerAc, k: usize) -> Result<f64> {
    let total: f64 = throughput.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Model("throughput shares are all zero".into()));
    }
    Ok(1.0 - throughput[k] / total)
}

pub fn success_prob_hidden(gamma: &PerAc, f_ncoll: f64) -> PerAc {
    gamma.map(|g| g * f_ncoll)
}

/// Survival of RTS+CTS (`delta`) and of DATA+BA (`sigma`) under bit errors.
pub fn channel_survival(cfg: &SimConfig) -> (f64, f64) {
    let q = 1.0 - cfg.phy.ber;
    let fr = &cfg.frames;
    let delta = q.powf((FrameKind::Rts.bits(fr) + FrameKind::Cts.bits(fr)) as f64);
    let sigma = q.powf((FrameKind::Data.bits(fr) + FrameKind::BlockAck.bits(fr)) as f64);
    (delta, sigma)
}

/// Renewal closure: attempts per slot of backoff for failure probability `p`.
pub fn access_prob_from_failure(p: f64, k: usize, cfg: &SimConfig) -> f64 {
    let mut attempts = 0.0;
    let mut slots = 0.0;
    let mut weight = 1.0;
    for stage in 0..=cfg.frames.retry_limit {
        let w = window_size(k, stage, cfg).expect("stage within retry limit") as f64;
        attempts += weight;
        slots += weight * (w + 1.0) / 2.0;
        weight *= p;
    }
    attempts / slots
}

#[derive(Debug, Clone)]
pub struct ModelInputs<'a> {
    pub config: &'a SimConfig,
    /// `N_{k,t}` for the tagged station, excluding itself.
    pub n_in_range: PerAc,
    /// `N_{k,h}`.
    pub n_hidden: PerAc,
    /// `Th_m`, used for the TXOP sharing probability.
    pub throughput_shares: PerAc,
    /// Vulnerable windows in slots.
    pub t_su: f64,
    pub t_mu: f64,
}

impl<'a> ModelInputs<'a> {
    /// Counts averaged over the STAs of a topology, throughput shares from
    /// offered load.
    pub fn from_topology(cfg: &'a SimConfig, topo: &Topology) -> Self {
        let (n_in_range, n_hidden) = topo.mean_counts();
        Self::with_counts(cfg, n_in_range, n_hidden)
    }

    pub fn with_counts(cfg: &'a SimConfig, n_in_range: PerAc, n_hidden: PerAc) -> Self {
        let bits = cfg.mpdu_bits() as f64;
        ModelInputs {
            config: cfg,
            n_in_range,
            n_hidden,
            throughput_shares: std::array::from_fn(|k| cfg.per_sta_rate(k) * bits),
            t_su: vulnerable_period(UplinkMode::SingleUser, cfg) as f64,
            t_mu: vulnerable_period(UplinkMode::MultiUser, cfg) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccessState {
    pub tau: PerAc,
    pub f: PerAc,
    pub gamma: PerAc,
    pub gamma_h: PerAc,
    pub f_h: f64,
    pub f_mu: PerAc,
    pub f_ncoll: PerAc,
    /// Conditional failure probability `1 - gamma_h`.
    pub p: PerAc,
    pub delta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solution {
    pub state: AccessState,
    pub iterations: u32,
    pub residual: f64,
    pub converged: bool,
    /// A probability was clamped to `[0,1]` at some iteration.
    pub clamped: bool,
}

impl Solution {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Model(format!(
                "fixed point not reached after {} iterations (residual {:.3e})",
                self.iterations, self.residual
            )))
        }
    }
}

/// Evaluate every model quantity at a given `tau`.
pub fn evaluate(inputs: &ModelInputs, tau: &PerAc) -> Result<(AccessState, bool)> {
    let cfg = inputs.config;
    let a = a_k_max(cfg)?;
    let f = idle_probs(tau, &inputs.n_in_range, cfg.model.idle_counts);
    let ns = success_prob_no_hidden(&f, tau, &a)?;
    let raw_fh = hidden_quiet_prob(tau, &inputs.n_hidden, cfg.model.hidden_form)?;
    let mut clamped = ns.clamped || !(0.0..=1.0).contains(&raw_fh);
    let f_h = raw_fh.clamp(0.0, 1.0);
    let mut f_mu = [0.0; AC_COUNT];
    let mut f_ncoll = [0.0; AC_COUNT];
    let mut gamma_h = [0.0; AC_COUNT];
    for k in 0..AC_COUNT {
        f_mu[k] = txop_share_prob(&inputs.throughput_shares, k)?;
        f_ncoll[k] = no_collision_prob(f_h, f_mu[k], inputs.t_su, inputs.t_mu);
        gamma_h[k] = ns.gamma[k] * f_ncoll[k];
    }
    clamped |= gamma_h.iter().any(|g| !(0.0..=1.0).contains(g));
    let (delta, sigma) = channel_survival(cfg);
    Ok((
        AccessState {
            tau: *tau,
            f,
            gamma: ns.gamma,
            gamma_h,
            f_h,
            f_mu,
            f_ncoll,
            p: gamma_h.map(|g| 1.0 - g),
            delta,
            sigma,
        },
        clamped,
    ))
}

/// Damped iteration `tau <- (1-a) tau + a T(tau)` until the largest
/// per-class change drops below the configured tolerance. On hitting the
/// iteration cap the best iterate is returned with `converged = false`.
pub fn solve_fixed_point(inputs: &ModelInputs) -> Result<Solution> {
    let cfg = inputs.config;
    let m = &cfg.model;
    let mut tau: PerAc = std::array::from_fn(|k| access_prob_from_failure(0.0, k, cfg));
    let mut clamped_any = false;
    let mut best = (f64::INFINITY, tau);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < m.max_iterations {
        iterations += 1;
        let (state, clamped) = evaluate(inputs, &tau)?;
        clamped_any |= clamped;
        let next: PerAc = std::array::from_fn(|k| access_prob_from_failure(state.p[k], k, cfg));
        residual = (0..AC_COUNT)
            .map(|k| (next[k] - tau[k]).abs())
            .fold(0.0, f64::max);
        if residual < best.0 {
            best = (residual, tau);
        }
        if residual < m.tolerance {
            tau = next;
            break;
        }
        for k in 0..AC_COUNT {
            tau[k] = ((1.0 - m.damping) * tau[k] + m.damping * next[k]).clamp(0.0, 1.0);
        }
    }
    let converged = residual < m.tolerance;
    if !converged {
        residual = best.0;
        tau = best.1;
    }
    let (state, clamped) = evaluate(inputs, &tau)?;
    Ok(Solution {
        state,
        iterations,
        residual,
        converged,
        clamped: clamped_any || clamped,
    })
}
