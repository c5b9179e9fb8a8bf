//! Simulation parameters, EDCA access-category settings and frame airtime.
//!
//! Every duration is an integer number of microseconds. Slot quantization
//! only happens inside [`crate::analytic`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{PathLossParams, ShadowingMode};
use crate::{Micros, AC_COUNT};

/// EDCA parameters of one access category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcParams {
    pub aifsn: u32,
    /// `CW_min` as listed in the parameter table. Read as the number of
    /// backoff states `W_{k,0}` unless [`SimConfig::cw_plus_one`] is set.
    pub cw_min: u32,
    /// Maximum backoff stage `m_k`; the window stops doubling beyond it.
    pub max_stage: u32,
    /// Zero means a TXOP carries a single exchange.
    pub txop_limit_us: Micros,
    /// Packets per second. Network aggregate for this class unless
    /// [`SimConfig::rate_is_per_sta`] is set.
    pub arrival_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhyParams {
    pub slot_us: Micros,
    pub sifs_us: Micros,
    pub difs_us: Micros,
    pub phy_header_min_us: Micros,
    pub phy_header_max_us: Micros,
    pub ofdm_symbol_us: Micros,
    pub bits_per_symbol: u32,
    pub bandwidth_mhz: u32,
    pub subcarriers: u32,
    pub ber: f64,
    pub tx_power_dbm: f64,
    pub csth_operational_dbm: f64,
    pub csth_association_dbm: f64,
    /// AP antenna count: the cap on simultaneous uplink streams.
    pub antennas: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSizes {
    /// Full MPDU including the MAC header.
    pub mpdu_octets: u32,
    pub mac_header_octets: u32,
    pub rts_octets: u32,
    /// CTS and G-CTS.
    pub cts_octets: u32,
    /// BA, G-ACK and M-BA.
    pub ack_octets: u32,
    pub trigger_octets: u32,
    pub retry_limit: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NavPolicy {
    /// Any audible frame updates the NAV.
    Legacy,
    /// Only frames from the node's own BSS update the NAV.
    IntraBssOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TopologyMode {
    RandomWithHidden,
    CompleteGraph,
}

/// Which printed form of the hidden-node quiet probability to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HiddenForm {
    /// Every hidden node independently silent in a slot.
    Product,
    /// The sum expression exactly as printed; not a probability in general.
    Literal,
}

/// How the idle-slot probability exponents are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IdleCounts {
    /// Each class `l` contributes its own in-range population `N_{l,t}`.
    PerClass,
    /// The tagged class count `N_{k,t}` is used for every factor.
    Single,
}

/// Fixed-point solver settings for the analytic model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: u32,
    pub hidden_form: HiddenForm,
    pub idle_counts: IdleCounts,
}

/// Protocol knobs of the simulator that have no counterpart in the
/// parameter table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacParams {
    /// STA-initiated MU TXOP sharing through G-CTS.
    pub mu_txop_sharing: bool,
    /// AP trigger-based uplink.
    pub ap_triggers: bool,
    /// Period at which the AP re-evaluates its trigger probability.
    pub trigger_update_us: Micros,
    /// Fraction of STAs that are HE capable. Their uplink data never
    /// suffers collisions.
    pub he_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub ac: [AcParams; AC_COUNT],
    pub phy: PhyParams,
    pub frames: FrameSizes,
    pub pathloss: PathLossParams,
    pub model: ModelParams,
    pub mac: MacParams,
    pub sta_count: usize,
    pub run_duration_us: Micros,
    pub run_count: usize,
    pub seed: u64,
    pub nav_policy: NavPolicy,
    pub topology_mode: TopologyMode,
    /// Radius of the disc in which STAs are dropped before association.
    pub placement_radius_m: f64,
    /// Read `cw_min` literally as `CW_min`, giving `W_{k,0} = CW_min + 1`.
    pub cw_plus_one: bool,
    pub rate_is_per_sta: bool,
}

impl SimConfig {
    /// Number of backoff states at stage 0, `W_{k,0}`.
    pub fn w0(&self, k: usize) -> u32 {
        self.ac[k].cw_min + u32::from(self.cw_plus_one)
    }

    /// `AIFS_k = SIFS + AIFSN_k * slot`.
    pub fn aifs_us(&self, k: usize) -> Micros {
        self.phy.sifs_us + u64::from(self.ac[k].aifsn) * self.phy.slot_us
    }

    /// Per-STA Poisson rate of class `k`.
    pub fn per_sta_rate(&self, k: usize) -> f64 {
        if self.rate_is_per_sta {
            self.ac[k].arrival_rate
        } else {
            self.ac[k].arrival_rate / self.sta_count as f64
        }
    }

    /// Network-wide offered packets per second over all classes.
    pub fn aggregate_rate(&self) -> f64 {
        (0..AC_COUNT)
            .map(|k| self.per_sta_rate(k) * self.sta_count as f64)
            .sum()
    }

    /// Split an aggregate rate evenly over the four classes.
    pub fn set_aggregate_rate(&mut self, pps: f64) {
        self.rate_is_per_sta = false;
        for ac in &mut self.ac {
            ac.arrival_rate = pps / AC_COUNT as f64;
        }
    }

    pub fn mpdu_bits(&self) -> u64 {
        u64::from(self.frames.mpdu_octets) * 8
    }

    pub fn duration(&self, kind: FrameKind) -> Micros {
        frame_duration_us(kind, &self.frames, &self.phy)
    }
}

/// The parameter table values.
pub fn default_config() -> SimConfig {
    let ac = |aifsn, cw_min, max_stage, txop_limit_us| AcParams {
        aifsn,
        cw_min,
        max_stage,
        txop_limit_us,
        arrival_rate: 1200.0,
    };
    SimConfig {
        ac: [ac(7, 32, 5, 0), ac(5, 32, 5, 0), ac(3, 16, 1, 1504), ac(2, 8, 1, 1504)],
        phy: PhyParams {
            slot_us: 9,
            sifs_us: 16,
            difs_us: 34,
            phy_header_min_us: 40,
            phy_header_max_us: 52,
            ofdm_symbol_us: 4,
            bits_per_symbol: 1560,
            bandwidth_mhz: 80,
            subcarriers: 234,
            ber: 2e-6,
            tx_power_dbm: 23.0,
            csth_operational_dbm: -82.0,
            csth_association_dbm: -82.0,
            antennas: 4,
        },
        frames: FrameSizes {
            mpdu_octets: 11454,
            mac_header_octets: 36,
            rts_octets: 20,
            cts_octets: 14,
            ack_octets: 32,
            trigger_octets: 28,
            retry_limit: 7,
        },
        pathloss: PathLossParams {
            exponent: 2.0,
            wall_db_per_m: 0.5,
            shadowing_sigma_db: 4.0,
            shadowing: ShadowingMode::Margin,
            reference_loss_db: 68.0,
            frequency_ghz: 5.0,
        },
        model: ModelParams {
            damping: 0.5,
            tolerance: 1e-9,
            max_iterations: 10_000,
            hidden_form: HiddenForm::Product,
            idle_counts: IdleCounts::PerClass,
        },
        mac: MacParams {
            mu_txop_sharing: true,
            ap_triggers: true,
            trigger_update_us: 50_000,
            he_fraction: 0.0,
        },
        sta_count: 24,
        run_duration_us: 1_000_000,
        run_count: 10,
        seed: 1,
        nav_policy: NavPolicy::IntraBssOnly,
        topology_mode: TopologyMode::RandomWithHidden,
        placement_radius_m: 12.5,
        cw_plus_one: false,
        rate_is_per_sta: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FrameKind {
    Rts,
    Cts,
    GroupCts,
    Data,
    BlockAck,
    GroupAck,
    Trigger,
    MultiBlockAck,
}

impl FrameKind {
    pub const ALL: [FrameKind; 8] = [
        FrameKind::Rts,
        FrameKind::Cts,
        FrameKind::GroupCts,
        FrameKind::Data,
        FrameKind::BlockAck,
        FrameKind::GroupAck,
        FrameKind::Trigger,
        FrameKind::MultiBlockAck,
    ];

    pub fn is_control(self) -> bool {
        self != FrameKind::Data
    }

    pub fn octets(self, sizes: &FrameSizes) -> u32 {
        match self {
            FrameKind::Rts => sizes.rts_octets,
            FrameKind::Cts | FrameKind::GroupCts => sizes.cts_octets,
            FrameKind::Data => sizes.mpdu_octets,
            FrameKind::BlockAck | FrameKind::GroupAck | FrameKind::MultiBlockAck => {
                sizes.ack_octets
            }
            FrameKind::Trigger => sizes.trigger_octets,
        }
    }

    pub fn bits(self, sizes: &FrameSizes) -> u64 {
        u64::from(self.octets(sizes)) * 8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Rts => "RTS",
            FrameKind::Cts => "CTS",
            FrameKind::GroupCts => "G-CTS",
            FrameKind::Data => "DATA",
            FrameKind::BlockAck => "BA",
            FrameKind::GroupAck => "G-ACK",
            FrameKind::Trigger => "TRIGGER",
            FrameKind::MultiBlockAck => "M-BA",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FrameKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFrameKind(s.to_string()))
    }
}

/// Airtime of a frame: PHY header plus whole OFDM symbols for the payload.
/// Data frames carry the long header, control frames the short one.
pub fn frame_duration_us(kind: FrameKind, sizes: &FrameSizes, phy: &PhyParams) -> Micros {
    let header = if kind.is_control() {
        phy.phy_header_min_us
    } else {
        phy.phy_header_max_us
    };
    header + symbols_for(kind.bits(sizes), phy.bits_per_symbol) * phy.ofdm_symbol_us
}

fn symbols_for(bits: u64, bits_per_symbol: u32) -> u64 {
    bits.div_ceil(u64::from(bits_per_symbol.max(1)))
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Check every parameter invariant. An empty list means the config is valid.
pub fn validate_config(cfg: &SimConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &str, message: &str| {
        if !ok {
            out.push(Violation {
                field: field.to_string(),
                message: message.to_string(),
            });
        }
    };

    for (k, ac) in cfg.ac.iter().enumerate() {
        let f = |name: &str| format!("ac{k}.{name}");
        check(ac.aifsn >= 2, &f("aifsn"), "aifsn below 2");
        check(ac.cw_min >= 2, &f("cw_min"), "fewer than 2 backoff states");
        check(ac.cw_min.is_power_of_two(), &f("cw_min"), "not a power of two");
        check(ac.max_stage < 32, &f("max_stage"), "backoff stage too large");
        check(
            ac.arrival_rate.is_finite() && ac.arrival_rate >= 0.0,
            &f("arrival_rate_pps"),
            "negative arrival rate",
        );
    }

    let phy = &cfg.phy;
    check(phy.slot_us > 0, "phy.slot_us", "slot must be positive");
    check(phy.sifs_us < phy.difs_us, "phy.sifs_us", "SIFS not shorter than DIFS");
    check(phy.bits_per_symbol > 0, "phy.bits_per_symbol", "must be positive");
    check(phy.ofdm_symbol_us > 0, "phy.ofdm_symbol_us", "must be positive");
    check(
        phy.phy_header_min_us <= phy.phy_header_max_us,
        "phy.header_min_us",
        "minimum PHY header longer than maximum",
    );
    check(
        (0.0..1.0).contains(&phy.ber),
        "phy.ber",
        "ber out of [0,1)",
    );
    check(
        phy.csth_association_dbm >= phy.csth_operational_dbm,
        "phy.csth_association_dbm",
        "association CSTH below operational",
    );
    check(phy.antennas >= 1, "phy.antennas", "AP needs at least one antenna");

    let fr = &cfg.frames;
    for (name, v) in [
        ("frames.mpdu_octets", fr.mpdu_octets),
        ("frames.mac_header_octets", fr.mac_header_octets),
        ("frames.rts_octets", fr.rts_octets),
        ("frames.cts_octets", fr.cts_octets),
        ("frames.ack_octets", fr.ack_octets),
        ("frames.trigger_octets", fr.trigger_octets),
    ] {
        check(v > 0, name, "size must be positive");
    }
    check(
        fr.mac_header_octets < fr.mpdu_octets,
        "frames.mac_header_octets",
        "MAC header does not fit in the MPDU",
    );
    check(fr.retry_limit >= 1, "frames.retry_limit", "retry limit below 1");

    let pl = &cfg.pathloss;
    check(pl.exponent > 0.0, "pathloss.exponent", "exponent must be positive");
    check(pl.wall_db_per_m >= 0.0, "pathloss.wall_db_per_m", "negative wall attenuation");
    check(
        pl.shadowing_sigma_db >= 0.0,
        "pathloss.shadowing_sigma_db",
        "negative shadowing",
    );

    let m = &cfg.model;
    check(
        m.damping > 0.0 && m.damping <= 1.0,
        "model.damping",
        "damping out of (0,1]",
    );
    check(m.tolerance > 0.0, "model.tolerance", "tolerance must be positive");
    check(m.max_iterations >= 1, "model.max_iterations", "need at least one iteration");

    check(
        (0.0..=1.0).contains(&cfg.mac.he_fraction),
        "mac.he_fraction",
        "fraction out of [0,1]",
    );
    check(cfg.mac.trigger_update_us > 0, "mac.trigger_update_ms", "must be positive");

    check(cfg.sta_count > 0, "sta_count", "need at least one STA");
    check(cfg.run_duration_us > 0, "run_duration_s", "duration must be positive");
    check(cfg.run_count >= 1, "run_count", "need at least one run");
    check(
        cfg.placement_radius_m > 0.0,
        "placement_radius_m",
        "radius must be positive",
    );
    out
}
