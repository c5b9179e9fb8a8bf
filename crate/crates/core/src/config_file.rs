//! Flat `key=value` configuration files.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Keys
//! mirror the field paths of [`SimConfig`], e.g. `phy.slot_us=9` or
//! `ac3.aifsn=2`. Unknown keys are errors. Keys not mentioned keep the
//! value of the base config.

use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::ShadowingMode;
use crate::params::{HiddenForm, IdleCounts, NavPolicy, SimConfig, TopologyMode};
use crate::AC_COUNT;

pub fn load(path: &Path, base: SimConfig) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, base)
}

pub fn parse(text: &str, mut cfg: SimConfig) -> Result<SimConfig> {
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: idx + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        set(&mut cfg, key.trim(), value.trim()).map_err(|e| match e {
            Error::UnknownKey(_) => e,
            other => Error::ConfigSyntax {
                line: idx + 1,
                message: other.to_string(),
            },
        })?;
    }
    Ok(cfg)
}

/// Set one field by its key.
pub fn set(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    if let Some((ac, field)) = ac_key(key) {
        let p = &mut cfg.ac[ac];
        match field {
            "aifsn" => p.aifsn = num(key, value)?,
            "cw_min" => p.cw_min = num(key, value)?,
            "max_stage" => p.max_stage = num(key, value)?,
            "txop_limit_us" => p.txop_limit_us = num(key, value)?,
            "arrival_rate_pps" => p.arrival_rate = num(key, value)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        return Ok(());
    }
    let phy = &mut cfg.phy;
    let fr = &mut cfg.frames;
    let pl = &mut cfg.pathloss;
    let m = &mut cfg.model;
    match key {
        "phy.slot_us" => phy.slot_us = num(key, value)?,
        "phy.sifs_us" => phy.sifs_us = num(key, value)?,
        "phy.difs_us" => phy.difs_us = num(key, value)?,
        "phy.header_min_us" => phy.phy_header_min_us = num(key, value)?,
        "phy.header_max_us" => phy.phy_header_max_us = num(key, value)?,
        "phy.ofdm_symbol_us" => phy.ofdm_symbol_us = num(key, value)?,
        "phy.bits_per_symbol" => phy.bits_per_symbol = num(key, value)?,
        "phy.bandwidth_mhz" => phy.bandwidth_mhz = num(key, value)?,
        "phy.subcarriers" => phy.subcarriers = num(key, value)?,
        "phy.ber" => phy.ber = num(key, value)?,
        "phy.tx_power_dbm" => phy.tx_power_dbm = num(key, value)?,
        "phy.csth_operational_dbm" => phy.csth_operational_dbm = num(key, value)?,
        "phy.csth_association_dbm" => phy.csth_association_dbm = num(key, value)?,
        "phy.antennas" => phy.antennas = num(key, value)?,
        "frames.mpdu_octets" => fr.mpdu_octets = num(key, value)?,
        "frames.mac_header_octets" => fr.mac_header_octets = num(key, value)?,
        "frames.rts_octets" => fr.rts_octets = num(key, value)?,
        "frames.cts_octets" => fr.cts_octets = num(key, value)?,
        "frames.ack_octets" => fr.ack_octets = num(key, value)?,
        "frames.trigger_octets" => fr.trigger_octets = num(key, value)?,
        "frames.retry_limit" => fr.retry_limit = num(key, value)?,
        "pathloss.exponent" => pl.exponent = num(key, value)?,
        "pathloss.wall_db_per_m" => pl.wall_db_per_m = num(key, value)?,
        "pathloss.shadowing_sigma_db" => pl.shadowing_sigma_db = num(key, value)?,
        "pathloss.shadowing" => {
            pl.shadowing = choice(key, value, &[("margin", ShadowingMode::Margin), ("lognormal", ShadowingMode::Lognormal)])?
        }
        "pathloss.reference_loss_db" => pl.reference_loss_db = num(key, value)?,
        "pathloss.frequency_ghz" => pl.frequency_ghz = num(key, value)?,
        "model.damping" => m.damping = num(key, value)?,
        "model.tolerance" => m.tolerance = num(key, value)?,
        "model.max_iterations" => m.max_iterations = num(key, value)?,
        "model.hidden_form" => {
            m.hidden_form = choice(key, value, &[("product", HiddenForm::Product), ("literal", HiddenForm::Literal)])?
        }
        "model.idle_counts" => {
            m.idle_counts = choice(key, value, &[("per-class", IdleCounts::PerClass), ("single", IdleCounts::Single)])?
        }
        "mac.mu_txop_sharing" => cfg.mac.mu_txop_sharing = boolean(key, value)?,
        "mac.ap_triggers" => cfg.mac.ap_triggers = boolean(key, value)?,
        "mac.trigger_update_ms" => cfg.mac.trigger_update_us = ms_to_us(num(key, value)?),
        "mac.he_fraction" => cfg.mac.he_fraction = num(key, value)?,
        "sta_count" => cfg.sta_count = num(key, value)?,
        "run_duration_s" => cfg.run_duration_us = (num::<f64>(key, value)? * 1e6).round() as u64,
        "run_count" => cfg.run_count = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        "nav_policy" => {
            cfg.nav_policy = choice(key, value, &[("intra-bss-only", NavPolicy::IntraBssOnly), ("legacy", NavPolicy::Legacy)])?
        }
        "topology_mode" => {
            cfg.topology_mode = choice(
                key,
                value,
                &[("random-with-hidden", TopologyMode::RandomWithHidden), ("complete-graph", TopologyMode::CompleteGraph)],
            )?
        }
        "placement_radius_m" => cfg.placement_radius_m = num(key, value)?,
        "cw_plus_one" => cfg.cw_plus_one = boolean(key, value)?,
        "rate_is_per_sta" => cfg.rate_is_per_sta = boolean(key, value)?,
        _ => return Err(Error::UnknownKey(key.to_string())),
    }
    Ok(())
}

/// Every key with its current value, in a fixed order.
pub fn entries(cfg: &SimConfig) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| out.push((k.to_string(), v));
    let phy = &cfg.phy;
    put("phy.slot_us", phy.slot_us.to_string());
    put("phy.sifs_us", phy.sifs_us.to_string());
    put("phy.difs_us", phy.difs_us.to_string());
    put("phy.header_min_us", phy.phy_header_min_us.to_string());
    put("phy.header_max_us", phy.phy_header_max_us.to_string());
    put("phy.ofdm_symbol_us", phy.ofdm_symbol_us.to_string());
    put("phy.bits_per_symbol", phy.bits_per_symbol.to_string());
    put("phy.bandwidth_mhz", phy.bandwidth_mhz.to_string());
    put("phy.subcarriers", phy.subcarriers.to_string());
    put("phy.ber", phy.ber.to_string());
    put("phy.tx_power_dbm", phy.tx_power_dbm.to_string());
    put("phy.csth_operational_dbm", phy.csth_operational_dbm.to_string());
    put("phy.csth_association_dbm", phy.csth_association_dbm.to_string());
    put("phy.antennas", phy.antennas.to_string());
    let fr = &cfg.frames;
    put("frames.mpdu_octets", fr.mpdu_octets.to_string());
    put("frames.mac_header_octets", fr.mac_header_octets.to_string());
    put("frames.rts_octets", fr.rts_octets.to_string());
    put("frames.cts_octets", fr.cts_octets.to_string());
    put("frames.ack_octets", fr.ack_octets.to_string());
    put("frames.trigger_octets", fr.trigger_octets.to_string());
    put("frames.retry_limit", fr.retry_limit.to_string());
    for (k, ac) in cfg.ac.iter().enumerate().take(AC_COUNT) {
        put(&format!("ac{k}.aifsn"), ac.aifsn.to_string());
        put(&format!("ac{k}.cw_min"), ac.cw_min.to_string());
        put(&format!("ac{k}.max_stage"), ac.max_stage.to_string());
        put(&format!("ac{k}.txop_limit_us"), ac.txop_limit_us.to_string());
        put(&format!("ac{k}.arrival_rate_pps"), ac.arrival_rate.to_string());
    }
    let pl = &cfg.pathloss;
    put("pathloss.exponent", pl.exponent.to_string());
    put("pathloss.wall_db_per_m", pl.wall_db_per_m.to_string());
    put("pathloss.shadowing_sigma_db", pl.shadowing_sigma_db.to_string());
    put(
        "pathloss.shadowing",
        match pl.shadowing {
            ShadowingMode::Margin => "margin",
            ShadowingMode::Lognormal => "lognormal",
        }
        .into(),
    );
    put("pathloss.reference_loss_db", pl.reference_loss_db.to_string());
    put("pathloss.frequency_ghz", pl.frequency_ghz.to_string());
    let m = &cfg.model;
    put("model.damping", m.damping.to_string());
    put("model.tolerance", m.tolerance.to_string());
    put("model.max_iterations", m.max_iterations.to_string());
    put(
        "model.hidden_form",
        match m.hidden_form {
            HiddenForm::Product => "product",
            HiddenForm::Literal => "literal",
        }
        .into(),
    );
    put(
        "model.idle_counts",
        match m.idle_counts {
            IdleCounts::PerClass => "per-class",
            IdleCounts::Single => "single",
        }
        .into(),
    );
    put("mac.mu_txop_sharing", cfg.mac.mu_txop_sharing.to_string());
    put("mac.ap_triggers", cfg.mac.ap_triggers.to_string());
    put("mac.trigger_update_ms", (cfg.mac.trigger_update_us as f64 / 1e3).to_string());
    put("mac.he_fraction", cfg.mac.he_fraction.to_string());
    put("sta_count", cfg.sta_count.to_string());
    put("run_duration_s", (cfg.run_duration_us as f64 / 1e6).to_string());
    put("run_count", cfg.run_count.to_string());
    put("seed", cfg.seed.to_string());
    put(
        "nav_policy",
        match cfg.nav_policy {
            NavPolicy::IntraBssOnly => "intra-bss-only",
            NavPolicy::Legacy => "legacy",
        }
        .into(),
    );
    put(
        "topology_mode",
        match cfg.topology_mode {
            TopologyMode::RandomWithHidden => "random-with-hidden",
            TopologyMode::CompleteGraph => "complete-graph",
        }
        .into(),
    );
    put("placement_radius_m", cfg.placement_radius_m.to_string());
    put("cw_plus_one", cfg.cw_plus_one.to_string());
    put("rate_is_per_sta", cfg.rate_is_per_sta.to_string());
    out
}

/// Canonical text form; parses back to the same config.
pub fn to_text(cfg: &SimConfig) -> String {
    entries(cfg)
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

/// Short stable digest of the canonical text, used in output file names.
pub fn config_hash(cfg: &SimConfig) -> String {
    let digest = Sha256::digest(to_text(cfg).as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

fn ac_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("ac")?;
    let (idx, field) = rest.split_once('.')?;
    let idx: usize = idx.parse().ok()?;
    (idx < AC_COUNT).then_some((idx, field))
}

fn ms_to_us(ms: f64) -> u64 {
    (ms * 1e3).round() as u64
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{value}`")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got `{value}`"))),
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
            Error::InvalidConfig(format!("{key}: expected one of {}, got `{value}`", names.join("|")))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_config;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# table overrides\n\nphy.slot_us = 10  # longer slot\nac3.aifsn=3\n";
        let cfg = parse(text, default_config()).unwrap();
        assert_eq!(cfg.phy.slot_us, 10);
        assert_eq!(cfg.ac[3].aifsn, 3);
        assert_eq!(cfg.ac[2].aifsn, 3);
    }

    #[test]
    fn unknown_key_is_error() {
        let err = parse("phy.slot=9\n", default_config()).unwrap_err();
        assert!(matches!(err, Error::UnknownKey(k) if k == "phy.slot"));
        assert!(matches!(
            parse("ac4.aifsn=2\n", default_config()),
            Err(Error::UnknownKey(_))
        ));
    }

    #[test]
    fn bad_value_reports_line() {
        let err = parse("\nseed=abc\n", default_config()).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 2, .. }));
        let err = parse("seed\n", default_config()).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }));
    }

    #[test]
    fn enum_keys() {
        let cfg = parse(
            "nav_policy=legacy\ntopology_mode=complete-graph\nmodel.hidden_form=literal\npathloss.shadowing=lognormal\n",
            default_config(),
        )
        .unwrap();
        assert_eq!(cfg.nav_policy, NavPolicy::Legacy);
        assert_eq!(cfg.topology_mode, TopologyMode::CompleteGraph);
        assert_eq!(cfg.model.hidden_form, HiddenForm::Literal);
        assert_eq!(cfg.pathloss.shadowing, ShadowingMode::Lognormal);
    }

    #[test]
    fn hash_changes_with_config() {
        let a = default_config();
        let mut b = default_config();
        b.seed = 2;
        assert_eq!(config_hash(&a), config_hash(&default_config()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 8);
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(
            slot in 1u64..50,
            ber in 0.0f64..0.01,
            rate in 0.0f64..5000.0,
            csth in -95.0f64..-60.0,
            seed in any::<u64>(),
            legacy in any::<bool>(),
        ) {
            let mut cfg = default_config();
            cfg.phy.slot_us = slot;
            cfg.phy.ber = ber;
            cfg.ac[1].arrival_rate = rate;
            cfg.phy.csth_association_dbm = csth;
            cfg.seed = seed;
            if legacy {
                cfg.nav_policy = NavPolicy::Legacy;
            }
            let back = parse(&to_text(&cfg), default_config()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
