//! Node placement, indoor path loss, hearing relations and hidden-node
//! accounting.
//!
//! The AP sits at the origin and is node 0; STAs are nodes `1..=sta_count`.
//! A STA belongs to the BSS when its link budget to the AP clears the
//! association CSTH. In-run carrier sensing always uses the operational
//! CSTH, so a raised association threshold only shrinks the footprint of
//! the BSS.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{SimConfig, TopologyMode};
use crate::AC_COUNT;

/// Shortest distance used for loss computations; co-located nodes are
/// treated as one metre apart.
pub const MIN_DISTANCE_M: f64 = 1.0;

const MAX_PLACEMENT_ATTEMPTS_PER_STA: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShadowingMode {
    /// Every link carries a fixed loss of `shadowing_sigma_db`.
    Margin,
    /// Zero-mean Gaussian in dB, one draw per unordered node pair.
    Lognormal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathLossParams {
    pub exponent: f64,
    pub wall_db_per_m: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing: ShadowingMode,
    /// Loss at 1 m.
    pub reference_loss_db: f64,
    pub frequency_ghz: f64,
}

impl PathLossParams {
    /// Shadowing applied when a link's sample is not random.
    pub fn fixed_shadow_db(&self) -> f64 {
        match self.shadowing {
            ShadowingMode::Margin => self.shadowing_sigma_db,
            ShadowingMode::Lognormal => 0.0,
        }
    }
}

/// Free-space loss at 1 m for a carrier in GHz.
pub fn free_space_reference_db(frequency_ghz: f64) -> f64 {
    const C: f64 = 299_792_458.0;
    20.0 * (4.0 * PI * frequency_ghz * 1e9 / C).log10()
}

/// `reference + 10 n log10(d) + wall * d + shadow`.
pub fn pathloss_db(distance_m: f64, params: &PathLossParams, shadow_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::NonPositiveDistance(distance_m));
    }
    Ok(params.reference_loss_db
        + 10.0 * params.exponent * distance_m.log10()
        + params.wall_db_per_m * distance_m
        + shadow_db)
}

/// Largest distance whose unshadowed loss fits in `tx_power - csth`,
/// by bisection to 1 mm.
pub fn max_range_m(tx_power_dbm: f64, csth_dbm: f64, params: &PathLossParams) -> Result<f64> {
    range_for_budget(tx_power_dbm - csth_dbm, params, 0.0)
}

/// Like [`max_range_m`] but with the fixed shadowing of the params applied,
/// i.e. the distance at which a deterministic link stops clearing `csth`.
pub fn link_range_m(tx_power_dbm: f64, csth_dbm: f64, params: &PathLossParams) -> Result<f64> {
    range_for_budget(tx_power_dbm - csth_dbm, params, params.fixed_shadow_db())
}

fn range_for_budget(budget_db: f64, params: &PathLossParams, shadow_db: f64) -> Result<f64> {
    let reference_db = params.reference_loss_db + shadow_db;
    if budget_db < reference_db {
        return Err(Error::ZeroRange {
            budget_db,
            reference_db,
        });
    }
    let loss = |d: f64| pathloss_db(d, params, shadow_db).expect("positive distance");
    let mut lo = 1e-9;
    let mut hi = 1.0;
    while loss(hi) <= budget_db {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if loss(mid) <= budget_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Serialize)]
pub struct Topology {
    /// Node positions in metres; index 0 is the AP.
    pub positions: Vec<(f64, f64)>,
    /// `hearing[a][b]`: a transmission by `a` is sensed at `b`. Symmetric.
    pub hearing: Vec<Vec<bool>>,
    /// BSS identifier of every node. A single BSS has id 0.
    pub bss_of: Vec<u32>,
    /// Node ids of associated STAs.
    pub bss_members: Vec<usize>,
    /// Whether each STA carries traffic of class `k`.
    pub class_active: [bool; AC_COUNT],
    /// `N_{k,h}` per STA (indexed by STA, i.e. node id - 1).
    pub hidden_counts: Vec<[u32; AC_COUNT]>,
    /// `N_{k,t}` per STA.
    pub in_range_counts: Vec<[u32; AC_COUNT]>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn sta_count(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn hears(&self, from: usize, at: usize) -> bool {
        self.hearing[from][at]
    }

    /// Number of other BSS members a STA cannot hear.
    pub fn hidden_nodes_of(&self, sta_node: usize) -> usize {
        self.bss_members
            .iter()
            .filter(|&&o| o != sta_node && !self.hearing[o][sta_node])
            .count()
    }

    /// Mean per-class counts over STAs, as real numbers for the analytic model.
    pub fn mean_counts(&self) -> ([f64; AC_COUNT], [f64; AC_COUNT]) {
        let n = self.hidden_counts.len().max(1) as f64;
        let mut t = [0.0; AC_COUNT];
        let mut h = [0.0; AC_COUNT];
        for (ht, tt) in self.hidden_counts.iter().zip(&self.in_range_counts) {
            for k in 0..AC_COUNT {
                h[k] += f64::from(ht[k]) / n;
                t[k] += f64::from(tt[k]) / n;
            }
        }
        (t, h)
    }

    /// CSV with `node_id,x_m,y_m,heard_by_ap,hidden_count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,x_m,y_m,heard_by_ap,hidden_count\n");
        for (id, (x, y)) in self.positions.iter().enumerate() {
            let (heard, hidden) = if id == 0 {
                (true, 0)
            } else {
                (self.hearing[id][0], self.hidden_nodes_of(id))
            };
            let _ = writeln!(s, "{id},{x:.3},{y:.3},{},{hidden}", u8::from(heard));
        }
        s
    }

    /// Build a topology directly from positions and a hearing matrix.
    /// All STAs are BSS members; counts are recomputed.
    pub fn from_parts(
        positions: Vec<(f64, f64)>,
        hearing: Vec<Vec<bool>>,
        class_active: [bool; AC_COUNT],
    ) -> Self {
        let n = positions.len();
        let mut t = Topology {
            positions,
            hearing,
            bss_of: vec![0; n],
            bss_members: (1..n).collect(),
            class_active,
            hidden_counts: Vec::new(),
            in_range_counts: Vec::new(),
        };
        let (h, r) = hidden_counts(&t);
        t.hidden_counts = h;
        t.in_range_counts = r;
        t
    }
}

/// Drop STAs in the placement disc until `sta_count` of them associate,
/// then derive the hearing graph under the operational CSTH.
pub fn build_topology<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Topology> {
    let pl = &cfg.pathloss;
    let phy = &cfg.phy;
    let n = cfg.sta_count;
    let class_active: [bool; AC_COUNT] = std::array::from_fn(|k| cfg.per_sta_rate(k) > 0.0);

    let shadow_dist = Normal::new(0.0, pl.shadowing_sigma_db.max(0.0))
        .map_err(|e| Error::InvalidConfig(format!("shadowing: {e}")))?;
    let draw_shadow = |rng: &mut R| match pl.shadowing {
        ShadowingMode::Margin => pl.shadowing_sigma_db,
        ShadowingMode::Lognormal => shadow_dist.sample(rng),
    };

    let complete = cfg.topology_mode == TopologyMode::CompleteGraph;
    let radius = if complete {
        0.5 * link_range_m(phy.tx_power_dbm, phy.csth_operational_dbm, pl)?
    } else {
        cfg.placement_radius_m
    };

    let mut positions = vec![(0.0, 0.0)];
    let mut ap_shadow = vec![0.0];
    let cap = MAX_PLACEMENT_ATTEMPTS_PER_STA * n;
    let mut attempts = 0;
    while positions.len() <= n {
        if attempts >= cap {
            return Err(Error::PlacementFailed {
                placed: positions.len() - 1,
                wanted: n,
                attempts,
            });
        }
        attempts += 1;
        let r = radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        let shadow = draw_shadow(rng);
        if complete {
            positions.push((r * theta.cos(), r * theta.sin()));
            ap_shadow.push(shadow);
            continue;
        }
        let loss = pathloss_db(r.max(MIN_DISTANCE_M), pl, shadow)?;
        if phy.tx_power_dbm - loss >= phy.csth_association_dbm {
            positions.push((r * theta.cos(), r * theta.sin()));
            ap_shadow.push(shadow);
        }
    }

    let nodes = n + 1;
    let mut hearing = vec![vec![false; nodes]; nodes];
    for a in 0..nodes {
        for b in (a + 1)..nodes {
            let heard = if complete {
                true
            } else {
                let shadow = if a == 0 { ap_shadow[b] } else { draw_shadow(rng) };
                let d = distance(positions[a], positions[b]).max(MIN_DISTANCE_M);
                phy.tx_power_dbm - pathloss_db(d, pl, shadow)? >= phy.csth_operational_dbm
            };
            hearing[a][b] = heard;
            hearing[b][a] = heard;
        }
    }

    let mut topo = Topology {
        positions,
        hearing,
        bss_of: vec![0; nodes],
        bss_members: (1..nodes).collect(),
        class_active,
        hidden_counts: Vec::new(),
        in_range_counts: Vec::new(),
    };
    let (h, t) = hidden_counts(&topo);
    topo.hidden_counts = h;
    topo.in_range_counts = t;
    Ok(topo)
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Per-STA, per-class counts of hidden (`N_{k,h}`) and in-range (`N_{k,t}`)
/// BSS members.
pub fn hidden_counts(topo: &Topology) -> (Vec<[u32; AC_COUNT]>, Vec<[u32; AC_COUNT]>) {
    let mut hidden = Vec::with_capacity(topo.sta_count());
    let mut in_range = Vec::with_capacity(topo.sta_count());
    for s in 1..topo.node_count() {
        let mut h = [0u32; AC_COUNT];
        let mut t = [0u32; AC_COUNT];
        for &o in topo.bss_members.iter().filter(|&&o| o != s) {
            for k in (0..AC_COUNT).filter(|&k| topo.class_active[k]) {
                if topo.hearing[o][s] {
                    t[k] += 1;
                } else {
                    h[k] += 1;
                }
            }
        }
        hidden.push(h);
        in_range.push(t);
    }
    (hidden, in_range)
}

/// Mean number of hidden STAs seen by a BSS member.
pub fn mean_hidden_per_sta(topo: &Topology) -> Result<f64> {
    if topo.bss_members.is_empty() {
        return Err(Error::EmptyBss);
    }
    let total: usize = topo
        .bss_members
        .iter()
        .map(|&s| topo.hidden_nodes_of(s))
        .sum();
    Ok(total as f64 / topo.bss_members.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_config;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> PathLossParams {
        default_config().pathloss
    }

    #[test]
    fn loss_at_one_metre() {
        let p = params();
        let l = pathloss_db(1.0, &p, 0.0).unwrap();
        assert!((l - (p.reference_loss_db + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn loss_at_ten_metres() {
        let p = params();
        let l = pathloss_db(10.0, &p, 0.0).unwrap();
        assert!((l - (p.reference_loss_db + 20.0 + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn loss_is_monotone_and_rejects_zero() {
        let p = params();
        assert!(pathloss_db(30.0, &p, 0.0).unwrap() > pathloss_db(10.0, &p, 0.0).unwrap());
        assert!(matches!(
            pathloss_db(0.0, &p, 0.0),
            Err(Error::NonPositiveDistance(_))
        ));
        assert!(pathloss_db(-3.0, &p, 0.0).is_err());
    }

    #[test]
    fn free_space_reference_at_5ghz() {
        assert!((free_space_reference_db(5.0) - 46.42).abs() < 0.01);
    }

    /// Independent oracle: scan distances on a 1 mm grid.
    fn range_by_scan(budget: f64, p: &PathLossParams) -> f64 {
        let mut d = 0.001;
        while pathloss_db(d + 0.001, p, 0.0).unwrap() <= budget {
            d += 0.001;
        }
        d
    }

    #[test]
    fn range_matches_scan_oracle() {
        let p = params();
        let d82 = max_range_m(23.0, -82.0, &p).unwrap();
        assert!((d82 - range_by_scan(105.0, &p)).abs() < 0.01);
        let d73 = max_range_m(23.0, -73.0, &p).unwrap();
        assert!(d73 < d82);
        assert!((pathloss_db(d82, &p, 0.0).unwrap() - 105.0).abs() < 0.1);
    }

    #[test]
    fn free_space_intercept_gives_thirty_metre_cell_at_minus_73() {
        let mut p = params();
        p.reference_loss_db = free_space_reference_db(5.0);
        let d = link_range_m(23.0, -73.0, &p).unwrap();
        assert!((25.0..=35.0).contains(&d), "{d}");
    }

    #[test]
    fn zero_range_error() {
        let p = params();
        assert!(matches!(
            max_range_m(23.0, 23.0 - p.reference_loss_db + 1.0, &p),
            Err(Error::ZeroRange { .. })
        ));
    }

    #[test]
    fn topology_is_deterministic() {
        let cfg = default_config();
        let a = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.hearing, b.hearing);
        assert_eq!(a.bss_members.len(), 24);
    }

    #[test]
    fn raised_association_csth_keeps_members_close() {
        let mut cfg = default_config();
        cfg.phy.csth_association_dbm = -73.0;
        let range = link_range_m(23.0, -73.0, &cfg.pathloss).unwrap();
        let t = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(t.bss_members.len(), 24);
        for &s in &t.bss_members {
            let (x, y) = t.positions[s];
            assert!(x.hypot(y) <= range + 1e-9);
        }
        let unshadowed = max_range_m(23.0, -73.0, &cfg.pathloss).unwrap();
        assert!(range < unshadowed);
    }

    #[test]
    fn members_hear_and_are_heard_by_ap() {
        for mode in [ShadowingMode::Margin, ShadowingMode::Lognormal] {
            let mut cfg = default_config();
            cfg.pathloss.shadowing = mode;
            let t = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            for &s in &t.bss_members {
                assert!(t.hears(s, 0) && t.hears(0, s));
            }
        }
    }

    #[test]
    fn complete_graph_has_no_hidden_nodes() {
        let mut cfg = default_config();
        cfg.topology_mode = TopologyMode::CompleteGraph;
        let t = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(t.hidden_counts.iter().all(|h| h.iter().all(|&c| c == 0)));
        assert_eq!(mean_hidden_per_sta(&t).unwrap(), 0.0);
    }

    #[test]
    fn counts_partition_other_members() {
        let cfg = default_config();
        let t = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        for (h, r) in t.hidden_counts.iter().zip(&t.in_range_counts) {
            for k in 0..AC_COUNT {
                assert_eq!(h[k] + r[k], 23);
            }
        }
    }

    fn line_topology() -> Topology {
        // A - AP - C, A and C out of mutual range.
        let hearing = vec![
            vec![false, true, true],
            vec![true, false, false],
            vec![true, false, false],
        ];
        Topology::from_parts(vec![(0.0, 0.0), (-10.0, 0.0), (10.0, 0.0)], hearing, [true; 4])
    }

    #[test]
    fn line_of_three_hides_the_ends() {
        let t = line_topology();
        assert_eq!(t.hidden_counts, vec![[1; 4], [1; 4]]);
        assert_eq!(t.hidden_nodes_of(1), 1);
        assert_eq!(mean_hidden_per_sta(&t).unwrap(), 1.0);
    }

    #[test]
    fn inactive_classes_are_not_counted() {
        let t = Topology::from_parts(
            line_topology().positions,
            line_topology().hearing,
            [false, false, true, true],
        );
        assert_eq!(t.hidden_counts[0], [0, 0, 1, 1]);
    }

    #[test]
    fn empty_bss_is_error() {
        let t = Topology::from_parts(vec![(0.0, 0.0)], vec![vec![false]], [true; 4]);
        assert!(matches!(mean_hidden_per_sta(&t), Err(Error::EmptyBss)));
    }

    #[test]
    fn default_geometry_sees_about_four_hidden_nodes() {
        let cfg = default_config();
        let mean: f64 = (0..20)
            .map(|s| {
                let t = build_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
                mean_hidden_per_sta(&t).unwrap()
            })
            .sum::<f64>()
            / 20.0;
        assert!((mean - 4.0).abs() <= 1.5, "{mean}");
    }

    #[test]
    fn csv_dump() {
        let csv = line_topology().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("node_id,x_m,y_m,heard_by_ap,hidden_count"));
        assert_eq!(lines.next(), Some("0,0.000,0.000,1,0"));
        assert_eq!(lines.next(), Some("1,-10.000,0.000,1,1"));
    }
}
