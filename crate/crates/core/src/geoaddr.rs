//! Geographic address resolution.
//!
//! The ground is cut into 3x3 degree areas between -87 and +87 degrees of
//! latitude plus two polar caps: 58 bands x 120 cells + 2 = 6962 areas,
//! representable in 13 bits. Terminal addresses pack the area id with a
//! 19-bit local identifier into 32 bits. The per-cluster geographic switching
//! table maps destination areas to an exit direction on the cluster grid,
//! never selecting the cross-seam neighbor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterId, ClusterMap, Direction};
use crate::orbit::{
    distance_km, ground_ecef_km, normalize_lon_deg, sat_ecef_km, ConstellationConfig, SatId,
};

pub const LAT_LIMIT_DEG: f64 = 87.0;
pub const CELL_DEG: f64 = 3.0;
pub const BANDS: usize = 58;
pub const CELLS_PER_BAND: usize = 120;
pub const SOUTH_CAP: u16 = (BANDS * CELLS_PER_BAND) as u16; // 6960
pub const NORTH_CAP: u16 = SOUTH_CAP + 1; // 6961
pub const AREA_COUNT: usize = BANDS * CELLS_PER_BAND + 2; // 6962
pub const AREA_BITS: u32 = 13;
pub const LOCAL_BITS: u32 = 19;

/// 13-bit geographic area identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AreaId(pub u16);

impl AreaId {
    pub fn is_cap(self) -> bool {
        self.0 >= SOUTH_CAP
    }
}

/// Area of a ground coordinate. Total over all valid coordinates.
pub fn area_of(lat_deg: f64, lon_deg: f64) -> AreaId {
    let lat = lat_deg.clamp(-90.0, 90.0);
    if lat >= LAT_LIMIT_DEG {
        return AreaId(NORTH_CAP);
    }
    if lat <= -LAT_LIMIT_DEG {
        return AreaId(SOUTH_CAP);
    }
    let lon = normalize_lon_deg(lon_deg);
    let band = (((lat + LAT_LIMIT_DEG) / CELL_DEG) as usize).min(BANDS - 1);
    let cell = (((lon + 180.0) / CELL_DEG) as usize).min(CELLS_PER_BAND - 1);
    AreaId((band * CELLS_PER_BAND + cell) as u16)
}

/// Geometric center of an area; the caps return the poles.
pub fn area_centroid(area: AreaId) -> (f64, f64) {
    if area.0 == NORTH_CAP {
        return (90.0, 0.0);
    }
    if area.0 == SOUTH_CAP {
        return (-90.0, 0.0);
    }
    let band = (area.0 as usize) / CELLS_PER_BAND;
    let cell = (area.0 as usize) % CELLS_PER_BAND;
    (
        -LAT_LIMIT_DEG + band as f64 * CELL_DEG + CELL_DEG / 2.0,
        -180.0 + cell as f64 * CELL_DEG + CELL_DEG / 2.0,
    )
}

/// 32-bit terminal address: 13-bit area, 19-bit local id. The area part is
/// mutable: it follows the terminal's geographic cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TerminalAddress(pub u32);

impl TerminalAddress {
    pub fn new(area: AreaId, local: u32) -> Self {
        debug_assert!(local < (1 << LOCAL_BITS));
        Self(((area.0 as u32) << LOCAL_BITS) | (local & ((1 << LOCAL_BITS) - 1)))
    }

    pub fn area(self) -> AreaId {
        AreaId((self.0 >> LOCAL_BITS) as u16)
    }

    pub fn local(self) -> u32 {
        self.0 & ((1 << LOCAL_BITS) - 1)
    }
}

impl std::fmt::Display for TerminalAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.area().0, self.local())
    }
}

/// Area-to-serving-cluster summary shared by all controllers at an update
/// epoch. Computable by every controller from handover announcements and the
/// deterministic seam schedule; areas without attached terminals fall back
/// to the geometric owner cluster on demand.
#[derive(Debug, Clone, Default)]
pub struct AreaSummary {
    /// Serving clusters per area, ascending, deduplicated.
    pub serving: BTreeMap<u16, Vec<ClusterId>>,
}

impl AreaSummary {
    pub fn targets(&self, area: AreaId) -> &[ClusterId] {
        self.serving.get(&area.0).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Cluster of the satellite nearest to the area centroid (the satellite a
/// hypothetical terminal at the centroid would see at the highest elevation).
pub fn geometric_owner(
    config: &ConstellationConfig,
    map: &ClusterMap,
    sat_ecef: &[[f64; 3]],
    area: AreaId,
) -> ClusterId {
    let (lat, lon) = area_centroid(area);
    let ground = ground_ecef_km(config, lat, lon);
    let mut best = 0usize;
    let mut best_d = f64::MAX;
    for (flat, pos) in sat_ecef.iter().enumerate() {
        let d = distance_km(ground, *pos);
        if d < best_d {
            best_d = d;
            best = flat;
        }
    }
    map.sat_cluster[best]
}

/// Satellite of `cluster` nearest to the area centroid: the anchor used to
/// resolve packets inside the serving cluster when no exact entry matches.
pub fn anchor_satellite(
    config: &ConstellationConfig,
    map: &ClusterMap,
    sat_ecef: &[[f64; 3]],
    cluster: ClusterId,
    area: AreaId,
) -> SatId {
    let (lat, lon) = area_centroid(area);
    let ground = ground_ecef_km(config, lat, lon);
    let mut best = map.members[cluster.0 as usize][0];
    let mut best_d = f64::MAX;
    for &sat in &map.members[cluster.0 as usize] {
        let d = distance_km(ground, sat_ecef[sat.flat(config)]);
        if d < best_d {
            best_d = d;
            best = sat;
        }
    }
    best
}

/// Resolution of one area at one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchDecision {
    /// This cluster serves the area: resolve via exact entries, else the
    /// anchor satellite; `next_target` is the fallback serving cluster to
    /// forward to when the exact address is not known here.
    Local { next_target: Option<ClusterId> },
    /// Forward toward the serving cluster.
    Forward { dir: Direction, target: ClusterId },
}

/// Leading walk axis at one cluster of the walk: a stable hash of (area,
/// cluster) interleaves row and column legs into per-destination staircases,
/// spreading the turn points of transit paths over many planes and rows.
/// Every controller computes the same value, and each step still reduces
/// the grid distance, so walks stay loop-free and minimal.
pub fn rows_first(area: AreaId, at: ClusterId) -> bool {
    let mut x = (area.0 as u64) << 8 | at.0 as u64;
    x = x.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 31;
    x & 1 == 0
}

/// Resolve the switching decision of `cluster` for `area`.
///
/// Targets come from the summary; an area nobody serves falls back to
/// `owner`. The walk heads for the nearest target (ties to the lowest
/// cluster id) and never crosses the seam.
pub fn switch_decision(
    map: &ClusterMap,
    area: AreaId,
    summary_targets: &[ClusterId],
    owner: impl FnOnce() -> ClusterId,
    cluster: ClusterId,
) -> SwitchDecision {
    let owned_targets: [ClusterId; 1];
    let targets: &[ClusterId] = if summary_targets.is_empty() {
        owned_targets = [owner()];
        &owned_targets
    } else {
        summary_targets
    };
    if let Some(pos) = targets.iter().position(|&t| t == cluster) {
        // Unresolved local packets cycle through the remaining serving
        // clusters; the ordering is global, so the walk visits each at most
        // once before reaching the cluster holding the exact entry.
        let next_target = (targets.len() > 1).then(|| targets[(pos + 1) % targets.len()]);
        return SwitchDecision::Local { next_target };
    }
    let target = *targets
        .iter()
        .min_by_key(|&&t| (map.grid_distance(cluster, t), t.0))
        .expect("non-empty targets");
    let dir = map
        .direction_toward_pref(cluster, target, rows_first(area, cluster))
        .expect("cluster != target");
    SwitchDecision::Forward { dir, target }
}

/// Deterministic schedule of the instants at which the seam ground track
/// enters a new 3-degree area column, over `[0, duration_s]`.
///
/// The seam plane cuts the ground along two meridians that drift westward
/// with Earth rotation; every controller can compute the schedule from the
/// constellation config alone. Affected areas are the non-cap areas of the
/// entered column.
pub fn seam_epoch_schedule(
    config: &ConstellationConfig,
    duration_s: f64,
) -> Vec<(f64, Vec<AreaId>)> {
    let mut events = Vec::new();
    let rate_deg_s = config.earth_rotation_rad_s.to_degrees(); // westward drift
    for meridian in [seam_longitude_deg(config, 0.0), seam_longitude_deg(config, 0.0) - 180.0] {
        // A column flips side when the meridian crosses its centroid
        // (centroids sit at -178.5 + 3k).
        let offset = (meridian + 178.5).rem_euclid(CELL_DEG);
        let mut t = offset / rate_deg_s;
        while t <= duration_s {
            let lon = normalize_lon_deg(meridian - rate_deg_s * t);
            let cell = (((lon + 180.0) / CELL_DEG) as usize).min(CELLS_PER_BAND - 1);
            let areas = (0..BANDS)
                .map(|band| AreaId((band * CELLS_PER_BAND + cell) as u16))
                .collect();
            events.push((t, areas));
            t += CELL_DEG / rate_deg_s;
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

/// Longitude of one seam meridian at time `t_s`: the middle of the gap
/// between the ascending side of the last plane and the descending side of
/// plane 0. The other meridian sits 180 degrees away.
pub fn seam_longitude_deg(config: &ConstellationConfig, t_s: f64) -> f64 {
    let last_raan = (config.num_planes - 1) as f64 * config.co_rotating_spacing_deg;
    let gap_mid = (last_raan + 180.0) / 2.0;
    normalize_lon_deg(gap_mid - config.earth_rotation_rad_s.to_degrees() * t_s)
}

/// True if the short-way longitude arc between two points crosses either
/// seam meridian at time `t_s`.
pub fn crosses_seam(config: &ConstellationConfig, t_s: f64, lon_a: f64, lon_b: f64) -> bool {
    let seam = seam_longitude_deg(config, t_s);
    let crosses = |m: f64| {
        let da = normalize_lon_deg(lon_a - m);
        let db = normalize_lon_deg(lon_b - m);
        // Opposite sides and short way through the meridian.
        da.signum() != db.signum() && (da - db).abs() < 180.0
    };
    crosses(seam) || crosses(normalize_lon_deg(seam - 180.0))
}

/// True when the longitude lies on the ascending-plane side of the seam
/// (the half between the antipodal meridian and the seam meridian).
pub fn ascending_side(config: &ConstellationConfig, t_s: f64, lon_deg: f64) -> bool {
    let seam = seam_longitude_deg(config, t_s);
    let d = (seam - lon_deg).rem_euclid(360.0);
    d > 0.0 && d <= 180.0
}

/// Distance in longitude to the nearest seam meridian, degrees.
pub fn seam_distance_deg(config: &ConstellationConfig, t_s: f64, lon_deg: f64) -> f64 {
    let seam = seam_longitude_deg(config, t_s);
    let d = normalize_lon_deg(lon_deg - seam).abs();
    d.min(180.0 - d)
}

/// Seam side every terminal of an area must attach on: the side of the cell
/// centroid. Keeping whole cells coherent is what lets the scheduled seam
/// epochs switch them over without per-terminal signaling.
pub fn assigned_ascending_side(config: &ConstellationConfig, t_s: f64, area: AreaId) -> bool {
    let (_, lon) = area_centroid(area);
    ascending_side(config, t_s, lon)
}

/// All satellite ECEF positions at one instant, in flat order. Shared input
/// of the owner/anchor helpers.
pub fn all_sat_ecef(config: &ConstellationConfig, t_s: f64) -> Vec<[f64; 3]> {
    (0..config.num_sats())
        .map(|flat| sat_ecef_km(config, SatId::from_flat(config, flat), t_s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::build_cluster_map;

    #[test]
    fn area_count_is_exact() {
        let mut seen = vec![false; AREA_COUNT];
        let mut lat = -90.0;
        while lat <= 90.0 {
            let mut lon = -180.0;
            while lon < 180.0 {
                let a = area_of(lat, lon);
                assert!((a.0 as usize) < AREA_COUNT);
                seen[a.0 as usize] = true;
                lon += 0.5;
            }
            lat += 0.5;
        }
        assert!(seen.iter().all(|&s| s), "area_of is not surjective");
        assert!(AREA_COUNT <= 1 << AREA_BITS);
    }

    #[test]
    fn known_area_ids() {
        assert_eq!(area_of(0.0, 0.0), AreaId(3540)); // band 29, cell 60
        assert_eq!(area_of(90.0, 12.0), AreaId(NORTH_CAP));
        assert_eq!(area_of(87.0, -12.0), AreaId(NORTH_CAP));
        assert_eq!(area_of(-90.0, 55.0), AreaId(SOUTH_CAP));
        assert_eq!(area_of(-87.0, 0.0), AreaId(SOUTH_CAP));
        assert_eq!(area_of(-86.9, -180.0), AreaId(0));
    }

    #[test]
    fn centroid_round_trip() {
        for id in 0..(AREA_COUNT as u16) {
            let area = AreaId(id);
            let (lat, lon) = area_centroid(area);
            assert_eq!(area_of(lat, lon), area, "id {id} centroid ({lat},{lon})");
        }
        assert_eq!(area_centroid(AreaId(3540)), (1.5, 1.5));
        assert_eq!(area_centroid(AreaId(NORTH_CAP)), (90.0, 0.0));
    }

    #[test]
    fn same_cell_coordinates_share_id() {
        let a = area_of(10.1, 20.1);
        let b = area_of(11.9, 20.9);
        assert_eq!(a, b);
        let c = area_of(12.1, 20.1);
        assert_ne!(a, c);
    }

    #[test]
    fn address_packing() {
        let addr = TerminalAddress::new(AreaId(3540), 123_456);
        assert_eq!(addr.area(), AreaId(3540));
        assert_eq!(addr.local(), 123_456);
        let max = TerminalAddress::new(AreaId(NORTH_CAP), (1 << LOCAL_BITS) - 1);
        assert_eq!(max.area(), AreaId(NORTH_CAP));
        assert_eq!(max.local(), (1 << LOCAL_BITS) - 1);
    }

    #[test]
    fn switch_walk_reaches_targets_without_seam_crossing() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        // Exhaustive over single-target summaries: from every cluster toward
        // every possible serving cluster.
        for target in 0..30u8 {
            for start in 0..30u8 {
                let mut cur = ClusterId(start);
                let mut hops = 0;
                loop {
                    match switch_decision(&map, AreaId(17), &[ClusterId(target)], || unreachable!(), cur) {
                        SwitchDecision::Local { .. } => break,
                        SwitchDecision::Forward { dir, .. } => {
                            let next = map
                                .neighbor(cur, dir)
                                .expect("direction must never cross the seam");
                            assert!(
                                map.grid_distance(next, ClusterId(target))
                                    < map.grid_distance(cur, ClusterId(target)),
                                "no progress {cur:?} -> {next:?}"
                            );
                            cur = next;
                            hops += 1;
                            assert!(hops <= 10, "walk too long {start} -> {target}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn local_miss_cycles_through_target_list() {
        let config = ConstellationConfig::default();
        let map = build_cluster_map(&config, 6, 8).unwrap();
        let targets = [ClusterId(3), ClusterId(7)];
        match switch_decision(&map, AreaId(4), &targets, || unreachable!(), ClusterId(3)) {
            SwitchDecision::Local { next_target } => assert_eq!(next_target, Some(ClusterId(7))),
            other => panic!("expected local, got {other:?}"),
        }
        // Wraps around; a single-target list has nowhere else to go.
        match switch_decision(&map, AreaId(4), &targets, || unreachable!(), ClusterId(7)) {
            SwitchDecision::Local { next_target } => assert_eq!(next_target, Some(ClusterId(3))),
            other => panic!("expected local, got {other:?}"),
        }
        match switch_decision(&map, AreaId(4), &targets[..1], || unreachable!(), ClusterId(3)) {
            SwitchDecision::Local { next_target } => assert_eq!(next_target, None),
            other => panic!("expected local, got {other:?}"),
        }
    }

    #[test]
    fn seam_schedule_sweeps_ten_columns_in_two_hours() {
        let config = ConstellationConfig::default();
        let events = seam_epoch_schedule(&config, 7200.0);
        // Earth rotates ~30 degrees in 7200 s: ~10 columns per seam meridian.
        let near_ascending: Vec<_> = events
            .iter()
            .filter(|(t, areas)| {
                let (_, lon) = area_centroid(areas[0]);
                let seam_t = seam_longitude_deg(&config, *t);
                normalize_lon_deg(lon - seam_t).abs() < 10.0
            })
            .collect();
        assert!(
            (9..=11).contains(&near_ascending.len()),
            "expected ~10 ascending-side events, got {}",
            near_ascending.len()
        );
        // Determinism: recomputing yields the identical schedule.
        let again = seam_epoch_schedule(&config, 7200.0);
        assert_eq!(events.len(), again.len());
        for (a, b) in events.iter().zip(again.iter()) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
        // A column far from both meridians never appears.
        let far_cell = {
            let far_lon = normalize_lon_deg(seam_longitude_deg(&config, 0.0) + 90.0);
            (((far_lon + 180.0) / CELL_DEG) as usize).min(CELLS_PER_BAND - 1)
        };
        for (_, areas) in &events {
            for a in areas {
                assert_ne!((a.0 as usize) % CELLS_PER_BAND, far_cell);
            }
        }
    }

    #[test]
    fn seam_crossing_detection() {
        let config = ConstellationConfig::default();
        let seam = seam_longitude_deg(&config, 0.0);
        // At epoch, plane 29 ascends at 174 and plane 0 descends at 180: the
        // seam meridian sits inside that gap (and its antipode at -3).
        assert!(seam > 174.0 && seam < 180.0, "seam at {seam}");
        assert!(crosses_seam(&config, 0.0, seam - 1.0, seam + 1.0));
        assert!(!crosses_seam(&config, 0.0, seam + 1.0, seam + 5.0));
        // The antipodal meridian is part of the seam as well.
        let anti = normalize_lon_deg(seam - 180.0);
        assert!(crosses_seam(&config, 0.0, anti - 1.0, anti + 1.0));
    }
}
