//! Ground segment: terminal populations, satellite visibility and handovers.
//!
//! User terminals are sampled from a capped population-density grid via
//! inverse-CDF sampling over cells; gateways come from a small CSV of named
//! sites. Every active terminal holds exactly one serving satellite; a
//! make-before-break handover reassigns it before the serving elevation
//! falls below the minimum.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geoaddr::{area_of, AreaId, TerminalAddress};
use crate::orbit::{ground_ecef_km, sat_ecef_km, ConstellationConfig, SatId};

/// Bundled default gateway sites (39 campuses near major cities).
pub const DEFAULT_GATEWAYS_CSV: &str = include_str!("../data/gateways.csv");
/// Bundled synthetic population-density grid (2-degree cells).
pub const DEFAULT_DENSITY_CSV: &str = include_str!("../data/density_default.csv");

pub const DEFAULT_DENSITY_CAP: f64 = 100.0;
pub const UT_MIN_ELEVATION_DEG: f64 = 30.0;
pub const GW_MIN_ELEVATION_DEG: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalKind {
    Ut,
    Gw,
}

/// A ground entity: user terminal or gateway.
#[derive(Debug, Clone)]
pub struct Terminal {
    /// Index into the scenario terminal table.
    pub index: usize,
    pub kind: TerminalKind,
    pub name: Option<String>,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub min_elevation_deg: f64,
    pub area: AreaId,
    pub address: TerminalAddress,
    pub ecef_km: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct DensityCell {
    pub lat_min_deg: f64,
    pub lon_min_deg: f64,
    pub cell_deg: f64,
    /// Raw density, persons/km^2 (cap applied at sampling time).
    pub density: f64,
}

/// Capped population-density grid used to sample UT positions.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub cells: Vec<DensityCell>,
    pub cap: f64,
}

impl DensityGrid {
    pub fn parse_csv(text: &str, file: &str, cap: f64) -> Result<Self, ConfigError> {
        let mut cells = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if lineno == 0 && line.starts_with("lat_min") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(ConfigError::Parse {
                    file: file.to_string(),
                    line: lineno + 1,
                    reason: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64, ConfigError> {
                s.trim().parse::<f64>().map_err(|_| ConfigError::Parse {
                    file: file.to_string(),
                    line: lineno + 1,
                    reason: format!("bad {what}: {s:?}"),
                })
            };
            cells.push(DensityCell {
                lat_min_deg: parse(fields[0], "lat_min")?,
                lon_min_deg: parse(fields[1], "lon_min")?,
                cell_deg: parse(fields[2], "cell_deg")?,
                density: parse(fields[3], "density")?,
            });
        }
        if cells.is_empty() {
            return Err(ConfigError::Empty(format!("density grid {file}")));
        }
        Ok(Self { cells, cap })
    }

    /// Sampling weight of a cell: capped density times spherical cell area.
    fn weight(&self, cell: &DensityCell, earth_radius_km: f64) -> f64 {
        let lat0 = cell.lat_min_deg.to_radians();
        let lat1 = (cell.lat_min_deg + cell.cell_deg).to_radians();
        let area = earth_radius_km
            * earth_radius_km
            * cell.cell_deg.to_radians()
            * (lat1.sin() - lat0.sin()).abs();
        cell.density.min(self.cap) * area
    }

    /// Draw `n` positions i.i.d. from the capped density: inverse-CDF over
    /// cells, area-uniform inside the chosen cell.
    pub fn sample_positions(
        &self,
        config: &ConstellationConfig,
        n: usize,
        rng: &mut ChaCha12Rng,
    ) -> Vec<(f64, f64)> {
        let weights: Vec<f64> = self
            .cells
            .iter()
            .map(|c| self.weight(c, config.earth_radius_km))
            .collect();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        let total = acc;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random_range(0.0..total);
            let idx = cdf.partition_point(|&c| c < u).min(self.cells.len() - 1);
            let cell = &self.cells[idx];
            // Area-uniform inside the cell: uniform in (lon, sin lat).
            let s0 = cell.lat_min_deg.to_radians().sin();
            let s1 = (cell.lat_min_deg + cell.cell_deg).to_radians().sin();
            let lat = rng.random_range(s0.min(s1)..s0.max(s1)).asin().to_degrees();
            let lon = cell.lon_min_deg + rng.random_range(0.0..cell.cell_deg);
            out.push((lat, crate::orbit::normalize_lon_deg(lon)));
        }
        out
    }
}

/// Parse the gateway CSV (`name,lat_deg,lon_deg` with a header row).
pub fn parse_gateways(text: &str, file: &str) -> Result<Vec<(String, f64, f64)>, ConfigError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.starts_with("name") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(ConfigError::Parse {
                file: file.to_string(),
                line: lineno + 1,
                reason: format!("expected `name,lat_deg,lon_deg`, got {line:?}"),
            });
        }
        let lat = fields[1].trim().parse::<f64>().map_err(|_| ConfigError::Parse {
            file: file.to_string(),
            line: lineno + 1,
            reason: format!("bad latitude {:?}", fields[1]),
        })?;
        let lon = fields[2].trim().parse::<f64>().map_err(|_| ConfigError::Parse {
            file: file.to_string(),
            line: lineno + 1,
            reason: format!("bad longitude {:?}", fields[2]),
        })?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ConfigError::Parse {
                file: file.to_string(),
                line: lineno + 1,
                reason: format!("latitude {lat} out of range"),
            });
        }
        out.push((fields[0].trim().to_string(), lat, lon));
    }
    Ok(out)
}

/// Build the terminal table: gateways first (stable addresses), then `n_ut`
/// sampled user terminals. Local ids count up per area in table order.
pub fn build_terminals(
    config: &ConstellationConfig,
    grid: &DensityGrid,
    n_ut: usize,
    gateways: &[(String, f64, f64)],
    seed: u64,
) -> Vec<Terminal> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut terminals = Vec::with_capacity(gateways.len() + n_ut);
    let mut per_area_counter: std::collections::BTreeMap<u16, u32> = Default::default();
    let mut push = |terminals: &mut Vec<Terminal>,
                    kind: TerminalKind,
                    name: Option<String>,
                    lat: f64,
                    lon: f64,
                    min_elev: f64| {
        let area = area_of(lat, lon);
        let counter = per_area_counter.entry(area.0).or_insert(0);
        let local = *counter;
        *counter += 1;
        let index = terminals.len();
        terminals.push(Terminal {
            index,
            kind,
            name,
            lat_deg: lat,
            lon_deg: lon,
            min_elevation_deg: min_elev,
            area,
            address: TerminalAddress::new(area, local),
            ecef_km: ground_ecef_km(config, lat, lon),
        });
    };
    for (name, lat, lon) in gateways {
        push(
            &mut terminals,
            TerminalKind::Gw,
            Some(name.clone()),
            *lat,
            *lon,
            GW_MIN_ELEVATION_DEG,
        );
    }
    for (lat, lon) in grid.sample_positions(config, n_ut, &mut rng) {
        push(&mut terminals, TerminalKind::Ut, None, lat, lon, UT_MIN_ELEVATION_DEG);
    }
    terminals
}

/// Satellite geometry at one instant, indexed by flat id.
#[derive(Debug, Clone)]
pub struct SatSnapshot {
    pub time_s: f64,
    pub ecef: Vec<[f64; 3]>,
    pub lat_deg: Vec<f64>,
    pub lon_deg: Vec<f64>,
}

impl SatSnapshot {
    pub fn build(config: &ConstellationConfig, t_s: f64) -> Self {
        let n = config.num_sats();
        let mut ecef = Vec::with_capacity(n);
        let mut lat = Vec::with_capacity(n);
        let mut lon = Vec::with_capacity(n);
        for flat in 0..n {
            let pos = crate::orbit::satellite_position(config, SatId::from_flat(config, flat), t_s);
            ecef.push(pos.ecef_km);
            lat.push(pos.lat_deg);
            lon.push(pos.lon_deg);
        }
        Self {
            time_s: t_s,
            ecef,
            lat_deg: lat,
            lon_deg: lon,
        }
    }

    pub fn elevation_deg(&self, terminal: &Terminal, flat: usize) -> f64 {
        // Quick reject: the coverage cone never spans more than ~12 degrees
        // of latitude for the elevations in use.
        elevation_from_ecef_deg_raw(terminal.ecef_km, self.ecef[flat])
    }
}

fn elevation_from_ecef_deg_raw(ground: [f64; 3], sat: [f64; 3]) -> f64 {
    let gr = (ground[0] * ground[0] + ground[1] * ground[1] + ground[2] * ground[2]).sqrt();
    let up = [ground[0] / gr, ground[1] / gr, ground[2] / gr];
    let v = [sat[0] - ground[0], sat[1] - ground[1], sat[2] - ground[2]];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm == 0.0 {
        return 90.0;
    }
    ((up[0] * v[0] + up[1] * v[1] + up[2] * v[2]) / norm)
        .clamp(-1.0, 1.0)
        .asin()
        .to_degrees()
}

/// Satellites visible from a terminal, ordered by descending remaining
/// visibility (ties to the lowest flat index).
pub fn visible_satellites(
    config: &ConstellationConfig,
    snapshot: &SatSnapshot,
    terminal: &Terminal,
) -> Vec<(SatId, f64)> {
    let cone_deg = crate::orbit::coverage_central_angle_deg(config, terminal.min_elevation_deg);
    let mut out = Vec::new();
    for flat in 0..snapshot.ecef.len() {
        if (snapshot.lat_deg[flat] - terminal.lat_deg).abs() > cone_deg + 0.5 {
            continue;
        }
        if snapshot.elevation_deg(terminal, flat) >= terminal.min_elevation_deg {
            let sat = SatId::from_flat(config, flat);
            let remaining =
                remaining_visibility_s(config, terminal, sat, snapshot.time_s);
            out.push((sat, remaining));
        }
    }
    out.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.flat(config).cmp(&b.0.flat(config)))
    });
    out
}

/// Time until the satellite's elevation falls below the terminal minimum,
/// scanned on a 5 s grid and capped at 300 s.
pub fn remaining_visibility_s(
    config: &ConstellationConfig,
    terminal: &Terminal,
    sat: SatId,
    t_s: f64,
) -> f64 {
    let step = 5.0;
    let cap = 300.0;
    let mut tau = step;
    while tau <= cap {
        let pos = sat_ecef_km(config, sat, t_s + tau);
        if elevation_from_ecef_deg_raw(terminal.ecef_km, pos) < terminal.min_elevation_deg {
            return tau - step;
        }
        tau += step;
    }
    cap
}

/// Handover target selection strategy. The reference scheme picks the
/// longest remaining visibility; max-elevation is a pinning strategy used by
/// engineered test scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverStrategy {
    LongestVisibility,
    MaxElevation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverEvent {
    pub time_s: f64,
    pub terminal: usize,
    pub old: Option<SatId>,
    pub new: Option<SatId>,
}

/// Terminal-to-satellite attachment state. Only active terminals are served.
#[derive(Debug, Clone)]
pub struct ServingAssignment {
    pub serving: Vec<Option<SatId>>,
    /// Active terminal indices attached per satellite (flat), sorted.
    pub attached: Vec<Vec<u32>>,
}

impl ServingAssignment {
    pub fn new(num_terminals: usize, num_sats: usize) -> Self {
        Self {
            serving: vec![None; num_terminals],
            attached: vec![Vec::new(); num_sats],
        }
    }

    fn attach(&mut self, config: &ConstellationConfig, terminal: usize, sat: SatId) {
        let flat = sat.flat(config);
        let list = &mut self.attached[flat];
        if let Err(pos) = list.binary_search(&(terminal as u32)) {
            list.insert(pos, terminal as u32);
        }
        self.serving[terminal] = Some(sat);
    }

    fn detach(&mut self, config: &ConstellationConfig, terminal: usize, sat: SatId) {
        let flat = sat.flat(config);
        let list = &mut self.attached[flat];
        if let Ok(pos) = list.binary_search(&(terminal as u32)) {
            list.remove(pos);
        }
    }

    /// Consistency between the serving map and the per-satellite sets.
    pub fn is_consistent(&self, config: &ConstellationConfig) -> bool {
        for (term, sat) in self.serving.iter().enumerate() {
            if let Some(s) = sat {
                if self.attached[s.flat(config)]
                    .binary_search(&(term as u32))
                    .is_err()
                {
                    return false;
                }
            }
        }
        let serving_count = self.serving.iter().filter(|s| s.is_some()).count();
        let attached_count: usize = self.attached.iter().map(Vec::len).sum();
        serving_count == attached_count
    }
}

/// Seam-proximity band within which attachments are constrained to the
/// area's assigned side, degrees of longitude.
const SEAM_BAND_DEG: f64 = 12.0;

fn pick_serving(
    config: &ConstellationConfig,
    snapshot: &SatSnapshot,
    terminal: &Terminal,
    strategy: HandoverStrategy,
    exclude: Option<SatId>,
) -> Option<SatId> {
    let mut visible = visible_satellites(config, snapshot, terminal);
    // Near the seam, whole cells attach on one side so that the geographic
    // switching tables see a single serving side per area.
    let t = snapshot.time_s;
    if crate::geoaddr::seam_distance_deg(config, t, terminal.lon_deg) < SEAM_BAND_DEG {
        let want = crate::geoaddr::assigned_ascending_side(config, t, terminal.area);
        let same_side: Vec<(SatId, f64)> = visible
            .iter()
            .copied()
            .filter(|(s, _)| {
                crate::geoaddr::ascending_side(config, t, snapshot.lon_deg[s.flat(config)]) == want
            })
            .collect();
        if !same_side.is_empty() {
            visible = same_side;
        }
    }
    match strategy {
        HandoverStrategy::LongestVisibility => visible
            .iter()
            .find(|(s, _)| Some(*s) != exclude)
            .map(|(s, _)| *s),
        HandoverStrategy::MaxElevation => visible
            .iter()
            .filter(|(s, _)| Some(*s) != exclude)
            .max_by(|a, b| {
                snapshot
                    .elevation_deg(terminal, a.0.flat(config))
                    .total_cmp(&snapshot.elevation_deg(terminal, b.0.flat(config)))
                    .then_with(|| b.0.flat(config).cmp(&a.0.flat(config)))
            })
            .map(|(s, _)| *s),
    }
}

/// Advance the assignment to the movement-grid step at `t_s`. Terminals whose
/// serving elevation will fall below minimum before `next_t_s` are reassigned
/// now (make-before-break), to the strategy's best visible satellite.
pub fn handover_step(
    assignment: &mut ServingAssignment,
    config: &ConstellationConfig,
    terminals: &[Terminal],
    active: &[usize],
    snapshot: &SatSnapshot,
    next_snapshot: &SatSnapshot,
    strategy: HandoverStrategy,
) -> Vec<HandoverEvent> {
    let mut events = Vec::new();
    for &idx in active {
        let terminal = &terminals[idx];
        let current = assignment.serving[idx];
        let keeps = current.is_some_and(|sat| {
            let flat = sat.flat(config);
            snapshot.elevation_deg(terminal, flat) >= terminal.min_elevation_deg
                && next_snapshot.elevation_deg(terminal, flat) >= terminal.min_elevation_deg
        });
        if keeps {
            continue;
        }
        let new = pick_serving(config, snapshot, terminal, strategy, None);
        if new == current {
            continue;
        }
        if let Some(old) = current {
            assignment.detach(config, idx, old);
        }
        if let Some(sat) = new {
            assignment.attach(config, idx, sat);
        } else {
            assignment.serving[idx] = None;
        }
        events.push(HandoverEvent {
            time_s: snapshot.time_s,
            terminal: idx,
            old: current,
            new,
        });
    }
    events
}

/// Synchronized seam handover: all terminals of the affected areas whose
/// serving satellite is not on the cell's assigned side switch together.
pub fn seam_handover(
    assignment: &mut ServingAssignment,
    config: &ConstellationConfig,
    terminals: &[Terminal],
    active: &[usize],
    snapshot: &SatSnapshot,
    affected: &[AreaId],
    strategy: HandoverStrategy,
) -> Vec<HandoverEvent> {
    let t = snapshot.time_s;
    let mut events = Vec::new();
    for &idx in active {
        let terminal = &terminals[idx];
        if !affected.contains(&terminal.area) {
            continue;
        }
        let Some(current) = assignment.serving[idx] else {
            continue;
        };
        let want = crate::geoaddr::assigned_ascending_side(config, t, terminal.area);
        let current_side =
            crate::geoaddr::ascending_side(config, t, snapshot.lon_deg[current.flat(config)]);
        if current_side == want {
            continue;
        }
        let Some(new) = pick_serving(config, snapshot, terminal, strategy, Some(current)) else {
            continue;
        };
        if new == current {
            continue;
        }
        assignment.detach(config, idx, current);
        assignment.attach(config, idx, new);
        events.push(HandoverEvent {
            time_s: t,
            terminal: idx,
            old: Some(current),
            new: Some(new),
        });
    }
    events
}
