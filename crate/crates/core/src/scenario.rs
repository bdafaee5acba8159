//! Scenario configuration and resolution.
//!
//! A scenario is one TOML file with sections mirroring the reference tables:
//! constellation and ground segment, traffic, link capacities, routing knobs
//! and the simulation window. Every field has the reference default, so an
//! empty file is the full-scale setup; the desk preset scales the run down
//! for quick comparative experiments. Resolving a config samples terminals
//! and the session schedule deterministically from the configured seeds.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{build_cluster_map, ClusterMap};
use crate::engine::traffic::{generate_sessions, Session};
use crate::error::ConfigError;
use crate::ground::{
    build_terminals, parse_gateways, DensityGrid, HandoverStrategy, Terminal, TerminalKind,
    DEFAULT_DENSITY_CSV, DEFAULT_GATEWAYS_CSV,
};
use crate::orbit::ConstellationConfig;
use crate::routing::RoutingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Idlb,
    Sspf,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Idlb => "idlb",
            Protocol::Sspf => "sspf",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "idlb" => Ok(Protocol::Idlb),
            "sspf" => Ok(Protocol::Sspf),
            other => Err(ConfigError::field(
                "routing.protocol",
                format!("unknown protocol {other:?} (expected idlb or sspf)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub planes_per_cluster: usize,
    pub slots_per_cluster: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            planes_per_cluster: 6,
            slots_per_cluster: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundConfig {
    /// Generated user terminals.
    pub num_terminals: usize,
    /// Simultaneously active user terminals (seeded subset).
    pub active_terminals: usize,
    pub seed: u64,
    /// Overrides for the bundled data files.
    pub gateway_file: Option<String>,
    pub density_file: Option<String>,
    pub density_cap: f64,
    pub handover_strategy: HandoverStrategy,
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self {
            num_terminals: 10_000,
            active_terminals: 2_000,
            seed: 1,
            gateway_file: None,
            density_file: None,
            density_cap: crate::ground::DEFAULT_DENSITY_CAP,
            handover_strategy: HandoverStrategy::LongestVisibility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub sessions: usize,
    pub mean_duration_s: f64,
    pub session_rate_bps: f64,
    pub packet_bits: u64,
    pub seed: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            sessions: 20_000,
            mean_duration_s: 30.0,
            session_rate_bps: 1e8,
            packet_bits: 1_200_000,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub isl_rate_bps: f64,
    pub buffer_bits: u64,
    pub downlink_rate_bps: f64,
    pub ut_uplink_rate_bps: f64,
    pub gw_uplink_rate_bps: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            isl_rate_bps: 1e9,
            buffer_bits: 6_000_000,
            downlink_rate_bps: 1e9,
            ut_uplink_rate_bps: 1e9,
            gw_uplink_rate_bps: 5e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub duration_s: f64,
    pub movement_step_s: f64,
    pub max_hops: u32,
    /// Routing-decision and switching time per node, each, microseconds.
    pub processing_us: f64,
    /// Controller update period, seconds.
    pub update_period_s: f64,
    /// Old-satellite delivery grace after a handover, seconds.
    pub grace_s: f64,
    /// Latency histogram bin width, milliseconds.
    pub latency_bin_ms: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            duration_s: 7200.0,
            movement_step_s: 5.0,
            max_hops: 60,
            processing_us: 10.0,
            update_period_s: 1.0,
            grace_s: 2.5,
            latency_bin_ms: 5.0,
        }
    }
}

/// One file fully determines a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub constellation: ConstellationConfig,
    pub cluster: ClusterConfig,
    pub ground: GroundConfig,
    pub traffic: TrafficConfig,
    pub links: LinkConfig,
    pub routing: RoutingConfig,
    pub simulation: SimulationConfig,
}

impl ScenarioConfig {
    /// Full-scale reference setup (the table defaults).
    pub fn full_scale() -> Self {
        Self::default()
    }

    /// Scaled-down preset for desk experiments and CI.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.simulation.duration_s = 360.0;
        cfg.ground.num_terminals = 1_000;
        cfg.ground.active_terminals = 200;
        cfg.traffic.sessions = 1_200;
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::InvalidField {
            field: "config".to_string(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the resolved configuration, recorded in run outputs.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.constellation.validate()?;
        if self.simulation.duration_s <= 0.0 {
            return Err(ConfigError::field("simulation.duration_s", "must be > 0"));
        }
        if self.simulation.movement_step_s <= 0.0 {
            return Err(ConfigError::field(
                "simulation.movement_step_s",
                "must be > 0",
            ));
        }
        if self.simulation.update_period_s <= 0.0 {
            return Err(ConfigError::field(
                "simulation.update_period_s",
                "must be > 0",
            ));
        }
        if self.traffic.packet_bits == 0 {
            return Err(ConfigError::field("traffic.packet_bits", "must be > 0"));
        }
        if self.traffic.session_rate_bps <= 0.0 {
            return Err(ConfigError::field("traffic.session_rate_bps", "must be > 0"));
        }
        if self.links.isl_rate_bps <= 0.0 {
            return Err(ConfigError::field("links.isl_rate_bps", "must be > 0"));
        }
        if self.links.buffer_bits < self.traffic.packet_bits {
            return Err(ConfigError::field(
                "links.buffer_bits",
                "must hold at least one packet",
            ));
        }
        if self.ground.active_terminals > self.ground.num_terminals {
            return Err(ConfigError::field(
                "ground.active_terminals",
                "cannot exceed ground.num_terminals",
            ));
        }
        if !(self.routing.theta_warn > 0.0
            && self.routing.theta_warn < self.routing.theta_block
            && self.routing.theta_block <= 1.0)
        {
            return Err(ConfigError::field(
                "routing.theta_warn/theta_block",
                "need 0 < warn < block <= 1",
            ));
        }
        Ok(())
    }
}

/// A resolved scenario: terminals sampled, sessions scheduled, cluster map
/// built. Input of `engine::run`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub map: ClusterMap,
    pub terminals: Vec<Terminal>,
    /// Active terminal indices (all gateways plus the active UT subset).
    pub active: Vec<usize>,
    pub active_uts: Vec<usize>,
    pub gateways: Vec<usize>,
    pub sessions: Vec<Session>,
    pub config_hash: String,
}

impl Scenario {
    pub fn from_config(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let gateways_text = match &cfg.ground.gateway_file {
            Some(path) => std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                source: e,
            })?,
            None => DEFAULT_GATEWAYS_CSV.to_string(),
        };
        let gateway_rows = parse_gateways(
            &gateways_text,
            cfg.ground.gateway_file.as_deref().unwrap_or("<bundled gateways>"),
        )?;
        let density_text = match &cfg.ground.density_file {
            Some(path) => std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                source: e,
            })?,
            None => DEFAULT_DENSITY_CSV.to_string(),
        };
        let grid = DensityGrid::parse_csv(
            &density_text,
            cfg.ground.density_file.as_deref().unwrap_or("<bundled density>"),
            cfg.ground.density_cap,
        )?;
        let terminals = build_terminals(
            &cfg.constellation,
            &grid,
            cfg.ground.num_terminals,
            &gateway_rows,
            cfg.ground.seed,
        );
        Self::assemble(cfg, terminals, None)
    }

    /// Engineered scenario with explicit terminals/sessions (test harness).
    pub fn with_explicit(
        cfg: ScenarioConfig,
        terminals: Vec<Terminal>,
        sessions: Vec<Session>,
    ) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Self::assemble(cfg, terminals, Some(sessions))
    }

    fn assemble(
        cfg: ScenarioConfig,
        terminals: Vec<Terminal>,
        explicit_sessions: Option<Vec<Session>>,
    ) -> Result<Self, ConfigError> {
        let map = build_cluster_map(
            &cfg.constellation,
            cfg.cluster.planes_per_cluster,
            cfg.cluster.slots_per_cluster,
        )?;
        let gateways: Vec<usize> = terminals
            .iter()
            .filter(|t| t.kind == TerminalKind::Gw)
            .map(|t| t.index)
            .collect();
        let all_uts: Vec<usize> = terminals
            .iter()
            .filter(|t| t.kind == TerminalKind::Ut)
            .map(|t| t.index)
            .collect();
        let active_uts = if explicit_sessions.is_some() {
            all_uts.clone()
        } else {
            choose_active(&all_uts, cfg.ground.active_terminals, cfg.ground.seed)
        };
        let mut active: Vec<usize> = gateways.iter().chain(active_uts.iter()).copied().collect();
        active.sort_unstable();
        let sessions = match explicit_sessions {
            Some(s) => s,
            None => generate_sessions(
                &active_uts,
                &gateways,
                cfg.traffic.sessions,
                cfg.simulation.duration_s,
                cfg.traffic.mean_duration_s,
                cfg.traffic.seed,
            )?,
        };
        let config_hash = cfg.hash();
        Ok(Self {
            cfg,
            map,
            terminals,
            active,
            active_uts,
            gateways,
            sessions,
            config_hash,
        })
    }

    /// Seconds between consecutive packets of one session.
    pub fn packet_interval_s(&self) -> f64 {
        self.cfg.traffic.packet_bits as f64 / self.cfg.traffic.session_rate_bps
    }
}

/// Deterministic subset selection (partial Fisher-Yates).
fn choose_active(pool: &[usize], count: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0xAC71_4E55);
    let mut pool: Vec<usize> = pool.to_vec();
    let count = count.min(pool.len());
    for i in 0..count {
        let j = i + rng.random_range(0..pool.len() - i);
        pool.swap(i, j);
    }
    let mut chosen: Vec<usize> = pool[..count].to_vec();
    chosen.sort_unstable();
    chosen
}
