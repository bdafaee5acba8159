//! Run metrics: counters, per-session summaries, histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::events::{ns_to_s, SimNs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    Ttl,
    NoRoute,
    IslBufferOverflow,
    DownlinkBufferOverflow,
    UplinkCapacity,
    Unserved,
}

impl DropCause {
    pub const ALL: [DropCause; 6] = [
        DropCause::Ttl,
        DropCause::NoRoute,
        DropCause::IslBufferOverflow,
        DropCause::DownlinkBufferOverflow,
        DropCause::UplinkCapacity,
        DropCause::Unserved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DropCause::Ttl => "ttl",
            DropCause::NoRoute => "no_route",
            DropCause::IslBufferOverflow => "isl_buffer_overflow",
            DropCause::DownlinkBufferOverflow => "downlink_buffer_overflow",
            DropCause::UplinkCapacity => "uplink_capacity",
            DropCause::Unserved => "unserved",
        }
    }
}

/// Fixed-width histogram starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_s: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(bin_width_s: f64) -> Self {
        Self {
            bin_width_s,
            counts: Vec::new(),
            total: 0,
        }
    }

    pub fn add(&mut self, value_s: f64) {
        let bin = (value_s / self.bin_width_s).floor().max(0.0) as usize;
        if bin >= self.counts.len() {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
        self.total += 1;
    }

    /// Normalized min-sum intersection with another histogram of identical
    /// binning: 1.0 for identical shapes, 0.0 for disjoint supports.
    pub fn intersection(&self, other: &Histogram) -> Result<f64, String> {
        if (self.bin_width_s - other.bin_width_s).abs() > 1e-12 {
            return Err(format!(
                "histogram binning mismatch: {} vs {}",
                self.bin_width_s, other.bin_width_s
            ));
        }
        if self.total == 0 || other.total == 0 {
            return Ok(0.0);
        }
        let bins = self.counts.len().max(other.counts.len());
        let mut inter = 0.0;
        for b in 0..bins {
            let x = *self.counts.get(b).unwrap_or(&0) as f64 / self.total as f64;
            let y = *other.counts.get(b).unwrap_or(&0) as f64 / other.total as f64;
            inter += x.min(y);
        }
        Ok(inter)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: u32,
    pub src_terminal: u32,
    pub dst_terminal: u32,
    pub start_s: f64,
    pub duration_s: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub latency_sum_ns: u64,
    pub hops_sum: u64,
}

impl SessionSummary {
    pub fn mean_latency_s(&self) -> Option<f64> {
        (self.delivered > 0).then(|| ns_to_s(self.latency_sum_ns / self.delivered.max(1)))
    }

    pub fn mean_hops(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.hops_sum as f64 / self.delivered as f64)
    }
}

/// Full result of one simulation run. Pure function of (scenario, protocol):
/// bit-identical across repeats with the same inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub protocol: String,
    pub seed: u64,
    pub config_hash: String,
    pub duration_s: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight_at_end: u64,
    pub dropping_rate: f64,
    pub drops_by_cause: BTreeMap<String, u64>,
    /// (second, cause, count) timeline entries, sparse.
    pub drops_timeline: Vec<(u32, String, u64)>,
    pub sessions: Vec<SessionSummary>,
    pub mean_session_latency_s: f64,
    pub mean_packet_latency_s: f64,
    /// Histogram over per-session mean latencies.
    pub session_latency_hist: Histogram,
    /// Histogram over per-packet latencies.
    pub packet_latency_hist: Histogram,
    /// Delivered-packet hop counts, index = hops.
    pub hop_hist: Vec<u64>,
    pub handovers: u64,
    pub signaling_messages: u64,
    pub signaling_packet_hops: u64,
    pub network_updates: u64,
    pub loop_violations: u64,
    pub latency_identity_violations: u64,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    /// Conservation: every generated packet is delivered, dropped or still
    /// in flight at the end.
    pub fn conservation_holds(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.in_flight_at_end
    }

    pub fn drop_count(&self, cause: DropCause) -> u64 {
        self.drops_by_cause.get(cause.name()).copied().unwrap_or(0)
    }

    /// Drops of one cause inside a time window (whole seconds).
    pub fn drops_in_window(&self, cause: DropCause, from_s: u32, to_s: u32) -> u64 {
        self.drops_timeline
            .iter()
            .filter(|(sec, c, _)| *sec >= from_s && *sec < to_s && c == cause.name())
            .map(|(_, _, n)| *n)
            .sum()
    }
}

/// Mutable accumulator used by the engine while running.
#[derive(Debug, Default)]
pub struct MetricsAcc {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub drops_by_cause: BTreeMap<DropCause, u64>,
    pub drops_timeline: BTreeMap<(u32, DropCause), u64>,
    pub sessions: Vec<SessionSummary>,
    pub packet_latency_sum_ns: u128,
    pub hop_hist: Vec<u64>,
    pub handovers: u64,
    pub signaling_messages: u64,
    pub signaling_packet_hops: u64,
    pub network_updates: u64,
    pub loop_violations: u64,
    pub latency_identity_violations: u64,
    pub warnings: Vec<String>,
    pub packet_latencies_ns: Vec<SimNs>,
}

impl MetricsAcc {
    pub fn drop_packet(&mut self, t_ns: SimNs, session: u32, cause: DropCause) {
        self.dropped += 1;
        *self.drops_by_cause.entry(cause).or_insert(0) += 1;
        let sec = (t_ns / super::events::NS_PER_S) as u32;
        *self.drops_timeline.entry((sec, cause)).or_insert(0) += 1;
        self.sessions[session as usize].dropped += 1;
    }

    pub fn finish(
        self,
        protocol: &str,
        seed: u64,
        config_hash: String,
        duration_s: f64,
        in_flight_at_end: u64,
        latency_bin_s: f64,
    ) -> MetricsReport {
        let mut session_hist = Histogram::new(latency_bin_s);
        let mut packet_hist = Histogram::new(latency_bin_s);
        let mut session_mean_sum = 0.0;
        let mut sessions_with_data = 0u64;
        for s in &self.sessions {
            if let Some(mean) = s.mean_latency_s() {
                session_hist.add(mean);
                session_mean_sum += mean;
                sessions_with_data += 1;
            }
        }
        for &lat in &self.packet_latencies_ns {
            packet_hist.add(ns_to_s(lat));
        }
        let mean_packet = if self.delivered > 0 {
            (self.packet_latency_sum_ns / self.delivered as u128) as f64 / 1e9
        } else {
            0.0
        };
        MetricsReport {
            protocol: protocol.to_string(),
            seed,
            config_hash,
            duration_s,
            generated: self.generated,
            delivered: self.delivered,
            dropped: self.dropped,
            in_flight_at_end,
            dropping_rate: if self.generated > 0 {
                self.dropped as f64 / self.generated as f64
            } else {
                0.0
            },
            drops_by_cause: self
                .drops_by_cause
                .iter()
                .map(|(c, n)| (c.name().to_string(), *n))
                .collect(),
            drops_timeline: self
                .drops_timeline
                .iter()
                .map(|((sec, c), n)| (*sec, c.name().to_string(), *n))
                .collect(),
            sessions: self.sessions,
            mean_session_latency_s: if sessions_with_data > 0 {
                session_mean_sum / sessions_with_data as f64
            } else {
                0.0
            },
            mean_packet_latency_s: mean_packet,
            session_latency_hist: session_hist,
            packet_latency_hist: packet_hist,
            hop_hist: self.hop_hist,
            handovers: self.handovers,
            signaling_messages: self.signaling_messages,
            signaling_packet_hops: self.signaling_packet_hops,
            network_updates: self.network_updates,
            loop_violations: self.loop_violations,
            latency_identity_violations: self.latency_identity_violations,
            warnings: self.warnings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_intersection_identities() {
        let mut a = Histogram::new(0.005);
        let mut b = Histogram::new(0.005);
        for v in [0.01, 0.02, 0.02, 0.05] {
            a.add(v);
            b.add(v);
        }
        assert!((a.intersection(&b).unwrap() - 1.0).abs() < 1e-12);

        let mut c = Histogram::new(0.005);
        c.add(0.5);
        c.add(0.6);
        assert_eq!(a.intersection(&c).unwrap(), 0.0);

        let d = Histogram::new(0.01);
        assert!(a.intersection(&d).is_err());
    }

    #[test]
    fn conservation_check() {
        let acc = MetricsAcc {
            generated: 10,
            delivered: 6,
            dropped: 3,
            sessions: vec![],
            ..Default::default()
        };
        let report = acc.finish("idlb", 1, "x".into(), 1.0, 1, 0.005);
        assert!(report.conservation_holds());
    }
}
