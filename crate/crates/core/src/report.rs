//! CSV export, run comparison and the closed-form analytics report.
//!
//! All floats are serialized with 9 significant digits. Output files are
//! byte-identical across reruns of the same configuration except for the
//! `generated_at` metadata row in metrics.csv.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{
    build_cluster_map, derive_cost_model, interface_count, max_intra_cluster_delay_s, ClusterId,
};
use crate::engine::MetricsReport;
use crate::error::ConfigError;
use crate::geoaddr;
use crate::orbit::visibility_window_s;
use crate::scenario::ScenarioConfig;
use crate::topology::build_topology;

/// 9 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), ConfigError> {
    std::fs::create_dir_all(dir).map_err(|e| ConfigError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Write the run outputs: metrics.csv, latency_hist.csv, drops_by_cause.csv,
/// signaling.csv plus per-session and timeline detail files.
pub fn write_run_csvs(
    report: &MetricsReport,
    dir: &Path,
    generated_at: &str,
) -> Result<(), ConfigError> {
    let mut m = String::from("key,value\n");
    let kv: &[(&str, String)] = &[
        ("protocol", report.protocol.clone()),
        ("seed", report.seed.to_string()),
        ("config_hash", report.config_hash.clone()),
        ("duration_s", fmt_f64(report.duration_s)),
        ("generated", report.generated.to_string()),
        ("delivered", report.delivered.to_string()),
        ("dropped", report.dropped.to_string()),
        ("in_flight_at_end", report.in_flight_at_end.to_string()),
        ("dropping_rate", fmt_f64(report.dropping_rate)),
        (
            "mean_session_latency_s",
            fmt_f64(report.mean_session_latency_s),
        ),
        (
            "mean_packet_latency_s",
            fmt_f64(report.mean_packet_latency_s),
        ),
        ("handovers", report.handovers.to_string()),
        ("signaling_messages", report.signaling_messages.to_string()),
        (
            "signaling_packet_hops",
            report.signaling_packet_hops.to_string(),
        ),
        ("network_updates", report.network_updates.to_string()),
        ("loop_violations", report.loop_violations.to_string()),
        (
            "latency_identity_violations",
            report.latency_identity_violations.to_string(),
        ),
        ("generated_at", generated_at.to_string()),
    ];
    for (k, v) in kv {
        let _ = writeln!(m, "{k},{v}");
    }
    write_file(dir, "metrics.csv", &m)?;

    let mut h = String::from("bin_low_s,bin_high_s,session_count,packet_count\n");
    let w = report.session_latency_hist.bin_width_s;
    let bins = report
        .session_latency_hist
        .counts
        .len()
        .max(report.packet_latency_hist.counts.len());
    for b in 0..bins {
        let s = report.session_latency_hist.counts.get(b).unwrap_or(&0);
        let p = report.packet_latency_hist.counts.get(b).unwrap_or(&0);
        let _ = writeln!(
            h,
            "{},{},{s},{p}",
            fmt_f64(b as f64 * w),
            fmt_f64((b + 1) as f64 * w)
        );
    }
    write_file(dir, "latency_hist.csv", &h)?;

    let mut d = String::from("cause,count\n");
    for cause in crate::engine::DropCause::ALL {
        let _ = writeln!(d, "{},{}", cause.name(), report.drop_count(cause));
    }
    write_file(dir, "drops_by_cause.csv", &d)?;

    let mut tl = String::from("second,cause,count\n");
    for (sec, cause, count) in &report.drops_timeline {
        let _ = writeln!(tl, "{sec},{cause},{count}");
    }
    write_file(dir, "drops_timeline.csv", &tl)?;

    let mut s = String::from("metric,value\n");
    let _ = writeln!(s, "messages,{}", report.signaling_messages);
    let _ = writeln!(s, "packet_hops,{}", report.signaling_packet_hops);
    let _ = writeln!(s, "network_updates,{}", report.network_updates);
    write_file(dir, "signaling.csv", &s)?;

    let mut sess = String::from(
        "session,src_terminal,dst_terminal,start_s,duration_s,generated,delivered,dropped,mean_latency_s,mean_hops\n",
    );
    for summary in &report.sessions {
        let _ = writeln!(
            sess,
            "{},{},{},{},{},{},{},{},{},{}",
            summary.id,
            summary.src_terminal,
            summary.dst_terminal,
            fmt_f64(summary.start_s),
            fmt_f64(summary.duration_s),
            summary.generated,
            summary.delivered,
            summary.dropped,
            summary.mean_latency_s().map(fmt_f64).unwrap_or_default(),
            summary.mean_hops().map(fmt_f64).unwrap_or_default(),
        );
    }
    write_file(dir, "sessions.csv", &sess)?;

    let mut hops = String::from("hops,count\n");
    for (h, n) in report.hop_hist.iter().enumerate() {
        if *n > 0 {
            let _ = writeln!(hops, "{h},{n}");
        }
    }
    write_file(dir, "hop_hist.csv", &hops)
}

/// Cross-protocol comparison of two reports with identical binning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub histogram_intersection: f64,
    pub packet_histogram_intersection: f64,
    pub drop_rate_a: f64,
    pub drop_rate_b: f64,
    /// a / b; infinite when b never drops but a does.
    pub drop_rate_ratio: f64,
    pub mean_session_latency_a_s: f64,
    pub mean_session_latency_b_s: f64,
    pub mean_latency_delta_s: f64,
}

pub fn compare(a: &MetricsReport, b: &MetricsReport) -> Result<Comparison, ConfigError> {
    let intersection = a
        .session_latency_hist
        .intersection(&b.session_latency_hist)
        .map_err(|e| ConfigError::field("compare.histograms", e))?;
    let packet_intersection = a
        .packet_latency_hist
        .intersection(&b.packet_latency_hist)
        .map_err(|e| ConfigError::field("compare.histograms", e))?;
    let ratio = if b.dropping_rate > 0.0 {
        a.dropping_rate / b.dropping_rate
    } else if a.dropping_rate > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(Comparison {
        histogram_intersection: intersection,
        packet_histogram_intersection: packet_intersection,
        drop_rate_a: a.dropping_rate,
        drop_rate_b: b.dropping_rate,
        drop_rate_ratio: ratio,
        mean_session_latency_a_s: a.mean_session_latency_s,
        mean_session_latency_b_s: b.mean_session_latency_s,
        mean_latency_delta_s: a.mean_session_latency_s - b.mean_session_latency_s,
    })
}

pub fn write_comparison_csv(c: &Comparison, dir: &Path) -> Result<(), ConfigError> {
    let mut out = String::from("metric,value\n");
    let rows = [
        ("histogram_intersection", c.histogram_intersection),
        (
            "packet_histogram_intersection",
            c.packet_histogram_intersection,
        ),
        ("drop_rate_a", c.drop_rate_a),
        ("drop_rate_b", c.drop_rate_b),
        ("drop_rate_ratio", c.drop_rate_ratio),
        ("mean_session_latency_a_s", c.mean_session_latency_a_s),
        ("mean_session_latency_b_s", c.mean_session_latency_b_s),
        ("mean_latency_delta_s", c.mean_latency_delta_s),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{}", fmt_f64(v));
    }
    write_file(dir, "comparison.csv", &out)
}

/// The analytic quantities of the system design, computed without running
/// a traffic simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analytics {
    pub area_count: usize,
    pub area_bits: u32,
    pub clusters: usize,
    pub cluster_size: usize,
    pub interface_nodes_interior: usize,
    pub interface_nodes_seam: usize,
    pub h_c: f64,
    pub h_int_seamless: f64,
    pub h_int_seam: f64,
    pub cost_per_cluster_seamless: f64,
    pub cost_per_cluster_seam: f64,
    pub total_signaling: f64,
    pub signaling_increase_over_no_interfaces: f64,
    /// Max one-way member-to-controller propagation delay over one orbit.
    pub max_intra_cluster_delay_s: f64,
    /// Same path, round trip (report up, instructions down).
    pub max_intra_cluster_delay_rtt_s: f64,
    pub isl_delay_min_s: f64,
    pub isl_delay_max_s: f64,
    pub max_visibility_window_s: f64,
}

pub fn analytics(cfg: &ScenarioConfig) -> Result<Analytics, ConfigError> {
    let c = &cfg.constellation;
    let map = build_cluster_map(c, cfg.cluster.planes_per_cluster, cfg.cluster.slots_per_cluster)?;
    let model = derive_cost_model(&map, c, 1.0, 1.0);
    let interior = map
        .seam_adjacent
        .iter()
        .position(|s| !*s)
        .map(|i| ClusterId(i as u8));
    let seam = map
        .seam_adjacent
        .iter()
        .position(|s| *s)
        .map(|i| ClusterId(i as u8));

    let period = c.orbital_period_s();
    let one_way = max_intra_cluster_delay_s(&map, c, period, cfg.simulation.movement_step_s);

    let mut isl_min = f64::MAX;
    let mut isl_max: f64 = 0.0;
    let mut t = 0.0;
    while t < period {
        let topo = build_topology(c, t);
        for l in topo.links.iter().filter(|l| l.active) {
            isl_min = isl_min.min(l.delay_s);
            isl_max = isl_max.max(l.delay_s);
        }
        t += 30.0;
    }

    let visibility = visibility_window_s(c, 45.0, 7.0, crate::ground::UT_MIN_ELEVATION_DEG);

    Ok(Analytics {
        area_count: geoaddr::AREA_COUNT,
        area_bits: geoaddr::AREA_BITS,
        clusters: map.num_clusters(),
        cluster_size: map.planes_per_cluster * map.slots_per_cluster,
        interface_nodes_interior: interior.map(|c| interface_count(&map, c)).unwrap_or(0),
        interface_nodes_seam: seam.map(|c| interface_count(&map, c)).unwrap_or(0),
        h_c: model.h_c,
        h_int_seamless: model.seamless.h_int,
        h_int_seam: model.seam.h_int,
        cost_per_cluster_seamless: model.per_cluster_cost(&model.seamless),
        cost_per_cluster_seam: model.per_cluster_cost(&model.seam),
        total_signaling: model.total_cost(),
        signaling_increase_over_no_interfaces: model.total_cost()
            / model.total_cost_without_interfaces()
            - 1.0,
        max_intra_cluster_delay_s: one_way,
        max_intra_cluster_delay_rtt_s: 2.0 * one_way,
        isl_delay_min_s: isl_min,
        isl_delay_max_s: isl_max,
        max_visibility_window_s: visibility,
    })
}

pub fn analytics_csv(a: &Analytics) -> String {
    let mut out = String::from("metric,value\n");
    let _ = writeln!(out, "area_count,{}", a.area_count);
    let _ = writeln!(out, "area_bits,{}", a.area_bits);
    let _ = writeln!(out, "clusters,{}", a.clusters);
    let _ = writeln!(out, "cluster_size,{}", a.cluster_size);
    let _ = writeln!(out, "interface_nodes_interior,{}", a.interface_nodes_interior);
    let _ = writeln!(out, "interface_nodes_seam,{}", a.interface_nodes_seam);
    let rows = [
        ("h_c", a.h_c),
        ("h_int_seamless", a.h_int_seamless),
        ("h_int_seam", a.h_int_seam),
        ("cost_per_cluster_seamless", a.cost_per_cluster_seamless),
        ("cost_per_cluster_seam", a.cost_per_cluster_seam),
        ("total_signaling", a.total_signaling),
        (
            "signaling_increase_over_no_interfaces",
            a.signaling_increase_over_no_interfaces,
        ),
        ("max_intra_cluster_delay_s", a.max_intra_cluster_delay_s),
        (
            "max_intra_cluster_delay_rtt_s",
            a.max_intra_cluster_delay_rtt_s,
        ),
        ("isl_delay_min_s", a.isl_delay_min_s),
        ("isl_delay_max_s", a.isl_delay_max_s),
        ("max_visibility_window_s", a.max_visibility_window_s),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{}", fmt_f64(v));
    }
    out
}

/// CSV of the ISL graph at one instant: time, link, kind, active, delay_ms.
pub fn topology_csv(cfg: &ScenarioConfig, times_s: &[f64]) -> String {
    let mut out = String::from("time_s,link,kind,active,delay_ms\n");
    for &t in times_s {
        let topo = build_topology(&cfg.constellation, t);
        for l in &topo.links {
            let kind = match l.kind {
                crate::topology::LinkKind::IntraPlane => "intra_plane",
                crate::topology::LinkKind::InterPlane => "inter_plane",
            };
            let _ = writeln!(
                out,
                "{},{}-{},{},{},{}",
                fmt_f64(t),
                l.id.a,
                l.id.b,
                kind,
                l.active,
                fmt_f64(l.delay_s * 1e3)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_f64(14304.0), "1.43040000e4");
    }

    #[test]
    fn analytics_reference_values() {
        let cfg = ScenarioConfig::full_scale();
        let a = analytics(&cfg).unwrap();
        assert_eq!(a.area_count, 6962);
        assert_eq!(a.clusters, 30);
        assert_eq!(a.cluster_size, 48);
        assert_eq!(a.interface_nodes_interior, 28);
        assert_eq!(a.interface_nodes_seam, 20);
        assert!((a.h_c - 3.57).abs() < 0.05);
        assert!((a.total_signaling - 14304.0).abs() / 14304.0 < 0.05);
        assert!(a.signaling_increase_over_no_interfaces >= 0.14);
        assert!(a.max_intra_cluster_delay_s < 0.05);
        assert!(a.isl_delay_max_s <= 5.8e-3);
        assert!((a.max_visibility_window_s - 236.0).abs() / 236.0 < 0.05);
    }

    #[test]
    fn topology_csv_shape() {
        let cfg = ScenarioConfig::full_scale();
        let csv = topology_csv(&cfg, &[0.0]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 30 * 48 + 29 * 48);
        assert!(lines[1].contains("intra_plane"));
    }
}
