//! Session schedule generation.
//!
//! Half of the sessions run between gateways and user terminals, half
//! UT-to-UT. Starts are uniform over the simulation window; durations are
//! exponential around the configured mean. Every session emits fixed-size
//! packets back to back at its constant data rate.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: u32,
    /// Terminal table indices.
    pub src: u32,
    pub dst: u32,
    pub start_s: f64,
    pub duration_s: f64,
}

impl Session {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

pub fn generate_sessions(
    active_uts: &[usize],
    gateways: &[usize],
    n_sessions: usize,
    sim_duration_s: f64,
    mean_duration_s: f64,
    seed: u64,
) -> Result<Vec<Session>, ConfigError> {
    if n_sessions == 0 {
        return Ok(Vec::new());
    }
    if active_uts.len() < 2 {
        return Err(ConfigError::field(
            "traffic.sessions",
            "need at least two active user terminals",
        ));
    }
    if gateways.is_empty() {
        return Err(ConfigError::field(
            "traffic.sessions",
            "need at least one gateway",
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sessions = Vec::with_capacity(n_sessions);
    for id in 0..n_sessions {
        let gw_session = rng.random_bool(0.5);
        let (src, dst) = if gw_session {
            let ut = active_uts[rng.random_range(0..active_uts.len())];
            let gw = gateways[rng.random_range(0..gateways.len())];
            if rng.random_bool(0.5) {
                (ut, gw)
            } else {
                (gw, ut)
            }
        } else {
            let a = active_uts[rng.random_range(0..active_uts.len())];
            let mut b = active_uts[rng.random_range(0..active_uts.len())];
            while b == a {
                b = active_uts[rng.random_range(0..active_uts.len())];
            }
            (a, b)
        };
        let start_s = rng.random_range(0.0..sim_duration_s);
        // Exponential duration via inverse CDF.
        let u: f64 = rng.random_range(0.0..1.0);
        let duration_s = -mean_duration_s * (1.0 - u).ln();
        sessions.push(Session {
            id: id as u32,
            src: src as u32,
            dst: dst as u32,
            start_s,
            duration_s,
        });
    }
    Ok(sessions)
}

/// Time-average number of concurrently active sessions inside the window
/// (sessions are truncated at the window end).
pub fn time_average_concurrency(sessions: &[Session], sim_duration_s: f64) -> f64 {
    let total: f64 = sessions
        .iter()
        .map(|s| s.duration_s.min((sim_duration_s - s.start_s).max(0.0)))
        .sum();
    total / sim_duration_s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn endpoints() -> (Vec<usize>, Vec<usize>) {
        ((100..2100).collect(), (0..39).collect())
    }

    #[test]
    fn reference_schedule_concurrency_is_little_law() {
        let (uts, gws) = endpoints();
        let sessions = generate_sessions(&uts, &gws, 20_000, 7200.0, 30.0, 11).unwrap();
        let avg = time_average_concurrency(&sessions, 7200.0);
        // 20000 * 30 / 7200 = 83.3, within 2%.
        assert!((avg - 83.3).abs() / 83.3 < 0.02, "avg = {avg}");
    }

    #[test]
    fn kind_ratio_within_three_sigma() {
        let (uts, gws) = endpoints();
        let sessions = generate_sessions(&uts, &gws, 20_000, 7200.0, 30.0, 5).unwrap();
        let gw_count = sessions
            .iter()
            .filter(|s| (s.src as usize) < 39 || (s.dst as usize) < 39)
            .count();
        let n = sessions.len() as f64;
        let sigma = (n * 0.25).sqrt();
        assert!(
            (gw_count as f64 - n / 2.0).abs() < 3.0 * sigma,
            "gw sessions: {gw_count}"
        );
    }

    #[test]
    fn empty_schedule_and_bad_endpoints() {
        let (uts, gws) = endpoints();
        assert!(generate_sessions(&uts, &gws, 0, 100.0, 30.0, 1)
            .unwrap()
            .is_empty());
        assert!(generate_sessions(&uts[..1], &gws, 10, 100.0, 30.0, 1).is_err());
        assert!(generate_sessions(&uts, &[], 10, 100.0, 30.0, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (uts, gws) = endpoints();
        let a = generate_sessions(&uts, &gws, 500, 360.0, 30.0, 77).unwrap();
        let b = generate_sessions(&uts, &gws, 500, 360.0, 30.0, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_sessions(&uts, &gws, 500, 360.0, 30.0, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sessions_start_inside_window() {
        let (uts, gws) = endpoints();
        let sessions = generate_sessions(&uts, &gws, 1000, 360.0, 30.0, 3).unwrap();
        for s in &sessions {
            assert!(s.start_s >= 0.0 && s.start_s < 360.0);
            assert!(s.duration_s >= 0.0);
            assert_ne!(s.src, s.dst);
        }
    }
}
