//! Deterministic event queue.
//!
//! Events order by (time, kind priority, sequence number); the sequence
//! number makes identical runs process identical event orders.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Simulation time in integer nanoseconds.
pub type SimNs = u64;

pub const NS_PER_S: u64 = 1_000_000_000;

pub fn s_to_ns(s: f64) -> SimNs {
    (s * NS_PER_S as f64).round() as SimNs
}

pub fn ns_to_s(ns: SimNs) -> f64 {
    ns as f64 / NS_PER_S as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Movement-grid step: positions, topology, handovers.
    MovementTick,
    /// Synchronized seam handover, index into the precomputed schedule.
    SeamEpoch { index: u32 },
    /// Periodic controller update for all clusters.
    ClusterEpoch,
    /// A computed table set reaches the cluster nodes.
    InstallTables { cluster: u8, version: u64 },
    /// A session emits its next packet.
    EmitPacket { session: u32 },
    /// A port finished transmitting its head packet.
    PortTxDone { port: u32 },
    /// A packet reaches a satellite after propagation.
    ArriveAtSat { packet: u32, sat: u16 },
    /// A packet reaches its destination terminal.
    Deliver { packet: u32, terminal: u32 },
    /// End of simulation.
    End,
}

impl EventKind {
    /// State updates apply before traffic at equal timestamps.
    fn priority(&self) -> u8 {
        match self {
            EventKind::MovementTick => 0,
            EventKind::SeamEpoch { .. } => 1,
            EventKind::ClusterEpoch => 2,
            EventKind::InstallTables { .. } => 3,
            EventKind::EmitPacket { .. } => 4,
            EventKind::PortTxDone { .. } => 5,
            EventKind::ArriveAtSat { .. } => 6,
            EventKind::Deliver { .. } => 7,
            EventKind::End => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Queued {
    time: SimNs,
    priority: u8,
    seq: u64,
    kind: EventKind,
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.priority, self.seq).cmp(&(other.time, other.priority, other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: SimNs, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Queued {
            time,
            priority: kind.priority(),
            seq: self.seq,
            kind,
        }));
    }

    pub fn pop(&mut self) -> Option<(SimNs, EventKind)> {
        self.heap.pop().map(|Reverse(q)| (q.time, q.kind))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_time_priority_sequence() {
        let mut q = EventQueue::default();
        q.push(100, EventKind::EmitPacket { session: 1 });
        q.push(100, EventKind::MovementTick);
        q.push(50, EventKind::PortTxDone { port: 3 });
        q.push(100, EventKind::EmitPacket { session: 2 });

        assert_eq!(q.pop().unwrap().1, EventKind::PortTxDone { port: 3 });
        assert_eq!(q.pop().unwrap().1, EventKind::MovementTick);
        assert_eq!(q.pop().unwrap().1, EventKind::EmitPacket { session: 1 });
        assert_eq!(q.pop().unwrap().1, EventKind::EmitPacket { session: 2 });
        assert!(q.pop().is_none());
    }

    #[test]
    fn nondecreasing_times() {
        let mut q = EventQueue::default();
        for i in (0..100).rev() {
            q.push(i * 7 % 50, EventKind::MovementTick);
        }
        let mut last = 0;
        while let Some((t, _)) = q.pop() {
            assert!(t >= last);
            last = t;
        }
    }
}
