//! Discrete-tick connectivity fabric.
//!
//! Enforces the offline-payment precondition (peer link up, trust anchor
//! unreachable for both parties) and records an eavesdropper transcript of
//! every delivered peer-to-peer payload. No loss or corruption by default;
//! a drop-at-tick fault can be scheduled for payment-abortion tests.

use std::collections::{BTreeMap, BTreeSet};

/// Who can reach whom. Absent entries mean unreachable/unlinked.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    pub ta_reachable: BTreeMap<String, bool>,
    pub peer_links: BTreeSet<(String, String)>,
}

impl ConnectivityMatrix {
    fn link_key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn set_ta_reachable(&mut self, party: &str, reachable: bool) {
        self.ta_reachable.insert(party.to_string(), reachable);
    }

    pub fn set_peer_link(&mut self, a: &str, b: &str, linked: bool) {
        let key = Self::link_key(a, b);
        if linked {
            self.peer_links.insert(key);
        } else {
            self.peer_links.remove(&key);
        }
    }

    pub fn is_ta_reachable(&self, party: &str) -> bool {
        self.ta_reachable.get(party).copied().unwrap_or(false)
    }

    pub fn is_peer_linked(&self, a: &str, b: &str) -> bool {
        self.peer_links.contains(&Self::link_key(a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EavesdropEntry {
    pub tick: u64,
    pub sender: String,
    pub receiver: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryResult {
    Delivered,
    NoLink,
}

#[derive(Debug, Default)]
pub struct NetSim {
    matrix: ConnectivityMatrix,
    log: Vec<EavesdropEntry>,
    drops: BTreeSet<(u64, String, String)>,
}

impl NetSim {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replace the connectivity matrix wholesale.
    pub fn set_connectivity(&mut self, matrix: ConnectivityMatrix) {
        self.matrix = matrix;
    }

    pub fn matrix(&self) -> &ConnectivityMatrix {
        &self.matrix
    }

    pub fn is_ta_reachable(&self, party: &str) -> bool {
        self.matrix.is_ta_reachable(party)
    }

    /// The offline-payment gate: both parties linked to each other and
    /// neither able to reach the TA.
    pub fn offline_pair(&self, a: &str, b: &str) -> bool {
        self.matrix.is_peer_linked(a, b)
            && !self.matrix.is_ta_reachable(a)
            && !self.matrix.is_ta_reachable(b)
    }

    /// Schedule a delivery fault between two parties at a tick.
    pub fn schedule_drop(&mut self, tick: u64, a: &str, b: &str) {
        let (a, b) = ConnectivityMatrix::link_key(a, b);
        self.drops.insert((tick, a, b));
    }

    pub fn drop_scheduled(&self, tick: u64, a: &str, b: &str) -> bool {
        let (a, b) = ConnectivityMatrix::link_key(a, b);
        self.drops.contains(&(tick, a, b))
    }

    /// Deliver a peer payload; every delivered payload lands in the
    /// eavesdrop log exactly as transmitted.
    pub fn deliver(
        &mut self,
        tick: u64,
        sender: &str,
        receiver: &str,
        payload: &[u8],
    ) -> DeliveryResult {
        if !self.matrix.is_peer_linked(sender, receiver) || self.drop_scheduled(tick, sender, receiver)
        {
            return DeliveryResult::NoLink;
        }
        self.log.push(EavesdropEntry {
            tick,
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            payload: payload.to_vec(),
        });
        DeliveryResult::Delivered
    }

    pub fn eavesdrop_log(&self) -> &[EavesdropEntry] {
        &self.log
    }

    /// Hex-payload lines for offline analysis.
    pub fn export_log_hex(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.tick,
                e.sender,
                e.receiver,
                hex::encode(&e.payload)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    #[test]
    fn linked_pair_delivers_unlinked_does_not() {
        let mut net = NetSim::new();
        let mut m = ConnectivityMatrix::default();
        m.set_peer_link("alice", "bob", true);
        net.set_connectivity(m);
        assert_eq!(
            net.deliver(0, "alice", "bob", b"hi"),
            DeliveryResult::Delivered
        );
        assert_eq!(
            net.deliver(0, "alice", "carol", b"hi"),
            DeliveryResult::NoLink
        );
        assert_eq!(net.eavesdrop_log().len(), 1);
    }

    #[test]
    fn offline_gate_requires_both_parties_offline() {
        let mut net = NetSim::new();
        let mut m = ConnectivityMatrix::default();
        m.set_peer_link("alice", "bob", true);
        m.set_ta_reachable("alice", true);
        net.set_connectivity(m.clone());
        assert!(!net.offline_pair("alice", "bob"));
        m.set_ta_reachable("alice", false);
        net.set_connectivity(m);
        assert!(net.offline_pair("alice", "bob"));
    }

    #[test]
    fn drop_fault_suppresses_delivery_at_that_tick_only() {
        let mut net = NetSim::new();
        let mut m = ConnectivityMatrix::default();
        m.set_peer_link("a", "b", true);
        net.set_connectivity(m);
        net.schedule_drop(5, "a", "b");
        assert_eq!(net.deliver(5, "a", "b", b"x"), DeliveryResult::NoLink);
        assert_eq!(net.deliver(6, "a", "b", b"x"), DeliveryResult::Delivered);
    }

    #[test]
    fn log_length_counts_delivered_only() {
        let mut net = NetSim::new();
        let mut m = ConnectivityMatrix::default();
        m.set_peer_link("a", "b", true);
        net.set_connectivity(m);
        let mut rng = derive_rng(3, "netsim");
        let mut delivered = 0usize;
        for i in 0..100u64 {
            let to_linked: bool = rng.gen();
            let receiver = if to_linked { "b" } else { "c" };
            if net.deliver(i, "a", receiver, &i.to_be_bytes()) == DeliveryResult::Delivered {
                delivered += 1;
            }
        }
        assert_eq!(net.eavesdrop_log().len(), delivered);
        assert!(delivered < 100);
    }
}
