//! Deterministic simulator of a retail CBDC with a transferable offline
//! payment functionality.
//!
//! The simulator models bearer coins issued by a trust anchor (TA) through a
//! blind cut-and-choose protocol, wallets that transfer coins peer-to-peer
//! while offline, and a settlement ledger that detects and attributes
//! double-spending after the fact. An adversary harness runs a scripted
//! threat repertoire (forgery, trivial/race double spends, wallet cloning,
//! rollback, replay, recovery double-dips) against configurable worlds and
//! classifies every outcome, and a scenario runner replays declarative
//! schedules into auditable, byte-reproducible traces.

pub mod adversary;
pub mod crypto;
pub mod funds;
pub mod netsim;
pub mod rng;
pub mod scenario;
pub mod trust_anchor;
pub mod wallet;
pub mod wire;
