//! A complete simulated world: trust anchor, connectivity fabric, wallets
//! and the trace log, with one method per schedulable action.
//!
//! Every method records a trace event with its outcome; runtime refusals
//! (offline withdraw, missing coin, secure-element violations) are outcomes,
//! not panics, so schedules can exercise error paths deliberately.

use super::trace::{BeginInfo, EventDetail, TraceEvent};
use crate::crypto::{sha256, RsaKeyPair, SchnorrGroup};
use crate::funds::TransactionStatement;
use crate::netsim::{ConnectivityMatrix, DeliveryResult, NetSim};
use crate::rng::derive_rng;
use crate::trust_anchor::{RecoveryDecision, TrustAnchor};
use crate::wallet::{PaymentChallenge, ReceiveDecision, TeeMode, Wallet, WalletError};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown party {0}")]
    UnknownParty(String),
    #[error("party {0} already exists")]
    DuplicateParty(String),
    #[error("inbox of {0} is empty")]
    EmptyInbox(String),
    #[error(transparent)]
    Wallet(#[from] WalletError),
    #[error("payment refused: {0}")]
    PaymentRefused(&'static str),
    #[error("delivery failed: no link")]
    NoLink,
}

#[derive(Debug, Clone)]
pub struct WorldParams {
    pub seed: u64,
    pub candidate_count: usize,
    pub expiry_ticks: Option<u64>,
    pub rsa_bits: u32,
    pub group: SchnorrGroup,
    /// Pre-generated issuance key, for batch runs that share one TA key.
    pub ta_key: Option<RsaKeyPair>,
}

impl WorldParams {
    /// Production-ish defaults: 512-bit RSA, 256-bit proof group, 16
    /// challenge bits (32 issuance candidates).
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            candidate_count: 32,
            expiry_ticks: None,
            rsa_bits: 512,
            group: crate::crypto::default_group(),
            ta_key: None,
        }
    }

    /// Small parameters for high-volume statistical runs.
    pub fn fast(seed: u64) -> Self {
        Self {
            seed,
            candidate_count: 8,
            expiry_ticks: None,
            rsa_bits: 128,
            group: crate::crypto::test_group(),
            ta_key: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartySpec {
    pub name: String,
    pub initial_balance: u64,
    pub tee: TeeMode,
}

struct InboxItem {
    statement_bytes: Vec<u8>,
    attack: bool,
}

pub struct World {
    pub params: WorldParams,
    pub ta: TrustAnchor,
    pub net: NetSim,
    wallets: BTreeMap<String, Wallet>,
    inboxes: BTreeMap<String, VecDeque<InboxItem>>,
    events: Vec<TraceEvent>,
    begin: BeginInfo,
}

impl World {
    pub fn new(params: WorldParams, parties: &[PartySpec]) -> Self {
        let mut ta_rng = derive_rng(params.seed, "ta");
        let rsa = params.ta_key.clone().unwrap_or_else(|| {
            RsaKeyPair::generate(params.rsa_bits, &mut ta_rng).expect("rsa bits below floor")
        });
        let mut ta = TrustAnchor::new(
            rsa,
            params.group.clone(),
            params.candidate_count,
            params.expiry_ticks,
            derive_rng(params.seed, "ta-challenges"),
        );
        let mut wallets = BTreeMap::new();
        let mut inboxes = BTreeMap::new();
        let mut begin_parties = Vec::new();
        for spec in parties {
            let rng = derive_rng(params.seed, &format!("party:{}", spec.name));
            let wallet = Wallet::new(
                spec.name.as_bytes(),
                params.group.clone(),
                spec.tee,
                params.candidate_count,
                params.expiry_ticks.is_some(),
                rng,
            );
            ta.register_party(
                wallet.owner_identity(),
                wallet.long_term_public().clone(),
                spec.initial_balance,
            );
            begin_parties.push((
                spec.name.clone(),
                wallet.owner_identity().to_vec(),
                spec.initial_balance,
                spec.tee.as_str().to_string(),
            ));
            wallets.insert(spec.name.clone(), wallet);
            inboxes.insert(spec.name.clone(), VecDeque::new());
        }
        let begin = BeginInfo {
            seed: params.seed,
            candidate_count: params.candidate_count as u32,
            expiry_ticks: params.expiry_ticks,
            rsa_bits: params.rsa_bits,
            parties: begin_parties,
        };
        Self {
            params,
            ta,
            net: NetSim::new(),
            wallets,
            inboxes,
            events: Vec::new(),
            begin,
        }
    }

    pub fn begin_info(&self) -> &BeginInfo {
        &self.begin
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn wallet(&self, party: &str) -> Result<&Wallet, WorldError> {
        self.wallets
            .get(party)
            .ok_or_else(|| WorldError::UnknownParty(party.to_string()))
    }

    pub fn wallet_mut(&mut self, party: &str) -> Result<&mut Wallet, WorldError> {
        self.wallets
            .get_mut(party)
            .ok_or_else(|| WorldError::UnknownParty(party.to_string()))
    }

    pub fn party_names(&self) -> Vec<String> {
        self.wallets.keys().cloned().collect()
    }

    fn record(&mut self, tick: u64, actor: &str, detail: EventDetail, outcome: impl Into<String>) {
        self.events.push(TraceEvent {
            tick,
            actor: actor.to_string(),
            detail,
            outcome: outcome.into(),
        });
    }

    /// Replace the connectivity matrix: listed parties can reach the TA,
    /// listed pairs are peer-linked.
    pub fn set_connectivity(&mut self, tick: u64, online: &[String], links: &[(String, String)]) {
        let mut matrix = ConnectivityMatrix::default();
        for p in online {
            matrix.set_ta_reachable(p, true);
        }
        for (a, b) in links {
            matrix.set_peer_link(a, b, true);
        }
        self.net.set_connectivity(matrix);
        self.record(
            tick,
            "net",
            EventDetail::Connectivity {
                online: online.to_vec(),
                links: links.to_vec(),
            },
            "ok",
        );
    }

    /// Convenience for attack scripts: everyone offline, the given parties
    /// fully meshed peer-to-peer.
    pub fn partition_offline(&mut self, tick: u64, peers: &[String]) {
        let mut links = Vec::new();
        for (i, a) in peers.iter().enumerate() {
            for b in peers.iter().skip(i + 1) {
                links.push((a.clone(), b.clone()));
            }
        }
        self.set_connectivity(tick, &[], &links);
    }

    pub fn withdraw(
        &mut self,
        tick: u64,
        party: &str,
        denomination: u64,
    ) -> Result<Vec<u8>, WorldError> {
        if !self.wallets.contains_key(party) {
            return Err(WorldError::UnknownParty(party.to_string()));
        }
        let owner = self.wallet(party)?.owner_identity().to_vec();
        if !self.net.is_ta_reachable(party) {
            self.record(
                tick,
                party,
                EventDetail::Withdraw {
                    party: party.into(),
                    owner,
                    denomination,
                    serial: Vec::new(),
                    expiry: None,
                    blinded: Vec::new(),
                },
                "err:Offline",
            );
            return Err(WalletError::Offline.into());
        }
        let wallet = self.wallets.get_mut(party).expect("checked");
        let result = wallet.withdraw(&mut self.ta, denomination, tick);
        match result {
            Ok(serial) => {
                let serial_bytes = serial.to_bytes_be();
                let expiry = self.params.expiry_ticks.map(|d| tick + d);
                let blinded = self
                    .ta
                    .ledger()
                    .withdrawal_log
                    .last()
                    .map(|w| w.blinded.to_bytes_be())
                    .unwrap_or_default();
                let owner = self.wallet(party)?.owner_identity().to_vec();
                self.record(
                    tick,
                    party,
                    EventDetail::Withdraw {
                        party: party.into(),
                        owner,
                        denomination,
                        serial: serial_bytes.clone(),
                        expiry,
                        blinded,
                    },
                    "ok",
                );
                Ok(serial_bytes)
            }
            Err(err) => {
                self.record(
                    tick,
                    party,
                    EventDetail::Withdraw {
                        party: party.into(),
                        owner,
                        denomination,
                        serial: Vec::new(),
                        expiry: None,
                        blinded: Vec::new(),
                    },
                    format!("err:{err}"),
                );
                Err(err.into())
            }
        }
    }

    /// Full offline payment exchange: the payee issues a challenge over the
    /// peer link, the payer answers with a statement, and the statement
    /// lands in the payee's inbox for a later `receive`.
    pub fn pay(
        &mut self,
        tick: u64,
        payer: &str,
        payee: &str,
        denomination: Option<u64>,
        attack: bool,
    ) -> Result<Vec<u8>, WorldError> {
        if !self.wallets.contains_key(payer) {
            return Err(WorldError::UnknownParty(payer.to_string()));
        }
        if !self.wallets.contains_key(payee) {
            return Err(WorldError::UnknownParty(payee.to_string()));
        }
        let fail = |world: &mut Self, outcome: &str, err: WorldError| {
            world.record(
                tick,
                payer,
                EventDetail::Pay {
                    payer: payer.into(),
                    payee: payee.into(),
                    serial: Vec::new(),
                    hop: 0,
                    counter: 0,
                    chain_bytes: 0,
                    statement: [0u8; 32],
                    attack,
                },
                outcome,
            );
            Err(err)
        };
        // The offline-payment gate: refuse unless both parties are cut off
        // from the TA and linked to each other.
        if self.net.is_ta_reachable(payer) || self.net.is_ta_reachable(payee) {
            return fail(
                self,
                "refused:OnlineParty",
                WorldError::PaymentRefused("party can reach the TA"),
            );
        }
        if !self.net.offline_pair(payer, payee) {
            return fail(
                self,
                "refused:NoPeerLink",
                WorldError::PaymentRefused("no peer link"),
            );
        }
        if self.net.drop_scheduled(tick, payer, payee) {
            return fail(
                self,
                "aborted:Dropped",
                WorldError::PaymentRefused("delivery dropped"),
            );
        }

        let serial = {
            let wallet = self.wallet(payer)?;
            match denomination {
                Some(d) => wallet
                    .held_serials()
                    .into_iter()
                    .find(|s| wallet.held_chain(s).map(|c| c.coin.denomination) == Some(d)),
                None => wallet.held_serials().into_iter().next(),
            }
        };
        let Some(serial) = serial else {
            return fail(self, "err:CoinNotHeld", WalletError::CoinNotHeld.into());
        };

        let challenge = self.wallets.get_mut(payee).expect("checked").prepare_receive();
        let challenge_bytes = challenge.encode();
        if self.net.deliver(tick, payee, payer, &challenge_bytes) != DeliveryResult::Delivered {
            return fail(self, "aborted:NoLink", WorldError::NoLink);
        }

        let decoded = PaymentChallenge::decode_bytes(&challenge_bytes).expect("own encoding");
        let statement = match self
            .wallets
            .get_mut(payer)
            .expect("checked")
            .pay_offline(&serial, &decoded, tick)
        {
            Ok(st) => st,
            Err(err) => {
                let outcome = format!("err:{err}");
                return fail(self, &outcome, err.into());
            }
        };
        let bytes = statement.encode();
        let digest = sha256(&bytes);
        if self.net.deliver(tick, payer, payee, &bytes) != DeliveryResult::Delivered {
            return fail(self, "aborted:NoLink", WorldError::NoLink);
        }
        self.inboxes.get_mut(payee).expect("checked").push_back(InboxItem {
            statement_bytes: bytes.clone(),
            attack,
        });
        let record = statement.chain.records.last().expect("just appended");
        self.record(
            tick,
            payer,
            EventDetail::Pay {
                payer: payer.into(),
                payee: payee.into(),
                serial: serial.clone(),
                hop: record.hop_index,
                counter: record.spend_counter,
                chain_bytes: bytes.len() as u64,
                statement: digest,
                attack,
            },
            "emitted",
        );
        Ok(bytes)
    }

    /// Re-deliver captured or crafted statement bytes to a party's inbox
    /// (the replay and forgery surface).
    pub fn deliver_statement(
        &mut self,
        tick: u64,
        sender: &str,
        receiver: &str,
        bytes: &[u8],
        attack: bool,
    ) -> Result<(), WorldError> {
        if !self.inboxes.contains_key(receiver) {
            return Err(WorldError::UnknownParty(receiver.to_string()));
        }
        let digest = sha256(bytes);
        if self.net.deliver(tick, sender, receiver, bytes) != DeliveryResult::Delivered {
            self.record(
                tick,
                sender,
                EventDetail::Deliver {
                    sender: sender.into(),
                    receiver: receiver.into(),
                    statement: digest,
                    attack,
                },
                "no_link",
            );
            return Err(WorldError::NoLink);
        }
        self.inboxes
            .get_mut(receiver)
            .expect("checked")
            .push_back(InboxItem {
                statement_bytes: bytes.to_vec(),
                attack,
            });
        self.record(
            tick,
            sender,
            EventDetail::Deliver {
                sender: sender.into(),
                receiver: receiver.into(),
                statement: digest,
                attack,
            },
            "delivered",
        );
        Ok(())
    }

    /// Pop the oldest inbox item and run the receiver's acceptance check.
    pub fn receive(&mut self, tick: u64, party: &str) -> Result<ReceiveDecision, WorldError> {
        let item = self
            .inboxes
            .get_mut(party)
            .ok_or_else(|| WorldError::UnknownParty(party.to_string()))?
            .pop_front()
            .ok_or_else(|| WorldError::EmptyInbox(party.to_string()))?;
        let digest = sha256(&item.statement_bytes);
        let statement = match TransactionStatement::decode_bytes(&item.statement_bytes) {
            Ok(st) => st,
            Err(_) => {
                self.record(
                    tick,
                    party,
                    EventDetail::Receive {
                        party: party.into(),
                        serial: Vec::new(),
                        statement: digest,
                        attack: item.attack,
                    },
                    "reject:Malformed",
                );
                return Ok(ReceiveDecision::Reject(
                    crate::wallet::RejectReason::NotAddressedToMe,
                ));
            }
        };
        let ta_public = self.ta.public_key();
        let decision = self
            .wallets
            .get_mut(party)
            .expect("checked")
            .receive_offline(&statement, &ta_public, tick);
        let outcome = match &decision {
            ReceiveDecision::Accept => "accept".to_string(),
            ReceiveDecision::Reject(reason) => format!("reject:{reason}"),
        };
        self.record(
            tick,
            party,
            EventDetail::Receive {
                party: party.into(),
                serial: statement.chain.coin.serial_bytes(),
                statement: digest,
                attack: item.attack,
            },
            outcome,
        );
        Ok(decision)
    }

    /// Synchronize a wallet with the TA: settle pending receipts, refresh
    /// the balance shadow.
    pub fn sync(&mut self, tick: u64, party: &str) -> Result<(), WorldError> {
        if !self.wallets.contains_key(party) {
            return Err(WorldError::UnknownParty(party.to_string()));
        }
        if !self.net.is_ta_reachable(party) {
            self.record(
                tick,
                party,
                EventDetail::Sync {
                    party: party.into(),
                    submitted: 0,
                    balance: 0,
                },
                "err:Offline",
            );
            return Err(WalletError::Offline.into());
        }
        let owner = self.wallet(party)?.owner_identity().to_vec();
        let report = self
            .wallets
            .get_mut(party)
            .expect("checked")
            .sync(&mut self.ta, tick);
        for entry in &report.entries {
            self.record(
                tick,
                party,
                EventDetail::Settle {
                    party: party.into(),
                    owner: owner.clone(),
                    serial: entry.serial.clone(),
                    amount: entry.credited.max(match &entry.result {
                        crate::trust_anchor::SettlementResult::Settled => entry.credited,
                        _ => 0,
                    }),
                    result: entry.result.label(),
                    credited: entry.credited,
                },
                "ok",
            );
        }
        self.record(
            tick,
            party,
            EventDetail::Sync {
                party: party.into(),
                submitted: report.entries.len() as u32,
                balance: report.balance_after,
            },
            "ok",
        );
        Ok(())
    }

    /// Export a wallet snapshot (attack marker in the trace).
    pub fn export_wallet(&mut self, tick: u64, party: &str) -> Result<Vec<u8>, WorldError> {
        let wallet = self
            .wallets
            .get(party)
            .ok_or_else(|| WorldError::UnknownParty(party.to_string()))?;
        match wallet.export_state() {
            Ok(bytes) => {
                let serials = wallet.held_serials();
                self.record(
                    tick,
                    party,
                    EventDetail::Export {
                        party: party.into(),
                        snapshot: sha256(&bytes),
                        serials,
                    },
                    "ok",
                );
                Ok(bytes)
            }
            Err(err) => {
                self.record(
                    tick,
                    party,
                    EventDetail::TeeViolation {
                        party: party.into(),
                        op: "export".into(),
                    },
                    format!("err:{err}"),
                );
                Err(err.into())
            }
        }
    }

    /// Restore a snapshot into an existing wallet (rollback surface).
    pub fn import_wallet(&mut self, tick: u64, party: &str, bytes: &[u8]) -> Result<(), WorldError> {
        let wallet = self
            .wallets
            .get_mut(party)
            .ok_or_else(|| WorldError::UnknownParty(party.to_string()))?;
        match wallet.import_state(bytes) {
            Ok(()) => {
                let serials = self.wallets[party].held_serials();
                self.record(
                    tick,
                    party,
                    EventDetail::Import {
                        party: party.into(),
                        snapshot: sha256(bytes),
                        serials,
                        fresh: false,
                    },
                    "ok",
                );
                Ok(())
            }
            Err(err) => {
                self.record(
                    tick,
                    party,
                    EventDetail::TeeViolation {
                        party: party.into(),
                        op: "import".into(),
                    },
                    format!("err:{err}"),
                );
                Err(err.into())
            }
        }
    }

    /// Instantiate a snapshot as a brand-new wallet instance (clone
    /// surface).
    pub fn install_clone(&mut self, tick: u64, name: &str, bytes: &[u8]) -> Result<(), WorldError> {
        if self.wallets.contains_key(name) {
            return Err(WorldError::DuplicateParty(name.to_string()));
        }
        let wallet = Wallet::from_snapshot(bytes)?;
        let serials = wallet.held_serials();
        self.wallets.insert(name.to_string(), wallet);
        self.inboxes.insert(name.to_string(), VecDeque::new());
        self.record(
            tick,
            name,
            EventDetail::Import {
                party: name.into(),
                snapshot: sha256(bytes),
                serials,
                fresh: true,
            },
            "ok",
        );
        Ok(())
    }

    /// File a recovery claim for every coin the wallet currently holds.
    /// Claims travel out of band; no connectivity gate.
    pub fn recovery_claim(&mut self, tick: u64, party: &str) -> Result<(), WorldError> {
        let wallet = self
            .wallets
            .get(party)
            .ok_or_else(|| WorldError::UnknownParty(party.to_string()))?;
        let owner = wallet.owner_identity().to_vec();
        let serials = wallet.held_serials();
        let claim = match wallet.file_recovery_claim(&serials, tick) {
            Ok(c) => c,
            Err(err) => {
                self.record(
                    tick,
                    party,
                    EventDetail::Claim {
                        party: party.into(),
                        owner,
                        serials,
                        denominations: Vec::new(),
                    },
                    format!("err:{err}"),
                );
                return Err(err.into());
            }
        };
        let denominations = claim.items.iter().map(|i| i.denomination).collect();
        match self.ta.file_claim(claim) {
            Ok(()) => {
                self.record(
                    tick,
                    party,
                    EventDetail::Claim {
                        party: party.into(),
                        owner,
                        serials,
                        denominations,
                    },
                    "ok",
                );
                Ok(())
            }
            Err(err) => {
                self.record(
                    tick,
                    party,
                    EventDetail::Claim {
                        party: party.into(),
                        owner,
                        serials,
                        denominations,
                    },
                    format!("err:{err}"),
                );
                Err(WalletError::RecoveryDisabled.into())
            }
        }
    }

    /// Let the TA evaluate queued claims at this tick.
    pub fn process_recoveries(&mut self, tick: u64) -> Vec<RecoveryDecision> {
        let decisions = self.ta.process_recoveries(tick);
        for d in &decisions {
            self.record(
                tick,
                "ta",
                EventDetail::Recovery {
                    owner: d.owner.clone(),
                    serial: d.serial.clone(),
                    denomination: d.denomination,
                    outcome: d.outcome.label().to_string(),
                },
                "ok",
            );
        }
        decisions
    }
}
