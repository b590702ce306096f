//! The trust anchor: blind issuance, the settlement ledger, double-spend
//! detection and attribution, blacklisting, and recovery processing.
//!
//! Settlement is first-to-settle-wins: the first chain presented for a
//! serial is honored and later conflicting chains produce evidence against
//! the forking party. The withdrawal log retains blinded values for
//! auditability but never blinding factors, and the exported view is the
//! worst honest case the privacy analysis runs against.

use crate::crypto::{
    schnorr_verify, sha256_parts, sign_blinded, RsaKeyPair, SchnorrGroup, SchnorrProof,
};
use crate::funds::{
    extract_with_candidates, verify_candidate_opening, verify_chain, CandidateOpening,
    ChainVerdict, CoinCandidate, Extraction, InvalidReason, TaPublicKey, TransactionStatement,
    TransferRecord,
};
use crate::rng::SimRng;
use crate::wallet::RecoveryClaim;
use crate::wire::Encoder;
use num_bigint::BigUint;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaError {
    #[error("insufficient account balance")]
    InsufficientBalance,
    #[error("cut-and-choose verification failed at candidate {0}")]
    CutAndChooseFailed(usize),
    #[error("withdrawal authorization proof rejected")]
    BadAuth,
    #[error("unknown account owner")]
    UnknownOwner,
    #[error("no issuance session in progress for this owner")]
    NoSession,
    #[error("candidate count not accepted for issuance")]
    BadCandidateCount,
    #[error("recovery is disabled in this scenario")]
    RecoveryDisabled,
    #[error("serial has never settled")]
    SerialUnknown,
}

/// Per-coin settlement verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SettlementResult {
    Settled,
    DoubleSpendDetected {
        identity: Option<Vec<u8>>,
        evidence: DoubleSpendEvidence,
    },
    Expired,
    InvalidChain(InvalidReason),
}

impl SettlementResult {
    pub fn label(&self) -> String {
        match self {
            SettlementResult::Settled => "settled".into(),
            SettlementResult::DoubleSpendDetected { identity, .. } => match identity {
                Some(id) => format!("double_spend:{}", String::from_utf8_lossy(id)),
                None => "double_spend:unidentified".into(),
            },
            SettlementResult::Expired => "expired".into(),
            SettlementResult::InvalidChain(r) => format!("invalid:{r}"),
        }
    }
}

/// Reproducible evidence for a detected double spend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DoubleSpendEvidence {
    /// Two sibling records at the same hop; re-running the extraction over
    /// `candidates` re-derives the same identity.
    RecordFork {
        hop: u32,
        record_a: Box<TransferRecord>,
        record_b: Box<TransferRecord>,
        candidates: Vec<CoinCandidate>,
    },
    /// A chain extends one that was already redeemed: the redeemer endorsed
    /// the coin onward after collecting its value.
    SpentAfterRedeem {
        hop: u32,
        record: Box<TransferRecord>,
        redeemer: Vec<u8>,
    },
}

impl DoubleSpendEvidence {
    /// Re-derive the culprit identity from the evidence alone.
    pub fn rederive_identity(&self) -> Option<Vec<u8>> {
        match self {
            DoubleSpendEvidence::RecordFork {
                record_a,
                record_b,
                candidates,
                ..
            } => match extract_with_candidates(record_a, record_b, candidates) {
                Ok(Extraction::Identified(id)) => Some(id),
                _ => None,
            },
            DoubleSpendEvidence::SpentAfterRedeem { redeemer, .. } => Some(redeemer.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WithdrawalEntry {
    pub tick: u64,
    pub owner: Vec<u8>,
    pub denomination: u64,
    pub blinded: BigUint,
    /// Set when a recovery credit has been booked against this withdrawal.
    pub consumed_by_recovery: bool,
}

/// The settlement ledger.
#[derive(Debug, Default, Clone)]
pub struct LedgerState {
    pub accounts: BTreeMap<Vec<u8>, u64>,
    pub withdrawal_log: Vec<WithdrawalEntry>,
    pub settled_serials: BTreeMap<Vec<u8>, [u8; 32]>,
    pub spend_records: BTreeMap<Vec<u8>, Vec<Vec<TransferRecord>>>,
    pub blacklist_identities: BTreeSet<Vec<u8>>,
    pub blacklist_serials: BTreeSet<Vec<u8>>,
    pub recovery_queue: Vec<RecoveryClaim>,
}

struct IssuanceSession {
    denomination: u64,
    candidates: Vec<CoinCandidate>,
    subset: Vec<usize>,
}

pub struct IssueChallenge {
    /// Indices of the candidates the TA demands opened (half of them).
    pub subset: Vec<usize>,
    /// Expiry tick assigned to the coin, when the scenario runs with one.
    pub expiry: Option<u64>,
}

/// Outcome of processing one queued recovery item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoveryOutcome {
    Credited,
    RejectedSpent,
    RejectedEarly,
}

impl RecoveryOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            RecoveryOutcome::Credited => "credited",
            RecoveryOutcome::RejectedSpent => "rejected_spent",
            RecoveryOutcome::RejectedEarly => "rejected_early",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryDecision {
    pub owner: Vec<u8>,
    pub serial: Vec<u8>,
    pub denomination: u64,
    pub outcome: RecoveryOutcome,
}

/// TA-observable transcript used by the privacy analyses: the withdrawal
/// log plus settled-serial events. No blinding factors, no challenge or
/// share internals.
#[derive(Debug, Clone)]
pub struct TaView {
    pub withdrawals: Vec<(u64, Vec<u8>, u64, BigUint)>,
    pub settled: Vec<(u64, Vec<u8>)>,
}

pub struct TrustAnchor {
    rsa: RsaKeyPair,
    group: SchnorrGroup,
    candidate_count: usize,
    expiry_policy: Option<u64>,
    ledger: LedgerState,
    registry: BTreeMap<Vec<u8>, BigUint>,
    sessions: BTreeMap<Vec<u8>, IssuanceSession>,
    settled_by: BTreeMap<Vec<u8>, Vec<u8>>,
    settled_events: Vec<(u64, Vec<u8>)>,
    fork_evidence: BTreeMap<Vec<u8>, Option<Vec<u8>>>,
    recovered: BTreeMap<Vec<u8>, Vec<u8>>,
    events: Vec<(u64, &'static str, Vec<u8>)>,
    rng: SimRng,
}

const WITHDRAW_AUTH_TAG: &[u8] = b"opfsim.withdraw-auth.v1";

/// Context the wallet's long-term key signs to authorize a withdrawal.
pub fn withdraw_auth_context(owner: &[u8], denomination: u64, tick: u64) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.raw(WITHDRAW_AUTH_TAG)
        .bytes(owner)
        .u64(denomination)
        .u64(tick);
    enc.finish()
}

impl TrustAnchor {
    pub fn new(
        rsa: RsaKeyPair,
        group: SchnorrGroup,
        candidate_count: usize,
        expiry_policy: Option<u64>,
        rng: SimRng,
    ) -> Self {
        Self {
            rsa,
            group,
            candidate_count,
            expiry_policy,
            ledger: LedgerState::default(),
            registry: BTreeMap::new(),
            sessions: BTreeMap::new(),
            settled_by: BTreeMap::new(),
            settled_events: Vec::new(),
            fork_evidence: BTreeMap::new(),
            recovered: BTreeMap::new(),
            events: Vec::new(),
            rng,
        }
    }

    pub fn public_key(&self) -> TaPublicKey {
        TaPublicKey {
            rsa: self.rsa.public().clone(),
            group: self.group.clone(),
        }
    }

    pub fn group(&self) -> &SchnorrGroup {
        &self.group
    }

    pub fn expiry_policy(&self) -> Option<u64> {
        self.expiry_policy
    }

    pub fn ledger(&self) -> &LedgerState {
        &self.ledger
    }

    pub fn register_party(&mut self, identity: &[u8], long_term_public: BigUint, balance: u64) {
        self.registry.insert(identity.to_vec(), long_term_public);
        self.ledger.accounts.insert(identity.to_vec(), balance);
    }

    pub fn balance(&self, identity: &[u8]) -> u64 {
        self.ledger.accounts.get(identity).copied().unwrap_or(0)
    }

    pub fn accounts_total(&self) -> u64 {
        self.ledger.accounts.values().sum()
    }

    /// Phase one of issuance: record the announced candidates, pick a
    /// uniformly random half to be opened, and assign the expiry.
    pub fn begin_issue(
        &mut self,
        owner: &[u8],
        denomination: u64,
        candidates: Vec<CoinCandidate>,
        auth: &SchnorrProof,
        tick: u64,
    ) -> Result<IssueChallenge, TaError> {
        let long_term = self.registry.get(owner).ok_or(TaError::UnknownOwner)?;
        let ctx = withdraw_auth_context(owner, denomination, tick);
        if !schnorr_verify(&self.group, long_term, &ctx, auth) {
            return Err(TaError::BadAuth);
        }
        if self.balance(owner) < denomination {
            return Err(TaError::InsufficientBalance);
        }
        if candidates.len() != self.candidate_count {
            return Err(TaError::BadCandidateCount);
        }
        let mut subset: Vec<usize> =
            rand::seq::index::sample(&mut self.rng, candidates.len(), candidates.len() / 2)
                .into_vec();
        subset.sort_unstable();
        let expiry = self.expiry_policy.map(|delta| tick + delta);
        self.sessions.insert(
            owner.to_vec(),
            IssuanceSession {
                denomination,
                candidates,
                subset: subset.clone(),
            },
        );
        Ok(IssueChallenge { subset, expiry })
    }

    /// Phase two: verify the opened half encodes the owner identity, debit
    /// the account, log the blinded value and blind-sign. The final serial
    /// never appears here.
    pub fn finalize_issue(
        &mut self,
        owner: &[u8],
        openings: &[(usize, CandidateOpening)],
        blinded: &BigUint,
        tick: u64,
    ) -> Result<BigUint, TaError> {
        let session = self.sessions.remove(owner).ok_or(TaError::NoSession)?;
        let opened: BTreeMap<usize, &CandidateOpening> =
            openings.iter().map(|(i, o)| (*i, o)).collect();
        for &i in &session.subset {
            let opening = opened.get(&i).ok_or(TaError::CutAndChooseFailed(i))?;
            let candidate = session
                .candidates
                .get(i)
                .ok_or(TaError::CutAndChooseFailed(i))?;
            if !verify_candidate_opening(candidate, opening, owner) {
                self.push_event(tick, "issue_failed", |enc| {
                    enc.bytes(owner).u32(i as u32);
                });
                return Err(TaError::CutAndChooseFailed(i));
            }
        }
        let balance = self
            .ledger
            .accounts
            .get_mut(owner)
            .ok_or(TaError::UnknownOwner)?;
        if *balance < session.denomination {
            return Err(TaError::InsufficientBalance);
        }
        *balance -= session.denomination;
        self.ledger.withdrawal_log.push(WithdrawalEntry {
            tick,
            owner: owner.to_vec(),
            denomination: session.denomination,
            blinded: blinded.clone(),
            consumed_by_recovery: false,
        });
        let denomination = session.denomination;
        self.push_event(tick, "withdraw", |enc| {
            enc.bytes(owner).u64(denomination).biguint(blinded);
        });
        sign_blinded(blinded, &self.rsa).map_err(|_| TaError::NoSession)
    }

    /// Settle a deposited statement. Idempotent on identical chains; a
    /// conflicting chain for a settled serial yields reproducible
    /// double-spend evidence, and both the culprit identity and the serial
    /// are blacklisted.
    pub fn settle(
        &mut self,
        depositor: &[u8],
        statement: &TransactionStatement,
        tick: u64,
    ) -> SettlementResult {
        match verify_chain(statement, &self.public_key(), tick) {
            ChainVerdict::Invalid(InvalidReason::Expired) => {
                self.push_event(tick, "settle_expired", |enc| {
                    enc.bytes(depositor)
                        .bytes(&statement.chain.coin.serial_bytes());
                });
                return SettlementResult::Expired;
            }
            ChainVerdict::Invalid(reason) => return SettlementResult::InvalidChain(reason),
            ChainVerdict::Valid => {}
        }
        let serial = statement.chain.coin.serial_bytes();
        let digest = statement.chain.digest();

        if self.ledger.blacklist_identities.contains(depositor) {
            // Blacklisted identities may still settle honest coins; flag it.
            self.push_event(tick, "blacklisted_depositor", |enc| {
                enc.bytes(depositor);
            });
        }

        if let Some(known) = self.ledger.settled_serials.get(&serial) {
            if *known == digest {
                return SettlementResult::Settled;
            }
            let stored = self.ledger.spend_records[&serial][0].clone();
            let result = self.judge_fork(&serial, &stored, statement, depositor);
            self.ledger
                .spend_records
                .get_mut(&serial)
                .expect("settled serial has records")
                .push(statement.chain.records.clone());
            if let SettlementResult::DoubleSpendDetected { identity, .. } = &result {
                if let Some(id) = identity {
                    self.ledger.blacklist_identities.insert(id.clone());
                }
                self.ledger.blacklist_serials.insert(serial.clone());
                self.fork_evidence.insert(serial.clone(), identity.clone());
                let id_bytes = identity.clone().unwrap_or_default();
                self.push_event(tick, "double_spend", |enc| {
                    enc.bytes(depositor).bytes(&serial).bytes(&id_bytes);
                });
            }
            return result;
        }

        self.ledger.settled_serials.insert(serial.clone(), digest);
        self.ledger
            .spend_records
            .insert(serial.clone(), vec![statement.chain.records.clone()]);
        self.settled_by.insert(serial.clone(), depositor.to_vec());
        self.settled_events.push((tick, serial.clone()));
        *self
            .ledger
            .accounts
            .entry(depositor.to_vec())
            .or_insert(0) += statement.amount;
        self.push_event(tick, "settle", |enc| {
            enc.bytes(depositor).bytes(&serial).u64(statement.amount);
        });
        SettlementResult::Settled
    }

    fn judge_fork(
        &self,
        serial: &[u8],
        stored: &[TransferRecord],
        statement: &TransactionStatement,
        depositor: &[u8],
    ) -> SettlementResult {
        let new = &statement.chain.records;
        let shorter = stored.len().min(new.len());
        let fork_hop = (0..shorter).find(|&i| stored[i] != new[i]);
        match fork_hop {
            Some(hop) => {
                let record_a = stored[hop].clone();
                let record_b = new[hop].clone();
                let candidates = if hop == 0 {
                    statement.chain.coin.candidates.clone()
                } else {
                    record_a.endorser_candidates.clone()
                };
                let identity = match extract_with_candidates(&record_a, &record_b, &candidates) {
                    Ok(Extraction::Identified(id)) => Some(id),
                    _ => None,
                };
                SettlementResult::DoubleSpendDetected {
                    identity,
                    evidence: DoubleSpendEvidence::RecordFork {
                        hop: hop as u32,
                        record_a: Box::new(record_a),
                        record_b: Box::new(record_b),
                        candidates,
                    },
                }
            }
            None => {
                // One chain is a prefix of the other: someone both redeemed
                // the coin and endorsed it onward.
                let (hop, record, redeemer) = if stored.len() < new.len() {
                    let redeemer = self
                        .settled_by
                        .get(serial)
                        .cloned()
                        .unwrap_or_default();
                    (stored.len(), new[stored.len()].clone(), redeemer)
                } else {
                    (new.len(), stored[new.len()].clone(), depositor.to_vec())
                };
                SettlementResult::DoubleSpendDetected {
                    identity: Some(redeemer.clone()),
                    evidence: DoubleSpendEvidence::SpentAfterRedeem {
                        hop: hop as u32,
                        record: Box::new(record),
                        redeemer,
                    },
                }
            }
        }
    }

    /// Queue a recovery claim for processing after expiry.
    pub fn file_claim(&mut self, claim: RecoveryClaim) -> Result<(), TaError> {
        if self.expiry_policy.is_none() {
            return Err(TaError::RecoveryDisabled);
        }
        self.push_event(claim.claim_tick, "claim", |enc| {
            enc.bytes(&claim.owner_identity)
                .u32(claim.items.len() as u32);
        });
        self.ledger.recovery_queue.push(claim);
        Ok(())
    }

    /// Process queued claims: an item is credited once its matched
    /// withdrawal has expired and the serial never settled. Unexpired items
    /// stay queued.
    pub fn process_recoveries(&mut self, tick: u64) -> Vec<RecoveryDecision> {
        let delta = match self.expiry_policy {
            Some(d) => d,
            None => return Vec::new(),
        };
        let mut decisions = Vec::new();
        let mut still_queued = Vec::new();
        let claims = std::mem::take(&mut self.ledger.recovery_queue);
        for claim in claims {
            let mut remaining = Vec::new();
            for item in claim.items {
                let matched = self.ledger.withdrawal_log.iter().position(|w| {
                    !w.consumed_by_recovery
                        && w.owner == claim.owner_identity
                        && w.denomination == item.denomination
                });
                let Some(idx) = matched else {
                    decisions.push(RecoveryDecision {
                        owner: claim.owner_identity.clone(),
                        serial: item.serial.clone(),
                        denomination: item.denomination,
                        outcome: RecoveryOutcome::RejectedEarly,
                    });
                    continue;
                };
                let expiry = self.ledger.withdrawal_log[idx].tick + delta;
                if tick < expiry {
                    remaining.push(item);
                    continue;
                }
                let spent = self.ledger.settled_serials.contains_key(&item.serial)
                    || self.recovered.contains_key(&item.serial);
                let outcome = if spent {
                    RecoveryOutcome::RejectedSpent
                } else {
                    self.ledger.withdrawal_log[idx].consumed_by_recovery = true;
                    *self
                        .ledger
                        .accounts
                        .entry(claim.owner_identity.clone())
                        .or_insert(0) += item.denomination;
                    self.recovered
                        .insert(item.serial.clone(), claim.owner_identity.clone());
                    RecoveryOutcome::Credited
                };
                let owner = claim.owner_identity.clone();
                let (serial, denom, label) = (item.serial.clone(), item.denomination, outcome.label());
                self.push_event(tick, "recovery", |enc| {
                    enc.bytes(&owner).bytes(&serial).u64(denom).str(label);
                });
                decisions.push(RecoveryDecision {
                    owner,
                    serial: item.serial,
                    denomination: item.denomination,
                    outcome,
                });
            }
            if !remaining.is_empty() {
                still_queued.push(RecoveryClaim {
                    owner_identity: claim.owner_identity,
                    items: remaining,
                    claim_tick: claim.claim_tick,
                });
            }
        }
        self.ledger.recovery_queue = still_queued;
        decisions
    }

    /// The read-only projection the privacy adversary is allowed to see.
    pub fn ta_view(&self) -> TaView {
        TaView {
            withdrawals: self
                .ledger
                .withdrawal_log
                .iter()
                .map(|w| (w.tick, w.owner.clone(), w.denomination, w.blinded.clone()))
                .collect(),
            settled: self.settled_events.clone(),
        }
    }

    /// Attempt to trace a settled serial back to a spender. `None` for
    /// serials with a single consistent history; fork evidence names the
    /// double spender.
    pub fn fork_identity(&self, serial: &[u8]) -> Result<Option<Vec<u8>>, TaError> {
        if !self.ledger.settled_serials.contains_key(serial) {
            return Err(TaError::SerialUnknown);
        }
        Ok(self.fork_evidence.get(serial).cloned().flatten())
    }

    /// Line-oriented dump of ledger events: tick, event kind, payload hex.
    pub fn dump_ledger(&self) -> String {
        let mut out = String::new();
        for (tick, kind, payload) in &self.events {
            out.push_str(&format!("{tick}\t{kind}\t{}\n", hex::encode(payload)));
        }
        out
    }

    fn push_event(&mut self, tick: u64, kind: &'static str, fill: impl FnOnce(&mut Encoder)) {
        let mut enc = Encoder::new();
        fill(&mut enc);
        self.events.push((tick, kind, enc.finish()));
    }
}

/// Digest of a full statement, used to reference deposits in traces.
pub fn statement_digest(statement: &TransactionStatement) -> [u8; 32] {
    sha256_parts(&[&statement.encode()])
}
