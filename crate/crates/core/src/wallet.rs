//! The user-side environment: keys, coins in custody, a monotonic spend
//! counter, all wrapped in an emulated secure element.
//!
//! The secure-element emulation is an interface guard, not a sandbox: in
//! `SecureElement` mode the wallet refuses raw state export, raw state
//! import and any path that would regress the counter. In `Unprotected`
//! mode those operations succeed, which is exactly the clone/rollback attack
//! surface the adversary harness exercises.

use crate::crypto::{
    blind, rsa_verify, schnorr_prove, unblind, BlindingFactor, SchnorrGroup, SchnorrKeyPair,
};
use crate::funds::{
    append_transfer, generate_candidates, make_candidates, open_candidates, verify_chain,
    CandidateOpening, ChainVerdict, Coin, CoinCandidate, FundsError, InvalidReason, RecordContext,
    RevealedShare, TaPublicKey, TransactionStatement, TransferChain, TransferRecord,
};
use crate::rng::{rng_from_state, rng_state, SimRng};
use crate::trust_anchor::{withdraw_auth_context, SettlementResult, TaError, TrustAnchor};
use crate::wire::{Decoder, Encoder, WireError};
use num_bigint::{BigUint, RandBigInt};
use thiserror::Error;

const SERIAL_BITS: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeeMode {
    Unprotected,
    SecureElement,
}

impl TeeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TeeMode::Unprotected => "unprotected",
            TeeMode::SecureElement => "secure_element",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WalletError {
    #[error("coin not held by this wallet")]
    CoinNotHeld,
    #[error("coin past its expiry tick")]
    Expired,
    #[error("no connectivity to the trust anchor")]
    Offline,
    #[error("no peer link to the counterparty")]
    NoPeerLink,
    #[error("secure element refuses {0}")]
    TeeViolation(&'static str),
    #[error("recovery is disabled in this scenario")]
    RecoveryDisabled,
    #[error("insufficient account balance")]
    InsufficientBalance,
    #[error("issuance aborted: {0}")]
    IssuanceAborted(String),
    #[error("challenge does not match coin candidate count")]
    ChallengeMismatch,
    #[error("snapshot malformed: {0}")]
    Snapshot(#[from] WireError),
    #[error(transparent)]
    Funds(#[from] FundsError),
}

/// Where the shares revealed on spend come from.
#[derive(Debug, Clone, PartialEq, Eq)]
enum ShareSource {
    /// Withdrawer custody: openings of the coin's own surviving candidates.
    Withdrawn { openings: Vec<CandidateOpening> },
    /// Received custody: a fresh endorsement set of this wallet's identity,
    /// fixed at receive time and embedded in the record on spend.
    Endorsed {
        candidates: Vec<CoinCandidate>,
        openings: Vec<CandidateOpening>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CustodyEntry {
    chain: TransferChain,
    spend_secret: BigUint,
    spend_public: BigUint,
    source: ShareSource,
}

/// What a payee hands the payer before an offline payment: a fresh one-time
/// key and the challenge bits the transfer record must answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaymentChallenge {
    pub challenge: Vec<u8>,
    pub payee_public: BigUint,
}

impl PaymentChallenge {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.bytes(&self.challenge).biguint(&self.payee_public);
        enc.finish()
    }

    pub fn decode_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut dec = Decoder::new(bytes);
        let out = Self {
            challenge: dec.bytes()?,
            payee_public: dec.biguint()?,
        };
        dec.finish()?;
        Ok(out)
    }
}

/// Receiver-side decision for an incoming statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReceiveDecision {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    DuplicateSerial,
    NotAddressedToMe,
    Chain(InvalidReason),
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::DuplicateSerial => f.write_str("DuplicateSerial"),
            RejectReason::NotAddressedToMe => f.write_str("NotAddressedToMe"),
            RejectReason::Chain(r) => write!(f, "{r}"),
        }
    }
}

/// Per-coin result of a synchronization pass.
#[derive(Debug, Clone)]
pub struct ReconciliationEntry {
    pub serial: Vec<u8>,
    pub amount: u64,
    pub result: SettlementResult,
    pub credited: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ReconciliationReport {
    pub entries: Vec<ReconciliationEntry>,
    pub balance_after: u64,
}

/// A user's request to be made whole for coins on a lost device. Validity is
/// decided by the trust anchor, never the wallet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryClaim {
    pub owner_identity: Vec<u8>,
    pub items: Vec<ClaimItem>,
    pub claim_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimItem {
    pub serial: Vec<u8>,
    pub denomination: u64,
}

pub struct Wallet {
    owner_identity: Vec<u8>,
    group: SchnorrGroup,
    long_term: SchnorrKeyPair,
    tee_mode: TeeMode,
    candidate_count: usize,
    recovery_enabled: bool,
    monotonic_counter: u64,
    coins: std::collections::BTreeMap<Vec<u8>, CustodyEntry>,
    pending_incoming: Vec<TransactionStatement>,
    seen_serials: std::collections::BTreeSet<Vec<u8>>,
    outstanding_receive: std::collections::BTreeMap<Vec<u8>, BigUint>,
    online_balance_shadow: u64,
    rng: SimRng,
}

impl Wallet {
    pub fn new(
        owner_identity: &[u8],
        group: SchnorrGroup,
        tee_mode: TeeMode,
        candidate_count: usize,
        recovery_enabled: bool,
        mut rng: SimRng,
    ) -> Self {
        let long_term = SchnorrKeyPair::generate(&group, &mut rng);
        Self {
            owner_identity: owner_identity.to_vec(),
            group,
            long_term,
            tee_mode,
            candidate_count,
            recovery_enabled,
            monotonic_counter: 0,
            coins: Default::default(),
            pending_incoming: Vec::new(),
            seen_serials: Default::default(),
            outstanding_receive: Default::default(),
            online_balance_shadow: 0,
            rng,
        }
    }

    pub fn owner_identity(&self) -> &[u8] {
        &self.owner_identity
    }

    pub fn long_term_public(&self) -> &BigUint {
        self.long_term.public()
    }

    pub fn tee_mode(&self) -> TeeMode {
        self.tee_mode
    }

    pub fn monotonic_counter(&self) -> u64 {
        self.monotonic_counter
    }

    pub fn online_balance_shadow(&self) -> u64 {
        self.online_balance_shadow
    }

    /// Challenge bits per spend: one per surviving coin candidate.
    pub fn challenge_bits(&self) -> usize {
        self.candidate_count / 2
    }

    /// Serials currently in spendable custody, in canonical order.
    pub fn held_serials(&self) -> Vec<Vec<u8>> {
        self.coins.keys().cloned().collect()
    }

    pub fn holds(&self, serial: &[u8]) -> bool {
        self.coins.contains_key(serial)
    }

    pub fn held_chain(&self, serial: &[u8]) -> Option<&TransferChain> {
        self.coins.get(serial).map(|e| &e.chain)
    }

    pub fn held_value(&self) -> u64 {
        self.coins.values().map(|e| e.chain.coin.denomination).sum()
    }

    pub fn pending_statements(&self) -> &[TransactionStatement] {
        &self.pending_incoming
    }

    /// Run the blind cut-and-choose issuance with the TA. On success the
    /// wallet holds the new coin and the TA has debited the account while
    /// logging only the blinded value.
    pub fn withdraw(
        &mut self,
        ta: &mut TrustAnchor,
        denomination: u64,
        tick: u64,
    ) -> Result<BigUint, WalletError> {
        let candidates =
            make_candidates(&self.owner_identity, self.candidate_count, &mut self.rng)?;
        let publics: Vec<CoinCandidate> = candidates.iter().map(|(c, _)| c.clone()).collect();
        let openings: Vec<CandidateOpening> = candidates.into_iter().map(|(_, o)| o).collect();

        let auth_ctx = withdraw_auth_context(&self.owner_identity, denomination, tick);
        let auth = schnorr_prove(&self.group, &self.long_term, &auth_ctx, &mut self.rng);

        let challenge = ta
            .begin_issue(
                &self.owner_identity,
                denomination,
                publics.clone(),
                &auth,
                tick,
            )
            .map_err(map_ta_error)?;

        let survivors: Vec<usize> = (0..self.candidate_count)
            .filter(|i| !challenge.subset.contains(i))
            .collect();
        let surviving_candidates: Vec<CoinCandidate> =
            survivors.iter().map(|&i| publics[i].clone()).collect();
        let surviving_openings: Vec<CandidateOpening> =
            survivors.iter().map(|&i| openings[i].clone()).collect();

        let spend_key = SchnorrKeyPair::generate(&self.group, &mut self.rng);
        let serial = self.rng.gen_biguint(SERIAL_BITS);
        let mut coin = Coin {
            serial: serial.clone(),
            denomination,
            issuer_signature: BigUint::from(0u32),
            expiry: challenge.expiry,
            candidates: surviving_candidates,
            owner_public: spend_key.public().clone(),
        };

        let rsa_pub = ta.public_key().rsa.clone();
        let message = coin.body_message(&rsa_pub);
        let factor = BlindingFactor::random(&rsa_pub, &mut self.rng);
        let blinded = blind(&message, &rsa_pub, &factor)
            .map_err(|e| WalletError::IssuanceAborted(e.to_string()))?;

        let subset_openings = open_candidates(&openings, &challenge.subset)?;
        let blind_sig = ta
            .finalize_issue(&self.owner_identity, &subset_openings, &blinded, tick)
            .map_err(map_ta_error)?;
        coin.issuer_signature = unblind(&blind_sig, &factor, &rsa_pub);

        if !rsa_verify(&message, &coin.issuer_signature, &rsa_pub) {
            return Err(WalletError::IssuanceAborted(
                "issuer signature invalid".into(),
            ));
        }

        self.coins.insert(
            coin.serial_bytes(),
            CustodyEntry {
                chain: TransferChain::new(coin),
                spend_secret: spend_key.secret().clone(),
                spend_public: spend_key.public().clone(),
                source: ShareSource::Withdrawn {
                    openings: surviving_openings,
                },
            },
        );
        self.online_balance_shadow = ta.balance(&self.owner_identity);
        Ok(serial)
    }

    /// Payee side, before the payment: mint a one-time key and challenge
    /// bits for the payer to answer.
    pub fn prepare_receive(&mut self) -> PaymentChallenge {
        let key = SchnorrKeyPair::generate(&self.group, &mut self.rng);
        let challenge: Vec<u8> = (0..self.challenge_bits())
            .map(|_| u8::from(self.rng.gen_biguint(1).bit(0)))
            .collect();
        self.outstanding_receive
            .insert(key.public().to_bytes_be(), key.secret().clone());
        PaymentChallenge {
            challenge,
            payee_public: key.public().clone(),
        }
    }

    /// Spend a held coin offline. Removes the coin from custody, increments
    /// the monotonic counter and binds it into the record's proof context.
    pub fn pay_offline(
        &mut self,
        serial: &[u8],
        payment: &PaymentChallenge,
        tick: u64,
    ) -> Result<TransactionStatement, WalletError> {
        let entry = self.coins.get(serial).ok_or(WalletError::CoinNotHeld)?;
        let coin = &entry.chain.coin;
        if let Some(expiry) = coin.expiry {
            if tick >= expiry {
                return Err(WalletError::Expired);
            }
        }
        if payment.challenge.len() != coin.candidates.len()
            || payment.challenge.iter().any(|b| *b > 1)
        {
            return Err(WalletError::ChallengeMismatch);
        }

        let entry = self.coins.remove(serial).expect("checked above");
        self.monotonic_counter += 1;

        let hop_index = entry.chain.records.len() as u32;
        let (revealed, endorser_candidates) = match &entry.source {
            ShareSource::Withdrawn { openings } => {
                (reveal_shares(&payment.challenge, openings), Vec::new())
            }
            ShareSource::Endorsed {
                candidates,
                openings,
            } => (
                reveal_shares(&payment.challenge, openings),
                candidates.clone(),
            ),
        };

        let context = TransferRecord::proof_context(
            &entry.chain.coin.serial,
            &RecordContext {
                hop_index,
                challenge: payment.challenge.clone(),
                payee_public: payment.payee_public.clone(),
                tick,
                spend_counter: self.monotonic_counter,
                endorser_candidates: endorser_candidates.clone(),
            },
        );
        let key = SchnorrKeyPair::from_secret(&self.group, entry.spend_secret.clone());
        let proof = schnorr_prove(&self.group, &key, &context, &mut self.rng);

        let record = TransferRecord {
            hop_index,
            payer_public: entry.spend_public.clone(),
            payer_coin_proof: proof,
            challenge: payment.challenge.clone(),
            revealed_shares: revealed,
            payee_public: payment.payee_public.clone(),
            tick,
            spend_counter: self.monotonic_counter,
            endorser_candidates,
        };

        let amount = entry.chain.coin.denomination;
        let grown = append_transfer(&entry.chain, record)?;
        // A coin spent onward is no longer ours to settle.
        self.pending_incoming
            .retain(|st| st.chain.coin.serial_bytes() != serial);

        Ok(TransactionStatement {
            chain: grown,
            sender_spec: entry.spend_public,
            receiver_spec: payment.payee_public.clone(),
            amount,
        })
    }

    /// Receiver's offline acceptance: the local validity check plus the
    /// duplicate-serial cache. No TA contact; acceptance never depends on
    /// connectivity.
    pub fn receive_offline(
        &mut self,
        statement: &TransactionStatement,
        ta_public: &TaPublicKey,
        tick: u64,
    ) -> ReceiveDecision {
        let serial = statement.chain.coin.serial_bytes();
        if self.seen_serials.contains(&serial) {
            return ReceiveDecision::Reject(RejectReason::DuplicateSerial);
        }
        let key_bytes = statement.receiver_spec.to_bytes_be();
        if !self.outstanding_receive.contains_key(&key_bytes) {
            return ReceiveDecision::Reject(RejectReason::NotAddressedToMe);
        }
        match verify_chain(statement, ta_public, tick) {
            ChainVerdict::Invalid(reason) => ReceiveDecision::Reject(RejectReason::Chain(reason)),
            ChainVerdict::Valid => {
                let secret = self
                    .outstanding_receive
                    .remove(&key_bytes)
                    .expect("checked above");
                let endorsement = generate_candidates(
                    &self.owner_identity,
                    statement.chain.coin.candidates.len(),
                    &mut self.rng,
                )
                .expect("identity non-empty");
                let (candidates, openings): (Vec<_>, Vec<_>) = endorsement.into_iter().unzip();
                self.coins.insert(
                    serial.clone(),
                    CustodyEntry {
                        chain: statement.chain.clone(),
                        spend_secret: secret,
                        spend_public: statement.receiver_spec.clone(),
                        source: ShareSource::Endorsed {
                            candidates,
                            openings,
                        },
                    },
                );
                self.pending_incoming.push(statement.clone());
                self.seen_serials.insert(serial);
                ReceiveDecision::Accept
            }
        }
    }

    /// Submit every offline-received coin still in custody for settlement.
    /// Settled coins are redeemed into the account; detected doubles and
    /// expired coins become worthless evidence.
    pub fn sync(&mut self, ta: &mut TrustAnchor, tick: u64) -> ReconciliationReport {
        let mut report = ReconciliationReport::default();
        let pending = std::mem::take(&mut self.pending_incoming);
        for statement in pending {
            let serial = statement.chain.coin.serial_bytes();
            if !self.coins.contains_key(&serial) {
                continue; // spent onward in the meantime
            }
            let result = ta.settle(&self.owner_identity, &statement, tick);
            let credited = match &result {
                SettlementResult::Settled => statement.amount,
                _ => 0,
            };
            self.coins.remove(&serial);
            report.entries.push(ReconciliationEntry {
                serial,
                result,
                credited,
            });
        }
        self.online_balance_shadow = ta.balance(&self.owner_identity);
        report.balance_after = self.online_balance_shadow;
        report
    }

    /// Byte-exact snapshot of the full wallet state. Refused by a secure
    /// element.
    pub fn export_state(&self) -> Result<Vec<u8>, WalletError> {
        if self.tee_mode == TeeMode::SecureElement {
            return Err(WalletError::TeeViolation("state export"));
        }
        Ok(self.snapshot_bytes())
    }

    /// Replace this wallet's state with a previously exported snapshot.
    /// Refused by a secure element; this is the rollback surface.
    pub fn import_state(&mut self, bytes: &[u8]) -> Result<(), WalletError> {
        if self.tee_mode == TeeMode::SecureElement {
            return Err(WalletError::TeeViolation("state import"));
        }
        *self = Self::from_snapshot(bytes)?;
        Ok(())
    }

    /// Instantiate a wallet from snapshot bytes (the clone surface; the
    /// export guard is the secure element's line of defense).
    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, WalletError> {
        let mut dec = Decoder::new(bytes);
        let wallet = Self::decode(&mut dec)?;
        dec.finish().map_err(WalletError::Snapshot)?;
        Ok(wallet)
    }

    /// Build a claim for lost coins. The wallet can only assert what it
    /// knows; the TA decides validity after expiry.
    pub fn file_recovery_claim(
        &self,
        serials: &[Vec<u8>],
        tick: u64,
    ) -> Result<RecoveryClaim, WalletError> {
        if !self.recovery_enabled {
            return Err(WalletError::RecoveryDisabled);
        }
        let mut items = Vec::new();
        for serial in serials {
            let entry = self.coins.get(serial).ok_or(WalletError::CoinNotHeld)?;
            items.push(ClaimItem {
                serial: serial.clone(),
                denomination: entry.chain.coin.denomination,
            });
        }
        Ok(RecoveryClaim {
            owner_identity: self.owner_identity.clone(),
            items,
            claim_tick: tick,
        })
    }

    fn snapshot_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.bytes(&self.owner_identity);
        self.group.encode_into(&mut enc);
        enc.biguint(self.long_term.secret())
            .biguint(self.long_term.public())
            .u8(match self.tee_mode {
                TeeMode::Unprotected => 0,
                TeeMode::SecureElement => 1,
            })
            .u32(self.candidate_count as u32)
            .bool(self.recovery_enabled)
            .u64(self.monotonic_counter);

        let entries: Vec<_> = self.coins.values().collect();
        enc.list(&entries, |e, entry| {
            entry.chain.encode_into(e);
            e.biguint(&entry.spend_secret).biguint(&entry.spend_public);
            match &entry.source {
                ShareSource::Withdrawn { openings } => {
                    e.u8(0);
                    e.list(openings, |e, o| o.encode_into(e));
                }
                ShareSource::Endorsed {
                    candidates,
                    openings,
                } => {
                    e.u8(1);
                    e.list(candidates, |e, c| c.encode_into(e));
                    e.list(openings, |e, o| o.encode_into(e));
                }
            }
        });

        let pending: Vec<Vec<u8>> = self.pending_incoming.iter().map(|s| s.encode()).collect();
        enc.list(&pending, |e, p| {
            e.bytes(p);
        });
        let seen: Vec<Vec<u8>> = self.seen_serials.iter().cloned().collect();
        enc.list(&seen, |e, s| {
            e.bytes(s);
        });
        let outstanding: Vec<(Vec<u8>, BigUint)> = self
            .outstanding_receive
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        enc.list(&outstanding, |e, (k, v)| {
            e.bytes(k).biguint(v);
        });
        enc.u64(self.online_balance_shadow);

        let (seed, word_pos) = rng_state(&self.rng);
        enc.raw(&seed).u128(word_pos);
        enc.finish()
    }

    fn decode(dec: &mut Decoder) -> Result<Self, WalletError> {
        let owner_identity = dec.bytes()?;
        let group = SchnorrGroup::decode(dec)?;
        let secret = dec.biguint()?;
        let _public = dec.biguint()?;
        let long_term = SchnorrKeyPair::from_secret(&group, secret);
        let tee_mode = match dec.u8()? {
            0 => TeeMode::Unprotected,
            1 => TeeMode::SecureElement,
            _ => return Err(WireError::Malformed("tee mode").into()),
        };
        let candidate_count = dec.u32()? as usize;
        let recovery_enabled = dec.bool()?;
        let monotonic_counter = dec.u64()?;

        let entries = dec.list(|d| {
            let chain = TransferChain::decode(d)?;
            let spend_secret = d.biguint()?;
            let spend_public = d.biguint()?;
            let source = match d.u8()? {
                0 => ShareSource::Withdrawn {
                    openings: d.list(CandidateOpening::decode)?,
                },
                1 => ShareSource::Endorsed {
                    candidates: d.list(CoinCandidate::decode)?,
                    openings: d.list(CandidateOpening::decode)?,
                },
                _ => return Err(WireError::Malformed("share source")),
            };
            Ok((
                chain.coin.serial_bytes(),
                CustodyEntry {
                    chain,
                    spend_secret,
                    spend_public,
                    source,
                },
            ))
        })?;
        let coins = entries.into_iter().collect();

        let pending_raw = dec.list(|d| d.bytes())?;
        let mut pending_incoming = Vec::with_capacity(pending_raw.len());
        for raw in pending_raw {
            pending_incoming.push(TransactionStatement::decode_bytes(&raw)?);
        }
        let seen = dec.list(|d| d.bytes())?;
        let outstanding = dec.list(|d| Ok((d.bytes()?, d.biguint()?)))?;
        let online_balance_shadow = dec.u64()?;
        let seed: [u8; 32] = dec
            .raw(32)?
            .try_into()
            .map_err(|_| WireError::Malformed("rng seed"))?;
        let word_pos = dec.u128()?;

        Ok(Self {
            owner_identity,
            group,
            long_term,
            tee_mode,
            candidate_count,
            recovery_enabled,
            monotonic_counter,
            coins,
            pending_incoming,
            seen_serials: seen.into_iter().collect(),
            outstanding_receive: outstanding.into_iter().collect(),
            online_balance_shadow,
            rng: rng_from_state(seed, word_pos),
        })
    }
}

fn reveal_shares(challenge: &[u8], openings: &[CandidateOpening]) -> Vec<RevealedShare> {
    challenge
        .iter()
        .zip(openings)
        .map(|(bit, opening)| {
            let side = if *bit == 0 {
                &opening.left
            } else {
                &opening.right
            };
            RevealedShare {
                share: side.payload.clone(),
                salt: side.salt,
            }
        })
        .collect()
}

fn map_ta_error(err: TaError) -> WalletError {
    match err {
        TaError::InsufficientBalance => WalletError::InsufficientBalance,
        other => WalletError::IssuanceAborted(other.to_string()),
    }
}
