//! The bearer fund model: coins, candidate commitments, transfer chains.
//!
//! A coin carries a serial, denomination, optional expiry, the one-time key
//! of its withdrawer and the cut-and-choose candidate commitments that
//! encode the withdrawer's identity. Each offline hop appends a transfer
//! record answering the payee's challenge bits with identity shares, so the
//! chain grows with every transfer and a fork at any hop exposes the forking
//! party.
//!
//! Everything here is value-semantic and immutable after construction;
//! `append_transfer` returns a new chain.

mod candidates;
mod chain;

pub use candidates::{
    generate_candidates, make_candidates, open_candidates, verify_candidate_opening,
};
pub use chain::{append_transfer, extract_double_spender, extract_with_candidates, verify_chain};

use crate::crypto::{Commitment, CommitmentOpening, RsaPublicKey, SchnorrGroup, SchnorrProof};
use crate::wire::{Decoder, Encoder, WireError};
use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FundsError {
    #[error("candidate count must be even and at least 4")]
    BadCandidateCount,
    #[error("candidate index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("record hop index {got} does not extend chain of length {len}")]
    HopIndexMismatch { got: u32, len: usize },
    #[error("invalid record: {0}")]
    InvalidRecord(&'static str),
    #[error("records do not spend the same coin")]
    SerialMismatch,
}

/// Issuer public material a receiver needs for the offline validity check:
/// the RSA issuance key and the proof group parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaPublicKey {
    pub rsa: RsaPublicKey,
    pub group: SchnorrGroup,
}

impl TaPublicKey {
    pub fn encode_into(&self, enc: &mut Encoder) {
        self.rsa.encode_into(enc);
        self.group.encode_into(enc);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            rsa: RsaPublicKey::decode(dec)?,
            group: SchnorrGroup::decode(dec)?,
        })
    }
}

/// One cut-and-choose candidate: a fresh serial part plus commitments to the
/// two XOR shares of the withdrawer identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoinCandidate {
    pub serial_part: BigUint,
    pub left_commitment: Commitment,
    pub right_commitment: Commitment,
}

impl CoinCandidate {
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.biguint(&self.serial_part);
        self.left_commitment.encode_into(enc);
        self.right_commitment.encode_into(enc);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            serial_part: dec.biguint()?,
            left_commitment: Commitment::decode(dec)?,
            right_commitment: Commitment::decode(dec)?,
        })
    }
}

/// Opening data the withdrawer (or endorser) retains for one candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateOpening {
    pub left: CommitmentOpening,
    pub right: CommitmentOpening,
}

impl CandidateOpening {
    pub fn encode_into(&self, enc: &mut Encoder) {
        self.left.encode_into(enc);
        self.right.encode_into(enc);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            left: CommitmentOpening::decode(dec)?,
            right: CommitmentOpening::decode(dec)?,
        })
    }
}

/// A bearer fund. The issuer signature covers the body hash (serial,
/// denomination, expiry, surviving candidates, owner key), so none of those
/// fields can be altered after issuance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coin {
    pub serial: BigUint,
    pub denomination: u64,
    pub issuer_signature: BigUint,
    pub expiry: Option<u64>,
    pub candidates: Vec<CoinCandidate>,
    /// One-time key of the withdrawer; hop-0 spends must prove knowledge of
    /// its secret, which is what keeps third parties out.
    pub owner_public: BigUint,
}

const COIN_BODY_TAG: &[u8] = b"opfsim.coin.v1";

impl Coin {
    /// Canonical bytes covered by the issuer signature.
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.biguint(&self.serial)
            .u64(self.denomination)
            .opt_u64(self.expiry)
            .list(&self.candidates, |e, c| c.encode_into(e))
            .biguint(&self.owner_public);
        enc.finish()
    }

    /// The RSA message for the coin: hash of the body reduced mod n.
    pub fn body_message(&self, key: &RsaPublicKey) -> BigUint {
        crate::crypto::hash_to_biguint_mod(COIN_BODY_TAG, &self.body_bytes(), &key.n)
    }

    pub fn serial_bytes(&self) -> Vec<u8> {
        self.serial.to_bytes_be()
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.biguint(&self.serial)
            .u64(self.denomination)
            .biguint(&self.issuer_signature)
            .opt_u64(self.expiry)
            .list(&self.candidates, |e, c| c.encode_into(e))
            .biguint(&self.owner_public);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            serial: dec.biguint()?,
            denomination: dec.u64()?,
            issuer_signature: dec.biguint()?,
            expiry: dec.opt_u64()?,
            candidates: dec.list(CoinCandidate::decode)?,
            owner_public: dec.biguint()?,
        })
    }
}

/// A revealed identity share: the payload plus the salt needed to recompute
/// its commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealedShare {
    pub share: Vec<u8>,
    pub salt: [u8; crate::crypto::SALT_LEN],
}

impl RevealedShare {
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.bytes(&self.share).raw(&self.salt);
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        let share = dec.bytes()?;
        let salt = dec
            .raw(crate::crypto::SALT_LEN)?
            .try_into()
            .map_err(|_| WireError::Malformed("share salt"))?;
        Ok(Self { share, salt })
    }
}

/// Per-hop endorsement. The challenge has one bit per candidate; bit 0
/// reveals the left share, bit 1 the right share. Hop 0 answers against the
/// coin's own candidates, later hops carry the endorser's candidate set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRecord {
    pub hop_index: u32,
    pub payer_public: BigUint,
    pub payer_coin_proof: SchnorrProof,
    pub challenge: Vec<u8>,
    pub revealed_shares: Vec<RevealedShare>,
    pub payee_public: BigUint,
    pub tick: u64,
    /// Wallet monotonic counter value bound into the proof context; makes a
    /// replayed or rolled-back spend distinguishable in evidence.
    pub spend_counter: u64,
    /// Empty at hop 0; the endorser's own identity-share commitments after.
    pub endorser_candidates: Vec<CoinCandidate>,
}

const SPEND_CONTEXT_TAG: &[u8] = b"opfsim.spend.v1";

impl TransferRecord {
    /// Context the payer's ownership proof is bound to. Pins the coin
    /// serial, hop position, challenge, payee key, tick and counter so a
    /// record cannot be grafted onto another chain or hop.
    pub fn proof_context(serial: &BigUint, record: &RecordContext) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.raw(SPEND_CONTEXT_TAG)
            .biguint(serial)
            .u32(record.hop_index)
            .bytes(&record.challenge)
            .biguint(&record.payee_public)
            .u64(record.tick)
            .u64(record.spend_counter)
            .list(&record.endorser_candidates, |e, c| c.encode_into(e));
        enc.finish()
    }

    pub fn context_for(&self, serial: &BigUint) -> Vec<u8> {
        Self::proof_context(
            serial,
            &RecordContext {
                hop_index: self.hop_index,
                challenge: self.challenge.clone(),
                payee_public: self.payee_public.clone(),
                tick: self.tick,
                spend_counter: self.spend_counter,
                endorser_candidates: self.endorser_candidates.clone(),
            },
        )
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u32(self.hop_index).biguint(&self.payer_public);
        self.payer_coin_proof.encode_into(enc);
        enc.bytes(&self.challenge)
            .list(&self.revealed_shares, |e, s| s.encode_into(e))
            .biguint(&self.payee_public)
            .u64(self.tick)
            .u64(self.spend_counter)
            .list(&self.endorser_candidates, |e, c| c.encode_into(e));
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            hop_index: dec.u32()?,
            payer_public: dec.biguint()?,
            payer_coin_proof: SchnorrProof::decode(dec)?,
            challenge: dec.bytes()?,
            revealed_shares: dec.list(RevealedShare::decode)?,
            payee_public: dec.biguint()?,
            tick: dec.u64()?,
            spend_counter: dec.u64()?,
            endorser_candidates: dec.list(CoinCandidate::decode)?,
        })
    }
}

/// Fields of a record that enter the proof context (everything except the
/// proof and the shares, which are derived).
pub struct RecordContext {
    pub hop_index: u32,
    pub challenge: Vec<u8>,
    pub payee_public: BigUint,
    pub tick: u64,
    pub spend_counter: u64,
    pub endorser_candidates: Vec<CoinCandidate>,
}

/// A coin plus its ordered endorsement history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferChain {
    pub coin: Coin,
    pub records: Vec<TransferRecord>,
}

impl TransferChain {
    pub fn new(coin: Coin) -> Self {
        Self {
            coin,
            records: Vec::new(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_into(&mut enc);
        enc.finish()
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        self.coin.encode_into(enc);
        enc.list(&self.records, |e, r| r.encode_into(e));
    }

    pub fn decode(dec: &mut Decoder) -> Result<Self, WireError> {
        Ok(Self {
            coin: Coin::decode(dec)?,
            records: dec.list(TransferRecord::decode)?,
        })
    }

    pub fn byte_len(&self) -> usize {
        self.encode().len()
    }

    pub fn digest(&self) -> [u8; 32] {
        crate::crypto::sha256(&self.encode())
    }
}

/// What travels from payer to payee: the chain plus the transaction frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionStatement {
    pub chain: TransferChain,
    /// One-time pseudonym of the payer (the key the last record proves).
    pub sender_spec: BigUint,
    /// One-time pseudonym of the payee (the key the last record names).
    pub receiver_spec: BigUint,
    pub amount: u64,
}

impl TransactionStatement {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.chain.encode_into(&mut enc);
        enc.biguint(&self.sender_spec)
            .biguint(&self.receiver_spec)
            .u64(self.amount);
        enc.finish()
    }

    pub fn decode_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut dec = Decoder::new(bytes);
        let st = Self {
            chain: TransferChain::decode(&mut dec)?,
            sender_spec: dec.biguint()?,
            receiver_spec: dec.biguint()?,
            amount: dec.u64()?,
        };
        dec.finish()?;
        Ok(st)
    }

    pub fn digest(&self) -> [u8; 32] {
        crate::crypto::sha256(&self.encode())
    }
}

/// Result of the receiver's (or TA's) structural validity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainVerdict {
    Valid,
    Invalid(InvalidReason),
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    BadDenomination,
    AmountMismatch,
    BadIssuerSignature,
    Expired,
    EmptyChain,
    HopIndexMismatch,
    UnexpectedEndorserCandidates,
    ChallengeLengthMismatch,
    MalformedChallenge,
    BadShares,
    BadProof,
    ChainLinkBroken,
    SenderMismatch,
    ReceiverMismatch,
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InvalidReason::BadDenomination => "BadDenomination",
            InvalidReason::AmountMismatch => "AmountMismatch",
            InvalidReason::BadIssuerSignature => "BadIssuerSignature",
            InvalidReason::Expired => "Expired",
            InvalidReason::EmptyChain => "EmptyChain",
            InvalidReason::HopIndexMismatch => "HopIndexMismatch",
            InvalidReason::UnexpectedEndorserCandidates => "UnexpectedEndorserCandidates",
            InvalidReason::ChallengeLengthMismatch => "ChallengeLengthMismatch",
            InvalidReason::MalformedChallenge => "MalformedChallenge",
            InvalidReason::BadShares => "BadShares",
            InvalidReason::BadProof => "BadProof",
            InvalidReason::ChainLinkBroken => "ChainLinkBroken",
            InvalidReason::SenderMismatch => "SenderMismatch",
            InvalidReason::ReceiverMismatch => "ReceiverMismatch",
        };
        f.write_str(s)
    }
}

/// Outcome of comparing two conflicting spends of one coin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    /// XOR of differing shares agreed at every differing position.
    Identified(Vec<u8>),
    /// Challenges were identical at every position (probability 2^-k).
    Unidentifiable,
}
