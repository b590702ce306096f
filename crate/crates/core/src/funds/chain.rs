//! Chain extension, the receiver's offline acceptance check, and
//! double-spender identification.

use super::{
    ChainVerdict, Coin, CoinCandidate, Extraction, FundsError, InvalidReason, TaPublicKey,
    TransactionStatement, TransferChain, TransferRecord,
};
use crate::crypto::{reconstruct_identity, rsa_verify, schnorr_verify};

/// Append a record to a chain, returning the grown chain. The record must
/// extend the chain exactly (`hop_index == records.len()`) and be internally
/// consistent.
pub fn append_transfer(
    chain: &TransferChain,
    record: TransferRecord,
) -> Result<TransferChain, FundsError> {
    if record.hop_index as usize != chain.records.len() {
        return Err(FundsError::HopIndexMismatch {
            got: record.hop_index,
            len: chain.records.len(),
        });
    }
    check_record_shape(&record)?;
    let mut grown = chain.clone();
    grown.records.push(record);
    debug_assert!(grown.byte_len() > chain.byte_len());
    Ok(grown)
}

fn check_record_shape(record: &TransferRecord) -> Result<(), FundsError> {
    if record.challenge.iter().any(|b| *b > 1) {
        return Err(FundsError::InvalidRecord("challenge bits must be 0 or 1"));
    }
    if record.revealed_shares.len() != record.challenge.len() {
        return Err(FundsError::InvalidRecord("share count != challenge bits"));
    }
    if record.hop_index == 0 && !record.endorser_candidates.is_empty() {
        return Err(FundsError::InvalidRecord("hop 0 carries no endorser set"));
    }
    if record.hop_index > 0 && record.endorser_candidates.len() != record.challenge.len() {
        return Err(FundsError::InvalidRecord("endorser set != challenge bits"));
    }
    Ok(())
}

/// The receiver's entire offline acceptance check. Uses only the statement,
/// the issuer public key bundle and the local clock; no ledger access.
///
/// Valid iff the issuer signature verifies, every record's proof and share
/// openings verify under the per-hop candidate set, hop indices are
/// contiguous, each record's payee key is the next record's payer key
/// (anchored at the coin's owner key), and the expiry (if set) has not
/// passed at `at_tick`.
pub fn verify_chain(
    statement: &TransactionStatement,
    ta_public: &TaPublicKey,
    at_tick: u64,
) -> ChainVerdict {
    use ChainVerdict::Invalid;

    let coin = &statement.chain.coin;
    if coin.denomination == 0 {
        return Invalid(InvalidReason::BadDenomination);
    }
    if statement.amount != coin.denomination {
        return Invalid(InvalidReason::AmountMismatch);
    }
    let message = coin.body_message(&ta_public.rsa);
    if !rsa_verify(&message, &coin.issuer_signature, &ta_public.rsa) {
        return Invalid(InvalidReason::BadIssuerSignature);
    }
    if let Some(expiry) = coin.expiry {
        // Spendable strictly before the expiry tick.
        if at_tick >= expiry {
            return Invalid(InvalidReason::Expired);
        }
    }
    let records = &statement.chain.records;
    if records.is_empty() {
        return Invalid(InvalidReason::EmptyChain);
    }

    let mut expected_payer = &coin.owner_public;
    for (i, record) in records.iter().enumerate() {
        if record.hop_index as usize != i {
            return Invalid(InvalidReason::HopIndexMismatch);
        }
        if record.payer_public != *expected_payer {
            return Invalid(InvalidReason::ChainLinkBroken);
        }
        if record.challenge.iter().any(|b| *b > 1) {
            return Invalid(InvalidReason::MalformedChallenge);
        }
        let candidate_set: &[CoinCandidate] = if i == 0 {
            if !record.endorser_candidates.is_empty() {
                return Invalid(InvalidReason::UnexpectedEndorserCandidates);
            }
            &coin.candidates
        } else {
            &record.endorser_candidates
        };
        if record.challenge.len() != candidate_set.len()
            || record.revealed_shares.len() != candidate_set.len()
        {
            return Invalid(InvalidReason::ChallengeLengthMismatch);
        }
        for ((bit, share), candidate) in record
            .challenge
            .iter()
            .zip(&record.revealed_shares)
            .zip(candidate_set)
        {
            let commitment = if *bit == 0 {
                &candidate.left_commitment
            } else {
                &candidate.right_commitment
            };
            if !commitment.verify_parts(&share.share, &share.salt) {
                return Invalid(InvalidReason::BadShares);
            }
        }
        let context = record.context_for(&coin.serial);
        if !schnorr_verify(
            &ta_public.group,
            &record.payer_public,
            &context,
            &record.payer_coin_proof,
        ) {
            return Invalid(InvalidReason::BadProof);
        }
        expected_payer = &record.payee_public;
    }

    let last = records.last().expect("non-empty");
    let first_payer = &records[0].payer_public;
    let sender = if records.len() == 1 {
        first_payer
    } else {
        &records[records.len() - 2].payee_public
    };
    if statement.sender_spec != *sender {
        return Invalid(InvalidReason::SenderMismatch);
    }
    if statement.receiver_spec != last.payee_public {
        return Invalid(InvalidReason::ReceiverMismatch);
    }
    ChainVerdict::Valid
}

/// Identify a double spender from two conflicting hop-0 records of the same
/// coin. At every candidate position where the challenge bits differ, the
/// two records reveal opposite shares and their XOR is the withdrawer
/// identity; all differing positions must agree.
pub fn extract_double_spender(
    record_a: &TransferRecord,
    record_b: &TransferRecord,
    coin: &Coin,
) -> Result<Extraction, FundsError> {
    if record_a.hop_index != 0 || record_b.hop_index != 0 {
        return Err(FundsError::InvalidRecord("extraction expects hop-0 records"));
    }
    extract_with_candidates(record_a, record_b, &coin.candidates)
}

/// Share-based extraction against an explicit candidate set; used for
/// forks at later hops, where the records carry the endorser's candidates.
pub fn extract_with_candidates(
    record_a: &TransferRecord,
    record_b: &TransferRecord,
    candidates: &[CoinCandidate],
) -> Result<Extraction, FundsError> {
    let n = candidates.len();
    if record_a.challenge.len() != n
        || record_b.challenge.len() != n
        || record_a.revealed_shares.len() != n
        || record_b.revealed_shares.len() != n
    {
        return Err(FundsError::SerialMismatch);
    }
    // Both records must open this candidate set; a record for a different
    // coin (or endorser) will not.
    for (record, label) in [(record_a, "a"), (record_b, "b")] {
        let _ = label;
        for ((bit, share), candidate) in record
            .challenge
            .iter()
            .zip(&record.revealed_shares)
            .zip(candidates)
        {
            let commitment = if *bit == 0 {
                &candidate.left_commitment
            } else {
                &candidate.right_commitment
            };
            if !commitment.verify_parts(&share.share, &share.salt) {
                return Err(FundsError::SerialMismatch);
            }
        }
    }

    let mut identity: Option<Vec<u8>> = None;
    for i in 0..n {
        if record_a.challenge[i] == record_b.challenge[i] {
            continue;
        }
        let candidate_identity = reconstruct_identity(
            &record_a.revealed_shares[i].share,
            &record_b.revealed_shares[i].share,
        )
        .map_err(|_| FundsError::SerialMismatch)?;
        match &identity {
            None => identity = Some(candidate_identity),
            Some(prev) if *prev == candidate_identity => {}
            Some(_) => return Err(FundsError::SerialMismatch),
        }
    }
    Ok(match identity {
        Some(id) => Extraction::Identified(id),
        None => Extraction::Unidentifiable,
    })
}
