//! Line-delimited trace records.
//!
//! A trace file starts with a header carrying the world setup, followed by
//! one event per line: tick, actor, event kind, payload digest, outcome,
//! payload hex (tab-separated). The payload is the canonical encoding of
//! the event detail, so a finished trace is sufficient input for every
//! auditor, and identical runs produce identical bytes.

use crate::crypto::sha256;
use crate::wire::{Decoder, Encoder, WireError};
use thiserror::Error;

pub const TRACE_HEADER_TAG: &str = "# opfsim-trace";
pub const TRACE_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace corrupt: {0}")]
    Corrupt(String),
    #[error("trace corrupt: {0}")]
    Wire(#[from] WireError),
}

/// World setup recorded in the trace header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeginInfo {
    pub seed: u64,
    pub candidate_count: u32,
    pub expiry_ticks: Option<u64>,
    pub rsa_bits: u32,
    /// (party name, owner identity, initial balance, tee mode label)
    pub parties: Vec<(String, Vec<u8>, u64, String)>,
}

impl BeginInfo {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(self.seed)
            .u32(self.candidate_count)
            .opt_u64(self.expiry_ticks)
            .u32(self.rsa_bits)
            .list(&self.parties, |e, (name, owner, balance, tee)| {
                e.str(name).bytes(owner).u64(*balance).str(tee);
            });
        enc.finish()
    }

    pub fn decode_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut dec = Decoder::new(bytes);
        let info = Self {
            seed: dec.u64()?,
            candidate_count: dec.u32()?,
            expiry_ticks: dec.opt_u64()?,
            rsa_bits: dec.u32()?,
            parties: dec.list(|d| Ok((d.str()?, d.bytes()?, d.u64()?, d.str()?)))?,
        };
        dec.finish()?;
        Ok(info)
    }
}

/// Structured payload of one trace event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventDetail {
    Connectivity {
        online: Vec<String>,
        links: Vec<(String, String)>,
    },
    Withdraw {
        party: String,
        owner: Vec<u8>,
        denomination: u64,
        serial: Vec<u8>,
        expiry: Option<u64>,
        blinded: Vec<u8>,
    },
    Pay {
        payer: String,
        payee: String,
        serial: Vec<u8>,
        hop: u32,
        counter: u64,
        chain_bytes: u64,
        statement: [u8; 32],
        attack: bool,
    },
    Deliver {
        sender: String,
        receiver: String,
        statement: [u8; 32],
        attack: bool,
    },
    Receive {
        party: String,
        serial: Vec<u8>,
        statement: [u8; 32],
        attack: bool,
    },
    Export {
        party: String,
        snapshot: [u8; 32],
        serials: Vec<Vec<u8>>,
    },
    Import {
        party: String,
        snapshot: [u8; 32],
        serials: Vec<Vec<u8>>,
        fresh: bool,
    },
    TeeViolation {
        party: String,
        op: String,
    },
    Settle {
        party: String,
        owner: Vec<u8>,
        serial: Vec<u8>,
        amount: u64,
        result: String,
        credited: u64,
    },
    Sync {
        party: String,
        submitted: u32,
        balance: u64,
    },
    Claim {
        party: String,
        owner: Vec<u8>,
        serials: Vec<Vec<u8>>,
        denominations: Vec<u64>,
    },
    Recovery {
        owner: Vec<u8>,
        serial: Vec<u8>,
        denomination: u64,
        outcome: String,
    },
}

impl EventDetail {
    pub fn kind(&self) -> &'static str {
        match self {
            EventDetail::Connectivity { .. } => "connectivity",
            EventDetail::Withdraw { .. } => "withdraw",
            EventDetail::Pay { .. } => "pay",
            EventDetail::Deliver { .. } => "deliver",
            EventDetail::Receive { .. } => "receive",
            EventDetail::Export { .. } => "export",
            EventDetail::Import { .. } => "import",
            EventDetail::TeeViolation { .. } => "tee_violation",
            EventDetail::Settle { .. } => "settle",
            EventDetail::Sync { .. } => "sync",
            EventDetail::Claim { .. } => "claim",
            EventDetail::Recovery { .. } => "recovery",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match self {
            EventDetail::Connectivity { online, links } => {
                enc.list(online, |e, p| {
                    e.str(p);
                })
                .list(links, |e, (a, b)| {
                    e.str(a).str(b);
                });
            }
            EventDetail::Withdraw {
                party,
                owner,
                denomination,
                serial,
                expiry,
                blinded,
            } => {
                enc.str(party)
                    .bytes(owner)
                    .u64(*denomination)
                    .bytes(serial)
                    .opt_u64(*expiry)
                    .bytes(blinded);
            }
            EventDetail::Pay {
                payer,
                payee,
                serial,
                hop,
                counter,
                chain_bytes,
                statement,
                attack,
            } => {
                enc.str(payer)
                    .str(payee)
                    .bytes(serial)
                    .u32(*hop)
                    .u64(*counter)
                    .u64(*chain_bytes)
                    .raw(statement)
                    .bool(*attack);
            }
            EventDetail::Deliver {
                sender,
                receiver,
                statement,
                attack,
            } => {
                enc.str(sender).str(receiver).raw(statement).bool(*attack);
            }
            EventDetail::Receive {
                party,
                serial,
                statement,
                attack,
            } => {
                enc.str(party).bytes(serial).raw(statement).bool(*attack);
            }
            EventDetail::Export {
                party,
                snapshot,
                serials,
            } => {
                enc.str(party).raw(snapshot).list(serials, |e, s| {
                    e.bytes(s);
                });
            }
            EventDetail::Import {
                party,
                snapshot,
                serials,
                fresh,
            } => {
                enc.str(party)
                    .raw(snapshot)
                    .list(serials, |e, s| {
                        e.bytes(s);
                    })
                    .bool(*fresh);
            }
            EventDetail::TeeViolation { party, op } => {
                enc.str(party).str(op);
            }
            EventDetail::Settle {
                party,
                owner,
                serial,
                amount,
                result,
                credited,
            } => {
                enc.str(party)
                    .bytes(owner)
                    .bytes(serial)
                    .u64(*amount)
                    .str(result)
                    .u64(*credited);
            }
            EventDetail::Sync {
                party,
                submitted,
                balance,
            } => {
                enc.str(party).u32(*submitted).u64(*balance);
            }
            EventDetail::Claim {
                party,
                owner,
                serials,
                denominations,
            } => {
                enc.str(party)
                    .bytes(owner)
                    .list(serials, |e, s| {
                        e.bytes(s);
                    })
                    .list(denominations, |e, d| {
                        e.u64(*d);
                    });
            }
            EventDetail::Recovery {
                owner,
                serial,
                denomination,
                outcome,
            } => {
                enc.bytes(owner)
                    .bytes(serial)
                    .u64(*denomination)
                    .str(outcome);
            }
        }
        enc.finish()
    }

    pub fn decode_bytes(kind: &str, bytes: &[u8]) -> Result<Self, TraceError> {
        let mut dec = Decoder::new(bytes);
        let detail = match kind {
            "connectivity" => EventDetail::Connectivity {
                online: dec.list(|d| d.str())?,
                links: dec.list(|d| Ok((d.str()?, d.str()?)))?,
            },
            "withdraw" => EventDetail::Withdraw {
                party: dec.str()?,
                owner: dec.bytes()?,
                denomination: dec.u64()?,
                serial: dec.bytes()?,
                expiry: dec.opt_u64()?,
                blinded: dec.bytes()?,
            },
            "pay" => EventDetail::Pay {
                payer: dec.str()?,
                payee: dec.str()?,
                serial: dec.bytes()?,
                hop: dec.u32()?,
                counter: dec.u64()?,
                chain_bytes: dec.u64()?,
                statement: digest32(&mut dec)?,
                attack: dec.bool()?,
            },
            "deliver" => EventDetail::Deliver {
                sender: dec.str()?,
                receiver: dec.str()?,
                statement: digest32(&mut dec)?,
                attack: dec.bool()?,
            },
            "receive" => EventDetail::Receive {
                party: dec.str()?,
                serial: dec.bytes()?,
                statement: digest32(&mut dec)?,
                attack: dec.bool()?,
            },
            "export" => EventDetail::Export {
                party: dec.str()?,
                snapshot: digest32(&mut dec)?,
                serials: dec.list(|d| d.bytes())?,
            },
            "import" => EventDetail::Import {
                party: dec.str()?,
                snapshot: digest32(&mut dec)?,
                serials: dec.list(|d| d.bytes())?,
                fresh: dec.bool()?,
            },
            "tee_violation" => EventDetail::TeeViolation {
                party: dec.str()?,
                op: dec.str()?,
            },
            "settle" => EventDetail::Settle {
                party: dec.str()?,
                owner: dec.bytes()?,
                serial: dec.bytes()?,
                amount: dec.u64()?,
                result: dec.str()?,
                credited: dec.u64()?,
            },
            "sync" => EventDetail::Sync {
                party: dec.str()?,
                submitted: dec.u32()?,
                balance: dec.u64()?,
            },
            "claim" => EventDetail::Claim {
                party: dec.str()?,
                owner: dec.bytes()?,
                serials: dec.list(|d| d.bytes())?,
                denominations: dec.list(|d| d.u64())?,
            },
            "recovery" => EventDetail::Recovery {
                owner: dec.bytes()?,
                serial: dec.bytes()?,
                denomination: dec.u64()?,
                outcome: dec.str()?,
            },
            other => return Err(TraceError::Corrupt(format!("unknown event kind {other}"))),
        };
        dec.finish()?;
        Ok(detail)
    }
}

fn digest32(dec: &mut Decoder) -> Result<[u8; 32], WireError> {
    dec.raw(32)?
        .try_into()
        .map_err(|_| WireError::Malformed("digest"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: u64,
    pub actor: String,
    pub detail: EventDetail,
    pub outcome: String,
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        let payload = self.detail.encode();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.tick,
            self.actor,
            self.detail.kind(),
            hex::encode(sha256(&payload)),
            self.outcome,
            hex::encode(&payload)
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, TraceError> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(TraceError::Corrupt(format!(
                "expected 6 fields, got {}",
                fields.len()
            )));
        }
        let tick = fields[0]
            .parse::<u64>()
            .map_err(|_| TraceError::Corrupt("bad tick".into()))?;
        let payload =
            hex::decode(fields[5]).map_err(|_| TraceError::Corrupt("bad payload hex".into()))?;
        let digest =
            hex::decode(fields[3]).map_err(|_| TraceError::Corrupt("bad digest hex".into()))?;
        if digest != sha256(&payload) {
            return Err(TraceError::Corrupt("payload digest mismatch".into()));
        }
        let detail = EventDetail::decode_bytes(fields[2], &payload)?;
        Ok(Self {
            tick,
            actor: fields[1].to_string(),
            detail,
            outcome: fields[4].to_string(),
        })
    }
}

/// Render a complete trace: header line plus one line per event.
pub fn render_trace(begin: &BeginInfo, events: &[TraceEvent]) -> String {
    let mut out = format!(
        "{TRACE_HEADER_TAG}\t{TRACE_VERSION}\t{}\n",
        hex::encode(begin.encode())
    );
    for ev in events {
        out.push_str(&ev.to_line());
        out.push('\n');
    }
    out
}

/// Parse a trace file back into the header and events.
pub fn parse_trace(text: &str) -> Result<(BeginInfo, Vec<TraceEvent>), TraceError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| TraceError::Corrupt("empty file".into()))?;
    let parts: Vec<&str> = header.split('\t').collect();
    if parts.len() != 3 || parts[0] != TRACE_HEADER_TAG || parts[1] != TRACE_VERSION {
        return Err(TraceError::Corrupt("bad header".into()));
    }
    let begin_bytes =
        hex::decode(parts[2]).map_err(|_| TraceError::Corrupt("bad header hex".into()))?;
    let begin = BeginInfo::decode_bytes(&begin_bytes).map_err(TraceError::Wire)?;
    let mut events = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        events.push(TraceEvent::parse_line(line)?);
    }
    Ok((begin, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_lines_roundtrip() {
        let ev = TraceEvent {
            tick: 7,
            actor: "alice".into(),
            detail: EventDetail::Withdraw {
                party: "alice".into(),
                owner: b"alice".to_vec(),
                denomination: 10,
                serial: vec![1, 2, 3],
                expiry: Some(17),
                blinded: vec![9, 9],
            },
            outcome: "ok".into(),
        };
        let parsed = TraceEvent::parse_line(&ev.to_line()).unwrap();
        assert_eq!(parsed, ev);
    }

    #[test]
    fn trace_roundtrips_and_detects_corruption() {
        let begin = BeginInfo {
            seed: 1,
            candidate_count: 8,
            expiry_ticks: None,
            rsa_bits: 128,
            parties: vec![("alice".into(), b"alice".to_vec(), 100, "unprotected".into())],
        };
        let events = vec![TraceEvent {
            tick: 0,
            actor: "net".into(),
            detail: EventDetail::Connectivity {
                online: vec!["alice".into()],
                links: vec![],
            },
            outcome: "ok".into(),
        }];
        let text = render_trace(&begin, &events);
        let (b2, e2) = parse_trace(&text).unwrap();
        assert_eq!(b2, begin);
        assert_eq!(e2, events);

        let tampered = text.replace("alice", "malice");
        assert!(parse_trace(&tampered).is_err());
    }
}
