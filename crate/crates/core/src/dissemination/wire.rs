//! Fixed 184-byte distress frame.
//!
//! All integers are big-endian.
//!
//! ```text
//! offset size field
//!      0    1 version (0x01)
//!      1   16 msg_id
//!     17    8 origin node id
//!     25    1 msg_type (0 = alert, 1 = emergency)
//!     26    1 severity
//!     27    1 hop_count
//!     28    1 max_hops
//!     29    4 ttl_s
//!     33    8 created_at (seconds)
//!     41    1 trust_filter (bit0 friend, bit1 acquaintance, bit2 stranger, bit3 service)
//!     42    1 service_mask (bit0 medical, bit1 security, bit2 rescue, bit3 vigil)
//!     43    4 location
//!     47  137 payload, UTF-8, zero padded
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trust::{ClassMask, ServiceMask, TrustFilter};
use crate::{LocationId, NodeId};

pub const WIRE_VERSION: u8 = 0x01;
pub const FRAME_LEN: usize = 184;
pub const HEADER_LEN: usize = 47;
pub const MAX_PAYLOAD: usize = FRAME_LEN - HEADER_LEN;

const SERVICE_BIT: u8 = 1 << 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame must be {FRAME_LEN} bytes, got {0}")]
    WrongLength(usize),
    #[error("unsupported wire version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("unknown msg_type {0}")]
    InvalidMsgType(u8),
    #[error("hop_count {hop_count} exceeds max_hops {max_hops}")]
    HopCountExceedsMax { hop_count: u8, max_hops: u8 },
    #[error("payload is {0} bytes, at most {MAX_PAYLOAD} fit")]
    PayloadTooLong(usize),
    #[error("payload must not end with a NUL byte")]
    PayloadTrailingNul,
    #[error("payload is not valid UTF-8")]
    InvalidUtf8,
    #[error("reserved bits set in {field}: {value:#04x}")]
    ReservedBits { field: &'static str, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MsgId(pub [u8; 16]);

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl std::str::FromStr for MsgId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out).map_err(|e| format!("bad msg id `{s}`: {e}"))?;
        Ok(MsgId(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum MessageKind {
    Alert = 0,
    Emergency = 1,
}

impl TryFrom<u8> for MessageKind {
    type Error = WireError;
    fn try_from(v: u8) -> Result<Self, WireError> {
        match v {
            0 => Ok(MessageKind::Alert),
            1 => Ok(MessageKind::Emergency),
            other => Err(WireError::InvalidMsgType(other)),
        }
    }
}

/// Recipient filter carried in the frame. Service-tagged peers qualify only
/// when `service` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MessageFilter {
    pub classes: ClassMask,
    pub service: bool,
    pub services: ServiceMask,
}

impl MessageFilter {
    pub fn trust_filter(&self) -> TrustFilter {
        TrustFilter::new(
            self.classes,
            if self.service {
                self.services
            } else {
                ServiceMask::empty()
            },
        )
    }

    fn filter_byte(&self) -> u8 {
        self.classes.bits() | if self.service { SERVICE_BIT } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistressMessage {
    pub msg_id: MsgId,
    pub origin: NodeId,
    pub kind: MessageKind,
    pub severity: u8,
    pub hop_count: u8,
    pub max_hops: u8,
    pub ttl_s: u32,
    pub created_at: u64,
    pub filter: MessageFilter,
    pub location: LocationId,
    pub payload: String,
}

impl DistressMessage {
    /// Last second (inclusive) at which the message is still live.
    pub fn expires_at(&self) -> u64 {
        self.created_at + self.ttl_s as u64
    }

    pub fn is_live(&self, now_s: f64) -> bool {
        now_s <= self.expires_at() as f64
    }

    pub fn hops_left(&self) -> bool {
        self.hop_count < self.max_hops
    }

    pub fn encode(&self) -> Result<[u8; FRAME_LEN], WireError> {
        let payload = self.payload.as_bytes();
        if payload.len() > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLong(payload.len()));
        }
        if payload.last() == Some(&0) {
            return Err(WireError::PayloadTrailingNul);
        }
        if self.hop_count > self.max_hops {
            return Err(WireError::HopCountExceedsMax {
                hop_count: self.hop_count,
                max_hops: self.max_hops,
            });
        }
        let mut buf = [0u8; FRAME_LEN];
        let mut w = Cursor {
            buf: &mut buf,
            pos: 0,
        };
        w.put(&[WIRE_VERSION]);
        w.put(&self.msg_id.0);
        w.put(&self.origin.0.to_be_bytes());
        w.put(&[
            self.kind as u8,
            self.severity,
            self.hop_count,
            self.max_hops,
        ]);
        w.put(&self.ttl_s.to_be_bytes());
        w.put(&self.created_at.to_be_bytes());
        w.put(&[self.filter.filter_byte(), self.filter.services.bits()]);
        w.put(&self.location.0.to_be_bytes());
        debug_assert_eq!(w.pos, HEADER_LEN);
        w.put(payload);
        Ok(buf)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let frame: &[u8; FRAME_LEN] = bytes
            .try_into()
            .map_err(|_| WireError::WrongLength(bytes.len()))?;
        if frame[0] != WIRE_VERSION {
            return Err(WireError::UnsupportedVersion(frame[0]));
        }
        let kind = MessageKind::try_from(frame[25])?;
        let (hop_count, max_hops) = (frame[27], frame[28]);
        if hop_count > max_hops {
            return Err(WireError::HopCountExceedsMax {
                hop_count,
                max_hops,
            });
        }
        let filter_byte = frame[41];
        let classes =
            ClassMask::from_bits(filter_byte & !SERVICE_BIT).ok_or(WireError::ReservedBits {
                field: "trust_filter",
                value: filter_byte,
            })?;
        let services = ServiceMask::from_bits(frame[42]).ok_or(WireError::ReservedBits {
            field: "service_mask",
            value: frame[42],
        })?;
        let body = &frame[HEADER_LEN..];
        let end = body.iter().rposition(|&b| b != 0).map_or(0, |i| i + 1);
        let payload = std::str::from_utf8(&body[..end])
            .map_err(|_| WireError::InvalidUtf8)?
            .to_string();

        Ok(DistressMessage {
            msg_id: MsgId(frame[1..17].try_into().expect("16 bytes")),
            origin: NodeId(u64::from_be_bytes(
                frame[17..25].try_into().expect("8 bytes"),
            )),
            kind,
            severity: frame[26],
            hop_count,
            max_hops,
            ttl_s: u32::from_be_bytes(frame[29..33].try_into().expect("4 bytes")),
            created_at: u64::from_be_bytes(frame[33..41].try_into().expect("8 bytes")),
            filter: MessageFilter {
                classes,
                service: filter_byte & SERVICE_BIT != 0,
                services,
            },
            location: LocationId(u32::from_be_bytes(
                frame[43..47].try_into().expect("4 bytes"),
            )),
            payload,
        })
    }
}

struct Cursor<'a> {
    buf: &'a mut [u8; FRAME_LEN],
    pos: usize,
}

impl Cursor<'_> {
    fn put(&mut self, bytes: &[u8]) {
        self.buf[self.pos..self.pos + bytes.len()].copy_from_slice(bytes);
        self.pos += bytes.len();
    }
}
