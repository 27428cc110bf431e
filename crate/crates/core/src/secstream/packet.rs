//! Tiered selective protection and the packet wire format.
//!
//! Wire layout (big-endian):
//!
//! ```text
//! tier:u8 | interval:u64 | body_len:u32 | body | tag_len:u8 (0 or 16) | tag
//! ```

use sha2::{Digest, Sha256};

use super::keys::KeyState;
use super::SecError;
use crate::msgcore::Sensitivity;

pub const TAG_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProtectedPacket {
    pub tier: Sensitivity,
    pub interval_index: u64,
    pub body: Vec<u8>,
    pub tag: Option<[u8; TAG_LEN]>,
}

fn keystream_xor(key: &KeyState, data: &mut [u8]) {
    for (block_no, chunk) in data.chunks_mut(32).enumerate() {
        let mut h = Sha256::new();
        h.update(&key.key);
        h.update(key.interval_index.to_be_bytes());
        h.update((block_no as u64).to_be_bytes());
        let pad = h.finalize();
        for (b, p) in chunk.iter_mut().zip(pad.iter()) {
            *b ^= p;
        }
    }
}

/// Keyed hash over the packet header and body. The header is bound so that
/// rewriting the tier byte cannot turn a plaintext body into "ciphertext".
pub fn compute_tag(key: &KeyState, tier: Sensitivity, body: &[u8]) -> [u8; TAG_LEN] {
    let mut h = Sha256::new();
    h.update(&key.key);
    h.update([0x01]);
    h.update([tier.code()]);
    h.update(key.interval_index.to_be_bytes());
    h.update(body);
    let digest = h.finalize();
    let mut tag = [0u8; TAG_LEN];
    tag.copy_from_slice(&digest[..TAG_LEN]);
    tag
}

fn tags_equal(a: &[u8; TAG_LEN], b: &[u8; TAG_LEN]) -> bool {
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

pub fn protect(plaintext: &[u8], tier: Sensitivity, key: &KeyState) -> ProtectedPacket {
    match tier {
        Sensitivity::OpenAccess => ProtectedPacket {
            tier,
            interval_index: key.interval_index,
            body: plaintext.to_vec(),
            tag: None,
        },
        Sensitivity::LowSensitive => ProtectedPacket {
            tier,
            interval_index: key.interval_index,
            body: plaintext.to_vec(),
            tag: Some(compute_tag(key, tier, plaintext)),
        },
        Sensitivity::HighSensitive => {
            let mut body = plaintext.to_vec();
            keystream_xor(key, &mut body);
            let tag = compute_tag(key, tier, &body);
            ProtectedPacket {
                tier,
                interval_index: key.interval_index,
                body,
                tag: Some(tag),
            }
        }
    }
}

/// Checks one packet against the key of its own interval and recovers the
/// plaintext. `None` means the packet was modified.
pub fn open(packet: &ProtectedPacket, key: &KeyState) -> Option<Vec<u8>> {
    debug_assert_eq!(packet.interval_index, key.interval_index);
    match (packet.tier, packet.tag) {
        (Sensitivity::OpenAccess, None) => Some(packet.body.clone()),
        (Sensitivity::OpenAccess, Some(_)) => None,
        (_, None) => None,
        (tier, Some(tag)) => {
            if !tags_equal(&tag, &compute_tag(key, tier, &packet.body)) {
                return None;
            }
            let mut body = packet.body.clone();
            if tier == Sensitivity::HighSensitive {
                keystream_xor(key, &mut body);
            }
            Some(body)
        }
    }
}

impl ProtectedPacket {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.body.len() + TAG_LEN);
        out.push(self.tier.code());
        out.extend_from_slice(&self.interval_index.to_be_bytes());
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        match &self.tag {
            Some(tag) => {
                out.push(TAG_LEN as u8);
                out.extend_from_slice(tag);
            }
            None => out.push(0),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SecError> {
        let malformed = |why: &'static str| SecError::Malformed(why);
        let tier = Sensitivity::from_code(*bytes.first().ok_or(malformed("empty packet"))?)
            .ok_or(malformed("unknown tier"))?;
        let interval_index = u64::from_be_bytes(
            bytes
                .get(1..9)
                .ok_or(malformed("truncated interval"))?
                .try_into()
                .expect("8 bytes"),
        );
        let body_len = u32::from_be_bytes(
            bytes
                .get(9..13)
                .ok_or(malformed("truncated body length"))?
                .try_into()
                .expect("4 bytes"),
        ) as usize;
        let body_end = 13usize.checked_add(body_len).ok_or(malformed("body length overflow"))?;
        let body = bytes.get(13..body_end).ok_or(malformed("truncated body"))?.to_vec();
        let tag_len = *bytes.get(body_end).ok_or(malformed("missing tag length"))? as usize;
        let rest = &bytes[body_end + 1..];
        let tag = match tag_len {
            0 => None,
            TAG_LEN => Some(
                rest.get(..TAG_LEN)
                    .ok_or(malformed("truncated tag"))?
                    .try_into()
                    .expect("16 bytes"),
            ),
            _ => return Err(malformed("tag length must be 0 or 16")),
        };
        if rest.len() != tag_len {
            return Err(malformed("trailing bytes"));
        }
        Ok(Self {
            tier,
            interval_index,
            body,
            tag,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secstream::keys::{init_key_state, SharedSecret};

    fn key() -> KeyState {
        init_key_state(&SharedSecret::new(2_147_483_659, [7; 16]).unwrap()).unwrap()
    }

    #[test]
    fn open_tier_is_transparent() {
        let p = protect(b"abc", Sensitivity::OpenAccess, &key());
        assert_eq!(p.body, b"abc");
        assert!(p.tag.is_none());
    }

    #[test]
    fn low_tier_is_integrity_only() {
        let k = key();
        let p = protect(b"abc", Sensitivity::LowSensitive, &k);
        assert_eq!(p.body, b"abc");
        assert_eq!(p.tag, Some(compute_tag(&k, Sensitivity::LowSensitive, b"abc")));
    }

    #[test]
    fn high_tier_hides_and_round_trips() {
        let k = key();
        let p = protect(b"abc", Sensitivity::HighSensitive, &k);
        assert_ne!(p.body, b"abc");
        assert!(p.tag.is_some());
        assert_eq!(open(&p, &k).as_deref(), Some(&b"abc"[..]));
    }

    #[test]
    fn empty_high_plaintext() {
        let k = key();
        let p = protect(b"", Sensitivity::HighSensitive, &k);
        assert!(p.body.is_empty());
        assert_eq!(open(&p, &k), Some(vec![]));
    }

    #[test]
    fn wire_layout() {
        let k = key();
        let p = protect(b"xy", Sensitivity::OpenAccess, &k);
        assert_eq!(p.encode(), vec![2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, b'x', b'y', 0]);
        let q = protect(b"xy", Sensitivity::LowSensitive, &k);
        let wire = q.encode();
        assert_eq!(wire.len(), 1 + 8 + 4 + 2 + 1 + 16);
        assert_eq!(wire[0], 1);
        assert_eq!(wire[15], 16);
        assert_eq!(ProtectedPacket::decode(&wire).unwrap(), q);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(ProtectedPacket::decode(&[]).is_err());
        assert!(ProtectedPacket::decode(&[9, 0, 0]).is_err());
        let mut wire = protect(b"xy", Sensitivity::LowSensitive, &key()).encode();
        wire.push(0);
        assert!(ProtectedPacket::decode(&wire).is_err());
        // open-access tier with a tag is not a valid packet after opening
        let mut p = protect(b"xy", Sensitivity::LowSensitive, &key());
        p.tier = Sensitivity::OpenAccess;
        assert_eq!(open(&p, &key()), None);
    }
}
