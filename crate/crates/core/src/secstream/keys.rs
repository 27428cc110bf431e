//! Exchange-free dynamic key schedule.
//!
//! Both ends hold the same [`SharedSecret`] and walk the same prime chain, so
//! the key for interval `n` (and its length) is a pure function of the secret
//! and `n`. Nothing is ever sent to stay in sync.
//!
//! Interval `n` uses:
//!
//! ```text
//! block_c   = SHA-256(prime_n:u64be || salt:16 || n:u64be || c:u32be)
//! bits_n    = [128, 192, 256][block_0[0] mod 3]
//! key_n     = (block_0 || block_1 || ...)[..bits_n / 8]
//! prime_n+1 = next_prime(prime_n + (SHA-256(key_n) mod 2^16) + 1)
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prime::{is_prime, next_prime};
use super::SecError;

pub const KEY_LENGTHS: [u16; 3] = [128, 192, 256];

/// Lower bound on the seed prime.
pub const MIN_SEED_PRIME: u64 = 1 << 31;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedSecret {
    pub seed_prime: u64,
    #[serde(with = "hex_salt")]
    pub session_salt: [u8; 16],
}

impl SharedSecret {
    pub fn new(seed_prime: u64, session_salt: [u8; 16]) -> Result<Self, SecError> {
        let s = Self {
            seed_prime,
            session_salt,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), SecError> {
        if !is_prime(self.seed_prime) {
            return Err(SecError::NotPrime(self.seed_prime));
        }
        if self.seed_prime < MIN_SEED_PRIME {
            return Err(SecError::SeedTooSmall(self.seed_prime));
        }
        Ok(())
    }
}

mod hex_salt {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(salt: &[u8; 16], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(salt))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 16], D::Error> {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(D::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| D::Error::custom("session_salt must be 16 bytes (32 hex digits)"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeyState {
    pub interval_index: u64,
    pub current_prime: u64,
    pub key: Vec<u8>,
    pub key_length: u16,
}

fn derive(prime: u64, salt: &[u8; 16], interval: u64) -> (Vec<u8>, u16) {
    let block = |counter: u32| {
        let mut h = Sha256::new();
        h.update(prime.to_be_bytes());
        h.update(salt);
        h.update(interval.to_be_bytes());
        h.update(counter.to_be_bytes());
        h.finalize()
    };
    let first = block(0);
    let key_length = KEY_LENGTHS[(first[0] % 3) as usize];
    let want = key_length as usize / 8;
    let mut key = first.to_vec();
    let mut counter = 1;
    while key.len() < want {
        key.extend_from_slice(&block(counter));
        counter += 1;
    }
    key.truncate(want);
    (key, key_length)
}

pub fn init_key_state(secret: &SharedSecret) -> Result<KeyState, SecError> {
    secret.check()?;
    let (key, key_length) = derive(secret.seed_prime, &secret.session_salt, 0);
    Ok(KeyState {
        interval_index: 0,
        current_prime: secret.seed_prime,
        key,
        key_length,
    })
}

pub fn advance_key(state: &KeyState, secret: &SharedSecret) -> KeyState {
    let digest = Sha256::digest(&state.key);
    let step = u16::from_be_bytes([digest[30], digest[31]]) as u64;
    let prime = next_prime(state.current_prime + step + 1);
    let interval_index = state.interval_index + 1;
    let (key, key_length) = derive(prime, &secret.session_salt, interval_index);
    KeyState {
        interval_index,
        current_prime: prime,
        key,
        key_length,
    }
}

/// Derives (and memoises) the key for any interval from a shared secret.
///
/// Cloning is cheap; clones share nothing mutable, each one extends its own
/// cache.
#[derive(Clone, Debug)]
pub struct Keychain {
    secret: Arc<SharedSecret>,
    states: Vec<KeyState>,
}

impl Keychain {
    pub fn new(secret: SharedSecret) -> Result<Self, SecError> {
        let first = init_key_state(&secret)?;
        Ok(Self {
            secret: Arc::new(secret),
            states: vec![first],
        })
    }

    pub fn secret(&self) -> &SharedSecret {
        &self.secret
    }

    pub fn key(&mut self, interval: u64) -> &KeyState {
        while (self.states.len() as u64) <= interval {
            let next = advance_key(self.states.last().expect("non-empty"), &self.secret);
            self.states.push(next);
        }
        &self.states[interval as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secret() -> SharedSecret {
        SharedSecret::new(2_147_483_659, *b"islandnet-salt-1").unwrap()
    }

    #[test]
    fn composite_seed_rejected() {
        let s = SharedSecret {
            seed_prime: 4,
            session_salt: [0; 16],
        };
        assert_eq!(init_key_state(&s), Err(SecError::NotPrime(4)));
    }

    #[test]
    fn small_prime_seed_rejected() {
        assert_eq!(SharedSecret::new(7, [0; 16]), Err(SecError::SeedTooSmall(7)));
    }

    #[test]
    fn same_secret_same_state() {
        let a = init_key_state(&secret()).unwrap();
        let b = init_key_state(&secret()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.interval_index, 0);
        assert_eq!(a.current_prime, 2_147_483_659);
        assert_eq!(a.key.len() * 8, a.key_length as usize);
    }

    #[test]
    fn advancing_is_deterministic() {
        let s = secret();
        let a = advance_key(&advance_key(&init_key_state(&s).unwrap(), &s), &s);
        let b = advance_key(&advance_key(&init_key_state(&s).unwrap(), &s), &s);
        assert_eq!(a, b);
        assert_eq!(a.interval_index, 2);
    }

    #[test]
    fn keychain_matches_manual_walk() {
        let s = secret();
        let mut chain = Keychain::new(s.clone()).unwrap();
        let mut state = init_key_state(&s).unwrap();
        for i in 0..50 {
            assert_eq!(chain.key(i), &state);
            state = advance_key(&state, &s);
        }
        // out-of-order lookups hit the cache
        assert_eq!(chain.key(3).interval_index, 3);
    }

    #[test]
    fn salt_round_trips_as_hex() {
        let s = secret();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains(&hex::encode(b"islandnet-salt-1")));
        let back: SharedSecret = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
