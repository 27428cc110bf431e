//! Stream security. Both ends derive the same rolling keys; packets are
//! protected per tier and the verification filter strips modified ones.
//!
//! The primitives are SHA-256 based reference constructions. They are
//! deterministic and portable, not a vetted AEAD.

mod dsm;
mod keys;
mod packet;
pub mod prime;

pub use dsm::{dsm_verify, Dsm, DsmOutcome, Window};
pub use keys::{advance_key, init_key_state, KeyState, Keychain, SharedSecret, KEY_LENGTHS, MIN_SEED_PRIME};
pub use packet::{compute_tag, open, protect, ProtectedPacket, TAG_LEN};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SecError {
    #[error("seed {0} is not prime")]
    NotPrime(u64),
    #[error("seed prime {0} is below 2^31")]
    SeedTooSmall(u64),
    #[error("interval {interval} is outside the derivable window around {current}")]
    UnknownInterval { interval: u64, current: u64 },
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
}
