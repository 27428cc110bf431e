//! Data stream manager: the verification stage in front of stream
//! processing. Modified packets are removed; only original data goes on.

use super::keys::{KeyState, Keychain};
use super::packet::{open, ProtectedPacket};
use super::SecError;

/// Accepted interval range around the verifier's own interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub past: u64,
    pub future: u64,
}

impl Window {
    /// Tolerates two intervals of clock skew either way.
    pub const SKEW: Window = Window { past: 2, future: 2 };
    /// Any interval up to `current + future`; used for long-lived bundles.
    pub const HISTORY: Window = Window {
        past: u64::MAX,
        future: 2,
    };

    pub fn admits(&self, current: u64, interval: u64) -> bool {
        interval >= current.saturating_sub(self.past) && interval <= current.saturating_add(self.future)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DsmOutcome {
    pub accepted: Vec<Vec<u8>>,
    pub dropped: usize,
}

#[derive(Clone, Debug)]
pub struct Dsm {
    keychain: Keychain,
    window: Window,
    current: u64,
}

impl Dsm {
    pub fn new(keychain: Keychain, window: Window) -> Self {
        Self {
            keychain,
            window,
            current: 0,
        }
    }

    pub fn set_interval(&mut self, current: u64) {
        self.current = current;
    }

    pub fn current_interval(&self) -> u64 {
        self.current
    }

    fn key_for(&mut self, interval: u64) -> Result<&KeyState, SecError> {
        if !self.window.admits(self.current, interval) {
            return Err(SecError::UnknownInterval {
                interval,
                current: self.current,
            });
        }
        Ok(self.keychain.key(interval))
    }

    /// Verifies one packet. `Ok(None)` is a tag failure.
    pub fn check(&mut self, packet: &ProtectedPacket) -> Result<Option<Vec<u8>>, SecError> {
        let key = self.key_for(packet.interval_index)?;
        Ok(open(packet, key))
    }

    /// Typed verification: every packet must name an interval inside the
    /// window, otherwise the whole batch is refused with `UnknownInterval`.
    pub fn verify(&mut self, packets: &[ProtectedPacket]) -> Result<DsmOutcome, SecError> {
        if let Some(p) = packets
            .iter()
            .find(|p| !self.window.admits(self.current, p.interval_index))
        {
            return Err(SecError::UnknownInterval {
                interval: p.interval_index,
                current: self.current,
            });
        }
        let mut out = DsmOutcome::default();
        for p in packets {
            match self.check(p)? {
                Some(plain) => out.accepted.push(plain),
                None => out.dropped += 1,
            }
        }
        Ok(out)
    }

    /// Wire-level filter. Anything that does not decode, names an interval
    /// outside the window, or fails its tag is dropped.
    pub fn filter_wire<B: AsRef<[u8]>>(&mut self, frames: &[B]) -> DsmOutcome {
        let mut out = DsmOutcome::default();
        for frame in frames {
            match self.open_wire(frame.as_ref()) {
                Some(plain) => out.accepted.push(plain),
                None => out.dropped += 1,
            }
        }
        out
    }

    pub fn open_wire(&mut self, frame: &[u8]) -> Option<Vec<u8>> {
        let packet = ProtectedPacket::decode(frame).ok()?;
        self.check(&packet).ok().flatten()
    }
}

/// Stand-alone form taking the keychain as a closure.
pub fn dsm_verify<F>(packets: &[ProtectedPacket], mut keychain: F) -> Result<DsmOutcome, SecError>
where
    F: FnMut(u64) -> Option<KeyState>,
{
    let mut out = DsmOutcome::default();
    let mut keys = Vec::with_capacity(packets.len());
    for p in packets {
        let key = keychain(p.interval_index).ok_or(SecError::UnknownInterval {
            interval: p.interval_index,
            current: p.interval_index,
        })?;
        keys.push(key);
    }
    for (p, key) in packets.iter().zip(&keys) {
        match open(p, key) {
            Some(plain) => out.accepted.push(plain),
            None => out.dropped += 1,
        }
    }
    Ok(out)
}
