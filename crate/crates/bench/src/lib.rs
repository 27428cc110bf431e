//! Shared inputs for the benchmarks.

use mulenet::eventflow::{Metric, SensorReading};
use mulenet::msgcore::{HardwareId, Position, Sensitivity};
use mulenet::secstream::prime::next_prime;
use mulenet::secstream::{protect, Keychain, SharedSecret, MIN_SEED_PRIME};

pub fn secret() -> SharedSecret {
    SharedSecret::new(next_prime(MIN_SEED_PRIME + 977), [0x42; 16]).expect("prime above the minimum")
}

/// `n` encoded sensor frames for interval 0, alternating tiers.
pub fn frames(n: u64) -> Vec<Vec<u8>> {
    let mut chain = Keychain::new(secret()).expect("valid secret");
    let key = chain.key(0).clone();
    (0..n)
        .map(|i| {
            let reading = SensorReading {
                sensor: HardwareId(i),
                metric: Metric::WaterLevel,
                value: i as f64 * 0.01,
                time: i,
                position: Position::new(i as f64, 0.0),
            };
            let tier = if i % 2 == 0 {
                Sensitivity::HighSensitive
            } else {
                Sensitivity::LowSensitive
            };
            protect(&reading.encode(), tier, &key).encode()
        })
        .collect()
}
