use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Exponential backoff with deterministic jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackoffPolicy {
    pub base_secs: f64,
    pub factor: f64,
    pub cap_secs: f64,
    /// Relative jitter; 0.2 spreads delays over ±20%.
    pub jitter: f64,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            base_secs: 2.0,
            factor: 2.0,
            cap_secs: 300.0,
            jitter: 0.2,
        }
    }
}

impl BackoffPolicy {
    /// Delay before the next try after `failures` consecutive failed
    /// attempts (≥ 1). The jitter draw is a pure function of
    /// `(seed, key, failures)`, so replays and parallel runs agree.
    pub fn delay(&self, failures: u32, key: &str, seed: u64) -> Duration {
        let exp = failures.saturating_sub(1).min(64) as i32;
        let nominal = (self.base_secs * self.factor.powi(exp)).min(self.cap_secs);
        let u = unit_interval(seed, key, failures) * 2.0 - 1.0;
        let jittered = (nominal * (1.0 + self.jitter * u)).clamp(0.0, self.cap_secs);
        Duration::from_secs_f64(jittered)
    }
}

/// FNV-1a over the inputs, finished with a splitmix64 round, mapped to [0, 1).
fn unit_interval(seed: u64, key: &str, n: u32) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in key.bytes().chain(n.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}
