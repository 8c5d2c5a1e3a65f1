//! Sources of randomness for identifiers, salts, codes and keys.

use parking_lot::Mutex;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Error;

pub trait EntropySource: Send + Sync {
    fn fill(&self, buf: &mut [u8]) -> Result<(), Error>;
}

/// Operating-system CSPRNG.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsEntropy;

impl EntropySource for OsEntropy {
    fn fill(&self, buf: &mut [u8]) -> Result<(), Error> {
        getrandom::fill(buf).map_err(|_| Error::EntropyUnavailable)
    }
}

/// Deterministic ChaCha20 stream. For tests and simulations only.
pub struct SeededEntropy {
    rng: Mutex<ChaCha20Rng>,
}

impl SeededEntropy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(seed)),
        }
    }
}

impl EntropySource for SeededEntropy {
    fn fill(&self, buf: &mut [u8]) -> Result<(), Error> {
        self.rng.lock().fill_bytes(buf);
        Ok(())
    }
}

/// Always fails. Exercises the `EntropyUnavailable` paths.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoEntropy;

impl EntropySource for NoEntropy {
    fn fill(&self, _buf: &mut [u8]) -> Result<(), Error> {
        Err(Error::EntropyUnavailable)
    }
}

pub(crate) fn random_array<const N: usize>(src: &dyn EntropySource) -> Result<[u8; N], Error> {
    let mut out = [0u8; N];
    src.fill(&mut out)?;
    Ok(out)
}
