//! Deterministic parallel Monte Carlo.
//!
//! The sample budget is cut into fixed-size chunks. Chunk `c` draws from the
//! ChaCha8 stream `c` of the run seed, so the result depends only on
//! `(seed, samples)` and never on how rayon schedules the chunks or on the
//! size of the thread pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Samples per RNG stream.
pub const CHUNK_SIZE: u64 = 1 << 14;

/// A Monte-Carlo probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub hits: u64,
    pub total: u64,
    pub p_hat: f64,
    pub std_err: f64,
    pub seed: u64,
}

impl EmpiricalEstimate {
    pub fn new(hits: u64, total: u64, seed: u64) -> Self {
        let p_hat = if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        };
        let std_err = if total == 0 {
            0.0
        } else {
            (p_hat * (1.0 - p_hat) / total as f64).sqrt()
        };
        Self {
            hits,
            total,
            p_hat,
            std_err,
            seed,
        }
    }
}

/// RNG for chunk `chunk` of a run with `seed`.
pub fn stream_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `trial` on `samples` independent draws and counts successes.
///
/// `trial` is called once per chunk with that chunk's RNG and sample count
/// and returns the number of hits in the chunk.
pub fn count_hits<F>(samples: u64, seed: u64, trial: F) -> Result<EmpiricalEstimate>
where
    F: Fn(&mut ChaCha8Rng, u64) -> Result<u64> + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let per_chunk: Vec<Result<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK_SIZE.min(samples - c * CHUNK_SIZE);
            let mut rng = stream_rng(seed, c);
            trial(&mut rng, count)
        })
        .collect();
    let mut hits = 0;
    for h in per_chunk {
        hits += h?;
    }
    Ok(EmpiricalEstimate::new(hits, samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn coin(samples: u64, seed: u64) -> EmpiricalEstimate {
        count_hits(samples, seed, |rng, n| {
            Ok((0..n).filter(|_| rng.random::<f64>() < 0.3).count() as u64)
        })
        .unwrap()
    }

    #[test]
    fn estimate_fields() {
        let e = EmpiricalEstimate::new(25, 100, 7);
        assert_eq!(e.p_hat, 0.25);
        assert!((e.std_err - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(EmpiricalEstimate::new(0, 0, 1).p_hat, 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        assert_eq!(coin(100_000, 5), coin(100_000, 5));
        assert_ne!(coin(100_000, 5).hits, coin(100_000, 6).hits);
    }

    #[test]
    fn independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| coin(200_003, 11))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn errors_surface() {
        let r = count_hits(10, 0, |_, _| Err(crate::Error::Domain("x".into())));
        assert!(r.is_err());
    }
}
