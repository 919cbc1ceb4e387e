//! Cross-checks between the waveform chain and the discrete model.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::{self, Chain, NoiseSpec, Waveform};
use crate::error::Result;

/// Largest `|y_waveform - y_discrete|` over a random noise-free block of
/// `n` symbols.
pub fn model_deviation(chain: &Chain, n: usize, seed: u64) -> Result<f64> {
    let modulation = chain.config().modulation;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..n * modulation.bits_per_symbol())
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let symbols = chain::map_bits(&bits, modulation)?;
    let wave = chain.waveform_receive(&symbols, &NoiseSpec::noiseless())?;
    let disc = chain.discrete_receive(&symbols, &NoiseSpec::noiseless())?;
    Ok(wave
        .samples
        .iter()
        .zip(&disc.samples)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// Estimate `E[w_k conj(w_{k+l})] / sigma_w^2` for `l = 0..=max_lag` from
/// noise-only waveforms pushed through the matched filter.
///
/// Each realization is a block of `n` samples; products are pooled over all
/// positions in the block. Realizations draw from per-chunk ChaCha streams,
/// so the estimate is reproducible for a given seed.
pub fn noise_covariance(
    chain: &Chain,
    n: usize,
    realizations: usize,
    max_lag: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 1000;
    let q = chain.samples_per_symbol();
    let sigma2 = q as f64; // sigma_w^2 = 1
    let stride = (chain.config().tau * q as f64).round() as usize;
    let zeros = Waveform {
        samples: vec![Complex64::new(0.0, 0.0); (n - 1) * stride + chain.pulse().taps().len()],
        start_time: -(chain.config().span as f64),
    };

    let chunks = realizations.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut sums = vec![0.0; max_lag + 1];
            let mut counts = vec![0u64; max_lag + 1];
            let reps = CHUNK.min(realizations - c * CHUNK);
            for _ in 0..reps {
                let noisy = chain::add_awgn_with_rng(&zeros, sigma2, &mut rng);
                let w = chain.matched_filter_sample(&noisy)?.samples;
                for lag in 0..=max_lag.min(n - 1) {
                    for k in 0..n - lag {
                        sums[lag] += (w[k] * w[k + lag].conj()).re;
                        counts[lag] += 1;
                    }
                }
            }
            Ok((sums, counts))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![0.0; max_lag + 1];
    let mut counts = vec![0u64; max_lag + 1];
    for (s, c) in partial {
        for l in 0..=max_lag {
            sums[l] += s[l];
            counts[l] += c[l];
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect())
}
