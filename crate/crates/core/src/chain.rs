//! Transmit/receive chain: Gray mapping, FTN modulation, AWGN, matched
//! filtering and `tau T` sampling, plus the equivalent discrete model
//! `y = sqrt(Es) G a + w` with matched-filter-coloured noise.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{FtnError, Result};
use crate::linalg::BandedCholesky;
use crate::pulse::{self, IsiProfile, RrcPulse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    /// Constellation size `M`.
    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        })
    }
}

impl FromStr for Modulation {
    type Err = FtnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            other => Err(FtnError::InvalidParameter(format!(
                "unknown modulation '{other}'"
            ))),
        }
    }
}

/// Parameters of an FTN link.
#[derive(Debug, Clone, PartialEq)]
pub struct FtnConfig {
    pub modulation: Modulation,
    /// Acceleration parameter, `0 < tau <= 1`.
    pub tau: f64,
    /// rRC roll-off, `0 <= beta <= 1`.
    pub beta: f64,
    /// Symbol energy `Es`.
    pub symbol_energy: f64,
    /// Requested oversampling; raised to the waveform grid by [`Chain::new`].
    pub samples_per_symbol: usize,
    pub span: usize,
    /// Relative ISI tap truncation threshold.
    pub truncation: f64,
}

impl FtnConfig {
    pub fn new(modulation: Modulation, tau: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            modulation,
            tau,
            beta,
            symbol_energy: 1.0,
            samples_per_symbol: pulse::DEFAULT_SAMPLES_PER_SYMBOL,
            span: pulse::DEFAULT_SPAN,
            truncation: pulse::DEFAULT_TRUNCATION,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(FtnError::InvalidParameter(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(FtnError::InvalidParameter(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if !(self.symbol_energy > 0.0 && self.symbol_energy.is_finite()) {
            return Err(FtnError::InvalidParameter(format!(
                "symbol energy must be positive, got {}",
                self.symbol_energy
            )));
        }
        Ok(())
    }

    /// Smallest oversampling factor `>= samples_per_symbol` for which
    /// `tau * Q` is an integer.
    ///
    /// When `tau * Q` is already integral `Q` is kept; otherwise `tau` must
    /// have at most two decimals and `Q` is raised to a multiple of the
    /// denominator of `tau`.
    pub fn grid_samples_per_symbol(&self) -> Result<usize> {
        let q = self.samples_per_symbol;
        let x = self.tau * q as f64;
        if (x - x.round()).abs() < 1e-9 {
            return Ok(q);
        }
        let hundredths = self.tau * 100.0;
        if (hundredths - hundredths.round()).abs() > 1e-9 {
            return Err(FtnError::GridMisalignment {
                tau: self.tau,
                samples_per_symbol: q,
            });
        }
        let denom = 100 / gcd(hundredths.round() as usize, 100);
        Ok(q.div_ceil(denom) * denom)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Unit-energy constellation points `a_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSequence {
    pub modulation: Modulation,
    pub symbols: Vec<Complex64>,
}

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Complex baseband samples at rate `Q / T`; `start_time` is the time of the
/// first sample in units of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub start_time: f64,
}

impl Waveform {
    pub fn energy(&self, samples_per_symbol: usize) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples_per_symbol as f64
    }
}

/// Matched-filter output sampled every `tau T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    pub samples: Vec<Complex64>,
}

impl SampleSequence {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// White noise added to the waveform: complex variance `sigma2` per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { sigma2: 0.0, seed: 0 }
    }

    /// Noise density `N0` for a per-bit SNR in dB, with `Eb = Es / log2 M`.
    pub fn n0_for_ebn0(ebn0_db: f64, modulation: Modulation, symbol_energy: f64) -> f64 {
        let ebn0 = 10f64.powf(ebn0_db / 10.0);
        symbol_energy / (ebn0 * modulation.bits_per_symbol() as f64)
    }

    /// Per-sample waveform variance `N0 Q`, so the matched filter output has
    /// variance `N0 g(0)`.
    pub fn from_ebn0(
        ebn0_db: f64,
        modulation: Modulation,
        symbol_energy: f64,
        samples_per_symbol: usize,
        seed: u64,
    ) -> Self {
        let n0 = Self::n0_for_ebn0(ebn0_db, modulation, symbol_energy);
        Self {
            sigma2: n0 * samples_per_symbol as f64,
            seed,
        }
    }

    /// Variance after the matched filter, `sigma2 / Q`.
    pub fn matched_variance(&self, samples_per_symbol: usize) -> f64 {
        self.sigma2 / samples_per_symbol as f64
    }
}

/// Map bits to Gray-coded symbols. BPSK: `0 -> +1`, `1 -> -1`. QPSK: the
/// first bit of each pair picks the real sign, the second the imaginary sign.
pub fn map_bits(bits: &[u8], modulation: Modulation) -> Result<SymbolSequence> {
    let sign = |b: u8| if b == 0 { 1.0 } else { -1.0 };
    let symbols = match modulation {
        Modulation::Bpsk => bits.iter().map(|&b| Complex64::new(sign(b), 0.0)).collect(),
        Modulation::Qpsk => {
            if !bits.len().is_multiple_of(2) {
                return Err(FtnError::OddBitCount(bits.len()));
            }
            let s = std::f64::consts::FRAC_1_SQRT_2;
            bits.chunks_exact(2)
                .map(|p| Complex64::new(s * sign(p[0]), s * sign(p[1])))
                .collect()
        }
    };
    Ok(SymbolSequence {
        modulation,
        symbols,
    })
}

/// Inverse of [`map_bits`] for symbols on the constellation (signs decide).
pub fn demap_symbols(symbols: &SymbolSequence) -> Vec<u8> {
    let bit = |x: f64| u8::from(x < 0.0);
    match symbols.modulation {
        Modulation::Bpsk => symbols.symbols.iter().map(|s| bit(s.re)).collect(),
        Modulation::Qpsk => symbols
            .symbols
            .iter()
            .flat_map(|s| [bit(s.re), bit(s.im)])
            .collect(),
    }
}

/// Add circularly-symmetric complex Gaussian noise of variance `sigma2`.
pub fn add_awgn(waveform: &Waveform, noise: &NoiseSpec) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    add_awgn_with_rng(waveform, noise.sigma2, &mut rng)
}

pub fn add_awgn_with_rng<R: Rng + ?Sized>(waveform: &Waveform, sigma2: f64, rng: &mut R) -> Waveform {
    if sigma2 == 0.0 {
        return waveform.clone();
    }
    let std = (sigma2 / 2.0).sqrt();
    let samples = waveform
        .samples
        .iter()
        .map(|s| s + complex_normal(rng) * std)
        .collect();
    Waveform {
        samples,
        start_time: waveform.start_time,
    }
}

/// Standard real normals on each rail (complex variance 2).
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// A configured FTN link: the pulse, the ISI profile and cached noise
/// colouring factors, all derived once from an [`FtnConfig`].
#[derive(Debug)]
pub struct Chain {
    config: FtnConfig,
    samples_per_symbol: usize,
    pulse: RrcPulse,
    profile: IsiProfile,
    channel: IsiProfile,
    colorings: Mutex<HashMap<usize, Arc<BandedCholesky>>>,
}

impl Chain {
    pub fn new(config: FtnConfig) -> Result<Self> {
        config.validate()?;
        let samples_per_symbol = config.grid_samples_per_symbol()?;
        let pulse = pulse::make_rrc(config.beta, samples_per_symbol, config.span)?;
        let profile = pulse.isi_profile_with_threshold(config.tau, config.truncation)?;
        let channel = pulse.isi_profile_with_threshold(config.tau, 0.0)?;
        Ok(Self {
            config,
            samples_per_symbol,
            pulse,
            profile,
            channel,
            colorings: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &FtnConfig {
        &self.config
    }

    pub fn pulse(&self) -> &RrcPulse {
        &self.pulse
    }

    /// Truncated taps seen by the detectors.
    pub fn profile(&self) -> &IsiProfile {
        &self.profile
    }

    /// Untruncated taps over the whole pulse support, used by the discrete
    /// model so that it reproduces the waveform chain.
    pub fn channel_profile(&self) -> &IsiProfile {
        &self.channel
    }

    /// Oversampling factor actually used on the waveform grid.
    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    /// Waveform samples between consecutive FTN symbols.
    fn symbol_stride(&self) -> usize {
        (self.config.tau * self.samples_per_symbol as f64).round() as usize
    }

    pub fn noise_for_ebn0(&self, ebn0_db: f64, seed: u64) -> NoiseSpec {
        NoiseSpec::from_ebn0(
            ebn0_db,
            self.config.modulation,
            self.config.symbol_energy,
            self.samples_per_symbol,
            seed,
        )
    }

    /// `s(t) = sqrt(Es) sum_n a_n p(t - n tau T)`, including both pulse tails.
    /// Symbol 0 sits at `t = 0`; the waveform starts at `t = -span`.
    pub fn modulate(&self, symbols: &SymbolSequence) -> Result<Waveform> {
        let stride = self.symbol_stride();
        let taps = self.pulse.taps();
        let n = symbols.len();
        let len = if n == 0 {
            0
        } else {
            (n - 1) * stride + taps.len()
        };
        let amp = self.config.symbol_energy.sqrt();
        let mut samples = vec![Complex64::new(0.0, 0.0); len];
        for (i, &a) in symbols.symbols.iter().enumerate() {
            let a = a * amp;
            for (s, &p) in samples[i * stride..].iter_mut().zip(taps) {
                *s += a * p;
            }
        }
        Ok(Waveform {
            samples,
            start_time: -(self.config.span as f64),
        })
    }

    /// Correlate with the pulse and sample at `k tau T`, `k = 0..N`.
    pub fn matched_filter_sample(&self, waveform: &Waveform) -> Result<SampleSequence> {
        let stride = self.symbol_stride();
        let taps = self.pulse.taps();
        let len = waveform.samples.len();
        if len == 0 {
            return Ok(SampleSequence { samples: vec![] });
        }
        if len < taps.len() || !(len - taps.len()).is_multiple_of(stride) {
            let n = len.saturating_sub(taps.len()) / stride + 1;
            return Err(FtnError::LengthMismatch {
                expected: (n - 1) * stride + taps.len(),
                actual: len,
            });
        }
        let n = (len - taps.len()) / stride + 1;
        let scale = 1.0 / self.samples_per_symbol as f64;
        let samples = (0..n)
            .map(|k| {
                let window = &waveform.samples[k * stride..k * stride + taps.len()];
                window
                    .iter()
                    .zip(taps)
                    .map(|(r, &p)| r * p)
                    .sum::<Complex64>()
                    * scale
            })
            .collect();
        Ok(SampleSequence { samples })
    }

    /// Full waveform path: modulate, add noise, matched filter and sample.
    pub fn waveform_receive_with_rng<R: Rng + ?Sized>(
        &self,
        symbols: &SymbolSequence,
        sigma2: f64,
        rng: &mut R,
    ) -> Result<SampleSequence> {
        let tx = self.modulate(symbols)?;
        let rx = add_awgn_with_rng(&tx, sigma2, rng);
        self.matched_filter_sample(&rx)
    }

    pub fn waveform_receive(&self, symbols: &SymbolSequence, noise: &NoiseSpec) -> Result<SampleSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        self.waveform_receive_with_rng(symbols, noise.sigma2, &mut rng)
    }

    /// Cholesky factor of the `n x n` ISI matrix, computed once per length.
    pub fn coloring(&self, n: usize) -> Result<Arc<BandedCholesky>> {
        let mut cache = self.colorings.lock().expect("coloring cache poisoned");
        if let Some(c) = cache.get(&n) {
            return Ok(Arc::clone(c));
        }
        let c = Arc::new(BandedCholesky::from_profile(&self.channel, n)?);
        cache.insert(n, Arc::clone(&c));
        Ok(c)
    }

    /// Discrete equivalent: `y = sqrt(Es) G a + w`, `w ~ CN(0, sigma_w^2 G)`
    /// with `sigma_w^2 = sigma2 / Q`.
    pub fn discrete_receive_with_rng<R: Rng + ?Sized>(
        &self,
        symbols: &SymbolSequence,
        sigma2: f64,
        rng: &mut R,
    ) -> Result<SampleSequence> {
        let n = symbols.len();
        let g = self.channel.taps();
        let amp = self.config.symbol_energy.sqrt();
        let a = &symbols.symbols;
        let mut samples: Vec<Complex64> = (0..n)
            .map(|k| {
                let mut acc = a[k] * g[0];
                for (i, &gi) in g.iter().enumerate().skip(1) {
                    if k >= i {
                        acc += a[k - i] * gi;
                    }
                    if k + i < n {
                        acc += a[k + i] * gi;
                    }
                }
                acc * amp
            })
            .collect();

        let sigma_w2 = sigma2 / self.samples_per_symbol as f64;
        if sigma_w2 > 0.0 && n > 0 {
            let coloring = self.coloring(n)?;
            let std = (sigma_w2 / 2.0).sqrt();
            let z: Vec<Complex64> = (0..n).map(|_| complex_normal(rng) * std).collect();
            for (y, w) in samples.iter_mut().zip(coloring.lower_mul(&z)) {
                *y += w;
            }
        }
        Ok(SampleSequence { samples })
    }

    pub fn discrete_receive(&self, symbols: &SymbolSequence, noise: &NoiseSpec) -> Result<SampleSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        self.discrete_receive_with_rng(symbols, noise.sigma2, &mut rng)
    }
}
