//! Monte-Carlo BER engine, spectral-efficiency bookkeeping and CSV output.
//!
//! Every simulated block draws its bits and noise from a ChaCha stream
//! selected by `(master_seed, block_index)`. Blocks run in parallel in
//! fixed-size batches and are folded back in index order, so a run stops at
//! the same block and yields the same counts whatever the worker count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::{self, Chain, FtnConfig, Modulation, SampleSequence};
use crate::detect::{self, DetectorConfig};
use crate::error::{FtnError, Result};

pub const DEFAULT_BLOCK_LEN: usize = 1000;
pub const DEFAULT_MIN_BIT_ERRORS: u64 = 100;
pub const DEFAULT_MAX_BITS: u64 = 10_000_000;

const MAX_BATCH: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceivePath {
    /// `y = sqrt(Es) G a + w` with coloured noise.
    Discrete,
    /// Sampled waveform through the matched filter.
    Waveform,
}

impl FromStr for ReceivePath {
    type Err = FtnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(ReceivePath::Discrete),
            "waveform" => Ok(ReceivePath::Waveform),
            other => Err(FtnError::InvalidParameter(format!(
                "unknown receive path '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ftn: FtnConfig,
    /// Go-back depth `K` (0 = plain successive detection).
    pub go_back: usize,
    pub ebn0_db_list: Vec<f64>,
    pub block_len: usize,
    pub min_bit_errors: u64,
    pub max_bits: u64,
    pub master_seed: u64,
    pub path: ReceivePath,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(ftn: FtnConfig) -> Self {
        Self {
            ftn,
            go_back: 0,
            ebn0_db_list: Vec::new(),
            block_len: DEFAULT_BLOCK_LEN,
            min_bit_errors: DEFAULT_MIN_BIT_ERRORS,
            max_bits: DEFAULT_MAX_BITS,
            master_seed: 0,
            path: ReceivePath::Discrete,
            workers: None,
        }
    }

    fn bits_per_block(&self) -> u64 {
        (self.block_len * self.ftn.modulation.bits_per_symbol()) as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.ftn.validate()?;
        if self.block_len == 0 {
            return Err(FtnError::InvalidParameter("block length must be at least 1".into()));
        }
        if self.min_bit_errors == 0 {
            return Err(FtnError::InvalidParameter("min_bit_errors must be at least 1".into()));
        }
        if self.max_bits < self.bits_per_block() {
            return Err(FtnError::InvalidParameter(format!(
                "max_bits ({}) must cover at least one block ({} bits)",
                self.max_bits,
                self.bits_per_block()
            )));
        }
        if self.workers == Some(0) {
            return Err(FtnError::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRecord {
    pub ebn0_db: f64,
    pub bit_errors: u64,
    pub bits_simulated: u64,
    pub ber: f64,
    /// Normal-approximation 95% confidence half-width.
    pub ci95_halfwidth: f64,
    /// The bit budget ran out before `min_bit_errors` were seen.
    pub budget_exhausted: bool,
}

impl BerRecord {
    fn new(ebn0_db: f64, bit_errors: u64, bits_simulated: u64, budget_exhausted: bool) -> Self {
        let ber = bit_errors as f64 / bits_simulated as f64;
        Self {
            ebn0_db,
            bit_errors,
            bits_simulated,
            ber,
            ci95_halfwidth: 1.96 * (ber * (1.0 - ber) / bits_simulated as f64).sqrt(),
            budget_exhausted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeRecord {
    pub beta: f64,
    pub tau: f64,
    pub modulation: Modulation,
    pub cp_len: usize,
    pub block_len: usize,
    pub se: f64,
}

/// `log2 M / ((1 + beta) tau) * (N - nu) / N` in bits/s/Hz.
pub fn spectral_efficiency(modulation: Modulation, beta: f64, tau: f64, block_len: usize, cp_len: usize) -> Result<f64> {
    if block_len == 0 || cp_len >= block_len {
        return Err(FtnError::InvalidParameter(format!(
            "need 0 <= nu < N, got nu={cp_len}, N={block_len}"
        )));
    }
    if !(tau > 0.0 && tau <= 1.0) || !(0.0..=1.0).contains(&beta) {
        return Err(FtnError::InvalidParameter(format!(
            "invalid beta={beta} or tau={tau}"
        )));
    }
    let frac = (block_len - cp_len) as f64 / block_len as f64;
    Ok(modulation.bits_per_symbol() as f64 / ((1.0 + beta) * tau) * frac)
}

impl SeRecord {
    pub fn new(modulation: Modulation, beta: f64, tau: f64, block_len: usize, cp_len: usize) -> Result<Self> {
        Ok(Self {
            beta,
            tau,
            modulation,
            cp_len,
            block_len,
            se: spectral_efficiency(modulation, beta, tau, block_len, cp_len)?,
        })
    }
}

/// Uncoded Gray-mapped BPSK/QPSK BER over AWGN without ISI: `Q(sqrt(2 Eb/N0))`.
pub fn nyquist_ber(ebn0_db: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    0.5 * statrs::function::erf::erfc(ebn0.sqrt())
}

/// Eb/N0 in dB at which [`nyquist_ber`] equals `target` (bisection).
pub fn nyquist_ebn0_for_ber(target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 0.5) {
        return Err(FtnError::InvalidParameter(format!(
            "target BER must lie in (0, 0.5), got {target}"
        )));
    }
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if nyquist_ber(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Counts from one simulated block.
#[derive(Debug, Clone, Copy, Default)]
struct BlockOutcome {
    bit_errors: u64,
    bits: u64,
}

/// A validated experiment with its link, detector and worker pool.
pub struct Experiment {
    config: ExperimentConfig,
    chain: Chain,
    detector: DetectorConfig,
    pool: rayon::ThreadPool,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let chain = Chain::new(config.ftn.clone())?;
        let detector = DetectorConfig::new(
            chain.profile().clone(),
            config.ftn.modulation,
            config.go_back,
            config.ftn.symbol_energy,
        );
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.workers {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| FtnError::InvalidParameter(format!("thread pool: {e}")))?;
        Ok(Self {
            config,
            chain,
            detector,
            pool,
        })
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn block_rng(&self, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.master_seed);
        rng.set_stream(block);
        rng
    }

    fn receive(&self, symbols: &chain::SymbolSequence, sigma2: f64, rng: &mut ChaCha8Rng) -> Result<SampleSequence> {
        match self.config.path {
            ReceivePath::Discrete => self.chain.discrete_receive_with_rng(symbols, sigma2, rng),
            ReceivePath::Waveform => self.chain.waveform_receive_with_rng(symbols, sigma2, rng),
        }
    }

    fn simulate_block(&self, block: u64, sigma2: f64) -> Result<BlockOutcome> {
        let mut rng = self.block_rng(block);
        let nbits = self.config.bits_per_block() as usize;
        let bits: Vec<u8> = (0..nbits).map(|_| rng.random_range(0..2u8)).collect();
        let symbols = chain::map_bits(&bits, self.config.ftn.modulation)?;
        let samples = self.receive(&symbols, sigma2, &mut rng)?;
        let decided = detect::detect(&samples, &self.detector);
        let errors = chain::demap_symbols(&decided.symbols)
            .iter()
            .zip(&bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok(BlockOutcome {
            bit_errors: errors,
            bits: nbits as u64,
        })
    }

    /// Simulate blocks at one Eb/N0 until `min_bit_errors` errors or
    /// `max_bits` bits have been seen.
    pub fn run_point(&self, ebn0_db: f64) -> Result<BerRecord> {
        let sigma2 = self.chain.noise_for_ebn0(ebn0_db, 0).sigma2;
        let mut errors = 0u64;
        let mut bits = 0u64;
        let mut next = 0u64;
        let mut batch = 4u64;
        loop {
            let outcomes = self.pool.install(|| {
                (next..next + batch)
                    .into_par_iter()
                    .map(|b| self.simulate_block(b, sigma2))
                    .collect::<Result<Vec<_>>>()
            })?;
            for o in outcomes {
                errors += o.bit_errors;
                bits += o.bits;
                if errors >= self.config.min_bit_errors {
                    return Ok(BerRecord::new(ebn0_db, errors, bits, false));
                }
                if bits >= self.config.max_bits {
                    return Ok(BerRecord::new(ebn0_db, errors, bits, true));
                }
            }
            next += batch;
            batch = (batch * 2).min(MAX_BATCH);
        }
    }

    pub fn run_curve(&self) -> Result<Vec<BerRecord>> {
        self.config
            .ebn0_db_list
            .iter()
            .map(|&e| self.run_point(e))
            .collect()
    }
}

pub fn run_ber_point(config: &ExperimentConfig, ebn0_db: f64) -> Result<BerRecord> {
    Experiment::new(config.clone())?.run_point(ebn0_db)
}

pub fn run_ber_curve(config: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    Experiment::new(config.clone())?.run_curve()
}

/// Header `ebn0_db,bit_errors,bits,ber,ci95`, then one row per record.
pub fn write_csv<W: Write>(records: &[BerRecord], mut out: W) -> Result<()> {
    writeln!(out, "ebn0_db,bit_errors,bits,ber,ci95")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{:.9e},{:.9e}",
            r.ebn0_db, r.bit_errors, r.bits_simulated, r.ber, r.ci95_halfwidth
        )?;
    }
    Ok(())
}

pub fn emit_csv<P: AsRef<Path>>(records: &[BerRecord], path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(records, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Parse `start:step:stop` (inclusive) or a single value, in dB.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || FtnError::InvalidParameter(format!("bad range '{spec}', expected start:step:stop"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [start, step, stop] if step > 0.0 && stop >= start => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        _ => Err(bad()),
    }
}

/// One row of the SE-vs-roll-off search: the smallest `tau` at which the
/// detector still matches the Nyquist BER target at the Nyquist SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeSearchRow {
    pub beta: f64,
    pub tau: f64,
    pub ebn0_db: f64,
    pub ber: f64,
    pub se_ftn: f64,
    pub se_nyquist: f64,
}

/// Step `tau` down from 1 by `grid_step` while the measured BER at the
/// Nyquist operating point stays at or below `target_ber`.
pub fn search_se_tau(template: &ExperimentConfig, beta: f64, target_ber: f64, grid_step: f64) -> Result<SeSearchRow> {
    let ebn0_db = nyquist_ebn0_for_ber(target_ber)?;
    let modulation = template.ftn.modulation;
    let mut best = (1.0, nyquist_ber(ebn0_db));
    for i in 1.. {
        let tau = ((1.0 - i as f64 * grid_step) * 100.0).round() / 100.0;
        if tau <= 0.0 {
            break;
        }
        let mut cfg = template.clone();
        cfg.ftn.beta = beta;
        cfg.ftn.tau = tau;
        let rec = run_ber_point(&cfg, ebn0_db)?;
        log::info!("beta={beta} tau={tau}: ber={:.3e} ({} bits)", rec.ber, rec.bits_simulated);
        if rec.ber > target_ber {
            break;
        }
        best = (tau, rec.ber);
    }
    Ok(SeSearchRow {
        beta,
        tau: best.0,
        ebn0_db,
        ber: best.1,
        se_ftn: spectral_efficiency(modulation, beta, best.0, template.block_len, 0)?,
        se_nyquist: spectral_efficiency(modulation, beta, 1.0, template.block_len, 0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk(tau: f64, beta: f64) -> ExperimentConfig {
        ExperimentConfig::new(FtnConfig::new(Modulation::Qpsk, tau, beta).unwrap())
    }

    #[test]
    fn se_examples() {
        let se = |b, t| spectral_efficiency(Modulation::Qpsk, b, t, 1000, 0).unwrap();
        assert_eq!(format!("{:.2}", se(0.3, 0.9)), "1.71");
        assert_eq!(format!("{:.2}", se(0.5, 0.8)), "1.67");
        assert_eq!(se(0.0, 1.0), 2.0);
        let with_cp = spectral_efficiency(Modulation::Qpsk, 0.3, 0.891, 1000, 10).unwrap();
        assert!((with_cp - 2.0 / (1.3 * 0.891) * 0.99).abs() < 1e-12);
        assert!(spectral_efficiency(Modulation::Qpsk, 0.3, 0.9, 10, 10).is_err());
        let rec = SeRecord::new(Modulation::Bpsk, 0.0, 0.5, 100, 0).unwrap();
        assert_eq!(rec.se, 2.0);
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0:2:10").unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(parse_range("6").unwrap(), vec![6.0]);
        assert_eq!(parse_range("0:0.1:0.3").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert!(parse_range("1:0:2").is_err());
        assert!(parse_range("a:b").is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = qpsk(0.9, 0.3);
        c.block_len = 0;
        assert!(c.validate().is_err());
        let mut c = qpsk(0.9, 0.3);
        c.max_bits = 10;
        assert!(c.validate().is_err());
        let mut c = qpsk(0.9, 0.3);
        c.min_bit_errors = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn noise_free_inside_region_has_no_errors() {
        let mut c = qpsk(0.8, 0.5);
        c.go_back = 2;
        c.max_bits = 200_000;
        let rec = run_ber_point(&c, f64::INFINITY).unwrap();
        assert_eq!(rec.bit_errors, 0);
        assert_eq!(rec.ber, 0.0);
        assert!(rec.budget_exhausted);
        assert!(rec.bits_simulated >= 200_000);
    }

    #[test]
    fn very_low_snr_is_a_coin_flip() {
        let mut c = qpsk(0.9, 0.3);
        c.min_bit_errors = 20_000;
        let rec = run_ber_point(&c, -30.0).unwrap();
        assert!((0.45..=0.55).contains(&rec.ber), "{}", rec.ber);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut c = qpsk(0.9, 0.3);
        c.go_back = 1;
        c.ebn0_db_list = vec![2.0, 5.0];
        c.min_bit_errors = 300;
        c.workers = Some(1);
        let one = run_ber_curve(&c).unwrap();
        c.workers = Some(4);
        let four = run_ber_curve(&c).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "ebn0_db,bit_errors,bits,ber,ci95\n");

        let rec = BerRecord::new(6.0, 123, 1_000_000, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        emit_csv(&[rec], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols[0].parse::<f64>().unwrap(), 6.0);
        assert_eq!(cols[1].parse::<u64>().unwrap(), 123);
        assert_eq!(cols[2].parse::<u64>().unwrap(), 1_000_000);
        let ber: f64 = cols[3].parse().unwrap();
        assert!((ber - rec.ber).abs() / rec.ber < 1e-6);
        let ci: f64 = cols[4].parse().unwrap();
        assert!((ci - rec.ci95_halfwidth).abs() / rec.ci95_halfwidth < 1e-6);

        let curve: Vec<BerRecord> = (0..8).map(|i| BerRecord::new(i as f64, 1, 10, false)).collect();
        let path = dir.path().join("curve.csv");
        emit_csv(&curve, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 9);
    }

    #[test]
    fn nyquist_reference_values() {
        assert!((nyquist_ber(6.0) - 2.388e-3).abs() < 1e-5);
        let e = nyquist_ebn0_for_ber(1e-3).unwrap();
        assert!((nyquist_ber(e) - 1e-3).abs() < 1e-12);
    }
}
