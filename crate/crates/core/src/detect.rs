//! Successive symbol-by-symbol detectors.
//!
//! Both detectors walk the matched-filter samples left to right. The plain
//! detector subtracts the ISI of the already-decided `L - 1` predecessors and
//! quantizes. The go-back-`K` detector additionally revisits the previous `K`
//! decisions once the current symbol has a tentative value, cancelling ISI
//! from both sides, and then re-decides the current symbol.
//!
//! Arithmetic is tallied the way the complexity table counts it: one
//! multiplication per `G * a` product and `n - 1` additions to sum a group of
//! `n` products. Subtracting the summed ISI from the sample is part of the
//! baseline Nyquist detector and is not counted.

use std::ops::{Add, AddAssign};

use num_complex::Complex64;

use crate::chain::{Modulation, SampleSequence, SymbolSequence};
use crate::pulse::IsiProfile;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub additions: u64,
    pub multiplications: u64,
}

impl OpCount {
    /// Cost of summing a group of `terms` products.
    fn group(terms: usize) -> Self {
        Self {
            additions: terms.saturating_sub(1) as u64,
            multiplications: terms as u64,
        }
    }

    /// Closed-form per-symbol cost of the plain detector: `L - 2` additions
    /// and `L - 1` multiplications.
    pub fn ssse_formula(l: usize) -> Self {
        Self::group(l.saturating_sub(1))
    }

    /// Closed-form per-symbol cost of go-back-`K` re-estimation:
    /// `K(L - 2) + K(K - 1)/2` additions, `K(L - 1) + K(K + 1)/2` multiplications.
    pub fn go_back_formula(k: usize, l: usize) -> Self {
        let (k, l) = (k as u64, l as u64);
        Self {
            additions: k * l.saturating_sub(2) + k * k.saturating_sub(1) / 2,
            multiplications: k * l.saturating_sub(1) + k * (k + 1) / 2,
        }
    }
}

impl Add for OpCount {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            additions: self.additions + rhs.additions,
            multiplications: self.multiplications + rhs.multiplications,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub profile: IsiProfile,
    pub modulation: Modulation,
    /// Go-back depth `K`; zero selects the plain successive detector.
    pub go_back: usize,
    /// `sqrt(Es)`, removed from the samples before cancellation.
    pub es_scale: f64,
}

impl DetectorConfig {
    pub fn new(profile: IsiProfile, modulation: Modulation, go_back: usize, symbol_energy: f64) -> Self {
        if go_back > profile.len().saturating_sub(1) {
            log::warn!(
                "go-back depth K={} exceeds the ISI span L-1={}; the extra re-estimations cancel zero taps",
                go_back,
                profile.len().saturating_sub(1)
            );
        }
        Self {
            profile,
            modulation,
            go_back,
            es_scale: symbol_energy.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub symbols: SymbolSequence,
    /// Operations in the complexity-table accounting: ISI cancellation for the
    /// plain detector, re-estimation work for the go-back detector.
    pub op_count: OpCount,
    /// Every counted operation, including the tentative and final decisions
    /// of the current symbol in the go-back detector.
    pub total_ops: OpCount,
}

/// Nearest BPSK/QPSK symbol; an exact zero on a rail decides `+`.
pub fn quantize(value: Complex64, modulation: Modulation) -> Complex64 {
    let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    match modulation {
        Modulation::Bpsk => Complex64::new(sign(value.re), 0.0),
        Modulation::Qpsk => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            Complex64::new(s * sign(value.re), s * sign(value.im))
        }
    }
}

/// Working state for one detection pass.
struct Pass<'a> {
    /// Samples divided by `sqrt(Es)`.
    x: Vec<Complex64>,
    /// `G12, G13, ...` padded with zeros to cover the go-back window.
    taps: Vec<f64>,
    /// Number of past taps, `L - 1`.
    memory: usize,
    center: f64,
    modulation: Modulation,
    decisions: Vec<Complex64>,
    per_symbol: Option<&'a mut Vec<OpCount>>,
}

impl<'a> Pass<'a> {
    fn new(samples: &SampleSequence, config: &DetectorConfig, per_symbol: Option<&'a mut Vec<OpCount>>) -> Self {
        let g = config.profile.taps();
        let memory = g.len().saturating_sub(1);
        let mut taps = g[1..].to_vec();
        if taps.len() < config.go_back {
            taps.resize(config.go_back, 0.0);
        }
        let x = samples.samples.iter().map(|y| y / config.es_scale).collect();
        Self {
            x,
            taps,
            memory,
            center: g[0],
            modulation: config.modulation,
            decisions: Vec::with_capacity(samples.len()),
            per_symbol,
        }
    }

    /// ISI on sample `j` from decisions `j-1 .. j-L+1` (those that exist).
    fn past_isi(&self, j: usize, ops: &mut OpCount) -> Complex64 {
        let terms = self.memory.min(j);
        *ops += OpCount::group(terms);
        (1..=terms).map(|i| self.decisions[j - i] * self.taps[i - 1]).sum()
    }

    /// ISI on sample `j` from decisions `j+1 ..= upto`.
    fn upcoming_isi(&self, j: usize, upto: usize, ops: &mut OpCount) -> Complex64 {
        let terms = upto - j;
        *ops += OpCount::group(terms);
        (1..=terms).map(|i| self.decisions[j + i] * self.taps[i - 1]).sum()
    }

    fn decide(&self, j: usize, isi: Complex64) -> Complex64 {
        quantize((self.x[j] - isi) / self.center, self.modulation)
    }

    fn record(&mut self, ops: OpCount) {
        if let Some(v) = self.per_symbol.as_deref_mut() {
            v.push(ops);
        }
    }

    fn finish(self, counted: OpCount, total: OpCount) -> DetectionResult {
        DetectionResult {
            symbols: SymbolSequence {
                modulation: self.modulation,
                symbols: self.decisions,
            },
            op_count: counted,
            total_ops: total,
        }
    }
}

fn run_ssse(samples: &SampleSequence, config: &DetectorConfig, trace: Option<&mut Vec<OpCount>>) -> DetectionResult {
    let mut pass = Pass::new(samples, config, trace);
    let mut total = OpCount::default();
    for k in 0..samples.len() {
        let mut ops = OpCount::default();
        let isi = pass.past_isi(k, &mut ops);
        let d = pass.decide(k, isi);
        pass.decisions.push(d);
        pass.record(ops);
        total += ops;
    }
    pass.finish(total, total)
}

fn run_go_back(samples: &SampleSequence, config: &DetectorConfig, trace: Option<&mut Vec<OpCount>>) -> DetectionResult {
    let k_depth = config.go_back;
    let mut pass = Pass::new(samples, config, trace);
    let mut counted = OpCount::default();
    let mut total = OpCount::default();
    for k in 0..samples.len() {
        let mut decision_ops = OpCount::default();
        let isi = pass.past_isi(k, &mut decision_ops);
        let tentative = pass.decide(k, isi);
        pass.decisions.push(tentative);

        // Re-estimate k-K .. k-1, oldest first, so each sees the newest
        // decisions of its successors.
        let mut ops = OpCount::default();
        for j in k.saturating_sub(k_depth)..k {
            let isi = pass.past_isi(j, &mut ops) + pass.upcoming_isi(j, k, &mut ops);
            pass.decisions[j] = pass.decide(j, isi);
        }

        let isi = pass.past_isi(k, &mut decision_ops);
        pass.decisions[k] = pass.decide(k, isi);

        pass.record(ops);
        counted += ops;
        total += ops + decision_ops;
    }
    pass.finish(counted, total)
}

/// Successive symbol-by-symbol detection with past-ISI cancellation.
pub fn ssse(samples: &SampleSequence, config: &DetectorConfig) -> DetectionResult {
    run_ssse(samples, config, None)
}

/// Go-back-`K` detection. With `K = 0` this is [`ssse`].
pub fn sssgbkse(samples: &SampleSequence, config: &DetectorConfig) -> DetectionResult {
    if config.go_back == 0 {
        return ssse(samples, config);
    }
    run_go_back(samples, config, None)
}

/// Dispatch on the go-back depth.
pub fn detect(samples: &SampleSequence, config: &DetectorConfig) -> DetectionResult {
    sssgbkse(samples, config)
}

/// Like [`detect`], also returning the counted operations of each symbol.
pub fn detect_traced(samples: &SampleSequence, config: &DetectorConfig) -> (DetectionResult, Vec<OpCount>) {
    let mut trace = Vec::with_capacity(samples.len());
    let result = if config.go_back == 0 {
        run_ssse(samples, config, Some(&mut trace))
    } else {
        run_go_back(samples, config, Some(&mut trace))
    };
    (result, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{map_bits, Chain, FtnConfig, NoiseSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_symbols(n: usize, modulation: Modulation, seed: u64) -> SymbolSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..n * modulation.bits_per_symbol())
            .map(|_| rng.random_range(0..2u8))
            .collect();
        map_bits(&bits, modulation).unwrap()
    }

    #[test]
    fn quantizer_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(quantize(c(0.3, 0.8), Modulation::Qpsk), c(s, s));
        assert_eq!(quantize(c(-0.01, 0.0), Modulation::Bpsk), c(-1.0, 0.0));
        assert_eq!(quantize(c(0.0, 0.0), Modulation::Bpsk), c(1.0, 0.0));
        assert_eq!(quantize(c(0.0, -0.0), Modulation::Qpsk), c(s, s));
    }

    #[test]
    fn formulas_match_reference_example() {
        assert_eq!(
            OpCount::go_back_formula(2, 8),
            OpCount { additions: 13, multiplications: 17 }
        );
        assert_eq!(
            OpCount::ssse_formula(8),
            OpCount { additions: 6, multiplications: 7 }
        );
    }

    #[test]
    fn empty_input() {
        let profile = IsiProfile::from_taps(0.8, vec![1.0, 0.2]).unwrap();
        for k in 0..3 {
            let cfg = DetectorConfig::new(profile.clone(), Modulation::Qpsk, k, 1.0);
            let r = detect(&SampleSequence { samples: vec![] }, &cfg);
            assert!(r.symbols.is_empty());
            assert_eq!(r.op_count, OpCount::default());
        }
    }

    #[test]
    fn nyquist_is_memoryless_quantization() {
        let chain = Chain::new(FtnConfig::new(Modulation::Qpsk, 1.0, 0.3).unwrap()).unwrap();
        let syms = random_symbols(2000, Modulation::Qpsk, 4);
        let noise = chain.noise_for_ebn0(3.0, 8);
        let y = chain.discrete_receive(&syms, &noise).unwrap();
        let memoryless: Vec<Complex64> = y.samples.iter().map(|&v| quantize(v, Modulation::Qpsk)).collect();
        for k in 0..4 {
            let cfg = DetectorConfig::new(chain.profile().clone(), Modulation::Qpsk, k, 1.0);
            assert_eq!(detect(&y, &cfg).symbols.symbols, memoryless);
        }
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let chain = Chain::new(FtnConfig::new(Modulation::Qpsk, 0.8, 0.5).unwrap()).unwrap();
        let syms = random_symbols(500, Modulation::Qpsk, 1);
        let y = chain.discrete_receive(&syms, &chain.noise_for_ebn0(2.0, 3)).unwrap();
        let cfg0 = DetectorConfig::new(chain.profile().clone(), Modulation::Qpsk, 0, 1.0);
        assert_eq!(detect(&y, &cfg0), ssse(&y, &cfg0));
        let cfg1 = DetectorConfig { go_back: 1, ..cfg0 };
        assert_eq!(detect(&y, &cfg1), sssgbkse(&y, &cfg1));
    }

    #[test]
    fn noise_free_inside_region_is_exact_for_all_depths() {
        let chain = Chain::new(FtnConfig::new(Modulation::Qpsk, 0.8, 0.5).unwrap()).unwrap();
        let syms = random_symbols(3000, Modulation::Qpsk, 2);
        let y = chain.discrete_receive(&syms, &NoiseSpec::noiseless()).unwrap();
        for k in 0..4 {
            let cfg = DetectorConfig::new(chain.profile().clone(), Modulation::Qpsk, k, 1.0);
            assert_eq!(detect(&y, &cfg).symbols, syms, "K={k}");
        }
    }

    #[test]
    fn scaling_by_symbol_energy() {
        let mut cfg = FtnConfig::new(Modulation::Bpsk, 0.9, 0.3).unwrap();
        cfg.symbol_energy = 9.0;
        let chain = Chain::new(cfg).unwrap();
        let syms = random_symbols(500, Modulation::Bpsk, 6);
        let y = chain.discrete_receive(&syms, &NoiseSpec::noiseless()).unwrap();
        let dcfg = DetectorConfig::new(chain.profile().clone(), Modulation::Bpsk, 2, 9.0);
        assert_eq!(detect(&y, &dcfg).symbols, syms);
    }

    #[test]
    fn go_back_repairs_an_isolated_error() {
        // BPSK with one strong lag; a large noise hit on sample 5 flips the
        // tentative decision, and the next sample reveals it.
        let profile = IsiProfile::from_taps(0.5, vec![1.0, 0.45]).unwrap();
        let a = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        let mut y: Vec<Complex64> = (0..a.len())
            .map(|k| {
                let mut v = a[k];
                if k > 0 {
                    v += 0.45 * a[k - 1];
                }
                if k + 1 < a.len() {
                    v += 0.45 * a[k + 1];
                }
                c(v, 0.0)
            })
            .collect();
        y[5] -= c(1.2, 0.0);
        let samples = SampleSequence { samples: y };
        let cfg0 = DetectorConfig::new(profile.clone(), Modulation::Bpsk, 0, 1.0);
        let cfg1 = DetectorConfig::new(profile, Modulation::Bpsk, 1, 1.0);
        let count = |r: &DetectionResult| {
            r.symbols.symbols.iter().zip(&a).filter(|(d, &t)| d.re != t).count()
        };
        let plain = ssse(&samples, &cfg0);
        let gb = sssgbkse(&samples, &cfg1);
        assert!(count(&gb) <= count(&plain));
    }

    #[test]
    fn traced_counts_sum_to_total() {
        let profile = IsiProfile::from_taps(0.6, vec![1.0, 0.3, -0.1, 0.05, 0.02]).unwrap();
        let samples = SampleSequence {
            samples: (0..50).map(|i| c((i as f64).sin(), (i as f64).cos())).collect(),
        };
        for k in 0..4 {
            let cfg = DetectorConfig::new(profile.clone(), Modulation::Qpsk, k, 1.0);
            let (res, trace) = detect_traced(&samples, &cfg);
            let sum = trace.iter().fold(OpCount::default(), |a, &b| a + b);
            assert_eq!(sum, res.op_count);
            assert_eq!(res, detect(&samples, &cfg));
        }
    }
}
