//! Root-raised-cosine pulse generation and the ISI taps derived from its
//! autocorrelation.
//!
//! Time is measured in units of the Nyquist symbol interval `T`, so `T = 1`
//! throughout. A pulse with `samples_per_symbol = Q` is sampled every `1/Q`
//! and truncated to `[-span, span]`.

use std::io::Write;

use crate::error::{FtnError, Result};

/// Taps whose magnitude relative to `g(0)` is at or below this value are
/// dropped from an [`IsiProfile`].
pub const DEFAULT_TRUNCATION: f64 = 1e-3;
pub const DEFAULT_SAMPLES_PER_SYMBOL: usize = 16;
pub const DEFAULT_SPAN: usize = 16;

// Distance from a removable singularity below which the analytic limit is used.
const SINGULAR_EPS: f64 = 1e-9;

/// Evaluate the unit-`T` root-raised-cosine impulse response at time `t`.
///
/// The returned value is not energy-normalised; it is the textbook closed form
/// whose continuous-time energy is one.
pub fn rrc_value(t: f64, beta: f64) -> f64 {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    if t.abs() < SINGULAR_EPS {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < SINGULAR_EPS {
        let arg = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2
            * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// A sampled, unit-energy root-raised-cosine pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcPulse {
    beta: f64,
    samples_per_symbol: usize,
    span: usize,
    /// Factor applied to the closed-form samples to reach unit discrete energy.
    normalization: f64,
    taps: Vec<f64>,
}

/// Build a root-raised-cosine pulse with roll-off `beta`, `samples_per_symbol`
/// samples per `T`, truncated to `span` symbol intervals on each side.
pub fn make_rrc(beta: f64, samples_per_symbol: usize, span: usize) -> Result<RrcPulse> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(FtnError::InvalidParameter(format!(
            "roll-off must lie in [0, 1], got {beta}"
        )));
    }
    if samples_per_symbol < 4 {
        return Err(FtnError::InvalidParameter(format!(
            "samples_per_symbol must be at least 4, got {samples_per_symbol}"
        )));
    }
    if span < 4 {
        return Err(FtnError::InvalidParameter(format!(
            "span must be at least 4 symbol intervals, got {span}"
        )));
    }

    let half = (span * samples_per_symbol) as isize;
    let q = samples_per_symbol as f64;
    // Evaluate one side and mirror so the taps are exactly symmetric.
    let right: Vec<f64> = (0..=half).map(|i| rrc_value(i as f64 / q, beta)).collect();
    let mut taps: Vec<f64> = right.iter().skip(1).rev().copied().collect();
    taps.extend_from_slice(&right);

    let energy: f64 = taps.iter().map(|x| x * x).sum::<f64>() / q;
    let normalization = energy.sqrt().recip();
    taps.iter_mut().for_each(|x| *x *= normalization);

    Ok(RrcPulse {
        beta,
        samples_per_symbol,
        span,
        normalization,
        taps,
    })
}

impl RrcPulse {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn span(&self) -> usize {
        self.span
    }

    /// Sample values, `2 * span * Q + 1` of them, centred on `t = 0`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Multiplier that took the closed-form samples to unit energy.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Discrete energy `sum(taps^2) / Q`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|x| x * x).sum::<f64>() / self.samples_per_symbol as f64
    }

    /// Autocorrelation at an integer sample shift.
    fn correlation_at_shift(&self, shift: usize) -> f64 {
        if shift >= self.taps.len() {
            return 0.0;
        }
        let acc: f64 = self.taps[..self.taps.len() - shift]
            .iter()
            .zip(&self.taps[shift..])
            .map(|(a, b)| a * b)
            .sum();
        acc / self.samples_per_symbol as f64
    }

    /// `g(lag) = ∫ p(x) p(x - lag) dx`, with `lag` in units of `T`.
    ///
    /// Integer sample shifts correlate the taps directly. Otherwise the
    /// shifted copy is evaluated from the closed form on the same grid and
    /// truncated to the same span.
    pub fn autocorrelation_at(&self, lag: f64) -> Result<f64> {
        let max = 2.0 * self.span as f64;
        if !lag.is_finite() || lag.abs() > max + 1e-12 {
            return Err(FtnError::LagOutOfRange { lag, max });
        }
        let q = self.samples_per_symbol as f64;
        let shift = lag.abs() * q;
        let nearest = shift.round();
        if (shift - nearest).abs() < 1e-9 {
            return Ok(self.correlation_at_shift(nearest as usize));
        }
        let lag = lag.abs();
        let span = self.span as f64;
        let half = (self.span * self.samples_per_symbol) as f64;
        let acc: f64 = self
            .taps
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let t = (i as f64 - half) / q - lag;
                if t.abs() > span {
                    0.0
                } else {
                    p * self.normalization * rrc_value(t, self.beta)
                }
            })
            .sum();
        Ok(acc / q)
    }

    /// ISI taps at spacing `tau` using the default truncation threshold.
    pub fn isi_profile(&self, tau: f64) -> Result<IsiProfile> {
        self.isi_profile_with_threshold(tau, DEFAULT_TRUNCATION)
    }

    /// ISI taps `g(i * tau) / g(0)` for `i = 0, 1, ...`.
    ///
    /// Lags whose relative magnitude is at or below `threshold` are zeroed, and
    /// the profile ends at the last lag above it. At most `floor(2 * span / tau)`
    /// lags are considered.
    pub fn isi_profile_with_threshold(&self, tau: f64, threshold: f64) -> Result<IsiProfile> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(FtnError::InvalidParameter(format!(
                "tau must lie in (0, 1], got {tau}"
            )));
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(FtnError::InvalidParameter(format!(
                "truncation threshold must be non-negative, got {threshold}"
            )));
        }
        let g0 = self.autocorrelation_at(0.0)?;
        let max_lag = 2.0 * self.span as f64;
        let cap = ((max_lag / tau) + 1e-9).floor() as usize;

        let mut taps = vec![1.0];
        let mut last_kept = 0;
        for i in 1..=cap {
            let lag = (i as f64 * tau).min(max_lag);
            let g = self.autocorrelation_at(lag)? / g0;
            if g.abs() > threshold {
                taps.push(g);
                last_kept = i;
            } else {
                taps.push(0.0);
            }
        }
        taps.truncate(last_kept + 1);
        Ok(IsiProfile { tau, taps })
    }

    /// Write the taps in the plain-text dump format: a `# beta=.. Q=.. span=..`
    /// header followed by one tap per line.
    pub fn write_taps<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# beta={} Q={} span={}",
            self.beta, self.samples_per_symbol, self.span
        )?;
        for t in &self.taps {
            writeln!(out, "{t:.17e}")?;
        }
        Ok(())
    }
}

/// One-sided ISI taps `[G11, G12, ..., G1L]` with `G1i = g((i - 1) tau T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiProfile {
    tau: f64,
    taps: Vec<f64>,
}

impl IsiProfile {
    /// Build a profile from explicit taps. The first tap must be positive.
    pub fn from_taps(tau: f64, taps: Vec<f64>) -> Result<Self> {
        match taps.first() {
            Some(&g0) if g0 > 0.0 && taps.iter().all(|t| t.is_finite()) => Ok(Self { tau, taps }),
            _ => Err(FtnError::InvalidParameter(
                "ISI profile needs finite taps with a positive centre tap".into(),
            )),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `[G11, ..., G1L]`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// One-sided ISI length including the centre tap.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn center(&self) -> f64 {
        self.taps[0]
    }

    /// Entry `(row, col)` of the banded symmetric Toeplitz ISI matrix.
    pub fn matrix_entry(&self, row: usize, col: usize) -> f64 {
        self.taps.get(row.abs_diff(col)).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Alternative algebraic form of the rRC response, used as an oracle.
    fn rrc_oracle(t: f64, beta: f64) -> f64 {
        if t == 0.0 {
            return 1.0 + beta * (4.0 / PI - 1.0);
        }
        if beta == 0.0 {
            return (PI * t).sin() / (PI * t);
        }
        let x = 4.0 * beta * t;
        if (x.abs() - 1.0).abs() < 1e-9 {
            return beta / 2f64.sqrt()
                * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                    + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos());
        }
        (4.0 * beta / PI)
            * ((PI * (1.0 + beta) * t).cos() + (PI * (1.0 - beta) * t).sin() / x)
            / (1.0 - x * x)
    }

    /// Brute-force `∫ p(x) p(x - lag) dx` on a fine grid with the oracle pulse.
    fn brute_autocorrelation(beta: f64, span: usize, q: usize, lag: f64) -> f64 {
        let n = (span * q) as isize;
        let shift = (lag * q as f64).round() as isize;
        let p = |i: isize| {
            if i.abs() > n {
                0.0
            } else {
                rrc_oracle(i as f64 / q as f64, beta)
            }
        };
        let energy: f64 = (-n..=n).map(|i| p(i) * p(i)).sum();
        let cross: f64 = (-n..=n).map(|i| p(i) * p(i - shift)).sum();
        cross / energy
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(make_rrc(-0.1, 16, 16).is_err());
        assert!(make_rrc(1.1, 16, 16).is_err());
        assert!(make_rrc(0.3, 3, 16).is_err());
        assert!(make_rrc(0.3, 16, 3).is_err());
    }

    #[test]
    fn sinc_pulse_at_zero_rolloff() {
        let p = make_rrc(0.0, 16, 16).unwrap();
        let c = p.taps().len() / 2;
        assert!((p.energy() - 1.0).abs() < 1e-9);
        // zeros of the sinc at integer multiples of T
        for k in 1..16 {
            assert!(p.taps()[c + 16 * k].abs() < 1e-12);
        }
        let ratio = p.taps()[c] / p.normalization();
        assert!((ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_independent_closed_form() {
        for &beta in &[0.3, 0.25, 0.5, 1.0] {
            let p = make_rrc(beta, 16, 16).unwrap();
            let n = 16 * 16;
            let max_dev = p
                .taps()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let t = (i as f64 - n as f64) / 16.0;
                    (v / p.normalization() - rrc_oracle(t, beta)).abs()
                })
                .fold(0.0, f64::max);
            assert!(max_dev < 1e-12, "beta={beta} dev={max_dev}");
        }
    }

    #[test]
    fn unit_energy_at_full_rolloff() {
        let p = make_rrc(1.0, 16, 16).unwrap();
        assert!((p.energy() - 1.0).abs() < 1e-9);
        assert!(p.taps().iter().all(|t| t.is_finite()));
    }

    #[test]
    fn autocorrelation_examples() {
        let p = make_rrc(0.3, 16, 16).unwrap();
        assert!((p.autocorrelation_at(0.0).unwrap() - 1.0).abs() < 1e-6);
        for k in 1..=16 {
            assert!(p.autocorrelation_at(k as f64).unwrap().abs() < 2e-3);
        }
        let oracle = brute_autocorrelation(0.3, 16, 250, 0.9);
        let got = p.autocorrelation_at(0.9).unwrap();
        assert!((got - oracle).abs() < 1e-3, "{got} vs {oracle}");
        assert!(matches!(
            p.autocorrelation_at(32.5),
            Err(FtnError::LagOutOfRange { .. })
        ));
    }

    #[test]
    fn nyquist_spacing_has_no_isi() {
        for &beta in &[0.0, 0.3, 0.7, 1.0] {
            let p = make_rrc(beta, 16, 16).unwrap();
            let profile = p.isi_profile(1.0).unwrap();
            if beta > 0.0 {
                assert_eq!(profile.len(), 1, "beta={beta}");
            }
            assert_eq!(profile.center(), 1.0);
        }
    }

    #[test]
    fn ftn_profile_values() {
        let p = make_rrc(0.3, 16, 16).unwrap();
        let prof = p.isi_profile(0.9).unwrap();
        assert!(prof.taps()[1] > 0.0);
        for (i, &g) in prof.taps().iter().enumerate().take(4) {
            let oracle = brute_autocorrelation(0.3, 16, 250, 0.9 * i as f64);
            assert!((g - oracle).abs() < 1e-3, "lag {i}: {g} vs {oracle}");
        }
        let strong = make_rrc(0.5, 16, 16).unwrap().isi_profile(0.5).unwrap();
        assert!(strong.len() >= 3);
    }

    #[test]
    fn truncation_rule_holds() {
        let p = make_rrc(0.2, 16, 16).unwrap();
        let prof = p.isi_profile(0.7).unwrap();
        for &g in &prof.taps()[1..] {
            assert!(g == 0.0 || g.abs() > DEFAULT_TRUNCATION);
        }
        let cap = (32.0 / 0.7f64).floor() as usize;
        for i in prof.len()..=cap {
            let g = p.autocorrelation_at(i as f64 * 0.7).unwrap();
            assert!(g.abs() <= DEFAULT_TRUNCATION);
        }
    }

    #[test]
    fn tap_dump_format() {
        let p = make_rrc(0.5, 4, 4).unwrap();
        let mut buf = Vec::new();
        p.write_taps(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# beta=0.5 Q=4 span=4"));
        let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
        assert_eq!(values, p.taps());
    }

    proptest! {
        #[test]
        fn unit_energy_and_symmetry(beta in 0.0f64..=1.0, q in 16usize..24, span in 16usize..20) {
            let p = make_rrc(beta, q, span).unwrap();
            prop_assert!((p.energy() - 1.0).abs() < 1e-9);
            let t = p.taps();
            for i in 0..t.len() {
                prop_assert_eq!(t[i], t[t.len() - 1 - i]);
            }
        }

        #[test]
        fn raised_cosine_nyquist_zeros(beta in 0.1f64..=1.0, k in 1usize..=14) {
            let p = make_rrc(beta, 16, 16).unwrap();
            prop_assert!(p.autocorrelation_at(k as f64).unwrap().abs() < 2e-3);
            prop_assert!(p.autocorrelation_at(-(k as f64)).unwrap().abs() < 2e-3);
        }

        #[test]
        fn taps_bounded_by_center(beta in 0.0f64..=1.0, tau_c in 30u32..=100) {
            let tau = tau_c as f64 / 100.0;
            let prof = make_rrc(beta, 16, 16).unwrap().isi_profile(tau).unwrap();
            prop_assert_eq!(prof.center(), 1.0);
            for &g in prof.taps() {
                prop_assert!(g.abs() <= 1.0);
            }
        }

        #[test]
        fn discretisation_converges(beta in 0.2f64..=1.0, tau_c in 40u32..=100) {
            let tau = tau_c as f64 / 100.0;
            let coarse = make_rrc(beta, 16, 16).unwrap().isi_profile(tau).unwrap();
            let fine = make_rrc(beta, 32, 32).unwrap().isi_profile(tau).unwrap();
            for (a, b) in coarse.taps().iter().zip(fine.taps()) {
                if *a != 0.0 && *b != 0.0 {
                    prop_assert!((a - b).abs() < 1e-4, "{} vs {}", a, b);
                }
            }
        }
    }
}
