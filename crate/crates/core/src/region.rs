//! Operating region where successive symbol-by-symbol detection is exact
//! for noise-free transmission.
//!
//! A symbol can always be recovered from its sample once the past ISI is
//! cancelled iff the centre tap strictly dominates the worst combination of
//! upcoming ISI, i.e. `G11 > sum_{i>=2} |G1i|`. For QPSK the same test applies
//! independently to each rail, so both constellations share one boundary.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chain::{Modulation, SymbolSequence};
use crate::error::{FtnError, Result};
use crate::pulse::{self, IsiProfile};

/// Margins at or below this count as a violation of the strict inequality.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Pulse discretisation used for the boundary search.
///
/// The boundary is sensitive to how far the pulse extends: with `beta` near
/// zero the sinc-like tails make the worst-case sum grow with the pulse span.
/// A pulse truncated to four symbol intervals on each side, finely sampled,
/// is the default here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    pub samples_per_symbol: usize,
    pub span: usize,
    pub truncation: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            samples_per_symbol: 64,
            span: 4,
            truncation: pulse::DEFAULT_TRUNCATION,
        }
    }
}

impl PulseParams {
    pub fn profile(&self, beta: f64, tau: f64) -> Result<IsiProfile> {
        pulse::make_rrc(beta, self.samples_per_symbol, self.span)?
            .isi_profile_with_threshold(tau, self.truncation)
    }
}

/// A point of the (beta, tau) plane together with its ISI taps.
#[derive(Debug, Clone)]
pub struct RegionQuery {
    pub beta: f64,
    pub tau: f64,
    pub modulation: Modulation,
    pub profile: IsiProfile,
}

impl RegionQuery {
    pub fn new(beta: f64, tau: f64, modulation: Modulation, params: &PulseParams) -> Result<Self> {
        Ok(Self {
            beta,
            tau,
            modulation,
            profile: params.profile(beta, tau)?,
        })
    }
}

/// Magnitude of the worst ISI that the upcoming `L - 1` symbols can put on a
/// sample: `sum_{i=2}^{L} |G1i|`.
pub fn worst_case_isi(profile: &IsiProfile) -> f64 {
    profile.taps().iter().skip(1).map(|g| g.abs()).sum()
}

/// Whether the centre tap strictly dominates the worst upcoming ISI.
pub fn satisfies_lemma(query: &RegionQuery) -> bool {
    profile_in_region(&query.profile)
}

pub fn profile_in_region(profile: &IsiProfile) -> bool {
    profile.center() - worst_case_isi(profile) > TIE_TOLERANCE
}

/// The `L - 1` symbols following `a_k` that push its sample hardest towards
/// the wrong decision: on each rail, `sign = -sign(a_k) * sign(G1,i+1)`.
///
/// Lags whose tap was truncated to zero get the same sign as `a_k`'s rail
/// negated; they carry no ISI either way.
pub fn adversarial_sequence(
    profile: &IsiProfile,
    a_k: Complex64,
    modulation: Modulation,
) -> Result<SymbolSequence> {
    if profile.len() < 2 {
        return Err(FtnError::InvalidParameter(
            "adversarial sequence needs at least one ISI lag (L >= 2)".into(),
        ));
    }
    let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    let symbols = profile.taps()[1..]
        .iter()
        .map(|&g| match modulation {
            Modulation::Bpsk => Complex64::new(-sign(a_k.re) * sign(g), 0.0),
            Modulation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Complex64::new(-sign(a_k.re) * sign(g) * s, -sign(a_k.im) * sign(g) * s)
            }
        })
        .collect();
    Ok(SymbolSequence {
        modulation,
        symbols,
    })
}

/// Grid value `1 - i * step`, rounded to kill accumulated float noise.
fn grid_tau(i: usize, step: f64) -> f64 {
    ((1.0 - i as f64 * step) * 1e9).round() / 1e9
}

/// Worst-case ISI along the search grid `tau = 1, 1 - step, ...` down to
/// (but excluding) zero.
pub fn scan_worst_case(beta: f64, grid_step: f64, params: &PulseParams) -> Result<Vec<(f64, f64)>> {
    check_step(grid_step)?;
    let pulse = pulse::make_rrc(beta, params.samples_per_symbol, params.span)?;
    (0..)
        .map(|i| grid_tau(i, grid_step))
        .take_while(|&tau| tau > 0.0)
        .map(|tau| {
            let prof = pulse.isi_profile_with_threshold(tau, params.truncation)?;
            Ok((tau, worst_case_isi(&prof)))
        })
        .collect()
}

fn check_step(grid_step: f64) -> Result<()> {
    if !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(FtnError::InvalidParameter(format!(
            "grid step must lie in (0, 1), got {grid_step}"
        )));
    }
    Ok(())
}

/// Result of one boundary search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub beta: f64,
    /// Smallest grid `tau` reached before the condition first fails.
    pub tau_min: f64,
    /// Worst-case ISI at `tau_min`.
    pub worst_case_isi: f64,
    /// Worst-case ISI one grid step below `tau_min` (the first violation).
    pub worst_case_isi_below: Option<f64>,
}

/// Start at `tau = 1` and step down by `grid_step` until the perfect
/// estimation condition fails; returns the last `tau` that satisfied it.
pub fn find_boundary(beta: f64, grid_step: f64, params: &PulseParams) -> Result<BoundaryPoint> {
    check_step(grid_step)?;
    let pulse = pulse::make_rrc(beta, params.samples_per_symbol, params.span)?;
    let profile_at = |tau| pulse.isi_profile_with_threshold(tau, params.truncation);

    let mut best = BoundaryPoint {
        beta,
        tau_min: 1.0,
        worst_case_isi: worst_case_isi(&profile_at(1.0)?),
        worst_case_isi_below: None,
    };
    for i in 1.. {
        let tau = grid_tau(i, grid_step);
        if tau <= 0.0 {
            break;
        }
        let prof = profile_at(tau)?;
        let wc = worst_case_isi(&prof);
        if !profile_in_region(&prof) {
            best.worst_case_isi_below = Some(wc);
            break;
        }
        best.tau_min = tau;
        best.worst_case_isi = wc;
    }
    Ok(best)
}

/// Spectral-efficiency bound `log2 M / ((1 + beta) tau)`.
pub fn se_bound(modulation: Modulation, beta: f64, tau: f64) -> f64 {
    modulation.bits_per_symbol() as f64 / ((1.0 + beta) * tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow {
    pub point: BoundaryPoint,
    pub se_bpsk: f64,
    pub se_qpsk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionBoundary {
    pub rows: Vec<BoundaryRow>,
    pub grid_step: f64,
}

/// Boundary and SE bounds for each roll-off in `betas`.
pub fn boundary_table(betas: &[f64], grid_step: f64, params: &PulseParams) -> Result<RegionBoundary> {
    let rows = betas
        .par_iter()
        .map(|&beta| {
            let point = find_boundary(beta, grid_step, params)?;
            Ok(BoundaryRow {
                point,
                se_bpsk: se_bound(Modulation::Bpsk, beta, point.tau_min),
                se_qpsk: se_bound(Modulation::Qpsk, beta, point.tau_min),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionBoundary { rows, grid_step })
}

impl RegionBoundary {
    /// `beta,tau_min,se_bpsk,se_qpsk`, two decimals each.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "beta,tau_min,se_bpsk,se_qpsk")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.2},{:.2},{:.2},{:.2}",
                r.point.beta, r.point.tau_min, r.se_bpsk, r.se_qpsk
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(taps: &[f64]) -> IsiProfile {
        IsiProfile::from_taps(0.5, taps.to_vec()).unwrap()
    }

    #[test]
    fn worst_case_examples() {
        assert_eq!(worst_case_isi(&profile(&[1.0])), 0.0);
        assert!((worst_case_isi(&profile(&[1.0, 0.3, -0.1])) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn ties_count_as_violation() {
        assert!(!profile_in_region(&profile(&[1.0, 0.5, -0.5])));
        assert!(profile_in_region(&profile(&[1.0, 0.5, -0.4999])));
    }

    #[test]
    fn adversarial_signs_follow_taps() {
        let p = profile(&[1.0, 0.4, -0.2, -0.1]);
        let plus = adversarial_sequence(&p, Complex64::new(1.0, 0.0), Modulation::Bpsk).unwrap();
        let re: Vec<f64> = plus.symbols.iter().map(|s| s.re).collect();
        assert_eq!(re, vec![-1.0, 1.0, 1.0]);
        let minus = adversarial_sequence(&p, Complex64::new(-1.0, 0.0), Modulation::Bpsk).unwrap();
        let re: Vec<f64> = minus.symbols.iter().map(|s| s.re).collect();
        assert_eq!(re, vec![1.0, -1.0, -1.0]);
        // achieved ISI equals the bound
        let isi: f64 = p.taps()[1..].iter().zip(&re).map(|(g, a)| g * a).sum();
        assert!((isi - worst_case_isi(&p)).abs() < 1e-15);
        assert!(adversarial_sequence(&profile(&[1.0]), Complex64::new(1.0, 0.0), Modulation::Bpsk).is_err());
    }

    #[test]
    fn adversarial_qpsk_opposes_each_rail() {
        let p = profile(&[1.0, 0.4, -0.2]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a_k = Complex64::new(s, -s);
        let adv = adversarial_sequence(&p, a_k, Modulation::Qpsk).unwrap();
        let isi: Complex64 = p.taps()[1..].iter().zip(&adv.symbols).map(|(g, a)| a * *g).sum();
        assert!((isi.re + 0.6 * s).abs() < 1e-15);
        assert!((isi.im - 0.6 * s).abs() < 1e-15);
    }

    #[test]
    fn nyquist_always_inside() {
        for &beta in &[0.0, 0.5, 1.0] {
            let q = RegionQuery::new(beta, 1.0, Modulation::Bpsk, &PulseParams::default()).unwrap();
            assert!(satisfies_lemma(&q));
        }
    }

    #[test]
    fn boundary_points_match_reference_rows() {
        let params = PulseParams::default();
        let inside = |beta, tau| {
            satisfies_lemma(&RegionQuery::new(beta, tau, Modulation::Qpsk, &params).unwrap())
        };
        assert!(inside(0.3, 0.49));
        assert!(!inside(0.3, 0.48));
        assert!(inside(1.0, 0.35));
        assert!(!inside(1.0, 0.34));
        let wc = |tau| worst_case_isi(&params.profile(0.3, tau).unwrap());
        assert!(wc(0.49) < 1.0);
        assert!(wc(0.48) >= 1.0);
    }

    #[test]
    fn csv_has_two_decimals() {
        let table = boundary_table(&[0.3], 0.01, &PulseParams::default()).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "beta,tau_min,se_bpsk,se_qpsk\n0.30,0.49,1.57,3.14\n"
        );
        let row = table.rows[0];
        assert_eq!(row.se_qpsk, 2.0 * row.se_bpsk);
    }

    #[test]
    fn rejects_bad_grid_step() {
        assert!(find_boundary(0.3, 0.0, &PulseParams::default()).is_err());
        assert!(find_boundary(0.3, 1.5, &PulseParams::default()).is_err());
    }
}
