//! Python bindings for `ftn-core`.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ftn_core::chain::{self, Chain, FtnConfig, Modulation, NoiseSpec, SampleSequence, SymbolSequence};
use ftn_core::harness::{self, ExperimentConfig, ReceivePath};
use ftn_core::region::{self, PulseParams};
use ftn_core::detect::{self as detector, DetectorConfig};
use ftn_core::{pulse, FtnError};

fn to_py(err: FtnError) -> PyErr {
    match err {
        FtnError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_mod(name: &str) -> PyResult<Modulation> {
    name.parse().map_err(to_py)
}

fn symbols(values: Vec<Complex64>, name: &str) -> PyResult<SymbolSequence> {
    Ok(SymbolSequence {
        modulation: parse_mod(name)?,
        symbols: values,
    })
}

/// Unit-energy root-raised-cosine pulse.
#[pyclass(name = "RrcPulse", frozen)]
struct PyRrcPulse {
    inner: pulse::RrcPulse,
}

#[pymethods]
impl PyRrcPulse {
    #[new]
    #[pyo3(signature = (beta, samples_per_symbol = 16, span = 16))]
    fn new(beta: f64, samples_per_symbol: usize, span: usize) -> PyResult<Self> {
        Ok(Self {
            inner: pulse::make_rrc(beta, samples_per_symbol, span).map_err(to_py)?,
        })
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn taps(&self) -> Vec<f64> {
        self.inner.taps().to_vec()
    }

    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    fn autocorrelation_at(&self, lag: f64) -> PyResult<f64> {
        self.inner.autocorrelation_at(lag).map_err(to_py)
    }

    #[pyo3(signature = (tau, threshold = pulse::DEFAULT_TRUNCATION))]
    fn isi_profile(&self, tau: f64, threshold: f64) -> PyResult<PyIsiProfile> {
        Ok(PyIsiProfile {
            inner: self
                .inner
                .isi_profile_with_threshold(tau, threshold)
                .map_err(to_py)?,
        })
    }
}

/// One-sided ISI taps `[G11, ..., G1L]`.
#[pyclass(name = "IsiProfile", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyIsiProfile {
    inner: pulse::IsiProfile,
}

#[pymethods]
impl PyIsiProfile {
    #[new]
    fn new(tau: f64, taps: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: pulse::IsiProfile::from_taps(tau, taps).map_err(to_py)?,
        })
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn taps(&self) -> Vec<f64> {
        self.inner.taps().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn worst_case_isi(&self) -> f64 {
        region::worst_case_isi(&self.inner)
    }

    fn in_region(&self) -> bool {
        region::profile_in_region(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("IsiProfile(tau={}, L={})", self.inner.tau(), self.inner.len())
    }
}

/// A configured FTN link (pulse, ISI profile, noise colouring).
#[pyclass(name = "Chain", frozen)]
struct PyChain {
    inner: Chain,
}

impl PyChain {
    fn noise(&self, ebn0_db: Option<f64>, seed: u64) -> NoiseSpec {
        match ebn0_db {
            Some(db) => self.inner.noise_for_ebn0(db, seed),
            None => NoiseSpec::noiseless(),
        }
    }
}

#[pymethods]
impl PyChain {
    #[new]
    #[pyo3(signature = (modulation, tau, beta, symbol_energy = 1.0))]
    fn new(modulation: &str, tau: f64, beta: f64, symbol_energy: f64) -> PyResult<Self> {
        let mut cfg = FtnConfig::new(parse_mod(modulation)?, tau, beta).map_err(to_py)?;
        cfg.symbol_energy = symbol_energy;
        Ok(Self {
            inner: Chain::new(cfg).map_err(to_py)?,
        })
    }

    #[getter]
    fn profile(&self) -> PyIsiProfile {
        PyIsiProfile {
            inner: self.inner.profile().clone(),
        }
    }

    /// Untruncated taps used by the discrete channel model.
    #[getter]
    fn channel_profile(&self) -> PyIsiProfile {
        PyIsiProfile {
            inner: self.inner.channel_profile().clone(),
        }
    }

    #[getter]
    fn samples_per_symbol(&self) -> usize {
        self.inner.samples_per_symbol()
    }

    fn modulate(&self, values: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let seq = symbols(values, &self.inner.config().modulation.to_string())?;
        Ok(self.inner.modulate(&seq).map_err(to_py)?.samples)
    }

    /// Discrete-model samples; `ebn0_db=None` is noise-free.
    #[pyo3(signature = (values, ebn0_db = None, seed = 0))]
    fn discrete_receive(&self, values: Vec<Complex64>, ebn0_db: Option<f64>, seed: u64) -> PyResult<Vec<Complex64>> {
        let seq = symbols(values, &self.inner.config().modulation.to_string())?;
        let noise = self.noise(ebn0_db, seed);
        Ok(self.inner.discrete_receive(&seq, &noise).map_err(to_py)?.samples)
    }

    /// Waveform-chain samples; `ebn0_db=None` is noise-free.
    #[pyo3(signature = (values, ebn0_db = None, seed = 0))]
    fn waveform_receive(&self, values: Vec<Complex64>, ebn0_db: Option<f64>, seed: u64) -> PyResult<Vec<Complex64>> {
        let seq = symbols(values, &self.inner.config().modulation.to_string())?;
        let noise = self.noise(ebn0_db, seed);
        Ok(self.inner.waveform_receive(&seq, &noise).map_err(to_py)?.samples)
    }
}

#[pyfunction]
fn map_bits(bits: Vec<u8>, modulation: &str) -> PyResult<Vec<Complex64>> {
    Ok(chain::map_bits(&bits, parse_mod(modulation)?)
        .map_err(to_py)?
        .symbols)
}

#[pyfunction]
fn demap_symbols(values: Vec<Complex64>, modulation: &str) -> PyResult<Vec<u32>> {
    // a Vec<u8> would surface as `bytes`
    Ok(chain::demap_symbols(&symbols(values, modulation)?)
        .into_iter()
        .map(u32::from)
        .collect())
}

#[pyfunction]
fn quantize(value: Complex64, modulation: &str) -> PyResult<Complex64> {
    Ok(detector::quantize(value, parse_mod(modulation)?))
}

/// Run the successive detector (`k=0`) or its go-back-`k` variant.
///
/// Returns `(decisions, additions, multiplications)`.
#[pyfunction]
#[pyo3(signature = (samples, profile, modulation, k = 0, symbol_energy = 1.0))]
fn detect(
    samples: Vec<Complex64>,
    profile: &PyIsiProfile,
    modulation: &str,
    k: usize,
    symbol_energy: f64,
) -> PyResult<(Vec<Complex64>, u64, u64)> {
    let cfg = DetectorConfig::new(profile.inner.clone(), parse_mod(modulation)?, k, symbol_energy);
    let res = detector::detect(&SampleSequence { samples }, &cfg);
    Ok((
        res.symbols.symbols,
        res.op_count.additions,
        res.op_count.multiplications,
    ))
}

#[pyfunction]
fn adversarial_sequence(profile: &PyIsiProfile, a_k: Complex64, modulation: &str) -> PyResult<Vec<Complex64>> {
    Ok(region::adversarial_sequence(&profile.inner, a_k, parse_mod(modulation)?)
        .map_err(to_py)?
        .symbols)
}

#[pyfunction]
#[pyo3(signature = (beta, grid_step = 0.01, samples_per_symbol = 64, span = 4))]
fn find_boundary(beta: f64, grid_step: f64, samples_per_symbol: usize, span: usize) -> PyResult<f64> {
    let params = PulseParams {
        samples_per_symbol,
        span,
        ..PulseParams::default()
    };
    Ok(region::find_boundary(beta, grid_step, &params).map_err(to_py)?.tau_min)
}

/// Rows of `(beta, tau_min, se_bpsk, se_qpsk)`.
#[pyfunction]
#[pyo3(signature = (betas, grid_step = 0.01))]
fn boundary_table(py: Python<'_>, betas: Vec<f64>, grid_step: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let table = py
        .detach(|| region::boundary_table(&betas, grid_step, &PulseParams::default()))
        .map_err(to_py)?;
    Ok(table
        .rows
        .iter()
        .map(|r| (r.point.beta, r.point.tau_min, r.se_bpsk, r.se_qpsk))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (modulation, beta, tau, block_len = 1000, cp_len = 0))]
fn spectral_efficiency(modulation: &str, beta: f64, tau: f64, block_len: usize, cp_len: usize) -> PyResult<f64> {
    harness::spectral_efficiency(parse_mod(modulation)?, beta, tau, block_len, cp_len).map_err(to_py)
}

/// Monte-Carlo BER curve. Returns rows of
/// `(ebn0_db, bit_errors, bits, ber, ci95)`.
type BerRow = (f64, u64, u64, f64, f64);

#[pyfunction]
#[pyo3(signature = (
    beta, tau, ebn0_db, modulation = "qpsk", k = 0, block_len = 1000,
    min_errors = 100, max_bits = 10_000_000, seed = 0, path = "discrete", workers = None
))]
#[allow(clippy::too_many_arguments)]
fn run_ber_curve(
    py: Python<'_>,
    beta: f64,
    tau: f64,
    ebn0_db: Vec<f64>,
    modulation: &str,
    k: usize,
    block_len: usize,
    min_errors: u64,
    max_bits: u64,
    seed: u64,
    path: &str,
    workers: Option<usize>,
) -> PyResult<Vec<BerRow>> {
    let ftn = FtnConfig::new(parse_mod(modulation)?, tau, beta).map_err(to_py)?;
    let mut cfg = ExperimentConfig::new(ftn);
    cfg.go_back = k;
    cfg.ebn0_db_list = ebn0_db;
    cfg.block_len = block_len;
    cfg.min_bit_errors = min_errors;
    cfg.max_bits = max_bits;
    cfg.master_seed = seed;
    cfg.path = path.parse::<ReceivePath>().map_err(to_py)?;
    cfg.workers = workers;
    let records = py.detach(|| harness::run_ber_curve(&cfg)).map_err(to_py)?;
    Ok(records
        .iter()
        .map(|r| (r.ebn0_db, r.bit_errors, r.bits_simulated, r.ber, r.ci95_halfwidth))
        .collect())
}

#[pymodule]
fn ftn_sss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRrcPulse>()?;
    m.add_class::<PyIsiProfile>()?;
    m.add_class::<PyChain>()?;
    m.add_function(wrap_pyfunction!(map_bits, m)?)?;
    m.add_function(wrap_pyfunction!(demap_symbols, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(adversarial_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(find_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_table, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(run_ber_curve, m)?)?;
    Ok(())
}
