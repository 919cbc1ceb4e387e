use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ftn_core::harness::{self, ExperimentConfig, ReceivePath};
use ftn_core::region::{self, PulseParams};
use ftn_core::{validate, Chain, FtnConfig, FtnError, Modulation, Result};

#[derive(Debug, Parser)]
#[command(name = "ftn", version, about = "Faster-than-Nyquist signaling with symbol-by-symbol detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Operating-region boundary table as CSV
    Region(RegionArgs),
    /// BER curve as CSV
    Ber(BerArgs),
    /// Spectral-efficiency table as CSV
    Se(SeArgs),
    /// Cross-check the waveform chain against the discrete model
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct RegionArgs {
    /// Roll-off values: comma list or start:step:stop
    #[arg(long, default_value = "0:0.1:1")]
    beta: String,
    #[arg(long, default_value_t = region::DEFAULT_GRID_STEP)]
    grid_step: f64,
    /// Pulse oversampling used for the search
    #[arg(long, default_value_t = 64)]
    q: usize,
    /// One-sided pulse span in symbol intervals
    #[arg(long, default_value_t = 4)]
    span: usize,
    #[arg(long, default_value_t = 1e-3)]
    truncation: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LinkArgs {
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    #[arg(long = "mod", default_value = "qpsk")]
    modulation: Modulation,
    /// Go-back depth (0 = SSSSE)
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = harness::DEFAULT_BLOCK_LEN)]
    block: usize,
    #[arg(long, default_value_t = harness::DEFAULT_MIN_BIT_ERRORS)]
    min_errors: u64,
    /// Bit budget per point (accepts 1e7)
    #[arg(long, default_value_t = harness::DEFAULT_MAX_BITS as f64)]
    max_bits: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "discrete")]
    path: ReceivePath,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

impl LinkArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let ftn = FtnConfig::new(self.modulation, self.tau, self.beta)?;
        if !(self.max_bits >= 1.0 && self.max_bits.is_finite()) {
            return Err(FtnError::InvalidParameter(format!(
                "max-bits must be a positive number, got {}",
                self.max_bits
            )));
        }
        let mut cfg = ExperimentConfig::new(ftn);
        cfg.go_back = self.k;
        cfg.block_len = self.block;
        cfg.min_bit_errors = self.min_errors;
        cfg.max_bits = self.max_bits as u64;
        cfg.master_seed = self.seed;
        cfg.path = self.path;
        cfg.workers = self.workers;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct BerArgs {
    #[command(flatten)]
    link: LinkArgs,
    /// Eb/N0 grid in dB, start:step:stop
    #[arg(long, default_value = "0:2:10")]
    ebn0: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeArgs {
    /// Roll-off values: comma list or start:step:stop
    #[arg(long, default_value = "0:0.1:1")]
    beta: String,
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    #[arg(long = "mod", default_value = "qpsk")]
    modulation: Modulation,
    #[arg(long, default_value_t = harness::DEFAULT_BLOCK_LEN)]
    block: usize,
    /// Cyclic-prefix length
    #[arg(long, default_value_t = 0)]
    nu: usize,
    /// Search the smallest tau matching the Nyquist BER at the Nyquist SNR
    /// (long-running)
    #[arg(long)]
    search: bool,
    #[arg(long, default_value_t = 1e-4)]
    target_ber: f64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = harness::DEFAULT_MIN_BIT_ERRORS)]
    min_errors: u64,
    #[arg(long, default_value_t = harness::DEFAULT_MAX_BITS as f64)]
    max_bits: f64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Number of random configurations
    #[arg(long, default_value_t = 50)]
    configs: usize,
    /// Symbols per block
    #[arg(long, default_value_t = 200)]
    block: usize,
    /// Noise realizations for the covariance check (0 skips it)
    #[arg(long, default_value_t = 100_000)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        return harness::parse_range(spec);
    }
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| FtnError::InvalidParameter(format!("bad number '{v}'")))
        })
        .collect()
}

fn run_region(args: &RegionArgs) -> Result<()> {
    let params = PulseParams {
        samples_per_symbol: args.q,
        span: args.span,
        truncation: args.truncation,
    };
    let table = region::boundary_table(&parse_list(&args.beta)?, args.grid_step, &params)?;
    for row in &table.rows {
        log::info!(
            "beta={:.2}: tau_min={:.2} worst-case ISI {:.4}, below boundary {:?}",
            row.point.beta,
            row.point.tau_min,
            row.point.worst_case_isi,
            row.point.worst_case_isi_below
        );
    }
    let mut out = output(&args.out)?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run_ber(args: &BerArgs) -> Result<()> {
    let mut cfg = args.link.experiment()?;
    cfg.ebn0_db_list = harness::parse_range(&args.ebn0)?;
    let records = harness::run_ber_curve(&cfg)?;
    for r in records.iter().filter(|r| r.budget_exhausted) {
        log::warn!(
            "Eb/N0={} dB: bit budget exhausted after {} errors",
            r.ebn0_db,
            r.bit_errors
        );
    }
    let mut out = output(&args.out)?;
    harness::write_csv(&records, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run_se(args: &SeArgs) -> Result<()> {
    let betas = parse_list(&args.beta)?;
    let mut out = output(&args.out)?;
    if args.search {
        let mut template = ExperimentConfig::new(FtnConfig::new(args.modulation, 1.0, 0.0)?);
        template.go_back = args.k;
        template.block_len = args.block;
        template.master_seed = args.seed;
        template.min_bit_errors = args.min_errors;
        template.max_bits = args.max_bits as u64;
        template.workers = args.workers;
        writeln!(out, "beta,tau,ebn0_db,ber,se_ftn,se_nyquist")?;
        for beta in betas {
            let row = harness::search_se_tau(&template, beta, args.target_ber, 0.01)?;
            writeln!(
                out,
                "{:.2},{:.2},{:.4},{:.6e},{:.4},{:.4}",
                row.beta, row.tau, row.ebn0_db, row.ber, row.se_ftn, row.se_nyquist
            )?;
        }
    } else {
        writeln!(out, "beta,tau,mod,nu,block,se")?;
        for beta in betas {
            let rec = harness::SeRecord::new(args.modulation, beta, args.tau, args.block, args.nu)?;
            writeln!(
                out,
                "{:.2},{},{},{},{},{:.4}",
                rec.beta, rec.tau, rec.modulation, rec.cp_len, rec.block_len, rec.se
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut ok = true;
    println!("beta,tau,mod,max_deviation");
    for i in 0..args.configs {
        let beta = rng.random_range(2..=20) as f64 / 20.0;
        let tau = rng.random_range(50..=100) as f64 / 100.0;
        let modulation = if rng.random_bool(0.5) {
            Modulation::Qpsk
        } else {
            Modulation::Bpsk
        };
        let chain = Chain::new(FtnConfig::new(modulation, tau, beta)?)?;
        let dev = validate::model_deviation(&chain, args.block, args.seed.wrapping_add(i as u64))?;
        ok &= dev < 1e-3;
        println!("{beta:.2},{tau:.2},{modulation},{dev:.3e}");
    }
    if args.realizations > 0 {
        let chain = Chain::new(FtnConfig::new(Modulation::Qpsk, 0.8, 0.3)?)?;
        let cov = validate::noise_covariance(&chain, 16, args.realizations, 3, args.seed)?;
        println!("lag,measured,expected");
        for (lag, c) in cov.iter().enumerate() {
            let g = chain.pulse().autocorrelation_at(lag as f64 * 0.8)?;
            ok &= (c - g).abs() <= 0.05;
            println!("{lag},{c:.5},{g:.5}");
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Region(a) => run_region(a).map(|_| true),
        Command::Ber(a) => run_ber(a).map(|_| true),
        Command::Se(a) => run_se(a).map(|_| true),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
