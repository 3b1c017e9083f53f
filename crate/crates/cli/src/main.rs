//! Command-line front end for the V:N:M toolkit.
//!
//! JSON results go to stdout, artifacts to the paths given by flags, and
//! diagnostics to stderr. Exit codes: 2 for validation problems, 3 for I/O
//! problems. Every command is deterministic given its inputs, flags and
//! seed; `VNMKIT_THREADS` caps internal parallelism without changing any
//! output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use vnmkit::cost::cost_model;
use vnmkit::energy::{energy, energy_sweep, reports_to_csv, EnergyReport, SweepPolicy};
use vnmkit::io;
use vnmkit::prune::{
    column_search_strategy, gradual_prune, magnitude_prune_vnm, make_decay_schedule, so_prune_vnm,
    Damp, FisherEstimator, SaliencyMode,
};
use vnmkit::spmm::{spmm_reference, SpmmProblem};
use vnmkit::{compress, decompress, mask_of, DenseMatrix, Dtype, VnmConfig};

#[derive(Parser)]
#[command(name = "vnmkit", version, about = "V:N:M sparse-format toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    /// Magnitude selection (columns by L1, rows by |w|).
    Magnitude,
    /// Second-order selection scoring pruned sets exactly.
    SoExact,
    /// Second-order selection with the pair-wise composition.
    SoPairwise,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a random dense matrix (seeded normal values) as DMX1.
    Gen {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Prune a dense matrix to a valid V:N:M mask (MSK1) plus a summary.
    Prune {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        policy: Policy,
        #[arg(long)]
        v: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Gradient samples (DMX1, one row per sample) for second-order
        /// policies.
        #[arg(long)]
        grads: Option<PathBuf>,
        /// Absolute dampening lambda; defaults to 1e-4 x mean Fisher diagonal.
        #[arg(long)]
        damp: Option<f64>,
        /// Initial N for gradual structure decay (requires --beta).
        #[arg(long)]
        n0: Option<usize>,
        /// Decay step count for gradual pruning (requires --n0).
        #[arg(long)]
        beta: Option<usize>,
    },
    /// Compress a dense matrix under a mask into the VNM1 container.
    Compress {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        v: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Round stored values through 16-bit precision.
        #[arg(long)]
        half: bool,
    },
    /// Expand a VNM1 container back to a dense DMX1 matrix.
    Decompress {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Multiply a compressed matrix by a dense one, writing DMX1.
    Spmm {
        /// Compressed left operand (VNM1).
        #[arg(long)]
        lhs: PathBuf,
        /// Dense right operand (DMX1).
        #[arg(long)]
        rhs: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Energy of a mask, or an energy sweep over policies and sparsities.
    Energy {
        #[arg(short, long)]
        input: PathBuf,
        /// Evaluate one mask (MSK1) instead of sweeping.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Sweep grid: block widths m, sparsity 1 - 2/m each.
        #[arg(long, value_delimiter = ',')]
        sweep_ms: Vec<usize>,
        /// V:N:M block heights to sweep.
        #[arg(long, value_delimiter = ',')]
        sweep_v: Vec<usize>,
        /// Vector-wise vector lengths to sweep.
        #[arg(long, value_delimiter = ',')]
        sweep_vw: Vec<usize>,
        /// Skip the unstructured (ideal) policy in the sweep.
        #[arg(long)]
        no_unstructured: bool,
        /// Also write the sweep as CSV (policy,sparsity,energy).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Analytical cost report for an R x K x C problem at a pattern.
    Cost {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        v: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        m: usize,
    },
    /// Summarize a VNM1 container.
    Inspect {
        #[arg(short, long)]
        input: PathBuf,
    },
}

struct CliError {
    code: u8,
    msg: String,
}

impl From<vnmkit::Error> for CliError {
    fn from(e: vnmkit::Error) -> Self {
        let code = match e {
            vnmkit::Error::Io(_) => 3,
            _ => 2,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: 3,
        msg: format!("{}: {e}", path.display()),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        msg: msg.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(|e| io_err(path, e))?))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn read_dense_file(path: &Path) -> Result<DenseMatrix, CliError> {
    let (d, _) = io::read_dense(&mut open(path)?)?;
    Ok(d)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

#[derive(Serialize)]
struct VnmSummary {
    r: usize,
    k: usize,
    v: usize,
    n: usize,
    m: usize,
    dtype: String,
    values_bytes: usize,
    m_indices_bytes: usize,
    column_loc_bytes: usize,
    sparsity: f64,
    ideal_speedup: f64,
}

impl VnmSummary {
    fn of(s: &vnmkit::VnmMatrix) -> Self {
        let (values_bytes, m_indices_bytes, column_loc_bytes) =
            io::vnm_structure_bytes(s.r(), s.k(), s.cfg());
        VnmSummary {
            r: s.r(),
            k: s.k(),
            v: s.cfg().v,
            n: s.cfg().n,
            m: s.cfg().m,
            dtype: match s.dtype() {
                Dtype::Real32 => "real32".to_string(),
                Dtype::HalfEmulated => "half_emulated".to_string(),
            },
            values_bytes,
            m_indices_bytes,
            column_loc_bytes,
            sparsity: s.cfg().sparsity(),
            ideal_speedup: s.cfg().ideal_speedup(),
        }
    }
}

#[derive(Serialize)]
struct PruneSummary {
    policy: String,
    v: usize,
    n: usize,
    m: usize,
    sparsity: f64,
    energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    search: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<Vec<usize>>,
}

fn cmd_gen(rows: usize, cols: usize, seed: u64, scale: f32, output: &Path) -> Result<(), CliError> {
    if rows == 0 || cols == 0 {
        return Err(invalid("rows and cols must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f32> = (0..rows * cols)
        .map(|_| {
            let x: f32 = rng.sample(StandardNormal);
            x * scale
        })
        .collect();
    let d = DenseMatrix::new(rows, cols, data)?;
    let mut w = create(output)?;
    io::write_dense(&mut w, &d, Dtype::Real32)?;
    w.flush().map_err(|e| io_err(output, e))?;
    print_json(&serde_json::json!({ "rows": rows, "cols": cols, "seed": seed }));
    Ok(())
}

fn build_fisher(
    d: &DenseMatrix,
    m: usize,
    grads: Option<&PathBuf>,
    damp: Option<f64>,
) -> Result<vnmkit::prune::FisherInverse, CliError> {
    let grads = grads.ok_or_else(|| invalid("second-order policies require --grads"))?;
    let (g, _) = io::read_dense(&mut open(grads)?)?;
    let width = d.rows() * d.cols();
    if g.cols() != width {
        return Err(invalid(format!(
            "gradient samples have {} columns, weights have {} entries",
            g.cols(),
            width
        )));
    }
    let damp = match damp {
        Some(l) => Damp::Fixed(l),
        None => Damp::AutoScaled(1e-4),
    };
    let mut est = FisherEstimator::new(width, m, damp)?;
    for s in 0..g.rows() {
        est.add_sample(g.row(s))?;
    }
    Ok(est.finalize()?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_prune(
    input: &Path,
    output: &Path,
    policy: Policy,
    v: usize,
    n: usize,
    m: usize,
    grads: Option<&PathBuf>,
    damp: Option<f64>,
    n0: Option<usize>,
    beta: Option<usize>,
) -> Result<(), CliError> {
    let d = read_dense_file(input)?;
    let cfg = VnmConfig::new(v, n, m);
    vnmkit::validate_config(d.rows(), d.cols(), &cfg)?;

    let mut search = None;
    let mut steps = None;
    let mask = match policy {
        Policy::Magnitude => magnitude_prune_vnm(&d, &cfg)?,
        Policy::SoExact | Policy::SoPairwise => {
            let mode = if policy == Policy::SoExact {
                SaliencyMode::Exact
            } else {
                SaliencyMode::Pairwise
            };
            let fisher = build_fisher(&d, m, grads, damp)?;
            search = Some(column_search_strategy(m).as_str().to_string());
            match (n0, beta) {
                (Some(n0), Some(beta)) => {
                    let schedule = make_decay_schedule(n0, n, beta)?;
                    steps = Some(schedule.steps().to_vec());
                    let seq = gradual_prune(&d, &cfg, &schedule, |_| Ok(fisher.clone()), mode)?;
                    seq.into_iter().last().expect("schedule is non-empty")
                }
                (None, None) => so_prune_vnm(&d, &fisher, &cfg, mode, None)?,
                _ => return Err(invalid("--n0 and --beta must be given together")),
            }
        }
    };

    let mut w = create(output)?;
    io::write_mask(&mut w, &mask)?;
    w.flush().map_err(|e| io_err(output, e))?;

    print_json(&PruneSummary {
        policy: match policy {
            Policy::Magnitude => "magnitude".to_string(),
            Policy::SoExact => "second_order_exact".to_string(),
            Policy::SoPairwise => "second_order_pairwise".to_string(),
        },
        v,
        n,
        m,
        sparsity: cfg.sparsity(),
        energy: energy(&d, &mask)?,
        search,
        steps,
    });
    Ok(())
}

fn cmd_compress(
    input: &Path,
    mask_path: &Path,
    output: &Path,
    v: usize,
    n: usize,
    m: usize,
    half: bool,
) -> Result<(), CliError> {
    let d = read_dense_file(input)?;
    let mask = io::read_mask(&mut open(mask_path)?)?;
    let cfg = VnmConfig::new(v, n, m);
    if !mask.vnm_valid(&cfg) {
        return Err(invalid(format!("mask is not a valid {cfg} mask")));
    }
    let dtype = if half { Dtype::HalfEmulated } else { Dtype::Real32 };
    let s = compress(&d, &mask, &cfg, dtype)?;
    let mut w = create(output)?;
    io::write_vnm(&mut w, &s)?;
    w.flush().map_err(|e| io_err(output, e))?;
    print_json(&VnmSummary::of(&s));
    Ok(())
}

fn cmd_decompress(input: &Path, output: &Path) -> Result<(), CliError> {
    let s = io::read_vnm(&mut open(input)?)?;
    let d = decompress(&s)?;
    let mut w = create(output)?;
    io::write_dense(&mut w, &d, s.dtype())?;
    w.flush().map_err(|e| io_err(output, e))?;
    print_json(&serde_json::json!({ "rows": d.rows(), "cols": d.cols() }));
    Ok(())
}

fn cmd_spmm(lhs: &Path, rhs: &Path, output: &Path) -> Result<(), CliError> {
    let a = io::read_vnm(&mut open(lhs)?)?;
    let b = read_dense_file(rhs)?;
    let p = SpmmProblem::new(&a, &b)?;
    let out = spmm_reference(&p)?;
    let mut w = create(output)?;
    io::write_dense(&mut w, &out, Dtype::Real32)?;
    w.flush().map_err(|e| io_err(output, e))?;
    print_json(&serde_json::json!({ "rows": out.rows(), "cols": out.cols() }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_energy(
    input: &Path,
    mask: Option<&PathBuf>,
    sweep_ms: &[usize],
    sweep_v: &[usize],
    sweep_vw: &[usize],
    no_unstructured: bool,
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    let d = read_dense_file(input)?;
    if let Some(mask_path) = mask {
        let mask = io::read_mask(&mut open(mask_path)?)?;
        let e = energy(&d, &mask)?;
        let total = d.rows() * d.cols();
        let report = EnergyReport {
            policy: "mask".to_string(),
            sparsity: 1.0 - mask.popcount() as f64 / total as f64,
            energy: e,
        };
        print_json(&report);
        return Ok(());
    }
    if sweep_ms.is_empty() {
        return Err(invalid("need --mask or a sweep grid (--sweep-ms)"));
    }
    let mut policies = Vec::new();
    if !no_unstructured {
        policies.push(SweepPolicy::Unstructured);
    }
    policies.extend(sweep_v.iter().map(|&v| SweepPolicy::Vnm { v }));
    policies.extend(sweep_vw.iter().map(|&l| SweepPolicy::VectorWise { l }));
    if policies.is_empty() {
        return Err(invalid("sweep has no policies"));
    }
    let sparsities: Vec<f64> = sweep_ms.iter().map(|&m| 1.0 - 2.0 / m as f64).collect();
    let reports = energy_sweep(&d, &policies, &sparsities)?;
    if let Some(csv_path) = csv {
        let mut w = create(csv_path)?;
        w.write_all(reports_to_csv(&reports).as_bytes())
            .map_err(|e| io_err(csv_path, e))?;
        w.flush().map_err(|e| io_err(csv_path, e))?;
    }
    print_json(&reports);
    Ok(())
}

fn cmd_cost(r: usize, k: usize, c: usize, v: usize, n: usize, m: usize) -> Result<(), CliError> {
    let report = cost_model(r, k, c, &VnmConfig::new(v, n, m))?;
    print_json(&report);
    Ok(())
}

fn cmd_inspect(input: &Path) -> Result<(), CliError> {
    let s = io::read_vnm(&mut open(input)?)?;
    // Also sanity-check that the payload decompresses and re-masks.
    let _ = mask_of(&s)?;
    print_json(&VnmSummary::of(&s));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Gen {
            rows,
            cols,
            seed,
            scale,
            output,
        } => cmd_gen(*rows, *cols, *seed, *scale, output),
        Cmd::Prune {
            input,
            output,
            policy,
            v,
            n,
            m,
            grads,
            damp,
            n0,
            beta,
        } => cmd_prune(
            input,
            output,
            *policy,
            *v,
            *n,
            *m,
            grads.as_ref(),
            *damp,
            *n0,
            *beta,
        ),
        Cmd::Compress {
            input,
            mask,
            output,
            v,
            n,
            m,
            half,
        } => cmd_compress(input, mask, output, *v, *n, *m, *half),
        Cmd::Decompress { input, output } => cmd_decompress(input, output),
        Cmd::Spmm { lhs, rhs, output } => cmd_spmm(lhs, rhs, output),
        Cmd::Energy {
            input,
            mask,
            sweep_ms,
            sweep_v,
            sweep_vw,
            no_unstructured,
            csv,
        } => cmd_energy(
            input,
            mask.as_ref(),
            sweep_ms,
            sweep_v,
            sweep_vw,
            *no_unstructured,
            csv.as_ref(),
        ),
        Cmd::Cost { r, k, c, v, n, m } => cmd_cost(*r, *k, *c, *v, *n, *m),
        Cmd::Inspect { input } => cmd_inspect(input),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("VNMKIT_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) => {
                vnmkit::configure_threads(t);
            }
            Err(_) => {
                eprintln!("error: VNMKIT_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
