//! Command-line front end for the `sqst` binary.

pub mod fig2;
pub mod state;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use sqst_core::estimator::{
    achievable_epsilon, achievable_epsilon_general, decompose_operator, estimate_diagonal,
    estimate_element, estimate_mean, extreme_operator, hoeffding_failure, plan_samples,
    plan_samples_general, OperatorCoefficients, SelectiveEstimate,
};
use sqst_core::measurement::{
    outcome_distribution, read_record, sample_record, write_record, MeasurementRecord, PovmMode,
    RecordFormat,
};
use sqst_core::mub::{build_mub, verify_mub, MubFamily, MubFile};
use sqst_core::qstate::{
    check_norm_chain, random_hermitian, read_matrix_file, schatten_norm, CMatrix, HermitianMatrix,
    MatrixFile,
};
use sqst_core::tomography::{
    assemble_linear_estimate, error_report, project_psd_clip, project_psd_maxnorm,
    ProjectionOptions,
};

use crate::fig2::{rows_csv, run_fig2, summary_line, Fig2Config};
use crate::state::StateSpec;

#[derive(Debug, Parser)]
#[command(
    name = "sqst",
    version,
    about = "Selective quantum state tomography simulator"
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (record path for `simulate`); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Suppress informational lines on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Copies needed for a target precision and confidence.
    Plan(PlanArgs),
    /// Export (and optionally verify) the MUB family for a dimension.
    Mub(MubArgs),
    /// Prepare copies of a state, measure them, write the record(s).
    Simulate(SimulateArgs),
    /// Estimate density-matrix elements from existing records.
    Estimate(EstimateArgs),
    /// Assemble the full estimate and project it onto density matrices.
    Tomography(TomographyArgs),
    /// Error histogram of single off-diagonal estimates over random superpositions.
    #[command(name = "reproduce-fig2")]
    ReproduceFig2(Fig2Args),
    /// Check the max / Frobenius / trace norm chain on random Hermitian matrices.
    BoundsCheck(BoundsArgs),
    /// Estimate the mean of an operator from a full-POVM record.
    OperatorEstimate(OperatorArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
    /// Number of simultaneously estimated quantities.
    #[arg(long, default_value_t = 1)]
    pub elements: u64,
    /// Coefficient bound K of a general operator; needs --dim.
    #[arg(long, requires = "dim")]
    pub k_bound: Option<f64>,
    #[arg(long, requires = "k_bound")]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MubArgs {
    #[arg(long)]
    pub dim: usize,
    /// Print the verification report (to stdout) instead of only exporting.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Largest prime power accepted.
    #[arg(long, default_value_t = 64)]
    pub max_order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PovmChoice {
    Offdiag,
    Full,
    Computational,
    /// Off-diagonal and computational records side by side.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecordFormatArg {
    Text,
    Binary,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub dim: usize,
    /// superposition:i,j,a,b | maximally-mixed | basis:i | random:rank | file:path
    #[arg(long)]
    pub state: String,
    #[arg(long, conflicts_with_all = ["epsilon", "delta"])]
    pub copies: Option<u64>,
    #[arg(long, requires = "delta")]
    pub epsilon: Option<f64>,
    #[arg(long, requires = "epsilon")]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub elements: u64,
    #[arg(long, value_enum, default_value_t = PovmChoice::Offdiag)]
    pub povm: PovmChoice,
    /// Defaults to binary for a `.bin` path, text otherwise.
    #[arg(long, value_enum)]
    pub record_format: Option<RecordFormatArg>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Off-diagonal record.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Computational-basis record, used for i == j.
    #[arg(long)]
    pub diag_record: Option<PathBuf>,
    /// Element `i,j`; repeat for several.
    #[arg(long = "element", required = true)]
    pub elements: Vec<String>,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// MUB family file; rebuilt from the record dimension when omitted.
    #[arg(long)]
    pub mub: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectChoice {
    Maxnorm,
    Clip,
    None,
}

#[derive(Debug, Args)]
pub struct TomographyArgs {
    #[arg(long)]
    pub offdiag_record: PathBuf,
    #[arg(long)]
    pub diag_record: PathBuf,
    #[arg(long, value_enum, default_value_t = ProjectChoice::Maxnorm)]
    pub project: ProjectChoice,
    #[arg(long)]
    pub truth: Option<String>,
    /// Impose positivity only, without the unit-trace constraint.
    #[arg(long)]
    pub no_unit_trace: bool,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long)]
    pub mub: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Fig2Args {
    #[arg(long, value_delimiter = ',', default_values_t = fig2::DEFAULT_DIMS)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Copies per trial; planner value when omitted.
    #[arg(long)]
    pub copies: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Also check the all-ones matrix.
    #[arg(long)]
    pub adversarial: bool,
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    /// Record measured with the full POVM.
    #[arg(long)]
    pub record: PathBuf,
    /// JSON matrix file holding the operator.
    #[arg(long, conflicts_with = "extreme")]
    pub operator: Option<PathBuf>,
    /// Use `sum_km K e^{i phi_km} Pi_k^(m)` with phases drawn from the seed.
    #[arg(long)]
    pub extreme: bool,
    /// Coefficient modulus for --extreme; defaults to 1/(d+1).
    #[arg(long)]
    pub k_bound: Option<f64>,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long)]
    pub mub: Option<PathBuf>,
}

struct Ctx<'a> {
    seed: u64,
    out: Option<&'a Path>,
    format: Option<OutputFormat>,
    quiet: bool,
}

impl Ctx<'_> {
    fn emit(&self, text: &str) -> Result<()> {
        match self.out {
            Some(path) => {
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn note(&self, text: &str) {
        if !self.quiet {
            eprintln!("{text}");
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out.as_deref(),
        format: cli.format,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Plan(a) => cmd_plan(&ctx, a),
        Command::Mub(a) => cmd_mub(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Tomography(a) => cmd_tomography(&ctx, a),
        Command::ReproduceFig2(a) => cmd_reproduce_fig2(&ctx, a),
        Command::BoundsCheck(a) => cmd_bounds_check(&ctx, a),
        Command::OperatorEstimate(a) => cmd_operator_estimate(&ctx, a),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn cmd_plan(ctx: &Ctx, a: &PlanArgs) -> Result<()> {
    let (n, scale, inequality) = match (a.k_bound, a.dim) {
        (Some(k), Some(d)) => (
            plan_samples_general(a.epsilon, a.delta, k, d, a.elements)?,
            k * k * ((d + 1) as f64).powi(2),
            "4*M*exp(-N*eps^2/(2*K^2*(d+1)^2)) <= delta",
        ),
        _ => (
            plan_samples(a.epsilon, a.delta, a.elements)?,
            1.0,
            "4*M*exp(-N*eps^2/2) <= delta",
        ),
    };
    let failure = hoeffding_failure(n, a.epsilon, a.elements, scale);
    match ctx.format {
        Some(OutputFormat::Json) => ctx.emit(&to_json(&json!({
            "n": n,
            "epsilon": a.epsilon,
            "delta": a.delta,
            "elements": a.elements,
            "k_bound": a.k_bound,
            "d": a.dim,
            "inequality": inequality,
            "failure_bound": failure,
        }))?),
        Some(OutputFormat::Csv) => ctx.emit(&format!(
            "n,epsilon,delta,elements,failure_bound\n{n},{},{},{},{failure:e}\n",
            a.epsilon, a.delta, a.elements
        )),
        None => {
            ctx.note(&format!(
                "{inequality}: {failure:.6e} <= {} at N = {n}",
                a.delta
            ));
            ctx.emit(&format!("{n}\n"))
        }
    }
}

fn cmd_mub(ctx: &Ctx, a: &MubArgs) -> Result<()> {
    let family = sqst_core::mub::build_mub_with_max(a.dim, a.max_order)?;
    let file = to_json(&family.to_file())?;
    if !a.verify {
        return ctx.emit(&file);
    }
    if let Some(path) = ctx.out {
        fs::write(path, &file).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = verify_mub(&family, a.tol);
    print!("{}", to_json(&report)?);
    ensure!(
        report.pass,
        "MUB verification failed for d={} at tol {}",
        a.dim,
        a.tol
    );
    Ok(())
}

fn load_family(path: Option<&Path>, d: usize) -> Result<MubFamily> {
    let family = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file: MubFile =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            MubFamily::from_file(&file)?
        }
        None => build_mub(d)?,
    };
    ensure!(
        family.dim() == d,
        "MUB family has dimension {}, record has {d}",
        family.dim()
    );
    Ok(family)
}

fn load_record(path: &Path, family: Option<&MubFamily>) -> Result<MeasurementRecord> {
    read_record(path, family).with_context(|| format!("loading record {}", path.display()))
}

/// `<stem>.<tag>.<ext>` next to `path`.
fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

/// Seed of the computational record in `--povm both`, kept apart from the
/// off-diagonal record's stream.
fn companion_seed(seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng.next_u64()
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let out = ctx
        .out
        .context("simulate needs --out for the record path")?;
    let n = match (a.copies, a.epsilon, a.delta) {
        (Some(n), None, None) => n,
        (None, Some(eps), Some(delta)) => plan_samples(eps, delta, a.elements)?,
        _ => bail!("give exactly one of --copies or --epsilon/--delta"),
    };
    let spec: StateSpec = a.state.parse()?;
    let rho = spec.build(a.dim, ctx.seed)?;
    let family = build_mub(a.dim)?;
    let format = match a.record_format {
        Some(RecordFormatArg::Binary) => RecordFormat::Binary,
        Some(RecordFormatArg::Text) => RecordFormat::Text,
        None if out.extension().is_some_and(|e| e == "bin") => RecordFormat::Binary,
        None => RecordFormat::Text,
    };
    let jobs: Vec<(PovmMode, PathBuf, u64)> = match a.povm {
        PovmChoice::Offdiag => vec![(PovmMode::Offdiag, out.to_path_buf(), ctx.seed)],
        PovmChoice::Full => vec![(PovmMode::Full, out.to_path_buf(), ctx.seed)],
        PovmChoice::Computational => vec![(PovmMode::Computational, out.to_path_buf(), ctx.seed)],
        PovmChoice::Both => vec![
            (PovmMode::Offdiag, tagged_path(out, "offdiag"), ctx.seed),
            (
                PovmMode::Computational,
                tagged_path(out, "computational"),
                companion_seed(ctx.seed),
            ),
        ],
    };
    for (mode, path, seed) in jobs {
        let dist = outcome_distribution(&rho, &family, mode)?;
        let record = sample_record(&dist, n, seed)?;
        write_record(&record, &path, format)?;
        ctx.note(&format!(
            "wrote {} outcomes (d={} mode={mode} seed={seed}) to {}",
            n,
            a.dim,
            path.display()
        ));
    }
    Ok(())
}

fn parse_element(s: &str) -> Result<(usize, usize)> {
    let (i, j) = s
        .split_once(',')
        .with_context(|| format!("element '{s}' should be i,j"))?;
    Ok((
        i.trim().parse().context("element row")?,
        j.trim().parse().context("element column")?,
    ))
}

#[derive(Serialize)]
struct EstimateRow {
    i: usize,
    j: usize,
    re: f64,
    im: f64,
    n: u64,
    epsilon: Option<f64>,
    delta: Option<f64>,
    guarantee: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_error: Option<f64>,
}

fn cmd_estimate(ctx: &Ctx, a: &EstimateArgs) -> Result<()> {
    let elements: Vec<(usize, usize)> = a
        .elements
        .iter()
        .map(|s| parse_element(s))
        .collect::<Result<_>>()?;
    let offdiag = a
        .record
        .as_deref()
        .map(|p| load_record(p, None))
        .transpose()?;
    let diag = a
        .diag_record
        .as_deref()
        .map(|p| load_record(p, None))
        .transpose()?;
    let d = match (&offdiag, &diag) {
        (Some(r), _) | (None, Some(r)) => r.dim(),
        (None, None) => bail!("need --record and/or --diag-record"),
    };
    let family = load_family(a.mub.as_deref(), d)?;
    for r in offdiag.iter().chain(diag.iter()) {
        ensure!(r.dim() == d, "records disagree on dimension");
        r.check_family(&family)?;
    }
    let truth = a
        .truth
        .as_deref()
        .map(|s| s.parse::<StateSpec>()?.build(d, ctx.seed))
        .transpose()?;
    let m = elements.len() as u64;

    let mut rows = Vec::new();
    for &(i, j) in &elements {
        let est: SelectiveEstimate = if i == j {
            let rec = diag
                .as_ref()
                .context("diagonal elements need --diag-record")?;
            estimate_diagonal(rec, i)?
        } else {
            let rec = offdiag
                .as_ref()
                .context("off-diagonal elements need --record")?;
            estimate_element(rec, &family, i, j)?
        }
        .with_guarantee(a.delta, m)?;
        let abs_error = truth.as_ref().map(|t| (est.value - t.element(i, j)).norm());
        rows.push(EstimateRow {
            i,
            j,
            re: est.value.re,
            im: est.value.im,
            n: est.n,
            epsilon: est.epsilon,
            delta: est.delta,
            guarantee: est.guarantee,
            abs_error,
        });
    }

    match ctx.format {
        Some(OutputFormat::Csv) => {
            let mut out = String::from("i,j,re,im,n,epsilon,delta");
            out.push_str(if truth.is_some() {
                ",abs_error\n"
            } else {
                "\n"
            });
            for r in &rows {
                write!(
                    out,
                    "{},{},{:e},{:e},{},{:e},{}",
                    r.i,
                    r.j,
                    r.re,
                    r.im,
                    r.n,
                    r.epsilon.unwrap_or(f64::NAN),
                    a.delta
                )?;
                if let Some(e) = r.abs_error {
                    write!(out, ",{e:e}")?;
                }
                out.push('\n');
            }
            ctx.emit(&out)
        }
        _ => ctx.emit(&to_json(&rows)?),
    }
}

fn matrix_json(m: &CMatrix) -> MatrixFile {
    MatrixFile::from_matrix(m)
}

fn cmd_tomography(ctx: &Ctx, a: &TomographyArgs) -> Result<()> {
    let off = load_record(&a.offdiag_record, None)?;
    let family = load_family(a.mub.as_deref(), off.dim())?;
    off.check_family(&family)?;
    let diag = load_record(&a.diag_record, Some(&family))?;
    let linear = assemble_linear_estimate(&off, &diag, &family)?;
    let epsilon = linear.epsilon(a.delta)?;
    let opts = ProjectionOptions {
        unit_trace: !a.no_unit_trace,
        ..Default::default()
    };

    let (method, rho, t_star, converged, iterations) = match a.project {
        ProjectChoice::None => ("none", linear.matrix().clone(), 0.0, true, 0),
        ProjectChoice::Clip => {
            let r = project_psd_clip(linear.as_hermitian())?;
            (
                r.method.as_str(),
                r.rho,
                r.t_star,
                r.converged,
                r.iterations,
            )
        }
        ProjectChoice::Maxnorm => {
            let r = project_psd_maxnorm(linear.as_hermitian(), &opts)?;
            (
                r.method.as_str(),
                r.rho,
                r.t_star,
                r.converged,
                r.iterations,
            )
        }
    };
    let is_density = sqst_core::qstate::DensityMatrix::new(rho.clone()).is_ok();
    if !is_density {
        ctx.note("estimate is not a valid density matrix");
    }
    let report = match &a.truth {
        Some(s) => Some(error_report(
            &s.parse::<StateSpec>()?.build(off.dim(), ctx.seed)?,
            &rho,
        )?),
        None => None,
    };

    match ctx.format {
        Some(OutputFormat::Csv) => {
            let mut out = String::from("i,j,re,im\n");
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    writeln!(out, "{i},{j},{:e},{:e}", rho[(i, j)].re, rho[(i, j)].im)?;
                }
            }
            ctx.emit(&out)
        }
        _ => ctx.emit(&to_json(&json!({
            "d": off.dim(),
            "method": method,
            "t_star": t_star,
            "converged": converged,
            "iterations": iterations,
            "is_density_matrix": is_density,
            "copies": { "offdiag": off.len(), "computational": diag.len() },
            "epsilon": epsilon,
            "delta": a.delta,
            "rho": matrix_json(&rho),
            "error_report": report,
        }))?),
    }
}

fn cmd_reproduce_fig2(ctx: &Ctx, a: &Fig2Args) -> Result<()> {
    let cfg = Fig2Config {
        dims: a.dims.clone(),
        trials: a.trials,
        epsilon: a.epsilon,
        delta: a.delta,
        copies: a.copies,
        seed: ctx.seed,
    };
    let result = run_fig2(&cfg)?;
    for s in &result.summary {
        ctx.note(&summary_line(s));
    }
    match ctx.format {
        Some(OutputFormat::Json) => ctx.emit(&to_json(&result)?),
        _ => ctx.emit(&rows_csv(&result.rows)),
    }
}

#[derive(Serialize)]
struct CheckTally {
    name: &'static str,
    failures: usize,
    /// Smallest `rhs - lhs` seen.
    worst_margin: f64,
}

fn cmd_bounds_check(ctx: &Ctx, a: &BoundsArgs) -> Result<()> {
    ensure!(a.dim >= 1, "dimension must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut inputs: Vec<HermitianMatrix> = (0..a.trials)
        .map(|_| {
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            HermitianMatrix::symmetrized(
                random_hermitian(a.dim, &mut rng).into_matrix() * Complex64::from(scale),
            )
        })
        .collect();
    if a.adversarial {
        inputs.push(HermitianMatrix::symmetrized(CMatrix::from_element(
            a.dim,
            a.dim,
            Complex64::ONE,
        )));
    }

    let mut tallies: Vec<CheckTally> = Vec::new();
    let mut schatten_failures = 0;
    let ps = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];
    for e in &inputs {
        let report = check_norm_chain(e);
        for (idx, c) in report.checks().iter().enumerate() {
            if tallies.len() <= idx {
                tallies.push(CheckTally {
                    name: c.name,
                    failures: 0,
                    worst_margin: f64::INFINITY,
                });
            }
            tallies[idx].failures += usize::from(!c.holds);
            tallies[idx].worst_margin = tallies[idx].worst_margin.min(c.margin);
        }
        let norms: Vec<f64> = ps
            .iter()
            .map(|&p| schatten_norm(e, p))
            .collect::<Result<_, _>>()?;
        let slack = 1e-12 * a.dim as f64 * norms[0].max(1.0);
        schatten_failures += usize::from(norms.windows(2).any(|w| w[1] > w[0] + slack));
    }
    let pass = schatten_failures == 0 && tallies.iter().all(|t| t.failures == 0);
    let out = json!({
        "d": a.dim,
        "matrices": inputs.len(),
        "checks": tallies,
        "schatten_monotonicity_failures": schatten_failures,
        "pass": pass,
    });
    match ctx.format {
        Some(OutputFormat::Csv) => {
            let mut text = String::from("check,failures,worst_margin\n");
            for t in &tallies {
                writeln!(text, "{},{},{:e}", t.name, t.failures, t.worst_margin)?;
            }
            writeln!(text, "schatten monotonicity,{schatten_failures},")?;
            ctx.emit(&text)?;
        }
        _ => ctx.emit(&to_json(&out)?)?,
    }
    ensure!(pass, "norm chain violated for d={}", a.dim);
    Ok(())
}

fn cmd_operator_estimate(ctx: &Ctx, a: &OperatorArgs) -> Result<()> {
    let record = load_record(&a.record, None)?;
    let d = record.dim();
    let family = load_family(a.mub.as_deref(), d)?;
    record.check_family(&family)?;

    let (coeffs, operator): (OperatorCoefficients, CMatrix) = match (&a.operator, a.extreme) {
        (Some(path), false) => {
            let m = read_matrix_file(path)?;
            (decompose_operator(&m, &family)?, m)
        }
        (None, true) => {
            let k = a.k_bound.unwrap_or(1.0 / (d + 1) as f64);
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let phases: Vec<f64> = (0..d * (d + 1))
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let c = extreme_operator(&phases, k, &family)?;
            let m = c.reconstruct(&family)?;
            (c, m)
        }
        _ => bail!("give exactly one of --operator or --extreme"),
    };
    let value = estimate_mean(&record, &coeffs)?;
    let n = record.len() as u64;
    let epsilon = if coeffs.bound() > 0.0 {
        achievable_epsilon_general(n, a.delta, coeffs.bound(), d, 1)?
    } else {
        // multiple of the identity: the estimate is exact
        0.0
    };
    let truth = match &a.truth {
        Some(s) => {
            let rho = s.parse::<StateSpec>()?.build(d, ctx.seed)?;
            Some((rho.as_matrix() * &operator).trace())
        }
        None => None,
    };
    ctx.emit(&to_json(&json!({
        "d": d,
        "n": n,
        "re": value.re,
        "im": value.im,
        "k_bound": coeffs.bound(),
        "offset": [coeffs.offset().re, coeffs.offset().im],
        "epsilon": epsilon,
        "delta": a.delta,
        "plain_epsilon": achievable_epsilon(n, a.delta, 1)?,
        "truth": truth.map(|t| [t.re, t.im]),
        "abs_error": truth.map(|t| (value - t).norm()),
    }))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn tagged_paths() {
        assert_eq!(
            tagged_path(Path::new("/tmp/run.txt"), "offdiag"),
            PathBuf::from("/tmp/run.offdiag.txt")
        );
        assert_eq!(
            tagged_path(Path::new("rec"), "computational"),
            PathBuf::from("rec.computational")
        );
    }

    #[test]
    fn element_parsing() {
        assert_eq!(parse_element("2, 5").unwrap(), (2, 5));
        assert!(parse_element("2").is_err());
        assert!(parse_element("a,1").is_err());
    }
}
