//! `combforge`: validate, reduce, link and realize combs, certify memory
//! costs and bound distances between strategies.
//!
//! Exit status is 0 on success, 1 when a verification fails and 2 on I/O,
//! schema or usage errors. Reports are JSON on standard output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use combforge::comb::{max_defect, realize, validate_deterministic, CombValue};
use combforge::discrimination::{opnorm_lower_bound, Method};
use combforge::memory::{
    certify_multi, certify_step, channel_cost_bounds, channel_cost_search, delay_comb, isotropic_channel,
    upb_shifts_comb, werner_channel, CostCertificate, Decomposition, Evidence, NestedDecomposition,
};
use combforge::symmetry::{isotypic_decompose, symmetry_bound, GroupRep};
use combforge::tensor::trace_norm;

use combforge_cli::format::{self, CertificateFile, DecompositionFile, GroupFile, OperatorFile};
use combforge_cli::CliError;

#[derive(Parser)]
#[command(name = "combforge", version, about = "Quantum comb calculus and memory-cost certification")]
struct Cli {
    /// Numerical tolerance for every check.
    #[arg(long, global = true, env = "COMBFORGE_TOL", default_value_t = 1e-8)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check positivity and the recursive normalization of a comb.
    Validate { comb: PathBuf },
    /// Write the reduced comb after step K.
    Reduce {
        comb: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Link two operators over their shared wire labels.
    Link {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write channels whose link is the comb, one file per step.
    Realize {
        comb: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Verify a decomposition certifying memory dimension D after step K.
    Certify {
        comb: PathBuf,
        decomposition: PathBuf,
        #[arg(long)]
        step: usize,
        #[arg(long)]
        dim: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify a nested decomposition at several steps at once.
    CertifyMulti {
        comb: PathBuf,
        nested: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        steps: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        dims: Vec<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bound the memory needed to split a channel into encoder and decoder.
    CostChannel {
        choi: PathBuf,
        #[arg(long, default_value_t = 0)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Memory bound after step K from a symmetry group of the comb.
    SymmetryBound {
        comb: PathBuf,
        group: PathBuf,
        #[arg(long)]
        step: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a benchmark comb or channel.
    Example {
        #[command(subcommand)]
        which: Example,
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Lower-bound the operational distance between two combs.
    Discriminate {
        r0: PathBuf,
        r1: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Seesaw)]
        method: MethodArg,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum Example {
    /// `U ⊗ U*`-covariant channel with parameter alpha in [0, d].
    Isotropic {
        #[arg(long)]
        d: usize,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
    },
    /// `U ⊗ U`-covariant channel with parameter gamma in [0, 2/(d+1)].
    Werner {
        #[arg(long)]
        d: usize,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
    },
    /// Three-qubit bound entangled state from the Shifts product basis.
    Upb,
    /// Identity channel from the first input to the last output.
    Delay {
        #[arg(long)]
        d: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Seesaw,
    Sampled,
}

fn read_comb(path: &Path) -> Result<CombValue, CliError> {
    format::read::<OperatorFile>(path)?.to_comb()
}

/// Write to stdout, ignoring a closed pipe.
fn out(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn emit(report: &Value) {
    out(&(serde_json::to_string_pretty(report).expect("serializable") + "\n"));
}

fn write_or_print<T: serde::Serialize>(output: Option<&Path>, value: &T) -> Result<(), CliError> {
    match output {
        Some(p) => format::write(p, value),
        None => {
            out(&format::to_json(value));
            Ok(())
        }
    }
}

fn bounds_json(cert: &CostCertificate) -> Value {
    Value::Array(
        cert.bounds
            .iter()
            .map(|b| {
                json!({
                    "step": b.step,
                    "lower": b.lower,
                    "upper": b.upper,
                    "exact": b.lower == b.upper,
                    "log2_lower": (b.lower as f64).log2(),
                    "log2_upper": (b.upper as f64).log2(),
                })
            })
            .collect(),
    )
}

fn certificate_report(cert: &CostCertificate, r: &CombValue, tol: f64, output: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = output {
        format::write(p, &CertificateFile::from_certificate(cert, Some(r.signature())))?;
    }
    emit(&json!({
        "status": "pass",
        "tol": tol,
        "bounds": bounds_json(cert),
        "notes": cert.notes,
        "certificate": output.map(|p| p.display().to_string()),
    }));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let tol = cli.tol;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(CliError::Schema(format!("tolerance must be a nonnegative number, got {tol}")));
    }
    match cli.command {
        Command::Validate { comb } => {
            let r = read_comb(&comb)?;
            let rep = validate_deterministic(&r, tol)?;
            let passed = rep.passed();
            let report = json!({
                "status": if passed { "pass" } else { "fail" },
                "tol": tol,
                "steps": r.steps(),
                "min_eigenvalue": rep.min_eigenvalue,
                "psd_defect": rep.psd_defect,
                "step_defects": rep.step_defects,
                "failing_steps": rep.failing_steps(),
                "classical_defect": rep.classical_defect,
            });
            if !passed {
                return Err(CliError::Rejected(report));
            }
            emit(&report);
        }
        Command::Reduce { comb, k, output } => {
            let r = read_comb(&comb)?;
            if k > r.steps() {
                return Err(CliError::Schema(format!("k = {k} exceeds the {} steps of the comb", r.steps())));
            }
            write_or_print(output.as_deref(), &OperatorFile::from_comb(&r.reduce(k)?))?;
        }
        Command::Link { a, b, output } => {
            let fa = format::read::<OperatorFile>(&a)?;
            let fb = format::read::<OperatorFile>(&b)?;
            let mut steps = fa.steps();
            for (l, s) in fb.steps() {
                steps.entry(l).or_insert(s);
            }
            let linked = fa.to_choi()?.link(&fb.to_choi()?)?;
            write_or_print(output.as_deref(), &OperatorFile::from_choi_with_steps(&linked, &steps))?;
        }
        Command::Realize { comb, out_dir } => {
            let r = read_comb(&comb)?;
            let real = realize(&r, tol)?;
            fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
            let mut paths = Vec::new();
            for (k, c) in real.channels.iter().enumerate() {
                let p = out_dir.join(format!("channel_{}.json", k + 1));
                format::write(&p, &OperatorFile::from_choi(c))?;
                paths.push(p.display().to_string());
            }
            let back = real.reproduce(r.signature())?;
            let defect = trace_norm(r.op().sub(back.op())?.matrix());
            let ranks = (1..r.steps()).map(|k| r.reduce(k)?.op().rank()).collect::<combforge::Result<Vec<_>>>()?;
            emit(&json!({
                "status": "pass",
                "tol": tol,
                "channels": paths,
                "ancillas": real.ancillas.iter().map(|a| json!({"quantum": a.quantum, "classical": a.classical})).collect::<Vec<_>>(),
                "reduced_ranks": ranks,
                "trace_norm_defect": defect,
                "max_entry_defect": max_defect(&r, &back)?,
            }));
        }
        Command::Certify { comb, decomposition, step, dim, output } => {
            let r = read_comb(&comb)?;
            let parts = format::read::<DecompositionFile>(&decomposition)?.to_parts()?;
            let q = Decomposition::new(r.clone(), step, parts.into_iter().map(|(_, p)| p).collect())?;
            let cert = certify_step(&r, step, &q, dim, tol)?;
            certificate_report(&cert, &r, tol, output.as_deref())?;
        }
        Command::CertifyMulti { comb, nested, steps, dims, output } => {
            let r = read_comb(&comb)?;
            let parts = format::read::<DecompositionFile>(&nested)?.to_parts()?;
            let q = NestedDecomposition::new(r.clone(), steps, parts)?;
            let cert = certify_multi(&r, &q, &dims, tol)?;
            certificate_report(&cert, &r, tol, output.as_deref())?;
        }
        Command::CostChannel { choi, restarts, seed, output } => {
            let c = format::read::<OperatorFile>(&choi)?.to_choi()?;
            let cert = if restarts > 0 { channel_cost_search(&c, restarts, seed, tol)? } else { channel_cost_bounds(&c, tol)? };
            if let Some(p) = output.as_deref() {
                format::write(p, &CertificateFile::from_certificate(&cert, None))?;
            }
            let b = cert.bounds[0];
            let pt = cert.evidence.iter().find_map(|e| match e {
                Evidence::PptWitness { min_pt_eigenvalue, exact } => Some(json!({"min_pt_eigenvalue": min_pt_eigenvalue, "exact": exact})),
                _ => None,
            });
            emit(&json!({
                "status": "pass",
                "tol": tol,
                "lower": b.lower,
                "upper": b.upper,
                "exact": b.lower == b.upper,
                "dim": if b.lower == b.upper { Some(b.upper) } else { None },
                "log2_lower": (b.lower as f64).log2(),
                "log2_upper": (b.upper as f64).log2(),
                "ppt": pt,
                "restarts": restarts,
                "seed": seed,
                "notes": cert.notes,
            }));
        }
        Command::SymmetryBound { comb, group, step, seed, output } => {
            let r = read_comb(&comb)?;
            let (wires, gens) = format::read::<GroupFile>(&group)?.to_parts()?;
            let rep = GroupRep::generate(wires, gens, tol.max(1e-12))?;
            let blocks = isotypic_decompose(&rep, tol, seed)?;
            let cert = symmetry_bound(&r, &rep, step, tol, seed)?;
            if let Some(p) = output.as_deref() {
                format::write(p, &CertificateFile::from_certificate(&cert, Some(r.signature())))?;
            }
            emit(&json!({
                "status": "pass",
                "tol": tol,
                "group_order": rep.order(),
                "multiplicities": blocks.multiplicities(),
                "irrep_dims": blocks.components.iter().map(|c| c.irrep_dim).collect::<Vec<_>>(),
                "bounds": bounds_json(&cert),
                "seed": seed,
            }));
        }
        Command::Example { which, output } => {
            let file = match which {
                Example::Isotropic { d, alpha } => OperatorFile::from_choi(&isotropic_channel(d, alpha)?),
                Example::Werner { d, gamma } => OperatorFile::from_choi(&werner_channel(d, gamma)?),
                Example::Upb => OperatorFile::from_comb(&upb_shifts_comb()?),
                Example::Delay { d } => OperatorFile::from_comb(&delay_comb(d)?),
            };
            write_or_print(output.as_deref(), &file)?;
        }
        Command::Discriminate { r0, r1, method, iters, seed } => {
            let (a, b) = (read_comb(&r0)?, read_comb(&r1)?);
            let m = match method {
                MethodArg::Seesaw => Method::Seesaw,
                MethodArg::Sampled => Method::Sampled,
            };
            let bound = opnorm_lower_bound(&a, &b, m, iters, seed)?;
            emit(&json!({
                "status": "pass",
                "lower_bound": bound.value,
                "error_prob": bound.error_prob,
                "method": match method { MethodArg::Seesaw => "seesaw", MethodArg::Sampled => "sampled" },
                "iters": iters,
                "seed": seed,
                "history": bound.history,
                "kind": "lower bound on the operational distance",
            }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tol = cli.tol;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Failed(reason) => emit(&json!({"status": "fail", "reason": reason, "tol": tol})),
                CliError::Rejected(report) => emit(report),
                _ => {}
            }
            eprintln!("error ({}): {}", e.kind(), e.message());
            ExitCode::from(e.code())
        }
    }
}
