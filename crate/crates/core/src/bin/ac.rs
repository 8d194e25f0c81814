//! `ac`: commuting approximations, verification suites, gallery objects and
//! δ-sweeps from the command line.
//!
//! Exit codes: 0 ok, 1 I/O, 2 engine failure or failed check, 64 usage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nearcommute::error::Error;
use nearcommute::gallery::{
    consecutive_ratios, leakage_comparison, quarter_tridiag, tn_lift, voiculescu, voiculescu_commutator_norm,
    winding_number, LEAKAGE_N10, LEAKAGE_N50_TAIL, TN_BUDGET,
};
use nearcommute::matcore::{c, comm_norm, identity, op_norm, sigma_x, sigma_z, symmetrize, ComplexMatrix};
use nearcommute::matfile::{encode_cbin, read_matrix, sha256_hex, write_atomic, write_matrix, MatrixFile, Tag};
use nearcommute::pipeline::{
    cheap_commute, commute_hermitian_pair, commute_hermitian_unitary, delta_sweep, sweep_family, sweep_trend,
    three_hermitian, unitary_pair_gap, CommuteReport, EngineChoice, PipelineConfig,
};
use nearcommute::random::Rng;
use nearcommute::subspace::LinOracle;
use nearcommute::suites::{run_suite, Suite};

const EXIT_IO: u8 = 1;
const EXIT_ENGINE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "ac", version, about = "Exactly commuting matrices near almost commuting ones")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "AC_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Commuting approximation of the matrices in the given files.
    Commute(CommuteArgs),
    /// Runs a seeded property suite.
    Verify {
        /// bounds, lieb-robinson, projections, smoothing or tn.
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes a gallery object.
    Gallery {
        #[arg(value_enum)]
        object: GalleryObject,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write raw binary sidecars next to the JSON matrices.
        #[arg(long)]
        cbin: bool,
    },
    /// Distances of the pipeline output along a family with prescribed δ.
    Sweep {
        /// Commuting base pair; a seeded family is used when omitted.
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        deltas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct CommuteArgs {
    /// Two matrix files (three for the three-Hermitian mode).
    #[arg(required = true, num_args = 2..=3)]
    files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Pair)]
    mode: Mode,
    #[arg(long, default_value_t = 0.5)]
    gamma2: f64,
    #[arg(long, value_enum, default_value_t = Engine::Auto)]
    engine: Engine,
    #[arg(long, value_enum, default_value_t = Oracle::Heuristic)]
    oracle: Oracle,
    /// Commuting pair used by the given oracle.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    given: Vec<PathBuf>,
    /// Divide each input by max(1, ‖·‖) before running.
    #[arg(long)]
    rescale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    /// Two Hermitian contractions.
    Pair,
    /// Merge close eigenvalues of the first matrix.
    Cheap,
    /// Three Hermitian contractions.
    Three,
    /// A Hermitian contraction and a unitary.
    HermitianUnitary,
    /// Two unitaries, the second with a spectral gap.
    UnitaryGap,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Szarek,
    Hastings,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Heuristic,
    Brute,
    Given,
}

#[derive(Clone, Copy, ValueEnum)]
enum GalleryObject {
    Voiculescu,
    QuarterTridiag,
    Winding,
    /// T_N(σx), T_N(σz) with N = n.
    TnPair,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Io(_)) { EXIT_IO } else { EXIT_ENGINE };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("ac: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    let seed = cli.seed;
    match cli.command {
        Command::Commute(args) => cmd_commute(args, seed),
        Command::Verify { suite, trials, out } => cmd_verify(&suite, seed, trials, out.as_deref()),
        Command::Gallery { object, n, out, cbin } => cmd_gallery(object, n, &out, cbin),
        Command::Sweep { a, b, dim, deltas, out } => cmd_sweep(a.zip(b), dim, &deltas, out.as_deref(), seed),
    }
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load(path: &Path) -> CliResult<(ComplexMatrix, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (m, _) = read_matrix(path)?;
    Ok((m, sha256_hex(&bytes)))
}

fn rescale(m: ComplexMatrix) -> (ComplexMatrix, f64) {
    let s = op_norm(&m).max(1.0);
    (m / c(s, 0.0), s)
}

fn cmd_commute(args: CommuteArgs, seed: u64) -> CliResult<u8> {
    let wanted = if matches!(args.mode, Mode::Three) { 3 } else { 2 };
    if args.files.len() != wanted {
        return Err(usage(format!("this mode takes {wanted} matrix files")));
    }
    let mut mats = Vec::new();
    let mut inputs = Vec::new();
    let mut scales = Vec::new();
    for p in &args.files {
        let (m, hash) = load(p)?;
        inputs.push(json!({ "path": p.display().to_string(), "sha256": hash }));
        let unitary_slot = match args.mode {
            Mode::HermitianUnitary => mats.len() == 1,
            Mode::UnitaryGap => true,
            _ => false,
        };
        let (m, s) = if args.rescale && !unitary_slot { rescale(m) } else { (m, 1.0) };
        mats.push(m);
        scales.push(s);
    }
    let oracle = match args.oracle {
        Oracle::Heuristic => LinOracle::default(),
        Oracle::Brute => LinOracle::Brute {
            resolution: 64,
            budget: 1_000_000,
        },
        Oracle::Given => {
            if args.given.len() != 2 {
                return Err(usage("--oracle given needs --given A B"));
            }
            let (ga, _) = load(&args.given[0])?;
            let (gb, _) = load(&args.given[1])?;
            LinOracle::Given { a: ga, b: gb }
        }
    };
    let cfg = PipelineConfig {
        gamma2: args.gamma2,
        engine: match args.engine {
            Engine::Szarek => EngineChoice::Szarek,
            Engine::Hastings => EngineChoice::Hastings,
            Engine::Auto => EngineChoice::Auto,
        },
        oracle,
        ..PipelineConfig::default()
    };
    let rep: CommuteReport = match args.mode {
        Mode::Pair => commute_hermitian_pair(&mats[0], &mats[1], &cfg)?,
        Mode::Cheap => cheap_commute(&mats[0], &mats[1], &cfg)?,
        Mode::Three => three_hermitian(&mats[0], &mats[1], &mats[2], &cfg)?,
        Mode::HermitianUnitary => commute_hermitian_unitary(&mats[0], &mats[1], &cfg)?,
        Mode::UnitaryGap => unitary_pair_gap(&mats[0], &mats[1], &cfg)?,
    };
    let (tags_a, tags_b): (&[Tag], &[Tag]) = match args.mode {
        Mode::HermitianUnitary => (&[Tag::Hermitian], &[Tag::Unitary]),
        Mode::UnitaryGap => (&[Tag::Unitary], &[Tag::Unitary]),
        Mode::Cheap => (&[Tag::Hermitian], &[]),
        _ => (&[Tag::Hermitian], &[Tag::Hermitian]),
    };
    let mut outputs = json!({
        "a_prime": MatrixFile::from_matrix(&rep.a_prime, tags_a)?,
        "b_prime": MatrixFile::from_matrix(&rep.b_prime, tags_b)?,
    });
    if let Some(cp) = &rep.c_prime {
        outputs["c_prime"] = serde_json::to_value(MatrixFile::from_matrix(cp, &[Tag::Hermitian])?).expect("json");
    }
    let report = json!({
        "command": "commute",
        "mode": args.mode,
        "seed": seed,
        "inputs": inputs,
        "rescale": scales,
        "config": cfg.echo(),
        "bounds_pass": rep.bounds_pass(),
        "result": rep.summary(),
        "outputs": outputs,
    });
    emit(&report, args.out.as_deref())?;
    Ok(0)
}

fn cmd_verify(suite: &str, seed: u64, trials: Option<usize>, out: Option<&Path>) -> CliResult<u8> {
    let suite: Suite = suite.parse().map_err(|e: Error| usage(e.to_string()))?;
    let rep = run_suite(suite, seed, trials);
    emit(&serde_json::to_value(&rep).expect("json"), out)?;
    if out.is_some() {
        println!("{}: {} checks, {} violations", rep.suite, rep.checks, rep.violations);
    }
    Ok(if rep.passed() { 0 } else { EXIT_ENGINE })
}

fn write_with_sidecar(dir: &Path, stem: &str, m: &ComplexMatrix, tags: &[Tag], cbin: bool) -> CliResult<Vec<String>> {
    let json_path = dir.join(format!("{stem}.json"));
    write_matrix(&json_path, m, tags)?;
    let mut files = vec![json_path.display().to_string()];
    if cbin {
        let bin_path = dir.join(format!("{stem}.cbin"));
        write_atomic(&bin_path, &encode_cbin(m))?;
        files.push(bin_path.display().to_string());
    }
    Ok(files)
}

fn cmd_gallery(object: GalleryObject, n: usize, out: &Path, cbin: bool) -> CliResult<u8> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let summary = match object {
        GalleryObject::Voiculescu => {
            let (u, v) = voiculescu(n)?;
            let mut files = write_with_sidecar(out, &format!("voiculescu_u_{n}"), &u, &[Tag::Unitary], cbin)?;
            files.extend(write_with_sidecar(out, &format!("voiculescu_v_{n}"), &v, &[Tag::Unitary], cbin)?);
            json!({
                "object": "voiculescu",
                "n": n,
                "files": files,
                "commutator_norm": comm_norm(&u, &v),
                "expected": voiculescu_commutator_norm(n),
            })
        }
        GalleryObject::QuarterTridiag => {
            let (j, leak) = quarter_tridiag(n)?;
            let (printed, exponent, digits): (&[f64], i32, i32) = match n {
                10 => (&LEAKAGE_N10, 3, 4),
                50 => (&LEAKAGE_N50_TAIL, 15, 3),
                _ => (&[], 0, 0),
            };
            let rows = leakage_comparison(&leak, printed, exponent, digits);
            let csv_path = out.join(format!("quarter_tridiag_{n}.csv"));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["index", "leakage", "scaled", "printed", "pass"]).map_err(csv_err)?;
            for (i, &x) in leak.iter().enumerate() {
                let row = rows.iter().find(|r| r.index == i + 1);
                w.write_record([
                    (i + 1).to_string(),
                    format!("{x:e}"),
                    row.map_or(String::new(), |r| r.computed.to_string()),
                    row.map_or(String::new(), |r| r.printed.to_string()),
                    row.map_or(String::new(), |r| r.pass.to_string()),
                ])
                .map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            write_atomic(&csv_path, &bytes)?;
            let mut files = vec![csv_path.display().to_string()];
            files.extend(write_with_sidecar(out, &format!("quarter_tridiag_{n}"), &j, &[Tag::Hermitian], cbin)?);
            json!({
                "object": "quarter-tridiag",
                "n": n,
                "files": files,
                "compared": rows.len(),
                "all_pass": rows.iter().all(|r| r.pass),
                "tail_ratios": consecutive_ratios(&leak[leak.len().saturating_sub(4)..]),
            })
        }
        GalleryObject::Winding => {
            let (u, v) = voiculescu(n)?;
            let id = identity(n);
            let w = winding_number(&u, &v, &id, &id, 64)?;
            let path = out.join(format!("winding_{n}.json"));
            write_atomic(&path, serde_json::to_string_pretty(&w).expect("json").as_bytes())?;
            json!({ "object": "winding", "n": n, "files": [path.display().to_string()], "result": w })
        }
        GalleryObject::TnPair => {
            let a = tn_lift(&sigma_x(), n, TN_BUDGET)?;
            let b = tn_lift(&sigma_z(), n, TN_BUDGET)?;
            let mut files = write_with_sidecar(out, &format!("tn_x_{n}"), &a, &[Tag::Hermitian], cbin)?;
            files.extend(write_with_sidecar(out, &format!("tn_z_{n}"), &b, &[Tag::Hermitian], cbin)?);
            json!({ "object": "tn-pair", "factors": n, "dim": a.nrows(), "files": files, "commutator_norm": comm_norm(&a, &b) })
        }
    };
    emit(&summary, None)?;
    Ok(0)
}

fn csv_err(e: csv::Error) -> Failure {
    Error::Io(e.to_string()).into()
}

fn cmd_sweep(
    base: Option<(PathBuf, PathBuf)>,
    dim: usize,
    deltas: &[f64],
    out: Option<&Path>,
    seed: u64,
) -> CliResult<u8> {
    if deltas.is_empty() {
        return Err(usage("--deltas needs at least one value"));
    }
    let (a0, b0, e, inputs) = match base {
        Some((pa, pb)) => {
            let (a0, ha) = load(&pa)?;
            let (b0, hb) = load(&pb)?;
            let mut rng = Rng::seeded(seed);
            let e = rng.hermitian(a0.nrows());
            let e = symmetrize(&(&e / c(2.0 * op_norm(&e).max(1e-300), 0.0)));
            (a0, b0, e, json!([{ "path": pa.display().to_string(), "sha256": ha }, { "path": pb.display().to_string(), "sha256": hb }]))
        }
        None => {
            if dim == 0 {
                return Err(usage("--dim must be positive"));
            }
            let (a0, b0, e) = sweep_family(dim, seed);
            (a0, b0, e, json!([]))
        }
    };
    let rows = delta_sweep(&a0, &b0, &e, deltas, &PipelineConfig::default())?;
    let trend = sweep_trend(&rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["delta", "distA", "distB", "eps2_max", "n_cut", "comm_residual"]).map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.delta.to_string(),
            r.dist_a.to_string(),
            r.dist_b.to_string(),
            r.eps2_max.to_string(),
            r.n_cut.to_string(),
            r.comm_residual.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    match out {
        Some(p) => write_atomic(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    let summary = json!({ "command": "sweep", "seed": seed, "inputs": inputs, "rows": rows.len(), "monotone_trend": trend });
    if out.is_some() {
        emit(&summary, None)?;
    } else {
        eprintln!("{summary}");
    }
    Ok(0)
}
