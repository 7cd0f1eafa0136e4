use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mpsqd_core::eigen::fci_ground_state;
use mpsqd_core::fcidump::{parse_fcidump, FermionHamiltonian, HamiltonianDocument};
use mpsqd_core::harness::{
    records_csv, records_json, run_rbd, summaries_csv, summaries_json, summarize_all, RbdFile, ReplicateRecord,
};
use mpsqd_core::multiprog::{
    buffered_pair_plan, bundled_plan, compose_experiments, peephole_simplify, split_results, validate_partition,
    AbstractCircuit, PartitionPlan, PlanError, DEFAULT_ANGLE_TOL,
};
use mpsqd_core::sampler::{sample_counts, sample_parallel, NoiseModel, SampleSet, Wavefunction, DEFAULT_SHOTS};
use mpsqd_core::sqd::{extsqd_from_trace, sqd_run, SqdConfig, SqdTrace};
use mpsqd_core::Error;

#[derive(Parser)]
#[command(name = "mpsqd", version, about = "Multi-programmed sample-based quantum diagonalization")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// FCIDUMP to canonical JSON.
    Parse {
        fcidump: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact ground-state energy.
    Fci {
        fcidump: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the exact ground state of one or more FCIDUMPs.
    Sample(SampleArgs),
    /// SQD on a sample set.
    Sqd {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        fcidump: PathBuf,
        #[command(flatten)]
        sqd: SqdArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-excitation expansion of a saved SQD trace.
    Extsqd {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        fcidump: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        ci_threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or validate a partition plan.
    Plan(PlanArgs),
    /// Merge per-layout circuits into one job.
    Compose {
        #[arg(long)]
        plan: PathBuf,
        /// `LABEL=circuit.json`, one per layout, in layout order.
        #[arg(long = "circuit", required = true)]
        circuits: Vec<String>,
        /// Drop identity rotations and merge adjacent ones.
        #[arg(long)]
        simplify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split composite counts into per-register sample sets.
    Split {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized-block experiment from a JSON or TOML file.
    Rbd {
        spec: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for records.{csv,json} and summary.{csv,json}.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Summaries from a records JSON file.
    Report {
        records: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.01)]
    p_readout: f64,
    #[arg(long, default_value_t = 0.01)]
    p_xtalk: f64,
    #[arg(long, default_value_t = 0.25)]
    xtalk_decay: f64,
    #[arg(long, default_value_t = 3)]
    xtalk_max_hops: usize,
}

impl From<&NoiseArgs> for NoiseModel {
    fn from(a: &NoiseArgs) -> Self {
        NoiseModel {
            p_readout: a.p_readout,
            p_xtalk: a.p_xtalk,
            xtalk_decay: a.xtalk_decay,
            xtalk_max_hops: a.xtalk_max_hops,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    /// One FCIDUMP samples serially; several sample in parallel on a plan.
    #[arg(required = true)]
    fcidumps: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    buffer: usize,
    /// Plan JSON; defaults to the bundled plan for `--buffer`.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SqdArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    batches: usize,
    #[arg(long, default_value_t = 3000)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    energy_tol: f64,
    #[arg(long, default_value_t = 1e-5)]
    occ_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    carryover: f64,
    #[arg(long, default_value_t = 1e-5)]
    ci_threshold: f64,
}

impl From<&SqdArgs> for SqdConfig {
    fn from(a: &SqdArgs) -> Self {
        SqdConfig {
            n_batches: a.batches,
            batch_size: a.batch_size,
            max_iterations: a.max_iters,
            energy_tol: a.energy_tol,
            occupancy_tol: a.occ_tol,
            carryover_threshold: a.carryover,
            extsqd_ci_threshold: a.ci_threshold,
            seed: a.seed,
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Validate this plan JSON instead of building one.
    #[arg(long)]
    validate: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    buffer: usize,
    /// Build on a generated heavy-hex map instead of using a bundled plan.
    #[arg(long)]
    generate: bool,
    #[arg(long, default_value_t = 3)]
    rows: usize,
    #[arg(long, default_value_t = 20)]
    cols: usize,
    #[arg(long, default_value_t = 4)]
    norb: usize,
    #[arg(long, default_value_t = 3)]
    ancillas: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Input(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path) -> Result<PartitionPlan, Error> {
    serde_json::from_str(&read(path)?).map_err(|e| PlanError::Format(format!("{}: {e}", path.display())).into())
}

fn load_hamiltonian(path: &Path) -> Result<FermionHamiltonian, Error> {
    Ok(parse_fcidump(&read(path)?)?)
}

fn pretty(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("json values always serialize")
}

fn write_reports(dir: &Path, records: &[ReplicateRecord], write_records: bool) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
    let summaries = summarize_all(records)?;
    let mut files = vec![("summary.csv", summaries_csv(&summaries)?), ("summary.json", summaries_json(&summaries))];
    if write_records {
        files.push(("records.csv", records_csv(records)?));
        files.push(("records.json", records_json(records)));
    }
    for (name, text) in files {
        write_out(Some(&dir.join(name)), &text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Parse { fcidump, out } => {
            let doc = HamiltonianDocument::from(&load_hamiltonian(&fcidump)?);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&doc).expect("documents serialize"))
        }
        Command::Fci { fcidump, out } => {
            let ham = load_hamiltonian(&fcidump)?;
            let fci = fci_ground_state(&ham)?;
            let value = json!({ "energy": fci.energy, "dimension": fci.coefficients.len() });
            write_out(out.as_deref(), &pretty(&value))
        }
        Command::Sample(args) => {
            let noise = NoiseModel::from(&args.noise);
            let mut wavefns = Vec::new();
            for path in &args.fcidumps {
                let ham = load_hamiltonian(path)?;
                let fci = fci_ground_state(&ham)?;
                let label = path.file_stem().map_or_else(|| "sample".into(), |s| s.to_string_lossy().into_owned());
                wavefns.push((label, Wavefunction::from_fci(ham.norb(), &fci)?));
            }
            let text = if let [(label, wf)] = wavefns.as_slice() {
                sample_counts(label, wf, args.shots, &noise.without_crosstalk(), args.seed)?.to_json()
            } else {
                let plan = match &args.plan {
                    Some(path) => load_plan(path)?,
                    None => bundled_plan(args.buffer)?,
                };
                let sets = sample_parallel(&wavefns, &plan, args.shots, &noise, args.seed)?;
                serde_json::to_string_pretty(&sets).expect("sample sets serialize")
            };
            write_out(args.out.as_deref(), &text)
        }
        Command::Sqd { samples, fcidump, sqd, out } => {
            let ham = load_hamiltonian(&fcidump)?;
            let samples = SampleSet::from_json(&read(&samples)?)?;
            let trace = sqd_run(&ham, &samples, &SqdConfig::from(&sqd))?;
            write_out(out.as_deref(), &trace.to_json())
        }
        Command::Extsqd { trace, fcidump, ci_threshold, out } => {
            let ham = load_hamiltonian(&fcidump)?;
            let trace: SqdTrace = parse_json(&trace)?;
            let cfg = SqdConfig { extsqd_ci_threshold: ci_threshold, ..SqdConfig::default() };
            let (energy, dimension) = extsqd_from_trace(&ham, &trace, &cfg)?;
            write_out(out.as_deref(), &pretty(&json!({ "energy": energy, "dimension": dimension })))
        }
        Command::Plan(args) => {
            if let Some(path) = &args.validate {
                let plan = load_plan(path)?;
                let violations = validate_partition(&plan);
                write_out(
                    args.out.as_deref(),
                    &serde_json::to_string_pretty(&violations).expect("violations serialize"),
                )?;
                return if violations.is_empty() { Ok(()) } else { Err(PlanError::Violations(violations).into()) };
            }
            let plan = if args.generate {
                buffered_pair_plan(["A", "B"], args.norb, args.ancillas, args.buffer, args.rows, args.cols)?
            } else {
                bundled_plan(args.buffer)?
            };
            write_out(args.out.as_deref(), &serde_json::to_string_pretty(&plan).expect("plans serialize"))
        }
        Command::Compose { plan, circuits, simplify, out } => {
            let plan = load_plan(&plan)?;
            let subcircuits = circuits
                .iter()
                .map(|arg| {
                    let (label, path) =
                        arg.split_once('=').ok_or_else(|| Error::Input(format!("expected LABEL=PATH, got '{arg}'")))?;
                    let circuit: AbstractCircuit = parse_json(Path::new(path))?;
                    Ok((label.to_string(), circuit))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let mut composite = compose_experiments(&subcircuits, &plan)?;
            if simplify {
                composite = peephole_simplify(&composite, DEFAULT_ANGLE_TOL);
            }
            write_out(out.as_deref(), &serde_json::to_string_pretty(&composite).expect("circuits serialize"))
        }
        Command::Split { circuit, samples, out } => {
            let circuit: AbstractCircuit = parse_json(&circuit)?;
            let samples = SampleSet::from_json(&read(&samples)?)?;
            let parts = split_results(&samples, &circuit)?;
            write_out(out.as_deref(), &serde_json::to_string_pretty(&parts).expect("sample sets serialize"))
        }
        Command::Rbd { spec, seed, out } => {
            let text = read(&spec)?;
            let mut file: RbdFile = if spec.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", spec.display())))?
            } else {
                serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", spec.display())))?
            };
            if let Some(seed) = seed {
                file.seed = seed;
            }
            let base = spec.parent().unwrap_or(Path::new("."));
            let records = run_rbd(&file.resolve(base)?)?;
            write_reports(&out, &records, true)
        }
        Command::Report { records, out } => {
            let records: Vec<ReplicateRecord> = parse_json(&records)?;
            write_reports(&out, &records, false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
