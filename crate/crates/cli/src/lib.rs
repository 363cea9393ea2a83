//! The `blindsim` command line: argument parsing, command drivers and the
//! report envelope. `main.rs` only wires stdout, stderr and the exit code.

use std::fmt::Write as _;
use std::path::PathBuf;

use blindsim::analysis::{self, AngleGrid, Construction};
use blindsim::linalg;
use blindsim::mbqc::BrickworkPattern;
use blindsim::prep::{random_unitary, PrepStateFamily};
use blindsim::reduction::MAX_EXACT_N;
use blindsim::states::{DensityMatrix, KrausChannel};
use blindsim::ubqc::{run_ubqc, BobBehavior, HonestPrep, RoundStrategy};
use blindsim::{Angle, ComplexMatrix};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Residual allowed between an honest blind run and the ideal output.
pub const UBQC_RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(
    name = "blindsim",
    version,
    about = "Blind quantum computation with weakened preparation resources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    JsonLines,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::JsonLines)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One blind run on a random brickwork pattern.
    Ubqc {
        #[arg(long, default_value_t = 2)]
        rows: usize,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        /// honest, depolarized, offset or flip
        #[arg(long, default_value = "honest")]
        deviation: String,
        #[command(flatten)]
        common: Common,
    },
    /// Two-state bound suite at each listed even N.
    Bounds {
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Blindness sweep for a preparation family.
    Blindness {
        /// honest8, cubed, nonweak or custom (with --file)
        #[arg(long, default_value = "honest8")]
        family: String,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        sites: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Real protocol against ideal resource plus simulator.
    Compare {
        /// four_state, two_state or two_server
        #[arg(long)]
        construction: String,
        #[arg(long, default_value = "honest")]
        deviation: String,
        #[arg(long = "N")]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Ubqc { common, .. }
            | Command::Bounds { common, .. }
            | Command::Blindness { common, .. }
            | Command::Compare { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Ubqc { .. } => "ubqc",
            Command::Bounds { .. } => "bounds",
            Command::Blindness { .. } => "blindness",
            Command::Compare { .. } => "compare",
        }
    }

    fn config(&self) -> Value {
        let c = self.common();
        let mut v = match self {
            Command::Ubqc {
                rows, cols, deviation, ..
            } => json!({"rows": rows, "cols": cols, "deviation": deviation}),
            Command::Bounds { n, .. } => json!({"N": n}),
            Command::Blindness {
                family, file, sites, ..
            } => {
                json!({"family": family, "file": file.as_ref().map(|f| f.display().to_string()), "sites": sites})
            }
            Command::Compare {
                construction,
                deviation,
                n,
                ..
            } => {
                json!({"construction": construction, "deviation": deviation, "N": n})
            }
        };
        v["format"] = json!(c.format);
        v
    }
}

/// What a command produced: the report text and the exit status.
#[derive(Debug)]
pub struct Outcome {
    pub report: String,
    pub status: i32,
}

/// A configuration problem, reported on stderr with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<blindsim::Error> for ConfigError {
    fn from(e: blindsim::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// One table: column names and rows of already formatted cells.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Report {
    records: Vec<Value>,
    table: Table,
    ok: bool,
}

fn header(cmd: &Command) -> Value {
    json!({
        "record": "header",
        "command": cmd.name(),
        "seed": cmd.common().seed,
        "versions": {"blindsim": blindsim::VERSION, "blindsim-cli": env!("CARGO_PKG_VERSION")},
        "config": cmd.config(),
    })
}

fn render(cmd: &Command, report: &Report) -> String {
    let head = header(cmd);
    let mut out = String::new();
    match cmd.common().format {
        Format::JsonLines => {
            out.push_str(&head.to_string());
            out.push('\n');
            for r in &report.records {
                out.push_str(&r.to_string());
                out.push('\n');
            }
        }
        Format::Csv => {
            let _ = writeln!(out, "# {head}");
            out.push_str(&report.table.columns.join(","));
            out.push('\n');
            for row in &report.table.rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
    }
    out
}

fn tagged<T: Serialize>(kind: &str, value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("serializable record");
    if let Value::Object(map) = &mut v {
        map.insert("record".into(), json!(kind));
    }
    v
}

/// Parse and run; `Err` means a configuration problem.
pub fn execute(cmd: &Command) -> Result<Outcome, ConfigError> {
    let report = match cmd {
        Command::Ubqc {
            rows,
            cols,
            deviation,
            common,
        } => ubqc(*rows, *cols, deviation, common.seed)?,
        Command::Bounds { n, .. } => bounds(n)?,
        Command::Blindness {
            family,
            file,
            sites,
            common,
        } => blindness(family, file.as_ref(), *sites, common.seed)?,
        Command::Compare {
            construction,
            deviation,
            n,
            ..
        } => compare(construction, deviation, *n)?,
    };
    Ok(Outcome {
        report: render(cmd, &report),
        status: if report.ok { EXIT_OK } else { EXIT_CHECK_FAILED },
    })
}

fn behavior(name: &str) -> Result<BobBehavior, ConfigError> {
    Ok(match name {
        "honest" => BobBehavior::honest(),
        "depolarized" => BobBehavior::honest().with_receive_channel(KrausChannel::depolarizing(0.1)?)?,
        "offset" => BobBehavior::honest().with_strategy(RoundStrategy::Offset(Angle::QUARTER_PI)),
        "flip" => BobBehavior::honest().with_strategy(RoundStrategy::FlipReport),
        other => {
            return Err(ConfigError(format!(
                "unknown ubqc deviation {other:?} (expected honest, depolarized, offset or flip)"
            )))
        }
    })
}

#[derive(Serialize)]
struct UbqcRecord {
    rows: usize,
    cols: usize,
    qubits: usize,
    deviation: String,
    pattern: String,
    transcript: String,
    reported: Vec<u8>,
    residual: f64,
    /// Only honest runs are held to the residual tolerance.
    checked: bool,
    pass: bool,
}

fn ubqc(rows: usize, cols: usize, deviation: &str, seed: u64) -> Result<Report, ConfigError> {
    let bob = behavior(deviation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pattern = BrickworkPattern::random(rows, cols, &mut rng)?;
    pattern.check_capacity()?;
    let u = random_unitary(1 << rows, &mut rng);
    let input = DensityMatrix::new(ComplexMatrix::projector(&u.column(0)))?;
    let run = run_ubqc(&pattern, &input, &mut HonestPrep, &bob, &mut rng)?;
    let ideal = pattern.ideal_unitary().conjugate(input.matrix())?;
    let residual = linalg::trace_distance(run.output.matrix(), &ideal)?;
    let checked = bob.is_honest();
    let pass = !checked || residual <= UBQC_RESIDUAL_TOLERANCE;
    let rec = UbqcRecord {
        rows,
        cols,
        qubits: pattern.num_qubits(),
        deviation: deviation.to_string(),
        pattern: pattern.to_text(),
        transcript: run.transcript.to_text(),
        reported: run.reported.clone(),
        residual,
        checked,
        pass,
    };
    let table = Table {
        columns: vec![
            "rows",
            "cols",
            "qubits",
            "deviation",
            "reported",
            "residual",
            "checked",
            "pass",
        ],
        rows: vec![vec![
            rows.to_string(),
            cols.to_string(),
            rec.qubits.to_string(),
            deviation.to_string(),
            rec.reported.iter().map(u8::to_string).collect(),
            analysis::sig17(residual),
            checked.to_string(),
            pass.to_string(),
        ]],
    };
    Ok(Report {
        records: vec![tagged("ubqc", &rec)],
        table,
        ok: pass,
    })
}

fn bounds(ns: &[usize]) -> Result<Report, ConfigError> {
    for &n in ns {
        if n == 0 || n % 2 == 1 {
            return Err(ConfigError(format!("N must be even and positive, got {n}")));
        }
        if n > MAX_EXACT_N {
            return Err(ConfigError(format!("N = {n} is above {MAX_EXACT_N}")));
        }
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let records = analysis::bound_sweep(&ns)?;
    let csv = analysis::bound_csv(&records);
    let mut lines = csv.lines();
    let columns = analysis::BOUND_CSV_HEADER.split(',').collect();
    lines.next();
    Ok(Report {
        ok: records.iter().all(|r| r.all_pass()),
        records: records.iter().map(|r| tagged("bounds", r)).collect(),
        table: Table {
            columns,
            rows: lines.map(|l| l.split(',').map(String::from).collect()).collect(),
        },
    })
}

/// A family preset or a JSON file; every failure here is a configuration error.
pub fn load_family(name: &str, file: Option<&PathBuf>) -> Result<PrepStateFamily, ConfigError> {
    match name {
        "honest8" | "honest" => Ok(PrepStateFamily::honest()),
        "cubed" => Ok(PrepStateFamily::cubed()),
        "nonweak" => Ok(PrepStateFamily::nonweak()),
        "custom" => {
            let path = file.ok_or_else(|| ConfigError("--family custom needs --file".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            PrepStateFamily::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
        }
        other => Err(ConfigError(format!(
            "unknown family {other:?} (expected honest8, cubed, nonweak or custom)"
        ))),
    }
}

#[derive(Serialize)]
struct BlindnessRecord<'a> {
    family: &'a str,
    #[serde(flatten)]
    sweep: &'a analysis::BlindnessReport,
    /// Blind for weak families, leaking for the others.
    expected: bool,
}

fn blindness(name: &str, file: Option<&PathBuf>, sites: usize, seed: u64) -> Result<Report, ConfigError> {
    let family = load_family(name, file)?;
    let sweep = analysis::blindness_sweep(sites, &family, AngleGrid::default_for(sites, seed))?;
    let expected = sweep.matches_classification();
    let angles = |a: &[Angle]| a.iter().map(Angle::to_pi_string).collect::<Vec<_>>().join(" ");
    let table = Table {
        columns: vec![
            "family",
            "sites",
            "weak",
            "weak_deviation",
            "pairs",
            "max_distance",
            "worst_a",
            "worst_b",
            "expected",
        ],
        rows: vec![vec![
            name.to_string(),
            sites.to_string(),
            sweep.weak.to_string(),
            analysis::sig17(sweep.weak_deviation),
            sweep.pairs.to_string(),
            analysis::sig17(sweep.max_distance),
            angles(&sweep.worst[0]),
            angles(&sweep.worst[1]),
            expected.to_string(),
        ]],
    };
    let rec = BlindnessRecord {
        family: name,
        sweep: &sweep,
        expected,
    };
    Ok(Report {
        records: vec![tagged("blindness", &rec)],
        table,
        ok: expected,
    })
}

fn compare(construction: &str, deviation: &str, n: Option<usize>) -> Result<Report, ConfigError> {
    let c: Construction = construction.parse()?;
    let r = analysis::real_vs_simulated(c, deviation, n)?;
    let table = Table {
        columns: vec!["construction", "deviation", "N", "distance", "allowed", "pass"],
        rows: vec![vec![
            construction.to_string(),
            deviation.to_string(),
            n.map(|n| n.to_string()).unwrap_or_default(),
            analysis::sig17(r.distance),
            analysis::sig17(r.allowed),
            r.pass.to_string(),
        ]],
    };
    Ok(Report {
        ok: r.pass,
        records: vec![tagged("compare", &r)],
        table,
    })
}

/// Run from raw arguments, writing the report to `--out` or returning it.
/// Returns the exit status, the stdout text and the stderr text.
pub fn run_args<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                (status, String::new(), text)
            } else {
                (status, text, String::new())
            };
        }
    };
    match execute(&cli.command) {
        Err(e) => (EXIT_CONFIG, String::new(), format!("error: {e}\n")),
        Ok(outcome) => match &cli.command.common().out {
            Some(path) => match std::fs::write(path, &outcome.report) {
                Ok(()) => (outcome.status, String::new(), String::new()),
                Err(e) => (EXIT_CONFIG, String::new(), format!("error: {}: {e}\n", path.display())),
            },
            None => (outcome.status, outcome.report, String::new()),
        },
    }
}
