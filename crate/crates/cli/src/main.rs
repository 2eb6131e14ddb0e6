use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qchan_core::cp::{kraus_decomposition, Verdict};
use qchan_core::geometry::{extremal_form, pancake_grid};
use qchan_core::json::{self, ExtremalSummary};
use qchan_core::{
    decompose, extremal_class, is_indivisible, kraus_rank, pure_outputs, recompose, sample_batch,
    sample_channel_seeded, to_canonical, verify, AffineChannel, AxisOrdering, ChannelKind, Error,
};
use serde_json::Value;

const SCHEMAS: &str = "\
JSON formats:
  channel   {\"M\": [[m11,m12,m13],[m21,m22,m23],[m31,m32,m33]], \"t\": [t1,t2,t3]}
            or {\"lambda\": [l1,l2,l3], \"t\": [t1,t2,t3]} for diagonal M; \"t\" defaults to 0
  report    verify: {\"lambda\", \"t\", \"q\", \"r\", \"q_prod\", \"bound\", \"t_squared\", \"a\", \"b\",
            \"detC\", \"choi_eigs\", \"margin\", \"verdict\": \"CP\"|\"NotCP\"|\"Boundary\", ...}
  canonical {\"M\", \"t\", \"lambda\", \"t_canonical\", \"R1\", \"R2\"} with M = R1 diag(lambda) R2
  kraus     [[[[re,im],[re,im]],[[re,im],[re,im]]], ...]
  plan      {\"kind\": \"edge\"|\"unital\"|\"extremal\", \"target\": channel, \"epsilon\": e,
             \"factors\": [{\"kind\": \"...\", ...}, ...], \"recomposition_error\": e}
            factors are listed outermost first; factor kinds: unitary{axis,half_angle},
            permutation{sigma}, sign_flip{axes}, phase_flip{t}, constant{state}, extremal{u,v},
            extremal_angles{theta,omega}, face_channel{s,z,half}

Exit codes: 0 ok, 1 malformed input, 2 not completely positive, 3 unsupported decomposition.";

#[derive(Parser)]
#[command(name = "qchan", version, about = "Qubit channels in affine Bloch form", after_long_help = SCHEMAS)]
struct Cli {
    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Channel JSON; read from --file or standard input when omitted.
    json: Option<String>,

    /// Read the input JSON from a file.
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct Tolerance {
    /// Verdict band for the complete-positivity margin.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Complete-positivity report; exit 2 if the map is not CP.
    Verify {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tol: Tolerance,
        /// Report Choi eigenvalues of the trace-one Choi matrix.
        #[arg(long)]
        normalize_choi: bool,
    },
    /// Kraus rank, divisibility, pure outputs and extremal class.
    Classify {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tol: Tolerance,
    },
    /// Signed singular value normal form.
    Canonical {
        #[command(flatten)]
        input: Input,
        /// Extremal layout (translation on the third axis, nonnegative signs).
        #[arg(long)]
        extremal: bool,
    },
    /// Kraus operators from the Choi eigenvectors.
    Kraus {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tol: Tolerance,
    },
    /// Factor a unital or extremal channel into small steps.
    Decompose {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tol: Tolerance,
        /// Largest step of the universal set, in (0, 1/2).
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
    },
    /// Compose the factors of a plan and compare with its target.
    Recompose {
        #[command(flatten)]
        input: Input,
    },
    /// Draw random CP channels.
    Sample {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// unital, general or extremal.
        #[arg(long, default_value = "general")]
        kind: ChannelKind,
        /// Emit an array of this many channels instead of a single one.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Inequality margins of flat ellipsoids touching the sphere in a circle.
    Pancake {
        /// Grid step for a and c.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Write CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn malformed(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotCompletelyPositive { .. } => 2,
            Error::Unsupported(_) => 3,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

enum Output {
    Json(Value),
    Text(String),
}

fn read_input(input: &Input) -> Result<Value, Failure> {
    let text = match (&input.json, &input.file) {
        (Some(_), Some(_)) => return Err(Failure::malformed("give the input either inline or with --file, not both")),
        (Some(s), None) => s.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Failure::malformed(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::malformed(format!("stdin: {e}")))?;
            s
        }
    };
    serde_json::from_str(&text).map_err(|e| Failure::malformed(format!("malformed JSON: {e}")))
}

fn read_channel(input: &Input) -> Result<AffineChannel, Failure> {
    Ok(json::channel_from_value(&read_input(input)?)?)
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(Failure::malformed(format!("--tol must be a nonnegative number, got {tol}")))
    }
}

fn require_cp(phi: &AffineChannel, tol: f64) -> Result<(), Failure> {
    let report = verify(phi, tol)?;
    if report.verdict == Verdict::NotCP {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: report.choi_eigs[0] }.into());
    }
    Ok(())
}

fn run(command: Command) -> Result<(Output, u8), Failure> {
    let ok = |v: Value| Ok((Output::Json(v), 0));
    match command {
        Command::Verify { input, tol, normalize_choi } => {
            check_tol(tol.tol)?;
            let phi = read_channel(&input)?;
            let mut report = verify(&phi, tol.tol)?;
            if normalize_choi {
                report.choi_eigs = report.choi_eigs.map(|e| 0.5 * e);
            }
            let code = if report.verdict == Verdict::NotCP { 2 } else { 0 };
            Ok((Output::Json(serde_json::to_value(report).expect("report serializes")), code))
        }
        Command::Classify { input, tol } => {
            check_tol(tol.tol)?;
            let phi = read_channel(&input)?;
            require_cp(&phi, tol.tol)?;
            let po = pure_outputs(&phi, tol.tol)?;
            let extremal = match extremal_form(&phi, qchan_core::tol::EXTREMAL) {
                Some((_, u, v)) => {
                    Some(ExtremalSummary { u, v, class: extremal_class(&phi, qchan_core::tol::EXTREMAL)? })
                }
                None => None,
            };
            ok(json::classification_to_value(
                kraus_rank(&phi, qchan_core::tol::RANK)?,
                is_indivisible(&phi)?,
                &po,
                extremal.as_ref(),
            ))
        }
        Command::Canonical { input, extremal } => {
            let phi = read_channel(&input)?;
            let ordering = if extremal { AxisOrdering::Extremal } else { AxisOrdering::MagnitudeDescending };
            ok(json::canonical_to_value(&phi, &to_canonical(&phi, ordering)))
        }
        Command::Kraus { input, tol } => {
            check_tol(tol.tol)?;
            let phi = read_channel(&input)?;
            ok(json::kraus_to_value(&kraus_decomposition(&phi, tol.tol, qchan_core::tol::RANK)?))
        }
        Command::Decompose { input, tol, eps } => {
            check_tol(tol.tol)?;
            if !(eps > 0.0 && eps < 0.5) {
                return Err(Failure::malformed(format!("--eps must lie in (0, 1/2), got {eps}")));
            }
            let phi = read_channel(&input)?;
            require_cp(&phi, tol.tol)?;
            ok(json::plan_to_value(&decompose(&phi, eps)?))
        }
        Command::Recompose { input } => {
            let plan = json::plan_from_value(&read_input(&input)?)?;
            let (phi, err) = recompose(&plan)?;
            ok(serde_json::json!({ "channel": json::channel_to_value(&phi), "recomposition_error": err }))
        }
        Command::Sample { seed, kind, count } => match count {
            None => ok(json::channel_to_value(&sample_channel_seeded(seed, kind))),
            Some(n) => {
                ok(Value::from(sample_batch(seed, kind, n).iter().map(json::channel_to_value).collect::<Vec<_>>()))
            }
        },
        Command::Pancake { step, csv } => {
            if !(step > 0.0 && step <= 1.0) {
                return Err(Failure::malformed(format!("--step must lie in (0, 1], got {step}")));
            }
            let rows = pancake_grid(step);
            if csv {
                let mut out = String::from("a,c,t3,margin_plus,margin_minus\n");
                for r in &rows {
                    out.push_str(&format!("{},{},{},{},{}\n", r.a, r.c, r.t3, r.margin_plus, r.margin_minus));
                }
                return Ok((Output::Text(out), 0));
            }
            ok(serde_json::to_value(&rows).expect("rows serialize"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok((out, code)) => {
            match out {
                Output::Json(v) => {
                    let text = if cli.pretty { serde_json::to_string_pretty(&v) } else { serde_json::to_string(&v) };
                    println!("{}", text.expect("JSON values serialize"));
                }
                Output::Text(t) => print!("{t}"),
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("qchan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
