//! The `mni` command line.
//!
//! Every command writes one JSON document (or JSON lines for
//! `verify suite`) to stdout or to `--out`. Floating-point numbers are
//! printed with 17 significant digits. Exit codes: 0 on success, 2 when a
//! solver did not converge or a suite check failed, 1 on any input or
//! usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mni_core::instance::{load_problem, Mode, ProblemInstance};
use mni_core::lp::{basis_pursuit, dual_inf_norm_lp, reconstruct_from_dual};
use mni_core::mni::solve_mni;
use mni_core::prox::{
    prox_eps_insensitive, prox_hinge, prox_indicator_conj, prox_loss_conjugate, shrink, LossKind, LossSpec,
};
use mni_core::reg::solve_reg;
use mni_core::verify::{generate_instances, run_suite, summarize, SuiteOptions};
use mni_core::{Error, IterationConfig, SolveReport};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mni",
    version,
    about = "Minimum-norm interpolation and regularization solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Convergence tolerance (overrides the instance file).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration cap (overrides the instance file).
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimum-norm interpolation.
    Mni {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Regularized learning.
    Reg {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Simplex-based l1 reference solvers.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Randomized identity checks.
    Verify {
        #[command(subcommand)]
        action: VerifyAction,
    },
    /// Evaluate a proximity operator at a point.
    Prox {
        #[command(subcommand)]
        action: ProxAction,
    },
}

#[derive(Debug, Subcommand)]
enum SolveAction {
    /// Solve the instance in FILE.
    Solve { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum OracleAction {
    /// Basis pursuit `min ||x||_1 s.t. L(x) = y`.
    Bp { file: PathBuf },
    /// The dual problem `min ||L*(c)||_inf s.t. <c, y> = 1`.
    Dual { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum VerifyAction {
    /// Run every check on seeded random instances.
    Suite {
        /// Number of instances.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

#[derive(Debug, Subcommand)]
enum ProxAction {
    /// Scalar proximity operator of `sigma * f`.
    Eval(ProxArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProxFunction {
    /// `|b|`
    L1,
    /// `(b - y)^2`
    Square,
    /// `max(1 - y b, 0)`
    Hinge,
    /// `max(|b - y| - eps, 0)`
    Eps,
    /// conjugate of the indicator of `{y}`
    IndicatorConj,
    /// conjugate of the square loss
    SquareConj,
    /// conjugate of the hinge loss
    HingeConj,
    /// conjugate of the epsilon-insensitive loss
    EpsConj,
}

#[derive(Debug, Args)]
struct ProxArgs {
    #[arg(long, value_enum)]
    loss: ProxFunction,
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    y: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    eps: Option<f64>,
}

/// A failed command: exit code and message.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } => EXIT_NONCONVERGED,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

/// What a command produced: the text to emit and its exit code.
struct Output {
    text: String,
    code: i32,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code. Reports go to `out` unless `--out` is given;
/// diagnostics go to `err`.
pub fn run_command<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli) {
        Ok(output) => match emit(&output.text, cli.global.out.as_deref(), out) {
            Ok(()) => output.code,
            Err(f) => report_failure(f, err),
        },
        Err(f) => report_failure(f, err),
    }
}

fn report_failure(f: Failure, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {}", f.message);
    f.code
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| input_error(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| input_error(e.to_string())),
    }
}

fn execute(cli: &Cli) -> Result<Output, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Mni {
            action: SolveAction::Solve { file },
        } => {
            let inst = load(file)?;
            let cfg = config(&inst, g)?;
            let report = solve_mni(&inst.op, &inst.y, inst.space, &cfg)?;
            Ok(solve_output(&report))
        }
        Command::Reg {
            action: SolveAction::Solve { file },
        } => {
            let inst = load(file)?;
            if inst.mode == Mode::Interpolation {
                return Err(input_error("reg solve needs an instance with loss and lambda"));
            }
            let cfg = config(&inst, g)?;
            let report = solve_reg(&inst.reg_problem()?, &cfg)?;
            Ok(solve_output(&report))
        }
        Command::Oracle {
            action: OracleAction::Bp { file },
        } => {
            let inst = load(file)?;
            Ok(solve_output(&basis_pursuit(&inst.op, &inst.y)?))
        }
        Command::Oracle {
            action: OracleAction::Dual { file },
        } => {
            let inst = load(file)?;
            let dual = dual_inf_norm_lp(&inst.op, &inst.y)?;
            let solution = reconstruct_from_dual(&inst.op, &inst.y, &dual.c_hat)?;
            let value = json!({
                "c_hat": dual.c_hat,
                "dual_value": dual.value,
                "infimum": dual.infimum(),
                "solution": solution,
            });
            Ok(Output {
                text: to_json(&value)? + "\n",
                code: EXIT_OK,
            })
        }
        Command::Verify {
            action: VerifyAction::Suite { count },
        } => {
            let mut opts = SuiteOptions {
                seed: g.seed.unwrap_or(0),
                ..SuiteOptions::default()
            };
            opts.cfg = overrides(opts.cfg, g)?;
            let entries = run_suite(&generate_instances(opts.seed, *count), &opts);
            let mut text = String::new();
            for e in &entries {
                text += &to_json(&serde_json::to_value(e).map_err(|e| input_error(e.to_string()))?)?;
                text.push('\n');
            }
            let (passed, failed) = summarize(&entries);
            text += &to_json(&json!({"summary": {"passed": passed, "failed": failed}}))?;
            text.push('\n');
            Ok(Output {
                text,
                code: if failed == 0 { EXIT_OK } else { EXIT_NONCONVERGED },
            })
        }
        Command::Prox {
            action: ProxAction::Eval(args),
        } => {
            let v = prox_eval(args)?;
            Ok(Output {
                text: format_float(v) + "\n",
                code: EXIT_OK,
            })
        }
    }
}

fn load(file: &Path) -> Result<ProblemInstance, Failure> {
    Ok(load_problem(file)?)
}

fn overrides(mut cfg: IterationConfig, g: &GlobalArgs) -> Result<IterationConfig, Failure> {
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    if let Some(n) = g.max_iter {
        cfg.max_iter = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config(inst: &ProblemInstance, g: &GlobalArgs) -> Result<IterationConfig, Failure> {
    overrides(inst.iteration_config(), g)
}

fn solve_output(report: &SolveReport) -> Output {
    let value = serde_json::to_value(report).expect("reports serialize");
    Output {
        text: to_json(&value).expect("reports serialize") + "\n",
        code: if report.converged { EXIT_OK } else { EXIT_NONCONVERGED },
    }
}

fn prox_eval(args: &ProxArgs) -> Result<f64, Failure> {
    let (a, y, sigma) = (args.a, args.y, args.sigma);
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(input_error(format!("--sigma must be positive, got {sigma}")));
    }
    let eps = || args.eps.ok_or_else(|| input_error("--eps is required for this loss"));
    let loss = |kind| -> Result<LossSpec, Failure> { Ok(LossSpec::new(kind, vec![y])?) };
    let conj = |kind| -> Result<f64, Failure> { Ok(prox_loss_conjugate(&[a], &loss(kind)?, sigma)?[0]) };
    Ok(match args.loss {
        ProxFunction::L1 => shrink(a, sigma),
        ProxFunction::Square => (a + 2.0 * sigma * y) / (1.0 + 2.0 * sigma),
        ProxFunction::Hinge => {
            loss(LossKind::Hinge)?;
            prox_hinge(a, y, sigma)
        }
        ProxFunction::Eps => {
            let e = eps()?;
            loss(LossKind::EpsInsensitive { eps: e })?;
            prox_eps_insensitive(a, y, e, sigma)
        }
        ProxFunction::IndicatorConj => prox_indicator_conj(&[a], &[y], sigma)?[0],
        ProxFunction::SquareConj => conj(LossKind::Square)?,
        ProxFunction::HingeConj => conj(LossKind::Hinge)?,
        ProxFunction::EpsConj => conj(LossKind::EpsInsensitive { eps: eps()? })?,
    })
}

/// `x` with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x + 0.0)
    } else {
        "null".into()
    }
}

fn to_json(value: &Value) -> Result<String, Failure> {
    let mut s = String::new();
    write_value(value, &mut s);
    Ok(s)
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (_, Some(i), _) => out.push_str(&i.to_string()),
            (_, _, Some(f)) => out.push_str(&format_float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("mni").chain(args.iter().copied());
        let code = run_command(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::NAN), "null");
        assert_eq!(format_float(-0.0), "0.0000000000000000e0");
        let v = json!({"a": [1, -2, 0.5], "b": "x\"y", "c": null, "d": true});
        assert_eq!(
            to_json(&v).unwrap(),
            r#"{"a":[1,-2,5.0000000000000000e-1],"b":"x\"y","c":null,"d":true}"#
        );
    }

    #[test]
    fn prox_eval_examples() {
        let (code, out, _) = run(&["prox", "eval", "--loss", "hinge", "--y", "1", "--a", "0.5"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim().parse::<f64>().unwrap(), 1.0);

        let (_, out, _) = run(&["prox", "eval", "--loss", "hinge", "--y", "-1", "--a", "0.5"]);
        assert_eq!(out.trim().parse::<f64>().unwrap(), -0.5);

        let (_, out, _) = run(&["prox", "eval", "--loss", "eps", "--a", "3", "--eps", "1"]);
        assert_eq!(out.trim().parse::<f64>().unwrap(), 2.0);

        let (_, out, _) = run(&["prox", "eval", "--loss", "l1", "--a", "-3"]);
        assert_eq!(out.trim().parse::<f64>().unwrap(), -2.0);

        let (_, out, _) = run(&[
            "prox",
            "eval",
            "--loss",
            "indicator-conj",
            "--a",
            "0",
            "--y",
            "2",
            "--sigma",
            "2",
        ]);
        assert_eq!(out.trim().parse::<f64>().unwrap(), -4.0);
    }

    #[test]
    fn prox_eval_input_errors() {
        let (code, _, err) = run(&["prox", "eval", "--loss", "eps", "--a", "3"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("--eps"));
        let (code, _, _) = run(&["prox", "eval", "--loss", "hinge", "--y", "0.5", "--a", "3"]);
        assert_eq!(code, EXIT_INPUT);
        let (code, _, _) = run(&["prox", "eval", "--loss", "l1", "--a", "3", "--sigma", "0"]);
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn usage_errors() {
        let (code, _, err) = run(&["frobnicate"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("Usage"));
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("verify"));
    }
}
