//! Command-line front end. Every subcommand prints one JSON document:
//! `{"schema", "subcommand", "inputs", "result", "report", "seed", "timestamp"}`.
//!
//! Exit codes: 0 pass or decided, 2 failed verification, 3 undecided,
//! 1 usage or domain error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Number, Value};

use crate::classes::{classify, decompose_quadratic, ClassError, Family, Subclass, ZERO_TOL};
use crate::expr::{as_constant, parse, BoxError, Expr, ParseError, SampleBox, Var, ZeroTestError};
use crate::groupoid::{decide_equivalence, verify_admissible, Decision, GroupoidError, Target, DEFAULT_BUDGET};
use crate::maps::{linearize_p3, potentialize_c, potentialize_l, MapError};
use crate::report::{Verdict, VerificationReport};
use crate::transforms::{build, pushforward_f, Params, PointTransformation, TransformError, RULE_TOL};

pub const SCHEMA: &str = "pburg/1";

/// Image points listed by `apply`.
const APPLY_LISTED: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("expression `{src}`: {err}")]
    Parse { src: String, err: ParseError },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot write {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    ZeroTest(#[from] ZeroTestError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Parser)]
#[command(name = "pburg", version, about = "Equivalence transformations of generalized potential Burgers equations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Seed of the sampled points and jets.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of sampled jets.
    #[arg(long, global = true, default_value_t = 200)]
    n: usize,
    #[arg(long = "t-range", global = true, value_parser = parse_range, default_value = "0.1,1.1", allow_hyphen_values = true)]
    t_range: (f64, f64),
    #[arg(long = "x-range", global = true, value_parser = parse_range, default_value = "0.2,1.2", allow_hyphen_values = true)]
    x_range: (f64, f64),
    #[arg(long = "w-range", global = true, value_parser = parse_range, default_value = "-1,1", allow_hyphen_values = true)]
    w_range: (f64, f64),
    /// Override the pass threshold of the report.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the JSON document here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Subclass of an arbitrary element.
    Classify {
        #[arg(long)]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
    },
    /// Build a group transformation; with `--f`, verify it on the induced target.
    Build {
        #[arg(long)]
        group: String,
        #[arg(long)]
        params: String,
        #[arg(long, allow_hyphen_values = true)]
        f: Option<String>,
    },
    /// The induced arbitrary element of a transformation.
    Apply {
        #[arg(long)]
        transform: String,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
    },
    /// Verify admissibility of a transformation on sampled jets.
    Verify {
        #[arg(long)]
        transform: String,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long = "f-target", allow_hyphen_values = true)]
        f_target: Option<String>,
        #[arg(long)]
        family: String,
    },
    /// Decide equivalence of two arbitrary elements.
    Equivalent {
        #[arg(long)]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        f1: String,
        #[arg(long, allow_hyphen_values = true)]
        f2: String,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Potential equation of a `C` or `L` equation.
    Potentialize {
        #[arg(long)]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
    },
    /// Cole–Hopf linearization of a constant-coefficient potential equation.
    Linearize {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(a)?, num(b)?))
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parse `args` (including the program name) and run the subcommand.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(&cli) {
        Ok((code, doc)) => {
            let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n";
            match &cli.common.output {
                Some(path) => match std::fs::write(path, &text) {
                    Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new() },
                    Err(err) => failure(CliError::Io { path: path.clone(), err }),
                },
                None => Outcome { code, stdout: text, stderr: String::new() },
            }
        }
        Err(e) => failure(e),
    }
}

fn failure(e: CliError) -> Outcome {
    Outcome {
        code: 1,
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
    }
}

fn expr(src: &str) -> Result<Expr, CliError> {
    parse(src).map_err(|err| CliError::Parse { src: src.to_string(), err })
}

fn family(s: &str) -> Result<Family, CliError> {
    Ok(s.parse::<Family>()?)
}

fn params(doc: &str, group: Option<&str>) -> Result<Params, CliError> {
    let mut v: Value = serde_json::from_str(doc)?;
    if let (Some(g), Value::Object(m)) = (group, &mut v) {
        match m.get("group").and_then(Value::as_str) {
            Some(given) if !given.eq_ignore_ascii_case(g) => {
                return Err(CliError::Usage(format!("--group {g} disagrees with \"group\": \"{given}\"")));
            }
            _ => {
                m.insert("group".into(), Value::String(g.into()));
            }
        }
    }
    Ok(Params::from_value(v)?)
}

fn describe(t: &PointTransformation) -> Value {
    json!({
        "label": t.label(),
        "params": t.params(),
        "components": t.components().map(|c| c.clone().map(|e| e.to_string())),
        "factor": t.factor().map(Expr::to_string),
        "guards": t.guards().iter().map(Expr::to_string).collect::<Vec<_>>(),
    })
}

fn verdict_code(r: &VerificationReport) -> i32 {
    if r.passed() {
        0
    } else {
        2
    }
}

fn execute(cli: &Cli) -> Result<(i32, Value), CliError> {
    let c = &cli.common;
    let sbox = SampleBox::new(c.t_range, c.x_range, c.w_range, c.n, c.seed)?;
    let retol = |r: VerificationReport| match c.tol {
        Some(tol) => VerificationReport {
            tolerance: tol,
            verdict: if r.n > 0 && r.max_residual <= tol { Verdict::Pass } else { Verdict::Fail },
            ..r
        },
        None => r,
    };
    let mut inputs = Map::new();
    let (name, code, result, report): (&str, i32, Value, Option<VerificationReport>) = match &cli.cmd {
        Cmd::Classify { family: fam, f } => {
            inputs.insert("family".into(), json!(fam));
            inputs.insert("f".into(), json!(f));
            let (fam, e) = (family(fam)?, expr(f)?);
            let sub = classify(fam, &e, &sbox)?;
            let mut result = json!({ "family": fam, "subclass": sub });
            if matches!(sub, Subclass::P2 | Subclass::P3 | Subclass::C2) {
                let d = decompose_quadratic(&e, &sbox)?;
                result["decomposition"] = json!({
                    "f2": d.f2.to_string(), "f1": d.f1.to_string(), "f0": d.f0.to_string()
                });
            }
            ("classify", 0, result, None)
        }
        Cmd::Build { group, params: doc, f } => {
            inputs.insert("group".into(), json!(group));
            inputs.insert("params".into(), serde_json::from_str::<Value>(doc)?);
            inputs.insert("f".into(), json!(f));
            let p = params(doc, Some(group))?;
            let e = f.as_deref().map(expr).transpose()?;
            let t = build(&p, e.as_ref(), &sbox)?;
            let report = match &e {
                Some(e) => Some(retol(verify_admissible(&t, p.family(), e, &Target::Induced, &sbox)?)),
                None => None,
            };
            let code = report.as_ref().map_or(0, verdict_code);
            ("build", code, json!({ "family": p.family(), "transform": describe(&t) }), report)
        }
        Cmd::Apply { transform, f } => {
            inputs.insert("transform".into(), serde_json::from_str::<Value>(transform)?);
            inputs.insert("f".into(), json!(f));
            let p = params(transform, None)?;
            let e = expr(f)?;
            let t = build(&p, Some(&e), &sbox)?;
            let pushed = pushforward_f(&t, &e, &sbox)?;
            let mut rows = Vec::new();
            let mut listed = Vec::new();
            for pt in sbox.points() {
                let Ok(img) = t.map_point(&pt) else { continue };
                let generic = pushed.value(img[0], img[1])?;
                let closed = pushed.closed_form(img[0], img[1]).transpose()?;
                let r = closed.map_or(0.0, |c| (c - generic).abs() / (1.0 + generic.abs()));
                rows.push((vec![img[0], img[1]], r));
                if listed.len() < APPLY_LISTED {
                    listed.push(json!({ "t": img[0], "x": img[1], "f": generic, "closed_form": closed }));
                }
            }
            let report = retol(VerificationReport::from_samples(&rows, RULE_TOL));
            let result = json!({
                "family": p.family(),
                "rule": t.factor().map(|g| g.clone().mul(e.clone()).to_string()),
                "samples": listed,
            });
            ("apply", verdict_code(&report), result, Some(report))
        }
        Cmd::Verify { transform, f, f_target, family: fam } => {
            inputs.insert("transform".into(), serde_json::from_str::<Value>(transform)?);
            inputs.insert("f".into(), json!(f));
            inputs.insert("f_target".into(), json!(f_target));
            inputs.insert("family".into(), json!(fam));
            let fam = family(fam)?;
            let p = params(transform, None)?;
            if p.family() != fam {
                return Err(CliError::Usage(format!("group {} acts on family {}, not {fam}", p.group(), p.family())));
            }
            let e = expr(f)?;
            let target = match f_target {
                Some(g) => Target::Expr(expr(g)?),
                None => Target::Induced,
            };
            let t = build(&p, Some(&e), &sbox)?;
            let report = retol(verify_admissible(&t, fam, &e, &target, &sbox)?);
            let result = json!({ "verdict": report.verdict, "max_residual": report.max_residual, "transform": describe(&t) });
            ("verify", verdict_code(&report), result, Some(report))
        }
        Cmd::Equivalent { family: fam, f1, f2, budget } => {
            inputs.insert("family".into(), json!(fam));
            inputs.insert("f1".into(), json!(f1));
            inputs.insert("f2".into(), json!(f2));
            inputs.insert("budget".into(), json!(budget));
            let fam = family(fam)?;
            let d = decide_equivalence(fam, &expr(f1)?, &expr(f2)?, &sbox, *budget)?;
            match d {
                Decision::Equivalent { witness, report } => {
                    let report = retol(report);
                    let code = verdict_code(&report);
                    ("equivalent", code, json!({ "verdict": "equivalent", "witness": witness }), Some(report))
                }
                Decision::Inequivalent { reason } => {
                    ("equivalent", 0, json!({ "verdict": "inequivalent", "reason": reason }), None)
                }
                Decision::Undecided { reason } => ("equivalent", 3, json!({ "verdict": "undecided", "reason": reason }), None),
            }
        }
        Cmd::Potentialize { family: fam, f, t0 } => {
            inputs.insert("family".into(), json!(fam));
            inputs.insert("f".into(), json!(f));
            inputs.insert("t0".into(), json!(t0));
            let e = expr(f)?;
            let link = match family(fam)? {
                Family::C => potentialize_c(&e, &sbox, c.n)?,
                Family::L => potentialize_l(&e, &sbox, *t0, c.n)?,
                Family::P => return Err(CliError::Usage("potentialize takes --family C or L".into())),
            };
            let report = retol(link.report.clone());
            ("potentialize", verdict_code(&report), json!(link.summary()), Some(report))
        }
        Cmd::Linearize { f } => {
            inputs.insert("f".into(), json!(f));
            let e = expr(f)?;
            let value = as_constant(&e, &[Var::T, Var::X], &sbox, ZERO_TOL)?
                .ok_or_else(|| CliError::Usage(format!("linearize needs a constant f, got `{f}`")))?;
            let lin = linearize_p3(value, &sbox, c.n)?;
            let report = retol(lin.report.clone());
            let result = json!({ "f": value, "heat_coefficient": value, "transform": describe(&lin.transform) });
            ("linearize", verdict_code(&report), result, Some(report))
        }
    };
    inputs.insert(
        "box".into(),
        json!({ "t": [c.t_range.0, c.t_range.1], "x": [c.x_range.0, c.x_range.1], "w": [c.w_range.0, c.w_range.1], "n": c.n }),
    );
    inputs.insert("tol".into(), json!(c.tol));
    let report = report.map(|r| {
        json!({
            "n": r.n, "max_residual": r.max_residual, "mean_residual": r.mean_residual,
            "tolerance": r.tolerance, "verdict": r.verdict, "worst": r.worst,
        })
    });
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut doc = json!({
        "schema": SCHEMA,
        "subcommand": name,
        "inputs": inputs,
        "result": result,
        "report": report,
        "seed": c.seed,
        "timestamp": timestamp,
    });
    fix_floats(&mut doc);
    Ok((code, doc))
}

/// Rewrite every non-integer number with 17 significant digits.
fn fix_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                *n = format!("{x:.16e}").parse::<Number>().expect("formatted float parses");
            }
        }
        Value::Array(a) => a.iter_mut().for_each(fix_floats),
        Value::Object(m) => m.values_mut().for_each(fix_floats),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, Value) {
        let out = run(std::iter::once("pburg").chain(args.iter().copied()));
        let doc = if out.stdout.is_empty() { Value::Null } else { serde_json::from_str(&out.stdout).unwrap() };
        (out.code, doc)
    }

    #[test]
    fn classify_example() {
        let (code, doc) = call(&["classify", "--family", "P", "--f", "t*x+1"]);
        assert_eq!(code, 0);
        assert_eq!(doc["result"]["subclass"], "P2");
        assert_eq!(doc["schema"], SCHEMA);
    }

    #[test]
    fn floats_have_17_digits() {
        let mut v = json!({ "a": 0.1, "b": [2.0, 3], "c": null });
        fix_floats(&mut v);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":1.0000000000000001e-1,"b":[2.0000000000000000e+0,3],"c":null}"#);
        let back: f64 = serde_json::from_value(v["a"].clone()).unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run(["pburg"]).code, 1);
        assert_eq!(run(["pburg", "classify", "--family", "Q", "--f", "x"]).code, 1);
        let out = run(["pburg", "classify", "--family", "P", "--f", "x +* 2"]);
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("byte"), "{}", out.stderr);
        let out = run(["pburg", "build", "--group", "usual-pot", "--params", r#"{"alpha":1}"#]);
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("kappa"), "{}", out.stderr);
    }
}
