#![allow(dead_code)]

use pburg::expr::{Expr, Func, Node, Num, Var};
use rand::Rng;

/// Random tree of depth at most `depth` built from raw nodes (no folding),
/// so printing and reparsing must reproduce it exactly.
pub fn random_expr(rng: &mut impl Rng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return leaf(rng);
    }
    let sub = |rng: &mut _| random_expr(rng, depth - 1);
    match rng.random_range(0..10) {
        0 => Expr::raw(Node::Add(sub(rng), sub(rng))),
        1 => Expr::raw(Node::Sub(sub(rng), sub(rng))),
        2 | 3 => Expr::raw(Node::Mul(sub(rng), sub(rng))),
        4 => Expr::raw(Node::Div(sub(rng), sub(rng))),
        5 => Expr::raw(Node::Neg(sub(rng))),
        6 => {
            let r = match rng.random_range(0..4) {
                0 => Num::int(rng.random_range(-2..=4)),
                1 => Num::ratio(rng.random_range(-3..=3), rng.random_range(2..=4)),
                2 => Num::Float(0.5),
                _ => Num::int(2),
            };
            Expr::raw(Node::Pow(sub(rng), r))
        }
        _ => {
            let f = [Func::Exp, Func::Ln, Func::Sqrt, Func::Abs][rng.random_range(0..4)];
            Expr::raw(Node::Func(f, sub(rng)))
        }
    }
}

fn leaf(rng: &mut impl Rng) -> Expr {
    match rng.random_range(0..8) {
        0 | 1 => Expr::t(),
        2 | 3 => Expr::x(),
        4 => Expr::w(),
        5 => Expr::int(rng.random_range(-5..=5)),
        6 => Expr::rational(rng.random_range(-5..=5), rng.random_range(2..=7)),
        _ => Expr::constant(Num::Float((rng.random_range(-4.0..4.0f64) * 1000.0).round() / 1000.0)),
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Compare the symbolic derivative with a central difference (h = 1e-5) at
/// a well-conditioned random point. `None` if no such point was found: the
/// value must be moderate and the difference quotients at h and 2h must
/// agree, which keeps poles and kinks out of the comparison.
pub fn derivative_matches_fd(e: &Expr, rng: &mut impl Rng) -> Option<bool> {
    const H: f64 = 1e-5;
    'points: for _ in 0..20 {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.3..1.3));
        if !e.evaluate(&p).is_ok_and(|v| v.abs() < 1e3) {
            continue;
        }
        let mut checks = Vec::new();
        for v in Var::ALL {
            let i = v.index();
            let at = |d: f64| {
                let mut q = p;
                q[i] += d;
                e.evaluate(&q)
            };
            let (Ok(a1), Ok(b1), Ok(a2), Ok(b2)) = (at(H), at(-H), at(2.0 * H), at(-2.0 * H)) else {
                continue 'points;
            };
            let cd1 = (a1 - b1) / (2.0 * H);
            let cd2 = (a2 - b2) / (4.0 * H);
            if !rel_close(cd1, cd2, 1e-6) {
                continue 'points;
            }
            let Ok(exact) = e.diff(v).evaluate(&p) else {
                continue 'points;
            };
            checks.push((exact - cd1).abs() <= 1e-5 * (1.0 + exact.abs()));
        }
        return Some(checks.into_iter().all(|ok| ok));
    }
    None
}

/// A coefficient per group whose subclass the group acts on, valid on the
/// standard box.
pub fn builder_coefficient(group: &str) -> &'static str {
    match group {
        "usual-pot" => "exp(x) + t",
        "p3" => "-1",
        "p2" => "t*x^2 + x + 1",
        "p2-linear" => "t*x + 1",
        "c-usual" => "x^3 + t",
        "c2" => "t*x^2 + x + 1",
        _ => "x^3 + t + 1",
    }
}

fn away(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Random parameters of `group` whose maps stay regular on the standard box.
pub fn random_params(rng: &mut impl Rng, group: &str) -> pburg::transforms::Params {
    use pburg::transforms::*;
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    match group {
        "usual-pot" => {
            let p = UsualPotParams { alpha: 0.0, beta: u(-1.0, 1.0), kappa: 0.0, mu1: u(-1.0, 1.0), mu0: u(-1.0, 1.0), nu: u(-1.0, 1.0) };
            Params::UsualPot(UsualPotParams { alpha: away(rng, 0.3, 3.0), kappa: away(rng, 0.3, 3.0), ..p })
        }
        "c-usual" => {
            let p = CUsualParams { alpha: 0.0, beta: u(-1.0, 1.0), kappa: 0.0, mu1: u(-1.0, 1.0), mu0: u(-1.0, 1.0) };
            Params::CUsual(CUsualParams { alpha: away(rng, 0.3, 3.0), kappa: away(rng, 0.3, 3.0), ..p })
        }
        "p3" => {
            let f2 = match rng.random_range(0..4) {
                0 => HeatKind::Zero,
                1 => HeatKind::Constant { value: rng.random_range(0.5..2.0) },
                2 => HeatKind::Quadratic,
                _ => HeatKind::Exponential { a: rng.random_range(-1.0..1.0) },
            };
            let (gamma, delta) = (rng.random_range(-0.3..0.3), rng.random_range(0.5..1.5));
            let beta = rng.random_range(-0.5..0.5);
            // keep αδ − βγ away from 0
            let alpha = (beta * gamma + away(rng, 0.3, 2.0)) / delta;
            Params::P3(P3Params {
                alpha,
                beta,
                gamma,
                delta,
                kappa: away(rng, 0.3, 2.0),
                mu1: rng.random_range(-1.0..1.0),
                mu0: rng.random_range(-1.0..1.0),
                k: away(rng, 0.3, 2.0),
                f2,
            })
        }
        "gbe" | "p2-linear" => {
            let (gamma, delta) = (rng.random_range(-0.3..0.3), rng.random_range(0.5..1.5));
            let beta = rng.random_range(-0.5..0.5);
            let alpha = (beta * gamma + away(rng, 0.3, 2.0)) / delta;
            let kappa = away(rng, 0.3, 2.0);
            let (a, b, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if group == "gbe" {
                Params::Gbe(GbeParams { alpha, beta, gamma, delta, kappa, mu1: a, mu0: b })
            } else {
                Params::P2Linear(P2LinearParams { alpha, beta, gamma, delta, kappa, nu: a, c4: b, c5: c, t0: 0.0 })
            }
        }
        "p2" => Params::P2(P2Params {
            c0: away(rng, 0.3, 2.0),
            c1: rng.random_range(-0.3..0.3),
            c2: rng.random_range(0.7..1.5),
            c3: rng.random_range(-1.0..1.0),
            c4: rng.random_range(-1.0..1.0),
            c5: rng.random_range(-1.0..1.0),
            c6: rng.random_range(-1.0..1.0),
            t0: 0.0,
        }),
        _ => Params::C2(C2Params {
            c0: away(rng, 0.3, 2.0),
            c1: rng.random_range(-0.3..0.3),
            c2: rng.random_range(0.7..1.5),
            c3: rng.random_range(-1.0..1.0),
            c4: rng.random_range(-1.0..1.0),
            c5: rng.random_range(-1.0..1.0),
            t0: 0.0,
        }),
    }
}

pub const GROUPS: [&str; 7] = ["usual-pot", "p3", "p2", "p2-linear", "c-usual", "c2", "gbe"];

/// Invocations covering every subcommand, used for CLI determinism.
pub fn cli_suite() -> Vec<Vec<String>> {
    let usual = r#"{"alpha":2,"beta":0.1,"kappa":1.5,"mu1":0.3,"mu0":-0.2,"nu":0.4}"#;
    let transform = r#"{"group":"usual-pot","alpha":2,"beta":0.1,"kappa":1.5,"mu1":0.3,"mu0":-0.2,"nu":0.4}"#;
    let suite: Vec<Vec<&str>> = vec![
        vec!["classify", "--family", "P", "--f", "t*x+1"],
        vec!["classify", "--family", "C", "--f", "x^3 + 2"],
        vec!["build", "--group", "usual-pot", "--params", usual, "--f", "exp(x) + t"],
        vec!["build", "--group", "p2", "--params", r#"{"c0":1,"c1":0.2,"c2":1,"c3":0.1,"c4":0,"c5":0}"#, "--f", "t*x^2 + x + 1"],
        vec!["apply", "--transform", transform, "--f", "t*x + 1", "--n", "20"],
        vec!["verify", "--transform", transform, "--f", "t*x + 1", "--family", "P"],
        vec!["verify", "--transform", transform, "--f", "t*x + 1", "--f-target", "t*x + 1", "--family", "P"],
        vec!["equivalent", "--family", "P", "--f1", "-1", "--f2", "5"],
        vec!["equivalent", "--family", "P", "--f1", "x^3", "--f2", "8*x^3", "--n", "50"],
        vec!["equivalent", "--family", "P", "--f1", "exp(x)", "--f2", "-1"],
        vec!["equivalent", "--family", "P", "--f1", "t*x + 1", "--f2", "x + 2"],
        vec!["potentialize", "--family", "C", "--f", "t*x + 1", "--n", "100"],
        vec!["potentialize", "--family", "L", "--f", "x^2", "--n", "100"],
        vec!["linearize", "--f", "-1", "--n", "100", "--seed", "7"],
    ];
    suite
        .into_iter()
        .map(|args| std::iter::once("pburg").chain(args).map(String::from).collect())
        .collect()
}

/// Run the suite in-process; outputs with the timestamp removed.
pub fn run_suite() -> Vec<(i32, String)> {
    cli_suite()
        .into_iter()
        .map(|args| {
            let out = pburg::cli::run(args);
            let mut doc: serde_json::Value = if out.stdout.is_empty() {
                serde_json::Value::String(out.stderr)
            } else {
                serde_json::from_str(&out.stdout).expect("JSON output")
            };
            if let Some(m) = doc.as_object_mut() {
                m.remove("timestamp");
            }
            (out.code, serde_json::to_string(&doc).unwrap())
        })
        .collect()
}
