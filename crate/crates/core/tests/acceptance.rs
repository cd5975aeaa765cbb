//! Acceptance suite: one line per criterion, then a nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

mod common;

use std::time::Instant;

use common::{builder_coefficient, derivative_matches_fd, random_expr, random_params, run_suite, GROUPS};
use pburg::analysis::{make_antiderivative, quadrature::integrate};
use pburg::classes::{conserved_current_check, decompose_quadratic, Characteristic, Family};
use pburg::expr::{parse, Expr, SampleBox};
use pburg::groupoid::{
    check_classifying_equations, check_subclass_preserved, decide_equivalence, verify_admissible, Decision, Target,
    DEFAULT_BUDGET,
};
use pburg::maps::{linearize_p3, potential_identity, potentialize_c, potentialize_l, triangle_check};
use pburg::transforms::{
    build, build_c2, build_c_usual, build_gbe, build_p3, build_usual_pot, rescale_projective, C2Params, CUsualParams,
    GbeParams, HeatKind, P2Params, P3Params, Params, PointTransformation, UsualPotParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned thresholds.
const ADMISSIBLE_MAX: f64 = 1e-6;
const ADMISSIBLE_SECONDS: f64 = 10.0;
const NEGATIVE_MIN: f64 = 1e-3;
const PROJECTIVE_TOL: f64 = 1e-9;
const REDUCTION_TOL: f64 = 1e-8;
const CURRENT_MAX: f64 = 1e-8;
const MAP_MAX: f64 = 1e-6;
const TRIANGLE_MAX: f64 = 1e-8;
const QUAD_TOL: f64 = 1e-8;
const GAUSSIAN: f64 = 0.746_824_1;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn parsed(s: &str) -> Expr {
    parse(s).expect("test expression parses")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// 1. Every builder, 3 draws × 200 jets.
fn builder_admissibility() -> Outcome {
    let sbox = SampleBox::standard(101).with_n(200);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for group in GROUPS {
        let f = parsed(builder_coefficient(group));
        for _ in 0..3 {
            let p = random_params(&mut rng, group);
            let t = build(&p, Some(&f), &sbox).map_err(err)?;
            let r = verify_admissible(&t, p.family(), &f, &Target::Induced, &sbox).map_err(err)?;
            if !(r.passed() && r.max_residual < ADMISSIBLE_MAX && r.n == 200) {
                return Err(format!("{group} {p:?}: max residual {:.3e}, n {}", r.max_residual, r.n));
            }
            worst = worst.max(r.max_residual);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < ADMISSIBLE_SECONDS, format!("21 draws, worst residual {worst:.2e}, {secs:.2} s"))
}

fn usual(alpha: f64, beta: f64, kappa: f64, mu1: f64, mu0: f64, nu: f64) -> PointTransformation {
    build_usual_pot(&UsualPotParams { alpha, beta, kappa, mu1, mu0, nu }).unwrap()
}

/// Corrupted P-family candidates `(name, transformation, source f, target)`.
fn p_negatives() -> Vec<(&'static str, PointTransformation, Expr, Target)> {
    let sbox = SampleBox::standard(102);
    let f = parsed("exp(x) + t");
    let u = usual(2.0, 0.1, 1.5, 0.3, -0.2, 0.4);
    let scaled = u.clone().with_factor(u.factor().unwrap().clone().mul(Expr::num(1.1)));
    let square = PointTransformation::from_components(Expr::t(), Expr::x(), parsed("v^2 + v"), Family::P)
        .unwrap()
        .with_factor(Expr::int(1));
    let p3 = build_p3(
        &P3Params { alpha: 1.0, beta: 0.2, gamma: 0.3, delta: 1.0, kappa: 1.5, mu1: 0.2, mu0: -0.1, k: 2.0, f2: HeatKind::Zero },
        -1.0,
        &sbox,
    )
    .unwrap();
    let fa = parsed("t*x^2 + x + 1");
    let p2 = build(
        &Params::P2(P2Params { c0: 1.0, c1: 0.2, c2: 1.0, c3: 0.1, c4: 0.0, c5: 0.0, c6: 0.0, t0: 0.0 }),
        Some(&fa),
        &sbox,
    )
    .unwrap();
    vec![
        ("usual-pot with the rule scaled by 1.1", scaled, f.clone(), Target::Induced),
        ("w' = w^2 + w", square, f.clone(), Target::Induced),
        ("p3 map on a nonconstant f", p3, parsed("-1 + 0.5*x"), Target::Expr(parsed("-1"))),
        ("p2 map built for another f", p2, parsed("2*t*x^2 + x + 1"), Target::Induced),
        ("usual-pot against the untransformed f", u, f.clone(), Target::Expr(f)),
    ]
}

/// 2. Five corrupted transformations or targets fail clearly.
fn negative_controls() -> Outcome {
    let sbox = SampleBox::standard(103).with_n(200);
    let mut lines = Vec::new();
    let mut cases: Vec<(&str, PointTransformation, Family, Expr, Target)> =
        p_negatives().into_iter().take(4).map(|(n, t, f, g)| (n, t, Family::P, f, g)).collect();
    // the C-usual u-component with μ1 in place of μ1/2
    let p = CUsualParams { alpha: 2.0, beta: 0.1, kappa: 1.5, mu1: 0.6, mu0: 0.2 };
    let good = build_c_usual(&p).unwrap();
    let c = good.components().unwrap();
    let typo = PointTransformation::from_components(
        c[0].clone(),
        c[1].clone(),
        Expr::num(p.kappa / p.alpha).mul(Expr::w().add(Expr::num(p.mu1))),
        Family::C,
    )
    .unwrap()
    .with_factor(good.factor().unwrap().clone());
    cases.push(("c-usual with u + μ1", typo, Family::C, parsed("x^3 + t"), Target::Induced));
    for (name, t, fam, f, target) in cases {
        let r = verify_admissible(&t, fam, &f, &target, &sbox).map_err(err)?;
        if r.passed() || r.max_residual.is_nan() || r.max_residual <= NEGATIVE_MIN {
            return Err(format!("{name}: max residual {:.3e}", r.max_residual));
        }
        lines.push(format!("{:.1e}", r.max_residual));
    }
    Ok(format!("5 controls fail, max residuals {}", lines.join(", ")))
}

/// 3. Classifying equations agree with jet verification.
fn classifying_cross_check() -> Outcome {
    let sbox = SampleBox::standard(104).with_n(100);
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut positives: Vec<(PointTransformation, Expr)> = vec![(PointTransformation::identity(Family::P), parsed("t*x + 1"))];
    for (group, count) in [("usual-pot", 3), ("p3", 2), ("p2", 2), ("p2-linear", 2)] {
        let f = parsed(builder_coefficient(group));
        for _ in 0..count {
            let p = random_params(&mut rng, group);
            positives.push((build(&p, Some(&f), &sbox).map_err(err)?, f.clone()));
        }
    }
    for (t, f) in &positives {
        let a = verify_admissible(t, Family::P, f, &Target::Induced, &sbox).map_err(err)?;
        let b = check_classifying_equations(t, f, &Target::Induced, &sbox).map_err(err)?;
        if !(a.passed() && b.passed()) {
            return Err(format!("positive {}: jets {:?}, classifying {:?}", t.label(), a.verdict, b.verdict));
        }
    }
    for (name, t, f, target) in p_negatives() {
        let a = verify_admissible(&t, Family::P, &f, &target, &sbox).map_err(err)?;
        let b = check_classifying_equations(&t, &f, &target, &sbox).map_err(err)?;
        if a.passed() || b.passed() {
            return Err(format!("negative {name}: jets {:?}, classifying {:?}", a.verdict, b.verdict));
        }
    }
    Ok(format!("{} positives pass both, 5 negatives fail both", positives.len()))
}

/// 4. Subclass preservation and cross-subclass inequivalence.
fn subclass_preservation() -> Outcome {
    let sbox = SampleBox::standard(105).with_n(60);
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for i in 0..100 {
        let group = GROUPS[i % GROUPS.len()];
        let f = parsed(builder_coefficient(group));
        let p = random_params(&mut rng, group);
        let t = build(&p, Some(&f), &sbox).map_err(err)?;
        if !check_subclass_preserved(&t, p.family(), &f, &Target::Induced, &sbox).map_err(err)? {
            return Err(format!("draw {i}: {group} {p:?} changes the subclass"));
        }
    }
    let pairs = [
        (Family::P, "exp(x)", "-1"),
        (Family::P, "exp(x)", "t*x + 1"),
        (Family::P, "x^3 + 1", "x^2 + 1"),
        (Family::P, "t*x + 1", "2"),
        (Family::P, "-1", "t + 1"),
        (Family::P, "x^2 + 1", "exp(t + x)"),
        (Family::P, "3", "x^3 + x + 1"),
        (Family::C, "x^3 + t", "x^2 + 1"),
        (Family::C, "exp(x)", "t*x + 1"),
        (Family::C, "x + 2", "1/(x + 1)"),
    ];
    for (fam, a, b) in pairs {
        match decide_equivalence(fam, &parsed(a), &parsed(b), &sbox, DEFAULT_BUDGET).map_err(err)? {
            Decision::Inequivalent { .. } => {}
            d => return Err(format!("{a} vs {b}: {d:?}")),
        }
    }
    Ok("100 draws keep their subclass; 10 cross-subclass pairs inequivalent".into())
}

/// 5. Constant coefficients form one orbit.
fn constant_orbit() -> Outcome {
    let sbox = SampleBox::standard(106).with_n(100);
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let a: f64 = rng.random_range(0.2..5.0);
        let b: f64 = rng.random_range(0.2..5.0);
        // alternate sign patterns, starting with a > 0 > b
        let (a, b) = match i % 4 {
            0 => (a, -b),
            1 => (-a, b),
            2 => (a, b),
            _ => (-a, -b),
        };
        let d = decide_equivalence(Family::P, &Expr::num(a), &Expr::num(b), &sbox, DEFAULT_BUDGET).map_err(err)?;
        match d {
            Decision::Equivalent { report, .. } if report.passed() => worst = worst.max(report.max_residual),
            d => return Err(format!("({a}, {b}): {d:?}")),
        }
    }
    Ok(format!("10 pairs (4 sign-changing) with verified witnesses, worst residual {worst:.1e}"))
}

/// 6. Rescaled projective tuples give the same maps.
fn projective_invariance() -> Outcome {
    let sbox = SampleBox::standard(107).with_n(20);
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst: f64 = 0.0;
    for group in ["p3", "p2-linear", "gbe"] {
        let f = parsed(builder_coefficient(group));
        let p = random_params(&mut rng, group);
        let base = build(&p, Some(&f), &sbox).map_err(err)?;
        for s in [-3.0, 0.5, 7.0] {
            let q = rescale_projective(&p, s).map_err(err)?;
            let t = build(&q, Some(&f), &sbox).map_err(err)?;
            for pt in sbox.points() {
                let (a, b) = (base.map_point(&pt).map_err(err)?, t.map_point(&pt).map_err(err)?);
                for (u, v) in a.iter().zip(&b) {
                    worst = worst.max((u - v).abs() / (1.0 + u.abs()));
                }
            }
        }
    }
    check(worst <= PROJECTIVE_TOL, format!("3 builders × 3 scalings × 20 points, worst {worst:.1e}"))
}

fn map_gap(a: &PointTransformation, b: &PointTransformation, pts: &[[f64; 3]], scale_w: f64) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for p in pts {
        let mut q = *p;
        q[2] *= scale_w;
        let (u, v) = (a.map_point(p).map_err(err)?, b.map_point(&q).map_err(err)?);
        let u = [u[0], u[1], u[2] * scale_w];
        for (x, y) in u.iter().zip(&v) {
            worst = worst.max((x - y).abs() / (1.0 + x.abs()));
        }
    }
    Ok(worst)
}

/// 7. Reductions between group forms.
fn reductions() -> Outcome {
    let sbox = SampleBox::standard(108).with_n(50);
    let pts = sbox.points();
    let (c0, c2, c3, c4, c5, c6, t0) = (1.7, -0.8, 0.3, 0.4, -0.2, 0.6, 0.0);
    let f = parsed("(t + 1)*x + t");
    let p2 = build(&Params::P2(P2Params { c0, c1: 0.0, c2, c3, c4, c5, c6, t0 }), Some(&f), &sbox).map_err(err)?;
    let a = 1.0 / (c0 * c2 * c2);
    let up = usual(a, c5 - t0 * a, 1.0 / c2, 0.0, c4 * c2, c6 / c0);
    let g1 = map_gap(&p2, &up, &pts, 1.0)?;
    let f0 = parsed("t + 1");
    let dec0 = decompose_quadratic(&f0, &sbox).map_err(err)?;
    let c2a = build_c2(&C2Params { c0, c1: 0.0, c2, c3, c4, c5, t0 }, &dec0).map_err(err)?;
    let cu = build_c_usual(&CUsualParams { alpha: a, beta: c5 - t0 * a, kappa: 1.0 / c2, mu1: c3 / c2, mu0: c2 * c4 - c3 * t0 / c2 })
        .map_err(err)?;
    let g2 = map_gap(&c2a, &cu, &pts, 1.0)?;
    // c2 for f = f(t) against the projective group, with u_L = 2 u_C
    let c1 = 0.35;
    let c2b = build_c2(&C2Params { c0, c1, c2, c3, c4, c5, t0: 0.0 }, &dec0).map_err(err)?;
    let gbe = build_gbe(&GbeParams {
        alpha: 1.0 + c5 * c0 * c2 * c1,
        beta: c5 * c0 * c2 * c2,
        gamma: c0 * c2 * c1,
        delta: c0 * c2 * c2,
        kappa: c0 * c2,
        mu1: c0 * c3 + c0 * c1 * c2 * c4,
        mu0: c0 * c2 * c2 * c4,
    })
    .map_err(err)?;
    let g3 = map_gap(&c2b, &gbe, &pts, 2.0)?;
    let worst = g1.max(g2).max(g3);
    check(
        worst <= REDUCTION_TOL,
        format!("p2→usual-pot {g1:.1e}, c2→c-usual {g2:.1e}, c2→gbe {g3:.1e} at 50 points"),
    )
}

/// 8. Conserved currents and a wrong characteristic.
fn conserved_currents() -> Outcome {
    let sbox = SampleBox::standard(109);
    let c = conserved_current_check(Family::C, &parsed("t*x + exp(x)"), &sbox, 100, &Characteristic::Canonical).map_err(err)?;
    let l = conserved_current_check(Family::L, &parsed("t*x^2 + x + 1"), &sbox, 100, &Characteristic::Canonical)
        .map_err(err)?;
    let bad = conserved_current_check(Family::L, &parsed("t*x^2 + x + 1"), &sbox, 100, &Characteristic::Given(parsed("exp(t)")))
        .map_err(err)?;
    let ok = c.passed()
        && c.max_residual < CURRENT_MAX
        && l.passed()
        && l.max_residual < CURRENT_MAX
        && !bad.passed()
        && bad.max_residual > NEGATIVE_MIN;
    check(
        ok,
        format!("C {:.1e}, L {:.1e}, wrong λ {:.1e} (100 jets each)", c.max_residual, l.max_residual, bad.max_residual),
    )
}

/// 9. Maps between classes.
fn inter_class_maps() -> Outcome {
    let sbox = SampleBox::standard(110);
    let c = potentialize_c(&parsed("t*x + 1"), &sbox, 100).map_err(err)?.report;
    let control = potential_identity(&parsed("t*x + 1"), &sbox, 100, 2.0).map_err(err)?;
    let l = potentialize_l(&parsed("t*x^2 + x + 1"), &sbox, 0.0, 100).map_err(err)?.report;
    let lin = linearize_p3(-1.0, &sbox, 100).map_err(err)?.report;
    let tri = triangle_check(
        &CUsualParams { alpha: 2.0, beta: 0.1, kappa: -1.5, mu1: 0.3, mu0: 0.2 },
        &sbox.clone().with_n(50),
    )
    .map_err(err)?;
    let ok = [&c, &l, &lin].iter().all(|r| r.passed() && r.max_residual < MAP_MAX && r.n >= 100)
        && !control.passed()
        && tri.passed()
        && tri.max_residual < TRIANGLE_MAX
        && tri.n == 50;
    check(
        ok,
        format!(
            "C potential {:.1e}, L hat {:.1e}, Cole–Hopf {:.1e}, triangle {:.1e}",
            c.max_residual, l.max_residual, lin.max_residual, tri.max_residual
        ),
    )
}

/// 10. Kernel health.
fn kernel_health() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 200 {
        attempts += 1;
        if attempts > 20_000 {
            return Err(format!("only {checked} expressions were checkable"));
        }
        let e = random_expr(&mut rng, 5);
        match derivative_matches_fd(&e, &mut rng) {
            Some(true) => checked += 1,
            Some(false) => return Err(format!("derivative of {e} disagrees with finite differences")),
            None => {}
        }
    }
    let integrands = [
        "1", "t", "t^2", "3*t^3 - t", "exp(t)", "exp(-2*t + 1)", "t*exp(t)", "t^2*exp(0.5*t)", "1/(t + 1)", "sqrt(t + 1)",
        "exp(t^2)", "1/(2 + t)^2", "ln(t + 2)", "1/(1 + t^2)", "exp(-t^2)", "t/(t + 3)", "(t + 1)^(1/3)", "abs(t - 0.5)",
        "exp(t)/(1 + t)", "t^3*exp(-t)",
    ];
    for g in integrands {
        let e = parsed(g);
        let a = make_antiderivative(&e, 0.1, 1e-10).map_err(err)?;
        if a.value(0.1).map_err(err)?.abs() > 1e-12 {
            return Err(format!("∫{g} does not vanish at its base point"));
        }
        for t in [0.3, 0.8, 1.4] {
            let h = 1e-4;
            let fd = (a.value(t + h).map_err(err)? - a.value(t - h).map_err(err)?) / (2.0 * h);
            let exact = e.eval_at(t, 0.0, 0.0).map_err(err)?;
            if (fd - exact).abs() > 1e-6 * (1.0 + exact.abs()) {
                return Err(format!("d/dt ∫{g} at {t}: {fd} vs {exact}"));
            }
        }
    }
    let v = integrate(&|t| Ok((-t * t).exp()), 0.0, 1.0, QUAD_TOL).map_err(err)?;
    check(
        (v - GAUSSIAN).abs() < 5e-8,
        format!("200 derivatives, 20 antiderivatives, ∫₀¹ exp(-t²) = {v:.9}"),
    )
}

/// 11. The CLI suite is byte-identical across runs.
fn determinism() -> Outcome {
    let a = run_suite();
    let b = run_suite();
    check(a == b, format!("{} invocations, identical output excluding timestamps", a.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("builder admissibility", builder_admissibility),
        ("negative controls", negative_controls),
        ("classifying equations", classifying_cross_check),
        ("subclass preservation", subclass_preservation),
        ("constant orbit", constant_orbit),
        ("projective invariance", projective_invariance),
        ("reductions", reductions),
        ("conserved currents", conserved_currents),
        ("inter-class maps", inter_class_maps),
        ("kernel health", kernel_health),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {:>2} [{tag}] {name}: {detail} ({secs:.2} s)", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
