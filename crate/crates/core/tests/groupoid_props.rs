mod common;

use std::time::Instant;

use common::{builder_coefficient, random_params, GROUPS};
use pburg::expr::{parse, SampleBox};
use pburg::groupoid::{check_classifying_equations, check_subclass_preserved, verify_admissible, Target};
use pburg::transforms::build;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn every_builder_is_admissible_for_random_parameters() {
    let sbox = SampleBox::standard(21).with_n(100);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for group in GROUPS {
        let f = parse(builder_coefficient(group)).unwrap();
        for _ in 0..5 {
            let p = random_params(&mut rng, group);
            let start = Instant::now();
            let t = build(&p, Some(&f), &sbox).unwrap_or_else(|e| panic!("{group} {p:?}: {e}"));
            let r = verify_admissible(&t, p.family(), &f, &Target::Induced, &sbox).unwrap();
            assert!(r.passed(), "{group} {p:?}: {r:?}");
            assert!(start.elapsed().as_secs_f64() < 10.0, "{group} took {:?}", start.elapsed());
            if t.components().is_some() {
                assert!(check_subclass_preserved(&t, p.family(), &f, &Target::Induced, &sbox).unwrap(), "{group}");
            }
            if p.family() == pburg::classes::Family::P {
                let r = check_classifying_equations(&t, &f, &Target::Induced, &sbox).unwrap();
                assert!(r.passed(), "{group} {p:?}: {r:?}");
            }
        }
    }
}

#[test]
fn a_perturbed_rule_is_rejected_for_every_builder() {
    let sbox = SampleBox::standard(22).with_n(100);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for group in GROUPS {
        let f = parse(builder_coefficient(group)).unwrap();
        let p = random_params(&mut rng, group);
        let t = build(&p, Some(&f), &sbox).unwrap();
        let wrong = t.factor().unwrap().clone().mul(pburg::expr::Expr::num(1.1));
        let t = t.with_factor(wrong);
        let r = verify_admissible(&t, p.family(), &f, &Target::Induced, &sbox).unwrap();
        assert!(!r.passed(), "{group}: {r:?}");
    }
}
