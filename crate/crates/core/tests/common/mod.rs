#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use sqc_core::parser::{parse_model, CircuitModel};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> CircuitModel {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_model(&text).unwrap()
}

fn linear_combo(rng: &mut impl Rng, n: usize, atom: &dyn Fn(usize) -> String) -> Option<String> {
    let terms: Vec<String> = (0..n)
        .filter_map(|i| {
            let k: i64 = rng.gen_range(-2..=2);
            (k != 0).then(|| format!("({k})*{}", atom(i)))
        })
        .collect();
    (!terms.is_empty()).then(|| terms.join(" + "))
}

/// Source of a random quadratic-plus-cosine Lagrangian in 1..=4 coordinates.
pub fn random_model_source(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=4);
    let vars: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let vel = |i: usize| format!("d(q{})", i + 1);
    let pos = |i: usize| format!("q{}", i + 1);
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(0..=n) {
        if let Some(v) = linear_combo(rng, n, &vel) {
            terms.push(format!("(1/2)*({v})^2"));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(0.3) {
                let b: i64 = rng.gen_range(-3..=3);
                terms.push(format!("({b})*{}*{}", vel(i), pos(j)));
            }
        }
        if rng.gen_bool(0.25) {
            let c: i64 = rng.gen_range(-3..=3);
            terms.push(format!("({c})*{}", vel(i)));
        }
        if rng.gen_bool(0.25) {
            let a: i64 = rng.gen_range(-3..=3);
            terms.push(format!("({a})*{}", pos(i)));
        }
    }
    for _ in 0..rng.gen_range(0..=n) {
        if let Some(u) = linear_combo(rng, n, &pos) {
            let sign = if rng.gen_bool(0.8) { "-" } else { "" };
            terms.push(format!("{sign}(1/2)*({u})^2"));
        }
    }
    if rng.gen_bool(0.3) {
        if let Some(u) = linear_combo(rng, n, &pos) {
            terms.push(format!("E*cos({u})"));
        }
    }
    if terms.is_empty() {
        terms.push("0".into());
    }
    format!("var {}\nparam E = 0.75 float\nL = {}\n", vars.join(" "), terms.join(" + "))
}
