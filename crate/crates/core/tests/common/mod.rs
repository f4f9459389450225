#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use redblue::ingestion::IoTrace;
use redblue::{LearnedModel, Model, StateId, StateLookup, Symbol, TraceSet};

pub fn sym(s: &str) -> Symbol {
    Symbol::new(s)
}

pub fn steps(raw: &[(&str, &str)]) -> Vec<(Symbol, Symbol)> {
    raw.iter().map(|(i, o)| (sym(i), sym(o))).collect()
}

pub fn mealy_traces(raw: &[&[(&str, &str)]]) -> TraceSet {
    TraceSet::IoTraces(raw.iter().map(|t| IoTrace::mealy(steps(t))).collect())
}

/// The three traces of the introductory partition example.
pub fn partition_example() -> TraceSet {
    mealy_traces(&[
        &[("x", "a"), ("x", "a"), ("x", "a")],
        &[("x", "a"), ("x", "a"), ("y", "b")],
        &[("y", "b")],
    ])
}

/// The partition example with `y/a` after `xa xa`.
pub fn red_blue_example() -> TraceSet {
    mealy_traces(&[
        &[("x", "a"), ("x", "a"), ("x", "a")],
        &[("x", "a"), ("x", "a"), ("y", "a")],
        &[("y", "b")],
    ])
}

fn fixture(name: &str) -> LearnedModel {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    LearnedModel::from_json(&text).unwrap()
}

pub fn car_alarm() -> LearnedModel {
    fixture("car_alarm.json")
}

pub fn faulty_car_alarm() -> LearnedModel {
    fixture("faulty_car_alarm.json")
}

/// Equivalence classes with at least two members, from a brute-force
/// fixed point: repeatedly unite targets of shared `(input, output)` steps
/// of states in one class until nothing changes.
pub fn brute_force_classes(model: &Model, a: StateId, b: StateId) -> Vec<Vec<StateId>> {
    let states = model.reachable();
    let mut class: BTreeMap<StateId, usize> = states.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let unite = |class: &mut BTreeMap<StateId, usize>, x: StateId, y: StateId| -> bool {
        let (cx, cy) = (class[&x], class[&y]);
        if cx == cy {
            return false;
        }
        let (keep, drop) = (cx.min(cy), cx.max(cy));
        for v in class.values_mut() {
            if *v == drop {
                *v = keep;
            }
        }
        true
    };
    unite(&mut class, a, b);
    loop {
        let mut changed = false;
        for &x in &states {
            for &y in &states {
                if x >= y || class[&x] != class[&y] {
                    continue;
                }
                for t in model.state(x).transitions() {
                    if let Some(u) = model.state(y).get(&t.input, &t.output) {
                        changed |= unite(&mut class, t.info.target, u.target);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<StateId>> = BTreeMap::new();
    for (s, c) in class {
        groups.entry(c).or_default().insert(s);
    }
    let mut out: Vec<Vec<StateId>> = groups
        .into_values()
        .filter(|g| g.len() > 1)
        .map(|g| g.into_iter().collect())
        .collect();
    out.sort();
    out
}

/// Random Mealy trace set over a small alphabet; shared prefixes are
/// frequent so implied merges occur.
pub fn random_mealy_traces(rng: &mut impl rand::Rng, count: usize, max_len: usize) -> TraceSet {
    let inputs = ["a", "b"];
    let outputs = ["0", "1"];
    let traces = (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let s = (0..len)
                .map(|_| {
                    (
                        sym(inputs[rng.gen_range(0..inputs.len())]),
                        sym(outputs[rng.gen_range(0..outputs.len())]),
                    )
                })
                .collect();
            IoTrace::mealy(s)
        })
        .collect();
    TraceSet::IoTraces(traces)
}
