//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//! Run with `cargo test -p redblue --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redblue::engine::{Event, Learned};
use redblue::extraction::{is_isomorphic, StateEntry, TransitionEntry};
use redblue::ingestion::AbbadingoSample;
use redblue::sampling::{exhaustive_traces, random_dfa, random_mealy, random_moore, sample_traces, SamplingConfig};
use redblue::scoring::{binomial_upper_tail, noisy_score_from_counts, NoisyParams, Rpni};
use redblue::*;
use statrs::distribution::{Binomial, DiscreteCDF};

const MEALY_DET: BehaviorConfig = BehaviorConfig::new(OutputBehavior::Mealy, TransitionBehavior::Deterministic);
const MEALY_ND: BehaviorConfig = BehaviorConfig::new(OutputBehavior::Mealy, TransitionBehavior::Nondeterministic);

const GOLDEN_TIME_LIMIT: Duration = Duration::from_secs(1);
const RPNI_TIME_LIMIT: Duration = Duration::from_secs(10);
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(30);
const PERFORMANCE_TIME_LIMIT: Duration = Duration::from_secs(300);
const PROBABILITY_TOLERANCE: f64 = 0.03;
const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;
const BINOMIAL_TOLERANCE: f64 = 1e-9;
const FAULTY_STATE_RANGE: std::ops::RangeInclusive<usize> = 6..=8;
const TRUE_FAULTY_STATES: usize = 7;
const LOW_DATA_SEEDS: u64 = 10;
const LOW_DATA_MIN_EDSM_WINS: usize = 7;
const NOISY_SEEDS: u64 = 10;
const NOISY_MIN_SUCCESSES: usize = 9;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn learn(
    algorithm: Algorithm,
    data: &TraceSet,
    transition: Option<TransitionBehavior>,
    params: Parameters,
) -> Result<LearnedModel, String> {
    let mut learner = Learner::new(algorithm, data, None, transition, params, Flags::default()).map_err(|e| e.to_string())?;
    learner.run(data, None).map(|o| o.model).map_err(|e| e.to_string())
}

fn edge(source: u32, input: &str, output: &str, target: u32) -> TransitionEntry {
    TransitionEntry {
        source,
        input: sym(input),
        output: sym(output),
        target,
        probability: None,
        count: None,
    }
}

fn mealy_model(states: u32, transitions: Vec<TransitionEntry>) -> LearnedModel {
    LearnedModel {
        family: Family::MealyMachine,
        initial: 0,
        states: (0..states).map(|id| StateEntry { id, output: None }).collect(),
        transitions,
    }
}

fn c1_golden_trace() -> Check {
    let started = Instant::now();
    let data = red_blue_example();
    let mut log = EventLog::new();
    let mut engine = StateMerging::new(EngineConfig::new(MEALY_DET, Rpni));
    let (learned, _) = engine.run(&data, Some(&mut log), true).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let decisions: Vec<String> = log
        .decisions()
        .map(|e| match e {
            Event::Promoted { state } => format!("promote(q{})", state.0 + 1),
            Event::Merged { red, blue, .. } => format!("merge(q{},q{})", red.0 + 1, blue.0 + 1),
            _ => unreachable!(),
        })
        .collect();
    let expected = ["promote(q2)", "merge(q1,q3)", "merge(q2,q4)", "merge(q1,q6)"];
    ensure(decisions == expected, || format!("events {decisions:?}"))?;
    let Learned::Automaton(model) = learned else {
        return Err("expected an automaton".into());
    };
    let target = mealy_model(
        2,
        vec![edge(0, "x", "a", 1), edge(0, "y", "b", 0), edge(1, "x", "a", 1), edge(1, "y", "a", 0)],
    );
    ensure(is_isomorphic(&model, &target, 0.0), || format!("final model {}", model.to_json()))?;
    ensure(elapsed < GOLDEN_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:?}", decisions.join(" ")))
}

fn c2_partition_example() -> Check {
    let pta = build_pta(&partition_example(), MEALY_DET).map_err(|e| e.to_string())?;
    let mut config = EngineConfig::new(MEALY_DET, Rpni);
    let eval = try_merge(&pta, None, StateId(0), StateId(1), &mut config).map_err(|e| e.to_string())?;
    let partition = eval.partition().ok_or("merge rejected")?;
    let classes: Vec<Vec<u32>> = partition
        .classes()
        .into_iter()
        .map(|c| c.into_iter().map(|s| s.0 + 1).collect())
        .collect();
    ensure(classes == vec![vec![1, 2, 4, 5], vec![3, 6]], || format!("classes {classes:?}"))?;
    let mut merged = pta.clone();
    apply_merge(&mut merged, partition).map_err(|e| e.to_string())?;
    let model = to_automaton(&merged, MEALY_DET, None).map_err(|e| e.to_string())?;
    let target = mealy_model(2, vec![edge(0, "x", "a", 0), edge(0, "y", "b", 1)]);
    ensure(is_isomorphic(&model, &target, 0.0), || format!("merged model {}", model.to_json()))?;
    Ok(format!("p1={:?} p2={:?}", classes[0], classes[1]))
}

fn c3_rpni_recovery() -> Check {
    let reference = car_alarm();
    let data = exhaustive_traces(&reference, 8);
    let started = Instant::now();
    let model = learn(Algorithm::Rpni, &data, None, Parameters::default())?;
    let elapsed = started.elapsed();
    ensure(model.family == Family::MooreMachine, || format!("family {}", model.family))?;
    ensure(is_isomorphic(&model, &reference, 0.0), || format!("learned {} states", model.size()))?;
    ensure(elapsed < RPNI_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{} traces, {} states in {elapsed:?}", data.len(), model.size()))
}

fn sample(model: &LearnedModel, count: usize, seed: u64, noise: f64) -> TraceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_traces(model, SamplingConfig::new(count, 10, 20).with_noise(noise), &mut rng).expect("sampling succeeds")
}

/// Probability of output `A` on `d` in every state whose `d` distribution
/// has two outcomes.
fn faulty_probabilities(model: &LearnedModel) -> Vec<f64> {
    let index = model.index();
    (0..model.size() as u32)
        .filter_map(|s| {
            let out: Vec<_> = index.outgoing(s, &sym("d")).collect();
            (out.len() == 2).then(|| {
                out.iter()
                    .find(|t| t.output.as_str() == "A")
                    .and_then(|t| t.probability)
                    .unwrap_or(f64::NAN)
            })
        })
        .collect()
}

fn c4_ioalergia_convergence() -> Check {
    let data = sample(&faulty_car_alarm(), 20_000, 4, 0.0);
    let model = learn(Algorithm::IoAlergia, &data, None, Parameters::default())?;
    ensure(model.family == Family::Mdp, || format!("family {}", model.family))?;
    ensure(FAULTY_STATE_RANGE.contains(&model.size()), || format!("{} states", model.size()))?;
    let faulty = faulty_probabilities(&model);
    ensure(!faulty.is_empty(), || "no probabilistic d transition learned".into())?;
    ensure(
        faulty.iter().all(|p| (p - 0.9).abs() <= PROBABILITY_TOLERANCE),
        || format!("P(A | d) = {faulty:?}"),
    )?;
    Ok(format!("{} states, P(A|d)={:?}", model.size(), faulty))
}

fn c5_low_data() -> Check {
    let reference = faulty_car_alarm();
    let mut rows = Vec::new();
    let mut under_merged = 0;
    let mut edsm_wins = 0;
    for seed in 0..LOW_DATA_SEEDS {
        let data = sample(&reference, 200, 500 + seed, 0.0);
        let ioa = learn(Algorithm::IoAlergia, &data, None, Parameters::default())?.size();
        let edsm = learn(Algorithm::IoAlergiaEdsm, &data, None, Parameters::default())?.size();
        under_merged += usize::from(ioa < TRUE_FAULTY_STATES);
        edsm_wins += usize::from(edsm > ioa);
        rows.push(format!("{ioa}/{edsm}"));
    }
    let detail = format!(
        "ioalergia/ioalergia-edsm states per seed [{}]; ioalergia < {TRUE_FAULTY_STATES} in {under_merged}/{LOW_DATA_SEEDS}; edsm larger in {edsm_wins}/{LOW_DATA_SEEDS}",
        rows.join(" ")
    );
    ensure(
        under_merged == LOW_DATA_SEEDS as usize && edsm_wins >= LOW_DATA_MIN_EDSM_WINS,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn c6_noisy() -> Check {
    let reference = car_alarm();
    let params = Parameters {
        noisy: NoisyParams::new(0.01, 0.05).map_err(|e| e.to_string())?,
        ..Parameters::default()
    };
    let mut successes = 0;
    let mut sizes = Vec::new();
    for seed in 0..NOISY_SEEDS {
        let data = sample(&reference, 2000, 900 + seed, 0.01);
        let model = learn(Algorithm::Noisy, &data, None, params.clone())?;
        sizes.push(model.size());
        successes += usize::from(model.family == Family::MooreMachine && is_isomorphic(&model, &reference, 0.0));
    }
    let detail = format!("{successes}/{NOISY_SEEDS} isomorphic, sizes {sizes:?}");
    ensure(successes >= NOISY_MIN_SUCCESSES, || detail.clone())?;
    Ok(detail)
}

fn c7_partition_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ptas = 0;
    let mut pairs = 0;
    let mut config = EngineConfig::new(MEALY_ND, Rpni);
    while ptas < 200 {
        let count = rng.gen_range(2..8);
        let data = random_mealy_traces(&mut rng, count, 6);
        let pta = build_pta(&data, MEALY_ND).map_err(|e| e.to_string())?;
        if pta.size() > 30 || pta.size() < 2 {
            continue;
        }
        ptas += 1;
        let states = pta.reachable();
        let mut tried = 0;
        let mut attempts = 0;
        while tried < 3 && attempts < 100 {
            attempts += 1;
            let r = states[rng.gen_range(0..states.len())];
            let b = states[rng.gen_range(1..states.len())];
            let ancestors: Vec<_> = std::iter::successors(Some(r), |&s| pta.state(s).parent()).collect();
            if ancestors.contains(&b) {
                continue;
            }
            tried += 1;
            pairs += 1;
            let eval = try_merge(&pta, None, r, b, &mut config).map_err(|e| e.to_string())?;
            let partition = eval.partition().ok_or("always-accept merge rejected")?;
            let expected = brute_force_classes(&pta, r, b);
            ensure(partition.classes() == expected, || {
                format!("pair ({r},{b}): {:?} vs oracle {expected:?}", partition.classes())
            })?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < ORACLE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{ptas} PTAs, {pairs} candidate pairs in {elapsed:?}"))
}

struct StructureChecker {
    behavior: BehaviorConfig,
    merges: usize,
    violation: Option<String>,
}

impl Instrumentation for StructureChecker {
    fn merge_applied(&mut self, model: &Model, red: StateId, blue: StateId, _: &Partition) {
        self.merges += 1;
        if self.behavior.is_deterministic() && !model.is_deterministic() {
            self.violation.get_or_insert(format!("nondeterministic after merge({red},{blue})"));
        }
        if self.behavior.is_moore() && !model.is_moore() {
            self.violation.get_or_insert(format!("not moore after merge({red},{blue})"));
        }
    }
}

fn property_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = [sym("a"), sym("b"), sym("c")];
    let outputs = [sym("0"), sym("1")];
    let n = rng.gen_range(1..7);
    let moore = rng.gen_bool(0.5);
    let reference = if moore {
        random_moore(n, &inputs, &outputs, &mut rng)
    } else {
        random_mealy(n, &inputs, &outputs, &mut rng)
    };
    let count = rng.gen_range(1..40);
    let data = sample_traces(&reference, SamplingConfig::new(count, 1, 8), &mut rng).map_err(|e| e.to_string())?;

    let output = if moore { OutputBehavior::Moore } else { OutputBehavior::Mealy };
    let algorithm = [Algorithm::Rpni, Algorithm::Edsm][rng.gen_range(0..2)];
    let mut learner = Learner::new(algorithm, &data, Some(output), None, Parameters::default(), Flags::default())
        .map_err(|e| e.to_string())?;
    let mut checker = StructureChecker {
        behavior: learner.behavior(),
        merges: 0,
        violation: None,
    };
    let outcome = learner.run(&data, Some(&mut checker)).map_err(|e| e.to_string())?;
    if let Some(v) = checker.violation {
        return Err(v);
    }
    let index = outcome.model.index();
    let TraceSet::IoTraces(traces) = &data else { unreachable!() };
    for t in traces {
        if !index.accepts_trace(t.initial_output.as_ref(), &t.steps) {
            return Err("deterministic model does not reproduce a training trace".into());
        }
    }

    let noisy = sample_traces(&reference, SamplingConfig::new(count, 1, 8).with_noise(0.2), &mut rng)
        .map_err(|e| e.to_string())?;
    let stochastic = [Algorithm::IoAlergia, Algorithm::IoAlergiaPartition, Algorithm::IoAlergiaEdsm][rng.gen_range(0..3)];
    let model = learn(stochastic, &noisy, None, Parameters::default())?;
    let mut sums: std::collections::BTreeMap<(u32, &Symbol), f64> = Default::default();
    for t in &model.transitions {
        *sums.entry((t.source, &t.input)).or_default() += t.probability.ok_or("missing probability")?;
    }
    for ((s, i), sum) in sums {
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(format!("state {s} input {i} sums to {sum}"));
        }
    }
    Ok(())
}

fn c8_property_suites() -> Check {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&proptest::prelude::any::<u64>(), |seed| {
            property_case(seed).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 cases: distributions sum to 1, structure holds after every merge".into())
}

fn c9_binomial_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = NoisyParams::new(0.01, 0.05).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n: u64 = rng.gen_range(0..=1000);
        let k: u64 = rng.gen_range(0..=n);
        let p: f64 = if rng.gen_bool(0.5) { rng.gen_range(1e-4..0.1) } else { rng.gen_range(1e-4..0.9999) };
        let ours = binomial_upper_tail(n, k, p);
        let oracle = if k == 0 {
            1.0
        } else {
            Binomial::new(p, n).map_err(|e| e.to_string())?.sf(k - 1)
        };
        let diff = (ours - oracle).abs();
        worst = worst.max(diff);
        ensure(diff <= BINOMIAL_TOLERANCE, || format!("n={n} k={k} p={p}: {ours} vs {oracle}"))?;
        let exact = binomial_upper_tail(n, k, params.error_rate);
        let expected = if exact < params.threshold { Score::Reject } else { Score::Value(exact) };
        ensure(noisy_score_from_counts(k, n, params) == expected, || format!("score mismatch at n={n} k={k}"))?;
    }
    Ok(format!("10000 inputs, max deviation {worst:.2e}"))
}

fn c10_performance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let inputs: Vec<Symbol> = ["a", "b", "c", "d"].into_iter().map(sym).collect();
    let outputs: Vec<Symbol> = ["0", "1", "2"].into_iter().map(sym).collect();
    let reference = random_mealy(50, &inputs, &outputs, &mut rng);
    let train = sample_traces(&reference, SamplingConfig::new(100_000, 10, 20), &mut rng).map_err(|e| e.to_string())?;
    let held_out = sample_traces(&reference, SamplingConfig::new(10_000, 10, 20), &mut rng).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let model = learn(Algorithm::Rpni, &train, Some(TransitionBehavior::Deterministic), Parameters::default())?;
    let elapsed = started.elapsed();
    ensure(elapsed < PERFORMANCE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    let index = model.index();
    let TraceSet::IoTraces(traces) = &held_out else { unreachable!() };
    let mismatched = traces.iter().filter(|t| !index.accepts_trace(None, &t.steps)).count();
    ensure(mismatched == 0, || format!("{mismatched} held-out traces disagree; {} states", model.size()))?;
    Ok(format!("{} training symbols, {} states in {elapsed:?}", train.symbol_count(), model.size()))
}

fn c11_abbadingo() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dfa = random_dfa(8, 2, &mut rng);
    let TraceSet::LabeledWords(words) =
        sample_traces(&dfa, SamplingConfig::new(500, 0, 14), &mut rng).map_err(|e| e.to_string())?
    else {
        return Err("DFA sampling yields labelled words".into());
    };
    let sample = AbbadingoSample {
        alphabet_size: 2,
        words: words
            .iter()
            .map(|w| (w.label.as_str() == "1", w.word.iter().map(|s| s.as_str().parse().unwrap()).collect()))
            .collect(),
    };
    let text = sample.to_text();
    let reparsed = AbbadingoSample::parse(&text).map_err(|e| e.to_string())?;
    ensure(reparsed.to_text() == text, || "serialisation is not byte-identical".into())?;
    ensure(reparsed == sample, || "parsed sample differs".into())?;

    let data = parse_traces(&text, None).map_err(|e| e.to_string())?;
    ensure(data.kind() == TraceKind::LabeledWords, || format!("detected {}", data.kind()))?;
    let model = learn(Algorithm::Rpni, &data, None, Parameters::default())?;
    ensure(model.family == Family::Dfa, || format!("family {}", model.family))?;
    let index = model.index();
    let mut inconsistent = 0;
    for (label, word) in &sample.words {
        let inputs: Vec<Symbol> = word.iter().map(|s| sym(&s.to_string())).collect();
        let accepted = index
            .state_after(&inputs)
            .and_then(|s| model.state_output(s))
            .is_some_and(|o| o.as_str() == redblue::extraction::ACCEPT);
        inconsistent += usize::from(accepted != *label);
    }
    ensure(inconsistent == 0, || format!("{inconsistent} words misclassified"))?;
    Ok(format!("{} bytes round-tripped, {}-state DFA consistent with 500 words", text.len(), model.size()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 11] = [
        (1, "red-blue golden trace", c1_golden_trace),
        (2, "partition example", c2_partition_example),
        (3, "RPNI recovers the car alarm", c3_rpni_recovery),
        (4, "IOAlergia convergence", c4_ioalergia_convergence),
        (5, "low-data comparison", c5_low_data),
        (6, "noisy deterministic learning", c6_noisy),
        (7, "partition oracle equivalence", c7_partition_oracle),
        (8, "normalisation and structure properties", c8_property_suites),
        (9, "binomial tail oracle", c9_binomial_oracle),
        (10, "performance smoke", c10_performance),
        (11, "Abbadingo ingestion", c11_abbadingo),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} ({elapsed:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({elapsed:.2}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
