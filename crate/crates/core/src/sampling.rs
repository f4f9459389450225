//! Trace generation from reference models.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::automata::Symbol;
use crate::error::{Error, Result};
use crate::extraction::{Family, LearnedModel, ModelIndex, StateEntry, TransitionEntry, ACCEPT, REJECT};
use crate::ingestion::{IoTrace, LabeledWord, TraceSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingConfig {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of replacing a step output by a different one.
    pub noise_rate: f64,
}

impl SamplingConfig {
    pub fn new(count: usize, min_len: usize, max_len: usize) -> Self {
        SamplingConfig {
            count,
            min_len,
            max_len,
            noise_rate: 0.0,
        }
    }

    pub fn with_noise(mut self, rate: f64) -> Self {
        self.noise_rate = rate;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.min_len > self.max_len {
            return Err(Error::InvalidConfig(format!(
                "minimum length {} exceeds maximum length {}",
                self.min_len, self.max_len
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::InvalidConfig(format!("noise rate {} is not a probability", self.noise_rate)));
        }
        Ok(())
    }
}

fn weight(t: &TransitionEntry) -> f64 {
    match (t.probability, t.count) {
        (Some(p), _) => p,
        (None, Some(c)) => c as f64,
        (None, None) => 1.0,
    }
}

fn choose<'a, R: Rng + ?Sized>(options: &[&'a TransitionEntry], rng: &mut R) -> &'a TransitionEntry {
    if options.len() == 1 {
        return options[0];
    }
    let total: f64 = options.iter().map(|t| weight(t)).sum();
    let mut x = rng.gen::<f64>() * total;
    for t in options {
        x -= weight(t);
        if x < 0.0 {
            return t;
        }
    }
    options[options.len() - 1]
}

struct Walker<'a> {
    index: ModelIndex<'a>,
    outputs: Vec<Symbol>,
}

impl<'a> Walker<'a> {
    fn new(model: &'a LearnedModel) -> Self {
        let outputs: BTreeSet<Symbol> = model.transitions.iter().map(|t| t.output.clone()).collect();
        Walker {
            index: model.index(),
            outputs: outputs.into_iter().collect(),
        }
    }

    fn step<R: Rng + ?Sized>(&self, state: u32, rng: &mut R) -> Result<&'a TransitionEntry> {
        let inputs: Vec<&Symbol> = self.index.inputs_of(state).collect();
        let input = *inputs.choose(rng).ok_or(Error::DeadEnd(state as usize))?;
        let options: Vec<&TransitionEntry> = self.index.outgoing(state, input).collect();
        Ok(choose(&options, rng))
    }

    fn flip<R: Rng + ?Sized>(&self, output: &Symbol, rng: &mut R) -> Symbol {
        let others: Vec<&Symbol> = self.outputs.iter().filter(|o| *o != output).collect();
        others.choose(rng).map_or_else(|| output.clone(), |o| (*o).clone())
    }
}

/// Random traces: uniform length in `[min_len, max_len]`, uniform choice
/// among the inputs defined in the current state, outputs drawn from the
/// model's distribution. Moore traces carry the initial output; DFAs yield
/// labelled words and Markov chains yield observation sequences.
pub fn sample_traces<R: Rng + ?Sized>(model: &LearnedModel, config: SamplingConfig, rng: &mut R) -> Result<TraceSet> {
    config.validate()?;
    let walker = Walker::new(model);
    let initial_output = model.state_output(model.initial).cloned();
    let mut io = Vec::with_capacity(config.count);
    let mut words = Vec::new();
    let mut observations = Vec::new();
    for _ in 0..config.count {
        let len = rng.gen_range(config.min_len..=config.max_len);
        let mut state = model.initial;
        let mut steps = Vec::with_capacity(len);
        for _ in 0..len {
            let t = walker.step(state, rng)?;
            let mut output = t.output.clone();
            if config.noise_rate > 0.0 && rng.gen_bool(config.noise_rate) {
                output = walker.flip(&output, rng);
            }
            steps.push((t.input.clone(), output));
            state = t.target;
        }
        match model.family {
            Family::Dfa => words.push(LabeledWord {
                word: steps.into_iter().map(|(i, _)| i).collect(),
                label: dfa_label(model, state),
            }),
            Family::MarkovChain => {
                let mut obs = Vec::with_capacity(len + 1);
                obs.extend(initial_output.clone());
                obs.extend(steps.into_iter().map(|(_, o)| o));
                observations.push(obs);
            }
            _ => io.push(IoTrace {
                initial_output: initial_output.clone(),
                steps,
            }),
        }
    }
    Ok(match model.family {
        Family::Dfa => TraceSet::LabeledWords(words),
        Family::MarkovChain => TraceSet::Observations(observations),
        _ => TraceSet::IoTraces(io),
    })
}

fn dfa_label(model: &LearnedModel, state: u32) -> Symbol {
    let accepted = model.state_output(state).is_some_and(|o| o.as_str() == ACCEPT);
    Symbol::new(if accepted { "1" } else { "0" })
}

/// Every trace of length `1..=max_len` the model can produce, in
/// lexicographic order of `(input, output)` steps.
pub fn exhaustive_traces(model: &LearnedModel, max_len: usize) -> TraceSet {
    let index = model.index();
    let initial_output = model.state_output(model.initial).cloned();
    let mut io = Vec::new();
    let mut words = Vec::new();
    let mut observations = Vec::new();
    let mut stack: Vec<(u32, Vec<(Symbol, Symbol)>)> = vec![(model.initial, Vec::new())];
    let mut emitted = Vec::new();
    while let Some((state, path)) = stack.pop() {
        if !path.is_empty() {
            emitted.push((state, path.clone()));
        }
        if path.len() == max_len {
            continue;
        }
        let mut next = Vec::new();
        for input in index.inputs_of(state) {
            for t in index.outgoing(state, input) {
                let mut p = path.clone();
                p.push((t.input.clone(), t.output.clone()));
                next.push((t.target, p));
            }
        }
        stack.extend(next.into_iter().rev());
    }
    if model.family == Family::Dfa {
        words.push(LabeledWord {
            word: Vec::new(),
            label: dfa_label(model, model.initial),
        });
    }
    for (state, steps) in emitted {
        match model.family {
            Family::Dfa => words.push(LabeledWord {
                word: steps.into_iter().map(|(i, _)| i).collect(),
                label: dfa_label(model, state),
            }),
            Family::MarkovChain => {
                let mut obs = Vec::new();
                obs.extend(initial_output.clone());
                obs.extend(steps.into_iter().map(|(_, o)| o));
                observations.push(obs);
            }
            _ => io.push(IoTrace {
                initial_output: initial_output.clone(),
                steps,
            }),
        }
    }
    match model.family {
        Family::Dfa => TraceSet::LabeledWords(words),
        Family::MarkovChain => TraceSet::Observations(observations),
        _ => TraceSet::IoTraces(io),
    }
}

/// A random complete deterministic Mealy machine with every state reachable.
pub fn random_mealy<R: Rng + ?Sized>(states: usize, inputs: &[Symbol], outputs: &[Symbol], rng: &mut R) -> LearnedModel {
    random_deterministic(Family::MealyMachine, states, inputs, outputs, rng)
}

/// A random complete Moore machine with every state reachable.
pub fn random_moore<R: Rng + ?Sized>(states: usize, inputs: &[Symbol], outputs: &[Symbol], rng: &mut R) -> LearnedModel {
    random_deterministic(Family::MooreMachine, states, inputs, outputs, rng)
}

/// A random complete DFA over the numeric symbols `0..alphabet_size` with
/// every state reachable.
pub fn random_dfa<R: Rng + ?Sized>(states: usize, alphabet_size: u32, rng: &mut R) -> LearnedModel {
    let inputs: Vec<Symbol> = (0..alphabet_size).map(|a| Symbol::new(a.to_string())).collect();
    let labels = [Symbol::new(ACCEPT), Symbol::new(REJECT)];
    random_deterministic(Family::Dfa, states, &inputs, &labels, rng)
}

fn random_deterministic<R: Rng + ?Sized>(
    family: Family,
    states: usize,
    inputs: &[Symbol],
    outputs: &[Symbol],
    rng: &mut R,
) -> LearnedModel {
    assert!(states >= 1 && !inputs.is_empty() && !outputs.is_empty());
    let n_inputs = inputs.len();
    let mut delta: Vec<Vec<Option<u32>>> = vec![vec![None; n_inputs]; states];
    for k in 1..states {
        loop {
            let p = rng.gen_range(0..k);
            let free: Vec<usize> = (0..n_inputs).filter(|&i| delta[p][i].is_none()).collect();
            if let Some(&i) = free.choose(rng) {
                delta[p][i] = Some(k as u32);
                break;
            }
        }
    }
    for row in delta.iter_mut() {
        for slot in row.iter_mut().filter(|s| s.is_none()) {
            *slot = Some(rng.gen_range(0..states as u32));
        }
    }
    let moore = family.is_moore();
    let state_outputs: Vec<Option<Symbol>> = (0..states)
        .map(|_| moore.then(|| outputs.choose(rng).expect("outputs non-empty").clone()))
        .collect();
    let mut transitions = Vec::with_capacity(states * n_inputs);
    for (source, row) in delta.iter().enumerate() {
        for (i, target) in row.iter().enumerate() {
            let target = target.expect("complete");
            let output = match &state_outputs[target as usize] {
                Some(o) => o.clone(),
                None => outputs.choose(rng).expect("outputs non-empty").clone(),
            };
            transitions.push(TransitionEntry {
                source: source as u32,
                input: inputs[i].clone(),
                output,
                target,
                probability: None,
                count: None,
            });
        }
    }
    transitions.sort_by(|a, b| (a.source, &a.input).cmp(&(b.source, &b.input)));
    LearnedModel {
        family,
        initial: 0,
        states: state_outputs
            .into_iter()
            .enumerate()
            .map(|(id, output)| StateEntry { id: id as u32, output })
            .collect(),
        transitions,
    }
}
