//! Typed automata extracted from the internal representation, with JSON and
//! DOT serialisation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::automata::{
    deterministic_witness, moore_witness, normalize, BehaviorConfig, OutputBehavior, StateId, StateLookup, Symbol,
    TransitionBehavior,
};
use crate::error::{Error, Result};

pub const ACCEPT: &str = "accept";
pub const REJECT: &str = "reject";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    MooreMachine,
    Dfa,
    #[serde(rename = "NDMooreMachine")]
    NdMooreMachine,
    Mdp,
    MarkovChain,
    MealyMachine,
    Onfsm,
    StochasticMealyMachine,
    /// The internal frequency automaton with raw counts.
    #[serde(rename = "iofa")]
    Iofa,
}

impl Family {
    pub fn for_behavior(behavior: BehaviorConfig) -> Self {
        use OutputBehavior::*;
        use TransitionBehavior::*;
        match (behavior.output, behavior.transition) {
            (Moore, Deterministic) => Family::MooreMachine,
            (Moore, Nondeterministic) => Family::NdMooreMachine,
            (Moore, Stochastic) => Family::Mdp,
            (Mealy, Deterministic) => Family::MealyMachine,
            (Mealy, Nondeterministic) => Family::Onfsm,
            (Mealy, Stochastic) => Family::StochasticMealyMachine,
        }
    }

    pub fn is_moore(self) -> bool {
        matches!(
            self,
            Family::MooreMachine | Family::Dfa | Family::NdMooreMachine | Family::Mdp | Family::MarkovChain
        )
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Family::Mdp | Family::MarkovChain | Family::StochasticMealyMachine)
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, Family::MooreMachine | Family::Dfa | Family::MealyMachine)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_value(self).expect("family serialises");
        f.write_str(text.as_str().expect("family is a string"))
    }
}

/// Alternative families that are views on a Table cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilyOverride {
    /// Moore deterministic with binary output; states whose output equals
    /// `accept` accept, all others reject.
    Dfa { accept: Symbol },
    /// Moore stochastic with a single input.
    MarkovChain,
}

impl FamilyOverride {
    pub fn dfa() -> Self {
        FamilyOverride::Dfa { accept: Symbol::new("1") }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub source: u32,
    pub input: Symbol,
    pub output: Symbol,
    pub target: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

/// An extracted automaton. State ids are dense and numbered breadth-first
/// from the initial state; transitions are sorted by `(source, input, output)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnedModel {
    pub family: Family,
    pub initial: u32,
    pub states: Vec<StateEntry>,
    pub transitions: Vec<TransitionEntry>,
}

fn check_structure(view: &impl StateLookup, behavior: BehaviorConfig) -> Result<()> {
    if behavior.is_deterministic() {
        if let Some(witness) = deterministic_witness(view) {
            return Err(Error::StructureViolation {
                predicate: "determinism".into(),
                witness,
            });
        }
    }
    if behavior.is_moore() {
        if let Some(witness) = moore_witness(view) {
            return Err(Error::StructureViolation {
                predicate: "moore property".into(),
                witness,
            });
        }
    }
    Ok(())
}

fn numbering(view: &impl StateLookup) -> (Vec<StateId>, HashMap<StateId, u32>) {
    let order = view.reachable();
    let index = order.iter().enumerate().map(|(k, &id)| (id, k as u32)).collect();
    (order, index)
}

/// Converts the internal model into the automaton family selected by
/// `behavior`, or by `family_override`.
pub fn to_automaton(
    view: &impl StateLookup,
    behavior: BehaviorConfig,
    family_override: Option<FamilyOverride>,
) -> Result<LearnedModel> {
    check_structure(view, behavior)?;
    let family = match &family_override {
        None => Family::for_behavior(behavior),
        Some(FamilyOverride::Dfa { .. }) => {
            if behavior != BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Deterministic) {
                return Err(Error::InvalidConfig(format!("a DFA needs moore/deterministic behavior, got {behavior}")));
            }
            Family::Dfa
        }
        Some(FamilyOverride::MarkovChain) => {
            if behavior != BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Stochastic) {
                return Err(Error::InvalidConfig(format!(
                    "a Markov chain needs moore/stochastic behavior, got {behavior}"
                )));
            }
            Family::MarkovChain
        }
    };

    let (order, index) = numbering(view);
    if family == Family::MarkovChain {
        let mut inputs = BTreeSet::new();
        for &id in &order {
            for t in view.lookup(id).transitions() {
                inputs.insert(&t.input);
                if inputs.len() > 1 {
                    return Err(Error::StructureViolation {
                        predicate: "single input".into(),
                        witness: id,
                    });
                }
            }
        }
    }

    let accept = match &family_override {
        Some(FamilyOverride::Dfa { accept }) => Some(accept.clone()),
        _ => None,
    };
    let binary = |out: Option<&Symbol>| -> Symbol {
        let accepted = out.is_some() && out == accept.as_ref();
        Symbol::new(if accepted { ACCEPT } else { REJECT })
    };
    let state_output = |id: StateId| -> Option<Symbol> {
        if !family.is_moore() {
            return None;
        }
        let out = view.lookup(id).output();
        match family {
            Family::Dfa => Some(binary(out)),
            _ => out.cloned(),
        }
    };

    let states = order
        .iter()
        .map(|&id| StateEntry {
            id: index[&id],
            output: state_output(id),
        })
        .collect();

    let probabilities = if family.is_stochastic() {
        Some(normalize(view)?)
    } else {
        None
    };
    let mut transitions = Vec::new();
    for &id in &order {
        for t in view.lookup(id).transitions() {
            let output = match family {
                Family::Dfa => binary(view.lookup(t.info.target).output()),
                _ if family.is_moore() => view.lookup(t.info.target).output().cloned().unwrap_or_else(|| t.output.clone()),
                _ => t.output.clone(),
            };
            let probability = probabilities.as_ref().map(|p| {
                p[&(id, t.input.clone())]
                    .iter()
                    .find(|o| o.output == t.output)
                    .expect("outcome present")
                    .probability
            });
            transitions.push(TransitionEntry {
                source: index[&id],
                input: t.input.clone(),
                output,
                target: index[&t.info.target],
                probability,
                count: None,
            });
        }
    }
    let model = LearnedModel {
        family,
        initial: 0,
        states,
        transitions,
    };
    Ok(model.sorted())
}

/// The internal model in the same schema, with raw counts.
pub fn to_iofa(view: &impl StateLookup) -> LearnedModel {
    let (order, index) = numbering(view);
    let states = order
        .iter()
        .map(|&id| StateEntry {
            id: index[&id],
            output: view.lookup(id).output().cloned(),
        })
        .collect();
    let transitions = order
        .iter()
        .flat_map(|&id| {
            let index = &index;
            view.lookup(id).transitions().iter().map(move |t| TransitionEntry {
                source: index[&id],
                input: t.input.clone(),
                output: t.output.clone(),
                target: index[&t.info.target],
                probability: None,
                count: Some(t.info.count),
            })
        })
        .collect();
    LearnedModel {
        family: Family::Iofa,
        initial: 0,
        states,
        transitions,
    }
    .sorted()
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

impl LearnedModel {
    fn sorted(mut self) -> Self {
        self.transitions.sort_by(|a, b| {
            (a.source, &a.input, &a.output, a.target).cmp(&(b.source, &b.input, &b.output, b.target))
        });
        self
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn state_output(&self, state: u32) -> Option<&Symbol> {
        self.states.get(state as usize).and_then(|s| s.output.as_ref())
    }

    pub fn inputs(&self) -> BTreeSet<&Symbol> {
        self.transitions.iter().map(|t| &t.input).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialise")
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let model: LearnedModel = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            schema(path, e.into_inner().to_string())
        })?;
        model.validate()?;
        Ok(model)
    }

    /// Checks the invariants of the model's family.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len() as u32;
        if n == 0 {
            return Err(schema("states", "at least one state is required"));
        }
        if self.initial >= n {
            return Err(schema("initial", format!("state {} does not exist", self.initial)));
        }
        for (k, s) in self.states.iter().enumerate() {
            if s.id != k as u32 {
                return Err(schema(format!("states[{k}].id"), format!("expected id {k}, found {}", s.id)));
            }
            if self.family.is_moore() && self.family != Family::Iofa && s.output.is_none() {
                return Err(schema(format!("states[{k}].output"), "moore states need an output"));
            }
            if self.family == Family::Dfa {
                if let Some(out) = &s.output {
                    if out.as_str() != ACCEPT && out.as_str() != REJECT {
                        return Err(schema(format!("states[{k}].output"), "DFA outputs are accept or reject"));
                    }
                }
            }
        }

        let mut groups: BTreeMap<(u32, &Symbol), Vec<usize>> = BTreeMap::new();
        let mut inputs = BTreeSet::new();
        for (k, t) in self.transitions.iter().enumerate() {
            if t.source >= n {
                return Err(schema(format!("transitions[{k}].source"), format!("state {} does not exist", t.source)));
            }
            if t.target >= n {
                return Err(schema(format!("transitions[{k}].target"), format!("state {} does not exist", t.target)));
            }
            if self.family.is_moore() && self.states[t.target as usize].output.as_ref() != Some(&t.output) {
                return Err(schema(
                    format!("transitions[{k}].output"),
                    "output must equal the output of the target state",
                ));
            }
            match (self.family.is_stochastic(), t.probability) {
                (true, None) => return Err(schema(format!("transitions[{k}].probability"), "missing probability")),
                (true, Some(p)) if !(0.0..=1.0).contains(&p) => {
                    return Err(schema(format!("transitions[{k}].probability"), format!("{p} is not a probability")))
                }
                (false, Some(_)) => {
                    return Err(schema(
                        format!("transitions[{k}].probability"),
                        format!("{} transitions carry no probability", self.family),
                    ))
                }
                _ => {}
            }
            inputs.insert(&t.input);
            groups.entry((t.source, &t.input)).or_default().push(k);
        }
        if self.family == Family::MarkovChain && inputs.len() > 1 {
            return Err(schema("transitions", "a Markov chain has a single input"));
        }
        for ((source, input), members) in &groups {
            let first = members[0];
            if self.family.is_deterministic() && members.len() > 1 {
                return Err(schema(
                    format!("transitions[{}]", members[1]),
                    format!("state {source} has several transitions on {input}"),
                ));
            }
            let mut outputs = BTreeSet::new();
            for &k in members {
                if !outputs.insert(&self.transitions[k].output) {
                    return Err(schema(
                        format!("transitions[{k}]"),
                        format!("state {source} has two targets for {input}/{}", self.transitions[k].output),
                    ));
                }
            }
            if self.family.is_stochastic() {
                let sum: f64 = members.iter().filter_map(|&k| self.transitions[k].probability).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(schema(
                        format!("transitions[{first}].probability"),
                        format!("probabilities of state {source} on {input} sum to {sum}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Per state, per input: indices of transitions.
    pub fn index(&self) -> ModelIndex<'_> {
        let mut by_state: Vec<BTreeMap<&Symbol, Vec<usize>>> = vec![BTreeMap::new(); self.states.len()];
        for (k, t) in self.transitions.iter().enumerate() {
            by_state[t.source as usize].entry(&t.input).or_default().push(k);
        }
        ModelIndex { model: self, by_state }
    }
}

/// Lookup structure for replaying traces.
pub struct ModelIndex<'a> {
    model: &'a LearnedModel,
    by_state: Vec<BTreeMap<&'a Symbol, Vec<usize>>>,
}

impl<'a> ModelIndex<'a> {
    pub fn model(&self) -> &'a LearnedModel {
        self.model
    }

    pub fn outgoing(&self, state: u32, input: &Symbol) -> impl Iterator<Item = &'a TransitionEntry> + '_ {
        self.by_state[state as usize]
            .get(input)
            .into_iter()
            .flatten()
            .map(move |&k| &self.model.transitions[k])
    }

    pub fn inputs_of(&self, state: u32) -> impl Iterator<Item = &'a Symbol> + '_ {
        self.by_state[state as usize].keys().copied()
    }

    /// The unique successor on `(input, output)`.
    pub fn step(&self, state: u32, input: &Symbol, output: &Symbol) -> Option<u32> {
        self.outgoing(state, input).find(|t| &t.output == output).map(|t| t.target)
    }

    /// Whether the model can produce the trace.
    pub fn accepts_trace(&self, initial_output: Option<&Symbol>, steps: &[(Symbol, Symbol)]) -> bool {
        if let Some(out) = initial_output {
            if self.model.state_output(self.model.initial) != Some(out) {
                return false;
            }
        }
        let mut state = self.model.initial;
        for (i, o) in steps {
            match self.step(state, i, o) {
                Some(next) => state = next,
                None => return false,
            }
        }
        true
    }

    /// Outputs of a deterministic model for an input word; `None` once an
    /// input is undefined.
    pub fn run_deterministic(&self, inputs: &[Symbol]) -> Option<Vec<Symbol>> {
        let mut state = self.model.initial;
        let mut outputs = Vec::with_capacity(inputs.len());
        for i in inputs {
            let t = self.outgoing(state, i).next()?;
            outputs.push(t.output.clone());
            state = t.target;
        }
        Some(outputs)
    }

    /// The state reached by a deterministic model on an input word.
    pub fn state_after(&self, inputs: &[Symbol]) -> Option<u32> {
        let mut state = self.model.initial;
        for i in inputs {
            state = self.outgoing(state, i).next()?.target;
        }
        Some(state)
    }
}

/// Structural isomorphism preserving the initial state, outputs and
/// transition labels. Probabilities must agree within `tolerance`; counts
/// are ignored.
pub fn is_isomorphic(a: &LearnedModel, b: &LearnedModel, tolerance: f64) -> bool {
    if a.family != b.family || a.states.len() != b.states.len() || a.transitions.len() != b.transitions.len() {
        return false;
    }
    let (ia, ib) = (a.index(), b.index());
    let mut map: HashMap<u32, u32> = HashMap::new();
    let mut used: HashMap<u32, u32> = HashMap::new();
    let mut queue = VecDeque::from([(a.initial, b.initial)]);
    map.insert(a.initial, b.initial);
    used.insert(b.initial, a.initial);
    while let Some((x, y)) = queue.pop_front() {
        if a.state_output(x) != b.state_output(y) {
            return false;
        }
        let inputs_x: Vec<_> = ia.inputs_of(x).collect();
        let inputs_y: Vec<_> = ib.inputs_of(y).collect();
        if inputs_x != inputs_y {
            return false;
        }
        for input in inputs_x {
            let tx: Vec<_> = ia.outgoing(x, input).collect();
            let ty: Vec<_> = ib.outgoing(y, input).collect();
            if tx.len() != ty.len() {
                return false;
            }
            for t in tx {
                let Some(u) = ty.iter().find(|u| u.output == t.output) else {
                    return false;
                };
                match (t.probability, u.probability) {
                    (Some(p), Some(q)) if (p - q).abs() > tolerance => return false,
                    (Some(_), None) | (None, Some(_)) => return false,
                    _ => {}
                }
                match (map.get(&t.target), used.get(&u.target)) {
                    (Some(&m), _) if m != u.target => return false,
                    (None, Some(_)) => return false,
                    (None, None) => {
                        map.insert(t.target, u.target);
                        used.insert(u.target, t.target);
                        queue.push_back((t.target, u.target));
                    }
                    _ => {}
                }
            }
        }
    }
    map.len() == a.states.len()
}

/// Rendering options for [`to_dot`].
#[derive(Clone, Debug, Default)]
pub struct StyleOptions {
    /// Fill colour per state id.
    pub node_colors: BTreeMap<u32, String>,
    /// Append raw counts to edge labels when present.
    pub show_counts: bool,
    /// Omit probabilities from stochastic edges.
    pub hide_probabilities: bool,
}

impl StyleOptions {
    /// Marks red and blue states with the respective colours.
    pub fn red_blue(red: impl IntoIterator<Item = u32>, blue: impl IntoIterator<Item = u32>) -> Self {
        let mut node_colors = BTreeMap::new();
        node_colors.extend(red.into_iter().map(|s| (s, "red".to_string())));
        node_colors.extend(blue.into_iter().map(|s| (s, "lightblue".to_string())));
        StyleOptions {
            node_colors,
            ..StyleOptions::default()
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering of a model. Output is a pure function of the model.
pub fn to_dot(model: &LearnedModel, style: &StyleOptions) -> String {
    let mut out = String::from("digraph {\n  __start [shape=none,label=\"\"];\n");
    for s in &model.states {
        let label = match &s.output {
            Some(o) => format!("s{}|{}", s.id, o),
            None => format!("s{}", s.id),
        };
        let shape = if model.family == Family::Dfa && s.output.as_ref().is_some_and(|o| o.as_str() == ACCEPT) {
            "doublecircle"
        } else {
            "circle"
        };
        let color = style
            .node_colors
            .get(&s.id)
            .map(|c| format!(",style=filled,fillcolor=\"{}\"", escape(c)))
            .unwrap_or_default();
        let _ = writeln!(out, "  s{} [shape={shape},label=\"{}\"{color}];", s.id, escape(&label));
    }
    let _ = writeln!(out, "  __start -> s{};", model.initial);
    let input_only = matches!(model.family, Family::MooreMachine | Family::Dfa | Family::MarkovChain)
        && !model.family.is_stochastic();
    for t in &model.transitions {
        let mut label = if input_only {
            t.input.to_string()
        } else {
            format!("{}/{}", t.input, t.output)
        };
        if let (Some(p), false) = (t.probability, style.hide_probabilities) {
            let _ = write!(label, ":{p:.4}");
        }
        if let (Some(c), true) = (t.count, style.show_counts) {
            let _ = write!(label, " #{c}");
        }
        let _ = writeln!(out, "  s{} -> s{} [label=\"{}\"];", t.source, t.target, escape(&label));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{Model, TransitionInfo};

    fn sym(s: &str) -> Symbol {
        Symbol::new(s)
    }

    fn mealy_two_state() -> Model {
        let mut m = Model::with_root(None);
        let q1 = m.add_state(None);
        m.set_transition(m.root(), sym("x"), sym("a"), TransitionInfo::new(q1, 1));
        m.set_transition(q1, sym("y"), sym("b"), TransitionInfo::new(m.root(), 1));
        m
    }

    #[test]
    fn mealy_extraction_and_dot() {
        let m = mealy_two_state();
        let behavior = BehaviorConfig::new(OutputBehavior::Mealy, TransitionBehavior::Deterministic);
        let learned = to_automaton(&m, behavior, None).unwrap();
        assert_eq!(learned.family, Family::MealyMachine);
        assert_eq!(learned.size(), 2);
        let dot = to_dot(&learned, &StyleOptions::default());
        assert!(dot.starts_with("digraph {\n  __start [shape=none,label=\"\"];"));
        assert!(dot.contains("__start -> s0;"));
        assert!(dot.contains("label=\"x/a\""));
        assert!(dot.contains("label=\"y/b\""));
        assert_eq!(dot, to_dot(&learned, &StyleOptions::default()));
    }

    #[test]
    fn single_state_dot() {
        let m = Model::with_root(Some(sym("N")));
        let learned = to_automaton(&m, BehaviorConfig::default(), None).unwrap();
        let dot = to_dot(&learned, &StyleOptions::default());
        assert!(dot.contains("s0 [shape=circle,label=\"s0|N\"];"));
        assert_eq!(dot.matches("->").count(), 1);
    }

    #[test]
    fn stochastic_probabilities() {
        let mut m = Model::with_root(None);
        let a = m.add_state(None);
        let b = m.add_state(None);
        m.set_transition(m.root(), sym("x"), sym("a"), TransitionInfo::new(a, 3));
        m.set_transition(m.root(), sym("x"), sym("b"), TransitionInfo::new(b, 1));
        let behavior = BehaviorConfig::new(OutputBehavior::Mealy, TransitionBehavior::Stochastic);
        let learned = to_automaton(&m, behavior, None).unwrap();
        assert_eq!(learned.family, Family::StochasticMealyMachine);
        let probs: Vec<_> = learned.transitions.iter().map(|t| t.probability.unwrap()).collect();
        assert_eq!(probs, vec![0.75, 0.25]);
        let dot = to_dot(&learned, &StyleOptions::default());
        assert!(dot.contains("x/a:0.7500"));
        assert!(dot.contains("x/b:0.2500"));
    }

    #[test]
    fn determinism_violation_reported() {
        let mut m = Model::with_root(None);
        let a = m.add_state(None);
        m.set_transition(m.root(), sym("x"), sym("a"), TransitionInfo::new(a, 1));
        m.set_transition(m.root(), sym("x"), sym("b"), TransitionInfo::new(a, 1));
        let behavior = BehaviorConfig::new(OutputBehavior::Mealy, TransitionBehavior::Deterministic);
        let err = to_automaton(&m, behavior, None).unwrap_err();
        assert!(matches!(err, Error::StructureViolation { ref predicate, .. } if predicate == "determinism"));
    }

    #[test]
    fn json_round_trip_and_schema_errors() {
        let learned = to_automaton(&mealy_two_state(), BehaviorConfig::new(OutputBehavior::Mealy, TransitionBehavior::Deterministic), None).unwrap();
        assert_eq!(LearnedModel::from_json(&learned.to_json()).unwrap(), learned);

        let bad = r#"{"family":"Mdp","initial":0,"states":[{"id":0,"output":"a"}],
            "transitions":[{"source":0,"input":"x","output":"a","target":0,"probability":0.9}]}"#;
        let err = LearnedModel::from_json(bad).unwrap_err();
        assert!(matches!(err, Error::Schema { ref path, .. } if path == "transitions[0].probability"), "{err}");

        let typo = r#"{"family":"Mdp","initial":0,"states":[{"id":"zero"}],"transitions":[]}"#;
        let err = LearnedModel::from_json(typo).unwrap_err();
        assert!(matches!(err, Error::Schema { ref path, .. } if path == "states[0].id"), "{err}");
    }
}
