//! Trace formats, format detection and prefix tree construction.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use crate::automata::{BehaviorConfig, Model, OutputBehavior, Predecessor, StateId, Symbol, TransitionBehavior, TransitionInfo, TreeState};
use crate::error::{Error, Result};

/// Synthetic input used for observation sequences: the passage of time.
pub const TICK: &str = "tick";

/// Output attached to prefix tree states whose word carries no label.
pub const UNKNOWN_LABEL: &str = "?";

/// An input/output trace; Moore traces start with the initial output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoTrace {
    pub initial_output: Option<Symbol>,
    pub steps: Vec<(Symbol, Symbol)>,
}

impl IoTrace {
    pub fn mealy(steps: Vec<(Symbol, Symbol)>) -> Self {
        IoTrace {
            initial_output: None,
            steps,
        }
    }

    pub fn moore(initial: Symbol, steps: Vec<(Symbol, Symbol)>) -> Self {
        IoTrace {
            initial_output: Some(initial),
            steps,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// An input word with the single label observed after it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledWord {
    pub word: Vec<Symbol>,
    pub label: Symbol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    IoTraces,
    LabeledWords,
    Observations,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceKind::IoTraces => "io-traces",
            TraceKind::LabeledWords => "abbadingo",
            TraceKind::Observations => "observations",
        })
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "io-traces" | "io_traces" => Ok(TraceKind::IoTraces),
            "abbadingo" | "labeled-words" | "labeled_words" => Ok(TraceKind::LabeledWords),
            "observations" => Ok(TraceKind::Observations),
            other => Err(Error::InvalidConfig(format!("unknown data format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceSet {
    IoTraces(Vec<IoTrace>),
    LabeledWords(Vec<LabeledWord>),
    Observations(Vec<Vec<Symbol>>),
}

impl TraceSet {
    pub fn kind(&self) -> TraceKind {
        match self {
            TraceSet::IoTraces(_) => TraceKind::IoTraces,
            TraceSet::LabeledWords(_) => TraceKind::LabeledWords,
            TraceSet::Observations(_) => TraceKind::Observations,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TraceSet::IoTraces(t) => t.len(),
            TraceSet::LabeledWords(w) => w.len(),
            TraceSet::Observations(o) => o.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total number of symbols over all traces (inputs and outputs each count).
    pub fn symbol_count(&self) -> usize {
        match self {
            TraceSet::IoTraces(t) => t
                .iter()
                .map(|t| 2 * t.steps.len() + usize::from(t.initial_output.is_some()))
                .sum(),
            TraceSet::LabeledWords(w) => w.iter().map(|w| w.word.len() + 1).sum(),
            TraceSet::Observations(o) => o.iter().map(Vec::len).sum(),
        }
    }

    /// Serialises the set in its file format. Labelled words are written in
    /// Abbadingo layout, with the alphabet size derived from numeric symbols.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            TraceSet::IoTraces(traces) => {
                for trace in traces {
                    out.push_str(&io_trace_line(trace));
                    out.push('\n');
                }
            }
            TraceSet::Observations(traces) => {
                for trace in traces {
                    let line: Vec<&str> = trace.iter().map(Symbol::as_str).collect();
                    out.push_str(&line.join(" "));
                    out.push('\n');
                }
            }
            TraceSet::LabeledWords(words) => {
                let alphabet = words
                    .iter()
                    .flat_map(|w| &w.word)
                    .map(|s| s.as_str().parse::<u64>().map_or(0, |v| v + 1))
                    .max()
                    .unwrap_or(0);
                out.push_str(&format!("{} {}\n", words.len(), alphabet));
                for w in words {
                    let line: Vec<&str> = w.word.iter().map(Symbol::as_str).collect();
                    out.push_str(&format!("{} {}", w.label, w.word.len()));
                    for s in line {
                        out.push(' ');
                        out.push_str(s);
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn io_trace_line(trace: &IoTrace) -> String {
    let mut items = Vec::with_capacity(trace.steps.len() + 1);
    if let Some(o) = &trace.initial_output {
        items.push(Value::String(o.to_string()));
    }
    for (i, o) in &trace.steps {
        items.push(Value::Array(vec![
            Value::String(i.to_string()),
            Value::String(o.to_string()),
        ]));
    }
    Value::Array(items).to_string()
}

/// A labelled sample in the Abbadingo competition format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbbadingoSample {
    pub alphabet_size: u32,
    pub words: Vec<(bool, Vec<u32>)>,
}

impl AbbadingoSample {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (header_line, header) = lines.next().ok_or(Error::UnparseableInput {
            line: 1,
            message: "missing Abbadingo header".into(),
        })?;
        let bad = |line: usize, message: &str| Error::UnparseableInput {
            line: line + 1,
            message: message.to_owned(),
        };
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(bad(header_line, "header must be `<num_words> <alphabet_size>`"));
        }
        let num_words: usize = head[0]
            .parse()
            .map_err(|_| bad(header_line, "word count is not a non-negative integer"))?;
        let alphabet_size: u32 = head[1]
            .parse()
            .map_err(|_| bad(header_line, "alphabet size is not a non-negative integer"))?;

        let mut words = Vec::with_capacity(num_words);
        for (idx, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() < 2 {
                return Err(bad(idx, "expected `<label> <len> <symbols>`"));
            }
            let label = match tokens[0] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(idx, "label must be 0 or 1")),
            };
            let len: usize = tokens[1].parse().map_err(|_| bad(idx, "length is not an integer"))?;
            if tokens.len() != len + 2 {
                return Err(bad(idx, "word length does not match the number of symbols"));
            }
            let word = tokens[2..]
                .iter()
                .map(|t| match t.parse::<u32>() {
                    Ok(s) if s < alphabet_size => Ok(s),
                    _ => Err(bad(idx, "symbol outside the declared alphabet")),
                })
                .collect::<Result<Vec<_>>>()?;
            words.push((label, word));
        }
        if words.len() != num_words {
            return Err(bad(
                header_line,
                &format!("header declares {num_words} words, found {}", words.len()),
            ));
        }
        Ok(AbbadingoSample {
            alphabet_size,
            words,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.alphabet_size);
        for (label, word) in &self.words {
            out.push_str(if *label { "1" } else { "0" });
            out.push(' ');
            out.push_str(&word.len().to_string());
            for s in word {
                out.push(' ');
                out.push_str(&s.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn to_trace_set(&self) -> TraceSet {
        TraceSet::LabeledWords(
            self.words
                .iter()
                .map(|(label, word)| LabeledWord {
                    word: word.iter().map(|s| Symbol::new(s.to_string())).collect(),
                    label: Symbol::new(if *label { "1" } else { "0" }),
                })
                .collect(),
        )
    }
}

fn parse_io_traces(text: &str) -> Result<TraceSet> {
    let mut traces = Vec::new();
    let mut moore: Option<bool> = None;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::UnparseableInput {
            line: idx + 1,
            message,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let items = value
            .as_array()
            .ok_or_else(|| bad("trace must be a JSON array".into()))?;
        let mut rest = &items[..];
        let mut initial = None;
        if let Some(Value::String(o)) = rest.first() {
            initial = Some(Symbol::parse(o).map_err(|e| bad(e.to_string()))?);
            rest = &rest[1..];
        }
        if !items.is_empty() {
            let this_moore = initial.is_some();
            if *moore.get_or_insert(this_moore) != this_moore {
                return Err(bad("mixes Moore and Mealy traces".into()));
            }
        }
        let steps = rest
            .iter()
            .map(|step| match step.as_array().map(Vec::as_slice) {
                Some([Value::String(i), Value::String(o)]) => Ok((
                    Symbol::parse(i).map_err(|e| bad(e.to_string()))?,
                    Symbol::parse(o).map_err(|e| bad(e.to_string()))?,
                )),
                _ => Err(bad("steps must be [input, output] string pairs".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        traces.push(IoTrace {
            initial_output: initial,
            steps,
        });
    }
    Ok(TraceSet::IoTraces(traces))
}

fn parse_observations(text: &str) -> Result<TraceSet> {
    let mut traces = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trace = line
            .split_whitespace()
            .map(|token| {
                if token.contains(['[', ']', '"', ',']) {
                    Err(Error::UnparseableInput {
                        line: idx + 1,
                        message: format!("`{token}` is not a plain observation symbol"),
                    })
                } else {
                    Ok(Symbol::new(token))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        traces.push(trace);
    }
    Ok(TraceSet::Observations(traces))
}

/// Determines which trace grammar `raw` follows.
///
/// A complete Abbadingo file also reads as plain observations; the stricter
/// Abbadingo grammar wins as long as it declares at least one word.
pub fn detect_format(raw: &str) -> Result<TraceKind> {
    if raw.trim().is_empty() {
        return Err(Error::UnparseableInput {
            line: 1,
            message: "input is empty".into(),
        });
    }
    let io = parse_io_traces(raw);
    let abbadingo = AbbadingoSample::parse(raw);
    let observations = parse_observations(raw);

    let mut matched = Vec::new();
    if io.is_ok() {
        matched.push(TraceKind::IoTraces);
    }
    match &abbadingo {
        Ok(sample) if !sample.words.is_empty() => return Ok(TraceKind::LabeledWords),
        Ok(_) => matched.push(TraceKind::LabeledWords),
        Err(_) => {}
    }
    if observations.is_ok() {
        matched.push(TraceKind::Observations);
    }
    match matched.as_slice() {
        [kind] => Ok(*kind),
        [] => {
            // report the error of the grammar the text most resembles
            let err = if raw.trim_start().starts_with('[') {
                io.unwrap_err()
            } else {
                observations.unwrap_err()
            };
            Err(err)
        }
        many => Err(Error::AmbiguousFormat(
            many.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        )),
    }
}

/// Parses `raw` in the given format, detecting it when `format` is `None`.
pub fn parse_traces(raw: &str, format: Option<TraceKind>) -> Result<TraceSet> {
    let kind = match format {
        Some(kind) => kind,
        None => detect_format(raw)?,
    };
    match kind {
        TraceKind::IoTraces => parse_io_traces(raw),
        TraceKind::LabeledWords => Ok(AbbadingoSample::parse(raw)?.to_trace_set()),
        TraceKind::Observations => parse_observations(raw),
    }
}

struct TrieNode {
    output: Option<Symbol>,
    label: Option<Symbol>,
    children: Vec<(Symbol, Symbol, u64, usize)>,
}

struct Trie {
    nodes: Vec<TrieNode>,
    deterministic: bool,
}

impl Trie {
    fn new(root_output: Option<Symbol>, deterministic: bool) -> Self {
        Trie {
            nodes: vec![TrieNode {
                output: root_output,
                label: None,
                children: Vec::new(),
            }],
            deterministic,
        }
    }

    fn insert(&mut self, steps: &[(Symbol, Symbol)]) -> Result<usize> {
        let mut node = 0;
        for (depth, (input, output)) in steps.iter().enumerate() {
            let children = &mut self.nodes[node].children;
            if let Some(child) = children.iter_mut().find(|c| &c.0 == input && &c.1 == output) {
                child.2 += 1;
                node = child.3;
                continue;
            }
            if self.deterministic {
                if let Some(other) = children.iter().find(|c| &c.0 == input) {
                    return Err(Error::NondeterminismInData {
                        prefix: steps[..depth].to_vec(),
                        input: input.clone(),
                        first: other.1.clone(),
                        second: output.clone(),
                    });
                }
            }
            let id = self.nodes.len();
            self.nodes[node].children.push((input.clone(), output.clone(), 1, id));
            self.nodes.push(TrieNode {
                output: Some(output.clone()),
                label: None,
                children: Vec::new(),
            });
            node = id;
        }
        Ok(node)
    }

    /// Renumbers the trie breadth-first with sorted siblings.
    fn into_model(mut self, wildcard: Option<Symbol>) -> Model {
        for node in &mut self.nodes {
            node.children.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        }
        let mut new_id = vec![u32::MAX; self.nodes.len()];
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([0usize]);
        new_id[0] = 0;
        while let Some(n) = queue.pop_front() {
            order.push(n);
            for &(_, _, _, child) in &self.nodes[n].children {
                new_id[child] = (order.len() + queue.len()) as u32;
                queue.push_back(child);
            }
        }
        let mut states: Vec<TreeState> = Vec::with_capacity(order.len());
        let mut parent_of: Vec<Option<Predecessor>> = vec![None; self.nodes.len()];
        let mut depth_of = vec![0u32; self.nodes.len()];
        for &n in &order {
            let id = StateId(new_id[n]);
            let mut state = TreeState::new(
                id,
                self.nodes[n].output.take(),
                parent_of[n].take(),
                depth_of[n],
            );
            for (input, output, count, child) in self.nodes[n].children.drain(..) {
                parent_of[child] = Some(Predecessor {
                    state: id,
                    input: input.clone(),
                    output: output.clone(),
                });
                depth_of[child] = depth_of[n] + 1;
                state.transitions_mut().push(crate::automata::Transition {
                    input,
                    output,
                    info: TransitionInfo::new(StateId(new_id[child]), count),
                });
            }
            states.push(state);
        }
        Model::from_states(states, wildcard)
    }
}

/// Builds the prefix tree automaton of `data` for the requested behaviour.
pub fn build_pta(data: &TraceSet, config: BehaviorConfig) -> Result<Model> {
    match data {
        TraceSet::IoTraces(traces) => build_io_pta(traces, config),
        TraceSet::Observations(obs) => {
            if config != BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Stochastic) {
                return Err(Error::UnsupportedData {
                    kind: "observation".into(),
                    behavior: format!("{} {}", config.output, config.transition),
                });
            }
            let tick = Symbol::new(TICK);
            let traces: Vec<IoTrace> = obs
                .iter()
                .map(|o| IoTrace {
                    initial_output: o.first().cloned(),
                    steps: o.iter().skip(1).map(|s| (tick.clone(), s.clone())).collect(),
                })
                .collect();
            build_io_pta(&traces, config)
        }
        TraceSet::LabeledWords(words) => build_word_pta(words, config),
    }
}

fn build_io_pta(traces: &[IoTrace], config: BehaviorConfig) -> Result<Model> {
    let initial = match config.output {
        OutputBehavior::Moore => {
            let expected = traces.first().and_then(|t| t.initial_output.clone());
            for (idx, trace) in traces.iter().enumerate() {
                if trace.initial_output.is_none() || trace.initial_output != expected {
                    return Err(Error::InconsistentInitialOutput {
                        trace: idx,
                        expected,
                        found: trace.initial_output.clone(),
                    });
                }
            }
            expected
        }
        OutputBehavior::Mealy => {
            if traces.iter().any(|t| t.initial_output.is_some()) {
                return Err(Error::UnsupportedData {
                    kind: "Moore-style io trace".into(),
                    behavior: "mealy output behavior".into(),
                });
            }
            None
        }
    };
    let mut trie = Trie::new(initial, config.is_deterministic());
    for trace in traces {
        trie.insert(&trace.steps)?;
    }
    Ok(trie.into_model(None))
}

fn build_word_pta(words: &[LabeledWord], config: BehaviorConfig) -> Result<Model> {
    if config != BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Deterministic) {
        return Err(Error::UnsupportedData {
            kind: "labeled word".into(),
            behavior: format!("{} {}", config.output, config.transition),
        });
    }
    let unknown = Symbol::new(UNKNOWN_LABEL);
    let mut trie = Trie::new(None, false);
    for w in words {
        if w.label == unknown {
            return Err(Error::InvalidConfig(format!("label `{UNKNOWN_LABEL}` is reserved")));
        }
        let steps: Vec<(Symbol, Symbol)> = w.word.iter().map(|i| (i.clone(), unknown.clone())).collect();
        let node = trie.insert(&steps)?;
        match &trie.nodes[node].label {
            Some(prev) if prev != &w.label => {
                return Err(Error::ConflictingLabels {
                    word: w.word.clone(),
                    first: prev.clone(),
                    second: w.label.clone(),
                })
            }
            _ => trie.nodes[node].label = Some(w.label.clone()),
        }
    }
    // edge outputs carry the label of the state they enter
    let labels: Vec<Symbol> = trie
        .nodes
        .iter()
        .map(|n| n.label.clone().unwrap_or_else(|| unknown.clone()))
        .collect();
    for (idx, node) in trie.nodes.iter_mut().enumerate() {
        node.output = Some(labels[idx].clone());
        for child in &mut node.children {
            child.1 = labels[child.3].clone();
        }
    }
    Ok(trie.into_model(Some(unknown)))
}
