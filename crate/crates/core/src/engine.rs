//! The red-blue state merging loop.
//!
//! A candidate merge of a red state with a blue state is evaluated without
//! touching the model: the implied merges are collected into a [`Partition`]
//! that holds a merged copy of every modified state. Only the selected
//! partition is written back with [`apply_merge`].
//!
//! Outside the red kernel the model is a tree: every non-red state has one
//! incoming edge. The closure therefore folds the blue subtree into the rest
//! of the model, and the state on the red side of each implied merge keeps
//! its identity as the representative of its class.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;
use std::time::Instant;

use serde::{Serialize, Serializer};

use crate::automata::{outputs_agree, BehaviorConfig, Model, StateId, StateLookup, Symbol, TreeState};
use crate::error::{Error, Result};
use crate::extraction::{to_automaton, LearnedModel};
use crate::ingestion::{build_pta, TraceSet};

/// Outcome of a score function. `Reject` and `Accept` act as minus and plus
/// infinity; an `Accept` ends the candidate search immediately.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Score {
    Reject,
    Value(f64),
    Accept,
}

impl Score {
    fn rank(self) -> (u8, f64) {
        match self {
            Score::Reject => (0, 0.0),
            Score::Value(v) if v.is_nan() => (0, 0.0),
            Score::Value(v) => (1, v),
            Score::Accept => (2, 0.0),
        }
    }

    pub fn total_cmp(&self, other: &Score) -> Ordering {
        let (a, x) = self.rank();
        let (b, y) = other.rank();
        a.cmp(&b).then_with(|| x.total_cmp(&y))
    }

    pub fn is_reject(&self) -> bool {
        self.rank().0 == 0
    }
}

impl From<bool> for Score {
    fn from(ok: bool) -> Self {
        if ok {
            Score::Accept
        } else {
            Score::Reject
        }
    }
}

impl From<f64> for Score {
    fn from(v: f64) -> Self {
        Score::Value(v)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Score::Reject => serializer.serialize_str("reject"),
            Score::Accept => serializer.serialize_str("accept"),
            Score::Value(v) => serializer.serialize_f64(*v),
        }
    }
}

/// A state handed to compatibility checks, with access to its prefix.
#[derive(Clone, Copy)]
pub struct NodeRef<'a> {
    state: &'a TreeState,
    model: &'a Model,
}

impl<'a> NodeRef<'a> {
    pub fn new(state: &'a TreeState, model: &'a Model) -> Self {
        NodeRef { state, model }
    }

    pub fn state(&self) -> &'a TreeState {
        self.state
    }

    pub fn prefix(&self) -> Vec<(Symbol, Symbol)> {
        self.model.prefix(self.state.id())
    }
}

impl Deref for NodeRef<'_> {
    type Target = TreeState;

    fn deref(&self) -> &TreeState {
        self.state
    }
}

/// Compatibility and scoring rules plugged into the merge loop.
///
/// `local_compatibility` receives the partition built so far and the state
/// joining it. `score` sees the finished partition. `reset` runs before
/// every candidate evaluation.
pub trait MergeStrategy: Send {
    fn local_compatibility(&mut self, _partition_state: NodeRef<'_>, _joining: NodeRef<'_>) -> bool {
        true
    }

    fn score(&mut self, _partition: &Partition, _model: &Model) -> Score {
        Score::Accept
    }

    fn reset(&mut self) {}
}

impl<S: MergeStrategy + ?Sized> MergeStrategy for Box<S> {
    fn local_compatibility(&mut self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        (**self).local_compatibility(a, b)
    }

    fn score(&mut self, partition: &Partition, model: &Model) -> Score {
        (**self).score(partition, model)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

/// The partition induced by a candidate merge and its implied merges.
#[derive(Clone, Debug)]
pub struct Partition {
    red: StateId,
    blue: StateId,
    assignment: BTreeMap<StateId, StateId>,
    states: BTreeMap<StateId, TreeState>,
    version: u64,
}

impl Partition {
    pub fn red(&self) -> StateId {
        self.red
    }

    pub fn blue(&self) -> StateId {
        self.blue
    }

    /// Every modified pre-merge state mapped to the representative of its class.
    pub fn assignment(&self) -> &BTreeMap<StateId, StateId> {
        &self.assignment
    }

    pub fn representative(&self, state: StateId) -> Option<StateId> {
        self.assignment.get(&state).copied()
    }

    /// Merged behaviour of each representative.
    pub fn merged_states(&self) -> impl Iterator<Item = &TreeState> {
        self.states.values()
    }

    pub fn merged_state(&self, representative: StateId) -> Option<&TreeState> {
        self.states.get(&representative)
    }

    pub fn representative_count(&self) -> usize {
        self.states.len()
    }

    /// Equivalence classes with more than one member, each sorted.
    pub fn classes(&self) -> Vec<Vec<StateId>> {
        let mut by_rep: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
        for (&state, &rep) in &self.assignment {
            by_rep.entry(rep).or_default().push(state);
        }
        by_rep.into_values().filter(|c| c.len() > 1).collect()
    }

    /// The model as it would look after applying this partition.
    pub fn view<'a>(&'a self, model: &'a Model) -> PartitionView<'a> {
        PartitionView {
            model,
            partition: self,
        }
    }
}

pub struct PartitionView<'a> {
    model: &'a Model,
    partition: &'a Partition,
}

impl StateLookup for PartitionView<'_> {
    fn root(&self) -> StateId {
        self.model.root()
    }

    fn lookup(&self, id: StateId) -> &TreeState {
        self.partition
            .states
            .get(&id)
            .unwrap_or_else(|| self.model.state(id))
    }

    fn wildcard(&self) -> Option<&Symbol> {
        self.model.wildcard()
    }
}

/// Which constraint rejected a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    Moore,
    Determinism,
    LocalCompatibility,
    Score,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::Moore => "moore property",
            Violation::Determinism => "determinism",
            Violation::LocalCompatibility => "local compatibility",
            Violation::Score => "score function",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Incompatible {
    pub violation: Violation,
    pub states: (StateId, StateId),
}

#[derive(Clone, Debug)]
pub enum Evaluation {
    Compatible { score: Score, partition: Partition },
    Incompatible(Incompatible),
}

impl Evaluation {
    pub fn score(&self) -> Score {
        match self {
            Evaluation::Compatible { score, .. } => *score,
            Evaluation::Incompatible(_) => Score::Reject,
        }
    }

    pub fn partition(&self) -> Option<&Partition> {
        match self {
            Evaluation::Compatible { partition, .. } => Some(partition),
            Evaluation::Incompatible(_) => None,
        }
    }
}

type OrderFn = dyn Fn(&Model, StateId, StateId) -> Ordering + Send + Sync;

/// Order in which merge candidates are considered.
#[derive(Clone, Default)]
pub struct NodeOrder(Option<Arc<OrderFn>>);

impl NodeOrder {
    /// Shortlex order of the prefix-tree prefixes.
    pub fn shortlex() -> Self {
        NodeOrder(None)
    }

    pub fn custom(order: impl Fn(&Model, StateId, StateId) -> Ordering + Send + Sync + 'static) -> Self {
        NodeOrder(Some(Arc::new(order)))
    }

    pub fn compare(&self, model: &Model, a: StateId, b: StateId) -> Ordering {
        match &self.0 {
            None => crate::automata::node_order(model.state(a), model.state(b)),
            Some(f) => f(model, a, b),
        }
    }
}

impl fmt::Debug for NodeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_some() { "NodeOrder::Custom" } else { "NodeOrder::Shortlex" })
    }
}

pub type ModelTransform = Arc<dyn Fn(Model) -> Model + Send + Sync>;

pub struct EngineConfig {
    pub behavior: BehaviorConfig,
    pub strategy: Box<dyn MergeStrategy>,
    pub eval_compat_on_pta: bool,
    pub eval_compat_on_futures: bool,
    pub consider_only_min_blue: bool,
    pub depth_first: bool,
    pub node_order: NodeOrder,
    pub pta_processing: Option<ModelTransform>,
    pub postprocessing: Option<ModelTransform>,
}

impl EngineConfig {
    pub fn new(behavior: BehaviorConfig, strategy: impl MergeStrategy + 'static) -> Self {
        EngineConfig {
            behavior,
            strategy: Box::new(strategy),
            eval_compat_on_pta: false,
            eval_compat_on_futures: false,
            consider_only_min_blue: false,
            depth_first: false,
            node_order: NodeOrder::shortlex(),
            pta_processing: None,
            postprocessing: None,
        }
    }

    pub fn compat_on_pta(mut self, on: bool) -> Self {
        self.eval_compat_on_pta = on;
        self
    }

    pub fn compat_on_futures(mut self, on: bool) -> Self {
        self.eval_compat_on_futures = on;
        self
    }

    pub fn min_blue(mut self, on: bool) -> Self {
        self.consider_only_min_blue = on;
        self
    }

    pub fn depth_first(mut self, on: bool) -> Self {
        self.depth_first = on;
        self
    }

    pub fn node_order(mut self, order: NodeOrder) -> Self {
        self.node_order = order;
        self
    }

    pub fn pta_processing(mut self, f: impl Fn(Model) -> Model + Send + Sync + 'static) -> Self {
        self.pta_processing = Some(Arc::new(f));
        self
    }

    pub fn postprocessing(mut self, f: impl Fn(Model) -> Model + Send + Sync + 'static) -> Self {
        self.postprocessing = Some(Arc::new(f));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_compat_on_pta && !self.eval_compat_on_futures {
            return Err(Error::InvalidConfig(
                "compatibility on the PTA requires compatibility on futures".into(),
            ));
        }
        Ok(())
    }
}

/// Callbacks at the important points of a run. Handlers only observe.
pub trait Instrumentation {
    fn pta_built(&mut self, _model: &Model) {}
    fn candidate_evaluated(&mut self, _red: StateId, _blue: StateId, _score: Score) {}
    fn promoted(&mut self, _model: &Model, _state: StateId) {}
    fn merge_applied(&mut self, _model: &Model, _red: StateId, _blue: StateId, _partition: &Partition) {}
    fn finished(&mut self, _model: &Model) {}
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    PtaBuilt { states: usize },
    Candidate { red: StateId, blue: StateId, score: Score },
    Promoted { state: StateId },
    Merged { red: StateId, blue: StateId, merged: usize },
    Finished { states: usize },
}

/// Records every event; serialisable as JSON lines.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub record_candidates: bool,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog {
            events: Vec::new(),
            record_candidates: true,
        }
    }

    /// Promotions and merges only.
    pub fn decisions(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Promoted { .. } | Event::Merged { .. }))
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialise"));
            out.push('\n');
        }
        out
    }
}

impl Instrumentation for EventLog {
    fn pta_built(&mut self, model: &Model) {
        self.events.push(Event::PtaBuilt { states: model.size() });
    }

    fn candidate_evaluated(&mut self, red: StateId, blue: StateId, score: Score) {
        if self.record_candidates {
            self.events.push(Event::Candidate { red, blue, score });
        }
    }

    fn promoted(&mut self, _model: &Model, state: StateId) {
        self.events.push(Event::Promoted { state });
    }

    fn merge_applied(&mut self, _model: &Model, red: StateId, blue: StateId, partition: &Partition) {
        self.events.push(Event::Merged {
            red,
            blue,
            merged: partition.assignment().len() - partition.representative_count(),
        });
    }

    fn finished(&mut self, model: &Model) {
        self.events.push(Event::Finished { states: model.size() });
    }
}

struct NoInstrumentation;

impl Instrumentation for NoInstrumentation {}

/// One-step successors of red states that are not red, in node order.
pub fn compute_blue(model: &Model, red: &[StateId], order: &NodeOrder) -> Vec<StateId> {
    let red_set: HashSet<StateId> = red.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut blue: Vec<StateId> = red
        .iter()
        .flat_map(|&r| model.state(r).transitions().iter().map(|t| t.info.target))
        .filter(|t| !red_set.contains(t) && seen.insert(*t))
        .collect();
    blue.sort_by(|&a, &b| order.compare(model, a, b));
    blue
}

struct Checker<'a> {
    behavior: BehaviorConfig,
    wildcard: Option<&'a Symbol>,
}

impl Checker<'_> {
    fn structural(&self, a: &TreeState, b: &TreeState) -> Option<Violation> {
        if self.behavior.is_moore() {
            if let (Some(x), Some(y)) = (a.output(), b.output()) {
                if !outputs_agree(x, y, self.wildcard) {
                    return Some(Violation::Moore);
                }
            }
        }
        if self.behavior.is_deterministic() {
            for (input, group) in b.groups() {
                let other = a.on_input(input);
                let clash = other.iter().any(|t| {
                    group
                        .iter()
                        .any(|u| !outputs_agree(&t.output, &u.output, self.wildcard))
                });
                if clash {
                    return Some(Violation::Determinism);
                }
            }
        }
        None
    }
}

fn pop_pair<T>(queue: &mut VecDeque<T>, depth_first: bool) -> Option<T> {
    if depth_first {
        queue.pop_back()
    } else {
        queue.pop_front()
    }
}

fn walk_futures(
    model: &Model,
    pta: Option<&Model>,
    a: StateId,
    b: StateId,
    config: &mut EngineConfig,
) -> Result<Option<Incompatible>> {
    let source = if config.eval_compat_on_pta {
        pta.ok_or_else(|| Error::InvalidConfig("compatibility on the PTA needs the original PTA".into()))?
    } else {
        model
    };
    let checker = Checker {
        behavior: config.behavior,
        wildcard: source.wildcard(),
    };
    let mut queue = VecDeque::from([(a, b)]);
    while let Some((x, y)) = pop_pair(&mut queue, config.depth_first) {
        let (sx, sy) = (source.state(x), source.state(y));
        let violation = checker.structural(sx, sy).or_else(|| {
            (!config
                .strategy
                .local_compatibility(NodeRef::new(sx, source), NodeRef::new(sy, source)))
            .then_some(Violation::LocalCompatibility)
        });
        if let Some(violation) = violation {
            return Ok(Some(Incompatible {
                violation,
                states: (x, y),
            }));
        }
        for (input, group) in sy.groups() {
            for tx in sx.on_input(input) {
                for ty in group {
                    if !outputs_agree(&tx.output, &ty.output, checker.wildcard) {
                        continue;
                    }
                    if config.eval_compat_on_pta && (tx.info.original_count == 0 || ty.info.original_count == 0) {
                        continue;
                    }
                    queue.push_back((tx.info.target, ty.info.target));
                }
            }
        }
    }
    Ok(None)
}

/// Evaluates local compatibility on the common futures of `a` and `b`,
/// following shared `(input, output)` steps.
pub fn check_futures(model: &Model, pta: Option<&Model>, a: StateId, b: StateId, config: &mut EngineConfig) -> Result<bool> {
    Ok(walk_futures(model, pta, a, b, config)?.is_none())
}

fn incoming_edge(model: &Model, state: StateId) -> Option<(StateId, Symbol, Symbol)> {
    let parent = model.state(state).parent()?;
    model
        .state(parent)
        .transitions()
        .iter()
        .find(|t| t.info.target == state)
        .map(|t| (parent, t.input.clone(), t.output.clone()))
}

/// Computes the partition resulting from merging `blue` into `red`,
/// including all implied merges, and scores it. The model is not modified.
///
/// `pta` is the unmerged prefix tree; it is only consulted when
/// compatibility is evaluated on the PTA.
pub fn try_merge(
    model: &Model,
    pta: Option<&Model>,
    red: StateId,
    blue: StateId,
    config: &mut EngineConfig,
) -> Result<Evaluation> {
    config.validate()?;
    config.strategy.reset();

    if config.eval_compat_on_futures {
        if let Some(incompatible) = walk_futures(model, pta, red, blue, config)? {
            return Ok(Evaluation::Incompatible(incompatible));
        }
    }

    let wildcard = model.wildcard().cloned();
    let checker = Checker {
        behavior: config.behavior,
        wildcard: model.wildcard(),
    };
    let mut assignment: BTreeMap<StateId, StateId> = BTreeMap::new();
    let mut states: BTreeMap<StateId, TreeState> = BTreeMap::new();

    let (parent, in_sym, out_sym) = incoming_edge(model, blue).ok_or_else(|| {
        Error::InvalidConfig(format!("{blue} has no incoming edge and cannot be merged"))
    })?;
    let mut parent_copy = model.state(parent).clone();
    parent_copy
        .get_mut(&in_sym, &out_sym)
        .expect("incoming edge exists")
        .target = red;
    states.insert(parent, parent_copy);
    assignment.insert(parent, parent);

    let mut queue = VecDeque::from([(red, blue)]);
    while let Some((r, b)) = pop_pair(&mut queue, config.depth_first) {
        let mut rep = r;
        while let Some(&next) = assignment.get(&rep) {
            if next == rep {
                break;
            }
            rep = next;
        }
        let part = states.entry(rep).or_insert_with(|| model.state(rep).clone());
        assignment.insert(rep, rep);
        assignment.insert(b, rep);
        let joining = model.state(b);

        let violation = checker.structural(part, joining).or_else(|| {
            (!config.eval_compat_on_futures
                && !config
                    .strategy
                    .local_compatibility(NodeRef::new(part, model), NodeRef::new(joining, model)))
            .then_some(Violation::LocalCompatibility)
        });
        if let Some(violation) = violation {
            return Ok(Evaluation::Incompatible(Incompatible {
                violation,
                states: (rep, b),
            }));
        }

        if let (Some(w), Some(out)) = (&wildcard, joining.output()) {
            if part.output() == Some(w) {
                part.set_output(Some(out.clone()));
            }
        }

        for t in joining.transitions() {
            if let Some(info) = part.get_mut(&t.input, &t.output) {
                info.count += t.info.count;
                queue.push_back((info.target, t.info.target));
                continue;
            }
            let unify = match &wildcard {
                Some(w) if config.behavior.is_deterministic() => part
                    .on_input(&t.input)
                    .first()
                    .filter(|e| &e.output == w || &t.output == w)
                    .cloned(),
                _ => None,
            };
            match unify {
                Some(existing) => {
                    let w = wildcard.as_ref().expect("wildcard present");
                    let output = if &existing.output == w { t.output.clone() } else { existing.output.clone() };
                    let mut info = existing.info;
                    info.count += t.info.count;
                    part.remove_transition(&existing.input, &existing.output);
                    part.set_transition(t.input.clone(), output, info);
                    queue.push_back((existing.info.target, t.info.target));
                }
                None => part.set_transition(t.input.clone(), t.output.clone(), t.info),
            }
        }
    }

    let partition = Partition {
        red,
        blue,
        assignment,
        states,
        version: model.version(),
    };
    let score = config.strategy.score(&partition, model);
    if score.is_reject() {
        return Ok(Evaluation::Incompatible(Incompatible {
            violation: Violation::Score,
            states: (red, blue),
        }));
    }
    Ok(Evaluation::Compatible { score, partition })
}

/// Writes a partition computed by [`try_merge`] back into the model.
pub fn apply_merge(model: &mut Model, partition: &Partition) -> Result<()> {
    if partition.version != model.version() {
        return Err(Error::StalePartition {
            expected: partition.version,
            found: model.version(),
        });
    }
    let root = model.root();
    for (&rep, merged) in &partition.states {
        model.state_mut(rep).replace_behavior(merged);
    }
    for (&rep, merged) in &partition.states {
        for t in merged.transitions() {
            if t.info.target != root {
                model.state_mut(t.info.target).set_parent(Some(rep));
            }
        }
    }
    model.touch();
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub pta_size: usize,
    pub final_size: usize,
    pub merges: usize,
    pub promotions: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug)]
pub enum Learned {
    Automaton(LearnedModel),
    Internal(Model),
}

/// The generalised state merging algorithm.
pub struct StateMerging {
    pub config: EngineConfig,
}

impl StateMerging {
    pub fn new(config: EngineConfig) -> Self {
        StateMerging { config }
    }

    pub fn run(
        &mut self,
        data: &TraceSet,
        instrumentation: Option<&mut dyn Instrumentation>,
        convert: bool,
    ) -> Result<(Learned, RunStats)> {
        let pta = build_pta(data, self.config.behavior)?;
        let (model, stats) = self.run_on(pta, instrumentation)?;
        if convert {
            let automaton = to_automaton(&model, self.config.behavior, None)?;
            Ok((Learned::Automaton(automaton), stats))
        } else {
            Ok((Learned::Internal(model), stats))
        }
    }

    /// Runs the merge loop on an already built prefix tree.
    pub fn run_on(&mut self, pta: Model, instrumentation: Option<&mut dyn Instrumentation>) -> Result<(Model, RunStats)> {
        self.config.validate()?;
        let started = Instant::now();
        let mut fallback = NoInstrumentation;
        let instr: &mut dyn Instrumentation = match instrumentation {
            Some(i) => i,
            None => &mut fallback,
        };

        let mut model = match &self.config.pta_processing {
            Some(f) => f(pta),
            None => pta,
        };
        let mut stats = RunStats {
            pta_size: model.size(),
            ..RunStats::default()
        };
        instr.pta_built(&model);
        let snapshot = self.config.eval_compat_on_pta.then(|| model.clone());

        let mut red = vec![model.root()];
        loop {
            let mut blue = compute_blue(&model, &red, &self.config.node_order);
            if blue.is_empty() {
                break;
            }
            if self.config.consider_only_min_blue {
                blue.truncate(1);
            }
            stats.iterations += 1;

            let mut best: Option<(Score, Partition)> = None;
            let mut promote = None;
            'blues: for &b in &blue {
                let mut mergeable = false;
                for &r in &red {
                    let evaluation = try_merge(&model, snapshot.as_ref(), r, b, &mut self.config)?;
                    instr.candidate_evaluated(r, b, evaluation.score());
                    let Evaluation::Compatible { score, partition } = evaluation else {
                        continue;
                    };
                    mergeable = true;
                    if score == Score::Accept {
                        best = Some((score, partition));
                        break 'blues;
                    }
                    if best
                        .as_ref()
                        .is_none_or(|(s, _)| score.total_cmp(s) == Ordering::Greater)
                    {
                        best = Some((score, partition));
                    }
                }
                if !mergeable {
                    promote = Some(b);
                    break;
                }
            }

            if let (Some(b), false) = (promote, matches!(best, Some((Score::Accept, _)))) {
                let pos = red
                    .binary_search_by(|&r| self.config.node_order.compare(&model, r, b))
                    .unwrap_or_else(|p| p);
                red.insert(pos, b);
                stats.promotions += 1;
                instr.promoted(&model, b);
                continue;
            }
            let (_, partition) = best.expect("a mergeable candidate exists when nothing is promoted");
            apply_merge(&mut model, &partition)?;
            stats.merges += 1;
            instr.merge_applied(&model, partition.red(), partition.blue(), &partition);
        }

        if let Some(f) = &self.config.postprocessing {
            model = f(model);
        }
        stats.final_size = model.size();
        stats.elapsed_ms = started.elapsed().as_millis();
        instr.finished(&model);
        Ok((model, stats))
    }
}
