//! The universal internal representation: an observably nondeterministic IO
//! automaton whose transitions carry observation counts.
//!
//! States live in an arena owned by [`Model`] and are addressed by
//! [`StateId`]. Ids are handed out in breadth-first order while the prefix
//! tree is built, with siblings sorted by `(input, output)`, so comparing ids
//! is the same as comparing the shortlex order of the state prefixes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// An opaque input or output label. Symbols compare by their text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    /// Panics on the empty string; use [`Symbol::parse`] for untrusted text.
    pub fn new(text: impl AsRef<str>) -> Self {
        Self::parse(text).expect("symbols must be non-empty")
    }

    pub fn parse(text: impl AsRef<str>) -> Result<Self, Error> {
        let text = text.as_ref();
        if text.is_empty() {
            return Err(Error::EmptySymbol);
        }
        Ok(Symbol(Arc::from(text)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(text: &str) -> Self {
        Symbol::new(text)
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Symbol::parse(text).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Frequency record of one `(state, input, output)` transition.
///
/// `original_target` and `original_count` are fixed when the prefix tree is
/// built and survive every merge untouched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransitionInfo {
    pub target: StateId,
    pub count: u64,
    pub original_target: StateId,
    pub original_count: u64,
}

impl TransitionInfo {
    pub fn new(target: StateId, count: u64) -> Self {
        TransitionInfo {
            target,
            count,
            original_target: target,
            original_count: count,
        }
    }

    pub fn count(&self, original: bool) -> u64 {
        if original {
            self.original_count
        } else {
            self.count
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub input: Symbol,
    pub output: Symbol,
    pub info: TransitionInfo,
}

/// The unique incoming prefix-tree edge of a non-root state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predecessor {
    pub state: StateId,
    pub input: Symbol,
    pub output: Symbol,
}

/// A node of the internal automaton.
///
/// Transitions are kept sorted by `(input, output)`; at most one transition
/// exists per pair, which is exactly observable nondeterminism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeState {
    id: StateId,
    output: Option<Symbol>,
    predecessor: Option<Predecessor>,
    parent: Option<StateId>,
    depth: u32,
    transitions: Vec<Transition>,
}

impl TreeState {
    pub(crate) fn new(
        id: StateId,
        output: Option<Symbol>,
        predecessor: Option<Predecessor>,
        depth: u32,
    ) -> Self {
        let parent = predecessor.as_ref().map(|p| p.state);
        TreeState {
            id,
            output,
            predecessor,
            parent,
            depth,
            transitions: Vec::new(),
        }
    }

    pub fn id(&self) -> StateId {
        self.id
    }

    /// Output of the incoming edge, or the initial output for the root.
    pub fn output(&self) -> Option<&Symbol> {
        self.output.as_ref()
    }

    pub fn predecessor(&self) -> Option<&Predecessor> {
        self.predecessor.as_ref()
    }

    /// The state currently holding the single incoming edge of this state.
    /// Only meaningful outside the red kernel, where the model is still a tree.
    pub fn parent(&self) -> Option<StateId> {
        self.parent
    }

    pub(crate) fn set_parent(&mut self, parent: Option<StateId>) {
        self.parent = parent;
    }

    /// Length of the state's prefix in the prefix tree.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn is_leaf(&self) -> bool {
        self.transitions.is_empty()
    }

    fn search(&self, input: &Symbol, output: &Symbol) -> Result<usize, usize> {
        self.transitions
            .binary_search_by(|t| (&t.input, &t.output).cmp(&(input, output)))
    }

    pub fn get(&self, input: &Symbol, output: &Symbol) -> Option<&TransitionInfo> {
        self.search(input, output)
            .ok()
            .map(|idx| &self.transitions[idx].info)
    }

    pub(crate) fn get_mut(&mut self, input: &Symbol, output: &Symbol) -> Option<&mut TransitionInfo> {
        match self.search(input, output) {
            Ok(idx) => Some(&mut self.transitions[idx].info),
            Err(_) => None,
        }
    }

    /// All transitions on `input`, one per observed output.
    pub fn on_input(&self, input: &Symbol) -> &[Transition] {
        let start = self.transitions.partition_point(|t| &t.input < input);
        let end = start + self.transitions[start..].partition_point(|t| &t.input == input);
        &self.transitions[start..end]
    }

    /// Transitions grouped by input, in input order.
    pub fn groups(&self) -> InputGroups<'_> {
        InputGroups {
            rest: &self.transitions,
        }
    }

    pub fn total_count(&self, input: &Symbol, original: bool) -> u64 {
        self.on_input(input).iter().map(|t| t.info.count(original)).sum()
    }

    /// Inserts or replaces the transition for `(input, output)`.
    pub(crate) fn set_transition(&mut self, input: Symbol, output: Symbol, info: TransitionInfo) {
        match self.search(&input, &output) {
            Ok(idx) => self.transitions[idx].info = info,
            Err(idx) => self.transitions.insert(idx, Transition { input, output, info }),
        }
    }

    pub(crate) fn remove_transition(&mut self, input: &Symbol, output: &Symbol) -> Option<TransitionInfo> {
        match self.search(input, output) {
            Ok(idx) => Some(self.transitions.remove(idx).info),
            Err(_) => None,
        }
    }

    pub(crate) fn retain_transitions(&mut self, keep: impl FnMut(&Transition) -> bool) {
        self.transitions.retain(keep);
    }

    pub(crate) fn set_output(&mut self, output: Option<Symbol>) {
        self.output = output;
    }

    pub(crate) fn replace_behavior(&mut self, from: &TreeState) {
        self.transitions.clone_from(&from.transitions);
        self.output.clone_from(&from.output);
    }

    pub(crate) fn transitions_mut(&mut self) -> &mut Vec<Transition> {
        &mut self.transitions
    }
}

pub struct InputGroups<'a> {
    rest: &'a [Transition],
}

impl<'a> Iterator for InputGroups<'a> {
    type Item = (&'a Symbol, &'a [Transition]);

    fn next(&mut self) -> Option<Self::Item> {
        let first = self.rest.first()?;
        let len = self.rest.iter().take_while(|t| t.input == first.input).count();
        let (group, rest) = self.rest.split_at(len);
        self.rest = rest;
        Some((&first.input, group))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputBehavior {
    Moore,
    Mealy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionBehavior {
    Deterministic,
    Nondeterministic,
    Stochastic,
}

impl fmt::Display for OutputBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputBehavior::Moore => "moore",
            OutputBehavior::Mealy => "mealy",
        })
    }
}

impl fmt::Display for TransitionBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionBehavior::Deterministic => "deterministic",
            TransitionBehavior::Nondeterministic => "nondeterministic",
            TransitionBehavior::Stochastic => "stochastic",
        })
    }
}

/// Selects one of the six output/transition behaviour combinations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BehaviorConfig {
    pub output: OutputBehavior,
    pub transition: TransitionBehavior,
}

impl BehaviorConfig {
    pub const fn new(output: OutputBehavior, transition: TransitionBehavior) -> Self {
        BehaviorConfig { output, transition }
    }

    pub fn is_moore(&self) -> bool {
        self.output == OutputBehavior::Moore
    }

    pub fn is_deterministic(&self) -> bool {
        self.transition == TransitionBehavior::Deterministic
    }
}

impl fmt::Display for BehaviorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.output, self.transition)
    }
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Deterministic)
    }
}

/// Read access to a collection of states rooted at an initial state.
///
/// Implemented by [`Model`] and by the virtual post-merge view of a
/// [`Partition`](crate::engine::Partition).
pub trait StateLookup {
    fn root(&self) -> StateId;
    fn lookup(&self, id: StateId) -> &TreeState;
    /// Output label that stands for "no observation" (unlabelled words).
    fn wildcard(&self) -> Option<&Symbol>;

    /// Reachable states in breadth-first order, following transitions in
    /// `(input, output)` order.
    fn reachable(&self) -> Vec<StateId> {
        let mut seen = HashMap::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.root()]);
        seen.insert(self.root(), ());
        while let Some(id) = queue.pop_front() {
            order.push(id);
            for t in self.lookup(id).transitions() {
                if seen.insert(t.info.target, ()).is_none() {
                    queue.push_back(t.info.target);
                }
            }
        }
        order
    }
}

/// An IO frequency automaton: an arena of states plus the initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    states: Vec<TreeState>,
    root: StateId,
    wildcard: Option<Symbol>,
    version: u64,
}

impl Model {
    /// A model consisting of a single root state.
    pub fn with_root(initial_output: Option<Symbol>) -> Self {
        Model {
            states: vec![TreeState::new(StateId(0), initial_output, None, 0)],
            root: StateId(0),
            wildcard: None,
            version: 0,
        }
    }

    pub(crate) fn from_states(states: Vec<TreeState>, wildcard: Option<Symbol>) -> Self {
        debug_assert!(states.iter().enumerate().all(|(i, s)| s.id.index() == i));
        Model {
            states,
            root: StateId(0),
            wildcard,
            version: 0,
        }
    }

    pub fn state(&self, id: StateId) -> &TreeState {
        &self.states[id.index()]
    }

    pub(crate) fn state_mut(&mut self, id: StateId) -> &mut TreeState {
        &mut self.states[id.index()]
    }

    /// Number of states ever allocated, including ones merged away.
    pub fn arena_len(&self) -> usize {
        self.states.len()
    }

    /// Number of states reachable from the root.
    pub fn size(&self) -> usize {
        self.reachable().len()
    }

    /// Bumped whenever the model is mutated.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn touch(&mut self) {
        self.version += 1;
    }

    pub fn set_wildcard(&mut self, wildcard: Option<Symbol>) {
        self.wildcard = wildcard;
        self.touch();
    }

    /// Appends a (detached) state and returns its id.
    pub fn add_state(&mut self, output: Option<Symbol>) -> StateId {
        let id = StateId(self.states.len() as u32);
        self.states.push(TreeState::new(id, output, None, 0));
        self.touch();
        id
    }

    /// Adds a child reached from `parent` via `input`/`output`, as in a prefix
    /// tree. Returns the existing child if the edge is present.
    pub fn add_child(&mut self, parent: StateId, input: Symbol, output: Symbol, count: u64) -> StateId {
        if let Some(info) = self.state_mut(parent).get_mut(&input, &output) {
            info.count += count;
            info.original_count += count;
            let target = info.target;
            self.touch();
            return target;
        }
        let id = StateId(self.states.len() as u32);
        let depth = self.state(parent).depth + 1;
        let pred = Predecessor {
            state: parent,
            input: input.clone(),
            output: output.clone(),
        };
        self.states
            .push(TreeState::new(id, Some(output.clone()), Some(pred), depth));
        self.state_mut(parent)
            .set_transition(input, output, TransitionInfo::new(id, count));
        self.touch();
        id
    }

    /// Sets (or overwrites) a transition without touching predecessor links.
    /// A target without a parent adopts `source` as its parent.
    pub fn set_transition(&mut self, source: StateId, input: Symbol, output: Symbol, info: TransitionInfo) {
        let target = info.target;
        if target != self.root && self.state(target).parent.is_none() {
            self.state_mut(target).parent = Some(source);
        }
        self.state_mut(source).set_transition(input, output, info);
        self.touch();
    }

    pub fn remove_transition(&mut self, source: StateId, input: &Symbol, output: &Symbol) -> Option<TransitionInfo> {
        let removed = self.state_mut(source).remove_transition(input, output);
        self.touch();
        removed
    }

    /// Keeps only the transitions of `source` for which `keep` holds.
    pub fn retain_transitions(&mut self, source: StateId, keep: impl FnMut(&Transition) -> bool) {
        self.state_mut(source).retain_transitions(keep);
        self.touch();
    }

    /// The `(input, output)` path from the root in the prefix tree.
    pub fn prefix(&self, id: StateId) -> Vec<(Symbol, Symbol)> {
        let mut path = Vec::with_capacity(self.state(id).depth as usize);
        let mut current = self.state(id);
        while let Some(pred) = &current.predecessor {
            path.push((pred.input.clone(), pred.output.clone()));
            current = self.state(pred.state);
        }
        path.reverse();
        path
    }

    pub fn is_deterministic(&self) -> bool {
        is_deterministic(self)
    }

    pub fn is_moore(&self) -> bool {
        is_moore(self)
    }
}

impl StateLookup for Model {
    fn root(&self) -> StateId {
        self.root
    }

    fn lookup(&self, id: StateId) -> &TreeState {
        self.state(id)
    }

    fn wildcard(&self) -> Option<&Symbol> {
        self.wildcard.as_ref()
    }
}

/// Shortlex comparison of two prefixes: shorter first, then pointwise on
/// `(input, output)` pairs.
pub fn compare_prefixes(a: &[(Symbol, Symbol)], b: &[(Symbol, Symbol)]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// The default node order. Ids are assigned in shortlex order of prefixes,
/// so this is an id comparison.
pub fn node_order(a: &TreeState, b: &TreeState) -> Ordering {
    a.id.cmp(&b.id)
}

/// Whether two outputs agree, treating the wildcard as agreeing with anything.
pub(crate) fn outputs_agree(a: &Symbol, b: &Symbol, wildcard: Option<&Symbol>) -> bool {
    a == b || wildcard.is_some_and(|w| a == w || b == w)
}

/// True iff every reachable state has at most one transition per input.
pub fn is_deterministic(view: &impl StateLookup) -> bool {
    deterministic_witness(view).is_none()
}

pub(crate) fn deterministic_witness(view: &impl StateLookup) -> Option<StateId> {
    view.reachable().into_iter().find(|&id| {
        view.lookup(id).groups().any(|(_, group)| group.len() > 1)
    })
}

/// True iff all transitions entering a state carry the same output. The
/// root's state output counts as the output of the initial edge.
pub fn is_moore(view: &impl StateLookup) -> bool {
    moore_witness(view).is_none()
}

pub(crate) fn moore_witness(view: &impl StateLookup) -> Option<StateId> {
    let wildcard = view.wildcard();
    let mut entered: HashMap<StateId, &Symbol> = HashMap::new();
    let root = view.root();
    if let Some(out) = view.lookup(root).output() {
        if wildcard != Some(out) {
            entered.insert(root, out);
        }
    }
    for id in view.reachable() {
        for t in view.lookup(id).transitions() {
            if wildcard == Some(&t.output) {
                continue;
            }
            match entered.get(&t.info.target) {
                Some(prev) if *prev != &t.output => return Some(t.info.target),
                Some(_) => {}
                None => {
                    entered.insert(t.info.target, &t.output);
                }
            }
        }
    }
    None
}

/// One outcome of a `(state, input)` distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub output: Symbol,
    pub target: StateId,
    pub probability: f64,
}

/// Normalised transition probabilities for every reachable `(state, input)`.
pub fn normalize(view: &impl StateLookup) -> Result<BTreeMap<(StateId, Symbol), Vec<Outcome>>, Error> {
    let mut result = BTreeMap::new();
    for id in view.reachable() {
        for (input, group) in view.lookup(id).groups() {
            let total: u64 = group.iter().map(|t| t.info.count).sum();
            if total == 0 {
                return Err(Error::ZeroMass {
                    state: id,
                    input: input.clone(),
                });
            }
            let outcomes = group
                .iter()
                .map(|t| Outcome {
                    output: t.output.clone(),
                    target: t.info.target,
                    probability: t.info.count as f64 / total as f64,
                })
                .collect();
            result.insert((id, input.clone()), outcomes);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(s: &str) -> Symbol {
        Symbol::new(s)
    }

    fn pairs(raw: &[(&str, &str)]) -> Vec<(Symbol, Symbol)> {
        raw.iter().map(|(i, o)| (sym(i), sym(o))).collect()
    }

    #[test]
    fn shortlex_examples() {
        assert_eq!(compare_prefixes(&[], &pairs(&[("x", "a")])), Ordering::Less);
        assert_eq!(
            compare_prefixes(&pairs(&[("x", "a")]), &pairs(&[("y", "b")])),
            Ordering::Less
        );
        assert_eq!(
            compare_prefixes(&pairs(&[("x", "a"), ("x", "a")]), &pairs(&[("x", "a"), ("y", "b")])),
            Ordering::Less
        );
        assert_eq!(
            compare_prefixes(&pairs(&[("y", "b")]), &pairs(&[("x", "a"), ("x", "a")])),
            Ordering::Less
        );
    }

    #[test]
    fn empty_symbol_rejected() {
        assert!(matches!(Symbol::parse(""), Err(Error::EmptySymbol)));
    }

    #[test]
    fn nondeterministic_state_detected() {
        let mut m = Model::with_root(None);
        m.add_child(StateId(0), sym("x"), sym("a"), 1);
        assert!(m.is_deterministic());
        m.add_child(StateId(0), sym("x"), sym("b"), 1);
        assert!(!m.is_deterministic());
    }

    #[test]
    fn moore_violation_via_shared_target() {
        let mut m = Model::with_root(Some(sym("o")));
        let u = m.add_child(StateId(0), sym("x"), sym("a"), 1);
        assert!(m.is_moore());
        // second edge into u with a different output
        m.set_transition(StateId(0), sym("y"), sym("b"), TransitionInfo::new(u, 1));
        assert!(!m.is_moore());
    }

    #[test]
    fn normalize_counts() {
        let mut m = Model::with_root(None);
        m.add_child(StateId(0), sym("x"), sym("a"), 3);
        m.add_child(StateId(0), sym("x"), sym("b"), 1);
        m.add_child(StateId(0), sym("y"), sym("a"), 5);
        let dist = normalize(&m).unwrap();
        let x = &dist[&(StateId(0), sym("x"))];
        assert_eq!(x[0].probability, 0.75);
        assert_eq!(x[1].probability, 0.25);
        assert_eq!(dist[&(StateId(0), sym("y"))][0].probability, 1.0);
    }

    #[test]
    fn normalize_rejects_zero_mass() {
        let mut m = Model::with_root(None);
        m.set_transition(StateId(0), sym("x"), sym("a"), TransitionInfo::new(StateId(0), 0));
        assert!(matches!(normalize(&m), Err(Error::ZeroMass { .. })));
    }

    #[test]
    fn input_groups_split_by_input() {
        let mut m = Model::with_root(None);
        m.add_child(StateId(0), sym("b"), sym("1"), 1);
        m.add_child(StateId(0), sym("a"), sym("2"), 1);
        m.add_child(StateId(0), sym("a"), sym("1"), 1);
        let groups: Vec<_> = m
            .state(StateId(0))
            .groups()
            .map(|(i, g)| (i.as_str().to_owned(), g.len()))
            .collect();
        assert_eq!(groups, vec![("a".to_owned(), 2), ("b".to_owned(), 1)]);
        assert_eq!(m.state(StateId(0)).on_input(&sym("a"))[0].output, sym("1"));
        assert!(m.state(StateId(0)).on_input(&sym("c")).is_empty());
    }

    fn prefix_strategy() -> impl Strategy<Value = Vec<(Symbol, Symbol)>> {
        prop::collection::vec(("[abc]", "[xy]"), 0..5)
            .prop_map(|v| v.into_iter().map(|(i, o)| (sym(&i), sym(&o))).collect())
    }

    proptest! {
        #[test]
        fn shortlex_is_a_total_order(a in prefix_strategy(), b in prefix_strategy(), c in prefix_strategy()) {
            let ab = compare_prefixes(&a, &b);
            prop_assert_eq!(ab, compare_prefixes(&b, &a).reverse());
            prop_assert_eq!(ab == Ordering::Equal, a == b);
            if ab != Ordering::Greater && compare_prefixes(&b, &c) != Ordering::Greater {
                prop_assert_ne!(compare_prefixes(&a, &c), Ordering::Greater);
            }
        }
    }
}
