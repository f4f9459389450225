//! Compatibility checks and score functions for the merge loop.

use crate::automata::{Model, StateLookup, Symbol, Transition, TreeState};
use crate::engine::{MergeStrategy, NodeRef, Partition, Score};
use crate::error::{Error, Result};

/// A symmetric predicate over a partition state and a joining state.
pub trait PairCompat: Send {
    fn compatible(&self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool;

    /// Conjunction with another predicate.
    fn and<C: PairCompat>(self, other: C) -> And<Self, C>
    where
        Self: Sized,
    {
        And(self, other)
    }
}

impl<F> PairCompat for F
where
    F: Fn(NodeRef<'_>, NodeRef<'_>) -> bool + Send,
{
    fn compatible(&self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        self(a, b)
    }
}

#[derive(Clone, Debug)]
pub struct And<A, B>(pub A, pub B);

impl<A: PairCompat, B: PairCompat> PairCompat for And<A, B> {
    fn compatible(&self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        self.0.compatible(a, b) && self.1.compatible(a, b)
    }
}

/// RPNI: no extra constraints, every structurally valid merge is accepted.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rpni;

impl MergeStrategy for Rpni {}

/// Number of merged states minus number of partitions.
pub fn edsm_score(partition: &Partition) -> i64 {
    partition.assignment().len() as i64 - partition.representative_count() as i64
}

/// Evidence driven state merging.
#[derive(Clone, Copy, Debug, Default)]
pub struct Edsm;

impl MergeStrategy for Edsm {
    fn score(&mut self, partition: &Partition, _model: &Model) -> Score {
        Score::Value(edsm_score(partition) as f64)
    }
}

/// Hoeffding-bound test for equality of two empirical frequencies.
pub fn hoeffding_compat(f1: u64, n1: u64, f2: u64, n2: u64, epsilon: f64) -> bool {
    if n1 == 0 || n2 == 0 {
        return true;
    }
    let (n1, n2) = (n1 as f64, n2 as f64);
    let diff = (f1 as f64 / n1 - f2 as f64 / n2).abs();
    let bound = ((2.0 / epsilon).ln() / 2.0).sqrt() * (1.0 / n1.sqrt() + 1.0 / n2.sqrt());
    diff < bound
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoeffdingParams {
    pub epsilon: f64,
}

impl HoeffdingParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(HoeffdingParams { epsilon })
    }
}

impl Default for HoeffdingParams {
    fn default() -> Self {
        HoeffdingParams { epsilon: 0.05 }
    }
}

fn output_counts<'a>(
    a: &'a [Transition],
    b: &'a [Transition],
    original: bool,
) -> impl Iterator<Item = (u64, u64)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || match (a.get(i), b.get(j)) {
        (None, None) => None,
        (Some(x), None) => {
            i += 1;
            Some((x.info.count(original), 0))
        }
        (None, Some(y)) => {
            j += 1;
            Some((0, y.info.count(original)))
        }
        (Some(x), Some(y)) => match x.output.cmp(&y.output) {
            std::cmp::Ordering::Less => {
                i += 1;
                Some((x.info.count(original), 0))
            }
            std::cmp::Ordering::Greater => {
                j += 1;
                Some((0, y.info.count(original)))
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
                Some((x.info.count(original), y.info.count(original)))
            }
        },
    })
}

/// IOAlergia compatibility: for every shared input, every output frequency
/// must pass the Hoeffding test.
pub fn ioalergia_compat(a: &TreeState, b: &TreeState, epsilon: f64, use_original_counts: bool) -> bool {
    for (input, a_trans) in a.groups() {
        let b_trans = b.on_input(input);
        if b_trans.is_empty() {
            continue;
        }
        let a_tot = a.total_count(input, use_original_counts);
        let b_tot = b.total_count(input, use_original_counts);
        for (a_cnt, b_cnt) in output_counts(a_trans, b_trans, use_original_counts) {
            if !hoeffding_compat(a_cnt, a_tot, b_cnt, b_tot, epsilon) {
                return false;
            }
        }
    }
    true
}

/// [`ioalergia_compat`] as a reusable pair predicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IoAlergiaCompat {
    pub epsilon: f64,
    pub use_original_counts: bool,
}

impl IoAlergiaCompat {
    /// On original PTA counts.
    pub fn on_pta(params: HoeffdingParams) -> Self {
        IoAlergiaCompat {
            epsilon: params.epsilon,
            use_original_counts: true,
        }
    }

    /// On the counts of the current model.
    pub fn on_model(params: HoeffdingParams) -> Self {
        IoAlergiaCompat {
            epsilon: params.epsilon,
            use_original_counts: false,
        }
    }
}

impl PairCompat for IoAlergiaCompat {
    fn compatible(&self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        ioalergia_compat(a.state(), b.state(), self.epsilon, self.use_original_counts)
    }
}

/// Uses a pair predicate as local compatibility.
#[derive(Clone, Debug)]
pub struct CompatStrategy<C>(pub C);

impl<C: PairCompat> MergeStrategy for CompatStrategy<C> {
    fn local_compatibility(&mut self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        self.0.compatible(a, b)
    }
}

/// Checks `compat(partition_state(q), q)` for every state `q` in the
/// assignment. Accepts iff all checks pass.
pub fn local_to_global<C: PairCompat + ?Sized>(compat: &C, partition: &Partition, model: &Model) -> Score {
    let ok = partition.assignment().iter().all(|(&q, &rep)| {
        let merged = partition.merged_state(rep).unwrap_or_else(|| model.state(rep));
        compat.compatible(NodeRef::new(merged, model), NodeRef::new(model.state(q), model))
    });
    Score::from(ok)
}

/// Lifts a local pair predicate to a score function on the partition.
#[derive(Clone, Debug)]
pub struct PartitionCompatStrategy<C>(pub C);

impl<C: PairCompat> MergeStrategy for PartitionCompatStrategy<C> {
    fn score(&mut self, partition: &Partition, model: &Model) -> Score {
        local_to_global(&self.0, partition, model)
    }
}

/// Counts the local compatibility checks of a candidate and uses the count
/// as its score.
#[derive(Clone, Debug)]
pub struct EvidenceStrategy<C> {
    compat: C,
    evidence: u64,
}

impl<C: PairCompat> EvidenceStrategy<C> {
    pub fn new(compat: C) -> Self {
        EvidenceStrategy { compat, evidence: 0 }
    }

    pub fn evidence(&self) -> u64 {
        self.evidence
    }
}

impl<C: PairCompat> MergeStrategy for EvidenceStrategy<C> {
    fn local_compatibility(&mut self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        self.evidence += 1;
        self.compat.compatible(a, b)
    }

    fn score(&mut self, _partition: &Partition, _model: &Model) -> Score {
        Score::Value(self.evidence as f64)
    }

    fn reset(&mut self) {
        self.evidence = 0;
    }
}

/// Adds a pair predicate to the local compatibility of a strategy.
#[derive(Clone, Debug)]
pub struct WithLocal<S, C> {
    pub inner: S,
    pub compat: C,
}

impl<S: MergeStrategy, C: PairCompat> MergeStrategy for WithLocal<S, C> {
    fn local_compatibility(&mut self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        self.compat.compatible(a, b) && self.inner.local_compatibility(a, b)
    }

    fn score(&mut self, partition: &Partition, model: &Model) -> Score {
        self.inner.score(partition, model)
    }

    fn reset(&mut self) {
        self.inner.reset();
    }
}

/// IOAlergia with evidence counting on top.
pub fn ioalergia_edsm(params: HoeffdingParams) -> EvidenceStrategy<IoAlergiaCompat> {
    EvidenceStrategy::new(IoAlergiaCompat::on_pta(params))
}

/// States whose prefixes differ in the parity of occurrences of any of the
/// given inputs are incompatible.
#[derive(Clone, Debug)]
pub struct ParityCompat {
    pub inputs: Vec<Symbol>,
}

impl ParityCompat {
    pub fn new(inputs: impl IntoIterator<Item = Symbol>) -> Self {
        ParityCompat {
            inputs: inputs.into_iter().collect(),
        }
    }

    /// Lock and door actions of the car alarm.
    pub fn car_alarm() -> Self {
        ParityCompat::new([Symbol::new("l"), Symbol::new("d")])
    }

    fn parity(&self, prefix: &[(Symbol, Symbol)]) -> Vec<bool> {
        self.inputs
            .iter()
            .map(|key| prefix.iter().filter(|(i, _)| i == key).count() % 2 == 1)
            .collect()
    }
}

impl PairCompat for ParityCompat {
    fn compatible(&self, a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
        self.parity(&a.prefix()) == self.parity(&b.prefix())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyParams {
    pub error_rate: f64,
    pub threshold: f64,
}

impl NoisyParams {
    pub fn new(error_rate: f64, threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&error_rate) {
            return Err(Error::InvalidConfig(format!("error rate must lie in [0, 1), got {error_rate}")));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        Ok(NoisyParams { error_rate, threshold })
    }
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`, by exact summation in log space.
pub fn binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_choose_k: f64 = (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
    let mut term = ln_choose_k + k as f64 * lp + (n - k) as f64 * lq;
    let mode = ((n + 1) as f64 * p).floor() as u64;
    let (mut max, mut acc) = (term, 1.0f64);
    for j in k..n {
        term += ((n - j) as f64).ln() - ((j + 1) as f64).ln() + lp - lq;
        if term > max {
            acc = acc * (max - term).exp() + 1.0;
            max = term;
        } else {
            acc += (term - max).exp();
        }
        if j > mode && term < max - 60.0 {
            break;
        }
    }
    (max + acc.ln()).exp().min(1.0)
}

/// Output with the largest count among `transitions`; ties go to the
/// textually smallest output.
pub fn main_output(transitions: &[Transition]) -> Option<&Symbol> {
    transitions
        .iter()
        .fold(None::<&Transition>, |best, t| match best {
            Some(b) if b.info.count >= t.info.count => Some(b),
            _ => Some(t),
        })
        .map(|t| &t.output)
}

/// Mismatch statistics over the merged states of a partition.
pub fn partition_mismatches(partition: &Partition) -> (u64, u64) {
    let (mut mismatches, mut total) = (0, 0);
    for state in partition.merged_states() {
        for (_, group) in state.groups() {
            let main = main_output(group).expect("groups are non-empty");
            for t in group {
                if &t.output != main {
                    mismatches += t.info.count;
                }
                total += t.info.count;
            }
        }
    }
    (mismatches, total)
}

/// Probability of seeing at least the partition's mismatches under the
/// given noise rate; rejects below the threshold.
pub fn noisy_nd_score(partition: &Partition, params: NoisyParams) -> Score {
    let (mismatches, total) = partition_mismatches(partition);
    noisy_score_from_counts(mismatches, total, params)
}

pub fn noisy_score_from_counts(mismatches: u64, total: u64, params: NoisyParams) -> Score {
    let p_obs = binomial_upper_tail(total, mismatches, params.error_rate);
    if p_obs < params.threshold {
        Score::Reject
    } else {
        Score::Value(p_obs)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NoisyStrategy(pub NoisyParams);

impl MergeStrategy for NoisyStrategy {
    fn score(&mut self, partition: &Partition, _model: &Model) -> Score {
        noisy_nd_score(partition, self.0)
    }
}

/// Keeps only the main-output transition per state and input.
pub fn dominant_output_postprocess(mut model: Model) -> Model {
    for id in model.reachable() {
        let keep: Vec<(Symbol, Symbol)> = model
            .state(id)
            .groups()
            .map(|(input, group)| (input.clone(), main_output(group).expect("non-empty").clone()))
            .collect();
        model.retain_transitions(id, |t| keep.iter().any(|(i, o)| i == &t.input && o == &t.output));
    }
    model
}
