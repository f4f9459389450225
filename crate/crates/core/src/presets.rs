//! Named algorithm configurations.

use std::fmt;
use std::str::FromStr;

use crate::automata::{BehaviorConfig, Model, OutputBehavior, Symbol, TransitionBehavior};
use crate::engine::{EngineConfig, Instrumentation, MergeStrategy, RunStats, StateMerging};
use crate::error::{Error, Result};
use crate::extraction::{to_automaton, to_iofa, FamilyOverride, LearnedModel};
use crate::ingestion::{build_pta, TraceKind, TraceSet};
use crate::scoring::{
    dominant_output_postprocess, ioalergia_edsm, CompatStrategy, Edsm, HoeffdingParams, IoAlergiaCompat,
    NoisyParams, NoisyStrategy, ParityCompat, PartitionCompatStrategy, Rpni, WithLocal,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Rpni,
    Edsm,
    Alergia,
    IoAlergia,
    IoAlergiaPartition,
    IoAlergiaEdsm,
    Noisy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Rpni,
        Algorithm::Edsm,
        Algorithm::Alergia,
        Algorithm::IoAlergia,
        Algorithm::IoAlergiaPartition,
        Algorithm::IoAlergiaEdsm,
        Algorithm::Noisy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rpni => "rpni",
            Algorithm::Edsm => "edsm",
            Algorithm::Alergia => "alergia",
            Algorithm::IoAlergia => "ioalergia",
            Algorithm::IoAlergiaPartition => "ioalergia-partition",
            Algorithm::IoAlergiaEdsm => "ioalergia-edsm",
            Algorithm::Noisy => "noisy",
        }
    }

    /// Transition behavior used during merging.
    pub fn default_transition(self) -> TransitionBehavior {
        match self {
            Algorithm::Rpni | Algorithm::Edsm => TransitionBehavior::Deterministic,
            Algorithm::Noisy => TransitionBehavior::Nondeterministic,
            _ => TransitionBehavior::Stochastic,
        }
    }

    fn is_alergia(self) -> bool {
        matches!(
            self,
            Algorithm::Alergia | Algorithm::IoAlergia | Algorithm::IoAlergiaPartition | Algorithm::IoAlergiaEdsm
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub hoeffding: HoeffdingParams,
    pub noisy: NoisyParams,
    /// Inputs whose occurrence parity must agree between merged states.
    pub parity_inputs: Vec<Symbol>,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            hoeffding: HoeffdingParams::default(),
            noisy: NoisyParams {
                error_rate: 0.01,
                threshold: 0.05,
            },
            parity_inputs: Vec::new(),
        }
    }
}

/// Engine flags; `None` keeps the algorithm's default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub min_blue: bool,
    pub depth_first: bool,
    pub compat_on_pta: Option<bool>,
    pub compat_on_futures: Option<bool>,
}

/// A fully resolved learning setup.
pub struct Learner {
    pub algorithm: Algorithm,
    pub engine: StateMerging,
    /// Behavior used to extract the final automaton.
    pub extraction: BehaviorConfig,
    pub family_override: Option<FamilyOverride>,
}

pub struct LearnOutcome {
    pub model: LearnedModel,
    pub internal: Model,
    pub stats: RunStats,
}

fn default_output(kind: TraceKind, data: Option<&TraceSet>) -> OutputBehavior {
    match (kind, data) {
        (TraceKind::IoTraces, Some(TraceSet::IoTraces(traces))) => {
            if traces.first().is_some_and(|t| t.initial_output.is_none()) {
                OutputBehavior::Mealy
            } else {
                OutputBehavior::Moore
            }
        }
        _ => OutputBehavior::Moore,
    }
}

fn strategy(
    algorithm: Algorithm,
    params: &Parameters,
) -> Box<dyn MergeStrategy> {
    let h = params.hoeffding;
    let base: Box<dyn MergeStrategy> = match algorithm {
        Algorithm::Rpni => Box::new(Rpni),
        Algorithm::Edsm => Box::new(Edsm),
        Algorithm::Alergia | Algorithm::IoAlergia => Box::new(CompatStrategy(IoAlergiaCompat::on_pta(h))),
        Algorithm::IoAlergiaPartition => Box::new(PartitionCompatStrategy(IoAlergiaCompat::on_model(h))),
        Algorithm::IoAlergiaEdsm => Box::new(ioalergia_edsm(h)),
        Algorithm::Noisy => Box::new(NoisyStrategy(params.noisy)),
    };
    if params.parity_inputs.is_empty() {
        base
    } else {
        Box::new(WithLocal {
            inner: base,
            compat: ParityCompat::new(params.parity_inputs.iter().cloned()),
        })
    }
}

impl Learner {
    /// Resolves behaviors and flags for `algorithm` on data of `kind`.
    /// Contradictory combinations are rejected with `InvalidConfig`.
    pub fn new(
        algorithm: Algorithm,
        data: &TraceSet,
        output: Option<OutputBehavior>,
        transition: Option<TransitionBehavior>,
        params: Parameters,
        flags: Flags,
    ) -> Result<Self> {
        let kind = data.kind();
        let output = output.unwrap_or_else(|| default_output(kind, Some(data)));
        let transition = transition.unwrap_or_else(|| algorithm.default_transition());
        let behavior = BehaviorConfig::new(output, transition);
        let invalid = |why: &str| Err(Error::InvalidConfig(format!("{algorithm} with {behavior}: {why}")));

        match algorithm {
            Algorithm::Rpni | Algorithm::Edsm if transition == TransitionBehavior::Stochastic => {
                return invalid("state merging without a statistical test cannot learn stochastic models")
            }
            a if a.is_alergia() && transition != TransitionBehavior::Stochastic => {
                return invalid("Alergia variants learn stochastic models")
            }
            Algorithm::Alergia if output != OutputBehavior::Moore => return invalid("Alergia learns Moore-style models"),
            Algorithm::Noisy if transition != TransitionBehavior::Nondeterministic => {
                return invalid("noisy learning merges nondeterministically and extracts a deterministic model")
            }
            _ => {}
        }

        let (on_pta, on_futures) = match algorithm {
            Algorithm::Alergia | Algorithm::IoAlergia | Algorithm::IoAlergiaEdsm => (true, true),
            _ => (false, false),
        };
        let mut config = EngineConfig {
            behavior,
            strategy: strategy(algorithm, &params),
            ..EngineConfig::new(behavior, Rpni)
        }
        .compat_on_pta(flags.compat_on_pta.unwrap_or(on_pta))
        .compat_on_futures(flags.compat_on_futures.unwrap_or(on_futures))
        .min_blue(flags.min_blue)
        .depth_first(flags.depth_first);
        let mut extraction = behavior;
        if algorithm == Algorithm::Noisy {
            config = config.postprocessing(dominant_output_postprocess);
            extraction = BehaviorConfig::new(output, TransitionBehavior::Deterministic);
        }
        config.validate()?;

        let family_override = match kind {
            TraceKind::LabeledWords => Some(FamilyOverride::dfa()),
            TraceKind::Observations => Some(FamilyOverride::MarkovChain),
            TraceKind::IoTraces => None,
        };
        build_pta_preflight(data, behavior)?;
        Ok(Learner {
            algorithm,
            engine: StateMerging::new(config),
            extraction,
            family_override,
        })
    }

    pub fn behavior(&self) -> BehaviorConfig {
        self.engine.config.behavior
    }

    pub fn run(&mut self, data: &TraceSet, instrumentation: Option<&mut dyn Instrumentation>) -> Result<LearnOutcome> {
        let pta = build_pta(data, self.behavior())?;
        let (internal, stats) = self.engine.run_on(pta, instrumentation)?;
        let model = to_automaton(&internal, self.extraction, self.family_override.clone())?;
        Ok(LearnOutcome { model, internal, stats })
    }

    /// The internal model in the interchange schema.
    pub fn unconverted(outcome: &LearnOutcome) -> LearnedModel {
        to_iofa(&outcome.internal)
    }
}

fn build_pta_preflight(data: &TraceSet, behavior: BehaviorConfig) -> Result<()> {
    let supported = match data.kind() {
        TraceKind::IoTraces => true,
        TraceKind::LabeledWords => behavior == BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Deterministic),
        TraceKind::Observations => behavior == BehaviorConfig::new(OutputBehavior::Moore, TransitionBehavior::Stochastic),
    };
    if supported {
        Ok(())
    } else {
        Err(Error::UnsupportedData {
            kind: data.kind().to_string(),
            behavior: behavior.to_string(),
        })
    }
}
