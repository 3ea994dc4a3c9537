//! Simulation and analysis toolkit for non-stationary, locally precise data
//! models: measure sequences drawn from a finite credal set, seeded outcome
//! generation, relative-frequency analytics, selection rules and coherent
//! lower/upper probabilities.

pub mod builder;
pub mod error;
pub mod event;
pub mod frequency;
pub mod generator;
pub mod imprecision;
pub mod io;
pub mod kappa;
pub mod scenario;
pub mod selection;
pub mod simplex;
pub mod stream;

pub use builder::{BuilderSnapshot, Phase, SequenceBuilder, ToleranceSchedule, Traversal};
pub use error::{Error, Result};
pub use event::Event;
pub use frequency::{AverageHistory, FreqTracker, TailCloud};
pub use generator::{sample, sample_parallel, OutcomeSequence};
pub use imprecision::{EnvelopePair, Rectangle, SetFunction, TableSetFunction};
pub use kappa::KappaFn;
pub use scenario::{run_scenario, ExperimentConfig};
pub use selection::{RuleSpec, SelectionRule, SubseqTracker};
pub use simplex::{ConvexWeights, CredalSet, FiniteBlock, Gamble, Measure, TargetPath};
pub use stream::{
    ConstantStream, CyclicStream, MaterializedStream, MeasureStream, WeirdCoinStream,
};
