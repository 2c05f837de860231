//! Lightweight model-based testing.
//!
//! A suite is a set of directed graphs: vertices are verifications, edges
//! are actions. Vertices that share a `sharedState` label connect models.
//! Edges may carry guards and assignments over a small int/bool language.
//! A generator picks the walk and a stop condition ends it. The engine
//! either drives an [`engine::Adapter`] online or emits the path offline.
//!
//! ```
//! use mbt_core::{generate_offline, parse_stop_spec, parse_suite, GeneratorKind};
//!
//! let suite = parse_suite(r#"{
//!   "entry": {"model": "m", "vertex": "a"},
//!   "models": [{"id": "m", "name": "toggle",
//!     "vertices": [{"id": "a", "name": "n_off"}, {"id": "b", "name": "n_on"}],
//!     "edges": [{"id": "on", "name": "e_on", "source": "a", "target": "b"},
//!               {"id": "off", "name": "e_off", "source": "b", "target": "a"}]}]}"#).unwrap();
//! let stop = parse_stop_spec("edge_coverage(100)").unwrap();
//! let steps = generate_offline(&suite, &GeneratorKind::QuickRandom, &stop, 7).unwrap();
//! assert_eq!(steps.len(), 5);
//! ```
//!
//! The `examples/` directory has one program per capability:
//! `parse_and_validate`, `guards`, `generators`, `stop_conditions`,
//! `online_run`, `code_coverage` and `large_suite`.

pub mod cli;
pub mod coverage;
pub mod engine;
pub mod generators;
pub mod guard;
pub mod model;
pub mod sim;
pub mod stop;

pub use coverage::{format_stats, CoverageSnapshot, CoverageStore};
pub use engine::{generate_offline, run_online, Adapter, RunConfig, RunReport};
pub use generators::{GeneratorKind, Step, StepKind};
pub use guard::{Context, Value};
pub use model::{parse_suite, validate_suite, ElementRef, Suite};
pub use sim::{load_sut_spec, Simulator, SutSpec};
pub use stop::{parse_stop_spec, StopCondition};
