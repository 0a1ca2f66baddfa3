//! Breakdown-risk modelling for ground-vehicle fleets.
//!
//! The pipeline runs from raw sub-work-order exports to a weekly per-vehicle
//! panel, through three probability-of-repair learners, to evaluation
//! (separation ratio, feature ablation) and a proactive-repair rollout.
//!
//! ```text
//! ingest -> panel -> features -> models -> eval
//!                                     \-> policy
//! ```
//!
//! `synth` produces datasets in the same export dialect from a known hazard,
//! which is what the tests lean on for ground truth.
//!
//! Data-parallel loops (forest trees, per-vehicle panel construction,
//! ablation rows, synthetic generation) go through [`par`]; disabling the
//! default `parallel` feature swaps rayon out for plain iteration with
//! identical results.

pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod panel;
pub mod par;
pub mod pipeline;
pub mod policy;
pub mod seed;
pub mod synth;

pub use eval::{separation_ratio, split, EvalReport, SplitSpec};
pub use features::{encode, standardize, FeatureEncoder, FeatureMatrix, FeatureSpec};
pub use ingest::{parse_subworkorders, SchemaConfig, SubWorkOrderRecord, WorkPlanClass};
pub use models::{ModelConfig, ModelKind, RiskModel};
pub use panel::{build_panel, Panel, PanelOptions, PanelRow};
pub use pipeline::TrainedModel;
pub use policy::{mel_risk, simulate_policy, MelSpec, Policy, PolicyTrace};
pub use synth::{generate_fleet, FleetConfig, GroundTruth};
