//! Thinging machine (TM) models.
//!
//! The static plane ([`model`]) holds machines, things, the five generic
//! actions and the flow and trigger arcs between them. The dynamic plane
//! ([`events`]) cuts the static model into event regions and derives a
//! behavioral graph over them, which [`sim`] executes under a scenario.

pub mod corpus;
pub mod dsl;
pub mod events;
pub mod ids;
pub mod model;
pub mod render;
pub mod sd;
pub mod sim;
pub mod transform;
pub mod validate;

pub use dsl::{
    from_json, parse_model, print_model, to_json, Diagnostics, JsonError, ParseDiagnostic,
};
pub use events::{
    check_behavior, check_coverage, infer_behavior, parse_overlay, BehaviorDiff, BehaviorEdge,
    BehaviorGraph, EventDef, EventOverlay,
};
pub use model::{
    Action, ActionId, ActionKind, ArcKind, Endpoint, EventId, FlowArc, Guard, Machine, MachineId,
    ModelError, StaticModel, Storage, StorageId, Thing, ThingId, TriggerArc,
};
pub use render::{render_behavior, render_overlay, render_static, RenderOptions, View};
pub use sd::{parse_sd, sd_to_tm, SdDoc};
pub use sim::{all_traces, parse_scenario, simulate, Scenario, Terminal, Trace};
pub use transform::{elaborate, simplify, TransformError};
pub use validate::{validate, ValidationReport};
