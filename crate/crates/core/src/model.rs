//! The static plane: machines, things, the five generic actions, flow and
//! trigger arcs, and storages.
//!
//! A [`StaticModel`] is built incrementally through the `add_*` methods,
//! each of which either preserves every structural invariant or rejects the
//! element and leaves the model untouched. Collections are keyed maps so
//! iteration order is always sorted by id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use crate::ids::{ActionId, EventId, MachineId, StorageId, ThingId};

/// The five generic actions. Arrival and acceptance are folded into
/// [`ActionKind::Receive`] and have no representation of their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    Create,
    Process,
    Release,
    Transfer,
    Receive,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Create,
        ActionKind::Process,
        ActionKind::Release,
        ActionKind::Transfer,
        ActionKind::Receive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Create => "create",
            ActionKind::Process => "process",
            ActionKind::Release => "release",
            ActionKind::Transfer => "transfer",
            ActionKind::Receive => "receive",
        }
    }

    /// True for the kinds whose job is moving a thing across a machine boundary.
    pub fn is_boundary(self) -> bool {
        matches!(
            self,
            ActionKind::Release | ActionKind::Transfer | ActionKind::Receive
        )
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown action kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub id: MachineId,
    pub name: String,
    pub parent: Option<MachineId>,
    pub children: Vec<MachineId>,
}

impl Machine {
    pub fn root(name: &str) -> Self {
        Machine {
            id: name.into(),
            name: name.to_string(),
            parent: None,
            children: Vec::new(),
        }
    }

    pub fn child(parent: &MachineId, name: &str) -> Self {
        Machine {
            id: format!("{parent}.{name}").into(),
            name: name.to_string(),
            parent: Some(parent.clone()),
            children: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thing {
    pub id: ThingId,
    pub name: String,
    /// Machine the thing is declared in. Only affects where it is printed.
    pub home: MachineId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub id: ActionId,
    pub kind: ActionKind,
    pub owner: MachineId,
    pub thing: ThingId,
    /// Step label, e.g. the circled number `"14"` on a diagram.
    pub label: Option<String>,
}

impl Action {
    /// The last path segment of the id.
    pub fn local_name(&self) -> &str {
        local_name(self.id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Storage {
    pub id: StorageId,
    pub owner: MachineId,
    pub name: String,
    pub thing: ThingId,
}

/// Either end of a flow arc.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Action(ActionId),
    Storage(StorageId),
}

impl Endpoint {
    pub fn as_str(&self) -> &str {
        match self {
            Endpoint::Action(a) => a.as_str(),
            Endpoint::Storage(s) => s.as_str(),
        }
    }

    pub fn as_action(&self) -> Option<&ActionId> {
        match self {
            Endpoint::Action(a) => Some(a),
            Endpoint::Storage(_) => None,
        }
    }

    pub fn is_storage(&self) -> bool {
        matches!(self, Endpoint::Storage(_))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<ActionId> for Endpoint {
    fn from(a: ActionId) -> Self {
        Endpoint::Action(a)
    }
}

impl From<StorageId> for Endpoint {
    fn from(s: StorageId) -> Self {
        Endpoint::Storage(s)
    }
}

/// Solid arrow: one thing moving between two nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowArc {
    pub id: String,
    pub from: Endpoint,
    pub to: Endpoint,
}

impl FlowArc {
    /// A flow arc with the canonical id `from->to`.
    pub fn new(from: impl Into<Endpoint>, to: impl Into<Endpoint>) -> Self {
        let (from, to) = (from.into(), to.into());
        FlowArc {
            id: flow_arc_id(&from, &to),
            from,
            to,
        }
    }
}

pub fn flow_arc_id(from: &Endpoint, to: &Endpoint) -> String {
    format!("{from}->{to}")
}

pub fn trigger_arc_id(from: &ActionId, to: &ActionId) -> String {
    format!("{from}~>{to}")
}

/// A `key=value` condition selecting one branch of an alternative.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Guard {
    pub key: String,
    pub value: String,
}

impl Guard {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Result<Self, ModelError> {
        let (key, value) = (key.into(), value.into());
        if !is_token(&key) || !is_token(&value) {
            return Err(ModelError::InvalidGuard { key, value });
        }
        Ok(Guard { key, value })
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

/// Dashed arrow: one series of movements starting another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerArc {
    pub id: String,
    pub from: ActionId,
    pub to: ActionId,
    pub guard: Option<Guard>,
}

impl TriggerArc {
    pub fn new(from: ActionId, to: ActionId, guard: Option<Guard>) -> Self {
        TriggerArc {
            id: trigger_arc_id(&from, &to),
            from,
            to,
            guard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcKind {
    Flow,
    Trigger,
}

/// One outgoing arc as reported by [`StaticModel::successors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub kind: ArcKind,
    pub arc_id: String,
    pub target: Endpoint,
    pub guard: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("`{element}` refers to unknown `{reference}`")]
    DanglingReference { element: String, reference: String },
    #[error("arc `{0}` starts and ends at the same node")]
    SelfLoopArc(String),
    #[error("flow `{arc}` connects thing `{from_thing}` to thing `{to_thing}`")]
    CrossThingFlow {
        arc: String,
        from_thing: ThingId,
        to_thing: ThingId,
    },
    #[error("unknown action `{0}`")]
    UnknownAction(ActionId),
    #[error("machine `{parent}` already has a child named `{name}`")]
    DuplicateSiblingName { parent: String, name: String },
    #[error("machine id `{id}` does not match its parent and name")]
    MalformedMachineId { id: MachineId },
    #[error("guard `{key}={value}` must be two nonempty tokens")]
    InvalidGuard { key: String, value: String },
}

/// The static plane of a thinging machine model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticModel {
    name: String,
    simplified: bool,
    machines: BTreeMap<MachineId, Machine>,
    things: BTreeMap<ThingId, Thing>,
    actions: BTreeMap<ActionId, Action>,
    flows: BTreeMap<String, FlowArc>,
    triggers: BTreeMap<String, TriggerArc>,
    storages: BTreeMap<StorageId, Storage>,
}

impl StaticModel {
    pub fn new(name: impl Into<String>) -> Self {
        StaticModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Set on the output of the simplify transform.
    pub fn is_simplified(&self) -> bool {
        self.simplified
    }

    pub fn set_simplified(&mut self, simplified: bool) {
        self.simplified = simplified;
    }

    pub fn machines(&self) -> &BTreeMap<MachineId, Machine> {
        &self.machines
    }

    pub fn things(&self) -> &BTreeMap<ThingId, Thing> {
        &self.things
    }

    pub fn actions(&self) -> &BTreeMap<ActionId, Action> {
        &self.actions
    }

    pub fn flows(&self) -> &BTreeMap<String, FlowArc> {
        &self.flows
    }

    pub fn triggers(&self) -> &BTreeMap<String, TriggerArc> {
        &self.triggers
    }

    pub fn storages(&self) -> &BTreeMap<StorageId, Storage> {
        &self.storages
    }

    pub fn machine(&self, id: &MachineId) -> Option<&Machine> {
        self.machines.get(id)
    }

    pub fn action(&self, id: &ActionId) -> Option<&Action> {
        self.actions.get(id)
    }

    /// Top-level machines, sorted by id.
    pub fn roots(&self) -> impl Iterator<Item = &Machine> {
        self.machines.values().filter(|m| m.parent.is_none())
    }

    /// Machines, actions and storages share one dotted-path namespace.
    fn path_taken(&self, path: &str) -> bool {
        self.machines.contains_key(&MachineId::from(path))
            || self.actions.contains_key(&ActionId::from(path))
            || self.storages.contains_key(&StorageId::from(path))
    }

    pub fn add_machine(&mut self, machine: Machine) -> Result<(), ModelError> {
        if self.path_taken(machine.id.as_str()) {
            return Err(ModelError::DuplicateId(machine.id.to_string()));
        }
        let expected = match &machine.parent {
            Some(p) => format!("{p}.{}", machine.name),
            None => machine.name.clone(),
        };
        if expected != machine.id.as_str() || !is_token(&machine.name) {
            return Err(ModelError::MalformedMachineId { id: machine.id });
        }
        if let Some(parent) = &machine.parent {
            let siblings = &self
                .machines
                .get(parent)
                .ok_or_else(|| ModelError::DanglingReference {
                    element: machine.id.to_string(),
                    reference: parent.to_string(),
                })?
                .children;
            if siblings
                .iter()
                .any(|c| self.machines[c].name == machine.name)
            {
                return Err(ModelError::DuplicateSiblingName {
                    parent: parent.to_string(),
                    name: machine.name,
                });
            }
        } else if self.roots().any(|m| m.name == machine.name) {
            return Err(ModelError::DuplicateSiblingName {
                parent: String::new(),
                name: machine.name,
            });
        }
        if let Some(parent) = &machine.parent {
            let children = &mut self.machines.get_mut(parent).expect("checked").children;
            children.push(machine.id.clone());
            children.sort();
        }
        let machine = Machine {
            children: Vec::new(),
            ..machine
        };
        self.machines.insert(machine.id.clone(), machine);
        Ok(())
    }

    pub fn add_thing(&mut self, thing: Thing) -> Result<(), ModelError> {
        if self.things.contains_key(&thing.id) || self.things.values().any(|t| t.name == thing.name)
        {
            return Err(ModelError::DuplicateId(thing.id.to_string()));
        }
        self.require_machine(thing.id.as_str(), &thing.home)?;
        self.things.insert(thing.id.clone(), thing);
        Ok(())
    }

    pub fn add_action(&mut self, action: Action) -> Result<(), ModelError> {
        if self.path_taken(action.id.as_str()) {
            return Err(ModelError::DuplicateId(action.id.to_string()));
        }
        self.require_machine(action.id.as_str(), &action.owner)?;
        self.require_thing(action.id.as_str(), &action.thing)?;
        self.actions.insert(action.id.clone(), action);
        Ok(())
    }

    pub fn add_storage(&mut self, storage: Storage) -> Result<(), ModelError> {
        if self.path_taken(storage.id.as_str()) {
            return Err(ModelError::DuplicateId(storage.id.to_string()));
        }
        self.require_machine(storage.id.as_str(), &storage.owner)?;
        self.require_thing(storage.id.as_str(), &storage.thing)?;
        self.storages.insert(storage.id.clone(), storage);
        Ok(())
    }

    pub fn add_flow(&mut self, flow: FlowArc) -> Result<(), ModelError> {
        if self.flows.contains_key(&flow.id) {
            return Err(ModelError::DuplicateId(flow.id));
        }
        let from_thing = self.endpoint_thing_checked(&flow.id, &flow.from)?.clone();
        let to_thing = self.endpoint_thing_checked(&flow.id, &flow.to)?.clone();
        if flow.from == flow.to {
            return Err(ModelError::SelfLoopArc(flow.id));
        }
        if from_thing != to_thing {
            return Err(ModelError::CrossThingFlow {
                arc: flow.id,
                from_thing,
                to_thing,
            });
        }
        self.flows.insert(flow.id.clone(), flow);
        Ok(())
    }

    pub fn add_trigger(&mut self, trigger: TriggerArc) -> Result<(), ModelError> {
        if self.triggers.contains_key(&trigger.id) {
            return Err(ModelError::DuplicateId(trigger.id));
        }
        for end in [&trigger.from, &trigger.to] {
            if !self.actions.contains_key(end) {
                return Err(ModelError::DanglingReference {
                    element: trigger.id.clone(),
                    reference: end.to_string(),
                });
            }
        }
        if trigger.from == trigger.to {
            return Err(ModelError::SelfLoopArc(trigger.id));
        }
        if let Some(g) = &trigger.guard {
            Guard::new(g.key.clone(), g.value.clone())?;
        }
        self.triggers.insert(trigger.id.clone(), trigger);
        Ok(())
    }

    fn require_machine(&self, element: &str, id: &MachineId) -> Result<(), ModelError> {
        if self.machines.contains_key(id) {
            Ok(())
        } else {
            Err(ModelError::DanglingReference {
                element: element.to_string(),
                reference: id.to_string(),
            })
        }
    }

    fn require_thing(&self, element: &str, id: &ThingId) -> Result<(), ModelError> {
        if self.things.contains_key(id) {
            Ok(())
        } else {
            Err(ModelError::DanglingReference {
                element: element.to_string(),
                reference: id.to_string(),
            })
        }
    }

    fn endpoint_thing_checked(&self, arc: &str, end: &Endpoint) -> Result<&ThingId, ModelError> {
        self.endpoint_thing(end)
            .ok_or_else(|| ModelError::DanglingReference {
                element: arc.to_string(),
                reference: end.to_string(),
            })
    }

    /// Resolves a dotted path to an action or a storage.
    pub fn resolve_endpoint(&self, path: &str) -> Option<Endpoint> {
        let action = ActionId::from(path);
        if self.actions.contains_key(&action) {
            return Some(Endpoint::Action(action));
        }
        let storage = StorageId::from(path);
        self.storages
            .contains_key(&storage)
            .then_some(Endpoint::Storage(storage))
    }

    pub fn endpoint_thing(&self, end: &Endpoint) -> Option<&ThingId> {
        match end {
            Endpoint::Action(a) => self.actions.get(a).map(|a| &a.thing),
            Endpoint::Storage(s) => self.storages.get(s).map(|s| &s.thing),
        }
    }

    pub fn endpoint_owner(&self, end: &Endpoint) -> Option<&MachineId> {
        match end {
            Endpoint::Action(a) => self.actions.get(a).map(|a| &a.owner),
            Endpoint::Storage(s) => self.storages.get(s).map(|s| &s.owner),
        }
    }

    pub fn flows_from<'a>(&'a self, end: &'a Endpoint) -> impl Iterator<Item = &'a FlowArc> + 'a {
        self.flows.values().filter(move |f| &f.from == end)
    }

    pub fn flows_into<'a>(&'a self, end: &'a Endpoint) -> impl Iterator<Item = &'a FlowArc> + 'a {
        self.flows.values().filter(move |f| &f.to == end)
    }

    pub fn triggers_from<'a>(
        &'a self,
        action: &'a ActionId,
    ) -> impl Iterator<Item = &'a TriggerArc> + 'a {
        self.triggers.values().filter(move |t| &t.from == action)
    }

    pub fn triggers_into<'a>(
        &'a self,
        action: &'a ActionId,
    ) -> impl Iterator<Item = &'a TriggerArc> + 'a {
        self.triggers.values().filter(move |t| &t.to == action)
    }

    /// All flow and trigger arcs leaving `action`, sorted by arc id.
    pub fn successors(&self, action: &ActionId) -> Result<Vec<Successor>, ModelError> {
        if !self.actions.contains_key(action) {
            return Err(ModelError::UnknownAction(action.clone()));
        }
        let from = Endpoint::Action(action.clone());
        let mut out: Vec<Successor> = self
            .flows_from(&from)
            .map(|f| Successor {
                kind: ArcKind::Flow,
                arc_id: f.id.clone(),
                target: f.to.clone(),
                guard: None,
            })
            .chain(self.triggers_from(action).map(|t| Successor {
                kind: ArcKind::Trigger,
                arc_id: t.id.clone(),
                target: Endpoint::Action(t.to.clone()),
                guard: t.guard.clone(),
            }))
            .collect();
        out.sort_by(|a, b| a.arc_id.cmp(&b.arc_id));
        Ok(out)
    }

    /// Machines owning the given actions, optionally closed under ancestry.
    pub fn machine_of_region<'a, I>(
        &self,
        actions: I,
        include_ancestors: bool,
    ) -> Result<BTreeSet<MachineId>, ModelError>
    where
        I: IntoIterator<Item = &'a ActionId>,
    {
        let mut out = BTreeSet::new();
        for id in actions {
            let action = self
                .actions
                .get(id)
                .ok_or_else(|| ModelError::UnknownAction(id.clone()))?;
            let mut current = Some(action.owner.clone());
            while let Some(m) = current {
                current = if include_ancestors {
                    self.machines.get(&m).and_then(|m| m.parent.clone())
                } else {
                    None
                };
                out.insert(m);
            }
        }
        Ok(out)
    }

    /// Every guard key used on a trigger.
    pub fn guard_keys(&self) -> BTreeSet<&str> {
        self.triggers
            .values()
            .filter_map(|t| t.guard.as_ref().map(|g| g.key.as_str()))
            .collect()
    }

    /// True if `ancestor` strictly contains `machine`.
    pub fn is_ancestor(&self, ancestor: &MachineId, machine: &MachineId) -> bool {
        let mut current = self.machines.get(machine).and_then(|m| m.parent.as_ref());
        while let Some(p) = current {
            if p == ancestor {
                return true;
            }
            current = self.machines.get(p).and_then(|m| m.parent.as_ref());
        }
        false
    }
}

/// Identifier-like token: ASCII letters, digits and underscores.
pub fn is_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

pub fn local_name(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or(path)
}
