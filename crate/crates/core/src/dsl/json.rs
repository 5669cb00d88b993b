//! `.tm.json` interchange. Object keys are emitted in sorted order.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{
    Action, ActionKind, FlowArc, Guard, Machine, MachineId, ModelError, StaticModel, Storage,
    Thing, TriggerArc,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JsonError {
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("schema violation at {pointer}: {message}")]
    SchemaViolation { pointer: String, message: String },
    #[error("invalid model at {pointer}: {source}")]
    Model {
        pointer: String,
        #[source]
        source: ModelError,
    },
}

impl JsonError {
    pub fn pointer(&self) -> Option<&str> {
        match self {
            JsonError::Syntax(_) => None,
            JsonError::SchemaViolation { pointer, .. } | JsonError::Model { pointer, .. } => {
                Some(pointer)
            }
        }
    }
}

pub fn to_json_value(model: &StaticModel) -> Value {
    let machines: Vec<Value> = model
        .machines()
        .values()
        .map(|m| {
            json!({
                "id": m.id.as_str(),
                "name": m.name,
                "parent": m.parent.as_ref().map(MachineId::as_str),
                "children": m.children.iter().map(MachineId::as_str).collect::<Vec<_>>(),
            })
        })
        .collect();
    let things: Vec<Value> = model
        .things()
        .values()
        .map(|t| json!({"id": t.id.as_str(), "name": t.name, "home": t.home.as_str()}))
        .collect();
    let actions: Vec<Value> = model
        .actions()
        .values()
        .map(|a| {
            let mut v = json!({
                "id": a.id.as_str(),
                "kind": a.kind.as_str(),
                "owner": a.owner.as_str(),
                "thing": a.thing.as_str(),
            });
            if let Some(label) = &a.label {
                v["label"] = json!(label);
            }
            v
        })
        .collect();
    let flows: Vec<Value> = model
        .flows()
        .values()
        .map(|f| json!({"id": f.id, "from": f.from.as_str(), "to": f.to.as_str()}))
        .collect();
    let triggers: Vec<Value> = model
        .triggers()
        .values()
        .map(|t| {
            let mut v = json!({"id": t.id, "from": t.from.as_str(), "to": t.to.as_str()});
            if let Some(g) = &t.guard {
                v["guard"] = json!({"key": g.key, "value": g.value});
            }
            v
        })
        .collect();
    let storages: Vec<Value> = model
        .storages()
        .values()
        .map(|s| {
            json!({
                "id": s.id.as_str(),
                "name": s.name,
                "owner": s.owner.as_str(),
                "thing": s.thing.as_str(),
            })
        })
        .collect();
    let mut v = json!({
        "name": model.name(),
        "machines": machines,
        "things": things,
        "actions": actions,
        "flows": flows,
        "triggers": triggers,
        "storages": storages,
    });
    if model.is_simplified() {
        v["simplified"] = json!(true);
    }
    v
}

pub fn to_json(model: &StaticModel) -> String {
    to_json_value(model).to_string()
}

pub fn from_json(text: &str) -> Result<StaticModel, JsonError> {
    let value: Value = serde_json::from_str(text).map_err(|e| JsonError::Syntax(e.to_string()))?;
    from_json_value(&value)
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    pointer: String,
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> JsonError {
    JsonError::SchemaViolation {
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, pointer: String) -> Result<Self, JsonError> {
        match value.as_object() {
            Some(map) => Ok(Obj { map, pointer }),
            None => Err(violation(pointer, "expected an object")),
        }
    }

    fn at(&self, key: &str) -> String {
        format!("{}/{key}", self.pointer)
    }

    fn str(&self, key: &str) -> Result<&'a str, JsonError> {
        match self.map.get(key) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(violation(self.at(key), "expected a string")),
            None => Err(violation(self.at(key), "missing required field")),
        }
    }

    fn opt_str(&self, key: &str) -> Result<Option<&'a str>, JsonError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(violation(self.at(key), "expected a string or null")),
        }
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, JsonError> {
        match self.map.get(key) {
            Some(Value::Array(a)) => Ok(a),
            Some(_) => Err(violation(self.at(key), "expected an array")),
            None => Err(violation(self.at(key), "missing required field")),
        }
    }

    fn model_err(&self, source: ModelError) -> JsonError {
        JsonError::Model {
            pointer: self.pointer.clone(),
            source,
        }
    }
}

pub fn from_json_value(value: &Value) -> Result<StaticModel, JsonError> {
    let root = Obj::new(value, String::new())?;
    let mut model = StaticModel::new(root.str("name")?);
    match root.map.get("simplified") {
        None => {}
        Some(Value::Bool(b)) => model.set_simplified(*b),
        Some(_) => return Err(violation("/simplified", "expected a boolean")),
    }

    // Decode every section before inserting so schema errors win over
    // reference errors.
    let mut machines = Vec::new();
    for (i, v) in root.array("machines")?.iter().enumerate() {
        let o = Obj::new(v, format!("/machines/{i}"))?;
        let children = o
            .array("children")?
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.as_str().map(MachineId::from).ok_or_else(|| {
                    violation(format!("{}/{j}", o.at("children")), "expected a string")
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let m = Machine {
            id: o.str("id")?.into(),
            name: o.str("name")?.to_string(),
            parent: o.opt_str("parent")?.map(MachineId::from),
            children: children.clone(),
        };
        machines.push((o, m, children));
    }
    let mut things = Vec::new();
    for (i, v) in root.array("things")?.iter().enumerate() {
        let o = Obj::new(v, format!("/things/{i}"))?;
        let t = Thing {
            id: o.str("id")?.into(),
            name: o.str("name")?.to_string(),
            home: o.str("home")?.into(),
        };
        things.push((o, t));
    }
    let mut storages = Vec::new();
    for (i, v) in root.array("storages")?.iter().enumerate() {
        let o = Obj::new(v, format!("/storages/{i}"))?;
        let s = Storage {
            id: o.str("id")?.into(),
            name: o.str("name")?.to_string(),
            owner: o.str("owner")?.into(),
            thing: o.str("thing")?.into(),
        };
        storages.push((o, s));
    }
    let mut actions = Vec::new();
    for (i, v) in root.array("actions")?.iter().enumerate() {
        let o = Obj::new(v, format!("/actions/{i}"))?;
        let kind = o
            .str("kind")?
            .parse::<ActionKind>()
            .map_err(|e| violation(o.at("kind"), e))?;
        let a = Action {
            id: o.str("id")?.into(),
            kind,
            owner: o.str("owner")?.into(),
            thing: o.str("thing")?.into(),
            label: o.opt_str("label")?.map(str::to_string),
        };
        actions.push((o, a));
    }
    let mut flows = Vec::new();
    for (i, v) in root.array("flows")?.iter().enumerate() {
        let o = Obj::new(v, format!("/flows/{i}"))?;
        let parts = (o.str("id")?, o.str("from")?, o.str("to")?);
        flows.push((o, parts));
    }
    let mut triggers = Vec::new();
    for (i, v) in root.array("triggers")?.iter().enumerate() {
        let o = Obj::new(v, format!("/triggers/{i}"))?;
        let guard = match o.map.get("guard") {
            None | Some(Value::Null) => None,
            Some(g) => {
                let go = Obj::new(g, o.at("guard"))?;
                Some((go.str("key")?, go.str("value")?))
            }
        };
        let parts = (o.str("id")?, o.str("from")?, o.str("to")?, guard);
        triggers.push((o, parts));
    }

    // Parents before children.
    machines.sort_by_key(|(_, m, _)| m.id.as_str().matches('.').count());
    for (o, m, _) in &machines {
        model.add_machine(m.clone()).map_err(|e| o.model_err(e))?;
    }
    for (o, _, children) in &machines {
        let id = MachineId::from(o.str("id")?);
        let mut declared = children.clone();
        declared.sort();
        if model.machines()[&id].children != declared {
            return Err(violation(
                o.at("children"),
                "children disagree with parent links",
            ));
        }
    }
    for (o, t) in things {
        model.add_thing(t).map_err(|e| o.model_err(e))?;
    }
    for (o, s) in storages {
        model.add_storage(s).map_err(|e| o.model_err(e))?;
    }
    for (o, a) in actions {
        model.add_action(a).map_err(|e| o.model_err(e))?;
    }
    for (o, (id, from, to)) in flows {
        let from_end = model.resolve_endpoint(from).ok_or_else(|| {
            violation(o.at("from"), format!("unknown action or storage `{from}`"))
        })?;
        let to_end = model
            .resolve_endpoint(to)
            .ok_or_else(|| violation(o.at("to"), format!("unknown action or storage `{to}`")))?;
        let flow = FlowArc {
            id: id.to_string(),
            from: from_end,
            to: to_end,
        };
        model.add_flow(flow).map_err(|e| o.model_err(e))?;
    }
    for (o, (id, from, to, guard)) in triggers {
        let guard = guard
            .map(|(k, v)| Guard::new(k, v))
            .transpose()
            .map_err(|e| o.model_err(e))?;
        let trigger = TriggerArc {
            id: id.to_string(),
            from: from.into(),
            to: to.into(),
            guard,
        };
        model.add_trigger(trigger).map_err(|e| o.model_err(e))?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    #[test]
    fn empty_model_has_sorted_keys() {
        let m = StaticModel::new("M");
        assert_eq!(
            to_json(&m),
            r#"{"actions":[],"flows":[],"machines":[],"name":"M","storages":[],"things":[],"triggers":[]}"#
        );
    }

    #[test]
    fn missing_flow_target_points_at_field() {
        let text = r#"{"name":"M","machines":[{"id":"A","name":"A","parent":null,"children":[]}],
            "things":[{"id":"X","name":"X","home":"A"}],
            "actions":[{"id":"A.a","kind":"create","owner":"A","thing":"X"}],
            "flows":[{"id":"f","from":"A.a"}],"triggers":[],"storages":[]}"#;
        let err = from_json(text).unwrap_err();
        assert_eq!(err.pointer(), Some("/flows/0/to"));
        assert!(matches!(err, JsonError::SchemaViolation { .. }));
    }

    #[test]
    fn bad_kind_and_bad_json() {
        let text = r#"{"name":"M","machines":[],"things":[],"actions":[{"id":"a","kind":"arrive","owner":"A","thing":"X"}],"flows":[],"triggers":[],"storages":[]}"#;
        assert_eq!(
            from_json(text).unwrap_err().pointer(),
            Some("/actions/0/kind")
        );
        assert!(matches!(from_json("{"), Err(JsonError::Syntax(_))));
        assert_eq!(from_json("[]").unwrap_err().pointer(), Some(""));
    }

    #[test]
    fn round_trips_a_model_with_everything() {
        let src = r#"model M simplified
            machine A { thing X store db of X action c: create of X # "1" action r: release of X
              machine B { action t: transfer of X } }
            flow A.c -> A.r
            flow A.r -> A.db
            trigger A.c ~> A.B.t [k=v]"#;
        let m = parse_model(src).unwrap();
        let back = from_json(&to_json(&m)).unwrap();
        assert_eq!(back, m);
    }
}
