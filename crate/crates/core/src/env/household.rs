//! Household text world with receptacles, objects and a one-slot inventory.
//!
//! Every failed precondition leaves the world untouched and yields
//! [`NOTHING_HAPPENS`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Environment, Feedback};
use crate::trajectory::{ActionInvocation, Outcome, OutcomeMetric};

pub const NOTHING_HAPPENS: &str = "Nothing happens.";
pub const INVENTORY_CAPACITY: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    Pick,
    Light,
    Clean,
    Heat,
    Cool,
    PickTwo,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Pick,
        TaskKind::Light,
        TaskKind::Clean,
        TaskKind::Heat,
        TaskKind::Cool,
        TaskKind::PickTwo,
    ];

    /// Task type id of the shipped KB for this kind.
    pub fn kb_id(self) -> &'static str {
        match self {
            TaskKind::Pick => "alfworld_pick",
            TaskKind::Light => "alfworld_light",
            TaskKind::Clean => "alfworld_clean",
            TaskKind::Heat => "alfworld_heat",
            TaskKind::Cool => "alfworld_cool",
            TaskKind::PickTwo => "alfworld_pick_two",
        }
    }

    /// Object flag the goal requires, if any.
    pub fn required_flag(self) -> Option<ObjectFlag> {
        match self {
            TaskKind::Clean => Some(ObjectFlag::Clean),
            TaskKind::Heat => Some(ObjectFlag::Hot),
            TaskKind::Cool => Some(ObjectFlag::Cold),
            TaskKind::Light => Some(ObjectFlag::Lit),
            TaskKind::Pick | TaskKind::PickTwo => None,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectFlag {
    Clean,
    Hot,
    Cold,
    /// Examined under a switched-on lamp.
    Lit,
}

/// What a receptacle can do to objects placed in it (or, for lamps, to the
/// objects the agent holds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Clean,
    Heat,
    Cool,
    Light,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Receptacle {
    #[serde(default)]
    pub openable: bool,
    #[serde(default)]
    pub open: bool,
    #[serde(default)]
    pub contents: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capability: Option<Capability>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub switched_on: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectState {
    #[serde(default)]
    pub flags: BTreeSet<ObjectFlag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskGoal {
    pub kind: TaskKind,
    pub object_class: String,
    pub target_receptacle: String,
}

impl TaskGoal {
    /// Goal sentence in household task style.
    pub fn describe(&self) -> String {
        let (o, r) = (&self.object_class, &self.target_receptacle);
        match self.kind {
            TaskKind::Pick => format!("put some {o} in/on {r}."),
            TaskKind::Clean => format!("put a clean {o} in/on {r}."),
            TaskKind::Heat => format!("heat some {o} and put it in/on {r}."),
            TaskKind::Cool => format!("cool some {o} and put it in/on {r}."),
            TaskKind::Light => format!("examine the {o} with the {r}."),
            TaskKind::PickTwo => format!("put two {o} in/on {r}."),
        }
    }
}

/// `apple 1` -> `apple`.
pub fn class_of(name: &str) -> &str {
    match name.rsplit_once(' ') {
        Some((class, idx)) if idx.chars().all(|c| c.is_ascii_digit()) && !idx.is_empty() => class,
        _ => name,
    }
}

fn matches_receptacle(name: &str, target: &str) -> bool {
    name == target || class_of(name) == target
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdWorld {
    #[serde(default)]
    pub task_id: String,
    pub receptacles: BTreeMap<String, Receptacle>,
    pub objects: BTreeMap<String, ObjectState>,
    #[serde(default)]
    pub agent_at: Option<String>,
    #[serde(default)]
    pub inventory: BTreeSet<String>,
    pub goal: TaskGoal,
}

impl HouseholdWorld {
    /// Each object in exactly one place, inventory within capacity, and
    /// every referenced receptacle or object declared.
    pub fn check(&self) -> Result<(), String> {
        if self.inventory.len() > INVENTORY_CAPACITY {
            return Err(format!("inventory holds {} objects", self.inventory.len()));
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for r in self.receptacles.values() {
            for o in &r.contents {
                *seen.entry(o.as_str()).or_default() += 1;
            }
        }
        for o in &self.inventory {
            *seen.entry(o.as_str()).or_default() += 1;
        }
        for (o, n) in &seen {
            if !self.objects.contains_key(*o) {
                return Err(format!("{o} is placed but not declared"));
            }
            if *n != 1 {
                return Err(format!("{o} is in {n} places"));
            }
        }
        for o in self.objects.keys() {
            if !seen.contains_key(o.as_str()) {
                return Err(format!("{o} is nowhere"));
            }
        }
        if let Some(at) = &self.agent_at {
            if !self.receptacles.contains_key(at) {
                return Err(format!("agent is at unknown receptacle {at}"));
            }
        }
        Ok(())
    }

    /// Multiset of placed objects (receptacle contents plus inventory).
    pub fn placed_objects(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .receptacles
            .values()
            .flat_map(|r| r.contents.iter().cloned())
            .chain(self.inventory.iter().cloned())
            .collect();
        v.sort();
        v
    }

    /// Room description followed by the goal sentence.
    pub fn task_text(&self) -> String {
        let names: Vec<String> = self.receptacles.keys().map(|r| format!("a {r}")).collect();
        let listing = match names.len() {
            0 => "nothing".to_string(),
            1 => names[0].clone(),
            n => format!("{}, and {}", names[..n - 1].join(", "), names[n - 1]),
        };
        format!(
            "You are in the middle of a room. Looking quickly around you, you see {listing}.\nYour task is to: {}",
            self.goal.describe()
        )
    }

    fn contents_text(r: &Receptacle) -> String {
        if r.contents.is_empty() {
            "nothing".to_string()
        } else {
            r.contents.iter().cloned().collect::<Vec<_>>().join(", ")
        }
    }

    fn at(&self, receptacle: &str) -> bool {
        self.agent_at.as_deref() == Some(receptacle)
    }

    fn goto(&mut self, name: &str) -> Option<String> {
        let r = self.receptacles.get(name)?;
        let obs = if r.openable && !r.open {
            format!("You arrive at {name}. The {name} is closed.")
        } else if r.openable {
            format!(
                "You arrive at {name}. The {name} is open. In it, you see {}.",
                Self::contents_text(r)
            )
        } else {
            format!(
                "You arrive at {name}. On the {name}, you see {}.",
                Self::contents_text(r)
            )
        };
        self.agent_at = Some(name.to_string());
        Some(obs)
    }

    fn open(&mut self, name: &str) -> Option<String> {
        if !self.at(name) {
            return None;
        }
        let r = self.receptacles.get_mut(name)?;
        if !r.openable || r.open {
            return None;
        }
        r.open = true;
        Some(format!(
            "You open the {name}. The {name} is open. In it, you see {}.",
            Self::contents_text(r)
        ))
    }

    fn take(&mut self, object: &str, from: &str) -> Option<String> {
        if !self.at(from) || self.inventory.len() >= INVENTORY_CAPACITY {
            return None;
        }
        let r = self.receptacles.get_mut(from)?;
        if (r.openable && !r.open) || !r.contents.remove(object) {
            return None;
        }
        self.inventory.insert(object.to_string());
        Some(format!("You pick up the {object} from the {from}."))
    }

    fn put(&mut self, object: &str, into: &str) -> Option<String> {
        if !self.at(into) || !self.inventory.contains(object) {
            return None;
        }
        let r = self.receptacles.get_mut(into)?;
        r.contents.insert(object.to_string());
        self.inventory.remove(object);
        Some(format!("You put the {object} in/on the {into}."))
    }

    fn treat(&mut self, object: &str, with: &str, cap: Capability) -> Option<String> {
        if !self.at(with) {
            return None;
        }
        let r = self.receptacles.get(with)?;
        if r.capability != Some(cap) || !r.contents.contains(object) {
            return None;
        }
        let (flag, verb) = match cap {
            Capability::Clean => (ObjectFlag::Clean, "clean"),
            Capability::Heat => (ObjectFlag::Hot, "heat"),
            Capability::Cool => (ObjectFlag::Cold, "cool"),
            Capability::Light => return None,
        };
        self.objects.get_mut(object)?.flags.insert(flag);
        Some(format!("You {verb} the {object} using the {with}."))
    }

    fn use_receptacle(&mut self, name: &str) -> Option<String> {
        if !self.at(name) {
            return None;
        }
        let r = self.receptacles.get_mut(name)?;
        if r.capability != Some(Capability::Light) {
            return None;
        }
        r.switched_on = true;
        let lit: Vec<String> = r.contents.iter().chain(self.inventory.iter()).cloned().collect();
        for o in lit {
            if let Some(state) = self.objects.get_mut(&o) {
                state.flags.insert(ObjectFlag::Lit);
            }
        }
        Some(format!("You turn on the {name}."))
    }

    /// Apply one action. Returns the observation and whether the episode
    /// ended.
    pub fn household_step(&mut self, action: &ActionInvocation) -> (String, bool) {
        let a: Vec<&str> = action.args.iter().map(|s| s.trim()).collect();
        let result = match (action.name.as_str(), a.as_slice()) {
            ("Goto", [r]) => self.goto(r),
            ("Open", [r]) => self.open(r),
            ("Take", [o, r]) => self.take(o, r),
            ("Put", [o, r]) => self.put(o, r),
            ("Clean", [o, r]) => self.treat(o, r, Capability::Clean),
            ("Heat", [o, r]) => self.treat(o, r, Capability::Heat),
            ("Cool", [o, r]) => self.treat(o, r, Capability::Cool),
            ("Use", [r]) => self.use_receptacle(r),
            ("Finish", []) => return ("Task finished.".to_string(), true),
            _ => None,
        };
        (result.unwrap_or_else(|| NOTHING_HAPPENS.to_string()), false)
    }

    pub fn goal_check(&self) -> bool {
        let g = &self.goal;
        let of_class = |o: &str| class_of(o) == g.object_class;
        let flagged = |o: &str, f: ObjectFlag| self.objects.get(o).is_some_and(|s| s.flags.contains(&f));
        match g.kind {
            TaskKind::Light => {
                let lamp_on = self
                    .receptacles
                    .iter()
                    .any(|(n, r)| matches_receptacle(n, &g.target_receptacle) && r.switched_on);
                lamp_on && self.objects.keys().any(|o| of_class(o) && flagged(o, ObjectFlag::Lit))
            }
            TaskKind::PickTwo => self.receptacles.iter().any(|(n, r)| {
                matches_receptacle(n, &g.target_receptacle) && r.contents.iter().filter(|o| of_class(o)).count() >= 2
            }),
            kind => self.receptacles.iter().any(|(n, r)| {
                matches_receptacle(n, &g.target_receptacle)
                    && r.contents
                        .iter()
                        .any(|o| of_class(o) && kind.required_flag().is_none_or(|f| flagged(o, f)))
            }),
        }
    }
}

impl Environment for HouseholdWorld {
    fn task_id(&self) -> &str {
        &self.task_id
    }

    fn task_text(&self) -> String {
        HouseholdWorld::task_text(self)
    }

    fn step(&mut self, action: &ActionInvocation) -> Feedback {
        let (observation, done) = self.household_step(action);
        Feedback { observation, done }
    }

    fn outcome(&self) -> Outcome {
        let success = self.goal_check();
        Outcome {
            reward: if success { 1.0 } else { 0.0 },
            success,
            answer: None,
            metric: OutcomeMetric::GoalSuccess,
        }
    }

    fn default_max_steps(&self) -> usize {
        30
    }
}
