//! Line-oriented fixture worlds.
//!
//! ```text
//! # comment
//! API weather_now "current weather for a city"
//!   IN city "city name"
//!   OUT temperature "air temperature"
//! API weather_backup "current weather for a city" mock
//!   IN city "city name"
//!   OUT temperature "air temperature"
//! KNOW capital_of_france "paris"
//! AVAIL weather_now 1=0 2=1
//! TASK t1 easy "What is the temperature in Oslo?"
//!   INTENT tool goal=temperature given=city:oslo
//!   TRUTH "temperature=temperature(oslo)"
//! ```
//!
//! An API answers each output `o` with `o(v1,v2,...)`, the input values in
//! input-name order, so APIs with the same schema are interchangeable.
//! `INTENT tool` takes `given=` values stated in the query and `ask=` values
//! only the user can supply; `INTENT know key=` is answered from `KNOW`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::agent::{Intent, Query};
use crate::graph::{ApiSpec, ParamSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    /// Class of a task needing `calls` API calls.
    pub fn from_calls(calls: usize) -> Difficulty {
        match calls {
            0 | 1 => Difficulty::Easy,
            2 => Difficulty::Medium,
            _ => Difficulty::Hard,
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        })
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiBehavior {
    pub id: String,
    pub description: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    /// Answers with `type=mock` instead of `type=success`.
    pub mock: bool,
}

impl ApiBehavior {
    pub fn spec(&self) -> ApiSpec {
        ApiSpec {
            id: self.id.clone(),
            name: self.id.clone(),
            description: self.description.clone(),
            inputs: self.inputs.iter().map(|(n, d)| ParamSpec::new(n.clone(), d.clone())).collect(),
            outputs: self.outputs.iter().map(|(n, d)| ParamSpec::new(n.clone(), d.clone())).collect(),
        }
    }

    /// Output values for the given named inputs, or the first missing input.
    pub fn respond(&self, args: &BTreeMap<String, String>) -> std::result::Result<BTreeMap<String, String>, String> {
        let mut names: Vec<&String> = self.inputs.iter().map(|(n, _)| n).collect();
        names.sort();
        let mut values = Vec::with_capacity(names.len());
        for n in names {
            values.push(args.get(n).ok_or_else(|| n.clone())?.as_str());
        }
        let joined = values.join(",");
        Ok(self.outputs.iter().map(|(o, _)| (o.clone(), format!("{o}({joined})"))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub difficulty: Difficulty,
    pub query: Query,
    /// Values the user hands over when asked.
    pub user_values: BTreeMap<String, String>,
    pub truth: Vec<String>,
}

impl Task {
    pub fn ground_truth(&self) -> String {
        self.truth.join("; ")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureWorld {
    pub apis: BTreeMap<String, ApiBehavior>,
    pub knowledge: BTreeMap<String, String>,
    /// api -> phase -> available. Unlisted pairs are available.
    pub availability: BTreeMap<String, BTreeMap<u32, bool>>,
    pub tasks: Vec<Task>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Parse { line, msg: msg.into() }
}

/// Splits on whitespace, keeping double-quoted strings whole (quotes removed).
fn words(line: &str, n: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        let Some(&c) = chars.peek() else { break };
        let mut w = String::new();
        if c == '"' {
            chars.next();
            let mut closed = false;
            for c in chars.by_ref() {
                if c == '"' {
                    closed = true;
                    break;
                }
                w.push(c);
            }
            if !closed {
                return Err(parse_err(n, "unterminated string"));
            }
        } else {
            while let Some(c) = chars.next_if(|c| !c.is_whitespace()) {
                w.push(c);
            }
        }
        out.push(w);
    }
    Ok(out)
}

fn pairs(text: &str, n: usize) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for item in text.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once(':').ok_or_else(|| parse_err(n, format!("expected key:value, got {item:?}")))?;
        m.insert(k.to_owned(), v.to_owned());
    }
    Ok(m)
}

enum Open {
    None,
    Api(String),
    Task(usize),
}

impl FixtureWorld {
    pub fn load(path: impl AsRef<Path>) -> Result<FixtureWorld> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    pub fn specs(&self) -> Vec<ApiSpec> {
        self.apis.values().map(ApiBehavior::spec).collect()
    }

    pub fn is_available(&self, api: &str, phase: u32) -> bool {
        self.availability
            .get(api)
            .and_then(|m| m.get(&phase))
            .copied()
            .unwrap_or(true)
    }

    /// Fewest API calls to produce `goal` from `known`, each needed input
    /// paid for separately. `None` if no API chain yields it.
    pub fn min_calls(&self, goal: &str, known: &BTreeSet<String>) -> Option<usize> {
        let mut cost: BTreeMap<&str, usize> = known.iter().map(|k| (k.as_str(), 0)).collect();
        // Bellman-Ford style relaxation; schemas are small.
        loop {
            let mut changed = false;
            for api in self.apis.values() {
                let Some(inputs) = api
                    .inputs
                    .iter()
                    .map(|(n, _)| cost.get(n.as_str()).copied())
                    .sum::<Option<usize>>()
                else {
                    continue;
                };
                for (o, _) in &api.outputs {
                    let c = inputs + 1;
                    if cost.get(o.as_str()).is_none_or(|&old| c < old) {
                        cost.insert(o.as_str(), c);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        cost.get(goal).copied()
    }

    /// Forward-chains APIs in id order from `known` until `goal` is bound.
    /// The first value derived for a name sticks.
    pub fn solve(&self, goal: &str, known: &BTreeMap<String, String>) -> Option<String> {
        let mut bound = known.clone();
        while !bound.contains_key(goal) {
            let mut changed = false;
            for api in self.apis.values() {
                if let Ok(out) = api.respond(&bound) {
                    for (k, v) in out {
                        if let std::collections::btree_map::Entry::Vacant(slot) = bound.entry(k) {
                            slot.insert(v);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        bound.get(goal).cloned()
    }

    /// Facts the reference solver derives for a task, in intent order.
    pub fn reference_facts(&self, task: &Task) -> Result<Vec<String>> {
        let mut facts = Vec::new();
        for intent in &task.query.intents {
            match intent {
                Intent::Knowledge { key } => {
                    let v = self
                        .knowledge
                        .get(key)
                        .ok_or_else(|| HarnessError::Invalid(format!("task {}: no KNOW entry {key}", task.id)))?;
                    facts.push(format!("{key}={v}"));
                }
                Intent::Tool { goal, given, ask } => {
                    let mut known = given.clone();
                    for a in ask {
                        let v = task
                            .user_values
                            .get(a)
                            .ok_or_else(|| HarnessError::Invalid(format!("task {}: no value for {a}", task.id)))?;
                        known.insert(a.clone(), v.clone());
                    }
                    let v = self
                        .solve(goal, &known)
                        .ok_or_else(|| HarnessError::Invalid(format!("task {}: {goal} is unreachable", task.id)))?;
                    facts.push(format!("{goal}={v}"));
                }
            }
        }
        Ok(facts)
    }

    /// Minimal call count summed over the task's tool intents.
    pub fn task_calls(&self, task: &Task) -> Option<usize> {
        let mut total = 0;
        for intent in &task.query.intents {
            if let Intent::Tool { goal, given, ask } = intent {
                let known: BTreeSet<String> = given.keys().chain(ask.iter()).cloned().collect();
                total += self.min_calls(goal, &known)?;
            }
        }
        Some(total)
    }

    /// Checks every task's truth against the reference solver and its
    /// difficulty against the minimal call count.
    pub fn validate(&self) -> Result<()> {
        for task in &self.tasks {
            let facts = self.reference_facts(task)?;
            if !super::judge(&facts.join("; "), &task.ground_truth()) {
                return Err(HarnessError::Invalid(format!(
                    "task {}: truth {:?} but the solver derives {:?}",
                    task.id, task.truth, facts
                )));
            }
            let calls = self.task_calls(task).unwrap_or(usize::MAX);
            if Difficulty::from_calls(calls) != task.difficulty {
                return Err(HarnessError::Invalid(format!(
                    "task {}: marked {} but needs {calls} calls",
                    task.id, task.difficulty
                )));
            }
        }
        for api in self.availability.keys() {
            if !self.apis.contains_key(api) {
                return Err(HarnessError::Invalid(format!("AVAIL for unknown api {api}")));
            }
        }
        Ok(())
    }
}

impl FromStr for FixtureWorld {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<FixtureWorld> {
        let mut w = FixtureWorld::default();
        let mut open = Open::None;
        let mut task_ids = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let indented = line.starts_with(' ') || line.starts_with('\t');
            let ws = words(line, n)?;
            let head = ws[0].as_str();
            if !indented {
                open = Open::None;
            }
            match (head, &open) {
                ("API", _) if !indented => {
                    let (id, desc) = match ws.as_slice() {
                        [_, id, desc] => (id, desc),
                        [_, id, desc, m] if m == "mock" => (id, desc),
                        _ => return Err(parse_err(n, "expected API <id> \"<desc>\" [mock]")),
                    };
                    if w.apis.contains_key(id) {
                        return Err(parse_err(n, format!("duplicate api {id}")));
                    }
                    w.apis.insert(
                        id.clone(),
                        ApiBehavior {
                            id: id.clone(),
                            description: desc.clone(),
                            inputs: Vec::new(),
                            outputs: Vec::new(),
                            mock: ws.len() == 4,
                        },
                    );
                    open = Open::Api(id.clone());
                }
                ("IN" | "OUT", Open::Api(id)) => {
                    let [_, name, desc] = ws.as_slice() else {
                        return Err(parse_err(n, format!("expected {head} <name> \"<desc>\"")));
                    };
                    let api = w.apis.get_mut(id).expect("open api");
                    let list = if head == "IN" { &mut api.inputs } else { &mut api.outputs };
                    if list.iter().any(|(x, _)| x == name) {
                        return Err(parse_err(n, format!("duplicate field {name}")));
                    }
                    list.push((name.clone(), desc.clone()));
                }
                ("KNOW", _) if !indented => {
                    let [_, key, answer] = ws.as_slice() else {
                        return Err(parse_err(n, "expected KNOW <key> \"<answer>\""));
                    };
                    w.knowledge.insert(key.clone(), answer.clone());
                }
                ("AVAIL", _) if !indented => {
                    if ws.len() < 3 {
                        return Err(parse_err(n, "expected AVAIL <api> <phase>=<0|1> ..."));
                    }
                    let entry = w.availability.entry(ws[1].clone()).or_default();
                    for item in &ws[2..] {
                        let (p, v) = item
                            .split_once('=')
                            .ok_or_else(|| parse_err(n, format!("expected <phase>=<0|1>, got {item:?}")))?;
                        let p: u32 = p.parse().map_err(|_| parse_err(n, format!("bad phase {p:?}")))?;
                        let v = match v {
                            "0" => false,
                            "1" => true,
                            _ => return Err(parse_err(n, format!("bad availability {v:?}"))),
                        };
                        entry.insert(p, v);
                    }
                }
                ("TASK", _) if !indented => {
                    let [_, id, diff, query] = ws.as_slice() else {
                        return Err(parse_err(n, "expected TASK <id> easy|medium|hard \"<query>\""));
                    };
                    if !task_ids.insert(id.clone()) {
                        return Err(parse_err(n, format!("duplicate task {id}")));
                    }
                    w.tasks.push(Task {
                        id: id.clone(),
                        difficulty: diff.parse().map_err(|e: String| parse_err(n, e))?,
                        query: Query {
                            text: query.clone(),
                            intents: Vec::new(),
                        },
                        user_values: BTreeMap::new(),
                        truth: Vec::new(),
                    });
                    open = Open::Task(w.tasks.len() - 1);
                }
                ("INTENT", Open::Task(t)) => {
                    let task = &mut w.tasks[*t];
                    let kind = ws.get(1).map(String::as_str);
                    let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
                    for item in &ws[2.min(ws.len())..] {
                        let (k, v) = item
                            .split_once('=')
                            .ok_or_else(|| parse_err(n, format!("expected key=value, got {item:?}")))?;
                        kv.insert(k, v);
                    }
                    let intent = match kind {
                        Some("know") => Intent::Knowledge {
                            key: kv.get("key").ok_or_else(|| parse_err(n, "know intent needs key="))?.to_string(),
                        },
                        Some("tool") => {
                            let goal = kv.get("goal").ok_or_else(|| parse_err(n, "tool intent needs goal="))?;
                            let asked = pairs(kv.get("ask").unwrap_or(&""), n)?;
                            task.user_values.extend(asked.clone());
                            Intent::Tool {
                                goal: goal.to_string(),
                                given: pairs(kv.get("given").unwrap_or(&""), n)?,
                                ask: asked.into_keys().collect(),
                            }
                        }
                        _ => return Err(parse_err(n, "expected INTENT tool|know ...")),
                    };
                    task.query.intents.push(intent);
                }
                ("TRUTH", Open::Task(t)) => {
                    let [_, fact] = ws.as_slice() else {
                        return Err(parse_err(n, "expected TRUTH \"<fact>\""));
                    };
                    w.tasks[*t].truth.push(fact.clone());
                }
                _ => return Err(parse_err(n, format!("unexpected line {:?}", line.trim()))),
            }
        }
        for t in &w.tasks {
            if t.query.intents.is_empty() {
                return Err(HarnessError::Invalid(format!("task {} has no intents", t.id)));
            }
        }
        Ok(w)
    }
}

impl fmt::Display for FixtureWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for api in self.apis.values() {
            write!(f, "API {} \"{}\"", api.id, api.description)?;
            if api.mock {
                write!(f, " mock")?;
            }
            writeln!(f)?;
            for (nm, d) in &api.inputs {
                writeln!(f, "  IN {nm} \"{d}\"")?;
            }
            for (nm, d) in &api.outputs {
                writeln!(f, "  OUT {nm} \"{d}\"")?;
            }
        }
        for (k, v) in &self.knowledge {
            writeln!(f, "KNOW {k} \"{v}\"")?;
        }
        for (api, phases) in &self.availability {
            write!(f, "AVAIL {api}")?;
            for (p, a) in phases {
                write!(f, " {p}={}", u8::from(*a))?;
            }
            writeln!(f)?;
        }
        let kv = |m: &BTreeMap<String, String>| m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(",");
        for t in &self.tasks {
            writeln!(f, "TASK {} {} \"{}\"", t.id, t.difficulty, t.query.text)?;
            for intent in &t.query.intents {
                match intent {
                    Intent::Knowledge { key } => writeln!(f, "  INTENT know key={key}")?,
                    Intent::Tool { goal, given, ask } => {
                        write!(f, "  INTENT tool goal={goal}")?;
                        if !given.is_empty() {
                            write!(f, " given={}", kv(given))?;
                        }
                        if !ask.is_empty() {
                            let asked: BTreeMap<String, String> = ask
                                .iter()
                                .map(|a| (a.clone(), t.user_values.get(a).cloned().unwrap_or_default()))
                                .collect();
                            write!(f, " ask={}", kv(&asked))?;
                        }
                        writeln!(f)?;
                    }
                }
            }
            for fact in &t.truth {
                writeln!(f, "  TRUTH \"{fact}\"")?;
            }
        }
        Ok(())
    }
}
