//! Explicit-state exploration of two template instances, `es1` and `es2`,
//! interleaving over shared `p` and `r` arrays.
//!
//! `E<>` queries are answered by breadth-first search from the initial
//! product states, so a returned witness is always a shortest one. `A[]`
//! is answered through its dual, `not E<> not`.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{
    build_template, initial_stores, Assignment, Guard, InitPolicy, Location, TemplateAutomaton, TriValue, Update,
    ValuationStore,
};
use crate::rulebase::RuleBase;

pub const DEFAULT_STATE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("state limit of {cap} exceeded after exploring {explored} states; raise the cap")]
    ResourceLimit { cap: usize, explored: usize },
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
    #[error("seed rule {seed} does not exist in a rule base of {rules} rules")]
    InvalidSeed { seed: usize, rules: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Process {
    Es1,
    Es2,
}

impl Process {
    pub fn number(self) -> u8 {
        match self {
            Process::Es1 => 1,
            Process::Es2 => 2,
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "es{}", self.number())
    }
}

impl Serialize for Process {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Process {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match u8::deserialize(d)? {
            1 => Ok(Process::Es1),
            2 => Ok(Process::Es2),
            other => Err(serde::de::Error::custom(format!("invalid process {other}, expected 1 or 2"))),
        }
    }
}

impl Serialize for Location {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Location {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        match text.as_str() {
            "start" => Ok(Location::Start),
            "rs" => Ok(Location::Rs),
            "rf" => Ok(Location::Rf),
            other => other
                .strip_prefix('r')
                .and_then(|k| k.parse().ok())
                .map(Location::Rule)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid location {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductState {
    pub loc1: Location,
    pub loc2: Location,
    pub store: ValuationStore,
}

impl ProductState {
    pub fn location_of(&self, process: Process) -> Location {
        match process {
            Process::Es1 => self.loc1,
            Process::Es2 => self.loc2,
        }
    }

    pub fn location_pair(&self) -> (Location, Location) {
        (self.loc1, self.loc2)
    }
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(es1.{}, es2.{}) {}", self.loc1, self.loc2, self.store)
    }
}

/// State formula over locations and the shared arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatePredicate {
    Const(bool),
    AtLoc(Process, Location),
    RuleUsed(usize),
    AllRulesUsed,
    PropIs(usize, TriValue),
    Not(Box<StatePredicate>),
    And(Box<StatePredicate>, Box<StatePredicate>),
    Or(Box<StatePredicate>, Box<StatePredicate>),
}

impl StatePredicate {
    pub fn at(process: Process, loc: Location) -> Self {
        StatePredicate::AtLoc(process, loc)
    }

    pub fn and(self, other: StatePredicate) -> Self {
        StatePredicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: StatePredicate) -> Self {
        StatePredicate::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Self {
        StatePredicate::Not(Box::new(self))
    }

    pub fn holds(&self, st: &ProductState) -> bool {
        match self {
            StatePredicate::Const(b) => *b,
            StatePredicate::AtLoc(proc, loc) => st.location_of(*proc) == *loc,
            StatePredicate::RuleUsed(id) => st.store.r[*id],
            StatePredicate::AllRulesUsed => st.store.all_rules_used(),
            StatePredicate::PropIs(prop, v) => st.store.p[*prop] == *v,
            StatePredicate::Not(inner) => !inner.holds(st),
            StatePredicate::And(a, b) => a.holds(st) && b.holds(st),
            StatePredicate::Or(a, b) => a.holds(st) || b.holds(st),
        }
    }

    /// Rejects rule or proposition indices outside the rule base.
    pub fn check_indices(&self, rule_count: usize, prop_count: usize) -> Result<(), ExploreError> {
        let m = rule_count;
        match self {
            StatePredicate::Const(_) | StatePredicate::AllRulesUsed => Ok(()),
            StatePredicate::AtLoc(_, Location::Rule(id)) | StatePredicate::RuleUsed(id) if *id >= m => {
                Err(ExploreError::InvalidPredicate(format!("rule index {id} out of range for {m} rules")))
            }
            StatePredicate::AtLoc(..) | StatePredicate::RuleUsed(_) => Ok(()),
            StatePredicate::PropIs(prop, _) if *prop >= prop_count => Err(ExploreError::InvalidPredicate(format!(
                "proposition index {prop} out of range for {prop_count} propositions"
            ))),
            StatePredicate::PropIs(..) => Ok(()),
            StatePredicate::Not(inner) => inner.check_indices(rule_count, prop_count),
            StatePredicate::And(a, b) | StatePredicate::Or(a, b) => {
                a.check_indices(rule_count, prop_count)?;
                b.check_indices(rule_count, prop_count)
            }
        }
    }
}

impl fmt::Display for StatePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePredicate::Const(b) => write!(f, "{b}"),
            StatePredicate::AtLoc(proc, loc) => write!(f, "{proc}.{loc}"),
            StatePredicate::RuleUsed(id) => write!(f, "r[{id}]==true"),
            StatePredicate::AllRulesUsed => f.write_str("forall (i:typem) r[i]==true"),
            StatePredicate::PropIs(prop, v) => write!(f, "p[{prop}]=={v}"),
            StatePredicate::Not(inner) => write!(f, "not ({inner})"),
            StatePredicate::And(a, b) => write!(f, "({a} and {b})"),
            StatePredicate::Or(a, b) => write!(f, "({a} or {b})"),
        }
    }
}

/// One transition of a witness: which process moved, along which template
/// edge, and the state it led to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub process: Process,
    pub edge: usize,
    pub label: String,
    pub state: ProductState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<TraceEntry>", try_from = "Vec<TraceEntry>")]
pub struct WitnessTrace {
    pub initial: ProductState,
    pub steps: Vec<Step>,
}

impl WitnessTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> &ProductState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }

    pub fn states(&self) -> impl Iterator<Item = &ProductState> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.state))
    }
}

impl fmt::Display for WitnessTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  0: {}", self.initial)?;
        for (k, step) in self.steps.iter().enumerate() {
            writeln!(f, "  {}: {} takes {}", k + 1, step.process, step.label)?;
            writeln!(f, "     {}", step.state)?;
        }
        Ok(())
    }
}

/// Flat JSON form of a trace entry. The first entry is the initial state and
/// has no process or edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceEntry {
    process: Option<Process>,
    edge: Option<usize>,
    label: Option<String>,
    loc1: Location,
    loc2: Location,
    p: Vec<TriValue>,
    r: Vec<bool>,
}

impl TraceEntry {
    fn from_state(st: &ProductState) -> Self {
        Self {
            process: None,
            edge: None,
            label: None,
            loc1: st.loc1,
            loc2: st.loc2,
            p: st.store.p.clone(),
            r: st.store.r.clone(),
        }
    }

    fn into_state(self) -> ProductState {
        ProductState { loc1: self.loc1, loc2: self.loc2, store: ValuationStore { p: self.p, r: self.r } }
    }
}

impl From<WitnessTrace> for Vec<TraceEntry> {
    fn from(trace: WitnessTrace) -> Self {
        let mut out = vec![TraceEntry::from_state(&trace.initial)];
        for step in trace.steps {
            let mut entry = TraceEntry::from_state(&step.state);
            entry.process = Some(step.process);
            entry.edge = Some(step.edge);
            entry.label = Some(step.label);
            out.push(entry);
        }
        out
    }
}

impl TryFrom<Vec<TraceEntry>> for WitnessTrace {
    type Error = String;

    fn try_from(entries: Vec<TraceEntry>) -> Result<Self, Self::Error> {
        let mut it = entries.into_iter();
        let initial = it.next().ok_or("witness trace must contain its initial state")?;
        if initial.process.is_some() {
            return Err("first witness entry must be the initial state".into());
        }
        let mut steps = Vec::new();
        for entry in it {
            let (Some(process), Some(edge)) = (entry.process, entry.edge) else {
                return Err("witness step is missing its process or edge".into());
            };
            let label = entry.label.clone().unwrap_or_default();
            steps.push(Step { process, edge, label, state: entry.into_state() });
        }
        Ok(WitnessTrace { initial: initial.into_state(), steps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub satisfied: bool,
    /// For `E<>`, a path to a satisfying state. For `A[]`, a counterexample.
    pub witness: Option<WitnessTrace>,
    pub states_explored: usize,
    pub distinct_location_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachableStats {
    pub states: usize,
    pub location_pairs: usize,
}

pub fn eval_guard(guard: &Guard, store: &ValuationStore) -> bool {
    match guard {
        Guard::True => true,
        Guard::Cmp { prop, required } => store.p[*prop] == *required,
        Guard::And(a, b) => eval_guard(a, store) && eval_guard(b, store),
        Guard::Or(a, b) => eval_guard(a, store) || eval_guard(b, store),
    }
}

/// Applies an edge update. `InitP` leaves the store unchanged: exploration
/// starts from stores that already hold `initp()`'s result, and the call is
/// one-shot.
pub fn apply_update(update: &Update, store: &ValuationStore) -> ValuationStore {
    let mut next = store.clone();
    for a in &update.0 {
        match *a {
            Assignment::Assign { prop, value } => next.p[prop] = value,
            Assignment::SetRuleUsed(id) => next.r[id] = true,
            Assignment::InitP => {}
        }
    }
    next
}

/// One-step successors: every enabled edge of `es1` in declaration order,
/// then every enabled edge of `es2`.
pub fn successors(st: &ProductState, ta: &TemplateAutomaton) -> Vec<(Step, ProductState)> {
    let mut out = Vec::new();
    for process in [Process::Es1, Process::Es2] {
        for (idx, edge) in ta.outgoing(st.location_of(process)) {
            if !eval_guard(&edge.guard, &st.store) {
                continue;
            }
            let store = apply_update(&edge.update, &st.store);
            let next = match process {
                Process::Es1 => ProductState { loc1: edge.dst, loc2: st.loc2, store },
                Process::Es2 => ProductState { loc1: st.loc1, loc2: edge.dst, store },
            };
            let step = Step { process, edge: idx, label: format!("{} -> {}", edge.src, edge.dst), state: next.clone() };
            out.push((step, next));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("witness step {step}: {reason}")]
pub struct ReplayError {
    pub step: usize,
    pub reason: String,
}

/// Re-executes a witness edge by edge and checks every recorded state.
pub fn replay_witness(trace: &WitnessTrace, ta: &TemplateAutomaton) -> Result<(), ReplayError> {
    let mut current = trace.initial.clone();
    for (k, step) in trace.steps.iter().enumerate() {
        let fail = |reason: String| ReplayError { step: k + 1, reason };
        let edge = ta.edges.get(step.edge).ok_or_else(|| fail(format!("no edge {}", step.edge)))?;
        if edge.src != current.location_of(step.process) {
            return Err(fail(format!("{} is not at {}", step.process, edge.src)));
        }
        if !eval_guard(&edge.guard, &current.store) {
            return Err(fail(format!("guard {} is false", edge.guard)));
        }
        let store = apply_update(&edge.update, &current.store);
        let next = match step.process {
            Process::Es1 => ProductState { loc1: edge.dst, loc2: current.loc2, store },
            Process::Es2 => ProductState { loc1: current.loc1, loc2: edge.dst, store },
        };
        if next != step.state {
            return Err(fail(format!("expected {next}, trace records {}", step.state)));
        }
        current = next;
    }
    Ok(())
}

/// Compiled template plus initial states for one rule base and init policy.
#[derive(Debug, Clone)]
pub struct Checker {
    template: TemplateAutomaton,
    initial: Vec<ProductState>,
    rule_count: usize,
    prop_count: usize,
    state_cap: usize,
}

struct Node {
    parent: Option<(usize, Process, usize)>,
}

struct Search {
    visited: IndexMap<ProductState, Node>,
    hit: Option<usize>,
}

impl Checker {
    pub fn new(rb: &RuleBase, policy: InitPolicy) -> Result<Self, ExploreError> {
        if policy.seed_rule >= rb.rule_count() {
            return Err(ExploreError::InvalidSeed { seed: policy.seed_rule, rules: rb.rule_count() });
        }
        let template = build_template(rb, policy);
        let initial = initial_stores(rb, policy)
            .into_iter()
            .map(|store| ProductState { loc1: template.initial, loc2: template.initial, store })
            .collect();
        Ok(Self {
            template,
            initial,
            rule_count: rb.rule_count(),
            prop_count: rb.prop_count,
            state_cap: DEFAULT_STATE_CAP,
        })
    }

    pub fn with_state_cap(mut self, cap: usize) -> Self {
        self.state_cap = cap.max(1);
        self
    }

    pub fn template(&self) -> &TemplateAutomaton {
        &self.template
    }

    pub fn initial_states(&self) -> &[ProductState] {
        &self.initial
    }

    pub fn state_cap(&self) -> usize {
        self.state_cap
    }

    fn search(&self, target: Option<&StatePredicate>) -> Result<Search, ExploreError> {
        let mut visited: IndexMap<ProductState, Node> = IndexMap::new();
        for st in &self.initial {
            if visited.contains_key(st) {
                continue;
            }
            if visited.len() >= self.state_cap {
                return Err(ExploreError::ResourceLimit { cap: self.state_cap, explored: visited.len() });
            }
            let (idx, _) = visited.insert_full(st.clone(), Node { parent: None });
            if target.is_some_and(|p| p.holds(st)) {
                return Ok(Search { visited, hit: Some(idx) });
            }
        }

        let mut cursor = 0;
        while cursor < visited.len() {
            let (current, _) = visited.get_index(cursor).expect("cursor within bounds");
            let succ = successors(current, &self.template);
            for (step, next) in succ {
                if visited.contains_key(&next) {
                    continue;
                }
                if visited.len() >= self.state_cap {
                    return Err(ExploreError::ResourceLimit { cap: self.state_cap, explored: visited.len() });
                }
                let satisfied = target.is_some_and(|p| p.holds(&next));
                let (idx, _) = visited.insert_full(next, Node { parent: Some((cursor, step.process, step.edge)) });
                if satisfied {
                    return Ok(Search { visited, hit: Some(idx) });
                }
            }
            cursor += 1;
        }
        Ok(Search { visited, hit: None })
    }

    fn trace_to(&self, visited: &IndexMap<ProductState, Node>, idx: usize) -> WitnessTrace {
        let mut rev = Vec::new();
        let mut at = idx;
        loop {
            let (state, node) = visited.get_index(at).expect("parent index is valid");
            match node.parent {
                None => {
                    rev.reverse();
                    return WitnessTrace { initial: state.clone(), steps: rev };
                }
                Some((parent, process, edge)) => {
                    let e = &self.template.edges[edge];
                    rev.push(Step { process, edge, label: format!("{} -> {}", e.src, e.dst), state: state.clone() });
                    at = parent;
                }
            }
        }
    }

    /// `E<> pred`
    pub fn check_ef(&self, pred: &StatePredicate) -> Result<Verdict, ExploreError> {
        pred.check_indices(self.rule_count, self.prop_count)?;
        let search = self.search(Some(pred))?;
        let pairs: HashSet<(Location, Location)> = search.visited.keys().map(ProductState::location_pair).collect();
        Ok(Verdict {
            satisfied: search.hit.is_some(),
            witness: search.hit.map(|idx| self.trace_to(&search.visited, idx)),
            states_explored: search.visited.len(),
            distinct_location_pairs: pairs.len(),
        })
    }

    /// `A[] pred`, decided as `not E<> not pred`. A violated invariant
    /// carries the counterexample as its witness.
    pub fn check_ag(&self, pred: &StatePredicate) -> Result<Verdict, ExploreError> {
        let dual = self.check_ef(&pred.clone().negate())?;
        Ok(Verdict { satisfied: !dual.satisfied, ..dual })
    }

    pub fn reachable_stats(&self) -> Result<ReachableStats, ExploreError> {
        let search = self.search(None)?;
        let pairs: HashSet<(Location, Location)> = search.visited.keys().map(ProductState::location_pair).collect();
        Ok(ReachableStats { states: search.visited.len(), location_pairs: pairs.len() })
    }
}

pub fn check_ef(rb: &RuleBase, policy: InitPolicy, pred: &StatePredicate) -> Result<Verdict, ExploreError> {
    Checker::new(rb, policy)?.check_ef(pred)
}

pub fn check_ag(rb: &RuleBase, policy: InitPolicy, pred: &StatePredicate) -> Result<Verdict, ExploreError> {
    Checker::new(rb, policy)?.check_ag(pred)
}

pub fn reachable_stats(rb: &RuleBase, policy: InitPolicy) -> Result<ReachableStats, ExploreError> {
    Checker::new(rb, policy)?.reachable_stats()
}
