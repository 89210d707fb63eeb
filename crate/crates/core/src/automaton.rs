//! Compilation of a rule base into the rule-firing template automaton.
//!
//! The template has the locations `start`, `rs`, `rf` and one location per
//! rule. Firing rule `i` means taking `rs -> r<i>` (guard: the compiled LHS,
//! update: the compiled RHS) and then `r<i> -> rf` (update: `r[i] = true`).
//! `rf -> rs` returns the process to rule selection.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rulebase::{Formula, Literal, RuleBase};

/// Value of a proposition: false, true, or unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TriValue {
    False = 0,
    True = 1,
    #[default]
    Nothing = 2,
}

impl TriValue {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TriValue::True
        } else {
            TriValue::False
        }
    }
}

impl From<TriValue> for u8 {
    fn from(v: TriValue) -> u8 {
        v as u8
    }
}

impl TryFrom<u8> for TriValue {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(TriValue::False),
            1 => Ok(TriValue::True),
            2 => Ok(TriValue::Nothing),
            other => Err(format!("invalid proposition value {other}, expected 0, 1 or 2")),
        }
    }
}

impl fmt::Display for TriValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// The shared variables: proposition values `p` and rule-used flags `r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValuationStore {
    pub p: Vec<TriValue>,
    pub r: Vec<bool>,
}

impl ValuationStore {
    /// All propositions unknown, no rule used.
    pub fn unknown(prop_count: usize, rule_count: usize) -> Self {
        Self { p: vec![TriValue::Nothing; prop_count], r: vec![false; rule_count] }
    }

    pub fn all_rules_used(&self) -> bool {
        self.r.iter().all(|&used| used)
    }
}

impl fmt::Display for ValuationStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("p=[")?;
        for (k, v) in self.p.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("] r=[")?;
        for (k, used) in self.r.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            f.write_str(if *used { "T" } else { "F" })?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Start,
    Rs,
    Rf,
    Rule(usize),
}

impl Location {
    /// Name used in exported models and queries. Rule locations are named
    /// after the rule they fire.
    pub fn name(&self, rb: &RuleBase) -> String {
        match self {
            Location::Start => "start".into(),
            Location::Rs => "rs".into(),
            Location::Rf => "rf".into(),
            Location::Rule(id) => rb.rules[*id].name.clone(),
        }
    }

    /// Resolves a location name against the rule base.
    pub fn from_name(name: &str, rb: &RuleBase) -> Option<Self> {
        match name {
            "start" => Some(Location::Start),
            "rs" => Some(Location::Rs),
            "rf" => Some(Location::Rf),
            other => rb.rule_by_name(other).map(|r| Location::Rule(r.id)),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Start => f.write_str("start"),
            Location::Rs => f.write_str("rs"),
            Location::Rf => f.write_str("rf"),
            Location::Rule(id) => write!(f, "r{id}"),
        }
    }
}

/// Edge guard over the proposition array.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    /// `p[prop] == required`, with `required` either 0 or 1.
    Cmp {
        prop: usize,
        required: TriValue,
    },
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    /// Renders the guard in UPPAAL expression syntax. `None` for the trivial guard.
    pub fn to_uppaal(&self) -> Option<String> {
        match self {
            Guard::True => None,
            _ => Some(self.render(0)),
        }
    }

    fn render(&self, parent: u8) -> String {
        match self {
            Guard::True => "true".into(),
            Guard::Cmp { prop, required } => format!("p[{prop}]=={required}"),
            Guard::And(a, b) => {
                let s = format!("{} && {}", a.render(2), b.render(3));
                if parent > 2 {
                    format!("({s})")
                } else {
                    s
                }
            }
            Guard::Or(a, b) => {
                let s = format!("{} || {}", a.render(1), b.render(2));
                if parent > 1 {
                    format!("({s})")
                } else {
                    s
                }
            }
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assignment {
    /// `p[prop] = value`; value is never `Nothing`.
    Assign { prop: usize, value: TriValue },
    /// `r[rule] = true`
    SetRuleUsed(usize),
    /// One-shot call to `initp()`.
    InitP,
}

/// Ordered assignments executed when an edge is taken.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Update(pub Vec<Assignment>);

impl Update {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Renders the update in UPPAAL syntax; `initp` is the call expression
    /// emitted for `InitP`.
    pub fn to_uppaal(&self, initp: &str) -> Option<String> {
        if self.0.is_empty() {
            return None;
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|a| match a {
                Assignment::Assign { prop, value } => format!("p[{prop}]={value}"),
                Assignment::SetRuleUsed(id) => format!("r[{id}]=true"),
                Assignment::InitP => initp.to_string(),
            })
            .collect();
        Some(parts.join(", "))
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_uppaal("initp()").unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: Location,
    pub guard: Guard,
    pub update: Update,
    pub dst: Location,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.src, self.dst)?;
        if self.guard != Guard::True {
            write!(f, " [{}]", self.guard)?;
        }
        if !self.update.is_empty() {
            write!(f, " {{{}}}", self.update)?;
        }
        Ok(())
    }
}

/// Which rule's LHS is made satisfiable by `initp()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InitPolicy {
    pub seed_rule: usize,
}

impl InitPolicy {
    pub fn seeded(seed_rule: usize) -> Self {
        Self { seed_rule }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateAutomaton {
    pub rule_count: usize,
    pub prop_count: usize,
    pub locations: Vec<Location>,
    /// Declaration order: `start -> rs`, then `rs -> r<i>`, `r<i> -> rf`
    /// for each rule, then `rf -> rs`.
    pub edges: Vec<Edge>,
    pub initial: Location,
}

impl TemplateAutomaton {
    pub fn outgoing(&self, from: Location) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.src == from)
    }
}

pub fn compile_guard(f: &Formula) -> Guard {
    match f {
        Formula::Lit(l) => Guard::Cmp { prop: l.prop_index, required: TriValue::from_bool(!l.negated) },
        Formula::And(a, b) => Guard::And(Box::new(compile_guard(a)), Box::new(compile_guard(b))),
        Formula::Or(a, b) => Guard::Or(Box::new(compile_guard(a)), Box::new(compile_guard(b))),
    }
}

pub fn compile_update(rhs: &[Literal]) -> Update {
    Update(
        rhs.iter().map(|l| Assignment::Assign { prop: l.prop_index, value: TriValue::from_bool(!l.negated) }).collect(),
    )
}

pub fn build_template(rb: &RuleBase, _policy: InitPolicy) -> TemplateAutomaton {
    let m = rb.rule_count();
    let mut locations = vec![Location::Start, Location::Rs, Location::Rf];
    locations.extend((0..m).map(Location::Rule));

    let mut edges = Vec::with_capacity(2 + 2 * m);
    edges.push(Edge {
        src: Location::Start,
        guard: Guard::True,
        update: Update(vec![Assignment::InitP]),
        dst: Location::Rs,
    });
    for rule in &rb.rules {
        edges.push(Edge {
            src: Location::Rs,
            guard: compile_guard(&rule.lhs),
            update: compile_update(&rule.rhs),
            dst: Location::Rule(rule.id),
        });
        edges.push(Edge {
            src: Location::Rule(rule.id),
            guard: Guard::True,
            update: Update(vec![Assignment::SetRuleUsed(rule.id)]),
            dst: Location::Rf,
        });
    }
    edges.push(Edge { src: Location::Rf, guard: Guard::True, update: Update::default(), dst: Location::Rs });

    TemplateAutomaton { rule_count: m, prop_count: rb.prop_count, locations, edges, initial: Location::Start }
}

/// Minimal sets of literals that make `f` true when every other
/// proposition is unknown. Inconsistent combinations are dropped.
pub fn minimal_models(f: &Formula) -> Vec<BTreeSet<Literal>> {
    let models = models_of(f);
    let mut minimal: Vec<BTreeSet<Literal>> = Vec::new();
    for m in &models {
        if models.iter().any(|other| other != m && other.is_subset(m)) {
            continue;
        }
        if !minimal.contains(m) {
            minimal.push(m.clone());
        }
    }
    minimal
}

fn models_of(f: &Formula) -> Vec<BTreeSet<Literal>> {
    match f {
        Formula::Lit(l) => vec![BTreeSet::from([*l])],
        Formula::Or(a, b) => {
            let mut out = models_of(a);
            out.extend(models_of(b));
            out
        }
        Formula::And(a, b) => {
            let right = models_of(b);
            let mut out = Vec::new();
            for left in models_of(a) {
                for r in &right {
                    let merged: BTreeSet<Literal> = left.union(r).copied().collect();
                    if merged.iter().all(|l| !merged.contains(&l.complement())) {
                        out.push(merged);
                    }
                }
            }
            out
        }
    }
}

/// The stores `initp()` can produce: everything unknown, overlaid with one
/// minimal model of the seed rule's LHS. Unsatisfiable seeds leave every
/// proposition unknown.
pub fn initial_stores(rb: &RuleBase, policy: InitPolicy) -> Vec<ValuationStore> {
    let base = ValuationStore::unknown(rb.prop_count, rb.rule_count());
    let Some(seed) = rb.rules.get(policy.seed_rule) else {
        return vec![base];
    };
    let mut stores: Vec<ValuationStore> = Vec::new();
    for model in minimal_models(&seed.lhs) {
        let mut store = base.clone();
        for lit in model {
            store.p[lit.prop_index] = TriValue::from_bool(!lit.negated);
        }
        if !stores.contains(&store) {
            stores.push(store);
        }
    }
    if stores.is_empty() {
        stores.push(base);
    }
    stores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rulebase::parse_rule_base;

    const EXAMPLE_RULES: &str = "\
r0: p0 -> p1 & p4
r1: p1 -> ~p4
r2: ~p2 -> p0 & p1
r3: p0 | p3 -> p4
r4: p4 -> p3
";

    fn cmp(prop: usize, v: u8) -> Guard {
        Guard::Cmp { prop, required: TriValue::try_from(v).unwrap() }
    }

    #[test]
    fn guards_compile_literals() {
        assert_eq!(compile_guard(&Formula::Lit(Literal::pos(0))), cmp(0, 1));
        assert_eq!(compile_guard(&Formula::Lit(Literal::neg(2))), cmp(2, 0));
        let f = Formula::or(Formula::Lit(Literal::pos(0)), Formula::Lit(Literal::pos(3)));
        assert_eq!(compile_guard(&f), Guard::Or(Box::new(cmp(0, 1)), Box::new(cmp(3, 1))));
    }

    #[test]
    fn updates_compile_literals() {
        let a = |prop, v: u8| Assignment::Assign { prop, value: TriValue::try_from(v).unwrap() };
        assert_eq!(compile_update(&[Literal::pos(1), Literal::pos(4)]), Update(vec![a(1, 1), a(4, 1)]));
        assert_eq!(compile_update(&[Literal::neg(4)]), Update(vec![a(4, 0)]));
        assert_eq!(compile_update(&[Literal::pos(0)]), Update(vec![a(0, 1)]));
    }

    #[test]
    fn template_of_example() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let ta = build_template(&rb, InitPolicy::default());
        assert_eq!(ta.locations.len(), 8);
        assert_eq!(ta.edges.len(), 12);
        let r0 = ta.edges.iter().find(|e| e.src == Location::Rs && e.dst == Location::Rule(0)).unwrap();
        assert_eq!(r0.guard, cmp(0, 1));
        assert_eq!(r0.update.to_uppaal("initp()").unwrap(), "p[1]=1, p[4]=1");
        assert_eq!(r0.guard.to_uppaal().unwrap(), "p[0]==1");
        let used = ta.edges.iter().find(|e| e.src == Location::Rule(0)).unwrap();
        assert_eq!(used.update.to_uppaal("initp()").unwrap(), "r[0]=true");
        assert_eq!(ta.edges[0].update, Update(vec![Assignment::InitP]));
        assert_eq!(ta.edges.last().unwrap().src, Location::Rf);
    }

    #[test]
    fn single_rule_template() {
        let rb = parse_rule_base("r0: p0 -> p0").unwrap();
        let ta = build_template(&rb, InitPolicy::default());
        assert_eq!(ta.locations.len(), 4);
        assert_eq!(ta.edges.len(), 4);
    }

    #[test]
    fn guard_rendering_parenthesizes() {
        let rb = parse_rule_base("r0: (p0 | p1) & ~p2 -> p3\nr1: p0 | p1 & p2 -> p3").unwrap();
        assert_eq!(compile_guard(&rb.rules[0].lhs).to_string(), "(p[0]==1 || p[1]==1) && p[2]==0");
        assert_eq!(compile_guard(&rb.rules[1].lhs).to_string(), "p[0]==1 || p[1]==1 && p[2]==1");
    }

    #[test]
    fn seed_stores() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let p = |v: &[u8]| v.iter().map(|x| TriValue::try_from(*x).unwrap()).collect::<Vec<_>>();

        let stores = initial_stores(&rb, InitPolicy::seeded(0));
        assert_eq!(stores.len(), 1);
        assert_eq!(stores[0].p, p(&[1, 2, 2, 2, 2]));
        assert_eq!(stores[0].r, vec![false; 5]);

        let stores = initial_stores(&rb, InitPolicy::seeded(3));
        assert_eq!(
            stores.iter().map(|s| s.p.clone()).collect::<Vec<_>>(),
            vec![p(&[1, 2, 2, 2, 2]), p(&[2, 2, 2, 1, 2])]
        );

        let stores = initial_stores(&rb, InitPolicy::seeded(2));
        assert_eq!(stores, vec![ValuationStore { p: p(&[2, 2, 0, 2, 2]), r: vec![false; 5] }]);
    }

    #[test]
    fn unsatisfiable_seed_leaves_everything_unknown() {
        let rb = parse_rule_base("r0: p0 & ~p0 -> p1").unwrap();
        assert_eq!(initial_stores(&rb, InitPolicy::default()), vec![ValuationStore::unknown(2, 1)]);
    }

    #[test]
    fn minimal_models_drop_supersets() {
        let rb = parse_rule_base("r0: p0 | p0 & p1 -> p2").unwrap();
        assert_eq!(minimal_models(&rb.rules[0].lhs), vec![BTreeSet::from([Literal::pos(0)])]);
    }
}
