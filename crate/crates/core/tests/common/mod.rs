//! Test-only helpers: an independent brute-force model of the two-process
//! system and a random rule-base generator.
//!
//! The oracle works straight from the parsed rules. It does not use the
//! template automaton, guard compiler or explorer, and it computes the
//! reachable set as a naive fixpoint instead of a search.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rulecheck::{Formula, Literal, RuleBase};

pub const EXAMPLE_RULES: &str = "\
r0: p0 -> p1 & p4
r1: p1 -> ~p4
r2: ~p2 -> p0 & p1
r3: p0 | p3 -> p4
r4: p4 -> p3
";

const START: u8 = 0;
const RS: u8 = 1;
const RF: u8 = 2;

/// Rule `i` lives at location code `3 + i`.
pub fn rule_loc(i: usize) -> u8 {
    3 + i as u8
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OracleState {
    pub locs: [u8; 2],
    /// 0 false, 1 true, 2 unknown
    pub p: Vec<u8>,
    pub r: Vec<bool>,
}

fn holds(f: &Formula, p: &[u8]) -> bool {
    match f {
        Formula::Lit(l) => p[l.prop_index] == if l.negated { 0 } else { 1 },
        Formula::And(a, b) => holds(a, p) && holds(b, p),
        Formula::Or(a, b) => holds(a, p) || holds(b, p),
    }
}

/// Minimal satisfying partial assignments of `f`, found by trying every
/// consistent subset of the literals it mentions.
pub fn brute_force_minimal_models(f: &Formula, prop_count: usize) -> Vec<BTreeSet<Literal>> {
    let lits: Vec<Literal> = f.literals().into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let mut satisfying: Vec<BTreeSet<Literal>> = Vec::new();
    for mask in 0u32..(1 << lits.len()) {
        let subset: BTreeSet<Literal> =
            lits.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, l)| *l).collect();
        if subset.iter().any(|l| subset.contains(&Literal { negated: !l.negated, ..*l })) {
            continue;
        }
        let mut p = vec![2u8; prop_count];
        for l in &subset {
            p[l.prop_index] = if l.negated { 0 } else { 1 };
        }
        if holds(f, &p) {
            satisfying.push(subset);
        }
    }
    satisfying.iter().filter(|s| !satisfying.iter().any(|o| o != *s && o.is_subset(s))).cloned().collect()
}

pub fn oracle_initial(rb: &RuleBase, seed: usize) -> BTreeSet<OracleState> {
    let n = rb.prop_count;
    let m = rb.rule_count();
    let mut out = BTreeSet::new();
    for model in brute_force_minimal_models(&rb.rules[seed].lhs, n) {
        let mut p = vec![2u8; n];
        for l in model {
            p[l.prop_index] = if l.negated { 0 } else { 1 };
        }
        out.insert(OracleState { locs: [START, START], p, r: vec![false; m] });
    }
    if out.is_empty() {
        out.insert(OracleState { locs: [START, START], p: vec![2; n], r: vec![false; m] });
    }
    out
}

fn moves(rb: &RuleBase, st: &OracleState) -> Vec<OracleState> {
    let mut out = Vec::new();
    for proc in 0..2 {
        let here = st.locs[proc];
        let mut go = |to: u8, p: Vec<u8>, r: Vec<bool>| {
            let mut locs = st.locs;
            locs[proc] = to;
            out.push(OracleState { locs, p, r });
        };
        match here {
            START => go(RS, st.p.clone(), st.r.clone()),
            RS => {
                for rule in &rb.rules {
                    if holds(&rule.lhs, &st.p) {
                        let mut p = st.p.clone();
                        for l in &rule.rhs {
                            p[l.prop_index] = if l.negated { 0 } else { 1 };
                        }
                        go(rule_loc(rule.id), p, st.r.clone());
                    }
                }
            }
            RF => go(RS, st.p.clone(), st.r.clone()),
            rule => {
                let mut r = st.r.clone();
                r[(rule - 3) as usize] = true;
                go(RF, st.p.clone(), r);
            }
        }
    }
    out
}

/// Every reachable state, by iterating `S := S ∪ post(S)` to a fixpoint.
pub fn oracle_reachable(rb: &RuleBase, seed: usize) -> BTreeSet<OracleState> {
    let mut reached = oracle_initial(rb, seed);
    loop {
        let mut next = reached.clone();
        for st in &reached {
            next.extend(moves(rb, st));
        }
        if next.len() == reached.len() {
            return reached;
        }
        reached = next;
    }
}

pub fn location_pairs(states: &BTreeSet<OracleState>) -> usize {
    states.iter().map(|s| s.locs).collect::<BTreeSet<_>>().len()
}

fn random_literal(rng: &mut ChaCha8Rng, n: usize) -> Literal {
    Literal { prop_index: rng.gen_range(0..n), negated: rng.gen_bool(0.3) }
}

fn random_formula(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.55) {
        return Formula::Lit(random_literal(rng, n));
    }
    let a = random_formula(rng, n, depth - 1);
    let b = random_formula(rng, n, depth - 1);
    if rng.gen_bool(0.5) {
        Formula::and(a, b)
    } else {
        Formula::or(a, b)
    }
}

/// A random rule file with at most `max_m` rules over at most `max_n`
/// propositions, in the rule DSL.
pub fn random_rule_text(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> String {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_n);
    let mut text = String::new();
    for id in 0..m {
        let lhs = random_formula(rng, n, 2);
        let mut props: Vec<usize> = (0..n).collect();
        props.shuffle(rng);
        let k = rng.gen_range(1..=n.min(3));
        let rhs: Vec<String> =
            props[..k].iter().map(|&p| Literal { prop_index: p, negated: rng.gen_bool(0.3) }.to_string()).collect();
        text.push_str(&format!("r{id}: {lhs} -> {}\n", rhs.join(" & ")));
    }
    text
}

/// Fewest steps after which some reachable state satisfies `pred`, from the
/// layers `S_k = S_{k-1} ∪ post(S_{k-1})`. `None` if no reachable state does.
pub fn oracle_depth(rb: &RuleBase, seed: usize, pred: impl Fn(&OracleState) -> bool) -> Option<usize> {
    let mut reached = oracle_initial(rb, seed);
    let mut depth = 0;
    loop {
        if reached.iter().any(&pred) {
            return Some(depth);
        }
        let mut next = reached.clone();
        for st in &reached {
            next.extend(moves(rb, st));
        }
        if next.len() == reached.len() {
            return None;
        }
        reached = next;
        depth += 1;
    }
}
