//! Confliction and unreachability checks built on the explorer.
//!
//! A conflict candidate is a pair of rules whose deductions contain `p_i`
//! and `~p_i`. It is confirmed only if some reachable state has `es1` at
//! the first rule's location while `es2` is at the second's. A rule is
//! reachable if `es1` can reach its location.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{initial_stores, InitPolicy, Location, TriValue};
use crate::explorer::{
    Checker, ExploreError, Process, ReachableStats, StatePredicate, WitnessTrace, DEFAULT_STATE_CAP,
};
use crate::rulebase::RuleBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConflictCandidate {
    /// Rule asserting `p_i`.
    #[serde(rename = "x")]
    pub rule_x: usize,
    /// Rule asserting `~p_i`.
    #[serde(rename = "y")]
    pub rule_y: usize,
    #[serde(rename = "prop")]
    pub prop_index: usize,
}

impl ConflictCandidate {
    /// `es1` at `r<x>` and `es2` at `r<y>`.
    pub fn predicate(&self) -> StatePredicate {
        StatePredicate::at(Process::Es1, Location::Rule(self.rule_x))
            .and(StatePredicate::at(Process::Es2, Location::Rule(self.rule_y)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictFinding {
    #[serde(flatten)]
    pub candidate: ConflictCandidate,
    pub confirmed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachabilityFinding {
    #[serde(rename = "rule")]
    pub rule_id: usize,
    pub reachable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnreachabilityResult {
    /// Outcome of `E<> forall (i:typem) r[i]==true` alone.
    pub all_rules_used: bool,
    pub all_rules_used_witness: Option<WitnessTrace>,
    pub findings: Vec<ReachabilityFinding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub state_cap: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { state_cap: DEFAULT_STATE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitSummary {
    pub seed_rule: usize,
    /// Proposition arrays `initp()` may produce.
    pub stores: Vec<Vec<TriValue>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub states: usize,
    pub location_pairs: usize,
    /// `(3+m)^2`
    pub location_pair_bound: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Completed {
    pub conflicts: bool,
    pub unreachability: bool,
    pub stats: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rules: usize,
    pub props: usize,
    pub names: Vec<String>,
    pub init: InitSummary,
    pub conflicts: Vec<ConflictFinding>,
    /// True iff the global `forall` query holds and every rule is reachable.
    pub all_rules_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_rules_used_witness: Option<WitnessTrace>,
    pub reachability: Vec<ReachabilityFinding>,
    pub stats: Option<StatsSummary>,
    pub completed: Completed,
}

impl AnalysisReport {
    pub fn confirmed_conflicts(&self) -> impl Iterator<Item = &ConflictFinding> {
        self.conflicts.iter().filter(|c| c.confirmed)
    }

    pub fn unreachable_rules(&self) -> impl Iterator<Item = &ReachabilityFinding> {
        self.reachability.iter().filter(|f| !f.reachable)
    }

    /// Whether anything needs fixing: a confirmed conflict or an unreachable rule.
    pub fn has_findings(&self) -> bool {
        self.confirmed_conflicts().next().is_some() || self.unreachable_rules().next().is_some()
    }

    pub fn witnesses(&self) -> impl Iterator<Item = &WitnessTrace> {
        self.conflicts
            .iter()
            .filter_map(|c| c.witness.as_ref())
            .chain(self.all_rules_used_witness.iter())
            .chain(self.reachability.iter().filter_map(|f| f.witness.as_ref()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{source}")]
pub struct AnalysisError {
    pub source: ExploreError,
    /// Whatever finished before the failure; see `completed`.
    pub partial: Option<Box<AnalysisReport>>,
}

/// Every ordered pair of rules with complementary RHS literals, ordered by
/// (proposition, positive rule, negative rule).
pub fn conflict_candidates(rb: &RuleBase) -> Vec<ConflictCandidate> {
    let mut out = Vec::new();
    for prop in 0..rb.prop_count {
        for x in &rb.rules {
            if !x.rhs.iter().any(|l| l.prop_index == prop && !l.negated) {
                continue;
            }
            for y in &rb.rules {
                if y.id != x.id && y.rhs.iter().any(|l| l.prop_index == prop && l.negated) {
                    out.push(ConflictCandidate { rule_x: x.id, rule_y: y.id, prop_index: prop });
                }
            }
        }
    }
    out
}

fn confirm(checker: &Checker, candidate: ConflictCandidate) -> Result<ConflictFinding, ExploreError> {
    let verdict = checker.check_ef(&candidate.predicate())?;
    Ok(ConflictFinding { candidate, confirmed: verdict.satisfied, witness: verdict.witness })
}

fn unreachability(checker: &Checker, rule_count: usize) -> Result<UnreachabilityResult, ExploreError> {
    let global = checker.check_ef(&StatePredicate::AllRulesUsed)?;
    let findings = (0..rule_count)
        .map(|id| {
            let v = checker.check_ef(&StatePredicate::at(Process::Es1, Location::Rule(id)))?;
            Ok(ReachabilityFinding { rule_id: id, reachable: v.satisfied, witness: v.witness })
        })
        .collect::<Result<Vec<_>, ExploreError>>()?;
    Ok(UnreachabilityResult { all_rules_used: global.satisfied, all_rules_used_witness: global.witness, findings })
}

pub fn verify_conflict(
    rb: &RuleBase,
    policy: InitPolicy,
    candidate: ConflictCandidate,
) -> Result<ConflictFinding, ExploreError> {
    confirm(&Checker::new(rb, policy)?, candidate)
}

pub fn verify_unreachability(rb: &RuleBase, policy: InitPolicy) -> Result<UnreachabilityResult, ExploreError> {
    unreachability(&Checker::new(rb, policy)?, rb.rule_count())
}

pub fn analyze(rb: &RuleBase, policy: InitPolicy, options: AnalysisOptions) -> Result<AnalysisReport, AnalysisError> {
    let checker = Checker::new(rb, policy)
        .map_err(|source| AnalysisError { source, partial: None })?
        .with_state_cap(options.state_cap);
    let m = rb.rule_count();

    let mut report = AnalysisReport {
        rules: m,
        props: rb.prop_count,
        names: rb.names(),
        init: InitSummary {
            seed_rule: policy.seed_rule,
            stores: initial_stores(rb, policy).into_iter().map(|s| s.p).collect(),
        },
        conflicts: Vec::new(),
        all_rules_used: false,
        all_rules_used_witness: None,
        reachability: Vec::new(),
        stats: None,
        completed: Completed::default(),
    };
    let fail = |source: ExploreError, report: &AnalysisReport| AnalysisError {
        source,
        partial: Some(Box::new(report.clone())),
    };

    for candidate in conflict_candidates(rb) {
        let finding = confirm(&checker, candidate).map_err(|e| fail(e, &report))?;
        report.conflicts.push(finding);
    }
    report.completed.conflicts = true;

    let unreach = unreachability(&checker, m).map_err(|e| fail(e, &report))?;
    report.all_rules_used = unreach.all_rules_used && unreach.findings.iter().all(|f| f.reachable);
    report.all_rules_used_witness = unreach.all_rules_used_witness;
    report.reachability = unreach.findings;
    report.completed.unreachability = true;

    let ReachableStats { states, location_pairs } = checker.reachable_stats().map_err(|e| fail(e, &report))?;
    report.stats = Some(StatsSummary { states, location_pairs, location_pair_bound: (3 + m) * (3 + m) });
    report.completed.stats = true;

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::replay_witness;
    use crate::rulebase::parse_rule_base;

    const EXAMPLE_RULES: &str = "\
r0: p0 -> p1 & p4
r1: p1 -> ~p4
r2: ~p2 -> p0 & p1
r3: p0 | p3 -> p4
r4: p4 -> p3
";

    fn cand(x: usize, y: usize, p: usize) -> ConflictCandidate {
        ConflictCandidate { rule_x: x, rule_y: y, prop_index: p }
    }

    #[test]
    fn candidates() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        assert_eq!(conflict_candidates(&rb), vec![cand(0, 1, 4), cand(3, 1, 4)]);
        assert!(conflict_candidates(&parse_rule_base("r0: p0 -> p1").unwrap()).is_empty());
        let rb = parse_rule_base("r0: p0 -> p1\nr1: p0 -> ~p1").unwrap();
        assert_eq!(conflict_candidates(&rb), vec![cand(0, 1, 1)]);
    }

    #[test]
    fn example_conflict_is_confirmed() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let f = verify_conflict(&rb, InitPolicy::default(), cand(0, 1, 4)).unwrap();
        assert!(f.confirmed);
        let ta = crate::automaton::build_template(&rb, InitPolicy::default());
        replay_witness(f.witness.as_ref().unwrap(), &ta).unwrap();
    }

    #[test]
    fn unreachable_guard_blocks_conflict() {
        let rb = parse_rule_base("r0: p0 -> p1\nr1: p2 -> ~p1").unwrap();
        let f = verify_conflict(&rb, InitPolicy::default(), cand(0, 1, 1)).unwrap();
        assert!(!f.confirmed);
        assert!(f.witness.is_none());
    }

    #[test]
    fn unreachability_cases() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let res = verify_unreachability(&rb, InitPolicy::default()).unwrap();
        assert!(!res.all_rules_used);
        let reach: Vec<bool> = res.findings.iter().map(|f| f.reachable).collect();
        assert_eq!(reach, vec![true, true, false, true, true]);

        let rb = parse_rule_base("r0: p0 -> p0").unwrap();
        let res = verify_unreachability(&rb, InitPolicy::default()).unwrap();
        assert!(res.all_rules_used && res.findings[0].reachable);

        let rb = parse_rule_base("r0: p0 -> p1\nr1: p2 -> p3").unwrap();
        let res = verify_unreachability(&rb, InitPolicy::default()).unwrap();
        assert!(!res.all_rules_used);
        assert!(res.findings[0].reachable && !res.findings[1].reachable);
    }

    #[test]
    fn report_of_example() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let report = analyze(&rb, InitPolicy::default(), AnalysisOptions::default()).unwrap();
        assert_eq!(report.conflicts.len(), 2);
        assert!(!report.all_rules_used);
        assert_eq!(report.reachability.len(), 5);
        let stats = report.stats.unwrap();
        assert!(stats.location_pairs <= 64);
        assert_eq!(stats.location_pair_bound, 64);
        assert!(report.has_findings());
        assert_eq!(report.completed, Completed { conflicts: true, unreachability: true, stats: true });

        let json = serde_json::to_string(&report).unwrap();
        let back: AnalysisReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn clean_rule_base_has_no_findings() {
        let rb = parse_rule_base("r0: p0 -> p1").unwrap();
        let report = analyze(&rb, InitPolicy::default(), AnalysisOptions::default()).unwrap();
        assert!(report.conflicts.is_empty());
        assert!(!report.has_findings());
    }

    #[test]
    fn resource_limit_keeps_partial_report() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let err = analyze(&rb, InitPolicy::default(), AnalysisOptions { state_cap: 40 }).unwrap_err();
        assert!(matches!(err.source, ExploreError::ResourceLimit { cap: 40, .. }));
        let partial = err.partial.unwrap();
        assert!(!partial.completed.stats);
    }
}
