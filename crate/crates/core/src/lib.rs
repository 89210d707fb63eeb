//! Verification of propositional rule bases by model checking.
//!
//! Rules are compiled into a template automaton, two instances of it are
//! explored as an interleaving product over shared proposition and
//! rule-used arrays, and confliction and unreachability are decided with
//! `E<>` reachability queries. Models and queries can be exported for
//! UPPAAL.

pub mod analysis;
pub mod automaton;
pub mod cli;
pub mod explorer;
pub mod query;
pub mod rulebase;
pub mod uppaal_export;

pub use analysis::{analyze, AnalysisReport};
pub use automaton::{build_template, InitPolicy, Location, TemplateAutomaton, TriValue, ValuationStore};
pub use explorer::{check_ag, check_ef, Checker, ExploreError, Process, StatePredicate, Verdict, WitnessTrace};
pub use rulebase::{parse_rule_base, validate, Formula, Literal, ParseError, Rule, RuleBase};
