//! UPPAAL model and query export.
//!
//! The model is a UPPAAL 4.x `nta` document: global declarations for the
//! `p` and `r` arrays and the one-shot `initp()`, one template mirroring
//! [`build_template`], and a system with the two instances `es1` and `es2`.
//! The query file holds one `E<>` query per line; the manifest ties each
//! line to the finding it checks.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisReport, ConflictCandidate};
use crate::automaton::{build_template, initial_stores, Assignment, InitPolicy, Location, TriValue};
use crate::rulebase::RuleBase;

pub const TEMPLATE_NAME: &str = "Rules";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FindingRef {
    Conflict {
        #[serde(flatten)]
        candidate: ConflictCandidate,
    },
    AllRulesUsed,
    Reachability {
        rule: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// 1-based line in the query file.
    pub line: usize,
    pub query: String,
    pub finding: FindingRef,
    /// Verdict of the built-in explorer for this query.
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportBundle {
    pub model_xml: String,
    pub queries_q: String,
    pub manifest: Vec<ManifestEntry>,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn declarations(rb: &RuleBase, policy: InitPolicy) -> String {
    let n = rb.prop_count;
    let m = rb.rule_count();
    let stores = initial_stores(rb, policy);
    let seed = &rb.rules[policy.seed_rule];

    let mut d = String::new();
    let _ = writeln!(d, "// {m} rules over {n} propositions; p[i] is 0 (false), 1 (true) or 2 (nothing).");
    let _ = writeln!(d, "const int N = {n};");
    let _ = writeln!(d, "const int M = {m};");
    let _ = writeln!(d, "typedef int[0,M-1] typem;");
    let _ = writeln!(d, "int p[N];");
    let _ = writeln!(d, "bool r[M];");
    let _ = writeln!(d, "bool initialized = false;");
    let _ = writeln!(d);
    let _ = writeln!(d, "// Runs once: every proposition unknown except those making the LHS of {} true.", seed.name);
    if stores.len() == 1 {
        let _ = writeln!(d, "void initp() {{");
    } else {
        let _ = writeln!(d, "void initp(int choice) {{");
    }
    let _ = writeln!(d, "    if (initialized) return;");
    let _ = writeln!(d, "    for (i : int[0,N-1]) {{");
    let _ = writeln!(d, "        p[i] = 2;");
    let _ = writeln!(d, "    }}");
    for (k, store) in stores.iter().enumerate() {
        let assigns: Vec<String> = store
            .p
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != TriValue::Nothing)
            .map(|(i, v)| format!("p[{i}] = {v};"))
            .collect();
        if stores.len() == 1 {
            for a in assigns {
                let _ = writeln!(d, "    {a}");
            }
        } else {
            let _ = writeln!(d, "    if (choice == {k}) {{ {} }}", assigns.join(" "));
        }
    }
    let _ = writeln!(d, "    initialized = true;");
    let _ = write!(d, "}}");
    d
}

fn coordinates(loc: Location, m: usize) -> (i64, i64) {
    let spacing = 136;
    let width = (m.max(1) as i64 - 1) * spacing;
    match loc {
        Location::Start => (0, -272),
        Location::Rs => (0, -136),
        Location::Rule(i) => (i as i64 * spacing - width / 2, 0),
        Location::Rf => (0, 136),
    }
}

/// UPPAAL XML for the two-process system.
pub fn export_model(rb: &RuleBase, policy: InitPolicy) -> String {
    let ta = build_template(rb, policy);
    let m = rb.rule_count();
    let seeds = initial_stores(rb, policy).len();
    let id_of = |loc: Location| ta.locations.iter().position(|l| *l == loc).expect("location exists");

    let mut x = String::new();
    let _ = writeln!(x, r#"<?xml version="1.0" encoding="utf-8"?>"#);
    let _ = writeln!(
        x,
        "<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' 'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>"
    );
    let _ = writeln!(x, "<nta>");
    let _ = writeln!(x, "\t<declaration>{}</declaration>", escape(&declarations(rb, policy)));
    let _ = writeln!(x, "\t<template>");
    let _ = writeln!(x, "\t\t<name x=\"5\" y=\"5\">{TEMPLATE_NAME}</name>");
    let _ = writeln!(x, "\t\t<declaration>// all state is global</declaration>");
    for (idx, loc) in ta.locations.iter().enumerate() {
        let (lx, ly) = coordinates(*loc, m);
        let _ = writeln!(x, "\t\t<location id=\"id{idx}\" x=\"{lx}\" y=\"{ly}\">");
        let _ = writeln!(x, "\t\t\t<name x=\"{}\" y=\"{}\">{}</name>", lx - 10, ly - 34, escape(&loc.name(rb)));
        let _ = writeln!(x, "\t\t</location>");
    }
    let _ = writeln!(x, "\t\t<init ref=\"id{}\"/>", id_of(ta.initial));

    for edge in &ta.edges {
        let is_init = edge.update.0.contains(&Assignment::InitP);
        let calls: Vec<String> = if is_init && seeds > 1 {
            (0..seeds).map(|k| format!("initp({k})")).collect()
        } else {
            vec!["initp()".to_string()]
        };
        let (sx, sy) = coordinates(edge.src, m);
        let (tx, ty) = coordinates(edge.dst, m);
        let (mx, my) = ((sx + tx) / 2, (sy + ty) / 2);
        for call in calls {
            let _ = writeln!(x, "\t\t<transition>");
            let _ = writeln!(x, "\t\t\t<source ref=\"id{}\"/>", id_of(edge.src));
            let _ = writeln!(x, "\t\t\t<target ref=\"id{}\"/>", id_of(edge.dst));
            if let Some(g) = edge.guard.to_uppaal() {
                let _ = writeln!(
                    x,
                    "\t\t\t<label kind=\"guard\" x=\"{}\" y=\"{}\">{}</label>",
                    mx + 4,
                    my - 34,
                    escape(&g)
                );
            }
            if let Some(u) = edge.update.to_uppaal(&call) {
                let _ = writeln!(
                    x,
                    "\t\t\t<label kind=\"assignment\" x=\"{}\" y=\"{}\">{}</label>",
                    mx + 4,
                    my - 17,
                    escape(&u)
                );
            }
            if edge.src == Location::Rf {
                // Route the loopback around the rule row.
                let side = coordinates(Location::Rule(m.saturating_sub(1)), m).0 + 136;
                let _ = writeln!(x, "\t\t\t<nail x=\"{side}\" y=\"{sy}\"/>");
                let _ = writeln!(x, "\t\t\t<nail x=\"{side}\" y=\"{ty}\"/>");
            }
            let _ = writeln!(x, "\t\t</transition>");
        }
    }
    let _ = writeln!(x, "\t</template>");
    let _ = writeln!(x, "\t<system>es1 = {TEMPLATE_NAME}();\nes2 = {TEMPLATE_NAME}();\nsystem es1, es2;</system>");
    let _ = writeln!(x, "</nta>");
    x
}

pub fn conflict_query(rb: &RuleBase, candidate: &ConflictCandidate) -> String {
    format!("E<> es1.{} and es2.{}", rb.rules[candidate.rule_x].name, rb.rules[candidate.rule_y].name)
}

pub const ALL_RULES_USED_QUERY: &str = "E<> forall (i:typem) r[i]==true";

pub fn reachability_query(rb: &RuleBase, rule: usize) -> String {
    format!("E<> es1.{}", rb.rules[rule].name)
}

/// Query file text plus one manifest entry per line.
pub fn export_queries(rb: &RuleBase, report: &AnalysisReport) -> (String, Vec<ManifestEntry>) {
    let mut manifest = Vec::new();
    let mut push = |query: String, finding: FindingRef, expected: bool| {
        manifest.push(ManifestEntry { line: manifest.len() + 1, query, finding, expected });
    };
    for c in &report.conflicts {
        push(conflict_query(rb, &c.candidate), FindingRef::Conflict { candidate: c.candidate }, c.confirmed);
    }
    push(
        ALL_RULES_USED_QUERY.to_string(),
        FindingRef::AllRulesUsed,
        report.all_rules_used || report.all_rules_used_witness.is_some(),
    );
    for f in &report.reachability {
        push(reachability_query(rb, f.rule_id), FindingRef::Reachability { rule: f.rule_id }, f.reachable);
    }
    let mut text = String::new();
    for entry in &manifest {
        text.push_str(&entry.query);
        text.push('\n');
    }
    (text, manifest)
}

pub fn export_bundle(rb: &RuleBase, policy: InitPolicy, report: &AnalysisReport) -> ExportBundle {
    let (queries_q, manifest) = export_queries(rb, report);
    ExportBundle { model_xml: export_model(rb, policy), queries_q, manifest }
}

/// Paths written by [`write_bundle`] for a base path `dir/name`.
pub fn bundle_paths(base: &Path) -> [PathBuf; 3] {
    let with = |ext: &str| {
        let mut s = base.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    [with(".xml"), with(".q"), with(".manifest.json")]
}

pub fn write_bundle(bundle: &ExportBundle, base: &Path) -> io::Result<[PathBuf; 3]> {
    let paths = bundle_paths(base);
    std::fs::write(&paths[0], &bundle.model_xml)?;
    std::fs::write(&paths[1], &bundle.queries_q)?;
    let manifest = serde_json::to_string_pretty(&bundle.manifest).map_err(io::Error::other)?;
    std::fs::write(&paths[2], manifest + "\n")?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, AnalysisOptions};
    use crate::rulebase::parse_rule_base;

    const EXAMPLE_RULES: &str = "\
r0: p0 -> p1 & p4
r1: p1 -> ~p4
r2: ~p2 -> p0 & p1
r3: p0 | p3 -> p4
r4: p4 -> p3
";

    #[test]
    fn model_contains_example_expressions() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let xml = export_model(&rb, InitPolicy::default());
        assert!(xml.contains(">p[0]==1</label>"));
        assert!(xml.contains(">p[1]=1, p[4]=1</label>"));
        assert!(xml.contains(">r[0]=true</label>"));
        assert!(xml.contains(">p[0]==1 || p[3]==1</label>"));
        assert!(xml.contains("es1 = Rules();\nes2 = Rules();\nsystem es1, es2;"));
        assert!(xml.contains("typedef int[0,M-1] typem;"));
        assert!(xml.contains("    p[0] = 1;\n"));
        assert_eq!(xml.matches("<location ").count(), 8);
        assert_eq!(xml.matches("<transition>").count(), 12);
    }

    #[test]
    fn conjunctive_guards_are_escaped() {
        let rb = parse_rule_base("r0: p0 & ~p1 -> p2").unwrap();
        let xml = export_model(&rb, InitPolicy::default());
        assert!(xml.contains(">p[0]==1 &amp;&amp; p[1]==0</label>"));
        assert_eq!(xml.matches("<location ").count(), 4);
    }

    #[test]
    fn branching_seed_gets_one_init_edge_per_choice() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let xml = export_model(&rb, InitPolicy::seeded(3));
        assert!(xml.contains("void initp(int choice)"));
        assert!(xml.contains("if (choice == 0) { p[0] = 1; }"));
        assert!(xml.contains("if (choice == 1) { p[3] = 1; }"));
        assert!(xml.contains(">initp(1)</label>"));
        assert_eq!(xml.matches("<transition>").count(), 13);
    }

    #[test]
    fn queries_and_manifest() {
        let rb = parse_rule_base(EXAMPLE_RULES).unwrap();
        let report = analyze(&rb, InitPolicy::default(), AnalysisOptions::default()).unwrap();
        let (text, manifest) = export_queries(&rb, &report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            vec![
                "E<> es1.r0 and es2.r1",
                "E<> es1.r3 and es2.r1",
                "E<> forall (i:typem) r[i]==true",
                "E<> es1.r0",
                "E<> es1.r1",
                "E<> es1.r2",
                "E<> es1.r3",
                "E<> es1.r4",
            ]
        );
        assert!(text.ends_with('\n'));
        assert_eq!(manifest.len(), lines.len());
        let expected: Vec<bool> = manifest.iter().map(|e| e.expected).collect();
        assert_eq!(expected, vec![true, true, false, true, true, false, true, true]);
        let json = serde_json::to_string(&manifest).unwrap();
        assert!(json.contains(r#""finding":{"kind":"conflict","x":0,"y":1,"prop":4}"#), "{json}");
        let back: Vec<ManifestEntry> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn bundle_paths_append_extensions() {
        let [xml, q, manifest] = bundle_paths(Path::new("out/rules.v1"));
        assert_eq!(xml, PathBuf::from("out/rules.v1.xml"));
        assert_eq!(q, PathBuf::from("out/rules.v1.q"));
        assert_eq!(manifest, PathBuf::from("out/rules.v1.manifest.json"));
    }
}
