mod common;

use std::path::PathBuf;
use std::process::Command;

use rulecheck::analysis::{analyze, AnalysisOptions};
use rulecheck::query::{parse_query, PathQuantifier};
use rulecheck::uppaal_export::{export_bundle, write_bundle, FindingRef};
use rulecheck::{parse_rule_base, InitPolicy, Location, Process, StatePredicate};

struct ModelShape {
    templates: usize,
    locations: usize,
    transitions: usize,
    location_names: Vec<String>,
    system: String,
    declaration: String,
}

fn shape(xml: &str) -> ModelShape {
    let doc = roxmltree::Document::parse_with_options(
        xml,
        roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() },
    )
    .expect("model is well-formed XML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "nta");
    let templates: Vec<_> = root.children().filter(|n| n.has_tag_name("template")).collect();
    let t = templates[0];
    let locations: Vec<_> = t.children().filter(|n| n.has_tag_name("location")).collect();
    let location_names = locations
        .iter()
        .map(|l| l.children().find(|c| c.has_tag_name("name")).unwrap().text().unwrap().to_string())
        .collect();
    ModelShape {
        templates: templates.len(),
        locations: locations.len(),
        transitions: t.children().filter(|n| n.has_tag_name("transition")).count(),
        location_names,
        system: root.children().find(|n| n.has_tag_name("system")).unwrap().text().unwrap().to_string(),
        declaration: root.children().find(|n| n.has_tag_name("declaration")).unwrap().text().unwrap().to_string(),
    }
}

#[test]
fn example_model_is_structurally_complete() {
    let rb = parse_rule_base(common::EXAMPLE_RULES).unwrap();
    let report = analyze(&rb, InitPolicy::default(), AnalysisOptions::default()).unwrap();
    let bundle = export_bundle(&rb, InitPolicy::default(), &report);
    let s = shape(&bundle.model_xml);
    assert_eq!(s.templates, 1);
    assert_eq!(s.locations, 8);
    assert_eq!(s.transitions, 12);
    assert_eq!(s.location_names, ["start", "rs", "rf", "r0", "r1", "r2", "r3", "r4"]);
    assert!(s.system.contains("es1 = Rules();") && s.system.contains("es2 = Rules();"));
    assert!(s.system.contains("system es1, es2;"));
    assert!(s.declaration.contains("int p[N];") && s.declaration.contains("bool r[M];"));
    assert!(s.declaration.contains("if (initialized) return;"));
    assert!(bundle.model_xml.contains("p[0]==1"));
}

#[test]
fn random_models_have_expected_shape() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let rb = parse_rule_base(&common::random_rule_text(&mut rng, 8, 6)).unwrap();
        let xml = rulecheck::uppaal_export::export_model(&rb, InitPolicy::default());
        let s = shape(&xml);
        let m = rb.rule_count();
        let seeds = rulecheck::automaton::initial_stores(&rb, InitPolicy::default()).len();
        assert_eq!(s.locations, 3 + m);
        assert_eq!(s.transitions, 2 + 2 * m + (seeds - 1));
    }
}

#[test]
fn every_query_line_maps_to_its_finding() {
    let rb = parse_rule_base(common::EXAMPLE_RULES).unwrap();
    let report = analyze(&rb, InitPolicy::default(), AnalysisOptions::default()).unwrap();
    let bundle = export_bundle(&rb, InitPolicy::default(), &report);
    let lines: Vec<&str> = bundle.queries_q.lines().collect();
    assert_eq!(lines.len(), bundle.manifest.len());
    assert_eq!(lines.len(), report.conflicts.len() + 1 + report.reachability.len());
    assert!(lines.contains(&"E<> es1.r0 and es2.r1"));
    assert!(lines.contains(&"E<> forall (i:typem) r[i]==true"));
    assert!(lines.contains(&"E<> es1.r2"));

    let mut seen = std::collections::HashSet::new();
    for (k, entry) in bundle.manifest.iter().enumerate() {
        assert_eq!(entry.line, k + 1);
        assert_eq!(entry.query, lines[k]);
        assert!(seen.insert(format!("{:?}", entry.finding)), "finding mapped twice");
        let q = parse_query(&entry.query, &rb).unwrap();
        assert_eq!(q.quantifier, PathQuantifier::Possibly);
        let expected_pred = match &entry.finding {
            FindingRef::Conflict { candidate } => candidate.predicate(),
            FindingRef::AllRulesUsed => StatePredicate::AllRulesUsed,
            FindingRef::Reachability { rule } => StatePredicate::at(Process::Es1, Location::Rule(*rule)),
        };
        assert_eq!(q.predicate, expected_pred);
    }
}

fn verifyta() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("UPPAAL_VERIFYTA") {
        return Some(PathBuf::from(p));
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join("verifyta")).find(|p| p.is_file())
}

/// Runs only when an UPPAAL `verifyta` binary is available.
#[test]
fn uppaal_agrees_with_explorer_when_available() {
    let Some(bin) = verifyta() else {
        eprintln!("verifyta not found; skipping UPPAAL cross-check");
        return;
    };
    let rb = parse_rule_base(common::EXAMPLE_RULES).unwrap();
    let report = analyze(&rb, InitPolicy::default(), AnalysisOptions::default()).unwrap();
    let bundle = export_bundle(&rb, InitPolicy::default(), &report);
    let dir = tempfile::tempdir().unwrap();
    let [xml, q, _] = write_bundle(&bundle, &dir.path().join("example")).unwrap();
    let out = Command::new(bin).arg(&xml).arg(&q).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let verdicts: Vec<bool> = stdout.lines().filter(|l| l.contains("Formula is")).map(|l| !l.contains("NOT")).collect();
    let expected: Vec<bool> = bundle.manifest.iter().map(|e| e.expected).collect();
    assert_eq!(verdicts, expected, "{stdout}");
}
