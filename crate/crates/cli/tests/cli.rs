use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TWO_LEAF: &str = r#"{
  "users": ["alice"],
  "permissions": ["a", "b", "c"],
  "roles": ["root", "r1", "r2"],
  "arcs": [["root", "r1"], ["root", "r2"]],
  "role_permissions": {"r1": ["a"], "r2": ["a", "b", "c"]},
  "user_roles": {"alice": ["root"]}
}
"#;

const DIAMOND_POLICY: &str = r#"{
  "users": ["u"],
  "permissions": ["p", "q"],
  "roles": ["top", "left", "right", "base"],
  "arcs": [["top", "left"], ["top", "right"], ["left", "base"], ["right", "base"], ["top", "base"]],
  "role_permissions": {"base": ["p"], "left": ["q"]},
  "user_roles": {"u": ["top"]}
}
"#;

const DIAMOND: &str = r#"{
  "objects": ["o1", "o2", "o3", "o4"],
  "arcs": [["o1", "o2"], ["o1", "o3"], ["o2", "o4"], ["o3", "o4"]]
}
"#;

const K0: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: TempDir::new().unwrap(),
        }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }
}

fn rolegraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rolegraph"))
        .args(args)
        .env_remove("ROLEGRAPH_K0")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_reports_sizes() {
    let f = Fixture::new();
    let policy = f.file("p.json", TWO_LEAF);
    let o = rolegraph(&["validate", p(&policy)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "ok\t1 users\t3 permissions\t3 roles\t2 arcs\n");
}

#[test]
fn exit_codes_separate_syntax_schema_and_semantics() {
    let f = Fixture::new();
    let syntax = f.file("syntax.json", "{\"users\": [");
    assert_eq!(rolegraph(&["validate", p(&syntax)]).status.code(), Some(2));

    let schema = f.file("schema.json", r#"{"users": [], "permissions": [], "roles": [], "extra": 1}"#);
    assert_eq!(rolegraph(&["validate", p(&schema)]).status.code(), Some(3));

    let cycle = f.file(
        "cycle.json",
        "{\n  \"users\": [],\n  \"permissions\": [],\n  \"roles\": [\"a\", \"b\"],\n  \"arcs\": [[\"a\", \"b\"], [\"b\", \"a\"]]\n}\n",
    );
    let o = rolegraph(&["validate", p(&cycle)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 4: cycle"), "{}", stderr(&o));

    let missing = f.dir.path().join("missing.json");
    assert_eq!(rolegraph(&["validate", p(&missing)]).status.code(), Some(1));
}

#[test]
fn transitive_reduction_of_a_reduced_policy_is_byte_identical() {
    let f = Fixture::new();
    let policy = f.file("p.json", TWO_LEAF);
    let first = rolegraph(&["optimize", p(&policy), "--algorithm", "IV"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let canonical = f.file("canonical.json", &stdout(&first));
    let out = f.dir.path().join("out.json");
    let o = rolegraph(&["optimize", p(&canonical), "--algorithm", "IV", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&canonical).unwrap());
}

#[test]
fn every_algorithm_runs_and_reports() {
    let f = Fixture::new();
    let policy = f.file("p.json", DIAMOND_POLICY);
    for alg in ["I", "Ia", "II", "III", "IV", "I+II", "III+I", "III+Ia"] {
        let o = rolegraph(&["--format", "json", "optimize", p(&policy), "--algorithm", alg]);
        assert_eq!(o.status.code(), Some(0), "{alg}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["report"]["pipeline"][0], alg);
    }
    let o = rolegraph(&["optimize", p(&policy), "--algorithm", "V"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn node_budget_failure_is_an_algorithm_error() {
    let f = Fixture::new();
    let policy = f.file("p.json", DIAMOND_POLICY);
    let o = rolegraph(&["--node-budget", "2", "optimize", p(&policy), "--algorithm", "III"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn flags_lists_true_flags() {
    let f = Fixture::new();
    let policy = f.file("p.json", TWO_LEAF);
    let o = rolegraph(&["flags", p(&policy)]);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "tree_like"));
    assert!(out.lines().any(|l| l == "leaf"));
    assert!(!out.lines().any(|l| l == "single"));
}

#[test]
fn risk_on_two_leaf_example() {
    let f = Fixture::new();
    let policy = f.file("p.json", TWO_LEAF);
    let o = rolegraph(&["risk", p(&policy)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "a\t1/2\t0.500000\nb\t1/4\t0.250000\nc\t1/4\t0.250000\n");
}

#[test]
fn keys_are_bit_exact_and_need_a_tree() {
    let f = Fixture::new();
    let chain = f.file("chain.json", r#"{"objects": ["O1", "O2"], "arcs": [["O1", "O2"]]}"#);
    let o = rolegraph(&["keys", p(&chain), "--k0", K0]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "O1\td278699b8eb3adeec23a8d25c81e8feb40555321cd7b41c1d675bc28a0993ffb\n\
         O2\t625b0d10ff49e3b7bea72d67bdc50d4fd61cdabbc04a22afdbf992d1c6a3d01a\n"
    );

    let diamond = f.file("diamond.json", DIAMOND);
    let o = rolegraph(&["keys", p(&diamond), "--k0", K0]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("not unique"), "{}", stderr(&o));

    let o = rolegraph(&["keys", p(&diamond), "--k0", K0, "--generalized", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let again = rolegraph(&["keys", p(&diamond), "--k0", K0, "--generalized", "--seed", "3"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn k0_from_environment() {
    let f = Fixture::new();
    let chain = f.file("chain.json", r#"{"objects": ["O1"]}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_rolegraph"))
        .args(["keys", p(&chain)])
        .env("ROLEGRAPH_K0", K0)
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "O1\td278699b8eb3adeec23a8d25c81e8feb40555321cd7b41c1d675bc28a0993ffb\n");
    assert_eq!(rolegraph(&["keys", p(&chain), "--k0", "abc"]).status.code(), Some(2));
}

#[test]
fn access_queries() {
    let f = Fixture::new();
    let h = f.file("h.json", r#"{"objects": ["o1", "o2", "o3"], "arcs": [["o1", "o2"], ["o1", "o3"]]}"#);
    let keys = stdout(&rolegraph(&["keys", p(&h), "--k0", K0]));
    let k2 = keys.lines().find_map(|l| l.strip_prefix("o2\t")).unwrap();
    let queries = f.file(
        "q.json",
        &format!(
            r#"{{
  "subjects": {{"s": {{"known_keys": {{"o2": "{k2}"}}}}}},
  "queries": [
    {{"subject": "s", "object": "o2", "mode": "mandatory"}},
    {{"subject": "s", "object": "o3", "mode": "mandatory"}},
    {{"subject": "s", "object": "o2", "mode": "discretionary"}}
  ]
}}"#
        ),
    );
    let o = rolegraph(&["access", p(&h), "--k0", K0, "--queries", p(&queries)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "s\to2\tmandatory\tgranted\ns\to3\tmandatory\tdenied\ns\to2\tdiscretionary\tdenied\n"
    );
}

#[test]
fn simulate_replays_and_detects_attacks() {
    let f = Fixture::new();
    let scenario = |adversary: &str, step2: bool| {
        format!(
            r#"{{
  "hierarchy": {{"objects": ["o1", "o2"], "arcs": [["o1", "o2"]]}},
  "k0": "{K0}",
  "parent": "o1",
  "child": "o2",
  "new_id": "o2-v2",
  "adversary": "{adversary}",
  "step2": {step2},
  "seed": 5
}}"#
        )
    };
    let honest = f.file("honest.json", &scenario("none", true));
    let o = rolegraph(&["simulate", "--scenario", p(&honest)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).ends_with("outcome\tkey_changed\n"), "{}", stdout(&o));
    assert_eq!(o.stdout, rolegraph(&["simulate", "--scenario", p(&honest)]).stdout);

    let forged = f.file("forged.json", &scenario("forge_substitute_parent", false));
    let o = rolegraph(&["simulate", "--scenario", p(&forged)]);
    assert!(stdout(&o).ends_with("outcome\tcompromised\n"), "{}", stdout(&o));
    let caught = f.file("caught.json", &scenario("intercept_substitute_child", true));
    let o = rolegraph(&["simulate", "--scenario", p(&caught)]);
    assert!(stdout(&o).ends_with("outcome\taborted_auth_failure\n"), "{}", stdout(&o));
}

#[test]
fn combine_answers_dominance() {
    let f = Fixture::new();
    let policy = f.file("p.json", TWO_LEAF);
    let mac = f.file("mac.json", r#"{"levels": ["low", "high"], "categories": ["x"]}"#);
    let queries = f.file(
        "q.json",
        r#"[
  {"a": {"level": "high", "categories": ["x"], "role": "root"}, "b": {"level": "low", "role": "r1"}},
  {"a": {"level": "high", "role": "r1"}, "b": {"level": "low", "role": "r2"}},
  {"a": {"level": "low", "role": "root"}, "b": {"level": "low", "categories": ["x"], "role": "r1"}}
]"#,
    );
    let o = rolegraph(&["combine", p(&policy), "--mac", p(&mac), "--queries", p(&queries)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "0\tdominates\n1\tdoes-not-dominate\n2\tdoes-not-dominate\n");

    let bad = f.file("bad.json", r#"[{"a": {"level": "secret", "role": "r1"}, "b": {"level": "low", "role": "r1"}}]"#);
    let o = rolegraph(&["combine", p(&policy), "--mac", p(&mac), "--queries", p(&bad)]);
    assert_eq!(o.status.code(), Some(4));
}
