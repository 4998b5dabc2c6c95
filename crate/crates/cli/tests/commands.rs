use std::path::Path;
use std::process::{Command, Output};

use adversynth::automata::AutomatonDoc;
use adversynth::game::{GameAutomaton, GameParts, GameState, Turn};
use adversynth::inference::{grammar_to_fsa, SlGrammar};
use adversynth::Alphabet;
use tempfile::TempDir;

fn adversynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adversynth")).args(args).env_remove("ADVERSYNTH_SEED").output().unwrap()
}

fn slinfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slinfer")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn opposite_game(dir: &TempDir) -> String {
    let out = adversynth(&["casestudy", "--regime", "opposite", "--emit", "game.json"]);
    assert!(out.status.success());
    let path = dir.path().join("opposite.json");
    std::fs::write(&path, &out.stdout).unwrap();
    path_str(&path).to_string()
}

fn csv_wins(csv: &str) -> usize {
    csv.lines().skip(1).filter(|l| l.contains(",WIN,")).count()
}

#[test]
fn solve_opposite() {
    let dir = TempDir::new().unwrap();
    let game = opposite_game(&dir);
    let a = adversynth(&["solve", "--game", &game]);
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    assert!(text.starts_with("winning initial states: 6 of 24 (25.0%)\n"), "{text}");
    for s in ["(1,ad,1,1)", "(1,ce,1,1)", "(2,ad,1,2)", "(2,bf,1,2)", "(4,ce,1,4)", "(4,bf,1,4)"] {
        assert!(text.contains(&format!("  {s} rank 7\n")), "{s}");
    }
    let b = adversynth(&["solve", "--game", &game]);
    assert_eq!(a.stdout, b.stdout);
    let dot = adversynth(&["solve", "--game", &game, "--dot"]);
    assert!(stdout(&dot).starts_with("digraph game {"));
}

#[test]
fn solve_without_targets() {
    let parts = GameParts {
        sigma1: Alphabet::new(["go"]).unwrap(),
        sigma2: Alphabet::new(["stay"]).unwrap(),
        silent: None,
        agent_names: vec!["x".into(), "y".into()],
        adversary_names: vec!["z".into()],
        spec_names: Vec::new(),
        states: vec![
            GameState { q1: 0, q2: 0, turn: Turn::Agent, qs: None },
            GameState { q1: 1, q2: 0, turn: Turn::Adversary, qs: None },
        ],
        transitions: vec![
            (0, adversynth::game::Action::Agent(adversynth::Symbol::new(0)), 1),
            (1, adversynth::game::Action::Adversary(adversynth::Symbol::new(0)), 0),
        ],
        initial: vec![0],
        finals: Vec::new(),
    };
    let g = GameAutomaton::from_parts(parts).unwrap();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(&path, g.to_json()).unwrap();
    let out = adversynth(&["solve", "--game", path_str(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("no winning initial states\n"));
}

#[test]
fn malformed_game_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = adversynth(&["solve", "--game", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));
    assert!(out.stdout.is_empty());
}

#[test]
fn casestudy_winning_sets() {
    let out = adversynth(&["casestudy", "--regime", "opposite", "--emit", "winning-set"]);
    assert_eq!(stdout(&out).lines().count(), 6);
    for regime in ["adjacent", "general"] {
        let out = adversynth(&["casestudy", "--regime", regime, "--emit", "winning-set"]);
        assert_eq!(stdout(&out), "no winning initial states\n");
    }
    let bad = adversynth(&["casestudy", "--regime", "diagonal"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn play_is_reproducible() {
    let args = ["play", "--agent", "learning", "--adversary", "optimal", "--games", "40", "--seed", "7"];
    let a = adversynth(&args);
    let b = adversynth(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let csv = stdout(&a);
    assert!(csv.starts_with(
        "game_id,seed,initial_state,outcome,agent_turns,adversary_turns,cumulative_turns,discovery_ratio\n"
    ));
    assert_eq!(csv.lines().count(), 41);
    assert!(stderr(&a).starts_with("seed 7: learning agent vs optimal_delay adversary, 40 games"));
    let env = Command::new(env!("CARGO_BIN_EXE_adversynth"))
        .args(&args[..args.len() - 2])
        .env("ADVERSYNTH_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
}

#[test]
fn play_win_rates() {
    let full = adversynth(&["play", "--agent", "full_knowledge", "--games", "300", "--seed", "2"]);
    let wins = csv_wins(&stdout(&full));
    assert!((61..=89).contains(&wins), "full knowledge won {wins}");
    let none = adversynth(&["play", "--agent", "no_learning", "--games", "300", "--seed", "2"]);
    assert_eq!(csv_wins(&stdout(&none)), 0);
}

#[test]
fn play_outputs_and_jobs() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("runs.csv");
    let trace = dir.path().join("traces.json");
    let base = ["play", "--games", "10", "--seed", "3", "--replications", "4"];
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--out", path_str(&csv), "--trace", path_str(&trace), "--jobs", "3"]);
    let out = adversynth(&args);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(stderr(&out).lines().count(), 4);
    let serial = adversynth(&base);
    assert_eq!(std::fs::read(&csv).unwrap(), serial.stdout);
    let traces: serde_json::Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    assert_eq!(traces.as_array().unwrap().len(), 40);
    assert!(traces[0]["outcome"].is_string());
}

#[test]
fn failed_play_leaves_no_file() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("runs.csv");
    let out = adversynth(&["play", "--games", "5", "--jobs", "0", "--out", path_str(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!csv.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    let missing = dir.path().join("no/such/dir/runs.csv");
    let out = adversynth(&["play", "--games", "5", "--out", path_str(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn learn_and_member() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "aba\naaba\n#\naaaba\n").unwrap();
    let out = slinfer(&["learn", "--k", "3", path_str(&corpus)]);
    assert_eq!(out.status.code(), Some(0));
    let g = SlGrammar::from_json(&stdout(&out)).unwrap();
    let want = SlGrammar::from_strs(g.alphabet().clone(), 3, ["<aa", "<ab", "aab", "aaa", "aba", "ba>"]).unwrap();
    assert_eq!(g, want);

    let gpath = dir.path().join("g.json");
    std::fs::write(&gpath, stdout(&out)).unwrap();
    let yes = slinfer(&["member", "--grammar", path_str(&gpath), "aaba"]);
    assert_eq!((yes.status.code(), stdout(&yes).as_str()), (Some(0), "accepted\n"));
    let no = slinfer(&["member", "--grammar", path_str(&gpath), "aababa"]);
    assert_eq!((no.status.code(), stdout(&no).as_str()), (Some(1), "rejected\n"));
    let bad = slinfer(&["member", "--grammar", path_str(&gpath), "abc"]);
    assert_eq!(bad.status.code(), Some(2));
    let same = adversynth(&["member", "--grammar", path_str(&gpath), "aaba"]);
    assert_eq!(same.stdout, yes.stdout);
}

#[test]
fn learn_empty_corpus() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("empty.txt");
    std::fs::write(&corpus, "").unwrap();
    let out = slinfer(&["learn", "--k", "2", path_str(&corpus)]);
    assert_eq!(out.status.code(), Some(0));
    let g = SlGrammar::from_json(&stdout(&out)).unwrap();
    assert!(g.factors().is_empty());
    let zero = slinfer(&["learn", "--k", "0", path_str(&corpus)]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn decide_sl() {
    let dir = TempDir::new().unwrap();
    let ab = Alphabet::new(["a", "b"]).unwrap();
    let g = SlGrammar::from_strs(ab.clone(), 3, ["<aa", "<ab", "aab", "aaa", "aba", "ba>"]).unwrap();
    let machine = dir.path().join("sl3.json");
    std::fs::write(&machine, grammar_to_fsa(&g).to_json()).unwrap();
    let out = slinfer(&["decide-sl", path_str(&machine)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("SL, k ≤ 4"), "{}", stdout(&out));

    let even = r#"{"alphabet":["a","b"],"states":["e","o"],"initial":["e"],"final":["e"],
        "transitions":[{"from":"e","label":"a","to":"o"},{"from":"o","label":"a","to":"e"},
                       {"from":"e","label":"b","to":"e"},{"from":"o","label":"b","to":"o"}]}"#;
    let path = dir.path().join("even.json");
    std::fs::write(&path, even).unwrap();
    let out = adversynth(&["decide-sl", path_str(&path)]);
    assert_eq!((out.status.code(), stdout(&out).as_str()), (Some(1), "not SL\n"));
}

#[test]
fn weaksim_cases() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, doc: &AutomatonDoc| {
        let p = dir.path().join(name);
        std::fs::write(&p, serde_json::to_string(doc).unwrap()).unwrap();
        p
    };
    let doc = |edges: &[(&str, &str, &str)]| -> AutomatonDoc {
        serde_json::from_value(serde_json::json!({
            "alphabet": ["a", "b", "tau"],
            "states": ["0", "1", "2"],
            "transitions": edges.iter().map(|(f, l, t)| serde_json::json!({"from": f, "label": l, "to": t})).collect::<Vec<_>>(),
        }))
        .unwrap()
    };
    let left = write("left.json", &doc(&[("0", "tau", "1"), ("1", "a", "2")]));
    let right = write("right.json", &doc(&[("0", "a", "2"), ("0", "tau", "1"), ("1", "a", "2")]));
    let other = write("other.json", &doc(&[("0", "b", "1")]));

    let id = adversynth(&["weaksim", "--left", path_str(&left), "--right", path_str(&left), "--silent", "tau"]);
    assert_eq!(id.status.code(), Some(0));
    assert!(stdout(&id).contains("(0, 0)\n"));
    let sim = adversynth(&["weaksim", "--left", path_str(&left), "--right", path_str(&right), "--silent", "tau"]);
    assert_eq!(sim.status.code(), Some(0));
    let none = adversynth(&["weaksim", "--left", path_str(&left), "--right", path_str(&other), "--silent", "tau"]);
    assert_eq!((none.status.code(), stdout(&none).as_str()), (Some(1), "none\n"));
    let closure = adversynth(&[
        "weaksim",
        "--left",
        path_str(&left),
        "--right",
        path_str(&right),
        "--silent",
        "tau",
        "--closure",
    ]);
    assert_eq!(closure.status.code(), Some(0));
}
