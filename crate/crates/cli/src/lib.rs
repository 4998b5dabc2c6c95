//! Command implementations shared by the `adversynth` and `slinfer` binaries.
//!
//! Each command returns an [`Output`]: the text for stdout and an exit code
//! (0 for a positive answer, 1 for a negative one). Errors are reported by
//! the binaries as a single line with exit code 2. Output files are written
//! to a temporary file and renamed into place, so a failed command leaves
//! nothing behind.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use adversynth::adaptive::{run_replications, write_csv, AdversaryKind, AgentKind, GameTrace, RunConfig, TieBreak};
use adversynth::casestudy::{build_scenario, Regime};
use adversynth::game::{GameAutomaton, Turn};
use adversynth::inference::{is_strictly_local, sl_bound, LearnerState, PresentationItem, SlGrammar, PAUSE};
use adversynth::weaksim::{largest_weak_simulation, CompositeMode, SilentSplit};
use adversynth::{Alphabet, Fsa, Semiautomaton};
use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};

pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output { stdout, stderr: String::new(), code: 0 }
    }

    fn answer(stdout: String, positive: bool) -> Self {
        Output { stdout, stderr: String::new(), code: if positive { 0 } else { EXIT_NEGATIVE } }
    }
}

/// Prints an outcome and exits with its code.
pub fn finish(result: Result<Output>) -> ! {
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            eprint!("{}", out.stderr);
            let _ = std::io::stdout().flush();
            std::process::exit(out.code)
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            std::process::exit(EXIT_ERROR)
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a game file: winning initial states, ranks and strategy.
    Solve(SolveArgs),
    /// Repeated play of the case study with restarts.
    Play(PlayArgs),
    /// Emit the robot-and-doors case study.
    Casestudy(CasestudyArgs),
    /// Learn a strictly local grammar from a corpus.
    Learn(LearnArgs),
    /// Check a word against a grammar.
    Member(MemberArgs),
    /// Decide whether an automaton's language is strictly local.
    DecideSl(DecideSlArgs),
    /// Compute the largest weak simulation between two semiautomata.
    Weaksim(WeaksimArgs),
}

/// The grammar subcommands, as exposed by `slinfer`.
#[derive(Subcommand, Debug)]
pub enum SlCommand {
    /// Learn a strictly local grammar from a corpus.
    Learn(LearnArgs),
    /// Check a word against a grammar.
    Member(MemberArgs),
    /// Decide whether an automaton's language is strictly local.
    DecideSl(DecideSlArgs),
}

pub fn run(cmd: Command) -> Result<Output> {
    match cmd {
        Command::Solve(a) => cmd_solve(&a),
        Command::Play(a) => cmd_play(&a),
        Command::Casestudy(a) => cmd_casestudy(&a),
        Command::Learn(a) => cmd_learn(&a),
        Command::Member(a) => cmd_member(&a),
        Command::DecideSl(a) => cmd_decide_sl(&a),
        Command::Weaksim(a) => cmd_weaksim(&a),
    }
}

pub fn run_sl(cmd: SlCommand) -> Result<Output> {
    match cmd {
        SlCommand::Learn(a) => cmd_learn(&a),
        SlCommand::Member(a) => cmd_member(&a),
        SlCommand::DecideSl(a) => cmd_decide_sl(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Game file (JSON).
    #[arg(long)]
    pub game: PathBuf,
    /// Print the attractor-annotated graph in DOT instead of the report.
    #[arg(long)]
    pub dot: bool,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<Output> {
    let g = GameAutomaton::from_json(&read(&args.game)?)
        .with_context(|| format!("malformed game {}", args.game.display()))?;
    let attr = g.attractor();
    if args.dot {
        return Ok(Output::ok(g.to_dot(Some(&attr))));
    }
    Ok(Output::ok(solve_report(&g)))
}

/// Winning initial states, the rank of every reachable attractor state, and
/// the optimal moves at reachable agent states.
pub fn solve_report(g: &GameAutomaton) -> String {
    let attr = g.attractor();
    let mut out = String::new();
    let wins = g.winning_initials(&attr);
    let n0 = g.initial().len();
    if wins.is_empty() {
        out.push_str("no winning initial states\n");
    } else {
        let pct = 100.0 * wins.len() as f64 / n0.max(1) as f64;
        let _ = writeln!(out, "winning initial states: {} of {n0} ({pct:.1}%)", wins.len());
        for &q in &wins {
            let _ = writeln!(out, "  {} rank {}", g.state_name(q), attr.rank(q).expect("winning"));
        }
    }
    let reach = g.reachable();
    let mut ranked: Vec<(u32, String, usize)> = (0..g.num_states())
        .filter(|&q| reach[q])
        .filter_map(|q| attr.rank(q).map(|r| (r, g.state_name(q), q)))
        .collect();
    ranked.sort();
    let _ = writeln!(out, "ranks ({} reachable states in the attractor):", ranked.len());
    for (r, name, _) in &ranked {
        let _ = writeln!(out, "  {name} {r}");
    }
    let strategy = g.optimal_strategy(&attr);
    out.push_str("strategy:\n");
    for (_, name, q) in &ranked {
        if g.state(*q).turn != Turn::Agent {
            continue;
        }
        if let Some(moves) = strategy.moves(*q) {
            let names: Vec<&str> = moves.iter().map(|&s| g.sigma1().name(s)).collect();
            let _ = writeln!(out, "  {name} -> {}", names.join(" "));
        }
    }
    out
}

#[derive(Args, Debug)]
pub struct PlayArgs {
    #[arg(long, default_value = "opposite")]
    pub regime: Regime,
    /// learning, full_knowledge or no_learning.
    #[arg(long, default_value = "learning")]
    pub agent: AgentKind,
    /// optimal_delay (or optimal), uniform_random (or random), withholding.
    #[arg(long, default_value = "optimal_delay")]
    pub adversary: AdversaryKind,
    #[arg(long, default_value_t = 300)]
    pub games: u64,
    /// Seed for every random choice of the run.
    #[arg(long, env = "ADVERSYNTH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Stop once this many turns (both players) have been played.
    #[arg(long)]
    pub max_turns: Option<u64>,
    /// Per-game turn cap.
    #[arg(long, default_value_t = 1000)]
    pub max_game_turns: u64,
    #[arg(long, value_enum, default_value_t = TieBreakArg::First)]
    pub tie_break: TieBreakArg,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub replications: u64,
    /// Threads for replications.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file receiving every game trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TieBreakArg {
    First,
    Random,
}

pub fn cmd_play(args: &PlayArgs) -> Result<Output> {
    if args.replications == 0 {
        bail!("--replications must be at least 1");
    }
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let scenario = build_scenario(args.regime)?;
    let config = RunConfig {
        agent: args.agent,
        adversary: args.adversary,
        games: args.games,
        seed: args.seed,
        max_total_turns: args.max_turns,
        max_game_turns: args.max_game_turns,
        tie_break: match args.tie_break {
            TieBreakArg::First => TieBreak::First,
            TieBreakArg::Random => TieBreak::Random,
        },
        record_traces: args.trace.is_some(),
    };
    let seeds: Vec<u64> = (0..args.replications).map(|i| args.seed.wrapping_add(i)).collect();
    let reports = run_replications(&scenario, &config, &seeds, args.jobs)?;

    let records: Vec<_> = reports.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let mut csv = Vec::new();
    write_csv(&records, &mut csv)?;
    let mut summary = String::new();
    for r in &reports {
        let converged = r.converged.map_or("never".to_string(), |c| format!("turn {} (game {})", c.turn, c.game_id));
        let _ = writeln!(
            summary,
            "seed {}: {} agent vs {} adversary, {} games, {} wins ({:.1}%), {} turns, discovery {:.3}, converged {converged}",
            r.seed,
            args.agent,
            args.adversary,
            r.games(),
            r.wins(),
            100.0 * r.wins() as f64 / r.games().max(1) as f64,
            r.total_turns(),
            r.final_discovery_ratio(),
        );
    }
    if let Some(path) = &args.trace {
        let traces: Vec<&GameTrace> = reports.iter().flat_map(|r| &r.traces).collect();
        write_atomic(path, serde_json::to_string_pretty(&traces)?.as_bytes())?;
    }
    let stdout = match &args.out {
        Some(path) => {
            write_atomic(path, &csv)?;
            String::new()
        }
        None => String::from_utf8(csv)?,
    };
    Ok(Output { stdout, stderr: summary, code: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    #[value(name = "game.json")]
    GameJson,
    Dot,
    #[value(name = "winning-set")]
    WinningSet,
}

#[derive(Args, Debug)]
pub struct CasestudyArgs {
    #[arg(long, default_value = "opposite")]
    pub regime: Regime,
    #[arg(long, value_enum, default_value_t = Emit::WinningSet)]
    pub emit: Emit,
}

pub fn cmd_casestudy(args: &CasestudyArgs) -> Result<Output> {
    let sc = build_scenario(args.regime)?;
    let g = &sc.game;
    let attr = g.attractor();
    let text = match args.emit {
        Emit::GameJson => g.to_json() + "\n",
        Emit::Dot => g.to_dot(Some(&attr)),
        Emit::WinningSet => {
            let wins = g.winning_initials(&attr);
            if wins.is_empty() {
                "no winning initial states\n".to_string()
            } else {
                wins.iter().map(|&q| g.state_name(q) + "\n").collect()
            }
        }
    };
    Ok(Output::ok(text))
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    #[arg(long)]
    pub k: usize,
    /// Comma-separated symbols; inferred from the corpus when absent.
    #[arg(long, value_delimiter = ',')]
    pub alphabet: Option<Vec<String>>,
    /// Grammar output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One word per line. `λ` is the empty word, `#` a pause, and blank
    /// lines are skipped. Symbols are single characters unless separated by
    /// spaces or commas.
    pub corpus: PathBuf,
}

fn split_tokens(line: &str) -> Vec<String> {
    if line.contains(|c: char| c.is_whitespace() || c == ',') {
        line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(String::from).collect()
    } else {
        line.chars().map(String::from).collect()
    }
}

/// Reads a corpus into presentation items, inferring the alphabet if needed.
pub fn parse_corpus(text: &str, alphabet: Option<&[String]>) -> Result<(Alphabet, Vec<PresentationItem>)> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let alphabet = match alphabet {
        Some(names) => Alphabet::new(names.iter().cloned())?,
        None => {
            let names: BTreeSet<String> =
                lines.iter().filter(|l| **l != PAUSE && **l != "λ").flat_map(|l| split_tokens(l)).collect();
            Alphabet::new(names)?
        }
    };
    let mut items = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if *line == PAUSE {
            items.push(PresentationItem::Pause);
            continue;
        }
        let word = alphabet.parse_word(line).with_context(|| format!("corpus line {}", i + 1))?;
        items.push(PresentationItem::Word(word));
    }
    Ok((alphabet, items))
}

pub fn cmd_learn(args: &LearnArgs) -> Result<Output> {
    let text = read(&args.corpus)?;
    let (alphabet, items) = parse_corpus(&text, args.alphabet.as_deref())?;
    let mut learner = LearnerState::new(alphabet, args.k)?;
    for item in &items {
        learner.absorb(item)?;
    }
    let json = learner.grammar.to_json() + "\n";
    match &args.out {
        Some(path) => {
            write_atomic(path, json.as_bytes())?;
            Ok(Output::ok(String::new()))
        }
        None => Ok(Output::ok(json)),
    }
}

#[derive(Args, Debug)]
pub struct MemberArgs {
    #[arg(long)]
    pub grammar: PathBuf,
    /// The word; `λ` or an empty string for the empty word.
    pub word: String,
}

pub fn cmd_member(args: &MemberArgs) -> Result<Output> {
    let g = SlGrammar::from_json(&read(&args.grammar)?)
        .with_context(|| format!("malformed grammar {}", args.grammar.display()))?;
    let w = g.alphabet().parse_word(&args.word)?;
    let yes = g.accepts(&w);
    Ok(Output::answer(if yes { "accepted\n" } else { "rejected\n" }.to_string(), yes))
}

#[derive(Args, Debug)]
pub struct DecideSlArgs {
    /// Finite-state automaton file (JSON).
    pub machine: PathBuf,
}

pub fn cmd_decide_sl(args: &DecideSlArgs) -> Result<Output> {
    let fsa = Fsa::from_json(&read(&args.machine)?)
        .with_context(|| format!("malformed automaton {}", args.machine.display()))?;
    Ok(match is_strictly_local(&fsa)? {
        Some(k) => Output::answer(format!("SL, k ≤ {} (least k = {k})\n", sl_bound(&fsa)), true),
        None => Output::answer("not SL\n".to_string(), false),
    })
}

#[derive(Args, Debug)]
pub struct WeaksimArgs {
    /// Simulated semiautomaton (JSON).
    #[arg(long)]
    pub left: PathBuf,
    /// Simulating semiautomaton (JSON).
    #[arg(long)]
    pub right: PathBuf,
    /// Comma-separated silent symbols.
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub silent: Vec<String>,
    /// Allow silent steps before and after the observable one.
    #[arg(long)]
    pub closure: bool,
}

fn load_sa(path: &Path) -> Result<Semiautomaton> {
    let doc = serde_json::from_str(&read(path)?).with_context(|| format!("malformed automaton {}", path.display()))?;
    Semiautomaton::from_doc(&doc).with_context(|| format!("invalid automaton {}", path.display()))
}

pub fn cmd_weaksim(args: &WeaksimArgs) -> Result<Output> {
    let a1 = load_sa(&args.left)?;
    let a2 = load_sa(&args.right)?;
    let split = SilentSplit::new(args.silent.iter().filter(|s| !s.is_empty()).cloned());
    let mode = if args.closure { CompositeMode::Closure } else { CompositeMode::SilentThenObservable };
    Ok(match largest_weak_simulation(&a1, &a2, &split, mode)? {
        Some(r) => {
            let text: String =
                r.pairs.iter().map(|&(p, q)| format!("({}, {})\n", a1.state_name(p), a2.state_name(q))).collect();
            Output::ok(text)
        }
        None => Output::answer("none\n".to_string(), false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_alphabet_inference() {
        let (a, items) = parse_corpus("aba\n#\n\nλ\naab\n", None).unwrap();
        assert_eq!(a.names(), ["a", "b"]);
        assert_eq!(items.len(), 4);
        assert_eq!(items[1], PresentationItem::Pause);
        assert_eq!(items[2], PresentationItem::Word(vec![]));
        let (a, _) = parse_corpus("ad ae\nae,ce\n", None).unwrap();
        assert_eq!(a.names(), ["ad", "ae", "ce"]);
    }

    #[test]
    fn corpus_with_unknown_symbol() {
        let given = vec!["a".to_string()];
        assert!(parse_corpus("ab\n", Some(&given)).is_err());
    }

    #[test]
    fn empty_corpus() {
        let (a, items) = parse_corpus("", None).unwrap();
        assert!(a.is_empty());
        assert!(items.is_empty());
    }

    #[test]
    fn opposite_report_lists_six() {
        let sc = build_scenario(Regime::Opposite).unwrap();
        let report = solve_report(&sc.game);
        assert!(report.starts_with("winning initial states: 6 of 24 (25.0%)\n"));
        assert!(report.contains("  (1,ad,1,1) rank 7\n"));
        assert!(report.contains("  (1,ad,1,1) -> 4\n"));
    }
}
