//! Repeated play against a rule-governed adversary, learning its rules
//! between and during games.
//!
//! The agent plans on a hypothesis game: the scenario's scaffold game with
//! the agent's own switching function. The world runs the same scaffold
//! under the true switching function, so hypothesis and world share state
//! indices. All randomness comes from one seed; game `i` draws from stream
//! `i` of a ChaCha8 generator seeded with it.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::automata::{Semiautomaton, StateId, Symbol};
use crate::casestudy::Scenario;
use crate::game::{Action, Attractor, GameAutomaton, Strategy, SwitchingFunction, Turn};
use crate::inference::{InferenceError, LearnerState, PresentationBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    /// Starts believing the adversary only passes and learns from observation.
    Learning,
    /// Knows the true adversary from the start.
    FullKnowledge,
    /// Keeps the initial belief and never sees the adversary's moves.
    NoLearning,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Learning => "learning",
            AgentKind::FullKnowledge => "full_knowledge",
            AgentKind::NoLearning => "no_learning",
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "learning" => Ok(AgentKind::Learning),
            "full_knowledge" | "full" => Ok(AgentKind::FullKnowledge),
            "no_learning" | "none" => Ok(AgentKind::NoLearning),
            other => Err(format!("unknown agent kind '{other}'")),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdversaryKind {
    /// Keeps the agent trapped when possible, otherwise maximizes the rank
    /// of the next state. Ties are broken at random.
    OptimalDelay,
    UniformRandom,
    /// Like `OptimalDelay`, restricted to moves the agent has already seen
    /// (passing is always allowed).
    Withholding,
}

impl AdversaryKind {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::OptimalDelay => "optimal_delay",
            AdversaryKind::UniformRandom => "uniform_random",
            AdversaryKind::Withholding => "withholding",
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "optimal_delay" | "optimal" => Ok(AdversaryKind::OptimalDelay),
            "uniform_random" | "random" => Ok(AdversaryKind::UniformRandom),
            "withholding" => Ok(AdversaryKind::Withholding),
            other => Err(format!("unknown adversary kind '{other}'")),
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the agent picks among equally good moves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Smallest symbol first.
    #[default]
    First,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Win,
    Resign,
    TurnLimit,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Win => "WIN",
            Outcome::Resign => "RESIGN",
            Outcome::TurnLimit => "TURN_LIMIT",
        })
    }
}

/// The agent's decision at its turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Move(Symbol),
    Resign,
}

/// An agent: its hypothesis game, cached solution, and (when learning) the
/// grammar learner.
#[derive(Clone, Debug)]
pub struct Agent {
    kind: AgentKind,
    hypothesis: GameAutomaton,
    attractor: Attractor,
    strategy: Strategy,
    stale: bool,
    learner: Option<LearnerState>,
    buffer: Option<PresentationBuffer>,
    adversary_model: Semiautomaton,
    observations: Vec<(StateId, Symbol)>,
}

impl Agent {
    pub fn new(kind: AgentKind, scenario: &Scenario) -> Self {
        let hypothesis = match kind {
            AgentKind::FullKnowledge => scenario.true_scaffold(),
            AgentKind::Learning | AgentKind::NoLearning => scenario.scaffold.clone(),
        };
        let learner = (kind == AgentKind::Learning).then(|| {
            let pairs = crate::automata::Alphabet::new(
                scenario
                    .scaffold
                    .sigma2()
                    .symbols()
                    .filter(|&s| Some(s) != scenario.scaffold.silent())
                    .map(|s| scenario.scaffold.sigma2().name(s).to_string()),
            )
            .expect("distinct");
            LearnerState::new(pairs, scenario.k).expect("valid learner")
        });
        let attractor = hypothesis.attractor();
        let strategy = hypothesis.optimal_strategy(&attractor);
        Agent {
            kind,
            hypothesis,
            attractor,
            strategy,
            stale: false,
            learner,
            buffer: None,
            adversary_model: scenario.scaffold_adversary.clone(),
            observations: Vec::new(),
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn hypothesis(&self) -> &GameAutomaton {
        &self.hypothesis
    }

    pub fn sw(&self) -> &SwitchingFunction {
        self.hypothesis.sw()
    }

    pub fn learner(&self) -> Option<&LearnerState> {
        self.learner.as_ref()
    }

    /// Every (adversary state, symbol) pair the agent has switched on.
    pub fn observations(&self) -> &[(StateId, Symbol)] {
        &self.observations
    }

    pub fn attractor(&mut self) -> &Attractor {
        self.refresh();
        &self.attractor
    }

    fn refresh(&mut self) {
        if self.stale {
            self.attractor = self.hypothesis.attractor();
            self.strategy = self.hypothesis.optimal_strategy(&self.attractor);
            self.stale = false;
        }
    }

    /// Starts a new presentation. A learning agent treats the initial
    /// adversary configuration as observed, reached from the empty word.
    pub fn begin_game(&mut self, q0: StateId) -> Result<(), InferenceError> {
        let Some(learner) = &self.learner else {
            return Ok(());
        };
        self.buffer = Some(PresentationBuffer::new(learner.grammar.k()));
        let name = &self.hypothesis.adversary_names()[self.hypothesis.state(q0).q2];
        let Some(mut q) = self.adversary_model.state("λ") else {
            return Ok(());
        };
        let word = self.adversary_model.alphabet().parse_word(name)?;
        for s in word {
            self.observe(q, s)?;
            q = self.adversary_model.next(q, s).expect("scaffold is complete");
        }
        Ok(())
    }

    /// Records that the adversary played `sym` from `q2`. Returns whether
    /// the hypothesis changed. Only a learning agent reacts.
    pub fn observe(&mut self, q2: StateId, sym: Symbol) -> Result<bool, InferenceError> {
        if self.kind != AgentKind::Learning || Some(sym) == self.hypothesis.silent() {
            return Ok(false);
        }
        let learner = self.learner.as_mut().expect("learning agent");
        let buffer = self.buffer.get_or_insert_with(|| PresentationBuffer::new(learner.grammar.k()));
        if let Some(f) = buffer.pending_left() {
            learner.absorb_factor(f)?;
        }
        if let Some(f) = buffer.push(sym) {
            learner.absorb_factor(f)?;
        }
        let changed = self.hypothesis.sw_update(q2, sym);
        if changed {
            self.observations.push((q2, sym));
            self.stale = true;
        }
        Ok(changed)
    }

    /// Chooses a move at agent state `q` of the hypothesis, or resigns when
    /// the hypothesis offers no winning move.
    pub fn decide<R: Rng + ?Sized>(&mut self, q: StateId, tie: TieBreak, rng: &mut R) -> Decision {
        self.refresh();
        if self.hypothesis.state(q).turn != Turn::Agent {
            return Decision::Resign;
        }
        let choice = match tie {
            TieBreak::First => self.strategy.choose(q),
            TieBreak::Random => self.strategy.choose_random(q, rng),
        };
        choice.map_or(Decision::Resign, Decision::Move)
    }
}

/// Picks the adversary's move at turn-𝟎 state `q` of `world`.
pub fn adversary_move<R: Rng + ?Sized>(
    kind: AdversaryKind,
    world: &GameAutomaton,
    world_attr: &Attractor,
    agent_sw: &SwitchingFunction,
    q: StateId,
    rng: &mut R,
) -> Option<Action> {
    let q2 = world.state(q).q2;
    let mut options: Vec<(Action, StateId)> = world.successors(q).collect();
    if kind == AdversaryKind::Withholding {
        options.retain(|(a, _)| agent_sw.get(q2, a.symbol()));
    }
    if options.is_empty() {
        return None;
    }
    let pool: Vec<(Action, StateId)> = match kind {
        AdversaryKind::UniformRandom => options,
        AdversaryKind::OptimalDelay | AdversaryKind::Withholding => {
            let escape: Vec<_> = options.iter().copied().filter(|&(_, t)| !world_attr.contains(t)).collect();
            if !escape.is_empty() {
                escape
            } else {
                let best = options.iter().filter_map(|&(_, t)| world_attr.rank(t)).max();
                options.into_iter().filter(|&(_, t)| world_attr.rank(t) == best).collect()
            }
        }
    };
    Some(pool[rng.gen_range(0..pool.len())].0)
}

/// The adversary's part of a play, with or without passes.
pub fn project_adversary(play: &[Action], silent: Option<Symbol>, keep_silent: bool) -> Vec<Symbol> {
    play.iter()
        .filter_map(|a| match a {
            Action::Adversary(s) if keep_silent || Some(*s) != silent => Some(*s),
            _ => None,
        })
        .collect()
}

/// One move in a recorded game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Round {
    pub mover: &'static str,
    pub symbol: String,
    pub state: String,
    pub learned: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameTrace {
    pub game_id: u64,
    pub initial_state: String,
    pub rounds: Vec<Round>,
    pub outcome: Outcome,
}

/// Per-game metrics; one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameRecord {
    pub game_id: u64,
    pub seed: u64,
    pub initial_state: String,
    pub outcome: Outcome,
    pub agent_turns: u64,
    pub adversary_turns: u64,
    pub cumulative_turns: u64,
    pub discovery_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub adversary: AdversaryKind,
    pub games: u64,
    pub seed: u64,
    /// Stop once this many turns (both players, passes included) are played.
    pub max_total_turns: Option<u64>,
    /// Per-game safety cap.
    pub max_game_turns: u64,
    pub tie_break: TieBreak,
    pub record_traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agent: AgentKind::Learning,
            adversary: AdversaryKind::OptimalDelay,
            games: 300,
            seed: 0,
            max_total_turns: None,
            max_game_turns: 1000,
            tie_break: TieBreak::First,
            record_traces: false,
        }
    }
}

/// When the agent first knew every true adversary transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Convergence {
    pub turn: u64,
    pub game_id: u64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub seed: u64,
    pub records: Vec<GameRecord>,
    pub traces: Vec<GameTrace>,
    pub converged: Option<Convergence>,
    pub agent: Agent,
}

impl RunReport {
    pub fn wins(&self) -> usize {
        self.records.iter().filter(|r| r.outcome == Outcome::Win).count()
    }

    pub fn games(&self) -> usize {
        self.records.len()
    }

    pub fn total_turns(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cumulative_turns)
    }

    pub fn final_discovery_ratio(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.discovery_ratio)
    }
}

/// The true world: scaffold game, true switching function, and its solution.
pub struct World<'a> {
    pub scenario: &'a Scenario,
    pub game: GameAutomaton,
    pub attractor: Attractor,
    legit: Vec<bool>,
    true_count: usize,
}

impl<'a> World<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let game = scenario.true_scaffold();
        let attractor = game.attractor();
        let legit = game.adversary_names().iter().map(|n| n != "λ").collect();
        World { scenario, game, attractor, legit, true_count: scenario.true_transition_count() }
    }

    /// Fraction of true adversary transitions between legitimate
    /// configurations that `sw` has switched on.
    pub fn discovery_ratio(&self, sw: &SwitchingFunction) -> f64 {
        if self.true_count == 0 {
            return 1.0;
        }
        let silent = self.game.silent();
        let mut found = 0;
        for q2 in 0..self.legit.len() {
            if !self.legit[q2] {
                continue;
            }
            for s in self.game.sigma2().symbols() {
                if Some(s) != silent && self.scenario.true_sw.get(q2, s) && sw.get(q2, s) {
                    found += 1;
                }
            }
        }
        found as f64 / self.true_count as f64
    }

    /// Plays one game from `q0`. `turns` is the cumulative turn counter,
    /// advanced in place; `budget` is the cumulative cap, if any.
    #[allow(clippy::too_many_arguments)]
    pub fn play<R: Rng + ?Sized>(
        &self,
        agent: &mut Agent,
        adversary: AdversaryKind,
        q0: StateId,
        game_id: u64,
        limits: (u64, Option<u64>),
        tie: TieBreak,
        turns: &mut u64,
        rng: &mut R,
        mut on_turn: impl FnMut(&Agent, u64),
    ) -> Result<(GameTrace, u64, u64), InferenceError> {
        let (max_game, budget) = limits;
        let g = &self.game;
        agent.begin_game(q0)?;
        on_turn(agent, *turns);
        let blind = agent.kind() == AgentKind::NoLearning;
        let mut q = q0;
        let mut belief = q0;
        let mut rounds = Vec::new();
        let (mut n1, mut n2) = (0u64, 0u64);
        let out_of_turns = |n: u64, t: u64| n >= max_game || budget.is_some_and(|b| t >= b);
        let outcome = loop {
            if out_of_turns(n1 + n2, *turns) {
                break Outcome::TurnLimit;
            }
            let plan_at = if blind { belief } else { q };
            let sym = match agent.decide(plan_at, tie, rng) {
                Decision::Resign => break Outcome::Resign,
                Decision::Move(s) => s,
            };
            let Some(next) = g.next(q, Action::Agent(sym)) else {
                break Outcome::Resign;
            };
            q = next;
            if blind {
                belief = agent.hypothesis().next(belief, Action::Agent(sym)).unwrap_or(q);
            }
            n1 += 1;
            *turns += 1;
            rounds.push(Round {
                mover: "agent",
                symbol: g.sigma1().name(sym).to_string(),
                state: g.state_name(q),
                learned: false,
            });
            on_turn(agent, *turns);
            if g.is_final(q) {
                break Outcome::Win;
            }
            if out_of_turns(n1 + n2, *turns) {
                break Outcome::TurnLimit;
            }
            let Some(a) = adversary_move(adversary, g, &self.attractor, agent.sw(), q, rng) else {
                // a stuck adversary loses
                break Outcome::Win;
            };
            let q2 = g.state(q).q2;
            q = g.next(q, a).expect("chosen among enabled moves");
            if blind {
                let pass = g.silent().map(Action::Adversary);
                belief = pass.and_then(|p| agent.hypothesis().next(belief, p)).unwrap_or(belief);
            }
            let learned = agent.observe(q2, a.symbol())?;
            n2 += 1;
            *turns += 1;
            rounds.push(Round {
                mover: "adversary",
                symbol: g.sigma2().name(a.symbol()).to_string(),
                state: g.state_name(q),
                learned,
            });
            on_turn(agent, *turns);
        };
        let trace = GameTrace { game_id, initial_state: g.state_name(q0), rounds, outcome };
        Ok((trace, n1, n2))
    }
}

/// The generator for game `game_id` of a run seeded with `seed`.
pub fn game_rng(seed: u64, game_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(game_id);
    rng
}

/// Plays up to `config.games` games with knowledge carried across restarts.
pub fn run_repeated(scenario: &Scenario, config: &RunConfig) -> Result<RunReport, InferenceError> {
    let world = World::new(scenario);
    let mut agent = Agent::new(config.agent, scenario);
    let initials = world.game.initial().to_vec();
    let mut turns = 0u64;
    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut converged: Option<Convergence> = None;
    for game_id in 0..config.games {
        if config.max_total_turns.is_some_and(|b| turns >= b) {
            break;
        }
        let mut rng = game_rng(config.seed, game_id);
        let q0 = initials[rng.gen_range(0..initials.len())];
        let (trace, n1, n2) = world.play(
            &mut agent,
            config.adversary,
            q0,
            game_id,
            (config.max_game_turns, config.max_total_turns),
            config.tie_break,
            &mut turns,
            &mut rng,
            |a, t| {
                if converged.is_none() && world.discovery_ratio(a.sw()) >= 1.0 {
                    converged = Some(Convergence { turn: t, game_id });
                }
            },
        )?;
        records.push(GameRecord {
            game_id,
            seed: config.seed,
            initial_state: trace.initial_state.clone(),
            outcome: trace.outcome,
            agent_turns: n1,
            adversary_turns: n2,
            cumulative_turns: turns,
            discovery_ratio: world.discovery_ratio(agent.sw()),
        });
        if config.record_traces {
            traces.push(trace);
        }
    }
    Ok(RunReport { seed: config.seed, records, traces, converged, agent })
}

/// Runs one replication per seed on up to `jobs` threads. Reports come back
/// in seed order regardless of scheduling.
pub fn run_replications(
    scenario: &Scenario,
    config: &RunConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<RunReport>, InferenceError> {
    let jobs = jobs.clamp(1, seeds.len().max(1));
    if jobs == 1 {
        return seeds.iter().map(|&seed| run_repeated(scenario, &RunConfig { seed, ..config.clone() })).collect();
    }
    let chunk = seeds.len().div_ceil(jobs);
    let results: Vec<Result<Vec<RunReport>, InferenceError>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&seed| run_repeated(scenario, &RunConfig { seed, ..config.clone() }))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("replication thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Writes per-game records as CSV with a header row.
pub fn write_csv<W: io::Write>(records: &[GameRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
