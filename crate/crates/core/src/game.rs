//! Turn-based two-player reachability games.
//!
//! The agent (player 1) and the adversary (player 2) alternate moves on the
//! turn-based product of their semiautomata, constrained by interaction
//! functions. Composing the product with a specification FSA gives a
//! [`GameAutomaton`]; the agent wins by reaching a final state.
//!
//! Adversary transitions are masked by a [`SwitchingFunction`], which lets a
//! game built over an over-approximate adversary model be repaired in place
//! as transitions are observed.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automata::{Alphabet, AutomatonError, Fsa, Semiautomaton, StateId, Symbol};

/// Name of the silent "pass" action.
pub const SILENT: &str = "ε";

const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("player alphabets overlap on '{0}'")]
    OverlappingAlphabets(String),
    #[error("silent action '{0}' must self-loop at every state")]
    BadSilent(String),
    #[error("the silent action cannot be forbidden")]
    ForbiddenSilent,
    #[error("no specification initial state linked to {0}")]
    MissingLink(String),
    #[error("specification alphabet lacks '{0}'")]
    SpecAlphabet(String),
    #[error("state not in game: {0}")]
    UnknownState(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("malformed game document: {0}")]
    Json(String),
}

/// Whose move it is: `Agent` is 𝟏, `Adversary` is 𝟎.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Turn {
    Adversary,
    Agent,
}

impl Turn {
    pub fn flip(self) -> Turn {
        match self {
            Turn::Agent => Turn::Adversary,
            Turn::Adversary => Turn::Agent,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Turn::Agent => 1,
            Turn::Adversary => 0,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Turn> {
        match bit {
            1 => Some(Turn::Agent),
            0 => Some(Turn::Adversary),
            _ => None,
        }
    }
}

/// A move of either player; the symbol indexes that player's alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Agent(Symbol),
    Adversary(Symbol),
}

impl Action {
    pub fn mover(self) -> Turn {
        match self {
            Action::Agent(_) => Turn::Agent,
            Action::Adversary(_) => Turn::Adversary,
        }
    }

    pub fn symbol(self) -> Symbol {
        match self {
            Action::Agent(s) | Action::Adversary(s) => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GameState {
    pub q1: StateId,
    pub q2: StateId,
    pub turn: Turn,
    /// Specification state; `None` in the bare product.
    pub qs: Option<StateId>,
}

/// A player: its semiautomaton, legitimate initial states, and optional
/// silent action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayerSpec {
    pub sa: Semiautomaton,
    pub initial: BTreeSet<StateId>,
    pub silent: Option<Symbol>,
}

impl PlayerSpec {
    pub fn new(
        sa: Semiautomaton,
        initial: impl IntoIterator<Item = StateId>,
        silent: Option<&str>,
    ) -> Result<Self, GameError> {
        let initial: BTreeSet<StateId> = initial.into_iter().collect();
        if let Some(&q) = initial.iter().find(|&&q| q >= sa.num_states()) {
            return Err(GameError::UnknownState(format!("#{q}")));
        }
        let silent = match silent {
            None => None,
            Some(name) => {
                let s = sa.alphabet().lookup(name)?;
                if sa.states().any(|q| sa.next(q, s) != Some(q)) {
                    return Err(GameError::BadSilent(name.to_string()));
                }
                Some(s)
            }
        };
        Ok(PlayerSpec { sa, initial, silent })
    }
}

/// U_i: for (own state, other player's state), the other player's symbols
/// forbidden there.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionFunction {
    forbidden: BTreeMap<(StateId, StateId), BTreeSet<Symbol>>,
}

impl InteractionFunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forbid(&mut self, own: StateId, other: StateId, sym: Symbol) {
        self.forbidden.entry((own, other)).or_default().insert(sym);
    }

    pub fn is_forbidden(&self, own: StateId, other: StateId, sym: Symbol) -> bool {
        self.forbidden.get(&(own, other)).is_some_and(|s| s.contains(&sym))
    }

    pub fn forbidden(&self, own: StateId, other: StateId) -> impl Iterator<Item = Symbol> + '_ {
        self.forbidden.get(&(own, other)).into_iter().flatten().copied()
    }

    fn check(&self, other: &PlayerSpec) -> Result<(), GameError> {
        for syms in self.forbidden.values() {
            for &s in syms {
                if Some(s) == other.silent {
                    return Err(GameError::ForbiddenSilent);
                }
                if !other.sa.alphabet().contains(s) {
                    return Err(AutomatonError::UnknownSymbol(format!("#{}", s.index())).into());
                }
            }
        }
        Ok(())
    }
}

/// The turn-based product P of two players.
#[derive(Clone, Debug)]
pub struct Product {
    pub agent: PlayerSpec,
    pub adversary: PlayerSpec,
    /// Λ = Σ₁ followed by Σ₂.
    pub lambda: Alphabet,
    pub states: Vec<GameState>,
    pub sa: Semiautomaton,
    pub initial: Vec<StateId>,
}

impl Product {
    pub fn index(&self, q1: StateId, q2: StateId, turn: Turn) -> StateId {
        (q1 * self.adversary.sa.num_states() + q2) * 2 + turn.bit() as usize
    }

    /// The Λ symbol of an action.
    pub fn lambda_symbol(&self, a: Action) -> Symbol {
        match a {
            Action::Agent(s) => s,
            Action::Adversary(s) => Symbol::new(self.agent.sa.alphabet().len() + s.index()),
        }
    }

    pub fn action(&self, sym: Symbol) -> Action {
        let n1 = self.agent.sa.alphabet().len();
        if sym.index() < n1 {
            Action::Agent(sym)
        } else {
            Action::Adversary(Symbol::new(sym.index() - n1))
        }
    }
}

/// Builds P over all of Q₁×Q₂×{𝟎,𝟏}. `u1` constrains the adversary (keyed
/// by agent state first), `u2` constrains the agent (keyed by adversary
/// state first).
pub fn turn_based_product(
    agent: &PlayerSpec,
    adversary: &PlayerSpec,
    u1: &InteractionFunction,
    u2: &InteractionFunction,
) -> Result<Product, GameError> {
    let s1 = agent.sa.alphabet();
    let s2 = adversary.sa.alphabet();
    if let Some(n) = s1.names().iter().find(|n| s2.symbol(n).is_some()) {
        return Err(GameError::OverlappingAlphabets(n.clone()));
    }
    u1.check(adversary)?;
    u2.check(agent)?;
    let lambda = Alphabet::new(s1.names().iter().chain(s2.names()).cloned())?;
    let (n1, n2) = (agent.sa.num_states(), adversary.sa.num_states());
    let mut sa = Semiautomaton::new(lambda.clone());
    let mut states = Vec::with_capacity(n1 * n2 * 2);
    for q1 in 0..n1 {
        for q2 in 0..n2 {
            for turn in [Turn::Adversary, Turn::Agent] {
                sa.add_state(format!("({},{},{})", agent.sa.state_name(q1), adversary.sa.state_name(q2), turn.bit()))?;
                states.push(GameState { q1, q2, turn, qs: None });
            }
        }
    }
    let mut product =
        Product { agent: agent.clone(), adversary: adversary.clone(), lambda, states, sa, initial: Vec::new() };
    for q1 in 0..n1 {
        for q2 in 0..n2 {
            let from = product.index(q1, q2, Turn::Agent);
            for (s, t1) in agent.sa.out(q1) {
                if !u2.is_forbidden(q2, q1, s) {
                    let to = product.index(t1, q2, Turn::Adversary);
                    let sym = product.lambda_symbol(Action::Agent(s));
                    product.sa.add_transition(from, sym, to)?;
                }
            }
            let from = product.index(q1, q2, Turn::Adversary);
            for (s, t2) in adversary.sa.out(q2) {
                if !u1.is_forbidden(q1, q2, s) {
                    let to = product.index(q1, t2, Turn::Agent);
                    let sym = product.lambda_symbol(Action::Adversary(s));
                    product.sa.add_transition(from, sym, to)?;
                }
            }
        }
    }
    product.initial = agent
        .initial
        .iter()
        .flat_map(|&q1| adversary.initial.iter().map(move |&q2| (q1, q2)))
        .map(|(q1, q2)| product.index(q1, q2, Turn::Agent))
        .collect();
    product.initial.sort_unstable();
    Ok(product)
}

/// sw: Q₂×Σ₂ → {0,1}. The silent action is always on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchingFunction {
    n_sym: usize,
    silent: Option<Symbol>,
    bits: Vec<bool>,
}

impl SwitchingFunction {
    pub fn all_on(n_states: usize, n_sym: usize, silent: Option<Symbol>) -> Self {
        SwitchingFunction { n_sym, silent, bits: vec![true; n_states * n_sym] }
    }

    pub fn all_off(n_states: usize, n_sym: usize, silent: Option<Symbol>) -> Self {
        SwitchingFunction { n_sym, silent, bits: vec![false; n_states * n_sym] }
    }

    pub fn get(&self, q2: StateId, sym: Symbol) -> bool {
        Some(sym) == self.silent || self.bits[q2 * self.n_sym + sym.index()]
    }

    /// Sets sw(q2, σ) = 1. Returns whether anything changed.
    pub fn enable(&mut self, q2: StateId, sym: Symbol) -> bool {
        if Some(sym) == self.silent {
            return false;
        }
        let slot = &mut self.bits[q2 * self.n_sym + sym.index()];
        let changed = !*slot;
        *slot = true;
        changed
    }

    /// Functional form of [`SwitchingFunction::enable`].
    pub fn updated(&self, q2: StateId, sym: Symbol) -> Self {
        let mut next = self.clone();
        next.enable(q2, sym);
        next
    }

    pub fn num_states(&self) -> usize {
        self.bits.len().checked_div(self.n_sym).unwrap_or(0)
    }

    /// Number of enabled non-silent pairs.
    pub fn count_on(&self) -> usize {
        (0..self.bits.len()).filter(|&i| self.bits[i] && Some(Symbol::new(i % self.n_sym)) != self.silent).count()
    }

    fn row_string(&self, q2: StateId) -> String {
        (0..self.n_sym).map(|s| if self.get(q2, Symbol::new(s)) { '1' } else { '0' }).collect()
    }
}

/// The game automaton 𝒢 = P × 𝒜_s with a switching-function mask.
///
/// All of Q_p × Q_s is materialized, including states unreachable under the
/// current mask, so enabling transitions never requires a rebuild.
#[derive(Clone, Debug)]
pub struct GameAutomaton {
    sigma1: Alphabet,
    sigma2: Alphabet,
    silent: Option<Symbol>,
    agent_names: Vec<String>,
    adversary_names: Vec<String>,
    spec_names: Vec<String>,
    states: Vec<GameState>,
    out_start: Vec<usize>,
    edges: Vec<(Action, StateId)>,
    edge_src: Vec<StateId>,
    in_start: Vec<usize>,
    in_edges: Vec<usize>,
    /// Per in-edge: source state and switching-function slot (`NO_SLOT`
    /// for moves the mask never blocks), laid out for sequential scans.
    in_pairs: Vec<(u32, u32)>,
    initial: Vec<StateId>,
    is_final: Vec<bool>,
    sw: SwitchingFunction,
}

/// Builds the game automaton. `link` picks the specification initial state
/// for each legitimate initial product state.
pub fn game_automaton(
    product: &Product,
    spec: &Fsa,
    link: impl Fn(&Product, StateId) -> Option<StateId>,
) -> Result<GameAutomaton, GameError> {
    let ns = spec.sa.num_states();
    // Λ symbol → spec symbol
    let mut to_spec = Vec::with_capacity(product.lambda.len());
    for name in product.lambda.names() {
        let s = spec.alphabet().symbol(name).ok_or_else(|| GameError::SpecAlphabet(name.clone()))?;
        to_spec.push(s);
    }
    let np = product.states.len();
    let mut states = Vec::with_capacity(np * ns);
    for p in &product.states {
        for qs in 0..ns {
            states.push(GameState { qs: Some(qs), ..*p });
        }
    }
    let mut transitions = Vec::new();
    for (p, sym, pt) in product.sa.transitions() {
        let action = product.action(sym);
        for qs in 0..ns {
            if let Some(ts) = spec.sa.next(qs, to_spec[sym.index()]) {
                transitions.push((p * ns + qs, action, pt * ns + ts));
            }
        }
    }
    let mut initial = Vec::new();
    for &p in &product.initial {
        let qs = link(product, p)
            .filter(|qs| spec.initial.contains(qs))
            .ok_or_else(|| GameError::MissingLink(product.sa.state_name(p).to_string()))?;
        initial.push(p * ns + qs);
    }
    let finals: Vec<StateId> = (0..states.len())
        .filter(|&q| {
            let g = &states[q];
            g.turn == Turn::Adversary && spec.finals.contains(&g.qs.expect("spec state"))
        })
        .collect();
    GameAutomaton::from_parts(GameParts {
        sigma1: product.agent.sa.alphabet().clone(),
        sigma2: product.adversary.sa.alphabet().clone(),
        silent: product.adversary.silent,
        agent_names: product.agent.sa.state_names().to_vec(),
        adversary_names: product.adversary.sa.state_names().to_vec(),
        spec_names: spec.sa.state_names().to_vec(),
        states,
        transitions,
        initial,
        finals,
    })
}

/// Raw ingredients of a [`GameAutomaton`].
#[derive(Clone, Debug)]
pub struct GameParts {
    pub sigma1: Alphabet,
    pub sigma2: Alphabet,
    pub silent: Option<Symbol>,
    pub agent_names: Vec<String>,
    pub adversary_names: Vec<String>,
    pub spec_names: Vec<String>,
    pub states: Vec<GameState>,
    pub transitions: Vec<(StateId, Action, StateId)>,
    pub initial: Vec<StateId>,
    pub finals: Vec<StateId>,
}

impl GameAutomaton {
    /// Assembles a game from explicit parts. Turn discipline is checked:
    /// agent actions leave turn-𝟏 states, adversary actions turn-𝟎 states,
    /// and every move flips the turn. The switching function starts all on.
    pub fn from_parts(parts: GameParts) -> Result<Self, GameError> {
        let n = parts.states.len();
        let bad = |what: String| Err(GameError::Json(what));
        if n >= u32::MAX as usize {
            return bad(format!("{n} states is too many"));
        }
        for g in &parts.states {
            if g.q1 >= parts.agent_names.len()
                || g.q2 >= parts.adversary_names.len()
                || g.qs.is_some_and(|s| s >= parts.spec_names.len())
            {
                return bad(format!("state {g:?} out of range"));
            }
        }
        let mut transitions = parts.transitions;
        transitions.sort_unstable();
        transitions.dedup();
        for w in transitions.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(AutomatonError::Nondeterministic {
                    state: format!("#{}", w[0].0),
                    symbol: format!("{:?}", w[0].1),
                }
                .into());
            }
        }
        for &(f, a, t) in &transitions {
            if f >= n || t >= n {
                return bad(format!("transition {f}->{t} out of range"));
            }
            let ok_sym = match a {
                Action::Agent(s) => parts.sigma1.contains(s),
                Action::Adversary(s) => parts.sigma2.contains(s),
            };
            if !ok_sym || parts.states[f].turn != a.mover() || parts.states[t].turn == a.mover() {
                return bad(format!("transition {f}->{t} breaks turn order"));
            }
        }
        if let Some(&q) = parts.initial.iter().chain(&parts.finals).find(|&&q| q >= n) {
            return Err(GameError::UnknownState(format!("#{q}")));
        }
        let mut out_start = vec![0usize; n + 1];
        for &(f, _, _) in &transitions {
            out_start[f + 1] += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
        }
        let edges: Vec<(Action, StateId)> = transitions.iter().map(|&(_, a, t)| (a, t)).collect();
        let edge_src: Vec<StateId> = transitions.iter().map(|&(f, _, _)| f).collect();
        let mut in_start = vec![0usize; n + 1];
        for &(_, _, t) in &transitions {
            in_start[t + 1] += 1;
        }
        for i in 0..n {
            in_start[i + 1] += in_start[i];
        }
        let mut fill = in_start.clone();
        let mut in_edges = vec![0usize; edges.len()];
        for (e, &(_, _, t)) in transitions.iter().enumerate() {
            in_edges[fill[t]] = e;
            fill[t] += 1;
        }
        let n_sym = parts.sigma2.len();
        let in_pairs = in_edges
            .iter()
            .map(|&e| {
                let (f, a, _) = transitions[e];
                let slot = match a {
                    Action::Adversary(s) if Some(s) != parts.silent => (parts.states[f].q2 * n_sym + s.index()) as u32,
                    _ => NO_SLOT,
                };
                (f as u32, slot)
            })
            .collect();
        let mut is_final = vec![false; n];
        for &q in &parts.finals {
            is_final[q] = true;
        }
        let mut initial = parts.initial;
        initial.sort_unstable();
        initial.dedup();
        let sw = SwitchingFunction::all_on(parts.adversary_names.len(), parts.sigma2.len(), parts.silent);
        Ok(GameAutomaton {
            sigma1: parts.sigma1,
            sigma2: parts.sigma2,
            silent: parts.silent,
            agent_names: parts.agent_names,
            adversary_names: parts.adversary_names,
            spec_names: parts.spec_names,
            states: parts.states,
            out_start,
            edges,
            edge_src,
            in_start,
            in_edges,
            in_pairs,
            initial,
            is_final,
            sw,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.len()
    }

    pub fn state(&self, q: StateId) -> GameState {
        self.states[q]
    }

    pub fn states(&self) -> &[GameState] {
        &self.states
    }

    pub fn sigma1(&self) -> &Alphabet {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &Alphabet {
        &self.sigma2
    }

    pub fn silent(&self) -> Option<Symbol> {
        self.silent
    }

    pub fn agent_names(&self) -> &[String] {
        &self.agent_names
    }

    pub fn adversary_names(&self) -> &[String] {
        &self.adversary_names
    }

    pub fn spec_names(&self) -> &[String] {
        &self.spec_names
    }

    pub fn initial(&self) -> &[StateId] {
        &self.initial
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.is_final[q]
    }

    pub fn finals(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).filter(|&q| self.is_final[q])
    }

    pub fn sw(&self) -> &SwitchingFunction {
        &self.sw
    }

    /// Replaces the switching function. Its shape must match the adversary.
    pub fn set_sw(&mut self, sw: SwitchingFunction) {
        assert_eq!(sw.bits.len(), self.adversary_names.len() * self.sigma2.len());
        self.sw = sw;
    }

    /// sw(q2, σ) := 1. Takes effect on every game state with adversary
    /// component `q2` at once. Returns whether anything changed.
    pub fn sw_update(&mut self, q2: StateId, sym: Symbol) -> bool {
        self.sw.enable(q2, sym)
    }

    fn edge_enabled(&self, e: usize) -> bool {
        match self.edges[e].0 {
            Action::Agent(_) => true,
            Action::Adversary(s) => self.sw.get(self.states[self.edge_src[e]].q2, s),
        }
    }

    /// Enabled moves at `q` under the current switching function, in action order.
    pub fn successors(&self, q: StateId) -> impl Iterator<Item = (Action, StateId)> + '_ {
        (self.out_start[q]..self.out_start[q + 1]).filter(|&e| self.edge_enabled(e)).map(|e| self.edges[e])
    }

    /// All moves at `q` ignoring the switching function.
    pub fn all_successors(&self, q: StateId) -> impl Iterator<Item = (Action, StateId)> + '_ {
        self.edges[self.out_start[q]..self.out_start[q + 1]].iter().copied()
    }

    pub fn next(&self, q: StateId, a: Action) -> Option<StateId> {
        self.successors(q).find(|(b, _)| *b == a).map(|(_, t)| t)
    }

    /// Enabled predecessors of `q` as (source, action).
    pub fn predecessors(&self, q: StateId) -> impl Iterator<Item = (StateId, Action)> + '_ {
        self.in_edges[self.in_start[q]..self.in_start[q + 1]]
            .iter()
            .filter(|&&e| self.edge_enabled(e))
            .map(|&e| (self.edge_src[e], self.edges[e].0))
    }

    pub fn find(&self, q1: &str, q2: &str, turn: Turn, qs: &str) -> Option<StateId> {
        let q1 = self.agent_names.iter().position(|n| n == q1)?;
        let q2 = self.adversary_names.iter().position(|n| n == q2)?;
        let qs = self.spec_names.iter().position(|n| n == qs)?;
        let target = GameState { q1, q2, turn, qs: Some(qs) };
        self.states.iter().position(|g| *g == target)
    }

    pub fn state_name(&self, q: StateId) -> String {
        let g = &self.states[q];
        match g.qs {
            Some(s) => format!(
                "({},{},{},{})",
                self.agent_names[g.q1],
                self.adversary_names[g.q2],
                g.turn.bit(),
                self.spec_names[s]
            ),
            None => format!("({},{},{})", self.agent_names[g.q1], self.adversary_names[g.q2], g.turn.bit()),
        }
    }

    pub fn action_name(&self, a: Action) -> &str {
        match a {
            Action::Agent(s) => self.sigma1.name(s),
            Action::Adversary(s) => self.sigma2.name(s),
        }
    }

    /// States reachable from Q₀ under the current switching function.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        let mut queue: VecDeque<StateId> = self.initial.iter().copied().collect();
        for &q in &self.initial {
            seen[q] = true;
        }
        while let Some(q) = queue.pop_front() {
            for (_, t) in self.successors(q) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    pub fn reachable_count(&self) -> usize {
        self.reachable().into_iter().filter(|&b| b).count()
    }

    /// Attr(F) with ranks, by backward counting over enabled transitions.
    /// An adversary state with no enabled move is won by the agent at rank 1.
    pub fn attractor(&self) -> Attractor {
        let n = self.states.len();
        let mut rank: Vec<Option<u32>> = vec![None; n];
        // moves still to be cut off before the state joins; agent states
        // join on their first edge into the attractor, and 0 marks members
        let mut counter = vec![1u32; n];
        let mut queue = VecDeque::new();
        for q in 0..n {
            if self.is_final[q] {
                rank[q] = Some(0);
                counter[q] = 0;
                queue.push_back(q);
            } else if self.states[q].turn == Turn::Adversary {
                counter[q] = self.successors(q).count() as u32;
            }
        }
        for q in 0..n {
            if rank[q].is_none() && counter[q] == 0 {
                rank[q] = Some(1);
                queue.push_back(q);
            }
        }
        let bits = &self.sw.bits;
        while let Some(q) = queue.pop_front() {
            let r = rank[q].expect("queued states are ranked") + 1;
            for &(p, slot) in &self.in_pairs[self.in_start[q]..self.in_start[q + 1]] {
                let p = p as usize;
                if counter[p] == 0 || (slot != NO_SLOT && !bits[slot as usize]) {
                    continue;
                }
                counter[p] -= 1;
                if counter[p] == 0 {
                    rank[p] = Some(r);
                    queue.push_back(p);
                }
            }
        }
        Attractor::from_ranks(rank)
    }

    pub fn winning_initials(&self, attr: &Attractor) -> Vec<StateId> {
        self.initial.iter().copied().filter(|&q| attr.contains(q)).collect()
    }

    /// WS₁*: at each agent state of rank i ≥ 1, the moves into rank i − 1.
    pub fn optimal_strategy(&self, attr: &Attractor) -> Strategy {
        let mut moves = BTreeMap::new();
        for q in 0..self.states.len() {
            if self.states[q].turn != Turn::Agent {
                continue;
            }
            let Some(r) = attr.rank(q) else { continue };
            let best: Vec<Symbol> =
                self.successors(q).filter(|&(_, t)| attr.rank(t) == Some(r - 1)).map(|(a, _)| a.symbol()).collect();
            debug_assert!(!best.is_empty());
            moves.insert(q, best);
        }
        Strategy { moves }
    }

    pub fn to_doc(&self) -> GameDoc {
        GameDoc {
            sigma1: self.sigma1.names().to_vec(),
            sigma2: self.sigma2.names().to_vec(),
            silent: self.silent.map(|s| self.sigma2.name(s).to_string()),
            agent_states: self.agent_names.clone(),
            adversary_states: self.adversary_names.clone(),
            spec_states: self.spec_names.clone(),
            states: self.states.iter().map(|g| StateDoc { q1: g.q1, q2: g.q2, turn: g.turn.bit(), qs: g.qs }).collect(),
            initial: self.initial.clone(),
            finals: self.finals().collect(),
            transitions: (0..self.edges.len())
                .map(|e| {
                    let (a, t) = self.edges[e];
                    TransitionDoc {
                        from: self.edge_src[e],
                        player: a.mover().bit(),
                        label: self.action_name(a).to_string(),
                        to: t,
                    }
                })
                .collect(),
            sw: (0..self.adversary_names.len())
                .map(|q| (self.adversary_names[q].clone(), self.sw.row_string(q)))
                .collect(),
        }
    }

    pub fn from_doc(doc: &GameDoc) -> Result<Self, GameError> {
        let sigma1 = Alphabet::new(doc.sigma1.iter().cloned())?;
        let sigma2 = Alphabet::new(doc.sigma2.iter().cloned())?;
        let silent = doc.silent.as_deref().map(|s| sigma2.lookup(s)).transpose()?;
        let mut states = Vec::with_capacity(doc.states.len());
        for s in &doc.states {
            let turn = Turn::from_bit(s.turn).ok_or_else(|| GameError::Json(format!("turn {}", s.turn)))?;
            states.push(GameState { q1: s.q1, q2: s.q2, turn, qs: s.qs });
        }
        let mut transitions = Vec::with_capacity(doc.transitions.len());
        for t in &doc.transitions {
            let a = match Turn::from_bit(t.player) {
                Some(Turn::Agent) => Action::Agent(sigma1.lookup(&t.label)?),
                Some(Turn::Adversary) => Action::Adversary(sigma2.lookup(&t.label)?),
                None => return Err(GameError::Json(format!("player {}", t.player))),
            };
            transitions.push((t.from, a, t.to));
        }
        let mut g = GameAutomaton::from_parts(GameParts {
            sigma1,
            sigma2,
            silent,
            agent_names: doc.agent_states.clone(),
            adversary_names: doc.adversary_states.clone(),
            spec_names: doc.spec_states.clone(),
            states,
            transitions,
            initial: doc.initial.clone(),
            finals: doc.finals.clone(),
        })?;
        let mut sw = SwitchingFunction::all_off(g.adversary_names.len(), g.sigma2.len(), silent);
        let mut rows: HashMap<&str, &str> = HashMap::new();
        for (name, bits) in &doc.sw {
            rows.insert(name.as_str(), bits.as_str());
        }
        for q in 0..g.adversary_names.len() {
            match rows.get(g.adversary_names[q].as_str()) {
                None => sw.bits[q * sw.n_sym..(q + 1) * sw.n_sym].fill(true),
                Some(bits) => {
                    if bits.chars().count() != g.sigma2.len() || bits.chars().any(|c| c != '0' && c != '1') {
                        return Err(GameError::Json(format!("bad sw row for {}", g.adversary_names[q])));
                    }
                    for (i, c) in bits.chars().enumerate() {
                        sw.bits[q * sw.n_sym + i] = c == '1';
                    }
                }
            }
        }
        g.sw = sw;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, GameError> {
        let doc: GameDoc = serde_json::from_str(text).map_err(|e| GameError::Json(e.to_string()))?;
        GameAutomaton::from_doc(&doc)
    }

    /// DOT rendering of the states reachable under the current switching
    /// function. With an attractor, states are labelled by rank and winning
    /// states are filled.
    pub fn to_dot(&self, attr: Option<&Attractor>) -> String {
        let reach = self.reachable();
        let mut out = String::from("digraph game {\n  rankdir=LR;\n");
        for q in (0..self.states.len()).filter(|&q| reach[q]) {
            let shape = if self.is_final[q] {
                "doublecircle"
            } else if self.states[q].turn == Turn::Agent {
                "box"
            } else {
                "circle"
            };
            let name = self.state_name(q).replace('"', "\\\"");
            match attr.and_then(|a| a.rank(q)) {
                Some(r) => {
                    let _ = writeln!(
                        out,
                        "  s{q} [label=\"{name}\\nrank {r}\", shape={shape}, style=filled, fillcolor=lightgray];"
                    );
                }
                None => {
                    let _ = writeln!(out, "  s{q} [label=\"{name}\", shape={shape}];");
                }
            }
        }
        for &q in &self.initial {
            let _ = writeln!(out, "  init{q} [shape=point, label=\"\"];\n  init{q} -> s{q};");
        }
        for q in (0..self.states.len()).filter(|&q| reach[q]) {
            for (a, t) in self.successors(q) {
                let _ = writeln!(out, "  s{q} -> s{t} [label=\"{}\"];", self.action_name(a).replace('"', "\\\""));
            }
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for GameAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "game with {} states, {} transitions", self.num_states(), self.num_transitions())
    }
}

/// Attr(F) together with the rank function and its layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attractor {
    rank: Vec<Option<u32>>,
    layers: Vec<Vec<StateId>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Winning(u32),
    Trapped,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Winning(r) => write!(f, "WINNING({r})"),
            Classification::Trapped => write!(f, "TRAPPED"),
        }
    }
}

impl Attractor {
    pub fn from_ranks(rank: Vec<Option<u32>>) -> Self {
        let depth = rank.iter().flatten().max().map_or(0, |&m| m as usize + 1);
        let mut layers = vec![Vec::new(); depth];
        for (q, r) in rank.iter().enumerate() {
            if let Some(r) = r {
                layers[*r as usize].push(q);
            }
        }
        Attractor { rank, layers }
    }

    pub fn rank(&self, q: StateId) -> Option<u32> {
        self.rank.get(q).copied().flatten()
    }

    pub fn ranks(&self) -> &[Option<u32>] {
        &self.rank
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.rank(q).is_some()
    }

    /// V_0, V_1, ..., V_m.
    pub fn layers(&self) -> &[Vec<StateId>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classify(&self, q: StateId) -> Classification {
        match self.rank(q) {
            Some(r) => Classification::Winning(r),
            None => Classification::Trapped,
        }
    }
}

/// Advice from a strategy at a given state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Advice<'a> {
    Play(&'a [Symbol]),
    /// Outside the attractor: no move guarantees a win.
    Trapped,
    /// Not an agent state in the strategy's domain (adversary turn or goal).
    NotAgentTurn,
}

/// A memoryless agent strategy: agent state → permitted symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    moves: BTreeMap<StateId, Vec<Symbol>>,
}

impl Strategy {
    pub fn advice(&self, g: &GameAutomaton, q: StateId) -> Advice<'_> {
        match self.moves.get(&q) {
            Some(m) => Advice::Play(m),
            None if g.state(q).turn == Turn::Agent => Advice::Trapped,
            None => Advice::NotAgentTurn,
        }
    }

    pub fn moves(&self, q: StateId) -> Option<&[Symbol]> {
        self.moves.get(&q).map(Vec::as_slice)
    }

    /// The first permitted move in symbol order.
    pub fn choose(&self, q: StateId) -> Option<Symbol> {
        self.moves.get(&q).and_then(|m| m.first().copied())
    }

    /// A uniformly random permitted move.
    pub fn choose_random<R: Rng + ?Sized>(&self, q: StateId, rng: &mut R) -> Option<Symbol> {
        let m = self.moves.get(&q)?;
        Some(m[rng.gen_range(0..m.len())])
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &[Symbol])> {
        self.moves.iter().map(|(q, m)| (*q, m.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

/// JSON game document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameDoc {
    pub sigma1: Vec<String>,
    pub sigma2: Vec<String>,
    #[serde(default)]
    pub silent: Option<String>,
    pub agent_states: Vec<String>,
    pub adversary_states: Vec<String>,
    pub spec_states: Vec<String>,
    pub states: Vec<StateDoc>,
    pub initial: Vec<StateId>,
    #[serde(rename = "final")]
    pub finals: Vec<StateId>,
    pub transitions: Vec<TransitionDoc>,
    /// Per adversary state, one '0'/'1' per Σ₂ symbol. Missing rows are all on.
    #[serde(default)]
    pub sw: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDoc {
    pub q1: StateId,
    pub q2: StateId,
    pub turn: u8,
    #[serde(default)]
    pub qs: Option<StateId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub from: StateId,
    pub player: u8,
    pub label: String,
    pub to: StateId,
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Agent: rooms x,y with moves "gx","gy"; adversary: one state, "block" and ε.
    fn tiny() -> (PlayerSpec, PlayerSpec) {
        let mut a = Semiautomaton::new(Alphabet::new(["gx", "gy"]).unwrap());
        a.add_state("x").unwrap();
        a.add_state("y").unwrap();
        a.add_transition(0, Symbol::new(1), 1).unwrap();
        a.add_transition(1, Symbol::new(0), 0).unwrap();
        let mut b = Semiautomaton::new(Alphabet::new(["shut", SILENT]).unwrap());
        b.add_state("open").unwrap();
        b.add_state("shut").unwrap();
        b.add_transition(0, Symbol::new(0), 1).unwrap();
        b.add_transition(0, Symbol::new(1), 0).unwrap();
        b.add_transition(1, Symbol::new(1), 1).unwrap();
        (PlayerSpec::new(a, [0], None).unwrap(), PlayerSpec::new(b, [0], Some(SILENT)).unwrap())
    }

    /// Spec: reach y. Alphabet Λ = {gx, gy, shut, ε}.
    fn reach_y() -> Fsa {
        let al = Alphabet::new(["gx", "gy", "shut", SILENT]).unwrap();
        let mut sa = Semiautomaton::new(al);
        sa.add_state("start").unwrap();
        sa.add_state("done").unwrap();
        for q in 0..2 {
            for s in 2..4 {
                sa.add_transition(q, Symbol::new(s), q).unwrap();
            }
            sa.add_transition(q, Symbol::new(0), q).unwrap();
            sa.add_transition(q, Symbol::new(1), 1).unwrap();
        }
        Fsa::new(sa, [0], [1]).unwrap()
    }

    #[test]
    fn product_shape_and_turns() {
        let (a, b) = tiny();
        let p = turn_based_product(&a, &b, &InteractionFunction::new(), &InteractionFunction::new()).unwrap();
        assert_eq!(p.states.len(), 8);
        assert_eq!(p.initial, vec![p.index(0, 0, Turn::Agent)]);
        let eps = p.lambda_symbol(Action::Adversary(Symbol::new(1)));
        let from = p.index(0, 0, Turn::Adversary);
        assert_eq!(p.sa.next(from, eps), Some(p.index(0, 0, Turn::Agent)));
        for (f, s, t) in p.sa.transitions() {
            assert_ne!(p.states[f].turn, p.states[t].turn);
            assert_eq!(p.action(s).mover(), p.states[f].turn);
        }
    }

    #[test]
    fn overlap_and_silent_checks() {
        let (a, _) = tiny();
        assert!(matches!(
            turn_based_product(&a, &a, &InteractionFunction::new(), &InteractionFunction::new()),
            Err(GameError::OverlappingAlphabets(_))
        ));
        let (a, b) = tiny();
        let mut u1 = InteractionFunction::new();
        u1.forbid(0, 0, Symbol::new(1));
        assert_eq!(
            turn_based_product(&a, &b, &u1, &InteractionFunction::new()).unwrap_err(),
            GameError::ForbiddenSilent
        );
        let mut sa = Semiautomaton::new(Alphabet::new(["z", SILENT]).unwrap());
        sa.add_state("p").unwrap();
        assert!(matches!(PlayerSpec::new(sa, [0], Some(SILENT)), Err(GameError::BadSilent(_))));
    }

    #[test]
    fn blocked_move_traps_agent() {
        let (a, b) = tiny();
        // door shut blocks "gy" wherever the agent is
        let mut u2 = InteractionFunction::new();
        u2.forbid(1, 0, Symbol::new(1));
        let p = turn_based_product(&a, &b, &InteractionFunction::new(), &u2).unwrap();
        let g = game_automaton(&p, &reach_y(), |_, _| Some(0)).unwrap();
        let attr = g.attractor();
        let q0 = g.initial()[0];
        // agent moves first and reaches y before the adversary acts
        assert_eq!(attr.classify(q0), Classification::Winning(1));
        let s = g.optimal_strategy(&attr);
        assert_eq!(s.choose(q0), Some(Symbol::new(1)));
        // with the door shut at the start, the agent is trapped
        let shut = g.find("x", "shut", Turn::Agent, "start").unwrap();
        assert_eq!(attr.classify(shut), Classification::Trapped);
        assert_eq!(s.advice(&g, shut), Advice::Trapped);
    }

    #[test]
    fn always_accepting_spec_finals() {
        let (a, b) = tiny();
        let p = turn_based_product(&a, &b, &InteractionFunction::new(), &InteractionFunction::new()).unwrap();
        let mut sa = Semiautomaton::new(p.lambda.clone());
        sa.add_state("s").unwrap();
        for sym in p.lambda.symbols() {
            sa.add_transition(0, sym, 0).unwrap();
        }
        let spec = Fsa::new(sa, [0], [0]).unwrap();
        let g = game_automaton(&p, &spec, |_, _| Some(0)).unwrap();
        let finals: Vec<StateId> = g.finals().collect();
        let adv: Vec<StateId> = (0..g.num_states()).filter(|&q| g.state(q).turn == Turn::Adversary).collect();
        assert_eq!(finals, adv);
        assert!(game_automaton(&p, &spec, |_, _| None).is_err());
    }

    #[test]
    fn sw_masks_adversary_moves() {
        let (a, b) = tiny();
        let p = turn_based_product(&a, &b, &InteractionFunction::new(), &InteractionFunction::new()).unwrap();
        let mut g = game_automaton(&p, &reach_y(), |_, _| Some(0)).unwrap();
        g.set_sw(SwitchingFunction::all_off(2, 2, Some(Symbol::new(1))));
        let q = g.find("x", "open", Turn::Adversary, "start").unwrap();
        let acts: Vec<&str> = g.successors(q).map(|(a, _)| g.action_name(a)).collect();
        assert_eq!(acts, [SILENT]);
        assert!(g.sw_update(0, Symbol::new(0)));
        assert!(!g.sw_update(0, Symbol::new(0)));
        let acts: Vec<&str> = g.successors(q).map(|(a, _)| g.action_name(a)).collect();
        assert_eq!(acts, ["shut", SILENT]);
        assert_eq!(g.sw().count_on(), 1);
    }

    #[test]
    fn json_round_trip() {
        let (a, b) = tiny();
        let p = turn_based_product(&a, &b, &InteractionFunction::new(), &InteractionFunction::new()).unwrap();
        let mut g = game_automaton(&p, &reach_y(), |_, _| Some(0)).unwrap();
        g.set_sw(SwitchingFunction::all_off(2, 2, Some(Symbol::new(1))));
        let back = GameAutomaton::from_json(&g.to_json()).unwrap();
        assert_eq!(back.to_doc(), g.to_doc());
        assert_eq!(back.attractor(), g.attractor());
        assert_eq!(g.to_dot(Some(&g.attractor())), back.to_dot(Some(&back.attractor())));
    }

    #[test]
    fn stuck_adversary_loses() {
        let st = |turn| GameState { q1: 0, q2: 0, turn, qs: Some(0) };
        let g = GameAutomaton::from_parts(GameParts {
            sigma1: Alphabet::new(["m"]).unwrap(),
            sigma2: Alphabet::new(["n"]).unwrap(),
            silent: None,
            agent_names: vec!["a".into()],
            adversary_names: vec!["b".into()],
            spec_names: vec!["s".into()],
            states: vec![st(Turn::Agent), st(Turn::Adversary)],
            transitions: vec![(0, Action::Agent(Symbol::new(0)), 1)],
            initial: vec![0],
            finals: vec![],
        })
        .unwrap();
        let attr = g.attractor();
        assert_eq!(attr.rank(1), Some(1));
        assert_eq!(attr.rank(0), Some(2));
    }
}
