//! Deterministic semiautomata and finite state automata.
//!
//! Transition functions are partial: a missing entry means the action is not
//! enabled. States and symbols are dense indices into declaration-ordered
//! tables, so every iteration in this module (and everything built on top of
//! it) follows declaration order and is reproducible run to run.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Index of a state inside an automaton.
pub type StateId = usize;

/// An action label. Ordered by position in the owning [`Alphabet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(pub(crate) u32);

impl Symbol {
    pub fn new(index: usize) -> Self {
        Symbol(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("state not in automaton: {0}")]
    UnknownState(String),
    #[error("symbol not in alphabet: {0}")]
    UnknownSymbol(String),
    #[error("duplicate state name '{0}'")]
    DuplicateState(String),
    #[error("duplicate symbol '{0}'")]
    DuplicateSymbol(String),
    #[error("nondeterministic transition from '{state}' on '{symbol}'")]
    Nondeterministic { state: String, symbol: String },
    #[error("alphabets differ")]
    AlphabetMismatch,
    #[error("cannot split word '{0}' into alphabet symbols")]
    UnparsableWord(String),
    #[error("malformed automaton document: {0}")]
    Json(String),
}

/// A finite, ordered set of named symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Symbol>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Result<Self, AutomatonError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut alphabet = Alphabet::default();
        for name in names {
            alphabet.push(name.into())?;
        }
        Ok(alphabet)
    }

    fn push(&mut self, name: String) -> Result<Symbol, AutomatonError> {
        if self.index.contains_key(&name) {
            return Err(AutomatonError::DuplicateSymbol(name));
        }
        let sym = Symbol::new(self.names.len());
        self.index.insert(name.clone(), sym);
        self.names.push(name);
        Ok(sym)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).copied()
    }

    pub fn lookup(&self, name: &str) -> Result<Symbol, AutomatonError> {
        self.symbol(name).ok_or_else(|| AutomatonError::UnknownSymbol(name.to_string()))
    }

    /// Display name of `sym`. Panics if `sym` is not from this alphabet.
    pub fn name(&self, sym: Symbol) -> &str {
        &self.names[sym.index()]
    }

    pub fn contains(&self, sym: Symbol) -> bool {
        sym.index() < self.names.len()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.names.len()).map(Symbol::new)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// True when every symbol is rendered by a single character, in which
    /// case words can be written without separators.
    pub fn is_single_char(&self) -> bool {
        self.names.iter().all(|n| n.chars().count() == 1)
    }

    /// Parses a written word. Whitespace or commas separate symbols when
    /// present; otherwise the word is split greedily by longest match.
    pub fn parse_word(&self, text: &str) -> Result<Vec<Symbol>, AutomatonError> {
        let text = text.trim();
        if text.is_empty() || text == "λ" {
            return Ok(Vec::new());
        }
        if text.contains(|c: char| c.is_whitespace() || c == ',') {
            return text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| self.lookup(t))
                .collect();
        }
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let best = self
                .names
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.is_empty() && rest.starts_with(n.as_str()))
                .max_by_key(|(_, n)| n.len());
            match best {
                Some((i, n)) => {
                    out.push(Symbol::new(i));
                    rest = &rest[n.len()..];
                }
                None => return Err(AutomatonError::UnparsableWord(text.to_string())),
            }
        }
        Ok(out)
    }

    /// Renders a word; `λ` for the empty word.
    pub fn render_word(&self, word: &[Symbol]) -> String {
        if word.is_empty() {
            return "λ".to_string();
        }
        let sep = if self.is_single_char() { "" } else { " " };
        word.iter().map(|s| self.name(*s)).collect::<Vec<_>>().join(sep)
    }
}

/// A deterministic semiautomaton ⟨Q, Σ, T⟩ with a partial transition function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Semiautomaton {
    alphabet: Alphabet,
    states: Vec<String>,
    state_index: HashMap<String, StateId>,
    // row-major: delta[q * |Σ| + σ]
    delta: Vec<Option<StateId>>,
}

impl Semiautomaton {
    pub fn new(alphabet: Alphabet) -> Self {
        Semiautomaton { alphabet, states: Vec::new(), state_index: HashMap::new(), delta: Vec::new() }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> Result<StateId, AutomatonError> {
        let name = name.into();
        if self.state_index.contains_key(&name) {
            return Err(AutomatonError::DuplicateState(name));
        }
        let id = self.states.len();
        self.state_index.insert(name.clone(), id);
        self.states.push(name);
        self.delta.extend(std::iter::repeat_n(None, self.alphabet.len()));
        Ok(id)
    }

    /// Adds `from --sym--> to`. Re-adding an identical transition is a no-op;
    /// a conflicting one is rejected.
    pub fn add_transition(&mut self, from: StateId, sym: Symbol, to: StateId) -> Result<(), AutomatonError> {
        self.check_state(from)?;
        self.check_state(to)?;
        self.check_symbol(sym)?;
        let slot = &mut self.delta[from * self.alphabet.len() + sym.index()];
        match *slot {
            Some(existing) if existing != to => Err(AutomatonError::Nondeterministic {
                state: self.states[from].clone(),
                symbol: self.alphabet.name(sym).to_string(),
            }),
            _ => {
                *slot = Some(to);
                Ok(())
            }
        }
    }

    pub fn remove_transition(&mut self, from: StateId, sym: Symbol) {
        let n = self.alphabet.len();
        if from < self.states.len() && sym.index() < n {
            self.delta[from * n + sym.index()] = None;
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.states.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.state_index.get(name).copied()
    }

    pub fn lookup_state(&self, name: &str) -> Result<StateId, AutomatonError> {
        self.state(name).ok_or_else(|| AutomatonError::UnknownState(name.to_string()))
    }

    fn check_state(&self, q: StateId) -> Result<(), AutomatonError> {
        if q < self.states.len() {
            Ok(())
        } else {
            Err(AutomatonError::UnknownState(format!("#{q}")))
        }
    }

    fn check_symbol(&self, sym: Symbol) -> Result<(), AutomatonError> {
        if self.alphabet.contains(sym) {
            Ok(())
        } else {
            Err(AutomatonError::UnknownSymbol(format!("#{}", sym.index())))
        }
    }

    /// T(q, σ), or `None` when undefined. Out-of-range inputs are undefined.
    pub fn next(&self, q: StateId, sym: Symbol) -> Option<StateId> {
        if q >= self.states.len() || !self.alphabet.contains(sym) {
            return None;
        }
        self.delta[q * self.alphabet.len() + sym.index()]
    }

    /// Γ(q): the symbols with a defined transition at `q`, in alphabet order.
    pub fn enabled(&self, q: StateId) -> Result<Vec<Symbol>, AutomatonError> {
        self.check_state(q)?;
        Ok(self.out(q).map(|(s, _)| s).collect())
    }

    /// Outgoing transitions of `q` in alphabet order.
    pub fn out(&self, q: StateId) -> impl Iterator<Item = (Symbol, StateId)> + '_ {
        let n = self.alphabet.len();
        self.delta[q * n..(q + 1) * n].iter().enumerate().filter_map(|(i, t)| t.map(|t| (Symbol::new(i), t)))
    }

    /// All transitions, ordered by source then symbol.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, Symbol, StateId)> + '_ {
        self.states().flat_map(move |q| self.out(q).map(move |(s, t)| (q, s, t)))
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().filter(|t| t.is_some()).count()
    }

    /// The extended transition function T(q0, w). `Ok(None)` when some step
    /// is undefined.
    pub fn run(&self, q0: StateId, word: &[Symbol]) -> Result<Option<StateId>, AutomatonError> {
        self.check_state(q0)?;
        for &s in word {
            self.check_symbol(s)?;
        }
        let mut q = q0;
        for &s in word {
            match self.next(q, s) {
                Some(t) => q = t,
                None => return Ok(None),
            }
        }
        Ok(Some(q))
    }

    /// States reachable from `sources` (including them).
    pub fn reachable_from(&self, sources: impl IntoIterator<Item = StateId>) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::new();
        for q in sources {
            if q < seen.len() && !seen[q] {
                seen[q] = true;
                queue.push_back(q);
            }
        }
        while let Some(q) = queue.pop_front() {
            for (_, t) in self.out(q) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// States from which some state in `targets` is reachable.
    pub fn coreachable_to(&self, targets: impl IntoIterator<Item = StateId>) -> Vec<bool> {
        let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); self.num_states()];
        for (q, _, t) in self.transitions() {
            preds[t].push(q);
        }
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::new();
        for q in targets {
            if q < seen.len() && !seen[q] {
                seen[q] = true;
                queue.push_back(q);
            }
        }
        while let Some(q) = queue.pop_front() {
            for &p in &preds[q] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Keeps only the states flagged in `keep`, preserving order. Returns the
    /// new automaton and the old→new index map.
    pub fn restrict(&self, keep: &[bool]) -> (Semiautomaton, Vec<Option<StateId>>) {
        let mut sa = Semiautomaton::new(self.alphabet.clone());
        let mut map = vec![None; self.num_states()];
        for q in self.states() {
            if keep[q] {
                map[q] = Some(sa.add_state(self.states[q].clone()).expect("unique names"));
            }
        }
        for (q, s, t) in self.transitions() {
            if let (Some(nq), Some(nt)) = (map[q], map[t]) {
                sa.add_transition(nq, s, nt).expect("deterministic");
            }
        }
        (sa, map)
    }

    /// Returns a copy whose alphabet is extended by `name`, with a self-loop
    /// on it at every state.
    pub fn with_silent_loops(&self, name: &str) -> Result<Semiautomaton, AutomatonError> {
        let mut names = self.alphabet.names().to_vec();
        names.push(name.to_string());
        let mut sa = Semiautomaton::new(Alphabet::new(names)?);
        for q in self.states() {
            sa.add_state(self.states[q].clone())?;
        }
        for (q, s, t) in self.transitions() {
            sa.add_transition(q, s, t)?;
        }
        let eps = sa.alphabet.lookup(name)?;
        for q in sa.states() {
            sa.add_transition(q, eps, q)?;
        }
        Ok(sa)
    }

    pub fn to_doc(&self) -> AutomatonDoc {
        AutomatonDoc {
            alphabet: self.alphabet.names().to_vec(),
            states: self.states.clone(),
            initial: Vec::new(),
            final_states: None,
            transitions: self
                .transitions()
                .map(|(q, s, t)| TransitionDoc {
                    from: self.states[q].clone(),
                    label: self.alphabet.name(s).to_string(),
                    to: self.states[t].clone(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &AutomatonDoc) -> Result<Self, AutomatonError> {
        let mut sa = Semiautomaton::new(Alphabet::new(doc.alphabet.iter().cloned())?);
        for name in &doc.states {
            sa.add_state(name.clone())?;
        }
        for t in &doc.transitions {
            let from = sa.lookup_state(&t.from)?;
            let to = sa.lookup_state(&t.to)?;
            let sym = sa.alphabet.lookup(&t.label)?;
            sa.add_transition(from, sym, to)?;
        }
        Ok(sa)
    }

    pub fn to_dot(&self) -> String {
        render_dot(self, &BTreeSet::new(), &BTreeSet::new())
    }
}

/// A finite state automaton ⟨A, I, F⟩.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fsa {
    pub sa: Semiautomaton,
    pub initial: BTreeSet<StateId>,
    pub finals: BTreeSet<StateId>,
}

/// Shortest distance of each reachable state from the initial set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelMap(Vec<Option<usize>>);

impl LevelMap {
    pub fn get(&self, q: StateId) -> Option<usize> {
        self.0.get(q).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, usize)> + '_ {
        self.0.iter().enumerate().filter_map(|(q, l)| l.map(|l| (q, l)))
    }
}

impl Fsa {
    pub fn new(
        sa: Semiautomaton,
        initial: impl IntoIterator<Item = StateId>,
        finals: impl IntoIterator<Item = StateId>,
    ) -> Result<Self, AutomatonError> {
        let initial: BTreeSet<_> = initial.into_iter().collect();
        let finals: BTreeSet<_> = finals.into_iter().collect();
        for &q in initial.iter().chain(finals.iter()) {
            sa.check_state(q)?;
        }
        Ok(Fsa { sa, initial, finals })
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.sa.alphabet()
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    /// Membership: T(I, w) ∩ F ≠ ∅.
    pub fn accepts(&self, word: &[Symbol]) -> bool {
        self.initial.iter().any(|&q0| matches!(self.sa.run(q0, word), Ok(Some(q)) if self.finals.contains(&q)))
    }

    /// Breadth-first levels from the initial states.
    pub fn levels(&self) -> LevelMap {
        let mut level = vec![None; self.sa.num_states()];
        let mut queue = VecDeque::new();
        for &q in &self.initial {
            level[q] = Some(0);
            queue.push_back(q);
        }
        while let Some(q) = queue.pop_front() {
            let next = level[q].map(|l| l + 1);
            for (_, t) in self.sa.out(q) {
                if level[t].is_none() {
                    level[t] = next;
                    queue.push_back(t);
                }
            }
        }
        LevelMap(level)
    }

    /// Subset construction from the initial set. Reachable subsets only;
    /// the empty subset is never materialized. States are named `{a,b}`.
    pub fn determinize(&self) -> Fsa {
        let alphabet = self.alphabet().clone();
        let mut sa = Semiautomaton::new(alphabet.clone());
        let mut ids: BTreeMap<Vec<StateId>, StateId> = BTreeMap::new();
        let mut queue = VecDeque::new();
        let mut finals = Vec::new();
        let start: Vec<StateId> = self.initial.iter().copied().collect();
        let name_of = |set: &[StateId]| {
            let parts: Vec<&str> = set.iter().map(|&q| self.sa.state_name(q)).collect();
            format!("{{{}}}", parts.join(","))
        };
        let s0 = sa.add_state(name_of(&start)).expect("fresh");
        if start.iter().any(|q| self.finals.contains(q)) {
            finals.push(s0);
        }
        ids.insert(start.clone(), s0);
        queue.push_back(start);
        while let Some(set) = queue.pop_front() {
            let from = ids[&set];
            for sym in alphabet.symbols() {
                let next: BTreeSet<StateId> = set.iter().filter_map(|&q| self.sa.next(q, sym)).collect();
                if next.is_empty() {
                    continue;
                }
                let next: Vec<StateId> = next.into_iter().collect();
                let to = match ids.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = sa.add_state(name_of(&next)).expect("fresh");
                        if next.iter().any(|q| self.finals.contains(q)) {
                            finals.push(id);
                        }
                        ids.insert(next.clone(), id);
                        queue.push_back(next);
                        id
                    }
                };
                sa.add_transition(from, sym, to).expect("deterministic");
            }
        }
        Fsa::new(sa, [s0], finals).expect("valid")
    }

    /// Canonical minimal DFA for L(self).
    ///
    /// The result has a single initial state, no dead states, and states
    /// named `q0, q1, ...` in breadth-first order (symbol order breaks ties),
    /// so two automata for the same language minimize to identical values.
    /// The empty language minimizes to one non-final initial state with no
    /// transitions.
    pub fn minimize(&self) -> Fsa {
        if self.initial.is_empty() {
            return empty_language(self.alphabet().clone());
        }
        let dfa = if self.initial.len() == 1 { self.clone() } else { self.determinize() };
        let q0 = *dfa.initial.iter().next().expect("one initial");
        let reach = dfa.sa.reachable_from([q0]);
        let (trimmed, map) = dfa.sa.restrict(&reach);
        let q0 = map[q0].expect("initial reachable");
        let finals: Vec<bool> =
            (0..dfa.sa.num_states()).filter(|&q| reach[q]).map(|q| dfa.finals.contains(&q)).collect();

        let blocks = hopcroft(&trimmed, &finals);
        let n_sym = trimmed.alphabet().len();

        // Dead block: the one containing the sink (index n) or any block with
        // no path to a final state.
        let n = trimmed.num_states();
        let n_blocks = blocks.iter().copied().max().map_or(0, |m| m + 1);
        let mut block_final = vec![false; n_blocks];
        let mut block_succ = vec![vec![None; n_sym]; n_blocks];
        for q in 0..=n {
            let b = blocks[q];
            if q < n && finals[q] {
                block_final[b] = true;
            }
            for (s, slot) in block_succ[b].iter_mut().enumerate() {
                let t = if q < n { trimmed.next(q, Symbol::new(s)).unwrap_or(n) } else { n };
                *slot = Some(blocks[t]);
            }
        }
        // co-reachability over blocks
        let mut live = block_final.clone();
        loop {
            let mut changed = false;
            for b in 0..n_blocks {
                if !live[b] && block_succ[b].iter().flatten().any(|&t| live[t]) {
                    live[b] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let start = blocks[q0];
        if !live[start] {
            return empty_language(trimmed.alphabet().clone());
        }
        // BFS renumbering over live blocks.
        let mut order = vec![None; n_blocks];
        let mut queue = VecDeque::from([start]);
        order[start] = Some(0usize);
        let mut seq = vec![start];
        while let Some(b) = queue.pop_front() {
            for &t in block_succ[b].iter().flatten() {
                if live[t] && order[t].is_none() {
                    order[t] = Some(seq.len());
                    seq.push(t);
                    queue.push_back(t);
                }
            }
        }
        let mut sa = Semiautomaton::new(trimmed.alphabet().clone());
        for i in 0..seq.len() {
            sa.add_state(format!("q{i}")).expect("fresh");
        }
        let mut fin = Vec::new();
        for (i, &b) in seq.iter().enumerate() {
            if block_final[b] {
                fin.push(i);
            }
            for (s, t) in block_succ[b].iter().enumerate() {
                if let Some(t) = *t {
                    if let Some(j) = order[t] {
                        sa.add_transition(i, Symbol::new(s), j).expect("deterministic");
                    }
                }
            }
        }
        Fsa::new(sa, [0], fin).expect("valid")
    }

    /// L(self) = L(other)? Returns `Ok(None)` when equal and otherwise a
    /// shortest word accepted by exactly one of them.
    pub fn distinguishing_word(&self, other: &Fsa) -> Result<Option<Vec<Symbol>>, AutomatonError> {
        if self.alphabet().names() != other.alphabet().names() {
            return Err(AutomatonError::AlphabetMismatch);
        }
        let a = self.minimize();
        let b = other.minimize();
        let n_sym = a.alphabet().len();
        // Product of the completed automata; `None` plays the sink.
        type Pair = (Option<StateId>, Option<StateId>);
        let accept = |f: &Fsa, q: Option<StateId>| q.is_some_and(|q| f.finals.contains(&q));
        let start: Pair = (Some(0), Some(0));
        let mut parent: HashMap<Pair, Option<(Pair, Symbol)>> = HashMap::new();
        parent.insert(start, None);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            if accept(&a, p.0) != accept(&b, p.1) {
                let mut word = Vec::new();
                let mut cur = p;
                while let Some(Some((prev, s))) = parent.get(&cur) {
                    word.push(*s);
                    cur = *prev;
                }
                word.reverse();
                return Ok(Some(word));
            }
            for s in 0..n_sym {
                let sym = Symbol::new(s);
                let next = (p.0.and_then(|q| a.sa.next(q, sym)), p.1.and_then(|q| b.sa.next(q, sym)));
                if next == (None, None) {
                    continue;
                }
                if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(next) {
                    e.insert(Some((p, sym)));
                    queue.push_back(next);
                }
            }
        }
        Ok(None)
    }

    pub fn language_equivalent(&self, other: &Fsa) -> Result<bool, AutomatonError> {
        Ok(self.distinguishing_word(other)?.is_none())
    }

    pub fn is_empty_language(&self) -> bool {
        let reach = self.sa.reachable_from(self.initial.iter().copied());
        !self.finals.iter().any(|&q| reach[q])
    }

    pub fn to_doc(&self) -> AutomatonDoc {
        let mut doc = self.sa.to_doc();
        doc.initial = self.initial.iter().map(|&q| self.sa.state_name(q).to_string()).collect();
        doc.final_states = Some(self.finals.iter().map(|&q| self.sa.state_name(q).to_string()).collect());
        doc
    }

    pub fn from_doc(doc: &AutomatonDoc) -> Result<Self, AutomatonError> {
        let sa = Semiautomaton::from_doc(doc)?;
        let initial = doc.initial.iter().map(|n| sa.lookup_state(n)).collect::<Result<Vec<_>, _>>()?;
        let finals = doc.final_states.iter().flatten().map(|n| sa.lookup_state(n)).collect::<Result<Vec<_>, _>>()?;
        Fsa::new(sa, initial, finals)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, AutomatonError> {
        let doc: AutomatonDoc = serde_json::from_str(text).map_err(|e| AutomatonError::Json(e.to_string()))?;
        Fsa::from_doc(&doc)
    }

    pub fn to_dot(&self) -> String {
        render_dot(&self.sa, &self.initial, &self.finals)
    }
}

fn empty_language(alphabet: Alphabet) -> Fsa {
    let mut sa = Semiautomaton::new(alphabet);
    sa.add_state("q0").expect("fresh");
    Fsa::new(sa, [0], []).expect("valid")
}

/// Hopcroft partition refinement over `sa` completed with a sink (index
/// `sa.num_states()`). Returns the block index of every state including the
/// sink.
fn hopcroft(sa: &Semiautomaton, finals: &[bool]) -> Vec<usize> {
    let n = sa.num_states() + 1;
    let sink = n - 1;
    let n_sym = sa.alphabet().len();
    let succ = |q: StateId, s: usize| -> StateId {
        if q == sink {
            sink
        } else {
            sa.next(q, Symbol::new(s)).unwrap_or(sink)
        }
    };
    // inverse transitions per symbol
    let mut inv: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n]; n_sym];
    for q in 0..n {
        for (s, inv_s) in inv.iter_mut().enumerate() {
            inv_s[succ(q, s)].push(q);
        }
    }
    let accepting: Vec<StateId> = (0..n).filter(|&q| q != sink && finals[q]).collect();
    let rejecting: Vec<StateId> = (0..n).filter(|&q| q == sink || !finals[q]).collect();
    let mut partition: Vec<Vec<StateId>> = Vec::new();
    let mut block_of = vec![0usize; n];
    for group in [accepting, rejecting] {
        if !group.is_empty() {
            let b = partition.len();
            for &q in &group {
                block_of[q] = b;
            }
            partition.push(group);
        }
    }
    let mut work: Vec<usize> = (0..partition.len()).collect();
    let mut in_work = vec![true; partition.len()];
    while let Some(splitter) = work.pop() {
        in_work[splitter] = false;
        let members = partition[splitter].clone();
        for inv_s in inv.iter() {
            let mut hit: BTreeMap<usize, Vec<StateId>> = BTreeMap::new();
            for &t in &members {
                for &p in &inv_s[t] {
                    hit.entry(block_of[p]).or_default().push(p);
                }
            }
            for (b, mut xs) in hit {
                xs.sort_unstable();
                xs.dedup();
                if xs.len() == partition[b].len() {
                    continue;
                }
                let inside: BTreeSet<StateId> = xs.iter().copied().collect();
                let (a, rest): (Vec<_>, Vec<_>) = partition[b].iter().partition(|q| inside.contains(q));
                let nb = partition.len();
                let (keep, moved) = if a.len() <= rest.len() { (rest, a) } else { (a, rest) };
                for &q in &moved {
                    block_of[q] = nb;
                }
                partition[b] = keep;
                partition.push(moved);
                // `moved` is the smaller half, so queueing it suffices whether
                // or not `b` is still pending.
                in_work.push(true);
                work.push(nb);
            }
        }
    }
    block_of
}

/// JSON automaton document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonDoc {
    pub alphabet: Vec<String>,
    pub states: Vec<String>,
    #[serde(default)]
    pub initial: Vec<String>,
    #[serde(rename = "final", default, skip_serializing_if = "Option::is_none")]
    pub final_states: Option<Vec<String>>,
    pub transitions: Vec<TransitionDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub from: String,
    pub label: String,
    pub to: String,
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn render_dot(sa: &Semiautomaton, initial: &BTreeSet<StateId>, finals: &BTreeSet<StateId>) -> String {
    let mut out = String::from("digraph automaton {\n  rankdir=LR;\n");
    for q in sa.states() {
        let shape = if finals.contains(&q) { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  s{q} [label=\"{}\", shape={shape}];", dot_escape(sa.state_name(q)));
    }
    for &q in initial {
        let _ = writeln!(out, "  init{q} [shape=point, label=\"\"];\n  init{q} -> s{q};");
    }
    for (q, s, t) in sa.transitions() {
        let _ = writeln!(out, "  s{q} -> s{t} [label=\"{}\"];", dot_escape(sa.alphabet().name(s)));
    }
    out.push_str("}\n");
    out
}

impl fmt::Display for Fsa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}
