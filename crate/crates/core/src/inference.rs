//! Strictly local (SL_k) languages and their string-extension learner.
//!
//! A factor is a window of at most `k` tokens over `⋊ Σ* ⋉`. The boundary
//! markers never enter an [`Alphabet`]; they are flags on [`Factor`] and are
//! written as `<` and `>` in text.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automata::{Alphabet, AutomatonError, Fsa, Semiautomaton, StateId, Symbol};

pub const LEFT_MARK: &str = "<";
pub const RIGHT_MARK: &str = ">";
/// Pause marker in text presentations.
pub const PAUSE: &str = "#";

const RESERVED: [&str; 5] = ["<", ">", "⋊", "⋉", "#"];

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum InferenceError {
    /// A presented symbol lies outside the learner's alphabet.
    #[error("unknown adversary action: {0}")]
    UnknownAction(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("'{0}' is reserved and cannot be an alphabet symbol")]
    ReservedSymbol(String),
    #[error("factor '{factor}' is not a valid {k}-factor")]
    BadFactor { factor: String, k: usize },
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("malformed grammar document: {0}")]
    Json(String),
}

/// A boundary-marked factor: optional `⋊`, interior symbols, optional `⋉`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub left: bool,
    pub body: Vec<Symbol>,
    pub right: bool,
}

impl Factor {
    pub fn interior(body: Vec<Symbol>) -> Self {
        Factor { left: false, body, right: false }
    }

    /// Length in tokens, markers included.
    pub fn len(&self) -> usize {
        self.body.len() + self.left as usize + self.right as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        let sep = if alphabet.is_single_char() { "" } else { " " };
        let body: Vec<&str> = self.body.iter().map(|s| alphabet.name(*s)).collect();
        format!(
            "{}{}{}",
            if self.left { LEFT_MARK } else { "" },
            body.join(sep),
            if self.right { RIGHT_MARK } else { "" }
        )
    }

    /// Parses the text form. Both `<`/`>` and `⋊`/`⋉` are accepted.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, InferenceError> {
        let mut s = text.trim();
        let mut left = false;
        let mut right = false;
        for m in ["<", "⋊"] {
            if let Some(rest) = s.strip_prefix(m) {
                left = true;
                s = rest;
                break;
            }
        }
        for m in [">", "⋉"] {
            if let Some(rest) = s.strip_suffix(m) {
                right = true;
                s = rest;
                break;
            }
        }
        let body = if s.trim().is_empty() { Vec::new() } else { alphabet.parse_word(s)? };
        Ok(Factor { left, body, right })
    }

    fn from_tokens(tokens: &[Token]) -> Self {
        let mut f = Factor { left: false, body: Vec::new(), right: false };
        for t in tokens {
            match t {
                Token::Left => f.left = true,
                Token::Right => f.right = true,
                Token::Sym(s) => f.body.push(*s),
            }
        }
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Token {
    Left,
    Sym(Symbol),
    Right,
}

/// f_k(w), or f_k(⋊w⋉) when `boundaries` is set.
pub fn k_factors(word: &[Symbol], k: usize, boundaries: bool) -> BTreeSet<Factor> {
    assert!(k >= 1, "k must be at least 1");
    let mut tokens = Vec::with_capacity(word.len() + 2);
    if boundaries {
        tokens.push(Token::Left);
    }
    tokens.extend(word.iter().map(|&s| Token::Sym(s)));
    if boundaries {
        tokens.push(Token::Right);
    }
    if tokens.len() <= k {
        return BTreeSet::from([Factor::from_tokens(&tokens)]);
    }
    tokens.windows(k).map(Factor::from_tokens).collect()
}

/// An SL_k grammar: a finite set of permitted boundary-marked k-factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlGrammar {
    k: usize,
    alphabet: Alphabet,
    factors: BTreeSet<Factor>,
}

impl SlGrammar {
    pub fn empty(alphabet: Alphabet, k: usize) -> Result<Self, InferenceError> {
        if k == 0 {
            return Err(InferenceError::ZeroK);
        }
        if let Some(bad) = alphabet.names().iter().find(|n| RESERVED.contains(&n.as_str())) {
            return Err(InferenceError::ReservedSymbol(bad.clone()));
        }
        Ok(SlGrammar { k, alphabet, factors: BTreeSet::new() })
    }

    pub fn new(
        alphabet: Alphabet,
        k: usize,
        factors: impl IntoIterator<Item = Factor>,
    ) -> Result<Self, InferenceError> {
        let mut g = SlGrammar::empty(alphabet, k)?;
        for f in factors {
            g.insert(f)?;
        }
        Ok(g)
    }

    /// Builds a grammar from factor strings such as `"<aa"` or `"ba>"`.
    pub fn from_strs<S: AsRef<str>>(
        alphabet: Alphabet,
        k: usize,
        factors: impl IntoIterator<Item = S>,
    ) -> Result<Self, InferenceError> {
        let mut g = SlGrammar::empty(alphabet, k)?;
        for f in factors {
            let f = Factor::parse(f.as_ref(), &g.alphabet)?;
            g.insert(f)?;
        }
        Ok(g)
    }

    pub fn insert(&mut self, f: Factor) -> Result<bool, InferenceError> {
        let ok = f.body.iter().all(|s| self.alphabet.contains(*s))
            && (f.len() == self.k || (f.len() < self.k && f.left && f.right));
        if !ok {
            return Err(InferenceError::BadFactor { factor: f.render(&self.alphabet), k: self.k });
        }
        Ok(self.factors.insert(f))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn factors(&self) -> &BTreeSet<Factor> {
        &self.factors
    }

    pub fn contains(&self, f: &Factor) -> bool {
        self.factors.contains(f)
    }

    /// w ∈ L(g) iff f_k(⋊w⋉) ⊆ g.
    pub fn accepts(&self, word: &[Symbol]) -> bool {
        k_factors(word, self.k, true).iter().all(|f| self.factors.contains(f))
    }

    pub fn to_doc(&self) -> GrammarDoc {
        GrammarDoc {
            k: self.k,
            alphabet: self.alphabet.names().to_vec(),
            factors: self.factors.iter().map(|f| f.render(&self.alphabet)).collect(),
        }
    }

    pub fn from_doc(doc: &GrammarDoc) -> Result<Self, InferenceError> {
        let alphabet = Alphabet::new(doc.alphabet.iter().cloned())?;
        SlGrammar::from_strs(alphabet, doc.k, &doc.factors)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, InferenceError> {
        let doc: GrammarDoc = serde_json::from_str(text).map_err(|e| InferenceError::Json(e.to_string()))?;
        SlGrammar::from_doc(&doc)
    }
}

impl fmt::Display for SlGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.render(&self.alphabet)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// JSON grammar document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarDoc {
    pub k: usize,
    pub alphabet: Vec<String>,
    pub factors: Vec<String>,
}

pub fn sl_membership(g: &SlGrammar, word: &[Symbol]) -> bool {
    g.accepts(word)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PresentationItem {
    Word(Vec<Symbol>),
    Pause,
}

/// The string-extension learner for SL_k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnerState {
    pub grammar: SlGrammar,
    pub items_consumed: usize,
}

impl LearnerState {
    pub fn new(alphabet: Alphabet, k: usize) -> Result<Self, InferenceError> {
        Ok(LearnerState { grammar: SlGrammar::empty(alphabet, k)?, items_consumed: 0 })
    }

    /// Consumes one presentation item and returns the next learner state.
    pub fn update(&self, item: &PresentationItem) -> Result<Self, InferenceError> {
        let mut next = self.clone();
        next.absorb(item)?;
        Ok(next)
    }

    /// In-place form of [`LearnerState::update`]. Returns the number of new factors.
    pub fn absorb(&mut self, item: &PresentationItem) -> Result<usize, InferenceError> {
        let mut added = 0;
        if let PresentationItem::Word(w) = item {
            self.check(w)?;
            for f in k_factors(w, self.grammar.k, true) {
                added += self.grammar.factors.insert(f) as usize;
            }
        }
        self.items_consumed += 1;
        Ok(added)
    }

    /// Adds a single factor produced by a [`PresentationBuffer`].
    pub fn absorb_factor(&mut self, f: Factor) -> Result<bool, InferenceError> {
        self.check(&f.body)?;
        self.grammar.insert(f)
    }

    fn check(&self, w: &[Symbol]) -> Result<(), InferenceError> {
        match w.iter().find(|s| !self.grammar.alphabet.contains(**s)) {
            Some(s) => Err(InferenceError::UnknownAction(format!("#{}", s.index()))),
            None => Ok(()),
        }
    }
}

/// Emits the factors of `⋊w⋉` one symbol at a time while `w` is being
/// produced, keeping only the last `k - 1` symbols.
#[derive(Clone, Debug)]
pub struct PresentationBuffer {
    k: usize,
    window: VecDeque<Token>,
    seen: usize,
}

impl PresentationBuffer {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "k must be at least 1");
        let mut window = VecDeque::with_capacity(k);
        window.push_back(Token::Left);
        PresentationBuffer { k, window, seen: 0 }
    }

    /// Appends a symbol and returns the k-factor it completes, if any. For
    /// `k = 1` the first call also completes the lone `⋊`, which is folded
    /// into the return value of [`PresentationBuffer::pending_left`].
    pub fn push(&mut self, sym: Symbol) -> Option<Factor> {
        self.seen += 1;
        self.window.push_back(Token::Sym(sym));
        if self.window.len() > self.k {
            self.window.pop_front();
        }
        if self.window.len() == self.k {
            let tokens: Vec<Token> = self.window.iter().copied().collect();
            Some(Factor::from_tokens(&tokens))
        } else {
            None
        }
    }

    /// For `k = 1` the factor `⋊` is never completed by a symbol. It is part
    /// of every presentation word and is reported here.
    pub fn pending_left(&self) -> Option<Factor> {
        (self.k == 1).then(|| Factor { left: true, body: Vec::new(), right: false })
    }

    /// Ends the word, returning its final factor.
    pub fn finish(mut self) -> Factor {
        self.window.push_back(Token::Right);
        let full = self.seen + 2 <= self.k;
        while self.window.len() > self.k {
            self.window.pop_front();
        }
        debug_assert!(full || self.window.len() == self.k);
        let tokens: Vec<Token> = self.window.iter().copied().collect();
        Factor::from_tokens(&tokens)
    }
}

fn all_words_upto(alphabet: &Alphabet, max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for s in alphabet.symbols() {
                let mut v: Vec<Symbol> = w.clone();
                v.push(s);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// The SL_k scaffold D_k accepting Σ*: states are all words of length at
/// most `k - 1` (named by the word, `λ` for the empty word) in length-lex
/// order, the single initial state is `λ` and every state is final.
pub fn build_dk(alphabet: &Alphabet, k: usize) -> Fsa {
    assert!(k >= 1, "k must be at least 1");
    let words = all_words_upto(alphabet, k - 1);
    let mut sa = Semiautomaton::new(alphabet.clone());
    let mut index: HashMap<Vec<Symbol>, StateId> = HashMap::new();
    for w in &words {
        let id = sa.add_state(alphabet.render_word(w)).expect("distinct words");
        index.insert(w.clone(), id);
    }
    for w in &words {
        for s in alphabet.symbols() {
            let mut t = w.clone();
            t.push(s);
            if t.len() > k - 1 {
                t.remove(0);
            }
            sa.add_transition(index[w], s, index[&t]).expect("deterministic");
        }
    }
    let all: Vec<StateId> = sa.states().collect();
    Fsa::new(sa, [0], all).expect("valid")
}

/// For a state `u` of D_k and a symbol `a`, the factor licensing the step,
/// if the step completes one.
fn step_factor(u: &[Symbol], a: Symbol, k: usize) -> Option<Factor> {
    let mut body = u.to_vec();
    body.push(a);
    if u.len() == k - 1 {
        Some(Factor::interior(body))
    } else if u.len() + 2 == k {
        Some(Factor { left: true, body, right: false })
    } else {
        None
    }
}

/// The factor deciding whether a D_k state `u` is accepting.
fn final_factor(u: &[Symbol], k: usize) -> Factor {
    if u.len() + 2 <= k {
        Factor { left: true, body: u.to_vec(), right: true }
    } else {
        Factor { left: false, body: u[u.len() + 1 - k..].to_vec(), right: true }
    }
}

/// Sub-automaton of D_k recognizing L(g), trimmed to useful states. An empty
/// language yields the single non-final state `λ` with no transitions.
pub fn grammar_to_fsa(g: &SlGrammar) -> Fsa {
    let (fsa, _) = grammar_machine(g);
    fsa
}

/// The trimmed machine together with each surviving state's D_k word.
fn grammar_machine(g: &SlGrammar) -> (Fsa, Vec<Vec<Symbol>>) {
    let k = g.k;
    let alphabet = &g.alphabet;
    let words = all_words_upto(alphabet, k - 1);
    let dk = build_dk(alphabet, k);
    let mut sa = Semiautomaton::new(alphabet.clone());
    for q in dk.sa.states() {
        sa.add_state(dk.sa.state_name(q)).expect("distinct");
    }
    let starts = k > 1 || g.contains(&Factor { left: true, body: Vec::new(), right: false });
    let mut finals = Vec::new();
    if starts {
        for (q, u) in words.iter().enumerate() {
            for (a, t) in dk.sa.out(q) {
                let licensed = step_factor(u, a, k).is_none_or(|f| g.contains(&f));
                if licensed {
                    sa.add_transition(q, a, t).expect("deterministic");
                }
            }
            if g.contains(&final_factor(u, k)) {
                finals.push(q);
            }
        }
    }
    let reach = sa.reachable_from([0]);
    let coreach = sa.coreachable_to(finals.iter().copied());
    if !coreach[0] {
        let mut e = Semiautomaton::new(alphabet.clone());
        e.add_state("λ").expect("fresh");
        return (Fsa::new(e, [0], []).expect("valid"), vec![Vec::new()]);
    }
    let keep: Vec<bool> = (0..sa.num_states()).map(|q| reach[q] && coreach[q]).collect();
    let (trimmed, map) = sa.restrict(&keep);
    let fin: Vec<StateId> = finals.iter().filter_map(|&q| map[q]).collect();
    let kept_words: Vec<Vec<Symbol>> =
        words.into_iter().enumerate().filter(|(q, _)| keep[*q]).map(|(_, w)| w).collect();
    (Fsa::new(trimmed, [0], fin).expect("valid"), kept_words)
}

/// All boundary-marked k-factors occurring in words of L(dfa), where `dfa`
/// is trimmed and deterministic with a single initial state.
fn extract_factors(dfa: &Fsa, k: usize) -> BTreeSet<Factor> {
    let sa = &dfa.sa;
    let mut out = BTreeSet::new();
    let Some(&q0) = dfa.initial.iter().next() else {
        return out;
    };
    if dfa.finals.is_empty() {
        return out;
    }

    // Paths of exactly `len` symbols from `q`, reported with their end state.
    fn walk(
        sa: &Semiautomaton,
        q: StateId,
        len: usize,
        path: &mut Vec<Symbol>,
        visit: &mut dyn FnMut(&[Symbol], StateId),
    ) {
        if path.len() == len {
            visit(path, q);
            return;
        }
        for (s, t) in sa.out(q) {
            path.push(s);
            walk(sa, t, len, path, visit);
            path.pop();
        }
    }

    // Whole words short enough to be a single factor.
    if k >= 2 {
        for len in 0..=k - 2 {
            walk(sa, q0, len, &mut Vec::new(), &mut |w, end| {
                if dfa.finals.contains(&end) {
                    out.insert(Factor { left: true, body: w.to_vec(), right: true });
                }
            });
        }
    }
    // Every path in a trimmed automaton extends to an accepted word.
    walk(sa, q0, k - 1, &mut Vec::new(), &mut |w, _| {
        out.insert(Factor { left: true, body: w.to_vec(), right: false });
    });
    for q in sa.states() {
        walk(sa, q, k, &mut Vec::new(), &mut |w, _| {
            out.insert(Factor::interior(w.to_vec()));
        });
        walk(sa, q, k - 1, &mut Vec::new(), &mut |w, end| {
            if dfa.finals.contains(&end) {
                out.insert(Factor { left: false, body: w.to_vec(), right: true });
            }
        });
    }
    out
}

/// The grammar of all k-factors realized by words of L(fsa).
pub fn factors_of_language(fsa: &Fsa, k: usize) -> Result<SlGrammar, InferenceError> {
    let c = fsa.minimize();
    SlGrammar::new(fsa.alphabet().clone(), k, extract_factors(&c, k))
}

/// Upper bound on the least `k` for which L(fsa) could be SL_k: one more
/// than the deepest level of an accepting state of the canonical machine.
pub fn sl_bound(fsa: &Fsa) -> usize {
    bound_of(&fsa.minimize())
}

fn bound_of(c: &Fsa) -> usize {
    let levels = c.levels();
    c.finals.iter().filter_map(|&q| levels.get(q)).max().unwrap_or(0) + 1
}

/// The least `k` such that L(fsa) is SL_k, or `None` if L(fsa) is not
/// strictly local. The empty language is reported as SL_1.
pub fn is_strictly_local(fsa: &Fsa) -> Result<Option<usize>, InferenceError> {
    let c = fsa.minimize();
    if c.finals.is_empty() {
        return Ok(Some(1));
    }
    for k in 1..=bound_of(&c) {
        let g = SlGrammar::new(c.alphabet().clone(), k, extract_factors(&c, k))?;
        if grammar_to_fsa(&g).language_equivalent(&c)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// A characteristic sample for `g`: shortest witnesses (ties broken by
/// symbol order) covering every useful factor, plus the factors of `g`
/// no word of L(g) uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacteristicSample {
    pub words: Vec<Vec<Symbol>>,
    pub useless: BTreeSet<Factor>,
}

pub fn characteristic_sample(g: &SlGrammar) -> CharacteristicSample {
    let k = g.k;
    let (fsa, words) = grammar_machine(g);
    let sa = &fsa.sa;
    let n = sa.num_states();
    let mut sample: BTreeSet<(usize, Vec<Symbol>)> = BTreeSet::new();
    let mut used: BTreeSet<Factor> = BTreeSet::new();
    if fsa.finals.is_empty() {
        return CharacteristicSample { words: Vec::new(), useless: g.factors.clone() };
    }

    // Shortest prefix reaching each state (BFS from the initial state).
    let mut prefix: Vec<Option<Vec<Symbol>>> = vec![None; n];
    prefix[0] = Some(Vec::new());
    let mut queue = VecDeque::from([0]);
    while let Some(q) = queue.pop_front() {
        for (s, t) in sa.out(q) {
            if prefix[t].is_none() {
                let mut p = prefix[q].clone().expect("visited");
                p.push(s);
                prefix[t] = Some(p);
                queue.push_back(t);
            }
        }
    }
    // Shortest suffix to acceptance from each state: iterate by length so
    // that ties resolve to the smallest symbol sequence.
    let mut suffix: Vec<Option<Vec<Symbol>>> = vec![None; n];
    for &f in &fsa.finals {
        suffix[f] = Some(Vec::new());
    }
    loop {
        let mut next = suffix.clone();
        let mut changed = false;
        for q in sa.states() {
            if suffix[q].is_some() {
                continue;
            }
            let best = sa
                .out(q)
                .filter_map(|(s, t)| {
                    suffix[t].as_ref().map(|w| {
                        let mut v = vec![s];
                        v.extend(w.iter().copied());
                        v
                    })
                })
                .min();
            if best.is_some() {
                next[q] = best;
                changed = true;
            }
        }
        suffix = next;
        if !changed {
            break;
        }
    }

    let mut add = |w: Vec<Symbol>| {
        used.extend(k_factors(&w, k, true));
        sample.insert((w.len(), w));
    };
    for q in sa.states() {
        let pre = prefix[q].clone().expect("trimmed");
        if fsa.finals.contains(&q) {
            add(pre.clone());
        }
        for (s, t) in sa.out(q) {
            if step_factor(&words[q], s, k).is_some() {
                let mut w = pre.clone();
                w.push(s);
                w.extend(suffix[t].clone().expect("trimmed"));
                add(w);
            }
        }
    }
    let useless = g.factors.difference(&used).cloned().collect();
    CharacteristicSample { words: sample.into_iter().map(|(_, w)| w).collect(), useless }
}
