//! Weak (observable) simulation between semiautomata.
//!
//! Symbols are split into observable and silent ones. A composite step
//! `q ⇝σ q'` takes exactly one observable `σ` and some silent steps. By
//! default at most one silent step precedes `σ`; [`CompositeMode::Closure`]
//! allows any number of silent steps before and after it.
//!
//! A silent step on the left is matched by staying put or taking silent
//! steps on the right (one step, or the silent closure in closure mode).

use std::collections::{BTreeSet, VecDeque};

use crate::automata::{AutomatonError, Semiautomaton, StateId, Symbol};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CompositeMode {
    /// `τ? σ`
    #[default]
    SilentThenObservable,
    /// `τ* σ τ*`
    Closure,
}

/// Observable/silent partition of an alphabet, by symbol name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SilentSplit {
    silent: BTreeSet<String>,
}

impl SilentSplit {
    pub fn new<I, S>(silent: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SilentSplit { silent: silent.into_iter().map(Into::into).collect() }
    }

    pub fn is_silent(&self, name: &str) -> bool {
        self.silent.contains(name)
    }

    fn mask(&self, sa: &Semiautomaton) -> Vec<bool> {
        sa.alphabet().names().iter().map(|n| self.is_silent(n)).collect()
    }
}

/// Composite σ-successors of `q`. `sigma` must be observable; a silent
/// `sigma` yields the empty set.
pub fn composite_successors(
    sa: &Semiautomaton,
    split: &SilentSplit,
    q: StateId,
    sigma: Symbol,
    mode: CompositeMode,
) -> BTreeSet<StateId> {
    let silent = split.mask(sa);
    composite(sa, &silent, q, sigma, mode)
}

fn silent_step<'a>(sa: &'a Semiautomaton, silent: &[bool], q: StateId) -> impl Iterator<Item = StateId> + 'a {
    let silent = silent.to_vec();
    sa.out(q).filter(move |(s, _)| silent[s.index()]).map(|(_, t)| t)
}

fn silent_closure(sa: &Semiautomaton, silent: &[bool], from: impl IntoIterator<Item = StateId>) -> BTreeSet<StateId> {
    let mut seen: BTreeSet<StateId> = BTreeSet::new();
    let mut queue = VecDeque::new();
    for q in from {
        if seen.insert(q) {
            queue.push_back(q);
        }
    }
    while let Some(q) = queue.pop_front() {
        for t in silent_step(sa, silent, q) {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    seen
}

fn composite(sa: &Semiautomaton, silent: &[bool], q: StateId, sigma: Symbol, mode: CompositeMode) -> BTreeSet<StateId> {
    if silent.get(sigma.index()).copied().unwrap_or(true) {
        return BTreeSet::new();
    }
    match mode {
        CompositeMode::SilentThenObservable => {
            std::iter::once(q).chain(silent_step(sa, silent, q)).filter_map(|p| sa.next(p, sigma)).collect()
        }
        CompositeMode::Closure => {
            let pre = silent_closure(sa, silent, [q]);
            let mid: Vec<StateId> = pre.iter().filter_map(|&p| sa.next(p, sigma)).collect();
            silent_closure(sa, silent, mid)
        }
    }
}

/// States the right side may occupy after matching a silent left step.
fn silent_match(sa: &Semiautomaton, silent: &[bool], q: StateId, mode: CompositeMode) -> BTreeSet<StateId> {
    match mode {
        CompositeMode::SilentThenObservable => std::iter::once(q).chain(silent_step(sa, silent, q)).collect(),
        CompositeMode::Closure => silent_closure(sa, silent, [q]),
    }
}

/// A relation between the states of two semiautomata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub pairs: BTreeSet<(StateId, StateId)>,
}

impl Relation {
    pub fn identity(n: usize) -> Self {
        Relation { pairs: (0..n).map(|q| (q, q)).collect() }
    }

    pub fn full(n1: usize, n2: usize) -> Self {
        Relation { pairs: (0..n1).flat_map(|a| (0..n2).map(move |b| (a, b))).collect() }
    }

    pub fn contains(&self, a: StateId, b: StateId) -> bool {
        self.pairs.contains(&(a, b))
    }

    /// R ; S = {(a, c) : (a, b) ∈ R, (b, c) ∈ S}.
    pub fn compose(&self, other: &Relation) -> Relation {
        let mut pairs = BTreeSet::new();
        for &(a, b) in &self.pairs {
            for &(_, c) in other.pairs.range((b, 0)..=(b, StateId::MAX)) {
                pairs.insert((a, c));
            }
        }
        Relation { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Precomputed step tables for one checking problem.
struct Problem {
    n1: usize,
    n2: usize,
    /// comp1[q1] = list of (observable index, left successors)
    comp1: Vec<Vec<(usize, BTreeSet<StateId>)>>,
    /// comp2[q2][observable index]
    comp2: Vec<Vec<BTreeSet<StateId>>>,
    silent1: Vec<Vec<StateId>>,
    silent2: Vec<BTreeSet<StateId>>,
}

impl Problem {
    fn new(
        a1: &Semiautomaton,
        a2: &Semiautomaton,
        split: &SilentSplit,
        mode: CompositeMode,
    ) -> Result<Self, AutomatonError> {
        let names1: BTreeSet<&String> = a1.alphabet().names().iter().collect();
        let names2: BTreeSet<&String> = a2.alphabet().names().iter().collect();
        if names1 != names2 {
            return Err(AutomatonError::AlphabetMismatch);
        }
        let m1 = split.mask(a1);
        let m2 = split.mask(a2);
        let observable: Vec<(Symbol, Symbol)> = a1
            .alphabet()
            .symbols()
            .filter(|s| !m1[s.index()])
            .map(|s| (s, a2.alphabet().symbol(a1.alphabet().name(s)).expect("same names")))
            .collect();
        let comp1 = a1
            .states()
            .map(|q| {
                observable
                    .iter()
                    .enumerate()
                    .map(|(i, &(s, _))| (i, composite(a1, &m1, q, s, mode)))
                    .filter(|(_, t)| !t.is_empty())
                    .collect()
            })
            .collect();
        let comp2 =
            a2.states().map(|q| observable.iter().map(|&(_, s)| composite(a2, &m2, q, s, mode)).collect()).collect();
        let silent1 = a1.states().map(|q| silent_step(a1, &m1, q).collect()).collect();
        let silent2 = a2.states().map(|q| silent_match(a2, &m2, q, mode)).collect();
        Ok(Problem { n1: a1.num_states(), n2: a2.num_states(), comp1, comp2, silent1, silent2 })
    }

    fn pair_ok(&self, rel: &[bool], q1: StateId, q2: StateId) -> bool {
        let related = |a: StateId, b: StateId| rel[a * self.n2 + b];
        for (i, targets) in &self.comp1[q1] {
            for &t1 in targets {
                if !self.comp2[q2][*i].iter().any(|&t2| related(t1, t2)) {
                    return false;
                }
            }
        }
        for &t1 in &self.silent1[q1] {
            if !self.silent2[q2].iter().any(|&t2| related(t1, t2)) {
                return false;
            }
        }
        true
    }

    fn total(&self, rel: &[bool]) -> bool {
        (0..self.n1).all(|a| (0..self.n2).any(|b| rel[a * self.n2 + b]))
    }
}

/// Checks that `r` is total on the left and every left step is matched on
/// the right into a related pair.
pub fn is_weak_simulation(
    r: &Relation,
    a1: &Semiautomaton,
    a2: &Semiautomaton,
    split: &SilentSplit,
    mode: CompositeMode,
) -> Result<bool, AutomatonError> {
    let p = Problem::new(a1, a2, split, mode)?;
    if r.pairs.iter().any(|&(a, b)| a >= p.n1 || b >= p.n2) {
        return Ok(false);
    }
    let mut rel = vec![false; p.n1 * p.n2];
    for &(a, b) in &r.pairs {
        rel[a * p.n2 + b] = true;
    }
    Ok(p.total(&rel) && r.pairs.iter().all(|&(a, b)| p.pair_ok(&rel, a, b)))
}

/// The greatest weak simulation, if it is total.
pub fn largest_weak_simulation(
    a1: &Semiautomaton,
    a2: &Semiautomaton,
    split: &SilentSplit,
    mode: CompositeMode,
) -> Result<Option<Relation>, AutomatonError> {
    let p = Problem::new(a1, a2, split, mode)?;
    let mut rel = vec![true; p.n1 * p.n2];
    loop {
        let mut changed = false;
        for a in 0..p.n1 {
            for b in 0..p.n2 {
                if rel[a * p.n2 + b] && !p.pair_ok(&rel, a, b) {
                    rel[a * p.n2 + b] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if !p.total(&rel) {
        return Ok(None);
    }
    let pairs = (0..p.n1).flat_map(|a| (0..p.n2).map(move |b| (a, b))).filter(|&(a, b)| rel[a * p.n2 + b]).collect();
    Ok(Some(Relation { pairs }))
}

/// True iff no path from `initial` (all states when `None`) takes two
/// silent steps in a row.
pub fn check_alternation(sa: &Semiautomaton, split: &SilentSplit, initial: Option<&[StateId]>) -> bool {
    let silent = split.mask(sa);
    let reach = match initial {
        Some(init) => sa.reachable_from(init.iter().copied()),
        None => vec![true; sa.num_states()],
    };
    sa.states()
        .filter(|&q| reach[q])
        .all(|q| silent_step(sa, &silent, q).all(|t| silent_step(sa, &silent, t).next().is_none()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::Alphabet;

    fn sa(states: usize, edges: &[(usize, &str, usize)]) -> Semiautomaton {
        let mut m = Semiautomaton::new(Alphabet::new(["a", "b", "t", "u"]).unwrap());
        for i in 0..states {
            m.add_state(format!("s{i}")).unwrap();
        }
        for &(f, l, t) in edges {
            let s = m.alphabet().lookup(l).unwrap();
            m.add_transition(f, s, t).unwrap();
        }
        m
    }

    fn split() -> SilentSplit {
        SilentSplit::new(["t", "u"])
    }

    fn sym(m: &Semiautomaton, l: &str) -> Symbol {
        m.alphabet().lookup(l).unwrap()
    }

    #[test]
    fn composite_without_silent() {
        let m = sa(2, &[(0, "a", 1)]);
        let none = SilentSplit::new(Vec::<String>::new());
        assert_eq!(composite_successors(&m, &none, 0, sym(&m, "a"), CompositeMode::default()), BTreeSet::from([1]));
    }

    #[test]
    fn composite_silent_then_observable() {
        let m = sa(3, &[(0, "t", 2), (2, "a", 1)]);
        assert_eq!(composite_successors(&m, &split(), 0, sym(&m, "a"), CompositeMode::default()), BTreeSet::from([1]));
    }

    #[test]
    fn composite_two_silent_paths() {
        // 0 -t-> 1 -a-> 3, 0 -u-> 2 -a-> 4
        let m = sa(5, &[(0, "t", 1), (0, "u", 2), (1, "a", 3), (2, "a", 4)]);
        let got = composite_successors(&m, &split(), 0, sym(&m, "a"), CompositeMode::default());
        assert_eq!(got, BTreeSet::from([3, 4]));
        // closure mode follows trailing silent steps too
        let m = sa(5, &[(0, "a", 1), (1, "t", 2), (2, "u", 3)]);
        let got = composite_successors(&m, &split(), 0, sym(&m, "a"), CompositeMode::Closure);
        assert_eq!(got, BTreeSet::from([1, 2, 3]));
        let got = composite_successors(&m, &split(), 0, sym(&m, "a"), CompositeMode::default());
        assert_eq!(got, BTreeSet::from([1]));
    }

    #[test]
    fn identity_and_richer_right() {
        let a1 = sa(4, &[(0, "a", 1), (1, "t", 2), (2, "b", 3)]);
        let id = Relation::identity(4);
        assert!(is_weak_simulation(&id, &a1, &a1, &split(), CompositeMode::default()).unwrap());
        let a2 = sa(4, &[(0, "a", 1), (1, "t", 2), (2, "b", 3), (3, "a", 0), (0, "b", 0)]);
        let largest = largest_weak_simulation(&a1, &a2, &split(), CompositeMode::default()).unwrap().unwrap();
        assert!(largest.pairs.is_superset(&id.pairs));
        assert!(is_weak_simulation(&id, &a1, &a2, &split(), CompositeMode::default()).unwrap());
        let mut partial = id.clone();
        partial.pairs.remove(&(3, 3));
        assert!(!is_weak_simulation(&partial, &a1, &a2, &split(), CompositeMode::default()).unwrap());
    }

    #[test]
    fn completed_right_side_full_relation() {
        let a1 = sa(4, &[(0, "a", 1), (1, "b", 2), (2, "a", 3), (3, "b", 0)]);
        let a2 = sa(
            4,
            &[(0, "a", 1), (1, "b", 2), (2, "a", 3), (3, "b", 0), (0, "b", 0), (1, "a", 0), (2, "b", 0), (3, "a", 0)],
        );
        let full = Relation::full(4, 4);
        assert!(is_weak_simulation(&full, &a1, &a2, &split(), CompositeMode::default()).unwrap());
        assert!(!is_weak_simulation(&full, &a2, &a1, &split(), CompositeMode::default()).unwrap());
    }

    #[test]
    fn missing_move_means_none() {
        let a1 = sa(2, &[(0, "b", 1)]);
        let a2 = sa(2, &[(0, "a", 1)]);
        assert_eq!(largest_weak_simulation(&a1, &a2, &split(), CompositeMode::default()).unwrap(), None);
    }

    #[test]
    fn alternation() {
        let m = sa(3, &[(0, "a", 1), (1, "b", 2)]);
        assert!(check_alternation(&m, &split(), None));
        let m = sa(3, &[(0, "t", 1), (1, "u", 2)]);
        assert!(!check_alternation(&m, &split(), Some(&[0])));
        // the double-silent path is unreachable from 2
        assert!(check_alternation(&m, &split(), Some(&[2])));
        let m = sa(4, &[(0, "t", 1), (1, "a", 2), (2, "u", 3), (3, "b", 0)]);
        assert!(check_alternation(&m, &split(), Some(&[0])));
    }

    #[test]
    fn alphabet_mismatch() {
        let a1 = sa(1, &[]);
        let mut a2 = Semiautomaton::new(Alphabet::new(["a"]).unwrap());
        a2.add_state("x").unwrap();
        assert!(largest_weak_simulation(&a1, &a2, &split(), CompositeMode::default()).is_err());
    }
}
