use adversynth::adaptive::{run_repeated, AdversaryKind, AgentKind, RunConfig, World};
use adversynth::casestudy::{build_scenario, Regime};
use adversynth::inference::{
    characteristic_sample, grammar_to_fsa, k_factors, LearnerState, PresentationBuffer, PresentationItem, SlGrammar,
};
use adversynth::weaksim::{is_weak_simulation, largest_weak_simulation, CompositeMode, Relation, SilentSplit};
use adversynth::{Alphabet, Fsa, Semiautomaton, Symbol};
use proptest::prelude::*;

const SYMS: [&str; 3] = ["a", "b", "c"];

fn alphabet() -> Alphabet {
    Alphabet::new(SYMS).unwrap()
}

/// Deterministic machines with partial transitions and one or two initial states.
fn arb_fsa() -> impl Strategy<Value = Fsa> {
    (1usize..8).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(prop::option::of(0..n), n * SYMS.len()),
            prop::collection::btree_set(0..n, 1..=2),
            prop::collection::btree_set(0..n, 0..=n),
        )
            .prop_map(|(n, table, initial, finals)| {
                let mut sa = Semiautomaton::new(alphabet());
                for q in 0..n {
                    sa.add_state(format!("q{q}")).unwrap();
                }
                for (i, t) in table.into_iter().enumerate() {
                    if let Some(t) = t {
                        sa.add_transition(i / SYMS.len(), Symbol::new(i % SYMS.len()), t).unwrap();
                    }
                }
                Fsa::new(sa, initial, finals).unwrap()
            })
    })
}

fn arb_word() -> impl Strategy<Value = Vec<Symbol>> {
    prop::collection::vec((0..SYMS.len()).prop_map(Symbol::new), 0..9)
}

fn arb_grammar() -> impl Strategy<Value = SlGrammar> {
    (1usize..=3, prop::collection::vec(arb_word(), 0..6)).prop_map(|(k, words)| {
        let mut l = LearnerState::new(alphabet(), k).unwrap();
        for w in words {
            l.absorb(&PresentationItem::Word(w)).unwrap();
        }
        l.grammar
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minimization_keeps_language(m in arb_fsa(), words in prop::collection::vec(arb_word(), 20)) {
        let min = m.minimize();
        for w in &words {
            prop_assert_eq!(m.accepts(w), min.accepts(w));
        }
        prop_assert!(min.language_equivalent(&m).unwrap());
        prop_assert!(min.sa.num_states() <= m.determinize().sa.num_states().max(1));
    }

    #[test]
    fn minimization_is_canonical(m in arb_fsa()) {
        let once = m.minimize();
        let twice = once.minimize();
        prop_assert_eq!(once.to_json(), twice.to_json());
        prop_assert_eq!(m.determinize().minimize().to_json(), once.to_json());
    }

    #[test]
    fn witness_separates(a in arb_fsa(), b in arb_fsa()) {
        match a.distinguishing_word(&b).unwrap() {
            Some(w) => prop_assert_ne!(a.accepts(&w), b.accepts(&w)),
            None => prop_assert!(a.minimize().to_json() == b.minimize().to_json()),
        }
    }

    #[test]
    fn learner_accepts_what_it_saw(k in 1usize..=4, words in prop::collection::vec(arb_word(), 1..6)) {
        let mut l = LearnerState::new(alphabet(), k).unwrap();
        let mut before = l.grammar.factors().len();
        for w in &words {
            l.absorb(&PresentationItem::Word(w.clone())).unwrap();
            prop_assert!(l.grammar.factors().len() >= before);
            before = l.grammar.factors().len();
        }
        let fsa = grammar_to_fsa(&l.grammar);
        for w in &words {
            prop_assert!(l.grammar.accepts(w));
            prop_assert!(fsa.accepts(w));
        }
    }

    #[test]
    fn machine_matches_grammar(g in arb_grammar(), words in prop::collection::vec(arb_word(), 20)) {
        let fsa = grammar_to_fsa(&g);
        for w in &words {
            prop_assert_eq!(g.accepts(w), fsa.accepts(w));
        }
    }

    #[test]
    fn sample_identifies(g in arb_grammar()) {
        let sample = characteristic_sample(&g);
        let mut l = LearnerState::new(alphabet(), g.k()).unwrap();
        for w in sample.words.iter().rev() {
            l.absorb(&PresentationItem::Word(w.clone())).unwrap();
        }
        prop_assert!(grammar_to_fsa(&l.grammar).language_equivalent(&grammar_to_fsa(&g)).unwrap());
    }

    #[test]
    fn buffer_streams_word_factors(k in 1usize..=4, w in arb_word()) {
        let mut buf = PresentationBuffer::new(k);
        let mut got: std::collections::BTreeSet<_> = buf.pending_left().into_iter().collect();
        for &s in &w {
            got.extend(buf.push(s));
        }
        got.insert(buf.finish());
        prop_assert_eq!(got, k_factors(&w, k, true));
    }

    #[test]
    fn identity_simulates_itself(m in arb_fsa()) {
        let split = SilentSplit::new(["c"]);
        for mode in [CompositeMode::SilentThenObservable, CompositeMode::Closure] {
            let id = Relation::identity(m.sa.num_states());
            prop_assert!(is_weak_simulation(&id, &m.sa, &m.sa, &split, mode).unwrap());
            let largest = largest_weak_simulation(&m.sa, &m.sa, &split, mode).unwrap().unwrap();
            prop_assert!(largest.pairs.is_superset(&id.pairs));
            prop_assert!(is_weak_simulation(&largest, &m.sa, &m.sa, &split, mode).unwrap());
        }
    }

    #[test]
    fn simulation_composes(a in arb_fsa(), b in arb_fsa(), c in arb_fsa()) {
        let split = SilentSplit::new(["c"]);
        let mode = CompositeMode::Closure;
        let ab = largest_weak_simulation(&a.sa, &b.sa, &split, mode).unwrap();
        let bc = largest_weak_simulation(&b.sa, &c.sa, &split, mode).unwrap();
        if let (Some(ab), Some(bc)) = (ab, bc) {
            prop_assert!(is_weak_simulation(&ab.compose(&bc), &a.sa, &c.sa, &split, mode).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn enabling_moves_never_helps_the_agent(picks in prop::collection::vec((0usize..64, 0usize..16), 1..12)) {
        let sc = build_scenario(Regime::Opposite).unwrap();
        let mut g = sc.scaffold.clone();
        let n2 = g.adversary_names().len();
        let syms: Vec<Symbol> = g.sigma2().symbols().collect();
        let mut attr = g.attractor();
        for (q2, s) in picks {
            g.sw_update(q2 % n2, syms[s % syms.len()]);
            let next = g.attractor();
            for q in 0..g.num_states() {
                prop_assert!(!next.contains(q) || attr.contains(q));
            }
            attr = next;
        }
    }

    #[test]
    fn learning_runs_stay_sound(seed in any::<u64>(), adversary in prop::sample::select(vec![
        AdversaryKind::OptimalDelay, AdversaryKind::UniformRandom, AdversaryKind::Withholding,
    ])) {
        let sc = build_scenario(Regime::Opposite).unwrap();
        let cfg = RunConfig { agent: AgentKind::Learning, adversary, games: 25, seed, ..RunConfig::default() };
        let r = run_repeated(&sc, &cfg).unwrap();
        let mut last = 0.0;
        for rec in &r.records {
            prop_assert!((0.0..=1.0).contains(&rec.discovery_ratio));
            prop_assert!(rec.discovery_ratio >= last);
            last = rec.discovery_ratio;
        }
        for &(q2, s) in r.agent.observations() {
            prop_assert!(sc.true_sw.get(q2, s));
        }
        let world = World::new(&sc);
        prop_assert_eq!(world.discovery_ratio(r.agent.sw()), r.final_discovery_ratio());
    }
}
