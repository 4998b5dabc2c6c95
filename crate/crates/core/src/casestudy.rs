//! The four-room apartment: an agent moves between rooms while an adversary
//! keeps exactly two of the six doors closed, reopening one and closing
//! another on each of its turns. The agent must visit every room.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::automata::{Alphabet, Fsa, Semiautomaton, StateId, Symbol};
use crate::game::{
    game_automaton, turn_based_product, GameAutomaton, GameError, InteractionFunction, PlayerSpec, Product,
    SwitchingFunction, Turn, SILENT,
};
use crate::inference::build_dk;

pub const ROOMS: [u8; 4] = [1, 2, 3, 4];
pub const DOORS: [char; 6] = ['a', 'b', 'c', 'd', 'e', 'f'];

/// Which pair of rooms each door connects, indexed by door `a..f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DoorMap(pub [(u8, u8); 6]);

impl DoorMap {
    /// The apartment layout used throughout.
    pub const APARTMENT: DoorMap = DoorMap([(1, 2), (1, 3), (2, 3), (3, 4), (1, 4), (2, 4)]);

    pub fn rooms_of(&self, door: char) -> (u8, u8) {
        self.0[door as usize - 'a' as usize]
    }

    /// The door between rooms `r` and `j`, if any.
    pub fn door_between(&self, r: u8, j: u8) -> Option<char> {
        let key = (r.min(j), r.max(j));
        self.0.iter().position(|&(x, y)| (x.min(y), x.max(y)) == key).map(|i| DOORS[i])
    }

    /// Every assignment keeping a, b and f fixed and placing c, d, e on the
    /// remaining three room pairs.
    pub fn candidates() -> Vec<DoorMap> {
        let rest = [(1, 4), (2, 3), (3, 4)];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms.iter().map(|p| DoorMap([(1, 2), (1, 3), rest[p[0]], rest[p[1]], rest[p[2]], (2, 4)])).collect()
    }
}

impl fmt::Display for DoorMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            DOORS.iter().zip(self.0.iter()).map(|(d, (x, y))| format!("{d}={{{x},{y}}}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Which pairs of doors the adversary may keep closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Opposite,
    Adjacent,
    General,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Opposite, Regime::Adjacent, Regime::General];

    pub fn pairs(self) -> Vec<&'static str> {
        match self {
            Regime::Opposite => vec!["ad", "ae", "af", "bf", "ce", "ef"],
            Regime::Adjacent => vec!["ab", "ac", "bc", "bd", "be", "cd", "cf", "de", "df"],
            Regime::General => {
                vec!["ab", "ac", "ad", "ae", "af", "bc", "bd", "be", "bf", "cd", "ce", "cf", "de", "df", "ef"]
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Opposite => "opposite",
            Regime::Adjacent => "adjacent",
            Regime::General => "general",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "opposite" => Ok(Regime::Opposite),
            "adjacent" => Ok(Regime::Adjacent),
            "general" => Ok(Regime::General),
            other => Err(format!("unknown regime '{other}' (expected opposite, adjacent or general)")),
        }
    }
}

fn shares_one_door(p: &str, q: &str) -> bool {
    p.chars().filter(|c| q.contains(*c)).count() == 1
}

/// Rooms as states; moving to room j is the action "j". Every room is a
/// legitimate start; the agent cannot pass.
pub fn build_agent_sa() -> PlayerSpec {
    let names: Vec<String> = ROOMS.iter().map(|r| r.to_string()).collect();
    let mut sa = Semiautomaton::new(Alphabet::new(names.clone()).expect("distinct"));
    for n in &names {
        sa.add_state(n.clone()).expect("distinct");
    }
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                sa.add_transition(i, Symbol::new(j), j).expect("deterministic");
            }
        }
    }
    PlayerSpec::new(sa, 0..4, None).expect("valid agent")
}

/// Closed door pairs as states; the adversary moves to any pair sharing
/// exactly one door with the current one, or passes.
pub fn build_adversary_sa(regime: Regime) -> PlayerSpec {
    let pairs = regime.pairs();
    let mut names: Vec<String> = pairs.iter().map(|p| p.to_string()).collect();
    names.push(SILENT.to_string());
    let mut sa = Semiautomaton::new(Alphabet::new(names).expect("distinct"));
    for p in &pairs {
        sa.add_state(*p).expect("distinct");
    }
    let eps = Symbol::new(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        for (j, q) in pairs.iter().enumerate() {
            if shares_one_door(p, q) {
                sa.add_transition(i, Symbol::new(j), j).expect("deterministic");
            }
        }
        sa.add_transition(i, eps, i).expect("deterministic");
    }
    PlayerSpec::new(sa, 0..pairs.len(), Some(SILENT)).expect("valid adversary")
}

fn subset_name(mask: u8) -> String {
    ROOMS.iter().filter(|&&r| mask & (1 << (r - 1)) != 0).map(|r| r.to_string()).collect()
}

/// Visited-rooms tracker over Λ = rooms ∪ `sigma2`. States are the
/// nonempty room sets named by sorted digits, ordered by size then name;
/// the singletons are initial and `1234` is final.
pub fn build_spec_fsa(sigma2: &Alphabet) -> Fsa {
    let mut names: Vec<String> = ROOMS.iter().map(|r| r.to_string()).collect();
    names.extend(sigma2.names().iter().cloned());
    let mut sa = Semiautomaton::new(Alphabet::new(names).expect("disjoint alphabets"));
    let mut masks: Vec<u8> = (1u8..16).collect();
    masks.sort_by_key(|m| (m.count_ones(), subset_name(*m)));
    let mut id = [0usize; 16];
    for &m in &masks {
        id[m as usize] = sa.add_state(subset_name(m)).expect("distinct");
    }
    for &m in &masks {
        for (j, _) in ROOMS.iter().enumerate() {
            let to = m | (1 << j);
            sa.add_transition(id[m as usize], Symbol::new(j), id[to as usize]).expect("deterministic");
        }
        for s in 0..sigma2.len() {
            sa.add_transition(id[m as usize], Symbol::new(4 + s), id[m as usize]).expect("deterministic");
        }
    }
    let initial: Vec<StateId> = (0..4).map(|j| id[1usize << j]).collect();
    Fsa::new(sa, initial, [id[15]]).expect("valid")
}

/// U₂ for an adversary whose state names are door pairs: moving from room
/// r to room j is forbidden while the door between them is closed. States
/// not naming a door pair (such as `λ`) forbid nothing.
pub fn build_u2(doors: &DoorMap, adversary: &PlayerSpec, agent: &PlayerSpec) -> InteractionFunction {
    let mut u2 = InteractionFunction::new();
    for q2 in adversary.sa.states() {
        let closed = adversary.sa.state_name(q2);
        if closed.chars().count() != 2 || !closed.chars().all(|c| DOORS.contains(&c)) {
            continue;
        }
        for q1 in agent.sa.states() {
            let r: u8 = agent.sa.state_name(q1).parse().expect("room");
            for (j, &room) in ROOMS.iter().enumerate() {
                if room != r && doors.door_between(r, room).is_some_and(|d| closed.contains(d)) {
                    u2.forbid(q2, q1, Symbol::new(j));
                }
            }
        }
    }
    u2
}

/// Links an initial product state to the singleton set of the agent's room.
fn room_link(spec: &Fsa) -> impl Fn(&Product, StateId) -> Option<StateId> + '_ {
    move |p, q| {
        let room = p.agent.sa.state_name(p.states[q].q1);
        spec.sa.state(room).filter(|s| spec.initial.contains(s))
    }
}

/// The assembled case study.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub regime: Regime,
    pub doors: DoorMap,
    /// Game over the true adversary.
    pub game: GameAutomaton,
    /// Game over the learning scaffold (all pair sequences, plus ε), with
    /// every non-silent adversary move switched off.
    pub scaffold: GameAutomaton,
    /// The switching function under which `scaffold` behaves as `game`.
    pub true_sw: SwitchingFunction,
    /// Adversary model underlying `scaffold`: SL_k scaffold plus ε loops.
    pub scaffold_adversary: Semiautomaton,
    /// Locality of the adversary's behaviour, known to the agent.
    pub k: usize,
}

impl Scenario {
    /// The scaffold with the true switching function.
    pub fn true_scaffold(&self) -> GameAutomaton {
        let mut g = self.scaffold.clone();
        g.set_sw(self.true_sw.clone());
        g
    }

    /// Number of true non-silent adversary transitions between door pairs.
    pub fn true_transition_count(&self) -> usize {
        let lambda = self.scaffold.adversary_names().iter().position(|n| n == "λ");
        let silent = self.scaffold.silent();
        (0..self.scaffold.adversary_names().len())
            .filter(|&q| Some(q) != lambda)
            .map(|q| self.scaffold.sigma2().symbols().filter(|&s| Some(s) != silent && self.true_sw.get(q, s)).count())
            .sum()
    }
}

pub fn build_scenario(regime: Regime) -> Result<Scenario, GameError> {
    build_scenario_with(regime, DoorMap::APARTMENT)
}

pub fn build_scenario_with(regime: Regime, doors: DoorMap) -> Result<Scenario, GameError> {
    let agent = build_agent_sa();
    let adversary = build_adversary_sa(regime);
    let spec = build_spec_fsa(adversary.sa.alphabet());
    let u1 = InteractionFunction::new();
    let u2 = build_u2(&doors, &adversary, &agent);
    let product = turn_based_product(&agent, &adversary, &u1, &u2)?;
    let game = game_automaton(&product, &spec, room_link(&spec))?;

    let pairs = Alphabet::new(regime.pairs())?;
    let dk = build_dk(&pairs, 2).sa.with_silent_loops(SILENT)?;
    debug_assert_eq!(dk.alphabet().names(), adversary.sa.alphabet().names());
    let legit: Vec<StateId> = dk.states().filter(|&q| dk.state_name(q) != "λ").collect();
    let scaffold_adv = PlayerSpec::new(dk.clone(), legit, Some(SILENT))?;
    let u2s = build_u2(&doors, &scaffold_adv, &agent);
    let sp = turn_based_product(&agent, &scaffold_adv, &u1, &u2s)?;
    let mut scaffold = game_automaton(&sp, &spec, room_link(&spec))?;
    let silent = scaffold.silent();
    let n2 = scaffold.adversary_names().len();
    let n_sym = scaffold.sigma2().len();
    scaffold.set_sw(SwitchingFunction::all_off(n2, n_sym, silent));

    let mut true_sw = SwitchingFunction::all_off(n2, n_sym, silent);
    for q2 in 0..n2 {
        let from = scaffold.adversary_names()[q2].clone();
        for s in scaffold.sigma2().symbols() {
            if Some(s) == silent {
                continue;
            }
            let to = scaffold.sigma2().name(s);
            if from == "λ" || shares_one_door(&from, to) {
                true_sw.enable(q2, s);
            }
        }
    }
    Ok(Scenario { regime, doors, game, scaffold, true_sw, scaffold_adversary: dk, k: 2 })
}

/// Facts a door map must reproduce in the Opposite regime: the successors of
/// (1,ad,𝟏), the known seven-move winning play, and the six winning initials.
pub fn door_map_consistent(doors: DoorMap) -> bool {
    let Ok(sc) = build_scenario_with(Regime::Opposite, doors) else {
        return false;
    };
    let g = &sc.game;
    let attr = g.attractor();
    let names: BTreeSet<String> = g.winning_initials(&attr).iter().map(|&q| g.state_name(q)).collect();
    let expected: BTreeSet<String> = WINNING_INITIALS_OPPOSITE.iter().map(|s| s.to_string()).collect();
    if names != expected {
        return false;
    }
    let Some(start) = g.find("1", "ad", Turn::Agent, "1") else {
        return false;
    };
    let moves: BTreeSet<&str> = g.successors(start).map(|(a, _)| g.action_name(a)).collect();
    if moves != BTreeSet::from(["3", "4"]) {
        return false;
    }
    replay(g, start, &WINNING_PLAY).is_some_and(|end| g.is_final(end))
}

/// Runs `play` (action names) from `start`, returning the final state.
pub fn replay(g: &GameAutomaton, start: StateId, play: &[&str]) -> Option<StateId> {
    let mut q = start;
    for name in play {
        let (_, t) = g.successors(q).find(|(a, _)| g.action_name(*a) == *name)?;
        q = t;
    }
    Some(q)
}

/// All candidate door maps consistent with the known facts.
pub fn search_door_maps() -> Vec<DoorMap> {
    DoorMap::candidates().into_iter().filter(|&d| door_map_consistent(d)).collect()
}

/// The six initial states from which the agent can force a win (Opposite).
pub const WINNING_INITIALS_OPPOSITE: [&str; 6] =
    ["(1,ad,1,1)", "(1,ce,1,1)", "(2,ad,1,2)", "(2,bf,1,2)", "(4,ce,1,4)", "(4,bf,1,4)"];

/// A seven-move winning play from (1,ad,1,1).
pub const WINNING_PLAY: [&str; 7] = ["4", "ae", "2", "ce", "1", "ef", "3"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Action;

    #[test]
    fn agent_sa_shape() {
        let a = build_agent_sa();
        assert_eq!(a.sa.num_transitions(), 12);
        let names: Vec<&str> = a.sa.enabled(0).unwrap().iter().map(|&s| a.sa.alphabet().name(s)).collect();
        assert_eq!(names, ["2", "3", "4"]);
        for q in a.sa.states() {
            assert!(a.sa.next(q, Symbol::new(q)).is_none());
        }
        assert_eq!(a.sa.to_dot().matches("->").count(), 12);
    }

    #[test]
    fn adversary_sa_shape() {
        let o = build_adversary_sa(Regime::Opposite);
        assert_eq!(o.sa.num_states(), 6);
        let ad = o.sa.state("ad").unwrap();
        let al = o.sa.alphabet();
        assert_eq!(o.sa.next(ad, al.symbol("af").unwrap()), o.sa.state("af"));
        assert!(o.sa.next(ad, al.symbol("ef").unwrap()).is_none());
        let g = build_adversary_sa(Regime::General);
        assert_eq!(g.sa.num_states(), 15);
        for q in g.sa.states() {
            // 8 neighbours plus ε
            assert_eq!(g.sa.enabled(q).unwrap().len(), 9);
        }
    }

    #[test]
    fn spec_tracks_rooms() {
        let sigma2 = build_adversary_sa(Regime::Opposite).sa.alphabet().clone();
        let s = build_spec_fsa(&sigma2);
        assert_eq!(s.sa.num_states(), 15);
        let one = s.sa.state("1").unwrap();
        let three = s.alphabet().symbol("3").unwrap();
        assert_eq!(s.sa.next(one, three), s.sa.state("13"));
        let s123 = s.sa.state("123").unwrap();
        let four = s.alphabet().symbol("4").unwrap();
        let full = s.sa.next(s123, four).unwrap();
        assert!(s.is_final(full));
        for sym in ["ad", "ef", SILENT] {
            let x = s.alphabet().symbol(sym).unwrap();
            assert_eq!(s.sa.next(s123, x), Some(s123));
        }
    }

    #[test]
    fn interaction_constraints() {
        let agent = build_agent_sa();
        let gen = build_adversary_sa(Regime::General);
        let u2 = build_u2(&DoorMap::APARTMENT, &gen, &agent);
        let ab = gen.sa.state("ab").unwrap();
        let got: Vec<Symbol> = u2.forbidden(ab, 0).collect();
        assert_eq!(got, vec![Symbol::new(1), Symbol::new(2)]);
        let ad = gen.sa.state("ad").unwrap();
        assert_eq!(u2.forbidden(ad, 0).collect::<Vec<_>>(), vec![Symbol::new(1)]);
        // cd touches none of room 1's doors
        let cd = gen.sa.state("cd").unwrap();
        assert_eq!(u2.forbidden(cd, 0).count(), 0);
    }

    #[test]
    fn product_fragment() {
        let sc = build_scenario(Regime::Opposite).unwrap();
        let g = &sc.game;
        let q = g.find("1", "ad", Turn::Agent, "1").unwrap();
        let succ: Vec<String> = g.successors(q).map(|(_, t)| g.state_name(t)).collect();
        assert_eq!(succ, ["(3,ad,0,13)", "(4,ad,0,14)"]);
        assert_eq!(g.initial().len(), 24);
        let bare: BTreeSet<(StateId, StateId, Turn)> = g.states().iter().map(|s| (s.q1, s.q2, s.turn)).collect();
        assert_eq!(bare.len(), 48);
    }

    #[test]
    fn unique_door_map() {
        assert_eq!(search_door_maps(), vec![DoorMap::APARTMENT]);
    }

    #[test]
    fn scaffold_with_true_sw_is_the_true_game() {
        for regime in Regime::ALL {
            let sc = build_scenario(regime).unwrap();
            let edges = |g: &GameAutomaton| -> BTreeSet<(String, String, String)> {
                let reach = g.reachable();
                (0..g.num_states())
                    .filter(|&q| reach[q])
                    .flat_map(|q| {
                        g.successors(q)
                            .map(move |(a, t)| (g.state_name(q), g.action_name(a).to_string(), g.state_name(t)))
                            .collect::<Vec<_>>()
                    })
                    .collect()
            };
            assert_eq!(edges(&sc.true_scaffold()), edges(&sc.game), "{regime}");
            let finals = |g: &GameAutomaton| -> BTreeSet<String> {
                let reach = g.reachable();
                g.finals().filter(|&q| reach[q]).map(|q| g.state_name(q)).collect()
            };
            assert_eq!(finals(&sc.true_scaffold()), finals(&sc.game));
        }
        let sc = build_scenario(Regime::Opposite).unwrap();
        assert_eq!(sc.true_transition_count(), 18);
    }

    #[test]
    fn scaffold_starts_naive() {
        let sc = build_scenario(Regime::Opposite).unwrap();
        let g = &sc.scaffold;
        let q = g.find("1", "ad", Turn::Adversary, "1").unwrap();
        let acts: Vec<Action> = g.successors(q).map(|(a, _)| a).collect();
        assert_eq!(acts.len(), 1);
        assert_eq!(g.action_name(acts[0]), SILENT);
    }
}
