//! Strategy synthesis for reachability games against adversaries whose
//! behaviour is learned online as a strictly local language.
//!
//! - [`automata`]: semiautomata, FSAs, minimization and equivalence.
//! - [`inference`]: SL_k factors, grammars and the string-extension learner.
//! - [`game`]: turn-based products, game automata, attractors and strategies.
//! - [`weaksim`]: weak simulation between semiautomata.
//! - [`adaptive`]: the repeated play/learn loop and its metrics.
//! - [`casestudy`]: the four-room, six-door instance.

pub mod adaptive;
pub mod automata;
pub mod casestudy;
pub mod game;
pub mod inference;
pub mod weaksim;

pub use automata::{Alphabet, AutomatonError, Fsa, Semiautomaton, StateId, Symbol};
