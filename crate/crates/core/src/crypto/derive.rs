//! Dolev-Yao derivability: analysis closure followed by synthesis.

use std::collections::BTreeSet;

use super::term::Term;

/// Terms every adversary starts with: principal names, tags and public keys.
pub fn in_basis(t: &Term) -> bool {
    match t {
        Term::Principal(_) | Term::Tag(_) => true,
        Term::PubKey(a) => matches!(**a, Term::Principal(_)),
        _ => false,
    }
}

/// A set of known terms closed under projection and decryption.
#[derive(Clone, Debug, Default)]
pub struct Knowledge {
    atoms: BTreeSet<Term>,
}

impl Knowledge {
    pub fn new<'a>(known: impl IntoIterator<Item = &'a Term>) -> Self {
        let mut k = Knowledge::default();
        for t in known {
            k.absorb(t);
        }
        k.close();
        k
    }

    fn absorb(&mut self, t: &Term) {
        match t {
            Term::Seq(items) => items.iter().for_each(|i| self.absorb(i)),
            t => {
                self.atoms.insert(t.clone());
            }
        }
    }

    fn close(&mut self) {
        loop {
            let opened: Vec<Term> = self
                .atoms
                .iter()
                .filter_map(|t| match t {
                    Term::Enc(body, k) => {
                        let inv = k.inverse()?;
                        let new = body.iter().any(|b| !self.atoms.contains(b));
                        (new && self.synth(&inv)).then(|| Term::seq(body.iter().cloned()))
                    }
                    _ => None,
                })
                .collect();
            if opened.is_empty() {
                return;
            }
            for t in &opened {
                self.absorb(t);
            }
        }
    }

    /// Whether `goal` can be built from the closed set.
    pub fn synth(&self, goal: &Term) -> bool {
        if self.atoms.contains(goal) || in_basis(goal) {
            return true;
        }
        match goal {
            Term::Seq(items) => items.iter().all(|i| self.synth(i)),
            Term::Enc(body, k) => body.iter().all(|i| self.synth(i)) && self.synth(k),
            _ => false,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.atoms.iter()
    }
}

/// Whether `goal` is derivable from `known` plus the adversary basis.
pub fn derivable(known: &[Term], goal: &Term) -> bool {
    Knowledge::new(known).synth(goal)
}
