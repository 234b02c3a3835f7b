//! Sorted terms and their evaluation in possibly partial structures.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::signature::{FunId, Signature, SortId};
use crate::structure::{Elem, Structure};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub sort: SortId,
}

impl Var {
    pub fn new(name: impl Into<String>, sort: SortId) -> Self {
        Var { name: name.into(), sort }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    App(FunId, Vec<Term>),
}

pub type Assignment = BTreeMap<String, Elem>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("variable `{var}` has sort `{expected}` but is bound to an element of sort `{found}`")]
    SortMismatch { var: String, expected: String, found: String },
    #[error("`{symbol}` expects {expected} arguments, got {got}")]
    Arity { symbol: String, expected: usize, got: usize },
    #[error("argument {position} of `{symbol}` has sort `{found}`, expected `{expected}`")]
    ArgumentSort { symbol: String, position: usize, found: String, expected: String },
}

impl Term {
    pub fn var(name: impl Into<String>, sort: SortId) -> Term {
        Term::Var(Var::new(name, sort))
    }

    pub fn app(f: FunId, args: Vec<Term>) -> Term {
        Term::App(f, args)
    }

    pub fn sort(&self, sig: &Signature) -> SortId {
        match self {
            Term::Var(v) => v.sort,
            Term::App(f, _) => sig.functions()[*f].result,
        }
    }

    /// Well-sortedness against `sig`.
    pub fn check(&self, sig: &Signature) -> Result<(), EvalError> {
        if let Term::App(f, args) = self {
            let sym = &sig.functions()[*f];
            if sym.args.len() != args.len() {
                return Err(EvalError::Arity { symbol: sym.name.clone(), expected: sym.args.len(), got: args.len() });
            }
            for (i, (a, &s)) in args.iter().zip(&sym.args).enumerate() {
                a.check(sig)?;
                if a.sort(sig) != s {
                    return Err(EvalError::ArgumentSort {
                        symbol: sym.name.clone(),
                        position: i,
                        found: sig.sort_name(a.sort(sig)).to_string(),
                        expected: sig.sort_name(s).to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    /// Replaces variables according to `subst` (unmapped variables stay).
    pub fn substitute(&self, subst: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Var(v) => subst.get(&v.name).cloned().unwrap_or_else(|| self.clone()),
            Term::App(f, args) => Term::App(*f, args.iter().map(|a| a.substitute(subst)).collect()),
        }
    }
}

/// Value of `term`, or `None` when evaluation reaches an undefined entry.
pub fn evaluate_term(term: &Term, s: &Structure, asg: &Assignment) -> Result<Option<Elem>, EvalError> {
    match term {
        Term::Var(v) => {
            let &e = asg.get(&v.name).ok_or_else(|| EvalError::Unbound(v.name.clone()))?;
            if s.sort_of(e) != v.sort {
                let sig = s.signature();
                return Err(EvalError::SortMismatch {
                    var: v.name.clone(),
                    expected: sig.sort_name(v.sort).to_string(),
                    found: sig.sort_name(s.sort_of(e)).to_string(),
                });
            }
            Ok(Some(e))
        }
        Term::App(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            let mut defined = true;
            for a in args {
                match evaluate_term(a, s, asg)? {
                    Some(v) => vals.push(v),
                    None => defined = false,
                }
            }
            Ok(if defined { s.value(*f, &vals) } else { None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::SortKind;
    use std::sync::Arc;

    #[test]
    fn frontier_makes_value_undefined() {
        let mut sig = Signature::new();
        let s = sig.add_sort("S", SortKind::Object).unwrap();
        let f = sig.add_function("f", &[s, s], s).unwrap();
        let mut m = Structure::new(Arc::new(sig));
        let a = m.add_element(s, "a").unwrap();
        let b = m.add_element(s, "b").unwrap();
        m.set_value(f, vec![a, a], a).unwrap();
        m.set_open(f, true);
        let asg: Assignment = [("x".to_string(), a), ("y".to_string(), b)].into();
        let t = Term::app(f, vec![Term::var("x", s), Term::var("x", s)]);
        assert_eq!(evaluate_term(&t, &m, &asg), Ok(Some(a)));
        let u = Term::app(f, vec![Term::var("x", s), Term::var("y", s)]);
        assert_eq!(evaluate_term(&u, &m, &asg), Ok(None));
        let w = Term::app(f, vec![u, Term::var("z", s)]);
        assert_eq!(evaluate_term(&w, &m, &asg), Err(EvalError::Unbound("z".into())));
    }
}
