//! Quantifier-free formulas: three-valued evaluation, forbidden-configuration
//! search, and the split of a literal conjunction over a parameterized
//! signature into a parameter part and one part per parameter variable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::search::BudgetExceeded;
use crate::signature::{RelId, Signature, SortId};
use crate::structure::Structure;
use crate::term::{evaluate_term, Assignment, EvalError, Term, Var};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QfFormula {
    True,
    False,
    Eq(Term, Term),
    Rel(RelId, Vec<Term>),
    Not(Box<QfFormula>),
    And(Vec<QfFormula>),
    Or(Vec<QfFormula>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Undefined,
}

impl From<bool> for Truth {
    fn from(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

impl QfFormula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: QfFormula) -> QfFormula {
        QfFormula::Not(Box::new(f))
    }

    pub fn eq(a: Term, b: Term) -> QfFormula {
        QfFormula::Eq(a, b)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            QfFormula::True | QfFormula::False => {}
            QfFormula::Eq(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            QfFormula::Rel(_, ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            QfFormula::Not(f) => f.collect_vars(out),
            QfFormula::And(fs) | QfFormula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn check(&self, sig: &Signature) -> Result<(), EvalError> {
        match self {
            QfFormula::True | QfFormula::False => Ok(()),
            QfFormula::Eq(a, b) => {
                a.check(sig)?;
                b.check(sig)?;
                if a.sort(sig) != b.sort(sig) {
                    return Err(EvalError::ArgumentSort {
                        symbol: "=".into(),
                        position: 1,
                        found: sig.sort_name(b.sort(sig)).into(),
                        expected: sig.sort_name(a.sort(sig)).into(),
                    });
                }
                Ok(())
            }
            QfFormula::Rel(r, ts) => {
                let sym = &sig.relations()[*r];
                if sym.args.len() != ts.len() {
                    return Err(EvalError::Arity { symbol: sym.name.clone(), expected: sym.args.len(), got: ts.len() });
                }
                for (i, (t, &s)) in ts.iter().zip(&sym.args).enumerate() {
                    t.check(sig)?;
                    if t.sort(sig) != s {
                        return Err(EvalError::ArgumentSort {
                            symbol: sym.name.clone(),
                            position: i,
                            found: sig.sort_name(t.sort(sig)).into(),
                            expected: sig.sort_name(s).into(),
                        });
                    }
                }
                Ok(())
            }
            QfFormula::Not(f) => f.check(sig),
            QfFormula::And(fs) | QfFormula::Or(fs) => fs.iter().try_for_each(|f| f.check(sig)),
        }
    }

    /// Conjuncts of a literal conjunction, or `None` if the formula has another shape.
    pub fn literals(&self) -> Option<Vec<Literal>> {
        match self {
            QfFormula::And(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    out.extend(f.literals()?);
                }
                Some(out)
            }
            QfFormula::True => Some(vec![]),
            other => Literal::from_formula(other).map(|l| vec![l]),
        }
    }

    pub fn conjunction(mut fs: Vec<QfFormula>) -> QfFormula {
        match fs.len() {
            0 => QfFormula::True,
            1 => fs.pop().unwrap(),
            _ => QfFormula::And(fs),
        }
    }
}

/// An atom or a negated atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: QfFormula,
}

impl Literal {
    fn from_formula(f: &QfFormula) -> Option<Literal> {
        match f {
            QfFormula::Eq(..) | QfFormula::Rel(..) | QfFormula::False => Some(Literal { positive: true, atom: f.clone() }),
            QfFormula::Not(inner) => match &**inner {
                a @ (QfFormula::Eq(..) | QfFormula::Rel(..)) => Some(Literal { positive: false, atom: a.clone() }),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn to_formula(&self) -> QfFormula {
        if self.positive {
            self.atom.clone()
        } else {
            QfFormula::not(self.atom.clone())
        }
    }
}

/// Strict three-valued semantics: if any term in the formula is undefined the
/// whole formula is undefined.
pub fn evaluate(f: &QfFormula, s: &Structure, asg: &Assignment) -> Result<Truth, EvalError> {
    Ok(match eval_strict(f, s, asg)? {
        Some(b) => b.into(),
        None => Truth::Undefined,
    })
}

fn eval_strict(f: &QfFormula, s: &Structure, asg: &Assignment) -> Result<Option<bool>, EvalError> {
    Ok(match f {
        QfFormula::True => Some(true),
        QfFormula::False => Some(false),
        QfFormula::Eq(a, b) => {
            let (x, y) = (evaluate_term(a, s, asg)?, evaluate_term(b, s, asg)?);
            x.zip(y).map(|(x, y)| x == y)
        }
        QfFormula::Rel(r, ts) => {
            let mut vals = Vec::with_capacity(ts.len());
            let mut defined = true;
            for t in ts {
                match evaluate_term(t, s, asg)? {
                    Some(v) => vals.push(v),
                    None => defined = false,
                }
            }
            defined.then(|| s.holds(*r, &vals))
        }
        QfFormula::Not(g) => eval_strict(g, s, asg)?.map(|b| !b),
        QfFormula::And(fs) | QfFormula::Or(fs) => {
            let conj = matches!(f, QfFormula::And(_));
            let mut acc = conj;
            let mut defined = true;
            for g in fs {
                match eval_strict(g, s, asg)? {
                    Some(b) => acc = if conj { acc && b } else { acc || b },
                    None => defined = false,
                }
            }
            defined.then_some(acc)
        }
    })
}

/// Calls `visit` on every assignment of `vars` into `s`; stops early when it
/// returns `true`. Returns whether some call returned `true`.
pub fn for_each_assignment(
    vars: &[Var],
    s: &Structure,
    budget: &mut u64,
    visit: &mut dyn FnMut(&Assignment) -> bool,
) -> Result<bool, BudgetExceeded> {
    fn go(
        i: usize,
        vars: &[Var],
        s: &Structure,
        asg: &mut Assignment,
        budget: &mut u64,
        visit: &mut dyn FnMut(&Assignment) -> bool,
    ) -> Result<bool, BudgetExceeded> {
        if i == vars.len() {
            if *budget == 0 {
                return Err(BudgetExceeded);
            }
            *budget -= 1;
            return Ok(visit(asg));
        }
        for &e in s.elements_of(vars[i].sort) {
            asg.insert(vars[i].name.clone(), e);
            if go(i + 1, vars, s, asg, budget, visit)? {
                return Ok(true);
            }
        }
        asg.remove(&vars[i].name);
        Ok(false)
    }
    go(0, vars, s, &mut Assignment::new(), budget, visit)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ForbiddenVerdict {
    Clean,
    Witness { formula: usize, assignment: Assignment },
}

/// First forbidden formula made true by some assignment, scanning assignments
/// exhaustively. `budget` bounds the total number of assignments tried.
pub fn check_forbidden(s: &Structure, forbidden: &[QfFormula], budget: u64) -> Result<ForbiddenVerdict, BudgetExceeded> {
    let mut left = budget;
    for (i, f) in forbidden.iter().enumerate() {
        let vars: Vec<Var> = f.free_vars().into_iter().collect();
        let mut hit = None;
        for_each_assignment(&vars, s, &mut left, &mut |asg| {
            if evaluate(f, s, asg) == Ok(Truth::True) {
                hit = Some(asg.clone());
                true
            } else {
                false
            }
        })?;
        if let Some(assignment) = hit {
            return Ok(ForbiddenVerdict::Witness { formula: i, assignment });
        }
    }
    Ok(ForbiddenVerdict::Clean)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlattenError {
    #[error("formula is not a conjunction of literals")]
    NotLiteralConjunction,
    #[error(transparent)]
    Sort(#[from] EvalError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlattenOptions {
    /// Name every object application, including the outermost sides of atoms.
    pub name_all_subterms: bool,
    /// Extra parameter terms to name up front even if they only occur inline.
    pub enlarge: Vec<Term>,
}

/// Result of splitting a literal conjunction. The input is equivalent to the
/// existential closure over `introduced` of the conjunction of all parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flattened {
    pub parameter_part: QfFormula,
    /// One entry per parameter variable; `None` collects parameter-free literals.
    pub per_parameter: BTreeMap<Option<Var>, QfFormula>,
    /// Introduced variables with the input subterm each one names, in order.
    pub introduced: Vec<(Var, Term)>,
}

impl Flattened {
    pub fn conjunction(&self) -> QfFormula {
        let mut parts = vec![self.parameter_part.clone()];
        parts.extend(self.per_parameter.values().cloned());
        QfFormula::conjunction(parts.into_iter().filter(|f| *f != QfFormula::True).collect())
    }

    /// Evaluates the flattened conjunction after binding every introduced
    /// variable to the value of the subterm it names.
    pub fn evaluate_projected(&self, s: &Structure, asg: &Assignment) -> Result<Truth, EvalError> {
        let mut full = asg.clone();
        for (v, t) in &self.introduced {
            match evaluate_term(t, s, asg)? {
                Some(e) => {
                    full.insert(v.name.clone(), e);
                }
                None => return Ok(Truth::Undefined),
            }
        }
        evaluate(&self.conjunction(), s, &full)
    }
}

struct Flattener<'a> {
    sig: &'a Signature,
    p: SortId,
    opts: &'a FlattenOptions,
    taken: BTreeSet<String>,
    next_z: usize,
    next_k: usize,
    /// Original subterm -> introduced variable.
    named: BTreeMap<Term, Var>,
    introduced: Vec<(Var, Term)>,
    parameter_part: Vec<QfFormula>,
    buckets: BTreeMap<Option<Var>, Vec<QfFormula>>,
}

impl Flattener<'_> {
    fn fresh(&mut self, prefix: &str, sort: SortId) -> Var {
        loop {
            let n = if prefix == "z" { &mut self.next_z } else { &mut self.next_k };
            let name = format!("{prefix}{n}");
            *n += 1;
            if self.taken.insert(name.clone()) {
                return Var::new(name, sort);
            }
        }
    }

    fn is_object_app(&self, t: &Term) -> bool {
        matches!(t, Term::App(f, args) if self.sig.functions()[*f].args.first() == Some(&self.p) && !args.is_empty() && self.sig.functions()[*f].result != self.p)
    }

    /// Parameter-sorted term -> a parameter variable (naming compound terms).
    fn param_var(&mut self, t: &Term) -> Var {
        match t {
            Term::Var(v) => v.clone(),
            Term::App(..) => {
                if let Some(v) = self.named.get(t) {
                    return v.clone();
                }
                let v = self.fresh("k", self.p);
                self.named.insert(t.clone(), v.clone());
                self.introduced.push((v.clone(), t.clone()));
                self.parameter_part.push(QfFormula::eq(Term::Var(v.clone()), t.clone()));
                v
            }
        }
    }

    /// Names an object application with a `z` variable, recording its
    /// defining equality in the bucket of its parameter.
    fn name_object(&mut self, t: &Term) -> Var {
        if let Some(v) = self.named.get(t) {
            return v.clone();
        }
        let (nu, body) = self.flatten_app(t);
        let v = self.fresh("z", t.sort(self.sig));
        self.named.insert(t.clone(), v.clone());
        self.introduced.push((v.clone(), t.clone()));
        self.buckets.entry(Some(nu)).or_default().push(QfFormula::eq(Term::Var(v.clone()), body));
        v
    }

    /// Flattens an object application, keeping its own symbol inline.
    fn flatten_app(&mut self, t: &Term) -> (Var, Term) {
        let Term::App(f, args) = t else { unreachable!() };
        let nu = self.param_var(&args[0]);
        let mut out = vec![Term::Var(nu.clone())];
        for a in &args[1..] {
            out.push(self.flatten_under(a, &nu));
        }
        (nu, Term::App(*f, out))
    }

    /// Flattens an object term that will sit under parameter `nu`.
    fn flatten_under(&mut self, t: &Term, nu: &Var) -> Term {
        match t {
            Term::Var(_) => t.clone(),
            _ if !self.is_object_app(t) => Term::Var(self.param_var(t)),
            Term::App(_, args) => {
                let same = !self.opts.name_all_subterms && matches!(&args[0], Term::Var(v) if v == nu);
                if same {
                    self.flatten_app(t).1
                } else {
                    Term::Var(self.name_object(t))
                }
            }
        }
    }

    /// The parameter an atom side belongs to, if it is an object application.
    fn side_param(&mut self, t: &Term) -> Option<Var> {
        if self.is_object_app(t) && !self.opts.name_all_subterms {
            let Term::App(_, args) = t else { unreachable!() };
            Some(self.param_var(&args[0]))
        } else {
            None
        }
    }

    fn object_side(&mut self, t: &Term, nu: &Option<Var>) -> Term {
        match (t, nu) {
            (Term::Var(_), _) => t.clone(),
            (_, Some(nu)) if self.is_object_app(t) => self.flatten_under(t, nu),
            _ if self.is_object_app(t) => Term::Var(self.name_object(t)),
            _ => Term::Var(self.param_var(t)),
        }
    }

    fn literal(&mut self, lit: &Literal) {
        let wrap = |a: QfFormula| if lit.positive { a } else { QfFormula::not(a) };
        match &lit.atom {
            QfFormula::Eq(a, _) if a.sort(self.sig) == self.p => self.parameter_part.push(lit.to_formula()),
            QfFormula::Rel(r, _) if self.sig.relations()[*r].args.iter().all(|&s| s == self.p) => {
                self.parameter_part.push(lit.to_formula())
            }
            QfFormula::Eq(a, b) => {
                let nu = self.side_param(a).or_else(|| self.side_param(b));
                let (a2, b2) = (self.object_side(a, &nu), self.object_side(b, &nu));
                self.buckets.entry(nu).or_default().push(wrap(QfFormula::eq(a2, b2)));
            }
            QfFormula::Rel(r, ts) => {
                let nu = self.param_var(&ts[0]);
                let mut out = vec![Term::Var(nu.clone())];
                for t in &ts[1..] {
                    out.push(self.flatten_under(t, &nu));
                }
                self.buckets.entry(Some(nu)).or_default().push(wrap(QfFormula::Rel(*r, out)));
            }
            other => {
                self.buckets.entry(None).or_default().push(wrap(other.clone()));
            }
        }
    }
}

/// Splits a literal conjunction over a parameterized signature. Object
/// subterms whose parameter differs from the atom they sit in are named by
/// fresh `z` variables and compound parameter terms by fresh `k` variables,
/// so each object literal mentions a single parameter variable.
pub fn flatten_parameterized(f: &QfFormula, sig: &Signature, opts: &FlattenOptions) -> Result<Flattened, FlattenError> {
    f.check(sig)?;
    let lits = f.literals().ok_or(FlattenError::NotLiteralConjunction)?;
    let Some(p) = sig.parameter_sort() else {
        return Ok(Flattened {
            parameter_part: QfFormula::True,
            per_parameter: [(None, f.clone())].into(),
            introduced: vec![],
        });
    };
    let taken = f.free_vars().into_iter().map(|v| v.name).collect();
    let mut fl = Flattener {
        sig,
        p,
        opts,
        taken,
        next_z: 0,
        next_k: 0,
        named: BTreeMap::new(),
        introduced: vec![],
        parameter_part: vec![],
        buckets: BTreeMap::new(),
    };
    for t in &opts.enlarge {
        fl.param_var(t);
    }
    for lit in &lits {
        fl.literal(lit);
    }
    Ok(Flattened {
        parameter_part: QfFormula::conjunction(fl.parameter_part),
        per_parameter: fl.buckets.into_iter().map(|(k, v)| (k, QfFormula::conjunction(v))).collect(),
        introduced: fl.introduced,
    })
}

/// Parameter variables mentioned by an object-sorted atom of `f` (used to
/// audit flattened output).
pub fn parameter_vars_per_atom(f: &QfFormula, sig: &Signature) -> Vec<BTreeSet<Var>> {
    let Some(p) = sig.parameter_sort() else { return vec![] };
    let mut out = Vec::new();
    fn walk(f: &QfFormula, sig: &Signature, p: SortId, out: &mut Vec<BTreeSet<Var>>) {
        match f {
            QfFormula::Eq(a, _) if a.sort(sig) == p => {}
            QfFormula::Rel(r, _) if sig.relations()[*r].args.iter().all(|&s| s == p) => {}
            QfFormula::Eq(..) | QfFormula::Rel(..) => {
                out.push(f.free_vars().into_iter().filter(|v| v.sort == p).collect());
            }
            QfFormula::Not(g) => walk(g, sig, p, out),
            QfFormula::And(fs) | QfFormula::Or(fs) => fs.iter().for_each(|g| walk(g, sig, p, out)),
            QfFormula::True | QfFormula::False => {}
        }
    }
    walk(f, sig, p, &mut out);
    out
}
