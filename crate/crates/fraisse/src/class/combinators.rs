//! Generic expansions of a base class `K`: a free predicate, a predicate for a
//! substructure, a free function, a free bijection, and an equivalence
//! relation named by a quotient sort.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{closed_subsets, dedupe_iso, fragment_member, glue, ClassError, ClassHandle, ClassOps, Completion, Condition5, PointExtension};
use crate::formula::QfFormula;
use crate::signature::{extend_with_map, FunId, GenericSymbol, RelId, Signature, SortId};
use crate::structure::{product, Elem, Structure};
use crate::term::Term;

type Ids = Vec<((usize, Elem), (usize, Elem))>;

/// Largest number of yes/no choices enumerated when listing expansions.
const CHOICE_BITS: usize = 16;

/// K-completes the reduct of `cur` and carries the extra symbols across,
/// merging what they force, until nothing changes. Elements of extra sorts
/// are kept. Returns the result and the image of every element of `cur`.
fn complete_reduct(k: &dyn ClassOps, sig: &Arc<Signature>, cur: &Structure) -> Result<(Structure, Vec<Elem>), ClassError> {
    let base = k.signature();
    let mut cur = cur.clone();
    let mut total: Vec<Elem> = cur.elements().collect();
    loop {
        let (r, fwd) = cur.reduct(base);
        let c = k.complete(&r)?;
        let mut out = Structure::new(sig.clone());
        out.absorb(&c.structure, &[])?;
        let map: Vec<Elem> = cur
            .elements()
            .map(|e| match fwd[e as usize] {
                Some(x) => c.map[x as usize],
                None => out.add_fresh(cur.sort_of(e), cur.name(e)),
            })
            .collect();
        let img = |t: &[Elem]| t.iter().map(|&x| map[x as usize]).collect::<Vec<_>>();
        for r in base.relations().len()..sig.relations().len() {
            for t in cur.tuples(r) {
                out.add_tuple(r, img(t))?;
            }
        }
        let mut ids: Ids = vec![];
        for f in base.functions().len()..sig.functions().len() {
            for (a, &v) in cur.table(f) {
                let a2 = img(a);
                match out.value(f, &a2) {
                    Some(w) if w != map[v as usize] => ids.push(((0, w), (0, map[v as usize]))),
                    Some(_) => {}
                    None => out.set_value(f, a2, map[v as usize])?,
                }
            }
        }
        for f in base.functions().len()..sig.functions().len() {
            if cur.is_open(f) {
                out.set_open(f, true);
            }
            for t in cur.explicit_frontier(f) {
                let t2 = img(t);
                if out.value(f, &t2).is_none() {
                    out.mark_frontier(f, t2)?;
                }
            }
        }
        total = total.iter().map(|&e| map[e as usize]).collect();
        if ids.is_empty() {
            return Ok((out, total));
        }
        let (g, maps) = glue(sig, &[&out], &ids)?;
        total = total.iter().map(|&e| maps[0][e as usize]).collect();
        cur = g;
    }
}

/// Open frontiers of the extra functions become explicit, so that later rounds
/// can tell declared gaps from gaps created by new elements.
fn freeze_frontier(s: &mut Structure, funs: &[FunId]) {
    for &f in funs {
        if s.is_open(f) {
            let gaps = s.undefined_entries(f);
            s.set_open(f, false);
            for t in gaps {
                s.mark_frontier(f, t).unwrap();
            }
        }
    }
}

fn with_base_names(k: &dyn ClassOps, sym: GenericSymbol) -> GenericSymbol {
    sym.avoiding(k.signature())
}

fn base_condition5(k: &dyn ClassOps, why: &str) -> Condition5 {
    match k.condition5() {
        Condition5::Trusted(_) => Condition5::Trusted(why.into()),
        other => other,
    }
}

fn lift(sig: &Arc<Signature>, m: &Structure) -> Structure {
    let mut s = Structure::new(sig.clone());
    s.absorb(m, &[]).unwrap();
    s
}

/// Elements of `b` outside the image of `embed`.
fn new_elements(b: &Structure, embed: &[Elem]) -> Vec<Elem> {
    let old: BTreeSet<Elem> = embed.iter().copied().collect();
    b.elements().filter(|e| !old.contains(e)).collect()
}

/// `K` with a generic predicate `U` of the given arity on one sort.
#[derive(Debug)]
pub struct GenPred {
    base: ClassHandle,
    sig: Arc<Signature>,
    rel: RelId,
    sort: SortId,
    arity: usize,
}

impl GenPred {
    pub fn new(base: ClassHandle, sort: SortId, arity: usize) -> Result<Self, ClassError> {
        let sym = with_base_names(&*base, GenericSymbol::predicate(sort, arity));
        let ext = extend_with_map(base.signature(), &sym).map_err(|e| ClassError::Expression(e.to_string()))?;
        Ok(GenPred { rel: ext.new_relations[0], sig: Arc::new(ext.signature), base, sort, arity })
    }

    pub fn relation(&self) -> RelId {
        self.rel
    }

    /// Every way of choosing `U` among `space` on top of `m`.
    fn choices(&self, m: &Structure, space: &[Vec<Elem>]) -> Vec<Structure> {
        if space.len() > CHOICE_BITS {
            return vec![m.clone()];
        }
        (0u64..1 << space.len())
            .map(|mask| {
                let mut s = m.clone();
                for (i, t) in space.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        s.add_tuple(self.rel, t.clone()).unwrap();
                    }
                }
                s
            })
            .collect()
    }

    fn expansions(&self, m: &Structure) -> Vec<Structure> {
        let m = lift(&self.sig, m);
        let space = m.relation_tuples_space(self.rel);
        self.choices(&m, &space)
    }
}

impl ClassOps for GenPred {
    fn name(&self) -> String {
        let sort = self.base.signature().sort_name(self.sort).to_string();
        if self.arity == 1 {
            format!("genpred({},{sort})", self.base.name())
        } else {
            format!("genpred({},{sort},{})", self.base.name(), self.arity)
        }
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        self.base.check_member(&s.reduct(self.base.signature()).0)
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let (structure, map) = complete_reduct(&*self.base, &self.sig, draft)?;
        Ok(Completion { structure, map })
    }

    /// Expansions with more than 2^16 choices of `U` are skipped.
    fn members(&self, max_size: usize) -> Vec<Structure> {
        let all = self.base.members(max_size).iter().flat_map(|m| self.expansions(m)).collect();
        dedupe_iso(all)
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.base.labeled_members(n).iter().flat_map(|m| self.expansions(m)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let (ra, fwd) = a.reduct(self.base.signature());
        let mut out = vec![];
        for ext in self.base.one_point_extensions(&ra) {
            let mut b = lift(&self.sig, &ext.structure);
            let embed: Vec<Elem> = a.elements().map(|e| ext.embed[fwd[e as usize].unwrap() as usize]).collect();
            for t in a.tuples(self.rel) {
                b.add_tuple(self.rel, t.iter().map(|&x| embed[x as usize]).collect()).unwrap();
            }
            let fresh: BTreeSet<Elem> = new_elements(&b, &embed).into_iter().collect();
            let space: Vec<Vec<Elem>> = b.relation_tuples_space(self.rel).into_iter().filter(|t| t.iter().any(|x| fresh.contains(x))).collect();
            for s in self.choices(&b, &space) {
                out.push(PointExtension { structure: s, embed: embed.clone(), point: ext.point });
            }
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let mut s = lift(&self.sig, &self.base.random_member(rng, size));
        for t in s.relation_tuples_space(self.rel) {
            if rng.gen_bool(0.5) {
                s.add_tuple(self.rel, t).unwrap();
            }
        }
        s
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        self.base.forbidden()
    }

    fn locally_finite(&self) -> bool {
        self.base.locally_finite()
    }

    fn condition5(&self) -> Condition5 {
        base_condition5(&*self.base, "generic predicates amalgamate freely")
    }
}

/// `K` with a unary predicate `R` naming a substructure.
#[derive(Debug)]
pub struct GenSub {
    base: ClassHandle,
    sig: Arc<Signature>,
    rel: RelId,
}

impl GenSub {
    pub fn new(base: ClassHandle) -> Result<Self, ClassError> {
        if !base.locally_finite() {
            return Err(ClassError::Expression(format!("gensub({}): the base class must be locally finite", base.name())));
        }
        if base.signature().sorts().len() != 1 {
            return Err(ClassError::Expression(format!("gensub({}): the base class must be one-sorted", base.name())));
        }
        let mut sym = GenericSymbol::predicate(0, 1);
        sym.names = vec!["R".into()];
        let sym = with_base_names(&*base, sym);
        let ext = extend_with_map(base.signature(), &sym).map_err(|e| ClassError::Expression(e.to_string()))?;
        Ok(GenSub { rel: ext.new_relations[0], sig: Arc::new(ext.signature), base })
    }

    pub fn relation(&self) -> RelId {
        self.rel
    }

    fn marked(&self, s: &Structure) -> BTreeSet<Elem> {
        s.tuples(self.rel).iter().map(|t| t[0]).collect()
    }

    fn with_marks(&self, m: &Structure, marks: &BTreeSet<Elem>) -> Structure {
        let mut s = m.clone();
        for &x in marks {
            s.add_tuple(self.rel, vec![x]).unwrap();
        }
        s
    }

    fn expansions(&self, m: &Structure) -> Vec<Structure> {
        let m = lift(&self.sig, m);
        closed_subsets(&m).iter().map(|c| self.with_marks(&m, c)).collect()
    }
}

impl ClassOps for GenSub {
    fn name(&self) -> String {
        format!("gensub({})", self.base.name())
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        self.base.check_member(&s.reduct(self.base.signature()).0)?;
        let marked = self.marked(s);
        if s.generated(marked.iter().copied()) != marked {
            return Err(format!("{} is not closed", s.signature().relations()[self.rel].name));
        }
        Ok(())
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let (s, map) = complete_reduct(&*self.base, &self.sig, draft)?;
        let closure = s.generated(self.marked(&s));
        Ok(Completion { structure: self.with_marks(&s, &closure), map })
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        dedupe_iso(self.base.members(max_size).iter().flat_map(|m| self.expansions(m)).collect())
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.base.labeled_members(n).iter().flat_map(|m| self.expansions(m)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let (ra, _) = a.reduct(self.base.signature());
        let marked_a = self.marked(a);
        let mut out = vec![];
        for ext in self.base.one_point_extensions(&ra) {
            let b = lift(&self.sig, &ext.structure);
            let fresh = new_elements(&b, &ext.embed);
            let old: BTreeSet<Elem> = marked_a.iter().map(|&x| ext.embed[x as usize]).collect();
            let mut seen = BTreeSet::new();
            for mask in 0u64..1 << fresh.len().min(CHOICE_BITS) {
                let seeds = old.iter().copied().chain(fresh.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x));
                let closure = b.generated(seeds);
                let back: BTreeSet<Elem> = ext.embed.iter().copied().filter(|x| closure.contains(x)).collect();
                if back == old && seen.insert(closure.clone()) {
                    out.push(PointExtension { structure: self.with_marks(&b, &closure), embed: ext.embed.clone(), point: ext.point });
                }
            }
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let m = lift(&self.sig, &self.base.random_member(rng, size));
        let seeds: Vec<Elem> = m.elements().filter(|_| rng.gen_bool(0.3)).collect();
        let closure = m.generated(seeds);
        self.with_marks(&m, &closure)
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        let mut out = self.base.forbidden();
        let r = |t: Term| QfFormula::Rel(self.rel, vec![t]);
        for (f, sym) in self.base.signature().functions().iter().enumerate() {
            let vars: Vec<Term> = (0..sym.args.len()).map(|i| Term::var(format!("x{i}"), 0)).collect();
            let mut conj: Vec<QfFormula> = vars.iter().cloned().map(r).collect();
            conj.push(QfFormula::not(r(Term::app(f, vars))));
            out.push(QfFormula::conjunction(conj));
        }
        out
    }

    fn locally_finite(&self) -> bool {
        true
    }

    fn condition5(&self) -> Condition5 {
        Condition5::Refuted("the closure of two marked sets can force marks on a third".into())
    }
}

/// `K` with a generic function; the completion unfolds `depth` rounds of new
/// values and leaves the rest of the table on the frontier.
#[derive(Debug)]
pub struct GenFun {
    base: ClassHandle,
    sig: Arc<Signature>,
    fun: FunId,
    depth: usize,
}

impl GenFun {
    pub fn new(base: ClassHandle, args: Vec<SortId>, result: SortId, depth: usize) -> Result<Self, ClassError> {
        let sym = with_base_names(&*base, GenericSymbol::function(args, result));
        let ext = extend_with_map(base.signature(), &sym).map_err(|e| ClassError::Expression(e.to_string()))?;
        Ok(GenFun { fun: ext.new_functions[0], sig: Arc::new(ext.signature), base, depth })
    }

    pub fn function(&self) -> FunId {
        self.fun
    }

    fn symbol(&self) -> &crate::signature::FunctionSymbol {
        &self.sig.functions()[self.fun]
    }

    /// All ways of filling the `gaps` of `m` with values of the result sort,
    /// when there are at most 4096 of them.
    fn fillings(&self, m: &Structure, gaps: &[Vec<Elem>]) -> Vec<Structure> {
        let values = m.elements_of(self.symbol().result).to_vec();
        let count = (values.len() as f64).powi(gaps.len() as i32);
        if count > 4096.0 || (values.is_empty() && !gaps.is_empty()) {
            return vec![];
        }
        product(gaps.iter().map(|_| values.as_slice()))
            .into_iter()
            .map(|choice| {
                let mut s = m.clone();
                for (t, v) in gaps.iter().zip(choice) {
                    s.set_value(self.fun, t.clone(), v).unwrap();
                }
                s
            })
            .collect()
    }

    fn expansions(&self, m: &Structure) -> Vec<Structure> {
        let m = lift(&self.sig, m);
        if !m.is_total() && m.undefined_entries(self.fun).len() != m.arg_tuples(self.fun).len() {
            return vec![];
        }
        let gaps = m.arg_tuples(self.fun);
        self.fillings(&m, &gaps)
    }
}

impl ClassOps for GenFun {
    fn name(&self) -> String {
        let sym = self.symbol();
        let sn = |s: SortId| self.sig.sort_name(s).to_string();
        let args: Vec<String> = sym.args.iter().map(|&s| sn(s)).collect();
        format!("genfun({},({})->{},depth={})", self.base.name(), args.join(" "), sn(sym.result), self.depth)
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        self.base.check_member(&s.reduct(self.base.signature()).0)
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let mut cur = draft.clone();
        freeze_frontier(&mut cur, &[self.fun]);
        let (mut s, mut map) = complete_reduct(&*self.base, &self.sig, &cur)?;
        let fname = self.symbol().name.clone();
        let result = self.symbol().result;
        for _ in 0..self.depth {
            let todo: Vec<Vec<Elem>> = s.undefined_entries(self.fun).into_iter().filter(|t| !s.is_frontier(self.fun, t)).collect();
            if todo.is_empty() {
                break;
            }
            for t in todo {
                let names: Vec<&str> = t.iter().map(|&x| s.name(x)).collect();
                let label = format!("{fname}<{}>", names.join(","));
                let v = s.add_fresh(result, &label);
                s.set_value(self.fun, t, v)?;
            }
            let (s2, m2) = complete_reduct(&*self.base, &self.sig, &s)?;
            map = map.iter().map(|&e| m2[e as usize]).collect();
            s = s2;
        }
        s.seal();
        Ok(Completion { structure: s, map })
    }

    /// Only members whose tables number at most 4096 are listed.
    fn members(&self, max_size: usize) -> Vec<Structure> {
        dedupe_iso(self.base.members(max_size).iter().flat_map(|m| self.expansions(m)).collect())
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.base.labeled_members(n).iter().flat_map(|m| self.expansions(m)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let mut draft = a.clone();
        let sort = self.symbol().args.first().copied().unwrap_or(0);
        let x = draft.add_fresh(sort, "x");
        let mut out = vec![];
        let free = GenFun { base: self.base.clone(), sig: self.sig.clone(), fun: self.fun, depth: 0 };
        if let Ok(c) = free.complete(&draft) {
            let embed = c.map[..a.len()].to_vec();
            let point = c.map[x as usize];
            let gaps = c.structure.undefined_entries(self.fun);
            let mut filled = c.structure.clone();
            for f in 0..self.sig.functions().len() {
                filled.set_open(f, false);
            }
            for s in self.fillings(&filled, &gaps) {
                if s.arg_tuples(self.fun).len() == s.table(self.fun).len() && s.is_total() {
                    out.push(PointExtension { structure: s, embed: embed.clone(), point });
                }
            }
            out.push(PointExtension { structure: c.structure, embed, point });
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let mut s = lift(&self.sig, &self.base.random_member(rng, size));
        let values = s.elements_of(self.symbol().result).to_vec();
        if values.is_empty() {
            return s;
        }
        for t in s.arg_tuples(self.fun) {
            let v = values[rng.gen_range(0..values.len())];
            s.set_value(self.fun, t, v).unwrap();
        }
        s
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        self.base.forbidden()
    }

    fn locally_finite(&self) -> bool {
        false
    }

    fn condition5(&self) -> Condition5 {
        base_condition5(&*self.base, "generic functions amalgamate freely")
    }
}

/// `K` with a generic bijection `pi` and its inverse; the completion adds
/// `window` iterates forwards and backwards of every element missing one.
#[derive(Debug)]
pub struct GenBij {
    base: ClassHandle,
    sig: Arc<Signature>,
    pi: FunId,
    inv: FunId,
    sort: SortId,
    window: usize,
}

impl GenBij {
    pub fn new(base: ClassHandle, sort: SortId, window: usize) -> Result<Self, ClassError> {
        let sym = with_base_names(&*base, GenericSymbol::bijection(sort));
        let ext = extend_with_map(base.signature(), &sym).map_err(|e| ClassError::Expression(e.to_string()))?;
        Ok(GenBij { pi: ext.new_functions[0], inv: ext.new_functions[1], sig: Arc::new(ext.signature), base, sort, window })
    }

    pub fn functions(&self) -> (FunId, FunId) {
        (self.pi, self.inv)
    }

    /// Completes and makes `pi`, `pi_inv` mutually inverse where defined.
    fn settle(&self, draft: &Structure) -> Result<(Structure, Vec<Elem>), ClassError> {
        let (mut s, mut map) = complete_reduct(&*self.base, &self.sig, draft)?;
        loop {
            let mut ids: Ids = vec![];
            for (f, g) in [(self.pi, self.inv), (self.inv, self.pi)] {
                let entries: Vec<(Elem, Elem)> = s.table(f).iter().map(|(a, &v)| (a[0], v)).collect();
                for (a, v) in entries {
                    match s.value(g, &[v]) {
                        Some(w) if w != a => ids.push(((0, w), (0, a))),
                        Some(_) => {}
                        None => s.set_value(g, vec![v], a)?,
                    }
                }
            }
            if ids.is_empty() {
                return Ok((s, map));
            }
            let (g, maps) = glue(&self.sig, &[&s], &ids)?;
            let (s2, m2) = complete_reduct(&*self.base, &self.sig, &g)?;
            map = map.iter().map(|&e| m2[maps[0][e as usize] as usize]).collect();
            s = s2;
        }
    }

    fn check_inverse(&self, s: &Structure) -> Result<(), String> {
        for (f, g) in [(self.pi, self.inv), (self.inv, self.pi)] {
            let mut seen = std::collections::BTreeMap::new();
            for (a, &v) in s.table(f) {
                if let Some(w) = s.value(g, &[v]) {
                    if w != a[0] {
                        return Err(format!("`{}` and `{}` are not inverse at `{}`", self.sig.functions()[f].name, self.sig.functions()[g].name, s.name(a[0])));
                    }
                }
                if let Some(other) = seen.insert(v, a[0]) {
                    return Err(format!("`{}` is not injective at `{}`, `{}`", self.sig.functions()[f].name, s.name(other), s.name(a[0])));
                }
            }
        }
        Ok(())
    }

    fn expansions(&self, m: &Structure) -> Vec<Structure> {
        let m = lift(&self.sig, m);
        let carrier = m.elements_of(self.sort).to_vec();
        if carrier.len() > 6 {
            return vec![];
        }
        permutations(carrier.len())
            .into_iter()
            .map(|perm| {
                let mut s = m.clone();
                for (i, &j) in perm.iter().enumerate() {
                    s.set_value(self.pi, vec![carrier[i]], carrier[j]).unwrap();
                    s.set_value(self.inv, vec![carrier[j]], carrier[i]).unwrap();
                }
                s
            })
            .collect()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        out.push(perm.clone());
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else { return out };
        let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

impl ClassOps for GenBij {
    fn name(&self) -> String {
        format!("genbij({},{},window={})", self.base.name(), self.sig.sort_name(self.sort), self.window)
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        self.base.check_member(&s.reduct(self.base.signature()).0)?;
        self.check_inverse(s)
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let mut cur = draft.clone();
        freeze_frontier(&mut cur, &[self.pi, self.inv]);
        let (mut s, map) = self.settle(&cur)?;
        let d0 = s.clone();
        for a in d0.elements_of(self.sort).to_vec() {
            for (f, g, sign) in [(self.pi, self.inv, ""), (self.inv, self.pi, "-")] {
                if d0.value(f, &[a]).is_some() || d0.is_frontier(f, &[a]) {
                    continue;
                }
                let mut prev = a;
                for k in 1..=self.window {
                    let next = s.add_fresh(self.sort, &format!("{}^{sign}{k}", d0.name(a)));
                    s.set_value(f, vec![prev], next)?;
                    s.set_value(g, vec![next], prev)?;
                    prev = next;
                }
            }
        }
        let (mut s, m2) = self.settle(&s)?;
        s.seal();
        Ok(Completion { structure: s, map: map.iter().map(|&e| m2[e as usize]).collect() })
    }

    /// Members whose bijection sort has more than six elements are skipped.
    fn members(&self, max_size: usize) -> Vec<Structure> {
        dedupe_iso(self.base.members(max_size).iter().flat_map(|m| self.expansions(m)).collect())
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.base.labeled_members(n).iter().flat_map(|m| self.expansions(m)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let (ra, fwd) = a.reduct(self.base.signature());
        let mut out = vec![];
        let free = GenBij { base: self.base.clone(), sig: self.sig.clone(), pi: self.pi, inv: self.inv, sort: self.sort, window: 0 };
        let mut draft = a.clone();
        let x = draft.add_fresh(self.sort, "x");
        if let Ok(c) = free.complete(&draft) {
            out.push(PointExtension { embed: c.map[..a.len()].to_vec(), point: c.map[x as usize], structure: c.structure });
        }
        if !a.is_total() {
            return out;
        }
        for ext in self.base.one_point_extensions(&ra) {
            let embed: Vec<Elem> = a.elements().map(|e| ext.embed[fwd[e as usize].unwrap() as usize]).collect();
            let mut b = lift(&self.sig, &ext.structure);
            for f in [self.pi, self.inv] {
                for (args, &v) in a.table(f) {
                    b.set_value(f, vec![embed[args[0] as usize]], embed[v as usize]).unwrap();
                }
            }
            let fresh: Vec<Elem> = new_elements(&b, &embed).into_iter().filter(|&e| b.sort_of(e) == self.sort).collect();
            if fresh.len() > 5 {
                continue;
            }
            for perm in permutations(fresh.len()) {
                let mut s = b.clone();
                for (i, &j) in perm.iter().enumerate() {
                    s.set_value(self.pi, vec![fresh[i]], fresh[j]).unwrap();
                    s.set_value(self.inv, vec![fresh[j]], fresh[i]).unwrap();
                }
                out.push(PointExtension { structure: s, embed: embed.clone(), point: ext.point });
            }
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let mut s = lift(&self.sig, &self.base.random_member(rng, size));
        let mut carrier = s.elements_of(self.sort).to_vec();
        let original = carrier.clone();
        for i in (1..carrier.len()).rev() {
            carrier.swap(i, rng.gen_range(0..=i));
        }
        for (&a, &b) in original.iter().zip(&carrier) {
            s.set_value(self.pi, vec![a], b).unwrap();
            s.set_value(self.inv, vec![b], a).unwrap();
        }
        s
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        let x = || Term::var("x", self.sort);
        let mut out = self.base.forbidden();
        out.push(QfFormula::not(QfFormula::eq(Term::app(self.inv, vec![Term::app(self.pi, vec![x()])]), x())));
        out.push(QfFormula::not(QfFormula::eq(Term::app(self.pi, vec![Term::app(self.inv, vec![x()])]), x())));
        out
    }

    fn locally_finite(&self) -> bool {
        false
    }

    fn condition5(&self) -> Condition5 {
        base_condition5(&*self.base, "generic bijections amalgamate freely")
    }
}

/// `K` with an equivalence relation `E` on one sort and a quotient sort `W`
/// whose points name the classes (empty classes allowed).
#[derive(Debug)]
pub struct EqQuot {
    base: ClassHandle,
    sig: Arc<Signature>,
    sort: SortId,
    quotient: SortId,
    rel: RelId,
    proj: FunId,
    label: Option<String>,
}

impl EqQuot {
    pub fn new(base: ClassHandle, sort: SortId) -> Result<Self, ClassError> {
        let sym = with_base_names(&*base, GenericSymbol::equivalence_with_quotient(sort));
        let ext = extend_with_map(base.signature(), &sym).map_err(|e| ClassError::Expression(e.to_string()))?;
        Ok(EqQuot {
            quotient: ext.new_sort.unwrap(),
            rel: ext.new_relations[0],
            proj: ext.new_functions[0],
            sig: Arc::new(ext.signature),
            base,
            sort,
            label: None,
        })
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn symbols(&self) -> (SortId, RelId, FunId) {
        (self.quotient, self.rel, self.proj)
    }

    fn rebuild_relation(&self, s: &mut Structure) {
        for t in s.tuples(self.rel).clone() {
            s.remove_tuple(self.rel, &t);
        }
        let carrier = s.elements_of(self.sort).to_vec();
        for &a in &carrier {
            for &b in &carrier {
                if s.value(self.proj, &[a]).is_some() && s.value(self.proj, &[a]) == s.value(self.proj, &[b]) {
                    s.add_tuple(self.rel, vec![a, b]).unwrap();
                }
            }
        }
    }

    /// Expansions of `m` by a partition and `extra` empty classes.
    fn expansions(&self, m: &Structure, max_size: usize, exact: bool) -> Vec<Structure> {
        let m = lift(&self.sig, m);
        let carrier = m.elements_of(self.sort).to_vec();
        let mut out = vec![];
        for blocks in restricted_growth(carrier.len()) {
            let nblocks = blocks.iter().max().map_or(0, |b| b + 1);
            if m.len() + nblocks > max_size {
                continue;
            }
            let extras = if exact { 0..=0 } else { 0..=max_size - m.len() - nblocks };
            for extra in extras {
                let mut s = m.clone();
                let w: Vec<Elem> = (0..nblocks + extra).map(|i| s.add_fresh(self.quotient, &format!("w{i}"))).collect();
                for (&a, &b) in carrier.iter().zip(&blocks) {
                    s.set_value(self.proj, vec![a], w[b]).unwrap();
                }
                self.rebuild_relation(&mut s);
                out.push(s);
            }
        }
        out
    }
}

fn restricted_growth(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, next: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=next {
            cur.push(b);
            go(n, cur, if b == next { next + 1 } else { next }, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    go(n, &mut vec![], 0, &mut out);
    out
}

impl ClassOps for EqQuot {
    fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("eqquot({},{})", self.base.name(), self.sig.sort_name(self.sort)))
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        self.base.check_member(&s.reduct(self.base.signature()).0)?;
        fragment_member(self, s)
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let (mut s, map) = complete_reduct(&*self.base, &self.sig, draft)?;
        for a in s.elements_of(self.sort).to_vec() {
            if s.value(self.proj, &[a]).is_none() {
                let w = s.add_fresh(self.quotient, &format!("[{}]", s.name(a)));
                s.set_value(self.proj, vec![a], w)?;
            }
        }
        let ids: Ids = s
            .tuples(self.rel)
            .iter()
            .map(|t| ((0, s.value(self.proj, &[t[0]]).unwrap()), (0, s.value(self.proj, &[t[1]]).unwrap())))
            .filter(|(x, y)| x != y)
            .collect();
        let (mut s, map) = if ids.is_empty() {
            (s, map)
        } else {
            let (g, maps) = glue(&self.sig, &[&s], &ids)?;
            (g, map.iter().map(|&e| maps[0][e as usize]).collect())
        };
        self.rebuild_relation(&mut s);
        Ok(Completion { structure: s, map })
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        dedupe_iso(self.base.members(max_size).iter().flat_map(|m| self.expansions(m, max_size, false)).collect())
    }

    /// Object carrier `e0..`, one quotient point per class.
    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.base.labeled_members(n).iter().flat_map(|m| self.expansions(m, usize::MAX / 2, true)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let mut out = vec![];
        // a new empty class
        let mut b = a.clone();
        let w = b.add_fresh(self.quotient, "w");
        out.push(PointExtension { structure: b, embed: a.elements().collect(), point: w });
        let (ra, fwd) = a.reduct(self.base.signature());
        for ext in self.base.one_point_extensions(&ra) {
            let mut b = lift(&self.sig, &ext.structure);
            let mut embed = vec![0; a.len()];
            for e in a.elements() {
                embed[e as usize] = match fwd[e as usize] {
                    Some(x) => ext.embed[x as usize],
                    None => b.add_element(self.quotient, a.name(e)).unwrap(),
                };
            }
            for (args, &v) in a.table(self.proj) {
                b.set_value(self.proj, vec![embed[args[0] as usize]], embed[v as usize]).unwrap();
            }
            let classes: Vec<Elem> = a.elements_of(self.quotient).iter().map(|&w| embed[w as usize]).collect();
            let fresh: Vec<Elem> = new_elements(&b, &embed).into_iter().filter(|&e| b.sort_of(e) == self.sort).collect();
            // each fresh element joins an old class or one of the new ones
            let mut count = 0usize;
            for blocks in restricted_growth(fresh.len()) {
                let nb = blocks.iter().max().map_or(0, |x| x + 1);
                let olds = classes.len();
                let options = product((0..nb).map(|_| (0..=olds as Elem).collect::<Vec<_>>()));
                for choice in options {
                    // choice[i] = olds means block i is a new class
                    let mut used = BTreeSet::new();
                    if choice.iter().any(|&c| (c as usize) < olds && !used.insert(c)) {
                        continue;
                    }
                    count += 1;
                    if count > 1 << CHOICE_BITS {
                        break;
                    }
                    let mut s = b.clone();
                    let targets: Vec<Elem> = choice
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| if (c as usize) < olds { classes[c as usize] } else { s.add_fresh(self.quotient, &format!("w{i}")) })
                        .collect();
                    for (&e, &blk) in fresh.iter().zip(&blocks) {
                        s.set_value(self.proj, vec![e], targets[blk]).unwrap();
                    }
                    self.rebuild_relation(&mut s);
                    out.push(PointExtension { structure: s, embed: embed.clone(), point: ext.point });
                }
            }
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let m = self.base.random_member(rng, size);
        let mut s = lift(&self.sig, &m);
        let carrier = s.elements_of(self.sort).to_vec();
        let k = rng.gen_range(1..=carrier.len().max(1));
        let w: Vec<Elem> = (0..k).map(|i| s.add_fresh(self.quotient, &format!("w{i}"))).collect();
        for a in carrier {
            s.set_value(self.proj, vec![a], w[rng.gen_range(0..k)]).unwrap();
        }
        self.rebuild_relation(&mut s);
        s
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        let x = || Term::var("x", self.sort);
        let y = || Term::var("y", self.sort);
        let e = QfFormula::Rel(self.rel, vec![x(), y()]);
        let same = QfFormula::eq(Term::app(self.proj, vec![x()]), Term::app(self.proj, vec![y()]));
        let mut out = self.base.forbidden();
        out.push(QfFormula::And(vec![e.clone(), QfFormula::not(same.clone())]));
        out.push(QfFormula::And(vec![QfFormula::not(e), same]));
        out
    }

    fn locally_finite(&self) -> bool {
        self.base.locally_finite()
    }

    fn condition5(&self) -> Condition5 {
        base_condition5(&*self.base, "classes are named by quotient points")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{free_amalgam, parse_class, AmalgamResult, Linear};
    use crate::text::parse_structure;

    fn read(class: &dyn ClassOps, body: &str) -> Structure {
        let sig = class.signature().clone();
        parse_structure(&format!("(structure (sig-ref k) {body})"), &|_| Some(sig.clone())).unwrap()
    }

    fn amalgam(class: &dyn ClassOps, e: &Structure, a: &Structure, b: &Structure) -> AmalgamResult {
        let ja = e.inclusion_by_names(a).unwrap();
        let jb = e.inclusion_by_names(b).unwrap();
        free_amalgam(class, e, a, b, &ja, &jb).unwrap()
    }

    fn names(s: &Structure, set: impl IntoIterator<Item = Elem>) -> Vec<String> {
        let mut v: Vec<String> = set.into_iter().map(|e| s.name(e).to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn predicate_is_the_union_of_the_images() {
        let k = parse_class("genpred(sets,S)").unwrap();
        let a = read(&*k, "(carrier S a) (rel U (a))");
        let b = read(&*k, "(carrier S b)");
        let e = read(&*k, "");
        let r = amalgam(&*k, &e, &a, &b);
        assert_eq!(names(&r.amalgam, r.amalgam.tuples(0).iter().map(|t| t[0])), vec!["a"]);
    }

    #[test]
    fn predicate_skips_new_sums() {
        let k = GenPred::new(Arc::new(Linear::vector_space(2).unwrap()), 0, 1).unwrap();
        let u = k.rel;
        let mut draft = Structure::new(k.signature().clone());
        let a = draft.add_element(0, "u").unwrap();
        draft.add_tuple(u, vec![a]).unwrap();
        let a = k.complete(&draft).unwrap().structure;
        let mut draft = Structure::new(k.signature().clone());
        let b = draft.add_element(0, "v").unwrap();
        draft.add_tuple(u, vec![b]).unwrap();
        let b = k.complete(&draft).unwrap().structure;
        let e = k.constants_structure();
        let r = amalgam(&k, &e, &a, &b);
        assert_eq!(r.amalgam.len(), 4);
        assert_eq!(names(&r.amalgam, r.amalgam.tuples(u).iter().map(|t| t[0])), vec!["u", "v"]);
    }

    #[test]
    fn function_rounds_adjoin_labelled_values() {
        let k = parse_class("genfun(sets,(S S)->S,depth=1)").unwrap();
        let a = read(&*k, "(carrier S a) (fun f ((a a) a))");
        let b = read(&*k, "(carrier S b) (fun f ((b b) b))");
        let e = read(&*k, "");
        let r = amalgam(&*k, &e, &a, &b);
        let d = &r.amalgam;
        assert_eq!(names(d, d.elements()), vec!["a", "b", "f<a,b>", "f<b,a>"]);
        let (x, y) = (d.lookup(0, "a").unwrap(), d.lookup(0, "b").unwrap());
        assert_eq!(d.name(d.value(0, &[x, y]).unwrap()), "f<a,b>");
        assert!(d.is_open(0));
        assert_eq!(d.undefined_entries(0).len(), 16 - 4);

        let k0 = parse_class("genfun(sets,(S S)->S,depth=0)").unwrap();
        let r = amalgam(&*k0, &read(&*k0, ""), &read(&*k0, "(carrier S a) (fun f ((a a) a))"), &read(&*k0, "(carrier S b) (fun f ((b b) b))"));
        assert_eq!(r.amalgam.len(), 2);
        assert_eq!(r.amalgam.undefined_entries(0).len(), 2);
    }

    #[test]
    fn unary_function_on_groups_gets_a_free_value() {
        let k = GenFun::new(Arc::new(Linear::abelian_groups()), vec![0], 0, 1).unwrap();
        let z2 = crate::class::abelian_group(&[2]);
        let mut a = lift(k.signature(), &z2);
        let (g, zero) = (a.lookup(0, "g").unwrap(), a.value(0, &[]).unwrap());
        a.set_value(k.fun, vec![g], zero).unwrap();
        a.set_value(k.fun, vec![zero], zero).unwrap();
        let mut b = a.clone();
        let gb = b.lookup(0, "g").unwrap();
        let mut renamed = Structure::new(k.signature().clone());
        for x in b.elements() {
            renamed.add_element(0, if x == gb { "h" } else { b.name(x) }).unwrap();
        }
        renamed.absorb(&b, &b.elements().map(Some).collect::<Vec<_>>()).unwrap();
        b = renamed;
        let mut e = Structure::new(k.signature().clone());
        let z = e.add_element(0, "0").unwrap();
        e.set_value(0, vec![], z).unwrap();
        e.set_value(1, vec![z, z], z).unwrap();
        e.set_value(2, vec![z], z).unwrap();
        e.set_value(k.fun, vec![z], z).unwrap();
        let r = amalgam(&k, &e, &a, &b);
        let d = &r.amalgam;
        let (g, h) = (d.lookup(0, "g").unwrap(), d.lookup(0, "h").unwrap());
        let gh = d.value(1, &[g, h]).unwrap();
        let fgh = d.value(k.fun, &[gh]).unwrap();
        assert_eq!(d.name(fgh), "f<g+h>");
        // f(g+h) generates a free summand
        let two = d.value(1, &[fgh, fgh]).unwrap();
        assert_ne!(two, d.value(0, &[]).unwrap());
    }

    #[test]
    fn bijection_copies_new_elements_along_a_window() {
        let k = parse_class("genbij(sets,S,window=2)").unwrap();
        let a = read(&*k, "(carrier S a) (fun pi ((a) a)) (fun pi_inv ((a) a))");
        let b = read(&*k, "(carrier S b) (fun pi ((b) b)) (fun pi_inv ((b) b))");
        let r = amalgam(&*k, &read(&*k, ""), &a, &b);
        assert_eq!(r.amalgam.len(), 2);
        assert!(r.amalgam.is_total());

        let v = Arc::new(Linear::vector_space(2).unwrap());
        let k = GenBij::new(v.clone(), 0, 2).unwrap();
        let side = |n: &str| {
            let s = v.from_invariants(&[2]);
            let mut t = Structure::new(k.signature().clone());
            for x in s.elements() {
                t.add_element(0, if s.name(x) == "g" { n } else { s.name(x) }).unwrap();
            }
            t.absorb(&s, &s.elements().map(Some).collect::<Vec<_>>()).unwrap();
            for x in t.elements() {
                t.set_value(k.pi, vec![x], x).unwrap();
                t.set_value(k.inv, vec![x], x).unwrap();
            }
            t
        };
        let (a, b) = (side("u"), side("v"));
        let zero = a.value(0, &[]).unwrap();
        let (e, _) = a.induced(&BTreeSet::from([zero]));
        let r = amalgam(&k, &e, &a, &b);
        let d = &r.amalgam;
        let uv = d.lookup(0, "u+v").unwrap();
        let next = d.value(k.pi, &[uv]).unwrap();
        assert_eq!(d.name(next), "u+v^1");
        assert_eq!(d.name(d.value(k.pi, &[next]).unwrap()), "u+v^2");
        assert_eq!(d.name(d.value(k.inv, &[uv]).unwrap()), "u+v^-1");
        assert!(k.contains(d));
    }

    #[test]
    fn zero_window_leaves_new_elements_on_the_frontier() {
        let v = Arc::new(Linear::vector_space(2).unwrap());
        let k = GenBij::new(v, 0, 0).unwrap();
        let mut draft = Structure::new(k.signature().clone());
        draft.add_element(0, "u").unwrap();
        let c = k.complete(&draft).unwrap().structure;
        assert!(c.table(k.pi).is_empty());
        assert!(c.is_open(k.pi));
    }

    #[test]
    fn quotient_points_survive_with_empty_fibers() {
        let k = parse_class("eqrel-q").unwrap();
        let a = read(&*k, "(carrier V a) (carrier W x) (rel E (a a)) (fun p ((a) x))");
        let b = read(&*k, "(carrier V b) (carrier W y) (rel E (b b)) (fun p ((b) y))");
        let r = amalgam(&*k, &read(&*k, ""), &a, &b);
        assert_eq!(r.amalgam.elements_of(1).len(), 2);

        let a = read(&*k, "(carrier V a c) (carrier W x) (rel E (a a) (a c) (c a) (c c)) (fun p ((a) x) ((c) x))");
        let b = read(&*k, "(carrier V a b) (carrier W x z) (rel E (a a) (b b)) (fun p ((a) x) ((b) z))");
        let e = read(&*k, "(carrier V a) (carrier W x) (rel E (a a)) (fun p ((a) x))");
        let r = amalgam(&*k, &e, &a, &b);
        let d = &r.amalgam;
        let (c, b) = (d.lookup(0, "c").unwrap(), d.lookup(0, "b").unwrap());
        assert!(!d.holds(0, &[c, b]));
        assert_eq!(d.elements_of(1).len(), 2);
        assert!(d.lookup(1, "z").is_some());

        let lonely = read(&*k, "(carrier W w)");
        assert!(k.contains(&lonely));
        let r = amalgam(&*k, &read(&*k, ""), &lonely, &read(&*k, "(carrier V a) (carrier W x) (rel E (a a)) (fun p ((a) x))"));
        assert_eq!(r.amalgam.elements_of(1).len(), 2);
    }

    #[test]
    fn marked_subspace_is_the_span_of_the_images() {
        let v = Arc::new(Linear::vector_space(2).unwrap());
        let k = GenSub::new(v.clone()).unwrap();
        let marked = |n: &str| {
            let mut draft = Structure::new(k.signature().clone());
            let x = draft.add_element(0, n).unwrap();
            draft.add_tuple(k.rel, vec![x]).unwrap();
            k.complete(&draft).unwrap().structure
        };
        let (a, b) = (marked("u"), marked("v"));
        assert_eq!(a.tuples(k.rel).len(), 2);
        let r = amalgam(&k, &k.constants_structure(), &a, &b);
        assert_eq!(r.amalgam.tuples(k.rel).len(), 4);
        assert!(GenSub::new(Arc::new(Linear::abelian_groups())).is_err());
        assert!(matches!(k.condition5(), Condition5::Refuted(_)));
    }
}
