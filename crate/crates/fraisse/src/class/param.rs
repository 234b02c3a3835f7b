//! Parameterized classes: a parameter sort `P` carrying a member of `KP`, and
//! for every parameter `p` a fiber, the `K0`-structure on all objects read
//! through the symbols indexed by `p`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{dedupe_iso, glue, ClassError, ClassHandle, ClassOps, Completion, Condition5, PointExtension};
use crate::formula::QfFormula;
use crate::signature::{parameterize_with_map, Parameterized, Signature, SortId};
use crate::structure::{product, Elem, Structure};
use crate::term::Term;

type Ids = Vec<((usize, Elem), (usize, Elem))>;

/// Largest number of combined fiber choices listed in a one-point menu.
const MENU_CAP: usize = 4096;

#[derive(Debug)]
pub struct ParamClass {
    k0: ClassHandle,
    kp: ClassHandle,
    sig: Arc<Signature>,
    map: Parameterized,
    /// Rounds of fiber completion that may add objects.
    layers: usize,
    /// Object count beyond which fiber completions stop adding objects.
    cap: usize,
}

impl ParamClass {
    pub fn new(k0: ClassHandle, kp: ClassHandle) -> Result<Self, ClassError> {
        let map = parameterize_with_map(k0.signature(), kp.signature()).map_err(|e| ClassError::Expression(e.to_string()))?;
        Ok(ParamClass { sig: Arc::new(map.signature.clone()), map, k0, kp, layers: 2, cap: 256 })
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn object_class(&self) -> &ClassHandle {
        &self.k0
    }

    pub fn parameter_class(&self) -> &ClassHandle {
        &self.kp
    }

    pub fn symbols(&self) -> &Parameterized {
        &self.map
    }

    /// An object-signature term with every symbol indexed by the parameter term `p`.
    pub fn lift_object_term(&self, t: &Term, p: &Term) -> Term {
        lift_term(t, &self.map, p, false)
    }

    pub fn lift_object_formula(&self, f: &QfFormula, p: &Term) -> QfFormula {
        lift_formula(f, &self.map, p, false)
    }

    pub fn parameter_sort(&self) -> SortId {
        self.map.parameter
    }

    pub fn parameters<'a>(&self, s: &'a Structure) -> &'a [Elem] {
        s.elements_of(self.map.parameter)
    }

    pub fn objects(&self, s: &Structure) -> Vec<Elem> {
        s.elements().filter(|&e| s.sort_of(e) != self.map.parameter).collect()
    }

    /// The fiber at `p`: a `K0`-structure on all objects. The second vector
    /// sends fiber elements back to `s`.
    pub fn fiber(&self, s: &Structure, p: Elem) -> (Structure, Vec<Elem>) {
        let mut f = Structure::new(self.k0.signature().clone());
        let mut fwd: HashMap<Elem, Elem> = HashMap::new();
        let mut back = vec![];
        for e in self.objects(s) {
            fwd.insert(e, f.add_element(s.sort_of(e), s.name(e)).unwrap());
            back.push(e);
        }
        let strip = |t: &[Elem]| (t[0] == p).then(|| t[1..].iter().map(|x| fwd[x]).collect::<Vec<_>>());
        for (i, &r) in self.map.object_relations.iter().enumerate() {
            for t in s.tuples(r) {
                if let Some(t2) = strip(t) {
                    f.add_tuple(i, t2).unwrap();
                }
            }
        }
        for (i, &g) in self.map.object_functions.iter().enumerate() {
            for (args, v) in s.table(g) {
                if let Some(a2) = strip(args) {
                    f.set_value(i, a2, fwd[v]).unwrap();
                }
            }
            f.set_open(i, s.is_open(g));
            for t in s.explicit_frontier(g) {
                if let Some(t2) = strip(t) {
                    f.mark_frontier(i, t2).unwrap();
                }
            }
        }
        (f, back)
    }

    /// The parameter part as a `KP`-structure, with the map back to `s`.
    pub fn parameter_part(&self, s: &Structure) -> (Structure, Vec<Elem>) {
        let mut pp = Structure::new(self.kp.signature().clone());
        let back: Vec<Elem> = self.parameters(s).to_vec();
        let fwd: HashMap<Elem, Elem> = back.iter().map(|&e| (e, pp.add_element(0, s.name(e)).unwrap())).collect();
        let img = |t: &[Elem]| t.iter().map(|x| fwd[x]).collect::<Vec<_>>();
        for (i, &r) in self.map.parameter_relations.iter().enumerate() {
            for t in s.tuples(r) {
                pp.add_tuple(i, img(t)).unwrap();
            }
        }
        for (i, &g) in self.map.parameter_functions.iter().enumerate() {
            for (args, v) in s.table(g) {
                pp.set_value(i, img(args), fwd[v]).unwrap();
            }
            pp.set_open(i, s.is_open(g));
        }
        (pp, back)
    }

    /// Builds a structure from a parameter part, object carrier and one fiber
    /// per parameter (fiber element `i` is object `i`).
    pub fn assemble(&self, pp: &Structure, objects: &[(SortId, String)], fibers: &[Structure]) -> Structure {
        assert_eq!(pp.len(), fibers.len(), "one fiber per parameter");
        let mut s = Structure::new(self.sig.clone());
        let params: Vec<Elem> = pp.elements().map(|e| s.add_element(self.map.parameter, pp.name(e)).unwrap()).collect();
        let objs: Vec<Elem> = objects.iter().map(|(sort, n)| s.add_element(self.map.object_sorts[*sort], n).unwrap()).collect();
        for (r, t) in pp.all_tuples() {
            s.add_tuple(self.map.parameter_relations[r], t.iter().map(|&x| params[x as usize]).collect()).unwrap();
        }
        for (f, args, v) in pp.all_entries() {
            s.set_value(self.map.parameter_functions[f], args.iter().map(|&x| params[x as usize]).collect(), params[v as usize]).unwrap();
        }
        for (&p, fib) in params.iter().zip(fibers) {
            for (r, t) in fib.all_tuples() {
                let mut t2 = vec![p];
                t2.extend(t.iter().map(|&x| objs[x as usize]));
                s.add_tuple(self.map.object_relations[r], t2).unwrap();
            }
            for (f, args, v) in fib.all_entries() {
                let mut a2 = vec![p];
                a2.extend(args.iter().map(|&x| objs[x as usize]));
                s.set_value(self.map.object_functions[f], a2, objs[v as usize]).unwrap();
            }
        }
        s.seal();
        s
    }

    /// All structures with the `KP` members on `k` points as parameter parts
    /// and `n` objects of the first object sort, fibers ranging over labeled
    /// `K0` members.
    pub fn structures_with(&self, k: usize, n: usize) -> Vec<Structure> {
        let fibers = self.k0.labeled_members(n);
        if fibers.is_empty() && k > 0 {
            return vec![];
        }
        let objects: Vec<(SortId, String)> = (0..n).map(|i| (0, format!("o{i}"))).collect();
        let idx: Vec<Elem> = (0..fibers.len() as Elem).collect();
        let combos = product((0..k).map(|_| idx.as_slice()));
        let mut out = vec![];
        for pp in self.kp.labeled_members(k) {
            let pp = rename(&pp, "p");
            for combo in &combos {
                let chosen: Vec<Structure> = combo.iter().map(|&i| fibers[i as usize].clone()).collect();
                out.push(self.assemble(&pp, &objects, &chosen));
            }
        }
        out
    }

    /// Writes a fiber completion back into `cur`. Objects created by the
    /// completion are added only when `add_new` holds.
    fn apply_fiber(&self, cur: &mut Structure, p: Elem, c: &Completion, back: &[Elem], add_new: bool) -> Result<Ids, ClassError> {
        let mut ids: Ids = vec![];
        let mut to_cur: Vec<Option<Elem>> = vec![None; c.structure.len()];
        for (i, &j) in c.map.iter().enumerate() {
            match to_cur[j as usize] {
                Some(first) if first != back[i] => ids.push(((0, first), (0, back[i]))),
                Some(_) => {}
                None => to_cur[j as usize] = Some(back[i]),
            }
        }
        if add_new {
            let pname = cur.name(p).to_string();
            for j in c.structure.elements() {
                if to_cur[j as usize].is_none() {
                    let sort = self.map.object_sorts[c.structure.sort_of(j)];
                    to_cur[j as usize] = Some(cur.add_fresh(sort, &format!("{pname}:{}", c.structure.name(j))));
                }
            }
        }
        let lift = |t: &[Elem]| -> Option<Vec<Elem>> {
            let mut out = vec![p];
            for &x in t {
                out.push(to_cur[x as usize]?);
            }
            Some(out)
        };
        for (r, t) in c.structure.all_tuples() {
            if let Some(t2) = lift(t) {
                cur.add_tuple(self.map.object_relations[r], t2)?;
            }
        }
        for (f, args, v) in c.structure.all_entries() {
            let (Some(a2), Some(v2)) = (lift(args), to_cur[v as usize]) else { continue };
            let g = self.map.object_functions[f];
            match cur.value(g, &a2) {
                Some(w) if w != v2 => ids.push(((0, w), (0, v2))),
                Some(_) => {}
                None => cur.set_value(g, a2, v2)?,
            }
        }
        Ok(ids)
    }

    fn footprint(s: &Structure) -> (usize, usize, usize) {
        (s.len(), s.all_tuples().count(), s.all_entries().count())
    }
}

fn rename(s: &Structure, prefix: &str) -> Structure {
    let mut t = Structure::new(s.signature().clone());
    for e in s.elements() {
        t.add_element(s.sort_of(e), &format!("{prefix}{e}")).unwrap();
    }
    t.absorb(s, &s.elements().map(Some).collect::<Vec<_>>()).unwrap();
    t
}

impl ClassOps for ParamClass {
    fn name(&self) -> String {
        format!("param({},{})", self.k0.name(), self.kp.name())
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        self.kp.check_member(&self.parameter_part(s).0).map_err(|m| format!("parameter part: {m}"))?;
        for &p in self.parameters(s) {
            self.k0.check_member(&self.fiber(s, p).0).map_err(|m| format!("fiber at `{}`: {m}", s.name(p)))?;
        }
        Ok(())
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let mut cur = draft.clone();
        let mut total: Vec<Elem> = cur.elements().collect();
        let regroup = |cur: &mut Structure, total: &mut Vec<Elem>, ids: Ids| -> Result<(), ClassError> {
            let (g, maps) = glue(&self.sig, &[&*cur], &ids)?;
            *total = total.iter().map(|&e| maps[0][e as usize]).collect();
            *cur = g;
            Ok(())
        };
        // parameter part
        loop {
            let (pp, back) = self.parameter_part(&cur);
            let c = self.kp.complete(&pp)?;
            let mut ids: Ids = vec![];
            let mut to_cur: Vec<Option<Elem>> = vec![None; c.structure.len()];
            for (i, &j) in c.map.iter().enumerate() {
                match to_cur[j as usize] {
                    Some(first) => ids.push(((0, first), (0, back[i]))),
                    None => to_cur[j as usize] = Some(back[i]),
                }
            }
            for j in c.structure.elements() {
                if to_cur[j as usize].is_none() {
                    to_cur[j as usize] = Some(cur.add_fresh(self.map.parameter, c.structure.name(j)));
                }
            }
            let img = |t: &[Elem]| t.iter().map(|&x| to_cur[x as usize].unwrap()).collect::<Vec<_>>();
            for (r, t) in c.structure.all_tuples() {
                cur.add_tuple(self.map.parameter_relations[r], img(t))?;
            }
            for (f, args, v) in c.structure.all_entries() {
                let g = self.map.parameter_functions[f];
                let (a2, v2) = (img(args), to_cur[v as usize].unwrap());
                match cur.value(g, &a2) {
                    Some(w) if w != v2 => ids.push(((0, w), (0, v2))),
                    Some(_) => {}
                    None => cur.set_value(g, a2, v2)?,
                }
            }
            if ids.is_empty() {
                break;
            }
            regroup(&mut cur, &mut total, ids)?;
        }
        // fibers, layer by layer
        let mut layer = 0;
        let mut settled = false;
        while !settled {
            let add_new = layer < self.layers;
            let before = Self::footprint(&cur);
            let mut collapsed = false;
            let params = self.parameters(&cur).to_vec();
            for p in params {
                let (fib, back) = self.fiber(&cur, p);
                let full = if add_new { Some(self.k0.complete(&fib)) } else { None };
                let c = match full {
                    Some(Ok(c)) if cur.len() + c.structure.len() - fib.len().min(c.structure.len()) <= self.cap => c,
                    Some(Err(e)) if !matches!(e, ClassError::Cap(_)) => return Err(e),
                    _ => self.k0.complete_within(&fib)?,
                };
                let ids = self.apply_fiber(&mut cur, p, &c, &back, add_new)?;
                if !ids.is_empty() {
                    regroup(&mut cur, &mut total, ids)?;
                    collapsed = true;
                    break;
                }
            }
            if collapsed {
                continue;
            }
            layer += add_new as usize;
            settled = Self::footprint(&cur) == before;
        }
        cur.seal();
        Ok(Completion { structure: cur, map: total })
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        let mut all = vec![];
        for total in 0..=max_size {
            all.extend(self.labeled_members(total));
        }
        dedupe_iso(all)
    }

    /// Members with `n` elements in all: parameters `p0..`, objects `o0..`.
    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        (0..=n).flat_map(|k| self.structures_with(k, n - k)).filter(|s| self.contains(s)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let mut out = vec![];
        let finish = |draft: Structure, point: Elem, out: &mut Vec<PointExtension>| {
            if let Ok(c) = self.complete(&draft) {
                out.push(PointExtension { embed: c.map[..a.len()].to_vec(), point: c.map[point as usize], structure: c.structure });
            }
        };
        let objects = self.objects(a);
        let one_sorted = self.k0.signature().sorts().len() == 1;
        let relational = self.k0.signature().is_relational();
        // a new parameter
        let (pp, pback) = self.parameter_part(a);
        for pe in self.kp.one_point_extensions(&pp) {
            let mut draft = a.clone();
            let mut to_a: Vec<Option<Elem>> = vec![None; pe.structure.len()];
            for (i, &j) in pe.embed.iter().enumerate() {
                to_a[j as usize] = Some(pback[i]);
            }
            for j in pe.structure.elements() {
                if to_a[j as usize].is_none() {
                    to_a[j as usize] = Some(draft.add_fresh(self.map.parameter, pe.structure.name(j)));
                }
            }
            let img = |t: &[Elem]| t.iter().map(|&x| to_a[x as usize].unwrap()).collect::<Vec<_>>();
            for (r, t) in pe.structure.all_tuples() {
                draft.add_tuple(self.map.parameter_relations[r], img(t)).unwrap();
            }
            for (f, args, v) in pe.structure.all_entries() {
                let _ = draft.set_value(self.map.parameter_functions[f], img(args), to_a[v as usize].unwrap());
            }
            let p = to_a[pe.point as usize].unwrap();
            let fibers = if relational && one_sorted { self.k0.labeled_members(objects.len()) } else { vec![] };
            if fibers.is_empty() || fibers.len() > MENU_CAP {
                finish(draft, p, &mut out);
                continue;
            }
            for fib in fibers {
                let mut d = draft.clone();
                for (r, t) in fib.all_tuples() {
                    let mut t2 = vec![p];
                    t2.extend(t.iter().map(|&x| objects[x as usize]));
                    d.add_tuple(self.map.object_relations[r], t2).unwrap();
                }
                finish(d, p, &mut out);
            }
        }
        // a new object
        for sort in 0..self.k0.signature().sorts().len() {
            let params = self.parameters(a).to_vec();
            let mut draft = a.clone();
            let x = draft.add_fresh(self.map.object_sorts[sort], "x");
            if !(relational && one_sorted) {
                finish(draft, x, &mut out);
                continue;
            }
            let menus: Vec<Vec<Structure>> = params
                .iter()
                .map(|&p| {
                    let (fib, _) = self.fiber(a, p);
                    self.k0.one_point_extensions(&fib).into_iter().filter(|e| e.structure.len() == fib.len() + 1).map(|e| reorder(&e)).collect()
                })
                .collect();
            let count = menus.iter().map(Vec::len).product::<usize>();
            if count == 0 || count > MENU_CAP {
                finish(draft, x, &mut out);
                continue;
            }
            let ranges: Vec<Vec<Elem>> = menus.iter().map(|m| (0..m.len() as Elem).collect()).collect();
            for choice in product(ranges.iter().map(|r| r.as_slice())) {
                let mut d = draft.clone();
                for ((&p, menu), &c) in params.iter().zip(&menus).zip(&choice) {
                    let ext = &menu[c as usize];
                    let obj = |e: Elem| if (e as usize) < objects.len() { objects[e as usize] } else { x };
                    for (r, t) in ext.all_tuples() {
                        let mut t2 = vec![p];
                        t2.extend(t.iter().map(|&e| obj(e)));
                        d.add_tuple(self.map.object_relations[r], t2).unwrap();
                    }
                }
                finish(d, x, &mut out);
            }
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let size = size.max(1);
        let k = rng.gen_range(1..=size.div_ceil(2));
        let candidates: Vec<usize> = (0..=(size - k).min(4)).filter(|&n| !self.k0.labeled_members(n).is_empty()).collect();
        let n = candidates[rng.gen_range(0..candidates.len())];
        let fibers = self.k0.labeled_members(n);
        let pp = rename(&self.kp.random_member(rng, k), "p");
        let chosen: Vec<Structure> = pp.elements().map(|_| fibers[rng.gen_range(0..fibers.len())].clone()).collect();
        let objects: Vec<(SortId, String)> = (0..n).map(|i| (0, format!("o{i}"))).collect();
        self.assemble(&pp, &objects, &chosen)
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        let p = Term::var("p", self.map.parameter);
        let mut out: Vec<QfFormula> = self.k0.forbidden().iter().map(|f| lift_formula(f, &self.map, &p, false)).collect();
        out.extend(self.kp.forbidden().iter().map(|f| lift_formula(f, &self.map, &p, true)));
        out
    }

    fn locally_finite(&self) -> bool {
        self.k0.signature().is_relational() && self.kp.locally_finite()
    }

    fn condition5(&self) -> Condition5 {
        match (self.k0.condition5(), self.kp.condition5()) {
            (Condition5::Trusted(_), Condition5::Trusted(_)) => Condition5::Trusted("layered per-parameter cube completion".into()),
            (Condition5::Refuted(w), _) | (_, Condition5::Refuted(w)) => Condition5::Refuted(w),
            _ => Condition5::Unverified,
        }
    }

    fn parameterized(&self) -> Option<&ParamClass> {
        Some(self)
    }
}

/// A one-point extension with the new point moved to the last id.
fn reorder(e: &PointExtension) -> Structure {
    let n = e.structure.len();
    let mut order: Vec<Elem> = e.embed.clone();
    order.push(e.point);
    let pos: HashMap<Elem, Elem> = order.iter().enumerate().map(|(i, &x)| (x, i as Elem)).collect();
    let set: BTreeSet<Elem> = order.iter().copied().collect();
    debug_assert_eq!(set.len(), n);
    let mut t = Structure::new(e.structure.signature().clone());
    for &x in &order {
        t.add_element(e.structure.sort_of(x), e.structure.name(x)).unwrap();
    }
    for (r, tup) in e.structure.all_tuples() {
        t.add_tuple(r, tup.iter().map(|x| pos[x]).collect()).unwrap();
    }
    t
}

fn lift_term(t: &Term, map: &Parameterized, p: &Term, on_parameter: bool) -> Term {
    match t {
        Term::Var(v) => {
            let sort = if on_parameter { map.parameter } else { map.object_sorts[v.sort] };
            Term::var(&v.name, sort)
        }
        Term::App(f, args) => {
            let lifted: Vec<Term> = args.iter().map(|a| lift_term(a, map, p, on_parameter)).collect();
            if on_parameter {
                Term::app(map.parameter_functions[*f], lifted)
            } else {
                let mut all = vec![p.clone()];
                all.extend(lifted);
                Term::app(map.object_functions[*f], all)
            }
        }
    }
}

/// Rewrites a formula of `K0` (or `KP`) into the parameterized signature,
/// indexing every object symbol by `p`.
pub(crate) fn lift_formula(f: &QfFormula, map: &Parameterized, p: &Term, on_parameter: bool) -> QfFormula {
    let rec = |g: &QfFormula| lift_formula(g, map, p, on_parameter);
    let term = |t: &Term| lift_term(t, map, p, on_parameter);
    match f {
        QfFormula::True => QfFormula::True,
        QfFormula::False => QfFormula::False,
        QfFormula::Eq(a, b) => QfFormula::Eq(term(a), term(b)),
        QfFormula::Rel(r, args) => {
            let lifted: Vec<Term> = args.iter().map(term).collect();
            if on_parameter {
                QfFormula::Rel(map.parameter_relations[*r], lifted)
            } else {
                let mut all = vec![p.clone()];
                all.extend(lifted);
                QfFormula::Rel(map.object_relations[*r], all)
            }
        }
        QfFormula::Not(g) => QfFormula::not(rec(g)),
        QfFormula::And(gs) => QfFormula::And(gs.iter().map(rec).collect()),
        QfFormula::Or(gs) => QfFormula::Or(gs.iter().map(rec).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{free_amalgam, parse_class};

    fn complete_draft(k: &ParamClass, params: &[&str], objects: &[&str]) -> Structure {
        let mut d = Structure::new(k.signature().clone());
        for p in params {
            d.add_element(k.parameter_sort(), p).unwrap();
        }
        for o in objects {
            d.add_element(0, o).unwrap();
        }
        k.complete(&d).unwrap().structure
    }

    fn amalgam(k: &ParamClass, e: &Structure, a: &Structure, b: &Structure) -> Structure {
        let ja = e.inclusion_by_names(a).unwrap();
        let jb = e.inclusion_by_names(b).unwrap();
        free_amalgam(k, e, a, b, &ja, &jb).unwrap().amalgam
    }

    fn param(k0: &str, kp: &str) -> ParamClass {
        ParamClass::new(parse_class(k0).unwrap(), parse_class(kp).unwrap()).unwrap()
    }

    #[test]
    fn sets_over_sets_take_the_union() {
        let k = param("sets", "sets");
        let a = complete_draft(&k, &["p"], &["a"]);
        let b = complete_draft(&k, &["q"], &["b"]);
        let e = complete_draft(&k, &[], &[]);
        let d = amalgam(&k, &e, &a, &b);
        assert_eq!(d.len(), 4);
        assert!(d.is_total());
    }

    #[test]
    fn graph_fibers_gain_no_edges() {
        let k = param("graphs", "sets");
        let a = complete_draft(&k, &["p"], &["a"]);
        let b = complete_draft(&k, &["p"], &["b"]);
        let e = complete_draft(&k, &["p"], &[]);
        let d = amalgam(&k, &e, &a, &b);
        assert!(d.tuples(0).is_empty());
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn vector_fiber_spans_both_sides() {
        let k = param("vec(2)", "sets");
        let a = complete_draft(&k, &["p"], &["u"]);
        let b = complete_draft(&k, &["p"], &["v"]);
        let e = complete_draft(&k, &["p"], &[]);
        assert_eq!(a.len(), 3);
        let d = amalgam(&k, &e, &a, &b);
        let p = d.lookup(k.parameter_sort(), "p").unwrap();
        let (fib, _) = k.fiber(&d, p);
        assert_eq!(fib.len(), 4);
        assert!(fib.is_total());
        assert!(k.contains(&d));
    }

    #[test]
    fn fresh_parameter_treats_objects_as_free_generators() {
        let k = param("vec(2)", "sets");
        let a = complete_draft(&k, &["p"], &["u"]);
        let b = complete_draft(&k, &["q"], &["v"]);
        let e = complete_draft(&k, &[], &[]);
        let d = amalgam(&k, &e, &a, &b);
        assert!(k.contains(&d));
        let (p, q) = (d.lookup(k.parameter_sort(), "p").unwrap(), d.lookup(k.parameter_sort(), "q").unwrap());
        let (u, v) = (d.lookup(0, "u").unwrap(), d.lookup(0, "v").unwrap());
        // u and v stay independent in both fibers
        let plus = k.symbols().object_functions[1];
        for par in [p, q] {
            if let Some(s) = d.value(plus, &[par, u, v]) {
                assert!(s != u && s != v);
            }
        }
        assert_ne!(d.value(plus, &[p, u, v]), d.value(plus, &[q, u, v]));
    }

    #[test]
    fn members_split_into_fibers() {
        let k = param("graphs", "sets");
        // 1 param + 2 objects: 2 graphs; 2 params + 1 object: 1; plus the pure cases
        let sizes: Vec<usize> = (0..=3).map(|n| k.members(n).len()).collect();
        assert_eq!(sizes, vec![1, 3, 6, 11]);
        let s = &k.structures_with(2, 2)[3];
        assert!(k.contains(s));
        let gs = parse_class("graphs").unwrap();
        for &p in k.parameters(s) {
            assert!(gs.contains(&k.fiber(s, p).0));
        }
    }

    #[test]
    fn forbidden_formulas_are_lifted() {
        let k = param("graphs", "sets");
        let f = k.forbidden();
        assert_eq!(f.len(), 2);
        assert_eq!(crate::text::formula_to_string(&f[0], k.signature()), "(rel E p x x)");
    }
}
