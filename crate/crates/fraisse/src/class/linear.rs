//! Vector spaces over a prime field and abelian groups. Free completions go
//! through integer presentations: one generator per draft element, one
//! relator per table entry, and the group is read off a diagonal form.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{colimit, relabelings, ClassError, ClassOps, Completion, Condition5, PointExtension};
use crate::formula::QfFormula;
use crate::presentation::{Presentation, SmithForm};
use crate::signature::{FunId, Signature, SortKind};
use crate::structure::{Elem, Structure};
use crate::term::Term;

const ZERO: FunId = 0;
const PLUS: FunId = 1;
const NEG: FunId = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Vector(u32),
    Abelian,
}

#[derive(Debug)]
pub struct Linear {
    kind: Kind,
    sig: Arc<Signature>,
    /// Word-length radius materialized when the group is infinite.
    window: usize,
    cap: usize,
}

impl Linear {
    pub fn vector_space(q: u32) -> Result<Self, ClassError> {
        if q < 2 || (2..q).any(|d| q.is_multiple_of(d)) {
            return Err(ClassError::Expression(format!("vec({q}): the field size must be prime")));
        }
        let mut sig = Signature::new();
        let v = sig.add_sort("V", SortKind::Object).unwrap();
        sig.add_function("zero", &[], v).unwrap();
        sig.add_function("plus", &[v, v], v).unwrap();
        sig.add_function("neg", &[v], v).unwrap();
        for k in 0..q {
            sig.add_function(&format!("smul{k}"), &[v], v).unwrap();
        }
        Ok(Linear { kind: Kind::Vector(q), sig: Arc::new(sig), window: 0, cap: 4096 })
    }

    pub fn abelian_groups() -> Self {
        let mut sig = Signature::new();
        let g = sig.add_sort("G", SortKind::Object).unwrap();
        sig.add_function("zero", &[], g).unwrap();
        sig.add_function("plus", &[g, g], g).unwrap();
        sig.add_function("neg", &[g], g).unwrap();
        Linear { kind: Kind::Abelian, sig: Arc::new(sig), window: 2, cap: 4096 }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    fn smul(k: u32) -> FunId {
        3 + k as FunId
    }

    fn presentation(&self, draft: &Structure) -> Presentation {
        let n = draft.len();
        let mut p = Presentation::new(n);
        for (f, args, v) in draft.all_entries() {
            let mut row = vec![0i64; n];
            row[v as usize] -= 1;
            match f {
                ZERO => {}
                PLUS => {
                    row[args[0] as usize] += 1;
                    row[args[1] as usize] += 1;
                }
                // neg(a) = v  is  a + v = 0
                NEG => {
                    row[args[0] as usize] += 1;
                    row[v as usize] += 2;
                }
                k => row[args[0] as usize] += (k - 3) as i64,
            }
            p.relate(row);
        }
        if let Kind::Vector(q) = self.kind {
            for i in 0..n {
                let mut row = vec![0; n];
                row[i] = q as i64;
                p.relate(row);
            }
        }
        p
    }

    /// Direct sum of cyclic groups `Z/d` (all `d = q` for vector spaces),
    /// generators named `g`, `h`, `k`, ... or `g1`, `g2`, ... beyond that.
    pub fn from_invariants(&self, ds: &[u64]) -> Structure {
        let names = ["g", "h", "k", "l", "m", "n"];
        let mut draft = Structure::new(self.sig.clone());
        let gens: Vec<Elem> = (0..ds.len())
            .map(|i| {
                let n = if ds.len() <= names.len() { names[i].to_string() } else { format!("g{}", i + 1) };
                draft.add_element(0, &n).unwrap()
            })
            .collect();
        let zero = draft.add_element(0, "0").unwrap();
        draft.set_value(ZERO, vec![], zero).unwrap();
        // d*g = 0 is encoded by a chain g, g+g, ... of plus entries
        for (&g, &d) in gens.iter().zip(ds) {
            assert!(d >= 2, "invariant factors start at 2");
            let mut prev = g;
            for i in 2..=d {
                let next = if i == d {
                    zero
                } else {
                    let name = format!("{}*{i}", draft.name(g));
                    draft.add_fresh(0, &name)
                };
                draft.set_value(PLUS, vec![prev, g], next).unwrap();
                prev = next;
            }
        }
        let c = self.complete(&draft).expect("cyclic presentation completes");
        c.structure
    }

    fn normal_forms(&self, draft: &Structure) -> (SmithForm, Vec<Vec<i128>>) {
        let n = draft.len();
        let p = self.presentation(draft);
        let snf = match self.kind {
            Kind::Vector(q) => p.smith_mod_prime(q as i64),
            Kind::Abelian => p.smith(),
        };
        let nf = (0..n).map(|i| snf.generator(i)).collect();
        (snf, nf)
    }

    /// Value of `f` on arguments given by normal forms.
    fn apply(&self, snf: &SmithForm, f: FunId, args: &[&[i128]]) -> Vec<i128> {
        match f {
            ZERO => snf.zero(),
            PLUS => snf.add(args[0], args[1]),
            NEG => snf.scale(args[0], -1),
            k => snf.scale(args[0], (k - 3) as i128),
        }
    }

    /// Undefined entries of `s` whose forced value is already an element.
    fn forced_entries(&self, s: &Structure, snf: &SmithForm, index: &HashMap<Vec<i128>, Elem>, nf: &[Vec<i128>]) -> Vec<(FunId, Vec<Elem>, Elem)> {
        let mut out = vec![];
        for f in 0..self.sig.functions().len() {
            for t in s.undefined_entries(f) {
                let args: Vec<&[i128]> = t.iter().map(|&x| nf[x as usize].as_slice()).collect();
                if let Some(&v) = index.get(&self.apply(snf, f, &args)) {
                    out.push((f, t, v));
                }
            }
        }
        out
    }

    fn materialize(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let n = draft.len();
        let (snf, nf) = self.normal_forms(draft);
        let mut out = Structure::new(self.sig.clone());
        let mut index: HashMap<Vec<i128>, Elem> = HashMap::new();
        let mut forms: Vec<Vec<i128>> = Vec::new();
        let mut map = Vec::with_capacity(n);
        for (i, form) in nf.iter().enumerate().take(n) {
            let e = *index.entry(form.clone()).or_insert_with(|| {
                forms.push(form.clone());
                out.add_fresh(0, draft.name(i as Elem))
            });
            map.push(e);
        }
        let zero = snf.zero();
        if !index.contains_key(&zero) {
            index.insert(zero.clone(), out.add_fresh(0, "0"));
            forms.push(zero.clone());
        }
        let finite = snf.free_rank() == 0;
        if snf.order().is_some_and(|o| o > self.cap as u128) {
            return Err(ClassError::Cap(self.cap));
        }
        let mut gens: Vec<Elem> = map.clone();
        gens.sort();
        gens.dedup();
        let mut queue = VecDeque::from([(index[&zero], 0usize)]);
        let mut seen = std::collections::HashSet::from([index[&zero]]);
        while let Some((x, depth)) = queue.pop_front() {
            if !finite && depth >= self.window {
                continue;
            }
            for &g in &gens {
                for sign in [1i128, -1] {
                    let y = snf.add(&forms[x as usize], &snf.scale(&forms[g as usize], sign));
                    let e = match index.get(&y) {
                        Some(&e) => e,
                        None => {
                            if out.len() >= self.cap {
                                return Err(ClassError::Cap(self.cap));
                            }
                            let name = if x == index[&zero] {
                                format!("-{}", out.name(g))
                            } else {
                                format!("{}{}{}", out.name(x), if sign > 0 { "+" } else { "-" }, out.name(g))
                            };
                            let e = out.add_fresh(0, &name);
                            index.insert(y.clone(), e);
                            forms.push(y);
                            e
                        }
                    };
                    if seen.insert(e) {
                        queue.push_back((e, depth + 1));
                    }
                }
            }
        }
        let elems: Vec<Elem> = out.elements().collect();
        out.set_value(ZERO, vec![], index[&zero])?;
        for &x in &elems {
            for &y in &elems {
                if let Some(&s) = index.get(&snf.add(&forms[x as usize], &forms[y as usize])) {
                    out.set_value(PLUS, vec![x, y], s)?;
                }
            }
            if let Some(&m) = index.get(&snf.scale(&forms[x as usize], -1)) {
                out.set_value(NEG, vec![x], m)?;
            }
            if let Kind::Vector(q) = self.kind {
                for k in 0..q {
                    let s = index[&snf.scale(&forms[x as usize], k as i128)];
                    out.set_value(Self::smul(k), vec![x], s)?;
                }
            }
        }
        if !finite {
            out.seal();
        }
        Ok(Completion { structure: out, map })
    }

    fn invariant_lists(max_order: u64) -> Vec<Vec<u64>> {
        // d1 | d2 | ... with every d >= 2
        fn go(prefix: &mut Vec<u64>, order: u64, max: u64, out: &mut Vec<Vec<u64>>) {
            out.push(prefix.clone());
            let last = prefix.last().copied().unwrap_or(1);
            let mut d = if prefix.is_empty() { 2 } else { last };
            while order * d <= max {
                if d % last == 0 {
                    prefix.push(d);
                    go(prefix, order * d, max, out);
                    prefix.pop();
                }
                d += if prefix.is_empty() { 1 } else { last };
            }
        }
        let mut out = vec![];
        go(&mut vec![], 1, max_order, &mut out);
        out
    }
}

pub fn abelian_group(invariants: &[u64]) -> Structure {
    Linear::abelian_groups().from_invariants(invariants)
}

impl ClassOps for Linear {
    fn name(&self) -> String {
        match self.kind {
            Kind::Vector(q) => format!("vec({q})"),
            Kind::Abelian => "abgrp".into(),
        }
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        if let (Kind::Vector(q), true) = (self.kind, s.is_total()) {
            return coordinates(s, q).map(|_| ());
        }
        let (snf, nf) = self.normal_forms(s);
        let mut index = HashMap::new();
        for e in s.elements() {
            if let Some(other) = index.insert(nf[e as usize].clone(), e) {
                return Err(format!("`{}` and `{}` are forced equal", s.name(other), s.name(e)));
            }
        }
        if let Some((f, t, v)) = self.forced_entries(s, &snf, &index, &nf).into_iter().next() {
            return Err(format!("{}({}) is forced to be `{}`", self.sig.functions()[f].name, s.names_of(&t), s.name(v)));
        }
        Ok(())
    }

    fn complete_within(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let (snf, nf) = self.normal_forms(draft);
        let mut out = Structure::new(self.sig.clone());
        let mut index: HashMap<Vec<i128>, Elem> = HashMap::new();
        let mut forms = vec![];
        let map: Vec<Elem> = draft
            .elements()
            .map(|e| {
                *index.entry(nf[e as usize].clone()).or_insert_with(|| {
                    forms.push(nf[e as usize].clone());
                    out.add_fresh(0, draft.name(e))
                })
            })
            .collect();
        for (f, args, v) in draft.all_entries() {
            let a2: Vec<Elem> = args.iter().map(|&x| map[x as usize]).collect();
            if out.value(f, &a2).is_none() {
                out.set_value(f, a2, map[v as usize])?;
            }
        }
        for (f, t, v) in self.forced_entries(&out, &snf, &index, &forms) {
            out.set_value(f, t, v)?;
        }
        out.seal();
        Ok(Completion { structure: out, map })
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        self.materialize(draft)
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        match self.kind {
            Kind::Vector(q) => (0..).take_while(|&d| (q as usize).pow(d) <= max_size).map(|d| self.from_invariants(&vec![q as u64; d as usize])).collect(),
            Kind::Abelian => Self::invariant_lists(max_size as u64).iter().map(|ds| self.from_invariants(ds)).collect(),
        }
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.members(n).into_iter().filter(|m| m.len() == n).flat_map(|m| relabelings(&m)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let mut out = vec![];
        let mut draft = a.clone();
        let x = draft.add_fresh(0, "x");
        if let Ok(c) = self.complete(&draft) {
            out.push(PointExtension { embed: c.map[..a.len()].to_vec(), point: c.map[x as usize], structure: c.structure });
        }
        if self.kind == Kind::Abelian {
            for k in [2u64, 3] {
                let cyc = self.from_invariants(&[k]);
                let (Some(za), Some(zc)) = (a.value(ZERO, &[]), cyc.value(ZERO, &[])) else { continue };
                let g = cyc.lookup(0, "g").unwrap();
                if let Ok((d, maps)) = colimit(self, &[a, &cyc], &[((0, za), (1, zc))]) {
                    out.push(PointExtension { structure: d, embed: maps[0].clone(), point: maps[1][g as usize] });
                }
            }
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let options = self.members(size.max(1));
        options[rng.gen_range(0..options.len())].clone()
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        let x = || Term::var("x", 0);
        let y = || Term::var("y", 0);
        let z = || Term::var("z", 0);
        let plus = |a: Term, b: Term| Term::app(PLUS, vec![a, b]);
        let zero = || Term::app(ZERO, vec![]);
        let ne = |a: Term, b: Term| QfFormula::not(QfFormula::eq(a, b));
        let mut out = vec![
            ne(plus(x(), y()), plus(y(), x())),
            ne(plus(plus(x(), y()), z()), plus(x(), plus(y(), z()))),
            ne(plus(x(), zero()), x()),
            ne(plus(x(), Term::app(NEG, vec![x()])), zero()),
        ];
        if let Kind::Vector(q) = self.kind {
            let mut multiple = zero();
            for k in 0..q {
                out.push(ne(Term::app(Self::smul(k), vec![x()]), multiple.clone()));
                multiple = if k == 0 { x() } else { plus(multiple, x()) };
            }
            out.push(ne(multiple, zero()));
        }
        out
    }

    fn locally_finite(&self) -> bool {
        matches!(self.kind, Kind::Vector(_))
    }

    fn condition5(&self) -> Condition5 {
        Condition5::Trusted("free independence equals algebraic independence".into())
    }
}

/// Coordinates of a total structure that is an `F_q`-vector space, found by
/// adjoining basis vectors greedily and checked against every table entry.
fn coordinates(s: &Structure, q: u32) -> Result<Vec<Vec<u32>>, String> {
    let zero = s.value(ZERO, &[]).ok_or("no zero")?;
    let mut coord: Vec<Option<Vec<u32>>> = vec![None; s.len()];
    coord[zero as usize] = Some(vec![]);
    let mut span = vec![zero];
    let mut dim = 0;
    while let Some(b) = s.elements().find(|&e| coord[e as usize].is_none()) {
        let mut grown = span.clone();
        for c in 1..q {
            let cb = s.value(Linear::smul(c), &[b]).ok_or("missing scalar multiple")?;
            for &v in &span {
                let w = s.value(PLUS, &[v, cb]).ok_or("missing sum")?;
                let mut cw = coord[v as usize].clone().unwrap();
                cw.resize(dim + 1, 0);
                cw[dim] = c;
                if let Some(old) = &coord[w as usize] {
                    let mut old = old.clone();
                    old.resize(dim + 1, 0);
                    let other = span.iter().chain(&grown).copied().find(|&x| x != w && coord[x as usize].as_ref().is_some_and(|o| {
                        let mut o = o.clone();
                        o.resize(dim + 1, 0);
                        o == cw
                    }));
                    let _ = old;
                    return Err(format!("`{}` and `{}` are forced equal", s.name(w), s.name(other.unwrap_or(b))));
                }
                coord[w as usize] = Some(cw);
                grown.push(w);
            }
        }
        span = grown;
        dim += 1;
    }
    let coord: Vec<Vec<u32>> = coord
        .into_iter()
        .map(|c| {
            let mut c = c.unwrap();
            c.resize(dim, 0);
            c
        })
        .collect();
    let by_coord: HashMap<&[u32], Elem> = s.elements().map(|e| (coord[e as usize].as_slice(), e)).collect();
    let combine = |xs: &[(u32, Elem)]| -> Vec<u32> {
        (0..dim).map(|i| xs.iter().map(|&(k, x)| k * coord[x as usize][i]).sum::<u32>() % q).collect()
    };
    for (f, args, v) in s.all_entries() {
        let want = match f {
            ZERO => vec![0; dim],
            PLUS => combine(&[(1, args[0]), (1, args[1])]),
            NEG => combine(&[(q - 1, args[0])]),
            k => combine(&[((k - 3) as u32, args[0])]),
        };
        if want != coord[v as usize] {
            return Err(format!("{}({}) is forced to be `{}`", s.signature().functions()[f].name, s.names_of(args), s.name(by_coord[want.as_slice()])));
        }
    }
    Ok(coord)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::free_amalgam;
    use crate::structure::Elem;

    #[test]
    fn spaces_and_groups_have_expected_orders() {
        let v = Linear::vector_space(2).unwrap();
        let sizes: Vec<usize> = v.members(8).iter().map(Structure::len).collect();
        assert_eq!(sizes, vec![1, 2, 4, 8]);
        let ab = Linear::abelian_groups();
        // groups of order <= 8: 1,2,3,4(2),5,6,7,8(3)
        assert_eq!(ab.members(8).len(), 11);
        assert!(ab.members(8).iter().all(|g| ab.contains(g)));
        assert!(Linear::vector_space(4).is_err());
    }

    #[test]
    fn three_g_is_zero() {
        let z3 = abelian_group(&[3]);
        let g = z3.lookup(0, "g").unwrap();
        let gg = z3.value(PLUS, &[g, g]).unwrap();
        assert_eq!(z3.value(PLUS, &[gg, g]), z3.value(ZERO, &[]));
    }

    #[test]
    fn dimension_formula_for_amalgams() {
        let v = Linear::vector_space(2).unwrap();
        let d2 = v.from_invariants(&[2, 2]);
        let d1 = v.from_invariants(&[2]);
        let g2 = d2.lookup(0, "g").unwrap();
        let zero = |s: &Structure| s.value(ZERO, &[]).unwrap();
        let g1 = d1.lookup(0, "g").unwrap();
        let ja: Vec<Elem> = d1.elements().map(|e| if e == g1 { g2 } else { zero(&d2) }).collect();
        let r = free_amalgam(&v, &d1, &d2, &d2, &ja, &ja).unwrap();
        assert_eq!(r.amalgam.len(), 8);
    }

    #[test]
    fn broken_tables_are_rejected() {
        let v = Linear::vector_space(2).unwrap();
        let mut s = v.from_invariants(&[2]);
        let g = s.lookup(0, "g").unwrap();
        let mut t = Structure::new(s.signature().clone());
        for e in s.elements() {
            t.add_element(0, s.name(e)).unwrap();
        }
        for (f, args, val) in s.all_entries() {
            let val = if f == PLUS && *args == [g, g] { g } else { val };
            t.set_value(f, args.clone(), val).unwrap();
        }
        assert!(!v.contains(&t));
        s.seal();
        assert!(v.contains(&s));
    }

    #[test]
    fn free_rank_is_truncated_to_a_window() {
        let ab = Linear::abelian_groups().with_window(2);
        let mut draft = Structure::new(ab.signature().clone());
        draft.add_element(0, "x").unwrap();
        let c = ab.complete(&draft).unwrap();
        // -2x .. 2x
        assert_eq!(c.structure.len(), 5);
        assert!(!c.structure.is_total());
        assert!(ab.contains(&c.structure));
    }
}
