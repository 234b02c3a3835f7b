//! Backtracking search for homomorphisms and embeddings between finite
//! structures. Function entries of the source force values as soon as their
//! arguments are placed, which keeps algebraic searches nearly linear.

use std::collections::HashMap;

use thiserror::Error;

use crate::signature::{FunId, RelId};
use crate::structure::{check_reflection, Elem, Morphism, Structure};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("search budget exceeded")]
pub struct BudgetExceeded;

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub injective: bool,
    /// Reflect relations and function entries (implies an embedding when injective).
    pub reflect: bool,
    /// Maximum number of tentative assignments.
    pub budget: u64,
}

impl SearchOptions {
    pub fn embeddings(budget: u64) -> Self {
        SearchOptions { injective: true, reflect: true, budget }
    }

    pub fn homomorphisms(budget: u64) -> Self {
        SearchOptions { injective: false, reflect: false, budget }
    }
}

pub const DEFAULT_BUDGET: u64 = 5_000_000;

struct Search<'a> {
    a: &'a Structure,
    b: &'a Structure,
    opts: SearchOptions,
    map: Vec<Option<Elem>>,
    used: Vec<bool>,
    trail: Vec<Elem>,
    entries: Vec<(FunId, Vec<Elem>, Elem)>,
    entries_by_elem: Vec<Vec<usize>>,
    tuples_by_elem: Vec<Vec<(RelId, Vec<Elem>)>>,
    touch: Vec<usize>,
    partial_source: bool,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(a: &'a Structure, b: &'a Structure, opts: SearchOptions) -> Self {
        let mut entries_by_elem = vec![vec![]; a.len()];
        let mut entries = Vec::new();
        for (f, args, v) in a.all_entries() {
            for &x in args {
                entries_by_elem[x as usize].push(entries.len());
            }
            entries.push((f, args.clone(), v));
        }
        let mut tuples_by_elem = vec![vec![]; a.len()];
        let mut touch = vec![0; a.len()];
        for (r, t) in a.all_tuples() {
            let mut seen = Vec::new();
            for &x in t {
                if !seen.contains(&x) {
                    seen.push(x);
                    tuples_by_elem[x as usize].push((r, t.clone()));
                    touch[x as usize] += 1;
                }
            }
        }
        for (_, args, v) in &entries {
            for &x in args.iter().chain(std::iter::once(v)) {
                touch[x as usize] += 1;
            }
        }
        Search {
            a,
            b,
            opts,
            map: vec![None; a.len()],
            used: vec![false; b.len()],
            trail: vec![],
            entries,
            entries_by_elem,
            tuples_by_elem,
            touch,
            partial_source: !a.is_total(),
            nodes: 0,
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let x = self.trail.pop().unwrap();
            let y = self.map[x as usize].take().unwrap();
            if self.opts.injective {
                self.used[y as usize] = false;
            }
        }
    }

    fn img(&self, t: &[Elem]) -> Option<Vec<Elem>> {
        t.iter().map(|&x| self.map[x as usize]).collect()
    }

    /// Relation reflection for tuples over placed elements that contain `x`.
    fn reflect_ok(&self, x: Elem) -> bool {
        let sig = self.a.signature();
        for (r, sym) in sig.relations().iter().enumerate() {
            if !sym.args.contains(&self.a.sort_of(x)) {
                continue;
            }
            let pools: Vec<Vec<Elem>> = sym
                .args
                .iter()
                .map(|&s| self.a.elements_of(s).iter().copied().filter(|&e| self.map[e as usize].is_some()).collect())
                .collect();
            let mut ok = true;
            let mut idx = vec![0usize; pools.len()];
            if pools.iter().any(|p| p.is_empty()) {
                continue;
            }
            'outer: loop {
                let t: Vec<Elem> = idx.iter().zip(&pools).map(|(&i, p)| p[i]).collect();
                if t.contains(&x) && !self.a.holds(r, &t) && self.b.holds(r, &self.img(&t).unwrap()) {
                    ok = false;
                    break;
                }
                for k in (0..idx.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < pools[k].len() {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
            if !ok {
                return false;
            }
        }
        true
    }

    /// Places `x -> y` and everything it forces. On failure the caller undoes.
    fn assign(&mut self, x: Elem, y: Elem) -> bool {
        let mut work = vec![(x, y)];
        while let Some((x, y)) = work.pop() {
            match self.map[x as usize] {
                Some(z) if z == y => continue,
                Some(_) => return false,
                None => {}
            }
            if self.a.sort_of(x) != self.b.sort_of(y) || (self.opts.injective && self.used[y as usize]) {
                return false;
            }
            self.map[x as usize] = Some(y);
            if self.opts.injective {
                self.used[y as usize] = true;
            }
            self.trail.push(x);
            for (r, t) in &self.tuples_by_elem[x as usize] {
                if let Some(it) = self.img(t) {
                    if !self.b.holds(*r, &it) {
                        return false;
                    }
                }
            }
            if self.opts.reflect && !self.reflect_ok(x) {
                return false;
            }
            for &i in &self.entries_by_elem[x as usize] {
                let (f, args, v) = &self.entries[i];
                if let Some(ia) = self.img(args) {
                    match self.b.value(*f, &ia) {
                        Some(w) => work.push((*v, w)),
                        None => return false,
                    }
                }
            }
        }
        true
    }

    fn init(&mut self, seed: &[Option<Elem>]) -> bool {
        for (i, s) in seed.iter().enumerate() {
            if let Some(y) = s {
                if !self.assign(i as Elem, *y) {
                    return false;
                }
            }
        }
        let consts: Vec<usize> = (0..self.entries.len()).filter(|&i| self.entries[i].1.is_empty()).collect();
        for i in consts {
            let (f, _, v) = self.entries[i].clone();
            match self.b.value(f, &[]) {
                Some(w) if self.assign(v, w) => {}
                _ => return false,
            }
        }
        true
    }

    fn pick(&self) -> Option<Elem> {
        self.a
            .elements()
            .filter(|&x| self.map[x as usize].is_none())
            .max_by_key(|&x| {
                let linked = self.tuples_by_elem[x as usize]
                    .iter()
                    .filter(|(_, t)| t.iter().any(|&e| self.map[e as usize].is_some()))
                    .count();
                (linked, self.touch[x as usize], std::cmp::Reverse(x))
            })
    }

    fn run(&mut self, visit: &mut dyn FnMut(&[Elem]) -> bool) -> Result<bool, BudgetExceeded> {
        let Some(x) = self.pick() else {
            let full: Vec<Elem> = self.map.iter().map(|m| m.unwrap()).collect();
            if self.opts.reflect && self.partial_source && check_reflection(self.a, self.b, &full).is_err() {
                return Ok(false);
            }
            return Ok(visit(&full));
        };
        let sort = self.a.sort_of(x);
        for &y in self.b.elements_of(sort) {
            if self.opts.injective && self.used[y as usize] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.opts.budget {
                return Err(BudgetExceeded);
            }
            let mark = self.trail.len();
            if self.assign(x, y) && self.run(visit)? {
                self.undo(mark);
                return Ok(true);
            }
            self.undo(mark);
        }
        Ok(false)
    }
}

/// Enumerates maps `a -> b` extending `seed` (indexed by source element; may be
/// shorter than `a`). `visit` returns `true` to stop.
pub fn search_maps(
    a: &Structure,
    b: &Structure,
    seed: &[Option<Elem>],
    opts: SearchOptions,
    visit: &mut dyn FnMut(&[Elem]) -> bool,
) -> Result<(), BudgetExceeded> {
    let mut s = Search::new(a, b, opts);
    if !s.init(seed) {
        return Ok(());
    }
    s.run(visit).map(|_| ())
}

pub fn find_embeddings(a: &Structure, b: &Structure, seed: &[Option<Elem>], budget: u64) -> Result<Vec<Morphism>, BudgetExceeded> {
    let mut out = Vec::new();
    search_maps(a, b, seed, SearchOptions::embeddings(budget), &mut |m| {
        out.push(Morphism { map: m.to_vec(), embedding: true });
        false
    })?;
    Ok(out)
}

pub fn first_embedding(a: &Structure, b: &Structure, seed: &[Option<Elem>], budget: u64) -> Result<Option<Morphism>, BudgetExceeded> {
    let mut out = None;
    search_maps(a, b, seed, SearchOptions::embeddings(budget), &mut |m| {
        out = Some(Morphism { map: m.to_vec(), embedding: true });
        true
    })?;
    Ok(out)
}

pub fn find_homomorphisms(a: &Structure, b: &Structure, seed: &[Option<Elem>], budget: u64) -> Result<Vec<Vec<Elem>>, BudgetExceeded> {
    let mut out = Vec::new();
    search_maps(a, b, seed, SearchOptions::homomorphisms(budget), &mut |m| {
        out.push(m.to_vec());
        false
    })?;
    Ok(out)
}

/// An isomorphism `a -> b` extending `seed`, if any.
pub fn is_isomorphic_over(a: &Structure, b: &Structure, seed: &[Option<Elem>], budget: u64) -> Result<Option<Morphism>, BudgetExceeded> {
    let sig = a.signature();
    if a.len() != b.len() || (0..sig.sorts().len()).any(|s| a.elements_of(s).len() != b.elements_of(s).len()) {
        return Ok(None);
    }
    let counts = |s: &Structure| {
        (
            (0..sig.relations().len()).map(|r| s.tuples(r).len()).collect::<Vec<_>>(),
            (0..sig.functions().len()).map(|f| s.table(f).len()).collect::<Vec<_>>(),
        )
    };
    if counts(a) != counts(b) {
        return Ok(None);
    }
    first_embedding(a, b, seed, budget)
}

/// Seed vector from explicit pairs.
pub fn seed_from_pairs(len: usize, pairs: impl IntoIterator<Item = (Elem, Elem)>) -> Vec<Option<Elem>> {
    let mut seed = vec![None; len];
    for (x, y) in pairs {
        seed[x as usize] = Some(y);
    }
    seed
}

/// Seed that sends each element of `a` to the element of `b` with the same
/// name and sort, where one exists.
pub fn seed_by_names(a: &Structure, b: &Structure) -> Vec<Option<Elem>> {
    a.elements().map(|e| b.lookup(a.sort_of(e), a.name(e))).collect()
}

/// Image of each element under a map, as a lookup table.
pub fn inverse(map: &[Elem]) -> HashMap<Elem, Elem> {
    map.iter().enumerate().map(|(i, &y)| (y, i as Elem)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{Signature, SortKind};
    use std::sync::Arc;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Structure {
        let mut sig = Signature::new();
        let v = sig.add_sort("V", SortKind::Object).unwrap();
        sig.add_relation("E", &[v, v]).unwrap();
        let mut g = Structure::new(Arc::new(sig));
        for i in 0..n {
            g.add_element(0, &format!("v{i}")).unwrap();
        }
        for &(a, b) in edges {
            g.add_tuple(0, vec![a as Elem, b as Elem]).unwrap();
            g.add_tuple(0, vec![b as Elem, a as Elem]).unwrap();
        }
        g
    }

    fn brute_embeddings(a: &Structure, b: &Structure) -> usize {
        let n = a.len();
        let m = b.len() as u32;
        let mut count = 0;
        let total = (m as u64).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let map: Vec<Elem> = (0..n)
                .map(|_| {
                    let d = (c % m as u64) as Elem;
                    c /= m as u64;
                    d
                })
                .collect();
            if Morphism::embedding(a, b, map).is_ok() {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn edge_into_triangle() {
        let e = graph(2, &[(0, 1)]);
        let t = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(find_embeddings(&e, &t, &[], DEFAULT_BUDGET).unwrap().len(), 6);
        assert_eq!(brute_embeddings(&e, &t), 6);
        assert_eq!(find_embeddings(&e, &graph(2, &[]), &[], DEFAULT_BUDGET).unwrap().len(), 0);
        let one = graph(1, &[]);
        assert_eq!(find_embeddings(&one, &one, &[], DEFAULT_BUDGET).unwrap().len(), 1);
    }

    #[test]
    fn embeddings_match_brute_force_on_small_graphs() {
        let path = graph(3, &[(0, 1), (1, 2)]);
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let k4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]);
        for (a, b) in [(&path, &c4), (&path, &k4), (&c4, &k4), (&c4, &c4)] {
            assert_eq!(find_embeddings(a, b, &[], DEFAULT_BUDGET).unwrap().len(), brute_embeddings(a, b));
        }
    }

    #[test]
    fn isomorphism_over_shared_vertex() {
        let c3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let c3b = graph(3, &[(2, 1), (1, 0), (0, 2)]);
        let p3 = graph(3, &[(0, 1), (1, 2)]);
        let seed = seed_from_pairs(3, [(0, 0)]);
        assert!(is_isomorphic_over(&c3, &c3b, &seed, DEFAULT_BUDGET).unwrap().is_some());
        assert!(is_isomorphic_over(&c3, &p3, &seed, DEFAULT_BUDGET).unwrap().is_none());
    }

    #[test]
    fn budget_is_reported() {
        let k4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]);
        assert_eq!(find_embeddings(&graph(4, &[]), &graph(8, &[]), &[], 3), Err(BudgetExceeded));
        assert!(find_embeddings(&k4, &k4, &[], 1000).is_ok());
    }
}
