//! Relational base classes: pure sets, simple graphs, and plain equivalence
//! relations (the last one lacks independent 3-amalgamation).

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{dedupe_iso, ClassError, ClassOps, Completion, Condition5, Dsu, PointExtension};
use crate::formula::QfFormula;
use crate::signature::{Signature, SortKind};
use crate::structure::{Elem, Structure};
use crate::term::Term;

fn plain(sig: &Arc<Signature>, n: usize) -> Structure {
    let mut s = Structure::new(sig.clone());
    for i in 0..n {
        s.add_element(0, &format!("e{i}")).unwrap();
    }
    s
}

fn add_point(a: &Structure) -> (Structure, Elem) {
    let mut b = a.clone();
    let x = b.add_fresh(0, "x");
    (b, x)
}

fn identity_completion(draft: &Structure) -> Completion {
    Completion { structure: draft.clone(), map: draft.elements().collect() }
}

#[derive(Debug)]
pub struct Sets {
    sig: Arc<Signature>,
}

impl Sets {
    pub fn new() -> Self {
        Self::with_sort("S")
    }

    pub fn with_sort(name: &str) -> Self {
        let mut sig = Signature::new();
        sig.add_sort(name, SortKind::Object).unwrap();
        Sets { sig: Arc::new(sig) }
    }
}

impl Default for Sets {
    fn default() -> Self {
        Self::new()
    }
}

impl ClassOps for Sets {
    fn name(&self) -> String {
        "sets".into()
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, _: &Structure) -> Result<(), String> {
        Ok(())
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        Ok(identity_completion(draft))
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        (0..=max_size).map(|n| plain(&self.sig, n)).collect()
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        vec![plain(&self.sig, n)]
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let (b, x) = add_point(a);
        vec![PointExtension { structure: b, embed: a.elements().collect(), point: x }]
    }

    fn random_member(&self, _: &mut dyn RngCore, size: usize) -> Structure {
        plain(&self.sig, size)
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        vec![]
    }

    fn locally_finite(&self) -> bool {
        true
    }

    fn condition5(&self) -> Condition5 {
        Condition5::Trusted("disjoint unions".into())
    }
}

fn binary_sig(sort: &str, rel: &str) -> Arc<Signature> {
    let mut sig = Signature::new();
    let v = sig.add_sort(sort, SortKind::Object).unwrap();
    sig.add_relation(rel, &[v, v]).unwrap();
    Arc::new(sig)
}

fn e(x: &str, y: &str) -> QfFormula {
    QfFormula::Rel(0, vec![Term::var(x, 0), Term::var(y, 0)])
}

#[derive(Debug)]
pub struct Graphs {
    sig: Arc<Signature>,
}

impl Graphs {
    pub fn new() -> Self {
        Graphs { sig: binary_sig("V", "E") }
    }

    fn all_on(&self, n: usize) -> Vec<Structure> {
        let pairs: Vec<(Elem, Elem)> = (0..n as Elem).flat_map(|i| (i + 1..n as Elem).map(move |j| (i, j))).collect();
        (0u64..1 << pairs.len())
            .map(|mask| {
                let mut g = plain(&self.sig, n);
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        g.add_tuple(0, vec![i, j]).unwrap();
                        g.add_tuple(0, vec![j, i]).unwrap();
                    }
                }
                g
            })
            .collect()
    }
}

impl Default for Graphs {
    fn default() -> Self {
        Self::new()
    }
}

impl ClassOps for Graphs {
    fn name(&self) -> String {
        "graphs".into()
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        for t in s.tuples(0) {
            if t[0] == t[1] {
                return Err(format!("loop at `{}`", s.name(t[0])));
            }
            if !s.holds(0, &[t[1], t[0]]) {
                return Err(format!("edge `{}`-`{}` is not symmetric", s.name(t[0]), s.name(t[1])));
            }
        }
        Ok(())
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let mut s = draft.clone();
        for t in draft.tuples(0) {
            if t[0] == t[1] {
                return Err(ClassError::Inconsistent(format!("loop at `{}`", draft.name(t[0]))));
            }
            s.add_tuple(0, vec![t[1], t[0]])?;
        }
        Ok(Completion { structure: s, map: draft.elements().collect() })
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        (0..=max_size).flat_map(|n| dedupe_iso(self.all_on(n))).collect()
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        self.all_on(n)
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let n = a.len();
        (0u64..1 << n)
            .map(|mask| {
                let (mut b, x) = add_point(a);
                for y in 0..n as Elem {
                    if mask >> y & 1 == 1 {
                        b.add_tuple(0, vec![x, y]).unwrap();
                        b.add_tuple(0, vec![y, x]).unwrap();
                    }
                }
                PointExtension { structure: b, embed: a.elements().collect(), point: x }
            })
            .collect()
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let mut g = plain(&self.sig, size);
        for i in 0..size as Elem {
            for j in i + 1..size as Elem {
                if rng.gen_bool(0.5) {
                    g.add_tuple(0, vec![i, j]).unwrap();
                    g.add_tuple(0, vec![j, i]).unwrap();
                }
            }
        }
        g
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        vec![e("x", "x"), QfFormula::And(vec![e("x", "y"), QfFormula::not(e("y", "x"))])]
    }

    fn locally_finite(&self) -> bool {
        true
    }

    fn condition5(&self) -> Condition5 {
        Condition5::Trusted("relational free amalgams".into())
    }
}

/// Equivalence relations without a quotient sort.
#[derive(Debug)]
pub struct EqRelRaw {
    sig: Arc<Signature>,
}

impl EqRelRaw {
    pub fn new() -> Self {
        EqRelRaw { sig: binary_sig("V", "E") }
    }

    fn with_blocks(&self, n: usize, block: &[usize]) -> Structure {
        let mut s = plain(&self.sig, n);
        for i in 0..n {
            for j in 0..n {
                if block[i] == block[j] {
                    s.add_tuple(0, vec![i as Elem, j as Elem]).unwrap();
                }
            }
        }
        s
    }

    /// Restricted growth strings, one per set partition.
    fn partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![];
        let mut cur = vec![];
        fn go(n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for b in 0..=max {
                cur.push(b);
                go(n, cur, if b == max { max + 1 } else { max }, out);
                cur.pop();
            }
        }
        go(n, &mut cur, 0, &mut out);
        out
    }
}

impl Default for EqRelRaw {
    fn default() -> Self {
        Self::new()
    }
}

impl ClassOps for EqRelRaw {
    fn name(&self) -> String {
        "eqrel-raw".into()
    }

    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn check_member(&self, s: &Structure) -> Result<(), String> {
        let c = self.complete(s).map_err(|e| e.to_string())?;
        if c.structure.tuples(0) != s.tuples(0) {
            return Err("E is not an equivalence relation".into());
        }
        Ok(())
    }

    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let n = draft.len();
        let mut dsu = Dsu::new(n);
        for t in draft.tuples(0) {
            dsu.union(t[0] as usize, t[1] as usize);
        }
        let mut s = draft.clone();
        for i in 0..n {
            for j in 0..n {
                if dsu.find(i) == dsu.find(j) {
                    s.add_tuple(0, vec![i as Elem, j as Elem])?;
                }
            }
        }
        Ok(Completion { structure: s, map: draft.elements().collect() })
    }

    fn members(&self, max_size: usize) -> Vec<Structure> {
        (0..=max_size)
            .flat_map(|n| dedupe_iso(Self::partitions(n).iter().map(|b| self.with_blocks(n, b)).collect()))
            .collect()
    }

    fn labeled_members(&self, n: usize) -> Vec<Structure> {
        Self::partitions(n).iter().map(|b| self.with_blocks(n, b)).collect()
    }

    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension> {
        let mut reps: Vec<Elem> = vec![];
        for x in a.elements() {
            if !reps.iter().any(|&r| a.holds(0, &[r, x])) {
                reps.push(x);
            }
        }
        let mut out = vec![];
        for join in reps.iter().map(Some).chain([None]) {
            let (mut b, x) = add_point(a);
            b.add_tuple(0, vec![x, x]).unwrap();
            if let Some(&r) = join {
                for y in a.elements().filter(|&y| a.holds(0, &[r, y])) {
                    b.add_tuple(0, vec![x, y]).unwrap();
                    b.add_tuple(0, vec![y, x]).unwrap();
                }
            }
            out.push(PointExtension { structure: b, embed: a.elements().collect(), point: x });
        }
        out
    }

    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure {
        let blocks: Vec<usize> = (0..size).map(|_| rng.gen_range(0..size.max(1))).collect();
        self.with_blocks(size, &blocks)
    }

    fn forbidden(&self) -> Vec<QfFormula> {
        vec![
            QfFormula::not(e("x", "x")),
            QfFormula::And(vec![e("x", "y"), QfFormula::not(e("y", "x"))]),
            QfFormula::And(vec![e("x", "y"), e("y", "z"), QfFormula::not(e("x", "z"))]),
        ]
    }

    fn locally_finite(&self) -> bool {
        true
    }

    fn condition5(&self) -> Condition5 {
        Condition5::Refuted("classes merge through a shared element".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::free_amalgam;

    #[test]
    fn member_counts_up_to_isomorphism() {
        let sizes: Vec<usize> = (0..=5).map(|n| Graphs::new().members(n).len()).collect();
        assert_eq!(sizes, vec![1, 2, 4, 8, 19, 53]);
        assert_eq!(EqRelRaw::new().members(4).len(), 1 + 1 + 2 + 3 + 5);
    }

    #[test]
    fn free_amalgam_adds_no_edges() {
        let g = Graphs::new();
        let mut a = Structure::new(g.signature().clone());
        let x = a.add_element(0, "a").unwrap();
        let y = a.add_element(0, "b").unwrap();
        a.add_tuple(0, vec![x, y]).unwrap();
        a.add_tuple(0, vec![y, x]).unwrap();
        let mut b = Structure::new(g.signature().clone());
        let x2 = b.add_element(0, "a").unwrap();
        let z = b.add_element(0, "c").unwrap();
        b.add_tuple(0, vec![x2, z]).unwrap();
        b.add_tuple(0, vec![z, x2]).unwrap();
        let mut e = Structure::new(g.signature().clone());
        e.add_element(0, "a").unwrap();
        let r = free_amalgam(&g, &e, &a, &b, &[0], &[0]).unwrap();
        assert_eq!(r.amalgam.len(), 3);
        assert_eq!(r.amalgam.tuples(0).len(), 4);
        let (bi, ci) = (r.into_a.apply(y), r.into_b.apply(z));
        assert!(!r.amalgam.holds(0, &[bi, ci]));
    }

    #[test]
    fn eqrel_amalgam_merges_classes() {
        let k = EqRelRaw::new();
        let a = k.with_blocks(2, &[0, 0]);
        let b = k.with_blocks(2, &[0, 0]);
        let e = k.with_blocks(1, &[0]);
        let r = free_amalgam(&k, &e, &a, &b, &[0], &[0]).unwrap();
        assert_eq!(r.amalgam.tuples(0).len(), 9);
    }
}
