//! Classes of finite structures as executable objects.
//!
//! Every class exposes a free completion: given a draft (any structure over
//! the class signature, possibly with partial tables) it returns the initial
//! member receiving a homomorphism from the draft. Free amalgams, generic
//! elements and cube completions are all colimits computed by gluing drafts
//! and completing them.

mod basic;
mod combinators;
mod expr;
mod linear;
mod param;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use thiserror::Error;

use crate::formula::QfFormula;
use crate::search::{find_homomorphisms, is_isomorphic_over, search_maps, BudgetExceeded, SearchOptions};
use crate::signature::{Signature, SortId};
use crate::structure::{check_reflection, Elem, Morphism, MorphismError, Structure, StructureError};

pub use basic::{EqRelRaw, Graphs, Sets};
pub use combinators::{EqQuot, GenBij, GenFun, GenPred, GenSub};
pub use expr::{parse_class, ClassExpr};
pub use linear::{abelian_group, Linear};
pub use param::ParamClass;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassError {
    #[error("not a member: {0}")]
    NotMember(String),
    #[error("no member receives this configuration: {0}")]
    Inconsistent(String),
    #[error("not an amalgam: {0}")]
    NotAmalgam(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("element cap {0} exceeded")]
    Cap(usize),
    #[error("class expression: {0}")]
    Expression(String),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

/// Status of the algebraically independent 3-amalgamation property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition5 {
    Trusted(String),
    Unverified,
    Refuted(String),
}

/// Free completion of a draft. `map` sends draft elements to the completion
/// and need not be injective.
#[derive(Clone, Debug)]
pub struct Completion {
    pub structure: Structure,
    pub map: Vec<Elem>,
}

/// A one-point extension `<A, x>` with the embedding of `A` and the new point.
#[derive(Clone, Debug)]
pub struct PointExtension {
    pub structure: Structure,
    pub embed: Vec<Elem>,
    pub point: Elem,
}

pub trait ClassOps: Send + Sync + fmt::Debug {
    /// Class expression naming this class.
    fn name(&self) -> String;
    fn signature(&self) -> &Arc<Signature>;
    /// Membership; structures with a frontier are members when they embed in one.
    fn check_member(&self, s: &Structure) -> Result<(), String>;
    fn complete(&self, draft: &Structure) -> Result<Completion, ClassError>;
    /// Members with at most `max_size` elements, one per isomorphism type.
    fn members(&self, max_size: usize) -> Vec<Structure>;
    /// All members whose carrier is exactly elements `0..n` of the single
    /// object sort (same names `e0..`), for one-sorted classes.
    fn labeled_members(&self, n: usize) -> Vec<Structure>;
    /// A finite menu of extensions generated by `a` and one new element,
    /// covering every isomorphism type over `a` the class provides.
    fn one_point_extensions(&self, a: &Structure) -> Vec<PointExtension>;
    fn random_member(&self, rng: &mut dyn RngCore, size: usize) -> Structure;
    fn forbidden(&self) -> Vec<QfFormula>;
    fn locally_finite(&self) -> bool;
    fn condition5(&self) -> Condition5;
    fn parameterized(&self) -> Option<&ParamClass> {
        None
    }

    /// The completion cut down to the image of the draft: forced
    /// identifications and forced entries among existing elements only.
    fn complete_within(&self, draft: &Structure) -> Result<Completion, ClassError> {
        let c = self.complete(draft)?;
        let image: BTreeSet<Elem> = c.map.iter().copied().collect();
        let (structure, back) = c.structure.induced(&image);
        let pos: HashMap<Elem, Elem> = back.iter().enumerate().map(|(i, &e)| (e, i as Elem)).collect();
        Ok(Completion { map: c.map.iter().map(|e| pos[e]).collect(), structure })
    }

    fn contains(&self, s: &Structure) -> bool {
        self.check_member(s).is_ok()
    }

    /// `<emptyset>`, the structure generated by the constants.
    fn constants_structure(&self) -> Structure {
        self.complete(&Structure::new(self.signature().clone())).expect("empty draft completes").structure
    }
}

pub type ClassHandle = Arc<dyn ClassOps>;

/// Membership of a structure with a frontier: it must embed in its completion.
pub(crate) fn fragment_member(class: &dyn ClassOps, s: &Structure) -> Result<(), String> {
    let c = class.complete(s).map_err(|e| e.to_string())?;
    Morphism::embedding(s, &c.structure, c.map).map(|_| ()).map_err(|e| e.to_string())
}

#[derive(Clone, Debug)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    /// Keeps the smaller index as representative.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (x, y) = (self.find(a), self.find(b));
        if x == y {
            return false;
        }
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        self.parent[hi] = lo;
        true
    }
}

/// A glued structure with one map per part.
pub type Glued = (Structure, Vec<Vec<Elem>>);
/// Two `(part, element)` entries to be glued together.
pub type Identification = ((usize, Elem), (usize, Elem));

/// Disjoint union of `parts` modulo `ids` and the congruence generated by
/// function tables. Open frontiers of the parts become explicit tuples so
/// that entries created by gluing stay distinguishable from declared ones.
pub fn glue(
    sig: &Arc<Signature>,
    parts: &[&Structure],
    ids: &[Identification],
) -> Result<Glued, ClassError> {
    let offs: Vec<usize> = parts.iter().scan(0, |acc, p| {
        let o = *acc;
        *acc += p.len();
        Some(o)
    }).collect();
    let total: usize = parts.iter().map(|p| p.len()).sum();
    let global = |(i, e): (usize, Elem)| offs[i] + e as usize;
    let sort_of = |g: usize| {
        let i = offs.partition_point(|&o| o <= g) - 1;
        parts[i].sort_of((g - offs[i]) as Elem)
    };
    let mut dsu = Dsu::new(total);
    for &(x, y) in ids {
        if sort_of(global(x)) != sort_of(global(y)) {
            return Err(ClassError::Inconsistent("identified elements have different sorts".into()));
        }
        dsu.union(global(x), global(y));
    }
    loop {
        let mut draft = Structure::new(sig.clone());
        let mut rep_elem: HashMap<usize, Elem> = HashMap::new();
        let mut maps = Vec::new();
        for (i, p) in parts.iter().enumerate() {
            let mut m = Vec::with_capacity(p.len());
            for e in p.elements() {
                let r = dsu.find(offs[i] + e as usize);
                let d = *rep_elem.entry(r).or_insert_with(|| draft.add_fresh(p.sort_of(e), p.name(e)));
                m.push(d);
            }
            maps.push(m);
        }
        let mut merges = Vec::new();
        let mut origin: HashMap<(usize, Vec<Elem>), usize> = HashMap::new();
        for (i, p) in parts.iter().enumerate() {
            for (r, t) in p.all_tuples() {
                draft.add_tuple(r, t.iter().map(|&x| maps[i][x as usize]).collect())?;
            }
            for (f, args, v) in p.all_entries() {
                let a2: Vec<Elem> = args.iter().map(|&x| maps[i][x as usize]).collect();
                let gv = offs[i] + v as usize;
                match origin.get(&(f, a2.clone())) {
                    Some(&g0) if dsu.find(g0) != dsu.find(gv) => merges.push((g0, gv)),
                    Some(_) => {}
                    None => {
                        origin.insert((f, a2.clone()), gv);
                        draft.set_value(f, a2, maps[i][v as usize])?;
                    }
                }
            }
        }
        if !merges.is_empty() {
            for (a, b) in merges {
                dsu.union(a, b);
            }
            continue;
        }
        for (i, p) in parts.iter().enumerate() {
            for f in 0..sig.functions().len() {
                let undefined: Vec<Vec<Elem>> = if p.is_open(f) {
                    p.undefined_entries(f)
                } else {
                    p.explicit_frontier(f).iter().cloned().collect()
                };
                for t in undefined {
                    let a2: Vec<Elem> = t.iter().map(|&x| maps[i][x as usize]).collect();
                    if draft.value(f, &a2).is_none() {
                        draft.mark_frontier(f, a2)?;
                    }
                }
            }
        }
        return Ok((draft, maps));
    }
}

/// Colimit of `parts` glued along `ids`, computed inside the class.
pub fn colimit(
    class: &dyn ClassOps,
    parts: &[&Structure],
    ids: &[Identification],
) -> Result<Glued, ClassError> {
    let (draft, maps) = glue(class.signature(), parts, ids)?;
    let c = class.complete(&draft)?;
    let maps = maps.into_iter().map(|m| m.into_iter().map(|d| c.map[d as usize]).collect()).collect();
    Ok((c.structure, maps))
}

#[derive(Clone, Debug)]
pub struct AmalgamResult {
    pub amalgam: Structure,
    pub into_a: Morphism,
    pub into_b: Morphism,
}

/// `A (+)_E B` along the embeddings `ja: E -> A` and `jb: E -> B`.
pub fn free_amalgam(
    class: &dyn ClassOps,
    e: &Structure,
    a: &Structure,
    b: &Structure,
    ja: &[Elem],
    jb: &[Elem],
) -> Result<AmalgamResult, ClassError> {
    for (name, s) in [("left", a), ("right", b)] {
        class.check_member(s).map_err(|m| ClassError::NotMember(format!("{name} side: {m}")))?;
    }
    Morphism::embedding(e, a, ja.to_vec())?;
    Morphism::embedding(e, b, jb.to_vec())?;
    let ids: Vec<_> = e.elements().map(|x| ((0, ja[x as usize]), (1, jb[x as usize]))).collect();
    let (d, maps) = colimit(class, &[a, b], &ids)?;
    let into_a = Morphism::embedding(a, &d, maps[0].clone()).map_err(|m| ClassError::NotAmalgam(format!("left side: {m}")))?;
    let into_b = Morphism::embedding(b, &d, maps[1].clone()).map_err(|m| ClassError::NotAmalgam(format!("right side: {m}")))?;
    let base: BTreeSet<Elem> = e.elements().map(|x| into_a.apply(ja[x as usize])).collect();
    let meet: BTreeSet<Elem> = into_a.image().intersection(&into_b.image()).copied().collect();
    if meet != base {
        return Err(ClassError::NotAmalgam("images meet outside the base".into()));
    }
    Ok(AmalgamResult { amalgam: d, into_a, into_b })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PushoutReport {
    pub targets: usize,
    pub pairs: usize,
    pub violations: Vec<String>,
}

impl PushoutReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For every target and every pair of homomorphisms from `A` and `B` agreeing
/// on `E`, checks that exactly one homomorphism out of the amalgam factors them.
#[allow(clippy::too_many_arguments)]
pub fn verify_pushout(
    e: &Structure,
    a: &Structure,
    b: &Structure,
    ja: &[Elem],
    jb: &[Elem],
    result: &AmalgamResult,
    targets: &[Structure],
    budget: u64,
) -> Result<PushoutReport, BudgetExceeded> {
    let d = &result.amalgam;
    let mut report = PushoutReport { targets: targets.len(), ..Default::default() };
    for (ti, t) in targets.iter().enumerate() {
        for fa in find_homomorphisms(a, t, &[], budget)? {
            let mut seed = vec![None; b.len()];
            for x in e.elements() {
                seed[jb[x as usize] as usize] = Some(fa[ja[x as usize] as usize]);
            }
            for fb in find_homomorphisms(b, t, &seed, budget)? {
                report.pairs += 1;
                let mut dseed: Vec<Option<Elem>> = vec![None; d.len()];
                let mut clash = false;
                for (src, img, f) in [(a, &result.into_a, &fa), (b, &result.into_b, &fb)] {
                    for x in src.elements() {
                        let slot = &mut dseed[img.apply(x) as usize];
                        match slot {
                            Some(v) if *v != f[x as usize] => clash = true,
                            _ => *slot = Some(f[x as usize]),
                        }
                    }
                }
                let mut count = 0;
                if !clash {
                    search_maps(d, t, &dseed, SearchOptions::homomorphisms(budget), &mut |_| {
                        count += 1;
                        count > 1
                    })?;
                }
                if count != 1 && report.violations.len() < 5 {
                    report.violations.push(format!(
                        "target #{ti}: left map {:?}, right map {:?} factor {} times",
                        names(a, t, &fa),
                        names(b, t, &fb),
                        count
                    ));
                }
            }
        }
    }
    Ok(report)
}

fn names(src: &Structure, tgt: &Structure, map: &[Elem]) -> Vec<String> {
    src.elements().map(|x| format!("{}->{}", src.name(x), tgt.name(map[x as usize]))).collect()
}

/// `A` plus a free element of `sort`, completed in the class.
pub fn generic_element(class: &dyn ClassOps, sort: SortId, a: &Structure) -> Result<PointExtension, ClassError> {
    class.check_member(a).map_err(ClassError::NotMember)?;
    let mut draft = a.clone();
    let x = draft.add_fresh(sort, "x");
    let c = class.complete(&draft)?;
    let embed = c.map[..a.len()].to_vec();
    Morphism::embedding(a, &c.structure, embed.clone())?;
    Ok(PointExtension { point: c.map[x as usize], structure: c.structure, embed })
}

/// Checks that every homomorphism `A -> T` extends to the generic extension
/// with the new point sent anywhere of its sort.
pub fn verify_generic_element(
    a: &Structure,
    ext: &PointExtension,
    targets: &[Structure],
    budget: u64,
) -> Result<Vec<String>, BudgetExceeded> {
    let mut bad = Vec::new();
    let sort = ext.structure.sort_of(ext.point);
    for (ti, t) in targets.iter().enumerate() {
        for h in find_homomorphisms(a, t, &[], budget)? {
            for &y in t.elements_of(sort) {
                let mut seed = vec![None; ext.structure.len()];
                for x in a.elements() {
                    seed[ext.embed[x as usize] as usize] = Some(h[x as usize]);
                }
                seed[ext.point as usize] = Some(y);
                let mut found = false;
                search_maps(&ext.structure, t, &seed, SearchOptions::homomorphisms(budget), &mut |_| {
                    found = true;
                    true
                })?;
                if !found {
                    bad.push(format!("target #{ti}: {:?} with point -> {}", names(a, t, &h), t.name(y)));
                }
            }
        }
    }
    Ok(bad)
}

/// The cube of the 3-amalgamation property, in terms of three outer
/// structures. `a_in_d0`, `a_in_d1` embed `A`; `b0_in_d0`, `b0_in_b` embed
/// `B0`; `b1_in_d1`, `b1_in_b` embed `B1`. `E` is implicit as the common
/// part of `A`, `B0` and `B1`.
#[derive(Clone, Debug)]
pub struct CubeInput {
    pub a: Structure,
    pub b0: Structure,
    pub b1: Structure,
    pub d0: Structure,
    pub d1: Structure,
    pub b: Structure,
    pub a_in_d0: Vec<Elem>,
    pub a_in_d1: Vec<Elem>,
    pub b0_in_d0: Vec<Elem>,
    pub b0_in_b: Vec<Elem>,
    pub b1_in_d1: Vec<Elem>,
    pub b1_in_b: Vec<Elem>,
}

#[derive(Clone, Debug)]
pub struct CubeOutput {
    pub d: Structure,
    pub d0_in_d: Vec<Elem>,
    pub d1_in_d: Vec<Elem>,
    pub b_in_d: Vec<Elem>,
}

fn image(map: &[Elem]) -> BTreeSet<Elem> {
    map.iter().copied().collect()
}

impl CubeInput {
    /// Checks the embeddings and the intersection conditions of the cube.
    pub fn validate(&self) -> Result<(), ClassError> {
        let pairs = [
            (&self.a, &self.d0, &self.a_in_d0),
            (&self.a, &self.d1, &self.a_in_d1),
            (&self.b0, &self.d0, &self.b0_in_d0),
            (&self.b0, &self.b, &self.b0_in_b),
            (&self.b1, &self.d1, &self.b1_in_d1),
            (&self.b1, &self.b, &self.b1_in_b),
        ];
        for (s, t, m) in pairs {
            Morphism::embedding(s, t, m.clone())?;
        }
        // E seen from A through D0 and D1 must be the same set of A-elements
        let e_via_0: BTreeSet<Elem> = self.a.elements().filter(|&x| image(&self.b0_in_d0).contains(&self.a_in_d0[x as usize])).collect();
        let e_via_1: BTreeSet<Elem> = self.a.elements().filter(|&x| image(&self.b1_in_d1).contains(&self.a_in_d1[x as usize])).collect();
        if e_via_0 != e_via_1 {
            return Err(ClassError::Inconsistent("A meets B0 and B1 in different bases".into()));
        }
        let inv0 = crate::search::inverse(&self.b0_in_d0);
        let inv1 = crate::search::inverse(&self.b1_in_d1);
        for &x in &e_via_0 {
            let y0 = inv0[&self.a_in_d0[x as usize]];
            let y1 = inv1[&self.a_in_d1[x as usize]];
            if self.b0_in_b[y0 as usize] != self.b1_in_b[y1 as usize] {
                return Err(ClassError::Inconsistent("cube does not commute over the base".into()));
            }
        }
        let meet: BTreeSet<Elem> = image(&self.b0_in_b).intersection(&image(&self.b1_in_b)).copied().collect();
        let base: BTreeSet<Elem> = e_via_0
            .iter()
            .map(|&x| self.b0_in_b[inv0[&self.a_in_d0[x as usize]] as usize])
            .collect();
        if meet != base {
            return Err(ClassError::Inconsistent("B0 and B1 meet outside the base".into()));
        }
        Ok(())
    }

    fn gluing(&self) -> Vec<((usize, Elem), (usize, Elem))> {
        let mut ids = Vec::new();
        for x in self.a.elements() {
            ids.push(((0, self.a_in_d0[x as usize]), (1, self.a_in_d1[x as usize])));
        }
        for y in self.b0.elements() {
            ids.push(((0, self.b0_in_d0[y as usize]), (2, self.b0_in_b[y as usize])));
        }
        for y in self.b1.elements() {
            ids.push(((1, self.b1_in_d1[y as usize]), (2, self.b1_in_b[y as usize])));
        }
        ids
    }
}

/// Colimit of the cube, then a check of the embeddings and of the three
/// intersection equalities. A failure here proves no completion exists,
/// since any completion receives a map from the colimit.
pub fn cube_colimit(class: &dyn ClassOps, cube: &CubeInput) -> Result<CubeOutput, ClassError> {
    cube.validate()?;
    let (d, maps) = colimit(class, &[&cube.d0, &cube.d1, &cube.b], &cube.gluing())?;
    let out = CubeOutput { d, d0_in_d: maps[0].clone(), d1_in_d: maps[1].clone(), b_in_d: maps[2].clone() };
    for (name, s, m) in [("D0", &cube.d0, &out.d0_in_d), ("D1", &cube.d1, &out.d1_in_d), ("B", &cube.b, &out.b_in_d)] {
        Morphism::embedding(s, &out.d, m.clone()).map_err(|e| ClassError::NotAmalgam(format!("{name} does not embed: {e}")))?;
    }
    check_cube_intersections(cube, &out).map_err(ClassError::NotAmalgam)?;
    Ok(out)
}

/// `D0 ∩ B = B0`, `D1 ∩ B = B1` and `D0 ∩ D1 = A`, as images in `D`.
pub fn check_cube_intersections(cube: &CubeInput, out: &CubeOutput) -> Result<(), String> {
    let comp = |outer: &[Elem], inner: &[Elem]| -> BTreeSet<Elem> { inner.iter().map(|&x| outer[x as usize]).collect() };
    let d0 = image(&out.d0_in_d);
    let d1 = image(&out.d1_in_d);
    let b = image(&out.b_in_d);
    let checks = [
        ("D0 and B", &d0, &b, comp(&out.d0_in_d, &cube.b0_in_d0)),
        ("D1 and B", &d1, &b, comp(&out.d1_in_d, &cube.b1_in_d1)),
        ("D0 and D1", &d0, &d1, comp(&out.d0_in_d, &cube.a_in_d0)),
    ];
    for (name, x, y, expected) in checks {
        let meet: BTreeSet<Elem> = x.intersection(y).copied().collect();
        if meet != expected {
            return Err(format!("{name} meet in {} elements, expected {}", meet.len(), expected.len()));
        }
    }
    Ok(())
}

/// Cube completion for classes whose 3-amalgamation is not refuted.
pub fn three_amalgamation(class: &dyn ClassOps, cube: &CubeInput) -> Result<CubeOutput, ClassError> {
    if let Condition5::Refuted(why) = class.condition5() {
        return Err(ClassError::Unsupported(format!("{} lacks independent 3-amalgamation ({why})", class.name())));
    }
    cube_colimit(class, cube)
}

/// Closed subsets of `s` (carriers of generated substructures), each once.
pub fn closed_subsets(s: &Structure) -> Vec<BTreeSet<Elem>> {
    let n = s.len();
    let mut seen = BTreeSet::new();
    for mask in 0u64..(1u64 << n) {
        let gens = (0..n as Elem).filter(|&i| mask >> i & 1 == 1);
        seen.insert(s.generated(gens));
    }
    seen.into_iter().collect()
}

/// The map `A (+)_E B -> D` induced by the inclusions of `A` and `B`.
pub fn canonical_map(d: &Structure, amalgam: &AmalgamResult, a_back: &[Elem], b_back: &[Elem], budget: u64) -> Result<Option<Vec<Elem>>, BudgetExceeded> {
    let mut seed: Vec<Option<Elem>> = vec![None; amalgam.amalgam.len()];
    for (i, &x) in a_back.iter().enumerate() {
        seed[amalgam.into_a.apply(i as Elem) as usize] = Some(x);
    }
    for (i, &x) in b_back.iter().enumerate() {
        let slot = &mut seed[amalgam.into_b.apply(i as Elem) as usize];
        if matches!(slot, Some(v) if *v != x) {
            return Ok(None);
        }
        *slot = Some(x);
    }
    let mut out = None;
    search_maps(&amalgam.amalgam, d, &seed, SearchOptions::homomorphisms(budget), &mut |m| {
        out = Some(m.to_vec());
        true
    })?;
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct FeuvrierReport {
    pub configurations: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub exhausted: bool,
}

impl FeuvrierReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && !self.exhausted
    }

    pub fn provenance(&self) -> Option<Condition5> {
        self.passed().then(|| Condition5::Trusted("free independence equals algebraic independence".into()))
    }
}

/// Over all members `D` with at most `max_size` elements and all generated
/// `E ⊆ A ∩ B` inside `D`: the canonical map `A (+)_E B -> <AB>` is an
/// embedding exactly when `A ∩ B = E`.
pub fn check_feuvrier(class: &dyn ClassOps, max_size: usize, budget: u64) -> FeuvrierReport {
    let mut report = FeuvrierReport::default();
    for d in class.members(max_size) {
        let closed = closed_subsets(&d);
        for sa in &closed {
            for sb in &closed {
                let both: BTreeSet<Elem> = sa.intersection(sb).copied().collect();
                let (a, a_back) = d.induced(sa);
                let (b, b_back) = d.induced(sb);
                for se in closed.iter().filter(|c| c.is_subset(&both)) {
                    report.configurations += 1;
                    let (e, e_back) = d.induced(se);
                    let pos = |back: &[Elem], x: Elem| back.iter().position(|&y| y == x).unwrap() as Elem;
                    let ja: Vec<Elem> = e_back.iter().map(|&x| pos(&a_back, x)).collect();
                    let jb: Vec<Elem> = e_back.iter().map(|&x| pos(&b_back, x)).collect();
                    let verdict = free_amalgam(class, &e, &a, &b, &ja, &jb).map_err(|e| e.to_string()).and_then(|am| {
                        match canonical_map(&d, &am, &a_back, &b_back, budget) {
                            Ok(Some(m)) => Ok(check_reflection(&am.amalgam, &d, &m).is_ok()),
                            Ok(None) => Err("no canonical map".into()),
                            Err(_) => Err("budget".into()),
                        }
                    });
                    let embeds = match verdict {
                        Ok(b) => b,
                        Err(msg) if msg == "budget" => {
                            report.exhausted = true;
                            continue;
                        }
                        Err(msg) => {
                            report.failures += 1;
                            report.first_failure.get_or_insert(msg);
                            continue;
                        }
                    };
                    let disjoint = both == *se;
                    if embeds != disjoint {
                        report.failures += 1;
                        report.first_failure.get_or_insert_with(|| {
                            format!(
                                "{}\nA = {:?}, B = {:?}, E = {:?}: canonical map {} an embedding, A ∩ B {} E",
                                crate::text::structure_to_string(&d, &class.name()),
                                names_of(&d, sa),
                                names_of(&d, sb),
                                names_of(&d, se),
                                if embeds { "is" } else { "is not" },
                                if disjoint { "=" } else { "≠" }
                            )
                        });
                    }
                }
            }
        }
    }
    report
}

pub(crate) fn names_of(s: &Structure, set: &BTreeSet<Elem>) -> Vec<String> {
    set.iter().map(|&e| s.name(e).to_string()).collect()
}

/// Invariant used to bucket structures before isomorphism tests.
fn iso_invariant(s: &Structure) -> Vec<usize> {
    let sig = s.signature();
    let mut inv: Vec<usize> = (0..sig.sorts().len()).map(|i| s.elements_of(i).len()).collect();
    inv.extend((0..sig.relations().len()).map(|r| s.tuples(r).len()));
    inv.extend((0..sig.functions().len()).map(|f| s.table(f).len()));
    let mut degrees: Vec<usize> = s
        .elements()
        .map(|e| s.all_tuples().filter(|(_, t)| t.contains(&e)).count() * 1000 + s.all_entries().filter(|(_, a, v)| *v == e || a.contains(&e)).count())
        .collect();
    degrees.sort();
    inv.extend(degrees);
    inv
}

/// Keeps one structure per isomorphism type, preserving first occurrences.
pub fn dedupe_iso(all: Vec<Structure>) -> Vec<Structure> {
    let mut buckets: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    let mut out: Vec<Structure> = Vec::new();
    for s in all {
        let key = iso_invariant(&s);
        let bucket = buckets.entry(key).or_default();
        let dup = bucket
            .iter()
            .any(|&i| matches!(is_isomorphic_over(&out[i], &s, &[], u64::MAX), Ok(Some(_))));
        if !dup {
            bucket.push(out.len());
            out.push(s);
        }
    }
    out
}

/// All relabelings of `s` onto carrier names `e0..`, without repeats.
pub(crate) fn relabelings(s: &Structure) -> Vec<Structure> {
    let n = s.len();
    let sort = if n > 0 { s.sort_of(0) } else { 0 };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    loop {
        let mut t = Structure::new(s.signature().clone());
        for i in 0..n {
            t.add_element(sort, &format!("e{i}")).unwrap();
        }
        let m: Vec<Elem> = perm.iter().map(|&i| i as Elem).collect();
        for (r, tup) in s.all_tuples() {
            t.add_tuple(r, tup.iter().map(|&x| m[x as usize]).collect()).unwrap();
        }
        for (f, args, v) in s.all_entries() {
            t.set_value(f, args.iter().map(|&x| m[x as usize]).collect(), m[v as usize]).unwrap();
        }
        let key = crate::text::structure_to_string(&t, "");
        if seen.insert(key) {
            out.push(t);
        }
        // next permutation
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else { break };
        let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
    out
}

pub fn parameterize_class(k0: ClassHandle, kp: ClassHandle) -> Result<ClassHandle, ClassError> {
    Ok(Arc::new(ParamClass::new(k0, kp)?))
}

pub fn add_generic_predicate(class: ClassHandle, sort: SortId, arity: usize) -> Result<ClassHandle, ClassError> {
    Ok(Arc::new(GenPred::new(class, sort, arity)?))
}

pub fn add_generic_function(class: ClassHandle, args: Vec<SortId>, result: SortId, depth: usize) -> Result<ClassHandle, ClassError> {
    Ok(Arc::new(GenFun::new(class, args, result, depth)?))
}

pub fn add_generic_bijection(class: ClassHandle, sort: SortId, window: usize) -> Result<ClassHandle, ClassError> {
    Ok(Arc::new(GenBij::new(class, sort, window)?))
}

pub fn add_equivalence_with_quotient(class: ClassHandle, sort: SortId) -> Result<ClassHandle, ClassError> {
    Ok(Arc::new(EqQuot::new(class, sort)?))
}

pub fn add_generic_substructure(class: ClassHandle) -> Result<ClassHandle, ClassError> {
    Ok(Arc::new(GenSub::new(class)?))
}

/// Registry lookup: a class expression or a plain name.
pub fn class_by_name(expr: &str) -> Result<ClassHandle, ClassError> {
    parse_class(expr)
}
