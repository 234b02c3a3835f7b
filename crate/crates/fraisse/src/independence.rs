//! Independence relations on finite ambients: algebraic, free and
//! M-independence, witnesses for full existence and for the independence
//! theorem, and an axiom suite for free independence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::class::{
    canonical_map, closed_subsets, cube_colimit, free_amalgam, ClassError, ClassOps, Condition5, CubeInput, CubeOutput,
};
use crate::search::{find_embeddings, find_homomorphisms, is_isomorphic_over, seed_from_pairs, BudgetExceeded, DEFAULT_BUDGET};
use crate::sexpr::atom_text;
use crate::structure::{check_reflection, Elem, Morphism, Structure};
use crate::text::{morphism_to_string, structure_to_string};

pub type ElemSet = BTreeSet<Elem>;

/// How M-independence verdicts are labelled in reports.
pub const FORKING_LABEL: &str = "forking (computed as M-independence)";
/// How algebraic independence verdicts are labelled in reports.
pub const KIM_LABEL: &str = "Kim-independence (computed as algebraic independence)";

/// Largest ambient on which `m_indep` runs without a generator bound.
pub const UNBOUNDED_SWEEP_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndepError {
    #[error("element {0} is not in the ambient")]
    Foreign(Elem),
    #[error("no element named `{0}` in the ambient")]
    UnknownName(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Class(#[from] ClassError),
}

impl From<BudgetExceeded> for IndepError {
    fn from(b: BudgetExceeded) -> Self {
        IndepError::Class(b.into())
    }
}

impl IndepError {
    pub fn is_budget(&self) -> bool {
        matches!(self, IndepError::Class(ClassError::Budget(_)))
    }
}

/// Three element sets of one ambient. They are closed under generation
/// (together with `C`) before any test.
#[derive(Clone, Debug)]
pub struct IndepQuery<'s> {
    pub ambient: &'s Structure,
    pub a: ElemSet,
    pub b: ElemSet,
    pub c: ElemSet,
}

impl<'s> IndepQuery<'s> {
    pub fn new(
        ambient: &'s Structure,
        a: impl IntoIterator<Item = Elem>,
        b: impl IntoIterator<Item = Elem>,
        c: impl IntoIterator<Item = Elem>,
    ) -> Result<Self, IndepError> {
        let q = IndepQuery { ambient, a: a.into_iter().collect(), b: b.into_iter().collect(), c: c.into_iter().collect() };
        if let Some(&x) = q.a.iter().chain(&q.b).chain(&q.c).find(|&&x| x as usize >= ambient.len()) {
            return Err(IndepError::Foreign(x));
        }
        Ok(q)
    }

    pub fn by_names(ambient: &'s Structure, a: &[&str], b: &[&str], c: &[&str]) -> Result<Self, IndepError> {
        let look = |ns: &[&str]| -> Result<ElemSet, IndepError> {
            ns.iter().map(|n| ambient.lookup_any(n).ok_or_else(|| IndepError::UnknownName(n.to_string()))).collect()
        };
        Ok(IndepQuery { ambient, a: look(a)?, b: look(b)?, c: look(c)? })
    }

    /// `<AC>`, `<BC>` and `<C>`.
    pub fn closures(&self) -> (ElemSet, ElemSet, ElemSet) {
        let d = self.ambient;
        (
            d.generated(self.a.iter().chain(&self.c).copied()),
            d.generated(self.b.iter().chain(&self.c).copied()),
            d.generated(self.c.iter().copied()),
        )
    }

    /// `(query (A ...) (B ...) (C ...))` with element names.
    pub fn to_text(&self) -> String {
        query_text(self.ambient, &self.a, &self.b, &self.c)
    }
}

fn set_names(s: &Structure, set: &ElemSet) -> String {
    set.iter().map(|&e| format!(" {}", atom_text(s.name(e)))).collect()
}

fn query_text(s: &Structure, a: &ElemSet, b: &ElemSet, c: &ElemSet) -> String {
    format!("(query (A{}) (B{}) (C{}))", set_names(s, a), set_names(s, b), set_names(s, c))
}

fn positions(outer: &[Elem], inner: &[Elem]) -> Vec<Elem> {
    let pos: HashMap<Elem, Elem> = outer.iter().enumerate().map(|(i, &x)| (x, i as Elem)).collect();
    inner.iter().map(|x| pos[x]).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AVerdict {
    pub independent: bool,
    /// An element of `<AC> ∩ <BC>` outside `<C>`.
    pub witness: Option<Elem>,
}

pub fn a_indep(q: &IndepQuery) -> AVerdict {
    let (ac, bc, c) = q.closures();
    let witness = ac.intersection(&bc).find(|x| !c.contains(x)).copied();
    AVerdict { independent: witness.is_none(), witness }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaVerdict {
    pub independent: bool,
    /// A collapsed pair or a relation the canonical map fails to reflect.
    pub witness: Option<String>,
}

/// Builds `<AC> (+)_<C> <BC>` and tests whether its canonical map into the
/// ambient is an embedding.
pub fn gamma_indep(class: &dyn ClassOps, q: &IndepQuery, budget: u64) -> Result<GammaVerdict, IndepError> {
    let (ac, bc, c) = q.closures();
    let d = q.ambient;
    let (a, a_back) = d.induced(&ac);
    let (b, b_back) = d.induced(&bc);
    let (e, e_back) = d.induced(&c);
    let am = free_amalgam(class, &e, &a, &b, &positions(&a_back, &e_back), &positions(&b_back, &e_back))?;
    let Some(m) = canonical_map(d, &am, &a_back, &b_back, budget)? else {
        return Err(IndepError::Precondition("the ambient receives no map from the amalgam".into()));
    };
    let s = &am.amalgam;
    let mut first: HashMap<Elem, Elem> = HashMap::new();
    for x in s.elements() {
        if let Some(&y) = first.get(&m[x as usize]) {
            let witness = format!("collapse: {} and {} both go to {}", s.name(y), s.name(x), d.name(m[x as usize]));
            return Ok(GammaVerdict { independent: false, witness: Some(witness) });
        }
        first.insert(m[x as usize], x);
    }
    Ok(match check_reflection(s, d, &m) {
        Ok(()) => GammaVerdict { independent: true, witness: None },
        Err(err) => GammaVerdict { independent: false, witness: Some(format!("not reflected: {err}")) },
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MVerdict {
    Independent,
    /// Every intermediate base generated by at most this many elements over
    /// `C` passes, and larger ones exist but were not swept.
    UpToBound(usize),
    Dependent { base: ElemSet, witness: Elem },
}

impl MVerdict {
    pub fn holds(&self) -> bool {
        !matches!(self, MVerdict::Dependent { .. })
    }
}

/// Sweeps the generated `C'` with `<C> ⊆ C' ⊆ <BC>` layer by layer (layer
/// `k` holds the bases generated by `k` elements over `C`) and checks
/// `<AC'> ∩ <BC> = C'` on each. `None` sweeps every layer.
pub fn m_indep(q: &IndepQuery, generator_bound: Option<usize>) -> Result<MVerdict, IndepError> {
    let d = q.ambient;
    if generator_bound.is_none() && (d.len() > UNBOUNDED_SWEEP_LIMIT || !d.is_total()) {
        return Err(IndepError::Precondition(format!(
            "an unbounded sweep needs a total ambient with at most {UNBOUNDED_SWEEP_LIMIT} elements"
        )));
    }
    let (_, bc, c) = q.closures();
    let mut layer = vec![c.clone()];
    let mut seen = BTreeSet::from([c]);
    let mut depth = 0;
    loop {
        for base in &layer {
            let abase = d.generated(q.a.iter().chain(base).copied());
            if let Some(&w) = abase.intersection(&bc).find(|x| !base.contains(x)) {
                return Ok(MVerdict::Dependent { base: base.clone(), witness: w });
            }
        }
        let mut next = Vec::new();
        for base in &layer {
            for &y in bc.difference(base) {
                let grown = d.generated(base.iter().copied().chain([y]));
                if seen.insert(grown.clone()) {
                    next.push(grown);
                }
            }
        }
        if next.is_empty() {
            return Ok(MVerdict::Independent);
        }
        if generator_bound == Some(depth) {
            return Ok(MVerdict::UpToBound(depth));
        }
        depth += 1;
        layer = next;
    }
}

/// `A' B` inside a fresh free amalgam, with `A' ≅_E A` free from `B` over `E`.
#[derive(Clone, Debug)]
pub struct FullExistence {
    pub ambient: Structure,
    /// `A -> ambient`; its image is `A'`.
    pub a_copy: Vec<Elem>,
    pub b_in: Vec<Elem>,
    pub e_in: Vec<Elem>,
}

pub fn full_existence_witness(
    class: &dyn ClassOps,
    e: &Structure,
    a: &Structure,
    b: &Structure,
    ja: &[Elem],
    jb: &[Elem],
    budget: u64,
) -> Result<FullExistence, IndepError> {
    let am = free_amalgam(class, e, a, b, ja, jb)?;
    let e_in: Vec<Elem> = ja.iter().map(|&x| am.into_a.apply(x)).collect();
    let out = FullExistence { a_copy: am.into_a.map.clone(), b_in: am.into_b.map.clone(), e_in, ambient: am.amalgam };
    let q = IndepQuery {
        ambient: &out.ambient,
        a: out.a_copy.iter().copied().collect(),
        b: out.b_in.iter().copied().collect(),
        c: out.e_in.iter().copied().collect(),
    };
    let v = gamma_indep(class, &q, budget)?;
    if !v.independent {
        return Err(ClassError::NotAmalgam(format!("the copy is not free over the base: {}", v.witness.unwrap_or_default())).into());
    }
    Ok(out)
}

/// A common realization: `D` with `A`, `B0` and `B1` embedded so that
/// `<A B_i>` is `D_i` and `A` is algebraically independent from `<B0 B1>`.
#[derive(Clone, Debug)]
pub struct TheoremWitness {
    pub cube: CubeOutput,
    pub a_in_d: Vec<Elem>,
    pub b0b1: ElemSet,
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum TheoremOutcome {
    Witness(TheoremWitness),
    NoWitness(String),
}

/// Decides the independence theorem for one configuration. The cube holds
/// one copy of `A` embedded in both `D0 = <A B0>` and `D1 = <A B1>`, which
/// fixes the isomorphism `A0 ≅_E A1`. The colimit of the cube receives a map
/// into any realization, so a failed colimit proves there is none.
pub fn search_theorem_witness(class: &dyn ClassOps, cube: &CubeInput) -> Result<TheoremOutcome, IndepError> {
    cube.validate().map_err(|e| IndepError::Precondition(e.to_string()))?;
    let out = match cube_colimit(class, cube) {
        Ok(out) => out,
        Err(ClassError::NotAmalgam(why) | ClassError::Inconsistent(why)) => return Ok(TheoremOutcome::NoWitness(why)),
        Err(e) => return Err(e.into()),
    };
    let a_in_d: Vec<Elem> = cube.a_in_d0.iter().map(|&x| out.d0_in_d[x as usize]).collect();
    let b0_in_d0: ElemSet = cube.b0_in_d0.iter().copied().collect();
    let e: ElemSet = cube
        .a
        .elements()
        .filter(|&x| b0_in_d0.contains(&cube.a_in_d0[x as usize]))
        .map(|x| a_in_d[x as usize])
        .collect();
    let b0b1: ElemSet = out.b_in_d.iter().copied().collect();
    let q = IndepQuery { ambient: &out.d, a: a_in_d.iter().copied().collect(), b: b0b1.clone(), c: e };
    if let Some(w) = a_indep(&q).witness {
        return Ok(TheoremOutcome::NoWitness(format!("A meets B0B1 outside the base at {}", out.d.name(w))));
    }
    Ok(TheoremOutcome::Witness(TheoremWitness { cube: out, a_in_d, b0b1 }))
}

/// As `search_theorem_witness`, refusing classes whose independent
/// 3-amalgamation is refuted.
pub fn independence_theorem_witness(class: &dyn ClassOps, cube: &CubeInput) -> Result<TheoremWitness, IndepError> {
    if let Condition5::Refuted(why) = class.condition5() {
        return Err(ClassError::Unsupported(format!("{} lacks independent 3-amalgamation ({why})", class.name())).into());
    }
    match search_theorem_witness(class, cube)? {
        TheoremOutcome::Witness(w) => Ok(w),
        TheoremOutcome::NoWitness(why) => Err(ClassError::NotAmalgam(why).into()),
    }
}

/// A member generated by embedded copies of `left` and `right` meeting
/// exactly in the base.
type Realization = (Structure, Vec<Elem>, Vec<Elem>);

struct Catalogue<'c> {
    class: &'c dyn ClassOps,
    members: HashMap<usize, Vec<Structure>>,
    budget: u64,
}

impl Catalogue<'_> {
    fn members(&mut self, n: usize) -> &[Structure] {
        let class = self.class;
        self.members.entry(n).or_insert_with(|| class.members(n))
    }

    /// Extensions `E -> X` with `|X| <= max`, one per isomorphism type over `E`.
    fn extensions(&mut self, e: &Structure, max: usize) -> Result<Vec<(Structure, Vec<Elem>)>, IndepError> {
        let budget = self.budget;
        let mut out: Vec<(Structure, Vec<Elem>)> = Vec::new();
        for x in self.members(max).to_vec() {
            for m in find_embeddings(e, &x, &[], budget)? {
                let mut dup = false;
                for (y, my) in out.iter().filter(|(y, _)| y.len() == x.len()) {
                    let seed = seed_from_pairs(x.len(), e.elements().map(|i| (m.apply(i), my[i as usize])));
                    if is_isomorphic_over(&x, y, &seed, budget)?.is_some() {
                        dup = true;
                        break;
                    }
                }
                if !dup {
                    out.push((x.clone(), m.map));
                }
            }
        }
        Ok(out)
    }

    /// Every member generated by `l` and `r` glued along `E`, with the two
    /// sides meeting exactly in `E`, up to isomorphism over both sides.
    fn realizations(
        &mut self,
        e: &Structure,
        (l, jl): (&Structure, &[Elem]),
        (r, jr): (&Structure, &[Elem]),
    ) -> Result<Vec<Realization>, IndepError> {
        let budget = self.budget;
        let am = match free_amalgam(self.class, e, l, r, jl, jr) {
            Ok(am) => am,
            Err(ClassError::NotAmalgam(_)) => return Ok(vec![]),
            Err(err) => return Err(err.into()),
        };
        let f = &am.amalgam;
        let mut out: Vec<Realization> = Vec::new();
        for t in self.members(f.len()).to_vec() {
            let found = out.len();
            for h in find_homomorphisms(f, &t, &[], budget)? {
                if h.iter().collect::<BTreeSet<_>>().len() != t.len() {
                    continue;
                }
                let ml: Vec<Elem> = am.into_a.map.iter().map(|&x| h[x as usize]).collect();
                let mr: Vec<Elem> = am.into_b.map.iter().map(|&x| h[x as usize]).collect();
                if Morphism::embedding(l, &t, ml.clone()).is_err() || Morphism::embedding(r, &t, mr.clone()).is_err() {
                    continue;
                }
                let base: ElemSet = jl.iter().map(|&x| ml[x as usize]).collect();
                let meet: ElemSet = ml.iter().filter(|x| mr.contains(x)).copied().collect();
                if meet != base {
                    continue;
                }
                let mut dup = false;
                for (_, ol, or) in &out[found..] {
                    let pairs = ml.iter().zip(ol).chain(mr.iter().zip(or)).map(|(&x, &y)| (x, y));
                    if is_isomorphic_over(&t, &t, &seed_from_pairs(t.len(), pairs), budget)?.is_some() {
                        dup = true;
                        break;
                    }
                }
                if !dup {
                    out.push((t.clone(), ml, mr));
                }
            }
        }
        Ok(out)
    }
}

/// All valid independence-theorem configurations whose `A`, `B0` and `B1`
/// have at most `max_component` elements, up to isomorphism of each face.
pub fn theorem_configurations(class: &dyn ClassOps, max_component: usize, budget: u64) -> Result<Vec<CubeInput>, IndepError> {
    let mut cat = Catalogue { class, members: HashMap::new(), budget };
    let mut cubes = Vec::new();
    for e in cat.members(max_component).to_vec() {
        let exts = cat.extensions(&e, max_component)?;
        let mut memo: HashMap<(usize, usize), Vec<Realization>> = HashMap::new();
        let mut real = |cat: &mut Catalogue, i: usize, j: usize| -> Result<Vec<Realization>, IndepError> {
            if let Some(v) = memo.get(&(i, j)) {
                return Ok(v.clone());
            }
            let v = cat.realizations(&e, (&exts[i].0, &exts[i].1), (&exts[j].0, &exts[j].1))?;
            memo.insert((i, j), v.clone());
            Ok(v)
        };
        for ia in 0..exts.len() {
            for i0 in 0..exts.len() {
                for i1 in i0..exts.len() {
                    let d0s = real(&mut cat, ia, i0)?;
                    let d1s = real(&mut cat, ia, i1)?;
                    let bs = real(&mut cat, i0, i1)?;
                    for (d0, a0, b0) in &d0s {
                        for (d1, a1, b1) in &d1s {
                            for (b, c0, c1) in &bs {
                                cubes.push(CubeInput {
                                    a: exts[ia].0.clone(),
                                    b0: exts[i0].0.clone(),
                                    b1: exts[i1].0.clone(),
                                    d0: d0.clone(),
                                    d1: d1.clone(),
                                    b: b.clone(),
                                    a_in_d0: a0.clone(),
                                    a_in_d1: a1.clone(),
                                    b0_in_d0: b0.clone(),
                                    b0_in_b: c0.clone(),
                                    b1_in_d1: b1.clone(),
                                    b1_in_b: c1.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(cubes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    Symmetry,
    Existence,
    Monotonicity,
    BaseMonotonicity,
    Transitivity,
    Stationarity,
    ImpliesAlgebraic,
    IndependenceTheorem,
}

impl Axiom {
    pub const ALL: [Axiom; 8] = [
        Axiom::Symmetry,
        Axiom::Existence,
        Axiom::Monotonicity,
        Axiom::BaseMonotonicity,
        Axiom::Transitivity,
        Axiom::Stationarity,
        Axiom::ImpliesAlgebraic,
        Axiom::IndependenceTheorem,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Axiom::Symmetry => "symmetry",
            Axiom::Existence => "existence",
            Axiom::Monotonicity => "monotonicity",
            Axiom::BaseMonotonicity => "base-monotonicity",
            Axiom::Transitivity => "transitivity",
            Axiom::Stationarity => "stationarity",
            Axiom::ImpliesAlgebraic => "implies-algebraic",
            Axiom::IndependenceTheorem => "independence-theorem",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub checked: usize,
    pub failed: usize,
    pub budget: usize,
    pub counterexample: Option<String>,
    order: (u8, u64),
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        self.checked += other.checked;
        self.failed += other.failed;
        self.budget += other.budget;
        if let Some(cx) = other.counterexample {
            if self.counterexample.is_none() || other.order < self.order {
                self.counterexample = Some(cx);
                self.order = other.order;
            }
        }
    }
}

type Tallies = BTreeMap<Axiom, Tally>;

fn merge_all(mut a: Tallies, b: Tallies) -> Tallies {
    for (k, t) in b {
        a.entry(k).or_default().merge(t);
    }
    a
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    /// Exhaustive sweep over all members with at most this many elements.
    pub max_size: usize,
    pub random_cases: usize,
    pub random_size: usize,
    /// Largest `A`, `B0`, `B1` in independence-theorem configurations.
    pub theorem_component: usize,
    pub seed: u64,
    pub budget: u64,
}

impl SuiteConfig {
    pub fn new(max_size: usize, seed: u64) -> Self {
        SuiteConfig { max_size, random_cases: 500, random_size: max_size + 2, theorem_component: 2, seed, budget: DEFAULT_BUDGET }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub class: String,
    pub seed: u64,
    pub ambients: usize,
    pub random_cases: usize,
    pub cubes: usize,
    pub tallies: Tallies,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.tallies.values().all(|t| t.failed == 0)
    }

    pub fn over_budget(&self) -> bool {
        self.tallies.values().any(|t| t.budget > 0)
    }

    pub fn tally(&self, axiom: Axiom) -> Tally {
        self.tallies.get(&axiom).cloned().unwrap_or_default()
    }

    /// One line per axiom.
    pub fn lines(&self) -> String {
        let mut out = String::new();
        for ax in Axiom::ALL {
            let t = self.tally(ax);
            let status = if t.failed > 0 { "FAIL" } else if t.budget > 0 { "BUDGET" } else { "ok" };
            writeln!(out, "{:<22} {status:<6} checked {}, failed {}, over budget {}", ax.label(), t.checked, t.failed, t.budget).unwrap();
        }
        out
    }

    /// Machine-readable block with the per-axiom counts.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "(suite-summary (class {}) (seed {}) (ambients {}) (random-cases {}) (cubes {})",
            atom_text(&self.class),
            self.seed,
            self.ambients,
            self.random_cases,
            self.cubes
        );
        for ax in Axiom::ALL {
            let t = self.tally(ax);
            write!(out, "\n  (axiom {} (checked {}) (failed {}) (budget {}))", ax.label(), t.checked, t.failed, t.budget).unwrap();
        }
        out.push(')');
        out
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "axiom suite for free independence in {} (seed {})", self.class, self.seed)?;
        write!(f, "{}", self.lines())?;
        writeln!(f, "{}", self.summary())?;
        for ax in Axiom::ALL {
            if let Some(cx) = self.tally(ax).counterexample {
                writeln!(f, "; first counterexample for {}\n{cx}", ax.label())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Fault {
    Budget,
    Error(String),
}

struct Ambient<'c> {
    class: &'c dyn ClassOps,
    class_name: &'c str,
    d: &'c Structure,
    closed: Vec<ElemSet>,
    memo: HashMap<(ElemSet, ElemSet, ElemSet), Result<bool, Fault>>,
    budget: u64,
    tallies: Tallies,
    order: (u8, u64),
}

impl<'c> Ambient<'c> {
    fn new(class: &'c dyn ClassOps, class_name: &'c str, d: &'c Structure, budget: u64, order: (u8, u64)) -> Self {
        Ambient { class, class_name, d, closed: closed_subsets(d), memo: HashMap::new(), budget, tallies: Tallies::new(), order }
    }

    fn gamma(&mut self, a: &ElemSet, b: &ElemSet, c: &ElemSet) -> Result<bool, Fault> {
        let key = (a.clone(), b.clone(), c.clone());
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let q = IndepQuery { ambient: self.d, a: a.clone(), b: b.clone(), c: c.clone() };
        let v = match gamma_indep(self.class, &q, self.budget) {
            Ok(v) => Ok(v.independent),
            Err(e) if e.is_budget() => Err(Fault::Budget),
            Err(e) => Err(Fault::Error(e.to_string())),
        };
        self.memo.insert(key, v.clone());
        v
    }

    fn record(&mut self, ax: Axiom, outcome: Result<bool, Fault>, sets: [&ElemSet; 3], note: &str) {
        let d = self.d;
        let t = self.tallies.entry(ax).or_default();
        t.checked += 1;
        let why = match outcome {
            Ok(true) => return,
            Err(Fault::Budget) => {
                t.budget += 1;
                return;
            }
            Ok(false) => note.to_string(),
            Err(Fault::Error(msg)) => msg,
        };
        t.failed += 1;
        if t.counterexample.is_none() {
            t.order = self.order;
            t.counterexample = Some(format!(
                "; {}: {why}\n{}\n{}",
                ax.label(),
                structure_to_string(d, self.class_name),
                query_text(d, sets[0], sets[1], sets[2])
            ));
        }
    }

    fn join(&self, x: &ElemSet, y: &ElemSet) -> ElemSet {
        self.d.generated(x.iter().chain(y).copied())
    }

    fn check_config(&mut self, a: &ElemSet, b: &ElemSet, c: &ElemSet) {
        let g = self.gamma(a, b, c);
        let swapped = self.gamma(b, a, c);
        let sym = match (&g, &swapped) {
            (Ok(x), Ok(y)) => Ok(x == y),
            (Err(f), _) | (_, Err(f)) => Err(f.clone()),
        };
        self.record(Axiom::Symmetry, sym, [a, b, c], "swapping A and B changes the verdict");
        if b == c {
            self.record(Axiom::Existence, g.clone(), [a, b, c], "A is not free from its own base");
        }
        let between: Vec<ElemSet> = self.closed.iter().filter(|x| c.is_subset(x) && x.is_subset(b)).cloned().collect();
        if let Ok(true) = g {
            let q = IndepQuery { ambient: self.d, a: a.clone(), b: b.clone(), c: c.clone() };
            let alg = a_indep(&q).independent;
            self.record(Axiom::ImpliesAlgebraic, Ok(alg), [a, b, c], "free but not algebraically independent");
            for b2 in &between {
                let r = self.gamma(a, b2, c);
                self.record(Axiom::Monotonicity, r, [a, b2, c], "independence is lost when B shrinks");
            }
            for c2 in &between {
                let a2 = self.join(a, c2);
                let r = self.gamma(&a2, b, c2);
                self.record(Axiom::BaseMonotonicity, r, [&a2, b, c2], "independence is lost when the base grows inside B");
            }
        }
        for c2 in &between {
            let first = self.gamma(a, c2, c);
            let a2 = self.join(a, c2);
            let second = self.gamma(&a2, b, c2);
            let outcome = match (first, second) {
                (Ok(true), Ok(true)) => g.clone(),
                (Err(f), _) | (_, Err(f)) => Err(f),
                _ => continue,
            };
            self.record(Axiom::Transitivity, outcome, [a, b, c], "A is free over C from C' and over C' from B, but not over C from B");
        }
    }

    /// Any two free realizations over `C` of one type, matched by an
    /// isomorphism fixing `C`, must give isomorphic `<A B>` over `B`.
    fn check_stationarity(&mut self, b: &ElemSet, c: &ElemSet) {
        let mut cands = Vec::new();
        for a in self.closed.clone() {
            if c.is_subset(&a) && matches!(self.gamma(&a, b, c), Ok(true)) {
                cands.push(a);
            }
        }
        let d = self.d;
        for i in 0..cands.len() {
            for j in i..cands.len() {
                let (a1, a2) = (&cands[i], &cands[j]);
                if a1.len() != a2.len() {
                    continue;
                }
                let (s1, back1) = d.induced(a1);
                let (s2, back2) = d.induced(a2);
                let cv: Vec<Elem> = c.iter().copied().collect();
                let seed = seed_from_pairs(s1.len(), positions(&back1, &cv).into_iter().zip(positions(&back2, &cv)));
                let isos = match find_embeddings(&s1, &s2, &seed, self.budget) {
                    Ok(v) => v,
                    Err(_) => {
                        self.record(Axiom::Stationarity, Err(Fault::Budget), [a1, b, c], "");
                        continue;
                    }
                };
                let (u1, u2) = (self.join(a1, b), self.join(a2, b));
                for sigma in isos {
                    let outcome = if u1.len() != u2.len() {
                        Ok(false)
                    } else {
                        let (t1, bk1) = d.induced(&u1);
                        let (t2, bk2) = d.induced(&u2);
                        let sigma_d: Vec<Elem> = sigma.map.iter().map(|&y| back2[y as usize]).collect();
                        let bv: Vec<Elem> = b.iter().copied().collect();
                        let pairs: Vec<(Elem, Elem)> = positions(&bk1, &back1)
                            .into_iter()
                            .zip(positions(&bk2, &sigma_d))
                            .chain(positions(&bk1, &bv).into_iter().zip(positions(&bk2, &bv)))
                            .collect();
                        match is_isomorphic_over(&t1, &t2, &seed_from_pairs(t1.len(), pairs), self.budget) {
                            Ok(m) => Ok(m.is_some()),
                            Err(_) => Err(Fault::Budget),
                        }
                    };
                    self.record(
                        Axiom::Stationarity,
                        outcome,
                        [a1, b, c],
                        &format!("a free copy{} of the same type over C gives a different <AB>", set_names(d, a2)),
                    );
                }
            }
        }
    }

    fn sweep(mut self) -> Tallies {
        let closed = self.closed.clone();
        for a in &closed {
            for b in &closed {
                let both: ElemSet = a.intersection(b).copied().collect();
                for c in closed.iter().filter(|c| c.is_subset(&both)) {
                    self.check_config(a, b, c);
                }
            }
        }
        for b in &closed {
            for c in closed.iter().filter(|c| c.is_subset(b)) {
                self.check_stationarity(b, c);
            }
        }
        self.tallies
    }

    fn sample(mut self, rng: &mut ChaCha8Rng) -> Tallies {
        let closed = self.closed.clone();
        let a = &closed[rng.gen_range(0..closed.len())];
        let b = &closed[rng.gen_range(0..closed.len())];
        let below: Vec<&ElemSet> = closed.iter().filter(|c| c.is_subset(a) && c.is_subset(b)).collect();
        let c = below[rng.gen_range(0..below.len())];
        self.check_config(a, b, c);
        self.check_stationarity(b, c);
        self.tallies
    }
}

fn cube_text(class_name: &str, cube: &CubeInput, why: &str) -> String {
    let mut out = format!("; independence-theorem: {why}");
    for (label, s) in [("A", &cube.a), ("B0", &cube.b0), ("B1", &cube.b1), ("D0", &cube.d0), ("D1", &cube.d1), ("B", &cube.b)] {
        write!(out, "\n; {label}\n{}", structure_to_string(s, class_name)).unwrap();
    }
    for (label, m, s, t) in [
        ("A in D0", &cube.a_in_d0, &cube.a, &cube.d0),
        ("A in D1", &cube.a_in_d1, &cube.a, &cube.d1),
        ("B0 in D0", &cube.b0_in_d0, &cube.b0, &cube.d0),
        ("B0 in B", &cube.b0_in_b, &cube.b0, &cube.b),
        ("B1 in D1", &cube.b1_in_d1, &cube.b1, &cube.d1),
        ("B1 in B", &cube.b1_in_b, &cube.b1, &cube.b),
    ] {
        write!(out, "\n; {label}\n{}", morphism_to_string(m, s, t)).unwrap();
    }
    out
}

/// The axiom suite with default settings: exhaustive over members with at
/// most `max_size` elements, then seeded random cases.
pub fn axiom_suite(class: &dyn ClassOps, max_size: usize, seed: u64) -> SuiteReport {
    axiom_suite_with(class, &SuiteConfig::new(max_size, seed))
}

pub fn axiom_suite_with(class: &dyn ClassOps, cfg: &SuiteConfig) -> SuiteReport {
    let name = class.name();
    let ambients = class.members(cfg.max_size);
    let exhaustive = ambients
        .par_iter()
        .enumerate()
        .map(|(i, d)| Ambient::new(class, &name, d, cfg.budget, (0, i as u64)).sweep())
        .reduce(Tallies::new, merge_all);
    let random = (0..cfg.random_cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let size = rng.gen_range(1..=cfg.random_size.max(1));
            let d = class.random_member(&mut rng, size);
            Ambient::new(class, &name, &d, cfg.budget, (1, i as u64)).sample(&mut rng)
        })
        .reduce(Tallies::new, merge_all);
    let mut tallies = merge_all(exhaustive, random);
    let mut cubes = 0;
    let mut theorem = Tally::default();
    match theorem_configurations(class, cfg.theorem_component, cfg.budget) {
        Ok(all) => {
            cubes = all.len();
            let t = all
                .par_iter()
                .enumerate()
                .map(|(i, cube)| {
                    let mut t = Tally { checked: 1, ..Default::default() };
                    match search_theorem_witness(class, cube) {
                        Ok(TheoremOutcome::Witness(_)) => {}
                        Ok(TheoremOutcome::NoWitness(why)) => {
                            t.failed = 1;
                            t.order = (2, i as u64);
                            t.counterexample = Some(cube_text(&name, cube, &format!("no common realization ({why})")));
                        }
                        Err(e) if e.is_budget() => t.budget = 1,
                        Err(e) => {
                            t.failed = 1;
                            t.order = (2, i as u64);
                            t.counterexample = Some(cube_text(&name, cube, &e.to_string()));
                        }
                    }
                    t
                })
                .reduce(Tally::default, |mut a, b| {
                    a.merge(b);
                    a
                });
            theorem.merge(t);
        }
        Err(e) if e.is_budget() => theorem.budget += 1,
        Err(e) => {
            theorem.checked += 1;
            theorem.failed += 1;
            theorem.counterexample = Some(format!("; independence-theorem: {e}"));
        }
    }
    tallies.entry(Axiom::IndependenceTheorem).or_default().merge(theorem);
    SuiteReport { class: name, seed: cfg.seed, ambients: ambients.len(), random_cases: cfg.random_cases, cubes, tallies }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{EqRelRaw, Graphs, Linear, Sets};

    fn graph(n: usize, edges: &[(Elem, Elem)]) -> Structure {
        let mut g = Graphs::new().members(0)[0].clone();
        for i in 0..n {
            g.add_element(0, &format!("v{i}")).unwrap();
        }
        for &(a, b) in edges {
            g.add_tuple(0, vec![a, b]).unwrap();
            g.add_tuple(0, vec![b, a]).unwrap();
        }
        g
    }

    fn plane() -> (Linear, Structure, Elem, Elem, Elem) {
        let v = Linear::vector_space(2).unwrap();
        let s = v.from_invariants(&[2, 2]);
        let (u, w) = (s.lookup(0, "g").unwrap(), s.lookup(0, "h").unwrap());
        let uw = s.value(1, &[u, w]).unwrap();
        (v, s, u, w, uw)
    }

    #[test]
    fn algebraic_independence_of_spans() {
        let (_, s, u, w, uw) = plane();
        assert!(a_indep(&IndepQuery::new(&s, [u], [w], []).unwrap()).independent);
        let v = a_indep(&IndepQuery::new(&s, [u], [uw, u], []).unwrap());
        assert_eq!(v, AVerdict { independent: false, witness: Some(u) });
        let g = graph(3, &[(0, 1)]);
        assert!(a_indep(&IndepQuery::new(&g, [0], [1, 2], []).unwrap()).independent);
        assert!(IndepQuery::new(&g, [7], [], []).is_err());
    }

    #[test]
    fn edges_break_free_independence() {
        let graphs = Graphs::new();
        let apart = graph(2, &[]);
        let joined = graph(2, &[(0, 1)]);
        let q = IndepQuery::new(&apart, [0], [1], []).unwrap();
        assert!(gamma_indep(&graphs, &q, DEFAULT_BUDGET).unwrap().independent);
        let q = IndepQuery::new(&joined, [0], [1], []).unwrap();
        let v = gamma_indep(&graphs, &q, DEFAULT_BUDGET).unwrap();
        assert!(!v.independent);
        assert!(v.witness.unwrap().contains("not reflected"));
    }

    #[test]
    fn identified_lines_collapse() {
        let v = Linear::vector_space(2).unwrap();
        let line = v.from_invariants(&[2]);
        let u = line.lookup(0, "g").unwrap();
        let q = IndepQuery::new(&line, [u], [u], []).unwrap();
        let verdict = gamma_indep(&v, &q, DEFAULT_BUDGET).unwrap();
        assert!(!verdict.independent);
        assert!(verdict.witness.unwrap().starts_with("collapse"));
    }

    #[test]
    fn sweep_without_intermediates_is_trivial() {
        let (_, s, u, w, _) = plane();
        let q = IndepQuery::new(&s, [u], [w], [w]).unwrap();
        assert_eq!(m_indep(&q, None).unwrap(), MVerdict::Independent);
        let q = IndepQuery::new(&s, [u], [w], []).unwrap();
        assert_eq!(m_indep(&q, Some(0)).unwrap(), MVerdict::UpToBound(0));
        assert_eq!(m_indep(&q, Some(1)).unwrap(), MVerdict::Independent);
    }

    #[test]
    fn full_existence_copies_over_the_base() {
        let graphs = Graphs::new();
        let e = graph(1, &[]);
        let a = graph(2, &[(0, 1)]);
        let b = graph(2, &[(0, 1)]);
        let w = full_existence_witness(&graphs, &e, &a, &b, &[0], &[0], DEFAULT_BUDGET).unwrap();
        assert_eq!(w.ambient.len(), 3);
        assert_eq!(w.ambient.tuples(0).len(), 4);
        let (v, s, _, _, _) = plane();
        let line = v.from_invariants(&[2]);
        let zero = |t: &Structure| t.value(0, &[]).unwrap();
        let w = full_existence_witness(&v, &v.constants_structure(), &line, &s, &[zero(&line)], &[zero(&s)], DEFAULT_BUDGET).unwrap();
        assert_eq!(w.ambient.len(), 8);
    }

    fn singleton_cube(class: &dyn ClassOps, d0_edge: bool, d1_edge: bool, b_edge: bool) -> CubeInput {
        let one = class.members(1).into_iter().find(|s| s.len() == 1).unwrap();
        let pair = |edge: bool| {
            let two: Vec<Structure> = class.members(2).into_iter().filter(|s| s.len() == 2).collect();
            two.into_iter().find(|s| s.holds(0, &[0, 1]) == edge).unwrap()
        };
        CubeInput {
            a: one.clone(),
            b0: one.clone(),
            b1: one,
            d0: pair(d0_edge),
            d1: pair(d1_edge),
            b: pair(b_edge),
            a_in_d0: vec![0],
            a_in_d1: vec![0],
            b0_in_d0: vec![1],
            b0_in_b: vec![0],
            b1_in_d1: vec![1],
            b1_in_b: vec![1],
        }
    }

    #[test]
    fn theorem_witness_for_graph_singletons() {
        let graphs = Graphs::new();
        let cube = singleton_cube(&graphs, true, false, true);
        let w = independence_theorem_witness(&graphs, &cube).unwrap();
        assert_eq!(w.cube.d.len(), 3);
        assert_eq!(w.cube.d.tuples(0).len(), 4);
    }

    #[test]
    fn merging_classes_has_no_witness() {
        let raw = EqRelRaw::new();
        let cube = singleton_cube(&raw, true, true, false);
        assert!(matches!(search_theorem_witness(&raw, &cube).unwrap(), TheoremOutcome::NoWitness(_)));
        assert!(independence_theorem_witness(&raw, &cube).is_err());
    }

    #[test]
    fn degenerate_configuration_keeps_the_base() {
        let graphs = Graphs::new();
        let one = graph(1, &[]);
        let cube = CubeInput {
            a: one.clone(),
            b0: one.clone(),
            b1: one.clone(),
            d0: one.clone(),
            d1: one.clone(),
            b: one.clone(),
            a_in_d0: vec![0],
            a_in_d1: vec![0],
            b0_in_d0: vec![0],
            b0_in_b: vec![0],
            b1_in_d1: vec![0],
            b1_in_b: vec![0],
        };
        assert_eq!(independence_theorem_witness(&graphs, &cube).unwrap().cube.d.len(), 1);
    }

    #[test]
    fn small_suites() {
        let mut cfg = SuiteConfig::new(3, 7);
        cfg.random_cases = 40;
        let r = axiom_suite_with(&Sets::new(), &cfg);
        assert!(r.passed(), "{r}");
        let r = axiom_suite_with(&Graphs::new(), &cfg);
        assert!(r.passed(), "{r}");
        assert!(r.tally(Axiom::Stationarity).checked > 0);
        let r = axiom_suite_with(&EqRelRaw::new(), &cfg);
        assert!(r.tally(Axiom::IndependenceTheorem).failed > 0);
        assert!(r.to_string().contains("(structure"));
    }
}
