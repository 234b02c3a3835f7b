//! Finite approximations of the generic model: saturation by free
//! amalgamation, audits of the extension property and of back-and-forth,
//! and witnesses for duplication of non-generated points, the independence
//! property and the tree property.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::class::{free_amalgam, generic_element, ClassError, ClassHandle, ClassOps, PointExtension};
use crate::formula::{evaluate, QfFormula, Truth};
use crate::search::{first_embedding, is_isomorphic_over, seed_from_pairs, BudgetExceeded};
use crate::structure::{Elem, Structure};
use crate::term::{evaluate_term, Assignment, EvalError, Term};
use crate::text::structure_to_string;

pub type ElemSet = BTreeSet<Elem>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LimitError {
    #[error("not a member: {0}")]
    NotMember(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("search deficit: {0}")]
    Deficit(String),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<BudgetExceeded> for LimitError {
    fn from(b: BudgetExceeded) -> Self {
        LimitError::Class(b.into())
    }
}

#[derive(Clone, Debug)]
pub struct SaturationConfig {
    pub class: ClassHandle,
    /// Bases `A` are generated by at most `n` elements.
    pub n: usize,
    pub rounds: usize,
    pub seed: u64,
    pub carrier_cap: usize,
    pub budget: u64,
}

impl SaturationConfig {
    pub fn new(class: ClassHandle, n: usize, rounds: usize, seed: u64) -> Self {
        SaturationConfig { class, n, rounds, seed, carrier_cap: 512, budget: crate::search::DEFAULT_BUDGET }
    }
}

#[derive(Clone, Debug)]
pub struct Saturation {
    pub structure: Structure,
    pub rounds_run: usize,
    pub amalgams: usize,
    /// The last round found nothing to add.
    pub stable: bool,
    /// Set when the carrier cap stopped the construction early.
    pub deficit: Option<String>,
    class_name: String,
    header: String,
}

impl Saturation {
    /// Structure text preceded by a comment recording the configuration.
    pub fn to_text(&self) -> String {
        format!("{}{}\n", self.header, structure_to_string(&self.structure, &self.class_name))
    }
}

/// Generated substructures `<S>` with `|S| <= n`, by generator count, then
/// shuffled within each count by the seed.
fn bases(m: &Structure, n: usize, rng: &mut ChaCha8Rng) -> Vec<ElemSet> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for k in 0..=n.min(m.len()) {
        let mut level = Vec::new();
        for_each_combination(m.len(), k, &mut |c| {
            let g = m.generated(c.iter().map(|&i| i as Elem));
            if seen.insert(g.clone()) {
                level.push(g);
            }
        });
        level.sort();
        level.shuffle(rng);
        out.extend(level);
    }
    out
}

fn for_each_combination(n: usize, k: usize, visit: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            visit(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, visit);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), visit)
}

/// Whether `ext`, an extension of the substructure on `back`, embeds in `m` over it.
fn realized(m: &Structure, back: &[Elem], ext: &PointExtension, budget: u64) -> Result<bool, BudgetExceeded> {
    let seed = seed_from_pairs(ext.structure.len(), ext.embed.iter().copied().zip(back.iter().copied()));
    Ok(first_embedding(&ext.structure, m, &seed, budget)?.is_some())
}

type Pending = (Structure, Vec<Elem>, PointExtension);

fn unrealized(class: &dyn ClassOps, m: &Structure, base: &ElemSet, budget: u64) -> Result<Vec<Pending>, BudgetExceeded> {
    let (sub, back) = m.induced(base);
    let mut out = Vec::new();
    for ext in class.one_point_extensions(&sub) {
        if !realized(m, &back, &ext, budget)? {
            out.push((sub.clone(), back.clone(), ext));
        }
    }
    Ok(out)
}

/// Repeatedly amalgamates one-point extensions `<A, x>` over every base
/// `A <= M` they do not yet embed over. Missing witnesses are found in
/// parallel and then added one amalgam at a time.
pub fn saturate(cfg: &SaturationConfig, start: &Structure) -> Result<Saturation, LimitError> {
    let class = cfg.class.as_ref();
    if cfg.n == 0 || cfg.rounds == 0 {
        return Err(LimitError::Config("size bound and rounds must be at least 1".into()));
    }
    if start.len() > cfg.carrier_cap {
        return Err(LimitError::Config(format!("the start has {} elements, above the cap {}", start.len(), cfg.carrier_cap)));
    }
    class.check_member(start).map_err(LimitError::NotMember)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut m = start.clone();
    let (mut amalgams, mut rounds_run, mut stable, mut deficit) = (0, 0, false, None);
    'rounds: for _ in 0..cfg.rounds {
        let todo = bases(&m, cfg.n, &mut rng);
        let found: Vec<Result<Vec<Pending>, BudgetExceeded>> =
            todo.par_iter().map(|b| unrealized(class, &m, b, cfg.budget)).collect();
        let mut pending = Vec::new();
        for f in found {
            pending.extend(f?);
        }
        rounds_run += 1;
        if pending.is_empty() {
            stable = true;
            break;
        }
        let mut remap: Vec<Elem> = m.elements().collect();
        for (i, (sub, back, ext)) in pending.iter().enumerate() {
            let now: Vec<Elem> = back.iter().map(|&x| remap[x as usize]).collect();
            if realized(&m, &now, ext, cfg.budget)? {
                continue;
            }
            let grows = ext.structure.len() - sub.len();
            if m.len() + grows > cfg.carrier_cap {
                deficit = Some(format!(
                    "carrier cap {} reached in round {rounds_run} with {} of {} missing extensions left",
                    cfg.carrier_cap,
                    pending.len() - i,
                    pending.len()
                ));
                break 'rounds;
            }
            let am = free_amalgam(class, sub, &m, &ext.structure, &now, &ext.embed)?;
            remap = remap.iter().map(|&x| am.into_a.apply(x)).collect();
            m = am.amalgam;
            amalgams += 1;
        }
    }
    let mut header = format!(
        "; saturated class={} n={} rounds={} seed={} carrier_cap={}\n; rounds run {rounds_run}, amalgams {amalgams}, elements {}, stable {}\n",
        class.name(),
        cfg.n,
        cfg.rounds,
        cfg.seed,
        cfg.carrier_cap,
        m.len(),
        if stable { "yes" } else { "no" }
    );
    if let Some(d) = &deficit {
        writeln!(header, "; deficit: {d}").unwrap();
    }
    Ok(Saturation { structure: m, rounds_run, amalgams, stable, deficit, class_name: class.name(), header })
}

#[derive(Clone, Debug, Default)]
pub struct ExtensionReport {
    pub bases: usize,
    pub pairs: usize,
    pub failures: Vec<String>,
    pub over_budget: usize,
}

impl ExtensionReport {
    pub fn clean(&self) -> bool {
        self.failures.is_empty() && self.over_budget == 0
    }
}

impl fmt::Display for ExtensionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "extension property: {} bases, {} pairs, {} failures, {} over budget",
            self.bases,
            self.pairs,
            self.failures.len(),
            self.over_budget
        )?;
        for line in &self.failures {
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

/// Every one-point extension `<A, x>` of every `A = <S>` with `|S| <= n`
/// must embed in `m` over `A`.
pub fn check_extension_property(m: &Structure, class: &dyn ClassOps, n: usize, budget: u64) -> ExtensionReport {
    audit(m, class, n, None, budget)
}

/// As `check_extension_property`, with bases restricted to subsets of `within`.
pub fn check_extension_property_within(m: &Structure, class: &dyn ClassOps, n: usize, within: &ElemSet, budget: u64) -> ExtensionReport {
    audit(m, class, n, Some(within), budget)
}

fn audit(m: &Structure, class: &dyn ClassOps, n: usize, within: Option<&ElemSet>, budget: u64) -> ExtensionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let all: Vec<ElemSet> = bases(m, n, &mut rng).into_iter().filter(|b| within.is_none_or(|w| b.is_subset(w))).collect();
    let parts: Vec<ExtensionReport> = all
        .par_iter()
        .map(|base| {
            let mut r = ExtensionReport { bases: 1, ..Default::default() };
            let (sub, back) = m.induced(base);
            for (i, ext) in class.one_point_extensions(&sub).iter().enumerate() {
                r.pairs += 1;
                match realized(m, &back, ext, budget) {
                    Ok(true) => {}
                    Ok(false) => r.failures.push(format!(
                        "over {{{}}}: extension #{i} ({}) has no realization",
                        m.names_of(&back),
                        describe_point(ext)
                    )),
                    Err(_) => r.over_budget += 1,
                }
            }
            r
        })
        .collect();
    let mut out = ExtensionReport::default();
    for p in parts {
        out.bases += p.bases;
        out.pairs += p.pairs;
        out.over_budget += p.over_budget;
        out.failures.extend(p.failures);
    }
    out
}

/// The relation tuples and entries of an extension that mention its new point.
fn describe_point(ext: &PointExtension) -> String {
    let s = &ext.structure;
    let sig = s.signature();
    let mut parts = Vec::new();
    for (r, t) in s.all_tuples() {
        if t.contains(&ext.point) {
            parts.push(format!("{}({})", sig.relations()[r].name, s.names_of(t)));
        }
    }
    for (f, args, v) in s.all_entries() {
        if args.contains(&ext.point) || v == ext.point {
            parts.push(format!("{}({})={}", sig.functions()[f].name, s.names_of(args), s.name(v)));
        }
    }
    if parts.is_empty() {
        format!("{} free", s.name(ext.point))
    } else {
        parts.join(" ")
    }
}

/// Whether `left[i] -> right[i]` extends to an isomorphism of the generated substructures.
pub fn partial_isomorphism(m: &Structure, left: &[Elem], right: &[Elem], budget: u64) -> Result<bool, BudgetExceeded> {
    if left.len() != right.len() || left.iter().zip(right).any(|(&x, &y)| m.sort_of(x) != m.sort_of(y)) {
        return Ok(false);
    }
    let (sl, bl) = m.generated_substructure(left.iter().copied());
    let (sr, br) = m.generated_substructure(right.iter().copied());
    if sl.len() != sr.len() {
        return Ok(false);
    }
    let pos = |back: &[Elem], x: Elem| back.iter().position(|&y| y == x).unwrap() as Elem;
    let mut seed: Vec<Option<Elem>> = vec![None; sl.len()];
    for (&x, &y) in left.iter().zip(right) {
        let slot = &mut seed[pos(&bl, x) as usize];
        if matches!(slot, Some(v) if *v != pos(&br, y)) {
            return Ok(false);
        }
        *slot = Some(pos(&br, y));
    }
    Ok(is_isomorphic_over(&sl, &sr, &seed, budget)?.is_some())
}

/// Back-and-forth for `depth` steps from the partial isomorphism `left -> right`.
pub fn extends_back_and_forth(m: &Structure, left: &[Elem], right: &[Elem], depth: usize, budget: u64) -> Result<bool, BudgetExceeded> {
    if depth == 0 {
        return Ok(true);
    }
    for (from, to) in [(left, right), (right, left)] {
        for c in m.elements() {
            let mut ok = false;
            for d in m.elements_of(m.sort_of(c)).to_vec() {
                let (f2, t2) = ([from, &[c]].concat(), [to, &[d]].concat());
                if partial_isomorphism(m, &f2, &t2, budget)? && extends_back_and_forth(m, &f2, &t2, depth - 1, budget)? {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Default)]
pub struct BackForthReport {
    pub pairs: usize,
    pub skipped: usize,
    pub over_budget: usize,
    pub failures: Vec<String>,
}

impl BackForthReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.over_budget == 0
    }
}

/// Samples `samples` pairs of tuples of length 1 or 2. Pairs whose generated
/// substructures are not isomorphic along the tuples are skipped.
pub fn back_and_forth_check(m: &Structure, class: &dyn ClassOps, depth: usize, samples: usize, seed: u64, budget: u64) -> BackForthReport {
    let mut report = BackForthReport::default();
    if depth == 0 || m.is_empty() {
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let len = rng.gen_range(1..=2);
        let pick = |rng: &mut ChaCha8Rng| -> Vec<Elem> { (0..len).map(|_| rng.gen_range(0..m.len()) as Elem).collect() };
        let (l, r) = (pick(&mut rng), pick(&mut rng));
        match partial_isomorphism(m, &l, &r, budget) {
            Ok(false) => {
                report.skipped += 1;
                continue;
            }
            Err(_) => {
                report.over_budget += 1;
                continue;
            }
            Ok(true) => {}
        }
        report.pairs += 1;
        match extends_back_and_forth(m, &l, &r, depth, budget) {
            Ok(true) => {}
            Ok(false) => report.failures.push(format!(
                "{}: ({}) -> ({}) does not extend for {depth} steps",
                class.name(),
                m.names_of(&l),
                m.names_of(&r)
            )),
            Err(_) => report.over_budget += 1,
        }
    }
    report
}

#[derive(Clone, Debug)]
pub struct Duplication {
    pub structure: Structure,
    /// Elements realizing the type of `a` over `A`, `a`'s image first.
    pub realizations: Vec<Elem>,
}

/// Amalgamates `<A a>` with itself over `<A>` `rounds` times and collects
/// the distinct realizations of the type of `a` over `A`.
pub fn acl_duplication_check(class: &dyn ClassOps, ambient: &Structure, a_set: &ElemSet, a: Elem, rounds: usize, budget: u64) -> Result<Duplication, LimitError> {
    let base = ambient.generated(a_set.iter().copied());
    if base.contains(&a) {
        return Err(LimitError::Rejected(format!("{} is generated by A", ambient.name(a))));
    }
    let (s, s_back) = ambient.generated_substructure(a_set.iter().copied().chain([a]));
    let pos = |x: Elem| s_back.iter().position(|&y| y == x).unwrap() as Elem;
    let e_in_s: Vec<Elem> = base.iter().map(|&x| pos(x)).collect();
    let a_in_s = pos(a);
    let (e, _) = ambient.induced(&base);
    let mut cur = s.clone();
    let mut e_in_cur = e_in_s.clone();
    let mut a_in_cur = a_in_s;
    for _ in 0..rounds {
        let am = free_amalgam(class, &e, &cur, &s, &e_in_cur, &e_in_s)?;
        e_in_cur = e_in_cur.iter().map(|&x| am.into_a.apply(x)).collect();
        a_in_cur = am.into_a.apply(a_in_cur);
        cur = am.amalgam;
    }
    let mut realizations = vec![a_in_cur];
    for x in cur.elements_of(cur.sort_of(a_in_cur)).to_vec() {
        if x == a_in_cur || e_in_cur.contains(&x) {
            continue;
        }
        let (t, t_back) = cur.generated_substructure(e_in_cur.iter().copied().chain([x]));
        if t.len() != s.len() {
            continue;
        }
        let tpos = |y: Elem| t_back.iter().position(|&z| z == y).unwrap() as Elem;
        let pairs = e_in_s.iter().zip(&e_in_cur).map(|(&p, &q)| (p, tpos(q))).chain([(a_in_s, tpos(x))]);
        if is_isomorphic_over(&s, &t, &seed_from_pairs(s.len(), pairs), budget)?.is_some() {
            realizations.push(x);
        }
    }
    Ok(Duplication { structure: cur, realizations })
}

/// `psi(p, x)` with extra variables fixed to elements of the ambient.
#[derive(Clone, Debug)]
pub struct SeparatingFormula {
    pub formula: QfFormula,
    pub parameter: String,
    pub object: String,
    pub fixed: Assignment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IpWitness {
    pub params: Vec<Elem>,
    /// `objects[I]` satisfies `psi(p_i, -)` exactly for the bits `i` of `I`.
    pub objects: Vec<Elem>,
    pub evaluations: usize,
}

/// Finds parameters `p_0..p_{k-1}` and objects `a_I` for all `I ⊆ k` with
/// `psi(p_i, a_I)` true exactly when `i ∈ I`, and re-checks every evaluation.
pub fn ip_witness(m: &Structure, class: &dyn ClassOps, psi: &SeparatingFormula, k: usize, budget: u64) -> Result<IpWitness, LimitError> {
    let pc = class.parameterized().ok_or_else(|| LimitError::Config(format!("{} has no parameter sort", class.name())))?;
    if k == 0 {
        return Ok(IpWitness { params: vec![], objects: vec![], evaluations: 0 });
    }
    let psort = pc.parameter_sort();
    let object_sort = psi
        .formula
        .free_vars()
        .into_iter()
        .find(|v| v.name == psi.object)
        .map(|v| v.sort)
        .ok_or_else(|| LimitError::Config(format!("`{}` does not occur in the formula", psi.object)))?;
    let fixed: BTreeSet<Elem> = psi.fixed.values().copied().collect();
    let params: Vec<Elem> = m.elements_of(psort).iter().copied().filter(|p| !fixed.contains(p)).collect();
    let objects: Vec<Elem> = m.elements_of(object_sort).iter().copied().filter(|o| !fixed.contains(o)).collect();
    let truth = |p: Elem, o: Elem| -> Result<Truth, EvalError> {
        let mut asg = psi.fixed.clone();
        asg.insert(psi.parameter.clone(), p);
        asg.insert(psi.object.clone(), o);
        evaluate(&psi.formula, m, &asg)
    };
    // pattern bit per (parameter, object); undefined evaluations rule the pair out
    let mut table: Vec<Vec<Option<bool>>> = Vec::with_capacity(params.len());
    for &p in &params {
        let mut row = Vec::with_capacity(objects.len());
        for &o in &objects {
            row.push(match truth(p, o)? {
                Truth::True => Some(true),
                Truth::False => Some(false),
                Truth::Undefined => None,
            });
        }
        table.push(row);
    }
    let mut tried = 0u64;
    let mut found = None;
    let mut stop = false;
    for_each_combination(params.len(), k, &mut |combo| {
        if stop {
            return;
        }
        tried += 1;
        if tried > budget {
            stop = true;
            return;
        }
        let mut by_pattern: Vec<Option<Elem>> = vec![None; 1 << k];
        for (j, &o) in objects.iter().enumerate() {
            let mut mask = 0usize;
            let mut defined = true;
            for (i, &pi) in combo.iter().enumerate() {
                match table[pi][j] {
                    Some(true) => mask |= 1 << i,
                    Some(false) => {}
                    None => defined = false,
                }
            }
            if defined && by_pattern[mask].is_none() {
                by_pattern[mask] = Some(o);
            }
        }
        if by_pattern.iter().all(Option::is_some) {
            found = Some((combo.iter().map(|&i| params[i]).collect::<Vec<_>>(), by_pattern.into_iter().flatten().collect::<Vec<_>>()));
            stop = true;
        }
    });
    let Some((ps, os)) = found else {
        let why = if tried > budget { "budget exhausted" } else { "no parameter choice realizes every pattern" };
        return Err(LimitError::Deficit(format!("{why} for k = {k} among {} parameters and {} objects", params.len(), objects.len())));
    };
    let mut evaluations = 0;
    for (mask, &o) in os.iter().enumerate() {
        for (i, &p) in ps.iter().enumerate() {
            evaluations += 1;
            if truth(p, o)? != Truth::from(mask >> i & 1 == 1) {
                return Err(LimitError::Deficit(format!("evaluation mismatch at {} and {}", m.name(p), m.name(o))));
            }
        }
    }
    Ok(IpWitness { params: ps, objects: os, evaluations })
}

/// A node of the tree is the sequence of branch indices leading to it.
pub type Node = Vec<usize>;

#[derive(Clone, Debug)]
pub struct TreeWitness {
    pub structure: Structure,
    pub depth: usize,
    pub branching: usize,
    /// Parameter at every internal node.
    pub params: BTreeMap<Node, Elem>,
    /// Target value at every non-root node.
    pub values: BTreeMap<Node, Elem>,
    /// A pair `(x, y)` realizing the path to every leaf.
    pub paths: BTreeMap<Node, (Elem, Elem)>,
    /// Generic elements added by free amalgamation.
    pub amalgams: usize,
}

fn nodes(depth: usize, branching: usize) -> Vec<Node> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..depth {
        let mut next = vec![];
        for n in &layer {
            for i in 0..branching {
                let mut c: Node = n.clone();
                c.push(i);
                next.push(c);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Checks `t(x, y)` is outside `<x> ∪ <y>` in the free object structure on `x, y`.
fn qualifies(class: &dyn ClassOps, t: &Term) -> bool {
    if !matches!(t, Term::App(..)) || class.signature().functions().is_empty() {
        return false;
    }
    let mut draft = Structure::new(class.signature().clone());
    let x = draft.add_element(0, "x").unwrap();
    let y = draft.add_element(0, "y").unwrap();
    let Ok(c) = class.complete(&draft) else { return false };
    let (x, y) = (c.map[x as usize], c.map[y as usize]);
    let asg = Assignment::from([("x".to_string(), x), ("y".to_string(), y)]);
    match evaluate_term(t, &c.structure, &asg) {
        Ok(Some(v)) => !c.structure.generated([x]).contains(&v) && !c.structure.generated([y]).contains(&v),
        _ => false,
    }
}

struct TreeSearch<'a> {
    m: &'a Structure,
    lifted: &'a Term,
    branching: usize,
    depth: usize,
    spent: u64,
    budget: u64,
    params: BTreeMap<Node, Elem>,
    values: BTreeMap<Node, Elem>,
    paths: BTreeMap<Node, (Elem, Elem)>,
}

impl TreeSearch<'_> {
    fn value(&mut self, p: Elem, (x, y): (Elem, Elem)) -> Result<Option<Elem>, LimitError> {
        self.spent += 1;
        if self.spent > self.budget {
            return Err(LimitError::Deficit(format!("budget of {} evaluations exhausted", self.budget)));
        }
        let asg = Assignment::from([("p".to_string(), p), ("x".to_string(), x), ("y".to_string(), y)]);
        Ok(evaluate_term(self.lifted, self.m, &asg)?)
    }

    /// Realizes the subtree at `node` using only pairs from `pairs`.
    fn grow(&mut self, node: &Node, pairs: &[(Elem, Elem)]) -> Result<bool, LimitError> {
        if node.len() == self.depth {
            self.paths.insert(node.clone(), pairs[0]);
            return Ok(true);
        }
        let p = self.params[node];
        let mut groups: BTreeMap<Elem, Vec<(Elem, Elem)>> = BTreeMap::new();
        for &pair in pairs {
            if let Some(v) = self.value(p, pair)? {
                groups.entry(v).or_default().push(pair);
            }
        }
        let mut i = 0;
        for (v, group) in groups {
            if i == self.branching {
                break;
            }
            let child: Node = [node.as_slice(), &[i]].concat();
            if self.grow(&child, &group)? {
                self.values.insert(child, v);
                i += 1;
            } else {
                self.paths.retain(|n, _| !n.starts_with(&child));
                self.values.retain(|n, _| !n.starts_with(&child));
            }
        }
        Ok(i == self.branching)
    }
}

/// Parameters `p_μ` and values `a_μ` on the tree with `branching`-fold
/// branching and `depth` levels such that siblings carry distinct values
/// (so `t_{p_μ}(x, y) = a_{μi}` is 2-inconsistent across `i`) and every
/// root-to-leaf path is realized by some pair `(x, y)` of `m`. Generic
/// parameters are added by free amalgamation when `m` has too few.
pub fn tree_witness(m: &Structure, class: &dyn ClassOps, t: &Term, depth: usize, branching: usize, budget: u64) -> Result<TreeWitness, LimitError> {
    let pc = class.parameterized().ok_or_else(|| LimitError::Config(format!("{} has no parameter sort", class.name())))?;
    if !qualifies(pc.object_class().as_ref(), t) {
        return Err(LimitError::Rejected(format!("no qualifying term: {} has no term outside <x> ∪ <y>", pc.object_class().name())));
    }
    if branching == 0 {
        return Err(LimitError::Config("branching must be at least 1".into()));
    }
    class.check_member(m).map_err(LimitError::NotMember)?;
    let psort = pc.parameter_sort();
    let osort = pc.symbols().object_sorts[0];
    let lifted = pc.lift_object_term(t, &Term::var("p", psort));
    let internal: Vec<Node> = nodes(depth, branching).into_iter().filter(|n| n.len() < depth).collect();
    let mut cur = m.clone();
    let mut amalgams = 0;
    while cur.elements_of(psort).len() < internal.len() || cur.elements_of(osort).is_empty() {
        let sort = if cur.elements_of(osort).is_empty() { osort } else { psort };
        cur = generic_element(class, sort, &cur)?.structure;
        amalgams += 1;
    }
    let params = internal.iter().cloned().zip(cur.elements_of(psort).iter().copied()).collect();
    let objs = cur.elements_of(osort).to_vec();
    let pairs: Vec<(Elem, Elem)> = objs.iter().flat_map(|&x| objs.iter().map(move |&y| (x, y))).collect();
    let mut search = TreeSearch {
        m: &cur,
        lifted: &lifted,
        branching,
        depth,
        spent: 0,
        budget,
        params,
        values: BTreeMap::new(),
        paths: BTreeMap::new(),
    };
    if !search.grow(&vec![], &pairs)? {
        return Err(LimitError::Deficit(format!(
            "no realizable tree of depth {depth} and branching {branching} among {} objects",
            objs.len()
        )));
    }
    let TreeSearch { params, values, paths, .. } = search;
    let w = TreeWitness { structure: cur, depth, branching, params, values, paths, amalgams };
    verify_tree(&w, &lifted)?;
    Ok(w)
}

/// Sibling values are pairwise distinct and every leaf pair satisfies its path.
pub fn verify_tree(w: &TreeWitness, lifted: &Term) -> Result<(), LimitError> {
    let s = &w.structure;
    for node in w.params.keys() {
        let kids: BTreeSet<Elem> = (0..w.branching).map(|i| w.values[&[node.as_slice(), &[i]].concat()]).collect();
        if kids.len() != w.branching {
            return Err(LimitError::Deficit(format!("children of {node:?} share a value")));
        }
    }
    for (leaf, &(x, y)) in &w.paths {
        for l in 0..w.depth {
            let p = w.params[&leaf[..l].to_vec()];
            let a = w.values[&leaf[..=l].to_vec()];
            let asg = Assignment::from([("p".to_string(), p), ("x".to_string(), x), ("y".to_string(), y)]);
            if evaluate_term(lifted, s, &asg)? != Some(a) {
                return Err(LimitError::Deficit(format!("leaf {leaf:?} fails at level {l}")));
            }
        }
    }
    let leaves = w.branching.pow(w.depth as u32);
    if w.paths.len() != leaves {
        return Err(LimitError::Deficit(format!("{} of {leaves} paths realized", w.paths.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{parse_class, Graphs, Linear, Sets};
    use crate::search::DEFAULT_BUDGET;
    use std::sync::Arc;

    fn cycle(n: usize) -> Structure {
        let mut g = Graphs::new().random_member(&mut ChaCha8Rng::seed_from_u64(0), 0);
        for i in 0..n {
            g.add_element(0, &format!("v{i}")).unwrap();
        }
        for i in 0..n as Elem {
            let j = (i + 1) % n as Elem;
            g.add_tuple(0, vec![i, j]).unwrap();
            g.add_tuple(0, vec![j, i]).unwrap();
        }
        g
    }

    #[test]
    fn sets_saturate_to_a_nonempty_set() {
        let sets: ClassHandle = Arc::new(Sets::new());
        let cfg = SaturationConfig::new(sets.clone(), 1, 1, 0);
        let out = saturate(&cfg, &sets.constants_structure()).unwrap();
        assert!(!out.structure.is_empty());
        assert!(out.to_text().starts_with("; saturated class=sets n=1"));
    }

    #[test]
    fn five_cycle_lacks_common_neighbours() {
        let graphs = Graphs::new();
        let report = check_extension_property(&cycle(5), &graphs, 2, DEFAULT_BUDGET);
        assert!(!report.clean());
        assert!(check_extension_property(&cycle(5), &graphs, 1, DEFAULT_BUDGET).clean());
        let empty = Structure::new(graphs.signature().clone());
        assert!(check_extension_property(&empty, &Sets::new(), 0, DEFAULT_BUDGET).pairs > 0);
    }

    #[test]
    fn saturation_at_level_one_is_clean_and_repeatable() {
        let graphs: ClassHandle = Arc::new(Graphs::new());
        let cfg = SaturationConfig::new(graphs.clone(), 1, 3, 11);
        let a = saturate(&cfg, &cycle(3)).unwrap();
        let b = saturate(&cfg, &cycle(3)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert!(check_extension_property(&a.structure, graphs.as_ref(), 1, DEFAULT_BUDGET).clean());
        assert!(graphs.contains(&a.structure));
    }

    #[test]
    fn five_cycle_is_homogeneous() {
        let graphs = Graphs::new();
        let c5 = cycle(5);
        let r = back_and_forth_check(&c5, &graphs, 2, 30, 1, DEFAULT_BUDGET);
        assert!(r.passed() && r.pairs > 0, "{r:?}");
        assert!(back_and_forth_check(&c5, &graphs, 0, 30, 1, DEFAULT_BUDGET).pairs == 0);
        let mut path = cycle(3);
        path.remove_tuple(0, &[0, 2]);
        path.remove_tuple(0, &[2, 0]);
        assert!(!extends_back_and_forth(&path, &[0], &[1], 1, DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn duplicated_points_over_a_line() {
        let v = Linear::vector_space(2).unwrap();
        let plane = v.from_invariants(&[2, 2]);
        let (u, w) = (plane.lookup(0, "g").unwrap(), plane.lookup(0, "h").unwrap());
        let d = acl_duplication_check(&v, &plane, &ElemSet::from([u]), w, 1, DEFAULT_BUDGET).unwrap();
        assert!(d.realizations.len() >= 2);
        assert!(acl_duplication_check(&v, &plane, &ElemSet::from([u]), u, 1, DEFAULT_BUDGET).is_err());
        let graphs = Graphs::new();
        let g = cycle(3);
        let d = acl_duplication_check(&graphs, &g, &ElemSet::from([0]), 1, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(d.realizations.len(), 2);
    }

    #[test]
    fn trivial_terms_are_rejected() {
        let class = parse_class("param(sets, sets)").unwrap();
        let pc = class.parameterized().unwrap();
        let start = pc.structures_with(1, 1).remove(0);
        let t = Term::var("x", 0);
        assert!(matches!(tree_witness(&start, class.as_ref(), &t, 1, 2, DEFAULT_BUDGET), Err(LimitError::Rejected(_))));
    }

    #[test]
    fn depth_zero_tree_is_a_single_node() {
        let class = parse_class("param(vec(2), sets)").unwrap();
        let pc = class.parameterized().unwrap();
        let start = pc.structures_with(1, 2).remove(0);
        let x_plus_y = Term::app(1, vec![Term::var("x", 0), Term::var("y", 0)]);
        let w = tree_witness(&start, class.as_ref(), &x_plus_y, 0, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(w.paths.len(), 1);
        assert!(w.values.is_empty());
    }

    #[test]
    fn zero_patterns_need_no_search() {
        let class = parse_class("param(graphs, sets)").unwrap();
        let pc = class.parameterized().unwrap();
        let start = pc.structures_with(1, 1).remove(0);
        let e = pc.symbols().object_relations[0];
        let (p, o) = (pc.parameter_sort(), pc.symbols().object_sorts[0]);
        let psi = SeparatingFormula {
            formula: QfFormula::Rel(e, vec![Term::var("p", p), Term::var("x", o), Term::var("b", o)]),
            parameter: "p".into(),
            object: "x".into(),
            fixed: Assignment::from([("b".to_string(), start.lookup_any("o0").unwrap())]),
        };
        assert_eq!(ip_witness(&start, class.as_ref(), &psi, 0, DEFAULT_BUDGET).unwrap().evaluations, 0);
        assert!(matches!(ip_witness(&start, class.as_ref(), &psi, 1, DEFAULT_BUDGET), Err(LimitError::Deficit(_))));
    }
}
