//! Finite multi-sorted structures with possibly partial function tables.
//!
//! Elements are global ids (`Elem`) carrying a sort and a name that is unique
//! within its sort. A function entry that is absent from a table must be
//! declared on the frontier, either explicitly or because the function is
//! marked open (every absent entry is then intentionally free).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::signature::{FunId, RelId, Signature, SortId};

pub type Elem = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("element `{name}` already exists in sort `{sort}`")]
    DuplicateElement { sort: String, name: String },
    #[error("symbol `{symbol}` expects {expected} arguments, got {got}")]
    Arity { symbol: String, expected: usize, got: usize },
    #[error("element `{elem}` has sort `{found}` but `{symbol}` expects `{expected}` at position {position}")]
    SortMismatch { symbol: String, position: usize, elem: String, found: String, expected: String },
    #[error("conflicting values for `{symbol}` at ({args}): `{old}` vs `{new}`")]
    Conflict { symbol: String, args: String, old: String, new: String },
    #[error("function `{symbol}` has no entry at ({args}) and the tuple is not on the frontier")]
    MissingEntry { symbol: String, args: String },
    #[error("frontier tuple ({args}) of `{symbol}` also has a table entry")]
    FrontierDefined { symbol: String, args: String },
}

#[derive(Clone, PartialEq, Eq)]
pub struct Structure {
    sig: Arc<Signature>,
    names: Vec<String>,
    sorts: Vec<SortId>,
    by_sort: Vec<Vec<Elem>>,
    index: HashMap<(SortId, String), Elem>,
    rels: Vec<BTreeSet<Vec<Elem>>>,
    funs: Vec<BTreeMap<Vec<Elem>, Elem>>,
    frontier: Vec<BTreeSet<Vec<Elem>>>,
    open: Vec<bool>,
}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::text::structure_to_string(self, "_"))
    }
}

impl Structure {
    pub fn new(sig: Arc<Signature>) -> Self {
        let (ns, nf, nr) = (sig.sorts().len(), sig.functions().len(), sig.relations().len());
        Structure {
            sig,
            names: vec![],
            sorts: vec![],
            by_sort: vec![vec![]; ns],
            index: HashMap::new(),
            rels: vec![BTreeSet::new(); nr],
            funs: vec![BTreeMap::new(); nf],
            frontier: vec![BTreeSet::new(); nf],
            open: vec![false; nf],
        }
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        0..self.names.len() as Elem
    }

    pub fn elements_of(&self, sort: SortId) -> &[Elem] {
        &self.by_sort[sort]
    }

    pub fn name(&self, e: Elem) -> &str {
        &self.names[e as usize]
    }

    pub fn sort_of(&self, e: Elem) -> SortId {
        self.sorts[e as usize]
    }

    pub fn lookup(&self, sort: SortId, name: &str) -> Option<Elem> {
        self.index.get(&(sort, name.to_string())).copied()
    }

    /// Looks a name up in every sort; ambiguous names give `None`.
    pub fn lookup_any(&self, name: &str) -> Option<Elem> {
        let hits: Vec<Elem> = (0..self.by_sort.len()).filter_map(|s| self.lookup(s, name)).collect();
        (hits.len() == 1).then(|| hits[0])
    }

    pub fn add_element(&mut self, sort: SortId, name: &str) -> Result<Elem, StructureError> {
        if self.lookup(sort, name).is_some() {
            return Err(StructureError::DuplicateElement {
                sort: self.sig.sort_name(sort).to_string(),
                name: name.to_string(),
            });
        }
        let e = self.names.len() as Elem;
        self.names.push(name.to_string());
        self.sorts.push(sort);
        self.by_sort[sort].push(e);
        self.index.insert((sort, name.to_string()), e);
        Ok(e)
    }

    /// Adds an element named `base`, or `base_1`, `base_2`, ... if taken.
    pub fn add_fresh(&mut self, sort: SortId, base: &str) -> Elem {
        if self.lookup(sort, base).is_none() {
            return self.add_element(sort, base).unwrap();
        }
        let name = (1..).map(|i| format!("{base}_{i}")).find(|n| self.lookup(sort, n).is_none()).unwrap();
        self.add_element(sort, &name).unwrap()
    }

    fn check_args(&self, symbol: &str, expected: &[SortId], args: &[Elem]) -> Result<(), StructureError> {
        if expected.len() != args.len() {
            return Err(StructureError::Arity {
                symbol: symbol.to_string(),
                expected: expected.len(),
                got: args.len(),
            });
        }
        for (i, (&s, &a)) in expected.iter().zip(args).enumerate() {
            if self.sort_of(a) != s {
                return Err(StructureError::SortMismatch {
                    symbol: symbol.to_string(),
                    position: i,
                    elem: self.name(a).to_string(),
                    found: self.sig.sort_name(self.sort_of(a)).to_string(),
                    expected: self.sig.sort_name(s).to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn add_tuple(&mut self, rel: RelId, tuple: Vec<Elem>) -> Result<bool, StructureError> {
        let sym = &self.sig.relations()[rel];
        self.check_args(&sym.name, &sym.args, &tuple)?;
        Ok(self.rels[rel].insert(tuple))
    }

    pub fn remove_tuple(&mut self, rel: RelId, tuple: &[Elem]) -> bool {
        self.rels[rel].remove(tuple)
    }

    pub fn holds(&self, rel: RelId, tuple: &[Elem]) -> bool {
        self.rels[rel].contains(tuple)
    }

    pub fn tuples(&self, rel: RelId) -> &BTreeSet<Vec<Elem>> {
        &self.rels[rel]
    }

    pub fn set_value(&mut self, f: FunId, args: Vec<Elem>, val: Elem) -> Result<(), StructureError> {
        let sym = &self.sig.functions()[f];
        self.check_args(&sym.name, &sym.args, &args)?;
        self.check_args(&sym.name, &[sym.result], &[val])?;
        if let Some(&old) = self.funs[f].get(&args) {
            if old != val {
                return Err(StructureError::Conflict {
                    symbol: sym.name.clone(),
                    args: self.names_of(&args),
                    old: self.name(old).to_string(),
                    new: self.name(val).to_string(),
                });
            }
            return Ok(());
        }
        self.frontier[f].remove(&args);
        self.funs[f].insert(args, val);
        Ok(())
    }

    pub fn value(&self, f: FunId, args: &[Elem]) -> Option<Elem> {
        self.funs[f].get(args).copied()
    }

    pub fn table(&self, f: FunId) -> &BTreeMap<Vec<Elem>, Elem> {
        &self.funs[f]
    }

    pub fn mark_frontier(&mut self, f: FunId, args: Vec<Elem>) -> Result<(), StructureError> {
        let sym = &self.sig.functions()[f];
        self.check_args(&sym.name, &sym.args, &args)?;
        if self.funs[f].contains_key(&args) {
            return Err(StructureError::FrontierDefined { symbol: sym.name.clone(), args: self.names_of(&args) });
        }
        self.frontier[f].insert(args);
        Ok(())
    }

    /// An open function treats every absent entry as a frontier entry.
    pub fn set_open(&mut self, f: FunId, open: bool) {
        self.open[f] = open;
        if open {
            self.frontier[f].clear();
        }
    }

    pub fn is_open(&self, f: FunId) -> bool {
        self.open[f]
    }

    pub fn explicit_frontier(&self, f: FunId) -> &BTreeSet<Vec<Elem>> {
        &self.frontier[f]
    }

    pub fn is_frontier(&self, f: FunId, args: &[Elem]) -> bool {
        !self.funs[f].contains_key(args) && (self.open[f] || self.frontier[f].contains(args))
    }

    pub fn is_total(&self) -> bool {
        (0..self.funs.len()).all(|f| self.undefined_entries(f).is_empty())
    }

    /// All argument tuples of `f` over the current carriers, in lexicographic order.
    pub fn arg_tuples(&self, f: FunId) -> Vec<Vec<Elem>> {
        let sorts = &self.sig.functions()[f].args;
        product(sorts.iter().map(|&s| self.by_sort[s].as_slice()))
    }

    pub fn relation_tuples_space(&self, r: RelId) -> Vec<Vec<Elem>> {
        let sorts = &self.sig.relations()[r].args;
        product(sorts.iter().map(|&s| self.by_sort[s].as_slice()))
    }

    pub fn undefined_entries(&self, f: FunId) -> Vec<Vec<Elem>> {
        self.arg_tuples(f).into_iter().filter(|t| !self.funs[f].contains_key(t)).collect()
    }

    /// Marks every currently undefined entry as frontier (functions become open
    /// when something is missing, and closed again when nothing is).
    pub fn seal(&mut self) {
        for f in 0..self.funs.len() {
            let missing = self.arg_tuples(f).iter().any(|t| !self.funs[f].contains_key(t));
            self.open[f] = missing;
            self.frontier[f].clear();
        }
    }

    pub fn validate(&self) -> Result<(), StructureError> {
        for (r, set) in self.rels.iter().enumerate() {
            let sym = &self.sig.relations()[r];
            for t in set {
                self.check_args(&sym.name, &sym.args, t)?;
            }
        }
        for f in 0..self.funs.len() {
            let sym = &self.sig.functions()[f];
            for (args, &v) in &self.funs[f] {
                self.check_args(&sym.name, &sym.args, args)?;
                self.check_args(&sym.name, &[sym.result], &[v])?;
            }
            for t in &self.frontier[f] {
                if self.funs[f].contains_key(t) {
                    return Err(StructureError::FrontierDefined { symbol: sym.name.clone(), args: self.names_of(t) });
                }
            }
            if !self.open[f] {
                if let Some(t) = self.arg_tuples(f).into_iter().find(|t| !self.funs[f].contains_key(t) && !self.frontier[f].contains(t)) {
                    return Err(StructureError::MissingEntry { symbol: sym.name.clone(), args: self.names_of(&t) });
                }
            }
        }
        Ok(())
    }

    pub fn names_of(&self, els: &[Elem]) -> String {
        els.iter().map(|&e| self.name(e)).collect::<Vec<_>>().join(" ")
    }

    /// Closure of `seeds` under constants and defined function applications.
    pub fn generated(&self, seeds: impl IntoIterator<Item = Elem>) -> BTreeSet<Elem> {
        let mut set: BTreeSet<Elem> = seeds.into_iter().collect();
        loop {
            let mut added = Vec::new();
            for table in &self.funs {
                for (args, &v) in table {
                    if !set.contains(&v) && args.iter().all(|a| set.contains(a)) {
                        added.push(v);
                    }
                }
            }
            if added.is_empty() {
                return set;
            }
            set.extend(added);
        }
    }

    /// Induced substructure on `subset`; the returned vector maps new ids to old.
    /// Entries whose value falls outside the subset become frontier entries.
    pub fn induced(&self, subset: &BTreeSet<Elem>) -> (Structure, Vec<Elem>) {
        let mut s = Structure::new(self.sig.clone());
        let mut fwd = HashMap::new();
        let mut back = Vec::new();
        for &e in subset {
            fwd.insert(e, s.add_element(self.sort_of(e), self.name(e)).unwrap());
            back.push(e);
        }
        let map = |t: &[Elem]| t.iter().map(|x| fwd.get(x).copied()).collect::<Option<Vec<_>>>();
        for (r, set) in self.rels.iter().enumerate() {
            for t in set {
                if let Some(t2) = map(t) {
                    s.rels[r].insert(t2);
                }
            }
        }
        for (f, table) in self.funs.iter().enumerate() {
            for (args, v) in table {
                if let (Some(a2), Some(&v2)) = (map(args), fwd.get(v)) {
                    s.funs[f].insert(a2, v2);
                }
            }
        }
        s.seal();
        (s, back)
    }

    pub fn generated_substructure(&self, seeds: impl IntoIterator<Item = Elem>) -> (Structure, Vec<Elem>) {
        self.induced(&self.generated(seeds))
    }

    /// Copies `other` into `self`. `glue[i]` names an existing element to
    /// identify element `i` of `other` with; unglued elements get fresh ids
    /// (renamed on clash). Returns the image of every element of `other`.
    pub fn absorb(&mut self, other: &Structure, glue: &[Option<Elem>]) -> Result<Vec<Elem>, StructureError> {
        let mut img = Vec::with_capacity(other.len());
        for e in other.elements() {
            let target = match glue.get(e as usize).copied().flatten() {
                Some(t) => t,
                None => self.add_fresh(other.sort_of(e), other.name(e)),
            };
            img.push(target);
        }
        for (r, set) in other.rels.iter().enumerate() {
            for t in set {
                self.rels[r].insert(t.iter().map(|&x| img[x as usize]).collect());
            }
        }
        for (f, table) in other.funs.iter().enumerate() {
            for (args, &v) in table {
                let a2: Vec<Elem> = args.iter().map(|&x| img[x as usize]).collect();
                self.set_value(f, a2, img[v as usize])?;
            }
            for t in &other.frontier[f] {
                let a2: Vec<Elem> = t.iter().map(|&x| img[x as usize]).collect();
                if !self.funs[f].contains_key(&a2) {
                    self.frontier[f].insert(a2);
                }
            }
            if other.open[f] {
                self.open[f] = true;
            }
        }
        Ok(img)
    }

    /// Reduct to `sig`, whose symbols must be a prefix of this signature's.
    /// Elements of dropped sorts disappear; the second vector maps old ids to new.
    pub fn reduct(&self, sig: &Arc<Signature>) -> (Structure, Vec<Option<Elem>>) {
        let mut s = Structure::new(sig.clone());
        let ns = sig.sorts().len();
        let fwd: Vec<Option<Elem>> = self
            .elements()
            .map(|e| (self.sort_of(e) < ns).then(|| s.add_element(self.sort_of(e), self.name(e)).unwrap()))
            .collect();
        let map = |t: &[Elem]| t.iter().map(|&x| fwd[x as usize]).collect::<Option<Vec<_>>>();
        for r in 0..sig.relations().len() {
            s.rels[r] = self.rels[r].iter().filter_map(|t| map(t)).collect();
        }
        for f in 0..sig.functions().len() {
            s.funs[f] = self.funs[f].iter().filter_map(|(a, &v)| Some((map(a)?, fwd[v as usize]?))).collect();
            s.frontier[f] = self.frontier[f].iter().filter_map(|t| map(t)).collect();
            s.open[f] = self.open[f];
        }
        (s, fwd)
    }

    /// Sends each element to the element of `tgt` with the same sort and name.
    pub fn inclusion_by_names(&self, tgt: &Structure) -> Option<Vec<Elem>> {
        self.elements().map(|e| tgt.lookup(self.sort_of(e), self.name(e))).collect()
    }

    /// Same structure with the given signature object (which must be equal).
    pub fn with_signature(mut self, sig: Arc<Signature>) -> Self {
        debug_assert_eq!(*self.sig, *sig);
        self.sig = sig;
        self
    }

    /// Relation tuples across all symbols, as (symbol, tuple).
    pub fn all_tuples(&self) -> impl Iterator<Item = (RelId, &Vec<Elem>)> {
        self.rels.iter().enumerate().flat_map(|(r, s)| s.iter().map(move |t| (r, t)))
    }

    pub fn all_entries(&self) -> impl Iterator<Item = (FunId, &Vec<Elem>, Elem)> {
        self.funs.iter().enumerate().flat_map(|(f, t)| t.iter().map(move |(a, &v)| (f, a, v)))
    }
}

pub(crate) fn product(sets: impl Iterator<Item = impl AsRef<[Elem]>>) -> Vec<Vec<Elem>> {
    let mut out = vec![vec![]];
    for s in sets {
        let s = s.as_ref();
        let mut next = Vec::with_capacity(out.len() * s.len());
        for prefix in &out {
            for &x in s {
                let mut t = prefix.clone();
                t.push(x);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphismError {
    #[error("map has {got} entries, source has {expected} elements")]
    Length { expected: usize, got: usize },
    #[error("`{elem}` changes sort")]
    Sort { elem: String },
    #[error("relation `{rel}` not preserved at ({tuple})")]
    RelationNotPreserved { rel: String, tuple: String },
    #[error("function `{fun}` not preserved at ({args})")]
    FunctionNotPreserved { fun: String, args: String },
    #[error("`{a}` and `{b}` have the same image")]
    NotInjective { a: String, b: String },
    #[error("relation `{rel}` holds at the image of ({tuple}) but not in the source")]
    RelationNotReflected { rel: String, tuple: String },
    #[error("function `{fun}` is defined at the image of ({args}) but not in the source")]
    FunctionNotReflected { fun: String, args: String },
}

/// A sort-preserving map between carriers, indexed by source element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Morphism {
    pub map: Vec<Elem>,
    pub embedding: bool,
}

impl Morphism {
    /// Checks the homomorphism conditions and records whether the map is an embedding.
    pub fn new(src: &Structure, tgt: &Structure, map: Vec<Elem>) -> Result<Morphism, MorphismError> {
        check_homomorphism(src, tgt, &map)?;
        let embedding = check_reflection(src, tgt, &map).is_ok();
        Ok(Morphism { map, embedding })
    }

    pub fn embedding(src: &Structure, tgt: &Structure, map: Vec<Elem>) -> Result<Morphism, MorphismError> {
        check_homomorphism(src, tgt, &map)?;
        check_reflection(src, tgt, &map)?;
        Ok(Morphism { map, embedding: true })
    }

    pub fn identity(s: &Structure) -> Morphism {
        Morphism { map: s.elements().collect(), embedding: true }
    }

    pub fn apply(&self, e: Elem) -> Elem {
        self.map[e as usize]
    }

    /// `self` followed by `then`.
    pub fn then(&self, then: &Morphism) -> Morphism {
        Morphism {
            map: self.map.iter().map(|&e| then.apply(e)).collect(),
            embedding: self.embedding && then.embedding,
        }
    }

    pub fn image(&self) -> BTreeSet<Elem> {
        self.map.iter().copied().collect()
    }
}

pub fn check_homomorphism(src: &Structure, tgt: &Structure, map: &[Elem]) -> Result<(), MorphismError> {
    if map.len() != src.len() {
        return Err(MorphismError::Length { expected: src.len(), got: map.len() });
    }
    for e in src.elements() {
        if tgt.sort_of(map[e as usize]) != src.sort_of(e) {
            return Err(MorphismError::Sort { elem: src.name(e).to_string() });
        }
    }
    let sig = src.signature();
    let img = |t: &[Elem]| t.iter().map(|&x| map[x as usize]).collect::<Vec<_>>();
    for (r, t) in src.all_tuples() {
        if !tgt.holds(r, &img(t)) {
            return Err(MorphismError::RelationNotPreserved {
                rel: sig.relations()[r].name.clone(),
                tuple: src.names_of(t),
            });
        }
    }
    for (f, args, v) in src.all_entries() {
        if tgt.value(f, &img(args)) != Some(map[v as usize]) {
            return Err(MorphismError::FunctionNotPreserved {
                fun: sig.functions()[f].name.clone(),
                args: src.names_of(args),
            });
        }
    }
    Ok(())
}

/// Injectivity plus reflection of relations and of function entries that land
/// in the image (assumes the homomorphism conditions already hold).
pub fn check_reflection(src: &Structure, tgt: &Structure, map: &[Elem]) -> Result<(), MorphismError> {
    let mut inv: HashMap<Elem, Elem> = HashMap::new();
    for e in src.elements() {
        if let Some(prev) = inv.insert(map[e as usize], e) {
            return Err(MorphismError::NotInjective { a: src.name(prev).into(), b: src.name(e).into() });
        }
    }
    let sig = src.signature();
    let pre = |t: &[Elem]| t.iter().map(|x| inv.get(x).copied()).collect::<Option<Vec<_>>>();
    for (r, t) in tgt.all_tuples() {
        if let Some(p) = pre(t) {
            if !src.holds(r, &p) {
                return Err(MorphismError::RelationNotReflected {
                    rel: sig.relations()[r].name.clone(),
                    tuple: src.names_of(&p),
                });
            }
        }
    }
    for (f, args, v) in tgt.all_entries() {
        if let (Some(p), true) = (pre(args), inv.contains_key(&v)) {
            if src.value(f, &p).is_none() {
                return Err(MorphismError::FunctionNotReflected {
                    fun: sig.functions()[f].name.clone(),
                    args: src.names_of(&p),
                });
            }
        }
    }
    Ok(())
}
