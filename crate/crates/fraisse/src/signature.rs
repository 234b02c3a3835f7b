//! Multi-sorted signatures and the two language transformations used by the
//! class combinators: lifting every object symbol over a parameter sort, and
//! expanding a signature by one generic symbol family.

use std::fmt;

use thiserror::Error;

pub type SortId = usize;
pub type FunId = usize;
pub type RelId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SortKind {
    Object,
    Parameter,
    Quotient,
}

impl SortKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SortKind::Object => "object",
            SortKind::Parameter => "parameter",
            SortKind::Quotient => "quotient",
        }
    }

    pub fn parse(s: &str) -> Option<SortKind> {
        match s {
            "object" => Some(SortKind::Object),
            "parameter" => Some(SortKind::Parameter),
            "quotient" => Some(SortKind::Quotient),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sort {
    pub name: String,
    pub kind: SortKind,
}

/// Constants are function symbols with no arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionSymbol {
    pub name: String,
    pub args: Vec<SortId>,
    pub result: SortId,
}

impl FunctionSymbol {
    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RelationSymbol {
    pub name: String,
    pub args: Vec<SortId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("duplicate sort `{0}`")]
    DuplicateSort(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("a signature has at most one parameter sort (already have `{0}`)")]
    SecondParameterSort(String),
    #[error("sort index {0} out of range")]
    UnknownSort(SortId),
    #[error("unknown sort `{0}`")]
    UnknownSortName(String),
    #[error("relation `{0}` needs at least one argument")]
    NullaryRelation(String),
    #[error("signature already has a parameter sort; parameterizing twice is not supported")]
    AlreadyParameterized,
    #[error("parameter signature must have exactly one sort, found {0}")]
    ParameterSignatureNotOneSorted(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Signature {
    sorts: Vec<Sort>,
    functions: Vec<FunctionSymbol>,
    relations: Vec<RelationSymbol>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sort(&mut self, name: &str, kind: SortKind) -> Result<SortId, SignatureError> {
        if self.sort(name).is_some() {
            return Err(SignatureError::DuplicateSort(name.to_string()));
        }
        if kind == SortKind::Parameter {
            if let Some(p) = self.parameter_sort() {
                return Err(SignatureError::SecondParameterSort(self.sorts[p].name.clone()));
            }
        }
        self.sorts.push(Sort { name: name.to_string(), kind });
        Ok(self.sorts.len() - 1)
    }

    fn check_new_symbol(&self, name: &str, sorts: &[SortId]) -> Result<(), SignatureError> {
        if self.function(name).is_some() || self.relation(name).is_some() {
            return Err(SignatureError::DuplicateSymbol(name.to_string()));
        }
        match sorts.iter().find(|&&s| s >= self.sorts.len()) {
            Some(&s) => Err(SignatureError::UnknownSort(s)),
            None => Ok(()),
        }
    }

    pub fn add_function(
        &mut self,
        name: &str,
        args: &[SortId],
        result: SortId,
    ) -> Result<FunId, SignatureError> {
        let mut all = args.to_vec();
        all.push(result);
        self.check_new_symbol(name, &all)?;
        self.functions.push(FunctionSymbol { name: name.to_string(), args: args.to_vec(), result });
        Ok(self.functions.len() - 1)
    }

    pub fn add_relation(&mut self, name: &str, args: &[SortId]) -> Result<RelId, SignatureError> {
        if args.is_empty() {
            return Err(SignatureError::NullaryRelation(name.to_string()));
        }
        self.check_new_symbol(name, args)?;
        self.relations.push(RelationSymbol { name: name.to_string(), args: args.to_vec() });
        Ok(self.relations.len() - 1)
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn functions(&self) -> &[FunctionSymbol] {
        &self.functions
    }

    pub fn relations(&self) -> &[RelationSymbol] {
        &self.relations
    }

    pub fn sort(&self, name: &str) -> Option<SortId> {
        self.sorts.iter().position(|s| s.name == name)
    }

    pub fn function(&self, name: &str) -> Option<FunId> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn relation(&self, name: &str) -> Option<RelId> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn sort_name(&self, s: SortId) -> &str {
        &self.sorts[s].name
    }

    pub fn parameter_sort(&self) -> Option<SortId> {
        self.sorts.iter().position(|s| s.kind == SortKind::Parameter)
    }

    pub fn constants(&self) -> impl Iterator<Item = FunId> + '_ {
        (0..self.functions.len()).filter(|&f| self.functions[f].args.is_empty())
    }

    /// True when no function symbols exist.
    pub fn is_relational(&self) -> bool {
        self.functions.is_empty()
    }

    fn has_symbol(&self, name: &str) -> bool {
        self.function(name).is_some() || self.relation(name).is_some()
    }

    /// First name of the form `base`, `base1`, `base2`, ... unused by symbols and sorts.
    pub fn fresh_name(&self, base: &str) -> String {
        let taken = |n: &str| self.has_symbol(n) || self.sort(n).is_some();
        if !taken(base) {
            return base.to_string();
        }
        (1..).map(|i| format!("{base}{i}")).find(|n| !taken(n)).unwrap()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::text::write_signature(f, self)
    }
}

/// Where each symbol of the object signature landed after lifting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parameterized {
    pub signature: Signature,
    pub parameter: SortId,
    /// Object-signature sort -> sort in the lifted signature.
    pub object_sorts: Vec<SortId>,
    pub object_functions: Vec<FunId>,
    pub object_relations: Vec<RelId>,
    /// Parameter-signature symbols, carried unchanged on the parameter sort.
    pub parameter_functions: Vec<FunId>,
    pub parameter_relations: Vec<RelId>,
}

/// Adds a parameter sort `P` carrying `sig_p`'s symbols and lifts every symbol
/// of `sig_o` so that it takes a parameter as its first argument. Lifted
/// symbols keep their names.
pub fn parameterize_signature(
    sig_o: &Signature,
    sig_p: &Signature,
) -> Result<Signature, SignatureError> {
    parameterize_with_map(sig_o, sig_p).map(|p| p.signature)
}

pub fn parameterize_with_map(
    sig_o: &Signature,
    sig_p: &Signature,
) -> Result<Parameterized, SignatureError> {
    if sig_o.parameter_sort().is_some() {
        return Err(SignatureError::AlreadyParameterized);
    }
    if sig_p.sorts.len() != 1 {
        return Err(SignatureError::ParameterSignatureNotOneSorted(sig_p.sorts.len()));
    }
    let mut sig = Signature::new();
    let mut object_sorts = Vec::new();
    for s in &sig_o.sorts {
        object_sorts.push(sig.add_sort(&s.name, s.kind)?);
    }
    let pname = sig.fresh_name("P");
    let p = sig.add_sort(&pname, SortKind::Parameter)?;
    let mut object_functions = Vec::new();
    for f in &sig_o.functions {
        let mut args = vec![p];
        args.extend(f.args.iter().map(|&a| object_sorts[a]));
        object_functions.push(sig.add_function(&f.name, &args, object_sorts[f.result])?);
    }
    let mut object_relations = Vec::new();
    for r in &sig_o.relations {
        let mut args = vec![p];
        args.extend(r.args.iter().map(|&a| object_sorts[a]));
        object_relations.push(sig.add_relation(&r.name, &args)?);
    }
    let mut parameter_functions = Vec::new();
    for f in &sig_p.functions {
        let args: Vec<SortId> = f.args.iter().map(|_| p).collect();
        parameter_functions.push(sig.add_function(&f.name, &args, p)?);
    }
    let mut parameter_relations = Vec::new();
    for r in &sig_p.relations {
        let args: Vec<SortId> = r.args.iter().map(|_| p).collect();
        parameter_relations.push(sig.add_relation(&r.name, &args)?);
    }
    Ok(Parameterized {
        signature: sig,
        parameter: p,
        object_sorts,
        object_functions,
        object_relations,
        parameter_functions,
        parameter_relations,
    })
}

/// Drops the parameter sort and its symbols, and removes the leading
/// parameter argument of every lifted symbol.
pub fn unparameterize(sig: &Signature) -> Option<Signature> {
    let p = sig.parameter_sort()?;
    let mut out = Signature::new();
    let mut remap = vec![usize::MAX; sig.sorts.len()];
    for (i, s) in sig.sorts.iter().enumerate() {
        if i != p {
            remap[i] = out.add_sort(&s.name, s.kind).ok()?;
        }
    }
    for f in &sig.functions {
        if f.args.first() == Some(&p) && f.result != p {
            let args: Vec<SortId> = f.args[1..].iter().map(|&a| remap[a]).collect();
            out.add_function(&f.name, &args, remap[f.result]).ok()?;
        }
    }
    for r in &sig.relations {
        if r.args.first() == Some(&p) && r.args.len() > 1 && r.args[1..].iter().all(|&a| a != p) {
            let args: Vec<SortId> = r.args[1..].iter().map(|&a| remap[a]).collect();
            out.add_relation(&r.name, &args).ok()?;
        }
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenericKind {
    Predicate { sort: SortId, arity: usize },
    Function { args: Vec<SortId>, result: SortId },
    Bijection { sort: SortId },
    EquivalenceWithQuotient { sort: SortId },
}

/// A generic-symbol family together with the names its symbols get.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenericSymbol {
    pub kind: GenericKind,
    pub names: Vec<String>,
}

impl GenericSymbol {
    pub fn predicate(sort: SortId, arity: usize) -> Self {
        Self { kind: GenericKind::Predicate { sort, arity }, names: vec!["U".into()] }
    }

    pub fn function(args: Vec<SortId>, result: SortId) -> Self {
        Self { kind: GenericKind::Function { args, result }, names: vec!["f".into()] }
    }

    pub fn bijection(sort: SortId) -> Self {
        Self { kind: GenericKind::Bijection { sort }, names: vec!["pi".into(), "pi_inv".into()] }
    }

    /// Names are: quotient sort, equivalence relation, projection.
    pub fn equivalence_with_quotient(sort: SortId) -> Self {
        Self {
            kind: GenericKind::EquivalenceWithQuotient { sort },
            names: vec!["W".into(), "E".into(), "p".into()],
        }
    }

    /// Replaces every default name that collides with `sig` by a fresh one.
    pub fn avoiding(mut self, sig: &Signature) -> Self {
        let mut probe = sig.clone();
        for n in self.names.iter_mut() {
            *n = probe.fresh_name(n);
            // reserve the name so later names in the family stay distinct
            let _ = probe.add_sort(n, SortKind::Quotient);
        }
        self
    }
}

/// Ids of the symbols added by [`extend_signature_generic`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extension {
    pub signature: Signature,
    pub new_sort: Option<SortId>,
    pub new_functions: Vec<FunId>,
    pub new_relations: Vec<RelId>,
}

pub fn extend_signature_generic(
    sig: &Signature,
    spec: &GenericSymbol,
) -> Result<Signature, SignatureError> {
    extend_with_map(sig, spec).map(|e| e.signature)
}

pub fn extend_with_map(sig: &Signature, spec: &GenericSymbol) -> Result<Extension, SignatureError> {
    let mut out = sig.clone();
    let n = &spec.names;
    let check = |s: SortId| if s < sig.sorts.len() { Ok(()) } else { Err(SignatureError::UnknownSort(s)) };
    let mut ext = Extension { signature: Signature::new(), new_sort: None, new_functions: vec![], new_relations: vec![] };
    match &spec.kind {
        GenericKind::Predicate { sort, arity } => {
            check(*sort)?;
            ext.new_relations.push(out.add_relation(&n[0], &vec![*sort; *arity])?);
        }
        GenericKind::Function { args, result } => {
            args.iter().chain(std::iter::once(result)).try_for_each(|&s| check(s))?;
            ext.new_functions.push(out.add_function(&n[0], args, *result)?);
        }
        GenericKind::Bijection { sort } => {
            check(*sort)?;
            ext.new_functions.push(out.add_function(&n[0], &[*sort], *sort)?);
            ext.new_functions.push(out.add_function(&n[1], &[*sort], *sort)?);
        }
        GenericKind::EquivalenceWithQuotient { sort } => {
            check(*sort)?;
            if out.has_symbol(&n[0]) {
                return Err(SignatureError::DuplicateSymbol(n[0].clone()));
            }
            let w = out.add_sort(&n[0], SortKind::Quotient)?;
            ext.new_sort = Some(w);
            ext.new_relations.push(out.add_relation(&n[1], &[*sort, *sort])?);
            ext.new_functions.push(out.add_function(&n[2], &[*sort], w)?);
        }
    }
    ext.signature = out;
    Ok(ext)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_sig() -> Signature {
        let mut s = Signature::new();
        let v = s.add_sort("V", SortKind::Object).unwrap();
        s.add_relation("E", &[v, v]).unwrap();
        s
    }

    fn param_sig() -> Signature {
        let mut s = Signature::new();
        s.add_sort("S", SortKind::Object).unwrap();
        s
    }

    #[test]
    fn lifting_graph_relation_adds_parameter_argument() {
        let lifted = parameterize_signature(&graph_sig(), &param_sig()).unwrap();
        let p = lifted.parameter_sort().unwrap();
        let v = lifted.sort("V").unwrap();
        let e = lifted.relation("E").unwrap();
        assert_eq!(lifted.relations()[e].args, vec![p, v, v]);
        assert_eq!(lifted.sorts().len(), 2);
        assert_eq!(lifted.sort_name(p), "P");
    }

    #[test]
    fn lifting_empty_signature_gives_lone_parameter_sort() {
        let lifted = parameterize_signature(&Signature::new(), &param_sig()).unwrap();
        assert_eq!(lifted.sorts().len(), 1);
        assert!(lifted.functions().is_empty() && lifted.relations().is_empty());
    }

    #[test]
    fn lifting_group_symbols() {
        let mut g = Signature::new();
        let s = g.add_sort("G", SortKind::Object).unwrap();
        g.add_function("zero", &[], s).unwrap();
        g.add_function("plus", &[s, s], s).unwrap();
        g.add_function("neg", &[s], s).unwrap();
        let lifted = parameterize_signature(&g, &param_sig()).unwrap();
        let p = lifted.parameter_sort().unwrap();
        let gs = lifted.sort("G").unwrap();
        let zero = &lifted.functions()[lifted.function("zero").unwrap()];
        assert_eq!((zero.args.clone(), zero.result), (vec![p], gs));
        let plus = &lifted.functions()[lifted.function("plus").unwrap()];
        assert_eq!(plus.args, vec![p, gs, gs]);
        let neg = &lifted.functions()[lifted.function("neg").unwrap()];
        assert_eq!(neg.args, vec![p, gs]);
        assert_eq!(unparameterize(&lifted).unwrap(), g);
    }

    #[test]
    fn double_parameterization_is_rejected() {
        let lifted = parameterize_signature(&graph_sig(), &param_sig()).unwrap();
        assert_eq!(
            parameterize_signature(&lifted, &param_sig()),
            Err(SignatureError::AlreadyParameterized)
        );
    }

    #[test]
    fn generic_expansions() {
        let sets = param_sig();
        let u = extend_signature_generic(&sets, &GenericSymbol::predicate(0, 1)).unwrap();
        assert_eq!(u.relations()[u.relation("U").unwrap()].args, vec![0]);
        let pi = extend_signature_generic(&sets, &GenericSymbol::bijection(0)).unwrap();
        assert!(pi.function("pi").is_some() && pi.function("pi_inv").is_some());

        let g = graph_sig();
        let clash = extend_signature_generic(&g, &GenericSymbol::equivalence_with_quotient(0));
        assert_eq!(clash, Err(SignatureError::DuplicateSymbol("E".into())));
        let spec = GenericSymbol::equivalence_with_quotient(0).avoiding(&g);
        let q = extend_signature_generic(&g, &spec).unwrap();
        let w = q.sort("W").unwrap();
        assert_eq!(q.sorts()[w].kind, SortKind::Quotient);
        let proj = &q.functions()[q.function("p").unwrap()];
        assert_eq!((proj.args.clone(), proj.result), (vec![0], w));
        assert_eq!(q.relations()[q.relation("E1").unwrap()].args, vec![0, 0]);
    }
}
