//! Text formats for signatures, structures, morphisms and formulas.
//!
//! ```text
//! (signature (sort V object) (rel E (V V)) (fun plus (V V) V))
//! (structure (sig-ref graphs) (carrier V a b) (rel E (a b) (b a)))
//! (morphism (map V (a x) (b y)))
//! (and (rel E x y) (not (= x:V y)))
//! ```
//!
//! The printers are canonical: printing a parsed canonical text gives the
//! same bytes back.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write};
use std::sync::Arc;

use crate::formula::QfFormula;
use crate::sexpr::{atom_text, parse_one, ParseError, Pos, Sexp};
use crate::signature::{Signature, SortId, SortKind};
use crate::structure::{Elem, Structure, StructureError};
use crate::term::{Term, Var};

pub fn write_signature(f: &mut impl Write, sig: &Signature) -> fmt::Result {
    write!(f, "(signature")?;
    for s in sig.sorts() {
        write!(f, "\n  (sort {} {})", atom_text(&s.name), s.kind.as_str())?;
    }
    let names = |args: &[SortId]| args.iter().map(|&a| atom_text(sig.sort_name(a))).collect::<Vec<_>>().join(" ");
    for r in sig.relations() {
        write!(f, "\n  (rel {} ({}))", atom_text(&r.name), names(&r.args))?;
    }
    for fun in sig.functions() {
        write!(f, "\n  (fun {} ({}) {})", atom_text(&fun.name), names(&fun.args), atom_text(sig.sort_name(fun.result)))?;
    }
    write!(f, ")")
}

pub fn signature_to_string(sig: &Signature) -> String {
    let mut s = String::new();
    write_signature(&mut s, sig).unwrap();
    s
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::new(pos, msg))
}

pub fn parse_signature(src: &str) -> Result<Signature, ParseError> {
    signature_from_sexp(&parse_one(src)?)
}

pub fn signature_from_sexp(form: &Sexp) -> Result<Signature, ParseError> {
    let mut sig = Signature::new();
    let items = form.form("signature")?;
    let sort_of = |sig: &Signature, x: &Sexp| -> Result<SortId, ParseError> {
        let n = x.expect_atom("a sort name")?;
        sig.sort(n).ok_or_else(|| ParseError::new(x.pos(), format!("unknown sort `{n}`")))
    };
    for item in items {
        let parts = item.expect_list("a sort, rel or fun declaration")?;
        let head = item.head().unwrap_or("");
        let pos = item.pos();
        let wrap = |e: crate::signature::SignatureError| ParseError::new(pos, e.to_string());
        match (head, parts.len()) {
            ("sort", 3) => {
                let name = parts[1].expect_atom("a sort name")?;
                let kind = parts[2].expect_atom("a sort kind")?;
                let kind = SortKind::parse(kind)
                    .ok_or_else(|| ParseError::new(parts[2].pos(), format!("unknown sort kind `{kind}`")))?;
                sig.add_sort(name, kind).map_err(wrap)?;
            }
            ("rel", 3) => {
                let name = parts[1].expect_atom("a relation name")?;
                let args = parts[2].expect_list("argument sorts")?.iter().map(|x| sort_of(&sig, x)).collect::<Result<Vec<_>, _>>()?;
                sig.add_relation(name, &args).map_err(wrap)?;
            }
            ("fun", 4) => {
                let name = parts[1].expect_atom("a function name")?;
                let args = parts[2].expect_list("argument sorts")?.iter().map(|x| sort_of(&sig, x)).collect::<Result<Vec<_>, _>>()?;
                let res = sort_of(&sig, &parts[3])?;
                sig.add_function(name, &args, res).map_err(wrap)?;
            }
            _ => return err(pos, "expected (sort NAME KIND), (rel NAME (SORTS)) or (fun NAME (SORTS) SORT)"),
        }
    }
    Ok(sig)
}

/// Canonical text of a structure, referring to its signature as `sig_ref`.
pub fn structure_to_string(s: &Structure, sig_ref: &str) -> String {
    let sig = s.signature();
    let mut out = format!("(structure\n  (sig-ref {})", atom_text(sig_ref));
    let tuple = |t: &[Elem]| t.iter().map(|&e| atom_text(s.name(e))).collect::<Vec<_>>().join(" ");
    for (i, sort) in sig.sorts().iter().enumerate() {
        write!(out, "\n  (carrier {}", atom_text(&sort.name)).unwrap();
        for &e in s.elements_of(i) {
            write!(out, " {}", atom_text(s.name(e))).unwrap();
        }
        out.push(')');
    }
    for (r, sym) in sig.relations().iter().enumerate() {
        if s.tuples(r).is_empty() {
            continue;
        }
        write!(out, "\n  (rel {}", atom_text(&sym.name)).unwrap();
        for t in s.tuples(r) {
            write!(out, " ({})", tuple(t)).unwrap();
        }
        out.push(')');
    }
    for (f, sym) in sig.functions().iter().enumerate() {
        if s.table(f).is_empty() {
            continue;
        }
        write!(out, "\n  (fun {}", atom_text(&sym.name)).unwrap();
        for (args, &v) in s.table(f) {
            write!(out, " (({}) {})", tuple(args), atom_text(s.name(v))).unwrap();
        }
        out.push(')');
    }
    for (f, sym) in sig.functions().iter().enumerate() {
        if s.is_open(f) {
            write!(out, "\n  (frontier {} *)", atom_text(&sym.name)).unwrap();
        } else if !s.explicit_frontier(f).is_empty() {
            write!(out, "\n  (frontier {}", atom_text(&sym.name)).unwrap();
            for t in s.explicit_frontier(f) {
                write!(out, " ({})", tuple(t)).unwrap();
            }
            out.push(')');
        }
    }
    out.push(')');
    out
}

/// Resolves `(sig-ref NAME)` to a signature.
pub type SigResolver<'a> = &'a dyn Fn(&str) -> Option<Arc<Signature>>;

pub fn parse_structure(src: &str, resolve: SigResolver) -> Result<Structure, ParseError> {
    structure_from_sexp(&parse_one(src)?, resolve)
}

/// Name given in the `sig-ref` form of a structure text, if any.
pub fn structure_sig_ref(src: &str) -> Result<Option<String>, ParseError> {
    let form = parse_one(src)?;
    for item in form.form("structure")? {
        if item.head() == Some("sig-ref") {
            let parts = item.expect_list("(sig-ref NAME)")?;
            if parts.len() == 2 {
                return Ok(Some(parts[1].expect_atom("a signature name")?.to_string()));
            }
        }
    }
    Ok(None)
}

pub fn structure_from_sexp(form: &Sexp, resolve: SigResolver) -> Result<Structure, ParseError> {
    let items = form.form("structure")?;
    let mut sig = None;
    for item in items {
        match item.head() {
            Some("sig-ref") => {
                let parts = item.expect_list("(sig-ref NAME)")?;
                if parts.len() != 2 {
                    return err(item.pos(), "expected (sig-ref NAME)");
                }
                let name = parts[1].expect_atom("a signature name")?;
                sig = Some(resolve(name).ok_or_else(|| ParseError::new(parts[1].pos(), format!("unknown signature `{name}`")))?);
            }
            Some("signature") => sig = Some(Arc::new(signature_from_sexp(item)?)),
            _ => {}
        }
    }
    let sig = sig.ok_or_else(|| ParseError::new(form.pos(), "structure needs (sig-ref NAME) or an inline (signature ...)"))?;
    let mut s = Structure::new(sig.clone());
    let mut fun_pos: HashMap<usize, Pos> = HashMap::new();
    let elem = |s: &Structure, sort: SortId, x: &Sexp| -> Result<Elem, ParseError> {
        let n = x.expect_atom("an element name")?;
        s.lookup(sort, n).ok_or_else(|| {
            ParseError::new(x.pos(), format!("unknown element `{n}` of sort `{}`", sig.sort_name(sort)))
        })
    };
    let tuple = |s: &Structure, sorts: &[SortId], x: &Sexp| -> Result<Vec<Elem>, ParseError> {
        let parts = x.expect_list("a tuple")?;
        if parts.len() != sorts.len() {
            return err(x.pos(), format!("expected a tuple of length {}, found {}", sorts.len(), parts.len()));
        }
        parts.iter().zip(sorts).map(|(p, &so)| elem(s, so, p)).collect()
    };
    let structural = |e: StructureError, pos: Pos| ParseError::new(pos, e.to_string());
    for item in items {
        if item.head() != Some("carrier") {
            continue;
        }
        let parts = item.expect_list("(carrier SORT ELEMS...)")?;
        let sname = parts.get(1).ok_or_else(|| ParseError::new(item.pos(), "carrier needs a sort"))?;
        let sn = sname.expect_atom("a sort name")?;
        let sort = sig.sort(sn).ok_or_else(|| ParseError::new(sname.pos(), format!("unknown sort `{sn}`")))?;
        for x in &parts[2..] {
            s.add_element(sort, x.expect_atom("an element name")?).map_err(|e| structural(e, x.pos()))?;
        }
    }
    for item in items {
        let Some(head) = item.head() else { return err(item.pos(), "expected a form") };
        let parts = item.expect_list("a form")?;
        match head {
            "sig-ref" | "signature" | "carrier" => {}
            "rel" | "fun" | "frontier" => {
                let sym = parts.get(1).ok_or_else(|| ParseError::new(item.pos(), format!("{head} needs a symbol")))?;
                let name = sym.expect_atom("a symbol name")?;
                if head == "rel" {
                    let r = sig.relation(name).ok_or_else(|| ParseError::new(sym.pos(), format!("unknown relation `{name}`")))?;
                    let sorts = sig.relations()[r].args.clone();
                    for t in &parts[2..] {
                        let tup = tuple(&s, &sorts, t)?;
                        s.add_tuple(r, tup).map_err(|e| structural(e, t.pos()))?;
                    }
                    continue;
                }
                let f = sig.function(name).ok_or_else(|| ParseError::new(sym.pos(), format!("unknown function `{name}`")))?;
                let sorts = sig.functions()[f].args.clone();
                let res = sig.functions()[f].result;
                if head == "fun" {
                    fun_pos.insert(f, item.pos());
                    for entry in &parts[2..] {
                        let pair = entry.expect_list("an entry ((ARGS) VALUE)")?;
                        if pair.len() != 2 {
                            return err(entry.pos(), "expected ((ARGS) VALUE)");
                        }
                        let args = tuple(&s, &sorts, &pair[0])?;
                        let v = elem(&s, res, &pair[1])?;
                        s.set_value(f, args, v).map_err(|e| structural(e, entry.pos()))?;
                    }
                } else if parts.len() == 3 && parts[2].atom() == Some("*") {
                    s.set_open(f, true);
                } else {
                    for t in &parts[2..] {
                        let tup = tuple(&s, &sorts, t)?;
                        s.mark_frontier(f, tup).map_err(|e| structural(e, t.pos()))?;
                    }
                }
            }
            other => return err(item.pos(), format!("unknown structure form `{other}`")),
        }
    }
    s.validate().map_err(|e| {
        let pos = match &e {
            StructureError::MissingEntry { symbol, .. } | StructureError::FrontierDefined { symbol, .. } => {
                sig.function(symbol).and_then(|f| fun_pos.get(&f).copied()).unwrap_or(form.pos())
            }
            _ => form.pos(),
        };
        ParseError::new(pos, e.to_string())
    })?;
    Ok(s)
}

pub fn morphism_to_string(map: &[Elem], src: &Structure, tgt: &Structure) -> String {
    let sig = src.signature();
    let mut out = String::from("(morphism");
    for (i, sort) in sig.sorts().iter().enumerate() {
        if src.elements_of(i).is_empty() {
            continue;
        }
        write!(out, "\n  (map {}", atom_text(&sort.name)).unwrap();
        for &e in src.elements_of(i) {
            write!(out, " ({} {})", atom_text(src.name(e)), atom_text(tgt.name(map[e as usize]))).unwrap();
        }
        out.push(')');
    }
    out.push(')');
    out
}

/// Reads a map table; every source element must be mapped exactly once.
pub fn parse_morphism(src_text: &str, src: &Structure, tgt: &Structure) -> Result<Vec<Elem>, ParseError> {
    morphism_from_sexp(&parse_one(src_text)?, src, tgt)
}

pub fn morphism_from_sexp(form: &Sexp, src: &Structure, tgt: &Structure) -> Result<Vec<Elem>, ParseError> {
    let sig = src.signature();
    let mut map: Vec<Option<Elem>> = vec![None; src.len()];
    for item in form.form("morphism")? {
        let parts = item.form("map")?;
        let sn = parts.first().ok_or_else(|| ParseError::new(item.pos(), "map needs a sort"))?;
        let name = sn.expect_atom("a sort name")?;
        let sort = sig.sort(name).ok_or_else(|| ParseError::new(sn.pos(), format!("unknown sort `{name}`")))?;
        for pair in &parts[1..] {
            let p = pair.expect_list("a pair (SOURCE TARGET)")?;
            if p.len() != 2 {
                return err(pair.pos(), "expected (SOURCE TARGET)");
            }
            let (a, b) = (p[0].expect_atom("an element")?, p[1].expect_atom("an element")?);
            let x = src.lookup(sort, a).ok_or_else(|| ParseError::new(p[0].pos(), format!("unknown source element `{a}`")))?;
            let y = tgt.lookup(sort, b).ok_or_else(|| ParseError::new(p[1].pos(), format!("unknown target element `{b}`")))?;
            if map[x as usize].replace(y).is_some() {
                return err(pair.pos(), format!("`{a}` is mapped twice"));
            }
        }
    }
    map.iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| ParseError::new(form.pos(), format!("`{}` is not mapped", src.name(i as Elem)))))
        .collect()
}

pub fn formula_to_string(f: &QfFormula, sig: &Signature) -> String {
    let mut out = String::new();
    write_formula(&mut out, f, sig);
    out
}

fn write_term(out: &mut String, t: &Term, sig: &Signature, annotate: bool) {
    match t {
        Term::Var(v) if annotate => write!(out, "{}:{}", v.name, sig.sort_name(v.sort)).unwrap(),
        Term::Var(v) => out.push_str(&v.name),
        Term::App(f, args) => {
            write!(out, "(fun {}", atom_text(&sig.functions()[*f].name)).unwrap();
            for a in args {
                out.push(' ');
                write_term(out, a, sig, false);
            }
            out.push(')');
        }
    }
}

fn write_formula(out: &mut String, f: &QfFormula, sig: &Signature) {
    match f {
        QfFormula::True => out.push_str("true"),
        QfFormula::False => out.push_str("false"),
        QfFormula::Eq(a, b) => {
            let both_vars = matches!((a, b), (Term::Var(_), Term::Var(_)));
            out.push_str("(= ");
            write_term(out, a, sig, both_vars);
            out.push(' ');
            write_term(out, b, sig, false);
            out.push(')');
        }
        QfFormula::Rel(r, ts) => {
            write!(out, "(rel {}", atom_text(&sig.relations()[*r].name)).unwrap();
            for t in ts {
                out.push(' ');
                write_term(out, t, sig, false);
            }
            out.push(')');
        }
        QfFormula::Not(g) => {
            out.push_str("(not ");
            write_formula(out, g, sig);
            out.push(')');
        }
        QfFormula::And(fs) | QfFormula::Or(fs) => {
            out.push_str(if matches!(f, QfFormula::And(_)) { "(and" } else { "(or" });
            for g in fs {
                out.push(' ');
                write_formula(out, g, sig);
            }
            out.push(')');
        }
    }
}

pub fn parse_formula(src: &str, sig: &Signature) -> Result<QfFormula, ParseError> {
    formula_from_sexp(&parse_one(src)?, sig)
}

/// Variables are bare atoms; their sorts are inferred from the positions they
/// occur in, and `x:S` fixes a sort explicitly.
pub fn formula_from_sexp(form: &Sexp, sig: &Signature) -> Result<QfFormula, ParseError> {
    let mut sorts: BTreeMap<String, (SortId, Pos)> = BTreeMap::new();
    // several passes let equalities propagate sorts between variables
    for _ in 0..8 {
        infer_formula(form, sig, &mut sorts)?;
    }
    build_formula(form, sig, &sorts)
}

/// A term such as `(fun plus x y)`, with sorts inferred as in formulas.
pub fn parse_term(src: &str, sig: &Signature) -> Result<Term, ParseError> {
    let form = parse_one(src)?;
    let mut sorts = BTreeMap::new();
    infer_term(&form, None, sig, &mut sorts)?;
    build_term(&form, sig, &sorts)
}

fn split_var(a: &str) -> (&str, Option<&str>) {
    match a.split_once(':') {
        Some((n, s)) if !n.is_empty() && !s.is_empty() => (n, Some(s)),
        _ => (a, None),
    }
}

fn note_var(x: &Sexp, expected: Option<SortId>, sig: &Signature, sorts: &mut BTreeMap<String, (SortId, Pos)>) -> Result<(), ParseError> {
    let Some(a) = x.atom() else { return Ok(()) };
    let (name, ann) = split_var(a);
    let ann = match ann {
        Some(sn) => Some(sig.sort(sn).ok_or_else(|| ParseError::new(x.pos(), format!("unknown sort `{sn}`")))?),
        None => None,
    };
    for s in [ann, expected].into_iter().flatten() {
        match sorts.get(name) {
            Some(&(old, _)) if old != s => {
                return err(x.pos(), format!("variable `{name}` used at sorts `{}` and `{}`", sig.sort_name(old), sig.sort_name(s)))
            }
            Some(_) => {}
            None => {
                sorts.insert(name.to_string(), (s, x.pos()));
            }
        }
    }
    Ok(())
}

fn term_sort(x: &Sexp, sig: &Signature, sorts: &BTreeMap<String, (SortId, Pos)>) -> Option<SortId> {
    match x {
        Sexp::Atom(a, _) => sorts.get(split_var(a).0).map(|p| p.0),
        Sexp::List(items, _) => items.get(1).and_then(Sexp::atom).and_then(|f| sig.function(f)).map(|f| sig.functions()[f].result),
    }
}

fn infer_term(x: &Sexp, expected: Option<SortId>, sig: &Signature, sorts: &mut BTreeMap<String, (SortId, Pos)>) -> Result<(), ParseError> {
    match x {
        Sexp::Atom(..) => note_var(x, expected, sig, sorts),
        Sexp::List(..) => {
            let parts = x.form("fun")?;
            let fname = parts.first().ok_or_else(|| ParseError::new(x.pos(), "fun needs a symbol"))?;
            let n = fname.expect_atom("a function name")?;
            let f = sig.function(n).ok_or_else(|| ParseError::new(fname.pos(), format!("unknown function `{n}`")))?;
            let sym = &sig.functions()[f];
            if sym.args.len() != parts.len() - 1 {
                return err(x.pos(), format!("`{n}` expects {} arguments, got {}", sym.args.len(), parts.len() - 1));
            }
            for (a, &s) in parts[1..].iter().zip(&sym.args) {
                infer_term(a, Some(s), sig, sorts)?;
            }
            Ok(())
        }
    }
}

fn infer_formula(x: &Sexp, sig: &Signature, sorts: &mut BTreeMap<String, (SortId, Pos)>) -> Result<(), ParseError> {
    match x {
        Sexp::Atom(a, p) => match a.as_str() {
            "true" | "false" => Ok(()),
            _ => err(*p, format!("expected a formula, found `{a}`")),
        },
        Sexp::List(items, p) => {
            let head = x.head().ok_or_else(|| ParseError::new(*p, "expected a formula"))?;
            match head {
                "and" | "or" => items[1..].iter().try_for_each(|g| infer_formula(g, sig, sorts)),
                "not" if items.len() == 2 => infer_formula(&items[1], sig, sorts),
                "=" if items.len() == 3 => {
                    let s = term_sort(&items[1], sig, sorts).or_else(|| term_sort(&items[2], sig, sorts));
                    infer_term(&items[1], s, sig, sorts)?;
                    infer_term(&items[2], s, sig, sorts)
                }
                "rel" if items.len() >= 2 => {
                    let n = items[1].expect_atom("a relation name")?;
                    let r = sig.relation(n).ok_or_else(|| ParseError::new(items[1].pos(), format!("unknown relation `{n}`")))?;
                    let sym = &sig.relations()[r];
                    if sym.args.len() != items.len() - 2 {
                        return err(*p, format!("`{n}` expects {} arguments, got {}", sym.args.len(), items.len() - 2));
                    }
                    for (t, &s) in items[2..].iter().zip(&sym.args) {
                        infer_term(t, Some(s), sig, sorts)?;
                    }
                    Ok(())
                }
                other => err(*p, format!("unknown formula form `{other}`")),
            }
        }
    }
}

fn build_term(x: &Sexp, sig: &Signature, sorts: &BTreeMap<String, (SortId, Pos)>) -> Result<Term, ParseError> {
    match x {
        Sexp::Atom(a, p) => {
            let name = split_var(a).0;
            let &(s, _) = sorts
                .get(name)
                .ok_or_else(|| ParseError::new(*p, format!("cannot infer the sort of `{name}`; write {name}:SORT")))?;
            Ok(Term::Var(Var::new(name, s)))
        }
        Sexp::List(items, _) => {
            let f = sig.function(items[1].atom().unwrap()).unwrap();
            let args = items[2..].iter().map(|a| build_term(a, sig, sorts)).collect::<Result<_, _>>()?;
            Ok(Term::App(f, args))
        }
    }
}

fn build_formula(x: &Sexp, sig: &Signature, sorts: &BTreeMap<String, (SortId, Pos)>) -> Result<QfFormula, ParseError> {
    match x {
        Sexp::Atom(a, _) => Ok(if a == "true" { QfFormula::True } else { QfFormula::False }),
        Sexp::List(items, p) => {
            let sub = |g: &Sexp| build_formula(g, sig, sorts);
            Ok(match x.head().unwrap() {
                "and" => QfFormula::And(items[1..].iter().map(sub).collect::<Result<_, _>>()?),
                "or" => QfFormula::Or(items[1..].iter().map(sub).collect::<Result<_, _>>()?),
                "not" => QfFormula::not(sub(&items[1])?),
                "=" => {
                    let (a, b) = (build_term(&items[1], sig, sorts)?, build_term(&items[2], sig, sorts)?);
                    if a.sort(sig) != b.sort(sig) {
                        return err(*p, "the two sides of `=` have different sorts");
                    }
                    QfFormula::Eq(a, b)
                }
                _ => {
                    let r = sig.relation(items[1].atom().unwrap()).unwrap();
                    QfFormula::Rel(r, items[2..].iter().map(|t| build_term(t, sig, sorts)).collect::<Result<_, _>>()?)
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAPH: &str = "(signature\n  (sort V object)\n  (rel E (V V)))";

    fn graphs() -> Arc<Signature> {
        Arc::new(parse_signature(GRAPH).unwrap())
    }

    fn resolve(name: &str) -> Option<Arc<Signature>> {
        (name == "graphs").then(graphs)
    }

    #[test]
    fn signature_round_trip() {
        assert_eq!(signature_to_string(&graphs()), GRAPH);
        let sig = "(signature\n  (sort V object)\n  (sort P parameter)\n  (rel E (P V V))\n  (fun plus (V V) V))";
        assert_eq!(signature_to_string(&parse_signature(sig).unwrap()), sig);
    }

    #[test]
    fn structure_round_trip() {
        let text = "(structure\n  (sig-ref graphs)\n  (carrier V a b c)\n  (rel E (a b) (b a)))";
        let s = parse_structure(text, &resolve).unwrap();
        assert_eq!(structure_to_string(&s, "graphs"), text);
    }

    #[test]
    fn unknown_element_is_named() {
        let e = parse_structure("(structure (sig-ref graphs) (carrier V a)\n (rel E (a zz)))", &resolve).unwrap_err();
        assert!(e.msg.contains("`zz`"), "{e}");
        assert_eq!(e.pos, Pos { line: 2, col: 12 });
    }

    #[test]
    fn missing_entry_is_reported() {
        let src = "(structure (signature (sort S object) (fun f (S) S)) (carrier S a b) (fun f ((a) b)))";
        let e = parse_structure(src, &resolve).unwrap_err();
        assert!(e.msg.contains("no entry"), "{e}");
        let ok = "(structure (signature (sort S object) (fun f (S) S)) (carrier S a b) (fun f ((a) b)) (frontier f (b)))";
        assert!(parse_structure(ok, &resolve).is_ok());
    }

    #[test]
    fn formula_sorts_are_inferred() {
        let sig = parse_signature("(signature (sort V object) (sort P parameter) (rel E (P V V)) (fun plus (P V V) V) (fun zero (P) V))").unwrap();
        let src = "(and (rel E p x y) (not (= (fun plus p x y) (fun zero p))))";
        let f = parse_formula(src, &sig).unwrap();
        assert_eq!(formula_to_string(&f, &sig), src);
        assert_eq!(f.free_vars().len(), 3);
        let g = parse_formula("(= x:V y)", &sig).unwrap();
        assert_eq!(formula_to_string(&g, &sig), "(= x:V y)");
        assert!(parse_formula("(= x y)", &sig).unwrap_err().msg.contains("cannot infer"));
    }
}
