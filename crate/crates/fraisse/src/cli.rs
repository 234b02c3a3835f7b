//! The `fraisse` command line. Every verb writes a text report to the given
//! stream and returns the process exit status: 0 pass, 1 failure (with a
//! counterexample block), 2 usage or parse error, 3 budget deficit.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::class::{
    check_feuvrier, free_amalgam, generic_element, verify_generic_element, verify_pushout, ClassError, ClassExpr, ClassHandle, ClassOps,
    Condition5, CubeInput,
};
use crate::formula::{check_forbidden, flatten_parameterized, parameter_vars_per_atom, FlattenOptions, ForbiddenVerdict};
use crate::independence::{
    a_indep, axiom_suite_with, gamma_indep, m_indep, search_theorem_witness, IndepError, IndepQuery, MVerdict, SuiteConfig, TheoremOutcome,
    FORKING_LABEL, KIM_LABEL,
};
use crate::limit::{
    acl_duplication_check, check_extension_property, ip_witness, saturate, tree_witness, ElemSet, LimitError, SaturationConfig,
    SeparatingFormula,
};
use crate::search::DEFAULT_BUDGET;
use crate::sexpr::{parse_all, ParseError, Sexp};
use crate::structure::{Elem, Structure};
use crate::term::Assignment;
use crate::text::{formula_from_sexp, formula_to_string, morphism_to_string, parse_formula, parse_morphism, parse_term, structure_from_sexp, structure_to_string};

pub const DEFAULT_SEED: u64 = 7;

pub const PASS: i32 = 0;
pub const FAIL: i32 = 1;
pub const USAGE: i32 = 2;
pub const DEFICIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fraisse", version, about = "Free amalgamation, generic limits and independence checks")]
pub struct Cli {
    /// Worker threads for suite, audit and saturation searches.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug, Clone)]
struct ClassArg {
    /// Class expression, e.g. `param(graphs, sets)`.
    #[arg(long)]
    class: String,
    /// Window for `genbij` expressions that do not give one.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Free amalgam of LEFT and RIGHT over BASE.
    Amalgamate {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Morphism file for BASE -> LEFT; inclusion by element names otherwise.
        #[arg(long)]
        left_map: Option<PathBuf>,
        #[arg(long)]
        right_map: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Report on the five amalgamation conditions over members of size at most BUDGET.
    CheckClass {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long, default_value_t = 4)]
        budget: usize,
    },
    /// Independence verdicts for a structure followed by `(query (A ..) (B ..) (C ..))` forms,
    /// or an independence-theorem cube as printed by `suite`.
    Indep {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Generator bound for intermediate bases; unbounded when absent.
        #[arg(long)]
        gen_bound: Option<usize>,
    },
    /// Axiom suite, exhaustive over members of size at most BUDGET plus seeded random cases.
    Suite {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long, default_value_t = 4)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        cases: usize,
        /// Component size for independence-theorem configurations.
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// Saturate a start structure by free amalgamation.
    Saturate {
        #[command(flatten)]
        class: ClassArg,
        /// Start structure; the constants structure otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        gen_bound: usize,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        cap: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Audit the extension property at the generator bound afterwards.
        #[arg(long)]
        check: bool,
    },
    /// Search for a witness configuration.
    Witness {
        #[arg(value_enum)]
        kind: WitnessKind,
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        input: PathBuf,
        /// acl: names generating A.
        #[arg(long, value_delimiter = ',')]
        base: Vec<String>,
        /// acl: the point to duplicate.
        #[arg(long)]
        point: Option<String>,
        /// generic: the sort of the new element.
        #[arg(long)]
        sort: Option<String>,
        /// ip: file with `(separating (parameter p) (object x) (fixed (b o0) ..) FORMULA)`.
        #[arg(long)]
        formula: Option<PathBuf>,
        /// tree: an object-language term in `x` and `y`.
        #[arg(long)]
        term: Option<String>,
        /// ip: number of parameters; tree: depth.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Split a literal conjunction over a parameterized signature.
    Flatten {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum WitnessKind {
    Generic,
    Acl,
    Ip,
    Tree,
}

/// Exit status plus report.
struct Outcome {
    code: i32,
    report: String,
}

impl Outcome {
    fn new(code: i32, report: String) -> Self {
        Outcome { code, report }
    }
}

fn usage(msg: impl std::fmt::Display) -> Outcome {
    Outcome::new(USAGE, format!("error: {msg}\n"))
}

fn class_error(e: ClassError) -> Outcome {
    match e {
        ClassError::Budget(_) => Outcome::new(DEFICIT, format!("deficit: {e}\n")),
        ClassError::Expression(_) => usage(e),
        other => Outcome::new(FAIL, format!("failure: {other}\n")),
    }
}

fn set_window(e: &mut ClassExpr, w: usize) {
    match e {
        ClassExpr::GenBij { base, window, .. } => {
            *window = w;
            set_window(base, w)
        }
        ClassExpr::Param(a, b) => {
            set_window(a, w);
            set_window(b, w)
        }
        ClassExpr::GenPred { base, .. } | ClassExpr::GenFun { base, .. } | ClassExpr::EqQuot { base, .. } | ClassExpr::GenSub(base) => {
            set_window(base, w)
        }
        _ => {}
    }
}

impl ClassArg {
    fn build(&self) -> Result<ClassHandle, Outcome> {
        let mut e = ClassExpr::parse(&self.class).map_err(usage)?;
        if let Some(w) = self.window {
            if !self.class.contains("window") {
                set_window(&mut e, w);
            }
        }
        e.build().map_err(class_error)
    }
}

fn read(path: &Path) -> Result<String, Outcome> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_error(path: &Path, e: ParseError) -> Outcome {
    usage(format!("{}:{e}", path.display()))
}

fn forms(path: &Path) -> Result<Vec<Sexp>, Outcome> {
    parse_all(&read(path)?).map_err(|e| parse_error(path, e))
}

fn structure_of(form: &Sexp, class: &dyn ClassOps, path: &Path) -> Result<Structure, Outcome> {
    let sig = class.signature().clone();
    structure_from_sexp(form, &|_| Some(sig.clone())).map_err(|e| parse_error(path, e))
}

/// A structure file checked for class membership.
fn load_member(path: &Path, class: &dyn ClassOps) -> Result<Structure, Outcome> {
    let all = forms(path)?;
    let first = all.first().ok_or_else(|| usage(format!("{}: no structure", path.display())))?;
    let s = structure_of(first, class, path)?;
    class.check_member(&s).map_err(|e| Outcome::new(FAIL, format!("{}: not a member of {}: {e}\n", path.display(), class.name())))?;
    Ok(s)
}

/// A structure file; partial ones are replaced by their completion, which must not identify elements.
fn load_draft(path: &Path, class: &dyn ClassOps) -> Result<Structure, Outcome> {
    let all = forms(path)?;
    let first = all.first().ok_or_else(|| usage(format!("{}: no structure", path.display())))?;
    let s = structure_of(first, class, path)?;
    if s.is_total() {
        class.check_member(&s).map_err(|e| Outcome::new(FAIL, format!("{}: not a member of {}: {e}\n", path.display(), class.name())))?;
        return Ok(s);
    }
    let c = class.complete(&s).map_err(class_error)?;
    let image: std::collections::BTreeSet<Elem> = c.map.iter().copied().collect();
    if image.len() != s.len() {
        return Err(Outcome::new(FAIL, format!("{}: the completion identifies elements\n", path.display())));
    }
    Ok(c.structure)
}

fn names_to_set(s: &Structure, names: &[String]) -> Result<ElemSet, Outcome> {
    names
        .iter()
        .map(|n| n.trim())
        .filter(|n| !n.is_empty())
        .map(|n| s.lookup_any(n).ok_or_else(|| usage(format!("unknown element `{n}`"))))
        .collect()
}

/// Parses the arguments and runs the verb, writing its report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return if e.use_stderr() { USAGE } else { PASS };
        }
    };
    let go = || match cli.verb {
        Verb::Amalgamate { ref class, ref base, ref left, ref right, ref left_map, ref right_map, budget } => {
            amalgamate(class, base, left, right, left_map.as_deref(), right_map.as_deref(), budget)
        }
        Verb::CheckClass { ref class, budget } => check_class(class, budget),
        Verb::Indep { ref class, ref input, budget, gen_bound } => indep(class, input, budget, gen_bound),
        Verb::Suite { ref class, budget, seed, cases, depth } => suite(class, budget, seed, cases, depth),
        Verb::Saturate { ref class, ref input, gen_bound, rounds, seed, cap, budget, check } => {
            saturate_verb(class, input.as_deref(), gen_bound, rounds, seed, cap, budget, check)
        }
        Verb::Witness { kind, ref class, ref input, ref base, ref point, ref sort, ref formula, ref term, depth, branching, rounds, budget } => {
            let w = WitnessArgs { base, point: point.as_deref(), sort: sort.as_deref(), formula: formula.as_deref(), term: term.as_deref(), depth, branching, rounds, budget };
            witness(kind, class, input, &w)
        }
        Verb::Flatten { ref class, ref input } => flatten(class, input),
    };
    let result = match cli.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(go),
            Err(e) => Err(usage(e)),
        },
        None => go(),
    };
    let o = result.unwrap_or_else(|o| o);
    let _ = out.write_all(o.report.as_bytes());
    o.code
}

type Run = Result<Outcome, Outcome>;

fn amalgamate(class: &ClassArg, base: &Path, left: &Path, right: &Path, left_map: Option<&Path>, right_map: Option<&Path>, budget: u64) -> Run {
    let class = class.build()?;
    let e = load_member(base, class.as_ref())?;
    let a = load_member(left, class.as_ref())?;
    let b = load_member(right, class.as_ref())?;
    let map = |path: Option<&Path>, tgt: &Structure, label: &str| -> Result<Vec<Elem>, Outcome> {
        match path {
            Some(p) => parse_morphism(&read(p)?, &e, tgt).map_err(|err| parse_error(p, err)),
            None => e.inclusion_by_names(tgt).ok_or_else(|| usage(format!("base elements are missing from {label}; pass a map file"))),
        }
    };
    let ja = map(left_map, &a, "LEFT")?;
    let jb = map(right_map, &b, "RIGHT")?;
    let am = free_amalgam(class.as_ref(), &e, &a, &b, &ja, &jb).map_err(class_error)?;
    let targets = class.members(2);
    let mut report = structure_to_string(&am.amalgam, &class.name());
    report.push('\n');
    writeln!(report, "; LEFT into the amalgam\n{}", morphism_to_string(&am.into_a.map, &a, &am.amalgam)).unwrap();
    writeln!(report, "; RIGHT into the amalgam\n{}", morphism_to_string(&am.into_b.map, &b, &am.amalgam)).unwrap();
    let check = verify_pushout(&e, &a, &b, &ja, &jb, &am, &targets, budget).map_err(|b| class_error(b.into()))?;
    writeln!(report, "; factoring checked against {} targets and {} pairs", check.targets, check.pairs).unwrap();
    if !check.passed() {
        for v in &check.violations {
            writeln!(report, "; violation: {v}").unwrap();
        }
        return Ok(Outcome::new(FAIL, report));
    }
    Ok(Outcome::new(PASS, report))
}

fn check_class(class: &ClassArg, size: usize) -> Run {
    let class = class.build()?;
    let name = class.name();
    let mut report = format!("(class-report (class {})\n", crate::sexpr::atom_text(&name));
    let mut code = PASS;
    let mut counterexamples = String::new();
    let mut deficit = false;

    let members = class.members(size);
    let forbidden = class.forbidden();
    let mut universal_bad = 0;
    for m in &members {
        match check_forbidden(m, &forbidden, DEFAULT_BUDGET) {
            Ok(ForbiddenVerdict::Clean) => {}
            Ok(ForbiddenVerdict::Witness { formula, .. }) => {
                universal_bad += 1;
                if counterexamples.is_empty() {
                    writeln!(counterexamples, "; member violating forbidden formula #{formula}\n{}", structure_to_string(m, &name)).unwrap();
                }
            }
            Err(_) => deficit = true,
        }
    }
    writeln!(
        report,
        "  (universal (members {}) (forbidden {}) (violations {universal_bad}) (locally-finite {}))",
        members.len(),
        forbidden.len(),
        class.locally_finite()
    )
    .unwrap();
    writeln!(report, "  (quantifier-elimination (status unchecked))").unwrap();

    let small = class.members(size.min(2));
    let targets = class.members(size.min(3));
    let (mut configs, mut pushout_bad) = (0, 0);
    'amalgams: for e in small.iter().take(6) {
        let exts = class.one_point_extensions(e);
        for (i, x) in exts.iter().enumerate().take(4) {
            for y in exts.iter().skip(i).take(4) {
                configs += 1;
                let am = free_amalgam(class.as_ref(), e, &x.structure, &y.structure, &x.embed, &y.embed).map_err(class_error)?;
                match verify_pushout(e, &x.structure, &y.structure, &x.embed, &y.embed, &am, &targets, DEFAULT_BUDGET) {
                    Ok(r) if r.passed() => {}
                    Ok(r) => {
                        pushout_bad += 1;
                        if counterexamples.is_empty() {
                            writeln!(counterexamples, "; amalgam without the factoring property: {}\n{}", r.violations[0], structure_to_string(&am.amalgam, &name)).unwrap();
                        }
                    }
                    Err(_) => {
                        deficit = true;
                        break 'amalgams;
                    }
                }
            }
        }
    }
    writeln!(report, "  (free-amalgamation (configurations {configs}) (targets {}) (violations {pushout_bad}))", targets.len()).unwrap();

    let (mut generic_checked, mut generic_bad) = (0, 0);
    for sort in 0..class.signature().sorts().len() {
        for a in small.iter().take(4) {
            generic_checked += 1;
            let ext = generic_element(class.as_ref(), sort, a).map_err(class_error)?;
            match verify_generic_element(a, &ext, &targets, DEFAULT_BUDGET) {
                Ok(bad) if bad.is_empty() => {}
                Ok(bad) => {
                    generic_bad += 1;
                    if counterexamples.is_empty() {
                        writeln!(counterexamples, "; generic element fails to map: {}\n{}", bad[0], structure_to_string(a, &name)).unwrap();
                    }
                }
                Err(_) => deficit = true,
            }
        }
    }
    writeln!(report, "  (generic-element (checked {generic_checked}) (violations {generic_bad}))").unwrap();

    let fv = check_feuvrier(class.as_ref(), size, DEFAULT_BUDGET);
    deficit |= fv.exhausted;
    let (declared, refuted) = match class.condition5() {
        Condition5::Trusted(_) => ("trusted", false),
        Condition5::Unverified => ("unverified", fv.failures > 0),
        Condition5::Refuted(why) => {
            writeln!(counterexamples, "; three-amalgamation refuted: {why}").unwrap();
            ("refuted", true)
        }
    };
    let coincide = if fv.failures == 0 { "yes" } else { "no" };
    writeln!(
        report,
        "  (three-amalgamation (declared {declared}) (free-equals-algebraic {coincide}) (configurations {}) (mismatches {}) (exhausted {})))",
        fv.configurations, fv.failures, fv.exhausted
    )
    .unwrap();
    if let Some(f) = &fv.first_failure {
        let tag = if refuted { "" } else { " (informational)" };
        writeln!(counterexamples, "; free and algebraic independence differ{tag}\n{f}").unwrap();
    }
    if universal_bad + pushout_bad + generic_bad > 0 || refuted {
        code = FAIL;
    } else if deficit {
        code = DEFICIT;
    }
    report.push_str(&counterexamples);
    Ok(Outcome::new(code, report))
}

fn verdict_line(independent: bool) -> &'static str {
    if independent {
        "independent"
    } else {
        "dependent"
    }
}

fn indep_error(e: IndepError) -> Outcome {
    match e {
        e if e.is_budget() => Outcome::new(DEFICIT, format!("deficit: {e}\n")),
        IndepError::UnknownName(_) | IndepError::Foreign(_) => usage(e),
        other => Outcome::new(FAIL, format!("failure: {other}\n")),
    }
}

fn indep(class: &ClassArg, input: &Path, budget: u64, gen_bound: Option<usize>) -> Run {
    let class = class.build()?;
    let all = forms(input)?;
    if all.iter().filter(|f| f.head() == Some("structure")).count() == 6 {
        return cube(class.as_ref(), &all, input);
    }
    let Some(first) = all.first() else { return Err(usage(format!("{}: empty input", input.display()))) };
    let d = structure_of(first, class.as_ref(), input)?;
    class.check_member(&d).map_err(|e| Outcome::new(FAIL, format!("not a member of {}: {e}\n", class.name())))?;
    let mut report = String::new();
    let mut code = PASS;
    for form in &all[1..] {
        let parts = form.form("query").map_err(|e| parse_error(input, e))?;
        let mut sets: [Vec<String>; 3] = Default::default();
        for p in parts {
            let items = p.expect_list("(A names..)").map_err(|e| parse_error(input, e))?;
            let slot = match p.head() {
                Some("A") => 0,
                Some("B") => 1,
                Some("C") => 2,
                _ => return Err(parse_error(input, ParseError::new(p.pos(), "expected (A ..), (B ..) or (C ..)"))),
            };
            for it in &items[1..] {
                sets[slot].push(it.expect_atom("an element name").map_err(|e| parse_error(input, e))?.to_string());
            }
        }
        let [a_names, b_names, c_names] = sets.each_ref().map(|v| v.iter().map(String::as_str).collect::<Vec<_>>());
        let q = IndepQuery::by_names(&d, &a_names, &b_names, &c_names).map_err(indep_error)?;
        let swapped = IndepQuery::by_names(&d, &b_names, &a_names, &c_names).map_err(indep_error)?;
        let a = a_indep(&q);
        let g = gamma_indep(class.as_ref(), &q, budget).map_err(indep_error)?;
        let gs = gamma_indep(class.as_ref(), &swapped, budget).map_err(indep_error)?;
        let m = m_indep(&q, gen_bound).map_err(indep_error)?;
        writeln!(report, "{}", q.to_text()).unwrap();
        let wa = a.witness.map(|x| format!(" (shared {})", d.name(x))).unwrap_or_default();
        writeln!(report, "  algebraic: {}{wa}", verdict_line(a.independent)).unwrap();
        let wg = g.witness.as_ref().map(|w| format!(" ({w})")).unwrap_or_default();
        writeln!(report, "  free: {}{wg}", verdict_line(g.independent)).unwrap();
        writeln!(report, "  free, A and B swapped: {}", verdict_line(gs.independent)).unwrap();
        let ml = match &m {
            MVerdict::Independent => "independent".to_string(),
            MVerdict::UpToBound(n) => format!("independent over bases with at most {n} generators"),
            MVerdict::Dependent { base, witness } => {
                let names: Vec<&str> = base.iter().map(|&x| d.name(x)).collect();
                format!("dependent (over ({}), shared {})", names.join(" "), d.name(*witness))
            }
        };
        writeln!(report, "  M-independence: {ml}").unwrap();
        writeln!(report, "  {FORKING_LABEL}: {}", verdict_line(m.holds())).unwrap();
        writeln!(report, "  {KIM_LABEL}: {}", verdict_line(a.independent)).unwrap();
        let mut fail = |why: &str| {
            writeln!(report, "  ; failure: {why}").unwrap();
            code = FAIL;
        };
        if g.independent != gs.independent {
            fail("symmetry: swapping A and B changes the free verdict");
        }
        if g.independent && !a.independent {
            fail("implies-algebraic: free but not algebraically independent");
        }
        if q.b == q.c && !g.independent {
            fail("existence: A is not free from its own base");
        }
        if m.holds() && !a.independent {
            fail("M-independence without algebraic independence");
        }
    }
    if all.len() == 1 {
        return Err(usage(format!("{}: no (query ...) forms after the structure", input.display())));
    }
    Ok(Outcome::new(code, report))
}

/// Six structures `A B0 B1 D0 D1 B` then six morphisms
/// `A->D0 A->D1 B0->D0 B0->B B1->D1 B1->B`.
fn cube(class: &dyn ClassOps, all: &[Sexp], input: &Path) -> Run {
    let structures: Vec<Structure> = all.iter().filter(|f| f.head() == Some("structure")).map(|f| structure_of(f, class, input)).collect::<Result<_, _>>()?;
    let maps: Vec<&Sexp> = all.iter().filter(|f| f.head() == Some("morphism")).collect();
    if maps.len() != 6 {
        return Err(usage(format!("{}: a cube needs six morphisms, found {}", input.display(), maps.len())));
    }
    let [a, b0, b1, d0, d1, b] = <[Structure; 6]>::try_from(structures).unwrap();
    let pairs = [(&a, &d0), (&a, &d1), (&b0, &d0), (&b0, &b), (&b1, &d1), (&b1, &b)];
    let mut ms = Vec::new();
    for (form, (s, t)) in maps.iter().zip(pairs) {
        ms.push(crate::text::morphism_from_sexp(form, s, t).map_err(|e| parse_error(input, e))?);
    }
    let [a_in_d0, a_in_d1, b0_in_d0, b0_in_b, b1_in_d1, b1_in_b] = <[Vec<Elem>; 6]>::try_from(ms).unwrap();
    let cube = CubeInput { a, b0, b1, d0, d1, b, a_in_d0, a_in_d1, b0_in_d0, b0_in_b, b1_in_d1, b1_in_b };
    match search_theorem_witness(class, &cube).map_err(indep_error)? {
        TheoremOutcome::Witness(w) => {
            let mut report = format!("; independence-theorem: witness found\n{}\n", structure_to_string(&w.cube.d, &class.name()));
            writeln!(report, "; A into the witness\n{}", morphism_to_string(&w.a_in_d, &cube.a, &w.cube.d)).unwrap();
            Ok(Outcome::new(PASS, report))
        }
        TheoremOutcome::NoWitness(why) => Ok(Outcome::new(FAIL, format!("; independence-theorem: no witness: {why}\n"))),
    }
}

fn suite(class: &ClassArg, size: usize, seed: u64, cases: usize, component: usize) -> Run {
    let class = class.build()?;
    let mut cfg = SuiteConfig::new(size, seed);
    cfg.random_cases = cases;
    cfg.theorem_component = component;
    let r = axiom_suite_with(class.as_ref(), &cfg);
    let code = if !r.passed() {
        FAIL
    } else if r.over_budget() {
        DEFICIT
    } else {
        PASS
    };
    Ok(Outcome::new(code, r.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn saturate_verb(class: &ClassArg, input: Option<&Path>, n: usize, rounds: usize, seed: u64, cap: usize, budget: u64, check: bool) -> Run {
    let class = class.build()?;
    let start = match input {
        Some(p) => load_draft(p, class.as_ref())?,
        None => class.constants_structure(),
    };
    let mut cfg = SaturationConfig::new(class.clone(), n, rounds, seed);
    cfg.carrier_cap = cap;
    cfg.budget = budget;
    let sat = saturate(&cfg, &start).map_err(limit_error)?;
    let mut report = sat.to_text();
    let mut code = if sat.deficit.is_some() { DEFICIT } else { PASS };
    if check {
        let audit = check_extension_property(&sat.structure, class.as_ref(), n, budget);
        for line in audit.to_string().lines() {
            writeln!(report, "; {line}").unwrap();
        }
        if !audit.failures.is_empty() {
            code = FAIL;
        } else if audit.over_budget > 0 {
            code = DEFICIT;
        }
    }
    Ok(Outcome::new(code, report))
}

fn limit_error(e: LimitError) -> Outcome {
    match e {
        LimitError::Deficit(_) | LimitError::Class(ClassError::Budget(_)) => Outcome::new(DEFICIT, format!("deficit: {e}\n")),
        LimitError::Config(_) => usage(e),
        other => Outcome::new(FAIL, format!("refused: {other}\n")),
    }
}

struct WitnessArgs<'a> {
    base: &'a [String],
    point: Option<&'a str>,
    sort: Option<&'a str>,
    formula: Option<&'a Path>,
    term: Option<&'a str>,
    depth: usize,
    branching: usize,
    rounds: usize,
    budget: u64,
}

fn witness(kind: WitnessKind, class: &ClassArg, input: &Path, w: &WitnessArgs) -> Run {
    let class = class.build()?;
    let m = load_member(input, class.as_ref())?;
    let name = class.name();
    match kind {
        WitnessKind::Generic => {
            let sn = w.sort.ok_or_else(|| usage("generic needs --sort"))?;
            let sort = class.signature().sort(sn).ok_or_else(|| usage(format!("unknown sort `{sn}`")))?;
            let ext = generic_element(class.as_ref(), sort, &m).map_err(class_error)?;
            let mut report = format!("; generic element {}\n{}\n", ext.structure.name(ext.point), structure_to_string(&ext.structure, &name));
            writeln!(report, "{}", morphism_to_string(&ext.embed, &m, &ext.structure)).unwrap();
            Ok(Outcome::new(PASS, report))
        }
        WitnessKind::Acl => {
            let base = names_to_set(&m, w.base)?;
            let pn = w.point.ok_or_else(|| usage("acl needs --point"))?;
            let a = m.lookup_any(pn).ok_or_else(|| usage(format!("unknown element `{pn}`")))?;
            let dup = acl_duplication_check(class.as_ref(), &m, &base, a, w.rounds, w.budget).map_err(limit_error)?;
            let names: Vec<&str> = dup.realizations.iter().map(|&x| dup.structure.name(x)).collect();
            let mut report = format!("; {} realizations after {} rounds: {}\n", names.len(), w.rounds, names.join(" "));
            report.push_str(&structure_to_string(&dup.structure, &name));
            report.push('\n');
            let code = if dup.realizations.len() > w.rounds { PASS } else { FAIL };
            Ok(Outcome::new(code, report))
        }
        WitnessKind::Ip => {
            let path = w.formula.ok_or_else(|| usage("ip needs --formula"))?;
            let psi = separating(path, &m, class.as_ref())?;
            let ip = ip_witness(&m, class.as_ref(), &psi, w.depth, w.budget).map_err(limit_error)?;
            let ps: Vec<&str> = ip.params.iter().map(|&x| m.name(x)).collect();
            let mut report = format!("; {} patterns, {} evaluations verified\n(ip-witness (parameters {})", ip.objects.len(), ip.evaluations, ps.join(" "));
            for (mask, &o) in ip.objects.iter().enumerate() {
                let bits: String = (0..w.depth).map(|i| if mask >> i & 1 == 1 { '1' } else { '0' }).collect();
                write!(report, "\n  (pattern {bits} {})", m.name(o)).unwrap();
            }
            report.push_str(")\n");
            Ok(Outcome::new(PASS, report))
        }
        WitnessKind::Tree => {
            let pc = class.parameterized().ok_or_else(|| usage(format!("{name} has no parameter sort")))?;
            let src = w.term.ok_or_else(|| usage("tree needs --term"))?;
            let t = parse_term(src, pc.object_class().signature()).map_err(|e| usage(format!("--term: {e}")))?;
            let tw = tree_witness(&m, class.as_ref(), &t, w.depth, w.branching, w.budget).map_err(limit_error)?;
            let s = &tw.structure;
            let mut report = format!("; tree of depth {} and branching {} verified, {} amalgams\n(tree-witness", tw.depth, tw.branching, tw.amalgams);
            let label = |n: &[usize]| n.iter().map(|i| i.to_string()).collect::<String>();
            for (node, &p) in &tw.params {
                write!(report, "\n  (node ({}) (parameter {})", label(node), s.name(p)).unwrap();
                if let Some(&v) = tw.values.get(node) {
                    write!(report, " (value {})", s.name(v)).unwrap();
                }
                report.push(')');
            }
            for (leaf, &(x, y)) in &tw.paths {
                write!(report, "\n  (leaf ({}) (value {}) (x {}) (y {}))", label(leaf), tw.values.get(leaf).map_or("-", |&v| s.name(v)), s.name(x), s.name(y)).unwrap();
            }
            report.push_str(")\n");
            if tw.amalgams > 0 {
                writeln!(report, "{}", structure_to_string(s, &name)).unwrap();
            }
            Ok(Outcome::new(PASS, report))
        }
    }
}

fn separating(path: &Path, m: &Structure, class: &dyn ClassOps) -> Result<SeparatingFormula, Outcome> {
    let all = forms(path)?;
    let form = all.first().ok_or_else(|| usage(format!("{}: empty", path.display())))?;
    let parts = form.form("separating").map_err(|e| parse_error(path, e))?;
    let (mut parameter, mut object, mut fixed, mut formula) = (None, None, Assignment::new(), None);
    for p in parts {
        let atoms = |p: &Sexp| -> Result<Vec<String>, Outcome> {
            let items = p.expect_list("a list").map_err(|e| parse_error(path, e))?;
            items[1..].iter().map(|i| i.expect_atom("a name").map(str::to_string).map_err(|e| parse_error(path, e))).collect()
        };
        match p.head() {
            Some("parameter") => parameter = atoms(p)?.into_iter().next(),
            Some("object") => object = atoms(p)?.into_iter().next(),
            Some("fixed") => {
                for pair in &p.expect_list("(fixed (VAR ELEMENT) ..)").map_err(|e| parse_error(path, e))?[1..] {
                    let bad = || parse_error(path, ParseError::new(pair.pos(), "expected (VAR ELEMENT)"));
                    let (k, v) = match pair.list() {
                        Some([Sexp::Atom(k, _), Sexp::Atom(v, _)]) => (k.clone(), v.clone()),
                        _ => return Err(bad()),
                    };
                    let e = m.lookup_any(&v).ok_or_else(|| usage(format!("unknown element `{v}`")))?;
                    fixed.insert(k, e);
                }
            }
            _ => formula = Some(formula_from_sexp(p, class.signature()).map_err(|e| parse_error(path, e))?),
        }
    }
    let missing = |what: &str| usage(format!("{}: missing {what}", path.display()));
    Ok(SeparatingFormula {
        formula: formula.ok_or_else(|| missing("the formula"))?,
        parameter: parameter.ok_or_else(|| missing("(parameter VAR)"))?,
        object: object.ok_or_else(|| missing("(object VAR)"))?,
        fixed,
    })
}

fn flatten(class: &ClassArg, input: &Path) -> Run {
    let class = class.build()?;
    let sig = class.signature();
    let f = parse_formula(&read(input)?, sig).map_err(|e| parse_error(input, e))?;
    let fl = flatten_parameterized(&f, sig, &FlattenOptions::default()).map_err(|e| Outcome::new(FAIL, format!("refused: {e}\n")))?;
    let mut report = String::new();
    for (v, t) in &fl.introduced {
        let shown = formula_to_string(&crate::formula::QfFormula::Eq(crate::term::Term::Var(v.clone()), t.clone()), sig);
        writeln!(report, "; {} names {shown}", v.name).unwrap();
    }
    writeln!(report, "(flattened\n  (parameters {})", formula_to_string(&fl.parameter_part, sig)).unwrap();
    for (k, part) in &fl.per_parameter {
        match k {
            Some(p) => writeln!(report, "  (over {} {})", p.name, formula_to_string(part, sig)).unwrap(),
            None => writeln!(report, "  (unindexed {})", formula_to_string(part, sig)).unwrap(),
        }
    }
    report.push_str(")\n");
    let out = fl.conjunction();
    let multi = parameter_vars_per_atom(&out, sig).iter().filter(|s| s.len() > 1).count();
    if multi > 0 {
        writeln!(report, "; {multi} object atoms still mention several parameter variables").unwrap();
        return Ok(Outcome::new(FAIL, report));
    }
    Ok(Outcome::new(PASS, report))
}

/// Entry point for the binary.
pub fn main_with_args() -> i32 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let code = run(std::env::args_os(), &mut lock);
    let _ = lock.flush();
    code
}
