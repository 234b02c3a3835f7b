//! Acceptance run: one PASS/FAIL line per criterion. Criteria listed in
//! `KNOWN_GAPS` are reported as FAIL but do not fail the run; any other
//! failure does.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fraisse::class::*;
use fraisse::formula::{evaluate, flatten_parameterized, for_each_assignment, FlattenOptions, QfFormula, Truth};
use fraisse::independence::{a_indep, axiom_suite_with, m_indep, search_theorem_witness, theorem_configurations, IndepQuery, MVerdict, SuiteConfig, TheoremOutcome};
use fraisse::limit::*;
use fraisse::independence::ElemSet;
use fraisse::search::{find_embeddings, is_isomorphic_over, seed_from_pairs, DEFAULT_BUDGET};
use fraisse::signature::Signature;
use fraisse::structure::{Elem, Structure};
use fraisse::term::{evaluate_term, Assignment, Term, Var};
use fraisse::text::{parse_structure, structure_to_string};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SEED: u64 = 7;
const PUSHOUT_TIME_LIMIT: Duration = Duration::from_secs(120);
const IP_TIME_LIMIT: Duration = Duration::from_secs(60);
const RANDOM_SUITE_CASES: usize = 500;
const ENUMERATIONS: usize = 10;
const FLATTEN_FORMULAS: usize = 200;
const RANDOM_AMBIENTS: usize = 40;
const QUERIES_PER_AMBIENT: usize = 150;

/// Criteria that cannot be met by the construction as designed; see the
/// decisions ledger kept next to the repository.
const KNOWN_GAPS: &[u32] = &[4, 7];

struct Verdict {
    pass: bool,
    detail: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { pass: true, detail: vec![] }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.detail.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn class(expr: &str) -> ClassHandle {
    parse_class(expr).unwrap_or_else(|e| panic!("{expr}: {e}"))
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "pushout universal property", pushouts),
        (2, "axiom suite", suites),
        (3, "independence theorem witnesses", theorem),
        (4, "algebraically independent 3-amalgamation", condition5),
        (5, "abelian pushouts against cokernels", abelian),
        (6, "duplication of non-generated elements", duplication),
        (7, "saturation at level 3", saturation),
        (8, "parameter enumeration invariance", enumerations),
        (9, "independence property witness", ip),
        (10, "tree property witness", tree),
        (11, "formula flattening", flattening),
        (12, "M-independence against all intermediates", m_oracle),
    ];
    // numeric arguments select criteria; cargo's own flags are ignored
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = vec![];
    for (n, name, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let v = run();
        println!("criterion {n:>2}: {} {name} ({:.1?})", if v.pass { "PASS" } else { "FAIL" }, t.elapsed());
        for line in &v.detail {
            println!("    {line}");
        }
        if !v.pass && !KNOWN_GAPS.contains(&n) {
            unexpected.push(n);
        }
        if v.pass && KNOWN_GAPS.contains(&n) {
            println!("    note: listed as a known gap but passed");
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no failures outside the known gaps {KNOWN_GAPS:?}");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}

// 1

fn pushout_sweep(k: &dyn ClassOps, max: usize, target_max: usize) -> (usize, usize, usize, Option<String>) {
    let members = k.members(max);
    let targets = k.members(target_max);
    let mut configs = vec![];
    for e in &members {
        for a in &members {
            for b in &members {
                let jas = find_embeddings(e, a, &[], DEFAULT_BUDGET).unwrap();
                let jbs = find_embeddings(e, b, &[], DEFAULT_BUDGET).unwrap();
                for ja in &jas {
                    for jb in &jbs {
                        configs.push((e, a, b, ja.map.clone(), jb.map.clone()));
                    }
                }
            }
        }
    }
    let results: Vec<Result<usize, String>> = configs
        .par_iter()
        .map(|(e, a, b, ja, jb)| {
            let am = free_amalgam(k, e, a, b, ja, jb).map_err(|err| err.to_string())?;
            let r = verify_pushout(e, a, b, ja, jb, &am, &targets, DEFAULT_BUDGET).map_err(|_| "budget".to_string())?;
            if r.passed() {
                Ok(r.pairs)
            } else {
                Err(r.violations.join("; "))
            }
        })
        .collect();
    let pairs = results.iter().filter_map(|r| r.as_ref().ok()).sum();
    let bad = results.iter().filter(|r| r.is_err()).count();
    let first = results.into_iter().find_map(Result::err);
    (configs.len(), pairs, bad, first)
}

fn pushouts() -> Verdict {
    let mut v = Verdict::new();
    let t = Instant::now();
    for (name, max, target_max) in [("sets", 3, 4), ("graphs", 3, 4), ("vec(2)", 4, 4)] {
        let (configs, pairs, bad, first) = pushout_sweep(class(name).as_ref(), max, target_max);
        v.check(bad == 0, format!("{name}: {configs} configurations, {pairs} map pairs, {bad} violations {}", first.unwrap_or_default()));
    }
    v.check(t.elapsed() < PUSHOUT_TIME_LIMIT, format!("total time {:.1?} (limit {PUSHOUT_TIME_LIMIT:?})", t.elapsed()));
    v
}

// 2

fn suites() -> Verdict {
    let mut v = Verdict::new();
    for (name, max) in [("graphs", 5), ("vec(2)", 8)] {
        let mut cfg = SuiteConfig::new(max, SEED);
        cfg.random_cases = RANDOM_SUITE_CASES;
        let r = axiom_suite_with(class(name).as_ref(), &cfg);
        let ok = r.passed() && !r.over_budget() && r.random_cases >= RANDOM_SUITE_CASES;
        v.check(ok, format!("{name}: {} ambients, {} random cases, {}", r.ambients, r.random_cases, r.summary().trim()));
        if !ok {
            v.detail.push(r.to_string());
        }
    }
    v
}

// 3

fn theorem() -> Verdict {
    let mut v = Verdict::new();
    for name in ["graphs", "vec(2)", "eqrel-raw"] {
        let k = class(name);
        let cubes = theorem_configurations(k.as_ref(), 2, DEFAULT_BUDGET).unwrap();
        let outcomes: Vec<bool> = cubes
            .par_iter()
            .map(|c| matches!(search_theorem_witness(k.as_ref(), c).unwrap(), TheoremOutcome::Witness(_)))
            .collect();
        let missing = outcomes.iter().filter(|w| !**w).count();
        if name == "eqrel-raw" {
            v.check(missing > 0, format!("{name}: {} configurations, {missing} without a witness (control)", cubes.len()));
        } else {
            v.check(missing == 0 && !cubes.is_empty(), format!("{name}: {} configurations, {missing} without a witness", cubes.len()));
        }
    }
    v
}

// 4

fn gensub_plane(k: &dyn ClassOps, names: [&str; 2], marks: &[(bool, bool)]) -> Structure {
    let v2 = Linear::vector_space(2).unwrap();
    let plane = v2.from_invariants(&[2, 2]);
    let sig = k.signature().clone();
    let mut s = parse_structure(&structure_to_string(&plane, "vec(2)"), &|_| Some(sig.clone())).unwrap();
    let (g, h) = (s.lookup(0, "g").unwrap(), s.lookup(0, "h").unwrap());
    let r = sig.relation("R").unwrap();
    let mut seeds = vec![];
    for &(ug, uh) in marks {
        seeds.push(match (ug, uh) {
            (true, true) => s.value(1, &[g, h]).unwrap(),
            (true, false) => g,
            _ => h,
        });
    }
    for x in s.generated(seeds) {
        s.add_tuple(r, vec![x]).unwrap();
    }
    let gh = s.value(1, &[g, h]).unwrap();
    let mut renamed = Structure::new(sig.clone());
    for x in s.elements() {
        let name = if x == g {
            names[0].to_string()
        } else if x == h {
            names[1].to_string()
        } else if x == gh {
            format!("{}+{}", names[0], names[1])
        } else {
            s.name(x).to_string()
        };
        renamed.add_element(0, &name).unwrap();
    }
    for (rel, t) in s.all_tuples() {
        renamed.add_tuple(rel, t.clone()).unwrap();
    }
    for (f, args, val) in s.all_entries() {
        renamed.set_value(f, args.clone(), val).unwrap();
    }
    k.check_member(&renamed).unwrap();
    renamed
}

fn gensub_line(k: &dyn ClassOps, name: &str) -> Structure {
    let mut s = Structure::new(k.signature().clone());
    let zero = s.add_element(0, "0").unwrap();
    let g = s.add_element(0, name).unwrap();
    s.set_value(0, vec![], zero).unwrap();
    for (x, y, z) in [(zero, zero, zero), (zero, g, g), (g, zero, g), (g, g, zero)] {
        s.set_value(1, vec![x, y], z).unwrap();
    }
    for f in 2..k.signature().functions().len() {
        let k_scalar = f as i64 - 3;
        s.set_value(f, vec![zero], zero).unwrap();
        // neg is the identity in characteristic 2, smul0 kills, smul1 fixes
        s.set_value(f, vec![g], if k_scalar == 0 { zero } else { g }).unwrap();
    }
    let r = k.signature().relation("R").unwrap();
    s.add_tuple(r, vec![zero]).unwrap();
    k.check_member(&s).unwrap();
    s
}

/// The four vectors `a, b0, b1` with `not R(a + b0)`, `R(a - b1)` and
/// `R(b0 + b1)`: the colimit of the cube is forced to mark `a + b0`.
fn subspace_cube(k: &dyn ClassOps) -> Result<String, String> {
    let a = gensub_line(k, "a");
    let b0 = gensub_line(k, "b0");
    let b1 = gensub_line(k, "b1");
    let d0 = gensub_plane(k, ["a", "b0"], &[]);
    let d1 = gensub_plane(k, ["a", "b1"], &[(true, true)]);
    let b = gensub_plane(k, ["b0", "b1"], &[(true, true)]);
    let by_name = |src: &Structure, tgt: &Structure| src.inclusion_by_names(tgt).unwrap();
    let cube = CubeInput {
        a_in_d0: by_name(&a, &d0),
        a_in_d1: by_name(&a, &d1),
        b0_in_d0: by_name(&b0, &d0),
        b0_in_b: by_name(&b0, &b),
        b1_in_d1: by_name(&b1, &d1),
        b1_in_b: by_name(&b1, &b),
        a,
        b0,
        b1,
        d0,
        d1,
        b,
    };
    cube.validate().map_err(|e| format!("cube rejected: {e}"))?;
    let r = k.signature().relation("R").unwrap();
    let ab0 = cube.d0.lookup(0, "a+b0").unwrap();
    if cube.d0.holds(r, &[ab0]) {
        return Err("R(a+b0) already holds in D0".into());
    }
    let mut ids = vec![];
    for x in cube.a.elements() {
        ids.push(((0, cube.a_in_d0[x as usize]), (1, cube.a_in_d1[x as usize])));
    }
    for y in cube.b0.elements() {
        ids.push(((0, cube.b0_in_d0[y as usize]), (2, cube.b0_in_b[y as usize])));
    }
    for y in cube.b1.elements() {
        ids.push(((1, cube.b1_in_d1[y as usize]), (2, cube.b1_in_b[y as usize])));
    }
    let (d, maps) = colimit(k, &[&cube.d0, &cube.d1, &cube.b], &ids).map_err(|e| format!("colimit failed: {e}"))?;
    if !d.holds(r, &[maps[0][ab0 as usize]]) {
        return Err("the colimit leaves a+b0 unmarked".into());
    }
    let via_check = match cube_colimit(k, &cube) {
        Err(ClassError::NotAmalgam(why)) => why,
        other => return Err(format!("cube completion did not report the failure: {other:?}")),
    };
    let three = match three_amalgamation(k, &cube) {
        Err(ClassError::Unsupported(why)) => why,
        other => return Err(format!("3-amalgamation did not refuse: {other:?}")),
    };
    Ok(format!("colimit marks a+b0 ({via_check}); 3-amalgamation refuses ({three})"))
}

fn condition5() -> Verdict {
    let mut v = Verdict::new();
    for name in ["sets", "graphs", "vec(2)"] {
        let r = check_feuvrier(class(name).as_ref(), 5, DEFAULT_BUDGET);
        let first = r.first_failure.as_deref().map(|s| s.lines().last().unwrap_or("").to_string()).unwrap_or_default();
        v.check(r.passed(), format!("{name}: canonical-map check over {} configurations, {} failures {first}", r.configurations, r.failures));
    }
    for name in ["sets", "graphs", "vec(2)"] {
        let k = class(name);
        let cubes = theorem_configurations(k.as_ref(), 2, DEFAULT_BUDGET).unwrap();
        let bad = cubes
            .par_iter()
            .filter(|c| three_amalgamation(k.as_ref(), c).and_then(|out| check_cube_intersections(c, &out).map_err(ClassError::NotAmalgam)).is_err())
            .count();
        v.check(bad == 0, format!("{name}: 3-amalgamation on {} cubes, {bad} with a failed intersection", cubes.len()));
    }
    let k = class("gensub(vec(2))");
    let r = check_feuvrier(k.as_ref(), 5, DEFAULT_BUDGET);
    v.check(r.failures > 0, format!("gensub(vec(2)): canonical-map check reports {} failures (expected some)", r.failures));
    match subspace_cube(k.as_ref()) {
        Ok(msg) => v.check(true, format!("gensub(vec(2)): {msg}")),
        Err(msg) => v.check(false, format!("gensub(vec(2)): {msg}")),
    }
    v
}

// 5

/// `v[i]` is `i` times the generator `g`; the trivial group is just `[0]`.
fn cyclic_elements(s: &Structure) -> Vec<Elem> {
    let zero = s.value(0, &[]).unwrap();
    let Some(g) = s.lookup(0, "g") else { return vec![zero] };
    let mut out = vec![zero, g];
    loop {
        let next = s.value(1, &[*out.last().unwrap(), g]).unwrap();
        if next == zero {
            return out;
        }
        out.push(next);
    }
}

fn cyclic(order: u64) -> Structure {
    if order == 1 {
        Linear::abelian_groups().constants_structure()
    } else {
        abelian_group(&[order])
    }
}

/// `(Z/m x Z/n) / {(ja(e), -jb(e))}` built from cosets.
fn cokernel(sig: &Arc<Signature>, m: usize, n: usize, ja1: usize, jb1: usize, d: usize) -> (Structure, Vec<usize>) {
    let rep = |x: usize, y: usize| -> (usize, usize) {
        (0..d).map(|k| ((x + k * ja1) % m, (y + n * d - k * jb1 % n) % n)).min().unwrap()
    };
    let mut reps: BTreeMap<(usize, usize), Elem> = BTreeMap::new();
    let mut s = Structure::new(sig.clone());
    for x in 0..m {
        for y in 0..n {
            let r = rep(x, y);
            if let std::collections::btree_map::Entry::Vacant(slot) = reps.entry(r) {
                slot.insert(s.add_element(0, &format!("c{}_{}", r.0, r.1)).unwrap());
            }
        }
    }
    let id = |x: usize, y: usize| reps[&rep(x, y)];
    s.set_value(0, vec![], id(0, 0)).unwrap();
    let all: Vec<(usize, usize)> = reps.keys().copied().collect();
    for &(x, y) in &all {
        s.set_value(2, vec![id(x, y)], id((m - x) % m, (n - y) % n)).unwrap();
        for &(u, w) in &all {
            s.set_value(1, vec![id(x, y), id(u, w)], id((x + u) % m, (y + w) % n)).unwrap();
        }
    }
    // index of (x, y) in the quotient, flattened as x * n + y
    let index = (0..m * n).map(|i| id(i / n, i % n) as usize).collect();
    (s, index)
}

fn abelian() -> Verdict {
    let mut v = Verdict::new();
    let k = Linear::abelian_groups();
    let sig = k.signature().clone();
    let (mut cases, mut bad, mut first) = (0, 0, None);
    for m in 1..=6u64 {
        for n in 1..=6u64 {
            for d in (1..=m.min(n)).filter(|d| m % d == 0 && n % d == 0) {
                let (a, b, e) = (cyclic(m), cyclic(n), cyclic(d));
                let (ae, be, ee) = (cyclic_elements(&a), cyclic_elements(&b), cyclic_elements(&e));
                let pos = |v: &[Elem], x: Elem| v.iter().position(|&y| y == x).unwrap();
                for ja in find_embeddings(&e, &a, &[], DEFAULT_BUDGET).unwrap() {
                    for jb in find_embeddings(&e, &b, &[], DEFAULT_BUDGET).unwrap() {
                        cases += 1;
                        let g1 = if d > 1 { ee[1] } else { ee[0] };
                        let ja1 = pos(&ae, ja.apply(g1));
                        let jb1 = pos(&be, jb.apply(g1));
                        let (oracle, index) = cokernel(&sig, m as usize, n as usize, ja1, jb1, d as usize);
                        let am = free_amalgam(&k, &e, &a, &b, &ja.map, &jb.map).unwrap();
                        let mut pairs = vec![];
                        for (i, &x) in ae.iter().enumerate() {
                            pairs.push((am.into_a.apply(x), index[i * n as usize] as Elem));
                        }
                        for (j, &y) in be.iter().enumerate() {
                            pairs.push((am.into_b.apply(y), index[j] as Elem));
                        }
                        let seed = seed_from_pairs(am.amalgam.len(), pairs);
                        let same = am.amalgam.len() == oracle.len()
                            && am.amalgam.is_total()
                            && is_isomorphic_over(&am.amalgam, &oracle, &seed, DEFAULT_BUDGET).unwrap().is_some();
                        if !same {
                            bad += 1;
                            first.get_or_insert(format!("Z/{m} + Z/{n} over Z/{d}: amalgam has {}, oracle {}", am.amalgam.len(), oracle.len()));
                        }
                    }
                }
            }
        }
    }
    v.check(bad == 0, format!("{cases} cyclic pushouts, {bad} mismatches {}", first.unwrap_or_default()));
    v
}

// 6

fn duplication() -> Verdict {
    let mut v = Verdict::new();
    let graphs = Graphs::new();
    let mut pair = Structure::new(graphs.signature().clone());
    let u = pair.add_element(0, "u").unwrap();
    let w = pair.add_element(0, "w").unwrap();
    let d = acl_duplication_check(&graphs, &pair, &ElemSet::from([u]), w, 2, DEFAULT_BUDGET).unwrap();
    v.check(d.realizations.len() >= 3, format!("graphs: {} realizations after 2 rounds", d.realizations.len()));
    let vec2 = Linear::vector_space(2).unwrap();
    let plane = vec2.from_invariants(&[2, 2]);
    let (g, h) = (plane.lookup(0, "g").unwrap(), plane.lookup(0, "h").unwrap());
    let d = acl_duplication_check(&vec2, &plane, &ElemSet::from([g]), h, 2, DEFAULT_BUDGET).unwrap();
    v.check(d.realizations.len() >= 3, format!("vec(2): {} realizations after 2 rounds", d.realizations.len()));
    v
}

// 7

fn saturation() -> Verdict {
    let mut v = Verdict::new();
    let graphs = class("graphs");
    let cfg = SaturationConfig::new(graphs.clone(), 3, 3, SEED);
    let start = graphs.constants_structure();
    let first = saturate(&cfg, &start).unwrap();
    let second = saturate(&cfg, &start).unwrap();
    v.check(first.to_text() == second.to_text(), format!("two runs with seed {SEED} agree byte for byte"));
    v.check(graphs.contains(&first.structure), "output is a member".into());
    let r = check_extension_property(&first.structure, graphs.as_ref(), 3, DEFAULT_BUDGET);
    v.check(
        r.clean(),
        format!(
            "{} vertices after {} rounds (stable: {}): {} bases, {} pairs, {} failures, {} over budget",
            first.structure.len(),
            first.rounds_run,
            first.stable,
            r.bases,
            r.pairs,
            r.failures.len(),
            r.over_budget
        ),
    );
    v
}

// 8

/// `s` with its elements re-created in the order `order`.
fn permuted(s: &Structure, order: &[Elem]) -> (Structure, Vec<Elem>) {
    let mut t = Structure::new(s.signature().clone());
    let mut to_new = vec![0; s.len()];
    for &x in order {
        to_new[x as usize] = t.add_element(s.sort_of(x), s.name(x)).unwrap();
    }
    for (r, tup) in s.all_tuples() {
        t.add_tuple(r, tup.iter().map(|&x| to_new[x as usize]).collect()).unwrap();
    }
    for (f, args, val) in s.all_entries() {
        t.set_value(f, args.iter().map(|&x| to_new[x as usize]).collect(), to_new[val as usize]).unwrap();
    }
    (t, to_new)
}

fn enumerations() -> Verdict {
    let mut v = Verdict::new();
    let k = class("param(graphs, sets)");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut d = k.random_member(&mut rng, 8);
    while k.parameterized().unwrap().parameters(&d).len() < 3 {
        d = k.random_member(&mut rng, 8);
    }
    let all: Vec<Elem> = d.elements().collect();
    let sa: ElemSet = all.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
    let sb: ElemSet = all.iter().copied().filter(|x| !sa.contains(x) || rng.gen_bool(0.5)).collect();
    let se: ElemSet = sa.intersection(&sb).copied().collect();
    let (a, a_back) = d.induced(&sa);
    let (b, b_back) = d.induced(&sb);
    let (e, e_back) = d.induced(&se);
    let pos = |back: &[Elem], x: Elem| back.iter().position(|&y| y == x).unwrap() as Elem;
    let ja: Vec<Elem> = e_back.iter().map(|&x| pos(&a_back, x)).collect();
    let jb: Vec<Elem> = e_back.iter().map(|&x| pos(&b_back, x)).collect();
    let reference = free_amalgam(k.as_ref(), &e, &a, &b, &ja, &jb).unwrap();
    let mut agree = 0;
    for _ in 0..ENUMERATIONS {
        let shuffled = |s: &Structure, rng: &mut ChaCha8Rng| {
            let mut order: Vec<Elem> = s.elements().collect();
            order.shuffle(rng);
            permuted(s, &order)
        };
        let (e2, e_to) = shuffled(&e, &mut rng);
        let (a2, a_to) = shuffled(&a, &mut rng);
        let (b2, b_to) = shuffled(&b, &mut rng);
        let mut ja2 = vec![0; e2.len()];
        let mut jb2 = vec![0; e2.len()];
        for x in e.elements() {
            ja2[e_to[x as usize] as usize] = a_to[ja[x as usize] as usize];
            jb2[e_to[x as usize] as usize] = b_to[jb[x as usize] as usize];
        }
        let other = free_amalgam(k.as_ref(), &e2, &a2, &b2, &ja2, &jb2).unwrap();
        let pairs = a
            .elements()
            .map(|x| (reference.into_a.apply(x), other.into_a.apply(a_to[x as usize])))
            .chain(b.elements().map(|x| (reference.into_b.apply(x), other.into_b.apply(b_to[x as usize]))));
        let seed = seed_from_pairs(reference.amalgam.len(), pairs);
        if is_isomorphic_over(&reference.amalgam, &other.amalgam, &seed, DEFAULT_BUDGET).unwrap().is_some() {
            agree += 1;
        }
    }
    v.check(
        agree == ENUMERATIONS,
        format!(
            "|E| = {}, |A| = {}, |B| = {}, amalgam {} elements: {agree} of {ENUMERATIONS} enumerations isomorphic over the inputs",
            e.len(),
            a.len(),
            b.len(),
            reference.amalgam.len()
        ),
    );
    v
}

// 9

fn ip() -> Verdict {
    let mut v = Verdict::new();
    let k = class("param(graphs, sets)");
    let pc = k.parameterized().unwrap();
    let start = pc.structures_with(3, 1).remove(0);
    let sat = saturate(&SaturationConfig::new(k.clone(), 4, 1, SEED), &start).unwrap();
    let (p, o) = (pc.parameter_sort(), pc.symbols().object_sorts[0]);
    let e = pc.symbols().object_relations[0];
    let psi = SeparatingFormula {
        formula: QfFormula::Rel(e, vec![Term::var("p", p), Term::var("x", o), Term::var("b", o)]),
        parameter: "p".into(),
        object: "x".into(),
        fixed: Assignment::from([("b".to_string(), sat.structure.lookup_any("o0").unwrap())]),
    };
    let t = Instant::now();
    let w = ip_witness(&sat.structure, k.as_ref(), &psi, 3, DEFAULT_BUDGET);
    let took = t.elapsed();
    match w {
        Ok(w) => {
            let mut patterns = BTreeSet::new();
            for (mask, &x) in w.objects.iter().enumerate() {
                let bits: Vec<bool> = w
                    .params
                    .iter()
                    .map(|&pi| {
                        let mut asg = psi.fixed.clone();
                        asg.insert("p".into(), pi);
                        asg.insert("x".into(), x);
                        evaluate(&psi.formula, &sat.structure, &asg).unwrap() == Truth::True
                    })
                    .collect();
                let expected: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
                if bits == expected {
                    patterns.insert(mask);
                }
            }
            v.check(patterns.len() == 8, format!("{} of 8 patterns re-verified, {} evaluations", patterns.len(), w.evaluations));
        }
        Err(err) => v.check(false, format!("no witness: {err}")),
    }
    v.check(took < IP_TIME_LIMIT, format!("search took {took:.1?} in a saturated structure of {} elements", sat.structure.len()));
    v
}

// 10

fn tree() -> Verdict {
    let mut v = Verdict::new();
    let k = class("param(vec(2), sets)");
    let pc = k.parameterized().unwrap();
    let start = pc.structures_with(1, 2).remove(0);
    let sat = saturate(&SaturationConfig::new(k.clone(), 2, 1, SEED), &start).unwrap();
    let xy = Term::app(1, vec![Term::var("x", 0), Term::var("y", 0)]);
    let w = match tree_witness(&sat.structure, k.as_ref(), &xy, 2, 2, DEFAULT_BUDGET) {
        Ok(w) => w,
        Err(err) => {
            v.check(false, format!("no witness: {err}"));
            return v;
        }
    };
    let lifted = pc.lift_object_term(&xy, &Term::var("p", pc.parameter_sort()));
    let s = &w.structure;
    let distinct = w.params.keys().all(|node| {
        let kids: BTreeSet<Elem> = (0..2).map(|i| w.values[&[node.as_slice(), &[i]].concat()]).collect();
        kids.len() == 2
    });
    v.check(distinct, format!("{} internal nodes with pairwise distinct child values", w.params.len()));
    let objects = s.elements_of(pc.symbols().object_sorts[0]).to_vec();
    let mut realized = 0;
    for leaf in w.paths.keys() {
        let found = objects.iter().any(|&x| {
            objects.iter().any(|&y| {
                (0..2).all(|l| {
                    let asg = Assignment::from([("p".to_string(), w.params[&leaf[..l].to_vec()]), ("x".to_string(), x), ("y".to_string(), y)]);
                    evaluate_term(&lifted, s, &asg).unwrap() == Some(w.values[&leaf[..=l].to_vec()])
                })
            })
        });
        realized += found as usize;
    }
    v.check(realized == 4 && w.paths.len() == 4, format!("{realized} of 4 leaf paths realized by a pair of objects"));
    v
}

// 11

struct FormulaGen<'a> {
    rng: ChaCha8Rng,
    pc: &'a ParamClass,
}

impl FormulaGen<'_> {
    fn param(&mut self) -> Term {
        let name = if self.rng.gen_bool(0.5) { "p" } else { "q" };
        Term::var(name, self.pc.parameter_sort())
    }

    fn object(&mut self, depth: usize) -> Term {
        let o = self.pc.symbols().object_sorts[0];
        let f = |i: usize| self.pc.symbols().object_functions[i];
        if depth == 0 || self.rng.gen_bool(0.35) {
            return match self.rng.gen_range(0..4) {
                0 => Term::app(f(0), vec![self.param()]),
                1 => Term::var("x", o),
                2 => Term::var("y", o),
                _ => Term::var("z", o),
            };
        }
        match self.rng.gen_range(0..3) {
            0 => {
                let p = self.param();
                Term::app(f(1), vec![p, self.object(depth - 1), self.object(depth - 1)])
            }
            1 => {
                let p = self.param();
                Term::app(f(2), vec![p, self.object(depth - 1)])
            }
            _ => {
                let p = self.param();
                let scalar = 3 + self.rng.gen_range(0..2);
                Term::app(f(scalar), vec![p, self.object(depth - 1)])
            }
        }
    }

    fn literal(&mut self) -> QfFormula {
        let atom = if self.rng.gen_bool(0.15) { QfFormula::eq(self.param(), self.param()) } else { QfFormula::eq(self.object(2), self.object(2)) };
        if self.rng.gen_bool(0.3) {
            QfFormula::not(atom)
        } else {
            atom
        }
    }

    fn conjunction(&mut self) -> QfFormula {
        let n = self.rng.gen_range(1..=3);
        QfFormula::conjunction((0..n).map(|_| self.literal()).collect())
    }
}

/// Whether some values of `vars[i..]` make every literal true, pruning on
/// literals whose variables are all bound.
fn exists(lits: &[(QfFormula, BTreeSet<String>)], vars: &[Var], i: usize, s: &Structure, asg: &mut Assignment) -> bool {
    let bound = |names: &BTreeSet<String>| names.iter().all(|n| asg.contains_key(n));
    for (lit, names) in lits {
        if bound(names) && evaluate(lit, s, asg).unwrap() != Truth::True {
            return false;
        }
    }
    if i == vars.len() {
        return true;
    }
    for &e in s.elements_of(vars[i].sort) {
        asg.insert(vars[i].name.clone(), e);
        if exists(lits, vars, i + 1, s, asg) {
            asg.remove(&vars[i].name);
            return true;
        }
    }
    asg.remove(&vars[i].name);
    false
}

/// Truth of the input against the existential closure of the output, for
/// every assignment of the input's free variables.
fn equivalent_on(f: &QfFormula, flat: &QfFormula, introduced: &[Var], s: &Structure) -> Result<(), String> {
    let free: Vec<Var> = f.free_vars().into_iter().collect();
    let lits: Vec<(QfFormula, BTreeSet<String>)> = flat
        .literals()
        .expect("flattened output is a literal conjunction")
        .iter()
        .map(|l| (l.to_formula(), l.atom.free_vars().into_iter().map(|v| v.name).collect()))
        .collect();
    let mut budget = u64::MAX;
    let mut mismatch = None;
    for_each_assignment(&free, s, &mut budget, &mut |asg| {
        let lhs = evaluate(f, s, asg).unwrap() == Truth::True;
        let rhs = exists(&lits, introduced, 0, s, &mut asg.clone());
        if lhs != rhs {
            mismatch = Some(format!("{asg:?}: input {lhs}, flattened {rhs}"));
            return true;
        }
        false
    })
    .unwrap();
    mismatch.map_or(Ok(()), Err)
}

/// For every object-sorted atom of `f`: its parameter variables and whether
/// it applies any function symbol.
fn object_atoms(f: &QfFormula, sig: &Signature) -> Vec<(BTreeSet<String>, bool)> {
    let p = sig.parameter_sort().unwrap();
    let mut out = vec![];
    let mut stack = vec![f];
    while let Some(g) = stack.pop() {
        match g {
            QfFormula::Eq(a, b) if a.sort(sig) != p => {
                let params = g.free_vars().into_iter().filter(|v| v.sort == p).map(|v| v.name).collect();
                out.push((params, matches!(a, Term::App(..)) || matches!(b, Term::App(..))));
            }
            QfFormula::Not(h) => stack.push(h),
            QfFormula::And(hs) | QfFormula::Or(hs) => stack.extend(hs),
            _ => {}
        }
    }
    out
}

fn flattening() -> Verdict {
    let mut v = Verdict::new();
    let k = class("param(vec(2), sets)");
    let pc = k.parameterized().unwrap();
    let sig = k.signature().clone();
    let mut structures = vec![];
    for params in 1..=2 {
        for objects in [1, 2, 4] {
            structures.extend(pc.structures_with(params, objects).into_iter().filter(|s| s.is_total()));
        }
    }
    let mut gen = FormulaGen { rng: ChaCha8Rng::seed_from_u64(SEED), pc };
    let formulas: Vec<QfFormula> = (0..FLATTEN_FORMULAS).map(|_| gen.conjunction()).collect();
    let results: Vec<Result<usize, String>> = formulas
        .par_iter()
        .map(|f| {
            let fl = flatten_parameterized(f, &sig, &FlattenOptions::default()).map_err(|e| e.to_string())?;
            let flat = fl.conjunction();
            for (params, applies) in object_atoms(&flat, &sig) {
                if params.len() != applies as usize {
                    return Err(format!("an object atom mentions {} parameter variables", params.len()));
                }
            }
            let introduced: Vec<Var> = fl.introduced.iter().map(|(v, _)| v.clone()).collect();
            for s in &structures {
                equivalent_on(f, &flat, &introduced, s)?;
            }
            Ok(introduced.len())
        })
        .collect();
    let bad = results.iter().filter(|r| r.is_err()).count();
    let renamed = results.iter().filter(|r| matches!(r, Ok(n) if *n > 0)).count();
    let first = results.into_iter().find_map(Result::err).unwrap_or_default();
    v.check(
        bad == 0,
        format!("{FLATTEN_FORMULAS} conjunctions ({renamed} needing new variables) on {} structures, {bad} failures {first}", structures.len()),
    );
    v
}

// 12

/// Closure under every defined table entry, computed by fixpoint.
fn closure(s: &Structure, seeds: &ElemSet) -> ElemSet {
    let mut out = seeds.clone();
    for f in 0..s.signature().functions().len() {
        if s.signature().functions()[f].args.is_empty() {
            out.extend(s.value(f, &[]));
        }
    }
    loop {
        let before = out.len();
        for (_, args, val) in s.all_entries() {
            if args.iter().all(|x| out.contains(x)) {
                out.insert(val);
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

/// For every `D ⊆ <BC>`, `C' = <C D>` must satisfy `<A C'> ∩ <B C'> = C'`.
fn m_oracle_holds(s: &Structure, a: &ElemSet, b: &ElemSet, c: &ElemSet) -> bool {
    let bc: Vec<Elem> = closure(s, &b.union(c).copied().collect()).into_iter().collect();
    let mut seen = BTreeSet::new();
    for mask in 0u64..1 << bc.len() {
        let d: ElemSet = c.iter().copied().chain(bc.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x)).collect();
        let c2 = closure(s, &d);
        if !seen.insert(c2.clone()) {
            continue;
        }
        let ac = closure(s, &a.union(&c2).copied().collect());
        let bc2 = closure(s, &b.union(&c2).copied().collect());
        if ac.intersection(&bc2).copied().collect::<ElemSet>() != c2 {
            return false;
        }
    }
    true
}

fn compare_queries(s: &Structure, queries: &[(ElemSet, ElemSet, ElemSet)]) -> (usize, usize, Option<String>) {
    let (mut dependent, mut bad, mut first) = (0, 0, None);
    for (a, b, c) in queries {
        let q = IndepQuery::new(s, a.iter().copied(), b.iter().copied(), c.iter().copied()).unwrap();
        let got = m_indep(&q, None).unwrap();
        let want = m_oracle_holds(s, a, b, c);
        dependent += !want as usize;
        if got.holds() != want || matches!(got, MVerdict::UpToBound(_)) {
            bad += 1;
            first.get_or_insert_with(|| format!("{}: m_indep {got:?}, oracle {want}", q.to_text()));
        }
    }
    (dependent, bad, first)
}

fn subsets(s: &Structure) -> Vec<ElemSet> {
    (0u64..1 << s.len()).map(|mask| s.elements().filter(|&x| mask >> x & 1 == 1).collect()).collect()
}

fn random_subset(s: &Structure, rng: &mut ChaCha8Rng, p: f64) -> ElemSet {
    s.elements().filter(|_| rng.gen_bool(p)).collect()
}

fn m_sweep(name: &str, exhaustive: Vec<Structure>, v: &mut Verdict) {
    m_sweep_fixed(name, exhaustive, v);
    let k = class(name);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let ambients: Vec<Structure> = (0..RANDOM_AMBIENTS).map(|i| k.random_member(&mut rng, 5 + i % 8)).collect();
    let largest = ambients.iter().map(Structure::len).max().unwrap_or(0);
    let mut queries_per = vec![];
    for s in &ambients {
        let qs: Vec<_> = (0..QUERIES_PER_AMBIENT)
            .map(|_| (random_subset(s, &mut rng, 0.3), random_subset(s, &mut rng, 0.3), random_subset(s, &mut rng, 0.2)))
            .collect();
        queries_per.push(qs);
    }
    let results: Vec<(usize, usize, Option<String>)> = ambients.par_iter().zip(&queries_per).map(|(s, qs)| compare_queries(s, qs)).collect();
    let dep: usize = results.iter().map(|r| r.0).sum();
    let bad: usize = results.iter().map(|r| r.1).sum();
    let first = results.into_iter().find_map(|r| r.2).unwrap_or_default();
    v.check(
        bad == 0 && largest <= 12,
        format!(
            "{name}: {RANDOM_AMBIENTS} random ambients up to {largest} elements, {} queries ({dep} dependent), {bad} disagreements {first}",
            RANDOM_AMBIENTS * QUERIES_PER_AMBIENT
        ),
    );
}

/// One parameter `p` over objects `0_p, a, b, c` with `c = a +_p b`.
fn discrepancy() -> Result<String, String> {
    let k = class("param(vec(2), sets)");
    let pc = k.parameterized().unwrap();
    let space = pc
        .structures_with(1, 4)
        .into_iter()
        .find(|s| s.is_total() && s.lookup_any("o0").is_some_and(|z| s.value(pc.symbols().object_functions[0], &[0]) == Some(z)))
        .ok_or("no plane with o0 as zero")?;
    let p = pc.parameters(&space)[0];
    let plus = pc.symbols().object_functions[1];
    let find = |n: &str| space.lookup_any(n).unwrap();
    let (a, b) = (find("o1"), find("o2"));
    let c = space.value(plus, &[p, a, b]).ok_or("a + b undefined")?;
    let q = IndepQuery::new(&space, [a, p], [b, c], []).unwrap();
    let av = a_indep(&q);
    let mv = m_indep(&q, None).map_err(|e| e.to_string())?;
    let oracle = m_oracle_holds(&space, &q.a, &q.b, &q.c);
    if av.independent && !mv.holds() && !oracle {
        Ok(format!("{}: algebraic independent, M-dependent ({mv:?})", q.to_text()))
    } else {
        Err(format!("{}: algebraic {}, M {mv:?}, oracle {oracle}", q.to_text(), av.independent))
    }
}

fn m_oracle() -> Verdict {
    let mut v = Verdict::new();
    m_sweep("graphs", class("graphs").members(5), &mut v);
    m_sweep("param(graphs, sets)", class("param(graphs, sets)").members(5), &mut v);
    let pv = class("param(vec(2), sets)");
    let pc = pv.parameterized().unwrap();
    let mut small: Vec<Structure> = vec![];
    for (kp, n) in [(1, 1), (1, 2), (2, 1)] {
        small.extend(pc.structures_with(kp, n).into_iter().filter(|s| s.is_total()));
    }
    m_sweep_fixed("param(vec(2), sets)", small, &mut v);
    match discrepancy() {
        Ok(msg) => v.check(true, msg),
        Err(msg) => v.check(false, msg),
    }
    v
}

fn m_sweep_fixed(name: &str, ambients: Vec<Structure>, v: &mut Verdict) {
    let results: Vec<(usize, usize, usize, Option<String>)> = ambients
        .par_iter()
        .map(|s| {
            let subs = subsets(s);
            let mut queries = vec![];
            for a in &subs {
                for b in &subs {
                    for c in &subs {
                        queries.push((a.clone(), b.clone(), c.clone()));
                    }
                }
            }
            let (dep, bad, first) = compare_queries(s, &queries);
            (queries.len(), dep, bad, first)
        })
        .collect();
    let total: usize = results.iter().map(|r| r.0).sum();
    let dep: usize = results.iter().map(|r| r.1).sum();
    let bad: usize = results.iter().map(|r| r.2).sum();
    let first = results.into_iter().find_map(|r| r.3).unwrap_or_default();
    v.check(bad == 0, format!("{name}: {} ambients, {total} queries ({dep} dependent), {bad} disagreements {first}", ambients.len()));
}
