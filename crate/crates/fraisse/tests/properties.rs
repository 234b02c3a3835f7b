use std::collections::BTreeSet;

use fraisse::class::*;
use fraisse::formula::QfFormula;
use fraisse::independence::{a_indep, m_indep, IndepQuery};
use fraisse::limit::*;
use fraisse::search::{is_isomorphic_over, seed_from_pairs, DEFAULT_BUDGET};
use fraisse::structure::{Elem, Structure};
use fraisse::term::{Assignment, Term};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Split {
    e: Structure,
    a: Structure,
    b: Structure,
    ja: Vec<Elem>,
    jb: Vec<Elem>,
}

/// `A`, `B` and `E = A ∩ B` as induced substructures of a random member.
fn split(k: &dyn ClassOps, seed: u64, size: usize) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = k.random_member(&mut rng, size);
    let sa: BTreeSet<Elem> = d.elements().filter(|_| rng.gen_bool(0.6)).collect();
    let sb: BTreeSet<Elem> = d.elements().filter(|x| !sa.contains(x) || rng.gen_bool(0.5)).collect();
    let sa = d.generated(sa);
    let sb = d.generated(sb);
    let se = d.generated(sa.intersection(&sb).copied());
    let (a, a_back) = d.induced(&sa);
    let (b, b_back) = d.induced(&sb);
    let (e, e_back) = d.induced(&se);
    let pos = |back: &[Elem], x: Elem| back.iter().position(|&y| y == x).unwrap() as Elem;
    let ja = e_back.iter().map(|&x| pos(&a_back, x)).collect();
    let jb = e_back.iter().map(|&x| pos(&b_back, x)).collect();
    Split { e, a, b, ja, jb }
}

fn graphs() -> ClassHandle {
    parse_class("graphs").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn amalgams_are_symmetric(seed in any::<u64>(), size in 1usize..7, name in prop::sample::select(vec!["graphs", "sets", "vec(2)", "param(graphs, sets)"])) {
        let k = parse_class(name).unwrap();
        let Split { e, a, b, ja, jb } = split(k.as_ref(), seed, size);
        let ab = free_amalgam(k.as_ref(), &e, &a, &b, &ja, &jb).unwrap();
        let ba = free_amalgam(k.as_ref(), &e, &b, &a, &jb, &ja).unwrap();
        let pairs = a.elements().map(|x| (ab.into_a.apply(x), ba.into_b.apply(x)))
            .chain(b.elements().map(|x| (ab.into_b.apply(x), ba.into_a.apply(x))));
        let seed = seed_from_pairs(ab.amalgam.len(), pairs);
        prop_assert!(is_isomorphic_over(&ab.amalgam, &ba.amalgam, &seed, DEFAULT_BUDGET).unwrap().is_some());
    }

    #[test]
    fn amalgam_over_the_whole_side_is_the_other_side(seed in any::<u64>(), size in 1usize..7, name in prop::sample::select(vec!["graphs", "vec(2)", "param(graphs, sets)"])) {
        let k = parse_class(name).unwrap();
        let Split { e, b, jb, .. } = split(k.as_ref(), seed, size);
        let ids: Vec<Elem> = e.elements().collect();
        let am = free_amalgam(k.as_ref(), &e, &e, &b, &ids, &jb).unwrap();
        let seed = seed_from_pairs(b.len(), b.elements().map(|x| (x, am.into_b.apply(x))));
        prop_assert!(is_isomorphic_over(&b, &am.amalgam, &seed, DEFAULT_BUDGET).unwrap().is_some());
    }

    #[test]
    fn relational_amalgams_add_no_tuples(seed in any::<u64>(), size in 1usize..8) {
        let k = graphs();
        let Split { e, a, b, ja, jb } = split(k.as_ref(), seed, size);
        let am = free_amalgam(k.as_ref(), &e, &a, &b, &ja, &jb).unwrap();
        let mut images: BTreeSet<Vec<Elem>> = BTreeSet::new();
        for (src, m) in [(&a, &am.into_a), (&b, &am.into_b)] {
            for t in src.tuples(0) {
                images.insert(t.iter().map(|&x| m.apply(x)).collect());
            }
        }
        prop_assert_eq!(am.amalgam.tuples(0), &images);
        prop_assert_eq!(am.amalgam.len(), a.len() + b.len() - e.len());
    }

    #[test]
    fn algebraic_independence_is_symmetric_and_implied_by_m(seed in any::<u64>(), size in 1usize..9, name in prop::sample::select(vec!["graphs", "vec(2)", "param(graphs, sets)"])) {
        let k = parse_class(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = k.random_member(&mut rng, size);
        prop_assume!(d.is_total() && d.len() <= 16);
        let pick = |rng: &mut ChaCha8Rng| -> Vec<Elem> { d.elements().filter(|_| rng.gen_bool(0.3)).collect() };
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let q = IndepQuery::new(&d, a.clone(), b.clone(), c.clone()).unwrap();
        let swapped = IndepQuery::new(&d, b, a, c).unwrap();
        prop_assert_eq!(a_indep(&q).independent, a_indep(&swapped).independent);
        if m_indep(&q, None).unwrap().holds() {
            prop_assert!(a_indep(&q).independent);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn saturation_is_deterministic_and_stays_in_the_class(seed in any::<u64>(), start in 0usize..4) {
        let k = graphs();
        let m0 = k.random_member(&mut ChaCha8Rng::seed_from_u64(seed), start);
        let cfg = SaturationConfig::new(k.clone(), 2, 2, seed);
        let first = saturate(&cfg, &m0).unwrap();
        let second = saturate(&cfg, &m0).unwrap();
        prop_assert_eq!(first.to_text(), second.to_text());
        prop_assert!(k.contains(&first.structure));
        prop_assert!(m0.inclusion_by_names(&first.structure).is_some());
    }

    #[test]
    fn extension_failures_never_increase_over_the_start(seed in any::<u64>(), start in 2usize..5) {
        let k = graphs();
        let m0 = k.random_member(&mut ChaCha8Rng::seed_from_u64(seed), start);
        let failures = |m: &Structure| {
            let within = m0.inclusion_by_names(m).unwrap().into_iter().collect();
            check_extension_property_within(m, k.as_ref(), 2, &within, DEFAULT_BUDGET).failures.len()
        };
        let mut last = failures(&m0);
        for rounds in 1..=3 {
            let out = saturate(&SaturationConfig::new(k.clone(), 2, rounds, seed), &m0).unwrap();
            let now = failures(&out.structure);
            prop_assert!(now <= last, "round {}: {} failures after {}", rounds, now, last);
            last = now;
        }
        prop_assert_eq!(last, 0);
    }

    #[test]
    fn ip_witnesses_realize_every_pattern(seed in any::<u64>(), k in 0usize..4) {
        let class = parse_class("param(graphs, sets)").unwrap();
        let pc = class.parameterized().unwrap();
        let start = pc.structures_with(3, 1).remove(0);
        let sat = saturate(&SaturationConfig::new(class.clone(), 4, 1, seed), &start).unwrap();
        let (p, o) = (pc.parameter_sort(), pc.symbols().object_sorts[0]);
        let psi = SeparatingFormula {
            formula: QfFormula::Rel(pc.symbols().object_relations[0], vec![Term::var("p", p), Term::var("x", o), Term::var("b", o)]),
            parameter: "p".into(),
            object: "x".into(),
            fixed: Assignment::from([("b".to_string(), sat.structure.lookup_any("o0").unwrap())]),
        };
        let w = ip_witness(&sat.structure, class.as_ref(), &psi, k, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(w.params.len(), k);
        prop_assert_eq!(w.objects.len(), if k == 0 { 0 } else { 1 << k });
        prop_assert_eq!(w.evaluations, if k == 0 { 0 } else { k << k });
        let distinct: BTreeSet<Elem> = w.objects.iter().copied().collect();
        prop_assert_eq!(distinct.len(), w.objects.len());
    }

    #[test]
    fn tree_witnesses_branch_on_distinct_values(seed in any::<u64>(), depth in 0usize..3, branching in 1usize..3) {
        let class = parse_class("param(vec(2), sets)").unwrap();
        let pc = class.parameterized().unwrap();
        let start = pc.structures_with(1, 2).remove(0);
        let sat = saturate(&SaturationConfig::new(class.clone(), 2, 1, seed), &start).unwrap();
        let xy = Term::app(1, vec![Term::var("x", 0), Term::var("y", 0)]);
        let w = tree_witness(&sat.structure, class.as_ref(), &xy, depth, branching, DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(w.paths.len(), branching.pow(depth as u32));
        let internal = (0..depth).map(|d| branching.pow(d as u32)).sum::<usize>();
        prop_assert_eq!(w.params.len(), internal);
        let lifted = pc.lift_object_term(&xy, &Term::var("p", pc.parameter_sort()));
        prop_assert!(verify_tree(&w, &lifted).is_ok());
    }
}
