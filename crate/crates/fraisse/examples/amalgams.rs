//! Free amalgams in a few classes, printed in the structure text format.

use fraisse::class::{free_amalgam, parse_class, verify_pushout, ClassOps, Linear};
use fraisse::search::DEFAULT_BUDGET;
use fraisse::text::{morphism_to_string, parse_structure, structure_to_string};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two edges glued at a shared vertex
    let graphs = parse_class("graphs")?;
    let sig = graphs.signature().clone();
    let read = |src: &str| parse_structure(src, &|_| Some(sig.clone()));
    let e = read("(structure (sig-ref graphs) (carrier V a))")?;
    let a = read("(structure (sig-ref graphs) (carrier V a b) (rel E (a b) (b a)))")?;
    let b = read("(structure (sig-ref graphs) (carrier V a c) (rel E (a c) (c a)))")?;
    let ja = e.inclusion_by_names(&a).unwrap();
    let jb = e.inclusion_by_names(&b).unwrap();
    let am = free_amalgam(graphs.as_ref(), &e, &a, &b, &ja, &jb)?;
    println!("{}", structure_to_string(&am.amalgam, "graphs"));
    println!("{}", morphism_to_string(&am.into_a.map, &a, &am.amalgam));
    println!("{}", morphism_to_string(&am.into_b.map, &b, &am.amalgam));
    let report = verify_pushout(&e, &a, &b, &ja, &jb, &am, &graphs.members(3), DEFAULT_BUDGET)?;
    println!("; pushout check: {} targets, {} map pairs, passed {}\n", report.targets, report.pairs, report.passed());

    // two lines over the zero space span a plane
    let v = Linear::vector_space(2)?;
    let line = v.from_invariants(&[2]);
    let zero = v.constants_structure();
    let z = |s: &fraisse::structure::Structure| s.value(0, &[]).unwrap();
    let am = free_amalgam(&v, &zero, &line, &line, &[z(&line)], &[z(&line)])?;
    println!("; vec(2): two lines give {} vectors", am.amalgam.len());

    // Z/4 and Z/6 glued along their subgroups of order 2
    let groups = Linear::abelian_groups();
    let z2 = groups.from_invariants(&[2]);
    let z4 = groups.from_invariants(&[4]);
    let z6 = groups.from_invariants(&[6]);
    let into = |small: &fraisse::structure::Structure, big: &fraisse::structure::Structure| {
        fraisse::search::first_embedding(small, big, &[], DEFAULT_BUDGET).unwrap().unwrap().map
    };
    let am = free_amalgam(&groups, &z2, &z4, &z6, &into(&z2, &z4), &into(&z2, &z6))?;
    println!("; abgrp: Z/4 + Z/6 over Z/2 has order {}", am.amalgam.len());

    // parameterized graphs: each parameter carries its own edge relation
    let pg = parse_class("param(graphs, sets)")?;
    let pc = pg.parameterized().unwrap();
    let s = &pc.structures_with(2, 2)[3];
    println!("\n{}", structure_to_string(s, &pg.name()));
    for &p in pc.parameters(s) {
        let (fiber, _) = pc.fiber(s, p);
        println!("; fiber at {}: {} edges", s.name(p), fiber.tuples(0).len() / 2);
    }
    Ok(())
}
