//! Bounded saturation and the witnesses searched for inside it.

use fraisse::class::parse_class;
use fraisse::formula::QfFormula;
use fraisse::limit::{check_extension_property, ip_witness, saturate, tree_witness, SaturationConfig, SeparatingFormula};
use fraisse::search::DEFAULT_BUDGET;
use fraisse::term::{Assignment, Term};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graphs = parse_class("graphs")?;
    let sat = saturate(&SaturationConfig::new(graphs.clone(), 2, 3, 7), &graphs.constants_structure())?;
    print!("{}", sat.to_text().lines().take(2).map(|l| format!("{l}\n")).collect::<String>());
    print!("{}", check_extension_property(&sat.structure, graphs.as_ref(), 1, DEFAULT_BUDGET));

    // three parameters over one object, saturated at level 4
    let pg = parse_class("param(graphs, sets)")?;
    let pc = pg.parameterized().unwrap();
    let m = saturate(&SaturationConfig::new(pg.clone(), 4, 1, 7), &pc.structures_with(3, 1).remove(0))?.structure;
    let (p, o) = (pc.parameter_sort(), pc.symbols().object_sorts[0]);
    let psi = SeparatingFormula {
        formula: QfFormula::Rel(pc.symbols().object_relations[0], vec![Term::var("p", p), Term::var("x", o), Term::var("b", o)]),
        parameter: "p".into(),
        object: "x".into(),
        fixed: Assignment::from([("b".to_string(), m.lookup_any("o0").unwrap())]),
    };
    let w = ip_witness(&m, pg.as_ref(), &psi, 3, DEFAULT_BUDGET)?;
    println!("\nip: parameters {}", m.names_of(&w.params));
    for (mask, &x) in w.objects.iter().enumerate() {
        println!("  pattern {mask:03b}: {}", m.name(x));
    }

    // x + y under a parameter takes distinct values along a binary tree
    let pv = parse_class("param(vec(2), sets)")?;
    let pc = pv.parameterized().unwrap();
    let m = saturate(&SaturationConfig::new(pv.clone(), 2, 1, 7), &pc.structures_with(1, 2).remove(0))?.structure;
    let xy = Term::app(1, vec![Term::var("x", 0), Term::var("y", 0)]);
    let t = tree_witness(&m, pv.as_ref(), &xy, 2, 2, DEFAULT_BUDGET)?;
    println!("\ntree in {} elements:", t.structure.len());
    for (leaf, &(x, y)) in &t.paths {
        println!("  {leaf:?} realized by ({}, {})", t.structure.name(x), t.structure.name(y));
    }
    Ok(())
}
