//! Independence verdicts on a small ambient, a short axiom suite and a
//! configuration where algebraic and M-independence part ways.

use fraisse::class::parse_class;
use fraisse::independence::{a_indep, axiom_suite_with, gamma_indep, m_indep, IndepQuery, SuiteConfig, FORKING_LABEL, KIM_LABEL};
use fraisse::search::DEFAULT_BUDGET;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graphs = parse_class("graphs")?;
    let sig = graphs.signature().clone();
    let path = fraisse::text::parse_structure(
        "(structure (sig-ref graphs) (carrier V a b c) (rel E (a b) (b a) (b c) (c b)))",
        &|_| Some(sig.clone()),
    )?;
    for (a, b, c) in [(["a"], ["c"], vec![]), (["a"], ["c"], vec!["b"]), (["a"], ["b"], vec![])] {
        let q = IndepQuery::by_names(&path, &a, &b, &c)?;
        println!(
            "{}  algebraic {}  free {}  {FORKING_LABEL}: {}",
            q.to_text(),
            a_indep(&q).independent,
            gamma_indep(graphs.as_ref(), &q, DEFAULT_BUDGET)?.independent,
            m_indep(&q, None)?.holds()
        );
    }

    let mut cfg = SuiteConfig::new(3, 7);
    cfg.random_cases = 100;
    let report = axiom_suite_with(graphs.as_ref(), &cfg);
    print!("\n{}", report.lines());

    // one parameter p, objects 0, a, b, c with c = a +_p b
    let pv = parse_class("param(vec(2), sets)")?;
    let pc = pv.parameterized().unwrap();
    let plane = pc
        .structures_with(1, 4)
        .into_iter()
        .find(|s| s.value(pc.symbols().object_functions[0], &[0]) == s.lookup_any("o0"))
        .unwrap();
    let p = pc.parameters(&plane)[0];
    let (a, b) = (plane.lookup_any("o1").unwrap(), plane.lookup_any("o2").unwrap());
    let c = plane.value(pc.symbols().object_functions[1], &[p, a, b]).unwrap();
    let q = IndepQuery::new(&plane, [a, p], [b, c], [])?;
    println!("\n{}", q.to_text());
    println!("  {KIM_LABEL}: {}", a_indep(&q).independent);
    println!("  {FORKING_LABEL}: {:?}", m_indep(&q, None)?);
    Ok(())
}
