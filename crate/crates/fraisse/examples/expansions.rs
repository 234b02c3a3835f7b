//! Generic expansions of base classes and their condition reports.

use fraisse::class::{check_feuvrier, parse_class, Condition5};
use fraisse::search::DEFAULT_BUDGET;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for expr in ["genpred(vec(2), V)", "genfun(abgrp, (G)->G, depth=1)", "genbij(sets, S, window=2)", "eqquot(graphs, V)", "gensub(vec(2))"] {
        let k = parse_class(expr)?;
        let declared = match k.condition5() {
            Condition5::Trusted(why) => format!("trusted ({why})"),
            Condition5::Unverified => "unverified".into(),
            Condition5::Refuted(why) => format!("refuted ({why})"),
        };
        let sizes: Vec<usize> = (0..=3).map(|n| k.members(n).len()).collect();
        println!("{expr}\n  members up to size 0..3: {sizes:?}\n  3-amalgamation: {declared}");
        if k.locally_finite() {
            let r = check_feuvrier(k.as_ref(), 4, DEFAULT_BUDGET);
            println!("  canonical maps: {} configurations, {} failures", r.configurations, r.failures);
        }
    }
    Ok(())
}
