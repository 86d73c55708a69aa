//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use rayon::prelude::*;
use shrinkerlab::selftest::{run_criterion, summary_line};

fn main() {
    let outcomes: Vec<_> = (1..=12usize).into_par_iter().map(run_criterion).collect();
    println!("\nacceptance suite");
    for o in &outcomes {
        println!("{}", summary_line(o));
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
