//! Continued-fraction arithmetic: expansions, convergents, the q_n bounds
//! and arithmetic-class statistics.
//!
//! Run with `cargo run --example cf_basics`.

use num_bigint::BigInt;
use num_rational::BigRational;
use yoccoz_lab::cf::{
    cf_expand, check_qn_bounds, classify, generate_sequence, ClassId, ContinuedFraction,
    RatInterval, SequenceSpec,
};

fn main() -> yoccoz_lab::Result<()> {
    // Expand a rational enclosure of 1/pi and recover its partial quotients.
    let lo = BigRational::new(BigInt::from(3_183_098_861u64), BigInt::from(10_000_000_000u64));
    let hi = BigRational::new(BigInt::from(3_183_098_862u64), BigInt::from(10_000_000_000u64));
    let cf = cf_expand(&RatInterval::new(lo, hi), 4)?;
    println!("1/pi  a_1..a_4 = {:?}", (1..=4).map(|k| cf.a(k)).collect::<Vec<_>>());

    // The golden rotation number [1, 1, 1, ...] and its Fibonacci q_n.
    let golden = ContinuedFraction::from_terms(&[1u128; 20]);
    let qs: Vec<String> = (0..=8).map(|k| golden.q(k).to_string()).collect();
    println!("golden q_0..q_8 = {}", qs.join(", "));

    // Exactness check: prod b_k <= q_n <= prod (a_k + 1) for every n.
    let report = check_qn_bounds(&golden)?;
    let worst = report
        .rows
        .iter()
        .map(|r| r.lower_tightness.min(r.upper_tightness))
        .fold(f64::MAX, f64::min);
    println!("q_n bounds hold with worst tightness {worst:.4} (>= 1 means pass)");

    // Arithmetic classes: the PZ statistic sum log a_k / n stays bounded for
    // the stretched-exponential family and grows for square spikes.
    for (name, spec) in [
        ("stretched-exp eps=0", SequenceSpec::StretchedExp { eps: 0.0 }),
        ("square-spikes", SequenceSpec::SquareSpikes),
    ] {
        let terms = generate_sequence(&spec, 60)?;
        let cf = ContinuedFraction::from_terms(&terms);
        let pz = classify(&cf, ClassId::Pz, None)?;
        println!(
            "{name:22} PZ statistic {:.3}  trend slope {:+.4}",
            pz.statistic, pz.trend_slope
        );
    }
    Ok(())
}
