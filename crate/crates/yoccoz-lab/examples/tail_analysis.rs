//! Dilatation-field tail analysis on the synthetic deep tier: stratified
//! sampling, Horvitz-Thompson tail areas, gauge fits and the four-way
//! verdict (bounded / exponential / super-exponential / heavy).
//!
//! Run with `cargo run --release --example tail_analysis`.

use yoccoz_lab::analysis::{
    bounded_at, default_k_grid, fit_tail, gauge_test_suite, level_k_growth, sample_field,
    synthetic_tier, tail_area, tail_class, Direction, Gauge,
};
use yoccoz_lab::basemap::PFast;
use yoccoz_lab::cf::{generate_sequence, ContinuedFraction, SequenceSpec};

fn run_one(name: &str, cf: &ContinuedFraction, depth: usize) -> yoccoz_lab::Result<()> {
    let tier = synthetic_tier(cf, depth)?;
    let base = PFast::new();
    let fs = sample_field(&tier, &base, Direction::Forward, 200_000, 7)?;
    let grid = default_k_grid(&fs, 40);
    let est = tail_area(&fs, &grid)?;
    let fit = fit_tail(&est, Gauge::David, None).ok();
    let growth = level_k_growth(&fs);
    let verdict = tail_class(&fit, bounded_at(&est), growth);
    print!("{name:24} K-growth/level {growth:+.3}  verdict {verdict:18}");
    if let Some(f) = fit {
        print!(" alpha {:.3}  R^2 {:.3}  curvature {:+.2}", f.alpha, f.goodness, f.curvature);
    }
    println!();
    Ok(())
}

fn main() -> yoccoz_lab::Result<()> {
    // Golden: bounded type, the dilatation field has a uniform sup.
    run_one("golden", &ContinuedFraction::from_terms(&[1u128; 18]), 14)?;

    // a_n = floor(e^sqrt(n)): unbounded type inside the David class; the
    // tail decays (at least) exponentially in the David gauge.
    let terms = generate_sequence(&SequenceSpec::StretchedExp { eps: 0.0 }, 18)?;
    run_one("stretched-exp eps=0", &ContinuedFraction::from_terms(&terms), 14)?;

    // Gauge cross-checks: a prescribed field with an exp(-c/(K-1)) tail is
    // recognized by the David gauge and only by it, etc.
    println!("\ngauge matrix (field x gauge, pass should be the diagonal):");
    for row in gauge_test_suite()? {
        println!(
            "  field {:18} gauge {:?}: pass = {} (expected {})",
            row.field, row.gauge, row.pass, row.expected
        );
    }
    Ok(())
}
