//! Tuning the critical circle map to a prescribed rotation number and
//! verifying its dynamical partitions: cyclic order, real a-priori bounds
//! and the almost-parabolic interval law.
//!
//! Run with `cargo run --release --example critical_tuning`.

use yoccoz_lab::cf::ContinuedFraction;
use yoccoz_lab::dynamics::{
    partition_critical, tune_parameter, verify_almost_parabolic, verify_apriori,
    verify_cyclic_order,
};
use yoccoz_lab::rotation::partition_rotation;

fn main() -> yoccoz_lab::Result<()> {
    // Golden rotation number, matched through the first 6 partial quotients.
    let cf = ContinuedFraction::from_terms(&[1u128; 12]);
    let (map, diag) = tune_parameter(&cf, 6, 256)?;
    println!(
        "tuned in {} f64 + {} bigfloat bisections; lock-interval width {:.3e}",
        diag.f64_iterations, diag.bigfloat_iterations, diag.bracket_width
    );

    // The critical orbit induces the same combinatorics as the rotation.
    for n in 1..=6 {
        let crit = partition_critical(&map, &cf, n, 100_000)?;
        let rot = partition_rotation(&cf, n, 100_000)?;
        let ok = verify_cyclic_order(&crit, &rot);
        println!("level {n}: {} points, cyclic order matches rotation: {ok}", crit.points.len());
    }

    // Real a-priori bounds: comparable neighbor intervals, geometric decay.
    // Checked one level below the tuning depth; the deepest return time is
    // only locked combinatorially, not metrically.
    let apriori = verify_apriori(&map, &cf, 5, 100_000)?;
    println!(
        "a-priori bounds: c_adj = {:.3}, sigma_hat = {:.3} (< 1), eps_hat = {:.3}",
        apriori.c_adj, apriori.sigma_hat, apriori.eps_hat
    );

    // Almost-parabolic law inside a long cascade: child lengths follow
    // w_j ~ 1 / min(j, k+1-j)^2 up to bounded distortion.
    let par = verify_almost_parabolic(&map, &cf, 4, 100_000)?;
    println!(
        "parabolic law at level {}: distortion ratio in [{:.3}, {:.3}]",
        par.level, par.r_min, par.r_max
    );
    Ok(())
}
