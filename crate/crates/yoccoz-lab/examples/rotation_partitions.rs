//! Dynamical partitions of the rigid rotation: closest-return lengths,
//! the two-length structure, subdivision combinatorics and the
//! beta_n-vs-1/q_{n+1} bounds.
//!
//! Run with `cargo run --example rotation_partitions`.

use yoccoz_lab::cf::{rat_to_f64, ContinuedFraction};
use yoccoz_lab::rotation::{
    class_counts, closest_return_lengths, partition_rotation, verify_rotation_bounds,
};

fn main() -> yoccoz_lab::Result<()> {
    let cf = ContinuedFraction::from_terms(&[2, 3, 1, 4, 2, 3, 1, 4, 2, 3]);

    // beta_n shrinks like 1/q_{n+1}; both are certified exactly.
    let beta = closest_return_lengths(&cf, 6)?;
    for n in 0..=6 {
        println!(
            "beta_{n} = {:.3e}   1/q_{} = {:.3e}",
            beta.beta_f64(n),
            n + 1,
            1.0 / rat_to_f64(&num_rational::BigRational::from(cf.q(n + 1).clone()))
        );
    }

    // Every level-n interval has length beta_{n-1} or beta_{n-1} + beta_n.
    let part = partition_rotation(&cf, 3, 1 << 20)?;
    let b2 = beta.beta_f64(2);
    let b3 = beta.beta_f64(3);
    let mut short = 0;
    let mut long = 0;
    for i in 0..part.n_points() {
        let len = rat_to_f64(&part.interval_length(i).midpoint());
        if (len - b2).abs() < 1e-12 {
            short += 1;
        } else if (len - (b2 + b3)).abs() < 1e-12 {
            long += 1;
        }
    }
    println!(
        "level 3: {} intervals = {short} short (beta_2) + {long} long (beta_2+beta_3)",
        part.n_points()
    );

    // Neighbor-kind classes: at most 8 congruence classes per level,
    // whatever the rotation number.
    let counts = class_counts(&cf, 8)?;
    for (n, row) in counts.counts.iter().enumerate().skip(1) {
        let live = row.iter().filter(|&&c| c > 0.0).count();
        let total: f64 = row.iter().sum();
        println!("level {n}: {live} classes over {total} intervals");
    }

    // 1/(2 q_{n+1}) <= |interval| <= 2/q_n at every level.
    let rep = verify_rotation_bounds(&cf, 8)?;
    println!("rotation two-sided bounds: pass = {}", rep.pass);
    Ok(())
}
