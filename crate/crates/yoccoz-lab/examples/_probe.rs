use yoccoz_lab::cf::*;
use yoccoz_lab::rotation::*;
use num_traits::ToPrimitive;

fn main() -> yoccoz_lab::Result<()> {
    let cf = ContinuedFraction::from_terms(&[1u128; 45]);
    let beta = closest_return_lengths(&cf, 29)?;
    for n in (16..=28).step_by(2) {
        if cf.q(n + 1).to_f64().unwrap() > 1e6 { break; }
        let t = std::time::Instant::now();
        let part = partition_rotation(&cf, n, 1_000_000)?;
        let t_part = t.elapsed();
        let t = std::time::Instant::now();
        let short = beta.beta(n - 1).midpoint();
        let long = &short + beta.beta(n).midpoint();
        for i in 0..part.n_points() {
            let len = part.interval_length(i).midpoint();
            assert!(len == short || len == long, "level {n} interval {i}");
        }
        println!("level {n} q={} partition {:?} lengths {:?}", cf.q(n), t_part, t.elapsed());
    }
    Ok(())
}
