//! Relative gains, Spearman correlation and the hyperbolic fit over a
//! handful of (baseline, enhanced) accuracy pairs.

use mars::stats::{fit_hyperbolic, gain_stats, spearman};

fn main() -> mars::Result<()> {
    let pairs = [(32.0, 41.0), (45.0, 52.0), (58.0, 63.5), (71.0, 74.0), (84.0, 85.5)];
    let stats = gain_stats(&pairs)?;
    print!("{stats}");
    for b in [25.0, 50.0, 90.0] {
        println!("predicted gain at {b}: {:.2}%", stats.fit.predict(b));
    }

    // exact data recovers the generating curve
    let xs = [10.0, 20.0, 40.0, 80.0];
    let ys: Vec<f64> = xs.iter().map(|x| 100.0 / x + 5.0).collect();
    println!("{}", fit_hyperbolic(&xs, &ys)?);
    println!("rho(reversed) = {}", spearman(&xs, &[4.0, 3.0, 2.0, 1.0])?);
    Ok(())
}
