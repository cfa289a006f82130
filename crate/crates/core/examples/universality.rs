//! Builds a network that reproduces a monotone value table exactly.

use mlcca::domain::Capacities;
use mlcca::mmvnn::construct_exact;
use mlcca::value_models::ValueTable;

fn main() -> mlcca::error::Result<()> {
    // Two items with 2 copies each, complements: the pair is worth more
    // than its parts.
    let c = Capacities::new(vec![2, 2])?;
    let table = ValueTable::from_fn(c.clone(), |x| {
        let (a, b) = (x.0[0] as f64, x.0[1] as f64);
        3.0 * a + 2.0 * b + 4.0 * a.min(b)
    })?;
    let net = construct_exact(&table)?;
    println!(
        "hidden layers {:?}, {} parameters",
        net.config().hidden,
        net.num_params()
    );
    let mut worst = 0.0f64;
    for (r, x) in c.bundles().enumerate() {
        let got = net.predict(&x);
        worst = worst.max((got - table.get(r)).abs());
        println!("  {:?}: table {:5.1}  net {:5.1}", x.0, table.get(r), got);
    }
    println!("max error {worst:e}");
    Ok(())
}
