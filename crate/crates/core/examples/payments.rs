//! VCG and VCG-nearest payments for two local bidders and one global bidder.

use mlcca::domain::{Bundle, Capacities};
use mlcca::mechanisms::payments::{
    core_constraints, min_core_revenue, vcg_nearest_payments, vcg_payments,
};
use mlcca::oracles::{wdp_bids, Bid};

fn bid(x: &[u32], amount: f64) -> Vec<Bid> {
    vec![Bid {
        bundle: Bundle(x.to_vec()),
        amount,
    }]
}

fn main() -> mlcca::error::Result<()> {
    let c = Capacities::new(vec![1, 1])?;
    let bids = vec![bid(&[1, 0], 10.0), bid(&[0, 1], 10.0), bid(&[1, 1], 14.0)];
    let sol = wdp_bids(&bids, &c, None)?;
    println!("allocation {:?}, welfare {}", sol.allocation.0, sol.welfare);
    println!("VCG          {:?}", vcg_payments(&bids, &c, &sol)?);
    let cons = core_constraints(&bids, &c, &sol)?;
    println!("min core revenue {}", min_core_revenue(&cons, &sol)?);
    println!("VCG-nearest  {:?}", vcg_nearest_payments(&bids, &c, &sol)?);
    Ok(())
}
