//! Small hand-built instances with known answers, used by examples and tests.

use crate::domain::{Bundle, Capacities};
use crate::value_models::{Combine, ThresholdTerm, ThresholdValuation, ValueModel};

fn term(t: &[u32], bonus: f64) -> ThresholdTerm {
    ThresholdTerm {
        threshold: Bundle(t.to_vec()),
        bonus,
    }
}

fn threshold(c: &Capacities, combine: Combine, terms: Vec<ThresholdTerm>) -> ValueModel {
    ValueModel::Threshold(
        ThresholdValuation::new(c.clone(), combine, terms).expect("valid instance"),
    )
}

/// Two items with 10 copies each and two bidders who each want one of two
/// lopsided packages (worth 10) or a balanced one (worth 9).
///
/// No linear clearing prices exist. The efficient allocation gives both
/// bidders `(4, 4)` for a welfare of 18.
pub fn two_goods() -> (Capacities, Vec<ValueModel>) {
    let c = Capacities::new(vec![10, 10]).expect("valid capacities");
    let v1 = threshold(
        &c,
        Combine::Max,
        vec![term(&[7, 3], 10.0), term(&[3, 7], 10.0), term(&[4, 4], 9.0)],
    );
    let v2 = threshold(
        &c,
        Combine::Max,
        vec![term(&[8, 2], 10.0), term(&[2, 8], 10.0), term(&[4, 4], 9.0)],
    );
    (c, vec![v1, v2])
}

/// One item with 10 copies. Bidder 1 values 6 copies at 6; bidder 2 values
/// the first copy at 3 and reaching 5 copies at 2 more.
///
/// No linear clearing price exists; the efficient allocation is `(6), (1)`
/// with welfare 9.
pub fn one_good() -> (Capacities, Vec<ValueModel>) {
    let c = Capacities::new(vec![10]).expect("valid capacities");
    let v1 = threshold(&c, Combine::Sum, vec![term(&[6], 6.0)]);
    let v2 = threshold(&c, Combine::Sum, vec![term(&[1], 3.0), term(&[5], 2.0)]);
    (c, vec![v1, v2])
}
