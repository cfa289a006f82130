//! Payment rules over the final bid set.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::domain::{Capacities, MONEY_TOL};
use crate::error::{Error, Result};
use crate::oracles::{wdp_bids, Bid, WdpSolution};

/// Largest bidder count for which every coalition is enumerated.
pub const MAX_CORE_BIDDERS: usize = 12;

/// VCG: `pi_i = W(-i) - (W - b_i(a_i))`, clamped at zero.
pub fn vcg_payments(bids: &[Vec<Bid>], c: &Capacities, sol: &WdpSolution) -> Result<Vec<f64>> {
    let n = bids.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if sol.allocation.0[i].is_null() {
            out.push(0.0);
            continue;
        }
        let mut inc = vec![true; n];
        inc[i] = false;
        let without = wdp_bids(bids, c, Some(&inc))?.welfare;
        out.push((without - (sol.welfare - sol.amounts[i])).max(0.0));
    }
    Ok(out)
}

/// One core constraint: `sum_{i in payers} pi_i >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreConstraint {
    pub payers: Vec<usize>,
    pub rhs: f64,
}

/// Core constraints for every coalition `L`: the winners outside `L` must pay
/// at least what `L` could achieve on its own beyond its current bids,
/// `sum_{i not in L} pi_i >= W(L) - sum_{i in L} b_i(a_i)`.
pub fn core_constraints(
    bids: &[Vec<Bid>],
    c: &Capacities,
    sol: &WdpSolution,
) -> Result<Vec<CoreConstraint>> {
    let n = bids.len();
    if n > MAX_CORE_BIDDERS {
        return Err(Error::InvalidConfig(format!(
            "core payments enumerate 2^n coalitions; {n} bidders exceeds the limit {MAX_CORE_BIDDERS}"
        )));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let inc: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let w = wdp_bids(bids, c, Some(&inc))?.welfare;
        let own: f64 = (0..n).filter(|&i| inc[i]).map(|i| sol.amounts[i]).sum();
        let rhs = w - own;
        let payers: Vec<usize> = (0..n)
            .filter(|&i| !inc[i] && !sol.allocation.0[i].is_null())
            .collect();
        if rhs > MONEY_TOL {
            out.push(CoreConstraint { payers, rhs });
        }
    }
    Ok(out)
}

/// Minimum total payment over the core (with `0 <= pi_i <= b_i(a_i)`).
pub fn min_core_revenue(cons: &[CoreConstraint], sol: &WdpSolution) -> Result<f64> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = sol
        .amounts
        .iter()
        .map(|&b| lp.add_var(1.0, (0.0, b.max(0.0))))
        .collect();
    for k in cons {
        let expr: Vec<_> = k.payers.iter().map(|&i| (vars[i], 1.0)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, k.rhs);
    }
    let s = lp
        .solve()
        .map_err(|e| Error::Solver(format!("minimum core revenue LP: {e}")))?;
    Ok(s.objective())
}

/// VCG-nearest: the point of the minimum-revenue core closest (in L2) to the
/// VCG payments.
pub fn vcg_nearest_payments(
    bids: &[Vec<Bid>],
    c: &Capacities,
    sol: &WdpSolution,
) -> Result<Vec<f64>> {
    let n = bids.len();
    let vcg = vcg_payments(bids, c, sol)?;
    let cons = core_constraints(bids, c, sol)?;
    let r_min = min_core_revenue(&cons, sol)?;

    // minimize ||pi - vcg||^2  s.t.  sum pi = r_min, core rows, 0 <= pi <= b.
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 2.0;
    }
    let cvec: Vec<f64> = vcg.iter().map(|v| -2.0 * v).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    a.extend(std::iter::repeat_n(1.0, n));
    b.push(r_min);
    for k in &cons {
        let mut row = vec![0.0; n];
        for &i in &k.payers {
            row[i] = -1.0;
        }
        a.extend(row);
        b.push(-k.rhs);
    }
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        a.extend(row);
        b.push(sol.amounts[i].max(0.0));
        let mut row = vec![0.0; n];
        row[i] = -1.0;
        a.extend(row);
        b.push(0.0);
    }
    let mut last_err = None;
    // The equality can be marginally infeasible in floating point; relax it slightly on retry.
    for relax in [0.0, 1e-9, 1e-7] {
        b[0] = r_min + relax;
        let mut qm = q.clone();
        match quadprog::solve_qp(&mut qm, &cvec, &a, &b, 1, false) {
            Ok(s) => return Ok(s.sol.into_iter().map(|v| v.max(0.0)).collect()),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Solver(format!(
        "VCG-nearest projection: {}",
        last_err.expect("at least one attempt")
    )))
}
