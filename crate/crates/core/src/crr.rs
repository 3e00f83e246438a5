//! Complete-market binomial trees and European claim pricing.
//!
//! A multiplicative tracker output lives inside a recombining binomial tree
//! with per-period factors `1 − d₁` (down) and `1 + d₂` (up) acting on the
//! discounted price. That tree is a complete market: the unique probability
//! making the discounted price a martingale is `p* = d₁/(d₁ + d₂)`, and
//! claim prices are discounted expectations under `p*`, computed here by
//! backward induction.

use std::io::Write;

use crate::error::{Error, Result};
use crate::log_tracker::MultiplicativePath;

/// Recombining tree on discounted prices: node `(k, i)` (level `k`, `i` up
/// moves) carries `S̃ = S0·(1 + d₂)^i·(1 − d₁)^{k−i}`; the bond grows by
/// `ρ ≥ 1` per period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrrTree {
    s0: f64,
    down: f64,
    up: f64,
    rho: f64,
    periods: usize,
}

impl CrrTree {
    pub fn new(s0: f64, down: f64, up: f64, rho: f64, periods: usize) -> Result<Self> {
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial price must be positive, got {s0}"
            )));
        }
        if !(down > 0.0 && down < 1.0) || !(up > 0.0 && up.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "per-period rates must satisfy d1 ∈ (0,1), d2 > 0, got d1={down}, d2={up}"
            )));
        }
        if !(rho.is_finite() && rho >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "per-period bond growth must satisfy ρ ≥ 1, got {rho}"
            )));
        }
        if periods == 0 {
            return Err(Error::InvalidArgument(
                "tree needs at least one period".into(),
            ));
        }
        Ok(CrrTree {
            s0,
            down,
            up,
            rho,
            periods,
        })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn down(&self) -> f64 {
        self.down
    }

    pub fn up(&self) -> f64 {
        self.up
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Discounted price at node `(k, i)`, `0 ≤ i ≤ k`.
    pub fn node(&self, k: usize, i: usize) -> f64 {
        debug_assert!(i <= k && k <= self.periods);
        self.s0 * (1.0 + self.up).powi(i as i32) * (1.0 - self.down).powi((k - i) as i32)
    }

    /// Undiscounted terminal price at node `(periods, i)`.
    pub fn terminal_price(&self, i: usize) -> f64 {
        self.node(self.periods, i) * self.rho.powi(self.periods as i32)
    }

    /// CSV rows `level,i,s_discounted` for every node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,i,s_discounted")?;
        for k in 0..=self.periods {
            for i in 0..=k {
                writeln!(w, "{},{},{}", k, i, self.node(k, i))?;
            }
        }
        Ok(())
    }
}

/// The unique martingale probability of an up move:
/// `p*·d₂ − (1 − p*)·d₁ = 0` gives `p* = d₁/(d₁ + d₂)`.
pub fn risk_neutral_prob(down: f64, up: f64) -> Result<f64> {
    if !(down > 0.0 && down < 1.0) || !(up > 0.0 && up.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "risk-neutral probability wants d1 ∈ (0,1) and d2 > 0, got {down}, {up}"
        )));
    }
    Ok(down / (down + up))
}

/// Price of a European claim on the terminal (undiscounted) price, by
/// backward induction under the martingale measure with per-step
/// discounting `ρ^{-1}`.
pub fn price_european(tree: &CrrTree, payoff: impl Fn(f64) -> f64) -> Result<f64> {
    let p = risk_neutral_prob(tree.down(), tree.up())?;
    let n = tree.periods();
    let mut values: Vec<f64> = (0..=n).map(|i| payoff(tree.terminal_price(i))).collect();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow(format!(
            "payoff produced non-finite value {v}"
        )));
    }
    let inv_rho = 1.0 / tree.rho();
    for k in (0..n).rev() {
        for i in 0..=k {
            values[i] = inv_rho * (p * values[i + 1] + (1.0 - p) * values[i]);
        }
        values.truncate(k + 1);
    }
    Ok(values[0])
}

/// Embeds a multiplicative tracker path into its complete-market tree.
///
/// The tracker's per-time rates `(d₁, d₂)` scale by `δ` to per-period tree
/// rates (the tracker type guarantees they are constant across steps).
/// Returns the tree plus the realized node index `i_k` (number of up moves)
/// at each level, so `y(t_k) = tree.node(k, i_k)`.
pub fn tree_from_tracker(y: &MultiplicativePath, rho: f64) -> Result<(CrrTree, Vec<usize>)> {
    let delta = y.delta();
    let tree = CrrTree::new(y.y0(), y.d1() * delta, y.d2() * delta, rho, y.n())?;
    let mut ups = 0usize;
    let mut realized = Vec::with_capacity(y.n() + 1);
    realized.push(0);
    for &d in y.directions() {
        if d > 0 {
            ups += 1;
        }
        realized.push(ups);
    }
    Ok((tree, realized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::log_tracker::track_log;
    use crate::process::{gen_ito, path_seed};
    use crate::tracker::TrackerParams;
    use proptest::prelude::*;

    #[test]
    fn martingale_probability_examples() {
        assert_eq!(risk_neutral_prob(0.2, 0.2).unwrap(), 0.5);
        assert_eq!(risk_neutral_prob(0.1, 0.3).unwrap(), 0.25);
        assert!(risk_neutral_prob(1.5, 0.3).is_err());
        assert!(risk_neutral_prob(0.1, 0.0).is_err());
    }

    #[test]
    fn one_step_conditional_expectation_is_exact() {
        let (d1, d2) = (0.13, 0.41);
        let p = risk_neutral_prob(d1, d2).unwrap();
        for s in [1.0, 37.5, 250.0] {
            let e = p * s * (1.0 + d2) + (1.0 - p) * s * (1.0 - d1);
            assert!((e - s).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn the_stock_itself_prices_at_s0() {
        let tree = CrrTree::new(100.0, 0.1, 0.15, 1.002, 40).unwrap();
        // claim = terminal stock: discounted expectation is the start price
        let price = price_european(&tree, |s| s).unwrap();
        assert!((price - 100.0).abs() <= 1e-9 * 100.0);
        // a strike-0 call is the same claim
        let call0 = price_european(&tree, |s| s.max(0.0)).unwrap();
        assert!((call0 - 100.0).abs() <= 1e-9 * 100.0);
    }

    #[test]
    fn backward_induction_matches_the_exhaustive_sum() {
        // direct oracle: sum payoffs against binomial weights
        fn direct(tree: &CrrTree, payoff: impl Fn(f64) -> f64) -> f64 {
            let n = tree.periods();
            let p = risk_neutral_prob(tree.down(), tree.up()).unwrap();
            let mut total = 0.0;
            for i in 0..=n {
                let mut weight = p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
                // C(n, i)
                for b in 0..i {
                    weight *= (n - b) as f64 / (b + 1) as f64;
                }
                total += weight * payoff(tree.terminal_price(i));
            }
            total / tree.rho().powi(n as i32)
        }

        for n in [1usize, 2, 5, 13, 30] {
            let tree = CrrTree::new(80.0, 0.07, 0.09, 1.001, n).unwrap();
            let strike = 85.0;
            let bi = price_european(&tree, |s| (s - strike).max(0.0)).unwrap();
            let dr = direct(&tree, |s| (s - strike).max(0.0));
            assert!(
                (bi - dr).abs() <= 1e-10 * dr.max(1.0),
                "n={n}: {bi} vs {dr}"
            );
        }
    }

    #[test]
    fn realized_tracker_path_sits_on_tree_nodes() {
        let grid = TimeGrid::new(1.0, 512).unwrap();
        let params = TrackerParams::without_drift(32, 3.0, 4.0).unwrap();
        for i in 0..10u64 {
            let log_path = gen_ito(grid, |_, _| 0.01, |_, _| 0.25, 0.0, path_seed(900, i)).unwrap();
            let x = log_path.map(|v| v.exp()).unwrap();
            let y = track_log(&x, &params).unwrap();
            let (tree, realized) = tree_from_tracker(&y, 1.0).unwrap();
            let nodes = y.nodes();
            for (k, &i_k) in realized.iter().enumerate() {
                let tree_val = tree.node(k, i_k);
                assert!(
                    (tree_val - nodes[k]).abs() <= 1e-12 * nodes[k].max(1.0),
                    "path {i} level {k}: {tree_val} vs {}",
                    nodes[k]
                );
            }
        }
    }

    #[test]
    fn small_tree_recombination() {
        // two periods, one up and one down in either order, middle node hit
        let y = MultiplicativePath::new(1.0, 2, 50.0, 1.0, vec![1, -1]).unwrap();
        let (tree, realized) = tree_from_tracker(&y, 1.0).unwrap();
        assert_eq!(realized, vec![0, 1, 1]);
        assert_eq!(tree.periods(), 2);
        // all-up path of length k lands on node (k, k)
        let yu = MultiplicativePath::new(1.0, 3, 50.0, 1.0, vec![1, 1, 1]).unwrap();
        let (_, up_real) = tree_from_tracker(&yu, 1.0).unwrap();
        assert_eq!(up_real, vec![0, 1, 2, 3]);
    }

    proptest! {
        #[test]
        fn put_call_parity(
            d1 in 0.01f64..0.5,
            d2 in 0.01f64..0.5,
            rho in 1.0f64..1.01,
            n in 1usize..60,
            s0 in 10.0f64..200.0,
            strike in 10.0f64..200.0,
        ) {
            let tree = CrrTree::new(s0, d1, d2, rho, n).unwrap();
            let call = price_european(&tree, |s| (s - strike).max(0.0)).unwrap();
            let put = price_european(&tree, |s| (strike - s).max(0.0)).unwrap();
            let want = s0 - strike / rho.powi(n as i32);
            prop_assert!(
                ((call - put) - want).abs() <= 1e-10 * want.abs().max(1.0),
                "call-put = {}, parity rhs = {want}", call - put
            );
        }

        #[test]
        fn price_monotone_in_s0_for_monotone_payoffs(
            s0 in 10.0f64..100.0,
            bump in 0.1f64..50.0,
            strike in 20.0f64..150.0,
        ) {
            let mk = |s: f64| CrrTree::new(s, 0.08, 0.1, 1.001, 25).unwrap();
            let lo = price_european(&mk(s0), |s| (s - strike).max(0.0)).unwrap();
            let hi = price_european(&mk(s0 + bump), |s| (s - strike).max(0.0)).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
