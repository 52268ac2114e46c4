//! Price-responsive multi-energy users.
//!
//! Each user buys elastic electricity plus heat, which it can obtain from an
//! electric boiler, a gas boiler, or directly from the heat network. Given
//! posted retail prices the best response separates into an electricity part
//! (closed form) and a heat part (merit order over marginal heat costs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retail prices posted by the operator, currency per MW(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetailPrices {
    pub electricity: f64,
    pub gas: f64,
    pub heat: f64,
}

impl RetailPrices {
    pub fn new(electricity: f64, gas: f64, heat: f64) -> Self {
        Self {
            electricity,
            gas,
            heat,
        }
    }
}

/// Utility and equipment parameters of one user for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeuProfile {
    pub omega: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub eta_eb: f64,
    pub eta_gb: f64,
    pub p_e_max: f64,
    pub p_eb_max: f64,
    pub p_gb_max: f64,
    /// Cap on heat bought from the network; `None` means twice the bliss point.
    #[serde(default)]
    pub h_direct_max: Option<f64>,
}

impl MeuProfile {
    pub fn validate(&self) -> Result<()> {
        let eta_ok = |eta: f64| eta > 0.0 && eta <= 1.0;
        let ok = self.lambda > 0.0
            && self.sigma > 0.0
            && self.omega.is_finite()
            && self.zeta.is_finite()
            && eta_ok(self.eta_eb)
            && eta_ok(self.eta_gb)
            && self.p_e_max >= 0.0
            && self.p_eb_max >= 0.0
            && self.p_gb_max >= 0.0
            && self.h_direct_max.is_none_or(|cap| cap >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::config("MEU profile parameters out of range"))
        }
    }

    pub fn direct_heat_cap(&self) -> f64 {
        self.h_direct_max
            .unwrap_or_else(|| (2.0 * self.zeta / (2.0 * self.sigma)).max(0.0))
    }

    fn electric_cap(&self) -> f64 {
        self.p_e_max.min((self.omega / self.lambda).max(0.0))
    }

    /// Net surplus: utility of consumption minus purchase cost.
    pub fn surplus(
        &self,
        prices: &RetailPrices,
        p_e: f64,
        p_eb: f64,
        p_gb: f64,
        h_direct: f64,
    ) -> f64 {
        let heat = self.eta_eb * p_eb + self.eta_gb * p_gb + h_direct;
        utility_electric(p_e, self.omega, self.lambda) + utility_heat(heat, self.sigma, self.zeta)
            - prices.electricity * (p_e + p_eb)
            - prices.gas * p_gb
            - prices.heat * h_direct
    }
}

/// Consumption bundle chosen by a user.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeuResponse {
    pub p_e: f64,
    pub p_eb: f64,
    pub p_gb: f64,
    pub h_direct: f64,
    pub h_eb: f64,
    pub h_gb: f64,
    pub utility: f64,
}

impl MeuResponse {
    /// Electricity drawn from the operator (appliances plus electric boiler).
    pub fn electricity(&self) -> f64 {
        self.p_e + self.p_eb
    }

    pub fn total_heat(&self) -> f64 {
        self.h_eb + self.h_gb + self.h_direct
    }
}

/// Quadratic electricity utility, flat beyond the bliss point `omega / lambda`.
pub fn utility_electric(p: f64, omega: f64, lambda: f64) -> f64 {
    let bliss = omega / lambda;
    if p <= bliss {
        omega * p - 0.5 * lambda * p * p
    } else {
        omega * omega / (2.0 * lambda)
    }
}

pub fn utility_heat(h_total: f64, sigma: f64, zeta: f64) -> f64 {
    -sigma * h_total * h_total + zeta * h_total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeatSource {
    ElectricBoiler,
    GasBoiler,
    Direct,
}

/// Best response to `prices`.
pub fn solve_response(profile: &MeuProfile, prices: &RetailPrices) -> MeuResponse {
    let p_e =
        ((profile.omega - prices.electricity) / profile.lambda).clamp(0.0, profile.electric_cap());

    // Sources in tie-break order; the stable sort keeps it for equal costs.
    let mut sources = [
        (
            HeatSource::ElectricBoiler,
            prices.electricity / profile.eta_eb,
            profile.eta_eb * profile.p_eb_max,
        ),
        (
            HeatSource::GasBoiler,
            prices.gas / profile.eta_gb,
            profile.eta_gb * profile.p_gb_max,
        ),
        (HeatSource::Direct, prices.heat, profile.direct_heat_cap()),
    ];
    sources.sort_by(|a, b| a.1.total_cmp(&b.1));

    let (mut h_eb, mut h_gb, mut h_direct) = (0.0, 0.0, 0.0);
    let mut total = 0.0;
    for (source, marginal, cap) in sources {
        let target = (profile.zeta - marginal) / (2.0 * profile.sigma);
        if target <= total {
            break;
        }
        let amount = cap.min(target - total);
        match source {
            HeatSource::ElectricBoiler => h_eb = amount,
            HeatSource::GasBoiler => h_gb = amount,
            HeatSource::Direct => h_direct = amount,
        }
        total += amount;
        if amount < cap {
            break;
        }
    }

    let p_eb = h_eb / profile.eta_eb;
    let p_gb = h_gb / profile.eta_gb;
    MeuResponse {
        p_e,
        p_eb,
        p_gb,
        h_direct,
        h_eb,
        h_gb,
        utility: profile.surplus(prices, p_e, p_eb, p_gb, h_direct),
    }
}

/// Upper bound on grid points per instance for [`brute_force_response`].
pub const BRUTE_FORCE_POINT_LIMIT: u64 = 200_000_000;

/// Grid-search maximizer, kept independent of the merit-order logic.
///
/// The objective separates into an electricity term and a heat term. The heat
/// term is searched over a grid of electric-boiler and gas-boiler inputs; for
/// each grid pair the direct-heat purchase is set by maximizing the remaining
/// one-dimensional concave quadratic and then also rounded onto the grid,
/// keeping whichever of the two is better.
pub fn brute_force_response(
    profile: &MeuProfile,
    prices: &RetailPrices,
    grid_step: f64,
) -> Result<MeuResponse> {
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(Error::config("grid_step must be positive"));
    }
    let count = |cap: f64| (cap / grid_step).floor() as u64 + 1;
    let e_cap = profile
        .p_e_max
        .min((profile.omega / profile.lambda).max(0.0));
    let n_e = count(e_cap);
    let n_eb = count(profile.p_eb_max);
    let n_gb = count(profile.p_gb_max);
    let points = n_eb.saturating_mul(n_gb);
    if points > BRUTE_FORCE_POINT_LIMIT || n_e > BRUTE_FORCE_POINT_LIMIT {
        return Err(Error::Resource(format!(
            "grid of {points} points exceeds the limit of {BRUTE_FORCE_POINT_LIMIT}"
        )));
    }

    let mut best_e = (f64::NEG_INFINITY, 0.0);
    for i in 0..n_e {
        let p = (i as f64 * grid_step).min(e_cap);
        let v = utility_electric(p, profile.omega, profile.lambda) - prices.electricity * p;
        if v > best_e.0 {
            best_e = (v, p);
        }
    }

    let d_cap = profile.direct_heat_cap();
    let (sigma, zeta) = (profile.sigma, profile.zeta);
    let heat_value = |h_other: f64, h_d: f64, other_cost: f64| {
        let h = h_other + h_d;
        -sigma * h * h + zeta * h - other_cost - prices.heat * h_d
    };
    let mut best_h = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for i in 0..n_eb {
        let p_eb = (i as f64 * grid_step).min(profile.p_eb_max);
        let eb_heat = profile.eta_eb * p_eb;
        let eb_cost = prices.electricity * p_eb;
        for j in 0..n_gb {
            let p_gb = (j as f64 * grid_step).min(profile.p_gb_max);
            let h_other = eb_heat + profile.eta_gb * p_gb;
            let other_cost = eb_cost + prices.gas * p_gb;
            let exact = ((zeta - prices.heat) / (2.0 * sigma) - h_other).clamp(0.0, d_cap);
            let snapped = ((exact / grid_step).round() * grid_step).min(d_cap);
            for h_d in [exact, snapped] {
                let v = heat_value(h_other, h_d, other_cost);
                if v > best_h.0 {
                    best_h = (v, p_eb, p_gb, h_d);
                }
            }
        }
    }

    let (_, p_eb, p_gb, h_direct) = best_h;
    let p_e = best_e.1;
    Ok(MeuResponse {
        p_e,
        p_eb,
        p_gb,
        h_direct,
        h_eb: profile.eta_eb * p_eb,
        h_gb: profile.eta_gb * p_gb,
        utility: profile.surplus(prices, p_e, p_eb, p_gb, h_direct),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile() -> MeuProfile {
        MeuProfile {
            omega: 30.0,
            lambda: 2.0,
            sigma: 1.0,
            zeta: 20.0,
            eta_eb: 0.9,
            eta_gb: 0.85,
            p_e_max: 20.0,
            p_eb_max: 5.0,
            p_gb_max: 5.0,
            h_direct_max: None,
        }
    }

    #[test]
    fn electric_utility() {
        assert_eq!(utility_electric(0.0, 30.0, 2.0), 0.0);
        assert_eq!(utility_electric(10.0, 30.0, 2.0), 200.0);
        assert_eq!(utility_electric(20.0, 30.0, 2.0), 225.0);
    }

    #[test]
    fn heat_utility() {
        assert_eq!(utility_heat(0.0, 1.0, 20.0), 0.0);
        assert_eq!(utility_heat(6.0, 1.0, 20.0), 84.0);
        assert_eq!(utility_heat(10.0, 1.0, 20.0), 100.0);
    }

    #[test]
    fn electricity_response() {
        let r = solve_response(&profile(), &RetailPrices::new(10.0, 50.0, 50.0));
        assert!((r.p_e - 10.0).abs() < 1e-12);
    }

    #[test]
    fn heat_merit_order_example() {
        let r = solve_response(&profile(), &RetailPrices::new(12.0, 6.0, 8.0));
        assert!((r.h_gb - 4.25).abs() < 1e-12);
        assert!((r.p_gb - 5.0).abs() < 1e-12);
        assert!((r.h_direct - 1.75).abs() < 1e-12);
        assert_eq!(r.h_eb, 0.0);
        assert!((r.total_heat() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn expensive_prices_mean_no_consumption() {
        let r = solve_response(&profile(), &RetailPrices::new(30.0, 40.0, 20.0));
        assert_eq!(r.p_e, 0.0);
        assert_eq!(r.total_heat(), 0.0);
        assert_eq!(r.utility, 0.0);
    }

    #[test]
    fn tie_goes_to_electric_boiler() {
        let mut prof = profile();
        prof.eta_gb = 0.9;
        let r = solve_response(&prof, &RetailPrices::new(9.0, 9.0, 50.0));
        assert!(r.h_eb > 0.0);
        assert_eq!(r.h_eb, prof.eta_eb * prof.p_eb_max);
    }

    #[test]
    fn brute_force_matches_examples() {
        let prices = RetailPrices::new(12.0, 6.0, 8.0);
        let exact = solve_response(&profile(), &prices);
        let grid = brute_force_response(&profile(), &prices, 1e-2).unwrap();
        assert!((exact.utility - grid.utility).abs() <= 2.0 * 1e-2 * 50.0);
        assert!(exact.utility >= grid.utility - 1e-9);
    }

    #[test]
    fn zero_prices_saturate() {
        let prof = profile();
        let grid = brute_force_response(&prof, &RetailPrices::new(0.0, 0.0, 0.0), 1e-2).unwrap();
        assert!((grid.p_e - 15.0).abs() < 1e-9);
        let heat = grid.h_eb + grid.h_gb + grid.h_direct;
        assert!((heat - 10.0).abs() < 1e-2);
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let mut prof = profile();
        prof.p_eb_max = 1e6;
        prof.p_gb_max = 1e6;
        let err = brute_force_response(&prof, &RetailPrices::new(1.0, 1.0, 1.0), 1e-3);
        assert!(matches!(err, Err(Error::Resource(_))));
    }

    #[test]
    fn steep_heat_utility_buys_almost_nothing() {
        let mut prof = profile();
        prof.sigma = 1e6;
        let r = solve_response(&prof, &RetailPrices::new(1.0, 1.0, 1.0));
        assert!(r.total_heat() < 1e-4);
    }

    fn arb_profile() -> impl Strategy<Value = MeuProfile> {
        (
            (10.0f64..80.0, 0.5f64..8.0, 0.2f64..3.0, 10.0f64..80.0),
            (
                0.6f64..1.0,
                0.6f64..1.0,
                1.0f64..20.0,
                0.0f64..6.0,
                0.0f64..6.0,
            ),
        )
            .prop_map(
                |((omega, lambda, sigma, zeta), (eta_eb, eta_gb, p_e_max, p_eb_max, p_gb_max))| {
                    MeuProfile {
                        omega,
                        lambda,
                        sigma,
                        zeta,
                        eta_eb,
                        eta_gb,
                        p_e_max,
                        p_eb_max,
                        p_gb_max,
                        h_direct_max: None,
                    }
                },
            )
    }

    fn arb_prices() -> impl Strategy<Value = RetailPrices> {
        (0.0f64..60.0, 0.0f64..60.0, 0.0f64..60.0).prop_map(|(e, g, h)| RetailPrices::new(e, g, h))
    }

    proptest! {
        #[test]
        fn response_within_bounds(prof in arb_profile(), prices in arb_prices()) {
            let r = solve_response(&prof, &prices);
            prop_assert!(r.p_e >= 0.0 && r.p_e <= prof.p_e_max + 1e-12);
            prop_assert!(r.p_eb >= 0.0 && r.p_eb <= prof.p_eb_max + 1e-12);
            prop_assert!(r.p_gb >= 0.0 && r.p_gb <= prof.p_gb_max + 1e-12);
            prop_assert!(r.h_direct >= 0.0 && r.h_direct <= prof.direct_heat_cap() + 1e-12);
            prop_assert!((r.h_eb - prof.eta_eb * r.p_eb).abs() < 1e-9);
            prop_assert!((r.h_gb - prof.eta_gb * r.p_gb).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_own_price(prof in arb_profile(), prices in arb_prices(), bump in 0.0f64..20.0) {
            let base = solve_response(&prof, &prices);
            let e = solve_response(&prof, &RetailPrices { electricity: prices.electricity + bump, ..prices });
            prop_assert!(e.p_e <= base.p_e + 1e-12);
            prop_assert!(e.p_eb <= base.p_eb + 1e-12);
            let g = solve_response(&prof, &RetailPrices { gas: prices.gas + bump, ..prices });
            prop_assert!(g.p_gb <= base.p_gb + 1e-12);
            let h = solve_response(&prof, &RetailPrices { heat: prices.heat + bump, ..prices });
            prop_assert!(h.h_direct <= base.h_direct + 1e-12);
        }

        #[test]
        fn scale_invariant(prof in arb_profile(), prices in arb_prices(), k in 0.5f64..4.0) {
            let a = solve_response(&prof, &prices);
            let scaled = MeuProfile {
                omega: prof.omega * k,
                lambda: prof.lambda * k,
                sigma: prof.sigma * k,
                zeta: prof.zeta * k,
                ..prof.clone()
            };
            let b = solve_response(&scaled, &RetailPrices::new(prices.electricity * k, prices.gas * k, prices.heat * k));
            prop_assert!((a.p_e - b.p_e).abs() < 1e-9);
            prop_assert!((a.p_eb - b.p_eb).abs() < 1e-9);
            prop_assert!((a.p_gb - b.p_gb).abs() < 1e-9);
            prop_assert!((a.h_direct - b.h_direct).abs() < 1e-9);
        }

        #[test]
        fn never_worse_than_coarse_grid(prof in arb_profile(), prices in arb_prices()) {
            let exact = solve_response(&prof, &prices);
            let grid = brute_force_response(&prof, &prices, 0.05).unwrap();
            prop_assert!(exact.utility >= grid.utility - 1e-9);
            prop_assert!(exact.utility - grid.utility <= 2.0 * 0.05 * (prof.zeta + prof.omega));
        }
    }
}
