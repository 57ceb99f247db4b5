//! Seeded random markets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::Market;

const MAX_RESAMPLE_ROUNDS: usize = 10_000;

/// Parameters of a random market. Budgets and non-zero coefficients are
/// log-uniform in their ranges; each coefficient is zero with probability
/// `sparsity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketGenerator {
    pub num_goods: usize,
    pub num_buyers: usize,
    pub rho: f64,
    #[serde(default)]
    pub sparsity: f64,
    #[serde(default = "default_budget_range")]
    pub budget_range: [f64; 2],
    #[serde(default = "default_coefficient_range")]
    pub coefficient_range: [f64; 2],
    pub seed: u64,
}

fn default_budget_range() -> [f64; 2] {
    [0.5, 2.0]
}

fn default_coefficient_range() -> [f64; 2] {
    [0.1, 10.0]
}

fn log_uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    let (lo, hi) = (range[0].ln(), range[1].ln());
    (lo + rng.gen::<f64>() * (hi - lo)).exp()
}

impl MarketGenerator {
    pub fn new(num_goods: usize, num_buyers: usize, rho: f64, seed: u64) -> Self {
        Self {
            num_goods,
            num_buyers,
            rho,
            sparsity: 0.0,
            budget_range: default_budget_range(),
            coefficient_range: default_coefficient_range(),
            seed,
        }
    }

    pub fn with_sparsity(mut self, sparsity: f64) -> Self {
        self.sparsity = sparsity;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_goods == 0 || self.num_buyers == 0 {
            return Err(Error::Argument("need at least one good and one buyer".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Domain(format!(
                "rho = {} is outside (0, 1); only weak-gross-substitutes CES markets are supported",
                self.rho
            )));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Argument(format!(
                "sparsity must lie in [0, 1), got {}",
                self.sparsity
            )));
        }
        for (name, r) in [("budget_range", self.budget_range), ("coefficient_range", self.coefficient_range)] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return Err(Error::Argument(format!(
                    "{name} must satisfy 0 < lo <= hi < inf, got [{}, {}]",
                    r[0], r[1]
                )));
            }
        }
        Ok(())
    }

    /// Draws the market. Buyer rows and good columns with no positive
    /// coefficient are redrawn until the market is valid.
    pub fn generate(&self) -> Result<Market> {
        self.validate()?;
        let (n, m) = (self.num_goods, self.num_buyers);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let budgets: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, self.budget_range)).collect();
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if rng.gen::<f64>() < self.sparsity {
                0.0
            } else {
                log_uniform(rng, self.coefficient_range)
            }
        };
        let mut coefficients: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| draw(&mut rng)).collect())
            .collect();
        for _ in 0..MAX_RESAMPLE_ROUNDS {
            let mut clean = true;
            for row in coefficients.iter_mut() {
                if row.iter().all(|&c| c == 0.0) {
                    clean = false;
                    row.iter_mut().for_each(|c| *c = draw(&mut rng));
                }
            }
            for j in 0..n {
                if coefficients.iter().all(|row| row[j] == 0.0) {
                    clean = false;
                    for row in coefficients.iter_mut() {
                        row[j] = draw(&mut rng);
                    }
                }
            }
            if clean {
                return Market::new(budgets, coefficients, self.rho);
            }
        }
        Err(Error::Argument(format!(
            "could not draw a valid market with sparsity {} in {MAX_RESAMPLE_ROUNDS} rounds",
            self.sparsity
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_market() {
        let g = MarketGenerator::new(5, 7, 0.4, 9).with_sparsity(0.5);
        assert_eq!(g.generate().unwrap(), g.generate().unwrap());
        let other = MarketGenerator { seed: 10, ..g.clone() };
        assert_ne!(g.generate().unwrap(), other.generate().unwrap());
    }

    #[test]
    fn heavy_sparsity_still_valid() {
        for seed in 0..50 {
            let market = MarketGenerator::new(6, 3, 0.7, seed)
                .with_sparsity(0.9)
                .generate()
                .unwrap();
            assert_eq!(market.num_goods(), 6);
            assert_eq!(market.num_buyers(), 3);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            MarketGenerator::new(2, 2, 1.2, 0).generate(),
            Err(Error::Domain(_))
        ));
        assert!(MarketGenerator::new(2, 2, 0.5, 0).with_sparsity(1.0).generate().is_err());
        assert!(MarketGenerator::new(0, 2, 0.5, 0).generate().is_err());
    }
}
