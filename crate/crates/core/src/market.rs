//! CES Fisher market instances and the buyer side of the economy.
//!
//! Buyers are myopic demand generators: at prices `p` buyer `i` spends its
//! whole budget `b_i`, splitting it across goods in proportion to
//! `(c_ij / p_j)^ε` with `ε = ρ / (1 - ρ)`.
//!
//! Every power `(c/p)^ε` is evaluated as `exp(ε (ln c - ln p))` and every
//! normalising sum through a max-shifted log-sum-exp, so large `ε` (ρ close
//! to 1) does not overflow. Goods with `c_ij = 0` are dropped from buyer
//! `i`'s sums before any logarithm is taken.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// `ln Σ exp(x)` with the maximum shifted out. Empty input gives `-inf`.
pub(crate) fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Logistic function, evaluated on the side that cannot overflow.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Strictly positive prices, one per good.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::Domain("price vector must be non-empty".into()));
        }
        if let Some((j, p)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::Domain(format!(
                "price of good {j} must be finite and strictly positive, got {p}"
            )));
        }
        Ok(Self(prices))
    }

    pub fn uniform(n: usize, price: f64) -> Result<Self> {
        Self::new(vec![price; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy of `self` with good `j` repriced at `price`.
    pub fn with_price(&self, j: usize, price: f64) -> Result<Self> {
        check_index("good", j, self.len())?;
        let mut prices = self.0.clone();
        prices[j] = price;
        Self::new(prices)
    }

    /// `λ p` for `λ > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|p| p * lambda).collect())
    }

    /// Coordinate-wise `self >= other`.
    pub fn dominates(&self, other: &PriceVector) -> bool {
        self.len() == other.len() && self.iter().zip(other.iter()).all(|(a, b)| a >= b)
    }
}

impl TryFrom<Vec<f64>> for PriceVector {
    type Error = Error;

    fn try_from(prices: Vec<f64>) -> Result<Self> {
        Self::new(prices)
    }
}

impl From<PriceVector> for Vec<f64> {
    fn from(p: PriceVector) -> Self {
        p.0
    }
}

impl Index<usize> for PriceVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl fmt::Display for PriceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, p) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// The invariant price box `[p_min, p_max]`. Best-response maps
/// `[p_min, p_max]^n` into itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBox {
    pub p_min: f64,
    pub p_max: f64,
}

impl PriceBox {
    pub fn contains_price(&self, price: f64) -> bool {
        price >= self.p_min && price <= self.p_max
    }

    pub fn contains(&self, p: &PriceVector) -> bool {
        p.iter().all(|&x| self.contains_price(x))
    }

    pub fn clamp(&self, price: f64) -> f64 {
        price.clamp(self.p_min, self.p_max)
    }

    /// Midpoint of the box in log-price coordinates.
    pub fn log_midpoint(&self) -> f64 {
        (self.p_min * self.p_max).sqrt()
    }
}

/// Goods bought by each buyer; row `i` is buyer `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub quantities: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn num_buyers(&self) -> usize {
        self.quantities.len()
    }

    /// `Σ_i x_ij`.
    pub fn good_total(&self, j: usize) -> f64 {
        self.quantities.iter().map(|row| row[j]).sum()
    }

    /// Money buyer `i` spends at prices `p`.
    pub fn spending(&self, i: usize, p: &PriceVector) -> f64 {
        self.quantities[i]
            .iter()
            .zip(p.iter())
            .map(|(x, p)| x * p)
            .sum()
    }
}

/// On-disk shape of a market: plain fields, validated on the way in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub num_goods: usize,
    pub num_buyers: usize,
    pub rho: f64,
    pub budgets: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

/// A Fisher market with CES buyers in the weak-gross-substitutes regime.
///
/// Each of the `n` goods is owned by its own seller and has unit supply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketSpec", into = "MarketSpec")]
pub struct Market {
    budgets: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
    rho: f64,
    epsilon: f64,
    /// Per buyer: `(good, ln c_ij)` for every `c_ij > 0`, in good order.
    log_coefficients: Vec<Vec<(usize, f64)>>,
    /// Per good: buyers with `c_ij > 0`, in buyer order.
    interested: Vec<Vec<usize>>,
    bounds: PriceBox,
}

impl Market {
    pub fn new(budgets: Vec<f64>, coefficients: Vec<Vec<f64>>, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!(
                "rho = {rho} is outside (0, 1); only weak-gross-substitutes CES markets are supported"
            )));
        }
        let m = budgets.len();
        if m == 0 {
            return Err(Error::InvalidMarket("market needs at least one buyer".into()));
        }
        if coefficients.len() != m {
            return Err(Error::InvalidMarket(format!(
                "{} coefficient rows for {m} buyers",
                coefficients.len()
            )));
        }
        let n = coefficients[0].len();
        if n == 0 {
            return Err(Error::InvalidMarket("market needs at least one good".into()));
        }
        for (i, &b) in budgets.iter().enumerate() {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidMarket(format!(
                    "budget of buyer {i} must be finite and positive, got {b}"
                )));
            }
        }
        for (i, row) in coefficients.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMarket(format!(
                    "coefficient row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some((j, c)) = row
                .iter()
                .enumerate()
                .find(|(_, c)| !(c.is_finite() && **c >= 0.0))
            {
                return Err(Error::InvalidMarket(format!(
                    "coefficient c[{i}][{j}] must be finite and non-negative, got {c}"
                )));
            }
        }

        let log_coefficients: Vec<Vec<(usize, f64)>> = coefficients
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0.0)
                    .map(|(j, &c)| (j, c.ln()))
                    .collect()
            })
            .collect();
        if let Some(i) = log_coefficients.iter().position(Vec::is_empty) {
            return Err(Error::InvalidMarket(format!(
                "buyer {i} has no good with a positive coefficient"
            )));
        }
        let mut interested = vec![Vec::new(); n];
        for (i, row) in log_coefficients.iter().enumerate() {
            for &(j, _) in row {
                interested[j].push(i);
            }
        }
        if let Some(j) = interested.iter().position(Vec::is_empty) {
            return Err(Error::InvalidMarket(format!(
                "good {j} has no buyer with a positive coefficient"
            )));
        }

        let epsilon = rho / (1.0 - rho);
        let mut market = Self {
            budgets,
            coefficients,
            rho,
            epsilon,
            log_coefficients,
            interested,
            bounds: PriceBox {
                p_min: 0.0,
                p_max: 0.0,
            },
        };
        market.bounds = market.compute_bounds();
        Ok(market)
    }

    pub fn num_goods(&self) -> usize {
        self.interested.len()
    }

    pub fn num_buyers(&self) -> usize {
        self.budgets.len()
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn total_budget(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// Buyers with a positive coefficient on good `j`.
    pub fn interested_buyers(&self, j: usize) -> &[usize] {
        &self.interested[j]
    }

    /// The invariant box `[p_min, p_max]`.
    ///
    /// `p_max = Σ_i b_i`: above it no good can sell its unit supply.
    /// `p_min = min_j max_{i: c_ij > 0} C_ij` with
    /// `C_ij = b_i c_ij^ε / Σ_k c_ik^ε`: when every other price is at least
    /// `p_min` and good `j` is priced below `C_ij`, buyer `i` alone demands
    /// more than one unit of `j`, so no clearing price lies below it.
    pub fn price_bounds(&self) -> PriceBox {
        self.bounds
    }

    fn compute_bounds(&self) -> PriceBox {
        let p_max = self.total_budget();
        let eps = self.epsilon;
        let log_norms: Vec<f64> = self
            .log_coefficients
            .iter()
            .map(|row| log_sum_exp(row.iter().map(|&(_, lc)| eps * lc)))
            .collect();
        let mut best_per_good = vec![0.0_f64; self.num_goods()];
        for (i, row) in self.log_coefficients.iter().enumerate() {
            for &(j, lc) in row {
                let c = self.budgets[i] * (eps * lc - log_norms[i]).exp();
                best_per_good[j] = best_per_good[j].max(c);
            }
        }
        let p_min = best_per_good
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .min(p_max);
        PriceBox { p_min, p_max }
    }

    fn check_prices(&self, p: &PriceVector) -> Result<()> {
        if p.len() != self.num_goods() {
            return Err(Error::Argument(format!(
                "price vector has {} entries for {} goods",
                p.len(),
                self.num_goods()
            )));
        }
        Ok(())
    }

    /// `ln Σ_k (c_ik / p_k)^ε` for buyer `i`.
    fn log_denominator(&self, i: usize, p: &PriceVector) -> f64 {
        let eps = self.epsilon;
        log_sum_exp(
            self.log_coefficients[i]
                .iter()
                .map(|&(k, lc)| eps * (lc - p[k].ln())),
        )
    }

    fn quantity(&self, i: usize, j: usize, log_c: f64, log_denominator: f64, p: &PriceVector) -> f64 {
        let eps = self.epsilon;
        self.budgets[i] / p[j] * (eps * (log_c - p[j].ln()) - log_denominator).exp()
    }

    /// The utility-maximising allocation at prices `p`:
    /// `x_ij = (b_i / p_j) (c_ij/p_j)^ε / Σ_k (c_ik/p_k)^ε`.
    pub fn demand(&self, p: &PriceVector) -> Result<Allocation> {
        self.check_prices(p)?;
        let n = self.num_goods();
        let quantities = (0..self.num_buyers())
            .map(|i| {
                let log_den = self.log_denominator(i, p);
                let mut row = vec![0.0; n];
                for &(j, lc) in &self.log_coefficients[i] {
                    row[j] = self.quantity(i, j, lc, log_den, p);
                }
                row
            })
            .collect();
        Ok(Allocation { quantities })
    }

    /// Total demand `Σ_i x_ij(p)` for good `j`.
    pub fn good_demand(&self, p: &PriceVector, j: usize) -> Result<f64> {
        self.check_prices(p)?;
        check_index("good", j, self.num_goods())?;
        let mut total = 0.0;
        for i in 0..self.num_buyers() {
            let log_den = self.log_denominator(i, p);
            // Same summation order as a column of `demand`, zero rows included.
            total += match self.log_coefficients[i].iter().find(|(k, _)| *k == j) {
                Some(&(_, lc)) => self.quantity(i, j, lc, log_den, p),
                None => 0.0,
            };
        }
        Ok(total)
    }

    /// `max_j |Σ_i x_ij(p) - 1|`.
    pub fn clearing_residual(&self, p: &PriceVector) -> Result<f64> {
        let x = self.demand(p)?;
        Ok((0..self.num_goods())
            .map(|j| (x.good_total(j) - 1.0).abs())
            .fold(0.0, f64::max))
    }

    /// Total spending on good `j` when it is priced at `alpha` and every
    /// other good `k` at `p_other[k]`. Entry `j` of `p_other` is ignored.
    pub fn good_spending(&self, p_other: &PriceVector, j: usize, alpha: f64) -> Result<f64> {
        Ok(self.spending_curve(p_other, j)?.at(alpha)?.0)
    }

    pub(crate) fn spending_curve(&self, p_other: &PriceVector, j: usize) -> Result<SpendingCurve> {
        self.check_prices(p_other)?;
        check_index("good", j, self.num_goods())?;
        let eps = self.epsilon;
        let terms = self.interested[j]
            .iter()
            .map(|&i| {
                let row = &self.log_coefficients[i];
                let log_c = row
                    .iter()
                    .find(|(k, _)| *k == j)
                    .map(|&(_, lc)| lc)
                    .expect("interested buyer has a positive coefficient");
                let log_rest = log_sum_exp(
                    row.iter()
                        .filter(|(k, _)| *k != j)
                        .map(|&(k, lc)| eps * (lc - p_other[k].ln())),
                );
                SpendingTerm {
                    budget: self.budgets[i],
                    scaled_log_c: eps * log_c,
                    log_rest,
                }
            })
            .collect();
        Ok(SpendingCurve {
            epsilon: eps,
            terms,
        })
    }

    /// CES utility `(Σ_j (c_ij x_ij)^ρ)^{1/ρ}` of buyer `i`.
    pub fn utility(&self, x: &Allocation, i: usize) -> Result<f64> {
        check_index("buyer", i, self.num_buyers())?;
        let row = x
            .quantities
            .get(i)
            .ok_or_else(|| Error::Argument(format!("allocation has no row for buyer {i}")))?;
        if row.len() != self.num_goods() {
            return Err(Error::Argument(format!(
                "allocation row {i} has {} entries for {} goods",
                row.len(),
                self.num_goods()
            )));
        }
        if let Some(q) = row.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
            return Err(Error::Domain(format!(
                "allocation quantities must be finite and non-negative, got {q}"
            )));
        }
        let rho = self.rho;
        let logs = self.log_coefficients[i]
            .iter()
            .filter(|&&(j, _)| row[j] > 0.0)
            .map(move |&(j, lc)| rho * (lc + row[j].ln()));
        let log_u = log_sum_exp(logs);
        if log_u == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok((log_u / rho).exp())
    }
}

impl TryFrom<MarketSpec> for Market {
    type Error = Error;

    fn try_from(spec: MarketSpec) -> Result<Self> {
        if spec.budgets.len() != spec.num_buyers {
            return Err(Error::InvalidMarket(format!(
                "num_buyers = {} but {} budgets given",
                spec.num_buyers,
                spec.budgets.len()
            )));
        }
        if spec.coefficients.iter().any(|row| row.len() != spec.num_goods) {
            return Err(Error::InvalidMarket(format!(
                "every coefficient row must have num_goods = {} entries",
                spec.num_goods
            )));
        }
        Market::new(spec.budgets, spec.coefficients, spec.rho)
    }
}

impl From<Market> for MarketSpec {
    fn from(market: Market) -> Self {
        MarketSpec {
            num_goods: market.num_goods(),
            num_buyers: market.num_buyers(),
            rho: market.rho,
            budgets: market.budgets,
            coefficients: market.coefficients,
        }
    }
}

struct SpendingTerm {
    budget: f64,
    /// `ε ln c_ij`
    scaled_log_c: f64,
    /// `ln Σ_{k≠j} (c_ik/p_k)^ε`, `-inf` if `j` is the buyer's only good.
    log_rest: f64,
}

/// Spending on one good as a function of that good's own price, with all
/// other prices frozen.
pub(crate) struct SpendingCurve {
    epsilon: f64,
    terms: Vec<SpendingTerm>,
}

impl SpendingCurve {
    /// Spending at `alpha` and its derivative with respect to `alpha`.
    pub(crate) fn at(&self, alpha: f64) -> Result<(f64, f64)> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!(
                "price must be finite and strictly positive, got {alpha}"
            )));
        }
        let log_alpha = alpha.ln();
        let mut spending = 0.0;
        let mut slope = 0.0;
        for t in &self.terms {
            let z = t.scaled_log_c - self.epsilon * log_alpha - t.log_rest;
            let share = logistic(z);
            let rest = logistic(-z);
            spending += t.budget * share;
            slope += t.budget * share * rest;
        }
        Ok((spending, -self.epsilon / alpha * slope))
    }
}
