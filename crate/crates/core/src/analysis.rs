//! Metrics, equilibrium oracles, contraction estimates and decay fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::best_response::best_response_all;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::market::{Market, PriceVector};

/// Distances below this are dominated by solver rounding and are left out
/// of ratio maxima and decay fits.
pub const NOISE_FLOOR: f64 = 1e-9;

/// Default iteration cap of [`solve_equilibrium`].
pub const EQUILIBRIUM_MAX_ITERATIONS: usize = 100_000;

/// Default iteration cap of [`tatonnement_oracle`].
pub const TATONNEMENT_MAX_ITERATIONS: usize = 1_000_000;

/// Thompson metric `max_j |ln(p_j / q_j)|`.
pub fn thompson(p: &PriceVector, q: &PriceVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Argument(format!(
            "cannot compare price vectors of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter()
        .zip(q.iter())
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max))
}

/// Checks `‖p - q‖∞ ≤ (p_max²/p_min) d(p,q)` and
/// `‖p - q‖₂ ≤ √n (p_max²/p_min) d(p,q)` for `p, q` in the box.
pub fn metric_bounds_check(p: &PriceVector, q: &PriceVector, p_min: f64, p_max: f64) -> bool {
    let Ok(d) = thompson(p, q) else {
        return false;
    };
    let factor = p_max * p_max / p_min;
    let diffs: Vec<f64> = p.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).collect();
    let sup = diffs.iter().copied().fold(0.0, f64::max);
    let l2 = diffs.iter().map(|x| x * x).sum::<f64>().sqrt();
    // a few ulps of slack for the rounding in ln and sqrt
    let slack = 1.0 + 1e-12;
    sup <= factor * d * slack && l2 <= (p.len() as f64).sqrt() * factor * d * slack
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumMethod {
    FixedPoint,
    Tatonnement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub prices: PriceVector,
    /// `max_j |Σ_i x_ij - 1|` at `prices`.
    pub clearing_residual: f64,
    pub iterations: usize,
    pub method: EquilibriumMethod,
}

/// Equilibrium prices by iterating synchronous best response from the
/// centre of the price box.
///
/// Stops once the clearing residual is at most `tol` and the Thompson
/// distance to the fixed point, bounded by `ξ̂/(1-ξ̂)` times the last step
/// with `ξ̂` the largest of the last three step ratios, is at most `tol`.
pub fn solve_equilibrium(market: &Market, tol: f64) -> Result<EquilibriumResult> {
    solve_equilibrium_capped(market, tol, EQUILIBRIUM_MAX_ITERATIONS)
}

pub fn solve_equilibrium_capped(market: &Market, tol: f64, max_iterations: usize) -> Result<EquilibriumResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let bounds = market.price_bounds();
    let mut p = PriceVector::uniform(market.num_goods(), bounds.log_midpoint())?;
    let mut ratios = [0.0_f64; 3];
    let mut last_step: Option<f64> = None;
    for iteration in 1..=max_iterations {
        let next = best_response_all(market, &p)?;
        let step = thompson(&next, &p)?;
        if let Some(prev) = last_step.filter(|&s| s > 0.0) {
            ratios.rotate_left(1);
            ratios[2] = step / prev;
        }
        last_step = Some(step);
        p = next;

        let xi = ratios.iter().copied().fold(0.0, f64::max);
        let error_bound = if xi < 1.0 { step * xi / (1.0 - xi) } else { f64::INFINITY };
        let stalled = step <= 64.0 * f64::EPSILON;
        if error_bound <= tol || stalled {
            let clearing_residual = market.clearing_residual(&p)?;
            if clearing_residual <= tol {
                return Ok(EquilibriumResult {
                    prices: p,
                    clearing_residual,
                    iterations: iteration,
                    method: EquilibriumMethod::FixedPoint,
                });
            }
            if stalled {
                return Err(Error::Solver(format!(
                    "best-response iteration reached a fixed point with clearing residual \
                     {clearing_residual:e} above the requested {tol:e}"
                )));
            }
        }
    }
    Err(Error::Solver(format!(
        "best-response iteration did not converge in {max_iterations} iterations"
    )))
}

/// Multiplicative tâtonnement `p_j ← p_j (1 + step z_j)`, `z_j` the excess
/// demand of good `j`, clamped to the price box. Used only to cross-check
/// [`solve_equilibrium`].
pub fn tatonnement_oracle(market: &Market, step: f64, tol: f64) -> Result<EquilibriumResult> {
    tatonnement_oracle_capped(market, step, tol, TATONNEMENT_MAX_ITERATIONS)
}

pub fn tatonnement_oracle_capped(
    market: &Market,
    step: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<EquilibriumResult> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::Argument(format!(
            "tatonnement step must lie in (0, 1), got {step}"
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let bounds = market.price_bounds();
    let n = market.num_goods();
    let mut p = PriceVector::uniform(n, bounds.log_midpoint())?;
    for iteration in 0..=max_iterations {
        let x = market.demand(&p)?;
        let excess: Vec<f64> = (0..n).map(|j| x.good_total(j) - 1.0).collect();
        let residual = excess.iter().map(|z| z.abs()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::Oracle(format!(
                "tatonnement diverged at iteration {iteration}"
            )));
        }
        if residual <= tol {
            return Ok(EquilibriumResult {
                prices: p,
                clearing_residual: residual,
                iterations: iteration,
                method: EquilibriumMethod::Tatonnement,
            });
        }
        let next = p
            .iter()
            .zip(&excess)
            .map(|(&pj, &z)| bounds.clamp(pj * (1.0 + step * z)))
            .collect();
        p = PriceVector::new(next)?;
    }
    Err(Error::Oracle(format!(
        "tatonnement with step {step} did not reach residual {tol:e} in {max_iterations} iterations"
    )))
}

/// Sampled lower estimate of an update's Thompson contraction constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    /// Largest `d(F(p), F(q)) / d(p, q)` over usable pairs.
    pub ratio_max: f64,
    /// Pairs with `d(p, q)` above the noise floor.
    pub sample_count: usize,
    pub seed: u64,
}

/// `count` pairs drawn uniformly in log-price coordinates over the box.
pub fn sample_box_pairs(market: &Market, count: usize, seed: u64) -> Result<Vec<(PriceVector, PriceVector)>> {
    let bounds = market.price_bounds();
    let (lo, hi) = (bounds.p_min.ln(), bounds.p_max.ln());
    let n = market.num_goods();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<PriceVector> {
        PriceVector::new(
            (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    bounds.clamp((lo + u * (hi - lo)).exp())
                })
                .collect(),
        )
    };
    (0..count)
        .map(|_| Ok((draw(&mut rng)?, draw(&mut rng)?)))
        .collect()
}

/// Estimates the contraction constant of `update` over `pairs` sampled
/// box pairs. The same `(market, pairs, seed)` always yields the same pairs,
/// so estimates for different updates are directly comparable.
pub fn estimate_contraction<F>(market: &Market, mut update: F, pairs: usize, seed: u64) -> Result<ContractionEstimate>
where
    F: FnMut(&PriceVector) -> Result<PriceVector>,
{
    if pairs == 0 {
        return Err(Error::Argument("need at least one sample pair".into()));
    }
    let mut ratio_max = 0.0_f64;
    let mut sample_count = 0;
    for (p, q) in sample_box_pairs(market, pairs, seed)? {
        let d = thompson(&p, &q)?;
        if d <= NOISE_FLOOR {
            continue;
        }
        let ratio = thompson(&update(&p)?, &update(&q)?)? / d;
        ratio_max = ratio_max.max(ratio);
        sample_count += 1;
    }
    if sample_count == 0 {
        return Err(Error::InsufficientData(
            "every sampled pair was within the noise floor (degenerate price box)".into(),
        ));
    }
    Ok(ContractionEstimate {
        ratio_max,
        sample_count,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayUnit {
    Steps,
    Epochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares slope of `ln d` per unit; negative means geometric decay.
    pub rate: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of `ln d` against `x` over points with `d` above the
/// noise floor.
pub fn fit_log_linear(points: &[(f64, f64)]) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, d)| *d > NOISE_FLOOR && d.is_finite())
        .map(|&(x, d)| (x, d.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points above the noise floor, need at least 3",
            usable.len()
        )));
    }
    let k = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let rate = sxy / sxx;
    let intercept = mean_y - rate * mean_x;
    let sse: f64 = usable
        .iter()
        .map(|&(x, y)| (y - intercept - rate * x).powi(2))
        .sum();
    Ok(DecayFit {
        rate,
        residual: (sse / k).sqrt(),
        points: usable.len(),
    })
}

/// Fits the decay of `d(p^t, p*)` per step or per epoch.
pub fn fit_decay(trajectory: &Trajectory, p_star: &PriceVector, unit: DecayUnit) -> Result<DecayFit> {
    let distances = match unit {
        DecayUnit::Steps => trajectory.distances(p_star)?,
        DecayUnit::Epochs => trajectory.epoch_distances(p_star)?,
    };
    let points: Vec<(f64, f64)> = distances
        .into_iter()
        .enumerate()
        .map(|(t, d)| (t as f64, d))
        .collect();
    fit_log_linear(&points)
}

/// `d_{t+1} / d_t` for every `t` with `d_t` above the noise floor.
pub fn decay_ratios(distances: &[f64]) -> Vec<f64> {
    distances
        .windows(2)
        .filter(|w| w[0] > NOISE_FLOOR)
        .map(|w| w[1] / w[0])
        .collect()
}

/// SHA-256 of the market's canonical JSON form, hex encoded.
pub fn market_hash(market: &Market) -> String {
    let json = serde_json::to_vec(market).expect("markets always serialise");
    hex(&Sha256::digest(json))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledContraction {
    pub label: String,
    #[serde(flatten)]
    pub estimate: ContractionEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDecay {
    pub label: String,
    pub unit: DecayUnit,
    #[serde(flatten)]
    pub fit: DecayFit,
}

/// Exported analysis summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub market_hash: String,
    pub method: EquilibriumMethod,
    pub p_star: PriceVector,
    pub residual: f64,
    #[serde(default)]
    pub contraction: Vec<LabeledContraction>,
    #[serde(default)]
    pub decay: Vec<LabeledDecay>,
}

impl AnalysisReport {
    pub fn new(market: &Market, equilibrium: &EquilibriumResult) -> Self {
        Self {
            market_hash: market_hash(market),
            method: equilibrium.method,
            p_star: equilibrium.prices.clone(),
            residual: equilibrium.clearing_residual,
            contraction: Vec::new(),
            decay: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> PriceVector {
        PriceVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn thompson_examples() {
        assert_eq!(thompson(&pv(&[1.0, 2.0]), &pv(&[2.0, 2.0])).unwrap(), 2.0_f64.ln());
        let p = pv(&[0.3, 7.0]);
        assert_eq!(thompson(&p, &p).unwrap(), 0.0);
        assert!(thompson(&pv(&[1.0]), &pv(&[1.0, 2.0])).is_err());
        let q = pv(&[0.9, 2.0]);
        let scaled = thompson(&p.scaled(2.0).unwrap(), &q.scaled(2.0).unwrap()).unwrap();
        assert!((scaled - thompson(&p, &q).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn metric_bounds_examples() {
        let p = pv(&[1.0, 1.0]);
        assert!(metric_bounds_check(&p, &p, 0.5, 3.0));
        // ‖p-q‖∞ = 1 ≤ (9/0.5) ln 2
        assert!(metric_bounds_check(&p, &pv(&[2.0, 2.0]), 0.5, 3.0));
    }

    #[test]
    fn symmetric_equilibrium() {
        // 3 buyers with budget 2 over 4 identical goods: p* = 6/4.
        let market = Market::new(vec![2.0; 3], vec![vec![1.0; 4]; 3], 0.4).unwrap();
        let eq = solve_equilibrium(&market, 1e-12).unwrap();
        for &p in eq.prices.iter() {
            assert!((p - 1.5).abs() < 1e-9);
        }
        assert!(eq.clearing_residual <= 1e-12);
        let tat = tatonnement_oracle(&market, 0.1, 1e-11).unwrap();
        assert!(thompson(&tat.prices, &eq.prices).unwrap() < 1e-9);
    }

    #[test]
    fn single_good_equilibrium() {
        let market = Market::new(vec![4.0], vec![vec![1.0]], 0.5).unwrap();
        let eq = solve_equilibrium(&market, 1e-12).unwrap();
        assert_eq!(eq.prices.as_slice(), &[4.0]);
    }

    #[test]
    fn tatonnement_is_a_no_op_at_equilibrium() {
        let market = Market::new(vec![1.0], vec![vec![1.0, 1.0]], 0.5).unwrap();
        // p* = (0.5, 0.5) is the box midpoint only in log terms; start there directly.
        let x = market.demand(&pv(&[0.5, 0.5])).unwrap();
        for j in 0..2 {
            assert!((x.good_total(j) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn argument_errors() {
        let market = Market::new(vec![1.0], vec![vec![1.0, 1.0]], 0.5).unwrap();
        assert!(solve_equilibrium(&market, 0.0).is_err());
        assert!(tatonnement_oracle(&market, 0.0, 1e-9).is_err());
        assert!(matches!(
            tatonnement_oracle_capped(&market, 0.1, 1e-12, 2),
            Err(Error::Oracle(_))
        ));
        assert!(matches!(
            solve_equilibrium_capped(&market, 1e-12, 1),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn identity_map_has_ratio_one() {
        let market = Market::new(vec![1.0, 2.0], vec![vec![1.0, 0.2], vec![0.3, 1.0]], 0.5).unwrap();
        let est = estimate_contraction(&market, |p| Ok(p.clone()), 200, 3).unwrap();
        assert_eq!(est.ratio_max, 1.0);
        assert_eq!(est.sample_count, 200);
    }

    #[test]
    fn degenerate_box_has_no_pairs() {
        let market = Market::new(vec![4.0], vec![vec![1.0]], 0.5).unwrap();
        assert!(matches!(
            estimate_contraction(&market, |p| Ok(p.clone()), 10, 3),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn exact_geometric_fit() {
        let points: Vec<(f64, f64)> = (0..20).map(|t| (t as f64, 0.5_f64.powi(t))).collect();
        let fit = fit_log_linear(&points).unwrap();
        assert!((fit.rate - 0.5_f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.points, 20);
    }

    #[test]
    fn fit_needs_points_above_noise_floor() {
        let points = vec![(0.0, 1e-12), (1.0, 0.0), (2.0, 1e-10), (3.0, 1.0)];
        assert!(matches!(fit_log_linear(&points), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn decay_ratios_skip_noise() {
        assert_eq!(decay_ratios(&[1.0, 0.5, 1e-10, 1e-11]), vec![0.5, 1e-10 / 0.5]);
    }
}
