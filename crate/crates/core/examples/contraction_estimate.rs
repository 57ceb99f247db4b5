// Sampled Thompson contraction ratios of best response and of BRL updates
// on the same box pairs.

use fisher_brl::analysis::estimate_contraction;
use fisher_brl::beliefs::{brl_update, random_profile};
use fisher_brl::best_response::best_response_all;
use fisher_brl::generate::MarketGenerator;
use fisher_brl::BeliefProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fisher_brl::Result<()> {
    let market = MarketGenerator::new(4, 6, 0.8, 5).generate()?;
    let n = market.num_goods();
    let (pairs, seed) = (500, 7);

    let br = estimate_contraction(&market, |p| best_response_all(&market, p), pairs, seed)?;
    println!("best response: ratio {:.4} over {} pairs", br.ratio_max, br.sample_count);
    for k in 1..=3 {
        let profile = BeliefProfile::uniform_level(k, n)?;
        let est = estimate_contraction(&market, |p| brl_update(&market, &profile, p), pairs, seed)?;
        println!("level {k}: ratio {:.4}", est.ratio_max);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let profile = random_profile(&mut rng, n, 4, 0.5)?;
    let est = estimate_contraction(&market, |p| brl_update(&market, &profile, p), pairs, seed)?;
    println!("random depth-4 tree: ratio {:.4}", est.ratio_max);
    Ok(())
}
