// Asynchronous dynamics under round-robin and random fair schedules,
// measured per epoch, with the trajectory written as CSV.

use fisher_brl::analysis::{decay_ratios, solve_equilibrium};
use fisher_brl::dynamics::{run, FixedProfile, Horizon, Schedule};
use fisher_brl::generate::MarketGenerator;
use fisher_brl::{BeliefProfile, PriceVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let market = MarketGenerator::new(4, 5, 0.5, 3).with_sparsity(0.2).generate()?;
    let n = market.num_goods();
    let p_star = solve_equilibrium(&market, 1e-12)?.prices;
    let p0 = PriceVector::uniform(n, market.price_bounds().log_midpoint())?;
    let beliefs = BeliefProfile::levels(&[1, 2, 2, 3])?;

    for (name, mut schedule) in [
        ("round-robin", Schedule::round_robin(n)),
        ("random fair", Schedule::random_fair(n, 6, 0.3, 8)?),
    ] {
        let mut source = FixedProfile::new(beliefs.clone());
        let trajectory = run(&market, &mut schedule, &mut source, &p0, Horizon::Epochs(12))?;
        let d = trajectory.epoch_distances(&p_star)?;
        println!("{name} (window {}): {} steps", schedule.window(), trajectory.len() - 1);
        for (e, r) in decay_ratios(&d).iter().enumerate() {
            println!("  epoch {:2}: d = {:.3e}  ratio {r:.3}", e + 1, d[e + 1]);
        }
        if name == "round-robin" {
            let mut csv = Vec::new();
            trajectory.write_csv(&mut csv, &market, Some(&p_star), &[format!("schedule={name}")])?;
            let text = String::from_utf8(csv).expect("csv is utf-8");
            text.lines().take(5).for_each(|l| println!("  | {l}"));
        }
    }
    Ok(())
}
