use rforce::dynamics::Rank1Network;
use rforce::targets;
use rforce::training::{train_rank1, TrainingSchedule};

fn main() {
    let n = 400;
    let schedule = TrainingSchedule::default();
    let target = targets::multi_periodic_default(schedule.train + schedule.test + 1.0, schedule.dt).unwrap();
    for &init in &["normal", "rforce"] {
        for &g in &[1.0, 1.3, 1.4, 1.5, 1.8, 2.0] {
            let mut results = Vec::new();
            for seed in 0..3u64 {
                let start = std::time::Instant::now();
                let mut net = if init == "normal" {
                    Rank1Network::normal_init(n, 1, g, 1.0, seed).unwrap()
                } else {
                    Rank1Network::rforce_init(n, 1, g, seed).unwrap()
                };
                match train_rank1(&mut net, &target, &schedule, 1.0, seed) {
                    Ok(trace) => results.push(format!(
                        "tr={:.3} te={:.3} ({:.1}s)",
                        trace.train_mae, trace.test_mae, start.elapsed().as_secs_f64()
                    )),
                    Err(e) => results.push(format!("DIVERGED: {e}")),
                }
            }
            println!("{init} g={g}: {}", results.join(" | "));
        }
    }
}
