use rforce::dynamics::Rank1Network;
use rforce::targets;
use rforce::training::{train_rank1, TrainingSchedule};

fn main() {
    let schedule = TrainingSchedule::default();
    let dur = schedule.train + schedule.test + 1.0;
    for &(n, period) in &[(1000usize, 12.0), (1000, 15.0), (400, 15.0)] {
        println!("--- n={n} period={period}");
        let target = targets::multi_periodic(4, period, None, dur, schedule.dt).unwrap();
        for &(init, g) in &[
            ("normal", 1.0), ("normal", 1.4), ("normal", 1.8),
            ("rforce", 1.0), ("rforce", 1.4), ("rforce", 1.5), ("rforce", 1.6), ("rforce", 1.8),
        ] {
            let mut line = Vec::new();
            for seed in 0..3u64 {
                let mut net = if init == "normal" {
                    Rank1Network::normal_init(n, 1, g, 0.1, seed).unwrap()
                } else {
                    Rank1Network::rforce_init(n, 1, g, seed).unwrap()
                };
                match train_rank1(&mut net, &target, &schedule, 1.0, seed) {
                    Ok(trace) => line.push(format!("{:.3}", trace.test_mae)),
                    Err(_) => line.push("DIV".into()),
                }
            }
            println!("  {init} g={g}: te = {}", line.join(" "));
        }
    }
}
