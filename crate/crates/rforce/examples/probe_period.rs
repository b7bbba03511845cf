use rforce::dynamics::Rank1Network;
use rforce::targets;
use rforce::training::{train_rank1, TrainingSchedule};

fn main() {
    let n = 400;
    let schedule = TrainingSchedule::default();
    for &period in &[6.0, 12.0, 24.0] {
        println!("--- base period {period}");
        let target = targets::multi_periodic(4, period, None, schedule.train + schedule.test + 1.0, schedule.dt).unwrap();
        for &init in &["normal", "rforce"] {
            for &g in &[1.0, 1.4, 1.5, 1.8] {
                let mut line = Vec::new();
                for seed in 0..4u64 {
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
}
