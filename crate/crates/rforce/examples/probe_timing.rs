use rforce::dynamics::Rank1Network;
use rforce::spectral_init::generate_orthogonal_basis;
use rforce::targets;
use rforce::training::{train_rank1, TrainingSchedule};

fn main() {
    for &n in &[256usize, 400, 1000] {
        let t0 = std::time::Instant::now();
        let _ = generate_orthogonal_basis(n, 1).unwrap();
        println!("basis n={n}: {:.1}s", t0.elapsed().as_secs_f64());
    }
    let schedule = TrainingSchedule::default();
    let target = targets::multi_periodic(4, 15.0, None, schedule.train + schedule.test + 1.0, schedule.dt).unwrap();
    for &n in &[400usize, 1000] {
        let t0 = std::time::Instant::now();
        let mut net = Rank1Network::normal_init(n, 1, 1.4, 0.1, 0).unwrap();
        let build = t0.elapsed().as_secs_f64();
        let t1 = std::time::Instant::now();
        let tr = train_rank1(&mut net, &target, &schedule, 1.0, 0).unwrap();
        println!("normal n={n}: build {:.1}s train {:.1}s te={:.3}", build, t1.elapsed().as_secs_f64(), tr.test_mae);
        let t0 = std::time::Instant::now();
        let mut net = Rank1Network::rforce_init(n, 1, 1.5, 0).unwrap();
        let build = t0.elapsed().as_secs_f64();
        let t1 = std::time::Instant::now();
        let tr = train_rank1(&mut net, &target, &schedule, 1.0, 0).unwrap();
        println!("rforce n={n}: build {:.1}s train {:.1}s te={:.3}", build, t1.elapsed().as_secs_f64(), tr.test_mae);
    }
}
