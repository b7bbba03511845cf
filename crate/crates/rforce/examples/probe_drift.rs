use rforce::diagnostics::{snapshot_run, SnapshotPhase};
use rforce::dynamics::Rank1Network;
use rforce::targets;
use rforce::training::TrainingSchedule;

fn main() {
    for &n in &[128usize, 256, 512] {
        let net = Rank1Network::rforce_init(n, 1, 1.5, 13).unwrap();
        let target = targets::multi_periodic_default(30.0, 0.1).unwrap();
        let schedule = TrainingSchedule { warmup: 120.0, train: 1.0, test: 1.0, dt: 0.1, update_interval: 2 };
        let snaps = snapshot_run(&net, &target, &schedule, 100, 1.0, 13).unwrap();
        let free: Vec<_> = snaps.iter().filter(|s| s.phase == SnapshotPhase::NoTraining && s.t >= 40.0).collect();
        let sorted = |s: &rforce::diagnostics::JacobianSnapshot| {
            let mut m: Vec<f64> = s.eigenvalues.iter().map(|e| e.norm()).collect();
            m.sort_by(|a, b| a.partial_cmp(b).unwrap()); m
        };
        print!("n={n}: drifts ");
        for pair in free.windows(2) {
            let a = sorted(pair[0]); let b = sorted(pair[1]);
            let worst = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
            print!("{worst:.4} ");
        }
        println!();
    }
}
