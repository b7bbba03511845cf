//! Recursive-least-squares (FORCE) training.
//!
//! A single inverse-correlation matrix `P` is shared by every learner that
//! sees the same presynaptic vector `r(t)`: all readout columns, and in the
//! rank-N case all reservoir rows as well. Updates run every
//! `update_interval` steps during the training phase:
//!
//! ```text
//! c  = 1 / (1 + r' P r)
//! P <- P - c (P r)(P r)'
//! w_j <- w_j - e_j * (P r after the update)
//! ```
//!
//! with the pre-update readout error `e = z - f`. After an update the
//! readout is recomputed from the fresh weights before it is fed back, so
//! the loop feeds the corrected output from the very first updates.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{check_finite, NetworkState, Rank1Network, RankNNetwork, INITIAL_STATE_STD};
use crate::error::{Error, Result};
use crate::targets::TargetSeries;
use serde::{Deserialize, Serialize};

/// Phase labels used in errors and records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainPhase {
    Warmup,
    Train,
    Test,
}

impl TrainPhase {
    pub fn name(self) -> &'static str {
        match self {
            TrainPhase::Warmup => "warmup",
            TrainPhase::Train => "train",
            TrainPhase::Test => "test",
        }
    }
}

/// Phase durations (time units) and stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub warmup: f64,
    pub train: f64,
    pub test: f64,
    pub dt: f64,
    /// Steps between weight updates during the training phase.
    pub update_interval: usize,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        TrainingSchedule {
            warmup: 100.0,
            train: 1000.0,
            test: 1000.0,
            dt: 0.1,
            update_interval: 2,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup > 0.0 && self.train > 0.0 && self.test > 0.0) {
            return Err(Error::argument("all schedule durations must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::argument("dt must be positive"));
        }
        if self.update_interval == 0 {
            return Err(Error::argument("update interval must be >= 1"));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> usize {
        (self.warmup / self.dt).round() as usize
    }

    pub fn train_steps(&self) -> usize {
        (self.train / self.dt).round() as usize
    }

    pub fn test_steps(&self) -> usize {
        (self.test / self.dt).round() as usize
    }
}

/// Shared RLS state.
#[derive(Clone, Debug)]
pub struct RlsTrainer {
    /// Inverse-correlation estimate, `P(0) = I / alpha`.
    pub p_matrix: DMatrix<f64>,
    pub alpha: f64,
    pub update_interval: usize,
    pub phase: TrainPhase,
    gain_vec: DVector<f64>,
}

impl RlsTrainer {
    pub fn new(n: usize, alpha: f64, update_interval: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::argument("alpha must be positive"));
        }
        if update_interval == 0 {
            return Err(Error::argument("update interval must be >= 1"));
        }
        Ok(RlsTrainer {
            p_matrix: DMatrix::identity(n, n) / alpha,
            alpha,
            update_interval,
            phase: TrainPhase::Warmup,
            gain_vec: DVector::zeros(n),
        })
    }

    /// One RLS update of `P` and the given weight columns against the
    /// pre-update errors. Returns the Frobenius norm of the weight change.
    pub fn rls_update(
        &mut self,
        r: &DVector<f64>,
        errors: &DVector<f64>,
        weights: &mut DMatrix<f64>,
    ) -> Result<f64> {
        self.update_p(r)?;
        let delta = self.apply_column_updates(errors, weights);
        Ok(delta)
    }

    /// Internal split: contract `P` along `r`, leaving the post-update gain
    /// `P r` in scratch.
    fn update_p(&mut self, r: &DVector<f64>) -> Result<()> {
        self.gain_vec.gemv(1.0, &self.p_matrix, r, 0.0);
        let q = r.dot(&self.gain_vec);
        if !q.is_finite() {
            return Err(Error::Divergence {
                phase: "train",
                step: 0,
                max_abs: f64::INFINITY,
            });
        }
        let c = 1.0 / (1.0 + q);
        self.p_matrix.ger(-c, &self.gain_vec, &self.gain_vec, 1.0);
        // gain_vec becomes P r with the updated P.
        self.gain_vec *= c;
        Ok(())
    }

    fn apply_column_updates(&self, errors: &DVector<f64>, weights: &mut DMatrix<f64>) -> f64 {
        for (j, e) in errors.iter().enumerate() {
            weights.column_mut(j).axpy(-e, &self.gain_vec, 1.0);
        }
        errors.norm() * self.gain_vec.norm()
    }

    /// Post-update gain vector `P r` from the last update.
    pub fn last_gain(&self) -> &DVector<f64> {
        &self.gain_vec
    }

    /// Max-norm deviation of `P` from symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.p_matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.p_matrix[(i, j)] - self.p_matrix[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Per-run error traces and summary statistics.
#[derive(Clone, Debug, Default)]
pub struct ErrorTrace {
    /// Channel-mean absolute error at every training step (updates active).
    pub train_abs_err: Vec<f64>,
    /// Channel-mean absolute error at every test step, against the clean
    /// reference.
    pub test_abs_err: Vec<f64>,
    pub train_mae: f64,
    pub test_mae: f64,
    pub per_channel_test_mae: Vec<f64>,
    /// Frobenius norm of each applied weight update, in order.
    pub weight_update_norms: Vec<f64>,
}

impl ErrorTrace {
    fn finish(
        mut self,
        test_channel_sums: &[f64],
        test_steps: usize,
    ) -> Self {
        self.train_mae = mean(&self.train_abs_err);
        self.test_mae = mean(&self.test_abs_err);
        self.per_channel_test_mae = test_channel_sums
            .iter()
            .map(|s| s / test_steps.max(1) as f64)
            .collect();
        self
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// FORCE-train the readout of a rank-1 network. The reservoir and feedback
/// weights stay frozen; only `w_readout` changes.
pub fn train_rank1(
    net: &mut Rank1Network,
    target: &TargetSeries,
    schedule: &TrainingSchedule,
    alpha: f64,
    seed: u64,
) -> Result<ErrorTrace> {
    schedule.validate()?;
    if target.channels() != net.k() {
        return Err(Error::argument(format!(
            "target has {} channels but the network reads out {}",
            target.channels(),
            net.k()
        )));
    }
    let (n, k) = (net.n(), net.k());
    let dt = schedule.dt;
    let mut trainer = RlsTrainer::new(n, alpha, schedule.update_interval)?;
    let mut x = NetworkState::from_seed(n, INITIAL_STATE_STD, seed).x;

    let mut r = DVector::zeros(n);
    let mut z = DVector::zeros(k);
    let mut errors = DVector::zeros(k);
    let mut drive = DVector::zeros(n);
    let mut trace = ErrorTrace::default();
    let mut test_channel_sums = vec![0.0f64; k];

    let step_rank1 = |x: &mut DVector<f64>,
                      r: &DVector<f64>,
                      z: &DVector<f64>,
                      drive: &mut DVector<f64>,
                      net: &Rank1Network| {
        drive.gemv(net.gain, &net.reservoir, r, 0.0);
        drive.gemv(1.0, &net.w_feedback, z, 1.0);
        x.axpy(dt, drive, 1.0 - dt);
    };

    // Warmup: free evolution, no updates, no error bookkeeping.
    trainer.phase = TrainPhase::Warmup;
    for s in 0..schedule.warmup_steps() {
        tanh_into(&x, &mut r);
        z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
        step_rank1(&mut x, &r, &z, &mut drive, net);
        check_finite(&x, "warmup", s as u64 + 1)?;
    }

    // Training: error against the target, periodic RLS updates, feedback
    // carries the freshest readout.
    trainer.phase = TrainPhase::Train;
    let train_steps = schedule.train_steps();
    for s in 0..train_steps {
        tanh_into(&x, &mut r);
        z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
        let mut abs_sum = 0.0;
        for j in 0..k {
            let e = z[j] - target.training_value(s, j);
            errors[j] = e;
            abs_sum += e.abs();
        }
        trace.train_abs_err.push(abs_sum / k as f64);
        if s % schedule.update_interval == 0 {
            let delta = trainer.rls_update(&r, &errors, &mut net.w_readout)?;
            trace.weight_update_norms.push(delta);
            z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
        }
        step_rank1(&mut x, &r, &z, &mut drive, net);
        check_finite(&x, "train", s as u64 + 1)?;
    }

    // Test: frozen weights, error against the clean reference, target phase
    // continues past the training phase.
    trainer.phase = TrainPhase::Test;
    let test_steps = schedule.test_steps();
    for s in 0..test_steps {
        tanh_into(&x, &mut r);
        z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
        let mut abs_sum = 0.0;
        for j in 0..k {
            let e = (z[j] - target.reference_value(train_steps + s, j)).abs();
            test_channel_sums[j] += e;
            abs_sum += e;
        }
        trace.test_abs_err.push(abs_sum / k as f64);
        step_rank1(&mut x, &r, &z, &mut drive, net);
        check_finite(&x, "test", s as u64 + 1)?;
    }

    Ok(trace.finish(&test_channel_sums, test_steps))
}

/// FORCE-train a rank-N network: readout columns and reservoir rows share
/// the same inverse-correlation matrix. Row `i` of the reservoir receives
/// `-(E e)_i (P r)'` where `E` is the fixed error-injection matrix.
pub fn train_rank_n(
    net: &mut RankNNetwork,
    target: &TargetSeries,
    schedule: &TrainingSchedule,
    alpha: f64,
    seed: u64,
) -> Result<ErrorTrace> {
    schedule.validate()?;
    if target.channels() != net.k() {
        return Err(Error::argument(format!(
            "target has {} channels but the network reads out {}",
            target.channels(),
            net.k()
        )));
    }
    let (n, k) = (net.n(), net.k());
    let dt = schedule.dt;
    let mut trainer = RlsTrainer::new(n, alpha, schedule.update_interval)?;
    let mut x = NetworkState::from_seed(n, INITIAL_STATE_STD, seed).x;

    let mut r = DVector::zeros(n);
    let mut z = DVector::zeros(k);
    let mut errors = DVector::zeros(k);
    let mut injected = DVector::zeros(n);
    let mut drive = DVector::zeros(n);
    let mut trace = ErrorTrace::default();
    let mut test_channel_sums = vec![0.0f64; k];

    trainer.phase = TrainPhase::Warmup;
    for s in 0..schedule.warmup_steps() {
        tanh_into(&x, &mut r);
        drive.gemv(net.gain, &net.reservoir, &r, 0.0);
        x.axpy(dt, &drive, 1.0 - dt);
        check_finite(&x, "warmup", s as u64 + 1)?;
    }

    trainer.phase = TrainPhase::Train;
    let train_steps = schedule.train_steps();
    for s in 0..train_steps {
        tanh_into(&x, &mut r);
        z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
        let mut abs_sum = 0.0;
        for j in 0..k {
            let e = z[j] - target.training_value(s, j);
            errors[j] = e;
            abs_sum += e.abs();
        }
        trace.train_abs_err.push(abs_sum / k as f64);
        if s % schedule.update_interval == 0 {
            let delta_w = trainer.rls_update(&r, &errors, &mut net.w_readout)?;
            // Reservoir rows: inject the readout error through the fixed
            // projection and subtract the shared gain direction.
            injected.gemv(1.0, &net.error_injection, &errors, 0.0);
            net.reservoir.ger(-1.0, &injected, trainer.last_gain(), 1.0);
            let delta_m = injected.norm() * trainer.last_gain().norm();
            trace.weight_update_norms.push((delta_w * delta_w + delta_m * delta_m).sqrt());
        }
        drive.gemv(net.gain, &net.reservoir, &r, 0.0);
        x.axpy(dt, &drive, 1.0 - dt);
        check_finite(&x, "train", s as u64 + 1)?;
    }

    trainer.phase = TrainPhase::Test;
    let test_steps = schedule.test_steps();
    for s in 0..test_steps {
        tanh_into(&x, &mut r);
        z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
        let mut abs_sum = 0.0;
        for j in 0..k {
            let e = (z[j] - target.reference_value(train_steps + s, j)).abs();
            test_channel_sums[j] += e;
            abs_sum += e;
        }
        trace.test_abs_err.push(abs_sum / k as f64);
        drive.gemv(net.gain, &net.reservoir, &r, 0.0);
        x.axpy(dt, &drive, 1.0 - dt);
        check_finite(&x, "test", s as u64 + 1)?;
    }

    Ok(trace.finish(&test_channel_sums, test_steps))
}

pub(crate) fn tanh_into(x: &DVector<f64>, r: &mut DVector<f64>) {
    for (out, v) in r.iter_mut().zip(x.iter()) {
        *out = v.tanh();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets;
    use nalgebra::DMatrix;

    #[test]
    fn rls_scalar_hand_case() {
        let mut trainer = RlsTrainer::new(1, 1.0, 1).unwrap();
        let r = DVector::from_vec(vec![1.0]);
        let e = DVector::from_vec(vec![0.5]);
        let mut w = DMatrix::zeros(1, 1);
        trainer.rls_update(&r, &e, &mut w).unwrap();
        assert!((trainer.p_matrix[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((w[(0, 0)] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_error_update_contracts_p_only() {
        let mut trainer = RlsTrainer::new(4, 1.0, 1).unwrap();
        let r = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
        let e = DVector::zeros(2);
        let mut w = DMatrix::from_fn(4, 2, |i, j| (i + j) as f64 * 0.1);
        let before = w.clone();
        let p0 = trainer.p_matrix.clone();
        trainer.rls_update(&r, &e, &mut w).unwrap();
        assert_eq!(w, before);
        let q0 = (&p0 * &r).dot(&r);
        let q1 = (&trainer.p_matrix * &r).dot(&r);
        assert!(q1 < q0);
    }

    #[test]
    fn repeated_updates_shrink_quadratic_form() {
        let mut trainer = RlsTrainer::new(3, 1.0, 1).unwrap();
        let r = DVector::from_vec(vec![0.3, -1.0, 0.7]);
        let e = DVector::zeros(1);
        let mut w = DMatrix::zeros(3, 1);
        let mut prev = f64::INFINITY;
        for _ in 0..20 {
            trainer.rls_update(&r, &e, &mut w).unwrap();
            let q = (&trainer.p_matrix * &r).dot(&r);
            assert!(q < prev);
            // Scalar recursion q <- q / (1 + q) stays nonnegative.
            assert!(q >= 0.0);
            prev = q;
        }
    }

    #[test]
    fn p_stays_symmetric_and_psd() {
        let mut trainer = RlsTrainer::new(40, 1.0, 1).unwrap();
        let mut w = DMatrix::zeros(40, 1);
        let mut rng_state = 1u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..500 {
            let r = DVector::from_fn(40, |_, _| next());
            let e = DVector::from_vec(vec![next() * 0.1]);
            trainer.rls_update(&r, &e, &mut w).unwrap();
            let probe = DVector::from_fn(40, |_, _| next());
            assert!((&trainer.p_matrix * &probe).dot(&probe) >= -1e-10);
        }
        assert!(trainer.symmetry_defect() < 1e-8);
    }

    #[test]
    fn zero_target_keeps_zero_weights() {
        let mut net = Rank1Network::normal_init(50, 1, 1.2, 1.0, 3).unwrap();
        let zero_target = targets::TargetSeries {
            values: DMatrix::zeros(100, 1),
            clean: None,
            dt: 0.1,
            name: "zero".into(),
            normalization: None,
        };
        let schedule = TrainingSchedule {
            warmup: 5.0,
            train: 20.0,
            test: 10.0,
            dt: 0.1,
            update_interval: 2,
        };
        let trace = train_rank1(&mut net, &zero_target, &schedule, 1.0, 3).unwrap();
        assert_eq!(trace.train_mae, 0.0);
        assert!(net.w_readout.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rank1_reservoir_is_immutable() {
        let mut net = Rank1Network::normal_init(60, 1, 1.4, 1.0, 7).unwrap();
        let sum_before = net.reservoir_checksum();
        let target = targets::multi_periodic_default(120.0, 0.1).unwrap();
        let schedule = TrainingSchedule {
            warmup: 10.0,
            train: 60.0,
            test: 30.0,
            dt: 0.1,
            update_interval: 2,
        };
        train_rank1(&mut net, &target, &schedule, 1.0, 7).unwrap();
        assert_eq!(net.reservoir_checksum(), sum_before);
        assert!(net.w_readout.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn rank_n_zero_injection_keeps_reservoir() {
        let mut net = RankNNetwork::normal_init(40, 1, 1.4, 1.0, 5).unwrap();
        net.error_injection.fill(0.0);
        let before = net.reservoir.clone();
        let target = targets::multi_periodic_default(120.0, 0.1).unwrap();
        let schedule = TrainingSchedule {
            warmup: 10.0,
            train: 40.0,
            test: 20.0,
            dt: 0.1,
            update_interval: 2,
        };
        train_rank_n(&mut net, &target, &schedule, 1.0, 5).unwrap();
        assert_eq!(net.reservoir, before);
        assert!(net.w_readout.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn channel_mismatch_is_an_argument_error() {
        let mut net = Rank1Network::normal_init(20, 2, 1.0, 1.0, 1).unwrap();
        let target = targets::multi_periodic_default(60.0, 0.1).unwrap();
        let err = train_rank1(&mut net, &target, &TrainingSchedule::default(), 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }
}
