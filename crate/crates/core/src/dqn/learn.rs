use super::{td_target, DqnError, QNetwork, Result, Transition};
use crate::nn::{accumulate, zero_grads, Optimizer, ParamGrads, Parameterized};

/// Mean squared TD error over `batch` and its gradient with respect to the
/// online network. Only the taken action's Q-value receives gradient; the
/// target network is read only.
pub fn td_loss_and_grads(net: &mut QNetwork, target: &QNetwork, batch: &[&Transition], gamma: f64) -> Result<(f64, ParamGrads)> {
    if batch.is_empty() {
        return Err(DqnError::EmptyBatch);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = zero_grads(net);
    let mut loss = 0.0;
    for t in batch {
        let next_q = t.next.as_deref().map(|n| target.q_values(n)).transpose()?;
        let y = td_target(t.reward, gamma, next_q);
        let q = net.forward(&t.state)?;
        let a = t.action.index();
        let diff = q[a] - y;
        loss += diff * diff;
        let mut dq = [0.0; 2];
        dq[a] = 2.0 * diff;
        let g = net.backward(dq)?;
        accumulate(&mut grads, &g, scale);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(DqnError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

/// One optimizer step on the TD loss. Returns the pre-step loss.
pub fn learn_step(net: &mut QNetwork, target: &QNetwork, batch: &[&Transition], optimizer: &mut Optimizer, gamma: f64) -> Result<f64> {
    let (loss, grads) = td_loss_and_grads(net, target, batch, gamma)?;
    optimizer.apply(net, &grads)?;
    Ok(loss)
}

/// Copies the online parameters into the target when `step` is a multiple
/// of `r_sync`. Returns whether a copy happened.
pub fn sync_target(net: &QNetwork, target: &mut QNetwork, step: u64, r_sync: u64) -> bool {
    if r_sync == 0 || step % r_sync != 0 {
        return false;
    }
    for (dst, src) in target.params_mut().into_iter().zip(net.params()) {
        dst.copy_from_slice(src);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Action;
    use crate::nn::{flatten_grads, grad_check, OptimizerKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = QNetwork::random(1, 4, 5, &mut rng);
        let target = net.clone();
        let s = random_input(&mut rng, 5);
        let q = net.q_values(&s).unwrap();
        let t = Transition::new(s, Action::Anomaly, q[1], None);
        let (loss, grads) = td_loss_and_grads(&mut net, &target, &[&t], 0.9).unwrap();
        assert_eq!(loss, 0.0);
        assert!(flatten_grads(&grads).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn td_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = QNetwork::random(1, 5, 6, &mut rng);
        let target = QNetwork::random(1, 5, 6, &mut rng);
        let a = Transition::new(random_input(&mut rng, 6), Action::Normal, 0.4, Some(random_input(&mut rng, 6)));
        let b = Transition::new(random_input(&mut rng, 6), Action::Anomaly, -1.0, None);
        let batch = [&a, &b];
        let (_, grads) = td_loss_and_grads(&mut net, &target, &batch, 0.9).unwrap();
        let base = net.clone();
        let report = grad_check(
            |p| {
                let mut n = base.clone();
                n.set_flat_params(p).unwrap();
                td_loss_and_grads(&mut n, &target, &batch, 0.9).unwrap().0
            },
            &base.flat_params(),
            &flatten_grads(&grads),
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn target_untouched_by_learning() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = QNetwork::random(1, 4, 5, &mut rng);
        let target = net.clone();
        let sum = target.param_checksum();
        let t = Transition::new(random_input(&mut rng, 5), Action::Normal, 1.0, Some(random_input(&mut rng, 5)));
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-2);
        for _ in 0..20 {
            learn_step(&mut net, &target, &[&t], &mut opt, 0.9).unwrap();
        }
        assert_eq!(target.param_checksum(), sum);
        assert_ne!(net.param_checksum(), sum);
    }

    #[test]
    fn repeated_transition_error_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut net = QNetwork::random(1, 8, 6, &mut rng);
        let target = net.clone();
        let t = Transition::new(random_input(&mut rng, 6), Action::Anomaly, 1.5, Some(random_input(&mut rng, 6)));
        let y = td_target(t.reward, 0.9, Some(target.q_values(t.next.as_ref().unwrap()).unwrap()));
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1e-2);
        let mut errors = Vec::new();
        for _ in 0..500 {
            errors.push((net.q_values(&t.state).unwrap()[1] - y).abs());
            learn_step(&mut net, &target, &[&t], &mut opt, 0.9).unwrap();
        }
        for w in errors[50..].windows(2) {
            assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
        }
        assert!(errors[499] < errors[0]);
    }

    #[test]
    fn sync_only_on_multiples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = QNetwork::random(1, 4, 5, &mut rng);
        let mut target = QNetwork::random(1, 4, 5, &mut rng);
        let before = target.param_checksum();
        assert!(!sync_target(&net, &mut target, 7, 5));
        assert_eq!(target.param_checksum(), before);
        assert!(sync_target(&net, &mut target, 10, 5));
        for _ in 0..100 {
            let x = random_input(&mut rng, 5);
            assert_eq!(net.q_values(&x).unwrap(), target.q_values(&x).unwrap());
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut net = QNetwork::zeros(1, 2, 3);
        let target = net.clone();
        assert_eq!(td_loss_and_grads(&mut net, &target, &[], 0.9).unwrap_err(), DqnError::EmptyBatch);
    }
}
