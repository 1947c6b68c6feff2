/// Generalised advantage estimation over one trajectory segment.
///
/// `dones[t]` marks that the episode ended at step `t`, so nothing after
/// `t` leaks into `A_t`. `bootstrap_value` is the value of the state that
/// follows the last step.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values length");
    assert_eq!(dones.len(), n, "dones length");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales `adv` to zero mean and unit standard deviation.
/// Single-element and constant inputs are only centred.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if n > 1 && std > 1e-12 {
            *a /= std;
        }
    }
}
