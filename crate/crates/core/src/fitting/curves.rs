use nalgebra::DMatrix;

use super::lm::{levenberg_marquardt, LmOptions, LmOutcome};
use super::{FitError, FitParam, FitResult};

pub(super) fn check_xy(x: &[f64], y: &[f64], sigma: Option<&[f64]>, min_points: usize) -> Result<(), FitError> {
    if x.len() != y.len() {
        return Err(FitError::InvalidInput(format!(
            "{} x values but {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_points {
        return Err(FitError::InvalidInput(format!(
            "need at least {min_points} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::InvalidInput("non-finite data".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::InvalidInput("x must be strictly ascending".into()));
    }
    if let Some(s) = sigma {
        if s.len() != y.len() || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(FitError::InvalidInput("sigma must be positive, one per point".into()));
        }
    }
    Ok(())
}

fn check_not_flat(y: &[f64]) -> Result<(), FitError> {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let scale = lo.abs().max(hi.abs());
    if hi - lo <= 1e-12 * scale || hi == lo {
        return Err(FitError::Unidentifiable(
            "data are constant; the time constant is undetermined".into(),
        ));
    }
    Ok(())
}

fn tail_mean(y: &[f64]) -> f64 {
    let k = (y.len() / 5).max(2).min(y.len());
    y[y.len() - k..].iter().sum::<f64>() / k as f64
}

/// Packs an LM outcome as named natural-unit parameters. `map` returns the
/// natural values and their Jacobian with respect to the internal ones.
pub(super) fn finish(
    out: &LmOutcome,
    names: &[&str],
    map: impl Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
) -> Result<FitResult, FitError> {
    let cov = out.covariance()?;
    let (values, jac) = map(&out.x);
    let cov_nat = &jac * cov * jac.transpose();
    Ok(FitResult {
        params: names
            .iter()
            .zip(values)
            .enumerate()
            .map(|(k, (n, v))| FitParam {
                name: (*n).to_string(),
                value: v,
                stderr: cov_nat[(k, k)].max(0.0).sqrt(),
            })
            .collect(),
        rss: out.rss,
        converged: out.converged,
        iterations: out.iterations,
    })
}

fn weight(sigma: Option<&[f64]>, i: usize) -> f64 {
    sigma.map_or(1.0, |s| 1.0 / s[i])
}

/// Fits `A e^{−t/τ} + B`. `A` refers to `t = 0`.
pub fn fit_exponential_decay(t: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitResult, FitError> {
    check_xy(t, y, sigma, 4)?;
    check_not_flat(y)?;
    let t0 = t[0];
    let s: Vec<f64> = t.iter().map(|v| v - t0).collect();
    let span = s[s.len() - 1];
    let b0 = tail_mean(y);
    let a0 = y[0] - b0;
    let tau0 = s
        .iter()
        .zip(y)
        .find(|(_, v)| (*v - b0).abs() <= a0.abs() / std::f64::consts::E)
        .map(|(s, _)| *s)
        .filter(|v| *v > 0.0)
        .unwrap_or(0.3 * span);
    let f = |p: &[f64]| -> Result<Vec<f64>, FitError> {
        let tau = p[1].exp();
        Ok(s.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (s, y))| (p[0] * (-s / tau).exp() + p[2] - y) * weight(sigma, i))
            .collect())
    };
    let out = levenberg_marquardt(&f, &[a0, tau0.ln(), b0], &LmOptions::default())?;
    finish(&out, &["A", "tau", "B"], |p| {
        let tau = p[1].exp();
        let shift = (t0 / tau).exp();
        let a = p[0] * shift;
        let mut j = DMatrix::zeros(3, 3);
        j[(0, 0)] = shift;
        j[(0, 1)] = a * t0 / tau;
        j[(1, 1)] = tau;
        j[(2, 2)] = 1.0;
        (vec![a, tau, p[2]], j)
    })
}

/// Fits `A(1 − e^{−t/T1}) + B` with `A > 0`.
pub fn fit_saturation_recovery(t: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitResult, FitError> {
    check_xy(t, y, sigma, 4)?;
    check_not_flat(y)?;
    let n = y.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let slope: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    if slope <= 0.0 {
        return Err(FitError::WrongSign(
            "signal decreases with delay; expected a recovery".into(),
        ));
    }
    let start = 0.5 * (y[0] + y[1]);
    let end = tail_mean(y);
    let a0 = (end - start).max(1e-12 * end.abs().max(1.0));
    let t1_0 = t
        .iter()
        .zip(y)
        .find(|(_, v)| **v - start >= (1.0 - (-1.0f64).exp()) * a0)
        .map(|(x, _)| x - t[0])
        .filter(|v| *v > 0.0)
        .unwrap_or(0.3 * (t[t.len() - 1] - t[0]));
    let b0 = start - a0 * (1.0 - (-t[0] / t1_0).exp());
    let f = |p: &[f64]| -> Result<Vec<f64>, FitError> {
        let (a, t1) = (p[0].exp(), p[1].exp());
        Ok(t.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (t, y))| (-a * (-t / t1).exp_m1() + p[2] - y) * weight(sigma, i))
            .collect())
    };
    let out = levenberg_marquardt(&f, &[a0.ln(), t1_0.ln(), b0], &LmOptions::default())?;
    finish(&out, &["T1", "A", "B"], |p| {
        let (a, t1) = (p[0].exp(), p[1].exp());
        let mut j = DMatrix::zeros(3, 3);
        j[(0, 1)] = t1;
        j[(1, 0)] = a;
        j[(2, 2)] = 1.0;
        (vec![t1, a, p[2]], j)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn decay(t: f64) -> f64 {
        (-t / 17.6).exp() + 0.1
    }

    #[test]
    fn noiseless_decay_is_exact() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| decay(*t)).collect();
        let r = fit_exponential_decay(&t, &y, None).unwrap();
        assert!(r.converged);
        assert!((r.value("tau") - 17.6).abs() < 1e-9);
        assert!((r.value("A") - 1.0).abs() < 1e-9);
        assert!((r.value("B") - 0.1).abs() < 1e-9);
    }

    #[test]
    fn decay_is_translation_equivariant() {
        let t: Vec<f64> = (0..80).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| decay(*t)).collect();
        let shifted: Vec<f64> = t.iter().map(|t| t + 250.0).collect();
        let a = fit_exponential_decay(&t, &y, None).unwrap();
        let b = fit_exponential_decay(&shifted, &y, None).unwrap();
        assert!((a.value("tau") - b.value("tau")).abs() < 1e-8);
    }

    #[test]
    fn noisy_decay_coverage() {
        let t: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut inside = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = t.iter().map(|t| decay(*t) + noise.sample(&mut rng)).collect();
            let r = fit_exponential_decay(&t, &y, None).unwrap();
            let tau = r.value("tau");
            assert!((tau / 17.6 - 1.0).abs() < 0.05, "{tau}");
            if (tau - 17.6).abs() <= 2.0 * r.stderr("tau") {
                inside += 1;
            }
        }
        assert!(inside >= 90, "{inside}");
    }

    #[test]
    fn flat_data_flagged() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.5; 5];
        assert!(matches!(
            fit_exponential_decay(&t, &y, None),
            Err(FitError::Unidentifiable(_))
        ));
        assert!(matches!(
            fit_saturation_recovery(&t, &y, None),
            Err(FitError::Unidentifiable(_))
        ));
    }

    #[test]
    fn short_or_unsorted_input_rejected() {
        assert!(fit_exponential_decay(&[0.0, 1.0, 2.0], &[3.0, 2.0, 1.0], None).is_err());
        assert!(fit_exponential_decay(&[0.0, 2.0, 1.0, 3.0], &[3.0, 2.0, 1.5, 1.0], None).is_err());
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 300.0).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.8 * (1.0 - (-t / 2210.0).exp()) + 0.05).collect();
        let r = fit_saturation_recovery(&t, &y, None).unwrap();
        assert!((r.value("T1") - 2210.0).abs() < 1e-6);
        assert!((r.value("A") - 0.8).abs() < 1e-9);
        assert!((r.value("B") - 0.05).abs() < 1e-9);
    }

    #[test]
    fn decreasing_recovery_is_wrong_sign() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| (-t / 3.0).exp()).collect();
        assert!(matches!(
            fit_saturation_recovery(&t, &y, None),
            Err(FitError::WrongSign(_))
        ));
    }

    #[test]
    fn optimum_beats_truth_on_noiseless_data() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 2.0).collect();
        let y: Vec<f64> = t.iter().map(|t| decay(*t)).collect();
        let r = fit_exponential_decay(&t, &y, None).unwrap();
        assert!(r.rss <= 1e-9);
    }
}
