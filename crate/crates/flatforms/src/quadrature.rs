//! Integrals `∫₀^∞ g(t) dt/t` of smooth vector-valued integrands by composite
//! Simpson in `u = ln t`, with Richardson error estimates and power-law tails.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    NotConverged { estimate: f64, tolerance: f64 },
    #[error("integrand still above {threshold:.1e} at t = {t:.3e}")]
    NoDecay { t: f64, threshold: f64 },
    #[error("invalid quadrature bounds: t_min = {t_min}, t_max = {t_max}")]
    InvalidBounds { t_min: f64, t_max: f64 },
    #[error("integrand is not finite at t = {0:.3e}")]
    NonFinite(f64),
}

/// Parameters of the `u = ln t` quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub t_min: f64,
    /// Initial upper bound; grown until the integrand is below `decay_threshold`.
    pub t_max: f64,
    /// Hard ceiling on the grown upper bound.
    pub t_ceiling: f64,
    /// Step of the coarse Simpson rule in `u`; the fine rule halves it.
    pub step: f64,
    pub decay_threshold: f64,
    /// Acceptable Richardson error estimate (absolute, max-norm).
    pub tolerance: f64,
    /// Exponent `p` in `g(t) ~ t^p` as `t → 0`, used for the `[0, t_min]` tail.
    pub small_t_order: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            t_min: 1e-6,
            t_max: 1e3,
            t_ceiling: 1e12,
            step: 0.25,
            decay_threshold: 1e-10,
            tolerance: 1e-7,
            small_t_order: 1.0,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: Vec<f64>,
    /// Max-norm Richardson estimate plus the size of the tail corrections.
    pub error_estimate: f64,
    /// Upper bound actually reached.
    pub t_max: f64,
    pub evaluations: usize,
}

/// `∫₀^∞ g(t) dt/t` componentwise.
///
/// `g` must be `O(t^p)` at 0 (`p = small_t_order`) and decay at infinity; the
/// tails outside the sampled range are added from power-law fits.
pub fn integrate_dt_over_t<G>(mut g: G, config: &QuadratureConfig) -> Result<QuadratureResult, QuadratureError>
where
    G: FnMut(f64) -> Vec<f64>,
{
    if !(config.t_min > 0.0 && config.t_max > config.t_min && config.step > 0.0) {
        return Err(QuadratureError::InvalidBounds { t_min: config.t_min, t_max: config.t_max });
    }
    let u0 = config.t_min.ln();
    let h = config.step / 2.0;
    let u_target = config.t_max.ln();
    let u_ceiling = config.t_ceiling.ln();

    let mut samples: Vec<Vec<f64>> = Vec::new();
    loop {
        let k = samples.len();
        let u = u0 + k as f64 * h;
        let t = u.exp();
        let value = g(t);
        if value.iter().any(|x| !x.is_finite()) {
            return Err(QuadratureError::NonFinite(t));
        }
        samples.push(value);
        // fine intervals must be a multiple of 4 for the coarse rule
        let intervals = samples.len() - 1;
        if intervals == 0 || intervals % 4 != 0 || u < u_target {
            continue;
        }
        let tail_small = samples[samples.len().saturating_sub(5)..]
            .iter()
            .all(|v| max_abs(v) < config.decay_threshold);
        if tail_small {
            break;
        }
        if u > u_ceiling {
            return Err(QuadratureError::NoDecay { t, threshold: config.decay_threshold });
        }
    }

    let fine = simpson(&samples, h, 1);
    let coarse = simpson(&samples, 2.0 * h, 2);
    let dim = fine.len();
    let mut value = vec![0.0; dim];
    let mut error = 0.0f64;
    for i in 0..dim {
        let delta = (fine[i] - coarse[i]) / 15.0;
        value[i] = fine[i] + delta;
        error = error.max(delta.abs());
    }

    // [0, t_min]: ∫ c t^p dt/t = g(t_min)/p
    let first = &samples[0];
    let mut tail_error = 0.0f64;
    for i in 0..dim {
        let tail = first[i] / config.small_t_order;
        value[i] += tail;
        tail_error = tail_error.max(tail.abs() * config.t_min.sqrt());
    }
    // [t_max, ∞): the integrand is below threshold; bound by threshold/p for p ≥ 1/2
    let last = samples.last().expect("nonempty");
    for i in 0..dim {
        let tail = 2.0 * last[i];
        value[i] += tail;
        tail_error = tail_error.max(tail.abs());
    }

    let error_estimate = error + tail_error;
    if error_estimate > config.tolerance {
        return Err(QuadratureError::NotConverged { estimate: error_estimate, tolerance: config.tolerance });
    }
    let t_max = (u0 + (samples.len() - 1) as f64 * h).exp();
    Ok(QuadratureResult { value, error_estimate, t_max, evaluations: samples.len() })
}

/// `∫₀^∞ g(t) dt`, by integrating `t·g(t)` against `dt/t`. Here `small_t_order`
/// describes `g` itself.
pub fn integrate_dt<G>(mut g: G, config: &QuadratureConfig) -> Result<QuadratureResult, QuadratureError>
where
    G: FnMut(f64) -> Vec<f64>,
{
    let shifted = QuadratureConfig { small_t_order: config.small_t_order + 1.0, ..config.clone() };
    integrate_dt_over_t(
        |t| {
            let mut v = g(t);
            v.iter_mut().for_each(|x| *x *= t);
            v
        },
        &shifted,
    )
}

/// Composite Simpson using every `stride`-th sample with spacing `h`.
fn simpson(samples: &[Vec<f64>], h: f64, stride: usize) -> Vec<f64> {
    let nodes: Vec<&Vec<f64>> = samples.iter().step_by(stride).collect();
    let dim = nodes[0].len();
    let mut sum = vec![0.0; dim];
    let last = nodes.len() - 1;
    for (k, v) in nodes.iter().enumerate() {
        let w = if k == 0 || k == last {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for i in 0..dim {
            sum[i] += w * v[i];
        }
    }
    sum.iter().map(|s| s * h / 3.0).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Composite Simpson weights on `[a, b]` with an even number `n` of intervals.
pub fn simpson_nodes(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals");
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + k as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// Least-squares slope of `ln|y|` against `ln x`, skipping zero samples.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.abs() > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `count` points log-spaced on `[a, b]`, endpoints included.
pub fn log_space(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..count).map(|k| (la + (lb - la) * k as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frullani_integral() {
        // ∫ (e^{−t} − e^{−2t}) dt/t = ln 2
        let r = integrate_dt_over_t(|t| vec![(-t).exp() - (-2.0 * t).exp()], &QuadratureConfig::default()).unwrap();
        assert!((r.value[0] - 2f64.ln()).abs() < 1e-8, "{}", r.value[0]);
    }

    #[test]
    fn plain_dt_integral() {
        let cfg = QuadratureConfig { small_t_order: 0.0, ..Default::default() };
        let r = integrate_dt(|t| vec![(-t).exp(), t * (-t).exp()], &cfg).unwrap();
        assert!((r.value[0] - 1.0).abs() < 1e-8, "{:?}", r);
        assert!((r.value[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn non_decaying_integrand_is_reported() {
        let cfg = QuadratureConfig { t_ceiling: 1e6, ..Default::default() };
        assert!(matches!(integrate_dt_over_t(|_| vec![1.0], &cfg), Err(QuadratureError::NoDecay { .. })));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = log_space(1e2, 1e4, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let s: f64 = simpson_nodes(0.0, 2.0, 4).iter().map(|(x, w)| w * x.powi(3)).sum();
        assert!((s - 4.0).abs() < 1e-14);
    }
}
