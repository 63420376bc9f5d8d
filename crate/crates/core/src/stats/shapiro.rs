//! Shapiro-Wilk W with Royston's (1995, AS R94) coefficient approximation and
//! normalizing transformation for the p-value.

use std::f64::consts::PI;

use super::{normal_quantile, normal_sf, Method, StatsError, TestResult};

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

const MIN_N: usize = 3;
const MAX_N: usize = 5000;
const SMALL: f64 = 1e-19;

/// `c[0] + c[1] x + c[2] x^2 + ...`
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Upper-half coefficients `a[0..n/2]` (positive, largest first).
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (0..half)
        .map(|i| normal_quantile((i as f64 + 1.0 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    let (first_free, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for i in first_free..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// Shapiro-Wilk normality test for `3 <= n <= 5000`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<TestResult, StatsError> {
    let n = sample.len();
    if n < MIN_N {
        return Err(StatsError::SampleTooSmall { n, min: MIN_N });
    }
    if n > MAX_N {
        return Err(StatsError::SampleTooLarge { n, max: MAX_N });
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range.is_nan() || range < SMALL {
        return Err(StatsError::ZeroVariance);
    }

    let half = coefficients(n);
    // Full antisymmetric coefficient vector over the ordered sample.
    let coef = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i < j {
            -half[i]
        } else if i > j {
            half[j]
        } else {
            0.0
        }
    };
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let x_mean = xs.iter().sum::<f64>() / n as f64;
    let a_mean = (0..n).map(coef).sum::<f64>() / n as f64;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, xi) in xs.iter().enumerate() {
        let da = coef(i) - a_mean;
        let dx = xi - x_mean;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = ((ssassx - sax) * (ssassx + sax) / (ssa * ssx)).max(0.0);
    let w = (1.0 - w1).clamp(0.0, 1.0);

    let p = if n == 3 {
        (1.0 - 6.0 / PI * w.sqrt().acos()).max(0.0)
    } else if n <= 11 {
        let gamma = poly(&G, n as f64);
        let y = w1.ln();
        if y >= gamma {
            SMALL
        } else {
            let y = -(gamma - y).ln();
            let m = poly(&C3, n as f64);
            let s = poly(&C4, n as f64).exp();
            normal_sf((y - m) / s)
        }
    } else {
        let ln_n = (n as f64).ln();
        let m = poly(&C5, ln_n);
        let s = poly(&C6, ln_n).exp();
        normal_sf((w1.ln() - m) / s)
    };

    Ok(TestResult::new(Method::ShapiroWilk, w, None, p, vec![n]))
}
