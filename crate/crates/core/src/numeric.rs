//! Small numerical kernels shared across modules: log-sum-exp, adaptive
//! Simpson quadrature, special functions and sample statistics.

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log density of N(mean, sd^2) at `x`.
pub fn ln_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Riemann zeta for s > 1 by direct summation plus an Euler-Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    power_tail(s, 1)
}

/// `sum_{l >= from} l^(-s)` for s > 1.
pub fn power_tail(s: f64, from: u64) -> f64 {
    assert!(s > 1.0, "power tail requires s > 1");
    let from = from.max(1);
    let start = from.max(64);
    let mut sum = 0.0;
    for l in from..start {
        sum += (l as f64).powf(-s);
    }
    let n = start as f64;
    sum + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`, splitting first at
/// every breakpoint inside the interval.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let panels = pts.len() - 1;
    let tol = abs_tol / panels as f64;
    pts.windows(2)
        .map(|w| {
            // Seed each panel with a few sub-panels so narrow peaks are seen.
            let m = 8;
            let h = (w[1] - w[0]) / m as f64;
            (0..m)
                .map(|i| {
                    let lo = w[0] + i as f64 * h;
                    let hi = lo + h;
                    simpson_panel(f, lo, hi, tol / m as f64)
                })
                .sum::<f64>()
        })
        .sum()
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Rounding makes tiny absolute tolerances unreachable on large integrands.
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) || (b - a) < 1e-12 {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson weights for `panels` (even) intervals of width `h`.
pub fn simpson_weights(panels: usize, h: f64) -> Vec<f64> {
    assert!(panels.is_multiple_of(2) && panels > 0);
    (0..=panels)
        .map(|i| {
            let c = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean from non-overlapping batch means, which
/// accounts for autocorrelation in MCMC output.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let b = batches.min(xs.len()).max(2);
    let size = xs.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b).map(|i| mean(&xs[i * size..(i + 1) * size])).collect();
    (variance(&means) / b as f64).sqrt()
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&v, 0.5)
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
pub fn isotonic_nondecreasing(ys: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(ys.len());
    for &y in ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (v2, n2) = blocks[blocks.len() - 1];
            let (v1, n1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((v1 * n1 as f64 + v2 * n2 as f64) / (n1 + n2) as f64, n1 + n2);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Ordinary least squares fit `y = intercept + slope x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_two_is_pi_squared_over_six() {
        let z = zeta(2.0);
        assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13, "{z}");
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-13);
    }

    #[test]
    fn simpson_integrates_gaussian_and_kinks() {
        let f = |x: f64| ln_normal_pdf(x, 0.3, 0.7).exp();
        let v = integrate(&f, -8.0, 8.0, &[0.3], 1e-10);
        assert!((v - 1.0).abs() < 1e-9);
        let g = |x: f64| (x - 0.123).abs();
        let v = integrate(&g, -1.0, 1.0, &[], 1e-10);
        let exact = 0.5 * (1.123f64.powi(2) + 0.877f64.powi(2));
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_nondecreasing(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
