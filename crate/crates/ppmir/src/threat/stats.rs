//! Small statistics helpers for attack reports.

/// Area under the ROC curve via the Mann-Whitney U statistic; ties count a
/// half. Returns 0.5 when either class is empty.
pub fn auc(positive: &[f64], negative: &[f64]) -> f64 {
    if positive.is_empty() || negative.is_empty() {
        return 0.5;
    }
    let mut u = 0.0;
    for &p in positive {
        for &n in negative {
            if p > n {
                u += 1.0;
            } else if (p - n).abs() <= f64::EPSILON * p.abs().max(n.abs()).max(1.0) {
                u += 0.5;
            }
        }
    }
    u / (positive.len() * negative.len()) as f64
}

/// Sample mean and standard deviation (n-1 denominator; zero for n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One-dimensional 2-means: returns the two cluster means, low first.
/// Deterministic (seeded by the extremes), label-free, converges in a few
/// iterations on anything this crate feeds it.
pub fn two_means(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mut lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return (lo, hi);
    }
    for _ in 0..64 {
        let boundary = (lo + hi) / 2.0;
        let (mut sum_lo, mut n_lo, mut sum_hi, mut n_hi) = (0.0, 0usize, 0.0, 0usize);
        for &x in xs {
            if x <= boundary {
                sum_lo += x;
                n_lo += 1;
            } else {
                sum_hi += x;
                n_hi += 1;
            }
        }
        let new_lo = if n_lo > 0 { sum_lo / n_lo as f64 } else { lo };
        let new_hi = if n_hi > 0 { sum_hi / n_hi as f64 } else { hi };
        if new_lo == lo && new_hi == hi {
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }
    (lo, hi)
}
