//! Small descriptive-statistics helpers shared across modules.

use statrs::function::beta::beta_reg;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator). NaN for fewer than 2 values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Population standard deviation (n denominator).
pub fn population_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Quantile of already sorted data by linear interpolation between order
/// statistics: position `p * (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Moment skewness g1 = m3 / m2^(3/2); 0 when the data has no spread.
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in xs {
        let d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 <= 0.0 || m2.sqrt() <= f64::EPSILON * m.abs() {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Pearson correlation; 0 if either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Two-tailed dependent-samples t-test on `after - before`.
pub fn paired_t_test(before: &[f64], after: &[f64]) -> PairedTTest {
    assert_eq!(before.len(), after.len());
    let diffs: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    let n = diffs.len();
    let df = n - 1;
    let m = mean(&diffs);
    let sd = sample_sd(&diffs);
    if sd == 0.0 || !sd.is_finite() {
        let (t, p) = if m == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(m), 0.0)
        };
        return PairedTTest { t, df, p_value: p };
    }
    let t = m / (sd / (n as f64).sqrt());
    PairedTTest {
        t,
        df,
        p_value: student_t_two_tailed(t, df as f64),
    }
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 0.25), 1.75);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }

    #[test]
    fn t_distribution_tail_matches_tables() {
        // t = 2.228, df = 10 is the two-sided 5% critical value.
        assert_relative_eq!(student_t_two_tailed(2.228, 10.0), 0.05, epsilon = 2e-4);
        // df = 1 is Cauchy: P(|T| > 1) = 0.5.
        assert_relative_eq!(student_t_two_tailed(1.0, 1.0), 0.5, epsilon = 1e-12);
        assert_eq!(student_t_two_tailed(0.0, 5.0), 1.0);
    }

    #[test]
    fn skewness_of_symmetric_and_constant() {
        assert_eq!(skewness(&[5.0; 10]), 0.0);
        assert!(skewness(&[400.0, 500.0, 600.0, 700.0, 800.0]).abs() < 1e-15);
        assert!(skewness(&[1.0, 1.0, 1.0, 10.0]) > 0.0);
    }
}
