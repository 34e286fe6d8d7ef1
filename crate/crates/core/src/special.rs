//! Student-t distribution through the regularized incomplete beta function.
//!
//! I_x(a, b) is evaluated with the continued fraction of
//! Numerical Recipes 6.4 (modified Lentz), switching to the symmetry
//! I_x(a, b) = 1 − I_{1−x}(b, a) when x > (a+1)/(a+b+2) so the fraction
//! converges quickly. Convergence is tested at 1e-15 relative, which keeps
//! p-values accurate to well under 1e-10.

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 500;

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// I_x(a, b), with `y = 1 − x` supplied separately so callers can pass a
/// complement computed without cancellation.
pub(crate) fn regularized_incomplete_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log(y);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, y) / b
    }
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub(crate) fn student_t_two_sided_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let denom = df + t2;
    regularized_incomplete_beta(df / 2.0, 0.5, df / denom, t2 / denom).clamp(0.0, 1.0)
}

/// P(T ≤ t).
pub(crate) fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_sf(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// The `p`-quantile of Student's t, `p ∈ (0, 1)`, by bracketing and
/// bisection on the cdf down to adjacent floats.
pub(crate) fn student_t_quantile(p: f64, df: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -student_t_quantile(1.0 - p, df);
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        for x in [0.1, 0.25, 0.5, 0.9] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x, 1.0 - x) - x).abs() < 1e-14);
            let expected = libm::pow(x, 3.5);
            assert!((regularized_incomplete_beta(3.5, 1.0, x, 1.0 - x) - expected).abs() < 1e-13);
        }
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0, 1.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn cauchy_special_case() {
        // df = 1 is Cauchy: P(|T| ≥ t) = 1 − 2·atan(t)/π
        for t in [0.1, 1.0, 3.0, 40.0] {
            let expected = 1.0 - 2.0 * libm::atan(t) / core::f64::consts::PI;
            assert!(
                (student_t_two_sided_sf(t, 1.0) - expected).abs() < 1e-13,
                "t={t}"
            );
        }
    }

    #[test]
    fn quantiles_match_reference_tables() {
        // two-sided 95% critical values (SciPy reference)
        let table = [
            (1.0, 12.706204736432095),
            (2.0, 4.302652729696142),
            (5.0, 2.570581835636314),
            (10.0, 2.2281388519649385),
            (22.0, 2.0738730679040147),
            (100.0, 1.9839715184496334),
        ];
        for (df, expected) in table {
            let q = student_t_quantile(0.975, df);
            assert!((q - expected).abs() < 1e-9, "df={df}: {q}");
        }
        assert!((student_t_quantile(0.95, 10.0) - 1.8124611228107335).abs() < 1e-9);
        assert!((student_t_quantile(0.025, 10.0) + 2.2281388519649385).abs() < 1e-9);
        assert_eq!(student_t_quantile(0.5, 7.0), 0.0);
    }

    #[test]
    fn cdf_is_symmetric_and_monotone() {
        let mut prev = 0.0;
        for i in -40..=40 {
            let t = i as f64 * 0.25;
            let c = student_t_cdf(t, 6.0);
            assert!(c >= prev);
            assert!((c + student_t_cdf(-t, 6.0) - 1.0).abs() < 1e-14);
            prev = c;
        }
    }
}
