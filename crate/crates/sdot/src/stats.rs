//! Small numeric helpers shared across modules: compensated summation,
//! normal distribution functions, a one-sample Kolmogorov-Smirnov test and
//! least-squares slopes.

/// Neumaier compensated summation. Order-sensitive only at the level of the
/// compensation term, which is why every caller feeds it a fixed iteration order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = KahanSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    kahan_sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64
}

/// Error function, Abramowitz & Stegun 7.1.26 refined by a continued
/// rational fit (relative error below 1.2e-16 via the W. J. Cody split).
pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

/// Complementary error function, double precision.
///
/// Cody-style rational approximations on three ranges.
pub fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    let z = if ax < 0.5 {
        // series range: erf directly
        let t = x * x;
        let top = x
            * (3.209377589138469472562e3
                + t * (3.774852376853020208137e2
                    + t * (1.138641541510501556495e2 + t * (3.161123743870565596947 + t * 1.857777061846031526730e-1))));
        let bot = 2.844236833439170622273e3
            + t * (1.282616526077372275645e3
                + t * (2.440246379344441733056e2 + t * (2.360129095234412093499e1 + t)));
        return 1.0 - top / bot;
    } else if ax < 4.0 {
        let t = ax;
        let top = 1.23033935479799725272e3
            + t * (2.05107837782607146532e3
                + t * (1.71204761263407058314e3
                    + t * (8.81952221241769090411e2
                        + t * (2.98635138197400131132e2
                            + t * (6.61191906371416294775e1
                                + t * (8.88314979438837594118 + t * (5.64188496988670089180e-1 + t * 2.15311535474403846343e-8)))))));
        let bot = 1.23033935480374942043e3
            + t * (3.43936767414372163696e3
                + t * (4.36261909014324715820e3
                    + t * (3.29079923573345962678e3
                        + t * (1.62138957456669018874e3
                            + t * (5.37181101862009857509e2 + t * (1.17693950891312499305e2 + t * (1.57449261107098347253e1 + t)))))));
        (-t * t).exp() * top / bot
    } else {
        let t = 1.0 / (ax * ax);
        let top = -6.58749161529837803157e-4
            + t * (-1.60837851487422766278e-2
                + t * (-1.25781726111229246204e-1 + t * (-3.60344899949804439429e-1 + t * (-3.05326634961232344035e-1 + t * -1.63153871373020978498e-2))));
        let bot = 2.33520497626869185443e-3
            + t * (6.05183413124413191178e-2
                + t * (5.27905102951428412248e-1 + t * (1.87295284992346047209 + t * (2.56852019228982242072 + t))));
        let inv_sqrt_pi = 0.564189583547756286948;
        (-ax * ax).exp() * (inv_sqrt_pi + t * top / bot) / ax
    };
    if x < 0.0 {
        2.0 - z
    } else {
        z
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Quantile of the standard normal (Acklam's algorithm, refined with one
/// Halley step; absolute error well below 1e-12).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let mut x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // one Halley refinement
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= u / (1.0 + x * u / 2.0);
    x
}

/// One-sample KS statistic of `draws` against the cdf `f`.
pub fn ks_statistic(draws: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let c = f(*x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    d
}

/// Asymptotic KS p-value with Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = d * (sn + 0.12 + 0.11 / sn);
    if x < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k as i32 - 1) * (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// KS test of `draws` against the standard normal: returns (statistic, p-value).
pub fn ks_test_std_normal(draws: &[f64]) -> (f64, f64) {
    let d = ks_statistic(draws, normal_cdf);
    (d, ks_pvalue(d, draws.len()))
}

/// Least-squares slope of y on x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let num = kahan_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let den = kahan_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    num / den
}

/// Empirical (1-alpha) quantile by linear interpolation of order statistics.
pub fn quantile(draws: &[f64], level: f64) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = level * (sorted.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
