//! Limiting distributions of the empirical transport cost: multinomial and
//! Q-side covariance structures, asymptotic variances per sampling regime,
//! sup-of-Gaussian samplers for non-unique optima, and the delta-method
//! transform to the p-Wasserstein distance itself.

use crate::cost::{cost, CostSpec};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, RandomSource, Sample};
use crate::semidual::Potential;
use crate::stats::kahan_sum;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Covariance of the centered multinomial proportions:
/// diag p_i(1-p_i), off-diagonal -p_i p_j.
pub fn sigma_p(p: &[f64]) -> Vec<Vec<f64>> {
    let n = p.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { p[i] * (1.0 - p[i]) } else { -p[i] * p[j] })
                .collect()
        })
        .collect()
}

/// z' Sigma(p) z, computed as Var(z_I) for I ~ p. Invariant under constant
/// shifts of z because the rows of Sigma(p) sum to zero.
pub fn sigma_p_var(p: &[f64], z: &Potential) -> f64 {
    let ez = kahan_sum(p.iter().zip(&z.z).map(|(w, v)| w * v));
    kahan_sum(p.iter().zip(&z.z).map(|(w, v)| w * (v - ez) * (v - ez)))
}

/// f_z(y) = min_i { c(x_i, y) - z_i } over the sample rows.
fn f_values(p: &DiscreteMeasure, qs: &Sample, z: &Potential, spec: &CostSpec) -> Result<Vec<f64>> {
    if z.len() != p.len() {
        return Err(Error::DimensionMismatch("potential length differs from atom count".into()));
    }
    qs.rows
        .iter()
        .map(|y| {
            let mut best = f64::INFINITY;
            for (i, x) in p.points.iter().enumerate() {
                best = best.min(cost(spec, x, y)? - z.z[i]);
            }
            Ok(best)
        })
        .collect()
}

/// Plug-in variance of f_z under the sample.
pub fn sigma_q_var(qs: &Sample, p: &DiscreteMeasure, z: &Potential, spec: &CostSpec) -> Result<f64> {
    let f = f_values(p, qs, z, spec)?;
    Ok(crate::stats::variance(&f))
}

/// Plug-in covariance of f_z and f_s under the sample.
pub fn xi_cov(
    qs: &Sample,
    p: &DiscreteMeasure,
    z: &Potential,
    s: &Potential,
    spec: &CostSpec,
) -> Result<f64> {
    let fz = f_values(p, qs, z, spec)?;
    let fs = f_values(p, qs, s, spec)?;
    let mz = crate::stats::mean(&fz);
    let ms = crate::stats::mean(&fs);
    Ok(kahan_sum(fz.iter().zip(&fs).map(|(a, b)| (a - mz) * (b - ms))) / fz.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    OneSampleP,
    OneSampleQ,
    TwoSample { lambda: f64 },
}

impl Regime {
    /// Normalizing rate: sqrt(n), sqrt(m), or sqrt(nm/(n+m)).
    pub fn rate(&self, n: usize, m: usize) -> f64 {
        match self {
            Regime::OneSampleP => (n as f64).sqrt(),
            Regime::OneSampleQ => (m as f64).sqrt(),
            Regime::TwoSample { .. } => (n as f64 * m as f64 / (n + m) as f64).sqrt(),
        }
    }
}

/// Joint covariance data over a finite candidate set of potentials:
/// the Q-side covariance matrix and the quadratic forms against Sigma(p).
#[derive(Debug, Clone, Serialize)]
pub struct GaussianProcessCov {
    pub xi: Vec<Vec<f64>>,
    pub sigma_quad: Vec<Vec<f64>>,
}

impl GaussianProcessCov {
    pub fn build(
        qs: &Sample,
        p: &DiscreteMeasure,
        candidates: &[Potential],
        spec: &CostSpec,
    ) -> Result<Self> {
        let k = candidates.len();
        if k == 0 {
            return Err(Error::InvalidArgument("candidate set must be nonempty".into()));
        }
        let mut xi = vec![vec![0.0; k]; k];
        let mut quad = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in a..k {
                let x = xi_cov(qs, p, &candidates[a], &candidates[b], spec)?;
                xi[a][b] = x;
                xi[b][a] = x;
                // polarization of the Sigma(p) quadratic form
                let ea = kahan_sum(p.weights.iter().zip(&candidates[a].z).map(|(w, v)| w * v));
                let eb = kahan_sum(p.weights.iter().zip(&candidates[b].z).map(|(w, v)| w * v));
                let q = kahan_sum(
                    p.weights
                        .iter()
                        .zip(candidates[a].z.iter().zip(&candidates[b].z))
                        .map(|(w, (va, vb))| w * (va - ea) * (vb - eb)),
                );
                quad[a][b] = q;
                quad[b][a] = q;
            }
        }
        Ok(Self { xi, sigma_quad: quad })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CltLimit {
    pub regime: Regime,
    pub variance: f64,
}

/// Asymptotic variance of the rescaled cost under a unique optimal potential.
pub fn limit_variance(
    regime: Regime,
    qs: &Sample,
    p: &DiscreteMeasure,
    z: &Potential,
    spec: &CostSpec,
) -> Result<CltLimit> {
    let variance = match regime {
        Regime::OneSampleP => sigma_p_var(&p.weights, z),
        Regime::OneSampleQ => sigma_q_var(qs, p, z, spec)?,
        Regime::TwoSample { lambda } => {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "two-sample lambda={lambda} must lie in (0,1)"
                )));
            }
            lambda * sigma_p_var(&p.weights, z) + (1.0 - lambda) * sigma_q_var(qs, p, z, spec)?
        }
    };
    Ok(CltLimit { regime, variance })
}

/// Draws of the limiting statistic: the max over the candidate set of a
/// centered Gaussian vector with covariance
/// lambda * sigma_quad + (1 - lambda) * xi. Negative eigenvalues of the
/// plug-in covariance are clipped to zero.
pub fn sup_limit_sampler(
    candidates: &[Potential],
    gp: &GaussianProcessCov,
    lambda: f64,
    n_draws: usize,
    rng: &RandomSource,
) -> Result<Vec<f64>> {
    let k = candidates.len();
    if k == 0 || gp.xi.len() != k || gp.sigma_quad.len() != k {
        return Err(Error::DimensionMismatch(
            "candidate set and covariance matrices must have the same size".into(),
        ));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda={lambda} must lie in [0,1]")));
    }
    let c = DMatrix::from_fn(k, k, |a, b| {
        lambda * gp.sigma_quad[a][b] + (1.0 - lambda) * gp.xi[a][b]
    });
    let sym = 0.5 * (&c + c.transpose());
    let eig = sym.symmetric_eigen();
    let sqrt_l: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let mut factor = eig.eigenvectors;
    for (j, s) in sqrt_l.iter().enumerate() {
        factor.column_mut(j).scale_mut(*s);
    }
    let mut r = rng.rng();
    let mut out = Vec::with_capacity(n_draws);
    let mut xi = DVector::zeros(k);
    for _ in 0..n_draws {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut r);
        }
        let x = &factor * &xi;
        out.push(x.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)));
    }
    Ok(out)
}

/// Delta-method limit for W_p = T^{1/p}.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WpLimit {
    /// W_p > 0: Gaussian with the delta-method variance at rate sqrt(n).
    Gaussian { w_value: f64, w_variance: f64 },
    /// W_p = 0: the rescaled distance converges at rate n^{1/(2p)} and cost
    /// draws must be mapped through x -> max(x,0)^{1/p}.
    Degenerate { rate_exponent: f64 },
}

impl WpLimit {
    /// Map a draw of the limiting cost statistic to a draw of the W_p limit
    /// in the degenerate branch.
    pub fn degenerate_transform(&self, draw: f64, p_exp: f64) -> f64 {
        debug_assert!(matches!(self, WpLimit::Degenerate { .. }));
        draw.max(0.0).powf(1.0 / p_exp)
    }
}

pub fn wasserstein_delta(t: f64, var_t: f64, p_exp: f64) -> Result<WpLimit> {
    if p_exp < 1.0 {
        return Err(Error::InvalidArgument(format!("exponent p={p_exp} must be >= 1")));
    }
    if t < 0.0 || var_t < 0.0 {
        return Err(Error::InvalidArgument("cost and variance must be nonnegative".into()));
    }
    if t == 0.0 {
        return Ok(WpLimit::Degenerate {
            rate_exponent: 1.0 / (2.0 * p_exp),
        });
    }
    let w = t.powf(1.0 / p_exp);
    let deriv = 1.0 / (p_exp * w.powf(p_exp - 1.0));
    Ok(WpLimit::Gaussian {
        w_value: w,
        w_variance: var_t * deriv * deriv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_continuous, ContinuousSpec};
    use crate::semidual::{solve_dual, SolveOptions};
    use crate::stats::variance;

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
    }

    fn u11_sample(m: usize, seed: u64) -> Sample {
        sample_continuous(
            &ContinuousSpec::UniformBox {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
            m,
            &RandomSource::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn sigma_p_hand_values() {
        let s = sigma_p(&[0.5, 0.5]);
        assert_eq!(s, vec![vec![0.25, -0.25], vec![-0.25, 0.25]]);
        let z = sigma_p(&[1.0, 0.0]);
        assert!(z.iter().flatten().all(|&x| x == 0.0));
        let t = sigma_p(&[1.0 / 3.0; 3]);
        for row in &t {
            assert!(kahan_sum(row.iter().copied()).abs() < 1e-15);
        }
    }

    #[test]
    fn sigma_p_var_examples() {
        let p = [0.5, 0.5];
        assert!((sigma_p_var(&p, &Potential::raw(vec![0.0, 1.0])) - 0.25).abs() < 1e-15);
        let a = sigma_p_var(&p, &Potential::raw(vec![0.0, 1.0]));
        let b = sigma_p_var(&p, &Potential::raw(vec![-0.5, 0.5]));
        assert!((a - b).abs() < 1e-15);
        assert!(sigma_p_var(&p, &Potential::raw(vec![3.3, 3.3])).abs() < 1e-15);
    }

    #[test]
    fn sigma_q_var_benchmark_and_invariance() {
        let p = two_atoms();
        let qs = u11_sample(100_000, 61);
        let z = Potential::raw(vec![0.0, 0.0]);
        let v = sigma_q_var(&qs, &p, &z, &CostSpec::SquaredEuclidean).unwrap();
        assert!((v - 4.0 / 45.0).abs() < 0.003, "v={v}");
        let shifted = Potential::raw(vec![5.0, 5.0]);
        let vs = sigma_q_var(&qs, &p, &shifted, &CostSpec::SquaredEuclidean).unwrap();
        assert!((v - vs).abs() < 1e-12);
        // single atom: f is constant up to the atom, variance of c itself
        let p1 = DiscreteMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let rows = Sample::new(vec![vec![2.0]; 5]).unwrap();
        let v1 = sigma_q_var(&rows, &p1, &Potential::raw(vec![0.7]), &CostSpec::Euclidean).unwrap();
        assert_eq!(v1, 0.0);
    }

    #[test]
    fn xi_cov_diagonal_and_quadrature() {
        let p = two_atoms();
        let qs = u11_sample(100_000, 62);
        let sq = CostSpec::SquaredEuclidean;
        let z = Potential::raw(vec![0.0, 0.0]);
        let s = Potential::raw(vec![0.1, -0.1]);
        let diag = xi_cov(&qs, &p, &z, &z, &sq).unwrap();
        let var = sigma_q_var(&qs, &p, &z, &sq).unwrap();
        assert!((diag - var).abs() < 1e-12);

        // quadrature reference for Cov(f_z, f_s) under U(-1,1)
        let f = |zz: &[f64], y: f64| ((y + 1.0) * (y + 1.0) - zz[0]).min((y - 1.0) * (y - 1.0) - zz[1]);
        let grid = 400_000usize;
        let quad = |g: &dyn Fn(f64) -> f64| -> f64 {
            let mut acc = crate::stats::KahanSum::new();
            for k in 0..grid {
                let y = -1.0 + 2.0 * (k as f64 + 0.5) / grid as f64;
                acc.add(g(y));
            }
            acc.value() / grid as f64
        };
        let mz = quad(&|y| f(&[0.0, 0.0], y));
        let ms = quad(&|y| f(&[0.1, -0.1], y));
        let reference = quad(&|y| (f(&[0.0, 0.0], y) - mz) * (f(&[0.1, -0.1], y) - ms));
        let plug = xi_cov(&qs, &p, &z, &s, &sq).unwrap();
        assert!((plug - reference).abs() < 0.003, "plug={plug} ref={reference}");
    }

    #[test]
    fn limit_variance_regimes() {
        let p = two_atoms();
        let qs = u11_sample(20_000, 63);
        let sq = CostSpec::SquaredEuclidean;
        let z = Potential::raw(vec![0.0, 0.0]);
        let lp = limit_variance(Regime::OneSampleP, &qs, &p, &z, &sq).unwrap();
        assert_eq!(lp.variance, 0.0); // z constant
        let lq = limit_variance(Regime::OneSampleQ, &qs, &p, &z, &sq).unwrap();
        assert!((lq.variance - 4.0 / 45.0).abs() < 0.01);
        let lam = limit_variance(Regime::TwoSample { lambda: 0.5 }, &qs, &p, &z, &sq).unwrap();
        assert!((lam.variance - 0.5 * lq.variance).abs() < 1e-12);
        assert!(limit_variance(Regime::TwoSample { lambda: 1.3 }, &qs, &p, &z, &sq).is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(Regime::OneSampleP.rate(100, 7), 10.0);
        assert_eq!(Regime::OneSampleQ.rate(7, 400), 20.0);
        let r = Regime::TwoSample { lambda: 0.5 }.rate(100, 100);
        assert!((r - (50.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sup_sampler_single_candidate_matches_variance() {
        let z = Potential::mean_zero(vec![0.3, -0.3]);
        let gp = GaussianProcessCov {
            xi: vec![vec![0.7]],
            sigma_quad: vec![vec![0.2]],
        };
        let draws = sup_limit_sampler(&[z], &gp, 0.5, 1_000_000, &RandomSource::new(64)).unwrap();
        let target = 0.5 * 0.2 + 0.5 * 0.7;
        let v = variance(&draws);
        assert!((v - target).abs() / target < 0.02, "v={v}");
    }

    #[test]
    fn sup_sampler_duplicate_candidates() {
        let z = Potential::mean_zero(vec![0.5, -0.5]);
        let gp1 = GaussianProcessCov {
            xi: vec![vec![1.0]],
            sigma_quad: vec![vec![0.0]],
        };
        let gp2 = GaussianProcessCov {
            xi: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            sigma_quad: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        let a = sup_limit_sampler(&[z.clone()], &gp1, 0.0, 200_000, &RandomSource::new(65)).unwrap();
        let b = sup_limit_sampler(&[z.clone(), z], &gp2, 0.0, 200_000, &RandomSource::new(65)).unwrap();
        assert!((variance(&a) - variance(&b)).abs() < 0.02);
        assert!((crate::stats::mean(&a) - crate::stats::mean(&b)).abs() < 0.01);
    }

    #[test]
    fn sup_sampler_max_of_two_independent_normals() {
        let z1 = Potential::mean_zero(vec![0.5, -0.5]);
        let z2 = Potential::mean_zero(vec![-0.5, 0.5]);
        let gp = GaussianProcessCov {
            xi: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            sigma_quad: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        let draws = sup_limit_sampler(&[z1, z2], &gp, 0.0, 1_000_000, &RandomSource::new(66)).unwrap();
        let mean = crate::stats::mean(&draws);
        let expect = 1.0 / std::f64::consts::PI.sqrt();
        assert!((mean - expect).abs() < 0.01, "mean={mean} expect={expect}");
    }

    #[test]
    fn wasserstein_delta_cases() {
        match wasserstein_delta(1.0, 0.5, 3.0).unwrap() {
            WpLimit::Gaussian { w_value, w_variance } => {
                assert!((w_value - 1.0).abs() < 1e-15);
                assert!((w_variance - 0.5 / 9.0).abs() < 1e-15);
            }
            _ => panic!("expected gaussian branch"),
        }
        match wasserstein_delta(1.0 / 3.0, 4.0 / 45.0, 2.0).unwrap() {
            WpLimit::Gaussian { w_value, w_variance } => {
                assert!((w_value - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);
                assert!((w_variance - 1.0 / 15.0).abs() < 1e-12, "var={w_variance}");
            }
            _ => panic!("expected gaussian branch"),
        }
        match wasserstein_delta(0.0, 0.3, 2.0).unwrap() {
            WpLimit::Degenerate { rate_exponent } => {
                assert!((rate_exponent - 0.25).abs() < 1e-15);
            }
            _ => panic!("expected degenerate branch"),
        }
        assert!(wasserstein_delta(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn standardized_cost_statistic_is_roughly_standard_normal() {
        // reduced-size version of the full distributional check: mean and
        // variance of the standardized statistic over independent replicates
        let p = two_atoms();
        let sq = CostSpec::SquaredEuclidean;
        let reps = 120usize;
        let m = 2000usize;
        let sd = (4.0f64 / 45.0).sqrt();
        use rayon::prelude::*;
        let stats: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let src = RandomSource::new(67).stream(r as u64);
                let qs = sample_continuous(
                    &ContinuousSpec::UniformBox {
                        lo: vec![-1.0],
                        hi: vec![1.0],
                    },
                    m,
                    &src,
                )
                .unwrap();
                let opts = SolveOptions::new(src.substream(1)).with_tol(1e-5);
                let t = solve_dual(&p, &qs, &sq, &opts).unwrap().cost_value;
                (m as f64).sqrt() * (t - 1.0 / 3.0) / sd
            })
            .collect();
        let mu = crate::stats::mean(&stats);
        let v = variance(&stats);
        assert!(mu.abs() < 0.3, "mean={mu}");
        assert!((0.6..1.5).contains(&v), "var={v}");
    }
}
