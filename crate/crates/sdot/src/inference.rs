//! Resampling and plug-in inference for the empirical transport cost and the
//! optimal potentials: bootstrap distributions, two Hessian estimators, the
//! sandwich covariance of the potentials, and uniform confidence bands.

use crate::cost::{cost, cost_grad_y, CostSpec};
use crate::error::{Error, Result};
use crate::measures::{sample_discrete, DiscreteMeasure, RandomSource, Sample};
use crate::semidual::{solve_dual, DualSolveResult, Potential, SolveOptions};
use crate::stats::kahan_sum;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which side of the problem is random and gets resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResampleSide {
    /// P is an empirical measure of n draws; resample its weights.
    WeightsP { n: usize },
    /// Resample the Q rows with replacement.
    RowsQ,
    /// Both sides random; rate sqrt(nm/(n+m)).
    Both { n: usize },
}

impl ResampleSide {
    pub fn rate(&self, m: usize) -> f64 {
        match self {
            ResampleSide::WeightsP { n } => (*n as f64).sqrt(),
            ResampleSide::RowsQ => (m as f64).sqrt(),
            ResampleSide::Both { n } => (*n as f64 * m as f64 / (*n + m) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub draws: Vec<f64>,
    pub rate: f64,
    pub point_estimate: f64,
    pub excluded: usize,
    pub total: usize,
}

impl BootstrapResult {
    pub fn quantile(&self, alpha: f64) -> f64 {
        crate::stats::quantile(&self.draws, alpha)
    }
}

/// Exclusion cap: more than 1% failed replicates aborts the run.
fn check_exclusions(excluded: usize, total: usize) -> Result<()> {
    if excluded * 100 > total {
        return Err(Error::BootstrapInstability { excluded, total });
    }
    Ok(())
}

fn refuse_non_unique(res: &DualSolveResult) -> Result<()> {
    if res.candidates.len() > 1 {
        return Err(Error::BootstrapNonUnique(res.candidates.len()));
    }
    Ok(())
}

fn warm_opts(base: &SolveOptions, z_hat: &Potential, stream: RandomSource) -> SolveOptions {
    let init: Vec<f64> = z_hat.z.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    SolveOptions {
        tol_grad: base.tol_grad,
        max_iters: base.max_iters,
        multistart: 1,
        rng: stream,
        init: Some(init),
    }
}

/// Bootstrap distribution of rate * (T* - T_hat). Replicates run on private
/// RNG streams; results do not depend on scheduling order.
pub fn bootstrap_cost(
    side: ResampleSide,
    p: &DiscreteMeasure,
    qs: &Sample,
    spec: &CostSpec,
    opts: &SolveOptions,
    b: usize,
    rng: &RandomSource,
) -> Result<BootstrapResult> {
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs B >= 1".into()));
    }
    let base = solve_dual(p, qs, spec, opts)?;
    if !base.converged {
        return Err(Error::NonConvergence {
            grad_norm: base.grad_norm,
            iterations: base.iterations,
        });
    }
    refuse_non_unique(&base)?;
    let rate = side.rate(qs.len());
    let t_hat = base.cost_value;

    let reps: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let stream = rng.substream(r as u64);
            let (p_star, q_star);
            let (pp, qq): (&DiscreteMeasure, &Sample) = match side {
                ResampleSide::WeightsP { n } => {
                    p_star = sample_discrete(p, n, &stream.substream(0)).ok()?;
                    (&p_star, qs)
                }
                ResampleSide::RowsQ => {
                    q_star = qs.resample(&mut stream.substream(1).rng());
                    (p, &q_star)
                }
                ResampleSide::Both { n } => {
                    p_star = sample_discrete(p, n, &stream.substream(0)).ok()?;
                    q_star = qs.resample(&mut stream.substream(1).rng());
                    (&p_star, &q_star)
                }
            };
            let o = warm_opts(opts, &base.potential, stream.substream(2));
            let res = solve_dual(pp, qq, spec, &o).ok()?;
            if !res.converged {
                return None;
            }
            Some(rate * (res.cost_value - t_hat))
        })
        .collect();

    let draws: Vec<f64> = reps.iter().filter_map(|x| *x).collect();
    let excluded = b - draws.len();
    check_exclusions(excluded, b)?;
    Ok(BootstrapResult {
        draws,
        rate,
        point_estimate: t_hat,
        excluded,
        total: b,
    })
}

/// Default smoothing scale for the Hessian estimators:
/// 0.5 * m^{-1/5} * (support diameter / 2).
pub fn default_bandwidth(m: usize, diam: f64) -> f64 {
    0.5 * (m as f64).powf(-0.2) * (diam / 2.0)
}

fn enforce_row_sums(h: &mut [Vec<f64>]) {
    let n = h.len();
    for i in 0..n {
        let off = kahan_sum((0..n).filter(|&j| j != i).map(|j| h[i][j]));
        h[i][i] = -off;
    }
}

/// Hessian of the dual by central finite differences of the gradient on a
/// fixed sample (common random numbers), symmetrized, rows summing to zero.
pub fn hessian_fd(
    p: &DiscreteMeasure,
    qs: &Sample,
    z: &Potential,
    spec: &CostSpec,
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    if step <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference step must be > 0".into()));
    }
    let n = p.len();
    let cache = crate::semidual::CostCache::new(p, qs, spec)?;
    let mut h = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut zp = z.z.clone();
        let mut zm = z.z.clone();
        zp[k] += step;
        zm[k] -= step;
        let mp = cache.masses(&zp);
        let mm = cache.masses(&zm);
        for i in 0..n {
            // gradient is p - mass; only the mass part moves
            h[i][k] = -(mp[i] - mm[i]) / (2.0 * step);
        }
    }
    if h.iter().flatten().all(|&x| x == 0.0) {
        return Err(Error::DegenerateStep);
    }
    let mut sym = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            sym[i][j] = 0.5 * (h[i][j] + h[j][i]);
        }
    }
    enforce_row_sums(&mut sym);
    Ok(sym)
}

/// Hessian off-diagonals as boundary-layer averages: rows within distance
/// h * |grad u_ij| of the interface between cells i and j contribute
/// 1 / |grad u_ij|, averaged and scaled by 1/(2h).
pub fn hessian_band(
    p: &DiscreteMeasure,
    qs: &Sample,
    z: &Potential,
    spec: &CostSpec,
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("bandwidth must be > 0".into()));
    }
    let n = p.len();
    let m = qs.len();
    let mut acc = vec![vec![0.0; n]; n];
    for y in &qs.rows {
        let mut vals = Vec::with_capacity(n);
        for (i, x) in p.points.iter().enumerate() {
            vals.push(cost(spec, x, y)? - z.z[i]);
        }
        let winner = (0..n)
            .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
            .unwrap();
        for i in 0..n {
            for j in i + 1..n {
                if winner != i && winner != j {
                    continue;
                }
                let u = vals[i] - vals[j];
                let gi = match cost_grad_y(spec, &p.points[i], y) {
                    Ok(g) => g,
                    Err(Error::SingularGradient) => continue,
                    Err(e) => return Err(e),
                };
                let gj = match cost_grad_y(spec, &p.points[j], y) {
                    Ok(g) => g,
                    Err(Error::SingularGradient) => continue,
                    Err(e) => return Err(e),
                };
                let gnorm = gi
                    .iter()
                    .zip(&gj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if gnorm == 0.0 {
                    continue;
                }
                if u.abs() < h * gnorm {
                    acc[i][j] += 1.0 / gnorm;
                }
            }
        }
    }
    let scale = 1.0 / (2.0 * h * m as f64);
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            out[i][j] = acc[i][j] * scale;
            out[j][i] = out[i][j];
        }
    }
    enforce_row_sums(&mut out);
    Ok(out)
}

/// Score covariance A = sum_k p_k g_k g_k' with g_k the mean-zero projection
/// of e_k minus the cell-mass vector. Equals Sigma(p) exactly when the cell
/// masses match the weights.
pub fn score_cov(weights: &[f64], masses: &[f64]) -> Vec<Vec<f64>> {
    let n = weights.len();
    let mut a = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut g: Vec<f64> = (0..n)
            .map(|i| (if i == k { 1.0 } else { 0.0 }) - masses[i])
            .collect();
        let mean = kahan_sum(g.iter().copied()) / n as f64;
        for v in &mut g {
            *v -= mean;
        }
        for i in 0..n {
            for j in 0..n {
                a[i][j] += weights[k] * g[i] * g[j];
            }
        }
    }
    a
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialClt {
    pub z_tilde: Potential,
    pub hessian: Vec<Vec<f64>>,
    pub score_cov: Vec<Vec<f64>>,
    pub sandwich: Vec<Vec<f64>>,
}

fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Pseudo-inverse of the Hessian on the subspace orthogonal to 1: drop the
/// eigendirection closest to 1, invert the rest. Errors when a remaining
/// eigenvalue is below 1e-8 in magnitude (strict concavity failure).
fn pinv_on_mean_zero(h: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = h.len();
    let eig = to_dmatrix(h).symmetric_eigen();
    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    // index of the eigenvector most aligned with 1
    let drop = (0..n)
        .max_by(|&a, &b| {
            let da = eig.eigenvectors.column(a).dot(&ones).abs();
            let db = eig.eigenvectors.column(b).dot(&ones).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let mut pinv = DMatrix::zeros(n, n);
    for k in 0..n {
        if k == drop {
            continue;
        }
        let lam = eig.eigenvalues[k];
        if lam.abs() < 1e-8 {
            return Err(Error::SingularHessian(lam));
        }
        let v = eig.eigenvectors.column(k);
        pinv += (&v * v.transpose()) / lam;
    }
    Ok(pinv)
}

/// Solve for the optimal potential and assemble the sandwich covariance
/// H^+ A H^+ of sqrt(n)(z_hat - z_tilde) on the mean-zero subspace.
pub fn potential_clt(
    p: &DiscreteMeasure,
    qs: &Sample,
    spec: &CostSpec,
    opts: &SolveOptions,
) -> Result<PotentialClt> {
    potential_clt_with_bandwidth(p, qs, spec, opts, default_bandwidth(qs.len(), p.diameter()))
}

pub fn potential_clt_with_bandwidth(
    p: &DiscreteMeasure,
    qs: &Sample,
    spec: &CostSpec,
    opts: &SolveOptions,
    bandwidth: f64,
) -> Result<PotentialClt> {
    let res = solve_dual(p, qs, spec, opts)?;
    if !res.converged {
        return Err(Error::NonConvergence {
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        });
    }
    let z = res.potential.to_mean_zero();
    let hessian = hessian_band(p, qs, &z, spec, bandwidth)?;
    let a = score_cov(&p.weights, &res.cell_masses);
    let hp = pinv_on_mean_zero(&hessian)?;
    let sandwich = &hp * to_dmatrix(&a) * &hp;
    Ok(PotentialClt {
        z_tilde: z,
        hessian,
        score_cov: a,
        sandwich: to_rows(&sandwich),
    })
}

/// Monte-Carlo (1-alpha) quantile of max_i |N_i| with N ~ N(0, sandwich).
pub fn band_quantile(pclt: &PotentialClt, alpha: f64, draws: usize, rng: &RandomSource) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha={alpha} must lie in (0,1)")));
    }
    let n = pclt.sandwich.len();
    let eig = to_dmatrix(&pclt.sandwich).symmetric_eigen();
    let mut factor = eig.eigenvectors.clone();
    for k in 0..n {
        factor.column_mut(k).scale_mut(eig.eigenvalues[k].max(0.0).sqrt());
    }
    let mut r = rng.rng();
    let mut maxes = Vec::with_capacity(draws);
    let mut xi = DVector::zeros(n);
    for _ in 0..draws {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut r);
        }
        let x = &factor * &xi;
        maxes.push(x.iter().fold(0.0f64, |acc, &b| acc.max(b.abs())));
    }
    Ok(crate::stats::quantile(&maxes, 1.0 - alpha))
}

/// Bootstrap draws of rate * (z* - z_hat), projected onto the mean-zero
/// subspace. One vector per successful replicate.
pub fn bootstrap_potentials(
    side: ResampleSide,
    p: &DiscreteMeasure,
    qs: &Sample,
    spec: &CostSpec,
    opts: &SolveOptions,
    b: usize,
    rng: &RandomSource,
) -> Result<Vec<Vec<f64>>> {
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs B >= 1".into()));
    }
    let base = solve_dual(p, qs, spec, opts)?;
    if !base.converged {
        return Err(Error::NonConvergence {
            grad_norm: base.grad_norm,
            iterations: base.iterations,
        });
    }
    refuse_non_unique(&base)?;
    let z_hat = base.potential.to_mean_zero();
    let rate = side.rate(qs.len());

    let reps: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let stream = rng.substream(r as u64);
            let (p_star, q_star);
            let (pp, qq): (&DiscreteMeasure, &Sample) = match side {
                ResampleSide::WeightsP { n } => {
                    p_star = sample_discrete(p, n, &stream.substream(0)).ok()?;
                    (&p_star, qs)
                }
                ResampleSide::RowsQ => {
                    q_star = qs.resample(&mut stream.substream(1).rng());
                    (p, &q_star)
                }
                ResampleSide::Both { n } => {
                    p_star = sample_discrete(p, n, &stream.substream(0)).ok()?;
                    q_star = qs.resample(&mut stream.substream(1).rng());
                    (&p_star, &q_star)
                }
            };
            let o = warm_opts(opts, &z_hat, stream.substream(2));
            let res = solve_dual(pp, qq, spec, &o).ok()?;
            if !res.converged || res.potential.z.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let zs = res.potential.to_mean_zero();
            let mut d: Vec<f64> = zs.z.iter().zip(&z_hat.z).map(|(a, b)| rate * (a - b)).collect();
            let mean = kahan_sum(d.iter().copied()) / d.len() as f64;
            for v in &mut d {
                *v -= mean;
            }
            Some(d)
        })
        .collect();

    let draws: Vec<Vec<f64>> = reps.into_iter().flatten().collect();
    let excluded = b - draws.len();
    check_exclusions(excluded, b)?;
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clt::sigma_p;
    use crate::measures::{sample_continuous, ContinuousSpec};
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
    fn bootstrap_nonnegative_at_zero_cost() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let p = DiscreteMeasure::uniform(pts.clone()).unwrap();
        let qs = Sample::new(pts.into_iter().cycle().take(99).collect()).unwrap();
        let opts = SolveOptions::new(RandomSource::new(70)).with_tol(1e-7);
        let res = bootstrap_cost(
            ResampleSide::RowsQ,
            &p,
            &qs,
            &CostSpec::SquaredEuclidean,
            &opts,
            100,
            &RandomSource::new(71),
        )
        .unwrap();
        assert!(res.point_estimate.abs() < 1e-10);
        assert!(res.draws.iter().all(|&d| d >= -1e-8), "min={:?}", res.draws.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn bootstrap_variance_matches_limit() {
        let p = two_atoms();
        let qs = u11_sample(4000, 72);
        let opts = SolveOptions::new(RandomSource::new(73)).with_tol(1e-5);
        let res = bootstrap_cost(
            ResampleSide::RowsQ,
            &p,
            &qs,
            &CostSpec::SquaredEuclidean,
            &opts,
            2000,
            &RandomSource::new(74),
        )
        .unwrap();
        let v = variance(&res.draws);
        let target = 4.0 / 45.0;
        assert!((v - target).abs() / target < 0.2, "var={v}");
        assert_eq!(res.excluded, 0);
    }

    #[test]
    fn bootstrap_deterministic_across_calls() {
        let p = two_atoms();
        let qs = u11_sample(500, 75);
        let opts = SolveOptions::new(RandomSource::new(76)).with_tol(1e-4);
        let run = || {
            bootstrap_cost(
                ResampleSide::Both { n: 300 },
                &p,
                &qs,
                &CostSpec::SquaredEuclidean,
                &opts,
                60,
                &RandomSource::new(77),
            )
            .unwrap()
            .draws
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn hessian_fd_benchmark() {
        let p = two_atoms();
        let qs = u11_sample(100_000, 78);
        let z = Potential::mean_zero(vec![0.0, 0.0]);
        let h = hessian_fd(&p, &qs, &z, &CostSpec::SquaredEuclidean, 0.05).unwrap();
        assert!((h[0][1] - 0.125).abs() < 0.02, "h01={}", h[0][1]);
        assert!(h[0][1] >= 0.0);
        for row in &h {
            assert!(kahan_sum(row.iter().copied()).abs() < 1e-12);
        }
        assert!((h[0][1] - h[1][0]).abs() < 1e-15);
    }

    #[test]
    fn hessian_fd_degenerate_step_errors() {
        let p = two_atoms();
        let qs = Sample::new(vec![vec![-0.9], vec![0.9]]).unwrap();
        let z = Potential::mean_zero(vec![0.0, 0.0]);
        assert!(matches!(
            hessian_fd(&p, &qs, &z, &CostSpec::SquaredEuclidean, 1e-12),
            Err(Error::DegenerateStep)
        ));
    }

    #[test]
    fn hessian_band_benchmark_and_agreement() {
        let p = two_atoms();
        let qs = u11_sample(100_000, 79);
        let z = Potential::mean_zero(vec![0.0, 0.0]);
        let sq = CostSpec::SquaredEuclidean;
        let hb = hessian_band(&p, &qs, &z, &sq, 0.05).unwrap();
        assert!((hb[0][1] - 0.125).abs() < 0.02, "band={}", hb[0][1]);
        let hf = hessian_fd(&p, &qs, &z, &sq, 0.05).unwrap();
        let gap = hb
            .iter()
            .flatten()
            .zip(hf.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap <= 0.03, "gap={gap}");
    }

    #[test]
    fn hessian_band_disjoint_cells() {
        // cells far apart: no sample row lies near the interface
        let p = DiscreteMeasure::new(vec![vec![-100.0], vec![100.0]], vec![0.5, 0.5]).unwrap();
        let qs = u11_sample(5000, 80);
        let z = Potential::mean_zero(vec![0.0, 0.0]);
        let h = hessian_band(&p, &qs, &z, &CostSpec::SquaredEuclidean, 0.01).unwrap();
        assert_eq!(h[0][1], 0.0);
    }

    #[test]
    fn score_cov_identity_at_matched_masses() {
        for weights in [vec![0.5, 0.5], vec![0.2, 0.3, 0.5], vec![0.1, 0.2, 0.3, 0.4]] {
            let a = score_cov(&weights, &weights);
            let s = sigma_p(&weights);
            for (ra, rs) in a.iter().zip(&s) {
                for (x, y) in ra.iter().zip(rs) {
                    assert!((x - y).abs() < 1e-12, "a={x} sigma={y}");
                }
            }
        }
    }

    #[test]
    fn sandwich_matches_hand_computation() {
        // two-atom benchmark: H restricted to the difference direction has
        // eigenvalue -1/4, score covariance 1/2 there, so the sandwich is
        // 16 * 1/2 = 8 along (1,-1)/sqrt(2), i.e. [[4,-4],[-4,4]]
        let p = two_atoms();
        let qs = u11_sample(200_000, 81);
        let opts = SolveOptions::new(RandomSource::new(82)).with_tol(1e-5);
        let c = potential_clt(&p, &qs, &CostSpec::SquaredEuclidean, &opts).unwrap();
        assert!((c.sandwich[0][0] - 4.0).abs() / 4.0 < 0.25, "s00={}", c.sandwich[0][0]);
        assert!((c.sandwich[0][1] + 4.0).abs() / 4.0 < 0.25, "s01={}", c.sandwich[0][1]);
        assert!((c.sandwich[0][0] - c.sandwich[1][1]).abs() < 0.2);
        // score covariance at the balanced optimum is close to Sigma(p)
        assert!((c.score_cov[0][0] - 0.25).abs() < 0.01);
    }

    #[test]
    fn band_quantile_cases() {
        let zero = PotentialClt {
            z_tilde: Potential::mean_zero(vec![0.0, 0.0]),
            hessian: vec![vec![0.0; 2]; 2],
            score_cov: vec![vec![0.0; 2]; 2],
            sandwich: vec![vec![0.0; 2]; 2],
        };
        assert_eq!(band_quantile(&zero, 0.05, 1000, &RandomSource::new(83)).unwrap(), 0.0);

        // rank-one sandwich with unit coordinate variances: max|N_i| = |N(0,1)|
        let unit = PotentialClt {
            z_tilde: Potential::mean_zero(vec![0.0, 0.0]),
            hessian: vec![vec![0.0; 2]; 2],
            score_cov: vec![vec![0.0; 2]; 2],
            sandwich: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
        };
        let q = band_quantile(&unit, 0.05, 1_000_000, &RandomSource::new(84)).unwrap();
        assert!((q - 1.96).abs() < 0.02, "q={q}");
        let q10 = band_quantile(&unit, 0.10, 200_000, &RandomSource::new(84)).unwrap();
        let q01 = band_quantile(&unit, 0.01, 200_000, &RandomSource::new(84)).unwrap();
        assert!(q01 > q && q > q10);
    }

    #[test]
    fn bootstrap_potentials_orthogonal_and_deterministic() {
        let p = two_atoms();
        let qs = u11_sample(2000, 85);
        let opts = SolveOptions::new(RandomSource::new(86)).with_tol(1e-5);
        let draws = bootstrap_potentials(
            ResampleSide::WeightsP { n: 2000 },
            &p,
            &qs,
            &CostSpec::SquaredEuclidean,
            &opts,
            120,
            &RandomSource::new(87),
        )
        .unwrap();
        for d in &draws {
            assert!(kahan_sum(d.iter().copied()).abs() < 1e-10);
        }
        let again = bootstrap_potentials(
            ResampleSide::WeightsP { n: 2000 },
            &p,
            &qs,
            &CostSpec::SquaredEuclidean,
            &opts,
            120,
            &RandomSource::new(87),
        )
        .unwrap();
        assert_eq!(draws, again);
    }

    #[test]
    fn bootstrap_potentials_covariance_consistent_with_sandwich() {
        let p = two_atoms();
        let qs = u11_sample(20_000, 88);
        let sq = CostSpec::SquaredEuclidean;
        let opts = SolveOptions::new(RandomSource::new(89)).with_tol(1e-5);
        let clt = potential_clt(&p, &qs, &sq, &opts).unwrap();
        let draws = bootstrap_potentials(
            ResampleSide::WeightsP { n: 4000 },
            &p,
            &qs,
            &sq,
            &opts,
            400,
            &RandomSource::new(90),
        )
        .unwrap();
        // empirical covariance of the first coordinate (the draws live on the
        // difference direction, so one scalar determines the matrix)
        let c0: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let v = variance(&c0);
        let target = clt.sandwich[0][0];
        assert!((v - target).abs() / target < 0.25, "boot={v} sandwich={target}");
    }
}
