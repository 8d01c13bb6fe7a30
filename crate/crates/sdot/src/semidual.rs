//! The finite-dimensional semidiscrete dual: evaluate the objective, assign
//! sample points to generalized Laguerre cells, and maximize over potentials.
//!
//! The empirical objective is concave and piecewise linear, so the solver runs
//! projected gradient ascent with line search and iterate averaging first, then
//! polishes with a softmin-smoothed Newton continuation. The smoothing
//! temperature is driven down until the value gap is far below the requested
//! tolerance, which is what makes the solver agree with the exact LP oracle to
//! 1e-7 on discrete instances.

use crate::cost::{cost, CostSpec};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, RandomSource, Sample};
use crate::stats::{kahan_sum, KahanSum};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    FirstZero,
    MeanZero,
    Raw,
}

/// Dual vector z with a gauge tag fixing the additive constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Potential {
    pub z: Vec<f64>,
    pub gauge: Gauge,
}

impl Potential {
    pub fn raw(z: Vec<f64>) -> Self {
        Self { z, gauge: Gauge::Raw }
    }

    pub fn mean_zero(mut z: Vec<f64>) -> Self {
        let m = kahan_sum(z.iter().copied()) / z.len() as f64;
        for v in &mut z {
            *v -= m;
        }
        Self {
            z,
            gauge: Gauge::MeanZero,
        }
    }

    pub fn first_zero(mut z: Vec<f64>) -> Self {
        let z0 = z[0];
        for v in &mut z {
            *v -= z0;
        }
        Self {
            z,
            gauge: Gauge::FirstZero,
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        match self.gauge {
            Gauge::FirstZero if self.z[0] != 0.0 => Err(Error::InvalidArgument(
                "first_zero gauge requires z[0] = 0".into(),
            )),
            Gauge::MeanZero if kahan_sum(self.z.iter().copied()).abs() > 1e-10 => Err(
                Error::InvalidArgument("mean_zero gauge requires sum(z) = 0".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn to_mean_zero(&self) -> Potential {
        Potential::mean_zero(self.z.clone())
    }

    pub fn to_first_zero(&self) -> Potential {
        Potential::first_zero(self.z.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_grad: f64,
    pub max_iters: usize,
    pub multistart: usize,
    pub rng: RandomSource,
    /// Warm start; when set, multistart is skipped.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn new(rng: RandomSource) -> Self {
        Self {
            tol_grad: 1e-6,
            max_iters: 400,
            multistart: 1,
            rng,
            init: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_grad = tol;
        self
    }

    pub fn with_multistart(mut self, k: usize) -> Self {
        self.multistart = k.max(1);
        self
    }

    pub fn with_init(mut self, z: Vec<f64>) -> Self {
        self.init = Some(z);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.tol_grad <= 0.0 || self.max_iters == 0 || self.multistart == 0 {
            return Err(Error::InvalidArgument(
                "solve options need tol_grad > 0, max_iters >= 1, multistart >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSolveResult {
    pub potential: Potential,
    pub cost_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub cell_masses: Vec<f64>,
    pub converged: bool,
    /// Distinct optima found by multistart (mean-zero gauge, deduplicated).
    pub candidates: Vec<Potential>,
}

/// Winning atom for y: argmin_i { c(x_i, y) - z_i }, ties to the lowest index.
pub fn assign(y: &[f64], p: &DiscreteMeasure, z: &Potential, spec: &CostSpec) -> Result<usize> {
    let mut best = 0usize;
    let mut best_val = f64::INFINITY;
    for (i, x) in p.points.iter().enumerate() {
        let v = cost(spec, x, y)? - z.z[i];
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

/// Semidiscrete dual objective with the Q-integral replaced by the sample mean.
pub fn dual_value(p: &DiscreteMeasure, qs: &Sample, z: &Potential, spec: &CostSpec) -> Result<f64> {
    let cache = CostCache::new(p, qs, spec)?;
    Ok(cache.hard_value(&z.z, &p.weights))
}

/// Fraction of sample rows assigned to each atom.
pub fn cell_masses(p: &DiscreteMeasure, qs: &Sample, z: &Potential, spec: &CostSpec) -> Result<Vec<f64>> {
    let cache = CostCache::new(p, qs, spec)?;
    Ok(cache.masses(&z.z))
}

/// Gradient of the dual: p_i - mass_i, projected onto the gauge subspace.
pub fn dual_gradient(p: &DiscreteMeasure, qs: &Sample, z: &Potential, spec: &CostSpec) -> Result<Vec<f64>> {
    let masses = cell_masses(p, qs, z, spec)?;
    let mut g: Vec<f64> = p.weights.iter().zip(&masses).map(|(a, b)| a - b).collect();
    match z.gauge {
        Gauge::MeanZero => {
            // entries already sum to zero; the mean-zero projection is exact
            let m = kahan_sum(g.iter().copied()) / g.len() as f64;
            for v in &mut g {
                *v -= m;
            }
        }
        Gauge::FirstZero => g[0] = 0.0,
        Gauge::Raw => {}
    }
    Ok(g)
}

/// A-priori bound on the optimal dual vector:
/// (1 / min_i p_i) * max_i mean_y c(y, x_i).
pub fn kstar_bound(p: &DiscreteMeasure, qs: &Sample, spec: &CostSpec) -> Result<f64> {
    if p.weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::ZeroWeightAtom);
    }
    let cache = CostCache::new(p, qs, spec)?;
    Ok(cache.kstar(&p.weights))
}

/// |f(y) - g(y)| for the two inf-potentials induced by z and s.
pub fn lipschitz_gap(
    z: &Potential,
    s: &Potential,
    p: &DiscreteMeasure,
    y: &[f64],
    spec: &CostSpec,
) -> Result<f64> {
    if z.len() != s.len() || z.len() != p.len() {
        return Err(Error::DimensionMismatch("potentials and measure disagree on N".into()));
    }
    let inf_pot = |zz: &[f64]| -> Result<f64> {
        let mut best = f64::INFINITY;
        for (i, x) in p.points.iter().enumerate() {
            best = best.min(cost(spec, x, y)? - zz[i]);
        }
        Ok(best)
    };
    Ok((inf_pot(&z.z)? - inf_pot(&s.z)?).abs())
}

/// Convenience wrapper returning just the optimal cost.
pub fn transport_cost(
    p: &DiscreteMeasure,
    qs: &Sample,
    spec: &CostSpec,
    opts: &SolveOptions,
) -> Result<f64> {
    Ok(solve_dual(p, qs, spec, opts)?.cost_value)
}

/// Precomputed cost matrix c(x_i, y_j), row-major over atoms.
pub(crate) struct CostCache {
    pub c: Vec<f64>,
    pub n: usize,
    pub m: usize,
}

const PAR_CHUNK: usize = 8192;

impl CostCache {
    pub fn new(p: &DiscreteMeasure, qs: &Sample, spec: &CostSpec) -> Result<Self> {
        if p.dim() != qs.dim() {
            return Err(Error::DimensionMismatch(format!(
                "atoms in dimension {} vs sample in dimension {}",
                p.dim(),
                qs.dim()
            )));
        }
        let n = p.len();
        let m = qs.len();
        let mut c = vec![0.0; n * m];
        for (i, x) in p.points.iter().enumerate() {
            let row = &mut c[i * m..(i + 1) * m];
            row.par_chunks_mut(PAR_CHUNK)
                .enumerate()
                .for_each(|(chunk, out)| {
                    let base = chunk * PAR_CHUNK;
                    for (k, v) in out.iter_mut().enumerate() {
                        *v = cost(spec, x, &qs.rows[base + k]).unwrap();
                    }
                });
        }
        Ok(Self { c, n, m })
    }

    #[inline]
    fn col_min(&self, z: &[f64], j: usize) -> (usize, f64) {
        let mut best = 0usize;
        let mut best_val = self.c[j] - z[0];
        for i in 1..self.n {
            let v = self.c[i * self.m + j] - z[i];
            if v < best_val {
                best = i;
                best_val = v;
            }
        }
        (best, best_val)
    }

    /// Exact (hard-assignment) dual value with compensated, order-fixed summation.
    pub fn hard_value(&self, z: &[f64], weights: &[f64]) -> f64 {
        let m = self.m;
        let chunk_sums: Vec<f64> = (0..m.div_ceil(PAR_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = KahanSum::new();
                let end = ((chunk + 1) * PAR_CHUNK).min(m);
                for j in chunk * PAR_CHUNK..end {
                    acc.add(self.col_min(z, j).1);
                }
                acc.value()
            })
            .collect();
        let integral = kahan_sum(chunk_sums) / m as f64;
        let linear = kahan_sum(weights.iter().zip(z).map(|(w, v)| w * v));
        linear + integral
    }

    pub fn masses(&self, z: &[f64]) -> Vec<f64> {
        let m = self.m;
        let counts: Vec<Vec<u64>> = (0..m.div_ceil(PAR_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut counts = vec![0u64; self.n];
                let end = ((chunk + 1) * PAR_CHUNK).min(m);
                for j in chunk * PAR_CHUNK..end {
                    counts[self.col_min(z, j).0] += 1;
                }
                counts
            })
            .collect();
        let mut total = vec![0u64; self.n];
        for c in counts {
            for (t, v) in total.iter_mut().zip(c) {
                *t += v;
            }
        }
        total.into_iter().map(|c| c as f64 / m as f64).collect()
    }

    pub fn kstar(&self, weights: &[f64]) -> f64 {
        let pmin = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let max_mean = (0..self.n)
            .map(|i| kahan_sum(self.c[i * self.m..(i + 1) * self.m].iter().copied()) / self.m as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        max_mean / pmin
    }

    /// Directional derivative of the hard value at z along d.
    fn dir_deriv(&self, z: &[f64], d: &[f64], weights: &[f64]) -> f64 {
        let m = self.m;
        let chunk_sums: Vec<f64> = (0..m.div_ceil(PAR_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = KahanSum::new();
                let end = ((chunk + 1) * PAR_CHUNK).min(m);
                for j in chunk * PAR_CHUNK..end {
                    acc.add(-d[self.col_min(z, j).0]);
                }
                acc.value()
            })
            .collect();
        let integral = kahan_sum(chunk_sums) / m as f64;
        kahan_sum(weights.iter().zip(d).map(|(w, v)| w * v)) + integral
    }

    /// Smoothed value, gradient and (optionally) Hessian at temperature eps.
    /// Gradient is p - softmass; the Hessian is negative semidefinite with
    /// null direction 1.
    fn smoothed(
        &self,
        z: &[f64],
        weights: &[f64],
        eps: f64,
        want_hess: bool,
    ) -> (f64, Vec<f64>, Option<Vec<f64>>) {
        let n = self.n;
        let m = self.m;
        struct Acc {
            val: KahanSum,
            soft: Vec<f64>,
            hess: Vec<f64>,
        }
        let chunks: Vec<Acc> = (0..m.div_ceil(PAR_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = Acc {
                    val: KahanSum::new(),
                    soft: vec![0.0; n],
                    hess: if want_hess { vec![0.0; n * n] } else { Vec::new() },
                };
                let mut pi = vec![0.0; n];
                let end = ((chunk + 1) * PAR_CHUNK).min(m);
                for j in chunk * PAR_CHUNK..end {
                    let (_, amin) = self.col_min(z, j);
                    let mut wsum = 0.0;
                    for i in 0..n {
                        let a = self.c[i * m + j] - z[i];
                        let w = (-(a - amin) / eps).exp();
                        pi[i] = w;
                        wsum += w;
                    }
                    acc.val.add(amin - eps * (wsum).ln());
                    let inv = 1.0 / wsum;
                    for i in 0..n {
                        pi[i] *= inv;
                        acc.soft[i] += pi[i];
                    }
                    if want_hess {
                        for i in 0..n {
                            let pii = pi[i];
                            if pii == 0.0 {
                                continue;
                            }
                            for k in 0..n {
                                acc.hess[i * n + k] -= pii * ((i == k) as u8 as f64 - pi[k]);
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut val = KahanSum::new();
        let mut soft = vec![0.0; n];
        let mut hess = if want_hess { vec![0.0; n * n] } else { Vec::new() };
        for c in &chunks {
            val.add(c.val.value());
            for i in 0..n {
                soft[i] += c.soft[i];
            }
            if want_hess {
                for k in 0..n * n {
                    hess[k] += c.hess[k];
                }
            }
        }
        let integral = val.value() / m as f64;
        let linear = kahan_sum(weights.iter().zip(z).map(|(w, v)| w * v));
        let grad: Vec<f64> = (0..n).map(|i| weights[i] - soft[i] / m as f64).collect();
        let hess = if want_hess {
            let scale = 1.0 / (eps * m as f64);
            Some(hess.into_iter().map(|h| h * scale).collect())
        } else {
            None
        };
        (linear + integral, grad, hess)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn project_mean_zero(v: &mut [f64]) {
    let m = kahan_sum(v.iter().copied()) / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

fn clip_ball(z: &mut [f64], radius: f64) {
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        for x in z.iter_mut() {
            *x *= s;
        }
    }
}

struct RunOutcome {
    z: Vec<f64>,
    value: f64,
    iterations: usize,
    grad_norm: f64,
}

/// One optimization run from a given start point.
fn optimize_from(
    cache: &CostCache,
    weights: &[f64],
    mut z: Vec<f64>,
    opts: &SolveOptions,
    kstar: f64,
    warm: bool,
) -> RunOutcome {
    let n = cache.n;
    let radius = kstar + 1.0;
    let mut iterations = 0usize;

    if n == 1 {
        let value = cache.hard_value(&z, weights);
        return RunOutcome {
            z,
            value,
            iterations: 0,
            grad_norm: 0.0,
        };
    }

    // Phase A: projected gradient ascent with line search and averaging on the
    // piecewise-linear objective.
    let phase_a = if warm { 3 } else { opts.max_iters.min(20) };
    let mut avg = z.clone();
    let mut avg_count = 0usize;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..phase_a {
        iterations += 1;
        let masses = cache.masses(&z);
        let mut g: Vec<f64> = weights.iter().zip(&masses).map(|(w, q)| w - q).collect();
        project_mean_zero(&mut g);
        grad_norm = sup_norm(&g);
        if grad_norm <= opts.tol_grad {
            break;
        }
        // bracket a step by doubling while the directional derivative stays
        // positive, then bisect on the (nonincreasing) derivative
        let gnorm2 = g.iter().map(|x| x * x).sum::<f64>();
        let mut t_hi = (kstar.max(1.0)) / gnorm2.sqrt().max(1e-12);
        let mut t_lo = 0.0;
        let step_at = |t: f64| -> Vec<f64> {
            z.iter().zip(&g).map(|(a, b)| a + t * b).collect()
        };
        if cache.dir_deriv(&step_at(t_hi), &g, weights) > 0.0 {
            // already ascending at the cap; accept the cap
        } else {
            for _ in 0..30 {
                let t_mid = 0.5 * (t_lo + t_hi);
                if cache.dir_deriv(&step_at(t_mid), &g, weights) > 0.0 {
                    t_lo = t_mid;
                } else {
                    t_hi = t_mid;
                }
            }
            t_hi = 0.5 * (t_lo + t_hi);
        }
        z = step_at(t_hi);
        clip_ball(&mut z, radius);
        // Polyak-style tail averaging
        avg_count += 1;
        let w = 1.0 / avg_count as f64;
        for (a, b) in avg.iter_mut().zip(&z) {
            *a += w * (*b - *a);
        }
    }
    if avg_count > 1 && cache.hard_value(&avg, weights) > cache.hard_value(&z, weights) {
        z = avg;
    }
    if grad_norm <= opts.tol_grad {
        let value = cache.hard_value(&z, weights);
        return RunOutcome {
            z,
            value,
            iterations,
            grad_norm,
        };
    }

    // Phase B: softmin smoothing continuation with damped Newton steps.
    let c_scale = (0..n)
        .map(|i| kahan_sum(cache.c[i * cache.m..(i + 1) * cache.m].iter().copied()) / cache.m as f64)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let eps_floor_rel = (opts.tol_grad * 1e-4).clamp(1e-12, 1e-4);
    let eps_start_rel: f64 = if warm { 1e-4 } else { 1e-1 };
    let mut eps_rel = eps_start_rel;
    let mut soft_grad_norm = f64::INFINITY;
    let step_cap = 2.0 * kstar.max(1.0);
    let mut mu = 1e-8; // Levenberg damping, adapted across iterations
    loop {
        let eps = eps_rel * c_scale;
        let final_stage = eps_rel <= eps_floor_rel * (1.0 + 1e-9);
        // intermediate stages only need to stay near the central path
        let stage_tol = if final_stage {
            (opts.tol_grad * 0.5).max(1e-13)
        } else {
            (opts.tol_grad * 0.5).max(0.05 * eps_rel)
        };
        let mut t0 = 1.0f64;
        'stage: for _ in 0..60 {
            if iterations >= opts.max_iters {
                break;
            }
            iterations += 1;
            let (val, grad, hess) = cache.smoothed(&z, weights, eps, true);
            soft_grad_norm = sup_norm(&grad);
            if soft_grad_norm <= stage_tol {
                break;
            }
            let hess = hess.unwrap();
            let trace = (0..n).map(|i| -hess[i * n + i]).sum::<f64>().max(1e-300);
            let mut accepted = false;
            for _escalation in 0..8 {
                // solve (-H + damping) s = g; the rank-one anchor pins the
                // all-ones null direction without touching its complement
                let mut b = nalgebra::DMatrix::<f64>::zeros(n, n);
                let anchor = trace / n as f64;
                let ridge = mu * trace / n as f64;
                for i in 0..n {
                    for k in 0..n {
                        b[(i, k)] = -hess[i * n + k] + anchor;
                    }
                    b[(i, i)] += ridge;
                }
                let rhs = nalgebra::DVector::from_column_slice(&grad);
                let s_opt = b.cholesky().map(|ch| ch.solve(&rhs).data.as_vec().clone());
                let Some(mut s) = s_opt else {
                    mu *= 10.0;
                    continue;
                };
                project_mean_zero(&mut s);
                let snorm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                if snorm > step_cap {
                    let sc = step_cap / snorm;
                    for x in s.iter_mut() {
                        *x *= sc;
                    }
                }
                let dir_dot = grad.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
                if !(dir_dot > 0.0) {
                    mu *= 10.0;
                    continue;
                }
                let mut t = t0;
                for _ in 0..80 {
                    let mut zt: Vec<f64> = z.iter().zip(&s).map(|(a, b)| a + t * b).collect();
                    clip_ball(&mut zt, radius);
                    let (vt, _, _) = cache.smoothed(&zt, weights, eps, false);
                    if vt >= val + 1e-4 * t * dir_dot {
                        z = zt;
                        accepted = true;
                        // remember the accepted scale so the next search does
                        // not rewalk the whole halving ladder
                        t0 = (t * 16.0).min(1.0);
                        break;
                    }
                    t *= 0.5;
                }
                if accepted {
                    mu = (mu * 0.25).max(1e-10);
                    break;
                }
                mu *= 10.0;
                t0 = 1.0;
            }
            if !accepted {
                break 'stage;
            }
        }
        if std::env::var("SDOT_DEBUG").is_ok() {
            eprintln!(
                "stage eps_rel={eps_rel:.1e} iters={iterations} grad={soft_grad_norm:.3e} mu={mu:.1e}"
            );
        }
        if eps_rel <= eps_floor_rel * (1.0 + 1e-9) || iterations >= opts.max_iters {
            break;
        }
        eps_rel = (eps_rel * 0.1).max(eps_floor_rel);
    }

    let masses = cache.masses(&z);
    let mut g_hard: Vec<f64> = weights.iter().zip(&masses).map(|(w, q)| w - q).collect();
    project_mean_zero(&mut g_hard);
    let grad_norm = sup_norm(&g_hard).min(soft_grad_norm);
    let value = cache.hard_value(&z, weights);
    RunOutcome {
        z,
        value,
        iterations,
        grad_norm,
    }
}

/// Maximize the semidiscrete dual. Zero-weight atoms of an empirical measure
/// are dropped before solving; their potential entries come back as NaN.
pub fn solve_dual(
    p: &DiscreteMeasure,
    qs: &Sample,
    spec: &CostSpec,
    opts: &SolveOptions,
) -> Result<DualSolveResult> {
    opts.validate()?;
    let (pos, kept) = p.positive_part();
    if pos.is_empty() {
        return Err(Error::InvalidMeasure("no atom with positive weight".into()));
    }
    let cache = CostCache::new(&pos, qs, spec)?;
    let kstar = cache.kstar(&pos.weights);
    let n = pos.len();

    let starts: Vec<Vec<f64>> = if let Some(init) = &opts.init {
        let mut z: Vec<f64> = kept.iter().map(|&i| init[i]).collect();
        project_mean_zero(&mut z);
        vec![z]
    } else {
        let mut rng = opts.rng.rng();
        (0..opts.multistart)
            .map(|s| {
                if s == 0 {
                    vec![0.0; n]
                } else {
                    let mut z: Vec<f64> =
                        (0..n).map(|_| rng.gen_range(-0.5..0.5) * kstar.max(1.0)).collect();
                    project_mean_zero(&mut z);
                    z
                }
            })
            .collect()
    };
    let warm = opts.init.is_some();

    let runs: Vec<RunOutcome> = starts
        .into_iter()
        .map(|z0| optimize_from(&cache, &pos.weights, z0, opts, kstar, warm))
        .collect();

    let best_idx = (0..runs.len())
        .max_by(|&a, &b| runs[a].value.partial_cmp(&runs[b].value).unwrap())
        .unwrap();
    let best_value = runs[best_idx].value;

    // candidate set: runs whose value reaches the best, deduplicated in l-inf
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let value_tol = 1e-9 * (1.0 + best_value.abs());
    for r in &runs {
        if best_value - r.value <= value_tol {
            let mut z = r.z.clone();
            project_mean_zero(&mut z);
            if !candidates
                .iter()
                .any(|c| c.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-6))
            {
                candidates.push(z);
            }
        }
    }

    let expand = |zpos: &[f64]| -> Vec<f64> {
        let mut full = vec![f64::NAN; p.len()];
        for (k, &orig) in kept.iter().enumerate() {
            full[orig] = zpos[k];
        }
        full
    };

    let best = &runs[best_idx];
    let mut z = best.z.clone();
    project_mean_zero(&mut z);
    let masses_pos = cache.masses(&z);
    let mut cell_masses = vec![0.0; p.len()];
    for (k, &orig) in kept.iter().enumerate() {
        cell_masses[orig] = masses_pos[k];
    }
    let converged = best.grad_norm <= opts.tol_grad;

    Ok(DualSolveResult {
        potential: Potential {
            z: expand(&z),
            gauge: Gauge::MeanZero,
        },
        cost_value: best.value,
        grad_norm: best.grad_norm,
        iterations: runs.iter().map(|r| r.iterations).sum(),
        cell_masses,
        converged,
        candidates: candidates
            .iter()
            .map(|c| Potential {
                z: expand(c),
                gauge: Gauge::MeanZero,
            })
            .collect(),
    })
}
