//! Independent reference solvers used to validate the dual ascent path:
//! closed-form one-dimensional transport via cdf/quantile coupling, and an
//! exact transportation simplex for small discrete-discrete instances.

use crate::cost::{cost, CostSpec};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::stats::{kahan_sum, KahanSum};

/// Piecewise-linear cdf on the line: either a step function from weighted
/// atoms or the uniform law on an interval.
#[derive(Debug, Clone)]
pub enum PiecewiseCdf {
    Discrete { atoms: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
}

impl PiecewiseCdf {
    pub fn discrete(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("cdf needs at least one atom".into()));
        }
        let total = kahan_sum(atoms.iter().map(|a| a.1));
        if (total - 1.0).abs() > 1e-12 || atoms.iter().any(|a| a.1 < 0.0) {
            return Err(Error::InvalidMeasure("atom weights must be >= 0 and sum to 1".into()));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(PiecewiseCdf::Discrete { atoms })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument("uniform cdf needs lo < hi".into()));
        }
        Ok(PiecewiseCdf::Uniform { lo, hi })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != 1) {
            return Err(Error::DimensionMismatch("cdf coupling needs 1-d rows".into()));
        }
        let w = 1.0 / rows.len() as f64;
        Self::discrete(rows.iter().map(|r| (r[0], w)).collect())
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PiecewiseCdf::Discrete { atoms } => {
                kahan_sum(atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1))
            }
            PiecewiseCdf::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            PiecewiseCdf::Discrete { atoms } => atoms.iter().map(|a| a.0).collect(),
            PiecewiseCdf::Uniform { lo, hi } => vec![*lo, *hi],
        }
    }

    fn slope_between(&self, x0: f64, x1: f64) -> f64 {
        match self {
            PiecewiseCdf::Discrete { .. } => 0.0,
            PiecewiseCdf::Uniform { lo, hi } => {
                let mid = 0.5 * (x0 + x1);
                if *lo <= mid && mid < *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// Quantile function as segments (u0, u1, x0, x1): on (u0, u1] the
    /// quantile interpolates linearly from x0 to x1 (constant for atoms).
    fn quantile_segments(&self) -> Vec<(f64, f64, f64, f64)> {
        match self {
            PiecewiseCdf::Discrete { atoms } => {
                let mut segs = Vec::with_capacity(atoms.len());
                let mut acc = KahanSum::new();
                for &(x, w) in atoms {
                    if w == 0.0 {
                        continue;
                    }
                    let u0 = acc.value();
                    acc.add(w);
                    segs.push((u0, acc.value(), x, x));
                }
                if let Some(last) = segs.last_mut() {
                    last.1 = 1.0;
                }
                segs
            }
            PiecewiseCdf::Uniform { lo, hi } => vec![(0.0, 1.0, *lo, *hi)],
        }
    }
}

/// Exact 1-d W1 as the area between the two cdfs.
pub fn w1_exact_1d(a: &PiecewiseCdf, b: &PiecewiseCdf) -> f64 {
    let mut xs: Vec<f64> = a.breakpoints();
    xs.extend(b.breakpoints());
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xs.dedup();
    let mut area = KahanSum::new();
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let dx = x1 - x0;
        if dx == 0.0 {
            continue;
        }
        let h0 = a.eval(x0) - b.eval(x0);
        let slope = a.slope_between(x0, x1) - b.slope_between(x0, x1);
        let h1 = h0 + slope * dx;
        // integral of |linear| over the cell
        let piece = if h0 * h1 >= 0.0 {
            0.5 * (h0.abs() + h1.abs()) * dx
        } else {
            0.5 * (h0 * h0 + h1 * h1) / (h0.abs() + h1.abs()) * dx
        };
        area.add(piece);
    }
    area.value()
}

/// Integral of |a + b u|^p du over [0, len].
fn abs_affine_power_integral(a: f64, b: f64, len: f64, p: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        return a.abs().powf(p) * len;
    }
    let anti = |v: f64| v.signum() * v.abs().powf(p + 1.0) / ((p + 1.0) * b);
    anti(a + b * len) - anti(a)
}

/// Exact 1-d transport cost for c(x,y) = |x-y|^p via the quantile coupling.
/// Returns the cost (integral of the p-th power), not its p-th root.
pub fn wp_exact_1d(p_exp: f64, a: &PiecewiseCdf, b: &PiecewiseCdf) -> Result<f64> {
    if !(p_exp >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent p={p_exp} must be >= 1")));
    }
    let sa = a.quantile_segments();
    let sb = b.quantile_segments();
    let mut cuts: Vec<f64> = sa.iter().chain(&sb).flat_map(|s| [s.0, s.1]).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let quantile_affine = |segs: &[(f64, f64, f64, f64)], u0: f64, u1: f64| -> (f64, f64) {
        let mid = 0.5 * (u0 + u1);
        let s = segs
            .iter()
            .find(|s| s.0 <= mid && mid <= s.1)
            .or_else(|| segs.last())
            .unwrap();
        let slope = if s.1 > s.0 { (s.3 - s.2) / (s.1 - s.0) } else { 0.0 };
        // value at u0 and slope in u
        (s.2 + slope * (u0 - s.0), slope)
    };
    let mut acc = KahanSum::new();
    for w in cuts.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        if u1 <= u0 {
            continue;
        }
        let (va, sa_) = quantile_affine(&sa, u0, u1);
        let (vb, sb_) = quantile_affine(&sb, u0, u1);
        acc.add(abs_affine_power_integral(va - vb, sa_ - sb_, u1 - u0, p_exp));
    }
    Ok(acc.value())
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    /// Dual variables for the first (row) measure.
    pub u: Vec<f64>,
    /// Dual variables for the second (column) measure.
    pub v: Vec<f64>,
}

/// Exact discrete-discrete transport by the transportation simplex with
/// Bland's entering rule. Limited to N*M <= 10_000 cells.
pub fn exact_lp_small(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    spec: &CostSpec,
) -> Result<LpSolution> {
    let n = p.len();
    let m = q.len();
    if n * m > 10_000 {
        return Err(Error::InvalidArgument(format!(
            "exact LP limited to 10000 cells, got {}",
            n * m
        )));
    }
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            c[i * m + j] = cost(spec, &p.points[i], &q.points[j])?;
        }
    }
    let cmax = c.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-11 * (1.0 + cmax);

    // northwest-corner start: exactly n + m - 1 basic cells
    let mut a_rem = p.weights.clone();
    let mut b_rem = q.weights.clone();
    let mut flow = vec![0.0; n * m];
    let mut basic = vec![false; n * m];
    {
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let x = a_rem[i].min(b_rem[j]);
            flow[i * m + j] = x;
            basic[i * m + j] = true;
            a_rem[i] -= x;
            b_rem[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (a_rem[i] <= b_rem[j] && i < n - 1) || j == m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    for _pivot in 0..200_000 {
        // duals from the basis tree, rooted at row 0
        let mut known_u = vec![false; n];
        let mut known_v = vec![false; m];
        u[0] = 0.0;
        known_u[0] = true;
        let mut stack = vec![(true, 0usize)];
        while let Some((is_row, k)) = stack.pop() {
            if is_row {
                for j in 0..m {
                    if basic[k * m + j] && !known_v[j] {
                        v[j] = c[k * m + j] - u[k];
                        known_v[j] = true;
                        stack.push((false, j));
                    }
                }
            } else {
                for i in 0..n {
                    if basic[i * m + k] && !known_u[i] {
                        u[i] = c[i * m + k] - v[k];
                        known_u[i] = true;
                        stack.push((true, i));
                    }
                }
            }
        }

        // Bland: first nonbasic cell with negative reduced cost enters
        let mut entering = None;
        'search: for i in 0..n {
            for j in 0..m {
                if !basic[i * m + j] && c[i * m + j] - u[i] - v[j] < -tol {
                    entering = Some((i, j));
                    break 'search;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };

        // unique path in the basis tree from row ei to column ej
        // parent-pointer BFS over nodes 0..n (rows) and n..n+m (columns)
        let total = n + m;
        let mut parent = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        seen[ei] = true;
        let mut queue = std::collections::VecDeque::from([ei]);
        while let Some(node) = queue.pop_front() {
            if node == n + ej {
                break;
            }
            if node < n {
                for j in 0..m {
                    if basic[node * m + j] && !seen[n + j] {
                        seen[n + j] = true;
                        parent[n + j] = node;
                        queue.push_back(n + j);
                    }
                }
            } else {
                let j = node - n;
                for i in 0..n {
                    if basic[i * m + j] && !seen[i] {
                        seen[i] = true;
                        parent[i] = node;
                        queue.push_back(i);
                    }
                }
            }
        }
        // cycle cells: entering plus the tree path edges, alternating signs
        let mut path_cells = Vec::new();
        let mut node = n + ej;
        while node != ei {
            let par = parent[node];
            let (i, j) = if node < n { (node, par - n) } else { (par, node - n) };
            path_cells.push((i, j));
            node = par;
        }
        // walking from column ej back to row ei, the first path edge carries
        // the opposite sign of the entering cell, then signs alternate
        let mut minus_cells = Vec::new();
        for (k, cell) in path_cells.iter().enumerate() {
            if k % 2 == 0 {
                minus_cells.push(*cell);
            }
        }
        let theta = minus_cells
            .iter()
            .map(|&(i, j)| flow[i * m + j])
            .fold(f64::INFINITY, f64::min);
        // Bland leaving rule: smallest index among the minimizing minus cells
        let leaving = *minus_cells
            .iter()
            .filter(|&&(i, j)| flow[i * m + j] <= theta)
            .min_by_key(|&&(i, j)| i * m + j)
            .unwrap();
        for (k, &(i, j)) in path_cells.iter().enumerate() {
            if k % 2 == 0 {
                flow[i * m + j] -= theta;
            } else {
                flow[i * m + j] += theta;
            }
        }
        flow[ei * m + ej] = theta;
        basic[ei * m + ej] = true;
        basic[leaving.0 * m + leaving.1] = false;
        flow[leaving.0 * m + leaving.1] = 0.0;
    }

    let value = kahan_sum((0..n * m).filter(|&k| flow[k] > 0.0).map(|k| flow[k] * c[k]));
    Ok(LpSolution { value, u, v })
}
