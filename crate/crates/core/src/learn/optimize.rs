//! Ridge regression, the soft-rank surrogate and a limited-memory quasi-Newton solver.

use nalgebra::{DMatrix, DVector};

use super::{rank_weight_unchecked, RankConfig, WeightingKind};

/// Ridge least squares `argmin |X theta - y|^2 + lambda |theta|^2`.
pub fn ridge<'a>(rows: impl IntoIterator<Item = (&'a [f64], f64)>, dim: usize, lambda: f64) -> Vec<f64> {
    let mut xtx = DMatrix::<f64>::zeros(dim, dim);
    let mut xty = DVector::<f64>::zeros(dim);
    for (x, y) in rows {
        for i in 0..dim {
            if x[i] == 0.0 {
                continue;
            }
            xty[i] += x[i] * y;
            for j in 0..dim {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..dim {
        xtx[(i, i)] += lambda;
    }
    match xtx.clone().cholesky() {
        Some(c) => c.solve(&xty).iter().copied().collect(),
        // lambda > 0 keeps the system positive definite; this only triggers on overflow
        None => xtx.lu().solve(&xty).map_or(vec![0.0; dim], |v| v.iter().copied().collect()),
    }
}

/// Cached aggregate features and qualities of one image's tilings.
#[derive(Debug, Clone)]
pub(crate) struct ImageCache {
    pub members: Vec<Vec<usize>>,
    pub phi: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ImageCache {
    /// Tiling indices by decreasing `theta . phi`, ties by ascending members.
    pub fn ranking(&self, theta: &[f64]) -> Vec<usize> {
        let scores: Vec<f64> = self.phi.iter().map(|p| dot(p, theta)).collect();
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| self.members[a].cmp(&self.members[b])));
        idx
    }

    pub fn exact(&self, theta: &[f64], config: &RankConfig) -> f64 {
        self.ranking(theta)
            .iter()
            .take(config.k)
            .enumerate()
            .map(|(i, &t)| rank_weight_unchecked(config.weighting, config.k, i + 1) * self.q[t])
            .sum()
    }

    fn score_spread(&self, theta: &[f64]) -> f64 {
        let n = self.phi.len();
        if n < 2 {
            return 0.0;
        }
        let f: Vec<f64> = self.phi.iter().map(|p| dot(p, theta)).collect();
        let m = f.iter().sum::<f64>() / n as f64;
        (f.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt()
    }
}

pub(crate) fn dataset_exact(caches: &[ImageCache], theta: &[f64], config: &RankConfig) -> f64 {
    caches.iter().map(|c| c.exact(theta, config)).sum()
}

/// Mean per-image spread of tiling scores, the unit the temperature is expressed in.
pub(crate) fn score_scale(caches: &[ImageCache], theta: &[f64]) -> f64 {
    let spreads: Vec<f64> = caches.iter().map(|c| c.score_spread(theta)).filter(|s| *s > 0.0).collect();
    if spreads.is_empty() {
        1.0
    } else {
        spreads.iter().sum::<f64>() / spreads.len() as f64
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Width, in ranks, of the smooth cutoff past rank K.
const CUTOFF_WIDTH: f64 = 0.5;

/// Rank weight continued to real ranks and smoothly cut after K; value and derivative.
fn soft_weight(kind: WeightingKind, k: usize, r: f64) -> (f64, f64) {
    let (w, dw) = match kind {
        WeightingKind::ReciprocalDecay if k == 1 => (1.0, 0.0),
        WeightingKind::ReciprocalDecay => {
            let w = 1.0 / (1.0 + (r - 1.0) / (k as f64 - 1.0));
            (w, -w * w / (k as f64 - 1.0))
        }
        WeightingKind::Dcg => {
            let l = (r + 1.0).ln();
            (std::f64::consts::LN_2 / l, -std::f64::consts::LN_2 / ((r + 1.0) * l * l))
        }
    };
    let c = sigmoid((k as f64 + 0.5 - r) / CUTOFF_WIDTH);
    let dc = -c * (1.0 - c) / CUTOFF_WIDTH;
    (w * c, dw * c + w * dc)
}

/// Surrogate objective with soft ranks `1 + sum_k sigmoid((F_k - F_j) / tau)`; value and gradient in theta.
pub(crate) fn surrogate(caches: &[ImageCache], theta: &[f64], tau: f64, config: &RankConfig) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for c in caches {
        let n = c.phi.len();
        let f: Vec<f64> = c.phi.iter().map(|p| dot(p, theta)).collect();
        let mut soft_rank = vec![1.0; n];
        for j in 0..n {
            for k in 0..n {
                if k != j {
                    soft_rank[j] += sigmoid((f[k] - f[j]) / tau);
                }
            }
        }
        let mut a = vec![0.0; n];
        for j in 0..n {
            let (w, dw) = soft_weight(config.weighting, config.k, soft_rank[j]);
            value += c.q[j] * w;
            a[j] = c.q[j] * dw;
        }
        let mut df = vec![0.0; n];
        for j in 0..n {
            if a[j] == 0.0 {
                continue;
            }
            for k in 0..n {
                if k != j {
                    let s = sigmoid((f[k] - f[j]) / tau);
                    let ds = a[j] * s * (1.0 - s) / tau;
                    df[k] += ds;
                    df[j] -= ds;
                }
            }
        }
        for (p, d) in c.phi.iter().zip(&df) {
            if *d != 0.0 {
                for (g, x) in grad.iter_mut().zip(p) {
                    *g += d * x;
                }
            }
        }
    }
    (value, grad)
}

const HISTORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Minimize `f` by L-BFGS with backtracking; `visit` sees every accepted iterate.
pub(crate) fn lbfgs(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    max_iters: usize,
    mut visit: impl FnMut(&[f64]),
) -> Vec<f64> {
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return x;
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    for _ in 0..max_iters {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-12 {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push((a, rho));
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / gnorm,
        };
        for v in d.iter_mut() {
            *v *= gamma;
        }
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|v| -v / gnorm).collect();
            slope = -gnorm;
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + ARMIJO * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        visit(&x);
        if improvement <= 1e-12 * fx.abs().max(1.0) {
            break;
        }
    }
    x
}
