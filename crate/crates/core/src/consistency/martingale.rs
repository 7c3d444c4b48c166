use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::family::FamilyMesh;
use super::report::{CheckName, CheckResult, Location, ResidualField};
use super::MarketPriceOfRisk;
use crate::math::mean_and_se;
use crate::models::TermStructureSpec;
use crate::sde::{Cholesky, PathBundle, PathMap};
use crate::Result;

const Z95: f64 = 1.96;

/// Regression drift of `dF(·, T)/F` for one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaturityDrift {
    pub maturity: f64,
    pub drift: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub observations: usize,
    pub contains_zero: bool,
}

/// Sample statistics of the stochastic-exponential density `dQ/dP` at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagnostics {
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub all_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleDiagnostic {
    pub maturities: Vec<MaturityDrift>,
    pub density: DensityDiagnostics,
    /// `max_T |drift| / (1.96·SE)`; at most 1 when every interval contains zero.
    pub statistic: f64,
}

/// Solves the symmetric system `a·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[piv * n + c].abs() < 1e-300 {
            return None;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            b.swap(c, piv);
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

/// Regresses the one-step returns of every futures contract on `[Δt, ΔW^Q]`, with
/// `ΔW^Q = ΔW − λΔt`, pooled over paths and steps, and reports the `Δt` coefficient with a
/// 95% interval. Also summarizes the density `exp(Σθ·ΔB − ½|θ|²Δt)`, `λ = Lθ`.
pub fn martingale_diagnostic<E: PathMap>(
    ts: &TermStructureSpec,
    bundle: &PathBundle,
    lambda: &MarketPriceOfRisk,
    exec: &E,
) -> Result<MartingaleDiagnostic> {
    lambda.check_dim(bundle.n_factors, bundle.dim)?;
    let mesh = FamilyMesh::new(ts, bundle)?;
    let chol = Cholesky::new(&bundle.correlation, bundle.n_factors)?;
    let d = bundle.n_factors;
    let active: Vec<usize> = (0..d).filter(|&j| mesh.active[j]).collect();
    let p = 1 + active.len();
    // Normal-equation entries: XᵀX (p²), Xᵀy (p), yᵀy, count.
    let k = p * p + p + 2;
    let steps = mesh.n_steps;
    let last = mesh.last;
    // Flat families share returns across maturities, so statistics are kept per step.
    let cols = if mesh.flat { steps } else { last + 1 };
    let dt = mesh.dt;
    const BLOCK: usize = 32;
    let blocks = bundle.n_paths.div_ceil(BLOCK);
    let parts = exec.map(blocks, |b| {
        let mut acc = vec![0.0; cols * k];
        let mut dens = Vec::new();
        let mut lam = vec![0.0; d];
        let mut theta = vec![0.0; d];
        let mut db = vec![0.0; d];
        let mut wq = vec![0.0; d];
        let mut x = vec![0.0; p];
        for path in b * BLOCK..((b + 1) * BLOCK).min(bundle.n_paths) {
            let mut log_z = 0.0;
            for n in 0..steps {
                let dw = bundle.increment(path, n);
                lambda.eval(bundle.grid.time(n), bundle.state(path, n), &mut lam);
                chol.solve_lower(&lam, &mut theta);
                chol.solve_lower(dw, &mut db);
                log_z += theta.iter().zip(&db).map(|(a, b)| a * b).sum::<f64>()
                    - 0.5 * theta.iter().map(|v| v * v).sum::<f64>() * dt;
                for j in 0..d {
                    wq[j] = dw[j] - lam[j] * dt;
                }
                x[0] = dt;
                for (c, &j) in active.iter().enumerate() {
                    x[1 + c] = wq[j];
                }
                let range = if mesh.flat { n..n + 1 } else { n + 1..last + 1 };
                for m in range {
                    let y = mesh.log_step(n, if mesh.flat { 0 } else { m }, dw).exp_m1();
                    let a = &mut acc[m * k..(m + 1) * k];
                    for r in 0..p {
                        for c in 0..p {
                            a[r * p + c] += x[r] * x[c];
                        }
                        a[p * p + r] += x[r] * y;
                    }
                    a[p * p + p] += y * y;
                    a[p * p + p + 1] += 1.0;
                }
            }
            dens.push(log_z.exp());
        }
        (acc, dens)
    });
    let mut total = vec![0.0; cols * k];
    let mut density = Vec::with_capacity(bundle.n_paths);
    for (acc, dens) in parts {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
        density.extend(dens);
    }
    // Per-maturity sums: F(·, T_m) is alive over steps n < m.
    let sums: Vec<Vec<f64>> = if mesh.flat {
        let mut run = vec![0.0; k];
        let mut out = vec![vec![0.0; k]; last + 1];
        for m in 1..=last {
            if m - 1 < steps {
                for (r, v) in run.iter_mut().zip(&total[(m - 1) * k..m * k]) {
                    *r += v;
                }
            }
            out[m] = run.clone();
        }
        out
    } else {
        (0..=last).map(|m| total[m * k..(m + 1) * k].to_vec()).collect()
    };
    let mut maturities = Vec::new();
    let mut statistic = 0.0f64;
    for m in 1..=last {
        let s = &sums[m];
        let count = s[p * p + p + 1] as usize;
        let xtx = s[..p * p].to_vec();
        let xty = s[p * p..p * p + p].to_vec();
        let (drift, se) = match solve(xtx.clone(), xty.clone(), p) {
            Some(beta) if count > p => {
                let rss = (s[p * p + p] - beta.iter().zip(&xty).map(|(a, b)| a * b).sum::<f64>()).max(0.0);
                let s2 = rss / (count - p) as f64;
                let mut e0 = vec![0.0; p];
                e0[0] = 1.0;
                let inv = solve(xtx, e0, p).map_or(f64::NAN, |v| v[0]);
                (beta[0], (s2 * inv).max(0.0).sqrt())
            }
            _ => (f64::NAN, f64::NAN),
        };
        let stat = if drift == 0.0 && se == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            drift.abs() / (Z95 * se)
        };
        statistic = if stat.is_nan() { f64::INFINITY } else { statistic.max(stat) };
        let (lo, hi) = (drift - Z95 * se, drift + Z95 * se);
        maturities.push(MaturityDrift {
            maturity: mesh.maturities[m],
            drift,
            std_error: se,
            ci_low: lo,
            ci_high: hi,
            observations: count,
            contains_zero: lo <= 0.0 && 0.0 <= hi,
        });
    }
    let (mean, std_error) = mean_and_se(&density);
    let min = density.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MartingaleDiagnostic {
        maturities,
        density: DensityDiagnostics { mean, std_error, min, all_positive: min > 0.0 },
        statistic,
    })
}

/// Pass when `max_T |drift|/(1.96·SE) ≤ tol`.
pub fn check_martingale(diag: &MartingaleDiagnostic, tol: f64) -> CheckResult {
    let stats: Vec<f64> = diag
        .maturities
        .iter()
        .map(|m| if m.drift == 0.0 && m.std_error == 0.0 { 0.0 } else { m.drift.abs() / (Z95 * m.std_error) })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len().max(1) as f64;
    let mut r = CheckResult::new(CheckName::Martingale, diag.statistic, mean, tol);
    if let Some((i, _)) = stats.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        r.location = Location { maturity: Some(diag.maturities[i].maturity), ..Location::default() };
    }
    r.evaluated = stats.len();
    r.field = ResidualField::new(&["maturity", "drift", "std_error", "ci_low", "ci_high", "observations"]);
    for m in &diag.maturities {
        r.field.rows.push(vec![m.maturity, m.drift, m.std_error, m.ci_low, m.ci_high, m.observations as f64]);
    }
    r
}
