//! Shared oracle implementations for the integration and acceptance
//! suites. Everything here is deliberately independent of the library's
//! own computation paths: normal equations instead of QR, quadrature
//! instead of the incomplete beta, brute-force recounts instead of
//! incremental bookkeeping.

#![allow(dead_code)]

use framecast_core::rng::{derive_seed_indexed, stream, Rng};
use rand::Rng as _;

const SUITE_SEED: u64 = 0xacce97;

pub fn seeded(label: &str, index: u64) -> Rng {
    stream(derive_seed_indexed(SUITE_SEED, label, index))
}

pub fn gauss(rng: &mut Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Solves the least-squares problem through the normal equations with
/// Gaussian elimination; the production path must agree with it.
#[allow(clippy::needless_range_loop)]
pub fn normal_equation_ols(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let p = columns.len() + 1;
    let col = |j: usize, i: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            columns[j - 1][i]
        }
    };
    let mut g = vec![vec![0.0; p + 1]; p];
    for a in 0..p {
        for b in 0..p {
            g[a][b] = (0..n).map(|i| col(a, i) * col(b, i)).sum();
        }
        g[a][p] = (0..n).map(|i| col(a, i) * y[i]).sum();
    }
    // Gaussian elimination with partial pivoting.
    for k in 0..p {
        let pivot = (k..p)
            .max_by(|&a, &b| g[a][k].abs().partial_cmp(&g[b][k].abs()).unwrap())
            .unwrap();
        g.swap(k, pivot);
        for r in k + 1..p {
            let factor = g[r][k] / g[k][k];
            for c in k..=p {
                g[r][c] -= factor * g[k][c];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = g[k][p];
        for c in k + 1..p {
            s -= g[k][c] * beta[c];
        }
        beta[k] = s / g[k][k];
    }
    beta
}

/// Pearson correlation straight from the definition.
pub fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

/// Welch statistic and degrees of freedom from the definition.
pub fn direct_welch(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64]| {
        let m = mean(s);
        s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (s.len() as f64 - 1.0)
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (var(a), var(b));
    let se2 = va / na + vb / nb;
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    (t, df)
}

/// ln Gamma(k/2) by exact recurrence from Gamma(1) and Gamma(1/2); no
/// series approximation involved.
pub fn ln_gamma_half(two_z: u64) -> f64 {
    assert!(two_z >= 1);
    let target = two_z as f64 / 2.0;
    let (mut z, mut acc) = if two_z.is_multiple_of(2) {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * std::f64::consts::PI.ln())
    };
    while z + 0.5 < target + 0.25 {
        acc += z.ln();
        z += 1.0;
    }
    acc
}

fn ln_beta_half(two_a: u64, two_b: u64) -> f64 {
    ln_gamma_half(two_a) + ln_gamma_half(two_b) - ln_gamma_half(two_a + two_b)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(&f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Upper-tail F probability by quadrature of the density. The integrand
/// is substituted with x = t^2 so the df1 = 1 endpoint singularity
/// disappears.
pub fn f_upper_tail_quadrature(f_stat: f64, df1: u64, df2: u64) -> f64 {
    if f_stat <= 0.0 {
        return 1.0;
    }
    let a = df1 as f64 / 2.0;
    let b = df2 as f64 / 2.0;
    let ratio = df1 as f64 / df2 as f64;
    let ln_c = a * ratio.ln() - ln_beta_half(df1, df2);
    let pdf = move |x: f64| -> f64 {
        (ln_c + (a - 1.0) * x.ln() - (a + b) * (1.0 + ratio * x).ln()).exp()
    };
    // After x = t^2 the integrand is 2 C t^{2a-1} (1 + r t^2)^-(a+b); the
    // t = 0 endpoint is finite for df1 = 1 and zero otherwise.
    let g = move |t: f64| {
        if t == 0.0 {
            if df1 == 1 {
                2.0 * ln_c.exp()
            } else {
                0.0
            }
        } else {
            2.0 * t * pdf(t * t)
        }
    };
    let cdf = integrate(g, 0.0, f_stat.sqrt(), 1e-13);
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Two-sided t probability by quadrature of the density.
pub fn t_two_sided_quadrature(t_stat: f64, df: u64) -> f64 {
    if t_stat == 0.0 {
        return 1.0;
    }
    let d = df as f64;
    let ln_c = -0.5 * d.ln() - ln_beta_half(1, df);
    let pdf = move |x: f64| (ln_c - 0.5 * (d + 1.0) * (1.0 + x * x / d).ln()).exp();
    let half = integrate(pdf, 0.0, t_stat.abs(), 1e-13);
    (1.0 - 2.0 * half).clamp(0.0, 1.0)
}

/// UMass coherence recount straight from the formula, scanning documents
/// rather than using posting lists.
pub fn umass_recount(topic_word: &[Vec<f64>], documents: &[Vec<usize>], top_n: usize) -> Vec<f64> {
    let doc_has = |doc: &[usize], w: usize| doc.contains(&w);
    topic_word
        .iter()
        .map(|row| {
            let mut ids: Vec<usize> = (0..row.len()).collect();
            ids.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            ids.truncate(top_n);
            let mut score = 0.0;
            for i in 0..ids.len() {
                for j in (i + 1)..ids.len() {
                    let co = documents
                        .iter()
                        .filter(|d| doc_has(d, ids[i]) && doc_has(d, ids[j]))
                        .count() as f64;
                    let dj = documents
                        .iter()
                        .filter(|d| doc_has(d, ids[j]))
                        .count()
                        .max(1) as f64;
                    score += ((co + 1.0) / dj).ln();
                }
            }
            score
        })
        .collect()
}

/// t-statistic on gamma in the lag-0 Dickey-Fuller regression
/// dy_t = alpha + gamma y_{t-1}, in closed form for Monte Carlo speed.
pub fn df_t_stat_lag0(y: &[f64]) -> f64 {
    let n = y.len() - 1;
    let nf = n as f64;
    let mut sx = 0.0;
    let mut sd = 0.0;
    for t in 1..y.len() {
        sx += y[t - 1];
        sd += y[t] - y[t - 1];
    }
    let mx = sx / nf;
    let md = sd / nf;
    let mut sxx = 0.0;
    let mut sxd = 0.0;
    let mut sdd = 0.0;
    for t in 1..y.len() {
        let x = y[t - 1] - mx;
        let d = (y[t] - y[t - 1]) - md;
        sxx += x * x;
        sxd += x * d;
        sdd += d * d;
    }
    let gamma = sxd / sxx;
    let ssr = sdd - gamma * sxd;
    let s2 = ssr / (nf - 2.0);
    gamma / (s2 / sxx).sqrt()
}

/// Krippendorff alpha from the pairwise formulation (no coincidence
/// matrix): D_o from within-item pair distances, marginals from raw value
/// counts over pairable items.
pub fn alpha_bruteforce(codings: &[Vec<Option<f64>>], interval: bool) -> Option<f64> {
    let items: Vec<Vec<f64>> = codings
        .iter()
        .map(|row| row.iter().flatten().copied().collect())
        .filter(|vals: &Vec<f64>| vals.len() >= 2)
        .collect();
    if items.is_empty() {
        return None;
    }
    let mut values: Vec<f64> = items.iter().flatten().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let delta_sq = |a: f64, b: f64| -> f64 {
        if interval {
            (a - b) * (a - b)
        } else if a == b {
            0.0
        } else {
            1.0
        }
    };

    let n: f64 = items.iter().map(|it| it.len() as f64).sum();
    let mut d_o_num = 0.0;
    for item in &items {
        let m = item.len() as f64;
        for i in 0..item.len() {
            for j in 0..item.len() {
                if i != j {
                    d_o_num += delta_sq(item[i], item[j]) / (m - 1.0);
                }
            }
        }
    }
    let d_o = d_o_num / n;

    let count = |v: f64| -> f64 { items.iter().flatten().filter(|&&x| x == v).count() as f64 };
    let mut d_e_num = 0.0;
    for &v in &values {
        for &w in &values {
            if v != w {
                d_e_num += count(v) * count(w) * delta_sq(v, w);
            }
        }
    }
    let d_e = d_e_num / (n * (n - 1.0));
    Some(if d_e == 0.0 { 1.0 } else { 1.0 - d_o / d_e })
}
