#![allow(dead_code)]

use hrl_sched::env::{EnvConfig, UserConfig};
use hrl_sched::mimo_phy::{ChannelMatrix, LinkBudget};
use hrl_sched::policy::{GaussianPolicy, HybridPolicy, Observation};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn cgauss<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2f64.sqrt()
}

pub fn random_channel<R: Rng>(rng: &mut R, k: usize, n: usize) -> ChannelMatrix {
    let rows: Vec<Vec<Complex64>> = (0..k).map(|_| (0..n).map(|_| cgauss(rng)).collect()).collect();
    ChannelMatrix::from_rows(&rows).unwrap()
}

pub fn rows(h: &ChannelMatrix) -> Vec<Vec<Complex64>> {
    (0..h.users()).map(|i| h.row(i).to_vec()).collect()
}

/// Solves `A X = B` for complex `A` (n×n) through the real `2n×2n`
/// embedding `[Re -Im; Im Re]` and naive Gaussian elimination.
pub fn complex_solve(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug = vec![vec![0.0; 2 * n + 2 * m]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            aug[i][j] = a[i][j].re;
            aug[i][j + n] = -a[i][j].im;
            aug[i + n][j] = a[i][j].im;
            aug[i + n][j + n] = a[i][j].re;
        }
        for j in 0..m {
            aug[i][2 * n + j] = b[i][j].re;
            aug[i][2 * n + m + j] = -b[i][j].im;
            aug[i + n][2 * n + j] = b[i][j].im;
            aug[i + n][2 * n + m + j] = b[i][j].re;
        }
    }
    let size = 2 * n;
    for col in 0..size {
        let piv = (col..size)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..size {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..aug[r].len() {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..m).map(|j| Complex64::new(aug[i][size + j], aug[i + n][size + j])).collect())
        .collect()
}

/// RZF columns for the rows `h`, each normalized to unit norm.
pub fn rzf_oracle(h: &[Vec<Complex64>], alpha: f64) -> Vec<Vec<Complex64>> {
    let k = h.len();
    let n = h[0].len();
    let gram: Vec<Vec<Complex64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut s: Complex64 = (0..n).map(|t| h[i][t] * h[j][t].conj()).sum();
                    if i == j {
                        s += alpha;
                    }
                    s
                })
                .collect()
        })
        .collect();
    let ident: Vec<Vec<Complex64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect())
        .collect();
    let inv = complex_solve(&gram, &ident);
    (0..k)
        .map(|col| {
            let v: Vec<Complex64> = (0..n)
                .map(|t| (0..k).map(|i| h[i][t].conj() * inv[i][col]).sum())
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        })
        .collect()
}

pub fn gain(h: &[Complex64], v: &[Complex64]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for t in 0..h.len() {
        s += h[t] * v[t];
    }
    s.norm_sqr()
}

/// Scalar rate evaluation for scheduled users (columns in `set` order).
pub fn rates_oracle(
    h: &[Vec<Complex64>],
    set: &[usize],
    cols: &[Vec<Complex64>],
    power: f64,
    noise: &[f64],
    bandwidth: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; h.len()];
    for (a, &i) in set.iter().enumerate() {
        let signal = power * gain(&h[i], &cols[a]);
        let mut interference = 0.0;
        for (b, col) in cols.iter().enumerate() {
            if b != a {
                interference += power * gain(&h[i], col);
            }
        }
        out[i] = bandwidth * (1.0 + signal / (interference + noise[i])).log2();
    }
    out
}

/// Greedy WSR selection written from scratch: returns the commit order and
/// the WSR after each round.
pub fn greedy_oracle(h: &[Vec<Complex64>], w: &[f64], link: &LinkBudget, alpha: f64, antennas: usize) -> (Vec<usize>, Vec<f64>) {
    let k = h.len();
    let mut set: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut best = 0.0f64;
    loop {
        if set.len() == antennas {
            break;
        }
        let mut cand: Option<(usize, f64)> = None;
        for u in 0..k {
            if set.contains(&u) {
                continue;
            }
            let mut s = set.clone();
            s.push(u);
            let sub: Vec<Vec<Complex64>> = s.iter().map(|&i| h[i].clone()).collect();
            let cols = rzf_oracle(&sub, alpha);
            let p = link.total_power_w / s.len() as f64;
            let r = rates_oracle(h, &s, &cols, p, &link.noise_variance, link.bandwidth_hz);
            let v: f64 = s.iter().map(|&i| w[i] * r[i]).sum();
            match cand {
                Some((_, cv)) if v <= cv => {}
                _ => cand = Some((u, v)),
            }
        }
        match cand {
            Some((u, v)) if v > best * (1.0 + 1e-12) => {
                set.push(u);
                best = v;
                trace.push(v);
            }
            _ => break,
        }
    }
    (set, trace)
}

pub fn unit_link(k: usize, noise: f64) -> LinkBudget {
    LinkBudget {
        noise_variance: vec![noise; k],
        bandwidth_hz: 1.0,
        total_power_w: 1.0,
        path_loss_db: vec![140.0; k],
    }
}

/// Three-user test environment with a moderate load.
pub fn small_env_config() -> EnvConfig {
    EnvConfig {
        antennas: 2,
        arrival_prob: 0.4,
        slot_seconds: 1e-3,
        tau: 1.0,
        bandwidth_hz: 10e6,
        tx_power_dbm: 12.0,
        noise_variance_w: 3e-17,
        alpha: None,
        channel_correlation: 0.5,
        csi_nmse: 0.0,
        users: vec![
            UserConfig { deadline: 3, lambda_kbit: 10.0, path_loss_db: 132.0 },
            UserConfig { deadline: 4, lambda_kbit: 14.0, path_loss_db: 140.0 },
            UserConfig { deadline: 2, lambda_kbit: 6.0, path_loss_db: 147.0 },
        ],
    }
}

/// Haar-ish random unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<Complex64>> {
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<Complex64> = (0..n).map(|_| cgauss(rng)).collect();
        for u in &q {
            let proj: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|z| z / norm).collect());
    }
    q
}

/// `U diag(s) W` with `s` in `[1, 10]`: condition number at most 10.
pub fn well_conditioned<R: Rng>(rng: &mut R, k: usize, n: usize) -> ChannelMatrix {
    let u = random_unitary(rng, k);
    let w = random_unitary(rng, n);
    let s: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..10.0)).collect();
    let rows: Vec<Vec<Complex64>> = (0..k)
        .map(|i| (0..n).map(|c| (0..k).map(|j| u[i][j] * s[j] * w[j][c]).sum()).collect())
        .collect();
    ChannelMatrix::from_rows(&rows).unwrap()
}

pub fn normal_pdf(a: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    a.iter()
        .zip(mean)
        .zip(std)
        .map(|((x, m), s)| (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
        .product()
}

/// Mixture density summed directly from each component.
pub fn mixture_density(h: &HybridPolicy, o: &Observation, a: &[f64]) -> f64 {
    let mut nets: Vec<&GaussianPolicy> = vec![h.new_policy()];
    nets.extend(h.old_policies());
    let mut total = 0.0;
    for (i, n) in nets.iter().enumerate() {
        let out = n.forward(&o.features).unwrap();
        total += h.probs()[i] * normal_pdf(a, &out.mean, &out.std());
    }
    let p_dk = h.probs()[nets.len()];
    total + p_dk * normal_pdf(a, &o.dk_mean, &vec![h.dk_std(); a.len()])
}
