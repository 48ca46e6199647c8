//! Physical-layer math for the single-antenna-user MU-MIMO downlink.
//!
//! Channels carry the large-scale path loss folded in as an amplitude
//! scale, so every quantity here is in linear units (watts, Hz, bit/s).
//! The effective gain of user `i` through precoder column `j` is the
//! plain product `h_i · v_j` of the channel row and the column vector.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("channel matrix shape {users}x{antennas} does not match {len} entries")]
    Shape {
        users: usize,
        antennas: usize,
        len: usize,
    },
    #[error("channel matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("scheduled set of size {scheduled} is invalid for {antennas} transmit antennas")]
    SetSize { scheduled: usize, antennas: usize },
    #[error("regularized Gram matrix is not invertible (alpha = {alpha})")]
    Singular { alpha: f64 },
    #[error("invalid link budget: {0}")]
    Link(String),
}

/// Complex `K x N_T` channel, row `i` is the channel of user `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    users: usize,
    antennas: usize,
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn new(users: usize, antennas: usize, entries: Vec<Complex64>) -> Result<Self, PhyError> {
        if users == 0 || antennas == 0 || entries.len() != users * antennas {
            return Err(PhyError::Shape {
                users,
                antennas,
                len: entries.len(),
            });
        }
        if let Some(idx) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PhyError::NonFinite {
                row: idx / antennas,
                col: idx % antennas,
            });
        }
        Ok(Self {
            users,
            antennas,
            entries,
        })
    }

    pub fn zeros(users: usize, antennas: usize) -> Self {
        Self {
            users,
            antennas,
            entries: vec![Complex64::new(0.0, 0.0); users * antennas],
        }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, PhyError> {
        let antennas = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != antennas) {
            return Err(PhyError::Shape {
                users: rows.len(),
                antennas,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(rows.len(), antennas, rows.concat())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn row(&self, user: usize) -> &[Complex64] {
        &self.entries[user * self.antennas..(user + 1) * self.antennas]
    }

    pub fn row_mut(&mut self, user: usize) -> &mut [Complex64] {
        &mut self.entries[user * self.antennas..(user + 1) * self.antennas]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Rows of the listed users, in the listed order.
    pub fn select(&self, users: &[usize]) -> ChannelMatrix {
        let mut entries = Vec::with_capacity(users.len() * self.antennas);
        for &u in users {
            entries.extend_from_slice(self.row(u));
        }
        ChannelMatrix {
            users: users.len(),
            antennas: self.antennas,
            entries,
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Normalized precoder: one unit-norm column per scheduled user, ordered as
/// the scheduled set.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    columns: Vec<Vec<Complex64>>,
    alpha: f64,
}

impl Precoder {
    pub fn columns(&self) -> &[Vec<Complex64>] {
        &self.columns
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.columns[k]
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn empty() -> Self {
        Self {
            columns: Vec::new(),
            alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// Receiver noise variance per user, watts.
    pub noise_variance: Vec<f64>,
    pub bandwidth_hz: f64,
    pub total_power_w: f64,
    /// Large-scale path loss per user, dB.
    pub path_loss_db: Vec<f64>,
}

impl LinkBudget {
    pub fn validate(&self, users: usize) -> Result<(), PhyError> {
        if self.noise_variance.len() != users || self.path_loss_db.len() != users {
            return Err(PhyError::Link(format!(
                "expected {users} per-user entries, got {} noise and {} path-loss",
                self.noise_variance.len(),
                self.path_loss_db.len()
            )));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.bandwidth_hz) || !positive(self.total_power_w) {
            return Err(PhyError::Link("bandwidth and power must be positive".into()));
        }
        if !self.noise_variance.iter().all(|&s| positive(s)) {
            return Err(PhyError::Link("noise variance must be positive".into()));
        }
        if !self.path_loss_db.iter().all(|&pl| positive(pl)) {
            return Err(PhyError::Link("path loss must be positive".into()));
        }
        Ok(())
    }

    /// Linear amplitude scale `10^(-PL/20)` of user `i`.
    pub fn amplitude(&self, user: usize) -> f64 {
        path_loss_amplitude(self.path_loss_db[user])
    }

    pub fn mean_noise_variance(&self) -> f64 {
        self.noise_variance.iter().sum::<f64>() / self.noise_variance.len() as f64
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn path_loss_amplitude(path_loss_db: f64) -> f64 {
    10f64.powf(-path_loss_db / 20.0)
}

/// `h · v` without conjugation: the row already is the channel as seen by the
/// receiver.
pub fn effective_gain(h: &[Complex64], v: &[Complex64]) -> Complex64 {
    h.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Inverse of a dense `n x n` complex matrix (row-major) by Gauss-Jordan
/// elimination with partial pivoting. `None` when a pivot vanishes relative
/// to the matrix scale.
pub fn invert(matrix: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    debug_assert_eq!(matrix.len(), n * n);
    let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let width = 2 * n;
    let mut aug = vec![Complex64::new(0.0, 0.0); n * width];
    for r in 0..n {
        aug[r * width..r * width + n].copy_from_slice(&matrix[r * n..(r + 1) * n]);
        aug[r * width + n + r] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| {
                aug[a * width + col]
                    .norm()
                    .total_cmp(&aug[b * width + col].norm())
            })
            .unwrap();
        let pivot = aug[pivot_row * width + col];
        if pivot.norm() <= 1e-13 * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..width {
                aug.swap(col * width + k, pivot_row * width + k);
            }
        }
        let inv_pivot = pivot.inv();
        for k in 0..width {
            aug[col * width + k] *= inv_pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = aug[r * width + col];
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..width {
                let delta = factor * aug[col * width + k];
                aug[r * width + k] -= delta;
            }
        }
    }
    let mut inv = Vec::with_capacity(n * n);
    for r in 0..n {
        inv.extend_from_slice(&aug[r * width + n..(r + 1) * width]);
    }
    Some(inv)
}

/// Regularized zero-forcing precoder `H^H (H H^H + alpha I)^{-1}` with every
/// column scaled to unit norm.
pub fn rzf_precoder(h_b: &ChannelMatrix, alpha: f64) -> Result<Precoder, PhyError> {
    let n = h_b.users();
    let nt = h_b.antennas();
    if n == 0 || n > nt {
        return Err(PhyError::SetSize {
            scheduled: n,
            antennas: nt,
        });
    }
    let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let hi = h_b.row(i);
            let hj = h_b.row(j);
            gram[i * n + j] = hi.iter().zip(hj).map(|(a, b)| a * b.conj()).sum();
        }
        gram[i * n + i] += alpha;
    }
    let inv = invert(&gram, n).ok_or(PhyError::Singular { alpha })?;

    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        // column j of H^H G^{-1}: sum_k conj(h_k) * inv[k][j]
        let mut col = vec![Complex64::new(0.0, 0.0); nt];
        for k in 0..n {
            let coeff = inv[k * n + j];
            for (c, h) in col.iter_mut().zip(h_b.row(k)) {
                *c += h.conj() * coeff;
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(PhyError::Singular { alpha });
        }
        col.iter_mut().for_each(|z| *z /= norm);
        columns.push(col);
    }
    Ok(Precoder { columns, alpha })
}

/// Per-user transmit power under equal allocation: `total / |B|` for the
/// scheduled users, zero elsewhere.
pub fn equal_power(total_power_w: f64, users: usize, scheduled: &[usize]) -> Vec<f64> {
    let mut powers = vec![0.0; users];
    if scheduled.is_empty() {
        return powers;
    }
    let share = total_power_w / scheduled.len() as f64;
    for &u in scheduled {
        powers[u] = share;
    }
    powers
}

/// Achievable rate (bit/s) of every user; zero for unscheduled users.
pub fn rates(
    h: &ChannelMatrix,
    scheduled: &[usize],
    precoder: &Precoder,
    powers: &[f64],
    link: &LinkBudget,
) -> Vec<f64> {
    debug_assert_eq!(scheduled.len(), precoder.len());
    let mut out = vec![0.0; h.users()];
    for (k, &i) in scheduled.iter().enumerate() {
        let hi = h.row(i);
        let signal = powers[i] * effective_gain(hi, precoder.column(k)).norm_sqr();
        let interference: f64 = scheduled
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != k)
            .map(|(m, &j)| powers[j] * effective_gain(hi, precoder.column(m)).norm_sqr())
            .sum();
        let sinr = signal / (interference + link.noise_variance[i]);
        out[i] = link.bandwidth_hz * (1.0 + sinr).log2();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_link(users: usize) -> LinkBudget {
        LinkBudget {
            noise_variance: vec![1.0; users],
            bandwidth_hz: 1.0,
            total_power_w: 1.0,
            path_loss_db: vec![130.0; users],
        }
    }

    #[test]
    fn single_user_is_matched_filter() {
        let s = 0.5f64.sqrt();
        let h = ChannelMatrix::from_rows(&[vec![c(s, 0.0), c(0.0, s)]]).unwrap();
        for alpha in [0.0, 0.1, 10.0] {
            let v = rzf_precoder(&h, alpha).unwrap();
            let col = v.column(0);
            assert!((col[0] - c(s, 0.0)).norm() < 1e-12);
            assert!((col[1] - c(0.0, -s)).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_rows_zero_forced() {
        let h = ChannelMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let v = rzf_precoder(&h, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let g = effective_gain(h.row(i), v.column(j)).norm();
                if i == j {
                    assert!(g > 0.5);
                } else {
                    assert!(g < 1e-14);
                }
            }
        }
    }

    #[test]
    fn singular_without_regularization() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(2.0, 0.0), c(2.0, 0.0)]])
            .unwrap();
        assert!(matches!(rzf_precoder(&h, 0.0), Err(PhyError::Singular { .. })));
        assert!(rzf_precoder(&h, 0.1).is_ok());
    }

    #[test]
    fn set_larger_than_antennas_rejected() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]).unwrap();
        assert!(matches!(rzf_precoder(&h, 0.1), Err(PhyError::SetSize { .. })));
    }

    #[test]
    fn equal_power_split() {
        assert_eq!(equal_power(1.0, 1, &[0]), vec![1.0]);
        assert_eq!(equal_power(1.0, 5, &[0, 1, 3, 4]), vec![0.25, 0.25, 0.0, 0.25, 0.25]);
        let p = equal_power(dbm_to_watts(12.0), 3, &[0, 2]);
        assert!((p[0] - 0.007_924_465).abs() < 1e-8);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(12.0) - 0.015_848_93).abs() < 1e-8);
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        let v = rzf_precoder(&h, 0.0).unwrap();
        let r = rates(&h, &[0], &v, &[1.0], &unit_link(1));
        assert!((r[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_pair_interference_free() {
        let h = ChannelMatrix::from_rows(&[
            vec![c(3.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.5)],
            vec![c(1.0, 1.0), c(1.0, 0.0)],
        ])
        .unwrap();
        let sel = [0, 1];
        let v = rzf_precoder(&h.select(&sel), 0.0).unwrap();
        let powers = equal_power(2.0, 3, &sel);
        let link = LinkBudget {
            noise_variance: vec![0.5, 0.25, 1.0],
            bandwidth_hz: 10.0,
            total_power_w: 2.0,
            path_loss_db: vec![130.0; 3],
        };
        let r = rates(&h, &sel, &v, &powers, &link);
        assert!((r[0] - 10.0 * (1.0 + 9.0 / 0.5f64).log2()).abs() < 1e-12);
        assert!((r[1] - 10.0 * (1.0 + 0.25 / 0.25f64).log2()).abs() < 1e-12);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let err = ChannelMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, PhyError::NonFinite { row: 0, col: 1 });
        assert!(ChannelMatrix::new(2, 2, vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn invert_roundtrip() {
        let m = vec![c(2.0, 1.0), c(0.5, -1.0), c(0.0, 3.0), c(1.0, 0.0)];
        let inv = invert(&m, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let s: Complex64 = (0..2).map(|k| m[i * 2 + k] * inv[k * 2 + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }
}
