//! Quenched partition functions for one disorder realization, the
//! exhaustive oracle, and replica Monte Carlo over the environment.

use crate::csv::{Cell, CsvBuf};
use crate::disorder::{sample_disorder_seeded, DisorderField, DisorderLaw};
use crate::error::{domain, PinError, Result};
use crate::parallel::map_indexed;
use crate::partition::{self, Boundary, LogPartition, Rows};
use crate::renewal::RenewalTables;
use crate::stats::Estimate;
use rand::Rng;

/// Largest horizon [`enumerate_partition`] accepts.
pub const ENUMERATION_LIMIT: usize = 22;

/// `ln w_n = βω_n + h − λ(β)` for `n = 1..=N` (index 0 unused).
pub fn log_weights(omega: &DisorderField, beta: f64, h: f64) -> Vec<f64> {
    let lam = omega.law.lambda(beta);
    let mut lw = vec![0.0; omega.len() + 1];
    for n in 1..=omega.len() {
        lw[n] = beta * omega.at(n) + h - lam;
    }
    lw
}

fn check_horizon(tables: &RenewalTables, n: usize) -> Result<()> {
    if n > tables.n_max() {
        return Err(PinError::Horizon { needed: n, available: tables.n_max() });
    }
    Ok(())
}

fn check_pair(tables: &RenewalTables, n: usize, d: usize, f: usize) -> Result<()> {
    if !(1 <= d && d <= f && f <= n) {
        return domain(format!("pinned pair needs 1 ≤ d ≤ f ≤ N, got d={d}, f={f}, N={n}"));
    }
    if tables.u[f - d] <= 0.0 {
        return Err(PinError::EmptyConfiguration { span: f - d });
    }
    Ok(())
}

/// Forward DP `Z(n)` for `n = 0..=N` on the full environment.
pub fn forward_rows(tables: &RenewalTables, omega: &DisorderField, beta: f64, h: f64) -> Result<Rows<1>> {
    let n = omega.len();
    check_horizon(tables, n)?;
    let lw = log_weights(omega, beta, h);
    Ok(partition::solve(&tables.k, &lw, [1.0], n, |a| a))
}

/// `Z_N^{β,h,ω}` under the requested boundary condition. The pinned pair
/// weighs both endpoints and is normalized by `u(f − d)`.
pub fn partition(
    tables: &RenewalTables,
    omega: &DisorderField,
    beta: f64,
    h: f64,
    boundary: Boundary,
) -> Result<LogPartition> {
    let n = omega.len();
    check_horizon(tables, n)?;
    let lw = log_weights(omega, beta, h);
    let log_value = match boundary {
        Boundary::Constrained => {
            let rows = partition::solve(&tables.k, &lw, [1.0], n, |a| a);
            rows.ln(0, n)
        }
        Boundary::Free => {
            let rows = partition::solve(&tables.k, &lw, [1.0], n, |a| a);
            rows.ln_weighted_sum(0, 0..=n, |m| tables.tail[n - m])
        }
        Boundary::PinnedPair { d, f } => {
            check_pair(tables, n, d, f)?;
            pinned_pair_log(tables, &lw, d, f)
        }
    };
    Ok(LogPartition { log_value, boundary, beta, h, n })
}

/// `ln Z_{d,f}` from log-weights indexed by absolute site.
pub(crate) fn pinned_pair_log(tables: &RenewalTables, lw: &[f64], d: usize, f: usize) -> f64 {
    let span = f - d;
    let mut shifted = vec![0.0; span + 1];
    shifted[1..].copy_from_slice(&lw[d + 1..=f]);
    let rows = partition::solve(&tables.k, &shifted, [1.0], span, |a| a);
    rows.ln(0, span) + lw[d] - tables.u[span].ln()
}

/// Neumaier-compensated accumulator.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.c
    }
}

/// Sums the Boltzmann weight of every contact set explicitly.
pub fn enumerate_partition(
    tables: &RenewalTables,
    omega: &DisorderField,
    beta: f64,
    h: f64,
    boundary: Boundary,
) -> Result<LogPartition> {
    let n = omega.len();
    if n > ENUMERATION_LIMIT {
        return Err(PinError::TooLarge(format!("N = {n} > {ENUMERATION_LIMIT}")));
    }
    check_horizon(tables, n)?;
    let lw = log_weights(omega, beta, h);
    let ln_k = |g: usize| tables.k[g].ln();
    // (first free site, last free site, start, end contact, closing tail?)
    let (start, free_lo, free_hi, fixed_end) = match boundary {
        Boundary::Constrained => (0, 1, n.saturating_sub(1), Some(n)),
        Boundary::Free => (0, 1, n, None),
        Boundary::PinnedPair { d, f } => {
            check_pair(tables, n, d, f)?;
            (d, d + 1, f.saturating_sub(1), Some(f))
        }
    };
    let bits = if free_hi >= free_lo { free_hi - free_lo + 1 } else { 0 };
    let term = |mask: u64| -> f64 {
        let mut prev = start;
        let mut l = if matches!(boundary, Boundary::PinnedPair { .. }) { lw[start] } else { 0.0 };
        for b in 0..bits {
            if mask >> b & 1 == 1 {
                let site = free_lo + b;
                l += ln_k(site - prev) + lw[site];
                prev = site;
            }
        }
        match fixed_end {
            Some(end) if end > prev => l + ln_k(end - prev) + lw[end],
            Some(_) => l,
            None => l + tables.tail[n - prev].ln(),
        }
    };
    let count = 1u64 << bits;
    let mut top = f64::NEG_INFINITY;
    for mask in 0..count {
        top = top.max(term(mask));
    }
    let mut acc = Neumaier::default();
    if top > f64::NEG_INFINITY {
        for mask in 0..count {
            acc.add((term(mask) - top).exp());
        }
    }
    let mut log_value = acc.total().ln() + top;
    if let Boundary::PinnedPair { d, f } = boundary {
        log_value -= tables.u[f - d].ln();
    }
    Ok(LogPartition { log_value, boundary, beta, h, n })
}

/// Free-boundary partition function and mean contact number
/// `E_{N,f}^{β,h,ω}[Σ_{n≤N} δ_n]` from the augmented DP
/// `B(n) = w_n Σ_m (B(m) + Z(m))K(n − m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactDp {
    pub log_z_free: f64,
    pub mean_contacts: f64,
}

pub fn contact_dp(tables: &RenewalTables, omega: &DisorderField, beta: f64, h: f64) -> Result<ContactDp> {
    let n = omega.len();
    check_horizon(tables, n)?;
    let lw = log_weights(omega, beta, h);
    let rows = partition::solve(&tables.k, &lw, [1.0, 0.0], n, |a| [a[0], a[0] + a[1]]);
    let lz = rows.ln_weighted_sum(0, 0..=n, |m| tables.tail[n - m]);
    let lb = rows.ln_weighted_sum(1, 0..=n, |m| tables.tail[n - m]);
    Ok(ContactDp { log_z_free: lz, mean_contacts: (lb - lz).exp() })
}

/// Draws contact sets from the free-boundary polymer measure by walking
/// backwards from the last contact.
pub struct PolymerSampler<'a> {
    tables: &'a RenewalTables,
    rows: Rows<1>,
    lw: Vec<f64>,
    /// Cumulative law of the last contact `L ∈ 0..=N`.
    last_cdf: Vec<f64>,
}

impl<'a> PolymerSampler<'a> {
    pub fn new(tables: &'a RenewalTables, omega: &DisorderField, beta: f64, h: f64) -> Result<Self> {
        let n = omega.len();
        let rows = forward_rows(tables, omega, beta, h)?;
        let lw = log_weights(omega, beta, h);
        let lz = rows.ln_weighted_sum(0, 0..=n, |m| tables.tail[n - m]);
        let mut last_cdf = vec![0.0; n + 1];
        let mut acc = 0.0;
        for m in 0..=n {
            if rows.x[0][m] > 0.0 && tables.tail[n - m] > 0.0 {
                acc += (rows.ln(0, m) + tables.tail[n - m].ln() - lz).exp();
            }
            last_cdf[m] = acc;
        }
        Ok(Self { tables, rows, lw, last_cdf })
    }

    /// Contacts in `1..=N`, increasing.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let total = *self.last_cdf.last().unwrap();
        let x = rng.gen::<f64>() * total;
        let mut at = self.last_cdf.partition_point(|&c| c <= x).min(self.last_cdf.len() - 1);
        while at > 0 && self.rows.x[0][at] == 0.0 {
            at -= 1;
        }
        let mut out = Vec::new();
        while at > 0 {
            out.push(at);
            at = self.previous(at, rng);
        }
        out.reverse();
        out
    }

    /// Contact before `at`: `m` with probability `Z(m)K(at − m)w_at / Z(at)`.
    fn previous<R: Rng + ?Sized>(&self, at: usize, rng: &mut R) -> usize {
        let s_at = self.rows.s[at];
        let target = self.rows.x[0][at] * (-self.lw[at]).exp() * rng.gen::<f64>();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for m in (0..at).rev() {
            let z = self.rows.x[0][m];
            let k = self.tables.k[at - m];
            if z > 0.0 && k > 0.0 {
                acc += z * k * (self.rows.s[m] - s_at).exp();
                last_positive = m;
                if acc > target {
                    return m;
                }
            }
        }
        last_positive
    }
}

fn replica_logs<F>(law: DisorderLaw, n: usize, replicas: usize, master: u64, threads: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&DisorderField) -> Result<f64> + Sync + Send,
{
    let out = map_indexed(threads, replicas, |r| f(&sample_disorder_seeded(law, n, master, r as u64)));
    out.into_iter().collect()
}

/// Per-replica `log Z_N` (replica `r` uses stream `(master, r)`).
#[allow(clippy::too_many_arguments)]
pub fn mc_log_partitions(
    tables: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    h: f64,
    n: usize,
    boundary: Boundary,
    replicas: usize,
    master: u64,
    threads: usize,
) -> Result<Vec<f64>> {
    check_horizon(tables, n)?;
    replica_logs(law, n, replicas, master, threads, |w| partition(tables, w, beta, h, boundary).map(|z| z.log_value))
}

/// Mean and standard error of `N⁻¹ log Z_N` (constrained) over replicas.
#[allow(clippy::too_many_arguments)]
pub fn mc_free_energy(
    tables: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    h: f64,
    n: usize,
    replicas: usize,
    master: u64,
    threads: usize,
) -> Result<Estimate> {
    if replicas < 2 {
        return domain("need at least two replicas");
    }
    let logs = mc_log_partitions(tables, law, beta, h, n, Boundary::Constrained, replicas, master, threads)?;
    let per: Vec<f64> = logs.iter().map(|l| l / n as f64).collect();
    Ok(Estimate::from_samples(&per))
}

/// Disorder average of `E_{N,f}^{β,0,ω}[Σδ_n]`.
pub fn contact_expectation(
    tables: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    n: usize,
    replicas: usize,
    master: u64,
    threads: usize,
) -> Result<Estimate> {
    if replicas < 2 {
        return domain("need at least two replicas");
    }
    check_horizon(tables, n)?;
    let v = replica_logs(law, n, replicas, master, threads, |w| contact_dp(tables, w, beta, 0.0).map(|c| c.mean_contacts))?;
    Ok(Estimate::from_samples(&v))
}

/// CSV `replica,logZ,boundary,beta,h,N,seed`.
pub fn replica_csv(logs: &[f64], boundary: Boundary, beta: f64, h: f64, n: usize, master: u64) -> String {
    let mut b = CsvBuf::new(&["replica", "logZ", "boundary", "beta", "h", "N", "seed"]);
    for (r, &l) in logs.iter().enumerate() {
        b.row(&[
            Cell::U(r as u64),
            Cell::F(l),
            Cell::S(boundary.tag()),
            Cell::F(beta),
            Cell::F(h),
            Cell::U(n as u64),
            Cell::U(master),
        ]);
    }
    b.into_string()
}
