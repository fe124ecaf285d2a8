//! Inter-arrival kernels, renewal mass functions and overlap sums.
//!
//! A kernel lives on a finite horizon `1..=n_max`; index 0 of every array is
//! reserved (`K(0) = 0`, `u(0) = 1`, `D(0) = 0`, `tail(0) = 1`).

use crate::conv::{self, dot_rev_accurate};
use crate::csv::{Cell, CsvBuf};
use crate::error::{domain, PinError, Result};
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Horizons above this use the FFT-backed recursion.
pub const DIRECT_LIMIT: usize = 10_000;

/// Negative kernel values above this are rounding noise and clamp to zero.
pub const NEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowlyVarying {
    Constant { c: f64 },
    /// `φ(n) = c·(1 + log n)^κ`.
    LogPower { kappa: f64, c: f64 },
}

impl SlowlyVarying {
    pub fn phi(&self, n: usize) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } => c,
            SlowlyVarying::LogPower { kappa, c } => c * (1.0 + (n.max(1) as f64).ln()).powf(kappa),
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } | SlowlyVarying::LogPower { c, .. } => c,
        }
    }

    /// Largest φ(x) over `1 ≤ x ≤ n` (φ is monotone for both kinds).
    pub fn sup_up_to(&self, n: usize) -> f64 {
        self.phi(1).max(self.phi(n.max(1)))
    }

    fn validate(&self) -> Result<()> {
        let c = self.scale();
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("slowly varying constant must be positive, got {c}"));
        }
        if let SlowlyVarying::LogPower { kappa, .. } = *self {
            if !kappa.is_finite() {
                return domain("log-power exponent must be finite");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flavor {
    SrwPinning { p: f64 },
    SrwWetting { p: f64 },
    StableLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkFlavor {
    Pinning,
    Wetting,
}

/// How the walk kernels are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WalkRoute {
    /// Weighted Motzkin three-term recurrence, O(n_max).
    #[default]
    Recurrence,
    /// Log-domain binomial return probabilities inverted through
    /// [`kernel_from_mass`] (pinning) or the reflected-path DP (wetting).
    /// Quadratic cost; kept as the reference evaluation.
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalKernel {
    k: Vec<f64>,
    pub alpha: f64,
    pub sv: SlowlyVarying,
    pub flavor: Flavor,
    /// Asymptotic constant for the walks; the post-renormalization constant
    /// `2π·c/Σ_n φ(n)n^{-(1+α)}` for stable-like kernels.
    pub c_phi: f64,
    /// Stable-like: estimated fraction of the untruncated law beyond the
    /// horizon. Walks: `1 − Σ K` on the horizon.
    pub truncation_deficit: f64,
}

impl RenewalKernel {
    pub fn n_max(&self) -> usize {
        self.k.len() - 1
    }

    /// `K(n)`; zero outside `1..=n_max`.
    pub fn k(&self, n: usize) -> f64 {
        if n == 0 { 0.0 } else { self.k.get(n).copied().unwrap_or(0.0) }
    }

    /// Kernel array with `K(0) = 0` at index 0.
    pub fn as_slice(&self) -> &[f64] {
        &self.k
    }

    pub fn mass(&self) -> f64 {
        self.k.iter().rev().sum()
    }

    /// Finite-n constant `φ(n) = 2π·K(n)·n^{1+α}`.
    pub fn effective_phi(&self, n: usize) -> f64 {
        2.0 * PI * self.k(n) * (n as f64).powf(1.0 + self.alpha)
    }

    /// Kernel with arbitrary weights, no metadata beyond `alpha`.
    pub fn from_weights(k: Vec<f64>, alpha: f64) -> Result<Self> {
        if k.len() < 2 {
            return domain("kernel needs at least one entry");
        }
        if k[0] != 0.0 {
            return domain("K(0) must be 0");
        }
        if k.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return domain("kernel weights must be finite and nonnegative");
        }
        let mass: f64 = k.iter().rev().sum();
        if mass > 1.0 + 1e-12 {
            return domain(format!("kernel mass {mass} exceeds 1"));
        }
        Ok(Self {
            k,
            alpha,
            sv: SlowlyVarying::Constant { c: 1.0 },
            flavor: Flavor::StableLike,
            c_phi: f64::NAN,
            truncation_deficit: (1.0 - mass).max(0.0),
        })
    }
}

/// Weighted Motzkin numbers: flat steps weigh `q`, each up/down pair `p²/4`.
/// `M_m` is the weight of nonnegative excursions of length `m`.
pub fn motzkin_weights(p: f64, len: usize) -> Vec<f64> {
    let q = 1.0 - p;
    let c = p * p - q * q;
    let mut m = vec![0.0; len.max(2)];
    m[0] = 1.0;
    m[1] = q;
    for i in 2..m.len() {
        let fi = i as f64;
        m[i] = (q * (2.0 * fi + 1.0) * m[i - 1] + c * (fi - 1.0) * m[i - 2]) / (fi + 2.0);
    }
    m.truncate(len);
    m
}

/// `P(S_n = 0)` for the lazy walk (steps ±1 w.p. p/2, hold w.p. 1−p),
/// `n = 0..=n_max`, summed over the number of up steps in log domain.
pub fn walk_return_probabilities(p: f64, n_max: usize) -> Vec<f64> {
    let q = 1.0 - p;
    let (lh, lq) = ((p / 2.0).ln(), q.ln());
    (0..=n_max)
        .map(|n| {
            let ln_n1 = ln_gamma(n as f64 + 1.0);
            let terms: Vec<f64> = (0..=n / 2)
                .map(|j| {
                    let (jf, rest) = (j as f64, (n - 2 * j) as f64);
                    ln_n1 - 2.0 * ln_gamma(jf + 1.0) - ln_gamma(rest + 1.0) + 2.0 * jf * lh + rest * lq
                })
                .collect();
            let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if n == 0 {
                return 1.0;
            }
            mx.exp() * terms.iter().map(|t| (t - mx).exp()).sum::<f64>()
        })
        .collect()
}

/// `P(S_n = 0, S_k > 0 for 0 < k < n)` for `n = 0..=n_max` by propagating
/// the walk killed at zero over heights; `n = 1` is the holding step.
pub fn positive_excursion_probabilities(p: f64, n_max: usize) -> Vec<f64> {
    let q = 1.0 - p;
    let h = p / 2.0;
    let mut out = vec![0.0; n_max + 1];
    if n_max >= 1 {
        out[1] = q;
    }
    // dist[y] = P(S_k = y, S stays positive on 1..=k), after k steps.
    let mut dist = vec![0.0; n_max + 2];
    dist[1] = h;
    let mut next = vec![0.0; n_max + 2];
    for k in 1..n_max {
        out[k + 1] = dist[1] * h;
        let top = (k + 1).min(n_max);
        for y in 1..=top {
            let mut v = q * dist[y];
            if y >= 2 {
                v += h * dist[y - 1];
            }
            v += h * dist[y + 1];
            next[y] = v;
        }
        std::mem::swap(&mut dist, &mut next);
    }
    out
}

pub fn build_kernel_srw(p: f64, n_max: usize, flavor: WalkFlavor) -> Result<RenewalKernel> {
    build_kernel_srw_with(p, n_max, flavor, WalkRoute::Recurrence)
}

pub fn build_kernel_srw_with(p: f64, n_max: usize, flavor: WalkFlavor, route: WalkRoute) -> Result<RenewalKernel> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("walk step probability must lie in (0,1), got {p}"));
    }
    if n_max < 2 {
        return domain("n_max must be at least 2");
    }
    let q = 1.0 - p;
    let mut k = vec![0.0; n_max + 1];
    match route {
        WalkRoute::Recurrence => {
            let m = motzkin_weights(p, n_max - 1);
            let (first, pair) = match flavor {
                WalkFlavor::Pinning => (q, p * p / 2.0),
                WalkFlavor::Wetting => (2.0 * q / (2.0 - p), p * p / (2.0 * (2.0 - p))),
            };
            k[1] = first;
            for n in 2..=n_max {
                k[n] = pair * m[n - 2];
            }
        }
        WalkRoute::Reference => match flavor {
            WalkFlavor::Pinning => {
                k = kernel_from_mass(&walk_return_probabilities(p, n_max))?;
            }
            WalkFlavor::Wetting => {
                let e = positive_excursion_probabilities(p, n_max);
                let norm = 2.0 / (2.0 - p);
                for n in 1..=n_max {
                    k[n] = norm * e[n];
                }
            }
        },
    }
    let (fl, c_phi) = match flavor {
        WalkFlavor::Pinning => (Flavor::SrwPinning { p }, (2.0 * p * PI).sqrt()),
        WalkFlavor::Wetting => (Flavor::SrwWetting { p }, (2.0 * p * PI).sqrt() / (2.0 - p)),
    };
    let mass: f64 = k.iter().rev().sum();
    Ok(RenewalKernel {
        k,
        alpha: 0.5,
        sv: SlowlyVarying::Constant { c: c_phi },
        flavor: fl,
        c_phi,
        truncation_deficit: (1.0 - mass).max(0.0),
    })
}

pub fn build_kernel_stable(alpha: f64, sv: SlowlyVarying, n_max: usize) -> Result<RenewalKernel> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (0,1], got {alpha}"));
    }
    if n_max < 2 {
        return domain("n_max must be at least 2");
    }
    sv.validate()?;
    let mut k = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        let phi = sv.phi(n);
        if !(phi > 0.0) {
            return domain(format!("φ({n}) = {phi} is not positive"));
        }
        k[n] = phi * (n as f64).powf(-(1.0 + alpha));
    }
    let total: f64 = k.iter().rev().sum();
    // Tail beyond the horizon by the midpoint integral of φ(n_max)x^{-(1+α)}.
    let beyond = sv.phi(n_max) * (n_max as f64 + 0.5).powf(-alpha) / alpha;
    for v in k.iter_mut() {
        *v /= total;
    }
    Ok(RenewalKernel {
        k,
        alpha,
        sv,
        flavor: Flavor::StableLike,
        c_phi: 2.0 * PI * sv.scale() / total,
        truncation_deficit: beyond / (total + beyond),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTables {
    /// Kernel, `k[0] = 0`.
    pub k: Vec<f64>,
    /// Renewal mass function, `u[0] = 1`.
    pub u: Vec<f64>,
    /// Overlap sums `D(N) = Σ_{n≤N} u(n)²`.
    pub d: Vec<f64>,
    /// `P(τ₁ > n) = 1 − Σ_{k≤n} K(k)`.
    pub tail: Vec<f64>,
}

impl RenewalTables {
    pub fn n_max(&self) -> usize {
        self.u.len() - 1
    }

    /// Assembles tables from a kernel and its mass function.
    pub fn from_parts(k: Vec<f64>, u: Vec<f64>) -> Self {
        assert_eq!(k.len(), u.len());
        let mut d = vec![0.0; u.len()];
        for n in 1..u.len() {
            d[n] = d[n - 1] + u[n] * u[n];
        }
        let tail = tail_of(&k);
        Self { k, u, d, tail }
    }

    pub fn kernel_mass(&self) -> f64 {
        self.k.iter().rev().sum()
    }

    /// Kernel mass missing on the horizon (transience or truncation).
    pub fn defect(&self) -> f64 {
        self.tail[self.n_max()]
    }

    pub fn to_csv(&self) -> String {
        let mut b = CsvBuf::new(&["n", "K", "u", "D", "tail"]);
        for n in 0..=self.n_max() {
            let kc = if n == 0 { Cell::Empty } else { Cell::F(self.k[n]) };
            b.row(&[Cell::U(n as u64), kc, Cell::F(self.u[n]), Cell::F(self.d[n]), Cell::F(self.tail[n])]);
        }
        b.into_string()
    }
}

fn tail_of(k: &[f64]) -> Vec<f64> {
    // Suffix sums add the small far terms first.
    let n_max = k.len() - 1;
    let mut suffix = vec![0.0; k.len() + 1];
    for n in (1..=n_max).rev() {
        suffix[n] = suffix[n + 1] + k[n];
    }
    let deficit = 1.0 - suffix[1];
    (0..=n_max).map(|n| (deficit + suffix[n + 1]).clamp(0.0, 1.0)).collect()
}

/// Solves `u(n) = Σ_{k=1}^{n} K(k)u(n−k)` for `n ≤ len`.
fn mass_from_kernel(k: &[f64], len: usize) -> Vec<f64> {
    if len <= DIRECT_LIMIT {
        let mut u = vec![0.0; len + 1];
        u[0] = 1.0;
        for n in 1..=len {
            u[n] = dot_rev_accurate(&u[..n], &k[1..=n]);
        }
        u
    } else {
        let [u] = conv::relaxed(k, [1.0], len, |_, s| s);
        u
    }
}

pub fn renewal_mass(kernel: &RenewalKernel) -> RenewalTables {
    let u = mass_from_kernel(&kernel.k, kernel.n_max());
    RenewalTables::from_parts(kernel.k.clone(), u)
}

/// Tables on `0..=len` only; `u(n)` for `n ≤ len` needs `K` up to `len`.
pub fn renewal_mass_prefix(kernel: &RenewalKernel, len: usize) -> Result<RenewalTables> {
    if len > kernel.n_max() {
        return Err(PinError::Horizon { needed: len, available: kernel.n_max() });
    }
    let k = kernel.k[..=len].to_vec();
    let u = mass_from_kernel(&k, len);
    let mut t = RenewalTables::from_parts(k, u);
    // Keep the survival function of the full kernel.
    let full = tail_of(&kernel.k);
    t.tail.copy_from_slice(&full[..=len]);
    Ok(t)
}

/// Inverse of the renewal recursion: `K(n) = u(n) − Σ_{k<n} K(k)u(n−k)`.
pub fn kernel_from_mass(u: &[f64]) -> Result<Vec<f64>> {
    if u.is_empty() || u[0] != 1.0 {
        return domain("a mass function starts with u(0) = 1");
    }
    if let Some(n) = u.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
        return domain(format!("u({n}) = {} is not a probability", u[n]));
    }
    let len = u.len() - 1;
    let mut k = if len <= DIRECT_LIMIT {
        let mut k = vec![0.0; len + 1];
        for n in 1..=len {
            k[n] = u[n] - dot_rev_accurate(&k[..n], &u[1..=n]);
        }
        k
    } else {
        let [k] = conv::relaxed(u, [0.0], len, |n, s| [u[n] - s[0]]);
        k
    };
    for (n, v) in k.iter_mut().enumerate().skip(1) {
        if *v < -NEGATIVE_SLACK {
            return Err(PinError::InconsistentMass { n, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(k)
}

/// Tables of the intersection of two independent copies: mass `u(n)²`.
pub fn intersection_tables(tables: &RenewalTables) -> Result<RenewalTables> {
    let u2: Vec<f64> = tables.u.iter().map(|v| v * v).collect();
    let k2 = kernel_from_mass(&u2)?;
    Ok(RenewalTables::from_parts(k2, u2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DInverse {
    pub n: usize,
    pub saturated: bool,
}

/// `max{N ≤ n_max : D(N) ≤ x}`, flagged when the whole table lies below `x`.
pub fn d_inverse(tables: &RenewalTables, x: f64) -> DInverse {
    let count = tables.d.partition_point(|&v| v <= x);
    let n = count.saturating_sub(1);
    DInverse { n, saturated: count == tables.d.len() }
}

/// Smallest `N` with `D(N) ≥ x`, if the table reaches it.
pub fn d_first_at_least(tables: &RenewalTables, x: f64) -> Option<usize> {
    let i = tables.d.partition_point(|&v| v < x);
    (i < tables.d.len()).then_some(i)
}

/// Inverse-CDF gap sampler over a cumulative kernel table.
#[derive(Debug, Clone)]
pub struct GapSampler {
    cdf: Vec<f64>,
}

impl GapSampler {
    pub fn new(k: &[f64]) -> Self {
        let mut cdf = vec![0.0; k.len()];
        for n in 1..k.len() {
            cdf[n] = cdf[n - 1] + k[n];
        }
        Self { cdf }
    }

    /// One gap, or `None` when the draw falls in the mass beyond the horizon.
    pub fn gap<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let x: f64 = rng.gen();
        let mass = *self.cdf.last().unwrap();
        if x >= mass {
            return None;
        }
        let i = self.cdf.partition_point(|&c| c <= x);
        Some(i.min(self.cdf.len() - 1).max(1))
    }

    /// Contact set `{τ_i} ∩ [0, horizon]`, starting with 0.
    pub fn sample<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<usize> {
        let mut out = vec![0];
        let mut pos = 0usize;
        while let Some(g) = self.gap(rng) {
            pos += g;
            if pos > horizon {
                break;
            }
            out.push(pos);
        }
        out
    }
}

pub fn sample_renewal<R: Rng + ?Sized>(kernel: &RenewalKernel, horizon: usize, rng: &mut R) -> Vec<usize> {
    GapSampler::new(&kernel.k).sample(horizon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::dot_rev;
    use crate::rng::stream;
    use crate::stats::chi_square;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn srw(n_max: usize) -> RenewalKernel {
        build_kernel_srw(0.5, n_max, WalkFlavor::Pinning).unwrap()
    }

    #[test]
    fn first_pinning_values() {
        let k = srw(16);
        assert_eq!(k.k(1), 0.5);
        assert!((k.k(2) - 0.125).abs() < 1e-16);
        // length-3 first returns: up-hold-down and down-hold-up
        assert!((k.k(3) - 2.0 * 0.25 * 0.5 * 0.25).abs() < 1e-16);
    }

    #[test]
    fn recurrence_matches_reference_routes() {
        for &p in &[0.2, 0.5, 0.9] {
            for fl in [WalkFlavor::Pinning, WalkFlavor::Wetting] {
                let a = build_kernel_srw_with(p, 512, fl, WalkRoute::Recurrence).unwrap();
                let b = build_kernel_srw_with(p, 512, fl, WalkRoute::Reference).unwrap();
                for n in 1..=512 {
                    let (x, y) = (a.k(n), b.k(n));
                    // the reference route inverts log-binomial sums and loses a few digits
                    assert!((x - y).abs() <= 1e-8 * y.max(1e-300) + 1e-15, "p={p} {fl:?} n={n}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn return_probabilities_small_n() {
        let t = walk_return_probabilities(0.5, 3);
        assert_eq!(t[0], 1.0);
        assert!((t[1] - 0.5).abs() < 1e-15);
        // hold-hold + up-down + down-up
        assert!((t[2] - (0.25 + 2.0 * 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn wetting_mass_approaches_one() {
        let k = build_kernel_srw(0.5, 100_000, WalkFlavor::Wetting).unwrap();
        assert!(k.truncation_deficit < 1e-2, "{}", k.truncation_deficit);
        assert!(k.mass() <= 1.0);
    }

    #[test]
    fn walk_kernel_matches_power_law() {
        for &p in &[0.3, 0.5, 0.8] {
            let k = build_kernel_srw(p, 10_000, WalkFlavor::Pinning).unwrap();
            let r = k.k(10_000) * 1e6 * 2.0 * PI / k.c_phi;
            assert!((r - 1.0).abs() < 0.05, "p={p}: {r}");
            let w = build_kernel_srw(p, 10_000, WalkFlavor::Wetting).unwrap();
            let r = w.k(10_000) * 1e6 * 2.0 * PI / w.c_phi;
            assert!((r - 1.0).abs() < 0.05, "wetting p={p}: {r}");
        }
    }

    #[test]
    fn stable_small_example() {
        let k = build_kernel_stable(0.5, SlowlyVarying::Constant { c: 1.0 }, 4).unwrap();
        let w = [1.0, 0.353_553_390_593_273_8, 0.192_450_089_729_875_25, 0.125];
        let z: f64 = w.iter().sum();
        assert!((z - 1.671_003_480_323_149).abs() < 1e-12);
        for n in 1..=4 {
            assert!((k.k(n) - w[n - 1] / z).abs() < 1e-15);
        }
        assert!((k.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stable_scale_invariant_in_c() {
        let a = build_kernel_stable(0.5, SlowlyVarying::Constant { c: 1.0 }, 300).unwrap();
        let b = build_kernel_stable(0.5, SlowlyVarying::Constant { c: 7.5 }, 300).unwrap();
        for n in 1..=300 {
            assert!((a.k(n) - b.k(n)).abs() <= 1e-15 * a.k(n));
        }
    }

    #[test]
    fn stable_rejects_bad_inputs() {
        assert!(build_kernel_stable(0.0, SlowlyVarying::Constant { c: 1.0 }, 10).is_err());
        assert!(build_kernel_stable(1.5, SlowlyVarying::Constant { c: 1.0 }, 10).is_err());
        assert!(build_kernel_stable(0.5, SlowlyVarying::Constant { c: -1.0 }, 10).is_err());
        assert!(build_kernel_srw(1.0, 10, WalkFlavor::Pinning).is_err());
    }

    #[test]
    fn overlap_grows_like_log() {
        let k = build_kernel_stable(0.5, SlowlyVarying::Constant { c: 1.0 }, 1 << 22).unwrap();
        let t = renewal_mass_prefix(&k, 10_000).unwrap();
        let r = t.d[10_000] / (10_000f64).ln() * k.c_phi * k.c_phi;
        assert!((r - 1.0).abs() < 0.10, "{r}");
    }

    #[test]
    fn mass_base_cases() {
        let k = srw(64);
        let t = renewal_mass(&k);
        assert_eq!(t.u[0], 1.0);
        assert_eq!(t.u[1], k.k(1));
        assert!((t.u[2] - (k.k(2) + k.k(1) * k.k(1))).abs() < 1e-16);
        assert!((t.u[2] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn doney_ratio_srw() {
        let k = srw(10_000);
        let t = renewal_mass(&k);
        let r = t.u[10_000] * k.c_phi * 100.0;
        assert!((0.9..=1.1).contains(&r), "{r}");
    }

    #[test]
    fn fft_recursion_agrees_with_direct() {
        let k = srw(20_000);
        let fast = renewal_mass(&k);
        let mut slow = vec![0.0; 20_001];
        slow[0] = 1.0;
        for n in 1..=20_000 {
            slow[n] = dot_rev(&slow[..n], &k.as_slice()[1..=n]);
        }
        for n in 0..=20_000 {
            assert!((fast.u[n] - slow[n]).abs() <= 1e-10 * slow[n], "n={n} {} {}", fast.u[n], slow[n]);
        }
        // Inversion through the FFT path on a well-conditioned input.
        let x = intersection_tables(&fast).unwrap();
        let mut direct = vec![0.0; 20_001];
        for n in 1..=20_000 {
            direct[n] = x.u[n] - dot_rev(&direct[..n], &x.u[1..=n]);
        }
        for n in 1..=20_000 {
            assert!((x.k[n] - direct[n]).abs() <= 1e-10 * direct[n], "n={n}");
        }
    }

    #[test]
    fn geometric_and_deterministic_masses() {
        let a = 0.3f64;
        let u: Vec<f64> = (0..20).map(|n| a.powi(n)).collect();
        let k = kernel_from_mass(&u).unwrap();
        assert!((k[1] - a).abs() < 1e-16);
        assert!(k[2..].iter().all(|v| v.abs() < 1e-15));
        let k = kernel_from_mass(&[1.0; 30]).unwrap();
        assert_eq!(k[1], 1.0);
        assert!(k[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inconsistent_mass_is_rejected() {
        // u(2) < u(1)² is impossible for a renewal
        let err = kernel_from_mass(&[1.0, 0.5, 0.1]).unwrap_err();
        assert!(matches!(err, PinError::InconsistentMass { n: 2, .. }));
    }

    #[test]
    fn round_trip_on_walk() {
        let k = srw(512);
        let back = kernel_from_mass(&renewal_mass(&k).u).unwrap();
        let worst = (1..=512).map(|n| (back[n] - k.k(n)).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn intersection_basics() {
        let t = renewal_mass(&srw(2000));
        let x = intersection_tables(&t).unwrap();
        assert_eq!(x.u[0], 1.0);
        for n in 0..=2000 {
            assert_eq!(x.u[n], t.u[n] * t.u[n]);
        }
        let d4: f64 = (1..=2000).map(|n| t.u[n].powi(4)).sum();
        assert!((x.d[2000] - d4).abs() < 1e-12);
        assert!(x.defect() > 0.0);
        let s: f64 = x.u[1..].iter().sum();
        assert!((s - t.d[2000]).abs() < 1e-12);
    }

    #[test]
    fn intersection_tail_matches_overlap() {
        let k = build_kernel_stable(0.5, SlowlyVarying::Constant { c: 1.0 }, 1 << 22).unwrap();
        let t = renewal_mass_prefix(&k, 10_000).unwrap();
        let x = intersection_tables(&t).unwrap();
        // P(τ'₁ ≥ N)·D(N) → 1 only logarithmically; at finite N the
        // renewal identity Σ_{m<N} u'(m)·P(τ'₁ ≥ N − m) = 1 pins it to 1/(1 + D).
        let r = |n: usize| x.tail[n - 1] * t.d[n];
        let (a, b, c) = (r(100), r(1_000), r(10_000));
        assert!(a < b && b < c && c < 1.0, "{a} {b} {c}");
        let s = x.tail[9_999] * (1.0 + t.d[10_000]);
        assert!((s - 1.0).abs() < 0.15, "{s}");
    }

    #[test]
    fn d_inverse_conventions() {
        let t = renewal_mass(&srw(400));
        assert_eq!(d_inverse(&t, t.d[1] * 0.5), DInverse { n: 0, saturated: false });
        assert_eq!(d_inverse(&t, t.d[5]).n, 5);
        assert_eq!(d_inverse(&t, t.d[100] + 1e-12).n, 100);
        let s = d_inverse(&t, 1e9);
        assert!(s.saturated && s.n == 400);
    }

    #[test]
    fn deterministic_sampler() {
        let k = RenewalKernel::from_weights(vec![0.0, 1.0, 0.0], 0.0).unwrap();
        let mut r = stream(1, 0);
        assert_eq!(sample_renewal(&k, 6, &mut r), vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn sampled_gaps_follow_kernel() {
        let k = srw(1 << 14);
        let s = GapSampler::new(k.as_slice());
        let mut r = stream(11, 0);
        let cells = 64;
        let mut obs = vec![0u64; cells + 1];
        let draws = 100_000;
        for _ in 0..draws {
            match s.gap(&mut r) {
                Some(g) if g <= cells => obs[g - 1] += 1,
                _ => obs[cells] += 1,
            }
        }
        let mut exp: Vec<f64> = (1..=cells).map(|n| k.k(n) * draws as f64).collect();
        exp.push(draws as f64 - exp.iter().sum::<f64>());
        let (stat, df) = chi_square(&obs, &exp, 5.0);
        let pval = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
        assert!(pval > 0.01, "chi2={stat} df={df} p={pval}");
    }

    #[test]
    fn sampled_mass_matches_recursion() {
        let k = srw(256);
        let t = renewal_mass(&k);
        let s = GapSampler::new(k.as_slice());
        let reps = 40_000;
        let mut hits = [0u32; 3];
        let mut r = stream(5, 0);
        for _ in 0..reps {
            let tau = s.sample(100, &mut r);
            for (h, &n) in hits.iter_mut().zip(&[1usize, 10, 100]) {
                if tau.binary_search(&n).is_ok() {
                    *h += 1;
                }
            }
        }
        for (h, &n) in hits.iter().zip(&[1usize, 10, 100]) {
            let phat = *h as f64 / reps as f64;
            let se = (t.u[n] * (1.0 - t.u[n]) / reps as f64).sqrt();
            assert!((phat - t.u[n]).abs() <= 3.0 * se, "n={n}: {phat} vs {}", t.u[n]);
        }
    }

    #[test]
    fn csv_layout() {
        let t = renewal_mass(&srw(3));
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,K,u,D,tail");
        assert!(lines[1].starts_with("0,,"));
        assert_eq!(lines.len(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tables_satisfy_invariants(alpha in 0.2f64..1.0, kappa in -1.0f64..1.0, n_max in 2usize..600) {
            let k = build_kernel_stable(alpha, SlowlyVarying::LogPower { kappa, c: 1.0 }, n_max).unwrap();
            prop_assert!((k.mass() - 1.0).abs() < 1e-12);
            let t = renewal_mass(&k);
            prop_assert_eq!(t.u[0], 1.0);
            for n in 1..=n_max {
                let rhs = dot_rev(&t.u[..n], &t.k[1..=n]);
                prop_assert!((t.u[n] - rhs).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&t.u[n]));
                prop_assert!(t.d[n] >= t.d[n - 1]);
                prop_assert!(t.tail[n] <= t.tail[n - 1]);
                prop_assert!(d_inverse(&t, t.d[n]).n >= n);
            }
            let back = kernel_from_mass(&t.u).unwrap();
            for n in 1..=n_max {
                let rel = (back[n] - t.k[n]).abs() / t.k[n];
                prop_assert!(rel <= 1e-10, "n={} rel={:e}", n, rel);
            }
        }

        #[test]
        fn walk_kernels_are_subprobabilities(p in 0.01f64..0.99, n_max in 2usize..3000) {
            for fl in [WalkFlavor::Pinning, WalkFlavor::Wetting] {
                let k = build_kernel_srw(p, n_max, fl).unwrap();
                prop_assert!(k.as_slice().iter().all(|&v| v >= 0.0));
                prop_assert!(k.mass() <= 1.0 + 1e-12);
            }
        }
    }
}
