//! Change-of-measure machinery: scale selection, the multilinear chaos
//! functional `X`, the penalty `g`, tilted environments and the
//! contact statistic `W`.

use crate::disorder::{DisorderField, DisorderLaw};
use crate::error::{domain, PinError, Result};
use crate::csv::{Cell, CsvBuf};
use crate::parallel::map_indexed;
use crate::renewal::{d_first_at_least, GapSampler, RenewalKernel, RenewalTables, SlowlyVarying};
use crate::rng::stream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `A = 64e⁴`.
pub fn default_a() -> f64 {
    64.0 * 4f64.exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    TheoremA { a: f64 },
    TheoremEps { eps: f64 },
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosScales {
    pub ell: usize,
    pub t: usize,
    /// Chaos order `q`: sequences have `q + 1` indices.
    pub order: usize,
    pub h: f64,
    pub m_penalty: f64,
    pub eta: f64,
    pub regime: Regime,
    /// The selected `ℓ` lies beyond the table horizon (or `D` never reaches
    /// the threshold); `ℓ`, `q` are then evaluated on the truncated table.
    pub saturated: bool,
}

impl ChaosScales {
    pub fn manual(ell: usize, t: usize, order: usize, h: f64, m_penalty: f64, eta: f64) -> Result<Self> {
        let s = Self { ell, t, order, h, m_penalty, eta, regime: Regime::Manual, saturated: false };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 1 || self.t > self.ell {
            return domain(format!("need 1 ≤ t ≤ ℓ, got t={}, ℓ={}", self.t, self.ell));
        }
        if self.order < 1 {
            return domain("chaos order must be ≥ 1");
        }
        if !(self.m_penalty >= 0.0) {
            return domain("penalty strength M must be ≥ 0");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return domain("η must lie in (0, 1)");
        }
        Ok(())
    }
}

/// `⌊x^{1/4}⌋` on integers.
fn iroot4(x: usize) -> usize {
    let mut r = (x as f64).powf(0.25) as usize;
    while (r + 1).pow(4) <= x {
        r += 1;
    }
    while r > 0 && r.pow(4) > x {
        r -= 1;
    }
    r
}

fn floor_pow(n: usize, p: f64) -> usize {
    (n as f64).powf(p).floor() as usize
}

/// Smallest `n` with `⌊n^p⌋ ≥ t`, i.e. `n ≥ t^{1/p}`.
fn least_with_floor_pow(t: usize, p: f64) -> usize {
    let mut n = (t as f64).powf(1.0 / p).ceil() as usize;
    while n > 1 && floor_pow(n - 1, p) >= t {
        n -= 1;
    }
    while floor_pow(n, p) < t {
        n += 1;
    }
    n
}

/// `ℓ`, `t`, `q`, `h` for the theorem regimes; the manual regime is built
/// with [`ChaosScales::manual`] and passed through unchanged.
pub fn select_scales(
    tables: &RenewalTables,
    sv: &SlowlyVarying,
    beta: f64,
    regime: Regime,
    m_penalty: f64,
    eta: f64,
) -> Result<ChaosScales> {
    if !(beta > 0.0) {
        return domain("β must be positive");
    }
    let n_max = tables.n_max();
    let (threshold, pow, q_div) = match regime {
        Regime::TheoremA { a } if a > 0.0 => (a / (beta * beta), 0.25, 1.0),
        Regime::TheoremEps { eps } if eps > 0.0 && eps < 1.0 => ((1.0 + eps) / (beta * beta), 1.0 - eps * eps, eps * eps),
        Regime::Manual => return domain("manual scales are passed through ChaosScales::manual"),
        _ => return domain("regime constant out of range"),
    };
    let (ell, mut saturated) = match d_first_at_least(tables, threshold) {
        Some(t_star) => {
            let ell = match regime {
                Regime::TheoremA { .. } => t_star.max(1).pow(4),
                _ => least_with_floor_pow(t_star.max(1), pow),
            };
            (ell, false)
        }
        None => (n_max, true),
    };
    if ell > n_max {
        saturated = true;
    }
    let t = match regime {
        Regime::TheoremA { .. } => iroot4(ell),
        _ => floor_pow(ell, pow),
    }
    .max(1);
    let d_ell = tables.d[ell.min(n_max)];
    let raw = sv.sup_up_to(ell).ln().max(d_ell.ln()) / q_div;
    let order = (raw.ceil().max(1.0)) as usize;
    let h = match regime {
        Regime::TheoremEps { eps } => (ell as f64).powf(-(2.0 + eps) / 4.0),
        _ => 1.0 / ell as f64,
    };
    Ok(ChaosScales { ell, t, order, h, m_penalty, eta, regime, saturated })
}

/// Unnormalized layer sums `Σ_j V_k(j)` for `k = 0..=max_order`, where
/// `V_0(j) = ω_j` and `V_k(j) = ω_j Σ_{1≤g≤t, g<j} u(g)V_{k−1}(j−g)`.
pub fn chaos_layers(block: &[f64], u: &[f64], t: usize, max_order: usize) -> Vec<f64> {
    let l = block.len();
    let mut prev = block.to_vec();
    let mut next = vec![0.0; l];
    let mut sums = Vec::with_capacity(max_order + 1);
    sums.push(prev.iter().sum());
    for _ in 1..=max_order {
        for j in 0..l {
            let mut acc = 0.0;
            let lo = j.saturating_sub(t);
            for jp in lo..j {
                acc += u[j - jp] * prev[jp];
            }
            next[j] = block[j] * acc;
        }
        sums.push(next.iter().sum());
        std::mem::swap(&mut prev, &mut next);
    }
    sums
}

fn check_block(len: usize, scales: &ChaosScales, tables: &RenewalTables) -> Result<()> {
    if scales.t >= scales.ell {
        return domain(format!("t = {} must be < ℓ = {}", scales.t, scales.ell));
    }
    if len != scales.ell {
        return domain(format!("block length {len} differs from ℓ = {}", scales.ell));
    }
    if scales.t > tables.n_max() {
        return Err(PinError::Horizon { needed: scales.t, available: tables.n_max() });
    }
    Ok(())
}

/// `X = ℓ^{−1/2}D(t)^{−q/2} Σ_{J_{ℓ,t}} U(i)ω_i` on one block.
pub fn chaos_x(block: &[f64], tables: &RenewalTables, scales: &ChaosScales) -> Result<f64> {
    check_block(block.len(), scales, tables)?;
    let s = chaos_layers(block, &tables.u, scales.t, scales.order);
    Ok(s[scales.order] * x_norm(tables, scales.ell, scales.t, scales.order))
}

/// `ℓ^{−1/2}D(t)^{−q/2}`.
pub fn x_norm(tables: &RenewalTables, ell: usize, t: usize, order: usize) -> f64 {
    1.0 / ((ell as f64).sqrt() * tables.d[t].powf(order as f64 / 2.0))
}

/// `E[X²] = ℓ⁻¹D(t)^{−q} Σ_{J_{ℓ,t}} U(i)²`, exactly.
pub fn chaos_second_moment_exact(tables: &RenewalTables, scales: &ChaosScales) -> Result<f64> {
    check_block(scales.ell, scales, tables)?;
    let u2: Vec<f64> = tables.u[..=scales.t].iter().map(|v| v * v).collect();
    let ones = vec![1.0; scales.ell];
    let s = chaos_layers(&ones, &u2, scales.t, scales.order);
    Ok(s[scales.order] / (scales.ell as f64 * tables.d[scales.t].powi(scales.order as i32)))
}

/// `g = exp(−M·1{x ≥ e^{M²}})`.
pub fn penalty_g(x: f64, m: f64) -> f64 {
    if x < (m * m).exp() {
        1.0
    } else {
        (-m).exp()
    }
}

/// Empirical cost of the penalty on sampled values of `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyCost {
    pub tail: f64,
    /// Sample mean of `g⁻³`.
    pub mean_g_inv3: f64,
    /// `1 + (e^{3M} − 1)·tail`, equal to `mean_g_inv3` up to rounding.
    pub identity: f64,
    /// `e^{−2M²}`; the cost bound `≤ 2` is claimed when `tail` is below it.
    pub tail_bound: f64,
    pub in_regime: bool,
}

pub fn penalty_cost(xs: &[f64], m: f64) -> PenaltyCost {
    let n = xs.len() as f64;
    let thr = (m * m).exp();
    let hits = xs.iter().filter(|&&x| x >= thr).count() as f64;
    let tail = hits / n;
    let mean_g_inv3 = xs.iter().map(|&x| penalty_g(x, m).powi(-3)).sum::<f64>() / n;
    let identity = 1.0 + (3.0 * m).exp_m1() * tail;
    let tail_bound = (-2.0 * m * m).exp();
    PenaltyCost { tail, mean_g_inv3, identity, tail_bound, in_regime: tail <= tail_bound }
}

/// Resamples `ω_n` at the listed contact sites (1-based within the block)
/// from the law tilted by `e^{βω − λ(β)}`.
pub fn tilted_block<R: Rng + ?Sized>(
    block: &DisorderField,
    contacts: &[usize],
    beta: f64,
    rng: &mut R,
) -> Result<DisorderField> {
    if block.law != DisorderLaw::Gaussian {
        return Err(PinError::Unsupported(format!("tilted resampling for the {} law", block.law.name())));
    }
    let mut out = block.clone();
    out.seed = None;
    for &c in contacts {
        if c == 0 || c > block.len() {
            return domain(format!("contact {c} outside the block 1..={}", block.len()));
        }
        let z: f64 = StandardNormal.sample(rng);
        out.omega[c - 1] = block.law.lambda_prime(beta) + z;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiChoice {
    /// `2π·K(n)·n^{1+α}` from the kernel.
    Effective,
    /// The kernel's asymptotic constant `c_φ`.
    Asymptotic,
}

/// Parameters of `W`: horizon `n`, range `t`, order `q` and `φ(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WConfig {
    pub n: usize,
    pub t: usize,
    pub order: usize,
    pub phi_n: f64,
}

impl WConfig {
    pub fn new(kernel: &RenewalKernel, n: usize, t: usize, order: usize, phi: PhiChoice) -> Result<Self> {
        if n == 0 || t == 0 {
            return domain("W needs n ≥ 1 and t ≥ 1");
        }
        let phi_n = match phi {
            PhiChoice::Effective => kernel.effective_phi(n),
            PhiChoice::Asymptotic => kernel.c_phi,
        };
        if !(phi_n > 0.0 && phi_n.is_finite()) {
            return domain(format!("φ({n}) = {phi_n} is not usable"));
        }
        Ok(Self { n, t, order, phi_n })
    }

    /// Renewal horizon a sample must cover.
    pub fn horizon(&self) -> usize {
        self.n + self.t * self.order
    }
}

/// `Σ_{J'_{n,t}} U(i)δ_i` over the sorted contact set (sites ≥ 1 only;
/// a leading 0 is ignored).
pub fn contact_chaos_sum(contacts: &[usize], u: &[f64], n: usize, t: usize, order: usize) -> f64 {
    let c: Vec<usize> = contacts.iter().copied().filter(|&x| x >= 1).collect();
    let mut prev: Vec<f64> = c.iter().map(|&x| if x <= n { 1.0 } else { 0.0 }).collect();
    let mut next = vec![0.0; c.len()];
    for _ in 0..order {
        let mut lo = 0;
        for i in 0..c.len() {
            while c[i] - c[lo] > t {
                lo += 1;
            }
            let mut acc = 0.0;
            for j in lo..i {
                acc += u[c[i] - c[j]] * prev[j];
            }
            next[i] = acc;
        }
        std::mem::swap(&mut prev, &mut next);
    }
    prev.iter().sum()
}

/// `W = φ(n)n^{−1/2}D(t)^{−q} Σ_{J'_{n,t}} U(i)δ_i`.
pub fn w_statistic(contacts: &[usize], tables: &RenewalTables, cfg: &WConfig) -> Result<f64> {
    if cfg.t > tables.n_max() {
        return Err(PinError::Horizon { needed: cfg.t, available: tables.n_max() });
    }
    let s = contact_chaos_sum(contacts, &tables.u, cfg.n, cfg.t, cfg.order);
    Ok(cfg.phi_n / (cfg.n as f64).sqrt() * s / tables.d[cfg.t].powi(cfg.order as i32))
}

/// `ΔW = φ(n)n^{−1/2}Σ_{1≤j≤n}δ_j − W`.
pub fn delta_w(contacts: &[usize], tables: &RenewalTables, cfg: &WConfig) -> Result<f64> {
    let count = contacts.iter().filter(|&&x| x >= 1 && x <= cfg.n).count() as f64;
    let w = w_statistic(contacts, tables, cfg)?;
    Ok(cfg.phi_n / (cfg.n as f64).sqrt() * count - w)
}

/// `W` (or `ΔW` with `delta`) on `count` renewal samples; sample `i` uses
/// the stream `(master, i)`.
pub fn sample_w(
    tables: &RenewalTables,
    cfg: &WConfig,
    count: usize,
    master: u64,
    threads: usize,
    delta: bool,
) -> Result<Vec<f64>> {
    if cfg.horizon() > tables.n_max() {
        return Err(PinError::Horizon { needed: cfg.horizon(), available: tables.n_max() });
    }
    let gs = GapSampler::new(&tables.k);
    map_indexed(threads, count, |i| {
        let mut rng = stream(master, i as u64);
        let c = gs.sample(cfg.horizon(), &mut rng);
        if delta {
            delta_w(&c, tables, cfg)
        } else {
            w_statistic(&c, tables, cfg)
        }
    })
    .into_iter()
    .collect()
}

pub fn w_csv(ws: &[f64], cfg: &WConfig) -> String {
    let mut b = CsvBuf::new(&["sample", "W", "n", "t", "q"]);
    for (i, &w) in ws.iter().enumerate() {
        b.row(&[Cell::U(i as u64), Cell::F(w), Cell::U(cfg.n as u64), Cell::U(cfg.t as u64), Cell::U(cfg.order as u64)]);
    }
    b.into_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_disorder;
    use crate::renewal::{build_kernel_srw, renewal_mass, WalkFlavor};
    use crate::stats::Estimate;
    use proptest::prelude::*;
    use rand::Rng;

    fn srw(n_max: usize) -> (RenewalKernel, RenewalTables) {
        let k = build_kernel_srw(0.5, n_max, WalkFlavor::Pinning).unwrap();
        let t = renewal_mass(&k);
        (k, t)
    }

    /// All increasing `(i_0..i_q)` in `1..=ℓ` with increments in `1..=t`.
    fn index_sets(ell: usize, t: usize, q: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(ell: usize, t: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == q + 1 {
                out.push(cur.clone());
                return;
            }
            let (lo, hi) = match cur.last() {
                None => (1, ell),
                Some(&x) => (x + 1, (x + t).min(ell)),
            };
            for i in lo..=hi {
                cur.push(i);
                rec(ell, t, q, cur, out);
                cur.pop();
            }
        }
        rec(ell, t, q, &mut cur, &mut out);
        out
    }

    fn weight(u: &[f64], i: &[usize]) -> f64 {
        i.windows(2).map(|w| u[w[1] - w[0]]).product()
    }

    fn manual(ell: usize, t: usize, q: usize) -> ChaosScales {
        ChaosScales::manual(ell, t, q, 0.0, 10.0, 0.5).unwrap()
    }

    #[test]
    fn two_site_example() {
        let (_, t) = srw(64);
        let s = manual(2, 1, 1);
        let x = chaos_x(&[0.7, -1.3], &t, &s).unwrap();
        assert!((x - 0.7 * -1.3 / 2f64.sqrt()).abs() < 1e-15);
        assert!((chaos_second_moment_exact(&t, &s).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(chaos_x(&[0.0, 0.0], &t, &s).unwrap(), 0.0);
        assert!(chaos_x(&[0.0, 0.0], &t, &manual(2, 2, 1)).is_err());
    }

    #[test]
    fn layers_match_enumeration() {
        let (_, t) = srw(64);
        let mut rng = stream(21, 0);
        for (ell, tt, q) in [(12, 4, 3), (10, 3, 2), (12, 1, 3), (7, 4, 1)] {
            let w = sample_disorder(DisorderLaw::Gaussian, ell, &mut rng);
            let s = manual(ell, tt, q);
            let dp = chaos_x(&w.omega, &t, &s).unwrap();
            let sets = index_sets(ell, tt, q);
            let direct: f64 = sets.iter().map(|i| weight(&t.u, i) * i.iter().map(|&j| w.at(j)).product::<f64>()).sum();
            let norm = x_norm(&t, ell, tt, q);
            assert!((dp - direct * norm).abs() < 1e-12 * (1.0 + dp.abs()), "{ell} {tt} {q}");
            let sq: f64 = sets.iter().map(|i| weight(&t.u, i).powi(2)).sum();
            let exact = chaos_second_moment_exact(&t, &s).unwrap();
            assert!((exact - sq / (ell as f64 * t.d[tt].powi(q as i32))).abs() < 1e-14);
        }
    }

    #[test]
    fn x_is_affine_in_each_coordinate() {
        let (_, t) = srw(64);
        let w = sample_disorder(DisorderLaw::Gaussian, 12, &mut stream(22, 0)).omega;
        let s = manual(12, 4, 3);
        for j in 0..12 {
            let at = |c: f64| {
                let mut v = w.clone();
                v[j] = c * w[j];
                chaos_x(&v, &t, &s).unwrap()
            };
            let (x0, x1, x2) = (at(0.0), at(1.0), at(2.0));
            assert!(((x2 - x1) - (x1 - x0)).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moment_at_most_one() {
        let (_, t) = srw(1 << 11);
        for ell in [1usize << 8, 1 << 10] {
            for tt in [4, 16] {
                for q in 1..=3 {
                    let v = chaos_second_moment_exact(&t, &manual(ell, tt, q)).unwrap();
                    assert!(v > 0.0 && v <= 1.0, "{ell} {tt} {q}: {v}");
                }
            }
        }
    }

    #[test]
    fn monte_carlo_moments_of_x() {
        let (_, t) = srw(512);
        let s = manual(256, 4, 2);
        let exact = chaos_second_moment_exact(&t, &s).unwrap();
        let mut rng = stream(23, 0);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| chaos_x(&sample_disorder(DisorderLaw::Gaussian, 256, &mut rng).omega, &t, &s).unwrap())
            .collect();
        assert!(Estimate::from_samples(&xs).within(0.0, 3.0));
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(Estimate::from_samples(&sq).within(exact, 3.0));
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_g(0.0, 10.0), 1.0);
        assert_eq!(penalty_g(101f64.exp(), 10.0), (-10f64).exp());
        assert_eq!(penalty_g(5.0, f64::INFINITY), 1.0);
        assert_eq!(penalty_g(5.0, 0.0), 1.0);
        let c = penalty_cost(&[0.0, 0.5, 2.0, 3.0], 1.0);
        assert_eq!(c.tail, 0.25);
        assert!((c.mean_g_inv3 - c.identity).abs() < 1e-12);
        assert!(!c.in_regime);
    }

    #[test]
    fn tilted_moments() {
        let block = DisorderField::new(vec![0.0; 8], DisorderLaw::Gaussian);
        let mut rng = stream(24, 0);
        let (mut at, mut off) = (Vec::new(), Vec::new());
        for _ in 0..20_000 {
            let b = tilted_block(&block, &[2, 5], 0.6, &mut rng).unwrap();
            at.push(b.at(5));
            off.push(b.at(3));
        }
        let m = Estimate::from_samples(&at);
        assert!(m.within(0.6, 3.0));
        assert!(off.iter().all(|&x| x == 0.0));
        let id = tilted_block(&block, &[], 0.6, &mut rng).unwrap();
        assert_eq!(id.omega, block.omega);
        let r = DisorderField::new(vec![0.0; 3], DisorderLaw::Rademacher);
        assert!(matches!(tilted_block(&r, &[1], 0.5, &mut rng), Err(PinError::Unsupported(_))));
    }

    #[test]
    fn w_on_the_full_renewal() {
        let mut k = vec![0.0; 40];
        k[1] = 1.0;
        let full = RenewalTables::from_parts(k, vec![1.0; 40]);
        let cfg = WConfig { n: 20, t: 3, order: 2, phi_n: 1.7 };
        let contacts: Vec<usize> = (0..=26).collect();
        let w = w_statistic(&contacts, &full, &cfg).unwrap();
        // 20 starts × 3² increment choices, D(3) = 3
        assert!((w - 1.7 * 180.0 / (20f64.sqrt() * 9.0)).abs() < 1e-12);
        assert!(delta_w(&contacts, &full, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn w_matches_enumeration_on_random_contacts() {
        let (_, t) = srw(64);
        let mut rng = stream(25, 0);
        for _ in 0..20 {
            let contacts: Vec<usize> = (1..=26).filter(|_| rng.gen::<f64>() < 0.5).collect();
            let cfg = WConfig { n: 20, t: 3, order: 2, phi_n: 1.0 };
            let w = w_statistic(&contacts, &t, &cfg).unwrap();
            let set: std::collections::HashSet<usize> = contacts.iter().copied().collect();
            let mut direct = 0.0;
            for i in index_sets(26, 3, 2) {
                if i[0] <= 20 && i.iter().all(|x| set.contains(x)) {
                    direct += weight(&t.u, &i);
                }
            }
            assert!((w - direct / (20f64.sqrt() * t.d[3].powi(2))).abs() < 1e-12);
        }
    }

    #[test]
    fn w_degenerate_cases() {
        let (k, t) = srw(64);
        let cfg = WConfig::new(&k, 20, 3, 2, PhiChoice::Effective).unwrap();
        assert_eq!(w_statistic(&[0], &t, &cfg).unwrap(), 0.0);
        assert_eq!(w_statistic(&[0, 25, 26], &t, &cfg).unwrap(), 0.0);
        let c0 = WConfig { order: 0, ..cfg };
        assert!(delta_w(&[0, 3, 9, 30], &t, &c0).unwrap().abs() < 1e-15);
        let ca = WConfig::new(&k, 20, 3, 2, PhiChoice::Asymptotic).unwrap();
        assert!((ca.phi_n - std::f64::consts::PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn manual_and_theorem_scales() {
        let (k, t) = srw(1 << 12);
        let m = manual(100, 5, 2);
        assert_eq!((m.ell, m.t, m.order, m.regime), (100, 5, 2, Regime::Manual));
        // Theorem A with a toy table where D jumps past A at t = 2
        let big = default_a() + 1.0;
        let toy = RenewalTables {
            k: vec![0.0; 20],
            u: vec![1.0; 20],
            d: (0..20).map(|n| if n < 2 { n as f64 } else { big + n as f64 }).collect(),
            tail: vec![1.0; 20],
        };
        let s = select_scales(&toy, &k.sv, 1.0, Regime::TheoremA { a: default_a() }, 10.0, 0.5).unwrap();
        assert_eq!((s.ell, s.t), (16, 2));
        assert!(!s.saturated);
        assert_eq!(s.h, 1.0 / 16.0);
        let short = RenewalTables { k: toy.k[..10].to_vec(), u: toy.u[..10].to_vec(), d: toy.d[..10].to_vec(), tail: toy.tail[..10].to_vec() };
        let s = select_scales(&short, &k.sv, 1.0, Regime::TheoremA { a: default_a() }, 10.0, 0.5).unwrap();
        assert!(s.saturated && s.ell == 16);
        // monotone in β
        let mut prev = usize::MAX;
        for beta in [0.8, 1.0, 1.5, 2.0, 3.0] {
            let s = select_scales(&t, &k.sv, beta, Regime::TheoremEps { eps: 0.5 }, 10.0, 0.5).unwrap();
            assert!(s.ell <= prev);
            assert_eq!(s.t, ((s.ell as f64).powf(0.75)).floor() as usize);
            assert!(t.d[s.t] >= 1.5 / (beta * beta) || s.saturated);
            if s.ell > 1 && !s.saturated {
                assert!(t.d[((s.ell - 1) as f64).powf(0.75) as usize] < 1.5 / (beta * beta));
            }
            prev = s.ell;
        }
        let tiny = select_scales(&t, &k.sv, 0.05, Regime::TheoremA { a: default_a() }, 10.0, 0.5).unwrap();
        assert!(tiny.saturated);
    }

    #[test]
    fn integer_roots() {
        for x in [0usize, 1, 15, 16, 17, 80, 81, 1 << 40] {
            let r = iroot4(x);
            assert!(r.pow(4) <= x && (r + 1).pow(4) > x);
        }
        assert_eq!(least_with_floor_pow(3, 0.75), 5);
    }

    #[test]
    fn w_is_roughly_half_normal_scaled() {
        // φ(n)/√n Σδ has mean → 2 with φ = c_φ
        let (k, t) = srw(1 << 13);
        let cfg = WConfig::new(&k, 4096, 16, 0, PhiChoice::Asymptotic).unwrap();
        let ws = sample_w(&t, &cfg, 4000, 26, 2, false).unwrap();
        assert_eq!(ws, sample_w(&t, &cfg, 4000, 26, 1, false).unwrap());
        assert!(w_csv(&ws[..2], &cfg).starts_with("sample,W,n,t,q\n0,"));
        let e = Estimate::from_samples(&ws);
        assert!((e.mean - 2.0).abs() < 0.1, "{e:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn w_nonnegative(seed in 0u64..10_000, tt in 1usize..6, q in 0usize..4) {
            let (_, t) = srw(64);
            let mut rng = stream(seed, 0);
            let contacts: Vec<usize> = (1..=40).filter(|_| rng.gen::<f64>() < 0.4).collect();
            let cfg = WConfig { n: 24, t: tt, order: q, phi_n: 1.3 };
            prop_assert!(w_statistic(&contacts, &t, &cfg).unwrap() >= 0.0);
        }

        #[test]
        fn second_moment_in_unit_interval(ell in 3usize..200, tt in 1usize..20, q in 1usize..4) {
            let (_, t) = srw(64);
            prop_assume!(tt < ell);
            let v = chaos_second_moment_exact(&t, &manual(ell, tt, q)).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0 + 1e-15);
        }
    }
}
