//! Critical-point bounds and numerical checks of the fractional-moment
//! argument: the second-moment correlation length, closed-form and
//! finite-size brackets for `h_c`, coarse-grained partition functions, the
//! penalized one-block estimate and brute-force verifiers for the
//! covariance and triple-sum lemmas.

use crate::chaos::{self, contact_chaos_sum, penalty_cost, penalty_g, x_norm, ChaosScales, PenaltyCost};
use crate::csv::{Cell, CsvBuf};
use crate::disorder::{sample_disorder, sample_disorder_seeded, DisorderLaw};
use crate::error::{domain, PinError, Result};
use crate::homogeneous::{conditioned_contact_mgf, homo_partition};
use crate::parallel::map_indexed;
use crate::partition::{self, Boundary};
use crate::quenched::{self, contact_dp, log_weights, PolymerSampler};
use crate::renewal::{d_inverse, GapSampler, RenewalTables};
use crate::rng::{derive, stream};
use crate::stats::Estimate;
use rand::Rng;

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("ε = {eps} outside (0, 1)"));
    }
    Ok(())
}

fn second_moment_defect(law: DisorderLaw, beta: f64) -> f64 {
    law.lambda(2.0 * beta) - 2.0 * law.lambda(beta)
}

/// `E[(Z_{N,f}^{β,0,ω})²]` as a homogeneous partition function of the
/// intersection renewal (`inter` from `intersection_tables`).
pub fn second_moment_exact(inter: &RenewalTables, law: DisorderLaw, beta: f64, n: usize) -> Result<f64> {
    Ok(homo_partition(inter, second_moment_defect(law, beta), n, Boundary::Free)?.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationLength {
    pub n: usize,
    /// The second moment stays below the threshold up to the horizon.
    pub saturated: bool,
    pub threshold: f64,
    pub second_moment: f64,
    /// Second moment at `n + 1`, absent when saturated.
    pub next_second_moment: Option<f64>,
}

/// `N_{β,ε} = max{N : E[(Z_{N,f}^{β,0,ω})²] ≤ 10/ε}`.
pub fn correlation_length(inter: &RenewalTables, law: DisorderLaw, beta: f64, eps: f64) -> Result<CorrelationLength> {
    check_eps(eps)?;
    let n_max = inter.n_max();
    let lw = vec![second_moment_defect(law, beta); n_max + 1];
    let rows = partition::solve(&inter.k, &lw, [1.0], n_max, |a| a);
    let m2 = |n: usize| rows.ln_weighted_sum(0, 0..=n, |m| inter.tail[n - m]).exp();
    let threshold = 10.0 / eps;
    if m2(n_max) <= threshold {
        return Ok(CorrelationLength {
            n: n_max,
            saturated: true,
            threshold,
            second_moment: m2(n_max),
            next_second_moment: None,
        });
    }
    let (mut lo, mut hi) = (0usize, n_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if m2(mid) <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CorrelationLength { n: lo, saturated: false, threshold, second_moment: m2(lo), next_second_moment: Some(m2(hi)) })
}

/// Finite-volume localization criterion `h_c ≤ 2 log N / E E_{N,f}[Σδ]`
/// at `N = N_{β,ε}`, with the contact event `Σδ ≥ N^{(2−ε)/4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeUpper {
    pub beta: f64,
    pub eps: f64,
    pub n: usize,
    pub saturated: bool,
    pub second_moment: f64,
    pub contacts: Estimate,
    pub value: f64,
    pub event_threshold: f64,
    pub event_probability: Estimate,
    /// `ε/80`.
    pub event_bound: f64,
    /// The event bound holds whenever the second moment is below `10/ε`.
    pub event_ok: bool,
}

/// Replica `r` samples ω on stream `(master, r)` and draws `draws`
/// polymers on the stream `(derive(master, "polymer"), r)`.
#[allow(clippy::too_many_arguments)]
pub fn hc_upper_finite_size(
    tables: &RenewalTables,
    inter: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    eps: f64,
    replicas: usize,
    draws: usize,
    master: u64,
    threads: usize,
) -> Result<FiniteSizeUpper> {
    if replicas < 2 || draws < 1 {
        return domain("need at least two replicas and one polymer draw each");
    }
    let cl = correlation_length(inter, law, beta, eps)?;
    let n = cl.n.min(tables.n_max());
    if n < 2 {
        return domain(format!("correlation length {n} too short for the criterion"));
    }
    let event_threshold = (n as f64).powf((2.0 - eps) / 4.0);
    let polymer_master = derive(master, "polymer");
    let per = map_indexed(threads, replicas, |r| -> Result<(f64, f64)> {
        let w = sample_disorder_seeded(law, n, master, r as u64);
        let c = contact_dp(tables, &w, beta, 0.0)?.mean_contacts;
        let sampler = PolymerSampler::new(tables, &w, beta, 0.0)?;
        let mut rng = stream(polymer_master, r as u64);
        let hits = (0..draws).filter(|_| sampler.sample(&mut rng).len() as f64 >= event_threshold).count();
        Ok((c, hits as f64 / draws as f64))
    });
    let per: Vec<(f64, f64)> = per.into_iter().collect::<Result<_>>()?;
    let contacts = Estimate::from_samples(&per.iter().map(|p| p.0).collect::<Vec<_>>());
    let event_probability = Estimate::from_samples(&per.iter().map(|p| p.1).collect::<Vec<_>>());
    let event_bound = eps / 80.0;
    Ok(FiniteSizeUpper {
        beta,
        eps,
        n,
        saturated: cl.saturated || cl.n > tables.n_max(),
        second_moment: cl.second_moment,
        contacts,
        value: 2.0 * (n as f64).ln() / contacts.mean,
        event_threshold,
        event_probability,
        event_bound,
        event_ok: cl.second_moment > cl.threshold || event_probability.mean >= event_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcBracket {
    pub beta: f64,
    pub eps: f64,
    /// `D⁻¹((1+ε)/β²)^{−(1+ε)/2}`.
    pub lower_formula: f64,
    /// `D⁻¹((1−ε)/β²)^{−(1−ε)/2}`.
    pub upper_formula: f64,
    pub finite_size_upper: Option<f64>,
    pub lower_saturated: bool,
    pub upper_saturated: bool,
    pub finite_saturated: bool,
    pub predicted_constant: f64,
}

impl HcBracket {
    pub fn beta2_log_lower(&self) -> f64 {
        self.beta * self.beta * self.lower_formula.ln()
    }

    pub fn beta2_log_upper(&self) -> f64 {
        self.beta * self.beta * self.upper_formula.ln()
    }

    pub fn any_saturated(&self) -> bool {
        self.lower_saturated || self.upper_saturated || self.finite_saturated
    }

    fn saturation_tag(&self) -> String {
        let mut tags = Vec::new();
        if self.lower_saturated {
            tags.push("lower");
        }
        if self.upper_saturated {
            tags.push("upper");
        }
        if self.finite_saturated {
            tags.push("finite");
        }
        if tags.is_empty() {
            "none".into()
        } else {
            tags.join(";")
        }
    }
}

fn inverse_power(tables: &RenewalTables, x: f64, exponent: f64) -> (f64, bool) {
    let inv = d_inverse(tables, x);
    let v = if inv.n == 0 { f64::INFINITY } else { (inv.n as f64).powf(-exponent) };
    (v, inv.saturated)
}

pub fn hc_bracket(
    tables: &RenewalTables,
    beta: f64,
    eps: f64,
    predicted_constant: f64,
    finite: Option<&FiniteSizeUpper>,
) -> Result<HcBracket> {
    check_eps(eps)?;
    if !(beta > 0.0) {
        return domain("β must be positive");
    }
    let b2 = beta * beta;
    let (lower_formula, lower_saturated) = inverse_power(tables, (1.0 + eps) / b2, 0.5 * (1.0 + eps));
    let (upper_formula, upper_saturated) = inverse_power(tables, (1.0 - eps) / b2, 0.5 * (1.0 - eps));
    Ok(HcBracket {
        beta,
        eps,
        lower_formula,
        upper_formula,
        finite_size_upper: finite.map(|f| f.value),
        lower_saturated,
        upper_saturated,
        finite_saturated: finite.is_some_and(|f| f.saturated),
        predicted_constant,
    })
}

/// CSV `beta,eps,lower_formula,upper_formula,finite_size_upper,
/// beta2_log_lower,beta2_log_upper,predicted_constant,saturated`.
pub fn bracket_csv(rows: &[HcBracket]) -> String {
    let mut b = CsvBuf::new(&[
        "beta",
        "eps",
        "lower_formula",
        "upper_formula",
        "finite_size_upper",
        "beta2_log_lower",
        "beta2_log_upper",
        "predicted_constant",
        "saturated",
    ]);
    for r in rows {
        b.row(&[
            Cell::F(r.beta),
            Cell::F(r.eps),
            Cell::F(r.lower_formula),
            Cell::F(r.upper_formula),
            r.finite_size_upper.map_or(Cell::Empty, Cell::F),
            Cell::F(r.beta2_log_lower()),
            Cell::F(r.beta2_log_upper()),
            Cell::F(r.predicted_constant),
            Cell::S(r.saturation_tag()),
        ]);
    }
    b.into_string()
}

/// `(Σ_{n≥1} n^{−10/9})⁻¹`.
pub fn default_gamma() -> f64 {
    let s = 10.0 / 9.0;
    let m = 10_000usize;
    let head: f64 = (1..m).map(|n| (n as f64).powf(-s)).sum();
    // Euler–Maclaurin tail from m
    let mf = m as f64;
    let tail = mf.powf(1.0 - s) / (s - 1.0) + 0.5 * mf.powf(-s) + s / 12.0 * mf.powf(-s - 1.0);
    1.0 / (head + tail)
}

/// Blocks `B_i = {ℓ(i−1)+1, …, ℓi}`, `i = 1..=m`, and a visited set `I ∋ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrainSpec {
    pub ell: usize,
    pub m: usize,
    pub blocks: Vec<usize>,
    pub gamma: f64,
}

/// Desk-scale cap on `ℓ·m`.
pub const COARSE_LIMIT: usize = 1 << 13;

impl CoarseGrainSpec {
    pub fn new(ell: usize, m: usize, blocks: Vec<usize>) -> Result<Self> {
        let s = Self { ell, m, blocks, gamma: default_gamma() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.m == 0 {
            return domain("need ℓ ≥ 1 and m ≥ 1");
        }
        if self.blocks.is_empty() || self.blocks.last() != Some(&self.m) {
            return domain("the visited blocks must be nonempty and end with m");
        }
        if self.blocks[0] == 0 || self.blocks.windows(2).any(|w| w[0] >= w[1]) {
            return domain("the visited blocks must be strictly increasing in 1..=m");
        }
        if !(self.gamma > 0.0) {
            return domain("γ must be positive");
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.ell * self.m
    }

    /// `Π_k γ/(i_k − i_{k−1})^{10/9}` with `i_0 = 0`.
    pub fn rhs_shape(&self) -> f64 {
        let mut prev = 0;
        let mut p = 1.0;
        for &i in &self.blocks {
            p *= self.gamma / ((i - prev) as f64).powf(10.0 / 9.0);
            prev = i;
        }
        p
    }
}

/// `P[d][f]` for sites `lo ≤ d ≤ f ≤ hi`: total weight of renewal paths
/// from `d` to `f` inside the block, both endpoints weighted.
fn block_bridges(tables: &RenewalTables, w: &[f64], lo: usize, hi: usize) -> Vec<Vec<f64>> {
    let len = hi - lo + 1;
    let mut p = vec![vec![0.0; len]; len];
    for a in 0..len {
        p[a][a] = w[lo + a];
        for b in a + 1..len {
            let mut acc = 0.0;
            for c in a..b {
                acc += p[a][c] * tables.k[b - c];
            }
            p[a][b] = acc * w[lo + b];
        }
    }
    p
}

/// `Z^I`: the constrained partition function restricted to paths whose
/// visited blocks are exactly `I`. `lw` holds `ln w_n` for `n = 1..=N`.
pub fn coarse_grained_partition(tables: &RenewalTables, lw: &[f64], spec: &CoarseGrainSpec) -> Result<f64> {
    spec.validate()?;
    let n = spec.n();
    if n > tables.n_max() {
        return Err(PinError::Horizon { needed: n, available: tables.n_max() });
    }
    if lw.len() != n + 1 {
        return domain(format!("expected {} log-weights, got {}", n + 1, lw.len()));
    }
    let w: Vec<f64> = lw.iter().map(|v| v.exp()).collect();
    let ell = spec.ell;
    // A(f) over the previous block's last contacts; the origin starts it
    let mut prev_sites = vec![0usize];
    let mut prev_a = vec![1.0];
    for &i in &spec.blocks {
        let lo = ell * (i - 1) + 1;
        let hi = ell * i;
        let p = block_bridges(tables, &w, lo, hi);
        let entry: Vec<f64> = (lo..=hi)
            .map(|d| prev_sites.iter().zip(&prev_a).map(|(&f, &a)| a * tables.k[d - f]).sum())
            .collect();
        let mut a = vec![0.0; ell];
        for (fi, slot) in a.iter_mut().enumerate() {
            *slot = (0..=fi).map(|di| entry[di] * p[di][fi]).sum();
        }
        prev_sites = (lo..=hi).collect();
        prev_a = a;
    }
    Ok(*prev_a.last().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseGrainedMoment {
    /// Monte Carlo `E[(Z^I)^{3/4}]`.
    pub estimate: Estimate,
    /// `Π γ/(i_k − i_{k−1})^{10/9}`; the constant `C_ℓ` is fitted by callers.
    pub rhs_shape: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn coarse_grained_moment(
    tables: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    h: f64,
    spec: &CoarseGrainSpec,
    replicas: usize,
    master: u64,
    threads: usize,
) -> Result<CoarseGrainedMoment> {
    spec.validate()?;
    if spec.n() > COARSE_LIMIT {
        return Err(PinError::TooLarge(format!("ℓ·m = {} above {COARSE_LIMIT}", spec.n())));
    }
    let v = map_indexed(threads, replicas, |r| -> Result<f64> {
        let w = sample_disorder_seeded(law, spec.n(), master, r as u64);
        Ok(coarse_grained_partition(tables, &log_weights(&w, beta, h), spec)?.powf(0.75))
    });
    let v: Vec<f64> = v.into_iter().collect::<Result<_>>()?;
    Ok(CoarseGrainedMoment { estimate: Estimate::from_samples(&v), rhs_shape: spec.rhs_shape() })
}

/// Paired replicas of `g_I(ω)` and `Z^I`, plus every block's `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderSamples {
    pub g: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub blocks: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn holder_samples(
    tables: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    h: f64,
    spec: &CoarseGrainSpec,
    scales: &ChaosScales,
    replicas: usize,
    master: u64,
    threads: usize,
) -> Result<HolderSamples> {
    spec.validate()?;
    if scales.ell != spec.ell {
        return domain(format!("chaos block ℓ = {} differs from the coarse-graining ℓ = {}", scales.ell, spec.ell));
    }
    if spec.n() > COARSE_LIMIT {
        return Err(PinError::TooLarge(format!("ℓ·m = {} above {COARSE_LIMIT}", spec.n())));
    }
    let per = map_indexed(threads, replicas, |r| -> Result<(f64, f64, Vec<f64>)> {
        let w = sample_disorder_seeded(law, spec.n(), master, r as u64);
        let mut g = 1.0;
        let mut xs = Vec::with_capacity(spec.blocks.len());
        for &i in &spec.blocks {
            let x = chaos::chaos_x(&w.omega[spec.ell * (i - 1)..spec.ell * i], tables, scales)?;
            g *= penalty_g(x, scales.m_penalty);
            xs.push(x);
        }
        let z = coarse_grained_partition(tables, &log_weights(&w, beta, h), spec)?;
        Ok((g, z, xs))
    });
    let mut out = HolderSamples { g: Vec::new(), z: Vec::new(), x: Vec::new(), blocks: spec.blocks.len() };
    for p in per {
        let (g, z, xs) = p?;
        out.g.push(g);
        out.z.push(z);
        out.x.extend(xs);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderReport {
    /// `E[(Z^I)^{3/4}]`.
    pub lhs: Estimate,
    /// `E[g⁻³]^{1/4}·E[gZ^I]^{3/4}`.
    pub rhs: f64,
    pub holds: bool,
    pub mean_g_inv3: f64,
    /// `2^{|I|}`.
    pub cost_bound: f64,
    /// Per-block penalty cost from all sampled `X`.
    pub cost: PenaltyCost,
    /// `E[g⁻³] ≤ 2` per block whenever the tail is in regime.
    pub cost_ok: bool,
}

pub fn holder_check(s: &HolderSamples, m_penalty: f64) -> HolderReport {
    let n = s.g.len() as f64;
    let lhs = Estimate::from_samples(&s.z.iter().map(|z| z.powf(0.75)).collect::<Vec<_>>());
    let mean_g_inv3 = s.g.iter().map(|g| g.powi(-3)).sum::<f64>() / n;
    let mean_gz = s.g.iter().zip(&s.z).map(|(g, z)| g * z).sum::<f64>() / n;
    let rhs = mean_g_inv3.powf(0.25) * mean_gz.powf(0.75);
    let cost = penalty_cost(&s.x, m_penalty);
    HolderReport {
        lhs,
        rhs,
        holds: lhs.mean <= rhs + 3.0 * lhs.stderr,
        mean_g_inv3,
        cost_bound: 2f64.powi(s.blocks as i32),
        cost,
        cost_ok: !cost.in_regime || cost.mean_g_inv3 <= 2.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneBlockReport {
    /// `E[g·Z_{d,f}]`.
    pub penalized: Estimate,
    /// `E[Z_{d,f}]` on the same environments.
    pub baseline: Estimate,
    /// Paired `Z − g·Z`.
    pub reduction: Estimate,
    /// `e^h·E[e^{hΣδ} | f − d ∈ τ]`, the exact value of the baseline.
    pub expected_baseline: f64,
    /// 10%, 50%, 90% quantiles over bridges of the exact tilted mean `Ê_τ[X]`.
    pub tilted_mean: [f64; 3],
    /// Bridge average of the empirical tilted variance of `X`.
    pub tilted_variance: f64,
    pub note: &'static str,
}

const ONE_BLOCK_NOTE: &str = "desk-scale block; the theorem-scale ℓ is far beyond reach";
const BRIDGES: usize = 64;
const BRIDGE_DRAWS: usize = 16;

/// Renewal path from 0 conditioned to hit `span`, by rejection.
fn sample_bridge<R: Rng + ?Sized>(gs: &GapSampler, span: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let c = gs.sample(span, rng);
        if *c.last().unwrap() == span {
            return c;
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn one_block_check(
    tables: &RenewalTables,
    law: DisorderLaw,
    beta: f64,
    scales: &ChaosScales,
    d: usize,
    f: usize,
    replicas: usize,
    master: u64,
    threads: usize,
) -> Result<OneBlockReport> {
    if law != DisorderLaw::Gaussian {
        return Err(PinError::Unsupported(format!("one-block check for the {} law", law.name())));
    }
    let ell = scales.ell;
    if !(1 <= d && d <= f && f <= ell) {
        return domain(format!("need 1 ≤ d ≤ f ≤ ℓ, got d={d}, f={f}, ℓ={ell}"));
    }
    if tables.u[f - d] <= 0.0 {
        return Err(PinError::EmptyConfiguration { span: f - d });
    }
    let per = map_indexed(threads, replicas, |r| -> Result<(f64, f64)> {
        let w = sample_disorder_seeded(law, ell, master, r as u64);
        let g = penalty_g(chaos::chaos_x(&w.omega, tables, scales)?, scales.m_penalty);
        let z = quenched::partition(tables, &w, beta, scales.h, Boundary::PinnedPair { d, f })?.value();
        Ok((g * z, z))
    });
    let per: Vec<(f64, f64)> = per.into_iter().collect::<Result<_>>()?;
    let penalized = Estimate::from_samples(&per.iter().map(|p| p.0).collect::<Vec<_>>());
    let baseline = Estimate::from_samples(&per.iter().map(|p| p.1).collect::<Vec<_>>());
    let reduction = Estimate::from_samples(&per.iter().map(|p| p.1 - p.0).collect::<Vec<_>>());
    let expected_baseline = if f == d {
        scales.h.exp()
    } else {
        scales.h.exp() * conditioned_contact_mgf(tables, scales.h, f - d)?
    };

    let gs = GapSampler::new(&tables.k);
    let norm = x_norm(tables, ell, scales.t, scales.order);
    let m_beta = law.lambda_prime(beta);
    let bridge_master = derive(master, "bridge");
    let diag = map_indexed(threads, BRIDGES, |b| -> Result<(f64, f64)> {
        let mut rng = stream(bridge_master, b as u64);
        let contacts: Vec<usize> = sample_bridge(&gs, f - d, &mut rng).iter().map(|c| c + d).collect();
        let mean = norm * m_beta.powi(scales.order as i32 + 1) * contact_chaos_sum(&contacts, &tables.u, ell, scales.t, scales.order);
        let xs: Vec<f64> = (0..BRIDGE_DRAWS)
            .map(|_| {
                let w = sample_disorder(law, ell, &mut rng);
                let tilted = chaos::tilted_block(&w, &contacts, beta, &mut rng)?;
                chaos::chaos_x(&tilted.omega, tables, scales)
            })
            .collect::<Result<_>>()?;
        let e = Estimate::from_samples(&xs);
        Ok((mean, e.stderr * e.stderr * xs.len() as f64))
    });
    let diag: Vec<(f64, f64)> = diag.into_iter().collect::<Result<_>>()?;
    let mut means: Vec<f64> = diag.iter().map(|p| p.0).collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| means[((means.len() - 1) as f64 * p).round() as usize];
    Ok(OneBlockReport {
        penalized,
        baseline,
        reduction,
        expected_baseline,
        tilted_mean: [q(0.1), q(0.5), q(0.9)],
        tilted_variance: diag.iter().map(|p| p.1).sum::<f64>() / diag.len() as f64,
        note: ONE_BLOCK_NOTE,
    })
}

/// Chains `i_0 = j < i_1 < … < i_q` with increments in `1..=t`, with `U(i)`.
fn chains(u: &[f64], j: usize, t: usize, q: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut cur = vec![j];
    fn rec(u: &[f64], t: usize, q: usize, w: f64, cur: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
        if cur.len() == q + 1 {
            out.push((cur.clone(), w));
            return;
        }
        let last = *cur.last().unwrap();
        for g in 1..=t {
            cur.push(last + g);
            rec(u, t, q, w * u[g], cur, out);
            cur.pop();
        }
    }
    rec(u, t, q, 1.0, &mut cur, &mut out);
    out
}

/// `Π u(s_k − s_{k−1})` along the sorted union of `points` and the origin.
fn renewal_moment(u: &[f64], points: &mut Vec<usize>) -> f64 {
    points.sort_unstable();
    points.dedup();
    let mut prev = 0;
    let mut p = 1.0;
    for &x in points.iter() {
        p *= u[x - prev];
        prev = x;
    }
    p
}

/// `Σ_{i ∈ chains(j1, q1)} Σ_{k ∈ chains(j2, q2)} U(i)U(k)E[δ_{i ∪ k}]`.
fn pair_sum(u: &[f64], t: usize, j1: usize, q1: usize, j2: usize, q2: usize) -> f64 {
    let a = chains(u, j1, t, q1);
    let b = chains(u, j2, t, q2);
    let mut total = 0.0;
    let mut buf = Vec::new();
    for (ia, wa) in &a {
        let mut s = 0.0;
        for (ib, wb) in &b {
            buf.clear();
            buf.extend_from_slice(ia);
            buf.extend_from_slice(ib);
            s += wb * renewal_moment(u, &mut buf);
        }
        total += wa * s;
    }
    total
}

/// Chain count above which [`lemma_y_check`] refuses.
pub const CHAIN_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEntry {
    pub j1: usize,
    pub j2: usize,
    /// `E[Y_{j1}Y_{j2}]`.
    pub covariance: f64,
    /// Sum of the absolute values of the four expanded terms.
    pub magnitude: f64,
    /// `E[Y_{j1}Y_{j2}] / (u(j1)u(j2 − j1))`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaYReport {
    pub range: usize,
    pub entries: Vec<CovarianceEntry>,
    /// Every pair farther apart than `tq` has `|cov| ≤ 10⁻¹²·magnitude`.
    pub zero_beyond_range: bool,
    pub max_ratio: f64,
    /// `(j, E[Y_j])` for every `j` appearing in a pair.
    pub means: Vec<(usize, f64)>,
}

/// Exact `E[Y_{j1}Y_{j2}]` for the renewal started at 0, where
/// `Y_j = δ_j − D(t)^{−q} Σ_{J'(j)} U(i)δ_i`.
pub fn y_covariance(tables: &RenewalTables, t: usize, order: usize, j1: usize, j2: usize) -> (f64, f64) {
    let (j1, j2) = if j1 <= j2 { (j1, j2) } else { (j2, j1) };
    let u = &tables.u;
    let dq = tables.d[t].powi(order as i32);
    let terms = [
        pair_sum(u, t, j1, 0, j2, 0),
        -pair_sum(u, t, j1, order, j2, 0) / dq,
        -pair_sum(u, t, j1, 0, j2, order) / dq,
        pair_sum(u, t, j1, order, j2, order) / (dq * dq),
    ];
    (terms.iter().sum(), terms.iter().map(|x| x.abs()).sum())
}

/// Exact `E[Y_j]`.
pub fn y_mean(tables: &RenewalTables, t: usize, order: usize, j: usize) -> f64 {
    let u = &tables.u;
    pair_sum(u, t, j, 0, j, 0) - pair_sum(u, t, j, order, j, 0) / tables.d[t].powi(order as i32)
}

pub fn lemma_y_check(tables: &RenewalTables, n: usize, t: usize, order: usize, pairs: &[(usize, usize)]) -> Result<LemmaYReport> {
    if t == 0 || order == 0 {
        return domain("need t ≥ 1 and order ≥ 1");
    }
    let count = (t as f64).powi(order as i32);
    if count > CHAIN_LIMIT as f64 {
        return Err(PinError::TooLarge(format!("t^q = {count:e} chains")));
    }
    let needed = n + t * order;
    if needed > tables.n_max() {
        return Err(PinError::Horizon { needed, available: tables.n_max() });
    }
    let range = t * order;
    let mut entries = Vec::new();
    let mut zero = true;
    let mut max_ratio = 0.0f64;
    let mut js = Vec::new();
    for &(a, b) in pairs {
        if a > n || b > n {
            return domain(format!("pair ({a}, {b}) outside 0..={n}"));
        }
        let (j1, j2) = (a.min(b), a.max(b));
        let (cov, magnitude) = y_covariance(tables, t, order, j1, j2);
        let ratio = cov / (tables.u[j1] * tables.u[j2 - j1]);
        if j2 - j1 > range {
            zero &= cov.abs() <= 1e-12 * magnitude;
        } else if ratio.is_finite() {
            max_ratio = max_ratio.max(ratio.abs());
        }
        entries.push(CovarianceEntry { j1, j2, covariance: cov, magnitude, ratio });
        js.extend([j1, j2]);
    }
    js.sort_unstable();
    js.dedup();
    let means = js.into_iter().map(|j| (j, y_mean(tables, t, order, j))).collect();
    Ok(LemmaYReport { range, entries, zero_beyond_range: zero, max_ratio, means })
}

/// Joint-element cap for [`ontrime_bruteforce`].
pub const ONTRIME_LIMIT: usize = 10_000_000;

/// `c₅ = max_{1≤n≤m≤2t} u(m)/u(n)` and
/// `c₈ = max_{1≤k≤2t} (Σ_{i≤k} u(i))·φ(k)/√k` with `φ(k) = 2πK(k)k^{3/2}`.
pub fn ontrime_constants(tables: &RenewalTables, t: usize) -> (f64, f64) {
    let top = (2 * t).min(tables.n_max());
    let mut c5 = 1.0f64;
    let mut min_u = f64::INFINITY;
    for m in 1..=top {
        min_u = min_u.min(tables.u[m]);
        if min_u > 0.0 {
            c5 = c5.max(tables.u[m] / min_u);
        }
    }
    let mut c8 = 0.0f64;
    let mut acc = 1.0;
    for k in 1..=top {
        acc += tables.u[k];
        c8 = c8.max(acc * effective_phi(tables, k) / (k as f64).sqrt());
    }
    (c5, c8)
}

fn effective_phi(tables: &RenewalTables, k: usize) -> f64 {
    2.0 * std::f64::consts::PI * tables.k[k] * (k as f64).powf(1.5)
}

/// All `j` (size `r`, disjoint from `i`, integer sites) with `i ∪ j`
/// `t`-spaced, with `U(i ∪ j)`.
fn fillings(u: &[f64], i: &[i64], r: usize, t: i64) -> Vec<(Vec<i64>, f64)> {
    let mut out = Vec::new();
    let lo = i[0] - r as i64 * t;
    let mut cur = Vec::new();
    // first union point: a j site in [lo, i_0) or i_0 itself
    for first in lo..=i[0] {
        if first < i[0] {
            if r == 0 {
                continue;
            }
            cur.push(first);
            walk(u, i, r, t, first, 0, 1.0, &mut cur, &mut out);
            cur.pop();
        } else {
            walk(u, i, r, t, first, 1, 1.0, &mut cur, &mut out);
        }
    }
    out
}

/// DFS over the union from `last`; `next_i` indexes the next `i` point.
#[allow(clippy::too_many_arguments)]
fn walk(u: &[f64], i: &[i64], r: usize, t: i64, last: i64, next_i: usize, w: f64, cur: &mut Vec<i64>, out: &mut Vec<(Vec<i64>, f64)>) {
    let left = r - cur.len();
    if next_i == i.len() && left == 0 {
        out.push((cur.clone(), w));
        return;
    }
    let bound = match i.get(next_i) {
        Some(&x) => (last + t).min(x),
        None => last + t,
    };
    for y in last + 1..=bound {
        let g = u[(y - last) as usize];
        if next_i < i.len() && y == i[next_i] {
            walk(u, i, r, t, y, next_i + 1, w * g, cur, out);
        } else if left > 0 {
            cur.push(y);
            walk(u, i, r, t, y, next_i, w * g, cur, out);
            cur.pop();
        }
    }
}

fn chain_weight(u: &[f64], a: &[i64], b: &[i64]) -> f64 {
    let mut m: Vec<i64> = a.iter().chain(b).copied().collect();
    m.sort_unstable();
    m.dedup();
    m.windows(2).map(|w| u[(w[1] - w[0]) as usize]).product()
}

/// `Σ(s, r₁, r₂)` by enumeration, with the number of joint elements.
pub fn ontrime_sigma(tables: &RenewalTables, s: usize, r1: usize, r2: usize, t: usize) -> Result<(f64, usize)> {
    if t == 0 {
        return domain("need t ≥ 1");
    }
    let gap = (r1.min(r2) + 1) * t;
    let reach = s * gap + 2 * r1.max(r2) * t;
    if reach > tables.n_max() {
        return Err(PinError::Horizon { needed: reach, available: tables.n_max() });
    }
    let mut acc = SigmaAcc { u: &tables.u, t: t as i64, r1, r2, total: 0.0, elements: 0 };
    let mut i = vec![0i64];
    acc.extend(&mut i, s, gap as i64)?;
    Ok((acc.total, acc.elements))
}

struct SigmaAcc<'a> {
    u: &'a [f64],
    t: i64,
    r1: usize,
    r2: usize,
    total: f64,
    elements: usize,
}

impl SigmaAcc<'_> {
    /// Enumerates `i_1 < … < i_s` with gaps in `1..=gap` after `i`.
    fn extend(&mut self, i: &mut Vec<i64>, s: usize, gap: i64) -> Result<()> {
        if i.len() == s + 1 {
            return self.visit(i);
        }
        let last = *i.last().unwrap();
        for g in 1..=gap {
            i.push(last + g);
            self.extend(i, s, gap)?;
            i.pop();
        }
        Ok(())
    }

    fn visit(&mut self, i: &[i64]) -> Result<()> {
        let a = fillings(self.u, i, self.r1, self.t);
        let b = if self.r2 == self.r1 { a.clone() } else { fillings(self.u, i, self.r2, self.t) };
        self.elements += a.len() * b.len();
        if self.elements > ONTRIME_LIMIT {
            return Err(PinError::TooLarge(format!("more than {ONTRIME_LIMIT} joint elements")));
        }
        for (j, wj) in &a {
            for (k, wk) in &b {
                self.total += wj * wk * chain_weight(self.u, j, k);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OntrimeResult {
    pub sigma: f64,
    /// `(1+s)(3c₅D(t))^{s+r₁+r₂−1}·2c₈√t/φ(t)`.
    pub bound: f64,
    pub pass: bool,
    pub c5: f64,
    pub c8: f64,
    pub elements: usize,
}

pub fn ontrime_bruteforce(tables: &RenewalTables, s: usize, r1: usize, r2: usize, t: usize) -> Result<OntrimeResult> {
    let (sigma, elements) = ontrime_sigma(tables, s, r1, r2, t)?;
    let (c5, c8) = ontrime_constants(tables, t);
    let exponent = (s + r1 + r2) as i32 - 1;
    let bound = (1 + s) as f64 * (3.0 * c5 * tables.d[t]).powi(exponent) * 2.0 * c8 * (t as f64).sqrt() / effective_phi(tables, t);
    Ok(OntrimeResult { sigma, bound, pass: sigma <= bound, c5, c8, elements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::ChaosScales;
    use crate::renewal::{build_kernel_srw, intersection_tables, renewal_mass, WalkFlavor};

    fn srw(n_max: usize) -> (RenewalTables, RenewalTables) {
        let t = renewal_mass(&build_kernel_srw(0.5, n_max, WalkFlavor::Pinning).unwrap());
        let i = intersection_tables(&t).unwrap();
        (t, i)
    }

    #[test]
    fn second_moment_basics() {
        let (_, inter) = srw(1024);
        assert!((second_moment_exact(&inter, DisorderLaw::Gaussian, 0.0, 512).unwrap() - 1.0).abs() < 1e-12);
        let mut prev = 1.0;
        for n in [16, 64, 256, 1024] {
            let v = second_moment_exact(&inter, DisorderLaw::Gaussian, 0.5, n).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 1.0;
        for beta in [0.1, 0.3, 0.5, 0.8] {
            let v = second_moment_exact(&inter, DisorderLaw::Rademacher, beta, 256).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn second_moment_matches_monte_carlo() {
        let (t, inter) = srw(256);
        let exact = second_moment_exact(&inter, DisorderLaw::Gaussian, 0.3, 128).unwrap();
        let logs = quenched::mc_log_partitions(&t, DisorderLaw::Gaussian, 0.3, 0.0, 128, Boundary::Free, 20_000, 31, 4).unwrap();
        let sq: Vec<f64> = logs.iter().map(|l| (2.0 * l).exp()).collect();
        let e = Estimate::from_samples(&sq);
        assert!(e.within(exact, 3.0), "{e:?} vs {exact}");
    }

    #[test]
    fn correlation_length_definition() {
        let (t, inter) = srw(1 << 12);
        let mut prev = usize::MAX;
        for beta in [0.6, 0.7, 0.8, 0.9, 1.0, 2.0] {
            let c = correlation_length(&inter, DisorderLaw::Gaussian, beta, 0.5).unwrap();
            assert!(c.n <= prev, "β={beta}");
            prev = c.n;
            if !c.saturated {
                assert!(second_moment_exact(&inter, DisorderLaw::Gaussian, beta, c.n).unwrap() <= 20.0);
                assert!(second_moment_exact(&inter, DisorderLaw::Gaussian, beta, c.n + 1).unwrap() > 20.0);
                let inv = d_inverse(&t, 0.5 / (beta * beta));
                if !inv.saturated {
                    assert!(c.n >= inv.n, "β={beta}: {} < {}", c.n, inv.n);
                }
            }
        }
        let small = correlation_length(&inter, DisorderLaw::Gaussian, 0.1, 0.5).unwrap();
        assert!(small.saturated && small.n == 1 << 12);
        assert!(correlation_length(&inter, DisorderLaw::Gaussian, 1.0, 1.5).is_err());
    }

    #[test]
    fn bracket_on_a_logarithmic_toy_table() {
        // D(N) = ln N exactly, so D⁻¹(x) = ⌊e^x⌋
        let n_max = 200_000;
        let d: Vec<f64> = (0..=n_max).map(|n| if n == 0 { 0.0 } else { (n as f64).ln() }).collect();
        let u: Vec<f64> = (0..=n_max).map(|n| if n == 0 { 1.0 } else { (d[n] - d[n - 1]).sqrt() }).collect();
        let toy = RenewalTables { k: vec![0.0; n_max + 1], u, d, tail: vec![1.0; n_max + 1] };
        for (beta, eps) in [(1.0, 0.25), (0.8, 0.5), (1.5, 0.1)] {
            let b = hc_bracket(&toy, beta, eps, -1.0, None).unwrap();
            let lower = ((1.0 + eps) / (beta * beta)).exp().floor().powf(-0.5 * (1.0 + eps));
            let upper = ((1.0 - eps) / (beta * beta)).exp().floor().powf(-0.5 * (1.0 - eps));
            assert!((b.lower_formula / lower - 1.0).abs() < 1e-12);
            assert!((b.upper_formula / upper - 1.0).abs() < 1e-12);
            assert!(b.lower_formula <= b.upper_formula);
            assert!(!b.any_saturated());
        }
        let sat = hc_bracket(&toy, 0.2, 0.25, -1.0, None).unwrap();
        assert!(sat.lower_saturated);
    }

    #[test]
    fn bracket_order_and_csv() {
        let (t, _) = srw(1 << 14);
        let mut rows = Vec::new();
        for beta in [0.8, 1.0, 1.5, 2.0] {
            let b = hc_bracket(&t, beta, 0.25, -std::f64::consts::FRAC_PI_2, None).unwrap();
            if !b.any_saturated() {
                assert!(b.lower_formula <= b.upper_formula);
            }
            rows.push(b);
        }
        let csv = bracket_csv(&rows);
        assert!(csv.starts_with(
            "beta,eps,lower_formula,upper_formula,finite_size_upper,beta2_log_lower,beta2_log_upper,predicted_constant,saturated\n"
        ));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn finite_size_pipeline() {
        let (t, inter) = srw(1 << 12);
        let f = hc_upper_finite_size(&t, &inter, DisorderLaw::Gaussian, 1.0, 0.5, 16, 8, 32, 4).unwrap();
        assert!(!f.saturated);
        assert!(f.event_ok && f.event_probability.mean >= f.event_bound);
        assert!(f.value > 0.0 && f.value.is_finite());
        let b = hc_bracket(&t, 1.0, 0.5, -std::f64::consts::FRAC_PI_2, Some(&f)).unwrap();
        assert_eq!(b.finite_size_upper, Some(f.value));
        assert!(f.value >= b.lower_formula);
    }

    #[test]
    fn pure_criterion_shrinks_with_n() {
        let t = renewal_mass(&build_kernel_srw(0.5, 1 << 14, WalkFlavor::Pinning).unwrap());
        let mut prev = f64::INFINITY;
        for n in [256usize, 1024, 4096, 16384] {
            let e: f64 = (1..=n).map(|k| t.u[k]).sum();
            let v = 2.0 * (n as f64).ln() / e;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn gamma_normalizes_the_comparison_kernel() {
        let g = default_gamma();
        // ζ(10/9) ≈ 9.5813
        assert!((1.0 / g - 9.58).abs() < 0.01, "{}", 1.0 / g);
        let s = CoarseGrainSpec::new(4, 5, vec![2, 5]).unwrap();
        assert!((s.rhs_shape() - g * g / (2f64.powf(10.0 / 9.0) * 3f64.powf(10.0 / 9.0))).abs() < 1e-15);
        assert!(CoarseGrainSpec::new(4, 5, vec![2, 4]).is_err());
        assert!(CoarseGrainSpec::new(4, 5, vec![3, 2, 5]).is_err());
        assert!(CoarseGrainSpec::new(4, 5, vec![]).is_err());
    }

    /// Direct sum over every constrained contact set, filed by visited blocks.
    fn blocks_by_enumeration(t: &RenewalTables, lw: &[f64], ell: usize, m: usize) -> std::collections::HashMap<Vec<usize>, f64> {
        let n = ell * m;
        let mut out = std::collections::HashMap::new();
        for mask in 0u64..1 << (n - 1) {
            let mut sites: Vec<usize> = (1..n).filter(|s| mask >> (s - 1) & 1 == 1).collect();
            sites.push(n);
            let mut prev = 0;
            let mut w = 1.0;
            for &s in &sites {
                w *= t.k[s - prev] * lw[s].exp();
                prev = s;
            }
            let mut visited: Vec<usize> = sites.iter().map(|s| (s - 1) / ell + 1).collect();
            visited.dedup();
            *out.entry(visited).or_insert(0.0) += w;
        }
        out
    }

    #[test]
    fn coarse_grained_matches_enumeration() {
        let (t, _) = srw(64);
        for (beta, h, seed) in [(0.0, 0.0, 0u64), (0.7, 0.1, 1), (1.2, -0.2, 2)] {
            let w = sample_disorder_seeded(DisorderLaw::Gaussian, 16, 40, seed);
            let lw = log_weights(&w, beta, h);
            let direct = blocks_by_enumeration(&t, &lw, 8, 2);
            for blocks in [vec![2], vec![1, 2]] {
                let spec = CoarseGrainSpec::new(8, 2, blocks.clone()).unwrap();
                let z = coarse_grained_partition(&t, &lw, &spec).unwrap();
                let want = direct[&blocks];
                assert!((z - want).abs() < 1e-12 * want, "{blocks:?}: {z} vs {want}");
            }
        }
    }

    #[test]
    fn coarse_grained_partition_of_unity() {
        let (t, _) = srw(64);
        for r in 0..20u64 {
            let w = sample_disorder_seeded(DisorderLaw::Gaussian, 24, 41, r);
            let lw = log_weights(&w, 0.8, 0.05);
            let total: f64 = [vec![3], vec![1, 3], vec![2, 3], vec![1, 2, 3]]
                .into_iter()
                .map(|b| coarse_grained_partition(&t, &lw, &CoarseGrainSpec::new(8, 3, b).unwrap()).unwrap())
                .sum();
            let z = quenched::partition(&t, &w, 0.8, 0.05, Boundary::Constrained).unwrap().value();
            assert!((total / z - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn coarse_grained_moment_decays_in_the_gap() {
        let (t, _) = srw(1024);
        let ms = [4usize, 8, 16, 32];
        let est: Vec<f64> = ms
            .iter()
            .map(|&m| {
                let spec = CoarseGrainSpec::new(16, m, vec![1, m]).unwrap();
                coarse_grained_moment(&t, DisorderLaw::Gaussian, 0.4, 0.0, &spec, 200, 42, 4).unwrap().estimate.mean
            })
            .collect();
        assert!(est.windows(2).all(|w| w[1] < w[0]), "{est:?}");
        let xs: Vec<f64> = ms.iter().map(|&m| ((m - 1) as f64).ln()).collect();
        let ys: Vec<f64> = est.iter().map(|e| e.ln()).collect();
        let slope = -fit_slope(&xs, &ys);
        assert!(slope >= 10.0 / 9.0 - 0.3, "{slope}");
    }

    fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxy / sxx
    }

    #[test]
    fn holder_degenerate_and_sampled() {
        let (t, _) = srw(256);
        let spec = CoarseGrainSpec::new(16, 2, vec![2]).unwrap();
        let inf = ChaosScales::manual(16, 4, 2, 0.0, f64::INFINITY, 0.5).unwrap();
        let s = holder_samples(&t, DisorderLaw::Gaussian, 0.8, 0.0, &spec, &inf, 200, 43, 4).unwrap();
        let r = holder_check(&s, f64::INFINITY);
        let mean_z = s.z.iter().sum::<f64>() / s.z.len() as f64;
        assert_eq!(r.mean_g_inv3, 1.0);
        assert!((r.rhs - mean_z.powf(0.75)).abs() < 1e-12 * r.rhs);
        assert!(r.holds);
        let one = ChaosScales::manual(16, 4, 2, 0.0, 1.0, 0.5).unwrap();
        let mut held = 0;
        for seed in 0..50 {
            let s = holder_samples(&t, DisorderLaw::Gaussian, 0.8, 0.0, &spec, &one, 100, 1000 + seed, 4).unwrap();
            let r = holder_check(&s, 1.0);
            held += r.holds as usize;
            assert!(r.cost_ok);
            assert!((r.cost.mean_g_inv3 - r.cost.identity).abs() < 1e-9 * r.cost.identity);
        }
        assert_eq!(held, 50);
    }

    #[test]
    fn one_block_without_penalty() {
        let (t, _) = srw(512);
        let s = ChaosScales::manual(128, 4, 2, 0.0, 0.0, 0.5).unwrap();
        let r = one_block_check(&t, DisorderLaw::Gaussian, 0.5, &s, 10, 110, 4000, 44, 4).unwrap();
        assert_eq!(r.penalized, r.baseline);
        assert!((r.expected_baseline - 1.0).abs() < 1e-12);
        assert!(r.baseline.within(1.0, 3.0), "{:?}", r.baseline);
        let h = ChaosScales { h: 0.01, ..s };
        let rh = one_block_check(&t, DisorderLaw::Gaussian, 0.5, &h, 10, 110, 4000, 44, 4).unwrap();
        assert!(rh.baseline.within(rh.expected_baseline, 3.0));
        assert!(one_block_check(&t, DisorderLaw::Rademacher, 0.5, &s, 10, 110, 10, 44, 1).is_err());
    }

    #[test]
    fn one_block_penalty_bites() {
        let (t, _) = srw(512);
        let s = ChaosScales::manual(128, 4, 1, 0.0, 0.6, 0.5).unwrap();
        let r = one_block_check(&t, DisorderLaw::Gaussian, 0.4, &s, 6, 121, 4000, 45, 4).unwrap();
        assert!(r.penalized.mean <= 1.0 + 3.0 * r.penalized.stderr);
        assert!(r.reduction.mean > 3.0 * r.reduction.stderr, "{:?}", r.reduction);
        assert!(r.tilted_mean[0] <= r.tilted_mean[1] && r.tilted_mean[1] <= r.tilted_mean[2]);
    }

    /// `E[Y_a Y_b]` by summing over every contact set in `[1, horizon]`.
    fn y_by_enumeration(t: &RenewalTables, tt: usize, q: usize, a: usize, b: usize, horizon: usize) -> (f64, f64) {
        let dq = t.d[tt].powi(q as i32);
        let mut cov = 0.0;
        let mut mean = 0.0;
        for mask in 0u64..1 << horizon {
            let delta = |j: usize| j == 0 || mask >> (j - 1) & 1 == 1;
            let mut prev = 0;
            let mut p = 1.0;
            for s in 1..=horizon {
                if delta(s) {
                    p *= t.k[s - prev];
                    prev = s;
                }
            }
            p *= t.tail[horizon - prev];
            let y = |j: usize| {
                let comp: f64 = chains(&t.u, j, tt, q)
                    .iter()
                    .filter(|(c, _)| c.iter().all(|&s| delta(s)))
                    .map(|(_, w)| w)
                    .sum();
                if delta(j) { 1.0 - comp / dq } else { 0.0 }
            };
            let (ya, yb) = (y(a), y(b));
            cov += p * ya * yb;
            mean += p * ya;
        }
        (cov, mean)
    }

    #[test]
    fn y_covariance_matches_path_enumeration() {
        let (t, _) = srw(64);
        for (tt, q) in [(1, 1), (2, 2), (3, 1)] {
            for (a, b) in [(0, 0), (1, 3), (2, 2), (0, 5), (3, 4), (1, 8)] {
                let horizon = 14;
                if b + tt * q > horizon {
                    continue;
                }
                let (cov, _) = y_covariance(&t, tt, q, a, b);
                let (want, mean) = y_by_enumeration(&t, tt, q, a, b, horizon);
                assert!((cov - want).abs() < 1e-12, "t={tt} q={q} ({a},{b}): {cov} vs {want}");
                assert!((y_mean(&t, tt, q, a) - mean).abs() < 1e-12);
                assert!(mean.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn y_uncorrelated_beyond_range() {
        let (t, _) = srw(512);
        let pairs: Vec<(usize, usize)> = [(0, 17), (5, 30), (100, 117), (183, 200), (10, 12), (50, 60), (7, 7)].to_vec();
        let r = lemma_y_check(&t, 200, 8, 2, &pairs).unwrap();
        assert_eq!(r.range, 16);
        assert!(r.zero_beyond_range);
        assert!(r.entries.iter().filter(|e| e.j2 - e.j1 > 16).all(|e| e.covariance.abs() < 1e-12 * e.magnitude));
        assert!(r.means.iter().all(|(_, m)| m.abs() < 1e-12));
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
        assert!(matches!(lemma_y_check(&t, 200, 1000, 3, &pairs), Err(PinError::TooLarge(_))));
    }

    /// `Σ(s, r₁, r₂)` straight from the set definitions on a bounded window.
    fn sigma_by_subsets(t: &RenewalTables, s: usize, r1: usize, r2: usize, tt: usize) -> f64 {
        let u = &t.u;
        let lo = -(((r1.max(r2)) * tt) as i64);
        let hi = ((s + r1.max(r2)) * (r1.min(r2) + 1) * tt) as i64;
        let sites: Vec<i64> = (lo..=hi).collect();
        let spaced = |v: &[i64]| v.windows(2).all(|w| w[1] - w[0] >= 1 && w[1] - w[0] <= tt as i64);
        let weight = |v: &[i64]| v.windows(2).map(|w| u[(w[1] - w[0]) as usize]).product::<f64>();
        let merge = |a: &[i64], b: &[i64]| {
            let mut m: Vec<i64> = a.iter().chain(b).copied().collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        fn subsets(pool: &[i64], r: usize) -> Vec<Vec<i64>> {
            if r == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for (idx, &x) in pool.iter().enumerate() {
                for mut rest in subsets(&pool[idx + 1..], r - 1) {
                    rest.insert(0, x);
                    out.push(rest);
                }
            }
            out
        }
        let positive: Vec<i64> = sites.iter().copied().filter(|&x| x > 0).collect();
        let mut total = 0.0;
        for tail in subsets(&positive, s) {
            let mut i = vec![0];
            i.extend(tail);
            let pool: Vec<i64> = sites.iter().copied().filter(|x| !i.contains(x)).collect();
            let fill = |r: usize| -> Vec<(Vec<i64>, f64)> {
                subsets(&pool, r)
                    .into_iter()
                    .filter_map(|j| {
                        let m = merge(&i, &j);
                        spaced(&m).then(|| (j, weight(&m)))
                    })
                    .collect()
            };
            let (a, b) = (fill(r1), fill(r2));
            for (j, wj) in &a {
                for (k, wk) in &b {
                    total += wj * wk * weight(&merge(j, k));
                }
            }
        }
        total
    }

    #[test]
    fn ontrime_matches_set_definition() {
        let (t, _) = srw(256);
        for (s, r1, r2, tt) in [(0, 0, 0, 2), (1, 1, 0, 2), (1, 1, 1, 2), (2, 1, 1, 2), (1, 2, 1, 2), (0, 2, 2, 3), (2, 0, 1, 3)] {
            let (fast, _) = ontrime_sigma(&t, s, r1, r2, tt).unwrap();
            let slow = sigma_by_subsets(&t, s, r1, r2, tt);
            assert!((fast - slow).abs() < 1e-12 * slow.max(1.0), "({s},{r1},{r2}) t={tt}: {fast} vs {slow}");
        }
    }

    #[test]
    fn ontrime_closed_forms_and_bound() {
        let (t, _) = srw(1024);
        let r = ontrime_bruteforce(&t, 0, 0, 0, 8).unwrap();
        assert_eq!(r.sigma, 1.0);
        assert!(r.bound >= 1.0 && r.pass);
        for tt in [1usize, 2, 4, 8, 16] {
            for s in 0..=3 {
                let r = ontrime_bruteforce(&t, s, 0, 0, tt).unwrap();
                let want = t.d[tt].powi(s as i32);
                assert!((r.sigma / want - 1.0).abs() < 1e-12, "s={s} t={tt}");
                assert!(r.pass);
            }
            let r = ontrime_bruteforce(&t, 0, 1, 0, tt).unwrap();
            let two_sum: f64 = 2.0 * (1..=tt).map(|j| t.u[j]).sum::<f64>();
            assert!((r.sigma - two_sum).abs() < 1e-12 * two_sum);
        }
    }

    #[test]
    fn ontrime_recursion_and_bound_on_grid() {
        let (t, _) = srw(1024);
        for tt in [2usize, 4, 8] {
            let (c5, _) = ontrime_constants(&t, tt);
            let sig = |s, a, b| ontrime_sigma(&t, s, a, b, tt).unwrap().0;
            for s in 1..=2 {
                for r1 in 1..=2 {
                    for r2 in 1..=2 {
                        let lhs = sig(s, r1, r2);
                        let rhs = c5 * t.d[tt] * (sig(s, r1, r2 - 1) + sig(s, r1 - 1, r2) + sig(s - 1, r1, r2));
                        assert!(lhs <= rhs * (1.0 + 1e-12), "t={tt} ({s},{r1},{r2})");
                        assert!(ontrime_bruteforce(&t, s, r1, r2, tt).unwrap().pass);
                    }
                }
            }
        }
    }
}
