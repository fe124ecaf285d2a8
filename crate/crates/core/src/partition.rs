//! Log-domain partition values and the weighted renewal DP behind them.
//!
//! All partition functions here solve
//! `X(n) = w_n·g(Σ_{m<n} X(m)·K(n−m))` with `g` linear and nonnegative.
//! The fast path runs in linear arithmetic on the kernel tilted by `e^{−θk}`
//! (θ from the mean log-weight) with occasional global rescaling. When a row
//! under- or overflows it switches to a per-row exponent representation,
//! which is exact in shape and only costs one `exp` per term.

use crate::conv::{self, dot_rev};
use crate::renewal::DIRECT_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Constrained,
    Free,
    /// First contact `d`, last contact `f`, conditioned on `d, f ∈ τ`.
    PinnedPair { d: usize, f: usize },
}

impl Boundary {
    pub fn tag(&self) -> String {
        match *self {
            Boundary::Constrained => "constrained".into(),
            Boundary::Free => "free".into(),
            Boundary::PinnedPair { d, f } => format!("pinned_pair({d};{f})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPartition {
    pub log_value: f64,
    pub boundary: Boundary,
    pub beta: f64,
    pub h: f64,
    pub n: usize,
}

impl LogPartition {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// DP output: `X_c(n) = x[c][n]·e^{s[n]}`.
#[derive(Debug, Clone)]
pub struct Rows<const C: usize> {
    pub x: [Vec<f64>; C],
    pub s: Vec<f64>,
}

impl<const C: usize> Rows<C> {
    pub fn len(&self) -> usize {
        self.s.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.s.len() <= 1
    }

    pub fn ln(&self, c: usize, n: usize) -> f64 {
        self.x[c][n].ln() + self.s[n]
    }

    /// `ln Σ_m X_c(m)·v(m)` over `m ∈ range`, for nonnegative `v`.
    pub fn ln_weighted_sum(&self, c: usize, range: std::ops::RangeInclusive<usize>, v: impl Fn(usize) -> f64) -> f64 {
        let mut top = f64::NEG_INFINITY;
        for m in range.clone() {
            if self.x[c][m] > 0.0 && v(m) > 0.0 {
                top = top.max(self.s[m]);
            }
        }
        if top == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut acc = 0.0;
        for m in range {
            let vm = v(m);
            if self.x[c][m] > 0.0 && vm > 0.0 {
                acc += self.x[c][m] * vm * (self.s[m] - top).exp();
            }
        }
        acc.ln() + top
    }
}

const BIG: f64 = 1e200;
const HUGE: f64 = 1e280;
const TINY: f64 = 1e-280;
const LOGW_SAFE: f64 = 600.0;

/// Solves the recursion for `n = 1..=len`. `k` needs `len + 1` entries,
/// `logw[n]` is `ln w_n` (index 0 unused).
pub fn solve<const C: usize, G>(k: &[f64], logw: &[f64], x0: [f64; C], len: usize, g: G) -> Rows<C>
where
    G: Fn([f64; C]) -> [f64; C],
{
    assert!(k.len() > len && logw.len() > len);
    let theta = tilt(k, logw, len);
    if len > DIRECT_LIMIT {
        if let Some(r) = fast_relaxed(k, logw, x0, len, theta, &g) {
            return r;
        }
    }
    if let Some(r) = fast_direct(k, logw, x0, len, theta, &g) {
        return r;
    }
    robust(k, logw, x0, len, &g)
}

/// Growth rate of the homogeneous model with the mean log-weight, so the
/// tilted recursion stays near unit scale.
fn tilt(k: &[f64], logw: &[f64], len: usize) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let a = logw[1..=len].iter().sum::<f64>() / len as f64;
    if !a.is_finite() || a <= 0.0 {
        return 0.0;
    }
    let ln_mass = |th: f64| {
        let s: f64 = (1..=len).map(|j| k[j] * (-th * j as f64).exp()).sum();
        s.ln() + a
    };
    if ln_mass(0.0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, a);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ln_mass(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn tilted(k: &[f64], len: usize, theta: f64) -> Vec<f64> {
    (0..=len).map(|j| k[j] * (-theta * j as f64).exp()).collect()
}

fn weights(logw: &[f64], len: usize) -> Option<Vec<f64>> {
    let mut w = vec![1.0; len + 1];
    for n in 1..=len {
        if logw[n].abs() > LOGW_SAFE {
            return None;
        }
        w[n] = logw[n].exp();
    }
    Some(w)
}

fn fast_direct<const C: usize, G>(k: &[f64], logw: &[f64], x0: [f64; C], len: usize, theta: f64, g: &G) -> Option<Rows<C>>
where
    G: Fn([f64; C]) -> [f64; C],
{
    let kt = tilted(k, len, theta);
    let w = weights(logw, len)?;
    let mut x: [Vec<f64>; C] = std::array::from_fn(|c| {
        let mut v = vec![0.0; len + 1];
        v[0] = x0[c];
        v
    });
    let mut scale = 0.0;
    for n in 1..=len {
        let acc: [f64; C] = std::array::from_fn(|c| dot_rev(&x[c][..n], &kt[1..=n]));
        let v = g(acc);
        let mut top = 0.0f64;
        for c in 0..C {
            let val = v[c] * w[n];
            if !val.is_finite() {
                return None;
            }
            x[c][n] = val;
            top = top.max(val.abs());
        }
        if top > BIG {
            for xc in x.iter_mut() {
                xc[..=n].iter_mut().for_each(|e| *e /= BIG);
            }
            scale += BIG.ln();
        } else if top < TINY && acc.iter().any(|&a| a != 0.0) {
            return None;
        }
    }
    let s = (0..=len).map(|n| scale + theta * n as f64).collect();
    Some(Rows { x, s })
}

fn fast_relaxed<const C: usize, G>(k: &[f64], logw: &[f64], x0: [f64; C], len: usize, theta: f64, g: &G) -> Option<Rows<C>>
where
    G: Fn([f64; C]) -> [f64; C],
{
    let kt = tilted(k, len, theta);
    let w = weights(logw, len)?;
    let x = conv::relaxed(&kt, x0, len, |n, acc| {
        let mut v = g(acc);
        v.iter_mut().for_each(|e| *e *= w[n]);
        v
    });
    let ok = x.iter().all(|xc| xc.iter().all(|v| v.is_finite() && v.abs() <= HUGE));
    let last = x[0][len];
    if !ok || !(last > TINY) {
        return None;
    }
    let s = (0..=len).map(|n| theta * n as f64).collect();
    Some(Rows { x, s })
}

fn robust<const C: usize, G>(k: &[f64], logw: &[f64], x0: [f64; C], len: usize, g: &G) -> Rows<C>
where
    G: Fn([f64; C]) -> [f64; C],
{
    let mut x: [Vec<f64>; C] = std::array::from_fn(|_| vec![0.0; len + 1]);
    let mut s = vec![f64::NEG_INFINITY; len + 1];
    let top0 = x0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if top0 > 0.0 {
        for c in 0..C {
            x[c][0] = x0[c] / top0;
        }
        s[0] = top0.ln();
    }
    let mut e = vec![0.0; len + 1];
    let mut reference = s[0];
    for n in 1..=len {
        if reference == f64::NEG_INFINITY {
            continue;
        }
        for m in 0..n {
            e[m] = (s[m] - reference).exp();
        }
        let mut acc = [0.0; C];
        for m in 0..n {
            let f = e[m] * k[n - m];
            if f != 0.0 {
                for c in 0..C {
                    acc[c] += x[c][m] * f;
                }
            }
        }
        let v = g(acc);
        let top = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if top > 0.0 {
            for c in 0..C {
                x[c][n] = v[c] / top;
            }
            s[n] = reference + logw[n] + top.ln();
            reference = reference.max(s[n]);
        }
    }
    for n in 0..=len {
        if s[n] == f64::NEG_INFINITY {
            s[n] = 0.0;
        }
    }
    Rows { x, s }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(k: &[f64], logw: &[f64], len: usize) -> Vec<f64> {
        let mut z = vec![0.0; len + 1];
        z[0] = 1.0;
        for n in 1..=len {
            z[n] = logw[n].exp() * (0..n).map(|m| z[m] * k[n - m]).sum::<f64>();
        }
        z
    }

    fn kernel(len: usize) -> Vec<f64> {
        let mut k: Vec<f64> = (0..=len).map(|j| if j == 0 { 0.0 } else { (j as f64).powf(-1.5) }).collect();
        let z: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= z);
        k
    }

    #[test]
    fn fast_path_matches_brute_force() {
        let len = 300;
        let k = kernel(len);
        let logw: Vec<f64> = (0..=len).map(|n| 0.3 * ((n * 37 % 11) as f64 / 11.0 - 0.5)).collect();
        let r = solve(&k, &logw, [1.0], len, |a| a);
        let b = brute(&k, &logw, len);
        for n in 0..=len {
            assert!((r.ln(0, n) - b[n].ln()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn growth_beyond_double_range_is_tracked() {
        let len = 2000;
        let k = kernel(len);
        let logw = vec![1.0; len + 1];
        let r = solve(&k, &logw, [1.0], len, |a| a);
        // Z(n) ≥ (K(1)e)^n
        let l = r.ln(0, len);
        assert!(l >= len as f64 * (k[1].ln() + 1.0), "{l}");
        assert!(l.is_finite() && l > 710.0, "{l}");
        let rob = robust(&k, &logw, [1.0], len, &|a: [f64; 1]| a);
        assert!((rob.ln(0, len) - r.ln(0, len)).abs() < 1e-9 * r.ln(0, len));
    }

    #[test]
    fn deep_decay_uses_robust_rows() {
        let k = kernel(3);
        let logw = vec![-700.0; 4];
        let r = solve(&k, &logw, [1.0], 3, |a| a);
        // e^{−700}K(3) + 2e^{−1400}K(1)K(2) + e^{−2100}K(1)³
        let want = -700.0 + k[3].ln() + (2.0 * (-700.0f64).exp() * k[1] * k[2] / k[3]).ln_1p();
        assert!((r.ln(0, 3) - want).abs() < 1e-12);
        assert!((r.ln(0, 1) - (-700.0 + k[1].ln())).abs() < 1e-12);
    }

    #[test]
    fn relaxed_path_agrees_with_direct() {
        let len = DIRECT_LIMIT + 500;
        let k = kernel(len);
        let logw: Vec<f64> = (0..=len).map(|n| 0.05 * ((n * 7919 % 13) as f64 / 13.0 - 0.5)).collect();
        let a = solve(&k, &logw, [1.0, 0.0], len, |a| [a[0], a[0] + a[1]]);
        let theta = tilt(&k, &logw, len);
        let b = fast_direct(&k, &logw, [1.0, 0.0], len, theta, &|a: [f64; 2]| [a[0], a[0] + a[1]]).unwrap();
        for n in [1, 100, DIRECT_LIMIT, len] {
            for c in 0..2 {
                assert!((a.ln(c, n) - b.ln(c, n)).abs() < 1e-9, "c={c} n={n}");
            }
        }
    }
}
