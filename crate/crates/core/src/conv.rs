//! Convolution kernels shared by the renewal recursions.
//!
//! Every recursion in this crate has the shape
//! `x(n) = f(n, Σ_{m<n} x(m)·a(n−m))`. [`relaxed`] evaluates it in
//! O(n log² n) by splitting the index range in halves: once the left half
//! is final, its whole contribution to the right half is one FFT product.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::Arc;

/// Leaves below this width are finished by the direct double loop.
const LEAF: usize = 64;
/// Cross contributions narrower than this are also done directly.
const FFT_MIN: usize = 256;

/// `Σ_{m<len} x[m]·a[len−m]`, i.e. `x[..len]` against `a[1..=len]` reversed.
#[inline]
pub fn dot_rev(x: &[f64], a: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), a.len());
    let n = x.len();
    let mut s = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        let j = n - 1 - i;
        s[0] += x[i] * a[j];
        s[1] += x[i + 1] * a[j - 1];
        s[2] += x[i + 2] * a[j - 2];
        s[3] += x[i + 3] * a[j - 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += x[i] * a[n - 1 - i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// [`dot_rev`] in doubled working precision (error-free product and sum
/// transformations), for recursions that cancel heavily.
pub fn dot_rev_accurate(x: &[f64], a: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), a.len());
    let n = x.len();
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for i in 0..n {
        let p = x[i] * a[n - 1 - i];
        let pe = x[i].mul_add(a[n - 1 - i], -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += se + pe;
    }
    s + c
}

/// Caches FFT plans by length.
pub struct Convolver {
    planner: FftPlanner<f64>,
    fwd: HashMap<usize, Arc<dyn Fft<f64>>>,
    inv: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl Default for Convolver {
    fn default() -> Self {
        Self::new()
    }
}

impl Convolver {
    pub fn new() -> Self {
        Self { planner: FftPlanner::new(), fwd: HashMap::new(), inv: HashMap::new() }
    }

    fn plans(&mut self, n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
        let p = &mut self.planner;
        let f = self.fwd.entry(n).or_insert_with(|| p.plan_fft_forward(n)).clone();
        let i = self.inv.entry(n).or_insert_with(|| p.plan_fft_inverse(n)).clone();
        (f, i)
    }

    /// Full linear convolution of two real sequences.
    pub fn full(&mut self, x: &[f64], a: &[f64]) -> Vec<f64> {
        if x.is_empty() || a.is_empty() {
            return Vec::new();
        }
        let out_len = x.len() + a.len() - 1;
        if x.len().min(a.len()) < 32 {
            let mut out = vec![0.0; out_len];
            for (i, &xi) in x.iter().enumerate() {
                for (j, &aj) in a.iter().enumerate() {
                    out[i + j] += xi * aj;
                }
            }
            return out;
        }
        let n = out_len.next_power_of_two();
        let (fwd, inv) = self.plans(n);
        // Pack both real inputs into one complex transform.
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), a.get(i).copied().unwrap_or(0.0)))
            .collect();
        fwd.process(&mut buf);
        let mut prod = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let zk = buf[k];
            let zc = buf[(n - k) % n].conj();
            let xk = (zk + zc) * 0.5;
            let ak = (zk - zc) * Complex64::new(0.0, -0.5);
            prod[k] = xk * ak;
        }
        inv.process(&mut prod);
        let scale = 1.0 / n as f64;
        prod[..out_len].iter().map(|c| c.re * scale).collect()
    }
}

/// Solves `x(n) = f(n, acc_c(n))` for `n = 1..=len` on `C` channels sharing
/// the kernel `a`, where `acc_c(n) = Σ_{m<n} x_c(m)·a(n−m)` and `x(0) = x0`.
/// `a` must hold at least `len + 1` entries (`a[0]` is ignored).
pub fn relaxed<const C: usize, F>(a: &[f64], x0: [f64; C], len: usize, mut f: F) -> [Vec<f64>; C]
where
    F: FnMut(usize, [f64; C]) -> [f64; C],
{
    assert!(a.len() > len, "kernel shorter than the requested horizon");
    let mut x: [Vec<f64>; C] = std::array::from_fn(|_| vec![0.0; len + 1]);
    let mut acc: [Vec<f64>; C] = std::array::from_fn(|_| vec![0.0; len + 1]);
    for c in 0..C {
        x[c][0] = x0[c];
    }
    let mut conv = Convolver::new();
    solve(a, &mut x, &mut acc, 0, len + 1, &mut f, &mut conv);
    x
}

fn solve<const C: usize, F>(
    a: &[f64],
    x: &mut [Vec<f64>; C],
    acc: &mut [Vec<f64>; C],
    lo: usize,
    hi: usize,
    f: &mut F,
    conv: &mut Convolver,
) where
    F: FnMut(usize, [f64; C]) -> [f64; C],
{
    if hi - lo <= LEAF {
        for n in lo.max(1)..hi {
            let mut s = [0.0; C];
            for c in 0..C {
                s[c] = acc[c][n] + dot_rev(&x[c][lo..n], &a[1..=n - lo]);
            }
            let v = f(n, s);
            for c in 0..C {
                x[c][n] = v[c];
            }
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    solve(a, x, acc, lo, mid, f, conv);
    // Contribution of x[lo..mid) to acc[mid..hi): offsets 1..hi-lo of `a`.
    let width = hi - lo;
    if width < FFT_MIN {
        for c in 0..C {
            for n in mid..hi {
                acc[c][n] += dot_rev(&x[c][lo..mid], &a[n - mid + 1..=n - lo]);
            }
        }
    } else {
        for c in 0..C {
            let prod = conv.full(&x[c][lo..mid], &a[..width]);
            for n in mid..hi {
                acc[c][n] += prod[n - lo];
            }
        }
    }
    solve(a, x, acc, mid, hi, f, conv);
}
