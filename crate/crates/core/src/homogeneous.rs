//! The pure model: `G`, its inverse the free energy, and partition
//! functions with a constant reward `u` per contact.

use crate::csv::{Cell, CsvBuf};
use crate::error::{domain, Result};
use crate::partition::{self, Boundary, LogPartition};
use crate::renewal::{Flavor, RenewalKernel, RenewalTables};
use std::f64::consts::PI;

/// `G(x)` with the kernel mass beyond the horizon placed at `n_max`.
/// The true value lies in `[value, value + error_bar]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValue {
    pub value: f64,
    pub error_bar: f64,
}

/// Upper end of the bisection bracket: `e^{−x}` is still a normal double.
pub const X_MAX: f64 = 708.0;
pub const TOL_F: f64 = 1e-12;
const MAX_ITER: usize = 200;

pub fn g_eval(tables: &RenewalTables, x: f64) -> Result<GValue> {
    if !(x >= 0.0) {
        return domain(format!("G needs x ≥ 0, got {x}"));
    }
    if x == 0.0 {
        return Ok(GValue { value: 0.0, error_bar: 0.0 });
    }
    let n_max = tables.n_max();
    let first = match (1..=n_max).find(|&n| tables.k[n] > 0.0) {
        Some(n) => n,
        None => return domain("kernel has no mass on the horizon"),
    };
    // Factor e^{−first·x} out so the sum stays O(1) for large x.
    let mut series = 0.0;
    for n in (first..=n_max).rev() {
        series += tables.k[n] * (-((n - first) as f64) * x).exp();
    }
    let beyond = tables.tail[n_max] * (-((n_max - first) as f64) * x).exp();
    let value = first as f64 * x - (series + beyond).ln();
    Ok(GValue { value, error_bar: (1.0 + beyond / series).ln() })
}

/// `G(x) = −log Σ_n e^{−nx}K(n)` (with the horizon tail term).
pub fn g_function(tables: &RenewalTables, x: f64) -> Result<f64> {
    g_eval(tables, x).map(|g| g.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergy {
    pub value: f64,
    /// `h ≥ G(X_MAX)`: the root is not representable and `value = X_MAX`.
    pub saturated: bool,
}

/// `F(h) = G⁻¹(h)` for `h > 0`, zero otherwise.
pub fn pure_free_energy(tables: &RenewalTables, h: f64) -> Result<FreeEnergy> {
    if h.is_nan() {
        return domain("h is NaN");
    }
    if h <= 0.0 {
        return Ok(FreeEnergy { value: 0.0, saturated: false });
    }
    if g_function(tables, X_MAX)? <= h {
        return Ok(FreeEnergy { value: X_MAX, saturated: true });
    }
    let (mut lo, mut hi) = (0.0f64, X_MAX);
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_function(tables, mid)? < h {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= TOL_F * 1e-3 * hi.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(FreeEnergy { value: 0.5 * (lo + hi), saturated: false })
}

/// CSV `h,F,G_residual`.
pub fn free_energy_csv(tables: &RenewalTables, hs: &[f64]) -> Result<String> {
    let mut b = CsvBuf::new(&["h", "F", "G_residual"]);
    for &h in hs {
        let f = pure_free_energy(tables, h)?;
        let resid = if h > 0.0 && !f.saturated { g_function(tables, f.value)? - h } else { 0.0 };
        b.row(&[Cell::F(h), Cell::F(f.value), Cell::F(resid)]);
    }
    Ok(b.into_string())
}

/// Homogeneous partition function with reward `u_defect` per contact, over
/// a possibly defective kernel.
pub fn homo_partition(tables: &RenewalTables, u_defect: f64, n: usize, boundary: Boundary) -> Result<LogPartition> {
    if n > tables.n_max() {
        return domain(format!("N = {n} exceeds the horizon {}", tables.n_max()));
    }
    let logw = vec![u_defect; n + 1];
    let rows = partition::solve(&tables.k, &logw, [1.0], n, |a| a);
    let log_value = match boundary {
        Boundary::Constrained => rows.ln(0, n),
        Boundary::Free => rows.ln_weighted_sum(0, 0..=n, |m| tables.tail[n - m]),
        Boundary::PinnedPair { .. } => return domain("pinned pairs belong to the disordered model"),
    };
    Ok(LogPartition { log_value, boundary, beta: 0.0, h: u_defect, n })
}

/// `E[e^{h Σ_{i≤span} δ_i} | span ∈ τ]`.
pub fn conditioned_contact_mgf(tables: &RenewalTables, h: f64, span: usize) -> Result<f64> {
    if span == 0 || span > tables.n_max() {
        return domain(format!("span {span} outside 1..={}", tables.n_max()));
    }
    if tables.u[span] <= 0.0 {
        return domain(format!("u({span}) = 0: cannot condition on span ∈ τ"));
    }
    let z = homo_partition(tables, h, span, Boundary::Constrained)?;
    Ok((z.log_value - tables.u[span].ln()).exp())
}

/// `−½c_φ²` for the walk flavors in closed form.
pub fn predicted_marginal_constant(flavor: Flavor) -> Result<f64> {
    match flavor {
        Flavor::SrwPinning { p } | Flavor::SrwWetting { p } if !(p > 0.0 && p < 1.0) => {
            domain(format!("p = {p} outside (0, 1)"))
        }
        Flavor::SrwPinning { p } => Ok(-p * PI),
        Flavor::SrwWetting { p } => Ok(-p * PI / ((2.0 - p) * (2.0 - p))),
        Flavor::StableLike => domain("stable-like kernels carry their constant; use the kernel form"),
    }
}

/// As [`predicted_marginal_constant`], reading `c_φ` off a built kernel.
pub fn predicted_marginal_constant_of(kernel: &RenewalKernel) -> Result<f64> {
    match kernel.flavor {
        Flavor::StableLike => Ok(-0.5 * kernel.c_phi * kernel.c_phi),
        f => predicted_marginal_constant(f),
    }
}
