//! Disorder laws (centered, unit variance) and sampled environments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisorderLaw {
    Gaussian,
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    UniformCentered,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const FD_STEP: f64 = 1e-5;

impl DisorderLaw {
    pub fn name(&self) -> &'static str {
        match self {
            DisorderLaw::Gaussian => "gaussian",
            DisorderLaw::Rademacher => "rademacher",
            DisorderLaw::UniformCentered => "uniform_centered",
        }
    }

    /// `λ(β) = log E[e^{βω}]`.
    pub fn lambda(&self, beta: f64) -> f64 {
        match self {
            DisorderLaw::Gaussian => 0.5 * beta * beta,
            DisorderLaw::Rademacher => log_cosh(beta),
            DisorderLaw::UniformCentered => uniform_lambda(beta),
        }
    }

    /// `λ'(β)`, the mean of ω under the tilted law.
    pub fn lambda_prime(&self, beta: f64) -> f64 {
        match self {
            DisorderLaw::Gaussian => beta,
            DisorderLaw::Rademacher => beta.tanh(),
            DisorderLaw::UniformCentered => {
                (self.lambda(beta + FD_STEP) - self.lambda(beta - FD_STEP)) / (2.0 * FD_STEP)
            }
        }
    }

    /// `λ''(β)`, the variance of ω under the tilted law.
    pub fn lambda_second(&self, beta: f64) -> f64 {
        match self {
            DisorderLaw::Gaussian => 1.0,
            DisorderLaw::Rademacher => {
                let c = beta.cosh();
                1.0 / (c * c)
            }
            DisorderLaw::UniformCentered => {
                let (a, b, c) = (self.lambda(beta + FD_STEP), self.lambda(beta), self.lambda(beta - FD_STEP));
                (a - 2.0 * b + c) / (FD_STEP * FD_STEP)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DisorderLaw::Gaussian => StandardNormal.sample(rng),
            DisorderLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DisorderLaw::UniformCentered => rng.gen_range(-SQRT3..SQRT3),
        }
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// 64-point Gauss–Legendre rule on `[−1, 1]`.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

/// `log E[e^{βω}]` for ω uniform on `[−√3, √3]`: quadrature of
/// `½∫_{−1}^{1} e^{√3βs − |√3β|} ds`, shifted to avoid overflow.
fn uniform_lambda(beta: f64) -> f64 {
    let b = SQRT3 * beta;
    let (nodes, weights) = gauss_legendre();
    let shift = b.abs();
    let s: f64 = nodes.iter().zip(weights).map(|(x, w)| w * (b * x - shift).exp()).sum();
    shift + (0.5 * s).ln()
}

/// One realization `ω_1..ω_N`; `omega[n − 1] = ω_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderField {
    pub omega: Vec<f64>,
    pub law: DisorderLaw,
    /// `(master seed, replica index)` of the stream that produced it.
    pub seed: Option<(u64, u64)>,
}

impl DisorderField {
    pub fn new(omega: Vec<f64>, law: DisorderLaw) -> Self {
        Self { omega, law, seed: None }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `ω_n` for `1 ≤ n ≤ N`.
    pub fn at(&self, n: usize) -> f64 {
        self.omega[n - 1]
    }
}

pub fn sample_disorder<R: Rng + ?Sized>(law: DisorderLaw, n: usize, rng: &mut R) -> DisorderField {
    DisorderField::new((0..n).map(|_| law.sample(rng)).collect(), law)
}

/// As [`sample_disorder`] on the stream `(master, index)`, recording it.
pub fn sample_disorder_seeded(law: DisorderLaw, n: usize, master: u64, index: u64) -> DisorderField {
    let mut rng = crate::rng::stream(master, index);
    let mut f = sample_disorder(law, n, &mut rng);
    f.seed = Some((master, index));
    f
}
