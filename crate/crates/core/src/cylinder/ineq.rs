//! The three elementary power-nonlinearity inequalities used in the residual
//! expansions, and their empirical constants.
//!
//! Each inequality is homogeneous of degree `p - 1` in `(x, y)`, so the ratio
//! `|LHS| / RHS` is sampled on the unit circle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spow(x: f64, q: f64) -> f64 {
    x.signum() * x.abs().powf(q)
}

/// `Σ_{k >= k0} C(a, k) u^k` for `|u| <= 1/2`, free of cancellation.
fn binomial_tail(a: f64, u: f64, k0: usize) -> f64 {
    let mut term = 1.0;
    for k in 0..k0 {
        term *= (a - k as f64) / (k as f64 + 1.0) * u;
    }
    let mut sum = 0.0;
    let mut k = k0;
    while term != 0.0 && k < k0 + 200 {
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        term *= (a - k as f64) / (k as f64 + 1.0) * u;
        k += 1;
    }
    sum
}

/// First inequality: Taylor remainder after the linear term.
pub fn first(p: f64, x: f64, y: f64) -> (f64, f64) {
    let lhs = if x != 0.0 && (y / x).abs() <= 0.5 {
        spow(x, p - 1.0) * binomial_tail(p - 1.0, y / x, 2)
    } else {
        spow(x + y, p - 1.0) - spow(x, p - 1.0) - (p - 1.0) * x.abs().powf(p - 2.0) * y
    };
    let cubic = if p > 3.0 { x.abs().powf(p - 3.0) * y * y } else { 0.0 };
    (lhs.abs(), cubic + y.abs().powf(p - 1.0))
}

/// Second inequality: difference of `|·|^{p-2}` times `|x|`.
pub fn second(p: f64, x: f64, y: f64) -> (f64, f64) {
    let lhs = ((x + y).abs().powf(p - 2.0) - x.abs().powf(p - 2.0)).abs() * x.abs();
    let rhs = if p >= 3.0 {
        x.abs() * y.abs().powf(p - 2.0) + x.abs().powf(p - 2.0) * y.abs()
    } else {
        (x * y).abs().powf((p - 1.0) / 2.0)
    };
    (lhs, rhs)
}

/// Third inequality (for `|y| <= |x|/2`): remainder after the cubic Taylor
/// polynomial. The quadratic term carries `sgn(x)`, which is the correct
/// expansion of `|x|^{p-2}x` for either sign of `x`.
pub fn third(p: f64, x: f64, y: f64) -> (f64, f64) {
    let ax = x.abs();
    // |x+y|^{p-2}(x+y) = sgn(x)|x|^{p-1}(1+u)^{p-1} with u = y/x, |u| <= 1/2
    let lhs = if x != 0.0 && (y / x).abs() <= 0.5 {
        spow(x, p - 1.0) * binomial_tail(p - 1.0, y / x, 4)
    } else {
        spow(x + y, p - 1.0)
            - spow(x, p - 1.0)
            - (p - 1.0) * ax.powf(p - 2.0) * y
            - (p - 1.0) * (p - 2.0) / 2.0 * spow(x, p - 3.0) * y * y
            - (p - 1.0) * (p - 2.0) * (p - 3.0) / 6.0 * ax.powf(p - 4.0) * y.powi(3)
    };
    (lhs.abs(), ax.powf(p - 5.0) * y.powi(4))
}

/// Empirical constants `sup |LHS|/RHS` of the three inequalities over
/// `samples` seeded random directions.
pub fn empirical_constants(p: f64, samples: usize, seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = [0.0f64; 3];
    let mut update = |k: usize, (lhs, rhs): (f64, f64)| {
        if rhs > 0.0 {
            sup[k] = sup[k].max(lhs / rhs);
        }
    };
    for _ in 0..samples {
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (x, y) = (phi.cos(), phi.sin());
        update(0, first(p, x, y));
        update(1, second(p, x, y));
        // restricted cone |y| <= |x|/2
        let x3 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let y3: f64 = rng.gen_range(-0.5..=0.5);
        update(2, third(p, x3, y3));
    }
    sup
}
