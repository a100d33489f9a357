//! Reference results on the unit disk: Bessel functions, the per-mode
//! dispersion relations of the second-order eigenproblem, a manufactured
//! solution and the decoupled circle spectrum.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr};

const MAX_ORDER: usize = 30;
const MAX_ARG: f64 = 200.0;

/// Bessel function of the first kind `J_m(x)` for `m ≤ 30`, `0 ≤ x ≤ 200`.
pub fn bessel_j(m: usize, x: f64) -> Result<f64> {
    check_range(m, x)?;
    Ok(j_unchecked(m, x))
}

/// `J_m'(x) = (J_{m-1}(x) − J_{m+1}(x)) / 2`, `J_0' = −J_1`.
pub fn bessel_j_prime(m: usize, x: f64) -> Result<f64> {
    check_range(m, x)?;
    Ok(jp_unchecked(m, x))
}

fn check_range(m: usize, x: f64) -> Result<()> {
    if m > MAX_ORDER || !(0.0..=MAX_ARG).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "Bessel J_m(x) supported for m <= {MAX_ORDER}, 0 <= x <= {MAX_ARG}; got m = {m}, x = {x}"
        )));
    }
    Ok(())
}

fn j_unchecked(m: usize, x: f64) -> f64 {
    if x <= 12.0 {
        j_series(m, x)
    } else {
        j_miller(m, x)
    }
}

fn jp_unchecked(m: usize, x: f64) -> f64 {
    if m == 0 {
        -j_unchecked(1, x)
    } else {
        0.5 * (j_unchecked(m - 1, x) - j_unchecked(m + 1, x))
    }
}

/// Ascending series `Σ (−1)^k (x/2)^{2k+m} / (k! (k+m)!)`.
fn j_series(m: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for i in 1..=m {
        term *= h / i as f64;
    }
    let mut sum = term;
    let h2 = h * h;
    for k in 1..200 {
        term *= -h2 / (k as f64 * (k + m) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && k as f64 > h {
            break;
        }
    }
    sum
}

/// Backward recurrence `J_{k−1} = (2k/x) J_k − J_{k+1}` from far above the
/// order, normalized by `J_0 + 2 Σ J_{2k} = 1`.
fn j_miller(m: usize, x: f64) -> f64 {
    let top = m.max(x as usize) + 40 + (10.0 * x.sqrt()) as usize;
    let top = top + top % 2;
    let (mut next, mut cur) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=top).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if k - 1 == m {
            result = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
    }
    norm += cur;
    result / norm
}

/// One root of a per-mode dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRoot {
    pub m: usize,
    pub lambda: f64,
    /// 1 for `m = 0`, 2 otherwise.
    pub multiplicity: usize,
    /// Relative residual of the coupling relation at the root.
    pub residual: f64,
}

struct Dispersion {
    k: f64,
    alpha: f64,
    gamma: f64,
    m: usize,
}

impl Dispersion {
    fn pole(&self) -> f64 {
        self.gamma * (self.m * self.m) as f64
    }

    /// Coupling relation multiplied through by `λ − γm²`, with its scale.
    fn eval(&self, lambda: f64) -> (f64, f64) {
        let s = lambda.sqrt();
        let j = j_unchecked(self.m, s);
        let jp = jp_unchecked(self.m, s);
        let shift = lambda - self.pole();
        let bulk = if self.k > 0.0 { self.k * s * jp + j } else { j };
        let bulk_scale = if self.k > 0.0 { (self.k * s * jp).abs() + j.abs() } else { j.abs() };
        let a2 = self.alpha * self.alpha;
        (shift * bulk - a2 * s * jp, shift.abs() * bulk_scale + a2 * s * jp.abs())
    }
}

/// Eigenvalues in `(0, lambda_max]` of the second-order problem on the unit
/// disk for modes `m = 0..=m_max`, sorted ascending.
///
/// With `u = J_m(√λ r) e^{imθ}` and `v = c e^{imθ}` the surface equation gives
/// `(λ − γm²) c = α √λ J_m'(√λ)` and the coupling gives
/// `K √λ J_m' + J_m = α c` (`J_m = α c` for `K = 0`).
pub fn disk_eigs_second(k: f64, alpha: f64, gamma: f64, m_max: usize, lambda_max: f64) -> Result<Vec<DispersionRoot>> {
    disk_eigs_second_with_step(k, alpha, gamma, m_max, lambda_max, 0.01)
}

pub fn disk_eigs_second_with_step(
    k: f64,
    alpha: f64,
    gamma: f64,
    m_max: usize,
    lambda_max: f64,
    step: f64,
) -> Result<Vec<DispersionRoot>> {
    if !(k >= 0.0) || !alpha.is_finite() || !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need K >= 0, finite alpha, gamma > 0; got K = {k}, alpha = {alpha}, gamma = {gamma}"
        )));
    }
    if m_max >= MAX_ORDER || !(lambda_max > 0.0) || lambda_max.sqrt() > MAX_ARG || !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need m_max < {MAX_ORDER}, 0 < lambda_max <= {}, step > 0",
            MAX_ARG * MAX_ARG
        )));
    }
    let mut roots = Vec::new();
    for m in 0..=m_max {
        let d = Dispersion { k, alpha, gamma, m };
        let pole = d.pole();
        let mut grid: Vec<f64> = Vec::new();
        let n = (lambda_max / step).floor() as usize;
        grid.push(step * 1e-3);
        grid.extend((1..=n).map(|i| i as f64 * step));
        if grid.last() != Some(&lambda_max) {
            grid.push(lambda_max);
        }
        if pole > grid[0] && pole < lambda_max && !grid.contains(&pole) {
            grid.push(pole);
            grid.sort_by(f64::total_cmp);
        }
        let mut found: Vec<f64> = Vec::new();
        let mut prev = (grid[0], d.eval(grid[0]).0);
        // an exact zero at the left end is not a root inside the interval
        for &lam in &grid[1..] {
            let val = d.eval(lam).0;
            if val == 0.0 {
                found.push(lam);
            } else if prev.1 != 0.0 && (prev.1 < 0.0) != (val < 0.0) {
                found.push(bisect(&d, prev.0, lam, prev.1));
            }
            prev = (lam, val);
        }
        for lambda in found {
            // the rationalized relation vanishes at the pole only through
            // the surface factor, which is a genuine mode only for α = 0
            if alpha != 0.0 && (lambda - pole).abs() <= 1e-9 * pole.max(1.0) {
                continue;
            }
            let (val, scale) = d.eval(lambda);
            roots.push(DispersionRoot {
                m,
                lambda,
                multiplicity: if m == 0 { 1 } else { 2 },
                residual: if scale > 0.0 { val.abs() / scale } else { val.abs() },
            });
        }
    }
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(roots)
}

fn bisect(d: &Dispersion, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_neg = f_lo < 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = d.eval(mid).0;
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalues with each root repeated by its multiplicity.
pub fn expand_multiplicities(roots: &[DispersionRoot]) -> Vec<f64> {
    roots.iter().flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity)).collect()
}

/// Manufactured second-order solution on the unit disk.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub f: Expr,
    pub g: Expr,
    pub u: Expr,
    pub v: f64,
    /// Constant shift enforcing the mean constraint.
    pub shift: f64,
}

/// `f ≡ −4`, `g ≡ 2α`, solved by `u = r² + αc`, `v = (2K+1)/α + c` where `c`
/// makes `β ∫u + ∫v` vanish on the unit disk.
pub fn manufactured_second(k: f64, alpha: f64, beta: f64) -> Result<Manufactured> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument("manufactured solution needs alpha != 0".into()));
    }
    if !(k >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("need K >= 0 and finite beta, got K = {k}, beta = {beta}")));
    }
    let denom = alpha * beta * PI + 2.0 * PI;
    if denom.abs() <= 1e-12 * 2.0 * PI {
        return Err(Error::DegenerateConstraint { value: denom });
    }
    let v0 = (2.0 * k + 1.0) / alpha;
    let c = -(beta * PI / 2.0 + 2.0 * PI * v0) / denom;
    let r2 = Expr::binary(
        BinOp::Add,
        Expr::binary(BinOp::Pow, Expr::Var(crate::expr::Var::X), Expr::num(2.0)),
        Expr::binary(BinOp::Pow, Expr::Var(crate::expr::Var::Y), Expr::num(2.0)),
    );
    Ok(Manufactured {
        f: Expr::num(-4.0),
        g: Expr::num(2.0 * alpha),
        u: Expr::binary(BinOp::Add, r2, Expr::num(alpha * c)),
        v: v0 + c,
        shift: c,
    })
}

/// `γ m²` for `m = 1..=m_max`, each listed twice.
pub fn circle_surface_eigs(gamma: f64, m_max: usize) -> Vec<f64> {
    (1..=m_max).flat_map(|m| {
        let l = gamma * (m * m) as f64;
        [l, l]
    })
    .collect()
}
