//! Reference implementations used only by tests. None of these share code with the
//! library beyond the complex type.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Annihilation operator truncated to `dim`.
pub fn lowering(dim: usize) -> Array2<C64> {
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = c((n as f64).sqrt(), 0.0);
    }
    a
}

fn one_norm(m: &Array2<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-24 Taylor core.
pub fn expm(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    let norm = one_norm(m);
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.mapv(|z| z / 2f64.powi(s));
    let mut term = Array2::<C64>::eye(n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = sum.dot(&sum);
    }
    sum
}

/// `exp(beta b^dag - conj(beta) b)` computed in a padded space and cut back to `dim`.
pub fn displacement_expm(beta: C64, dim: usize) -> Array2<C64> {
    let big = dim + 60 + (8.0 * beta.norm() * beta.norm()) as usize;
    let a = lowering(big);
    let ad = a.t().mapv(|z| z.conj());
    let gen = ad.mapv(|z| z * beta) - a.mapv(|z| z * beta.conj());
    let d = expm(&gen);
    d.slice(ndarray::s![..dim, ..dim]).to_owned()
}

/// `<n|alpha>` for `n < dim` by the recurrence `a_n = a_{n-1} alpha / sqrt(n)`.
pub fn coherent(alpha: C64, dim: usize) -> Array1<C64> {
    let mut v = Array1::zeros(dim);
    v[0] = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 1..dim {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    v
}

/// `exp(-i H t)|0>` for `H = b^dag b + 1/2 - beta (b + b^dag)`, a displaced coherent state.
pub fn photon_present_vacuum(beta: f64, t: f64, dim: usize) -> Array1<C64> {
    let alpha = c(beta, 0.0) - C64::from_polar(beta, -t);
    let phase = C64::from_polar(1.0, -(0.5 - beta * beta) * t - beta * beta * t.sin());
    coherent(alpha, dim).mapv(|z| z * phase)
}

/// Composite Simpson on `[a, b]` with `n` (even) intervals for vector integrands.
pub fn simpson_vec(f: impl Fn(f64) -> Array1<C64>, a: f64, b: f64, n: usize) -> Array1<C64> {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc = acc + f(a + i as f64 * h).mapv(|z| z * w);
    }
    acc.mapv(|z| z * (h / 3.0))
}

pub fn simpson_scalar(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `int_0^t e^{-gamma(t-s)/2} F(-s) e^{-i s/2} exp(-i H (t-s))|0> ds` by direct quadrature,
/// for a mirror starting in its ground state.
pub fn fine_grid_kernel(
    t: f64,
    f: &dyn Fn(f64) -> C64,
    beta: f64,
    gamma: f64,
    dim: usize,
    intervals: usize,
) -> Array1<C64> {
    if t == 0.0 {
        return Array1::zeros(dim);
    }
    simpson_vec(
        |s| {
            let w = (-0.5 * gamma * (t - s)).exp() * f(-s) * C64::from_polar(1.0, -0.5 * s);
            photon_present_vacuum(beta, t - s, dim).mapv(|z| z * w)
        },
        0.0,
        t,
        intervals,
    )
}

/// Outgoing mirror state at the front mirror, `F(-t) e^{-it/2}|0> - gamma * kernel`.
pub fn fine_grid_arm_state(
    t: f64,
    f: &dyn Fn(f64) -> C64,
    beta: f64,
    gamma: f64,
    dim: usize,
    intervals: usize,
) -> Array1<C64> {
    let mut v = fine_grid_kernel(t, f, beta, gamma, dim, intervals).mapv(|z| -gamma * z);
    v[0] += f(-t) * C64::from_polar(1.0, -0.5 * t);
    v
}

pub fn exp_photon(big_gamma: f64) -> impl Fn(f64) -> C64 {
    move |x: f64| {
        if x > 0.0 {
            c(0.0, 0.0)
        } else {
            c((2.0 * big_gamma).sqrt() * (big_gamma * x).exp(), 0.0)
        }
    }
}

pub fn inner(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &Array1<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Result of integrating the coupled cavity and line equations.
pub struct Rk4Solution {
    pub psi2: Array1<C64>,
    /// `int_0^t |psi_1(0+, s)|^2 ds`.
    pub outgoing: f64,
    pub boundary: Array1<C64>,
}

/// Method of lines for the photon-in-cavity amplitude
/// `d psi2/dt = -i H psi2 - gamma/2 psi2 + sqrt(gamma) F(-t) e^{-i(N + 1/2)t} phi0`
/// with `psi1(0+, t) = F(-t) e^{-i(N+1/2)t} phi0 - sqrt(gamma) psi2`, stepped by classical RK4.
pub fn rk4_solve(
    t_end: f64,
    f: &dyn Fn(f64) -> C64,
    beta: f64,
    gamma: f64,
    phi0: &Array1<C64>,
    dim: usize,
    steps: usize,
) -> Rk4Solution {
    let a = lowering(dim);
    let ad = a.t().mapv(|z| z.conj());
    let mut h = ad.dot(&a) - (a.clone() + &ad).mapv(|z| z * beta);
    for n in 0..dim {
        h[[n, n]] += 0.5;
    }
    let gen = h.mapv(|z| z * c(0.0, -1.0)) - Array2::<C64>::eye(dim).mapv(|z| z * (0.5 * gamma));
    let mut p0 = Array1::<C64>::zeros(dim);
    for (i, v) in phi0.iter().enumerate().take(dim) {
        p0[i] = *v;
    }
    let free = |t: f64| -> Array1<C64> {
        Array1::from_shape_fn(dim, |n| p0[n] * C64::from_polar(1.0, -(n as f64 + 0.5) * t))
    };
    let source = |t: f64| free(t).mapv(|z| z * f(-t) * gamma.sqrt());
    let rhs = |t: f64, y: &Array1<C64>| gen.dot(y) + source(t);
    let boundary =
        |t: f64, y: &Array1<C64>| free(t).mapv(|z| z * f(-t)) - y.mapv(|z| z * gamma.sqrt());

    let dt = t_end / steps as f64;
    let mut y = Array1::<C64>::zeros(dim);
    let mut out_sq = vec![norm_sqr(&boundary(0.0, &y))];
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * dt, &(&y + &k1.mapv(|z| z * (0.5 * dt))));
        let k3 = rhs(t + 0.5 * dt, &(&y + &k2.mapv(|z| z * (0.5 * dt))));
        let k4 = rhs(t + dt, &(&y + &k3.mapv(|z| z * dt)));
        y = &y + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (dt / 6.0));
        out_sq.push(norm_sqr(&boundary(t + dt, &y)));
    }
    let outgoing = if steps.is_multiple_of(2) {
        let mut acc = out_sq[0] + out_sq[steps];
        for (i, v) in out_sq.iter().enumerate().take(steps).skip(1) {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
        }
        acc * dt / 3.0
    } else {
        out_sq.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
    };
    Rk4Solution {
        boundary: boundary(t_end, &y),
        psi2: y,
        outgoing,
    }
}
