//! Probe generators and identity checks shared by the integration tests.
#![allow(dead_code)]

use barrierfw::barrier::{
    omega, Barrier, ConePoint, LogDetBarrier, SeparableLogLine, WeightedLogBarrier,
};
use barrierfw::error::Result;
use barrierfw::instances::rng::InstanceRng;
use barrierfw::oracle::{fd_gradient, fd_gradient_sym, fd_second_directional};
use nalgebra::{DMatrix, DVector};

pub fn random_vec(rng: &mut InstanceRng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.normal())
}

/// Log-uniform on `[lo, hi]`.
pub fn log_uniform(rng: &mut InstanceRng, lo: f64, hi: f64) -> f64 {
    (rng.uniform_in(lo.ln(), hi.ln())).exp()
}

/// Weighted-log barrier with a point `u`, a direction `w` and a cone point `v`.
pub fn log_probe(
    rng: &mut InstanceRng,
) -> (WeightedLogBarrier, DVector<f64>, DVector<f64>, DVector<f64>) {
    let m = 2 + rng.below(7) as usize;
    let weights = DVector::from_fn(m, |_, _| 1.0 + 4.0 * rng.uniform());
    let u = DVector::from_fn(m, |_, _| log_uniform(rng, 0.05, 20.0));
    let w = random_vec(rng, m);
    let v = DVector::from_fn(m, |_, _| 2.0 * rng.uniform());
    (WeightedLogBarrier::new(weights).unwrap(), u, w, v)
}

pub fn random_spd(rng: &mut InstanceRng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let u = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2;
    (&u + u.transpose()) * 0.5
}

pub fn random_sym(rng: &mut InstanceRng, n: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n, n, |_, _| rng.normal());
    (&r + r.transpose()) * 0.5
}

/// Log-det barrier with `U ≻ 0`, symmetric `W`, and `V ⪰ 0`.
pub fn logdet_probe(
    rng: &mut InstanceRng,
) -> (LogDetBarrier, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = 2 + rng.below(4) as usize;
    let u = random_spd(rng, n);
    let w = random_sym(rng, n);
    let c = DMatrix::from_fn(n, 1 + rng.below(n as u64) as usize, |_, _| rng.normal());
    let v = &c * c.transpose();
    (LogDetBarrier::new(n).unwrap(), u, w, v)
}

/// Name, outcome and detail of one identity at one probe.
pub type Outcome = (&'static str, bool, String);

fn outcome(name: &'static str, ok: bool, detail: String) -> Outcome {
    (name, ok, detail)
}

/// The barrier identity battery at one probe. `s ∈ (0, 1)` is the local
/// distance of the Dikin-ball test point; `fd_grad` computes a
/// finite-difference gradient in the point's own coordinates.
pub fn barrier_identities<B, G>(
    f: &B,
    u: &B::Point,
    w: &B::Point,
    v: &B::Point,
    s: f64,
    fd_grad: G,
) -> Result<Vec<Outcome>>
where
    B: Barrier,
    G: Fn(&B, &B::Point) -> Result<B::Point>,
{
    let theta = f.theta();
    let fu = f.value(u)?;
    let g = f.gradient(u)?;
    let mut out = Vec::new();

    for t in [0.5, 2.0, 10.0] {
        let ft = f.value(&u.lincomb(t, u, 0.0))?;
        let err = (ft - fu + theta * t.ln()).abs();
        out.push(outcome(
            "log_homogeneity",
            err <= 1e-10 * (1.0 + fu.abs()),
            format!("t={t}: err {err}"),
        ));
    }

    let gu = g.inner(u);
    out.push(outcome(
        "gradient_at_point",
        (gu + theta).abs() <= 1e-10 * theta,
        format!("<grad f(u), u> = {gu}"),
    ));

    let hu = f.hessian_apply(u, u)?;
    let (a, b) = (g.inner(w), -hu.inner(w));
    let scale = (g.inner(&g) * w.inner(w)).sqrt().max(f64::MIN_POSITIVE);
    out.push(outcome(
        "hessian_at_point",
        (a - b).abs() <= 1e-10 * scale,
        format!("{a} vs {b}"),
    ));

    let wn = f.local_norm_sq(u, w)?.sqrt();
    out.push(outcome(
        "gradient_dual_norm",
        a.abs() <= theta.sqrt() * wn + 1e-10,
        format!(
            "|<g,w>| = {} vs sqrt(theta)|w|_u = {}",
            a.abs(),
            theta.sqrt() * wn
        ),
    ));

    let vn = f.local_norm_sq(u, v)?.sqrt();
    let gv = -g.inner(v);
    out.push(outcome(
        "cone_norm_bound",
        vn <= gv + 1e-10,
        format!("|v|_u = {vn} vs -<g,v> = {gv}"),
    ));

    // a point inside the Dikin ball at local distance s
    let unit = w.lincomb(1.0 / wn, w, 0.0);
    let p = u.lincomb(1.0, &unit, s);
    let model = fu + g.inner(&p.lincomb(1.0, u, -1.0)) + omega(s)?;
    let fp = f.value(&p)?;
    out.push(outcome(
        "dikin_upper_bound",
        fp <= model + 1e-9,
        format!("f(v) = {fp} > model {model} at s = {s}"),
    ));

    let fd = fd_grad(f, u)?;
    let err = fd.lincomb(1.0, &g, -1.0).max_abs();
    out.push(outcome(
        "fd_gradient",
        err <= 1e-6 * g.max_abs().max(1.0),
        format!("max error {err}"),
    ));

    let second = fd_second_directional(|x| f.value(x), u, &unit, 1e-3)?;
    let exact = f.local_norm_sq(u, &unit)?;
    out.push(outcome(
        "fd_hessian",
        (second - exact).abs() <= 1e-5 * exact.abs().max(f64::MIN_POSITIVE),
        format!("second difference {second} vs {exact}"),
    ));

    let y = f.gradient(u)?;
    let back = f.conjugate_gradient(&y)?;
    let conj = fu + f.conjugate_value(&y)?;
    out.push(outcome(
        "conjugate_pair",
        back.lincomb(1.0, u, -1.0).max_abs() <= 1e-10 * u.max_abs().max(1.0)
            && (conj + theta).abs() <= 1e-10 * (1.0 + fu.abs() + theta),
        format!(
            "f + f* = {conj}, grad f* round trip error {}",
            back.lincomb(1.0, u, -1.0).max_abs()
        ),
    ));
    Ok(out)
}

pub fn fd_vec(f: &WeightedLogBarrier, u: &DVector<f64>) -> Result<DVector<f64>> {
    fd_gradient(|x| f.value(x), u, 1e-6)
}

pub fn fd_mat(f: &LogDetBarrier, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    fd_gradient_sym(|x| f.value(x), u, 1e-6)
}

/// Kinds of random separable-log lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    /// Nonnegative slopes and a nonpositive linear part.
    Increasing,
    /// Mild negative slopes with a strong pull to the right end.
    PullRight,
    /// Anything with a descent start.
    General,
}

/// A random line `(ζ, ξᵀd)` with `ζ'(0) < 0`.
pub fn random_line(rng: &mut InstanceRng, kind: LineKind) -> (SeparableLogLine, f64) {
    loop {
        let m = 1 + rng.below(8) as usize;
        let weights: Vec<f64> = (0..m).map(|_| 1.0 + 2.0 * rng.uniform()).collect();
        let base: Vec<f64> = (0..m).map(|_| log_uniform(rng, 0.1, 10.0)).collect();
        let (slope, xi_d): (Vec<f64>, f64) = match kind {
            LineKind::Increasing => (
                (0..m).map(|_| 3.0 * rng.uniform()).collect(),
                -2.0 * rng.uniform(),
            ),
            LineKind::PullRight => (
                base.iter().map(|b| b * rng.uniform_in(-0.3, 1.0)).collect(),
                -log_uniform(rng, 1.0, 50.0),
            ),
            LineKind::General => (
                base.iter().map(|b| b * 3.0 * rng.normal()).collect(),
                5.0 * rng.normal(),
            ),
        };
        let line = SeparableLogLine::new(weights, base, slope).unwrap();
        if line.derivative(0.0) + xi_d < 0.0 {
            return (line, xi_d);
        }
    }
}

/// Right end of the line's domain inside `[0, 1]`.
pub fn domain_end(line: &SeparableLogLine) -> f64 {
    line.base
        .iter()
        .zip(&line.slope)
        .filter(|(_, s)| **s < 0.0)
        .map(|(b, s)| -b / s)
        .fold(1.0, f64::min)
}

pub fn zeta(line: &SeparableLogLine, xi_d: f64, a: f64) -> f64 {
    line.value(a).map(|v| v + a * xi_d).unwrap_or(f64::INFINITY)
}
