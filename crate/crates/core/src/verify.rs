//! Invariant checks over solver traces, shared by the `verify` command and
//! the test suites.

use std::fmt;

use nalgebra::DVector;
use serde::Serialize;

use crate::barrier::{Barrier, WeightedLogBarrier};
use crate::composite::{CompositeProblem, NonsmoothTerm};
use crate::dual_md::{solve_md_standalone, MdConfig};
use crate::error::Result;
use crate::fw_solver::{
    iteration_bounds, solve_fw, sublinear_increment, SolverConfig, StepRule, TraceRecord,
};
use crate::linmap::LinearMap;
use crate::oracle::ReferenceSolution;

/// Absolute allowance used by the per-row inequalities.
pub const ROW_TOL: f64 = 1e-9;

/// Rounding allowance of the descent check, relative to `1 + |F_k|`.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Outcome of one named invariant over many cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub checked: usize,
    pub failed: usize,
    /// Description of the first failing case.
    pub first_failure: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checked: 0,
            failed: 0,
            first_failure: None,
        }
    }

    pub fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    /// Folds another check with the same meaning into this one.
    pub fn absorb(&mut self, other: Check) {
        self.checked += other.checked;
        self.failed += other.failed;
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// Adds checks, merging into an existing entry of the same name.
    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            match self.checks.iter_mut().find(|e| e.name == c.name) {
                Some(e) => e.absorb(c),
                None => self.checks.push(c),
            }
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>10} {:>8}  status", "check", "cases", "failed")?;
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{:<28} {:>10} {:>8}  {status}",
                c.name, c.checked, c.failed
            )?;
            if let Some(d) = &c.first_failure {
                writeln!(f, "    first failure: {d}")?;
            }
        }
        Ok(())
    }
}

/// Smallest gap `F(x) − F_ref` the reference can resolve.
fn resolution(r: &ReferenceSolution) -> f64 {
    r.gap.max(1e-12 * (1.0 + r.value.abs()))
}

/// Per-row inequalities of an adaptive or exact Frank-Wolfe trace.
///
/// `scale` is `θ + R_h`. With a reference solution the optimality-gap
/// statements are checked as well: growth of `1/δ_k` in the sublinear
/// phase, the count of linear-phase iterations, and the sequence
/// conclusions on the sublinear subsequence. Rows whose gap to the
/// reference is below what the reference resolves are skipped there.
pub fn check_fw_trace(
    trace: &[TraceRecord],
    scale: f64,
    reference: Option<&ReferenceSolution>,
) -> Vec<Check> {
    let mut nonneg = Check::new("gap_nonnegative");
    let mut dist = Check::new("local_distance_bound");
    let mut mono = Check::new("monotone_objective");
    for (i, r) in trace.iter().enumerate() {
        nonneg.record(r.gap >= 0.0, || format!("k={}: G={}", r.k, r.gap));
        let lim = r.gap + scale + ROW_TOL * (1.0 + r.gap);
        dist.record(r.dist <= lim, || format!("k={}: D={} > {lim}", r.k, r.dist));
        if let Some(next) = trace.get(i + 1) {
            let lim = r.objective + MONOTONE_TOL * (1.0 + r.objective.abs());
            mono.record(next.objective <= lim, || {
                format!(
                    "k={}: F rose from {} to {}",
                    r.k, r.objective, next.objective
                )
            });
        }
    }
    let mut out = vec![nonneg, dist, mono];
    let Some(reference) = reference else {
        return out;
    };

    let f_ref = reference.value;
    let floor = resolution(reference);
    let delta = |r: &TraceRecord| r.objective - f_ref;
    let inc = sublinear_increment(scale, 0.0);

    let mut growth = Check::new("inverse_gap_growth");
    for w in trace.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.gap > scale || delta(b) <= floor {
            continue;
        }
        let step = 1.0 / delta(b) - 1.0 / delta(a);
        growth.record(step >= inc - ROW_TOL, || {
            format!("k={}: 1/delta grew by {step} < {inc}", a.k)
        });
    }
    out.push(growth);

    let mut linear = Check::new("linear_phase_count");
    let delta0 = trace.first().map(delta).unwrap_or(0.0);
    if delta0 > floor {
        let k_lin = iteration_bounds(delta0, scale, 0.0, 1.0)
            .map(|b| b.k_lin)
            .unwrap_or(0);
        let count = trace.iter().filter(|r| r.gap > scale).count() as u64;
        linear.record(count <= k_lin, || {
            format!("{count} iterations with G > theta + R_h, bound {k_lin}")
        });
    }
    out.push(linear);

    let mut seq = Check::new("sublinear_sequence");
    let (d, g): (Vec<f64>, Vec<f64>) = trace
        .iter()
        .filter(|r| r.gap <= scale)
        .map(|r| (delta(r), r.gap))
        .take_while(|(d, _)| *d > floor)
        .unzip();
    if !d.is_empty() {
        let m = 12.0 * scale * scale;
        match crate::fw_solver::check_sequence_lemma_with_slack(&d, &g, m, ROW_TOL) {
            Ok(ok) => seq.record(ok, || {
                format!("conclusion fails on a subsequence of length {}", d.len())
            }),
            Err(e) => seq.record(false, || format!("hypothesis fails: {e}")),
        }
    }
    out.push(seq);
    out
}

/// Iteration counts observed in a trace next to the ceiling formulas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationBoundCheck {
    /// First `k` with `F(x^k) − F* ≤ ε` (using the certified lower bound on
    /// `F*`), if reached.
    pub observed_k_eps: Option<usize>,
    pub bound_k_eps: u64,
    /// First `k` with `G_k ≤ ε_gap`, if reached.
    pub observed_fwgap: Option<usize>,
    pub bound_fwgap: u64,
    pub delta0: f64,
}

impl IterationBoundCheck {
    pub fn k_eps_holds(&self) -> bool {
        self.observed_k_eps
            .is_some_and(|k| k as u64 <= self.bound_k_eps)
    }

    pub fn fwgap_holds(&self) -> bool {
        self.observed_fwgap
            .is_some_and(|k| k as u64 <= self.bound_fwgap)
    }
}

/// Compares a trace against the iteration bounds. `δ₀` is measured against
/// the reference value; the observed counts use the certified lower bound
/// `F_ref − G_ref` on `F*`, so neither side is flattered by the reference
/// error.
pub fn check_iteration_bounds(
    trace: &[TraceRecord],
    scale: f64,
    r_h: f64,
    reference: &ReferenceSolution,
    eps: f64,
    eps_gap: f64,
) -> Result<IterationBoundCheck> {
    let theta = scale - r_h;
    let delta0 = trace
        .first()
        .map(|r| r.objective - reference.value)
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    let b_eps = iteration_bounds(delta0, theta, r_h, eps)?;
    let b_gap = iteration_bounds(delta0, theta, r_h, eps_gap)?;
    let lower = reference.lower_bound();
    Ok(IterationBoundCheck {
        observed_k_eps: trace.iter().position(|r| r.objective - lower <= eps),
        bound_k_eps: b_eps.k_eps,
        observed_fwgap: trace.iter().position(|r| r.gap <= eps_gap),
        bound_fwgap: b_gap.fwgap_eps,
        delta0,
    })
}

/// Duality identity `G_k = F(x^k) + d(∇f(Ax^k))` at the given iterates,
/// within `1e−8·(1 + G_k)`.
pub fn check_duality_identity<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    iterates: &[DVector<f64>],
    trace: &[TraceRecord],
) -> Result<Check>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    let mut c = Check::new("duality_identity");
    for (x, r) in iterates.iter().zip(trace) {
        let y = p.dual_point(x)?;
        let d = p.dual_objective(&y)?;
        let err = (r.gap - d - r.objective).abs();
        c.record(err <= 1e-8 * (1.0 + r.gap), || {
            format!("k={}: |G - d - F| = {err}", r.k)
        });
    }
    Ok(c)
}

/// Runs the adaptive method and standalone mirror descent side by side for
/// `iters` steps and compares `y^k` with `∇f(Ax^k)`, entrywise relative to
/// `max(1, ‖∇f(Ax^k)‖∞)`.
pub fn check_md_equivalence<M, H>(
    p: &CompositeProblem<WeightedLogBarrier, M, H>,
    x0: &DVector<f64>,
    iters: usize,
    tol: f64,
) -> Result<Check>
where
    M: LinearMap<Output = DVector<f64>>,
    H: NonsmoothTerm,
{
    let fw = solve_fw(
        p,
        x0,
        &SolverConfig::new(StepRule::Adaptive)
            .max_iters(iters)
            .keep_iterates(true)
            .record_timing(false),
    )?;
    let y0 = p.dual_point(x0)?;
    let md_cfg = MdConfig {
        max_iters: Some(fw.iterations()),
        keep_iterates: true,
        record_timing: false,
        ..MdConfig::default()
    };
    let md = solve_md_standalone(p, &y0, x0, &md_cfg)?;
    let mut c = Check::new("mirror_descent_equivalence");
    for (k, (x, state)) in fw.iterates.iter().zip(&md.states).enumerate() {
        let y = p.dual_point(x)?;
        let err = (&y - &state.y).amax();
        let lim = tol * y.amax().max(1.0);
        c.record(err <= lim, || {
            format!("k={k}: |y_md - grad f(Ax)| = {err} > {lim}")
        });
    }
    Ok(c)
}

/// Options of the per-instance suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteOptions {
    /// Gap tolerance of the solver runs.
    pub eps: f64,
    pub max_iters: usize,
    /// Iterations compared in the duality checks.
    pub dual_iters: usize,
    pub reference_rel_gap: f64,
    pub reference_max_iters: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            max_iters: 200_000,
            dual_iters: 200,
            reference_rel_gap: 1e-9,
            reference_max_iters: 2_000_000,
        }
    }
}

fn primal_suite<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    x0: &DVector<f64>,
    opts: &SuiteOptions,
) -> Result<(VerifyReport, ReferenceSolution)>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    let mut report = VerifyReport::default();
    let reference =
        crate::oracle::reference_solve(p, x0, opts.reference_rel_gap, opts.reference_max_iters)?;
    for rule in [StepRule::Adaptive, StepRule::ExactLineSearch] {
        let cfg = SolverConfig::new(rule)
            .gap_tol(opts.eps)
            .max_iters(opts.max_iters)
            .record_timing(false);
        let out = solve_fw(p, x0, &cfg)?;
        report.extend(check_fw_trace(&out.trace, p.scale(), Some(&reference)));
        let b = check_iteration_bounds(
            &out.trace,
            p.scale(),
            p.variation_bound(),
            &reference,
            opts.eps,
            opts.eps,
        )?;
        let mut c = Check::new("fwgap_iteration_bound");
        if b.observed_fwgap.is_some() || out.iterations() as u64 >= b.bound_fwgap {
            c.record(b.fwgap_holds(), || {
                format!(
                    "first k with G <= {} is {:?}, bound {}",
                    opts.eps, b.observed_fwgap, b.bound_fwgap
                )
            });
        }
        report.extend([c]);
    }
    let short = solve_fw(
        p,
        x0,
        &SolverConfig::new(StepRule::Adaptive)
            .max_iters(opts.dual_iters)
            .keep_iterates(true)
            .record_timing(false),
    )?;
    report.extend([check_duality_identity(p, &short.iterates, &short.trace)?]);
    Ok((report, reference))
}

/// Invariant suite on one instance: trace inequalities of both step rules
/// against a reference solve, the iteration bound for the FW gap, the
/// duality identity, mirror-descent equivalence for log barriers, and the
/// barycenter gap bound for D-optimal design.
pub fn verify_instance(
    inst: &crate::instances::Instance,
    opts: &SuiteOptions,
) -> Result<VerifyReport> {
    use crate::instances::Instance;
    match inst {
        Instance::Pet(pet) => {
            let p = pet.problem()?;
            let x0 = pet.start_center();
            let (mut report, _) = primal_suite(&p, &x0, opts)?;
            report.extend([check_md_equivalence(
                &p,
                &pet.start_boundary()?,
                opts.dual_iters,
                1e-9,
            )?]);
            Ok(report)
        }
        Instance::LogInvest(li) => {
            let p = li.problem()?;
            let x0 = li.start_center();
            let (mut report, _) = primal_suite(&p, &x0, opts)?;
            report.extend([check_md_equivalence(&p, &x0, opts.dual_iters, 1e-9)?]);
            Ok(report)
        }
        Instance::Dopt(d) => {
            let p = d.problem()?;
            let x0 = d.start_center();
            let (mut report, reference) = primal_suite(&p, &x0, opts)?;
            let delta0 = p.value(&x0)? - reference.value;
            let bound = d.barycenter_gap_bound();
            let mut c = Check::new("barycenter_gap_bound");
            c.record(delta0 <= bound + 1e-6, || {
                format!("delta0 = {delta0} > n ln(m/n) = {bound}")
            });
            report.extend([c]);
            if d.knapsack.is_some() {
                let pk = d.knapsack_problem()?;
                let (rk, _) = primal_suite(&pk, &d.start_knapsack()?, opts)?;
                report.extend(rk.checks);
            }
            Ok(report)
        }
    }
}

/// The suite over a small fixed set of generated instances.
pub fn builtin_suite(opts: &SuiteOptions) -> Result<VerifyReport> {
    use crate::instances::{gen_dopt, gen_log_invest, gen_pet, Instance};
    let instances = [
        Instance::Pet(gen_pet(30, 40, 1)?),
        Instance::Pet(gen_pet(40, 40, 2)?),
        Instance::Dopt(gen_dopt(4, 20, 1, false)?),
        Instance::Dopt(gen_dopt(3, 8, 2, true)?),
        Instance::LogInvest(gen_log_invest(5, 30, 1)?),
    ];
    let mut report = VerifyReport::default();
    for inst in &instances {
        report.extend(verify_instance(inst, opts)?.checks);
    }
    Ok(report)
}

/// Relative accuracy below which the barrier identity is treated as exact
/// by [`check_conjugate_pair`].
const CONJUGATE_TOL: f64 = 1e-10;

/// `f(u) + f*(∇f(u)) = −θ` and `∇f*(∇f(u)) = u` at a probe point.
pub fn check_conjugate_pair<B: Barrier>(f: &B, u: &B::Point) -> Result<bool> {
    use crate::barrier::ConePoint;
    let y = f.gradient(u)?;
    let lhs = f.value(u)? + f.conjugate_value(&y)?;
    let back = f.conjugate_gradient(&y)?;
    let scale = 1.0 + f.value(u)?.abs() + f.theta();
    Ok((lhs + f.theta()).abs() <= CONJUGATE_TOL * scale
        && back.lincomb(1.0, u, -1.0).max_abs() <= CONJUGATE_TOL * (1.0 + u.max_abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::SimplexIndicator;
    use crate::fw_solver::Branch;
    use crate::linmap::IdentityMap;
    use crate::oracle::reference_solve;

    fn row(k: usize, objective: f64, gap: f64, dist: f64) -> TraceRecord {
        TraceRecord {
            k,
            objective,
            gap,
            dist,
            alpha: 0.5,
            branch: Branch::Interior,
            elapsed_ms: 0.0,
        }
    }

    #[test]
    fn bad_rows_are_reported() {
        let trace = vec![row(0, 1.0, 0.5, 0.1), row(1, 2.0, -0.1, 10.0)];
        let checks = check_fw_trace(&trace, 1.0, None);
        assert!(checks.iter().all(|c| !c.passed()));
        assert_eq!(
            checks[2].first_failure.as_deref(),
            Some("k=0: F rose from 1 to 2")
        );
    }

    #[test]
    fn toy_trace_passes_everything() {
        let p = CompositeProblem::new(
            WeightedLogBarrier::new(DVector::from_column_slice(&[1.0, 3.0])).unwrap(),
            IdentityMap::new(2),
            SimplexIndicator::new(2).unwrap(),
        )
        .unwrap();
        let x0 = DVector::from_column_slice(&[0.99, 0.01]);
        let r = reference_solve(&p, &x0, 1e-12, 10_000).unwrap();
        let out = solve_fw(
            &p,
            &x0,
            &SolverConfig::new(StepRule::Adaptive)
                .gap_tol(1e-6)
                .keep_iterates(true),
        )
        .unwrap();
        let mut report = VerifyReport::default();
        report.extend(check_fw_trace(&out.trace, p.scale(), Some(&r)));
        report.extend([check_duality_identity(&p, &out.iterates, &out.trace).unwrap()]);
        report.extend([check_md_equivalence(&p, &x0, 50, 1e-9).unwrap()]);
        assert!(report.passed(), "{report}");
        let b = check_iteration_bounds(&out.trace, p.scale(), 0.0, &r, 1e-3, 1e-2).unwrap();
        assert!(b.k_eps_holds() && b.fwgap_holds());
    }

    #[test]
    fn builtin_suite_passes() {
        let report = builtin_suite(&SuiteOptions::default()).unwrap();
        assert!(report.passed(), "{report}");
    }
}
