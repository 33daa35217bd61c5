//! Identity checks on solver outputs and a seeded randomized suite.
//!
//! Random instances follow one documented distribution:
//!
//! * `m` uniform in `1..=6` functionals;
//! * a union support of `n` indices, `n` uniform in `max(3, m)..=40`, drawn
//!   without replacement from `0..4n`;
//! * every entry standard normal, kept with probability 0.6, with each
//!   index used by at least one row and each row nonempty;
//! * rows whose two largest magnitudes are within a relative `1e-6`, and
//!   operators with smallest singular value below `1e-3`, are redrawn;
//! * data `y` standard normal.
//!
//! The tie-stress generator instead draws entries from `{-2, -1, 1, 2}` so
//! that several coordinates attain the sup-norm of `L*(c)`.

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::face_indices;
use crate::duality::FACE_REL_TOL;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::lp::{basis_pursuit, dual_inf_norm_lp};
use crate::mni::{infimum_report, solve_mni_hilbert, solve_mni_l1, solve_mni_lp_space, IterationConfig};
use crate::sampling::SamplingOperator;
use crate::seq::{SpaceTag, SparseSeq};

/// Tolerance of [`check_peak_functional`].
pub const PEAK_TOL: f64 = 1e-8;
/// Tolerance of [`check_duality_infimum`].
pub const DUALITY_TOL: f64 = 1e-7;

/// Outcome of a single identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub details: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, violation: f64, tol: f64, details: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            passed: violation <= tol,
            max_violation: violation,
            details: details.into(),
        }
    }

    fn failure(name: &str, err: &Error) -> Self {
        CheckReport {
            name: name.into(),
            passed: false,
            max_violation: f64::MAX,
            details: format!("solver failed: {err}"),
        }
    }
}

/// `nu = L*(coefs)` peaks at `x`: `<nu, x> = ||nu||_dual ||x||_space`.
///
/// The violation is relative to `max(1, ||nu|| ||x||)`.
pub fn check_peak_functional(
    space: SpaceTag,
    op: &SamplingOperator,
    coefs: &[f64],
    x: &SparseSeq,
) -> Result<CheckReport> {
    space.validate()?;
    let nu = op.adjoint(coefs)?;
    if nu.is_empty() {
        return Err(Error::Degenerate("L*(coefs) is the zero functional".into()));
    }
    let bound = nu.norm(space.dual_norm())? * x.norm(space.norm())?;
    let violation = (nu.inner(x) - bound).abs() / bound.max(1.0);
    Ok(CheckReport::new(
        "peak_functional",
        violation,
        PEAK_TOL,
        format!(
            "<L*(c), x> equals ||L*(c)||_dual * ||x|| in {} (relative gap)",
            space.name()
        ),
    ))
}

/// The optimal value equals the dual-side expression of the coefficients:
/// `||L*(c)||_q` for lp, `sqrt(c^T G c)` for Hilbert. For l1, `coefs` is
/// the normalized dual vector and the check is
/// `objective * ||L*(c_hat)||_inf = 1`.
pub fn check_duality_infimum(
    space: SpaceTag,
    op: &SamplingOperator,
    primal_objective: f64,
    coefs: &[f64],
) -> Result<CheckReport> {
    let inf = infimum_report(op, coefs, space)?;
    let (violation, details) = match space {
        SpaceTag::L1 => (
            (primal_objective / inf - 1.0).abs(),
            "||x||_1 * ||L*(c_hat)||_inf = 1 for the dual-optimal c_hat",
        ),
        _ => ((primal_objective - inf).abs(), "||x|| equals the dual norm of L*(c)"),
    };
    Ok(CheckReport::new("duality_infimum", violation, DUALITY_TOL, details))
}

/// Every support index of `x` attains the sup-norm of `L*(c)`.
///
/// The violation is the largest `|x_j|` off the maximal set (zero when the
/// inclusion holds).
pub fn check_support_inclusion(x: &SparseSeq, c: &[f64], op: &SamplingOperator) -> Result<CheckReport> {
    let face = face_indices(&op.adjoint(c)?, FACE_REL_TOL);
    let violation = x
        .iter()
        .filter(|(j, _)| face.binary_search(j).is_err())
        .fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
    Ok(CheckReport::new(
        "support_inclusion",
        violation,
        0.0,
        "supp(x) lies in the index set where |L*(c)| attains its maximum",
    ))
}

/// A generated interpolation instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteInstance {
    pub id: usize,
    pub op: SamplingOperator,
    pub y: Vec<f64>,
}

fn instance_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn distinct_top(row: &SparseSeq) -> bool {
    let mut mags: Vec<f64> = row.iter().map(|(_, v)| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.len() < 2 || mags[1] < (1.0 - 1e-6) * mags[0]
}

fn draw_operator(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    value: &mut dyn FnMut(&mut ChaCha8Rng) -> f64,
) -> SamplingOperator {
    let mut pool = index::sample(rng, 4 * n, n).into_vec();
    pool.sort_unstable();
    let mut dense = vec![vec![0.0; n]; m];
    for row in dense.iter_mut() {
        for v in row.iter_mut() {
            if rng.random_bool(0.6) {
                *v = value(rng);
            }
        }
    }
    for k in 0..n {
        if dense.iter().all(|r| r[k] == 0.0) {
            let j = rng.random_range(0..m);
            dense[j][k] = value(rng);
        }
    }
    for row in dense.iter_mut() {
        if row.iter().all(|&v| v == 0.0) {
            let k = rng.random_range(0..n);
            row[k] = value(rng);
        }
    }
    let rows = dense.iter().map(|r| SparseSeq::from_dense_at(&pool, r)).collect();
    SamplingOperator::new(rows).expect("m >= 1")
}

/// Deterministic random instance `id` for `seed` (distribution in the
/// module docs).
pub fn random_instance(seed: u64, id: usize) -> SuiteInstance {
    let mut rng = instance_rng(seed, id);
    loop {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(m.max(3)..=40);
        let op = draw_operator(&mut rng, m, n, &mut normal);
        if !op.rows().iter().all(distinct_top) || op.smallest_singular_value() < 1e-3 {
            continue;
        }
        let y = (0..m).map(|_| normal(&mut rng)).collect();
        return SuiteInstance { id, op, y };
    }
}

/// Like [`random_instance`] but with entries in `{-2, -1, 1, 2}` and
/// integer data, so that maximal sets of `L*(c)` often contain ties.
pub fn tie_stress_instance(seed: u64, id: usize) -> SuiteInstance {
    let mut rng = instance_rng(seed ^ 0x7469_6573, id);
    let mut level = |r: &mut ChaCha8Rng| [-2.0, -1.0, 1.0, 2.0][r.random_range(0..4)];
    loop {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(m.max(3)..=12);
        let op = draw_operator(&mut rng, m, n, &mut level);
        if op.smallest_singular_value() < 1e-3 {
            continue;
        }
        let y: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(-3i32..=3))).collect();
        if y.iter().all(|&v| v == 0.0) {
            continue;
        }
        return SuiteInstance { id, op, y };
    }
}

/// Instances `0..count` for `seed`.
pub fn generate_instances(seed: u64, count: usize) -> Vec<SuiteInstance> {
    (0..count).map(|id| random_instance(seed, id)).collect()
}

/// Options of [`run_suite`].
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub cfg: IterationConfig,
    /// Exponents for the lp checks.
    pub lp_exponents: Vec<f64>,
    /// Random null-space directions per instance for the Hilbert check.
    pub null_directions: usize,
    /// Seed for the null-space directions.
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            cfg: IterationConfig::default(),
            lp_exponents: vec![1.5, 3.0, 4.0],
            null_directions: 10,
            seed: 0,
        }
    }
}

/// One line of the suite output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub instance: usize,
    #[serde(flatten)]
    pub check: CheckReport,
}

fn named(mut r: CheckReport, prefix: &str) -> CheckReport {
    r.name = format!("{prefix}.{}", r.name);
    r
}

fn l1_checks(inst: &SuiteInstance, cfg: &IterationConfig) -> Result<Vec<CheckReport>> {
    let (op, y) = (&inst.op, &inst.y);
    let prox = solve_mni_l1(op, y, cfg)?;
    let bp = basis_pursuit(op, y)?;
    let dual = dual_inf_norm_lp(op, y)?;
    let fp = prox.fixed_point_residual.unwrap_or(f64::INFINITY);
    let mut out = vec![
        CheckReport::new(
            "l1.oracle_equivalence",
            (prox.objective - bp.objective).abs(),
            1e-7,
            "proximal objective equals the simplex basis-pursuit objective",
        ),
        named(
            check_duality_infimum(SpaceTag::L1, op, prox.objective, &dual.c_hat)?,
            "l1",
        ),
        CheckReport::new(
            "l1.fixed_point",
            if prox.converged { fp } else { f64::INFINITY },
            1e-7,
            "truncated fixed-point residuals of the converged pair",
        ),
        named(check_support_inclusion(&prox.solution, &prox.coefs, op)?, "l1"),
    ];
    out.push(named(
        check_peak_functional(SpaceTag::L1, op, &dual.c_hat, &prox.solution)?,
        "l1",
    ));
    Ok(out)
}

/// Unit directions `z` with `L(z) = 0`: Gaussian vectors on the union
/// support plus two fresh coordinates, projected onto the null space.
fn null_directions(op: &SamplingOperator, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SparseSeq>> {
    let d = op.dense();
    let a = &d.matrix;
    let gram = a * a.transpose();
    let fresh = d.indices.last().map_or(0, |&i| i + 1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z = DVector::from_fn(d.n(), |_, _| normal(rng));
        let w = solve_spd(&gram, &(a * &z))?;
        let projected = z - a.tr_mul(&w);
        let mut seq = d.to_seq(&projected);
        let extra = SparseSeq::from_dense_at(&[fresh, fresh + 1], &[normal(rng), normal(rng)]);
        seq = SparseSeq::combine(1.0, &seq, 1.0, &extra);
        let norm = seq.norm_lp(2.0);
        out.push(seq.scale(1.0 / norm));
    }
    Ok(out)
}

fn hilbert_checks(inst: &SuiteInstance, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let (op, y) = (&inst.op, &inst.y);
    let r = solve_mni_hilbert(op, y)?;
    let mut rng = instance_rng(opts.seed ^ 0x6e75_6c6c, inst.id);
    let dirs = null_directions(op, opts.null_directions, &mut rng)?;
    let ortho = dirs.iter().fold(0.0_f64, |m, z| m.max(r.solution.inner(z).abs()));
    let mut out = vec![
        CheckReport::new(
            "hilbert.interpolation",
            r.interp_residual,
            1e-10,
            "||L(x) - y||_inf for the Gram-system solution",
        ),
        CheckReport::new(
            "hilbert.null_orthogonality",
            ortho,
            1e-9,
            "|<x, z>| for unit z with L(z) = 0",
        ),
        named(
            check_duality_infimum(SpaceTag::Hilbert, op, r.objective, &r.coefs)?,
            "hilbert",
        ),
    ];
    out.push(named(
        check_peak_functional(SpaceTag::Hilbert, op, &r.coefs, &r.solution)?,
        "hilbert",
    ));
    Ok(out)
}

fn lp_checks(inst: &SuiteInstance, p: f64, cfg: &IterationConfig) -> Result<Vec<CheckReport>> {
    let (op, y) = (&inst.op, &inst.y);
    let space = SpaceTag::Lp(p);
    let r = solve_mni_lp_space(op, y, p, cfg)?;
    let prefix = format!("lp{p}");
    Ok(vec![
        CheckReport::new(
            format!("{prefix}.interpolation"),
            r.interp_residual,
            1e-8,
            "||L(x) - y||_inf for the duality-map solution",
        ),
        named(check_duality_infimum(space, op, r.objective, &r.coefs)?, &prefix),
        named(check_peak_functional(space, op, &r.coefs, &r.solution)?, &prefix),
    ])
}

fn run_instance(inst: &SuiteInstance, opts: &SuiteOptions) -> Vec<SuiteEntry> {
    let mut checks = Vec::new();
    let mut collect = |label: &str, r: Result<Vec<CheckReport>>| match r {
        Ok(v) => checks.extend(v),
        Err(e) => checks.push(CheckReport::failure(label, &e)),
    };
    collect("l1", l1_checks(inst, &opts.cfg));
    collect("hilbert", hilbert_checks(inst, opts));
    for &p in &opts.lp_exponents {
        collect(&format!("lp{p}"), lp_checks(inst, p, &opts.cfg));
    }
    checks
        .into_iter()
        .map(|check| SuiteEntry {
            instance: inst.id,
            check,
        })
        .collect()
}

/// Runs every check on every instance (in parallel) and returns the
/// reports sorted by instance id, in a fixed check order per instance.
pub fn run_suite(instances: &[SuiteInstance], opts: &SuiteOptions) -> Vec<SuiteEntry> {
    let mut per: Vec<(usize, Vec<SuiteEntry>)> = instances
        .par_iter()
        .map(|inst| (inst.id, run_instance(inst, opts)))
        .collect();
    per.sort_by_key(|(id, _)| *id);
    per.into_iter().flat_map(|(_, v)| v).collect()
}

/// Serializes entries as JSON lines.
pub fn to_json_lines(entries: &[SuiteEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).map_err(|err| Error::Parse(err.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Count of passed and failed checks.
pub fn summarize(entries: &[SuiteEntry]) -> (usize, usize) {
    let passed = entries.iter().filter(|e| e.check.passed).count();
    (passed, entries.len() - passed)
}
