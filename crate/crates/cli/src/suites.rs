//! Suite runners. Each turns a [`SuiteConfig`] into a [`SuiteReport`] made of
//! flat pass/fail checks plus the full underlying reports as `details`.

use crate::config::{SuiteConfig, SuiteKind};
use crate::CliError;
use lacelab_core::bits::SiteSet;
use lacelab_core::currents::{partition_function_currents, two_point_via_currents};
use lacelab_core::diagrams::{aux_bound_sweep, verify_diagrammatic_bounds};
use lacelab_core::expansion::{lace_report, verify_through_identity, Expansion, BOUND_TOL};
use lacelab_core::greens::{check_green_asymptotics, convolution_bound_check_seeded, star_bound_check_seeded, SAMPLING_SEED};
use lacelab_core::lattice::{catalog_graph, mixed_sign_variants};
use lacelab_core::spin_oracle::{partition_function, two_point_matrix};
use lacelab_core::switching::{count_switching_sides, random_ghs_instance, random_switching_instance, verify_ghs_bk};
use lacelab_core::{Budget, Error, GraphSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

/// One assertion. `value` is absent when the check is vacuous (its bound is
/// infinite) or could not be evaluated; `note` says which.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub item: String,
    pub metric: String,
    pub value: Option<f64>,
    pub relation: Relation,
    pub limit: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn new(item: impl Into<String>, metric: &str, value: f64, relation: Relation, limit: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= limit,
            Relation::AtLeast => value >= limit,
            Relation::Equal => value == limit,
        };
        Self { item: item.into(), metric: metric.into(), value: Some(value), relation, limit, pass, note: None }
    }

    fn vacuous(item: impl Into<String>, metric: &str, relation: Relation, limit: f64, note: &str) -> Self {
        Self { item: item.into(), metric: metric.into(), value: None, relation, limit, pass: true, note: Some(note.into()) }
    }

    fn failed(item: impl Into<String>, metric: &str, relation: Relation, limit: f64, note: String) -> Self {
        Self { item: item.into(), metric: metric.into(), value: None, relation, limit, pass: false, note: Some(note) }
    }
}

/// Enumeration caps in force and the largest nominal sweeps requested.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BudgetUsage {
    pub single_cap: u64,
    pub pair_cap: u64,
    pub largest_single_sweep: f64,
    pub largest_pair_sweep: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub label: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub budget: BudgetUsage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
    pub details: Value,
}

/// Config budget, overridden by `LACELAB_BUDGET` when that is set.
pub fn budget_for(suite: &SuiteConfig) -> Budget {
    if std::env::var_os(lacelab_core::budget::BUDGET_ENV).is_some() {
        return Budget::from_env();
    }
    suite.budget.map(|b| Budget::uniform(b as u64)).unwrap_or_default()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn graphs(suite: &SuiteConfig) -> Vec<GraphSpec> {
    suite.graphs.iter().flatten().map(|g| catalog_graph(g).expect("validated graph name")).collect()
}

fn usage(budget: &Budget, graphs: &[GraphSpec]) -> BudgetUsage {
    BudgetUsage {
        single_cap: budget.single,
        pair_cap: budget.pair,
        largest_single_sweep: graphs.iter().map(GraphSpec::single_sweep_size).fold(0.0, f64::max),
        largest_pair_sweep: graphs.iter().map(GraphSpec::pair_sweep_size).fold(0.0, f64::max),
    }
}

/// Errors that end a suite: budget overruns and bad parameters. Numerical
/// breakdowns are recorded as failed checks by the callers instead.
fn hard(e: Error) -> CliError {
    match e {
        Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

pub fn run_suite(suite: &SuiteConfig, label: String) -> Result<SuiteReport, CliError> {
    let budget = budget_for(suite);
    let (checks, details, usage) = match suite.kind() {
        SuiteKind::VerifyOracle => oracle(suite, &budget)?,
        SuiteKind::VerifyLace => lace(suite, &budget)?,
        SuiteKind::VerifyThrough => through(suite, &budget)?,
        SuiteKind::VerifyBounds => bounds(suite, &budget)?,
        SuiteKind::VerifySwitching => switching(suite, &budget)?,
        SuiteKind::Greens => greens(suite)?,
        SuiteKind::CheckConv => conv(suite)?,
    };
    Ok(SuiteReport {
        suite: suite.kind().as_str().into(),
        label,
        pass: checks.iter().all(|c| c.pass),
        checks,
        budget: usage,
        runtime_s: None,
        details,
    })
}

type Outcome = (Vec<Check>, Value, BudgetUsage);

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn oracle(suite: &SuiteConfig, budget: &Budget) -> Result<Outcome, CliError> {
    let gs = graphs(suite);
    let tol = suite.tolerance.expect("default");
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for g in &gs {
        let n = g.n_sites;
        for &p in suite.p.iter().flatten() {
            let item = format!("{}@p={p}", g.name);
            let zs = partition_function(g, p, 0.0, SiteSet::full(n), budget).map_err(hard)?;
            let zc = partition_function_currents(g, p, g.all_bonds(), budget).map_err(hard)?;
            let spin = two_point_matrix(g, p, SiteSet::full(n), budget).map_err(hard)?;
            let mut worst: f64 = 0.0;
            for x in 0..n {
                for y in 0..n {
                    worst = worst.max(rel(spin[x][y], two_point_via_currents(g, p, x, y, budget).map_err(hard)?));
                }
            }
            checks.push(Check::new(item.clone(), "partition_rel", rel(zs, zc), Relation::AtMost, tol));
            checks.push(Check::new(item, "two_point_rel_max", worst, Relation::AtMost, tol));
            details.push(json!({"graph": g.name, "p": p, "z_spin": zs, "z_currents": zc, "two_point": spin}));
        }
    }
    Ok((checks, Value::Array(details), usage(budget, &gs)))
}

fn lace(suite: &SuiteConfig, budget: &Budget) -> Result<Outcome, CliError> {
    let gs = graphs(suite);
    let tol = suite.tolerance.expect("default");
    let orders = suite.orders.clone().expect("default");
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for g in &gs {
        let mut variants = vec![g.clone()];
        variants.extend(mixed_sign_variants(g, suite.mixed.expect("default")).map_err(hard)?);
        for v in &variants {
            for &p in suite.p.iter().flatten() {
                let mut ex = Expansion::new(v, p, budget).map_err(hard)?;
                for &j in &orders {
                    let r = lace_report(&mut ex, j).map_err(hard)?;
                    let item = format!("{}@p={p},j={j}", v.name);
                    checks.push(Check::new(item.clone(), "residual_max", r.residual_max, Relation::AtMost, tol));
                    for m in &r.margins {
                        checks.push(Check::new(item.clone(), &m.name, m.value, Relation::AtLeast, -BOUND_TOL));
                    }
                    details.push(to_value(&r));
                }
            }
        }
    }
    Ok((checks, Value::Array(details), usage(budget, &gs)))
}

fn subsets(n: usize, max: usize) -> impl Iterator<Item = SiteSet> {
    (0u64..(1 << n)).map(SiteSet).filter(move |a| a.len() <= max)
}

fn through(suite: &SuiteConfig, budget: &Budget) -> Result<Outcome, CliError> {
    let gs = graphs(suite);
    let tol = suite.tolerance.expect("default");
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for g in &gs {
        let n = g.n_sites;
        for &p in suite.p.iter().flatten() {
            let (mut res, mut mono, mut count) = (0.0f64, f64::INFINITY, 0usize);
            for a in subsets(n, suite.max_a.expect("default")) {
                for v in 0..n {
                    for x in 0..n {
                        let c = verify_through_identity(g, p, a, v, x, budget).map_err(hard)?;
                        res = res.max(c.residual);
                        mono = mono.min(c.lhs);
                        count += 1;
                    }
                }
            }
            let item = format!("{}@p={p}", g.name);
            checks.push(Check::new(item.clone(), "residual_max", res, Relation::AtMost, tol));
            if g.is_ferromagnetic() {
                checks.push(Check::new(item, "monotonicity_min", mono, Relation::AtLeast, -BOUND_TOL));
            }
            details.push(json!({"graph": g.name, "p": p, "cases": count, "residual_max": res, "monotonicity_min": mono}));
        }
    }
    Ok((checks, Value::Array(details), usage(budget, &gs)))
}

fn bounds(suite: &SuiteConfig, budget: &Budget) -> Result<Outcome, CliError> {
    let gs = graphs(suite);
    let tol = suite.tolerance.expect("default");
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for g in &gs {
        for &p in suite.p.iter().flatten() {
            for &j in suite.orders.iter().flatten() {
                let item = format!("{}@p={p},j={j}", g.name);
                match verify_diagrammatic_bounds(g, p, j, budget) {
                    Ok(r) => {
                        checks.push(match r.min_margin {
                            Some(m) => Check::new(item, "pi_bound_margin", m, Relation::AtLeast, -tol),
                            None => Check::vacuous(item, "pi_bound_margin", Relation::AtLeast, -tol, "bubble series diverges"),
                        });
                        details.push(to_value(&r));
                    }
                    Err(e @ (Error::Diverged { .. } | Error::SeriesTruncation { .. })) => {
                        checks.push(Check::failed(item, "pi_bound_margin", Relation::AtLeast, -tol, e.to_string()));
                    }
                    Err(e) => return Err(hard(e)),
                }
            }
            let item = format!("{}@p={p}", g.name);
            match aux_bound_sweep(g, p, suite.max_a.expect("default"), budget) {
                Ok(r) => {
                    for m in &r.worst {
                        checks.push(Check::new(item.clone(), &m.name, m.value, Relation::AtLeast, -tol));
                    }
                    for name in &r.vacuous {
                        checks.push(Check::vacuous(item.clone(), name, Relation::AtLeast, -tol, "bubble series diverges"));
                    }
                    details.push(to_value(&r));
                }
                Err(e @ (Error::Diverged { .. } | Error::SeriesTruncation { .. })) => {
                    checks.push(Check::failed(item, "aux_bounds", Relation::AtLeast, -tol, e.to_string()));
                }
                Err(e) => return Err(hard(e)),
            }
        }
    }
    Ok((checks, Value::Array(details), usage(budget, &gs)))
}

fn switching(suite: &SuiteConfig, budget: &Budget) -> Result<Outcome, CliError> {
    let seed = suite.seed.expect("default");
    let max_edges = suite.max_edges.expect("default");
    if max_edges == 0 {
        return Err(CliError::Config("verify-switching: max_edges must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for i in 0..suite.instances.expect("default") {
        let inst = random_switching_instance(&mut rng, max_edges);
        let c = count_switching_sides(&inst.current, inst.a, inst.v, inst.x, None, budget).map_err(hard)?;
        checks.push(Check::new(format!("switching#{i}"), "lhs", c.lhs as f64, Relation::Equal, c.rhs as f64));
        details.push(json!({"kind": "switching", "instance": inst, "counts": c}));
    }
    for (k, count) in [(1, suite.ghs_k1.expect("default")), (2, suite.ghs_k2.expect("default"))] {
        for i in 0..count {
            let inst = random_ghs_instance(&mut rng, k, max_edges);
            let c = verify_ghs_bk(&inst.current, inst.vset, &inst.pairs, budget).map_err(hard)?;
            checks.push(Check::new(format!("ghs_k{k}#{i}"), "s", c.s as f64, Relation::Equal, c.s_prime as f64));
            details.push(json!({"kind": format!("ghs_k{k}"), "instance": inst, "counts": c}));
        }
    }
    let usage = BudgetUsage {
        single_cap: budget.single,
        pair_cap: budget.pair,
        largest_single_sweep: 3f64.powi(max_edges as i32),
        largest_pair_sweep: 0.0,
    };
    Ok((checks, Value::Array(details), usage))
}

fn greens(suite: &SuiteConfig) -> Result<Outcome, CliError> {
    let (d, side, window, tol) = (suite.d.expect("default"), suite.side.expect("default"), suite.window.expect("default"), suite.tolerance.expect("default"));
    let r = check_green_asymptotics(d, side, 1.0, window).map_err(hard)?;
    let item = format!("d={d},M={side},|x| in [{}, {}]", window.0, window.1);
    let checks = vec![Check::new(item, "max_relative_deviation", r.max_deviation, Relation::AtMost, tol)];
    Ok((checks, to_value(&r), BudgetUsage::default()))
}

fn conv(suite: &SuiteConfig) -> Result<Outcome, CliError> {
    let tol = suite.tolerance.expect("default");
    let seed = suite.seed.unwrap_or(SAMPLING_SEED);
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for c in suite.conv.iter().flatten() {
        let r = convolution_bound_check_seeded(c.d, c.a, c.b, &c.boxes, seed).map_err(hard)?;
        checks.push(Check::new(format!("conv d={},a={},b={},boxes={:?}", c.d, c.a, c.b, c.boxes), "growth", r.growth, Relation::AtMost, tol));
        details.push(json!({"kind": "conv", "a": c.a, "b": c.b, "report": r}));
    }
    for c in suite.star.iter().flatten() {
        let r = star_bound_check_seeded(c.d, c.q, &c.boxes, seed).map_err(hard)?;
        checks.push(Check::new(format!("star d={},q={},boxes={:?}", c.d, c.q, c.boxes), "growth", r.growth, Relation::AtMost, tol));
        details.push(json!({"kind": "star", "q": c.q, "report": r}));
    }
    Ok((checks, Value::Array(details), BudgetUsage::default()))
}
