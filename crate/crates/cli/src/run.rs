//! Dispatch of a [`RunConfig`] to the experiment harness and oracles.

use std::collections::BTreeMap;

use erwlab_core::harness::{
    self, AvoidOriginParams, BlockParams, Cell, CouplingParams, Estimate, ExperimentParams, ExperimentReport,
    ExperimentSpec, HittingParams, SpeedParams, VisitTailParams,
};
use erwlab_core::lattice::LatticePoint;
use erwlab_core::oracles;
use serde_json::json;

use crate::config::{RunConfig, Subcommand};
use crate::CliError;

/// What gets emitted: a row table plus summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub estimates: BTreeMap<String, Estimate>,
    pub details: serde_json::Value,
    pub warnings: Vec<String>,
}

impl From<ExperimentReport> for Output {
    fn from(r: ExperimentReport) -> Self {
        Output { header: r.header, rows: r.rows, estimates: r.estimates, details: r.details, warnings: r.warnings }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn experiment_spec(c: &RunConfig) -> Option<ExperimentSpec> {
    let params = match c.subcommand {
        Subcommand::Speed => {
            ExperimentParams::Speed(SpeedParams { epsilon: c.epsilon?, n: c.n?, half_space: c.half_space })
        }
        Subcommand::Holes => ExperimentParams::Holes { n: c.n?, m: c.m? },
        Subcommand::Visits => ExperimentParams::VisitTail(VisitTailParams { r: c.r?, n_domain: c.n? as f64 }),
        Subcommand::Hitting => ExperimentParams::Hitting(HittingParams { r: c.r? }),
        Subcommand::AvoidOrigin => {
            ExperimentParams::AvoidOrigin(AvoidOriginParams { k_list: c.k.clone()?, multiplier: c.multiplier? })
        }
        Subcommand::Blocks => {
            ExperimentParams::Blocks(BlockParams { epsilon: c.epsilon?, n: c.n?, drift_ref: c.drift_ref? })
        }
        Subcommand::Coupling => ExperimentParams::CouplingAudit(CouplingParams { epsilon: c.epsilon?, n: c.n? }),
        Subcommand::Alpha | Subcommand::Oracle => return None,
    };
    Some(ExperimentSpec { params, reps: c.reps?, seed: c.seed?, workers: c.workers?, level: c.level? })
}

pub fn execute(c: &RunConfig) -> Result<Output, CliError> {
    match c.subcommand {
        Subcommand::Alpha => alpha(c),
        Subcommand::Oracle => oracle(c),
        _ => {
            let spec = experiment_spec(c).ok_or_else(|| CliError::Usage("incomplete configuration".into()))?;
            let report = harness::run_experiment(&spec, c.checkpoint.as_deref()).map_err(|e| match e {
                harness::HarnessError::InvalidParams(_) | harness::HarnessError::Walk(_) => CliError::Usage(e.to_string()),
                other => runtime(other),
            })?;
            Ok(report.into())
        }
    }
}

fn alpha(c: &RunConfig) -> Result<Output, CliError> {
    let (lambda, base_n, base_alpha, top_n) = (c.lambda.unwrap(), c.base_n.unwrap(), c.base_alpha.unwrap(), c.top_n.unwrap());
    let s = oracles::alpha_schedule(base_n, base_alpha, lambda, top_n).map_err(runtime)?;
    let rows = s
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| vec![Cell::from(i), l.n.into(), l.k.into(), l.ratio.into(), l.alpha.into()])
        .collect();
    Ok(Output {
        header: ["level", "n", "k", "ratio", "alpha"].map(String::from).to_vec(),
        rows,
        estimates: BTreeMap::new(),
        details: json!({ "inf_alpha": s.inf_alpha, "floor_n": s.floor_n, "levels": s.levels.len() }),
        warnings: vec![],
    })
}

/// Lattice points whose potential kernel is reported by `oracle`.
pub const KERNEL_POINTS: [(i64, i64); 6] = [(1, 0), (1, 1), (2, 0), (3, 4), (10, 0), (20, 20)];

fn oracle(c: &RunConfig) -> Result<Output, CliError> {
    let text = |s: String| Cell::Text(s);
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let kappa = oracles::potential_kernel_constant();
    rows.push(vec![text("kappa".into()), text(String::new()), kappa.into()]);
    let table = oracles::PotentialKernelTable::new(40);
    let mut kernel = Vec::new();
    for (x, y) in KERNEL_POINTS {
        let exact = table.value(x, y).unwrap();
        let asym = oracles::potential_kernel_asymptotic(&LatticePoint::xy(x, y)).map_err(runtime)?;
        rows.push(vec![text("potential_kernel_exact".into()), text(format!("({x};{y})")), exact.into()]);
        rows.push(vec![text("potential_kernel_asymptotic".into()), text(format!("({x};{y})")), asym.into()]);
        kernel.push(json!({ "x": x, "y": y, "exact": exact, "asymptotic": asym }));
    }
    let mut hit = serde_json::Value::Null;
    if let Some(r) = c.r {
        let start = LatticePoint::xy(r.round() as i64, 0);
        let p = oracles::exact_hit_probability(&start, r).map_err(runtime)?;
        let asym = std::f64::consts::LN_2 / r.ln();
        rows.push(vec![text("exact_hit_probability".into()), text(format!("r={r}")), p.into()]);
        rows.push(vec![text("asymptotic_hit_probability".into()), text(format!("r={r}")), asym.into()]);
        hit = json!({ "r": r, "start": [start.coord(0), 0], "p_exact": p, "p_asym": asym });
    }
    let mut ns: Vec<u64> = vec![1_000, 1_000_000, 1_000_000_000, 1_000_000_000_000];
    if let Some(n) = c.n {
        ns = vec![n];
    }
    let mut blocks = Vec::new();
    for n in ns {
        let k = oracles::block_size(n).map_err(|e| CliError::Usage(e.to_string()))?;
        rows.push(vec![text("block_size".into()), text(format!("n={n}")), k.into()]);
        blocks.push(json!({ "n": n, "k": k }));
    }
    Ok(Output {
        header: ["quantity", "argument", "value"].map(String::from).to_vec(),
        rows,
        estimates: BTreeMap::new(),
        details: json!({
            "kappa": kappa,
            "kappa_derivation": "a(n,n) - (2/pi) ln(sqrt(2) n) at n = 1e6, a(n,n) = (4/pi) sum_{j<=n} 1/(2j-1)",
            "potential_kernel": kernel,
            "hit": hit,
            "block_sizes": blocks,
        }),
        warnings: vec![],
    })
}
