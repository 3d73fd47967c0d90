use std::collections::BTreeMap;

use pbt_core::engine::{self, PbtProtocol};
use pbt_core::io::{self, Pair};
use pbt_core::no_cloning;
use pbt_core::optimizer::{self, ResourceMode, SolverConfig};
use pbt_core::pauli::sample_haar_states;
use pbt_core::primed::{build_primed, verify_eq5, verify_twirled_failure};
use pbt_core::report::{AuditReport, RngInfo};
use pbt_core::signaling::{self, MonteCarloSummary};
use pbt_core::tensor::{CVector, StateVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::output::{emit, Artifact};
use crate::{Builtin, CliError, Context, ProtocolSource};

/// Independent Monte Carlo streams per port. Fixed so that `--parallel`
/// does not change the numbers.
const MC_CHUNKS: u64 = 8;

fn sweep<T, R, F>(parallel: bool, items: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, CliError> + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn manifest(ctx: &Context, command: &str) -> RunManifest {
    let mut m = RunManifest::new(command, ctx.tolerances.clone(), ctx.overrides.clone());
    m.param("seed", ctx.common.seed);
    m.param("samples", ctx.common.samples);
    m.param("parallel", ctx.common.parallel);
    if ctx.common.timestamp {
        m.timestamp = Some(chrono::Utc::now().to_rfc3339());
    }
    m
}

fn finish(ctx: &Context, manifest: RunManifest, artifacts: &[Artifact], passed: bool) -> Result<bool, CliError> {
    emit(manifest, artifacts, ctx.common.out.as_deref())?;
    Ok(passed)
}

fn load(source: &ProtocolSource, manifest: &mut RunManifest) -> Result<PbtProtocol, CliError> {
    let proto = match (&source.protocol, source.builtin) {
        (Some(path), _) => {
            manifest.inputs.push(path.display().to_string());
            io::read_protocol(path)?.1
        }
        (None, Some(Builtin::Bell)) => {
            if source.qubits != 1 {
                return Err(CliError::Input(format!(
                    "the built-in bell protocol teleports one qubit; got --qubits {}",
                    source.qubits
                )));
            }
            manifest.inputs.push(format!("builtin:bell:{}", source.ports));
            engine::bell_pbt_protocol(source.ports)?
        }
        (None, None) => return Err(CliError::Input("give --protocol <path> or --builtin bell".into())),
    };
    manifest.param("n", proto.qubits());
    manifest.param("N", proto.ports());
    Ok(proto)
}

fn parse_psi(ctx: &Context, proto: &PbtProtocol, spec: &str) -> Result<Vec<StateVector>, CliError> {
    let layout = proto.input_layout();
    if spec == "haar" {
        return Ok(sample_haar_states(&layout, ctx.common.samples, ctx.common.seed)?);
    }
    if let Some(k) = spec.strip_prefix("basis:") {
        let k: usize = k.parse().map_err(|_| CliError::Input(format!("--psi: `{k}` is not an index")))?;
        return Ok(vec![StateVector::basis(layout, k)?]);
    }
    let pairs: Vec<Pair> = io::parse(spec, "--psi")?;
    if pairs.len() != layout.total_dim() {
        return Err(CliError::Input(format!("--psi: expected {} amplitudes, found {}", layout.total_dim(), pairs.len())));
    }
    let v = CVector::from_iterator(pairs.len(), pairs.iter().map(|p| num_complex::Complex64::new(p[0], p[1])));
    Ok(vec![StateVector::new(layout, v)?])
}

#[derive(Serialize)]
struct BranchRow {
    outcome: usize,
    probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    port_purity: Option<f64>,
}

#[derive(Serialize)]
struct InputRun {
    psi: Vec<Pair>,
    success_probability: f64,
    branches: Vec<BranchRow>,
}

pub fn simulate(ctx: &Context, source: &ProtocolSource, psi: &str) -> Result<bool, CliError> {
    let mut m = manifest(ctx, "simulate");
    let proto = load(source, &mut m)?;
    m.param("psi", psi);
    let inputs = parse_psi(ctx, &proto, psi)?;
    let tol = &ctx.tolerances;
    let runs = sweep(ctx.common.parallel, &inputs, |psi| {
        let branches = engine::measure_with_cutoff(&proto, psi, tol.branch_cutoff)?;
        let rows = branches
            .iter()
            .map(|b| {
                let rep = if b.is_success() && b.state.is_some() {
                    Some(engine::teleport_report(b, psi, tol.purity)?)
                } else {
                    None
                };
                Ok(BranchRow {
                    outcome: b.outcome,
                    probability: b.probability,
                    fidelity: rep.as_ref().map(|r| r.fidelity),
                    port_purity: rep.as_ref().map(|r| r.port_purity),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(InputRun {
            psi: io::to_pairs(psi.amplitudes().iter().copied()),
            success_probability: engine::success_probability(&branches),
            branches: rows,
        })
    })?;
    let artifacts = [Artifact::json("simulate.json", json!({ "inputs": runs }))?];
    finish(ctx, m, &artifacts, true)
}

pub fn verify(ctx: &Context, source: &ProtocolSource) -> Result<bool, CliError> {
    let mut m = manifest(ctx, "verify");
    let proto = load(source, &mut m)?;
    let (seed, samples, tol) = (ctx.common.seed, ctx.common.samples, &ctx.tolerances);
    let mut report = AuditReport::new("verify").with_seed(seed);
    report.absorb(engine::verify_psi_independence(&proto, samples, seed, tol)?);

    let inputs = sample_haar_states(&proto.input_layout(), samples, seed)?;
    let cases: Vec<(usize, usize)> =
        (0..inputs.len()).flat_map(|i| (1..=proto.ports()).map(move |j| (i, j))).collect();
    let parts = sweep(ctx.common.parallel, &cases, |&(i, j)| {
        Ok(engine::verify_port_decomposition(&proto, &inputs[i], j, tol)?)
    })?;
    for (part, (i, _)) in parts.into_iter().zip(&cases) {
        let mut part = part;
        part.title = format!("{} (input {i})", part.title);
        report.absorb(part);
    }

    let op = no_cloning::from_protocol(&proto)?;
    report.absorb(no_cloning::verify_theorem(&op, samples, seed, tol)?);
    let passed = report.passed();
    let artifacts = [Artifact::json("verify.json", json!({ "report": report }))?];
    finish(ctx, m, &artifacts, passed)
}

pub fn prime(ctx: &Context, source: &ProtocolSource) -> Result<bool, CliError> {
    let mut m = manifest(ctx, "prime");
    let proto = load(source, &mut m)?;
    let tol = &ctx.tolerances;
    let primed = build_primed(&proto)?;
    let layout = proto.input_layout();
    let mut inputs = (0..layout.total_dim())
        .map(|l| StateVector::basis(layout.clone(), l))
        .collect::<pbt_core::Result<Vec<_>>>()?;
    inputs.extend(sample_haar_states(&layout, ctx.common.samples, ctx.common.seed)?);

    let mut report = AuditReport::new("prime").with_seed(ctx.common.seed);
    report.absorb(verify_eq5(&primed, &inputs, tol)?);
    let failures = sweep(ctx.common.parallel, &inputs, |psi| Ok(verify_twirled_failure(&primed, psi, tol)?))?;
    for f in failures {
        report.absorb(f);
    }
    let passed = report.passed();
    let artifacts = [
        Artifact::json("prime.json", json!({ "report": report }))?,
        Artifact::json("primed_protocol.json", io::primed_document(&primed))?,
    ];
    finish(ctx, m, &artifacts, passed)
}

#[derive(Serialize)]
struct PortMonteCarlo {
    port: usize,
    message: usize,
    #[serde(flatten)]
    summary: MonteCarloSummary,
}

pub fn audit_signaling(ctx: &Context, source: &ProtocolSource, rounds: usize) -> Result<bool, CliError> {
    let mut m = manifest(ctx, "audit-signaling");
    let proto = load(source, &mut m)?;
    m.param("rounds", rounds);
    let tol = &ctx.tolerances;
    let seed = ctx.common.seed;
    let primed = build_primed(&proto)?;
    let mut audit = signaling::audit_signaling(&primed, tol)?;
    audit.audit.rng = Some(RngInfo::new(seed));

    let ports: Vec<usize> = (1..=proto.ports()).collect();
    let trees = ports
        .iter()
        .map(|&j| signaling::build_tree(&primed, j, 1, tol))
        .collect::<pbt_core::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..trees.len()).flat_map(|t| (0..MC_CHUNKS).map(move |c| (t, c))).collect();
    let counts = sweep(ctx.common.parallel, &jobs, |&(t, chunk)| {
        let share = rounds / MC_CHUNKS as usize + usize::from((chunk as usize) < rounds % MC_CHUNKS as usize);
        // one seed per port so ports are independent
        Ok(signaling::simulate_rounds(&trees[t], share, seed.wrapping_add(t as u64), chunk, None)?)
    })?;
    let mut monte_carlo = Vec::new();
    for (t, tree) in trees.iter().enumerate() {
        let correct: usize = jobs.iter().zip(&counts).filter(|((tt, _), _)| *tt == t).map(|(_, c)| c).sum();
        let summary = MonteCarloSummary::new(rounds, correct, signaling::exact_rate(tree, None));
        audit.audit.at_most(&format!("Monte Carlo within 3 sigma (port {})", tree.port), "Eq.6", summary.z, 3.0);
        monte_carlo.push(PortMonteCarlo { port: tree.port, message: tree.message, summary });
    }
    let passed = audit.audit.passed();
    let artifacts = [Artifact::json("signaling.json", json!({ "signaling": audit, "monte_carlo": monte_carlo }))?];
    finish(ctx, m, &artifacts, passed)
}

pub fn optimize(
    ctx: &Context,
    n: usize,
    ports: usize,
    mode: ResourceMode,
    max_iterations: Option<usize>,
) -> Result<bool, CliError> {
    let mut m = manifest(ctx, "optimize");
    let mut cfg = SolverConfig { seed: ctx.common.seed, ..SolverConfig::default() };
    if let Some(it) = max_iterations {
        cfg.max_iterations = it;
    }
    m.param("n", n);
    m.param("N", ports);
    m.param("resource", mode);
    m.param("solver", &cfg);
    let result = optimizer::optimize(n, ports, mode, &cfg)?;
    let certify = optimizer::certify(
        &result.povm,
        &result.resource,
        n,
        ctx.common.samples,
        ctx.common.seed,
        &ctx.tolerances,
    )?;
    let mut trace = Vec::new();
    optimizer::write_trace(&result.trace, &mut trace)?;
    let passed = certify.passed();
    let artifacts = [
        Artifact::json("optimize.json", json!({ "summary": result.summary()?, "certify": certify }))?,
        Artifact::json("optimized_protocol.json", io::protocol_document(&result.protocol()?))?,
        Artifact::csv("trace.csv", String::from_utf8(trace).expect("csv is utf-8")),
    ];
    finish(ctx, m, &artifacts, passed)
}

pub fn bound_table(
    ctx: &Context,
    only_n: Option<usize>,
    max_n: usize,
    max_ports: usize,
    with_optimizer: bool,
) -> Result<bool, CliError> {
    let mut m = manifest(ctx, "bound-table");
    let (lo, hi) = match only_n {
        Some(n) => (n, n),
        None => (1, max_n),
    };
    if lo == 0 || max_ports == 0 {
        return Err(CliError::Input("n and N start at 1".into()));
    }
    m.param("n_range", [lo, hi]);
    m.param("max_ports", max_ports);
    m.param("optimize", with_optimizer);

    let mut values = BTreeMap::new();
    if with_optimizer {
        let cfg = SolverConfig { seed: ctx.common.seed, ..SolverConfig::default() };
        let cells: Vec<(usize, usize)> = (lo..=hi).flat_map(|n| (1..=max_ports).map(move |p| (n, p))).collect();
        let solved = sweep(ctx.common.parallel, &cells, |&(n, p)| {
            match optimizer::optimize(n, p, ResourceMode::Joint, &cfg) {
                Ok(r) => Ok(Some(r.p_opt)),
                Err(pbt_core::Error::MemoryCap { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })?;
        for (cell, v) in cells.into_iter().zip(solved) {
            if let Some(v) = v {
                values.insert(cell, v);
            }
        }
        m.param("solver", &cfg);
    }
    let rows: Vec<_> = signaling::bound_table(hi, max_ports, &values)?.into_iter().filter(|r| r.n >= lo).collect();
    let mut csv = Vec::new();
    signaling::write_bound_table(&rows, &mut csv)?;
    let artifacts = [Artifact::csv("bound_table.csv", String::from_utf8(csv).expect("csv is utf-8"))];
    finish(ctx, m, &artifacts, true)
}
