//! Batch driver: one TOML experiment config in, a JSON report (and optional
//! tab-separated plot data) out.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use multiport::bounds::divisibility_witness_for;
use multiport::classical::MonteCarlo;
use multiport::ingestion::read_records;
use multiport::interferometer::{validate_transfer, ComplexMatrix};
use multiport::optimizer::{check_trace_inequalities, minimize, MinimizeOptions};
use multiport::quantum::FockOracle;
use multiport::sources::{ClassicalSpec, OverlapMatrix, PhotonSpec};
use multiport::{
    classical_min, direct_sum, divisibility_threshold, estimate_gbar_from_records, ftm,
    random_unitary, symmetric_quantum_min, ClassicalSetup, CorrelationReport, QuantumSetup,
    UnitaryMatrix, WitnessRule, WitnessVerdict,
};
use serde_json::{json, Value};

pub use config::ExperimentConfig;
use config::{Detectors, InterferometerSpec, Mode, QuantumEngine, WitnessTest};

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("engine error: {0}")]
    Engine(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Dimension(_) => 3,
            CliError::Engine(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    /// Classifies a library error raised while building the setup.
    fn setup(e: multiport::Error) -> Self {
        use multiport::Error as E;
        match e {
            E::InvalidDimension(_) | E::IndexOutOfRange { .. } | E::DegenerateSetup { .. } => CliError::Dimension(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }

    /// Classifies a library error raised by an engine.
    fn engine(e: multiport::Error) -> Self {
        use multiport::Error as E;
        match e {
            E::InvalidDimension(_) | E::IndexOutOfRange { .. } => CliError::Dimension(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Engine(e.to_string()),
        }
    }
}

/// Everything a run produces; nothing is written until the run succeeded.
#[derive(Debug, Clone)]
pub struct Output {
    pub summary: String,
    pub document: Value,
    pub table: Option<String>,
    /// Optimizer convergence trace (TSV), shown in verbose mode.
    pub trace: Option<String>,
}

impl Output {
    pub fn document_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.document).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Context for resolving relative paths in a config.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub base_dir: PathBuf,
    pub verbose: bool,
}

impl RunContext {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read(&self, p: &Path) -> Result<String, CliError> {
        let path = self.resolve(p);
        std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn build_matrix(spec: &InterferometerSpec, ctx: &RunContext) -> Result<ComplexMatrix, CliError> {
    match spec {
        InterferometerSpec::Ftm { size } => Ok(ftm(*size).map_err(CliError::setup)?.into_complex()),
        InterferometerSpec::Random { size, seed } => Ok(random_unitary(*size, *seed).map_err(CliError::setup)?.into_complex()),
        InterferometerSpec::File { path } => ComplexMatrix::from_text(&ctx.read(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        InterferometerSpec::DirectSum { blocks } => {
            let mut iter = blocks.iter();
            let first = iter.next().ok_or_else(|| CliError::Config("direct-sum needs at least one block".into()))?;
            let mut acc = build_unitary(first, ctx)?;
            for b in iter {
                acc = direct_sum(&acc, &build_unitary(b, ctx)?);
            }
            Ok(acc.into_complex())
        }
    }
}

fn build_unitary(spec: &InterferometerSpec, ctx: &RunContext) -> Result<UnitaryMatrix, CliError> {
    let m = build_matrix(spec, ctx)?;
    if m.rows() != m.cols() {
        return Err(CliError::Dimension(format!("unitary must be square, got {}x{}", m.rows(), m.cols())));
    }
    UnitaryMatrix::new(m).map_err(CliError::setup)
}

fn interferometer(config: &ExperimentConfig) -> Result<&InterferometerSpec, CliError> {
    config
        .interferometer
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("mode {:?} needs an [interferometer] section", config.mode)))
}

fn detector_list(config: &ExperimentConfig, outputs: usize) -> Result<Vec<usize>, CliError> {
    match &config.detectors {
        Detectors::All(_) => Ok((0..outputs).collect()),
        Detectors::List(list) => {
            if let Some(&bad) = list.iter().find(|&&d| d >= outputs) {
                return Err(CliError::Dimension(format!("detector {bad} out of range for {outputs} outputs")));
            }
            Ok(list.clone())
        }
    }
}

struct ClassicalPlan {
    setup: ClassicalSetup,
    detectors: Vec<usize>,
    physical: bool,
}

fn classical_plan(config: &ExperimentConfig, ctx: &RunContext) -> Result<ClassicalPlan, CliError> {
    let full = build_matrix(interferometer(config)?, ctx)?;
    let specs: Vec<ClassicalSpec> = config.expand_sources()?;
    if specs.len() != full.cols() {
        return Err(CliError::Dimension(format!(
            "transfer matrix has {} input columns, {} sources given",
            full.cols(),
            specs.len()
        )));
    }
    let detectors = detector_list(config, full.rows())?;
    let mut unique = detectors.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != detectors.len() {
        return Err(CliError::Config("detector list contains duplicates".into()));
    }
    let entries: Vec<_> = detectors.iter().flat_map(|&i| (0..full.cols()).map(move |a| (i, a))).map(|(i, a)| full.get(i, a)).collect();
    let transfer = ComplexMatrix::from_row_major(detectors.len(), full.cols(), &entries).map_err(CliError::setup)?;
    let physical = validate_transfer(full.as_matrix()).map_err(CliError::setup)?.is_physical();
    let sources = specs.iter().map(|s| s.build()).collect::<Result<Vec<_>, _>>().map_err(CliError::setup)?;
    let mut setup = ClassicalSetup::new(transfer, sources).map_err(CliError::setup)?.with_energy_scale(config.energy_scale).map_err(CliError::setup)?;
    if let Some(path) = &config.overlap {
        let m = ComplexMatrix::from_text(&ctx.read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if m.rows() != specs.len() || m.cols() != specs.len() {
            return Err(CliError::Dimension(format!("overlap matrix is {}x{}, expected {n}x{n}", m.rows(), m.cols(), n = specs.len())));
        }
        setup = setup.with_overlap(OverlapMatrix::from_matrix(&m).map_err(CliError::setup)?).map_err(CliError::setup)?;
    }
    Ok(ClassicalPlan { setup, detectors, physical })
}

fn quantum_setup(config: &ExperimentConfig, ctx: &RunContext) -> Result<QuantumSetup, CliError> {
    let u = build_unitary(interferometer(config)?, ctx)?;
    let specs: Vec<PhotonSpec> = config.expand_sources()?;
    if specs.len() > u.dim() {
        return Err(CliError::Dimension(format!("{} sources for a {}-mode interferometer", specs.len(), u.dim())));
    }
    let stats = specs.iter().map(|s| s.build()).collect::<Result<Vec<_>, _>>().map_err(CliError::setup)?;
    let detectors = detector_list(config, u.dim())?;
    QuantumSetup::new(u, stats)
        .and_then(|s| s.with_detectors(detectors))
        .and_then(|s| s.with_energy_scale(config.energy_scale))
        .map_err(CliError::setup)
}

fn rule(config: &ExperimentConfig) -> Result<WitnessRule, CliError> {
    if !(config.sigmas.is_finite() && config.sigmas >= 0.0) {
        return Err(CliError::Config(format!("sigmas must be a nonnegative number, got {}", config.sigmas)));
    }
    Ok(WitnessRule { sigmas: config.sigmas })
}

fn relabel(mut report: CorrelationReport, detectors: &[usize]) -> CorrelationReport {
    report.detectors = detectors.to_vec();
    report.active_detectors = report.active_detectors.iter().map(|&k| detectors[k]).collect();
    for p in &mut report.pair_ratios {
        p.i = detectors[p.i];
        p.j = detectors[p.j];
    }
    report
}

fn report_summary(out: &mut String, report: &CorrelationReport) {
    let _ = write!(out, "Ḡ = {:.9}", report.gbar);
    if let Some(se) = report.stderr {
        let _ = write!(out, " ± {se:.3e}");
    }
    let _ = writeln!(out, " ({}, {} active detectors)", report.provenance, report.active_detectors.len());
}

fn verdict_json(v: &WitnessVerdict, test: &str, extra: Value) -> Value {
    let mut obj = serde_json::to_value(v).expect("verdict serializes");
    obj["test"] = json!(test);
    obj["certified"] = json!(v.certified());
    if let (Value::Object(o), Value::Object(e)) = (&mut obj, extra) {
        o.extend(e);
    }
    obj
}

fn correlation_output(report: CorrelationReport, sources: usize, rule: &WitnessRule, extra: Value) -> Result<(String, Value, String), CliError> {
    let m = report.active_detectors.len();
    let verdict = rule.nonclassicality(report.gbar, sources.max(1), m, report.stderr).map_err(CliError::engine)?;
    let mut summary = String::new();
    report_summary(&mut summary, &report);
    let _ = writeln!(summary, "nonclassicality (N = {}, M = {m}): {}", sources.max(1), verdict.summary());
    let table = report.to_table();
    let mut result = json!({
        "report": report,
        "verdict": verdict_json(&verdict, "nonclassicality", json!({"sources": sources.max(1), "detectors": m})),
    });
    if let (Value::Object(o), Value::Object(e)) = (&mut result, extra) {
        o.extend(e);
    }
    Ok((summary, result, table))
}

/// Executes one configuration. Paths in `config` are resolved against
/// `ctx.base_dir`.
pub fn run(config: &ExperimentConfig, ctx: &RunContext) -> Result<Output, CliError> {
    if !(config.energy_scale.is_finite() && config.energy_scale > 0.0) {
        return Err(CliError::Config(format!("energy_scale must be positive, got {}", config.energy_scale)));
    }
    let rule = rule(config)?;
    let mut trace = None;
    let (summary, result, table) = match config.mode {
        Mode::ClassicalAnalytic | Mode::ClassicalMc => {
            let plan = classical_plan(config, ctx)?;
            let report = if config.mode == Mode::ClassicalMc {
                MonteCarlo::new(config.shots, config.seed).run(&plan.setup)
            } else {
                plan.setup.gbar()
            }
            .map_err(CliError::engine)?;
            let report = relabel(report, &plan.detectors);
            let lit = plan.setup.source_moments().iter().filter(|(m2, _)| *m2 > 0.0).count();
            let (mut s, r, t) = correlation_output(report, lit, &rule, json!({"transfer_physical": plan.physical}))?;
            if !plan.physical {
                s.push_str("warning: transfer matrix has a singular value above 1 (not passive)\n");
            }
            (s, r, t)
        }
        Mode::Quantum => {
            let setup = quantum_setup(config, ctx)?;
            let report = setup.gbar().map_err(CliError::engine)?;
            correlation_output(report, setup.active_sources(), &rule, json!({}))?
        }
        Mode::Oracle => {
            let setup = quantum_setup(config, ctx)?;
            let oracle = FockOracle { limit: config.oracle_limit, energy_scale: config.energy_scale, ..FockOracle::default() };
            let (report, pruned) = oracle.gbar(&setup).map_err(CliError::engine)?;
            let (mut s, r, t) = correlation_output(report, setup.active_sources(), &rule, json!({"pruned_mass": pruned}))?;
            let _ = writeln!(s, "pruned probability mass {pruned:.3e}");
            (s, r, t)
        }
        Mode::Divisibility => {
            let setup = quantum_setup(config, ctx)?;
            let report = match config.engine {
                QuantumEngine::Quantum => setup.gbar(),
                QuantumEngine::Oracle => {
                    FockOracle { limit: config.oracle_limit, energy_scale: config.energy_scale, ..FockOracle::default() }.gbar(&setup).map(|r| r.0)
                }
            }
            .map_err(CliError::engine)?;
            let verdict = divisibility_witness_for(&setup, &rule).map_err(CliError::engine)?;
            // the oracle value replaces the closed form when requested
            let verdict = rule.judge(report.gbar, verdict.threshold, None, multiport::Classification::IndivisibleCertified);
            let eta = multiport::bounds::symmetric_eta(&setup).map_err(CliError::engine)?;
            let mut s = String::new();
            report_summary(&mut s, &report);
            let _ = writeln!(s, "divisibility (m = {}, η = {eta:.6}): {}", setup.modes(), verdict.summary());
            let table = report.to_table();
            let r = json!({
                "report": report,
                "verdict": verdict_json(&verdict, "divisibility", json!({"modes": setup.modes(), "eta": eta})),
            });
            (s, r, table)
        }
        Mode::Bounds => {
            let b = &config.bounds;
            if b.m_min < 2 || b.m_max < b.m_min {
                return Err(CliError::Config(format!("bounds range {}..={} is empty or starts below 2", b.m_min, b.m_max)));
            }
            let mut rows = Vec::new();
            let mut table = String::from("M\tclassical_min\tsymmetric_quantum_min\tdivisibility_threshold\n");
            for m in b.m_min..=b.m_max {
                let n = b.sources.unwrap_or(m);
                let c = classical_min(n, m).map_err(CliError::setup)?;
                let q = symmetric_quantum_min(m, b.eta).map_err(CliError::setup)?;
                let d = divisibility_threshold(m, b.eta).map_err(CliError::setup)?;
                let _ = writeln!(table, "{m}\t{c:.17e}\t{q:.17e}\t{d:.17e}");
                rows.push(json!({"M": m, "N": n, "classical_min": c, "symmetric_quantum_min": q, "divisibility_threshold": d}));
            }
            let mut s = format!("bounds for M = {}..={} (η = {}):\n", b.m_min, b.m_max, b.eta);
            s.push_str(&table);
            (s, json!({"rows": rows}), table)
        }
        Mode::Optimize => {
            let o = config.optimize.ok_or_else(|| CliError::Config("optimize mode needs an [optimize] section".into()))?;
            let opts = MinimizeOptions {
                max_iterations: o.max_iterations,
                trace: ctx.verbose,
                ..MinimizeOptions::new(config.restarts, config.seed)
            };
            let best = minimize(o.sources, o.detectors, &opts).map_err(CliError::setup)?;
            let bound = classical_min(o.sources, o.detectors).map_err(CliError::setup)?;
            let ineq = check_trace_inequalities(&best.config);
            let mut t = String::from("iteration\tobjective\n");
            for (k, f) in &best.trace {
                let _ = writeln!(t, "{k}\t{f:.17e}");
            }
            if ctx.verbose {
                trace = Some(t.clone());
            }
            let s = format!(
                "minimum Ḡ = {:.12} (bound {bound:.12}, gap {:+.3e}) after {} iterations of restart {}\n",
                best.value,
                best.value - bound,
                best.iterations,
                best.restart
            );
            let r = json!({"minimum": best, "bound": bound, "gap": best.value - bound, "inequalities": ineq});
            (s, r, t)
        }
        Mode::Witness => {
            let w = config.witness.as_ref().ok_or_else(|| CliError::Config("witness mode needs a [witness] section".into()))?;
            let missing = |name: &str| CliError::Config(format!("witness test {:?} needs `{name}`", w.test));
            let (verdict, label, extra) = match w.test {
                WitnessTest::Nonclassicality => {
                    let n = w.sources.ok_or_else(|| missing("sources"))?;
                    let m = w.detectors.ok_or_else(|| missing("detectors"))?;
                    (rule.nonclassicality(w.gbar, n, m, w.stderr).map_err(CliError::setup)?, "nonclassicality", json!({"sources": n, "detectors": m}))
                }
                WitnessTest::Divisibility => {
                    let m = w.modes.ok_or_else(|| missing("modes"))?;
                    let eta = w.eta.ok_or_else(|| missing("eta"))?;
                    (rule.divisibility(w.gbar, m, eta, w.stderr).map_err(CliError::setup)?, "divisibility", json!({"modes": m, "eta": eta}))
                }
            };
            let s = format!("{label}: {}\n", verdict.summary());
            let t = format!(
                "gbar\tthreshold\tmargin\tclassification\n{:.17e}\t{:.17e}\t{:.17e}\t{}\n",
                verdict.gbar,
                verdict.threshold,
                verdict.margin,
                serde_json::to_value(verdict.classification).expect("enum serializes").as_str().unwrap_or_default()
            );
            (s, json!({"verdict": verdict_json(&verdict, label, extra)}), t)
        }
        Mode::Ingest => {
            let spec = config.ingest.as_ref().ok_or_else(|| CliError::Config("ingest mode needs an [ingest] section".into()))?;
            let text = ctx.read(&spec.records)?;
            let parsed = read_records(text.as_bytes()).map_err(CliError::setup)?;
            let estimate = estimate_gbar_from_records(&parsed.records).map_err(CliError::engine)?;
            let m = estimate.active_detectors.len();
            let n = spec.sources.unwrap_or(m);
            let report = estimate.into_report();
            let (mut s, r, t) = correlation_output(report, n, &rule, json!({
                "shots": parsed.records.len(),
                "rejected_lines": parsed.rejected,
                "labels": parsed.labels,
            }))?;
            let _ = writeln!(s, "{} shots read, {} lines rejected", parsed.records.len(), parsed.rejected);
            (s, r, t)
        }
    };
    let document = json!({
        "config": config,
        "result": result,
    });
    let summary = format!("mode: {}\n{summary}", serde_json::to_value(config.mode).expect("enum serializes").as_str().unwrap_or_default());
    Ok(Output { summary, document, table: config.table.as_ref().map(|_| table), trace })
}

/// Writes the report and table of a finished run.
pub fn write_outputs(output: &Output, config: &ExperimentConfig, ctx: &RunContext, out: Option<&Path>) -> Result<(), CliError> {
    let write = |path: &Path, text: &str| std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())));
    if let Some(path) = out {
        write(path, &output.document_text())?;
    }
    if let (Some(path), Some(table)) = (&config.table, &output.table) {
        write(&ctx.resolve(path), table)?;
    }
    Ok(())
}
