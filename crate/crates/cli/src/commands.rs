use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use spinlie::cartan::{build_parity_decomposition, default_mode, verify_cartan_relations, VerifyMode};
use spinlie::dynamics::{
    partner_construction, propagate_matrix, verify_equivalence_raw, ControlSchedule, EquivalenceReport,
    MagnetizationTrace, RandomScheduleSpec,
};
use spinlie::ident::{identify, IdentifyConfig};
use spinlie::io::{load_model, read_experiment, read_schedule, write_json, write_schedule, write_trace_csv, ModelFile, StatePreset, StateSpec};
use spinlie::lie::{controllability_verdict, observability_verdict};
use spinlie::model::{Couplings, SpinPairModel};
use spinlie::operator::ComplexMatrix;
use spinlie::su3::{casimir, verify_structure_tables_with, verify_subspace_relations, SubspaceReport, TableReport};
use spinlie::Error;

use crate::manifest::RunManifest;
use crate::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Affirmative,
    Negative,
    Special,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Affirmative => 0,
            Outcome::Negative => 2,
            Outcome::Special => 3,
        }
    }

    fn from_verdict(ok: bool) -> Self {
        if ok {
            Outcome::Affirmative
        } else {
            Outcome::Negative
        }
    }
}

struct Run {
    manifest: RunManifest,
    manifest_override: Option<PathBuf>,
}

impl Run {
    fn json<T: Serialize + ?Sized>(&mut self, path: &Path, value: &T) -> Result<()> {
        write_json(path, value)?;
        self.manifest.output_paths.push(path.to_path_buf());
        Ok(())
    }

    fn record(&mut self, path: &Path) {
        self.manifest.output_paths.push(path.to_path_buf());
    }

    fn finish(self) -> Result<()> {
        let path = self.manifest_override.clone().unwrap_or_else(|| self.manifest.default_path());
        write_json(&path, &self.manifest)?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (name, config) = match &cli.command {
        Command::VerifyTables { .. } => ("verify-tables", None),
        Command::Cartan { .. } => ("cartan", None),
        Command::Controllability { model, .. } => ("controllability", Some(model.as_path())),
        Command::Observability { model, .. } => ("observability", Some(model.as_path())),
        Command::Simulate { model, .. } => ("simulate", Some(model.as_path())),
        Command::Equivalence { model, .. } => ("equivalence", model.as_deref()),
        Command::Identify { data_dir, .. } => ("identify", Some(data_dir.as_path())),
    };
    let mut run = Run {
        manifest: RunManifest::new(name, config, cli.seed),
        manifest_override: cli.manifest.clone(),
    };
    let seed = cli.seed;
    let outcome = match &cli.command {
        Command::VerifyTables { tolerance, strict, json } => {
            verify_tables(&mut run, *tolerance, *strict, json.as_deref())
        }
        Command::Cartan {
            spins,
            exhaustive,
            pairs,
            json,
        } => cartan(&mut run, *spins, *exhaustive, *pairs, seed, json.as_deref()),
        Command::Controllability { model, json } => controllability(&mut run, model, seed, json.as_deref()),
        Command::Observability { model, json, vperp } => {
            observability(&mut run, model, seed, json.as_deref(), vperp.as_deref())
        }
        Command::Simulate {
            model,
            schedule,
            out,
            samples_per_segment,
            emit_plot_data,
        } => simulate(&mut run, model, schedule, out, *samples_per_segment, seed, emit_plot_data.as_deref()),
        Command::Equivalence {
            model,
            schedules,
            out_dir,
            unflipped,
            emit_plot_data,
        } => equivalence(
            &mut run,
            model.as_deref(),
            *schedules,
            out_dir,
            *unflipped,
            seed,
            emit_plot_data.as_deref(),
        ),
        Command::Identify { data_dir, out, starts } => identify_cmd(&mut run, data_dir, out.as_deref(), *starts, seed),
    }?;
    run.finish()?;
    Ok(outcome)
}

#[derive(Serialize)]
struct TablesOutput {
    tolerance: f64,
    strict: bool,
    /// Every cell is reproduced by its recomputed coefficients within `tolerance`.
    recomputed_exact: bool,
    /// Every reference cell agrees with direct multiplication.
    printed_agree: bool,
    tables: Vec<TableReport>,
    subspace_relations: SubspaceReport,
    /// `‖Σ_j (-iσ̄_j)² - 2·1‖`.
    casimir_residual: f64,
    pass: bool,
}

fn verify_tables(run: &mut Run, tolerance: f64, strict: bool, json: Option<&Path>) -> Result<Outcome> {
    let tables = verify_structure_tables_with(tolerance);
    let subspace_relations = verify_subspace_relations()?;
    let two = ComplexMatrix::identity(3).scale_re(2.0);
    let casimir_residual = (&casimir() - &two).norm();
    let recomputed_exact = tables
        .iter()
        .flat_map(|t| &t.entries)
        .all(|e| e.recompute_residual <= tolerance);
    let printed_agree = tables.iter().all(|t| t.pass);
    let pass = recomputed_exact
        && subspace_relations.pass
        && casimir_residual <= tolerance
        && (printed_agree || !strict);

    for t in &tables {
        let bad: Vec<_> = t.mismatches().collect();
        println!(
            "{:?}: {} cells, max residual {:.3e}, {} mismatched",
            t.table_id,
            t.entries.len(),
            t.max_residual,
            bad.len()
        );
        for e in bad {
            println!(
                "  ({}, {}): residual {:.3e}, recomputed {}",
                e.lhs,
                e.rhs,
                e.residual,
                format_terms(&e.recomputed)
            );
        }
    }
    for c in &subspace_relations.checks {
        println!("{}: dimension {} ({})", c.relation, c.computed_dim, if c.pass { "ok" } else { "FAILED" });
    }
    println!("casimir residual {casimir_residual:.3e}");
    let mismatched = tables.iter().map(|t| t.mismatches().count()).sum::<usize>();
    if mismatched > 0 {
        println!("{mismatched} reference cells disagree with direct multiplication (listed above)");
    }
    println!("{}", if pass { "all recomputed relations hold" } else { "discrepancies found" });

    let report = TablesOutput {
        tolerance,
        strict,
        recomputed_exact,
        printed_agree,
        tables,
        subspace_relations,
        casimir_residual,
        pass,
    };
    if let Some(path) = json {
        run.json(path, &report)?;
    }
    Ok(Outcome::from_verdict(pass))
}

fn format_terms(terms: &[(spinlie::su3::Label, f64)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    terms
        .iter()
        .map(|(l, c)| format!("{c:+} {l}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cartan(run: &mut Run, spins: usize, exhaustive: bool, pairs: usize, seed: u64, json: Option<&Path>) -> Result<Outcome> {
    let decomp = build_parity_decomposition(spins)?;
    let mode = if exhaustive {
        VerifyMode::Exhaustive
    } else if spins <= 2 {
        default_mode(spins, seed)
    } else {
        VerifyMode::Sampled { pairs, seed }
    };
    let report = verify_cartan_relations(&decomp, mode);
    println!(
        "{} spins: even {} + odd {} = {}",
        report.n_spins,
        report.even_dim,
        report.odd_dim,
        report.even_dim + report.odd_dim
    );
    for p in &report.class_pairs {
        println!(
            "  {:?} {:?}×{:?} → {:?}: {} pairs, {} violations, max leakage {:.3e}",
            p.operation, p.lhs, p.rhs, p.predicted, p.pairs_checked, p.violations, p.max_outside_predicted
        );
    }
    for l in &report.labelings {
        println!(
            "  labeling {}: commutator triple {}, anticommutator triple {}",
            l.description, l.commutator_triple_holds, l.anticommutator_triple_holds
        );
    }
    println!(
        "tensor identity max residual {:.3e}; {} violations; {}",
        report.tensor_identity.max_residual,
        report.total_violations,
        if report.pass { "pass" } else { "FAIL" }
    );
    if let Some(path) = json {
        run.json(path, &report)?;
    }
    Ok(Outcome::from_verdict(report.pass))
}

fn controllability(run: &mut Run, model: &Path, seed: u64, json: Option<&Path>) -> Result<Outcome> {
    let m = load_model(model, seed)?;
    let report = controllability_verdict(&m.couplings)?;
    let full = report.ambient_dim * report.ambient_dim - 1;
    println!("dimension {} (su({}) has {full})", report.dimension, report.ambient_dim);
    println!("{}", if report.controllable { "controllable" } else { "not controllable" });
    for n in &report.notes {
        println!("note: {n}");
    }
    if let Some(path) = json {
        run.json(path, &report)?;
    }
    Ok(Outcome::from_verdict(report.controllable))
}

fn observability(
    run: &mut Run,
    model: &Path,
    seed: u64,
    json: Option<&Path>,
    vperp: Option<&Path>,
) -> Result<Outcome> {
    let m = load_model(model, seed)?;
    let report = observability_verdict(&m.couplings)?;
    println!(
        "algebra dimension {}, observability space dimension {}, unobservable directions {}",
        report.algebra_dim, report.space_dim, report.vperp_dim
    );
    println!("{}", if report.observable { "observable" } else { "not observable" });
    if let Some(path) = json {
        run.json(path, &report)?;
    }
    if let Some(path) = vperp {
        run.json(path, &report.vperp_basis.hermitian_basis())?;
    }
    Ok(Outcome::from_verdict(report.observable))
}

fn write_plot_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    prefix: &[String],
    trace: &MagnetizationTrace,
) -> std::result::Result<(), csv::Error> {
    for i in 0..trace.len() {
        let m = trace.sample(i);
        for (name, v) in ["mx", "my", "mz"].iter().zip(m) {
            let mut row = prefix.to_vec();
            row.push(format!("{:.16e}", trace.times[i]));
            row.push(name.to_string());
            row.push(format!("{v:.16e}"));
            w.write_record(&row)?;
        }
    }
    Ok(())
}

fn plot_csv(path: &Path, header: &[&str], series: &[(Vec<String>, &MagnetizationTrace)]) -> Result<()> {
    let io_err = |e: csv::Error| CliError::Core(Error::Csv(e));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for (prefix, trace) in series {
        write_plot_rows(&mut w, prefix, trace).map_err(io_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn simulate(
    run: &mut Run,
    model: &Path,
    schedule: &Path,
    out: &Path,
    spp: usize,
    seed: u64,
    plot: Option<&Path>,
) -> Result<Outcome> {
    let m = load_model(model, seed)?;
    let s = read_schedule(schedule)?;
    let (trace, _) = propagate_matrix(&m.couplings, m.rho0.matrix(), &s, spp)?;
    write_trace_csv(out, &trace)?;
    run.record(out);
    if let Some(p) = plot {
        plot_csv(p, &["t", "component", "value"], &[(vec![], &trace)])?;
        run.record(p);
    }
    println!("wrote {} samples to {}", trace.len(), out.display());
    Ok(Outcome::Affirmative)
}

fn default_model() -> ModelFile {
    ModelFile {
        gamma1: 1.0,
        gamma2: 2.0,
        j12: 0.5,
        rho0: StateSpec::Preset(StatePreset::Thermal {
            beta: spinlie::io::DEFAULT_THERMAL_BETA,
        }),
    }
}

#[derive(Serialize)]
struct EquivalenceOutput {
    model: Couplings,
    partner: Couplings,
    /// True when the partner keeps the original state instead of the flipped one.
    unflipped_control: bool,
    partner_min_eigenvalue: f64,
    partner_physical: bool,
    equivalence: Option<EquivalenceReport>,
}

fn equivalence(
    run: &mut Run,
    model: Option<&Path>,
    n_schedules: usize,
    out_dir: &Path,
    unflipped: bool,
    seed: u64,
    plot: Option<&Path>,
) -> Result<Outcome> {
    let m: SpinPairModel = match model {
        Some(p) => load_model(p, seed)?,
        None => default_model().resolve(seed)?,
    };
    let decomp = build_parity_decomposition(2)?;
    let construction = partner_construction(&m.couplings, m.rho0.matrix(), &decomp)?;
    let (partner_rho, min_eig, physical) = if unflipped {
        let rho = m.rho0.matrix().clone();
        let min = m.rho0.eigenvalues()[0];
        (rho, min, true)
    } else {
        (construction.rho0.clone(), construction.min_eigenvalue, construction.physical)
    };
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let report_path = out_dir.join("report.json");
    let mut output = EquivalenceOutput {
        model: m.couplings,
        partner: construction.couplings,
        unflipped_control: unflipped,
        partner_min_eigenvalue: min_eig,
        partner_physical: physical,
        equivalence: None,
    };
    if !physical {
        println!("partner state is not positive semidefinite (minimum eigenvalue {min_eig:.3e})");
        run.json(&report_path, &output)?;
        return Ok(Outcome::Special);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedules: Vec<ControlSchedule> = (0..n_schedules)
        .map(|_| ControlSchedule::random(RandomScheduleSpec::default(), &mut rng))
        .collect();
    let spp = spinlie::dynamics::DEFAULT_SAMPLES_PER_SEGMENT;
    let a = (&m.couplings, m.rho0.matrix());
    let b = (&construction.couplings, &partner_rho);
    let report = verify_equivalence_raw(a, b, &schedules, spp)?;
    let pass = report.pass;
    println!(
        "{} schedules, max deviation {:.3e} (tolerance {:.0e}): {}",
        report.schedules,
        report.max_deviation,
        report.tolerance,
        if pass { "outputs agree" } else { "outputs differ" }
    );
    output.equivalence = Some(report);
    run.json(&report_path, &output)?;

    let mut series = Vec::new();
    for (k, s) in schedules.iter().enumerate() {
        let sp = out_dir.join(format!("schedule_{k:03}.json"));
        write_schedule(&sp, s)?;
        run.record(&sp);
        for (tag, (c, rho)) in [("model", a), ("partner", b)] {
            let (trace, _) = propagate_matrix(c, rho, s, spp)?;
            let tp = out_dir.join(format!("trace_{k:03}_{tag}.csv"));
            write_trace_csv(&tp, &trace)?;
            run.record(&tp);
            series.push((vec![k.to_string(), tag.to_string()], trace));
        }
    }
    if let Some(p) = plot {
        let borrowed: Vec<_> = series.iter().map(|(pre, t)| (pre.clone(), t)).collect();
        plot_csv(p, &["schedule", "model", "t", "component", "value"], &borrowed)?;
        run.record(p);
    }
    Ok(Outcome::from_verdict(pass))
}

fn identify_cmd(run: &mut Run, data_dir: &Path, out: Option<&Path>, starts: Option<usize>, seed: u64) -> Result<Outcome> {
    let record = read_experiment(data_dir)?;
    let mut cfg = IdentifyConfig {
        seed,
        ..IdentifyConfig::default()
    };
    if let Some(n) = starts {
        cfg.starts = n;
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| data_dir.join("identification.json"));
    let result = match identify(&record, &cfg) {
        Ok(r) => r,
        Err(Error::NonConvergence(msg)) => {
            println!("no convergent fit: {msg}");
            return Ok(Outcome::Negative);
        }
        Err(e) => return Err(e.into()),
    };
    println!(
        "gamma = ({:.6}, {:.6}), |J12| = {:.6}; {} candidates",
        result.gamma1_hat,
        result.gamma2_hat,
        result.abs_j_hat,
        result.candidates.len()
    );
    for c in &result.candidates {
        println!(
            "  J12 = {:+.6}: residual {:.3e}, physical state {}",
            c.j_signed, c.residual, c.physical
        );
    }
    for w in &result.warnings {
        println!("warning: {w}");
    }
    run.json(&out, &result)?;
    Ok(Outcome::Affirmative)
}
