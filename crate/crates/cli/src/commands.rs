use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use flapmech::fem::LinkageTrace;
use flapmech::loads::LoadResult;
use flapmech::mech::{dims_of, validate_topology, Mechanism};
use flapmech::optimize::{maximize_fti, pareto_search, FtiSearchConfig, OptimizeError, ParetoArchive};
use flapmech::pipeline::{chord_kinematics, run_kinematics, run_pipeline, Evaluation, FailureTag, PipelineConfig};
use flapmech::tolerance::analyze_band;
use flapmech::uvlm::{simulate_cycles, ChordKinematics};
use flapmech::{AeroCoefficients, ConstraintReport, SweepProfile};

use crate::config::{load, parse_mechanism, Loaded, SweepSource};
use crate::error::CliError;
use crate::output::{header_line, Artifacts};
use crate::svg::{chart, Series, Style};

pub const ARCHIVE: &str = "archive.jsonl";

pub struct Ctx {
    pub loaded: Loaded,
    pub files: Artifacts,
}

impl Ctx {
    pub fn open(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self, CliError> {
        let loaded = load(config, seed, out)?;
        let files = Artifacts::new(loaded.out_dir(), &loaded.hash)?;
        Ok(Self { loaded, files })
    }
}

#[derive(Serialize)]
struct ValidateOut<'a> {
    valid: bool,
    name: &'a str,
    nodes: usize,
    members: usize,
    dimensions: &'a [flapmech::mech::DimEntry],
    failure: Option<FailureTag>,
    constraint_report: Option<ConstraintReport>,
}

pub fn validate(file: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let (topo, _) = parse_mechanism(file)?;
    let mech = validate_topology(&topo).map_err(CliError::Topology)?;
    let cfg = match config {
        Some(c) => load(c, None, None)?.pipeline(),
        None => PipelineConfig::default(),
    };
    let run = run_kinematics(&mech, &cfg);
    let dims = dims_of(&mech);
    let out = ValidateOut {
        valid: true,
        name: &topo.name,
        nodes: topo.nodes.len(),
        members: topo.members.len(),
        dimensions: &dims.entries,
        failure: run.failure,
        constraint_report: run.report,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    Ok(())
}

fn trace_csv(files: &mut Artifacts, mech: &Mechanism, trace: &LinkageTrace) -> Result<(), CliError> {
    let mut cols: Vec<String> =
        ["step", "crank_angle", "delta_phi", "phi", "ma", "efr", "fti"].iter().map(|s| s.to_string()).collect();
    for k in 0..mech.node_count() {
        let id = mech.node_id(k);
        cols.push(format!("x{id}"));
        cols.push(format!("y{id}"));
    }
    let phi = trace.phi();
    let rows: Vec<Vec<f64>> = (0..trace.steps())
        .map(|k| {
            let mut r = vec![
                k as f64,
                trace.crank_angle[k],
                trace.delta_phi[k],
                phi[k + 1],
                trace.ma[k],
                trace.efr[k],
                trace.fti[k],
            ];
            for p in &trace.node_history[k] {
                r.push(p.x);
                r.push(p.y);
            }
            r
        })
        .collect();
    files.csv("linkage_trace.csv", &cols, &rows)
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn sweep_files(files: &mut Artifacts, p: &SweepProfile) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = (0..p.steps())
        .map(|k| {
            vec![p.t[k], p.t_tilde[k], p.phi[k + 1], p.omega[k], p.omega_dot[k], p.omega_tilde[k], p.omega_tilde_prime[k]]
        })
        .collect();
    files.csv(
        "sweep_profile.csv",
        &cols(&["t", "t_tilde", "phi", "omega", "omega_dot", "omega_tilde", "omega_tilde_prime"]),
        &rows,
    )?;
    files.svg("omega.svg", omega_chart(&rows.iter().map(|r| (r[1], r[5])).collect::<Vec<_>>()))
}

fn omega_chart(points: &[(f64, f64)]) -> String {
    chart("Sweep rate", "t~", "Omega~", &[Series { name: "Omega~", points: points.to_vec() }], Style::Line)
}

fn alpha_chart(points: &[(f64, f64)]) -> String {
    chart("Pitch angle", "t~", "alpha (deg)", &[Series { name: "alpha", points: points.to_vec() }], Style::Line)
}

fn cl_chart(points: &[(f64, f64)]) -> String {
    chart("Lift coefficient", "t~", "C_L", &[Series { name: "C_L", points: points.to_vec() }], Style::Line)
}

fn pareto_chart(points: &[(f64, f64)]) -> String {
    chart("Pareto front", "mean lift (gf)", "mean power (W)", &[Series { name: "archive", points: points.to_vec() }], Style::Scatter)
}

const AERO_COLS: [&str; 12] = [
    "step", "t_tilde", "omega_tilde", "omega_tilde_prime", "alpha", "c_f", "c_l", "c_h", "c_d", "c_les", "kelvin",
    "impenetrability",
];

fn aero_files(files: &mut Artifacts, a: &AeroCoefficients) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = (0..a.t.len())
        .map(|k| {
            vec![
                k as f64,
                a.t[k],
                a.omega_tilde[k],
                a.omega_tilde_prime[k],
                a.alpha[k],
                a.c_f[k],
                a.c_l[k],
                a.c_h[k],
                a.c_d[k],
                a.c_les[k],
                a.kelvin[k],
                a.impenetrability[k],
            ]
        })
        .collect();
    files.csv("aero_coefficients.csv", &cols(&AERO_COLS), &rows)?;
    let means: Vec<Vec<f64>> =
        a.cycle_means.iter().enumerate().map(|(c, m)| vec![c as f64, m.c_l, m.c_h, m.c_d]).collect();
    files.csv("aero_cycle_means.csv", &cols(&["cycle", "c_l", "c_h", "c_d"]), &means)?;
    files.svg("alpha.svg", alpha_chart(&rows.iter().map(|r| (r[1], r[4].to_degrees())).collect::<Vec<_>>()))?;
    files.svg("cl.svg", cl_chart(&rows.iter().map(|r| (r[1], r[6])).collect::<Vec<_>>()))
}

fn kinematics(ctx: &mut Ctx) -> Result<(Mechanism, flapmech::pipeline::KinematicRun), CliError> {
    let mech = ctx.loaded.mechanism()?;
    let run = run_kinematics(&mech, &ctx.loaded.pipeline());
    trace_csv(&mut ctx.files, &mech, &run.trace)?;
    if let Some(r) = &run.report {
        ctx.files.json("constraint_report.json", r)?;
    }
    if let Ok(p) = &run.profile {
        sweep_files(&mut ctx.files, p)?;
    }
    Ok((mech, run))
}

pub fn simulate(ctx: &mut Ctx) -> Result<(), CliError> {
    let (_, run) = kinematics(ctx)?;
    if let Some(r) = &run.report {
        println!(
            "amplitude {:.3} deg, FTI_cr {:.4}, feasible {}",
            r.amplitude_deg, r.fti_cr, r.feasible
        );
    }
    match run.failure {
        Some(tag) => Err(CliError::Stage(tag)),
        None => Ok(()),
    }
}

pub fn aero(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.loaded.pipeline();
    let (kin, re): (ChordKinematics, f64) = match ctx.loaded.run.aero.sweep {
        SweepSource::Harmonic => {
            let a = &ctx.loaded.run.aero;
            (ChordKinematics::harmonic(a.period_tilde, a.samples, cfg.pitch.clone()), a.reynolds)
        }
        SweepSource::Mechanism => {
            let (_, run) = kinematics(ctx)?;
            if let Some(tag) = run.failure {
                return Err(CliError::Stage(tag));
            }
            let p = run.profile.as_ref().expect("nondefective profile");
            (chord_kinematics(p, &cfg.pitch), cfg.morphology.reynolds(&cfg.environment, p.amplitude_phi0))
        }
    };
    let t0 = Instant::now();
    let a = simulate_cycles(&kin, &cfg.uvlm, re).map_err(|e| {
        eprintln!("chord model: {e}");
        CliError::Stage(FailureTag::Aero)
    })?;
    let secs = t0.elapsed().as_secs_f64();
    aero_files(&mut ctx.files, &a)?;
    let last = a.cycle_means.last().expect("at least one cycle");
    println!(
        "{} cycles x {} steps in {secs:.2} s; last-cycle C_L {:.4}, C_H {:.4}",
        a.cycle_count, a.steps_per_cycle, last.c_l, last.c_h
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluateOut<'a> {
    evaluation: &'a Evaluation,
    loads: &'a LoadResult,
}

pub fn evaluate(ctx: &mut Ctx) -> Result<(), CliError> {
    let mech = ctx.loaded.mechanism()?;
    let cfg = ctx.loaded.pipeline();
    let run = run_pipeline(&mech, &cfg, true);
    trace_csv(&mut ctx.files, &mech, &run.kinematics.trace)?;
    if let Some(r) = &run.kinematics.report {
        ctx.files.json("constraint_report.json", r)?;
    }
    match run.kinematics.failure {
        Some(tag @ (FailureTag::Singular | FailureTag::Assembly)) => return Err(CliError::Stage(tag)),
        Some(FailureTag::Defect) => {
            if let Ok(p) = &run.kinematics.profile {
                sweep_files(&mut ctx.files, p)?;
            }
            return Err(CliError::Stage(FailureTag::Defect));
        }
        _ => {}
    }
    if let Ok(p) = &run.kinematics.profile {
        sweep_files(&mut ctx.files, p)?;
    }
    let (Some(a), Some(l)) = (&run.aero, &run.loads) else {
        return Err(CliError::Stage(run.evaluation.failure.unwrap_or(FailureTag::Aero)));
    };
    aero_files(&mut ctx.files, a)?;
    ctx.files.json("loads.json", &EvaluateOut { evaluation: &run.evaluation, loads: l })?;
    let s = &l.summary;
    println!(
        "lift {:.3} gf, power {:.4} W, peak torque {:.4} kg cm, mean C_L {:.4}, feasible {}",
        s.mean_lift_gf,
        s.mean_power_w,
        s.peak_torque_kgcm,
        s.mean_cl,
        run.evaluation.feasible()
    );
    Ok(())
}

fn read_archive(path: &Path) -> Result<ParetoArchive, CliError> {
    let f = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ParetoArchive::read_jsonl(BufReader::new(f)).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write_archive(files: &mut Artifacts, archive: &ParetoArchive, total: u64) -> Result<(), CliError> {
    let mut buf = format!("{}\n", files.header_line()).into_bytes();
    archive.write_jsonl(&mut buf, total).map_err(|e| CliError::Io(e.to_string()))?;
    files.raw(ARCHIVE, std::str::from_utf8(&buf).expect("utf-8 json"))?;
    let rows: Vec<Vec<f64>> = archive
        .entries
        .iter()
        .map(|e| vec![e.id as f64, e.mean_lift, e.mean_power, e.fti_cr, e.amplitude_deg, e.peak_torque])
        .collect();
    files.csv(
        "pareto.csv",
        &cols(&["id", "mean_lift_gf", "mean_power_w", "fti_cr", "amplitude_deg", "peak_torque_kgcm"]),
        &rows,
    )?;
    files.svg("pareto.svg", pareto_chart(&rows.iter().map(|r| (r[1], r[2])).collect::<Vec<_>>()))
}

pub fn optimize(ctx: &mut Ctx) -> Result<(), CliError> {
    let mech = ctx.loaded.mechanism()?;
    let cfg = ctx.loaded.pipeline();
    let opt = &ctx.loaded.run.optimizer;
    let archive_path = ctx.files.path(ARCHIVE);
    let resume = if archive_path.exists() { Some(read_archive(&archive_path)?) } else { None };
    if let Some(a) = &resume {
        println!("resuming from {} entries, {} evaluations", a.len(), a.evaluations_total());
    }
    let mut seed = mech.design();
    if opt.maximize_fti {
        let fcfg = FtiSearchConfig { budget: opt.fti_budget, ..FtiSearchConfig::default() };
        match maximize_fti(&mech, &seed, &cfg, &fcfg) {
            Ok(s) => {
                println!("seed FTI_cr {:.4} after {} evaluations", s.fti_cr, s.evaluations);
                seed = s.design;
            }
            Err(e) => eprintln!("seed search: {e}; using the nominal design"),
        }
    }
    let out = match pareto_search(&mech, &[seed], &cfg, &opt.search, resume) {
        Ok(o) => o,
        Err(OptimizeError::NoFeasibleSeed) => return Err(CliError::EmptyArchive(": no feasible seed".into())),
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    write_archive(&mut ctx.files, &out.archive, out.evaluations_total)?;
    println!(
        "{} entries after {} evaluations ({} this run, {} generations)",
        out.archive.len(),
        out.evaluations_total,
        out.evaluations_run,
        out.generations
    );
    Ok(())
}

pub fn robustness(ctx: &mut Ctx, entry: Option<u64>) -> Result<(), CliError> {
    let nominal = ctx.loaded.mechanism()?;
    let cfg = ctx.loaded.pipeline();
    let analyzed = match entry {
        None => nominal.clone(),
        Some(id) => {
            let path = ctx.files.path(ARCHIVE);
            let archive = if path.exists() { read_archive(&path)? } else { ParetoArchive::new() };
            if archive.is_empty() {
                return Err(CliError::EmptyArchive(format!(" ({})", path.display())));
            }
            let e = archive.get(id).ok_or(CliError::MissingEntry(id))?;
            nominal.with_design(&e.design).map_err(|_| CliError::Stage(FailureTag::Assembly))?
        }
    };
    let base = run_pipeline(&nominal, &cfg, true).evaluation;
    let Some(reference) = base.loads else {
        return Err(CliError::Stage(base.failure.unwrap_or(FailureTag::Aero)));
    };
    let band = ctx.loaded.run.tolerance;
    let report = analyze_band(&analyzed, &band, &reference, &cfg).map_err(|e| CliError::Config(e.to_string()))?;
    ctx.files.json("robustness.json", &report)?;
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let rows: Vec<Vec<f64>> = report
        .samples
        .iter()
        .map(|s| {
            vec![
                s.sobol_index as f64,
                s.category as u8 as f64,
                opt(s.phi0_deg),
                opt(s.fti_cr),
                opt(s.mean_lift),
                opt(s.mean_power),
                opt(s.peak_torque),
                opt(s.power_decrease_pct),
                opt(s.torque_increase_pct),
            ]
        })
        .collect();
    ctx.files.csv(
        "robustness_samples.csv",
        &cols(&[
            "sobol_index",
            "category",
            "phi0_deg",
            "fti_cr",
            "mean_lift_gf",
            "mean_power_w",
            "peak_torque_kgcm",
            "power_decrease_pct",
            "torque_increase_pct",
        ]),
        &rows,
    )?;
    let ms = |m: Option<flapmech::tolerance::MeanStd>| match m {
        Some(m) => format!("{:.2} +- {:.2}", m.mean, m.std),
        None => "n/a".into(),
    };
    println!(
        "singular {:.1}%, amplitude violations {:.1}%, power decrease {} %, torque increase {} %",
        report.singularity_pct,
        report.amplitude_violation_pct,
        ms(report.power_decrease_pct),
        ms(report.torque_increase_pct)
    );
    Ok(())
}

/// Columns of a CSV written by this tool, by name.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| CliError::Parse(e.to_string()))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| CliError::Parse(format!("{}: missing column {n}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::Parse(e.to_string()))?;
        for (c, &i) in idx.iter().enumerate() {
            out[c].push(rec[i].parse::<f64>().map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?);
        }
    }
    Ok(out)
}

/// Regenerate plots from the artifacts already in the output directory.
pub fn report(ctx: &mut Ctx) -> Result<(), CliError> {
    let mut made = 0;
    let sweep = ctx.files.path("sweep_profile.csv");
    if sweep.exists() {
        let c = read_columns(&sweep, &["t_tilde", "omega_tilde"])?;
        ctx.files.svg("omega.svg", omega_chart(&c[0].iter().copied().zip(c[1].iter().copied()).collect::<Vec<_>>()))?;
        made += 1;
    }
    let aero = ctx.files.path("aero_coefficients.csv");
    if aero.exists() {
        let c = read_columns(&aero, &["t_tilde", "alpha", "c_l"])?;
        let t = &c[0];
        ctx.files.svg("alpha.svg", alpha_chart(&t.iter().zip(&c[1]).map(|(a, b)| (*a, b.to_degrees())).collect::<Vec<_>>()))?;
        ctx.files.svg("cl.svg", cl_chart(&t.iter().copied().zip(c[2].iter().copied()).collect::<Vec<_>>()))?;
        made += 2;
    }
    let arch = ctx.files.path(ARCHIVE);
    if arch.exists() {
        let a = read_archive(&arch)?;
        let pts: Vec<(f64, f64)> = a.entries.iter().map(|e| (e.mean_lift, e.mean_power)).collect();
        ctx.files.svg("pareto.svg", pareto_chart(&pts))?;
        made += 1;
        println!("archive: {} entries, {} evaluations", a.len(), a.evaluations_total());
        for e in &a.entries {
            println!(
                "  #{:<4} lift {:>9.3} gf  power {:>8.4} W  FTI_cr {:.3}  phi0 {:.1} deg",
                e.id, e.mean_lift, e.mean_power, e.fti_cr, e.amplitude_deg
            );
        }
    }
    if made == 0 {
        eprintln!("{}: nothing to report", ctx.files.path("").display());
    }
    println!("{} plots written ({})", made, header_line(&ctx.loaded.hash).trim_start_matches("# "));
    Ok(())
}
