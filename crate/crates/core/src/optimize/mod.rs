//! Seed search and multiobjective design search.
//!
//! [`maximize_fti`] is a compass search on the critical force transmission index
//! under the kinematic constraints. [`pareto_search`] is a constrained
//! nondominated-sorting evolutionary search over the design coordinates,
//! followed by a compass polish of the best power-at-equal-lift entry.

mod archive;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use archive::{ArchiveEntry, ArchiveError, ParetoArchive, Provenance};

use crate::mech::{dims_from_design, DesignVector, Mechanism};
use crate::pipeline::{evaluate_design, run_kinematics, Evaluation, PipelineConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error("no feasible point found within {0} evaluations")]
    NoFeasible(u64),
    #[error("no feasible seed design")]
    NoFeasibleSeed,
    #[error("all evaluations infeasible: empty archive")]
    EmptyArchive,
    #[error("design does not fit the topology")]
    Layout,
}

/// `a` dominates `b` for (lift to maximize, power to minimize).
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

/// Indices of the nondominated points, ordered by lift ascending (stable).
pub fn dominance_filter(points: &[(f64, f64)]) -> Vec<usize> {
    let mut keep: Vec<usize> =
        (0..points.len()).filter(|&i| !points.iter().any(|&q| dominates(q, points[i]))).collect();
    keep.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    keep
}

/// Cache key on a 1e-9 grid.
pub(crate) fn quantize(d: &DesignVector) -> Vec<i64> {
    d.coords.iter().chain(std::iter::once(&d.slider_offset)).map(|v| (v * 1e9).round() as i64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub step: f64,
    pub improved: bool,
}

/// Compass search maximizing `f`. Each poll evaluates all 2n neighbours as one
/// batch and moves to the best improvement; an unsuccessful poll halves the step.
pub fn pattern_search<F>(x0: &[f64], step: f64, min_step: f64, max_evals: usize, mut f: F) -> PatternResult
where
    F: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    let mut x = x0.to_vec();
    let mut value = f(std::slice::from_ref(&x))[0];
    let mut evaluations = 1;
    let mut step = step;
    let mut improved = false;
    let n = x.len();
    while step >= min_step && evaluations + 2 * n <= max_evals {
        let polls: Vec<Vec<f64>> = (0..2 * n)
            .map(|k| {
                let mut y = x.clone();
                y[k / 2] += if k % 2 == 0 { step } else { -step };
                y
            })
            .collect();
        let vals = f(&polls);
        evaluations += polls.len();
        let best = (0..vals.len()).filter(|&k| vals[k] > value).max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a)));
        match best {
            Some(k) => {
                x.clone_from(&polls[k]);
                value = vals[k];
                improved = true;
            }
            None => step *= 0.5,
        }
    }
    PatternResult { x, value, evaluations, step, improved }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FtiSearchConfig {
    pub step: f64,
    pub min_step: f64,
    pub budget: usize,
}

impl Default for FtiSearchConfig {
    fn default() -> Self {
        Self { step: 0.1, min_step: 1e-3, budget: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtiSeed {
    pub design: DesignVector,
    pub fti_cr: f64,
    pub evaluations: usize,
}

fn with_coords(template: &DesignVector, x: &[f64]) -> DesignVector {
    DesignVector { coords: x.to_vec(), slider_offset: template.slider_offset }
}

/// Merit for the seed search: FTI_cr when constraints other than FTI_min hold,
/// otherwise minus the violation. Nonfinite for failed linkages.
pub fn fti_merit(base: &Mechanism, design: &DesignVector, cfg: &PipelineConfig) -> f64 {
    let Ok(m) = base.with_design(design) else { return f64::NEG_INFINITY };
    let run = run_kinematics(&m, cfg);
    match (run.failure, run.report) {
        (None, Some(r)) if r.feasible => r.fti_cr,
        (None, Some(r)) => -r.violation,
        _ => f64::NEG_INFINITY,
    }
}

/// Compass search on FTI_cr subject to link-ratio, Grashof, quick-return,
/// amplitude and box constraints. Returns the best feasible design visited.
pub fn maximize_fti(
    base: &Mechanism,
    initial: &DesignVector,
    cfg: &PipelineConfig,
    opt: &FtiSearchConfig,
) -> Result<FtiSeed, OptimizeError> {
    let mut kcfg = cfg.clone();
    kcfg.limits.fti_min = 0.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let res = pattern_search(&initial.coords, opt.step, opt.min_step, opt.budget, |xs| {
        let vals: Vec<f64> = xs.par_iter().map(|x| fti_merit(base, &with_coords(initial, x), &kcfg)).collect();
        for (x, &v) in xs.iter().zip(&vals) {
            if v >= 0.0 && best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, x.clone()));
            }
        }
        vals
    });
    match best {
        Some((fti_cr, x)) => Ok(FtiSeed { design: with_coords(initial, &x), fti_cr, evaluations: res.evaluations }),
        None => Err(OptimizeError::NoFeasible(res.evaluations as u64)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationConfig {
    pub population: usize,
    pub generations: usize,
    /// Pipeline evaluations allowed in this run (cache hits are free).
    pub budget: usize,
    pub seed: u64,
    /// Initial population spread as a fraction of the variable range.
    pub spread: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    /// Share of the budget reserved for the final polish.
    pub polish_fraction: f64,
    pub polish_step: f64,
    /// Half-width of the variable range when the mechanism has no box.
    pub bound_margin: f64,
    #[serde(skip)]
    pub config_hash: String,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            population: 24,
            generations: 1000,
            budget: 5000,
            seed: 1,
            spread: 0.05,
            crossover_eta: 15.0,
            mutation_eta: 20.0,
            polish_fraction: 0.2,
            polish_step: 0.05,
            bound_margin: 2.0,
            config_hash: String::new(),
        }
    }
}

/// Variable bounds: the bounding box of the mechanism box if any, else a margin
/// around the seed. Always contains the seed.
pub fn design_bounds(base: &Mechanism, seed: &DesignVector, margin: f64) -> Vec<(f64, f64)> {
    base.layout()
        .slots
        .iter()
        .zip(&seed.coords)
        .map(|(&(_, axis), &v)| match base.polygon() {
            Some(p) => {
                let (lo, hi) = p
                    .vertices()
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q[axis]), hi.max(q[axis])));
                (lo.min(v), hi.max(v))
            }
            None => (v - margin, v + margin),
        })
        .collect()
}

struct Evaluator<'a> {
    base: &'a Mechanism,
    cfg: &'a PipelineConfig,
    cache: HashMap<Vec<i64>, Evaluation>,
    count: u64,
    spent: usize,
}

impl Evaluator<'_> {
    fn batch(&mut self, designs: &[DesignVector]) -> Vec<Evaluation> {
        let mut fresh: Vec<(Vec<i64>, &DesignVector)> = Vec::new();
        for d in designs {
            let k = quantize(d);
            if !self.cache.contains_key(&k) && !fresh.iter().any(|(q, _)| *q == k) {
                fresh.push((k, d));
            }
        }
        let (base, cfg) = (self.base, self.cfg);
        let evals: Vec<Evaluation> = fresh.par_iter().map(|(_, d)| evaluate_design(d, base, cfg)).collect();
        self.count += fresh.len() as u64;
        self.spent += fresh.len();
        for ((k, _), e) in fresh.into_iter().zip(evals) {
            self.cache.insert(k, e);
        }
        designs.iter().map(|d| self.cache[&quantize(d)].clone()).collect()
    }
}

#[derive(Debug, Clone)]
struct Individual {
    design: DesignVector,
    eval: Evaluation,
}

fn entry_for(
    base: &Mechanism,
    design: &DesignVector,
    eval: &Evaluation,
    evaluation: u64,
    opt: &OptimizationConfig,
) -> Option<ArchiveEntry> {
    let (report, loads) = (eval.report.as_ref()?, eval.loads?);
    if !eval.feasible() {
        return None;
    }
    let m = base.with_design(design).ok()?;
    Some(ArchiveEntry {
        id: 0,
        design: design.clone(),
        dims: dims_from_design(design, &m).ok()?,
        mean_lift: loads.mean_lift_gf,
        mean_power: loads.mean_power_w,
        fti_cr: report.fti_cr,
        amplitude_deg: report.amplitude_deg,
        peak_torque: loads.peak_torque_kgcm,
        constraint_report: report.clone(),
        provenance: Provenance { config_hash: opt.config_hash.clone(), seed: opt.seed, evaluation, evaluations_total: 0 },
    })
}

/// Rank and crowding distance under constrained domination.
fn rank_population(pop: &[Individual]) -> (Vec<usize>, Vec<f64>) {
    let n = pop.len();
    let mut rank = vec![usize::MAX; n];
    let mut crowd = vec![0.0; n];
    let feasible: Vec<usize> = (0..n).filter(|&i| pop[i].eval.feasible()).collect();
    let obj = |i: usize| pop[i].eval.objectives().expect("feasible");
    let mut remaining = feasible.clone();
    let mut r = 0;
    while !remaining.is_empty() {
        let front: Vec<usize> =
            remaining.iter().copied().filter(|&i| !remaining.iter().any(|&j| dominates(obj(j), obj(i)))).collect();
        for &i in &front {
            rank[i] = r;
        }
        for k in 0..2 {
            let val = |i: usize| if k == 0 { obj(i).0 } else { obj(i).1 };
            let mut f = front.clone();
            f.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
            let span = (val(f[f.len() - 1]) - val(f[0])).max(1e-300);
            crowd[f[0]] = f64::INFINITY;
            crowd[f[f.len() - 1]] = f64::INFINITY;
            for w in 1..f.len().saturating_sub(1) {
                crowd[f[w]] += (val(f[w + 1]) - val(f[w - 1])) / span;
            }
        }
        remaining.retain(|i| !front.contains(i));
        r += 1;
    }
    let mut infeasible: Vec<usize> = (0..n).filter(|&i| !pop[i].eval.feasible()).collect();
    infeasible.sort_by(|&a, &b| pop[a].eval.violation().total_cmp(&pop[b].eval.violation()).then(a.cmp(&b)));
    for (k, &i) in infeasible.iter().enumerate() {
        rank[i] = r + k;
    }
    (rank, crowd)
}

fn better(i: usize, j: usize, rank: &[usize], crowd: &[f64]) -> bool {
    rank[i] < rank[j] || (rank[i] == rank[j] && crowd[i] > crowd[j])
}

fn sbx_pair(rng: &mut ChaCha8Rng, a: f64, b: f64, lo: f64, hi: f64, eta: f64) -> (f64, f64) {
    let u: f64 = rng.random();
    let beta = if u <= 0.5 { (2.0 * u).powf(1.0 / (eta + 1.0)) } else { (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0)) };
    let c1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
    let c2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
    (c1.clamp(lo, hi), c2.clamp(lo, hi))
}

fn poly_mutation(rng: &mut ChaCha8Rng, x: f64, lo: f64, hi: f64, eta: f64) -> f64 {
    let u: f64 = rng.random();
    let d = if u < 0.5 { (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0 } else { 1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0)) };
    (x + d * (hi - lo)).clamp(lo, hi)
}

#[derive(Debug, Clone)]
pub struct ParetoOutcome {
    pub archive: ParetoArchive,
    /// Evaluation counter including any resumed history.
    pub evaluations_total: u64,
    pub evaluations_run: usize,
    pub generations: usize,
    /// Objectives of the feasible seeds.
    pub seed_objectives: Vec<(f64, f64)>,
}

/// Power rescaled to lift `l_ref` at frozen coefficients.
pub fn power_at_lift(lift: f64, power: f64, l_ref: f64) -> f64 {
    power * (l_ref / lift).powf(1.5)
}

pub fn pareto_search(
    base: &Mechanism,
    seeds: &[DesignVector],
    cfg: &PipelineConfig,
    opt: &OptimizationConfig,
    resume: Option<ParetoArchive>,
) -> Result<ParetoOutcome, OptimizeError> {
    let n_var = base.layout().slots.len();
    if seeds.is_empty() || seeds.iter().any(|s| s.coords.len() != n_var) {
        return Err(OptimizeError::Layout);
    }
    let mut archive = resume.unwrap_or_default();
    let start = archive.evaluations_total();
    let mut ev = Evaluator { base, cfg, cache: HashMap::new(), count: start, spent: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed ^ start.wrapping_mul(0x9E37_79B9_7F4A_7C15));

    let seed_evals = ev.batch(seeds);
    let mut seed_objectives = Vec::new();
    for (s, e) in seeds.iter().zip(&seed_evals) {
        if let (Some(o), Some(entry)) = (e.objectives(), entry_for(base, s, e, ev.count, opt)) {
            seed_objectives.push(o);
            archive.insert(entry);
        }
    }
    if seed_objectives.is_empty() {
        return Err(OptimizeError::NoFeasibleSeed);
    }
    let bounds = design_bounds(base, &seeds[0], opt.bound_margin);
    let template = seeds[0].clone();
    let polish_budget = (opt.budget as f64 * opt.polish_fraction).round() as usize;
    let ga_budget = opt.budget.saturating_sub(polish_budget);
    let pop_size = opt.population.max(4);

    // initial population: seeds, resumed entries, then jittered seed copies
    let mut init: Vec<DesignVector> = seeds.to_vec();
    init.extend(archive.entries.iter().map(|e| e.design.clone()));
    while init.len() < pop_size {
        let s = &seeds[init.len() % seeds.len()];
        let x: Vec<f64> = s
            .coords
            .iter()
            .zip(&bounds)
            .map(|(&v, &(lo, hi))| (v + opt.spread * (hi - lo) * sample_normal(&mut rng)).clamp(lo, hi))
            .collect();
        init.push(with_coords(&template, &x));
    }
    init.truncate(pop_size.max(seeds.len()));
    let evals = ev.batch(&init);
    let mut pop: Vec<Individual> = init.into_iter().zip(evals).map(|(design, eval)| Individual { design, eval }).collect();
    let record = |archive: &mut ParetoArchive, ind: &[Individual], count: u64| {
        for i in ind {
            if let Some(e) = entry_for(base, &i.design, &i.eval, count, opt) {
                archive.insert(e);
            }
        }
    };
    record(&mut archive, &pop, ev.count);

    let mut generations = 0;
    while generations < opt.generations && ev.spent < ga_budget {
        let (rank, crowd) = rank_population(&pop);
        let pick = |rng: &mut ChaCha8Rng| {
            let (i, j) = (rng.random_range(0..pop.len()), rng.random_range(0..pop.len()));
            if better(j, i, &rank, &crowd) { j } else { i }
        };
        let mut children: Vec<DesignVector> = Vec::with_capacity(pop_size);
        while children.len() < pop_size {
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            let (mut x1, mut x2) = (pop[a].design.coords.clone(), pop[b].design.coords.clone());
            for k in 0..n_var {
                if rng.random::<f64>() < 0.5 {
                    let (lo, hi) = bounds[k];
                    let (c1, c2) = sbx_pair(&mut rng, x1[k], x2[k], lo, hi, opt.crossover_eta);
                    x1[k] = c1;
                    x2[k] = c2;
                }
            }
            for x in [&mut x1, &mut x2] {
                for k in 0..n_var {
                    if rng.random::<f64>() < 1.0 / n_var as f64 {
                        let (lo, hi) = bounds[k];
                        x[k] = poly_mutation(&mut rng, x[k], lo, hi, opt.mutation_eta);
                    }
                }
            }
            children.push(with_coords(&template, &x1));
            if children.len() < pop_size {
                children.push(with_coords(&template, &x2));
            }
        }
        let evals = ev.batch(&children);
        let kids: Vec<Individual> =
            children.into_iter().zip(evals).map(|(design, eval)| Individual { design, eval }).collect();
        record(&mut archive, &kids, ev.count);
        pop.extend(kids);
        let (rank, crowd) = rank_population(&pop);
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&i, &j| rank[i].cmp(&rank[j]).then(crowd[j].total_cmp(&crowd[i])).then(i.cmp(&j)));
        let mut seen = std::collections::HashSet::new();
        pop = order
            .into_iter()
            .filter(|&i| seen.insert(quantize(&pop[i].design)))
            .take(pop_size)
            .map(|i| pop[i].clone())
            .collect();
        generations += 1;
    }

    // polish the entry with the lowest power at the seed lift
    let l_ref = seed_objectives[0].0;
    if let Some(start_entry) = archive
        .entries
        .iter()
        .min_by(|a, b| {
            power_at_lift(a.mean_lift, a.mean_power, l_ref).total_cmp(&power_at_lift(b.mean_lift, b.mean_power, l_ref))
        })
        .cloned()
    {
        let remaining = opt.budget.saturating_sub(ev.spent);
        let mut found: Vec<Individual> = Vec::new();
        pattern_search(&start_entry.design.coords, opt.polish_step, 1e-4, remaining, |xs| {
            let ds: Vec<DesignVector> = xs.iter().map(|x| with_coords(&template, x)).collect();
            let es = ev.batch(&ds);
            let vals = es
                .iter()
                .map(|e| e.objectives().map_or(f64::NEG_INFINITY, |(l, p)| -power_at_lift(l, p, l_ref)))
                .collect();
            found.extend(ds.into_iter().zip(es).map(|(design, eval)| Individual { design, eval }));
            vals
        });
        record(&mut archive, &found, ev.count);
    }

    if archive.is_empty() {
        return Err(OptimizeError::EmptyArchive);
    }
    for e in &mut archive.entries {
        e.provenance.evaluations_total = ev.count;
    }
    Ok(ParetoOutcome { archive, evaluations_total: ev.count, evaluations_run: ev.spent, generations, seed_objectives })
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_examples() {
        assert_eq!(dominance_filter(&[(1.0, 1.0)]), vec![0]);
        assert_eq!(dominance_filter(&[(1.0, 1.0), (2.0, 2.0), (2.0, 1.0)]), vec![2]);
        assert_eq!(dominance_filter(&[(2.0, 2.0), (1.0, 1.0)]), vec![1, 0]);
    }

    #[test]
    fn compass_on_quadratic() {
        let r = pattern_search(&[0.3, -0.2], 0.25, 1e-6, 10_000, |xs| {
            xs.iter().map(|x| -((x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2))).collect()
        });
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn compass_stationary_seed() {
        let r = pattern_search(&[1.0, 2.0], 0.5, 1e-3, 1000, |xs| {
            xs.iter().map(|x| -((x[0] - 1.0).abs() + (x[1] - 2.0).abs())).collect()
        });
        assert_eq!(r.x, vec![1.0, 2.0]);
        assert!(!r.improved);
    }
}
