//! Manufacturing-tolerance robustness analysis on Sobol points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::loads::{frequency_rescale, LoadSummary};
use crate::mech::{design_from_dims, dims_of, DimKind, DimensionVector, Mechanism};
use crate::pipeline::{run_pipeline, FailureTag, PipelineConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToleranceError {
    #[error("Sobol dimension {0} unsupported (1..={MAX_DIM})")]
    Dimension(usize),
    #[error("perturbed length {value} of {label} is not positive")]
    NonPositive { label: String, value: f64 },
    #[error("point has {got} coordinates, dimension vector has {expected}")]
    PointLength { expected: usize, got: usize },
    #[error("invalid tolerance band: {0}")]
    Band(&'static str),
}

/// Joe–Kuo direction numbers (s, a, m_1..m_s) for dimensions 2 onward.
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

pub const MAX_DIM: usize = JOE_KUO.len() + 1;
const BITS: usize = 32;

fn direction_numbers(dim: usize) -> Vec<[u32; BITS]> {
    let mut out = Vec::with_capacity(dim);
    let mut v = [0u32; BITS];
    for (k, item) in v.iter_mut().enumerate() {
        *item = 1 << (BITS - 1 - k);
    }
    out.push(v);
    for &(s, a, m) in JOE_KUO.iter().take(dim - 1) {
        let s = s as usize;
        let mut v = [0u32; BITS];
        for k in 0..s.min(BITS) {
            v[k] = m[k] << (BITS - 1 - k);
        }
        for k in s..BITS {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for j in 1..s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= v[k - j];
                }
            }
            v[k] = x;
        }
        out.push(v);
    }
    out
}

/// Points `skip .. skip + n` of the unscrambled Sobol sequence (Gray-code order).
/// Point 0 is the origin, so `skip = 1` starts at the all-0.5 point.
pub fn sobol_points(dim: usize, n: usize, skip: usize) -> Result<Vec<Vec<f64>>, ToleranceError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(ToleranceError::Dimension(dim));
    }
    let v = direction_numbers(dim);
    let mut x = vec![0u32; dim];
    let mut out = Vec::with_capacity(n);
    let scale = 1.0 / (1u64 << BITS) as f64;
    for i in 0..skip + n {
        if i >= skip {
            out.push(x.iter().map(|&b| b as f64 * scale).collect());
        }
        let c = (!i).trailing_zeros() as usize;
        for (xd, vd) in x.iter_mut().zip(&v) {
            *xd ^= vd[c];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleTolerance {
    /// Arc of the length tolerance at the shorter ternary arm.
    ShorterArm,
    Radians(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceBand {
    pub tolerance_mm: f64,
    pub n_samples: usize,
    /// Leading Sobol points dropped.
    pub skip: usize,
    pub angle_tolerance: AngleTolerance,
    /// Pareto points above this singularity percentage are discarded.
    pub singularity_cutoff_pct: f64,
}

impl Default for ToleranceBand {
    fn default() -> Self {
        Self {
            tolerance_mm: 0.5,
            n_samples: 100,
            skip: 1,
            angle_tolerance: AngleTolerance::ShorterArm,
            singularity_cutoff_pct: 15.0,
        }
    }
}

impl ToleranceBand {
    pub fn validate(&self) -> Result<(), ToleranceError> {
        if !(self.tolerance_mm >= 0.0) {
            return Err(ToleranceError::Band("tolerance must be nonnegative"));
        }
        if self.n_samples == 0 {
            return Err(ToleranceError::Band("n_samples must be at least 1"));
        }
        if let AngleTolerance::Radians(r) = self.angle_tolerance {
            if !(r >= 0.0) {
                return Err(ToleranceError::Band("angle tolerance must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Half-widths of the band for each dimension entry.
pub fn band_half_widths(dims: &DimensionVector, mech: &Mechanism, band: &ToleranceBand) -> Vec<f64> {
    let length_of = |member: usize| {
        dims.entries
            .iter()
            .find(|e| e.kind == DimKind::Length { member })
            .map_or(f64::INFINITY, |e| e.value)
    };
    dims.entries
        .iter()
        .map(|e| match e.kind {
            DimKind::Length { .. } | DimKind::SliderCoord { .. } => band.tolerance_mm,
            DimKind::Angle { ternary } => match band.angle_tolerance {
                AngleTolerance::Radians(r) => r,
                AngleTolerance::ShorterArm => {
                    let t = mech.ternaries()[ternary];
                    band.tolerance_mm / length_of(t.a).min(length_of(t.b))
                }
            },
        })
        .collect()
}

/// Map a point of the unit cube onto the band: coordinate 0.5 is the nominal value.
pub fn perturb_design(
    dims: &DimensionVector,
    mech: &Mechanism,
    band: &ToleranceBand,
    point: &[f64],
) -> Result<DimensionVector, ToleranceError> {
    if point.len() != dims.len() {
        return Err(ToleranceError::PointLength { expected: dims.len(), got: point.len() });
    }
    let half = band_half_widths(dims, mech, band);
    let mut out = dims.clone();
    for ((e, &p), &h) in out.entries.iter_mut().zip(point).zip(&half) {
        e.value += (2.0 * p - 1.0) * h;
        if matches!(e.kind, DimKind::Length { .. }) && !(e.value > 0.0) {
            return Err(ToleranceError::NonPositive { label: e.label.clone(), value: e.value });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Singular,
    Defective,
    /// Amplitude or FTI below its limit.
    Violating,
    Feasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sobol_index: usize,
    pub category: Category,
    pub phi0_deg: Option<f64>,
    pub fti_cr: Option<f64>,
    pub mean_lift: Option<f64>,
    pub mean_power: Option<f64>,
    pub peak_torque: Option<f64>,
    pub power_decrease_pct: Option<f64>,
    pub torque_increase_pct: Option<f64>,
    pub grashof_margin: Option<f64>,
    pub qrr: Option<f64>,
    pub amplitude_violation: bool,
    pub fti_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Some(Self { mean, std, count: v.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub tolerance_mm: f64,
    pub n_samples: usize,
    pub singular_count: usize,
    pub defective_count: usize,
    pub violating_count: usize,
    pub feasible_count: usize,
    pub singularity_pct: f64,
    /// Share of nonsingular samples that are defective or below the amplitude limit.
    pub amplitude_violation_pct: f64,
    pub fti_violation_count: usize,
    pub grashof_violations: usize,
    /// Samples with quick-return ratio outside 1 ± 0.02.
    pub qrr_out_of_band_count: usize,
    /// Over nonsingular, nondefective samples at the reference lift.
    pub power_decrease_pct: Option<MeanStd>,
    pub torque_increase_pct: Option<MeanStd>,
    /// Same statistics restricted to feasible samples.
    pub power_decrease_feasible_pct: Option<MeanStd>,
    pub torque_increase_feasible_pct: Option<MeanStd>,
    pub fti_range: Option<(f64, f64)>,
    pub phi0_range_deg: Option<(f64, f64)>,
    pub exceeds_singularity_cutoff: bool,
    pub samples: Vec<SampleRecord>,
}

pub const QRR_BAND: f64 = 0.02;

fn analyze_sample(
    i: usize,
    point: &[f64],
    mech: &Mechanism,
    nominal: &DimensionVector,
    band: &ToleranceBand,
    reference: &LoadSummary,
    cfg: &PipelineConfig,
) -> SampleRecord {
    let mut rec = SampleRecord {
        sobol_index: i + band.skip,
        category: Category::Singular,
        phi0_deg: None,
        fti_cr: None,
        mean_lift: None,
        mean_power: None,
        peak_torque: None,
        power_decrease_pct: None,
        torque_increase_pct: None,
        grashof_margin: None,
        qrr: None,
        amplitude_violation: false,
        fti_violation: false,
    };
    let Ok(dims) = perturb_design(nominal, mech, band, point) else { return rec };
    let Ok(design) = design_from_dims(&dims, mech, &mech.design()) else { return rec };
    let Ok(m) = mech.with_design(&design) else { return rec };
    let run = run_pipeline(&m, cfg, true);
    let ev = &run.evaluation;
    if let Some(r) = &ev.report {
        rec.phi0_deg = Some(r.amplitude_deg);
        rec.fti_cr = Some(r.fti_cr);
        rec.grashof_margin = r.grashof_margin;
        rec.qrr = r.qrr;
        rec.amplitude_violation = r.amplitude_deg < cfg.limits.phi_min_deg;
        rec.fti_violation = r.fti_cr < cfg.limits.fti_min;
    }
    rec.category = match ev.failure {
        Some(FailureTag::Singular) | Some(FailureTag::Assembly) => return rec,
        Some(FailureTag::Defect) => {
            rec.amplitude_violation = true;
            rec.category = Category::Defective;
            return rec;
        }
        Some(FailureTag::Aero) => Category::Violating,
        None if rec.amplitude_violation || rec.fti_violation => Category::Violating,
        None => Category::Feasible,
    };
    if let Some(l) = ev.loads {
        rec.mean_lift = Some(l.mean_lift_gf);
        rec.mean_power = Some(l.mean_power_w);
        rec.peak_torque = Some(l.peak_torque_kgcm);
        if let Ok(s) = frequency_rescale(&l, reference.mean_lift_gf) {
            rec.power_decrease_pct = Some(100.0 * (reference.mean_power_w - s.mean_power_w) / reference.mean_power_w);
            rec.torque_increase_pct =
                Some(100.0 * (s.peak_torque_kgcm - reference.peak_torque_kgcm) / reference.peak_torque_kgcm);
        }
    }
    rec
}

/// Perturb `mech` over the band and classify each sample. `reference` is the
/// mechanism the performance changes are measured against.
pub fn analyze_band(
    mech: &Mechanism,
    band: &ToleranceBand,
    reference: &LoadSummary,
    cfg: &PipelineConfig,
) -> Result<RobustnessReport, ToleranceError> {
    band.validate()?;
    let nominal = dims_of(mech);
    let points = sobol_points(nominal.len(), band.n_samples, band.skip)?;
    let samples: Vec<SampleRecord> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| analyze_sample(i, p, mech, &nominal, band, reference, cfg))
        .collect();

    let n = samples.len();
    let count = |c: Category| samples.iter().filter(|s| s.category == c).count();
    let singular_count = count(Category::Singular);
    let nonsingular = n - singular_count;
    let amp_bad = samples.iter().filter(|s| s.category != Category::Singular && s.amplitude_violation).count();
    let pct = |k: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * k as f64 / d as f64 };
    let collect = |f: fn(&SampleRecord) -> Option<f64>, feasible_only: bool| {
        let v: Vec<f64> = samples
            .iter()
            .filter(|s| !feasible_only || s.category == Category::Feasible)
            .filter_map(f)
            .collect();
        MeanStd::of(&v)
    };
    let range = |f: fn(&SampleRecord) -> Option<f64>| {
        samples.iter().filter(|s| s.category != Category::Singular).filter_map(f).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((f64::min(lo, v), f64::max(hi, v))),
        })
    };
    let singularity_pct = pct(singular_count, n);
    Ok(RobustnessReport {
        tolerance_mm: band.tolerance_mm,
        n_samples: n,
        singular_count,
        defective_count: count(Category::Defective),
        violating_count: count(Category::Violating),
        feasible_count: count(Category::Feasible),
        singularity_pct,
        amplitude_violation_pct: pct(amp_bad, nonsingular),
        fti_violation_count: samples.iter().filter(|s| s.category != Category::Singular && s.fti_violation).count(),
        grashof_violations: samples.iter().filter(|s| s.grashof_margin.is_some_and(|g| g < 0.0)).count(),
        qrr_out_of_band_count: samples.iter().filter(|s| s.qrr.is_some_and(|q| (q - 1.0).abs() > QRR_BAND)).count(),
        power_decrease_pct: collect(|s| s.power_decrease_pct, false),
        torque_increase_pct: collect(|s| s.torque_increase_pct, false),
        power_decrease_feasible_pct: collect(|s| s.power_decrease_pct, true),
        torque_increase_feasible_pct: collect(|s| s.torque_increase_pct, true),
        fti_range: range(|s| s.fti_cr),
        phi0_range_deg: range(|s| s.phi0_deg),
        exceeds_singularity_cutoff: singularity_pct > band.singularity_cutoff_pct,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_points() {
        let p = sobol_points(11, 2, 1).unwrap();
        assert!(p[0].iter().all(|&x| x == 0.5));
        let want = [0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75, 0.75];
        assert_eq!(p[1], want);
    }

    #[test]
    fn one_dimensional_strata() {
        // each coordinate of the first 2^k points hits every dyadic cell once
        let k = 7;
        let p = sobol_points(MAX_DIM, 1 << k, 0).unwrap();
        for d in 0..MAX_DIM {
            let mut cells: Vec<usize> = p.iter().map(|x| (x[d] * (1 << k) as f64) as usize).collect();
            cells.sort();
            assert_eq!(cells, (0..1 << k).collect::<Vec<_>>(), "dim {d}");
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(sobol_points(0, 4, 1).is_err());
        assert!(sobol_points(MAX_DIM + 1, 4, 1).is_err());
    }
}
