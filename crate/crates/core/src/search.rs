//! Parameter-space scans, maximal-entanglement solver and Table 2 check.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::factors;
use crate::cascade::{b_prime, Stage1Params};
use crate::entanglement::{max_negativity_residual, negativity_closed};
use crate::error::{Error, Result};
use crate::fock::{DelocalizedPhoton, SqueezeParam};
use crate::herald::{herald_hybrid_numeric, PipelineConfig};
use crate::interferometer::BeamSplitter;

/// Every `SPOT_CHECK_STRIDE`-th scan cell is recomputed numerically.
pub const SPOT_CHECK_STRIDE: usize = 100;

/// Inclusive linear grid over `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(min <= max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidParameter(format!("bad axis [{min}, {max}] with {steps} steps")));
        }
        Ok(Self { min, max, steps })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.steps == 1 {
            return self.min;
        }
        if i + 1 == self.steps {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanGrid {
    pub r_sq: Axis,
    pub t_bs: Axis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub r_sq: f64,
    pub t_bs: f64,
    pub a1_mag: f64,
    pub p: usize,
    /// `NaN` for cells outside the valid domain.
    pub negativity: f64,
    pub probability: f64,
}

impl ScanRow {
    pub fn is_valid(&self) -> bool {
        !self.negativity.is_nan()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpotCheck {
    pub index: usize,
    pub negativity_dev: f64,
    pub probability_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanTable {
    pub grid: ScanGrid,
    pub a1_mag: f64,
    pub p: usize,
    pub rows: Vec<ScanRow>,
    pub spot_checks: Vec<SpotCheck>,
}

impl ScanTable {
    pub fn max_spot_deviation(&self) -> f64 {
        self.spot_checks.iter().map(|s| s.negativity_dev.max(s.probability_dev)).fold(0.0, f64::max)
    }

    /// CSV with header `r_sq,t_bs,a1_mag,p,negativity,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r_sq,t_bs,a1_mag,p,negativity,probability\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.r_sq, r.t_bs, r.a1_mag, r.p, r.negativity, r.probability));
        }
        out
    }
}

fn closed_cell(r_sq: f64, t_bs: f64, photon: &DelocalizedPhoton, p: usize, cutoff: usize) -> Option<(f64, f64)> {
    let r = SqueezeParam::new(r_sq).ok()?;
    let bs = BeamSplitter::from_transmittance(t_bs).ok()?;
    let f = factors(p, r, bs, cutoff);
    Some((negativity_closed(photon.a0(), photon.a1(), f.b), f.probability(photon)))
}

/// Negativity and probability surfaces over `grid`, row-major in `r_sq` then `t_bs`.
pub fn scan_grid(grid: ScanGrid, a1_mag: f64, p: usize, config: &PipelineConfig) -> Result<ScanTable> {
    let photon = DelocalizedPhoton::from_magnitude(a1_mag)?;
    let rs = grid.r_sq.values();
    let ts = grid.t_bs.values();
    let blocks: Vec<Vec<ScanRow>> = rs
        .par_iter()
        .map(|&r_sq| {
            let cutoff = SqueezeParam::new(r_sq).and_then(|r| config.cutoff_for(r)).ok();
            ts.iter()
                .map(|&t_bs| {
                    let cell = cutoff.and_then(|c| closed_cell(r_sq, t_bs, &photon, p, c));
                    let (negativity, probability) = cell.unwrap_or((f64::NAN, f64::NAN));
                    ScanRow { r_sq, t_bs, a1_mag, p, negativity, probability }
                })
                .collect()
        })
        .collect();
    let rows: Vec<ScanRow> = blocks.into_iter().flatten().collect();
    let spot_checks = rows
        .par_iter()
        .enumerate()
        .filter(|(i, row)| i % SPOT_CHECK_STRIDE == 0 && row.is_valid())
        .map(|(index, row)| {
            let rec = herald_hybrid_numeric(
                SqueezeParam::new(row.r_sq)?,
                BeamSplitter::from_transmittance(row.t_bs)?,
                photon,
                p,
                config,
            )?;
            Ok(SpotCheck {
                index,
                negativity_dev: (rec.negativity - row.negativity).abs(),
                probability_dev: (rec.probability - row.probability).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable { grid, a1_mag, p, rows, spot_checks })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    /// Bisected root of the residual.
    Root,
    /// The bracket holds no root, but this column stays within `near_max_tol` of negativity 1.
    NearMaximal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub r_sq: f64,
    pub t_bs: f64,
    pub a1_mag: f64,
    pub p: usize,
    pub negativity: f64,
    pub probability: f64,
    pub residual: f64,
    pub kind: PointKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub r_steps: usize,
    pub t_steps: usize,
    /// Required `|residual|` at a root.
    pub tol: f64,
    /// Without any root, accept columns whose negativity deficit stays below this.
    pub near_max_tol: Option<f64>,
    /// Points emitted per accepted column.
    pub near_max_samples: usize,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { r_steps: 151, t_steps: 196, tol: 1e-10, near_max_tol: Some(1e-9), near_max_samples: 16, max_iter: 200 }
    }
}

/// Bisects `f` on `[lo, hi]` given a sign change; `None` if `tol` is never reached.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Option<(f64, f64)> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some((lo, 0.0));
    }
    if f_hi == 0.0 {
        return Some((hi, 0.0));
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() < tol {
            return Some((mid, f_mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    None
}

struct Locus<'a> {
    photon: &'a DelocalizedPhoton,
    a1_mag: f64,
    p: usize,
    cutoff: usize,
}

fn sign_change(a: f64, b: f64) -> bool {
    !a.is_nan() && !b.is_nan() && a * b <= 0.0 && !(a == 0.0 && b == 0.0)
}

impl Locus<'_> {
    fn residual(&self, r_sq: f64, bs: BeamSplitter) -> f64 {
        let r = SqueezeParam::new(r_sq.max(0.0)).expect("r inside bracket");
        let b = factors(self.p, r, bs, self.cutoff).b;
        max_negativity_residual(self.photon.a0(), self.photon.a1(), b)
    }

    fn point(&self, r_sq: f64, bs: BeamSplitter, kind: PointKind) -> OperatingPoint {
        let r = SqueezeParam::new(r_sq).expect("r inside bracket");
        let f = factors(self.p, r, bs, self.cutoff);
        OperatingPoint {
            r_sq,
            t_bs: bs.t(),
            a1_mag: self.a1_mag,
            p: self.p,
            negativity: negativity_closed(self.photon.a0(), self.photon.a1(), f.b),
            probability: f.probability(self.photon),
            residual: max_negativity_residual(self.photon.a0(), self.photon.a1(), f.b),
            kind,
        }
    }

    /// Roots along `r_sq` at fixed `t`.
    fn along_r(&self, rs: &[f64], bs: BeamSplitter, values: &[f64], opts: &SolveOptions) -> Vec<OperatingPoint> {
        (0..rs.len() - 1)
            .filter(|&i| sign_change(values[i], values[i + 1]))
            .filter_map(|i| bisect(|x| self.residual(x, bs), rs[i], rs[i + 1], opts.tol, opts.max_iter))
            .map(|(r, _)| self.point(r, bs, PointKind::Root))
            .collect()
    }

    /// Roots along `t` at fixed `r_sq`.
    fn along_t(&self, r_sq: f64, ts: &[f64], values: &[f64], opts: &SolveOptions) -> Vec<OperatingPoint> {
        let f = |t: f64| BeamSplitter::from_transmittance(t).map(|bs| self.residual(r_sq, bs)).unwrap_or(f64::NAN);
        (0..ts.len() - 1)
            .filter(|&j| sign_change(values[j], values[j + 1]))
            .filter_map(|j| bisect(f, ts[j], ts[j + 1], opts.tol, opts.max_iter))
            .filter_map(|(t, _)| BeamSplitter::from_transmittance(t).ok())
            .map(|bs| self.point(r_sq, bs, PointKind::Root))
            .collect()
    }
}

/// Locus of `|a0| = |a1| |B_p|` inside the brackets.
///
/// The residual is sampled on the `(r_sq, t_bs)` grid. Sign changes between
/// neighbours in a `t_bs` column are bisected in `r_sq`; sign changes between
/// neighbours in an `r_sq` row, which catch loci running almost parallel to
/// the `r_sq` axis, are bisected in `t_bs`. Points are ordered by `t_bs`, then
/// `r_sq`.
///
/// When the bracket holds no root at all, columns whose negativity stays
/// within `near_max_tol` of one for every `r_sq` contribute sampled
/// [`PointKind::NearMaximal`] points instead.
pub fn solve_max_negativity(
    a1_mag: f64,
    p: usize,
    r_bracket: (f64, f64),
    t_bracket: (f64, f64),
    opts: &SolveOptions,
    config: &PipelineConfig,
) -> Result<Vec<OperatingPoint>> {
    let photon = DelocalizedPhoton::from_magnitude(a1_mag)?;
    let r_axis = Axis::new(r_bracket.0, r_bracket.1, opts.r_steps.max(2))?;
    let t_axis = Axis::new(t_bracket.0, t_bracket.1, opts.t_steps.max(2))?;
    SqueezeParam::new(r_axis.min)?;
    let cutoff = config.cutoff_for(SqueezeParam::new(r_axis.max)?)?;
    let ts = t_axis.values();
    let bss = ts.iter().map(|t| BeamSplitter::from_transmittance(*t)).collect::<Result<Vec<_>>>()?;
    let rs = r_axis.values();
    let locus = Locus { photon: &photon, a1_mag, p, cutoff };

    // grid[j][i] = residual at (rs[i], ts[j])
    let grid: Vec<Vec<f64>> = bss.par_iter().map(|bs| rs.iter().map(|r| locus.residual(*r, *bs)).collect()).collect();
    let mut points: Vec<OperatingPoint> = bss
        .par_iter()
        .zip(grid.par_iter())
        .map(|(bs, values)| locus.along_r(&rs, *bs, values, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let rows: Vec<Vec<OperatingPoint>> = rs
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let values: Vec<f64> = grid.iter().map(|col| col[i]).collect();
            locus.along_t(*r, &ts, &values, opts)
        })
        .collect();
    points.extend(rows.into_iter().flatten());
    points.sort_by(|a, b| a.t_bs.total_cmp(&b.t_bs).then(a.r_sq.total_cmp(&b.r_sq)));
    points.dedup_by(|a, b| a.t_bs == b.t_bs && a.r_sq == b.r_sq);

    if points.is_empty() {
        if let Some(near) = opts.near_max_tol {
            let samples = opts.near_max_samples.clamp(1, rs.len());
            let stride = Axis { min: 0.0, max: (rs.len() - 1) as f64, steps: samples };
            let mut idx: Vec<usize> = stride.values().iter().map(|x| x.round() as usize).collect();
            idx.dedup();
            for bs in &bss {
                let column: Vec<OperatingPoint> = rs.iter().map(|r| locus.point(*r, *bs, PointKind::NearMaximal)).collect();
                if column.iter().all(|pt| 1.0 - pt.negativity <= near) {
                    points.extend(idx.iter().map(|i| column[*i]));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoRootInBracket);
    }
    Ok(points)
}

/// Second-stage squeezings in `r_bracket` for which `B'_p = 1`.
pub fn solve_cascade_balance(
    stage1: &Stage1Params,
    p: usize,
    bs2: BeamSplitter,
    r_bracket: (f64, f64),
    opts: &SolveOptions,
    config: &PipelineConfig,
) -> Result<Vec<SqueezeParam>> {
    let axis = Axis::new(r_bracket.0, r_bracket.1, opts.r_steps.max(2))?;
    let cutoff = config.cutoff_for(SqueezeParam::new(axis.max)?)?.max(config.cutoff_for(stage1.r_sq)?);
    let fixed = PipelineConfig { cutoff_override: Some(cutoff), ..*config };
    let f = |r: f64| -> f64 {
        SqueezeParam::new(r.max(0.0))
            .and_then(|r2| b_prime(p, stage1, r2, bs2, &fixed))
            .map(|b| b - 1.0)
            .unwrap_or(f64::NAN)
    };
    let rs = axis.values();
    let values: Vec<f64> = rs.iter().map(|r| f(*r)).collect();
    let mut out = Vec::new();
    for i in 0..rs.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a.is_nan() || b.is_nan() || (a * b > 0.0) {
            continue;
        }
        if let Some((r, _)) = bisect(f, rs[i], rs[i + 1], opts.tol, opts.max_iter) {
            out.push(SqueezeParam::new(r)?);
        }
    }
    out.dedup();
    if out.is_empty() {
        return Err(Error::NoRootInBracket);
    }
    Ok(out)
}

/// Printed operating points `(r_sq, t_bs, |a1|, P0)`.
pub const TABLE2: [(f64, f64, f64, f64); 8] = [
    (0.107632, 0.423201, 0.741004, 0.896792),
    (0.380541, 0.326343, 0.726463, 0.88067),
    (0.541383, 0.259528, 0.719131, 0.840088),
    (0.753348, 0.234748, 0.716839, 0.7449845),
    (0.83396, 0.0762081, 0.708133, 0.728679),
    (0.0265654, 0.0220391, std::f64::consts::FRAC_1_SQRT_2, 0.999404),
    (0.303502, 0.025593, std::f64::consts::FRAC_1_SQRT_2, 0.955334),
    (0.613125, 0.020327, std::f64::consts::FRAC_1_SQRT_2, 0.837402),
];

/// Tolerance on both the negativity and `P0` columns.
pub const TABLE2_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Table2Row {
    pub row: usize,
    pub r_sq: f64,
    pub t_bs: f64,
    pub a1_mag: f64,
    pub printed_p0: f64,
    pub b0: f64,
    pub negativity: f64,
    pub p0: f64,
    pub negativity_dev: f64,
    pub p0_dev: f64,
    /// Largest closed-form vs numeric-pipeline difference in negativity or `P0`.
    pub internal_dev: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table2Report {
    pub rows: Vec<Table2Row>,
}

impl Table2Report {
    pub fn flagged(&self) -> impl Iterator<Item = &Table2Row> {
        self.rows.iter().filter(|r| r.flagged)
    }
}

/// Recomputes every printed operating point with both paths.
pub fn verify_table2(config: &PipelineConfig) -> Result<Table2Report> {
    let rows = TABLE2
        .iter()
        .enumerate()
        .map(|(i, &(r_sq, t_bs, a1_mag, printed_p0))| {
            let r = SqueezeParam::new(r_sq)?;
            let bs = BeamSplitter::from_transmittance(t_bs)?;
            let photon = DelocalizedPhoton::from_magnitude(a1_mag)?;
            let f = factors(0, r, bs, config.cutoff_for(r)?);
            let negativity = negativity_closed(photon.a0(), photon.a1(), f.b);
            let p0 = f.probability(&photon);
            let rec = herald_hybrid_numeric(r, bs, photon, 0, config)?;
            let internal_dev = (rec.negativity - negativity).abs().max((rec.probability - p0).abs());
            let negativity_dev = (1.0 - negativity).abs();
            let p0_dev = (p0 - printed_p0).abs();
            Ok(Table2Row {
                row: i + 1,
                r_sq,
                t_bs,
                a1_mag,
                printed_p0,
                b0: f.b,
                negativity,
                p0,
                negativity_dev,
                p0_dev,
                internal_dev,
                flagged: !(negativity_dev <= TABLE2_TOL && p0_dev <= TABLE2_TOL),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table2Report { rows })
}
