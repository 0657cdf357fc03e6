//! Decay fitting and T-gate fidelity estimation.
//!
//! Each fiducial's mean survival is fit to `a + b·η^m`. The `|0⟩` curve decays
//! with `η₀`, the `|+⟩` curve with `η₊`; together they give the average gate
//! fidelity of `Λ_T Λ_C`, and dividing out `Λ_C` estimates the T gate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{agf_from_chi00, chi00_from_agf};
use crate::protocol::{Fiducial, SurvivalRow};
use crate::twirl::agf_from_etas;

pub const GRID_NODES: usize = 1001;
pub const REFINE_NODES: usize = 201;
pub const ETA_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("fiducial {fiducial}: {found} distinct sequence lengths, at least 3 are needed")]
    TooFewLengths { fiducial: Fiducial, found: usize },
    #[error("invalid decay record: {0}")]
    InvalidRecord(String),
    #[error("no data for fiducial \"{0}\"")]
    MissingFiducial(Fiducial),
    #[error("reference χ₀₀ = {chi_ref} is not positive; cannot divide")]
    Division { chi_ref: f64 },
}

/// Mean survival at one sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub m: usize,
    pub mean: f64,
    pub count: usize,
    /// Estimated variance of `mean`, when more than one sample exists.
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRecord {
    pub fiducial: Fiducial,
    pub points: Vec<DecayPoint>,
}

impl DecayRecord {
    pub fn new(fiducial: Fiducial, points: Vec<DecayPoint>) -> Result<Self, AnalysisError> {
        if points.windows(2).any(|w| w[0].m >= w[1].m) {
            return Err(AnalysisError::InvalidRecord(
                "sequence lengths must be strictly increasing".into(),
            ));
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.mean) {
                return Err(AnalysisError::InvalidRecord(format!(
                    "survival {} at m={} outside [0, 1]",
                    p.mean, p.m
                )));
            }
            if p.count == 0 {
                return Err(AnalysisError::InvalidRecord(format!(
                    "no samples at m={}",
                    p.m
                )));
            }
        }
        Ok(Self { fiducial, points })
    }

    /// Noiseless record from `(m, survival)` pairs.
    pub fn from_means(fiducial: Fiducial, data: &[(usize, f64)]) -> Result<Self, AnalysisError> {
        let points = data
            .iter()
            .map(|&(m, mean)| DecayPoint {
                m,
                mean,
                count: 1,
                variance: None,
            })
            .collect();
        Self::new(fiducial, points)
    }

    /// Groups CSV rows of one fiducial by `m` and averages them.
    pub fn from_rows(fiducial: Fiducial, rows: &[SurvivalRow]) -> Result<Self, AnalysisError> {
        let mut by_m: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.fiducial == fiducial) {
            by_m.entry(r.m).or_default().push(r.survival);
        }
        if by_m.is_empty() {
            return Err(AnalysisError::MissingFiducial(fiducial));
        }
        let points = by_m
            .into_iter()
            .map(|(m, xs)| {
                let n = xs.len();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let variance = (n > 1).then(|| {
                    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64
                });
                DecayPoint {
                    m,
                    mean,
                    count: n,
                    variance,
                }
            })
            .collect();
        Self::new(fiducial, points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Equal,
    /// Weights `1/Var(mean)`; points without a variance estimate get the
    /// median weight.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    /// Standard error of `eta` from the linearized covariance; `None` when
    /// there are no spare degrees of freedom or the fit is degenerate.
    pub eta_stderr: Option<f64>,
    /// Weighted root of the residual sum of squares.
    pub residual_norm: f64,
    pub grid_nodes: usize,
    pub golden_iterations: usize,
    pub degenerate: bool,
    pub weighting: Weighting,
}

impl FitResult {
    pub fn predict(&self, m: usize) -> f64 {
        self.a + self.b * self.eta.powi(m as i32)
    }
}

struct Projection {
    a: f64,
    b: f64,
    rss: f64,
}

/// Best `(a, b)` for fixed `eta` by weighted linear regression on `x = eta^m`.
fn project(ms: &[usize], ys: &[f64], ws: &[f64], eta: f64) -> Projection {
    let xs: Vec<f64> = ms.iter().map(|&m| eta.powi(m as i32)).collect();
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx).powi(2);
        sxy += w * (x - mx) * (y - my);
    }
    let b = if sxx > 1e-300 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rss = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - a - b * x).powi(2))
        .sum();
    Projection { a, b, rss }
}

fn weights(rec: &DecayRecord, weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Equal => vec![1.0; rec.points.len()],
        Weighting::InverseVariance => {
            let inv: Vec<Option<f64>> = rec
                .points
                .iter()
                .map(|p| p.variance.filter(|&v| v > 0.0).map(|v| 1.0 / v))
                .collect();
            let mut known: Vec<f64> = inv.iter().flatten().copied().collect();
            if known.is_empty() {
                return vec![1.0; rec.points.len()];
            }
            known.sort_by(f64::total_cmp);
            let median = known[known.len() / 2];
            inv.into_iter().map(|w| w.unwrap_or(median)).collect()
        }
    }
}

fn argmin_on_grid(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> usize {
    let step = (hi - lo) / (nodes - 1) as f64;
    (0..nodes)
        .map(|i| (i, f(lo + step * i as f64)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iters = 0;
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        iters += 1;
    }
    (0.5 * (lo + hi), iters)
}

/// Standard error of `eta` from `σ² (JᵀWJ)⁻¹`, with `J` the model Jacobian.
fn eta_stderr(ms: &[usize], ws: &[f64], b: f64, eta: f64, rss: f64) -> Option<f64> {
    let n = ms.len();
    if n <= 3 {
        return None;
    }
    let mut jtj = [[0.0f64; 3]; 3];
    for (&m, &w) in ms.iter().zip(ws) {
        let row = [
            1.0,
            eta.powi(m as i32),
            b * m as f64 * eta.powi(m as i32 - 1),
        ];
        for i in 0..3 {
            for j in 0..3 {
                jtj[i][j] += w * row[i] * row[j];
            }
        }
    }
    let det = jtj[0][0] * (jtj[1][1] * jtj[2][2] - jtj[1][2] * jtj[2][1])
        - jtj[0][1] * (jtj[1][0] * jtj[2][2] - jtj[1][2] * jtj[2][0])
        + jtj[0][2] * (jtj[1][0] * jtj[2][1] - jtj[1][1] * jtj[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    // (2,2) cofactor of the inverse.
    let inv22 = (jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0]) / det;
    let sigma2 = rss / (n - 3) as f64;
    let var = sigma2 * inv22;
    (var.is_finite() && var >= 0.0).then(|| var.sqrt())
}

pub fn fit_decay(rec: &DecayRecord) -> Result<FitResult, AnalysisError> {
    fit_decay_weighted(rec, Weighting::Equal)
}

/// Separable least squares: a coarse grid over `η ∈ [0, 1]`, a finer grid
/// around the best node, then golden-section search to `ETA_TOL`.
pub fn fit_decay_weighted(
    rec: &DecayRecord,
    weighting: Weighting,
) -> Result<FitResult, AnalysisError> {
    if rec.points.len() < 3 {
        return Err(AnalysisError::TooFewLengths {
            fiducial: rec.fiducial,
            found: rec.points.len(),
        });
    }
    let ms: Vec<usize> = rec.points.iter().map(|p| p.m).collect();
    let ys: Vec<f64> = rec.points.iter().map(|p| p.mean).collect();
    let ws = weights(rec, weighting);

    let first = ys[0];
    if ys.iter().all(|&y| (y - first).abs() <= 1e-14) {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        return Ok(FitResult {
            a: mean,
            b: 0.0,
            eta: 1.0,
            eta_stderr: None,
            residual_norm: 0.0,
            grid_nodes: 0,
            golden_iterations: 0,
            degenerate: true,
            weighting,
        });
    }

    let rss = |eta: f64| project(&ms, &ys, &ws, eta).rss;
    let step = 1.0 / (GRID_NODES - 1) as f64;
    let i = argmin_on_grid(&rss, 0.0, 1.0, GRID_NODES);
    let (lo, hi) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
    let (lo, hi) = (lo.max(0.0), hi.min(1.0));
    let fine_step = (hi - lo) / (REFINE_NODES - 1) as f64;
    let j = argmin_on_grid(&rss, lo, hi, REFINE_NODES);
    let centre = lo + fine_step * j as f64;
    let (glo, ghi) = ((centre - fine_step).max(0.0), (centre + fine_step).min(1.0));
    let (mut eta, iters) = golden_section(&rss, glo, ghi, ETA_TOL);
    // Endpoints are not probed by golden-section search.
    for edge in [0.0, 1.0] {
        if rss(edge) < rss(eta) {
            eta = edge;
        }
    }
    let p = project(&ms, &ys, &ws, eta);
    Ok(FitResult {
        a: p.a,
        b: p.b,
        eta,
        eta_stderr: eta_stderr(&ms, &ws, p.b, eta, p.rss),
        residual_norm: p.rss.sqrt(),
        grid_nodes: GRID_NODES + REFINE_NODES,
        golden_iterations: iters,
        degenerate: false,
        weighting,
    })
}

/// Average gate fidelity of the composite channel from the two fits.
pub fn composite_agf(fit_zero: &FitResult, fit_plus: &FitResult, d: usize) -> f64 {
    agf_from_etas(fit_zero.eta, fit_plus.eta, d)
}

/// `F_T` through `χ₀₀(Λ_T) ≈ χ₀₀(Λ_T Λ_C) / χ₀₀(Λ_C)`.
pub fn t_gate_fidelity(f_composite: f64, f_reference: f64, d: usize) -> Result<f64, AnalysisError> {
    let chi_ref = chi00_from_agf(f_reference, d);
    if chi_ref <= 0.0 || !chi_ref.is_finite() {
        return Err(AnalysisError::Division { chi_ref });
    }
    Ok(agf_from_chi00(chi00_from_agf(f_composite, d) / chi_ref, d))
}

/// `F_T ≈ F_composite / F_reference`.
pub fn t_gate_fidelity_direct(f_composite: f64, f_reference: f64) -> Result<f64, AnalysisError> {
    if f_reference <= 0.0 || !f_reference.is_finite() {
        return Err(AnalysisError::Division {
            chi_ref: f_reference,
        });
    }
    Ok(f_composite / f_reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Division {
    #[default]
    Chi,
    Direct,
}

/// Fit parameters per fiducial and the derived fidelities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub dimension: usize,
    /// Keyed by fiducial label, `"0"` and `"+"`.
    pub fits: BTreeMap<String, FitResult>,
    pub eta0: f64,
    pub eta_plus: f64,
    pub composite_fidelity: f64,
    pub reference_fidelity: f64,
    pub division: Division,
    pub t_fidelity: f64,
    pub t_fidelity_chi: f64,
    pub t_fidelity_direct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
}

/// Fits both fiducial curves from CSV rows and estimates the T-gate fidelity.
pub fn fidelity_report(
    rows: &[SurvivalRow],
    reference_fidelity: f64,
    division: Division,
    truth: Option<f64>,
    weighting: Weighting,
) -> Result<FidelityReport, AnalysisError> {
    let first = rows
        .first()
        .ok_or_else(|| AnalysisError::InvalidRecord("no survival rows".into()))?;
    let d = first.dimension;
    if let Some(r) = rows.iter().find(|r| r.dimension != d) {
        return Err(AnalysisError::InvalidRecord(format!(
            "mixed dimensions {d} and {}",
            r.dimension
        )));
    }
    let zero = fit_decay_weighted(&DecayRecord::from_rows(Fiducial::Zero, rows)?, weighting)?;
    let plus = fit_decay_weighted(&DecayRecord::from_rows(Fiducial::Plus, rows)?, weighting)?;
    let composite = composite_agf(&zero, &plus, d);
    let chi = t_gate_fidelity(composite, reference_fidelity, d)?;
    let direct = t_gate_fidelity_direct(composite, reference_fidelity)?;
    let t_fidelity = match division {
        Division::Chi => chi,
        Division::Direct => direct,
    };
    let (eta0, eta_plus) = (zero.eta, plus.eta);
    let fits = BTreeMap::from([
        (Fiducial::Zero.to_string(), zero),
        (Fiducial::Plus.to_string(), plus),
    ]);
    Ok(FidelityReport {
        dimension: d,
        fits,
        eta0,
        eta_plus,
        composite_fidelity: composite,
        reference_fidelity,
        division,
        t_fidelity,
        t_fidelity_chi: chi,
        t_fidelity_direct: direct,
        truth,
        relative_error: truth.map(|t| (t_fidelity - t).abs() / t),
    })
}
