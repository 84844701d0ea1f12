//! Werner-state quantities, closed forms for the bipartite RVB gas, the
//! Anderson lower bound on spin correlators, and finite-size extrapolation.
//!
//! The two-spin reduced state of any SU(2)-invariant wavefunction is a Werner
//! state `p |singlet><singlet| + (1 - p) I/4`, and `<S_i.S_j> = -3p/4`.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{ratio, to_f64, to_fraction_string};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("correlator {0} is outside [-3/4, 0]; no Werner parameter p in [0, 1] matches it")]
    CorrelatorOutOfRange(String),
    #[error("Werner parameter {0} is outside [0, 1]")]
    POutOfRange(String),
    #[error("coordination number must be >= 1, got {0}")]
    BadCoordination(i64),
    #[error("gas size must be >= 1, got {0}")]
    BadGasSize(i64),
    #[error("error bar must be finite and >= 0, got {0}")]
    BadErrorBar(f64),
    #[error("need at least 3 data points, got {0}")]
    TooFewPoints(usize),
    #[error("system size L = {0} appears more than once")]
    DuplicateSize(usize),
    #[error("point L = {0} has a non-positive or non-finite error")]
    BadPointError(usize),
    #[error("fit design matrix is singular")]
    SingularFit,
    #[error("fit input: {0}")]
    Csv(#[from] csv::Error),
}

/// A correlator value with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub enum Correlator {
    Exact(BigRational),
    Estimate { mean: f64, err: f64 },
}

impl Correlator {
    pub fn value(&self) -> f64 {
        match self {
            Correlator::Exact(r) => to_f64(r),
            Correlator::Estimate { mean, .. } => *mean,
        }
    }

    pub fn err(&self) -> f64 {
        match self {
            Correlator::Exact(_) => 0.0,
            Correlator::Estimate { err, .. } => *err,
        }
    }
}

fn quarter_bounds() -> (BigRational, BigRational) {
    (ratio(-3, 4), BigRational::zero())
}

pub fn werner_p(corr: f64) -> Result<f64, AnalysisError> {
    if !(-0.75..=0.0).contains(&corr) {
        return Err(AnalysisError::CorrelatorOutOfRange(corr.to_string()));
    }
    Ok(-4.0 / 3.0 * corr)
}

pub fn werner_p_exact(corr: &BigRational) -> Result<BigRational, AnalysisError> {
    let (lo, hi) = quarter_bounds();
    if *corr < lo || *corr > hi {
        return Err(AnalysisError::CorrelatorOutOfRange(to_fraction_string(corr)));
    }
    Ok(-ratio(4, 3) * corr)
}

/// `<S_i.S_j> = -3p/4`.
pub fn correlator_from_p(p: &BigRational) -> BigRational {
    -ratio(3, 4) * p
}

fn check_p(p: f64) -> Result<(), AnalysisError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AnalysisError::POutOfRange(p.to_string()))
    }
}

/// Entangled iff `p > 1/3` (strictly).
pub fn entanglement_verdict(p: f64) -> Result<bool, AnalysisError> {
    check_p(p)?;
    Ok(p > 1.0 / 3.0)
}

pub fn entanglement_verdict_exact(p: &BigRational) -> Result<bool, AnalysisError> {
    if p.is_negative() || *p > ratio(1, 1) {
        return Err(AnalysisError::POutOfRange(to_fraction_string(p)));
    }
    Ok(*p > ratio(1, 3))
}

/// `C = max(0, (3p - 1)/2)`.
pub fn concurrence(p: f64) -> Result<f64, AnalysisError> {
    check_p(p)?;
    Ok(((3.0 * p - 1.0) / 2.0).max(0.0))
}

pub fn concurrence_exact(p: &BigRational) -> Result<BigRational, AnalysisError> {
    entanglement_verdict_exact(p)?;
    let c = (ratio(3, 1) * p - ratio(1, 1)) / ratio(2, 1);
    Ok(if c.is_negative() { BigRational::zero() } else { c })
}

fn binary_entropy(x: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(x) + term(1.0 - x)
}

/// Entanglement of formation (in ebits) of the Werner state with parameter
/// `p`: `h((1 + sqrt(1 - C^2))/2)` with `h` the base-2 binary entropy.
pub fn eof(p: f64) -> Result<f64, AnalysisError> {
    let c = concurrence(p)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(binary_entropy((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0))
}

/// Exact results for the bipartite RVB gas of `2N` spins.
#[derive(Debug, Clone, PartialEq)]
pub struct GasClosedForms {
    pub n: u64,
    /// `-1/4 - 1/(2N)`.
    pub corr_opposite: BigRational,
    /// `+1/4`; there is no same-sublattice pair when `N = 1`.
    pub corr_same: Option<BigRational>,
    /// `1/3 + 2/(3N)`.
    pub p: BigRational,
}

pub fn gas_closed_forms(n: i64) -> Result<GasClosedForms, AnalysisError> {
    if n < 1 {
        return Err(AnalysisError::BadGasSize(n));
    }
    Ok(GasClosedForms {
        n: n as u64,
        corr_opposite: ratio(-1, 4) - ratio(1, 2 * n),
        corr_same: (n >= 2).then(|| ratio(1, 4)),
        p: ratio(1, 3) + ratio(2, 3 * n),
    })
}

/// Anderson lower bound for a spin with `z` symmetry-equivalent partners.
#[derive(Debug, Clone, PartialEq)]
pub struct AndersonBound {
    pub z: u64,
    /// `-1/4 - 1/(2z)`.
    pub corr_min: BigRational,
    /// `1/3 + 2/(3z)`.
    pub p_max: BigRational,
}

pub fn anderson_bound(z: i64) -> Result<AndersonBound, AnalysisError> {
    if z < 1 {
        return Err(AnalysisError::BadCoordination(z));
    }
    Ok(AndersonBound {
        z: z as u64,
        corr_min: ratio(-1, 4) - ratio(1, 2 * z),
        p_max: ratio(1, 3) + ratio(2, 3 * z),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundStatus {
    Satisfied,
    Saturated,
    Violated,
}

/// Compares a correlator against the Anderson bound for `z`. An estimate
/// within three error bars of the bound counts as saturating it; an exact
/// value saturates only on exact equality.
pub fn check_bound(corr: &Correlator, z: i64) -> Result<BoundStatus, AnalysisError> {
    let bound = anderson_bound(z)?;
    match corr {
        Correlator::Exact(v) => Ok(match v.cmp(&bound.corr_min) {
            std::cmp::Ordering::Equal => BoundStatus::Saturated,
            std::cmp::Ordering::Greater => BoundStatus::Satisfied,
            std::cmp::Ordering::Less => BoundStatus::Violated,
        }),
        Correlator::Estimate { mean, err } => {
            if !err.is_finite() || *err < 0.0 {
                return Err(AnalysisError::BadErrorBar(*err));
            }
            let min = to_f64(&bound.corr_min);
            Ok(if (mean - min).abs() <= 3.0 * err {
                BoundStatus::Saturated
            } else if *mean > min {
                BoundStatus::Satisfied
            } else {
                BoundStatus::Violated
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WernerSummary {
    pub p: f64,
    /// Exact `p` as `"num/den"` when the correlator was exact.
    pub p_exact: Option<String>,
    pub p_err: Option<f64>,
    pub concurrence: f64,
    pub concurrence_exact: Option<String>,
    pub eof: f64,
    pub entangled: bool,
    pub bound_z: Option<u64>,
    pub bound_status: Option<BoundStatus>,
    pub bound_satisfied: Option<bool>,
}

/// Werner parameter, concurrence, EoF and verdict for `corr`; with `z`, also
/// the Anderson-bound status.
pub fn summarize(corr: &Correlator, z: Option<i64>) -> Result<WernerSummary, AnalysisError> {
    let status = z.map(|z| check_bound(corr, z)).transpose()?;
    let mut summary = match corr {
        Correlator::Exact(v) => {
            let p = werner_p_exact(v)?;
            let c = concurrence_exact(&p)?;
            let pf = to_f64(&p);
            WernerSummary {
                p: pf,
                p_exact: Some(to_fraction_string(&p)),
                p_err: None,
                concurrence: to_f64(&c),
                concurrence_exact: Some(to_fraction_string(&c)),
                eof: eof(pf)?,
                entangled: entanglement_verdict_exact(&p)?,
                bound_z: None,
                bound_status: None,
                bound_satisfied: None,
            }
        }
        Correlator::Estimate { mean, err } => {
            let p = werner_p(*mean)?;
            WernerSummary {
                p,
                p_exact: None,
                p_err: Some(4.0 / 3.0 * err),
                concurrence: concurrence(p)?,
                concurrence_exact: None,
                eof: eof(p)?,
                entangled: entanglement_verdict(p)?,
                bound_z: None,
                bound_status: None,
                bound_satisfied: None,
            }
        }
    };
    if let (Some(z), Some(status)) = (z, status) {
        summary.bound_z = Some(z as u64);
        summary.bound_status = Some(status);
        summary.bound_satisfied = Some(status != BoundStatus::Violated);
    }
    Ok(summary)
}

/// One finite-size data point. Serialized with the CSV header `L,p,p_err`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub p_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Chi2Handling {
    /// Scale the parameter errors by `sqrt(chi2/dof)` when it exceeds 1.
    #[default]
    InflateAboveOne,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCandidate {
    pub l_min: usize,
    pub n_points: usize,
    pub p_infinity: f64,
    pub p_infinity_err: f64,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p_infinity: f64,
    pub p_infinity_err: f64,
    /// `(a, b)` in `p(L) = p_inf + a/L + b/L^2`.
    pub coefficients: (f64, f64),
    pub coefficient_errs: (f64, f64),
    pub l_min_used: usize,
    pub n_points: usize,
    pub chi2: f64,
    pub dof: usize,
    /// `chi2 / dof`; reported as 0 when the fit has no degrees of freedom.
    pub chi2_per_dof: f64,
    pub chi2_handling: Chi2Handling,
    /// Every `L_min` tried, in scan order.
    pub candidates: Vec<FitCandidate>,
}

struct RawFit {
    params: [f64; 3],
    errs: [f64; 3],
    chi2: f64,
    dof: usize,
    n_points: usize,
}

fn weighted_fit(points: &[FitPoint], handling: Chi2Handling) -> Result<RawFit, AnalysisError> {
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |r, c| (points[r].size as f64).powi(-(c as i32)));
    let weights = DVector::from_iterator(n, points.iter().map(|pt| pt.p_err.powi(-2)));
    let y = DVector::from_iterator(n, points.iter().map(|pt| pt.p));

    let weighted = DMatrix::from_fn(n, 3, |r, c| design[(r, c)] * weights[r]);
    let normal = design.transpose() * &weighted;
    let rhs = weighted.transpose() * &y;
    let chol = normal.clone().cholesky().ok_or(AnalysisError::SingularFit)?;
    let params = chol.solve(&rhs);
    let cov = chol.inverse();
    if !params.iter().chain(cov.iter()).all(|v| v.is_finite()) {
        return Err(AnalysisError::SingularFit);
    }

    let resid = &y - &design * &params;
    let chi2: f64 = resid.iter().zip(weights.iter()).map(|(r, w)| r * r * w).sum();
    let dof = n - 3;
    let scale = match handling {
        Chi2Handling::InflateAboveOne if dof > 0 && chi2 / dof as f64 > 1.0 => (chi2 / dof as f64).sqrt(),
        _ => 1.0,
    };
    Ok(RawFit {
        params: [params[0], params[1], params[2]],
        errs: [0, 1, 2].map(|k| cov[(k, k)].sqrt() * scale),
        chi2,
        dof,
        n_points: n,
    })
}

/// Weighted least-squares fit of `p(L) = p_inf + a/L + b/L^2`, repeated with
/// the smallest and the second-smallest `L` as lower cutoff. Among fits with
/// at least one degree of freedom the one whose `chi2/dof` is closest to 1
/// is reported; with exactly three points the single exact fit is used.
pub fn extrapolate(points: &[FitPoint]) -> Result<FitResult, AnalysisError> {
    extrapolate_with(points, Chi2Handling::default())
}

pub fn extrapolate_with(points: &[FitPoint], handling: Chi2Handling) -> Result<FitResult, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|pt| pt.size);
    if let Some(w) = sorted.windows(2).find(|w| w[0].size == w[1].size) {
        return Err(AnalysisError::DuplicateSize(w[0].size));
    }
    if let Some(pt) = sorted
        .iter()
        .find(|pt| pt.size == 0 || !(pt.p_err.is_finite() && pt.p_err > 0.0) || !pt.p.is_finite())
    {
        return Err(AnalysisError::BadPointError(pt.size));
    }

    let mut fits = Vec::new();
    for skip in 0..2 {
        let subset = &sorted[skip..];
        if subset.len() < 3 {
            break;
        }
        fits.push((subset[0].size, weighted_fit(subset, handling)?));
    }
    let per_dof = |f: &RawFit| if f.dof == 0 { 0.0 } else { f.chi2 / f.dof as f64 };
    let chosen = fits
        .iter()
        .enumerate()
        .filter(|(_, (_, f))| f.dof > 0)
        .min_by(|(_, (_, a)), (_, (_, b))| {
            (per_dof(a) - 1.0).abs().total_cmp(&(per_dof(b) - 1.0).abs())
        })
        .map(|(k, _)| k)
        .unwrap_or(0);

    let candidates = fits
        .iter()
        .map(|(l_min, f)| FitCandidate {
            l_min: *l_min,
            n_points: f.n_points,
            p_infinity: f.params[0],
            p_infinity_err: f.errs[0],
            chi2: f.chi2,
            dof: f.dof,
            chi2_per_dof: per_dof(f),
        })
        .collect();
    let (l_min, f) = &fits[chosen];
    Ok(FitResult {
        p_infinity: f.params[0],
        p_infinity_err: f.errs[0],
        coefficients: (f.params[1], f.params[2]),
        coefficient_errs: (f.errs[1], f.errs[2]),
        l_min_used: *l_min,
        n_points: f.n_points,
        chi2: f.chi2,
        dof: f.dof,
        chi2_per_dof: per_dof(f),
        chi2_handling: handling,
        candidates,
    })
}

/// Reads fit points from CSV with a required `L,p,p_err` header.
pub fn read_fit_csv<R: Read>(reader: R) -> Result<Vec<FitPoint>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["L", "p", "p_err"] {
        if !headers.iter().any(|h| h == required) {
            return Err(AnalysisError::Csv(csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("missing `{required}` column (header `L,p,p_err` required)"),
            ))));
        }
    }
    rdr.deserialize().map(|r| r.map_err(AnalysisError::from)).collect()
}

pub fn write_fit_csv(points: &[FitPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for pt in points {
        w.serialize(pt).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}
