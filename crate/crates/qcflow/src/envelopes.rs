//! Spatial quasiconvex and power-convex envelopes of a sampled field, and
//! the large-exponent convergence study of the power envelope.
//!
//! The minimizing pair search runs over grid nodes y with the partner
//! z = (x - lambda y)/(1 - lambda) interpolated; pairs leaving the box are
//! skipped (coercive fields keep minimizers compact). The trivial pair
//! y = z = x is always admissible, so envelopes never exceed the field.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// All grid nodes as y; O(N^2) per field.
    Exhaustive,
    /// y restricted to the axis and diagonal lines through x; an upper bound
    /// for the exhaustive envelope, exact in 1D.
    DirectionRestricted,
}

#[derive(Clone, Copy, Debug)]
pub struct EnvelopeParams {
    pub lambda: f64,
    /// Power exponent; `None` selects the quasiconvex (max) objective.
    pub q: Option<f64>,
    pub search: SearchMode,
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Envelope(format!("lambda must lie in (0,1), got {}", self.lambda)));
        }
        if let Some(q) = self.q {
            if !(q > 1.0) {
                return Err(Error::Envelope(format!("q must exceed 1, got {q}")));
            }
        }
        Ok(())
    }
}

/// lambda-weighted objective: max for the quasiconvex envelope, the q-mean
/// for the power envelope. Computed in the scale of the larger value so that
/// equal inputs reproduce exactly and large exponents cannot overflow.
fn objective(q: Option<f64>, lambda: f64, uy: f64, uz: f64) -> f64 {
    match q {
        None => uy.max(uz),
        Some(q) => {
            let (hi, lo, w_hi, w_lo) =
                if uy >= uz { (uy, uz, lambda, 1.0 - lambda) } else { (uz, uy, 1.0 - lambda, lambda) };
            if hi <= 0.0 {
                return f64::NAN;
            }
            let r = lo / hi;
            hi * (w_hi + w_lo * r.powf(q)).powf(1.0 / q)
        }
    }
}

fn envelope_at_node(
    field: &ScalarField,
    flat: usize,
    params: &EnvelopeParams,
) -> f64 {
    let g = field.grid();
    let lambda = params.lambda;
    let x = g.point(flat);
    let mut best = field.values()[flat]; // trivial pair y = z = x
    let mut z = vec![0.0; g.dim()];
    let mut consider = |y_flat: usize| {
        let y = g.point(y_flat);
        for k in 0..g.dim() {
            z[k] = (x[k] - lambda * y[k]) / (1.0 - lambda);
        }
        if !g.contains(&z) {
            return;
        }
        let uy = field.values()[y_flat];
        let uz = field.interpolate(&z);
        let v = objective(params.q, lambda, uy, uz);
        if v < best {
            best = v;
        }
    };
    match (params.search, g.dim()) {
        (SearchMode::Exhaustive, _) | (_, 1) => {
            for y_flat in 0..g.num_points() {
                consider(y_flat);
            }
        }
        (SearchMode::DirectionRestricted, _) => {
            let (nx, ny) = (g.counts()[0], g.counts()[1]);
            let (i0, j0) = (flat / ny, flat % ny);
            for dir in [(1isize, 0isize), (0, 1), (1, 1), (1, -1)] {
                let mut walk = |sign: isize| {
                    let mut s = 1isize;
                    loop {
                        let i = i0 as isize + sign * s * dir.0;
                        let j = j0 as isize + sign * s * dir.1;
                        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                            break;
                        }
                        consider(i as usize * ny + j as usize);
                        s += 1;
                    }
                };
                walk(1);
                walk(-1);
            }
        }
    }
    best
}

fn envelope(field: &ScalarField, params: &EnvelopeParams) -> Result<ScalarField> {
    params.validate()?;
    if field.min() <= 0.0 {
        return Err(Error::Envelope(format!(
            "envelope needs a strictly positive field, min = {}",
            field.min()
        )));
    }
    let n = field.grid().num_points();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|flat| envelope_at_node(field, flat, params))
        .collect();
    let mut out = field.clone();
    out.values_mut().copy_from_slice(&values);
    Ok(out)
}

/// Quasiconvex envelope: per node the smallest max{u(y), u(z)} over
/// admissible decompositions x = lambda y + (1 - lambda) z.
pub fn quasiconvex_envelope(field: &ScalarField, params: &EnvelopeParams) -> Result<ScalarField> {
    let p = EnvelopeParams { q: None, ..*params };
    envelope(field, &p)
}

/// Power envelope with the lambda-weighted q-mean objective; requires q > 1
/// and a positive field.
pub fn power_envelope(field: &ScalarField, params: &EnvelopeParams) -> Result<ScalarField> {
    if params.q.is_none() {
        return Err(Error::Envelope("power envelope needs an exponent q".into()));
    }
    envelope(field, params)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapStudyRow {
    pub q: f64,
    pub sup_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapStudy {
    pub rows: Vec<GapStudyRow>,
    /// Least-squares slope of ln(sup_gap) against ln(q).
    pub fitted_slope: f64,
    /// C = max over nodes of q0 * gap / (u* + 1) at the first exponent.
    pub c_at_first_q: f64,
    /// max over nodes and q >= 4 of gap - (C/q)(u* + 1); <= 0 when the
    /// fitted bound holds.
    pub bound_worst_violation: f64,
    /// Power envelopes nondecreasing in q at every node (1e-12 slack).
    pub monotone_in_q: bool,
}

/// Gap study u*_lambda - u_{q,lambda} over increasing exponents, with the
/// sup taken over a compact sub-box.
pub fn envelope_gap_study(
    field: &ScalarField,
    lambda: f64,
    qs: &[f64],
    sub_lo: &[f64],
    sub_hi: &[f64],
) -> Result<GapStudy> {
    if qs.len() < 2 || qs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Envelope("need at least two increasing exponents".into()));
    }
    let g = field.grid();
    let params = EnvelopeParams { lambda, q: None, search: SearchMode::Exhaustive };
    let ustar = quasiconvex_envelope(field, &params)?;
    let in_sub: Vec<bool> = (0..g.num_points())
        .map(|flat| {
            let x = g.point(flat);
            (0..g.dim()).all(|k| x[k] >= sub_lo[k] - 1e-12 && x[k] <= sub_hi[k] + 1e-12)
        })
        .collect();
    if !in_sub.iter().any(|&b| b) {
        return Err(Error::Envelope("empty sub-box".into()));
    }

    let mut rows = Vec::new();
    let mut monotone = true;
    let mut prev: Option<Vec<f64>> = None;
    let mut gaps_by_q: Vec<Vec<f64>> = Vec::new();
    for &q in qs {
        let uq = power_envelope(field, &EnvelopeParams { lambda, q: Some(q), search: SearchMode::Exhaustive })?;
        if let Some(p) = &prev {
            if uq.values().iter().zip(p).any(|(now, before)| *now < before - 1e-12) {
                monotone = false;
            }
        }
        let gaps: Vec<f64> = ustar
            .values()
            .iter()
            .zip(uq.values())
            .map(|(s, p)| (s - p).max(0.0))
            .collect();
        let sup_gap = gaps
            .iter()
            .zip(&in_sub)
            .filter(|(_, &m)| m)
            .map(|(g, _)| *g)
            .fold(0.0f64, f64::max);
        rows.push(GapStudyRow { q, sup_gap });
        gaps_by_q.push(gaps);
        prev = Some(uq.values().to_vec());
    }

    // log-log least squares on the sup gaps
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.q.ln(), r.sup_gap.max(1e-300).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let fitted_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    // fit C at the first exponent, verify the bound at q >= 4
    let q0 = qs[0];
    let c_at_first_q = gaps_by_q[0]
        .iter()
        .zip(ustar.values())
        .zip(&in_sub)
        .filter(|(_, &m)| m)
        .map(|((gap, s), _)| q0 * gap / (s + 1.0))
        .fold(0.0f64, f64::max);
    let mut bound_worst_violation = f64::NEG_INFINITY;
    for (row, gaps) in rows.iter().zip(&gaps_by_q).skip(1) {
        if row.q < 4.0 {
            continue;
        }
        let v = gaps
            .iter()
            .zip(ustar.values())
            .zip(&in_sub)
            .filter(|(_, &m)| m)
            .map(|((gap, s), _)| gap - c_at_first_q / row.q * (s + 1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        bound_worst_violation = bound_worst_violation.max(v);
    }

    Ok(GapStudy { rows, fitted_slope, c_at_first_q, bound_worst_violation, monotone_in_q: monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    fn params(lambda: f64, q: Option<f64>) -> EnvelopeParams {
        EnvelopeParams { lambda, q, search: SearchMode::Exhaustive }
    }

    #[test]
    fn quasiconvex_field_is_a_fixed_point() {
        let g = GridSpec::new_1d(-2.0, 2.0, 201).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] * x[0] + 1.0).unwrap();
        let e = quasiconvex_envelope(&f, &params(0.5, None)).unwrap();
        for (a, b) in f.values().iter().zip(e.values()) {
            assert!(*b <= *a + 1e-15);
            assert!((a - b).abs() <= 1e-9, "envelope moved a quasiconvex field: {a} vs {b}");
        }
    }

    #[test]
    fn double_well_bridged_at_origin() {
        // nodes at +-1 exactly: N = 513 on [-2, 2]
        let g = GridSpec::new_1d(-2.0, 2.0, 513).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| {
            ((x[0] - 1.0) * (x[0] - 1.0)).min((x[0] + 1.0) * (x[0] + 1.0)) + 1.0
        })
        .unwrap();
        let e = quasiconvex_envelope(&f, &params(0.5, None)).unwrap();
        let mid = 256; // x = 0
        assert!((g.coord(0, mid)).abs() < 1e-12);
        assert!((e.values()[mid] - 1.0).abs() < 1e-12, "pick y=1, z=-1");
    }

    #[test]
    fn constant_field_fixed_for_all_objectives() {
        let g = GridSpec::new_2d([-1.0, -1.0], [1.0, 1.0], [17, 17]).unwrap();
        let f = ScalarField::constant(g, 2.5).unwrap();
        let e = quasiconvex_envelope(&f, &params(0.3, None)).unwrap();
        assert!(e.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        for q in [2.0, 8.0, 64.0] {
            let p = power_envelope(&f, &params(0.3, Some(q))).unwrap();
            assert!(p.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn two_point_power_mean() {
        // u(-1)=1, u(1)=3 with a spike between: at x=0, q=2 the only useful
        // pair gives sqrt((1+9)/2) = sqrt 5
        let g = GridSpec::new_1d(-1.0, 1.0, 3).unwrap();
        let f = ScalarField::new(g, vec![1.0, 5.0, 3.0]).unwrap();
        let e = power_envelope(&f, &params(0.5, Some(2.0))).unwrap();
        assert!((e.values()[1] - 5.0f64.sqrt()).abs() < 1e-12);
        // q -> infinity approaches the max objective from below
        let big = power_envelope(&f, &params(0.5, Some(4096.0))).unwrap();
        assert!(big.values()[1] <= 3.0 + 1e-9);
        assert!((big.values()[1] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn invalid_params_rejected() {
        let g = GridSpec::new_1d(0.0, 1.0, 5).unwrap();
        let f = ScalarField::constant(g.clone(), 1.0).unwrap();
        assert!(quasiconvex_envelope(&f, &params(0.0, None)).is_err());
        assert!(quasiconvex_envelope(&f, &params(1.0, None)).is_err());
        assert!(power_envelope(&f, &params(0.5, Some(1.0))).is_err());
        assert!(power_envelope(&f, &params(0.5, None)).is_err());
        let neg = ScalarField::constant(g, -1.0).unwrap();
        assert!(power_envelope(&neg, &params(0.5, Some(2.0))).is_err());
    }

    #[test]
    fn sandwich_and_q_monotonicity() {
        let g = GridSpec::new_1d(-2.0, 2.0, 257).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            ((x[0] - 1.0) * (x[0] - 1.0)).min(4.0 * (x[0] + 1.0) * (x[0] + 1.0)) + 1.0
        })
        .unwrap();
        let star = quasiconvex_envelope(&f, &params(0.5, None)).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for q in [2.0, 4.0, 16.0] {
            let uq = power_envelope(&f, &params(0.5, Some(q))).unwrap();
            for k in 0..f.values().len() {
                assert!(uq.values()[k] <= star.values()[k] + 1e-12, "u_q <= u_star");
                assert!(star.values()[k] <= f.values()[k] + 1e-12, "u_star <= u");
                if let Some(p) = &prev {
                    assert!(uq.values()[k] >= p[k] - 1e-12, "monotone in q");
                }
            }
            prev = Some(uq.values().to_vec());
        }
    }

    #[test]
    fn restricted_search_upper_bounds_exhaustive() {
        let g = GridSpec::new_2d([-2.0, -2.0], [2.0, 2.0], [33, 33]).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            let a = (x[0] - 1.0) * (x[0] - 1.0) + x[1] * x[1];
            let b = (x[0] + 1.0) * (x[0] + 1.0) + x[1] * x[1];
            a.min(b) + 1.0
        })
        .unwrap();
        let ex = quasiconvex_envelope(
            &f,
            &EnvelopeParams { lambda: 0.5, q: None, search: SearchMode::Exhaustive },
        )
        .unwrap();
        let rs = quasiconvex_envelope(
            &f,
            &EnvelopeParams { lambda: 0.5, q: None, search: SearchMode::DirectionRestricted },
        )
        .unwrap();
        for k in 0..f.values().len() {
            assert!(rs.values()[k] >= ex.values()[k] - 1e-12);
        }
    }

    #[test]
    fn restricted_equals_exhaustive_in_1d() {
        let g = GridSpec::new_1d(-2.0, 2.0, 101).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0].abs().max(0.3) + 1.0).unwrap();
        for lambda in [0.25, 0.5, 0.75] {
            let ex = quasiconvex_envelope(
                &f,
                &EnvelopeParams { lambda, q: None, search: SearchMode::Exhaustive },
            )
            .unwrap();
            let rs = quasiconvex_envelope(
                &f,
                &EnvelopeParams { lambda, q: None, search: SearchMode::DirectionRestricted },
            )
            .unwrap();
            assert_eq!(ex.values(), rs.values());
        }
    }

    #[test]
    fn gap_study_on_quasiconvex_field_is_noise() {
        let g = GridSpec::new_1d(-2.0, 2.0, 129).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] * x[0] + 1.0).unwrap();
        let study =
            envelope_gap_study(&f, 0.5, &[2.0, 4.0, 8.0], &[-1.5], &[1.5]).unwrap();
        assert!(study.monotone_in_q);
        for row in &study.rows {
            assert!(row.sup_gap <= 1e-9, "q={} gap {}", row.q, row.sup_gap);
        }
    }
}
