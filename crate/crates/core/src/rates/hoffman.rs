use nalgebra::DMatrix;
use rayon::prelude::*;

use super::RateError;

/// Total number of rows (B, A and qᵀ together) the enumeration accepts.
pub const HOFFMAN_MAX_ROWS: usize = 12;

/// Rows whose smallest-to-largest singular value ratio is below this are
/// treated as linearly dependent.
const INDEPENDENCE_TOL: f64 = 1e-12;

/// Brute-force Hoffman constant for the polyhedron {x : Bx ≤ c, Ax = t,
/// qᵀx = s}: the largest ‖(u, v)‖ with ‖Bᵀu + (A; qᵀ)ᵀv‖ = 1, u ≥ 0 and the
/// rows carrying nonzero multipliers linearly independent.
///
/// For a fixed independent support S with row matrix M_S the maximum is
/// 1/σ_min(M_S), attained at the corresponding left singular vector. A
/// support only counts if that vector (up to sign) has no negative entry
/// on the rows of B.
pub fn hoffman_theta_bruteforce(a_rows: &[Vec<f64>], b_rows: &[Vec<f64>], q: &[f64]) -> Result<f64, RateError> {
    let rows: Vec<(&[f64], bool)> = b_rows
        .iter()
        .map(|r| (r.as_slice(), true))
        .chain(a_rows.iter().map(|r| (r.as_slice(), false)))
        .chain(std::iter::once((q, false)))
        .collect();
    if rows.len() > HOFFMAN_MAX_ROWS {
        return Err(RateError::SizeCap {
            rows: rows.len(),
            max: HOFFMAN_MAX_ROWS,
        });
    }
    let n = q.len();
    if let Some((r, _)) = rows.iter().find(|(r, _)| r.len() != n) {
        return Err(RateError::Dimension(format!(
            "row of length {} in a problem with {n} columns",
            r.len()
        )));
    }
    let best = (1u32..1 << rows.len())
        .into_par_iter()
        .filter(|mask| mask.count_ones() as usize <= n)
        .filter_map(|mask| support_value(&rows, mask))
        .reduce(|| 0.0, f64::max);
    if best > 0.0 {
        Ok(best)
    } else {
        Err(RateError::Undefined("no independent sign-feasible support".into()))
    }
}

fn support_value(rows: &[(&[f64], bool)], mask: u32) -> Option<f64> {
    let picked: Vec<&(&[f64], bool)> = rows
        .iter()
        .enumerate()
        .filter(|(j, _)| mask >> j & 1 == 1)
        .map(|(_, r)| r)
        .collect();
    let n = picked[0].0.len();
    let m = DMatrix::from_fn(picked.len(), n, |r, c| picked[r].0[c]);
    let svd = m.svd(true, false);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.argmin();
    let smax = sv.max();
    if smax == 0.0 || smin / smax <= INDEPENDENCE_TOL {
        return None;
    }
    let y = svd.u.as_ref()?.column(imin);
    let sign_ok = |s: f64| {
        picked
            .iter()
            .zip(y.iter())
            .all(|((_, is_b), v)| !is_b || s * v >= -1e-12)
    };
    (sign_ok(1.0) || sign_ok(-1.0)).then(|| 1.0 / smin)
}
