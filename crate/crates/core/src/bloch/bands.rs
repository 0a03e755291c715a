use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::collocation::collocation_multipliers;
use crate::bloch::potential::NonlocalPotential1D;
use crate::bloch::schrodinger::local_transfer;
use crate::error::{FloquetError, Result};
use crate::floquet::{compare_multipliers, principal_arg};
use crate::grid::{PeriodicGrid, MIN_SAMPLES};
use crate::linalg;

pub const DEFAULT_UNIT_TOL: f64 = 1e-3;

/// Multipliers decaying or growing by more than this factor per cell are dropped: they are
/// far from the physical spectrum and the eigensolver resolves them poorly.
pub const RETAIN_RATIO: f64 = 1e4;

/// Multipliers of one cell at a fixed energy, split into propagating and evanescent.
#[derive(Debug, Clone, Serialize)]
pub struct PropagatingSet {
    pub energy: f64,
    /// Multipliers with `1/RETAIN_RATIO <= |mu| <= RETAIN_RATIO`, largest first.
    #[serde(skip)]
    pub all: Vec<Complex64>,
    /// Multipliers with `|ln|mu|| <= unit_tol`, ordered by phase.
    #[serde(skip)]
    pub propagating: Vec<Complex64>,
    /// `arg(mu) / a` in `(-pi/a, pi/a]`, ascending.
    pub k_values: Vec<f64>,
    pub p: usize,
    /// Whether the count `p` is reproduced on the half-resolution grid.
    pub confirmed: bool,
    /// Largest relative distance from `1/conj(mu)` to the nearest retained multiplier.
    pub pairing_residual: f64,
}

fn cell_multipliers(pot: &NonlocalPotential1D, energy: f64, samples: usize) -> Result<Vec<Complex64>> {
    if pot.is_local() {
        linalg::eigenvalues(&local_transfer(pot, energy, samples)?)
    } else {
        collocation_multipliers(pot, energy, samples)
    }
}

/// Counts with the logarithm so that `mu` and `1/mu` are always classified together.
fn is_propagating(mu: &Complex64, unit_tol: f64) -> bool {
    mu.norm().ln().abs() <= unit_tol
}

/// Propagating Bloch multipliers at energy `E`.
///
/// Local potentials use the one-cell transfer matrix of the Schrödinger system; nonlocal ones
/// use whole-cell collocation. The count is confirmed on a grid with half the samples.
pub fn propagating_multipliers(
    pot: &NonlocalPotential1D,
    energy: f64,
    grid: &PeriodicGrid,
    unit_tol: f64,
) -> Result<PropagatingSet> {
    if (grid.period() - pot.lattice()).abs() > 1e-12 * pot.lattice() {
        return Err(FloquetError::InvalidGrid(format!(
            "grid period {} differs from lattice constant {}",
            grid.period(),
            pot.lattice()
        )));
    }
    if !(unit_tol > 0.0 && unit_tol < 1.0) {
        return Err(FloquetError::InvalidArgument(format!("unit tolerance must lie in (0, 1), got {unit_tol}")));
    }
    if !energy.is_finite() {
        return Err(FloquetError::InvalidArgument(format!("energy must be finite, got {energy}")));
    }
    let a = pot.lattice();
    let retained = |m: &Complex64| m.norm().ln().abs() <= RETAIN_RATIO.ln();
    let mut all: Vec<Complex64> = cell_multipliers(pot, energy, grid.samples())?.into_iter().filter(retained).collect();
    all.sort_by(compare_multipliers);
    let mut propagating: Vec<Complex64> = all.iter().copied().filter(|m| is_propagating(m, unit_tol)).collect();
    propagating.sort_by(|x, y| principal_arg(*x).total_cmp(&principal_arg(*y)));
    let k_values: Vec<f64> = propagating.iter().map(|m| principal_arg(*m) / a).collect();
    let coarse = (grid.samples() / 2).max(MIN_SAMPLES);
    let confirmed = coarse == grid.samples()
        || cell_multipliers(pot, energy, coarse)?.iter().filter(|m| is_propagating(m, unit_tol)).count()
            == propagating.len();
    let pairing_residual = all
        .iter()
        .map(|m| {
            let r = m.inv().conj();
            all.iter().map(|o| (o - r).norm()).fold(f64::INFINITY, f64::min) / r.norm()
        })
        .fold(0.0, f64::max);
    Ok(PropagatingSet { energy, p: propagating.len(), all, propagating, k_values, confirmed, pairing_residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRecord {
    pub energy: f64,
    pub k_values: Vec<f64>,
    pub p: usize,
    /// Moduli of all retained multipliers, largest first.
    pub magnitudes: Vec<f64>,
    pub confirmed: bool,
    pub pairing_residual: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandDiagram {
    pub lattice: f64,
    pub unit_tol: f64,
    pub records: Vec<BandRecord>,
}

impl BandDiagram {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Propagating wavevectors over an ascending list of energies, computed in parallel.
///
/// Failures at single energies are stored in the record instead of aborting the scan.
pub fn band_scan(
    pot: &NonlocalPotential1D,
    energies: &[f64],
    grid: &PeriodicGrid,
    unit_tol: f64,
) -> Result<BandDiagram> {
    if energies.is_empty() {
        return Err(FloquetError::InvalidArgument("energy grid is empty".into()));
    }
    if energies.iter().any(|e| !e.is_finite()) || energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FloquetError::InvalidArgument("energies must be finite and strictly ascending".into()));
    }
    pot.check(grid.samples())?;
    let records = energies
        .par_iter()
        .map(|&e| match propagating_multipliers(pot, e, grid, unit_tol) {
            Ok(set) => BandRecord {
                energy: e,
                k_values: set.k_values,
                p: set.p,
                magnitudes: set.all.iter().map(|m| m.norm()).collect(),
                confirmed: set.confirmed,
                pairing_residual: set.pairing_residual,
                error: None,
            },
            Err(err) => BandRecord {
                energy: e,
                k_values: Vec::new(),
                p: 0,
                magnitudes: Vec::new(),
                confirmed: false,
                pairing_residual: f64::NAN,
                error: Some(err.to_string()),
            },
        })
        .collect();
    Ok(BandDiagram { lattice: pot.lattice(), unit_tol, records })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub band: usize,
    pub k: f64,
    pub energy: f64,
}

/// Point where two traced sheets meet at the same wavevector and energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub k: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremaReport {
    pub extrema: Vec<Extremum>,
    pub crossings: Vec<Crossing>,
    pub bands: usize,
    /// Set when some record has more than one propagating pair, so sheets had to be
    /// separated by continuity.
    pub ambiguous: bool,
    pub ambiguous_energies: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Sheet {
    points: Vec<(f64, f64)>,
    born: usize,
    died: usize,
}

/// Follows each non-negative wavevector from energy to energy by nearest matching.
fn trace_sheets(diagram: &BandDiagram, jump: f64) -> Vec<Sheet> {
    let mut done = Vec::new();
    let mut active: Vec<Sheet> = Vec::new();
    for (i, rec) in diagram.records.iter().enumerate() {
        let mut ks = rec.k_values.clone();
        ks.sort_by(f64::total_cmp);
        let half: Vec<f64> = if rec.error.is_some() { Vec::new() } else { ks[ks.len() / 2..].to_vec() };
        let mut pairs: Vec<(f64, usize, usize)> = active
            .iter()
            .enumerate()
            .flat_map(|(s, sh)| {
                let last = sh.points.last().expect("sheets are never empty").1;
                half.iter().enumerate().map(move |(v, k)| ((k - last).abs(), s, v))
            })
            .filter(|p| p.0 <= jump)
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut sheet_to: Vec<Option<usize>> = vec![None; active.len()];
        let mut value_used = vec![false; half.len()];
        for (_, s, v) in pairs {
            if sheet_to[s].is_none() && !value_used[v] {
                sheet_to[s] = Some(v);
                value_used[v] = true;
            }
        }
        let mut next = Vec::new();
        for (mut sh, to) in active.into_iter().zip(sheet_to) {
            match to {
                Some(v) => {
                    sh.points.push((rec.energy, half[v]));
                    next.push(sh);
                }
                None => {
                    sh.died = i;
                    done.push(sh);
                }
            }
        }
        for (v, k) in half.iter().enumerate() {
            if !value_used[v] {
                next.push(Sheet { points: vec![(rec.energy, *k)], born: i, died: usize::MAX });
            }
        }
        active = next;
    }
    let end = diagram.records.len();
    done.extend(active.into_iter().map(|mut s| {
        s.died = end;
        s
    }));
    done.sort_by(|a, b| a.born.cmp(&b.born).then(a.points[0].1.total_cmp(&b.points[0].1)));
    done
}

/// Sheets meeting between two records.
///
/// Nearest matching keeps the order of the wavevectors, so crossing sheets appear to touch
/// and separate again. A touch is a local minimum of the gap that is no larger than the
/// change of the gap over the adjacent step, as for two lines meeting within that step.
fn crossings(sheets: &[Sheet]) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (i, a) in sheets.iter().enumerate() {
        for b in &sheets[i + 1..] {
            let (lo, hi) = (a.born.max(b.born), a.died.min(b.died));
            if hi < lo + 3 {
                continue;
            }
            let at = |s: &Sheet, r: usize| s.points[r - s.born];
            let gap = |r: usize| (at(a, r).1 - at(b, r).1).abs();
            for r in lo + 1..hi - 1 {
                let (before, here, after) = (gap(r - 1), gap(r), gap(r + 1));
                if here <= before && here <= after && here <= (before - here).max(after - here) {
                    let (pa, pb) = (at(a, r), at(b, r));
                    out.push(Crossing { k: 0.5 * (pa.1 + pb.1), energy: pa.0 });
                }
            }
        }
    }
    out.sort_by(|x, y| x.energy.total_cmp(&y.energy).then(x.k.total_cmp(&y.k)));
    out
}

/// Joins pairs of sheets that appear (or vanish) together at the same interior wavevector:
/// that is where a band turns around at an interior extremum.
fn glue(sheets: Vec<Sheet>, zone: f64, jump: f64, scan_len: usize) -> Vec<Vec<(f64, f64)>> {
    let interior = |k: f64| k > zone / 8.0 && k < zone * 7.0 / 8.0;
    let mut used = vec![false; sheets.len()];
    let mut bands = Vec::new();
    for i in 0..sheets.len() {
        if used[i] {
            continue;
        }
        let mut partner = None;
        for j in i + 1..sheets.len() {
            if used[j] {
                continue;
            }
            let (a, b) = (&sheets[i], &sheets[j]);
            let (ka, kb) = (a.points[0].1, b.points[0].1);
            if a.born == b.born && a.born > 0 && (ka - kb).abs() < jump && interior(ka) && interior(kb) {
                partner = Some((j, true));
                break;
            }
            let (la, lb) = (a.points.last().unwrap().1, b.points.last().unwrap().1);
            if a.died == b.died && a.died < scan_len && (la - lb).abs() < jump && interior(la) && interior(lb) {
                partner = Some((j, false));
                break;
            }
        }
        used[i] = true;
        match partner {
            Some((j, at_birth)) => {
                used[j] = true;
                let (mut first, mut second) = (sheets[i].points.clone(), sheets[j].points.clone());
                if at_birth {
                    first.reverse();
                } else {
                    second.reverse();
                }
                first.extend(second);
                bands.push(first);
            }
            None => bands.push(sheets[i].points.clone()),
        }
    }
    bands
}

/// Splits a band where the wavevector reverses next to the zone center or edge (a fold).
fn split_folds(band: Vec<(f64, f64)>, zone: f64) -> Vec<Vec<(f64, f64)>> {
    let near_edge = |k: f64| k <= zone / 8.0 || k >= zone * 7.0 / 8.0;
    let mut out = Vec::new();
    let mut current = vec![band[0]];
    for w in 1..band.len() {
        if current.len() >= 2 {
            let (k0, k1, k2) = (current[current.len() - 2].1, current[current.len() - 1].1, band[w].1);
            if (k1 - k0) * (k2 - k1) < 0.0 && near_edge(k1) {
                out.push(std::mem::take(&mut current));
            }
        }
        current.push(band[w]);
    }
    out.push(current);
    out
}

/// Interior extrema of `E(k)` on the half zone `k in (0, pi/a)`.
///
/// Bands are traced by continuity of the positive wavevectors in energy; a new band starts
/// when the count drops to zero or `k` jumps by more than `pi/(2a)`. Within a band, a sign
/// change of the finite-difference slope `dE/dk` more than two points away from either end
/// is reported.
pub fn detect_interior_extrema(diagram: &BandDiagram) -> ExtremaReport {
    let zone = PI / diagram.lattice;
    let jump = zone / 2.0;
    let ambiguous_energies: Vec<f64> = diagram.records.iter().filter(|r| r.p > 2).map(|r| r.energy).collect();
    let sheets = trace_sheets(diagram, jump);
    let crossings = crossings(&sheets);
    let bands: Vec<Vec<(f64, f64)>> =
        glue(sheets, zone, jump, diagram.records.len()).into_iter().flat_map(|b| split_folds(b, zone)).collect();
    let mut extrema = Vec::new();
    for (index, band) in bands.iter().enumerate() {
        let n = band.len();
        if n < 6 {
            continue;
        }
        // Slopes between consecutive points; zero-energy steps carry no sign.
        let mut last_sign: Option<(f64, usize)> = None;
        for i in 0..n - 1 {
            let (de, dk) = (band[i + 1].0 - band[i].0, band[i + 1].1 - band[i].1);
            if de == 0.0 || dk == 0.0 {
                continue;
            }
            let sign = (de / dk).signum();
            if let Some((prev, at)) = last_sign {
                if prev != sign {
                    // The turning point is the extreme energy between the two slopes.
                    let seg = &band[at + 1..=i];
                    let pick = |a: &&(f64, f64), b: &&(f64, f64)| a.0.total_cmp(&b.0);
                    let turning = if de * (band[i].0 - band[at].0).signum() > 0.0 {
                        seg.iter().min_by(pick)
                    } else {
                        seg.iter().max_by(pick)
                    }
                    .copied()
                    .unwrap_or(band[i]);
                    let twins: Vec<&(f64, f64)> = seg.iter().filter(|p| p.0 == turning.0).collect();
                    let k = twins.iter().map(|p| p.1).sum::<f64>() / twins.len() as f64;
                    if at + 1 >= 2 && i + 2 < n {
                        extrema.push(Extremum { band: index, k, energy: turning.0 });
                    }
                }
            }
            last_sign = Some((sign, i));
        }
    }
    ExtremaReport {
        extrema,
        crossings,
        bands: bands.len(),
        ambiguous: !ambiguous_energies.is_empty(),
        ambiguous_energies,
    }
}

/// Energies where the propagating count changes, refined by bisection on `p`.
pub fn band_edges(
    pot: &NonlocalPotential1D,
    diagram: &BandDiagram,
    grid: &PeriodicGrid,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let unit_tol = diagram.unit_tol;
    let count = |e: f64| propagating_multipliers(pot, e, grid, unit_tol).map(|s| s.p);
    let mut edges = Vec::new();
    for w in diagram.records.windows(2) {
        if w[0].error.is_some() || w[1].error.is_some() || w[0].p == w[1].p {
            continue;
        }
        let (mut lo, mut hi, p_lo) = (w[0].energy, w[1].energy, w[0].p);
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if count(mid)? == p_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    Ok(edges)
}

/// The one-cell matrix whose eigenvalues are the multipliers of a local potential.
pub fn transfer_matrix(pot: &NonlocalPotential1D, energy: f64, grid: &PeriodicGrid) -> Result<DMatrix<f64>> {
    local_transfer(pot, energy, grid.samples())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1.0, n, 0.0).unwrap()
    }

    #[test]
    fn free_particle_plane_waves() {
        let pot = NonlocalPotential1D::free(1.0).unwrap();
        let set = propagating_multipliers(&pot, 1.0, &grid(256), DEFAULT_UNIT_TOL).unwrap();
        assert_eq!(set.p, 2);
        assert!((set.k_values[0] + 1.0).abs() < 1e-8 && (set.k_values[1] - 1.0).abs() < 1e-8, "{:?}", set.k_values);
        assert!(set.confirmed);
    }

    #[test]
    fn free_scan_folds_into_zone() {
        let pot = NonlocalPotential1D::free(1.0).unwrap();
        let d = band_scan(&pot, &[1.0, 4.0], &grid(256), DEFAULT_UNIT_TOL).unwrap();
        assert!((d.records[1].k_values[1] - 2.0).abs() < 1e-8);
        assert!(band_scan(&pot, &[], &grid(64), DEFAULT_UNIT_TOL).is_err());
        assert!(band_scan(&pot, &[2.0, 1.0], &grid(64), DEFAULT_UNIT_TOL).is_err());
    }

    #[test]
    fn gap_has_real_reciprocal_pair() {
        let pot = NonlocalPotential1D::kronig_penney(3.0, 1.0).unwrap();
        // D(E) > 1 just above zero: first gap.
        let set = propagating_multipliers(&pot, 1.0, &grid(128), DEFAULT_UNIT_TOL).unwrap();
        assert_eq!(set.p, 0);
        let prod = set.all[0] * set.all[1];
        assert!(set.all.iter().all(|m| m.im.abs() < 1e-12));
        assert!((prod - 1.0).norm() < 1e-8);
    }

    fn synthetic(points: &[(f64, &[f64])]) -> BandDiagram {
        BandDiagram {
            lattice: 1.0,
            unit_tol: DEFAULT_UNIT_TOL,
            records: points
                .iter()
                .map(|(e, ks)| {
                    let mut k: Vec<f64> = ks.iter().flat_map(|k| [-k, *k]).collect();
                    k.sort_by(f64::total_cmp);
                    BandRecord {
                        energy: *e,
                        p: k.len(),
                        k_values: k,
                        magnitudes: vec![],
                        confirmed: true,
                        pairing_residual: 0.0,
                        error: None,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn monotone_band_has_no_extrema() {
        let pts: Vec<(f64, Vec<f64>)> = (1..40).map(|i| (i as f64 * 0.2, vec![(i as f64 * 0.2).sqrt()])).collect();
        let refs: Vec<(f64, &[f64])> = pts.iter().map(|(e, k)| (*e, k.as_slice())).collect();
        let rep = detect_interior_extrema(&synthetic(&refs));
        assert!(rep.extrema.is_empty());
        assert!(rep.crossings.is_empty());
        assert!(!rep.ambiguous);
        assert_eq!(rep.bands, 1);
    }

    #[test]
    fn crossing_sheets_are_reported_once() {
        let pts: Vec<(f64, Vec<f64>)> = (0..41)
            .map(|i| {
                let e = 5.0 + i as f64 * 0.25;
                (e, vec![e / 10.0, 2.0 - e / 10.0])
            })
            .collect();
        let refs: Vec<(f64, &[f64])> = pts.iter().map(|(e, k)| (*e, k.as_slice())).collect();
        let rep = detect_interior_extrema(&synthetic(&refs));
        assert_eq!(rep.crossings.len(), 1, "{:?}", rep.crossings);
        assert!((rep.crossings[0].energy - 10.0).abs() < 1e-12 && (rep.crossings[0].k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_well_band_reports_its_minimum() {
        // E(k) = 1 + (k^2 - 2.25)^2 on (0, pi): minimum at k = 1.5, local maximum at k = 0.
        let pts: Vec<(f64, Vec<f64>)> = (1..80)
            .map(|i| {
                let e = i as f64 * 0.08;
                if e <= 1.0 {
                    return (e, vec![]);
                }
                let s = (e - 1.0).sqrt();
                let mut ks = vec![(2.25 + s).sqrt()];
                if 2.25 - s > 0.0 {
                    ks.insert(0, (2.25 - s).sqrt());
                }
                (e, ks)
            })
            .collect();
        let refs: Vec<(f64, &[f64])> = pts.iter().map(|(e, k)| (*e, k.as_slice())).collect();
        let rep = detect_interior_extrema(&synthetic(&refs));
        assert!(rep.ambiguous);
        assert_eq!(rep.extrema.len(), 1, "{rep:?}");
        assert!((rep.extrema[0].k - 1.5).abs() < 0.2, "{rep:?}");
    }
}
