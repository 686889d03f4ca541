//! Constrained identification of the load coefficients.
//!
//! Each usable frame contributes one row
//!
//! ```text
//! [ n·(T_p - T),  T_o - T,  V_w·(T_w_in - T_w_out) ] · [c_p, α, -β_ac]ᵀ = c·M_z·Δ
//! ```
//!
//! and the coefficients minimise the relative L1 mismatch
//!
//! ```text
//! Σ |a1·c_p + a2·α - a3·β_ac - b|  /  Σ (a1·c_p + a2·α)
//! ```
//!
//! subject to `c_p > 0, α > 0, β_ac ≥ 0`. The denominator does not depend on
//! `β_ac`, so for fixed `(c_p, α)` the best `β_ac` is a weighted median and
//! only the two outer coefficients are searched on a grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FrameSeries;
use crate::models::{balance_target, new_air_supply, passenger_regressor, refrigerator_regressor};
use crate::types::{HvacMode, StationConstants, Theta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("no frame passes the mode filter")]
    EmptySystem,
    #[error("objective denominator is not positive ({0})")]
    NonPositiveDenominator(f64),
    #[error("refrigerator column is identically zero; β_ac is not identifiable")]
    DegenerateColumn,
    #[error("no grid cell has a positive objective denominator")]
    NoFeasiblePoint,
    #[error("system has not been integrated")]
    NotIntegrated,
    #[error("theta violates c_p > 0, α > 0, β_ac ≥ 0")]
    InfeasibleTheta,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Modes fitted when the caller does not choose.
pub const DEFAULT_MODE_FILTER: &[HvacMode] = &[HvacMode::Refrigerator];

/// Which rows the objective is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Per-frame rows and targets.
    Raw,
    /// Running sums of rows and targets.
    Integrated,
}

impl Basis {
    pub fn from_flag(use_integrated: bool) -> Self {
        if use_integrated {
            Basis::Integrated
        } else {
            Basis::Raw
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedRows {
    pub rows: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSystem {
    pub rows: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
    pub integrated: Option<IntegratedRows>,
}

#[derive(Clone, Copy)]
struct View<'a> {
    rows: &'a [[f64; 3]],
    targets: &'a [f64],
}

impl RegressionSystem {
    pub fn new(rows: Vec<[f64; 3]>, targets: Vec<f64>) -> Self {
        assert_eq!(
            rows.len(),
            targets.len(),
            "rows and targets differ in length"
        );
        Self {
            rows,
            targets,
            integrated: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Multiplies every row and target by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let rows = self.rows.iter().map(|r| r.map(|a| a * k)).collect();
        let targets = self.targets.iter().map(|b| b * k).collect();
        let sys = Self::new(rows, targets);
        if self.integrated.is_some() {
            integrate(sys)
        } else {
            sys
        }
    }

    fn view(&self, basis: Basis) -> Result<View<'_>, FitError> {
        match basis {
            Basis::Raw => Ok(View {
                rows: &self.rows,
                targets: &self.targets,
            }),
            Basis::Integrated => self
                .integrated
                .as_ref()
                .map(|i| View {
                    rows: &i.rows,
                    targets: &i.targets,
                })
                .ok_or(FitError::NotIntegrated),
        }
    }
}

/// Builds one row per frame whose mode is in `modes` and which has a
/// successor. For modes that run the ventilator, the (known) new-air supply
/// is moved to the target side.
pub fn assemble(
    series: &FrameSeries,
    constants: &StationConstants,
    modes: &[HvacMode],
) -> Result<RegressionSystem, FitError> {
    assemble_segments(std::slice::from_ref(series), constants, modes)
}

pub fn assemble_segments(
    segments: &[FrameSeries],
    constants: &StationConstants,
    modes: &[HvacMode],
) -> Result<RegressionSystem, FitError> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for frame in segments.iter().flat_map(|s| &s.frames) {
        if !modes.contains(&frame.mode) {
            continue;
        }
        let Ok(stored) = balance_target(frame, constants) else {
            continue;
        };
        let a3 = if frame.mode.uses_refrigerator() {
            refrigerator_regressor(frame)
        } else {
            0.0
        };
        let vented = if frame.mode.uses_ventilator() {
            new_air_supply(frame, constants)
        } else {
            0.0
        };
        rows.push([
            passenger_regressor(frame, constants),
            frame.t_out - frame.t_in,
            a3,
        ]);
        targets.push(stored + vented);
    }
    if rows.is_empty() {
        return Err(FitError::EmptySystem);
    }
    Ok(RegressionSystem::new(rows, targets))
}

fn prefix_sums<T: Copy>(items: &[T], add: impl Fn(T, T) -> T) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for &x in items {
        let next = match out.last() {
            Some(&acc) => add(acc, x),
            None => x,
        };
        out.push(next);
    }
    out
}

/// Attaches the running sums of rows and targets. Original rows are kept.
pub fn integrate(mut system: RegressionSystem) -> RegressionSystem {
    let rows = prefix_sums(&system.rows, |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    let targets = prefix_sums(&system.targets, |a, b| a + b);
    system.integrated = Some(IntegratedRows { rows, targets });
    system
}

fn ratio(view: View<'_>, c_p: f64, alpha: f64, beta: f64) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, &b) in view.rows.iter().zip(view.targets) {
        let load = a[0] * c_p + a[1] * alpha;
        num += (load - a[2] * beta - b).abs();
        den += load;
    }
    (num, den)
}

/// Relative L1 mismatch between load and supply plus storage.
pub fn objective(theta: &Theta, system: &RegressionSystem, basis: Basis) -> Result<f64, FitError> {
    if !theta.is_feasible() {
        return Err(FitError::InfeasibleTheta);
    }
    let view = system.view(basis)?;
    let (num, den) = ratio(view, theta.c_p, theta.alpha, theta.beta_ac);
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(FitError::NonPositiveDenominator(den))
    }
}

/// Exact minimiser over `β ≥ 0` of `Σ |r_i - a3_i·β|` with
/// `r_i = a1_i·c_p + a2_i·α - b_i`.
///
/// Ties resolve to the smallest optimal β.
pub fn best_beta(
    c_p: f64,
    alpha: f64,
    system: &RegressionSystem,
    basis: Basis,
) -> Result<f64, FitError> {
    if !(c_p > 0.0 && alpha > 0.0) {
        return Err(FitError::InfeasibleTheta);
    }
    let view = system.view(basis)?;
    let mut buf = Vec::with_capacity(view.rows.len());
    best_beta_in(view, c_p, alpha, &mut buf)
}

fn best_beta_in(
    view: View<'_>,
    c_p: f64,
    alpha: f64,
    buf: &mut Vec<(f64, f64)>,
) -> Result<f64, FitError> {
    buf.clear();
    for (a, &b) in view.rows.iter().zip(view.targets) {
        if a[2] != 0.0 {
            let r = a[0] * c_p + a[1] * alpha - b;
            buf.push((r / a[2], a[2].abs()));
        }
    }
    if buf.is_empty() {
        return Err(FitError::DegenerateColumn);
    }
    // `max` also maps -0.0 to 0.0
    Ok(weighted_lower_median(buf).max(0.0))
}

/// Smallest value `x` among `items` such that the weights of all items
/// `<= x` reach half of the total weight. Reorders `items`.
///
/// Expected linear time (quickselect with a three-way partition).
pub fn weighted_lower_median(items: &mut [(f64, f64)]) -> f64 {
    assert!(!items.is_empty(), "weighted median of nothing");
    let half = items.iter().map(|x| x.1).sum::<f64>() / 2.0;
    let mut below = 0.0;
    let (mut lo, mut hi) = (0, items.len());
    loop {
        let part = &mut items[lo..hi];
        if part.len() == 1 {
            return part[0].0;
        }
        let pivot = median_of_three(part);
        let (lt, gt) = partition3(part, pivot);
        let w_less: f64 = part[..lt].iter().map(|x| x.1).sum();
        let w_equal: f64 = part[lt..gt].iter().map(|x| x.1).sum();
        if lt > 0 && below + w_less >= half {
            hi = lo + lt;
        } else if below + w_less + w_equal >= half || gt == part.len() {
            return pivot;
        } else {
            below += w_less + w_equal;
            lo += gt;
        }
    }
}

fn median_of_three(part: &[(f64, f64)]) -> f64 {
    let a = part[0].0;
    let b = part[part.len() / 2].0;
    let c = part[part.len() - 1].0;
    if (a <= b) == (b <= c) {
        b
    } else if (b <= a) == (a <= c) {
        a
    } else {
        c
    }
}

/// Dutch-flag partition: `[..lt] < pivot`, `[lt..gt] == pivot`, `[gt..] > pivot`.
fn partition3(part: &mut [(f64, f64)], pivot: f64) -> (usize, usize) {
    let (mut lt, mut i, mut gt) = (0, 0, part.len());
    while i < gt {
        let v = part[i].0;
        if v < pivot {
            part.swap(lt, i);
            lt += 1;
            i += 1;
        } else if v > pivot {
            gt -= 1;
            part.swap(i, gt);
        } else {
            i += 1;
        }
    }
    (lt, gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// Search interval `(lo, hi]` split into `cells` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub c_p: Axis,
    pub alpha: Axis,
    pub spacing: Spacing,
    /// Each pass re-grids a ±2-cell neighbourhood of the incumbent.
    pub refinement_passes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c_p: Axis {
                lo: 0.0,
                hi: 1000.0,
                cells: 200,
            },
            alpha: Axis {
                lo: 0.0,
                hi: 10_000.0,
                cells: 200,
            },
            spacing: Spacing::Linear,
            refinement_passes: 2,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), FitError> {
        for (name, ax) in [("c_p", &self.c_p), ("alpha", &self.alpha)] {
            if !(ax.lo >= 0.0 && ax.hi > ax.lo && ax.hi.is_finite()) {
                return Err(FitError::InvalidGrid(format!("{name}: need 0 <= lo < hi")));
            }
            if ax.cells == 0 {
                return Err(FitError::InvalidGrid(format!("{name}: zero cells")));
            }
            if self.spacing == Spacing::Log && ax.lo <= 0.0 {
                return Err(FitError::InvalidGrid(format!(
                    "{name}: log spacing needs lo > 0"
                )));
            }
        }
        Ok(())
    }

    /// Coarse points of one axis and the spacing between them (additive for
    /// linear grids, multiplicative in log space for log grids).
    fn coarse(&self, ax: &Axis) -> (Vec<f64>, f64) {
        match self.spacing {
            Spacing::Linear => {
                let span = ax.hi - ax.lo;
                let pts = (1..=ax.cells)
                    .map(|k| ax.lo + span * k as f64 / ax.cells as f64)
                    .collect();
                (pts, span / ax.cells as f64)
            }
            Spacing::Log => {
                let (l0, l1) = (ax.lo.ln(), ax.hi.ln());
                let mut pts: Vec<f64> = (1..=ax.cells)
                    .map(|k| (l0 + (l1 - l0) * k as f64 / ax.cells as f64).exp())
                    .collect();
                *pts.last_mut().expect("cells > 0") = ax.hi;
                (pts, (l1 - l0) / ax.cells as f64)
            }
        }
    }

    /// Points within two cells of `centre`, `centre` itself included
    /// exactly, restricted to `(lo, hi]`.
    fn neighbourhood(&self, ax: &Axis, centre: f64, step: f64) -> (Vec<f64>, f64) {
        let m = (ax.cells / 2).max(1) as i64;
        let pts = (-m..=m)
            .map(|j| match self.spacing {
                Spacing::Linear => centre + (2.0 * step * j as f64) / m as f64,
                Spacing::Log => centre * ((2.0 * step * j as f64) / m as f64).exp(),
            })
            .filter(|&x| x > ax.lo && x <= ax.hi)
            .collect();
        (pts, 2.0 * step / m as f64)
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEvaluation {
    /// 0 for the coarse grid, then one per refinement pass.
    pub pass: usize,
    pub c_p: f64,
    pub alpha: f64,
    pub beta_ac: f64,
    /// `None` when the denominator is not positive.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub spec: GridSpec,
    pub cells_evaluated: usize,
    /// Final spacing around the optimum on each axis.
    pub final_resolution: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Theta,
    pub relative_error: f64,
    pub grid: GridMetadata,
    pub mode_frames_used: usize,
    pub used_integration: bool,
    /// The optimum sits on the upper bound of an axis; the true optimum may
    /// lie outside the searched box.
    pub at_upper_bound: bool,
}

fn evaluate_cells(view: View<'_>, pass: usize, cp: &[f64], alpha: &[f64]) -> Vec<CellEvaluation> {
    let cells: Vec<(f64, f64)> = cp
        .iter()
        .flat_map(|&c| alpha.iter().map(move |&a| (c, a)))
        .collect();
    cells
        .par_iter()
        .map_init(
            || Vec::with_capacity(view.rows.len()),
            |buf, &(c_p, alpha)| {
                let beta_ac =
                    best_beta_in(view, c_p, alpha, buf).expect("column checked non-degenerate");
                let (num, den) = ratio(view, c_p, alpha, beta_ac);
                CellEvaluation {
                    pass,
                    c_p,
                    alpha,
                    beta_ac,
                    objective: (den > 0.0).then(|| num / den),
                }
            },
        )
        .collect()
}

/// Order-independent selection: lowest objective, then lexicographically
/// smallest `(c_p, α, β_ac)`.
fn best_cell<'a>(cells: impl IntoIterator<Item = &'a CellEvaluation>) -> Option<CellEvaluation> {
    cells
        .into_iter()
        .filter(|c| c.objective.is_some())
        .min_by(|x, y| {
            let ox = x.objective.expect("filtered");
            let oy = y.objective.expect("filtered");
            ox.total_cmp(&oy)
                .then(x.c_p.total_cmp(&y.c_p))
                .then(x.alpha.total_cmp(&y.alpha))
                .then(x.beta_ac.total_cmp(&y.beta_ac))
        })
        .copied()
}

pub fn grid_fit(
    system: &RegressionSystem,
    grid: &GridSpec,
    basis: Basis,
) -> Result<FitResult, FitError> {
    grid_fit_with_surface(system, grid, basis).map(|(fit, _)| fit)
}

/// Grid search returning every evaluated cell alongside the optimum.
///
/// Cells are evaluated on the current rayon pool; the result does not
/// depend on the number of worker threads.
pub fn grid_fit_with_surface(
    system: &RegressionSystem,
    grid: &GridSpec,
    basis: Basis,
) -> Result<(FitResult, Vec<CellEvaluation>), FitError> {
    grid.validate()?;
    if system.is_empty() {
        return Err(FitError::EmptySystem);
    }
    let integrated_copy;
    let system = if basis == Basis::Integrated && system.integrated.is_none() {
        integrated_copy = integrate(system.clone());
        &integrated_copy
    } else {
        system
    };
    let view = system.view(basis)?;
    if view.rows.iter().all(|a| a[2] == 0.0) {
        return Err(FitError::DegenerateColumn);
    }

    let (cp_pts, mut cp_step) = grid.coarse(&grid.c_p);
    let (a_pts, mut a_step) = grid.coarse(&grid.alpha);
    let mut surface = evaluate_cells(view, 0, &cp_pts, &a_pts);
    let mut best = best_cell(&surface).ok_or(FitError::NoFeasiblePoint)?;

    for pass in 1..=grid.refinement_passes {
        let (cp_pts, next_cp) = grid.neighbourhood(&grid.c_p, best.c_p, cp_step);
        let (a_pts, next_a) = grid.neighbourhood(&grid.alpha, best.alpha, a_step);
        let cells = evaluate_cells(view, pass, &cp_pts, &a_pts);
        best =
            best_cell(cells.iter().chain(std::iter::once(&best))).expect("incumbent is feasible");
        surface.extend(cells);
        cp_step = next_cp;
        a_step = next_a;
    }

    let at_upper_bound = best.c_p >= grid.c_p.hi || best.alpha >= grid.alpha.hi;
    if at_upper_bound {
        log::warn!(
            "optimum (c_p = {}, alpha = {}) lies on the search boundary",
            best.c_p,
            best.alpha
        );
    }
    let fit = FitResult {
        theta: Theta::new(best.c_p, best.alpha, best.beta_ac),
        relative_error: best.objective.expect("best cell is feasible"),
        grid: GridMetadata {
            spec: *grid,
            cells_evaluated: surface.len(),
            final_resolution: [cp_step, a_step],
        },
        mode_frames_used: system.len(),
        used_integration: basis == Basis::Integrated,
        at_upper_bound,
    };
    Ok((fit, surface))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Frame;

    fn system(rows: &[[f64; 3]], targets: &[f64]) -> RegressionSystem {
        RegressionSystem::new(rows.to_vec(), targets.to_vec())
    }

    fn refrigerator_frame(delta: Option<f64>) -> Frame {
        Frame {
            t_in: 27.0,
            t_out: 33.0,
            n: 10.0,
            t_water_in: 12.0,
            t_water_out: 7.0,
            v_cool_w: 0.4,
            e_v: 0.0,
            mode: HvacMode::Refrigerator,
            delta,
        }
    }

    fn series(frames: Vec<Frame>) -> FrameSeries {
        FrameSeries {
            start: chrono::DateTime::UNIX_EPOCH,
            step: 60,
            frames,
        }
    }

    #[test]
    fn assemble_single_row() {
        // c·M_z·Δ = 1210 · 1 · 0.1 = 121
        let k = StationConstants::new(1.0, 0.0);
        let s = series(vec![
            refrigerator_frame(Some(0.1)),
            refrigerator_frame(None),
        ]);
        let sys = assemble(&s, &k, DEFAULT_MODE_FILTER).unwrap();
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.rows[0], [100.0, 6.0, 2.0]);
        assert!((sys.targets[0] - 121.0).abs() < 1e-12);
    }

    #[test]
    fn assemble_filters_modes() {
        let k = StationConstants::new(1.0, 0.0);
        let mut off = refrigerator_frame(Some(0.1));
        off.mode = HvacMode::Off;
        let s = series(vec![off; 4]);
        assert_eq!(
            assemble(&s, &k, DEFAULT_MODE_FILTER),
            Err(FitError::EmptySystem)
        );

        let s = series(vec![refrigerator_frame(Some(0.1)); 3]);
        let sys = assemble(&s, &k, DEFAULT_MODE_FILTER).unwrap();
        assert_eq!(sys.rows[0], sys.rows[1]);
        assert_eq!(sys.targets[0], sys.targets[1]);
    }

    #[test]
    fn assemble_moves_new_air_to_target() {
        let k = StationConstants::new(1.0, 2.0);
        let mut mixed = refrigerator_frame(Some(0.0));
        mixed.mode = HvacMode::Mixed;
        mixed.e_v = 8.0;
        let s = series(vec![mixed, refrigerator_frame(None)]);
        let sys = assemble(&s, &k, &[HvacMode::Mixed]).unwrap();
        assert_eq!(sys.rows[0], [100.0, 6.0, 2.0]);
        assert_eq!(sys.targets[0], 1210.0 * 4.0 * (27.0 - 33.0));
    }

    #[test]
    fn integrate_examples() {
        let sys = integrate(system(&[[1.0; 3], [2.0; 3]], &[5.0, -5.0]));
        let i = sys.integrated.as_ref().unwrap();
        assert_eq!(i.rows, vec![[1.0; 3], [3.0; 3]]);
        assert_eq!(i.targets, vec![5.0, 0.0]);
        assert_eq!(sys.rows, vec![[1.0; 3], [2.0; 3]]);

        let one = integrate(system(&[[4.0, 5.0, 6.0]], &[7.0]));
        let i = one.integrated.unwrap();
        assert_eq!(i.rows, one.rows);
        assert_eq!(i.targets, one.targets);
    }

    #[test]
    fn objective_single_row() {
        let sys = system(&[[1.0, 0.0, 0.0]], &[2.0]);
        let v = objective(&Theta::new(1.0, 1.0, 0.0), &sys, Basis::Raw).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn objective_errors() {
        let sys = system(&[[0.0, 0.0, 1.0]], &[2.0]);
        assert_eq!(
            objective(&Theta::new(1.0, 1.0, 0.0), &sys, Basis::Raw),
            Err(FitError::NonPositiveDenominator(0.0))
        );
        assert_eq!(
            objective(&Theta::new(0.0, 1.0, 0.0), &sys, Basis::Raw),
            Err(FitError::InfeasibleTheta)
        );
        assert_eq!(
            objective(&Theta::new(1.0, 1.0, 0.0), &sys, Basis::Integrated),
            Err(FitError::NotIntegrated)
        );
    }

    #[test]
    fn best_beta_examples() {
        let rows = [[1.0, 0.0, 1.0]; 3];
        // r_i = a1·c_p - b_i with c_p = 1, α arbitrary (a2 = 0)
        let equal = system(&rows, &[-1.0, -1.0, -1.0]);
        assert_eq!(best_beta(1.0, 1.0, &equal, Basis::Raw).unwrap(), 2.0);

        let spread = system(&rows, &[0.0, -1.0, -8.0]);
        assert_eq!(best_beta(1.0, 1.0, &spread, Basis::Raw).unwrap(), 2.0);

        let negative = system(&rows, &[3.0, 4.0, 5.0]);
        assert_eq!(best_beta(1.0, 1.0, &negative, Basis::Raw).unwrap(), 0.0);

        let degenerate = system(&[[1.0, 1.0, 0.0]], &[1.0]);
        assert_eq!(
            best_beta(1.0, 1.0, &degenerate, Basis::Raw),
            Err(FitError::DegenerateColumn)
        );
    }

    #[test]
    fn weighted_median_ties_go_low() {
        // equal weights, even count: any β in [1, 2] is optimal
        let mut items = vec![(2.0, 1.0), (1.0, 1.0)];
        assert_eq!(weighted_lower_median(&mut items), 1.0);
        // heavy item dominates
        let mut items = vec![(1.0, 1.0), (5.0, 10.0), (2.0, 1.0)];
        assert_eq!(weighted_lower_median(&mut items), 5.0);
        let mut items = vec![(3.0, 1.0); 7];
        assert_eq!(weighted_lower_median(&mut items), 3.0);
    }

    #[test]
    fn single_cell_grid() {
        let sys = system(&[[1.0, 1.0, 1.0], [2.0, 0.5, 1.0]], &[0.0, 1.0]);
        let grid = GridSpec {
            c_p: Axis {
                lo: 0.0,
                hi: 3.0,
                cells: 1,
            },
            alpha: Axis {
                lo: 0.0,
                hi: 2.0,
                cells: 1,
            },
            spacing: Spacing::Linear,
            refinement_passes: 0,
        };
        let fit = grid_fit(&sys, &grid, Basis::Raw).unwrap();
        assert_eq!((fit.theta.c_p, fit.theta.alpha), (3.0, 2.0));
        let expected = objective(&fit.theta, &sys, Basis::Raw).unwrap();
        assert_eq!(fit.relative_error, expected);
        assert!(fit.at_upper_bound);
        assert_eq!(fit.grid.cells_evaluated, 1);
    }

    #[test]
    fn grid_validation() {
        let mut g = GridSpec {
            spacing: Spacing::Log,
            ..GridSpec::default()
        };
        assert!(matches!(g.validate(), Err(FitError::InvalidGrid(_))));
        g.c_p.lo = 0.1;
        g.alpha.lo = 1.0;
        assert_eq!(g.validate(), Ok(()));
        g.alpha.cells = 0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn log_grid_hits_bounds_and_keeps_centre() {
        let g = GridSpec {
            c_p: Axis {
                lo: 0.1,
                hi: 1000.0,
                cells: 4,
            },
            spacing: Spacing::Log,
            ..GridSpec::default()
        };
        let (pts, step) = g.coarse(&g.c_p);
        assert_eq!(pts.len(), 4);
        assert_eq!(*pts.last().unwrap(), 1000.0);
        assert!((pts[0] - 1.0).abs() < 1e-12);
        let (near, _) = g.neighbourhood(&g.c_p, pts[1], step);
        assert!(near.contains(&pts[1]));
        assert!(near.iter().all(|&x| x > 0.1 && x <= 1000.0));
    }

    #[test]
    fn empty_and_degenerate_grid_fits() {
        let g = GridSpec::default();
        assert_eq!(
            grid_fit(&system(&[], &[]), &g, Basis::Raw),
            Err(FitError::EmptySystem)
        );
        assert_eq!(
            grid_fit(&system(&[[1.0, 1.0, 0.0]], &[1.0]), &g, Basis::Raw),
            Err(FitError::DegenerateColumn)
        );
        // loads negative for every positive (c_p, α)
        assert_eq!(
            grid_fit(&system(&[[-1.0, -1.0, 1.0]], &[1.0]), &g, Basis::Raw),
            Err(FitError::NoFeasiblePoint)
        );
    }
}
