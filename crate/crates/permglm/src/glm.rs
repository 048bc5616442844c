//! Pointwise linear model fitting and the F-statistic field.
//!
//! The tested model at every location is `y = X b + Z g + e` with the null
//! `C b = 0`. Because the design is shared by all locations and resamples,
//! everything expensive is factored once into a [`DesignContext`]: an
//! orthonormal basis of the full design `[X Z]`, one of the reduced design
//! (nuisance plus the directions of `X` the contrast does not touch), and
//! one of the nuisance block alone. Evaluating the statistic for one
//! response vector then costs two projections:
//!
//! `F = ((RSS_reduced - RSS_full) / t) / (RSS_full / (s - k - l))`
//!
//! The reduced design is `[X N | Z]` where `N` spans the null space of `C`,
//! obtained from `N = I - C^+ C`; for the common full contrast (`t = k`)
//! this collapses to the nuisance block alone.
//!
//! A response lying exactly in the full column space has `RSS_full = 0` and
//! no finite statistic; the value is capped at `f64::MAX` and the event is
//! counted, which keeps downstream rank machinery total. A response with no
//! variation at all yields `F = 0`.

use crate::dataset::{DesignSpec, FunctionalDataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, orthonormal_basis};
use crate::mat::Mat;
use crate::parallel;
use crate::permutation::{PermutationPlan, Scheme};

/// Statistic family carried by a [`StatField`]. Only the F-statistic is
/// implemented; the enum keeps the field self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    F,
}

/// `(J+1) x n` statistics: row 0 is the observed data, row `j >= 1` the
/// `j`-th resample.
#[derive(Debug, Clone)]
pub struct StatField {
    pub values: Mat,
    pub kind: StatKind,
    /// Number of entries that hit the degeneracy cap.
    pub capped: usize,
}

/// One F-statistic evaluation. `capped` marks a perfect fit whose statistic
/// was replaced by `f64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FStat {
    pub value: f64,
    pub capped: bool,
}

/// Ordinary least squares fit of `y` on an explicit full-rank design.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Residual degrees of freedom, `s - columns`.
    pub dof: usize,
}

/// Relative `RSS_full` threshold below which the fit counts as exact.
const DEGENERATE_TOL: f64 = 1e-20;

/// Relative tolerance for the impossible case `RSS_reduced < RSS_full`.
const NEGATIVE_NUMERATOR_TOL: f64 = 1e-9;

/// QR factorisation by twice-reorthogonalised Gram-Schmidt. Returns the
/// orthonormal columns and the upper-triangular factor; errors if a column
/// is numerically dependent on its predecessors.
fn qr(cols: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let m = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        let orig = norm2(&v).sqrt();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                r[i][j] += c;
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= c * qk;
                }
            }
        }
        let nrm = norm2(&v).sqrt();
        if nrm <= 1e-12 * orig.max(f64::MIN_POSITIVE) {
            return Err(Error::Rank(format!(
                "design column {} is dependent on earlier columns",
                j + 1
            )));
        }
        for vk in v.iter_mut() {
            *vk /= nrm;
        }
        r[j][j] = nrm;
        q.push(v);
    }
    Ok((q, r))
}

/// Least-squares fit of `y` on the columns of `design` (`s x m`, full rank).
pub fn fit_ols(y: &[f64], design: &Mat) -> Result<FitResult> {
    let (s, m) = (design.rows(), design.cols());
    if y.len() != s {
        return Err(Error::Validation(format!(
            "response has {} entries but design has {s} rows",
            y.len()
        )));
    }
    if m > s {
        return Err(Error::Validation(format!(
            "design has more columns ({m}) than rows ({s})"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..m).map(|j| design.col(j)).collect();
    let (q, r) = qr(&cols)?;

    // Back-substitute R beta = Q^T y.
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut beta = vec![0.0; m];
    for i in (0..m).rev() {
        let mut acc = qty[i];
        for j in i + 1..m {
            acc -= r[i][j] * beta[j];
        }
        beta[i] = acc / r[i][i];
    }

    let mut fitted = vec![0.0; s];
    for (qi, c) in q.iter().zip(&qty) {
        for (f, qv) in fitted.iter_mut().zip(qi) {
            *f += c * qv;
        }
    }
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss = norm2(&residuals);
    Ok(FitResult {
        coefficients: beta,
        fitted,
        residuals,
        rss,
        dof: s - m,
    })
}

/// Orthonormal columns stored flat for cache-friendly projections.
#[derive(Debug, Clone)]
struct FlatBasis {
    cols: Vec<Vec<f64>>,
}

impl FlatBasis {
    fn from_cols(cols: Vec<Vec<f64>>) -> Self {
        FlatBasis { cols }
    }

    fn len(&self) -> usize {
        self.cols.len()
    }

    /// Residual sum of squares of `y` after projecting onto the basis.
    /// `fitted` is scratch of the same length as `y`.
    fn rss(&self, y: &[f64], fitted: &mut [f64]) -> f64 {
        fitted.fill(0.0);
        for q in &self.cols {
            let c = dot(q, y);
            for (f, qv) in fitted.iter_mut().zip(q) {
                *f += c * qv;
            }
        }
        y.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Writes the projection of `y` onto the basis into `out`.
    fn project(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for q in &self.cols {
            let c = dot(q, y);
            for (o, qv) in out.iter_mut().zip(q) {
                *o += c * qv;
            }
        }
    }
}

/// Precomputed projection bases for one design, shared across locations,
/// resamples, and worker threads.
#[derive(Debug, Clone)]
pub struct DesignContext {
    full: FlatBasis,
    reduced: FlatBasis,
    nuisance: FlatBasis,
    subjects: usize,
    numerator_dof: usize,
    denominator_dof: usize,
}

impl DesignContext {
    pub fn new(design: &DesignSpec) -> Result<Self> {
        let s = design.subjects();
        let (k, l, t) = (design.k(), design.l(), design.t());

        let x_cols: Vec<Vec<f64>> = (0..k).map(|j| design.interest().col(j)).collect();
        let z_cols: Vec<Vec<f64>> = (0..l).map(|j| design.nuisance().col(j)).collect();

        let mut full_cols = x_cols.clone();
        full_cols.extend(z_cols.iter().cloned());
        let full = orthonormal_basis(&full_cols, 1e-10);
        if full.len() != k + l {
            return Err(Error::Rank(format!(
                "design matrix [X Z] spans only {} of {} columns",
                full.len(),
                k + l
            )));
        }

        // Null-space projector of the contrast: N = I - C^+ C. The columns
        // of X N span the directions the null hypothesis leaves free.
        let c_na = design.contrast().to_nalgebra();
        let pinv = c_na
            .clone()
            .svd(true, true)
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(format!("contrast pseudo-inverse failed: {e}")))?;
        let n_proj = nalgebra::DMatrix::<f64>::identity(k, k) - pinv * c_na;

        let mut reduced_cols: Vec<Vec<f64>> = Vec::with_capacity(k + l);
        for j in 0..k {
            let mut col = vec![0.0; s];
            for a in 0..k {
                let w = n_proj[(a, j)];
                if w != 0.0 {
                    for (cv, xv) in col.iter_mut().zip(&x_cols[a]) {
                        *cv += w * xv;
                    }
                }
            }
            reduced_cols.push(col);
        }
        reduced_cols.extend(z_cols.iter().cloned());
        let reduced = orthonormal_basis(&reduced_cols, 1e-10);
        if reduced.len() != k - t + l {
            return Err(Error::Numerical(format!(
                "reduced design spans {} columns, expected {}",
                reduced.len(),
                k - t + l
            )));
        }

        let nuisance = orthonormal_basis(&z_cols, 1e-10);
        if nuisance.len() != l {
            return Err(Error::Rank("nuisance block is rank deficient".into()));
        }

        Ok(DesignContext {
            full: FlatBasis::from_cols(full),
            reduced: FlatBasis::from_cols(reduced),
            nuisance: FlatBasis::from_cols(nuisance),
            subjects: s,
            numerator_dof: t,
            denominator_dof: s - k - l,
        })
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn numerator_dof(&self) -> usize {
        self.numerator_dof
    }

    pub fn denominator_dof(&self) -> usize {
        self.denominator_dof
    }

    pub fn has_nuisance(&self) -> bool {
        self.nuisance.len() > 0
    }

    /// Projection of `y` onto the nuisance space, written into `out`.
    /// This is the null-model fit reused by the residual permutation scheme.
    pub fn nuisance_fit(&self, y: &[f64], out: &mut [f64]) {
        self.nuisance.project(y, out);
    }

    /// F-statistic of one response vector. `scratch` must hold `subjects`
    /// entries.
    pub fn f_value(&self, y: &[f64], scratch: &mut [f64]) -> Result<FStat> {
        let rss_full = self.full.rss(y, scratch);
        let rss_reduced = self.reduced.rss(y, scratch);
        let scale = norm2(y).max(f64::MIN_POSITIVE);
        let numerator = rss_reduced - rss_full;
        if numerator < -NEGATIVE_NUMERATOR_TOL * scale {
            return Err(Error::Numerical(format!(
                "reduced-model RSS {rss_reduced} fell below full-model RSS {rss_full}"
            )));
        }
        let numerator = numerator.max(0.0);
        if rss_full <= DEGENERATE_TOL * scale {
            if numerator <= DEGENERATE_TOL * scale {
                // No variation anywhere: flat response.
                return Ok(FStat { value: 0.0, capped: false });
            }
            return Ok(FStat { value: f64::MAX, capped: true });
        }
        let value = (numerator / self.numerator_dof as f64)
            / (rss_full / self.denominator_dof as f64);
        Ok(FStat { value, capped: false })
    }
}

/// Convenience wrapper building the context for a single evaluation.
pub fn f_statistic(y: &[f64], design: &DesignSpec) -> Result<FStat> {
    let ctx = DesignContext::new(design)?;
    let mut scratch = vec![0.0; ctx.subjects()];
    ctx.f_value(y, &mut scratch)
}

/// Per-location evaluator shared by the field and streaming routes: pulls a
/// data column, applies the plan's resampling scheme, and emits the `J+1`
/// statistics for that location. All buffers are reused across calls.
pub(crate) struct ColumnEvaluator<'a> {
    ctx: &'a DesignContext,
    plan: &'a PermutationPlan,
    data: &'a Mat,
    y: Vec<f64>,
    fitted: Vec<f64>,
    resid: Vec<f64>,
    permuted: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> ColumnEvaluator<'a> {
    pub(crate) fn new(
        ctx: &'a DesignContext,
        plan: &'a PermutationPlan,
        dataset: &'a FunctionalDataset,
    ) -> Result<Self> {
        let s = ctx.subjects();
        if plan.subjects() != s {
            return Err(Error::PlanMismatch(format!(
                "plan built for {} subjects, design has {s}",
                plan.subjects()
            )));
        }
        if dataset.subjects() != s {
            return Err(Error::Validation(format!(
                "dataset has {} subjects but design has {s}",
                dataset.subjects()
            )));
        }
        if plan.scheme() == Scheme::FreedmanLane && !ctx.has_nuisance() {
            return Err(Error::Config(
                "freedman-lane resampling requires a nonempty nuisance block".into(),
            ));
        }
        Ok(ColumnEvaluator {
            ctx,
            plan,
            data: dataset.values(),
            y: vec![0.0; s],
            fitted: vec![0.0; s],
            resid: vec![0.0; s],
            permuted: vec![0.0; s],
            scratch: vec![0.0; s],
        })
    }

    /// Number of statistics per column, `J + 1`.
    pub(crate) fn len(&self) -> usize {
        self.plan.count() + 1
    }

    /// Fills `out` (length `J+1`) with the statistics at location `r`;
    /// returns how many of them were capped.
    pub(crate) fn column(&mut self, r: usize, out: &mut [f64]) -> Result<usize> {
        debug_assert_eq!(out.len(), self.len());
        self.data.col_into(r, &mut self.y);
        let mut capped = 0usize;
        let observed = self.ctx.f_value(&self.y, &mut self.scratch)?;
        out[0] = observed.value;
        capped += observed.capped as usize;

        match self.plan.scheme() {
            Scheme::Raw => {
                for j in 0..self.plan.count() {
                    let perm = self.plan.perm(j);
                    for (i, &src) in perm.iter().enumerate() {
                        self.permuted[i] = self.y[src];
                    }
                    let f = self.ctx.f_value(&self.permuted, &mut self.scratch)?;
                    out[j + 1] = f.value;
                    capped += f.capped as usize;
                }
            }
            Scheme::FreedmanLane => {
                self.ctx.nuisance_fit(&self.y, &mut self.fitted);
                for (rv, (yv, fv)) in self.resid.iter_mut().zip(self.y.iter().zip(&self.fitted)) {
                    *rv = yv - fv;
                }
                for j in 0..self.plan.count() {
                    let perm = self.plan.perm(j);
                    for (i, &src) in perm.iter().enumerate() {
                        self.permuted[i] = self.fitted[i] + self.resid[src];
                    }
                    let f = self.ctx.f_value(&self.permuted, &mut self.scratch)?;
                    out[j + 1] = f.value;
                    capped += f.capped as usize;
                }
            }
        }
        Ok(capped)
    }
}

/// Evaluates the full `(J+1) x n` statistic field for a dataset under a
/// permutation plan. Row 0 is the observed data. Locations are processed in
/// parallel blocks; the result does not depend on the schedule.
pub fn stat_field(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
) -> Result<StatField> {
    let ctx = DesignContext::new(design)?;
    let n = dataset.locations();
    let rows = plan.count() + 1;
    // One worker task per block of locations keeps evaluator setup cost off
    // the per-column path.
    const BLOCK: usize = 256;
    let blocks = n.div_ceil(BLOCK);
    let results: Vec<Result<(Vec<f64>, usize)>> = parallel::map_indexed(blocks, |b| {
        let lo = b * BLOCK;
        let hi = ((b + 1) * BLOCK).min(n);
        let mut eval = ColumnEvaluator::new(&ctx, plan, dataset)?;
        let mut cols = vec![0.0; rows * (hi - lo)];
        let mut capped = 0usize;
        let mut buf = vec![0.0; rows];
        for (idx, r) in (lo..hi).enumerate() {
            capped += eval.column(r, &mut buf)?;
            for j in 0..rows {
                cols[j * (hi - lo) + idx] = buf[j];
            }
        }
        Ok((cols, capped))
    });

    let mut values = Mat::zeros(rows, n);
    let mut capped = 0usize;
    for (b, res) in results.into_iter().enumerate() {
        let (cols, c) = res?;
        let lo = b * BLOCK;
        let width = ((b + 1) * BLOCK).min(n) - lo;
        capped += c;
        for j in 0..rows {
            values.row_mut(j)[lo..lo + width]
                .copy_from_slice(&cols[j * width..(j + 1) * width]);
        }
    }
    Ok(StatField { values, kind: StatKind::F, capped })
}

/// Builds a statistic field from explicitly supplied response matrices, one
/// per row. Useful when resamples come from outside the plan machinery.
pub fn stat_field_from_matrices(responses: &[Mat], design: &DesignSpec) -> Result<StatField> {
    if responses.is_empty() {
        return Err(Error::Validation("no response matrices supplied".into()));
    }
    let n = responses[0].cols();
    let s = design.subjects();
    for (j, m) in responses.iter().enumerate() {
        if m.rows() != s || m.cols() != n {
            return Err(Error::Validation(format!(
                "response matrix {} is {}x{}, expected {s}x{n}",
                j,
                m.rows(),
                m.cols()
            )));
        }
    }
    let ctx = DesignContext::new(design)?;
    let mut values = Mat::zeros(responses.len(), n);
    let mut scratch = vec![0.0; s];
    let mut y = vec![0.0; s];
    let mut capped = 0usize;
    for (j, m) in responses.iter().enumerate() {
        for r in 0..n {
            m.col_into(r, &mut y);
            let f = ctx.f_value(&y, &mut scratch)?;
            values[(j, r)] = f.value;
            capped += f.capped as usize;
        }
    }
    Ok(StatField { values, kind: StatKind::F, capped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Domain;
    use crate::permutation::generate_plan;
    use crate::rng::stream_rng;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn two_group_design() -> DesignSpec {
        DesignSpec::two_group((2, 2)).unwrap()
    }

    #[test]
    fn hand_computed_two_group_f() {
        // Group means 0.5 and 1.5, RSS_full = 1, RSS_reduced = 2:
        // F = ((2 - 1) / 1) / (1 / 2) = 2.
        let f = f_statistic(&[0.0, 1.0, 1.0, 2.0], &two_group_design()).unwrap();
        assert!(!f.capped);
        assert_relative_eq!(f.value, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn perfectly_separated_response_is_capped() {
        let f = f_statistic(&[0.0, 0.0, 1.0, 1.0], &two_group_design()).unwrap();
        assert!(f.capped);
        assert_eq!(f.value, f64::MAX);
    }

    #[test]
    fn constant_response_scores_zero() {
        let f = f_statistic(&[3.0, 3.0, 3.0, 3.0], &two_group_design()).unwrap();
        assert!(!f.capped);
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn invariant_under_nuisance_shift_and_scaling() {
        let design = DesignSpec::two_group((3, 3)).unwrap();
        let y = [0.3, -1.2, 0.7, 1.9, 0.4, -0.5];
        let base = f_statistic(&y, &design).unwrap().value;
        // Add a constant (the nuisance space) and rescale.
        for (shift, scale) in [(5.0, 1.0), (0.0, 10.0), (-2.5, 0.1), (7.0, 10.0)] {
            let mapped: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
            let f = f_statistic(&mapped, &design).unwrap().value;
            assert_relative_eq!(f, base, max_relative = 1e-8);
        }
    }

    #[test]
    fn null_f_mean_matches_theory() {
        // dof2 = 8, so E[F] = 8/6. Empirical mean over 10k draws within 10%.
        let design = DesignSpec::two_group((5, 5)).unwrap();
        let ctx = DesignContext::new(&design).unwrap();
        let mut rng = stream_rng(42, 0);
        let mut scratch = vec![0.0; 10];
        let mut acc = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            let y: Vec<f64> = (0..10)
                .map(|_| {
                    let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                    (-2.0 * a.max(1e-300).ln()).sqrt() * (std::f64::consts::TAU * b).cos()
                })
                .collect();
            acc += ctx.f_value(&y, &mut scratch).unwrap().value;
        }
        let mean = acc / draws as f64;
        let expect = 8.0 / 6.0;
        assert!(
            (mean - expect).abs() < 0.1 * expect,
            "mean {mean} vs expected {expect}"
        );
    }

    #[test]
    fn fit_ols_matches_normal_equations() {
        let mut rng = stream_rng(9, 0);
        for _ in 0..25 {
            let s = rng.gen_range(5..12);
            let m = rng.gen_range(1..4);
            let mut design = Mat::zeros(s, m);
            design.data_mut().iter_mut().for_each(|v| *v = rng.gen::<f64>() - 0.5);
            // Guarantee an intercept-like well-conditioned first column.
            for i in 0..s {
                design[(i, 0)] = 1.0;
            }
            let y: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let fit = fit_ols(&y, &design).unwrap();

            let a = design.to_nalgebra();
            let yv = nalgebra::DVector::from_column_slice(&y);
            let beta = (a.transpose() * &a)
                .try_inverse()
                .unwrap()
                * a.transpose()
                * yv;
            for j in 0..m {
                assert_relative_eq!(fit.coefficients[j], beta[j], max_relative = 1e-8, epsilon = 1e-10);
            }
            // Residuals orthogonal to every design column.
            for j in 0..m {
                let col = design.col(j);
                assert_abs_diff_eq!(dot(&col, &fit.residuals), 0.0, epsilon = 1e-8);
            }
            assert_eq!(fit.dof, s - m);
        }
    }

    #[test]
    fn partial_contrast_matches_explicit_reduced_model() {
        // Two interest columns, test only their difference: the reduced
        // model keeps the sum direction.
        let mut rng = stream_rng(14, 0);
        let s = 9;
        let mut x = Mat::zeros(s, 2);
        x.data_mut().iter_mut().for_each(|v| *v = rng.gen::<f64>() - 0.5);
        let z = Mat::from_vec(s, 1, vec![1.0; s]);
        let c = Mat::from_vec(1, 2, vec![1.0, -1.0]);
        let design = DesignSpec::new(x.clone(), z.clone(), c, false).unwrap();
        let y: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() * 2.0).collect();
        let f = f_statistic(&y, &design).unwrap().value;

        // Oracle: explicit RSS difference between [X Z] and [x1 + x2, Z].
        let mut full = Mat::zeros(s, 3);
        let mut reduced = Mat::zeros(s, 2);
        for i in 0..s {
            full[(i, 0)] = x[(i, 0)];
            full[(i, 1)] = x[(i, 1)];
            full[(i, 2)] = 1.0;
            reduced[(i, 0)] = x[(i, 0)] + x[(i, 1)];
            reduced[(i, 1)] = 1.0;
        }
        let rss_full = fit_ols(&y, &full).unwrap().rss;
        let rss_red = fit_ols(&y, &reduced).unwrap().rss;
        let oracle = ((rss_red - rss_full) / 1.0) / (rss_full / (s as f64 - 3.0));
        assert_relative_eq!(f, oracle, max_relative = 1e-8);
    }

    fn small_dataset(rng: &mut impl Rng, s: usize, n: usize) -> FunctionalDataset {
        let data: Vec<f64> = (0..s * n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        FunctionalDataset::new(Mat::from_vec(s, n, data), Domain::Grid { width: n, height: 1 })
            .unwrap()
    }

    #[test]
    fn identity_permutation_row_equals_observed_row() {
        let mut rng = stream_rng(21, 0);
        let dataset = small_dataset(&mut rng, 6, 8);
        let design = DesignSpec::two_group((3, 3)).unwrap();
        let identity: Vec<usize> = (0..6).collect();
        let plan =
            PermutationPlan::from_permutations(0, 6, Scheme::Raw, vec![identity]).unwrap();
        let field = stat_field(&dataset, &design, &plan).unwrap();
        assert_eq!(field.values.rows(), 2);
        assert_eq!(field.values.row(0), field.values.row(1));
    }

    #[test]
    fn empty_plan_gives_single_observed_row() {
        let mut rng = stream_rng(22, 0);
        let dataset = small_dataset(&mut rng, 6, 5);
        let design = DesignSpec::two_group((3, 3)).unwrap();
        let plan = PermutationPlan::from_permutations(0, 6, Scheme::Raw, Vec::new()).unwrap();
        let field = stat_field(&dataset, &design, &plan).unwrap();
        assert_eq!(field.values.rows(), 1);
    }

    #[test]
    fn field_matches_explicit_response_matrices() {
        let mut rng = stream_rng(23, 0);
        let dataset = small_dataset(&mut rng, 6, 7);
        let design = DesignSpec::two_group((3, 3)).unwrap();
        let plan = generate_plan(5, 6, 4, Scheme::Raw).unwrap();
        let field = stat_field(&dataset, &design, &plan).unwrap();

        let mut mats = vec![dataset.values().clone()];
        for j in 0..plan.count() {
            let perm = plan.perm(j);
            let mut m = Mat::zeros(6, 7);
            for i in 0..6 {
                let src = perm[i];
                let row: Vec<f64> = dataset.values().row(src).to_vec();
                m.row_mut(i).copy_from_slice(&row);
            }
            mats.push(m);
        }
        let oracle = stat_field_from_matrices(&mats, &design).unwrap();
        assert_eq!(field.values.data(), oracle.values.data());
    }
}
