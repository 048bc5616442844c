//! Pointwise ranks and the five global measures, computed from a fully
//! materialised statistic field.
//!
//! This module is the readable reference route: it keeps the whole
//! `(J+1) x n` rank matrices in memory and evaluates each measure by its
//! defining formula. The streaming module reproduces the same numbers with
//! bounded state and is checked against this one.
//!
//! Per location (column), each function receives an ordinary rank in
//! `1..=J+1` (ascending, ties averaged by default) and a continuous rank in
//! `[0, J]` that breaks ties between functions by how far apart the
//! neighbouring statistics are. Writing `R_j(r)` for the ordinary rank, the
//! one-sided extremeness rank is `J + 2 - R_j(r)` (1 = most extreme) and the
//! pointwise p-value is `(J + 2 - R_j(r)) / (J + 1)`.
//!
//! The measures, one scalar per function:
//!
//! * `fmax`: `max_r T_j(r)`, larger is more extreme;
//! * `pmin`: `min_r p_j(r)`, smaller is more extreme (the extreme rank is
//!   this value times `J+1`);
//! * `erl`: position of the function's ascending-sorted extremeness-rank
//!   vector in the lexicographic order over all functions, scaled to
//!   `[0, 1)`; breaks the massive ties `pmin` suffers from;
//! * `cont`: `min_r (J + 1 - c_j(r)) / (J + 1)` with `c_j(r)` the continuous
//!   rank, smaller is more extreme;
//! * `area`: the minimum ceiling of the continuous extremeness rank,
//!   discounted by how far below it the continuous curve dips, scaled by
//!   `J + 1`; refines the extreme rank without leaving its integer scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::StatField;
use crate::mat::Mat;
use crate::parallel;
use crate::permutation::PlanFingerprint;

/// Tie handling for ordinary ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Tied entries share the average of the ranks they occupy.
    #[default]
    MidRank,
    /// Tied entries all take the smallest occupied rank.
    MinRank,
}

/// The five global measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "fmax")]
    Fmax,
    #[serde(rename = "pmin")]
    Pmin,
    #[serde(rename = "erl")]
    Erl,
    #[serde(rename = "cont")]
    Cont,
    #[serde(rename = "area")]
    Area,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 5] = [
        MeasureKind::Fmax,
        MeasureKind::Pmin,
        MeasureKind::Erl,
        MeasureKind::Cont,
        MeasureKind::Area,
    ];

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "fmax" => Ok(MeasureKind::Fmax),
            "pmin" => Ok(MeasureKind::Pmin),
            "erl" => Ok(MeasureKind::Erl),
            "cont" => Ok(MeasureKind::Cont),
            "area" => Ok(MeasureKind::Area),
            other => Err(Error::Config(format!(
                "unknown measure '{other}' (expected fmax, pmin, erl, cont, or area)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Fmax => "fmax",
            MeasureKind::Pmin => "pmin",
            MeasureKind::Erl => "erl",
            MeasureKind::Cont => "cont",
            MeasureKind::Area => "area",
        }
    }

    /// Orientation: every measure except `fmax` flags extremeness by small
    /// values.
    pub fn smaller_is_extreme(self) -> bool {
        !matches!(self, MeasureKind::Fmax)
    }
}

impl std::fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One scalar per function, slot 0 observed. The fingerprint, when present,
/// records which permutation plan produced the underlying field.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector {
    pub kind: MeasureKind,
    pub values: Vec<f64>,
    pub fingerprint: Option<PlanFingerprint>,
}

impl MeasureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn observed(&self) -> f64 {
        self.values[0]
    }
}

fn sort_order(column: &[f64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..column.len());
    order.sort_unstable_by(|&a, &b| column[a].total_cmp(&column[b]));
}

/// Ordinary ranks of one column, written into `out`. `order` is scratch.
pub fn ordinary_ranks_into(
    column: &[f64],
    policy: TiePolicy,
    order: &mut Vec<usize>,
    out: &mut [f64],
) {
    debug_assert_eq!(column.len(), out.len());
    sort_order(column, order);
    let m = column.len();
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let rank = match policy {
            TiePolicy::MidRank => (i + j) as f64 / 2.0 + 1.0,
            TiePolicy::MinRank => (i + 1) as f64,
        };
        for &pos in &order[i..=j] {
            out[pos] = rank;
        }
        i = j + 1;
    }
}

pub fn ordinary_ranks(column: &[f64], policy: TiePolicy) -> Vec<f64> {
    let mut out = vec![0.0; column.len()];
    let mut order = Vec::new();
    ordinary_ranks_into(column, policy, &mut order, &mut out);
    out
}

/// Continuous ranks of one column, written into `out`. `order` is scratch.
///
/// Sorted ascending as `T_[0] <= ... <= T_[J]`, untied entries receive
///
/// * interior: `c_[j] = j + (T_[j] - T_[j-1]) / (T_[j+1] - T_[j-1])`,
/// * bottom: `c_[0] = exp(-(T_[1] - T_[0]) / (T_[J] - T_[1]))`,
/// * top: `c_[J] = J - exp(-(T_[J] - T_[J-1]) / (T_[J-1] - T_[0]))`,
///
/// while a tie block spanning sorted positions `a..=b` receives
/// `(a + b)/2 + 1/2` throughout. A degenerate boundary denominator drives
/// the exponential's argument to infinity, so the affected boundary rank
/// degrades to exactly `0` or `J`.
pub fn continuous_ranks_into(column: &[f64], order: &mut Vec<usize>, out: &mut [f64]) {
    debug_assert_eq!(column.len(), out.len());
    let m = column.len();
    if m == 1 {
        out[0] = 0.5;
        return;
    }
    sort_order(column, order);
    let v = |pos: usize| column[order[pos]];
    let jmax = m - 1;
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && v(j + 1) == v(i) {
            j += 1;
        }
        if j > i {
            let c = (i + j) as f64 / 2.0 + 0.5;
            for &pos in &order[i..=j] {
                out[pos] = c;
            }
        } else {
            let c = if i == 0 {
                (-((v(1) - v(0)) / (v(jmax) - v(1)))).exp()
            } else if i == jmax {
                jmax as f64 - (-((v(jmax) - v(jmax - 1)) / (v(jmax - 1) - v(0)))).exp()
            } else {
                i as f64 + (v(i) - v(i - 1)) / (v(i + 1) - v(i - 1))
            };
            out[order[i]] = c;
        }
        i = j + 1;
    }
}

pub fn continuous_ranks(column: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; column.len()];
    let mut order = Vec::new();
    continuous_ranks_into(column, &mut order, &mut out);
    out
}

/// Both rank matrices of a statistic field, `(J+1) x n` each.
#[derive(Debug, Clone)]
pub struct PointwiseRanks {
    pub ordinary: Mat,
    pub continuous: Mat,
}

impl PointwiseRanks {
    /// Ranks every column of the field. Costs `O(J n)` memory by design;
    /// use the streaming route when that is too much.
    pub fn compute(field: &StatField, policy: TiePolicy) -> Self {
        let m = field.values.rows();
        let n = field.values.cols();
        let cols: Vec<(Vec<f64>, Vec<f64>)> = parallel::map_indexed(n, |r| {
            let mut column = vec![0.0; m];
            field.values.col_into(r, &mut column);
            let mut order = Vec::new();
            let mut ord = vec![0.0; m];
            let mut cont = vec![0.0; m];
            ordinary_ranks_into(&column, policy, &mut order, &mut ord);
            continuous_ranks_into(&column, &mut order, &mut cont);
            (ord, cont)
        });
        let mut ordinary = Mat::zeros(m, n);
        let mut continuous = Mat::zeros(m, n);
        for (r, (ord, cont)) in cols.into_iter().enumerate() {
            for j in 0..m {
                ordinary[(j, r)] = ord[j];
                continuous[(j, r)] = cont[j];
            }
        }
        PointwiseRanks { ordinary, continuous }
    }
}

/// Extreme rank of function `j`: the most extreme one-sided rank it attains
/// anywhere, `min_r (J + 2 - R_j(r))`. Fractional under tie averaging.
pub fn extreme_rank(ordinary: &Mat, j: usize) -> f64 {
    let m = ordinary.rows() as f64;
    ordinary
        .row(j)
        .iter()
        .map(|rank| m + 1.0 - rank)
        .fold(f64::INFINITY, f64::min)
}

/// Maximum-statistic measure straight from the field.
pub fn fmax_measure(field: &StatField) -> MeasureVector {
    let values = (0..field.values.rows())
        .map(|j| {
            field.values.row(j).iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    MeasureVector {
        kind: MeasureKind::Fmax,
        values,
        fingerprint: None,
    }
}

/// Minimum pointwise p-value per function.
pub fn pmin_measure(ordinary: &Mat) -> MeasureVector {
    let m = ordinary.rows();
    let values = (0..m).map(|j| extreme_rank(ordinary, j) / m as f64).collect();
    MeasureVector {
        kind: MeasureKind::Pmin,
        values,
        fingerprint: None,
    }
}

/// Lexicographic position of each ascending-sorted extremeness-rank vector:
/// `e_j` counts the functions strictly more extreme, over `J + 1`.
pub fn erl_measure(ordinary: &Mat) -> MeasureVector {
    let m = ordinary.rows();
    let keys: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut key: Vec<f64> = ordinary
                .row(j)
                .iter()
                .map(|rank| m as f64 + 1.0 - rank)
                .collect();
            key.sort_unstable_by(f64::total_cmp);
            key
        })
        .collect();
    MeasureVector {
        kind: MeasureKind::Erl,
        values: erl_positions(&keys),
        fingerprint: None,
    }
}

/// Shared ordering core: given ascending-sorted extremeness vectors, returns
/// each one's count of strictly smaller competitors divided by the total.
/// Exact ties share a value.
pub fn erl_positions(keys: &[Vec<f64>]) -> Vec<f64> {
    let m = keys.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| lex_cmp(&keys[a], &keys[b]));
    let mut values = vec![0.0; m];
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && lex_cmp(&keys[order[j + 1]], &keys[order[i]]).is_eq() {
            j += 1;
        }
        for &idx in &order[i..=j] {
            values[idx] = i as f64 / m as f64;
        }
        i = j + 1;
    }
    values
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.total_cmp(y);
        if !ord.is_eq() {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// Minimum continuous extremeness rank per function, over `J + 1`.
pub fn cont_measure(continuous: &Mat) -> MeasureVector {
    let m = continuous.rows() as f64;
    let values = (0..continuous.rows())
        .map(|j| {
            continuous
                .row(j)
                .iter()
                .map(|c| m - c)
                .fold(f64::INFINITY, f64::min)
                / m
        })
        .collect();
    MeasureVector {
        kind: MeasureKind::Cont,
        values,
        fingerprint: None,
    }
}

/// Area measure per function. With `C_j(r) = J + 1 - c_j(r)` and
/// `R_j = min_r ceil(C_j(r))`:
///
/// `a_j = (R_j - (1/n) sum_r (R_j - C_j(r)) [C_j(r) < R_j]) / (J + 1)`
pub fn area_measure(continuous: &Mat) -> MeasureVector {
    let m = continuous.rows() as f64;
    let n = continuous.cols() as f64;
    let values = (0..continuous.rows())
        .map(|j| {
            let row = continuous.row(j);
            let r_j = row
                .iter()
                .map(|c| (m - c).ceil())
                .fold(f64::INFINITY, f64::min);
            let mut deficit = 0.0;
            for c in row {
                let ext = m - c;
                if ext < r_j {
                    deficit += r_j - ext;
                }
            }
            (r_j - deficit / n) / m
        })
        .collect();
    MeasureVector {
        kind: MeasureKind::Area,
        values,
        fingerprint: None,
    }
}

/// Monte Carlo p-value: share of functions at least as extreme as the
/// observed one, observed included, so the smallest attainable value is
/// `1 / (J + 1)`.
pub fn monte_carlo_pvalue(measure: &MeasureVector) -> f64 {
    let obs = measure.observed();
    let count = if measure.kind.smaller_is_extreme() {
        measure.values.iter().filter(|&&v| v <= obs).count()
    } else {
        measure.values.iter().filter(|&&v| v >= obs).count()
    };
    count as f64 / measure.len() as f64
}
