//! Numerical kernel dimension by spectral-gap rank decision.
//!
//! Singular values at or below the floor are treated as zero. A dimension is
//! only reported when the ratio between the last singular value kept and the
//! first one discarded reaches `gap_min`; otherwise the result is
//! [`KernelDim::Indeterminate`]. When nothing falls below the floor the matrix
//! is full rank and the kernel is trivial; the floor itself carries the safety
//! margin above noise in that case.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Where the zero/non-zero threshold sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Floor {
    /// `floor = rel · σ₁`.
    Relative(f64),
    /// A fixed threshold, for matrices with a natural unit scale.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRule {
    pub gap_min: f64,
    pub floor: Floor,
}

impl Default for RankRule {
    fn default() -> Self {
        Self {
            gap_min: 1e6,
            floor: Floor::Relative(1e-9),
        }
    }
}

impl RankRule {
    pub fn threshold(&self, sigma_max: f64) -> f64 {
        match self.floor {
            Floor::Relative(r) => r * sigma_max,
            Floor::Absolute(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelDim {
    Determinate(usize),
    Indeterminate,
}

impl KernelDim {
    pub fn value(self) -> Option<usize> {
        match self {
            KernelDim::Determinate(k) => Some(k),
            KernelDim::Indeterminate => None,
        }
    }
}

impl std::fmt::Display for KernelDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelDim::Determinate(k) => write!(f, "{k}"),
            KernelDim::Indeterminate => write!(f, "indeterminate"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    /// Descending; always one per column (padded with zeros for wide matrices).
    pub singular_values: Vec<f64>,
    /// Number of singular values above the floor.
    pub rank: usize,
    pub dim: KernelDim,
    /// `σ_r / σ_{r+1}` at the cut; infinite when nothing is cut.
    pub gap_ratio: f64,
    pub threshold: f64,
    /// Orthonormal right singular vectors spanning the numerical kernel.
    pub basis: Vec<DVector<f64>>,
}

impl KernelAnalysis {
    /// Kernel size implied by the floor alone, whether or not the gap is clean.
    pub fn floor_dim(&self) -> usize {
        self.singular_values.len() - self.rank
    }
}

/// Full SVD of `m` followed by the gap rule.
pub fn kernel_analysis(m: &DMatrix<f64>, rule: &RankRule) -> KernelAnalysis {
    let cols = m.ncols();
    if cols == 0 {
        return KernelAnalysis {
            singular_values: vec![],
            rank: 0,
            dim: KernelDim::Determinate(0),
            gap_ratio: f64::INFINITY,
            threshold: 0.0,
            basis: vec![],
        };
    }
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let threshold = rule.threshold(sv[0]);
    let rank = sv.iter().filter(|s| **s > threshold).count();
    let gap_ratio = if rank == cols || rank == 0 || sv[rank] == 0.0 {
        f64::INFINITY
    } else {
        sv[rank - 1] / sv[rank]
    };
    let dim = if gap_ratio >= rule.gap_min && sv.iter().all(|s| s.is_finite()) {
        KernelDim::Determinate(cols - rank)
    } else {
        KernelDim::Indeterminate
    };
    let basis = order[rank..]
        .iter()
        .map(|&i| v_t.row(i).transpose())
        .collect();
    KernelAnalysis {
        singular_values: sv,
        rank,
        dim,
        gap_ratio,
        threshold,
        basis,
    }
}
