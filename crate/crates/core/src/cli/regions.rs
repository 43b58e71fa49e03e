use serde::Serialize;

use crate::error::{EcoError, Result};
use crate::svm::SvmModel;

/// Regular grid over `[lo, hi]` in the first two coordinates (one for
/// 1-D models); further coordinates sit at the midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: 0.0,
            hi: 1.0,
            cells: 100,
        }
    }
}

impl GridSpec {
    /// Cell centers.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let step = (self.hi - self.lo) / self.cells as f64;
        let centre = |k: usize| self.lo + (k as f64 + 0.5) * step;
        let mid = 0.5 * (self.lo + self.hi);
        let mut out = Vec::new();
        let rows = if dim >= 2 { self.cells } else { 1 };
        for j in 0..rows {
            for i in 0..self.cells {
                let mut x = vec![mid; dim];
                x[0] = centre(i);
                if dim >= 2 {
                    x[1] = centre(j);
                }
                out.push(x);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionCell {
    pub x1: f64,
    pub x2: Option<f64>,
    pub sign_a: f64,
    pub sign_b: f64,
    pub disagree: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Regions {
    pub fraction: f64,
    pub cells: Vec<RegionCell>,
}

/// Compares the signs of two decision functions of `dim` inputs cell by cell.
pub fn compare_decisions<F, G>(dim: usize, a: F, b: G, grid: &GridSpec) -> Result<Regions>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<f64>,
{
    if dim == 0 || grid.cells == 0 || !(grid.hi > grid.lo) {
        return Err(EcoError::Config("grid needs lo < hi, cells ≥ 1 and a positive dimension".into()));
    }
    let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    let cells = grid
        .points(dim)
        .into_iter()
        .map(|x| {
            let (sa, sb) = (sign(a(&x)?), sign(b(&x)?));
            Ok(RegionCell {
                x1: x[0],
                x2: x.get(1).copied(),
                sign_a: sa,
                sign_b: sb,
                disagree: sa != sb,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction = cells.iter().filter(|c| c.disagree).count() as f64 / cells.len() as f64;
    Ok(Regions { fraction, cells })
}

/// Fraction of grid cells where the two classifiers disagree.
pub fn compare_regions(model_a: &SvmModel, model_b: &SvmModel, grid: &GridSpec) -> Result<Regions> {
    if model_a.dim() != model_b.dim() {
        return Err(EcoError::DimensionMismatch {
            expected: model_a.dim(),
            found: model_b.dim(),
        });
    }
    compare_decisions(model_a.dim(), |x| model_a.decision(x), |x| model_b.decision(x), grid)
}
