use serde::{Deserialize, Serialize};

use super::{ColumnModel, CLOSURE_TOLERANCE};
use crate::geometry::obb_overlap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapFinding {
    pub layer: u32,
    pub first: u32,
    pub second: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub layers: u32,
    pub bricks: usize,
    pub overlaps: Vec<OverlapFinding>,
    pub closure_residual: f64,
    /// Every layer holds the same bricks, indexed `0..n`, in layer-major order.
    pub count_consistent: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.overlaps.is_empty() && self.closure_residual <= CLOSURE_TOLERANCE && self.count_consistent
    }
}

/// Pairwise footprint overlap scan per layer plus bookkeeping checks.
pub fn validate_column(model: &ColumnModel) -> ValidationReport {
    let dims = &model.spec.dims;
    let mut overlaps = Vec::new();
    let mut count_consistent = true;

    let per_layer = model.bricks_per_layer();
    if model.spec.layers > 0 && per_layer * model.spec.layers as usize != model.placements.len() {
        count_consistent = false;
    }

    let mut start = 0;
    while start < model.placements.len() {
        let layer = model.placements[start].layer;
        let end = model.placements[start..]
            .iter()
            .position(|p| p.layer != layer)
            .map_or(model.placements.len(), |off| start + off);
        let bricks = &model.placements[start..end];
        if bricks.len() != per_layer
            || bricks.iter().enumerate().any(|(i, p)| p.index_in_layer as usize != i)
            || (start > 0 && model.placements[start - 1].layer + 1 != layer)
        {
            count_consistent = false;
        }
        let boxes: Vec<_> = bricks.iter().map(|p| p.pose.footprint(dims)).collect();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if obb_overlap(&boxes[i], &boxes[j]) {
                    overlaps.push(OverlapFinding {
                        layer,
                        first: bricks[i].index_in_layer,
                        second: bricks[j].index_in_layer,
                    });
                }
            }
        }
        start = end;
    }

    ValidationReport {
        layers: model.spec.layers,
        bricks: model.placements.len(),
        overlaps,
        closure_residual: model.closure_residual,
        count_consistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::{build_column, BaseSpec, BrickDims, ColumnSpec, PolygonBaseSpec};

    fn square_model() -> ColumnModel {
        build_column(&ColumnSpec {
            base: BaseSpec::Polygon(PolygonBaseSpec::regular(4, 3, 0.01)),
            dims: BrickDims::STANDARD,
            layers: 3,
            phi: 0.1,
        })
        .unwrap()
    }

    #[test]
    fn generated_model_is_valid() {
        let report = validate_column(&square_model());
        assert!(report.is_valid(), "{report:?}");
        assert_eq!(report.bricks, 36);
    }

    #[test]
    fn forced_duplicate_is_one_overlap() {
        let mut model = square_model();
        model.placements[1].pose = model.placements[0].pose;
        let report = validate_column(&model);
        assert_eq!(
            report.overlaps,
            vec![OverlapFinding {
                layer: 0,
                first: 0,
                second: 1
            }]
        );
    }

    #[test]
    fn empty_model_is_trivially_valid() {
        let mut model = square_model();
        model.placements.clear();
        model.closure_residual = 0.0;
        model.spec.layers = 0;
        let report = validate_column(&model);
        assert!(report.is_valid());
        assert_eq!(report.bricks, 0);
    }

    #[test]
    fn dropped_brick_breaks_count() {
        let mut model = square_model();
        model.placements.remove(5);
        assert!(!validate_column(&model).count_consistent);
    }
}
