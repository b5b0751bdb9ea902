use std::f64::consts::{FRAC_PI_2, PI};

use super::{BaseSpec, BrickDims, ColumnSpec, PolygonBaseSpec, PolynomialBaseSpec, SegmentBaseSpec, DEFAULT_PHI};

pub const LAMBDA: f64 = 0.01;
pub const KAPPA: f64 = 0.05;
pub const LAYERS: u32 = 17;

/// Names accepted by [`preset`], in presentation order.
pub const PRESET_NAMES: [&str; 7] = [
    "paper_defaults",
    "parallel",
    "orthogonal",
    "triangle",
    "square",
    "concave_decagon",
    "polynomial",
];

/// Base layer of a named preset. `paper_defaults` is the square base.
pub fn preset_base(name: &str) -> Option<BaseSpec> {
    let base = match name {
        "parallel" => BaseSpec::Segments(SegmentBaseSpec {
            s: 2,
            blocks: vec![5, 5],
            theta: PI,
            lambda: LAMBDA,
        }),
        "orthogonal" => BaseSpec::Segments(SegmentBaseSpec {
            s: 4,
            blocks: vec![3, 5, 3, 5],
            theta: FRAC_PI_2,
            lambda: LAMBDA,
        }),
        "triangle" => BaseSpec::Polygon(PolygonBaseSpec::regular(3, 4, LAMBDA)),
        "square" | "paper_defaults" => BaseSpec::Polygon(PolygonBaseSpec::regular(4, 2, LAMBDA)),
        "concave_decagon" => BaseSpec::Polygon(PolygonBaseSpec::star_decagon(3, LAMBDA)),
        "polynomial" => BaseSpec::Polynomial(PolynomialBaseSpec {
            coefficients: vec![2.0, 0.0, -0.5],
            domain: (-2.0, 2.0),
            kappa: KAPPA,
        }),
        _ => return None,
    };
    Some(base)
}

/// Full column for a named preset: 0.1 × 0.5 × 0.025 m bricks, 17 layers,
/// default twist.
pub fn preset(name: &str) -> Option<ColumnSpec> {
    Some(ColumnSpec {
        base: preset_base(name)?,
        dims: BrickDims::STANDARD,
        layers: LAYERS,
        phi: DEFAULT_PHI,
    })
}
