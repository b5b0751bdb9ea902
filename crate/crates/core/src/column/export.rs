use std::fmt::Write as _;
use std::path::Path;

use super::{ColumnModel, Placement};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Which layers a top view draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelection {
    All,
    Layer(u32),
}

// outward-facing triangles over the corner numbering used in `obj_string`
const CUBOID_FACES: [[usize; 3]; 12] = [
    [0, 2, 1],
    [0, 3, 2],
    [4, 5, 6],
    [4, 6, 7],
    [0, 1, 5],
    [0, 5, 4],
    [1, 2, 6],
    [1, 6, 5],
    [2, 3, 7],
    [2, 7, 6],
    [3, 0, 4],
    [3, 4, 7],
];

/// Triangulated ASCII OBJ: 8 vertices and 12 faces per brick, world coordinates.
pub fn obj_string(model: &ColumnModel) -> String {
    let dims = &model.spec.dims;
    let mut out = String::new();
    let _ = writeln!(out, "# spiral brick column");
    let _ = writeln!(out, "# bricks {}", model.placements.len());
    for (n, p) in model.placements.iter().enumerate() {
        let _ = writeln!(out, "o brick_{}_{}", p.layer, p.index_in_layer);
        let corners = footprint_corners(p, dims.l, dims.w);
        let z = p.pose.position.z;
        for dz in [-dims.h / 2.0, dims.h / 2.0] {
            for c in &corners {
                let _ = writeln!(out, "v {:.6} {:.6} {:.6}", c.x, c.y, z + dz);
            }
        }
        let base = 8 * n + 1;
        for f in CUBOID_FACES {
            let _ = writeln!(out, "f {} {} {}", base + f[0], base + f[1], base + f[2]);
        }
    }
    out
}

// counterclockwise seen from above
fn footprint_corners(p: &Placement, l: f64, w: f64) -> [Vec2; 4] {
    let u = Vec2::from_angle(p.pose.yaw) * (l / 2.0);
    let v = Vec2::from_angle(p.pose.yaw).perp() * (w / 2.0);
    let c = p.pose.position.xy();
    [c - u - v, c + u - v, c + u + v, c - u + v]
}

/// Plain SVG 1.1 top view, one rectangle per brick, colored from blue
/// (bottom layer) to red (top layer).
pub fn svg_topview_string(model: &ColumnModel, selection: LayerSelection) -> String {
    let dims = &model.spec.dims;
    let bricks: Vec<&Placement> = model
        .placements
        .iter()
        .filter(|p| match selection {
            LayerSelection::All => true,
            LayerSelection::Layer(k) => p.layer == k,
        })
        .collect();

    let polys: Vec<(u32, [Vec2; 4])> = bricks
        .iter()
        .map(|p| (p.layer, footprint_corners(p, dims.l, dims.w)))
        .collect();
    let (mut lo, mut hi) = (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
    if let Some(first) = polys.first() {
        lo = first.1[0];
        hi = first.1[0];
    }
    for c in polys.iter().flat_map(|(_, c)| c.iter()) {
        lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
        hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
    }
    let pad = 0.05 * (hi - lo).norm().max(1e-3);
    let (x0, y0) = (lo.x - pad, -hi.y - pad);
    let (width, height) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let scale = 800.0 / width.max(height);

    let top_layer = model.spec.layers.saturating_sub(1).max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
        width * scale,
        height * scale,
        x0,
        y0,
        width,
        height
    );
    let _ = writeln!(out, "<title>bricks: {}</title>", polys.len());
    for (layer, corners) in &polys {
        let t = *layer as f64 / top_layer;
        let (r, b) = ((255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8);
        let points: Vec<String> = corners.iter().map(|c| format!("{:.6},{:.6}", c.x, -c.y)).collect();
        let _ = writeln!(
            out,
            r##"<polygon class="brick" data-layer="{}" points="{}" fill="#{:02x}40{:02x}" fill-opacity="0.45" stroke="#202020" stroke-width="{:.6}"/>"##,
            layer,
            points.join(" "),
            r,
            b,
            0.002 * width.max(height)
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}

pub fn export_obj(model: &ColumnModel, path: &Path) -> Result<()> {
    std::fs::write(path, obj_string(model)).map_err(|e| Error::io(path, e))
}

pub fn export_svg_topview(model: &ColumnModel, selection: LayerSelection, path: &Path) -> Result<()> {
    std::fs::write(path, svg_topview_string(model, selection)).map_err(|e| Error::io(path, e))
}
