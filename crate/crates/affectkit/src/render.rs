//! Crease-pattern export as JSON and SVG.

use std::fmt::Write as _;

use affectkit_core::dataio::Point;
use affectkit_core::origami::{CreasePattern, LangPolygon};

use crate::error::Result;

pub fn crease_json(cp: &CreasePattern) -> Result<String> {
    let mut s = serde_json::to_string_pretty(cp)?;
    s.push('\n');
    Ok(s)
}

pub fn crease_from_json(text: &str) -> Result<CreasePattern> {
    Ok(serde_json::from_str(text)?)
}

/// Crease lines in black, nodes as dots, and the Lang polygon outline when
/// given. The view box pads the drawing by 5% of its larger side.
pub fn crease_svg(cp: &CreasePattern, outline: Option<&LangPolygon>) -> String {
    let mut pts: Vec<Point> = cp.nodes.iter().map(|n| [n.x, n.y]).collect();
    if let Some(poly) = outline {
        pts.extend(poly.vertices.iter().map(|v| v.pos));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for p in &pts {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    if pts.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let stroke = 0.004 * w.max(h);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        x0 - pad,
        y0 - pad,
        w,
        h
    );
    if let Some(poly) = outline {
        let path: Vec<String> = poly
            .vertices
            .iter()
            .map(|v| format!("{:.3},{:.3}", v.pos[0], v.pos[1]))
            .collect();
        let _ = writeln!(
            s,
            r##"  <polygon points="{}" fill="none" stroke="#888" stroke-width="{stroke:.3}"/>"##,
            path.join(" ")
        );
    }
    let pos = |id: usize| cp.nodes.iter().find(|n| n.id == id).map(|n| (n.x, n.y));
    let _ = writeln!(s, r##"  <g stroke="#000" stroke-width="{stroke:.3}">"##);
    for &(a, b) in &cp.edges {
        if let (Some(p), Some(q)) = (pos(a), pos(b)) {
            let _ = writeln!(
                s,
                r#"    <line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
                p.0, p.1, q.0, q.1
            );
        }
    }
    s.push_str("  </g>\n");
    let _ = writeln!(s, r##"  <g fill="#c00">"##);
    for n in &cp.nodes {
        let _ = writeln!(
            s,
            r#"    <circle cx="{:.3}" cy="{:.3}" r="{:.3}"/>"#,
            n.x,
            n.y,
            2.0 * stroke
        );
    }
    s.push_str("  </g>\n</svg>\n");
    s
}
