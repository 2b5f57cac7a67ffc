//! Minimal SVG rendering of layouts, deception circles and snare points.

use sand_core::deception::{deception_circle, retinue, ApolloniusLocus, SnareReport};
use sand_core::geometry::{LayoutSpec, Role};

/// Render the layout with faulty nodes, their leading deception loci, and
/// every reported snare point.
pub fn render_layout(layout: &LayoutSpec, snares: &[SnareReport]) -> String {
    let d_n = layout.params.d_n;
    let (mut min_x, mut min_y, mut max_x, mut max_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in layout.positions() {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    if !min_x.is_finite() {
        min_x = 0.0;
        min_y = 0.0;
        max_x = 1.0;
        max_y = 1.0;
    }
    let margin = d_n * 1.2;
    let (x0, y0) = (min_x - margin, min_y - margin);
    let (w, h) = (max_x - min_x + 2.0 * margin, max_y - min_y + 2.0 * margin);
    let scale = 640.0 / w.max(h);
    let px = |x: f64| (x - x0) * scale;
    let py = |y: f64| (y - y0) * scale; // y grows downward; fine for a schematic
    let r_node = (0.06 * d_n * scale).max(2.5);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
         viewBox=\"0 0 {:.2} {:.2}\">\n",
        w * scale,
        h * scale,
        w * scale,
        h * scale
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Deception locus of each faulty node's minimal retinue.
    for f in layout.faulty_positions() {
        if let Ok(ret) = retinue(layout, f, 1) {
            if ret.members.len() >= 2 {
                if let Ok(circle) = deception_circle(ret.members[0], ret.members[1], f) {
                    match circle.locus {
                        ApolloniusLocus::Circle { center, radius } => {
                            s.push_str(&format!(
                                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" \
                                 stroke=\"#caa\" stroke-dasharray=\"4 3\"/>\n",
                                px(center.x),
                                py(center.y),
                                radius * scale
                            ));
                        }
                        ApolloniusLocus::Bisector => {
                            let a = circle.point_at(-2.0 * d_n);
                            let b = circle.point_at(2.0 * d_n);
                            s.push_str(&format!(
                                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                                 stroke=\"#caa\" stroke-dasharray=\"4 3\"/>\n",
                                px(a.x),
                                py(a.y),
                                px(b.x),
                                py(b.y)
                            ));
                        }
                    }
                }
            }
        }
    }

    // Snare points and their retinue links.
    for rep in snares {
        let k = rep.snare_point;
        for ret in &rep.retinues {
            for m in &ret.members {
                s.push_str(&format!(
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                     stroke=\"#fdd\" stroke-width=\"0.5\"/>\n",
                    px(ret.leader.x),
                    py(ret.leader.y),
                    px(m.x),
                    py(m.y)
                ));
            }
        }
        let (cx, cy, r) = (px(k.x), py(k.y), r_node * 0.6);
        s.push_str(&format!(
            "<path d=\"M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}\" \
             stroke=\"#d22\" stroke-width=\"1\"/>\n",
            cx - r,
            cy - r,
            cx + r,
            cy + r,
            cx - r,
            cy + r,
            cx + r,
            cy - r
        ));
    }

    // Nodes on top.
    for n in &layout.nodes {
        let color = match n.role {
            Role::Correct => "#2a6",
            Role::Faulty => "#d22",
        };
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\"/>\n",
            px(n.position.x),
            py(n.position.y),
            r_node,
            color
        ));
    }
    s.push_str("</svg>\n");
    s
}
