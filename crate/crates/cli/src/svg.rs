//! Minimal SVG writer and the figures the commands emit.

use std::fmt::Write;

use tda_texture::landscape::LandscapeCurves;
use tda_texture::persistence::{Barcode, Direction};

pub const H0_COLOR: &str = "#d62728";
pub const H1_COLOR: &str = "#1f77b4";

pub fn class_color(label: &str) -> &'static str {
    match label {
        "flowers" => "#d62728",
        "sugar" => "#e6b800",
        "gravel" => "#2ca02c",
        "fish" => "#1f77b4",
        _ => "#7f7f7f",
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut s = Self {
            width,
            height,
            body: String::new(),
        };
        s.rect(0.0, 0.0, width, height, "white", None);
        s
    }

    #[allow(clippy::too_many_arguments)]
    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"{dash}/>"#
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: Option<&str>) {
        let stroke = stroke.map_or(String::new(), |s| format!(r#" stroke="{s}" stroke-width="1.5""#));
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"{stroke}/>"#
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r}" fill="{fill}" fill-opacity="0.8"/>"#
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64, dashed: bool) {
        let mut p = String::new();
        for (x, y) in pts {
            let _ = write!(p, "{x:.2},{y:.2} ");
        }
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            p.trim_end()
        );
    }

    pub fn image(&mut self, x: f64, y: f64, w: f64, h: f64, png_base64: &str) {
        let _ = writeln!(
            self.body,
            r#"<image x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" preserveAspectRatio="none" style="image-rendering:pixelated" href="data:image/png;base64,{png_base64}"/>"#
        );
    }

    /// Serialized document. `stamp` adds a generation-time comment.
    pub fn finish(&self, stamp: Option<&str>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        if let Some(s) = stamp {
            let _ = writeln!(out, "<!-- generated {} -->", esc(s));
        }
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

/// Plot frame mapping data coordinates to the page.
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, svg: &mut Svg) {
        let (b, r) = (self.top + self.height, self.left + self.width);
        svg.line(self.left, b, r, b, "black", 1.0, false);
        svg.line(self.left, self.top, self.left, b, "black", 1.0, false);
    }

    /// Ticks along x at internal-parameter values, labelled in intensity.
    fn intensity_ticks(&self, svg: &mut Svg, direction: Direction) {
        let b = self.top + self.height;
        for t in [0u8, 64, 128, 192, 255] {
            let x = self.px(t as f64);
            if x < self.left - 0.5 || x > self.left + self.width + 0.5 {
                continue;
            }
            svg.line(x, b, x, b + 4.0, "black", 1.0, false);
            svg.text(x, b + 16.0, 11.0, "middle", &direction.to_intensity(t).to_string());
        }
    }

    fn y_ticks(&self, svg: &mut Svg) {
        let (lo, hi) = self.y;
        for i in 0..=4 {
            let v = lo + (hi - lo) * i as f64 / 4.0;
            let y = self.py(v);
            svg.line(self.left - 4.0, y, self.left, y, "black", 1.0, false);
            svg.text(self.left - 6.0, y + 4.0, 11.0, "end", &format!("{v:.0}"));
        }
    }
}

/// Bars drawn against the internal sweep parameter, so intensity decreases
/// from left to right for the superlevel filtration.
pub fn barcode_svg(bc: &Barcode, title: &str) -> Svg {
    let n = bc.bars.len().max(1);
    let row = (300.0 / n as f64).clamp(2.0, 14.0);
    let height = 90.0 + row * n as f64;
    let mut svg = Svg::new(620.0, height);
    let f = Frame {
        left: 40.0,
        top: 40.0,
        width: 540.0,
        height: row * n as f64,
        x: (0.0, 255.0),
        y: (0.0, n as f64),
    };
    svg.text(310.0, 22.0, 14.0, "middle", title);
    let mut bars = bc.bars.clone();
    bars.sort_by_key(|b| (b.dim, bc.direction.to_param(b.birth)));
    for (i, b) in bars.iter().enumerate() {
        let y = f.top + row * (i as f64 + 0.5);
        let x0 = f.px(bc.direction.to_param(b.birth) as f64);
        let x1 = b.death.map_or(f.left + f.width + 10.0, |d| f.px(bc.direction.to_param(d) as f64));
        let color = if b.dim == 0 { H0_COLOR } else { H1_COLOR };
        svg.line(x0, y, x1, y, color, (row * 0.6).max(1.0), false);
    }
    f.axes(&mut svg);
    f.intensity_ticks(&mut svg, bc.direction);
    svg.text(310.0, height - 8.0, 12.0, "middle", "intensity");
    svg
}

/// Birth against death in the internal parameter; essential classes sit on
/// a separate line marked +inf.
pub fn diagram_svg(bc: &Barcode, title: &str) -> Svg {
    let mut svg = Svg::new(460.0, 460.0);
    let f = Frame {
        left: 50.0,
        top: 60.0,
        width: 360.0,
        height: 340.0,
        x: (0.0, 255.0),
        y: (0.0, 255.0),
    };
    svg.text(230.0, 22.0, 14.0, "middle", title);
    let inf_y = f.top - 18.0;
    svg.line(f.left, inf_y, f.left + f.width, inf_y, "gray", 1.0, true);
    svg.text(f.left - 6.0, inf_y + 4.0, 12.0, "end", "+\u{221e}");
    svg.line(f.px(0.0), f.py(0.0), f.px(255.0), f.py(255.0), "gray", 1.0, false);
    for b in &bc.bars {
        let x = f.px(bc.direction.to_param(b.birth) as f64);
        let y = b.death.map_or(inf_y, |d| f.py(bc.direction.to_param(d) as f64));
        svg.circle(x, y, 3.5, if b.dim == 0 { H0_COLOR } else { H1_COLOR });
    }
    f.axes(&mut svg);
    f.intensity_ticks(&mut svg, bc.direction);
    let b = f.top + f.height;
    for t in [0u8, 64, 128, 192, 255] {
        let y = f.py(t as f64);
        svg.line(f.left - 4.0, y, f.left, y, "black", 1.0, false);
        svg.text(f.left - 6.0, y + 4.0, 11.0, "end", &bc.direction.to_intensity(t).to_string());
    }
    svg.text(f.left + f.width / 2.0, b + 34.0, 12.0, "middle", "birth intensity");
    svg.text(14.0, f.top + f.height / 2.0, 12.0, "middle", "death");
    svg
}

/// Landscape functions of both dimensions on one axis. Virtual curves are
/// dashed and drawn as given, negative values included.
pub fn landscape_svg(curves: &LandscapeCurves<f64>, title: &str) -> Svg {
    let mut svg = Svg::new(620.0, 360.0);
    let all = curves.h0.iter().chain(&curves.h1).flatten();
    let (lo, hi) = all.fold((0.0f64, 1.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let g = curves.grid;
    let f = Frame {
        left: 50.0,
        top: 40.0,
        width: 530.0,
        height: 270.0,
        x: (g.min as f64, g.max as f64),
        y: (lo, hi * 1.05),
    };
    svg.text(310.0, 22.0, 14.0, "middle", title);
    if lo < 0.0 {
        svg.line(f.left, f.py(0.0), f.left + f.width, f.py(0.0), "gray", 0.5, false);
    }
    let xs: Vec<f64> = g.points::<f64>();
    for (set, color) in [(&curves.h0, H0_COLOR), (&curves.h1, H1_COLOR)] {
        for (i, c) in set.iter().enumerate() {
            let pts: Vec<(f64, f64)> = xs.iter().zip(c).map(|(&x, &y)| (f.px(x), f.py(y))).collect();
            let width = if i == 0 { 2.0 } else { 1.2 };
            svg.polyline(&pts, color, width, curves.is_virtual);
        }
    }
    f.axes(&mut svg);
    f.intensity_ticks(&mut svg, Direction::Superlevel);
    f.y_ticks(&mut svg);
    svg.text(310.0, 350.0, 12.0, "middle", "intensity");
    svg
}

/// A grayscale raster with outlined squares (subsample windows).
pub fn image_svg(png_base64: &str, width: u32, height: u32, squares: &[(u32, u32, u32)], title: &str) -> Svg {
    let scale = (400.0 / width.max(height) as f64).min(4.0);
    let (w, h) = (width as f64 * scale, height as f64 * scale);
    let mut svg = Svg::new(w + 40.0, h + 60.0);
    svg.text((w + 40.0) / 2.0, 22.0, 14.0, "middle", title);
    svg.image(20.0, 40.0, w, h, png_base64);
    for &(x, y, s) in squares {
        svg.rect(
            20.0 + x as f64 * scale,
            40.0 + y as f64 * scale,
            s as f64 * scale,
            s as f64 * scale,
            "none",
            Some("white"),
        );
    }
    svg
}

pub struct ScatterPoint<'a> {
    pub label: &'a str,
    pub p: [f64; 3],
}

fn rotate(p: [f64; 3], azimuth: f64, elevation: f64) -> (f64, f64) {
    let (sa, ca) = azimuth.to_radians().sin_cos();
    let (se, ce) = elevation.to_radians().sin_cos();
    let x = ca * p[0] - sa * p[1];
    let depth = sa * p[0] + ca * p[1];
    let y = ce * p[2] - se * depth;
    (x, y)
}

/// Orthographic view of 3-D points from a fixed azimuth and elevation, with
/// the plane `w . x = b` as a wireframe clipped to the data box.
pub fn scatter_svg(points: &[ScatterPoint], w: [f64; 3], b: f64, azimuth: f64, elevation: f64, title: &str) -> Svg {
    let mut svg = Svg::new(560.0, 520.0);
    svg.text(280.0, 22.0, 14.0, "middle", title);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for sp in points {
        for k in 0..3 {
            lo[k] = lo[k].min(sp.p[k]);
            hi[k] = hi[k].max(sp.p[k]);
        }
    }
    if points.is_empty() {
        lo = [-1.0; 3];
        hi = [1.0; 3];
    }
    for k in 0..3 {
        if hi[k] - lo[k] < 1e-9 {
            lo[k] -= 1.0;
            hi[k] += 1.0;
        }
    }

    // wireframe: solve for the axis with the largest normal component
    let c = (0..3)
        .max_by(|&i, &j| w[i].abs().partial_cmp(&w[j].abs()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(2);
    let (a1, a2) = match c {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut segments: Vec<Vec<[f64; 3]>> = Vec::new();
    if w[c] != 0.0 {
        let lines = 7;
        for (u, v) in [(a1, a2), (a2, a1)] {
            for i in 0..lines {
                let fu = lo[u] + (hi[u] - lo[u]) * i as f64 / (lines - 1) as f64;
                let mut run = Vec::new();
                for j in 0..=40 {
                    let fv = lo[v] + (hi[v] - lo[v]) * j as f64 / 40.0;
                    let mut p = [0.0; 3];
                    p[u] = fu;
                    p[v] = fv;
                    p[c] = (b - w[u] * fu - w[v] * fv) / w[c];
                    if p[c] >= lo[c] && p[c] <= hi[c] {
                        run.push(p);
                    } else if !run.is_empty() {
                        segments.push(std::mem::take(&mut run));
                    }
                }
                if !run.is_empty() {
                    segments.push(run);
                }
            }
        }
    }

    // normalize into the unit cube before projecting
    let norm = |p: [f64; 3]| -> [f64; 3] {
        let mut q = [0.0; 3];
        for k in 0..3 {
            q[k] = (p[k] - lo[k]) / (hi[k] - lo[k]) * 2.0 - 1.0;
        }
        q
    };
    let project = |p: [f64; 3]| -> (f64, f64) {
        let (x, y) = rotate(norm(p), azimuth, elevation);
        (280.0 + x * 150.0, 280.0 - y * 150.0)
    };

    // the data box
    for &(i, j) in &[(0, 1), (1, 3), (3, 2), (2, 0), (4, 5), (5, 7), (7, 6), (6, 4), (0, 4), (1, 5), (2, 6), (3, 7)] {
        let corner = |n: usize| {
            let mut p = [0.0; 3];
            for (k, slot) in p.iter_mut().enumerate() {
                *slot = if n >> k & 1 == 1 { hi[k] } else { lo[k] };
            }
            p
        };
        let (x1, y1) = project(corner(i));
        let (x2, y2) = project(corner(j));
        svg.line(x1, y1, x2, y2, "#cccccc", 0.8, false);
    }
    for seg in &segments {
        let pts: Vec<(f64, f64)> = seg.iter().map(|&p| project(p)).collect();
        svg.polyline(&pts, "#555555", 0.8, false);
    }
    for sp in points {
        let (x, y) = project(sp.p);
        svg.circle(x, y, 3.0, class_color(sp.label));
    }

    // legend
    let mut labels: Vec<&str> = points.iter().map(|p| p.label).collect();
    labels.sort_unstable();
    labels.dedup();
    for (i, l) in labels.iter().enumerate() {
        let y = 500.0 - 18.0 * (labels.len() - 1 - i) as f64;
        svg.circle(20.0, y - 4.0, 5.0, class_color(l));
        svg.text(30.0, y, 12.0, "start", l);
    }
    svg.text(540.0, 500.0, 11.0, "end", &format!("azimuth {azimuth:.0}, elevation {elevation:.0}"));
    svg
}
