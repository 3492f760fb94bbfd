//! Minimal plotting: line plots with an uncertainty band (SVG or PNG) and
//! top-down scene renderings with an optional vessel track (SVG).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use image::{Rgb, RgbImage};

use crate::kinematics::VesselState;
use crate::world::WorldScene;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
    Png,
}

impl PlotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Svg => "svg",
            Self::Png => "png",
        }
    }
}

impl FromStr for PlotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(Self::Svg),
            "png" => Ok(Self::Png),
            other => Err(Error::Usage(format!("unknown plot format '{other}' (svg or png)"))),
        }
    }
}

/// One series `y(x)` with a symmetric band of half-width `band`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Vec<f64>,
    pub log_x: bool,
    /// Optional vertical reference line (e.g. the nominal parameter).
    pub marker_x: Option<f64>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 40.0, 50.0]; // left, right, top, bottom

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_x: bool,
}

impl Frame {
    fn new(p: &LinePlot) -> Result<Self> {
        let n = p.x.len();
        if n == 0 || p.y.len() != n || p.band.len() != n {
            return Err(Error::InvalidInput("plot series lengths differ or are empty".into()));
        }
        if p.log_x && p.x.iter().any(|x| *x <= 0.0) {
            return Err(Error::InvalidInput("log axis needs positive x".into()));
        }
        let tx = |x: f64| if p.log_x { x.log10() } else { x };
        let (mut x0, mut x1) = p.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(tx(x)), b.max(tx(x)))
        });
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        let (mut y0, mut y1) =
            p.y.iter()
                .zip(&p.band)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (&y, &s)| {
                    let (y, s) = (finite(y), finite(s));
                    (a.min(y - s), b.max(y + s))
                });
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 1.0;
            y1 += 1.0;
        }
        let pad = 0.05 * (y1 - y0);
        Ok(Self {
            x0,
            x1,
            y0: y0 - pad,
            y1: y1 + pad,
            log_x: p.log_x,
        })
    }

    fn px(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        MARGIN[0] + (x - self.x0) / (self.x1 - self.x0) * (W - MARGIN[0] - MARGIN[1])
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN[3] - (y - self.y0) / (self.y1 - self.y0) * (H - MARGIN[2] - MARGIN[3])
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot_svg(p: &LinePlot) -> Result<String> {
    let f = Frame::new(p)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let band: Vec<String> =
        p.x.iter()
            .zip(&p.y)
            .zip(&p.band)
            .map(|((&x, &y), &b)| format!("{:.2},{:.2}", f.px(x), f.py(y + b)))
            .chain(
                p.x.iter()
                    .zip(&p.y)
                    .zip(&p.band)
                    .rev()
                    .map(|((&x, &y), &b)| format!("{:.2},{:.2}", f.px(x), f.py(y - b))),
            )
            .collect();
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2"/>"##,
        band.join(" ")
    );
    let line: Vec<String> =
        p.x.iter()
            .zip(&p.y)
            .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        line.join(" ")
    );
    for (&x, &y) in p.x.iter().zip(&p.y) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##,
            f.px(x),
            f.py(y)
        );
    }
    if let Some(m) = p.marker_x {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" x2="{0:.2}" y1="{1}" y2="{2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            f.px(m),
            MARGIN[2],
            H - MARGIN[3]
        );
    }
    // Axes with min/max tick labels.
    let (l, r, t, b) = (MARGIN[0], W - MARGIN[1], MARGIN[2], H - MARGIN[3]);
    let _ = writeln!(
        s,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#
    );
    let xt = |v: f64| if f.log_x { 10f64.powf(v) } else { v };
    let _ = writeln!(
        s,
        r#"<text x="{l}" y="{}" text-anchor="start">{:.4}</text>"#,
        b + 16.0,
        xt(f.x0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{r}" y="{}" text-anchor="end">{:.4}</text>"#,
        b + 16.0,
        xt(f.x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{b}" text-anchor="end">{:.2}</text>"#,
        l - 4.0,
        f.y0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
        l - 4.0,
        t + 10.0,
        f.y1
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        H - 10.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(&p.y_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(&p.title)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Rasterised version of the line plot (no text).
pub fn line_plot_png(p: &LinePlot) -> Result<RgbImage> {
    let f = Frame::new(p)?;
    let mut img = RgbImage::from_pixel(W as u32, H as u32, Rgb([255, 255, 255]));
    let band_color = Rgb([200, 220, 240]);
    let line_color = Rgb([31, 119, 180]);
    for w in 0..p.x.len().saturating_sub(1) {
        let (xa, xb) = (f.px(p.x[w]), f.px(p.x[w + 1]));
        for col in xa.round() as i64..=xb.round() as i64 {
            let t = if xb > xa {
                ((col as f64 - xa) / (xb - xa)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let lerp = |a: f64, b: f64| a + t * (b - a);
            let hi = f.py(lerp(p.y[w] + p.band[w], p.y[w + 1] + p.band[w + 1]));
            let lo = f.py(lerp(p.y[w] - p.band[w], p.y[w + 1] - p.band[w + 1]));
            for row in hi.round() as i64..=lo.round() as i64 {
                put(&mut img, col, row, band_color);
            }
        }
    }
    let black = Rgb([0, 0, 0]);
    draw_line(&mut img, MARGIN[0], MARGIN[2], MARGIN[0], H - MARGIN[3], black);
    draw_line(&mut img, MARGIN[0], H - MARGIN[3], W - MARGIN[1], H - MARGIN[3], black);
    if let Some(m) = p.marker_x {
        draw_line(
            &mut img,
            f.px(m),
            MARGIN[2],
            f.px(m),
            H - MARGIN[3],
            Rgb([150, 150, 150]),
        );
    }
    for w in 0..p.x.len().saturating_sub(1) {
        draw_line(
            &mut img,
            f.px(p.x[w]),
            f.py(p.y[w]),
            f.px(p.x[w + 1]),
            f.py(p.y[w + 1]),
            line_color,
        );
    }
    for (&x, &y) in p.x.iter().zip(&p.y) {
        let (cx, cy) = (f.px(x).round() as i64, f.py(y).round() as i64);
        for dy in -2..=2 {
            for dx in -2..=2 {
                put(&mut img, cx + dx, cy + dy, line_color);
            }
        }
    }
    Ok(img)
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn draw_line(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgb<u8>) {
    let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        put(
            img,
            (x0 + t * (x1 - x0)).round() as i64,
            (y0 + t * (y1 - y0)).round() as i64,
            c,
        );
    }
}

pub fn write_line_plot(p: &LinePlot, format: PlotFormat, path: &Path) -> Result<()> {
    match format {
        PlotFormat::Svg => std::fs::write(path, line_plot_svg(p)?).map_err(|e| Error::io(path, e)),
        PlotFormat::Png => line_plot_png(p)?
            .save(path)
            .map_err(|e| Error::InvalidState(format!("{}: {e}", path.display()))),
    }
}

/// Top-down SVG of a scene: basin, obstacles (dynamics at their current
/// positions, routes dashed), goal, spawn and an optional track.
pub fn scene_svg(scene: &WorldScene, track: &[VesselState]) -> String {
    let scale = 2.0;
    let (w, h) = (scene.bounds.width() * scale, scene.bounds.height() * scale);
    let tx = |x: f64| (x - scene.bounds.min.x) * scale;
    let ty = |y: f64| (scene.bounds.max.y - y) * scale;
    let pts = |vs: &mut dyn Iterator<Item = (f64, f64)>| {
        vs.map(|(x, y)| format!("{:.2},{:.2}", tx(x), ty(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#8a8a8a"/>"##);
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="#cfe6f5" stroke="#333" stroke-width="1.5"/>"##,
        pts(&mut scene.basin.vertices.iter().map(|v| (v.x, v.y)))
    );
    for poly in &scene.static_obstacles {
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#6b4f3a" stroke="#333"/>"##,
            pts(&mut poly.vertices.iter().map(|v| (v.x, v.y)))
        );
    }
    for d in &scene.dynamic_obstacles {
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="none" stroke="#c0392b" stroke-dasharray="4 3"/>"##,
            pts(&mut d.route.iter().map(|v| (v.x, v.y)))
        );
        let p = d.position();
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#c0392b"/>"##,
            tx(p.x),
            ty(p.y),
            d.footprint_radius * scale
        );
    }
    let g = &scene.goal;
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#27ae60" fill-opacity="0.5" stroke="#1e8449"/>"##,
        tx(g.center.x),
        ty(g.center.y),
        g.radius * scale
    );
    let sp = &scene.spawn_pose;
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#2c3e50"/>"##,
        tx(sp.x),
        ty(sp.y)
    );
    if track.len() > 1 {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#e67e22" stroke-width="2"/>"##,
            pts(&mut track.iter().map(|p| (p.x, p.y)))
        );
    }
    s.push_str("</svg>\n");
    s
}
