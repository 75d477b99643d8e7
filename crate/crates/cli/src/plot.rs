//! SVG rendering of rejection frequencies (dashed) and asymptotic powers
//! (solid) against ℓ, one panel per grid point.

use std::collections::BTreeSet;
use std::fmt::Write;

use hdsphere::montecarlo::{CellResult, ELLS};
use hdsphere::testing::TestId;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("incomplete grid: missing {0}")]
    IncompleteGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Panels over `(n, p)`; specified-θ and Rayleigh tests for `j = 1, 2`.
    RotSym,
    /// One panel per Euclidean family; the three sphericity tests.
    Sphericity,
}

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 190.0;
const PAD_L: f64 = 38.0;
const PAD_R: f64 = 12.0;
const PAD_T: f64 = 26.0;
const PAD_B: f64 = 30.0;
const LEGEND_H: f64 = 40.0;

struct Series {
    label: String,
    color: &'static str,
    empirical: Vec<f64>,
    asymptotic: Option<Vec<f64>>,
}

struct Panel {
    title: String,
    series: Vec<Series>,
}

fn lookup(
    results: &[CellResult],
    pred: impl Fn(&CellResult) -> bool,
    test: TestId,
    ell: f64,
    what: &str,
) -> Result<(f64, Option<f64>), PlotError> {
    results
        .iter()
        .filter(|r| pred(r) && r.cell.alternative.ell() == ell)
        .find_map(|r| r.tally(test))
        .map(|t| (t.frequency, t.asymptotic_power))
        .ok_or_else(|| PlotError::IncompleteGrid(format!("{what}, test {test}, ell={ell}")))
}

fn rot_sym_panels(results: &[CellResult]) -> Result<(Vec<Panel>, usize), PlotError> {
    let rs: Vec<&CellResult> = results.iter().filter(|r| r.cell.alternative.j().is_some()).collect();
    let ns: BTreeSet<usize> = rs.iter().map(|r| r.cell.n).collect();
    let ps: BTreeSet<usize> = rs.iter().map(|r| r.cell.p).collect();
    if ns.is_empty() {
        return Err(PlotError::IncompleteGrid("rotationally symmetric cells".into()));
    }
    let specs = [
        (TestId::SpecifiedTheta, 1u8, "#f5a142"),
        (TestId::SpecifiedTheta, 2, "#c0392b"),
        (TestId::RayleighHighdim, 1, "#8fd18a"),
        (TestId::RayleighHighdim, 2, "#1e7b34"),
    ];
    let mut panels = Vec::new();
    for &n in &ns {
        for &p in &ps {
            let mut series = Vec::new();
            for (test, j, color) in specs {
                let what = format!("n={n}, p={p}, j={j}");
                let mut emp = Vec::new();
                let mut asy = Vec::new();
                for &ell in &ELLS {
                    let (f, a) = lookup(
                        results,
                        |r| r.cell.n == n && r.cell.p == p && r.cell.alternative.j() == Some(j),
                        test,
                        ell,
                        &what,
                    )?;
                    emp.push(f);
                    asy.push(a.ok_or_else(|| PlotError::IncompleteGrid(format!("asymptotic power for {what}")))?);
                }
                series.push(Series {
                    label: format!("{test} j={j}"),
                    color,
                    empirical: emp,
                    asymptotic: Some(asy),
                });
            }
            panels.push(Panel {
                title: format!("n = {n}, p = {p}"),
                series,
            });
        }
    }
    Ok((panels, ps.len()))
}

fn sphericity_panels(results: &[CellResult]) -> Result<(Vec<Panel>, usize), PlotError> {
    let specs = [
        (TestId::RayleighSigns, "#1e7b34"),
        (TestId::John, "#2c6fbb"),
        (TestId::SignSphericity, "#8e44ad"),
    ];
    let mut panels = Vec::new();
    for (family, title) in [("skew_normal", "skew-normal"), ("spiked", "spiked")] {
        let mut series = Vec::new();
        for (test, color) in specs {
            let mut emp = Vec::new();
            for &ell in &ELLS {
                let (f, _) = lookup(results, |r| r.cell.alternative.family() == family, test, ell, family)?;
                emp.push(f);
            }
            series.push(Series {
                label: test.to_string(),
                color,
                empirical: emp,
                asymptotic: None,
            });
        }
        let np = results
            .iter()
            .find(|r| r.cell.alternative.family() == family)
            .map(|r| format!(" (n = {}, p = {})", r.cell.n, r.cell.p))
            .unwrap_or_default();
        panels.push(Panel {
            title: format!("{title}{np}"),
            series,
        });
    }
    Ok((panels, 2))
}

fn points(xs: &[f64], ys: &[f64], x0: f64, y0: f64) -> String {
    let w = PANEL_W - PAD_L - PAD_R;
    let h = PANEL_H - PAD_T - PAD_B;
    let xmax = xs.last().copied().unwrap_or(1.0).max(1e-12);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| format!("{:.2},{:.2}", x0 + PAD_L + w * x / xmax, y0 + PAD_T + h * (1.0 - y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders the figure; identical inputs give identical bytes.
pub fn emit_plot(results: &[CellResult], layout: Layout, alpha: f64) -> Result<String, PlotError> {
    let (panels, cols) = match layout {
        Layout::RotSym => rot_sym_panels(results)?,
        Layout::Sphericity => sphericity_panels(results)?,
    };
    let rows = panels.len().div_ceil(cols);
    let width = PANEL_W * cols as f64;
    let height = PANEL_H * rows as f64 + LEGEND_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let xs: Vec<f64> = ELLS.to_vec();
    let w = PANEL_W - PAD_L - PAD_R;
    let h = PANEL_H - PAD_T - PAD_B;
    for (k, panel) in panels.iter().enumerate() {
        let x0 = PANEL_W * (k % cols) as f64;
        let y0 = PANEL_H * (k / cols) as f64;
        let _ = writeln!(s, r#"<g>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
            x0 + PAD_L + w / 2.0,
            y0 + 16.0,
            panel.title
        );
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#444"/>"##,
            x0 + PAD_L,
            y0 + PAD_T
        );
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let y = y0 + PAD_T + h * (1.0 - tick);
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.2}</text>"##,
                x0 + PAD_L - 4.0,
                y + 3.0
            );
        }
        for (i, ell) in xs.iter().enumerate() {
            let x = x0 + PAD_L + w * *ell / xs[xs.len() - 1];
            let _ = writeln!(
                s,
                r##"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{i}</text>"##,
                y0 + PAD_T + h + 13.0
            );
        }
        let ya = y0 + PAD_T + h * (1.0 - alpha);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{ya:.2}" x2="{:.2}" y2="{ya:.2}" stroke="#999" stroke-dasharray="1,3"/>"##,
            x0 + PAD_L,
            x0 + PAD_L + w
        );
        for ser in &panel.series {
            if let Some(a) = &ser.asymptotic {
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    points(&xs, a, x0, y0),
                    ser.color
                );
            }
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="5,3"/>"#,
                points(&xs, &ser.empirical, x0, y0),
                ser.color
            );
        }
        let _ = writeln!(s, "</g>");
    }
    // legend
    let ly = PANEL_H * rows as f64 + 14.0;
    let series = &panels[0].series;
    let step = width / series.len() as f64;
    for (i, ser) in series.iter().enumerate() {
        let lx = 10.0 + step * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"#,
            lx + 20.0,
            ser.color
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 24.0, ly + 3.0, ser.label);
    }
    let _ = writeln!(
        s,
        r#"<text x="10" y="{:.2}">x: ell; dashed: rejection frequency; solid: asymptotic power</text>"#,
        ly + 20.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}
