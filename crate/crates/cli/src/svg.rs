//! The two plots the CLI draws: conditions along the Δ axis, and per-regime
//! model rankings.

use std::collections::BTreeMap;
use std::fmt::Write;

use oodspec::analysis::RegimeRanking;
use oodspec::spectrum::Spectrum;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn label(t: f64) -> String {
    let s = format!("{t:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 {
        out.push(if t.abs() < 1e-12 { 0.0 } else { t });
        t += step;
    }
    out
}

/// One row per distortion type; each condition a dot at its Δ, coloured
/// by regime, with dashed regime boundaries.
pub fn spectrum_strip(s: &Spectrum) -> String {
    let mut rows: BTreeMap<&str, Vec<(f64, usize)>> = BTreeMap::new();
    for c in &s.conditions {
        let ri = s.assignment.regime_index(&c.regime).unwrap_or(0);
        rows.entry(&c.score.condition.distortion_type).or_default().push((c.score.delta, ri));
    }
    let deltas: Vec<f64> = s.conditions.iter().map(|c| c.score.delta).collect();
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let pad = 0.05 * (hi - lo).max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);

    let (left, right, top, row_h) = (130.0, 30.0, 40.0, 22.0);
    let width = 820.0;
    let plot_w = width - left - right;
    let height = top + row_h * rows.len() as f64 + 70.0;
    let x = |v: f64| left + (v - lo) / (hi - lo) * plot_w;
    let bottom = top + row_h * rows.len() as f64;

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, r#"<text x="{left}" y="20" font-size="13">OOD score (Δ) by condition, k = {}</text>"#, s.fit.k);
    for b in &s.assignment.boundaries {
        if *b > lo && *b < hi {
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{bottom}" stroke="#999" stroke-dasharray="4 3"/>"##,
                x(*b)
            );
        }
    }
    for (i, (name, pts)) in rows.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            left - 8.0,
            y,
            escape(name)
        );
        let _ = writeln!(out, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eee"/>"##, left + plot_w);
        for (d, ri) in pts {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{y:.2}" r="4.5" fill="{}" fill-opacity="0.85"/>"#,
                x(*d),
                PALETTE[ri % PALETTE.len()]
            );
        }
    }
    let _ = writeln!(out, r#"<line x1="{left}" y1="{bottom}" x2="{:.2}" y2="{bottom}" stroke="black"/>"#, left + plot_w);
    for t in ticks(lo, hi) {
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="{bottom}" x2="{0:.2}" y2="{1:.2}" stroke="black"/><text x="{0:.2}" y="{2:.2}" text-anchor="middle">{3}</text>"#,
            x(t),
            bottom + 4.0,
            bottom + 16.0,
            label(t)
        );
    }
    let legend_y = bottom + 40.0;
    for (i, r) in s.assignment.regimes.iter().enumerate() {
        let lx = left + 140.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{lx:.2}" cy="{legend_y:.2}" r="5" fill="{}"/><text x="{:.2}" y="{legend_y:.2}" dominant-baseline="middle">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            lx + 9.0,
            escape(r)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Per-regime panels of mean ratio ± sd, one row per model, coloured by
/// family; the dashed line marks human-level alignment.
pub fn ranking_dots(rankings: &[RegimeRanking]) -> String {
    let mut families: Vec<String> = rankings
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| e.family.clone().unwrap_or_else(|| "unlabelled".into())))
        .collect();
    families.sort();
    families.dedup();
    let colour = |f: &Option<String>| {
        let name = f.clone().unwrap_or_else(|| "unlabelled".into());
        let i = families.iter().position(|x| *x == name).unwrap_or(0);
        PALETTE[i % PALETTE.len()]
    };

    let spread = |e: &oodspec::analysis::RankEntry| e.sd_rho.unwrap_or(0.0);
    let lo = rankings
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| e.mean_rho - spread(e)))
        .fold(0.0f64, f64::min);
    let hi = rankings
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| e.mean_rho + spread(e)))
        .fold(1.2f64, f64::max);

    let (left, panel_w, gap, top, row_h) = (150.0, 240.0, 170.0, 50.0, 16.0);
    let n_rows = rankings.iter().map(|r| r.entries.len()).max().unwrap_or(0).max(1);
    let width = left + (panel_w + gap) * rankings.len().max(1) as f64;
    let height = top + row_h * n_rows as f64 + 70.0;
    let bottom = top + row_h * n_rows as f64;

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, r#"<text x="10" y="20" font-size="13">Alignment ratio by regime (1 = human level)</text>"#);
    for (p, r) in rankings.iter().enumerate() {
        let x0 = left + (panel_w + gap) * p as f64;
        let x = |v: f64| x0 + (v - lo) / (hi - lo) * panel_w;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#, x0 + panel_w / 2.0, top - 12.0, escape(&r.regime));
        let _ = writeln!(
            out,
            r##"<line x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{bottom}" stroke="#999" stroke-dasharray="4 3"/>"##,
            x(1.0)
        );
        for (i, e) in r.entries.iter().enumerate() {
            let y = top + row_h * (i as f64 + 0.5);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" dominant-baseline="middle" font-size="10">{}</text>"#,
                x0 - 6.0,
                escape(&e.model_id)
            );
            let c = colour(&e.family);
            if let Some(sd) = e.sd_rho {
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}"/>"#,
                    x(e.mean_rho - sd),
                    x(e.mean_rho + sd)
                );
            }
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{y:.2}" r="4" fill="{c}"/>"#, x(e.mean_rho));
        }
        let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{bottom}" x2="{:.2}" y2="{bottom}" stroke="black"/>"#, x0 + panel_w);
        for t in ticks(lo, hi) {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                x(t),
                bottom + 14.0,
                label(t)
            );
        }
    }
    for (i, f) in families.iter().enumerate() {
        let lx = left + 120.0 * i as f64;
        let ly = bottom + 44.0;
        let _ = writeln!(
            out,
            r#"<circle cx="{lx:.2}" cy="{ly:.2}" r="5" fill="{}"/><text x="{:.2}" y="{ly:.2}" dominant-baseline="middle">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            lx + 9.0,
            escape(f)
        );
    }
    out.push_str("</svg>\n");
    out
}
