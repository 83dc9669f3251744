//! Result emission: CSV tables and a self-contained SVG line plot.
//!
//! CSV is locale-independent ('.' decimal, LF endings, fixed column
//! order); every file starts with a comment line carrying the config
//! hash and seed.

use std::io::Write;
use std::path::Path;

use crate::beatspec::BeatSpectrum;
use crate::cbs::SpectrumRecord;

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.12e}")
    }
}

pub fn write_spectrum_csv(
    path: &Path,
    records: &[SpectrumRecord],
    config_hash: &str,
    seed: u64,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={config_hash} seed={seed}\n"));
    out.push_str(
        "delta_gamma,sigma_single,sigma_ladder,sigma_interf,X_EF,R2,stderr_X_EF,stderr_R2,resampled_paths\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt(r.delta),
            fmt(r.sigma_single),
            fmt(r.sigma_ladder),
            fmt(r.sigma_interf),
            fmt(r.x_ef),
            fmt(r.r2),
            fmt(r.stderr_x_ef),
            fmt(r.stderr_r2),
            r.resampled_paths
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

pub fn write_beatspec_csv(
    path: &Path,
    single: &BeatSpectrum,
    double: &BeatSpectrum,
    config_hash: &str,
    seed: u64,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={config_hash} seed={seed}\n"));
    out.push_str("omega_offset_gamma,I1,I2\n");
    for ((omega, i1), i2) in single
        .omega_grid
        .iter()
        .zip(&single.intensity)
        .zip(&double.intensity)
    {
        out.push_str(&format!("{},{},{}\n", fmt(*omega), fmt(*i1), fmt(*i2)));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

/// Self-contained SVG line plot of R2 and X_EF against detuning with
/// vertical markers at the hyperfine resonance positions.
pub fn write_spectrum_svg(
    path: &Path,
    records: &[SpectrumRecord],
    resonances: &[f64],
    config_hash: &str,
    seed: u64,
) -> std::io::Result<()> {
    const W: f64 = 860.0;
    const H: f64 = 520.0;
    const ML: f64 = 70.0; // margins
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;

    let x_min = records.first().map_or(0.0, |r| r.delta);
    let x_max = records.last().map_or(1.0, |r| r.delta);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for r in records {
        y_min = y_min.min(r.r2).min(r.x_ef);
        y_max = y_max.max(r.r2).max(r.x_ef);
    }
    if !y_min.is_finite() || !y_max.is_finite() || y_min == y_max {
        y_min = -1.0;
        y_max = 2.0;
    }
    let pad = 0.08 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let to_x = |d: f64| ML + (d - x_min) / (x_max - x_min) * (W - ML - MR);
    let to_y = |v: f64| H - MB - (v - y_min) / (y_max - y_min) * (H - MT - MB);

    let polyline = |vals: &dyn Fn(&SpectrumRecord) -> f64, color: &str| -> String {
        let pts: Vec<String> = records
            .iter()
            .map(|r| format!("{:.2},{:.2}", to_x(r.delta), to_y(vals(r))))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<!-- config_hash={config_hash} seed={seed} -->\n"
    ));
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));

    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));

    // zero and unity guide lines when in range
    for (level, dash) in [(0.0, "4,4"), (1.0, "2,6")] {
        if level > y_min && level < y_max {
            svg.push_str(&format!(
                "<line x1=\"{ML}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"#999\" stroke-dasharray=\"{dash}\"/>\n",
                to_y(level),
                W - MR
            ));
        }
    }

    // resonance markers
    for &res in resonances {
        if res >= x_min && res <= x_max {
            svg.push_str(&format!(
                "<line x1=\"{0:.2}\" y1=\"{MT}\" x2=\"{0:.2}\" y2=\"{1}\" stroke=\"#555\" stroke-dasharray=\"6,3\"/>\n",
                to_x(res),
                H - MB
            ));
        }
    }

    svg.push_str(&polyline(&|r| r.r2, "#1f77b4"));
    svg.push_str(&polyline(&|r| r.x_ef, "#d62728"));

    // x ticks
    let n_ticks = 7;
    for i in 0..=n_ticks {
        let d = x_min + (x_max - x_min) * f64::from(i) / f64::from(n_ticks);
        svg.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1}\" x2=\"{0:.2}\" y2=\"{2}\" stroke=\"black\"/>\n",
            to_x(d),
            H - MB,
            H - MB + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{d:.1}</text>\n",
            to_x(d),
            H - MB + 20.0
        ));
    }
    // y ticks
    for i in 0..=5 {
        let v = y_min + (y_max - y_min) * f64::from(i) / 5.0;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1:.2}\" x2=\"{2}\" y2=\"{1:.2}\" stroke=\"black\"/>\n",
            ML - 5.0,
            to_y(v),
            ML
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{v:.2}</text>\n",
            ML - 8.0,
            to_y(v) + 4.0
        ));
    }

    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">detuning from the reference line (γ)</text>\n",
        0.5 * (ML + W - MR),
        H - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{MT}\" font-size=\"13\" fill=\"#1f77b4\">R2 (double-scattering interference ratio)</text>\n",
        ML + 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"#d62728\">X_EF (enhancement factor)</text>\n",
        ML + 10.0,
        MT + 18.0
    ));
    svg.push_str("</svg>\n");

    let mut file = std::fs::File::create(path)?;
    file.write_all(svg.as_bytes())
}
