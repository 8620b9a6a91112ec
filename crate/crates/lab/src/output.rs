use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vtr_core::trace::Diagnostic;
use vtr_core::{RegretTrace, Setting};

use crate::error::{io_err, LabError, Result};
use crate::experiment::Summary;

pub const BASE_COLUMNS: [&str; 6] = [
    "setting",
    "algorithm",
    "seed",
    "k",
    "inst_regret",
    "cum_regret",
];

fn diagnostic_columns(traces: &[RegretTrace]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for t in traces {
        for d in &t.diagnostics {
            if !names.contains(&d.name) {
                names.push(d.name.clone());
            }
        }
    }
    names
}

/// Writes one row per (trace, round). Diagnostic columns are the union over
/// all traces; a trace without a column leaves it empty.
pub fn write_csv(traces: &[RegretTrace], path: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(LabError::Config("no traces to write".into()));
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let extra = diagnostic_columns(traces);
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    header.extend(extra.iter().map(String::as_str));
    w.write_record(&header)?;

    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for t in traces {
        let cols: Vec<Option<&[f64]>> = extra.iter().map(|n| t.diagnostic(n)).collect();
        for k in 0..t.len() {
            row.clear();
            row.push(t.setting.as_str().to_string());
            row.push(t.algorithm.clone());
            row.push(t.seed.to_string());
            row.push((k + 1).to_string());
            row.push(t.instantaneous[k].to_string());
            row.push(t.cumulative[k].to_string());
            for c in &cols {
                row.push(
                    c.and_then(|v| v.get(k))
                        .map(|x| x.to_string())
                        .unwrap_or_default(),
                );
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(value: &str, what: &str, line: u64) -> Result<T> {
    value
        .parse()
        .map_err(|_| LabError::Config(format!("csv line {line}: bad {what} {value:?}")))
}

/// Parses a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<RegretTrace>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS {
        return Err(LabError::Config(format!(
            "unexpected csv header {header:?}"
        )));
    }
    let extra = &header[BASE_COLUMNS.len()..];

    let mut traces: Vec<RegretTrace> = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = Vec::new();
    let finish = |t: &mut RegretTrace, cols: &mut Vec<Vec<Option<f64>>>| -> Result<()> {
        for (name, values) in extra.iter().zip(cols.drain(..)) {
            if values.iter().all(Option::is_none) {
                continue;
            }
            let full: Option<Vec<f64>> = values.into_iter().collect();
            let values =
                full.ok_or_else(|| LabError::Config(format!("column {name} is partly empty")))?;
            t.diagnostics.push(Diagnostic {
                name: name.clone(),
                values,
            });
        }
        Ok(())
    };

    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let setting = match &rec[0] {
            "bandit" => Setting::Bandit,
            "mdp" => Setting::Mdp,
            other => {
                return Err(LabError::Config(format!(
                    "csv line {line}: bad setting {other:?}"
                )))
            }
        };
        let seed: u64 = parse_field(&rec[2], "seed", line)?;
        let k: usize = parse_field(&rec[3], "k", line)?;
        let same = traces
            .last()
            .is_some_and(|t| t.algorithm == rec[1] && t.seed == seed && t.setting == setting);
        if !same {
            if let Some(t) = traces.last_mut() {
                finish(t, &mut cols)?;
            }
            traces.push(RegretTrace::new(setting, &rec[1], seed));
            cols = vec![Vec::new(); extra.len()];
        }
        let t = traces.last_mut().expect("pushed above");
        if k != t.len() + 1 {
            return Err(LabError::Config(format!(
                "csv line {line}: expected k = {}",
                t.len() + 1
            )));
        }
        t.instantaneous
            .push(parse_field(&rec[4], "inst_regret", line)?);
        t.cumulative.push(parse_field(&rec[5], "cum_regret", line)?);
        for (i, col) in cols.iter_mut().enumerate() {
            let v = &rec[BASE_COLUMNS.len() + i];
            col.push(if v.is_empty() {
                None
            } else {
                Some(parse_field(v, "diagnostic", line)?)
            });
        }
    }
    if let Some(t) = traces.last_mut() {
        finish(t, &mut cols)?;
    }
    Ok(traces)
}

/// Checkpoint table: `algorithm, seeds, k, mean_cum_regret, std_error`.
pub fn write_summary_csv(summary: &Summary, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "setting",
        "algorithm",
        "seeds",
        "k",
        "mean_cum_regret",
        "std_error",
    ])?;
    for a in &summary.algorithms {
        for &k in &summary.checkpoints {
            let i = k as usize - 1;
            if i >= a.mean.len() {
                continue;
            }
            w.write_record([
                summary.setting.as_str().to_string(),
                a.algorithm.clone(),
                a.seeds.to_string(),
                k.to_string(),
                a.mean[i].to_string(),
                a.std_error[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const MAX_POINTS: usize = 400;

/// SVG of mean cumulative regret against k per algorithm, with a ±1
/// standard-error band.
pub fn render_plot(summary: &Summary) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 170.0, 30.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let k_max = summary
        .algorithms
        .iter()
        .map(|a| a.mean.len())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_max = summary
        .algorithms
        .iter()
        .flat_map(|a| a.mean.iter().zip(&a.std_error).map(|(m, s)| m + s))
        .fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let x = |k: f64| left + pw * k / k_max;
    let y = |v: f64| top + ph * (1.0 - v / y_max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<g stroke="black" fill="none"><line x1="{left}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{b}"/></g>"#,
        b = top + ph,
        r = left + pw
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x(frac * k_max),
            top + ph + 18.0,
            (frac * k_max).round()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            left - 6.0,
            y(frac * y_max) + 4.0,
            frac * y_max
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">k</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">cumulative regret</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, a) in summary.algorithms.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let n = a.mean.len();
        if n == 0 {
            continue;
        }
        let stride = n.div_ceil(MAX_POINTS).max(1);
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        let upper: Vec<String> = idx
            .iter()
            .map(|&k| {
                format!(
                    "{:.2},{:.2}",
                    x((k + 1) as f64),
                    y(a.mean[k] + a.std_error[k])
                )
            })
            .collect();
        let lower: Vec<String> = idx
            .iter()
            .rev()
            .map(|&k| {
                format!(
                    "{:.2},{:.2}",
                    x((k + 1) as f64),
                    y((a.mean[k] - a.std_error[k]).max(0.0))
                )
            })
            .collect();
        let line: Vec<String> = idx
            .iter()
            .map(|&k| format!("{:.2},{:.2}", x((k + 1) as f64), y(a.mean[k])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = top + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 36.0,
            ly + 4.0,
            escape(&a.algorithm)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn emit_plot(summary: &Summary, path: &Path) -> Result<()> {
    fs::write(path, render_plot(summary)).map_err(io_err(path))
}
