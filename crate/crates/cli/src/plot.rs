//! gnuplot scripts that draw the emitted CSV tables.

use std::fmt::Write;

pub struct Series {
    pub file: String,
    pub x: &'static str,
    pub y: &'static str,
    pub title: String,
    pub style: &'static str,
}

impl Series {
    pub fn new(
        file: impl Into<String>,
        x: &'static str,
        y: &'static str,
        title: impl Into<String>,
        style: &'static str,
    ) -> Self {
        Self {
            file: file.into(),
            x,
            y,
            title: title.into(),
            style,
        }
    }
}

pub struct Panel {
    pub title: String,
    pub xlabel: &'static str,
    pub ylabel: &'static str,
    pub series: Vec<Series>,
}

/// One script, one PNG, panels stacked in a single row.
pub fn script(figure: &str, panels: &[Panel]) -> String {
    let mut s = String::new();
    let width = 640 * panels.len().max(1);
    let _ = writeln!(s, "set terminal pngcairo size {width},480");
    let _ = writeln!(s, "set output '{figure}.png'");
    let _ = writeln!(s, "set datafile separator comma");
    let _ = writeln!(s, "set datafile columnheaders");
    if panels.len() > 1 {
        let _ = writeln!(s, "set multiplot layout 1,{}", panels.len());
    }
    for p in panels {
        let _ = writeln!(s, "set title '{}'", p.title);
        let _ = writeln!(s, "set xlabel '{}'", p.xlabel);
        let _ = writeln!(s, "set ylabel '{}'", p.ylabel);
        let body: Vec<String> = p
            .series
            .iter()
            .map(|r| {
                format!(
                    "'{}' using \"{}\":\"{}\" with {} title '{}'",
                    r.file, r.x, r.y, r.style, r.title
                )
            })
            .collect();
        if body.is_empty() {
            continue;
        }
        let _ = writeln!(s, "plot {}", body.join(", \\\n     "));
    }
    if panels.len() > 1 {
        let _ = writeln!(s, "unset multiplot");
    }
    s
}
