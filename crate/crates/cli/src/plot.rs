//! Gnuplot scripts for error-versus-ε figures.

use isolab::stats::fit_line;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    /// 1-based column of the sibling CSV holding the ordinate.
    pub column: usize,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotReport {
    pub title: String,
    /// File name of the CSV, relative to the script.
    pub csv: String,
    /// 1-based column of the abscissa.
    pub x_column: usize,
    pub xlabel: String,
    pub ylabel: String,
    pub loglog: bool,
    pub series: Vec<PlotSeries>,
}

/// Least-squares line through the logs of the positive points, as
/// `(slope, intercept)`; `None` below two points.
pub fn loglog_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    (xs.len() >= 2).then(|| fit_line(&xs, &ys))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// A self-contained script that reads the CSV next to it. Each series with
/// at least two points gets a dashed fit line and a slope label.
pub fn plot_script(r: &PlotReport) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set termoption noenhanced\n");
    s.push_str(&format!("set title {}\n", quote(&r.title)));
    s.push_str(&format!("set xlabel {}\n", quote(&r.xlabel)));
    s.push_str(&format!("set ylabel {}\n", quote(&r.ylabel)));
    if r.loglog {
        s.push_str("set logscale xy\nset format y '%.0e'\n");
    }
    s.push_str("set key outside right\n");
    let mut curves = Vec::new();
    let mut label_row = 0;
    for (k, ser) in r.series.iter().enumerate() {
        curves.push(format!(
            "{} using {}:{} skip 1 with linespoints lt {} title {}",
            quote(&r.csv),
            r.x_column,
            ser.column,
            k + 1,
            quote(&ser.name)
        ));
        if !r.loglog {
            continue;
        }
        if let Some((slope, icpt)) = loglog_fit(&ser.points) {
            s.push_str(&format!("f{k}(x) = exp({icpt:.12e}) * x**({slope:.12e})\n"));
            label_row += 1;
            s.push_str(&format!(
                "set label {label_row} {} at graph 0.02, graph {:.3} front\n",
                quote(&format!("{}: slope {slope:.3}", ser.name)),
                1.0 - 0.05 * label_row as f64
            ));
            curves.push(format!("f{k}(x) with lines dt 2 lt {} notitle", k + 1));
        }
    }
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    s
}
