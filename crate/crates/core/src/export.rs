//! CSV tables and SVG plots for reports.

use std::fmt::Write as _;

use crate::gridworld::{Action, CellKind, Color, GridMap, Pos, Trajectory};
use crate::verdict::{by_color, VerdictReport, World};

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 records")
}

fn count_cell(n: u32) -> String {
    if n == 0 {
        "-".to_string()
    } else {
        n.to_string()
    }
}

/// Context-hit table: one row per `in_front,last_action` context, zeros as `-`.
pub fn context_hits_csv(report: &VerdictReport) -> String {
    let header = ["in_front,last_action", "up", "down", "left", "right"]
        .map(String::from)
        .to_vec();
    let rows = report.context_hits.iter().map(|h| {
        vec![
            h.context.clone(),
            count_cell(h.up),
            count_cell(h.down),
            count_cell(h.left),
            count_cell(h.right),
        ]
    });
    csv_string(std::iter::once(header).chain(rows))
}

/// Goal-posterior trace with columns `t, red, green, blue, magenta`.
pub fn goal_trace_csv(report: &VerdictReport) -> String {
    let header = ["t", "red", "green", "blue", "magenta"].map(String::from).to_vec();
    let rows = report.goal_trace.iter().enumerate().map(|(t, probs)| {
        let spread = by_color(&report.goal_colors, probs);
        std::iter::once(t.to_string())
            .chain(spread.iter().map(|p| p.to_string()))
            .collect()
    });
    csv_string(std::iter::once(header).chain(rows))
}

/// State values of every open cell for each goal.
pub fn value_table_csv(world: &World) -> String {
    let map = world.map();
    let header = ["row", "col", "red", "green", "blue", "magenta"].map(String::from).to_vec();
    let rows = map.open_cells().map(|p| {
        let values: Vec<f64> = world.plans().plans().iter().map(|plan| plan.value(map, p)).collect();
        let spread = by_color(&world.colors(), &values);
        [p.row.to_string(), p.col.to_string()]
            .into_iter()
            .chain(spread.iter().map(|v| v.to_string()))
            .collect()
    });
    csv_string(std::iter::once(header).chain(rows))
}

const CELL: f64 = 24.0;

fn color_hex(c: Color) -> &'static str {
    match c {
        Color::Red => "#d62728",
        Color::Green => "#2ca02c",
        Color::Blue => "#1f77b4",
        Color::Magenta => "#e377c2",
    }
}

fn centre(p: Pos) -> (f64, f64) {
    ((p.col as f64 + 0.5) * CELL, (p.row as f64 + 0.5) * CELL)
}

fn triangle(p: Pos, facing: Action) -> String {
    let (cx, cy) = centre(p);
    let r = CELL * 0.38;
    let (tip, left, right) = match facing {
        Action::Up => ((cx, cy - r), (cx - r, cy + r), (cx + r, cy + r)),
        Action::Down => ((cx, cy + r), (cx + r, cy - r), (cx - r, cy - r)),
        Action::Left => ((cx - r, cy), (cx + r, cy + r), (cx + r, cy - r)),
        Action::Right => ((cx + r, cy), (cx - r, cy - r), (cx - r, cy + r)),
    };
    format!(
        r##"<polygon points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="#ffd700" stroke="#333"/>"##,
        tip.0, tip.1, left.0, left.1, right.0, right.1
    )
}

/// Grid with the trajectory drawn as a polyline and the system as a triangle.
pub fn trajectory_svg(map: &GridMap, traj: &Trajectory) -> String {
    let width = map.cols() as f64 * CELL;
    let height = map.rows() as f64 * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for row in 0..map.rows() {
        for col in 0..map.cols() {
            let p = Pos::new(row, col);
            let (x, y) = (col as f64 * CELL, row as f64 * CELL);
            let fill = if map.cell(p) == CellKind::Wall { "#444" } else { "#fafafa" };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#ddd"/>"##
            );
            if let Some(c) = map.cell(p).balloon() {
                let (cx, cy) = centre(p);
                let _ = writeln!(
                    s,
                    r#"<circle cx="{cx}" cy="{cy}" r="{:.1}" fill="{}"/>"#,
                    CELL * 0.35,
                    color_hex(c)
                );
            }
        }
    }
    let points: Vec<String> = traj
        .positions
        .iter()
        .map(|&p| {
            let (x, y) = centre(p);
            format!("{x:.1},{y:.1}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#ff8c00" stroke-width="3" stroke-opacity="0.7"/>"##,
        points.join(" ")
    );
    let facing = traj.actions.last().copied().unwrap_or(Action::Up);
    let _ = writeln!(s, "{}", triangle(traj.end(), facing));
    s.push_str("</svg>\n");
    s
}

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 200.0;
const MARGIN: f64 = 32.0;

fn plot_x(t: usize, steps: usize) -> f64 {
    MARGIN + PLOT_W * t as f64 / steps.max(1) as f64
}

fn plot_y(p: f64) -> f64 {
    MARGIN + PLOT_H * (1.0 - p)
}

fn plot_frame(s: &mut String, title: &str, steps: usize) {
    let w = PLOT_W + 2.0 * MARGIN;
    let h = PLOT_H + 2.0 * MARGIN;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="13">{title}</text>"#,
        MARGIN - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">t = {steps}</text>"#,
        MARGIN + PLOT_W,
        MARGIN + PLOT_H + 16.0
    );
}

/// `P(agent)` against time, with the ½ line.
pub fn posterior_svg(report: &VerdictReport) -> String {
    let mut s = String::new();
    let steps = report.steps;
    plot_frame(&mut s, "P(agent | h_1:t)", steps);
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#bbb" stroke-dasharray="4 4"/>"##,
        MARGIN + PLOT_W,
        y = plot_y(0.5)
    );
    let points: Vec<String> = report
        .posterior_trace
        .iter()
        .enumerate()
        .map(|(t, &p)| format!("{:.1},{:.1}", plot_x(t, steps), plot_y(p)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#9467bd" stroke-width="2"/>"##,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

/// Stacked strip chart of the goal posteriors over time.
pub fn goal_strip_svg(report: &VerdictReport) -> String {
    let mut s = String::new();
    let steps = report.steps;
    plot_frame(&mut s, "goal posteriors", steps);
    let band = PLOT_W / (steps + 1) as f64;
    for (t, probs) in report.goal_trace.iter().enumerate() {
        let x = MARGIN + band * t as f64;
        let mut top = MARGIN;
        for (&color, &p) in report.goal_colors.iter().zip(probs) {
            let h = PLOT_H * p;
            if h > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{top:.2}" width="{band:.2}" height="{h:.2}" fill="{}"/>"#,
                    color_hex(color)
                );
            }
            top += h;
        }
    }
    s.push_str("</svg>\n");
    s
}
