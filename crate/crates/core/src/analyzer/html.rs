//! Single-file HTML rendering with inline SVG charts. Output depends only
//! on the report, so equal reports render to identical bytes.

use std::fmt::Write;

use super::{AnalysisReport, AuditLabel, Comparison, ConfusionTable};

const TOP_ROWS: usize = 10;
const TOP_TARGETS: usize = 3;

const STYLE: &str = r#"
body { font-family: -apple-system, "Segoe UI", Roboto, sans-serif; margin: 0; background: #f4f5f7; color: #222; }
main { max-width: 1100px; margin: 0 auto; padding: 24px 32px; background: #fff; }
h1 { border-bottom: 3px solid #3b6ea5; padding-bottom: 8px; }
h2 { margin-top: 36px; border-bottom: 1px solid #ddd; padding-bottom: 6px; color: #333; }
h3 { margin-bottom: 4px; color: #444; }
table { border-collapse: collapse; margin: 12px 0; }
th, td { border: 1px solid #ddd; padding: 4px 10px; text-align: right; }
th:first-child, td:first-child { text-align: left; }
th { background: #eef2f7; }
code { font-size: 0.95em; }
ul.targets { margin: 2px 0 10px 0; }
.meta { color: #666; font-size: 0.9em; }
.empty { color: #777; font-style: italic; }
.charts { display: flex; flex-wrap: wrap; gap: 24px; }
figure { margin: 0; }
figcaption { font-size: 0.9em; color: #555; text-align: center; }
.pos { color: #1d7a35; } .neg { color: #b3261e; }
"#;

const SERIES_COLOURS: [&str; 4] = ["#3b6ea5", "#e0913a", "#5aa469", "#b05aa4"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn signed(x: f64, digits: usize) -> String {
    let class = if x > 0.0 {
        "pos"
    } else if x < 0.0 {
        "neg"
    } else {
        ""
    };
    format!("<span class=\"{class}\">{x:+.digits$}</span>")
}

/// Grouped vertical bar chart over values in [0, 1].
fn bar_chart(title: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let (w, h) = (520.0, 260.0);
    let (left, right, top, bottom) = (44.0, 12.0, 16.0, 52.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<figure><svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" role="img" aria-label="{}">"#,
        esc(title)
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = top + plot_h * (1.0 - v);
        let _ = write!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e3e3e3"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{:.2}</text>"##,
            w - right,
            left - 4.0,
            y + 3.0,
            v
        );
    }
    let groups = categories.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = (group_w * 0.8) / series.len().max(1) as f64;
    for (gi, category) in categories.iter().enumerate() {
        let gx = left + group_w * gi as f64 + group_w * 0.1;
        for (si, (name, values)) in series.iter().enumerate() {
            let v = values.get(gi).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            let bh = plot_h * v;
            let x = gx + bar_w * si as f64;
            let _ = write!(
                svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="{}"><title>{} {}: {}</title></rect>"#,
                top + plot_h - bh,
                bar_w * 0.92,
                SERIES_COLOURS[si % SERIES_COLOURS.len()],
                esc(category),
                esc(name),
                pct(v)
            );
        }
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            top + plot_h + 14.0,
            esc(category)
        );
    }
    for (si, (name, _)) in series.iter().enumerate() {
        let x = left + 110.0 * si as f64;
        let y = h - 14.0;
        let _ = write!(
            svg,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}" font-size="11">{}</text>"#,
            y - 9.0,
            SERIES_COLOURS[si % SERIES_COLOURS.len()],
            x + 14.0,
            esc(name)
        );
    }
    let _ = write!(svg, "</svg><figcaption>{}</figcaption></figure>", esc(title));
    svg
}

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<main>\n{body}</main>\n</body>\n</html>\n",
        esc(title)
    )
}

fn confusion_section(out: &mut String, table: &ConfusionTable, empty: &str) {
    let rows = table.most_confusing();
    if rows.is_empty() {
        let _ = writeln!(out, "<p class=\"empty\">{empty}</p>");
        return;
    }
    let _ = writeln!(
        out,
        "<p class=\"meta\">{} of {} acts misread ({}).</p>",
        table.errors(),
        table.occurrences(),
        pct(table.error_share())
    );
    for (act, row) in rows.into_iter().take(TOP_ROWS) {
        let _ = writeln!(out, "<div><code>{}</code>: {} times", esc(act), row.occurrences);
        let _ = writeln!(out, "<ul class=\"targets\">");
        for (target, share) in row.shares().into_iter().take(TOP_TARGETS) {
            let _ = writeln!(out, "<li>{}: <code>{}</code></li>", pct(share), esc(&target));
        }
        let _ = writeln!(out, "</ul></div>");
    }
}

fn ranked_list(out: &mut String, rows: &[(&String, u64, f64)], denominator: &str) {
    if rows.is_empty() {
        let _ = writeln!(out, "<p class=\"empty\">none observed</p>");
        return;
    }
    let _ = writeln!(out, "<ul>");
    for (pattern, count, share) in rows.iter().take(TOP_ROWS) {
        let _ = writeln!(
            out,
            "<li>{}: <code>{}</code> ({count} {denominator})</li>",
            pct(*share),
            esc(pattern)
        );
    }
    let _ = writeln!(out, "</ul>");
}

/// Renders the full report as a self-contained HTML page.
pub fn render_report(report: &AnalysisReport) -> String {
    let mut body = String::new();
    let _ = writeln!(body, "<h1>Dialogue analysis report</h1>");
    let _ = writeln!(
        body,
        "<p class=\"meta\">{} dialogues; goals digest <code>{}</code></p>",
        report.episode_count,
        &report.corpus.goals_digest[..report.corpus.goals_digest.len().min(16)]
    );

    let o = &report.overall;
    let _ = writeln!(body, "<section id=\"overall\">\n<h2>Overall results</h2>");
    let _ = writeln!(
        body,
        "<p>Success rate: {}; inform F1: {}; average turns: {:.2}</p>",
        pct(o.success_rate),
        pct(o.inform_f1),
        o.avg_turns
    );
    let _ = writeln!(
        body,
        "<p class=\"meta\">Outcomes: {} success, {} reached the turn limit, {} other failures.</p>",
        report.outcomes.success, report.outcomes.failure_max_turns, report.outcomes.failure_other
    );
    let _ = writeln!(
        body,
        "<table>\n<tr><th>Domain</th><th>Dialogues</th><th>Success rate</th><th>Inform F1</th><th>Avg turns</th><th>Loop proportion</th></tr>"
    );
    for (d, m) in &report.per_domain {
        let _ = writeln!(
            body,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{:.2}</td><td>{}</td></tr>",
            esc(d),
            m.dialogues,
            pct(m.success_rate),
            pct(m.inform_f1),
            m.avg_turns,
            pct(m.loop_proportion)
        );
    }
    let _ = writeln!(body, "</table>");
    let domains: Vec<String> = report.per_domain.keys().cloned().collect();
    let success: Vec<f64> = report.per_domain.values().map(|m| m.success_rate).collect();
    let f1: Vec<f64> = report.per_domain.values().map(|m| m.inform_f1).collect();
    let loops: Vec<f64> = report.per_domain.values().map(|m| m.loop_proportion).collect();
    let _ = writeln!(body, "<div class=\"charts\">");
    body.push_str(&bar_chart(
        "Success rate and inform F1 for each domain",
        &domains,
        &[("Success rate", success), ("Inform F1", f1)],
    ));
    body.push_str(&bar_chart(
        "Proportion of dialogue loops in each domain",
        &domains,
        &[("Loop proportion", loops)],
    ));
    let _ = writeln!(body, "\n</div>\n</section>");

    let _ = writeln!(
        body,
        "<section id=\"user-acts\">\n<h2>Most confusing user dialogue acts</h2>"
    );
    confusion_section(&mut body, &report.nlu_confusion, "no user dialogue acts were misread");
    let _ = writeln!(body, "</section>");

    let audit = &report.system_act_audit;
    let _ = writeln!(
        body,
        "<section id=\"system-audit\">\n<h2>Invalid, redundant and missing system dialogue acts</h2>"
    );
    let _ = writeln!(body, "<h3>Invalid system dialogue acts</h3>");
    ranked_list(&mut body, &audit.ranked(AuditLabel::Invalid), "informs");
    let _ = writeln!(body, "<h3>Redundant system dialogue acts</h3>");
    ranked_list(&mut body, &audit.ranked(AuditLabel::Redundant), "informs");
    let _ = writeln!(body, "<h3>Missing system dialogue acts</h3>");
    ranked_list(&mut body, &audit.ranked_missing(), "dialogues");
    let _ = writeln!(body, "</section>");

    let _ = writeln!(
        body,
        "<section id=\"system-acts\">\n<h2>Most confusing system dialogue acts</h2>"
    );
    confusion_section(&mut body, &report.nlg_confusion, "no system dialogue acts were misread");
    let _ = writeln!(body, "</section>");

    let table = &report.loop_causes;
    let _ = writeln!(body, "<section id=\"loops\">\n<h2>User dialogue acts that cause loop</h2>");
    if table.looped == 0 {
        let _ = writeln!(body, "<p class=\"empty\">no dialogue loops observed</p>");
    } else {
        let _ = writeln!(
            body,
            "<p class=\"meta\">{} looped dialogues (window of {} user turns).</p>\n<ul>",
            table.looped, table.window
        );
        for (act, share) in table.shares().into_iter().take(TOP_ROWS) {
            let _ = writeln!(body, "<li>{} <code>{}</code></li>", pct(share), esc(&act));
        }
        let _ = writeln!(body, "</ul>");
    }
    if table.other > 0 {
        let _ = writeln!(
            body,
            "<p class=\"meta\">{} dialogues reached the turn limit without a repeated request.</p>",
            table.other
        );
    }
    let _ = writeln!(body, "</section>");
    page("Dialogue analysis report", &body)
}

/// Renders a comparison of systems as a self-contained HTML page.
pub fn render_comparison(cmp: &Comparison) -> String {
    let mut body = String::new();
    let _ = writeln!(body, "<h1>System comparison</h1>");
    let _ = writeln!(
        body,
        "<p class=\"meta\">{} dialogues per system; baseline <code>{}</code>; goals digest <code>{}</code></p>",
        cmp.episode_count,
        esc(&cmp.baseline),
        &cmp.corpus.goals_digest[..cmp.corpus.goals_digest.len().min(16)]
    );
    let _ = writeln!(body, "<section id=\"overall\">\n<h2>Overall results</h2>");
    let _ = writeln!(
        body,
        "<table>\n<tr><th>System</th><th>Success rate</th><th>Inform F1</th><th>Avg turns</th><th>NLU misread</th><th>Invalid</th><th>Redundant</th><th>Missing</th><th>Loops</th></tr>"
    );
    for s in &cmp.systems {
        let _ = writeln!(
            body,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{:.2}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            esc(&s.label),
            pct(s.overall.success_rate),
            pct(s.overall.inform_f1),
            s.overall.avg_turns,
            pct(s.nlu_error_share),
            s.invalid,
            s.redundant,
            s.missing,
            s.looped
        );
    }
    let _ = writeln!(body, "</table>");
    let domains: Vec<String> = cmp
        .systems
        .first()
        .map(|s| s.per_domain.keys().cloned().collect())
        .unwrap_or_default();
    let series: Vec<(&str, Vec<f64>)> = cmp
        .systems
        .iter()
        .map(|s| {
            let values = domains
                .iter()
                .map(|d| s.per_domain.get(d).map(|m| m.success_rate).unwrap_or(0.0))
                .collect();
            (s.label.as_str(), values)
        })
        .collect();
    body.push_str(&bar_chart("Success rate for each domain", &domains, &series));
    let _ = writeln!(body, "\n</section>");

    let _ = writeln!(body, "<section id=\"deltas\">\n<h2>Differences from the baseline</h2>");
    for delta in &cmp.deltas {
        let _ = writeln!(body, "<h3>{}</h3>", esc(&delta.label));
        let _ = writeln!(
            body,
            "<table>\n<tr><th>Scope</th><th>Success rate</th><th>Inform F1</th><th>Avg turns</th></tr>"
        );
        let _ = writeln!(
            body,
            "<tr><td>overall</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            signed(delta.overall.success_rate, 3),
            signed(delta.overall.inform_f1, 3),
            signed(delta.overall.avg_turns, 2)
        );
        for (d, m) in &delta.per_domain {
            let _ = writeln!(
                body,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                esc(d),
                signed(m.success_rate, 3),
                signed(m.inform_f1, 3),
                signed(m.avg_turns, 2)
            );
        }
        let _ = writeln!(body, "</table>");
    }
    let _ = writeln!(body, "</section>");
    page("System comparison", &body)
}
