use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{mean_std, welch_t_test};
use crate::models::Arch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Kcenters,
    Herding,
    VanillaLm,
    Dilm,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Random,
        Method::Kcenters,
        Method::Herding,
        Method::VanillaLm,
        Method::Dilm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Kcenters => "kcenters",
            Method::Herding => "herding",
            Method::VanillaLm => "vanilla_lm",
            Method::Dilm => "dilm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s || (s == "vanilla-lm" && *m == Method::VanillaLm))
            .ok_or_else(|| format!("unknown method `{s}` (expected one of random, kcenters, herding, vanilla_lm, dilm)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub dataset: usize,
    pub run: usize,
    pub seed: u64,
    /// `None` for a run whose training diverged.
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub arch: Arch,
    pub dpc: usize,
    pub runs: Vec<RunScore>,
    pub mean: f64,
    pub std: f64,
    pub failed: usize,
    pub baseline: Option<String>,
    pub p_value: Option<f64>,
}

impl EvalReport {
    pub fn new(method: &str, arch: Arch, dpc: usize, runs: Vec<RunScore>) -> Self {
        let scores: Vec<f64> = runs.iter().filter_map(|r| r.score).collect();
        let (mean, std) = mean_std(&scores);
        Self {
            method: method.to_string(),
            arch,
            dpc,
            failed: runs.len() - scores.len(),
            runs,
            mean,
            std,
            baseline: None,
            p_value: None,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.score).collect()
    }

    /// Records Welch's p-value against `baseline`.
    pub fn compare_to(&mut self, baseline: &EvalReport) {
        self.baseline = Some(baseline.method.clone());
        self.p_value = welch_t_test(&self.scores(), &baseline.scores());
    }

    pub fn significant(&self) -> bool {
        self.p_value.is_some_and(|p| p < 0.05)
    }

    /// Half-width of the normal-approximation 95% interval of the mean.
    pub fn ci95(&self) -> f64 {
        let n = self.scores().len().max(1) as f64;
        1.96 * self.std / n.sqrt()
    }
}

fn cell(r: &EvalReport) -> String {
    format!(
        "{:.1}±{:.1}{}",
        100.0 * r.mean,
        100.0 * r.std,
        if r.significant() { "*" } else { "" }
    )
}

/// Methods as rows, DPC values as columns, cells `mean±std` in percent
/// with `*` where the difference from the baseline has p < 0.05. A detail
/// table with run counts, failures and p-values follows.
pub fn markdown_table(title: &str, reports: &[EvalReport]) -> String {
    let dpcs: BTreeSet<usize> = reports.iter().map(|r| r.dpc).collect();
    let mut rows: Vec<(String, Arch)> = Vec::new();
    for r in reports {
        if !rows.iter().any(|(m, a)| *m == r.method && *a == r.arch) {
            rows.push((r.method.clone(), r.arch));
        }
    }
    let mut s = String::new();
    writeln!(s, "## {title}\n").unwrap();
    write!(s, "| Method | Learner |").unwrap();
    for d in &dpcs {
        write!(s, " DPC={d} |").unwrap();
    }
    writeln!(s).unwrap();
    write!(s, "|---|---|").unwrap();
    for _ in &dpcs {
        write!(s, "---|").unwrap();
    }
    writeln!(s).unwrap();
    for (m, a) in &rows {
        write!(s, "| {m} | {a} |").unwrap();
        for d in &dpcs {
            let c = reports
                .iter()
                .find(|r| &r.method == m && r.arch == *a && r.dpc == *d)
                .map_or_else(|| "-".to_string(), cell);
            write!(s, " {c} |").unwrap();
        }
        writeln!(s).unwrap();
    }
    if let Some(b) = reports.iter().find_map(|r| r.baseline.clone()) {
        writeln!(s, "\n`*`: p < 0.05 against {b} (Welch's t-test).").unwrap();
    }
    writeln!(
        s,
        "\n| Method | Learner | DPC | runs | failed | mean | std | p |"
    )
    .unwrap();
    writeln!(s, "|---|---|---|---|---|---|---|---|").unwrap();
    for r in reports {
        let p = r
            .p_value
            .map_or_else(|| "-".to_string(), |p| format!("{p:.3}"));
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.4} | {:.4} | {} |",
            r.method,
            r.arch,
            r.dpc,
            r.runs.len(),
            r.failed,
            r.mean,
            r.std,
            p
        )
        .unwrap();
    }
    s
}

#[derive(Serialize)]
struct CsvRow<'a> {
    kind: &'a str,
    method: &'a str,
    arch: String,
    dpc: usize,
    dataset: Option<usize>,
    run: Option<usize>,
    seed: Option<u64>,
    score: Option<f64>,
    mean: Option<f64>,
    std: Option<f64>,
    n: Option<usize>,
    failed: Option<usize>,
    p_value: Option<f64>,
}

/// One row per run followed by one summary row per report.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        for run in &r.runs {
            wr.serialize(CsvRow {
                kind: "run",
                method: &r.method,
                arch: r.arch.to_string(),
                dpc: r.dpc,
                dataset: Some(run.dataset),
                run: Some(run.run),
                seed: Some(run.seed),
                score: run.score,
                mean: None,
                std: None,
                n: None,
                failed: None,
                p_value: None,
            })?;
        }
    }
    for r in reports {
        wr.serialize(CsvRow {
            kind: "summary",
            method: &r.method,
            arch: r.arch.to_string(),
            dpc: r.dpc,
            dataset: None,
            run: None,
            seed: None,
            score: None,
            mean: Some(r.mean),
            std: Some(r.std),
            n: Some(r.runs.len() - r.failed),
            failed: Some(r.failed),
            p_value: r.p_value,
        })?;
    }
    wr.flush()?;
    Ok(())
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Score against DPC (log-scaled x axis), one line per method, with a
/// shaded 95% interval band.
pub fn sweep_svg(reports: &[EvalReport]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 60.0, 140.0, 20.0, 50.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let dpcs: BTreeSet<usize> = reports.iter().map(|r| r.dpc).collect();
    let (xmin, xmax) = (
        (*dpcs.first().unwrap_or(&1) as f64).ln(),
        (*dpcs.last().unwrap_or(&1) as f64).ln(),
    );
    let xspan = if xmax > xmin { xmax - xmin } else { 1.0 };
    let lo = reports
        .iter()
        .map(|r| r.mean - r.ci95())
        .fold(f64::INFINITY, f64::min);
    let hi = reports
        .iter()
        .map(|r| r.mean + r.ci95())
        .fold(f64::NEG_INFINITY, f64::max);
    let (ylo, yhi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    };
    let pad = 0.05 * (yhi - ylo).max(1e-6);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let x = |d: usize| ml + pw * ((d as f64).ln() - xmin) / xspan;
    let y = |v: f64| mt + ph * (1.0 - (v - ylo) / (yhi - ylo));

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#,
        mt + ph,
        ml + pw,
        mt + ph,
        mt + ph
    )
    .unwrap();
    for &d in &dpcs {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{d}</text>"#,
            x(d),
            mt + ph + 18.0
        )
        .unwrap();
    }
    for i in 0..=4 {
        let v = ylo + (yhi - ylo) * i as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            ml - 6.0,
            y(v) + 4.0,
            v
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">DPC</text>"#,
        ml + pw / 2.0,
        h - 10.0
    )
    .unwrap();
    let mut methods: Vec<(&str, Arch)> = Vec::new();
    for r in reports {
        if !methods.iter().any(|(m, a)| *m == r.method && *a == r.arch) {
            methods.push((&r.method, r.arch));
        }
    }
    for (k, (m, a)) in methods.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts: Vec<&EvalReport> = reports
            .iter()
            .filter(|r| r.method == *m && r.arch == *a)
            .collect();
        pts.sort_by_key(|r| r.dpc);
        let upper: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.1},{:.1}", x(r.dpc), y(r.mean + r.ci95())))
            .collect();
        let lower: Vec<String> = pts
            .iter()
            .rev()
            .map(|r| format!("{:.1},{:.1}", x(r.dpc), y(r.mean - r.ci95())))
            .collect();
        writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        )
        .unwrap();
        let line: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.1},{:.1}", x(r.dpc), y(r.mean)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        )
        .unwrap();
        let ly = mt + 16.0 * (k as f64 + 1.0);
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{m} ({a})</text>"#,
            ml + pw + 10.0,
            ml + pw + 30.0,
            ml + pw + 35.0,
            ly + 4.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(method: &str, dpc: usize, scores: &[f64]) -> EvalReport {
        let runs = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| RunScore {
                dataset: 0,
                run: i,
                seed: i as u64,
                score: if s.is_nan() { None } else { Some(s) },
            })
            .collect();
        EvalReport::new(method, Arch::A, dpc, runs)
    }

    #[test]
    fn failed_runs_counted_and_excluded() {
        let r = report("random", 5, &[0.5, f64::NAN, 0.7]);
        assert_eq!(r.failed, 1);
        assert!((r.mean - 0.6).abs() < 1e-15);
    }

    #[test]
    fn markdown_marks_significance() {
        let base = report("kcenters", 5, &[0.50, 0.51, 0.49, 0.50]);
        let mut better = report("dilm", 5, &[0.90, 0.91, 0.89, 0.90]);
        better.compare_to(&base);
        let md = markdown_table("keyword", &[base, better]);
        assert!(md.contains("| dilm | arch-a | 90.0±0.8* |"), "{md}");
        assert!(md.contains("| kcenters | arch-a | 50.0±0.8 |"));
    }

    #[test]
    fn csv_has_run_and_summary_rows() {
        let reports = vec![
            report("random", 1, &[0.5, 0.6]),
            report("random", 5, &[0.7, 0.8]),
        ];
        let mut buf = Vec::new();
        write_reports_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 + 2);
        assert_eq!(
            text.lines().filter(|l| l.starts_with("summary,")).count(),
            2
        );
        let svg = sweep_svg(&reports);
        assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.contains("<polygon"));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bert".parse::<Method>().is_err());
    }
}
