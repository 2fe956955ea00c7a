use std::fmt::Write as _;
use std::path::PathBuf;

use super::run::{
    RunManifest, ACCURACY_TABLE, MISLABELING_TABLE, PVALUE_TABLE, ROBUSTNESS_TABLE, TESTS_TABLE,
};
use crate::error::{Error, Result};
use crate::model_io::{read_text, write_text};

pub const REPORT_FILE: &str = "report.md";

/// Published figures printed next to the measured ones for orientation.
struct Reference {
    title: &'static str,
    header: &'static [&'static str],
    rows: &'static [&'static [&'static str]],
}

const REFERENCES: [(&str, Reference); 4] = [
    (
        ACCURACY_TABLE,
        Reference {
            title: "Published test accuracy (%)",
            header: &["dataset", "features", "train", "test", "DT", "RF"],
            rows: &[
                &["wine", "13", "160", "18", "88.9", "100"],
                &["glass", "10", "192", "22", "81.8", "95.5"],
                &["seeds", "7", "189", "21", "85.7", "95.2"],
                &["banknote", "5", "1234", "138", "98.6", "99.3"],
            ],
        },
    ),
    (
        ROBUSTNESS_TABLE,
        Reference {
            title: "Published mean/std of L_bar",
            header: &["method", "wine", "glass", "seeds", "banknote"],
            rows: &[
                &["DT", "0.00/0.00", "1.89/1.78", "0.65/2.02", "1.75/3.32"],
                &["RF", "0.55/0.51", "1.75/1.87", "0.77/0.72", "1.58/1.57"],
                &["AXOM", "0.47/0.44", "1.27/0.72", "0.65/0.67", "1.28/1.34"],
            ],
        },
    ),
    (
        PVALUE_TABLE,
        Reference {
            title: "Published p-values",
            header: &["comparison", "wine", "glass", "seeds", "banknote"],
            rows: &[
                &["DT vs RF", "<0.001", "0.774", "0.008", "0.3023"],
                &["DT vs AXOM", "<0.001", "0.113", "0.008", "0.0656"],
                &["RF vs AXOM", "0.042", "0.007", "0.030", "0.0444"],
            ],
        },
    ),
    (
        MISLABELING_TABLE,
        Reference {
            title: "Published weak-mislabeling rate (%)",
            header: &["dataset", "rate"],
            rows: &[
                &["wine", "12.1"],
                &["glass", "24.9"],
                &["seeds", "14.0"],
                &["banknote", "2.5"],
            ],
        },
    ),
];

const SECTIONS: [(&str, &str); 5] = [
    (ACCURACY_TABLE, "Accuracy"),
    (ROBUSTNESS_TABLE, "Explanation robustness"),
    (PVALUE_TABLE, "Significance"),
    (TESTS_TABLE, "Significance tests in detail"),
    (MISLABELING_TABLE, "Weak mislabeling"),
];

fn markdown_row(out: &mut String, cells: &[&str]) {
    out.push('|');
    for c in cells {
        let _ = write!(out, " {} |", c.replace('|', "\\|"));
    }
    out.push('\n');
}

fn markdown_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    markdown_row(out, header);
    markdown_row(out, &vec!["---"; header.len()]);
    for r in rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        markdown_row(out, &cells);
    }
}

fn fmt_cell(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if s.contains('.') || s.contains('e') => {
            if v != 0.0 && v.abs() < 1e-3 {
                format!("{v:.2e}")
            } else {
                format!("{v:.4}")
            }
        }
        _ => s.to_string(),
    }
}

fn csv_as_markdown(text: &str, out: &mut String) -> Result<()> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| Error::Report(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Report(e.to_string()))?;
        rows.push(rec.iter().map(fmt_cell).collect());
    }
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    markdown_table(out, &h, &rows);
    Ok(())
}

/// Renders `report.md` into the run directory from the artifacts listed
/// in the manifest. The output depends only on those artifacts, so
/// re-running it yields the same file.
pub fn report(manifest: &RunManifest) -> Result<PathBuf> {
    if manifest.stages.is_empty() && manifest.tables.is_empty() {
        return Err(Error::Report(format!(
            "manifest in {} records no completed stages",
            manifest.run_dir.display()
        )));
    }
    let dir = &manifest.run_dir;
    let missing: Vec<String> = manifest
        .files()
        .into_iter()
        .filter(|f| !dir.join(f).is_file())
        .collect();

    let mut md = String::new();
    let _ = writeln!(md, "# Experiment {}\n", manifest.config_hash);
    let _ = writeln!(
        md,
        "Crate version {}, model format {}. Configuration: [`{}`]({}).\n",
        manifest.crate_version,
        manifest.model_format_version,
        manifest.config_file,
        manifest.config_file
    );
    if !manifest.complete {
        let _ = writeln!(
            md,
            "**Incomplete run.** {}\n",
            manifest
                .error
                .as_deref()
                .unwrap_or("The pipeline did not finish.")
        );
    }

    for (file, title) in SECTIONS {
        let _ = writeln!(md, "## {title}\n");
        if manifest.tables.iter().any(|t| t == file) && dir.join(file).is_file() {
            csv_as_markdown(&read_text(&dir.join(file))?, &mut md)?;
            let _ = writeln!(md, "\nSource: [`{file}`]({file})\n");
        } else {
            let _ = writeln!(md, "Not produced.\n");
        }
        if let Some((_, r)) = REFERENCES.iter().find(|(f, _)| *f == file) {
            let _ = writeln!(md, "{} (for comparison, not computed here):\n", r.title);
            let rows: Vec<Vec<String>> = r
                .rows
                .iter()
                .map(|row| row.iter().map(|c| c.to_string()).collect())
                .collect();
            markdown_table(&mut md, r.header, &rows);
            md.push('\n');
        }
    }

    if !manifest.skipped_samples.is_empty() {
        let _ = writeln!(md, "## Skipped samples\n");
        let rows: Vec<Vec<String>> = manifest
            .skipped_samples
            .iter()
            .map(|s| {
                vec![
                    s.dataset.clone(),
                    s.seed.to_string(),
                    s.method.to_string(),
                    s.skipped.to_string(),
                ]
            })
            .collect();
        markdown_table(&mut md, &["dataset", "seed", "method", "skipped"], &rows);
        md.push('\n');
    }

    let svgs: Vec<&String> = manifest
        .stages
        .iter()
        .flat_map(|s| s.artifacts.iter())
        .filter(|a| a.ends_with(".svg"))
        .collect();
    if !svgs.is_empty() {
        let _ = writeln!(md, "## Heatmaps\n");
        for s in svgs {
            let _ = writeln!(md, "- [{s}]({s})");
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Stages\n");
    let rows: Vec<Vec<String>> = manifest
        .stages
        .iter()
        .map(|s| {
            vec![
                s.dataset.clone(),
                s.seed.to_string(),
                format!("{:?}", s.stage).to_lowercase(),
                s.artifacts.len().to_string(),
            ]
        })
        .collect();
    markdown_table(&mut md, &["dataset", "seed", "stage", "artifacts"], &rows);
    md.push('\n');

    if !missing.is_empty() {
        let _ = writeln!(md, "## Missing artifacts\n");
        for m in &missing {
            let _ = writeln!(md, "- `{m}`");
        }
        md.push('\n');
    }

    let path = dir.join(REPORT_FILE);
    write_text(&path, md.trim_end())?;
    Ok(path)
}
