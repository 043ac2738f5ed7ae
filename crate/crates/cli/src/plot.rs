//! Self-contained matplotlib scripts for field files and residual studies.

use std::fmt::Write;
use std::path::Path;

use crate::error::CliError;
use crate::output::{read_table, Table};
use crate::scenario::{Study, VerifyReport};

/// Inputs gathered from disk for one script.
#[derive(Debug, Default)]
pub struct PlotInputs {
    pub fields: Vec<(String, Table)>,
    pub studies: Vec<Study>,
}

impl PlotInputs {
    /// Reads `.csv` field files and `.json` verify reports.
    pub fn load(paths: &[impl AsRef<Path>]) -> Result<Self, CliError> {
        let mut inputs = Self::default();
        for path in paths {
            let path = path.as_ref();
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => inputs.fields.push((name, read_table(path)?)),
                Some("json") => {
                    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                        path: path.to_path_buf(),
                        source,
                    })?;
                    let report: VerifyReport =
                        serde_json::from_str(&text).map_err(|e| CliError::Input {
                            path: path.to_path_buf(),
                            message: format!("not a verify report: {e}"),
                        })?;
                    inputs.studies.extend(report.studies);
                }
                _ => {
                    return Err(CliError::Input {
                        path: path.to_path_buf(),
                        message: "expected a .csv field file or a .json verify report".into(),
                    })
                }
            }
        }
        Ok(inputs)
    }
}

fn py_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "float('nan')".into()
    } else if v > 0.0 {
        "float('inf')".into()
    } else {
        "float('-inf')".into()
    }
}

fn py_list(vs: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = vs.into_iter().map(py_number).collect();
    format!("[{}]", items.join(", "))
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

/// Legend label of a study, with the least-squares slope of the log-log line.
pub fn study_label(s: &Study) -> String {
    format!("{} (slope {:.3})", s.name, s.order)
}

/// Script rendering one curve per t sample and value column of every field
/// file, plus a log-log panel for the studies.
pub fn emit_plot_script(inputs: &PlotInputs) -> String {
    let mut out = String::new();
    out += "import os\n\nimport matplotlib\n\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n";
    out += "HERE = os.path.dirname(os.path.abspath(__file__))\n\n";
    out += "FIELDS = [\n";
    for (name, table) in &inputs.fields {
        let _ = writeln!(out, "    {{\n        \"name\": {},", py_str(name));
        out += "        \"curves\": [\n";
        let mut ts: Vec<f64> = table.rows.iter().map(|r| r[1]).collect();
        ts.dedup();
        for t in ts {
            let rows: Vec<&Vec<f64>> = table.rows.iter().filter(|r| r[1] == t).collect();
            for (c, column) in table.header.iter().enumerate().skip(2) {
                let _ = writeln!(
                    out,
                    "            {{\"label\": {}, \"x\": {}, \"y\": {}}},",
                    py_str(&format!("{column}, t = {t}")),
                    py_list(rows.iter().map(|r| r[0])),
                    py_list(rows.iter().map(|r| r[c]))
                );
            }
        }
        out += "        ],\n    },\n";
    }
    out += "]\n\nSTUDIES = [\n";
    for s in &inputs.studies {
        let _ = writeln!(
            out,
            "    {{\"label\": {}, \"h\": {}, \"residual\": {}}},",
            py_str(&study_label(s)),
            py_list(s.h.iter().copied()),
            py_list(s.residual.iter().copied())
        );
    }
    out += "]\n\n";
    out += r#"for i, field in enumerate(FIELDS):
    fig, ax = plt.subplots(figsize=(8, 5))
    for curve in field["curves"]:
        ax.plot(curve["x"], curve["y"], label=curve["label"])
    ax.set_xlabel("x")
    ax.set_title(field["name"])
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "field_%d.png" % i), dpi=150)
    plt.close(fig)

if STUDIES:
    fig, ax = plt.subplots(figsize=(6, 5))
    for study in STUDIES:
        ax.loglog(study["h"], study["residual"], "o-", label=study["label"])
    ax.set_xlabel("h")
    ax.set_ylabel("residual")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "convergence.png"), dpi=150)
    plt.close(fig)
"#;
    out
}
