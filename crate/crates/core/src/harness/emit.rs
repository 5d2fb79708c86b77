use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{PolicyKind, RunConfig};
use super::record::RunRecord;
use super::runner::SweepRow;
use crate::error::{CocoError, Result};

/// Environment variable that overrides every configured output directory.
pub const OUTPUT_DIR_ENV: &str = "COCO_OUTPUT_DIR";

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        return PathBuf::from(dir);
    }
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("."))
}

/// Paths written by [`emit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub rounds_csv: PathBuf,
    pub frequencies_csv: Option<PathBuf>,
    pub summary_json: PathBuf,
    pub plot_script: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CocoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn rounds_csv(record: &RunRecord) -> String {
    let expert = matches!(
        record.summary.config.policy,
        PolicyKind::ConstrainedExpert | PolicyKind::StdHedgeBaseline
    );
    let width = record.rows.first().map_or(0, |r| r.action.len());
    let prefix = if expert { "p" } else { "x" };
    let mut out = String::from("t,cost,violation,Q,eta,G,argmax_expert");
    for i in 0..width {
        let _ = write!(out, ",{prefix}_{i}");
    }
    out.push('\n');
    for r in &record.rows {
        let _ = write!(out, "{},{},{},{},", r.t, r.cost, r.violation, r.q);
        if let Some(eta) = r.eta {
            let _ = write!(out, "{eta}");
        }
        let _ = write!(out, ",{},", r.g_scale);
        if let Some(i) = r.argmax_expert {
            let _ = write!(out, "{i}");
        }
        for v in &r.action {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn plot_script(stem: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,700\n\
         set output '{stem}.png'\n\
         set multiplot layout 2,1\n\
         set xlabel 't'\n\
         set ylabel 'cumulative violation'\n\
         plot '{stem}.csv' using 1:4 with lines title 'CCV'\n\
         set ylabel 'cumulative cost'\n\
         plot '{stem}.csv' using 1:2 smooth cumulative with lines title 'cost'\n\
         unset multiplot\n"
    )
}

/// Writes the per-round CSV, selection frequencies (expert runs), summary
/// JSON and a gnuplot script into `dir`.
pub fn emit(record: &RunRecord, dir: &Path) -> Result<Artifacts> {
    fs::create_dir_all(dir).map_err(|source| CocoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let stem = record.summary.config.file_stem();

    let rounds = dir.join(format!("{stem}.csv"));
    write_file(&rounds, &rounds_csv(record))?;

    let frequencies = match &record.frequencies {
        Some(rows) => {
            let path = dir.join(format!("{stem}_frequencies.csv"));
            let mut out = String::from("expert,expected,sampled\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{}", r.expert, r.expected, r.sampled);
            }
            write_file(&path, &out)?;
            Some(path)
        }
        None => None,
    };

    let summary = dir.join(format!("{stem}_summary.json"));
    let mut json = serde_json::to_string_pretty(&record.summary)
        .map_err(|e| CocoError::Config(e.to_string()))?;
    json.push('\n');
    write_file(&summary, &json)?;

    let plot = dir.join(format!("{stem}.gp"));
    write_file(&plot, &plot_script(&stem))?;

    Ok(Artifacts {
        rounds_csv: rounds,
        frequencies_csv: frequencies,
        summary_json: summary,
        plot_script: plot,
    })
}

/// Writes `beta,regret,ccv,all_passed` rows to `<dir>/<stem>.csv`.
pub fn emit_sweep(rows: &[SweepRow], dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CocoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = String::from("beta,regret,ccv,all_passed\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.beta, r.regret, r.ccv, r.all_passed);
    }
    let path = dir.join(format!("{stem}.csv"));
    write_file(&path, &out)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::EnvironmentKind;
    use crate::harness::record::RunSummary;
    use crate::harness::runner::run;

    fn cfg(horizon: u64) -> RunConfig {
        RunConfig::new(
            PolicyKind::ConstrainedExpert,
            EnvironmentKind::SyntheticExpert,
            horizon,
            0.75,
        )
    }

    #[test]
    fn single_round_csv_has_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let rec = run(&cfg(1)).unwrap();
        let a = emit(&rec, dir.path()).unwrap();
        let text = fs::read_to_string(&a.rounds_csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("t,cost,violation,Q,eta,G,argmax_expert,p_0,"));
        assert!(lines[0].ends_with(",p_19"));
        assert_eq!(lines[1].split(',').count(), 7 + 20);
    }

    #[test]
    fn summary_round_trips_config() {
        let dir = tempfile::tempdir().unwrap();
        let rec = run(&cfg(300)).unwrap();
        let a = emit(&rec, dir.path()).unwrap();
        let back = RunSummary::from_json(&fs::read_to_string(a.summary_json).unwrap()).unwrap();
        assert_eq!(back.config, rec.summary.config);
        assert_eq!(back, rec.summary);
        assert!(back.recheck().iter().all(|c| c.passed));
    }

    #[test]
    fn identical_runs_write_identical_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = emit(&run(&cfg(200)).unwrap(), a.path()).unwrap();
        let pb = emit(&run(&cfg(200)).unwrap(), b.path()).unwrap();
        for (x, y) in [
            (pa.rounds_csv, pb.rounds_csv),
            (pa.summary_json, pb.summary_json),
            (pa.frequencies_csv.unwrap(), pb.frequencies_csv.unwrap()),
        ] {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }
}
