use std::fmt::Write as _;

use super::experiment::ExperimentReport;
use super::heatmap::HeatmapReport;
use super::stats::IterationTable;

/// Success-rate table: one row per point and policy.
pub fn experiment_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(
        "v1,v2,policy,runs,success_rate,ideal,close,fail,converged,max_iterations,aborted,mean_iterations,sd_iterations\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.0,
            r.point.1,
            r.policy,
            r.runs,
            r.success_rate,
            r.grades.ideal,
            r.grades.close,
            r.grades.fail,
            r.outcomes.converged,
            r.outcomes.max_iterations,
            r.outcomes.aborted,
            r.iterations.mean,
            r.iterations.sd
        );
    }
    out
}

/// Mean (s.d.) iterations per point and policy, followed by pooled rows
/// whose point columns read `pooled`.
pub fn iteration_csv(table: &IterationTable) -> String {
    let mut out = String::from("v1,v2,policy,runs,mean,sd\n");
    for r in &table.rows {
        let s = r.iterations;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.point.0, r.point.1, r.policy, s.n, s.mean, s.sd
        );
    }
    for p in &table.pooled {
        let _ = writeln!(
            out,
            "pooled,pooled,{},{},{},{}",
            p.policy, p.runs, p.mean, p.pooled_sd
        );
    }
    out
}

/// Long-format heatmap: one row per start.
pub fn heatmap_csv(map: &HeatmapReport) -> String {
    let mut out = String::from("v1,v2,success,iterations\n");
    for (j, &v2) in map.v2_starts.iter().enumerate() {
        for (i, &v1) in map.v1_starts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{v1},{v2},{},{}",
                map.success[j][i], map.iterations[j][i]
            );
        }
    }
    out
}

/// Plain-text overview of a set of neighborhood reports.
pub fn summary_text(reports: &[ExperimentReport], table: &IterationTable) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "({:>5.1}, {:>5.1}) {:<9} P = {:.3}  iterations {:.1} ({:.1})",
            r.point.0, r.point.1, r.policy, r.success_rate, r.iterations.mean, r.iterations.sd
        );
    }
    for p in &table.pooled {
        let _ = writeln!(
            out,
            "pooled {:<9} runs {:>4}  iterations {:.1} ({:.1})",
            p.policy, p.runs, p.mean, p.pooled_sd
        );
    }
    out
}
