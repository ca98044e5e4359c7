use std::fmt::Write as _;

use netident::identifiability::{u_column_label, IdentifiabilityReport, RowReport, Witness};
use netident::model::ModelSetStructure;
use netident::RMat;
use serde_json::{json, Value};

pub const REPORT_FORMAT: &str = "netident-report/1";

/// Settings echoed into the report so a run can be repeated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunInfo {
    pub seed: u64,
    pub trials: usize,
    pub rank_tol: f64,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn rmat_text(m: &RMat) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)].to_string()).collect())
        .collect()
}

fn row_json(r: &RowReport) -> Value {
    json!({
        "row": r.row + 1,
        "alpha": r.alpha,
        "beta": r.beta,
        "count_ok": r.count_ok,
        "rank": r.rank,
        "required": r.required,
        "structural_rank": r.structural_rank,
        "sigma_ratio": r.sigma_ratio,
        "verdict": r.verdict.as_str(),
    })
}

fn witness_json(w: &Witness) -> Value {
    json!({
        "row": w.row + 1,
        "reason": w.reason,
        "rank": w.rank,
        "required": w.required,
        "sigma_ratio": w.sigma_ratio,
        "ti": w.ti.as_ref().map(rmat_text),
        "alternative": w.alternative.as_ref().map(|a| json!({
            "G": rmat_text(&a.model.g),
            "R": rmat_text(&a.model.r),
            "H": rmat_text(&a.model.h),
            "valid": a.validation.is_valid(),
            "violations": a.validation.violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
        })),
    })
}

pub fn report_json(s: &ModelSetStructure, rep: &IdentifiabilityReport, info: RunInfo) -> Value {
    let route = &rep.route;
    let matching = rep.theorem1.assignment.as_ref().map(|a| {
        a.iter()
            .enumerate()
            .map(|(i, &c)| json!({"node": format!("w{}", i + 1), "column": u_column_label(s, c)}))
            .collect::<Vec<_>>()
    });
    json!({
        "format": REPORT_FORMAT,
        "tool": format!("netident {}", env!("CARGO_PKG_VERSION")),
        "mode": if rep.at_model { "at-model" } else { "generic" },
        "seed": info.seed,
        "trials": info.trials,
        "rank_tol": info.rank_tol,
        "route": {
            "route": route.route.map(|r| r.as_str()),
            "strictly_proper": route.strictly_proper,
            "feedthrough_order": route.loop_check.as_ref().ok().map(|o| one_based(o)),
            "algebraic_loop": route.loop_check.as_ref().err().map(|c| one_based(c)),
            "diagonal_noise_feedthrough": route.diagonal_noise_feedthrough,
            "feedthrough_rows": route.feedthrough_rows.as_ref().map(|rows| rows.iter().map(|f| json!({
                "row": f.row + 1,
                "alpha": f.alpha,
                "beta": f.beta,
                "count_ok": f.count_ok,
                "rank": f.rank,
                "required": f.required,
                "ok": f.ok,
            })).collect::<Vec<_>>()),
        },
        "theorem1": {
            "verdict": if rep.theorem1.passed { "PASS" } else { "FAIL" },
            "matching": matching,
            "reason": rep.theorem1.reason,
        },
        "theorem2": rep.theorem2.iter().map(row_json).collect::<Vec<_>>(),
        "overall": rep.overall.to_string(),
        "witnesses": rep.witnesses.iter().map(witness_json).collect::<Vec<_>>(),
        "notes": rep.notes,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn report_text(s: &ModelSetStructure, rep: &IdentifiabilityReport, info: RunInfo) -> String {
    let mut out = String::new();
    let mode = if rep.at_model { "at model" } else { "generic" };
    let _ = writeln!(
        out,
        "netident {} ({mode}, seed {}, {} trials)",
        env!("CARGO_PKG_VERSION"),
        info.seed,
        info.trials
    );
    let _ = writeln!(
        out,
        "nodes L = {}, excitations K = {}, noise rank p = {}",
        s.l(),
        s.k(),
        s.p()
    );

    let route = &rep.route;
    match route.route {
        Some(r) => {
            let _ = writeln!(out, "route: {r}");
        }
        None => {
            let _ = writeln!(out, "route: none");
        }
    }
    match &route.loop_check {
        Ok(order) => {
            let names: Vec<String> = order.iter().map(|i| format!("w{}", i + 1)).collect();
            let _ = writeln!(out, "  feedthrough order: {}", names.join(" "));
        }
        Err(cycle) => {
            let names: Vec<String> = cycle.iter().map(|i| format!("w{}", i + 1)).collect();
            let _ = writeln!(out, "  algebraic loop through {}", names.join(" "));
        }
    }
    if let Some(rows) = &route.feedthrough_rows {
        for f in rows {
            let _ = writeln!(
                out,
                "  feedthrough row {}: alpha {} beta {} rank {}/{} {}",
                f.row + 1,
                f.alpha,
                f.beta,
                f.rank,
                f.required,
                if f.ok { "ok" } else { "fails" }
            );
        }
    }

    let t1 = &rep.theorem1;
    let _ = writeln!(
        out,
        "diagonalization test: {}",
        if t1.passed { "PASS" } else { "FAIL" }
    );
    if let Some(a) = &t1.assignment {
        let pairs: Vec<String> = a
            .iter()
            .enumerate()
            .map(|(i, &c)| format!("w{}<-{}", i + 1, u_column_label(s, c)))
            .collect();
        let _ = writeln!(out, "  matching: {}", pairs.join(", "));
    }
    if let Some(reason) = &t1.reason {
        let _ = writeln!(out, "  {reason}");
    }

    let _ = writeln!(out, "row rank tests:");
    let _ = writeln!(
        out,
        "  row alpha beta count rank required structural sigma_ratio verdict"
    );
    for r in &rep.theorem2 {
        let _ = writeln!(
            out,
            "  {:>3} {:>5} {:>4} {:>5} {:>4} {:>8} {:>10} {:>11} {}",
            r.row + 1,
            r.alpha,
            r.beta,
            if r.count_ok { "ok" } else { "fails" },
            opt(r.rank),
            r.required,
            r.structural_rank,
            r.sigma_ratio
                .map_or_else(|| "-".to_string(), |x| format!("{x:.3e}")),
            r.verdict.as_str()
        );
    }
    for w in &rep.witnesses {
        let _ = writeln!(out, "witness for row {}: {}", w.row + 1, w.reason);
        if let Some(ti) = &w.ti {
            for row in rmat_text(ti) {
                let _ = writeln!(out, "  [{}]", row.join(", "));
            }
        }
        if let Some(alt) = &w.alternative {
            let _ = writeln!(
                out,
                "  alternative model with the same T: {}",
                if alt.validation.is_valid() {
                    "valid"
                } else {
                    "violates model assumptions"
                }
            );
            for i in 0..alt.model.l() {
                for j in 0..alt.model.l() {
                    if !alt.model.g[(i, j)].is_zero() {
                        let _ =
                            writeln!(out, "    G[{}][{}] = {}", i + 1, j + 1, alt.model.g[(i, j)]);
                    }
                }
            }
        }
    }
    for n in &rep.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(out, "overall: {}", rep.overall);
    out
}
