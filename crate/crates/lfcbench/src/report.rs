//! Metrics recomputed from a step log, independent of the running process.

use lfcbench_core::model::{ANGLE_LIMIT, FREQUENCY_LIMIT};
use lfcbench_core::mpc::MpcConfig;

use crate::output::{LogTable, OutputError, Summary};

/// Relative tolerance of the bookkeeping checks.
pub const COST_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LogReport {
    pub steps: usize,
    /// Sum of the logged `stage_cost` column.
    pub resummed_cost: f64,
    /// Last logged `cumulative_cost`.
    pub logged_cumulative: f64,
    /// Largest gap between a logged stage cost and the one recomputed from
    /// the logged states and inputs, relative to the stage cost.
    pub stage_cost_mismatch: f64,
    pub max_abs_frequency: f64,
    pub max_abs_angle: f64,
    /// Steps with some `|Δf|` above the band, per area.
    pub outside_steps: Vec<(String, usize)>,
    pub violations: usize,
    pub softened_steps: usize,
}

fn need(table: &LogTable, name: &str) -> Result<Vec<f64>, OutputError> {
    table.column(name).ok_or_else(|| OutputError::Corrupt {
        path: "log".into(),
        message: format!("column `{name}` is missing or not numeric"),
    })
}

/// Reads everything back from the log; `weights` defaults to the standard
/// stage-cost weights.
pub fn analyze(table: &LogTable, weights: Option<&MpcConfig>) -> Result<LogReport, OutputError> {
    let cfg = weights.copied().unwrap_or_default();
    let stage = need(table, "stage_cost")?;
    let cumulative = need(table, "cumulative_cost")?;
    let violations = need(table, "violations")?;
    let softened = need(table, "softened")?;
    let groups = |p: &str| table.group(p);
    let (dd, df, e) = (groups("ddelta"), groups("df"), groups("e"));
    let (ud, uc, ug) = (groups("udisp"), groups("uc"), groups("ud"));
    if df.is_empty()
        || [dd.len(), e.len(), ud.len(), uc.len(), ug.len()]
            .iter()
            .any(|&l| l != df.len())
    {
        return Err(OutputError::Corrupt {
            path: "log".into(),
            message: "per-area columns are incomplete".into(),
        });
    }

    let n = df.len();
    let mut mismatch: f64 = 0.0;
    for (k, &logged) in stage.iter().enumerate() {
        let mut c = 0.0;
        for i in 0..n {
            c += cfg.r[0] * dd[i].1[k] * dd[i].1[k]
                + cfg.r[1] * df[i].1[k] * df[i].1[k]
                + cfg.r[2] * e[i].1[k] * e[i].1[k];
        }
        for i in 0..n {
            c += cfg.q[0] * ud[i].1[k] * ud[i].1[k]
                + cfg.q[1] * uc[i].1[k] * uc[i].1[k]
                + cfg.q[2] * ug[i].1[k] * ug[i].1[k];
        }
        let scale = logged.abs().max(f64::MIN_POSITIVE);
        mismatch = mismatch.max((c - logged).abs() / scale);
    }

    let fold_max = |g: &[(String, Vec<f64>)]| g.iter().flat_map(|(_, v)| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(LogReport {
        steps: table.len(),
        resummed_cost: stage.iter().sum(),
        logged_cumulative: cumulative.last().copied().unwrap_or(0.0),
        stage_cost_mismatch: if stage.is_empty() { 0.0 } else { mismatch },
        max_abs_frequency: fold_max(&df),
        max_abs_angle: fold_max(&dd),
        outside_steps: df
            .iter()
            .map(|(code, v)| (code.clone(), v.iter().filter(|f| !(f.abs() <= FREQUENCY_LIMIT)).count()))
            .collect(),
        violations: violations.iter().sum::<f64>() as usize,
        softened_steps: softened.iter().filter(|&&s| s > 0.0).count(),
    })
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl LogReport {
    /// Bookkeeping problems, empty when the log is consistent with itself
    /// and with `summary`.
    pub fn problems(&self, summary: Option<&Summary>) -> Vec<String> {
        let mut out = Vec::new();
        if rel_gap(self.resummed_cost, self.logged_cumulative) > COST_RTOL {
            out.push(format!(
                "stage costs sum to {:e} but the last cumulative cost is {:e}",
                self.resummed_cost, self.logged_cumulative
            ));
        }
        if self.stage_cost_mismatch > COST_RTOL {
            out.push(format!(
                "logged stage costs differ from the logged states and inputs by up to {:e} (relative)",
                self.stage_cost_mismatch
            ));
        }
        if let Some(s) = summary {
            match s.get_f64("cumulative_cost") {
                Some(c) if rel_gap(c, self.resummed_cost) > COST_RTOL => out.push(format!(
                    "summary cumulative cost {c:e} differs from the re-summed {:e}",
                    self.resummed_cost
                )),
                Some(_) => {}
                None => out.push("summary has no cumulative_cost".into()),
            }
            if s.get("steps").and_then(|v| v.parse::<usize>().ok()) != Some(self.steps) {
                out.push(format!(
                    "summary step count differs from the {} logged rows",
                    self.steps
                ));
            }
        }
        out
    }

    pub fn to_text(&self, tau: Option<f64>) -> String {
        let mut t = String::new();
        t.push_str(&format!("steps                 {}\n", self.steps));
        t.push_str(&format!("cumulative cost       {:.9e}\n", self.resummed_cost));
        t.push_str(&format!(
            "max |df| [Hz]         {:.6e} (band {FREQUENCY_LIMIT})\n",
            self.max_abs_frequency
        ));
        t.push_str(&format!(
            "max |ddelta| [deg]    {:.6e} (limit {ANGLE_LIMIT})\n",
            self.max_abs_angle
        ));
        t.push_str(&format!("violations            {}\n", self.violations));
        t.push_str(&format!("softened steps        {}\n", self.softened_steps));
        let outside: usize = self.outside_steps.iter().map(|(_, s)| s).sum();
        match tau {
            Some(tau) => t.push_str(&format!("time outside band [s] {}\n", outside as f64 * tau)),
            None => t.push_str(&format!("steps outside band    {outside}\n")),
        }
        for (code, s) in self.outside_steps.iter().filter(|(_, s)| *s > 0) {
            t.push_str(&format!("  {code}: {s} steps\n"));
        }
        t
    }
}
