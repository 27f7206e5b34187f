//! Report text: an aligned human-readable table followed by a `[csv]`
//! section. The table rounds losses to 10 significant digits; the CSV keeps
//! the shortest representation that parses back to the same `f64`.

use std::fmt::Write;

use ncs_sched::analysis::{Branch, Loss, LossReport, PlantLoss};
use ncs_sched::search::SearchResult;
use ncs_sched::Schedule;

pub const CSV_MARKER: &str = "[csv]";

/// `v` rounded to `digits` significant digits.
pub fn sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..=9).contains(&exp) {
        return format!("{:.*e}", digits - 1, v);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit (9.99.. -> 10.0..)
    if s.trim_start_matches('-').split('.').next().map_or(0, str::len) > (exp + 1).max(1) as usize
        && decimals > 0
    {
        format!("{v:.*}", decimals - 1)
    } else {
        s
    }
}

pub fn loss_sig(l: Loss) -> String {
    match l {
        Loss::Finite(v) => sig(v, 10),
        Loss::Divergent => "DIVERGENT".to_string(),
    }
}

fn bits(row: &[bool]) -> String {
    row.iter()
        .map(|&b| if b { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join(" ")
}

fn csv_section(text: &str) -> Result<Vec<Vec<String>>, String> {
    let start = text
        .lines()
        .position(|l| l.trim() == CSV_MARKER)
        .ok_or_else(|| "report has no [csv] section".to_string())?;
    let mut lines = text.lines().skip(start + 1).filter(|l| !l.trim().is_empty());
    let _header = lines.next().ok_or("empty [csv] section")?;
    Ok(lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn parse_loss(s: &str) -> Result<Loss, String> {
    s.parse::<Loss>().map_err(|e| format!("bad loss {s:?}: {e}"))
}

/// Loss report for one schedule.
pub fn loss_report(
    sched: &Schedule,
    channels: usize,
    report: &LossReport,
) -> String {
    let mut out = String::new();
    let period = sched.period();
    writeln!(out, "# evaluate").unwrap();
    writeln!(out, "plants: {}", sched.num_rows()).unwrap();
    writeln!(out, "channels: {channels}").unwrap();
    writeln!(out, "period: {period}").unwrap();
    writeln!(out).unwrap();

    let slots: String = (0..period).map(|m| format!("{m:>2}")).collect::<Vec<_>>().join("");
    let slot_w = slots.len().max(5);
    writeln!(
        out,
        "plant | {:<slot_w$} | {:<18} | J_ave",
        format!("m={}", slots.trim_start()),
        "branch"
    )
    .unwrap();
    for (i, pl) in report.per_plant.iter().enumerate() {
        let row: String = sched.row(i).iter().map(|&b| if b { " 1" } else { " 0" }).collect();
        writeln!(
            out,
            "{:>5} | {:<slot_w$} | {:<18} | {}",
            i + 1,
            format!("  {}", row.trim_start()),
            pl.branch.as_str(),
            loss_sig(pl.loss)
        )
        .unwrap();
    }
    writeln!(out, "total J_ave: {}", loss_sig(report.total)).unwrap();
    if report.total.is_divergent() {
        writeln!(out, "warning: an unstable plant is never scheduled; the average loss diverges").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "{CSV_MARKER}").unwrap();
    writeln!(out, "plant,branch,sigma,loss").unwrap();
    for (i, pl) in report.per_plant.iter().enumerate() {
        writeln!(out, "{},{},{},{}", i + 1, pl.branch.as_str(), bits(sched.row(i)), pl.loss).unwrap();
    }
    writeln!(out, "total,,,{}", report.total).unwrap();
    out
}

/// Reads the `[csv]` section of a [`loss_report`] back.
pub fn parse_loss_report(text: &str) -> Result<LossReport, String> {
    let mut per_plant = Vec::new();
    let mut total = None;
    for rec in csv_section(text)? {
        if rec.len() != 4 {
            return Err(format!("expected 4 fields, got {rec:?}"));
        }
        if rec[0] == "total" {
            total = Some(parse_loss(&rec[3])?);
        } else {
            per_plant.push(PlantLoss {
                branch: rec[1].parse::<Branch>()?,
                loss: parse_loss(&rec[3])?,
            });
        }
    }
    Ok(LossReport {
        per_plant,
        total: total.ok_or("missing total row")?,
    })
}

/// Table of best schedules per period; the first minimizing period is
/// flagged with `*`.
pub fn search_table(title: &str, results: &[SearchResult], flag: Option<usize>) -> String {
    let mut out = String::new();
    writeln!(out, "# {title}").unwrap();
    let width = results
        .iter()
        .map(|r| 2 * r.period - 1)
        .max()
        .unwrap_or(1)
        .max(5);
    writeln!(out, "period | plant | {:<width$} | total J_ave", "sigma").unwrap();
    for (k, r) in results.iter().enumerate() {
        let sched = &r.best_schedule;
        for i in 0..sched.num_rows() {
            let (p, total) = if i == 0 {
                let mark = if Some(k) == flag { " *" } else { "" };
                (format!("{:>6}", r.period), format!("{}{mark}", loss_sig(r.best_loss)))
            } else {
                (" ".repeat(6), String::new())
            };
            writeln!(out, "{p} | {:>5} | {:<width$} | {total}", i + 1, bits(sched.row(i)))
                .unwrap();
        }
    }
    if let Some(k) = flag {
        writeln!(
            out,
            "minimum: period {}, total J_ave {}",
            results[k].period,
            loss_sig(results[k].best_loss)
        )
        .unwrap();
    }
    let evals: u64 = results.iter().map(|r| r.evaluations).sum();
    writeln!(out, "evaluations: {evals}").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{CSV_MARKER}").unwrap();
    writeln!(out, "period,plant,sigma,total_loss,is_min").unwrap();
    for (k, r) in results.iter().enumerate() {
        for i in 0..r.best_schedule.num_rows() {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.period,
                i + 1,
                bits(r.best_schedule.row(i)),
                r.best_loss,
                u8::from(Some(k) == flag)
            )
            .unwrap();
        }
    }
    out
}

/// One row per period from a [`search_table`]: `(period, schedule, loss, is_min)`.
pub fn parse_search_table(text: &str) -> Result<Vec<(usize, Schedule, Loss, bool)>, String> {
    let mut out: Vec<(usize, Vec<Vec<u8>>, Loss, bool)> = Vec::new();
    for rec in csv_section(text)? {
        if rec.len() != 5 {
            return Err(format!("expected 5 fields, got {rec:?}"));
        }
        let period: usize = rec[0].parse().map_err(|e| format!("bad period: {e}"))?;
        let row: Vec<u8> = rec[2]
            .split(' ')
            .map(|b| b.parse::<u8>().map_err(|e| format!("bad bit: {e}")))
            .collect::<Result<_, _>>()?;
        let loss = parse_loss(&rec[3])?;
        let is_min = rec[4] == "1";
        match out.last_mut() {
            Some(last) if last.0 == period && rec[1] != "1" => last.1.push(row),
            _ => out.push((period, vec![row], loss, is_min)),
        }
    }
    out.into_iter()
        .map(|(p, rows, l, m)| {
            Schedule::from_bits(&rows)
                .map(|s| (p, s, l, m))
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// One plant's line in a simulation report.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLine {
    pub simulated: f64,
    pub stderr: f64,
    pub analytic: Loss,
}

impl SimLine {
    pub fn rel_gap(&self) -> Option<f64> {
        self.analytic
            .value()
            .filter(|a| *a != 0.0)
            .map(|a| (self.simulated - a) / a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub per_plant: Vec<SimLine>,
    pub total_simulated: f64,
    pub total_analytic: Loss,
}

pub fn sim_report(header: &[(&str, String)], rep: &SimReport) -> String {
    let mut out = String::new();
    writeln!(out, "# simulate").unwrap();
    for (k, v) in header {
        writeln!(out, "{k}: {v}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(
        out,
        "plant | {:>16} | {:>16} | {:>16} | rel_gap",
        "simulated", "stderr", "analytic"
    )
    .unwrap();
    let gap = |g: Option<f64>| g.map_or("NA".to_string(), |g| format!("{:+.3}%", 100.0 * g));
    for (i, l) in rep.per_plant.iter().enumerate() {
        writeln!(
            out,
            "{:>5} | {:>16} | {:>16} | {:>16} | {}",
            i + 1,
            sig(l.simulated, 10),
            sig(l.stderr, 10),
            loss_sig(l.analytic),
            gap(l.rel_gap())
        )
        .unwrap();
    }
    let total_gap = rep
        .total_analytic
        .value()
        .filter(|a| *a != 0.0)
        .map(|a| (rep.total_simulated - a) / a);
    writeln!(
        out,
        "{:>5} | {:>16} | {:>16} | {:>16} | {}",
        "total",
        sig(rep.total_simulated, 10),
        "",
        loss_sig(rep.total_analytic),
        gap(total_gap)
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{CSV_MARKER}").unwrap();
    writeln!(out, "plant,simulated,stderr,analytic,rel_gap").unwrap();
    let gap_csv = |g: Option<f64>| g.map_or("NA".to_string(), |g| g.to_string());
    for (i, l) in rep.per_plant.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            l.simulated,
            l.stderr,
            l.analytic,
            gap_csv(l.rel_gap())
        )
        .unwrap();
    }
    writeln!(
        out,
        "total,{},,{},{}",
        rep.total_simulated,
        rep.total_analytic,
        gap_csv(total_gap)
    )
    .unwrap();
    out
}

pub fn parse_sim_report(text: &str) -> Result<SimReport, String> {
    let mut per_plant = Vec::new();
    let mut total = None;
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"));
    for rec in csv_section(text)? {
        if rec.len() != 5 {
            return Err(format!("expected 5 fields, got {rec:?}"));
        }
        if rec[0] == "total" {
            total = Some((num(&rec[1])?, parse_loss(&rec[3])?));
        } else {
            per_plant.push(SimLine {
                simulated: num(&rec[1])?,
                stderr: num(&rec[2])?,
                analytic: parse_loss(&rec[3])?,
            });
        }
    }
    let (total_simulated, total_analytic) = total.ok_or("missing total row")?;
    Ok(SimReport {
        per_plant,
        total_simulated,
        total_analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(380.49441234567, 10), "380.4944123");
        assert_eq!(sig(4108.4376, 10), "4108.437600");
        assert_eq!(sig(0.001234567891234, 10), "0.001234567891");
        assert_eq!(sig(1.5e-7, 10), "1.500000000e-7");
        assert_eq!(sig(9.9999999999, 10), "10.00000000");
        assert_eq!(sig(0.0, 10), "0");
    }
}
