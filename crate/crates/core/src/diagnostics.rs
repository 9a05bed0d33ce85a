//! Checks of the theory's claims against run records: optimism rates,
//! good-event frequencies, the elliptical potential bound and regret slopes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{IterationRow, RunRecord};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::stats::{ols, phi_minus_one, quantile};

pub const POTENTIAL_TOL: f64 = 1e-6;
pub const REGRET_FLOOR: f64 = 1e-6;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const OPTIMISM_SLACK: f64 = 0.03;

/// Rows of one run plus its V* estimate.
#[derive(Clone, Debug)]
pub struct RunData {
    pub rows: Vec<IterationRow>,
    pub v_star: f64,
    pub v_star_se: f64,
}

impl From<&RunRecord> for RunData {
    fn from(r: &RunRecord) -> Self {
        Self {
            rows: r.rows.clone(),
            v_star: r.v_star,
            v_star_se: r.v_star_se,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimismRates {
    pub rate: f64,
    pub rate_given_wgood: f64,
    pub n: usize,
    pub n_wgood: usize,
    pub n_optimistic_given_wgood: usize,
}

fn optimistic(row: &IterationRow, v_star: f64, v_star_se: f64) -> bool {
    let se = row.value_se.unwrap_or(0.0);
    row.value_est >= v_star - 2.0 * (v_star_se * v_star_se + se * se).sqrt()
}

/// Fraction of iterations whose planned value under the perturbed rewards
/// and fitted model reaches V* (within two pooled standard errors), overall
/// and restricted to iterations where the W-good event held.
pub fn optimism_rate(rows: &[IterationRow], v_star: f64, v_star_se: f64) -> Result<OptimismRates> {
    if rows.is_empty() {
        return Err(Error::Schema("no rows".into()));
    }
    let mut n_opt = 0;
    let mut n_wgood = 0;
    let mut n_opt_wgood = 0;
    for row in rows {
        let opt = optimistic(row, v_star, v_star_se);
        n_opt += opt as usize;
        if row.wgood_flag {
            n_wgood += 1;
            n_opt_wgood += opt as usize;
        }
    }
    Ok(OptimismRates {
        rate: n_opt as f64 / rows.len() as f64,
        rate_given_wgood: if n_wgood == 0 { f64::NAN } else { n_opt_wgood as f64 / n_wgood as f64 },
        n: rows.len(),
        n_wgood,
        n_optimistic_given_wgood: n_opt_wgood,
    })
}

/// Pooled conditional optimism rate over several runs.
pub fn pooled_optimism_given_wgood(runs: &[RunData]) -> Result<f64> {
    let (mut hits, mut total) = (0, 0);
    for run in runs {
        let r = optimism_rate(&run.rows, run.v_star, run.v_star_se)?;
        hits += r.n_optimistic_given_wgood;
        total += r.n_wgood;
    }
    if total == 0 {
        return Err(Error::Schema("no iteration satisfied the W-good event".into()));
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodEventRates {
    pub wgood: f64,
    /// None when the run drew no KNR reward noise.
    pub xigood: Option<f64>,
}

/// Frequencies of ‖W* − W^k‖²_Λ ≤ β_k and ‖ξ_h‖²_Λ ≤ β_{k,ξ} for rows with k ≥ k_min.
pub fn good_event_frequency_from(rows: &[IterationRow], k_min: usize) -> GoodEventRates {
    let kept: Vec<_> = rows.iter().filter(|r| r.k >= k_min).collect();
    let n = kept.len().max(1) as f64;
    let wgood = kept.iter().filter(|r| r.wgood_flag).count() as f64 / n;
    let xi: Vec<bool> = kept.iter().filter_map(|r| r.xigood_flag).collect();
    let xigood = (!xi.is_empty()).then(|| xi.iter().filter(|&&x| x).count() as f64 / xi.len() as f64);
    GoodEventRates { wgood, xigood }
}

pub fn good_event_frequency(rows: &[IterationRow]) -> GoodEventRates {
    good_event_frequency_from(rows, 0)
}

/// 2(log det Λ_{K+1} − log det Λ_1) − Σ_k Σ_h ‖φ‖²_{Λ_k⁻¹}. Rows must be in
/// order of k. Without a `logdet_next` column the last episode is dropped.
pub fn potential_margin(rows: &[IterationRow]) -> Result<f64> {
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok(0.0),
    };
    let (rhs_end, lhs_rows) = match last.logdet_next {
        Some(ld) => (ld, rows),
        None => (last.logdet, &rows[..rows.len() - 1]),
    };
    let lhs: f64 = lhs_rows.iter().map(|r| r.pot_sum).sum();
    Ok(2.0 * (rhs_end - first.logdet) - lhs)
}

/// The potential margin, or an invariant violation if it is below −1e-6.
pub fn potential_check(rows: &[IterationRow]) -> Result<f64> {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| r.k);
    let margin = potential_margin(&sorted)?;
    if !(margin >= -POTENTIAL_TOL) {
        return Err(Error::Invariant(format!("elliptical potential margin {margin:.3e}")));
    }
    Ok(margin)
}

/// Least-squares slope of log y against log k for k in [lo, hi] (1-based),
/// with y floored at 1e-6. Returns (slope, number of floored points).
pub fn loglog_slope(values: &[f64], lo: usize, hi: usize) -> (f64, usize) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut floored = 0;
    for k in lo.max(1)..=hi.min(values.len()) {
        let y = values[k - 1];
        if y < REGRET_FLOOR {
            floored += 1;
        }
        xs.push((k as f64).ln());
        ys.push(y.max(REGRET_FLOOR).ln());
    }
    (ols(&xs, &ys).0, floored)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub per_seed: Vec<f64>,
    /// Points floored before taking logs; nonzero flags a degenerate curve.
    pub n_floored: usize,
}

fn mean_curve(curves: &[&[f64]]) -> Vec<f64> {
    let n = curves.len() as f64;
    (0..curves[0].len())
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / n)
        .collect()
}

/// Log-log slope of the seed-averaged cumulative regret over k ∈ [K/4, K],
/// with a 95% bootstrap interval from resampling seeds.
pub fn regret_slope(curves: &[Vec<f64>]) -> Result<SlopeFit> {
    regret_slope_window(curves, 0.25)
}

pub fn regret_slope_window(curves: &[Vec<f64>], lo_frac: f64) -> Result<SlopeFit> {
    if curves.len() < 5 {
        return Err(Error::Config(format!("regret slope needs at least 5 seeds, got {}", curves.len())));
    }
    let k = curves[0].len();
    if k < 500 || curves.iter().any(|c| c.len() != k) {
        return Err(Error::Config("regret slope needs K >= 500 iterations on every seed".into()));
    }
    let lo = ((k as f64 * lo_frac).ceil() as usize).max(1);
    let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
    let (slope, n_floored) = loglog_slope(&mean_curve(&refs), lo, k);
    let per_seed = refs.iter().map(|c| loglog_slope(c, lo, k).0).collect();

    let mut rng = stream(0, Stream::Custom(0xb007));
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let sample: Vec<&[f64]> = (0..refs.len()).map(|_| refs[rng.random_range(0..refs.len())]).collect();
            loglog_slope(&mean_curve(&sample), lo, k).0
        })
        .collect();
    Ok(SlopeFit {
        slope,
        ci_low: quantile(&boot, 0.025),
        ci_high: quantile(&boot, 0.975),
        per_seed,
        n_floored,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub name: String,
    pub passed: bool,
    /// Hard claims are deterministic guarantees; their failure is an error.
    pub hard: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_runs: usize,
    pub optimism_rate: f64,
    pub optimism_rate_given_wgood: f64,
    pub wgood_frequency: f64,
    pub xigood_frequency: Option<f64>,
    /// Smallest margin over all runs.
    pub potential_bound_margin: f64,
    pub regret_slope: Option<SlopeFit>,
    pub claims: Vec<ClaimCheck>,
}

impl DiagnosticsReport {
    pub fn hard_failure(&self) -> bool {
        self.claims.iter().any(|c| c.hard && !c.passed)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "runs                       {}\noptimism rate              {:.4}\noptimism rate | W-good     {:.4}\nW-good frequency           {:.4}\n",
            self.n_runs, self.optimism_rate, self.optimism_rate_given_wgood, self.wgood_frequency
        );
        if let Some(x) = self.xigood_frequency {
            out += &format!("xi-good frequency          {x:.4}\n");
        }
        out += &format!("min potential margin       {:.6}\n", self.potential_bound_margin);
        if let Some(s) = &self.regret_slope {
            out += &format!("regret slope               {:.3} [{:.3}, {:.3}]\n", s.slope, s.ci_low, s.ci_high);
        }
        for c in &self.claims {
            out += &format!(
                "{} {}{}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                if c.hard { " (hard)" } else { "" },
                c.detail
            );
        }
        out
    }
}

/// Diagnostics over runs of one agent and world (typically several seeds).
pub fn report(runs: &[RunData]) -> Result<DiagnosticsReport> {
    if runs.is_empty() {
        return Err(Error::Schema("no runs to diagnose".into()));
    }
    let mut claims = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut worst = String::new();
    for (i, run) in runs.iter().enumerate() {
        let mut sorted = run.rows.clone();
        sorted.sort_by_key(|r| r.k);
        let m = potential_margin(&sorted)?;
        if m < min_margin {
            min_margin = m;
            worst = format!("run {i}");
        }
    }
    claims.push(ClaimCheck {
        name: "elliptical potential".into(),
        passed: min_margin >= -POTENTIAL_TOL,
        hard: true,
        detail: format!("min margin {min_margin:.3e} ({worst})"),
    });

    let all_rows: Vec<IterationRow> = runs.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let mut n_opt = 0.0;
    for run in runs {
        n_opt += optimism_rate(&run.rows, run.v_star, run.v_star_se)?.rate * run.rows.len() as f64;
    }
    let optimism = n_opt / all_rows.len().max(1) as f64;
    let given_wgood = pooled_optimism_given_wgood(runs).unwrap_or(f64::NAN);
    let threshold = phi_minus_one() - OPTIMISM_SLACK;
    claims.push(ClaimCheck {
        name: "partial optimism".into(),
        passed: given_wgood >= threshold,
        hard: false,
        detail: format!("conditional rate {given_wgood:.4} vs {threshold:.4}"),
    });
    let events = good_event_frequency(&all_rows);

    let curves: Vec<Vec<f64>> = runs.iter().map(|r| r.rows.iter().map(|x| x.cum_regret).collect()).collect();
    let regret_slope = regret_slope(&curves).ok();

    Ok(DiagnosticsReport {
        n_runs: runs.len(),
        optimism_rate: optimism,
        optimism_rate_given_wgood: given_wgood,
        wgood_frequency: events.wgood,
        xigood_frequency: events.xigood,
        potential_bound_margin: min_margin,
        regret_slope,
        claims,
    })
}

/// Per-run summary written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub v_star: f64,
    pub v_star_se: f64,
    pub final_regret: f64,
    /// Single-run log-log slope over [K/4, K]; absent for K < 8.
    pub regret_slope: Option<f64>,
    pub optimism_rate: f64,
    pub optimism_rate_given_wgood: f64,
    pub wgood_rate: f64,
    pub xigood_rate: Option<f64>,
    pub potential_margin: f64,
}

pub fn summarize(record: &RunRecord) -> Result<RunSummary> {
    let rates = optimism_rate(&record.rows, record.v_star, record.v_star_se)?;
    let events = good_event_frequency(&record.rows);
    let k = record.rows.len();
    let curve: Vec<f64> = record.rows.iter().map(|r| r.cum_regret).collect();
    Ok(RunSummary {
        agent: record.agent.name().into(),
        seed: record.seed,
        k,
        v_star: record.v_star,
        v_star_se: record.v_star_se,
        final_regret: record.final_regret(),
        regret_slope: (k >= 8).then(|| loglog_slope(&curve, k.div_ceil(4), k).0),
        optimism_rate: rates.rate,
        optimism_rate_given_wgood: rates.rate_given_wgood,
        wgood_rate: events.wgood,
        xigood_rate: events.xigood,
        potential_margin: potential_margin(&record.rows)?,
    })
}
