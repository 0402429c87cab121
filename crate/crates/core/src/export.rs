//! CSV artifacts. Every file starts with a `#` comment line naming the tool
//! version, the configuration hash and the seed.

use std::io::{self, Write};

use crate::certify::{DriftReport, KappaReport};
use crate::chain::Trajectory;
use crate::density::{Target, TargetDensity};
use crate::drift::{GridRow, GridSpec};
use crate::flow::{FluidPath, SweepReport};
use crate::scaling::ScalingReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
        }
    }

    pub fn header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# fluidchain {VERSION} config_hash={} seed={seed}", self.config_hash)
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn table<W: Write>(mut out: W, prov: &Provenance, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    writeln!(out, "{}", prov.header())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

/// `step,x1,x2,accepted`; `accepted` refers to the move into the row's state.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> io::Result<()> {
    let prov = Provenance::new(traj.config_hash.clone(), Some(traj.seed));
    let rows = traj.states.iter().enumerate().map(|(k, s)| {
        let acc = if k == 0 { String::new() } else { bit(traj.accepted[k - 1]).into() };
        vec![k.to_string(), num(s[0]), num(s[1]), acc]
    });
    table(out, &prov, &["step", "x1", "x2", "accepted"], rows)
}

/// `x1,x2,d1,d2,se1,se2,dinf1,dinf2,h1,h2,in_cone`, empty cells for missing values.
pub fn write_field_grid<W: Write>(out: W, prov: &Provenance, rows: &[GridRow]) -> io::Result<()> {
    let body = rows.iter().map(|r| {
        let pair = |v: Option<nalgebra::Vector2<f64>>| match v {
            Some(v) => [num(v[0]), num(v[1])],
            None => [String::new(), String::new()],
        };
        let [d1, d2] = pair(r.delta_hat.map(|e| e.value));
        let [s1, s2] = pair(r.delta_hat.map(|e| e.stderr));
        let [i1, i2] = pair(r.delta_inf);
        let [h1, h2] = pair(r.h);
        vec![num(r.x[0]), num(r.x[1]), d1, d2, s1, s2, i1, i2, h1, h2, bit(r.in_cone).into()]
    });
    table(
        out,
        prov,
        &["x1", "x2", "d1", "d2", "se1", "se2", "dinf1", "dinf2", "h1", "h2", "in_cone"],
        body,
    )
}

/// `t,mu1,mu2,absorbed,branch`; branch is `+`, `-` or `·`.
pub fn write_flows<W: Write>(out: W, prov: &Provenance, paths: &[FluidPath]) -> io::Result<()> {
    let body = paths.iter().flat_map(|p| {
        let tag = p.branch.map_or('·', |b| b.symbol()).to_string();
        p.times.iter().zip(&p.points).map(move |(t, m)| {
            let absorbed = p.absorbed_at.is_some_and(|a| *t >= a);
            vec![num(*t), num(m[0]), num(m[1]), bit(absorbed).into(), tag.clone()]
        })
    });
    table(out, prov, &["t", "mu1", "mu2", "absorbed", "branch"], body)
}

/// `angle,branch,hit_time,absorbed_at`.
pub fn write_sweep<W: Write>(out: W, prov: &Provenance, report: &SweepReport) -> io::Result<()> {
    let body = report.rows.iter().map(|r| {
        vec![
            num(r.angle),
            r.branch.map_or('·', |b| b.symbol()).to_string(),
            opt(r.hit_time),
            opt(r.absorbed_at),
        ]
    });
    table(out, prov, &["angle", "branch", "hit_time", "absorbed_at"], body)
}

/// `r,replica,sup_dist,hit_rho,sigma_steps,branch`.
pub fn write_scaling<W: Write>(out: W, report: &ScalingReport) -> io::Result<()> {
    let prov = Provenance::new(report.config_hash.clone(), Some(report.config.base_seed));
    let body = report.rows.iter().map(|r| {
        vec![
            num(r.r),
            r.replica.to_string(),
            num(r.sup_dist),
            bit(r.hit_rho).into(),
            opt(r.sigma_steps),
            r.branch.map_or('·', |b| b.symbol()).to_string(),
        ]
    });
    table(out, &prov, &["r", "replica", "sup_dist", "hit_rho", "sigma_steps", "branch"], body)
}

/// `|x|,ratio_p,stderr,p_sigma_gt,mean_path_moment,censored_count,dir1,dir2`.
pub fn write_drift<W: Write>(out: W, report: &DriftReport) -> io::Result<()> {
    let prov = Provenance::new(report.config_hash.clone(), Some(report.config.base_seed));
    let body = report.rows.iter().map(|r| {
        vec![
            num(r.x_norm),
            num(r.ratio_p.value),
            num(r.ratio_p.stderr),
            num(r.p_sigma_gt.value),
            num(r.mean_path_moment.value),
            r.censored_count.to_string(),
            num(r.direction[0]),
            num(r.direction[1]),
        ]
    });
    table(
        out,
        &prov,
        &["|x|", "ratio_p", "stderr", "p_sigma_gt", "mean_path_moment", "censored_count", "dir1", "dir2"],
        body,
    )
}

/// `|x|,kappa1,kappa2,kappa3,kappa,censored1,censored2,censored3,censored`.
pub fn write_kappa<W: Write>(out: W, report: &KappaReport) -> io::Result<()> {
    let prov = Provenance::new(report.config_hash.clone(), Some(report.config.base_seed));
    let body = report.rows.iter().map(|r| {
        vec![
            num(r.x_norm),
            num(r.kappa1.value),
            num(r.kappa2.value),
            num(r.kappa3.value),
            num(r.kappa.value),
            r.censored1.to_string(),
            r.censored2.to_string(),
            r.censored3.to_string(),
            r.censored.to_string(),
        ]
    });
    table(
        out,
        &prov,
        &["|x|", "kappa1", "kappa2", "kappa3", "kappa", "censored1", "censored2", "censored3", "censored"],
        body,
    )
}

/// `x1,x2,log_density`; empty where the log density is not finite.
pub fn write_contour<W: Write>(out: W, prov: &Provenance, density: &TargetDensity, grid: &GridSpec) -> io::Result<()> {
    let body = grid.points().into_iter().map(|x| {
        let lp = density.log_density(&x).ok().filter(|v| v.is_finite());
        vec![num(x[0]), num(x[1]), opt(lp)]
    });
    table(out, prov, &["x1", "x2", "log_density"], body)
}
