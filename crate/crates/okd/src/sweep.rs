//! Key-rate sweeps over distortion, written as one CSV per
//! `(tau_ratio, n_b)` panel.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use okd_core::{
    from_db, optimize_hard, optimize_soft, reconcile_distortion_curve, OperatingPoint,
    OptimizationBudget, OptimizedPoint, TruncationPolicy,
};
use rayon::prelude::*;
use thiserror::Error;

pub const SWEEP_HEADER: &str = "distortion_db,decoding,nbar_e,delta_e_opt,k0,k1,i_ab,i_be,key_rate";

/// Label of the rows flagging `D = 1/nbar_E`.
pub const MARKER: &str = "marker";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Spec(&'static str),
    #[error(transparent)]
    Core(#[from] okd_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecodingKind {
    Hard,
    Soft,
}

impl DecodingKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Hard => "hard",
            Self::Soft => "soft",
        }
    }

    pub fn optimize(
        self,
        point: &OperatingPoint,
        budget: &OptimizationBudget,
        policy: &TruncationPolicy,
    ) -> okd_core::Result<OptimizedPoint> {
        match self {
            Self::Soft => optimize_soft(point, budget, policy),
            Self::Hard => optimize_hard(point, budget, policy),
        }
    }
}

impl fmt::Display for DecodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// `(min_dB, max_dB, steps)`, both ends included.
    pub distortion_db_range: (f64, f64, usize),
    pub nbar_e: Vec<f64>,
    pub tau_ratio: Vec<f64>,
    pub n_b: Vec<f64>,
    pub decodings: Vec<DecodingKind>,
}

impl SweepSpec {
    /// The standard panel grid over `[-40, 0]` dB.
    pub fn figure3(steps: usize) -> Self {
        Self {
            distortion_db_range: (-40.0, 0.0, steps),
            nbar_e: vec![10.0, 75.0, 500.0],
            tau_ratio: vec![1.0, 0.1],
            n_b: vec![0.0, 0.1, 1.0, 10.0],
            decodings: vec![DecodingKind::Soft, DecodingKind::Hard],
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let (lo, hi, steps) = self.distortion_db_range;
        if !(lo < hi && hi <= 0.0) {
            return Err(SweepError::Spec("need min_dB < max_dB <= 0"));
        }
        if steps < 2 {
            return Err(SweepError::Spec("need at least 2 distortion steps"));
        }
        if self.nbar_e.is_empty() || self.tau_ratio.is_empty() || self.n_b.is_empty() || self.decodings.is_empty() {
            return Err(SweepError::Spec("every list must be nonempty"));
        }
        Ok(())
    }

    /// The distortion grid in dB, ascending.
    pub fn db_grid(&self) -> Vec<f64> {
        let (lo, hi, steps) = self.distortion_db_range;
        let h = (hi - lo) / (steps - 1) as f64;
        (0..steps)
            .map(|i| if i == steps - 1 { hi } else { lo + h * i as f64 })
            .collect()
    }

    /// `(tau_ratio, n_b)` pairs in file order.
    pub fn panels(&self) -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        for &tau in &self.tau_ratio {
            for &nb in &self.n_b {
                v.push((tau, nb));
            }
        }
        v
    }
}

/// One optimised grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub distortion_db: f64,
    pub decoding: DecodingKind,
    pub nbar_e: f64,
    pub optimum: OptimizedPoint,
}

impl SweepRow {
    fn csv_line(&self) -> String {
        let r = &self.optimum.result;
        let (k0, k1) = match r.decoding.decoder() {
            Some(d) => (d.k0().to_string(), d.k1().to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{:?},{},{:?},{:?},{},{},{:?},{:?},{:?}",
            self.distortion_db,
            self.decoding,
            self.nbar_e,
            self.optimum.params.delta_e(),
            k0,
            k1,
            r.i_ab,
            r.i_be,
            r.key_rate
        )
    }
}

/// All rows of one `(tau_ratio, n_b)` panel, sorted by decoding, energy and
/// distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub tau_ratio: f64,
    pub n_b: f64,
    pub rows: Vec<SweepRow>,
    /// Energies whose `D = 1/nbar_E` marker rows accompany the data.
    pub markers: Vec<f64>,
}

impl Panel {
    pub fn file_name(&self, prefix: &str) -> String {
        format!("{prefix}_tau{}_nb{}.csv", self.tau_ratio, self.n_b)
    }

    /// Rows of one curve in distortion order.
    pub fn curve(&self, decoding: DecodingKind, nbar_e: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(move |r| r.decoding == decoding && r.nbar_e == nbar_e)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut lines: Vec<(&str, f64, f64, String)> = self
            .rows
            .iter()
            .map(|r| (r.decoding.name(), r.nbar_e, r.distortion_db, r.csv_line()))
            .collect();
        for &n in &self.markers {
            let db = -10.0 * n.log10();
            lines.push((MARKER, n, db, format!("{db:?},{MARKER},{n:?},,,,,,")));
        }
        lines.sort_by(|a, b| {
            a.0.cmp(b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });
        let mut w = io::BufWriter::new(out);
        writeln!(w, "{SWEEP_HEADER}")?;
        for (_, _, _, line) in lines {
            writeln!(w, "{line}")?;
        }
        w.flush()
    }
}

/// Optimises every grid point (in parallel) and reconciles each curve.
pub fn run_sweep(
    spec: &SweepSpec,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
) -> Result<Vec<Panel>, SweepError> {
    spec.validate()?;
    let dbs = spec.db_grid();
    let mut curves = Vec::new();
    for (tau, nb) in spec.panels() {
        for &decoding in &spec.decodings {
            for &n in &spec.nbar_e {
                curves.push((tau, nb, decoding, n));
            }
        }
    }
    let tasks: Vec<(usize, f64)> = (0..curves.len())
        .flat_map(|c| dbs.iter().map(move |&db| (c, db)))
        .collect();
    let points: Vec<OptimizedPoint> = tasks
        .par_iter()
        .map(|&(c, db)| {
            let (tau, nb, decoding, n) = curves[c];
            let point = OperatingPoint::new(n, from_db(db).min(1.0), tau, nb)?;
            decoding.optimize(&point, budget, policy)
        })
        .collect::<okd_core::Result<_>>()?;

    let mut by_curve: Vec<Vec<OptimizedPoint>> = points.chunks(dbs.len()).map(<[_]>::to_vec).collect();
    by_curve
        .par_iter_mut()
        .try_for_each(|curve| reconcile_distortion_curve(curve, budget, policy))?;

    let mut panels: Vec<Panel> = spec
        .panels()
        .into_iter()
        .map(|(tau_ratio, n_b)| Panel {
            tau_ratio,
            n_b,
            rows: Vec::new(),
            markers: spec.nbar_e.clone(),
        })
        .collect();
    for ((tau, nb, decoding, n), curve) in curves.into_iter().zip(by_curve) {
        let panel = panels
            .iter_mut()
            .find(|p| p.tau_ratio == tau && p.n_b == nb)
            .expect("panel exists");
        for (&db, optimum) in dbs.iter().zip(curve) {
            panel.rows.push(SweepRow {
                distortion_db: db,
                decoding,
                nbar_e: n,
                optimum,
            });
        }
    }
    for p in &mut panels {
        p.rows.sort_by(|a, b| {
            a.decoding
                .cmp(&b.decoding)
                .then(a.nbar_e.total_cmp(&b.nbar_e))
                .then(a.distortion_db.total_cmp(&b.distortion_db))
        });
        p.markers.sort_by(f64::total_cmp);
        p.markers.dedup();
    }
    Ok(panels)
}

/// Writes each panel to `dir` (created if missing) and returns the paths.
pub fn write_panels(panels: &[Panel], dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, SweepError> {
    fs::create_dir_all(dir).map_err(|source| SweepError::Write {
        path: dir.to_owned(),
        source,
    })?;
    panels
        .iter()
        .map(|p| {
            let path = dir.join(p.file_name(prefix));
            fs::File::create(&path)
                .and_then(|f| p.write_csv(f))
                .map_err(|source| SweepError::Write {
                    path: path.clone(),
                    source,
                })?;
            Ok(path)
        })
        .collect()
}
