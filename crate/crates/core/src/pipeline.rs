//! Stage orchestration and run artifacts.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{run_baseline_ga, run_baseline_sa, SaParams};
use crate::chromosome::format_mhz;
use crate::error::{DseError, Result};
use crate::fdss::{run_fdss, FdssResult, SegmentOutcome};
use crate::latency::{check_constraints, Evaluator};
use crate::lcso::{run_lcso, GaParams, ParetoFront, SegmentReport};
use crate::model::SystemModel;
use crate::pareto;
use crate::pathfind::{build_graph, find_etoe_paths, EtoEGraph, EtoEPathSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Lcso,
    Ga,
    Sa,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Lcso => "lcso",
            Algo::Ga => "ga",
            Algo::Sa => "sa",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub algo: Algo,
    pub ga: GaParams,
    pub sa: SaParams,
    pub n_seg: usize,
    pub seed: u64,
    pub threads: usize,
    pub idle_energy: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algo::Lcso,
            ga: GaParams::default(),
            sa: SaParams::default(),
            n_seg: 44,
            seed: 0,
            threads: 0,
            idle_energy: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimes {
    pub epf_s: f64,
    pub fdss_s: f64,
    pub search_s: f64,
    pub check_s: f64,
}

/// Model, graph and constrained paths, built once per system.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: SystemModel,
    pub graph: EtoEGraph,
    pub paths: EtoEPathSet,
    pub epf_s: f64,
}

impl Prepared {
    pub fn new(model: SystemModel) -> Result<Self> {
        let t = Instant::now();
        let graph = build_graph(&model);
        let paths = find_etoe_paths(&graph, &model.constraints)?;
        Ok(Prepared {
            model,
            graph,
            paths,
            epf_s: t.elapsed().as_secs_f64(),
        })
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(&self.model, &self.graph, &self.paths)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub front: ParetoFront,
    pub segments: Vec<SegmentReport>,
    pub times: StageTimes,
}

/// Runs the selected searcher and re-checks every front point against the
/// constraints with a fresh evaluator.
pub fn run_pipeline(prep: &Prepared, cfg: &RunConfig) -> Result<RunOutput> {
    let eval = prep.evaluator().with_idle_energy(cfg.idle_energy);
    let mut times = StageTimes {
        epf_s: prep.epf_s,
        ..StageTimes::default()
    };
    let (front, segments) = match cfg.algo {
        Algo::Lcso => {
            let t = Instant::now();
            let fdss = run_fdss(&prep.model, cfg.n_seg, cfg.threads).map_err(|e| stage("fdss", e))?;
            times.fdss_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let r = run_lcso(&eval, &fdss, &cfg.ga, cfg.seed, cfg.threads).map_err(|e| stage("lcso", e))?;
            times.search_s = t.elapsed().as_secs_f64();
            (r.front, r.segments)
        }
        Algo::Ga => {
            let t = Instant::now();
            let f = run_baseline_ga(&eval, &cfg.ga, cfg.seed).map_err(|e| stage("ga", e))?;
            times.search_s = t.elapsed().as_secs_f64();
            (f, Vec::new())
        }
        Algo::Sa => {
            let t = Instant::now();
            let f = run_baseline_sa(&eval, &cfg.sa, cfg.seed).map_err(|e| stage("sa", e))?;
            times.search_s = t.elapsed().as_secs_f64();
            (f, Vec::new())
        }
    };
    let t = Instant::now();
    for p in &front.points {
        let report = check_constraints(&p.point.chromosome, &prep.paths, &prep.graph, &prep.model);
        if let Some(v) = report.first_violation {
            return Err(DseError::Contract(format!(
                "front point {} failed the post-hoc check: {v:?}",
                p.point.chromosome.encode(&eval.grid)
            )));
        }
    }
    if !pareto::is_antichain(&front.objectives()) {
        return Err(DseError::Contract("emitted front is not an antichain".into()));
    }
    times.check_s = t.elapsed().as_secs_f64();
    Ok(RunOutput { front, segments, times })
}

fn stage(name: &str, e: DseError) -> DseError {
    match e {
        DseError::Infeasible(m) => DseError::Infeasible(format!("{name}: {m}")),
        DseError::Validation(m) => DseError::Validation(format!("{name}: {m}")),
        DseError::Contract(m) => DseError::Contract(format!("{name}: {m}")),
        other => other,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DseError {
    DseError::Parse(format!("{}: {e}", path.display()))
}

/// `run_id, segment, seed, energy, area, <one column per path>, chromosome`.
pub fn write_front_csv(path: &Path, run_id: &str, prep: &Prepared, front: &ParetoFront) -> Result<()> {
    let grid = prep.model.grid();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["run_id".to_string(), "segment".into(), "seed".into(), "energy".into(), "area".into()];
    header.extend(prep.paths.path_labels());
    header.push("chromosome".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for p in &front.points {
        let mut row = vec![
            run_id.to_string(),
            p.segment.to_string(),
            p.seed.to_string(),
            p.point.energy.to_string(),
            p.point.area.to_string(),
        ];
        row.extend(p.point.latencies.iter().map(|l| l.to_string()));
        row.push(p.point.chromosome.encode(&grid));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| DseError::io(path, e))
}

/// One row of a front CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub energy: f64,
    pub area: f64,
    pub chromosome: String,
}

pub fn read_front_csv(path: &Path) -> Result<Vec<FrontRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DseError::Parse(format!("{}: missing column '{name}'", path.display())))
    };
    let (ie, ia) = (col("energy")?, col("area")?);
    let ic = headers.iter().position(|h| h == "chromosome");
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| DseError::Parse(format!("{}: bad number: {e}", path.display())))
        };
        rows.push(FrontRow {
            energy: num(ie)?,
            area: num(ia)?,
            chromosome: ic.and_then(|i| rec.get(i)).unwrap_or("").to_string(),
        });
    }
    Ok(rows)
}

/// Per-path latency breakdown of every front point.
pub fn write_latency_csv(path: &Path, run_id: &str, prep: &Prepared, front: &ParetoFront) -> Result<()> {
    let eval = prep.evaluator();
    let labels = prep.paths.path_labels();
    let bounds = eval.path_bounds();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["run_id", "point", "path", "bound", "latency", "fsm", "mcc", "handshake"])
        .map_err(|e| csv_err(path, e))?;
    for (i, p) in front.points.iter().enumerate() {
        let parts = eval.breakdowns(&p.point.chromosome)?;
        for ((label, bound), b) in labels.iter().zip(&bounds).zip(parts) {
            w.write_record([
                run_id.to_string(),
                i.to_string(),
                label.clone(),
                bound.to_string(),
                b.total.to_string(),
                b.fsm_sum().to_string(),
                b.mcc_sum().to_string(),
                b.handshake_sum().to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| DseError::io(path, e))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    run_id: &'a str,
    system: &'a str,
    config: &'a RunConfig,
    n_paths: usize,
    path_labels: Vec<String>,
    front_size: usize,
    segments: &'a [SegmentReport],
    wall_time: &'a StageTimes,
}

/// Writes `front.csv`, `latency.csv` and `manifest.json` into `dir`.
pub fn write_run(
    dir: &Path,
    run_id: &str,
    system: &str,
    prep: &Prepared,
    cfg: &RunConfig,
    out: &RunOutput,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| DseError::io(dir, e))?;
    write_front_csv(&dir.join("front.csv"), run_id, prep, &out.front)?;
    write_latency_csv(&dir.join("latency.csv"), run_id, prep, &out.front)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        run_id,
        system,
        config: cfg,
        n_paths: prep.paths.iter_paths().count(),
        path_labels: prep.paths.path_labels(),
        front_size: out.front.len(),
        segments: &out.segments,
        wall_time: &out.times,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| DseError::Parse(e.to_string()))?;
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| DseError::io(&path, e))
}

/// Writes `segments.csv` and one pruned system file per accepted segment
/// plus `fallback.json`.
pub fn write_segments(dir: &Path, model: &SystemModel, fdss: &FdssResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| DseError::io(dir, e))?;
    let grid = &fdss.combos.grid;
    let pool_text = |pool: &[usize]| pool.iter().map(|&f| format_mhz(grid[f])).collect::<Vec<_>>().join(";");
    let path = dir.join("segments.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["segment", "status", "n_combos", "pool_mhz", "alternatives", "size", "detail"])
        .map_err(|e| csv_err(&path, e))?;
    for (i, o) in fdss.outcomes.iter().enumerate() {
        let n_combos = fdss.pools[i].combos.len().to_string();
        match o {
            SegmentOutcome::Accepted(s) => {
                let alts: Vec<String> = s.choices.iter().map(|c| c.len().to_string()).collect();
                w.write_record([
                    i.to_string(),
                    "accepted".into(),
                    n_combos,
                    pool_text(&s.freq_pool),
                    alts.join(";"),
                    s.size(model).to_string(),
                    String::new(),
                ])
                .map_err(|e| csv_err(&path, e))?;
                s.pruned_model(model).write(dir.join(format!("segment_{i}.json")))?;
            }
            SegmentOutcome::Rejected { freq_pool, mcc, .. } => {
                w.write_record([
                    i.to_string(),
                    "rejected".into(),
                    n_combos,
                    pool_text(freq_pool),
                    String::new(),
                    "0".into(),
                    format!("no valid alternative for {mcc}"),
                ])
                .map_err(|e| csv_err(&path, e))?;
            }
        }
    }
    let fb = &fdss.fallback;
    let alts: Vec<String> = fb.choices.iter().map(|c| c.len().to_string()).collect();
    w.write_record([
        fb.segment_index.to_string(),
        "fallback".into(),
        fb.n_combos.to_string(),
        pool_text(&fb.freq_pool),
        alts.join(";"),
        fb.size(model).to_string(),
        String::new(),
    ])
    .map_err(|e| csv_err(&path, e))?;
    w.flush().map_err(|e| DseError::io(&path, e))?;
    fb.pruned_model(model).write(dir.join("fallback.json"))
}

/// Oracle front as a front file, with path latencies filled in.
pub fn oracle_front(prep: &Prepared, result: &crate::oracle::OracleResult) -> ParetoFront {
    let eval = prep.evaluator();
    ParetoFront::merge(
        result
            .front
            .iter()
            .map(|p| {
                let ev = eval.evaluate(&p.chromosome);
                crate::lcso::FrontPoint {
                    point: crate::lcso::EvaluatedChromosome {
                        chromosome: p.chromosome.clone(),
                        energy: p.energy,
                        area: p.area,
                        latencies: ev.latencies,
                    },
                    segment: 0,
                    seed: 0,
                    fallback: false,
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gen_bench, tiny_params};

    #[test]
    fn front_csv_round_trip() {
        let model = gen_bench(&tiny_params(4, 100_000)).unwrap();
        let prep = Prepared::new(model).unwrap();
        let cfg = RunConfig {
            ga: GaParams {
                k: 10,
                generations: 10,
                ..GaParams::default()
            },
            n_seg: 3,
            seed: 1,
            threads: 1,
            ..RunConfig::default()
        };
        let out = run_pipeline(&prep, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), "r", "tiny", &prep, &cfg, &out).unwrap();
        let rows = read_front_csv(&dir.path().join("front.csv")).unwrap();
        assert_eq!(rows.len(), out.front.len());
        for (row, p) in rows.iter().zip(&out.front.points) {
            assert_eq!(row.energy, p.point.energy);
            assert_eq!(row.area, p.point.area);
            let c = crate::Chromosome::decode(&row.chromosome, &prep.model).unwrap();
            assert_eq!(c, p.point.chromosome);
        }
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("latency.csv").exists());
    }
}
