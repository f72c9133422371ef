use std::path::Path;

use anyhow::{Context, Result};
use bbcode::experiment::{run_memory_experiment, MemoryRunResult, SweepConfig};
use serde::Serialize;

use crate::manifest::{digest, RunManifest};
use crate::{code_name, emit, read_file, Global};

/// Default output directory of `simulate`.
const DEFAULT_OUT: &str = "bbcode-results";

pub const CSV_HEADER: [&str; 10] = ["code", "n", "k", "p", "N_c", "shots", "failures", "p_L", "stderr", "seed"];

fn csv_text(reference: &str, rows: &[MemoryRunResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.code.clone(),
            r.n.to_string(),
            r.k.to_string(),
            r.p.to_string(),
            r.n_cycles.to_string(),
            r.shots.to_string(),
            r.failures.to_string(),
            r.p_l.to_string(),
            r.stderr.to_string(),
            r.seed.to_string(),
        ])?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    Ok(format!("# {reference}\n{body}"))
}

/// Everything a point's result depends on.
#[derive(Serialize)]
struct PointKey<'a> {
    cfg: &'a SweepConfig,
    p: f64,
}

pub fn run(g: &Global, config: &Path) -> Result<()> {
    let text = read_file(config)?;
    let mut cfg = SweepConfig::from_json(&text).with_context(|| format!("parsing {}", config.display()))?;
    if g.seed != 0 {
        cfg.seed = g.seed;
    }
    let code = cfg.code.build()?;
    let name = code_name(&cfg.code, &code);
    let dir = g.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
    let ckpt_dir = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).with_context(|| format!("creating {}", ckpt_dir.display()))?;
    let mut manifest = RunManifest::start("simulate", &cfg, cfg.seed);
    let mut rows = Vec::new();
    for &p in &cfg.p {
        let ckpt = ckpt_dir.join(format!("{}.json", digest(&PointKey { cfg: &cfg, p })));
        let cached = std::fs::read_to_string(&ckpt)
            .ok()
            .and_then(|t| serde_json::from_str::<MemoryRunResult>(&t).ok());
        let row = match cached {
            Some(r) => {
                eprintln!("p = {p}: resumed from {}", ckpt.display());
                r
            }
            None => {
                let r = run_memory_experiment(&code, &name, &cfg.memory_config(p))?;
                // write then rename so an interrupted write never leaves a bad checkpoint
                let tmp = ckpt.with_extension("tmp");
                std::fs::write(&tmp, serde_json::to_string_pretty(&r)?)?;
                std::fs::rename(&tmp, &ckpt)?;
                eprintln!("p = {p}: {} failures in {} shots", r.failures, r.shots);
                r
            }
        };
        rows.push(row);
    }
    let csv = csv_text(&manifest.reference(), &rows)?;
    let path = manifest.write_output(&dir, "results.csv", &csv)?;
    emit(g, &rows, || {
        let mut s = String::new();
        for r in &rows {
            s += &format!(
                "p = {:<8} N_c = {:<3} shots = {:<8} failures = {:<5} p_L = {:.3e} +- {:.1e}\n",
                r.p, r.n_cycles, r.shots, r.failures, r.p_l, r.stderr
            );
        }
        s += &format!("written     {}\n", path.display());
        s
    })?;
    manifest.finish(&dir)?;
    Ok(())
}
