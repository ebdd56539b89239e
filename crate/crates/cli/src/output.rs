//! CSV rendering of round records. Floats use Rust's shortest round-trip formatting and
//! absent columns are left empty; actions are written 1-based.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use gpe_core::envsim::RoundRecord;

pub const HEADER: &str =
    "round,action,reward,propensity,delta_t,x_t,v_t,max_is_ratio,cum_regret,noise_cum,expl_cost_cum,exploit_cost_cum";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn row(r: &RoundRecord) -> String {
    let o = &r.observation;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.round,
        o.action + 1,
        o.reward,
        o.propensity,
        r.delta,
        opt(r.x),
        opt(r.v),
        opt(r.max_is_ratio),
        r.cum_regret,
        r.noise_cum,
        opt(r.expl_cost_cum),
        opt(r.exploit_cost_cum),
    )
}

pub fn run_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96);
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&row(r));
        out.push('\n');
    }
    out
}

/// Long format keyed by `(algorithm, seed, round)`.
pub fn compare_csv<'a>(blocks: impl IntoIterator<Item = (&'a str, u64, &'a [RoundRecord])>) -> String {
    let mut out = format!("algorithm,seed,{HEADER}\n");
    for (label, seed, records) in blocks {
        for r in records {
            let _ = writeln!(out, "{label},{seed},{}", row(r));
        }
    }
    out
}

/// Writes through a sibling temporary file and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
