//! Config-driven runs writing `diagnostics.csv` and optional snapshots.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::config::RunConfig;
use crate::coupling::RunSummary;
use crate::error::Result;
use crate::output::{CsvWriter, Snapshot};

pub const CSV_NAME: &str = "diagnostics.csv";

/// Runs `cfg`. With `out_dir` set, writes the CSV there and, if the config
/// asks for them, one snapshot per emitted record.
pub fn execute(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    let (model, initial) = cfg.build()?;
    let spec = model.grid.spec;
    let Some(dir) = out_dir else {
        return model.run_simulation(&initial, true, &mut |_, _| Ok(()));
    };
    fs::create_dir_all(dir)?;
    let mut csv = CsvWriter::new(BufWriter::new(File::create(dir.join(CSV_NAME))?))?;
    let snapshots = cfg.output.snapshots;
    let mut index = 0usize;
    let summary = model.run_simulation(&initial, true, &mut |rec, st| {
        csv.push(rec)?;
        if snapshots {
            Snapshot::from_state(st, &spec).save(&dir.join(format!("snapshot_{index:06}.sdml")))?;
        }
        index += 1;
        Ok(())
    })?;
    csv.finish()?;
    Ok(summary)
}
