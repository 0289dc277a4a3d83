//! Experiment orchestration: configuration, seeding, training and
//! evaluation runs, cross-policy comparison and CSV persistence.

pub mod config;
pub mod metrics;
pub mod run;
pub mod seeds;
pub mod selftest;
pub mod stats;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

pub use config::{RunConfig, ScenarioConfig};
pub use metrics::{MetricsRecord, Summary};
pub use run::{compare, run_eval, run_train, CompareReport, EvalReport, TrainReport};
pub use seeds::seed_streams;

/// Writes through a sibling temporary file that is renamed into place only
/// after `write` succeeds.
pub(crate) fn atomic_write<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::usage(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        w.get_ref().sync_all().map_err(|e| Error::io(&tmp, e))
    })();
    match result {
        Ok(()) => std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e)),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}
