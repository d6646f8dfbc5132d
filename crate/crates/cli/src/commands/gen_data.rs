//! The gen-data command: write a synthetic classification dataset to
//! `data_path` in libsvm format. The same config can then be pointed at
//! `problem = libsvm` to solve on exactly the file it generated.
//!
//! Generation is a pure function of (n, d, density, data_seed): the same
//! config writes the same bytes every time. `n = 0` is a valid request
//! and produces an empty file, which the parser accepts as an empty
//! dataset.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use normap::{gen_synthetic_classification, write_libsvm};

use crate::config::ExperimentConfig;
use crate::{io_runtime, CliError};

pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let path = cfg.data_path.clone().ok_or_else(|| {
        CliError::Config("gen-data writes to `data_path`; set it in the config".into())
    })?;
    ensure_parent(&path)?;
    if cfg.n == 0 {
        File::create(&path)
            .map_err(|e| io_runtime(&format!("cannot create {}", path.display()), e))?;
        eprintln!("[gen-data] wrote 0 samples to {}", path.display());
        return Ok(path);
    }
    let design = gen_synthetic_classification(cfg.n, cfg.d, cfg.density, cfg.data_seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let file = File::create(&path)
        .map_err(|e| io_runtime(&format!("cannot create {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    write_libsvm(&design, &mut out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    eprintln!(
        "[gen-data] wrote {} samples x {} features ({} nonzeros) to {}",
        design.n_rows(),
        design.n_cols(),
        design.nnz(),
        path.display()
    );
    Ok(path)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| io_runtime(&format!("cannot create {}", parent.display()), e))?;
        }
    }
    Ok(())
}
