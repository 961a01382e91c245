//! Output directories: artifact files plus a `manifest.json` describing the run.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hawkes_core::{HawkesError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Reads an input file and records its checksum for the manifest.
pub fn read_input(path: &Path, inputs: &mut Vec<InputDigest>) -> Result<Vec<u8>> {
    let data = fs::read(path).map_err(|e| HawkesError::Io(format!("{}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&data)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    inputs.push(InputDigest {
        path: path.display().to_string(),
        bytes: data.len(),
        sha256,
    });
    Ok(data)
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'a str,
    config: &'a C,
    inputs: &'a [InputDigest],
    outputs: &'a [String],
}

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| HawkesError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Creates `name` inside the directory and hands a buffered writer to `f`.
    pub fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.root.join(name);
        let file = fs::File::create(&path)
            .map_err(|e| HawkesError::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        std::io::Write::flush(&mut w)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)
                .map_err(|e| HawkesError::Io(e.to_string()))?;
            std::io::Write::write_all(w, b"\n")?;
            Ok(())
        })
    }

    pub fn finish<C: Serialize>(
        mut self,
        command: &str,
        config: &C,
        inputs: &[InputDigest],
    ) -> Result<()> {
        let outputs = self.written.clone();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: hawkes_core::VERSION,
            command,
            config,
            inputs,
            outputs: &outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}
