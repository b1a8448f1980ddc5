use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub versions: Versions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub streetsense: String,
    pub stopwords: String,
    pub pmte: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            streetsense: env!("CARGO_PKG_VERSION").to_string(),
            stopwords: crate::topics::STOPWORDS_VERSION.to_string(),
            pmte: 1,
        }
    }
}

/// Bookkeeping for one command: the inputs it read and the files it
/// created, so that a failed run can remove what it wrote.
#[derive(Debug)]
pub struct RunContext {
    pub command: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub out_dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunContext {
    pub fn new(command: &str, args: Vec<String>, config: RunConfig, out_dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(RunContext { command: command.to_string(), args, config, out_dir, inputs: Vec::new(), outputs: Vec::new() })
    }

    /// Register an input file; it must exist.
    pub fn input(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.is_file() {
            return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found")));
        }
        self.inputs.push(path.to_path_buf());
        Ok(path.to_path_buf())
    }

    /// Path of an artifact: `explicit` if given, else `name` under the
    /// output directory.
    pub fn output_path(&self, explicit: Option<&Path>, name: &str) -> PathBuf {
        explicit.map(Path::to_path_buf).unwrap_or_else(|| self.out_dir.join(name))
    }

    pub fn create(&mut self, path: &Path) -> Result<BufWriter<File>> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.outputs.push(path.to_path_buf());
        Ok(BufWriter::new(f))
    }

    /// Register a file written by library code.
    pub fn claim(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write_string(&mut self, path: &Path, text: &str) -> Result<()> {
        let mut w = self.create(path)?;
        w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        self.write_string(path, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}.manifest.json", self.command))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        let digest = |p: &PathBuf| -> Result<FileDigest> { Ok(FileDigest { path: p.display().to_string(), sha256: file_sha256(p)? }) };
        let manifest = RunManifest {
            command: self.command.clone(),
            args: self.args.clone(),
            seed: self.config.seed,
            config: self.config.clone(),
            inputs: self.inputs.iter().map(digest).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(digest).collect::<Result<_>>()?,
            versions: Versions::default(),
        };
        let path = self.manifest_path();
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write_string(&path, &text)?;
        Ok(path)
    }

    /// Delete every file this run created.
    pub fn abort(self) {
        for p in &self.outputs {
            let _ = fs::remove_file(p);
        }
    }
}
