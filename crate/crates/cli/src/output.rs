//! Output directories are staged next to their destination and renamed
//! into place only after every file has been written.

use std::path::{Path, PathBuf};

use serde::Serialize;
use uda_core::{Error, Result};

pub struct Staging {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn sibling(dest: &Path, tag: &str) -> Result<PathBuf> {
    let name = dest
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidArgument {
            arg: "out",
            reason: format!("`{}` has no final path component", dest.display()),
        })?;
    Ok(dest.with_file_name(format!(".{name}.{tag}-{}", std::process::id())))
}

impl Staging {
    pub fn new(dest: &Path) -> Result<Self> {
        if dest.is_file() {
            return Err(Error::InvalidArgument {
                arg: "out",
                reason: format!("`{}` is a file", dest.display()),
            });
        }
        if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        let tmp = sibling(dest, "partial")?;
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| io(&tmp, e))?;
        }
        std::fs::create_dir(&tmp).map_err(|e| io(&tmp, e))?;
        Ok(Staging {
            tmp,
            dest: dest.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.tmp.join(rel)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let path = self.join(rel);
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))
    }

    /// Replace any previous contents of the destination.
    pub fn commit(mut self) -> Result<PathBuf> {
        let old = sibling(&self.dest, "old")?;
        let had_old = self.dest.exists();
        if had_old {
            std::fs::rename(&self.dest, &old).map_err(|e| io(&self.dest, e))?;
        }
        std::fs::rename(&self.tmp, &self.dest).map_err(|e| io(&self.tmp, e))?;
        self.committed = true;
        if had_old {
            std::fs::remove_dir_all(&old).map_err(|e| io(&old, e))?;
        }
        Ok(self.dest.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.tmp);
        }
    }
}
