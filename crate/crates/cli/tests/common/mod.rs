#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use facet_core::annotation::{write_via, Dataset};
use facet_core::testkit::{dimension_manifest, facade_dataset, reference_dataset};

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Writes `<name>.json` and `<name>.dims.csv`.
    pub fn dataset(&self, name: &str, d: &Dataset) -> (PathBuf, PathBuf) {
        let via = self.path(&format!("{name}.json"));
        let dims = self.path(&format!("{name}.dims.csv"));
        std::fs::write(&via, write_via(d)).unwrap();
        std::fs::write(&dims, dimension_manifest(d)).unwrap();
        (via, dims)
    }

    pub fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

/// 20 images, 10 to 16 windows each.
pub fn twenty_images() -> Dataset {
    facade_dataset(20, |i| 10 + i % 7, 512, 512, 1)
}

pub fn reference() -> Dataset {
    reference_dataset()
}

pub fn facet<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_facet"))
        .args(args)
        .env("FACET_NO_COLOR", "1")
        .output()
        .unwrap()
}

pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
