use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use stance_core::dataset::load_semeval;
use stance_core::digest::{json_digest, sha256_hex};
use stance_core::{Split, TweetRecord};

use crate::args::DataArgs;

const TRAIN_NAMES: [&str; 4] =
    ["train.tsv", "train.txt", "trainingdata-all-annotations.txt", "semeval2016-task6-trainingdata.txt"];
const TRIAL_NAME: &str = "semeval2016-task6-trialdata.txt";
const TEST_NAMES: [&str; 4] =
    ["test.tsv", "test.txt", "testdata-taskA-all-annotations.txt", "SemEval2016-Task6-subtaskA-testdata-gold.txt"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFiles {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

fn first_existing(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

impl DataFiles {
    /// Explicit files win; otherwise known file names are looked up in
    /// the data directory. The official training file is paired with the
    /// trial file when both are present.
    pub fn resolve(
        data_dir: Option<&Path>,
        train: &[PathBuf],
        test: &[PathBuf],
    ) -> anyhow::Result<DataFiles> {
        let mut files = DataFiles { train: train.to_vec(), test: test.to_vec() };
        if files.train.is_empty() || files.test.is_empty() {
            let Some(dir) = data_dir else {
                bail!("no dataset given: pass --data-dir or both --train and --test");
            };
            if !dir.is_dir() {
                bail!("data directory {} does not exist", dir.display());
            }
            if files.train.is_empty() {
                let found = first_existing(dir, &TRAIN_NAMES)
                    .with_context(|| format!("no train file in {} (tried {})", dir.display(), TRAIN_NAMES.join(", ")))?;
                let official = found.file_name().is_some_and(|n| n == TRAIN_NAMES[3]);
                files.train.push(found);
                if official && dir.join(TRIAL_NAME).is_file() {
                    files.train.push(dir.join(TRIAL_NAME));
                }
            }
            if files.test.is_empty() {
                let found = first_existing(dir, &TEST_NAMES)
                    .with_context(|| format!("no test file in {} (tried {})", dir.display(), TEST_NAMES.join(", ")))?;
                files.test.push(found);
            }
        }
        Ok(files)
    }

    pub fn from_args(args: &DataArgs) -> anyhow::Result<DataFiles> {
        Self::resolve(args.data_dir.as_deref(), &args.train, &args.test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub struct Dataset {
    pub train: Vec<TweetRecord>,
    pub test: Vec<TweetRecord>,
    pub files: Vec<FileDigest>,
}

impl Dataset {
    pub fn load(files: &DataFiles) -> anyhow::Result<Dataset> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut digests = Vec::new();
        for (paths, split, out) in [(&files.train, Split::Train, &mut train), (&files.test, Split::Test, &mut test)] {
            for p in paths {
                out.extend(load_semeval(p, split)?);
                let bytes = std::fs::read(p).with_context(|| p.display().to_string())?;
                digests.push(FileDigest { path: p.clone(), sha256: sha256_hex(&bytes) });
            }
        }
        Ok(Dataset { train, test, files: digests })
    }

    pub fn all(&self) -> Vec<TweetRecord> {
        self.train.iter().chain(&self.test).cloned().collect()
    }

    /// Digest of the parsed records, independent of file names and
    /// encoding details that do not change the records.
    pub fn digest(&self) -> String {
        json_digest(&(&self.train, &self.test))
    }
}
