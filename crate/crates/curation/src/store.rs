use std::fs;
use std::path::{Path, PathBuf};

use rainfree::Frame;

use crate::error::{io, Result};
use crate::job::CurationJob;

/// One JSON document plus one candidate PNG per job under `<state>/jobs`.
#[derive(Debug)]
pub(crate) struct Store {
    dir: PathBuf,
}

impl Store {
    pub(crate) fn open(state_dir: &Path) -> Result<Self> {
        let dir = state_dir.join("jobs");
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self { dir })
    }

    pub(crate) fn job_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub(crate) fn candidate_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.candidate.png"))
    }

    /// Writes through a temporary file so a crash never leaves half a document.
    pub(crate) fn save(&self, job: &CurationJob) -> Result<()> {
        let path = self.job_path(&job.id);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_vec_pretty(job).map_err(rainfree::Error::from)?;
        fs::write(&tmp, text).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))
    }

    pub(crate) fn save_candidate(&self, id: &str, image: &Frame) -> Result<()> {
        let path = self.candidate_path(id);
        let tmp = path.with_extension("png.tmp");
        fs::write(&tmp, image.to_png_bytes()?).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))
    }

    pub(crate) fn candidate_bytes(&self, id: &str) -> Result<Vec<u8>> {
        let path = self.candidate_path(id);
        fs::read(&path).map_err(|e| io(&path, e))
    }

    pub(crate) fn load_all(&self) -> Result<Vec<CurationJob>> {
        let mut jobs = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(|e| io(&self.dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| io(&self.dir, e))?.path();
            if path.extension().is_some_and(|x| x == "json") {
                let text = fs::read(&path).map_err(|e| io(&path, e))?;
                jobs.push(serde_json::from_slice(&text).map_err(rainfree::Error::from)?);
            }
        }
        jobs.sort_by(|a: &CurationJob, b| a.id.cmp(&b.id));
        Ok(jobs)
    }
}
