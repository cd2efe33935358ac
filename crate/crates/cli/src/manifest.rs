//! Study manifest: models, viewing sessions and the condition pairs to
//! compare. Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use gaze3d::projection::{ConditionLabels, Playback};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    /// Triangle mesh (PLY).
    pub mesh: PathBuf,
    /// Per-vertex region labels, one integer per line.
    #[serde(default)]
    pub region_labels: Option<PathBuf>,
    /// Label number (as a string key) to region name, e.g. `"1" = "head"`.
    #[serde(default)]
    pub regions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub question: String,
    pub model: String,
    pub material: String,
    /// Fixation log (CSV).
    pub fixations: PathBuf,
    /// Precomputed coordinate-map sequence prefix; rendered from the model
    /// when absent.
    #[serde(default)]
    pub maps: Option<PathBuf>,
    /// Replaces the configured playback rate for this session.
    #[serde(default)]
    pub fps: Option<f64>,
    #[serde(default)]
    pub playback: Option<Playback>,
    /// Fixation cloud and saliency grid read by the `metrics` command;
    /// default to the pipeline's output layout.
    #[serde(default)]
    pub cloud: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<PathBuf>,
}

impl SessionEntry {
    pub fn condition(&self) -> ConditionLabels {
        ConditionLabels::new(&self.question, &self.model, &self.material)
    }

    pub fn key(&self) -> String {
        self.condition().key()
    }

    /// Key usable as a file stem.
    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}", self.question, self.model, self.material)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    /// Session keys of the form `question/model/material`.
    pub a: String,
    pub b: String,
}

impl PairEntry {
    pub fn key(&self) -> String {
        format!("{} vs {}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyManifest {
    /// Pipeline configuration file; built-in defaults when absent.
    #[serde(default)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub sessions: Vec<SessionEntry>,
    #[serde(default)]
    pub pairs: Vec<PairEntry>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl StudyManifest {
    /// Parses the manifest, resolves relative paths and checks that every
    /// referenced input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let mut m: Self = toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        m.validate().with_context(|| format!("invalid manifest {}", path.display()))?;
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(c) = &mut self.config {
            fix(c);
        }
        fix(&mut self.output);
        for m in &mut self.models {
            fix(&mut m.mesh);
            if let Some(l) = &mut m.region_labels {
                fix(l);
            }
        }
        for s in &mut self.sessions {
            fix(&mut s.fixations);
            for p in [&mut s.maps, &mut s.cloud, &mut s.grid].into_iter().flatten() {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let exists = |p: &Path, what: &str| -> Result<()> {
            ensure!(p.is_file(), "{what} {} does not exist", p.display());
            Ok(())
        };
        if let Some(c) = &self.config {
            exists(c, "config")?;
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            ensure!(names.insert(m.name.as_str()), "duplicate model `{}`", m.name);
            exists(&m.mesh, "mesh")?;
            if let Some(l) = &m.region_labels {
                exists(l, "region labels")?;
            }
            for k in m.regions.keys() {
                k.parse::<i32>()
                    .with_context(|| format!("model `{}`: region key `{k}` is not an integer", m.name))?;
            }
        }
        let mut keys = BTreeSet::new();
        for s in &self.sessions {
            for part in [&s.question, &s.model, &s.material] {
                ensure!(
                    !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || "-.".contains(c)),
                    "condition label `{part}` must be non-empty ASCII letters, digits, `-` or `.`"
                );
            }
            ensure!(keys.insert(s.key()), "duplicate session `{}`", s.key());
            ensure!(names.contains(s.model.as_str()), "session `{}` names unknown model", s.key());
            exists(&s.fixations, "fixation log")?;
            if let Some(prefix) = &s.maps {
                exists(&gaze3d::io::sidecar_path(prefix), "scale sidecar")?;
                exists(&gaze3d::io::frame_path(prefix, 0), "coordinate map")?;
            }
            if let Some(fps) = s.fps {
                ensure!(fps > 0.0 && fps.is_finite(), "session `{}`: fps must be > 0", s.key());
            }
        }
        for p in &self.pairs {
            for k in [&p.a, &p.b] {
                if !keys.contains(k.as_str()) {
                    bail!("pair `{}` names unknown session `{k}`", p.key());
                }
            }
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn session(&self, key: &str) -> Option<&SessionEntry> {
        self.sessions.iter().find(|s| s.key() == key)
    }

    pub fn cloud_path(&self, s: &SessionEntry) -> PathBuf {
        s.cloud
            .clone()
            .unwrap_or_else(|| self.output.join("sessions").join(format!("{}.cloud.ply", s.file_stem())))
    }

    pub fn grid_path(&self, s: &SessionEntry) -> PathBuf {
        s.grid
            .clone()
            .unwrap_or_else(|| self.output.join("sessions").join(format!("{}.grid", s.file_stem())))
    }

    pub fn colored_mesh_path(&self, s: &SessionEntry) -> PathBuf {
        self.output.join("sessions").join(format!("{}.colored.ply", s.file_stem()))
    }

    pub fn maps_prefix(&self, model: &str) -> PathBuf {
        self.output.join("maps").join(model)
    }
}

impl ModelEntry {
    /// Parsed region names keyed by label.
    pub fn region_names(&self) -> BTreeMap<i32, String> {
        self.regions
            .iter()
            .filter_map(|(k, v)| Some((k.parse().ok()?, v.clone())))
            .collect()
    }
}
