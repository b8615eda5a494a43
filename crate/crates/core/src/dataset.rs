//! Simulation config, paired dataset generation and the dataset manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::acquisition::{build_schedule, AcquisitionSchedule, Ordering};
use crate::error::{Error, Result};
use crate::io::{load_image, write_atomic, MagnitudeImage};
use crate::metrics::{nrmse, ssim};
use crate::motion::{sample_trajectory, simulate_fse_agnostic, simulate_fse_aware, MotionTrajectory, Pipeline};
use crate::numerics::derive_seed;
use crate::phantom::generate_phantom;
use crate::signal::ParameterMaps;

pub const MANIFEST_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest.txt";

const STREAM_PHANTOM: u64 = 0;
const STREAM_TRAJECTORY: u64 = 1;
const STREAM_NOISE_AWARE: u64 = 2;
const STREAM_NOISE_AGNOSTIC: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineChoice {
    FseAware,
    FseAgnostic,
    Both,
}

impl PipelineChoice {
    pub fn pipelines(&self) -> &'static [Pipeline] {
        match self {
            PipelineChoice::FseAware => &[Pipeline::FseAware],
            PipelineChoice::FseAgnostic => &[Pipeline::FseAgnostic],
            PipelineChoice::Both => &[Pipeline::FseAware, Pipeline::FseAgnostic],
        }
    }
}

impl fmt::Display for PipelineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineChoice::FseAware => "fse_aware",
            PipelineChoice::FseAgnostic => "fse_agnostic",
            PipelineChoice::Both => "both",
        })
    }
}

impl FromStr for PipelineChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fse_aware" => Ok(PipelineChoice::FseAware),
            "fse_agnostic" => Ok(PipelineChoice::FseAgnostic),
            "both" => Ok(PipelineChoice::Both),
            other => Err(Error::Config(format!(
                "pipeline must be fse_aware, fse_agnostic or both, got `{other}`"
            ))),
        }
    }
}

/// Where parameter maps come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhantomSource {
    /// A fresh procedural phantom per sample.
    Procedural,
    /// One set of maps (see [`save_maps`]) reused by every sample.
    File(PathBuf),
}

impl fmt::Display for PhantomSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhantomSource::Procedural => f.write_str("procedural"),
            PhantomSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Simulation parameters. Rows (`ny`) run along phase encode.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub ny: usize,
    pub nx: usize,
    pub etl: usize,
    pub esp_ms: f64,
    pub n_events: usize,
    pub sigma_deg: f64,
    pub sigma_noise: f64,
    pub n_samples: usize,
    pub base_seed: u64,
    pub pipeline: PipelineChoice,
    pub phantom: PhantomSource,
}

impl Default for SimConfig {
    /// 288 phase encodes x 320 readout, ETL 16 at 12 ms, 9 events, 2 deg.
    fn default() -> Self {
        Self {
            ny: 288,
            nx: 320,
            etl: 16,
            esp_ms: 12.0,
            n_events: 9,
            sigma_deg: 2.0,
            sigma_noise: 0.0,
            n_samples: 819,
            base_seed: 0,
            pipeline: PipelineChoice::Both,
            phantom: PhantomSource::Procedural,
        }
    }
}

const CONFIG_KEYS: [&str; 11] = [
    "ny",
    "nx",
    "etl",
    "esp_ms",
    "n_events",
    "sigma_deg",
    "sigma_noise",
    "n_samples",
    "base_seed",
    "pipeline",
    "phantom",
];

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ny == 0 || self.nx == 0 || self.etl == 0 || self.n_events == 0 || self.n_samples == 0 {
            return bad("ny, nx, etl, n_events and n_samples must be positive".into());
        }
        if self.etl > 64 {
            return bad(format!("etl {} exceeds 64", self.etl));
        }
        if !self.ny.is_multiple_of(self.etl) {
            return bad(format!("etl {} does not divide ny {}", self.etl, self.ny));
        }
        let n_tr = self.ny / self.etl;
        if !n_tr.is_multiple_of(self.n_events) {
            return bad(format!("n_events {} does not divide {n_tr} TRs", self.n_events));
        }
        if !(self.esp_ms > 0.0 && self.esp_ms.is_finite()) {
            return bad(format!("esp_ms must be > 0, got {}", self.esp_ms));
        }
        if !(self.sigma_deg >= 0.0 && self.sigma_deg.is_finite()) {
            return bad(format!("sigma_deg must be >= 0, got {}", self.sigma_deg));
        }
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return bad(format!("sigma_noise must be >= 0, got {}", self.sigma_noise));
        }
        Ok(())
    }

    pub fn n_tr(&self) -> usize {
        self.ny / self.etl
    }

    pub fn schedule(&self) -> Result<AcquisitionSchedule> {
        build_schedule(self.ny, self.etl, self.esp_ms, Ordering::CenterOut)
    }

    /// Seed of sample `id`.
    pub fn sample_seed(&self, id: usize) -> u64 {
        self.base_seed.wrapping_add(id as u64)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "ny" => self.ny = num(key, value)?,
            "nx" => self.nx = num(key, value)?,
            "etl" => self.etl = num(key, value)?,
            "esp_ms" => self.esp_ms = num(key, value)?,
            "n_events" => self.n_events = num(key, value)?,
            "sigma_deg" => self.sigma_deg = num(key, value)?,
            "sigma_noise" => self.sigma_noise = num(key, value)?,
            "n_samples" => self.n_samples = num(key, value)?,
            "base_seed" => self.base_seed = num(key, value)?,
            "pipeline" => self.pipeline = value.parse()?,
            "phantom" => {
                self.phantom = match value {
                    "procedural" => PhantomSource::Procedural,
                    path => PhantomSource::File(PathBuf::from(path)),
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// `(key, value)` pairs in canonical order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        CONFIG_KEYS
            .iter()
            .map(|&k| {
                let v = match k {
                    "ny" => self.ny.to_string(),
                    "nx" => self.nx.to_string(),
                    "etl" => self.etl.to_string(),
                    "esp_ms" => self.esp_ms.to_string(),
                    "n_events" => self.n_events.to_string(),
                    "sigma_deg" => self.sigma_deg.to_string(),
                    "sigma_noise" => self.sigma_noise.to_string(),
                    "n_samples" => self.n_samples.to_string(),
                    "base_seed" => self.base_seed.to_string(),
                    "pipeline" => self.pipeline.to_string(),
                    _ => self.phantom.to_string(),
                };
                (k, v)
            })
            .collect()
    }

    /// Parses flat `key = value` text on top of the defaults. `#` starts a
    /// comment; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
            seen.push(key);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Writes `pd`, `t2` and (if present) `t1` as FSEIMG files into `dir`.
pub fn save_maps(maps: &ParameterMaps, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut channels = vec![("pd", maps.pd()), ("t2", maps.t2())];
    if let Some(t1) = maps.t1() {
        channels.push(("t1", t1));
    }
    for (name, img) in channels {
        let path = dir.join(format!("{name}.fseimg"));
        write_atomic(&path, &MagnitudeImage::from_real(img).to_bytes())?;
    }
    Ok(())
}

pub fn load_maps(dir: impl AsRef<Path>) -> Result<ParameterMaps> {
    let dir = dir.as_ref();
    let pd = load_image(dir.join("pd.fseimg"))?.to_real();
    let t2 = load_image(dir.join("t2.fseimg"))?.to_real();
    let t1_path = dir.join("t1.fseimg");
    let t1 = if t1_path.exists() {
        Some(load_image(t1_path)?.to_real())
    } else {
        None
    };
    ParameterMaps::new(pd, t2, t1)
}

/// One clean image and its corrupted counterparts for a single sample.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub id: usize,
    pub seed: u64,
    pub trajectory: MotionTrajectory,
    pub clean: MagnitudeImage,
    pub corrupt: Vec<(Pipeline, MagnitudeImage)>,
}

/// Simulates sample `id` of `cfg` on `maps` (or on a procedural phantom when
/// `maps` is `None`).
pub fn simulate_sample(cfg: &SimConfig, maps: Option<&ParameterMaps>, id: usize) -> Result<SamplePair> {
    cfg.validate()?;
    let seed = cfg.sample_seed(id);
    let owned;
    let maps = match maps {
        Some(m) => m,
        None => {
            owned = generate_phantom(cfg.ny, cfg.nx, derive_seed(seed, STREAM_PHANTOM))?;
            &owned
        }
    };
    if maps.shape() != (cfg.ny, cfg.nx) {
        return Err(Error::Shape {
            expected: (cfg.ny, cfg.nx),
            actual: maps.shape(),
        });
    }
    let schedule = cfg.schedule()?;
    let traj = sample_trajectory(cfg.n_tr(), cfg.n_events, cfg.sigma_deg, derive_seed(seed, STREAM_TRAJECTORY))?;

    let mut clean = None;
    let mut corrupt = Vec::new();
    for &p in cfg.pipeline.pipelines() {
        match p {
            Pipeline::FseAware => {
                let out = simulate_fse_aware(maps, &schedule, &traj, cfg.sigma_noise, derive_seed(seed, STREAM_NOISE_AWARE))?;
                corrupt.push((p, MagnitudeImage::from_complex(&out.corrupt)));
                clean = Some(out.clean);
            }
            Pipeline::FseAgnostic => {
                let gt = match clean.take() {
                    Some(c) => c,
                    None => crate::motion::simulate_gt(maps, &schedule)?,
                };
                let out = simulate_fse_agnostic(&gt, &traj, cfg.n_events, cfg.sigma_noise, derive_seed(seed, STREAM_NOISE_AGNOSTIC))?;
                corrupt.push((p, MagnitudeImage::from_complex(&out.corrupt)));
                clean = Some(gt);
            }
        }
    }
    let clean = clean.expect("at least one pipeline runs");
    Ok(SamplePair {
        id,
        seed,
        trajectory: traj,
        clean: MagnitudeImage::from_complex(&clean),
        corrupt,
    })
}

/// One manifest line: a corrupt image and its clean partner.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub sample_id: usize,
    pub pipeline: Pipeline,
    pub seed: u64,
    pub angles_deg: Vec<f64>,
    pub clean_path: String,
    pub clean_bytes: u64,
    pub corrupt_path: String,
    pub corrupt_bytes: u64,
    pub ssim: f64,
    pub nrmse: f64,
}

const RECORD_HEADER: &str = "sample_id,pipeline,seed,angles_deg,clean_path,clean_bytes,corrupt_path,corrupt_bytes,ssim,nrmse";

impl ManifestRecord {
    fn to_line(&self) -> String {
        let angles: Vec<String> = self.angles_deg.iter().map(|a| a.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sample_id,
            self.pipeline,
            self.seed,
            angles.join(";"),
            self.clean_path,
            self.clean_bytes,
            self.corrupt_path,
            self.corrupt_bytes,
            self.ssim,
            self.nrmse
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Config(format!("manifest record has {} fields: `{line}`", f.len())));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Config(format!("bad number `{s}` in manifest"))) };
        let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Config(format!("bad integer `{s}` in manifest"))) };
        let angles_deg = if f[3].is_empty() {
            Vec::new()
        } else {
            f[3].split(';').map(num).collect::<Result<_>>()?
        };
        Ok(Self {
            sample_id: int(f[0])? as usize,
            pipeline: f[1].parse()?,
            seed: int(f[2])?,
            angles_deg,
            clean_path: f[4].to_string(),
            clean_bytes: int(f[5])?,
            corrupt_path: f[6].to_string(),
            corrupt_bytes: int(f[7])?,
            ssim: num(f[8])?,
            nrmse: num(f[9])?,
        })
    }
}

/// Dataset index: a `key: value` header (format version, status and the full
/// config), then a column header line and one record per corrupt image.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub version: String,
    /// `false` for a partial manifest left by an aborted run.
    pub complete: bool,
    pub completed_samples: usize,
    pub config: SimConfig,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("format_version: {}\n", self.version));
        out.push_str(&format!("status: {}\n", if self.complete { "complete" } else { "partial" }));
        out.push_str(&format!("completed_samples: {}\n", self.completed_samples));
        for (k, v) in self.config.pairs() {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push_str(&format!("records: {}\n", self.records.len()));
        out.push_str(RECORD_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut version = None;
        let mut complete = None;
        let mut completed_samples = None;
        let mut n_records = None;
        let mut config = SimConfig::default();
        for line in lines.by_ref() {
            if line == RECORD_HEADER {
                break;
            }
            let (k, v) = line
                .split_once(": ")
                .ok_or_else(|| Error::Config(format!("bad manifest header line `{line}`")))?;
            match k {
                "format_version" => version = Some(v.to_string()),
                "status" => complete = Some(v == "complete"),
                "completed_samples" => {
                    completed_samples = Some(v.parse().map_err(|_| Error::Config(format!("bad count `{v}`")))?)
                }
                "records" => n_records = Some(v.parse::<usize>().map_err(|_| Error::Config(format!("bad count `{v}`")))?),
                key => config.set(key, v)?,
            }
        }
        let version = version.ok_or_else(|| Error::Config("manifest lacks format_version".into()))?;
        if version != MANIFEST_VERSION {
            return Err(Error::Config(format!("unsupported manifest version `{version}`")));
        }
        let records = lines.map(ManifestRecord::parse).collect::<Result<Vec<_>>>()?;
        if Some(records.len()) != n_records {
            return Err(Error::Config(format!(
                "manifest declares {n_records:?} records, found {}",
                records.len()
            )));
        }
        Ok(Self {
            version,
            complete: complete.ok_or_else(|| Error::Config("manifest lacks status".into()))?,
            completed_samples: completed_samples.ok_or_else(|| Error::Config("manifest lacks completed_samples".into()))?,
            config,
            records,
        })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    /// Checks file presence, byte lengths, pairing shapes and that stored
    /// metrics match a recomputation within `tol`.
    pub fn verify(&self, dir: impl AsRef<Path>, tol: f64) -> Result<()> {
        let dir = dir.as_ref();
        for r in &self.records {
            let mut imgs = Vec::with_capacity(2);
            for (rel, bytes) in [(&r.clean_path, r.clean_bytes), (&r.corrupt_path, r.corrupt_bytes)] {
                let path = dir.join(rel);
                let len = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
                if len != bytes {
                    return Err(Error::Config(format!("{rel}: {len} bytes on disk, manifest says {bytes}")));
                }
                imgs.push(load_image(&path)?);
            }
            if imgs[0].shape() != imgs[1].shape() {
                return Err(Error::Shape {
                    expected: imgs[0].shape(),
                    actual: imgs[1].shape(),
                });
            }
            let (clean, corrupt) = (imgs[0].to_real(), imgs[1].to_real());
            let s = ssim(&clean, &corrupt, None)?;
            let n = nrmse(&clean, &corrupt)?;
            if (s - r.ssim).abs() > tol || (n - r.nrmse).abs() > tol {
                return Err(Error::Config(format!(
                    "sample {} {}: stored ssim/nrmse {}/{} vs recomputed {s}/{n}",
                    r.sample_id, r.pipeline, r.ssim, r.nrmse
                )));
            }
        }
        Ok(())
    }
}

fn sample_file(id: usize, tag: &str) -> String {
    format!("sample_{id:05}_{tag}.fseimg")
}

fn write_sample(pair: &SamplePair, dir: &Path) -> Result<Vec<ManifestRecord>> {
    let clean_path = sample_file(pair.id, "clean");
    let clean_bytes = pair.clean.to_bytes();
    write_atomic(&dir.join(&clean_path), &clean_bytes)?;
    let clean = pair.clean.to_real();
    pair.corrupt
        .iter()
        .map(|(p, img)| {
            let corrupt_path = sample_file(pair.id, p.as_str());
            let bytes = img.to_bytes();
            write_atomic(&dir.join(&corrupt_path), &bytes)?;
            let corrupt = img.to_real();
            Ok(ManifestRecord {
                sample_id: pair.id,
                pipeline: *p,
                seed: pair.seed,
                angles_deg: pair.trajectory.event_angles(),
                clean_path: clean_path.clone(),
                clean_bytes: clean_bytes.len() as u64,
                corrupt_path,
                corrupt_bytes: bytes.len() as u64,
                ssim: ssim(&clean, &corrupt, None)?,
                nrmse: nrmse(&clean, &corrupt)?,
            })
        })
        .collect()
}

/// Generates `cfg.n_samples` samples into `out_dir`, then writes the manifest.
///
/// Samples run in parallel; each file is written through a temp file and a
/// rename. On failure a partial manifest listing the finished samples is
/// written and [`Error::DatasetAborted`] returned.
pub fn generate_dataset(cfg: &SimConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    cfg.validate()?;
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shared_maps = match &cfg.phantom {
        PhantomSource::Procedural => None,
        PhantomSource::File(p) => Some(load_maps(p)?),
    };

    let results: Vec<Result<Vec<ManifestRecord>>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|id| {
            let pair = simulate_sample(cfg, shared_maps.as_ref(), id)?;
            write_sample(&pair, dir)
        })
        .collect();

    let mut records = Vec::new();
    let mut first_error = None;
    let mut completed = 0;
    for r in results {
        match r {
            Ok(recs) => {
                completed += 1;
                records.extend(recs);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.to_string(),
        complete: first_error.is_none(),
        completed_samples: completed,
        config: cfg.clone(),
        records,
    };
    write_atomic(&dir.join(MANIFEST_FILE), manifest.to_text().as_bytes())?;
    match first_error {
        None => Ok(manifest),
        Some(e) => Err(Error::DatasetAborted {
            completed,
            source: Box::new(e),
        }),
    }
}
