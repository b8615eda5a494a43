//! Inter-TR rigid motion and the two corruption pipelines.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::acquisition::{assemble_kspace, linear_segments, AcquisitionSchedule, SampledLines};
use crate::error::{Error, Result};
use crate::numerics::{add_noise, apply_rigid, fft2c, ifft2c, ComplexImage, RigidTransform};
use crate::signal::{echo_stack, ParameterMaps};

/// Piecewise-constant motion: `n_events` states, each held for
/// `n_tr / n_events` consecutive repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrajectory {
    n_tr: usize,
    events: Vec<RigidTransform>,
}

impl MotionTrajectory {
    pub fn from_events(n_tr: usize, events: Vec<RigidTransform>) -> Result<Self> {
        let n_events = events.len();
        if n_events == 0 || n_tr == 0 || !n_tr.is_multiple_of(n_events) {
            return Err(Error::invalid(
                "n_events",
                format!("{n_events} events must evenly divide {n_tr} repetitions"),
            ));
        }
        Ok(Self { n_tr, events })
    }

    pub fn still(n_tr: usize, n_events: usize) -> Result<Self> {
        Self::from_events(n_tr, vec![RigidTransform::IDENTITY; n_events])
    }

    pub fn n_tr(&self) -> usize {
        self.n_tr
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn trs_per_event(&self) -> usize {
        self.n_tr / self.events.len()
    }

    pub fn event_of_tr(&self, tr: usize) -> usize {
        tr / self.trs_per_event()
    }

    pub fn state(&self, tr: usize) -> &RigidTransform {
        &self.events[self.event_of_tr(tr)]
    }

    pub fn events(&self) -> &[RigidTransform] {
        &self.events
    }

    /// Per-TR states, expanded.
    pub fn states(&self) -> Vec<RigidTransform> {
        (0..self.n_tr).map(|t| *self.state(t)).collect()
    }

    pub fn event_angles(&self) -> Vec<f64> {
        self.events.iter().map(|t| t.rotation_deg).collect()
    }
}

/// One rotation per event from `N(0, sigma_deg^2)`; no translation.
pub fn sample_trajectory(n_tr: usize, n_events: usize, sigma_deg: f64, seed: u64) -> Result<MotionTrajectory> {
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(Error::invalid("sigma_deg", format!("must be >= 0, got {sigma_deg}")));
    }
    if n_events == 0 || !n_tr.is_multiple_of(n_events) {
        return Err(Error::invalid(
            "n_events",
            format!("{n_events} events must evenly divide {n_tr} repetitions"),
        ));
    }
    let normal = Normal::new(0.0, sigma_deg).map_err(|e| Error::invalid("sigma_deg", e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let events = (0..n_events)
        .map(|_| RigidTransform::rotation(normal.sample(&mut rng)))
        .collect();
    MotionTrajectory::from_events(n_tr, events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pipeline {
    FseAware,
    FseAgnostic,
}

impl Pipeline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::FseAware => "fse_aware",
            Pipeline::FseAgnostic => "fse_agnostic",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fse_aware" => Ok(Pipeline::FseAware),
            "fse_agnostic" => Ok(Pipeline::FseAgnostic),
            other => Err(Error::invalid("pipeline", format!("unknown pipeline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSummary {
    pub n_pe: usize,
    pub etl: usize,
    pub n_tr: usize,
    pub esp_ms: f64,
}

impl From<&AcquisitionSchedule> for ScheduleSummary {
    fn from(s: &AcquisitionSchedule) -> Self {
        Self {
            n_pe: s.n_pe(),
            etl: s.etl(),
            n_tr: s.n_tr(),
            esp_ms: s.esp_ms(),
        }
    }
}

/// Paired clean / motion-corrupt complex images.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub clean: ComplexImage,
    pub corrupt: ComplexImage,
    pub trajectory: MotionTrajectory,
    /// Echo-train layout; `None` for the agnostic pipeline, which ignores it.
    pub schedule: Option<ScheduleSummary>,
    pub seed: u64,
    pub pipeline: Pipeline,
}

fn check_maps(maps: &ParameterMaps, schedule: &AcquisitionSchedule) -> Result<()> {
    if maps.shape().0 != schedule.n_pe() {
        return Err(Error::Shape {
            expected: (schedule.n_pe(), maps.shape().1),
            actual: maps.shape(),
        });
    }
    Ok(())
}

/// Motion-free FSE image: each line is taken from the k-space of the echo it
/// is acquired at.
pub fn simulate_gt(maps: &ParameterMaps, schedule: &AcquisitionSchedule) -> Result<ComplexImage> {
    check_maps(maps, schedule)?;
    let (ny, nx) = maps.shape();
    let stack = echo_stack(maps, schedule.etl(), schedule.esp_ms())?;
    let parts = stack
        .echoes()
        .par_iter()
        .enumerate()
        .map(|(e, img)| {
            let k = fft2c(img)?;
            let mut part = SampledLines::new();
            for line in schedule.band(e) {
                part.take_from(&k, line)?;
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    ifft2c(&assemble_kspace(&parts, ny, nx)?)
}

/// Echo-train aware corruption: within TR `t` every echo image is moved by
/// the same state, and echo `e` contributes line `line_of(t, e)`.
pub fn simulate_fse_aware(
    maps: &ParameterMaps,
    schedule: &AcquisitionSchedule,
    traj: &MotionTrajectory,
    sigma_noise: f64,
    seed: u64,
) -> Result<SimulationOutput> {
    check_maps(maps, schedule)?;
    if traj.n_tr() != schedule.n_tr() {
        return Err(Error::invalid(
            "trajectory",
            format!("{} TRs in trajectory, schedule has {}", traj.n_tr(), schedule.n_tr()),
        ));
    }
    let (ny, nx) = maps.shape();
    let stack = echo_stack(maps, schedule.etl(), schedule.esp_ms())?;
    let per_event = traj.trs_per_event();

    // TRs sharing an event share the moved echo images, so each
    // (event, echo) pair needs one transform and one FFT.
    let jobs: Vec<(usize, usize)> = (0..traj.n_events())
        .flat_map(|ev| (0..schedule.etl()).map(move |e| (ev, e)))
        .collect();
    let parts = jobs
        .par_iter()
        .map(|&(ev, e)| {
            let moved = apply_rigid(&stack.echoes()[e], &traj.events()[ev])?;
            let k = fft2c(&moved)?;
            let mut part = SampledLines::new();
            for t in ev * per_event..(ev + 1) * per_event {
                part.take_from(&k, schedule.line_of(t, e))?;
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let ksp = add_noise(&assemble_kspace(&parts, ny, nx)?, sigma_noise, seed)?;
    let corrupt = ifft2c(&ksp)?;

    let clean = simulate_gt(maps, schedule)?;
    Ok(SimulationOutput {
        clean,
        corrupt,
        trajectory: traj.clone(),
        schedule: Some(schedule.into()),
        seed,
        pipeline: Pipeline::FseAware,
    })
}

/// Echo-train agnostic corruption: the finished image is moved by each event
/// state of `traj` and contiguous k-space blocks, in natural line order, are
/// drawn from the moved copies.
pub fn simulate_fse_agnostic(
    clean_img: &ComplexImage,
    traj: &MotionTrajectory,
    n_segments: usize,
    sigma_noise: f64,
    seed: u64,
) -> Result<SimulationOutput> {
    if traj.n_events() != n_segments {
        return Err(Error::invalid(
            "n_segments",
            format!("{n_segments} segments but {} motion events", traj.n_events()),
        ));
    }
    let (ny, nx) = clean_img.shape();
    let segments = linear_segments(ny, n_segments)?;
    let parts = segments
        .par_iter()
        .zip(traj.events().par_iter())
        .map(|(range, t)| {
            let k = fft2c(&apply_rigid(clean_img, t)?)?;
            let mut part = SampledLines::new();
            for line in range.clone() {
                part.take_from(&k, line)?;
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let ksp = add_noise(&assemble_kspace(&parts, ny, nx)?, sigma_noise, seed)?;
    Ok(SimulationOutput {
        clean: clean_img.clone(),
        corrupt: ifft2c(&ksp)?,
        trajectory: traj.clone(),
        schedule: None,
        seed,
        pipeline: Pipeline::FseAgnostic,
    })
}
