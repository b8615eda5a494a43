//! Simulation of rigid-body motion artifacts in Fast Spin Echo (FSE) MRI.
//!
//! Two corruption models are provided side by side:
//!
//! * an echo-train aware model, where every echo image carries its own T2
//!   weighting and each phase-encode line is taken from the echo and motion
//!   state under which it is actually acquired;
//! * the common echo-train agnostic baseline, which rotates the finished FSE
//!   image and splits k-space into contiguous blocks.
//!
//! Supporting pieces cover centered FFTs, rigid transforms, the T2 decay
//! signal model, multi-delay multi-echo dictionary fitting, acquisition
//! schedules, image quality metrics, procedural phantoms and a bit-exact
//! dataset format.

pub mod acquisition;
pub mod dataset;
pub mod error;
pub mod io;
pub mod mdme;
pub mod metrics;
pub mod motion;
pub mod numerics;
pub mod phantom;
pub mod signal;

pub use acquisition::{
    assemble_kspace, build_schedule, linear_segments, sample_lines, AcquisitionSchedule, Ordering,
    SampledLines,
};
pub use error::{Error, Result};
pub use mdme::{build_dictionary, match_maps, mdme_signal, GridRange, MdmeDictionary, MdmeVolume};
pub use metrics::{nrmse, ssim, MetricReport};
pub use motion::{
    sample_trajectory, simulate_fse_agnostic, simulate_fse_aware, simulate_gt, MotionTrajectory,
    Pipeline, ScheduleSummary, SimulationOutput,
};
pub use numerics::{add_noise, apply_rigid, fft2c, ifft2c, ComplexImage, KSpace, RealImage, RigidTransform};
pub use signal::{decay_image, echo_stack, EchoStack, ParameterMaps};
