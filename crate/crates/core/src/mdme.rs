//! Multi-delay multi-echo (MDME) signal model and dictionary matching for
//! T1 / T2 / PD estimation.
//!
//! Signal model: saturation recovery times T2 decay,
//! `S(td, te) = pd * (1 - exp(-td / t1)) * exp(-te / t2)`, ordered td-major.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::RealImage;
use crate::signal::ParameterMaps;

/// Delay times (ms) of the reference four-delay protocol.
pub const PROTOCOL_TD_MS: [f64; 4] = [7562.0, 3504.0, 1041.0, 171.0];
/// Echo times (ms) of the reference two-echo protocol.
pub const PROTOCOL_TE_MS: [f64; 2] = [27.0, 90.0];
/// Reference T1 grid: 100..=6000 ms in 20 ms steps.
pub const PROTOCOL_T1: GridRange = GridRange {
    start: 100.0,
    stop: 6000.0,
    step: 20.0,
};
/// Reference T2 grid: 10..=1000 ms in 2 ms steps.
pub const PROTOCOL_T2: GridRange = GridRange {
    start: 10.0,
    stop: 1000.0,
    step: 2.0,
};

/// Background threshold relative to the largest signal norm in a slice.
pub const BACKGROUND_REL_EPS: f64 = 1e-9;

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let GridRange { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || start <= 0.0 {
            return Err(Error::invalid(
                "grid",
                format!("need positive start and step, got {self:?}"),
            ));
        }
        if stop < start {
            return Err(Error::invalid("grid", format!("empty range {self:?}")));
        }
        // tolerate representation error at the closing endpoint
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + i as f64 * step).collect())
    }
}

/// Model signal for one tissue, td-major: index `i * te.len() + j` holds
/// delay `td[i]` at echo `te[j]`.
pub fn mdme_signal(t1: f64, t2: f64, pd: f64, td_ms: &[f64], te_ms: &[f64]) -> Result<Vec<f64>> {
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(Error::invalid("t1", format!("must be > 0, got {t1}")));
    }
    if !(t2 > 0.0 && t2.is_finite()) {
        return Err(Error::invalid("t2", format!("must be > 0, got {t2}")));
    }
    if !(pd >= 0.0 && pd.is_finite()) {
        return Err(Error::invalid("pd", format!("must be >= 0, got {pd}")));
    }
    let mut out = Vec::with_capacity(td_ms.len() * te_ms.len());
    for &td in td_ms {
        let recovery = 1.0 - (-td / t1).exp();
        for &te in te_ms {
            out.push(pd * recovery * (-te / t2).exp());
        }
    }
    Ok(out)
}

/// Unit-normalized signal atoms on a T1 x T2 grid, t1-major.
#[derive(Debug, Clone)]
pub struct MdmeDictionary {
    t1_grid: Vec<f64>,
    t2_grid: Vec<f64>,
    td_ms: Vec<f64>,
    te_ms: Vec<f64>,
    atoms: Vec<f64>,
    /// Euclidean norm of each atom's model signal at pd = 1, before normalization.
    model_norms: Vec<f64>,
}

impl MdmeDictionary {
    pub fn t1_grid(&self) -> &[f64] {
        &self.t1_grid
    }

    pub fn t2_grid(&self) -> &[f64] {
        &self.t2_grid
    }

    pub fn td_ms(&self) -> &[f64] {
        &self.td_ms
    }

    pub fn te_ms(&self) -> &[f64] {
        &self.te_ms
    }

    pub fn n_atoms(&self) -> usize {
        self.model_norms.len()
    }

    pub fn n_measurements(&self) -> usize {
        self.td_ms.len() * self.te_ms.len()
    }

    pub fn atom(&self, index: usize) -> &[f64] {
        let m = self.n_measurements();
        &self.atoms[index * m..(index + 1) * m]
    }

    pub fn model_norm(&self, index: usize) -> f64 {
        self.model_norms[index]
    }

    pub fn atom_index(&self, t1_index: usize, t2_index: usize) -> usize {
        t1_index * self.t2_grid.len() + t2_index
    }

    /// `(t1_index, t2_index)` of a flat atom index.
    pub fn grid_indices(&self, index: usize) -> (usize, usize) {
        (index / self.t2_grid.len(), index % self.t2_grid.len())
    }

    /// Best match for one signal, or `None` for an all-zero signal.
    ///
    /// Ties resolve to the lowest flat index (lowest t1, then t2).
    pub fn match_signal(&self, signal: &[f64]) -> Result<Option<AtomMatch>> {
        let m = self.n_measurements();
        if signal.len() != m {
            return Err(Error::invalid(
                "signal",
                format!("length {} does not match dictionary atom length {m}", signal.len()),
            ));
        }
        let norm = l2(signal);
        if norm == 0.0 || !norm.is_finite() {
            return Ok(None);
        }
        let unit: Vec<f64> = signal.iter().map(|v| v / norm).collect();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, atom) in self.atoms.chunks_exact(m).enumerate() {
            let score = dot(&unit, atom);
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        let (t1_index, t2_index) = self.grid_indices(best);
        let pd = dot(signal, self.atom(best)) / self.model_norms[best];
        Ok(Some(AtomMatch {
            index: best,
            t1_index,
            t2_index,
            t1: self.t1_grid[t1_index],
            t2: self.t2_grid[t2_index],
            pd,
            score: best_score,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomMatch {
    pub index: usize,
    pub t1_index: usize,
    pub t2_index: usize,
    pub t1: f64,
    pub t2: f64,
    pub pd: f64,
    /// Inner product of the unit signal with the unit atom.
    pub score: f64,
}

pub fn build_dictionary(t1_range: GridRange, t2_range: GridRange, td_ms: &[f64], te_ms: &[f64]) -> Result<MdmeDictionary> {
    if td_ms.is_empty() || te_ms.is_empty() {
        return Err(Error::invalid("sequence", "need at least one delay and one echo time"));
    }
    if td_ms.iter().chain(te_ms).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("sequence", "delay and echo times must be finite and >= 0"));
    }
    let t1_grid = t1_range.values()?;
    let t2_grid = t2_range.values()?;
    let m = td_ms.len() * te_ms.len();
    let n = t1_grid.len() * t2_grid.len();
    let mut atoms = Vec::with_capacity(n * m);
    let mut model_norms = Vec::with_capacity(n);
    for &t1 in &t1_grid {
        for &t2 in &t2_grid {
            let s = mdme_signal(t1, t2, 1.0, td_ms, te_ms)?;
            let norm = l2(&s);
            if norm == 0.0 {
                return Err(Error::invalid(
                    "sequence",
                    format!("model signal vanishes at t1={t1}, t2={t2}"),
                ));
            }
            atoms.extend(s.iter().map(|v| v / norm));
            model_norms.push(norm);
        }
    }
    Ok(MdmeDictionary {
        t1_grid,
        t2_grid,
        td_ms: td_ms.to_vec(),
        te_ms: te_ms.to_vec(),
        atoms,
        model_norms,
    })
}

/// Dictionary over the reference protocol: 296 x 496 atoms of length 8.
pub fn protocol_dictionary() -> MdmeDictionary {
    build_dictionary(PROTOCOL_T1, PROTOCOL_T2, &PROTOCOL_TD_MS, &PROTOCOL_TE_MS)
        .expect("reference protocol grids are valid")
}

/// Multi-contrast signal volume: one length-`n_meas` vector per pixel, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MdmeVolume {
    ny: usize,
    nx: usize,
    n_meas: usize,
    data: Vec<f64>,
}

impl MdmeVolume {
    pub fn new(ny: usize, nx: usize, n_meas: usize, data: Vec<f64>) -> Result<Self> {
        if ny == 0 || nx == 0 || n_meas == 0 || data.len() != ny * nx * n_meas {
            return Err(Error::invalid(
                "volume",
                format!("{} values do not fill {ny}x{nx}x{n_meas}", data.len()),
            ));
        }
        Ok(Self { ny, nx, n_meas, data })
    }

    pub fn zeros(ny: usize, nx: usize, n_meas: usize) -> Self {
        Self {
            ny,
            nx,
            n_meas,
            data: vec![0.0; ny * nx * n_meas],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn signal(&self, y: usize, x: usize) -> &[f64] {
        let i = (y * self.nx + x) * self.n_meas;
        &self.data[i..i + self.n_meas]
    }

    pub fn signals(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_meas)
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Forward-simulates the volume from parameter maps (t1 required).
    pub fn simulate(maps: &ParameterMaps, td_ms: &[f64], te_ms: &[f64]) -> Result<Self> {
        let t1 = maps
            .t1()
            .ok_or_else(|| Error::invalid("t1", "maps carry no T1 channel"))?;
        let (ny, nx) = maps.shape();
        let n_meas = td_ms.len() * te_ms.len();
        let mut data = Vec::with_capacity(ny * nx * n_meas);
        for i in 0..ny * nx {
            let pd = maps.pd().data()[i];
            if pd == 0.0 {
                data.extend(std::iter::repeat_n(0.0, n_meas));
            } else {
                data.extend(mdme_signal(t1.data()[i], maps.t2().data()[i], pd, td_ms, te_ms)?);
            }
        }
        Self::new(ny, nx, n_meas, data)
    }
}

/// Per-pixel dictionary fit. Pixels whose signal norm does not exceed
/// `1e-9 * max norm` become background (`pd = t1 = t2 = 0`).
pub fn match_maps(volume: &MdmeVolume, dict: &MdmeDictionary) -> Result<ParameterMaps> {
    if volume.n_meas != dict.n_measurements() {
        return Err(Error::invalid(
            "volume",
            format!(
                "signal length {} does not match dictionary atom length {}",
                volume.n_meas,
                dict.n_measurements()
            ),
        ));
    }
    let norms: Vec<f64> = volume.signals().map(l2).collect();
    let eps = BACKGROUND_REL_EPS * norms.iter().cloned().fold(0.0, f64::max);

    let fits: Vec<Option<AtomMatch>> = volume
        .data
        .par_chunks_exact(volume.n_meas)
        .zip(norms.par_iter())
        .map(|(signal, &norm)| {
            if norm <= eps {
                Ok(None)
            } else {
                dict.match_signal(signal)
            }
        })
        .collect::<Result<_>>()?;

    let n = volume.ny * volume.nx;
    let (mut pd, mut t1, mut t2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, fit) in fits.into_iter().enumerate() {
        // negative projections only arise from noise; treat as background
        if let Some(m) = fit.filter(|m| m.pd > 0.0) {
            pd[i] = m.pd;
            t1[i] = m.t1;
            t2[i] = m.t2;
        }
    }
    ParameterMaps::new(
        RealImage::new(volume.ny, volume.nx, pd)?,
        RealImage::new(volume.ny, volume.nx, t2)?,
        Some(RealImage::new(volume.ny, volume.nx, t1)?),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
