//! Echo-train sampling schedules and line-wise k-space assembly.

use std::collections::BTreeMap;
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::KSpace;

/// Assignment of phase-encode lines to echo positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Early echoes take the lines nearest the k-space center.
    #[default]
    CenterOut,
}

/// Fully sampled (Nyquist) Cartesian FSE schedule: every phase-encode line
/// is acquired exactly once, at one `(tr, echo)` slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSchedule {
    n_pe: usize,
    etl: usize,
    esp_ms: f64,
    ordering: Ordering,
    /// `lines[tr * etl + echo]`
    lines: Vec<usize>,
    /// inverse of `lines`: `slot_of[line] = (tr, echo)`
    slot_of: Vec<(usize, usize)>,
}

/// Builds a center-out schedule.
///
/// Lines are sorted by distance from `n_pe / 2` (ties: lower index first) and
/// cut into `etl` bands of `n_tr` lines. Band `e` belongs to echo `e`, and TR
/// `t` takes the `t`-th line of each band.
pub fn build_schedule(n_pe: usize, etl: usize, esp_ms: f64, ordering: Ordering) -> Result<AcquisitionSchedule> {
    if n_pe == 0 || etl == 0 {
        return Err(Error::invalid("schedule", format!("n_pe={n_pe} and etl={etl} must be positive")));
    }
    if !n_pe.is_multiple_of(etl) {
        return Err(Error::invalid("etl", format!("{etl} does not divide {n_pe} phase-encode lines")));
    }
    if !(esp_ms > 0.0 && esp_ms.is_finite()) {
        return Err(Error::invalid("esp_ms", format!("must be > 0, got {esp_ms}")));
    }
    let n_tr = n_pe / etl;
    let center = n_pe / 2;
    let mut sorted: Vec<usize> = (0..n_pe).collect();
    match ordering {
        Ordering::CenterOut => sorted.sort_by_key(|&k| (k.abs_diff(center), k)),
    }

    let mut lines = vec![0; n_pe];
    let mut slot_of = vec![(0, 0); n_pe];
    for e in 0..etl {
        for t in 0..n_tr {
            let line = sorted[e * n_tr + t];
            lines[t * etl + e] = line;
            slot_of[line] = (t, e);
        }
    }
    Ok(AcquisitionSchedule {
        n_pe,
        etl,
        esp_ms,
        ordering,
        lines,
        slot_of,
    })
}

impl AcquisitionSchedule {
    pub fn n_pe(&self) -> usize {
        self.n_pe
    }

    pub fn etl(&self) -> usize {
        self.etl
    }

    pub fn n_tr(&self) -> usize {
        self.n_pe / self.etl
    }

    pub fn esp_ms(&self) -> f64 {
        self.esp_ms
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    /// Phase-encode line acquired at echo `echo` of repetition `tr`.
    pub fn line_of(&self, tr: usize, echo: usize) -> usize {
        assert!(tr < self.n_tr() && echo < self.etl, "slot ({tr}, {echo}) out of range");
        self.lines[tr * self.etl + echo]
    }

    /// `(tr, echo)` at which `line` is acquired.
    pub fn slot_of(&self, line: usize) -> (usize, usize) {
        self.slot_of[line]
    }

    pub fn te_ms(&self, echo: usize) -> f64 {
        (echo + 1) as f64 * self.esp_ms
    }

    pub fn center_line(&self) -> usize {
        self.n_pe / 2
    }

    /// All lines owned by one echo, in TR order.
    pub fn band(&self, echo: usize) -> Vec<usize> {
        (0..self.n_tr()).map(|t| self.line_of(t, echo)).collect()
    }

    /// Audit table `tr,echo,line,te_ms`, header included.
    pub fn to_table(&self) -> String {
        let mut out = String::from("tr,echo,line,te_ms\n");
        for t in 0..self.n_tr() {
            for e in 0..self.etl {
                out.push_str(&format!("{t},{e},{},{}\n", self.line_of(t, e), self.te_ms(e)));
            }
        }
        out
    }
}

/// Phase-encode rows keyed by line index, each appearing at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampledLines {
    rows: BTreeMap<usize, Vec<Complex64>>,
}

impl SampledLines {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, line: usize, row: Vec<Complex64>) -> Result<()> {
        if self.rows.contains_key(&line) {
            return Err(Error::DuplicateLine(line));
        }
        self.rows.insert(line, row);
        Ok(())
    }

    /// Copies row `line` of `ksp`.
    pub fn take_from(&mut self, ksp: &KSpace, line: usize) -> Result<()> {
        if line >= ksp.ny() {
            return Err(Error::LineOutOfRange { index: line, n_pe: ksp.ny() });
        }
        self.insert(line, ksp.row(line).to_vec())
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[Complex64])> {
        self.rows.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Rows acquired during repetition `tr`, all read from the same `ksp`.
pub fn sample_lines(ksp: &KSpace, schedule: &AcquisitionSchedule, tr: usize) -> Result<SampledLines> {
    if tr >= schedule.n_tr() {
        return Err(Error::invalid("tr", format!("{tr} out of range for {} TRs", schedule.n_tr())));
    }
    if ksp.ny() != schedule.n_pe() {
        return Err(Error::Shape {
            expected: (schedule.n_pe(), ksp.nx()),
            actual: ksp.shape(),
        });
    }
    let mut out = SampledLines::new();
    for e in 0..schedule.etl() {
        out.take_from(ksp, schedule.line_of(tr, e))?;
    }
    Ok(out)
}

/// Places every sampled row at its index. The union of `parts` must cover
/// `0..ny` exactly once.
pub fn assemble_kspace<'a>(parts: impl IntoIterator<Item = &'a SampledLines>, ny: usize, nx: usize) -> Result<KSpace> {
    let mut out = KSpace::zeros(ny, nx);
    let mut filled = vec![false; ny];
    for part in parts {
        for (line, row) in part.rows() {
            if line >= ny {
                return Err(Error::LineOutOfRange { index: line, n_pe: ny });
            }
            if filled[line] {
                return Err(Error::DuplicateLine(line));
            }
            if row.len() != nx {
                return Err(Error::invalid("row", format!("line {line} has {} samples, expected {nx}", row.len())));
            }
            out.row_mut(line).copy_from_slice(row);
            filled[line] = true;
        }
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(Error::MissingLine(missing));
    }
    out.ensure_finite()?;
    Ok(out)
}

/// Splits `0..n_pe` into `n_segments` contiguous blocks in natural order,
/// sizes differing by at most one with the larger blocks first.
pub fn linear_segments(n_pe: usize, n_segments: usize) -> Result<Vec<Range<usize>>> {
    if n_segments == 0 || n_segments > n_pe {
        return Err(Error::invalid(
            "n_segments",
            format!("need 1 <= n_segments <= n_pe, got {n_segments} for {n_pe} lines"),
        ));
    }
    let base = n_pe / n_segments;
    let extra = n_pe % n_segments;
    let mut start = 0;
    Ok((0..n_segments)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}
