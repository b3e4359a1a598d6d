use std::fmt;

use nalgebra::DVector;

use super::ALIGNMENT_TOLERANCE;
use crate::auxiliary::AuxTag;
use crate::error::{Error, Result};

/// Channel labels `prefix0, prefix1, …`.
pub fn channel_labels(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

/// Number of grid intervals in `length`, or an error if `length` is not a
/// multiple of `step` within [`ALIGNMENT_TOLERANCE`].
pub fn grid_count(length: f64, step: f64) -> Result<usize> {
    aligned("length", length, step)
}

fn aligned(what: &'static str, value: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidTrajectory(format!("grid step must be positive, got {step}")));
    }
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::MisalignedOffset { what, value, step });
    }
    let count = (value / step).round();
    if (count * step - value).abs() > ALIGNMENT_TOLERANCE * value.max(step) {
        return Err(Error::MisalignedOffset { what, value, step });
    }
    Ok(count as usize)
}

/// A sampled curve on `[0, length]` together with its time shift `ϑ`.
///
/// Node `i` sits at local time `i·step` and absolute time `i·step − ϑ`. The
/// shift is stored as a base value minus an integer number of steps so that
/// restriction changes it by integer arithmetic only.
#[derive(Clone)]
pub struct Trajectory {
    step: f64,
    base_shift: f64,
    shift_steps: i64,
    nodes: usize,
    labels: Vec<String>,
    values: Vec<f64>,
    aux: Vec<AuxTag>,
    token: Option<u32>,
}

impl Trajectory {
    /// Builds a trajectory from row-major node values (`nodes × labels.len()`).
    pub fn new(step: f64, shift: f64, labels: Vec<String>, nodes: usize, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidTrajectory(format!("grid step must be positive, got {step}")));
        }
        if !shift.is_finite() {
            return Err(Error::InvalidTrajectory("shift must be finite".into()));
        }
        if nodes == 0 {
            return Err(Error::InvalidTrajectory("a trajectory has at least one node".into()));
        }
        if values.len() != nodes * labels.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} values for {} nodes of dimension {}",
                values.len(),
                nodes,
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.contains([',', '\n', '\r']) || l == "t" {
                return Err(Error::InvalidTrajectory(format!("invalid channel label {l:?}")));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidTrajectory(format!("duplicate channel label {l:?}")));
            }
        }
        Ok(Self {
            step,
            base_shift: shift,
            shift_steps: 0,
            nodes,
            labels,
            values,
            aux: Vec::new(),
            token: None,
        })
    }

    /// Samples `f(local time)` on the grid of `[0, length]`.
    pub fn from_fn(
        length: f64,
        step: f64,
        shift: f64,
        labels: Vec<String>,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let nodes = grid_count(length, step)? + 1;
        let dim = labels.len();
        let mut values = Vec::with_capacity(nodes * dim);
        for i in 0..nodes {
            let v = f(i as f64 * step);
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            values.extend(v);
        }
        Self::new(step, shift, labels, nodes, values)
    }

    pub fn constant(length: f64, step: f64, shift: f64, labels: Vec<String>, value: &[f64]) -> Result<Self> {
        let v = value.to_vec();
        Self::from_fn(length, step, shift, labels, move |_| v.clone())
    }

    /// A dimension-0 trajectory carrying a token, the element type of a
    /// constant sheaf.
    pub fn token(token: u32, length: f64, step: f64, shift: f64) -> Result<Self> {
        let nodes = grid_count(length, step)? + 1;
        let mut e = Self::new(step, shift, Vec::new(), nodes, Vec::new())?;
        e.token = Some(token);
        Ok(e)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Number of grid intervals.
    pub fn intervals(&self) -> usize {
        self.nodes - 1
    }

    pub fn length(&self) -> f64 {
        self.intervals() as f64 * self.step
    }

    /// The time shift `ϑ`.
    pub fn shift(&self) -> f64 {
        self.base_shift - self.shift_steps as f64 * self.step
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn token_id(&self) -> Option<u32> {
        self.token
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn node_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.node(i))
    }

    pub fn first(&self) -> &[f64] {
        self.node(0)
    }

    pub fn last(&self) -> &[f64] {
        self.node(self.nodes - 1)
    }

    pub fn local_time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// Absolute time `t − ϑ` of node `i`.
    pub fn abs_time(&self, i: usize) -> f64 {
        self.stage_time(i, 0.0)
    }

    /// Absolute time of `i + fraction` grid steps; used by one-step methods.
    pub(crate) fn stage_time(&self, i: usize, fraction: f64) -> f64 {
        ((i as i64 + self.shift_steps) as f64 + fraction) * self.step - self.base_shift
    }

    pub fn aux(&self) -> &[AuxTag] {
        &self.aux
    }

    pub fn with_aux(mut self, aux: Vec<AuxTag>) -> Result<Self> {
        if let Some(t) = aux.iter().find(|t| t.nodes() != self.nodes) {
            return Err(Error::InvalidTrajectory(format!(
                "aux tag has {} nodes, trajectory has {}",
                t.nodes(),
                self.nodes
            )));
        }
        self.aux = aux;
        Ok(self)
    }

    /// Same grid and shift bookkeeping, new channels.
    pub fn with_values(&self, labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let mut e = Self::new(self.step, self.base_shift, labels, self.nodes, values)?;
        e.shift_steps = self.shift_steps;
        Ok(e)
    }

    pub fn channel_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownChannel(label.to_string()))
    }

    pub fn channel(&self, label: &str) -> Result<Vec<f64>> {
        let c = self.channel_index(label)?;
        Ok((0..self.nodes).map(|i| self.node(i)[c]).collect())
    }

    /// Projection onto the named channels, in the given order.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| self.channel_index(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.nodes * idx.len());
        for i in 0..self.nodes {
            let row = self.node(i);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        let labels = labels.iter().map(|l| l.as_ref().to_string()).collect();
        self.with_values(labels, values)
    }

    /// Node-wise map `(absolute time, node index, node values) → new node`.
    /// Preserves length and shift; drops aux tags.
    pub fn map_nodes(
        &self,
        labels: Vec<String>,
        f: impl Fn(f64, usize, &[f64]) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        let dim = labels.len();
        let mut values = Vec::with_capacity(self.nodes * dim);
        for i in 0..self.nodes {
            let row = f(self.abs_time(i), i, self.node(i))?;
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend(row);
        }
        self.with_values(labels, values)
    }

    /// Appends channels, keeping aux tags.
    pub fn append_channels(&self, labels: Vec<String>, extra: &[f64]) -> Result<Self> {
        let k = labels.len();
        if extra.len() != k * self.nodes {
            return Err(Error::DimensionMismatch {
                expected: k * self.nodes,
                got: extra.len(),
            });
        }
        let mut all_labels = self.labels.clone();
        all_labels.extend(labels);
        let mut values = Vec::with_capacity(self.nodes * all_labels.len());
        for i in 0..self.nodes {
            values.extend_from_slice(self.node(i));
            values.extend_from_slice(&extra[i * k..(i + 1) * k]);
        }
        let mut e = self.with_values(all_labels, values)?;
        e.aux = self.aux.clone();
        Ok(e)
    }

    /// Sup-norm distance of the channel values; infinite when the two
    /// trajectories are not comparable (grid, dimension or token differ).
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        if self.nodes != other.nodes || self.dim() != other.dim() || self.token != other.token {
            return f64::INFINITY;
        }
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, nan_max)
    }

    /// Largest absolute value over all channels and nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, nan_max)
    }
}

/// `max` that propagates NaN, so a NaN defect never passes a tolerance check.
pub fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.step == other.step
            && self.shift() == other.shift()
            && self.nodes == other.nodes
            && self.labels == other.labels
            && self.values == other.values
            && self.aux == other.aux
            && self.token == other.token
    }
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("length", &self.length())
            .field("shift", &self.shift())
            .field("step", &self.step)
            .field("nodes", &self.nodes)
            .field("labels", &self.labels)
            .field("aux", &self.aux.iter().map(|a| a.kind().name()).collect::<Vec<_>>())
            .field("token", &self.token)
            .finish()
    }
}

/// The restriction map: the piece of length `new_length` starting at
/// `offset`, with shift decreased by `offset`.
pub fn restrict(e: &Trajectory, new_length: f64, offset: f64) -> Result<Trajectory> {
    if !(new_length >= 0.0) || !(offset >= 0.0) || new_length + offset > e.length() + 1e-12 {
        return Err(Error::OutOfRange {
            new_length,
            offset,
            length: e.length(),
        });
    }
    let start = aligned("offset", offset, e.step)?;
    let count = aligned("new_length", new_length, e.step)?;
    if start + count > e.intervals() {
        return Err(Error::OutOfRange {
            new_length,
            offset,
            length: e.length(),
        });
    }
    Ok(slice(e, start, count + 1))
}

pub(crate) fn slice(e: &Trajectory, start: usize, nodes: usize) -> Trajectory {
    let d = e.dim();
    Trajectory {
        step: e.step,
        base_shift: e.base_shift,
        shift_steps: e.shift_steps + start as i64,
        nodes,
        labels: e.labels.clone(),
        values: e.values[start * d..(start + nodes) * d].to_vec(),
        aux: e.aux.iter().map(|a| a.slice(start, nodes)).collect(),
        token: e.token,
    }
}

/// Restriction at an arbitrary offset, resampling onto the shifted grid with
/// four-point cubic Lagrange interpolation. Not exact; aux tags are dropped.
pub fn restrict_interpolated(e: &Trajectory, new_length: f64, offset: f64) -> Result<Trajectory> {
    if !(new_length >= 0.0) || !(offset >= 0.0) || new_length + offset > e.length() + 1e-12 {
        return Err(Error::OutOfRange {
            new_length,
            offset,
            length: e.length(),
        });
    }
    if let Ok(start) = aligned("offset", offset, e.step) {
        if let Ok(count) = aligned("new_length", new_length, e.step) {
            if start + count <= e.intervals() {
                let mut r = slice(e, start, count + 1);
                r.aux.clear();
                return Ok(r);
            }
        }
    }
    let count = aligned("new_length", new_length, e.step)?;
    let d = e.dim();
    let last = e.intervals();
    let mut values = Vec::with_capacity((count + 1) * d);
    for j in 0..=count {
        let pos = ((offset + j as f64 * e.step) / e.step).min(last as f64);
        values.extend(interpolate_cubic(e, pos));
    }
    let mut r = Trajectory::new(e.step, e.shift() - offset, e.labels.clone(), count + 1, values)?;
    r.token = e.token;
    Ok(r)
}

fn interpolate_cubic(e: &Trajectory, pos: f64) -> Vec<f64> {
    let d = e.dim();
    let last = e.intervals();
    if last == 0 {
        return e.node(0).to_vec();
    }
    if last < 3 {
        // Too few nodes for a cubic; fall back to linear.
        let i = (pos.floor() as usize).min(last - 1);
        let s = pos - i as f64;
        return (0..d)
            .map(|c| (1.0 - s) * e.node(i)[c] + s * e.node(i + 1)[c])
            .collect();
    }
    let base = (pos.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
    let xs = [0.0, 1.0, 2.0, 3.0];
    let x = pos - base as f64;
    let weights: Vec<f64> = (0..4)
        .map(|k| {
            (0..4)
                .filter(|&m| m != k)
                .map(|m| (x - xs[m]) / (xs[k] - xs[m]))
                .product()
        })
        .collect();
    (0..d)
        .map(|c| (0..4).map(|k| weights[k] * e.node(base + k)[c]).sum())
        .collect()
}

/// Glues `left` on `[0, τ]` and `right` on `[0, t − τ]` into one trajectory
/// on `[0, t]` when their grids, shifts and junction values agree.
pub fn glue(left: &Trajectory, right: &Trajectory, tolerance: f64) -> Result<Trajectory> {
    if (left.step - right.step).abs() > ALIGNMENT_TOLERANCE * left.step {
        return Err(Error::GridMismatch(format!(
            "steps {} and {}",
            left.step, right.step
        )));
    }
    if left.labels != right.labels {
        return Err(Error::GridMismatch(format!(
            "channels {:?} and {:?}",
            left.labels, right.labels
        )));
    }
    if left.aux.len() != right.aux.len() {
        return Err(Error::GridMismatch("aux tags differ in number".into()));
    }
    let expected = left.shift() - left.length();
    if !((right.shift() - expected).abs() <= tolerance) {
        return Err(Error::ShiftMismatch {
            right: right.shift(),
            expected,
        });
    }
    let mut defect = if left.token == right.token {
        left.last()
            .iter()
            .zip(right.first())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, nan_max)
    } else {
        f64::INFINITY
    };
    for (a, b) in left.aux.iter().zip(&right.aux) {
        match a.junction_defect(b) {
            Some(d) => defect = nan_max(defect, d),
            None => return Err(Error::GridMismatch("aux tags of different families".into())),
        }
    }
    if !(defect <= tolerance) {
        return Err(Error::JunctionMismatch { defect, tolerance });
    }
    let d = left.dim();
    let mut values = left.values.clone();
    values.extend_from_slice(&right.values[d..]);
    Ok(Trajectory {
        step: left.step,
        base_shift: left.base_shift,
        shift_steps: left.shift_steps,
        nodes: left.nodes + right.nodes - 1,
        labels: left.labels.clone(),
        values,
        aux: left.aux.iter().zip(&right.aux).map(|(a, b)| a.concat(b)).collect(),
        token: left.token,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auxiliary::AuxHamiltonian;
    use crate::signal::Signal;

    fn ramp(length: f64, step: f64, shift: f64) -> Trajectory {
        Trajectory::from_fn(length, step, shift, channel_labels("x", 2), |t| vec![t, -2.0 * t]).unwrap()
    }

    #[test]
    fn restrict_takes_the_indexed_piece() {
        let e = Trajectory::new(0.5, 0.0, channel_labels("x", 1), 3, vec![10.0, 11.0, 12.0]).unwrap();
        let r = restrict(&e, 0.5, 0.5).unwrap();
        assert_eq!(r.values(), &[11.0, 12.0]);
        assert_eq!(r.shift(), -0.5);
        assert_eq!(r.length(), 0.5);
    }

    #[test]
    fn restrict_to_full_length_is_identity() {
        let e = ramp(1.0, 0.01, 0.3);
        assert_eq!(restrict(&e, e.length(), 0.0).unwrap(), e);
    }

    #[test]
    fn restrict_closed_form_blowup_solution() {
        // x(t) = 1/(1-t) on [0, 0.5]
        let e = Trajectory::from_fn(0.5, 0.01, 0.0, channel_labels("x", 1), |t| vec![1.0 / (1.0 - t)]).unwrap();
        let r = restrict(&e, 0.25, 0.25).unwrap();
        assert!((r.first()[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((r.shift() + 0.25).abs() < 1e-15);
        assert_eq!(r.nodes(), 26);
    }

    #[test]
    fn restrict_errors() {
        let e = ramp(1.0, 0.1, 0.0);
        assert!(matches!(restrict(&e, 0.6, 0.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(
            restrict(&e, 0.2, 0.05),
            Err(Error::MisalignedOffset { what: "offset", .. })
        ));
        assert!(matches!(
            restrict(&e, 0.25, 0.1),
            Err(Error::MisalignedOffset { what: "new_length", .. })
        ));
    }

    #[test]
    fn interpolated_restriction_is_close_for_smooth_data() {
        let e = Trajectory::from_fn(1.0, 0.01, 0.0, channel_labels("x", 1), |t| vec![t.sin()]).unwrap();
        let r = restrict_interpolated(&e, 0.5, 0.123).unwrap();
        assert!((r.shift() + 0.123).abs() < 1e-15);
        for i in 0..r.nodes() {
            let t = 0.123 + r.local_time(i);
            assert!((r.node(i)[0] - t.sin()).abs() < 1e-8, "node {i}");
        }
        // aligned offsets fall back to the exact slice
        let exact = restrict_interpolated(&e, 0.5, 0.2).unwrap();
        assert_eq!(exact, restrict(&e, 0.5, 0.2).unwrap());
    }

    #[test]
    fn glue_constants() {
        let c = [2.5];
        let l = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &c).unwrap();
        let r = Trajectory::constant(2.0, 0.25, -1.0, channel_labels("x", 1), &c).unwrap();
        let g = glue(&l, &r, 1e-9).unwrap();
        assert_eq!(g, Trajectory::constant(3.0, 0.25, 0.0, channel_labels("x", 1), &c).unwrap());
    }

    #[test]
    fn glue_rejects_mismatched_junction() {
        let l = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &[1.0]).unwrap();
        let r = Trajectory::constant(1.0, 0.25, -1.0, channel_labels("x", 1), &[1.1]).unwrap();
        assert!(matches!(glue(&l, &r, 1e-9), Err(Error::JunctionMismatch { .. })));
    }

    #[test]
    fn glue_rejects_inconsistent_shift() {
        let l = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &[1.0]).unwrap();
        let r = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &[1.0]).unwrap();
        assert!(matches!(glue(&l, &r, 1e-9), Err(Error::ShiftMismatch { .. })));
    }

    #[test]
    fn glue_rejects_other_grids() {
        let l = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &[1.0]).unwrap();
        let r = Trajectory::constant(1.0, 0.5, -1.0, channel_labels("x", 1), &[1.0]).unwrap();
        assert!(matches!(glue(&l, &r, 1e-9), Err(Error::GridMismatch(_))));
        let r = Trajectory::constant(1.0, 0.25, -1.0, channel_labels("y", 1), &[1.0]).unwrap();
        assert!(matches!(glue(&l, &r, 1e-9), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn gluing_a_zero_length_piece_is_identity() {
        let e = ramp(1.0, 0.1, 0.0);
        let point = restrict(&e, 0.0, 0.0).unwrap();
        assert_eq!(point.nodes(), 1);
        assert_eq!(glue(&point, &e, 1e-9).unwrap(), e);
        let end = restrict(&e, 0.0, 1.0).unwrap();
        assert_eq!(glue(&e, &end, 1e-9).unwrap(), e);
    }

    #[test]
    fn aux_tags_follow_restriction_and_gluing() {
        let e = ramp(1.0, 0.1, 0.0);
        let aux = AuxHamiltonian::linear(Signal::sine(1, 1.0, 1.0, 0.0));
        let tag = aux.sample((0..e.nodes()).map(|i| e.abs_time(i)));
        let e = e.with_aux(vec![tag]).unwrap();
        let l = restrict(&e, 0.3, 0.0).unwrap();
        let r = restrict(&e, 0.7, 0.3).unwrap();
        assert_eq!(r.aux()[0].gradient(0, &[0.0])[0], e.aux()[0].gradient(3, &[0.0])[0]);
        assert_eq!(glue(&l, &r, 1e-9).unwrap(), e);
    }

    #[test]
    fn select_and_map_preserve_grid() {
        let e = ramp(1.0, 0.1, 0.7);
        let s = e.select(&["x1"]).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.shift(), e.shift());
        assert_eq!(s.node(3)[0], e.node(3)[1]);
        let m = e.map_nodes(vec!["sum".into()], |_, _, v| Ok(vec![v[0] + v[1]])).unwrap();
        assert_eq!(m.length(), e.length());
        assert!(matches!(e.select(&["nope"]), Err(Error::UnknownChannel(_))));
    }

    #[test]
    fn abs_time_is_local_time_minus_shift() {
        let e = ramp(1.0, 0.25, 0.5);
        assert_eq!(e.abs_time(0), -0.5);
        assert_eq!(e.abs_time(2), 0.0);
        let r = restrict(&e, 0.5, 0.5).unwrap();
        assert_eq!(r.abs_time(0), e.abs_time(2));
    }

    #[test]
    fn invalid_constructions() {
        assert!(Trajectory::new(0.0, 0.0, vec![], 1, vec![]).is_err());
        assert!(Trajectory::new(0.1, 0.0, channel_labels("x", 1), 2, vec![1.0]).is_err());
        assert!(Trajectory::new(0.1, 0.0, vec!["a".into(), "a".into()], 1, vec![1.0, 2.0]).is_err());
        assert!(Trajectory::new(0.1, 0.0, vec!["a,b".into()], 1, vec![1.0]).is_err());
        assert_eq!(grid_count(0.3, 0.1).unwrap(), 3);
        assert!(grid_count(0.33, 0.1).is_err());
    }
}
