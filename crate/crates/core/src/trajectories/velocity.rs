//! Guidance velocities from single fields, branch pairs and time series of
//! grid snapshots.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wavefield::{local_velocity, BranchState, GridWavefunction, PointerBit};

/// Relative density floor below which the velocity is treated as singular.
pub const NODE_FLOOR: f64 = 1e-10;

/// A velocity field `v(x, t)` that trajectories can be integrated in.
pub trait VelocityField: Sync {
    fn velocity(&self, x: f64, t: f64) -> Result<f64>;
}

/// A static field guides with its own velocity at every time.
impl VelocityField for GridWavefunction {
    fn velocity(&self, x: f64, _t: f64) -> Result<f64> {
        GridWavefunction::velocity(self, x, NODE_FLOOR)
    }
}

/// `(ħ/m) Im(ψ'/ψ)` at `x` with the default node floor.
pub fn bohm_velocity(psi: &GridWavefunction, x: f64) -> Result<f64> {
    psi.velocity(x, NODE_FLOOR)
}

/// Velocity selected by the pointer bit; the coherent case uses `ψ↑ + ψ↓`.
pub fn conditional_velocity(branch: &BranchState, x: f64) -> Result<f64> {
    if let Some(psi) = branch.active() {
        return bohm_velocity(psi, x);
    }
    let (up, down) = (branch.psi_up.values(), branch.psi_down.values());
    let max = up
        .iter()
        .zip(down)
        .map(|(a, b)| (a + b).norm_sqr())
        .fold(0.0, f64::max);
    local_velocity(
        branch.psi_up.grid(),
        branch.psi_up.units(),
        |i| up[i] + down[i],
        x,
        NODE_FLOOR * max,
    )
}

/// Which channel(s) of a multi-branch series guide a particle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Guide {
    Channel(usize),
    /// Coherent sum of all channels.
    Sum,
}

impl Guide {
    /// Channel index for a two-branch series ordered `[up, down]`.
    pub fn from_pointer(bit: PointerBit) -> Self {
        match bit {
            PointerBit::Up => Guide::Channel(0),
            PointerBit::Down => Guide::Channel(1),
            PointerBit::Coherent => Guide::Sum,
        }
    }
}

/// Snapshots of one or more branches at shared, increasing times; values
/// between snapshots are interpolated linearly in time.
#[derive(Clone, Debug)]
pub struct FrameSeries<'a> {
    channels: Vec<&'a [GridWavefunction]>,
    guide: Guide,
    node_floor: f64,
}

impl<'a> FrameSeries<'a> {
    pub fn new(channels: Vec<&'a [GridWavefunction]>, guide: Guide) -> Result<Self> {
        let first = *channels
            .first()
            .ok_or_else(|| Error::invalid("channels", "no channels"))?;
        let head = first.first().ok_or_else(|| Error::invalid("channels", "empty series"))?;
        if first.windows(2).any(|w| w[1].t() <= w[0].t()) {
            return Err(Error::invalid("channels", "snapshot times must increase"));
        }
        for ch in &channels {
            if ch.len() != first.len()
                || ch.iter().zip(first).any(|(a, b)| a.t() != b.t() || a.grid() != head.grid())
            {
                return Err(Error::invalid("channels", "channels differ in times or grids"));
            }
        }
        if let Guide::Channel(c) = guide {
            if c >= channels.len() {
                return Err(Error::invalid("guide", format!("channel {c} does not exist")));
            }
        }
        Ok(Self {
            channels,
            guide,
            node_floor: NODE_FLOOR,
        })
    }

    pub fn single(frames: &'a [GridWavefunction]) -> Result<Self> {
        Self::new(vec![frames], Guide::Channel(0))
    }

    /// Two branches `[up, down]` selected by a pointer bit.
    pub fn branches(up: &'a [GridWavefunction], down: &'a [GridWavefunction], pointer: PointerBit) -> Result<Self> {
        Self::new(vec![up, down], Guide::from_pointer(pointer))
    }

    pub fn with_node_floor(mut self, node_floor: f64) -> Self {
        self.node_floor = node_floor;
        self
    }

    pub fn with_guide(&self, guide: Guide) -> Result<Self> {
        Self::new(self.channels.clone(), guide).map(|s| s.with_node_floor(self.node_floor))
    }

    pub fn time_span(&self) -> (f64, f64) {
        let f = self.channels[0];
        (f[0].t(), f[f.len() - 1].t())
    }

    /// Bracketing frame index and blend weight toward the next frame.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let frames = self.channels[0];
        let (t0, t1) = self.time_span();
        let slack = 1e-9 * (t1 - t0).abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::invalid("t", format!("{t} outside the snapshot span [{t0}, {t1}]")));
        }
        if frames.len() == 1 {
            return Ok((0, 0.0));
        }
        let j = frames.partition_point(|f| f.t() <= t).clamp(1, frames.len() - 1) - 1;
        let (a, b) = (frames[j].t(), frames[j + 1].t());
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        Ok(if w < 1e-12 {
            (j, 0.0)
        } else if w > 1.0 - 1e-12 {
            (j + 1, 0.0)
        } else {
            (j, w)
        })
    }

    fn guided(&self) -> &[&'a [GridWavefunction]] {
        match self.guide {
            Guide::Channel(c) => &self.channels[c..c + 1],
            Guide::Sum => &self.channels,
        }
    }
}

impl VelocityField for FrameSeries<'_> {
    fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        let (j, w) = self.locate(t)?;
        let guided = self.guided();
        let grid = guided[0][j].grid();
        let units = guided[0][j].units();
        // Amplitude scale of the blended (and summed) field for the node test.
        let scale: f64 = guided
            .iter()
            .map(|ch| {
                let a = ch[j].max_density().sqrt();
                if w > 0.0 {
                    (1.0 - w) * a + w * ch[j + 1].max_density().sqrt()
                } else {
                    a
                }
            })
            .sum();
        let floor = self.node_floor * scale * scale;
        if w == 0.0 {
            return local_velocity(
                grid,
                units,
                |i| guided.iter().map(|ch| ch[j].values()[i]).sum::<Complex64>(),
                x,
                floor,
            );
        }
        local_velocity(
            grid,
            units,
            |i| {
                guided
                    .iter()
                    .map(|ch| ch[j].values()[i] * (1.0 - w) + ch[j + 1].values()[i] * w)
                    .sum::<Complex64>()
            },
            x,
            floor,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{Grid, Units};

    fn plane(k: f64, t: f64) -> GridWavefunction {
        let grid = Grid::new(-10.0, 10.0, 0.01).unwrap();
        GridWavefunction::from_fn(grid, t, Units::default(), |x| Complex64::from_polar(1.0, k * x))
    }

    #[test]
    fn pointer_selects_branch() {
        let up = plane(1.2, 0.0);
        let down = plane(-0.7, 0.0);
        let b = BranchState::new(up.clone(), down.clone(), PointerBit::Up).unwrap();
        assert_eq!(conditional_velocity(&b, 0.3).unwrap(), bohm_velocity(&up, 0.3).unwrap());
        let b = BranchState::new(up, down.clone(), PointerBit::Down).unwrap();
        assert_eq!(conditional_velocity(&b, 0.3).unwrap(), bohm_velocity(&down, 0.3).unwrap());
    }

    #[test]
    fn coherent_with_empty_branch_is_single_branch() {
        let up = plane(1.2, 0.0);
        let zero = GridWavefunction::from_fn(*up.grid(), 0.0, Units::default(), |_| Complex64::new(0.0, 0.0));
        let b = BranchState::new(up.clone(), zero, PointerBit::Coherent).unwrap();
        let v = conditional_velocity(&b, -2.0).unwrap();
        assert!((v - bohm_velocity(&up, -2.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn coherent_sum_matches_closed_form() {
        // e^{ikx} + e^{−ikx}/2: Im(ψ'/ψ) = k(1 − 1/4)/|ψ|² with |ψ|² = 5/4 + cos 2kx.
        let k = 1.3;
        let up = plane(k, 0.0);
        let grid = *up.grid();
        let down = GridWavefunction::from_fn(grid, 0.0, Units::default(), |x| Complex64::from_polar(0.5, -k * x));
        let b = BranchState::new(up, down, PointerBit::Coherent).unwrap();
        for &x in &[0.0, 0.4, -1.7] {
            let expected = k * 0.75 / (1.25 + (2.0 * k * x).cos());
            let v = conditional_velocity(&b, x).unwrap();
            assert!((v - expected).abs() < 1e-5, "{x}: {v} vs {expected}");
        }
    }

    #[test]
    fn series_blends_linearly_in_time() {
        let frames = vec![plane(1.0, 0.0), plane(1.0, 1.0)];
        let s = FrameSeries::single(&frames).unwrap();
        assert!((s.velocity(0.2, 0.5).unwrap() - 1.0).abs() < 1e-10);
        assert!(s.velocity(0.2, 1.5).is_err());
        let other = vec![plane(2.0, 0.0), plane(2.0, 1.0)];
        let pair = FrameSeries::branches(&frames, &other, PointerBit::Down).unwrap();
        assert!((pair.velocity(0.2, 0.25).unwrap() - 2.0).abs() < 1e-10);
    }
}
