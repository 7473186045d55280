//! Per-slot joint optimization of RB assignment, transmit power and UAV position.
//!
//! The mixed-integer problem is relaxed (assignment in `[0, 1]`) and solved by
//! block coordinate ascent over three blocks:
//!
//! 1. assignment for fixed power and position ([`solve_rb_allocation`]),
//! 2. power for fixed assignment and position ([`solve_power`]),
//! 3. horizontal position for fixed assignment and power ([`solve_position`]),
//!
//! followed by threshold rounding and one more power pass at the binary
//! assignment ([`successive_maximization`]).
//!
//! Every user must receive `sum_b r_u^b >= 8 * beta * E[L_u] / eps`, the linear
//! surrogate of the outage constraint obtained from Markov's inequality.
//!
//! The power cost is counted as `sum a * p`. At a binary assignment with no
//! power on unassigned pairs this equals the plain `sum p`; in the relaxed
//! problem it makes an unassigned pair free, so the power matrix can carry
//! the power an RB would get if it moved to another user.

mod bcd;
mod eval;
mod feasibility;
mod lp;
mod position;
mod power;
mod rb;
mod reassign;
mod rounding;
mod simplex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Position2D, Position3D};
use crate::error::{Error, Result};

pub use bcd::{solve_at_position, successive_maximization};
pub use eval::{objective, required_rate, Evaluator};
pub use feasibility::{feasibility_phase, FeasibilityResult};
pub use position::{position_gradient, solve_position};
pub use power::{max_min_power, solve_power, PowerSolution};
pub use rb::{solve_rb_allocation, RbSolution};
pub use rounding::round_allocation;
pub use simplex::project_capped_simplex;

/// Axis-aligned rectangle the UAV may hover over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    /// `[0, width] x [0, height]`.
    pub fn sized(width: f64, height: f64) -> Self {
        Self::new(0.0, 0.0, width, height)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Position2D {
        Position2D::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, p: Position2D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn clamp(&self, p: Position2D) -> Position2D {
        Position2D::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max >= self.x_min && self.y_max >= self.y_min)
            || !self.width().is_finite()
            || !self.height().is_finite()
        {
            return Err(Error::invalid(format!("degenerate coverage rectangle {self:?}")));
        }
        Ok(())
    }
}

/// One optimization epoch: everything the solver needs for a single slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub users: Vec<Position2D>,
    pub channel: ChannelParams,
    pub num_rbs: usize,
    /// Power budget in W.
    pub total_power: f64,
    /// URLLC packet size in bytes.
    pub packet_size: f64,
    pub outage_eps: f64,
    /// Expected arrivals per user in packets per slot.
    pub predicted_loads: Vec<f64>,
    pub coverage: Rect,
    pub altitude: f64,
    /// Rate/power tradeoff weight in (bit/s)/W.
    pub tradeoff_zeta: f64,
    /// Small-scale power `|rho|^2` per (user, RB). All ones plans on the
    /// expected channel; sampled values evaluate a fading realization.
    #[serde(with = "crate::serde_rows")]
    pub fading: DMatrix<f64>,
}

impl ProblemInstance {
    /// Instance on the expected channel (unit small-scale power everywhere).
    #[allow(clippy::too_many_arguments)]
    pub fn expected(
        users: Vec<Position2D>,
        channel: ChannelParams,
        num_rbs: usize,
        total_power: f64,
        packet_size: f64,
        outage_eps: f64,
        predicted_loads: Vec<f64>,
        coverage: Rect,
        altitude: f64,
        tradeoff_zeta: f64,
    ) -> Self {
        let fading = DMatrix::from_element(users.len(), num_rbs, 1.0);
        Self {
            users,
            channel,
            num_rbs,
            total_power,
            packet_size,
            outage_eps,
            predicted_loads,
            coverage,
            altitude,
            tradeoff_zeta,
            fading,
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.coverage.validate()?;
        let u = self.users.len();
        if self.num_rbs == 0 {
            return Err(Error::invalid("at least one RB is required"));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(Error::invalid(format!("total_power must be positive, got {}", self.total_power)));
        }
        if !(self.packet_size > 0.0) {
            return Err(Error::invalid(format!("packet_size must be positive, got {}", self.packet_size)));
        }
        if !(self.outage_eps > 0.0 && self.outage_eps < 1.0) {
            return Err(Error::invalid(format!("outage_eps must lie in (0, 1), got {}", self.outage_eps)));
        }
        if !(self.altitude > 0.0 && self.altitude.is_finite()) {
            return Err(Error::invalid(format!("altitude must be positive, got {}", self.altitude)));
        }
        if !(self.tradeoff_zeta >= 0.0 && self.tradeoff_zeta.is_finite()) {
            return Err(Error::invalid(format!("tradeoff_zeta must be >= 0, got {}", self.tradeoff_zeta)));
        }
        if self.predicted_loads.len() != u {
            return Err(Error::invalid(format!("{} predicted loads for {u} users", self.predicted_loads.len())));
        }
        if self.predicted_loads.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("predicted loads must be finite and non-negative"));
        }
        if self.fading.shape() != (u, self.num_rbs) {
            return Err(Error::invalid(format!(
                "fading matrix is {:?}, expected ({u}, {})",
                self.fading.shape(),
                self.num_rbs
            )));
        }
        if self.fading.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("channel gains must be finite and non-negative"));
        }
        Ok(())
    }
}

/// The decision triple for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// User-by-RB assignment, binary or relaxed to `[0, 1]`.
    #[serde(with = "crate::serde_rows")]
    pub assign: DMatrix<f64>,
    /// User-by-RB transmit power in W.
    #[serde(with = "crate::serde_rows")]
    pub power: DMatrix<f64>,
    pub uav_pos: Position3D,
}

impl Allocation {
    pub fn empty(instance: &ProblemInstance) -> Self {
        let (u, b) = (instance.num_users(), instance.num_rbs);
        let c = instance.coverage.center();
        Self { assign: DMatrix::zeros(u, b), power: DMatrix::zeros(u, b), uav_pos: c.at_altitude(instance.altitude) }
    }

    pub fn is_binary(&self) -> bool {
        self.assign.iter().all(|&a| a == 0.0 || a == 1.0)
    }

    /// `sum a * p` in W.
    pub fn radiated_power(&self) -> f64 {
        self.assign.component_mul(&self.power).sum()
    }

    /// Checks exclusivity, power budget, power box and placement.
    ///
    /// `rel_tol` loosens the budget and exclusivity checks multiplicatively.
    pub fn check(&self, instance: &ProblemInstance, rel_tol: f64) -> Result<()> {
        let shape = (instance.num_users(), instance.num_rbs);
        if self.assign.shape() != shape || self.power.shape() != shape {
            return Err(Error::invalid(format!(
                "allocation shapes {:?}/{:?}, expected {shape:?}",
                self.assign.shape(),
                self.power.shape()
            )));
        }
        if self.assign.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("assignment entries outside [0, 1]"));
        }
        for (b, col) in self.assign.column_iter().enumerate() {
            if col.sum() > 1.0 + rel_tol {
                return Err(Error::invalid(format!("RB {b} assigned {} times", col.sum())));
            }
        }
        let p_max = instance.total_power;
        if self.power.iter().any(|p| !(*p >= 0.0 && *p <= p_max * (1.0 + rel_tol))) {
            return Err(Error::invalid("power entries outside [0, P_max]"));
        }
        let used = self.radiated_power();
        if used > p_max * (1.0 + rel_tol) {
            return Err(Error::invalid(format!("power budget exceeded: {used} > {p_max}")));
        }
        if !instance.coverage.contains(self.uav_pos.horizontal()) {
            return Err(Error::invalid(format!("UAV position {:?} outside coverage", self.uav_pos)));
        }
        if self.uav_pos.altitude != instance.altitude {
            return Err(Error::invalid("UAV altitude differs from the scenario altitude"));
        }
        Ok(())
    }
}

/// Solver tolerances and iteration caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative objective change that ends the outer loop.
    pub bcd_tol: f64,
    pub max_bcd_iters: usize,
    /// First-order residual / feasibility tolerance of the block solvers.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    pub rounding_threshold: f64,
    /// Accepted for older configs; the exact assignment step has no step size.
    pub dual_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bcd_tol: 1e-4,
            max_bcd_iters: 100,
            inner_tol: 1e-6,
            max_inner_iters: 5000,
            rounding_threshold: 0.5,
            dual_step: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("bcd_tol", self.bcd_tol > 0.0),
            ("max_bcd_iters", self.max_bcd_iters > 0),
            ("inner_tol", self.inner_tol > 0.0),
            ("max_inner_iters", self.max_inner_iters > 0),
            ("rounding_threshold", self.rounding_threshold > 0.0 && self.rounding_threshold < 1.0),
            ("dual_step", self.dual_step > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(format!("solver.{name} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

/// One outer iteration, for trace dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Smallest normalized reliability slack.
    pub min_slack: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    /// Binary allocation after rounding and the final power pass.
    pub allocation: Allocation,
    pub objective: f64,
    pub per_user_rate: Vec<f64>,
    /// `sum_b r_u^b - required_rate(u)` in bit/s.
    pub reliability_slack: Vec<f64>,
    pub iterations: usize,
    /// Objective after each outer iteration (entry 0 is the start point).
    pub objective_trace: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub status: SolveStatus,
}
