use nalgebra::DMatrix;

use super::{Allocation, ProblemInstance};
use crate::channel::{path_gain, Position3D, RateModel};
use crate::error::Result;

/// Rate a user needs so that Markov's bound keeps the outage below `eps`:
/// `8 * beta * E[L_u] / eps` in bit/s.
pub fn required_rate(instance: &ProblemInstance, user: usize) -> f64 {
    8.0 * instance.packet_size * instance.predicted_loads[user] / instance.outage_eps
}

/// `sum a * r - zeta * sum a * p`.
pub fn objective(instance: &ProblemInstance, alloc: &Allocation) -> Result<f64> {
    Ok(Evaluator::new(instance)?.objective(alloc))
}

/// Precomputed constants for evaluating allocations of one instance.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub(crate) inst: &'a ProblemInstance,
    pub(crate) model: RateModel,
    pub(crate) required: Vec<f64>,
    /// Per-user scale that turns rate slack into a dimensionless margin.
    pub(crate) scale: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Result<Self> {
        inst.validate()?;
        let model = inst.channel.rate_model()?;
        let required: Vec<f64> = (0..inst.num_users()).map(|u| required_rate(inst, u)).collect();
        let scale = required.iter().map(|r| r.max(inst.channel.rb_bandwidth)).collect();
        Ok(Self { inst, model, required, scale })
    }

    pub fn instance(&self) -> &ProblemInstance {
        self.inst
    }

    pub fn required(&self) -> &[f64] {
        &self.required
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    /// Channel power of every (user, RB) pair with the UAV at `pos`.
    pub fn gains(&self, pos: Position3D) -> DMatrix<f64> {
        let inst = self.inst;
        let path: Vec<f64> = inst.users.iter().map(|&u| path_gain(&inst.channel, pos, u)).collect();
        DMatrix::from_fn(inst.num_users(), inst.num_rbs, |u, b| path[u] * inst.fading[(u, b)])
    }

    /// Rate of each pair if it were fully assigned.
    pub fn pair_rates(&self, power: &DMatrix<f64>, gains: &DMatrix<f64>) -> DMatrix<f64> {
        power.zip_map(gains, |p, g| if p > 0.0 { self.model.rate_at_snr(self.model.snr(p, g)) } else { 0.0 })
    }

    pub fn user_rates(&self, alloc: &Allocation) -> Vec<f64> {
        let gains = self.gains(alloc.uav_pos);
        let rates = self.pair_rates(&alloc.power, &gains);
        row_dot(&alloc.assign, &rates)
    }

    pub fn objective(&self, alloc: &Allocation) -> f64 {
        let rates = self.user_rates(alloc);
        rates.iter().sum::<f64>() - self.inst.tradeoff_zeta * alloc.radiated_power()
    }

    /// `sum_b r_u^b - R_u` in bit/s.
    pub fn slacks(&self, alloc: &Allocation) -> Vec<f64> {
        self.user_rates(alloc).iter().zip(&self.required).map(|(r, q)| r - q).collect()
    }

    pub(crate) fn normalized_slacks(&self, user_rates: &[f64]) -> Vec<f64> {
        user_rates.iter().enumerate().map(|(u, r)| (r - self.required[u]) / self.scale[u]).collect()
    }
}

/// Row sums of the elementwise product.
pub(crate) fn row_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    (0..a.nrows()).map(|u| a.row(u).iter().zip(b.row(u).iter()).map(|(x, y)| x * y).sum()).collect()
}
