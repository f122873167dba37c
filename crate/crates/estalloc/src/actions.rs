//! Mapping continuous actor outputs onto legal resource allocations.
//!
//! The actor emits a "virtual action": a real vector in roughly [-1, 1] per
//! dimension. Each scenario maps it deterministically onto an allocation:
//!
//! * Scenario 1 (orthogonal): one entry per sensor, ranked by argsort; the M
//!   largest win channels 1..M. Any strictly monotone transform of the entries
//!   maps to the same allocation.
//! * Scenario 2 (shared / SIC): per sensor, a block of ceil(log2(M+1)) sign
//!   bits (MSB first, positive = 1, exact zero = 0) selects a channel index,
//!   with 0 or > M meaning idle, plus one power entry scaled onto [0, p_max].
//!   A "naive" variant quantizes a single entry into M+1 levels instead.
//! * Scenario 3 (combining): per sensor, M channel weights plus a total power,
//!   normalized so the row spends exactly the requested total.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// A validated-by-construction resource allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum ResourceAction {
    /// Scenario 1: exclusive channel per scheduled sensor, full power.
    Assign { channel_of: Vec<Option<usize>> },
    /// Scenario 2: possibly shared channel per sensor, transmit powers in mW.
    AssignPower { channel_of: Vec<Option<usize>>, power_mw: Vec<f64> },
    /// Scenario 3: per-sensor, per-channel power matrix in mW (N by M).
    PowerMatrix { power_mw: DMatrix<f64> },
}

/// The three access scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scenario {
    /// Orthogonal access, one sensor per channel.
    Oma,
    /// Shared channels with successive interference cancellation.
    SicNoma,
    /// Multi-round interference-rejection combining across channels.
    IrcNoma,
}

impl Scenario {
    /// Scenario number used in configs and file names (1, 2, 3).
    pub fn number(self) -> u8 {
        match self {
            Scenario::Oma => 1,
            Scenario::SicNoma => 2,
            Scenario::IrcNoma => 3,
        }
    }

    /// Parses a scenario number.
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Scenario::Oma),
            2 => Ok(Scenario::SicNoma),
            3 => Ok(Scenario::IrcNoma),
            other => Err(Error::InvalidConfig(format!("scenario must be 1..3, got {other}"))),
        }
    }
}

/// Sign bits per sensor in the Scenario 2 encoding: ceil(log2(M+1)).
pub fn bits_per_sensor(m_channels: usize) -> usize {
    (usize::BITS - m_channels.leading_zeros()) as usize
}

/// Width of the virtual action vector for a scenario.
pub fn virtual_dim(scenario: Scenario, n_sensors: usize, m_channels: usize) -> usize {
    match scenario {
        Scenario::Oma => n_sensors,
        Scenario::SicNoma => n_sensors * bits_per_sensor(m_channels) + n_sensors,
        Scenario::IrcNoma => n_sensors * (m_channels + 1),
    }
}

/// Actor output width: a mean and a standard deviation per virtual dimension.
pub fn actor_output_dim(scenario: Scenario, n_sensors: usize, m_channels: usize) -> usize {
    2 * virtual_dim(scenario, n_sensors, m_channels)
}

fn check_virtual(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "virtual action width {} vs expected {expected}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConstraintViolation("virtual action has non-finite entries".into()));
    }
    Ok(())
}

/// Scenario 1: the M highest-ranked sensors get channels 1..M in rank order;
/// ties break toward the lower sensor index.
pub fn map_scenario1(v: &[f64], n_sensors: usize, m_channels: usize) -> Result<ResourceAction> {
    check_virtual(v, n_sensors)?;
    if m_channels > n_sensors {
        return Err(Error::InvalidConfig("need at least as many sensors as channels".into()));
    }
    let mut order: Vec<usize> = (0..n_sensors).collect();
    order.sort_by(|&i, &j| v[j].partial_cmp(&v[i]).expect("checked finite").then(i.cmp(&j)));
    let mut channel_of = vec![None; n_sensors];
    for (rank, &sensor) in order.iter().take(m_channels).enumerate() {
        channel_of[sensor] = Some(rank);
    }
    Ok(ResourceAction::Assign { channel_of })
}

/// Scenario 2: sign-threshold bit blocks (MSB first) select channels, the
/// trailing N entries scale transmit power onto [0, p_max].
pub fn map_scenario2(
    v: &[f64],
    n_sensors: usize,
    m_channels: usize,
    p_max_mw: f64,
) -> Result<ResourceAction> {
    let bits = bits_per_sensor(m_channels);
    check_virtual(v, n_sensors * bits + n_sensors)?;
    let mut channel_of = Vec::with_capacity(n_sensors);
    for sensor in 0..n_sensors {
        let block = &v[sensor * bits..(sensor + 1) * bits];
        let mut index = 0usize;
        for &entry in block {
            index = (index << 1) | usize::from(entry > 0.0);
        }
        channel_of.push(if index == 0 || index > m_channels { None } else { Some(index - 1) });
    }
    let power_mw = v[n_sensors * bits..]
        .iter()
        .map(|&entry| p_max_mw * (entry.clamp(-1.0, 1.0) + 1.0) / 2.0)
        .collect();
    Ok(ResourceAction::AssignPower { channel_of, power_mw })
}

/// Scenario 2 benchmark mapping: one entry per sensor, uniformly quantized
/// into M+1 levels over [-1, 1]; level 0 idles, level k picks channel k.
/// Transmission is at full power.
pub fn map_scenario2_naive(
    v: &[f64],
    n_sensors: usize,
    m_channels: usize,
    p_max_mw: f64,
) -> Result<ResourceAction> {
    check_virtual(v, n_sensors)?;
    let levels = (m_channels + 1) as f64;
    let channel_of = v
        .iter()
        .map(|&entry| {
            let level = (((entry.clamp(-1.0, 1.0) + 1.0) / 2.0 * levels) as usize).min(m_channels);
            if level == 0 {
                None
            } else {
                Some(level - 1)
            }
        })
        .collect();
    Ok(ResourceAction::AssignPower { channel_of, power_mw: vec![p_max_mw; n_sensors] })
}

/// Scenario 3: per sensor, M channel weights followed by one total-power
/// entry; the row allocates the total proportionally to the weights. An
/// all-zero weight row transmits nothing.
pub fn map_scenario3(
    v: &[f64],
    n_sensors: usize,
    m_channels: usize,
    p_max_mw: f64,
) -> Result<ResourceAction> {
    check_virtual(v, n_sensors * (m_channels + 1))?;
    let mut power_mw = DMatrix::zeros(n_sensors, m_channels);
    for sensor in 0..n_sensors {
        let row = &v[sensor * (m_channels + 1)..(sensor + 1) * (m_channels + 1)];
        let weights: Vec<f64> = row[..m_channels]
            .iter()
            .map(|&entry| (entry.clamp(-1.0, 1.0) + 1.0) / 2.0)
            .collect();
        let total = p_max_mw * (row[m_channels].clamp(-1.0, 1.0) + 1.0) / 2.0;
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum > 0.0 && total > 0.0 {
            for (ch, &weight) in weights.iter().enumerate() {
                power_mw[(sensor, ch)] = total * weight / weight_sum;
            }
        }
    }
    Ok(ResourceAction::PowerMatrix { power_mw })
}

/// Maps a virtual action for any scenario.
pub fn map_virtual(
    scenario: Scenario,
    v: &[f64],
    n_sensors: usize,
    m_channels: usize,
    p_max_mw: f64,
) -> Result<ResourceAction> {
    match scenario {
        Scenario::Oma => map_scenario1(v, n_sensors, m_channels),
        Scenario::SicNoma => map_scenario2(v, n_sensors, m_channels, p_max_mw),
        Scenario::IrcNoma => map_scenario3(v, n_sensors, m_channels, p_max_mw),
    }
}
