//! Finite-state Markov block-fading channels.
//!
//! Each sensor sees M subcarriers, each an independent H-state Markov chain
//! over a shared ladder of channel values. A sensor's joint channel state is
//! the mixed-radix word of its M per-channel states: digit 0 (the least
//! significant, base H) is channel 1. The joint transition matrix is then the
//! Kronecker product of the per-channel matrices, materialized only for
//! certification and only while `H^M` stays under a cap.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;

/// Default cap on the materialized joint state space.
pub const DEFAULT_JOINT_CAP: usize = 4096;

/// How the stored channel values enter a receive model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainKind {
    /// Values are power gains (orthogonal and SIC scenarios).
    Power,
    /// Values are real non-negative amplitudes (combining scenario);
    /// the power-equivalent gain is the square.
    Amplitude,
}

impl GainKind {
    /// Power-equivalent gain of a stored value.
    pub fn power_gain(self, value: f64) -> f64 {
        match self {
            GainKind::Power => value,
            GainKind::Amplitude => value * value,
        }
    }
}

/// The per-channel value ladder shared by all M subcarriers of a sensor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelStateSpace {
    /// Channel values, strictly increasing and positive.
    pub values: Vec<f64>,
    /// Number of subcarriers M.
    pub m_channels: usize,
}

impl ChannelStateSpace {
    /// Builds a space after validating the ladder.
    pub fn new(values: Vec<f64>, m_channels: usize) -> Result<Self> {
        if values.is_empty() || m_channels == 0 {
            return Err(Error::InvalidConfig("need at least one state and one channel".into()));
        }
        if values[0] <= 0.0 || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "channel values must be strictly increasing and positive".into(),
            ));
        }
        Ok(ChannelStateSpace { values, m_channels })
    }

    /// Number of per-channel states H.
    pub fn h(&self) -> usize {
        self.values.len()
    }

    /// `H^M` as a wide integer (the joint space can exceed usize).
    pub fn joint_size_u128(&self) -> u128 {
        (self.h() as u128).pow(self.m_channels as u32)
    }

    /// `H^M` when it fits the materialization cap.
    pub fn joint_size_capped(&self, cap: usize) -> Result<usize> {
        let size = self.joint_size_u128();
        if size > cap as u128 {
            return Err(Error::JointSpaceTooLarge { size, cap });
        }
        Ok(size as usize)
    }

    /// Decodes a joint index into per-channel state digits (digit 0 = channel 1).
    pub fn decode(&self, joint: usize) -> Result<Vec<usize>> {
        let size = self.joint_size_u128();
        if (joint as u128) >= size {
            return Err(Error::IndexOutOfRange { index: joint, size: size.min(usize::MAX as u128) as usize });
        }
        let h = self.h();
        let mut rest = joint;
        Ok((0..self.m_channels)
            .map(|_| {
                let digit = rest % h;
                rest /= h;
                digit
            })
            .collect())
    }

    /// Encodes per-channel state digits into a joint index.
    pub fn encode(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.m_channels {
            return Err(Error::DimensionMismatch(format!(
                "{} digits for {} channels",
                digits.len(),
                self.m_channels
            )));
        }
        let h = self.h();
        let mut joint = 0usize;
        for &d in digits.iter().rev() {
            if d >= h {
                return Err(Error::IndexOutOfRange { index: d, size: h });
            }
            joint = joint * h + d;
        }
        Ok(joint)
    }

    /// Channel values of a joint state, one per subcarrier.
    pub fn gains_of(&self, joint: usize) -> Result<Vec<f64>> {
        Ok(self.decode(joint)?.into_iter().map(|d| self.values[d]).collect())
    }

    /// Channel values for explicit per-channel digits.
    pub fn gains_of_digits(&self, digits: &[usize]) -> Vec<f64> {
        digits.iter().map(|&d| self.values[d]).collect()
    }
}

/// Draws a random row-stochastic H-by-H transition matrix: i.i.d. uniform
/// entries, rows normalized.
pub fn generate_random_transition<R: Rng>(h: usize, rng: &mut R) -> DMatrix<f64> {
    let mut t = DMatrix::from_fn(h, h, |_, _| rng.gen::<f64>());
    for mut row in t.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        row /= sum;
    }
    t
}

/// One sensor's fading process: M independent per-channel Markov chains.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChannelModel {
    /// Per-channel H-by-H row-stochastic transition matrices, channel-ordered.
    per_channel: Vec<DMatrix<f64>>,
    /// Current per-channel state digits.
    state: Vec<usize>,
}

impl MarkovChannelModel {
    /// Builds a model from per-channel transition matrices, validating
    /// squareness, row stochasticity, and non-negativity.
    pub fn new(per_channel: Vec<DMatrix<f64>>) -> Result<Self> {
        if per_channel.is_empty() {
            return Err(Error::InvalidConfig("need at least one channel".into()));
        }
        let h = per_channel[0].nrows();
        for (idx, t) in per_channel.iter().enumerate() {
            if t.nrows() != h || t.ncols() != h {
                return Err(Error::DimensionMismatch(format!(
                    "transition matrix {idx} is {}x{}, expected {h}x{h}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            for (r, row) in t.row_iter().enumerate() {
                if row.iter().any(|&p| p < 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "transition matrix {idx} row {r} has a negative entry"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "transition matrix {idx} row {r} sums to {sum}"
                    )));
                }
            }
        }
        let m = per_channel.len();
        Ok(MarkovChannelModel { per_channel, state: vec![0; m] })
    }

    /// Draws one model with random per-channel transitions, all H states.
    pub fn generate_random<R: Rng>(h: usize, m_channels: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..m_channels).map(|_| generate_random_transition(h, rng)).collect())
    }

    /// Number of subcarriers.
    pub fn m_channels(&self) -> usize {
        self.per_channel.len()
    }

    /// Number of per-channel states.
    pub fn h(&self) -> usize {
        self.per_channel[0].nrows()
    }

    /// Per-channel transition matrices.
    pub fn per_channel(&self) -> &[DMatrix<f64>] {
        &self.per_channel
    }

    /// Current per-channel state digits.
    pub fn state(&self) -> &[usize] {
        &self.state
    }

    /// Resets to a uniformly random joint state (independent uniform digits).
    pub fn reset_uniform<R: Rng>(&mut self, rng: &mut R) {
        let h = self.h();
        for digit in &mut self.state {
            *digit = rng.gen_range(0..h);
        }
    }

    /// Places the chain in an explicit joint state.
    pub fn set_state(&mut self, space: &ChannelStateSpace, joint: usize) -> Result<()> {
        self.state = space.decode(joint)?;
        Ok(())
    }

    /// Advances every per-channel chain one slot. Exactly M uniform draws are
    /// consumed, in channel order, regardless of the current state.
    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        for (digit, t) in self.state.iter_mut().zip(&self.per_channel) {
            let u = rng.gen::<f64>();
            let row = t.row(*digit);
            let mut cumulative = 0.0;
            let mut next = row.len() - 1;
            for (j, &p) in row.iter().enumerate() {
                cumulative += p;
                if u < cumulative {
                    next = j;
                    break;
                }
            }
            *digit = next;
        }
    }

    /// Joint transition matrix over the mixed-radix joint space, materialized
    /// as the Kronecker product `T_M (x) ... (x) T_1` so that channel 1 is the
    /// least significant digit. Refuses spaces beyond `cap`.
    pub fn joint_transition(&self, cap: usize) -> Result<DMatrix<f64>> {
        let h = self.h() as u128;
        let size = h.pow(self.m_channels() as u32);
        if size > cap as u128 {
            return Err(Error::JointSpaceTooLarge { size, cap });
        }
        let mut joint = self.per_channel[self.m_channels() - 1].clone();
        for t in self.per_channel[..self.m_channels() - 1].iter().rev() {
            joint = joint.kronecker(t);
        }
        Ok(joint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, STREAM_ENV_CHANNEL, STREAM_INSTANCE};

    fn ladder() -> Vec<f64> {
        (0..8).map(|e| 10f64.powi(e - 8)).collect()
    }

    #[test]
    fn mixed_radix_roundtrip_and_digit_order() {
        let space = ChannelStateSpace::new(ladder(), 3).unwrap();
        assert_eq!(space.joint_size_u128(), 512);
        // digit 0 is channel 1: joint = d1 + 8*d2 + 64*d3
        let joint = space.encode(&[5, 2, 7]).unwrap();
        assert_eq!(joint, 5 + 8 * 2 + 64 * 7);
        assert_eq!(space.decode(joint).unwrap(), vec![5, 2, 7]);
        for joint in 0..512 {
            assert_eq!(space.encode(&space.decode(joint).unwrap()).unwrap(), joint);
        }
        assert!(space.decode(512).is_err());
    }

    #[test]
    fn gains_follow_the_ladder() {
        let space = ChannelStateSpace::new(ladder(), 2).unwrap();
        let joint = space.encode(&[0, 7]).unwrap();
        let gains = space.gains_of(joint).unwrap();
        assert_eq!(gains, vec![1e-8, 1e-1]);
    }

    #[test]
    fn amplitude_kind_squares_values() {
        assert_eq!(GainKind::Power.power_gain(0.25), 0.25);
        assert!((GainKind::Amplitude.power_gain(0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn random_transitions_are_row_stochastic() {
        let mut rng = stream(3, STREAM_INSTANCE);
        for _ in 0..50 {
            let t = generate_random_transition(8, &mut rng);
            for row in t.row_iter() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn kronecker_order_puts_channel_one_least_significant() {
        let t1 = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let t2 = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2, 0.8]);
        let model = MarkovChannelModel::new(vec![t1.clone(), t2.clone()]).unwrap();
        let joint = model.joint_transition(16).unwrap();
        let space = ChannelStateSpace::new(vec![1.0, 2.0], 2).unwrap();
        // P[(d1,d2) -> (e1,e2)] = T1[d1,e1] * T2[d2,e2]
        for d1 in 0..2 {
            for d2 in 0..2 {
                for e1 in 0..2 {
                    for e2 in 0..2 {
                        let from = space.encode(&[d1, d2]).unwrap();
                        let to = space.encode(&[e1, e2]).unwrap();
                        let expected = t1[(d1, e1)] * t2[(d2, e2)];
                        assert!(
                            (joint[(from, to)] - expected).abs() < 1e-15,
                            "entry ({from},{to})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn joint_transition_respects_the_cap() {
        let mut rng = stream(4, STREAM_INSTANCE);
        let model = MarkovChannelModel::generate_random(8, 5, &mut rng).unwrap();
        let err = model.joint_transition(DEFAULT_JOINT_CAP).unwrap_err();
        assert!(matches!(err, Error::JointSpaceTooLarge { size: 32768, cap: 4096 }));
    }

    #[test]
    fn empirical_joint_frequencies_match_the_kronecker_product() {
        let mut rng = stream(5, STREAM_INSTANCE);
        let mut model = MarkovChannelModel::generate_random(2, 2, &mut rng).unwrap();
        let space = ChannelStateSpace::new(vec![0.5, 1.0], 2).unwrap();
        let joint = model.joint_transition(64).unwrap();

        let mut walk_rng = stream(6, STREAM_ENV_CHANNEL);
        let steps = 100_000;
        let mut counts = vec![vec![0u32; 4]; 4];
        let mut visits = vec![0u32; 4];
        let mut current = space.encode(model.state()).unwrap();
        for _ in 0..steps {
            model.step(&mut walk_rng);
            let next = space.encode(model.state()).unwrap();
            counts[current][next] += 1;
            visits[current] += 1;
            current = next;
        }
        for from in 0..4 {
            let n = f64::from(visits[from]);
            assert!(n > 1000.0, "state {from} undervisited");
            for to in 0..4 {
                let p = joint[(from, to)];
                let freq = f64::from(counts[from][to]) / n;
                let se = (p * (1.0 - p) / n).sqrt();
                assert!(
                    (freq - p).abs() <= 3.0 * se + 1e-12,
                    "({from}->{to}): freq {freq} vs p {p} (se {se})"
                );
            }
        }
    }

    #[test]
    fn chain_is_stationary_across_halves() {
        let mut rng = stream(7, STREAM_INSTANCE);
        let mut model = MarkovChannelModel::generate_random(3, 1, &mut rng).unwrap();
        let mut walk_rng = stream(8, STREAM_ENV_CHANNEL);
        let steps = 100_000;
        let mut halves = [vec![vec![0u32; 3]; 3], vec![vec![0u32; 3]; 3]];
        let mut visits = [vec![0u32; 3], vec![0u32; 3]];
        let mut current = model.state()[0];
        for step in 0..steps {
            model.step(&mut walk_rng);
            let next = model.state()[0];
            let half = usize::from(step >= steps / 2);
            halves[half][current][next] += 1;
            visits[half][current] += 1;
            current = next;
        }
        for from in 0..3 {
            let (n1, n2) = (f64::from(visits[0][from]), f64::from(visits[1][from]));
            for to in 0..3 {
                let f1 = f64::from(halves[0][from][to]) / n1;
                let f2 = f64::from(halves[1][from][to]) / n2;
                let pooled = (f64::from(halves[0][from][to] + halves[1][from][to])) / (n1 + n2);
                let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
                assert!(
                    (f1 - f2).abs() <= 3.0 * se + 1e-12,
                    "({from}->{to}): halves {f1} vs {f2}"
                );
            }
        }
    }
}
