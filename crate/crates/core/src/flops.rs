//! Per-pixel floating point operation counts of the beamformers.

use serde::Serialize;

use crate::beamformers::BeamformerKind;

/// Published operation count of the reference per-pixel network.
pub const REFERENCE_NETWORK_FLOPS: u64 = 74656;

/// Cost of the MVDR-family weight computation for one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MvdrCount {
    /// `L^3`, the dominant linear-solve term.
    pub solve: u64,
    /// Subarray-averaged outer products, `2 L^2 (C - L + 1)(2K + 1)`.
    pub covariance: u64,
    /// Applying the weights to every subarray, `2 L (C - L + 1)`.
    pub apply: u64,
}

impl MvdrCount {
    pub fn total(&self) -> u64 {
        self.solve + self.covariance + self.apply
    }
}

pub fn mvdr_flops(channels: usize, subarray_len: usize, temporal_halfwidth: usize) -> MvdrCount {
    let (c, l, k) = (channels as u64, subarray_len.clamp(1, channels.max(1)) as u64, temporal_halfwidth as u64);
    let subarrays = c - l + 1;
    MvdrCount {
        solve: l.pow(3),
        covariance: 2 * l * l * subarrays * (2 * k + 1),
        apply: 2 * l * subarrays,
    }
}

/// Network cost split by kind of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NetworkCount {
    pub multiply_adds: u64,
    pub biases: u64,
    /// Antirectifier work on every hidden layer: mean, subtract, square,
    /// sum, divide and split per element plus a square root and a division.
    pub activation: u64,
    /// L2 input normalization and the final `w^T z`.
    pub io: u64,
}

impl NetworkCount {
    /// Multiply-add counted as one operation.
    pub fn one_flop_convention(&self) -> u64 {
        self.multiply_adds + self.biases + self.activation + self.io
    }

    /// Multiply-add counted as two operations.
    pub fn two_flop_convention(&self) -> u64 {
        2 * self.multiply_adds + self.biases + self.activation + self.io
    }

    /// Dense layers only, `sum (2 n_in n_out + n_out)`.
    pub fn dense_only(&self) -> u64 {
        2 * self.multiply_adds + self.biases
    }
}

/// Counts for `layer_dims = [C, h_1, ..., C]` with an antirectifier after
/// each hidden layer.
pub fn network_flops(layer_dims: &[usize]) -> NetworkCount {
    let mut count = NetworkCount {
        multiply_adds: 0,
        biases: 0,
        activation: 0,
        io: 0,
    };
    if layer_dims.len() < 2 {
        return count;
    }
    for l in 0..layer_dims.len() - 1 {
        let n_in = if l == 0 { layer_dims[0] } else { 2 * layer_dims[l] };
        let n_out = layer_dims[l + 1] as u64;
        count.multiply_adds += n_in as u64 * n_out;
        count.biases += n_out;
        if l + 2 < layer_dims.len() {
            count.activation += 6 * n_out + 2;
        }
    }
    let c = layer_dims[0] as u64;
    count.io = (2 * c + 1 + c) + 2 * c;
    count
}

/// One row of the ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlopRow {
    pub beamformer: String,
    pub channels: usize,
    pub subarray_len: usize,
    /// Dominant term on its own (`L^3` for MVDR, dense layers for the network).
    pub dominant: u64,
    pub one_flop: u64,
    pub two_flop: u64,
    pub reference: Option<u64>,
}

/// Per-pixel counts for every classical beamformer and the network.
pub fn flop_ledger(channels: usize, subarray_len: usize, temporal_halfwidth: usize, net_dims: &[usize]) -> Vec<FlopRow> {
    let c = channels as u64;
    let mv = mvdr_flops(channels, subarray_len, temporal_halfwidth);
    let mut rows = Vec::new();
    for kind in BeamformerKind::ALL {
        // (one-flop, two-flop) on top of the MVDR weight computation
        let (base, extra) = match kind {
            BeamformerKind::Das => (None, (c, 2 * c)),
            BeamformerKind::CoherenceFactor => (None, (3 * c + 3, 5 * c + 3)),
            BeamformerKind::Imap => (None, (c + 10 * (3 * c + 5), 2 * c + 10 * (5 * c + 5))),
            BeamformerKind::Mvdr => (Some(mv), (0, 0)),
            BeamformerKind::Wiener => (Some(mv), (3 * c + 6, 4 * c + 6)),
            BeamformerKind::EigenspaceMv => {
                let l = subarray_len as u64;
                // symmetric eigendecomposition ~ 9 L^3 plus the projection
                (Some(mv), (9 * l.pow(3) + l * l, 9 * l.pow(3) + 2 * l * l))
            }
        };
        let (dominant, one, two) = match base {
            Some(m) => {
                let half = m.covariance / 2 + m.apply / 2;
                (m.solve, m.solve + half + extra.0, m.total() + extra.1)
            }
            None => (extra.1, extra.0, extra.1),
        };
        rows.push(FlopRow {
            beamformer: kind.id().to_string(),
            channels,
            subarray_len: if base.is_some() { subarray_len } else { channels },
            dominant,
            one_flop: one,
            two_flop: two,
            reference: if kind == BeamformerKind::Mvdr { Some(2_097_152) } else { None },
        });
    }
    let net = network_flops(net_dims);
    rows.push(FlopRow {
        beamformer: "neural".to_string(),
        channels,
        subarray_len: channels,
        dominant: net.dense_only(),
        one_flop: net.one_flop_convention(),
        two_flop: net.two_flop_convention(),
        reference: Some(REFERENCE_NETWORK_FLOPS),
    });
    rows
}
