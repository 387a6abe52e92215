//! Policy snapshot file format: one JSON header line, then a little-endian
//! 32-bit float blob with the policy mean network parameters, the log-std
//! vector, and the value network parameters, in that order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::net::DenseNet;
use crate::rl::policy::GaussianPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub policy_sizes: Vec<usize>,
    pub value_sizes: Vec<usize>,
    pub action_center: Vec<f64>,
    pub action_scale: Vec<f64>,
    pub config_hash: String,
    pub seed: u64,
    pub param_count: usize,
}

pub const SNAPSHOT_FORMAT: &str = "cstep-policy-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    pub header: SnapshotHeader,
    pub policy: GaussianPolicy,
    pub value_net: DenseNet,
}

impl PolicySnapshot {
    pub fn new(
        policy: GaussianPolicy,
        value_net: DenseNet,
        config_hash: String,
        seed: u64,
    ) -> Self {
        let param_count =
            policy.mean_net.params().len() + policy.log_std.len() + value_net.params().len();
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.to_string(),
            policy_sizes: policy.mean_net.sizes().to_vec(),
            value_sizes: value_net.sizes().to_vec(),
            action_center: policy.action_center.clone(),
            action_scale: policy.action_scale.clone(),
            config_hash,
            seed,
            param_count,
        };
        PolicySnapshot { header, policy, value_net }
    }

    pub fn observation_dim(&self) -> usize {
        self.policy.mean_net.input_dim()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.push(b'\n');
        let params = self
            .policy
            .mean_net
            .params()
            .iter()
            .chain(self.policy.log_std.iter())
            .chain(self.value_net.params().iter());
        for &p in params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::SnapshotFormat("missing header line".into()))?;
        let header: SnapshotHeader = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| Error::SnapshotFormat(format!("bad header: {e}")))?;
        if header.format != SNAPSHOT_FORMAT {
            return Err(Error::SnapshotFormat(format!("unknown format `{}`", header.format)));
        }
        if header.policy_sizes.len() < 2 || header.value_sizes.len() < 2 {
            return Err(Error::SnapshotFormat("layer size lists too short".into()));
        }
        let action_dim = *header.policy_sizes.last().unwrap();
        if header.action_center.len() != action_dim || header.action_scale.len() != action_dim {
            return Err(Error::SnapshotFormat("action bound arity mismatch".into()));
        }
        if header.value_sizes.last() != Some(&1) {
            return Err(Error::SnapshotFormat("value head must have one output".into()));
        }
        if header.policy_sizes[0] != header.value_sizes[0] {
            return Err(Error::SnapshotFormat("policy/value input dims disagree".into()));
        }
        let expect = DenseNet::param_count_for(&header.policy_sizes)
            + action_dim
            + DenseNet::param_count_for(&header.value_sizes);
        if header.param_count != expect {
            return Err(Error::SnapshotFormat(format!(
                "param_count {} does not match layer sizes (expected {expect})",
                header.param_count
            )));
        }
        let blob = &bytes[newline + 1..];
        if blob.len() != expect * 4 {
            return Err(Error::SnapshotFormat(format!(
                "parameter blob holds {} bytes, expected {}",
                blob.len(),
                expect * 4
            )));
        }
        let mut params = Vec::with_capacity(expect);
        for chunk in blob.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
            params.push(v);
        }
        let n_mean = DenseNet::param_count_for(&header.policy_sizes);
        let mean_net = DenseNet::from_params(&header.policy_sizes, params[..n_mean].to_vec())
            .ok_or_else(|| Error::SnapshotFormat("policy parameter layout".into()))?;
        let log_std = params[n_mean..n_mean + action_dim].to_vec();
        let value_net =
            DenseNet::from_params(&header.value_sizes, params[n_mean + action_dim..].to_vec())
                .ok_or_else(|| Error::SnapshotFormat("value parameter layout".into()))?;
        let policy = GaussianPolicy {
            mean_net,
            log_std,
            action_center: header.action_center.clone(),
            action_scale: header.action_scale.clone(),
        };
        Ok(PolicySnapshot { header, policy, value_net })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
