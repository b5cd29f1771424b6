//! Binary checkpoint format.
//!
//! ```text
//! magic            4 bytes  "HMCK"
//! format version   u32
//! agent count      u32
//! network count    u32
//! per network:     kind u8 (0 policy, 1 central critic, 2 local critic)
//!                  width count u32, widths u32 × count
//!                  activation tags u8 × (count - 2)   (0 tanh, 1 elu)
//! payload:         per network, per layer: weights (in × out) then biases,
//!                  as f64; the policy is followed by its log-std vector
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::mlp::{Activation, Mlp, MlpSpec};
use super::policy::GaussianPolicy;
use crate::error::{argument, Result};

const MAGIC: &[u8; 4] = b"HMCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    Central,
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n_agents: usize,
    pub policy: GaussianPolicy,
    pub critic: Option<(CriticKind, Mlp)>,
}

fn kind_tag(kind: Option<CriticKind>) -> u8 {
    match kind {
        None => 0,
        Some(CriticKind::Central) => 1,
        Some(CriticKind::Local) => 2,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| argument("truncated checkpoint"))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl Checkpoint {
    fn networks(&self) -> Vec<(u8, &Mlp)> {
        let mut nets = vec![(0u8, &self.policy.mlp)];
        if let Some((kind, mlp)) = &self.critic {
            nets.push((kind_tag(Some(*kind)), mlp));
        }
        nets
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let nets = self.networks();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_agents as u32).to_le_bytes());
        out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
        for (kind, mlp) in &nets {
            out.push(*kind);
            let widths = mlp.spec().widths();
            out.extend_from_slice(&(widths.len() as u32).to_le_bytes());
            for w in widths {
                out.extend_from_slice(&(*w as u32).to_le_bytes());
            }
            out.extend(mlp.spec().activations().iter().map(|a| a.tag()));
        }
        for (kind, mlp) in &nets {
            mlp.params().iter().for_each(|p| out.extend_from_slice(&p.to_le_bytes()));
            if *kind == 0 {
                self.policy.log_std().iter().for_each(|p| out.extend_from_slice(&p.to_le_bytes()));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(argument("not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(argument(format!("unsupported checkpoint version {version}")));
        }
        let n_agents = r.u32()? as usize;
        let n_nets = r.u32()? as usize;
        if !(1..=2).contains(&n_nets) {
            return Err(argument(format!("unexpected network count {n_nets}")));
        }
        let mut headers = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let kind = r.u8()?;
            let count = r.u32()? as usize;
            if count > 1024 {
                return Err(argument("implausible layer count"));
            }
            let widths = (0..count).map(|_| r.u32().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
            let acts = (0..count.saturating_sub(2))
                .map(|_| r.u8().and_then(Activation::from_tag))
                .collect::<Result<Vec<_>>>()?;
            headers.push((kind, MlpSpec::new(widths, acts)?));
        }
        if headers[0].0 != 0 {
            return Err(argument("first network must be the policy"));
        }
        let mut policy = None;
        let mut critic = None;
        for (kind, spec) in headers {
            let params = r.f64s(spec.n_params())?;
            let out_width = spec.output_width();
            let mlp = Mlp::from_params(spec, params)?;
            match kind {
                0 => {
                    let log_std = r.f64s(out_width)?;
                    policy = Some(GaussianPolicy::from_parts(mlp, log_std)?);
                }
                1 => critic = Some((CriticKind::Central, mlp)),
                2 => critic = Some((CriticKind::Local, mlp)),
                k => return Err(argument(format!("unknown network kind {k}"))),
            }
        }
        if r.at != bytes.len() {
            return Err(argument("trailing bytes after checkpoint payload"));
        }
        Ok(Self { n_agents, policy: policy.expect("policy header checked"), critic })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
