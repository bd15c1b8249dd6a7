use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{apply_transform, AugmentError, ImageBuffer, TransformOp, MAX_MAGNITUDE};

/// RandAugment policy: `n_ops` ops drawn with replacement from `op_pool`,
/// each applied at the fixed `magnitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct AugmentPolicy {
    n_ops: u32,
    magnitude: u32,
    op_pool: Vec<TransformOp>,
}

#[derive(Deserialize)]
struct RawPolicy {
    n_ops: u32,
    magnitude: u32,
    #[serde(default = "default_pool")]
    op_pool: Vec<TransformOp>,
}

fn default_pool() -> Vec<TransformOp> {
    TransformOp::ALL.to_vec()
}

impl TryFrom<RawPolicy> for AugmentPolicy {
    type Error = AugmentError;

    fn try_from(raw: RawPolicy) -> Result<Self, AugmentError> {
        AugmentPolicy::with_pool(raw.n_ops, raw.magnitude, raw.op_pool)
    }
}

impl AugmentPolicy {
    /// Policy over the full 16-op pool.
    pub fn new(n_ops: u32, magnitude: u32) -> Result<Self, AugmentError> {
        Self::with_pool(n_ops, magnitude, default_pool())
    }

    pub fn with_pool(n_ops: u32, magnitude: u32, op_pool: Vec<TransformOp>) -> Result<Self, AugmentError> {
        if op_pool.is_empty() {
            return Err(AugmentError::Policy("empty op pool".into()));
        }
        if n_ops < 1 || n_ops as usize > op_pool.len() {
            return Err(AugmentError::Policy(format!("n_ops {n_ops} outside [1, {}]", op_pool.len())));
        }
        if magnitude > MAX_MAGNITUDE {
            return Err(AugmentError::Magnitude(magnitude));
        }
        for (i, op) in op_pool.iter().enumerate() {
            if op_pool[..i].contains(op) {
                return Err(AugmentError::Policy(format!("duplicate pool entry {op}")));
            }
        }
        Ok(AugmentPolicy { n_ops, magnitude, op_pool })
    }

    pub fn n_ops(&self) -> u32 {
        self.n_ops
    }

    pub fn magnitude(&self) -> u32 {
        self.magnitude
    }

    pub fn op_pool(&self) -> &[TransformOp] {
        &self.op_pool
    }

    /// Draws the op sequence for one image without applying it.
    pub fn draw_ops<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<TransformOp> {
        (0..self.n_ops).map(|_| self.op_pool[rng.random_range(0..self.op_pool.len())]).collect()
    }
}

/// Applies `n_ops` randomly drawn ops in draw order. Each op is drawn and
/// then applied (consuming its sign draw, if any) before the next is drawn.
pub fn rand_augment<R: Rng + ?Sized>(
    image: &ImageBuffer,
    policy: &AugmentPolicy,
    rng: &mut R,
) -> Result<ImageBuffer, AugmentError> {
    let mut out = image.clone();
    for _ in 0..policy.n_ops {
        let op = policy.op_pool[rng.random_range(0..policy.op_pool.len())];
        out = apply_transform(&out, op, policy.magnitude, rng)?;
    }
    Ok(out)
}
