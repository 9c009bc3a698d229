use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{parse_add_prompt, AddPrompt};
use crate::model::{mask_from_box, BBox, Image, Mask};

use super::{bbox_of_mask, check_dims, BackendError, InpaintBackend};

/// Wraps a backend and moves each object's target box by a deterministic
/// offset drawn uniformly from `[-jitter, jitter]` per axis.
#[derive(Debug, Clone)]
pub struct PerturbBackend<B> {
    inner: B,
    jitter: u32,
    seed: u64,
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl<B> PerturbBackend<B> {
    pub fn new(inner: B, jitter: u32, seed: u64) -> Self {
        Self { inner, jitter, seed }
    }

    pub fn offset(&self, prompt: &str, bbox: &BBox) -> (i64, i64) {
        if self.jitter == 0 {
            return (0, 0);
        }
        let mut h = fnv1a(self.seed.to_le_bytes(), 0xcbf2_9ce4_8422_2325);
        h = fnv1a(prompt.bytes(), h);
        h = fnv1a(bbox.coords().iter().flat_map(|c| c.to_le_bytes()), h);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let j = i64::from(self.jitter);
        (rng.random_range(-j..=j), rng.random_range(-j..=j))
    }
}

impl<B: InpaintBackend> InpaintBackend for PerturbBackend<B> {
    fn inpaint(&self, ctx: &Image, prompt: &str, mask: &Mask) -> Result<Image, BackendError> {
        check_dims(ctx, mask)?;
        if self.jitter == 0 || parse_add_prompt(prompt)? == AddPrompt::Background {
            return self.inner.inpaint(ctx, prompt, mask);
        }
        let bbox = bbox_of_mask(mask)?;
        let (dx, dy) = self.offset(prompt, &bbox);
        let moved = bbox.shifted_within(dx, dy, ctx.canvas());
        self.inner.inpaint(ctx, prompt, &mask_from_box(&moved, ctx.canvas()))
    }
}
