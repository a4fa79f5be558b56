//! History buffer of previously generated images used to stabilize
//! discriminator updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::tensor::{split_batch, stack_batch, Tensor};

pub struct ImagePool {
    capacity: usize,
    images: Vec<Tensor<f32>>,
    rng: ChaCha12Rng,
}

impl ImagePool {
    pub fn new(capacity: usize, seed: u64) -> Self {
        ImagePool {
            capacity,
            images: Vec::new(),
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn stored(&self) -> &[Tensor<f32>] {
        &self.images
    }

    /// Restores pool state from a checkpoint. The replacement RNG stream
    /// restarts from `seed`.
    pub fn restore(&mut self, images: Vec<Tensor<f32>>, seed: u64) {
        self.images = images;
        self.rng = ChaCha12Rng::seed_from_u64(seed);
    }

    /// Restarts the replacement RNG stream without touching stored images.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
    }

    /// Offers one image and returns either it or a previously stored one
    /// of the same shape. While below capacity the image is stored and
    /// returned as-is; once full, with probability 1/2 a random stored
    /// image is swapped out for the offered one and returned.
    pub fn query_one(&mut self, image: &Tensor<f32>) -> Tensor<f32> {
        let img = image.detach();
        if self.capacity == 0 {
            return img;
        }
        if self.images.len() < self.capacity {
            self.images.push(img.clone());
            return img;
        }
        let swap: f64 = self.rng.random();
        if swap < 0.5 {
            let candidates: Vec<usize> = (0..self.images.len())
                .filter(|&i| self.images[i].shape() == img.shape())
                .collect();
            if candidates.is_empty() {
                return img;
            }
            let idx = candidates[self.rng.random_range(0..candidates.len())];
            let old = self.images[idx].clone();
            self.images[idx] = img;
            old
        } else {
            img
        }
    }

    /// Batched query: each item in [B,C,H,W] is offered independently.
    pub fn query(&mut self, batch: &Tensor<f32>) -> Result<Tensor<f32>> {
        let items = split_batch(batch);
        let picked: Vec<Tensor<f32>> = items.iter().map(|t| self.query_one(t)).collect();
        stack_batch(&picked)
    }
}
