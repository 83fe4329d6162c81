//! Seeded signal sources: AR(1) regressor windows, white measurement noise,
//! and the linear plant `y = x^T w* + z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{ar1_correlation, dot, Matrix};

/// Burn-in used when no exact stationary initial draw is available.
const BURN_IN: usize = 1000;

/// Unknown system: sparse weights and additive noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub w_star: Vec<f64>,
    pub noise_var: f64,
}

impl PlantSpec {
    pub fn new(w_star: Vec<f64>, noise_var: f64) -> Result<Self> {
        let p = PlantSpec { w_star, noise_var };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_star.is_empty() {
            return Err(Error::domain("plant needs at least one tap"));
        }
        if self.w_star.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("plant weights must be finite"));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::domain(format!(
                "noise variance {} must be >= 0",
                self.noise_var
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.w_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_star.is_empty()
    }
}

/// Distribution of the AR(1) innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Zero-mean uniform with the configured variance. The regressor is then
    /// non-Gaussian and the fourth-moment closed form of the model is only
    /// approximate.
    Uniform,
}

/// How successive regressor vectors relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressorLayout {
    /// Sliding window over one scalar AR(1) sequence (tap-delay line).
    #[default]
    TapDelay,
    /// A fresh AR(1) segment of length `L` for every iteration. Each vector
    /// has the same covariance as a tap-delay window, but vectors are
    /// independent over time.
    Independent,
}

/// `x_n = ar_coeff x_{n-1} + nu_n`, `nu_n` i.i.d. with variance `innovation_var`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputModel {
    pub ar_coeff: f64,
    pub innovation_var: f64,
    pub innovation: Innovation,
    pub layout: RegressorLayout,
}

impl InputModel {
    pub fn gaussian(ar_coeff: f64, innovation_var: f64) -> Result<Self> {
        let m = InputModel {
            ar_coeff,
            innovation_var,
            innovation: Innovation::Gaussian,
            layout: RegressorLayout::TapDelay,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ar_coeff.is_finite() || self.ar_coeff.abs() >= 1.0 {
            return Err(Error::domain(format!(
                "AR coefficient {} must lie in (-1, 1)",
                self.ar_coeff
            )));
        }
        if !(self.innovation_var > 0.0 && self.innovation_var.is_finite()) {
            return Err(Error::domain(format!(
                "innovation variance {} must be positive",
                self.innovation_var
            )));
        }
        Ok(())
    }

    /// Stationary variance `innovation_var / (1 - ar_coeff^2)`.
    pub fn signal_var(&self) -> f64 {
        self.innovation_var / (1.0 - self.ar_coeff * self.ar_coeff)
    }

    /// Covariance of `len` consecutive samples.
    pub fn correlation(&self, len: usize) -> Result<Matrix> {
        ar1_correlation(len, self.ar_coeff, self.signal_var())
    }

    pub fn is_gaussian(&self) -> bool {
        self.innovation == Innovation::Gaussian
    }
}

/// Identifies one reproducible random stream: an ensemble-wide seed plus the
/// run index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_id,
        }
    }
}

/// Independent sources drawn from the same [`SeedSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    Regressor = 0x5245_4752,
    Noise = 0x4e4f_4953,
}

/// ChaCha keyed by `(master_seed, channel)` and positioned on stream
/// `stream_id`; the output depends only on those three values.
pub fn channel_rng(seed: SeedSpec, channel: Channel) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(channel as u64).to_le_bytes());
    key[16..24].copy_from_slice(b"za-lms\0\0");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(seed.stream_id);
    rng
}

/// Sliding window `[x_n, x_{n-1}, ..., x_{n-L+1}]` over one AR(1) sequence,
/// stationary from the first window.
#[derive(Debug, Clone)]
pub struct RegressorStream {
    model: InputModel,
    rng: ChaCha8Rng,
    window: Vec<f64>,
    primed: bool,
}

impl RegressorStream {
    pub fn new(model: InputModel, seed: SeedSpec, len: usize) -> Result<Self> {
        model.validate()?;
        if len == 0 {
            return Err(Error::domain("regressor length must be at least 1"));
        }
        Ok(RegressorStream {
            model,
            rng: channel_rng(seed, Channel::Regressor),
            window: vec![0.0; len],
            primed: false,
        })
    }

    fn innovation(&mut self) -> f64 {
        match self.model.innovation {
            Innovation::Gaussian => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                z * self.model.innovation_var.sqrt()
            }
            Innovation::Uniform => {
                let half_width = (3.0 * self.model.innovation_var).sqrt();
                self.rng.gen_range(-half_width..half_width)
            }
        }
    }

    fn next_sample(&mut self, prev: f64) -> f64 {
        self.model.ar_coeff * prev + self.innovation()
    }

    fn prime(&mut self) {
        let len = self.window.len();
        let mut x = match self.model.innovation {
            Innovation::Gaussian => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                z * self.model.signal_var().sqrt()
            }
            Innovation::Uniform => {
                let mut x = 0.0;
                for _ in 0..BURN_IN {
                    x = self.next_sample(x);
                }
                x
            }
        };
        // Oldest sample goes last.
        self.window[len - 1] = x;
        for slot in (0..len - 1).rev() {
            x = self.next_sample(x);
            self.window[slot] = x;
        }
        self.primed = true;
    }

    /// Advances to the next regressor and returns it.
    pub fn advance(&mut self) -> &[f64] {
        if !self.primed || self.model.layout == RegressorLayout::Independent {
            self.prime();
        } else {
            let x = self.next_sample(self.window[0]);
            self.window.rotate_right(1);
            self.window[0] = x;
        }
        &self.window
    }
}

impl Iterator for RegressorStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.advance().to_vec())
    }
}

/// White Gaussian noise `z_n ~ N(0, noise_var)`.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    std_dev: f64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(noise_var: f64, seed: SeedSpec) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::domain(format!(
                "noise variance {noise_var} must be >= 0"
            )));
        }
        Ok(NoiseStream {
            std_dev: noise_var.sqrt(),
            rng: channel_rng(seed, Channel::Noise),
        })
    }

    pub fn draw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        z * self.std_dev
    }
}

impl Iterator for NoiseStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.draw())
    }
}

/// Convenience constructor for [`RegressorStream`].
pub fn regressor_stream(model: InputModel, seed: SeedSpec, len: usize) -> Result<RegressorStream> {
    RegressorStream::new(model, seed, len)
}

/// `y = x^T w* + noise_draw`
pub fn plant_output(plant: &PlantSpec, x: &[f64], noise_draw: f64) -> Result<f64> {
    check_dim(plant.len(), x.len())?;
    Ok(dot(x, &plant.w_star) + noise_draw)
}
