use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Channels of every latent code.
pub const CODE_CHANNELS: usize = 16;

/// Smallest feature map of every generator and critic.
pub const BASE_RESOLUTION: usize = 4;

/// Geometry shared by all five networks of one experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchPlan {
    /// Target image resolution `R` (square).
    pub resolution: usize,
    /// Spatial downsampling factor `s` of the encoder.
    pub code_scale: usize,
    pub code_channels: usize,
    /// Dimension of the generator's noise input.
    pub noise_dim: usize,
    /// Channel width of the feature map at resolution `4·2^j`, for
    /// `j = 0..=log2(R/4)`. Left empty in a config file, it is filled by
    /// [`ArchPlan::normalized`].
    #[serde(default)]
    pub widths: Vec<usize>,
}

impl Default for ArchPlan {
    fn default() -> Self {
        Self::desk()
    }
}

impl ArchPlan {
    /// 64 px, `s = 4`, 64-d noise, widths 32 at full resolution doubling to 128.
    pub fn desk() -> Self {
        Self::doubling(64, 4, 64, 32, 128)
    }

    /// 256 px layout with wide feature maps:
    /// 256 channels up to 32², 128 at 64² and 128², 64 at 256². Only used for
    /// cost comparisons.
    pub fn wide256() -> Self {
        Self {
            resolution: 256,
            code_scale: 4,
            code_channels: CODE_CHANNELS,
            noise_dim: 128,
            widths: vec![256, 256, 256, 256, 128, 128, 64],
        }
    }

    /// Widths start at `base` for the full resolution and double per halving, capped at `max`.
    pub fn doubling(
        resolution: usize,
        code_scale: usize,
        noise_dim: usize,
        base: usize,
        max: usize,
    ) -> Self {
        let levels = levels_for(resolution).unwrap_or(0);
        let widths = (0..=levels)
            .map(|j| {
                let halvings = levels - j;
                base.saturating_mul(1 << halvings.min(30)).min(max)
            })
            .collect();
        Self {
            resolution,
            code_scale,
            code_channels: CODE_CHANNELS,
            noise_dim,
            widths,
        }
    }

    /// Fill empty widths with the desk doubling rule (32 at full resolution, capped at 128).
    pub fn normalized(self) -> Self {
        if !self.widths.is_empty() {
            return self;
        }
        let widths =
            Self::doubling(self.resolution, self.code_scale, self.noise_dim, 32, 128).widths;
        Self { widths, ..self }
    }

    pub fn with_code_scale(&self, s: usize) -> Self {
        Self {
            code_scale: s,
            ..self.clone()
        }
    }

    /// The same network family at another resolution: level `i` (after `i`
    /// halvings of the full resolution) keeps its width, so an autoencoder
    /// trained on this plan runs unchanged on the original one.
    pub fn at_resolution(&self, resolution: usize) -> Self {
        let levels = levels_for(resolution).unwrap_or(0);
        let widths = (0..=levels).map(|j| self.level_width(levels - j)).collect();
        Self {
            resolution,
            widths,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8, 16].contains(&self.code_scale) {
            return Err(Error::Config(format!(
                "code scale must be one of 2, 4, 8, 16, got {}",
                self.code_scale
            )));
        }
        let Some(levels) = levels_for(self.resolution) else {
            return Err(Error::Config(format!(
                "resolution must be 4·2^k with k ≥ 1, got {}",
                self.resolution
            )));
        };
        if !self.resolution.is_multiple_of(self.code_scale) {
            return Err(Error::Config(format!(
                "resolution {} is not divisible by code scale {}",
                self.resolution, self.code_scale
            )));
        }
        if self.code_resolution() < BASE_RESOLUTION {
            return Err(Error::Config(format!(
                "code resolution {} is below the {BASE_RESOLUTION}px generator base",
                self.code_resolution()
            )));
        }
        if self.code_channels != CODE_CHANNELS {
            return Err(Error::Config(format!(
                "codes have {CODE_CHANNELS} channels, got {}",
                self.code_channels
            )));
        }
        if self.noise_dim == 0 {
            return Err(Error::Config("noise_dim must be positive".into()));
        }
        if self.widths.len() != levels + 1 || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "need {} positive widths for resolution {}, got {:?}",
                levels + 1,
                self.resolution,
                self.widths
            )));
        }
        Ok(())
    }

    pub fn code_resolution(&self) -> usize {
        self.resolution / self.code_scale
    }

    /// `[16, R/s, R/s]`.
    pub fn code_shape(&self) -> [usize; 3] {
        let r = self.code_resolution();
        [self.code_channels, r, r]
    }

    /// Number of stride-2 stages in the encoder (`log2 s`).
    pub fn downsamples(&self) -> usize {
        self.code_scale.trailing_zeros() as usize
    }

    /// Width of the feature map at absolute resolution `res` (clamped to the plan's range).
    pub fn width_at(&self, res: usize) -> usize {
        let res = res.clamp(BASE_RESOLUTION, self.resolution.max(BASE_RESOLUTION));
        let j = (res / BASE_RESOLUTION).trailing_zeros() as usize;
        self.widths[j.min(self.widths.len() - 1)]
    }

    /// Width after `level` halvings of the full resolution.
    pub fn level_width(&self, level: usize) -> usize {
        self.width_at(self.resolution >> level.min(30))
    }
}

/// `log2(res / 4)` when `res` is `4·2^k`, `k ≥ 1`.
fn levels_for(res: usize) -> Option<usize> {
    if res < 2 * BASE_RESOLUTION || !res.is_power_of_two() {
        return None;
    }
    Some((res / BASE_RESOLUTION).trailing_zeros() as usize)
}
