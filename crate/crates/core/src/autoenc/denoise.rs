use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{loss_eval, train_on_batch, Activation, LayerSpec, LossKind, Network, Optimizer, Padding};
use crate::numkit::{RngStream, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiseConfig {
    /// Side length of the square images.
    pub size: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Standard deviation of the additive Gaussian noise before clipping.
    pub noise: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub conv_channels: usize,
    pub hidden: usize,
    pub test_samples: usize,
    /// Number of (clean, noisy, denoised) test triples kept for dumping.
    pub dumps: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            size: 16,
            radius_min: 2.0,
            radius_max: 5.0,
            noise: 0.3,
            steps: 1500,
            batch_size: 32,
            learning_rate: 2e-3,
            conv_channels: 4,
            hidden: 64,
            test_samples: 256,
            dumps: 4,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 4 || self.size % 2 != 0 {
            return Err(Error::InvalidArgument(format!("image size {} must be even and ≥ 4", self.size)));
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max && 2.0 * self.radius_max <= self.size as f64) {
            return Err(Error::InvalidArgument("radius range must fit in the image".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise amplitude {}", self.noise)));
        }
        if self.batch_size == 0 || self.test_samples == 0 || self.conv_channels == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("batch, test, channel and hidden sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// One held-out example, pixel values in [0, 1], row-major.
#[derive(Debug, Clone)]
pub struct ImageTriple {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub denoised: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenoiseReport {
    pub net: Network,
    pub optimizer: Optimizer,
    /// Per-pixel batch loss before each update.
    pub cost_curve: Vec<f64>,
    /// Per-pixel MSE of the trained network on the last training batches.
    pub train_error: f64,
    /// Per-pixel MSE on held-out noisy images.
    pub test_error: f64,
    /// Per-pixel MSE of returning the noisy input unchanged.
    pub noise_baseline: f64,
    pub examples: Vec<ImageTriple>,
}

/// Binary image of a disk with random centre and radius.
pub fn random_disk(size: usize, radius_min: f64, radius_max: f64, rng: &mut RngStream) -> Vec<f64> {
    let r = radius_min + (radius_max - radius_min) * rng.uniform01();
    let span = size as f64 - 2.0 * r;
    let cx = r + span * rng.uniform01();
    let cy = r + span * rng.uniform01();
    let mut img = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let dy = i as f64 + 0.5 - cy;
            let dx = j as f64 + 0.5 - cx;
            if dx * dx + dy * dy <= r * r {
                img[i * size + j] = 1.0;
            }
        }
    }
    img
}

/// Additive Gaussian noise clipped to [0, 1].
pub fn add_noise(clean: &[f64], amplitude: f64, rng: &mut RngStream) -> Vec<f64> {
    clean
        .iter()
        .map(|&p| (p + amplitude * rng.gaussian_std()).clamp(0.0, 1.0))
        .collect()
}

/// `n` fresh (noisy, clean) pairs as two [n, size²] tensors.
pub fn noisy_pairs(config: &DenoiseConfig, n: usize, rng: &mut RngStream) -> Result<(Tensor, Tensor)> {
    let px = config.size * config.size;
    let mut noisy = Vec::with_capacity(n * px);
    let mut clean = Vec::with_capacity(n * px);
    for _ in 0..n {
        let img = random_disk(config.size, config.radius_min, config.radius_max, rng);
        noisy.extend(add_noise(&img, config.noise, rng));
        clean.extend(img);
    }
    Ok((Tensor::new(vec![n, px], noisy)?, Tensor::new(vec![n, px], clean)?))
}

/// conv → average pool → dense bottleneck → sigmoid image.
pub fn denoising_network(config: &DenoiseConfig, rng: &mut RngStream) -> Result<Network> {
    let s = config.size;
    let c = config.conv_channels;
    let pooled = c * (s / 2) * (s / 2);
    Network::new(
        vec![
            LayerSpec::conv2d(1, c, 1, (s, s), Padding::Zero, Activation::Relu),
            LayerSpec::avg_pool2d(c, (s, s), 2),
            LayerSpec::flatten(pooled),
            LayerSpec::dense(pooled, config.hidden, Activation::Relu),
            LayerSpec::dense(config.hidden, s * s, Activation::Sigmoid),
        ],
        rng,
    )
}

/// Trains on freshly generated pairs every step and evaluates on a held-out
/// set drawn from an independent stream.
pub fn denoising_task(config: &DenoiseConfig, seed: u64) -> Result<DenoiseReport> {
    config.validate()?;
    let px = (config.size * config.size) as f64;
    let mut init_rng = RngStream::new(seed, 0);
    let mut data_rng = RngStream::new(seed, 1);
    let mut test_rng = RngStream::new(seed, 2);
    let mut net = denoising_network(config, &mut init_rng)?;
    let mut optimizer = Optimizer::adam(config.learning_rate);
    let mut cost_curve = Vec::with_capacity(config.steps);
    let keep = 4.min(config.steps);
    let mut recent = Vec::with_capacity(keep);
    for step in 0..config.steps {
        let (x, y) = noisy_pairs(config, config.batch_size, &mut data_rng)?;
        let cost = train_on_batch(&mut net, &x, &y, LossKind::Quadratic, &mut optimizer)? / px;
        if !cost.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: "denoising cost is not finite".into(),
            });
        }
        cost_curve.push(cost);
        if step + keep >= config.steps {
            recent.push((x, y));
        }
    }
    let train_error = if recent.is_empty() {
        f64::NAN
    } else {
        let mut total = 0.0;
        for (x, y) in &recent {
            total += loss_eval(&net.predict(x)?, y, LossKind::Quadratic)?.value / px;
        }
        total / recent.len() as f64
    };
    let (x_test, y_test) = noisy_pairs(config, config.test_samples, &mut test_rng)?;
    let out = net.predict(&x_test)?;
    let test_error = loss_eval(&out, &y_test, LossKind::Quadratic)?.value / px;
    let noise_baseline = loss_eval(&x_test, &y_test, LossKind::Quadratic)?.value / px;
    let examples = (0..config.dumps.min(config.test_samples))
        .map(|i| ImageTriple {
            clean: y_test.row(i).to_vec(),
            noisy: x_test.row(i).to_vec(),
            denoised: out.row(i).to_vec(),
        })
        .collect();
    Ok(DenoiseReport {
        net,
        optimizer,
        cost_curve,
        train_error,
        test_error,
        noise_baseline,
        examples,
    })
}

/// Plain (P2) PGM with maxval 255; values are clamped to [0, 1].
pub fn to_pgm(pixels: &[f64], width: usize, height: usize) -> Result<String> {
    if pixels.len() != width * height {
        return Err(Error::Shape(format!("{} pixels for a {width}x{height} image", pixels.len())));
    }
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks(width) {
        let line: Vec<String> = row
            .iter()
            .map(|p| ((p.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DenoiseConfig {
        DenoiseConfig {
            size: 8,
            radius_min: 1.5,
            radius_max: 3.0,
            steps: 400,
            batch_size: 16,
            learning_rate: 5e-3,
            hidden: 32,
            test_samples: 128,
            ..DenoiseConfig::default()
        }
    }

    #[test]
    fn disks_are_binary_and_nonempty() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..20 {
            let img = random_disk(16, 2.0, 5.0, &mut rng);
            assert!(img.iter().all(|&p| p == 0.0 || p == 1.0));
            assert!(img.iter().sum::<f64>() >= 4.0);
        }
    }

    #[test]
    fn noise_stays_in_unit_interval() {
        let mut rng = RngStream::new(2, 0);
        let img = random_disk(16, 2.0, 5.0, &mut rng);
        let noisy = add_noise(&img, 0.8, &mut rng);
        assert!(noisy.iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(add_noise(&img, 0.0, &mut rng), img);
    }

    #[test]
    fn trained_network_beats_identity_baseline() {
        let report = denoising_task(&small(), 3).unwrap();
        assert!(report.test_error < report.noise_baseline, "{report:?}");
        let rel = (report.train_error - report.test_error).abs() / report.test_error;
        assert!(rel < 0.2, "train {} test {}", report.train_error, report.test_error);
    }

    #[test]
    fn zero_noise_matches_clean_autoencoding() {
        let cfg = DenoiseConfig {
            noise: 0.0,
            steps: 100,
            ..small()
        };
        let report = denoising_task(&cfg, 4).unwrap();
        assert_eq!(report.noise_baseline, 0.0);
        // Without noise the inputs are the clean images, so training is pure
        // autoencoding; compare to a run on explicitly clean pairs.
        let mut init = RngStream::new(4, 0);
        let mut data = RngStream::new(4, 1);
        let mut net = denoising_network(&cfg, &mut init).unwrap();
        let mut opt = Optimizer::adam(cfg.learning_rate);
        for _ in 0..cfg.steps {
            let (_, y) = noisy_pairs(&cfg, cfg.batch_size, &mut data).unwrap();
            train_on_batch(&mut net, &y, &y, LossKind::Quadratic, &mut opt).unwrap();
        }
        let (_, y_test) = noisy_pairs(&cfg, cfg.test_samples, &mut RngStream::new(4, 2)).unwrap();
        let clean_error = loss_eval(&net.predict(&y_test).unwrap(), &y_test, LossKind::Quadratic).unwrap().value / 64.0;
        assert!(report.test_error <= clean_error + 1e-12);
    }

    #[test]
    fn pgm_header_and_values() {
        let pgm = to_pgm(&[0.0, 1.0, 0.5, 2.0], 2, 2).unwrap();
        assert_eq!(pgm, "P2\n2 2\n255\n0 255\n128 255\n");
        assert!(to_pgm(&[0.0], 2, 2).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(DenoiseConfig { size: 7, ..small() }.validate().is_err());
        assert!(DenoiseConfig { radius_max: 10.0, ..small() }.validate().is_err());
        assert!(DenoiseConfig { noise: -1.0, ..small() }.validate().is_err());
    }
}
