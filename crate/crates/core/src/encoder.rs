//! Single-object autoencoder and the per-object feature vectors built from it.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObjectSpec, Orientation};
use crate::nn::{load_params, save_params, Adam, Mlp, ParamSet, Tape, Tensor};
use crate::renderer::{normalize, render_object, render_object_shifted, NormalizedImage, PIXELS};
use crate::simulator::{Mode, ObjectView};

pub const LATENT_DIM: usize = 4;
pub const ENCODER_WIDTHS: [usize; 5] = [PIXELS, 256, 256, 64, LATENT_DIM];

/// `[z0..z3, d_min, d_max]`, plus the orientation flag in nonlinear mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentFeature {
    pub z: [f64; LATENT_DIM],
    pub d_min: f64,
    pub d_max: f64,
    pub orientation_flag: Option<f64>,
}

impl LatentFeature {
    pub fn dim(mode: Mode) -> usize {
        match mode {
            Mode::Linear => LATENT_DIM + 2,
            Mode::Nonlinear => LATENT_DIM + 3,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.z.to_vec();
        v.push(self.d_min);
        v.push(self.d_max);
        if let Some(f) = self.orientation_flag {
            v.push(f);
        }
        v
    }

    /// Object height implied by the depth range.
    pub fn depth_span(&self) -> f64 {
        self.d_max - self.d_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub seed: u64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub jitters: usize,
    pub validation_jitters: usize,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            seed: 0,
            max_epochs: 5000,
            batch_size: 16,
            learning_rate: 1e-3,
            patience: 50,
            min_delta: 1e-6,
            jitters: 8,
            validation_jitters: 2,
        }
    }
}

/// Jittered renders of every object in both orientations, split into
/// training and held-out images.
pub fn training_images(catalog: &[ObjectSpec], config: &AutoencoderConfig) -> (Vec<NormalizedImage>, Vec<NormalizedImage>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_1a6e);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for spec in catalog {
        for o in Orientation::ALL {
            train.push(normalize(&render_object(spec, o)));
            for k in 0..config.jitters + config.validation_jitters {
                let (dx, dy) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                let img = normalize(&render_object_shifted(spec, o, dx, dy));
                if k < config.jitters {
                    train.push(img);
                } else {
                    val.push(img);
                }
            }
        }
    }
    (train, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderReport {
    /// Epochs run before the plateau rule or the cap stopped training.
    pub epochs: usize,
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub final_val_mse: f64,
}

/// Full autoencoder; only the encoder half outlives training.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub params: ParamSet,
    encoder: Mlp,
    decoder: Mlp,
}

impl Autoencoder {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::default();
        let encoder = Mlp::new(&mut params, "encoder", &ENCODER_WIDTHS, &mut rng);
        let mut mirrored = ENCODER_WIDTHS;
        mirrored.reverse();
        let decoder = Mlp::new(&mut params, "decoder", &mirrored, &mut rng);
        Autoencoder { params, encoder, decoder }
    }

    fn reconstruction_loss(&self, tape: &mut Tape, batch: &Tensor) -> Result<crate::nn::Var> {
        let x = tape.constant(batch.clone());
        let z = self.encoder.forward(tape, &self.params, x)?;
        let y = self.decoder.forward(tape, &self.params, z)?;
        let y = tape.sigmoid(y);
        tape.mse(y, batch.clone())
    }

    pub fn mse(&self, images: &[NormalizedImage]) -> Result<f64> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for chunk in images.chunks(64) {
            let mut tape = Tape::new();
            let l = self.reconstruction_loss(&mut tape, &stack(chunk))?;
            total += tape.value(l).data[0] * chunk.len() as f64;
        }
        Ok(total / images.len() as f64)
    }

    /// Extracts the encoder half.
    pub fn encoder(&self) -> Encoder {
        let n = self.encoder.layers.len() * 2;
        let params = ParamSet { params: self.params.params[..n].to_vec() };
        Encoder { params, mlp: self.encoder.clone() }
    }
}

fn stack(images: &[NormalizedImage]) -> Tensor {
    let mut data = Vec::with_capacity(images.len() * PIXELS);
    for img in images {
        data.extend_from_slice(&img.values);
    }
    Tensor::from_vec(images.len(), PIXELS, data)
}

/// Minibatch Adam on reconstruction MSE until the held-out loss plateaus.
pub fn train_autoencoder(
    train: &[NormalizedImage],
    val: &[NormalizedImage],
    config: &AutoencoderConfig,
) -> Result<(Autoencoder, AutoencoderReport)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ae = Autoencoder::new(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut adam = Adam::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = AutoencoderReport { epochs: 0, train_mse: Vec::new(), val_mse: Vec::new(), final_val_mse: f64::NAN };
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = ae.params.clone();
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<NormalizedImage> = idx.iter().map(|&i| train[i].clone()).collect();
            let mut tape = Tape::new();
            let l = ae.reconstruction_loss(&mut tape, &stack(&batch))?;
            let lv = tape.value(l).data[0];
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            epoch_loss += lv * idx.len() as f64;
            ae.params.zero_grad();
            tape.backward(l);
            tape.accumulate(&mut ae.params);
            adam.step(&mut ae.params, config.learning_rate);
        }
        let v = ae.mse(val)?;
        report.train_mse.push(epoch_loss / train.len() as f64);
        report.val_mse.push(v);
        report.epochs = epoch + 1;
        if v < best - config.min_delta {
            best = v;
            best_epoch = epoch;
            best_params.clone_from(&ae.params);
        } else if epoch - best_epoch >= config.patience {
            break;
        }
    }
    // keep the weights from the best held-out epoch
    ae.params = best_params;
    report.final_val_mse = best;
    Ok((ae, report))
}

/// Trained encoder half: image to 4-d code.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub params: ParamSet,
    mlp: Mlp,
}

impl Encoder {
    /// Freshly initialized encoder with the standard layout, ready for loading.
    pub fn skeleton() -> Self {
        Autoencoder::new(0).encoder()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut enc = Self::skeleton();
        load_params(path, &mut enc.params)?;
        Ok(enc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_params(path, &self.params)
    }

    pub fn code(&self, values: &[f64]) -> Result<[f64; LATENT_DIM]> {
        if values.len() != PIXELS {
            return Err(Error::ShapeMismatch(format!("image has {} pixels, expected {PIXELS}", values.len())));
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(values.to_vec()));
        let z = self.mlp.forward(&mut tape, &self.params, x)?;
        let mut out = [0.0; LATENT_DIM];
        out.copy_from_slice(&tape.value(z).data);
        Ok(out)
    }

    pub fn encode(&self, img: &NormalizedImage, orientation: Option<Orientation>) -> Result<LatentFeature> {
        Ok(LatentFeature { z: self.code(&img.values)?, d_min: img.d_min, d_max: img.d_max, orientation_flag: orientation.map(Orientation::flag) })
    }
}

/// Memoized features keyed by object id and orientation.
#[derive(Debug, Clone, Default)]
pub struct FeatureBank {
    encoder: Option<Encoder>,
    mode: Option<Mode>,
    cache: HashMap<(u32, Orientation), LatentFeature>,
}

impl FeatureBank {
    pub fn new(encoder: Encoder, mode: Mode) -> Self {
        FeatureBank { encoder: Some(encoder), mode: Some(mode), cache: HashMap::new() }
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.ok_or(Error::ModelNotLoaded)
    }

    fn flag(&self, o: Orientation) -> Result<Option<Orientation>> {
        Ok(match self.mode()? {
            Mode::Linear => None,
            Mode::Nonlinear => Some(o),
        })
    }

    pub fn feature(&mut self, spec: &ObjectSpec, orientation: Orientation) -> Result<LatentFeature> {
        if let Some(f) = self.cache.get(&(spec.id, orientation)) {
            return Ok(*f);
        }
        let encoder = self.encoder.as_ref().ok_or(Error::ModelNotLoaded)?;
        let img = normalize(&render_object(spec, orientation));
        let f = encoder.encode(&img, self.flag(orientation)?)?;
        self.cache.insert((spec.id, orientation), f);
        Ok(f)
    }

    /// Feature for an object as carried in a dataset record.
    pub fn view_feature(&mut self, view: &ObjectView) -> Result<LatentFeature> {
        if let Some(f) = self.cache.get(&(view.id, view.orientation)) {
            return Ok(*f);
        }
        let encoder = self.encoder.as_ref().ok_or(Error::ModelNotLoaded)?;
        let img = NormalizedImage { values: view.image.clone(), d_min: view.d_min, d_max: view.d_max };
        let f = encoder.encode(&img, self.flag(view.orientation)?)?;
        self.cache.insert((view.id, view.orientation), f);
        Ok(f)
    }
}
