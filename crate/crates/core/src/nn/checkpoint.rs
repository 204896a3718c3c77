//! JSON checkpoints. Doubles are written in shortest round-trip form and
//! parsed with correct rounding, so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{LayerParams, LayerSpec};
use super::network::Network;
use super::optim::Optimizer;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<LayerParams>,
    #[serde(default)]
    pub optimizer: Option<Optimizer>,
}

impl Checkpoint {
    pub fn new(net: &Network, optimizer: Option<&Optimizer>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            layers: net.layers().to_vec(),
            params: net.params().to_vec(),
            optimizer: optimizer.cloned(),
        }
    }

    pub fn network(&self) -> Result<Network> {
        Network::from_parts(self.layers.clone(), self.params.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if cp.format_version != FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported checkpoint format_version {}",
                cp.format_version
            )));
        }
        // validates shapes
        cp.network()?;
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::{Activation, Padding};
    use crate::numkit::{RngStream, Tensor};
    use proptest::prelude::*;

    fn sample_net(seed: u64) -> Network {
        let mut rng = RngStream::new(seed, 0);
        Network::new(
            vec![
                LayerSpec::conv1d(1, 2, 1, 8, Padding::Periodic, Activation::Relu),
                LayerSpec::avg_pool1d(2, 8, 2),
                LayerSpec::flatten(8),
                LayerSpec::dense(8, 3, Activation::Softmax),
            ],
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_reproduces_outputs_bitwise() {
        let net = sample_net(3);
        let mut opt = Optimizer::adam(1e-3);
        let x = Tensor::new(vec![2, 8], (0..16).map(|i| (i as f64).cos() / 3.0).collect()).unwrap();
        let grads = net.backprop(
            &net.forward(&x).unwrap(),
            &Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
            crate::nn::LossKind::CategoricalCrossEntropy,
        )
        .unwrap();
        let mut trained = net.clone();
        opt.step(&mut trained, &grads).unwrap();

        let text = Checkpoint::new(&trained, Some(&opt)).to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        let restored = back.network().unwrap();
        assert_eq!(restored, trained);
        assert_eq!(back.optimizer.as_ref(), Some(&opt));
        let a = trained.predict(&x).unwrap();
        let b = restored.predict(&x).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn wrong_version_and_shapes_rejected() {
        let net = sample_net(1);
        let mut cp = Checkpoint::new(&net, None);
        cp.format_version = 99;
        assert!(Checkpoint::from_json(&serde_json::to_string(&cp).unwrap()).is_err());
        let mut cp = Checkpoint::new(&net, None);
        cp.params[3].biases = Tensor::zeros(vec![4]);
        assert!(Checkpoint::from_json(&serde_json::to_string(&cp).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_parameters_round_trip_exactly(theta in prop::collection::vec(
            prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 35)) {
            let mut net = sample_net(0);
            prop_assume!(theta.len() == net.num_params());
            net.set_flat_params(&theta).unwrap();
            let text = Checkpoint::new(&net, None).to_json().unwrap();
            let back = Checkpoint::from_json(&text).unwrap().network().unwrap();
            let bits = |n: &Network| n.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&net));
        }
    }
}
