use rand::Rng;

use super::{Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Fully connected layer computing `x · Wᵀ + b` for `x` of shape `[N, in]`.
pub struct Linear<T: Element> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Element> Linear<T> {
    pub fn new(input_channels: usize, output_channels: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Linear {
            weight: Parameter::glorot(
                &[output_channels, input_channels],
                input_channels,
                output_channels,
                rng,
            )?,
            bias: Parameter::zeros(&[output_channels])?,
        })
    }

    pub fn from_parameters(weight: Parameter<T>, bias: Parameter<T>) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[0]] {
            return Err(Error::dim(format!(
                "linear weight {:?} and bias {:?} disagree",
                ws,
                bias.shape()
            )));
        }
        Ok(Linear { weight, bias })
    }

    /// A second handle onto the same parameters.
    pub fn clone_shared(&self) -> Self {
        Linear {
            weight: self.weight.clone(),
            bias: self.bias.clone(),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }
}

impl<T: Element> Module<T> for Linear<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let xs = x.shape();
        if xs.len() != 2 || xs[1] != self.in_features() {
            return Err(Error::dim(format!(
                "linear expects [N, {}], got {:?}",
                self.in_features(),
                xs
            )));
        }
        x.matmul(&self.weight.transpose()?)?.add(&self.bias)
    }

    fn local_parameters(&self) -> Vec<(&str, &Parameter<T>)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }
}
