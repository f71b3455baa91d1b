use super::{fan_in_uniform, prefixed, Cache, Module};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{shape_str, Scalar, Tensor};

/// Fully connected layer `[B, in] -> [B, out]`; weight is `[in, out]`.
#[derive(Clone, Debug)]
pub struct Dense<T: Scalar = f32> {
    pub name: String,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(name: impl Into<String>, inputs: usize, outputs: usize, rng: &mut Rng) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidArgument("dense extents must be positive".into()));
        }
        Ok(Dense {
            name: name.into(),
            weight: fan_in_uniform(&[inputs, outputs], inputs, rng),
            bias: Tensor::zeros(&[outputs]),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }
}

impl<T: Scalar> Module<T> for Dense<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 2 || x.shape()[1] != self.inputs() {
            return Err(Error::dim("dense", format!("[B x {}]", self.inputs()), shape_str(x.shape())));
        }
        let mut y = x.matmul(&self.weight)?;
        let out = self.outputs();
        for row in y.data_mut().chunks_mut(out) {
            for (v, &b) in row.iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        Ok(y)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let y = self.forward(x)?;
        Ok((y, Cache::with_tensors(vec![x.clone()])))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let x = &cache.tensors[0];
        let (batch, inputs, outputs) = (x.shape()[0], self.inputs(), self.outputs());
        if grad_out.shape() != [batch, outputs] {
            return Err(Error::dim(
                "dense_backward",
                format!("[{batch}x{outputs}]"),
                shape_str(grad_out.shape()),
            ));
        }
        // dW += x^T dY
        T::gemm(
            inputs,
            batch,
            outputs,
            T::one(),
            x.data(),
            1,
            inputs as isize,
            grad_out.data(),
            outputs as isize,
            1,
            T::one(),
            grads[0].data_mut(),
            outputs as isize,
            1,
        );
        for row in grad_out.data().chunks(outputs) {
            for (db, &g) in grads[1].data_mut().iter_mut().zip(row) {
                *db += g;
            }
        }
        // dX = dY W^T
        let mut dx = Tensor::zeros(x.shape());
        T::gemm(
            batch,
            outputs,
            inputs,
            T::one(),
            grad_out.data(),
            outputs as isize,
            1,
            self.weight.data(),
            1,
            outputs as isize,
            T::zero(),
            dx.data_mut(),
            inputs as isize,
            1,
        );
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn param_names(&self) -> Vec<String> {
        vec![prefixed(&self.name, "weight"), prefixed(&self.name, "bias")]
    }
}
