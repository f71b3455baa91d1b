use super::{Activation, Cache, Layer, Module};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, Default)]
pub struct Sequential<T: Scalar = f32> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Sequential { layers }
    }

    pub fn push(&mut self, layer: impl Into<Layer<T>>) {
        self.layers.push(layer.into());
    }
}

impl<T: Scalar> Module<T> for Sequential<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let mut h = x.clone();
        let mut children = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (next, cache) = layer.forward_train(&h)?;
            children.push(cache);
            h = next;
        }
        Ok((
            h,
            Cache {
                children,
                ..Cache::default()
            },
        ))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let counts: Vec<usize> = self.layers.iter().map(|l| l.params().len()).collect();
        let mut end = grads.len();
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let start = end - counts[i];
            g = layer.backward(&cache.children[i], &g, &mut grads[start..end])?;
            end = start;
        }
        Ok(g)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn param_names(&self) -> Vec<String> {
        self.layers.iter().flat_map(|l| l.param_names()).collect()
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.buffers()).collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.buffers_mut()).collect()
    }
}

/// `post(main(x) + shortcut(x))`, where a missing shortcut is the identity.
#[derive(Clone, Debug)]
pub struct Residual<T: Scalar = f32> {
    pub main: Box<Layer<T>>,
    pub shortcut: Option<Box<Layer<T>>>,
    pub post: Option<Activation>,
}

impl<T: Scalar> Residual<T> {
    pub fn new(main: impl Into<Layer<T>>, shortcut: Option<Layer<T>>, post: Option<Activation>) -> Self {
        Residual {
            main: Box::new(main.into()),
            shortcut: shortcut.map(Box::new),
            post,
        }
    }
}

impl<T: Scalar> Module<T> for Residual<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = self.main.forward(x)?;
        match &self.shortcut {
            Some(s) => y.add_assign(&s.forward(x)?)?,
            None => y.add_assign(x)?,
        }
        Ok(match self.post {
            Some(act) => act.apply(&y),
            None => y,
        })
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let (mut y, c_main) = self.main.forward_train(x)?;
        let mut children = vec![c_main];
        match &mut self.shortcut {
            Some(s) => {
                let (ys, c_short) = s.forward_train(x)?;
                y.add_assign(&ys)?;
                children.push(c_short);
            }
            None => y.add_assign(x)?,
        }
        let (out, tensors) = match self.post {
            Some(act) => (act.apply(&y), vec![y]),
            None => (y, Vec::new()),
        };
        Ok((
            out,
            Cache {
                tensors,
                children,
                ..Cache::default()
            },
        ))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let g_sum = match self.post {
            Some(act) => act.backward(&cache.tensors[0], grad_out)?,
            None => grad_out.clone(),
        };
        let n_main = self.main.params().len();
        let (g_main, g_short) = grads.split_at_mut(n_main);
        let mut dx = self.main.backward(&cache.children[0], &g_sum, g_main)?;
        match &self.shortcut {
            Some(s) => dx.add_assign(&s.backward(&cache.children[1], &g_sum, g_short)?)?,
            None => dx.add_assign(&g_sum)?,
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.main.params();
        if let Some(s) = &self.shortcut {
            p.extend(s.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.main.params_mut();
        if let Some(s) = &mut self.shortcut {
            p.extend(s.params_mut());
        }
        p
    }

    fn param_names(&self) -> Vec<String> {
        let mut p = self.main.param_names();
        if let Some(s) = &self.shortcut {
            p.extend(s.param_names());
        }
        p
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        let mut p = self.main.buffers();
        if let Some(s) = &self.shortcut {
            p.extend(s.buffers());
        }
        p
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.main.buffers_mut();
        if let Some(s) = &mut self.shortcut {
            p.extend(s.buffers_mut());
        }
        p
    }
}
