use super::{AutodiffError, Graph, Tensor, Var};

pub type ParamId = usize;

#[derive(Clone, Debug, PartialEq)]
struct Param {
    name: String,
    value: Tensor,
    grad: Tensor,
}

/// Named trainable tensors with gradient buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: name.into(),
            value,
            grad,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Places every parameter on `g` as a differentiable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| g.leaf(p.value.clone()))
            .collect()
    }

    /// Places every parameter on `g` as a constant.
    pub fn bind_const(&self, g: &mut Graph) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| g.constant(p.value.clone()))
            .collect()
    }

    /// Adds the graph gradients of `vars` (as returned by [`ParamSet::bind`])
    /// into the parameter gradient buffers.
    pub fn accumulate_grads(&mut self, g: &Graph, vars: &[Var]) {
        for (p, v) in self.params.iter_mut().zip(vars) {
            p.grad.add_assign(g.grad(*v));
        }
    }

    /// All values concatenated in insertion order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.grad.data().iter().copied())
            .collect()
    }

    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<(), AutodiffError> {
        if flat.len() != self.num_scalars() {
            return Err(AutodiffError::ShapeMismatch {
                op: "set_flat_values",
                lhs: vec![self.num_scalars()],
                rhs: vec![flat.len()],
            });
        }
        let mut off = 0;
        for p in &mut self.params {
            let n = p.value.numel();
            p.value.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.data().iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}
