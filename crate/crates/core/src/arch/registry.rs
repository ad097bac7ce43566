use indexmap::IndexMap;

use super::ArchError;
use crate::tensor::{Graph, Real, Tensor, Var};

/// Position of a parameter inside its [`ParamRegistry`].
pub type ParamId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
}

/// Ordered, uniquely named set of learnable tensors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamRegistry<T> {
    entries: IndexMap<String, Parameter<T>>,
}

impl<T: Real> ParamRegistry<T> {
    pub fn new() -> Self {
        Self { entries: IndexMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId, ArchError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(ArchError::DuplicateParameter(name));
        }
        let (id, _) = self.entries.insert_full(name, Parameter { value, grad: None });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id).expect("parameter id").0
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.entries[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.entries[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.entries.get(name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.value.numel()).sum()
    }

    /// Scalar parameters whose name starts with `prefix.`.
    pub fn numel_under(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|(k, _)| k.strip_prefix(prefix).is_some_and(|rest| rest.starts_with('.')))
            .map(|(_, p)| p.value.numel())
            .sum()
    }

    /// Adds one gradient-tracking leaf per parameter, in registry order.
    pub fn bind(&self, graph: &mut Graph<T>) -> Vec<Var> {
        self.entries.values().map(|p| graph.param(p.value.clone())).collect()
    }

    /// Same as [`bind`](Self::bind) but the leaves are constants.
    pub fn bind_frozen(&self, graph: &mut Graph<T>) -> Vec<Var> {
        self.entries.values().map(|p| graph.constant(p.value.clone())).collect()
    }

    /// Adds the gradients held by `graph` for `vars` into each parameter's
    /// `grad`. Parameters the loss did not reach receive zeros.
    pub fn accumulate_grads(&mut self, graph: &Graph<T>, vars: &[Var]) {
        assert_eq!(vars.len(), self.entries.len(), "one var per parameter");
        for (p, &v) in self.entries.values_mut().zip(vars) {
            let slot = p.grad.get_or_insert_with(|| Tensor::zeros(p.value.shape()));
            if let Some(g) = graph.grad(v) {
                for (a, &b) in slot.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad = None;
        }
    }

    pub fn cast<U: Real>(&self) -> ParamRegistry<U> {
        ParamRegistry {
            entries: self
                .entries
                .iter()
                .map(|(k, p)| {
                    (k.clone(), Parameter { value: p.value.cast(), grad: p.grad.as_ref().map(Tensor::cast) })
                })
                .collect(),
        }
    }
}
