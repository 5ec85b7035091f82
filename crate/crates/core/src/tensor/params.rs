use std::collections::HashMap;

use rand::Rng as _;

use super::rng::Rng;
use super::{Graph, Precision, Tensor, Var};
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named, ordered collection of trainable tensors.
///
/// Insertion order is the serialization order, so two stores built from the
/// same configuration lay out identically.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    precision: Precision,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new(precision: Precision) -> Self {
        ParamStore {
            precision,
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter {name}")));
        }
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor.with_precision(self.precision));
        Ok(ParamId(id))
    }

    /// `[rows, cols]` weight drawn from U(-1/sqrt(cols), 1/sqrt(cols)).
    pub fn add_weight(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut Rng,
    ) -> Result<ParamId> {
        let bound = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        self.add(name, Tensor::matrix(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, n: usize) -> Result<ParamId> {
        self.add(name, Tensor::zeros(&[n]))
    }

    pub fn add_ones(&mut self, name: impl Into<String>, n: usize) -> Result<ParamId> {
        self.add(name, Tensor::full(&[n], 1.0))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Mutable access for optimizers. Values written here must be re-rounded
    /// with [`Tensor::round_in_place`].
    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Overwrites every parameter with the same-named tensor of `source`.
    /// Names in `source` outside this store are returned.
    pub fn assign_from(&mut self, source: &ParamStore) -> Result<Vec<String>> {
        for (name, id) in &self.index {
            let t = source
                .by_name(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            if t.shape() != self.tensors[*id].shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    self.tensors[*id].shape()
                )));
            }
        }
        let mut extra = Vec::new();
        for (name, t) in source.iter() {
            match self.index.get(name) {
                Some(&id) => self.tensors[id] = t.clone().with_precision(self.precision),
                None => extra.push(name.to_string()),
            }
        }
        Ok(extra)
    }

    /// Copies every parameter into `graph` as a leaf.
    pub fn bind(&self, graph: &mut Graph, requires_grad: bool) -> Bound {
        Bound(
            self.tensors
                .iter()
                .map(|t| graph.leaf(t.clone(), requires_grad))
                .collect(),
        )
    }
}

/// Graph handles for every parameter of a store, in store order.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    /// Accumulated gradients, zero-filled for parameters the loss never reached.
    pub fn grads(&self, graph: &Graph) -> Vec<Tensor> {
        self.0
            .iter()
            .map(|v| {
                graph
                    .grad(*v)
                    .unwrap_or_else(|| Tensor::zeros(graph.shape(*v)))
            })
            .collect()
    }
}
