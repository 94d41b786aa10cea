//! Named parameter tensors and their initialization.

use std::collections::HashMap;

use rand::Rng;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Tensor<T> {
        Tensor { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::from(x).expect("finite parameter")).collect(),
        }
    }
}

/// Parameters in registration order, addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore { names: Vec::new(), tensors: Vec::new(), index: HashMap::new() }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> ParamStore<T> {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<T>) -> usize {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.index.insert(name.to_string(), self.tensors.len() - 1);
        self.tensors.len() - 1
    }

    /// Registers a `rows×cols` tensor drawn from `U(-bound, bound)`.
    pub fn uniform<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, bound: f64, rng: &mut R) -> usize {
        let data = (0..rows * cols).map(|_| T::from(rng.gen_range(-bound..=bound)).unwrap()).collect();
        self.insert(name, Tensor { rows, cols, data })
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.insert(name, Tensor::zeros(rows, cols))
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.id(name).map(|i| &mut self.tensors[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }

    /// Sets every parameter to zero.
    pub fn zero_all(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x = T::zero());
        }
    }
}
