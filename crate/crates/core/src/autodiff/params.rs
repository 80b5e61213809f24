use std::collections::HashMap;

use super::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Ordered collection of uniquely named parameter arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T> Default for ParamSet<T> {
    fn default() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<T>) -> Result<()> {
        let name = name.into();
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::shape(
                "ParamSet::insert",
                format!("`{name}`: {} values for shape {shape:?}", data.len()),
            ));
        }
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar elements.
    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.index.get(name).map(|&i| &mut self.params[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    /// Places every parameter on `graph` as a leaf; returned handles follow
    /// the set's order.
    pub fn bind(&self, graph: &mut Graph<T>, requires_grad: bool) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|p| graph.leaf(p.data.clone(), &p.shape, requires_grad))
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.params
            .iter()
            .flat_map(|p| p.data.iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|&v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Clamps the parameters selected by `keep` into `[-c, c]`.
    pub fn clip_where(&mut self, c: T, keep: impl Fn(&str) -> bool) {
        for p in self.params.iter_mut().filter(|p| keep(&p.name)) {
            for v in &mut p.data {
                *v = v.max(-c).min(c);
            }
        }
    }
}

/// Clamps every element of every parameter into `[-c, c]`.
pub fn clip_params<T: Real>(params: &mut ParamSet<T>, c: T) {
    params.clip_where(c, |_| true);
}
