use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which optimizer partition a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Generator,
    Discriminator,
    SharedTrunk,
    Classifier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub group: ParamGroup,
    /// `false` for buffers such as batch-norm running statistics.
    pub trainable: bool,
}

/// Named parameter tensors of one model, in creation order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams {
    params: Vec<Param>,
}

impl ModelParams {
    pub fn new() -> Self {
        ModelParams::default()
    }

    pub(crate) fn push(
        &mut self,
        name: String,
        value: Tensor,
        group: ParamGroup,
        trainable: bool,
    ) -> usize {
        debug_assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter {name}"
        );
        self.params.push(Param {
            name,
            value,
            group,
            trainable,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn get(&self, index: usize) -> &Param {
        &self.params[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Param {
        &mut self.params[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn total_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn group_count(&self, group: ParamGroup) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable && p.group == group)
            .map(|p| p.value.numel())
            .sum()
    }

    /// Indices of trainable parameters in `groups`.
    pub fn trainable_indices(&self, groups: &[ParamGroup]) -> Vec<usize> {
        self.params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.trainable && groups.contains(&p.group))
            .map(|(i, _)| i)
            .collect()
    }

    /// Records every parameter on `tape`. Trainable parameters become
    /// differentiable leaves when `differentiable` is set; all others are
    /// constants.
    pub fn bind(&self, tape: &Tape, differentiable: bool) -> BoundParams {
        let vars = self
            .params
            .iter()
            .map(|p| {
                if differentiable && p.trainable {
                    tape.leaf(p.value.clone().with_requires_grad(true))
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect();
        BoundParams { vars }
    }

    /// Replaces values from `(name, tensor)` pairs; every parameter must be
    /// present with the same shape.
    pub fn load_named(&mut self, named: &[(String, Tensor)]) -> Result<()> {
        if named.len() != self.params.len() {
            return Err(Error::CheckpointMismatch(format!(
                "expected {} tensors, found {}",
                self.params.len(),
                named.len()
            )));
        }
        for p in &mut self.params {
            let (_, t) = named.iter().find(|(n, _)| *n == p.name).ok_or_else(|| {
                Error::CheckpointMismatch(format!("missing parameter {}", p.name))
            })?;
            if t.shape() != p.value.shape() {
                return Err(Error::CheckpointMismatch(format!(
                    "{}: shape {:?} vs {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }

    /// Mutable data of the parameters at distinct `indices`, in that order.
    pub(crate) fn data_views_mut(&mut self, indices: &[usize]) -> Vec<&mut [f64]> {
        let mut slots: Vec<Option<&mut [f64]>> = self
            .params
            .iter_mut()
            .map(|p| Some(p.value.data_mut()))
            .collect();
        indices
            .iter()
            .map(|&i| slots[i].take().expect("distinct parameter indices"))
            .collect()
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect()
    }
}

/// Parameters recorded on one tape, index-aligned with [`ModelParams`].
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn get(&self, index: usize) -> &Var {
        &self.vars[index]
    }

    /// Gradients (after `backward`) of the parameters at `indices`.
    pub fn grads(&self, indices: &[usize]) -> Vec<Tensor> {
        indices
            .iter()
            .map(|&i| {
                let v = &self.vars[i];
                v.grad().unwrap_or_else(|| Tensor::zeros_like(v.value()))
            })
            .collect()
    }
}
