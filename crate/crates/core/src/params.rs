//! Named complex parameters and non-trainable buffers, plus their binding
//! onto a tape for one forward pass.

use crate::cx::CxVar;
use crate::error::{Error, Result};
use crate::tape::{Gradients, Tape};
use crate::tensor::CxTensor;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Entry<T> {
    pub name: String,
    pub value: CxTensor<T>,
    pub trainable: bool,
}

/// Ordered store of a network's trainable parameters and buffers (batch-norm
/// running statistics, power-iteration vectors).
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T> {
    entries: Vec<Entry<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: CxTensor<T>) -> ParamId {
        self.push(name.into(), value, true)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: CxTensor<T>) -> ParamId {
        self.push(name.into(), value, false)
    }

    fn push(&mut self, name: String, value: CxTensor<T>, trainable: bool) -> ParamId {
        debug_assert!(self.entries.iter().all(|e| e.name != name), "duplicate parameter {name}");
        self.entries.push(Entry { name, value, trainable });
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &CxTensor<T> {
        &self.entries[id.0].value
    }

    pub fn set(&mut self, id: ParamId, value: CxTensor<T>) {
        debug_assert_eq!(value.dims(), self.entries[id.0].value.dims());
        self.entries[id.0].value = value;
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut CxTensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn entries(&self) -> &[Entry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Number of trainable complex entries (each counts once, not per plane).
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.value.numel()).sum()
    }

    pub fn bit_eq(&self, other: &ParamSet<T>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.value.bit_eq(&b.value))
    }

    pub fn apply_updates(&mut self, updates: Vec<(ParamId, CxTensor<T>)>) {
        for (id, v) in updates {
            self.set(id, v);
        }
    }

    /// Replaces every entry from `(name, value)` pairs; all names must exist
    /// with matching shapes.
    pub fn load(&mut self, records: Vec<(String, CxTensor<T>)>) -> Result<()> {
        for (name, value) in records {
            let id = self
                .find(&name)
                .ok_or_else(|| Error::Format(format!("unknown tensor `{name}` in checkpoint")))?;
            if self.get(id).dims() != value.dims() {
                return Err(Error::Format(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    value.dims(),
                    self.get(id).dims()
                )));
            }
            self.set(id, value);
        }
        Ok(())
    }
}

/// How a network behaves during one forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Batch statistics, nothing updated (the network is frozen while the
    /// other one trains).
    Frozen,
    /// Stored running statistics only.
    Eval,
}

impl Mode {
    pub fn uses_batch_stats(self) -> bool {
        !matches!(self, Mode::Eval)
    }
}

/// Lazily places parameters of one [`ParamSet`] on a tape.
pub struct Binder<'p, T> {
    params: &'p ParamSet<T>,
    vars: Vec<Option<CxVar>>,
    trainable: bool,
    pub mode: Mode,
    buffer_updates: Vec<(ParamId, CxTensor<T>)>,
}

impl<'p, T: Scalar> Binder<'p, T> {
    /// `trainable = false` binds every parameter as a constant.
    pub fn new(params: &'p ParamSet<T>, trainable: bool, mode: Mode) -> Self {
        Self { params, vars: vec![None; params.len()], trainable, mode, buffer_updates: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    pub fn var(&mut self, tape: &mut Tape<T>, id: ParamId) -> CxVar {
        if let Some(v) = self.vars[id.0] {
            return v;
        }
        let e = &self.params.entries[id.0];
        let v = if self.trainable && e.trainable { tape.cx_param(&e.value) } else { tape.cx_constant(&e.value) };
        self.vars[id.0] = Some(v);
        v
    }

    /// Queues a new buffer value; only recorded in [`Mode::Train`].
    pub(crate) fn update_buffer(&mut self, id: ParamId, value: CxTensor<T>) {
        if self.mode == Mode::Train {
            self.buffer_updates.push((id, value));
        }
    }

    /// Buffer values produced by the pass, to be applied with
    /// [`ParamSet::apply_updates`].
    pub fn take_buffer_updates(&mut self) -> Vec<(ParamId, CxTensor<T>)> {
        std::mem::take(&mut self.buffer_updates)
    }

    /// Gradients for every bound trainable parameter, indexed by [`ParamId`].
    pub fn grads(&self, tape: &Tape<T>, g: &Gradients<T>) -> Vec<Option<CxTensor<T>>> {
        self.vars
            .iter()
            .map(|v| {
                let v = (*v)?;
                if !tape.requires_grad(v.re) {
                    return None;
                }
                let re = g.get_or_zeros(v.re, tape.value(v.re).shape());
                let im = g.get_or_zeros(v.im, tape.value(v.im).shape());
                Some(CxTensor::new(re, im).expect("planes share a shape"))
            })
            .collect()
    }
}
