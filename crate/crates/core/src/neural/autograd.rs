//! A small reverse-mode automatic differentiation core.
//!
//! A [`Var`] is an immutable node holding a value and, when it was produced by
//! an operation that needs gradients, the backward rule of that operation.
//! Leaves accumulate gradients across `backward` calls until cleared.

use std::cell::Cell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{FloralError, Result};

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(FloralError::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn full(shape: Vec<usize>, v: f64) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![v; n] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![1], data: vec![v] }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording operations for differentiation on this thread.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Inputs to a backward rule.
pub struct BackwardCtx<'a> {
    /// Gradient with respect to the op output.
    pub grad: &'a [f64],
    pub output: &'a Tensor,
    pub parents: &'a [Var],
    /// Which parents need a gradient.
    pub needs: &'a [bool],
}

type BackwardFn = Box<dyn Fn(&BackwardCtx) -> Vec<Option<Vec<f64>>> + Send + Sync>;

struct OpRecord {
    parents: Vec<Var>,
    backward: BackwardFn,
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    grad: Mutex<Option<Vec<f64>>>,
    op: Option<OpRecord>,
}

#[derive(Clone)]
pub struct Var(Arc<Node>);

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("shape", &self.0.value.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl Var {
    fn make(value: Tensor, requires_grad: bool, op: Option<OpRecord>) -> Self {
        Self(Arc::new(Node { value, requires_grad, grad: Mutex::new(None), op }))
    }

    /// Trainable leaf.
    pub fn parameter(value: Tensor) -> Self {
        Self::make(value, true, None)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(value: Tensor) -> Self {
        Self::make(value, false, None)
    }

    /// Result of an operation; records `backward` only when some parent needs it.
    pub fn from_op(
        value: Tensor,
        parents: Vec<Var>,
        backward: impl Fn(&BackwardCtx) -> Vec<Option<Vec<f64>>> + Send + Sync + 'static,
    ) -> Self {
        if grad_enabled() && parents.iter().any(Var::requires_grad) {
            Self::make(value, true, Some(OpRecord { parents, backward: Box::new(backward) }))
        } else {
            Self::constant(value)
        }
    }

    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    pub fn data(&self) -> &[f64] {
        &self.0.value.data
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.value.shape
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.op.is_none()
    }

    /// Accumulated gradient of a leaf.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.lock().expect("grad lock").clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.lock().expect("grad lock") = None;
    }

    /// Mutable access to a leaf value; `None` while other references exist.
    pub fn value_mut(&mut self) -> Option<&mut Tensor> {
        Arc::get_mut(&mut self.0).map(|n| &mut n.value)
    }

    /// Replaces the value of this handle, keeping trainability.
    pub fn set_value(&mut self, value: Tensor) {
        match self.value_mut() {
            Some(v) => *v = value,
            None => *self = Self::make(value, self.requires_grad(), None),
        }
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Back-propagates from a single-element output into every reachable leaf.
    pub fn backward(&self) -> Result<()> {
        if self.value().numel() != 1 {
            return Err(FloralError::Autograd(format!(
                "backward needs a scalar, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        // iterative post-order DFS
        let mut order: Vec<Var> = Vec::new();
        let mut seen: HashMap<usize, ()> = HashMap::new();
        let mut stack: Vec<(Var, bool)> = vec![(self.clone(), false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
                continue;
            }
            if seen.insert(v.key(), ()).is_some() {
                continue;
            }
            stack.push((v.clone(), true));
            if let Some(op) = &v.0.op {
                for p in op.parents.iter().filter(|p| p.requires_grad()) {
                    if !seen.contains_key(&p.key()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        let mut grads: HashMap<usize, Vec<f64>> = HashMap::new();
        grads.insert(self.key(), vec![1.0]);
        for v in order.iter().rev() {
            let Some(g) = grads.remove(&v.key()) else { continue };
            match &v.0.op {
                None => {
                    let mut slot = v.0.grad.lock().expect("grad lock");
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
                Some(op) => {
                    let needs: Vec<bool> = op.parents.iter().map(Var::requires_grad).collect();
                    let ctx = BackwardCtx { grad: &g, output: &v.0.value, parents: &op.parents, needs: &needs };
                    let pgrads = (op.backward)(&ctx);
                    for (p, pg) in op.parents.iter().zip(pgrads) {
                        let Some(pg) = pg else { continue };
                        if !p.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), p.value().numel());
                        match grads.get_mut(&p.key()) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                            None => {
                                grads.insert(p.key(), pg);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
