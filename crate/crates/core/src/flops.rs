//! Thread-local multiply counter used by the instrumented forward pass.
//!
//! Counting is off unless a [`measure`] scope is active on the current
//! thread. Fully-connected multiplies are recorded by [`Tensor::matmul`];
//! the layer ops record their elementwise multiplies themselves.
//!
//! [`Tensor::matmul`]: crate::tensor::Tensor::matmul

use std::cell::RefCell;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Multiplies inside matrix products (fully-connected layers).
    Fc,
    /// Every other multiply or divide (normalization, GELU, pooling).
    Elementwise,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub fc: u64,
    pub elementwise: u64,
}

impl Tally {
    pub fn total(&self) -> u64 {
        self.fc + self.elementwise
    }
}

thread_local! {
    static ACTIVE: RefCell<Vec<Tally>> = const { RefCell::new(Vec::new()) };
}

pub fn record(kind: Kind, count: u64) {
    ACTIVE.with(|stack| {
        if let Some(top) = stack.borrow_mut().last_mut() {
            match kind {
                Kind::Fc => top.fc += count,
                Kind::Elementwise => top.elementwise += count,
            }
        }
    });
}

/// Runs `f` and returns its result with the multiplies it recorded.
///
/// Scopes nest: an inner scope's counts are also added to the enclosing one.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, Tally) {
    ACTIVE.with(|stack| stack.borrow_mut().push(Tally::default()));
    let out = f();
    let tally = ACTIVE.with(|stack| {
        let mut stack = stack.borrow_mut();
        let tally = stack.pop().expect("measure scope");
        if let Some(parent) = stack.last_mut() {
            parent.fc += tally.fc;
            parent.elementwise += tally.elementwise;
        }
        tally
    });
    (out, tally)
}
