//! Reverse-mode tape over scalar nodes.
//!
//! Every arithmetic operation on a [`Var`] appends one node holding the
//! indices of its parents and the local partial derivatives with respect to
//! them. Parents are always created before children, so a single sweep from
//! the root back to index 0 accumulates all adjoints.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{sigmoid, signum0, Scalar};
use super::AutodiffError;

/// Kind of operation recorded in a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Param,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddConst,
    MulConst,
    Sqrt,
    Exp,
    Relu,
    Sigmoid,
    Abs,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    parents: [usize; 2],
    partials: [f64; 2],
    value: f64,
}

impl Node {
    fn arity(&self) -> usize {
        match self.op {
            Op::Leaf | Op::Param => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }
}

/// Append-only computation graph. One tape per evaluation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<Vec<usize>>,
}

/// Identifier of a registered trainable parameter (registration order).
pub type ParamId = usize;

/// Scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{} = {})", self.index, self.value)
    }
}

/// Result of a backward sweep.
#[derive(Debug, Clone)]
pub struct Adjoints {
    adjoint: Vec<f64>,
    /// Number of nodes processed by the sweep.
    pub visited: usize,
}

impl Adjoints {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoint[v.index]
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
            params: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Operation and value recorded at node `index`.
    pub fn node(&self, index: usize) -> (Op, f64) {
        let n = self.nodes.borrow()[index];
        (n.op, n.value)
    }

    /// Non-trainable input.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(Op::Leaf, [0, 0], [0.0, 0.0], value)
    }

    /// Trainable parameter; its gradient appears in [`Tape::grad`] at the
    /// returned variable's registration position.
    pub fn param(&self, value: f64) -> Var<'_> {
        let v = self.push(Op::Param, [0, 0], [0.0, 0.0], value);
        self.params.borrow_mut().push(v.index);
        v
    }

    pub fn params(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&x| self.param(x)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.borrow().len()
    }

    fn push(&self, op: Op, parents: [usize; 2], partials: [f64; 2], value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        debug_assert!(parents.iter().all(|&p| p <= index));
        nodes.push(Node { op, parents, partials, value });
        Var { tape: self, index, value }
    }

    /// Backward sweep seeded with `d(out)/d(seed var) = weight` for every
    /// `(var, weight)` pair, i.e. the adjoint of `Σ weight·var`.
    pub fn backward_seeded(&self, seeds: &[(Var<'_>, f64)]) -> Adjoints {
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; nodes.len()];
        for (v, w) in seeds {
            assert!(std::ptr::eq(v.tape, self), "seed from a different tape");
            adjoint[v.index] += w;
        }
        let mut visited = 0;
        for i in (0..nodes.len()).rev() {
            visited += 1;
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..node.arity() {
                adjoint[node.parents[k]] += a * node.partials[k];
            }
        }
        Adjoints { adjoint, visited }
    }

    pub fn backward(&self, root: Var<'_>) -> Adjoints {
        self.backward_seeded(&[(root, 1.0)])
    }

    /// Gradient of `loss` with respect to every registered parameter, in
    /// registration order. Parameters the graph does not reach get 0.
    pub fn grad(&self, loss: Var<'_>) -> Result<Vec<f64>, AutodiffError> {
        if !loss.value.is_finite() {
            return Err(AutodiffError::NonFinite { what: "loss", value: loss.value });
        }
        let adj = self.backward(loss);
        let params = self.params.borrow();
        Ok(params.iter().map(|&i| adj.adjoint[i]).collect())
    }
}

/// Free-function form of [`Tape::grad`].
pub fn grad(loss: Var<'_>) -> Result<Vec<f64>, AutodiffError> {
    loss.tape.grad(loss)
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn index(&self) -> usize {
        self.index
    }

    fn unary(self, op: Op, value: f64, partial: f64) -> Self {
        self.tape.push(op, [self.index, 0], [partial, 0.0], value)
    }

    fn binary(self, other: Self, op: Op, value: f64, partials: [f64; 2]) -> Self {
        assert!(std::ptr::eq(self.tape, other.tape), "mixing tapes");
        self.tape.push(op, [self.index, other.index], partials, value)
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, self.value + rhs.value, [1.0, 1.0])
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, self.value - rhs.value, [1.0, -1.0])
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, self.value * rhs.value, [rhs.value, self.value])
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, Op::Div, q, [1.0 / rhs.value, -q / rhs.value])
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.value, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(Op::AddConst, self.value + rhs, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(Op::AddConst, self.value - rhs, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(Op::MulConst, self.value * rhs, rhs)
    }
}

impl Scalar for Var<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn constant_like(&self, c: f64) -> Self {
        self.tape.var(c)
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.unary(Op::Sqrt, r, 0.5 / r)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(Op::Exp, e, e)
    }

    fn relu(self) -> Self {
        if self.value > 0.0 {
            self.unary(Op::Relu, self.value, 1.0)
        } else {
            self.unary(Op::Relu, 0.0, 0.0)
        }
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid(self.value);
        self.unary(Op::Sigmoid, s, s * (1.0 - s))
    }

    fn abs(self) -> Self {
        self.unary(Op::Abs, self.value.abs(), signum0(self.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let p = tape.param(3.0);
        let loss = p * p;
        assert_eq!(tape.grad(loss).unwrap(), vec![6.0]);
    }

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let p = tape.param(2.0);
        let q = tape.param(5.0);
        assert_eq!(tape.grad(p * q).unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        let tape = Tape::new();
        let p = tape.param(0.0);
        assert_eq!(tape.grad(p.sigmoid()).unwrap(), vec![0.25]);
    }

    #[test]
    fn unreached_param_gets_zero() {
        let tape = Tape::new();
        let p = tape.param(1.5);
        let _unused = tape.param(7.0);
        let g = tape.grad(p.exp()).unwrap();
        assert_eq!(g[1], 0.0);
        assert!((g[0] - 1.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let tape = Tape::new();
        let p = tape.param(0.0);
        let loss = tape.var(1.0) / p;
        assert!(matches!(tape.grad(loss), Err(AutodiffError::NonFinite { .. })));
    }

    #[test]
    fn backward_visits_each_node_once() {
        let tape = Tape::new();
        let p = tape.param(0.3);
        let mut acc = p;
        for k in 0..50 {
            acc = (acc * p + k as f64).sigmoid();
        }
        let adj = tape.backward(acc);
        assert_eq!(adj.visited, tape.len());
        assert_eq!(tape.node(acc.index()), (Op::Sigmoid, acc.value()));
    }

    #[test]
    fn relu_and_abs_zero_subgradient() {
        let tape = Tape::new();
        let p = tape.param(0.0);
        assert_eq!(tape.grad(p.relu()).unwrap(), vec![0.0]);
        let tape = Tape::new();
        let p = tape.param(0.0);
        assert_eq!(tape.grad(p.abs()).unwrap(), vec![0.0]);
    }

    #[test]
    fn parents_precede_children() {
        let tape = Tape::new();
        let a = tape.param(1.0);
        let b = tape.var(2.0);
        let c = (a * b).exp() - a;
        let nodes = tape.nodes.borrow();
        for (i, n) in nodes.iter().enumerate() {
            for k in 0..n.arity() {
                assert!(n.parents[k] < i);
            }
        }
        assert_eq!(c.index(), nodes.len() - 1);
    }
}
