//! Scalar reverse-mode tape.
//!
//! Every recorded value is a node holding the ids of its inputs and the
//! local partial derivative with respect to each of them. Nodes are only
//! ever appended, so inputs always precede their consumers and a single
//! reverse sweep visits every node exactly once.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::AdError;

const CONST_ID: u32 = u32::MAX;

/// Primitive kinds understood by the tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prim {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowConst(f64),
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Relu,
    Abs,
    Min,
    Max,
    Dot,
}

impl Prim {
    fn arity(self) -> Option<usize> {
        match self {
            Prim::Leaf => Some(0),
            Prim::Add | Prim::Sub | Prim::Mul | Prim::Div | Prim::Min | Prim::Max => Some(2),
            Prim::Dot => None,
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    prim: Prim,
    start: u32,
    len: u32,
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    args: Vec<u32>,
    partials: Vec<f64>,
    kinks: usize,
}

/// Append-only record of primitive evaluations.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tape")
            .field("nodes", &inner.nodes.len())
            .field("edges", &inner.args.len())
            .finish()
    }
}

/// A value that is either recorded on a tape or a free constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    value: f64,
    id: u32,
    tape: Option<&'t Tape>,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node_id() {
            Some(id) => write!(f, "Var({} @{})", self.value, id),
            None => write!(f, "Const({})", self.value),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        Self {
            inner: RefCell::new(Inner {
                nodes: Vec::with_capacity(nodes),
                args: Vec::with_capacity(edges),
                partials: Vec::with_capacity(edges),
                kinks: 0,
            }),
        }
    }

    /// New independent variable (a leaf).
    pub fn var(&self, value: f64) -> Var<'_> {
        let id = self.push(Prim::Leaf, &[]);
        Var {
            value,
            id,
            tape: Some(self),
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of edges (input references) recorded so far.
    pub fn edge_count(&self) -> usize {
        self.inner.borrow().args.len()
    }

    /// How many times a primitive was evaluated exactly at a
    /// non-differentiable point (relu/abs at 0, min/max ties).
    pub fn kink_count(&self) -> usize {
        self.inner.borrow().kinks
    }

    /// Drops every node while keeping the allocations.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.nodes.clear();
        inner.args.clear();
        inner.partials.clear();
        inner.kinks = 0;
    }

    /// Primitive kind and input ids of a node.
    pub fn node(&self, id: usize) -> Option<(Prim, Vec<usize>)> {
        let inner = self.inner.borrow();
        let node = inner.nodes.get(id)?;
        let s = node.start as usize;
        let e = s + node.len as usize;
        Some((
            node.prim,
            inner.args[s..e].iter().map(|&a| a as usize).collect(),
        ))
    }

    fn push(&self, prim: Prim, edges: &[(u32, f64)]) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len() as u32;
        assert!(id != CONST_ID, "tape overflow");
        let start = inner.args.len() as u32;
        for &(a, p) in edges {
            inner.args.push(a);
            inner.partials.push(p);
        }
        inner.nodes.push(Node {
            prim,
            start,
            len: edges.len() as u32,
        });
        id
    }

    fn note_kink(&self) {
        self.inner.borrow_mut().kinks += 1;
    }

    /// Evaluates `kind` on `inputs`, recording it when any input lives on
    /// this tape. Rejects out-of-domain arguments.
    pub fn apply<'t>(&'t self, kind: Prim, inputs: &[Var<'t>]) -> Result<Var<'t>, AdError> {
        if let Some(n) = kind.arity() {
            if inputs.len() != n {
                return Err(AdError::Arity {
                    prim: kind,
                    expected: n,
                    got: inputs.len(),
                });
            }
        } else if !inputs.len().is_multiple_of(2) {
            return Err(AdError::Arity {
                prim: kind,
                expected: inputs.len() + 1,
                got: inputs.len(),
            });
        }
        for v in inputs {
            if let Some(t) = v.tape {
                if !std::ptr::eq(t, self) {
                    return Err(AdError::ForeignTape);
                }
            }
        }
        let x = inputs.first().copied().unwrap_or(Var::constant(0.0));
        let out = match kind {
            Prim::Leaf => {
                return Err(AdError::Arity {
                    prim: kind,
                    expected: 0,
                    got: 0,
                })
            }
            Prim::Add => inputs[0] + inputs[1],
            Prim::Sub => inputs[0] - inputs[1],
            Prim::Mul => inputs[0] * inputs[1],
            Prim::Div => inputs[0].checked_div(inputs[1])?,
            Prim::Neg => -x,
            Prim::PowConst(p) => {
                if x.value < 0.0 && p.fract() != 0.0 {
                    return Err(AdError::Domain {
                        prim: kind,
                        value: x.value,
                    });
                }
                if x.value == 0.0 && p < 1.0 {
                    return Err(AdError::Domain {
                        prim: kind,
                        value: x.value,
                    });
                }
                x.powf(p)
            }
            Prim::Sqrt => x.checked_sqrt()?,
            Prim::Exp => x.exp(),
            Prim::Ln => x.checked_ln()?,
            Prim::Sin => x.sin(),
            Prim::Cos => x.cos(),
            Prim::Tanh => x.tanh(),
            Prim::Sigmoid => x.sigmoid(),
            Prim::Relu => x.relu(),
            Prim::Abs => x.abs(),
            Prim::Min => inputs[0].min(inputs[1]),
            Prim::Max => inputs[0].max(inputs[1]),
            Prim::Dot => {
                let n = inputs.len() / 2;
                Var::dot(&inputs[..n], &inputs[n..])
            }
        };
        // Constant inputs fold to constants; attach nothing in that case.
        Ok(out)
    }

    /// Reverse accumulation from `output`. Leaves and interior nodes alike
    /// receive their adjoint; constants have none.
    pub fn backward(&self, output: Var<'_>) -> Gradients {
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.nodes.len()];
        let Some(out) = output.node_id() else {
            return Gradients { adj };
        };
        if let Some(t) = output.tape {
            assert!(std::ptr::eq(t, self), "output recorded on a different tape");
        }
        adj[out] = 1.0;
        for id in (0..=out).rev() {
            let g = adj[id];
            if g == 0.0 {
                continue;
            }
            let node = inner.nodes[id];
            let s = node.start as usize;
            let e = s + node.len as usize;
            for k in s..e {
                adj[inner.args[k] as usize] += g * inner.partials[k];
            }
        }
        Gradients { adj }
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adj: Vec<f64>,
}

impl Gradients {
    /// d(output)/d(v); zero for constants and for nodes recorded after the
    /// output.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        v.node_id()
            .and_then(|id| self.adj.get(id).copied())
            .unwrap_or(0.0)
    }

    pub fn wrt_all(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.wrt(v)).collect()
    }

    pub fn get(&self, node_id: usize) -> Option<f64> {
        self.adj.get(node_id).copied()
    }

    /// Adjoints indexed by node id.
    pub fn as_slice(&self) -> &[f64] {
        &self.adj
    }
}

impl<'t> Var<'t> {
    pub const fn constant(value: f64) -> Self {
        Var {
            value,
            id: CONST_ID,
            tape: None,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.value
    }

    #[inline]
    pub fn node_id(self) -> Option<usize> {
        (self.id != CONST_ID).then_some(self.id as usize)
    }

    pub fn is_constant(self) -> bool {
        self.id == CONST_ID
    }

    #[inline]
    fn unary(self, prim: Prim, value: f64, partial: f64) -> Self {
        match self.tape {
            Some(t) if self.id != CONST_ID => Var {
                value,
                id: t.push(prim, &[(self.id, partial)]),
                tape: Some(t),
            },
            _ => Var::constant(value),
        }
    }

    #[inline]
    fn binary(self, other: Self, prim: Prim, value: f64, pa: f64, pb: f64) -> Self {
        let tape = self.tape.or(other.tape);
        match tape {
            None => Var::constant(value),
            Some(t) => {
                let id = match (self.id != CONST_ID, other.id != CONST_ID) {
                    (true, true) => t.push(prim, &[(self.id, pa), (other.id, pb)]),
                    (true, false) => t.push(prim, &[(self.id, pa)]),
                    (false, true) => t.push(prim, &[(other.id, pb)]),
                    (false, false) => return Var::constant(value),
                };
                Var {
                    value,
                    id,
                    tape: Some(t),
                }
            }
        }
    }

    pub fn sin(self) -> Self {
        self.unary(Prim::Sin, self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.unary(Prim::Cos, self.value.cos(), -self.value.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(Prim::Exp, e, e)
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(Prim::Tanh, t, 1.0 - t * t)
    }

    pub fn sigmoid(self) -> Self {
        let s = sigmoid(self.value);
        self.unary(Prim::Sigmoid, s, s * (1.0 - s))
    }

    pub fn relu(self) -> Self {
        if self.value == 0.0 {
            self.kink();
        }
        if self.value > 0.0 {
            self.unary(Prim::Relu, self.value, 1.0)
        } else {
            self.unary(Prim::Relu, 0.0, 0.0)
        }
    }

    pub fn abs(self) -> Self {
        if self.value == 0.0 {
            self.kink();
        }
        let s = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Prim::Abs, self.value.abs(), s)
    }

    pub fn powf(self, p: f64) -> Self {
        let v = self.value.powf(p);
        let d = if p == 0.0 {
            0.0
        } else {
            p * self.value.powf(p - 1.0)
        };
        self.unary(Prim::PowConst(p), v, d)
    }

    pub fn min(self, other: Self) -> Self {
        if self.value == other.value {
            self.kink_with(other);
        }
        if self.value <= other.value {
            self.binary(other, Prim::Min, self.value, 1.0, 0.0)
        } else {
            self.binary(other, Prim::Min, other.value, 0.0, 1.0)
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self.value == other.value {
            self.kink_with(other);
        }
        if self.value >= other.value {
            self.binary(other, Prim::Max, self.value, 1.0, 0.0)
        } else {
            self.binary(other, Prim::Max, other.value, 0.0, 1.0)
        }
    }

    pub fn checked_sqrt(self) -> Result<Self, AdError> {
        if !(self.value >= 0.0) {
            return Err(AdError::Domain {
                prim: Prim::Sqrt,
                value: self.value,
            });
        }
        let r = self.value.sqrt();
        let d = if r > 0.0 { 0.5 / r } else { f64::INFINITY };
        Ok(self.unary(Prim::Sqrt, r, d))
    }

    /// `sqrt(max(x, 0))` with derivative 0 for `x <= 0`.
    pub fn sqrt_clamped(self) -> Self {
        if self.value > 0.0 {
            let r = self.value.sqrt();
            self.unary(Prim::Sqrt, r, 0.5 / r)
        } else {
            self.unary(Prim::Sqrt, 0.0, 0.0)
        }
    }

    pub fn checked_ln(self) -> Result<Self, AdError> {
        if !(self.value > 0.0) {
            return Err(AdError::Domain {
                prim: Prim::Ln,
                value: self.value,
            });
        }
        Ok(self.unary(Prim::Ln, self.value.ln(), 1.0 / self.value))
    }

    pub fn checked_div(self, other: Self) -> Result<Self, AdError> {
        if other.value == 0.0 {
            return Err(AdError::Domain {
                prim: Prim::Div,
                value: other.value,
            });
        }
        Ok(self / other)
    }

    /// Inner product recorded as a single n-ary node.
    pub fn dot(a: &[Self], b: &[Self]) -> Self {
        assert_eq!(a.len(), b.len(), "dot: length mismatch");
        let value = a.iter().zip(b).map(|(x, y)| x.value * y.value).sum();
        let tape = a.iter().chain(b).find_map(|v| v.tape);
        let Some(t) = tape else {
            return Var::constant(value);
        };
        let mut edges = Vec::with_capacity(2 * a.len());
        for (x, y) in a.iter().zip(b) {
            if x.id != CONST_ID {
                edges.push((x.id, y.value));
            }
            if y.id != CONST_ID {
                edges.push((y.id, x.value));
            }
        }
        if edges.is_empty() {
            return Var::constant(value);
        }
        Var {
            value,
            id: t.push(Prim::Dot, &edges),
            tape: Some(t),
        }
    }

    /// Inner product with a constant coefficient vector.
    pub fn dot_const(a: &[Self], c: &[f64]) -> Self {
        assert_eq!(a.len(), c.len(), "dot_const: length mismatch");
        let value = a.iter().zip(c).map(|(x, y)| x.value * y).sum();
        let tape = a.iter().find_map(|v| v.tape);
        let Some(t) = tape else {
            return Var::constant(value);
        };
        let edges: Vec<(u32, f64)> = a
            .iter()
            .zip(c)
            .filter(|(x, &y)| x.id != CONST_ID && y != 0.0)
            .map(|(x, &y)| (x.id, y))
            .collect();
        if edges.is_empty() {
            return Var::constant(value);
        }
        Var {
            value,
            id: t.push(Prim::Dot, &edges),
            tape: Some(t),
        }
    }

    fn kink(self) {
        if let (Some(t), false) = (self.tape, self.is_constant()) {
            t.note_kink();
        }
    }

    fn kink_with(self, other: Self) {
        if !self.is_constant() {
            self.kink();
        } else if !other.is_constant() {
            other.kink();
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Prim::Add, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Prim::Sub, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.binary(
            rhs,
            Prim::Mul,
            self.value * rhs.value,
            rhs.value,
            self.value,
        )
    }
}

/// IEEE division; use [`Var::checked_div`] to reject a zero divisor.
impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, Prim::Div, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn neg(self) -> Self {
        self.unary(Prim::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        self.unary(Prim::Add, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        self.unary(Prim::Sub, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.unary(Prim::Mul, self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.unary(Prim::Div, self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(Prim::Sub, self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self / rhs.value;
        rhs.unary(Prim::Div, q, -q / rhs.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = x * x;
        let g = tape.backward(y);
        assert_eq!(y.value(), 9.0);
        assert_eq!(g.wrt(x), 6.0);
    }

    #[test]
    fn product_rule_and_reuse() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let y = tape.var(3.0);
        let f = x * y + y;
        let g = tape.backward(f);
        assert_eq!(g.wrt(x), 3.0);
        assert_eq!(g.wrt(y), 3.0);
    }

    #[test]
    fn sigmoid_at_zero() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let s = x.sigmoid();
        assert_eq!(s.value(), 0.5);
        assert_eq!(tape.backward(s).wrt(x), 0.25);
    }

    #[test]
    fn relu_dead_region() {
        let tape = Tape::new();
        let x = tape.var(-2.0);
        let r = x.relu();
        assert_eq!(r.value(), 0.0);
        assert_eq!(tape.backward(r).wrt(x), 0.0);
        assert_eq!(tape.kink_count(), 0);
        let z = tape.var(0.0);
        let _ = z.relu();
        assert_eq!(tape.kink_count(), 1);
    }

    #[test]
    fn constants_have_zero_gradient_and_are_not_recorded() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let c = Var::constant(4.0);
        let f = x * c + c.sin();
        let g = tape.backward(f);
        assert_eq!(g.wrt(c), 0.0);
        assert_eq!(g.wrt(x), 4.0);
        let before = tape.len();
        let _ = c * c + c.exp();
        assert_eq!(tape.len(), before);
    }

    #[test]
    fn domain_errors() {
        let tape = Tape::new();
        let neg = tape.var(-1.0);
        let zero = tape.var(0.0);
        assert!(matches!(
            tape.apply(Prim::Sqrt, &[neg]),
            Err(AdError::Domain {
                prim: Prim::Sqrt,
                ..
            })
        ));
        assert!(tape.apply(Prim::Ln, &[zero]).is_err());
        assert!(tape.apply(Prim::Ln, &[neg]).is_err());
        let one = tape.var(1.0);
        assert!(tape.apply(Prim::Div, &[one, zero]).is_err());
        assert!(tape.apply(Prim::Add, &[one]).is_err());
    }

    #[test]
    fn empty_tape_backward_is_empty() {
        let tape = Tape::new();
        let g = tape.backward(Var::constant(1.0));
        assert!(g.as_slice().is_empty());
    }

    #[test]
    fn inputs_precede_consumers() {
        let tape = Tape::new();
        let x = tape.var(0.3);
        let y = tape.var(-0.7);
        let z = (x * y).tanh() + Var::dot(&[x, y], &[y, x]);
        let _ = z;
        for id in 0..tape.len() {
            let (_, inputs) = tape.node(id).unwrap();
            assert!(inputs.iter().all(|&i| i < id));
        }
    }

    #[test]
    fn dot_matches_expanded_sum() {
        let tape = Tape::new();
        let a = tape.vars(&[1.0, -2.0, 0.5]);
        let b = tape.vars(&[0.25, 3.0, -1.0]);
        let d = Var::dot(&a, &b);
        let g = tape.backward(d);
        let t2 = Tape::new();
        let a2 = t2.vars(&[1.0, -2.0, 0.5]);
        let b2 = t2.vars(&[0.25, 3.0, -1.0]);
        let s = a2[0] * b2[0] + a2[1] * b2[1] + a2[2] * b2[2];
        let g2 = t2.backward(s);
        assert_eq!(d.value(), s.value());
        assert_eq!(g.wrt_all(&a), g2.wrt_all(&a2));
        assert_eq!(g.wrt_all(&b), g2.wrt_all(&b2));
    }
}
