//! Scalar reverse-mode differentiation.
//!
//! A [`Tape`] records every elementary operation performed on [`Var`]s in
//! evaluation order. [`Tape::backward`] walks that log in reverse and
//! accumulates adjoints, so one backward pass yields the derivative of a
//! scalar output with respect to every lifted input.
//!
//! The simulator is written against the [`Scalar`] trait so the same code
//! runs on plain `f64` (fast, no recording) and on [`Var`] (recorded).
//! Branch decisions are made on [`Scalar::value`] and are never
//! differentiated.
//!
//! ```
//! use toi_sim::adjoint::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.lift(2.0);
//! let y = tape.lift(5.0);
//! let f = x * y + y;
//! let grads = tape.backward(f).unwrap();
//! assert_eq!(grads.wrt(x), 5.0);
//! assert_eq!(grads.wrt(y), 3.0);
//! ```

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Arithmetic that has no real-valued result.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    NegativeSqrt(f64),
}

/// Misuse of the tape API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TapeError {
    #[error("output value was recorded on a different tape")]
    ForeignOutput,
}

/// Numeric type the simulator is generic over.
///
/// Implemented by `f64` and by [`Var`]. Fallible operations report domain
/// violations instead of producing NaN.
pub trait Scalar:
    Copy + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// An untracked constant (zero adjoint).
    fn constant(value: f64) -> Self;

    fn value(self) -> f64;

    fn try_div(self, rhs: Self) -> Result<Self, DomainError>;

    fn try_sqrt(self) -> Result<Self, DomainError>;

    fn square(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::constant(k)
    }
}

impl Scalar for f64 {
    fn constant(value: f64) -> Self {
        value
    }

    fn value(self) -> f64 {
        self
    }

    fn try_div(self, rhs: Self) -> Result<Self, DomainError> {
        if rhs == 0.0 {
            return Err(DomainError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn try_sqrt(self) -> Result<Self, DomainError> {
        if self < 0.0 {
            return Err(DomainError::NegativeSqrt(self));
        }
        Ok(self.sqrt())
    }

    fn square(self) -> Self {
        self * self
    }

    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Elementary operation kinds recorded on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Input,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Operand {
    Absent,
    Node(u32),
    Const(f64),
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    op: OpKind,
    operands: [Operand; 2],
    partials: [f64; 2],
    value: f64,
}

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Append-only log of elementary operations.
///
/// A tape is single-threaded (`!Sync`); build one per rollout and drop it
/// after [`Tape::backward`].
pub struct Tape {
    id: u64,
    entries: RefCell<Vec<Entry>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("id", &self.id)
            .field("len", &self.len())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            entries: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            entries: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.entries.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a tracked input.
    pub fn lift(&self, value: f64) -> Var<'_> {
        let index = self.push(Entry {
            op: OpKind::Input,
            operands: [Operand::Absent; 2],
            partials: [0.0; 2],
            value,
        });
        Var {
            value,
            node: Some((self, index)),
        }
    }

    fn push(&self, entry: Entry) -> u32 {
        let mut entries = self.entries.borrow_mut();
        let index = u32::try_from(entries.len()).expect("tape exceeded u32::MAX entries");
        entries.push(entry);
        index
    }

    fn record(&self, op: OpKind, operands: [Operand; 2], partials: [f64; 2], value: f64) -> Var<'_> {
        let index = self.push(Entry {
            op,
            operands,
            partials,
            value,
        });
        Var {
            value,
            node: Some((self, index)),
        }
    }

    /// Propagates adjoints from `output` back to every recorded entry.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients, TapeError> {
        let entries = self.entries.borrow();
        let mut adjoints = vec![0.0; entries.len()];
        let seed = match output.node {
            None => None,
            Some((tape, index)) if std::ptr::eq(tape, self) => Some(index as usize),
            Some(_) => return Err(TapeError::ForeignOutput),
        };
        if let Some(seed) = seed {
            adjoints[seed] = 1.0;
            for k in (0..=seed).rev() {
                let adjoint = adjoints[k];
                if adjoint == 0.0 {
                    continue;
                }
                let entry = &entries[k];
                for (operand, partial) in entry.operands.iter().zip(entry.partials) {
                    if let Operand::Node(j) = *operand {
                        adjoints[j as usize] += partial * adjoint;
                    }
                }
            }
        }
        let inputs = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.op == OpKind::Input)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(Gradients {
            tape_id: self.id,
            adjoints,
            inputs,
        })
    }

    /// Recomputes every entry's value from the recorded inputs and constants.
    pub fn replay(&self) -> Vec<f64> {
        let entries = self.entries.borrow();
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        for entry in entries.iter() {
            let fetch = |operand: Operand| match operand {
                Operand::Node(j) => values[j as usize],
                Operand::Const(c) => c,
                Operand::Absent => f64::NAN,
            };
            let a = fetch(entry.operands[0]);
            let b = fetch(entry.operands[1]);
            let v = match entry.op {
                OpKind::Input => entry.value,
                OpKind::Add => a + b,
                OpKind::Sub => a - b,
                OpKind::Mul => a * b,
                OpKind::Div => a / b,
                OpKind::Neg => -a,
                OpKind::Sqrt => a.sqrt(),
                OpKind::Square => a * a,
            };
            values.push(v);
        }
        values
    }

    /// Recorded forward values, in log order.
    pub fn recorded_values(&self) -> Vec<f64> {
        self.entries.borrow().iter().map(|e| e.value).collect()
    }

    /// True when every operand refers to an earlier entry.
    pub fn is_topologically_ordered(&self) -> bool {
        self.entries.borrow().iter().enumerate().all(|(k, e)| {
            e.operands.iter().all(|o| match o {
                Operand::Node(j) => (*j as usize) < k,
                _ => true,
            })
        })
    }
}

/// Identifier of a lifted input on its tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputId(u32);

/// Adjoints produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    tape_id: u64,
    adjoints: Vec<f64>,
    inputs: Vec<u32>,
}

impl Gradients {
    /// Adjoint of `x`; zero for constants and values from other tapes.
    pub fn wrt(&self, x: Var<'_>) -> f64 {
        match x.node {
            Some((tape, index)) if tape.id == self.tape_id => self.adjoints[index as usize],
            _ => 0.0,
        }
    }

    /// `(input, adjoint)` pairs in lift order.
    pub fn iter(&self) -> impl Iterator<Item = (InputId, f64)> + '_ {
        self.inputs.iter().map(|&i| (InputId(i), self.adjoints[i as usize]))
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }
}

/// A scalar that is either recorded on a tape or an untracked constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    value: f64,
    node: Option<(&'t Tape, u32)>,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some((tape, index)) => write!(f, "Var({} @ {}:{})", self.value, tape.id, index),
            None => write!(f, "Var({} const)", self.value),
        }
    }
}

impl<'t> Var<'t> {
    pub fn is_constant(&self) -> bool {
        self.node.is_none()
    }

    pub fn input_id(&self) -> Option<InputId> {
        self.node.map(|(_, i)| InputId(i))
    }

    fn operand(&self) -> Operand {
        match self.node {
            Some((_, i)) => Operand::Node(i),
            None => Operand::Const(self.value),
        }
    }

    fn tape_of(a: &Var<'t>, b: &Var<'t>) -> Option<&'t Tape> {
        match (a.node, b.node) {
            (Some((ta, _)), Some((tb, _))) => {
                assert!(std::ptr::eq(ta, tb), "operands recorded on different tapes");
                Some(ta)
            }
            (Some((t, _)), None) | (None, Some((t, _))) => Some(t),
            (None, None) => None,
        }
    }

    fn binary(self, rhs: Var<'t>, op: OpKind, value: f64, partials: [f64; 2]) -> Var<'t> {
        match Self::tape_of(&self, &rhs) {
            Some(tape) => tape.record(op, [self.operand(), rhs.operand()], partials, value),
            None => Var { value, node: None },
        }
    }

    fn unary(self, op: OpKind, value: f64, partial: f64) -> Var<'t> {
        match self.node {
            Some((tape, _)) => tape.record(op, [self.operand(), Operand::Absent], [partial, 0.0], value),
            None => Var { value, node: None },
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpKind::Add, self.value + rhs.value, [1.0, 1.0])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpKind::Sub, self.value - rhs.value, [1.0, -1.0])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpKind::Mul, self.value * rhs.value, [rhs.value, self.value])
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(OpKind::Neg, -self.value, -1.0)
    }
}

impl<'t> PartialEq for Var<'t> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl<'t> PartialOrd for Var<'t> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl<'t> Scalar for Var<'t> {
    fn constant(value: f64) -> Self {
        Var { value, node: None }
    }

    fn value(self) -> f64 {
        self.value
    }

    fn try_div(self, rhs: Self) -> Result<Self, DomainError> {
        if rhs.value == 0.0 {
            return Err(DomainError::DivisionByZero);
        }
        let q = self.value / rhs.value;
        let inv = 1.0 / rhs.value;
        Ok(self.binary(rhs, OpKind::Div, q, [inv, -q * inv]))
    }

    fn try_sqrt(self) -> Result<Self, DomainError> {
        if self.value < 0.0 {
            return Err(DomainError::NegativeSqrt(self.value));
        }
        let root = self.value.sqrt();
        // d sqrt(x)/dx is unbounded at 0; the simulator never differentiates there
        let partial = if root > 0.0 { 0.5 / root } else { f64::INFINITY };
        Ok(self.unary(OpKind::Sqrt, root, partial))
    }

    fn square(self) -> Self {
        self.unary(OpKind::Square, self.value * self.value, 2.0 * self.value)
    }
}
