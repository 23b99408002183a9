use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adjoint::{DomainError, Scalar};

/// A 2D vector over any [`Scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S> Vec2<S> {
    pub const fn new(x: S, y: S) -> Self {
        Self { x, y }
    }
}

impl<S: Scalar> Vec2<S> {
    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn constant(x: f64, y: f64) -> Self {
        Self::new(S::constant(x), S::constant(y))
    }

    pub fn lift(v: Vec2<f64>) -> Self {
        Self::constant(v.x, v.y)
    }

    pub fn value(self) -> Vec2<f64> {
        Vec2::new(self.x.value(), self.y.value())
    }

    pub fn dot(self, rhs: Self) -> S {
        self.x * rhs.x + self.y * rhs.y
    }

    pub fn norm_squared(self) -> S {
        self.x.square() + self.y.square()
    }

    pub fn norm(self) -> Result<S, DomainError> {
        self.norm_squared().try_sqrt()
    }

    pub fn scale(self, k: S) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn scale_by(self, k: f64) -> Self {
        Self::new(self.x.scale(k), self.y.scale(k))
    }

    pub fn try_div(self, k: S) -> Result<Self, DomainError> {
        Ok(Self::new(self.x.try_div(k)?, self.y.try_div(k)?))
    }
}

impl Vec2<f64> {
    pub const ZERO: Vec2<f64> = Vec2::new(0.0, 0.0);

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<S: Scalar> Mul<S> for Vec2<S> {
    type Output = Self;
    fn mul(self, k: S) -> Self {
        self.scale(k)
    }
}

impl From<[f64; 2]> for Vec2<f64> {
    fn from([x, y]: [f64; 2]) -> Self {
        Self::new(x, y)
    }
}

impl From<Vec2<f64>> for [f64; 2] {
    fn from(v: Vec2<f64>) -> Self {
        [v.x, v.y]
    }
}

/// Serialized as a two-element array `[x, y]`.
impl Serialize for Vec2<f64> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        [self.x, self.y].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vec2<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        <[f64; 2]>::deserialize(deserializer).map(Vec2::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_algebra() {
        let a = Vec2::new(3.0, 4.0);
        let b = Vec2::new(-1.0, 2.0);
        assert_eq!(a + b, Vec2::new(2.0, 6.0));
        assert_eq!(a - b, Vec2::new(4.0, 2.0));
        assert_eq!(a.dot(b), 5.0);
        assert_eq!(a.norm().unwrap(), 5.0);
        assert_eq!(a.scale_by(0.5), Vec2::new(1.5, 2.0));
        assert!(Vec2::<f64>::zero().try_div(0.0).is_err());
    }
}
