use crate::adjoint::Scalar;
use crate::error::{Result, SimError};
use crate::vec2::Vec2;

use super::{ContactPair, Wall};

/// Distance below which two centers are treated as coincident.
const COINCIDENT: f64 = 1e-12;

/// Symplectic Euler candidate: velocities first, then positions with the new
/// velocities. Only Ball 1 is forced.
pub fn integrate_candidate<S: Scalar>(
    p: [Vec2<S>; 2],
    v: [Vec2<S>; 2],
    u1: Vec2<S>,
    dt: f64,
) -> ([Vec2<S>; 2], [Vec2<S>; 2]) {
    let v_hat = [v[0] + u1.scale_by(dt), v[1]];
    let p_hat = [p[0] + v_hat[0].scale_by(dt), p[1] + v_hat[1].scale_by(dt)];
    (v_hat, p_hat)
}

/// A penetrating (or exactly touching) contact at candidate positions.
#[derive(Debug, Clone, Copy)]
pub struct Penetration<S> {
    pub pair: ContactPair,
    /// Signed surface gap, `<= 0` in contact.
    pub depth: S,
    /// Unit direction from the first body to the second (wall: into the interior).
    pub normal: Vec2<S>,
    /// Center offset `p2 - p1` (ball-ball only; zero for walls).
    pub offset: Vec2<S>,
}

fn unit_offset<S: Scalar>(offset: Vec2<S>) -> Result<(S, Vec2<S>)> {
    if offset.value().length() < COINCIDENT {
        return Err(SimError::degenerate("coincident ball centers"));
    }
    let dist = offset.norm()?;
    Ok((dist, offset.try_div(dist)?))
}

/// Lists every contact whose signed gap is at most `tolerance`.
pub fn detect_penetration<S: Scalar>(
    p: [Vec2<S>; 2],
    radius: f64,
    wall: Option<&Wall>,
    tolerance: f64,
) -> Result<Vec<Penetration<S>>> {
    let mut out = Vec::new();
    let offset = p[1] - p[0];
    let gap = offset.value().length() - 2.0 * radius;
    if gap <= tolerance {
        let (dist, normal) = unit_offset(offset)?;
        out.push(Penetration {
            pair: ContactPair::BallBall,
            depth: dist - S::constant(2.0 * radius),
            normal,
            offset,
        });
    }
    if let Some(wall) = wall {
        for (pair, pos) in [(ContactPair::Ball1Wall, p[0]), (ContactPair::Ball2Wall, p[1])] {
            let depth = S::constant(wall.level - radius) - pos.y;
            if depth.value() <= tolerance {
                out.push(Penetration {
                    pair,
                    depth,
                    normal: wall.normal(),
                    offset: Vec2::zero(),
                });
            }
        }
    }
    Ok(out)
}

/// Normal component of the relative velocity; negative while approaching.
pub fn closing_rate<S: Scalar>(pair: ContactPair, v: [Vec2<S>; 2], normal: Vec2<S>) -> S {
    match pair {
        ContactPair::BallBall => (v[1] - v[0]).dot(normal),
        ContactPair::Ball1Wall => v[0].dot(normal),
        ContactPair::Ball2Wall => v[1].dot(normal),
    }
}

/// Time of impact measured back from the end of the step.
#[derive(Debug, Clone, Copy)]
pub struct Toi<S> {
    pub value: S,
    pub clamped: bool,
}

fn clamp_toi<S: Scalar>(raw: S, dt: f64) -> Toi<S> {
    if raw.value() < 0.0 {
        Toi {
            value: S::constant(0.0),
            clamped: true,
        }
    } else if raw.value() > dt {
        Toi {
            value: S::constant(dt),
            clamped: true,
        }
    } else {
        Toi {
            value: raw,
            clamped: false,
        }
    }
}

/// Depth divided by the normal closing rate, clamped to `[0, dt]`.
///
/// Both `depth` and `rate` are negative for an approaching, penetrating pair.
pub fn compute_toi<S: Scalar>(depth: S, rate: S, dt: f64) -> Result<Toi<S>> {
    Ok(clamp_toi(depth.try_div(rate)?, dt))
}

/// Rewind time at which two circles moving with constant relative velocity
/// `rel_velocity` were exactly `2 * radius` apart, given their end-of-step
/// offset. Clamped to `[0, dt]`.
pub fn swept_toi<S: Scalar>(offset: Vec2<S>, rel_velocity: Vec2<S>, radius: f64, dt: f64) -> Result<Toi<S>> {
    // |offset - w t|^2 = (2r)^2  =>  a t^2 - 2 b t + c = 0
    let a = rel_velocity.norm_squared();
    let b = offset.dot(rel_velocity);
    let c = offset.norm_squared() - S::constant(4.0 * radius * radius);
    let disc = (b.square() - a * c).try_sqrt()?;
    // non-negative root in cancellation-free form; b < 0 while approaching
    let raw = c.try_div(b - disc)?;
    Ok(clamp_toi(raw, dt))
}

/// Velocities, positions and contact normal at the rewound impact instant.
#[derive(Debug, Clone, Copy)]
pub struct CollisionState<S> {
    pub velocities: [Vec2<S>; 2],
    pub positions: [Vec2<S>; 2],
    pub normal: Vec2<S>,
}

/// Rewinds the step to `dt - toi`.
///
/// Velocity uses the pre-step velocity plus the control applied for
/// `dt - toi`; position follows the candidate velocity for the same span.
#[allow(clippy::too_many_arguments)]
pub fn collision_state<S: Scalar>(
    p: [Vec2<S>; 2],
    v: [Vec2<S>; 2],
    u1: Vec2<S>,
    v_hat: [Vec2<S>; 2],
    dt: f64,
    toi: S,
    pair: ContactPair,
    wall: Option<&Wall>,
) -> Result<CollisionState<S>> {
    let before = S::constant(dt) - toi;
    let velocities = [v[0] + u1 * before, v[1]];
    let positions = [p[0] + v_hat[0] * before, p[1] + v_hat[1] * before];
    let normal = match pair {
        ContactPair::BallBall => unit_offset(positions[1] - positions[0])?.1,
        ContactPair::Ball1Wall | ContactPair::Ball2Wall => wall
            .map(Wall::normal)
            .ok_or_else(|| SimError::Config("wall contact without a wall".into()))?,
    };
    Ok(CollisionState {
        velocities,
        positions,
        normal,
    })
}

/// Frictionless, perfectly elastic response for unit masses.
///
/// Ball-ball exchanges the normal velocity components; a wall reflects the
/// ball's normal component.
pub fn resolve_elastic<S: Scalar>(v: [Vec2<S>; 2], normal: Vec2<S>, pair: ContactPair) -> [Vec2<S>; 2] {
    match pair {
        ContactPair::BallBall => {
            let exchange = normal * (v[1] - v[0]).dot(normal);
            [v[0] + exchange, v[1] - exchange]
        }
        ContactPair::Ball1Wall => [reflect(v[0], normal), v[1]],
        ContactPair::Ball2Wall => [v[0], reflect(v[1], normal)],
    }
}

fn reflect<S: Scalar>(v: Vec2<S>, normal: Vec2<S>) -> Vec2<S> {
    v - normal * v.dot(normal).scale(2.0)
}
