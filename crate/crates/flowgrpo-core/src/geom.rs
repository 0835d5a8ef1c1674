//! Small 2-D vector helpers shared across modules.

pub type Point = [f64; 2];

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

pub fn is_finite(a: Point) -> bool {
    a[0].is_finite() && a[1].is_finite()
}

/// Angle between two vectors in degrees, in [0, 180]. Undefined inputs
/// (either norm below `eps`) are the caller's responsibility.
pub fn angle_deg(a: Point, b: Point) -> f64 {
    let c = (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}
