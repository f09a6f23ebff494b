//! Cell-centred field containers (struct-of-arrays, row-major, x fastest).

use nalgebra::Vector3;

pub type ScalarField = Vec<f64>;

/// Two-component planar vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PlanarField {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Three-component vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
        }
    }

    pub fn uniform(n: usize, v: Vector3<f64>) -> Self {
        Self {
            x: vec![v.x; n],
            y: vec![v.y; n],
            z: vec![v.z; n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> Vector3<f64>) -> Self {
        let mut out = Self::zeros(n);
        for k in 0..n {
            out.set(k, f(k));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn at(&self, k: usize) -> Vector3<f64> {
        Vector3::new(self.x[k], self.y[k], self.z[k])
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: Vector3<f64>) {
        self.x[k] = v.x;
        self.y[k] = v.y;
        self.z[k] = v.z;
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        match c {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("component index {c} out of range"),
        }
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut Vec<f64> {
        match c {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("component index {c} out of range"),
        }
    }

    pub fn planar(&self) -> PlanarField {
        PlanarField {
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.iter().map(|v| a * v).collect(),
            z: self.z.iter().map(|v| a * v).collect(),
        }
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let f = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p + a * q).collect();
        Self {
            x: f(&self.x, &other.x),
            y: f(&self.y, &other.y),
            z: f(&self.z, &other.z),
        }
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.at(k).norm()).fold(0.0, f64::max)
    }

    /// `max_k |(x_k, y_k)|`
    pub fn planar_max_norm(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .fold(0.0, |a, (p, q)| a.max(p.hypot(*q)))
    }

    pub fn sum_sq(&self) -> f64 {
        sum_sq(&self.x) + sum_sq(&self.y) + sum_sq(&self.z)
    }

    pub fn all_finite(&self) -> bool {
        all_finite(&self.x) && all_finite(&self.y) && all_finite(&self.z)
    }
}

pub fn sum_sq(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

pub fn all_finite(u: &[f64]) -> bool {
    u.iter().all(|v| v.is_finite())
}

pub fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}
