//! Trilinear 8-node hexahedron in natural coordinates `[-1, 1]^3`.
//!
//! Node order: bottom face (ζ = -1) counter-clockwise, then the top face.

use nalgebra::{Matrix3, Vector3};

pub const NODE_XI: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local node ids of the six faces, ordered ξ-, ξ+, η-, η+, ζ-, ζ+.
pub const FACES: [[usize; 4]; 6] = [
    [0, 4, 7, 3],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 3, 2, 1],
    [4, 5, 6, 7],
];

/// Face opposite to the given one (ξ- <-> ξ+ etc.).
pub const fn opposite_face(face: usize) -> usize {
    face ^ 1
}

/// Shape function values and their natural-coordinate gradients.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub values: [f64; 8],
    pub gradients: [Vector3<f64>; 8],
}

pub fn shape_eval(xi: Vector3<f64>) -> ShapeEval {
    let mut values = [0.0; 8];
    let mut gradients = [Vector3::zeros(); 8];
    for (a, node) in NODE_XI.iter().enumerate() {
        let s = 1.0 + node[0] * xi.x;
        let t = 1.0 + node[1] * xi.y;
        let u = 1.0 + node[2] * xi.z;
        values[a] = 0.125 * s * t * u;
        gradients[a] = Vector3::new(
            0.125 * node[0] * t * u,
            0.125 * s * node[1] * u,
            0.125 * s * t * node[2],
        );
    }
    ShapeEval { values, gradients }
}

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_1d(order: usize) -> (Vec<f64>, Vec<f64>) {
    match order {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let g = 1.0 / 3f64.sqrt();
            (vec![-g, g], vec![1.0, 1.0])
        }
        3 => {
            let g = (0.6f64).sqrt();
            (vec![-g, 0.0, g], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => panic!("unsupported Gauss order {order}"),
    }
}

/// Tensor-product Gauss rule on the reference cube.
pub fn gauss_hex(order: usize) -> Vec<(Vector3<f64>, f64)> {
    let (pts, wts) = gauss_1d(order);
    let mut out = Vec::with_capacity(order * order * order);
    for (k, &z) in pts.iter().enumerate() {
        for (j, &y) in pts.iter().enumerate() {
            for (i, &x) in pts.iter().enumerate() {
                out.push((Vector3::new(x, y, z), wts[i] * wts[j] * wts[k]));
            }
        }
    }
    out
}

/// Jacobian of the isoparametric map, `J_ij = ∂X_i/∂ξ_j`.
pub fn jacobian(coords: &[Vector3<f64>; 8], grads: &[Vector3<f64>; 8]) -> Matrix3<f64> {
    let mut jac = Matrix3::zeros();
    for a in 0..8 {
        jac += coords[a] * grads[a].transpose();
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn center_values_are_one_eighth() {
        let s = shape_eval(Vector3::zeros());
        for v in s.values {
            assert_eq!(v, 0.125);
        }
    }

    #[test]
    fn kronecker_property_at_corners() {
        for (k, node) in NODE_XI.iter().enumerate() {
            let s = shape_eval(Vector3::from(*node));
            for (a, v) in s.values.iter().enumerate() {
                let expected = if a == k { 1.0 } else { 0.0 };
                assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let xi = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let s = shape_eval(xi);
            let sum: f64 = s.values.iter().sum();
            let grad_sum: Vector3<f64> = s.gradients.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(grad_sum.norm() < 1e-14);
        }
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for order in 1..=4 {
            let (p, w) = gauss_1d(order);
            let degree = 2 * order - 1;
            for d in 0..=degree {
                let num: f64 = p.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-14, "order {order} degree {d}");
            }
        }
    }

    #[test]
    fn opposite_faces_pair_up() {
        for f in 0..6 {
            assert_eq!(opposite_face(opposite_face(f)), f);
            let a: Vec<_> = FACES[f].iter().map(|&n| NODE_XI[n][f / 2]).collect();
            assert!(a.iter().all(|&x| x == a[0]));
            let b: Vec<_> = FACES[opposite_face(f)].iter().map(|&n| NODE_XI[n][f / 2]).collect();
            assert_eq!(a[0], -b[0]);
        }
    }
}
