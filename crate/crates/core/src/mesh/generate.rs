use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use super::{Hex, Mesh};
use crate::error::{Error, Result};

/// Structured block of `na x nb x nc` hexes with nodes from `coord(a, b, c)`.
/// Node ids are `a + (na+1) * (b + (nb+1) * c)`.
struct Block {
    dims: [usize; 3],
    nodes: Vec<Vector3<f64>>,
    elements: Vec<Hex>,
}

impl Block {
    fn new(dims: [usize; 3], coord: impl Fn(usize, usize, usize) -> Vector3<f64>) -> Block {
        let [na, nb, nc] = dims;
        let mut nodes = Vec::with_capacity((na + 1) * (nb + 1) * (nc + 1));
        for c in 0..=nc {
            for b in 0..=nb {
                for a in 0..=na {
                    nodes.push(coord(a, b, c));
                }
            }
        }
        let id = |a: usize, b: usize, c: usize| a + (na + 1) * (b + (nb + 1) * c);
        // Orientation of (a, b, c) decides whether the bottom face runs
        // counter-clockwise. Checked on the first cell.
        let d = |p: usize, q: usize| nodes[q] - nodes[p];
        let flip = d(id(0, 0, 0), id(1, 0, 0))
            .cross(&d(id(0, 0, 0), id(0, 1, 0)))
            .dot(&d(id(0, 0, 0), id(0, 0, 1)))
            < 0.0;
        let mut elements = Vec::with_capacity(na * nb * nc);
        for c in 0..nc {
            for b in 0..nb {
                for a in 0..na {
                    let mut hex = [
                        id(a, b, c),
                        id(a + 1, b, c),
                        id(a + 1, b + 1, c),
                        id(a, b + 1, c),
                        id(a, b, c + 1),
                        id(a + 1, b, c + 1),
                        id(a + 1, b + 1, c + 1),
                        id(a, b + 1, c + 1),
                    ];
                    if flip {
                        hex.swap(1, 3);
                        hex.swap(5, 7);
                    }
                    elements.push(hex);
                }
            }
        }
        Block {
            dims,
            nodes,
            elements,
        }
    }

    fn select(&self, pred: impl Fn(usize, usize, usize) -> bool) -> Vec<usize> {
        let [na, nb, nc] = self.dims;
        let mut out = Vec::new();
        for c in 0..=nc {
            for b in 0..=nb {
                for a in 0..=na {
                    if pred(a, b, c) {
                        out.push(a + (na + 1) * (b + (nb + 1) * c));
                    }
                }
            }
        }
        out
    }

    fn finish(self, node_sets: BTreeMap<String, Vec<usize>>) -> Result<Mesh> {
        Mesh::new(self.nodes, self.elements, node_sets)
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be > 0, got {value}")))
    }
}

fn at_least_one(field: &str, value: usize) -> Result<()> {
    if value >= 1 {
        Ok(())
    } else {
        Err(Error::validation(field, "must be >= 1"))
    }
}

/// Structured box `[0, dx] x [0, dy] x [0, dz]`.
pub fn build_box(dimensions: [f64; 3], divisions: [usize; 3]) -> Result<Mesh> {
    for (name, v) in ["dimensions.x", "dimensions.y", "dimensions.z"]
        .iter()
        .zip(dimensions)
    {
        positive(name, v)?;
    }
    for (name, n) in ["divisions.x", "divisions.y", "divisions.z"]
        .iter()
        .zip(divisions)
    {
        at_least_one(name, n)?;
    }
    let [nx, ny, nz] = divisions;
    let [lx, ly, lz] = dimensions;
    let block = Block::new(divisions, |a, b, c| {
        Vector3::new(
            lx * a as f64 / nx as f64,
            ly * b as f64 / ny as f64,
            lz * c as f64 / nz as f64,
        )
    });
    let mut sets = BTreeMap::new();
    sets.insert("xmin".into(), block.select(|a, _, _| a == 0));
    sets.insert("xmax".into(), block.select(|a, _, _| a == nx));
    sets.insert("ymin".into(), block.select(|_, b, _| b == 0));
    sets.insert("ymax".into(), block.select(|_, b, _| b == ny));
    sets.insert("zmin".into(), block.select(|_, _, c| c == 0));
    sets.insert("zmax".into(), block.select(|_, _, c| c == nz));
    block.finish(sets)
}

/// Element divisions `(circumferential, radial, thickness)` of the
/// plate-with-hole mesh at a refinement level; the count is `50 (level+1)^3`
/// (400 at level 1, 6250 at level 4).
pub fn plate_divisions(refinement: usize) -> [usize; 3] {
    let k = refinement + 1;
    [10 * k, 5 * k, k]
}

/// Quarter plate `[0,L]^2 x [0,H]` with a quarter hole of radius `R` at the origin.
///
/// The annulus between the hole and the outer square is mapped by straight
/// radial lines; the 45° diagonal splits it into two patches so the outer
/// corner is a mesh node. Node sets: `symmetry_x` (X=0), `symmetry_y` (Y=0),
/// `load_top` (Y=L), `right` (X=L), `hole`, `zmin`, `zmax`.
pub fn build_plate_with_hole(length: f64, radius: f64, thickness: f64, refinement: usize) -> Result<Mesh> {
    positive("length", length)?;
    positive("radius", radius)?;
    positive("thickness", thickness)?;
    at_least_one("refinement", refinement)?;
    if radius >= length {
        return Err(Error::Geometry(format!(
            "hole radius {radius} must be smaller than plate length {length}"
        )));
    }
    let [n_circ, n_rad, n_z] = plate_divisions(refinement);
    let half = n_circ / 2;
    let block = Block::new([n_circ, n_rad, n_z], |a, b, c| {
        let (cos, sin) = if a == 0 {
            (1.0, 0.0)
        } else if a == n_circ {
            (0.0, 1.0)
        } else {
            let theta = FRAC_PI_2 * a as f64 / n_circ as f64;
            (theta.cos(), theta.sin())
        };
        let inner = Vector3::new(radius * cos, radius * sin, 0.0);
        let outer = if a <= half {
            Vector3::new(length, length * a as f64 / half as f64, 0.0)
        } else {
            Vector3::new(length * (n_circ - a) as f64 / half as f64, length, 0.0)
        };
        let t = b as f64 / n_rad as f64;
        let mut p = inner * (1.0 - t) + outer * t;
        p.z = thickness * c as f64 / n_z as f64;
        p
    });
    let mut sets = BTreeMap::new();
    sets.insert("symmetry_y".into(), block.select(|a, _, _| a == 0));
    sets.insert("symmetry_x".into(), block.select(|a, _, _| a == n_circ));
    sets.insert("load_top".into(), block.select(|a, b, _| b == n_rad && a >= half));
    sets.insert("right".into(), block.select(|a, b, _| b == n_rad && a <= half));
    sets.insert("hole".into(), block.select(|_, b, _| b == 0));
    sets.insert("zmin".into(), block.select(|_, _, c| c == 0));
    sets.insert("zmax".into(), block.select(|_, _, c| c == n_z));
    block.finish(sets)
}

/// Left half of a U-shaped strip: a straight vertical leg from `(-R, leg_length)`
/// down to `(-R, 0)` followed by a quarter bend of centreline radius `R`
/// (centred at the origin) ending on the symmetry plane X=0.
///
/// Strip width `S` across the centreline, thickness `H`. Node sets:
/// `symmetry_x` (bend end at X=0), `load_edge` (centreline line of the free
/// leg end at `(-R, leg_length)`), `load_end` (whole free end face), `zmin`, `zmax`.
pub fn build_u_shape(
    radius: f64,
    width: f64,
    thickness: f64,
    leg_length: f64,
    refinement: usize,
) -> Result<Mesh> {
    positive("radius", radius)?;
    positive("width", width)?;
    positive("thickness", thickness)?;
    positive("leg_length", leg_length)?;
    at_least_one("refinement", refinement)?;
    if width >= radius {
        return Err(Error::Geometry(format!(
            "strip width {width} must be smaller than bend radius {radius}"
        )));
    }
    // Even count across so the centreline is a node line.
    let n_w = 2 * refinement;
    let h = width / n_w as f64;
    let n_z = ((thickness / h).round() as usize).max(1);
    let n_leg = ((leg_length / h).round() as usize).max(1);
    let arc = FRAC_PI_2 * radius;
    let n_arc = ((arc / h).round() as usize).max(2);
    let n_path = n_leg + n_arc;
    let block = Block::new([n_w, n_path, n_z], |a, b, c| {
        let w = -0.5 * width + width * a as f64 / n_w as f64;
        let (centre, normal) = if b <= n_leg {
            let s = leg_length * b as f64 / n_leg as f64;
            (
                Vector3::new(-radius, leg_length - s, 0.0),
                Vector3::new(-1.0, 0.0, 0.0),
            )
        } else if b == n_path {
            (Vector3::new(0.0, -radius, 0.0), Vector3::new(0.0, -1.0, 0.0))
        } else {
            let theta = PI + FRAC_PI_2 * (b - n_leg) as f64 / n_arc as f64;
            let n = Vector3::new(theta.cos(), theta.sin(), 0.0);
            (n * radius, n)
        };
        let mut p = centre + normal * w;
        p.z = thickness * c as f64 / n_z as f64;
        p
    });
    let mut sets = BTreeMap::new();
    sets.insert("symmetry_x".into(), block.select(|_, b, _| b == n_path));
    sets.insert("load_edge".into(), block.select(|a, b, _| b == 0 && a == n_w / 2));
    sets.insert("load_end".into(), block.select(|_, b, _| b == 0));
    sets.insert("zmin".into(), block.select(|_, _, c| c == 0));
    sets.insert("zmax".into(), block.select(|_, _, c| c == n_z));
    block.finish(sets)
}
