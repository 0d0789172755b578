//! Element-wise damage update: indicator evaluation and Jacobi sweeps of
//! one-step Newton corrections until the discrete Kuhn-Tucker conditions hold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd_laplace::{NeighborStencil, StencilSet};
use crate::material::MaterialParams;

/// Per-element damage function `f = 1 - D` and erosion flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageField {
    pub f: Vec<f64>,
    pub eroded: Vec<bool>,
    /// Indicator of every element at the end of the last update.
    pub phi: Vec<f64>,
}

impl DamageField {
    pub fn undamaged(element_count: usize) -> Self {
        DamageField {
            f: vec![1.0; element_count],
            eroded: vec![false; element_count],
            phi: vec![0.0; element_count],
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn damage(&self, e: usize) -> f64 {
        1.0 - self.f[e]
    }

    pub fn max_damage(&self) -> f64 {
        self.f.iter().map(|f| 1.0 - f).fold(0.0, f64::max)
    }

    pub fn eroded_count(&self) -> usize {
        self.eroded.iter().filter(|e| **e).count()
    }

    /// Damage variable `α = -ln f`.
    pub fn alpha(&self, e: usize) -> f64 {
        -self.f[e].ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JacobiConfig {
    /// Exit once every eligible indicator is below this value (MPa).
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Update each element from the latest values instead of the
    /// start-of-sweep buffer.
    pub in_place: bool,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        JacobiConfig {
            tolerance: 1e-6,
            max_sweeps: 50_000,
            in_place: false,
        }
    }
}

/// Converged mechanical data per element.
#[derive(Debug, Clone, Copy)]
pub struct ElementLoading<'a> {
    pub psi_bar: &'a [f64],
    pub det_f_bar: &'a [f64],
}

/// `Φ = f Ψ̄₀ - β f ℓ·Δf - r`.
pub fn indicator(stencil: &NeighborStencil, f: &[f64], psi_bar: f64, params: &MaterialParams) -> f64 {
    let fe = f[stencil.element];
    fe * psi_bar - params.beta * fe * stencil.laplacian(f) - params.dissipation
}

/// `dΦ = Ψ̄₀ - β ℓ·Δf + β f ℓ·1`.
pub fn indicator_derivative(stencil: &NeighborStencil, f: &[f64], psi_bar: f64, params: &MaterialParams) -> f64 {
    let fe = f[stencil.element];
    psi_bar - params.beta * stencil.laplacian(f) + params.beta * fe * stencil.weight_sum()
}

/// One Newton correction `f ← f - Φ/dΦ`, clamped at `1 - D_crit`.
/// Returns the new value and whether the clamp was hit.
pub fn newton_step(
    stencil: &NeighborStencil,
    phi: f64,
    f: &[f64],
    psi_bar: f64,
    params: &MaterialParams,
) -> Result<(f64, bool)> {
    let e = stencil.element;
    if !(phi > 0.0) {
        return Err(Error::DamageUpdate {
            element: e,
            reason: format!("update requested for elastic element (Φ = {phi:.3e})"),
        });
    }
    let d = indicator_derivative(stencil, f, psi_bar, params);
    if !(d > 0.0) {
        return Err(Error::DamageUpdate {
            element: e,
            reason: format!("non-positive indicator derivative {d:.3e}"),
        });
    }
    let f_min = params.min_damage_function();
    let next = f[e] - phi / d;
    if next <= f_min {
        Ok((f_min, true))
    } else {
        Ok((next.min(f[e]), false))
    }
}

fn eligible(field: &DamageField, loading: &ElementLoading<'_>, e: usize) -> bool {
    !field.eroded[e] && loading.det_f_bar[e] > 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    /// Indicator passes, including the final one that confirms convergence.
    pub sweeps: usize,
    /// Largest eligible indicator at exit.
    pub max_phi: f64,
    pub newly_eroded: Vec<usize>,
    /// True if the sweep cap stopped the iteration.
    pub capped: bool,
}

/// Iterate sweeps until every eligible `Φ < tolerance` or the cap is hit.
pub fn update_damage(
    field: &mut DamageField,
    loading: &ElementLoading<'_>,
    stencils: &StencilSet,
    params: &MaterialParams,
    cfg: &JacobiConfig,
) -> Result<UpdateOutcome> {
    let n = field.len();
    let mut newly_eroded = Vec::new();
    let mut phi = vec![0.0; n];
    let mut dirty: Vec<usize> = (0..n).collect();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let f = &field.f;
        let vals: Vec<f64> = dirty
            .par_iter()
            .map(|&e| {
                if eligible(field, loading, e) {
                    indicator(stencils.get(e), f, loading.psi_bar[e], params)
                } else {
                    0.0
                }
            })
            .collect();
        for (&e, v) in dirty.iter().zip(vals) {
            phi[e] = v;
        }
        let max_phi = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        if max_phi < cfg.tolerance || sweeps > cfg.max_sweeps {
            let capped = max_phi >= cfg.tolerance;
            if capped {
                log::warn!("damage update stopped after {} sweeps with max Φ = {max_phi:.3e}", cfg.max_sweeps);
            }
            field.phi = phi;
            return Ok(UpdateOutcome {
                sweeps,
                max_phi,
                newly_eroded,
                capped,
            });
        }
        let active: Vec<usize> = (0..n).filter(|&e| phi[e] > 0.0).collect();
        let changed = if cfg.in_place {
            let mut changed = Vec::new();
            for &e in &active {
                let s = stencils.get(e);
                let p = indicator(s, &field.f, loading.psi_bar[e], params);
                if !(p > 0.0) {
                    continue;
                }
                let (next, clamp) = newton_step(s, p, &field.f, loading.psi_bar[e], params)?;
                if next != field.f[e] {
                    field.f[e] = next;
                    changed.push(e);
                }
                if clamp {
                    field.eroded[e] = true;
                    newly_eroded.push(e);
                }
            }
            changed
        } else {
            let f = &field.f;
            let updates = active
                .par_iter()
                .map(|&e| newton_step(stencils.get(e), phi[e], f, loading.psi_bar[e], params).map(|r| (e, r)))
                .collect::<Result<Vec<_>>>()?;
            let mut changed = Vec::with_capacity(updates.len());
            for (e, (next, clamp)) in updates {
                if next != field.f[e] {
                    field.f[e] = next;
                    changed.push(e);
                }
                if clamp {
                    field.eroded[e] = true;
                    newly_eroded.push(e);
                }
            }
            changed
        };
        // only indicators whose stencil saw a change need re-evaluation
        let mut mark = vec![false; n];
        for &e in &changed {
            mark[e] = true;
            for &d in stencils.dependents(e) {
                mark[d] = true;
            }
        }
        for &e in &newly_eroded {
            mark[e] = true;
        }
        dirty = (0..n).filter(|&e| mark[e]).collect();
        if cfg.in_place {
            dirty = (0..n).collect();
        }
    }
}

/// Independent per-element solution of the local model (`β = 0`):
/// `f = min(1, r/Ψ̄₀)` clamped at `1 - D_crit`, respecting irreversibility.
pub fn local_solution(f_old: f64, psi_bar: f64, params: &MaterialParams) -> f64 {
    if psi_bar <= 0.0 {
        return f_old;
    }
    (params.dissipation / psi_bar)
        .min(f_old)
        .max(params.min_damage_function())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd_laplace::StencilMode;
    use crate::mesh::{build_box, Adjacency};

    fn stencils(divs: [usize; 3]) -> StencilSet {
        let mesh = build_box([divs[0] as f64, divs[1] as f64, divs[2] as f64], divs).unwrap();
        StencilSet::build(&mesh, &Adjacency::build(&mesh), StencilMode::NinePoint).unwrap()
    }

    fn params(beta: f64) -> MaterialParams {
        MaterialParams::plate_with_hole(beta)
    }

    #[test]
    fn indicator_examples() {
        let set = stencils([3, 3, 3]);
        let f = vec![1.0; 27];
        let p = params(100.0);
        let s = set.get(13);
        assert_eq!(indicator(s, &f, 5.0, &p), 0.0);
        assert_eq!(indicator(s, &f, 0.0, &p), -5.0);
        assert_eq!(indicator(s, &f, 10.0, &p), 5.0);
    }

    #[test]
    fn local_newton_step_is_exact() {
        let set = stencils([1, 1, 1]);
        let p = params(0.0);
        let f = vec![1.0];
        let (next, clamp) = newton_step(set.get(0), 5.0, &f, 10.0, &p).unwrap();
        assert_eq!(next, 0.5);
        assert!(!clamp);
        assert!(indicator(set.get(0), &[next], 10.0, &p).abs() < 1e-15);
    }

    #[test]
    fn clamped_update_erodes() {
        let set = stencils([1, 1, 1]);
        let p = params(0.0);
        let (next, clamp) = newton_step(set.get(0), 1000.0 - 5.0, &[1.0], 1000.0, &p).unwrap();
        assert_eq!(next, 0.05_f64.max(1.0 - 0.95));
        assert!(clamp);
    }

    #[test]
    fn elastic_element_cannot_be_updated() {
        let set = stencils([1, 1, 1]);
        assert!(newton_step(set.get(0), -1.0, &[1.0], 1.0, &params(0.0)).is_err());
        assert!(newton_step(set.get(0), 0.0, &[1.0], 1.0, &params(0.0)).is_err());
    }

    fn uniform(n: usize, psi: f64, det: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![psi; n], vec![det; n])
    }

    #[test]
    fn unloaded_state_takes_one_sweep() {
        let set = stencils([3, 2, 2]);
        let mut field = DamageField::undamaged(set.len());
        let (psi, det) = uniform(set.len(), 0.0, 1.0);
        let out = update_damage(
            &mut field,
            &ElementLoading { psi_bar: &psi, det_f_bar: &det },
            &set,
            &params(100.0),
            &JacobiConfig::default(),
        )
        .unwrap();
        assert_eq!(out.sweeps, 1);
        assert!(field.f.iter().all(|f| *f == 1.0));
    }

    #[test]
    fn uniform_local_update_takes_two_sweeps() {
        let set = stencils([3, 3, 2]);
        let mut field = DamageField::undamaged(set.len());
        let (psi, det) = uniform(set.len(), 10.0, 1.1);
        let out = update_damage(
            &mut field,
            &ElementLoading { psi_bar: &psi, det_f_bar: &det },
            &set,
            &params(0.0),
            &JacobiConfig::default(),
        )
        .unwrap();
        assert_eq!(out.sweeps, 2);
        assert!(field.f.iter().all(|f| *f == 0.5));
    }

    #[test]
    fn uniform_nonlocal_update_stays_uniform() {
        let set = stencils([3, 3, 3]);
        let mut field = DamageField::undamaged(set.len());
        let (psi, det) = uniform(set.len(), 10.0, 1.1);
        update_damage(
            &mut field,
            &ElementLoading { psi_bar: &psi, det_f_bar: &det },
            &set,
            &params(100.0),
            &JacobiConfig {
                max_sweeps: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(field.f.iter().all(|f| *f == field.f[0]));
        assert!(field.f[0] < 1.0);
    }

    #[test]
    fn compression_blocks_damage() {
        let set = stencils([2, 2, 2]);
        let mut field = DamageField::undamaged(set.len());
        let (psi, det) = uniform(set.len(), 10.0, 0.9);
        let out = update_damage(
            &mut field,
            &ElementLoading { psi_bar: &psi, det_f_bar: &det },
            &set,
            &params(100.0),
            &JacobiConfig::default(),
        )
        .unwrap();
        assert_eq!(out.sweeps, 1);
        assert!(field.f.iter().all(|f| *f == 1.0));
    }

    #[test]
    fn single_hot_element_is_local() {
        let set = stencils([7, 7, 3]);
        let n = set.len();
        let hot = 3 + 7 * (3 + 7);
        let mut psi = vec![1.0; n];
        psi[hot] = 20.0;
        let det = vec![1.05; n];
        let mut field = DamageField::undamaged(n);
        update_damage(
            &mut field,
            &ElementLoading { psi_bar: &psi, det_f_bar: &det },
            &set,
            &params(100.0),
            &JacobiConfig::default(),
        )
        .unwrap();
        assert!(field.f[hot] < 1.0);
        let changed: Vec<usize> = (0..n).filter(|&e| field.f[e] != 1.0).collect();
        assert!(changed.len() < n / 2);
        // changed elements form a stencil-connected patch around the hot one
        let mut closure = vec![false; n];
        closure[hot] = true;
        loop {
            let mut grew = false;
            for e in 0..n {
                if closure[e] {
                    for &d in set.dependents(e) {
                        if !closure[d] && field.f[d] != 1.0 {
                            closure[d] = true;
                            grew = true;
                        }
                    }
                }
            }
            if !grew {
                break;
            }
        }
        for e in changed {
            assert!(closure[e]);
        }
    }

    #[test]
    fn jacobi_is_order_independent_and_monotone() {
        let set = stencils([5, 4, 2]);
        let n = set.len();
        let psi: Vec<f64> = (0..n).map(|e| 4.0 + (e % 7) as f64).collect();
        let det = vec![1.1; n];
        let loading = ElementLoading { psi_bar: &psi, det_f_bar: &det };
        let mut a = DamageField::undamaged(n);
        update_damage(&mut a, &loading, &set, &params(10.0), &JacobiConfig::default()).unwrap();
        let mut b = DamageField::undamaged(n);
        update_damage(&mut b, &loading, &set, &params(10.0), &JacobiConfig::default()).unwrap();
        assert_eq!(a.f, b.f);
        for e in 0..n {
            assert!(a.f[e] <= 1.0 && a.f[e] >= 0.05);
            if !a.eroded[e] {
                assert!(a.phi[e] < 1e-6);
            }
        }
        // a second update at the same loading changes nothing
        let before = a.f.clone();
        let out = update_damage(&mut a, &loading, &set, &params(10.0), &JacobiConfig::default()).unwrap();
        assert_eq!(out.sweeps, 1);
        assert_eq!(a.f, before);
    }

    #[test]
    fn in_place_mode_also_converges() {
        let set = stencils([5, 4, 2]);
        let n = set.len();
        let psi: Vec<f64> = (0..n).map(|e| 4.0 + (e % 5) as f64).collect();
        let det = vec![1.1; n];
        let mut field = DamageField::undamaged(n);
        let out = update_damage(
            &mut field,
            &ElementLoading { psi_bar: &psi, det_f_bar: &det },
            &set,
            &params(10.0),
            &JacobiConfig {
                in_place: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!out.capped);
        assert!(out.max_phi < 1e-6);
    }

    #[test]
    fn zero_beta_matches_local_model() {
        let set = stencils([4, 3, 2]);
        let n = set.len();
        let psi: Vec<f64> = (0..n).map(|e| 2.0 * e as f64).collect();
        let det = vec![1.2; n];
        let p = params(0.0);
        let mut field = DamageField::undamaged(n);
        update_damage(&mut field, &ElementLoading { psi_bar: &psi, det_f_bar: &det }, &set, &p, &JacobiConfig::default())
            .unwrap();
        for e in 0..n {
            let expect = local_solution(1.0, psi[e], &p);
            assert!((field.f[e] - expect).abs() < 1e-12, "element {e}");
        }
    }
}
