//! Steady-state costs h(u), g(y) and the reduced objective f(u) = h(u) + g(Gu + Hw).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::SteadyStateMap;

/// h(u) = uᵀRu, g(y) = (y − y_ref)ᵀQy(y − y_ref).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub r: DMatrix<f64>,
    pub qy: DMatrix<f64>,
    pub y_ref: DVector<f64>,
}

/// h = 0, g(y) = ¼(y − y_ref)⁴ on scalar plants.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticCost {
    pub y_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cost {
    Quadratic(QuadraticCost),
    Quartic(QuarticCost),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    pub ell_u: f64,
    pub ell_y: f64,
    pub ell: f64,
    /// PL modulus; zero when the cost has none (quartic).
    pub mu: f64,
    pub ell0: f64,
    pub nu0: f64,
}

impl QuadraticCost {
    pub fn new(r: DMatrix<f64>, qy: DMatrix<f64>, y_ref: DVector<f64>) -> Result<Self> {
        if !linalg::is_spd(&r) || !linalg::is_spd(&qy) {
            return Err(Error::InvalidArgument("R and Qy must be symmetric positive definite".into()));
        }
        if qy.nrows() != y_ref.len() {
            return Err(Error::DimensionMismatch(format!(
                "Qy is {:?} but y_ref has {} entries",
                qy.shape(),
                y_ref.len()
            )));
        }
        Ok(Self { r, qy, y_ref })
    }
}

impl Cost {
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Cost::Quadratic(c) => Some(c.r.nrows()),
            Cost::Quartic(_) => Some(1),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Cost::Quadratic(c) => c.y_ref.len(),
            Cost::Quartic(_) => 1,
        }
    }

    pub fn check_dims(&self, map: &SteadyStateMap) -> Result<()> {
        let (p, m) = map.g.shape();
        if self.input_dim() != Some(m) || self.output_dim() != p {
            return Err(Error::DimensionMismatch(format!(
                "cost expects m={:?}, p={} but map G is {p}x{m}",
                self.input_dim(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    pub fn h(&self, u: &DVector<f64>) -> f64 {
        match self {
            Cost::Quadratic(c) => u.dot(&(&c.r * u)),
            Cost::Quartic(_) => 0.0,
        }
    }

    pub fn g(&self, y: &DVector<f64>) -> f64 {
        match self {
            Cost::Quadratic(c) => {
                let e = y - &c.y_ref;
                e.dot(&(&c.qy * &e))
            }
            Cost::Quartic(c) => 0.25 * (y[0] - c.y_ref).powi(4),
        }
    }

    /// ∇h(u) written into `out`.
    pub fn grad_h_into(&self, u: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Cost::Quadratic(c) => out.gemv(2.0, &c.r, u, 0.0),
            Cost::Quartic(_) => out.fill(0.0),
        }
    }

    /// ∇g(y) written into `out`; `scratch` has the length of y.
    pub fn grad_g_into(&self, y: &DVector<f64>, scratch: &mut DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Cost::Quadratic(c) => {
                scratch.copy_from(y);
                *scratch -= &c.y_ref;
                out.gemv(2.0, &c.qy, scratch, 0.0);
            }
            Cost::Quartic(c) => out[0] = (y[0] - c.y_ref).powi(3),
        }
    }

    pub fn grad_h(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        self.grad_h_into(u, &mut out);
        out
    }

    pub fn grad_g(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(y.len());
        let mut scratch = DVector::zeros(y.len());
        self.grad_g_into(y, &mut scratch, &mut out);
        out
    }

    /// f(u) = h(u) + g(Gu + Hw).
    pub fn f(&self, map: &SteadyStateMap, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        self.h(u) + self.g(&map.output(u, w))
    }
}

fn check_uw(cost: &Cost, map: &SteadyStateMap, u: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
    cost.check_dims(map)?;
    if u.len() != map.g.ncols() || w.len() != map.h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} entries, w has {}; map expects {} and {}",
            u.len(),
            w.len(),
            map.g.ncols(),
            map.h.ncols()
        )));
    }
    Ok(())
}

/// ∇f(u) = ∇h(u) + Gᵀ∇g(Gu + Hw).
pub fn grad_f(cost: &Cost, map: &SteadyStateMap, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    check_uw(cost, map, u, w)?;
    let y = map.output(u, w);
    Ok(cost.grad_h(u) + map.g.transpose() * cost.grad_g(&y))
}

pub fn optimal_input(cost: &Cost, map: &SteadyStateMap, w: &DVector<f64>) -> Result<DVector<f64>> {
    check_uw(cost, map, &DVector::zeros(map.g.ncols()), w)?;
    match cost {
        Cost::Quadratic(c) => {
            let gt_q = map.g.transpose() * &c.qy;
            let lhs = &c.r + &gt_q * &map.g;
            let rhs = &gt_q * (&c.y_ref - &map.h * w);
            let sol = linalg::solve(&lhs, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))
                .ok_or_else(|| Error::NotSolvable("R + G^T Qy G is singular".into()))?;
            Ok(DVector::from_column_slice(sol.as_slice()))
        }
        Cost::Quartic(c) => {
            let g = map.g[(0, 0)];
            if g == 0.0 {
                return Err(Error::NotSolvable("quartic cost with G = 0".into()));
            }
            Ok(DVector::from_element(1, (c.y_ref - (&map.h * w)[0]) / g))
        }
    }
}

/// ℓ_u = 2λ̄(R), ℓ_y = 2λ̄(Qy), ℓ = ℓ_u + ℓ_y‖G‖², μ = 2λ̲(R + GᵀQyG);
/// the reverse-Lipschitz pair is (ℓ₀, ν₀) = (μ/2, 0).
pub fn cost_constants(cost: &QuadraticCost, map: &SteadyStateMap) -> CostConstants {
    let ell_u = 2.0 * linalg::sym_max_eig(&cost.r);
    let ell_y = 2.0 * linalg::sym_max_eig(&cost.qy);
    let ell = ell_u + ell_y * map.norm_g * map.norm_g;
    let hess = linalg::symmetrize(&(&cost.r + map.g.transpose() * &cost.qy * &map.g));
    let mu = 2.0 * linalg::sym_min_eig(&hess);
    CostConstants {
        ell_u,
        ell_y,
        ell,
        mu,
        ell0: mu / 2.0,
        nu0: 0.0,
    }
}

/// Local constants of the quartic cost on the ball ‖u − u*‖ ≤ radius:
/// ℓ_y = 3G²radius², ℓ = 3G⁴radius², ℓ₀ = G⁴ν₀², μ = 0.
pub fn quartic_constants(map: &SteadyStateMap, radius: f64, nu0: f64) -> CostConstants {
    let g2 = map.g[(0, 0)].powi(2);
    let ell_y = 3.0 * g2 * radius * radius;
    CostConstants {
        ell_u: 0.0,
        ell_y,
        ell: ell_y * g2,
        mu: 0.0,
        ell0: g2 * g2 * nu0 * nu0,
        nu0,
    }
}

/// Constants for either cost kind; `radius`/`nu0` only matter for the quartic.
pub fn constants_for(cost: &Cost, map: &SteadyStateMap, radius: f64, nu0: f64) -> CostConstants {
    match cost {
        Cost::Quadratic(c) => cost_constants(c, map),
        Cost::Quartic(_) => quartic_constants(map, radius, nu0),
    }
}

/// ½‖∇f(u)‖² ≥ μ(f(u) − f*) − 1e-9 on every sample.
pub fn check_pl(
    cost: &Cost,
    map: &SteadyStateMap,
    w: &DVector<f64>,
    samples: &[DVector<f64>],
    mu: f64,
) -> Result<bool> {
    let u_star = optimal_input(cost, map, w)?;
    let f_star = cost.f(map, &u_star, w);
    for u in samples {
        let g = grad_f(cost, map, u, w)?;
        if 0.5 * g.norm_squared() < mu * (cost.f(map, u, w) - f_star) - 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// ‖∇f(u)‖ > ℓ₀‖u − u*‖ whenever ‖u − u*‖ > ν₀.
pub fn check_reverse_lipschitz(
    cost: &Cost,
    map: &SteadyStateMap,
    w: &DVector<f64>,
    samples: &[DVector<f64>],
    ell0: f64,
    nu0: f64,
) -> Result<bool> {
    let u_star = optimal_input(cost, map, w)?;
    for u in samples {
        let dist = (u - &u_star).norm();
        if dist > nu0 && grad_f(cost, map, u, w)?.norm() <= ell0 * dist {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn identity_quadratic(k: usize) -> (Cost, SteadyStateMap) {
        let i = DMatrix::<f64>::identity(k, k);
        let cost = Cost::Quadratic(QuadraticCost::new(i.clone(), i.clone(), DVector::zeros(k)).unwrap());
        (cost, SteadyStateMap::from_matrices(i, DMatrix::zeros(k, k)))
    }

    #[test]
    fn quadratic_gradient_identity() {
        let (cost, map) = identity_quadratic(2);
        let u = DVector::from_vec(vec![0.3, -1.2]);
        let g = grad_f(&cost, &map, &u, &DVector::zeros(2)).unwrap();
        assert!((g - &u * 4.0).amax() < 1e-15);
    }

    #[test]
    fn quartic_gradient_and_optimum() {
        let cost = Cost::Quartic(QuarticCost { y_ref: 0.0 });
        let map = SteadyStateMap::from_matrices(scalar(1.0), scalar(0.0));
        let g = grad_f(&cost, &map, &DVector::from_element(1, 2.0), &DVector::zeros(1)).unwrap();
        assert_eq!(g[0], 8.0);

        let cost = Cost::Quartic(QuarticCost { y_ref: 3.0 });
        let map = SteadyStateMap::from_matrices(scalar(1.0), scalar(1.0));
        let u = optimal_input(&cost, &map, &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(u[0], 2.0);

        let flat = SteadyStateMap::from_matrices(scalar(0.0), scalar(1.0));
        assert!(matches!(
            optimal_input(&cost, &flat, &DVector::zeros(1)),
            Err(Error::NotSolvable(_))
        ));
    }

    #[test]
    fn quadratic_optimum_at_origin() {
        let (cost, map) = identity_quadratic(3);
        let u = optimal_input(&cost, &map, &DVector::zeros(3)).unwrap();
        assert_eq!(u, DVector::zeros(3));
    }

    #[test]
    fn constants_examples() {
        let (cost, map) = identity_quadratic(2);
        let Cost::Quadratic(q) = &cost else { unreachable!() };
        let k = cost_constants(q, &map);
        assert_eq!((k.ell_u, k.ell_y, k.ell, k.mu), (2.0, 2.0, 4.0, 4.0));

        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let q = QuadraticCost::new(r, DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let map = SteadyStateMap::from_matrices(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2));
        let k = cost_constants(&q, &map);
        assert!((k.ell - 4.0).abs() < 1e-14 && (k.mu - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pl_rejects_overstated_modulus() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0]));
        let q = QuadraticCost::new(r, DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let map = SteadyStateMap::from_matrices(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2));
        let mu = cost_constants(&q, &map).mu;
        let cost = Cost::Quadratic(q);
        let w = DVector::zeros(2);
        let along_min = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![-3.0, 0.0])];
        assert!(check_pl(&cost, &map, &w, &along_min, mu).unwrap());
        assert!(!check_pl(&cost, &map, &w, &along_min, 1.5 * mu).unwrap());
        assert!(check_pl(&cost, &map, &w, &[DVector::zeros(2)], 10.0 * mu).unwrap());
    }

    #[test]
    fn reverse_lipschitz_examples() {
        let cost = Cost::Quartic(QuarticCost { y_ref: 0.0 });
        let map = SteadyStateMap::from_matrices(scalar(1.0), scalar(0.0));
        let w = DVector::zeros(1);
        let samples: Vec<_> = (-40..=40).map(|i| DVector::from_element(1, i as f64 * 0.1)).collect();
        assert!(check_reverse_lipschitz(&cost, &map, &w, &samples, 1.0, 1.0).unwrap());
        // ν₀ = 0.5 with ℓ₀ = 1 fails just outside the ball.
        assert!(!check_reverse_lipschitz(&cost, &map, &w, &samples, 1.0, 0.5).unwrap());
        let inside = vec![DVector::from_element(1, 0.2)];
        assert!(check_reverse_lipschitz(&cost, &map, &w, &inside, 100.0, 1.0).unwrap());
        let k = quartic_constants(&map, 1.5, 0.5);
        assert_eq!(k.ell0, 0.25);
        assert!((k.ell - 6.75).abs() < 1e-15);
    }
}
