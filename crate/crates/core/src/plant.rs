//! Switched LTI plants, Lyapunov certificates and steady-state maps.

use nalgebra::{Complex, DMatrix, DVector};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiMode {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

impl LtiMode {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, e: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || e.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "mode with A {:?}, B {:?}, E {:?}",
                a.shape(),
                b.shape(),
                e.shape()
            )));
        }
        Ok(Self { a, b, e })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// −A⁻¹[B E], the equilibrium gains for u and w.
    pub fn equilibrium_gains(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let xu = -linalg::solve(&self.a, &self.b).ok_or(Error::SingularA)?;
        let xw = -linalg::solve(&self.a, &self.e).ok_or(Error::SingularA)?;
        Ok((xu, xw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedPlant {
    pub modes: Vec<LtiMode>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl SwitchedPlant {
    pub fn new(modes: Vec<LtiMode>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::InvalidArgument("plant needs at least one mode".into()))?;
        let (n, m, q) = (first.a.nrows(), first.b.ncols(), first.e.ncols());
        if n == 0 || m == 0 || q == 0 {
            return Err(Error::DimensionMismatch("n, m and q must be positive".into()));
        }
        for (i, mode) in modes.iter().enumerate() {
            if mode.a.shape() != (n, n) || mode.b.shape() != (n, m) || mode.e.shape() != (n, q) {
                return Err(Error::DimensionMismatch(format!(
                    "mode {} has A {:?}, B {:?}, E {:?}; expected n={n}, m={m}, q={q}",
                    i + 1,
                    mode.a.shape(),
                    mode.b.shape(),
                    mode.e.shape()
                )));
            }
        }
        let p = c.nrows();
        if p == 0 || c.ncols() != n || d.shape() != (p, q) {
            return Err(Error::DimensionMismatch(format!(
                "C {:?} and D {:?} incompatible with n={n}, q={q}",
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { modes, c, d })
    }

    pub fn n(&self) -> usize {
        self.modes[0].a.nrows()
    }
    pub fn m(&self) -> usize {
        self.modes[0].b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn q(&self) -> usize {
        self.modes[0].e.ncols()
    }
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub lambda_min_q: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
}

impl StabilityCertificate {
    /// Solves AᵀP + PA = −Q.
    pub fn from_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let p = linalg::solve_lyapunov(a, q)?;
        Self::from_pair(a, p, q.clone())
    }

    /// Default certificate with Q = I.
    pub fn default_for(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::from_lyapunov(a, &DMatrix::identity(n, n))
    }

    /// Checks a user-supplied pair: both SPD and AᵀP + PA + Q ⪯ 0 up to 1e-8‖Q‖.
    pub fn from_pair(a: &DMatrix<f64>, p: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if p.shape() != (n, n) || q.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "certificate P {:?}, Q {:?} for n={n}",
                p.shape(),
                q.shape()
            )));
        }
        if !linalg::is_spd(&p) || !linalg::is_spd(&q) {
            return Err(Error::InvalidArgument(
                "certificate matrices must be symmetric positive definite".into(),
            ));
        }
        let lhs = linalg::symmetrize(&(a.transpose() * &p + &p * a + &q));
        let qn = linalg::spectral_norm(&q);
        if linalg::sym_max_eig(&lhs) > 1e-8 * qn {
            return Err(Error::InvalidArgument(
                "certificate violates A^T P + P A + Q <= 0".into(),
            ));
        }
        let ps = linalg::symmetrize(&p);
        Ok(Self {
            lambda_min_q: linalg::sym_min_eig(&linalg::symmetrize(&q)),
            lambda_min_p: linalg::sym_min_eig(&ps),
            lambda_max_p: linalg::sym_max_eig(&ps),
            p,
            q,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateMap {
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub norm_g: f64,
    pub norm_h: f64,
}

impl SteadyStateMap {
    pub fn from_matrices(g: DMatrix<f64>, h: DMatrix<f64>) -> Self {
        Self {
            norm_g: linalg::spectral_norm(&g),
            norm_h: linalg::spectral_norm(&h),
            g,
            h,
        }
    }

    /// Gu + Hw.
    pub fn output(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.g * u + &self.h * w
    }
}

/// G = −CA⁻¹B, H = D − CA⁻¹E.
pub fn steady_state_maps(
    mode: &LtiMode,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<SteadyStateMap> {
    let (xu, xw) = mode.equilibrium_gains()?;
    Ok(SteadyStateMap::from_matrices(c * xu, d + c * xw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonMapsReport {
    pub common: bool,
    pub max_deviation: f64,
}

pub fn check_common_maps(plant: &SwitchedPlant, tol: f64) -> Result<CommonMapsReport> {
    let first = steady_state_maps(&plant.modes[0], &plant.c, &plant.d)?;
    let mut max_deviation: f64 = 0.0;
    for mode in &plant.modes[1..] {
        let map = steady_state_maps(mode, &plant.c, &plant.d)?;
        max_deviation = max_deviation
            .max(linalg::spectral_norm(&(&map.g - &first.g)))
            .max(linalg::spectral_norm(&(&map.h - &first.h)));
    }
    Ok(CommonMapsReport {
        common: max_deviation <= tol,
        max_deviation,
    })
}

/// x* = −A⁻¹(Bu + Ew).
pub fn equilibrium_state(mode: &LtiMode, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != mode.b.ncols() || w.len() != mode.e.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} entries, w has {}; expected {} and {}",
            u.len(),
            w.len(),
            mode.b.ncols(),
            mode.e.ncols()
        )));
    }
    let rhs = &mode.b * u + &mode.e * w;
    let x = linalg::solve(&mode.a, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))
        .ok_or(Error::SingularA)?;
    Ok(-DVector::from_column_slice(x.as_slice()))
}

pub fn mode_eigenvalues(mode: &LtiMode) -> Result<Vec<Complex<f64>>> {
    linalg::eigenvalues(&mode.a)
}

pub fn is_hurwitz(mode: &LtiMode) -> Result<bool> {
    Ok(linalg::max_real_part(&mode.a)? < linalg::HURWITZ_TOL)
}

fn uniform_matrix<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // Row-major fill so the draw order matches the printed layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.random_range(-1.0..=1.0);
        }
    }
    m
}

fn shifted_stable<R: rand::Rng>(rng: &mut R, n: usize, margin: f64) -> DMatrix<f64> {
    let m = uniform_matrix(rng, n, n);
    let shift = linalg::sym_max_eig(&linalg::symmetrize(&m)) + margin;
    m - DMatrix::identity(n, n) * shift
}

/// Random Hurwitz modes sharing the steady-state maps of mode 1
/// (Bσ = AσA₁⁻¹B₁, Eσ = AσA₁⁻¹E₁).
pub fn random_plant<R: rand::Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    num_modes: usize,
    margin: f64,
) -> Result<SwitchedPlant> {
    let a1 = shifted_stable(rng, n, margin);
    let b1 = uniform_matrix(rng, n, m);
    let e1 = uniform_matrix(rng, n, q);
    let c = uniform_matrix(rng, p, n);
    let d = uniform_matrix(rng, p, q);
    let mut modes = vec![LtiMode::new(a1.clone(), b1.clone(), e1.clone())?];
    let a1_inv_b = linalg::solve(&a1, &b1).ok_or(Error::SingularA)?;
    let a1_inv_e = linalg::solve(&a1, &e1).ok_or(Error::SingularA)?;
    for _ in 1..num_modes {
        let a = shifted_stable(rng, n, margin);
        let b = &a * &a1_inv_b;
        let e = &a * &a1_inv_e;
        modes.push(LtiMode::new(a, b, e)?);
    }
    SwitchedPlant::new(modes, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn maps_identity_plant() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mode = LtiMode::new(-i2.clone(), i2.clone(), i2.clone()).unwrap();
        let map = steady_state_maps(&mode, &i2, &DMatrix::zeros(2, 2)).unwrap();
        assert!((map.g - &i2).amax() < 1e-15);
        assert!((map.h - &i2).amax() < 1e-15);
    }

    #[test]
    fn maps_scalar() {
        let mode = LtiMode::new(scalar(-2.0), scalar(4.0), scalar(2.0)).unwrap();
        let map = steady_state_maps(&mode, &scalar(1.0), &scalar(0.0)).unwrap();
        assert!((map.g[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((map.h[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_a_rejected() {
        let mode = LtiMode::new(scalar(0.0), scalar(1.0), scalar(1.0)).unwrap();
        assert_eq!(
            steady_state_maps(&mode, &scalar(1.0), &scalar(0.0)),
            Err(Error::SingularA)
        );
    }

    #[test]
    fn common_maps_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        let m1 = LtiMode::new(-i2.clone(), i2.clone(), i2.clone()).unwrap();
        let same = SwitchedPlant::new(vec![m1.clone(), m1.clone()], i2.clone(), z.clone()).unwrap();
        let r = check_common_maps(&same, 1e-12).unwrap();
        assert!(r.common && r.max_deviation == 0.0);

        let m2 = LtiMode::new(-&i2 * 2.0, &i2 * 2.0, &i2 * 2.0).unwrap();
        let scaled = SwitchedPlant::new(vec![m1.clone(), m2], i2.clone(), z.clone()).unwrap();
        assert!(check_common_maps(&scaled, 1e-12).unwrap().common);

        let mut b2 = &i2 * 2.0;
        b2[(0, 1)] += 0.1;
        let m3 = LtiMode::new(-&i2 * 2.0, b2, &i2 * 2.0).unwrap();
        let perturbed = SwitchedPlant::new(vec![m1, m3], i2.clone(), z).unwrap();
        let r = check_common_maps(&perturbed, 1e-6).unwrap();
        // ‖C A₂⁻¹ · 0.1 e₁e₂ᵀ‖ = 0.05
        assert!(!r.common);
        assert!((r.max_deviation - 0.05).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mode = LtiMode::new(-i2.clone(), i2.clone(), i2.clone()).unwrap();
        let x = equilibrium_state(&mode, &DVector::zeros(2), &DVector::zeros(2)).unwrap();
        assert_eq!(x, DVector::zeros(2));
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let x = equilibrium_state(&mode, &e1, &DVector::zeros(2)).unwrap();
        assert!((x - e1).amax() < 1e-15);
    }

    #[test]
    fn certificate_from_pair_validates() {
        let a = scalar(-1.0);
        let cert = StabilityCertificate::from_pair(&a, scalar(0.5), scalar(1.0)).unwrap();
        assert_eq!(cert.lambda_max_p, 0.5);
        assert!(StabilityCertificate::from_pair(&a, scalar(0.1), scalar(1.0)).is_err());
        assert!(StabilityCertificate::from_pair(&a, scalar(-0.5), scalar(1.0)).is_err());
    }

    #[test]
    fn random_plant_shares_maps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let plant = random_plant(&mut rng, 10, 5, 5, 6, 2, 0.5).unwrap();
        assert_eq!((plant.n(), plant.m(), plant.p(), plant.q()), (10, 5, 5, 6));
        for mode in &plant.modes {
            assert!(is_hurwitz(mode).unwrap());
        }
        let r = check_common_maps(&plant, 1e-8).unwrap();
        assert!(r.common, "deviation {}", r.max_deviation);
    }
}
