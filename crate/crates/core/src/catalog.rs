//! Built-in maps F, weights Ψ, parametric potential families u(x, z) and
//! their growth metadata. Everything an experiment needs is reachable from a
//! catalog id plus named parameters.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jets::{Jet, Scalar, VectorField};

/// Lower growth bound ‖F(x)‖ ≥ m‖x‖^α for ‖x‖ ≥ R.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthCertificate {
    pub m: f64,
    pub alpha: f64,
    pub r: f64,
}

impl GrowthCertificate {
    pub fn holds_at<M: VectorField>(&self, map: &M, x: &[f64]) -> bool {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let f = map.eval(x);
        let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        fnorm >= self.m * n.powf(self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum MapKind {
    /// Π (x − r_i)
    RootProduct { roots: Vec<f64> },
    /// a₁x₁² + a₂x₂² − 1
    Conic { a1: f64, a2: f64 },
    /// ((1−x²)/(1+x²), x(1−x²)/(1+x²))
    Strophoid,
    /// F(x) = x
    Line,
}

/// A catalog map F: ℝ^d → ℝ^p.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothMap {
    id: String,
    kind: MapKind,
    params: BTreeMap<String, f64>,
    d: usize,
    p: usize,
    growth: GrowthCertificate,
    domain_box: Vec<(f64, f64)>,
    known_zeros: Vec<Vec<f64>>,
    /// F is evaluated as F(x) − level.
    level: Vec<f64>,
}

pub const QUARTIC_ROOTS: [f64; 4] = [0.0, 0.5, 1.7, 2.5];

/// Ids accepted by [`build_map`].
pub const MAP_IDS: [&str; 4] = ["quartic", "conic", "strophoid", "line"];

/// Look up a catalog map by id. Unknown parameter names are rejected.
///
/// | id        | d | p | parameters (defaults)                 |
/// |-----------|---|---|---------------------------------------|
/// | quartic   | 1 | 1 | r1..r4 (0, 0.5, 1.7, 2.5)             |
/// | conic     | 2 | 1 | a1, a2 (1, 4)                         |
/// | strophoid | 1 | 2 | none                                  |
/// | line      | 1 | 1 | none                                  |
pub fn build_map(id: &str, params: &BTreeMap<String, f64>) -> Result<SmoothMap> {
    let allowed: &[&str] = match id {
        "quartic" => &["r1", "r2", "r3", "r4"],
        "conic" => &["a1", "a2"],
        "strophoid" | "line" => &[],
        _ => return Err(Error::UnknownId(id.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!(
            "`{bad}` is not a parameter of `{id}`"
        )));
    }
    if let Some((k, v)) = params.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{k} = {v} is not finite")));
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    match id {
        "quartic" => {
            let roots: Vec<f64> = ["r1", "r2", "r3", "r4"]
                .iter()
                .zip(QUARTIC_ROOTS)
                .map(|(k, r)| get(k, r))
                .collect();
            let mut m = SmoothMap::root_product(&roots, (-2.0, 5.0));
            m.id = "quartic".into();
            m.params = params.clone();
            if roots == QUARTIC_ROOTS {
                // P(x)/x⁴ ≥ 0.383 for |x| ≥ 6, so m = 0.35 keeps R = 6.
                m.growth = GrowthCertificate {
                    m: 0.35,
                    alpha: 4.0,
                    r: 6.0,
                };
            }
            Ok(m)
        }
        "conic" => SmoothMap::conic(get("a1", 1.0), get("a2", 4.0)),
        "strophoid" => Ok(SmoothMap::strophoid()),
        "line" => Ok(SmoothMap::line()),
        _ => unreachable!(),
    }
}

impl SmoothMap {
    /// The polynomial Π (x − r_i). Roots are its known zeros; repeated roots
    /// make it violate H1, which is occasionally what a test wants.
    pub fn root_product(roots: &[f64], domain: (f64, f64)) -> Self {
        let deg = roots.len().max(1) as f64;
        let spread = roots.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let mut zeros: Vec<Vec<f64>> = Vec::new();
        for &r in roots {
            if !zeros.iter().any(|z| z[0] == r) {
                zeros.push(vec![r]);
            }
        }
        Self {
            id: "root_product".into(),
            kind: MapKind::RootProduct {
                roots: roots.to_vec(),
            },
            params: BTreeMap::new(),
            d: 1,
            p: 1,
            // |Π(x − r)| ≥ Π(1 − |r|/|x|)·|x|^n; for |x| ≥ 6·max|r| each factor
            // is ≥ 5/6, so m = (5/6)^n·(a little slack) is valid there.
            growth: GrowthCertificate {
                m: 0.9 * (5.0f64 / 6.0).powf(deg),
                alpha: deg,
                r: (6.0 * spread).max(1.0),
            },
            domain_box: vec![domain],
            known_zeros: zeros,
            level: vec![0.0],
        }
    }

    pub fn conic(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "conic coefficients must be positive, got a1 = {a1}, a2 = {a2}"
            )));
        }
        let amin = a1.min(a2);
        let mut params = BTreeMap::new();
        params.insert("a1".to_string(), a1);
        params.insert("a2".to_string(), a2);
        Ok(Self {
            id: "conic".into(),
            kind: MapKind::Conic { a1, a2 },
            params,
            d: 2,
            p: 1,
            growth: GrowthCertificate {
                m: 0.5 * amin,
                alpha: 2.0,
                r: 3.0f64.max((2.0 / amin).sqrt()),
            },
            domain_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
            known_zeros: vec![
                vec![1.0 / a1.sqrt(), 0.0],
                vec![0.0, 1.0 / a2.sqrt()],
                vec![-1.0 / a1.sqrt(), 0.0],
                vec![0.0, -1.0 / a2.sqrt()],
            ],
            level: vec![0.0],
        })
    }

    pub fn strophoid() -> Self {
        Self {
            id: "strophoid".into(),
            kind: MapKind::Strophoid,
            params: BTreeMap::new(),
            d: 1,
            p: 2,
            growth: GrowthCertificate {
                m: 0.5,
                alpha: 1.0,
                r: 3.0,
            },
            domain_box: vec![(-3.0, 3.0)],
            known_zeros: vec![vec![-1.0], vec![1.0]],
            level: vec![0.0, 0.0],
        }
    }

    pub fn line() -> Self {
        Self {
            id: "line".into(),
            kind: MapKind::Line,
            params: BTreeMap::new(),
            d: 1,
            p: 1,
            growth: GrowthCertificate {
                m: 1.0,
                alpha: 1.0,
                r: 0.0,
            },
            domain_box: vec![(-5.0, 5.0)],
            known_zeros: vec![vec![0.0]],
            level: vec![0.0],
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn growth(&self) -> GrowthCertificate {
        self.growth
    }

    pub fn domain_box(&self) -> &[(f64, f64)] {
        &self.domain_box
    }

    /// Catalog-declared points of F⁻¹(0) (for the conic, the four axis points).
    pub fn known_zeros(&self) -> &[Vec<f64>] {
        &self.known_zeros
    }

    pub fn with_domain_box(mut self, domain: Vec<(f64, f64)>) -> Self {
        assert_eq!(domain.len(), self.d, "domain box dimension");
        self.domain_box = domain;
        self
    }

    /// The map x ↦ F(x) − t. Known zeros are dropped unless t = 0.
    pub fn shifted(&self, t: &[f64]) -> Result<Self> {
        if t.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: t.len(),
            });
        }
        let mut m = self.clone();
        m.level = t.to_vec();
        if t.iter().any(|&v| v != 0.0) {
            m.known_zeros.clear();
        }
        Ok(m)
    }

    /// Conic coefficients, if this is a conic.
    pub fn conic_coefficients(&self) -> Option<(f64, f64)> {
        match self.kind {
            MapKind::Conic { a1, a2 } => Some((a1, a2)),
            _ => None,
        }
    }
}

impl VectorField for SmoothMap {
    fn dim_in(&self) -> usize {
        self.d
    }

    fn dim_out(&self) -> usize {
        self.p
    }

    fn eval_into<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        match &self.kind {
            MapKind::RootProduct { roots } => {
                let mut acc = T::cst(1.0);
                for &r in roots {
                    acc = acc * (x[0] - r);
                }
                out[0] = acc - self.level[0];
            }
            MapKind::Conic { a1, a2 } => {
                out[0] = x[0] * x[0] * *a1 + x[1] * x[1] * *a2 - 1.0 - self.level[0];
            }
            MapKind::Strophoid => {
                let sq = x[0] * x[0];
                let ratio = (-sq + 1.0) / (sq + 1.0);
                out[0] = ratio - self.level[0];
                out[1] = x[0] * ratio - self.level[1];
            }
            MapKind::Line => out[0] = x[0] - self.level[0],
        }
    }
}

/// The weight Ψ in π_ε^Ψ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Weight {
    One,
    /// Ψ = JF, the generalized Jacobian of the map.
    Jacobian,
    /// Ψ(x) = 1 + ‖x‖², a named non-constant weight for tests.
    OnePlusSquaredNorm,
}

impl Weight {
    pub fn name(&self) -> &'static str {
        match self {
            Weight::One => "one",
            Weight::Jacobian => "jacobian",
            Weight::OnePlusSquaredNorm => "one_plus_sq_norm",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Weight::One),
            "jacobian" | "jf" => Ok(Weight::Jacobian),
            "one_plus_sq_norm" => Ok(Weight::OnePlusSquaredNorm),
            _ => Err(Error::UnknownId(s.to_string())),
        }
    }

    /// Ψ(x) for a given map (the map only matters for `Jacobian`).
    pub fn eval(&self, map: &SmoothMap, x: &[f64]) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Jacobian => crate::geometry::generalized_jacobian(map, x).unwrap_or(0.0),
            Weight::OnePlusSquaredNorm => 1.0 + x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    /// A constant C_Ψ with Ψ(x) ≤ C_Ψ·exp(C_Ψ‖x‖^{αk}) on the domain box.
    pub fn bound_constant(&self, map: &SmoothMap) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::OnePlusSquaredNorm => 2.0,
            Weight::Jacobian => {
                // JF grows polynomially; its sup over the domain box is a valid
                // prefactor because the exponential factor is ≥ 1.
                let pts = box_grid(map.domain_box(), 64);
                1.0 + pts.iter().map(|x| self.eval(map, x)).fold(0.0, f64::max)
            }
        }
    }

    /// H2: Ψ > 0 at every catalog zero of the map.
    pub fn positive_on_zeros(&self, map: &SmoothMap) -> bool {
        map.known_zeros().iter().all(|z| self.eval(map, z) > 0.0)
    }
}

/// Uniform tensor grid with `n` points per axis (endpoints included).
pub(crate) fn box_grid(domain: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let axis = |(a, b): (f64, f64)| -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    match domain.len() {
        1 => axis(domain[0]).into_iter().map(|x| vec![x]).collect(),
        2 => {
            let xs = axis(domain[0]);
            let ys = axis(domain[1]);
            xs.iter()
                .flat_map(|&x| ys.iter().map(move |&y| vec![x, y]))
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Test functions φ for moments and level-set integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    One,
    /// x_i
    Coord(usize),
    /// x_i^n
    CoordPow(usize, i32),
    /// |x_i|
    AbsCoord(usize),
    /// ‖F(x)‖^k for the map under consideration.
    MapNormPow(i32),
}

impl Observable {
    pub fn eval(&self, map: &SmoothMap, x: &[f64]) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::Coord(i) => x[i],
            Observable::CoordPow(i, n) => x[i].powi(n),
            Observable::AbsCoord(i) => x[i].abs(),
            Observable::MapNormPow(k) => {
                let f = map.eval(x);
                f.iter().map(|v| v * v).sum::<f64>().sqrt().powi(k)
            }
        }
    }
}

/// Parametric potential families u(x, z) with scalar x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialFamily {
    /// cos(3x) + zx, plus h(|x| − π) = y⁴/(1 + y²) outside [−π, π].
    Eq13,
    /// f(x, z) = x·z^(2k+1) on the two-point space x ∈ {0, 1}.
    Barrier { k_index: u32 },
}

pub const FAMILY_IDS: [&str; 2] = ["eq13", "barrier"];

impl PotentialFamily {
    pub fn from_id(id: &str, k_index: u32) -> Result<Self> {
        match id {
            "eq13" => Ok(PotentialFamily::Eq13),
            "barrier" => Ok(PotentialFamily::Barrier { k_index }),
            _ => Err(Error::UnknownId(id.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            PotentialFamily::Eq13 => "eq13",
            PotentialFamily::Barrier { .. } => "barrier",
        }
    }

    /// Search box for minimizers.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            PotentialFamily::Eq13 => (-3.0 * PI, 3.0 * PI),
            PotentialFamily::Barrier { .. } => (0.0, 1.0),
        }
    }

    /// u(x, z) on any scalar type; the branch is chosen from the undifferentiated x.
    pub fn eval_generic<T: Scalar>(&self, x: T, z: f64) -> T {
        match *self {
            PotentialFamily::Eq13 => {
                let xv = x.re();
                let tail = |y: T| {
                    let y2 = y * y;
                    y2 * y2 / (y2 + 1.0)
                };
                let core = (x * 3.0).cos() + x * z;
                if xv < -PI {
                    tail(x + PI) + core
                } else if xv > PI {
                    tail(x - PI) + core
                } else {
                    core
                }
            }
            PotentialFamily::Barrier { k_index } => x * z.powi(2 * k_index as i32 + 1),
        }
    }

    /// (u, ∂ₓu, ∂ₓ²u) at (x, z).
    pub fn derivatives(&self, x: f64, z: f64) -> (f64, f64, f64) {
        let xj: Jet<Jet<f64, 1>, 1> = Jet {
            v: Jet::variable(x, 0),
            du: [Jet::constant(1.0)],
        };
        let u = self.eval_generic(xj, z);
        (u.v.v, u.v.du[0], u.du[0].du[0])
    }

    /// ∂ₓu(x, z) with a single jet.
    pub fn grad_x(&self, x: f64, z: f64) -> f64 {
        self.eval_generic(Jet::<f64, 1>::variable(x, 0), z).du[0]
    }

    /// The slice x ↦ u(x, z) as a scalar map for the AD routines.
    pub fn at(&self, z: f64) -> FamilySlice {
        FamilySlice { family: *self, z }
    }
}

/// Evaluate u(x, z) by family id. The barrier family uses k_index = 0 here.
pub fn eval_family(id: &str, x: f64, z: f64) -> Result<f64> {
    let fam = PotentialFamily::from_id(id, 0)?;
    eval_family_with(fam, x, z)
}

pub fn eval_family_with(fam: PotentialFamily, x: f64, z: f64) -> Result<f64> {
    if let PotentialFamily::Barrier { .. } = fam {
        if x != 0.0 && x != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "barrier family is defined on {{0, 1}}, got x = {x}"
            )));
        }
    }
    Ok(fam.eval_generic(x, z))
}

/// U_n(x, z^{1:n}) = (1/n) Σ u(x, z_i).
pub fn empirical_potential(fam: PotentialFamily, x: f64, data: &[f64]) -> f64 {
    data.iter().map(|&z| fam.eval_generic(x, z)).sum::<f64>() / data.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilySlice {
    pub family: PotentialFamily,
    pub z: f64,
}

const EQ13_BREAKS: [f64; 2] = [-PI, PI];

impl VectorField for FamilySlice {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval_into<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        out[0] = self.family.eval_generic(x[0], self.z);
    }
    fn breakpoints(&self) -> &[f64] {
        match self.family {
            PotentialFamily::Eq13 => &EQ13_BREAKS,
            PotentialFamily::Barrier { .. } => &[],
        }
    }
}

/// Human-readable listing for the `catalog` subcommand.
pub fn describe() -> String {
    let mut s = String::new();
    s.push_str("maps:\n");
    for id in MAP_IDS {
        let m = build_map(id, &BTreeMap::new()).expect("catalog default");
        let g = m.growth();
        let params: Vec<String> = match id {
            "quartic" => vec!["r1=0".into(), "r2=0.5".into(), "r3=1.7".into(), "r4=2.5".into()],
            "conic" => vec!["a1=1".into(), "a2=4".into()],
            _ => vec![],
        };
        s.push_str(&format!(
            "  {id:<10} d={} p={} params=[{}] growth(m={}, alpha={}, R={}) box={:?}\n",
            m.d(),
            m.p(),
            params.join(", "),
            g.m,
            g.alpha,
            g.r,
            m.domain_box()
        ));
    }
    s.push_str("weights:\n  one, jacobian, one_plus_sq_norm\n");
    s.push_str("families:\n");
    s.push_str("  eq13       u(x,z) = cos(3x) + zx (+ h(|x|-pi) outside [-pi, pi])\n");
    s.push_str("  barrier    f(x,z) = x z^(2k+1), x in {0, 1}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::jacobian;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn dimensions_of_catalog_maps() {
        for (id, d, p) in [
            ("quartic", 1, 1),
            ("conic", 2, 1),
            ("strophoid", 1, 2),
            ("line", 1, 1),
        ] {
            let m = build_map(id, &none()).unwrap();
            assert_eq!((m.d(), m.p()), (d, p), "{id}");
        }
    }

    #[test]
    fn quartic_zero_set_and_derivative() {
        let m = build_map("quartic", &none()).unwrap();
        for z in m.known_zeros() {
            assert!(m.eval(z)[0].abs() <= 1e-12);
        }
        assert_eq!(m.known_zeros().len(), 4);
        let j = jacobian(&m, &[0.0]).unwrap();
        assert!((j[(0, 0)] + 2.125).abs() < 1e-15);
    }

    #[test]
    fn conic_parameters_and_gradient() {
        let mut p = none();
        p.insert("a1".into(), 1.0);
        p.insert("a2".into(), 4.0);
        let m = build_map("conic", &p).unwrap();
        let j = jacobian(&m, &[1.0, 0.0]).unwrap();
        assert_eq!((j[(0, 0)], j[(0, 1)]), (2.0, 0.0));
        p.insert("a1".into(), -1.0);
        assert!(matches!(build_map("conic", &p), Err(Error::InvalidParameter(_))));
        let mut bad = none();
        bad.insert("a3".into(), 1.0);
        assert!(build_map("conic", &bad).is_err());
        assert!(matches!(build_map("torus", &none()), Err(Error::UnknownId(_))));
    }

    #[test]
    fn eq13_values() {
        assert_eq!(eval_family("eq13", 0.0, 0.0).unwrap(), 1.0);
        assert!((eval_family("eq13", PI / 3.0, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(eval_family("barrier", 1.0, 0.7).unwrap(), 0.7);
        assert_eq!(eval_family("barrier", 0.0, 0.7).unwrap(), 0.0);
        assert!(eval_family("barrier", 0.5, 0.7).is_err());
        let (_, _, uxx) = PotentialFamily::Eq13.derivatives(PI / 3.0, 0.0);
        assert!((uxx - 9.0).abs() < 1e-12);
    }

    #[test]
    fn eq13_is_c1_across_breakpoints() {
        let f = PotentialFamily::Eq13;
        for z in [-0.5, 0.0, 0.5] {
            for b in [-PI, PI] {
                // b itself uses the middle branch; one ulp further out uses the tail.
                let outside = f64::from_bits(b.to_bits() + 1);
                let (u0, d0, _) = f.derivatives(b, z);
                let (u1, d1, _) = f.derivatives(outside, z);
                assert!((u0 - u1).abs() <= 1e-12, "value jump at {b}");
                assert!((d0 - d1).abs() <= 1e-12, "slope jump at {b}");
            }
        }
    }

    #[test]
    fn empirical_potential_is_potential_at_mean() {
        let data = [0.1, -0.4, 0.33, 0.05, -0.2];
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        for x in [-7.0, -2.0, 0.3, 3.5, 9.0] {
            let un = empirical_potential(PotentialFamily::Eq13, x, &data);
            let u = PotentialFamily::Eq13.eval_generic(x, mean);
            assert!((un - u).abs() <= 1e-12);
        }
    }

    #[test]
    fn weights_are_positive_on_zeros() {
        for id in ["quartic", "conic", "line", "strophoid"] {
            let m = build_map(id, &none()).unwrap();
            for w in [Weight::One, Weight::Jacobian, Weight::OnePlusSquaredNorm] {
                assert!(w.positive_on_zeros(&m), "{id} {w:?}");
            }
        }
        let degenerate = SmoothMap::root_product(&[0.0, 0.0], (-1.0, 1.0));
        assert!(!Weight::Jacobian.positive_on_zeros(&degenerate));
    }
}
