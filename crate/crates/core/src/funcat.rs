//! Catalog of closed proper convex functions with exact proximity operators,
//! conjugates and recession functions.
//!
//! A [`ConvexFunction`] is an atom followed by a stack of transforms, applied
//! outermost-last: `f.translate(w)?.scale_val(2.0)?` is `y ↦ 2 f(y − w)`.
//! Every query peels the stack one transform at a time with the matching
//! calculus rule, so all atom/transform combinations stay closed-form.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{orthogonal_complement, orthonormalize, pseudo_inverse_small, DenseMap, Vector};

/// Absolute slack for set membership when evaluating indicators and
/// indicator-valued conjugates and recession functions.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A value in `]−∞, +∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PlusInfinity,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps `+∞` to [`ExtReal::PlusInfinity`]; NaN and `−∞` are rejected.
    pub fn from_f64(v: f64) -> Result<Self> {
        if v == f64::INFINITY {
            Ok(ExtReal::PlusInfinity)
        } else if v.is_finite() {
            Ok(ExtReal::Finite(v))
        } else {
            Err(Error::param(format!("{v} is not a value in ]-inf, +inf]")))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PlusInfinity => None,
        }
    }

    /// The value as `f64`, with `+∞` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    /// Multiplication by a nonnegative scalar with `0 · (+∞) = 0`.
    pub fn scale(self, rho: f64) -> ExtReal {
        debug_assert!(rho >= 0.0);
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(rho * v),
            ExtReal::PlusInfinity if rho == 0.0 => ExtReal::ZERO,
            ExtReal::PlusInfinity => ExtReal::PlusInfinity,
        }
    }

    pub fn indicator(inside: bool) -> ExtReal {
        if inside {
            ExtReal::ZERO
        } else {
            ExtReal::PlusInfinity
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PlusInfinity,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::Finite(rhs)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PlusInfinity) => Some(Ordering::Less),
            (ExtReal::PlusInfinity, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PlusInfinity, ExtReal::PlusInfinity) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PlusInfinity => write!(f, "+inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PlusInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => ExtReal::from_f64(v).map_err(D::Error::custom),
            Repr::Str(s) if s == "+inf" || s == "inf" => Ok(ExtReal::PlusInfinity),
            Repr::Str(s) => Err(D::Error::custom(format!("expected a number or \"+inf\", got {s:?}"))),
        }
    }
}

/// A convex function that can be evaluated and whose proximity operator is
/// available.
///
/// Implemented by catalog functions and by the wrappers that turn envelopes,
/// compositions and cocompositions back into functions.
pub trait ProxFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector) -> Result<ExtReal>;

    /// `argmin_y f(y) + ‖x − y‖²/(2γ)`.
    fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector>;

    /// The proximal point together with `f` at that point.
    ///
    /// Wrappers override this when the value at a proximal point is cheaper
    /// (or more accurate) than a general evaluation.
    fn prox_with_value(&self, gamma: f64, x: &Vector) -> Result<(Vector, ExtReal)> {
        let p = self.prox(gamma, x)?;
        let v = self.eval(&p)?;
        Ok((p, v))
    }

    fn conjugate(&self, _s: &Vector) -> Result<ExtReal> {
        Err(Error::UnsupportedConjugate(self.describe()))
    }

    fn recession(&self, _x: &Vector) -> Result<ExtReal> {
        Err(Error::param(format!("no recession function for {}", self.describe())))
    }

    /// A Lipschitz constant on the whole space, when one exists.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }

    /// Whether the domain is the whole space.
    fn full_domain(&self) -> bool {
        false
    }

    /// Whether `eval` is closed-form (cheap and exact).
    fn closed_form(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        "function".into()
    }
}

macro_rules! forward_prox_function {
    ($($ty:ty),*) => {$(
        impl<T: ProxFunction + ?Sized> ProxFunction for $ty {
            fn dim(&self) -> usize { (**self).dim() }
            fn eval(&self, x: &Vector) -> Result<ExtReal> { (**self).eval(x) }
            fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> { (**self).prox(gamma, x) }
            fn prox_with_value(&self, gamma: f64, x: &Vector) -> Result<(Vector, ExtReal)> {
                (**self).prox_with_value(gamma, x)
            }
            fn conjugate(&self, s: &Vector) -> Result<ExtReal> { (**self).conjugate(s) }
            fn recession(&self, x: &Vector) -> Result<ExtReal> { (**self).recession(x) }
            fn lipschitz_bound(&self) -> Option<f64> { (**self).lipschitz_bound() }
            fn full_domain(&self) -> bool { (**self).full_domain() }
            fn closed_form(&self) -> bool { (**self).closed_form() }
            fn describe(&self) -> String { (**self).describe() }
        }
    )*};
}

forward_prox_function!(&T, Box<T>, std::sync::Arc<T>);

/// `prox_{γ f*}(x)`, computed from the prox of `f` by Moreau's decomposition
/// `prox_{γf*}(x) = x − γ prox_{f/γ}(x/γ)`.
pub fn prox_conjugate<F: ProxFunction + ?Sized>(f: &F, gamma: f64, x: &Vector) -> Result<Vector> {
    check_gamma(gamma)?;
    let w = f.prox(1.0 / gamma, &x.scale(1.0 / gamma))?;
    Ok(x.axpy(-gamma, &w))
}

/// Like [`prox_conjugate`], also returning `f*` at the result, via the
/// Fenchel–Young equality at the underlying proximal pair.
pub fn prox_conjugate_with_value<F: ProxFunction + ?Sized>(
    f: &F,
    gamma: f64,
    x: &Vector,
) -> Result<(Vector, ExtReal)> {
    check_gamma(gamma)?;
    let (w, fw) = f.prox_with_value(1.0 / gamma, &x.scale(1.0 / gamma))?;
    let p = x.axpy(-gamma, &w);
    let value = match fw {
        ExtReal::Finite(v) => ExtReal::Finite(p.dot(&w) - v),
        ExtReal::PlusInfinity => ExtReal::PlusInfinity,
    };
    Ok((p, value))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("gamma must be positive and finite, got {gamma}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
struct QuadData {
    a: DenseMap,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vector>,
    pinv: DenseMap,
    range_basis: Vec<Vector>,
}

impl QuadData {
    fn new(a: DenseMap) -> Result<Self> {
        let pi = pseudo_inverse_small(&a, crate::linalg::DEFAULT_RANK_TOL)?;
        Ok(QuadData {
            eigenvalues: pi.eigenvalues.clone(),
            eigenvectors: pi.eigenvectors.clone(),
            pinv: pi.pinv.clone(),
            range_basis: pi.range_basis.clone(),
            a,
        })
    }

    fn project_range(&self, x: &Vector) -> Vector {
        self.range_basis.iter().fold(Vector::zeros(x.dim()), |acc, b| acc.axpy(b.dot(x), b))
    }

    fn full_rank(&self) -> bool {
        self.range_basis.len() == self.a.rows()
    }
}

/// One block of a separable sum: `weight · function(x[start..end])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub weight: f64,
    pub start: usize,
    pub end: usize,
    pub function: ConvexFunction,
}

#[derive(Clone, Debug, PartialEq)]
enum Atom {
    L1Norm { dim: usize },
    EuclNorm { dim: usize },
    QuadForm(Box<QuadData>),
    Affine { u: Vector, alpha: f64 },
    IndicatorBall { center: Vector, radius: f64 },
    IndicatorSubspace { dim: usize, basis: Vec<Vector> },
    DistBall { center: Vector, radius: f64 },
    SupportBall { center: Vector, radius: f64 },
    SeparableSum(Vec<Block>),
}

/// A transform applied on top of a function `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    /// `y ↦ h(y − w)`
    Translate { w: Vector },
    /// `y ↦ h(ρ y)`
    ScaleArg { rho: f64 },
    /// `y ↦ ρ h(y)`
    ScaleVal { rho: f64 },
    /// `y ↦ h(y) + ⟨u, y⟩ + α`
    AddAffine { u: Vector, alpha: f64 },
    /// `y ↦ h(y) + ρ‖y‖²/2`
    AddQuad { rho: f64 },
}

/// A closed proper convex function from the catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexFunction {
    atom: Atom,
    transforms: Vec<Transform>,
}

fn vector_param(name: &str, v: Vec<f64>) -> Result<Vector> {
    Vector::new(v).map_err(|e| Error::param(format!("{name}: {e}")))
}

fn check_radius(radius: f64) -> Result<()> {
    if radius >= 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("radius must be finite and nonnegative, got {radius}")))
    }
}

impl ConvexFunction {
    fn from_atom(atom: Atom) -> Self {
        ConvexFunction { atom, transforms: Vec::new() }
    }

    /// `‖·‖₁` on `R^dim`.
    pub fn l1_norm(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self::from_atom(Atom::L1Norm { dim })
    }

    /// `|·|` on `R`.
    pub fn abs() -> Self {
        Self::l1_norm(1)
    }

    /// The Euclidean norm on `R^dim`.
    pub fn eucl_norm(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self::from_atom(Atom::EuclNorm { dim })
    }

    /// `x ↦ ⟨Ax, x⟩/2` for symmetric positive semidefinite `A`.
    pub fn quad_form(a: DenseMap) -> Result<Self> {
        Ok(Self::from_atom(Atom::QuadForm(Box::new(QuadData::new(a)?))))
    }

    /// The quadratic kernel `‖·‖²/2` on `R^dim`.
    pub fn quadratic(dim: usize) -> Self {
        Self::quad_form(DenseMap::identity(dim)).expect("identity is PSD")
    }

    /// `x ↦ ⟨u, x⟩ + α`.
    pub fn affine(u: Vector, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::param("affine offset must be finite"));
        }
        Ok(Self::from_atom(Atom::Affine { u, alpha }))
    }

    /// Indicator of the closed ball `B(center, radius)`.
    pub fn indicator_ball(center: Vector, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self::from_atom(Atom::IndicatorBall { center, radius }))
    }

    /// Indicator of the span of `basis` in `R^dim`; the basis is
    /// orthonormalized on construction.
    pub fn indicator_subspace(dim: usize, basis: &[Vector]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        for b in basis {
            check_dim(dim, b.dim())?;
        }
        let orthonormal = basis.iter().enumerate().all(|(i, a)| {
            basis.iter().enumerate().all(|(j, b)| (a.dot(b) - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-14)
        });
        let basis = if orthonormal { basis.to_vec() } else { orthonormalize(basis)? };
        Ok(Self::from_atom(Atom::IndicatorSubspace { dim, basis }))
    }

    /// Distance to the closed ball `B(center, radius)`.
    pub fn dist_ball(center: Vector, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self::from_atom(Atom::DistBall { center, radius }))
    }

    /// Support function of `B(center, radius)`: `x ↦ ⟨c, x⟩ + r‖x‖`.
    pub fn support_ball(center: Vector, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self::from_atom(Atom::SupportBall { center, radius }))
    }

    /// `x ↦ Σ w_k f_k(x[start_k..end_k])`; the blocks must tile `0..dim`
    /// in order.
    pub fn separable_sum(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::param("separable sum needs at least one block"));
        }
        let mut next = 0;
        for (k, b) in blocks.iter().enumerate() {
            if b.start != next || b.end <= b.start {
                return Err(Error::param(format!("block {k} does not continue the tiling at {next}")));
            }
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return Err(Error::param(format!("block {k} weight must be positive")));
            }
            check_dim(b.end - b.start, b.function.dim())?;
            next = b.end;
        }
        Ok(Self::from_atom(Atom::SeparableSum(blocks)))
    }

    /// Separable sum of unit-weight blocks laid out consecutively.
    pub fn direct_sum(functions: Vec<ConvexFunction>) -> Result<Self> {
        let mut start = 0;
        let blocks = functions
            .into_iter()
            .map(|f| {
                let end = start + f.dim();
                let b = Block { weight: 1.0, start, end, function: f };
                start = end;
                b
            })
            .collect();
        Self::separable_sum(blocks)
    }

    fn push(mut self, t: Transform) -> Self {
        self.transforms.push(t);
        self
    }

    /// `y ↦ f(y − w)`
    pub fn translate(self, w: Vector) -> Result<Self> {
        check_dim(self.dim(), w.dim())?;
        Ok(self.push(Transform::Translate { w }))
    }

    /// `y ↦ f(ρ y)`, `ρ > 0`
    pub fn scale_arg(self, rho: f64) -> Result<Self> {
        positive("scale_arg", rho)?;
        Ok(self.push(Transform::ScaleArg { rho }))
    }

    /// `y ↦ ρ f(y)`, `ρ > 0`
    pub fn scale_val(self, rho: f64) -> Result<Self> {
        positive("scale_val", rho)?;
        Ok(self.push(Transform::ScaleVal { rho }))
    }

    /// `y ↦ f(y) + ⟨u, y⟩ + α`
    pub fn add_affine(self, u: Vector, alpha: f64) -> Result<Self> {
        check_dim(self.dim(), u.dim())?;
        if !alpha.is_finite() {
            return Err(Error::param("affine offset must be finite"));
        }
        Ok(self.push(Transform::AddAffine { u, alpha }))
    }

    /// `y ↦ f(y) + ρ‖y‖²/2`, `ρ ≥ 0`
    pub fn add_quad(self, rho: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::param(format!("add_quad needs rho >= 0, got {rho}")));
        }
        Ok(self.push(Transform::AddQuad { rho }))
    }

    pub fn with_transform(self, t: Transform) -> Result<Self> {
        match t {
            Transform::Translate { w } => self.translate(w),
            Transform::ScaleArg { rho } => self.scale_arg(rho),
            Transform::ScaleVal { rho } => self.scale_val(rho),
            Transform::AddAffine { u, alpha } => self.add_affine(u, alpha),
            Transform::AddQuad { rho } => self.add_quad(rho),
        }
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn atom_name(&self) -> &'static str {
        match &self.atom {
            Atom::L1Norm { .. } => "l1_norm",
            Atom::EuclNorm { .. } => "eucl_norm",
            Atom::QuadForm(_) => "quad_form",
            Atom::Affine { .. } => "affine",
            Atom::IndicatorBall { .. } => "indicator_ball",
            Atom::IndicatorSubspace { .. } => "indicator_subspace",
            Atom::DistBall { .. } => "dist_ball",
            Atom::SupportBall { .. } => "support_ball",
            Atom::SeparableSum(_) => "separable_sum",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.atom {
            Atom::L1Norm { dim } | Atom::EuclNorm { dim } | Atom::IndicatorSubspace { dim, .. } => *dim,
            Atom::QuadForm(q) => q.a.rows(),
            Atom::Affine { u, .. } => u.dim(),
            Atom::IndicatorBall { center, .. }
            | Atom::DistBall { center, .. }
            | Atom::SupportBall { center, .. } => center.dim(),
            Atom::SeparableSum(blocks) => blocks.last().map_or(0, |b| b.end),
        }
    }

    /// Exact value; `+∞` outside the domain.
    pub fn eval(&self, x: &Vector) -> Result<ExtReal> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.eval_at(self.transforms.len(), x))
    }

    /// `argmin_y f(y) + ‖x − y‖²/(2γ)`.
    pub fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        check_gamma(gamma)?;
        check_dim(self.dim(), x.dim())?;
        Ok(self.prox_at(self.transforms.len(), gamma, x))
    }

    /// `prox_{γ f*}(x)` without forming `f*`.
    pub fn prox_conjugate(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        prox_conjugate(self, gamma, x)
    }

    /// Exact `f*(s)`.
    pub fn conjugate_eval_closed(&self, s: &Vector) -> Result<ExtReal> {
        check_dim(self.dim(), s.dim())?;
        Ok(self.conj_at(self.transforms.len(), s))
    }

    /// Exact recession function `(rec f)(x)`.
    pub fn recession_eval(&self, x: &Vector) -> Result<ExtReal> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.rec_at(self.transforms.len(), x))
    }

    /// A Lipschitz constant with respect to the Euclidean norm, when `f` is
    /// Lipschitz on the whole space.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lip_at(self.transforms.len())
    }

    /// Whether `f(x) < +∞`, with indicator sets enlarged by `tol`.
    pub fn domain_contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.dim())?;
        let mut y = x.clone();
        for t in self.transforms.iter().rev() {
            match t {
                Transform::Translate { w } => y = &y - w,
                Transform::ScaleArg { rho } => y = y.scale(*rho),
                _ => {}
            }
        }
        Ok(self.atom.domain_contains(&y, tol))
    }

    pub fn full_domain(&self) -> bool {
        self.atom.full_domain()
    }

    /// `f*` as a catalog function, when it is representable.
    pub fn conjugate_function(&self) -> Option<ConvexFunction> {
        let mut f = self.atom.conjugate_function()?;
        for t in &self.transforms {
            f = match t {
                Transform::Translate { w } => f.push(Transform::AddAffine { u: w.clone(), alpha: 0.0 }),
                Transform::ScaleArg { rho } => f.push(Transform::ScaleArg { rho: 1.0 / rho }),
                Transform::ScaleVal { rho } => {
                    f.push(Transform::ScaleArg { rho: 1.0 / rho }).push(Transform::ScaleVal { rho: *rho })
                }
                Transform::AddAffine { u, alpha } => f
                    .push(Transform::Translate { w: u.clone() })
                    .push(Transform::AddAffine { u: Vector::zeros(u.dim()), alpha: -alpha }),
                Transform::AddQuad { rho } if *rho == 0.0 => f,
                Transform::AddQuad { .. } => return None,
            };
        }
        Some(f)
    }

    fn eval_at(&self, k: usize, x: &Vector) -> ExtReal {
        if k == 0 {
            return self.atom.eval(x);
        }
        match &self.transforms[k - 1] {
            Transform::Translate { w } => self.eval_at(k - 1, &(x - w)),
            Transform::ScaleArg { rho } => self.eval_at(k - 1, &x.scale(*rho)),
            Transform::ScaleVal { rho } => self.eval_at(k - 1, x).scale(*rho),
            Transform::AddAffine { u, alpha } => self.eval_at(k - 1, x) + (u.dot(x) + alpha),
            Transform::AddQuad { rho } => self.eval_at(k - 1, x) + 0.5 * rho * x.norm_sq(),
        }
    }

    fn prox_at(&self, k: usize, gamma: f64, x: &Vector) -> Vector {
        if k == 0 {
            return self.atom.prox(gamma, x);
        }
        match &self.transforms[k - 1] {
            Transform::Translate { w } => w + &self.prox_at(k - 1, gamma, &(x - w)),
            Transform::ScaleArg { rho } => {
                self.prox_at(k - 1, gamma * rho * rho, &x.scale(*rho)).scale(1.0 / rho)
            }
            Transform::ScaleVal { rho } => self.prox_at(k - 1, gamma * rho, x),
            Transform::AddAffine { u, .. } => self.prox_at(k - 1, gamma, &x.axpy(-gamma, u)),
            Transform::AddQuad { rho } => {
                let c = 1.0 + gamma * rho;
                self.prox_at(k - 1, gamma / c, &x.scale(1.0 / c))
            }
        }
    }

    fn conj_at(&self, k: usize, s: &Vector) -> ExtReal {
        if k == 0 {
            return self.atom.conjugate(s);
        }
        match &self.transforms[k - 1] {
            Transform::Translate { w } => self.conj_at(k - 1, s) + s.dot(w),
            Transform::ScaleArg { rho } => self.conj_at(k - 1, &s.scale(1.0 / rho)),
            Transform::ScaleVal { rho } => self.conj_at(k - 1, &s.scale(1.0 / rho)).scale(*rho),
            Transform::AddAffine { u, alpha } => self.conj_at(k - 1, &(s - u)) + (-alpha),
            Transform::AddQuad { rho } if *rho == 0.0 => self.conj_at(k - 1, s),
            Transform::AddQuad { rho } => {
                // (h + ρQ)* is the envelope of index ρ of h*; evaluate it at
                // the proximal pair so that h* is read off Fenchel–Young.
                let w = self.prox_at(k - 1, 1.0 / rho, &s.scale(1.0 / rho));
                let p = s.axpy(-rho, &w);
                match self.eval_at(k - 1, &w) {
                    ExtReal::Finite(hw) => ExtReal::Finite(p.dot(&w) - hw + 0.5 * rho * w.norm_sq()),
                    ExtReal::PlusInfinity => ExtReal::PlusInfinity,
                }
            }
        }
    }

    fn rec_at(&self, k: usize, x: &Vector) -> ExtReal {
        if k == 0 {
            return self.atom.recession(x);
        }
        match &self.transforms[k - 1] {
            Transform::Translate { .. } => self.rec_at(k - 1, x),
            Transform::ScaleArg { rho } => self.rec_at(k - 1, &x.scale(*rho)),
            Transform::ScaleVal { rho } => self.rec_at(k - 1, x).scale(*rho),
            Transform::AddAffine { u, .. } => self.rec_at(k - 1, x) + u.dot(x),
            Transform::AddQuad { rho } if *rho == 0.0 => self.rec_at(k - 1, x),
            Transform::AddQuad { .. } => ExtReal::indicator(x.is_zero()),
        }
    }

    fn lip_at(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return self.atom.lipschitz();
        }
        match &self.transforms[k - 1] {
            Transform::Translate { .. } => self.lip_at(k - 1),
            Transform::ScaleArg { rho } | Transform::ScaleVal { rho } => self.lip_at(k - 1).map(|b| rho * b),
            Transform::AddAffine { u, .. } => self.lip_at(k - 1).map(|b| b + u.norm()),
            Transform::AddQuad { rho } if *rho == 0.0 => self.lip_at(k - 1),
            Transform::AddQuad { .. } => None,
        }
    }
}

fn positive(what: &str, rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{what} needs rho > 0, got {rho}")))
    }
}

fn soft_threshold(x: &Vector, t: f64) -> Vector {
    x.map(|v| v.signum() * (v.abs() - t).max(0.0))
}

fn block_soft_threshold(x: &Vector, t: f64) -> Vector {
    let n = x.norm();
    if n <= t {
        Vector::zeros(x.dim())
    } else {
        x.scale(1.0 - t / n)
    }
}

fn project_ball(x: &Vector, center: &Vector, radius: f64) -> Vector {
    let d = x - center;
    let n = d.norm();
    if n <= radius {
        x.clone()
    } else {
        center.axpy(radius / n, &d)
    }
}

fn project_span(basis: &[Vector], x: &Vector) -> Vector {
    basis.iter().fold(Vector::zeros(x.dim()), |acc, b| acc.axpy(b.dot(x), b))
}

fn in_ball(x: &Vector, center: &Vector, radius: f64, tol: f64) -> bool {
    x.dist(center) <= radius + tol
}

impl Atom {
    fn eval(&self, x: &Vector) -> ExtReal {
        match self {
            Atom::L1Norm { .. } => ExtReal::Finite(x.norm1()),
            Atom::EuclNorm { .. } => ExtReal::Finite(x.norm()),
            Atom::QuadForm(q) => ExtReal::Finite(0.5 * x.dot(&q.a.apply_unchecked(x))),
            Atom::Affine { u, alpha } => ExtReal::Finite(u.dot(x) + alpha),
            Atom::IndicatorBall { center, radius } => {
                ExtReal::indicator(in_ball(x, center, *radius, MEMBERSHIP_TOL))
            }
            Atom::IndicatorSubspace { basis, .. } => {
                ExtReal::indicator(x.dist(&project_span(basis, x)) <= MEMBERSHIP_TOL)
            }
            Atom::DistBall { center, radius } => ExtReal::Finite((x.dist(center) - radius).max(0.0)),
            Atom::SupportBall { center, radius } => ExtReal::Finite(center.dot(x) + radius * x.norm()),
            Atom::SeparableSum(blocks) => blocks.iter().fold(ExtReal::ZERO, |acc, b| {
                acc + b.function.eval_at(b.function.transforms.len(), &x.slice(b.start, b.end)).scale(b.weight)
            }),
        }
    }

    fn prox(&self, gamma: f64, x: &Vector) -> Vector {
        match self {
            Atom::L1Norm { .. } => soft_threshold(x, gamma),
            Atom::EuclNorm { .. } => block_soft_threshold(x, gamma),
            Atom::QuadForm(q) => q.eigenvectors.iter().zip(&q.eigenvalues).fold(
                Vector::zeros(x.dim()),
                |acc, (v, l)| acc.axpy(v.dot(x) / (1.0 + gamma * l), v),
            ),
            Atom::Affine { u, .. } => x.axpy(-gamma, u),
            Atom::IndicatorBall { center, radius } => project_ball(x, center, *radius),
            Atom::IndicatorSubspace { basis, .. } => project_span(basis, x),
            Atom::DistBall { center, radius } => {
                let p = project_ball(x, center, *radius);
                let d = x.dist(&p);
                if d <= gamma {
                    p
                } else {
                    x.axpy(-gamma / d, &(x - &p))
                }
            }
            Atom::SupportBall { center, radius } => block_soft_threshold(&x.axpy(-gamma, center), gamma * radius),
            Atom::SeparableSum(blocks) => Vector::concat(
                blocks
                    .iter()
                    .map(|b| {
                        b.function.prox_at(b.function.transforms.len(), gamma * b.weight, &x.slice(b.start, b.end))
                    })
                    .collect::<Vec<_>>()
                    .iter(),
            ),
        }
    }

    fn conjugate(&self, s: &Vector) -> ExtReal {
        match self {
            Atom::L1Norm { .. } => ExtReal::indicator(s.norm_inf() <= 1.0 + MEMBERSHIP_TOL),
            Atom::EuclNorm { .. } => ExtReal::indicator(s.norm() <= 1.0 + MEMBERSHIP_TOL),
            Atom::QuadForm(q) => {
                let r = q.project_range(s);
                if s.dist(&r) <= MEMBERSHIP_TOL * (1.0 + s.norm()) {
                    ExtReal::Finite(0.5 * r.dot(&q.pinv.apply_unchecked(&r)))
                } else {
                    ExtReal::PlusInfinity
                }
            }
            Atom::Affine { u, alpha } => {
                if s.dist(u) <= MEMBERSHIP_TOL * (1.0 + u.norm()) {
                    ExtReal::Finite(-alpha)
                } else {
                    ExtReal::PlusInfinity
                }
            }
            Atom::IndicatorBall { center, radius } => ExtReal::Finite(center.dot(s) + radius * s.norm()),
            Atom::IndicatorSubspace { basis, .. } => {
                ExtReal::indicator(project_span(basis, s).norm() <= MEMBERSHIP_TOL * (1.0 + s.norm()))
            }
            Atom::DistBall { center, radius } => {
                if s.norm() <= 1.0 + MEMBERSHIP_TOL {
                    ExtReal::Finite(center.dot(s) + radius * s.norm())
                } else {
                    ExtReal::PlusInfinity
                }
            }
            Atom::SupportBall { center, radius } => ExtReal::indicator(in_ball(s, center, *radius, MEMBERSHIP_TOL)),
            Atom::SeparableSum(blocks) => blocks.iter().fold(ExtReal::ZERO, |acc, b| {
                let sb = s.slice(b.start, b.end).scale(1.0 / b.weight);
                acc + b.function.conj_at(b.function.transforms.len(), &sb).scale(b.weight)
            }),
        }
    }

    fn recession(&self, x: &Vector) -> ExtReal {
        match self {
            Atom::L1Norm { .. } => ExtReal::Finite(x.norm1()),
            Atom::EuclNorm { .. } | Atom::DistBall { .. } => ExtReal::Finite(x.norm()),
            Atom::QuadForm(q) => {
                ExtReal::indicator(q.project_range(x).norm() <= MEMBERSHIP_TOL * (1.0 + x.norm()))
            }
            Atom::Affine { u, .. } => ExtReal::Finite(u.dot(x)),
            Atom::IndicatorBall { .. } => ExtReal::indicator(x.is_zero()),
            Atom::IndicatorSubspace { basis, .. } => {
                ExtReal::indicator(x.dist(&project_span(basis, x)) <= MEMBERSHIP_TOL)
            }
            Atom::SupportBall { center, radius } => ExtReal::Finite(center.dot(x) + radius * x.norm()),
            Atom::SeparableSum(blocks) => blocks.iter().fold(ExtReal::ZERO, |acc, b| {
                acc + b.function.rec_at(b.function.transforms.len(), &x.slice(b.start, b.end)).scale(b.weight)
            }),
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        match self {
            Atom::L1Norm { dim } => Some((*dim as f64).sqrt()),
            Atom::EuclNorm { .. } | Atom::DistBall { .. } => Some(1.0),
            Atom::Affine { u, .. } => Some(u.norm()),
            Atom::SupportBall { center, radius } => Some(center.norm() + radius),
            Atom::QuadForm(q) if q.eigenvalues.iter().all(|&l| l == 0.0) => Some(0.0),
            Atom::QuadForm(_) | Atom::IndicatorBall { .. } | Atom::IndicatorSubspace { .. } => None,
            Atom::SeparableSum(blocks) => {
                let mut acc = 0.0;
                for b in blocks {
                    let l = b.weight * b.function.lipschitz_bound()?;
                    acc += l * l;
                }
                Some(acc.sqrt())
            }
        }
    }

    fn domain_contains(&self, x: &Vector, tol: f64) -> bool {
        match self {
            Atom::IndicatorBall { center, radius } => in_ball(x, center, *radius, tol),
            Atom::IndicatorSubspace { basis, .. } => x.dist(&project_span(basis, x)) <= tol,
            Atom::SeparableSum(blocks) => blocks
                .iter()
                .all(|b| b.function.domain_contains(&x.slice(b.start, b.end), tol).unwrap_or(false)),
            _ => true,
        }
    }

    fn full_domain(&self) -> bool {
        match self {
            Atom::IndicatorBall { .. } | Atom::IndicatorSubspace { .. } => false,
            Atom::SeparableSum(blocks) => blocks.iter().all(|b| b.function.full_domain()),
            _ => true,
        }
    }

    fn conjugate_function(&self) -> Option<ConvexFunction> {
        let f = match self {
            Atom::L1Norm { dim } => {
                let unit = ConvexFunction::indicator_ball(Vector::zeros(1), 1.0).ok()?;
                ConvexFunction::direct_sum(vec![unit; *dim]).ok()?
            }
            Atom::EuclNorm { dim } => ConvexFunction::indicator_ball(Vector::zeros(*dim), 1.0).ok()?,
            Atom::QuadForm(q) if q.full_rank() => ConvexFunction::quad_form(q.pinv.clone()).ok()?,
            Atom::QuadForm(_) | Atom::DistBall { .. } => return None,
            Atom::Affine { u, alpha } => ConvexFunction::indicator_ball(u.clone(), 0.0)
                .ok()?
                .push(Transform::AddAffine { u: Vector::zeros(u.dim()), alpha: -alpha }),
            Atom::IndicatorBall { center, radius } => ConvexFunction::support_ball(center.clone(), *radius).ok()?,
            Atom::IndicatorSubspace { dim, basis } => ConvexFunction::from_atom(Atom::IndicatorSubspace {
                dim: *dim,
                basis: orthogonal_complement(*dim, basis),
            }),
            Atom::SupportBall { center, radius } => ConvexFunction::indicator_ball(center.clone(), *radius).ok()?,
            Atom::SeparableSum(blocks) => {
                let mut out = Vec::with_capacity(blocks.len());
                for b in blocks {
                    out.push(Block {
                        weight: b.weight,
                        start: b.start,
                        end: b.end,
                        function: b.function.conjugate_function()?.push(Transform::ScaleArg { rho: 1.0 / b.weight }),
                    });
                }
                ConvexFunction::separable_sum(out).ok()?
            }
        };
        Some(f)
    }
}

impl ProxFunction for ConvexFunction {
    fn dim(&self) -> usize {
        ConvexFunction::dim(self)
    }

    fn eval(&self, x: &Vector) -> Result<ExtReal> {
        ConvexFunction::eval(self, x)
    }

    fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        ConvexFunction::prox(self, gamma, x)
    }

    fn conjugate(&self, s: &Vector) -> Result<ExtReal> {
        self.conjugate_eval_closed(s)
    }

    fn recession(&self, x: &Vector) -> Result<ExtReal> {
        self.recession_eval(x)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        ConvexFunction::lipschitz_bound(self)
    }

    fn full_domain(&self) -> bool {
        ConvexFunction::full_domain(self)
    }

    fn closed_form(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        if self.transforms.is_empty() {
            self.atom_name().to_string()
        } else {
            format!("{} with {} transform(s)", self.atom_name(), self.transforms.len())
        }
    }
}

/// JSON form of an atom: `{"atom": "<name>", "params": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "atom", content = "params", rename_all = "snake_case")]
pub enum AtomSpec {
    L1Norm { dim: usize },
    EuclNorm { dim: usize },
    QuadForm { a: DenseMap },
    Affine { u: Vec<f64>, alpha: f64 },
    IndicatorBall { center: Vec<f64>, radius: f64 },
    IndicatorSubspace { dim: usize, basis: Vec<Vec<f64>> },
    DistBall { center: Vec<f64>, radius: f64 },
    SupportBall { center: Vec<f64>, radius: f64 },
    SeparableSum { blocks: Vec<Block> },
}

/// JSON form of a [`ConvexFunction`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionSpec {
    #[serde(flatten)]
    pub atom: AtomSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<Transform>,
}

impl TryFrom<FunctionSpec> for ConvexFunction {
    type Error = Error;

    fn try_from(spec: FunctionSpec) -> Result<Self> {
        let mut f = match spec.atom {
            AtomSpec::L1Norm { dim } | AtomSpec::EuclNorm { dim } if dim == 0 => {
                return Err(Error::param("dim must be positive"))
            }
            AtomSpec::L1Norm { dim } => ConvexFunction::l1_norm(dim),
            AtomSpec::EuclNorm { dim } => ConvexFunction::eucl_norm(dim),
            AtomSpec::QuadForm { a } => ConvexFunction::quad_form(a)?,
            AtomSpec::Affine { u, alpha } => ConvexFunction::affine(vector_param("u", u)?, alpha)?,
            AtomSpec::IndicatorBall { center, radius } => {
                ConvexFunction::indicator_ball(vector_param("center", center)?, radius)?
            }
            AtomSpec::IndicatorSubspace { dim, basis } => {
                let basis = basis.into_iter().map(|b| vector_param("basis", b)).collect::<Result<Vec<_>>>()?;
                ConvexFunction::indicator_subspace(dim, &basis)?
            }
            AtomSpec::DistBall { center, radius } => ConvexFunction::dist_ball(vector_param("center", center)?, radius)?,
            AtomSpec::SupportBall { center, radius } => {
                ConvexFunction::support_ball(vector_param("center", center)?, radius)?
            }
            AtomSpec::SeparableSum { blocks } => ConvexFunction::separable_sum(blocks)?,
        };
        for t in spec.transforms {
            f = f.with_transform(t)?;
        }
        Ok(f)
    }
}

impl From<&ConvexFunction> for FunctionSpec {
    fn from(f: &ConvexFunction) -> Self {
        let atom = match &f.atom {
            Atom::L1Norm { dim } => AtomSpec::L1Norm { dim: *dim },
            Atom::EuclNorm { dim } => AtomSpec::EuclNorm { dim: *dim },
            Atom::QuadForm(q) => AtomSpec::QuadForm { a: q.a.clone() },
            Atom::Affine { u, alpha } => AtomSpec::Affine { u: u.as_slice().to_vec(), alpha: *alpha },
            Atom::IndicatorBall { center, radius } => {
                AtomSpec::IndicatorBall { center: center.as_slice().to_vec(), radius: *radius }
            }
            Atom::IndicatorSubspace { dim, basis } => AtomSpec::IndicatorSubspace {
                dim: *dim,
                basis: basis.iter().map(|b| b.as_slice().to_vec()).collect(),
            },
            Atom::DistBall { center, radius } => AtomSpec::DistBall { center: center.as_slice().to_vec(), radius: *radius },
            Atom::SupportBall { center, radius } => {
                AtomSpec::SupportBall { center: center.as_slice().to_vec(), radius: *radius }
            }
            Atom::SeparableSum(blocks) => AtomSpec::SeparableSum { blocks: blocks.clone() },
        };
        FunctionSpec { atom, transforms: f.transforms.clone() }
    }
}

impl Serialize for ConvexFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FunctionSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ConvexFunction::try_from(FunctionSpec::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
        a.dist(b) <= tol
    }

    fn example1_g() -> ConvexFunction {
        let l1 = ConvexFunction::l1_norm(3);
        let shifted = ConvexFunction::eucl_norm(2).translate(v(&[1.0, -2.0])).unwrap();
        ConvexFunction::direct_sum(vec![l1, shifted]).unwrap()
    }

    /// A spread of catalog functions on R^2, with and without transforms.
    fn zoo() -> Vec<ConvexFunction> {
        let c = v(&[0.5, -0.25]);
        let a = DenseMap::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let sing = DenseMap::diag(&[2.0, 0.0]);
        vec![
            ConvexFunction::l1_norm(2),
            ConvexFunction::eucl_norm(2),
            ConvexFunction::quad_form(a).unwrap(),
            ConvexFunction::quad_form(sing).unwrap(),
            ConvexFunction::affine(v(&[1.0, -2.0]), 0.5).unwrap(),
            ConvexFunction::indicator_ball(c.clone(), 1.5).unwrap(),
            ConvexFunction::indicator_subspace(2, &[v(&[1.0, 1.0])]).unwrap(),
            ConvexFunction::dist_ball(c.clone(), 1.0).unwrap(),
            ConvexFunction::support_ball(c.clone(), 0.7).unwrap(),
            ConvexFunction::separable_sum(vec![
                Block { weight: 2.0, start: 0, end: 1, function: ConvexFunction::abs() },
                Block { weight: 0.5, start: 1, end: 2, function: ConvexFunction::quadratic(1) },
            ])
            .unwrap(),
            ConvexFunction::eucl_norm(2)
                .translate(c.clone())
                .unwrap()
                .scale_arg(1.7)
                .unwrap()
                .scale_val(0.6)
                .unwrap()
                .add_affine(v(&[0.3, 0.1]), -1.0)
                .unwrap(),
            ConvexFunction::l1_norm(2).add_quad(0.8).unwrap().translate(v(&[1.0, 0.0])).unwrap(),
            ConvexFunction::indicator_ball(c, 1.0).unwrap().scale_val(3.0).unwrap().scale_arg(0.5).unwrap(),
        ]
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vector {
        (0..dim).map(|_| rng.random_range(-r..r)).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ConvexFunction::l1_norm(3).eval(&v(&[1.0, -2.0, 0.0])).unwrap(), ExtReal::Finite(3.0));
        let ball = ConvexFunction::indicator_ball(Vector::zeros(2), 2.0).unwrap();
        assert_eq!(ball.eval(&v(&[3.0, 0.0])).unwrap(), ExtReal::PlusInfinity);
        let g = example1_g().eval(&Vector::zeros(5)).unwrap().to_f64();
        assert!((g - 5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(ball.eval(&Vector::zeros(3)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn prox_examples() {
        let p = ConvexFunction::l1_norm(2).prox(1.0, &v(&[2.0, -0.5])).unwrap();
        assert_eq!(p, v(&[1.0, 0.0]));
        let p = ConvexFunction::quadratic(1).prox(1.0, &v(&[2.0])).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        let d = ConvexFunction::dist_ball(Vector::zeros(2), 2.0).unwrap();
        assert!(close(&d.prox(1.0, &v(&[4.0, 0.0])).unwrap(), &v(&[3.0, 0.0]), 1e-15));
        // exactly at distance γ both branches give the projection
        assert!(close(&d.prox(1.0, &v(&[3.0, 0.0])).unwrap(), &v(&[2.0, 0.0]), 1e-15));
        assert!(ConvexFunction::abs().prox(0.0, &v(&[1.0])).is_err());
    }

    #[test]
    fn dist_ball_prox_grid() {
        let d = ConvexFunction::dist_ball(Vector::zeros(1), 2.0).unwrap();
        let (lo, step) = (-6.0, 1e-3);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..12_000 {
            let y = lo + (i as f64 + 0.5) * step;
            let val = (y.abs() - 2.0).max(0.0) + 0.5 * (4.0 - y) * (4.0 - y);
            if val < best.0 {
                best = (val, y);
            }
        }
        assert!((d.prox(1.0, &v(&[4.0])).unwrap()[0] - best.1).abs() <= step);
    }

    #[test]
    fn prox_conjugate_examples() {
        let q = ConvexFunction::quadratic(1);
        assert!((q.prox_conjugate(1.0, &v(&[2.0])).unwrap()[0] - 1.0).abs() < 1e-15);
        let e = ConvexFunction::eucl_norm(2);
        assert!(close(&e.prox_conjugate(1.0, &v(&[3.0, 0.0])).unwrap(), &v(&[1.0, 0.0]), 1e-15));
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(ConvexFunction::quadratic(1).conjugate_eval_closed(&v(&[3.0])).unwrap(), ExtReal::Finite(4.5));
        let l1 = ConvexFunction::l1_norm(2);
        assert_eq!(l1.conjugate_eval_closed(&v(&[0.5, -0.9])).unwrap(), ExtReal::ZERO);
        assert_eq!(l1.conjugate_eval_closed(&v(&[1.2, 0.0])).unwrap(), ExtReal::PlusInfinity);
        let q = ConvexFunction::quad_form(DenseMap::diag(&[2.0, 0.0])).unwrap();
        assert_eq!(q.conjugate_eval_closed(&v(&[2.0, 0.0])).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(q.conjugate_eval_closed(&v(&[0.0, 1.0])).unwrap(), ExtReal::PlusInfinity);
    }

    #[test]
    fn recession_examples() {
        let x = v(&[3.0, -4.0]);
        assert_eq!(ConvexFunction::eucl_norm(2).recession_eval(&x).unwrap(), ExtReal::Finite(5.0));
        let ball = ConvexFunction::indicator_ball(Vector::zeros(2), 2.0).unwrap();
        assert_eq!(ball.recession_eval(&Vector::zeros(2)).unwrap(), ExtReal::ZERO);
        assert_eq!(ball.recession_eval(&x).unwrap(), ExtReal::PlusInfinity);
        let d = ConvexFunction::dist_ball(v(&[1.0, 1.0]), 2.0).unwrap();
        assert_eq!(d.recession_eval(&x).unwrap(), ExtReal::Finite(5.0));
        let q = ConvexFunction::quad_form(DenseMap::diag(&[2.0, 0.0])).unwrap();
        assert_eq!(q.recession_eval(&v(&[0.0, 7.0])).unwrap(), ExtReal::ZERO);
        assert_eq!(q.recession_eval(&v(&[1.0, 7.0])).unwrap(), ExtReal::PlusInfinity);
    }

    #[test]
    fn recession_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let norms = [
            ConvexFunction::l1_norm(2),
            ConvexFunction::eucl_norm(2),
            ConvexFunction::dist_ball(v(&[0.3, 0.2]), 1.0).unwrap(),
            ConvexFunction::support_ball(v(&[0.3, 0.2]), 1.0).unwrap(),
        ];
        let t = 1e6;
        for f in &norms {
            for _ in 0..20 {
                let y0 = random_vec(&mut rng, 2, 2.0);
                let x = random_vec(&mut rng, 2, 2.0);
                let q = (f.eval(&y0.axpy(t, &x)).unwrap().to_f64() - f.eval(&y0).unwrap().to_f64()) / t;
                let r = f.recession_eval(&x).unwrap().to_f64();
                assert!((q - r).abs() <= 1e-4 * r.abs().max(1.0), "{q} vs {r}");
            }
        }
    }

    #[test]
    fn lipschitz_and_domain() {
        assert_eq!(ConvexFunction::eucl_norm(3).lipschitz_bound(), Some(1.0));
        assert_eq!(ConvexFunction::dist_ball(Vector::zeros(2), 1.0).unwrap().lipschitz_bound(), Some(1.0));
        assert_eq!(ConvexFunction::affine(v(&[3.0, 4.0]), 1.0).unwrap().lipschitz_bound(), Some(5.0));
        assert_eq!(ConvexFunction::l1_norm(4).lipschitz_bound(), Some(2.0));
        assert_eq!(ConvexFunction::quadratic(2).lipschitz_bound(), None);
        let ball = ConvexFunction::indicator_ball(Vector::zeros(2), 2.0).unwrap();
        assert!(ball.domain_contains(&v(&[2.0 + 1e-12, 0.0]), 1e-9).unwrap());
        assert!(ConvexFunction::l1_norm(2).domain_contains(&v(&[1e9, 3.0]), 0.0).unwrap());
        let line = ConvexFunction::indicator_subspace(2, &[v(&[1.0, 0.0])]).unwrap();
        assert!(!line.domain_contains(&v(&[1.0, 1e-6]), 1e-9).unwrap());
        assert!(!ball.full_domain());
        assert!(ConvexFunction::dist_ball(Vector::zeros(2), 1.0).unwrap().full_domain());
    }

    #[test]
    fn prox_is_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for f in zoo() {
            for _ in 0..20 {
                let gamma = rng.random_range(0.1..3.0);
                let x = random_vec(&mut rng, 2, 4.0);
                let p = f.prox(gamma, &x).unwrap();
                let fp = f.eval(&p).unwrap();
                assert!(fp.is_finite(), "{f:?} prox outside domain");
                let obj = fp.to_f64() + x.dist(&p).powi(2) / (2.0 * gamma);
                for _ in 0..100 {
                    let z = f.prox(rng.random_range(0.01..5.0), &random_vec(&mut rng, 2, 5.0)).unwrap();
                    let z = if rng.random_bool(0.5) { z } else { p.axpy(1e-3, &random_vec(&mut rng, 2, 1.0)) };
                    let fz = f.eval(&z).unwrap();
                    if let ExtReal::Finite(fz) = fz {
                        let oz = fz + x.dist(&z).powi(2) / (2.0 * gamma);
                        assert!(obj <= oz + 1e-10 * (1.0 + oz.abs()), "{f:?}: {obj} > {oz}");
                    }
                }
            }
        }
    }

    #[test]
    fn prox_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in zoo() {
            for _ in 0..50 {
                let gamma = rng.random_range(0.1..3.0);
                let (x, y) = (random_vec(&mut rng, 2, 4.0), random_vec(&mut rng, 2, 4.0));
                let (px, py) = (f.prox(gamma, &x).unwrap(), f.prox(gamma, &y).unwrap());
                let d = &px - &py;
                assert!(d.norm_sq() <= d.dot(&(&x - &y)) + 1e-12);
            }
        }
    }

    #[test]
    fn fenchel_young_at_prox_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for f in zoo() {
            for _ in 0..50 {
                let gamma = rng.random_range(0.1..3.0);
                let x = random_vec(&mut rng, 2, 4.0);
                let p = f.prox(gamma, &x).unwrap();
                let s = (&x - &p).scale(1.0 / gamma);
                let fp = f.eval(&p).unwrap().to_f64();
                let fs = f.conjugate_eval_closed(&s).unwrap().to_f64();
                let gap = fp + fs - p.dot(&s);
                assert!(gap.abs() <= 1e-9 * (1.0 + p.norm() * s.norm()), "{f:?}: gap {gap}");
                let z = random_vec(&mut rng, 2, 4.0);
                if let (ExtReal::Finite(fz), ExtReal::Finite(fs)) =
                    (f.eval(&z).unwrap(), f.conjugate_eval_closed(&s).unwrap())
                {
                    assert!(fz + fs >= z.dot(&s) - 1e-9);
                }
            }
        }
    }

    #[test]
    fn catalog_conjugate_agrees_with_calculus() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for f in zoo() {
            let Some(fs) = f.conjugate_function() else { continue };
            for _ in 0..50 {
                let s = random_vec(&mut rng, 2, 3.0);
                let a = f.conjugate_eval_closed(&s).unwrap();
                let b = fs.eval(&s).unwrap();
                match (a, b) {
                    (ExtReal::Finite(a), ExtReal::Finite(b)) => assert!((a - b).abs() < 1e-9, "{f:?}"),
                    (a, b) => assert_eq!(a, b, "{f:?} at {s}"),
                }
                let x = random_vec(&mut rng, 2, 3.0);
                let moreau = &f.prox(1.0, &x).unwrap() + &fs.prox(1.0, &x).unwrap();
                assert!(moreau.dist(&x) < 1e-12 * (1.0 + x.norm()), "{f:?}");
            }
        }
    }

    #[test]
    fn scaling_calculus_two_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for f in zoo() {
            let rho = rng.random_range(0.3..3.0);
            let scaled = f.clone().scale_val(rho).unwrap();
            for _ in 0..20 {
                let s = random_vec(&mut rng, 2, 3.0);
                let a = scaled.conjugate_eval_closed(&s).unwrap();
                let b = f.conjugate_eval_closed(&s.scale(1.0 / rho)).unwrap().scale(rho);
                match (a, b) {
                    (ExtReal::Finite(a), ExtReal::Finite(b)) => assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs())),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn separable_sum_validation() {
        let bad = ConvexFunction::separable_sum(vec![Block {
            weight: 1.0,
            start: 1,
            end: 2,
            function: ConvexFunction::abs(),
        }]);
        assert!(bad.is_err());
        let neg = ConvexFunction::separable_sum(vec![Block {
            weight: -1.0,
            start: 0,
            end: 1,
            function: ConvexFunction::abs(),
        }]);
        assert!(neg.is_err());
    }

    #[test]
    fn json_round_trip() {
        for f in zoo().into_iter().chain([example1_g()]) {
            let s = serde_json::to_string(&f).unwrap();
            let back: ConvexFunction = serde_json::from_str(&s).unwrap();
            let x = v(&[0.3, -1.2]);
            if f.dim() == 2 {
                assert_eq!(f.eval(&x).unwrap(), back.eval(&x).unwrap());
            }
            assert_eq!(serde_json::to_string(&back).unwrap(), s);
        }
        let f: ConvexFunction = serde_json::from_str(
            r#"{"atom":"dist_ball","params":{"center":[0,0],"radius":2},
                "transforms":[{"type":"scale_val","rho":2}]}"#,
        )
        .unwrap();
        assert_eq!(f.eval(&v(&[3.0, 0.0])).unwrap(), ExtReal::Finite(2.0));
        assert!(serde_json::from_str::<ConvexFunction>(r#"{"atom":"eucl_norm","params":{"dim":0}}"#).is_err());
        assert!(serde_json::from_str::<ConvexFunction>(r#"{"atom":"nope","params":{}}"#).is_err());
    }

    #[test]
    fn ext_real_order_and_json() {
        assert!(ExtReal::Finite(1e300) < ExtReal::PlusInfinity);
        assert_eq!(ExtReal::PlusInfinity.scale(0.0), ExtReal::ZERO);
        assert_eq!(serde_json::to_string(&ExtReal::PlusInfinity).unwrap(), "\"+inf\"");
        let back: ExtReal = serde_json::from_str("\"+inf\"").unwrap();
        assert_eq!(back, ExtReal::PlusInfinity);
        assert!(ExtReal::from_f64(f64::NAN).is_err());
    }
}
