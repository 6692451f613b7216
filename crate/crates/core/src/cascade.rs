//! Sampling and evaluating one stochastic cascade.
//!
//! A cascade rooted at `(x, t)` is a Galton–Watson tree with offspring law `p`
//! whose vertices carry space-time labels: each child of a vertex labelled
//! `(y, s)` is placed independently and uniformly in the backward light cone
//! `{(z, r) : 0 <= r <= s, |z - y| <= s - r}`. The cascade value is
//!
//! - `w(y, s) + s^2 b_0 / 2` at a vertex without children (`w = v / p_0`),
//! - `(s^2 / 2) b_k` times the product of its `k` children's values otherwise.
//!
//! Because every vertex contributes a single multiplicative factor, the root
//! value equals the product of all vertex factors, which lets evaluation run
//! off an explicit work stack in one pass.
//!
//! Draw order is fixed per vertex: the offspring count first, then one `(U, V)`
//! pair per child in child order; children are then processed depth-first in
//! order. [`evaluate_cascade`] and [`sample_tree`] consume identical draws for
//! the same stream.

use std::fmt;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::branching::BranchingLaw;
use crate::dalembert::{DalembertError, InitialData, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("apex time must be positive, got {0}")]
    DegenerateTriangle(f64),
    #[error("invalid space-time point ({x}, {t})")]
    InvalidPoint { x: f64, t: f64 },
    #[error(
        "caps must be positive (max_vertices = {max_vertices}, max_generation = {max_generation})"
    )]
    InvalidCaps {
        max_vertices: u64,
        max_generation: u32,
    },
    #[error("leaf evaluation failed: {0}")]
    Data(#[from] DalembertError),
    #[error("boundary lookup failed at ({x}, {t}): {reason}")]
    Boundary { x: f64, t: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, t: f64) -> Result<Self, CascadeError> {
        if x.is_finite() && t.is_finite() && t >= 0.0 {
            Ok(Self { x, t })
        } else {
            Err(CascadeError::InvalidPoint { x, t })
        }
    }

    /// Whether `other` lies in the backward light cone of `self`, up to `slack`.
    pub fn cone_contains(&self, other: &SpaceTimePoint, slack: f64) -> bool {
        other.t >= -slack
            && other.t <= self.t + slack
            && (other.x - self.x).abs() <= self.t - other.t + slack
    }
}

impl fmt::Display for SpaceTimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.t)
    }
}

/// Limits on one cascade realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    max_vertices: u64,
    max_generation: u32,
}

impl Caps {
    pub const DEFAULT_MAX_VERTICES: u64 = 1_000_000;
    pub const DEFAULT_MAX_GENERATION: u32 = 10_000;

    pub fn new(max_vertices: u64, max_generation: u32) -> Result<Self, CascadeError> {
        if max_vertices == 0 || max_generation == 0 {
            return Err(CascadeError::InvalidCaps {
                max_vertices,
                max_generation,
            });
        }
        Ok(Self {
            max_vertices,
            max_generation,
        })
    }

    pub fn max_vertices(&self) -> u64 {
        self.max_vertices
    }

    pub fn max_generation(&self) -> u32 {
        self.max_generation
    }
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_vertices: Self::DEFAULT_MAX_VERTICES,
            max_generation: Self::DEFAULT_MAX_GENERATION,
        }
    }
}

/// One realized cascade value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeSample {
    /// Realized product; 0 when the cascade was truncated.
    pub value: f64,
    pub vertex_count: u64,
    /// Deepest generation that received a label.
    pub max_generation: u32,
    pub truncated: bool,
    /// Vertices left unexpanded when a cap was hit.
    pub unexpanded: u64,
    /// Modulus of the product of all factors evaluated before truncation.
    /// When every subtree value is bounded by one, the untruncated value lies
    /// in `[-bias_bound, bias_bound]`. Zero for complete cascades.
    pub bias_bound: f64,
}

/// Point `(U, V) in [0,1)^2` mapped uniformly onto the backward light cone of `apex`.
///
/// `tau = t (1 - sqrt(U))` has density `2 (t - tau) / t^2` on `[0, t]`, the
/// normalized width of the cone at height `tau`; `xi` is then uniform on the
/// horizontal slice.
pub fn triangle_point(apex: SpaceTimePoint, u: f64, v: f64) -> SpaceTimePoint {
    let tau = apex.t * (1.0 - u.sqrt());
    let half_width = apex.t - tau;
    SpaceTimePoint {
        x: apex.x - half_width + 2.0 * half_width * v,
        t: tau,
    }
}

/// Uniform point in the backward light cone of `apex`.
pub fn sample_triangle<R: Rng + ?Sized>(
    rng: &mut R,
    apex: SpaceTimePoint,
) -> Result<SpaceTimePoint, CascadeError> {
    if !(apex.t > 0.0) {
        return Err(CascadeError::DegenerateTriangle(apex.t));
    }
    let u = rng.random::<f64>();
    let v = rng.random::<f64>();
    Ok(triangle_point(apex, u, v))
}

pub fn sample_offspring<R: Rng + ?Sized>(rng: &mut R, law: &BranchingLaw) -> usize {
    law.sample_offspring(rng)
}

/// Leaf factor `v(x, t) / p_0 + t^2 b_0 / 2`.
pub fn leaf_value(
    data: &InitialData,
    law: &BranchingLaw,
    q: &QuadratureSpec,
    point: SpaceTimePoint,
) -> Result<f64, CascadeError> {
    let v = data.homogeneous_solution(q, point.x, point.t)?;
    Ok(v / law.p0() + 0.5 * point.t * point.t * law.b(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VertexKind {
    /// No children.
    Leaf,
    /// Expanded with this many children.
    Branch(usize),
    /// At the generation bound of a truncated evaluation.
    Boundary,
    /// Left unexpanded because a cap was hit. `None` if the offspring count was never drawn.
    Unexpanded(Option<usize>),
}

pub(crate) trait Visitor {
    fn root(&mut self, point: SpaceTimePoint) -> usize;
    fn child(&mut self, parent: usize, index: usize, point: SpaceTimePoint) -> usize;
    fn visit(
        &mut self,
        tag: usize,
        point: SpaceTimePoint,
        kind: VertexKind,
    ) -> Result<(), CascadeError>;
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    point: SpaceTimePoint,
    generation: u32,
    tag: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct WalkStats {
    pub vertex_count: u64,
    pub max_generation: u32,
    pub truncated: bool,
    pub unexpanded: u64,
}

/// Depth-first traversal shared by every cascade consumer.
///
/// With `boundary_generation = Some(n)`, generation-`n` vertices are reported as
/// [`VertexKind::Boundary`] without drawing their offspring count.
pub(crate) fn walk<R: Rng + ?Sized, V: Visitor>(
    rng: &mut R,
    law: &BranchingLaw,
    root: SpaceTimePoint,
    caps: &Caps,
    boundary_generation: Option<u32>,
    visitor: &mut V,
) -> Result<WalkStats, CascadeError> {
    let mut stack = vec![Frame {
        point: root,
        generation: 0,
        tag: visitor.root(root),
    }];
    let mut children: Vec<Frame> = Vec::new();
    let mut stats = WalkStats {
        vertex_count: 1,
        max_generation: 0,
        truncated: false,
        unexpanded: 0,
    };

    while let Some(frame) = stack.pop() {
        if boundary_generation == Some(frame.generation) {
            visitor.visit(frame.tag, frame.point, VertexKind::Boundary)?;
            continue;
        }
        let kappa = law.sample_offspring(rng);
        if kappa == 0 {
            visitor.visit(frame.tag, frame.point, VertexKind::Leaf)?;
            continue;
        }
        if frame.generation >= caps.max_generation
            || stats.vertex_count + kappa as u64 > caps.max_vertices
        {
            stats.truncated = true;
            stats.unexpanded = 1 + stack.len() as u64;
            visitor.visit(frame.tag, frame.point, VertexKind::Unexpanded(Some(kappa)))?;
            while let Some(rest) = stack.pop() {
                visitor.visit(rest.tag, rest.point, VertexKind::Unexpanded(None))?;
            }
            break;
        }
        visitor.visit(frame.tag, frame.point, VertexKind::Branch(kappa))?;
        children.clear();
        for index in 0..kappa {
            let u = rng.random::<f64>();
            let v = rng.random::<f64>();
            let point = triangle_point(frame.point, u, v);
            debug_assert!(
                frame
                    .point
                    .cone_contains(&point, 1e-12 * (1.0 + frame.point.x.abs())),
                "child {point} escaped the cone of {}",
                frame.point
            );
            children.push(Frame {
                point,
                generation: frame.generation + 1,
                tag: visitor.child(frame.tag, index, point),
            });
        }
        stats.vertex_count += kappa as u64;
        stats.max_generation = stats.max_generation.max(frame.generation + 1);
        stack.extend(children.drain(..).rev());
    }
    Ok(stats)
}

/// Multiplies vertex factors as they are visited.
struct ProductVisitor<'a, B> {
    data: &'a InitialData,
    law: &'a BranchingLaw,
    q: &'a QuadratureSpec,
    boundary: B,
    product: f64,
}

impl<B> Visitor for ProductVisitor<'_, B>
where
    B: FnMut(SpaceTimePoint) -> Result<f64, CascadeError>,
{
    fn root(&mut self, _point: SpaceTimePoint) -> usize {
        0
    }

    fn child(&mut self, _parent: usize, _index: usize, _point: SpaceTimePoint) -> usize {
        0
    }

    fn visit(
        &mut self,
        _tag: usize,
        point: SpaceTimePoint,
        kind: VertexKind,
    ) -> Result<(), CascadeError> {
        match kind {
            VertexKind::Leaf => {
                self.product *= leaf_value(self.data, self.law, self.q, point)?;
            }
            VertexKind::Branch(k) => {
                self.product *= 0.5 * point.t * point.t * self.law.b(k);
            }
            VertexKind::Boundary => {
                self.product *= (self.boundary)(point)?;
            }
            VertexKind::Unexpanded(_) => {}
        }
        Ok(())
    }
}

fn check_root(root: SpaceTimePoint) -> Result<(), CascadeError> {
    if root.t > 0.0 && root.t.is_finite() && root.x.is_finite() {
        Ok(())
    } else {
        Err(CascadeError::DegenerateTriangle(root.t))
    }
}

fn run_product<R, B>(
    rng: &mut R,
    law: &BranchingLaw,
    data: &InitialData,
    q: &QuadratureSpec,
    root: SpaceTimePoint,
    caps: &Caps,
    boundary_generation: Option<u32>,
    boundary: B,
) -> Result<CascadeSample, CascadeError>
where
    R: Rng + ?Sized,
    B: FnMut(SpaceTimePoint) -> Result<f64, CascadeError>,
{
    let mut visitor = ProductVisitor {
        data,
        law,
        q,
        boundary,
        product: 1.0,
    };
    let stats = walk(rng, law, root, caps, boundary_generation, &mut visitor)?;
    let (value, bias_bound) = if stats.truncated {
        (0.0, visitor.product.abs())
    } else {
        (visitor.product, 0.0)
    };
    Ok(CascadeSample {
        value,
        vertex_count: stats.vertex_count,
        max_generation: stats.max_generation,
        truncated: stats.truncated,
        unexpanded: stats.unexpanded,
        bias_bound,
    })
}

/// One realization of the fully expanded cascade value at `root`.
pub fn evaluate_cascade<R: Rng + ?Sized>(
    rng: &mut R,
    law: &BranchingLaw,
    data: &InitialData,
    q: &QuadratureSpec,
    root: SpaceTimePoint,
    caps: &Caps,
) -> Result<CascadeSample, CascadeError> {
    check_root(root)?;
    run_product(rng, law, data, q, root, caps, None, |_| {
        unreachable!("no boundary generation")
    })
}

/// One realization of the cascade cut at generation `n`, where every
/// generation-`n` vertex contributes `boundary(x, t)` instead of expanding.
///
/// With `boundary` the true solution, the expectation of this value equals the
/// solution at `root` for every `n`.
pub fn evaluate_truncated<R, B, E>(
    rng: &mut R,
    law: &BranchingLaw,
    data: &InitialData,
    q: &QuadratureSpec,
    root: SpaceTimePoint,
    n: u32,
    caps: &Caps,
    mut boundary: B,
) -> Result<CascadeSample, CascadeError>
where
    R: Rng + ?Sized,
    B: FnMut(f64, f64) -> Result<f64, E>,
    E: fmt::Display,
{
    check_root(root)?;
    run_product(
        rng,
        law,
        data,
        q,
        root,
        caps,
        Some(n),
        |p: SpaceTimePoint| {
            boundary(p.x, p.t).map_err(|e| CascadeError::Boundary {
                x: p.x,
                t: p.t,
                reason: e.to_string(),
            })
        },
    )
}

/// One labelled vertex of a materialized cascade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeVertex {
    /// Path from the root: the root is `[]`, the `i`-th child of `v` is `v ++ [i]`
    /// with `i` counted from 1.
    pub id: Vec<u32>,
    pub xi: f64,
    pub tau: f64,
    /// Offspring count; `None` for vertices left unexpanded before their draw.
    pub kappa: Option<usize>,
}

/// A materialized cascade, vertices in creation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeTree {
    pub vertices: Vec<TreeVertex>,
    /// A cap was hit; the tree is partial.
    pub truncated: bool,
}

impl CascadeTree {
    pub fn parent_of(&self, index: usize) -> Option<usize> {
        let id = &self.vertices[index].id;
        let (_, parent_id) = id.split_last()?;
        self.vertices.iter().position(|v| v.id == parent_id)
    }
}

struct TreeVisitor {
    vertices: Vec<TreeVertex>,
}

impl Visitor for TreeVisitor {
    fn root(&mut self, point: SpaceTimePoint) -> usize {
        self.vertices.push(TreeVertex {
            id: Vec::new(),
            xi: point.x,
            tau: point.t,
            kappa: None,
        });
        0
    }

    fn child(&mut self, parent: usize, index: usize, point: SpaceTimePoint) -> usize {
        let mut id = self.vertices[parent].id.clone();
        id.push(index as u32 + 1);
        self.vertices.push(TreeVertex {
            id,
            xi: point.x,
            tau: point.t,
            kappa: None,
        });
        self.vertices.len() - 1
    }

    fn visit(
        &mut self,
        tag: usize,
        _point: SpaceTimePoint,
        kind: VertexKind,
    ) -> Result<(), CascadeError> {
        self.vertices[tag].kappa = match kind {
            VertexKind::Leaf => Some(0),
            VertexKind::Branch(k) => Some(k),
            VertexKind::Unexpanded(k) => k,
            VertexKind::Boundary => None,
        };
        Ok(())
    }
}

/// Materializes one labelled cascade, consuming the same draws as [`evaluate_cascade`].
pub fn sample_tree<R: Rng + ?Sized>(
    rng: &mut R,
    law: &BranchingLaw,
    root: SpaceTimePoint,
    caps: &Caps,
) -> Result<CascadeTree, CascadeError> {
    check_root(root)?;
    let mut visitor = TreeVisitor {
        vertices: Vec::new(),
    };
    let stats = walk(rng, law, root, caps, None, &mut visitor)?;
    Ok(CascadeTree {
        vertices: visitor.vertices,
        truncated: stats.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::rng::StreamKey;
    use crate::series::PowerSeries;
    use std::collections::BTreeMap;

    fn law(entries: &[(usize, f64)], a: &[f64]) -> BranchingLaw {
        let s = PowerSeries::polynomial(a.to_vec()).unwrap();
        BranchingLaw::from_custom(entries.iter().copied().collect::<BTreeMap<_, _>>(), &s).unwrap()
    }

    fn data(phi: &str, psi: &str) -> InitialData {
        InitialData::new(
            Expression::parse(phi).unwrap(),
            Expression::parse(psi).unwrap(),
        )
    }

    fn pt(x: f64, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t).unwrap()
    }

    #[test]
    fn triangle_map_corners() {
        let p = triangle_point(pt(0.0, 1.0), 1.0, 0.3);
        assert_eq!(p.t, 0.0);
        assert!(p.x >= -1.0 && p.x <= 1.0);
        let apex = triangle_point(pt(3.0, 2.0), 0.0, 0.77);
        assert_eq!(apex, pt(3.0, 2.0));
        // V sweeps the slice from left to right
        let left = triangle_point(pt(0.0, 1.0), 0.25, 0.0);
        let right = triangle_point(pt(0.0, 1.0), 0.25, 1.0);
        assert_eq!((left.t, left.x, right.x), (0.5, -0.5, 0.5));
    }

    #[test]
    fn degenerate_apex_rejected() {
        let mut rng = StreamKey::new(1, 0, 0).stream();
        assert_eq!(
            sample_triangle(&mut rng, pt(0.0, 0.0)),
            Err(CascadeError::DegenerateTriangle(0.0))
        );
    }

    #[test]
    fn lower_half_holds_three_quarters_of_the_mass() {
        let mut rng = StreamKey::new(5, 0, 0).stream();
        let n = 200_000;
        let s = 1.7;
        let below = (0..n)
            .filter(|_| sample_triangle(&mut rng, pt(0.3, s)).unwrap().t <= s / 2.0)
            .count();
        let frac = below as f64 / n as f64;
        let sigma = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((frac - 0.75).abs() < 4.0 * sigma, "{frac}");
    }

    #[test]
    fn offspring_frequencies() {
        let l = law(&[(0, 0.75), (2, 0.25)], &[0.0, 0.0, 1.0]);
        let mut rng = StreamKey::new(9, 0, 0).stream();
        let n = 100_000;
        let twos = (0..n)
            .filter(|_| sample_offspring(&mut rng, &l) == 2)
            .count();
        assert!((twos as f64 / n as f64 - 0.25).abs() < 0.005);

        let leaf_only = law(&[(0, 1.0)], &[0.0]);
        assert!((0..1000).all(|_| sample_offspring(&mut rng, &leaf_only) == 0));
    }

    #[test]
    fn leaf_value_examples() {
        let q = QuadratureSpec::default();
        let zero = data("0", "0");
        let l = law(&[(0, 0.5), (1, 0.5)], &[0.0, -1.0]);
        assert_eq!(leaf_value(&zero, &l, &q, pt(1.0, 0.3)).unwrap(), 0.0);

        let cosine = data("0.4*cos(x)", "0");
        let v = leaf_value(&cosine, &l, &q, pt(0.0, 0.5)).unwrap();
        assert!((v - 0.8 * 0.5f64.cos()).abs() < 1e-15);

        let c = 0.7;
        let constant = BranchingLaw::build_default(&PowerSeries::polynomial(vec![c]).unwrap());
        let v = leaf_value(&zero, &constant, &q, pt(2.0, 0.6)).unwrap();
        assert!((v - c * 0.36 / 2.0).abs() < 1e-16);
    }

    #[test]
    fn single_vertex_cascades() {
        let q = QuadratureSpec::default();
        let d = data("cos(x)", "0.5");
        let c = 0.3;
        let l = BranchingLaw::build_default(&PowerSeries::polynomial(vec![c]).unwrap());
        let root = pt(0.2, 0.9);
        let expected = d.homogeneous_solution(&q, 0.2, 0.9).unwrap() + c * 0.81 / 2.0;
        for sample_id in 0..20 {
            let mut rng = StreamKey::new(3, 0, sample_id).stream();
            let s = evaluate_cascade(&mut rng, &l, &d, &q, root, &Caps::default()).unwrap();
            assert_eq!(s.value, expected);
            assert_eq!(
                (s.vertex_count, s.max_generation, s.truncated),
                (1, 0, false)
            );
        }
    }

    #[test]
    fn total_progeny_distribution() {
        let l = law(&[(0, 0.75), (2, 0.25)], &[0.0]);
        let d = data("0", "0");
        let q = QuadratureSpec::default();
        let n = 100_000u64;
        let (mut ones, mut threes) = (0u64, 0u64);
        for i in 0..n {
            let mut rng = StreamKey::new(11, 0, i).stream();
            let s = evaluate_cascade(&mut rng, &l, &d, &q, pt(0.0, 1.0), &Caps::default()).unwrap();
            match s.vertex_count {
                1 => ones += 1,
                3 => threes += 1,
                _ => {}
            }
        }
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.005);
        assert!((threes as f64 / n as f64 - 9.0 / 64.0).abs() < 0.005);
    }

    #[test]
    fn truncation_by_vertex_cap() {
        // critical unary chain: p_1 close to the whole mass
        let l = law(&[(0, 0.01), (1, 0.99)], &[0.0, 1.0]);
        let d = data("0.5", "0");
        let q = QuadratureSpec::default();
        let caps = Caps::new(5, 10_000).unwrap();
        let mut truncated = 0;
        for i in 0..200 {
            let mut rng = StreamKey::new(1, 0, i).stream();
            let s = evaluate_cascade(&mut rng, &l, &d, &q, pt(0.0, 0.5), &caps).unwrap();
            assert!(s.vertex_count <= 5);
            if s.truncated {
                truncated += 1;
                assert_eq!(s.value, 0.0);
                assert_eq!(s.unexpanded, 1);
                assert!(s.bias_bound > 0.0 && s.bias_bound <= 1.0);
            } else {
                assert_eq!(s.bias_bound, 0.0);
            }
        }
        assert!(truncated > 150);
    }

    #[test]
    fn truncation_by_generation_cap() {
        let l = law(&[(0, 0.01), (1, 0.99)], &[0.0, 1.0]);
        let d = data("0.5", "0");
        let caps = Caps::new(1_000_000, 3).unwrap();
        let mut rng = StreamKey::new(2, 0, 0).stream();
        let s = evaluate_cascade(
            &mut rng,
            &l,
            &d,
            &QuadratureSpec::default(),
            pt(0.0, 0.5),
            &caps,
        )
        .unwrap();
        assert!(s.max_generation <= 3);
        assert!(Caps::new(0, 3).is_err());
        assert!(Caps::new(3, 0).is_err());
    }

    #[test]
    fn truncated_evaluation_edge_cases() {
        let q = QuadratureSpec::default();
        let d = data("0.4*cos(x)", "0");
        let l = law(&[(0, 0.5), (1, 0.5)], &[0.0, -1.0]);
        let root = pt(0.1, 0.5);
        let mut rng = StreamKey::new(4, 0, 0).stream();
        let s = evaluate_truncated(&mut rng, &l, &d, &q, root, 0, &Caps::default(), |x, t| {
            Ok::<_, String>(x + 10.0 * t)
        })
        .unwrap();
        assert_eq!(s.value, 0.1 + 5.0);

        let leaf_only = law(&[(0, 1.0)], &[0.0]);
        let mut rng = StreamKey::new(4, 0, 0).stream();
        let s = evaluate_truncated(
            &mut rng,
            &leaf_only,
            &d,
            &q,
            root,
            3,
            &Caps::default(),
            |_, _| Err::<f64, _>("unused"),
        )
        .unwrap();
        assert_eq!(s.value, leaf_value(&d, &leaf_only, &q, root).unwrap());

        let mut rng = StreamKey::new(4, 0, 0).stream();
        let err = evaluate_truncated(&mut rng, &l, &d, &q, root, 0, &Caps::default(), |_, _| {
            Err::<f64, _>("outside the field")
        })
        .unwrap_err();
        assert!(matches!(err, CascadeError::Boundary { .. }));
    }

    #[test]
    fn trees_are_deterministic_and_well_formed() {
        let l = law(&[(0, 0.5), (1, 0.25), (3, 0.25)], &[0.0, 1.0, 0.0, 1.0]);
        let root = pt(0.0, 1.0);
        for i in 0..50 {
            let key = StreamKey::new(8, 2, i);
            let a = sample_tree(&mut key.stream(), &l, root, &Caps::default()).unwrap();
            let b = sample_tree(&mut key.stream(), &l, root, &Caps::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.vertices[0].id, Vec::<u32>::new());
            for (idx, v) in a.vertices.iter().enumerate().skip(1) {
                let parent = &a.vertices[a.parent_of(idx).unwrap()];
                let last = *v.id.last().unwrap() as usize;
                assert!(last >= 1 && last <= parent.kappa.unwrap());
                let pp = pt(parent.xi, parent.tau);
                assert!(pp.cone_contains(&pt(v.xi, v.tau), 1e-12));
            }
            let children: usize = a.vertices.iter().map(|v| v.kappa.unwrap()).sum();
            assert_eq!(children + 1, a.vertices.len());
        }
    }

    #[test]
    fn single_vertex_and_unary_trees() {
        let root = pt(0.0, 1.0);
        let leaf_only = law(&[(0, 1.0)], &[0.0]);
        let t = sample_tree(
            &mut StreamKey::new(1, 0, 0).stream(),
            &leaf_only,
            root,
            &Caps::default(),
        )
        .unwrap();
        assert_eq!(t.vertices.len(), 1);
        assert_eq!(t.vertices[0].kappa, Some(0));

        let unary = law(&[(0, 0.5), (1, 0.5)], &[0.0, -1.0]);
        for i in 0..100 {
            let t = sample_tree(
                &mut StreamKey::new(1, 0, i).stream(),
                &unary,
                root,
                &Caps::default(),
            )
            .unwrap();
            assert!(t.vertices.iter().all(|v| v.kappa.unwrap() <= 1));
        }
    }

    #[test]
    fn tree_and_evaluation_share_draws() {
        let a = [0.1, -0.5, 0.3];
        let l = law(&[(0, 0.6), (1, 0.2), (2, 0.2)], &a);
        let d = data("0.3*cos(x)", "0.1*sin(x)");
        let q = QuadratureSpec::default();
        let root = pt(0.4, 0.8);
        for i in 0..200 {
            let key = StreamKey::new(21, 0, i);
            let tree = sample_tree(&mut key.stream(), &l, root, &Caps::default()).unwrap();
            let sample =
                evaluate_cascade(&mut key.stream(), &l, &d, &q, root, &Caps::default()).unwrap();
            assert_eq!(sample.vertex_count, tree.vertices.len() as u64);
            let depth = tree.vertices.iter().map(|v| v.id.len()).max().unwrap() as u32;
            assert_eq!(sample.max_generation, depth);
            let rebuilt: f64 = tree
                .vertices
                .iter()
                .map(|v| match v.kappa.unwrap() {
                    0 => leaf_value(&d, &l, &q, pt(v.xi, v.tau)).unwrap(),
                    k => 0.5 * v.tau * v.tau * l.b(k),
                })
                .product();
            assert!((rebuilt - sample.value).abs() <= 1e-14 * sample.value.abs().max(1e-300));
        }
    }

    #[test]
    fn tree_serializes_with_paths() {
        let tree = CascadeTree {
            vertices: vec![
                TreeVertex {
                    id: vec![],
                    xi: 0.0,
                    tau: 1.0,
                    kappa: Some(1),
                },
                TreeVertex {
                    id: vec![1],
                    xi: 0.25,
                    tau: 0.5,
                    kappa: Some(0),
                },
            ],
            truncated: false,
        };
        let json = serde_json::to_string(&tree).unwrap();
        assert_eq!(
            json,
            r#"{"vertices":[{"id":[],"xi":0.0,"tau":1.0,"kappa":1},{"id":[1],"xi":0.25,"tau":0.5,"kappa":0}],"truncated":false}"#
        );
    }
}
