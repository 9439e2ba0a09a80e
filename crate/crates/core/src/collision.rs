//! Proximity collision: models, broad phase, narrow phase, penalty response.
//!
//! A collision model is a triangle shell attached to a body (tracking its
//! nodes for soft bodies, carried by a frame for rigid bodies) plus the five
//! detection parameters: primitive types, proximity, group, self-collision
//! and the cutting flag. The broad phase is a sweep over one axis of
//! proximity-inflated AABBs; the narrow phase tests point-triangle and
//! edge-edge primitive pairs against the sum of the two models' proximities.

use alloc::vec::Vec;

use crate::dynamics::integrate::Wrench;
use crate::mesh::SurfaceMesh;
use crate::{Isometry, Point3, Real, Vec3};

/// Group id that collides with every group.
pub const WILDCARD_GROUP: u32 = 0;

/// Identifies a body in the scene; assignment is up to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BodyId(pub usize);

/// Identifies a collision model in a [`CollisionWorld`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModelId(pub usize);

/// Which primitive types a model exposes to the narrow phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveSet {
    pub points: bool,
    pub lines: bool,
    pub triangles: bool,
}

impl PrimitiveSet {
    pub fn all() -> Self {
        Self {
            points: true,
            lines: true,
            triangles: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.points || self.lines || self.triangles)
    }
}

/// The five collision parameters of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    pub primitives: PrimitiveSet,
    /// Detection distance in meters; summed across the two models of a pair.
    pub proximity: Real,
    /// Exclusive collision group; [`WILDCARD_GROUP`] matches everything.
    pub group: u32,
    pub self_collision: bool,
    /// Cut-registration models report contacts but receive no response.
    pub cutting: bool,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self {
            primitives: PrimitiveSet::all(),
            proximity: 0.0,
            group: WILDCARD_GROUP,
            self_collision: false,
            cutting: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollisionError {
    EmptyPrimitiveSet,
    NegativeProximity,
    /// A soft model references a node the body does not have.
    NodeOutOfRange { node: usize, body_nodes: usize },
    UnknownModel(usize),
}

impl core::fmt::Display for CollisionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CollisionError::EmptyPrimitiveSet => write!(f, "collision model needs at least one primitive type"),
            CollisionError::NegativeProximity => write!(f, "collision proximity must be >= 0"),
            CollisionError::NodeOutOfRange { node, body_nodes } => {
                write!(f, "collision surface references node {node}, body has {body_nodes}")
            }
            CollisionError::UnknownModel(m) => write!(f, "unknown collision model {m}"),
        }
    }
}

impl core::error::Error for CollisionError {}

impl CollisionParams {
    pub fn validate(&self) -> Result<(), CollisionError> {
        if self.primitives.is_empty() {
            return Err(CollisionError::EmptyPrimitiveSet);
        }
        if !(self.proximity >= 0.0) {
            return Err(CollisionError::NegativeProximity);
        }
        Ok(())
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::new(Real::INFINITY, Real::INFINITY, Real::INFINITY),
            max: Point3::new(Real::NEG_INFINITY, Real::NEG_INFINITY, Real::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    fn inflate(&mut self, r: Real) {
        for k in 0..3 {
            self.min[k] -= r;
            self.max[k] += r;
        }
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && self.max[k] >= other.min[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Binding {
    /// Vertices track body nodes listed in `node_map`.
    Soft,
    /// Vertices are local coordinates carried by a body frame.
    Rigid { frame: usize },
}

/// A triangle shell registered for collision detection.
#[derive(Debug, Clone)]
pub struct CollisionModel {
    pub body: BodyId,
    pub params: CollisionParams,
    binding: Binding,
    /// Triangles over local vertex indices.
    triangles: Vec<[usize; 3]>,
    /// Unique edges over local vertex indices.
    edges: Vec<(usize, usize)>,
    /// Local vertex -> body node (soft binding only).
    node_map: Vec<usize>,
    /// Rest vertices in frame coordinates (rigid binding only).
    local_vertices: Vec<Point3>,
    /// Current world positions, refreshed before each detection pass.
    positions: Vec<Point3>,
    aabb: Aabb,
}

impl CollisionModel {
    /// Body node behind a local vertex, if the model is soft.
    fn body_node(&self, local: usize) -> Option<usize> {
        match self.binding {
            Binding::Soft => Some(self.node_map[local]),
            Binding::Rigid { .. } => None,
        }
    }

    pub fn world_positions(&self) -> &[Point3] {
        &self.positions
    }
}

/// Where on a model a contact sits, with interpolation weights for force
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feature {
    /// A single vertex.
    Point { vertex: usize },
    /// A point on an edge at parameter `t` from its first endpoint.
    Edge { edge: usize, t: Real },
    /// A point inside a triangle with barycentric weights.
    Triangle { triangle: usize, weights: [Real; 3] },
}

/// One proximity contact between two models.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub model_a: ModelId,
    pub model_b: ModelId,
    pub body_a: BodyId,
    pub body_b: BodyId,
    pub feature_a: Feature,
    pub feature_b: Feature,
    pub point_a: Point3,
    pub point_b: Point3,
    /// Unit normal such that `distance = (point_b - point_a) . normal`.
    pub normal: Vec3,
    /// Separation along the normal; negative means penetration.
    pub distance: Real,
    /// Sum of the two models' proximities at detection time.
    pub proximity_sum: Real,
    /// True when either model is a cut-registration model; such contacts get
    /// no penalty response.
    pub cutting: bool,
}

/// All collision models of a scene.
#[derive(Debug, Default)]
pub struct CollisionWorld {
    models: Vec<CollisionModel>,
}

impl CollisionWorld {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn model(&self, id: ModelId) -> &CollisionModel {
        &self.models[id.0]
    }

    pub fn models_of_body(&self, body: BodyId) -> usize {
        self.models.iter().filter(|m| m.body == body).count()
    }

    /// Registers a shell whose triangle indices are body node ids; the model
    /// tracks those nodes. Repeated calls add further models to the body.
    pub fn attach_soft_model(
        &mut self,
        body: BodyId,
        body_node_count: usize,
        surface: &SurfaceMesh,
        params: CollisionParams,
    ) -> Result<ModelId, CollisionError> {
        params.validate()?;
        let mut node_map: Vec<usize> = Vec::new();
        {
            let mut seen = alloc::collections::BTreeSet::new();
            for tri in &surface.triangles {
                for &v in tri {
                    if v >= body_node_count {
                        return Err(CollisionError::NodeOutOfRange {
                            node: v,
                            body_nodes: body_node_count,
                        });
                    }
                    seen.insert(v);
                }
            }
            node_map.extend(seen);
        }
        let local_of_node: alloc::collections::BTreeMap<usize, usize> = node_map
            .iter()
            .enumerate()
            .map(|(l, &n)| (n, l))
            .collect();
        let triangles: Vec<[usize; 3]> = surface
            .triangles
            .iter()
            .map(|t| [local_of_node[&t[0]], local_of_node[&t[1]], local_of_node[&t[2]]])
            .collect();
        let edges = unique_edges(&triangles);
        let n = node_map.len();
        self.models.push(CollisionModel {
            body,
            params,
            binding: Binding::Soft,
            triangles,
            edges,
            node_map,
            local_vertices: Vec::new(),
            positions: alloc::vec![Point3::origin(); n],
            aabb: Aabb::empty(),
        });
        Ok(ModelId(self.models.len() - 1))
    }

    /// Registers a shell in frame-local coordinates, carried by the given
    /// frame of a rigid body.
    pub fn attach_rigid_model(
        &mut self,
        body: BodyId,
        frame: usize,
        surface: &SurfaceMesh,
        params: CollisionParams,
    ) -> Result<ModelId, CollisionError> {
        params.validate()?;
        let triangles = surface.triangles.clone();
        let edges = unique_edges(&triangles);
        let n = surface.vertices.len();
        self.models.push(CollisionModel {
            body,
            params,
            binding: Binding::Rigid { frame },
            triangles,
            edges,
            node_map: Vec::new(),
            local_vertices: surface.vertices.clone(),
            positions: alloc::vec![Point3::origin(); n],
            aabb: Aabb::empty(),
        });
        Ok(ModelId(self.models.len() - 1))
    }

    /// Refreshes the world positions of every soft model of `body`.
    pub fn update_soft_body(&mut self, body: BodyId, node_positions: &[Point3]) {
        for m in &mut self.models {
            if m.body != body || !matches!(m.binding, Binding::Soft) {
                continue;
            }
            for (local, &node) in m.node_map.iter().enumerate() {
                m.positions[local] = node_positions[node];
            }
            m.refresh_aabb();
        }
    }

    /// Refreshes the world positions of every rigid model of `body`.
    pub fn update_rigid_body(&mut self, body: BodyId, frames: &[Isometry]) {
        for m in &mut self.models {
            let Binding::Rigid { frame } = m.binding else {
                continue;
            };
            if m.body != body {
                continue;
            }
            let iso = frames[frame];
            for (local, p) in m.local_vertices.iter().enumerate() {
                m.positions[local] = iso * p;
            }
            m.refresh_aabb();
        }
    }

    /// Candidate model pairs: inflated AABBs overlap, groups match, and the
    /// bodies differ unless self-collision is enabled. A model pairs with
    /// itself only when its own self-collision flag is set. Sweep and prune
    /// over x with full AABB confirmation; output sorted by model ids.
    pub fn broad_phase(&self) -> Vec<(ModelId, ModelId)> {
        let mut order: Vec<usize> = (0..self.models.len()).collect();
        order.sort_by(|&a, &b| {
            self.models[a]
                .aabb
                .min
                .x
                .partial_cmp(&self.models[b].aabb.min.x)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut pairs = Vec::new();
        let mut active: Vec<usize> = Vec::new();
        for &i in &order {
            let bi = &self.models[i].aabb;
            active.retain(|&j| self.models[j].aabb.max.x >= bi.min.x);
            for &j in &active {
                if bi.overlaps(&self.models[j].aabb) && pair_allowed(&self.models[i], &self.models[j]) {
                    pairs.push((ModelId(i.min(j)), ModelId(i.max(j))));
                }
            }
            if self.models[i].params.self_collision {
                pairs.push((ModelId(i), ModelId(i)));
            }
            active.push(i);
        }
        pairs.sort();
        pairs
    }

    /// Contacts of one candidate pair: every supported primitive pair whose
    /// separation is below the summed proximities of the two models.
    pub fn narrow_phase(&self, pair: (ModelId, ModelId)) -> Vec<Contact> {
        let (ia, ib) = (pair.0, pair.1);
        let a = &self.models[ia.0];
        let b = &self.models[ib.0];
        let prox_sum = a.params.proximity + b.params.proximity;
        let cutting = a.params.cutting || b.params.cutting;
        let mut contacts = Vec::new();

        // Point against triangle, both directions; the triangle side is
        // always stored as side A so the signed distance follows the face
        // normal.
        if a.params.primitives.triangles && b.params.primitives.points {
            self.point_triangle_contacts(ia, ib, prox_sum, cutting, &mut contacts);
        }
        if ia != ib && b.params.primitives.triangles && a.params.primitives.points {
            self.point_triangle_contacts(ib, ia, prox_sum, cutting, &mut contacts);
        }
        if a.params.primitives.lines && b.params.primitives.lines {
            self.edge_edge_contacts(ia, ib, prox_sum, cutting, &mut contacts);
        }
        contacts
    }

    /// Full pipeline: broad phase then narrow phase, deterministic order.
    pub fn detect(&self) -> Vec<Contact> {
        let mut out = Vec::new();
        for pair in self.broad_phase() {
            out.extend(self.narrow_phase(pair));
        }
        out
    }

    fn point_triangle_contacts(
        &self,
        tri_model: ModelId,
        pt_model: ModelId,
        prox_sum: Real,
        cutting: bool,
        out: &mut Vec<Contact>,
    ) {
        let ta = &self.models[tri_model.0];
        let pb = &self.models[pt_model.0];
        let same_body = ta.body == pb.body;
        for (pi, p) in pb.positions.iter().enumerate() {
            for (ti, tri) in ta.triangles.iter().enumerate() {
                if same_body && shares_body_node(ta, tri, pb, &[pi]) {
                    continue;
                }
                let (va, vb, vc) = (
                    ta.positions[tri[0]],
                    ta.positions[tri[1]],
                    ta.positions[tri[2]],
                );
                let Some((q, weights, interior)) = closest_point_on_triangle(*p, va, vb, vc) else {
                    continue;
                };
                let face_n = (vb - va).cross(&(vc - va));
                let face_norm = face_n.norm();
                if face_norm == 0.0 {
                    continue;
                }
                let face_n = face_n / face_norm;
                let (normal, distance) = if interior {
                    (face_n, (p - q).dot(&face_n))
                } else {
                    let d = (p - q).norm();
                    if d == 0.0 {
                        continue;
                    }
                    ((p - q) / d, d)
                };
                if distance < prox_sum {
                    out.push(Contact {
                        model_a: tri_model,
                        model_b: pt_model,
                        body_a: ta.body,
                        body_b: pb.body,
                        feature_a: Feature::Triangle {
                            triangle: ti,
                            weights,
                        },
                        feature_b: Feature::Point { vertex: pi },
                        point_a: q,
                        point_b: *p,
                        normal,
                        distance,
                        proximity_sum: prox_sum,
                        cutting,
                    });
                }
            }
        }
    }

    fn edge_edge_contacts(
        &self,
        ia: ModelId,
        ib: ModelId,
        prox_sum: Real,
        cutting: bool,
        out: &mut Vec<Contact>,
    ) {
        let a = &self.models[ia.0];
        let b = &self.models[ib.0];
        let same_body = a.body == b.body;
        let self_pair = ia == ib;
        for (ei, &(a0, a1)) in a.edges.iter().enumerate() {
            let start = if self_pair { ei + 1 } else { 0 };
            for (ej, &(b0, b1)) in b.edges.iter().enumerate().skip(start) {
                if same_body && shares_body_node(a, &[a0, a1], b, &[b0, b1]) {
                    continue;
                }
                let (s, t, pa, pb) = closest_points_on_segments(
                    a.positions[a0],
                    a.positions[a1],
                    b.positions[b0],
                    b.positions[b1],
                );
                let d = (pb - pa).norm();
                if d == 0.0 || d >= prox_sum {
                    continue;
                }
                out.push(Contact {
                    model_a: ia,
                    model_b: ib,
                    body_a: a.body,
                    body_b: b.body,
                    feature_a: Feature::Edge { edge: ei, t: s },
                    feature_b: Feature::Edge { edge: ej, t },
                    point_a: pa,
                    point_b: pb,
                    normal: (pb - pa) / d,
                    distance: d,
                    proximity_sum: prox_sum,
                    cutting,
                });
            }
        }
    }
}

impl CollisionModel {
    fn refresh_aabb(&mut self) {
        let mut aabb = Aabb::empty();
        for p in &self.positions {
            aabb.grow(p);
        }
        aabb.inflate(self.params.proximity);
        self.aabb = aabb;
    }
}

fn pair_allowed(a: &CollisionModel, b: &CollisionModel) -> bool {
    let groups_match = a.params.group == b.params.group
        || a.params.group == WILDCARD_GROUP
        || b.params.group == WILDCARD_GROUP;
    if !groups_match {
        return false;
    }
    a.body != b.body || (a.params.self_collision && b.params.self_collision)
}

/// True when any local vertex of `fa` on model `a` and `fb` on model `b`
/// stands for the same body node (soft bodies only); such primitive pairs
/// are skipped for same-body tests.
fn shares_body_node(a: &CollisionModel, fa: &[usize], b: &CollisionModel, fb: &[usize]) -> bool {
    for &la in fa {
        let Some(na) = a.body_node(la) else {
            return false;
        };
        for &lb in fb {
            if b.body_node(lb) == Some(na) {
                return true;
            }
        }
    }
    false
}

fn unique_edges(triangles: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut set = alloc::collections::BTreeSet::new();
    for t in triangles {
        for (x, y) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            set.insert((x.min(y), x.max(y)));
        }
    }
    set.into_iter().collect()
}

/// Closest point on triangle (a, b, c) to p, with barycentric weights and a
/// flag marking the face-interior region. Returns None for degenerate input.
pub fn closest_point_on_triangle(
    p: Point3,
    a: Point3,
    b: Point3,
    c: Point3,
) -> Option<(Point3, [Real; 3], bool)> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return Some((a, [1.0, 0.0, 0.0], false));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return Some((b, [0.0, 1.0, 0.0], false));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        if denom == 0.0 {
            return None;
        }
        let v = d1 / denom;
        return Some((a + v * ab, [1.0 - v, v, 0.0], false));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return Some((c, [0.0, 0.0, 1.0], false));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        if denom == 0.0 {
            return None;
        }
        let w = d2 / denom;
        return Some((a + w * ac, [1.0 - w, 0.0, w], false));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        if denom == 0.0 {
            return None;
        }
        let w = (d4 - d3) / denom;
        return Some((b + w * (c - b), [0.0, 1.0 - w, w], false));
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        return None;
    }
    let v = vb / denom;
    let w = vc / denom;
    Some((a + ab * v + ac * w, [1.0 - v - w, v, w], true))
}

/// Closest points between segments p1-q1 and p2-q2; returns the parameters
/// and the points.
pub fn closest_points_on_segments(
    p1: Point3,
    q1: Point3,
    p2: Point3,
    q2: Point3,
) -> (Real, Real, Point3, Point3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    const EPS: Real = 1e-30;
    if a <= EPS && e <= EPS {
        s = 0.0;
        t = 0.0;
    } else if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let s0 = if denom != 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    (s, t, p1 + s * d1, p2 + t * d2)
}

/// A force produced by the contact response, ready to hand to a body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppliedForce {
    SoftNode { body: BodyId, node: usize, force: Vec3 },
    Rigid { body: BodyId, frame: usize, wrench: Wrench },
}

/// Penalty response: every non-cutting contact closer than the summed
/// proximities pushes the pair apart with force k (prox - d) along the
/// contact normal, distributed over the feature's nodes by its interpolation
/// weights. Forces across the pair are equal and opposite.
pub fn penalty_response(
    world: &CollisionWorld,
    contacts: &[Contact],
    contact_stiffness: Real,
) -> Vec<AppliedForce> {
    let mut out = Vec::new();
    for c in contacts {
        if c.cutting || c.distance >= c.proximity_sum {
            continue;
        }
        let magnitude = contact_stiffness * (c.proximity_sum - c.distance);
        let force_on_b = magnitude * c.normal;
        distribute(world, c.model_b, &c.feature_b, c.point_b, force_on_b, &mut out);
        distribute(world, c.model_a, &c.feature_a, c.point_a, -force_on_b, &mut out);
    }
    out
}

fn distribute(
    world: &CollisionWorld,
    model_id: ModelId,
    feature: &Feature,
    point: Point3,
    force: Vec3,
    out: &mut Vec<AppliedForce>,
) {
    let model = &world.models[model_id.0];
    match model.binding {
        Binding::Soft => {
            let mut push = |local: usize, w: Real| {
                if w == 0.0 {
                    return;
                }
                out.push(AppliedForce::SoftNode {
                    body: model.body,
                    node: model.node_map[local],
                    force: w * force,
                });
            };
            match *feature {
                Feature::Point { vertex } => push(vertex, 1.0),
                Feature::Edge { edge, t } => {
                    let (a, b) = model.edges[edge];
                    push(a, 1.0 - t);
                    push(b, t);
                }
                Feature::Triangle { triangle, weights } => {
                    let tri = model.triangles[triangle];
                    for k in 0..3 {
                        push(tri[k], weights[k]);
                    }
                }
            }
        }
        Binding::Rigid { frame } => {
            out.push(AppliedForce::Rigid {
                body: model.body,
                frame,
                wrench: Wrench {
                    force,
                    // Torque about the frame origin; the runtime adds it to
                    // the frame's wrench accumulator.
                    torque: (point.coords).cross(&force),
                },
            });
        }
    }
}
