//! Collision pipeline against brute-force oracles: broad phase vs all-pairs
//! AABB tests, narrow phase vs an independent closest-point computation, and
//! the static penalty balance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tetsim_core::collision::{
    penalty_response, AppliedForce, BodyId, CollisionParams, CollisionWorld, ModelId, PrimitiveSet,
};
use tetsim_core::dynamics::{step_explicit_euler, uniform_masses, ForceModel, SoftBodyState, SpringModel};
use tetsim_core::mesh::SurfaceMesh;
use tetsim_core::{Point3, Real, Vec3};

fn random_shell(rng: &mut impl Rng, center: Vec3, size: Real) -> SurfaceMesh {
    // A small random tetrahedron shell: 4 vertices, 4 triangles.
    loop {
        let vertices: Vec<Point3> = (0..4)
            .map(|_| {
                Point3::from(
                    center
                        + Vec3::new(
                            rng.gen_range(-size..size),
                            rng.gen_range(-size..size),
                            rng.gen_range(-size..size),
                        ),
                )
            })
            .collect();
        let volume = (vertices[1] - vertices[0])
            .cross(&(vertices[2] - vertices[0]))
            .dot(&(vertices[3] - vertices[0]));
        if volume.abs() < 1e-6 * size * size * size {
            continue;
        }
        return SurfaceMesh::new(
            vertices,
            vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
        )
        .unwrap();
    }
}

fn random_world(rng: &mut impl Rng, models: usize, groups: &[u32]) -> CollisionWorld {
    let mut world = CollisionWorld::new();
    for i in 0..models {
        let center = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let size = rng.gen_range(0.1..0.5);
        let shell = random_shell(rng, center, size);
        let params = CollisionParams {
            proximity: rng.gen_range(0.0..0.2),
            group: groups[rng.gen_range(0..groups.len())],
            ..CollisionParams::default()
        };
        world
            .attach_soft_model(BodyId(i), 4, &shell, params)
            .unwrap();
        world.update_soft_body(BodyId(i), &shell.vertices);
    }
    world
}

#[test]
fn broad_phase_matches_all_pairs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for round in 0..20 {
        let world = random_world(&mut rng, 50, &[0, 1, 2]);
        let got = world.broad_phase();

        // O(n^2) oracle over the same inflated AABBs and filters.
        let mut expected = Vec::new();
        let aabb = |m: ModelId| {
            let positions = world.model(m).world_positions();
            let prox = world.model(m).params.proximity;
            let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
            let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in positions {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k] - prox);
                    hi[k] = hi[k].max(p[k] + prox);
                }
            }
            (lo, hi)
        };
        for i in 0..world.model_count() {
            for j in i + 1..world.model_count() {
                let (alo, ahi) = aabb(ModelId(i));
                let (blo, bhi) = aabb(ModelId(j));
                let overlap = (0..3).all(|k| alo[k] <= bhi[k] && ahi[k] >= blo[k]);
                let (pa, pb) = (
                    world.model(ModelId(i)).params,
                    world.model(ModelId(j)).params,
                );
                let groups = pa.group == pb.group || pa.group == 0 || pb.group == 0;
                let bodies = world.model(ModelId(i)).body != world.model(ModelId(j)).body;
                if overlap && groups && bodies {
                    expected.push((ModelId(i), ModelId(j)));
                }
            }
        }
        expected.sort();
        assert_eq!(got, expected, "round {round}");
    }
}

/// Independent point-triangle closest point: enumerate the candidates
/// (plane projection if inside, the three edges, the three vertices) instead
/// of walking Voronoi regions.
fn oracle_closest_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> (Point3, bool) {
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    let mut best: Option<(Real, Point3, bool)> = None;
    let mut consider = |q: Point3, interior: bool| {
        let d = (p - q).norm_squared();
        if best.map_or(true, |(bd, _, _)| d < bd) {
            best = Some((d, q, interior));
        }
    };
    if nn > 0.0 {
        // Projection onto the plane, accepted if inside the triangle.
        let q = p - n * ((p - a).dot(&n) / nn);
        let area = |x: Point3, y: Point3, z: Point3| (y - x).cross(&(z - x)).dot(&n);
        let wa = area(q, b, c);
        let wb = area(a, q, c);
        let wc = area(a, b, q);
        if wa >= -1e-12 * nn && wb >= -1e-12 * nn && wc >= -1e-12 * nn {
            consider(q, true);
        }
    }
    for (s, e) in [(a, b), (b, c), (c, a)] {
        let d = e - s;
        let t = ((p - s).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        consider(s + t * d, false);
    }
    let (_, q, interior) = best.unwrap();
    (q, interior)
}

#[test]
fn narrow_phase_matches_candidate_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..50 {
        let mut world = CollisionWorld::new();
        let sa = random_shell(&mut rng, Vec3::zeros(), 0.5);
        let offset = Vec3::new(
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
        );
        let sb = random_shell(&mut rng, offset, 0.5);
        let prox_a = rng.gen_range(0.01..0.3);
        let prox_b = rng.gen_range(0.01..0.3);
        world
            .attach_soft_model(
                BodyId(0),
                4,
                &sa,
                CollisionParams {
                    proximity: prox_a,
                    primitives: PrimitiveSet {
                        points: false,
                        lines: false,
                        triangles: true,
                    },
                    ..CollisionParams::default()
                },
            )
            .unwrap();
        world
            .attach_soft_model(
                BodyId(1),
                4,
                &sb,
                CollisionParams {
                    proximity: prox_b,
                    primitives: PrimitiveSet {
                        points: true,
                        lines: false,
                        triangles: false,
                    },
                    ..CollisionParams::default()
                },
            )
            .unwrap();
        world.update_soft_body(BodyId(0), &sa.vertices);
        world.update_soft_body(BodyId(1), &sb.vertices);

        let contacts = world.detect();
        let prox_sum = prox_a + prox_b;
        // Oracle: every (point of B, triangle of A) pair below the summed
        // proximities, with the same signed-distance convention.
        let mut expected = 0;
        for p in &sb.vertices {
            for tri in &sa.triangles {
                let (a, b, c) = (sa.vertices[tri[0]], sa.vertices[tri[1]], sa.vertices[tri[2]]);
                let (q, interior) = oracle_closest_on_triangle(*p, a, b, c);
                let n = (b - a).cross(&(c - a));
                let distance = if interior {
                    (p - q).dot(&n.normalize())
                } else {
                    (p - q).norm()
                };
                if distance < prox_sum {
                    expected += 1;
                    // The pipeline must have an equivalent contact.
                    let found = contacts.iter().any(|ct| {
                        (ct.point_b - p).norm() < 1e-9 && (ct.distance - distance).abs() < 1e-9
                    });
                    assert!(found, "missing contact at distance {distance}");
                }
            }
        }
        assert_eq!(contacts.len(), expected);
    }
}

#[test]
fn disjoint_groups_produce_no_cross_contacts() {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let world = random_world(&mut rng, 30, &[1, 2]);
    for c in world.detect() {
        let ga = world.model(c.model_a).params.group;
        let gb = world.model(c.model_b).params.group;
        assert_eq!(ga, gb, "cross-group contact detected");
    }
}

#[test]
fn contact_forces_sum_to_zero_on_random_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let world = random_world(&mut rng, 12, &[0]);
        let contacts = world.detect();
        let forces = penalty_response(&world, &contacts, 500.0);
        let mut total = Vec3::zeros();
        let mut max_norm: Real = 0.0;
        for f in &forces {
            if let AppliedForce::SoftNode { force, .. } = f {
                total += *force;
                max_norm = max_norm.max(force.norm());
            }
        }
        if max_norm > 0.0 {
            assert!(total.norm() <= 1e-9 * max_norm);
        }
    }
}

#[test]
fn resting_contact_reaches_static_penalty_balance() {
    // One spring-tet standing apex-down on a fixed floor; at rest the
    // penalty compression must carry the weight.
    // Winding chosen so the face normal points +y (toward the blob).
    let floor = SurfaceMesh::new(
        vec![
            Point3::new(-1.0, 0.0, -1.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, -1.0),
        ],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let apex_height = 0.02;
    let blob = SurfaceMesh::new(
        vec![
            Point3::new(0.0, apex_height, 0.0), // apex, the contact point
            Point3::new(-0.1, 0.25, -0.1),
            Point3::new(0.1, 0.25, -0.1),
            Point3::new(0.0, 0.25, 0.12),
        ],
        vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
    )
    .unwrap();

    let prox = 0.05;
    let contact_stiffness = 2000.0;
    let mut world = CollisionWorld::new();
    world
        .attach_soft_model(
            BodyId(0),
            3,
            &floor,
            CollisionParams {
                proximity: 0.0,
                primitives: PrimitiveSet {
                    points: false,
                    lines: false,
                    triangles: true,
                },
                ..CollisionParams::default()
            },
        )
        .unwrap();
    world.update_soft_body(BodyId(0), &floor.vertices);
    world
        .attach_soft_model(
            BodyId(1),
            4,
            &blob,
            CollisionParams {
                proximity: prox,
                primitives: PrimitiveSet {
                    points: true,
                    lines: false,
                    triangles: false,
                },
                ..CollisionParams::default()
            },
        )
        .unwrap();

    let total_mass = 0.4;
    let mut state =
        SoftBodyState::at_rest(blob.vertices.clone(), uniform_masses(4, total_mass)).unwrap();
    let mut springs = SpringModel::from_tet_mesh(
        &tetsim_core::mesh::TetMesh::new(blob.vertices.clone(), vec![[0, 1, 2, 3]]).unwrap(),
        2.0e3,
    )
    .unwrap();
    let gravity = Vec3::new(0.0, -9.81, 0.0);
    let dt = 2.5e-4;
    let damping = 30.0; // mass-proportional, settles the blob

    for _ in 0..12000 {
        world.update_soft_body(BodyId(1), &state.positions);
        let contacts = world.detect();
        let mut forces = vec![Vec3::zeros(); 4];
        springs.refresh(&state.positions);
        springs.add_forces(&state.positions, &mut forces);
        for (i, f) in forces.iter_mut().enumerate() {
            *f += state.masses[i] * gravity;
            *f -= damping * state.masses[i] * state.velocities[i];
        }
        for af in penalty_response(&world, &contacts, contact_stiffness) {
            if let AppliedForce::SoftNode {
                body: BodyId(1),
                node,
                force,
            } = af
            {
                forces[node] += force;
            }
        }
        step_explicit_euler(&mut state, &forces, dt).unwrap();
    }

    let speed: Real = state.velocities.iter().map(|v| v.norm()).sum();
    assert!(speed < 1e-3, "did not settle: residual speed {speed}");
    // Static balance: the contact springs carry exactly the weight, and no
    // single contact compresses further than weight/stiffness.
    let weight = total_mass * 9.81;
    let max_compression = weight / contact_stiffness;
    world.update_soft_body(BodyId(1), &state.positions);
    let contacts = world.detect();
    assert!(!contacts.is_empty(), "blob is not resting on the floor");
    let mut lift = 0.0;
    for af in penalty_response(&world, &contacts, contact_stiffness) {
        if let AppliedForce::SoftNode {
            body: BodyId(1),
            force,
            ..
        } = af
        {
            lift += force.y;
        }
    }
    assert!(
        ((lift - weight) / weight).abs() < 0.05,
        "contact lift {lift} vs weight {weight}"
    );
    for c in &contacts {
        let compression = c.proximity_sum - c.distance;
        assert!(
            compression <= max_compression * 1.05,
            "compression {compression} exceeds weight/k {max_compression}"
        );
    }
}
