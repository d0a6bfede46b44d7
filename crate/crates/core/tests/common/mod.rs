#![allow(dead_code)]

use flapmech::mech::{validate_topology, Mechanism, MechanismTopology, Member, MemberKind, Node};
use flapmech::Vec2;

pub fn node(id: u32, x: f64, y: f64, grounded: bool) -> Node {
    Node { id, x, y, grounded }
}

pub fn bar(id: u32, i: u32, j: u32) -> Member {
    Member { id, i, j, kind: MemberKind::Rigid }
}

/// Coupler node of a four-bar by circle intersection. `branch` = +1 or -1.
pub fn coupler_node(theta: f64, l23: f64, l34: f64, ground: Vec2, branch: f64) -> Option<Vec2> {
    let b = Vec2::new(theta.cos(), theta.sin());
    let e = ground - b;
    let dist = e.norm();
    let a = (l23 * l23 - l34 * l34 + dist * dist) / (2.0 * dist);
    let h2 = l23 * l23 - a * a;
    if h2 < 0.0 {
        return None;
    }
    let u = e / dist;
    let perp = Vec2::new(-u.y, u.x);
    Some(b + u * a + perp * (branch * h2.sqrt()))
}

/// Rocker angle (direction from ground node 4 to node 3) at crank angle `theta`.
pub fn rocker_angle(theta: f64, l23: f64, l34: f64, ground: Vec2, branch: f64) -> Option<f64> {
    coupler_node(theta, l23, l34, ground, branch).map(|c| {
        let r = c - ground;
        r.y.atan2(r.x)
    })
}

/// Crank-rocker with unit crank along +x, ground node 4 at angle `beta`.
/// Members: 1 crank (1-2), 2 coupler (2-3), 3 rocker (4-3, output), 4 ground (1-4).
pub fn fourbar(l23: f64, l34: f64, l41: f64, beta: f64, branch: f64) -> MechanismTopology {
    let ground = Vec2::new(l41 * beta.cos(), l41 * beta.sin());
    let c = coupler_node(0.0, l23, l34, ground, branch).expect("assembles");
    MechanismTopology {
        schema: 1,
        name: "four-bar".into(),
        nodes: vec![
            node(1, 0.0, 0.0, true),
            node(2, 1.0, 0.0, false),
            node(3, c.x, c.y, false),
            node(4, ground.x, ground.y, true),
        ],
        members: vec![bar(1, 1, 2), bar(2, 2, 3), bar(3, 4, 3), bar(4, 1, 4)],
        ternaries: vec![],
        sliders: vec![],
        input_member: 1,
        output_member: 3,
        crank_pivot: 1,
        box_polygon: vec![],
        crank_length_mm: 10.0,
    }
}

pub fn mech(t: &MechanismTopology) -> Mechanism {
    validate_topology(t).unwrap_or_else(|e| panic!("invalid topology: {e}"))
}

fn load(name: &str) -> MechanismTopology {
    let path = format!("{}/../../mechanisms/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    MechanismTopology::from_json(&text).expect("parses")
}

pub fn topology_d() -> MechanismTopology {
    load("topology_d.json")
}

pub fn topology_c() -> MechanismTopology {
    load("topology_c.json")
}

pub fn topology_k() -> MechanismTopology {
    load("topology_k.json")
}
