use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::polygon::{ConvexPolygon, GeometryError};
use crate::Vec2;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub grounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    Rigid,
    /// Zero axial stiffness: carries only its rotational spring.
    Slider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: u32,
    pub i: u32,
    pub j: u32,
    #[serde(default = "rigid")]
    pub kind: MemberKind,
}

fn rigid() -> MemberKind {
    MemberKind::Rigid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ternary {
    pub member_a: u32,
    pub member_b: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliderAxis {
    /// Node moves along a horizontal line, y is fixed.
    Horizontal,
    /// Node moves along a vertical line, x is fixed.
    Vertical,
}

impl SliderAxis {
    /// Index of the coordinate held fixed.
    pub fn fixed_coord(self) -> usize {
        match self {
            SliderAxis::Horizontal => 1,
            SliderAxis::Vertical => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliderConstraint {
    pub node: u32,
    pub axis: SliderAxis,
}

/// Mechanism file contents. Lengths are normalized by the crank length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismTopology {
    #[serde(default = "schema")]
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub nodes: Vec<Node>,
    pub members: Vec<Member>,
    #[serde(default)]
    pub ternaries: Vec<Ternary>,
    #[serde(default)]
    pub sliders: Vec<SliderConstraint>,
    pub input_member: u32,
    pub output_member: u32,
    #[serde(default = "one")]
    pub crank_pivot: u32,
    #[serde(default)]
    pub box_polygon: Vec<[f64; 2]>,
    #[serde(default = "ten")]
    pub crank_length_mm: f64,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}
fn one() -> u32 {
    1
}
fn ten() -> f64 {
    10.0
}

impl MechanismTopology {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("duplicate member id {0}")]
    DuplicateMember(u32),
    #[error("member {member} references missing node {node}")]
    DanglingNode { member: u32, node: u32 },
    #[error("member {0} connects a node to itself")]
    SelfLoop(u32),
    #[error("member {0} has zero length")]
    ZeroLength(u32),
    #[error("reference to missing member {0}")]
    DanglingMember(u32),
    #[error("slider references missing node {0}")]
    DanglingSlider(u32),
    #[error("slider axis on grounded-only node {0}")]
    SliderOnGround(u32),
    #[error("node {0} has more than one slider constraint")]
    DuplicateSlider(u32),
    #[error("ternary members {0} and {1} do not share exactly one node")]
    TernaryNotShared(u32, u32),
    #[error("mobility={0}")]
    Mobility(i64),
    #[error("crank pivot {0} missing, not grounded or not at origin")]
    CrankPivot(u32),
    #[error("crank (member {0}) must join the pivot to a free node at unit distance")]
    Crank(u32),
    #[error("input stage: {0}")]
    InputStage(String),
    #[error("crank-slider axis does not pass through the pivot (offset {0})")]
    SliderOffset(f64),
    #[error("output member {0} must have exactly one grounded node")]
    OutputGrounding(u32),
    #[error("output node is driven by {0} members, expected 1")]
    OutputDrive(usize),
    #[error("box polygon: {0}")]
    Polygon(GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyErrors(pub Vec<TopologyError>);

impl fmt::Display for TopologyErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

impl std::error::Error for TopologyErrors {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedMember {
    pub i: usize,
    pub j: usize,
    pub kind: MemberKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTernary {
    pub a: usize,
    pub b: usize,
    pub apex: usize,
}

/// Driving stage between crank and output side, as member indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputStage {
    CrankRocker { crank: usize, coupler: usize, rocker: usize, rocker_ground: usize },
    CrankSlider { crank: usize, coupler: usize, slider_node: usize, axis: SliderAxis },
}

/// Lengths of the input stage in any consistent unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StageGeometry {
    CrankRocker { l12: f64, l23: f64, l34: f64, l41: f64 },
    CrankSlider { l12: f64, l23: f64, offset: f64 },
}

impl StageGeometry {
    pub fn scaled(self, s: f64) -> Self {
        match self {
            StageGeometry::CrankRocker { l12, l23, l34, l41 } => {
                StageGeometry::CrankRocker { l12: l12 * s, l23: l23 * s, l34: l34 * s, l41: l41 * s }
            }
            StageGeometry::CrankSlider { l12, l23, offset } => {
                StageGeometry::CrankSlider { l12: l12 * s, l23: l23 * s, offset: offset * s }
            }
        }
    }
}

/// Free coordinates of the design vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignLayout {
    pub slots: Vec<(usize, usize)>,
    /// Input slider node coordinate fixed on the slider axis.
    pub slider_slot: Option<(usize, usize)>,
}

/// Free nodal coordinates, normalized by the crank length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub coords: Vec<f64>,
    /// Offset of a crank-slider axis from the pivot. Zero for nominal designs.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub slider_offset: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl DesignVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords, slider_offset: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DesignError {
    #[error("design vector has {got} coordinates, layout expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("member {0} collapses to zero length")]
    ZeroLength(u32),
    #[error("nonfinite coordinate")]
    NonFinite,
}

/// Validated topology with resolved indices and current nodal positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    topo: MechanismTopology,
    members: Vec<ResolvedMember>,
    ternaries: Vec<ResolvedTernary>,
    sliders: Vec<(usize, SliderAxis)>,
    grounded: Vec<bool>,
    pivot: usize,
    tip: usize,
    input: usize,
    output: usize,
    output_ground: usize,
    output_free: usize,
    driver: usize,
    stage: InputStage,
    layout: DesignLayout,
    polygon: Option<ConvexPolygon>,
    positions: Vec<Vec2>,
}

pub fn validate_topology(topo: &MechanismTopology) -> Result<Mechanism, TopologyErrors> {
    let mut errs = Vec::new();
    if topo.schema != SCHEMA_VERSION {
        errs.push(TopologyError::Schema(topo.schema));
    }
    let mut node_idx = HashMap::new();
    for (k, n) in topo.nodes.iter().enumerate() {
        if node_idx.insert(n.id, k).is_some() {
            errs.push(TopologyError::DuplicateNode(n.id));
        }
    }
    let mut member_idx = HashMap::new();
    let mut members = Vec::new();
    for (k, m) in topo.members.iter().enumerate() {
        if member_idx.insert(m.id, k).is_some() {
            errs.push(TopologyError::DuplicateMember(m.id));
        }
        let mut ends = [0usize; 2];
        let mut ok = true;
        for (e, id) in ends.iter_mut().zip([m.i, m.j]) {
            match node_idx.get(&id) {
                Some(&ix) => *e = ix,
                None => {
                    errs.push(TopologyError::DanglingNode { member: m.id, node: id });
                    ok = false;
                }
            }
        }
        if ok && ends[0] == ends[1] {
            errs.push(TopologyError::SelfLoop(m.id));
            ok = false;
        }
        if ok {
            let (a, b) = (&topo.nodes[ends[0]], &topo.nodes[ends[1]]);
            if m.kind == MemberKind::Rigid && (a.x - b.x).hypot(a.y - b.y) < 1e-12 {
                errs.push(TopologyError::ZeroLength(m.id));
            }
        }
        members.push(ResolvedMember { i: ends[0], j: ends[1], kind: m.kind });
    }
    // later checks need resolved references
    if !errs.is_empty() {
        return Err(TopologyErrors(errs));
    }

    let grounded: Vec<bool> = topo.nodes.iter().map(|n| n.grounded).collect();
    let positions: Vec<Vec2> = topo.nodes.iter().map(|n| Vec2::new(n.x, n.y)).collect();

    let mut sliders = Vec::new();
    let mut seen = HashSet::new();
    for s in &topo.sliders {
        match node_idx.get(&s.node) {
            None => errs.push(TopologyError::DanglingSlider(s.node)),
            Some(&ix) => {
                if grounded[ix] {
                    errs.push(TopologyError::SliderOnGround(s.node));
                } else if !seen.insert(ix) {
                    errs.push(TopologyError::DuplicateSlider(s.node));
                } else {
                    sliders.push((ix, s.axis));
                }
            }
        }
    }

    let mut ternaries = Vec::new();
    for t in &topo.ternaries {
        let (Some(&a), Some(&b)) = (member_idx.get(&t.member_a), member_idx.get(&t.member_b)) else {
            for id in [t.member_a, t.member_b] {
                if !member_idx.contains_key(&id) {
                    errs.push(TopologyError::DanglingMember(id));
                }
            }
            continue;
        };
        let (ma, mb) = (members[a], members[b]);
        let shared: Vec<usize> =
            [ma.i, ma.j].into_iter().filter(|n| *n == mb.i || *n == mb.j).collect();
        if a == b || shared.len() != 1 {
            errs.push(TopologyError::TernaryNotShared(t.member_a, t.member_b));
        } else {
            ternaries.push(ResolvedTernary { a, b, apex: shared[0] });
        }
    }

    let free_nodes = grounded.iter().filter(|g| !**g).count() as i64;
    let bars = members
        .iter()
        .filter(|m| m.kind == MemberKind::Rigid && !(grounded[m.i] && grounded[m.j]))
        .count() as i64;
    let dof = 2 * free_nodes - bars - sliders.len() as i64 - ternaries.len() as i64;
    if dof != 1 {
        errs.push(TopologyError::Mobility(dof));
    }

    let pivot = match node_idx.get(&topo.crank_pivot) {
        Some(&p) if grounded[p] && positions[p].norm() < 1e-12 => Some(p),
        _ => {
            errs.push(TopologyError::CrankPivot(topo.crank_pivot));
            None
        }
    };

    let input = member_idx.get(&topo.input_member).copied();
    if input.is_none() {
        errs.push(TopologyError::DanglingMember(topo.input_member));
    }
    let output = member_idx.get(&topo.output_member).copied();
    if output.is_none() {
        errs.push(TopologyError::DanglingMember(topo.output_member));
    }

    let mut tip = None;
    if let (Some(p), Some(c)) = (pivot, input) {
        let m = members[c];
        let other = if m.i == p { Some(m.j) } else if m.j == p { Some(m.i) } else { None };
        match other {
            Some(t) if !grounded[t]
                && m.kind == MemberKind::Rigid
                && ((positions[t] - positions[p]).norm() - 1.0).abs() < 1e-9 =>
            {
                tip = Some(t)
            }
            _ => errs.push(TopologyError::Crank(topo.input_member)),
        }
    }

    let incident = |node: usize, skip: usize| -> Vec<usize> {
        (0..members.len())
            .filter(|&k| k != skip && (members[k].i == node || members[k].j == node))
            .collect()
    };
    let other_end = |k: usize, node: usize| if members[k].i == node { members[k].j } else { members[k].i };

    let mut stage = None;
    if let (Some(p), Some(c), Some(t)) = (pivot, input, tip) {
        let at_tip = incident(t, c);
        if at_tip.len() != 1 || members[at_tip[0]].kind != MemberKind::Rigid {
            errs.push(TopologyError::InputStage(format!(
                "crank tip must carry exactly one rigid coupler, found {}",
                at_tip.len()
            )));
        } else {
            let coupler = at_tip[0];
            let cn = other_end(coupler, t);
            if let Some(&(_, axis)) = sliders.iter().find(|(n, _)| *n == cn) {
                let k = axis.fixed_coord();
                let off = positions[cn][k] - positions[p][k];
                if off.abs() > 1e-9 {
                    errs.push(TopologyError::SliderOffset(off));
                }
                stage = Some(InputStage::CrankSlider { crank: c, coupler, slider_node: cn, axis });
            } else {
                let rockers: Vec<usize> = incident(cn, coupler)
                    .into_iter()
                    .filter(|&k| {
                        members[k].kind == MemberKind::Rigid && grounded[other_end(k, cn)]
                    })
                    .collect();
                if rockers.len() == 1 {
                    let rocker_ground = other_end(rockers[0], cn);
                    if rocker_ground == p {
                        errs.push(TopologyError::InputStage("rocker pivots on the crank pivot".into()));
                    } else {
                        stage = Some(InputStage::CrankRocker {
                            crank: c,
                            coupler,
                            rocker: rockers[0],
                            rocker_ground,
                        });
                    }
                } else {
                    errs.push(TopologyError::InputStage(format!(
                        "coupler end must join one grounded rocker or a slider, found {} rockers",
                        rockers.len()
                    )));
                }
            }
        }
    }

    let mut out_nodes = None;
    if let Some(o) = output {
        let m = members[o];
        match (grounded[m.i], grounded[m.j]) {
            (true, false) => out_nodes = Some((m.i, m.j)),
            (false, true) => out_nodes = Some((m.j, m.i)),
            _ => errs.push(TopologyError::OutputGrounding(topo.output_member)),
        }
    }
    let mut driver = None;
    if let (Some(o), Some((_, free))) = (output, out_nodes) {
        let d = incident(free, o);
        if d.len() == 1 {
            driver = Some(d[0]);
        } else {
            errs.push(TopologyError::OutputDrive(d.len()));
        }
    }

    let polygon = if topo.box_polygon.is_empty() {
        None
    } else {
        match ConvexPolygon::new(&topo.box_polygon) {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(TopologyError::Polygon(e));
                None
            }
        }
    };

    if !errs.is_empty() {
        return Err(TopologyErrors(errs));
    }
    let (pivot, tip, stage) = (pivot.unwrap(), tip.unwrap(), stage.unwrap());
    let (output_ground, output_free) = out_nodes.unwrap();

    let slider_slot = match stage {
        InputStage::CrankSlider { slider_node, axis, .. } => Some((slider_node, axis.fixed_coord())),
        InputStage::CrankRocker { .. } => None,
    };
    let slots = (0..topo.nodes.len())
        .filter(|&n| n != pivot && n != tip)
        .flat_map(|n| [(n, 0), (n, 1)])
        .filter(|s| Some(*s) != slider_slot)
        .collect();

    Ok(Mechanism {
        topo: topo.clone(),
        members,
        ternaries,
        sliders,
        grounded,
        pivot,
        tip,
        input: input.unwrap(),
        output: output.unwrap(),
        output_ground,
        output_free,
        driver: driver.unwrap(),
        stage,
        layout: DesignLayout { slots, slider_slot },
        polygon,
        positions,
    })
}

impl Mechanism {
    pub fn topology(&self) -> &MechanismTopology {
        &self.topo
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn members(&self) -> &[ResolvedMember] {
        &self.members
    }

    pub fn ternaries(&self) -> &[ResolvedTernary] {
        &self.ternaries
    }

    pub fn sliders(&self) -> &[(usize, SliderAxis)] {
        &self.sliders
    }

    pub fn grounded(&self) -> &[bool] {
        &self.grounded
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn crank_tip(&self) -> usize {
        self.tip
    }

    pub fn input_member(&self) -> usize {
        self.input
    }

    pub fn output_member(&self) -> usize {
        self.output
    }

    /// Grounded and free node of the output member.
    pub fn output_nodes(&self) -> (usize, usize) {
        (self.output_ground, self.output_free)
    }

    /// The single member that delivers force to the output member.
    pub fn driver_member(&self) -> usize {
        self.driver
    }

    pub fn input_stage(&self) -> InputStage {
        self.stage
    }

    pub fn layout(&self) -> &DesignLayout {
        &self.layout
    }

    pub fn polygon(&self) -> Option<&ConvexPolygon> {
        self.polygon.as_ref()
    }

    pub fn crank_length_mm(&self) -> f64 {
        self.topo.crank_length_mm
    }

    pub fn node_id(&self, idx: usize) -> u32 {
        self.topo.nodes[idx].id
    }

    pub fn member_id(&self, idx: usize) -> u32 {
        self.topo.members[idx].id
    }

    pub fn member_length(&self, k: usize) -> f64 {
        let m = self.members[k];
        (self.positions[m.j] - self.positions[m.i]).norm()
    }

    /// Signed included angle of a ternary, from arm a to arm b about the apex.
    pub fn ternary_angle(&self, t: usize) -> f64 {
        let tr = self.ternaries[t];
        let arm = |k: usize| {
            let m = self.members[k];
            let far = if m.i == tr.apex { m.j } else { m.i };
            self.positions[far] - self.positions[tr.apex]
        };
        let (u, v) = (arm(tr.a), arm(tr.b));
        super::polygon::cross(u, v).atan2(u.dot(&v))
    }

    pub fn stage_geometry(&self) -> StageGeometry {
        let p = &self.positions;
        match self.stage {
            InputStage::CrankRocker { crank, coupler, rocker, rocker_ground } => StageGeometry::CrankRocker {
                l12: self.member_length(crank),
                l23: self.member_length(coupler),
                l34: self.member_length(rocker),
                l41: (p[rocker_ground] - p[self.pivot]).norm(),
            },
            InputStage::CrankSlider { crank, coupler, slider_node, axis } => {
                let k = axis.fixed_coord();
                StageGeometry::CrankSlider {
                    l12: self.member_length(crank),
                    l23: self.member_length(coupler),
                    offset: p[slider_node][k] - p[self.pivot][k],
                }
            }
        }
    }

    pub fn design(&self) -> DesignVector {
        let coords = self.layout.slots.iter().map(|&(n, k)| self.positions[n][k]).collect();
        let slider_offset = self
            .layout
            .slider_slot
            .map(|(n, k)| self.positions[n][k] - self.positions[self.pivot][k])
            .unwrap_or(0.0);
        DesignVector { coords, slider_offset }
    }

    pub fn with_design(&self, v: &DesignVector) -> Result<Mechanism, DesignError> {
        let expected = self.layout.slots.len();
        if v.coords.len() != expected {
            return Err(DesignError::Length { expected, got: v.coords.len() });
        }
        if v.coords.iter().any(|c| !c.is_finite()) || !v.slider_offset.is_finite() {
            return Err(DesignError::NonFinite);
        }
        let mut out = self.clone();
        for (&(n, k), &c) in self.layout.slots.iter().zip(&v.coords) {
            out.positions[n][k] = c;
        }
        if let Some((n, k)) = self.layout.slider_slot {
            out.positions[n][k] = out.positions[self.pivot][k] + v.slider_offset;
        }
        for (k, m) in out.members.iter().enumerate() {
            if m.kind == MemberKind::Rigid && (out.positions[m.j] - out.positions[m.i]).norm() < 1e-12 {
                return Err(DesignError::ZeroLength(self.member_id(k)));
            }
        }
        for (node, p) in out.topo.nodes.iter_mut().zip(&out.positions) {
            node.x = p.x;
            node.y = p.y;
        }
        Ok(out)
    }

    /// Copy with all positions uniformly scaled about the pivot, for invariance checks.
    /// The crank no longer has unit length.
    pub fn scaled(&self, s: f64) -> Mechanism {
        let mut out = self.clone();
        for p in &mut out.positions {
            *p *= s;
        }
        for (node, p) in out.topo.nodes.iter_mut().zip(&out.positions) {
            node.x = p.x;
            node.y = p.y;
        }
        out
    }

    /// Mirror image about the ground line through the pivot and the rocker ground
    /// (or the slider axis for a crank-slider).
    pub fn mirrored(&self) -> Mechanism {
        let dir = match self.stage {
            InputStage::CrankRocker { rocker_ground, .. } => {
                (self.positions[rocker_ground] - self.positions[self.pivot]).normalize()
            }
            InputStage::CrankSlider { axis: SliderAxis::Vertical, .. } => Vec2::new(0.0, 1.0),
            InputStage::CrankSlider { axis: SliderAxis::Horizontal, .. } => Vec2::new(1.0, 0.0),
        };
        let o = self.positions[self.pivot];
        let mut out = self.clone();
        for p in &mut out.positions {
            let r = *p - o;
            *p = o + dir * (2.0 * r.dot(&dir)) - r;
        }
        for (node, p) in out.topo.nodes.iter_mut().zip(&out.positions) {
            node.x = p.x;
            node.y = p.y;
        }
        out
    }
}
