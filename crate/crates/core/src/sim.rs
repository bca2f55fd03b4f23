//! Planar deformable dynamics and the discrete pick-and-place primitive.
//!
//! Deformables are particle systems joined by distance constraints and
//! relaxed by Gauss-Seidel projection. Dragging pins the grasped particle to
//! a moving waypoint and lets relaxation carry the rest of the structure.
//! Table friction is approximated by per-stage mobility windows: particles
//! beyond a link-distance from the grasp stay put during the drag.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom;
use crate::scene::Scene;
use crate::spatial::{angle_diff, Pose2, Vec2, WorkspaceCalib};

/// The action primitive: approach `pick`, grasp, drag to `place`, release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickPlaceAction {
    pub pick: Pose2,
    pub place: Pose2,
}

impl PickPlaceAction {
    pub fn new(pick: Pose2, place: Pose2) -> Self {
        PickPlaceAction { pick, place }
    }

    pub fn is_finite(&self) -> bool {
        self.pick.is_finite() && self.place.is_finite()
    }
}

/// What the gripper attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraspHandle {
    Bead { cable: usize, index: usize },
    FabricVertex { fabric: usize, index: usize },
    Item { item: usize },
}

/// Drag semantics while a particle is pinned to the gripper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DragKind {
    /// Whole structure free to follow.
    Free,
    /// Only particles within this many links of the grasp may move
    /// (static-friction proxy for low pull heights).
    Local(usize),
    /// Reflect the grasped side across the perpendicular bisector of the
    /// drag segment (lift-and-over fold for fabric).
    Fold,
    /// Move the bag ring and every enclosed item rigidly (high pull:
    /// gravity holds contents in the lifted bag).
    RigidBag,
}

/// Per-stage drag behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageProfile {
    pub bead_drag: DragKind,
    pub fabric_drag: DragKind,
}

impl Default for StageProfile {
    fn default() -> Self {
        StageProfile { bead_drag: DragKind::Free, fabric_drag: DragKind::Free }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionParams {
    pub grasp_radius_m: f64,
    pub substeps: usize,
    pub relax_iterations: usize,
    /// Indexed by `scene.stage`, clamped to the last entry.
    pub stage_profiles: Vec<StageProfile>,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            grasp_radius_m: 0.015,
            substeps: 20,
            relax_iterations: 30,
            stage_profiles: vec![StageProfile::default()],
        }
    }
}

impl MotionParams {
    pub fn profile(&self, stage: u8) -> StageProfile {
        let i = (stage as usize).min(self.stage_profiles.len().saturating_sub(1));
        self.stage_profiles.get(i).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    MissedGrasp,
    Placed(GraspHandle),
}

// --- particle system ---------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Constraint {
    a: usize,
    b: usize,
    rest: f64,
}

struct ParticleSystem {
    positions: Vec<Vec2>,
    inv_mass: Vec<f64>,
    constraints: Vec<Constraint>,
    /// (start offset, particle count) per cable, then per fabric.
    cable_offsets: Vec<usize>,
    fabric_offsets: Vec<usize>,
}

fn build_system(scene: &Scene) -> ParticleSystem {
    let mut positions = Vec::new();
    let mut constraints = Vec::new();
    let mut cable_offsets = Vec::with_capacity(scene.cables.len());
    let mut fabric_offsets = Vec::with_capacity(scene.fabrics.len());

    for c in &scene.cables {
        let base = positions.len();
        cable_offsets.push(base);
        positions.extend_from_slice(&c.beads);
        for i in 0..c.beads.len() - 1 {
            constraints.push(Constraint { a: base + i, b: base + i + 1, rest: c.link_rest });
        }
        if c.closed && c.beads.len() > 2 {
            constraints.push(Constraint { a: base + c.beads.len() - 1, b: base, rest: c.link_rest });
        }
    }
    for f in &scene.fabrics {
        let base = positions.len();
        fabric_offsets.push(base);
        positions.extend_from_slice(&f.verts);
        let s = f.side;
        let rest = f.spacing_rest;
        let shear = rest * std::f64::consts::SQRT_2;
        for r in 0..s {
            for c in 0..s {
                let i = base + r * s + c;
                if c + 1 < s {
                    constraints.push(Constraint { a: i, b: i + 1, rest });
                }
                if r + 1 < s {
                    constraints.push(Constraint { a: i, b: i + s, rest });
                }
                if r + 1 < s && c + 1 < s {
                    constraints.push(Constraint { a: i, b: i + s + 1, rest: shear });
                    constraints.push(Constraint { a: i + 1, b: i + s, rest: shear });
                }
            }
        }
    }
    let inv_mass = vec![1.0; positions.len()];
    ParticleSystem { positions, inv_mass, constraints, cable_offsets, fabric_offsets }
}

impl ParticleSystem {
    fn index_of(&self, handle: GraspHandle) -> Option<usize> {
        match handle {
            GraspHandle::Bead { cable, index } => Some(self.cable_offsets[cable] + index),
            GraspHandle::FabricVertex { fabric, index } => Some(self.fabric_offsets[fabric] + index),
            GraspHandle::Item { .. } => None,
        }
    }

    fn relax(&mut self, iterations: usize, calib: &WorkspaceCalib) {
        for _ in 0..iterations {
            for c in &self.constraints {
                let wa = self.inv_mass[c.a];
                let wb = self.inv_mass[c.b];
                let wsum = wa + wb;
                if wsum == 0.0 {
                    continue;
                }
                let d = self.positions[c.b] - self.positions[c.a];
                let len = d.norm();
                if len <= 1e-12 {
                    continue;
                }
                let corr = (len - c.rest) / (len * wsum);
                self.positions[c.a] = self.positions[c.a] + d.scale(wa * corr);
                self.positions[c.b] = self.positions[c.b] - d.scale(wb * corr);
            }
            for (i, p) in self.positions.iter_mut().enumerate() {
                if self.inv_mass[i] > 0.0 {
                    *p = calib.clamp_world(*p);
                }
            }
        }
    }

    /// Link-graph distances from `src` (BFS over constraints).
    fn link_distances(&self, src: usize) -> Vec<u32> {
        let n = self.positions.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in &self.constraints {
            adj[c.a].push(c.b);
            adj[c.b].push(c.a);
        }
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if dist[j] == u32::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        dist
    }

    fn write_back(&self, scene: &mut Scene) {
        for (ci, c) in scene.cables.iter_mut().enumerate() {
            let base = self.cable_offsets[ci];
            c.beads.copy_from_slice(&self.positions[base..base + c.beads.len()]);
        }
        for (fi, f) in scene.fabrics.iter_mut().enumerate() {
            let base = self.fabric_offsets[fi];
            f.verts.copy_from_slice(&self.positions[base..base + f.verts.len()]);
        }
    }
}

/// Gauss-Seidel projection of all distance constraints with no pins.
pub fn relax_constraints(scene: &mut Scene, iterations: usize, calib: &WorkspaceCalib) {
    let mut sys = build_system(scene);
    if sys.positions.is_empty() {
        return;
    }
    sys.relax(iterations, calib);
    sys.write_back(scene);
}

/// Nearest graspable entity within `grasp_radius_m` of `p`: a bead, a
/// fabric vertex, or a rigid item whose footprint contains `p`. Ties are
/// broken by lowest object id, then lowest vertex index.
pub fn attach_nearest(scene: &Scene, p: Vec2, params: &MotionParams) -> Option<GraspHandle> {
    const TIE_EPS: f64 = 1e-12;
    let mut best: Option<(f64, u16, usize, GraspHandle)> = None;
    let mut consider = |d: f64, obj_id: u16, idx: usize, h: GraspHandle| {
        if d > params.grasp_radius_m {
            return;
        }
        match &best {
            None => best = Some((d, obj_id, idx, h)),
            Some((bd, bid, bidx, _)) => {
                let better = if (d - bd).abs() <= TIE_EPS {
                    (obj_id, idx) < (*bid, *bidx)
                } else {
                    d < *bd
                };
                if better {
                    best = Some((d, obj_id, idx, h));
                }
            }
        }
    };

    for (ci, c) in scene.cables.iter().enumerate() {
        for (bi, b) in c.beads.iter().enumerate() {
            consider(p.dist(*b), c.mask_base, bi, GraspHandle::Bead { cable: ci, index: bi });
        }
    }
    for (fi, f) in scene.fabrics.iter().enumerate() {
        for (vi, v) in f.verts.iter().enumerate() {
            consider(p.dist(*v), f.mask_id, vi, GraspHandle::FabricVertex { fabric: fi, index: vi });
        }
    }
    for (ii, item) in scene.rigid_items.iter().enumerate() {
        if item.contains(p) {
            consider(0.0, item.mask_id, 0, GraspHandle::Item { item: ii });
        }
    }
    best.map(|(_, _, _, h)| h)
}

enum Moved {
    Fabric(usize),
    Item(usize),
    Other,
}

/// Keep the fabric-over-item occlusion relation consistent with the motion
/// that just happened: fabric dragged over an item covers it; an item
/// placed onto fabric sits on top.
fn update_cover_relations(scene: &mut Scene, moved: Moved) {
    let item_centers: Vec<Vec2> = scene.rigid_items.iter().map(|r| r.pose.pos()).collect();
    for fi in 0..scene.fabrics.len() {
        let covered: Vec<usize> = item_centers
            .iter()
            .enumerate()
            .filter(|(_, p)| scene.fabrics[fi].covers_point(**p))
            .map(|(i, _)| i)
            .collect();
        let fabric = &mut scene.fabrics[fi];
        fabric.above_items.retain(|i| covered.contains(i));
        match moved {
            Moved::Fabric(mf) if mf == fi => {
                for i in covered {
                    fabric.above_items.insert(i);
                }
            }
            Moved::Item(mi) => {
                fabric.above_items.remove(&mi);
            }
            _ => {}
        }
    }
}

/// Execute the motion primitive. Returns `MissedGrasp` (scene untouched)
/// when nothing is within grasp range of the pick point.
pub fn execute_pick_place(
    scene: &mut Scene,
    action: &PickPlaceAction,
    params: &MotionParams,
    calib: &WorkspaceCalib,
) -> Result<Event> {
    if !action.is_finite() {
        return Err(Error::arg("non-finite pick/place action"));
    }
    let Some(handle) = attach_nearest(scene, action.pick.pos(), params) else {
        return Ok(Event::MissedGrasp);
    };
    let delta_theta = angle_diff(action.place.theta, action.pick.theta);
    let profile = params.profile(scene.stage);

    match handle {
        GraspHandle::Item { item } => {
            let pick = action.pick.pos();
            let place = action.place.pos();
            let it = &mut scene.rigid_items[item];
            let new_pos = place + (it.pose.pos() - pick).rotated(delta_theta);
            it.pose = Pose2::new(new_pos.x, new_pos.y, it.pose.theta + delta_theta);
            it.pose.x = it.pose.x.clamp(calib.origin.x, calib.origin.x + calib.width_m);
            it.pose.y = it.pose.y.clamp(calib.origin.y, calib.origin.y + calib.height_m);
            update_cover_relations(scene, Moved::Item(item));
        }
        GraspHandle::Bead { cable, .. } if profile.bead_drag == DragKind::RigidBag
            && scene.bags.iter().any(|b| b.cable_idx == cable) =>
        {
            // Lift the whole bag: ring and enclosed items move rigidly.
            let hull = geom::convex_hull(&scene.cables[cable].beads);
            let pick = action.pick.pos();
            let place = action.place.pos();
            let transform = |p: Vec2| place + (p - pick).rotated(delta_theta);
            let enclosed: Vec<usize> = scene
                .rigid_items
                .iter()
                .enumerate()
                .filter(|(_, it)| hull.len() >= 3 && geom::point_in_polygon(it.pose.pos(), &hull))
                .map(|(i, _)| i)
                .collect();
            for b in &mut scene.cables[cable].beads {
                *b = calib.clamp_world(transform(*b));
            }
            for i in enclosed {
                let it = &mut scene.rigid_items[i];
                let new_pos = calib.clamp_world(transform(it.pose.pos()));
                it.pose = Pose2::new(new_pos.x, new_pos.y, it.pose.theta + delta_theta);
            }
            update_cover_relations(scene, Moved::Other);
        }
        GraspHandle::FabricVertex { fabric, .. } if profile.fabric_drag == DragKind::Fold => {
            let pick = action.pick.pos();
            let place = action.place.pos();
            let dir = place - pick;
            if dir.norm() > 1e-9 {
                let d_hat = dir.scale(1.0 / dir.norm());
                let mid = (pick + place).scale(0.5);
                for v in &mut scene.fabrics[fabric].verts {
                    let s = (*v - mid).dot(d_hat);
                    if s < 0.0 {
                        *v = calib.clamp_world(*v - d_hat.scale(2.0 * s));
                    }
                }
            }
            relax_constraints(scene, params.relax_iterations, calib);
            update_cover_relations(scene, Moved::Fabric(fabric));
        }
        GraspHandle::Bead { .. } | GraspHandle::FabricVertex { .. } => {
            let drag = match handle {
                GraspHandle::Bead { .. } => profile.bead_drag,
                _ => profile.fabric_drag,
            };
            let mut sys = build_system(scene);
            let g = sys.index_of(handle).expect("deformable handle");
            if let DragKind::Local(k) = drag {
                let dist = sys.link_distances(g);
                for (i, w) in sys.inv_mass.iter_mut().enumerate() {
                    if dist[i] > k as u32 {
                        *w = 0.0;
                    }
                }
            }
            sys.inv_mass[g] = 0.0;
            // The grasped particle keeps its offset from the gripper tip.
            let offset = sys.positions[g] - action.pick.pos();
            let pick = action.pick.pos();
            let place = action.place.pos();
            for s in 1..=params.substeps {
                let t = s as f64 / params.substeps as f64;
                let waypoint = pick + (place - pick).scale(t);
                sys.positions[g] = waypoint + offset;
                sys.relax(params.relax_iterations, calib);
                sys.positions[g] = waypoint + offset;
            }
            // Release: everything relaxes freely.
            for w in sys.inv_mass.iter_mut() {
                *w = 1.0;
            }
            sys.relax(params.relax_iterations, calib);
            sys.write_back(scene);
            let moved = match handle {
                GraspHandle::FabricVertex { fabric, .. } => Moved::Fabric(fabric),
                _ => Moved::Other,
            };
            update_cover_relations(scene, moved);
        }
    }
    Ok(Event::Placed(handle))
}

/// Random impulse displacements on cable beads and fabric vertices followed
/// by relaxation; closed rings additionally get squashed along a random
/// axis so that they start crumpled. Deterministic given the rng state.
pub fn perturb_scene<R: Rng>(
    scene: &mut Scene,
    rng: &mut R,
    magnitude: f64,
    calib: &WorkspaceCalib,
) {
    for c in &mut scene.cables {
        if c.closed {
            let axis_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let squash = 1.0 - magnitude * rng.random_range(0.5..1.0);
            let squash = squash.max(0.05);
            let centroid = c.centroid();
            let axis = Vec2::new(axis_angle.cos(), axis_angle.sin());
            for b in &mut c.beads {
                let d = *b - centroid;
                let along = axis.scale(d.dot(axis));
                let perp = d - along;
                *b = centroid + perp + along.scale(squash);
            }
        }
        let jitter = magnitude * 0.3 * c.link_rest;
        for b in &mut c.beads {
            let dx: f64 = rng.random_range(-1.0..1.0);
            let dy: f64 = rng.random_range(-1.0..1.0);
            *b = calib.clamp_world(*b + Vec2::new(dx, dy).scale(jitter));
        }
    }
    for f in &mut scene.fabrics {
        let jitter = magnitude * 0.3 * f.spacing_rest;
        for v in &mut f.verts {
            let dx: f64 = rng.random_range(-1.0..1.0);
            let dy: f64 = rng.random_range(-1.0..1.0);
            *v = calib.clamp_world(*v + Vec2::new(dx, dy).scale(jitter));
        }
    }
    if magnitude > 0.0 {
        relax_constraints(scene, 30, calib);
    }
}

/// Largest relative deviation of any cable link from its rest length.
pub fn max_link_residual(scene: &Scene) -> f64 {
    let mut worst: f64 = 0.0;
    for c in &scene.cables {
        let n = c.beads.len();
        for i in 0..n {
            if i + 1 == n && !c.closed {
                break;
            }
            let j = (i + 1) % n;
            let len = c.beads[i].dist(c.beads[j]);
            worst = worst.max((len - c.link_rest).abs() / c.link_rest);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::palette;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn calib() -> WorkspaceCalib {
        WorkspaceCalib::standard(160, 80)
    }

    fn straight_cable(scene: &mut Scene, n: usize, start: Vec2, link: f64) -> usize {
        let beads = (0..n).map(|i| start + Vec2::new(i as f64 * link, 0.0)).collect();
        scene.add_cable(beads, 0.01, link, false, palette::CABLE)
    }

    #[test]
    fn relax_is_fixed_point_when_satisfied() {
        let mut s = Scene::new();
        straight_cable(&mut s, 8, Vec2::new(0.2, 0.25), 0.02);
        let before = s.clone();
        relax_constraints(&mut s, 50, &calib());
        for (a, b) in s.cables[0].beads.iter().zip(&before.cables[0].beads) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn two_bead_projection_is_symmetric_midpoint() {
        let mut s = Scene::new();
        let rest = 0.05;
        s.add_cable(
            vec![Vec2::new(0.4, 0.25), Vec2::new(0.4 + 2.0 * rest, 0.25)],
            0.01,
            rest,
            false,
            palette::CABLE,
        );
        relax_constraints(&mut s, 100, &calib());
        let a = s.cables[0].beads[0];
        let b = s.cables[0].beads[1];
        assert!((a.dist(b) - rest).abs() < 1e-6);
        // Both moved symmetrically toward the midpoint.
        assert!((a.x - (0.4 + rest / 2.0)).abs() < 1e-6);
        assert!((b.x - (0.4 + 1.5 * rest)).abs() < 1e-6);
    }

    #[test]
    fn pinned_projection_is_one_sided() {
        let mut s = Scene::new();
        let rest = 0.05;
        s.add_cable(
            vec![Vec2::new(0.4, 0.25), Vec2::new(0.4 + 2.0 * rest, 0.25)],
            0.01,
            rest,
            false,
            palette::CABLE,
        );
        let mut sys = build_system(&s);
        sys.inv_mass[0] = 0.0;
        sys.relax(100, &calib());
        assert!(sys.positions[0].dist(Vec2::new(0.4, 0.25)) < 1e-12);
        assert!((sys.positions[1].x - (0.4 + rest)).abs() < 1e-6);
    }

    #[test]
    fn missed_grasp_leaves_scene_bit_identical() {
        let mut s = Scene::new();
        straight_cable(&mut s, 8, Vec2::new(0.2, 0.25), 0.02);
        let before = s.clone();
        let a = PickPlaceAction::new(Pose2::new(0.9, 0.45, 0.0), Pose2::new(0.5, 0.25, 0.0));
        let ev = execute_pick_place(&mut s, &a, &MotionParams::default(), &calib()).unwrap();
        assert_eq!(ev, Event::MissedGrasp);
        assert_eq!(s, before);
    }

    #[test]
    fn same_pose_pick_place_is_noop() {
        let mut s = Scene::new();
        straight_cable(&mut s, 8, Vec2::new(0.2, 0.25), 0.02);
        let before = s.clone();
        let at = Pose2::new(0.2 + 0.02 * 3.0, 0.25, 0.0);
        let a = PickPlaceAction::new(at, at);
        execute_pick_place(&mut s, &a, &MotionParams::default(), &calib()).unwrap();
        for (x, y) in s.cables[0].beads.iter().zip(&before.cables[0].beads) {
            assert!(x.dist(*y) < 1e-6);
        }
    }

    #[test]
    fn single_free_bead_lands_at_place() {
        let mut s = Scene::new();
        s.add_cable(vec![Vec2::new(0.3, 0.3)], 0.01, 0.02, false, palette::CABLE);
        let a = PickPlaceAction::new(Pose2::new(0.3, 0.3, 0.0), Pose2::new(0.62, 0.12, 0.0));
        execute_pick_place(&mut s, &a, &MotionParams::default(), &calib()).unwrap();
        assert!(s.cables[0].beads[0].dist(Vec2::new(0.62, 0.12)) < 1e-9);
    }

    #[test]
    fn dragged_cable_keeps_total_length() {
        for drag in [DragKind::Free, DragKind::Local(6)] {
            let mut s = Scene::new();
            straight_cable(&mut s, 24, Vec2::new(0.2, 0.25), 0.02);
            let params = MotionParams {
                stage_profiles: vec![StageProfile { bead_drag: drag, fabric_drag: DragKind::Free }],
                ..Default::default()
            };
            let a = PickPlaceAction::new(
                Pose2::new(0.2, 0.25, 0.0),
                Pose2::new(0.2 - 0.1, 0.25 + 0.173, 0.0),
            );
            execute_pick_place(&mut s, &a, &params, &calib()).unwrap();
            let total = s.cables[0].length();
            let rest = s.cables[0].rest_total();
            assert!(
                (total - rest).abs() / rest < 0.05,
                "{drag:?}: length {total} vs rest {rest}"
            );
        }
    }

    #[test]
    fn local_drag_freezes_far_beads() {
        let mut s = Scene::new();
        straight_cable(&mut s, 24, Vec2::new(0.2, 0.25), 0.02);
        let far_bead_before = s.cables[0].beads[23];
        let params = MotionParams {
            stage_profiles: vec![StageProfile {
                bead_drag: DragKind::Local(4),
                fabric_drag: DragKind::Free,
            }],
            ..Default::default()
        };
        let a = PickPlaceAction::new(Pose2::new(0.2, 0.25, 0.0), Pose2::new(0.2, 0.32, 0.0));
        execute_pick_place(&mut s, &a, &params, &calib()).unwrap();
        // The grasped end moved, the far end barely did.
        assert!(s.cables[0].beads[0].dist(Vec2::new(0.2, 0.32)) < 1e-9);
        assert!(s.cables[0].beads[23].dist(far_bead_before) < 0.005);
    }

    #[test]
    fn rigid_item_rotates_about_grasp() {
        let mut s = Scene::new();
        s.add_rigid_item(
            Pose2::new(0.4, 0.25, 0.0),
            vec![Vec2::new(-0.02, -0.02), Vec2::new(0.02, -0.02), Vec2::new(0.02, 0.02), Vec2::new(-0.02, 0.02)],
            0.03,
            palette::CUBE,
        );
        // Grasp at the item corner-ish point, rotate a quarter turn.
        let pick = Pose2::new(0.41, 0.26, 0.0);
        let place = Pose2::new(0.61, 0.30, std::f64::consts::FRAC_PI_2);
        execute_pick_place(&mut s, &PickPlaceAction::new(pick, place), &MotionParams::default(), &calib()).unwrap();
        let expect = place.pos() + (Vec2::new(0.4, 0.25) - pick.pos()).rotated(std::f64::consts::FRAC_PI_2);
        assert!(s.rigid_items[0].pose.pos().dist(expect) < 1e-9);
        assert!((s.rigid_items[0].pose.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn perturb_is_deterministic_and_zero_magnitude_is_noop() {
        let c = calib();
        let build = || {
            let mut s = Scene::new();
            let n = 32;
            let link = 0.02;
            let r = n as f64 * link / std::f64::consts::TAU;
            let beads = (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * std::f64::consts::TAU;
                    Vec2::new(0.5 + r * t.cos(), 0.25 + r * t.sin())
                })
                .collect();
            let mut s2 = Scene::new();
            s2.add_cable(beads, 0.01, link, true, palette::CABLE);
            s = s2;
            s
        };
        let mut a = build();
        let mut b = build();
        perturb_scene(&mut a, &mut ChaCha12Rng::seed_from_u64(7), 0.5, &c);
        perturb_scene(&mut b, &mut ChaCha12Rng::seed_from_u64(7), 0.5, &c);
        assert_eq!(a, b);

        let mut z = build();
        let before = z.clone();
        perturb_scene(&mut z, &mut ChaCha12Rng::seed_from_u64(7), 0.0, &c);
        for (x, y) in z.cables[0].beads.iter().zip(&before.cables[0].beads) {
            assert!(x.dist(*y) < 1e-12);
        }
    }

    #[test]
    fn execute_is_deterministic() {
        let run = || {
            let mut s = Scene::new();
            straight_cable(&mut s, 24, Vec2::new(0.2, 0.25), 0.02);
            let a = PickPlaceAction::new(Pose2::new(0.3, 0.25, 0.0), Pose2::new(0.5, 0.4, 0.0));
            execute_pick_place(&mut s, &a, &MotionParams::default(), &calib()).unwrap();
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn residual_bounded_after_random_actions() {
        let c = calib();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut s = Scene::new();
        straight_cable(&mut s, 24, Vec2::new(0.2, 0.25), 0.02);
        let params = MotionParams {
            stage_profiles: vec![StageProfile {
                bead_drag: DragKind::Local(6),
                fabric_drag: DragKind::Free,
            }],
            ..Default::default()
        };
        for _ in 0..50 {
            let k = rng.random_range(0..24usize);
            let pick = s.cables[0].beads[k];
            let place = Vec2::new(rng.random_range(0.1..0.9), rng.random_range(0.1..0.4));
            let a = PickPlaceAction::new(Pose2::from_point(pick), Pose2::from_point(place));
            execute_pick_place(&mut s, &a, &params, &c).unwrap();
            assert!(max_link_residual(&s) <= 0.2, "residual {}", max_link_residual(&s));
            for b in &s.cables[0].beads {
                assert!(c.contains_world(*b));
            }
        }
    }

    #[test]
    fn attach_nearest_tie_breaks_and_empty() {
        let params = MotionParams::default();
        assert_eq!(attach_nearest(&Scene::new(), Vec2::new(0.5, 0.25), &params), None);

        let mut s = Scene::new();
        // Cable added first gets the lower object id.
        s.add_cable(vec![Vec2::new(0.5, 0.25)], 0.01, 0.02, false, palette::CABLE);
        s.add_fabric(vec![Vec2::new(0.5, 0.25); 4], 2, 0.02, palette::FABRIC);
        let h = attach_nearest(&s, Vec2::new(0.5, 0.25), &params);
        assert_eq!(h, Some(GraspHandle::Bead { cable: 0, index: 0 }));

        // Exactly on a bead with nothing else near.
        let mut s = Scene::new();
        straight_cable(&mut s, 4, Vec2::new(0.3, 0.3), 0.05);
        let h = attach_nearest(&s, Vec2::new(0.35, 0.3), &params);
        assert_eq!(h, Some(GraspHandle::Bead { cable: 0, index: 1 }));
    }
}
