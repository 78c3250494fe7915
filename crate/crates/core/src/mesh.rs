//! Quadtree forest of axis-aligned quadrilaterals over a rectangle.
//!
//! The domain is first split into `nx × ny` root cells (level 0). Each cell
//! can be split into four children (SW, SE, NW, NE). Cells live in an arena
//! and are never removed: coarsening makes the children dormant and the
//! parent active again, so ids are stable for the lifetime of the mesh.
//!
//! Every cell carries integer lattice coordinates `(level, ix, iy)`; two
//! cells are neighbours when their lattice boxes touch. The mesh keeps the
//! active set 2:1 balanced across faces, so a coarse face is split by at most
//! one hanging node.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Hard cap on refinement depth.
pub const MAX_LEVEL: u8 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("cell counts must be positive, got {nx} x {ny}")]
    BadCounts { nx: usize, ny: usize },
    #[error("degenerate domain {0:?}")]
    BadDomain(Rect),
    #[error("cell {0} is not active")]
    Inactive(CellId),
    #[error("cell {0} does not exist")]
    Unknown(CellId),
    #[error("refining cell {id} would exceed the level cap {cap}")]
    LevelCap { id: CellId, cap: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub usize);

impl CellId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    /// Map a physical point to reference coordinates in `[0,1]^2`.
    pub fn to_reference(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.x0) / self.width(),
            (p[1] - self.y0) / self.height(),
        ]
    }

    pub fn from_reference(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.x0 + r[0] * self.width(),
            self.y0 + r[1] * self.height(),
        ]
    }
}

/// Sides of a cell, also used as tags for the four domain boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::West => [-1.0, 0.0],
            Side::East => [1.0, 0.0],
            Side::South => [0.0, -1.0],
            Side::North => [0.0, 1.0],
        }
    }

    fn offset(self) -> (i64, i64) {
        match self {
            Side::West => (-1, 0),
            Side::East => (1, 0),
            Side::South => (0, -1),
            Side::North => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::West => 0,
            Side::East => 1,
            Side::South => 2,
            Side::North => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Active,
    /// Split into four children that are in use.
    Refined,
    /// An ancestor is active.
    Dormant,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub id: CellId,
    pub level: u8,
    pub ix: u32,
    pub iy: u32,
    pub bbox: Rect,
    pub state: CellState,
    pub parent: Option<CellId>,
    /// SW, SE, NW, NE.
    pub children: Option<[CellId; 4]>,
}

impl Cell {
    pub fn is_active(&self) -> bool {
        self.state == CellState::Active
    }

    /// Local mesh size used by stabilization and penalties.
    pub fn size(&self) -> f64 {
        self.bbox.area().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Conforming,
    /// Fine side of a face whose other side is one level coarser.
    HangingSubFace,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceNeighbor {
    Cell(CellId),
    Boundary(Side),
}

#[derive(Debug, Clone)]
pub struct Face {
    pub owner: CellId,
    pub neighbor: FaceNeighbor,
    /// Unit normal pointing from owner to neighbor (outward on the boundary).
    pub normal: [f64; 2],
    pub length: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub kind: FaceKind,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self.neighbor, FaceNeighbor::Boundary(_))
    }

    pub fn neighbor_cell(&self) -> Option<CellId> {
        match self.neighbor {
            FaceNeighbor::Cell(id) => Some(id),
            FaceNeighbor::Boundary(_) => None,
        }
    }

    pub fn boundary_side(&self) -> Option<Side> {
        match self.neighbor {
            FaceNeighbor::Boundary(s) => Some(s),
            FaceNeighbor::Cell(_) => None,
        }
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        [
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        ]
    }
}

/// What sits across one side of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Adjacent {
    Outside(Side),
    Same(CellId),
    Finer,
    Coarser(CellId),
}

/// Level budgets for adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptBounds {
    pub r_max: u8,
    pub r_min: u8,
    pub cell_max: usize,
}

impl AdaptBounds {
    pub fn new(r_max: u8, r_min: u8, cell_max: usize) -> Self {
        Self {
            r_max,
            r_min,
            cell_max,
        }
    }

    pub fn is_valid_for(&self, mesh: &QuadMesh) -> bool {
        self.r_min <= self.r_max && self.r_max <= MAX_LEVEL && self.cell_max >= mesh.n_active()
    }
}

#[derive(Debug, Clone)]
pub struct QuadMesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    cells: Vec<Cell>,
    lattice: HashMap<(u8, u32, u32), CellId>,
    active: Vec<CellId>,
    active_index: Vec<Option<usize>>,
    faces: Vec<Face>,
    generation: u64,
}

impl QuadMesh {
    pub fn build_uniform(domain: Rect, nx: usize, ny: usize) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::BadCounts { nx, ny });
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(MeshError::BadDomain(domain));
        }
        let mut mesh = QuadMesh {
            domain,
            nx,
            ny,
            cells: Vec::with_capacity(nx * ny),
            lattice: HashMap::new(),
            active: Vec::new(),
            active_index: Vec::new(),
            faces: Vec::new(),
            generation: 0,
        };
        for iy in 0..ny as u32 {
            for ix in 0..nx as u32 {
                mesh.push_cell(0, ix, iy, None, CellState::Active);
            }
        }
        mesh.finalize();
        Ok(mesh)
    }

    fn push_cell(
        &mut self,
        level: u8,
        ix: u32,
        iy: u32,
        parent: Option<CellId>,
        state: CellState,
    ) -> CellId {
        let id = CellId(self.cells.len());
        let bbox = self.lattice_rect(level, ix as i64, iy as i64);
        self.cells.push(Cell {
            id,
            level,
            ix,
            iy,
            bbox,
            state,
            parent,
            children: None,
        });
        self.lattice.insert((level, ix, iy), id);
        id
    }

    fn lattice_rect(&self, level: u8, ix: i64, iy: i64) -> Rect {
        let sx = self.domain.width() / (self.nx as f64 * (1u64 << level) as f64);
        let sy = self.domain.height() / (self.ny as f64 * (1u64 << level) as f64);
        Rect::new(
            self.domain.x0 + ix as f64 * sx,
            self.domain.y0 + iy as f64 * sy,
            self.domain.x0 + (ix + 1) as f64 * sx,
            self.domain.y0 + (iy + 1) as f64 * sy,
        )
    }

    fn finalize(&mut self) {
        self.active = self
            .cells
            .iter()
            .filter(|c| c.is_active())
            .map(|c| c.id)
            .collect();
        self.active_index = vec![None; self.cells.len()];
        for (i, id) in self.active.iter().enumerate() {
            self.active_index[id.index()] = Some(i);
        }
        self.faces = self.enumerate_faces();
        self.generation += 1;
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn root_counts(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Incremented on every mutation; used to detect stale marks.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.index()]
    }

    pub fn n_cells_total(&self) -> usize {
        self.cells.len()
    }

    pub fn active_cells(&self) -> &[CellId] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Position of an active cell in `active_cells()`.
    pub fn active_index(&self, id: CellId) -> Option<usize> {
        self.active_index.get(id.index()).copied().flatten()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn max_level(&self) -> u8 {
        self.active
            .iter()
            .map(|&id| self.cell(id).level)
            .max()
            .unwrap_or(0)
    }

    pub fn min_level(&self) -> u8 {
        self.active
            .iter()
            .map(|&id| self.cell(id).level)
            .min()
            .unwrap_or(0)
    }

    pub fn min_cell_size(&self) -> f64 {
        self.active
            .iter()
            .map(|&id| self.cell(id).size())
            .fold(f64::INFINITY, f64::min)
    }

    fn lattice_extent(&self, level: u8) -> (i64, i64) {
        ((self.nx as i64) << level, (self.ny as i64) << level)
    }

    fn lookup(&self, level: u8, ix: i64, iy: i64) -> Option<CellId> {
        if ix < 0 || iy < 0 {
            return None;
        }
        self.lattice.get(&(level, ix as u32, iy as u32)).copied()
    }

    /// Active cell covering lattice position `(level, ix, iy)`, searching
    /// the ancestors of that position.
    fn covering_active(&self, level: u8, ix: i64, iy: i64) -> Option<CellId> {
        for lv in (0..=level).rev() {
            let shift = level - lv;
            if let Some(id) = self.lookup(lv, ix >> shift, iy >> shift) {
                match self.cell(id).state {
                    CellState::Active => return Some(id),
                    CellState::Refined => return None,
                    CellState::Dormant => {}
                }
            }
        }
        None
    }

    fn adjacent(&self, id: CellId, side: Side) -> Adjacent {
        let c = self.cell(id);
        let (dx, dy) = side.offset();
        let (jx, jy) = (c.ix as i64 + dx, c.iy as i64 + dy);
        let (ex, ey) = self.lattice_extent(c.level);
        if jx < 0 || jy < 0 || jx >= ex || jy >= ey {
            return Adjacent::Outside(side);
        }
        if let Some(nid) = self.lookup(c.level, jx, jy) {
            match self.cell(nid).state {
                CellState::Active => return Adjacent::Same(nid),
                CellState::Refined => return Adjacent::Finer,
                CellState::Dormant => {}
            }
        }
        match self.covering_active(c.level, jx, jy) {
            Some(nid) => Adjacent::Coarser(nid),
            None => Adjacent::Finer,
        }
    }

    fn side_segment(bbox: &Rect, side: Side) -> ([f64; 2], [f64; 2]) {
        match side {
            Side::West => ([bbox.x0, bbox.y0], [bbox.x0, bbox.y1]),
            Side::East => ([bbox.x1, bbox.y0], [bbox.x1, bbox.y1]),
            Side::South => ([bbox.x0, bbox.y0], [bbox.x1, bbox.y0]),
            Side::North => ([bbox.x0, bbox.y1], [bbox.x1, bbox.y1]),
        }
    }

    fn enumerate_faces(&self) -> Vec<Face> {
        let mut faces = Vec::with_capacity(2 * self.active.len() + 4);
        for &id in &self.active {
            let bbox = self.cell(id).bbox;
            for side in Side::ALL {
                let (a, b) = Self::side_segment(&bbox, side);
                let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let normal = side.outward_normal();
                let face = |neighbor, kind| Face {
                    owner: id,
                    neighbor,
                    normal,
                    length,
                    a,
                    b,
                    kind,
                };
                match self.adjacent(id, side) {
                    Adjacent::Outside(s) => {
                        faces.push(face(FaceNeighbor::Boundary(s), FaceKind::Boundary))
                    }
                    Adjacent::Same(nid) => {
                        if matches!(side, Side::East | Side::North) {
                            faces.push(face(FaceNeighbor::Cell(nid), FaceKind::Conforming));
                        }
                    }
                    Adjacent::Coarser(nid) => {
                        faces.push(face(FaceNeighbor::Cell(nid), FaceKind::HangingSubFace))
                    }
                    Adjacent::Finer => {}
                }
            }
        }
        faces
    }

    /// Active cell containing point `p` (first match for points on faces).
    pub fn locate(&self, p: [f64; 2]) -> Option<CellId> {
        if !self.domain.contains(p) {
            return None;
        }
        let r = self.domain.to_reference(p);
        let ix = ((r[0] * self.nx as f64) as usize).min(self.nx - 1);
        let iy = ((r[1] * self.ny as f64) as usize).min(self.ny - 1);
        let mut id = self.lookup(0, ix as i64, iy as i64)?;
        self.descend(&mut id, p, |c| c.is_active());
        self.cell(id).is_active().then_some(id)
    }

    /// Walk from `id` down the tree toward `p` until `stop` holds or a leaf
    /// of the arena is reached.
    pub(crate) fn descend(&self, id: &mut CellId, p: [f64; 2], stop: impl Fn(&Cell) -> bool) {
        loop {
            let c = self.cell(*id);
            if stop(c) {
                return;
            }
            let Some(children) = c.children else { return };
            let mid = c.bbox.center();
            let k = usize::from(p[0] >= mid[0]) + 2 * usize::from(p[1] >= mid[1]);
            *id = children[k];
        }
    }

    fn split(&mut self, id: CellId) -> Result<(), MeshError> {
        let c = self.cell(id).clone();
        if c.level >= MAX_LEVEL {
            return Err(MeshError::LevelCap { id, cap: MAX_LEVEL });
        }
        let children = match c.children {
            Some(ch) => {
                for k in ch {
                    self.cells[k.index()].state = CellState::Active;
                }
                ch
            }
            None => {
                let l = c.level + 1;
                let (x, y) = (2 * c.ix, 2 * c.iy);
                let sw = self.push_cell(l, x, y, Some(id), CellState::Active);
                let se = self.push_cell(l, x + 1, y, Some(id), CellState::Active);
                let nw = self.push_cell(l, x, y + 1, Some(id), CellState::Active);
                let ne = self.push_cell(l, x + 1, y + 1, Some(id), CellState::Active);
                [sw, se, nw, ne]
            }
        };
        let cell = &mut self.cells[id.index()];
        cell.children = Some(children);
        cell.state = CellState::Refined;
        Ok(())
    }

    /// Cells (currently active, not in `pending`) that must also be split if
    /// `seed` and everything in `pending` are split, so that the result is
    /// 2:1 balanced. Includes `seed` itself. The mesh is not modified.
    pub fn refine_closure(
        &self,
        seed: CellId,
        pending: &std::collections::HashSet<CellId>,
    ) -> Vec<CellId> {
        let mut out = Vec::new();
        if pending.contains(&seed) {
            return out;
        }
        let mut seen: std::collections::HashSet<CellId> = std::collections::HashSet::new();
        let mut queue = VecDeque::from([seed]);
        seen.insert(seed);
        while let Some(id) = queue.pop_front() {
            out.push(id);
            let level = self.cell(id).level;
            for side in Side::ALL {
                if let Adjacent::Coarser(nid) = self.adjacent(id, side) {
                    // Children of `id` sit at level+1; a neighbour at level-1
                    // would then be two levels coarser.
                    if self.cell(nid).level < level && !pending.contains(&nid) && seen.insert(nid) {
                        queue.push_back(nid);
                    }
                }
            }
        }
        out
    }

    /// Split every listed cell, then keep splitting neighbours until no face
    /// separates cells more than one level apart.
    pub fn refine(&mut self, cells: &[CellId]) -> Result<(), MeshError> {
        for &id in cells {
            let c = self.cells.get(id.index()).ok_or(MeshError::Unknown(id))?;
            if !c.is_active() {
                return Err(MeshError::Inactive(id));
            }
            if c.level >= MAX_LEVEL {
                return Err(MeshError::LevelCap { id, cap: MAX_LEVEL });
            }
        }
        if cells.is_empty() {
            return Ok(());
        }
        let mut sorted: Vec<CellId> = cells.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut work = VecDeque::new();
        for id in sorted {
            self.split(id)?;
            work.extend(self.cell(id).children.unwrap());
        }
        while let Some(id) = work.pop_front() {
            if !self.cell(id).is_active() {
                continue;
            }
            let level = self.cell(id).level;
            for side in Side::ALL {
                if let Adjacent::Coarser(nid) = self.adjacent(id, side) {
                    if self.cell(nid).level + 1 < level {
                        self.split(nid)?;
                        work.extend(self.cell(nid).children.unwrap());
                        work.push_back(id);
                    }
                }
            }
        }
        self.finalize();
        Ok(())
    }

    fn can_merge(&self, parent: CellId) -> bool {
        let p = self.cell(parent);
        let Some(children) = p.children else {
            return false;
        };
        if p.state != CellState::Refined || children.iter().any(|&k| !self.cell(k).is_active()) {
            return false;
        }
        // Positions at the children's level just outside the parent.
        let l = p.level + 1;
        let (x, y) = (2 * p.ix as i64, 2 * p.iy as i64);
        let outside = [
            (x - 1, y),
            (x - 1, y + 1),
            (x + 2, y),
            (x + 2, y + 1),
            (x, y - 1),
            (x + 1, y - 1),
            (x, y + 2),
            (x + 1, y + 2),
        ];
        outside
            .iter()
            .all(|&(ix, iy)| match self.lookup(l, ix, iy) {
                Some(nid) => self.cell(nid).state != CellState::Refined,
                None => true,
            })
    }

    /// Merge sibling quartets whose four members are all listed and active,
    /// provided the merge keeps the 2:1 balance. Other marks are ignored.
    pub fn coarsen(&mut self, cells: &[CellId]) {
        let marked: std::collections::HashSet<CellId> = cells
            .iter()
            .copied()
            .filter(|id| id.index() < self.cells.len() && self.cell(*id).is_active())
            .collect();
        let mut parents: Vec<CellId> = marked
            .iter()
            .filter_map(|&id| self.cell(id).parent)
            .collect();
        parents.sort();
        parents.dedup();
        let mut changed = false;
        for parent in parents {
            let Some(children) = self.cell(parent).children else {
                continue;
            };
            if !children.iter().all(|k| marked.contains(k)) || !self.can_merge(parent) {
                continue;
            }
            for k in children {
                self.cells[k.index()].state = CellState::Dormant;
            }
            self.cells[parent.index()].state = CellState::Active;
            changed = true;
        }
        if changed {
            self.finalize();
        }
    }

    /// Largest level difference across any interior face.
    pub fn max_level_jump(&self) -> u8 {
        self.faces
            .iter()
            .filter_map(|f| f.neighbor_cell().map(|n| (f.owner, n)))
            .map(|(a, b)| self.cell(a).level.abs_diff(self.cell(b).level))
            .max()
            .unwrap_or(0)
    }

    pub fn total_active_area(&self) -> f64 {
        self.active
            .iter()
            .map(|&id| self.cell(id).bbox.area())
            .sum()
    }

    /// Integer key of a vertex at the finest lattice resolution.
    pub fn vertex_key(&self, p: [f64; 2]) -> (u64, u64) {
        let scale_x = (self.nx as f64) * (1u64 << MAX_LEVEL) as f64 / self.domain.width();
        let scale_y = (self.ny as f64) * (1u64 << MAX_LEVEL) as f64 / self.domain.height();
        (
            ((p[0] - self.domain.x0) * scale_x).round() as u64,
            ((p[1] - self.domain.y0) * scale_y).round() as u64,
        )
    }

    /// Corner keys of a cell in SW, SE, NW, NE order.
    pub(crate) fn corner_keys(&self, id: CellId) -> [(u64, u64); 4] {
        let c = self.cell(id);
        let s = 1u64 << (MAX_LEVEL - c.level);
        let (x, y) = (c.ix as u64 * s, c.iy as u64 * s);
        [(x, y), (x + s, y), (x, y + s), (x + s, y + s)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn unit(n: usize) -> QuadMesh {
        QuadMesh::build_uniform(Rect::unit(), n, n).unwrap()
    }

    #[test]
    fn single_cell_has_four_boundary_faces() {
        let m = unit(1);
        assert_eq!(m.n_active(), 1);
        assert_eq!(m.faces().len(), 4);
        assert!(m.faces().iter().all(|f| f.kind == FaceKind::Boundary));
    }

    #[test]
    fn four_by_four_face_counts() {
        let m = unit(4);
        assert_eq!(m.n_active(), 16);
        let interior = m.faces().iter().filter(|f| !f.is_boundary()).count();
        assert_eq!(interior, 24);
        assert_eq!(m.faces().len() - interior, 16);
    }

    #[test]
    fn shared_face_length() {
        let m = QuadMesh::build_uniform(Rect::unit(), 2, 1).unwrap();
        let f = m.faces().iter().find(|f| !f.is_boundary()).unwrap();
        assert_eq!(f.length, 1.0);
        assert_eq!(f.normal, [1.0, 0.0]);
    }

    #[test]
    fn rejects_zero_counts() {
        assert_eq!(
            QuadMesh::build_uniform(Rect::unit(), 0, 3).unwrap_err(),
            MeshError::BadCounts { nx: 0, ny: 3 }
        );
    }

    #[test]
    fn refine_single_cell() {
        let mut m = unit(1);
        m.refine(&[CellId(0)]).unwrap();
        assert_eq!(m.n_active(), 4);
        assert_eq!(m.max_level(), 1);
        let ch = m.cell(CellId(0)).children.unwrap();
        // SW, SE, NW, NE ordering
        assert!(m.cell(ch[0]).bbox.x0 == 0.0 && m.cell(ch[0]).bbox.y0 == 0.0);
        assert!(m.cell(ch[1]).bbox.x0 == 0.5 && m.cell(ch[1]).bbox.y0 == 0.0);
        assert!(m.cell(ch[2]).bbox.x0 == 0.0 && m.cell(ch[2]).bbox.y0 == 0.5);
        assert!(m.cell(ch[3]).bbox.x0 == 0.5 && m.cell(ch[3]).bbox.y0 == 0.5);
    }

    #[test]
    fn refine_empty_is_identity() {
        let mut m = unit(2);
        let before = m.active_cells().to_vec();
        m.refine(&[]).unwrap();
        assert_eq!(m.active_cells(), &before[..]);
    }

    #[test]
    fn refine_inactive_is_error() {
        let mut m = unit(1);
        m.refine(&[CellId(0)]).unwrap();
        assert_eq!(
            m.refine(&[CellId(0)]).unwrap_err(),
            MeshError::Inactive(CellId(0))
        );
    }

    #[test]
    fn twice_refined_corner_forces_neighbours() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        // refine the NE child of cell 0, which touches cells 1 and 2
        let ne = m.cell(CellId(0)).children.unwrap()[3];
        m.refine(&[ne]).unwrap();
        assert_eq!(m.max_level(), 2);
        assert!(m.max_level_jump() <= 1);
        // Cells 1 and 2 (east and north neighbours) had to be split.
        assert_eq!(m.cell(CellId(1)).state, CellState::Refined);
        assert_eq!(m.cell(CellId(2)).state, CellState::Refined);
        assert_eq!(m.cell(CellId(3)).state, CellState::Active);
        assert!((m.total_active_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hanging_faces_are_split() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let hanging: Vec<_> = m
            .faces()
            .iter()
            .filter(|f| f.kind == FaceKind::HangingSubFace)
            .collect();
        assert_eq!(hanging.len(), 4);
        assert!(hanging.iter().all(|f| (f.length - 0.25).abs() < 1e-15));
    }

    #[test]
    fn coarsen_full_quartet() {
        let mut m = unit(1);
        m.refine(&[CellId(0)]).unwrap();
        let ch = m.cell(CellId(0)).children.unwrap();
        m.coarsen(&ch);
        assert_eq!(m.active_cells(), &[CellId(0)]);
    }

    #[test]
    fn coarsen_partial_quartet_is_ignored() {
        let mut m = unit(1);
        m.refine(&[CellId(0)]).unwrap();
        let ch = m.cell(CellId(0)).children.unwrap();
        let before = m.active_cells().to_vec();
        m.coarsen(&ch[..3]);
        assert_eq!(m.active_cells(), &before[..]);
    }

    #[test]
    fn coarsen_blocked_by_balance() {
        // Staircase: refine the east cell of a 2x1 mesh, then refine the
        // west-most children of it so that their western neighbours (the
        // quartet of the west cell) cannot merge back.
        let mut m = QuadMesh::build_uniform(Rect::unit(), 2, 1).unwrap();
        m.refine(&[CellId(0), CellId(1)]).unwrap();
        let east = m.cell(CellId(1)).children.unwrap();
        m.refine(&[east[0], east[2]]).unwrap();
        assert!(m.max_level_jump() <= 1);
        let west = m.cell(CellId(0)).children.unwrap();
        let before = m.active_cells().to_vec();
        m.coarsen(&west);
        assert_eq!(m.active_cells(), &before[..]);
        assert!(m.max_level_jump() <= 1);
    }

    #[test]
    fn refine_then_coarsen_round_trip() {
        let mut m = unit(3);
        let before: HashSet<CellId> = m.active_cells().iter().copied().collect();
        m.refine(&[CellId(4)]).unwrap();
        let ch = m.cell(CellId(4)).children.unwrap();
        m.coarsen(&ch);
        let after: HashSet<CellId> = m.active_cells().iter().copied().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn refine_reuses_children_ids() {
        let mut m = unit(1);
        m.refine(&[CellId(0)]).unwrap();
        let ch = m.cell(CellId(0)).children.unwrap();
        m.coarsen(&ch);
        m.refine(&[CellId(0)]).unwrap();
        assert_eq!(m.cell(CellId(0)).children.unwrap(), ch);
        assert_eq!(m.n_cells_total(), 5);
    }

    #[test]
    fn closure_matches_refine() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let ne = m.cell(CellId(0)).children.unwrap()[3];
        let closure = m.refine_closure(ne, &HashSet::new());
        let expected: HashSet<CellId> = [ne, CellId(1), CellId(2)].into_iter().collect();
        assert_eq!(closure.iter().copied().collect::<HashSet<_>>(), expected);
        let before = m.n_active();
        m.refine(&[ne]).unwrap();
        assert_eq!(m.n_active(), before + 3 * closure.len());
    }

    #[test]
    fn locate_points() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let id = m.locate([0.1, 0.1]).unwrap();
        assert_eq!(m.cell(id).level, 1);
        let id = m.locate([0.9, 0.9]).unwrap();
        assert_eq!(id, CellId(3));
        assert!(m.locate([1.5, 0.0]).is_none());
    }

    #[test]
    fn faces_normals_point_owner_to_neighbor() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        for f in m.faces() {
            if let Some(n) = f.neighbor_cell() {
                let oc = m.cell(f.owner).bbox.center();
                let nc = m.cell(n).bbox.center();
                let d = [nc[0] - oc[0], nc[1] - oc[1]];
                assert!(d[0] * f.normal[0] + d[1] * f.normal[1] > 0.0);
            }
        }
    }
}
