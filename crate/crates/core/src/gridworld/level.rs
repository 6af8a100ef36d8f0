use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffkit::SeededRng;
use crate::{Error, Result};

/// Grid cell; `x` is the column, `y` the row (row 0 at the top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl From<[usize; 2]> for Pos {
    fn from([x, y]: [usize; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Pos> for [usize; 2] {
    fn from(p: Pos) -> Self {
        [p.x, p.y]
    }
}

/// Static layout of one DoorKey level.
///
/// JSON form: `{"size": 9, "walls": [[x, y], ...], "agent_start": [x, y],
/// "key_pos": [x, y], "door_pos": [x, y], "goal_pos": [x, y], "seed": 0}`.
/// Walls are listed in `(y, x)` order; loading validates every invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LevelFile", into = "LevelFile")]
pub struct GridLevel {
    size: usize,
    wall_mask: Vec<bool>,
    pub agent_start: Pos,
    pub key_pos: Pos,
    pub door_pos: Pos,
    pub goal_pos: Pos,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelFile {
    size: usize,
    walls: Vec<Pos>,
    agent_start: Pos,
    key_pos: Pos,
    door_pos: Pos,
    goal_pos: Pos,
    seed: u64,
}

impl TryFrom<LevelFile> for GridLevel {
    type Error = Error;

    fn try_from(f: LevelFile) -> Result<Self> {
        GridLevel::new(f.size, &f.walls, f.agent_start, f.key_pos, f.door_pos, f.goal_pos, f.seed)
    }
}

impl From<GridLevel> for LevelFile {
    fn from(l: GridLevel) -> Self {
        LevelFile {
            size: l.size,
            walls: l.walls(),
            agent_start: l.agent_start,
            key_pos: l.key_pos,
            door_pos: l.door_pos,
            goal_pos: l.goal_pos,
            seed: l.seed,
        }
    }
}

impl GridLevel {
    /// Validated constructor: special cells distinct, in bounds and off walls.
    pub fn new(
        size: usize,
        walls: &[Pos],
        agent_start: Pos,
        key_pos: Pos,
        door_pos: Pos,
        goal_pos: Pos,
        seed: u64,
    ) -> Result<Self> {
        if size < 5 {
            return Err(Error::InvalidArgument(format!("grid size must be >= 5, got {size}")));
        }
        let mut wall_mask = vec![false; size * size];
        for w in walls {
            if w.x >= size || w.y >= size {
                return Err(Error::InvalidArgument(format!("wall {w:?} out of bounds")));
            }
            wall_mask[w.y * size + w.x] = true;
        }
        let specials = [agent_start, key_pos, door_pos, goal_pos];
        for (i, p) in specials.iter().enumerate() {
            if p.x >= size || p.y >= size {
                return Err(Error::InvalidArgument(format!("special cell {p:?} out of bounds")));
            }
            if wall_mask[p.y * size + p.x] {
                return Err(Error::InvalidArgument(format!("special cell {p:?} is a wall")));
            }
            if specials[..i].contains(p) {
                return Err(Error::InvalidArgument(format!("special cell {p:?} used twice")));
            }
        }
        Ok(Self {
            size,
            wall_mask,
            agent_start,
            key_pos,
            door_pos,
            goal_pos,
            seed,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        p.x >= self.size || p.y >= self.size || self.wall_mask[p.y * self.size + p.x]
    }

    pub fn walls(&self) -> Vec<Pos> {
        (0..self.size * self.size)
            .filter(|&i| self.wall_mask[i])
            .map(|i| Pos::new(i % self.size, i / self.size))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Generates a solvable DoorKey level.
///
/// Border walls enclose the grid; a full-height wall at a random column in
/// `[2, size - 3]` holds the door at a random interior row. The goal sits in
/// the bottom-right interior corner, and the agent and key are placed on
/// distinct random cells of the left room.
pub fn generate_level(seed: u64, size: usize) -> Result<GridLevel> {
    if size < 5 {
        return Err(Error::InvalidArgument(format!("grid size must be >= 5, got {size}")));
    }
    let mut rng = SeededRng::new(seed);
    let split = 2 + rng.below(size - 4);
    let door_y = 1 + rng.below(size - 2);

    let mut walls = Vec::new();
    for y in 0..size {
        for x in 0..size {
            let border = x == 0 || y == 0 || x == size - 1 || y == size - 1;
            if border || (x == split && y != door_y) {
                walls.push(Pos::new(x, y));
            }
        }
    }

    let left_cells: Vec<Pos> = (1..size - 1)
        .flat_map(|y| (1..split).map(move |x| Pos::new(x, y)))
        .collect();
    let agent_start = left_cells[rng.below(left_cells.len())];
    let key_pos = loop {
        let p = left_cells[rng.below(left_cells.len())];
        if p != agent_start {
            break p;
        }
    };

    GridLevel::new(
        size,
        &walls,
        agent_start,
        key_pos,
        Pos::new(split, door_y),
        Pos::new(size - 2, size - 2),
        seed,
    )
}
