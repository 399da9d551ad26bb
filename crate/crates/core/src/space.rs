//! State and action spaces on a 1-D line or a 2-D grid.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Line { n: usize },
    Grid { width: usize, height: usize },
}

/// A finite state space. States are indexed `0..size`; on a grid, state
/// `row * width + col`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    geometry: Geometry,
}

impl StateSpace {
    pub fn new(geometry: Geometry) -> Result<Self> {
        let ok = match geometry {
            Geometry::Line { n } => n >= 1,
            Geometry::Grid { width, height } => width >= 1 && height >= 1,
        };
        if !ok {
            return Err(MfgError::InvalidConfig(format!(
                "state space must be nonempty: {geometry:?}"
            )));
        }
        Ok(Self { geometry })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(Geometry::Line { n })
    }

    pub fn grid(width: usize, height: usize) -> Result<Self> {
        Self::new(Geometry::Grid { width, height })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn size(&self) -> usize {
        match self.geometry {
            Geometry::Line { n } => n,
            Geometry::Grid { width, height } => width * height,
        }
    }

    /// `(width, height)`; a line is a `n x 1` grid.
    pub fn extent(&self) -> (usize, usize) {
        match self.geometry {
            Geometry::Line { n } => (n, 1),
            Geometry::Grid { width, height } => (width, height),
        }
    }

    pub fn coords(&self, x: usize) -> (usize, usize) {
        let (w, _) = self.extent();
        (x % w, x / w)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        let (w, _) = self.extent();
        row * w + col
    }

    /// Moves `x` by `(dx, dy)`, staying in place when the move would leave
    /// the domain.
    pub fn shift_clamped(&self, x: usize, mv: Move) -> usize {
        let (w, h) = self.extent();
        let (c, r) = self.coords(x);
        let nc = c as i64 + mv.dx as i64;
        let nr = r as i64 + mv.dy as i64;
        if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
            x
        } else {
            self.index(nc as usize, nr as usize)
        }
    }

    /// Lattice L1 distance in cell units.
    pub fn l1(&self, x: usize, y: usize) -> usize {
        let (cx, rx) = self.coords(x);
        let (cy, ry) = self.coords(y);
        cx.abs_diff(cy) + rx.abs_diff(ry)
    }

    /// Largest L1 distance between two states.
    pub fn diameter(&self) -> usize {
        let (w, h) = self.extent();
        (w - 1) + (h - 1)
    }

    /// Lattice neighbours (4-connectivity).
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        [Move::UP, Move::DOWN, Move::LEFT, Move::RIGHT]
            .into_iter()
            .map(move |m| self.shift_clamped(x, m))
            .filter(move |&y| y != x)
    }
}

/// A displacement on the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub dx: i32,
    pub dy: i32,
}

impl Move {
    pub const STAY: Move = Move { dx: 0, dy: 0 };
    pub const UP: Move = Move { dx: 0, dy: -1 };
    pub const DOWN: Move = Move { dx: 0, dy: 1 };
    pub const LEFT: Move = Move { dx: -1, dy: 0 };
    pub const RIGHT: Move = Move { dx: 1, dy: 0 };

    pub fn l1(&self) -> u32 {
        self.dx.unsigned_abs() + self.dy.unsigned_abs()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    moves: Vec<Move>,
}

impl ActionSpace {
    pub fn new(moves: Vec<Move>) -> Result<Self> {
        if moves.is_empty() {
            return Err(MfgError::InvalidConfig("action space is empty".into()));
        }
        for (i, m) in moves.iter().enumerate() {
            if moves[..i].contains(m) {
                return Err(MfgError::InvalidConfig(format!("duplicate action {m:?}")));
            }
        }
        Ok(Self { moves })
    }

    /// `{-1, 0, +1}` in that order.
    pub fn line() -> Self {
        Self {
            moves: vec![Move::LEFT, Move::STAY, Move::RIGHT],
        }
    }

    /// `{stay, up, down, left, right}`.
    pub fn grid_with_stay() -> Self {
        Self {
            moves: vec![Move::STAY, Move::UP, Move::DOWN, Move::LEFT, Move::RIGHT],
        }
    }

    /// `{up, down, left, right}`.
    pub fn grid_four() -> Self {
        Self {
            moves: vec![Move::UP, Move::DOWN, Move::LEFT, Move::RIGHT],
        }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn get(&self, a: usize) -> Move {
        self.moves[a]
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn position(&self, mv: Move) -> Option<usize> {
        self.moves.iter().position(|m| *m == mv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_round_trips() {
        let s = StateSpace::grid(4, 3).unwrap();
        assert_eq!(s.size(), 12);
        for x in 0..12 {
            let (c, r) = s.coords(x);
            assert_eq!(s.index(c, r), x);
        }
        assert_eq!(s.diameter(), 5);
    }

    #[test]
    fn walls_clamp() {
        let s = StateSpace::line(4).unwrap();
        assert_eq!(s.shift_clamped(3, Move::RIGHT), 3);
        assert_eq!(s.shift_clamped(0, Move::LEFT), 0);
        assert_eq!(s.shift_clamped(1, Move::RIGHT), 2);
        let g = StateSpace::grid(3, 3).unwrap();
        assert_eq!(g.shift_clamped(0, Move::UP), 0);
        assert_eq!(g.shift_clamped(0, Move::DOWN), 3);
        assert_eq!(g.neighbors(4).count(), 4);
        assert_eq!(g.neighbors(0).count(), 2);
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(StateSpace::line(0).is_err());
        assert!(ActionSpace::new(vec![]).is_err());
        assert!(ActionSpace::new(vec![Move::STAY, Move::STAY]).is_err());
    }
}
