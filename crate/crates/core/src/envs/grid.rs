//! Slippery grid worlds: FrozenLake and a passenger-collecting Taxi.
//!
//! Layouts are plain text, one character per cell:
//!
//! | char | cell |
//! |------|------|
//! | `S` | start |
//! | `G` | goal / target |
//! | `H` | hole (terminal, reward 0) |
//! | `W` | wall (blocks movement) |
//! | `P` | passenger (collected on entry) |
//! | `.` or `F` | open ice / road |

use std::fmt;
use std::path::Path;

use rand::Rng;

use super::{GenerativeModel, Outcome, Transition};
use crate::error::{Error, Result};

const FROZENLAKE_4X4: &str = include_str!("../../layouts/frozenlake4.txt");
const FROZENLAKE_8X8: &str = include_str!("../../layouts/frozenlake8.txt");
const TAXI: &str = include_str!("../../layouts/taxi.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Start,
    Goal,
    Hole,
    Wall,
    Passenger,
    Open,
}

impl Cell {
    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'S' => Cell::Start,
            'G' => Cell::Goal,
            'H' => Cell::Hole,
            'W' => Cell::Wall,
            'P' => Cell::Passenger,
            '.' | 'F' => Cell::Open,
            _ => return None,
        })
    }

    fn to_char(self) -> char {
        match self {
            Cell::Start => 'S',
            Cell::Goal => 'G',
            Cell::Hole => 'H',
            Cell::Wall => 'W',
            Cell::Passenger => 'P',
            Cell::Open => '.',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

impl Layout {
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if height == 0 || width == 0 {
            return Err(Error::Config("empty grid layout".into()));
        }
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Config(format!(
                    "layout row {y} is not {width} cells wide"
                )));
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = Cell::from_char(ch).ok_or_else(|| {
                    Error::Config(format!("unknown layout cell {ch:?} at ({x}, {y})"))
                })?;
                cells.push(cell);
            }
        }
        let count = |kind| cells.iter().filter(|&&c| c == kind).count();
        if count(Cell::Start) != 1 {
            return Err(Error::Config("layout needs exactly one start cell".into()));
        }
        if count(Cell::Goal) == 0 {
            return Err(Error::Config("layout needs a goal cell".into()));
        }
        if count(Cell::Passenger) > 8 {
            return Err(Error::Config(
                "at most 8 passenger cells are supported".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, index: usize) -> Cell {
        self.cells[index]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.width) {
            let line: String = row.iter().map(|c| c.to_char()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Absolute move directions, in the order used as action indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Down,
    Right,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Down,
        Direction::Right,
        Direction::Up,
    ];

    fn turned(self, rel: RelativeMove) -> Self {
        let i = self as usize;
        // indices run counter-clockwise: left, down, right, up
        Self::ALL[match rel {
            RelativeMove::Forward => i,
            RelativeMove::TurnLeft => (i + 1) % 4,
            RelativeMove::Back => (i + 2) % 4,
            RelativeMove::TurnRight => (i + 3) % 4,
        }]
    }
}

/// Move actually taken, relative to the intended direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativeMove {
    Forward,
    TurnLeft,
    TurnRight,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalReward {
    /// Reaching the goal pays 1.
    Unit,
    /// Reaching the goal pays the number of passengers collected.
    PassengerCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEnvSpec {
    pub name: String,
    pub layout: Layout,
    pub slip: Vec<(RelativeMove, f64)>,
    pub discount: f64,
    pub step_cap: usize,
    pub goal_reward: GoalReward,
}

impl GridEnvSpec {
    /// Standard FrozenLake: 1/3 intended, 1/3 each perpendicular.
    pub fn frozenlake(layout: Layout, name: &str) -> Self {
        let third = 1.0 / 3.0;
        Self {
            name: name.to_string(),
            layout,
            slip: vec![
                (RelativeMove::Forward, third),
                (RelativeMove::TurnLeft, third),
                (RelativeMove::TurnRight, third),
            ],
            discount: 0.99,
            step_cap: 200,
            goal_reward: GoalReward::Unit,
        }
    }

    /// Taxi: 1/2 intended, the rest split over the other three directions.
    pub fn taxi(layout: Layout) -> Self {
        let sixth = 1.0 / 6.0;
        Self {
            name: "taxi".to_string(),
            layout,
            slip: vec![
                (RelativeMove::Forward, 0.5),
                (RelativeMove::TurnLeft, sixth),
                (RelativeMove::TurnRight, sixth),
                (RelativeMove::Back, sixth),
            ],
            discount: 0.99,
            step_cap: 500,
            goal_reward: GoalReward::PassengerCount,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridState {
    pub cell: u16,
    /// Bit `i` is set once passenger `i` has been picked up.
    pub collected: u8,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridEnvSpec,
    start: u16,
    /// Passenger bit for each cell, if the cell holds a passenger.
    passenger_bit: Vec<Option<u8>>,
}

impl GridWorld {
    pub fn new(spec: GridEnvSpec) -> Result<Self> {
        let total: f64 = spec.slip.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 || spec.slip.iter().any(|(_, p)| *p < 0.0) {
            return Err(Error::Config(format!(
                "slip probabilities sum to {total}, not 1"
            )));
        }
        if !(0.0..1.0).contains(&spec.discount) {
            return Err(Error::Config(format!(
                "discount must lie in [0, 1), got {}",
                spec.discount
            )));
        }
        let layout = &spec.layout;
        if layout.len() > u16::MAX as usize {
            return Err(Error::Config("layout too large".into()));
        }
        let start = (0..layout.len())
            .find(|&i| layout.cell(i) == Cell::Start)
            .expect("validated by Layout::parse") as u16;
        let mut next_bit = 0u8;
        let passenger_bit = (0..layout.len())
            .map(|i| {
                (layout.cell(i) == Cell::Passenger).then(|| {
                    next_bit += 1;
                    next_bit - 1
                })
            })
            .collect();
        Ok(Self {
            spec,
            start,
            passenger_bit,
        })
    }

    /// Canonical 4x4 or 8x8 FrozenLake map.
    pub fn frozenlake(size: usize) -> Result<Self> {
        let (text, name) = match size {
            4 => (FROZENLAKE_4X4, "frozenlake4"),
            8 => (FROZENLAKE_8X8, "frozenlake8"),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "no standard {other}x{other} FrozenLake map"
                )))
            }
        };
        Self::new(GridEnvSpec::frozenlake(Layout::parse(text)?, name))
    }

    /// The repo's canonical 7x6 Taxi map with three passengers.
    pub fn taxi() -> Result<Self> {
        Self::new(GridEnvSpec::taxi(Layout::parse(TAXI)?))
    }

    pub fn spec(&self) -> &GridEnvSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.spec.layout
    }

    pub fn passenger_count(&self) -> usize {
        self.passenger_bit.iter().flatten().count()
    }

    fn step_to(&self, cell: u16, dir: Direction) -> u16 {
        let w = self.layout().width() as i64;
        let h = self.layout().height() as i64;
        let (x, y) = (cell as i64 % w, cell as i64 / w);
        let (nx, ny) = match dir {
            Direction::Left => (x - 1, y),
            Direction::Down => (x, y + 1),
            Direction::Right => (x + 1, y),
            Direction::Up => (x, y - 1),
        };
        if nx < 0 || ny < 0 || nx >= w || ny >= h {
            return cell;
        }
        let next = (ny * w + nx) as u16;
        if self.layout().cell(next as usize) == Cell::Wall {
            cell
        } else {
            next
        }
    }

    fn arrive(&self, state: &GridState, cell: u16) -> Transition<GridState> {
        let mut collected = state.collected;
        if let Some(bit) = self.passenger_bit[cell as usize] {
            collected |= 1 << bit;
        }
        let next = GridState { cell, collected };
        match self.layout().cell(cell as usize) {
            Cell::Goal => {
                let reward = match self.spec.goal_reward {
                    GoalReward::Unit => 1.0,
                    GoalReward::PassengerCount => collected.count_ones() as f64,
                };
                Transition {
                    next,
                    reward,
                    terminal: true,
                }
            }
            Cell::Hole => Transition {
                next,
                reward: 0.0,
                terminal: true,
            },
            _ => Transition {
                next,
                reward: 0.0,
                terminal: false,
            },
        }
    }
}

impl GenerativeModel for GridWorld {
    type State = GridState;

    fn name(&self) -> String {
        self.spec.name.clone()
    }

    fn initial_state(&self) -> GridState {
        GridState {
            cell: self.start,
            collected: 0,
        }
    }

    fn action_count(&self, state: &GridState) -> usize {
        if self.is_terminal(state) {
            0
        } else {
            4
        }
    }

    fn is_terminal(&self, state: &GridState) -> bool {
        matches!(
            self.layout().cell(state.cell as usize),
            Cell::Goal | Cell::Hole
        )
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        state: &GridState,
        action: usize,
        rng: &mut R,
    ) -> Transition<GridState> {
        let intended = Direction::ALL[action];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut rel = self.spec.slip.last().expect("non-empty slip model").0;
        for &(m, p) in &self.spec.slip {
            acc += p;
            if u < acc {
                rel = m;
                break;
            }
        }
        let cell = self.step_to(state.cell, intended.turned(rel));
        self.arrive(state, cell)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let hi = match self.spec.goal_reward {
            GoalReward::Unit => 1.0,
            GoalReward::PassengerCount => self.passenger_count() as f64,
        };
        (0.0, hi)
    }

    fn discount(&self) -> f64 {
        self.spec.discount
    }

    fn step_cap(&self) -> usize {
        self.spec.step_cap
    }

    fn outcomes(&self, state: &GridState, action: usize) -> Option<Vec<Outcome<GridState>>> {
        let intended = Direction::ALL[action];
        let mut out: Vec<Outcome<GridState>> = Vec::with_capacity(self.spec.slip.len());
        for &(m, p) in &self.spec.slip {
            let t = self.arrive(state, self.step_to(state.cell, intended.turned(m)));
            match out.iter_mut().find(|o| o.next == t.next) {
                Some(o) => o.prob += p,
                None => out.push(Outcome {
                    next: t.next,
                    prob: p,
                    reward: t.reward,
                    terminal: t.terminal,
                }),
            }
        }
        Some(out)
    }
}
