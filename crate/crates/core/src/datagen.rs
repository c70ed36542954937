//! Synthetic data: the colored grid-world robot and a generic chain sampler.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::{ChainModel, LabeledSequence, ObservationAlphabet, StateSpace, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    Blue,
    Green,
    Yellow,
    Red,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Blue, Color::Green, Color::Yellow, Color::Red];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Red => "red",
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'b' => Some(Color::Blue),
            'g' => Some(Color::Green),
            'y' => Some(Color::Yellow),
            'r' => Some(Color::Red),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Color::Blue => 'b',
            Color::Green => 'g',
            Color::Yellow => 'y',
            Color::Red => 'r',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Obstacle,
    Free(Color),
}

/// A rectangular grid of colored free cells and obstacles.
///
/// Free cells are the states of the robot model, numbered in row-major
/// order and labeled `"x:y"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    free: Vec<(usize, usize)>,
    state_of: Vec<Option<usize>>,
}

const DEFAULT_MAP: &str = include_str!("../worlds/default.map");

const MOVES: [(isize, isize); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

impl GridWorld {
    /// Parses a map with one character per cell: `b`, `g`, `y`, `r` for
    /// colored free cells and `#` for obstacles, one row per line.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if rows.is_empty() {
            return invalid("world map is empty");
        }
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return invalid(format!(
                    "map row {y} has {} cells, expected {width}",
                    row.chars().count()
                ));
            }
            for (x, ch) in row.chars().enumerate() {
                cells.push(match ch {
                    '#' => Cell::Obstacle,
                    c => {
                        Cell::Free(Color::from_char(c).ok_or_else(|| {
                            crate::Error::InvalidArgument(format!("unknown map cell {c:?} at {x}:{y}"))
                        })?)
                    }
                });
            }
        }
        Self::from_cells(width, rows.len(), cells)
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return invalid("world dimensions do not match the cell table");
        }
        let mut free = Vec::new();
        let mut state_of = vec![None; cells.len()];
        for y in 0..height {
            for x in 0..width {
                if let Cell::Free(_) = cells[y * width + x] {
                    state_of[y * width + x] = Some(free.len());
                    free.push((x, y));
                }
            }
        }
        if free.is_empty() {
            return invalid("world has no free cell");
        }
        Ok(Self {
            width,
            height,
            cells,
            free,
            state_of,
        })
    }

    /// The shipped default world.
    pub fn default_world() -> Self {
        Self::parse(DEFAULT_MAP).expect("default map is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    /// Free cells in state-index order.
    pub fn free_cells(&self) -> &[(usize, usize)] {
        &self.free
    }

    pub fn state_index(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.state_of[y * self.width + x]
    }

    pub fn color_of_state(&self, s: usize) -> Color {
        let (x, y) = self.free[s];
        match self.cell(x, y) {
            Cell::Free(c) => c,
            Cell::Obstacle => unreachable!("free list only holds free cells"),
        }
    }

    pub fn state_space(&self) -> StateSpace {
        Vocabulary::new(self.free.iter().map(|(x, y)| format!("{x}:{y}"))).expect("cells are distinct")
    }

    pub fn alphabet() -> ObservationAlphabet {
        Vocabulary::new(Color::ALL.iter().map(|c| c.name())).expect("colors are distinct")
    }

    fn step(&self, (x, y): (usize, usize), (dx, dy): (isize, isize)) -> Option<(usize, usize)> {
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        self.state_index(nx, ny).map(|_| (nx, ny))
    }

    /// Free 4-neighbors of a cell.
    pub fn neighbors(&self, pos: (usize, usize)) -> Vec<(usize, usize)> {
        MOVES.iter().filter_map(|&d| self.step(pos, d)).collect()
    }
}

impl fmt::Display for GridWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                let ch = match self.cell(x, y) {
                    Cell::Obstacle => '#',
                    Cell::Free(c) => c.to_char(),
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// What a move into an obstacle or off the grid does.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OnBlock {
    /// The attempt consumes the step; the robot stays put.
    #[default]
    Stay,
    /// The robot redraws a direction within the same step until one is free.
    Retry,
}

/// Robot motion and sensor parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotConfig {
    /// Probability in percent that the sensor reads the true color.
    pub accuracy: f64,
    /// Probability that the robot attempts a move at a given step.
    pub move_prob: f64,
    pub on_block: OnBlock,
}

/// Chosen so that the default world yields compressed lengths of about
/// 5 to 15 over 100 to 300 steps.
pub const DEFAULT_MOVE_PROB: f64 = 0.1;

impl RobotConfig {
    pub fn with_accuracy(accuracy: f64) -> Self {
        Self {
            accuracy,
            move_prob: DEFAULT_MOVE_PROB,
            on_block: OnBlock::Stay,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.accuracy) {
            return invalid(format!("accuracy {} outside [0, 100]", self.accuracy));
        }
        if !(0.0..=1.0).contains(&self.move_prob) {
            return invalid(format!("move probability {} outside [0, 1]", self.move_prob));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotTrace {
    pub positions: Vec<(usize, usize)>,
    pub colors: Vec<Color>,
    pub accuracy: f64,
}

impl RobotTrace {
    pub fn to_sequence(&self, world: &GridWorld) -> LabeledSequence {
        let states = self
            .positions
            .iter()
            .map(|&(x, y)| world.state_index(x, y).expect("trace stays on free cells"))
            .collect();
        let obs = self.colors.iter().map(|c| c.index()).collect();
        LabeledSequence {
            obs,
            states: Some(states),
        }
    }
}

/// Simulates `length` steps with the default motion parameters.
pub fn simulate_robot(world: &GridWorld, length: usize, accuracy: f64, seed: u64) -> Result<RobotTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_robot_with(world, length, &RobotConfig::with_accuracy(accuracy), &mut rng)
}

pub fn simulate_robot_with<R: Rng>(
    world: &GridWorld,
    length: usize,
    config: &RobotConfig,
    rng: &mut R,
) -> Result<RobotTrace> {
    if length == 0 {
        return invalid("trace length must be at least 1");
    }
    config.validate()?;
    let free = world.free_cells();
    let mut pos = free[rng.gen_range(0..free.len())];
    let mut positions = Vec::with_capacity(length);
    let mut colors = Vec::with_capacity(length);
    let hit = config.accuracy / 100.0;
    for t in 0..length {
        if t > 0 && rng.gen::<f64>() < config.move_prob {
            pos = match config.on_block {
                OnBlock::Stay => world.step(pos, MOVES[rng.gen_range(0..4)]).unwrap_or(pos),
                OnBlock::Retry if world.neighbors(pos).is_empty() => pos,
                OnBlock::Retry => loop {
                    if let Some(next) = world.step(pos, MOVES[rng.gen_range(0..4)]) {
                        break next;
                    }
                },
            };
        }
        let truth = world.color_of_state(world.state_index(pos.0, pos.1).expect("free"));
        let seen = if rng.gen::<f64>() < hit {
            truth
        } else {
            let others: Vec<Color> = Color::ALL.into_iter().filter(|&c| c != truth).collect();
            others[rng.gen_range(0..others.len())]
        };
        positions.push(pos);
        colors.push(seen);
    }
    Ok(RobotTrace {
        positions,
        colors,
        accuracy: config.accuracy,
    })
}

/// Stream for sequence `index` of a dataset drawn with `seed`.
pub fn sequence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n` robot traces with lengths uniform in `lo..=hi`. Sequence `k` uses
/// its own stream derived from `(seed, k)`.
pub fn robot_dataset(
    world: &GridWorld,
    n: usize,
    (lo, hi): (usize, usize),
    config: &RobotConfig,
    seed: u64,
) -> Result<Vec<LabeledSequence>> {
    if lo == 0 || lo > hi {
        return invalid(format!("invalid length range {lo}..={hi}"));
    }
    config.validate()?;
    (0..n)
        .map(|k| {
            let mut rng = sequence_rng(seed, k as u64);
            let len = rng.gen_range(lo..=hi);
            simulate_robot_with(world, len, config, &mut rng).map(|tr| tr.to_sequence(world))
        })
        .collect()
}

fn stochastic_rows(name: &str, table: &[f64], width: usize) -> Result<Vec<WeightedIndex<f64>>> {
    table
        .chunks(width)
        .enumerate()
        .map(|(r, row)| {
            let probs: Vec<f64> = row.iter().map(|w| w.exp()).collect();
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return invalid(format!("{name} row {r} sums to {sum}, not 1"));
            }
            WeightedIndex::new(&probs).map_err(|e| crate::Error::InvalidArgument(format!("{name} row {r}: {e}")))
        })
        .collect()
}

/// Ancestral sample from a model whose exponentiated rows are distributions.
pub fn sample_chain(model: &ChainModel, length: usize, seed: u64) -> Result<LabeledSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChainSampler::new(model)?.sample(length, &mut rng)
}

/// Validated sampling tables for repeated draws from one model.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    init: WeightedIndex<f64>,
    trans: Vec<WeightedIndex<f64>>,
    emit: Vec<WeightedIndex<f64>>,
}

impl ChainSampler {
    pub fn new(model: &ChainModel) -> Result<Self> {
        let m = model.num_states();
        Ok(Self {
            init: stochastic_rows("init", model.init_table(), m)?.remove(0),
            trans: stochastic_rows("trans", model.trans_table(), m)?,
            emit: stochastic_rows("emit", model.emit_table(), model.num_symbols())?,
        })
    }

    pub fn sample<R: Rng>(&self, length: usize, rng: &mut R) -> Result<LabeledSequence> {
        if length == 0 {
            return invalid("sample length must be at least 1");
        }
        let mut states = Vec::with_capacity(length);
        let mut obs = Vec::with_capacity(length);
        let mut y = self.init.sample(rng);
        for t in 0..length {
            if t > 0 {
                y = self.trans[y].sample(rng);
            }
            states.push(y);
            obs.push(self.emit[y].sample(rng));
        }
        Ok(LabeledSequence {
            obs,
            states: Some(states),
        })
    }
}
