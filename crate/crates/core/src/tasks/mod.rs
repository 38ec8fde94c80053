//! Benchmark tasks: seeded scene builders and goal checkers.

pub mod checkers;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::scene::{Category, EnvKind, Pose, SceneError, SceneObject, Shape, WorldState};

pub use checkers::{CheckerFn, CheckerRegistry, GoalVerdict};

const CATALOG_JSON: &str = include_str!("../../data/tasks.json");

pub const OBSTACLE_COLORS: [&str; 4] = ["blue", "green", "pink", "purple"];
pub const BLOCK_COLORS: [&str; 6] = ["red", "green", "blue", "yellow", "purple", "orange"];

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("could not place `{0}` without overlap after the attempt limit")]
    PlacementFailure(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("checker `{0}` is already registered")]
    DuplicateChecker(String),
    #[error("no checker registered as `{0}`")]
    UnknownChecker(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Which initial-scene generator a task uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Five disc obstacles with random radii.
    Obstacles,
    /// Two bowls and six blocks, nothing stacked.
    BlocksAndBowls,
    /// Five red blocks kept away from the table center.
    RedBlocks,
    /// A green bowl and eight blocks, one stacked on the green block.
    GreenUnder,
    YcbPacking,
    YcbStacking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub env: EnvKind,
    pub scene: SceneKind,
    pub goal: String,
    pub checker: String,
    /// Per-iteration sample budget; defaults to the environment's.
    #[serde(default)]
    pub budget: Option<usize>,
}

impl TaskSpec {
    pub fn budget(&self) -> usize {
        self.budget.unwrap_or_else(|| self.env.default_budget())
    }
}

pub fn catalog() -> Vec<TaskSpec> {
    serde_json::from_str(CATALOG_JSON).expect("bundled tasks.json is valid")
}

pub fn find_task(id: &str) -> Result<TaskSpec, TaskError> {
    catalog()
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| TaskError::UnknownTask(id.to_string()))
}

/// Rejection sampler for non-overlapping table positions. Objects are treated as
/// discs of their bounding radius.
struct Placer<'a> {
    config: &'a Config,
    rng: ChaCha8Rng,
    placed: Vec<([f64; 2], f64)>,
    attempts: usize,
}

impl<'a> Placer<'a> {
    fn new(config: &'a Config, seed: u64) -> Self {
        Placer {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            placed: Vec::new(),
            attempts: 0,
        }
    }

    fn place(&mut self, name: &str, radius: f64, clearance: f64, keepout: f64) -> Result<[f64; 2], TaskError> {
        let b = self.config.constants.table_bounds;
        let c = self.config.constants.table_center;
        let margin = radius + 0.01;
        loop {
            self.attempts += 1;
            if self.attempts > self.config.generation.max_attempts {
                return Err(TaskError::PlacementFailure(name.to_string()));
            }
            let p = [
                self.rng.random_range(b[0][0] + margin..=b[0][1] - margin),
                self.rng.random_range(b[1][0] + margin..=b[1][1] - margin),
            ];
            if keepout > 0.0 && (p[0] - c[0]).hypot(p[1] - c[1]) < keepout {
                continue;
            }
            let clear = self
                .placed
                .iter()
                .all(|(q, r)| (p[0] - q[0]).hypot(p[1] - q[1]) >= radius + r + clearance);
            if clear {
                self.placed.push((p, radius));
                return Ok(p);
            }
        }
    }
}

fn bounding_radius(shape: &Shape) -> f64 {
    match *shape {
        Shape::Circle { radius } | Shape::Cylinder { radius, .. } => radius,
        Shape::Cube { half_extent } => half_extent * std::f64::consts::SQRT_2,
    }
}

fn resting(name: &str, cat: Category, color: &str, xy: [f64; 2], config: &Config) -> Result<SceneObject, TaskError> {
    let shape = config
        .shape(cat)
        .ok_or_else(|| SceneError::InvalidObject {
            name: name.to_string(),
            reason: format!("no shape configured for `{cat}`"),
        })?;
    Ok(SceneObject::new(
        name,
        cat,
        color,
        Pose::from_point(xy[0], xy[1], shape.half_height()),
        shape,
    )?)
}

fn place_all(
    placer: &mut Placer,
    s: &mut WorldState,
    items: &[(String, Category, String)],
    keepout: f64,
) -> Result<(), TaskError> {
    let clearance = placer.config.generation.object_clearance;
    for (name, cat, color) in items {
        let shape = placer.config.shape(*cat).expect("shape table covers all categories");
        let xy = placer.place(name, bounding_radius(&shape), clearance, keepout)?;
        s.insert(resting(name, *cat, color, xy, placer.config)?)?;
    }
    Ok(())
}

fn named(start: usize, items: &[(Category, &str)]) -> Vec<(String, Category, String)> {
    items
        .iter()
        .enumerate()
        .map(|(i, (c, col))| (format!("o{}", start + i), *c, col.to_string()))
        .collect()
}

/// Builds the seeded initial scene for `spec`. Identical seeds give identical scenes.
pub fn make_initial_state(spec: &TaskSpec, seed: u64, config: &Config) -> Result<WorldState, TaskError> {
    let mut placer = Placer::new(config, seed);
    let mut s = WorldState::new();
    let keepout = config.generation.packing_keepout;
    match spec.scene {
        SceneKind::Obstacles => {
            let [rmin, rmax] = config.generation.obstacle_radius_range;
            for i in 0..5 {
                let name = format!("o{}", i + 1);
                let r = placer.rng.random_range(rmin..=rmax);
                let xy = placer.place(&name, r, config.generation.obstacle_clearance, 0.0)?;
                s.insert(SceneObject::new(
                    name,
                    Category::Obstacle,
                    OBSTACLE_COLORS[i % OBSTACLE_COLORS.len()],
                    Pose::from_point(xy[0], xy[1], 0.0),
                    Shape::Circle { radius: r },
                )?)?;
            }
        }
        SceneKind::BlocksAndBowls => {
            let mut items = named(1, &[(Category::Bowl, "green"), (Category::Bowl, "blue")]);
            let blocks: Vec<(Category, &str)> = BLOCK_COLORS.iter().map(|c| (Category::Block, *c)).collect();
            items.extend(named(3, &blocks));
            place_all(&mut placer, &mut s, &items, 0.0)?;
        }
        SceneKind::RedBlocks => {
            let items = named(1, &[(Category::Block, "red"); 5]);
            place_all(&mut placer, &mut s, &items, keepout)?;
        }
        SceneKind::GreenUnder => {
            // the bowl is o8, the green block o7 and the block on top of it o12
            let mut items = vec![
                ("o8".to_string(), Category::Bowl, "green".to_string()),
                ("o7".to_string(), Category::Block, "green".to_string()),
            ];
            let others = ["o5", "o6", "o9", "o10", "o11", "o13"];
            let colors = ["red", "blue", "yellow", "purple", "blue", "red"];
            for (n, c) in others.iter().zip(colors) {
                items.push((n.to_string(), Category::Block, c.to_string()));
            }
            place_all(&mut placer, &mut s, &items, 0.0)?;
            let base = s.objects["o7"].pose;
            let shape = config.shape(Category::Block).expect("block shape");
            s.insert(SceneObject::new(
                "o12",
                Category::Block,
                "orange",
                base.translated(0.0, 0.0, 2.0 * shape.half_height()),
                shape,
            )?)?;
        }
        SceneKind::YcbPacking => {
            let items = named(
                1,
                &[(Category::Banana, "yellow"), (Category::Strawberry, "red"), (Category::MeatCan, "blue")],
            );
            place_all(&mut placer, &mut s, &items, keepout)?;
        }
        SceneKind::YcbStacking => {
            let items = named(
                1,
                &[
                    (Category::Banana, "yellow"),
                    (Category::PowerDrill, "red"),
                    (Category::MeatCan, "blue"),
                    (Category::Strawberry, "red"),
                    (Category::Apple, "red"),
                    (Category::Pear, "green"),
                ],
            );
            place_all(&mut placer, &mut s, &items, 0.0)?;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{reachable, rests_on, settle};

    #[test]
    fn catalog_has_nine_tasks_with_env_budgets() {
        let c = catalog();
        assert_eq!(c.len(), 9);
        for t in &c {
            let want = if t.env == EnvKind::Drawing { 10_000 } else { 1_000 };
            assert_eq!(t.budget(), want, "{}", t.id);
        }
        assert!(find_task("letters").is_err());
    }

    #[test]
    fn drawing_scene_has_five_separated_obstacles() {
        let cfg = Config::default();
        let s = make_initial_state(&find_task("star").unwrap(), 0, &cfg).unwrap();
        let obs: Vec<_> = s.objects.values().collect();
        assert_eq!(obs.len(), 5);
        for (i, a) in obs.iter().enumerate() {
            let Shape::Circle { radius: ra } = a.shape else { panic!("not a circle") };
            assert!((0.01..=0.05).contains(&ra));
            for b in &obs[i + 1..] {
                let Shape::Circle { radius: rb } = b.shape else { panic!("not a circle") };
                let d = (a.pose.x - b.pose.x).hypot(a.pose.y - b.pose.y);
                assert!(d >= ra + rb + 0.01);
            }
        }
    }

    #[test]
    fn green_block_is_covered() {
        let cfg = Config::default();
        for seed in 0..5 {
            let s = make_initial_state(&find_task("unstack").unwrap(), seed, &cfg).unwrap();
            assert_eq!(s.objects.len(), 9);
            assert!(rests_on(&s.objects["o12"], &s.objects["o7"], &cfg));
        }
    }

    #[test]
    fn scenes_are_settled_and_reachable() {
        let cfg = Config::default();
        for t in catalog() {
            for seed in 0..3 {
                let s = make_initial_state(&t, seed, &cfg).unwrap();
                assert_eq!(settle(&s, &cfg).1, 0.0, "{} seed {seed}", t.id);
                for o in s.objects.values() {
                    assert!(reachable(&cfg, o.pose.point()), "{} {}", t.id, o.name);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = Config::default();
        let t = find_task("pyramid").unwrap();
        assert_eq!(make_initial_state(&t, 7, &cfg).unwrap(), make_initial_state(&t, 7, &cfg).unwrap());
        assert_ne!(make_initial_state(&t, 7, &cfg).unwrap(), make_initial_state(&t, 8, &cfg).unwrap());
    }

    #[test]
    fn impossible_layout_fails() {
        let mut cfg = Config::default();
        cfg.generation.obstacle_clearance = 1.0;
        let err = make_initial_state(&find_task("star").unwrap(), 0, &cfg).unwrap_err();
        assert!(matches!(err, TaskError::PlacementFailure(_)));
    }
}
