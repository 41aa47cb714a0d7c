use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmdp::{text::read_cmdp, Cmdp};
use crate::error::{Error, Result};
use crate::lp::value_iteration_optimum;

/// The 5×5 hazard gridworld: the direct route from `S` to `G` crosses a
/// strip of hazards.
pub const HAZARD_LAYOUT: [&str; 5] = [".....", ".....", "SHHHG", ".....", "....."];
/// Three rows where the short route passes a hazard column and the detour
/// goes around it.
pub const DETOUR_LAYOUT: [&str; 3] = ["S.H.G", "..H..", "....."];

/// Desk-scale environment description.
///
/// Gridworld layouts use `S` (start), `G` (absorbing goal, reward 1 per
/// step), `H` (hazard, cost 1 per step), `.` (free) and `#` (wall). The four
/// actions are up, right, down, left; with probability `slip` the move goes
/// in a uniformly random direction, and moves into walls or off the grid
/// leave the agent in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    GridworldHazard {
        layout: Vec<String>,
        #[serde(default = "default_slip")]
        slip: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        threshold: f64,
    },
    /// States `0..length` on a line. Action 0 advances with probability
    /// `advance_prob` at no cost, action 1 advances surely at cost 1. The last
    /// state is absorbing with reward 1.
    Chain {
        length: usize,
        #[serde(default = "default_advance")]
        advance_prob: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        threshold: f64,
    },
    /// Uniform random tables from a seed. Each threshold sits at
    /// `threshold_fraction` between the smallest and largest achievable cost.
    RandomCmdp {
        n_states: usize,
        n_actions: usize,
        #[serde(default = "default_constraints")]
        n_constraints: usize,
        seed: u64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_fraction")]
        threshold_fraction: f64,
    },
    /// A CMDP in the plain-text matrix format.
    File { path: PathBuf },
}

fn default_slip() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    0.9
}
fn default_advance() -> f64 {
    0.5
}
fn default_constraints() -> usize {
    1
}
fn default_fraction() -> f64 {
    0.5
}

/// Names accepted by [`builtin`].
pub const BUILTIN_ENVS: [&str; 4] = ["gridworld", "detour", "chain", "random"];

/// Built-in environments.
pub fn builtin(name: &str) -> Result<EnvSpec> {
    let layout = |rows: &[&str]| rows.iter().map(|r| r.to_string()).collect();
    match name {
        "gridworld" => Ok(EnvSpec::GridworldHazard {
            layout: layout(&HAZARD_LAYOUT),
            slip: 0.1,
            gamma: 0.9,
            threshold: 0.15,
        }),
        "detour" => Ok(EnvSpec::GridworldHazard {
            layout: layout(&DETOUR_LAYOUT),
            slip: 0.1,
            gamma: 0.9,
            threshold: 0.03,
        }),
        "chain" => Ok(EnvSpec::Chain {
            length: 6,
            advance_prob: 0.5,
            gamma: 0.9,
            threshold: 0.1,
        }),
        "random" => Ok(EnvSpec::RandomCmdp {
            n_states: 6,
            n_actions: 3,
            n_constraints: 1,
            seed: 0,
            gamma: 0.9,
            threshold_fraction: 0.5,
        }),
        other => Err(Error::Config(format!(
            "unknown environment '{other}' (built-ins: {})",
            BUILTIN_ENVS.join(", ")
        ))),
    }
}

impl EnvSpec {
    /// Parses `name` or `name:key=value,key=value` over a built-in, or a path
    /// to a CMDP file. Layout rows in overrides are separated by `/`.
    pub fn parse(text: &str) -> Result<EnvSpec> {
        let (name, overrides) = match text.split_once(':') {
            Some((n, o)) => (n, o),
            None => (text, ""),
        };
        if !BUILTIN_ENVS.contains(&name) {
            if Path::new(text).exists() {
                return Ok(EnvSpec::File { path: text.into() });
            }
            return Err(Error::Config(format!(
                "'{text}' is neither a built-in environment nor an existing file"
            )));
        }
        let mut spec = builtin(name)?;
        for item in overrides.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{item}'")))?;
            spec.set(key.trim(), value.trim())?;
        }
        Ok(spec)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
        }
        match (self, key) {
            (EnvSpec::GridworldHazard { layout, .. }, "layout") => {
                *layout = value.split('/').map(str::to_string).collect()
            }
            (EnvSpec::GridworldHazard { slip, .. }, "slip") => *slip = num(key, value)?,
            (EnvSpec::Chain { length, .. }, "length") => *length = num(key, value)?,
            (EnvSpec::Chain { advance_prob, .. }, "advance_prob") => {
                *advance_prob = num(key, value)?
            }
            (EnvSpec::RandomCmdp { n_states, .. }, "n_states") => *n_states = num(key, value)?,
            (EnvSpec::RandomCmdp { n_actions, .. }, "n_actions") => *n_actions = num(key, value)?,
            (EnvSpec::RandomCmdp { n_constraints, .. }, "n_constraints") => {
                *n_constraints = num(key, value)?
            }
            (EnvSpec::RandomCmdp { seed, .. }, "seed") => *seed = num(key, value)?,
            (EnvSpec::RandomCmdp { threshold_fraction, .. }, "threshold_fraction") => {
                *threshold_fraction = num(key, value)?
            }
            (
                EnvSpec::GridworldHazard { gamma, .. }
                | EnvSpec::Chain { gamma, .. }
                | EnvSpec::RandomCmdp { gamma, .. },
                "gamma",
            ) => *gamma = num(key, value)?,
            (
                EnvSpec::GridworldHazard { threshold, .. } | EnvSpec::Chain { threshold, .. },
                "threshold",
            ) => *threshold = num(key, value)?,
            (_, key) => {
                return Err(Error::Config(format!("unknown environment option '{key}'")))
            }
        }
        Ok(())
    }
}

/// Builds the CMDP described by a spec.
pub fn make_env(spec: &EnvSpec) -> Result<Cmdp> {
    match spec {
        EnvSpec::GridworldHazard {
            layout,
            slip,
            gamma,
            threshold,
        } => gridworld(layout, *slip, *gamma, *threshold),
        EnvSpec::Chain {
            length,
            advance_prob,
            gamma,
            threshold,
        } => chain(*length, *advance_prob, *gamma, *threshold),
        EnvSpec::RandomCmdp {
            n_states,
            n_actions,
            n_constraints,
            seed,
            gamma,
            threshold_fraction,
        } => random_cmdp(
            *n_states,
            *n_actions,
            *n_constraints,
            *seed,
            *gamma,
            *threshold_fraction,
        ),
        EnvSpec::File { path } => read_cmdp(path),
    }
}

const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

fn gridworld(layout: &[String], slip: f64, gamma: f64, threshold: f64) -> Result<Cmdp> {
    let rows: Vec<Vec<char>> = layout.iter().map(|r| r.chars().collect()).collect();
    let width = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Config("gridworld layout must be a non-empty rectangle".into()));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(Error::Config(format!("slip must lie in [0, 1], got {slip}")));
    }
    let mut index = vec![vec![None; width]; rows.len()];
    let mut cells = Vec::new();
    let mut start = None;
    for (i, row) in rows.iter().enumerate() {
        for (j, &ch) in row.iter().enumerate() {
            match ch {
                '#' => continue,
                'S' | 'G' | 'H' | '.' => {}
                other => {
                    return Err(Error::Config(format!(
                        "unknown layout character '{other}' at row {i}, column {j}"
                    )))
                }
            }
            if ch == 'S' {
                if start.is_some() {
                    return Err(Error::Config("layout has more than one start".into()));
                }
                start = Some(cells.len());
            }
            index[i][j] = Some(cells.len());
            cells.push((i, j, ch));
        }
    }
    let start = start.ok_or_else(|| Error::Config("layout has no start cell".into()))?;
    let s_n = cells.len();
    let a_n = MOVES.len();
    let target = |i: usize, j: usize, m: usize| -> usize {
        let (di, dj) = MOVES[m];
        let (ni, nj) = (i as isize + di, j as isize + dj);
        if ni < 0 || nj < 0 || ni as usize >= rows.len() || nj as usize >= width {
            return index[i][j].unwrap_or(0);
        }
        index[ni as usize][nj as usize].unwrap_or_else(|| index[i][j].unwrap_or(0))
    };
    let mut transition = vec![0.0; s_n * a_n * s_n];
    let mut reward = vec![0.0; s_n * a_n];
    let mut cost = vec![0.0; s_n * a_n];
    for (s, &(i, j, ch)) in cells.iter().enumerate() {
        for a in 0..a_n {
            let row = &mut transition[(s * a_n + a) * s_n..(s * a_n + a + 1) * s_n];
            if ch == 'G' {
                row[s] = 1.0;
                reward[s * a_n + a] = 1.0;
            } else {
                row[target(i, j, a)] += 1.0 - slip;
                for m in 0..a_n {
                    row[target(i, j, m)] += slip / a_n as f64;
                }
            }
            if ch == 'H' {
                cost[s * a_n + a] = 1.0;
            }
        }
    }
    let mut initial = vec![0.0; s_n];
    initial[start] = 1.0;
    Cmdp::builder(s_n, a_n)
        .discount(gamma)
        .initial(initial)
        .transition(transition)
        .reward(reward)
        .constraint(cost, threshold)
        .build()
}

fn chain(length: usize, advance_prob: f64, gamma: f64, threshold: f64) -> Result<Cmdp> {
    if length < 2 {
        return Err(Error::Config("chain needs at least two states".into()));
    }
    if !(0.0..=1.0).contains(&advance_prob) {
        return Err(Error::Config("advance_prob must lie in [0, 1]".into()));
    }
    let s_n = length;
    let mut transition = vec![0.0; s_n * 2 * s_n];
    let mut reward = vec![0.0; s_n * 2];
    let mut cost = vec![0.0; s_n * 2];
    for s in 0..s_n {
        let goal = s + 1 == s_n;
        for a in 0..2 {
            let row = &mut transition[(s * 2 + a) * s_n..(s * 2 + a + 1) * s_n];
            if goal {
                row[s] = 1.0;
                reward[s * 2 + a] = 1.0;
                continue;
            }
            let p = if a == 0 { advance_prob } else { 1.0 };
            row[s + 1] += p;
            row[s] += 1.0 - p;
            if a == 1 {
                cost[s * 2 + a] = 1.0;
            }
        }
    }
    let mut initial = vec![0.0; s_n];
    initial[0] = 1.0;
    Cmdp::builder(s_n, 2)
        .discount(gamma)
        .initial(initial)
        .transition(transition)
        .reward(reward)
        .constraint(cost, threshold)
        .build()
}

/// Random CMDP with uniform tables. Transition rows and the initial
/// distribution are normalised uniform draws.
pub fn random_cmdp(
    n_states: usize,
    n_actions: usize,
    n_constraints: usize,
    seed: u64,
    gamma: f64,
    threshold_fraction: f64,
) -> Result<Cmdp> {
    if n_states == 0 || n_actions == 0 || n_constraints == 0 {
        return Err(Error::Config("random CMDP needs states, actions and constraints".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut simplex_row = |n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect::<Vec<_>>()
    };
    let initial = simplex_row(n_states);
    let transition: Vec<f64> = (0..n_states * n_actions)
        .flat_map(|_| simplex_row(n_states))
        .collect();
    let reward: Vec<f64> = (0..n_states * n_actions).map(|_| rng.gen()).collect();
    let costs: Vec<Vec<f64>> = (0..n_constraints)
        .map(|_| (0..n_states * n_actions).map(|_| rng.gen()).collect())
        .collect();
    let base = |r: Vec<f64>| {
        Cmdp::builder(n_states, n_actions)
            .discount(gamma)
            .initial(initial.clone())
            .transition(transition.clone())
            .reward(r)
            .constraint(vec![0.0; n_states * n_actions], 1.0)
            .build()
    };
    let mut builder = Cmdp::builder(n_states, n_actions)
        .discount(gamma)
        .initial(initial.clone())
        .transition(transition.clone())
        .reward(reward);
    for c in costs {
        let hi = value_iteration_optimum(&base(c.clone())?, 1e-12);
        let lo = -value_iteration_optimum(&base(c.iter().map(|x| -x).collect())?, 1e-12);
        builder = builder.constraint(c, lo + threshold_fraction * (hi - lo));
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::text::write_cmdp;

    #[test]
    fn two_cell_grid() {
        let spec = EnvSpec::GridworldHazard {
            layout: vec!["SG".into()],
            slip: 0.0,
            gamma: 0.9,
            threshold: 0.1,
        };
        let cmdp = make_env(&spec).unwrap();
        assert_eq!((cmdp.n_states(), cmdp.n_actions()), (2, 4));
        assert!(cmdp.cost(0).iter().all(|&c| c == 0.0));
        assert_eq!(cmdp.next_states(0, 1), &[0.0, 1.0]);
        assert_eq!(cmdp.next_states(0, 3), &[1.0, 0.0]);
    }

    #[test]
    fn builtins_build_and_parse() {
        for name in BUILTIN_ENVS {
            make_env(&builtin(name).unwrap()).unwrap();
        }
        let spec = EnvSpec::parse("random:seed=3,n_states=4").unwrap();
        let a = write_cmdp(&make_env(&spec).unwrap());
        let b = write_cmdp(&make_env(&EnvSpec::parse("random:n_states=4,seed=3").unwrap()).unwrap());
        assert_eq!(a, b);
        assert!(EnvSpec::parse("gridworld:colour=red").is_err());
        assert!(EnvSpec::parse("nowhere").is_err());
        let grid = EnvSpec::parse("gridworld:layout=SHG/...,slip=0").unwrap();
        assert_eq!(make_env(&grid).unwrap().n_states(), 6);
    }

    #[test]
    fn malformed_layouts() {
        for rows in [vec!["S.", "."], vec!["..G"], vec!["S?G"], vec!["SS"]] {
            let spec = EnvSpec::GridworldHazard {
                layout: rows.iter().map(|r| r.to_string()).collect(),
                slip: 0.1,
                gamma: 0.9,
                threshold: 0.1,
            };
            assert!(matches!(make_env(&spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn spec_toml_is_tagged() {
        let spec: EnvSpec = toml::from_str("kind = \"chain\"\nlength = 4\nthreshold = 0.2").unwrap();
        assert_eq!(make_env(&spec).unwrap().n_states(), 4);
        assert!(toml::from_str::<EnvSpec>("kind = \"chain\"\nlength = 4\nthreshold = 0.2\nfoo = 1")
            .is_err());
    }
}
