//! Quasi-static DC load flow on one track.
//!
//! Trains are constant-power elements linearised as current sources from the last
//! voltage iterate (`I = P / V`). Substations are Thevenin sources behind ideal
//! diodes; a substation whose busbar rises above its no-load voltage is taken out
//! of the active set and re-checked every iteration. A regenerating train whose
//! pantograph voltage would exceed its chopper activation level is held at that
//! level and the surplus goes to its braking resistors. When the resistors are
//! saturated the node is left free with the full resistor conductance attached.
//!
//! The chain topology makes every linear solve tridiagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rail::NetworkGraph;
use crate::substation::SubstationParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("load flow did not converge after {iterations} iterations (residual {residual:.3e} A)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("load of train {train} exceeds what the network can deliver (voltage collapse)")]
    Infeasible { train: usize },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("train {train} is motoring; receptivity split only applies to regenerating trains")]
    NotRegenerating { train: usize },
}

/// On-board braking chopper as seen by the network: clamp voltage and the
/// conductance of all resistor banks of the consist in parallel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChopperLimit {
    pub v_act: f64,
    pub conductance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLoad {
    /// Power at the train's DC bus, W (+ drawing, - regenerating).
    pub power: f64,
    pub chopper: ChopperLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Nodal current mismatch tolerance, A.
    pub tol: f64,
    pub max_iter: usize,
    /// Disconnect a regenerating train instead of clamping it whenever it would
    /// need its chopper.
    pub strict_disconnect: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 0.01, max_iter: 200, strict_disconnect: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveResult {
    pub node_voltages: Vec<f64>,
    /// Current out of each substation, A (indexed like the substation list).
    pub substation_currents: Vec<f64>,
    /// Busbar voltage of each substation, V.
    pub substation_voltages: Vec<f64>,
    /// Net pantograph current per train, A (+ drawing from the rail).
    pub train_currents: Vec<f64>,
    pub train_voltages: Vec<f64>,
    /// DC-bus power per train as given to the solver, W.
    pub train_powers: Vec<f64>,
    pub chopper_powers: Vec<f64>,
    /// Ohmic loss in the rails, W.
    pub rail_loss: f64,
    /// Largest nodal current mismatch, A.
    pub residual: f64,
    pub iterations: usize,
}

impl SolveResult {
    /// Power leaving each substation at its busbar, W.
    pub fn substation_powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.substation_currents.iter().zip(&self.substation_voltages).map(|(i, v)| i * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeState {
    Free,
    Clamped,
    Saturated,
    Open,
}

struct NodeData {
    /// Net train power at the node, W.
    train_power: f64,
    aux: f64,
    v_clamp: f64,
    chopper_g: f64,
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solves one snapshot. `trains` is indexed like the node train lists of `graph`;
/// `substations` like the node substation lists.
pub fn solve(
    graph: &NetworkGraph,
    trains: &[TrainLoad],
    substations: &[SubstationParams],
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidInput("tol must be > 0".into()));
    }
    let n = graph.nodes.len();
    if n == 0 {
        return Err(SolverError::InvalidInput("empty network".into()));
    }
    if substations.is_empty() {
        return Err(SolverError::InvalidInput("network needs at least one substation".into()));
    }
    let g_branch: Vec<f64> = graph
        .branches
        .iter()
        .map(|b| {
            let r = b.resistance();
            if r > 0.0 {
                Ok(1.0 / r)
            } else {
                Err(SolverError::InvalidInput(format!("branch {}-{} has non-positive resistance", b.from, b.to)))
            }
        })
        .collect::<Result<_, _>>()?;

    let nodes: Vec<NodeData> = graph
        .nodes
        .iter()
        .map(|node| {
            let train_power: f64 = node.trains.iter().map(|&k| trains[k].power).sum();
            let regen = node.trains.iter().filter(|&&k| trains[k].power < 0.0);
            let v_clamp = regen.clone().map(|&k| trains[k].chopper.v_act).fold(f64::INFINITY, f64::min);
            let chopper_g = regen.map(|&k| trains[k].chopper.conductance).sum();
            let aux = node.substations.iter().map(|&s| substations[s].aux_load).sum();
            NodeData { train_power, aux, v_clamp, chopper_g }
        })
        .collect();

    let v_ref = substations.iter().map(|s| s.v0).fold(0.0, f64::max);
    let v_floor = 0.05 * substations.iter().map(|s| s.v0).fold(f64::INFINITY, f64::min);
    let mut volts = vec![v_ref; n];
    let mut state = vec![NodeState::Free; n];
    // (node, substation, active)
    let mut subs: Vec<(usize, usize, bool)> = graph
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(i, node)| node.substations.iter().map(move |&s| (i, s, true)))
        .collect();

    let train_node_min = |v: &[f64]| -> Option<(usize, f64)> {
        graph
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, node)| node.trains.iter().any(|&k| trains[k].power > 0.0))
            .map(|(i, _)| (i, v[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    let infeasible_at = |node: usize| -> SolverError {
        let train = graph.nodes[node]
            .trains
            .iter()
            .copied()
            .max_by(|&a, &b| trains[a].power.total_cmp(&trains[b].power))
            .unwrap_or(0);
        SolverError::Infeasible { train }
    };

    let eps_i = 0.1 * opts.tol;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut falling = 0usize;
    let mut last_min = f64::INFINITY;
    // Strict disconnect runs the clamp solution first, then opens every node that
    // needed its chopper and re-solves with the open set frozen.
    let mut strict_pass_done = !opts.strict_disconnect;

    for iter in 1..=opts.max_iter {
        // a free net source carries its own tangent conductance and fixes the level
        let anchored = subs.iter().any(|s| s.2)
            || (0..n).any(|i| match state[i] {
                NodeState::Clamped | NodeState::Saturated => true,
                NodeState::Free => node_load(&nodes[i], state[i]) < 0.0,
                NodeState::Open => false,
            });
        if !anchored {
            // Nothing fixes the potential: regeneration lifts the whole chain to the
            // lowest clamp. Without regeneration the diodes must conduct.
            let candidate = (0..n)
                .filter(|&i| state[i] == NodeState::Free && nodes[i].train_power < 0.0)
                .min_by(|&a, &b| nodes[a].v_clamp.total_cmp(&nodes[b].v_clamp));
            match candidate {
                Some(i) if nodes[i].v_clamp.is_finite() => state[i] = NodeState::Clamped,
                _ => subs.iter_mut().for_each(|s| s.2 = true),
            }
        }

        for i in 0..n {
            lower[i] = 0.0;
            upper[i] = 0.0;
            if state[i] == NodeState::Clamped {
                diag[i] = 1.0;
                rhs[i] = nodes[i].v_clamp;
                continue;
            }
            let mut d = 0.0;
            if i > 0 {
                d += g_branch[i - 1];
                lower[i] = -g_branch[i - 1];
            }
            if i + 1 < n {
                d += g_branch[i];
                upper[i] = -g_branch[i];
            }
            let p = node_load(&nodes[i], state[i]);
            let (g_lin, j) = linearise(p, volts[i]);
            d += g_lin;
            let r = -j;
            if state[i] == NodeState::Saturated {
                d += nodes[i].chopper_g;
            }
            diag[i] = d;
            rhs[i] = r;
        }
        for &(i, s, active) in &subs {
            if active && state[i] != NodeState::Clamped {
                let p = &substations[s];
                diag[i] += 1.0 / p.r_th;
                rhs[i] += p.v0 / p.r_th;
            }
        }
        let new = solve_tridiagonal(&lower, &diag, &upper, &rhs);

        if let Some(bad) = new.iter().position(|v| !v.is_finite() || *v <= v_floor) {
            let node = train_node_min(&new).map(|(i, _)| i).unwrap_or(bad);
            return Err(infeasible_at(node));
        }

        residual = 0.0;
        for i in 0..n {
            if state[i] == NodeState::Clamped {
                continue;
            }
            let p = node_load(&nodes[i], state[i]);
            let (g_lin, j) = linearise(p, volts[i]);
            residual = f64::max(residual, (p / new[i] - (j + g_lin * new[i])).abs());
        }

        let mut changed = false;
        let mut released = false;
        for sub in subs.iter_mut() {
            let (i, s, active) = *sub;
            let p = &substations[s];
            if !p.diode {
                continue;
            }
            let current = (p.v0 - new[i]) / p.r_th;
            // a stiff source turns voltage roundoff into visible current
            let eps = eps_i.max(1e-12 * p.v0 / p.r_th);
            if active && current < -eps {
                sub.2 = false;
                changed = true;
            } else if !active && current > eps {
                sub.2 = true;
                changed = true;
            }
        }
        for i in 0..n {
            let nd = &nodes[i];
            match state[i] {
                NodeState::Free if nd.train_power < 0.0 && new[i] > nd.v_clamp => {
                    state[i] = NodeState::Clamped;
                    changed = true;
                }
                NodeState::Clamped => {
                    let chop = chopper_power_at(i, &new, nd, &g_branch, &subs, substations);
                    if chop < -eps_i * nd.v_clamp {
                        state[i] = NodeState::Free;
                        changed = true;
                        released = true;
                    } else if chop > nd.chopper_g * nd.v_clamp * nd.v_clamp {
                        state[i] = NodeState::Saturated;
                        changed = true;
                    }
                }
                NodeState::Saturated if new[i] < nd.v_clamp => {
                    state[i] = NodeState::Clamped;
                    changed = true;
                }
                _ => {}
            }
        }

        // a source that cannot hold its clamp leaves the chain to the diodes
        if released && !state.iter().any(|s| matches!(s, NodeState::Clamped | NodeState::Saturated)) {
            subs.iter_mut().for_each(|s| s.2 = true);
        }
        if let Some((_, vmin)) = train_node_min(&new) {
            falling = if vmin < last_min { falling + 1 } else { 0 };
            last_min = vmin;
        }
        volts = new;

        if !changed && residual <= opts.tol {
            if !strict_pass_done {
                strict_pass_done = true;
                let mut opened = false;
                for st in state.iter_mut() {
                    if matches!(st, NodeState::Clamped | NodeState::Saturated) {
                        *st = NodeState::Open;
                        opened = true;
                    }
                }
                if opened {
                    continue;
                }
            }
            return Ok(finish(graph, trains, substations, &nodes, &state, &subs, &g_branch, volts, residual, iter));
        }
    }

    if let Some((node, vmin)) = train_node_min(&volts) {
        let v0_min = substations.iter().map(|s| s.v0).fold(f64::INFINITY, f64::min);
        if falling >= 10 && vmin < 0.5 * v0_min {
            return Err(infeasible_at(node));
        }
    }
    Err(SolverError::NonConvergence { iterations: opts.max_iter, residual })
}

fn node_load(nd: &NodeData, state: NodeState) -> f64 {
    let train = if state == NodeState::Open { 0.0 } else { nd.train_power };
    train + nd.aux
}

/// Linearised sink current `j + g v` of a constant-power element around `v_k`.
/// Loads use the plain current-source update; net sources take the tangent, which
/// keeps the conductance positive and converges where a lone source would only
/// oscillate against its own chopper resistor.
fn linearise(p: f64, v_k: f64) -> (f64, f64) {
    if p < 0.0 {
        (-p / (v_k * v_k), 2.0 * p / v_k)
    } else {
        (0.0, p / v_k)
    }
}

/// Current flowing from node `i` into the rest of the network, A.
fn outflow(
    i: usize,
    v: &[f64],
    g_branch: &[f64],
    subs: &[(usize, usize, bool)],
    substations: &[SubstationParams],
) -> f64 {
    let mut out = 0.0;
    if i > 0 {
        out += g_branch[i - 1] * (v[i] - v[i - 1]);
    }
    if i + 1 < v.len() {
        out += g_branch[i] * (v[i] - v[i + 1]);
    }
    for &(j, s, active) in subs {
        if j == i && active {
            let p = &substations[s];
            out -= (p.v0 - v[i]) / p.r_th;
        }
    }
    out
}

fn chopper_power_at(
    i: usize,
    v: &[f64],
    nd: &NodeData,
    g_branch: &[f64],
    subs: &[(usize, usize, bool)],
    substations: &[SubstationParams],
) -> f64 {
    let inject = outflow(i, v, g_branch, subs, substations) + nd.aux / v[i];
    -nd.train_power - v[i] * inject
}

#[allow(clippy::too_many_arguments)]
fn finish(
    graph: &NetworkGraph,
    trains: &[TrainLoad],
    substations: &[SubstationParams],
    nodes: &[NodeData],
    state: &[NodeState],
    subs: &[(usize, usize, bool)],
    g_branch: &[f64],
    volts: Vec<f64>,
    residual: f64,
    iterations: usize,
) -> SolveResult {
    let n_trains = trains.len();
    let mut res = SolveResult {
        substation_currents: vec![0.0; substations.len()],
        substation_voltages: substations.iter().map(|s| s.v0).collect(),
        train_currents: vec![0.0; n_trains],
        train_voltages: vec![0.0; n_trains],
        train_powers: trains.iter().map(|t| t.power).collect(),
        chopper_powers: vec![0.0; n_trains],
        residual,
        iterations,
        ..Default::default()
    };
    for &(i, s, active) in subs {
        let p = &substations[s];
        res.substation_voltages[s] = volts[i];
        res.substation_currents[s] = if active {
            let c = (p.v0 - volts[i]) / p.r_th;
            if p.diode {
                c.max(0.0)
            } else {
                c
            }
        } else {
            0.0
        };
    }
    res.rail_loss = g_branch.iter().enumerate().map(|(b, g)| g * (volts[b] - volts[b + 1]).powi(2)).sum();

    for (i, node) in graph.nodes.iter().enumerate() {
        let v = volts[i];
        let nd = &nodes[i];
        let node_chopper = match state[i] {
            NodeState::Free => 0.0,
            NodeState::Clamped => chopper_power_at(i, &volts, nd, g_branch, subs, substations).max(0.0),
            NodeState::Saturated => nd.chopper_g * v * v,
            NodeState::Open => -nd.train_power,
        };
        let regen_total: f64 = node.trains.iter().map(|&k| (-trains[k].power).max(0.0)).sum();
        for &k in &node.trains {
            let p = trains[k].power;
            let share = if regen_total > 0.0 { (-p).max(0.0) / regen_total } else { 0.0 };
            let chop = node_chopper.max(0.0) * share;
            res.chopper_powers[k] = chop;
            res.train_voltages[k] = v;
            res.train_currents[k] = (p + chop) / v;
        }
    }
    res.node_voltages = volts;
    res
}

/// Splits a regenerating train's braking power into what the network took and
/// what its chopper burnt, W.
pub fn receptivity_split(result: &SolveResult, train: usize) -> Result<(f64, f64), SolverError> {
    let p = result.train_powers[train];
    if p >= 0.0 {
        return Err(SolverError::NotRegenerating { train });
    }
    let to_chopper = result.chopper_powers[train].clamp(0.0, -p);
    Ok((-p - to_chopper, to_chopper))
}
