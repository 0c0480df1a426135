//! The two-collision gadget built from four momentum switches.
//!
//! A slow (|k| = pi/4) packet enters switch 1 at terminal 1 and a fast
//! (|k| = pi/2) one enters switch 2 at terminal 2. Both leave through
//! terminal 3 onto line 1, where they collide. The slow outgoing wave then
//! runs through switch 2 (3 -> 1) to switch 3 (1 -> 3), the fast one through
//! switch 1 (3 -> 2) to switch 4 (2 -> 3), and they collide again on line 2
//! before leaving via switch 3 terminal 2 (fast) and switch 4 terminal 1
//! (slow). Pads between the parts make both collisions happen at the line
//! centres and make packets that enter together also leave together.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{PacketSpec, TwoParticleSystem, TwoParticleWavefunction, END_WINDOW};
use crate::graph::{attach_rails, RailedGraph, ScatterGraph};
use crate::hamiltonian::{ModelParams, PairState};
use crate::momentum::Momentum;
use crate::phases::{channel_phase, RelativeKinematics};
use crate::scatter::{evolve_1p, packet_on_track, s_matrix, PacketShape};
use crate::sparse::inner;
use crate::spin::{to_uncoupled, Coupled};

pub const SLOW: f64 = PI / 4.0;
pub const FAST: f64 = PI / 2.0;

/// Group delay of a switch between two terminals, as an equivalent number
/// of free-line edges: `d arg S_{to, from} / dk`.
pub fn switch_delay(switch: &ScatterGraph, k: f64, from: usize, to: usize) -> Result<f64> {
    let h = 1e-6;
    let lo = s_matrix(switch, Momentum::new(k - h), 1.0)?.get(to, from).arg();
    let hi = s_matrix(switch, Momentum::new(k + h), 1.0)?.get(to, from).arg();
    let mut d = hi - lo;
    d -= (d / (2.0 * PI)).round() * 2.0 * PI;
    Ok(d / (2.0 * h))
}

/// Pad lengths in edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pads {
    pub input_slow: usize,
    pub input_fast: usize,
    pub connector_slow: usize,
    pub connector_fast: usize,
    pub exit_slow: usize,
    pub exit_fast: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GadgetLayout {
    /// Core graph; terminals are `[in_slow, in_fast, out_fast, out_slow]`.
    #[serde(skip)]
    pub core: ScatterGraph,
    pub line_length: usize,
    pub pads: Pads,
    pub delay_slow: f64,
    pub delay_fast: f64,
    /// Slow-packet travel time from entering to leaving the core.
    pub transit_time: f64,
}

pub const IN_SLOW: usize = 0;
pub const IN_FAST: usize = 1;
pub const OUT_FAST: usize = 2;
pub const OUT_SLOW: usize = 3;

struct Builder {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn vertex(&mut self) -> usize {
        self.n += 1;
        self.n - 1
    }

    /// Copy of `g`; returns the vertices of its terminals.
    fn copy(&mut self, g: &ScatterGraph) -> Vec<usize> {
        let base = self.n;
        self.n += g.vertex_count();
        self.edges.extend(g.edges().iter().map(|&(u, v)| (u + base, v + base)));
        g.terminals().iter().map(|&t| t + base).collect()
    }

    /// Join `u` and `v` by a path of `len >= 1` edges.
    fn path(&mut self, u: usize, v: usize, len: usize) {
        let mut prev = u;
        for _ in 1..len {
            let w = self.vertex();
            self.edges.push((prev, w));
            prev = w;
        }
        self.edges.push((prev, v));
    }

    /// A fresh vertex `len` edges away from `u`.
    fn tail(&mut self, u: usize, len: usize) -> usize {
        let end = self.vertex();
        self.path(u, end, len);
        end
    }
}

/// Lay out the gadget for packets of length `packet_length`.
pub fn build_gadget(switch: &ScatterGraph, packet_length: usize) -> Result<GadgetLayout> {
    if switch.terminals().len() != 3 {
        return Err(Error::Graph("the gadget needs a 3-terminal switch".into()));
    }
    let ds = switch_delay(switch, SLOW, 0, 2)?;
    let df = switch_delay(switch, FAST, 1, 2)?;
    let ratio = FAST.sin() / SLOW.sin();
    let mut line = 2 * packet_length + 16;
    line += line % 2;
    let half = line as f64 / 2.0;
    // Fast-side pad matching a slow-side pad, growing the slow pad if needed.
    let solve = |slow_fixed: f64, fast_fixed: f64| -> (usize, usize) {
        let mut slow = 1usize;
        loop {
            let fast = (ratio * (slow as f64 + slow_fixed) - fast_fixed).round();
            if fast >= 1.0 {
                return (slow, fast as usize);
            }
            slow += 1;
        }
    };
    let (input_slow, input_fast) = solve(ds + half, df + half);
    let (connector_slow, connector_fast) = solve(line as f64 + 2.0 * ds, line as f64 + 2.0 * df);
    let (exit_slow, exit_fast) = solve(half + ds, half + df);
    let pads = Pads { input_slow, input_fast, connector_slow, connector_fast, exit_slow, exit_fast };

    let mut b = Builder { n: 0, edges: Vec::new() };
    let sw: Vec<Vec<usize>> = (0..4).map(|_| b.copy(switch)).collect();
    b.path(sw[0][2], sw[1][2], line);
    b.path(sw[2][2], sw[3][2], line);
    b.path(sw[1][0], sw[2][0], connector_slow);
    b.path(sw[0][1], sw[3][1], connector_fast);
    let in_slow = b.tail(sw[0][0], input_slow);
    let in_fast = b.tail(sw[1][1], input_fast);
    let out_fast = b.tail(sw[2][1], exit_fast);
    let out_slow = b.tail(sw[3][0], exit_slow);
    let core = ScatterGraph::new(b.n, b.edges, vec![in_slow, in_fast, out_fast, out_slow])?;
    let slow_path = input_slow as f64 + 4.0 * ds + 2.0 * line as f64 + connector_slow as f64 + exit_slow as f64;
    Ok(GadgetLayout {
        core,
        line_length: line,
        pads,
        delay_slow: ds,
        delay_fast: df,
        transit_time: slow_path / (2.0 * SLOW.sin()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GadgetConfig {
    pub params: ModelParams,
    pub length: usize,
    pub shape: PacketShape,
    /// Feed the fast packet into the slow input and vice versa.
    pub swap_momenta: bool,
}

impl GadgetConfig {
    pub fn new(params: ModelParams, length: usize) -> Self {
        GadgetConfig { params, length, shape: PacketShape::Square, swap_momenta: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GateEstimate {
    /// `M[i][j] = <reference_i | actual_j>` over coupled inputs `{T+, T0, S, T-}`.
    pub matrix: [[Complex64; 4]; 4],
    /// Two collisions' worth of the closed-form channel phases.
    pub expected: [Complex64; 4],
    pub max_error: f64,
    /// Expected particle number on the fast and slow output rails.
    pub output_occupation: [f64; 2],
    /// Final weight on each rail of the slow and the fast packet sent alone.
    pub single_particle_routing: [[f64; 4]; 2],
    /// Distance from the core of each packet's peak on its exit rail
    /// (slow, fast) at the end of the run.
    pub exit_distance: [f64; 2],
    pub exit_spread: f64,
    pub allowed_spread: f64,
    pub vertex_count: usize,
    pub duration: f64,
    pub boundary_probability: f64,
    pub layout: GadgetLayout,
}

impl GateEstimate {
    /// Largest deviation of the triplet diagonal from the expected entries.
    pub fn triplet_error(&self) -> f64 {
        [0usize, 1, 3].iter().map(|&i| (self.matrix[i][i] - self.expected[i]).norm()).fold(0.0, f64::max)
    }

    pub fn singlet_error(&self) -> f64 {
        (self.matrix[2][2] - self.expected[2]).norm()
    }
}

/// Run the four coupled spin inputs through the gadget and estimate the
/// induced two-spin gate.
#[allow(non_snake_case)]
pub fn simulate_gate_G(switch: &ScatterGraph, cfg: &GadgetConfig) -> Result<GateEstimate> {
    let layout = build_gadget(switch, cfg.length)?;
    let t = cfg.params.t;
    let (v_slow, v_fast) = (2.0 * t * SLOW.sin(), 2.0 * t * FAST.sin());
    let l = cfg.length as f64;
    // Packets enter together: centres at distances proportional to speed.
    let d_slow = l / 2.0 + 4.0;
    let d_fast = d_slow * v_fast / v_slow;
    let transit = layout.transit_time / t;
    let duration = d_slow / v_slow + transit + (l / 2.0 + 8.0) / v_slow;
    // Imperfect routing sends stray amplitude out of every terminal at up
    // to 2t; rails long enough that little of it reaches the ends.
    let rail = (d_fast + 1.5 * l + 8.0).max(2.0 * t * duration + l).ceil() as usize + END_WINDOW;
    let railed = attach_rails(&layout.core, rail)?;
    let system = TwoParticleSystem::new(railed.lattice(END_WINDOW), cfg.params)?;

    let (k_in_slow, k_in_fast) = if cfg.swap_momenta { (FAST, SLOW) } else { (SLOW, FAST) };
    let packet = |terminal: usize, dist: f64, k: f64| -> PacketSpec {
        let track = railed.incoming_track(terminal);
        let centre = track.len() - 1 - dist.round() as usize;
        PacketSpec {
            start: centre - cfg.length / 2,
            track,
            length: cfg.length,
            momentum: Momentum::new(k),
            spin: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            shape: cfg.shape,
        }
    };
    let p_slow = packet(IN_SLOW, d_slow, k_in_slow);
    let p_fast = packet(IN_FAST, d_fast, k_in_fast);

    // Routing and exit timing are single-particle properties: check them
    // before the costly runs.
    let mut routing = [[0.0; 4]; 2];
    let mut exit_distance = [0.0; 2];
    for (n, (p, want)) in [(&p_slow, OUT_SLOW), (&p_fast, OUT_FAST)].into_iter().enumerate() {
        let psi = packet_on_track(railed.vertex_count(), &p.track, p.start, p.length, p.momentum, p.shape)?;
        let ev = evolve_1p(&railed, &psi, duration, t)?;
        let row = &mut routing[n];
        for (j, w) in row.iter_mut().enumerate() {
            *w = railed.rail(j).map(|v| ev.state[v].norm_sqr()).sum();
        }
        let best = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        if best != want {
            return Err(Error::RoutingFailure(format!(
                "packet with k = {:.4} leaves mostly through terminal {best}, expected {want} (rail weights {row:.3?})",
                p.momentum.value()
            )));
        }
        let density: Vec<f64> = railed.rail(want).map(|v| ev.state[v].norm_sqr()).collect();
        exit_distance[n] = peak_centroid(&density, cfg.length);
    }
    let exit_spread = (exit_distance[0] - exit_distance[1]).abs();
    let allowed_spread = l / 4.0;
    if exit_spread > allowed_spread {
        return Err(Error::TimingMisalignment { spread: exit_spread, allowed: allowed_spread });
    }

    let inputs: Vec<[Complex64; 4]> = Coupled::ALL
        .iter()
        .map(|c| {
            let mut e = [Complex64::new(0.0, 0.0); 4];
            e[c.index()] = Complex64::new(1.0, 0.0);
            to_uncoupled(e)
        })
        .collect();
    let runs: Vec<(TwoParticleWavefunction, f64)> = inputs
        .par_iter()
        .map(|&spins| {
            let mut psi = system.prepare_pair(&p_slow, &p_fast, spins)?;
            let rep = system.evolve(&mut psi, duration)?;
            Ok((psi, rep.boundary_probability))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<TwoParticleWavefunction> = inputs
        .par_iter()
        .map(|&spins| system.free_reference_pair(&p_slow, &p_fast, spins, duration))
        .collect::<Result<Vec<_>>>()?;
    let counts = rail_counts(&system, &railed);
    let last = occupations(&runs[Coupled::Singlet.index()].0, &counts);

    let mut matrix = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (i, r) in refs.iter().enumerate() {
        for (j, run) in runs.iter().enumerate() {
            matrix[i][j] = inner(&r.amplitudes, &run.0.amplitudes);
        }
    }
    let kin = RelativeKinematics::head_on(SLOW, FAST)?;
    let mut expected = [Complex64::new(0.0, 0.0); 4];
    for c in Coupled::ALL {
        expected[c.index()] = Complex64::from_polar(1.0, 2.0 * channel_phase(&cfg.params, &kin, c)?);
    }
    let mut max_error: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { expected[i] } else { Complex64::new(0.0, 0.0) };
            max_error = max_error.max((matrix[i][j] - want).norm());
        }
    }
    Ok(GateEstimate {
        matrix,
        expected,
        max_error,
        output_occupation: last,
        single_particle_routing: routing,
        exit_distance,
        exit_spread,
        allowed_spread,
        vertex_count: railed.vertex_count(),
        duration,
        boundary_probability: runs.iter().map(|r| r.1).fold(0.0, f64::max),
        layout,
    })
}

/// Centroid of `density` within one packet length of its peak. Stray
/// amplitude from multiple reflections trails far behind and is ignored.
fn peak_centroid(density: &[f64], length: usize) -> f64 {
    let peak = (0..density.len()).max_by(|&a, &b| density[a].total_cmp(&density[b])).unwrap_or(0);
    let lo = peak.saturating_sub(length);
    let hi = (peak + length + 1).min(density.len());
    let (mut w, mut m) = (0.0, 0.0);
    for (i, d) in density.iter().enumerate().take(hi).skip(lo) {
        w += d;
        m += d * i as f64;
    }
    if w > 0.0 { m / w } else { peak as f64 }
}

/// Number of particles each basis state puts on the (fast, slow) output rails.
fn rail_counts(system: &TwoParticleSystem, railed: &RailedGraph) -> Vec<[u8; 2]> {
    let mut which = vec![[0u8; 2]; railed.vertex_count()];
    for v in railed.rail(OUT_FAST) {
        which[v][0] = 1;
    }
    for v in railed.rail(OUT_SLOW) {
        which[v][1] = 1;
    }
    let basis = system.basis();
    (0..basis.dim())
        .map(|i| match basis.state(i) {
            PairState::Pair { a, b, .. } => [which[a][0] + which[b][0], which[a][1] + which[b][1]],
            PairState::Double { a } => [2 * which[a][0], 2 * which[a][1]],
        })
        .collect()
}

fn occupations(psi: &TwoParticleWavefunction, counts: &[[u8; 2]]) -> [f64; 2] {
    let parts: Vec<[f64; 2]> = psi
        .amplitudes
        .par_chunks(4096)
        .zip(counts.par_chunks(4096))
        .map(|(a, c)| {
            let mut acc = [0.0; 2];
            for (z, n) in a.iter().zip(c) {
                let p = z.norm_sqr();
                acc[0] += p * n[0] as f64;
                acc[1] += p * n[1] as f64;
            }
            acc
        })
        .collect();
    parts.iter().fold([0.0; 2], |s, p| [s[0] + p[0], s[1] + p[1]])
}
