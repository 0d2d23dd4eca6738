//! Multinomial No-U-Turn sampler with a diagonal metric, dual-averaging
//! step-size adaptation and windowed metric adaptation during warm-up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::HierError;

/// A differentiable log density on R^n.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    /// Log density (up to a constant) and its gradient. Returns
    /// `f64::NEG_INFINITY` outside the support.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    fn param_names(&self) -> Vec<String>;
    /// Map an unconstrained point to reported parameter values.
    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub max_depth: usize,
    pub target_accept: f64,
    pub max_delta_h: f64,
    pub init_buffer: usize,
    pub term_buffer: usize,
    pub base_window: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 2000,
            draws: 2000,
            seed: 1,
            max_depth: 10,
            target_accept: 0.8,
            max_delta_h: 1000.0,
            init_buffer: 75,
            term_buffer: 50,
            base_window: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterStats {
    pub lp: f64,
    pub accept_stat: f64,
    pub stepsize: f64,
    pub treedepth: u32,
    pub n_leapfrog: u32,
    pub divergent: bool,
}

/// One chain's post-warm-up draws in constrained space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    pub stats: Vec<IterStats>,
    pub stepsize: f64,
    pub inv_metric: Vec<f64>,
}

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Sampler<'a, T: Target> {
    target: &'a T,
    rng: ChaCha8Rng,
    eps: f64,
    inv_metric: Vec<f64>,
    max_depth: usize,
    max_delta_h: f64,
    n_leapfrog: u32,
    divergent: bool,
    sum_metro: f64,
}

impl<T: Target> Sampler<'_, T> {
    fn state_at(&self, q: Vec<f64>) -> State {
        let n = q.len();
        let mut grad = vec![0.0; n];
        let lp = self.target.log_density_grad(&q, &mut grad);
        State { q, p: vec![0.0; n], grad, lp }
    }

    fn sample_momentum(&mut self, z: &mut State) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let u: f64 = StandardNormal.sample(&mut self.rng);
            *p = u / m.sqrt();
        }
    }

    fn hamiltonian(&self, z: &State) -> f64 {
        let kinetic: f64 = z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum();
        let h = -z.lp + 0.5 * kinetic;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn leapfrog(&self, z: &mut State, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.lp = self.target.log_density_grad(&z.q, &mut z.grad);
        if !z.lp.is_finite() {
            z.lp = f64::NEG_INFINITY;
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut State,
        z_propose: &mut State,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut Vec<f64>,
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        h0: f64,
        sign: f64,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.eps);
            self.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - h0 > self.max_delta_h {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            self.sum_metro += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            z_propose.clone_from(z);
            *p_sharp_beg = self.p_sharp(&z.p);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.clone_from(&z.p);
            p_end.clone_from(&z.p);
            return !self.divergent;
        }

        let n = z.q.len();
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut p_sharp_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            h0,
            sign,
            &mut lsw_init,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut p_sharp_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            h0,
            sign,
            &mut lsw_final,
        ) {
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || self.rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            *z_propose = z_propose_final;
        }

        let rho_subtree = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &add(&rho_init, &p_final_beg));
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &add(&rho_final, &p_init_end));
        persist
    }

    fn transition(&mut self, z: &mut State) -> IterStats {
        self.sample_momentum(z);
        let h0 = self.hamiltonian(z);
        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let p_sharp = self.p_sharp(&z.p);
        let (mut p_fwd_fwd, mut p_fwd_bck, mut p_bck_fwd, mut p_bck_bck) =
            (z.p.clone(), z.p.clone(), z.p.clone(), z.p.clone());
        let (mut ps_fwd_fwd, mut ps_fwd_bck, mut ps_bck_fwd, mut ps_bck_bck) =
            (p_sharp.clone(), p_sharp.clone(), p_sharp.clone(), p_sharp);
        let mut rho = z.p.clone();
        let n = rho.len();

        let mut log_sum_weight = 0.0;
        let mut depth = 0;
        self.n_leapfrog = 0;
        self.sum_metro = 0.0;
        self.divergent = false;

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; n];
            let mut rho_bck = vec![0.0; n];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if self.rng.random::<f64>() > 0.5 {
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                ps_bck_fwd.clone_from(&ps_fwd_bck);
                self.build_tree(
                    depth,
                    &mut z_fwd,
                    &mut z_propose,
                    &mut ps_fwd_bck,
                    &mut ps_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    h0,
                    1.0,
                    &mut lsw_subtree,
                )
            } else {
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                ps_fwd_bck.clone_from(&ps_bck_fwd);
                self.build_tree(
                    depth,
                    &mut z_bck,
                    &mut z_propose,
                    &mut ps_bck_fwd,
                    &mut ps_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    h0,
                    -1.0,
                    &mut lsw_subtree,
                )
            };
            if !valid {
                break;
            }
            depth += 1;
            if lsw_subtree > log_sum_weight || self.rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp() {
                z_sample.clone_from(&z_propose);
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

            rho = add(&rho_bck, &rho_fwd);
            let mut persist = no_u_turn(&ps_bck_bck, &ps_fwd_fwd, &rho);
            persist &= no_u_turn(&ps_bck_bck, &ps_fwd_bck, &add(&rho_bck, &p_fwd_bck));
            persist &= no_u_turn(&ps_bck_fwd, &ps_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
            if !persist {
                break;
            }
        }

        *z = z_sample;
        IterStats {
            lp: z.lp,
            accept_stat: self.sum_metro / f64::from(self.n_leapfrog.max(1)),
            stepsize: self.eps,
            treedepth: depth as u32,
            n_leapfrog: self.n_leapfrog,
            divergent: self.divergent,
        }
    }

    /// Double or halve the step size until one leapfrog step crosses an
    /// acceptance of 0.8.
    fn init_stepsize(&mut self, z: &State) -> Result<(), HierError> {
        let threshold = 0.8f64.ln();
        let mut direction = 0.0;
        loop {
            let mut trial = z.clone();
            self.sample_momentum(&mut trial);
            let h0 = self.hamiltonian(&trial);
            self.leapfrog(&mut trial, self.eps);
            let delta = h0 - self.hamiltonian(&trial);
            if direction == 0.0 {
                direction = if delta > threshold { 1.0 } else { -1.0 };
            } else if (direction > 0.0 && !(delta > threshold)) || (direction < 0.0 && !(delta < threshold)) {
                return Ok(());
            }
            self.eps = if direction > 0.0 { 2.0 * self.eps } else { 0.5 * self.eps };
            if self.eps > 1e7 || self.eps == 0.0 {
                return Err(HierError::StepSize(self.eps));
            }
        }
    }
}

struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const KAPPA: f64 = 0.75;
    const T0: f64 = 10.0;

    fn new(eps: f64, delta: f64) -> Self {
        Self { mu: (10.0 * eps).ln(), s_bar: 0.0, x_bar: 0.0, counter: 0.0, delta }
    }

    fn restart(&mut self, eps: f64) {
        *self = Self::new(eps, self.delta);
    }

    fn learn(&mut self, eps: &mut f64, accept: f64) {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        *eps = x.exp();
    }

    fn final_stepsize(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Running variance estimates over doubling windows.
struct MetricWindows {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MetricWindows {
    fn new(cfg: &SamplerConfig, dim: usize) -> Option<Self> {
        let w = cfg.warmup;
        if w < 20 {
            return None;
        }
        let (mut init, mut term, mut base) = (cfg.init_buffer, cfg.term_buffer, cfg.base_window);
        if init + base + term > w {
            init = (0.15 * w as f64) as usize;
            term = (0.1 * w as f64) as usize;
            base = w - (init + term);
        }
        Some(Self {
            warmup: w,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: init + base - 1,
            counter: 0,
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        })
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer && self.counter < self.warmup - self.term_buffer && self.counter != self.warmup
    }

    fn window_ends(&self) -> bool {
        self.counter == self.next_window && self.counter != self.warmup
    }

    fn advance_window(&mut self) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Returns true when `inv_metric` was updated.
    fn learn(&mut self, inv_metric: &mut [f64], q: &[f64]) -> bool {
        if self.in_window() {
            self.n += 1.0;
            for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(q) {
                let d = x - *m;
                *m += d / self.n;
                *s += d * (x - *m);
            }
        }
        if self.window_ends() {
            self.advance_window();
            let n = self.n;
            for (v, s) in inv_metric.iter_mut().zip(&self.m2) {
                let var = s / (n - 1.0);
                *v = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
            }
            self.n = 0.0;
            self.mean.iter_mut().for_each(|m| *m = 0.0);
            self.m2.iter_mut().for_each(|m| *m = 0.0);
            self.counter += 1;
            return true;
        }
        self.counter += 1;
        false
    }
}

const INIT_TRIES: usize = 100;

/// Run one chain; the random stream is fixed by `(cfg.seed, chain)`.
pub fn run_chain<T: Target>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<ChainOutput, HierError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let dim = target.dim();
    let mut sampler = Sampler {
        target,
        rng,
        eps: 1.0,
        inv_metric: vec![1.0; dim],
        max_depth: cfg.max_depth,
        max_delta_h: cfg.max_delta_h,
        n_leapfrog: 0,
        divergent: false,
        sum_metro: 0.0,
    };

    let mut z = None;
    for _ in 0..INIT_TRIES {
        let q = target.initial_point(&mut sampler.rng);
        let s = sampler.state_at(q);
        if s.lp.is_finite() && s.grad.iter().all(|g| g.is_finite()) {
            z = Some(s);
            break;
        }
    }
    let mut z = z.ok_or(HierError::InitFailed(chain))?;

    sampler.init_stepsize(&z)?;
    let mut da = DualAveraging::new(sampler.eps, cfg.target_accept);
    let mut windows = MetricWindows::new(cfg, dim);

    let mut out = ChainOutput {
        draws: Vec::with_capacity(cfg.draws),
        stats: Vec::with_capacity(cfg.draws),
        stepsize: sampler.eps,
        inv_metric: Vec::new(),
    };
    for it in 0..cfg.warmup + cfg.draws {
        let stats = sampler.transition(&mut z);
        if it < cfg.warmup {
            da.learn(&mut sampler.eps, stats.accept_stat);
            if let Some(w) = windows.as_mut() {
                if w.learn(&mut sampler.inv_metric, &z.q) {
                    sampler.init_stepsize(&z)?;
                    da.restart(sampler.eps);
                }
            }
            if it + 1 == cfg.warmup {
                sampler.eps = da.final_stepsize();
            }
        } else {
            out.draws.push(target.constrain(&z.q));
            out.stats.push(stats);
        }
    }
    out.stepsize = sampler.eps;
    out.inv_metric = sampler.inv_metric;
    Ok(out)
}

/// Run `cfg.chains` chains concurrently; results are ordered by chain index.
pub fn run_chains<T: Target>(target: &T, cfg: &SamplerConfig) -> Result<Vec<ChainOutput>, HierError> {
    if cfg.chains == 0 || cfg.draws == 0 {
        return Err(HierError::InvalidConfig(format!("{} chains x {} draws", cfg.chains, cfg.draws)));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains).map(|c| scope.spawn(move || run_chain(target, cfg, c))).collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread panicked")).collect()
    })
}
