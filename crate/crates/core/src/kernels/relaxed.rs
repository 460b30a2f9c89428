use ndarray::{Array1, Array2, ArrayView1};

use super::mask::RelaxedMask;
use super::wl::{WlDictionary, WlLabel};
use crate::scalar::Scalar;

/// Smooth indicator of `x == 0` on integer-valued inputs: `(1 - x^2)^2`
/// inside (-1, 1), zero outside.
#[inline]
fn bump<T: Scalar>(x: T) -> T {
    if x.abs() < T::one() {
        let s = T::one() - x * x;
        s * s
    } else {
        T::zero()
    }
}

#[inline]
fn bump_grad<T: Scalar>(x: T) -> T {
    if x.abs() < T::one() {
        T::of(-4.0) * x * (T::one() - x * x)
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone)]
struct Rule {
    own: usize,
    support: Vec<(usize, f64)>,
    degree: f64,
}

/// Dictionary labels arranged by depth, for evaluating soft WL label
/// memberships of relaxed mask samples.
///
/// A mask node's soft membership in a refined label is the membership of its
/// previous label times a bump of the difference between its soft neighbour
/// counts and the label's multiset, one bump per distinct neighbour label and
/// one for the total degree. At 0/1 weights this is exactly the WL indicator,
/// so the soft histogram equals the hard one restricted to known labels.
#[derive(Debug, Clone)]
pub struct RelaxedWlPlan {
    depth: usize,
    alphabet: usize,
    label_count: usize,
    levels: Vec<Vec<u32>>,
    base: Vec<u32>,
    rules: Vec<Vec<Rule>>,
}

/// Intermediate values of one relaxed forward pass.
#[derive(Debug, Clone)]
pub struct RelaxedForward<T: Scalar> {
    /// `m[h]` is `nodes × labels-at-depth-h`.
    m: Vec<Array2<T>>,
    chat: Vec<Array2<T>>,
    deg: Array1<T>,
    /// Soft histogram indexed by global dictionary id.
    pub mu: Array1<T>,
}

impl RelaxedWlPlan {
    pub fn new(dict: &WlDictionary, depth: usize, alphabet: usize) -> Self {
        let mut levels = vec![Vec::new(); depth + 1];
        let mut local = vec![usize::MAX; dict.len()];
        for id in 0..dict.len() as u32 {
            let (h, _) = dict.label(id);
            if h <= depth {
                local[id as usize] = levels[h].len();
                levels[h].push(id);
            }
        }
        let base = levels[0]
            .iter()
            .map(|&id| match dict.label(id).1 {
                WlLabel::Base(x) => *x,
                WlLabel::Refined { .. } => unreachable!("depth-0 labels are raw"),
            })
            .collect();
        let mut rules = vec![Vec::new()];
        for level in levels.iter().skip(1) {
            rules.push(
                level
                    .iter()
                    .map(|&id| match dict.label(id).1 {
                        WlLabel::Refined { own, neighbors } => {
                            let mut support: Vec<(usize, f64)> = Vec::new();
                            for &n in neighbors {
                                let l = local[n as usize];
                                match support.last_mut() {
                                    Some((last, c)) if *last == l => *c += 1.0,
                                    _ => support.push((l, 1.0)),
                                }
                            }
                            Rule {
                                own: local[*own as usize],
                                support,
                                degree: neighbors.len() as f64,
                            }
                        }
                        WlLabel::Base(_) => unreachable!("refined labels sit above depth 0"),
                    })
                    .collect(),
            );
        }
        Self {
            depth,
            alphabet,
            label_count: dict.len(),
            levels,
            base,
            rules,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Length of the soft histogram (the dictionary size).
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    fn rule_factors<T: Scalar>(
        rule: &Rule,
        prev: &Array2<T>,
        chat: &Array2<T>,
        deg: T,
        i: usize,
        out: &mut Vec<(T, T)>,
    ) {
        out.clear();
        out.push((prev[[i, rule.own]], T::zero()));
        for &(l, c) in &rule.support {
            let x = chat[[i, l]] - T::of(c);
            out.push((bump(x), x));
        }
        let x = deg - T::of(rule.degree);
        out.push((bump(x), x));
    }

    pub fn forward<T: Scalar>(&self, r: &RelaxedMask<T>) -> RelaxedForward<T> {
        let n = r.y.nrows();
        let deg = r.omega.sum_axis(ndarray::Axis(1));
        let mut m0 = Array2::zeros((n, self.levels[0].len()));
        for (l, &b) in self.base.iter().enumerate() {
            if (b as usize) < self.alphabet {
                m0.column_mut(l).assign(&r.y.column(b as usize));
            }
        }
        let mut m = vec![m0];
        let mut chat = vec![Array2::zeros((0, 0))];
        let mut factors = Vec::new();
        for h in 1..=self.depth {
            let prev = &m[h - 1];
            let c = r.omega.dot(prev);
            let mut cur = Array2::zeros((n, self.levels[h].len()));
            for (l, rule) in self.rules[h].iter().enumerate() {
                for i in 0..n {
                    Self::rule_factors(rule, prev, &c, deg[i], i, &mut factors);
                    cur[[i, l]] = factors.iter().fold(T::one(), |acc, f| acc * f.0);
                }
            }
            chat.push(c);
            m.push(cur);
        }
        let mut mu = Array1::zeros(self.label_count);
        for (h, level) in self.levels.iter().enumerate() {
            let sums = m[h].sum_axis(ndarray::Axis(0));
            for (l, &id) in level.iter().enumerate() {
                mu[id as usize] = sums[l];
            }
        }
        RelaxedForward { m, chat, deg, mu }
    }

    /// Gradient of `Σ_ℓ d_mu[ℓ] · mu[ℓ]` with respect to the relaxed weights.
    pub fn backward<T: Scalar>(
        &self,
        r: &RelaxedMask<T>,
        fwd: &RelaxedForward<T>,
        d_mu: ArrayView1<T>,
    ) -> (Array2<T>, Array2<T>) {
        let n = r.y.nrows();
        let upstream = |h: usize| -> Array2<T> {
            let mut g = Array2::zeros((n, self.levels[h].len()));
            for (l, &id) in self.levels[h].iter().enumerate() {
                g.column_mut(l).fill(d_mu[id as usize]);
            }
            g
        };
        let mut d_omega = Array2::zeros((n, n));
        let mut g_cur = upstream(self.depth);
        let mut factors = Vec::new();
        let mut prefix = Vec::new();
        for h in (1..=self.depth).rev() {
            let prev = &fwd.m[h - 1];
            let chat = &fwd.chat[h];
            let mut g_prev = upstream(h - 1);
            let mut d_chat = Array2::zeros(chat.raw_dim());
            let mut d_deg = Array1::<T>::zeros(n);
            for (l, rule) in self.rules[h].iter().enumerate() {
                for i in 0..n {
                    let g = g_cur[[i, l]];
                    if g == T::zero() {
                        continue;
                    }
                    Self::rule_factors(rule, prev, chat, fwd.deg[i], i, &mut factors);
                    prefix.clear();
                    let mut acc = T::one();
                    for f in &factors {
                        prefix.push(acc);
                        acc = acc * f.0;
                    }
                    let mut suffix = T::one();
                    for k in (0..factors.len()).rev() {
                        let others = g * prefix[k] * suffix;
                        suffix = suffix * factors[k].0;
                        if k == 0 {
                            g_prev[[i, rule.own]] += others;
                        } else if k == factors.len() - 1 {
                            d_deg[i] += others * bump_grad(factors[k].1);
                        } else {
                            d_chat[[i, rule.support[k - 1].0]] += others * bump_grad(factors[k].1);
                        }
                    }
                }
            }
            d_omega = d_omega + d_chat.dot(&prev.t());
            g_prev = g_prev + r.omega.t().dot(&d_chat);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        d_omega[[i, j]] += d_deg[i];
                    }
                }
            }
            g_cur = g_prev;
        }
        let mut d_y = Array2::zeros(r.y.raw_dim());
        for (l, &b) in self.base.iter().enumerate() {
            if (b as usize) < self.alphabet {
                let mut col = d_y.column_mut(b as usize);
                col += &g_cur.column(l);
            }
        }
        (d_omega, d_y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::kernels::mask::{relax, sample_noise, StructuralMask};
    use crate::kernels::wl::{frozen_histogram, wl_refine, wl_refine_frozen};
    use crate::rng;
    use rand::Rng;

    fn data_dictionary(depth: usize) -> WlDictionary {
        let mut d = WlDictionary::new();
        let mut r = rng::stream(5, &[]);
        for k in 0..30 {
            let n = 3 + k % 5;
            let edges: Vec<_> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|_| r.random_bool(0.45))
                .collect();
            let labels = (0..n).map(|_| r.random_range(0..3)).collect();
            wl_refine(&mut d, &Graph::new(n, edges, labels).unwrap(), depth);
        }
        d
    }

    #[test]
    fn hard_weights_reproduce_the_wl_histogram() {
        let depth = 2;
        let dict = data_dictionary(depth);
        let plan = RelaxedWlPlan::new(&dict, depth, 3);
        let mut r = rng::stream(6, &[]);
        for _ in 0..50 {
            let mask = StructuralMask::<f64>::init(5, 3, &mut r);
            let relaxed = relax(&mask, &sample_noise(&mask, &mut r), 1.0).hardened();
            let mu = plan.forward(&relaxed).mu;
            let hist = frozen_histogram(&wl_refine_frozen(&dict, &relaxed.harden(), depth));
            for (id, &x) in mu.iter().enumerate() {
                let want = hist.get(&(id as u32)).copied().unwrap_or(0) as f64;
                assert!((x - want).abs() < 1e-12, "label {id}: {x} vs {want}");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let depth = 2;
        let dict = data_dictionary(depth);
        let plan = RelaxedWlPlan::new(&dict, depth, 3);
        let mut r = rng::stream(7, &[]);
        let weights = Array1::from_shape_simple_fn(dict.len(), || r.random_range(-1.0..1.0));
        for trial in 0..5 {
            let mut rel = {
                let mask = StructuralMask::<f64>::init(4, 3, &mut r);
                relax(&mask, &sample_noise(&mask, &mut r), 1.0)
            };
            // Push the sample close to integral values so the bumps are active.
            rel.y.mapv_inplace(|v| if v > 0.5 { 0.9 } else { v * 0.2 });
            rel.omega
                .mapv_inplace(|v| if v > 0.5 { 0.95 } else { v * 0.1 });
            let fwd = plan.forward(&rel);
            let (d_omega, d_y) = plan.backward(&rel, &fwd, weights.view());
            let f = |rr: &RelaxedMask<f64>| plan.forward(rr).mu.dot(&weights);
            let h = 1e-6;
            for i in 0..4 {
                for d in 0..3 {
                    let mut p = rel.clone();
                    p.y[[i, d]] += h;
                    let up = f(&p);
                    p.y[[i, d]] -= 2.0 * h;
                    let fd = (up - f(&p)) / (2.0 * h);
                    assert!(
                        (fd - d_y[[i, d]]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "trial {trial} y[{i},{d}]"
                    );
                }
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    let mut p = rel.clone();
                    p.omega[[i, j]] += h;
                    let up = f(&p);
                    p.omega[[i, j]] -= 2.0 * h;
                    let fd = (up - f(&p)) / (2.0 * h);
                    assert!(
                        (fd - d_omega[[i, j]]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "trial {trial} omega[{i},{j}]: {fd} vs {}",
                        d_omega[[i, j]]
                    );
                }
            }
        }
    }
}
