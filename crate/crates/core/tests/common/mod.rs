//! Fixtures and independent oracles shared by the integration tests and the
//! acceptance gate. Nothing here calls into the solvers.
#![allow(dead_code)]

use fdm_core::data::{generate_synthetic, Dataset, GeneratorSpec, Synthetic};
use fdm_core::geometry::{Bounds, WeightVector};
use fdm_core::problems::{ErmProblem, LassoBoxProblem, Loss, Problem, QuadraticProblem, SvmDualProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const SVM_LAMBDA: f64 = 0.1;

/// ½xᵀHx + cᵀx + constant on a box, as written down from the raw data.
#[derive(Debug, Clone)]
pub struct QuadForm {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Independent objective evaluators.
#[derive(Debug, Clone)]
pub enum Oracle {
    Quad(QuadForm),
    Logistic {
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        lambda: f64,
    },
}

impl Oracle {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Oracle::Quad(q) => q.value(x),
            Oracle::Logistic { rows, labels, lambda } => {
                let n = rows.len() as f64;
                let loss: f64 = rows
                    .iter()
                    .zip(labels)
                    .map(|(a, y)| {
                        let m = -y * a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
                        if m > 0.0 {
                            m + (-m).exp().ln_1p()
                        } else {
                            m.exp().ln_1p()
                        }
                    })
                    .sum();
                loss / n + 0.5 * lambda * x.iter().map(|v| v * v).sum::<f64>()
            }
        }
    }

    pub fn quad(&self) -> Option<&QuadForm> {
        match self {
            Oracle::Quad(q) => Some(q),
            Oracle::Logistic { .. } => None,
        }
    }

    /// (x*, f*): active-set enumeration for quadratics, zooming grid search
    /// otherwise (which needs a bounded search box).
    pub fn minimize(&self, search_box: (&[f64], &[f64])) -> (Vec<f64>, f64) {
        match self {
            Oracle::Quad(q) => q.kkt_minimize(),
            Oracle::Logistic { .. } => grid_minimize(|x| self.value(x), search_box.0, search_box.1),
        }
    }
}

impl QuadForm {
    pub fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.h * &x)) + self.c.dot(&x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        &self.h * DVector::from_column_slice(x) + &self.c
    }

    /// Exact minimizer by enumerating which finite bound (if any) each
    /// coordinate sits at, solving the free block and keeping the KKT points.
    pub fn kkt_minimize(&self) -> (Vec<f64>, f64) {
        let n = self.c.len();
        let scale = 1.0 + self.h.amax() + self.c.amax();
        let tol = 1e-9 * scale;
        let options: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                let mut o = vec![0u8];
                if self.lower[i].is_finite() {
                    o.push(1);
                }
                if self.upper[i].is_finite() {
                    o.push(2);
                }
                o
            })
            .collect();
        let total: usize = options.iter().map(Vec::len).product();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for code in 0..total {
            let mut rest = code;
            let mut state = vec![0u8; n];
            for i in 0..n {
                state[i] = options[i][rest % options[i].len()];
                rest /= options[i].len();
            }
            let Some(x) = self.solve_active(&state) else { continue };
            let g = self.gradient(&x);
            let ok = (0..n).all(|i| {
                let inside = x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol;
                inside
                    && match state[i] {
                        0 => g[i].abs() <= tol,
                        1 => g[i] >= -tol,
                        _ => g[i] <= tol,
                    }
            });
            if ok {
                let f = self.value(&x);
                if best.as_ref().is_none_or(|(_, b)| f < *b) {
                    best = Some((x, f));
                }
            }
        }
        best.expect("a convex quadratic bounded below has a KKT point")
    }

    fn solve_active(&self, state: &[u8]) -> Option<Vec<f64>> {
        let n = state.len();
        let mut x = vec![0.0; n];
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        for i in 0..n {
            match state[i] {
                1 => x[i] = self.lower[i],
                2 => x[i] = self.upper[i],
                _ => {}
            }
        }
        if free.is_empty() {
            return Some(x);
        }
        let hff = DMatrix::from_fn(free.len(), free.len(), |r, c| self.h[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| {
            let i = free[r];
            -self.c[i] - (0..n).filter(|j| state[*j] != 0).map(|j| self.h[(i, j)] * x[j]).sum::<f64>()
        });
        let sol = hff.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
        if (&hff * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            return None;
        }
        for (r, &i) in free.iter().enumerate() {
            x[i] = sol[r];
        }
        Some(x)
    }
}

/// Repeated grid search, shrinking the box around the best grid point.
pub fn grid_minimize(f: impl Fn(&[f64]) -> f64, lower: &[f64], upper: &[f64]) -> (Vec<f64>, f64) {
    const POINTS: usize = 21;
    let n = lower.len();
    assert!(n <= 3, "grid oracle is for at most three dimensions");
    let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
    let mut best = (lo.clone(), f(&lo));
    for _ in 0..60 {
        let total = POINTS.pow(n as u32);
        for code in 0..total {
            let mut rest = code;
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let t = (rest % POINTS) as f64 / (POINTS - 1) as f64;
                    rest /= POINTS;
                    lo[i] + t * (hi[i] - lo[i])
                })
                .collect();
            let v = f(&x);
            if v < best.1 {
                best = (x, v);
            }
        }
        for i in 0..n {
            let cell = (hi[i] - lo[i]) / (POINTS - 1) as f64;
            lo[i] = (best.0[i] - 2.0 * cell).max(lower[i]);
            hi[i] = (best.0[i] + 2.0 * cell).min(upper[i]);
        }
    }
    best
}

pub struct Fixture {
    pub name: &'static str,
    pub problem: Box<dyn Problem>,
    pub oracle: Oracle,
    /// Bounded box containing the solution, for grid search and sampling.
    pub search_box: (Vec<f64>, Vec<f64>),
}

impl Fixture {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn is_quadratic(&self) -> bool {
        self.oracle.quad().is_some()
    }

    pub fn l_weights(&self) -> WeightVector {
        WeightVector::new(self.problem.lipschitz().to_vec()).unwrap()
    }

    /// Uniform random point of the search box.
    pub fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.search_box
            .0
            .iter()
            .zip(&self.search_box.1)
            .map(|(l, u)| rng.random_range(*l..=*u))
            .collect()
    }

    pub fn solution(&self) -> (Vec<f64>, f64) {
        self.oracle.minimize((&self.search_box.0, &self.search_box.1))
    }
}

fn gaussian_rows(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn margin_data(n: usize, d: usize, seed: u64) -> Dataset {
    match generate_synthetic(&GeneratorSpec::GaussianMargin { n, d, seed, margin: 0.1 }).unwrap() {
        Synthetic::Dataset(mut data) => {
            data.normalize_rows();
            data
        }
        _ => unreachable!(),
    }
}

/// Toy SVM dual data with n examples in d = n + 2 features (so Q is nonsingular),
/// rows normalized to unit length.
pub fn svm_data(n: usize) -> Dataset {
    margin_data(n, n + 2, 7)
}

pub fn svm_fixture(n: usize) -> Fixture {
    let data = svm_data(n);
    let dense = data.dense();
    let scale = SVM_LAMBDA * (n * n) as f64;
    let h = DMatrix::from_fn(n, n, |i, j| {
        data.labels[i] * data.labels[j] * dense[i].iter().zip(&dense[j]).map(|(a, b)| a * b).sum::<f64>() / scale
    });
    let name = match n {
        2 => "svm-n2",
        4 => "svm-n4",
        8 => "svm-n8",
        _ => "svm",
    };
    Fixture {
        name,
        problem: Box::new(SvmDualProblem::new(&data, SVM_LAMBDA).unwrap()),
        oracle: Oracle::Quad(QuadForm {
            h,
            c: DVector::from_element(n, -1.0 / n as f64),
            constant: 0.0,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }),
        search_box: (vec![0.0; n], vec![1.0; n]),
    }
}

/// Lasso on the doubled variable z = [x⁺; x⁻] with A of size (p + 3) × p.
pub fn lasso_fixture(p: usize) -> Fixture {
    let m = p + 3;
    let a = gaussian_rows(m, p, 11);
    let b: Vec<f64> = gaussian_rows(1, m, 12).remove(0);
    let q = vec![0.0; p];
    let lambda = 0.1;
    // f(z) = ½‖ADz − b‖² + λ1ᵀz with D = [I, −I].
    let am = DMatrix::from_fn(m, p, |r, c| a[r][c]);
    let d = DMatrix::from_fn(p, 2 * p, |r, c| if c == r { 1.0 } else if c == r + p { -1.0 } else { 0.0 });
    let ad = &am * &d;
    let bv = DVector::from_column_slice(&b);
    let c = -(ad.transpose() * &bv) + DVector::from_element(2 * p, lambda);
    Fixture {
        name: if p == 1 { "lasso-d1" } else { "lasso-d5" },
        problem: Box::new(LassoBoxProblem::new(&a, b.clone(), q, lambda).unwrap()),
        oracle: Oracle::Quad(QuadForm {
            h: ad.transpose() * &ad,
            c,
            constant: 0.5 * bv.norm_squared(),
            lower: vec![0.0; 2 * p],
            upper: vec![f64::INFINITY; 2 * p],
        }),
        search_box: (vec![0.0; 2 * p], vec![5.0; 2 * p]),
    }
}

/// Logistic regression with `samples` normalized examples in `d` features.
pub fn logistic_fixture(samples: usize, d: usize) -> Fixture {
    let data = margin_data(samples, d, 5);
    let rows = data.dense();
    let lambda = 0.1;
    Fixture {
        name: if d == 2 { "logistic-d2" } else { "logistic-n20" },
        problem: Box::new(ErmProblem::new(&rows, data.labels.clone(), lambda, Loss::Logistic).unwrap()),
        oracle: Oracle::Logistic {
            rows,
            labels: data.labels.clone(),
            lambda,
        },
        search_box: (vec![-10.0; d], vec![10.0; d]),
    }
}

fn quad_fixture(name: &'static str, h: Vec<Vec<f64>>, c: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Fixture {
    let n = c.len();
    let hm = DMatrix::from_fn(n, n, |r, col| h[r][col]);
    let bounds = Bounds::new(lower.clone(), upper.clone()).unwrap();
    let search_box = (
        lower.iter().map(|l| if l.is_finite() { *l } else { -10.0 }).collect(),
        upper.iter().map(|u| if u.is_finite() { *u } else { 10.0 }).collect(),
    );
    Fixture {
        name,
        problem: Box::new(QuadraticProblem::new(h, c.clone(), bounds).unwrap()),
        oracle: Oracle::Quad(QuadForm {
            h: hm,
            c: DVector::from_column_slice(&c),
            constant: 0.0,
            lower,
            upper,
        }),
        search_box,
    }
}

/// ½xᵀdiag(1, 2, 3)x − 1ᵀx on [0, 1]³, from the synthetic generator.
pub fn diagonal_quadratic_fixture() -> Fixture {
    let Synthetic::Quadratic(p) = generate_synthetic(&GeneratorSpec::DiagonalQuadratic { n: 3 }).unwrap() else {
        unreachable!()
    };
    let n = 3;
    Fixture {
        name: "quad-diag3",
        problem: Box::new(p),
        oracle: Oracle::Quad(QuadForm {
            h: DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| (i + 1) as f64)),
            c: DVector::from_element(n, -1.0),
            constant: 0.0,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }),
        search_box: (vec![0.0; n], vec![1.0; n]),
    }
}

/// Coupled 2-D quadratic whose unconstrained minimizer leaves [0, 1]².
pub fn coupled_quadratic_fixture() -> Fixture {
    quad_fixture(
        "quad-coupled2",
        vec![vec![2.0, 1.0], vec![1.0, 2.0]],
        vec![-1.0, 0.5],
        vec![0.0; 2],
        vec![1.0; 2],
    )
}

/// Random positive definite 5-D quadratic on [−1, 1]⁵.
pub fn random_box_quadratic_fixture() -> Fixture {
    let n = 5;
    let b = gaussian_rows(n, n, 21);
    let bm = DMatrix::from_fn(n, n, |r, c| b[r][c]);
    let h = &bm * bm.transpose() + DMatrix::identity(n, n) * 0.1;
    let c = gaussian_rows(1, n, 22).remove(0).iter().map(|v| 2.0 * v).collect();
    let rows = (0..n).map(|r| (0..n).map(|col| h[(r, col)]).collect()).collect();
    quad_fixture("quad-box5", rows, c, vec![-1.0; n], vec![1.0; n])
}

/// ½(x₁ + x₂)² − x₁ − x₂ on ℝ²: minimizers form the line x₁ + x₂ = 1.
pub fn singular_quadratic_fixture() -> Fixture {
    quad_fixture(
        "quad-singular2",
        vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        vec![-1.0, -1.0],
        vec![f64::NEG_INFINITY; 2],
        vec![f64::INFINITY; 2],
    )
}

/// Every shipped fixture.
pub fn all_fixtures() -> Vec<Fixture> {
    vec![
        svm_fixture(2),
        svm_fixture(4),
        svm_fixture(8),
        lasso_fixture(1),
        lasso_fixture(5),
        logistic_fixture(10, 2),
        logistic_fixture(20, 20),
        diagonal_quadratic_fixture(),
        coupled_quadratic_fixture(),
        random_box_quadratic_fixture(),
        singular_quadratic_fixture(),
    ]
}

pub fn box_quadratic_fixtures() -> Vec<Fixture> {
    vec![
        diagonal_quadratic_fixture(),
        coupled_quadratic_fixture(),
        random_box_quadratic_fixture(),
    ]
}
