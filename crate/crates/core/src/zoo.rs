//! Ready-made model families with closed-form facts that are verified when
//! an entry is built.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{self, ManifoldOptions};
use crate::math;
use crate::model::{scalar, sized, unit_clutch, vector, ClutchRate, DeathRate, ModelSpec, QuasiNeutral};

/// Residual of a fact at one grid point.
pub type FactCheck = Arc<dyn Fn(&ModelSpec, &[f64]) -> Result<f64> + Send + Sync>;

/// A closed-form statement about a model with the tolerance it is held to.
#[derive(Clone, Serialize)]
pub struct KnownFact {
    pub name: String,
    pub statement: String,
    pub tolerance: f64,
    #[serde(skip)]
    pub check: FactCheck,
}

impl fmt::Debug for KnownFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnownFact")
            .field("name", &self.name)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

/// Worst residual of one fact over the registration grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactOutcome {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZooEntry {
    pub name: String,
    /// Parameter echo.
    pub params: Vec<(String, Vec<f64>)>,
    #[serde(skip)]
    pub spec: ModelSpec,
    pub known_facts: Vec<KnownFact>,
    /// Grid the facts are checked on.
    pub grid: Vec<Vec<f64>>,
}

/// Number of registration grid points.
pub const GRID_POINTS: usize = 50;

impl ZooEntry {
    pub fn check_facts(&self) -> Vec<FactOutcome> {
        self.known_facts
            .iter()
            .map(|fact| {
                let worst = self.grid.iter().fold(0.0f64, |w, p| match (fact.check)(&self.spec, p) {
                    Ok(r) if r.is_finite() => w.max(r),
                    _ => f64::INFINITY,
                });
                FactOutcome { name: fact.name.clone(), worst, tolerance: fact.tolerance, pass: worst <= fact.tolerance }
            })
            .collect()
    }

    fn registered(self) -> Result<Self> {
        if let Some(bad) = self.check_facts().into_iter().find(|o| !o.pass) {
            return Err(Error::InvalidModel(format!(
                "{}: fact {} fails (worst {:e} > {:e})",
                self.name, bad.name, bad.worst, bad.tolerance
            )));
        }
        Ok(self)
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic low-discrepancy points `x = s·n_e(ρ)·ρ` with `ρ` in the
/// interior of the simplex and `s ∈ [0.3, 1.7]`.
pub fn manifold_grid(model: &ModelSpec, count: usize) -> Result<Vec<Vec<f64>>> {
    let k = model.k;
    (1..=count)
        .map(|n| {
            let mut rho: Vec<f64> = (0..k).map(|i| 0.1 + radical_inverse(n, PRIMES[i % 12])).collect();
            let s: f64 = rho.iter().sum();
            rho.iter_mut().for_each(|v| *v /= s);
            let scale = 0.3 + 1.4 * radical_inverse(n, PRIMES[k % 12]);
            let ne = manifold::effective_density(model, &rho)?;
            Ok(rho.iter().map(|v| v * scale * ne).collect())
        })
        .collect()
}

/// Deterministic points filling the domain box.
pub fn box_grid(model: &ModelSpec, count: usize) -> Vec<Vec<f64>> {
    (1..=count)
        .map(|n| {
            model
                .domain
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| {
                    let hi = if hi.is_finite() { hi } else { lo + 10.0 };
                    lo + (hi - lo) * radical_inverse(n, PRIMES[i % 12])
                })
                .collect()
        })
        .collect()
}

fn fact(
    name: &str,
    statement: impl Into<String>,
    tolerance: f64,
    check: impl Fn(&ModelSpec, &[f64]) -> Result<f64> + Send + Sync + 'static,
) -> KnownFact {
    KnownFact { name: name.into(), statement: statement.into(), tolerance, check: Arc::new(check) }
}

fn on_omega_radial(model: &ModelSpec, x: &[f64]) -> Result<Vec<f64>> {
    let rho = manifold::radial_projection(x)?.rho;
    let ne = manifold::effective_density(model, &rho)?;
    Ok(rho.iter().map(|v| v * ne).collect())
}

/// Logistic competition among `k` identical types: clutch `m·e_i` at rate
/// `b/m`, death rate `b·Σx`, and mutation to each other type at rate
/// `θ·b/N`.
pub fn neutral_logistic(k: usize, b: f64, theta: f64) -> Result<ZooEntry> {
    neutral_logistic_with_clutch(k, b, theta, 1)
}

pub fn neutral_logistic_with_clutch(k: usize, b: f64, theta: f64, clutch: u32) -> Result<ZooEntry> {
    if k == 0 || !(b > 0.0) || !(theta >= 0.0) || clutch == 0 {
        return Err(Error::InvalidArgument("neutral_logistic needs K >= 1, b > 0, theta >= 0, m >= 1".into()));
    }
    let m = f64::from(clutch);
    let mut builder = ModelSpec::builder(format!("neutral_logistic(K={k},b={b},theta={theta},m={clutch})"), k);
    for i in 0..k {
        builder = builder.clutch(ClutchRate::new(i, unit_clutch(k, i, clutch), scalar(move |_| b / m)));
    }
    if theta > 0.0 {
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                builder = builder.clutch(
                    ClutchRate::new(i, unit_clutch(k, j, 1), scalar(|_| 0.0))
                        .with_finite_size(sized(move |_, n| theta * b / n)),
                );
            }
        }
        let sig = (k as f64 - 1.0) * theta * b;
        builder = builder
            .sigma(vector(move |_, o| o.fill(sig)))
            .theta(vector(move |_, o| {
                for (idx, v) in o.iter_mut().enumerate() {
                    *v = if idx / k == idx % k { 0.0 } else { theta };
                }
            }));
    }
    for _ in 0..k {
        builder = builder.death(DeathRate::new(scalar(move |x| b * x.iter().sum::<f64>())));
    }
    let spec = builder
        .rate_kernel(Arc::new(move |x: &[f64], n: f64, birth: &mut [f64], death: &mut [f64]| {
            let (same, off) = birth.split_at_mut(k);
            for v in same {
                *v = b / m;
            }
            for v in off {
                *v = theta * b / n;
            }
            let d = b * x.iter().sum::<f64>();
            for v in death {
                *v = d;
            }
        }))
        .growth_jacobian(vector(move |_, o| o.fill(-b)))
        .quasi_neutral(QuasiNeutral {
            gamma: vector(move |_, o| o.fill(b)),
            r: scalar(|x| 1.0 - x.iter().sum::<f64>()),
            grad_r: Some(vector(|_, o| o.fill(-1.0))),
            jac_gamma: Some(vector(|_, o| o.fill(0.0))),
        })
        .domain_box(vec![(0.0, 4.0); k])
        .build()?;
    let opts = ManifoldOptions::default();
    let known_facts = vec![
        fact("omega_unit_simplex", "Omega = {sum x = 1}", 1e-14, |m, x| {
            let s: f64 = x.iter().sum();
            let on: Vec<f64> = x.iter().map(|v| v / s).collect();
            Ok(math::abs(m.r(&on)?).max(math::abs(m.r(x)? - (1.0 - s))))
        }),
        fact("tau_log", format!("tau(x) = -ln(sum x)/{b}"), 1e-6, move |m, x| {
            let s: f64 = x.iter().sum();
            Ok(math::abs(manifold::project_and_time(m, x, &opts)?.tau + math::ln(s) / b))
        }),
        fact("pi_radial", "pi(x) = x / sum x", 1e-8, move |m, x| {
            let s: f64 = x.iter().sum();
            let p = manifold::project_and_time(m, x, &opts)?.pi;
            Ok(p.iter().zip(x).fold(0.0f64, |w, (a, v)| w.max(math::abs(a - v / s))))
        }),
        fact("lambda_on_omega", format!("lambda = -{b} on Omega"), 1e-10, move |m, x| {
            Ok(math::abs(manifold::lambda(m, &on_omega_radial(m, x)?)? + b))
        }),
        fact("n_e_one", "n_e = 1", 1e-12, |m, x| {
            let rho = manifold::radial_projection(x)?.rho;
            Ok(math::abs(manifold::effective_density(m, &rho)? - 1.0))
        }),
    ];
    let grid = manifold_grid(&spec, GRID_POINTS)?;
    ZooEntry {
        name: "neutral_logistic".into(),
        params: vec![
            ("K".into(), vec![k as f64]),
            ("b".into(), vec![b]),
            ("theta".into(), vec![theta]),
            ("clutch".into(), vec![m]),
        ],
        spec,
        known_facts,
        grid,
    }
    .registered()
}

/// The two-type neutral logistic model with `b = 1` and no mutation.
pub fn e1() -> ZooEntry {
    neutral_logistic(2, 1.0, 0.0).expect("E1 registration")
}

/// Competitive Lotka–Volterra: clutch `e_i` at rate `b_i`, death rate
/// `d_i + (A x)_i`.
///
/// With `quasi_neutral` the rows of `A` must be proportional to the net
/// rates, `A = r·cᵀ` with `r = b − d`; then `γ = r` and `R = 1 − c·x`.
pub fn gause_lotka_volterra(b: &[f64], a: &[f64], d: &[f64], quasi_neutral: bool) -> Result<ZooEntry> {
    let k = b.len();
    if k == 0 || d.len() != k || a.len() != k * k {
        return Err(Error::InvalidArgument("dimension mismatch in b, A, d".into()));
    }
    if a.iter().any(|&v| !(v >= 0.0)) || (0..k).any(|i| !(a[i * k + i] > 0.0)) {
        return Err(Error::InvalidModel("A must be entrywise non-negative with positive diagonal".into()));
    }
    if b.iter().zip(d).any(|(bi, di)| !(bi > di) || !(*di >= 0.0)) {
        return Err(Error::InvalidModel("need b_i > d_i >= 0".into()));
    }
    let r: Vec<f64> = b.iter().zip(d).map(|(x, y)| x - y).collect();
    let c: Vec<f64> = (0..k).map(|j| a[j] / r[0]).collect();
    let qn = if quasi_neutral {
        for i in 0..k {
            for j in 0..k {
                let want = r[i] * c[j];
                let got = a[i * k + j];
                if math::abs(got - want) > 1e-12 * got.abs().max(1.0) {
                    return Err(Error::QuasiNeutralMismatch { index: i * k + j, lhs: got, rhs: want });
                }
            }
        }
        let (rg, cr, cg) = (r.clone(), c.clone(), c.clone());
        Some(QuasiNeutral {
            gamma: vector(move |_, o| o.copy_from_slice(&rg)),
            r: scalar(move |x| 1.0 - math::dot(&cr, x)),
            grad_r: Some(vector(move |_, o| {
                for (oi, ci) in o.iter_mut().zip(&cg) {
                    *oi = -ci;
                }
            })),
            jac_gamma: Some(vector(|_, o| o.fill(0.0))),
        })
    } else {
        None
    };
    let mut builder = ModelSpec::builder(format!("gause_lotka_volterra(b={b:?},A={a:?},d={d:?})"), k);
    for i in 0..k {
        let bi = b[i];
        builder = builder.clutch(ClutchRate::new(i, unit_clutch(k, i, 1), scalar(move |_| bi)));
    }
    for i in 0..k {
        let di = d[i];
        let row: Vec<f64> = a[i * k..(i + 1) * k].to_vec();
        builder = builder.death(DeathRate::new(scalar(move |x| di + math::dot(&row, x))));
    }
    let (bk, dk, ak) = (b.to_vec(), d.to_vec(), a.to_vec());
    builder = builder.rate_kernel(Arc::new(move |x: &[f64], _n: f64, birth: &mut [f64], death: &mut [f64]| {
        birth.copy_from_slice(&bk);
        for i in 0..k {
            death[i] = dk[i] + math::dot(&ak[i * k..(i + 1) * k], x);
        }
    }));
    let am = a.to_vec();
    builder = builder.growth_jacobian(vector(move |_, o| {
        for (oi, ai) in o.iter_mut().zip(&am) {
            *oi = -ai;
        }
    }));
    if let Some(q) = qn {
        builder = builder.quasi_neutral(q);
    }
    let domain: Vec<(f64, f64)> = (0..k).map(|i| (0.0, 4.0 * b[i] / a[i * k + i])).collect();
    let spec = builder.domain_box(domain).build()?;

    let am = a.to_vec();
    let mut known_facts = vec![fact("competitive", "d_j(beta_i - delta_i) = -A_ij <= 0", 1e-12, move |m, x| {
        let mut j = vec![0.0; k * k];
        m.growth_jacobian_at(x, &mut j);
        Ok(j.iter().zip(&am).fold(0.0f64, |w, (g, a)| w.max(math::abs(g + a))))
    })];
    let grid = if quasi_neutral {
        let (c1, c2, c3, r3) = (c.clone(), c.clone(), c.clone(), r.clone());
        known_facts.push(fact("omega_level_set", "Omega = {c.x = 1}", 1e-12, move |m, x| {
            let s = math::dot(&c1, x);
            let on: Vec<f64> = x.iter().map(|v| v / s).collect();
            Ok(math::abs(m.r(&on)?))
        }));
        known_facts.push(fact("lambda_on_omega", "lambda = -sum_j c_j r_j x_j on Omega", 1e-10, move |m, x| {
            let s = math::dot(&c2, x);
            let on: Vec<f64> = x.iter().map(|v| v / s).collect();
            let want: f64 = -(0..k).map(|j| c2[j] * r3[j] * on[j]).sum::<f64>();
            Ok(math::abs(manifold::lambda(m, &on)? - want))
        }));
        known_facts.push(fact("n_e", "n_e(p) = 1/(c.p)", 1e-12, move |m, x| {
            let rho = manifold::radial_projection(x)?.rho;
            Ok(math::abs(manifold::effective_density(m, &rho)? - 1.0 / math::dot(&c3, &rho)))
        }));
        if r.iter().all(|&v| v == r[0]) {
            let (c4, c5, r0) = (c.clone(), c.clone(), r[0]);
            let opts = ManifoldOptions::default();
            known_facts.push(fact("tau_log", "tau(x) = -ln(c.x)/r", 1e-6, move |m, x| {
                Ok(math::abs(manifold::project_and_time(m, x, &opts)?.tau + math::ln(math::dot(&c4, x)) / r0))
            }));
            known_facts.push(fact("pi_scaled", "pi(x) = x/(c.x)", 1e-8, move |m, x| {
                let s = math::dot(&c5, x);
                let p = manifold::project_and_time(m, x, &opts)?.pi;
                Ok(p.iter().zip(x).fold(0.0f64, |w, (a, v)| w.max(math::abs(a - v / s))))
            }));
        }
        manifold_grid(&spec, GRID_POINTS)?
    } else {
        box_grid(&spec, GRID_POINTS)
    };
    ZooEntry {
        name: "gause_lotka_volterra".into(),
        params: vec![("b".into(), b.to_vec()), ("A".into(), a.to_vec()), ("d".into(), d.to_vec())],
        spec,
        known_facts,
        grid,
    }
    .registered()
}

/// Tolerance on the common resource level of [`double_monod`].
pub const COMMON_ROOT_TOL: f64 = 1e-10;

/// Two consumers on the eliminated resource `S(x) = 1 − y(x₁ + x₂)`:
/// clutch `e_i` at rate `b_i S/(h_i + S)` (zero when `S ≤ 0`), death rate `d`.
/// Both net rates must vanish at the same `S* = d h_i/(b_i − d)`.
pub fn double_monod(b: [f64; 2], h: [f64; 2], y: f64, d: f64) -> Result<ZooEntry> {
    if !(y > 0.0) || !(d > 0.0) || h.iter().any(|v| !(*v > 0.0)) || b.iter().any(|v| !(*v > d)) {
        return Err(Error::InvalidModel("need y > 0, d > 0, h_i > 0, b_i > d".into()));
    }
    let s1 = d * h[0] / (b[0] - d);
    let s2 = d * h[1] / (b[1] - d);
    if math::abs(s1 - s2) > COMMON_ROOT_TOL {
        return Err(Error::NoCommonRoot { s1, s2 });
    }
    let ss = 0.5 * (s1 + s2);
    if !(ss < 1.0) {
        return Err(Error::InvalidModel(format!("S* = {ss} leaves no positive equilibrium")));
    }
    let res = move |x: &[f64]| 1.0 - y * (x[0] + x[1]);
    let gamma_i = move |i: usize, s: f64| {
        if s >= 0.0 {
            (1.0 - ss) * b[i] * h[i] / ((h[i] + s) * (h[i] + ss))
        } else {
            d * (1.0 - ss) / (ss - s)
        }
    };
    let dgamma_ds = move |i: usize, s: f64| {
        if s >= 0.0 {
            -(1.0 - ss) * b[i] * h[i] / ((h[i] + s) * (h[i] + s) * (h[i] + ss))
        } else {
            d * (1.0 - ss) / ((ss - s) * (ss - s))
        }
    };
    let mut builder = ModelSpec::builder(format!("double_monod(b={b:?},h={h:?},y={y},d={d})"), 2);
    for i in 0..2 {
        builder = builder.clutch(ClutchRate::new(
            i,
            unit_clutch(2, i, 1),
            scalar(move |x| {
                let s = res(x).max(0.0);
                b[i] * s / (h[i] + s)
            }),
        ));
    }
    let spec = builder
        .death(DeathRate::new(scalar(move |_| d)))
        .death(DeathRate::new(scalar(move |_| d)))
        .rate_kernel(Arc::new(move |x: &[f64], _n: f64, birth: &mut [f64], death: &mut [f64]| {
            let s = res(x).max(0.0);
            birth[0] = b[0] * s / (h[0] + s);
            birth[1] = b[1] * s / (h[1] + s);
            death.fill(d);
        }))
        .growth_jacobian(vector(move |x, o| {
            let s = res(x);
            for i in 0..2 {
                let v = if s > 0.0 { -y * b[i] * h[i] / ((h[i] + s) * (h[i] + s)) } else { 0.0 };
                o[2 * i] = v;
                o[2 * i + 1] = v;
            }
        }))
        .quasi_neutral(QuasiNeutral {
            gamma: vector(move |x, o| {
                let s = res(x);
                o[0] = gamma_i(0, s);
                o[1] = gamma_i(1, s);
            }),
            r: scalar(move |x| (res(x) - ss) / (1.0 - ss)),
            grad_r: Some(vector(move |_, o| o.fill(-y / (1.0 - ss)))),
            jac_gamma: Some(vector(move |x, o| {
                let s = res(x);
                for i in 0..2 {
                    let v = -y * dgamma_ds(i, s);
                    o[2 * i] = v;
                    o[2 * i + 1] = v;
                }
            })),
        })
        .domain_box(vec![(0.0, 2.0 / y); 2])
        .build()?;
    let ne = (1.0 - ss) / y;
    let known_facts = vec![
        fact("omega_level_set", format!("Omega = {{x1 + x2 = {ne}}}"), 1e-12, move |m, x| {
            let s = x[0] + x[1];
            Ok(math::abs(m.r(&[x[0] * ne / s, x[1] * ne / s])?))
        }),
        fact("n_e", format!("n_e = (1 - S*)/y = {ne}"), 1e-12, move |m, x| {
            let rho = manifold::radial_projection(x)?.rho;
            Ok(math::abs(manifold::effective_density(m, &rho)? - ne))
        }),
        fact("lambda_negative", "lambda < 0 on Omega", 0.0, |m, x| {
            Ok(manifold::lambda(m, &on_omega_radial(m, x)?)?.max(0.0))
        }),
    ];
    let grid = manifold_grid(&spec, GRID_POINTS)?;
    ZooEntry {
        name: "double_monod".into(),
        params: vec![
            ("b".into(), b.to_vec()),
            ("h".into(), h.to_vec()),
            ("y".into(), vec![y]),
            ("d".into(), vec![d]),
        ],
        spec,
        known_facts,
        grid,
    }
    .registered()
}

/// Parameter of a zoo family.
#[derive(Debug, Clone, Serialize)]
pub struct ParamSchema {
    pub name: &'static str,
    pub kind: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySchema {
    pub name: &'static str,
    pub doc: &'static str,
    pub params: Vec<ParamSchema>,
}

pub fn families() -> Vec<FamilySchema> {
    let p = |name, kind, default, doc| ParamSchema { name, kind, default, doc };
    vec![
        FamilySchema {
            name: "neutral_logistic",
            doc: "identical logistic types; quasi-neutral with R = 1 - sum x",
            params: vec![
                p("K", "integer", "2", "number of types"),
                p("b", "real", "1", "birth rate"),
                p("theta", "real", "0", "rescaled mutation rate"),
                p("clutch", "integer", "1", "clutch size m (rate b/m)"),
            ],
        },
        FamilySchema {
            name: "gause_lotka_volterra",
            doc: "competitive Lotka-Volterra; quasi-neutral when A = (b - d) c^T",
            params: vec![
                p("b", "vector", "1.5;2.5", "birth rates"),
                p("A", "matrix (row-major)", "1;0.5;2;1", "competition coefficients"),
                p("d", "vector", "0.5;0.5", "intrinsic death rates"),
                p("qn", "bool", "1", "require the quasi-neutral factorisation"),
            ],
        },
        FamilySchema {
            name: "double_monod",
            doc: "two Monod consumers on an eliminated resource S = 1 - y(x1 + x2)",
            params: vec![
                p("b", "vector", "2;3", "maximal birth rates"),
                p("h", "vector", "0.5;1", "half-saturation constants"),
                p("y", "real", "1", "yield"),
                p("d", "real", "1", "death rate"),
            ],
        },
    ]
}

/// Default asymmetric quasi-neutral Lotka–Volterra instance.
pub fn lv_asymmetric() -> ZooEntry {
    gause_lotka_volterra(&[1.5, 2.5], &[1.0, 0.5, 2.0, 1.0], &[0.5, 0.5], true).expect("LV registration")
}

/// Default asymmetric double Monod instance (`S* = 1/2`).
pub fn double_monod_default() -> ZooEntry {
    double_monod([2.0, 3.0], [0.5, 1.0], 1.0, 1.0).expect("double Monod registration")
}

/// Builds a family by name from `(key, values)` pairs, filling defaults.
pub fn build(name: &str, params: &[(String, Vec<f64>)]) -> Result<ZooEntry> {
    let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let scalar_or = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            None => Ok(default),
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(Error::InvalidArgument(format!("{key} must be a scalar"))),
        }
    };
    let known: &[&str] = match name {
        "neutral_logistic" => &["K", "b", "theta", "clutch"],
        "gause_lotka_volterra" => &["b", "A", "d", "qn"],
        "double_monod" => &["b", "h", "y", "d"],
        _ => return Err(Error::InvalidArgument(format!("unknown model family {name}"))),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("unknown parameter {k} for {name}")));
    }
    match name {
        "neutral_logistic" => {
            let k = scalar_or("K", 2.0)?;
            let m = scalar_or("clutch", 1.0)?;
            if k < 1.0 || math::floor(k) != k || m < 1.0 || math::floor(m) != m {
                return Err(Error::InvalidArgument("K and clutch must be positive integers".into()));
            }
            neutral_logistic_with_clutch(k as usize, scalar_or("b", 1.0)?, scalar_or("theta", 0.0)?, m as u32)
        }
        "gause_lotka_volterra" => {
            let b = get("b").unwrap_or_else(|| vec![1.5, 2.5]);
            let a = get("A").unwrap_or_else(|| vec![1.0, 0.5, 2.0, 1.0]);
            let d = get("d").unwrap_or_else(|| vec![0.5, 0.5]);
            gause_lotka_volterra(&b, &a, &d, scalar_or("qn", 1.0)? != 0.0)
        }
        _ => {
            let two = |key: &str, default: [f64; 2]| -> Result<[f64; 2]> {
                match get(key) {
                    None => Ok(default),
                    Some(v) if v.len() == 2 => Ok([v[0], v[1]]),
                    Some(_) => Err(Error::InvalidArgument(format!("{key} must have 2 entries"))),
                }
            };
            double_monod(two("b", [2.0, 3.0])?, two("h", [0.5, 1.0])?, scalar_or("y", 1.0)?, scalar_or("d", 1.0)?)
        }
    }
}

impl ZooEntry {
    /// Short human-readable label.
    pub fn label(&self) -> String {
        self.spec.name.to_string()
    }
}
