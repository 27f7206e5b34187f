//! Problem instances, periodic schedules, and their validation.
//!
//! An [`Instance`] is a set of `N` independent LTI plants sharing `M < N`
//! channels. A [`Schedule`] is one period of the binary allocation table
//! `alloc[i][slot]`, extended periodically in time.
//!
//! Both have a JSON file form ([`RawInstance`], [`RawSchedule`]) that stores
//! matrices as nested row-major arrays.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SYM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("plant {plant}: dimension mismatch in {matrix}: expected {expected}, found {found}")]
    DimensionMismatch {
        plant: usize,
        matrix: &'static str,
        expected: String,
        found: String,
    },
    #[error("plant {plant}: matrix {matrix} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric {
        plant: usize,
        matrix: &'static str,
        asymmetry: f64,
    },
    #[error("plant {plant}: matrix {matrix} is not {required} (min eigenvalue {min_eigenvalue:e})")]
    NotPsd {
        plant: usize,
        matrix: &'static str,
        required: &'static str,
        min_eigenvalue: f64,
    },
    #[error("plant {plant}: matrix {matrix} has a non-finite entry")]
    NonFinite { plant: usize, matrix: &'static str },
    #[error("channel count M={channels} must satisfy 1 <= M < N={plants}")]
    BadChannelCount { channels: i64, plants: usize },
    #[error("plant ids must be a permutation of 0..{plants}, got {ids:?}")]
    BadPlantIds { plants: usize, ids: Vec<usize> },
    #[error("schedule period must be at least 1")]
    EmptySchedule,
    #[error("schedule row {row} has length {found}, expected {expected}")]
    RowLengthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("schedule has {found} rows, instance has {expected} plants")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("schedule entry ({row}, {slot}) is {value}, expected 0 or 1")]
    NonBinaryEntry { row: usize, slot: usize, value: u8 },
    #[error("slot {slot} allocates {used} channels, expected exactly {channels}")]
    SlotBudgetViolation {
        slot: usize,
        used: usize,
        channels: usize,
    },
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// One subsystem: `x' = Ax + Bu + w`, `y = Cx + v`, with quadratic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub id: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub qf: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub x0_mean: DVector<f64>,
    pub x0_cov: DMatrix<f64>,
}

impl PlantSpec {
    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Scalar plant with every weight and covariance given explicitly.
    ///
    /// Handy for tests and small examples; `Qf = Q`, `x̄₀ = 0`, `X₀ = W`.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(a: f64, b: f64, c: f64, q: f64, r: f64, w: f64, v: f64) -> Self {
        let s = |x: f64| DMatrix::from_element(1, 1, x);
        PlantSpec {
            id: 0,
            a: s(a),
            b: s(b),
            c: s(c),
            q: s(q),
            qf: s(q),
            r: s(r),
            w: s(w),
            v: s(v),
            x0_mean: DVector::zeros(1),
            x0_cov: s(w),
        }
    }

    /// Checks dimensions and definiteness; symmetrizes the weight and
    /// covariance matrices in place.
    pub fn validate(mut self) -> Result<Self> {
        let (n, m, p) = (self.n(), self.m(), self.p());
        let id = self.id;
        let dim = |name: &'static str, mat: &DMatrix<f64>, r: usize, c: usize| {
            if mat.nrows() != r || mat.ncols() != c {
                Err(ModelError::DimensionMismatch {
                    plant: id,
                    matrix: name,
                    expected: format!("{r}x{c}"),
                    found: format!("{}x{}", mat.nrows(), mat.ncols()),
                })
            } else if mat.iter().any(|x| !x.is_finite()) {
                Err(ModelError::NonFinite {
                    plant: id,
                    matrix: name,
                })
            } else {
                Ok(())
            }
        };
        dim("A", &self.a, n, n)?;
        dim("B", &self.b, n, m)?;
        dim("C", &self.c, p, n)?;
        dim("Q", &self.q, n, n)?;
        dim("Qf", &self.qf, n, n)?;
        dim("R", &self.r, m, m)?;
        dim("W", &self.w, n, n)?;
        dim("V", &self.v, p, p)?;
        dim("X0", &self.x0_cov, n, n)?;
        if self.x0_mean.len() != n {
            return Err(ModelError::DimensionMismatch {
                plant: id,
                matrix: "x0_mean",
                expected: format!("{n}"),
                found: format!("{}", self.x0_mean.len()),
            });
        }
        if self.x0_mean.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite {
                plant: id,
                matrix: "x0_mean",
            });
        }

        self.q = check_definite(id, "Q", &self.q, Definiteness::SemiDefinite)?;
        self.qf = check_definite(id, "Qf", &self.qf, Definiteness::SemiDefinite)?;
        self.r = check_definite(id, "R", &self.r, Definiteness::Definite)?;
        self.w = check_definite(id, "W", &self.w, Definiteness::SemiDefinite)?;
        self.v = check_definite(id, "V", &self.v, Definiteness::Definite)?;
        self.x0_cov = check_definite(id, "X0", &self.x0_cov, Definiteness::SemiDefinite)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Definiteness {
    SemiDefinite,
    Definite,
}

/// `(X + Xᵀ)/2`.
pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn check_definite(
    plant: usize,
    name: &'static str,
    x: &DMatrix<f64>,
    kind: Definiteness,
) -> Result<DMatrix<f64>> {
    let scale = x.amax().max(1.0);
    let asym = (x - x.transpose()).amax();
    if asym > SYM_TOL * scale {
        return Err(ModelError::NotSymmetric {
            plant,
            matrix: name,
            asymmetry: asym,
        });
    }
    let sym = symmetrize(x);
    let lambda = min_eigenvalue(&sym);
    let ok = match kind {
        Definiteness::SemiDefinite => lambda >= -SYM_TOL * scale,
        Definiteness::Definite => lambda > 0.0,
    };
    if !ok {
        return Err(ModelError::NotPsd {
            plant,
            matrix: name,
            required: match kind {
                Definiteness::SemiDefinite => "positive semi-definite",
                Definiteness::Definite => "positive definite",
            },
            min_eigenvalue: lambda,
        });
    }
    Ok(sym)
}

/// `N` plants sharing `M` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    plants: Vec<PlantSpec>,
    channels: usize,
}

impl Instance {
    /// Validates every plant and the channel count. Plants are reordered by id.
    pub fn new(plants: Vec<PlantSpec>, channels: i64) -> Result<Self> {
        let n = plants.len();
        if channels < 1 || channels as u64 >= n as u64 {
            return Err(ModelError::BadChannelCount {
                channels,
                plants: n,
            });
        }
        let mut ids: Vec<usize> = plants.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(k, &id)| k != id) {
            return Err(ModelError::BadPlantIds {
                plants: n,
                ids: plants.iter().map(|p| p.id).collect(),
            });
        }
        let mut plants = plants
            .into_iter()
            .map(PlantSpec::validate)
            .collect::<Result<Vec<_>>>()?;
        plants.sort_by_key(|p| p.id);
        Ok(Instance {
            plants,
            channels: channels as usize,
        })
    }

    pub fn plants(&self) -> &[PlantSpec] {
        &self.plants
    }

    pub fn plant(&self, i: usize) -> &PlantSpec {
        &self.plants[i]
    }

    /// `N`.
    pub fn num_plants(&self) -> usize {
        self.plants.len()
    }

    /// `M`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn from_raw(raw: RawInstance) -> Result<Self> {
        let plants = raw
            .plants
            .into_iter()
            .enumerate()
            .map(|(k, rp)| rp.into_plant(k))
            .collect::<Result<Vec<_>>>()?;
        Instance::new(plants, raw.channels)
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            channels: self.channels as i64,
            plants: self.plants.iter().map(RawPlant::from_plant).collect(),
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, LoadError> {
        let raw: RawInstance = serde_json::from_str(text)?;
        Ok(Instance::from_raw(raw)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes");
        s.push('\n');
        s
    }
}

/// Error from reading an instance or schedule document.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

/// On-disk form of an instance.
///
/// ```json
/// { "channels": 1,
///   "plants": [ { "id": 0, "n": 2, "m": 1, "p": 1,
///                 "A": [[..],[..]], "B": [[..],[..]], "C": [[..]],
///                 "Q": .., "Qf": .., "R": .., "W": .., "V": ..,
///                 "x0_mean": [..], "X0": .. }, ... ] }
/// ```
///
/// `id` defaults to the position in the list and `Qf` defaults to `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub channels: i64,
    pub plants: Vec<RawPlant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPlant {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "Qf", default, skip_serializing_if = "Option::is_none")]
    pub qf: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    pub x0_mean: Vec<f64>,
    #[serde(rename = "X0")]
    pub x0_cov: Vec<Vec<f64>>,
}

fn rows_to_matrix(
    plant: usize,
    name: &'static str,
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>> {
    let shape_ok = rows.len() == nrows && rows.iter().all(|r| r.len() == ncols);
    if !shape_ok {
        let found = match rows.iter().map(Vec::len).min() {
            Some(c) if rows.iter().all(|r| r.len() == c) => format!("{}x{c}", rows.len()),
            Some(_) => format!("{} ragged rows", rows.len()),
            None => "0 rows".to_string(),
        };
        return Err(ModelError::DimensionMismatch {
            plant,
            matrix: name,
            expected: format!("{nrows}x{ncols}"),
            found,
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)]).collect())
        .collect()
}

impl RawPlant {
    fn into_plant(self, position: usize) -> Result<PlantSpec> {
        let id = self.id.unwrap_or(position);
        let (n, m, p) = (self.n, self.m, self.p);
        let q = rows_to_matrix(id, "Q", &self.q, n, n)?;
        let qf = match &self.qf {
            Some(rows) => rows_to_matrix(id, "Qf", rows, n, n)?,
            None => q.clone(),
        };
        if self.x0_mean.len() != n {
            return Err(ModelError::DimensionMismatch {
                plant: id,
                matrix: "x0_mean",
                expected: format!("{n}"),
                found: format!("{}", self.x0_mean.len()),
            });
        }
        Ok(PlantSpec {
            id,
            a: rows_to_matrix(id, "A", &self.a, n, n)?,
            b: rows_to_matrix(id, "B", &self.b, n, m)?,
            c: rows_to_matrix(id, "C", &self.c, p, n)?,
            q,
            qf,
            r: rows_to_matrix(id, "R", &self.r, m, m)?,
            w: rows_to_matrix(id, "W", &self.w, n, n)?,
            v: rows_to_matrix(id, "V", &self.v, p, p)?,
            x0_mean: DVector::from_vec(self.x0_mean),
            x0_cov: rows_to_matrix(id, "X0", &self.x0_cov, n, n)?,
        })
    }

    fn from_plant(p: &PlantSpec) -> Self {
        RawPlant {
            id: Some(p.id),
            n: p.n(),
            m: p.m(),
            p: p.p(),
            a: matrix_to_rows(&p.a),
            b: matrix_to_rows(&p.b),
            c: matrix_to_rows(&p.c),
            q: matrix_to_rows(&p.q),
            qf: Some(matrix_to_rows(&p.qf)),
            r: matrix_to_rows(&p.r),
            w: matrix_to_rows(&p.w),
            v: matrix_to_rows(&p.v),
            x0_mean: p.x0_mean.iter().copied().collect(),
            x0_cov: matrix_to_rows(&p.x0_cov),
        }
    }
}

/// One period of a periodic allocation table; `alloc[i][slot]` is true when
/// plant `i` transmits in that slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    alloc: Vec<Vec<bool>>,
    period: usize,
}

impl Schedule {
    pub fn new(alloc: Vec<Vec<bool>>) -> Result<Self> {
        let period = alloc.first().map_or(0, Vec::len);
        if period == 0 {
            return Err(ModelError::EmptySchedule);
        }
        if let Some((row, r)) = alloc.iter().enumerate().find(|(_, r)| r.len() != period) {
            return Err(ModelError::RowLengthMismatch {
                row,
                expected: period,
                found: r.len(),
            });
        }
        Ok(Schedule { alloc, period })
    }

    /// Builds a schedule from 0/1 rows.
    pub fn from_bits(rows: &[Vec<u8>]) -> Result<Self> {
        let mut alloc = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let mut row = Vec::with_capacity(r.len());
            for (slot, &v) in r.iter().enumerate() {
                match v {
                    0 => row.push(false),
                    1 => row.push(true),
                    value => {
                        return Err(ModelError::NonBinaryEntry {
                            row: i,
                            slot,
                            value,
                        })
                    }
                }
            }
            alloc.push(row);
        }
        Schedule::new(alloc)
    }

    /// `T₀`.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn num_rows(&self) -> usize {
        self.alloc.len()
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.alloc[i]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.alloc
    }

    /// `σ⁽ⁱ⁾_t` for any `t`, via `t mod T₀`.
    pub fn sigma(&self, i: usize, t: usize) -> bool {
        self.alloc[i][t % self.period]
    }

    /// Rotates every row left by `k` slots: the result at slot `m` is the
    /// original at slot `m + k`.
    pub fn shifted(&self, k: usize) -> Schedule {
        let alloc = self
            .alloc
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.rotate_left(k % self.period);
                r
            })
            .collect();
        Schedule {
            alloc,
            period: self.period,
        }
    }

    /// The same pattern written out over `times` periods.
    pub fn repeated(&self, times: usize) -> Schedule {
        let alloc: Vec<Vec<bool>> = self.alloc.iter().map(|r| r.repeat(times)).collect();
        Schedule {
            period: self.period * times,
            alloc,
        }
    }

    pub fn to_raw(&self) -> RawSchedule {
        RawSchedule {
            period: self.period,
            alloc: self
                .alloc
                .iter()
                .map(|r| r.iter().map(|&b| u8::from(b)).collect())
                .collect(),
        }
    }

    pub fn from_raw(raw: &RawSchedule) -> Result<Self> {
        let s = Schedule::from_bits(&raw.alloc)?;
        if s.period != raw.period {
            return Err(ModelError::RowLengthMismatch {
                row: 0,
                expected: raw.period,
                found: s.period,
            });
        }
        Ok(s)
    }

    /// Parses a schedule document. Slot budgets are checked separately by
    /// [`validate_schedule`].
    pub fn from_json(text: &str) -> std::result::Result<Self, LoadError> {
        let raw: RawSchedule = serde_json::from_str(text)?;
        Ok(Schedule::from_raw(&raw)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.to_raw()).expect("schedule serializes");
        s.push('\n');
        s
    }
}

/// On-disk form of a schedule: `{"period": 5, "alloc": [[1,0,1,1,1], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSchedule {
    pub period: usize,
    pub alloc: Vec<Vec<u8>>,
}

/// Which plants transmit at least once per period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleCoverage {
    pub covered: Vec<bool>,
}

impl ScheduleCoverage {
    pub fn of(sched: &Schedule) -> Self {
        ScheduleCoverage {
            covered: sched.rows().iter().map(|r| r.iter().any(|&b| b)).collect(),
        }
    }

    pub fn all_covered(&self) -> bool {
        self.covered.iter().all(|&c| c)
    }
}

/// Checks the schedule against the instance: one row per plant and exactly
/// `M` transmissions in every slot.
pub fn validate_schedule(instance: &Instance, sched: &Schedule) -> Result<ScheduleCoverage> {
    if sched.num_rows() != instance.num_plants() {
        return Err(ModelError::RowCountMismatch {
            expected: instance.num_plants(),
            found: sched.num_rows(),
        });
    }
    for slot in 0..sched.period() {
        let used = sched.rows().iter().filter(|r| r[slot]).count();
        if used != instance.channels() {
            return Err(ModelError::SlotBudgetViolation {
                slot,
                used,
                channels: instance.channels(),
            });
        }
    }
    Ok(ScheduleCoverage::of(sched))
}
