//! Binary model files.
//!
//! All integers and floats are little-endian; floats are IEEE-754 `f64`.
//!
//! ```text
//! magic        4 bytes  "SPND"
//! version      u32      1
//! kind         u8       1 = logistic regression, 2 = SVM, 3 = Gaussian NB
//! dimension    u64      D
//! standardized u8       0 or 1; when 1 followed by D means and D scales
//!
//! logistic regression:
//!   solver u8 (0 newton-cg, 1 lbfgs, 2 sag, 3 saga), multi_class u8 (0 ovr,
//!   1 multinomial), max_iter u32, tolerance f64, seed u64,
//!   weights D×f64, bias f64
//! SVM:
//!   kernel u8 (0 linear, 1 rbf, 2 poly), gamma f64, degree u32, coef0 f64,
//!   C f64, tol f64, support-vector count S u64, support vectors S×D f64
//!   (row-major), dual coefficients S×f64, bias f64
//! Gaussian NB:
//!   variance floor f64, then for original and paraphrased in turn:
//!   prior f64, means D×f64, variances D×f64
//! ```
//!
//! Nothing may follow the last field.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::gnb::GnbModel;
use super::kernel::KernelSpec;
use super::logreg::{LogRegHyper, LogRegModel, LrSolver, MultiClass};
use super::svm::SvmModel;
use super::{Classifier, ClassifierError, Model, Result, Standardizer};

pub const MAGIC: &[u8; 4] = b"SPND";
pub const VERSION: u32 = 1;

const KIND_LOGREG: u8 = 1;
const KIND_SVM: u8 = 2;
const KIND_GNB: u8 = 3;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| {
                ClassifierError::ModelFile(format!(
                    "truncated while reading {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
    fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?)
            .map_err(|_| ClassifierError::ModelFile(format!("{what} out of range")))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.saturating_mul(8), what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn solver_tag(s: LrSolver) -> u8 {
    match s {
        LrSolver::NewtonCg => 0,
        LrSolver::Lbfgs => 1,
        LrSolver::Sag => 2,
        LrSolver::Saga => 3,
    }
}

pub fn encode(classifier: &Classifier) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let dim = classifier.dimension();
    let kind = match classifier.model {
        Model::LogReg(_) => KIND_LOGREG,
        Model::Svm(_) => KIND_SVM,
        Model::Gnb(_) => KIND_GNB,
    };
    w.u8(kind);
    w.u64(dim as u64);
    match &classifier.scaler {
        Some(s) => {
            w.u8(1);
            w.f64s(&s.mean);
            w.f64s(&s.scale);
        }
        None => w.u8(0),
    }
    match &classifier.model {
        Model::LogReg(m) => {
            w.u8(solver_tag(m.hyper.solver));
            w.u8(match m.hyper.multi_class {
                MultiClass::Ovr => 0,
                MultiClass::Multinomial => 1,
            });
            w.u32(m.hyper.max_iter);
            w.f64(m.hyper.tolerance);
            w.u64(m.hyper.seed);
            w.f64s(&m.weights);
            w.f64(m.bias);
        }
        Model::Svm(m) => {
            let (tag, gamma, degree, coef0) = match m.kernel {
                KernelSpec::Linear => (0, 0.0, 0, 0.0),
                KernelSpec::Rbf { gamma } => (1, gamma, 0, 0.0),
                KernelSpec::Poly {
                    gamma,
                    degree,
                    coef0,
                } => (2, gamma, degree, coef0),
            };
            w.u8(tag);
            w.f64(gamma);
            w.u32(degree);
            w.f64(coef0);
            w.f64(m.c);
            w.f64(m.tol);
            w.u64(m.support_vectors.len() as u64);
            for sv in &m.support_vectors {
                w.f64s(sv);
            }
            w.f64s(&m.dual_coefs);
            w.f64(m.bias);
        }
        Model::Gnb(m) => {
            w.f64(m.var_floor);
            for c in 0..2 {
                w.f64(m.priors[c]);
                w.f64s(&m.means[c]);
                w.f64s(&m.variances[c]);
            }
        }
    }
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<Classifier> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(ClassifierError::ModelFile(format!(
            "bad magic bytes {magic:?}"
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(ClassifierError::ModelFile(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let kind = r.u8("kind")?;
    let dim = r.usize("dimension")?;
    let scaler = match r.u8("standardized flag")? {
        0 => None,
        1 => Some(Standardizer {
            mean: r.f64s(dim, "scaler means")?,
            scale: r.f64s(dim, "scaler scales")?,
        }),
        other => {
            return Err(ClassifierError::ModelFile(format!(
                "bad standardized flag {other}"
            )))
        }
    };
    let model = match kind {
        KIND_LOGREG => {
            let solver = match r.u8("solver")? {
                0 => LrSolver::NewtonCg,
                1 => LrSolver::Lbfgs,
                2 => LrSolver::Sag,
                3 => LrSolver::Saga,
                other => {
                    return Err(ClassifierError::ModelFile(format!(
                        "unknown solver tag {other}"
                    )))
                }
            };
            let multi_class = match r.u8("multi_class")? {
                0 => MultiClass::Ovr,
                1 => MultiClass::Multinomial,
                other => {
                    return Err(ClassifierError::ModelFile(format!(
                        "unknown multi_class tag {other}"
                    )))
                }
            };
            let hyper = LogRegHyper {
                solver,
                multi_class,
                max_iter: r.u32("max_iter")?,
                tolerance: r.f64("tolerance")?,
                seed: r.u64("seed")?,
            };
            Model::LogReg(LogRegModel {
                weights: r.f64s(dim, "weights")?,
                bias: r.f64("bias")?,
                hyper,
            })
        }
        KIND_SVM => {
            let tag = r.u8("kernel")?;
            let gamma = r.f64("gamma")?;
            let degree = r.u32("degree")?;
            let coef0 = r.f64("coef0")?;
            let kernel = match tag {
                0 => KernelSpec::Linear,
                1 => KernelSpec::Rbf { gamma },
                2 => KernelSpec::Poly {
                    gamma,
                    degree,
                    coef0,
                },
                other => {
                    return Err(ClassifierError::ModelFile(format!(
                        "unknown kernel tag {other}"
                    )))
                }
            };
            let c = r.f64("C")?;
            let tol = r.f64("tol")?;
            let count = r.usize("support vector count")?;
            let flat = r.f64s(count.saturating_mul(dim), "support vectors")?;
            let support_vectors = if dim == 0 {
                vec![Vec::new(); count]
            } else {
                flat.chunks_exact(dim).map(<[f64]>::to_vec).collect()
            };
            Model::Svm(SvmModel {
                dimension: dim,
                support_vectors,
                dual_coefs: r.f64s(count, "dual coefficients")?,
                bias: r.f64("bias")?,
                kernel,
                c,
                tol,
            })
        }
        KIND_GNB => {
            let var_floor = r.f64("variance floor")?;
            let mut priors = [0.0; 2];
            let mut means = [Vec::new(), Vec::new()];
            let mut variances = [Vec::new(), Vec::new()];
            for c in 0..2 {
                priors[c] = r.f64("prior")?;
                means[c] = r.f64s(dim, "means")?;
                variances[c] = r.f64s(dim, "variances")?;
            }
            Model::Gnb(GnbModel {
                priors,
                means,
                variances,
                var_floor,
            })
        }
        other => {
            return Err(ClassifierError::ModelFile(format!(
                "unknown model kind {other}"
            )))
        }
    };
    if r.pos != bytes.len() {
        return Err(ClassifierError::ModelFile(format!(
            "{} trailing bytes after model",
            bytes.len() - r.pos
        )));
    }
    Ok(Classifier { model, scaler })
}

/// Short content hash of the encoded model.
pub fn model_id(classifier: &Classifier) -> String {
    let digest = Sha256::digest(encode(classifier));
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_model(classifier: &Classifier, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(classifier)).map_err(|source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
